use std::fs;
use std::path::Path;

use neugen_core::features::SiftParams;
use neugen_core::image::{read_ngf1, save_image, ImageF};
use neugen_core::metrics::SsimParams;
use neugen_core::pipeline::*;
use neugen_core::synth;
use neugen_core::{Error, NeuGenConfig};

fn write_png(path: &Path, img: &ImageF) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    save_image(img, path, 16).unwrap();
}

fn texture_scene(root: &Path, name: &str, n: usize, seed: u64) {
    for k in 0..n {
        let img = synth::texture(48, 48, 3, seed + k as u64);
        write_png(&root.join(name).join(format!("{k}.png")), &img);
    }
}

fn strip_timestamp(json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn scan_finds_scenes_with_pngs() {
    let dir = tempfile::tempdir().unwrap();
    texture_scene(dir.path(), "lego", 3, 0);
    texture_scene(dir.path(), "drums", 2, 10);
    fs::create_dir_all(dir.path().join("empty")).unwrap();
    fs::write(dir.path().join("drums/notes.txt"), "x").unwrap();
    fs::write(dir.path().join("top.png"), "not in a scene").unwrap();

    let set = scan_dataset(dir.path()).unwrap();
    let names: Vec<_> = set.scenes.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["drums", "lego"]);
    assert_eq!(set.scenes[0].images.len(), 2);
    assert_eq!(set.scenes[1].images.len(), 3);
    assert_eq!(set.image_count(), 5);
    assert!(set.scenes.iter().flat_map(|s| &s.images).all(|p| p.exists()));
}

#[test]
fn scan_orders_lexicographically() {
    let dir = tempfile::tempdir().unwrap();
    let img = synth::texture(16, 16, 1, 0);
    for name in ["2.png", "10.png", "0.png"] {
        write_png(&dir.path().join("s").join(name), &img);
    }
    let set = scan_dataset(dir.path()).unwrap();
    let files: Vec<_> = set.scenes[0]
        .images
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(files, ["0.png", "10.png", "2.png"]);
}

#[test]
fn scan_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("a/b")).unwrap();
    fs::write(dir.path().join("a/readme.txt"), "x").unwrap();
    assert!(matches!(scan_dataset(dir.path()), Err(Error::EmptyDataset(_))));
    let file = dir.path().join("a/readme.txt");
    assert!(matches!(scan_dataset(&file), Err(Error::NotADirectory(_))));
    assert!(matches!(
        scan_dataset(dir.path().join("missing")),
        Err(Error::FileNotFound(_))
    ));
}

#[test]
fn transform_writes_mirrored_tree() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out) = (dir.path().join("in"), dir.path().join("out"));
    texture_scene(&input, "lego", 2, 0);
    texture_scene(&input, "drums", 2, 5);
    let set = scan_dataset(&input).unwrap();
    let summary = transform_batch(&set, &NeuGenConfig::default(), &out, Emit::Both).unwrap();
    assert_eq!((summary.total, summary.processed, summary.skipped, summary.failed), (4, 4, 0, 0));
    assert!(summary.degenerate.is_empty());
    for scene in ["lego", "drums"] {
        for k in 0..2 {
            let d = out.join(scene);
            let map = read_ngf1(d.join(format!("{k}.ngf1"))).unwrap();
            assert_eq!((map.width(), map.height(), map.channels()), (48, 48, 1));
            assert!((map.max_value() - 1.0).abs() < 1e-6);
            assert!(d.join(format!("{k}_gmap.png")).is_file());
            assert!(d.join(format!("{k}_enhanced.png")).is_file());
        }
    }

    let only = dir.path().join("only_gmap");
    transform_batch(&set, &NeuGenConfig::default(), &only, Emit::Gmap).unwrap();
    assert!(only.join("lego/0.ngf1").is_file());
    assert!(!only.join("lego/0_enhanced.png").exists());
}

#[test]
fn transform_isolates_failures_and_flags_constant_images() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out) = (dir.path().join("in"), dir.path().join("out"));
    texture_scene(&input, "s", 1, 0);
    write_png(&input.join("s/flat.png"), &ImageF::filled(32, 32, 3, 0.4).unwrap());
    write_png(&input.join("s/tiny.png"), &ImageF::filled(1, 1, 1, 0.4).unwrap());
    fs::write(input.join("s/broken.png"), b"\x89PNG\r\n\x1a\n garbage").unwrap();

    let set = scan_dataset(&input).unwrap();
    let summary = transform_batch(&set, &NeuGenConfig::default(), &out, Emit::Both).unwrap();
    assert_eq!(summary.total, 4);
    assert_eq!(summary.processed, 2);
    assert_eq!(summary.skipped, 1);
    assert_eq!(summary.failed, 1);
    assert_eq!(summary.processed + summary.skipped + summary.failed, summary.total);
    assert_eq!(summary.degenerate, ["s/flat.png"]);
    let issues: Vec<_> = summary.issues.iter().map(|i| i.image.as_str()).collect();
    assert_eq!(issues, ["s/broken.png", "s/tiny.png"]);
    let flat = read_ngf1(out.join("s/flat.ngf1")).unwrap();
    assert!(flat.data().iter().all(|&v| v == 0.0));
}

#[test]
fn transform_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    texture_scene(&input, "s", 3, 2);
    let set = scan_dataset(&input).unwrap();
    let cfg = NeuGenConfig::default();
    transform_batch(&set, &cfg, dir.path().join("a"), Emit::Both).unwrap();
    with_workers(1, || transform_batch(&set, &cfg, dir.path().join("b"), Emit::Both))
        .unwrap()
        .unwrap();
    for k in 0..3 {
        for suffix in [".ngf1", "_gmap.png", "_enhanced.png"] {
            let name = format!("s/{k}{suffix}");
            assert_eq!(
                fs::read(dir.path().join("a").join(&name)).unwrap(),
                fs::read(dir.path().join("b").join(&name)).unwrap(),
                "{name}"
            );
        }
    }
}

#[test]
fn eval_on_affine_scene() {
    let dir = tempfile::tempdir().unwrap();
    synth::write_affine_corpus(dir.path(), 1, 48, 4).unwrap();
    let set = scan_dataset(dir.path()).unwrap();
    let report = eval_effect(
        &set,
        &NeuGenConfig::default(),
        &SsimParams::default(),
        &SiftParams::default(),
    )
    .unwrap();
    assert_eq!(report.kind, ReportKind::Eval);
    assert_eq!(report.scenes.len(), 1);
    assert_eq!(report.pairs.len(), 4);
    let s = &report.scenes[0];
    assert!((s.neugen_class_ssim - 1.0).abs() < 1e-5, "{s:?}");
    assert!(s.original_class_ssim < 1.0);
    assert_eq!(report.pairs[0].first, "scene_00/00.png");
    assert_eq!(report.pairs[0].second, "scene_00/01.png");
    let summary = report.summary.as_ref().unwrap();
    assert_eq!((summary.scenes, summary.pairs), (1, 4));

    let back = EvalReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn eval_identical_pair_and_skips() {
    let dir = tempfile::tempdir().unwrap();
    let img = synth::texture(40, 40, 3, 1);
    write_png(&dir.path().join("same/a.png"), &img);
    write_png(&dir.path().join("same/b.png"), &img);
    write_png(&dir.path().join("single/a.png"), &img);
    write_png(&dir.path().join("mixed/a.png"), &img);
    write_png(&dir.path().join("mixed/b.png"), &synth::texture(32, 40, 3, 1));

    let set = scan_dataset(dir.path()).unwrap();
    let report = eval_effect(
        &set,
        &NeuGenConfig::default(),
        &SsimParams::default(),
        &SiftParams::default(),
    )
    .unwrap();
    assert_eq!(report.scenes.len(), 1);
    let s = &report.scenes[0];
    assert_eq!(s.scene, "same");
    assert_eq!(s.original_class_ssim, 1.0);
    assert_eq!(s.neugen_class_ssim, 1.0);
    let skipped: Vec<_> = report.skipped.iter().map(|s| s.scene.as_str()).collect();
    assert_eq!(skipped, ["mixed", "single"]);
    assert_eq!(report.evaluated_scenes(), 1);
}

#[test]
fn sweep_rows_and_identity_weight() {
    let dir = tempfile::tempdir().unwrap();
    texture_scene(dir.path(), "s", 3, 7);
    let set = scan_dataset(dir.path()).unwrap();
    let (cfg, ssim, sift) = (NeuGenConfig::default(), SsimParams::default(), SiftParams::default());

    let rows = weight_sweep(&set, &[0.0], &cfg, &ssim, &sift).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].weight, 0.0);
    assert_eq!(rows[0].mean_class_ssim, 1.0);
    assert_eq!(rows[0].mean_match_delta, 0.0);
    assert_eq!(rows[0].scenes[0].pairs, 2);

    let rows = weight_sweep(&set, &DEFAULT_SWEEP_WEIGHTS, &cfg, &ssim, &sift).unwrap();
    assert_eq!(rows.len(), 7);
    let ws: Vec<f32> = rows.iter().map(|r| r.weight).collect();
    assert_eq!(ws, DEFAULT_SWEEP_WEIGHTS);
    assert!(rows.iter().all(|r| r.mean_class_ssim < 1.0));

    let rows = weight_sweep(&set, &[1.0, 0.0, 0.5], &cfg, &ssim, &sift).unwrap();
    let ws: Vec<f32> = rows.iter().map(|r| r.weight).collect();
    assert_eq!(ws, [0.0, 0.5, 1.0]);
}

#[test]
fn sweep_rejects_bad_weight_lists_before_reading() {
    // the scene files do not exist, so any work would fail differently
    let set = SceneSet {
        root: "nowhere".into(),
        scenes: vec![Scene {
            name: "ghost".into(),
            images: vec!["nowhere/ghost/0.png".into()],
        }],
    };
    let (cfg, ssim, sift) = (NeuGenConfig::default(), SsimParams::default(), SiftParams::default());
    for bad in [&[][..], &[0.5, 0.5], &[-0.1], &[f32::NAN]] {
        assert!(matches!(
            weight_sweep(&set, bad, &cfg, &ssim, &sift),
            Err(Error::Usage(_))
        ));
    }
}

#[test]
fn csv_shape_and_report_stability() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    texture_scene(&data, "a", 2, 0);
    texture_scene(&data, "b", 3, 4);
    let set = scan_dataset(&data).unwrap();
    let (cfg, ssim, sift) = (NeuGenConfig::default(), SsimParams::default(), SiftParams::default());

    let report = eval_effect(&set, &cfg, &ssim, &sift).unwrap();
    let csv_path = dir.path().join("r.csv");
    emit_report(&report, ReportFormat::Csv, &csv_path).unwrap();
    let csv = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "scene,metric,variant,weight,value");
    // scenes x metrics x variants
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1].starts_with("a,class_ssim,original,,"));

    let mut again = eval_effect(&set, &cfg, &ssim, &sift).unwrap();
    again.timestamp = "1970-01-01T00:00:00Z".into();
    let csv2 = dir.path().join("r2.csv");
    emit_report(&again, ReportFormat::Csv, &csv2).unwrap();
    assert_eq!(fs::read(&csv_path).unwrap(), fs::read(&csv2).unwrap());

    let (j1, j2) = (dir.path().join("r.json"), dir.path().join("r2.json"));
    emit_report(&report, ReportFormat::Json, &j1).unwrap();
    emit_report(&again, ReportFormat::Json, &j2).unwrap();
    let (t1, t2) = (fs::read_to_string(&j1).unwrap(), fs::read_to_string(&j2).unwrap());
    assert_eq!(strip_timestamp(&t1), strip_timestamp(&t2));
    assert_eq!(EvalReport::from_json(&t1).unwrap(), report);

    let sweep = sweep_report(&set, &[0.5, 1.5], &cfg, &ssim, &sift).unwrap();
    let rows = sweep.to_csv().unwrap();
    // weights x scenes x metrics
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 2);
    assert!(rows.lines().nth(1).unwrap().starts_with("a,class_ssim,enhanced,0.5,"));
    assert_eq!(sweep.config.weights, [0.5, 1.5]);
    assert_eq!(EvalReport::from_json(&sweep.to_json().unwrap()).unwrap(), sweep);
}

#[test]
fn worker_count_resolution() {
    // the environment variable is process-wide; this is the only test touching it
    std::env::remove_var(WORKERS_ENV);
    assert_eq!(worker_count(Some(3)).unwrap(), 3);
    assert!(worker_count(Some(0)).is_err());
    std::env::set_var(WORKERS_ENV, "2");
    assert_eq!(worker_count(Some(3)).unwrap(), 2);
    std::env::set_var(WORKERS_ENV, "zero");
    assert!(worker_count(None).is_err());
    std::env::remove_var(WORKERS_ENV);
    assert!(worker_count(None).unwrap() >= 1);
    assert_eq!(with_workers(2, rayon_threads).unwrap(), 2);
}

fn rayon_threads() -> usize {
    rayon::current_num_threads()
}
