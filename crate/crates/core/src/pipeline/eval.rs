use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Scene, SceneSet};
use super::report::{ConfigSnapshot, EvalReport, ReportKind};
use crate::error::{Error, Result};
use crate::features::{extract, match_descriptors, Descriptor, MatchReport, SiftParams};
use crate::image::{load_image, ImageF};
use crate::metrics::{class_ssim, ssim, SsimParams};
use crate::neugen::{fuse, neugen_map, NeuGenConfig};

/// Weights scanned by `sweep` when none are given.
pub const DEFAULT_SWEEP_WEIGHTS: [f32; 7] = [0.5, 0.55, 0.72, 0.74, 1.2, 1.5, 2.9];

/// Class-level scores for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene: String,
    pub images: usize,
    pub original_class_ssim: f64,
    pub neugen_class_ssim: f64,
    pub original_mean_matches: f64,
    pub neugen_mean_matches: f64,
}

/// Match counts for two consecutive images of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub scene: String,
    pub first: String,
    pub second: String,
    pub original: MatchReport,
    pub neugen: MatchReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedScene {
    pub scene: String,
    pub reason: String,
}

/// Means over all evaluated scenes and pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub scenes: usize,
    pub pairs: usize,
    pub mean_original_class_ssim: f64,
    pub mean_neugen_class_ssim: f64,
    pub mean_original_matches: f64,
    pub mean_neugen_matches: f64,
    /// Pairs whose contrast maps matched at least as well as the originals.
    pub pairs_neugen_not_worse: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepScene {
    pub scene: String,
    /// Mean SSIM of each enhanced image against its original.
    pub class_ssim: f64,
    /// Mean over adjacent pairs of enhanced minus original match counts.
    pub match_delta: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub weight: f32,
    pub scenes: Vec<SweepScene>,
    pub mean_class_ssim: f64,
    /// Averaged over every adjacent pair in the dataset.
    pub mean_match_delta: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn load_scene(scene: &Scene) -> Result<Vec<ImageF>> {
    let images: Vec<ImageF> = scene
        .images
        .par_iter()
        .map(load_image)
        .collect::<Result<_>>()?;
    if let Some(first) = images.first() {
        if let Some(odd) = scene
            .images
            .iter()
            .zip(&images)
            .find(|(_, img)| !img.same_shape(first))
        {
            return Err(Error::DimensionMismatch(format!(
                "{} differs in size from {}",
                scene.label(odd.0),
                scene.label(&scene.images[0])
            )));
        }
    }
    Ok(images)
}

fn contrast_maps(images: &[ImageF], cfg: &NeuGenConfig) -> Result<Vec<ImageF>> {
    images
        .par_iter()
        .map(|img| neugen_map(img, cfg).map(|g| g.map))
        .collect()
}

fn descriptors(images: &[ImageF], sift: &SiftParams) -> Result<Vec<Vec<Descriptor>>> {
    images
        .par_iter()
        .map(|img| extract(img, sift).map(|(_, d)| d))
        .collect()
}

fn adjacent_matches(descs: &[Vec<Descriptor>], ratio: f32) -> Result<Vec<MatchReport>> {
    descs
        .windows(2)
        .map(|w| match_descriptors(&w[0], &w[1], ratio))
        .collect()
}

fn eval_scene(
    scene: &Scene,
    cfg: &NeuGenConfig,
    params: &SsimParams,
    sift: &SiftParams,
) -> Result<(SceneRecord, Vec<PairRecord>)> {
    if scene.images.len() < 2 {
        return Err(Error::TooFewImages {
            needed: 2,
            got: scene.images.len(),
        });
    }
    let images = load_scene(scene)?;
    let maps = contrast_maps(&images, cfg)?;
    let original_ssim = class_ssim(&images, params)?;
    let neugen_ssim = class_ssim(&maps, params)?;
    let original = adjacent_matches(&descriptors(&images, sift)?, sift.ratio)?;
    let neugen = adjacent_matches(&descriptors(&maps, sift)?, sift.ratio)?;

    let pairs: Vec<PairRecord> = original
        .iter()
        .zip(&neugen)
        .enumerate()
        .map(|(k, (o, n))| PairRecord {
            scene: scene.name.clone(),
            first: scene.label(&scene.images[k]),
            second: scene.label(&scene.images[k + 1]),
            original: *o,
            neugen: *n,
        })
        .collect();
    let record = SceneRecord {
        scene: scene.name.clone(),
        images: images.len(),
        original_class_ssim: original_ssim,
        neugen_class_ssim: neugen_ssim,
        original_mean_matches: mean(original.iter().map(|r| r.matches as f64)),
        neugen_mean_matches: mean(neugen.iter().map(|r| r.matches as f64)),
    };
    Ok((record, pairs))
}

/// Compares every scene's originals with their contrast maps: the class
/// SSIM (first image against the rest) and feature matches between
/// consecutive images.
///
/// Scenes with fewer than two images, unreadable files or mixed sizes are
/// listed under `skipped` and do not stop the run.
pub fn eval_effect(
    set: &SceneSet,
    cfg: &NeuGenConfig,
    params: &SsimParams,
    sift: &SiftParams,
) -> Result<EvalReport> {
    cfg.validate()?;
    params.validate()?;
    sift.validate()?;
    let results: Vec<_> = set
        .scenes
        .par_iter()
        .map(|scene| eval_scene(scene, cfg, params, sift))
        .collect();

    let mut report = EvalReport::new(
        ReportKind::Eval,
        ConfigSnapshot {
            neugen: *cfg,
            ssim: *params,
            sift: *sift,
            weights: Vec::new(),
        },
    );
    for (scene, result) in set.scenes.iter().zip(results) {
        match result {
            Ok((record, pairs)) => {
                report.scenes.push(record);
                report.pairs.extend(pairs);
            }
            Err(e) => report.skipped.push(SkippedScene {
                scene: scene.name.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if !report.scenes.is_empty() {
        let s = &report.scenes;
        let p = &report.pairs;
        report.summary = Some(EvalSummary {
            scenes: s.len(),
            pairs: p.len(),
            mean_original_class_ssim: mean(s.iter().map(|r| r.original_class_ssim)),
            mean_neugen_class_ssim: mean(s.iter().map(|r| r.neugen_class_ssim)),
            mean_original_matches: mean(p.iter().map(|r| r.original.matches as f64)),
            mean_neugen_matches: mean(p.iter().map(|r| r.neugen.matches as f64)),
            pairs_neugen_not_worse: p
                .iter()
                .filter(|r| r.neugen.matches >= r.original.matches)
                .count(),
        });
    }
    Ok(report)
}

/// Rejects empty, duplicated, negative or non-finite weight lists.
pub fn check_weights(weights: &[f32]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Usage("weight list is empty".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Usage(format!("weights must be finite and >= 0, got {w}")));
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(f32::total_cmp);
    if let Some(pair) = sorted.windows(2).find(|p| p[0] == p[1]) {
        return Err(Error::Usage(format!("duplicate weight {}", pair[0])));
    }
    Ok(())
}

/// Everything about a scene that does not depend on the weight.
struct Prepared {
    name: String,
    images: Vec<ImageF>,
    maps: Vec<ImageF>,
    original: Vec<MatchReport>,
}

fn prepare(scene: &Scene, cfg: &NeuGenConfig, sift: &SiftParams) -> Result<Prepared> {
    let images = load_scene(scene)?;
    let maps = contrast_maps(&images, cfg)?;
    let original = adjacent_matches(&descriptors(&images, sift)?, sift.ratio)?;
    Ok(Prepared {
        name: scene.name.clone(),
        images,
        maps,
        original,
    })
}

fn sweep_scene(
    p: &Prepared,
    w: f32,
    params: &SsimParams,
    sift: &SiftParams,
) -> Result<(SweepScene, Vec<f64>)> {
    let enhanced: Vec<ImageF> = p
        .images
        .par_iter()
        .zip(&p.maps)
        .map(|(img, map)| fuse(img, map, w))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = p
        .images
        .par_iter()
        .zip(&enhanced)
        .map(|(a, b)| ssim(a, b, params))
        .collect::<Result<_>>()?;
    let matches = adjacent_matches(&descriptors(&enhanced, sift)?, sift.ratio)?;
    let deltas: Vec<f64> = matches
        .iter()
        .zip(&p.original)
        .map(|(e, o)| e.matches as f64 - o.matches as f64)
        .collect();
    let row = SweepScene {
        scene: p.name.clone(),
        class_ssim: mean(scores),
        match_delta: mean(deltas.iter().copied()),
        pairs: deltas.len(),
    };
    Ok((row, deltas))
}

pub(crate) fn sweep_inner(
    set: &SceneSet,
    weights: &[f32],
    cfg: &NeuGenConfig,
    params: &SsimParams,
    sift: &SiftParams,
) -> Result<(Vec<SweepRow>, Vec<SkippedScene>)> {
    check_weights(weights)?;
    cfg.validate()?;
    params.validate()?;
    sift.validate()?;
    let mut weights = weights.to_vec();
    weights.sort_by(f32::total_cmp);

    let prepared: Vec<Result<Prepared>> = set
        .scenes
        .par_iter()
        .map(|scene| prepare(scene, cfg, sift))
        .collect();
    let mut ready = Vec::new();
    let mut skipped = Vec::new();
    for (scene, p) in set.scenes.iter().zip(prepared) {
        match p {
            Ok(p) => ready.push(p),
            Err(e) => skipped.push(SkippedScene {
                scene: scene.name.clone(),
                reason: e.to_string(),
            }),
        }
    }

    let mut rows = Vec::with_capacity(weights.len());
    for &w in &weights {
        let per_scene: Vec<Result<(SweepScene, Vec<f64>)>> = ready
            .par_iter()
            .map(|p| sweep_scene(p, w, params, sift))
            .collect();
        let mut scenes = Vec::with_capacity(ready.len());
        let mut all_deltas = Vec::new();
        for r in per_scene {
            let (scene, deltas) = r?;
            scenes.push(scene);
            all_deltas.extend(deltas);
        }
        rows.push(SweepRow {
            weight: w,
            mean_class_ssim: mean(scenes.iter().map(|s| s.class_ssim)),
            mean_match_delta: mean(all_deltas),
            scenes,
        });
    }
    Ok((rows, skipped))
}

/// Enhances every image at each weight and scores the result against the
/// originals: mean SSIM per scene and the change in adjacent-pair match
/// counts. Rows come back sorted by weight.
///
/// The weight list is checked before any image is read. Scenes that cannot
/// be loaded are left out of every row.
pub fn weight_sweep(
    set: &SceneSet,
    weights: &[f32],
    cfg: &NeuGenConfig,
    params: &SsimParams,
    sift: &SiftParams,
) -> Result<Vec<SweepRow>> {
    sweep_inner(set, weights, cfg, params, sift).map(|(rows, _)| rows)
}

/// [`weight_sweep`] wrapped in a report, with skipped scenes listed.
pub fn sweep_report(
    set: &SceneSet,
    weights: &[f32],
    cfg: &NeuGenConfig,
    params: &SsimParams,
    sift: &SiftParams,
) -> Result<EvalReport> {
    let (rows, skipped) = sweep_inner(set, weights, cfg, params, sift)?;
    let mut sorted = weights.to_vec();
    sorted.sort_by(f32::total_cmp);
    let mut report = EvalReport::new(
        ReportKind::Sweep,
        ConfigSnapshot {
            neugen: *cfg,
            ssim: *params,
            sift: *sift,
            weights: sorted,
        },
    );
    report.sweep = rows;
    report.skipped = skipped;
    Ok(report)
}
