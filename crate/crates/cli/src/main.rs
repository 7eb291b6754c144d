use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use neugen_core::features::SiftParams;
use neugen_core::image::{load_image, save_image};
use neugen_core::metrics::{score_pair, SsimParams};
use neugen_core::pipeline::{
    emit_report, eval_effect, scan_dataset, sweep_report, transform_batch, with_workers,
    worker_count, EvalReport, ReportFormat, DEFAULT_SWEEP_WEIGHTS, TOOL_VERSION,
};
use neugen_core::volren::run_fixtures;
use neugen_core::NeuGenConfig;

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "neugen", version, about = "Patch-statistics contrast maps for image datasets")]
struct Cli {
    /// Worker threads (the NEUGEN_WORKERS environment variable takes precedence).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write contrast maps and/or enhanced images for every scene.
    Transform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        patch_size: usize,
        #[arg(long, default_value_t = 0.5)]
        weight: f32,
        #[arg(long, value_enum, default_value_t = EmitArg::Both)]
        emit: EmitArg,
    },
    /// Compare class SSIM and feature matches of originals and contrast maps.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        patch_size: usize,
        #[arg(long, default_value_t = 11)]
        ssim_window: usize,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
    },
    /// Score enhanced images over a list of fusion weights.
    Sweep {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated, distinct, >= 0.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        weights: Option<Vec<f32>>,
        #[arg(long, default_value_t = 3)]
        patch_size: usize,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
    },
    /// Render the built-in volume fixtures and check them.
    RenderTest {
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print SSIM and PSNR for one image pair.
    Metrics {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 11)]
        ssim_window: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EmitArg {
    Gmap,
    Enhanced,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

impl From<EmitArg> for neugen_core::pipeline::Emit {
    fn from(e: EmitArg) -> Self {
        use neugen_core::pipeline::Emit;
        match e {
            EmitArg::Gmap => Emit::Gmap,
            EmitArg::Enhanced => Emit::Enhanced,
            EmitArg::Both => Emit::Both,
        }
    }
}

/// Run finished, but nothing in it succeeded.
#[derive(Debug)]
struct AllFailed(String);

impl std::fmt::Display for AllFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AllFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use neugen_core::Error as E;
    if err.is::<AllFailed>() {
        return EXIT_ALL_FAILED;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::Usage(_)
            | E::InvalidParameter(_)
            | E::InvalidPatchSize(_)
            | E::PatchTooLarge { .. }
            | E::TooFewImages { .. }
            | E::DimensionMismatch(_),
        ) => EXIT_USAGE,
        _ => EXIT_IO,
    }
}

fn echo(command: &str, workers: usize, settings: serde_json::Value) {
    eprintln!("neugen {TOOL_VERSION} {command} workers={workers} {settings}");
}

fn write_report(report: &EvalReport, format: FormatArg, path: &Path) -> anyhow::Result<()> {
    emit_report(report, format.into(), path)?;
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.scene, s.reason);
    }
    println!("report written to {}", path.display());
    if report.evaluated_scenes() == 0 {
        return Err(AllFailed("every scene failed".into()).into());
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let workers = worker_count(cli.workers)?;
    match cli.command {
        Command::Transform {
            input,
            out,
            patch_size,
            weight,
            emit,
        } => {
            let cfg = NeuGenConfig::new(patch_size, weight)?;
            echo(
                "transform",
                workers,
                json!({"in": input, "out": out, "config": cfg, "emit": format!("{emit:?}").to_lowercase()}),
            );
            let set = scan_dataset(&input)?;
            let summary = with_workers(workers, || transform_batch(&set, &cfg, &out, emit.into()))??;
            fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")
                .context("writing summary.json")?;
            println!(
                "total {} processed {} skipped {} failed {}",
                summary.total, summary.processed, summary.skipped, summary.failed
            );
            for d in &summary.degenerate {
                println!("degenerate {d}");
            }
            for issue in &summary.issues {
                eprintln!("{}: {}", issue.image, issue.reason);
            }
            if summary.processed == 0 {
                return Err(AllFailed("no image could be transformed".into()).into());
            }
            Ok(())
        }
        Command::Eval {
            input,
            patch_size,
            ssim_window,
            report,
            format,
        } => {
            let cfg = NeuGenConfig::new(patch_size, NeuGenConfig::default().fusion_weight)?;
            let ssim = SsimParams::default().with_window(ssim_window);
            let sift = SiftParams::default();
            echo(
                "eval",
                workers,
                json!({"in": input, "report": report, "config": cfg, "ssim": ssim, "sift": sift}),
            );
            let set = scan_dataset(&input)?;
            let r = with_workers(workers, || eval_effect(&set, &cfg, &ssim, &sift))??;
            if let Some(s) = &r.summary {
                println!(
                    "class ssim original {:.6} neugen {:.6}; mean matches original {:.2} neugen {:.2}",
                    s.mean_original_class_ssim,
                    s.mean_neugen_class_ssim,
                    s.mean_original_matches,
                    s.mean_neugen_matches
                );
            }
            write_report(&r, format, &report)
        }
        Command::Sweep {
            input,
            weights,
            patch_size,
            report,
            format,
        } => {
            let weights = weights.unwrap_or_else(|| DEFAULT_SWEEP_WEIGHTS.to_vec());
            let cfg = NeuGenConfig::new(patch_size, NeuGenConfig::default().fusion_weight)?;
            let ssim = SsimParams::default();
            let sift = SiftParams::default();
            echo(
                "sweep",
                workers,
                json!({"in": input, "report": report, "weights": weights, "config": cfg}),
            );
            neugen_core::pipeline::check_weights(&weights)?;
            let set = scan_dataset(&input)?;
            let r = with_workers(workers, || sweep_report(&set, &weights, &cfg, &ssim, &sift))??;
            for row in &r.sweep {
                println!(
                    "w {:<6} class ssim {:.6} match delta {:+.3}",
                    row.weight, row.mean_class_ssim, row.mean_match_delta
                );
            }
            write_report(&r, format, &report)
        }
        Command::RenderTest { samples, size, out } => {
            echo("render-test", workers, json!({"samples": samples, "size": size, "out": out}));
            if samples == 0 || size == 0 {
                return Err(neugen_core::Error::Usage("samples and size must be >= 1".into()).into());
            }
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let outcomes = with_workers(workers, || run_fixtures(size, samples))??;
            let mut rows = Vec::new();
            for o in &outcomes {
                if let Some(img) = &o.image {
                    save_image(img, out.join(format!("{}.png", o.name)), 8)?;
                }
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
                rows.push(json!({"name": o.name, "passed": o.passed, "detail": o.detail}));
            }
            let summary = json!({"samples": samples, "size": size, "fixtures": rows});
            fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")
                .context("writing summary.json")?;
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            if failed > 0 {
                return Err(AllFailed(format!("{failed} of {} fixtures failed", outcomes.len())).into());
            }
            Ok(())
        }
        Command::Metrics { a, b, ssim_window } => {
            let params = SsimParams::default().with_window(ssim_window);
            echo("metrics", workers, json!({"a": a, "b": b, "ssim": params}));
            let (ia, ib) = (load_image(&a)?, load_image(&b)?);
            let score = score_pair(&ia, &ib, &params)?;
            println!("{}", serde_json::to_string(&score)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
