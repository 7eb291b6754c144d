//! Directory-level driver: scan a dataset of scene folders, write contrast
//! maps and enhanced images, evaluate their effect on SSIM and feature
//! matching, sweep the fusion weight, and emit JSON or CSV reports.
//!
//! Work is spread over a rayon pool; every list in the output follows input
//! order, so results do not depend on the worker count.

mod batch;
mod dataset;
mod eval;
mod report;

pub use batch::{transform_batch, Emit, ImageIssue, TransformSummary};
pub use dataset::{scan_dataset, Scene, SceneSet};
pub use eval::{
    check_weights, eval_effect, sweep_report, weight_sweep, EvalSummary, PairRecord, SceneRecord,
    SkippedScene, SweepRow, SweepScene, DEFAULT_SWEEP_WEIGHTS,
};
pub use report::{
    emit_report, ConfigSnapshot, CsvRow, EvalReport, ReportFormat, ReportKind, CSV_COLUMNS,
    TOOL_NAME, TOOL_VERSION,
};

use crate::error::{Error, Result};

/// Overrides the worker count when set to a positive integer.
pub const WORKERS_ENV: &str = "NEUGEN_WORKERS";

/// Worker count from the environment, else `requested`, else the number of
/// available cores.
pub fn worker_count(requested: Option<usize>) -> Result<usize> {
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        return match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Usage(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))),
        };
    }
    if let Some(n) = requested {
        if n == 0 {
            return Err(Error::Usage("worker count must be >= 1".into()));
        }
        return Ok(n);
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` inside a dedicated pool of `workers` threads.
pub fn with_workers<R, F>(workers: usize, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
