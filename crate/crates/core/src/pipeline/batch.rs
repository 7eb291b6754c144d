use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::SceneSet;
use crate::error::{Error, Result};
use crate::image::{load_image, save_image, write_ngf1};
use crate::neugen::{fuse, neugen_map, NeuGenConfig};

/// Which products `transform_batch` writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Gmap,
    Enhanced,
    #[default]
    Both,
}

impl Emit {
    fn gmap(self) -> bool {
        matches!(self, Emit::Gmap | Emit::Both)
    }

    fn enhanced(self) -> bool {
        matches!(self, Emit::Enhanced | Emit::Both)
    }
}

impl std::str::FromStr for Emit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmap" => Ok(Emit::Gmap),
            "enhanced" => Ok(Emit::Enhanced),
            "both" => Ok(Emit::Both),
            _ => Err(Error::Usage(format!("unknown emit mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageIssue {
    /// `scene/file.png`
    pub image: String,
    pub reason: String,
}

/// Counts reconcile: `processed + skipped + failed == total`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSummary {
    pub total: usize,
    pub processed: usize,
    /// Images too small for the configured patch.
    pub skipped: usize,
    /// Unreadable inputs or failed writes.
    pub failed: usize,
    /// Processed images whose map came out blank.
    pub degenerate: Vec<String>,
    pub issues: Vec<ImageIssue>,
}

enum Outcome {
    Done { degenerate: bool },
    Skipped(String),
    Failed(String),
}

fn transform_one(input: &Path, dir: &Path, cfg: &NeuGenConfig, emit: Emit) -> Result<bool> {
    let img = load_image(input)?;
    let g = neugen_map(&img, cfg)?;
    let stem = input.file_stem().unwrap_or_default().to_string_lossy();
    if emit.gmap() {
        write_ngf1(&g.map, dir.join(format!("{stem}.ngf1")))?;
        save_image(&g.map, dir.join(format!("{stem}_gmap.png")), 16)?;
    }
    if emit.enhanced() {
        let enhanced = fuse(&img, &g.map, cfg.fusion_weight)?;
        save_image(&enhanced, dir.join(format!("{stem}_enhanced.png")), 16)?;
    }
    Ok(g.degenerate)
}

/// Writes contrast maps and/or enhanced images for every input into
/// `out_root/<scene>/`.
///
/// Per input, `gmap` writes `<stem>.ngf1` (exact samples) and
/// `<stem>_gmap.png` (16-bit preview); `enhanced` writes
/// `<stem>_enhanced.png` (16-bit). A bad input is recorded in the summary
/// and the batch moves on; only failing to create the output directories is
/// an error.
pub fn transform_batch(
    set: &SceneSet,
    cfg: &NeuGenConfig,
    out_root: impl AsRef<Path>,
    emit: Emit,
) -> Result<TransformSummary> {
    cfg.validate()?;
    let out_root = out_root.as_ref();
    let mut jobs: Vec<(String, PathBuf, &Path)> = Vec::with_capacity(set.image_count());
    for scene in &set.scenes {
        let dir = out_root.join(&scene.name);
        fs::create_dir_all(&dir)?;
        for image in &scene.images {
            jobs.push((scene.label(image), dir.clone(), image));
        }
    }

    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|(_, dir, input)| match transform_one(input, dir, cfg, emit) {
            Ok(degenerate) => Outcome::Done { degenerate },
            Err(e @ Error::PatchTooLarge { .. }) => Outcome::Skipped(e.to_string()),
            Err(e) => Outcome::Failed(e.to_string()),
        })
        .collect();

    let mut summary = TransformSummary {
        total: jobs.len(),
        ..Default::default()
    };
    for ((label, _, _), outcome) in jobs.into_iter().zip(outcomes) {
        match outcome {
            Outcome::Done { degenerate } => {
                summary.processed += 1;
                if degenerate {
                    summary.degenerate.push(label);
                }
            }
            Outcome::Skipped(reason) => {
                summary.skipped += 1;
                summary.issues.push(ImageIssue { image: label, reason });
            }
            Outcome::Failed(reason) => {
                summary.failed += 1;
                summary.issues.push(ImageIssue { image: label, reason });
            }
        }
    }
    Ok(summary)
}
