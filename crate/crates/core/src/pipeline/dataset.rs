use std::ffi::OsStr;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One directory of images treated as a single class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    pub images: Vec<PathBuf>,
}

impl Scene {
    /// `name/file.png`, used to label rows and outputs.
    pub fn label(&self, image: &Path) -> String {
        let file = image.file_name().unwrap_or_default().to_string_lossy();
        format!("{}/{}", self.name, file)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSet {
    pub root: PathBuf,
    pub scenes: Vec<Scene>,
}

impl SceneSet {
    pub fn image_count(&self) -> usize {
        self.scenes.iter().map(|s| s.images.len()).sum()
    }
}

fn is_png(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(OsStr::to_str)
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Lists one scene per immediate subdirectory of `root` that holds at least
/// one PNG. Scenes and images are sorted by file name, byte-wise, so
/// `10.png` sorts before `2.png`.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<SceneSet> {
    let root = root.as_ref();
    if !root.exists() {
        return Err(Error::FileNotFound(root.to_path_buf()));
    }
    if !root.is_dir() {
        return Err(Error::NotADirectory(root.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    dirs.retain(|p| p.is_dir());
    dirs.sort();

    let mut scenes = Vec::new();
    for dir in dirs {
        let mut images: Vec<PathBuf> = fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        images.retain(|p| is_png(p));
        if images.is_empty() {
            continue;
        }
        images.sort();
        scenes.push(Scene {
            name: dir.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            images,
        });
    }
    if scenes.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    Ok(SceneSet {
        root: root.to_path_buf(),
        scenes,
    })
}
