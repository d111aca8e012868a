use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::image::{load_image, ImageBuffer};

/// One line of a manifest; paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub lr: PathBuf,
    pub hr: PathBuf,
    pub scale: usize,
    #[serde(default = "default_split")]
    pub split: String,
}

fn default_split() -> String {
    "train".into()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

/// A loaded LR-SDR / HR-HDR pair.
#[derive(Clone, Debug)]
pub struct SamplePair {
    pub lr: ImageBuffer,
    pub hr: ImageBuffer,
    pub scale: usize,
    pub source_id: String,
}

impl SamplePair {
    pub fn new(lr: ImageBuffer, hr: ImageBuffer, scale: usize, source_id: String) -> Result<Self> {
        if scale == 0 || hr.width != scale * lr.width || hr.height != scale * lr.height {
            return Err(Error::Shape(format!(
                "{source_id}: HR {}x{} is not {scale}x LR {}x{}",
                hr.width, hr.height, lr.width, lr.height
            )));
        }
        Ok(Self {
            lr,
            hr,
            scale,
            source_id,
        })
    }
}

impl Manifest {
    pub fn entries_for<'a>(&'a self, split: &'a str) -> impl Iterator<Item = &'a ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    /// Loads and validates every pair of the given split at the given scale.
    pub fn load_pairs(&self, split: &str, scale: usize) -> Result<Vec<SamplePair>> {
        let pairs: Vec<SamplePair> = self
            .entries_for(split)
            .filter(|e| e.scale == scale)
            .map(|e| {
                let lr = load_image(self.resolve(&e.lr))?;
                let hr = load_image(self.resolve(&e.hr))?;
                let id = e
                    .hr
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                SamplePair::new(lr, hr, e.scale, id)
            })
            .collect::<Result<_>>()?;
        if pairs.is_empty() {
            return Err(Error::Argument(format!(
                "manifest has no {split} pairs at scale {scale}"
            )));
        }
        Ok(pairs)
    }
}

/// Reads a manifest (a JSON array of `{lr, hr, scale}` objects) and
/// checks that every referenced file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    for e in &entries {
        if e.scale == 0 {
            return Err(Error::Format(format!("{}: scale 0 in entry {:?}", path.display(), e.hr)));
        }
        for p in [&e.lr, &e.hr] {
            let full = root.join(p);
            if !full.exists() {
                return Err(Error::io(
                    &full,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "listed in manifest"),
                ));
            }
        }
    }
    Ok(Manifest { root, entries })
}

pub fn save_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(entries).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}
