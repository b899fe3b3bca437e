//! Dataset manifest shared by the simulated and pseudo-experimental
//! generators (`hgmodes-manifest/1`).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{ModePair, SensorGeometry};

pub const MANIFEST_VERSION: &str = "hgmodes-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelStats {
    pub mean: f64,
    pub std: f64,
}

impl PixelStats {
    /// Population mean and standard deviation of 8-bit pixel values mapped
    /// to `[0, 1]`. Integer accumulation keeps the result order-independent.
    pub fn from_bytes<'a>(images: impl IntoIterator<Item = &'a [u8]>) -> Option<Self> {
        let (mut count, mut sum, mut sum_sq) = (0u64, 0u64, 0u128);
        for img in images {
            for &b in img {
                count += 1;
                sum += b as u64;
                sum_sq += (b as u128) * (b as u128);
            }
        }
        if count == 0 {
            return None;
        }
        let n = count as f64;
        let mean = sum as f64 / n;
        let var = (sum_sq as f64 / n - mean * mean).max(0.0);
        Some(PixelStats {
            mean: mean / 255.0,
            std: var.sqrt() / 255.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub class_id: usize,
    /// Order along the beam-frame x axis.
    pub n: u32,
    /// Order along the beam-frame y axis.
    pub m: u32,
    pub w0x: f64,
    pub w0y: f64,
    pub x0: f64,
    pub y0: f64,
    pub theta: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ImageRecord {
    pub fn mode(&self) -> ModePair {
        ModePair::ordered(self.n, self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub split: String,
    pub geometry: SensorGeometry,
    pub classes: Vec<ModePair>,
    pub seed: u64,
    pub stats: Option<PixelStats>,
    pub records: Vec<ImageRecord>,
}

impl DatasetManifest {
    pub fn validate(&self, origin: &Path) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::format(origin, format!("unsupported version {:?}", self.version)));
        }
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.path.as_str()) {
                return Err(Error::format(origin, format!("duplicate path {}", r.path)));
            }
            if ModePair::new(r.n, r.m).class_id() != Some(r.class_id) {
                return Err(Error::format(
                    origin,
                    format!("class_id {} inconsistent with ({}, {})", r.class_id, r.n, r.m),
                ));
            }
        }
        if self.split == "train" && self.stats.is_none() {
            return Err(Error::format(origin, "train manifest lacks pixel statistics"));
        }
        Ok(())
    }

    /// Accepts either the manifest file itself or the directory holding it.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&file, e))?;
        manifest.validate(&file)?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, root))
    }

    pub fn save(&self, file: &Path) -> Result<()> {
        if let Some(dir) = file.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(file, text).map_err(|e| Error::io(file, e))
    }

    /// Number of records per class id, indexed by global class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; ModePair::all_classes().len()];
        for r in &self.records {
            counts[r.class_id] += 1;
        }
        counts
    }
}
