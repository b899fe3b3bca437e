//! Checkpoint files (`hgmodes-ckpt/1`).
//!
//! Layout, all integers little-endian:
//!
//! | bytes            | content                                      |
//! |------------------|----------------------------------------------|
//! | 0..8             | `u64` length `L` of the JSON header          |
//! | 8..8+L           | UTF-8 JSON [`CheckpointHeader`]              |
//! | 8+L..            | tensors as `f32`, in header order, row-major |
//!
//! The tensor table lists names and shapes of parameters followed by
//! batch-norm running statistics, in model declaration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MicroResNet, MicroResNetConfig, Module, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::manifest::PixelStats;
use crate::physics::ModePair;

pub const CHECKPOINT_VERSION: &str = "hgmodes-ckpt/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Random state needed to resume: every stream is derived from `seed` and
/// the epoch counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub config: MicroResNetConfig,
    pub classes: Vec<ModePair>,
    pub stats: Option<PixelStats>,
    pub epoch: usize,
    pub rng: RngState,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub tensors: Vec<Tensor<f32>>,
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(
        model: &mut MicroResNet<T>,
        classes: &[ModePair],
        stats: Option<PixelStats>,
        epoch: usize,
        seed: u64,
    ) -> Self {
        let (entries, tensors): (Vec<_>, Vec<_>) = model
            .state()
            .into_iter()
            .map(|(name, t)| {
                let mut t = t.cast::<f32>();
                t.grad = None;
                (
                    TensorEntry {
                        name,
                        shape: t.shape.clone(),
                    },
                    t,
                )
            })
            .unzip();
        Checkpoint {
            header: CheckpointHeader {
                format: CHECKPOINT_VERSION.into(),
                config: model.config.clone(),
                classes: classes.to_vec(),
                stats,
                epoch,
                rng: RngState { seed, epoch },
                tensors: entries,
            },
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(8 + header.len() + 4 * self.tensors.iter().map(|t| t.numel()).sum::<usize>());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::format(origin, msg);
        let len = bytes
            .get(..8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize)
            .ok_or_else(|| bad("truncated header length"))?;
        let body = bytes.get(8..8usize.saturating_add(len)).ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader = serde_json::from_slice(body).map_err(|e| Error::format(origin, e))?;
        if header.format != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported checkpoint format {:?}", header.format)));
        }
        let mut data = &bytes[8 + len..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in &header.tensors {
            let numel: usize = entry.shape.iter().product();
            let raw = data.get(..numel * 4).ok_or_else(|| bad(&format!("tensor {} truncated", entry.name)))?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(Tensor::new(&entry.shape, values)?);
            data = &data[numel * 4..];
        }
        if !data.is_empty() {
            return Err(bad("trailing bytes after tensors"));
        }
        Ok(Checkpoint { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Rebuilds the network with the stored weights and statistics.
    pub fn build<T: Scalar>(&self) -> Result<MicroResNet<T>> {
        let mut rng = crate::seed::rng(0);
        let mut model = MicroResNet::new(&self.header.config, &mut rng)?;
        let mut i = 0;
        let mut mismatch = None;
        let entries = &self.header.tensors;
        let tensors = &self.tensors;
        let mut assign = |name: &str, t: &mut Tensor<T>| {
            match entries.get(i) {
                Some(e) if e.name == name && e.shape == t.shape => {
                    t.data = tensors[i].data.iter().map(|&v| T::of(v as f64)).collect();
                }
                _ => {
                    mismatch.get_or_insert_with(|| name.to_string());
                }
            }
            i += 1;
        };
        model.visit_params("", &mut assign);
        model.visit_buffers("", &mut assign);
        if let Some(name) = mismatch {
            return Err(Error::ShapeMismatch(format!("checkpoint does not match the network at {name}")));
        }
        if i != entries.len() {
            return Err(Error::ShapeMismatch(format!("checkpoint has {} tensors, network {i}", entries.len())));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mode;

    #[test]
    fn round_trip_preserves_outputs() {
        let cfg = MicroResNetConfig {
            input_px: 16,
            stem_channels: 4,
            stage_channels: vec![4, 8],
            blocks_per_stage: 1,
            ..MicroResNetConfig::default()
        };
        let mut net = MicroResNet::<f32>::new(&cfg, &mut crate::seed::rng(2)).unwrap();
        let x = Tensor::new(&[2, 1, 16, 16], (0..512).map(|i| (i % 13) as f32 / 13.0).collect()).unwrap();
        net.forward(&x, Mode::Train).unwrap();
        let classes = ModePair::all_classes().to_vec();
        let stats = Some(PixelStats { mean: 0.1, std: 0.2 });
        let ck = Checkpoint::from_model(&mut net, &classes, stats, 3, 42);
        let bytes = ck.to_bytes();
        let header_len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let floats: usize = ck.tensors.iter().map(|t| t.numel()).sum();
        assert_eq!(bytes.len(), 8 + header_len + 4 * floats);
        let back = Checkpoint::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ck);
        let mut rebuilt = back.build::<f32>().unwrap();
        assert_eq!(
            rebuilt.forward(&x, Mode::Eval).unwrap().data,
            net.forward(&x, Mode::Eval).unwrap().data
        );
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let p = Path::new("mem");
        assert!(Checkpoint::from_bytes(&[1, 2, 3], p).is_err());
        let mut bytes = 4u64.to_le_bytes().to_vec();
        bytes.extend_from_slice(b"{}xx");
        assert!(matches!(Checkpoint::from_bytes(&bytes, p), Err(Error::Format { .. })));
    }
}
