use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm2d, Conv2d, GlobalAvgPool, Linear, Relu};
use super::{join, Mode, Module, Scalar, Tensor};
use crate::error::{Error, Result};

/// Basic residual block: conv-bn-relu-conv-bn plus a shortcut, then relu.
/// The shortcut is the identity unless the block changes stride or width,
/// in which case it is a 1×1 convolution with batch norm.
pub struct BasicBlock<T: Scalar> {
    pub conv1: Conv2d<T>,
    pub bn1: BatchNorm2d<T>,
    relu1: Relu<T>,
    pub conv2: Conv2d<T>,
    pub bn2: BatchNorm2d<T>,
    pub shortcut: Option<(Conv2d<T>, BatchNorm2d<T>)>,
    out: Relu<T>,
}

impl<T: Scalar> BasicBlock<T> {
    pub fn new(cin: usize, cout: usize, stride: usize, rng: &mut impl Rng) -> Self {
        let conv1 = Conv2d::new(cin, cout, 3, stride, false, rng);
        let conv2 = Conv2d::new(cout, cout, 3, 1, false, rng);
        let shortcut =
            (stride != 1 || cin != cout).then(|| (Conv2d::new(cin, cout, 1, stride, false, rng), BatchNorm2d::new(cout)));
        BasicBlock {
            conv1,
            bn1: BatchNorm2d::new(cout),
            relu1: Relu::new(),
            conv2,
            bn2: BatchNorm2d::new(cout),
            shortcut,
            out: Relu::new(),
        }
    }
}

impl<T: Scalar> Module<T> for BasicBlock<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let h = self.conv1.forward(x, mode)?;
        let h = self.bn1.forward(&h, mode)?;
        let h = self.relu1.forward(&h, mode)?;
        let h = self.conv2.forward(&h, mode)?;
        let mut h = self.bn2.forward(&h, mode)?;
        let s = match &mut self.shortcut {
            Some((conv, bn)) => {
                let s = conv.forward(x, mode)?;
                bn.forward(&s, mode)?
            }
            None => x.clone(),
        };
        if s.shape != h.shape {
            return Err(Error::ShapeMismatch(format!("shortcut {:?} vs residual {:?}", s.shape, h.shape)));
        }
        for (a, b) in h.data.iter_mut().zip(&s.data) {
            *a += *b;
        }
        self.out.forward(&h, mode)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.out.backward(grad_out)?;
        let gm = self.bn2.backward(&g)?;
        let gm = self.conv2.backward(&gm)?;
        let gm = self.relu1.backward(&gm)?;
        let gm = self.bn1.backward(&gm)?;
        let mut gx = self.conv1.backward(&gm)?;
        let gs = match &mut self.shortcut {
            Some((conv, bn)) => {
                let gs = bn.backward(&g)?;
                conv.backward(&gs)?
            }
            None => g,
        };
        for (a, b) in gx.data.iter_mut().zip(&gs.data) {
            *a += *b;
        }
        Ok(gx)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.conv1.visit_params(&join(prefix, "conv1"), f);
        self.bn1.visit_params(&join(prefix, "bn1"), f);
        self.conv2.visit_params(&join(prefix, "conv2"), f);
        self.bn2.visit_params(&join(prefix, "bn2"), f);
        if let Some((conv, bn)) = &mut self.shortcut {
            conv.visit_params(&join(prefix, "shortcut.conv"), f);
            bn.visit_params(&join(prefix, "shortcut.bn"), f);
        }
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.bn1.visit_buffers(&join(prefix, "bn1"), f);
        self.bn2.visit_buffers(&join(prefix, "bn2"), f);
        if let Some((_, bn)) = &mut self.shortcut {
            bn.visit_buffers(&join(prefix, "shortcut.bn"), f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MicroResNetConfig {
    pub in_channels: usize,
    pub input_px: usize,
    pub stem_channels: usize,
    pub stage_channels: Vec<usize>,
    pub blocks_per_stage: usize,
    pub classes: usize,
}

impl Default for MicroResNetConfig {
    fn default() -> Self {
        MicroResNetConfig {
            in_channels: 1,
            input_px: 64,
            stem_channels: 16,
            stage_channels: vec![16, 32, 64],
            blocks_per_stage: 2,
            classes: 21,
        }
    }
}

impl MicroResNetConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [self.in_channels, self.stem_channels, self.blocks_per_stage, self.classes, self.input_px];
        if widths.contains(&0) || self.stage_channels.is_empty() || self.stage_channels.contains(&0) {
            return Err(Error::Config("all network widths and counts must be positive".into()));
        }
        Ok(())
    }

    /// Parameter count implied by the configuration.
    pub fn parameter_count(&self) -> usize {
        let conv = |cin: usize, cout: usize, k: usize| cin * cout * k * k;
        let bn = |c: usize| 2 * c;
        let mut total = conv(self.in_channels, self.stem_channels, 3) + bn(self.stem_channels);
        let mut cin = self.stem_channels;
        for (s, &cout) in self.stage_channels.iter().enumerate() {
            for b in 0..self.blocks_per_stage {
                let stride = if s > 0 && b == 0 { 2 } else { 1 };
                total += conv(cin, cout, 3) + bn(cout) + conv(cout, cout, 3) + bn(cout);
                if stride != 1 || cin != cout {
                    total += conv(cin, cout, 1) + bn(cout);
                }
                cin = cout;
            }
        }
        total + cin * self.classes + self.classes
    }
}

/// Small residual classifier: 3×3 stem, stages of basic blocks with a
/// stride-2 transition into every stage after the first, global average
/// pooling and a linear head producing logits.
pub struct MicroResNet<T: Scalar> {
    pub config: MicroResNetConfig,
    pub stem: Conv2d<T>,
    pub stem_bn: BatchNorm2d<T>,
    stem_relu: Relu<T>,
    pub blocks: Vec<BasicBlock<T>>,
    pool: GlobalAvgPool,
    pub head: Linear<T>,
}

impl<T: Scalar> MicroResNet<T> {
    pub fn new(config: &MicroResNetConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let stem = Conv2d::new(config.in_channels, config.stem_channels, 3, 1, false, rng);
        let mut blocks = Vec::new();
        let mut cin = config.stem_channels;
        for (s, &cout) in config.stage_channels.iter().enumerate() {
            for b in 0..config.blocks_per_stage {
                let stride = if s > 0 && b == 0 { 2 } else { 1 };
                blocks.push(BasicBlock::new(cin, cout, stride, rng));
                cin = cout;
            }
        }
        let head = Linear::new(cin, config.classes, rng);
        Ok(MicroResNet {
            config: config.clone(),
            stem,
            stem_bn: BatchNorm2d::new(config.stem_channels),
            stem_relu: Relu::new(),
            blocks,
            pool: GlobalAvgPool::new(),
            head,
        })
    }

    /// Named parameters and buffers in declaration order.
    pub fn state(&mut self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        self.visit_params("", &mut |n, t| out.push((n.to_string(), t.clone())));
        self.visit_buffers("", &mut |n, t| out.push((n.to_string(), t.clone())));
        out
    }
}

impl<T: Scalar> Module<T> for MicroResNet<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (_, c, _, _) = x.dims4()?;
        if c != self.config.in_channels {
            return Err(Error::ShapeMismatch(format!("network takes {} channels, got {c}", self.config.in_channels)));
        }
        let h = self.stem.forward(x, mode)?;
        let h = self.stem_bn.forward(&h, mode)?;
        let mut h = self.stem_relu.forward(&h, mode)?;
        for block in &mut self.blocks {
            h = block.forward(&h, mode)?;
        }
        let h = self.pool.forward(&h, mode)?;
        self.head.forward(&h, mode)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.head.backward(grad_out)?;
        let mut g = Module::<T>::backward(&mut self.pool, &g)?;
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(&g)?;
        }
        let g = self.stem_relu.backward(&g)?;
        let g = self.stem_bn.backward(&g)?;
        self.stem.backward(&g)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.stem.visit_params(&join(prefix, "stem"), f);
        self.stem_bn.visit_params(&join(prefix, "stem_bn"), f);
        for (i, block) in self.blocks.iter_mut().enumerate() {
            block.visit_params(&join(prefix, &format!("block{i}")), f);
        }
        self.head.visit_params(&join(prefix, "head"), f);
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.stem_bn.visit_buffers(&join(prefix, "stem_bn"), f);
        for (i, block) in self.blocks.iter_mut().enumerate() {
            block.visit_buffers(&join(prefix, &format!("block{i}")), f);
        }
    }
}
