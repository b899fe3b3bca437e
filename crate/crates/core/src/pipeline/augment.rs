//! Image transforms for training and evaluation. Images are single-channel
//! `f32` frames with values in `[0, 1]` before normalisation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::GrayImage;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!("{}x{} frame with {} values", width, height, data.len())));
        }
        Ok(Frame { width, height, data })
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Frame {
            width: img.width,
            height: img.height,
            data: img.to_unit(),
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Range of the crop area as a fraction of the image area.
    pub scale: (f64, f64),
    /// Range of the crop aspect ratio (width / height), sampled log-uniformly.
    pub ratio: (f64, f64),
    pub out_px: usize,
    pub hflip_p: f64,
    pub mean: f64,
    pub std: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            scale: (0.08, 1.0),
            ratio: (3.0 / 4.0, 4.0 / 3.0),
            out_px: 64,
            hflip_p: 0.5,
            mean: 0.0,
            std: 1.0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.scale.0
            && self.scale.0 <= self.scale.1
            && self.scale.1 <= 1.0
            && 0.0 < self.ratio.0
            && self.ratio.0 <= self.ratio.1
            && (0.0..=1.0).contains(&self.hflip_p)
            && self.std > 0.0
            && self.out_px > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid augmentation settings {self:?}")))
        }
    }
}

/// Bilinear resample (half-pixel centres) of the window
/// `[x0, x0+w) × [y0, y0+h)` of `img` to `out_w × out_h`.
pub fn resample_window(img: &Frame, x0: usize, y0: usize, w: usize, h: usize, out_w: usize, out_h: usize) -> Frame {
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    let mut data = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let r0 = fy.floor() as usize;
        let r1 = (r0 + 1).min(h - 1);
        let ty = (fy - r0 as f64) as f32;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let c0 = fx.floor() as usize;
            let c1 = (c0 + 1).min(w - 1);
            let tx = (fx - c0 as f64) as f32;
            let p = |r: usize, c: usize| img.at(y0 + r, x0 + c);
            let top = p(r0, c0) * (1.0 - tx) + p(r0, c1) * tx;
            let bottom = p(r1, c0) * (1.0 - tx) + p(r1, c1) * tx;
            data.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    Frame {
        width: out_w,
        height: out_h,
        data,
    }
}

/// Area-average resize; exact box filter when shrinking by an integer factor.
pub fn resize_area(img: &Frame, out_w: usize, out_h: usize) -> Frame {
    if out_w >= img.width && out_h >= img.height {
        return resample_window(img, 0, 0, img.width, img.height, out_w, out_h);
    }
    let sx = img.width as f64 / out_w as f64;
    let sy = img.height as f64 / out_h as f64;
    let mut data = Vec::with_capacity(out_w * out_h);
    // overlap of source cell [i, i+1) with destination cell [a, b)
    let overlap = |i: usize, a: f64, b: f64| ((i + 1) as f64).min(b) - (i as f64).max(a);
    for oy in 0..out_h {
        let (ya, yb) = (oy as f64 * sy, (oy + 1) as f64 * sy);
        for ox in 0..out_w {
            let (xa, xb) = (ox as f64 * sx, (ox + 1) as f64 * sx);
            let mut acc = 0.0;
            for r in ya.floor() as usize..(yb.ceil() as usize).min(img.height) {
                let wy = overlap(r, ya, yb);
                for c in xa.floor() as usize..(xb.ceil() as usize).min(img.width) {
                    acc += wy * overlap(c, xa, xb) * img.at(r, c) as f64;
                }
            }
            data.push((acc / (sx * sy)) as f32);
        }
    }
    Frame {
        width: out_w,
        height: out_h,
        data,
    }
}

/// Crop rectangle `(x0, y0, w, h)` drawn by the random-resized-crop rule.
pub fn sample_crop(width: usize, height: usize, cfg: &AugmentConfig, rng: &mut impl Rng) -> (usize, usize, usize, usize) {
    let area = (width * height) as f64;
    let (lr0, lr1) = (cfg.ratio.0.ln(), cfg.ratio.1.ln());
    for _ in 0..10 {
        let target = area * rng.random_range(cfg.scale.0..=cfg.scale.1);
        let aspect = if lr1 > lr0 { rng.random_range(lr0..lr1) } else { lr0 }.exp();
        let w = (target * aspect).sqrt().round() as usize;
        let h = (target / aspect).sqrt().round() as usize;
        if 0 < w && w <= width && 0 < h && h <= height {
            let x0 = rng.random_range(0..=width - w);
            let y0 = rng.random_range(0..=height - h);
            return (x0, y0, w, h);
        }
    }
    // largest centred crop with the aspect clamped into range
    let in_ratio = width as f64 / height as f64;
    let (w, h) = if in_ratio < cfg.ratio.0 {
        (width, ((width as f64 / cfg.ratio.0).round() as usize).clamp(1, height))
    } else if in_ratio > cfg.ratio.1 {
        (((height as f64 * cfg.ratio.1).round() as usize).clamp(1, width), height)
    } else {
        (width, height)
    };
    ((width - w) / 2, (height - h) / 2, w, h)
}

pub fn random_resized_crop(img: &Frame, cfg: &AugmentConfig, rng: &mut impl Rng) -> Frame {
    let (x0, y0, w, h) = sample_crop(img.width, img.height, cfg, rng);
    resample_window(img, x0, y0, w, h, cfg.out_px, cfg.out_px)
}

pub fn hflip(img: &Frame) -> Frame {
    let mut data = Vec::with_capacity(img.data.len());
    for row in img.data.chunks(img.width) {
        data.extend(row.iter().rev());
    }
    Frame { data, ..*img }
}

pub fn random_hflip(img: Frame, p: f64, rng: &mut impl Rng) -> Frame {
    if rng.random::<f64>() < p {
        hflip(&img)
    } else {
        img
    }
}

/// Centred `size × size` window; odd remainders leave the extra pixel on
/// the right and bottom.
pub fn center_crop(img: &Frame, size: usize) -> Result<Frame> {
    if size > img.width || size > img.height || size == 0 {
        return Err(Error::CropTooLarge {
            crop: size,
            width: img.width,
            height: img.height,
        });
    }
    let (x0, y0) = ((img.width - size) / 2, (img.height - size) / 2);
    let mut data = Vec::with_capacity(size * size);
    for r in y0..y0 + size {
        data.extend_from_slice(&img.data[r * img.width + x0..][..size]);
    }
    Ok(Frame {
        width: size,
        height: size,
        data,
    })
}

pub fn normalize(img: &mut Frame, mean: f64, std: f64) {
    let (m, s) = (mean as f32, std as f32);
    img.data.iter_mut().for_each(|v| *v = (*v - m) / s);
}

pub fn denormalize(img: &mut Frame, mean: f64, std: f64) {
    let (m, s) = (mean as f32, std as f32);
    img.data.iter_mut().for_each(|v| *v = *v * s + m);
}

/// How evaluation frames of a different size reach the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalFit {
    /// Centre crop when the frame is at most 8/7 of the input side (the
    /// 256 → 224 case), area resize otherwise.
    Auto,
    Crop,
    Resize,
}

/// Deterministic evaluation transform: fit to `px`, then normalise.
pub fn eval_transform(img: &Frame, px: usize, fit: EvalFit, mean: f64, std: f64) -> Result<Frame> {
    let mut out = if img.width == px && img.height == px {
        img.clone()
    } else {
        let crop = match fit {
            EvalFit::Crop => true,
            EvalFit::Resize => false,
            EvalFit::Auto => img.width.min(img.height) * 7 <= px * 8,
        };
        if crop {
            center_crop(img, px)?
        } else {
            let side = img.width.min(img.height);
            resize_area(&center_crop(img, side)?, px, px)
        }
    };
    normalize(&mut out, mean, std);
    Ok(out)
}

/// Training transform: random resized crop, random flip, normalise.
pub fn train_transform(img: &Frame, cfg: &AugmentConfig, rng: &mut impl Rng) -> Frame {
    let crop = random_resized_crop(img, cfg, rng);
    let mut out = random_hflip(crop, cfg.hflip_p, rng);
    normalize(&mut out, cfg.mean, cfg.std);
    out
}
