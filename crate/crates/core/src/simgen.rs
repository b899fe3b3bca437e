//! Randomized simulated dataset generator.
//!
//! Each image draws its own orientation, per-axis input radii and centroid
//! inside bounds that keep every lobe resolvable and the beam on the
//! sensor, is peak-normalized, receives Gaussian noise of a randomly drawn
//! level, and is written as an 8-bit grayscale PNG next to a JSON manifest.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{self, GrayImage};
use crate::manifest::{DatasetManifest, ImageRecord, PixelStats, MANIFEST_FILE, MANIFEST_VERSION};
use crate::physics::{self, BeamSpec, ModePair, ScalarField, SensorGeometry};
use crate::seed;

/// Wavelength recorded in rendered beam specs [µm]. Rendering happens at
/// the waist, where it does not affect the image.
pub const WAVELENGTH: f64 = 0.675;

/// Camera pixel pitch used by the presets [µm].
pub const PIXEL_PITCH: f64 = 5.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Rendering grid; `geom.n_px` is also the output PNG resolution.
    pub geom: SensorGeometry,
    /// Pixel pitch used in the lobe-resolution lower bound on the input
    /// radius. `None` uses `geom.p_w`.
    pub bound_pitch: Option<f64>,
    pub classes: Vec<ModePair>,
    pub train_per_class: usize,
    pub val_per_class: usize,
    /// Containment scale applied to the projected radii.
    pub alpha: f64,
    /// Scale of the half-normal distribution of per-image noise levels.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::paper()
    }
}

impl GenConfig {
    /// 224 px, 300 train / 200 validation images per class.
    pub fn paper() -> Self {
        GenConfig {
            geom: SensorGeometry {
                n_px: 224,
                p_w: PIXEL_PITCH,
            },
            bound_pitch: None,
            classes: ModePair::all_classes().to_vec(),
            train_per_class: 300,
            val_per_class: 200,
            alpha: 1.5,
            noise_scale: 0.02,
            seed: 0,
        }
    }

    /// 64 px over the same sensor, 100 / 50 per class. Radius bounds keep
    /// the 224 px pitch; at 64 px pitch orders >= 2 have no feasible radius.
    pub fn desk() -> Self {
        let paper = GenConfig::paper();
        let side = paper.geom.side();
        GenConfig {
            geom: SensorGeometry {
                n_px: 64,
                p_w: side / 64.0,
            },
            bound_pitch: Some(paper.geom.p_w),
            train_per_class: 100,
            val_per_class: 50,
            ..paper
        }
    }

    /// Re-grids to `px` pixels over the same sensor side, keeping the
    /// radius-bound pitch.
    pub fn with_resolution(mut self, px: usize) -> Self {
        let side = self.geom.side();
        let pitch = self.pitch_for_bounds();
        self.geom = SensorGeometry {
            n_px: px,
            p_w: side / px as f64,
        };
        self.bound_pitch = if (pitch - self.geom.p_w).abs() > 0.0 {
            Some(pitch)
        } else {
            None
        };
        self
    }

    pub fn pitch_for_bounds(&self) -> f64 {
        self.bound_pitch.unwrap_or(self.geom.p_w)
    }

    pub fn validate(&self) -> Result<()> {
        SensorGeometry::new(self.geom.n_px, self.geom.p_w)?;
        if self.geom.n_px < 16 {
            return Err(Error::Config(format!("out_px {} < 16", self.geom.n_px)));
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::Config(format!("alpha {} < 1", self.alpha)));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::Config(format!("noise_scale {} < 0", self.noise_scale)));
        }
        if !(self.pitch_for_bounds() > 0.0) {
            return Err(Error::Config("bound_pitch must be positive".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("no classes requested".into()));
        }
        for c in &self.classes {
            if c.class_id().is_none() {
                return Err(Error::Config(format!("{c} is not one of the 21 classes")));
            }
        }
        Ok(())
    }

    /// `[w0min, w0max]` input-radius interval for an axis of order `n`.
    pub fn radius_bounds(&self, n: u32) -> Result<(f64, f64)> {
        let min = min_input_radius(n, self.pitch_for_bounds());
        let max = max_input_radius(n, self.geom.side())?;
        if min > max {
            return Err(Error::InfeasibleBounds { order: n, min, max });
        }
        Ok((min, max))
    }
}

/// Smallest input radius that still leaves a dark pixel on both sides of
/// each lobe for an order-`n` axis at any orientation.
pub fn min_input_radius(n: u32, p_w: f64) -> f64 {
    SQRT_2 * p_w * (2 * n + 3) as f64
}

/// Largest input radius whose measured radius is a third of the sensor.
pub fn max_input_radius(n: u32, s_l: f64) -> Result<f64> {
    Ok(s_l * physics::beta(n)? / 3.0)
}

/// Radii of an ellipse with principal radii `(wa, wb)` at angle `theta`,
/// projected onto the image axes.
pub fn projected_radii(wa: f64, wb: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let wx = (wa * wa * c * c + wb * wb * s * s).sqrt();
    let wy = (wa * wa * s * s + wb * wb * c * c).sqrt();
    (wx, wy)
}

pub type Interval = (f64, f64);

/// Symmetric centroid intervals keeping `alpha` projected radii on the
/// sensor; a negative half-width collapses to `{0}`.
pub fn centroid_bounds(s_l: f64, wx: f64, wy: f64, alpha: f64) -> (Interval, Interval) {
    let bx = (s_l / 2.0 - alpha * wx).max(0.0);
    let by = (s_l / 2.0 - alpha * wy).max(0.0);
    ((-bx, bx), (-by, by))
}

/// Per-image seed from the global seed, split stream, class and index.
pub fn image_seed(global: u64, split_stream: u64, class_id: usize, index: usize) -> u64 {
    seed::derive(global, &[split_stream, class_id as u64, index as u64])
}

/// Generator for the pixel noise of one image.
pub fn noise_rng(image_seed: u64) -> ChaCha8Rng {
    seed::rng(seed::derive(image_seed, &[seed::stream::NOISE]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub spec: BeamSpec,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

pub(crate) fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

pub(crate) fn half_normal(rng: &mut impl Rng, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, scale).expect("finite scale").sample(rng).abs()
}

/// Draws the beam parameters of one image. `mode` is placed with `n` on the
/// beam-frame x axis and `m` on y; the uniform orientation covers the rest.
pub fn sample_params(mode: ModePair, cfg: &GenConfig, rng_seed: u64) -> Result<SampleParams> {
    let (xmin, xmax) = cfg.radius_bounds(mode.n)?;
    let (ymin, ymax) = cfg.radius_bounds(mode.m)?;
    let mut rng = seed::rng(rng_seed);
    let theta = rng.random_range(0.0..2.0 * PI);
    let w0x = uniform(&mut rng, xmin, xmax);
    let w0y = uniform(&mut rng, ymin, ymax);
    let wa = w0x / physics::beta(mode.n)?;
    let wb = w0y / physics::beta(mode.m)?;
    let (wx, wy) = projected_radii(wa, wb, theta);
    let ((xlo, xhi), (ylo, yhi)) = centroid_bounds(cfg.geom.side(), wx, wy, cfg.alpha);
    let x0 = uniform(&mut rng, xlo, xhi);
    let y0 = uniform(&mut rng, ylo, yhi);
    let noise_sigma = half_normal(&mut rng, cfg.noise_scale);
    Ok(SampleParams {
        spec: BeamSpec {
            mode,
            w0x,
            w0y,
            x0,
            y0,
            theta,
            lambda: WAVELENGTH,
            z: 0.0,
        },
        noise_sigma,
        rng_seed,
    })
}

/// Noiseless intensity scaled to a peak of exactly one.
pub fn render(params: &SampleParams, geom: &SensorGeometry) -> Result<ScalarField> {
    let mut img = physics::intensity(&physics::field2d(&params.spec, geom)?);
    let peak = img.max();
    if !(peak > 0.0) {
        return Err(Error::ZeroPower);
    }
    for v in &mut img.values {
        *v /= peak;
    }
    Ok(img)
}

/// Adds i.i.d. `N(0, sigma)` to every pixel, then clips to `[0, 1]`.
pub fn add_noise(img: &ScalarField, sigma: f64, rng: &mut impl Rng) -> ScalarField {
    let mut out = img.clone();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for v in &mut out.values {
            *v += normal.sample(rng);
        }
    }
    for v in &mut out.values {
        *v = v.clamp(0.0, 1.0);
    }
    out
}

/// Render, add noise from the image's own stream, quantize.
pub fn synthesize(params: &SampleParams, geom: &SensorGeometry) -> Result<GrayImage> {
    let clean = render(params, geom)?;
    let noisy = add_noise(&clean, params.noise_sigma, &mut noise_rng(params.rng_seed));
    Ok(imageio::quantize(&noisy))
}

impl SampleParams {
    pub fn from_record(r: &ImageRecord) -> Self {
        SampleParams {
            spec: BeamSpec {
                mode: r.mode(),
                w0x: r.w0x,
                w0y: r.w0y,
                x0: r.x0,
                y0: r.y0,
                theta: r.theta,
                lambda: WAVELENGTH,
                z: 0.0,
            },
            noise_sigma: r.noise_sigma,
            rng_seed: r.seed,
        }
    }

    pub fn to_record(&self, path: String) -> ImageRecord {
        let s = &self.spec;
        ImageRecord {
            path,
            class_id: s.mode.class_id().expect("mode within class set"),
            n: s.mode.n,
            m: s.mode.m,
            w0x: s.w0x,
            w0y: s.w0y,
            x0: s.x0,
            y0: s.y0,
            theta: s.theta,
            noise_sigma: self.noise_sigma,
            seed: self.rng_seed,
        }
    }

    /// Measured (D4σ) radii the input radii are meant to produce.
    pub fn target_radii(&self) -> Result<(f64, f64)> {
        Ok((
            self.spec.w0x / physics::beta(self.spec.mode.n)?,
            self.spec.w0y / physics::beta(self.spec.mode.m)?,
        ))
    }
}

/// Reproduces the PNG of a simulated-dataset record.
pub fn replay(record: &ImageRecord, geom: &SensorGeometry) -> Result<GrayImage> {
    synthesize(&SampleParams::from_record(record), geom)
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub train: DatasetManifest,
    pub val: DatasetManifest,
}

pub(crate) fn record_path(mode: ModePair, index: usize) -> String {
    format!("hg{}{}/{:04}.png", mode.n, mode.m, index)
}

fn generate_split(
    cfg: &GenConfig,
    split: &str,
    stream: u64,
    per_class: usize,
    dir: &Path,
) -> Result<DatasetManifest> {
    let jobs: Vec<(ModePair, usize)> = cfg
        .classes
        .iter()
        .flat_map(|&c| (0..per_class).map(move |i| (c.canonical(), i)))
        .collect();
    let outputs: Vec<(ImageRecord, GrayImage)> = jobs
        .par_iter()
        .map(|&(mode, index)| {
            let class_id = mode.class_id().expect("validated class");
            let params = sample_params(mode, cfg, image_seed(cfg.seed, stream, class_id, index))?;
            let img = synthesize(&params, &cfg.geom)?;
            let path = record_path(mode, index);
            imageio::write_png(&dir.join(&path), &img)?;
            Ok((params.to_record(path), img))
        })
        .collect::<Result<_>>()?;
    let stats = if split == "train" {
        PixelStats::from_bytes(outputs.iter().map(|(_, img)| img.data.as_slice()))
    } else {
        None
    };
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION.into(),
        split: split.into(),
        geometry: cfg.geom,
        classes: cfg.classes.iter().map(|c| c.canonical()).collect(),
        seed: cfg.seed,
        stats,
        records: outputs.into_iter().map(|(r, _)| r).collect(),
    };
    manifest.save(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Writes `train/` and `val/` under `out_dir`, each with PNGs and a manifest.
pub fn generate_dataset(cfg: &GenConfig, out_dir: &Path) -> Result<GeneratedDataset> {
    cfg.validate()?;
    for c in &cfg.classes {
        cfg.radius_bounds(c.n)?;
        cfg.radius_bounds(c.m)?;
    }
    let train = generate_split(
        cfg,
        "train",
        seed::stream::TRAIN,
        cfg.train_per_class,
        &out_dir.join("train"),
    )?;
    let val = generate_split(cfg, "val", seed::stream::VAL, cfg.val_per_class, &out_dir.join("val"))?;
    Ok(GeneratedDataset { train, val })
}
