//! Complex-amplitude-modulation holograms and a simulated Fourier-plane
//! optical train.
//!
//! A phase-only hologram `H = f(a)·sin(φ + 2π(fx·x + fy·y))` with
//! `J₁(f(a)) ∝ a` carries `a·e^{iφ}` in its first diffraction order. The
//! train illuminates the hologram with a broad Gaussian, takes a centred
//! 2D DFT (thin lens, Fourier plane), crops a window around the first order
//! and resamples it onto the camera grid.
//!
//! Fourier-plane coordinates are spatial frequencies in cycles per length
//! unit of the hologram plane. A hologram-plane waist `w` maps to a
//! Fourier-plane waist `1/(π w)`; Hermite-Gaussian intensity patterns keep
//! their shape and orientation under the transform.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{self, GrayImage};
use crate::manifest::{DatasetManifest, ImageRecord, MANIFEST_FILE, MANIFEST_VERSION};
use crate::physics::{self, BeamSpec, ComplexField, ModePair, ScalarField, SensorGeometry};
use crate::seed;
use crate::simgen::{self, SampleParams};

/// Location of the first maximum of `J₁`.
pub const J1_MAX_X: f64 = 1.841_183_781_340_659_3;
/// Value of that maximum.
pub const J1_MAX: f64 = 0.581_865_224_281_596_3;

/// Bessel function of the first kind, order one, by its ascending series.
/// Terms are summed until they fall below `1e-17` of the running sum, which
/// is far inside `1e-12` relative accuracy on `[0, 2]`.
pub fn j1(x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = half;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + 1.0));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || k > 200.0 {
            break;
        }
    }
    sum
}

/// `f ∈ [0, J1_MAX_X]` with `J₁(f) = a·J1_MAX`, by bisection to `1e-10`.
pub fn inverse_j1(a: f64) -> f64 {
    let a = a.clamp(0.0, 1.0);
    if a == 0.0 {
        return 0.0;
    }
    // the peak is flat, bisection would stop about √ε short of it
    if a == 1.0 {
        return J1_MAX_X;
    }
    let target = a * J1_MAX;
    let (mut lo, mut hi) = (0.0, J1_MAX_X);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if j1(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 0.0);
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || k > 200.0 {
            break;
        }
    }
    sum
}

fn j1_prime(x: f64) -> f64 {
    if x == 0.0 {
        0.5
    } else {
        j0(x) - j1(x) / x
    }
}

const DEPTH_NODES: usize = 4096;

/// `inverse_j1` tabulated against `u = √(1 − a)`, in which it is smooth at
/// both ends (near `a = 1` it behaves like `J1_MAX_X − c·u`). Values and
/// slopes at the nodes feed a cubic Hermite interpolant.
struct DepthTable {
    f: Vec<f64>,
    df: Vec<f64>,
}

fn depth_table() -> &'static DepthTable {
    static TABLE: OnceLock<DepthTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let xm = J1_MAX_X;
        let slope_at_peak = -(2.0 * xm * xm / (xm * xm - 1.0)).sqrt();
        let (f, df) = (0..=DEPTH_NODES)
            .map(|k| {
                let u = k as f64 / DEPTH_NODES as f64;
                let f = inverse_j1(1.0 - u * u);
                let df = if k == 0 { slope_at_peak } else { -2.0 * u * J1_MAX / j1_prime(f) };
                (f, df)
            })
            .unzip();
        DepthTable { f, df }
    })
}

/// Grating depth for amplitude `a`: `inverse_j1` through a precomputed
/// table, within `1e-9` of the bisection.
pub fn encoding_depth(a: f64) -> f64 {
    let a = a.clamp(0.0, 1.0);
    if a == 0.0 {
        return 0.0;
    }
    let t = depth_table();
    let x = (1.0 - a).sqrt() * DEPTH_NODES as f64;
    let k = (x.floor() as usize).min(DEPTH_NODES - 1);
    let s = x - k as f64;
    let h = 1.0 / DEPTH_NODES as f64;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * t.f[k]
        + (s3 - 2.0 * s2 + s) * h * t.df[k]
        + (-2.0 * s3 + 3.0 * s2) * t.f[k + 1]
        + (s3 - s2) * h * t.df[k + 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hologram {
    /// Phase in `[0, 2π)`, row-major.
    pub phase: Vec<f64>,
    pub geometry: SensorGeometry,
    /// Grating frequencies in cycles per length unit.
    pub carrier: (f64, f64),
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Encodes amplitude `a ∈ [0, 1]` and phase `φ` with a sinusoidal-phase
/// grating of frequency `carrier` (cycles per length unit).
pub fn cam_encode(amplitude: &ScalarField, phase: &ScalarField, carrier: (f64, f64)) -> Result<Hologram> {
    if amplitude.geometry != phase.geometry || amplitude.values.len() != phase.values.len() {
        return Err(Error::GeometryMismatch);
    }
    let geom = amplitude.geometry;
    let coords = geom.coords();
    let n = geom.n_px;
    let mut out = Vec::with_capacity(n * n);
    for (i, &y) in coords.iter().enumerate() {
        for (j, &x) in coords.iter().enumerate() {
            let k = i * n + j;
            let depth = encoding_depth(amplitude.values[k]);
            let grating = 2.0 * PI * (carrier.0 * x + carrier.1 * y);
            out.push(wrap_phase(depth * (phase.values[k] + grating).sin()));
        }
    }
    Ok(Hologram {
        phase: out,
        geometry: geom,
        carrier,
    })
}

impl Hologram {
    /// 8-bit phase map, `phase·255/2π` rounded half up.
    pub fn to_png_image(&self) -> GrayImage {
        GrayImage {
            width: self.geometry.n_px,
            height: self.geometry.n_px,
            data: self
                .phase
                .iter()
                .map(|&p| (p * 255.0 / (2.0 * PI) + 0.5).floor().min(255.0) as u8)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticalTrainConfig {
    /// Hologram (SLM) grid.
    pub holo: SensorGeometry,
    /// Gaussian beam illuminating the hologram. The encoder divides it out
    /// of the target amplitude.
    pub illumination: BeamSpec,
    /// DFT grid side; a power of two >= 512 and >= the hologram side.
    pub dft_px: usize,
    /// Grating frequency in cycles per hologram pixel.
    pub carrier: (f64, f64),
    /// Half-width of the first-order window in DFT bins; the window spans
    /// `2·half + 1` bins centred on the carrier.
    pub window_half: usize,
    pub out_px: usize,
}

impl Default for OpticalTrainConfig {
    fn default() -> Self {
        let holo = SensorGeometry { n_px: 512, p_w: 8.0 };
        // dark at the aperture edge, so the zero order has no sinc streak
        // crossing the first-order window
        let side = holo.side() / 4.0;
        OpticalTrainConfig {
            holo,
            illumination: BeamSpec {
                lambda: simgen::WAVELENGTH,
                ..BeamSpec::at_waist(ModePair::new(0, 0), side, side)
            },
            dft_px: 1024,
            carrier: (0.25, 0.0),
            window_half: 80,
            out_px: 256,
        }
    }
}

impl OpticalTrainConfig {
    /// Carrier in cycles per length unit.
    pub fn carrier_frequency(&self) -> (f64, f64) {
        (self.carrier.0 / self.holo.p_w, self.carrier.1 / self.holo.p_w)
    }

    /// DFT bin spacing in cycles per length unit.
    pub fn bin(&self) -> f64 {
        1.0 / (self.dft_px as f64 * self.holo.p_w)
    }

    /// First-order offset from DC in (fractional) bins.
    pub fn first_order_offset(&self) -> (f64, f64) {
        (
            self.carrier.0 * self.dft_px as f64,
            self.carrier.1 * self.dft_px as f64,
        )
    }

    pub fn window_bins(&self) -> usize {
        2 * self.window_half + 1
    }

    /// Camera grid: the window resampled to `out_px`, in frequency units.
    pub fn camera(&self) -> SensorGeometry {
        SensorGeometry {
            n_px: self.out_px,
            p_w: self.window_bins() as f64 * self.bin() / self.out_px as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        SensorGeometry::new(self.holo.n_px, self.holo.p_w)?;
        if !self.dft_px.is_power_of_two() || self.dft_px < 512 || self.dft_px < self.holo.n_px {
            return Err(Error::Config(format!(
                "DFT grid {} must be a power of two >= max(512, hologram side {})",
                self.dft_px, self.holo.n_px
            )));
        }
        if self.out_px < 16 || self.window_half == 0 {
            return Err(Error::Config("camera needs out_px >= 16 and a non-empty window".into()));
        }
        let (ox, oy) = self.first_order_offset();
        let w = self.window_half as f64;
        let nyquist = self.dft_px as f64 / 2.0;
        if ox.hypot(oy) < 3.0 * w {
            return Err(Error::WindowOutOfBounds(format!(
                "first order {:.1} bins from the zero order, needs >= {:.1}",
                ox.hypot(oy),
                3.0 * w
            )));
        }
        let edge = (nyquist - ox.abs()).min(nyquist - oy.abs());
        if edge < 3.0 * w {
            return Err(Error::WindowOutOfBounds(format!(
                "first order {edge:.1} bins from the aliasing boundary, needs >= {:.1}",
                3.0 * w
            )));
        }
        Ok(())
    }
}

struct Dft2 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dft2 {
    fn new(n: usize) -> Self {
        Dft2 {
            n,
            fft: FftPlanner::new().plan_fft_forward(n),
        }
    }

    fn transpose(&self, data: &mut [Complex64]) {
        const B: usize = 32;
        let n = self.n;
        for bi in (0..n).step_by(B) {
            for bj in (bi..n).step_by(B) {
                for i in bi..(bi + B).min(n) {
                    let start = if bi == bj { i + 1 } else { bj };
                    for j in start..(bj + B).min(n) {
                        data.swap(i * n + j, j * n + i);
                    }
                }
            }
        }
    }

    /// In-place unnormalized 2D DFT of a row-major `n × n` grid whose rows
    /// outside `occupied` are zero.
    fn forward(&self, data: &mut [Complex64], occupied: &[usize]) {
        let n = self.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for &r in occupied {
            self.fft.process_with_scratch(&mut data[r * n..(r + 1) * n], &mut scratch);
        }
        self.transpose(data);
        self.fft.process_with_scratch(data, &mut scratch);
        self.transpose(data);
    }
}

/// Fourier-plane field of the illuminated hologram: the hologram is
/// zero-padded onto the DFT grid with its centre at index `dft_px/2`, and
/// the transform is centred and unitary (Parseval holds exactly up to
/// rounding). Output geometry is in cycles per length unit.
pub fn propagate_far_field(holo: &Hologram, cfg: &OpticalTrainConfig) -> Result<ComplexField> {
    let m = cfg.dft_px;
    let n = holo.geometry.n_px;
    if m < n || !m.is_power_of_two() {
        return Err(Error::Config(format!("DFT grid {m} cannot hold hologram of {n} px")));
    }
    let illum = physics::field2d(&cfg.illumination, &holo.geometry)?;
    let mut grid = vec![Complex64::new(0.0, 0.0); m * m];
    let offset = (m - n) / 2;
    let half = m / 2;
    // ifftshift folded into placement: padded index p goes to (p + m/2) mod m
    for i in 0..n {
        let row = (i + offset + half) % m;
        for j in 0..n {
            let col = (j + offset + half) % m;
            let k = i * n + j;
            grid[row * m + col] = illum.values[k] * Complex64::from_polar(1.0, holo.phase[k]);
        }
    }
    let occupied: Vec<usize> = (0..n).map(|i| (i + offset + half) % m).collect();
    Dft2::new(m).forward(&mut grid, &occupied);
    let scale = 1.0 / m as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); m * m];
    for r in 0..m {
        let src_r = (r + half) % m;
        for c in 0..m {
            let src_c = (c + half) % m;
            values[r * m + c] = grid[src_r * m + src_c] * scale;
        }
    }
    Ok(ComplexField {
        values,
        geometry: SensorGeometry {
            n_px: m,
            p_w: 1.0 / (m as f64 * holo.geometry.p_w),
        },
    })
}

/// Bilinear sample of a row-major grid at fractional `(row, col)`,
/// clamping at the edges.
pub(crate) fn bilinear(data: &[f64], width: usize, height: usize, row: f64, col: f64) -> f64 {
    let r = row.clamp(0.0, (height - 1) as f64);
    let c = col.clamp(0.0, (width - 1) as f64);
    let (r0, c0) = (r.floor() as usize, c.floor() as usize);
    let (r1, c1) = ((r0 + 1).min(height - 1), (c0 + 1).min(width - 1));
    let (fr, fc) = (r - r0 as f64, c - c0 as f64);
    let top = data[r0 * width + c0] * (1.0 - fc) + data[r0 * width + c1] * fc;
    let bottom = data[r1 * width + c0] * (1.0 - fc) + data[r1 * width + c1] * fc;
    top * (1.0 - fr) + bottom * fr
}

/// Crops the first-order window, takes its intensity, resamples it onto
/// the camera grid and scales the peak to one.
pub fn extract_first_order(far: &ComplexField, cfg: &OpticalTrainConfig) -> Result<ScalarField> {
    let m = far.geometry.n_px;
    let (ox, oy) = cfg.first_order_offset();
    let center_c = (m / 2) as i64 + ox.round() as i64;
    let center_r = (m / 2) as i64 + oy.round() as i64;
    let w = cfg.window_half as i64;
    if center_c - w < 0 || center_r - w < 0 || center_c + w >= m as i64 || center_r + w >= m as i64 {
        return Err(Error::WindowOutOfBounds(format!(
            "window centred at ({center_r}, {center_c}) with half-width {w} leaves the {m}-bin grid"
        )));
    }
    let bins = cfg.window_bins();
    let mut window = Vec::with_capacity(bins * bins);
    for r in 0..bins {
        let src_r = (center_r - w) as usize + r;
        for c in 0..bins {
            let src_c = (center_c - w) as usize + c;
            window.push(far.values[src_r * m + src_c].norm_sqr());
        }
    }
    let out = cfg.out_px;
    let scale = bins as f64 / out as f64;
    let mut values = Vec::with_capacity(out * out);
    for r in 0..out {
        let sr = (r as f64 + 0.5) * scale - 0.5;
        for c in 0..out {
            let sc = (c as f64 + 0.5) * scale - 0.5;
            values.push(bilinear(&window, bins, bins, sr, sc));
        }
    }
    let peak = values.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::ZeroPower);
    }
    for v in &mut values {
        *v /= peak;
    }
    Ok(ScalarField {
        values,
        geometry: cfg.camera(),
    })
}

/// Pearson correlation of two equally sized images.
pub fn correlation(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    correlation_slices(&a.values, &b.values)
}

pub fn correlation_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Hologram-plane beam whose Fourier-plane image is `camera_spec`.
pub fn hologram_beam(camera_spec: &BeamSpec) -> BeamSpec {
    BeamSpec {
        w0x: 1.0 / (PI * camera_spec.w0x),
        w0y: 1.0 / (PI * camera_spec.w0y),
        x0: 0.0,
        y0: 0.0,
        ..*camera_spec
    }
}

/// Full optical chain for one target: encode the hologram-plane field of
/// the beam imaged as `camera_spec`, propagate, isolate the first order.
pub fn simulate_camera_image(camera_spec: &BeamSpec, cfg: &OpticalTrainConfig) -> Result<ScalarField> {
    let (holo, _) = encode_target(camera_spec, cfg)?;
    let far = propagate_far_field(&holo, cfg)?;
    extract_first_order(&far, cfg)
}

/// Hologram for the beam imaged as `camera_spec`, plus the hologram-plane
/// target field it encodes.
pub fn encode_target(camera_spec: &BeamSpec, cfg: &OpticalTrainConfig) -> Result<(Hologram, ComplexField)> {
    let target = physics::field2d(&hologram_beam(camera_spec), &cfg.holo)?;
    let illum = physics::field2d(&cfg.illumination, &cfg.holo)?;
    // divide out the illumination so the first order is the target itself
    let mut values: Vec<f64> = target
        .values
        .iter()
        .zip(&illum.values)
        .map(|(t, i)| if i.norm() > 0.0 { t.norm() / i.norm() } else { 0.0 })
        .collect();
    let peak = values.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::ZeroPower);
    }
    for v in &mut values {
        *v /= peak;
    }
    let amplitude = ScalarField {
        values,
        geometry: cfg.holo,
    };
    let phase = physics::phase(&target);
    let holo = cam_encode(&amplitude, &phase, cfg.carrier_frequency())?;
    Ok((holo, target))
}

/// Ideal camera image: the target pattern rendered directly on the camera grid.
pub fn target_image(camera_spec: &BeamSpec, cfg: &OpticalTrainConfig) -> Result<ScalarField> {
    let params = SampleParams {
        spec: *camera_spec,
        noise_sigma: 0.0,
        rng_seed: 0,
    };
    simgen::render(&params, &cfg.camera())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PexpConfig {
    pub optics: OpticalTrainConfig,
    pub classes: Vec<ModePair>,
    pub per_class: usize,
    pub alpha: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for PexpConfig {
    fn default() -> Self {
        PexpConfig {
            optics: OpticalTrainConfig::default(),
            classes: ModePair::all_classes().to_vec(),
            per_class: 118,
            alpha: 1.5,
            noise_scale: 0.02,
            seed: 0,
        }
    }
}

impl PexpConfig {
    /// Camera-plane input-radius interval for an axis of order `n`: resolvable
    /// on the camera grid, at most a third of the window after β scaling,
    /// and small enough in the hologram plane to stay `alpha` radii inside
    /// the hologram.
    pub fn radius_bounds(&self, n: u32) -> Result<(f64, f64)> {
        let cam = self.optics.camera();
        let beta = physics::beta(n)?;
        let resolvable = simgen::min_input_radius(n, cam.p_w);
        let contained = 2.0 * self.alpha / (PI * self.optics.holo.side() * beta);
        let min = resolvable.max(contained);
        let max = simgen::max_input_radius(n, cam.side())?;
        if min > max {
            return Err(Error::InfeasibleBounds { order: n, min, max });
        }
        Ok((min, max))
    }

    pub fn validate(&self) -> Result<()> {
        self.optics.validate()?;
        if !(self.alpha >= 1.0 && self.noise_scale >= 0.0) {
            return Err(Error::Config("alpha must be >= 1 and noise_scale >= 0".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("no classes requested".into()));
        }
        for c in &self.classes {
            if c.class_id().is_none() {
                return Err(Error::Config(format!("{c} is not one of the 21 classes")));
            }
            self.radius_bounds(c.n)?;
            self.radius_bounds(c.m)?;
        }
        Ok(())
    }

    /// Camera-plane parameters of one image; the centroid stays on axis.
    pub fn sample(&self, mode: ModePair, rng_seed: u64) -> Result<SampleParams> {
        let (xmin, xmax) = self.radius_bounds(mode.n)?;
        let (ymin, ymax) = self.radius_bounds(mode.m)?;
        let mut rng = seed::rng(rng_seed);
        let theta = rng.random_range(0.0..2.0 * PI);
        let w0x = simgen::uniform(&mut rng, xmin, xmax);
        let w0y = simgen::uniform(&mut rng, ymin, ymax);
        let noise_sigma = simgen::half_normal(&mut rng, self.noise_scale);
        Ok(SampleParams {
            spec: BeamSpec {
                mode,
                w0x,
                w0y,
                x0: 0.0,
                y0: 0.0,
                theta,
                lambda: simgen::WAVELENGTH,
                z: 0.0,
            },
            noise_sigma,
            rng_seed,
        })
    }
}

/// Camera frame for one set of camera-plane parameters, noise included.
pub fn synthesize(params: &SampleParams, optics: &OpticalTrainConfig) -> Result<GrayImage> {
    let clean = simulate_camera_image(&params.spec, optics)?;
    let noisy = simgen::add_noise(&clean, params.noise_sigma, &mut simgen::noise_rng(params.rng_seed));
    Ok(imageio::quantize(&noisy))
}

pub fn replay(record: &ImageRecord, optics: &OpticalTrainConfig) -> Result<GrayImage> {
    synthesize(&SampleParams::from_record(record), optics)
}

/// Writes the pseudo-experimental set (PNGs plus `manifest.json`) to `out_dir`.
pub fn gen_pseudo_experimental(cfg: &PexpConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let jobs: Vec<(ModePair, usize)> = cfg
        .classes
        .iter()
        .flat_map(|&c| (0..cfg.per_class).map(move |i| (c.canonical(), i)))
        .collect();
    let records: Vec<ImageRecord> = jobs
        .par_iter()
        .map(|&(mode, index)| {
            let class_id = mode.class_id().expect("validated class");
            let params = cfg.sample(mode, simgen::image_seed(cfg.seed, seed::stream::PEXP, class_id, index))?;
            let img = synthesize(&params, &cfg.optics)?;
            let path = simgen::record_path(mode, index);
            imageio::write_png(&out_dir.join(&path), &img)?;
            Ok(params.to_record(path))
        })
        .collect::<Result<_>>()?;
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION.into(),
        split: "pexp".into(),
        geometry: cfg.optics.camera(),
        classes: cfg.classes.iter().map(|c| c.canonical()).collect(),
        seed: cfg.seed,
        stats: None,
        records,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Hologram drawn with its grating frequency reduced by `decimation`
/// (0.8 keeps a fifth of it) so the fringes are visible in a figure.
pub fn visualization_hologram(camera_spec: &BeamSpec, cfg: &OpticalTrainConfig, decimation: f64) -> Result<Hologram> {
    let keep = 1.0 - decimation.clamp(0.0, 1.0);
    let viz = OpticalTrainConfig {
        carrier: (cfg.carrier.0 * keep, cfg.carrier.1 * keep),
        ..cfg.clone()
    };
    Ok(encode_target(camera_spec, &viz)?.0)
}
