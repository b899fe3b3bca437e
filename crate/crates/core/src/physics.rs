//! Closed-form Hermite-Gaussian beam mathematics.
//!
//! Coordinates: a sensor of `n_px × n_px` square pixels of width `p_w`,
//! centred on the optical axis. Pixel `(row i, col j)` samples the point
//! `X = (j + ½)p_w − s_l/2`, `Y = (i + ½)p_w − s_l/2`, so rows run along +Y.
//!
//! Orientation: a beam with angle `θ` has its `m`-axis (beam-frame y)
//! rotated counter-clockwise from the image +Y axis by `θ`, i.e. the
//! beam-frame axes are `x̂ = (cos θ, sin θ)` and `ŷ = (−sin θ, cos θ)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest Hermite order the field routines accept.
pub const MAX_ORDER: u32 = 30;

/// Highest per-axis order in the 21-class set.
pub const CLASS_MAX_ORDER: u32 = 5;

/// Mode indices `{n, m}`. Canonical pairs have `n <= m`; a non-canonical
/// pair is still useful as an ordered per-axis assignment inside [`BeamSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModePair {
    pub n: u32,
    pub m: u32,
}

impl ModePair {
    /// Canonical pair: the smaller index goes to `n`.
    pub fn new(a: u32, b: u32) -> Self {
        ModePair {
            n: a.min(b),
            m: a.max(b),
        }
    }

    /// Ordered pair, `n` along the beam-frame x axis and `m` along y.
    pub fn ordered(n: u32, m: u32) -> Self {
        ModePair { n, m }
    }

    pub fn canonical(self) -> Self {
        ModePair::new(self.n, self.m)
    }

    pub fn is_canonical(self) -> bool {
        self.n <= self.m
    }

    pub fn transposed(self) -> Self {
        ModePair {
            n: self.m,
            m: self.n,
        }
    }

    /// The 21 canonical classes with both indices `<= 5`, ordered by
    /// `(n + m, n)` ascending.
    pub fn all_classes() -> &'static [ModePair] {
        static CLASSES: OnceLock<Vec<ModePair>> = OnceLock::new();
        CLASSES.get_or_init(|| {
            let mut v = Vec::new();
            for total in 0..=2 * CLASS_MAX_ORDER {
                for n in 0..=total / 2 {
                    let m = total - n;
                    if m <= CLASS_MAX_ORDER {
                        v.push(ModePair { n, m });
                    }
                }
            }
            v
        })
    }

    /// Index of the canonical form in [`ModePair::all_classes`].
    pub fn class_id(self) -> Option<usize> {
        let c = self.canonical();
        Self::all_classes().iter().position(|&p| p == c)
    }

    pub fn from_class_id(id: usize) -> Option<Self> {
        Self::all_classes().get(id).copied()
    }

    /// Sum of the per-axis orders differs by one, or one index differs by one.
    pub fn is_adjacent(self, other: ModePair) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        let dn = a.n.abs_diff(b.n);
        let dm = a.m.abs_diff(b.m);
        dn + dm == 1
    }
}

impl std::fmt::Display for ModePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HG{}{}", self.n, self.m)
    }
}

/// Physical parameters of one beam realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    /// Per-axis orders: `n` along the beam-frame x axis, `m` along y.
    pub mode: ModePair,
    pub w0x: f64,
    pub w0y: f64,
    pub x0: f64,
    pub y0: f64,
    pub theta: f64,
    pub lambda: f64,
    pub z: f64,
}

impl BeamSpec {
    /// A centred, unrotated beam at its waist.
    pub fn at_waist(mode: ModePair, w0x: f64, w0y: f64) -> Self {
        BeamSpec {
            mode,
            w0x,
            w0y,
            x0: 0.0,
            y0: 0.0,
            theta: 0.0,
            lambda: 1.0,
            z: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w0x > 0.0 && self.w0y > 0.0 && self.lambda > 0.0) {
            return Err(Error::Config(format!(
                "beam radii and wavelength must be positive (w0x={}, w0y={}, lambda={})",
                self.w0x, self.w0y, self.lambda
            )));
        }
        if !(0.0..2.0 * PI).contains(&self.theta) {
            return Err(Error::Config(format!("theta {} outside [0, 2pi)", self.theta)));
        }
        if self.mode.n > MAX_ORDER {
            return Err(Error::UnsupportedOrder(self.mode.n));
        }
        if self.mode.m > MAX_ORDER {
            return Err(Error::UnsupportedOrder(self.mode.m));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub n_px: usize,
    pub p_w: f64,
}

impl SensorGeometry {
    pub fn new(n_px: usize, p_w: f64) -> Result<Self> {
        if n_px < 8 || !(p_w > 0.0) {
            return Err(Error::Config(format!(
                "sensor needs n_px >= 8 and p_w > 0 (got {n_px}, {p_w})"
            )));
        }
        Ok(SensorGeometry { n_px, p_w })
    }

    /// Sensor side length `s_l`.
    pub fn side(&self) -> f64 {
        self.n_px as f64 * self.p_w
    }

    /// Pixel-centre coordinate of index `i`, exactly antisymmetric about
    /// the sensor centre.
    pub fn coord(&self, i: usize) -> f64 {
        (2.0 * i as f64 + 1.0 - self.n_px as f64) * self.p_w * 0.5
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n_px).map(|i| self.coord(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub values: Vec<Complex64>,
    pub geometry: SensorGeometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub geometry: SensorGeometry,
}

impl ScalarField {
    pub fn zeros(geometry: SensorGeometry) -> Self {
        ScalarField {
            values: vec![0.0; geometry.n_px * geometry.n_px],
            geometry,
        }
    }

    pub fn n_px(&self) -> usize {
        self.geometry.n_px
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.geometry.n_px + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Exact transpose (swap rows and columns).
    pub fn transpose(&self) -> Self {
        let n = self.n_px();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = self.values[i * n + j];
            }
        }
        ScalarField {
            values: out,
            geometry: self.geometry,
        }
    }
}

/// Physicists' Hermite polynomial `H_n(x)` by the three-term recurrence.
pub fn hermite(n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    /// Beam radius `w(z)`.
    pub w: f64,
    /// Gouy phase `ψ(z)`.
    pub psi: f64,
    /// Radius of curvature, `+∞` at the waist.
    pub r: f64,
    /// Rayleigh length.
    pub z_r: f64,
}

pub fn beam_geometry(w0: f64, z: f64, lambda: f64) -> BeamGeometry {
    let z_r = PI * w0 * w0 / lambda;
    let ratio = z / z_r;
    let w = w0 * (1.0 + ratio * ratio).sqrt();
    let psi = ratio.atan();
    let r = if z == 0.0 {
        f64::INFINITY
    } else {
        z * (1.0 + (z_r / z).powi(2))
    };
    BeamGeometry { w, psi, r, z_r }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Precomputed per-order, per-plane factors of the 1D mode so that a grid
/// evaluation only pays for the Hermite recurrence and one exponential.
#[derive(Debug, Clone, Copy)]
struct Mode1d {
    n: u32,
    w: f64,
    prefactor: Complex64,
    /// `k / (2R)`, zero at the waist.
    curvature: f64,
}

impl Mode1d {
    fn new(n: u32, z: f64, w0: f64, lambda: f64) -> Result<Self> {
        if n > MAX_ORDER {
            return Err(Error::UnsupportedOrder(n));
        }
        let g = beam_geometry(w0, z, lambda);
        let ln_mag = 0.25 * (2.0 / PI).ln()
            - 0.5 * (n as f64 * std::f64::consts::LN_2 + ln_factorial(n) + g.w.ln());
        let gouy = -0.5 * (2 * n + 1) as f64 * g.psi;
        let prefactor = Complex64::from_polar(ln_mag.exp(), gouy);
        let k = 2.0 * PI / lambda;
        let curvature = if g.r.is_infinite() { 0.0 } else { k / (2.0 * g.r) };
        Ok(Mode1d {
            n,
            w: g.w,
            prefactor,
            curvature,
        })
    }

    #[inline]
    fn eval(&self, x: f64) -> Complex64 {
        let s = x / self.w;
        let envelope = hermite(self.n, std::f64::consts::SQRT_2 * s) * (-s * s).exp();
        if self.curvature == 0.0 {
            self.prefactor * envelope
        } else {
            self.prefactor * Complex64::from_polar(envelope, -self.curvature * x * x)
        }
    }
}

/// One-dimensional Hermite-Gaussian field `u_n(x, z)`.
pub fn u1d(n: u32, x: f64, z: f64, w0: f64, lambda: f64) -> Result<Complex64> {
    Ok(Mode1d::new(n, z, w0, lambda)?.eval(x))
}

/// Samples `u_n(x) u_m(y)` at every pixel centre in the rotated, shifted
/// beam frame.
pub fn field2d(spec: &BeamSpec, geom: &SensorGeometry) -> Result<ComplexField> {
    let ux = Mode1d::new(spec.mode.n, spec.z, spec.w0x, spec.lambda)?;
    let uy = Mode1d::new(spec.mode.m, spec.z, spec.w0y, spec.lambda)?;
    let (sin, cos) = spec.theta.sin_cos();
    let coords = geom.coords();
    let n = geom.n_px;
    let mut values = Vec::with_capacity(n * n);
    for &y_img in &coords {
        let dy = y_img - spec.y0;
        for &x_img in &coords {
            let dx = x_img - spec.x0;
            let x = dx * cos + dy * sin;
            let y = -dx * sin + dy * cos;
            values.push(ux.eval(x) * uy.eval(y));
        }
    }
    Ok(ComplexField {
        values,
        geometry: *geom,
    })
}

pub fn intensity(f: &ComplexField) -> ScalarField {
    ScalarField {
        values: f.values.iter().map(|c| c.norm_sqr()).collect(),
        geometry: f.geometry,
    }
}

/// Pointwise argument in `(−π, π]`.
pub fn phase(f: &ComplexField) -> ScalarField {
    ScalarField {
        values: f
            .values
            .iter()
            .map(|c| {
                let a = c.arg();
                // atan2 can return -π for a negative real with -0.0 imaginary part
                if a <= -PI {
                    PI
                } else {
                    a
                }
            })
            .collect(),
        geometry: f.geometry,
    }
}

/// Second-moment (D4σ) beam measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// Radius `2σ` along the major principal axis.
    pub w_sx: f64,
    /// Radius `2σ` along the minor principal axis.
    pub w_sy: f64,
    /// Angle of the major axis from image +X, in `[0, π)`. In the
    /// orientation convention above this is the beam angle whose x axis
    /// carries `w_sx`.
    pub theta_hat: f64,
    pub centroid: (f64, f64),
}

/// Intensity-weighted centroid and D4σ principal radii of `img`.
pub fn second_moment_radius(img: &ScalarField) -> Result<Moments> {
    let coords = img.geometry.coords();
    let n = img.n_px();
    let mut total = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = img.values[i * n + j];
            total += v;
            sx += v * coords[j];
            sy += v * coords[i];
        }
    }
    if !(total > 0.0) {
        return Err(Error::ZeroPower);
    }
    let (cx, cy) = (sx / total, sy / total);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dy = coords[i] - cy;
        for j in 0..n {
            let v = img.values[i * n + j];
            let dx = coords[j] - cx;
            sxx += v * dx * dx;
            syy += v * dy * dy;
            sxy += v * dx * dy;
        }
    }
    Ok(moments_from_covariance(
        sxx / total,
        syy / total,
        sxy / total,
        (cx, cy),
    ))
}

pub(crate) fn moments_from_covariance(sxx: f64, syy: f64, sxy: f64, centroid: (f64, f64)) -> Moments {
    let mean = 0.5 * (sxx + syy);
    let half_diff = 0.5 * (sxx - syy);
    let rad = (half_diff * half_diff + sxy * sxy).sqrt();
    let major = (mean + rad).max(0.0);
    let minor = (mean - rad).max(0.0);
    let mut theta_hat = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if theta_hat < 0.0 {
        theta_hat += PI;
    }
    if theta_hat >= PI {
        theta_hat -= PI;
    }
    Moments {
        w_sx: 2.0 * major.sqrt(),
        w_sy: 2.0 * minor.sqrt(),
        theta_hat,
        centroid,
    }
}

/// D4σ measurement for noisy camera frames.
///
/// The mean of the outer frame is subtracted as baseline. A first estimate
/// comes from pixels above a tenth of the peak; the moments are then
/// iterated inside a rectangular aperture aligned with the principal axes,
/// `aperture` radii wide on each side of the centroid, until the radii
/// settle. ISO 11146 uses `aperture = 3`.
pub fn aperture_second_moment_radius(img: &ScalarField, aperture: f64) -> Result<Moments> {
    let n = img.n_px();
    let border = (n / 16).max(1);
    let (mut frame_sum, mut frame_count) = (0.0, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i < border || j < border || i >= n - border || j >= n - border {
                frame_sum += img.values[i * n + j];
                frame_count += 1;
            }
        }
    }
    let baseline = frame_sum / frame_count as f64;
    let residual: Vec<f64> = img.values.iter().map(|v| v - baseline).collect();
    let peak = residual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::ZeroPower);
    }
    let coords = img.geometry.coords();

    let clipped = ScalarField {
        values: residual
            .iter()
            .map(|&v| if v > 0.1 * peak { v } else { 0.0 })
            .collect(),
        geometry: img.geometry,
    };
    let mut m = second_moment_radius(&clipped)?;
    let floor = img.geometry.p_w;
    for _ in 0..50 {
        let (sin, cos) = m.theta_hat.sin_cos();
        let hx = (aperture * m.w_sx).max(floor);
        let hy = (aperture * m.w_sy).max(floor);
        let (c0x, c0y) = m.centroid;
        let inside = |i: usize, j: usize| {
            let dx = coords[j] - c0x;
            let dy = coords[i] - c0y;
            (dx * cos + dy * sin).abs() <= hx && (-dx * sin + dy * cos).abs() <= hy
        };
        let (mut total, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if inside(i, j) {
                    let v = residual[i * n + j];
                    total += v;
                    sx += v * coords[j];
                    sy += v * coords[i];
                }
            }
        }
        if !(total > 0.0) {
            return Err(Error::ZeroPower);
        }
        let (cx, cy) = (sx / total, sy / total);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if inside(i, j) {
                    let v = residual[i * n + j];
                    let dx = coords[j] - cx;
                    let dy = coords[i] - cy;
                    sxx += v * dx * dx;
                    syy += v * dy * dy;
                    sxy += v * dx * dy;
                }
            }
        }
        let next = moments_from_covariance(sxx / total, syy / total, sxy / total, (cx, cy));
        let scale = m.w_sx.max(floor);
        let settled = (next.w_sx - m.w_sx).abs() <= 1e-4 * scale
            && (next.w_sy - m.w_sy).abs() <= 1e-4 * scale
            && (next.centroid.0 - c0x).abs() <= 1e-4 * scale
            && (next.centroid.1 - c0y).abs() <= 1e-4 * scale;
        m = next;
        if settled {
            break;
        }
    }
    Ok(m)
}

/// Composite Simpson quadrature over `[-half, half]` with an odd sample count.
pub(crate) fn simpson(half: f64, samples: usize, f: impl Fn(f64) -> f64) -> f64 {
    let samples = if samples % 2 == 0 { samples + 1 } else { samples };
    let h = 2.0 * half / (samples - 1) as f64;
    let mut acc = f(-half) + f(half);
    for i in 1..samples - 1 {
        let x = -half + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

/// Quadrature half-extent and sample count used for 1D mode integrals with
/// unit input radius.
pub(crate) fn quadrature_grid(n: u32) -> (f64, usize) {
    let half = 12.0 * ((2 * n + 1) as f64).sqrt();
    // step <= 1/200 of the radius
    let samples = ((2.0 * half * 200.0).ceil() as usize + 1).max(4001);
    (half, samples)
}

/// Measured 1D D4σ radius of `|u_n|²` for unit input radius.
fn measured_radius_unit(n: u32) -> Result<f64> {
    let mode = Mode1d::new(n, 0.0, 1.0, 1.0)?;
    let (half, samples) = quadrature_grid(n);
    let power = simpson(half, samples, |x| mode.eval(x).norm_sqr());
    let second = simpson(half, samples, |x| x * x * mode.eval(x).norm_sqr());
    Ok(2.0 * (second / power).sqrt())
}

/// Mode-scaling factor: input radius `β(n)·w` renders a measured radius `w`.
pub fn beta(n: u32) -> Result<f64> {
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    if n > MAX_ORDER {
        return Err(Error::UnsupportedOrder(n));
    }
    let table = CACHE.get_or_init(|| {
        (0..=MAX_ORDER)
            .map(|k| 1.0 / measured_radius_unit(k).expect("order within range"))
            .collect()
    });
    Ok(table[n as usize])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize, p: f64) -> SensorGeometry {
        SensorGeometry::new(n, p).unwrap()
    }

    #[test]
    fn class_ordering() {
        let classes = ModePair::all_classes();
        assert_eq!(classes.len(), 21);
        assert_eq!(classes[0], ModePair::new(0, 0));
        assert_eq!(classes[1], ModePair::new(0, 1));
        assert_eq!(classes[3], ModePair::new(1, 1));
        assert_eq!(classes[20], ModePair::new(5, 5));
        for (i, c) in classes.iter().enumerate() {
            assert!(c.is_canonical());
            assert_eq!(c.class_id(), Some(i));
            assert_eq!(c.transposed().class_id(), Some(i));
            assert_eq!(ModePair::from_class_id(i), Some(*c));
        }
        for w in classes.windows(2) {
            assert!((w[0].n + w[0].m, w[0].n) < (w[1].n + w[1].m, w[1].n));
        }
        assert_eq!(ModePair::new(0, 6).class_id(), None);
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 1.7), 1.0);
        assert_eq!(hermite(1, 2.0), 4.0);
        assert_eq!(hermite(3, 1.0), -4.0);
    }

    #[test]
    fn hermite_matches_expansion() {
        // explicit polynomial coefficients, lowest degree first
        let polys: [&[f64]; 7] = [
            &[1.0],
            &[0.0, 2.0],
            &[-2.0, 0.0, 4.0],
            &[0.0, -12.0, 0.0, 8.0],
            &[12.0, 0.0, -48.0, 0.0, 16.0],
            &[0.0, 120.0, 0.0, -160.0, 0.0, 32.0],
            &[-120.0, 0.0, 720.0, 0.0, -480.0, 0.0, 64.0],
        ];
        for k in 0..20 {
            let x = -3.0 + 0.31 * k as f64 + 0.017;
            for (n, coeffs) in polys.iter().enumerate() {
                let direct: f64 = coeffs.iter().enumerate().map(|(p, c)| c * x.powi(p as i32)).sum();
                let rec = hermite(n as u32, x);
                let denom = direct.abs().max(1e-300);
                assert!((rec - direct).abs() / denom < 1e-12 || (rec - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn geometry_at_waist_and_rayleigh() {
        let g = beam_geometry(1.0, 0.0, 1.0);
        assert_eq!(g.w, 1.0);
        assert_eq!(g.psi, 0.0);
        assert!(g.r.is_infinite());
        assert!((g.z_r - PI).abs() < 1e-15);

        let g = beam_geometry(1.0, PI, 1.0);
        assert!((g.w - 2f64.sqrt()).abs() < 1e-12);
        assert!((g.psi - PI / 4.0).abs() < 1e-12);
        assert!((g.r - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn geometry_general_point() {
        // independent evaluation: w0=2, z=5, λ=0.5
        let z_r = PI * 4.0 / 0.5;
        let g = beam_geometry(2.0, 5.0, 0.5);
        assert!((g.z_r - 25.132741228718345).abs() < 1e-12);
        assert!((g.w - 2.0 * (1.0 + 25.0 / (z_r * z_r)).sqrt()).abs() < 1e-12);
        assert!((g.w - 2.03919453447707).abs() < 1e-12);
        assert!((g.psi - 0.19637966043166588).abs() < 1e-12);
        assert!((g.r - 131.33093633394378).abs() < 1e-9);
    }

    #[test]
    fn u1d_special_points() {
        let v = u1d(0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!((v.re - (2.0 / PI).powf(0.25)).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
        assert_eq!(u1d(1, 0.0, 0.0, 1.0, 1.0).unwrap().norm(), 0.0);
        assert!(matches!(u1d(31, 0.0, 0.0, 1.0, 1.0), Err(Error::UnsupportedOrder(31))));
    }

    #[test]
    fn u1d_is_normalized() {
        for n in 0..=5 {
            let (half, samples) = quadrature_grid(n);
            let norm = simpson(half, samples, |x| u1d(n, x, 0.0, 1.0, 1.0).unwrap().norm_sqr());
            assert!((norm - 1.0).abs() < 1e-9, "n={n} norm={norm}");
        }
    }

    #[test]
    fn large_order_is_finite() {
        let v = u1d(30, 3.0, 0.0, 1.0, 1.0).unwrap();
        assert!(v.re.is_finite());
        let (half, samples) = quadrature_grid(30);
        let norm = simpson(half, samples, |x| u1d(30, x, 0.0, 1.0, 1.0).unwrap().norm_sqr());
        assert!((norm - 1.0).abs() < 1e-6, "{norm}");
    }

    #[test]
    fn fundamental_is_round() {
        let g = geom(64, 1.0);
        let base = BeamSpec::at_waist(ModePair::new(0, 0), 9.0, 9.0);
        let a = intensity(&field2d(&base, &g).unwrap());
        let rotated = BeamSpec { theta: 1.1, ..base };
        let b = intensity(&field2d(&rotated, &g).unwrap());
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn first_order_has_nodal_row() {
        // odd grid so that a pixel row sits on Y = 0
        let g = geom(33, 1.0);
        let spec = BeamSpec::at_waist(ModePair::ordered(0, 1), 6.0, 6.0);
        let img = intensity(&field2d(&spec, &g).unwrap());
        for j in 0..33 {
            assert_eq!(img.at(16, j), 0.0);
        }
        // lobes sit above and below the node
        let col = 16;
        let upper = (0..16).map(|i| img.at(i, col)).fold(0.0, f64::max);
        let lower = (17..33).map(|i| img.at(i, col)).fold(0.0, f64::max);
        assert!(upper > 0.0 && (upper - lower).abs() < 1e-15);
    }

    #[test]
    fn transposed_mode_matches_rotation() {
        let g = geom(48, 1.0);
        let a = intensity(&field2d(&BeamSpec::at_waist(ModePair::ordered(2, 3), 5.0, 5.0), &g).unwrap());
        let b = intensity(&field2d(&BeamSpec::at_waist(ModePair::ordered(3, 2), 5.0, 5.0), &g).unwrap());
        let at = a.transpose();
        for (x, y) in at.values.iter().zip(&b.values) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn intensity_and_phase_contracts() {
        let g = geom(32, 1.0);
        let spec = BeamSpec {
            z: 40.0,
            lambda: 0.8,
            theta: 0.4,
            ..BeamSpec::at_waist(ModePair::ordered(2, 1), 4.0, 5.0)
        };
        let f = field2d(&spec, &g).unwrap();
        assert!(intensity(&f).values.iter().all(|&v| v >= 0.0));
        assert!(phase(&f).values.iter().all(|&p| p > -PI && p <= PI));
    }

    #[test]
    fn waist_phase_profiles() {
        let g = geom(32, 1.0);
        let f = field2d(&BeamSpec::at_waist(ModePair::new(0, 0), 6.0, 6.0), &g).unwrap();
        let ph = phase(&f);
        assert!(ph.values.iter().all(|&p| p == 0.0));

        let f = field2d(&BeamSpec::at_waist(ModePair::ordered(1, 0), 6.0, 6.0), &g).unwrap();
        let ph = phase(&f);
        // left half negative x, right half positive x along row 16
        let left = ph.at(16, 10);
        let right = ph.at(16, 21);
        assert!(((left - right).abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn symmetric_grid_gives_exact_mirror_symmetry() {
        let g = geom(40, 0.7);
        let img = intensity(&field2d(&BeamSpec::at_waist(ModePair::ordered(3, 4), 3.1, 2.6), &g).unwrap());
        let n = 40;
        for i in 0..n {
            for j in 0..n {
                assert_eq!(img.at(i, j), img.at(n - 1 - i, j));
                assert_eq!(img.at(i, j), img.at(i, n - 1 - j));
            }
        }
    }

    #[test]
    fn d4sigma_of_fundamental() {
        let g = geom(256, 0.25);
        let spec = BeamSpec::at_waist(ModePair::new(0, 0), 8.0, 8.0);
        let m = second_moment_radius(&intensity(&field2d(&spec, &g).unwrap())).unwrap();
        assert!((m.w_sx / 8.0 - 1.0).abs() < 5e-3);
        assert!((m.w_sy / 8.0 - 1.0).abs() < 5e-3);
        assert!(m.centroid.0.abs() < 1e-9 && m.centroid.1.abs() < 1e-9);
    }

    #[test]
    fn d4sigma_of_third_order_axis() {
        let g = geom(512, 0.25);
        let spec = BeamSpec::at_waist(ModePair::ordered(3, 0), 6.0, 6.0);
        let m = second_moment_radius(&intensity(&field2d(&spec, &g).unwrap())).unwrap();
        // oracle: 1D quadrature of x²|u_3|², independent of the 2D path
        let (half, samples) = quadrature_grid(3);
        let p = simpson(half, samples, |x| u1d(3, x, 0.0, 1.0, 1.0).unwrap().norm_sqr());
        let s = simpson(half, samples, |x| x * x * u1d(3, x, 0.0, 1.0, 1.0).unwrap().norm_sqr());
        let oracle = 6.0 * 2.0 * (s / p).sqrt();
        assert!((oracle / (6.0 * 7f64.sqrt()) - 1.0).abs() < 1e-9);
        assert!((m.w_sx / oracle - 1.0).abs() < 5e-3, "{} vs {}", m.w_sx, oracle);
        assert!((m.w_sy / 6.0 - 1.0).abs() < 5e-3);
        assert!(m.theta_hat.abs() < 1e-9 || (m.theta_hat - PI).abs() < 1e-9);
    }

    #[test]
    fn d4sigma_recovers_orientation() {
        let g = geom(256, 0.25);
        for &theta in &[0.3, 1.2, 2.0, 3.5, 5.9] {
            let spec = BeamSpec {
                theta,
                x0: 1.5,
                y0: -2.0,
                ..BeamSpec::at_waist(ModePair::ordered(2, 0), 6.0, 5.0)
            };
            let m = second_moment_radius(&intensity(&field2d(&spec, &g).unwrap())).unwrap();
            let diff = (m.theta_hat - theta).rem_euclid(PI);
            let err = diff.min(PI - diff);
            assert!(err < 0.01, "theta {theta} measured {}", m.theta_hat);
            assert!((m.centroid.0 - 1.5).abs() < 1e-6 && (m.centroid.1 + 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_power_is_rejected() {
        let img = ScalarField::zeros(geom(16, 1.0));
        assert!(matches!(second_moment_radius(&img), Err(Error::ZeroPower)));
    }

    #[test]
    fn beta_values() {
        assert!((beta(0).unwrap() - 1.0).abs() < 1e-3);
        assert!((beta(5).unwrap() - 1.0 / 11f64.sqrt()).abs() < 1e-3);
        assert!(matches!(beta(31), Err(Error::UnsupportedOrder(31))));
    }
}
