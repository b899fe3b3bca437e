//! Non-learned reference classifier: fits every candidate mode to the
//! measured beam radii, orientation and centroid and picks the one whose
//! amplitude overlaps the image best.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::physics::{self, BeamSpec, ModePair, ScalarField};
use crate::simgen;

/// Radius ratio below which the measured orientation is treated as
/// undetermined and a grid of orientations is searched instead.
const ISOTROPY: f64 = 0.15;
const THETA_STEPS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleGuess {
    pub mode: ModePair,
    pub score: f64,
}

fn amplitude(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| v.max(0.0).sqrt()).collect()
}

fn overlap(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Scores every class in `classes` against `img` and returns them sorted
/// by decreasing normalised overlap `⟨√I_candidate, √I⟩`.
pub fn rank(img: &ScalarField, classes: &[ModePair]) -> Result<Vec<OracleGuess>> {
    let m = physics::aperture_second_moment_radius(img, 2.0)?;
    let target = amplitude(&img.values);
    let isotropic = m.w_sx / m.w_sy - 1.0 < ISOTROPY;
    let thetas: Vec<f64> = if isotropic {
        (0..THETA_STEPS).map(|k| m.theta_hat + k as f64 * PI / (2 * THETA_STEPS) as f64).collect()
    } else {
        vec![m.theta_hat]
    };
    let mut out = Vec::with_capacity(classes.len());
    for &class in classes {
        let c = class.canonical();
        let mut best = f64::NEG_INFINITY;
        let assignments = if c.n == c.m { vec![(c.n, c.m)] } else { vec![(c.n, c.m), (c.m, c.n)] };
        for (a, b) in assignments {
            for &theta in &thetas {
                let spec = BeamSpec {
                    mode: ModePair::ordered(a, b),
                    w0x: m.w_sx * physics::beta(a)?,
                    w0y: m.w_sy * physics::beta(b)?,
                    x0: m.centroid.0,
                    y0: m.centroid.1,
                    theta,
                    lambda: simgen::WAVELENGTH,
                    z: 0.0,
                };
                let field = physics::field2d(&spec, &img.geometry)?;
                let cand: Vec<f64> = field.values.iter().map(|v| v.norm()).collect();
                best = best.max(overlap(&cand, &target));
            }
        }
        out.push(OracleGuess { mode: c, score: best });
    }
    out.sort_by(|x, y| y.score.total_cmp(&x.score));
    Ok(out)
}

pub fn classify(img: &ScalarField, classes: &[ModePair]) -> Result<ModePair> {
    rank(img, classes)?
        .first()
        .map(|g| g.mode)
        .ok_or_else(|| Error::Config("oracle needs at least one class".into()))
}
