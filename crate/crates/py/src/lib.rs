//! Python bindings. Images cross the boundary as nested lists of floats and
//! reports as plain dicts, so the module has no numpy dependency.

use std::path::PathBuf;

use hgmodes_core::holo::{self, PexpConfig};
use hgmodes_core::nn::{self, Checkpoint};
use hgmodes_core::physics::{self, BeamSpec, ModePair, ScalarField, SensorGeometry};
use hgmodes_core::pipeline::{self, oracle, EvalFit, LabeledSet, TrainConfig};
use hgmodes_core::simgen::{self, GenConfig};
use hgmodes_core::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(hgmodes, HgmodesError, PyException, "Domain error raised by the hgmodes core.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Format { .. } => PyIOError::new_err(e.to_string()),
        Error::Config(_) | Error::ClassSetMismatch(_) => PyValueError::new_err(e.to_string()),
        other => HgmodesError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn field_from_rows(rows: Vec<Vec<f64>>, pitch: f64) -> PyResult<ScalarField> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("image must be square"));
    }
    let geometry = SensorGeometry::new(n, pitch).map_err(py_err)?;
    Ok(ScalarField {
        values: rows.into_iter().flatten().collect(),
        geometry,
    })
}

fn rows(field: &ScalarField) -> Vec<Vec<f64>> {
    field.values.chunks(field.n_px()).map(<[f64]>::to_vec).collect()
}

/// Ratio of input radius to measured D4σ radius for mode order `n`.
#[pyfunction]
fn beta(n: u32) -> PyResult<f64> {
    physics::beta(n).map_err(py_err)
}

/// Physicists' Hermite polynomial H_n(x).
#[pyfunction]
fn hermite(n: u32, x: f64) -> f64 {
    physics::hermite(n, x)
}

/// The 21 unordered mode classes as `(n, m)` tuples with n <= m.
#[pyfunction]
fn classes() -> Vec<(u32, u32)> {
    ModePair::all_classes().iter().map(|c| (c.n, c.m)).collect()
}

#[pyfunction]
fn step_scheduler(lr0: f64, gamma: f64, step_size: usize, epoch: usize) -> f64 {
    nn::step_scheduler(lr0, gamma, step_size, epoch)
}

/// Intensity of HG(n, m) on an `n_px` square grid with pitch `pitch`.
#[pyfunction]
#[pyo3(signature = (n, m, w0x, w0y, n_px, pitch, theta=0.0, x0=0.0, y0=0.0, z=0.0, wavelength=simgen::WAVELENGTH))]
#[allow(clippy::too_many_arguments)]
fn render_intensity(
    n: u32,
    m: u32,
    w0x: f64,
    w0y: f64,
    n_px: usize,
    pitch: f64,
    theta: f64,
    x0: f64,
    y0: f64,
    z: f64,
    wavelength: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let spec = BeamSpec {
        mode: ModePair::ordered(n, m),
        w0x,
        w0y,
        x0,
        y0,
        theta,
        lambda: wavelength,
        z,
    };
    let geom = SensorGeometry::new(n_px, pitch).map_err(py_err)?;
    let field = physics::field2d(&spec, &geom).map_err(py_err)?;
    Ok(rows(&physics::intensity(&field)))
}

/// D4σ radii, orientation and centroid of a square intensity image. With
/// `aperture`, the measurement is restricted to that many radii per side
/// after baseline removal, as used for noisy frames.
#[pyfunction]
#[pyo3(signature = (image, pitch=1.0, aperture=None))]
fn measure_radius<'py>(py: Python<'py>, image: Vec<Vec<f64>>, pitch: f64, aperture: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let field = field_from_rows(image, pitch)?;
    let m = match aperture {
        Some(a) => physics::aperture_second_moment_radius(&field, a),
        None => physics::second_moment_radius(&field),
    }
    .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("w_major", m.w_sx)?;
    d.set_item("w_minor", m.w_sy)?;
    d.set_item("theta", m.theta_hat)?;
    d.set_item("centroid", m.centroid)?;
    Ok(d)
}

/// Overlap-integral classification of an intensity image into one of the
/// 21 classes.
#[pyfunction]
#[pyo3(signature = (image, pitch=1.0))]
fn oracle_classify(image: Vec<Vec<f64>>, pitch: f64) -> PyResult<(u32, u32)> {
    let field = field_from_rows(image, pitch)?;
    let c = oracle::classify(&field, ModePair::all_classes()).map_err(py_err)?;
    Ok((c.n, c.m))
}

/// First-order reconstruction correlation of a camera-plane HG target
/// through the simulated hologram optics. Each axis radius sits at
/// `position` (0 = smallest, 1 = largest) within that axis's feasible
/// pseudo-experimental range.
#[pyfunction]
#[pyo3(signature = (n, m, theta=0.0, position=0.5))]
fn hologram_fidelity(n: u32, m: u32, theta: f64, position: f64) -> PyResult<f64> {
    if !(0.0..=1.0).contains(&position) {
        return Err(PyValueError::new_err(format!("position must lie in [0, 1], got {position}")));
    }
    let cfg = PexpConfig::default();
    let at = |order: u32| -> PyResult<f64> {
        let (lo, hi) = cfg.radius_bounds(order).map_err(py_err)?;
        Ok(lo + position * (hi - lo))
    };
    let spec = BeamSpec {
        theta,
        lambda: simgen::WAVELENGTH,
        ..BeamSpec::at_waist(ModePair::ordered(n, m), at(n)?, at(m)?)
    };
    let img = holo::simulate_camera_image(&spec, &cfg.optics).map_err(py_err)?;
    let target = holo::target_image(&spec, &cfg.optics).map_err(py_err)?;
    holo::correlation(&img, &target).map_err(py_err)
}

/// Writes `train/` and `val/` under `out`. Returns the image counts.
#[pyfunction]
#[pyo3(signature = (out, preset="desk", seed=0, per_class_train=None, per_class_val=None, px=None))]
fn generate_dataset(
    py: Python<'_>,
    out: PathBuf,
    preset: &str,
    seed: u64,
    per_class_train: Option<usize>,
    per_class_val: Option<usize>,
    px: Option<usize>,
) -> PyResult<(usize, usize)> {
    let mut cfg = match preset {
        "desk" => GenConfig::desk(),
        "paper" => GenConfig::paper(),
        other => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
    };
    if let Some(px) = px {
        cfg = cfg.with_resolution(px);
    }
    cfg.seed = seed;
    cfg.train_per_class = per_class_train.unwrap_or(cfg.train_per_class);
    cfg.val_per_class = per_class_val.unwrap_or(cfg.val_per_class);
    let ds = py.detach(|| simgen::generate_dataset(&cfg, &out)).map_err(py_err)?;
    Ok((ds.train.records.len(), ds.val.records.len()))
}

/// Writes the pseudo-experimental set under `out`. Returns the image count.
#[pyfunction]
#[pyo3(signature = (out, per_class=118, seed=0, px=None))]
fn generate_pseudo_experimental(py: Python<'_>, out: PathBuf, per_class: usize, seed: u64, px: Option<usize>) -> PyResult<usize> {
    let mut cfg = PexpConfig {
        per_class,
        seed,
        ..PexpConfig::default()
    };
    cfg.optics.out_px = px.unwrap_or(cfg.optics.out_px);
    let m = py.detach(|| holo::gen_pseudo_experimental(&cfg, &out)).map_err(py_err)?;
    Ok(m.records.len())
}

/// Trains a fresh MicroResNet and returns the training report as a dict.
#[pyfunction]
#[pyo3(signature = (train, val, out=None, pexp=None, epochs=20, lr=0.01, momentum=0.9, batch_size=32, step_size=7, gamma=0.1, seed=0))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    train: PathBuf,
    val: PathBuf,
    out: Option<PathBuf>,
    pexp: Option<PathBuf>,
    epochs: usize,
    lr: f64,
    momentum: f64,
    batch_size: usize,
    step_size: usize,
    gamma: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = TrainConfig::default();
    let hp = &mut cfg.hyperparams;
    hp.epochs = epochs;
    hp.lr0 = lr;
    hp.momentum = momentum;
    hp.batch_size = batch_size;
    hp.step_size = step_size;
    hp.gamma = gamma;
    hp.seed = seed;
    let report = py
        .detach(|| {
            let tr = LabeledSet::load(&train, None)?;
            let va = LabeledSet::load(&val, Some(&tr.classes))?;
            let pe = pexp.as_deref().map(|p| LabeledSet::load(p, Some(&tr.classes))).transpose()?;
            pipeline::train(&cfg, &tr, &va, pe.as_ref(), out.as_deref())
        })
        .map_err(py_err)?;
    to_py(py, &report)
}

/// Top-1 evaluation of a checkpoint on a dataset manifest.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, checkpoint: PathBuf, data: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let ev = py
        .detach(|| {
            let ckpt = Checkpoint::load(&checkpoint)?;
            pipeline::evaluate(&ckpt, &data, EvalFit::Auto)
        })
        .map_err(py_err)?;
    to_py(py, &ev)
}

/// Runs the command-line front end with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("hgmodes".to_string()).chain(args).collect();
    py.detach(|| hgmodes_core::cli::run(argv))
}

#[pymodule]
fn hgmodes(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("HgmodesError", m.py().get_type::<HgmodesError>())?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(hermite, m)?)?;
    m.add_function(wrap_pyfunction!(classes, m)?)?;
    m.add_function(wrap_pyfunction!(step_scheduler, m)?)?;
    m.add_function(wrap_pyfunction!(render_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(measure_radius, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_classify, m)?)?;
    m.add_function(wrap_pyfunction!(hologram_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pseudo_experimental, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
