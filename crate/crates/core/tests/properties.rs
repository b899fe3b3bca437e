use std::f64::consts::PI;

use hgmodes_core::holo;
use hgmodes_core::imageio::GrayImage;
use hgmodes_core::nn::{softmax, step_scheduler, MicroResNet, MicroResNetConfig, Mode, Module, Tensor};
use hgmodes_core::physics::{self, BeamSpec, ModePair, ScalarField, SensorGeometry};
use hgmodes_core::pipeline::augment::{center_crop, denormalize, hflip, normalize, Frame};
use hgmodes_core::seed;
use hgmodes_core::simgen::{self, GenConfig};
use proptest::prelude::*;
use rand::Rng;

/// Hermite polynomials from their explicit sum, independent of the recurrence.
fn hermite_direct(n: u32, x: f64) -> f64 {
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    (0..=n / 2)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sign * fact(n) / (fact(m) * fact(n - 2 * m)) * (2.0 * x).powi((n - 2 * m) as i32)
        })
        .sum()
}

fn sorted(a: f64, b: f64) -> (f64, f64) {
    (a.max(b), a.min(b))
}

fn mode() -> impl Strategy<Value = ModePair> {
    (0u32..=5, 0u32..=5).prop_map(|(n, m)| ModePair::ordered(n, m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermite_recurrence_matches_expansion(n in 0u32..=6, x in -4.0f64..4.0) {
        let (r, d) = (physics::hermite(n, x), hermite_direct(n, x));
        prop_assert!((r - d).abs() <= 1e-12 * d.abs().max(1.0), "H{}({}) = {} vs {}", n, x, r, d);
    }

    #[test]
    fn centred_beams_are_mirror_symmetric(mode in mode(), wx in 8.0f64..20.0, wy in 8.0f64..20.0) {
        let geom = SensorGeometry::new(96, 1.0).unwrap();
        let spec = BeamSpec { lambda: 0.675, ..BeamSpec::at_waist(mode, wx, wy) };
        let img = physics::intensity(&physics::field2d(&spec, &geom).unwrap());
        let n = geom.n_px;
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(img.at(i, j), img.at(n - 1 - i, j));
                prop_assert_eq!(img.at(i, j), img.at(i, n - 1 - j));
            }
        }
    }

    #[test]
    fn beta_scaled_renders_hit_the_target_radius(n in 0u32..=5, w_t in 40.0f64..60.0) {
        // pixel pitch 1, at least 12 pixels per lobe for every order up to 5
        let geom = SensorGeometry::new(256, 1.0).unwrap();
        let w0 = physics::beta(n).unwrap() * w_t;
        let spec = BeamSpec { lambda: 0.675, ..BeamSpec::at_waist(ModePair::ordered(n, n), w0, w0) };
        let m = physics::second_moment_radius(&physics::intensity(&physics::field2d(&spec, &geom).unwrap())).unwrap();
        prop_assert!((m.w_sx / w_t - 1.0).abs() < 0.01, "{} vs {}", m.w_sx, w_t);
        prop_assert!((m.w_sy / w_t - 1.0).abs() < 0.01, "{} vs {}", m.w_sy, w_t);
    }

    #[test]
    fn power_is_conserved_along_z(mode in mode(), w0 in 6.0f64..9.0) {
        let lambda = 0.675;
        let z_r = PI * w0 * w0 / lambda;
        let power = |z: f64| {
            // the grid grows with w(z) so the beam stays contained
            let w = physics::beam_geometry(w0, z, lambda).w;
            let geom = SensorGeometry::new(160, w / 8.0).unwrap();
            let spec = BeamSpec { z, lambda, ..BeamSpec::at_waist(mode, w0, w0) };
            physics::intensity(&physics::field2d(&spec, &geom).unwrap()).sum() * geom.p_w * geom.p_w
        };
        let p0 = power(0.0);
        for z in [z_r, 3.0 * z_r] {
            prop_assert!((power(z) / p0 - 1.0).abs() < 1e-3);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn desk_records_replay_and_measure_within_tolerance(class in 0usize..21, index in 0usize..10_000, global in 0u64..1000) {
        let cfg = GenConfig { seed: global, ..GenConfig::desk() };
        let mode = ModePair::all_classes()[class];
        let params = simgen::sample_params(mode, &cfg, simgen::image_seed(global, seed::stream::TRAIN, class, index)).unwrap();
        let img = simgen::synthesize(&params, &cfg.geom).unwrap();
        let record = params.to_record(format!("x/{index}.png"));
        prop_assert_eq!(&simgen::replay(&record, &cfg.geom).unwrap(), &img);

        let field = ScalarField {
            values: img.data.iter().map(|&v| f64::from(v) / 255.0).collect(),
            geometry: cfg.geom,
        };
        let m = physics::aperture_second_moment_radius(&field, 2.0).unwrap();
        let (tx, ty) = params.target_radii().unwrap();
        let (target, measured) = (sorted(tx, ty), (m.w_sx, m.w_sy));
        prop_assert!((measured.0 / target.0 - 1.0).abs() <= 0.2, "{:?} vs {:?}", measured, target);
        prop_assert!((measured.1 / target.1 - 1.0).abs() <= 0.2, "{:?} vs {:?}", measured, target);
    }

    #[test]
    fn hologram_is_phase_only(mode in mode(), theta in 0.0f64..(2.0 * PI), s in any::<u64>()) {
        let cfg = holo::PexpConfig::default();
        let (a0, a1) = cfg.radius_bounds(mode.n).unwrap();
        let (b0, b1) = cfg.radius_bounds(mode.m).unwrap();
        let mut rng = seed::rng(s);
        let spec = BeamSpec {
            theta,
            lambda: simgen::WAVELENGTH,
            ..BeamSpec::at_waist(mode, rng.random_range(a0..=a1), rng.random_range(b0..=b1))
        };
        let (h, _) = holo::encode_target(&spec, &cfg.optics).unwrap();
        prop_assert_eq!(h.phase.len(), h.geometry.n_px * h.geometry.n_px);
        for &p in &h.phase {
            prop_assert!(p.is_finite() && (0.0..2.0 * PI).contains(&p));
            // transmittance exp(iφ) has unit modulus
            prop_assert!(((p.cos().powi(2) + p.sin().powi(2)) - 1.0).abs() < 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, cols in 1usize..30, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let logits: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-40.0..40.0)).collect();
        let p = softmax(&Tensor::new(&[rows, cols], logits).unwrap()).unwrap();
        for row in p.data.chunks(cols) {
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn scheduler_matches_closed_form(lr0 in 1e-4f64..1.0, gamma in 0.01f64..1.0, step in 1usize..10, epoch in 0usize..60) {
        let lr = step_scheduler(lr0, gamma, step, epoch);
        let closed = lr0 * gamma.powi((epoch / step) as i32);
        prop_assert!((lr - closed).abs() <= 1e-15 * closed.max(1e-300) + f64::MIN_POSITIVE);
        prop_assert_eq!(lr, step_scheduler(lr0, gamma, step, epoch));
    }

    #[test]
    fn flip_is_an_involution_and_normalize_inverts(w in 1usize..20, h in 1usize..20, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let img = Frame::new(w, h, (0..w * h).map(|_| rng.random_range(0.0f32..1.0)).collect()).unwrap();
        prop_assert_eq!(&hflip(&hflip(&img)), &img);
        prop_assert_eq!(&center_crop(&img, w.min(h)).unwrap().width, &w.min(h));
        if w == h {
            prop_assert_eq!(&center_crop(&img, w).unwrap(), &img);
        }
        let mut x = img.clone();
        normalize(&mut x, 0.3, 0.2);
        denormalize(&mut x, 0.3, 0.2);
        for (a, b) in x.data.iter().zip(&img.data) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn seed_derivation_is_a_pure_function(g in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(seed::derive(g, &[a, b]), seed::derive(g, &[a, b]));
        prop_assert_ne!(seed::derive(g, &[a, b]), seed::derive(g, &[a, b.wrapping_add(1)]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn eval_forward_is_pure(s in any::<u64>(), batch in 1usize..4) {
        let cfg = MicroResNetConfig { input_px: 16, ..MicroResNetConfig::default() };
        let mut rng = seed::rng(s);
        let mut net = MicroResNet::<f32>::new(&cfg, &mut rng).unwrap();
        let x = Tensor::new(&[batch, 1, 16, 16], (0..batch * 256).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap();
        let a = net.forward(&x, Mode::Eval).unwrap();
        let b = net.forward(&x, Mode::Eval).unwrap();
        prop_assert_eq!(a.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn default_network_parameter_count() {
    let cfg = MicroResNetConfig::default();
    let mut net = MicroResNet::<f32>::new(&cfg, &mut seed::rng(0)).unwrap();
    // stem 3x3 conv + bn, stage widths 16/32/64, projection shortcuts into
    // stages 2 and 3, linear head
    let conv = |i: usize, o: usize, k: usize| i * o * k * k;
    let stage1 = 2 * (2 * conv(16, 16, 3) + 4 * 16);
    let stage2 = conv(16, 32, 3) + conv(32, 32, 3) + 4 * 32 + conv(16, 32, 1) + 2 * 32 + conv(32, 32, 3) * 2 + 4 * 32;
    let stage3 = conv(32, 64, 3) + conv(64, 64, 3) + 4 * 64 + conv(32, 64, 1) + 2 * 64 + conv(64, 64, 3) * 2 + 4 * 64;
    let expected = conv(1, 16, 3) + 2 * 16 + stage1 + stage2 + stage3 + 64 * 21 + 21;
    assert_eq!(expected, 175_685);
    assert_eq!(net.param_count(), expected);
    assert_eq!(cfg.parameter_count(), expected);
}

#[test]
fn desk_split_is_class_balanced() {
    let tmp = tempfile::TempDir::new().unwrap();
    let cfg = GenConfig {
        train_per_class: 3,
        val_per_class: 2,
        ..GenConfig::desk()
    };
    let ds = simgen::generate_dataset(&cfg, tmp.path()).unwrap();
    assert_eq!(ds.train.class_counts(), vec![3; 21]);
    assert_eq!(ds.val.class_counts(), vec![2; 21]);
}

#[test]
fn centred_axis_aligned_saved_image_is_symmetric_before_noise() {
    let cfg = GenConfig::desk();
    for &mode in ModePair::all_classes() {
        let (lo, hi) = cfg.radius_bounds(mode.n).unwrap();
        let (lo2, hi2) = cfg.radius_bounds(mode.m).unwrap();
        let params = simgen::SampleParams {
            spec: BeamSpec {
                lambda: simgen::WAVELENGTH,
                ..BeamSpec::at_waist(mode, 0.5 * (lo + hi), 0.5 * (lo2 + hi2))
            },
            noise_sigma: 0.0,
            rng_seed: 0,
        };
        let img: GrayImage = simgen::synthesize(&params, &cfg.geom).unwrap();
        let n = img.width;
        for i in 0..n {
            for j in 0..n {
                let v = img.data[i * n + j];
                assert_eq!(v, img.data[(n - 1 - i) * n + j], "{mode}");
                assert_eq!(v, img.data[i * n + n - 1 - j], "{mode}");
            }
        }
    }
}
