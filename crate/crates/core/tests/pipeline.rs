use std::path::Path;

use hgmodes_core::manifest::DatasetManifest;
use hgmodes_core::nn::{step_scheduler, Checkpoint};
use hgmodes_core::physics::{BeamSpec, ModePair, ScalarField};
use hgmodes_core::pipeline::oracle;
use hgmodes_core::pipeline::search::{random_search, SearchSpace};
use hgmodes_core::pipeline::{evaluate, metrics_csv, train, EvalFit, Hyperparams, LabeledSet, TrainConfig};
use hgmodes_core::simgen::{self, GenConfig, SampleParams};
use hgmodes_core::{seed, Error};
use proptest::prelude::*;
use tempfile::TempDir;

fn two_classes() -> Vec<ModePair> {
    vec![ModePair::new(0, 0), ModePair::new(0, 5)]
}

fn tiny_dataset(dir: &Path, per_class: usize) -> (LabeledSet, LabeledSet) {
    let cfg = GenConfig {
        classes: two_classes(),
        train_per_class: per_class,
        val_per_class: per_class,
        seed: 5,
        ..GenConfig::desk()
    };
    simgen::generate_dataset(&cfg, dir).unwrap();
    (
        LabeledSet::load(&dir.join("train"), None).unwrap(),
        LabeledSet::load(&dir.join("val"), None).unwrap(),
    )
}

fn config(epochs: usize, batch_size: usize) -> TrainConfig {
    TrainConfig {
        hyperparams: Hyperparams {
            lr0: 0.01,
            batch_size,
            epochs,
            seed: 11,
            ..Hyperparams::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn two_class_smoke_run_learns() {
    // Elongated fundamentals drawn with independent axis radii resemble
    // unresolved HG05 lobe rows, so five epochs on 40 images do not reach
    // perfect validation accuracy here (a PyTorch replica behaves the same).
    let tmp = TempDir::new().unwrap();
    let (tr, va) = tiny_dataset(tmp.path(), 20);
    let out = tmp.path().join("run");
    let report = train(&config(5, 8), &tr, &va, None, Some(&out)).unwrap();
    let (first, last) = (&report.epochs[0], report.epochs.last().unwrap());
    assert_eq!(report.epochs.len(), 5);
    assert!(last.train_loss < first.train_loss, "{:?}", report.epochs);
    assert!(last.train_acc >= 0.8, "{:?}", report.epochs);
    assert!(report.corr_val_acc >= 0.7, "{:?}", report.epochs);
    for f in ["metrics.csv", "report.json", "confusion.csv", "best.ckpt", "timing.log"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    // the checkpoint scores its own training split at least as well as the
    // validation split, give or take one image
    let ckpt = Checkpoint::load(&out.join("best.ckpt")).unwrap();
    let own = evaluate(&ckpt, &tmp.path().join("train"), EvalFit::Auto).unwrap();
    assert_eq!(own.predictions.len(), tr.len());
    assert!(own.accuracy + 1.0 / va.len() as f64 >= report.corr_val_acc);

    let ev = evaluate(&ckpt, &tmp.path().join("val"), EvalFit::Auto).unwrap();
    assert_eq!(ev.predictions.len(), va.len());
    assert_eq!(ev.accuracy, report.corr_val_acc);
    assert_eq!(ev.confusion, report.val_confusion);
}

#[test]
fn single_image_manifest_and_class_mismatch() {
    let tmp = TempDir::new().unwrap();
    let (tr, va) = tiny_dataset(tmp.path(), 12);
    let out = tmp.path().join("run");
    train(&config(3, 8), &tr, &va, None, Some(&out)).unwrap();
    let ckpt = Checkpoint::load(&out.join("best.ckpt")).unwrap();
    let full = evaluate(&ckpt, &tmp.path().join("val"), EvalFit::Auto).unwrap();
    let hit = full
        .predictions
        .iter()
        .position(|p| p.truth == p.predicted)
        .expect("at least one correct prediction");

    let (mut m, _) = DatasetManifest::load(&tmp.path().join("val")).unwrap();
    m.records = vec![m.records[hit].clone()];
    m.save(&tmp.path().join("val").join("single.json")).unwrap();
    let one = evaluate(&ckpt, &tmp.path().join("val").join("single.json"), EvalFit::Auto).unwrap();
    assert_eq!(one.accuracy, 1.0);
    assert_eq!(one.predictions.len(), 1);
    let nonzero: usize = one.confusion.counts.iter().flatten().filter(|&&c| c > 0).count();
    assert_eq!(nonzero, 1);
    assert_eq!(one.confusion.counts.len(), 2);

    // a manifest holding a class the checkpoint never saw
    let other = GenConfig {
        classes: vec![ModePair::new(1, 1)],
        train_per_class: 2,
        val_per_class: 2,
        ..GenConfig::desk()
    };
    simgen::generate_dataset(&other, &tmp.path().join("other")).unwrap();
    let err = evaluate(&ckpt, &tmp.path().join("other").join("val"), EvalFit::Auto).unwrap_err();
    assert!(matches!(err, Error::ClassSetMismatch(_)), "{err}");
}

#[test]
fn repeated_training_is_bit_identical_and_lr_follows_schedule() {
    let tmp = TempDir::new().unwrap();
    let (tr, va) = tiny_dataset(tmp.path(), 10);
    let mut cfg = config(5, 8);
    cfg.hyperparams.step_size = 2;
    cfg.hyperparams.gamma = 0.5;
    let a = train(&cfg, &tr, &va, Some(&va), None).unwrap();
    let b = train(&cfg, &tr, &va, Some(&va), None).unwrap();
    assert_eq!(metrics_csv(&a.epochs), metrics_csv(&b.epochs));
    assert_eq!(a.initial_loss.to_bits(), b.initial_loss.to_bits());
    for m in &a.epochs {
        assert_eq!(m.lr, step_scheduler(0.01, 0.5, 2, m.epoch));
    }
    assert_eq!(a.epochs[4].lr, 0.0025);

    cfg.hyperparams.seed += 1;
    let c = train(&cfg, &tr, &va, None, None).unwrap();
    assert_ne!(c.initial_loss.to_bits(), a.initial_loss.to_bits());
}

#[test]
fn mismatched_splits_and_tiny_sets_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let (tr, va) = tiny_dataset(tmp.path(), 4);
    let mut wrong = va.clone();
    wrong.classes = vec![ModePair::new(0, 0)];
    let err = train(&config(1, 8), &tr, &wrong, None, None).unwrap_err();
    assert!(matches!(err, Error::ClassSetMismatch(_)));

    let mut one = tr.clone();
    one.images.truncate(1);
    one.labels.truncate(1);
    one.paths.truncate(1);
    assert!(matches!(train(&config(1, 8), &one, &va, None, None), Err(Error::BatchTooSmall(1))));
}

#[test]
fn search_ranks_trials_and_repeats_exactly() {
    let tmp = TempDir::new().unwrap();
    let (tr, va) = tiny_dataset(tmp.path(), 8);
    let space = SearchSpace {
        log2_batch: (3, 4),
        ..SearchSpace::default()
    };
    let run = |dir: &Path| {
        random_search(&TrainConfig::default(), &space, 3, 2, 4, (&tr, &va, Some(&va)), Some(dir)).unwrap()
    };
    let first = run(&tmp.path().join("s1"));
    let second = run(&tmp.path().join("s2"));
    assert_eq!(first, second);
    assert_eq!(first.len(), 3);
    for w in first.windows(2) {
        assert!(w[0].best_exp_acc >= w[1].best_exp_acc);
    }
    for r in &first {
        assert_eq!(r.status, "ok");
        assert!((0.001..=0.1).contains(&r.hyperparams.lr0));
        assert!([8, 16].contains(&r.hyperparams.batch_size));
        assert!(tmp.path().join("s1").join(format!("trial_{:03}", r.trial)).join("metrics.csv").is_file());
    }
    let csv = |d: &str| std::fs::read(tmp.path().join(d).join("search.csv")).unwrap();
    assert_eq!(csv("s1"), csv("s2"));

    let err = random_search(&TrainConfig::default(), &space, 0, 2, 4, (&tr, &va, None), None).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

fn hflip(img: &ScalarField) -> ScalarField {
    let n = img.n_px();
    let values = (0..n * n).map(|i| img.values[(i / n) * n + (n - 1 - i % n)]).collect();
    ScalarField { values, geometry: img.geometry }
}

/// Quarter turn counter-clockwise.
fn rot90(img: &ScalarField) -> ScalarField {
    let n = img.n_px();
    let values = (0..n * n).map(|i| img.values[(i % n) * n + (n - 1 - i / n)]).collect();
    ScalarField { values, geometry: img.geometry }
}

fn noiseless_render(mode: ModePair, image_seed: u64) -> ScalarField {
    let cfg = GenConfig::desk();
    let params = SampleParams {
        noise_sigma: 0.0,
        ..simgen::sample_params(mode, &cfg, image_seed).unwrap()
    };
    simgen::render(&params, &cfg.geom).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flips_and_quarter_turns_keep_the_class(class in 0usize..21, s in any::<u64>()) {
        let classes = ModePair::all_classes();
        let mode = classes[class];
        let img = noiseless_render(mode, seed::derive(s, &[7]));
        let mut turned = img.clone();
        prop_assert_eq!(oracle::classify(&hflip(&img), classes).unwrap(), mode);
        for _ in 0..3 {
            turned = rot90(&turned);
            prop_assert_eq!(oracle::classify(&turned, classes).unwrap(), mode);
        }
    }
}

#[test]
fn flip_and_rotation_helpers_are_exact() {
    let spec = BeamSpec {
        x0: 30.0,
        lambda: simgen::WAVELENGTH,
        ..BeamSpec::at_waist(ModePair::ordered(1, 0), 40.0, 40.0)
    };
    let geom = GenConfig::desk().geom;
    let render = |s: &BeamSpec| {
        simgen::render(
            &SampleParams {
                spec: *s,
                noise_sigma: 0.0,
                rng_seed: 0,
            },
            &geom,
        )
        .unwrap()
    };
    let img = render(&spec);
    let moved = |x0: f64, y0: f64| render(&BeamSpec { x0, y0, ..spec });
    let close = |a: &ScalarField, b: &ScalarField| a.values.iter().zip(&b.values).all(|(x, y)| (x - y).abs() < 1e-9);
    assert!(close(&hflip(&img), &moved(-30.0, 0.0)));
    assert!(close(&rot90(&rot90(&img)), &moved(-30.0, 0.0)));
    let four = rot90(&rot90(&rot90(&rot90(&img))));
    assert_eq!(four, img);
}
