mod common;

use hydragan_core::datapipe::Dataset;
use hydragan_core::evaluator::*;
use hydragan_core::numcore::Tensor;
use hydragan_core::rng;
use hydragan_core::toy;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn copycol_raw(n: usize, seed: u64) -> Dataset {
    let t = toy::copycol(n, seed).unwrap();
    Dataset::with_sensitive_name(t.names, t.rows, &t.sensitive).unwrap()
}

fn uniform_like(m: &Tensor, seed: u64) -> Tensor {
    let mut r = rng::seeded(seed);
    Tensor::matrix(m.rows(), m.cols(), (0..m.len()).map(|_| r.gen::<f64>()).collect()).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean absolute deviation of `xs` around its mean.
fn mad(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).abs()).sum::<f64>() / xs.len() as f64
}

#[test]
fn emd_examples_against_exhaustive_matching() {
    for (a, b, want) in [
        (vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], 0.0),
        (vec![0.0, 1.0], vec![1.0, 2.0], 1.0),
        (vec![0.0; 3], vec![1.0; 3], 1.0),
    ] {
        assert_eq!(common::brute_force_matching(&a, &b), want);
        assert_eq!(emd_1d(&a, &b).unwrap(), want);
    }
}

#[test]
fn identical_synthetic_matches_train_on_real_baseline() {
    let real = copycol_raw(600, 1).normalize();
    let baseline = common::train_on_real_baseline(&real);
    let same = inverse_model_mae(&real, real.matrix(), None).unwrap().value;
    println!("baseline {baseline:.4} same {same:.4}");
    assert!((baseline - same).abs() < 0.02);
    assert!(same < 1.0);

    // a fresh draw from the same generator lands close by
    let other = copycol_raw(600, 2);
    let raw = copycol_raw(600, 1);
    let fresh = inverse_model_mae(&real, &raw.normalize_matrix(other.matrix()).unwrap(), None).unwrap().value;
    assert!((baseline - fresh).abs() < 0.05, "fresh {fresh:.4}");
}

#[test]
fn uniform_noise_sits_near_constant_predictor_floor() {
    let real = copycol_raw(600, 3).normalize();
    let noise = uniform_like(real.matrix(), 4);
    let score = inverse_model_mae(&real, &noise, None).unwrap();
    let s = real.sensitive_index();
    let floor_mae = mean(
        &(0..real.n_features())
            .filter(|&j| j != s)
            .map(|j| mad(&real.column(j)))
            .collect::<Vec<_>>(),
    );
    let floor = 1.0 - floor_mae;
    let real_score = inverse_model_mae(&real, real.matrix(), None).unwrap().value;
    println!("noise {:.4} floor {:.4} real {:.4}", score.value, floor, real_score);
    assert!(score.value <= floor + 0.01);
    assert!(score.value > floor - 0.1);
    assert!(score.value < real_score);
}

#[test]
fn independent_sensitive_noise_gives_mad_reid() {
    let real = copycol_raw(600, 5).normalize();
    let s = real.sensitive_index();
    let mut synth = real.matrix().clone();
    let mut r = rng::seeded(6);
    for i in 0..synth.rows() {
        synth.row_mut(i)[s] = r.gen::<f64>();
    }
    let got = reid_mae(&real, &synth).unwrap();
    let sens = real.sensitive_column();
    let floor = mad(&sens);
    let half = sens.iter().map(|v| (v - 0.5).abs()).sum::<f64>() / sens.len() as f64;
    println!("reid {:.4} mad {:.4} |s-0.5| {:.4} per model {:?}", got.value, floor, half, got.per_model);
    assert!(got.value >= floor - 0.01);
    assert!((got.value - floor).abs() / floor < 0.35);
}

#[test]
fn shuffled_sensitive_column_is_more_private() {
    let real = copycol_raw(500, 7).normalize();
    let s = real.sensitive_index();
    let mut col = real.sensitive_column();
    col.shuffle(&mut rng::seeded(8));
    let mut shuffled = real.matrix().clone();
    for (i, v) in col.into_iter().enumerate() {
        shuffled.row_mut(i)[s] = v;
    }
    let own = reid_mae(&real, real.matrix()).unwrap().value;
    let sh = reid_mae(&real, &shuffled).unwrap().value;
    println!("reid real {own:.4} shuffled {sh:.4}");
    assert!(own <= sh);
    assert!(own < 0.1);
}

#[test]
fn exact_predictions_score_zero() {
    assert_eq!(mae(&[0.1, 0.5, 0.9], &[0.1, 0.5, 0.9]).unwrap(), 0.0);
}

#[test]
fn far_away_synthetic_clamps_utility_to_zero() {
    let real = copycol_raw(200, 9).normalize();
    let far = Tensor::matrix(200, real.n_features(), vec![50.0; 200 * real.n_features()]).unwrap();
    assert_eq!(inverse_model_mae(&real, &far, None).unwrap().value, 0.0);
}

#[test]
fn report_corners_and_round_trip() {
    let real = copycol_raw(500, 10).normalize();
    let cfg = EvalConfig {
        seed: 3,
        config_hash: Some("abc".into()),
        ..EvalConfig::default()
    };
    let same = build_report(&real, real.matrix(), &cfg).unwrap();
    assert_eq!(same.raw_em, 0.0);
    assert_eq!(same.inverse_em, 1.0);
    let noise = build_report(&real, &uniform_like(real.matrix(), 11), &cfg).unwrap();
    assert!(noise.inverse_em < same.inverse_em);
    assert!(noise.reid_mae > 2.0 * same.reid_mae);
    assert!(noise.inverse_model_mae < same.inverse_model_mae);
    for r in [&same, &noise] {
        assert_eq!(r.inverse_em, inverse_em(r.raw_em));
        assert!(r.per_feature_corr.iter().all(|c| (-1.0..=1.0).contains(c)));
        for (_, v) in r.radar_rows() {
            assert!((0.0..=1.0).contains(&v));
        }
        let text = serde_json::to_string(r).unwrap();
        let back: EvaluationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(&back, r);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
    assert_eq!(same.seeds["evaluation"], 3);
    assert_eq!(same.config_hash.as_deref(), Some("abc"));
}

#[test]
fn report_is_deterministic() {
    let real = copycol_raw(300, 12).normalize();
    let synth = uniform_like(real.matrix(), 13);
    let sliced = EvalConfig {
        seed: 5,
        em_mode: EmMode::Sliced { projections: 16 },
        ..EvalConfig::default()
    };
    for cfg in [EvalConfig::default(), sliced] {
        let a = serde_json::to_string(&build_report(&real, &synth, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&build_report(&real, &synth, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

proptest! {
    #[test]
    fn inverse_em_range(raw in 0.0f64..1e6) {
        let v = inverse_em(raw);
        prop_assert!(v > 0.0 && v <= 1.0);
        prop_assert_eq!(v == 1.0, raw == 0.0);
    }
}
