#![allow(clippy::needless_range_loop)]

mod common;

use common::reference;
use corrnet::dfa::{
    analyze, analyze_with_gaps, best_breakpoint, default_scales, dfa_profile, fit_crossover, fit_exponent,
    fluctuation_function, DfaOptions,
};
use corrnet::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn white(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn cumsum(x: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    x.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

#[test]
fn white_noise_and_brownian_exponents() {
    let mut white_thetas = Vec::new();
    let mut brown_thetas = Vec::new();
    for seed in 0..20 {
        let w = white(seed, 4096);
        white_thetas.push(analyze(&w, &DfaOptions::default()).unwrap().theta);
        brown_thetas.push(analyze(&cumsum(&w), &DfaOptions::default()).unwrap().theta);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean(&white_thetas) - 0.5).abs() <= 0.05, "{white_thetas:?}");
    assert!((mean(&brown_thetas) - 1.5).abs() <= 0.1, "{brown_thetas:?}");
}

#[test]
fn fluctuation_matches_naive_windows() {
    for seed in 0..10 {
        let len = 64 + 37 * seed as usize;
        let x = white(seed + 50, len);
        let scales = default_scales(len);
        let f = fluctuation_function(&dfa_profile(&x).unwrap(), &scales).unwrap();
        for (s, v) in scales.iter().zip(&f) {
            let expected = reference::fluctuation(&x, *s);
            assert!((v - expected).abs() <= 1e-10 * expected.abs(), "len {len} scale {s}: {v} vs {expected}");
        }
    }
}

#[test]
fn profile_matches_prefix_sums() {
    let x = white(3, 500);
    let mean = x.iter().sum::<f64>() / 500.0;
    let b = dfa_profile(&x).unwrap();
    for t in [0, 1, 99, 250, 499] {
        let expected: f64 = x[..=t].iter().map(|a| a - mean).sum();
        assert!((b[t] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }
}

#[test]
fn linear_profile_has_zero_fluctuation() {
    let x = vec![1.0; 200];
    let f = fluctuation_function(&dfa_profile(&x).unwrap(), &[4, 10, 50]).unwrap();
    assert!(f.iter().all(|&v| v == 0.0));
    let line: Vec<f64> = (0..200).map(|t| 0.5 * t as f64 - 3.0).collect();
    let f = fluctuation_function(&line, &[4, 7, 50]).unwrap();
    assert!(f.iter().all(|&v| v < 1e-10), "{f:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_transform_scales_fluctuation(seed in 0u64..1000, a in prop_oneof![-20.0f64..-0.1, 0.1f64..20.0], b in -50.0f64..50.0) {
        let x = white(seed, 600);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let rx = analyze(&x, &DfaOptions::default()).unwrap();
        let ry = analyze(&y, &DfaOptions::default()).unwrap();
        prop_assert_eq!(&rx.scales, &ry.scales);
        for (fx, fy) in rx.fluctuations.iter().zip(&ry.fluctuations) {
            prop_assert!((fy / fx - a.abs()).abs() <= 1e-9 * a.abs());
        }
        prop_assert!((rx.theta - ry.theta).abs() <= 1e-9);
    }

    #[test]
    fn default_grid_is_valid(len in 16usize..100_000) {
        let s = default_scales(len);
        prop_assert!(!s.is_empty());
        prop_assert!(s.len() <= 20);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s[0] >= 4 && *s.last().unwrap() <= len / 4);
        prop_assert_eq!(s, default_scales(len));
    }
}

#[test]
fn exact_power_laws() {
    let scales: Vec<usize> = (2..=40).map(|k| k * 5).collect();
    let f07: Vec<f64> = scales.iter().map(|&s| (s as f64).powf(0.7)).collect();
    assert!((fit_exponent(&scales, &f07, (10, 200)).unwrap() - 0.7).abs() < 1e-12);
    let f1: Vec<f64> = scales.iter().map(|&s| 3.0 * s as f64).collect();
    assert!((fit_exponent(&scales, &f1, (10, 200)).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(fit_crossover(&scales, &f07).unwrap(), None);
    assert!(best_breakpoint(&scales, &f07).unwrap().sse_gain < 1e-6);
}

#[test]
fn crossover_on_piecewise_law() {
    let scales: Vec<usize> = (0..30).map(|k| (4.0 * 1.2f64.powi(k)).round() as usize).collect();
    let f: Vec<f64> = scales
        .iter()
        .map(|&s| {
            let s = s as f64;
            if s <= 25.0 {
                s.powf(0.75)
            } else {
                25f64.powf(0.75) * (s / 25.0)
            }
        })
        .collect();
    let c = fit_crossover(&scales, &f).unwrap().expect("crossover");
    assert!((c.t_c as f64 / 25.0).ln().abs() <= 1.2f64.ln() + 1e-9, "{c:?}");
    assert!((c.theta_below - 0.75).abs() < 0.02);
    assert!((c.theta_above - 1.0).abs() < 0.02);
}

#[test]
fn crossover_input_errors() {
    let err = best_breakpoint(&[4, 5, 6, 7, 8, 9, 10, 11], &[1.0; 8]).unwrap_err();
    assert!(matches!(err, Error::InsufficientPoints(_)));
    let err = best_breakpoint(&[4, 40, 400, 4000], &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
    assert!(err.to_string().contains("insufficient points"), "{err}");
}

#[test]
fn gaps_are_mean_filled_up_to_limit() {
    let x = white(8, 200);
    let mut gappy: Vec<Option<f64>> = x.iter().copied().map(Some).collect();
    for k in (0..200).step_by(10) {
        gappy[k] = None;
    }
    let r = analyze_with_gaps(&gappy, &DfaOptions::default()).unwrap();
    assert!((r.gap_fraction - 0.1).abs() < 1e-15);
    gappy[1] = None;
    assert!(matches!(analyze_with_gaps(&gappy, &DfaOptions::default()), Err(Error::TooManyGaps { .. })));
}

#[test]
fn short_series_and_bad_scale_rejected() {
    assert!(matches!(dfa_profile(&[1.0; 15]), Err(Error::SeriesTooShort { .. })));
    let p = dfa_profile(&white(1, 40)).unwrap();
    assert!(matches!(fluctuation_function(&p, &[3]), Err(Error::ScaleOutOfRange { .. })));
    assert!(matches!(fluctuation_function(&p, &[11]), Err(Error::ScaleOutOfRange { .. })));
    assert!(fluctuation_function(&p, &[10]).is_ok());
}
