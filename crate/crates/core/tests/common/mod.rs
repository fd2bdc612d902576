#![allow(dead_code)]

use gammamix::special::{digamma, gamma_p, log_gamma, trigamma};
use gammamix::GammaMixture;
use rand::Rng;

pub const SINGLE: (f64, f64, f64) = (13.3, -0.28, 35.5);
pub const SEEDS: [u64; 5] = [11, 23, 37, 41, 59];

pub fn single_truth() -> GammaMixture {
    GammaMixture::single(gammamix::ShiftedGamma::new(SINGLE.0, SINGLE.1, SINGLE.2).unwrap())
}

pub fn mixture_truth() -> GammaMixture {
    GammaMixture::new(
        vec![
            gammamix::ShiftedGamma::new(67.1, -0.20, 109.0).unwrap(),
            gammamix::ShiftedGamma::new(19.2, -0.25, 45.8).unwrap(),
        ],
        vec![0.10, 0.90],
    )
    .unwrap()
}

/// `n` log-spaced points covering `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Runs the identity, finite-difference and monotonicity checks on the
/// special functions and returns one message per violation.
pub fn special_function_violations() -> Vec<String> {
    let mut bad = Vec::new();
    for a in log_grid(1e-2, 1e4, 200) {
        let t = trigamma(a).unwrap();
        if !(t > 1.0 / a) {
            bad.push(format!("trigamma({a}) = {t} <= 1/a"));
        }
        let d = digamma(a + 1.0).unwrap() - digamma(a).unwrap() - 1.0 / a;
        if d.abs() > 1e-10 {
            bad.push(format!("digamma recurrence at {a}: off by {d:e}"));
        }
        let l = log_gamma(a + 1.0).unwrap() - log_gamma(a).unwrap() - a.ln();
        if l.abs() > 1e-10 {
            bad.push(format!("log_gamma recurrence at {a}: off by {l:e}"));
        }
    }
    // Outside this range the central difference itself carries more than 1e-5
    // of truncation (small a) or rounding (large a) error.
    let h = 1e-6;
    for a in log_grid(0.1, 1e3, 120) {
        let fd = (log_gamma(a + h).unwrap() - log_gamma(a - h).unwrap()) / (2.0 * h);
        let e = fd - digamma(a).unwrap();
        if e.abs() > 1e-5 {
            bad.push(format!("d/da log_gamma at {a}: off by {e:e}"));
        }
        let fd = (digamma(a + h).unwrap() - digamma(a - h).unwrap()) / (2.0 * h);
        let e = fd - trigamma(a).unwrap();
        if e.abs() > 1e-5 {
            bad.push(format!("d/da digamma at {a}: off by {e:e}"));
        }
    }
    let mut rng = gammamix::rng::seeded(2024);
    for _ in 0..200 {
        let a = 10f64.powf(rng.random_range(-2.0..4.0));
        let mut xs: Vec<f64> = (0..50).map(|_| a * 10f64.powf(rng.random_range(-3.0..1.5))).collect();
        xs.push(0.0);
        xs.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for &x in &xs {
            let p = gamma_p(a, x).unwrap();
            if !(0.0..=1.0).contains(&p) || p < prev {
                bad.push(format!("P({a}, {x}) = {p} after {prev}"));
            }
            prev = p;
        }
    }
    bad
}
