//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 20_000;

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment { lo, hi, value: kron * half, err: ((kron - gauss) * half).abs() }
}

/// Integrates `f` over the finite interval `[lo, hi]` until the estimated
/// error is below `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain("integrate requires finite limits".into()));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, lo, hi);
    let (mut total, mut err) = (first.value, first.err);
    heap.push(first);
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Domain(format!(
                "quadrature did not reach tolerance (estimate {total}, error {err})"
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        let left = kronrod(&f, worst.lo, mid);
        let right = kronrod(&f, mid, worst.hi);
        total += left.value + right.value - worst.value;
        err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        if !total.is_finite() {
            return Err(Error::Domain("quadrature produced a non-finite value".into()));
        }
    }
    // Re-sum to shed the drift from incremental updates.
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Integrates `f` over `[lo, ∞)` through the map `x = lo + u / (1 - u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, lo: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    integrate(
        |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - u;
            let v = f(lo + u / one_minus) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}
