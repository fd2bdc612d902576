//! Expectation–conditional-maximization (ECM) fitting of shifted gamma mixtures.
//!
//! One EM step computes responsibilities `γ[t][i] ∝ τᵢ Gᵢ(xₜ)` and then updates,
//! for each state in turn:
//!
//! 1. `τᵢ` as the normalized responsibility mass;
//! 2. the shift `cᵢ` by bisection on `Σₜ γ (1-α)/(xₜ-c) + λ = 0` (skipped when `α <= 1`);
//! 3. `κᵢ = Σγ / Σγ(xₜ-cᵢ)` using the new shift;
//! 4. `αᵢ` by bisection on the profile score, which is strictly decreasing in `α`;
//! 5. `λᵢ = αᵢ κᵢ`.
//!
//! Every conditional update maximizes the expected complete-data log-likelihood
//! in its own coordinates, so the observed log-likelihood never decreases within
//! a fixed dataset. [`fit`] runs most iterations on a strided subsample before
//! finishing on the full data.

mod fit;
mod init;
mod steps;

pub use fit::{bic, fit, FitReport};
pub use init::init_mixture;
pub use steps::{
    e_step, em_step, profile_objective, update_alpha, update_c, update_c_profile, update_lambda,
    update_tau, weighted_kappa, CUpdate, EmStep, Responsibilities,
};

use crate::error::{Error, Result};

/// Bounds accepted by [`ScoreSample::cosine`].
pub const COSINE_BOUNDS: (f64, f64) = (-1.0, 1.0);

/// A one-dimensional sample of scores, stored in ascending order.
///
/// Sorting on construction makes every fit independent of the input order,
/// including the strided warm-start subsample, which then covers the sample
/// quantiles evenly.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSample {
    values: Vec<f64>,
    bounds: Option<(f64, f64)>,
}

impl ScoreSample {
    /// A sample with no range restriction beyond finiteness.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_bounds(values, None)
    }

    /// A sample of cosine similarities, each required to lie in `[-1, 1]`.
    pub fn cosine(values: Vec<f64>) -> Result<Self> {
        Self::with_bounds(values, Some(COSINE_BOUNDS))
    }

    pub fn with_bounds(mut values: Vec<f64>, bounds: Option<(f64, f64)>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if let Some(t) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Input(format!("sample {t} is not finite ({})", values[t])));
        }
        if let Some((lo, hi)) = bounds {
            if let Some(t) = values.iter().position(|x| *x < lo || *x > hi) {
                return Err(Error::Input(format!(
                    "sample {t} ({}) lies outside [{lo}, {hi}]",
                    values[t]
                )));
            }
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values, bounds })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Every `stride`-th value starting with the smallest.
    pub fn strided(&self, stride: usize) -> Self {
        Self {
            values: self.values.iter().step_by(stride.max(1)).copied().collect(),
            bounds: self.bounds,
        }
    }
}

/// How the M-step moves each shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftUpdate {
    /// Root of the shift score with shape and rate held at their current
    /// values, one coordinate step per iteration.
    #[default]
    Score,
    /// Joint maximization of the state's expected complete-data log-likelihood
    /// over shift, shape and rate, with shape and rate profiled out. Slower
    /// per iteration but does not crawl along the shift-shape ridge; a single
    /// state converges in one step.
    Profile,
}

/// Control parameters for [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub n_states: usize,
    pub max_iters: usize,
    /// Convergence threshold on the relative change of the log-likelihood.
    pub rel_ll_tol: f64,
    pub warm_start: bool,
    /// Share of `max_iters` budgeted to the subsample phase.
    pub warm_fraction_iters: f64,
    /// The subsample keeps every `warm_data_stride`-th sorted value.
    pub warm_data_stride: usize,
    pub bisection_tol: f64,
    /// Shift updates stay this fraction of the data span below the smallest
    /// covered sample.
    pub c_margin: f64,
    pub shift_update: ShiftUpdate,
    /// Recorded with the fit; the fitter itself is deterministic.
    pub seed: u64,
}

impl FitConfig {
    pub fn new(n_states: usize) -> Self {
        Self {
            n_states,
            max_iters: 200,
            rel_ll_tol: 1e-8,
            warm_start: true,
            warm_fraction_iters: 0.95,
            warm_data_stride: 20,
            bisection_tol: 1e-10,
            c_margin: 1e-6,
            shift_update: ShiftUpdate::Score,
            seed: 0,
        }
    }

    pub fn cold(mut self) -> Self {
        self.warm_start = false;
        self
    }

    pub fn profile(mut self) -> Self {
        self.shift_update = ShiftUpdate::Profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Input(format!("invalid fit configuration: {msg}")));
        if self.n_states == 0 {
            return bad("n_states must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.rel_ll_tol > 0.0) {
            return bad("rel_ll_tol must be positive");
        }
        if !(self.warm_fraction_iters > 0.0 && self.warm_fraction_iters < 1.0) {
            return bad("warm_fraction_iters must lie in (0, 1)");
        }
        if self.warm_data_stride == 0 {
            return bad("warm_data_stride must be at least 1");
        }
        if !(self.bisection_tol > 0.0) {
            return bad("bisection_tol must be positive");
        }
        if !(self.c_margin > 0.0 && self.c_margin < 1.0) {
            return bad("c_margin must lie in (0, 1)");
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::new(1)
    }
}

/// Rows per work unit in data-parallel reductions. Partial sums are combined
/// in chunk order, so results do not depend on the thread count.
pub(crate) const CHUNK: usize = 8192;
const PARALLEL_MIN: usize = 4 * CHUNK;

/// `Σ f(lo, hi)` over fixed chunks `[lo, hi)` of `0..n`.
pub(crate) fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    use rayon::prelude::*;
    let chunks = n.div_ceil(CHUNK);
    let part = |k: usize| f(k * CHUNK, ((k + 1) * CHUNK).min(n));
    if n < PARALLEL_MIN {
        (0..chunks).map(part).sum()
    } else {
        let parts: Vec<f64> = (0..chunks).into_par_iter().map(part).collect();
        parts.into_iter().sum()
    }
}
