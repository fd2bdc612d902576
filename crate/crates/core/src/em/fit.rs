use super::steps::{e_step, m_step};
use super::{init_mixture, FitConfig, ScoreSample};
use crate::dist::{GammaMixture, ShiftedGamma};
use crate::error::{Error, Result};

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: GammaMixture,
    /// Total log-likelihood of `model` on the full sample.
    pub log_likelihood: f64,
    pub n_samples: usize,
    /// EM iterations across both phases.
    pub iterations_run: usize,
    /// Whether the final phase met the tolerance before its budget ran out.
    pub converged: bool,
    /// Mass the untruncated model places outside `[-1, 1]`.
    pub mass_outside: f64,
    /// Total log-likelihood of every visited model on the data of its phase.
    pub per_iter_ll: Vec<f64>,
    /// Index into `per_iter_ll` of the first full-data entry (0 without warm start).
    pub warm_switch_iter: usize,
    /// Indices into `per_iter_ll` where a new regime starts: the warm switch and
    /// any empty-state rescue.
    pub regime_starts: Vec<usize>,
    /// Shift updates that hit the edge of their search interval.
    pub c_clamped: usize,
    pub rescued: usize,
    pub config: FitConfig,
}

impl FitReport {
    pub fn mean_log_likelihood(&self) -> f64 {
        self.log_likelihood / self.n_samples as f64
    }

    pub fn bic(&self) -> f64 {
        bic(self.log_likelihood, self.model.n_states(), self.n_samples)
    }

    /// Largest log-likelihood decrease between consecutive entries of
    /// `per_iter_ll` within one regime (zero when monotone).
    pub fn max_ll_decrease(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.per_iter_ll.len() {
            if self.regime_starts.contains(&k) {
                continue;
            }
            worst = worst.max(self.per_iter_ll[k - 1] - self.per_iter_ll[k]);
        }
        worst
    }
}

/// Bayesian information criterion `k ln n - 2 LL` with `k = 4s - 1` free
/// parameters for `s` states.
pub fn bic(log_likelihood: f64, n_states: usize, n_samples: usize) -> f64 {
    let k = (4 * n_states - 1) as f64;
    k * (n_samples as f64).ln() - 2.0 * log_likelihood
}

#[derive(Default)]
struct Trace {
    lls: Vec<f64>,
    regime_starts: Vec<usize>,
    iterations: usize,
    c_clamped: usize,
    rescued: usize,
}

/// Fits a mixture of `cfg.n_states` shifted gammas.
///
/// With `warm_start` the first `⌊warm_fraction_iters · max_iters⌋` iterations
/// run on every `warm_data_stride`-th sorted value, and the remaining budget on
/// the full sample. Each phase stops early once the relative log-likelihood
/// change drops below `rel_ll_tol`.
pub fn fit(data: &ScoreSample, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    let needed = 10 * cfg.n_states;
    if data.len() < needed {
        return Err(Error::TooFewSamples { needed, got: data.len() });
    }
    let mut model = init_mixture(data, cfg.n_states)?;
    let mut trace = Trace::default();

    let subsample = data.strided(cfg.warm_data_stride);
    let warm = cfg.warm_start && cfg.warm_data_stride > 1 && subsample.len() >= needed;
    let warm_budget = if warm {
        ((cfg.warm_fraction_iters * cfg.max_iters as f64).floor() as usize).clamp(1, cfg.max_iters)
    } else {
        0
    };
    let full_budget = (cfg.max_iters - warm_budget).max(1);

    if warm {
        model = cover(model, &subsample, cfg)?;
        (model, _) = run_phase(model, &subsample, warm_budget, cfg, &mut trace)?;
    }
    let warm_switch_iter = trace.lls.len();
    if warm {
        trace.regime_starts.push(warm_switch_iter);
    }
    model = cover(model, data, cfg)?;
    let (model, converged) = run_phase(model, data, full_budget, cfg, &mut trace)?;

    Ok(FitReport {
        log_likelihood: *trace.lls.last().expect("a phase records its starting point"),
        n_samples: data.len(),
        iterations_run: trace.iterations,
        converged,
        mass_outside: model.mass_outside()?,
        model,
        per_iter_ll: trace.lls,
        warm_switch_iter,
        regime_starts: trace.regime_starts,
        c_clamped: trace.c_clamped,
        rescued: trace.rescued,
        config: cfg.clone(),
    })
}

fn run_phase(
    mut model: GammaMixture,
    data: &ScoreSample,
    budget: usize,
    cfg: &FitConfig,
    trace: &mut Trace,
) -> Result<(GammaMixture, bool)> {
    let mut r = e_step(&model, data)?;
    trace.lls.push(r.log_likelihood());
    let floor = data.len() as f64 * f64::EPSILON;
    for _ in 0..budget {
        let step = m_step(&model, &r, data, cfg)?;
        trace.iterations += 1;
        trace.c_clamped += step.c_clamped;
        if !step.rescued.is_empty() {
            trace.rescued += step.rescued.len();
            trace.regime_starts.push(trace.lls.len());
        }
        let previous = r.log_likelihood();
        r = e_step(&step.model, data)?;
        model = step.model;
        let current = r.log_likelihood();
        trace.lls.push(current);
        if step.rescued.is_empty() && (current - previous).abs() <= cfg.rel_ll_tol * previous.abs().max(floor) {
            return Ok((model, true));
        }
    }
    Ok((model, false))
}

// Lowers the smallest shift if `data` reaches below every component.
fn cover(model: GammaMixture, data: &ScoreSample, cfg: &FitConfig) -> Result<GammaMixture> {
    if data.min() > model.min_shift() {
        return Ok(model);
    }
    let span = (data.max() - data.min()).max(1e-12);
    let lowest = model.min_shift();
    let mut components = model.components().to_vec();
    for g in components.iter_mut().filter(|g| g.shift() == lowest) {
        *g = ShiftedGamma::new(g.alpha(), data.min() - cfg.c_margin * span, g.lambda())?;
    }
    Ok(GammaMixture::from_parts_normalized(components, model.weights().to_vec()))
}
