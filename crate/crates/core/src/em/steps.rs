use rayon::prelude::*;

use super::{chunked_sum, FitConfig, ScoreSample, ShiftUpdate, CHUNK};
use crate::dist::{GammaMixture, ShiftedGamma};
use crate::error::{Error, Result};
use crate::special::{digamma_pos, ln_gamma_pos};

/// Search interval for the shape update.
pub const ALPHA_BRACKET: (f64, f64) = (1e-6, 1e6);
/// Shift updates are skipped for shapes at or below this value.
pub const C_UPDATE_MIN_ALPHA: f64 = 1.0 + 1e-6;
/// A state whose responsibility mass falls below this fraction of the sample
/// size is reinitialized.
pub const EMPTY_STATE_MASS: f64 = 1e-8;

/// Posterior state probabilities `γ[t][i]`, row-major over samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    n_states: usize,
    gamma: Vec<f64>,
    log_likelihood: f64,
}

impl Responsibilities {
    /// Wraps an explicit matrix; each row must be a probability vector.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_states = rows.first().map_or(0, Vec::len);
        if n_states == 0 {
            return Err(Error::Input("responsibilities need at least one row and column".into()));
        }
        let mut gamma = Vec::with_capacity(rows.len() * n_states);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::Input(format!("row {t} has {} entries, expected {n_states}", row.len())));
            }
            if row.iter().any(|g| !(*g >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::Input(format!("row {t} is not a probability vector")));
            }
            gamma.extend_from_slice(row);
        }
        Ok(Self { n_states, gamma, log_likelihood: f64::NAN })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_samples(&self) -> usize {
        self.gamma.len() / self.n_states
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.gamma[t * self.n_states..(t + 1) * self.n_states]
    }

    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.gamma[t * self.n_states + i]
    }

    /// Log-likelihood of the model these responsibilities were computed from
    /// (`NaN` for matrices built with [`from_rows`](Self::from_rows)).
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn column_sum(&self, i: usize) -> f64 {
        let s = self.n_states;
        chunked_sum(self.n_samples(), |lo, hi| (lo..hi).map(|t| self.gamma[t * s + i]).sum())
    }

    fn check_shape(&self, data: &ScoreSample, i: usize) -> Result<()> {
        if self.n_samples() != data.len() || i >= self.n_states {
            return Err(Error::Input(format!(
                "responsibilities are {}x{} but data has {} samples (state {i})",
                self.n_samples(),
                self.n_states,
                data.len()
            )));
        }
        Ok(())
    }
}

/// E-step: responsibilities `γ[t][i] = τᵢ Gᵢ(xₜ) / Σⱼ τⱼ Gⱼ(xₜ)`, computed in
/// log space, together with the data log-likelihood.
pub fn e_step(m: &GammaMixture, data: &ScoreSample) -> Result<Responsibilities> {
    let s = m.n_states();
    let comps = m.components();
    let log_w: Vec<f64> = m.weights().iter().map(|w| w.ln()).collect();
    let xs = data.values();
    let mut gamma = vec![0.0; xs.len() * s];

    let fill = |(k, (rows, chunk)): (usize, (&mut [f64], &[f64]))| -> Result<f64> {
        let mut ll = 0.0;
        let mut terms = vec![0.0; s];
        for (j, (&x, row)) in chunk.iter().zip(rows.chunks_mut(s)).enumerate() {
            let mut max = f64::NEG_INFINITY;
            for ((term, g), lw) in terms.iter_mut().zip(comps).zip(&log_w) {
                *term = lw + g.log_pdf(x);
                max = max.max(*term);
            }
            if max == f64::NEG_INFINITY {
                return Err(Error::Fit(format!(
                    "sample {} (x = {x}) lies at or below every component shift",
                    k * CHUNK + j
                )));
            }
            let mut norm = 0.0;
            for (g, term) in row.iter_mut().zip(&terms) {
                *g = (term - max).exp();
                norm += *g;
            }
            for g in row.iter_mut() {
                *g /= norm;
            }
            ll += max + norm.ln();
        }
        Ok(ll)
    };
    let partials: Vec<Result<f64>> = if xs.len() >= 4 * CHUNK {
        gamma.par_chunks_mut(CHUNK * s).zip(xs.par_chunks(CHUNK)).enumerate().map(fill).collect()
    } else {
        gamma.chunks_mut(CHUNK * s).zip(xs.chunks(CHUNK)).enumerate().map(fill).collect()
    };
    let mut log_likelihood = 0.0;
    for p in partials {
        log_likelihood += p?;
    }
    Ok(Responsibilities { n_states: s, gamma, log_likelihood })
}

/// `τ̂ᵢ = Σₜ γ[t][i] / Σₜⱼ γ[t][j]`.
pub fn update_tau(r: &Responsibilities) -> Vec<f64> {
    let sums: Vec<f64> = (0..r.n_states).map(|i| r.column_sum(i)).collect();
    let total: f64 = sums.iter().sum();
    sums.into_iter().map(|w| w / total).collect()
}

// Σγ, Σγ(x - c), Σγ ln(x - c) for one state.
fn shifted_moments(r: &Responsibilities, data: &ScoreSample, i: usize, c: f64) -> Result<(f64, f64, f64)> {
    let s = r.n_states;
    let xs = data.values();
    let mass = r.column_sum(i);
    let first = chunked_sum(xs.len(), |lo, hi| {
        (lo..hi).map(|t| r.gamma[t * s + i] * (xs[t] - c)).sum()
    });
    let log = chunked_sum(xs.len(), |lo, hi| {
        (lo..hi)
            .map(|t| {
                let g = r.gamma[t * s + i];
                if g > 0.0 {
                    g * (xs[t] - c).ln()
                } else {
                    0.0
                }
            })
            .sum()
    });
    if !(mass > 0.0) {
        return Err(Error::Fit(format!("state {i} carries no responsibility mass")));
    }
    if !(first > 0.0 && log.is_finite()) {
        return Err(Error::Fit(format!("state {i} covers samples at or below its shift {c}")));
    }
    Ok((mass, first, log))
}

/// `κᵢ = Σγ / Σγ(xₜ - cᵢ)`, the inverse responsibility-weighted mean excess
/// over the shift.
pub fn weighted_kappa(r: &Responsibilities, data: &ScoreSample, i: usize, c_i: f64) -> Result<f64> {
    r.check_shape(data, i)?;
    let (mass, first, _) = shifted_moments(r, data, i, c_i)?;
    Ok(mass / first)
}

/// The shape score with the rate profiled out (`λ = ακ`):
///
/// ```text
/// F(α) = Σₜ γ (ln(xₜ-c) - κ(xₜ-c) + ln α + 1 + ln κ - ψ(α))
/// ```
///
/// `F'(α) = Σγ (1/α - ψ'(α)) < 0`, so any root is unique.
#[derive(Debug, Clone, Copy)]
pub struct AlphaScore {
    mass: f64,
    constant: f64,
}

impl AlphaScore {
    pub fn new(r: &Responsibilities, data: &ScoreSample, i: usize, c_i: f64, kappa_i: f64) -> Result<Self> {
        r.check_shape(data, i)?;
        if !(kappa_i > 0.0) {
            return Err(Error::Fit(format!("state {i} has non-positive kappa {kappa_i}")));
        }
        let (mass, first, log) = shifted_moments(r, data, i, c_i)?;
        Ok(Self { mass, constant: log - kappa_i * first + mass * (1.0 + kappa_i.ln()) })
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        self.constant + self.mass * (alpha.ln() - digamma_pos(alpha))
    }
}

/// M-step shape update: the root of [`AlphaScore`], bracketed by doubling or
/// halving away from `α = 1` and refined by bisection.
pub fn update_alpha(
    r: &Responsibilities,
    data: &ScoreSample,
    i: usize,
    c_i: f64,
    kappa_i: f64,
    tol: f64,
) -> Result<f64> {
    let score = AlphaScore::new(r, data, i, c_i, kappa_i)?;
    solve_alpha(&score, i, tol)
}

fn solve_alpha(score: &AlphaScore, i: usize, tol: f64) -> Result<f64> {
    let (min, max) = ALPHA_BRACKET;
    let (mut lo, mut hi) = (1.0, 1.0);
    if score.eval(1.0) > 0.0 {
        while score.eval(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > max {
                return Err(Error::Fit(format!("shape of state {i} exceeds {max}; data look degenerate")));
            }
        }
    } else {
        while score.eval(lo) <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < min {
                return Err(Error::Fit(format!("shape of state {i} falls below {min}")));
            }
        }
    }
    Ok(bisect_decreasing(|a| score.eval(a), lo, hi, tol))
}

/// `λ̂ = α̂ κ`.
pub fn update_lambda(alpha_hat: f64, kappa_i: f64) -> f64 {
    alpha_hat * kappa_i
}

/// The shift score `H(c) = Σₜ γ ((1-α)/(xₜ-c) + λ)` for one state. For `α > 1`
/// it is strictly decreasing in `c` below the smallest covered sample.
#[derive(Debug, Clone, Copy)]
pub struct ShiftScore<'a> {
    r: &'a Responsibilities,
    data: &'a ScoreSample,
    state: usize,
    alpha: f64,
    lambda: f64,
    mass: f64,
}

impl<'a> ShiftScore<'a> {
    pub fn new(r: &'a Responsibilities, data: &'a ScoreSample, i: usize, alpha: f64, lambda: f64) -> Result<Self> {
        r.check_shape(data, i)?;
        Ok(Self { r, data, state: i, alpha, lambda, mass: r.column_sum(i) })
    }

    pub fn eval(&self, c: f64) -> f64 {
        let (s, i, xs) = (self.r.n_states, self.state, self.data.values());
        let inverse = chunked_sum(xs.len(), |lo, hi| {
            (lo..hi)
                .map(|t| {
                    let g = self.r.gamma[t * s + i];
                    if g > 0.0 {
                        g / (xs[t] - c)
                    } else {
                        0.0
                    }
                })
                .sum()
        });
        (1.0 - self.alpha) * inverse + self.lambda * self.mass
    }

    /// The shift-dependent part of the expected complete-data log-likelihood.
    pub fn objective(&self, c: f64) -> f64 {
        let (s, i, xs) = (self.r.n_states, self.state, self.data.values());
        chunked_sum(xs.len(), |lo, hi| {
            (lo..hi)
                .map(|t| {
                    let g = self.r.gamma[t * s + i];
                    if g > 0.0 {
                        g * ((self.alpha - 1.0) * (xs[t] - c).ln() - self.lambda * (xs[t] - c))
                    } else {
                        0.0
                    }
                })
                .sum()
        })
    }

    /// Smallest and largest sample with positive responsibility.
    pub fn covered_range(&self) -> Option<(f64, f64)> {
        covered_range(self.r, self.data, self.state)
    }
}

fn covered_range(r: &Responsibilities, data: &ScoreSample, i: usize) -> Option<(f64, f64)> {
    let s = r.n_states;
    let xs = data.values();
    let first = (0..xs.len()).find(|&t| r.gamma[t * s + i] > 0.0)?;
    let last = (0..xs.len()).rev().find(|&t| r.gamma[t * s + i] > 0.0)?;
    Some((xs[first], xs[last]))
}

/// Expected complete-data log-likelihood of state `i` at shift `c`, maximized
/// over shape and rate. Returns the value and the maximizing shape.
pub fn profile_objective(r: &Responsibilities, data: &ScoreSample, i: usize, c: f64, tol: f64) -> Result<(f64, f64)> {
    r.check_shape(data, i)?;
    let (mass, first, log) = shifted_moments(r, data, i, c)?;
    let kappa = mass / first;
    let alpha = solve_alpha(&AlphaScore { mass, constant: log + mass * kappa.ln() }, i, tol)?;
    let value = mass * (alpha * (alpha * kappa).ln() - ln_gamma_pos(alpha) - alpha) + (alpha - 1.0) * log;
    Ok((value, alpha))
}

const PROFILE_GRID: usize = 24;

/// Shift update that maximizes [`profile_objective`] over the same interval as
/// [`update_c`], searched on `ln(x_min - c)` by a grid scan refined with golden
/// section. Shifts whose best shape is at or below `1 + 1e-6` are excluded, and
/// `current_c` is kept unless beaten.
pub fn update_c_profile(
    r: &Responsibilities,
    data: &ScoreSample,
    i: usize,
    current_c: f64,
    cfg: &FitConfig,
) -> Result<CUpdate> {
    let (x_min, x_max) =
        covered_range(r, data, i).ok_or_else(|| Error::Fit(format!("state {i} carries no responsibility mass")))?;
    let span = (x_max - x_min).max(1e-12);
    let (u_lo, u_hi) = ((cfg.c_margin * span).ln(), (10.0 * span).ln());
    let shift = |u: f64| x_min - u.exp();
    let value = |c: f64| match profile_objective(r, data, i, c, cfg.bisection_tol) {
        Ok((v, alpha)) if alpha > C_UPDATE_MIN_ALPHA && v.is_finite() => v,
        _ => f64::NEG_INFINITY,
    };
    let step = (u_hi - u_lo) / (PROFILE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..PROFILE_GRID).map(|k| value(shift(u_lo + k as f64 * step))).collect();
    let k = (0..PROFILE_GRID).fold(0, |b, k| if grid[k] > grid[b] { k } else { b });

    let (mut best_u, mut best) = (u_lo + k as f64 * step, grid[k]);
    if best.is_finite() {
        let (mut a, mut b) = (u_lo + k.saturating_sub(1) as f64 * step, u_lo + (k + 1).min(PROFILE_GRID - 1) as f64 * step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
        let (mut f1, mut f2) = (value(shift(x1)), value(shift(x2)));
        while b - a > 1e-9 {
            if f1 < f2 {
                (a, x1, f1) = (x1, x2, f2);
                x2 = a + g * (b - a);
                f2 = value(shift(x2));
            } else {
                (b, x2, f2) = (x2, x1, f1);
                x1 = b - g * (b - a);
                f1 = value(shift(x1));
            }
        }
        let (u, f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if f > best {
            (best_u, best) = (u, f);
        }
    }
    if current_c < x_min && !(best > value(current_c)) {
        return Ok(CUpdate { c: current_c, clamped: false });
    }
    if !best.is_finite() {
        return Ok(CUpdate { c: current_c, clamped: false });
    }
    let clamped = best_u - u_lo < 1e-6 * (u_hi - u_lo) || u_hi - best_u < 1e-6 * (u_hi - u_lo);
    Ok(CUpdate { c: shift(best_u), clamped })
}

/// Outcome of [`update_c`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CUpdate {
    pub c: f64,
    /// The score had no sign change on the search interval.
    pub clamped: bool,
}

/// M-step shift update: the root of [`ShiftScore`] on
/// `[x_min - 10·span, x_min - margin·span]`, where `x_min` is the smallest
/// sample the state covers. Shapes `α <= 1 + 1e-6` keep `current_c`, since the
/// score then pushes the shift onto the data.
pub fn update_c(
    r: &Responsibilities,
    data: &ScoreSample,
    i: usize,
    alpha_i: f64,
    lambda_i: f64,
    current_c: f64,
    cfg: &FitConfig,
) -> Result<CUpdate> {
    if alpha_i <= C_UPDATE_MIN_ALPHA {
        return Ok(CUpdate { c: current_c, clamped: false });
    }
    let score = ShiftScore::new(r, data, i, alpha_i, lambda_i)?;
    let (x_min, x_max) = score
        .covered_range()
        .ok_or_else(|| Error::Fit(format!("state {i} carries no responsibility mass")))?;
    let span = (x_max - x_min).max(1e-12);
    let lo = x_min - 10.0 * span;
    let hi = x_min - cfg.c_margin * span;
    let (h_lo, h_hi) = (score.eval(lo), score.eval(hi));
    if h_lo > 0.0 && h_hi < 0.0 {
        return Ok(CUpdate { c: bisect_decreasing(|c| score.eval(c), lo, hi, cfg.bisection_tol), clamped: false });
    }
    let edge = if h_hi >= 0.0 { hi } else { lo };
    // Concavity makes the nearer endpoint the constrained maximum, but never
    // trade it for a worse value than the current shift.
    let keep = current_c < x_min && score.objective(current_c) > score.objective(edge);
    Ok(CUpdate { c: if keep { current_c } else { edge }, clamped: true })
}

// Root of a decreasing function with f(lo) > 0 >= f(hi).
fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * mid.abs().max(1.0) || mid == lo || mid == hi {
            return mid;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Result of one EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EmStep {
    pub model: GammaMixture,
    /// Log-likelihood of the model the step started from.
    pub log_likelihood: f64,
    pub c_clamped: usize,
    /// States that were reinitialized because they lost all responsibility.
    pub rescued: Vec<usize>,
}

/// One full ECM iteration: E-step, then `τ`, and per state `c → κ → α → λ`.
pub fn em_step(m: &GammaMixture, data: &ScoreSample, cfg: &FitConfig) -> Result<EmStep> {
    let r = e_step(m, data)?;
    m_step(m, &r, data, cfg)
}

pub(crate) fn m_step(m: &GammaMixture, r: &Responsibilities, data: &ScoreSample, cfg: &FitConfig) -> Result<EmStep> {
    let s = m.n_states();
    let mut weights = update_tau(r);
    let n = data.len() as f64;
    let mut components = Vec::with_capacity(s);
    let mut c_clamped = 0;
    let mut rescued = Vec::new();
    for (i, g) in m.components().iter().enumerate() {
        if r.column_sum(i) < EMPTY_STATE_MASS * n {
            rescued.push(i);
            components.push(*g);
            continue;
        }
        let cu = match cfg.shift_update {
            ShiftUpdate::Score => update_c(r, data, i, g.alpha(), g.lambda(), g.shift(), cfg)?,
            ShiftUpdate::Profile => update_c_profile(r, data, i, g.shift(), cfg)?,
        };
        c_clamped += usize::from(cu.clamped);
        let kappa = weighted_kappa(r, data, i, cu.c)?;
        let alpha = update_alpha(r, data, i, cu.c, kappa, cfg.bisection_tol)?;
        components.push(ShiftedGamma::new(alpha, cu.c, update_lambda(alpha, kappa))?);
    }
    if !rescued.is_empty() {
        rescue_states(m, data, &rescued, &mut components, &mut weights)?;
    }
    Ok(EmStep {
        model: GammaMixture::from_parts_normalized(components, weights),
        log_likelihood: r.log_likelihood,
        c_clamped,
        rescued,
    })
}

// Re-seat empty states at the worst-explained sample.
fn rescue_states(
    m: &GammaMixture,
    data: &ScoreSample,
    states: &[usize],
    components: &mut [ShiftedGamma],
    weights: &mut [f64],
) -> Result<()> {
    let xs = data.values();
    let worst = xs
        .iter()
        .copied()
        .min_by(|a, b| m.log_pdf(*a).total_cmp(&m.log_pdf(*b)))
        .expect("sample is non-empty");
    let s = components.len() as f64;
    let sd = (crate::stats::variance(xs).sqrt() / s).max(1e-9);
    let alpha: f64 = 4.0;
    let lambda = alpha.sqrt() / sd;
    let fresh = ShiftedGamma::new(alpha, worst - alpha / lambda, lambda)?;
    let share = 1.0 / s;
    let kept: f64 = weights.iter().enumerate().filter(|(i, _)| !states.contains(i)).map(|(_, w)| w).sum();
    for (i, w) in weights.iter_mut().enumerate() {
        if states.contains(&i) {
            components[i] = fresh;
            *w = share;
        } else if kept > 0.0 {
            *w *= (1.0 - share * states.len() as f64).max(0.0) / kept;
        }
    }
    Ok(())
}
