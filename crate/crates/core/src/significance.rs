//! Tail probabilities of observed similarities under a fitted null, and
//! selection of the most significant query-to-candidate matches.
//!
//! A match's p-value is the right tail `P(X >= x)` of the mixture fitted to that
//! query's similarity distribution. Several matches are combined with Fisher's
//! method.

use crate::dist::GammaMixture;
use crate::error::{Error, Result};
use crate::special::chi_square_sf;

/// Right-tail probability of `x` under `null`.
pub fn p_value(null: &GammaMixture, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Input("similarity is NaN".into()));
    }
    null.sf(x)
}

/// Similarities of `n_queries` queries against `n_candidates` candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n_queries: usize,
    n_candidates: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_queries = rows.len();
        let n_candidates = rows.first().map_or(0, Vec::len);
        if n_queries == 0 || n_candidates == 0 {
            return Err(Error::Input("similarity matrix needs at least one row and one column".into()));
        }
        if let Some(q) = rows.iter().position(|r| r.len() != n_candidates) {
            return Err(Error::Input(format!(
                "row {q} has {} entries, expected {n_candidates}",
                rows[q].len()
            )));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(t) = entries.iter().position(|s| !(-1.0..=1.0).contains(s)) {
            return Err(Error::Input(format!(
                "entry ({}, {}) = {} is not a similarity in [-1, 1]",
                t / n_candidates,
                t % n_candidates,
                entries[t]
            )));
        }
        Ok(Self { n_queries, n_candidates, entries })
    }

    pub fn n_queries(&self) -> usize {
        self.n_queries
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn get(&self, query: usize, candidate: usize) -> f64 {
        self.entries[query * self.n_candidates + candidate]
    }

    pub fn row(&self, query: usize) -> &[f64] {
        &self.entries[query * self.n_candidates..(query + 1) * self.n_candidates]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub query: usize,
    pub candidate: usize,
    pub similarity: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// One entry per query, in query order.
    pub matches: Vec<Match>,
    pub combined: FisherCombination,
}

/// Picks a candidate for every query.
///
/// Without `one_to_one` each query takes its smallest p-value. With it,
/// (query, candidate) pairs are taken greedily in ascending p-value order,
/// skipping used queries and candidates; ties go to the lower candidate index,
/// then the lower query index. Greedy selection is not guaranteed to minimize
/// the combined p-value.
pub fn best_matches(s: &SimilarityMatrix, nulls: &[GammaMixture], one_to_one: bool) -> Result<MatchResult> {
    let (nq, nd) = (s.n_queries(), s.n_candidates());
    if nulls.len() != nq {
        return Err(Error::Input(format!("{} null models for {nq} queries", nulls.len())));
    }
    if one_to_one && nq > nd {
        return Err(Error::Assignment(format!(
            "{nq} queries cannot be matched one-to-one with {nd} candidates"
        )));
    }
    let mut p = Vec::with_capacity(nq * nd);
    for q in 0..nq {
        for &x in s.row(q) {
            p.push(p_value(&nulls[q], x)?);
        }
    }
    let pair = |q: usize, d: usize| Match { query: q, candidate: d, similarity: s.get(q, d), p_value: p[q * nd + d] };

    let matches: Vec<Match> = if one_to_one {
        let mut order: Vec<(usize, usize)> = (0..nq).flat_map(|q| (0..nd).map(move |d| (q, d))).collect();
        order.sort_by(|&(q1, d1), &(q2, d2)| {
            p[q1 * nd + d1].total_cmp(&p[q2 * nd + d2]).then(d1.cmp(&d2)).then(q1.cmp(&q2))
        });
        let mut chosen: Vec<Option<Match>> = vec![None; nq];
        let mut used = vec![false; nd];
        let mut left = nq;
        for (q, d) in order {
            if chosen[q].is_none() && !used[d] {
                chosen[q] = Some(pair(q, d));
                used[d] = true;
                left -= 1;
                if left == 0 {
                    break;
                }
            }
        }
        chosen.into_iter().map(|m| m.expect("every query is assigned when Q <= D")).collect()
    } else {
        (0..nq)
            .map(|q| {
                let best = (0..nd)
                    .min_by(|&a, &b| p[q * nd + a].total_cmp(&p[q * nd + b]).then(a.cmp(&b)))
                    .expect("at least one candidate");
                pair(q, best)
            })
            .collect()
    };
    let ps: Vec<f64> = matches.iter().map(|m| m.p_value).collect();
    let combined = combine_p_values(&ps)?;
    Ok(MatchResult { matches, combined })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherCombination {
    /// `-2 Σ ln pᵢ`.
    pub stat: f64,
    /// Chi-square tail with `2k` degrees of freedom at `stat`.
    pub p_value: f64,
    /// Whether some input was zero and replaced by the smallest positive double.
    pub clamped: bool,
}

/// Fisher's method.
pub fn combine_p_values(ps: &[f64]) -> Result<FisherCombination> {
    if ps.is_empty() {
        return Err(Error::Input("no p-values to combine".into()));
    }
    if let Some(p) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("p-value {p} is outside [0, 1]")));
    }
    let tiny = f64::from_bits(1);
    let clamped = ps.contains(&0.0);
    let stat = -2.0 * ps.iter().map(|&p| p.max(tiny).ln()).sum::<f64>();
    let p_value = chi_square_sf(stat, 2.0 * ps.len() as f64)?;
    Ok(FisherCombination { stat, p_value, clamped })
}
