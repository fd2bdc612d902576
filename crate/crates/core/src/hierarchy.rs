//! Synthetic similarity samples from a random hierarchy of topic centers.
//!
//! A root vector with uniform(-1, 1) entries is split `depth` times into
//! `degree` children `y = η·x + u`, each `u` a fresh uniform(-1, 1) vector. The
//! leaves are normalized and compared with a query by cosine similarity.
//!
//! Every node draws its noise from its own stream keyed by
//! `(seed, generation, index)`, so the tree is walked depth first without
//! holding a whole generation in memory, and the output does not depend on
//! traversal order or thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

/// Default limit on the number of leaves.
pub const DEFAULT_MAX_SAMPLES: usize = 1 << 21;

/// Which vector the leaves are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    /// The normalized root.
    Root,
    /// The first leaf of the final generation.
    FirstLeaf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    pub depth: usize,
    /// Weight `η` of the parent in each child.
    pub ratio: f64,
    pub degree: usize,
    pub dim: usize,
    pub seed: u64,
    pub query: Query,
    /// Leave out the query's similarity with itself (first-leaf query only).
    pub drop_self: bool,
    pub max_samples: usize,
}

impl HierarchyConfig {
    pub fn new(depth: usize, ratio: f64, degree: usize) -> Self {
        Self {
            depth,
            ratio,
            degree,
            dim: 384,
            seed: 1,
            query: Query::FirstLeaf,
            drop_self: false,
            max_samples: DEFAULT_MAX_SAMPLES,
        }
    }

    /// Number of leaves, `degree^depth`.
    pub fn n_leaves(&self) -> Result<usize> {
        self.validate()?;
        self.degree
            .checked_pow(self.depth as u32)
            .filter(|&n| n <= self.max_samples)
            .ok_or_else(|| {
                Error::Size(format!(
                    "{}^{} leaves exceed the sample cap {}",
                    self.degree, self.depth, self.max_samples
                ))
            })
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.degree == 0 {
            return Err(Error::Input("depth and degree must be at least 1".into()));
        }
        if self.dim < 2 {
            return Err(Error::Input(format!("dimension must be at least 2, got {}", self.dim)));
        }
        if !self.ratio.is_finite() {
            return Err(Error::Input(format!("ratio must be finite, got {}", self.ratio)));
        }
        if u32::try_from(self.depth).is_err() {
            return Err(Error::Size(format!("depth {} is too large", self.depth)));
        }
        Ok(())
    }
}

/// Similarities with the tree level of each sample's last common ancestor with
/// the query: 0 for the query itself, `ℓ` when the ancestor is `ℓ` generations
/// above the leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSimilarities {
    pub sims: Vec<f64>,
    pub levels: Vec<u32>,
}

impl LabeledSimilarities {
    pub fn len(&self) -> usize {
        self.sims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sims.is_empty()
    }
}

pub fn simulate(cfg: &HierarchyConfig) -> Result<LabeledSimilarities> {
    let n_leaves = cfg.n_leaves()?;
    let walker = Walker { cfg };

    // q: either the root or the leaf reached by always taking child 0.
    let mut q = walker.root();
    if cfg.query == Query::FirstLeaf {
        for g in 1..=cfg.depth {
            q = walker.child(&q, g, 0);
        }
    }
    let q = Target { norm2: dot(&q, &q), v: q };

    // Split the tree at a generation with enough subtrees to share out.
    let split = (0..=cfg.depth)
        .find(|&g| cfg.degree.pow(g as u32) >= 64)
        .unwrap_or(cfg.depth);
    let per_subtree = cfg.degree.pow((cfg.depth - split) as u32);
    let mut sims = vec![0.0; n_leaves];
    sims.par_chunks_mut(per_subtree).enumerate().for_each(|(top, out)| {
        let mut node = walker.root();
        for g in 1..=split {
            node = walker.child(&node, g, top / cfg.degree.pow((split - g) as u32));
        }
        walker.leaves(node, split, top, &q, out);
    });

    let mut levels: Vec<u32> = (0..n_leaves)
        .map(|j| match cfg.query {
            Query::Root => cfg.depth as u32,
            Query::FirstLeaf => common_ancestor_level(j, cfg.degree),
        })
        .collect();
    if cfg.drop_self && cfg.query == Query::FirstLeaf {
        sims.remove(0);
        levels.remove(0);
    }
    Ok(LabeledSimilarities { sims, levels })
}

// Generations above leaf `j` of its last common ancestor with leaf 0.
fn common_ancestor_level(mut j: usize, degree: usize) -> u32 {
    if degree == 1 {
        return 0;
    }
    let mut level = 0;
    while j > 0 {
        j /= degree;
        level += 1;
    }
    level
}

struct Walker<'a> {
    cfg: &'a HierarchyConfig,
}

impl Walker<'_> {
    fn noise(&self, generation: usize, index: usize) -> impl Iterator<Item = f64> {
        let mut r = rng::stream(self.cfg.seed, generation as u64, index as u64);
        (0..self.cfg.dim).map(move |_| r.random_range(-1.0..1.0))
    }

    fn root(&self) -> Vec<f64> {
        self.noise(0, 0).collect()
    }

    fn child(&self, parent: &[f64], generation: usize, index: usize) -> Vec<f64> {
        let mut y = vec![0.0; parent.len()];
        self.child_into(parent, generation, index, &mut y);
        y
    }

    fn child_into(&self, parent: &[f64], generation: usize, index: usize, y: &mut [f64]) {
        let eta = self.cfg.ratio;
        for ((yi, p), u) in y.iter_mut().zip(parent).zip(self.noise(generation, index)) {
            *yi = eta * p + u;
        }
    }

    // Writes the similarities of every leaf below `node` (generation `g`,
    // index `index`) into `out`, in leaf order.
    fn leaves(&self, node: Vec<f64>, g: usize, index: usize, q: &Target, out: &mut [f64]) {
        let depth = self.cfg.depth;
        let k = self.cfg.degree;
        if g == depth {
            out[0] = q.cosine(&node);
            return;
        }
        // One buffer per generation below `g`; `path[d]` is the current node at
        // generation `g + d`.
        let mut path = vec![node];
        path.extend((g + 1..=depth).map(|_| vec![0.0; self.cfg.dim]));
        let mut digits = vec![0usize; depth - g + 1];
        let mut d = 1;
        let mut leaf = 0;
        loop {
            let parent_index = index * k.pow((d - 1) as u32) + node_offset(&digits[1..d], k);
            let (above, below) = path.split_at_mut(d);
            self.child_into(&above[d - 1], g + d, parent_index * k + digits[d], &mut below[0]);
            if g + d == depth {
                out[leaf] = q.cosine(&path[d]);
                leaf += 1;
                // Advance to the next sibling, climbing while a level is exhausted.
                loop {
                    digits[d] += 1;
                    if digits[d] < k {
                        break;
                    }
                    digits[d] = 0;
                    d -= 1;
                    if d == 0 {
                        return;
                    }
                }
            } else {
                d += 1;
            }
        }
    }
}

fn node_offset(digits: &[usize], k: usize) -> usize {
    digits.iter().fold(0, |acc, &dg| acc * k + dg)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// The query with its squared norm. Dividing by `sqrt(|x|² |q|²)` makes the
// query's similarity with itself exactly 1.
struct Target {
    v: Vec<f64>,
    norm2: f64,
}

impl Target {
    fn cosine(&self, x: &[f64]) -> f64 {
        (dot(x, &self.v) / (dot(x, x) * self.norm2).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Counts per (level, bin) over `[-1, 1]`; `counts[level][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelHistogram {
    pub n_bins: usize,
    pub counts: Vec<Vec<u64>>,
}

impl LevelHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        -1.0 + (bin as f64 + 0.5) * 2.0 / self.n_bins as f64
    }
}

pub fn level_histogram(ls: &LabeledSimilarities, n_bins: usize) -> Result<LevelHistogram> {
    if n_bins == 0 {
        return Err(Error::Input("n_bins must be at least 1".into()));
    }
    let top = ls.levels.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![vec![0u64; n_bins]; top + 1];
    for (&s, &level) in ls.sims.iter().zip(&ls.levels) {
        let bin = (((s + 1.0) * 0.5 * n_bins as f64) as usize).min(n_bins - 1);
        counts[level as usize][bin] += 1;
    }
    Ok(LevelHistogram { n_bins, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Materializes every generation, as a reference for the depth-first walk.
    fn brute_force(cfg: &HierarchyConfig) -> Vec<f64> {
        let w = Walker { cfg };
        let mut gen = vec![w.root()];
        for g in 1..=cfg.depth {
            let mut next = Vec::new();
            for (p, x) in gen.iter().enumerate() {
                for c in 0..cfg.degree {
                    next.push(w.child(x, g, p * cfg.degree + c));
                }
            }
            gen = next;
        }
        let unit = |x: &[f64]| x.iter().map(|v| v / dot(x, x).sqrt()).collect::<Vec<_>>();
        let q = match cfg.query {
            Query::Root => unit(&w.root()),
            Query::FirstLeaf => unit(&gen[0]),
        };
        gen.iter().map(|x| dot(&unit(x), &q)).collect()
    }

    #[test]
    fn single_leaf_is_self() {
        let ls = simulate(&HierarchyConfig::new(1, 0.7, 1)).unwrap();
        assert_eq!(ls.sims.len(), 1);
        assert_eq!(ls.sims[0], 1.0);
        assert_eq!(ls.levels, vec![0]);
    }

    #[test]
    fn matches_generation_by_generation_reference() {
        for (depth, degree) in [(3, 3), (7, 2), (2, 9)] {
            for query in [Query::Root, Query::FirstLeaf] {
                let mut cfg = HierarchyConfig::new(depth, 0.9, degree);
                cfg.dim = 16;
                cfg.query = query;
                let ls = simulate(&cfg).unwrap();
                let reference = brute_force(&cfg);
                assert_eq!(ls.sims.len(), reference.len());
                for (a, b) in ls.sims.iter().zip(&reference) {
                    assert!((a - b).abs() < 1e-12, "{a} {b}");
                }
            }
        }
    }

    #[test]
    fn deterministic_and_exactly_one_self_pair() {
        let cfg = HierarchyConfig::new(8, 0.95, 2);
        let a = simulate(&cfg).unwrap();
        assert_eq!(a, simulate(&cfg).unwrap());
        assert_eq!(a.len(), 256);
        assert!(a.sims.iter().all(|s| (-1.0..=1.0).contains(s)));
        assert_eq!(a.sims.iter().filter(|s| (**s - 1.0).abs() < 1e-12).count(), 1);
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(a.sims, simulate(&other).unwrap().sims);
    }

    #[test]
    fn binary_level_sizes() {
        let m = 10;
        let ls = simulate(&HierarchyConfig::new(m, 0.95, 2)).unwrap();
        for level in 1..=m as u32 {
            let count = ls.levels.iter().filter(|&&l| l == level).count();
            assert_eq!(count, 1 << (level - 1));
        }
        assert_eq!(ls.levels.iter().filter(|&&l| l == 0).count(), 1);
    }

    #[test]
    fn level_labels_by_construction() {
        assert_eq!(common_ancestor_level(0, 3), 0);
        assert_eq!(common_ancestor_level(2, 3), 1);
        assert_eq!(common_ancestor_level(3, 3), 2);
        assert_eq!(common_ancestor_level(8, 3), 2);
        assert_eq!(common_ancestor_level(9, 3), 3);
    }

    #[test]
    fn root_query_labels_every_leaf_with_depth() {
        let mut cfg = HierarchyConfig::new(4, 0.95, 3);
        cfg.query = Query::Root;
        let ls = simulate(&cfg).unwrap();
        assert!(ls.levels.iter().all(|&l| l == 4));
        assert!(ls.sims.iter().all(|&s| s < 1.0 - 1e-6));
    }

    #[test]
    fn drop_self_removes_the_query() {
        let mut cfg = HierarchyConfig::new(5, 0.9, 2);
        cfg.drop_self = true;
        let ls = simulate(&cfg).unwrap();
        assert_eq!(ls.len(), 31);
        assert!(ls.levels.iter().all(|&l| l > 0));
    }

    #[test]
    fn cap_is_enforced() {
        let mut cfg = HierarchyConfig::new(22, 0.95, 2);
        assert!(matches!(simulate(&cfg), Err(Error::Size(_))));
        cfg = HierarchyConfig::new(200, 0.95, 3);
        assert!(matches!(simulate(&cfg), Err(Error::Size(_))));
        cfg = HierarchyConfig::new(3, 0.95, 2);
        cfg.max_samples = 7;
        assert!(matches!(simulate(&cfg), Err(Error::Size(_))));
    }

    #[test]
    fn invalid_configs() {
        assert!(matches!(simulate(&HierarchyConfig::new(0, 0.9, 2)), Err(Error::Input(_))));
        let mut cfg = HierarchyConfig::new(2, 0.9, 2);
        cfg.dim = 1;
        assert!(matches!(simulate(&cfg), Err(Error::Input(_))));
    }

    #[test]
    fn mean_similarity_falls_with_level() {
        let ls = simulate(&HierarchyConfig::new(14, 0.95, 2)).unwrap();
        let stats: Vec<(f64, f64, usize)> = (1..=14u32)
            .map(|l| {
                let xs: Vec<f64> = ls.sims.iter().zip(&ls.levels).filter(|(_, &v)| v == l).map(|(s, _)| *s).collect();
                let m = crate::stats::mean(&xs);
                (m, crate::stats::variance(&xs), xs.len())
            })
            .collect();
        for w in stats.windows(2) {
            let (m0, v0, n0) = w[0];
            let (m1, v1, n1) = w[1];
            let sigma = (v0 / n0 as f64 + v1 / n1 as f64).sqrt();
            assert!(m0 >= m1 - 3.0 * sigma, "{m0} {m1} {sigma}");
        }
    }

    #[test]
    fn independent_vectors_have_zero_mean_similarity() {
        let mut cfg = HierarchyConfig::new(12, 0.0, 2);
        cfg.drop_self = true;
        let ls = simulate(&cfg).unwrap();
        let m = crate::stats::mean(&ls.sims);
        let sd = crate::stats::variance(&ls.sims).sqrt();
        assert!(m.abs() < 4.0 * sd / (ls.len() as f64).sqrt(), "{m}");
    }

    #[test]
    fn histogram_counts() {
        let ls = simulate(&HierarchyConfig::new(9, 0.95, 2)).unwrap();
        let h = level_histogram(&ls, 50).unwrap();
        assert_eq!(h.total(), 512);
        assert_eq!(h.counts.len(), 10);
        for (l, row) in h.counts.iter().enumerate().skip(1) {
            assert_eq!(row.iter().sum::<u64>(), 1 << (l - 1));
        }
        let same = LabeledSimilarities { sims: vec![-1.0, 0.0, 1.0], levels: vec![2, 2, 2] };
        let h = level_histogram(&same, 4).unwrap();
        assert!(h.counts[..2].iter().flatten().all(|&c| c == 0));
        assert_eq!(h.counts[2], vec![1, 0, 1, 1]);
        assert!(level_histogram(&same, 0).is_err());
    }
}
