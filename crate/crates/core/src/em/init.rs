use super::ScoreSample;
use crate::dist::{GammaMixture, ShiftedGamma};
use crate::error::{Error, Result};
use crate::stats;

const SHIFT_GAP: f64 = 0.05;

fn degenerate(block: &[f64]) -> bool {
    let m = stats::mean(block);
    stats::variance(block).sqrt() <= 1e-12 * (1.0 + m.abs())
}

/// Method-of-moments starting point.
///
/// The sorted sample is cut into `n_states` contiguous blocks by one-dimensional
/// k-means started from equal quantile blocks. A block
/// with positive skewness gets the shift a gamma with that skewness would have,
/// kept at least `SHIFT_GAP` standard deviations below the block minimum; other
/// blocks use `min - std`. Shifts are floored at `global_min - span/2`, and shape
/// and rate then match the block's mean and variance above the shift.
/// Weights start uniform. Blocks with zero variance are merged into a
/// neighbor; when that leaves fewer blocks than states, states share a block.
pub fn init_mixture(data: &ScoreSample, n_states: usize) -> Result<GammaMixture> {
    if n_states == 0 {
        return Err(Error::Input("n_states must be at least 1".into()));
    }
    let xs = data.values();
    let n = xs.len();
    if n < 2 * n_states {
        return Err(Error::TooFewSamples { needed: 2 * n_states, got: n });
    }
    let mut blocks = lloyd_blocks(xs, n_states);
    while let Some(k) = blocks.iter().position(|&(lo, hi)| degenerate(&xs[lo..hi])) {
        if blocks.len() == 1 {
            return Err(Error::Fit("cannot initialize from zero-variance data".into()));
        }
        let (a, b) = if k + 1 < blocks.len() { (k, k + 1) } else { (k - 1, k) };
        let merged = (blocks[a].0, blocks[b].1);
        blocks.splice(a..=b, [merged]);
    }

    let global_min = data.min();
    let span = data.max() - global_min;
    let floor = global_min - 0.5 * span;
    let mut components = Vec::with_capacity(n_states);
    for i in 0..n_states {
        let (lo, hi) = blocks[i * blocks.len() / n_states];
        let block = &xs[lo..hi];
        let sd = stats::variance(block).sqrt();
        let mean = stats::mean(block);
        let below_min = block[0] - SHIFT_GAP * sd;
        let c = match stats::skewness(block) {
            // A gamma with skewness g has shape 4/g² and sits sd·2/g above its shift.
            Ok(g) if g > 0.0 => (mean - 2.0 * sd / g).min(below_min),
            _ => block[0] - sd,
        }
        .max(floor);
        let excess = mean - c;
        let alpha = excess * excess / (sd * sd);
        components.push(ShiftedGamma::new(alpha, c, alpha / excess)?);
    }
    Ok(GammaMixture::from_parts_normalized(components, vec![1.0; n_states]))
}

// One-dimensional k-means on sorted data, started from equal quantile blocks.
// Clusters of sorted values are contiguous, so each is an index range.
fn lloyd_blocks(xs: &[f64], k: usize) -> Vec<(usize, usize)> {
    let n = xs.len();
    let mut cuts: Vec<usize> = (0..=k).map(|i| i * n / k).collect();
    for _ in 0..100 {
        let centers: Vec<f64> = cuts.windows(2).map(|w| stats::mean(&xs[w[0]..w[1].max(w[0] + 1).min(n)])).collect();
        let mut next = cuts.clone();
        for i in 1..k {
            let mid = 0.5 * (centers[i - 1] + centers[i]);
            next[i] = xs.partition_point(|&x| x < mid).clamp(next[i - 1] + 1, n - (k - i));
        }
        if next == cuts {
            break;
        }
        cuts = next;
    }
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}
