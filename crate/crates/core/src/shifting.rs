//! Fixed-block restarts for feature processes with at most `K` changes.

use crate::domain::HypothesisClass;
use crate::environment::{Adversary, FeatureProcess};
use crate::epochs::{run_blocks, GameSettings};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trace::RegretTrace;

/// `round(T^{4/5} K^{−4/5})`, clamped to `[1, T]`.
pub fn block_length(t: usize, k: usize) -> usize {
    assert!(t >= 1 && k >= 1, "block_length needs T ≥ 1 and K ≥ 1");
    let b = (t as f64).powf(0.8) * (k as f64).powf(-0.8);
    ((b + 0.5).floor() as usize).clamp(1, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    pub block_len: usize,
    pub blocks: usize,
}

impl BlockPlan {
    pub fn new(t: usize, k: usize) -> Self {
        let block_len = block_length(t, k);
        Self { block_len, blocks: t.div_ceil(block_len) }
    }

    /// First round of block `b` (0-based).
    pub fn block_start(&self, b: usize) -> usize {
        b * self.block_len + 1
    }
}

/// Number of blocks inside which the distribution changes. A change at a
/// block's first round does not count.
pub fn blocks_straddling(change_points: &[usize], block_len: usize, t: usize) -> usize {
    let mut blocks: Vec<usize> =
        change_points.iter().filter(|&&c| c >= 2 && c <= t && (c - 1) % block_len != 0).map(|&c| (c - 1) / block_len).collect();
    blocks.dedup();
    blocks.len()
}

/// Runs the epoch predictor independently on blocks of `block_length(T, K)`
/// rounds; regret is measured against one comparator over all `T` rounds.
pub fn run_shifting<S, C, A>(
    class: &C,
    process: &FeatureProcess<S>,
    adversary: &A,
    settings: &GameSettings<S>,
    k: usize,
) -> Result<RegretTrace<S>>
where
    S: Scalar,
    C: HypothesisClass<S>,
    A: Adversary<S> + ?Sized,
{
    if k == 0 {
        return Err(Error::Config("shifting runs need K ≥ 1".into()));
    }
    let declared = process.change_points().len();
    if declared > k {
        return Err(Error::Config(format!("process has {declared} changes, more than K = {k}")));
    }
    run_blocks(class, process, adversary, settings, block_length(settings.horizon, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_length_examples() {
        assert_eq!(block_length(100_000, 10), 1585);
        assert_eq!(block_length(32, 1), 16);
        assert_eq!(block_length(5, 9), 1);
    }

    #[test]
    fn straddle_counting() {
        assert_eq!(blocks_straddling(&[2049], 2048, 4096), 0);
        assert_eq!(blocks_straddling(&[2050], 2048, 4096), 1);
        assert_eq!(blocks_straddling(&[10, 12], 8, 32), 1);
        let plan = BlockPlan::new(32, 1);
        assert_eq!((plan.block_len, plan.blocks, plan.block_start(1)), (16, 2, 17));
    }
}
