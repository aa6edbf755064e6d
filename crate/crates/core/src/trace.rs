//! Per-round records of a played game.

use serde::Serialize;

use crate::domain::Feature;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<S> {
    pub t: usize,
    pub epoch: usize,
    pub j: usize,
    pub block: usize,
    pub x: Feature<S>,
    pub y: S,
    pub yhat: S,
    pub loss: S,
    pub cum_loss: S,
    /// Loss of the final comparator on this round.
    pub comparator_loss: S,
    pub cum_regret: S,
    pub erm_calls: u64,
}

/// Regret of one epoch against its own best hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentRegret {
    pub block: usize,
    pub epoch: usize,
    pub start: usize,
    pub len: usize,
    pub learner_loss: f64,
    pub comparator_loss: f64,
}

impl SegmentRegret {
    pub fn regret(&self) -> f64 {
        self.learner_loss - self.comparator_loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub horizon: usize,
    pub class: String,
    pub adversary: String,
    pub schedule: String,
    pub rounding: String,
    pub block_len: usize,
    pub comparator_loss: f64,
    pub regret: f64,
    pub erm_calls_total: u64,
    /// Rounds whose hallucination count was cut to the pool size.
    pub clamped_rounds: usize,
    /// `(n, S(n) − S_real(n))` for every epoch started.
    pub drift: Vec<(usize, f64)>,
    pub segments: Vec<SegmentRegret>,
    pub change_points: Vec<usize>,
    /// Set when the run goes beyond what the theory covers.
    pub extrapolation: bool,
}

#[derive(Debug, Clone)]
pub struct RegretTrace<S> {
    pub rows: Vec<TraceRow<S>>,
    pub meta: TraceMeta,
}

impl<S: Scalar> RegretTrace<S> {
    pub fn regret(&self) -> f64 {
        self.meta.regret
    }

    pub fn erm_calls(&self) -> u64 {
        self.rows.iter().map(|r| r.erm_calls).sum()
    }

    /// Checks the cumulative columns against recomputed prefix sums.
    pub fn prefix_sums_consistent(&self, tol: f64) -> bool {
        let (mut cl, mut cr) = (0.0, 0.0);
        self.rows.iter().all(|r| {
            cl += r.loss.as_f64();
            cr += r.loss.as_f64() - r.comparator_loss.as_f64();
            (r.cum_loss.as_f64() - cl).abs() <= tol && (r.cum_regret.as_f64() - cr).abs() <= tol
        })
    }

    /// Sum over epochs of the regret against each epoch's own comparator.
    pub fn segment_regret_sum(&self) -> f64 {
        self.meta.segments.iter().map(SegmentRegret::regret).sum()
    }
}
