//! Mixed-ERM oracles for the classes exercised by the experiments.
//!
//! Threshold, interval and finite oracles are exact. The Lipschitz oracle is
//! a first-order solver with a declared objective tolerance. The grid
//! reference oracle exists to cross-check the exact ones.

mod finite;
mod interval;
#[cfg(feature = "lipschitz")]
mod lipschitz;
mod reference;
mod threshold;

pub use finite::{finite_solve, FiniteClass};
pub use interval::{interval_solve, Interval, IntervalClass};
#[cfg(feature = "lipschitz")]
pub use lipschitz::{lipschitz_solve, LipschitzClass, LipschitzHypothesis};
pub use reference::{reference_solve, GridParameterized};
pub use threshold::{threshold_solve, Threshold, ThresholdClass};

use crate::domain::MixedErmQuery;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cost contributed by one scalar query point when a binary hypothesis
/// outputs 0 (`off`) or 1 (`on`) there.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointCost<S> {
    pub x: S,
    pub off: S,
    pub on: S,
}

/// Flattens a query over scalar features into per-point binary costs,
/// sorted by feature value with equal features merged.
pub(crate) fn binary_point_costs<S: Scalar>(query: &MixedErmQuery<S>) -> Result<Vec<PointCost<S>>> {
    let loss = query.loss();
    let c = query.coefficient();
    let mut pts = Vec::with_capacity(query.pairs().len() + query.signed().len());
    for p in query.pairs() {
        let x = scalar_of(p.x())?;
        pts.push(PointCost { x, off: p.weight() * loss.value(S::zero(), p.y()), on: p.weight() * loss.value(S::one(), p.y()) });
    }
    for s in query.signed() {
        let x = scalar_of(&s.x)?;
        pts.push(PointCost { x, off: S::zero(), on: c * s.sign.value::<S>() });
    }
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("features are finite"));
    let mut merged: Vec<PointCost<S>> = Vec::with_capacity(pts.len());
    for p in pts {
        match merged.last_mut() {
            Some(last) if last.x == p.x => {
                last.off = last.off + p.off;
                last.on = last.on + p.on;
            }
            _ => merged.push(p),
        }
    }
    Ok(merged)
}

fn scalar_of<S: Scalar>(x: &crate::domain::Feature<S>) -> Result<S> {
    x.as_scalar().ok_or_else(|| Error::Unsupported(format!("class needs scalar features, got dimension {}", x.dim())))
}

/// Slack used when comparing floating objective sums for tie-breaking.
pub(crate) fn tie_slack<S: Scalar>(query: &MixedErmQuery<S>) -> S {
    S::epsilon() * S::lit(64.0) * (S::one() + query.total_mass() * query.loss().lipschitz())
}
