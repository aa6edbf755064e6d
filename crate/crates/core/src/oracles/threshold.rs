use crate::domain::{ErmResult, Feature, HypothesisClass, MixedErmQuery};
use crate::error::Result;
use crate::oracles::{binary_point_costs, tie_slack, GridParameterized};
use crate::scalar::Scalar;

/// Thresholds `x ↦ 1{x ≥ a}` with `a ∈ [0,1]` over scalar features.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThresholdClass;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold<S> {
    pub a: S,
}

impl<S: Scalar> HypothesisClass<S> for ThresholdClass {
    type Hypothesis = Threshold<S>;

    fn name(&self) -> String {
        "threshold".into()
    }

    /// Vector features are compared through their first coordinate.
    fn evaluate(&self, h: &Threshold<S>, x: &Feature<S>) -> S {
        if x.coords()[0] >= h.a {
            S::one()
        } else {
            S::zero()
        }
    }

    fn solve(&self, query: &MixedErmQuery<S>) -> Result<ErmResult<Threshold<S>, S>> {
        threshold_solve(query)
    }

    fn is_binary(&self) -> bool {
        true
    }
}

/// Exact threshold ERM.
///
/// The objective is constant on the cells `[0, p₁], (p₁, p₂], …, (p_k, 1]`
/// cut by the sorted distinct query features, so one sweep over the cells is
/// exact. The leftmost minimizing cell wins; its representative is `0` for
/// the first cell and the cell midpoint otherwise.
pub fn threshold_solve<S: Scalar>(query: &MixedErmQuery<S>) -> Result<ErmResult<Threshold<S>, S>> {
    let pts = binary_point_costs(query)?;
    let slack = tie_slack(query);

    // a = 0: every point fires.
    let mut running: S = pts.iter().map(|p| p.on).sum();
    let mut best = running;
    let mut best_a = S::zero();
    for (g, p) in pts.iter().enumerate() {
        running = running + p.off - p.on;
        if p.x >= S::one() {
            break;
        }
        if running < best - slack {
            best = running;
            let right = pts.get(g + 1).map_or(S::one(), |n| n.x);
            best_a = (p.x + right) * S::half();
        }
    }
    let h = Threshold { a: best_a };
    let objective = query.objective_with(|x| HypothesisClass::<S>::evaluate(&ThresholdClass, &h, x));
    Ok(ErmResult { hypothesis: h, objective })
}

impl<S: Scalar> GridParameterized<S> for ThresholdClass {
    fn parameter_grid(&self, step: S) -> Vec<Threshold<S>> {
        crate::loss::unit_grid(step).into_iter().map(|a| Threshold { a }).collect()
    }
}
