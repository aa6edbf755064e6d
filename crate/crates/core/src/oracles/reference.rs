use crate::domain::{ErmResult, HypothesisClass, MixedErmQuery};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Classes with a bounded parameterization that can be swept on a grid.
pub trait GridParameterized<S: Scalar>: HypothesisClass<S> {
    fn parameter_grid(&self, step: S) -> Vec<Self::Hypothesis>;
}

/// Brute-force oracle over the class's parameter grid. Test use only.
pub fn reference_solve<S: Scalar, C: GridParameterized<S>>(
    class: &C,
    query: &MixedErmQuery<S>,
    grid_step: S,
) -> Result<ErmResult<C::Hypothesis, S>> {
    if !(grid_step > S::zero()) {
        return Err(Error::Config(format!("grid step {grid_step} must be positive")));
    }
    let mut best: Option<ErmResult<C::Hypothesis, S>> = None;
    for h in class.parameter_grid(grid_step) {
        let obj = query.objective_with(|x| class.evaluate(&h, x));
        if best.as_ref().is_none_or(|b| obj < b.objective) {
            best = Some(ErmResult { hypothesis: h, objective: obj });
        }
    }
    best.ok_or(Error::EmptyInput("parameter grid"))
}
