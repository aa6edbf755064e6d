use std::fmt;
use std::sync::Arc;

use crate::domain::{ErmResult, Feature, HypothesisClass, MixedErmQuery};
use crate::error::{Error, Result};
use crate::oracles::{tie_slack, GridParameterized};
use crate::scalar::Scalar;

type HypFn<S> = Arc<dyn Fn(&Feature<S>) -> S + Send + Sync>;

/// An explicit finite class; hypotheses are addressed by index.
#[derive(Clone)]
pub struct FiniteClass<S> {
    hyps: Vec<HypFn<S>>,
    binary: bool,
}

impl<S: Scalar> FiniteClass<S> {
    /// Constant hypotheses `h ≡ c`.
    pub fn constants(values: &[S]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("finite class"));
        }
        if let Some(v) = values.iter().find(|v| !v.in_unit()) {
            return Err(Error::InputDomain(format!("constant hypothesis {v} outside [0,1]")));
        }
        let binary = values.iter().all(|&v| v == S::zero() || v == S::one());
        let hyps = values.iter().map(|&v| Arc::new(move |_: &Feature<S>| v) as HypFn<S>).collect();
        Ok(Self { hyps, binary })
    }

    /// Hypotheses given as value tables over a finite support. Points off the
    /// support evaluate to 0.
    pub fn from_table(support: Vec<Feature<S>>, table: Vec<Vec<S>>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptyInput("finite class"));
        }
        for row in &table {
            if row.len() != support.len() {
                return Err(Error::Config(format!(
                    "hypothesis table row has {} values for a support of {}",
                    row.len(),
                    support.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.in_unit()) {
                return Err(Error::InputDomain(format!("hypothesis value {v} outside [0,1]")));
            }
        }
        let binary = table.iter().flatten().all(|&v| v == S::zero() || v == S::one());
        let support = Arc::new(support);
        let hyps = table
            .into_iter()
            .map(|row| {
                let support = Arc::clone(&support);
                Arc::new(move |x: &Feature<S>| support.iter().position(|s| s == x).map_or(S::zero(), |i| row[i])) as HypFn<S>
            })
            .collect();
        Ok(Self { hyps, binary })
    }

    /// Hypotheses given as closures. The caller vouches for outputs in `[0,1]`
    /// and for the `binary` flag.
    pub fn from_fns(fns: Vec<HypFn<S>>, binary: bool) -> Result<Self> {
        if fns.is_empty() {
            return Err(Error::EmptyInput("finite class"));
        }
        Ok(Self { hyps: fns, binary })
    }

    pub fn len(&self) -> usize {
        self.hyps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyps.is_empty()
    }

    pub fn value(&self, index: usize, x: &Feature<S>) -> S {
        (self.hyps[index])(x)
    }
}

impl<S: Scalar> fmt::Debug for FiniteClass<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteClass").field("len", &self.hyps.len()).field("binary", &self.binary).finish()
    }
}

impl<S: Scalar> HypothesisClass<S> for FiniteClass<S> {
    type Hypothesis = usize;

    fn name(&self) -> String {
        format!("finite({})", self.hyps.len())
    }

    fn evaluate(&self, h: &usize, x: &Feature<S>) -> S {
        self.value(*h, x)
    }

    fn solve(&self, query: &MixedErmQuery<S>) -> Result<ErmResult<usize, S>> {
        finite_solve(self, query)
    }

    fn is_binary(&self) -> bool {
        self.binary
    }
}

/// Exhaustive enumeration; the lowest index wins ties.
pub fn finite_solve<S: Scalar>(class: &FiniteClass<S>, query: &MixedErmQuery<S>) -> Result<ErmResult<usize, S>> {
    let slack = tie_slack(query);
    let mut best = (0usize, query.objective_with(|x| class.value(0, x)));
    for i in 1..class.len() {
        let obj = query.objective_with(|x| class.value(i, x));
        if obj < best.1 - slack {
            best = (i, obj);
        }
    }
    Ok(ErmResult { hypothesis: best.0, objective: best.1 })
}

impl<S: Scalar> GridParameterized<S> for FiniteClass<S> {
    fn parameter_grid(&self, _step: S) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{LabeledPair, Sign, SignedTerm};
    use crate::loss::Loss;

    fn x() -> Feature<f64> {
        Feature::scalar(0.3).unwrap()
    }

    #[test]
    fn picks_matching_constant() {
        let c = FiniteClass::constants(&[0.0, 1.0]).unwrap();
        let q = MixedErmQuery::erm(vec![LabeledPair::new(x(), 1.0).unwrap()], Loss::absolute());
        let r = c.solve(&q).unwrap();
        assert_eq!((r.hypothesis, r.objective), (1, 0.0));
    }

    #[test]
    fn positive_signed_term_prefers_zero() {
        let c = FiniteClass::constants(&[0.0, 1.0]).unwrap();
        let q = MixedErmQuery::new(vec![], vec![SignedTerm::new(Sign::Plus, x())], 3.0, Loss::absolute()).unwrap();
        let r = c.solve(&q).unwrap();
        assert_eq!((r.hypothesis, r.objective), (0, 0.0));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let c = FiniteClass::constants(&[0.0, 1.0]).unwrap();
        let q = MixedErmQuery::erm(vec![LabeledPair::new(x(), 0.5).unwrap()], Loss::absolute());
        let r = c.solve(&q).unwrap();
        assert_eq!((r.hypothesis, r.objective), (0, 0.5));
    }

    #[test]
    fn table_class_validation() {
        let s = vec![Feature::scalar(0.1).unwrap(), Feature::scalar(0.2).unwrap()];
        assert!(FiniteClass::from_table(s.clone(), vec![vec![0.0]]).is_err());
        assert!(FiniteClass::from_table(s.clone(), vec![vec![0.0, 1.5]]).is_err());
        let c = FiniteClass::from_table(s.clone(), vec![vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(c.is_binary());
        assert_eq!(c.value(0, &s[1]), 1.0);
        assert_eq!(c.value(0, &Feature::scalar(0.9).unwrap()), 0.0);
        assert!(FiniteClass::<f64>::constants(&[]).is_err());
        assert!(!FiniteClass::constants(&[0.5]).unwrap().is_binary());
    }
}
