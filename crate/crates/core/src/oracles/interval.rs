use crate::domain::{ErmResult, Feature, HypothesisClass, MixedErmQuery};
use crate::error::{Error, Result};
use crate::oracles::{binary_point_costs, tie_slack, GridParameterized};
use crate::scalar::Scalar;

/// Interval indicators `1{x ∈ [a,b]}` with `[a,b] ⊆ [0,1]` and `b − a ≥ min_len`.
#[derive(Debug, Clone, Copy)]
pub struct IntervalClass<S> {
    min_len: S,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<S> {
    pub a: S,
    pub b: S,
}

impl<S: Scalar> IntervalClass<S> {
    pub fn new(min_len: S) -> Result<Self> {
        if !(min_len > S::zero() && min_len <= S::one()) {
            return Err(Error::Config(format!("interval minimum length {min_len} outside (0,1]")));
        }
        Ok(Self { min_len })
    }

    pub fn min_len(&self) -> S {
        self.min_len
    }

    /// Membership test, tolerant to rounding in the representative endpoints.
    pub fn is_member(&self, h: &Interval<S>) -> bool {
        let tol = S::epsilon() * S::lit(8.0);
        h.a >= S::zero() && h.b <= S::one() && h.b - h.a >= self.min_len - tol
    }
}

impl<S: Scalar> HypothesisClass<S> for IntervalClass<S> {
    type Hypothesis = Interval<S>;

    fn name(&self) -> String {
        format!("interval(min_len={})", self.min_len)
    }

    fn evaluate(&self, h: &Interval<S>, x: &Feature<S>) -> S {
        let v = x.coords()[0];
        if v >= h.a && v <= h.b {
            S::one()
        } else {
            S::zero()
        }
    }

    fn solve(&self, query: &MixedErmQuery<S>) -> Result<ErmResult<Interval<S>, S>> {
        interval_solve(self, query)
    }

    fn is_binary(&self) -> bool {
        true
    }
}

/// One side of the free space around a run of covered points.
#[derive(Clone, Copy)]
struct Bound<S> {
    at: S,
    closed: bool,
}

/// Picks `[a,b]` with `lo ≤ a ≤ first`, `last ≤ b ≤ hi` (strict at open
/// bounds) and `b − a ≥ len`, or `None` when no such interval exists.
fn place<S: Scalar>(lo: Bound<S>, hi: Bound<S>, inner: Option<(S, S)>, len: S) -> Option<Interval<S>> {
    let room = hi.at - lo.at;
    let tol = S::epsilon() * S::lit(8.0);
    let fits = if lo.closed && hi.closed { room >= len - tol } else { room > len + tol };
    if !fits {
        return None;
    }
    let margin = (room - len) * S::half();
    let da = if lo.closed { S::zero() } else { margin };
    let db = if hi.closed { S::zero() } else { margin };
    let mut h = Interval { a: lo.at + da, b: hi.at - db };
    if let Some((first, last)) = inner {
        h.a = h.a.min(first);
        h.b = h.b.max(last);
    }
    let open_hit = (!lo.closed && h.a <= lo.at) || (!hi.closed && h.b >= hi.at);
    if open_hit || h.b - h.a < len - tol {
        return None;
    }
    Some(h)
}

/// Exact interval ERM.
///
/// A hypothesis only matters through the set of query points it covers,
/// which is a contiguous run of the sorted distinct features or empty. Every
/// run is checked for feasibility under the length floor and scored with a
/// prefix sum, O(m²) overall. The empty labelling is tried first, then runs
/// in `(first, last)` order; strict improvement keeps the earliest.
pub fn interval_solve<S: Scalar>(class: &IntervalClass<S>, query: &MixedErmQuery<S>) -> Result<ErmResult<Interval<S>, S>> {
    let pts = binary_point_costs(query)?;
    let len = class.min_len;
    let slack = tie_slack(query);
    let k = pts.len();
    let base: S = pts.iter().map(|p| p.off).sum();

    let mut best: Option<(S, Interval<S>)> = None;
    let consider = |obj: S, h: Interval<S>, best: &mut Option<(S, Interval<S>)>| match best {
        Some((b, _)) if !(obj < *b - slack) => {}
        _ => *best = Some((obj, h)),
    };

    // Empty labelling: some gap must hold an interval of the required length.
    for g in 0..=k {
        let lo = if g == 0 { Bound { at: S::zero(), closed: true } } else { Bound { at: pts[g - 1].x, closed: false } };
        let hi = if g == k { Bound { at: S::one(), closed: true } } else { Bound { at: pts[g].x, closed: false } };
        if let Some(h) = place(lo, hi, None, len) {
            consider(base, h, &mut best);
            break;
        }
    }

    for l in 0..k {
        let lo = if l == 0 { Bound { at: S::zero(), closed: true } } else { Bound { at: pts[l - 1].x, closed: false } };
        let mut run = base;
        for r in l..k {
            run = run + pts[r].on - pts[r].off;
            let hi = if r + 1 == k { Bound { at: S::one(), closed: true } } else { Bound { at: pts[r + 1].x, closed: false } };
            if let Some(h) = place(lo, hi, Some((pts[l].x, pts[r].x)), len) {
                consider(run, h, &mut best);
            }
        }
    }

    let (_, h) = best.ok_or_else(|| Error::Invariant("interval class admits no hypothesis".into()))?;
    let objective = query.objective_with(|x| class.evaluate(&h, x));
    Ok(ErmResult { hypothesis: h, objective })
}

impl<S: Scalar> GridParameterized<S> for IntervalClass<S> {
    fn parameter_grid(&self, step: S) -> Vec<Interval<S>> {
        let grid = crate::loss::unit_grid(step);
        let mut out = Vec::new();
        for (i, &a) in grid.iter().enumerate() {
            for &b in &grid[i..] {
                let h = Interval { a, b };
                if self.is_member(&h) {
                    out.push(h);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{LabeledPair, Sign, SignedTerm};
    use crate::loss::Loss;
    use crate::oracles::reference_solve;

    fn pair(x: f64, y: f64) -> LabeledPair<f64> {
        LabeledPair::new(Feature::scalar(x).unwrap(), y).unwrap()
    }

    #[test]
    fn placement_lands_on_the_run_endpoints() {
        let lo = Bound { at: 0.08, closed: false };
        let hi = Bound { at: 1.0, closed: true };
        let h = place(lo, hi, Some((0.21, 0.89)), 0.05).unwrap();
        assert_eq!(h.a, 0.21);
        assert!(h.b >= 0.89);
        // (0.03, 0.33) has length 0.3 only up to rounding.
        let open = |at| Bound { at, closed: false };
        assert!(place(open(0.03), open(0.33), None, 0.3).is_none());
    }

    #[test]
    fn config_validation() {
        assert!(IntervalClass::new(0.0f64).is_err());
        assert!(IntervalClass::new(1.1f64).is_err());
        assert!(IntervalClass::new(1.0f64).is_ok());
    }

    #[test]
    fn covers_single_positive() {
        let c = IntervalClass::new(0.1).unwrap();
        let q = MixedErmQuery::erm(vec![pair(0.5, 1.0)], Loss::absolute());
        let r = c.solve(&q).unwrap();
        assert_eq!(r.objective, 0.0);
        assert!(c.is_member(&r.hypothesis));
        assert!(r.hypothesis.a <= 0.5 && r.hypothesis.b >= 0.5);
    }

    #[test]
    fn long_floor_example_matches_grid_sweep() {
        let c = IntervalClass::new(0.9).unwrap();
        let q = MixedErmQuery::erm(vec![pair(0.05, 0.0), pair(0.5, 1.0)], Loss::absolute());
        let r = c.solve(&q).unwrap();
        assert_eq!(r.objective, 0.0);
        assert!(c.is_member(&r.hypothesis));
        assert!(r.hypothesis.a > 0.05);
        assert_eq!(reference_solve(&c, &q, 0.001).unwrap().objective, 0.0);
    }

    #[test]
    fn unit_floor_is_a_singleton_class() {
        let c = IntervalClass::new(1.0).unwrap();
        let q = MixedErmQuery::new(
            vec![pair(0.2, 0.3), pair(0.9, 1.0)],
            vec![
                SignedTerm::new(Sign::Minus, Feature::scalar(0.4).unwrap()),
                SignedTerm::new(Sign::Plus, Feature::scalar(0.6).unwrap()),
            ],
            1.5,
            Loss::absolute(),
        )
        .unwrap();
        let r = c.solve(&q).unwrap();
        assert_eq!(r.hypothesis, Interval { a: 0.0, b: 1.0 });
        // Σ|1 − y| + C Σ ε = 0.7 + 0 + 1.5·(−1 + 1).
        assert!((r.objective - 0.7).abs() < 1e-12);
    }

    #[test]
    fn empty_labelling_needs_a_wide_gap() {
        let c = IntervalClass::new(0.5).unwrap();
        // Negatives at 0.3 and 0.7 leave no gap longer than 0.5; something is covered.
        let q = MixedErmQuery::erm(vec![pair(0.3, 0.0), pair(0.7, 0.0)], Loss::absolute());
        assert_eq!(c.solve(&q).unwrap().objective, 1.0);
        let c2 = IntervalClass::new(0.25).unwrap();
        assert_eq!(c2.solve(&q).unwrap().objective, 0.0);
    }
}
