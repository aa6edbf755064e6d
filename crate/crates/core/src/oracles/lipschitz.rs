use std::sync::Arc;

use crate::domain::{ErmResult, Feature, HypothesisClass, MixedErmQuery};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// All 1-Lipschitz maps `[0,1]^d → [0,1]` under the sup norm.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzClass {
    dim: usize,
}

/// Values fixed at a set of anchor points, extended by the upper McShane
/// extension `x ↦ min_i (v_i + ‖x − x_i‖_∞)` clamped to `[0,1]`.
#[derive(Debug, Clone)]
pub struct LipschitzHypothesis<S> {
    anchors: Arc<[(Feature<S>, S)]>,
}

impl<S: Scalar> LipschitzHypothesis<S> {
    pub fn anchors(&self) -> &[(Feature<S>, S)] {
        &self.anchors
    }

    pub fn value(&self, x: &Feature<S>) -> S {
        self.anchors.iter().map(|(a, v)| *v + a.sup_dist(x)).fold(S::one(), |m, v| m.min(v)).clamp_unit()
    }
}

impl LipschitzClass {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("Lipschitz class needs dimension ≥ 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl<S: Scalar> HypothesisClass<S> for LipschitzClass {
    type Hypothesis = LipschitzHypothesis<S>;

    fn name(&self) -> String {
        format!("lipschitz(d={})", self.dim)
    }

    fn evaluate(&self, h: &LipschitzHypothesis<S>, x: &Feature<S>) -> S {
        h.value(x)
    }

    fn solve(&self, query: &MixedErmQuery<S>) -> Result<ErmResult<LipschitzHypothesis<S>, S>> {
        lipschitz_solve(self, query)
    }

    fn tolerance(&self) -> S {
        S::lit(1e-3)
    }
}

/// Weighted labels attached to one distinct query point.
struct Anchor<S> {
    x: Feature<S>,
    labels: Vec<(S, S)>,
}

/// Removes violations left by rounding, so the constraints hold as
/// evaluated in floating point.
fn enforce<S: Scalar>(v: &mut [S], dist: &[Vec<S>]) {
    for _ in 0..100 {
        let mut clean = true;
        for i in 0..v.len() {
            v[i] = v[i].clamp_unit();
            for j in 0..v.len() {
                if (v[i] - v[j]).abs() > dist[i][j] {
                    clean = false;
                    let (hi, lo) = if v[i] > v[j] { (i, j) } else { (j, i) };
                    let target = v[lo] + dist[i][j];
                    v[hi] = if target < v[hi] { target } else { v[hi] - S::epsilon() };
                    if v[hi] - v[lo] > dist[i][j] {
                        v[hi] = v[hi] - S::epsilon();
                    }
                }
            }
        }
        if clean {
            return;
        }
    }
}

/// Mixed ERM over 1-Lipschitz functions, solved on the queried points.
///
/// Signed terms are folded into absolute-loss pairs; the values at the
/// distinct points then solve the linear program
/// `min Σ w·t` s.t. `t ≥ ±(v_i − y)`, `|v_i − v_j| ≤ ‖x_i − x_j‖_∞`,
/// `0 ≤ v ≤ 1`. In one dimension only neighbouring points need a
/// constraint.
pub fn lipschitz_solve<S: Scalar>(
    class: &LipschitzClass,
    query: &MixedErmQuery<S>,
) -> Result<ErmResult<LipschitzHypothesis<S>, S>> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};

    let (pairs, _) = query.fold_signed_absolute()?;
    let mut anchors: Vec<Anchor<S>> = Vec::new();
    for p in &pairs {
        if p.x().dim() != class.dim {
            return Err(Error::Unsupported(format!(
                "Lipschitz class of dimension {} got a feature of dimension {}",
                class.dim,
                p.x().dim()
            )));
        }
        let label = (p.y(), p.weight());
        match anchors.iter_mut().find(|a| &a.x == p.x()) {
            Some(a) => match a.labels.iter_mut().find(|l| l.0 == label.0) {
                Some(l) => l.1 = l.1 + label.1,
                None => a.labels.push(label),
            },
            None => anchors.push(Anchor { x: p.x().clone(), labels: vec![label] }),
        }
    }
    if class.dim == 1 {
        anchors.sort_by(|a, b| a.x.coords()[0].partial_cmp(&b.x.coords()[0]).expect("features are finite"));
    }
    let m = anchors.len();
    let dist: Vec<Vec<S>> = anchors.iter().map(|a| anchors.iter().map(|b| a.x.sup_dist(&b.x)).collect()).collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..m).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    for (a, &v) in anchors.iter().zip(&vars) {
        for &(y, w) in &a.labels {
            if w <= S::zero() {
                continue;
            }
            let t = lp.add_var(w.as_f64(), (0.0, f64::INFINITY));
            lp.add_constraint([(t, 1.0), (v, -1.0)], ComparisonOp::Ge, -y.as_f64());
            lp.add_constraint([(t, 1.0), (v, 1.0)], ComparisonOp::Ge, y.as_f64());
        }
    }
    for i in 0..m {
        let partners = if class.dim == 1 { i + 1..(i + 2).min(m) } else { i + 1..m };
        for j in partners {
            let d = dist[i][j].as_f64();
            if d < 1.0 {
                lp.add_constraint([(vars[i], 1.0), (vars[j], -1.0)], ComparisonOp::Le, d);
                lp.add_constraint([(vars[j], 1.0), (vars[i], -1.0)], ComparisonOp::Le, d);
            }
        }
    }
    let solution = lp.solve().map_err(|e| Error::Invariant(format!("Lipschitz program failed: {e}")))?;
    let mut values: Vec<S> = vars.iter().map(|&v| S::lit(*solution.var_value(v))).collect();
    enforce(&mut values, &dist);

    let anchors: Arc<[(Feature<S>, S)]> = anchors.into_iter().zip(values).map(|(a, v)| (a.x, v)).collect();
    let hypothesis = LipschitzHypothesis { anchors };
    let objective = query.objective_with(|x| hypothesis.value(x));
    Ok(ErmResult { hypothesis, objective })
}
