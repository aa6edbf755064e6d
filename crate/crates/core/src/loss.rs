//! Losses `ℓ(prediction, label)` on `[0,1] × [0,1]`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Absolute,
    Custom,
}

type LossEval<S> = Arc<dyn Fn(S, S) -> S + Send + Sync>;

/// A convex, `L`-Lipschitz loss.
///
/// Custom losses carry their Lipschitz constant explicitly; construction
/// spot-checks both Lipschitz inequalities and convexity in the first
/// argument on a 0.05 grid but never tries to infer the constant.
#[derive(Clone)]
pub struct Loss<S> {
    kind: LossKind,
    name: Arc<str>,
    lipschitz: S,
    eval: Option<LossEval<S>>,
}

impl<S: Scalar> Loss<S> {
    pub fn absolute() -> Self {
        Self { kind: LossKind::Absolute, name: Arc::from("absolute"), lipschitz: S::one(), eval: None }
    }

    pub fn custom<F>(name: &str, lipschitz: S, f: F) -> Result<Self>
    where
        F: Fn(S, S) -> S + Send + Sync + 'static,
    {
        if !(lipschitz > S::zero()) || !lipschitz.is_finite() {
            return Err(Error::Config(format!("loss `{name}` needs a positive finite Lipschitz constant, got {lipschitz}")));
        }
        let loss = Self { kind: LossKind::Custom, name: Arc::from(name), lipschitz, eval: Some(Arc::new(f)) };
        loss.spot_check(S::lit(0.05))?;
        Ok(loss)
    }

    /// Squared loss `(p − y)²`, 2-Lipschitz on the unit square.
    pub fn squared() -> Self {
        Self::custom("squared", S::two(), |p, y| (p - y) * (p - y)).expect("squared loss is valid")
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn is_absolute(&self) -> bool {
        self.kind == LossKind::Absolute
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> S {
        self.lipschitz
    }

    /// Evaluates without domain checks. Hot loops validate their inputs once.
    #[inline]
    pub fn value(&self, prediction: S, label: S) -> S {
        match &self.eval {
            None => (prediction - label).abs(),
            Some(f) => f(prediction, label),
        }
    }

    /// Checked evaluation; both arguments must lie in `[0,1]`.
    pub fn eval(&self, prediction: S, label: S) -> Result<S> {
        if !prediction.in_unit() || !label.in_unit() {
            return Err(Error::InputDomain(format!("loss `{}` evaluated at ({prediction}, {label})", self.name)));
        }
        let v = self.value(prediction, label);
        if v < S::zero() || !v.is_finite() {
            return Err(Error::InputDomain(format!("loss `{}` returned {v} at ({prediction}, {label})", self.name)));
        }
        Ok(v)
    }

    /// Checks both Lipschitz inequalities and midpoint convexity on a grid.
    pub fn spot_check(&self, step: S) -> Result<()> {
        let grid = unit_grid(step);
        let slack = S::lit(1e-9);
        for &a in &grid {
            for &y in &grid {
                let la = self.value(a, y);
                if la < -slack {
                    return Err(Error::Config(format!("loss `{}` is negative at ({a}, {y})", self.name)));
                }
                for &b in &grid {
                    let lb = self.value(b, y);
                    if (la - lb).abs() > self.lipschitz * (a - b).abs() + slack {
                        return Err(Error::Config(format!(
                            "loss `{}` violates L={} in its first argument at ({a}, {b}; {y})",
                            self.name, self.lipschitz
                        )));
                    }
                    let mid = self.value((a + b) * S::half(), y);
                    if mid > (la + lb) * S::half() + slack {
                        return Err(Error::Config(format!(
                            "loss `{}` is not convex in its first argument near ({a}, {b}; {y})",
                            self.name
                        )));
                    }
                    let ly = self.value(a, b);
                    if (la - ly).abs() > self.lipschitz * (y - b).abs() + slack {
                        return Err(Error::Config(format!(
                            "loss `{}` violates L={} in its label at ({a}; {y}, {b})",
                            self.name, self.lipschitz
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl<S: fmt::Debug> fmt::Debug for Loss<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Loss").field("kind", &self.kind).field("name", &self.name).field("lipschitz", &self.lipschitz).finish()
    }
}

/// Evaluates `loss` at `(prediction, label)` with domain checks.
pub fn loss_eval<S: Scalar>(loss: &Loss<S>, prediction: S, label: S) -> Result<S> {
    loss.eval(prediction, label)
}

/// Points `0, step, 2·step, …` up to and always including 1.
///
/// When `1/step` is an integer `n` the points are computed as `i/n`, so
/// they coincide with decimal literals such as `0.7`.
pub fn unit_grid<S: Scalar>(step: S) -> Vec<S> {
    assert!(step > S::zero(), "grid step must be positive");
    let inv = S::one() / step;
    let whole = inv.round();
    let divides = (inv - whole).abs() <= S::lit(1e-9) * whole;
    let n = if divides { whole } else { inv.ceil() }.to_usize().unwrap_or(1).max(1);
    let point = |i: usize| if divides { S::from_usize_lossy(i) / whole } else { S::from_usize_lossy(i) * step };
    let mut pts: Vec<S> = (0..n).map(|i| point(i).min(S::one())).collect();
    if pts.last().copied() != Some(S::one()) {
        pts.push(S::one());
    }
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absolute_loss_examples() {
        let l = Loss::<f64>::absolute();
        assert_eq!(loss_eval(&l, 0.3, 0.3).unwrap(), 0.0);
        assert_eq!(loss_eval(&l, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(loss_eval(&l, 0.25, 0.75).unwrap(), 0.5);
        assert_eq!(l.lipschitz(), 1.0);
    }

    #[test]
    fn out_of_domain_rejected() {
        let l = Loss::<f32>::absolute();
        assert!(matches!(l.eval(1.2, 0.0), Err(Error::InputDomain(_))));
        assert!(matches!(l.eval(0.2, -0.1), Err(Error::InputDomain(_))));
    }

    #[test]
    fn absolute_is_one_lipschitz_on_fine_grid() {
        let l = Loss::<f64>::absolute();
        let g = unit_grid(0.01);
        assert_eq!(g.len(), 101);
        for &a in &g {
            for &b in &g {
                for &y in &g {
                    assert!((l.value(a, y) - l.value(b, y)).abs() <= (a - b).abs() + 1e-12);
                    assert!((l.value(a, y) - l.value(a, b)).abs() <= (y - b).abs() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn custom_loss_with_wrong_constant_rejected() {
        assert!(Loss::<f64>::custom("sq", 1.0, |p, y| (p - y) * (p - y)).is_err());
        assert!(Loss::<f64>::custom("sq", 2.0, |p, y| (p - y) * (p - y)).is_ok());
        assert!(Loss::<f64>::custom("concave", 2.0, |p, y| 1.0 - (p - y) * (p - y)).is_err());
        assert!(Loss::<f64>::custom("zero", 0.0, |_, _| 0.0).is_err());
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = unit_grid(0.3f64);
        assert_eq!(g.first(), Some(&0.0));
        assert_eq!(g.last(), Some(&1.0));
        assert_eq!(g.len(), 5);
    }
}
