//! Domain types and the mixed-ERM oracle contract.
//!
//! A mixed-ERM query asks a hypothesis class for
//!
//! ```text
//! inf_h  Σ_i w_i ℓ(h(x_i), y_i)  +  C Σ_j ε_j h(x̃_j)
//! ```
//!
//! and is the only way the learners touch a class.

use std::fmt::Debug;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::scalar::Scalar;

/// A point of the instance space: a scalar in `[0,1]` or a vector in `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature<S> {
    Scalar(S),
    Vector(Arc<[S]>),
}

impl<S: Scalar> Feature<S> {
    pub fn scalar(v: S) -> Result<Self> {
        if !v.in_unit() {
            return Err(Error::InputDomain(format!("feature {v} outside [0,1]")));
        }
        Ok(Feature::Scalar(v))
    }

    pub fn vector(coords: Vec<S>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyInput("feature vector"));
        }
        if let Some(c) = coords.iter().find(|c| !c.in_unit()) {
            return Err(Error::InputDomain(format!("feature coordinate {c} outside [0,1]")));
        }
        Ok(Feature::Vector(coords.into()))
    }

    pub fn as_scalar(&self) -> Option<S> {
        match self {
            Feature::Scalar(v) => Some(*v),
            Feature::Vector(_) => None,
        }
    }

    pub fn coords(&self) -> &[S] {
        match self {
            Feature::Scalar(v) => std::slice::from_ref(v),
            Feature::Vector(c) => c,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords().len()
    }

    /// `‖x − x′‖_∞`; coordinates beyond the shorter vector count as distance 1.
    pub fn sup_dist(&self, other: &Self) -> S {
        let (a, b) = (self.coords(), other.coords());
        let mut d = if a.len() == b.len() { S::zero() } else { S::one() };
        for (u, v) in a.iter().zip(b) {
            d = d.max((*u - *v).abs());
        }
        d
    }
}

impl<S: Scalar> std::fmt::Display for Feature<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Feature::Scalar(v) => write!(f, "{v}"),
            Feature::Vector(c) => {
                for (i, v) in c.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

/// A label in `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Label<S>(S);

impl<S: Scalar> Label<S> {
    pub fn new(v: S) -> Result<Self> {
        if !v.in_unit() {
            return Err(Error::InputDomain(format!("label {v} outside [0,1]")));
        }
        Ok(Label(v))
    }

    pub fn value(self) -> S {
        self.0
    }
}

/// A Rademacher sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_bool(plus: bool) -> Self {
        if plus {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value<S: Scalar>(self) -> S {
        match self {
            Sign::Plus => S::one(),
            Sign::Minus => -S::one(),
        }
    }

    pub fn negate(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        Sign::from_bool(rng.gen::<bool>())
    }
}

/// Converts a signed term into an absolute-loss term.
///
/// Returns `(pseudo_label, offset)` with `ε·v = |v − pseudo_label| + offset`
/// for every `v`, i.e. pseudo-label `(1−ε)/2` and offset `−(1−ε)/2`.
pub fn signed_to_absolute<S: Scalar>(sign: Sign) -> (S, S) {
    match sign {
        Sign::Plus => (S::zero(), S::zero()),
        Sign::Minus => (S::one(), -S::one()),
    }
}

/// A weighted labeled example.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair<S> {
    x: Feature<S>,
    y: S,
    weight: S,
}

impl<S: Scalar> LabeledPair<S> {
    pub fn new(x: Feature<S>, y: S) -> Result<Self> {
        Self::weighted(x, y, S::one())
    }

    pub fn weighted(x: Feature<S>, y: S, weight: S) -> Result<Self> {
        if !y.in_unit() {
            return Err(Error::InputDomain(format!("label {y} outside [0,1]")));
        }
        if !(weight >= S::zero()) || !weight.is_finite() {
            return Err(Error::InputDomain(format!("pair weight {weight} must be finite and ≥ 0")));
        }
        Ok(Self { x, y, weight })
    }

    pub fn x(&self) -> &Feature<S> {
        &self.x
    }

    pub fn y(&self) -> S {
        self.y
    }

    pub fn weight(&self) -> S {
        self.weight
    }

    pub fn with_label(&self, y: S) -> Result<Self> {
        Self::weighted(self.x.clone(), y, self.weight)
    }
}

/// A hallucinated term `ε·h(x̃)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedTerm<S> {
    pub sign: Sign,
    pub x: Feature<S>,
}

impl<S> SignedTerm<S> {
    pub fn new(sign: Sign, x: Feature<S>) -> Self {
        Self { sign, x }
    }
}

/// One mixed-ERM oracle task.
#[derive(Debug, Clone)]
pub struct MixedErmQuery<S> {
    pairs: Vec<LabeledPair<S>>,
    signed: Vec<SignedTerm<S>>,
    coefficient: S,
    loss: Loss<S>,
}

impl<S: Scalar> MixedErmQuery<S> {
    pub fn new(pairs: Vec<LabeledPair<S>>, signed: Vec<SignedTerm<S>>, coefficient: S, loss: Loss<S>) -> Result<Self> {
        if !(coefficient >= S::zero()) || !coefficient.is_finite() {
            return Err(Error::InputDomain(format!("coefficient C = {coefficient} must be finite and ≥ 0")));
        }
        Ok(Self { pairs, signed, coefficient, loss })
    }

    /// Plain weighted ERM: no signed terms, `C = 0`.
    pub fn erm(pairs: Vec<LabeledPair<S>>, loss: Loss<S>) -> Self {
        Self { pairs, signed: Vec::new(), coefficient: S::zero(), loss }
    }

    pub fn pairs(&self) -> &[LabeledPair<S>] {
        &self.pairs
    }

    pub fn signed(&self) -> &[SignedTerm<S>] {
        &self.signed
    }

    pub fn coefficient(&self) -> S {
        self.coefficient
    }

    pub fn loss(&self) -> &Loss<S> {
        &self.loss
    }

    /// Iterates over every feature mentioned by the query.
    pub fn features(&self) -> impl Iterator<Item = &Feature<S>> {
        self.pairs.iter().map(|p| &p.x).chain(self.signed.iter().map(|s| &s.x))
    }

    /// `Σ w_i + C·#signed`, the scale of the objective's sensitivity to `h`.
    pub fn total_mass(&self) -> S {
        let w: S = self.pairs.iter().map(|p| p.weight).sum();
        w + self.coefficient * S::from_usize_lossy(self.signed.len())
    }

    /// Objective value of a hypothesis given by its evaluation map.
    pub fn objective_with<F: FnMut(&Feature<S>) -> S>(&self, mut h: F) -> S {
        let mut total = S::zero();
        for p in &self.pairs {
            total = total + p.weight * self.loss.value(h(&p.x), p.y);
        }
        let mut signed = S::zero();
        for s in &self.signed {
            signed = signed + s.sign.value::<S>() * h(&s.x);
        }
        total + self.coefficient * signed
    }

    /// Rewrites signed terms as weighted absolute-loss pairs.
    ///
    /// Only meaningful for absolute loss: returns `(pairs, offset)` such that
    /// the objective equals `Σ w|h(x) − y| + offset` over the returned pairs.
    pub fn fold_signed_absolute(&self) -> Result<(Vec<LabeledPair<S>>, S)> {
        if !self.loss.is_absolute() {
            return Err(Error::Unsupported(format!(
                "signed terms fold into absolute loss only, query uses `{}`",
                self.loss.name()
            )));
        }
        let mut pairs = self.pairs.clone();
        let mut offset = S::zero();
        for s in &self.signed {
            let (pseudo, off) = signed_to_absolute::<S>(s.sign);
            pairs.push(LabeledPair::weighted(s.x.clone(), pseudo, self.coefficient)?);
            offset = offset + self.coefficient * off;
        }
        Ok((pairs, offset))
    }

    /// Same query with every sign flipped, turning `inf` into `−sup`.
    pub fn negated_signs(mut self) -> Self {
        for s in &mut self.signed {
            s.sign = s.sign.negate();
        }
        self
    }
}

/// Minimizer returned by an oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ErmResult<H, S> {
    pub hypothesis: H,
    pub objective: S,
}

/// A class `ℋ ⊂ [0,1]^𝒳` reachable only through its mixed-ERM oracle.
pub trait HypothesisClass<S: Scalar>: Send + Sync {
    type Hypothesis: Clone + Debug + Send + Sync;

    fn name(&self) -> String;

    /// Value of `h` at `x`, always in `[0,1]`.
    fn evaluate(&self, h: &Self::Hypothesis, x: &Feature<S>) -> S;

    fn solve(&self, query: &MixedErmQuery<S>) -> Result<ErmResult<Self::Hypothesis, S>>;

    /// Declared objective tolerance of `solve` (zero for exact oracles).
    fn tolerance(&self) -> S {
        S::zero()
    }

    /// True when every hypothesis takes values in `{0,1}`.
    fn is_binary(&self) -> bool {
        false
    }
}

impl<S: Scalar, C: HypothesisClass<S> + ?Sized> HypothesisClass<S> for &C {
    type Hypothesis = C::Hypothesis;

    fn name(&self) -> String {
        (**self).name()
    }

    fn evaluate(&self, h: &Self::Hypothesis, x: &Feature<S>) -> S {
        (**self).evaluate(h, x)
    }

    fn solve(&self, query: &MixedErmQuery<S>) -> Result<ErmResult<Self::Hypothesis, S>> {
        (**self).solve(query)
    }

    fn tolerance(&self) -> S {
        (**self).tolerance()
    }

    fn is_binary(&self) -> bool {
        (**self).is_binary()
    }
}

/// Counts oracle calls made through it. One per worker; merge counts at report time.
#[derive(Debug)]
pub struct Metered<C> {
    inner: C,
    calls: AtomicU64,
}

impl<C> Metered<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<S: Scalar, C: HypothesisClass<S>> HypothesisClass<S> for Metered<C> {
    type Hypothesis = C::Hypothesis;

    fn name(&self) -> String {
        self.inner.name()
    }

    fn evaluate(&self, h: &Self::Hypothesis, x: &Feature<S>) -> S {
        self.inner.evaluate(h, x)
    }

    fn solve(&self, query: &MixedErmQuery<S>) -> Result<ErmResult<Self::Hypothesis, S>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.solve(query)
    }

    fn tolerance(&self) -> S {
        self.inner.tolerance()
    }

    fn is_binary(&self) -> bool {
        self.inner.is_binary()
    }
}

/// Best fixed hypothesis in hindsight and its cumulative loss.
pub fn best_in_hindsight<S: Scalar, C: HypothesisClass<S> + ?Sized>(
    class: &C,
    pairs: &[LabeledPair<S>],
    loss: &Loss<S>,
) -> Result<ErmResult<C::Hypothesis, S>> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("best_in_hindsight needs at least one pair"));
    }
    class.solve(&MixedErmQuery::erm(pairs.to_vec(), loss.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_to_absolute_examples() {
        assert_eq!(signed_to_absolute::<f64>(Sign::Plus), (0.0, 0.0));
        assert_eq!(signed_to_absolute::<f64>(Sign::Minus), (1.0, -1.0));
        let (p, off) = signed_to_absolute::<f64>(Sign::Minus);
        assert!(((0.4f64 - p).abs() + off - (-0.4)).abs() < 1e-15);
    }

    #[test]
    fn signed_identity_on_grid() {
        for sign in [Sign::Plus, Sign::Minus] {
            for i in 0..=100 {
                let v = i as f64 / 100.0;
                let (p, off) = signed_to_absolute::<f64>(sign);
                assert!((sign.value::<f64>() * v - ((v - p).abs() + off)).abs() <= f64::EPSILON);
            }
        }
    }

    #[test]
    fn feature_validation() {
        assert!(Feature::scalar(1.5f64).is_err());
        assert!(Feature::vector(vec![0.2f64, -0.1]).is_err());
        assert!(Feature::<f64>::vector(vec![]).is_err());
        let a = Feature::vector(vec![0.1f64, 0.5]).unwrap();
        let b = Feature::vector(vec![0.4f64, 0.45]).unwrap();
        assert!((a.sup_dist(&b) - 0.3).abs() < 1e-12);
        assert_eq!(a.to_string(), "0.1;0.5");
    }

    #[test]
    fn pair_and_query_validation() {
        let x = Feature::scalar(0.5f64).unwrap();
        assert!(LabeledPair::new(x.clone(), 1.2).is_err());
        assert!(LabeledPair::weighted(x.clone(), 0.2, -1.0).is_err());
        assert!(MixedErmQuery::new(vec![], vec![], -1.0, Loss::absolute()).is_err());
    }

    #[test]
    fn folded_objective_matches_mixed_objective() {
        let f = |v: f64| Feature::scalar(v).unwrap();
        let q = MixedErmQuery::new(
            vec![LabeledPair::weighted(f(0.1), 0.3, 2.0).unwrap(), LabeledPair::new(f(0.9), 1.0).unwrap()],
            vec![SignedTerm::new(Sign::Minus, f(0.4)), SignedTerm::new(Sign::Plus, f(0.7))],
            1.5,
            Loss::absolute(),
        )
        .unwrap();
        let (pairs, off) = q.fold_signed_absolute().unwrap();
        let h = |x: &Feature<f64>| x.as_scalar().unwrap() * 0.8;
        let folded = MixedErmQuery::erm(pairs, Loss::absolute()).objective_with(h) + off;
        assert!((folded - q.objective_with(h)).abs() < 1e-12);
        assert!((q.total_mass() - 6.0).abs() < 1e-12);
    }
}
