//! Feature processes and label adversaries.

use std::fmt;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::domain::{Feature, HypothesisClass, LabeledPair, MixedErmQuery};
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::rng::GameRng;
use crate::scalar::Scalar;

/// A distribution on `[0,1]^d`.
#[derive(Debug, Clone)]
pub enum FeatureDistribution<S> {
    Discrete {
        support: Vec<Feature<S>>,
        weights: WeightedIndex<f64>,
        probs: Vec<f64>,
    },
    Uniform {
        lo: S,
        hi: S,
    },
    /// Independent scalar coordinates.
    Product(Vec<FeatureDistribution<S>>),
}

impl<S: Scalar> FeatureDistribution<S> {
    pub fn discrete(support: Vec<Feature<S>>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyInput("discrete support"));
        }
        if support.len() != probs.len() {
            return Err(Error::Config(format!("{} support points but {} probabilities", support.len(), probs.len())));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config("probabilities must be nonnegative and sum to 1".into()));
        }
        let weights = WeightedIndex::new(&probs).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self::Discrete { support, weights, probs })
    }

    pub fn point(x: Feature<S>) -> Self {
        Self::discrete(vec![x], vec![1.0]).expect("point mass is valid")
    }

    pub fn uniform(lo: S, hi: S) -> Result<Self> {
        if !(lo.in_unit() && hi.in_unit() && lo <= hi) {
            return Err(Error::Config(format!("uniform range [{lo},{hi}] not inside [0,1]")));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn product(coords: Vec<FeatureDistribution<S>>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyInput("product distribution"));
        }
        if coords.iter().any(|c| c.dim() != 1) {
            return Err(Error::Config("product coordinates must be scalar distributions".into()));
        }
        Ok(Self::Product(coords))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Discrete { support, .. } => support[0].dim(),
            Self::Uniform { .. } => 1,
            Self::Product(c) => c.len(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Feature<S> {
        match self {
            Self::Discrete { support, weights, .. } => support[weights.sample(rng)].clone(),
            Self::Uniform { .. } => Feature::Scalar(self.sample_scalar(rng)),
            Self::Product(c) => Feature::Vector(c.iter().map(|d| d.sample_scalar(rng)).collect()),
        }
    }

    fn sample_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> S {
        match self {
            Self::Uniform { lo, hi } => {
                let u: f64 = rng.gen();
                (*lo + (*hi - *lo) * S::lit(u)).clamp_unit()
            }
            other => other.sample(rng).coords()[0],
        }
    }
}

/// Piecewise-stationary process: segment `i` is active from its start time
/// until the next segment starts.
#[derive(Debug, Clone)]
pub struct ShiftingProcess<S> {
    segments: Vec<(FeatureDistribution<S>, usize)>,
}

impl<S: Scalar> ShiftingProcess<S> {
    pub fn new(segments: Vec<(FeatureDistribution<S>, usize)>) -> Result<Self> {
        match segments.first() {
            None => return Err(Error::EmptyInput("shifting segments")),
            Some((_, 1)) => {}
            Some((_, s)) => return Err(Error::Config(format!("first segment must start at t=1, got {s}"))),
        }
        if segments.windows(2).any(|w| w[1].1 <= w[0].1) {
            return Err(Error::Config("segment start times must be strictly increasing".into()));
        }
        Ok(Self { segments })
    }

    /// Number of distribution changes.
    pub fn changes(&self) -> usize {
        self.segments.len() - 1
    }

    /// Times at which a new segment becomes active.
    pub fn change_points(&self) -> Vec<usize> {
        self.segments[1..].iter().map(|s| s.1).collect()
    }

    pub fn active(&self, t: usize) -> &FeatureDistribution<S> {
        let i = self.segments.partition_point(|s| s.1 <= t).max(1) - 1;
        &self.segments[i].0
    }
}

/// Where features come from.
#[derive(Debug, Clone)]
pub enum FeatureProcess<S> {
    Iid(FeatureDistribution<S>),
    Shifting(ShiftingProcess<S>),
}

impl<S: Scalar> FeatureProcess<S> {
    pub fn change_points(&self) -> Vec<usize> {
        match self {
            Self::Iid(_) => vec![],
            Self::Shifting(s) => s.change_points(),
        }
    }

    pub fn distribution_at(&self, t: usize) -> &FeatureDistribution<S> {
        match self {
            Self::Iid(d) => d,
            Self::Shifting(s) => s.active(t),
        }
    }
}

/// Draws `x_t` from the distribution active at round `t ≥ 1`.
pub fn sample_feature<S: Scalar, R: Rng + ?Sized>(process: &FeatureProcess<S>, t: usize, rng: &mut R) -> Feature<S> {
    process.distribution_at(t).sample(rng)
}

/// What an adversary sees when choosing `y_t`.
#[derive(Debug, Clone, Copy)]
pub struct LabelContext<'a, S> {
    pub t: usize,
    /// `x_1..x_t`, the current feature last.
    pub features: &'a [Feature<S>],
    /// `y_1..y_{t−1}`.
    pub labels: &'a [S],
    /// Realized predictions `ŷ_1..ŷ_{t−1}`.
    pub predictions: &'a [S],
}

impl<S> LabelContext<'_, S> {
    pub fn current(&self) -> &Feature<S> {
        &self.features[self.features.len() - 1]
    }
}

/// Monte-Carlo estimate of the learner's conditional mean prediction at the
/// current round. Lazily evaluated; never touches the game's RNG streams.
pub type Probe<'a, S> = &'a mut dyn FnMut() -> Result<S>;

/// A label-choosing strategy. Implementations must be pure given their
/// inputs and `rng` so that games are reproducible.
pub trait Adversary<S: Scalar>: Send + Sync {
    fn name(&self) -> String;

    fn label(&self, ctx: &LabelContext<'_, S>, probe: Probe<'_, S>, rng: &mut GameRng) -> Result<S>;
}

/// Calls the adversary and validates the label.
pub fn label<S: Scalar, A: Adversary<S> + ?Sized>(
    adversary: &A,
    ctx: &LabelContext<'_, S>,
    probe: Probe<'_, S>,
    rng: &mut GameRng,
) -> Result<S> {
    let y = adversary.label(ctx, probe, rng)?;
    if !y.in_unit() {
        return Err(Error::AdversaryFault { round: ctx.t, reason: format!("label {y} outside [0,1]") });
    }
    Ok(y)
}

type ObliviousFn<S> = Arc<dyn Fn(usize, &Feature<S>, &mut GameRng) -> S + Send + Sync>;
type AdaptiveFn<S> = Arc<dyn Fn(&LabelContext<'_, S>, Probe<'_, S>, &mut GameRng) -> Result<S> + Send + Sync>;
type WindowFn<S> = Arc<dyn Fn(&[Feature<S>], &mut GameRng) -> S + Send + Sync>;

/// Labels `y_t = f_t(x_t)`.
#[derive(Clone)]
pub struct Oblivious<S> {
    name: String,
    f: ObliviousFn<S>,
}

impl<S: Scalar> Oblivious<S> {
    pub fn new(name: &str, f: impl Fn(usize, &Feature<S>, &mut GameRng) -> S + Send + Sync + 'static) -> Self {
        Self { name: name.to_owned(), f: Arc::new(f) }
    }
}

impl<S: Scalar> Adversary<S> for Oblivious<S> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn label(&self, ctx: &LabelContext<'_, S>, _probe: Probe<'_, S>, rng: &mut GameRng) -> Result<S> {
        Ok((self.f)(ctx.t, ctx.current(), rng))
    }
}

/// Labels from the full history and the probe.
#[derive(Clone)]
pub struct Adaptive<S> {
    name: String,
    f: AdaptiveFn<S>,
}

impl<S: Scalar> Adaptive<S> {
    pub fn new(
        name: &str,
        f: impl Fn(&LabelContext<'_, S>, Probe<'_, S>, &mut GameRng) -> Result<S> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.to_owned(), f: Arc::new(f) }
    }
}

impl<S: Scalar> Adversary<S> for Adaptive<S> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn label(&self, ctx: &LabelContext<'_, S>, probe: Probe<'_, S>, rng: &mut GameRng) -> Result<S> {
        (self.f)(ctx, probe, rng)
    }
}

/// Labels from the window `x_{t−B..t}` only.
#[derive(Clone)]
pub struct SemiAdaptive<S> {
    name: String,
    window: usize,
    f: WindowFn<S>,
}

impl<S: Scalar> SemiAdaptive<S> {
    pub fn new(name: &str, window: usize, f: impl Fn(&[Feature<S>], &mut GameRng) -> S + Send + Sync + 'static) -> Self {
        Self { name: name.to_owned(), window, f: Arc::new(f) }
    }
}

impl<S: Scalar> Adversary<S> for SemiAdaptive<S> {
    fn name(&self) -> String {
        format!("{}(window={})", self.name, self.window)
    }

    fn label(&self, ctx: &LabelContext<'_, S>, _probe: Probe<'_, S>, rng: &mut GameRng) -> Result<S> {
        let n = ctx.features.len();
        let from = n.saturating_sub(self.window + 1);
        Ok((self.f)(&ctx.features[from..], rng))
    }
}

impl<S> fmt::Debug for Oblivious<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Oblivious({})", self.name)
    }
}

impl<S> fmt::Debug for Adaptive<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Adaptive({})", self.name)
    }
}

impl<S> fmt::Debug for SemiAdaptive<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SemiAdaptive({}, {})", self.name, self.window)
    }
}

fn bit<S: Scalar>(b: bool) -> S {
    if b {
        S::one()
    } else {
        S::zero()
    }
}

/// `y = 1{x₀ ≥ a*}` with each label flipped independently with probability `p`.
pub fn noisy_target<S: Scalar>(threshold: S, p: f64) -> Result<Oblivious<S>> {
    if !(0.0..=1.0).contains(&p) || !threshold.in_unit() {
        return Err(Error::Config(format!("noisy_target needs a* ∈ [0,1] and p ∈ [0,1], got {threshold}, {p}")));
    }
    Ok(Oblivious::new(&format!("noisy_target(a={threshold},p={p})"), move |_, x, rng| {
        let clean = x.coords()[0] >= threshold;
        bit(clean ^ rng.gen_bool(p))
    }))
}

/// `y = 1` when the probed mean prediction is below 1/2, else `y = 0`.
pub fn flip_to_far<S: Scalar>() -> Adaptive<S> {
    Adaptive::new("flip_to_far", |_, probe, _| Ok(bit(probe()? < S::half())))
}

pub fn constant<S: Scalar>(y: S) -> Result<Oblivious<S>> {
    if !y.in_unit() {
        return Err(Error::Config(format!("constant label {y} outside [0,1]")));
    }
    Ok(Oblivious::new(&format!("constant({y})"), move |_, _, _| y))
}

/// `y_t = values[(t − 1) mod len]`.
pub fn periodic<S: Scalar>(values: Vec<S>) -> Result<Oblivious<S>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("periodic labels"));
    }
    if let Some(v) = values.iter().find(|v| !v.in_unit()) {
        return Err(Error::Config(format!("periodic label {v} outside [0,1]")));
    }
    let name = format!("periodic(len={})", values.len());
    Ok(Oblivious::new(&name, move |t, _, _| values[(t - 1) % values.len()]))
}

/// Greedy proxy for the adversary's sup: picks `y ∈ {0,1}` maximizing the
/// probed loss minus the increase of the best expert's cumulative loss.
pub struct ComparatorSqueeze<C, S> {
    class: C,
    loss: Loss<S>,
}

impl<C, S: Scalar> ComparatorSqueeze<C, S> {
    pub fn new(class: C, loss: Loss<S>) -> Self {
        Self { class, loss }
    }
}

impl<C, S> fmt::Debug for ComparatorSqueeze<C, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ComparatorSqueeze")
    }
}

impl<S: Scalar, C: HypothesisClass<S>> Adversary<S> for ComparatorSqueeze<C, S> {
    fn name(&self) -> String {
        "comparator_squeeze".into()
    }

    fn label(&self, ctx: &LabelContext<'_, S>, probe: Probe<'_, S>, _rng: &mut GameRng) -> Result<S> {
        let yhat = probe()?;
        let mut pairs: Vec<LabeledPair<S>> = ctx.features[..ctx.labels.len()]
            .iter()
            .zip(ctx.labels)
            .map(|(x, &y)| LabeledPair::new(x.clone(), y))
            .collect::<Result<_>>()?;
        let before = if pairs.is_empty() {
            S::zero()
        } else {
            self.class.solve(&MixedErmQuery::erm(pairs.clone(), self.loss.clone()))?.objective
        };
        let mut best = (S::neg_infinity(), S::zero());
        pairs.push(LabeledPair::new(ctx.current().clone(), S::zero())?);
        for y in [S::zero(), S::one()] {
            let last = pairs.len() - 1;
            pairs[last] = pairs[last].with_label(y)?;
            let after = self.class.solve(&MixedErmQuery::erm(pairs.clone(), self.loss.clone()))?.objective;
            let gain = self.loss.value(yhat, y) - (after - before);
            if gain > best.0 {
                best = (gain, y);
            }
        }
        Ok(best.1)
    }
}

/// Named adversaries, addressable from configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AdversarySpec {
    NoisyTarget { threshold: f64, p: f64 },
    FlipToFar,
    ComparatorSqueeze,
    Constant { y: f64 },
    Periodic { values: Vec<f64> },
}

impl AdversarySpec {
    pub fn catalog() -> Vec<&'static str> {
        vec!["noisy_target", "flip_to_far", "comparator_squeeze", "constant", "periodic"]
    }

    /// Builds the adversary; `class` is only used by `comparator_squeeze`.
    pub fn build<S: Scalar, C: HypothesisClass<S> + Clone + 'static>(
        &self,
        class: &C,
        loss: &Loss<S>,
    ) -> Result<Box<dyn Adversary<S>>> {
        Ok(match self {
            Self::NoisyTarget { threshold, p } => Box::new(noisy_target(S::lit(*threshold), *p)?),
            Self::FlipToFar => Box::new(flip_to_far()),
            Self::ComparatorSqueeze => Box::new(ComparatorSqueeze::new(class.clone(), loss.clone())),
            Self::Constant { y } => Box::new(constant(S::lit(*y))?),
            Self::Periodic { values } => Box::new(periodic(values.iter().map(|&v| S::lit(v)).collect())?),
        })
    }
}
