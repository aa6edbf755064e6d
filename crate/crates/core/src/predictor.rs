//! The random-playout predictor and the surrogate relaxations it is built on.
//!
//! Round `j` of a side-information game of horizon `M` draws hallucinated
//! features `x̃_{j+1..M}` from the observed pool without replacement, draws
//! signs `ε_{j+1..M}`, and predicts
//!
//! ```text
//! ŷ_j = argmin_ŷ sup_y { ℓ(ŷ,y) + sup_h [ 2L Σ ε_i h(x̃_i) − ℓ(h(x_j),y) − L_{j−1}^h ] }
//! ```
//!
//! The inner sup is one mixed-ERM call on the sign-negated query.

use rand::seq::index;
use rand::Rng;

use crate::domain::{Feature, HypothesisClass, LabeledPair, MixedErmQuery, Sign, SignedTerm};
use crate::error::{Error, Result};
use crate::loss::{unit_grid, Loss};
use crate::scalar::Scalar;
use crate::stats::McEstimate;

/// Observed features standing in for the unknown distribution.
#[derive(Debug, Clone, Default)]
pub struct SidePool<S> {
    features: Vec<Feature<S>>,
}

impl<S: Scalar> SidePool<S> {
    pub fn new(features: Vec<Feature<S>>) -> Self {
        Self { features }
    }

    pub fn push(&mut self, x: Feature<S>) {
        self.features.push(x);
    }

    pub fn features(&self) -> &[Feature<S>] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

/// Hallucinated features with their signs, in playout order.
#[derive(Debug, Clone, Default)]
pub struct RelaxationDraw<S> {
    pub halluc: Vec<Feature<S>>,
    pub signs: Vec<Sign>,
    /// Pool indices of the hallucinated features.
    pub indices: Vec<usize>,
}

impl<S: Scalar> RelaxationDraw<S> {
    pub fn len(&self) -> usize {
        self.halluc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halluc.is_empty()
    }

    pub fn signed_terms(&self) -> impl Iterator<Item = SignedTerm<S>> + '_ {
        self.signs.iter().zip(&self.halluc).map(|(&s, x)| SignedTerm::new(s, x.clone()))
    }
}

/// Uniform random ordered subsequence of the pool plus i.i.d. signs.
pub fn draw_halluc<S: Scalar, R: Rng + ?Sized>(pool: &SidePool<S>, count: usize, rng: &mut R) -> Result<RelaxationDraw<S>> {
    draw_halluc_with(pool, count, DrawMode::WithoutReplacement, rng)
}

pub fn draw_halluc_with<S: Scalar, R: Rng + ?Sized>(
    pool: &SidePool<S>,
    count: usize,
    mode: DrawMode,
    rng: &mut R,
) -> Result<RelaxationDraw<S>> {
    let n = pool.len();
    let indices: Vec<usize> = match mode {
        DrawMode::WithoutReplacement => {
            if count > n {
                return Err(Error::PoolExhausted { requested: count, available: n });
            }
            index::sample(rng, n, count).into_vec()
        }
        DrawMode::WithReplacement => {
            if count > 0 && n == 0 {
                return Err(Error::PoolExhausted { requested: count, available: 0 });
            }
            (0..count).map(|_| rng.gen_range(0..n)).collect()
        }
    };
    let halluc = indices.iter().map(|&i| pool.features[i].clone()).collect();
    let signs = (0..count).map(|_| Sign::random(rng)).collect();
    Ok(RelaxationDraw { halluc, signs, indices })
}

/// Predictor settings for one game of horizon `M`.
#[derive(Debug, Clone)]
pub struct PredictorConfig<S> {
    pub horizon: usize,
    pub loss: Loss<S>,
    pub y_grid_step: S,
    pub yhat_tolerance: S,
    pub fast_binary_path: bool,
    pub seed: u64,
}

impl<S: Scalar> PredictorConfig<S> {
    /// Grid step and tolerance default to `1/(L√M)`, capped at 1.
    pub fn new(horizon: usize, loss: Loss<S>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("predictor horizon must be ≥ 1".into()));
        }
        let step = Self::default_step(horizon, &loss);
        Ok(Self { horizon, loss, y_grid_step: step, yhat_tolerance: step, fast_binary_path: true, seed: 0 })
    }

    pub fn default_step(horizon: usize, loss: &Loss<S>) -> S {
        (S::one() / (loss.lipschitz() * S::from_usize_lossy(horizon).sqrt())).min(S::one())
    }

    pub fn with_grid(mut self, y_grid_step: S, yhat_tolerance: S) -> Result<Self> {
        if !(y_grid_step > S::zero() && yhat_tolerance > S::zero()) {
            return Err(Error::Config("grid step and tolerance must be positive".into()));
        }
        self.y_grid_step = y_grid_step;
        self.yhat_tolerance = yhat_tolerance;
        Ok(self)
    }

    pub fn with_fast_binary_path(mut self, on: bool) -> Self {
        self.fast_binary_path = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `⌈L√M⌉ + 2`.
    pub fn general_budget(&self) -> usize {
        let v = (S::one() / self.y_grid_step - S::lit(1e-9)).ceil();
        v.to_usize().unwrap_or(usize::MAX).saturating_add(2)
    }

    fn coefficient(&self) -> S {
        S::two() * self.loss.lipschitz()
    }
}

/// Past rounds of the current game and the feature to predict on.
#[derive(Debug, Clone, Copy)]
pub struct GameHistory<'a, S> {
    pub rounds: &'a [LabeledPair<S>],
    pub current: &'a Feature<S>,
}

/// A prediction and the oracle calls spent on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<S> {
    pub value: S,
    pub erm_calls: usize,
}

/// `sup_h [2L Σ ε h(x̃) − ℓ(h(x_j), y) − L_{j−1}^h]` via one oracle call.
pub fn inner_sup<S: Scalar, C: HypothesisClass<S> + ?Sized>(
    history: GameHistory<'_, S>,
    draw: &RelaxationDraw<S>,
    probe_y: S,
    class: &C,
    config: &PredictorConfig<S>,
) -> Result<S> {
    let mut pairs = Vec::with_capacity(history.rounds.len() + 1);
    pairs.extend_from_slice(history.rounds);
    pairs.push(LabeledPair::new(history.current.clone(), probe_y)?);
    neg_sup(class, pairs, draw.signed_terms().collect(), config)
}

/// `sup_h [C Σ ε h(x̃) − Σ ℓ(h(x), y)] = −inf_h [Σ ℓ(h(x), y) + C Σ (−ε) h(x̃)]`.
fn neg_sup<S: Scalar, C: HypothesisClass<S> + ?Sized>(
    class: &C,
    pairs: Vec<LabeledPair<S>>,
    signed: Vec<SignedTerm<S>>,
    config: &PredictorConfig<S>,
) -> Result<S> {
    let q = MixedErmQuery::new(pairs, signed, config.coefficient(), config.loss.clone())?.negated_signs();
    Ok(-class.solve(&q)?.objective)
}

/// Mean of `neg_sup` at `ε` and at `−ε`; same expectation, lower variance.
fn antithetic<S: Scalar, C: HypothesisClass<S> + ?Sized>(
    class: &C,
    pairs: &[LabeledPair<S>],
    signed: Vec<SignedTerm<S>>,
    config: &PredictorConfig<S>,
) -> Result<S> {
    let flipped = signed.iter().map(|t| SignedTerm::new(t.sign.negate(), t.x.clone())).collect();
    let a = neg_sup(class, pairs.to_vec(), signed, config)?;
    let b = neg_sup(class, pairs.to_vec(), flipped, config)?;
    Ok((a + b) / S::two())
}

/// Outer objective `φ(ŷ) = max_k [ℓ(ŷ, y_k) + G_k]` over a cached grid.
struct Outer<'a, S> {
    grid: &'a [S],
    g: &'a [S],
    loss: &'a Loss<S>,
}

impl<S: Scalar> Outer<'_, S> {
    fn phi(&self, yhat: S) -> S {
        self.grid.iter().zip(self.g).map(|(&y, &g)| self.loss.value(yhat, y) + g).fold(S::neg_infinity(), S::max)
    }
}

/// Ternary search for the minimizer of a convex function on `[0,1]`.
fn ternary<S: Scalar>(tol: S, mut f: impl FnMut(S) -> S) -> S {
    let (mut lo, mut hi) = (S::zero(), S::one());
    let third = S::one() / S::lit(3.0);
    let mut iters = 0;
    while hi - lo > tol && iters < 200 {
        let m1 = lo + (hi - lo) * third;
        let m2 = hi - (hi - lo) * third;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
        iters += 1;
    }
    (lo + hi) * S::half()
}

/// General predictor: the adversary's sup runs over the y-grid, whose inner
/// sups are computed once; ŷ is found by ternary search on the convex `φ`.
pub fn predict_general<S: Scalar, C: HypothesisClass<S> + ?Sized>(
    history: GameHistory<'_, S>,
    draw: &RelaxationDraw<S>,
    class: &C,
    config: &PredictorConfig<S>,
) -> Result<Prediction<S>> {
    let grid = unit_grid(config.y_grid_step);
    let g = grid.iter().map(|&y| inner_sup(history, draw, y, class, config)).collect::<Result<Vec<S>>>()?;
    let outer = Outer { grid: &grid, g: &g, loss: &config.loss };
    let value = ternary(config.yhat_tolerance, |v| outer.phi(v)).clamp_unit();
    Ok(Prediction { value, erm_calls: grid.len() })
}

/// Two-call predictor for binary classes under absolute loss.
///
/// With `G(y)` the inner sup, `φ(ŷ) = max(ŷ + G(0), 1 − ŷ + G(1))`, minimized
/// at `(1 + G(1) − G(0))/2`.
pub fn predict_binary_fast<S: Scalar, C: HypothesisClass<S> + ?Sized>(
    history: GameHistory<'_, S>,
    draw: &RelaxationDraw<S>,
    class: &C,
    config: &PredictorConfig<S>,
) -> Result<Prediction<S>> {
    if !class.is_binary() || !config.loss.is_absolute() {
        return Err(Error::Unsupported(format!(
            "fast path needs a binary class and absolute loss, got `{}` with `{}`",
            class.name(),
            config.loss.name()
        )));
    }
    let g0 = inner_sup(history, draw, S::zero(), class, config)?;
    let g1 = inner_sup(history, draw, S::one(), class, config)?;
    Ok(Prediction { value: binary_yhat(g0, g1), erm_calls: 2 })
}

pub(crate) fn binary_yhat<S: Scalar>(g0: S, g1: S) -> S {
    ((S::one() + g1 - g0) * S::half()).clamp_unit()
}

/// Fast path when enabled and applicable, general path otherwise.
pub fn predict<S: Scalar, C: HypothesisClass<S> + ?Sized>(
    history: GameHistory<'_, S>,
    draw: &RelaxationDraw<S>,
    class: &C,
    config: &PredictorConfig<S>,
) -> Result<Prediction<S>> {
    if config.fast_binary_path && class.is_binary() && config.loss.is_absolute() {
        predict_binary_fast(history, draw, class, config)
    } else {
        predict_general(history, draw, class, config)
    }
}

/// The outer objective `φ` at `yhat`, on the same grid as the general path.
pub fn outer_objective<S: Scalar, C: HypothesisClass<S> + ?Sized>(
    history: GameHistory<'_, S>,
    draw: &RelaxationDraw<S>,
    class: &C,
    config: &PredictorConfig<S>,
    yhat: S,
) -> Result<S> {
    let grid = unit_grid(config.y_grid_step);
    let g = grid.iter().map(|&y| inner_sup(history, draw, y, class, config)).collect::<Result<Vec<S>>>()?;
    Ok(Outer { grid: &grid, g: &g, loss: &config.loss }.phi(yhat))
}

/// `R_j`: Monte-Carlo mean of `sup_h [2L Σ_{i>j} ε_i h(x̃_i) − L_j^h]`.
///
/// `history` holds the first `j` rounds; the hallucination count is
/// `M − j` with `M = config.horizon`.
pub fn relaxation_r<S: Scalar, C: HypothesisClass<S> + ?Sized, R: Rng + ?Sized>(
    history: &[LabeledPair<S>],
    pool: &SidePool<S>,
    class: &C,
    config: &PredictorConfig<S>,
    mode: DrawMode,
    mc_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    let j = history.len();
    let count = remaining(config.horizon, j)?;
    if count == 0 {
        return Ok(McEstimate::exact(neg_sup(class, history.to_vec(), vec![], config)?.as_f64()));
    }
    let mut vals = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples.max(1) {
        let draw = draw_halluc_with(pool, count, mode, rng)?;
        vals.push(antithetic(class, history, draw.signed_terms().collect(), config)?);
    }
    Ok(McEstimate::from_samples(&vals))
}

/// `R̃_j`: as [`relaxation_r`] with position `j+1` drawn from the true
/// distribution through `sample_true`.
#[allow(clippy::too_many_arguments)]
pub fn relaxation_rtilde<S, C, R, F>(
    history: &[LabeledPair<S>],
    pool: &SidePool<S>,
    mut sample_true: F,
    class: &C,
    config: &PredictorConfig<S>,
    mode: DrawMode,
    mc_samples: usize,
    rng: &mut R,
) -> Result<McEstimate>
where
    S: Scalar,
    C: HypothesisClass<S> + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Feature<S>,
{
    let j = history.len();
    let count = remaining(config.horizon, j)?;
    if count == 0 {
        return Err(Error::Config(format!("R̃_j needs j < M, got j = M = {j}")));
    }
    let mut vals = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples.max(1) {
        let x = sample_true(rng);
        let tail = draw_halluc_with(pool, count - 1, mode, rng)?;
        let mut signed = vec![SignedTerm::new(Sign::random(rng), x)];
        signed.extend(tail.signed_terms());
        vals.push(antithetic(class, history, signed, config)?);
    }
    Ok(McEstimate::from_samples(&vals))
}

fn remaining(horizon: usize, j: usize) -> Result<usize> {
    horizon.checked_sub(j).ok_or_else(|| Error::Config(format!("history of {j} rounds exceeds horizon {horizon}")))
}

/// `f(x) = sup_h { 2L ε_{j+1} h(x) + 2L Σ_{i≥j+2} ε_i h(x̃_i) − L_j^h }`.
///
/// `signs[0]` is `ε_{j+1}`; the rest pair with `tail`.
pub fn f_eval<S: Scalar, C: HypothesisClass<S> + ?Sized>(
    history: &[LabeledPair<S>],
    tail: &[Feature<S>],
    signs: &[Sign],
    x: &Feature<S>,
    class: &C,
    loss: &Loss<S>,
) -> Result<S> {
    if signs.len() != tail.len() + 1 {
        return Err(Error::Config(format!("f needs {} signs for a tail of {}, got {}", tail.len() + 1, tail.len(), signs.len())));
    }
    let mut signed = vec![SignedTerm::new(signs[0], x.clone())];
    signed.extend(signs[1..].iter().zip(tail).map(|(&s, t)| SignedTerm::new(s, t.clone())));
    let q = MixedErmQuery::new(history.to_vec(), signed, S::two() * loss.lipschitz(), loss.clone())?.negated_signs();
    Ok(-class.solve(&q)?.objective)
}
