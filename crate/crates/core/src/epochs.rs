//! Epoch schedules and the epoch predictor.
//!
//! Epoch `n` covers rounds `S(n)+1 ..= S(n)+M(n)` with `S(n) = Σ_{i<n} M(i)`.
//! Inside it the predictor plays a fresh side-information game of horizon
//! `M(n)` whose pool is every feature seen up to `S(n)`.

use serde::{Deserialize, Serialize};

use crate::domain::{best_in_hindsight, HypothesisClass, LabeledPair, Metered};
use crate::environment::{label, sample_feature, Adversary, FeatureProcess, LabelContext};
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::predictor::{draw_halluc_with, predict, DrawMode, GameHistory, PredictorConfig, SidePool};
use crate::rng::{stream, tag};
use crate::scalar::Scalar;
use crate::trace::{RegretTrace, SegmentRegret, TraceMeta, TraceRow};

/// Largest polynomial exponent accepted.
pub const ALPHA_CAP: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpochSchedule {
    /// `M(n) = round(n^α)`.
    Polynomial { alpha: f64 },
    /// `M(n) = round(r^n)`.
    Geometric { ratio: f64 },
    /// `M(n) = B`.
    Fixed { block: usize },
}

/// `α = 1/(2(1−q))`.
pub fn alpha_from_q(q: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&q) {
        return Err(Error::Config(format!("q must lie in [1/2, 1), got {q}")));
    }
    let alpha = 1.0 / (2.0 * (1.0 - q));
    if alpha > ALPHA_CAP {
        return Err(Error::Config(format!("q = {q} gives α = {alpha} above the cap {ALPHA_CAP}")));
    }
    Ok(alpha)
}

fn round_half_up(v: f64) -> usize {
    (v + 0.5).floor().max(1.0) as usize
}

/// Position of a round inside the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochIndex {
    pub n: usize,
    pub j: usize,
    /// `S(n)`.
    pub s: usize,
}

impl EpochSchedule {
    pub fn polynomial(alpha: f64) -> Result<Self> {
        if !(1.0..=ALPHA_CAP).contains(&alpha) {
            return Err(Error::Config(format!("α must lie in [1, {ALPHA_CAP}], got {alpha}")));
        }
        Ok(Self::Polynomial { alpha })
    }

    pub fn from_q(q: f64) -> Result<Self> {
        Self::polynomial(alpha_from_q(q)?)
    }

    pub fn geometric(ratio: f64) -> Result<Self> {
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(Error::Config(format!("geometric ratio must exceed 1, got {ratio}")));
        }
        Ok(Self::Geometric { ratio })
    }

    pub fn fixed(block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::Config("fixed block must be ≥ 1".into()));
        }
        Ok(Self::Fixed { block })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Polynomial { alpha } => Self::polynomial(alpha).map(drop),
            Self::Geometric { ratio } => Self::geometric(ratio).map(drop),
            Self::Fixed { block } => Self::fixed(block).map(drop),
        }
    }

    /// Unrounded `M(n)`.
    pub fn real_length(&self, n: usize) -> f64 {
        match *self {
            Self::Polynomial { alpha } => (n as f64).powf(alpha),
            Self::Geometric { ratio } => ratio.powi(n as i32),
            Self::Fixed { block } => block as f64,
        }
    }

    /// `M(n)`, rounded half up and at least 1.
    pub fn epoch_length(&self, n: usize) -> usize {
        assert!(n >= 1, "epochs are numbered from 1");
        match *self {
            Self::Fixed { block } => block,
            _ => round_half_up(self.real_length(n)),
        }
    }

    /// `S(n) = Σ_{i<n} M(i)`.
    pub fn start(&self, n: usize) -> usize {
        (1..n).map(|i| self.epoch_length(i)).sum()
    }

    /// Unrounded `S(n)`.
    pub fn real_start(&self, n: usize) -> f64 {
        (1..n).map(|i| self.real_length(i)).sum()
    }

    /// Accumulated rounding drift `S(n) − S_real(n)`.
    pub fn drift(&self, n: usize) -> f64 {
        self.start(n) as f64 - self.real_start(n)
    }

    /// The unique `(n, j)` with `S(n) < t ≤ S(n+1)` and `j = t − S(n)`.
    pub fn locate(&self, t: usize) -> EpochIndex {
        assert!(t >= 1, "rounds are numbered from 1");
        let (mut n, mut s) = (1, 0);
        loop {
            let m = self.epoch_length(n);
            if t <= s + m {
                return EpochIndex { n, j: t - s, s };
            }
            s += m;
            n += 1;
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Self::Polynomial { alpha } => format!("polynomial(alpha={alpha})"),
            Self::Geometric { ratio } => format!("geometric(ratio={ratio})"),
            Self::Fixed { block } => format!("fixed(block={block})"),
        }
    }
}

/// Settings shared by the online and shifting runners.
#[derive(Debug, Clone)]
pub struct GameSettings<S> {
    pub horizon: usize,
    pub loss: Loss<S>,
    pub schedule: EpochSchedule,
    pub seed: u64,
    /// Overrides the `1/(L√M)` default of each epoch.
    pub y_grid_step: Option<S>,
    pub yhat_tolerance: Option<S>,
    pub fast_binary_path: bool,
    pub probe_samples: usize,
    pub draw_mode: DrawMode,
}

impl<S: Scalar> GameSettings<S> {
    pub fn new(horizon: usize, loss: Loss<S>, schedule: EpochSchedule, seed: u64) -> Self {
        Self {
            horizon,
            loss,
            schedule,
            seed,
            y_grid_step: None,
            yhat_tolerance: None,
            fast_binary_path: true,
            probe_samples: 64,
            draw_mode: DrawMode::WithoutReplacement,
        }
    }

    pub(crate) fn predictor_config(&self, m: usize) -> Result<PredictorConfig<S>> {
        let mut cfg =
            PredictorConfig::new(m, self.loss.clone())?.with_fast_binary_path(self.fast_binary_path).with_seed(self.seed);
        if self.y_grid_step.is_some() || self.yhat_tolerance.is_some() {
            let step = self.y_grid_step.unwrap_or(cfg.y_grid_step);
            let tol = self.yhat_tolerance.unwrap_or(cfg.yhat_tolerance);
            cfg = cfg.with_grid(step, tol)?;
        }
        Ok(cfg)
    }
}

/// Plays the epoch predictor for `settings.horizon` rounds.
pub fn run_epoch_predictor<S, C, A>(
    class: &C,
    process: &FeatureProcess<S>,
    adversary: &A,
    settings: &GameSettings<S>,
) -> Result<RegretTrace<S>>
where
    S: Scalar,
    C: HypothesisClass<S>,
    A: Adversary<S> + ?Sized,
{
    run_blocks(class, process, adversary, settings, settings.horizon.max(1))
}

/// Splits the horizon into blocks of `block_len` rounds and restarts the
/// epoch predictor in each; nothing learned crosses a block boundary.
pub(crate) fn run_blocks<S, C, A>(
    class: &C,
    process: &FeatureProcess<S>,
    adversary: &A,
    settings: &GameSettings<S>,
    block_len: usize,
) -> Result<RegretTrace<S>>
where
    S: Scalar,
    C: HypothesisClass<S>,
    A: Adversary<S> + ?Sized,
{
    let t_max = settings.horizon;
    if t_max == 0 {
        return Err(Error::Config("horizon must be ≥ 1".into()));
    }
    if block_len == 0 {
        return Err(Error::Config("block length must be ≥ 1".into()));
    }
    settings.schedule.validate()?;
    let loss = &settings.loss;
    let seed = settings.seed;
    let metered = Metered::new(class);

    let mut xs = Vec::with_capacity(t_max);
    let mut ys: Vec<S> = Vec::with_capacity(t_max);
    let mut yhats: Vec<S> = Vec::with_capacity(t_max);
    let mut rows: Vec<TraceRow<S>> = Vec::with_capacity(t_max);
    let mut pairs: Vec<LabeledPair<S>> = Vec::with_capacity(t_max);

    let mut pool = SidePool::default();
    let mut epoch_pairs: Vec<LabeledPair<S>> = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut segment_starts: Vec<(usize, usize, usize)> = Vec::new();
    let mut drift = Vec::new();
    let mut clamped_rounds = 0;

    for t in 1..=t_max {
        let block = (t - 1) / block_len;
        let bstart = block * block_len;
        let idx = settings.schedule.locate(t - bstart);
        let mut frng = stream(seed, tag::FEATURE, t as u64);
        xs.push(sample_feature(process, t, &mut frng));

        if current != Some((block, idx.n)) {
            current = Some((block, idx.n));
            pool = SidePool::new(xs[bstart..bstart + idx.s].to_vec());
            epoch_pairs.clear();
            segment_starts.push((block, idx.n, t));
            if block == 0 {
                drift.push((idx.n, settings.schedule.drift(idx.n)));
            }
        }

        let m = settings.schedule.epoch_length(idx.n);
        let wanted = m - idx.j;
        let count = wanted.min(pool.len());
        if count < wanted {
            clamped_rounds += 1;
        }
        let cfg = settings.predictor_config(m)?;
        let x = xs[t - 1].clone();
        let history = GameHistory { rounds: &epoch_pairs, current: &x };
        let mut drng = stream(seed, tag::DRAW, t as u64);
        let draw = draw_halluc_with(&pool, count, settings.draw_mode, &mut drng)?;
        let before = metered.calls();
        let pred = predict(history, &draw, &metered, &cfg)?;
        let calls = metered.calls() - before;
        let fast = cfg.fast_binary_path && class.is_binary() && loss.is_absolute();
        let budget = if fast { 2 } else { cfg.general_budget() as u64 };
        if calls != pred.erm_calls as u64 || calls > budget {
            return Err(Error::Invariant(format!("round {t}: {calls} oracle calls against a budget of {budget}")));
        }

        let mut probe_cache: Option<S> = None;
        let mut probe = || -> Result<S> {
            if let Some(v) = probe_cache {
                return Ok(v);
            }
            let mut prng = stream(seed, tag::PROBE, t as u64);
            let n = settings.probe_samples.max(1);
            let mut acc = S::zero();
            for _ in 0..n {
                let d = draw_halluc_with(&pool, count, settings.draw_mode, &mut prng)?;
                acc = acc + predict(history, &d, class, &cfg)?.value;
            }
            let v = acc / S::from_usize_lossy(n);
            probe_cache = Some(v);
            Ok(v)
        };
        let ctx = LabelContext { t, features: &xs, labels: &ys, predictions: &yhats };
        let mut arng = stream(seed, tag::ADVERSARY, t as u64);
        let y = label(adversary, &ctx, &mut probe, &mut arng)?;

        let l = loss.value(pred.value, y);
        let pair = LabeledPair::new(x.clone(), y)?;
        epoch_pairs.push(pair.clone());
        pairs.push(pair);
        ys.push(y);
        yhats.push(pred.value);
        rows.push(TraceRow {
            t,
            epoch: idx.n,
            j: idx.j,
            block,
            x,
            y,
            yhat: pred.value,
            loss: l,
            cum_loss: S::zero(),
            comparator_loss: S::zero(),
            cum_regret: S::zero(),
            erm_calls: calls,
        });
    }

    let best = best_in_hindsight(class, &pairs, loss)?;
    let (mut cl, mut cr) = (S::zero(), S::zero());
    for r in rows.iter_mut() {
        r.comparator_loss = loss.value(class.evaluate(&best.hypothesis, &r.x), r.y);
        cl = cl + r.loss;
        cr = cr + r.loss - r.comparator_loss;
        r.cum_loss = cl;
        r.cum_regret = cr;
    }
    let comparator_loss: f64 = rows.iter().map(|r| r.comparator_loss.as_f64()).sum();
    let regret = cr.as_f64();

    let mut segments = Vec::with_capacity(segment_starts.len());
    for (k, &(block, epoch, start)) in segment_starts.iter().enumerate() {
        let end = segment_starts.get(k + 1).map_or(t_max + 1, |s| s.2);
        let seg = &pairs[start - 1..end - 1];
        let learner_loss: f64 = rows[start - 1..end - 1].iter().map(|r| r.loss.as_f64()).sum();
        let comp = best_in_hindsight(class, seg, loss)?.objective.as_f64();
        segments.push(SegmentRegret { block, epoch, start, len: end - start, learner_loss, comparator_loss: comp });
    }
    let seg_sum: f64 = segments.iter().map(SegmentRegret::regret).sum();
    let slack = class.tolerance().as_f64() * (segments.len() + 1) as f64 + 1e-9 * t_max as f64;
    if regret > seg_sum + slack {
        return Err(Error::Invariant(format!("global regret {regret} exceeds the sum of epoch regrets {seg_sum}")));
    }

    let erm_calls_total = metered.calls();
    let meta = TraceMeta {
        seed,
        horizon: t_max,
        class: class.name(),
        adversary: adversary.name(),
        schedule: settings.schedule.describe(),
        rounding: "round_half_up".into(),
        block_len,
        comparator_loss,
        regret,
        erm_calls_total,
        clamped_rounds,
        drift,
        segments,
        change_points: process.change_points(),
        extrapolation: block_len < t_max && !class.is_binary(),
    };
    Ok(RegretTrace { rows, meta })
}
