//! Contextual K-armed bandits with stochastic contexts and adversarial costs.
//!
//! Each round hallucinates future contexts from the pool with sign vectors
//! `ε_i ∈ {±1}^K` and scales `Z_i ∈ {0, 1/γ}`, computes `Φ_0..Φ_K` with
//! `K + 1` policy-ERM calls, water-fills the minimax distribution, mixes in
//! uniform exploration and feeds an importance-weighted cost estimate back
//! into the history.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Feature, Sign};
use crate::environment::{sample_feature, FeatureProcess};
use crate::error::{Error, Result};
use crate::predictor::{draw_halluc, SidePool};
use crate::rng::{stream, tag, GameRng};
use crate::scalar::Scalar;

type PolicyFn<S> = Arc<dyn Fn(&Feature<S>) -> usize + Send + Sync>;

/// A finite set of policies `𝒳 → {0, …, K−1}`.
pub struct PolicyClass<S> {
    arms: usize,
    policies: Vec<PolicyFn<S>>,
    names: Vec<String>,
    calls: AtomicU64,
}

impl<S: Scalar> PolicyClass<S> {
    pub fn new(arms: usize, policies: Vec<(String, PolicyFn<S>)>) -> Result<Self> {
        if arms < 2 {
            return Err(Error::Config(format!("bandits need K ≥ 2 arms, got {arms}")));
        }
        if policies.is_empty() {
            return Err(Error::EmptyInput("policy class"));
        }
        let (names, policies) = policies.into_iter().unzip();
        Ok(Self { arms, policies, names, calls: AtomicU64::new(0) })
    }

    /// One constant policy per arm.
    pub fn constant_arms(arms: usize) -> Result<Self> {
        let ps = (0..arms).map(|k| (format!("always({k})"), Arc::new(move |_: &Feature<S>| k) as PolicyFn<S>)).collect();
        Self::new(arms, ps)
    }

    /// Two arms: always 0, always 1, `1{x₀ ≥ θ}` and `1{x₀ < θ}`.
    pub fn threshold_pack(theta: S) -> Result<Self> {
        let thr = move |x: &Feature<S>| usize::from(x.coords()[0] >= theta);
        let ps: Vec<(String, PolicyFn<S>)> = vec![
            ("always(0)".into(), Arc::new(|_: &Feature<S>| 0)),
            ("always(1)".into(), Arc::new(|_: &Feature<S>| 1)),
            (format!("threshold({theta})"), Arc::new(thr)),
            (format!("reverse({theta})"), Arc::new(move |x: &Feature<S>| 1 - thr(x))),
        ];
        Self::new(2, ps)
    }

    /// Policies given as arm tables over a finite support; off-support
    /// features get arm 0.
    pub fn from_table(arms: usize, support: Vec<Feature<S>>, table: Vec<Vec<usize>>) -> Result<Self> {
        let support = Arc::new(support);
        let mut ps = Vec::with_capacity(table.len());
        for (i, row) in table.into_iter().enumerate() {
            if row.len() != support.len() || row.iter().any(|&a| a >= arms) {
                return Err(Error::Config(format!("policy {i} has a malformed arm table")));
            }
            let sup = Arc::clone(&support);
            ps.push((
                format!("table({i})"),
                Arc::new(move |x: &Feature<S>| sup.iter().position(|s| s == x).map_or(0, |p| row[p])) as PolicyFn<S>,
            ));
        }
        Self::new(arms, ps)
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn name_of(&self, h: usize) -> &str {
        &self.names[h]
    }

    pub fn act(&self, h: usize, x: &Feature<S>) -> usize {
        (self.policies[h])(x)
    }

    /// Oracle calls made so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// `inf_h Σ w_i[h(x_i)]`, lowest index on ties. Counted.
    pub fn policy_erm(&self, pairs: &[(Feature<S>, Vec<S>)]) -> (usize, S) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.erm_uncounted(pairs)
    }

    fn erm_uncounted(&self, pairs: &[(Feature<S>, Vec<S>)]) -> (usize, S) {
        let mut best = (0, S::infinity());
        for h in 0..self.policies.len() {
            let v: S = pairs.iter().map(|(x, w)| w[self.act(h, x)]).sum();
            if v < best.1 {
                best = (h, v);
            }
        }
        best
    }

    /// Objective of policy `h`, summed independently of the oracle.
    pub fn objective_of(&self, h: usize, pairs: &[(Feature<S>, Vec<S>)]) -> S {
        pairs.iter().map(|(x, w)| w[self.act(h, x)]).sum()
    }
}

impl<S> fmt::Debug for PolicyClass<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolicyClass").field("arms", &self.arms).field("policies", &self.names).finish()
    }
}

/// True costs of one round, in `[0,1]^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector<S>(Vec<S>);

impl<S: Scalar> CostVector<S> {
    pub fn new(c: Vec<S>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::EmptyInput("cost vector"));
        }
        if let Some(v) = c.iter().find(|v| !v.in_unit()) {
            return Err(Error::InputDomain(format!("cost {v} outside [0,1]")));
        }
        Ok(Self(c))
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }
}

/// `ĉ = (1/γ)·I·e_ŷ`: either zero or `1/γ` on one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedCost<S> {
    pub arm: Option<usize>,
    pub scale: S,
}

impl<S: Scalar> EstimatedCost<S> {
    pub fn zero() -> Self {
        Self { arm: None, scale: S::zero() }
    }

    pub fn hit(arm: usize, gamma: S) -> Self {
        Self { arm: Some(arm), scale: S::one() / gamma }
    }

    pub fn to_vec(&self, arms: usize) -> Vec<S> {
        let mut v = vec![S::zero(); arms];
        if let Some(a) = self.arm {
            v[a] = self.scale;
        }
        v
    }
}

/// `(ln|ℋ| / (K·M))^{1/3}` clipped to `(0, 1/K]`.
pub fn gamma_default(class_size: usize, arms: usize, horizon: usize) -> f64 {
    let g = ((class_size as f64).ln() / (arms as f64 * horizon.max(1) as f64)).cbrt();
    let cap = 1.0 / arms as f64;
    if g.is_finite() && g > 0.0 {
        g.min(cap)
    } else {
        cap
    }
}

/// One round's playout randomness.
#[derive(Debug, Clone)]
pub struct BanditDraw<S> {
    pub halluc: Vec<Feature<S>>,
    pub signs: Vec<Vec<Sign>>,
    pub z: Vec<S>,
}

impl<S: Scalar> BanditDraw<S> {
    pub fn empty() -> Self {
        Self { halluc: vec![], signs: vec![], z: vec![] }
    }

    pub fn sample<R: Rng + ?Sized>(pool: &SidePool<S>, count: usize, arms: usize, gamma: S, rng: &mut R) -> Result<Self> {
        let base = draw_halluc(pool, count, rng)?;
        let p_big = (gamma * S::from_usize_lossy(arms)).as_f64().clamp(0.0, 1.0);
        let big = S::one() / gamma;
        let signs = (0..count).map(|_| (0..arms).map(|_| Sign::random(rng)).collect()).collect();
        let z = (0..count).map(|_| if rng.gen_bool(p_big) { big } else { S::zero() }).collect();
        Ok(Self { halluc: base.halluc, signs, z })
    }

    /// The weight vectors `2·Z_i·ε_i` paired with `x̃_i`.
    pub fn weighted(&self) -> impl Iterator<Item = (Feature<S>, Vec<S>)> + '_ {
        self.halluc
            .iter()
            .zip(&self.signs)
            .zip(&self.z)
            .map(|((x, e), &z)| (x.clone(), e.iter().map(|s| S::two() * z * s.value::<S>()).collect()))
    }
}

/// `Φ_0` with `ĉ_j = 0` and `Φ_k` with `ĉ_j = (1/γ)e_k`: exactly `K + 1` oracle calls.
pub fn phi_values<S: Scalar>(
    history: &[(Feature<S>, EstimatedCost<S>)],
    x: &Feature<S>,
    draw: &BanditDraw<S>,
    class: &PolicyClass<S>,
    gamma: S,
) -> Vec<S> {
    let k = class.arms();
    let mut pairs: Vec<(Feature<S>, Vec<S>)> = history.iter().map(|(x, c)| (x.clone(), c.to_vec(k))).collect();
    pairs.extend(draw.weighted());
    pairs.push((x.clone(), vec![S::zero(); k]));
    let last = pairs.len() - 1;
    let mut out = Vec::with_capacity(k + 1);
    out.push(class.policy_erm(&pairs).1);
    for arm in 0..k {
        pairs[last].1 = EstimatedCost::hit(arm, gamma).to_vec(k);
        out.push(class.policy_erm(&pairs).1);
    }
    out
}

/// Minimizer of `g(q) = Σ_k max(0, q_k − max(b_k, 0))` over the simplex, with `g`.
pub fn waterfill_q<S: Scalar>(b: &[S]) -> (Vec<S>, S) {
    let k = S::from_usize_lossy(b.len());
    let pos: Vec<S> = b.iter().map(|&v| v.max(S::zero())).collect();
    let s: S = pos.iter().copied().sum();
    if s >= S::one() {
        (pos.iter().map(|&v| v / s).collect(), S::zero())
    } else {
        let fill = (S::one() - s) / k;
        (pos.iter().map(|&v| v + fill).collect(), S::one() - s)
    }
}

/// `g(q)` for an arbitrary `q`.
pub fn waterfill_objective<S: Scalar>(q: &[S], b: &[S]) -> S {
    q.iter().zip(b).map(|(&q, &b)| (q - b.max(S::zero())).max(S::zero())).sum()
}

/// The step-2 objective `sup_{p ∈ D′} E[⟨q, ĉ⟩ − Φ(ĉ)] + γ(M−j)K`, maximized
/// over `D′` by brute force over its vertices. Used to cross-check the
/// closed-form reduction.
pub fn step2_objective<S: Scalar>(q: &[S], phi: &[S], gamma: S, remaining: usize) -> S {
    let k = q.len();
    let konst = gamma * S::from_usize_lossy(remaining * k);
    let mut best = S::neg_infinity();
    // D′ is a polytope whose vertices put mass γ on a subset of arms.
    for mask in 0u32..(1 << k) {
        let mut v = S::zero();
        let mut mass = S::zero();
        for a in 0..k {
            if mask & (1 << a) != 0 {
                v = v + gamma * (q[a] / gamma - phi[a + 1]);
                mass = mass + gamma;
            }
        }
        if mass > S::one() + S::lit(1e-12) {
            continue;
        }
        v = v + (S::one() - mass) * (-phi[0]);
        best = best.max(v);
    }
    best + konst
}

/// `(1 − γK)·q̂ + γ·1`.
pub fn mix_q<S: Scalar>(qhat: &[S], gamma: S) -> Vec<S> {
    let k = S::from_usize_lossy(qhat.len());
    qhat.iter().map(|&v| (S::one() - gamma * k) * v + gamma).collect()
}

/// `I ~ Bernoulli(γ·c[ŷ]/q[ŷ])`, `ĉ = (1/γ)·I·e_ŷ`.
pub fn estimate_cost<S: Scalar, R: Rng + ?Sized>(
    arm: usize,
    cost: S,
    q: &[S],
    gamma: S,
    rng: &mut R,
) -> Result<EstimatedCost<S>> {
    let qa = q[arm];
    if qa < gamma * (S::one() - S::lit(1e-9)) {
        return Err(Error::Invariant(format!("q[{arm}] = {qa} below γ = {gamma}")));
    }
    let p = (gamma * cost / qa).as_f64().clamp(0.0, 1.0);
    Ok(if rng.gen_bool(p) { EstimatedCost::hit(arm, gamma) } else { EstimatedCost::zero() })
}

/// Samples an arm from `q`.
pub fn sample_arm<S: Scalar, R: Rng + ?Sized>(q: &[S], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in q.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return k;
        }
    }
    q.len() - 1
}

/// Chooses the cost vector of round `t` for context `x`.
pub trait CostAdversary<S: Scalar>: Send + Sync {
    fn name(&self) -> String;

    fn costs(&self, t: usize, x: &Feature<S>, rng: &mut GameRng) -> Result<CostVector<S>>;
}

/// Named cost adversaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CostSpec {
    /// Fixed cost vector every round.
    Constant { costs: Vec<f64> },
    /// Arm `1{x₀ ≥ θ}` costs `(1−gap)/2`, every other arm `(1+gap)/2`.
    ThresholdGap { threshold: f64, gap: f64 },
}

impl<S: Scalar> CostAdversary<S> for CostSpec {
    fn name(&self) -> String {
        match self {
            Self::Constant { costs } => format!("constant_costs({costs:?})"),
            Self::ThresholdGap { threshold, gap } => format!("threshold_gap(theta={threshold},gap={gap})"),
        }
    }

    fn costs(&self, _t: usize, x: &Feature<S>, _rng: &mut GameRng) -> Result<CostVector<S>> {
        match self {
            Self::Constant { costs } => CostVector::new(costs.iter().map(|&c| S::lit(c)).collect()),
            Self::ThresholdGap { threshold, gap } => {
                let good = usize::from(x.coords()[0].as_f64() >= *threshold);
                let lo = S::lit((1.0 - gap) / 2.0);
                let hi = S::lit((1.0 + gap) / 2.0);
                CostVector::new((0..2).map(|k| if k == good { lo } else { hi }).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaChoice {
    /// `gamma_default` per epoch with `M = M(n)`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct BanditConfig {
    pub horizon: usize,
    pub gamma: GammaChoice,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditRow<S> {
    pub t: usize,
    pub epoch: usize,
    pub j: usize,
    pub arm: usize,
    pub gamma: S,
    pub q: Vec<S>,
    /// `⟨q_t, c_t⟩`.
    pub expected_loss: S,
    pub realized_cost: S,
    pub comparator_cost: S,
    pub cum_regret: S,
    pub erm_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BanditMeta {
    pub seed: u64,
    pub horizon: usize,
    pub arms: usize,
    pub policies: usize,
    pub adversary: String,
    pub comparator: String,
    pub regret: f64,
    pub erm_calls_total: u64,
    pub clamped_rounds: usize,
}

#[derive(Debug, Clone)]
pub struct BanditTrace<S> {
    pub rows: Vec<BanditRow<S>>,
    pub meta: BanditMeta,
}

impl<S: Scalar> BanditTrace<S> {
    pub fn regret(&self) -> f64 {
        self.meta.regret
    }
}

/// Epoch lengths `round(n^{3/2})`.
pub fn bandit_schedule() -> crate::epochs::EpochSchedule {
    crate::epochs::EpochSchedule::Polynomial { alpha: 1.5 }
}

/// Plays the epoch-wrapped bandit predictor for `config.horizon` rounds.
pub fn run_bandit<S: Scalar, A: CostAdversary<S> + ?Sized>(
    class: &PolicyClass<S>,
    process: &FeatureProcess<S>,
    adversary: &A,
    config: &BanditConfig,
) -> Result<BanditTrace<S>> {
    let t_max = config.horizon;
    if t_max == 0 {
        return Err(Error::Config("horizon must be ≥ 1".into()));
    }
    let k = class.arms();
    let schedule = bandit_schedule();
    let seed = config.seed;
    let calls_start = class.calls();

    let mut xs: Vec<Feature<S>> = Vec::with_capacity(t_max);
    let mut true_costs: Vec<(Feature<S>, Vec<S>)> = Vec::with_capacity(t_max);
    let mut rows: Vec<BanditRow<S>> = Vec::with_capacity(t_max);
    let mut pool = SidePool::default();
    let mut est: Vec<(Feature<S>, EstimatedCost<S>)> = Vec::new();
    let mut epoch = 0;
    let mut clamped_rounds = 0;

    for t in 1..=t_max {
        let idx = schedule.locate(t);
        let mut frng = stream(seed, tag::FEATURE, t as u64);
        let x = sample_feature(process, t, &mut frng);
        xs.push(x.clone());
        if idx.n != epoch {
            epoch = idx.n;
            pool = SidePool::new(xs[..idx.s].to_vec());
            est.clear();
        }
        let m = schedule.epoch_length(idx.n);
        let gamma = match config.gamma {
            GammaChoice::Auto => S::lit(gamma_default(class.len(), k, m)),
            GammaChoice::Fixed(g) => {
                if !(g > 0.0 && g * k as f64 <= 1.0 + 1e-12) {
                    return Err(Error::Config(format!("γ = {g} must lie in (0, 1/K]")));
                }
                S::lit(g)
            }
        };
        let wanted = m - idx.j;
        let count = wanted.min(pool.len());
        if count < wanted {
            clamped_rounds += 1;
        }
        let mut drng = stream(seed, tag::DRAW, t as u64);
        let draw = BanditDraw::sample(&pool, count, k, gamma, &mut drng)?;
        let before = class.calls();
        let phi = phi_values(&est, &x, &draw, class, gamma);
        let calls = class.calls() - before;
        if calls != (k + 1) as u64 {
            return Err(Error::Invariant(format!("round {t}: {calls} policy-ERM calls, expected {}", k + 1)));
        }
        let b: Vec<S> = (0..k).map(|a| gamma * (phi[a + 1] - phi[0])).collect();
        let (qhat, _) = waterfill_q(&b);
        let q = mix_q(&qhat, gamma);
        if q.iter().any(|&v| v < gamma * (S::one() - S::lit(1e-9))) {
            return Err(Error::Invariant(format!("round {t}: q below the exploration floor")));
        }
        let mut arng = stream(seed, tag::ARM, t as u64);
        let arm = sample_arm(&q, &mut arng);
        let mut crng = stream(seed, tag::ADVERSARY, t as u64);
        let c = adversary.costs(t, &x, &mut crng)?;
        if c.as_slice().len() != k {
            return Err(Error::AdversaryFault { round: t, reason: format!("{} costs for {k} arms", c.as_slice().len()) });
        }
        let mut erng = stream(seed, tag::ESTIMATE, t as u64);
        let chat = estimate_cost(arm, c.as_slice()[arm], &q, gamma, &mut erng)?;
        est.push((x.clone(), chat));
        let expected_loss: S = q.iter().zip(c.as_slice()).map(|(&p, &v)| p * v).sum();
        rows.push(BanditRow {
            t,
            epoch: idx.n,
            j: idx.j,
            arm,
            gamma,
            q,
            expected_loss,
            realized_cost: c.as_slice()[arm],
            comparator_cost: S::zero(),
            cum_regret: S::zero(),
            erm_calls: calls,
        });
        true_costs.push((x, c.0));
    }

    let (best, _) = class.erm_uncounted(&true_costs);
    let mut cr = S::zero();
    for (r, (x, c)) in rows.iter_mut().zip(&true_costs) {
        r.comparator_cost = c[class.act(best, x)];
        cr = cr + r.expected_loss - r.comparator_cost;
        r.cum_regret = cr;
    }
    let meta = BanditMeta {
        seed,
        horizon: t_max,
        arms: k,
        policies: class.len(),
        adversary: adversary.name(),
        comparator: class.name_of(best).to_owned(),
        regret: cr.as_f64(),
        erm_calls_total: class.calls() - calls_start,
        clamped_rounds,
    };
    Ok(BanditTrace { rows, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::FeatureDistribution;

    fn f(v: f64) -> Feature<f64> {
        Feature::scalar(v).unwrap()
    }

    #[test]
    fn gamma_examples() {
        assert!((gamma_default(100, 10, 1000) - 0.0772).abs() < 1e-4);
        assert_eq!(gamma_default(3, 2, 1), 0.5);
        assert!(gamma_default(4, 2, 2000) < gamma_default(4, 2, 1000));
    }

    #[test]
    fn policy_erm_examples() {
        let c = PolicyClass::<f64>::constant_arms(2).unwrap();
        assert_eq!(c.policy_erm(&[(f(0.3), vec![1.0, 0.0])]), (1, 0.0));
        assert_eq!(c.policy_erm(&[(f(0.3), vec![0.0, 0.0])]), (0, 0.0));
        assert_eq!(c.calls(), 2);
    }

    #[test]
    fn waterfill_examples() {
        let (q, g) = waterfill_q(&[0.3f64, 0.2]);
        assert!((q[0] - 0.55).abs() < 1e-12 && (q[1] - 0.45).abs() < 1e-12 && (g - 0.5).abs() < 1e-12);
        let (q, g) = waterfill_q(&[1.5f64, 0.5]);
        assert_eq!((q, g), (vec![0.75, 0.25], 0.0));
        let (q, g) = waterfill_q(&[0.0f64, 0.0, 0.0]);
        assert!(q.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12));
        assert_eq!(g, 1.0);
    }

    #[test]
    fn mixing_examples() {
        assert_eq!(mix_q(&[1.0f64, 0.0], 0.5), vec![0.5, 0.5]);
        assert_eq!(mix_q(&[0.3f64, 0.7], 0.0), vec![0.3, 0.7]);
        let q = mix_q(&[1.0f64, 0.0], 0.1);
        assert!((q[0] - 0.9).abs() < 1e-12 && (q[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn estimator_edge_cases() {
        let mut rng = stream(1, tag::ESTIMATE, 0);
        assert_eq!(estimate_cost(0, 0.0f64, &[0.5, 0.5], 0.25, &mut rng).unwrap(), EstimatedCost::zero());
        let e = estimate_cost(1, 1.0f64, &[0.75, 0.25], 0.25, &mut rng).unwrap();
        assert_eq!(e, EstimatedCost::hit(1, 0.25));
        assert!(estimate_cost(1, 1.0f64, &[0.9, 0.1], 0.25, &mut rng).is_err());
    }

    #[test]
    fn zero_draw_phi() {
        let c = PolicyClass::<f64>::constant_arms(2).unwrap();
        let phi = phi_values(&[], &f(0.5), &BanditDraw::empty(), &c, 0.5);
        assert_eq!(phi, vec![0.0, 0.0, 0.0]);
        let single = PolicyClass::<f64>::new(2, vec![("one".into(), Arc::new(|_: &Feature<f64>| 1))]).unwrap();
        let phi = phi_values(&[], &f(0.5), &BanditDraw::empty(), &single, 0.25);
        assert_eq!((phi[1] - phi[0], phi[2] - phi[0]), (0.0, 4.0));
    }

    #[test]
    fn full_exploration_is_uniform() {
        let c = PolicyClass::<f64>::constant_arms(2).unwrap();
        let p = FeatureProcess::Iid(FeatureDistribution::uniform(0.0, 1.0).unwrap());
        let adv = CostSpec::Constant { costs: vec![0.0, 1.0] };
        let tr = run_bandit(&c, &p, &adv, &BanditConfig { horizon: 40, gamma: GammaChoice::Fixed(0.5), seed: 2 }).unwrap();
        assert!(tr.rows.iter().all(|r| r.q == vec![0.5, 0.5] && r.expected_loss == 0.5));
    }
}
