//! Executable checks of the predictor's guarantees on tiny instances.
//!
//! Every check returns a [`CheckReport`]. Monte-Carlo comparisons use a
//! slack of three combined standard errors plus the declared approximation
//! error of the predictor (`L` times its ŷ tolerance per round).

use rand::Rng;
use serde::Serialize;

use crate::domain::{Feature, HypothesisClass, LabeledPair, MixedErmQuery, Sign, SignedTerm};
use crate::environment::FeatureDistribution;
use crate::error::{Error, Result};
use crate::loss::{unit_grid, Loss};
use crate::oracles::{FiniteClass, ThresholdClass};
use crate::predictor::{
    draw_halluc_with, f_eval, predict, relaxation_r, relaxation_rtilde, DrawMode, GameHistory, PredictorConfig, SidePool,
};
use crate::rng::{stream, tag, GameRng};
use crate::stats::McEstimate;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    /// `None` for report-only diagnostics.
    pub passed: Option<bool>,
    /// Smallest `rhs + slack − lhs` seen; negative on failure.
    pub worst_margin: f64,
    pub stderr: f64,
    pub detail: String,
}

impl CheckReport {
    pub fn failed(&self) -> bool {
        self.passed == Some(false)
    }

    /// One-line human summary.
    pub fn line(&self) -> String {
        let status = match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        format!(
            "{status} {} instances={} worst_margin={:.6} stderr={:.6} {}",
            self.name, self.instances, self.worst_margin, self.stderr, self.detail
        )
    }

    /// A negative control passes when the check it wraps fails.
    pub fn as_negative_control(mut self, name: &str) -> Self {
        self.passed = self.passed.map(|p| !p);
        self.name = name.to_owned();
        self
    }
}

/// `sup_h Σ ε_t h(x_t)` via one oracle call.
fn signed_sup<C: HypothesisClass<f64> + ?Sized>(class: &C, xs: &[Feature<f64>], signs: &[Sign]) -> Result<f64> {
    let signed = signs.iter().zip(xs).map(|(&s, x)| SignedTerm::new(s, x.clone())).collect();
    let q = MixedErmQuery::new(vec![], signed, 1.0, Loss::absolute())?.negated_signs();
    Ok(-class.solve(&q)?.objective)
}

/// Monte-Carlo `E_ε sup_h Σ ε_t h(x_t)` on a fixed `x^T`, a lower estimate of
/// the Rademacher complexity (which also takes a sup over `x^T`).
pub fn estimate_rademacher<C: HypothesisClass<f64> + ?Sized, R: Rng + ?Sized>(
    class: &C,
    xs: &[Feature<f64>],
    mc_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    let mut vals = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples.max(1) {
        let signs: Vec<Sign> = xs.iter().map(|_| Sign::random(rng)).collect();
        vals.push(signed_sup(class, xs, &signs)?);
    }
    Ok(McEstimate::from_samples(&vals))
}

/// Exact `E_ε sup_h Σ ε_t h(x_t)` by enumerating all `2^T` sign patterns.
pub fn rademacher_exact<C: HypothesisClass<f64> + ?Sized>(class: &C, xs: &[Feature<f64>]) -> Result<f64> {
    if xs.len() > 24 {
        return Err(Error::Config(format!("exhaustive enumeration over 2^{} patterns refused", xs.len())));
    }
    let n = 1u64 << xs.len();
    let mut total = 0.0;
    for mask in 0..n {
        let signs: Vec<Sign> = (0..xs.len()).map(|i| Sign::from_bool(mask & (1 << i) != 0)).collect();
        total += signed_sup(class, xs, &signs)?;
    }
    Ok(total / n as f64)
}

/// A tiny side-information game: finite `𝒳` with law `μ`, finite class,
/// fixed pool and horizon.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub class: FiniteClass<f64>,
    pub support: Vec<Feature<f64>>,
    pub probs: Vec<f64>,
    pub pool: Vec<Feature<f64>>,
    pub horizon: usize,
    pub loss: Loss<f64>,
    /// Histories `(support index, label)` at which admissibility is checked;
    /// a history of length `j − 1` checks round `j`.
    pub histories: Vec<Vec<(usize, f64)>>,
}

impl Scenario {
    fn validate(&self) -> Result<()> {
        if self.support.is_empty() || self.support.len() != self.probs.len() {
            return Err(Error::Config(format!("scenario `{}`: support and probabilities disagree", self.name)));
        }
        if self.horizon == 0 || self.pool.len() + 1 < self.horizon {
            return Err(Error::Config(format!("scenario `{}`: pool too small for horizon {}", self.name, self.horizon)));
        }
        if self.histories.iter().any(|h| h.len() >= self.horizon || h.iter().any(|&(i, _)| i >= self.support.len())) {
            return Err(Error::Config(format!("scenario `{}`: malformed history fixture", self.name)));
        }
        Ok(())
    }

    fn mu(&self) -> Result<FeatureDistribution<f64>> {
        FeatureDistribution::discrete(self.support.clone(), self.probs.clone())
    }

    fn pairs(&self, h: &[(usize, f64)]) -> Result<Vec<LabeledPair<f64>>> {
        h.iter().map(|&(i, y)| LabeledPair::new(self.support[i].clone(), y)).collect()
    }

    fn config(&self) -> Result<PredictorConfig<f64>> {
        PredictorConfig::new(self.horizon, self.loss.clone())?.with_grid(0.05, 1e-3)
    }
}

fn feat(v: f64) -> Feature<f64> {
    Feature::Scalar(v)
}

/// The fixture family used by the admissibility and decomposition checks.
pub fn default_scenarios() -> Vec<Scenario> {
    let a = feat(0.2);
    let b = feat(0.5);
    let c = feat(0.8);
    let d = feat(0.95);
    let table = |rows: Vec<Vec<f64>>, sup: &[Feature<f64>]| FiniteClass::from_table(sup.to_vec(), rows).expect("valid table");
    vec![
        Scenario {
            name: "singleton".into(),
            class: FiniteClass::constants(&[0.5]).expect("valid"),
            support: vec![a.clone()],
            probs: vec![1.0],
            pool: vec![a.clone(), a.clone()],
            horizon: 1,
            loss: Loss::absolute(),
            histories: vec![vec![]],
        },
        Scenario {
            name: "constants_m2".into(),
            class: FiniteClass::constants(&[0.0, 1.0]).expect("valid"),
            support: vec![a.clone(), c.clone()],
            probs: vec![0.5, 0.5],
            pool: vec![a.clone(), c.clone()],
            horizon: 2,
            loss: Loss::absolute(),
            histories: vec![vec![], vec![(0, 0.0)], vec![(1, 1.0)], vec![(0, 0.5)]],
        },
        Scenario {
            name: "table_m3".into(),
            class: table(
                vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0], vec![0.5, 0.25, 0.75]],
                &[a.clone(), b.clone(), c.clone()],
            ),
            support: vec![a.clone(), b.clone(), c.clone()],
            probs: vec![0.5, 0.3, 0.2],
            pool: vec![a.clone(), a.clone(), b.clone(), c.clone(), b.clone(), a.clone()],
            horizon: 3,
            loss: Loss::absolute(),
            histories: vec![vec![], vec![(1, 1.0)], vec![(0, 0.0), (2, 1.0)], vec![(2, 0.3), (1, 0.9)]],
        },
        Scenario {
            name: "skewed_pool_m3".into(),
            class: table(
                vec![
                    vec![0.0, 0.0, 0.0, 0.0],
                    vec![1.0, 1.0, 1.0, 1.0],
                    vec![0.0, 0.0, 1.0, 1.0],
                    vec![1.0, 0.0, 1.0, 0.0],
                    vec![0.0, 1.0, 1.0, 0.0],
                    vec![1.0, 1.0, 0.0, 0.0],
                ],
                &[a.clone(), b.clone(), c.clone(), d.clone()],
            ),
            support: vec![a.clone(), b.clone(), c.clone(), d.clone()],
            probs: vec![0.1, 0.2, 0.3, 0.4],
            pool: vec![a.clone(), a.clone(), a.clone(), b.clone(), a.clone(), b.clone()],
            horizon: 3,
            loss: Loss::absolute(),
            histories: vec![vec![], vec![(3, 1.0)], vec![(2, 0.0)], vec![(0, 1.0), (3, 0.0)]],
        },
    ]
}

/// Scenario where the decomposition is tight: regret and its bound are both 0.
pub fn tight_scenario() -> Scenario {
    let a = feat(0.3);
    let b = feat(0.7);
    Scenario {
        name: "tight".into(),
        class: FiniteClass::from_table(vec![a.clone(), b.clone()], vec![vec![0.0, 0.0], vec![1.0, 0.0]]).expect("valid"),
        support: vec![b],
        probs: vec![1.0],
        pool: vec![a.clone(), a],
        horizon: 2,
        loss: Loss::absolute(),
        histories: vec![vec![]],
    }
}

/// One sample vector per label on the check grid.
type Samples = Vec<Vec<f64>>;

/// Per-round discrepancy estimates with their reference values.
pub type DiscrepancyRows = Vec<(usize, McEstimate, f64)>;

/// Round-`j` Monte-Carlo value of `E_draw[ℓ(ŷ_j, y) + R_j]` for each `y` on
/// the check grid, using the same draws for every `y`.
fn round_values(
    scn: &Scenario,
    history: &[LabeledPair<f64>],
    x: &Feature<f64>,
    grid: &[f64],
    corruption: f64,
    mc: usize,
    rng: &mut GameRng,
) -> Result<(Samples, Samples)> {
    let cfg = scn.config()?;
    let pool = SidePool::new(scn.pool.clone());
    let j = history.len() + 1;
    let count = scn.horizon - j;
    let mut loss_vals = vec![Vec::with_capacity(mc); grid.len()];
    let mut total_vals = vec![Vec::with_capacity(mc); grid.len()];
    let mut pairs = history.to_vec();
    pairs.push(LabeledPair::new(x.clone(), 0.0)?);
    let two_l = 2.0 * scn.loss.lipschitz();
    for _ in 0..mc.max(1) {
        let draw = draw_halluc_with(&pool, count, DrawMode::WithoutReplacement, rng)?;
        let yhat = (predict(GameHistory { rounds: history, current: x }, &draw, &scn.class, &cfg)?.value + corruption).min(1.0);
        for (k, &y) in grid.iter().enumerate() {
            let last = pairs.len() - 1;
            pairs[last] = pairs[last].with_label(y)?;
            let q = MixedErmQuery::new(pairs.clone(), draw.signed_terms().collect(), two_l, scn.loss.clone())?.negated_signs();
            let r = -scn.class.solve(&q)?.objective;
            let l = scn.loss.value(yhat, y);
            loss_vals[k].push(l);
            total_vals[k].push(l + r);
        }
    }
    Ok((loss_vals, total_vals))
}

fn rtilde(scn: &Scenario, history: &[LabeledPair<f64>], mc: usize, rng: &mut GameRng) -> Result<McEstimate> {
    let mu = scn.mu()?;
    let pool = SidePool::new(scn.pool.clone());
    relaxation_rtilde(
        history,
        &pool,
        |r: &mut GameRng| mu.sample(r),
        &scn.class,
        &scn.config()?,
        DrawMode::WithoutReplacement,
        mc,
        rng,
    )
}

fn r_j(scn: &Scenario, history: &[LabeledPair<f64>], mc: usize, rng: &mut GameRng) -> Result<McEstimate> {
    let pool = SidePool::new(scn.pool.clone());
    relaxation_r(history, &pool, &scn.class, &scn.config()?, DrawMode::WithoutReplacement, mc, rng)
}

/// `E_{x_j} sup_{y_j} E[ℓ(ŷ_j, y_j) + R_j] ≤ R̃_{j−1}` at every history fixture.
///
/// `corruption` is added to every prediction; nonzero values serve as a
/// negative control.
pub fn check_admissibility(scenarios: &[Scenario], mc: usize, seed: u64, corruption: f64) -> Result<CheckReport> {
    let grid = unit_grid(0.05);
    let mut worst = f64::INFINITY;
    let mut worst_se = 0.0;
    let mut instances = 0;
    let mut detail = String::new();
    for (si, scn) in scenarios.iter().enumerate() {
        scn.validate()?;
        let slack_approx = scn.loss.lipschitz() * scn.config()?.yhat_tolerance;
        for (hi, h) in scn.histories.iter().enumerate() {
            let mut rng = stream(seed, tag::CHECK, ((si as u64) << 16) | hi as u64);
            let history = scn.pairs(h)?;
            let (mut lhs, mut lhs_var) = (0.0, 0.0);
            for (x, &p) in scn.support.iter().zip(&scn.probs) {
                let (_, totals) = round_values(scn, &history, x, &grid, corruption, mc, &mut rng)?;
                let best =
                    totals.iter().map(|v| McEstimate::from_samples(v)).fold(None, |acc: Option<McEstimate>, e| match acc {
                        Some(a) if a.mean >= e.mean => Some(a),
                        _ => Some(e),
                    });
                let best = best.expect("grid is nonempty");
                lhs += p * best.mean;
                lhs_var += (p * best.stderr).powi(2);
            }
            let rhs = rtilde(scn, &history, mc, &mut rng)?;
            let se = lhs_var.sqrt().hypot(rhs.stderr);
            let margin = rhs.mean + 3.0 * se + slack_approx - lhs;
            instances += 1;
            if margin < worst {
                worst = margin;
                worst_se = se;
                detail = format!("tightest: {} j={} lhs={lhs:.4} rhs={:.4}", scn.name, h.len() + 1, rhs.mean);
            }
        }
    }
    Ok(CheckReport {
        name: "admissibility".into(),
        instances,
        passed: Some(worst >= 0.0),
        worst_margin: worst,
        stderr: worst_se,
        detail,
    })
}

/// Greedy grid adversary: `y_j` maximizes `E[ℓ(ŷ_j, y) + R_j]`.
///
/// Checks `E[regret] ≤ E[R̃_0 + Σ_{j<M} (R̃_j − R_j)]` with both sides taken
/// along the played path and averaged exactly over feature paths.
/// `rtilde0_scale` rescales `R̃_0`; values below 1 serve as a negative control.
pub fn check_decomposition(scn: &Scenario, mc: usize, seed: u64, rtilde0_scale: f64) -> Result<CheckReport> {
    scn.validate()?;
    let grid = unit_grid(0.05);
    let m = scn.horizon;
    let k = scn.support.len();
    let paths = k.pow(m as u32);
    let mut rng = stream(seed, tag::CHECK, 0xDEC0);
    let r0 = rtilde(scn, &[], mc, &mut rng)?;
    let (mut lhs, mut rhs_rest, mut var) = (0.0, 0.0, 0.0);
    for path in 0..paths {
        let idx: Vec<usize> = (0..m).map(|j| (path / k.pow(j as u32)) % k).collect();
        let w: f64 = idx.iter().map(|&i| scn.probs[i]).product();
        if w == 0.0 {
            continue;
        }
        let mut history: Vec<LabeledPair<f64>> = Vec::with_capacity(m);
        let (mut learner, mut path_var, mut disc) = (0.0, 0.0, 0.0);
        for &i in &idx {
            let x = &scn.support[i];
            let (losses, totals) = round_values(scn, &history, x, &grid, 0.0, mc, &mut rng)?;
            let means: Vec<McEstimate> = totals.iter().map(|v| McEstimate::from_samples(v)).collect();
            let mut yi = 0;
            for (q, e) in means.iter().enumerate() {
                if e.mean > means[yi].mean {
                    yi = q;
                }
            }
            let l = McEstimate::from_samples(&losses[yi]);
            learner += l.mean;
            path_var += l.stderr.powi(2);
            history.push(LabeledPair::new(x.clone(), grid[yi])?);
            if history.len() < m {
                let rt = rtilde(scn, &history, mc, &mut rng)?;
                let r = r_j(scn, &history, mc, &mut rng)?;
                disc += rt.mean - r.mean;
                path_var += rt.stderr.powi(2) + r.stderr.powi(2);
            }
        }
        let comparator = scn.class.solve(&MixedErmQuery::erm(history.clone(), scn.loss.clone()))?.objective;
        lhs += w * (learner - comparator);
        rhs_rest += w * disc;
        var += w * w * path_var;
    }
    let rhs = rtilde0_scale * r0.mean + rhs_rest;
    let se = var.sqrt().hypot(rtilde0_scale * r0.stderr);
    let slack_approx = m as f64 * scn.loss.lipschitz() * scn.config()?.yhat_tolerance;
    let margin = rhs + 3.0 * se + slack_approx - lhs;
    Ok(CheckReport {
        name: format!("decomposition[{}]", scn.name),
        instances: paths,
        passed: Some(margin >= 0.0),
        worst_margin: margin,
        stderr: se,
        detail: format!("regret={lhs:.4} bound={rhs:.4} r0={:.4}", r0.mean),
    })
}

/// Spread of `f` over a probe grid is at most `4L`, and `f` moves by at most
/// `jL‖y − y′‖_∞` when the labels move.
pub fn check_sensitivity(count: usize, seed: u64) -> Result<CheckReport> {
    let probes: Vec<Feature<f64>> = unit_grid(0.01).into_iter().map(feat).collect();
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for inst in 0..count {
        let mut rng = stream(seed, tag::INSTANCE, inst as u64);
        let loss = if inst % 4 == 3 { Loss::squared() } else { Loss::absolute() };
        let l = loss.lipschitz();
        let j = rng.gen_range(1..=4usize);
        let tail_len = rng.gen_range(0..=3usize);
        let xs: Vec<Feature<f64>> = (0..j).map(|_| feat(rng.gen::<f64>())).collect();
        let ys: Vec<f64> = (0..j).map(|_| rng.gen::<f64>()).collect();
        let tail: Vec<Feature<f64>> = (0..tail_len).map(|_| feat(rng.gen::<f64>())).collect();
        let signs: Vec<Sign> = (0..=tail_len).map(|_| Sign::random(&mut rng)).collect();
        let delta: Vec<f64> = (0..j).map(|_| rng.gen_range(-0.1..=0.1)).collect();
        let ys2: Vec<f64> = ys.iter().zip(&delta).map(|(y, d)| (y + d).clamp(0.0, 1.0)).collect();
        let dist = ys.iter().zip(&ys2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let hist = |labels: &[f64]| -> Result<Vec<LabeledPair<f64>>> {
            xs.iter().zip(labels).map(|(x, &y)| LabeledPair::new(x.clone(), y)).collect()
        };
        let (h1, h2) = (hist(&ys)?, hist(&ys2)?);
        let (v1, v2) = if inst % 2 == 0 {
            let c = ThresholdClass;
            (f_on(&c, &h1, &tail, &signs, &probes, &loss)?, f_on(&c, &h2, &tail, &signs, &probes, &loss)?)
        } else {
            let c = random_table(&mut rng, &probes, 6, false)?;
            (f_on(&c, &h1, &tail, &signs, &probes, &loss)?, f_on(&c, &h2, &tail, &signs, &probes, &loss)?)
        };
        let spread = v1.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v1.iter().cloned().fold(f64::INFINITY, f64::min);
        let lip = v1.iter().zip(&v2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let eps = 1e-9;
        let m1 = 4.0 * l - spread + eps;
        let m2 = j as f64 * l * dist - lip + eps;
        let margin = m1.min(m2);
        if margin < worst {
            worst = margin;
            detail = format!(
                "tightest: instance {inst} spread={spread:.4} (≤{}) label_shift={lip:.4} (≤{:.4})",
                4.0 * l,
                j as f64 * l * dist
            );
        }
    }
    Ok(CheckReport {
        name: "sensitivity".into(),
        instances: count,
        passed: Some(worst >= 0.0),
        worst_margin: worst,
        stderr: 0.0,
        detail,
    })
}

fn f_on<C: HypothesisClass<f64>>(
    class: &C,
    history: &[LabeledPair<f64>],
    tail: &[Feature<f64>],
    signs: &[Sign],
    probes: &[Feature<f64>],
    loss: &Loss<f64>,
) -> Result<Vec<f64>> {
    probes.iter().map(|x| f_eval(history, tail, signs, x, class, loss)).collect()
}

fn random_table<R: Rng + ?Sized>(rng: &mut R, support: &[Feature<f64>], max_h: usize, binary: bool) -> Result<FiniteClass<f64>> {
    let n = rng.gen_range(1..=max_h);
    let rows = (0..n)
        .map(|_| support.iter().map(|_| if binary { f64::from(u8::from(rng.gen_bool(0.5))) } else { rng.gen::<f64>() }).collect())
        .collect();
    FiniteClass::from_table(support.to_vec(), rows)
}

/// The three-case characterization of `f` for binary classes under absolute
/// loss with `ε_{j+1} = +1`, compared with a direct evaluation.
pub fn check_fact2(count: usize, seed: u64) -> Result<CheckReport> {
    let mut mismatches = 0;
    let mut detail = String::from("all cases matched");
    let mut cases = [0usize; 3];
    let loss = Loss::absolute();
    for inst in 0..count {
        let mut rng = stream(seed, tag::INSTANCE, 0x0F00_0000 + inst as u64);
        let k = rng.gen_range(2..=6usize);
        let support: Vec<Feature<f64>> = (0..k).map(|i| feat((i as f64 + 0.5) / k as f64)).collect();
        let class = random_table(&mut rng, &support, 8, true)?;
        let j = rng.gen_range(0..=4usize);
        let tail_len = rng.gen_range(0..=3usize);
        let history: Vec<LabeledPair<f64>> = (0..j)
            .map(|_| LabeledPair::new(support[rng.gen_range(0..k)].clone(), f64::from(u8::from(rng.gen_bool(0.5)))))
            .collect::<Result<_>>()?;
        let tail: Vec<Feature<f64>> = (0..tail_len).map(|_| support[rng.gen_range(0..k)].clone()).collect();
        let mut signs = vec![Sign::Plus];
        signs.extend((0..tail_len).map(|_| Sign::random(&mut rng)));

        let big_f: Vec<f64> = (0..class.len())
            .map(|h| {
                let hal: f64 = tail.iter().zip(&signs[1..]).map(|(x, s)| 2.0 * s.value::<f64>() * class.value(h, x)).sum();
                let lj: f64 = history.iter().map(|p| loss.value(class.value(h, p.x()), p.y())).sum();
                hal - lj
            })
            .collect();
        let top = big_f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let h0 = |x: &Feature<f64>| (0..class.len()).filter(|&h| big_f[h] == top).any(|h| class.value(h, x) == 1.0);
        let h1 = |x: &Feature<f64>| (0..class.len()).filter(|&h| big_f[h] == top - 1.0).any(|h| class.value(h, x) == 1.0);
        for x in &support {
            let (want, case) = if h0(x) {
                (top + 2.0, 0)
            } else if h1(x) {
                (top + 1.0, 1)
            } else {
                (top, 2)
            };
            cases[case] += 1;
            let got = f_eval(&history, &tail, &signs, x, &class, &loss)?;
            if got != want {
                mismatches += 1;
                detail = format!("instance {inst} x={x}: direct {got} vs characterization {want}");
            }
        }
    }
    Ok(CheckReport {
        name: "fact2".into(),
        instances: count,
        passed: Some(mismatches == 0),
        worst_margin: 0.0 - mismatches as f64,
        stderr: 0.0,
        detail: format!("{detail}; case counts {cases:?}"),
    })
}

/// Measured `R̃_j − R_j` per round next to the `√(j/N)` reference shape.
/// Report only.
pub fn discrepancy_probe(scn: &Scenario, mode: DrawMode, mc: usize, seed: u64) -> Result<(CheckReport, DiscrepancyRows)> {
    scn.validate()?;
    let mu = scn.mu()?;
    let mut rng = stream(seed, tag::CHECK, 0xD15C);
    let mut history = Vec::new();
    let mut rows = Vec::new();
    let n = scn.pool.len() as f64;
    for j in 1..scn.horizon {
        let x = mu.sample(&mut rng);
        history.push(LabeledPair::new(x, f64::from(u8::from(rng.gen_bool(0.5))))?);
        let mut diffs = Vec::with_capacity(mc);
        let pool = SidePool::new(scn.pool.clone());
        let cfg = scn.config()?;
        for _ in 0..mc.max(1) {
            let rt = relaxation_rtilde(&history, &pool, |r: &mut GameRng| mu.sample(r), &scn.class, &cfg, mode, 1, &mut rng)?;
            let r = relaxation_r(&history, &pool, &scn.class, &cfg, mode, 1, &mut rng)?;
            diffs.push(rt.mean - r.mean);
        }
        rows.push((j, McEstimate::from_samples(&diffs), (j as f64 / n).sqrt()));
    }
    let worst = rows.iter().map(|r| r.1.mean.abs()).fold(0.0, f64::max);
    let detail =
        rows.iter().map(|(j, e, r)| format!("j={j}:{:.4}±{:.4}(ref {:.3})", e.mean, e.stderr, r)).collect::<Vec<_>>().join(" ");
    Ok((
        CheckReport {
            name: format!("discrepancy[{}]", scn.name),
            instances: rows.len(),
            passed: None,
            worst_margin: worst,
            stderr: rows.iter().map(|r| r.1.stderr).fold(0.0, f64::max),
            detail,
        },
        rows,
    ))
}

/// Rademacher estimator checks on `{h≡0, h≡1}`.
pub fn check_rademacher(mc: usize, seed: u64) -> Result<CheckReport> {
    let class = FiniteClass::constants(&[0.0, 1.0])?;
    let xs2 = vec![feat(0.1), feat(0.2)];
    let exact2 = rademacher_exact(&class, &xs2)?;
    let xs100: Vec<Feature<f64>> = (0..100).map(|i| feat(i as f64 / 100.0)).collect();
    let mut rng = stream(seed, tag::CHECK, 0x0AD);
    let est = estimate_rademacher(&class, &xs100, mc, &mut rng)?;
    let truth = half_mean_abs_walk(100);
    let ok2 = exact2 == 0.5;
    let margin = 3.0 * est.stderr - (est.mean - truth).abs();
    Ok(CheckReport {
        name: "rademacher".into(),
        instances: 2,
        passed: Some(ok2 && margin >= 0.0),
        worst_margin: if ok2 { margin } else { -1.0 },
        stderr: est.stderr,
        detail: format!("T=2 exact {exact2}; T=100 estimate {:.4} vs exact {truth:.4}", est.mean),
    })
}

/// `(1/2) E|S_T|` for a simple random walk, from the binomial law.
pub fn half_mean_abs_walk(t: usize) -> f64 {
    // log C(t, k) accumulated to stay finite for large t.
    let mut log_c = 0.0f64;
    let mut total = 0.0;
    let log_half_t = -(t as f64) * std::f64::consts::LN_2;
    for k in 0..=t {
        if k > 0 {
            log_c += ((t - k + 1) as f64).ln() - (k as f64).ln();
        }
        let s = (2.0 * k as f64 - t as f64).abs();
        total += s * (log_c + log_half_t).exp();
    }
    total / 2.0
}

/// Every check with its default size.
pub fn default_suite(seed: u64, mc: usize) -> Result<Vec<CheckReport>> {
    let scenarios = default_scenarios();
    let mut out = vec![
        check_admissibility(&scenarios, mc, seed, 0.0)?,
        check_admissibility(&scenarios[..1], mc, seed, 0.3)?.as_negative_control("admissibility_negative_control"),
        check_sensitivity(200, seed)?,
        check_fact2(1000, seed)?,
        check_rademacher(mc.max(2000), seed)?,
    ];
    for scn in scenarios.iter().take(3) {
        out.push(check_decomposition(scn, mc, seed, 1.0)?);
    }
    out.push(check_decomposition(&tight_scenario(), mc, seed, 1.0)?);
    out.push(check_decomposition(&tight_scenario(), mc, seed, 0.5)?.as_negative_control("decomposition_negative_control"));
    out.push(discrepancy_probe(&scenarios[2], DrawMode::WithReplacement, mc, seed)?.0);
    Ok(out)
}
