//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits nonzero when a criterion fails that is not listed in `KNOWN_RED`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use hybrid_core::bandit::{
    estimate_cost, run_bandit, waterfill_objective, waterfill_q, BanditConfig, CostSpec, GammaChoice, PolicyClass,
};
use hybrid_core::environment::{flip_to_far, AdversarySpec, FeatureDistribution, FeatureProcess};
use hybrid_core::epochs::{run_epoch_predictor, EpochSchedule, GameSettings};
use hybrid_core::oracles::{reference_solve, FiniteClass, GridParameterized, IntervalClass, ThresholdClass};
use hybrid_core::predictor::PredictorConfig;
use hybrid_core::rng::{stream, tag};
use hybrid_core::shifting::{block_length, blocks_straddling};
use hybrid_core::verify::{
    check_admissibility, check_fact2, check_rademacher, check_sensitivity, default_scenarios, CheckReport,
};
use hybrid_core::{Feature, HypothesisClass, LabeledPair, Loss, MixedErmQuery, Sign, SignedTerm};
use hybrid_harness::{fit_exponent, run_experiment, ClassSpec, EnvSpec, ExperimentConfig, Mode, SegmentSpec, Summary};

const SEED: u64 = 20_240_601;
const SEEDS: u64 = 20;
const ONLINE_HORIZONS: [usize; 4] = [512, 1024, 2048, 4096];
const SHIFT_HORIZONS: [usize; 4] = [1024, 2048, 4096, 8192];
const ONLINE_GATE: f64 = 0.85;
const ADAPTIVE_GATE: f64 = 0.95;
const SHIFT_GATE: f64 = 0.95;
const BANDIT_GATE: f64 = 0.95;
const BANDIT_MARGIN: f64 = 0.25;

/// Criteria expected to fail; see the decisions ledger.
const KNOWN_RED: &[usize] = &[7];

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: usize, name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { id, name, passed, detail }
}

fn lattice<R: Rng>(rng: &mut R) -> Feature<f64> {
    Feature::scalar(rng.gen_range(0..=100) as f64 / 100.0).unwrap()
}

fn random_query<R: Rng>(rng: &mut R, pick: &mut dyn FnMut(&mut R) -> Feature<f64>) -> MixedErmQuery<f64> {
    let n = rng.gen_range(0..=8);
    let binary = rng.gen_bool(0.5);
    let pairs = (0..n)
        .map(|_| {
            let y = if binary { f64::from(u8::from(rng.gen_bool(0.5))) } else { rng.gen::<f64>() };
            let w = if rng.gen_bool(0.3) { rng.gen_range(0.1..3.0) } else { 1.0 };
            LabeledPair::weighted(pick(rng), y, w).unwrap()
        })
        .collect();
    let signed = (0..rng.gen_range(0..=4)).map(|_| SignedTerm::new(Sign::random(rng), pick(rng))).collect();
    MixedErmQuery::new(pairs, signed, *[0.5, 1.0, 2.0].choose(rng).unwrap(), Loss::absolute()).unwrap()
}

fn mismatches<C: HypothesisClass<f64> + GridParameterized<f64>>(class: &C, q: &MixedErmQuery<f64>, step: f64) -> usize {
    let exact = class.solve(q).unwrap().objective;
    let reference = reference_solve(class, q, step).unwrap().objective;
    usize::from((exact - reference).abs() > 1e-9)
}

fn oracle_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(SEED, tag::INSTANCE, 1);
    let (mut thr, mut int, mut fin) = (0, 0, 0);
    for _ in 0..500 {
        thr += mismatches(&ThresholdClass, &random_query(&mut rng, &mut |r| lattice(r)), 0.005);
    }
    for _ in 0..500 {
        let class = IntervalClass::new(*[0.05, 0.1, 0.3, 0.9, 1.0].choose(&mut rng).unwrap()).unwrap();
        int += mismatches(&class, &random_query(&mut rng, &mut |r| lattice(r)), 0.005);
    }
    for _ in 0..500 {
        let k = rng.gen_range(1..=5);
        let support: Vec<Feature<f64>> = (0..k).map(|j| Feature::scalar(j as f64 / k as f64).unwrap()).collect();
        let rows = (0..rng.gen_range(1..=8)).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
        let class = FiniteClass::from_table(support.clone(), rows).unwrap();
        fin += mismatches(&class, &random_query(&mut rng, &mut |r| support[r.gen_range(0..k)].clone()), 0.01);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        1,
        "oracle_exactness",
        thr + int + fin == 0 && secs < 60.0,
        format!("mismatches threshold={thr} interval={int} finite={fin} over 500 each; {secs:.1}s"),
    )
}

fn call_budget() -> Outcome {
    let process = FeatureProcess::Iid(FeatureDistribution::uniform(0.0, 1.0).unwrap());
    let mut s = GameSettings::new(512, Loss::absolute(), EpochSchedule::from_q(0.5).unwrap(), SEED);
    let fast = run_epoch_predictor(&ThresholdClass, &process, &flip_to_far(), &s).unwrap();
    let fast_ok = fast.rows.iter().all(|r| r.erm_calls == 2);
    s.fast_binary_path = false;
    let general = run_epoch_predictor(&ThresholdClass, &process, &flip_to_far(), &s).unwrap();
    let mut worst = i64::MIN;
    for r in &general.rows {
        let m = s.schedule.epoch_length(r.epoch);
        let budget = PredictorConfig::<f64>::new(m, Loss::absolute()).unwrap().general_budget() as i64;
        worst = worst.max(r.erm_calls as i64 - budget);
    }
    outcome(
        2,
        "erm_call_budget",
        fast_ok && worst <= 0,
        format!("fast path 2 calls on all 512 rounds: {fast_ok}; general path max(calls − ⌈L√M⌉−2) = {worst}"),
    )
}

fn from_check(id: usize, name: &'static str, r: &CheckReport) -> Outcome {
    outcome(
        id,
        name,
        r.passed == Some(true),
        format!("{} margin={:.4} stderr={:.4} {}", r.instances, r.worst_margin, r.stderr, r.detail),
    )
}

fn admissibility() -> Outcome {
    let start = Instant::now();
    let scenarios = default_scenarios();
    let main = check_admissibility(&scenarios, 2000, SEED, 0.0).unwrap();
    let single: Vec<_> = scenarios.iter().filter(|s| s.name == "singleton").cloned().collect();
    let control = check_admissibility(&single, 2000, SEED, 0.3).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        3,
        "approx_admissibility",
        !main.failed() && control.failed() && secs < 300.0,
        format!(
            "{} instances margin={:.4} ({}); corrupted control margin={:.4}; {secs:.1}s",
            main.instances, main.worst_margin, main.detail, control.worst_margin
        ),
    )
}

fn fit_slope(summary: &Summary) -> Option<f64> {
    summary.exponent_fit.as_ref().map(|f| f.slope)
}

fn sublinear(means: &[f64]) -> bool {
    means.windows(2).all(|w| w[1] / 2.0 < w[0])
}

fn online_config(adversary: AdversarySpec, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        mode: Mode::Online,
        class: ClassSpec::Threshold,
        adversary,
        horizons: Some(ONLINE_HORIZONS.to_vec()),
        q: 0.5,
        seeds: (0..SEEDS).collect(),
        out: out.to_path_buf(),
        ..Default::default()
    }
}

fn growth_line(summary: &Summary) -> String {
    summary
        .horizons
        .iter()
        .map(|h| format!("T={}:{:.1}±{:.1}", h.horizon, h.mean_regret, h.std_regret))
        .collect::<Vec<_>>()
        .join(" ")
}

fn online_growth(dir: &Path) -> Outcome {
    let start = Instant::now();
    let s = run_experiment(&online_config(AdversarySpec::NoisyTarget { threshold: 0.5, p: 0.1 }, dir)).unwrap();
    let slope = fit_slope(&s).unwrap_or(f64::NAN);
    let means: Vec<f64> = s.horizons.iter().map(|h| h.mean_regret).collect();
    let sub = sublinear(&means);
    outcome(
        7,
        "online_regret_growth",
        slope <= ONLINE_GATE && sub,
        format!(
            "slope={slope:.3} (gate {ONLINE_GATE}) sublinear={sub} {}; {:.0}s",
            growth_line(&s),
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Same game on the doubling schedule `M(n) = 2^n`; printed, not gated.
fn doubling_schedule_info(dir: &Path) -> String {
    let mut cfg = online_config(AdversarySpec::NoisyTarget { threshold: 0.5, p: 0.1 }, dir);
    cfg.schedule = Some(EpochSchedule::geometric(2.0).unwrap());
    let s = run_experiment(&cfg).unwrap();
    format!("INFO  7 online_regret_growth[doubling schedule]: slope={:.3} {}", fit_slope(&s).unwrap_or(f64::NAN), growth_line(&s))
}

fn adaptive_growth(dir: &Path) -> Outcome {
    let start = Instant::now();
    let s = run_experiment(&online_config(AdversarySpec::FlipToFar, dir)).unwrap();
    let slope = fit_slope(&s).unwrap_or(f64::NAN);
    let band = if slope <= ONLINE_GATE {
        ""
    } else if slope <= ADAPTIVE_GATE {
        " report-only band"
    } else {
        ""
    };
    outcome(
        8,
        "adaptive_sanity",
        slope <= ADAPTIVE_GATE,
        format!("slope={slope:.3} (gate {ADAPTIVE_GATE}){band} {}; {:.0}s", growth_line(&s), start.elapsed().as_secs_f64()),
    )
}

fn point(x: f64) -> EnvSpec {
    EnvSpec::Point { x }
}

fn shifting(dir: &Path) -> Outcome {
    let start = Instant::now();
    let k = 2;
    let mut means = Vec::new();
    let mut straddles = Vec::new();
    let mut ok_straddle = true;
    for &t in &SHIFT_HORIZONS {
        let cfg = ExperimentConfig {
            mode: Mode::Shifting,
            class: ClassSpec::Threshold,
            env: EnvSpec::Shifting {
                segments: vec![
                    SegmentSpec { start: 1, dist: point(0.2) },
                    SegmentSpec { start: t / 3 + 7, dist: point(0.8) },
                    SegmentSpec { start: 2 * t / 3 + 3, dist: point(0.35) },
                ],
            },
            horizon: t,
            shifts: Some(k),
            seeds: (0..SEEDS).collect(),
            out: dir.to_path_buf(),
            ..Default::default()
        };
        let process = cfg.build_process().unwrap();
        let b = block_length(t, k);
        let n = blocks_straddling(&process.change_points(), b, t);
        ok_straddle &= n <= k;
        straddles.push(n);
        let s = run_experiment(&cfg).unwrap();
        means.push(s.mean_regret.unwrap());
    }
    let slope = fit_exponent(&SHIFT_HORIZONS, &means).map(|f| f.slope).unwrap_or(f64::NAN);
    let growth = SHIFT_HORIZONS.iter().zip(&means).map(|(t, m)| format!("T={t}:{m:.1}")).collect::<Vec<_>>().join(" ");
    outcome(
        9,
        "shifting",
        ok_straddle && slope <= SHIFT_GATE,
        format!(
            "straddling blocks {straddles:?} (≤{k}); slope={slope:.3} (gate {SHIFT_GATE}) {growth}; {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Minimizes a convex function on `[lo, hi]`.
fn ternary(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..100 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f((lo + hi) / 2.0)
}

fn simplex_search(b: &[f64]) -> f64 {
    match b.len() {
        2 => ternary(0.0, 1.0, |p| waterfill_objective(&[p, 1.0 - p], b)),
        3 => ternary(0.0, 1.0, |p| ternary(0.0, 1.0 - p, |q| waterfill_objective(&[p, q, (1.0 - p - q).max(0.0)], b))),
        _ => unreachable!(),
    }
}

fn bandit_minimax() -> Outcome {
    let mut rng = stream(SEED, tag::INSTANCE, 10);
    let (mut worst2, mut worst3) = (0.0f64, 0.0f64);
    let mut above = 0;
    for i in 0..200 {
        let k = 2 + i % 2;
        let b: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.5..0.8)).collect();
        let (_, g) = waterfill_q(&b);
        let search = simplex_search(&b);
        if g > search + 1e-12 {
            above += 1;
        }
        let gap = (search - g).abs();
        if k == 2 {
            worst2 = worst2.max(gap);
        } else {
            worst3 = worst3.max(gap);
        }
    }
    let q = [0.55, 0.45];
    let gamma = 0.2;
    let costs = [0.3, 0.9];
    let n = 100_000;
    let mut unbiased = true;
    let mut est_line = Vec::new();
    for (arm, &c) in costs.iter().enumerate() {
        let mut r = stream(SEED, tag::ESTIMATE, arm as u64);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let played = usize::from(r.gen_bool(q[1]));
            let e = estimate_cost(played, costs[played], &q, gamma, &mut r).unwrap().to_vec(2)[arm];
            sum += e;
            sq += e * e;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        unbiased &= (mean - c).abs() <= 3.0 * se;
        est_line.push(format!("arm{arm}:{mean:.4}±{se:.4} vs {c}"));
    }
    let class = PolicyClass::threshold_pack(0.5).unwrap();
    let process = FeatureProcess::Iid(FeatureDistribution::uniform(0.0, 1.0).unwrap());
    let adv = CostSpec::ThresholdGap { threshold: 0.5, gap: 1.0 };
    let trace = run_bandit(&class, &process, &adv, &BanditConfig { horizon: 512, gamma: GammaChoice::Auto, seed: SEED }).unwrap();
    let floor_ok = trace.rows.iter().all(|r| r.q.iter().all(|&v| v >= r.gamma - 1e-12));
    outcome(
        10,
        "bandit_minimax",
        above == 0 && worst2 <= 1e-6 && worst3 <= 1e-4 && unbiased && floor_ok,
        format!(
            "waterfill vs search max gap K=2 {worst2:.2e} K=3 {worst3:.2e}, above search {above}; estimator {}; q ≥ γ on 512 rounds: {floor_ok}",
            est_line.join(" ")
        ),
    )
}

fn bandit_growth(dir: &Path) -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        mode: Mode::Bandit,
        costs: CostSpec::ThresholdGap { threshold: 0.5, gap: 1.0 },
        horizons: Some(ONLINE_HORIZONS.to_vec()),
        seeds: (0..SEEDS).collect(),
        out: dir.to_path_buf(),
        ..Default::default()
    };
    let s = run_experiment(&cfg).unwrap();
    let slope = fit_slope(&s).unwrap_or(f64::NAN);
    // A uniform random policy pays (1/2)(lo + hi) = 1/2 per round; the best policy pays (1 − gap)/2 = 0.
    let t = *ONLINE_HORIZONS.last().unwrap() as f64;
    let uniform = 0.5 * t;
    let ours = s.mean_regret.unwrap();
    let improvement = 1.0 - ours / uniform;
    outcome(
        11,
        "bandit_regret_growth",
        slope <= BANDIT_GATE && improvement >= BANDIT_MARGIN,
        format!(
            "slope={slope:.3} (gate {BANDIT_GATE}); final regret {ours:.1} vs uniform {uniform:.1}: {:.0}% lower (need {:.0}%) {}; {:.0}s",
            100.0 * improvement,
            100.0 * BANDIT_MARGIN,
            growth_line(&s),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let configs = [
        ExperimentConfig {
            mode: Mode::Online,
            adversary: AdversarySpec::FlipToFar,
            horizon: 300,
            seeds: vec![1, 2],
            ..Default::default()
        },
        ExperimentConfig {
            mode: Mode::Online,
            class: ClassSpec::Interval { min_len: 0.2 },
            horizon: 200,
            seeds: vec![3],
            ..Default::default()
        },
        ExperimentConfig { mode: Mode::Shifting, shifts: Some(1), horizon: 256, seeds: vec![4], ..Default::default() },
        ExperimentConfig { mode: Mode::Bandit, horizon: 300, seeds: vec![5, 6], ..Default::default() },
    ];
    let mut files = 0;
    let mut differing = Vec::new();
    for cfg in configs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut c = cfg.clone();
        c.out = a.path().to_path_buf();
        run_experiment(&c).unwrap();
        c.out = b.path().to_path_buf();
        run_experiment(&c).unwrap();
        let (x, y) = (csv_bytes(a.path()), csv_bytes(b.path()));
        files += x.len();
        if x != y {
            differing.push(cfg.mode.as_str());
        }
    }
    outcome(
        12,
        "determinism",
        differing.is_empty() && files > 0,
        format!("{files} CSV files compared; differing modes {differing:?}"),
    )
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let sub = |name: &str| {
        let p = scratch.path().join(name);
        fs::create_dir_all(&p).unwrap();
        p
    };
    let mut results = vec![
        oracle_exactness(),
        call_budget(),
        admissibility(),
        from_check(4, "sensitivity", &check_sensitivity(200, SEED).unwrap()),
        from_check(5, "fact2", &check_fact2(1000, SEED).unwrap()),
        from_check(6, "rademacher", &check_rademacher(2000, SEED).unwrap()),
    ];
    results.push(online_growth(&sub("online")));
    let info = doubling_schedule_info(&sub("doubling"));
    results.push(adaptive_growth(&sub("adaptive")));
    results.push(shifting(&sub("shifting")));
    results.push(bandit_minimax());
    results.push(bandit_growth(&sub("bandit")));
    results.push(determinism());

    let mut unexpected = Vec::new();
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        let note = if !r.passed && KNOWN_RED.contains(&r.id) { " [known red]" } else { "" };
        println!("{status} {:>2} {}{note}: {}", r.id, r.name, r.detail);
        if r.id == 7 {
            println!("{info}");
        }
        if !r.passed && !KNOWN_RED.contains(&r.id) {
            unexpected.push(r.id);
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
