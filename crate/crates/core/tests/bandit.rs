use hybrid_core::bandit::{
    estimate_cost, run_bandit, step2_objective, waterfill_objective, waterfill_q, BanditConfig, CostSpec, GammaChoice,
    PolicyClass,
};
use hybrid_core::environment::{FeatureDistribution, FeatureProcess};
use hybrid_core::rng::{stream, tag};
use rand::Rng;

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

fn search_min(b: &[f64]) -> f64 {
    match b.len() {
        2 => ternary(0.0, 1.0, |p| waterfill_objective(&[p, 1.0 - p], b)),
        3 => ternary(0.0, 1.0, |p| ternary(0.0, 1.0 - p, |q| waterfill_objective(&[p, q, (1.0 - p - q).max(0.0)], b))),
        _ => unreachable!(),
    }
}

#[test]
fn waterfill_solves_the_simplex_problem() {
    let mut rng = stream(21, tag::INSTANCE, 0);
    for i in 0..200 {
        let k = if i % 2 == 0 { 2 } else { 3 };
        let b: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.5..0.8)).collect();
        let (q, g) = waterfill_q(&b);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12 && q.iter().all(|&v| v >= 0.0));
        assert!((waterfill_objective(&q, &b) - g).abs() < 1e-12);
        let tol = if k == 2 { 1e-6 } else { 1e-4 };
        let grid = search_min(&b);
        assert!(g <= grid + 1e-12, "{b:?}: waterfill {g} above grid {grid}");
        assert!(grid - g <= tol, "{b:?}: grid {grid} vs {g}");
    }
}

#[test]
fn step2_reduces_to_waterfill() {
    let mut rng = stream(22, tag::INSTANCE, 0);
    for _ in 0..200 {
        let k = rng.gen_range(2..=3);
        let gamma = rng.gen_range(0.01..=1.0 / k as f64);
        let phi0 = rng.gen_range(-2.0..2.0);
        let mut phi = vec![phi0];
        phi.extend((0..k).map(|_| phi0 + rng.gen_range(0.0..1.5)));
        let b: Vec<f64> = (0..k).map(|a| gamma * (phi[a + 1] - phi0)).collect();
        let q: Vec<f64> = {
            let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let remaining = rng.gen_range(0..10);
        let lhs = step2_objective(&q, &phi, gamma, remaining);
        let rhs = -phi0 + gamma * (remaining * k) as f64 + waterfill_objective(&q, &b);
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }
}

#[test]
fn cost_estimates_are_unbiased() {
    let q = [0.6, 0.4];
    let gamma = 0.25;
    let cost = 0.7;
    let n = 100_000;
    let mut rng = stream(23, tag::CHECK, 0);
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..n {
        let arm = usize::from(rng.gen_bool(q[1]));
        let e = estimate_cost(arm, cost, &q, gamma, &mut rng).unwrap().to_vec(2)[0];
        sum += e;
        sq += e * e;
    }
    let mean = sum / n as f64;
    let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - cost).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn mixed_distribution_keeps_exploring() {
    let class = PolicyClass::threshold_pack(0.5).unwrap();
    let process = FeatureProcess::Iid(FeatureDistribution::uniform(0.0, 1.0).unwrap());
    let adv = CostSpec::ThresholdGap { threshold: 0.5, gap: 1.0 };
    let trace = run_bandit(&class, &process, &adv, &BanditConfig { horizon: 512, gamma: GammaChoice::Auto, seed: 4 }).unwrap();
    for r in &trace.rows {
        assert!(r.q.iter().all(|&v| v >= r.gamma - 1e-12), "round {}: {:?} below γ {}", r.t, r.q, r.gamma);
        assert!((r.q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn constant_costs_regret_is_bounded_by_exploration() {
    let class = PolicyClass::constant_arms(2).unwrap();
    let process = FeatureProcess::Iid(FeatureDistribution::uniform(0.0, 1.0).unwrap());
    let adv = CostSpec::Constant { costs: vec![0.0, 1.0] };
    let t = 512;
    let trace = run_bandit(&class, &process, &adv, &BanditConfig { horizon: t, gamma: GammaChoice::Auto, seed: 5 }).unwrap();
    let exploration: f64 = trace.rows.iter().map(|r| r.gamma).sum();
    // ⟨q, c⟩ = q[1] ≥ γ each round; the remainder is the learning cost.
    assert!(trace.regret() >= exploration - 1e-9);
    assert!(trace.regret() <= exploration + 0.25 * t as f64, "regret {} vs exploration {exploration}", trace.regret());
}
