use hybrid_core::oracles::{FiniteClass, ThresholdClass};
use hybrid_core::predictor::{
    inner_sup, outer_objective, predict, predict_binary_fast, predict_general, relaxation_r, relaxation_rtilde, DrawMode,
    GameHistory, PredictorConfig, RelaxationDraw, SidePool,
};
use hybrid_core::rng::{stream, tag, GameRng};
use hybrid_core::verify::estimate_rademacher;
use hybrid_core::{Feature, HypothesisClass, LabeledPair, Loss, Sign};
use rand::Rng;

fn f(v: f64) -> Feature<f64> {
    Feature::scalar(v).unwrap()
}

struct Instance {
    history: Vec<LabeledPair<f64>>,
    current: Feature<f64>,
    draw: RelaxationDraw<f64>,
    horizon: usize,
}

fn random_instance(rng: &mut GameRng, support: &[Feature<f64>], binary_labels: bool) -> Instance {
    let j = rng.gen_range(0..=3);
    let history = (0..j)
        .map(|_| {
            let y = if binary_labels { f64::from(u8::from(rng.gen_bool(0.5))) } else { rng.gen() };
            LabeledPair::new(support[rng.gen_range(0..support.len())].clone(), y).unwrap()
        })
        .collect();
    let count = rng.gen_range(0..=2);
    let halluc: Vec<Feature<f64>> = (0..count).map(|_| support[rng.gen_range(0..support.len())].clone()).collect();
    let signs = (0..count).map(|_| Sign::random(rng)).collect();
    let draw = RelaxationDraw { halluc, signs, indices: (0..count).collect() };
    Instance { history, current: support[rng.gen_range(0..support.len())].clone(), draw, horizon: j + 1 + count }
}

/// `φ` on a 0.001 grid in both `y` and `ŷ`.
fn fine_phi<C: HypothesisClass<f64>>(inst: &Instance, class: &C, cfg: &PredictorConfig<f64>) -> (Vec<f64>, Vec<f64>) {
    let h = GameHistory { rounds: &inst.history, current: &inst.current };
    let ys: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let g: Vec<f64> = ys.iter().map(|&y| inner_sup(h, &inst.draw, y, class, cfg).unwrap()).collect();
    let phi = ys
        .iter()
        .map(|&yh| ys.iter().zip(&g).map(|(&y, &gy)| cfg.loss.value(yh, y) + gy).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    (ys, phi)
}

#[test]
fn general_path_is_near_the_full_grid_minimax() {
    let support: Vec<Feature<f64>> = [0.15, 0.5, 0.85].iter().map(|&v| f(v)).collect();
    let mut rng = stream(31, tag::INSTANCE, 0);
    for _ in 0..100 {
        let rows = (0..rng.gen_range(1..=5)).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
        let class = FiniteClass::from_table(support.clone(), rows).unwrap();
        let inst = random_instance(&mut rng, &support, false);
        let cfg = PredictorConfig::new(inst.horizon, Loss::absolute()).unwrap();
        let yhat = predict_general(GameHistory { rounds: &inst.history, current: &inst.current }, &inst.draw, &class, &cfg)
            .unwrap()
            .value;
        let (ys, phi) = fine_phi(&inst, &class, &cfg);
        let best = phi.iter().cloned().fold(f64::INFINITY, f64::min);
        let at = ((yhat * 1000.0).round() as usize).min(1000);
        let gap = phi[at] - best;
        let bound = 2.0 / (inst.horizon as f64).sqrt() + 1e-3;
        assert!(gap <= bound, "gap {gap} > {bound} at ŷ={yhat} (grid point {})", ys[at]);
    }
}

#[test]
fn general_path_call_budget() {
    let class = FiniteClass::constants(&[0.2, 0.6]).unwrap();
    for m in [1usize, 4, 9, 50, 400] {
        let cfg = PredictorConfig::new(m, Loss::absolute()).unwrap();
        let x = f(0.5);
        let p = predict_general(
            GameHistory { rounds: &[], current: &x },
            &RelaxationDraw { halluc: vec![], signs: vec![], indices: vec![] },
            &class,
            &cfg,
        )
        .unwrap();
        assert!(p.erm_calls <= (m as f64).sqrt().ceil() as usize + 2, "M={m}: {} calls", p.erm_calls);
    }
}

#[test]
fn fast_and_general_paths_agree_on_binary_instances() {
    let support: Vec<Feature<f64>> = [0.1, 0.35, 0.6, 0.9].iter().map(|&v| f(v)).collect();
    let mut rng = stream(32, tag::INSTANCE, 0);
    for _ in 0..200 {
        let inst = random_instance(&mut rng, &support, true);
        let cfg = PredictorConfig::new(inst.horizon, Loss::absolute()).unwrap();
        let h = GameHistory { rounds: &inst.history, current: &inst.current };
        let fast = predict_binary_fast(h, &inst.draw, &ThresholdClass, &cfg).unwrap();
        assert_eq!(fast.erm_calls, 2);
        let general = predict_general(h, &inst.draw, &ThresholdClass, &cfg).unwrap();
        let pf = outer_objective(h, &inst.draw, &ThresholdClass, &cfg, fast.value).unwrap();
        let pg = outer_objective(h, &inst.draw, &ThresholdClass, &cfg, general.value).unwrap();
        assert!(pf <= pg + 1e-12, "fast path is the exact minimizer");
        assert!(pg - pf <= cfg.yhat_tolerance, "φ gap {}", pg - pf);
        let chosen = predict(h, &inst.draw, &ThresholdClass, &cfg).unwrap();
        assert_eq!(chosen, fast);
    }
}

#[test]
fn two_constant_relaxation_with_one_hallucination() {
    let class = FiniteClass::constants(&[0.0, 1.0]).unwrap();
    let cfg = PredictorConfig::new(1, Loss::absolute()).unwrap();
    let pool = SidePool::new(vec![f(0.4), f(0.6)]);
    let mut rng = stream(3, tag::CHECK, 0);
    let r = relaxation_r(&[], &pool, &class, &cfg, DrawMode::WithoutReplacement, 20_000, &mut rng).unwrap();
    assert!((r.mean - 1.0).abs() <= 3.0 * r.stderr, "{r:?}");
}

#[test]
fn initial_relaxation_is_twice_a_rademacher_average() {
    let class = ThresholdClass;
    let m = 6;
    let cfg = PredictorConfig::new(m, Loss::absolute()).unwrap();
    let pool_points: Vec<Feature<f64>> = (0..m).map(|i| f((i as f64 + 0.5) / m as f64)).collect();
    let pool = SidePool::new(pool_points.clone());
    let mut rng = stream(4, tag::CHECK, 0);
    // Position 1 drawn from the pool law itself, the rest from the pool.
    let rt = relaxation_rtilde(
        &[],
        &pool,
        |r: &mut GameRng| pool_points[r.gen_range(0..m)].clone(),
        &class,
        &cfg,
        DrawMode::WithReplacement,
        20_000,
        &mut rng,
    )
    .unwrap();
    let mut xs_rng = stream(4, tag::CHECK, 1);
    let mut sums = Vec::new();
    for _ in 0..200 {
        let xs: Vec<Feature<f64>> = (0..m).map(|_| pool_points[xs_rng.gen_range(0..m)].clone()).collect();
        sums.push(estimate_rademacher(&class, &xs, 200, &mut xs_rng).unwrap().mean);
    }
    let rad = sums.iter().sum::<f64>() / sums.len() as f64;
    let se = (sums.iter().map(|s| (s - rad).powi(2)).sum::<f64>() / (sums.len() * (sums.len() - 1)) as f64).sqrt();
    let diff = rt.mean - 2.0 * rad;
    assert!(diff.abs() <= 3.0 * (rt.stderr.powi(2) + 4.0 * se * se).sqrt() + 0.02, "R̃₀ {} vs 2·rad {}", rt.mean, 2.0 * rad);
}
