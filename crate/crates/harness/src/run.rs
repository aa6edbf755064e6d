//! Executes a config: one trace per (horizon, seed), CSV and JSON artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use hybrid_core::bandit::{run_bandit, BanditConfig, BanditTrace};
use hybrid_core::environment::{sample_feature, FeatureProcess};
use hybrid_core::epochs::{run_epoch_predictor, GameSettings};
use hybrid_core::rng::{stream, tag};
use hybrid_core::shifting::run_shifting;
use hybrid_core::stats::{mean_std, McEstimate};
use hybrid_core::trace::RegretTrace;
use hybrid_core::verify::{default_suite, estimate_rademacher, rademacher_exact, CheckReport};
use hybrid_core::{Error as EngineError, HypothesisClass};

use crate::config::{ClassChoice, ExperimentConfig, Mode};
use crate::error::HarnessError;
use crate::fit::{fit_exponent, ExponentFit};

pub const SCHEMA_LINE: &str = "# schema=1";

/// Exhaustive sign enumeration is used up to this horizon.
const EXACT_RADEMACHER_MAX: usize = 16;

macro_rules! with_class {
    ($choice:expr, $c:ident => $body:expr) => {
        match $choice {
            ClassChoice::Threshold($c) => $body,
            ClassChoice::Interval($c) => $body,
            ClassChoice::Finite($c) => $body,
            #[cfg(feature = "lipschitz")]
            ClassChoice::Lipschitz($c) => $body,
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonStat {
    pub horizon: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub regrets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RademacherRow {
    pub horizon: usize,
    pub seed: u64,
    pub mean: f64,
    pub stderr: f64,
    pub exact: Option<f64>,
}

/// The JSON summary written next to the traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub mode: Mode,
    pub seeds: Vec<u64>,
    /// At the largest horizon.
    pub mean_regret: Option<f64>,
    pub std_regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent_fit: Option<ExponentFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent_fit_notice: Option<String>,
    pub erm_calls_total: u64,
    pub horizons: Vec<HorizonStat>,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rademacher: Option<Vec<RademacherRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

impl Summary {
    /// True when any pass/fail check failed.
    pub fn failed(&self) -> bool {
        self.checks.as_ref().is_some_and(|c| c.iter().any(CheckReport::failed))
    }
}

struct JobOutput {
    horizon: usize,
    regret: f64,
    erm_calls: u64,
    files: Vec<PathBuf>,
}

/// Runs the experiment and writes its artifacts under `config.out`.
/// On failure every file this run created is removed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary, HarnessError> {
    config.validate()?;
    fs::create_dir_all(&config.out)?;
    let mut created: Vec<PathBuf> = Vec::new();
    let result = run_inner(config, &mut created);
    if result.is_err() {
        for f in &created {
            let _ = fs::remove_file(f);
        }
    }
    result
}

fn run_inner(config: &ExperimentConfig, created: &mut Vec<PathBuf>) -> Result<Summary, HarnessError> {
    let hash = config.hash();
    let mut summary = Summary {
        config_hash: hash.clone(),
        mode: config.mode,
        seeds: config.seeds.clone(),
        mean_regret: None,
        std_regret: None,
        exponent_fit: None,
        exponent_fit_notice: None,
        erm_calls_total: 0,
        horizons: vec![],
        files: vec![],
        checks: None,
        rademacher: None,
        notice: None,
    };
    match config.mode {
        Mode::Verify => {
            let mut all = Vec::new();
            for &seed in &config.seeds {
                all.extend(default_suite(seed, config.mc_samples)?);
            }
            summary.checks = Some(all);
        }
        Mode::Rademacher => {
            summary.rademacher = Some(rademacher_rows(config)?);
            summary.notice = Some("estimates fix x^T drawn from env, so they lower-bound the sup over x^T".into());
        }
        Mode::Online | Mode::Shifting | Mode::Bandit => {
            let jobs: Vec<(usize, u64)> =
                config.horizon_list().into_iter().flat_map(|t| config.seeds.iter().map(move |&s| (t, s))).collect();
            let outcomes: Vec<Result<JobOutput, HarnessError>> =
                jobs.par_iter().map(|&(t, seed)| run_job(config, &hash, t, seed)).collect();
            let mut outputs = Vec::with_capacity(outcomes.len());
            let mut first_err = None;
            for o in outcomes {
                match o {
                    Ok(out) => {
                        created.extend(out.files.iter().cloned());
                        outputs.push(out);
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_err {
                // Jobs that failed midway may have left files behind.
                for &(t, seed) in &jobs {
                    let stem = stem(config.mode, &hash, t, seed);
                    created.push(config.out.join(format!("{stem}.csv")));
                    created.push(config.out.join(format!("{stem}.meta.json")));
                }
                return Err(e);
            }
            aggregate(config, &outputs, &mut summary);
        }
    }
    let path = config.out.join(format!("summary_{}_{hash}.json", config.mode.as_str()));
    created.push(path.clone());
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    summary.files.push(file_name(&path));
    Ok(summary)
}

fn aggregate(config: &ExperimentConfig, outputs: &[JobOutput], summary: &mut Summary) {
    for t in config.horizon_list() {
        let regrets: Vec<f64> = outputs.iter().filter(|o| o.horizon == t).map(|o| o.regret).collect();
        let (mean, std) = mean_std(&regrets);
        summary.horizons.push(HorizonStat { horizon: t, mean_regret: mean, std_regret: std, regrets });
    }
    summary.erm_calls_total = outputs.iter().map(|o| o.erm_calls).sum();
    summary.files = outputs.iter().flat_map(|o| o.files.iter().map(|f| file_name(f))).collect();
    if let Some(last) = summary.horizons.last() {
        summary.mean_regret = Some(last.mean_regret);
        summary.std_regret = Some(last.std_regret);
    }
    if summary.horizons.len() > 1 {
        let ts: Vec<usize> = summary.horizons.iter().map(|h| h.horizon).collect();
        let rs: Vec<f64> = summary.horizons.iter().map(|h| h.mean_regret).collect();
        match fit_exponent(&ts, &rs) {
            Ok(f) => summary.exponent_fit = Some(f),
            Err(why) => summary.exponent_fit_notice = Some(why),
        }
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn stem(mode: Mode, hash: &str, horizon: usize, seed: u64) -> String {
    format!("{}_T{horizon}_s{seed}_{hash}", mode.as_str())
}

fn settings(config: &ExperimentConfig, horizon: usize, seed: u64) -> Result<GameSettings<f64>, HarnessError> {
    let mut s = GameSettings::new(horizon, config.build_loss(), config.resolved_schedule()?, seed);
    s.probe_samples = config.probe_samples;
    s.draw_mode = config.draw_mode;
    Ok(s)
}

fn online_trace<C: HypothesisClass<f64> + Clone + 'static>(
    class: &C,
    config: &ExperimentConfig,
    process: &FeatureProcess<f64>,
    horizon: usize,
    seed: u64,
) -> Result<RegretTrace<f64>, HarnessError> {
    let loss = config.build_loss();
    let adversary = config.adversary.build(class, &loss)?;
    let s = settings(config, horizon, seed)?;
    let trace = if config.mode == Mode::Shifting {
        let k = config.shifts.unwrap_or_else(|| process.change_points().len().max(1));
        run_shifting(class, process, adversary.as_ref(), &s, k)?
    } else {
        run_epoch_predictor(class, process, adversary.as_ref(), &s)?
    };
    Ok(trace)
}

fn run_job(config: &ExperimentConfig, hash: &str, horizon: usize, seed: u64) -> Result<JobOutput, HarnessError> {
    let process = config.build_process()?;
    let base = config.out.join(stem(config.mode, hash, horizon, seed));
    let csv_path = base.with_extension("csv");
    let meta_path = base.with_extension("meta.json");
    if config.mode == Mode::Bandit {
        let class = config.build_policies()?;
        let bc = BanditConfig { horizon, gamma: config.gamma_choice(), seed };
        let trace = run_bandit(&class, &process, &config.costs, &bc)?;
        write_bandit_csv(&csv_path, &trace)?;
        write_meta(&meta_path, hash, &trace.meta)?;
        return Ok(JobOutput {
            horizon,
            regret: trace.regret(),
            erm_calls: trace.meta.erm_calls_total,
            files: vec![csv_path, meta_path],
        });
    }
    let class = config.class.build()?;
    let trace = with_class!(&class, c => online_trace(c, config, &process, horizon, seed)?);
    if !trace.prefix_sums_consistent(1e-6) {
        return Err(EngineError::Invariant("cumulative columns are not prefix sums".into()).into());
    }
    if trace.erm_calls() != trace.meta.erm_calls_total {
        return Err(EngineError::Invariant("erm_calls column disagrees with the oracle counter".into()).into());
    }
    write_online_csv(&csv_path, &trace)?;
    write_meta(&meta_path, hash, &trace.meta)?;
    Ok(JobOutput { horizon, regret: trace.regret(), erm_calls: trace.meta.erm_calls_total, files: vec![csv_path, meta_path] })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{SCHEMA_LINE}")?;
    Ok(csv::Writer::from_writer(f))
}

pub const ONLINE_COLUMNS: [&str; 12] =
    ["t", "epoch", "j", "block", "x", "y", "yhat", "loss", "cum_loss", "comparator_loss", "cum_regret", "erm_calls"];

pub const BANDIT_COLUMNS: [&str; 11] =
    ["t", "epoch", "j", "arm", "gamma", "q", "expected_loss", "realized_cost", "comparator_cost", "cum_regret", "erm_calls"];

fn write_online_csv(path: &Path, trace: &RegretTrace<f64>) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    w.write_record(ONLINE_COLUMNS)?;
    for r in &trace.rows {
        w.write_record([
            r.t.to_string(),
            r.epoch.to_string(),
            r.j.to_string(),
            r.block.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.yhat.to_string(),
            r.loss.to_string(),
            r.cum_loss.to_string(),
            r.comparator_loss.to_string(),
            r.cum_regret.to_string(),
            r.erm_calls.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_bandit_csv(path: &Path, trace: &BanditTrace<f64>) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    w.write_record(BANDIT_COLUMNS)?;
    for r in &trace.rows {
        let q = r.q.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        w.write_record([
            r.t.to_string(),
            r.epoch.to_string(),
            r.j.to_string(),
            r.arm.to_string(),
            r.gamma.to_string(),
            q,
            r.expected_loss.to_string(),
            r.realized_cost.to_string(),
            r.comparator_cost.to_string(),
            r.cum_regret.to_string(),
            r.erm_calls.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MetaFile<'a, M> {
    config_hash: &'a str,
    meta: &'a M,
}

fn write_meta<M: Serialize>(path: &Path, hash: &str, meta: &M) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &MetaFile { config_hash: hash, meta })?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn rademacher_rows(config: &ExperimentConfig) -> Result<Vec<RademacherRow>, HarnessError> {
    let class = config.class.build()?;
    let process = config.build_process()?;
    let mut rows = Vec::new();
    for t in config.horizon_list() {
        for &seed in &config.seeds {
            let xs: Vec<_> = (1..=t).map(|i| sample_feature(&process, i, &mut stream(seed, tag::FEATURE, i as u64))).collect();
            let mut rng = stream(seed, tag::CHECK, t as u64);
            let (est, exact): (McEstimate, Option<f64>) = with_class!(&class, c => {
                let est = estimate_rademacher(c, &xs, config.mc_samples, &mut rng)?;
                let exact = if t <= EXACT_RADEMACHER_MAX { Some(rademacher_exact(c, &xs)?) } else { None };
                (est, exact)
            });
            rows.push(RademacherRow { horizon: t, seed, mean: est.mean, stderr: est.stderr, exact });
        }
    }
    Ok(rows)
}

/// Reads back the data rows of a trace CSV written by this crate.
pub fn read_trace_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    let text = fs::read_to_string(path)?;
    let body = text
        .strip_prefix(SCHEMA_LINE)
        .and_then(|s| s.strip_prefix('\n'))
        .ok_or_else(|| HarnessError::Config { path: path.display().to_string(), msg: "missing schema line".into() })?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect())).collect::<Result<_, _>>()?;
    Ok((header, rows))
}
