//! Experiment configuration: JSON schema, overrides and resolution into
//! engine objects.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use hybrid_core::bandit::{CostSpec, GammaChoice, PolicyClass};
use hybrid_core::environment::{AdversarySpec, FeatureDistribution, FeatureProcess, ShiftingProcess};
use hybrid_core::epochs::EpochSchedule;
use hybrid_core::oracles::{FiniteClass, IntervalClass, ThresholdClass};
use hybrid_core::predictor::DrawMode;
use hybrid_core::{Feature, Loss};

#[cfg(feature = "lipschitz")]
use hybrid_core::oracles::LipschitzClass;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Online,
    Shifting,
    Bandit,
    Verify,
    Rademacher,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Online => "online",
            Mode::Shifting => "shifting",
            Mode::Bandit => "bandit",
            Mode::Verify => "verify",
            Mode::Rademacher => "rademacher",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassSpec {
    Threshold,
    Interval {
        min_len: f64,
    },
    Constants {
        values: Vec<f64>,
    },
    /// Finite class given by its values on a finite support.
    Table {
        support: Vec<f64>,
        table: Vec<Vec<f64>>,
    },
    Lipschitz {
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    ThresholdPack { theta: f64 },
    ConstantArms { arms: usize },
    Table { arms: usize, support: Vec<f64>, table: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Point {
        x: f64,
    },
    Discrete {
        support: Vec<f64>,
        probs: Vec<f64>,
    },
    /// Independent coordinates.
    Product {
        coords: Vec<EnvSpec>,
    },
    Shifting {
        segments: Vec<SegmentSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub start: usize,
    pub dist: EnvSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSpec {
    Absolute,
    Squared,
}

/// One experiment. Every field has a default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub class: ClassSpec,
    pub policies: PolicySpec,
    pub env: EnvSpec,
    pub adversary: AdversarySpec,
    pub costs: CostSpec,
    pub horizon: usize,
    /// When set, every horizon is run and an exponent is fitted.
    pub horizons: Option<Vec<usize>>,
    /// Defaults to the polynomial schedule implied by `q`.
    pub schedule: Option<EpochSchedule>,
    pub q: f64,
    pub loss: LossSpec,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub mc_samples: usize,
    pub probe_samples: usize,
    pub draw_mode: DrawMode,
    /// Shifting mode: number of changes `K`; defaults to the env's count.
    pub shifts: Option<usize>,
    /// Bandit mode: fixed exploration rate; `gamma_default` when absent.
    pub gamma: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Online,
            class: ClassSpec::Threshold,
            policies: PolicySpec::ThresholdPack { theta: 0.5 },
            env: EnvSpec::Uniform { lo: 0.0, hi: 1.0 },
            adversary: AdversarySpec::NoisyTarget { threshold: 0.5, p: 0.1 },
            costs: CostSpec::ThresholdGap { threshold: 0.5, gap: 1.0 },
            horizon: 512,
            horizons: None,
            schedule: None,
            q: 0.5,
            loss: LossSpec::Absolute,
            seeds: vec![0],
            out: PathBuf::from("out"),
            mc_samples: 2000,
            probe_samples: 64,
            draw_mode: DrawMode::WithoutReplacement,
            shifts: None,
            gamma: None,
        }
    }
}

fn cfg_err(path: impl Into<String>, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config { path: path.into(), msg: msg.to_string() }
}

enum Step<'a> {
    Key(&'a str),
    Index(usize),
}

fn steps(path: &str) -> Result<Vec<Step<'_>>, HarnessError> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = part.split_at(part.find('[').unwrap_or(part.len()));
        if key.is_empty() {
            return Err(cfg_err(path, "empty key segment"));
        }
        out.push(Step::Key(key));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(|| cfg_err(path, "unclosed `[`"))?;
            let idx = rest[1..close].parse().map_err(|_| cfg_err(path, format!("bad index `{}`", &rest[1..close])))?;
            out.push(Step::Index(idx));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return Err(cfg_err(path, "expected `[` or `.` after an index"));
            }
        }
    }
    Ok(out)
}

/// Sets `value` at a path like `env.segments[1].start`, creating objects
/// along the way. Indexed arrays must already exist.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), HarnessError> {
    let steps = steps(path)?;
    let mut cur = root;
    let mut seen = String::new();
    for (i, step) in steps.iter().enumerate() {
        let last = i + 1 == steps.len();
        match *step {
            Step::Key(k) => {
                let map = cur.as_object_mut().ok_or_else(|| cfg_err(seen.clone(), "not an object"))?;
                if last {
                    map.insert(k.to_owned(), value);
                    return Ok(());
                }
                cur = map.entry(k.to_owned()).or_insert_with(|| Value::Object(Default::default()));
                if !seen.is_empty() {
                    seen.push('.');
                }
                seen.push_str(k);
            }
            Step::Index(n) => {
                let arr = cur.as_array_mut().ok_or_else(|| cfg_err(seen.clone(), "not an array"))?;
                let len = arr.len();
                let slot = arr.get_mut(n).ok_or_else(|| cfg_err(format!("{seen}[{n}]"), format!("index out of range (len {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                cur = slot;
                seen.push_str(&format!("[{n}]"));
            }
        }
    }
    unreachable!("loop returns on the last step")
}

/// Parses `key=value`; the value is read as JSON, falling back to a string.
pub fn parse_override(s: &str) -> Result<(String, Value), HarnessError> {
    let (k, v) = s.split_once('=').ok_or_else(|| cfg_err(s, "override must look like key=value"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_owned()));
    Ok((k.trim().to_owned(), value))
}

/// Parses `1,2,5` or the half-open range `0..20`.
pub fn parse_list<T>(field: &str, s: &str) -> Result<Vec<T>, HarnessError>
where
    T: std::str::FromStr + TryFrom<u64>,
    T::Err: std::fmt::Display,
{
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| cfg_err(field, e))?;
        let b: u64 = b.trim().parse().map_err(|e| cfg_err(field, e))?;
        if b <= a {
            return Err(cfg_err(field, format!("empty range {s}")));
        }
        return (a..b).map(|v| T::try_from(v).map_err(|_| cfg_err(field, format!("{v} out of range")))).collect();
    }
    s.split(',').map(|p| p.trim().parse::<T>().map_err(|e| cfg_err(field, e))).collect()
}

impl ExperimentConfig {
    /// Deserializes a JSON value, reporting the failing field path.
    pub fn from_value(value: Value) -> Result<Self, HarnessError> {
        let cfg: Self = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            cfg_err(path, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let value: Value = serde_json::from_str(text).map_err(|e| cfg_err("<root>", e))?;
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon == 0 {
            return Err(cfg_err("horizon", "T must be ≥ 1"));
        }
        if let Some(h) = &self.horizons {
            if h.is_empty() || h.contains(&0) {
                return Err(cfg_err("horizons", "horizons must be nonempty and ≥ 1"));
            }
            if h.windows(2).any(|w| w[1] <= w[0]) {
                return Err(cfg_err("horizons", "horizons must be strictly increasing"));
            }
        }
        if self.seeds.is_empty() {
            return Err(cfg_err("seeds", "at least one seed is required"));
        }
        if self.mc_samples == 0 {
            return Err(cfg_err("mc_samples", "must be ≥ 1"));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 0.5) {
                return Err(cfg_err("gamma", format!("gamma must lie in (0, 1/2], got {g}")));
            }
        }
        self.resolved_schedule()?;
        self.build_process()?;
        Ok(())
    }

    pub fn horizon_list(&self) -> Vec<usize> {
        self.horizons.clone().unwrap_or_else(|| vec![self.horizon])
    }

    pub fn resolved_schedule(&self) -> Result<EpochSchedule, HarnessError> {
        match &self.schedule {
            Some(s) => {
                s.validate().map_err(|e| cfg_err("schedule", e))?;
                Ok(*s)
            }
            None => EpochSchedule::from_q(self.q).map_err(|e| cfg_err("q", e)),
        }
    }

    pub fn build_loss(&self) -> Loss<f64> {
        match self.loss {
            LossSpec::Absolute => Loss::absolute(),
            LossSpec::Squared => Loss::squared(),
        }
    }

    pub fn gamma_choice(&self) -> GammaChoice {
        self.gamma.map_or(GammaChoice::Auto, GammaChoice::Fixed)
    }

    pub fn build_process(&self) -> Result<FeatureProcess<f64>, HarnessError> {
        match &self.env {
            EnvSpec::Shifting { segments } => {
                let segs = segments
                    .iter()
                    .enumerate()
                    .map(|(i, s)| Ok((build_dist(&s.dist, &format!("env.segments[{i}].dist"))?, s.start)))
                    .collect::<Result<Vec<_>, HarnessError>>()?;
                Ok(FeatureProcess::Shifting(ShiftingProcess::new(segs).map_err(|e| cfg_err("env.segments", e))?))
            }
            other => Ok(FeatureProcess::Iid(build_dist(other, "env")?)),
        }
    }

    pub fn build_policies(&self) -> Result<PolicyClass<f64>, HarnessError> {
        let r = match &self.policies {
            PolicySpec::ThresholdPack { theta } => PolicyClass::threshold_pack(*theta),
            PolicySpec::ConstantArms { arms } => PolicyClass::constant_arms(*arms),
            PolicySpec::Table { arms, support, table } => {
                let sup = scalar_features(support, "policies.support")?;
                PolicyClass::from_table(*arms, sup, table.clone())
            }
        };
        r.map_err(|e| cfg_err("policies", e))
    }

    /// Stable digest of everything that determines trace contents, except
    /// the seed and horizon (which go into file names) and the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seeds = vec![];
        c.out = PathBuf::new();
        c.horizons = None;
        c.horizon = 1;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))[..12].to_owned()
    }
}

fn scalar_features(values: &[f64], path: &str) -> Result<Vec<Feature<f64>>, HarnessError> {
    values.iter().enumerate().map(|(i, &v)| Feature::scalar(v).map_err(|e| cfg_err(format!("{path}[{i}]"), e))).collect()
}

fn build_dist(spec: &EnvSpec, path: &str) -> Result<FeatureDistribution<f64>, HarnessError> {
    match spec {
        EnvSpec::Uniform { lo, hi } => FeatureDistribution::uniform(*lo, *hi).map_err(|e| cfg_err(path, e)),
        EnvSpec::Point { x } => Ok(FeatureDistribution::point(Feature::scalar(*x).map_err(|e| cfg_err(format!("{path}.x"), e))?)),
        EnvSpec::Discrete { support, probs } => {
            let sup = scalar_features(support, &format!("{path}.support"))?;
            FeatureDistribution::discrete(sup, probs.clone()).map_err(|e| cfg_err(path, e))
        }
        EnvSpec::Product { coords } => {
            let parts = coords
                .iter()
                .enumerate()
                .map(|(i, c)| build_dist(c, &format!("{path}.coords[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            FeatureDistribution::product(parts).map_err(|e| cfg_err(path, e))
        }
        EnvSpec::Shifting { .. } => Err(cfg_err(path, "shifting processes cannot be nested")),
    }
}

/// A resolved hypothesis class; the runner dispatches on the variant.
#[derive(Debug, Clone)]
pub enum ClassChoice {
    Threshold(ThresholdClass),
    Interval(IntervalClass<f64>),
    Finite(FiniteClass<f64>),
    #[cfg(feature = "lipschitz")]
    Lipschitz(LipschitzClass),
}

impl ClassSpec {
    pub fn build(&self) -> Result<ClassChoice, HarnessError> {
        Ok(match self {
            ClassSpec::Threshold => ClassChoice::Threshold(ThresholdClass),
            ClassSpec::Interval { min_len } => {
                ClassChoice::Interval(IntervalClass::new(*min_len).map_err(|e| cfg_err("class.min_len", e))?)
            }
            ClassSpec::Constants { values } => {
                ClassChoice::Finite(FiniteClass::constants(values).map_err(|e| cfg_err("class.values", e))?)
            }
            ClassSpec::Table { support, table } => {
                let sup = scalar_features(support, "class.support")?;
                ClassChoice::Finite(FiniteClass::from_table(sup, table.clone()).map_err(|e| cfg_err("class.table", e))?)
            }
            #[cfg(feature = "lipschitz")]
            ClassSpec::Lipschitz { dim } => {
                ClassChoice::Lipschitz(LipschitzClass::new(*dim).map_err(|e| cfg_err("class.dim", e))?)
            }
            #[cfg(not(feature = "lipschitz"))]
            ClassSpec::Lipschitz { .. } => return Err(cfg_err("class.kind", "built without the lipschitz feature")),
        })
    }
}
