use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use hybrid_harness::config::{parse_list, parse_override, set_path};
use hybrid_harness::{run_experiment, ExperimentConfig, HarnessError, Mode};

/// Hybrid online learning experiments.
#[derive(Parser)]
#[command(name = "hybrid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Epoch predictor against an adversary catalog entry.
    Online(Common),
    /// Block-restarted predictor on a piecewise-stationary process.
    Shifting(Common),
    /// Contextual bandit with a policy class.
    Bandit(Common),
    /// Run the property check suite.
    Verify(Common),
    /// Estimate the Rademacher complexity of a class.
    Rademacher(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds, as `0,1,2` or `0..20`.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Horizons, as `512,1024,2048`.
    #[arg(long)]
    horizons: Option<String>,
    /// Override a config field, e.g. `--set adversary.name=flip_to_far`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn resolve(mode: Mode, args: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut value = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| HarnessError::Config { path: p.display().to_string(), msg: e.to_string() })?;
            serde_json::from_str(&text).map_err(|e| HarnessError::Config { path: p.display().to_string(), msg: e.to_string() })?
        }
        None => Value::Object(Default::default()),
    };
    for o in &args.overrides {
        let (k, v) = parse_override(o)?;
        set_path(&mut value, &k, v)?;
    }
    set_path(&mut value, "mode", serde_json::to_value(mode)?)?;
    if let Some(s) = &args.seed {
        set_path(&mut value, "seeds", serde_json::to_value(parse_list::<u64>("seeds", s)?)?)?;
    }
    if let Some(h) = &args.horizons {
        set_path(&mut value, "horizons", serde_json::to_value(parse_list::<usize>("horizons", h)?)?)?;
    }
    if let Some(o) = &args.out {
        set_path(&mut value, "out", Value::String(o.display().to_string()))?;
    }
    ExperimentConfig::from_value(value)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Online(a) => (Mode::Online, a),
        Command::Shifting(a) => (Mode::Shifting, a),
        Command::Bandit(a) => (Mode::Bandit, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::Rademacher(a) => (Mode::Rademacher, a),
    };
    let outcome = resolve(mode, args).and_then(|cfg| run_experiment(&cfg));
    match outcome {
        Ok(summary) => {
            if let Some(checks) = &summary.checks {
                for c in checks {
                    println!("{}", c.line());
                }
            }
            for h in &summary.horizons {
                println!("T={} mean_regret={:.3} std_regret={:.3}", h.horizon, h.mean_regret, h.std_regret);
            }
            if let Some(rows) = &summary.rademacher {
                for r in rows {
                    let exact = r.exact.map(|e| format!(" exact={e:.4}")).unwrap_or_default();
                    println!("T={} seed={} estimate={:.4}±{:.4}{exact}", r.horizon, r.seed, r.mean, r.stderr);
                }
            }
            match serde_json::to_string(&summary) {
                Ok(s) => println!("{s}"),
                Err(e) => eprintln!("error: {e}"),
            }
            if summary.failed() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
