mod cache;
mod checks;
mod config;
mod drift_spec;
mod error;
mod manifest;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use steinmd_core::limit_laws::GridSpec;

use config::{parse_override, ExperimentConfig};
use error::{CliError, Result};
use pipeline::Pipeline;

/// Exact enumeration, Glauber sampling and moderate-deviation checks for
/// Curie-Weiss and monomer-dimer models.
#[derive(Parser)]
#[command(name = "steinmd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact distribution of the magnetization for every n.
    Enumerate(ConfigArgs),
    /// Glauber sample paths of the Curie-Weiss sum for every n.
    Sample(ConfigArgs),
    /// Tail ratio curves against the limit law for every n.
    Ratio(ConfigArgs),
    /// Ratio curves plus a log-log fit of the worst error; exits 1 off the predicted slope.
    Scaling(ConfigArgs),
    /// Per-n error and exchangeable-pair diagnostics as JSON and a text table.
    Report(ConfigArgs),
    /// Stein equation residual and solution bounds for one limit law.
    SteinCheck(SteinArgs),
    /// Grid checks of the regularity conditions on a drift function.
    Conditions(ConditionArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment config.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set md.J=0.5`. Applied before the flags below.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<u64>>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    z_grid_size: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut ov = self.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
        let int = |v: u64| i64::try_from(v).map(toml::Value::Integer).map_err(|_| CliError::Config(format!("{v} is too large")));
        if let Some(m) = &self.model {
            ov.push(("model".into(), toml::Value::String(m.clone())));
        }
        if let Some(ns) = &self.n_list {
            let arr = ns.iter().map(|&n| int(n)).collect::<Result<Vec<_>>>()?;
            ov.push(("n_list".into(), toml::Value::Array(arr)));
        }
        if let Some(m) = &self.method {
            ov.push(("method".into(), toml::Value::String(m.clone())));
        }
        if let Some(s) = self.seed {
            ov.push(("sampler.seed".into(), int(s)?));
        }
        if let Some(z) = self.z_grid_size {
            ov.push(("z_grid_size".into(), int(z as u64)?));
        }
        if let Some(w) = self.workers {
            ov.push(("workers".into(), int(w as u64)?));
        }
        if let Some(d) = &self.output_dir {
            ov.push(("output_dir".into(), toml::Value::String(d.to_string_lossy().into_owned())));
        }
        ExperimentConfig::load(self.config.as_deref(), &ov)
    }
}

#[derive(Args)]
struct SteinArgs {
    /// gaussian, quartic, normal:VAR, monomial:A:P or poly:C1,C3,...
    #[arg(long, default_value = "quartic")]
    law: String,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.5, 1.0, 2.0])]
    z: Vec<f64>,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConditionArgs {
    /// gaussian, quartic, normal:VAR, monomial:A:P or poly:C1,C3,...
    #[arg(long)]
    drift: String,
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    #[arg(long, default_value_t = 1001)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Prints `value` as JSON and optionally writes it to `out`.
fn emit<T: serde::Serialize>(value: &T, out: Option<&PathBuf>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(p) = out {
        std::fs::write(p, &text).map_err(|e| CliError::io(format!("writing {}", p.display()), e))?;
    }
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Enumerate(a) => println!("{}", Pipeline::new(a.load()?)?.enumerate()?.display()),
        Command::Sample(a) => println!("{}", Pipeline::new(a.load()?)?.sample()?.display()),
        Command::Ratio(a) => println!("{}", Pipeline::new(a.load()?)?.ratio()?.display()),
        Command::Scaling(a) => println!("{}", Pipeline::new(a.load()?)?.scaling()?.display()),
        Command::Report(a) => {
            let (manifest, table) = Pipeline::new(a.load()?)?.report()?;
            print!("{table}");
            println!("{}", manifest.display());
        }
        Command::SteinCheck(a) => {
            let drift = drift_spec::parse_drift(&a.law)?;
            let report = checks::stein_check(drift, &a.z, a.step, a.tolerance)?;
            emit(&report, a.out.as_ref())?;
            if !report.pass {
                return Err(CliError::Verification(format!("Stein check failed for {}", report.law)));
            }
        }
        Command::Conditions(a) => {
            let drift = drift_spec::parse_drift(&a.drift)?;
            let grid = GridSpec {
                radius: a.radius,
                points: a.points,
            };
            let report = checks::conditions(&drift, &grid)?;
            emit(&report, a.out.as_ref())?;
            if !report.all_ok() {
                return Err(CliError::Verification(format!("conditions fail for {}", report.drift)));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("steinmd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
