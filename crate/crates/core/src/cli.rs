//! Command-line front end: one-shot queries take flags, experiments take a
//! JSON config whose `command` key names the subcommand it belongs to.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{limit_law, AsymptoticLaw, RhoPair, DEFAULT_RHO_TOL};
use crate::error::{Error, Result};
use crate::estimator::{accumulate, accumulate_with_noise, c_stat, lse};
use crate::linalg::Mat3;
use crate::montecarlo::{run_experiment, write_raw_csv, MCConfig};
use crate::params::{classify, Params, RegionClass, DEFAULT_TOL};
use crate::simulate::{draw_noise, simulate_ma, simulate_recursion, Field, NoiseMatrix, NoiseSpec};

#[derive(Debug, Parser)]
#[command(name = "sarfield", version, about = "Quarter-plane spatial autoregression: simulation, estimation, limit laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the region of the parameter space containing (alpha, beta, gamma).
    Classify {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Simulate a field from a JSON config and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Least-squares fit of a field CSV; print the estimate as JSON.
    Estimate {
        #[arg(long)]
        field: PathBuf,
        /// Innovations CSV; adds the innovation-weighted sums to the output.
        #[arg(long)]
        noise: Option<PathBuf>,
    },
    /// Print the limit law for the parameters of a JSON config.
    Asymptotics {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a Monte Carlo experiment from a JSON config.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        raw: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMethod {
    #[default]
    Recursion,
    MovingAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub command: String,
    pub params: Params,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub command: String,
    pub params: Params,
    pub size: (usize, usize),
    pub noise: NoiseSpec,
    #[serde(default)]
    pub method: SimulationMethod,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Where to also write the innovations.
    #[serde(default)]
    pub noise_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsConfig {
    pub command: String,
    pub params: Params,
    #[serde(default)]
    pub rho_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McCliConfig {
    pub command: String,
    pub experiment: MCConfig,
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub raw: Option<PathBuf>,
}

/// A config file; its `command` key selects the variant.
#[derive(Debug, Clone, PartialEq)]
pub enum CliConfig {
    Classify(ClassifyConfig),
    Simulate(SimulateConfig),
    Asymptotics(AsymptoticsConfig),
    Mc(McCliConfig),
}

impl CliConfig {
    pub fn command_name(&self) -> &'static str {
        match self {
            CliConfig::Classify(_) => "classify",
            CliConfig::Simulate(_) => "simulate",
            CliConfig::Asymptotics(_) => "asymptotics",
            CliConfig::Mc(_) => "mc",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CliConfig::Classify(ClassifyConfig { params, tol, .. }) => {
                params.validate()?;
                if tol.is_some_and(|t| !(t >= 0.0)) {
                    return Err(Error::Config("tol must be nonnegative".into()));
                }
            }
            CliConfig::Simulate(SimulateConfig { params, size, .. }) => {
                params.validate()?;
                if size.0 == 0 || size.1 == 0 {
                    return Err(Error::Config("size must be positive".into()));
                }
            }
            CliConfig::Asymptotics(AsymptoticsConfig { params, rho_tol, .. }) => {
                params.validate()?;
                if rho_tol.is_some_and(|t| !(t > 0.0)) {
                    return Err(Error::Config("rho_tol must be positive".into()));
                }
            }
            CliConfig::Mc(c) => c.experiment.validate()?,
        }
        Ok(())
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

#[derive(Deserialize)]
struct CommandKey {
    command: String,
}

/// Parses and validates a config; syntax and schema errors carry the position.
///
/// The `command` key is read first and the text is then parsed directly into
/// that command's schema, so positions refer to the original text.
pub fn parse_config(text: &str) -> Result<CliConfig> {
    let key: CommandKey = serde_json::from_str(text).map_err(parse_error)?;
    let cfg = match key.command.as_str() {
        "classify" => CliConfig::Classify(serde_json::from_str(text).map_err(parse_error)?),
        "simulate" => CliConfig::Simulate(serde_json::from_str(text).map_err(parse_error)?),
        "asymptotics" => CliConfig::Asymptotics(serde_json::from_str(text).map_err(parse_error)?),
        "mc" => CliConfig::Mc(serde_json::from_str(text).map_err(parse_error)?),
        other => {
            return Err(Error::Config(format!(
                "unknown command {other:?}; expected classify, simulate, asymptotics or mc"
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_config(path: &Path, expected: &str) -> Result<CliConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    if cfg.command_name() != expected {
        return Err(Error::Config(format!(
            "config is for `{}`, not `{expected}`",
            cfg.command_name()
        )));
    }
    Ok(cfg)
}

/// How a successful dispatch ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done,
    /// The query lies outside the regions with a known limit law.
    Unsupported(String),
    /// An experiment ran but missed its configured tolerances.
    ChecksFailed(Vec<String>),
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::Unsupported(_) => 1,
            Outcome::ChecksFailed(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateOutput {
    pub theta_hat: [f64; 3],
    pub det_b: f64,
    pub residual_ss: f64,
    pub n: usize,
    pub m: usize,
    /// `(A1 - A3, A2 - A3)` when innovations were supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_stat: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsOutput {
    pub params: Params,
    pub region: RegionClass,
    pub supported: bool,
    pub rate_exponent: f64,
    pub covariance: Mat3,
    pub rho: Option<RhoPair>,
}

impl AsymptoticsOutput {
    fn new(params: Params, law: AsymptoticLaw) -> Self {
        AsymptoticsOutput {
            params,
            region: law.region,
            supported: law.supported,
            rate_exponent: law.rate_exponent,
            covariance: law.covariance,
            rho: law.rho,
        }
    }
}

fn write_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs one subcommand, writing its primary output to `out`.
pub fn dispatch(command: &Command, out: &mut dyn Write) -> Result<Outcome> {
    match command {
        Command::Classify { alpha, beta, gamma, tol } => {
            let p = Params::new(*alpha, *beta, *gamma)?;
            writeln!(out, "{}", classify(&p, *tol).tag)?;
            Ok(Outcome::Done)
        }
        Command::Simulate { config, out: out_flag } => {
            let CliConfig::Simulate(SimulateConfig {
                params,
                size,
                noise,
                method,
                out: out_cfg,
                noise_out,
                ..
            }) = load_config(config, "simulate")?
            else {
                unreachable!("load_config checked the command");
            };
            let target = out_flag
                .clone()
                .or(out_cfg)
                .ok_or_else(|| Error::Config("no output path: pass --out or set `out`".into()))?;
            let eps = draw_noise(&noise, size.0, size.1);
            let field = match method {
                SimulationMethod::Recursion => simulate_recursion(&params, &eps),
                SimulationMethod::MovingAverage => simulate_ma(&params, &eps)?,
            };
            field.write_csv(create(&target)?)?;
            if let Some(path) = noise_out {
                eps.write_csv(create(&path)?)?;
            }
            writeln!(out, "wrote {}x{} field to {}", size.0, size.1, target.display())?;
            Ok(Outcome::Done)
        }
        Command::Estimate { field, noise } => {
            let f = Field::read_csv_path(field)?;
            let acc = match noise {
                Some(path) => {
                    let eps = NoiseMatrix::read_csv(std::fs::File::open(path)?)?;
                    accumulate_with_noise(&f, &eps, f.n, f.m)?
                }
                None => accumulate(&f, f.n, f.m)?,
            };
            let est = lse(&acc, &f)?;
            let output = EstimateOutput {
                theta_hat: est.theta_hat,
                det_b: est.det_b,
                residual_ss: est.residual_ss,
                n: est.n,
                m: est.m,
                c_stat: c_stat(&acc).ok(),
            };
            write_json(&output, out)?;
            Ok(Outcome::Done)
        }
        Command::Asymptotics { config } => {
            let CliConfig::Asymptotics(AsymptoticsConfig { params, rho_tol, .. }) = load_config(config, "asymptotics")?
            else {
                unreachable!("load_config checked the command");
            };
            let law = limit_law(&params, rho_tol.unwrap_or(DEFAULT_RHO_TOL))?;
            let output = AsymptoticsOutput::new(params, law);
            write_json(&output, out)?;
            if output.supported {
                Ok(Outcome::Done)
            } else {
                Ok(Outcome::Unsupported(format!(
                    "no limit law is available for region {}",
                    output.region.tag
                )))
            }
        }
        Command::Mc { config, report, raw } => {
            let CliConfig::Mc(McCliConfig {
                experiment,
                report: report_cfg,
                raw: raw_cfg,
                ..
            }) = load_config(config, "mc")?
            else {
                unreachable!("load_config checked the command");
            };
            let result = run_experiment(&experiment)?;
            match report.clone().or(report_cfg) {
                Some(path) => write_json(&result, &mut create(&path)?)?,
                None => write_json(&result, out)?,
            }
            if let Some(path) = raw.clone().or(raw_cfg) {
                write_raw_csv(&result.raw, create(&path)?)?;
            }
            match result.checks {
                Some(c) if !c.passed => Ok(Outcome::ChecksFailed(c.failures)),
                _ => Ok(Outcome::Done),
            }
        }
    }
}
