//! Command-line arguments and the resolved run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use entrokit::estimators::ResubCentering;
use entrokit::harness::Denominator;
use entrokit::{DistributionModel, Error, EstimatorKind, KernelSpec, Result};

#[derive(Debug, Parser)]
#[command(
    name = "entrokit",
    version,
    about = "Kernel-type Shannon entropy estimators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the entropy of observations read from a CSV file.
    Estimate(EstimateArgs),
    /// Estimate on a sample from a model and compare with its true entropy.
    Validate(ValidateArgs),
    /// Sweep a bandwidth grid over several sample sizes and seeds.
    Sweep(SweepArgs),
    /// Measure the smoothing bias of a kernel on a model.
    Bias(BiasArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorArg {
    MaxLog,
    TwoLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringArg {
    Unconditional,
    Conditional,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Kernel: boxcar, epanechnikov, gaussian, double_exponential or poly:s=<even>.
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    /// Threshold constant β in γₙ = β (log n)^(−α).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Threshold exponent α.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Grid nodes per axis.
    #[arg(long)]
    pub points: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Report entropies in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub h: f64,
    /// Also compute the leave-one-out estimate.
    #[arg(long)]
    pub loo: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Model, e.g. normal:sigma=1, uniform:d=2, expo:lambda=2, cosine, gaussmix:w=0.5,mu=3.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub h: f64,
    /// Comma-separated estimators: plugin, resub, loo.
    #[arg(long, default_value = "plugin,resub")]
    pub estimators: String,
    #[arg(long, value_enum, default_value = "unconditional")]
    pub resub_centering: CenteringArg,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: String,
    /// Comma-separated sample sizes.
    #[arg(long = "n")]
    pub n_list: String,
    /// Seeds as a list and/or inclusive ranges, e.g. `1..20` or `1,4,9`.
    #[arg(long, default_value = "1..20")]
    pub seeds: String,
    /// Fixed comma-separated bandwidths instead of the A n^−δ .. B n^−δ grid.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    pub h: Option<String>,
    #[arg(long = "A", id = "a", default_value_t = 0.5)]
    pub a: f64,
    #[arg(long = "B", id = "b", default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long, default_value = "plugin,resub")]
    pub estimators: String,
    #[arg(long, value_enum, default_value = "max-log")]
    pub denominator: DenominatorArg,
    #[arg(long, value_enum, default_value = "unconditional")]
    pub resub_centering: CenteringArg,
    /// Also write the JSON summary to this file.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    #[arg(long)]
    pub model: String,
    /// Comma-separated bandwidths.
    #[arg(long, default_value = "0.2,0.1,0.05")]
    pub h: String,
    /// Grid lower corner, comma-separated; defaults to the inner half of the support.
    #[arg(long)]
    pub grid_lower: Option<String>,
    #[arg(long)]
    pub grid_upper: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Bandwidths {
    Single {
        h: f64,
    },
    List {
        h: Vec<f64>,
    },
    Scaled {
        a: f64,
        b: f64,
        delta: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Estimate,
    Validate,
    Sweep,
    Bias,
}

/// Fully resolved configuration of one run; echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input_path: Option<PathBuf>,
    pub model: Option<String>,
    pub kernel: String,
    pub bandwidths: Bandwidths,
    pub beta: f64,
    pub alpha: f64,
    pub points_per_axis: Option<usize>,
    pub grid_lower: Option<Vec<f64>>,
    pub grid_upper: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
    pub n_list: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub denominator: Denominator,
    pub resub_centering: ResubCentering,
    pub output_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    pub format: Format,
    pub unit: Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Nats,
    Bits,
}

impl Unit {
    /// Converts a value in nats.
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Unit::Nats => nats,
            Unit::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

const DEFAULT_BETA: f64 = 0.25;
const DEFAULT_ALPHA: f64 = 1.0;

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        match cli.command {
            Command::Estimate(a) => {
                let mut cfg = Self::base(CommandKind::Estimate, &a.common, None)?;
                cfg.input_path = Some(a.input);
                cfg.bandwidths = Bandwidths::Single { h: check_h(a.h)? };
                if a.loo {
                    cfg.estimators.push(EstimatorKind::LeaveOneOut);
                }
                Ok(cfg)
            }
            Command::Validate(a) => {
                let mut cfg = Self::base(CommandKind::Validate, &a.common, Some(&a.model))?;
                cfg.bandwidths = Bandwidths::Single { h: check_h(a.h)? };
                cfg.n_list = vec![a.n];
                cfg.seeds = vec![a.seed];
                cfg.estimators = parse_estimators(&a.estimators)?;
                cfg.resub_centering = a.resub_centering.into();
                Ok(cfg)
            }
            Command::Sweep(a) => {
                let mut cfg = Self::base(CommandKind::Sweep, &a.common, Some(&a.model))?;
                cfg.bandwidths = match &a.h {
                    Some(list) => Bandwidths::List {
                        h: parse_reals(list)?
                            .into_iter()
                            .map(check_h)
                            .collect::<Result<_>>()?,
                    },
                    None => Bandwidths::Scaled {
                        a: a.a,
                        b: a.b,
                        delta: a.delta,
                        count: a.count,
                    },
                };
                cfg.n_list = parse_sizes(&a.n_list)?;
                cfg.seeds = parse_seeds(&a.seeds)?;
                cfg.estimators = parse_estimators(&a.estimators)?;
                cfg.denominator = match a.denominator {
                    DenominatorArg::MaxLog => Denominator::MaxLog,
                    DenominatorArg::TwoLog => Denominator::TwoLogInverseBandwidth,
                };
                cfg.resub_centering = a.resub_centering.into();
                cfg.summary_path = a.summary;
                if a.common.format.is_none() {
                    cfg.format = Format::Csv;
                }
                Ok(cfg)
            }
            Command::Bias(a) => {
                let mut cfg = Self::base(CommandKind::Bias, &a.common, Some(&a.model))?;
                cfg.bandwidths = Bandwidths::List {
                    h: parse_reals(&a.h)?,
                };
                cfg.grid_lower = a.grid_lower.as_deref().map(parse_reals).transpose()?;
                cfg.grid_upper = a.grid_upper.as_deref().map(parse_reals).transpose()?;
                if cfg.grid_lower.is_some() != cfg.grid_upper.is_some() {
                    return Err(Error::Domain(
                        "--grid-lower and --grid-upper go together".into(),
                    ));
                }
                cfg.estimators.clear();
                Ok(cfg)
            }
        }
    }

    fn base(command: CommandKind, common: &CommonArgs, model: Option<&str>) -> Result<Self> {
        let model = model.map(DistributionModel::parse).transpose()?;
        let dim = model.as_ref().map_or(1, |m| m.dimension());
        // validates the name; the dimension is re-checked once data is known
        let kernel = KernelSpec::parse(&common.kernel, dim)?;
        let schedule = model.as_ref().map(|m| m.default_schedule());
        let beta = common
            .beta
            .or(schedule.map(|s| s.beta()))
            .unwrap_or(DEFAULT_BETA);
        let alpha = common
            .alpha
            .or(schedule.map(|s| s.alpha()))
            .unwrap_or(DEFAULT_ALPHA);
        entrokit::ThresholdSchedule::new(beta, alpha)?;
        if common.points == Some(0) || common.points == Some(1) {
            return Err(Error::Domain("--points must be at least 2".into()));
        }
        Ok(Self {
            command,
            input_path: None,
            model: model.map(|m| m.name()),
            kernel: kernel.family().to_string(),
            bandwidths: Bandwidths::List { h: Vec::new() },
            beta,
            alpha,
            points_per_axis: common.points,
            grid_lower: None,
            grid_upper: None,
            seeds: Vec::new(),
            n_list: Vec::new(),
            estimators: vec![EstimatorKind::PluginIntegral, EstimatorKind::Resubstitution],
            denominator: Denominator::MaxLog,
            resub_centering: ResubCentering::Unconditional,
            output_path: common.output.clone(),
            summary_path: None,
            format: common.format.unwrap_or(Format::Json),
            unit: if common.bits { Unit::Bits } else { Unit::Nats },
        })
    }
}

impl From<CenteringArg> for ResubCentering {
    fn from(c: CenteringArg) -> Self {
        match c {
            CenteringArg::Unconditional => ResubCentering::Unconditional,
            CenteringArg::Conditional => ResubCentering::Conditional,
        }
    }
}

fn check_h(h: f64) -> Result<f64> {
    if h > 0.0 && h <= 1.0 {
        Ok(h)
    } else {
        Err(Error::Domain(format!(
            "bandwidth must lie in (0, 1], got {h}"
        )))
    }
}

fn items(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

pub fn parse_reals(s: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = items(s)
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("`{t}` is not a finite number")))
        })
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::Parse("expected at least one number".into()));
    }
    Ok(v)
}

/// Sample sizes; accepts integers and exact forms such as `1e4`.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    parse_reals(s)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= 1e12 {
                Ok(v as usize)
            } else {
                Err(Error::Parse(format!("`{v}` is not a valid sample size")))
            }
        })
        .collect()
}

/// Seeds as comma-separated values or inclusive ranges `a..b`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for t in items(s) {
        let bad = || Error::Parse(format!("`{t}` is not a seed or seed range"));
        if let Some((lo, hi)) = t.split_once("..") {
            let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u64 = hi
                .trim()
                .trim_start_matches('=')
                .parse()
                .map_err(|_| bad())?;
            if hi < lo {
                return Err(bad());
            }
            seeds.extend(lo..=hi);
        } else {
            seeds.push(t.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(Error::Parse("expected at least one seed".into()));
    }
    Ok(seeds)
}

pub fn parse_estimators(s: &str) -> Result<Vec<EstimatorKind>> {
    let mut v: Vec<EstimatorKind> = items(s).map(str::parse).collect::<Result<_>>()?;
    v.sort();
    v.dedup();
    if v.is_empty() {
        return Err(Error::Parse("expected at least one estimator".into()));
    }
    Ok(v)
}
