//! Execution of a resolved [`RunConfig`].

use std::fs::File;
use std::io::{BufWriter, Write};

use serde::Serialize;
use serde_json::{json, Value};

use entrokit::estimators::{entropy_plugin_detailed, entropy_resubstitution};
use entrokit::harness::{
    bias_probe, certainty_interval, sweep, BandwidthRule, SweepConfig, SweepReport, SweepRow,
};
use entrokit::models::{empirical_support, Support, SupportBox};
use entrokit::{
    DataSet, DensityEstimate, DistributionModel, EntropyEstimate, Error, EstimatorKind,
    EvaluationGrid, KernelSpec, Result, ThresholdSchedule,
};

use crate::config::{Bandwidths, CommandKind, Format, RunConfig, Unit};
use crate::ingest::ingest_csv;

/// A failed run: machine-readable kind, message and process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunError {
    pub kind: String,
    pub message: String,
    pub exit_code: u8,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ERROR:{}: {}", self.kind, self.message)
    }
}

impl From<Error> for RunError {
    fn from(err: Error) -> Self {
        RunError {
            kind: err.kind().to_string(),
            message: err.to_string(),
            exit_code: if err.is_numeric() { 2 } else { 1 },
        }
    }
}

/// Runs the command and writes its report to the configured output.
pub fn run(cfg: &RunConfig) -> std::result::Result<(), RunError> {
    match &cfg.output_path {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mut out = BufWriter::new(file);
            run_to(cfg, &mut out)?;
            out.flush().map_err(Error::from)?;
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            run_to(cfg, &mut out)
        }
    }
}

pub fn run_to(cfg: &RunConfig, out: &mut dyn Write) -> std::result::Result<(), RunError> {
    match cfg.command {
        CommandKind::Estimate => Ok(estimate(cfg, out)?),
        CommandKind::Validate => validate(cfg, out),
        CommandKind::Sweep => Ok(run_sweep(cfg, out)?),
        CommandKind::Bias => Ok(bias(cfg, out)?),
    }
}

fn model_of(cfg: &RunConfig) -> Result<DistributionModel> {
    let name = cfg
        .model
        .as_deref()
        .ok_or_else(|| Error::Domain("this command needs --model".into()))?;
    DistributionModel::parse(name)
}

fn single_h(cfg: &RunConfig) -> Result<f64> {
    match cfg.bandwidths {
        Bandwidths::Single { h } => Ok(h),
        _ => Err(Error::Domain(
            "this command needs a single bandwidth".into(),
        )),
    }
}

fn config_value(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn write_json(out: &mut dyn Write, value: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_config_line(out: &mut dyn Write, cfg: &RunConfig) -> Result<()> {
    writeln!(
        out,
        "# config: {}",
        serde_json::to_string(&config_value(cfg))?
    )?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateRecord {
    estimator: EstimatorKind,
    value: Option<f64>,
    gamma: Option<f64>,
    excluded_fraction: Option<f64>,
    interval_lower: Option<f64>,
    interval_upper: Option<f64>,
    status: String,
}

fn estimate_record(unit: Unit, kind: EstimatorKind, r: &Result<EntropyEstimate>) -> EstimateRecord {
    match r {
        Ok(e) => {
            let mut flags = Vec::new();
            if e.flags.empty_level_set {
                flags.push("empty_level_set");
            }
            if e.flags.coarse_grid {
                flags.push("coarse_grid");
            }
            EstimateRecord {
                estimator: kind,
                value: Some(unit.convert(e.value)),
                gamma: Some(e.gamma),
                excluded_fraction: Some(e.excluded_fraction),
                interval_lower: None,
                interval_upper: None,
                status: if flags.is_empty() {
                    "ok".into()
                } else {
                    flags.join(",")
                },
            }
        }
        Err(err) => EstimateRecord {
            estimator: kind,
            value: None,
            gamma: None,
            excluded_fraction: None,
            interval_lower: None,
            interval_upper: None,
            status: format!("error:{}", err.kind()),
        },
    }
}

fn estimate(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let path = cfg
        .input_path
        .as_deref()
        .ok_or_else(|| Error::Domain("estimate needs --input".into()))?;
    let data = ingest_csv(path)?;
    let h = single_h(cfg)?;
    let kernel = KernelSpec::parse(&cfg.kernel, data.dim())?;
    let gamma = ThresholdSchedule::new(cfg.beta, cfg.alpha)?.gamma_at(data.len())?;
    let grid = grid_for(cfg, &data, &kernel, h)?;
    let support = empirical_support(&data)?;
    let est = DensityEstimate::new(data.clone(), kernel.clone(), h)?;

    let plugin = entropy_plugin_detailed(&est, gamma, &grid)?;
    let interval = certainty_interval(&est, gamma, &grid, &support)?;
    let mut records = vec![estimate_record(
        cfg.unit,
        EstimatorKind::PluginIntegral,
        &Ok(plugin.estimate),
    )];
    records[0].interval_lower = Some(cfg.unit.convert(interval.lower()));
    records[0].interval_upper = Some(cfg.unit.convert(interval.upper()));
    records.push(estimate_record(
        cfg.unit,
        EstimatorKind::Resubstitution,
        &entropy_resubstitution(&est, gamma),
    ));
    if cfg.estimators.contains(&EstimatorKind::LeaveOneOut) {
        let loo = entrokit::estimators::entropy_leave_one_out(&data, &kernel, h);
        if let Err(e) = &loo {
            if !matches!(e, Error::IsolatedPoints { .. }) {
                return Err(loo.unwrap_err());
            }
        }
        records.push(estimate_record(cfg.unit, EstimatorKind::LeaveOneOut, &loo));
    }

    match cfg.format {
        Format::Json => write_json(
            out,
            &json!({
                "config": config_value(cfg),
                "n": data.len(),
                "dimension": data.dim(),
                "bandwidth": h,
                "gamma": gamma,
                "unit": cfg.unit,
                "estimates": records,
                "interval": {
                    "center": cfg.unit.convert(interval.center),
                    "lower": cfg.unit.convert(interval.lower()),
                    "upper": cfg.unit.convert(interval.upper()),
                    "half_width": cfg.unit.convert(interval.half_width),
                    "zeta_hat": interval.zeta_hat,
                    "support_lower": support.lower,
                    "support_upper": support.upper,
                },
            }),
        ),
        Format::Csv => {
            write_config_line(out, cfg)?;
            let mut w = csv::Writer::from_writer(out);
            for r in &records {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn grid_for(
    cfg: &RunConfig,
    data: &DataSet,
    kernel: &KernelSpec,
    h: f64,
) -> Result<EvaluationGrid> {
    let points = cfg
        .points_per_axis
        .unwrap_or_else(|| EvaluationGrid::default_points_per_axis(data.dim()));
    EvaluationGrid::covering(data, kernel, h, points)
}

fn sweep_config(cfg: &RunConfig, model: DistributionModel) -> Result<SweepConfig> {
    let kernel = KernelSpec::parse(&cfg.kernel, model.dimension())?;
    let rule = match &cfg.bandwidths {
        Bandwidths::Single { h } => BandwidthRule::Fixed(vec![*h]),
        Bandwidths::List { h } => BandwidthRule::Fixed(h.clone()),
        Bandwidths::Scaled { a, b, delta, count } => BandwidthRule::Scaled {
            a: *a,
            b: *b,
            delta: *delta,
            count: *count,
        },
    };
    let mut sc = SweepConfig::new(model, kernel, rule);
    sc.schedule = ThresholdSchedule::new(cfg.beta, cfg.alpha)?;
    sc.n_list = cfg.n_list.clone();
    sc.seeds = cfg.seeds.clone();
    sc.estimators = cfg.estimators.clone();
    sc.grid_points = cfg.points_per_axis;
    sc.denominator = cfg.denominator;
    sc.resub_centering = cfg.resub_centering;
    Ok(sc)
}

/// Divides entropy-valued fields by `log 2` when reporting in bits.
fn convert_report(report: &mut SweepReport, unit: Unit) {
    if unit == Unit::Nats {
        return;
    }
    let c = |v: &mut Option<f64>| *v = v.map(|x| unit.convert(x));
    for r in &mut report.rows {
        convert_row(r, unit);
    }
    for s in &mut report.sups {
        c(&mut s.sup_normalized_deviation);
        c(&mut s.sup_abs_error);
    }
    for m in &mut report.medians {
        c(&mut m.median_sup_normalized_deviation);
        c(&mut m.median_sup_abs_error);
    }
}

fn convert_row(r: &mut SweepRow, unit: Unit) {
    for v in [
        &mut r.estimate,
        &mut r.centering,
        &mut r.deviation,
        &mut r.normalized_deviation,
        &mut r.abs_error,
        &mut r.interval_lower,
        &mut r.interval_upper,
    ] {
        *v = v.map(|x| unit.convert(x));
    }
}

fn run_report(cfg: &RunConfig) -> Result<(DistributionModel, SweepReport)> {
    let model = model_of(cfg)?;
    let sc = sweep_config(cfg, model.clone())?;
    let mut report = sweep(&sc)?;
    convert_report(&mut report, cfg.unit);
    let mut config = config_value(cfg);
    config["sweep"] = report.config.clone();
    report.config = config;
    Ok((model, report))
}

/// Writes the report even when an estimator failed, then reports the first
/// failure.
fn validate(cfg: &RunConfig, out: &mut dyn Write) -> std::result::Result<(), RunError> {
    let (model, report) = run_report(cfg)?;
    write_validation(cfg, &model, &report, out)?;
    match report
        .rows
        .iter()
        .find_map(|r| r.status.strip_prefix("error:").map(|k| (r.estimator, k)))
    {
        Some((kind, err)) => Err(RunError {
            kind: err.to_string(),
            message: format!("{kind} estimator failed"),
            exit_code: if err == "numeric" || err == "isolated" {
                2
            } else {
                1
            },
        }),
        None => Ok(()),
    }
}

fn write_validation(
    cfg: &RunConfig,
    model: &DistributionModel,
    report: &SweepReport,
    out: &mut dyn Write,
) -> Result<()> {
    match cfg.format {
        Format::Json => write_json(
            out,
            &json!({
                "config": report.config,
                "true_entropy": cfg.unit.convert(model.true_entropy()),
                "unit": cfg.unit,
                "rows": report.rows,
                "warnings": report.warnings,
            }),
        ),
        Format::Csv => report.write_csv(out),
    }
}

fn run_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let (_, report) = run_report(cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &cfg.summary_path {
        let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_json(&mut w, &report.summary_json())?;
        w.flush()?;
    }
    match cfg.format {
        Format::Csv => report.write_csv(out),
        Format::Json => write_json(out, &report.summary_json()),
    }
}

/// Inner half of a bounded support box.
fn default_bias_grid(model: &DistributionModel, points: usize) -> Result<EvaluationGrid> {
    match model.support() {
        Support::Bounded(SupportBox { lower, upper }) => {
            let lo = lower
                .iter()
                .zip(&upper)
                .map(|(l, u)| l + 0.25 * (u - l))
                .collect();
            let hi = lower
                .iter()
                .zip(&upper)
                .map(|(l, u)| u - 0.25 * (u - l))
                .collect();
            EvaluationGrid::new(lo, hi, vec![points; model.dimension()])
        }
        Support::Unbounded => Err(Error::Domain(format!(
            "bias probe needs a compactly supported model, got {}",
            model.name()
        ))),
    }
}

fn bias(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let model = model_of(cfg)?;
    let kernel = KernelSpec::parse(&cfg.kernel, model.dimension())?;
    let hs = match &cfg.bandwidths {
        Bandwidths::List { h } => h.clone(),
        Bandwidths::Single { h } => vec![*h],
        Bandwidths::Scaled { .. } => {
            return Err(Error::Domain("bias needs explicit bandwidths".into()))
        }
    };
    let points = cfg
        .points_per_axis
        .unwrap_or_else(|| EvaluationGrid::default_points_per_axis(model.dimension()));
    let grid = match (&cfg.grid_lower, &cfg.grid_upper) {
        (Some(lo), Some(hi)) => {
            EvaluationGrid::new(lo.clone(), hi.clone(), vec![points; lo.len()])?
        }
        _ => default_bias_grid(&model, points)?,
    };
    let probe = bias_probe(&model, &kernel, &hs, &grid)?;
    match cfg.format {
        Format::Json => write_json(
            out,
            &json!({
                "config": config_value(cfg),
                "grid_lower": grid.lower(),
                "grid_upper": grid.upper(),
                "rows": probe.rows,
                "slope": probe.slope,
            }),
        ),
        Format::Csv => {
            write_config_line(out, cfg)?;
            if let Some(s) = probe.slope {
                writeln!(out, "# slope: {s}")?;
            }
            let mut w = csv::Writer::from_writer(out);
            for r in &probe.rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}
