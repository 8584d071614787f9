//! Simulation harness: bandwidth sweeps with normalized deviations, certainty
//! intervals and their coverage, and smoothing-bias probes.
//!
//! Almost-sure `limsup` statements cannot be observed at finite `n`; the
//! sweep reports medians over seeds along an `n` ladder so that boundedness
//! and convergence can be checked as "no blow-up along the ladder".

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{smoothed_density_eval, DataSet, DensityEstimate, EvaluationGrid};
use crate::error::{domain, Error, Result};
use crate::estimators::{
    centering_plugin, centering_resub_from_values, entropy_plugin_detailed, leave_one_out_for,
    resubstitution_from_values, EntropyEstimate, EstimatorKind, PluginEvaluation, ResubCentering,
    ThresholdSchedule,
};
use crate::kernels::KernelSpec;
use crate::models::{DistributionModel, SupportBox};
use crate::numeric::{median, ols_slope};

/// Geometric grid of bandwidths on `[h′, h″]`, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    h_lower: f64,
    h_upper: f64,
    points: Vec<f64>,
}

impl BandwidthGrid {
    pub fn new(h_lower: f64, h_upper: f64, count: usize) -> Result<Self> {
        if !(h_lower > 0.0 && h_lower < h_upper && h_upper <= 1.0) {
            return domain(format!(
                "bandwidth grid needs 0 < h' < h'' <= 1, got [{h_lower}, {h_upper}]"
            ));
        }
        if count < 2 {
            return domain("bandwidth grid needs at least two points");
        }
        let ratio = (h_upper / h_lower).ln();
        let mut points: Vec<f64> = (0..count)
            .map(|i| h_lower * (ratio * i as f64 / (count - 1) as f64).exp())
            .collect();
        points[0] = h_lower;
        points[count - 1] = h_upper;
        Ok(Self {
            h_lower,
            h_upper,
            points,
        })
    }

    /// Grid on `[A n^−δ, B n^−δ]` clipped to `(0, 1]`, with
    /// `δ ∈ [1/(d+4), 1)`.
    pub fn scaled(n: usize, a: f64, b: f64, delta: f64, count: usize, dim: usize) -> Result<Self> {
        if !(a > 0.0 && a < b && b.is_finite()) {
            return domain(format!(
                "bandwidth constants need 0 < A < B, got A={a}, B={b}"
            ));
        }
        let min_delta = 1.0 / (dim as f64 + 4.0);
        if !(delta >= min_delta && delta < 1.0) {
            return domain(format!("delta must lie in [{min_delta}, 1), got {delta}"));
        }
        if n == 0 {
            return domain("sample size must be positive");
        }
        let base = (n as f64).powf(-delta);
        let lo = a * base;
        let hi = (b * base).min(1.0);
        if lo >= hi {
            return domain(format!(
                "bandwidth range [{lo}, {hi}] is empty after clipping to (0, 1]"
            ));
        }
        Self::new(lo, hi, count)
    }

    pub fn h_lower(&self) -> f64 {
        self.h_lower
    }

    pub fn h_upper(&self) -> f64 {
        self.h_upper
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `|log h″| / log log n`; it must diverge along a sequence for the
    /// consistency-to-truth statement to apply.
    pub fn upper_log_ratio(&self, n: usize) -> f64 {
        self.h_upper.ln().abs() / (n as f64).ln().ln()
    }
}

/// How the bandwidth grid is chosen for each sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Scaled {
        a: f64,
        b: f64,
        delta: f64,
        count: usize,
    },
    Fixed(Vec<f64>),
}

impl BandwidthRule {
    pub fn grid_for(&self, n: usize, dim: usize) -> Result<Vec<f64>> {
        match self {
            BandwidthRule::Scaled { a, b, delta, count } => {
                Ok(BandwidthGrid::scaled(n, *a, *b, *delta, *count, dim)?.points)
            }
            BandwidthRule::Fixed(hs) => {
                if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) {
                    return domain("fixed bandwidths must be non-empty and lie in (0, 1]");
                }
                Ok(hs.clone())
            }
        }
    }
}

/// Denominator of the normalized deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// `√(log(1/h) ∨ log log n)`.
    #[default]
    MaxLog,
    /// `√(2 log(1/h))`.
    TwoLogInverseBandwidth,
}

/// Power of `γ` in the normalization of each estimator's deviation.
pub fn gamma_power(kind: EstimatorKind) -> i32 {
    match kind {
        EstimatorKind::PluginIntegral => 4,
        EstimatorKind::Resubstitution => 2,
        EstimatorKind::LeaveOneOut => 0,
    }
}

/// `√(n h γᵖ) · |estimate − centering| / denominator`, with `p = 4` for the
/// plug-in estimate and `p = 2` for resubstitution.
pub fn deviation_statistic(
    kind: EstimatorKind,
    n: usize,
    h: f64,
    gamma: f64,
    estimate: f64,
    centering: f64,
    denominator: Denominator,
) -> Result<f64> {
    let nf = n as f64;
    if nf <= std::f64::consts::E.powf(std::f64::consts::E) {
        return domain(format!("normalized deviation needs n > e^e, got {n}"));
    }
    if !(h > 0.0) || (!(gamma > 0.0) && gamma_power(kind) > 0) {
        return domain("bandwidth and threshold must be positive");
    }
    if !estimate.is_finite() || !centering.is_finite() {
        return domain("estimate and centering must be finite");
    }
    let denom_sq = match denominator {
        Denominator::MaxLog => (1.0 / h).ln().max(nf.ln().ln()),
        Denominator::TwoLogInverseBandwidth => {
            if h >= 1.0 {
                return domain("the 2 log(1/h) denominator needs h < 1");
            }
            2.0 * (1.0 / h).ln()
        }
    };
    let scale = (nf * h * gamma.powi(gamma_power(kind))).sqrt();
    Ok(scale * (estimate - centering).abs() / denom_sq.sqrt())
}

/// `H⁽¹⁾ ± Lₙ` with `Lₙ = ζₙ · √((log(1/h) ∨ log log n) / (n h γ⁴))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertaintyInterval {
    pub center: f64,
    pub half_width: f64,
    /// `max √(f̂ ∫K²)` over grid nodes inside the support estimate.
    pub zeta_hat: f64,
    pub h: f64,
    pub n: usize,
    pub gamma: f64,
}

impl CertaintyInterval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower() <= value && value <= self.upper()
    }
}

/// Half-width `Lₙ` for given `ζₙ`.
pub fn interval_half_width(zeta_hat: f64, n: usize, h: f64, gamma: f64) -> Result<f64> {
    if n < 3 {
        return domain("certainty interval needs n >= 3");
    }
    if !(h > 0.0) || !(gamma > 0.0) {
        return domain("bandwidth and threshold must be positive");
    }
    let nf = n as f64;
    let log_term = (1.0 / h).ln().max(nf.ln().ln());
    Ok(zeta_hat * (log_term / (nf * h * gamma.powi(4))).sqrt())
}

/// Certainty interval around the plug-in estimate of `est`.
pub fn certainty_interval(
    est: &DensityEstimate,
    gamma: f64,
    grid: &EvaluationGrid,
    support: &SupportBox,
) -> Result<CertaintyInterval> {
    let plugin = entropy_plugin_detailed(est, gamma, grid)?;
    interval_from_plugin(&plugin, est.kernel(), grid, support)
}

pub(crate) fn interval_from_plugin(
    plugin: &PluginEvaluation,
    kernel: &KernelSpec,
    grid: &EvaluationGrid,
    support: &SupportBox,
) -> Result<CertaintyInterval> {
    if support.dim() != grid.dim() {
        return domain("support estimate and grid dimensions differ");
    }
    let mut x = vec![0.0; grid.dim()];
    let mut zeta_sq: Option<f64> = None;
    for (i, &v) in plugin.values.iter().enumerate() {
        grid.point_into(i, &mut x);
        if support.contains(&x) {
            let z = v.max(0.0) * kernel.sq_integral();
            zeta_sq = Some(zeta_sq.map_or(z, |m: f64| m.max(z)));
        }
    }
    let zeta_hat = zeta_sq
        .ok_or_else(|| Error::Domain("no grid node lies inside the support estimate".into()))?
        .sqrt();
    let e = &plugin.estimate;
    Ok(CertaintyInterval {
        center: e.value,
        half_width: interval_half_width(zeta_hat, e.n, e.bandwidth, e.gamma)?,
        zeta_hat,
        h: e.bandwidth,
        n: e.n,
        gamma: e.gamma,
    })
}

/// SplitMix64 step; derives independent per-task seeds from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: DistributionModel,
    pub kernel: KernelSpec,
    pub bandwidths: BandwidthRule,
    pub schedule: ThresholdSchedule,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub estimators: Vec<EstimatorKind>,
    /// Grid nodes per axis for the plug-in integral.
    pub grid_points: Option<usize>,
    pub denominator: Denominator,
    pub resub_centering: ResubCentering,
}

impl SweepConfig {
    pub fn new(model: DistributionModel, kernel: KernelSpec, bandwidths: BandwidthRule) -> Self {
        let schedule = model.default_schedule();
        Self {
            model,
            kernel,
            bandwidths,
            schedule,
            n_list: Vec::new(),
            seeds: Vec::new(),
            estimators: vec![EstimatorKind::PluginIntegral, EstimatorKind::Resubstitution],
            grid_points: None,
            denominator: Denominator::MaxLog,
            resub_centering: ResubCentering::Unconditional,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.seeds.is_empty() || self.estimators.is_empty() {
            return domain("sweep needs non-empty n list, seeds and estimators");
        }
        if self.kernel.dimension() != self.model.dimension() {
            return domain("kernel and model dimensions differ");
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 16) {
            return domain(format!("sweep sample sizes must exceed e^e, got {n}"));
        }
        Ok(())
    }

    /// Human-readable echo of the resolved configuration.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "model": self.model.name(),
            "kernel": self.kernel.family().to_string(),
            "dimension": self.model.dimension(),
            "bandwidths": self.bandwidths,
            "beta": self.schedule.beta(),
            "alpha": self.schedule.alpha(),
            "n_list": self.n_list,
            "seeds": self.seeds,
            "estimators": self.estimators,
            "grid_points": self.grid_points.unwrap_or_else(|| EvaluationGrid::default_points_per_axis(self.model.dimension())),
            "denominator": self.denominator,
            "resub_centering": self.resub_centering,
        })
    }
}

/// One (n, seed, h, estimator) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub seed: u64,
    pub h: f64,
    pub gamma: f64,
    pub estimator: EstimatorKind,
    pub estimate: Option<f64>,
    /// Centering in the estimator's own sign convention.
    pub centering: Option<f64>,
    pub deviation: Option<f64>,
    pub normalized_deviation: Option<f64>,
    pub abs_error: Option<f64>,
    pub excluded_fraction: Option<f64>,
    pub interval_lower: Option<f64>,
    pub interval_upper: Option<f64>,
    pub covers_truth: Option<bool>,
    /// `ok`, a comma-separated list of flags, or `error:<kind>`.
    pub status: String,
}

/// Supremum over the bandwidth grid for one (n, seed, estimator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupRecord {
    pub n: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub sup_normalized_deviation: Option<f64>,
    pub sup_abs_error: Option<f64>,
    pub failed_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRecord {
    pub n: usize,
    pub estimator: EstimatorKind,
    pub replicates: usize,
    pub median_sup_normalized_deviation: Option<f64>,
    pub median_sup_abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub n: usize,
    pub intervals: usize,
    pub covered: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: serde_json::Value,
    pub rows: Vec<SweepRow>,
    pub sups: Vec<SupRecord>,
    pub medians: Vec<MedianRecord>,
    pub interval_coverage: Vec<CoverageRecord>,
    pub warnings: Vec<String>,
}

/// Column order of [`SweepReport::write_csv`].
pub const SWEEP_CSV_COLUMNS: [&str; 15] = [
    "n",
    "seed",
    "h",
    "gamma",
    "estimator",
    "estimate",
    "centering",
    "deviation",
    "normalized_deviation",
    "abs_error",
    "excluded_fraction",
    "interval_lower",
    "interval_upper",
    "covers_truth",
    "status",
];

impl SweepReport {
    /// CSV with a leading `# config: {...}` line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# config: {}", serde_json::to_string(&self.config)?)?;
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `{config, medians, sups, interval_coverage, warnings}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "medians": self.medians,
            "sups": self.sups,
            "interval_coverage": self.interval_coverage,
            "warnings": self.warnings,
        })
    }

    pub fn median_for(&self, n: usize, kind: EstimatorKind) -> Option<&MedianRecord> {
        self.medians
            .iter()
            .find(|m| m.n == n && m.estimator == kind)
    }
}

fn status_of(e: &EntropyEstimate) -> String {
    let mut flags = Vec::new();
    if e.flags.empty_level_set {
        flags.push("empty_level_set");
    }
    if e.flags.coarse_grid {
        flags.push("coarse_grid");
    }
    if flags.is_empty() {
        "ok".into()
    } else {
        flags.join(",")
    }
}

fn failed_row(
    n: usize,
    seed: u64,
    h: f64,
    gamma: f64,
    kind: EstimatorKind,
    err: &Error,
) -> SweepRow {
    SweepRow {
        n,
        seed,
        h,
        gamma,
        estimator: kind,
        estimate: None,
        centering: None,
        deviation: None,
        normalized_deviation: None,
        abs_error: None,
        excluded_fraction: None,
        interval_lower: None,
        interval_upper: None,
        covers_truth: None,
        status: format!("error:{}", err.kind()),
    }
}

/// Everything computed for one bandwidth on one sample.
struct BandwidthTask<'a> {
    cfg: &'a SweepConfig,
    data: &'a DataSet,
    support: Option<&'a SupportBox>,
    n: usize,
    seed: u64,
    h: f64,
    gamma: f64,
}

impl BandwidthTask<'_> {
    fn run(&self) -> Vec<SweepRow> {
        let cfg = self.cfg;
        let est = match DensityEstimate::new(self.data.clone(), cfg.kernel.clone(), self.h) {
            Ok(e) => e,
            Err(e) => {
                return cfg
                    .estimators
                    .iter()
                    .map(|&k| failed_row(self.n, self.seed, self.h, self.gamma, k, &e))
                    .collect()
            }
        };
        let mut at_obs: Option<Vec<f64>> = None;
        cfg.estimators
            .iter()
            .map(|&kind| {
                self.row(&est, kind, &mut at_obs)
                    .unwrap_or_else(|e| failed_row(self.n, self.seed, self.h, self.gamma, kind, &e))
            })
            .collect()
    }

    fn row(
        &self,
        est: &DensityEstimate,
        kind: EstimatorKind,
        at_obs: &mut Option<Vec<f64>>,
    ) -> Result<SweepRow> {
        let cfg = self.cfg;
        let truth = cfg.model.true_entropy();
        let mut interval = None;
        let (estimate, centering) = match kind {
            EstimatorKind::PluginIntegral => {
                let points = cfg
                    .grid_points
                    .unwrap_or_else(|| EvaluationGrid::default_points_per_axis(est.dim()));
                let grid = EvaluationGrid::covering(est.data(), est.kernel(), self.h, points)?;
                let plugin = entropy_plugin_detailed(est, self.gamma, &grid)?;
                let c = centering_plugin(&cfg.model, est.kernel(), self.h, &plugin.mask, &grid)?;
                if let Some(support) = self.support {
                    interval = Some(interval_from_plugin(&plugin, est.kernel(), &grid, support)?);
                }
                (plugin.estimate, c)
            }
            EstimatorKind::Resubstitution => {
                let values = at_obs.get_or_insert_with(|| est.eval_at_observations());
                let e = resubstitution_from_values(est, self.gamma, values);
                let c = centering_resub_from_values(
                    &cfg.model,
                    est,
                    self.gamma,
                    values,
                    cfg.resub_centering,
                )?;
                (e, -c)
            }
            EstimatorKind::LeaveOneOut => {
                let e = leave_one_out_for(est)?;
                let values = at_obs.get_or_insert_with(|| est.eval_at_observations());
                let c = centering_resub_from_values(
                    &cfg.model,
                    est,
                    f64::NEG_INFINITY,
                    values,
                    ResubCentering::Unconditional,
                )?;
                (e, -c)
            }
        };
        let gamma_for_stat = if kind == EstimatorKind::LeaveOneOut {
            1.0
        } else {
            self.gamma
        };
        let normalized = deviation_statistic(
            kind,
            self.n,
            self.h,
            gamma_for_stat,
            estimate.value,
            centering,
            cfg.denominator,
        )?;
        Ok(SweepRow {
            n: self.n,
            seed: self.seed,
            h: self.h,
            gamma: estimate.gamma,
            estimator: kind,
            estimate: Some(estimate.value),
            centering: Some(centering),
            deviation: Some((estimate.value - centering).abs()),
            normalized_deviation: Some(normalized),
            abs_error: Some((estimate.value - truth).abs()),
            excluded_fraction: Some(estimate.excluded_fraction),
            interval_lower: interval.map(|i| i.lower()),
            interval_upper: interval.map(|i| i.upper()),
            covers_truth: interval.map(|i| i.contains(truth)),
            status: status_of(&estimate),
        })
    }
}

/// Runs every estimator at every bandwidth for every `(n, seed)`; a sample
/// is drawn once per `(n, seed)`. Failures are recorded per row.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let dim = cfg.model.dimension();
    let mut warnings = Vec::new();
    let mut grids = BTreeMap::new();
    for &n in &cfg.n_list {
        let hs = cfg.bandwidths.grid_for(n, dim)?;
        let h_upper = hs.iter().cloned().fold(0.0, f64::max);
        let ratio = h_upper.ln().abs() / (n as f64).ln().ln();
        if ratio <= 1.0 {
            warnings.push(format!(
                "n={n}: |log h''|/log log n = {ratio:.3}; the bandwidth range is too wide for consistency to the true entropy"
            ));
        }
        grids.insert(n, hs);
    }
    let gammas: BTreeMap<usize, f64> = cfg
        .n_list
        .iter()
        .map(|&n| cfg.schedule.gamma_at(n).map(|g| (n, g)))
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, u64)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();

    let mut rows: Vec<SweepRow> = tasks
        .par_iter()
        .map(|&(n, seed)| -> Result<Vec<SweepRow>> {
            let data = cfg.model.sample(n, derive_seed(seed, n as u64))?;
            let support = cfg.model.support_estimate(&data).ok();
            Ok(grids[&n]
                .iter()
                .flat_map(|&h| {
                    BandwidthTask {
                        cfg,
                        data: &data,
                        support: support.as_ref(),
                        n,
                        seed,
                        h,
                        gamma: gammas[&n],
                    }
                    .run()
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        (a.n, a.seed, a.estimator)
            .cmp(&(b.n, b.seed, b.estimator))
            .then(a.h.total_cmp(&b.h))
    });

    let mut sups = Vec::new();
    for &(n, seed) in &tasks {
        for &kind in &cfg.estimators {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.n == n && r.seed == seed && r.estimator == kind)
                .collect();
            let fold_max = |f: fn(&SweepRow) -> Option<f64>| {
                group
                    .iter()
                    .filter_map(|r| f(r))
                    .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            };
            sups.push(SupRecord {
                n,
                seed,
                estimator: kind,
                sup_normalized_deviation: fold_max(|r| r.normalized_deviation),
                sup_abs_error: fold_max(|r| r.abs_error),
                failed_rows: group.iter().filter(|r| r.estimate.is_none()).count(),
            });
        }
    }
    sups.sort_by_key(|s| (s.n, s.seed, s.estimator));

    let mut medians = Vec::new();
    let mut interval_coverage = Vec::new();
    for &n in &cfg.n_list {
        for &kind in &cfg.estimators {
            let of_n: Vec<&SupRecord> = sups
                .iter()
                .filter(|s| s.n == n && s.estimator == kind)
                .collect();
            let nd: Vec<f64> = of_n
                .iter()
                .filter_map(|s| s.sup_normalized_deviation)
                .collect();
            let ae: Vec<f64> = of_n.iter().filter_map(|s| s.sup_abs_error).collect();
            medians.push(MedianRecord {
                n,
                estimator: kind,
                replicates: nd.len(),
                median_sup_normalized_deviation: median(&nd),
                median_sup_abs_error: median(&ae),
            });
        }
        let flags: Vec<bool> = rows
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| r.covers_truth)
            .collect();
        if !flags.is_empty() {
            let covered = flags.iter().filter(|&&c| c).count();
            interval_coverage.push(CoverageRecord {
                n,
                intervals: flags.len(),
                covered,
                coverage: covered as f64 / flags.len() as f64,
            });
        }
    }

    Ok(SweepReport {
        config: cfg.echo(),
        rows,
        sups,
        medians,
        interval_coverage,
        warnings,
    })
}

/// Settings for a certainty-interval coverage experiment at one `(n, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub model: DistributionModel,
    pub kernel: KernelSpec,
    pub n: usize,
    pub h: f64,
    pub replicates: usize,
    pub base_seed: u64,
    pub schedule: ThresholdSchedule,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n: usize,
    pub h: f64,
    pub gamma: f64,
    pub replicates: usize,
    pub covered: usize,
    pub coverage: f64,
    pub median_half_width: f64,
    pub intervals: Vec<CertaintyInterval>,
}

/// Fraction of replicates whose interval contains the true entropy.
pub fn coverage_experiment(cfg: &CoverageConfig) -> Result<CoverageReport> {
    if cfg.replicates == 0 {
        return domain("coverage experiment needs at least one replicate");
    }
    let gamma = cfg.schedule.gamma_at(cfg.n)?;
    let truth = cfg.model.true_entropy();
    let intervals: Vec<CertaintyInterval> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let data = cfg.model.sample(cfg.n, derive_seed(cfg.base_seed, r))?;
            let support = cfg.model.support_estimate(&data)?;
            let points = cfg
                .grid_points
                .unwrap_or_else(|| EvaluationGrid::default_points_per_axis(data.dim()));
            let grid = EvaluationGrid::covering(&data, &cfg.kernel, cfg.h, points)?;
            let est = DensityEstimate::new(data, cfg.kernel.clone(), cfg.h)?;
            certainty_interval(&est, gamma, &grid, &support)
        })
        .collect::<Result<_>>()?;
    let covered = intervals.iter().filter(|i| i.contains(truth)).count();
    let widths: Vec<f64> = intervals.iter().map(|i| i.half_width).collect();
    Ok(CoverageReport {
        n: cfg.n,
        h: cfg.h,
        gamma,
        replicates: cfg.replicates,
        covered,
        coverage: covered as f64 / cfg.replicates as f64,
        median_half_width: median(&widths).unwrap_or(0.0),
        intervals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub h: f64,
    pub sup_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProbe {
    pub rows: Vec<BiasRow>,
    /// Least-squares slope of `log sup_bias` on `log h`; needs three or more
    /// bandwidths with positive bias.
    pub slope: Option<f64>,
}

/// `sup_x |E f̂(x) − f(x)|` over the grid for each bandwidth.
pub fn bias_probe(
    model: &DistributionModel,
    kernel: &KernelSpec,
    h_list: &[f64],
    grid: &EvaluationGrid,
) -> Result<BiasProbe> {
    if !model.is_compact() {
        return domain(format!(
            "bias probe needs a compactly supported model, got {}",
            model.name()
        ));
    }
    if let Some(s) = model.smoothness_order() {
        if kernel.order() > s {
            return domain(format!(
                "kernel order {} exceeds model smoothness {s}",
                kernel.order()
            ));
        }
    }
    if kernel.dimension() != model.dimension() || grid.dim() != model.dimension() {
        return domain("model, kernel and grid dimensions differ");
    }
    if h_list.is_empty() || h_list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return domain("bias probe needs positive bandwidths");
    }
    let d = grid.dim();
    let rows: Vec<BiasRow> = h_list
        .iter()
        .map(|&h| {
            let devs: Vec<f64> = (0..grid.len())
                .into_par_iter()
                .map_init(
                    || vec![0.0; d],
                    |x, i| {
                        grid.point_into(i, x);
                        smoothed_density_eval(model, kernel, h, x).map(|v| (v - model.pdf(x)).abs())
                    },
                )
                .collect::<Result<_>>()?;
            Ok(BiasRow {
                h,
                sup_bias: devs.into_iter().fold(0.0, f64::max),
            })
        })
        .collect::<Result<_>>()?;
    let slope = if rows.len() >= 3 && rows.iter().all(|r| r.sup_bias > 0.0) {
        let lx: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
        let ly: Vec<f64> = rows.iter().map(|r| r.sup_bias.ln()).collect();
        ols_slope(&lx, &ly)
    } else {
        None
    };
    Ok(BiasProbe { rows, slope })
}
