//! Entropy estimators built on a kernel density estimate, and the exact
//! centerings obtained by replacing `f̂` with `E f̂ = K_h * f`.
//!
//! All entropies are in nats. Contributions excluded by the threshold are
//! exactly zero (`0 log 0 = 0`).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{
    smoothed_density_eval, DataSet, DensityEstimate, DensityFunction, EvaluationGrid,
};
use crate::error::{domain, Error, Result};
use crate::kernels::KernelSpec;
use crate::numeric::{compensated_sum, xlogx};

/// `γₙ = β (log n)^−α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    beta: f64,
    alpha: f64,
}

impl ThresholdSchedule {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return domain(format!("threshold beta must be positive, got {beta}"));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return domain(format!("threshold alpha must be non-negative, got {alpha}"));
        }
        Ok(Self { beta, alpha })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma_at(&self, n: usize) -> Result<f64> {
        if n < 3 {
            return domain(format!("threshold schedule needs n >= 3, got {n}"));
        }
        Ok(self.beta * (n as f64).ln().powf(-self.alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    PluginIntegral,
    Resubstitution,
    LeaveOneOut,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [
        EstimatorKind::PluginIntegral,
        EstimatorKind::Resubstitution,
        EstimatorKind::LeaveOneOut,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::PluginIntegral => "plugin_integral",
            EstimatorKind::Resubstitution => "resubstitution",
            EstimatorKind::LeaveOneOut => "leave_one_out",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "plugin_integral" | "plugin" | "h1" => Ok(EstimatorKind::PluginIntegral),
            "resubstitution" | "resub" | "h2" => Ok(EstimatorKind::Resubstitution),
            "leave_one_out" | "loo" => Ok(EstimatorKind::LeaveOneOut),
            other => Err(Error::Parse(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Conditions worth surfacing alongside an estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// No cell or observation reached the threshold; the value is 0.
    pub empty_level_set: bool,
    /// Grid cells are wider than `h/2`.
    pub coarse_grid: bool,
}

impl EstimateFlags {
    pub fn any(&self) -> bool {
        self.empty_level_set || self.coarse_grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Entropy in nats.
    pub value: f64,
    pub kind: EstimatorKind,
    pub n: usize,
    pub bandwidth: f64,
    /// Threshold applied; `0` for the unthresholded leave-one-out estimate.
    pub gamma: f64,
    /// Mass (plug-in) or fraction of observations (resubstitution) below
    /// the threshold.
    pub excluded_fraction: f64,
    pub flags: EstimateFlags,
}

/// A plug-in estimate with the grid values and level-set mask it used.
#[derive(Debug, Clone)]
pub struct PluginEvaluation {
    pub estimate: EntropyEstimate,
    /// `f̂` at each grid node, row-major.
    pub values: Vec<f64>,
    /// Whether each node belongs to `{f̂ ≥ γ}`.
    pub mask: Vec<bool>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return domain(format!("threshold gamma must be positive, got {gamma}"));
    }
    Ok(())
}

/// Plug-in estimate `−∫_{f̂ ≥ γ} f̂ log f̂`, as a Riemann sum over grid cells;
/// a cell belongs to the level set iff its node value reaches `γ`.
pub fn entropy_plugin(
    est: &DensityEstimate,
    gamma: f64,
    grid: &EvaluationGrid,
) -> Result<EntropyEstimate> {
    Ok(entropy_plugin_detailed(est, gamma, grid)?.estimate)
}

pub fn entropy_plugin_detailed(
    est: &DensityEstimate,
    gamma: f64,
    grid: &EvaluationGrid,
) -> Result<PluginEvaluation> {
    check_gamma(gamma)?;
    let values = est.eval_grid(grid)?;
    let mask: Vec<bool> = values.iter().map(|&v| v >= gamma).collect();
    let vol = grid.cell_volume();
    let inside = compensated_sum(
        values
            .iter()
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|(&v, _)| -xlogx(v)),
    );
    let excluded = compensated_sum(
        values
            .iter()
            .zip(&mask)
            .filter(|(_, m)| !**m)
            .map(|(&v, _)| v.max(0.0)),
    );
    let empty = !mask.iter().any(|&m| m);
    let estimate = EntropyEstimate {
        value: if empty { 0.0 } else { inside * vol },
        kind: EstimatorKind::PluginIntegral,
        n: est.n(),
        bandwidth: est.bandwidth(),
        gamma,
        excluded_fraction: (excluded * vol).clamp(0.0, 1.0),
        flags: EstimateFlags {
            empty_level_set: empty,
            coarse_grid: grid.cell_diameter() > 0.5 * est.bandwidth(),
        },
    };
    Ok(PluginEvaluation {
        estimate,
        values,
        mask,
    })
}

/// Resubstitution estimate `−n⁻¹ Σ 1{f̂(Xᵢ) ≥ γ} log f̂(Xᵢ)`.
pub fn entropy_resubstitution(est: &DensityEstimate, gamma: f64) -> Result<EntropyEstimate> {
    check_gamma(gamma)?;
    Ok(resubstitution_from_values(
        est,
        gamma,
        &est.eval_at_observations(),
    ))
}

pub(crate) fn resubstitution_from_values(
    est: &DensityEstimate,
    gamma: f64,
    at_obs: &[f64],
) -> EntropyEstimate {
    let n = est.n();
    let kept = at_obs.iter().filter(|&&v| v >= gamma).count();
    let sum = compensated_sum(at_obs.iter().filter(|&&v| v >= gamma).map(|v| -v.ln()));
    EntropyEstimate {
        value: if kept == 0 { 0.0 } else { sum / n as f64 },
        kind: EstimatorKind::Resubstitution,
        n,
        bandwidth: est.bandwidth(),
        gamma,
        excluded_fraction: (n - kept) as f64 / n as f64,
        flags: EstimateFlags {
            empty_level_set: kept == 0,
            coarse_grid: false,
        },
    }
}

/// Leave-one-out estimate `−n⁻¹ Σ log f̂₋ᵢ(Xᵢ)` with no threshold.
///
/// Fails with [`Error::IsolatedPoints`] (original row indices) when some
/// `f̂₋ᵢ(Xᵢ) ≤ 0`.
pub fn entropy_leave_one_out(
    data: &DataSet,
    kernel: &KernelSpec,
    bandwidth: f64,
) -> Result<EntropyEstimate> {
    if data.len() < 2 {
        return domain("leave-one-out estimate needs at least two observations");
    }
    let est = DensityEstimate::new(data.clone(), kernel.clone(), bandwidth)?;
    leave_one_out_for(&est)
}

pub(crate) fn leave_one_out_for(est: &DensityEstimate) -> Result<EntropyEstimate> {
    if est.n() < 2 {
        return domain("leave-one-out estimate needs at least two observations");
    }
    let loo = est.leave_one_out_at_observations();
    let mut isolated: Vec<usize> = loo
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= 0.0)
        .map(|(i, _)| est.original_index(i))
        .collect();
    if !isolated.is_empty() {
        isolated.sort_unstable();
        return Err(Error::IsolatedPoints { indices: isolated });
    }
    let n = est.n();
    Ok(EntropyEstimate {
        value: compensated_sum(loo.iter().map(|v| -v.ln())) / n as f64,
        kind: EstimatorKind::LeaveOneOut,
        n,
        bandwidth: est.bandwidth(),
        gamma: 0.0,
        excluded_fraction: 0.0,
        flags: EstimateFlags::default(),
    })
}

/// `−Σ_{cells in mask} E f̂ log E f̂ · cell volume`: the plug-in centering with
/// the level set taken from a realized estimate.
pub fn centering_plugin<D: DensityFunction + ?Sized>(
    model: &D,
    kernel: &KernelSpec,
    bandwidth: f64,
    mask: &[bool],
    grid: &EvaluationGrid,
) -> Result<f64> {
    if mask.len() != grid.len() {
        return domain(format!(
            "mask has {} entries but grid has {} nodes",
            mask.len(),
            grid.len()
        ));
    }
    let d = grid.dim();
    let terms: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .filter(|&i| mask[i])
        .map_init(
            || vec![0.0; d],
            |x, i| {
                grid.point_into(i, x);
                smoothed_density_eval(model, kernel, bandwidth, x).map(|v| -xlogx(v))
            },
        )
        .collect::<Result<_>>()?;
    Ok(compensated_sum(terms) * grid.cell_volume())
}

/// Which expectation stands in for `E(f̂(x) | Xᵢ = x)` in the resubstitution
/// centering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResubCentering {
    /// `(K_h * f)(x)`.
    #[default]
    Unconditional,
    /// `K(0)/(n hᵈ) + (n−1)/n · (K_h * f)(x)`, keeping the self term.
    Conditional,
}

/// `n⁻¹ Σ 1{f̂(Xᵢ) ≥ γ} log E f̂(Xᵢ)`.
///
/// The returned value carries the sign in which the centering is usually
/// written, i.e. without the leading minus of the estimator; the deviation
/// of the resubstitution estimate from it is `|H⁽²⁾ + centering|`.
pub fn centering_resub<D: DensityFunction + ?Sized>(
    model: &D,
    est: &DensityEstimate,
    gamma: f64,
    variant: ResubCentering,
) -> Result<f64> {
    check_gamma(gamma)?;
    centering_resub_from_values(model, est, gamma, &est.eval_at_observations(), variant)
}

pub(crate) fn centering_resub_from_values<D: DensityFunction + ?Sized>(
    model: &D,
    est: &DensityEstimate,
    gamma: f64,
    at_obs: &[f64],
    variant: ResubCentering,
) -> Result<f64> {
    let n = est.n();
    let h = est.bandwidth();
    let kernel = est.kernel();
    let self_term =
        kernel.eval_unchecked(&vec![0.0; est.dim()]) / (n as f64 * h.powi(est.dim() as i32));
    let rows: Vec<&[f64]> = est.sorted_observations().collect();
    let terms: Vec<f64> = rows
        .par_iter()
        .zip(at_obs.par_iter())
        .filter(|(_, &v)| v >= gamma)
        .map(|(x, _)| {
            let smooth = smoothed_density_eval(model, kernel, h, x)?;
            let mean = match variant {
                ResubCentering::Unconditional => smooth,
                ResubCentering::Conditional => self_term + (n - 1) as f64 / n as f64 * smooth,
            };
            if mean <= 0.0 {
                return domain(format!("smoothed density is non-positive at {x:?}"));
            }
            Ok(mean.ln())
        })
        .collect::<Result<_>>()?;
    Ok(compensated_sum(terms) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::FnDensity;
    use crate::kernels::KernelFamily;
    use crate::models::DistributionModel;

    fn boxcar() -> KernelSpec {
        KernelSpec::new(KernelFamily::Boxcar, 1).unwrap()
    }

    fn est(xs: &[f64], kernel: KernelSpec, h: f64) -> DensityEstimate {
        DensityEstimate::new(DataSet::univariate(xs.to_vec()).unwrap(), kernel, h).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let s = ThresholdSchedule::new(0.5, 0.0).unwrap();
        assert_eq!(s.gamma_at(1000).unwrap(), 0.5);
        let s = ThresholdSchedule::new(1.0, 1.0).unwrap();
        assert!((s.gamma_at(20).unwrap() - 1.0 / 20f64.ln()).abs() < 1e-15);
        assert!((s.gamma_at(20).unwrap() - 0.333_81).abs() < 1e-5);
        let s = ThresholdSchedule::new(0.25, 1.0).unwrap();
        assert!((s.gamma_at(10_000).unwrap() - 0.027_143).abs() < 1e-6);
        assert!(s.gamma_at(2).is_err());
        assert!(ThresholdSchedule::new(0.0, 1.0).is_err());
        assert!(ThresholdSchedule::new(1.0, -0.5).is_err());
    }

    #[test]
    fn gamma_is_nonincreasing() {
        let s = ThresholdSchedule::new(0.25, 1.5).unwrap();
        let g: Vec<f64> = (3..2000).map(|n| s.gamma_at(n).unwrap()).collect();
        assert!(g.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn resubstitution_examples() {
        let e = est(&[0.0], boxcar(), 1.0);
        assert_eq!(entropy_resubstitution(&e, 0.5).unwrap().value, 0.0);

        let e = est(&[0.0, 10.0], boxcar(), 1.0);
        let r = entropy_resubstitution(&e, 0.25).unwrap();
        assert!((r.value - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(r.excluded_fraction, 0.0);

        let r = entropy_resubstitution(&e, 0.6).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.excluded_fraction, 1.0);
        assert!(r.flags.empty_level_set);
    }

    #[test]
    fn leave_one_out_examples() {
        let data = DataSet::univariate(vec![0.0, 0.4]).unwrap();
        assert_eq!(
            entropy_leave_one_out(&data, &boxcar(), 1.0).unwrap().value,
            0.0
        );
        // exactly half a bandwidth apart: only one side sees the other
        let data = DataSet::univariate(vec![0.0, 0.5]).unwrap();
        assert_eq!(
            entropy_leave_one_out(&data, &boxcar(), 1.0).unwrap_err(),
            Error::IsolatedPoints { indices: vec![1] }
        );

        let data = DataSet::univariate(vec![0.0, 10.0]).unwrap();
        assert_eq!(
            entropy_leave_one_out(&data, &boxcar(), 1.0).unwrap_err(),
            Error::IsolatedPoints {
                indices: vec![0, 1]
            }
        );

        let data = DataSet::univariate(vec![3.0, 0.0, 0.2, 9.0]).unwrap();
        match entropy_leave_one_out(&data, &boxcar(), 1.0).unwrap_err() {
            Error::IsolatedPoints { indices } => assert_eq!(indices, vec![0, 3]),
            e => panic!("{e}"),
        }
        assert!(
            entropy_leave_one_out(&DataSet::univariate(vec![1.0]).unwrap(), &boxcar(), 1.0)
                .is_err()
        );
    }

    #[test]
    fn plugin_empty_level_set_is_flagged() {
        let e = est(&[0.1, 0.35, 0.6, 0.85], boxcar(), 1.0);
        let grid = EvaluationGrid::covering(e.data(), e.kernel(), 1.0, 401).unwrap();
        let r = entropy_plugin(&e, 10.0, &grid).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.flags.empty_level_set);
        assert!((r.excluded_fraction - 1.0).abs() < 0.01);
    }

    #[test]
    fn plugin_flags_coarse_grid() {
        let e = est(&[0.0, 0.3], boxcar(), 0.1);
        let coarse = EvaluationGrid::new(vec![-1.0], vec![1.0], vec![5]).unwrap();
        assert!(entropy_plugin(&e, 0.1, &coarse).unwrap().flags.coarse_grid);
        let fine = EvaluationGrid::new(vec![-1.0], vec![1.0], vec![401]).unwrap();
        assert!(!entropy_plugin(&e, 0.1, &fine).unwrap().flags.coarse_grid);
    }

    #[test]
    fn rejects_non_positive_gamma() {
        let e = est(&[0.0], boxcar(), 1.0);
        assert!(entropy_resubstitution(&e, 0.0).is_err());
        let g = EvaluationGrid::new(vec![-1.0], vec![1.0], vec![3]).unwrap();
        assert!(entropy_plugin(&e, -1.0, &g).is_err());
    }

    #[test]
    fn centering_plugin_examples() {
        let u = DistributionModel::parse("uniform").unwrap();
        let k = boxcar();
        let h = 0.1;
        let grid = EvaluationGrid::new(vec![-0.2], vec![1.2], vec![141]).unwrap();
        let interior: Vec<bool> = grid
            .points()
            .map(|x| x[0] >= h / 2.0 && x[0] <= 1.0 - h / 2.0)
            .collect();
        assert!(centering_plugin(&u, &k, h, &interior, &grid).unwrap().abs() < 1e-12);
        let none = vec![false; grid.len()];
        assert_eq!(centering_plugin(&u, &k, h, &none, &grid).unwrap(), 0.0);
        assert!(centering_plugin(&u, &k, h, &none[1..], &grid).is_err());
    }

    #[test]
    fn centering_resub_examples() {
        let u = DistributionModel::parse("uniform").unwrap();
        let e = est(&[0.5], boxcar(), 0.1);
        assert!(
            centering_resub(&u, &e, 0.5, ResubCentering::Unconditional)
                .unwrap()
                .abs()
                < 1e-12
        );

        let normal = FnDensity::new(1, |x: &[f64]| {
            (-0.5 * x[0] * x[0]).exp() / (2.0 * std::f64::consts::PI).sqrt()
        });
        let g = KernelSpec::new(KernelFamily::Gaussian, 1).unwrap();
        let e = est(&[0.0, 0.0], g, 0.5);
        let c = centering_resub(&normal, &e, 0.01, ResubCentering::Unconditional).unwrap();
        assert!((c - 0.356_825_f64.ln()).abs() < 1e-5, "{c}");
        assert!((c - (-1.0305)).abs() < 1e-4);
    }

    #[test]
    fn conditional_centering_adds_self_term() {
        let u = DistributionModel::parse("uniform").unwrap();
        let e = est(&[0.5, 0.52], boxcar(), 0.1);
        let c = centering_resub(&u, &e, 0.1, ResubCentering::Conditional).unwrap();
        // K(0)/(n h) = 5, (n-1)/n · 1 = 0.5
        assert!((c - 5.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kind_names_parse() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.as_str().parse::<EstimatorKind>().unwrap(), k);
        }
        assert_eq!(
            "resub".parse::<EstimatorKind>().unwrap(),
            EstimatorKind::Resubstitution
        );
        assert!("knn".parse::<EstimatorKind>().is_err());
    }
}
