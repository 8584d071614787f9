use entrokit::estimators::{
    centering_plugin, centering_resub, entropy_plugin_detailed, entropy_resubstitution,
    ResubCentering,
};
use entrokit::harness::{
    coverage_experiment, derive_seed, deviation_statistic, sweep, BandwidthRule, CoverageConfig,
    Denominator, SweepConfig,
};
use entrokit::{DensityEstimate, DistributionModel, EstimatorKind, EvaluationGrid, KernelSpec};

fn config(
    model: &str,
    kernel: &str,
    rule: BandwidthRule,
    n: Vec<usize>,
    seeds: Vec<u64>,
) -> SweepConfig {
    let model = DistributionModel::parse(model).unwrap();
    let kernel = KernelSpec::parse(kernel, model.dimension()).unwrap();
    let mut cfg = SweepConfig::new(model, kernel, rule);
    cfg.n_list = n;
    cfg.seeds = seeds;
    cfg
}

#[test]
fn single_row_equals_direct_calls() {
    let cfg = config(
        "normal:sigma=1",
        "epanechnikov",
        BandwidthRule::Fixed(vec![0.3]),
        vec![500],
        vec![4],
    );
    let report = sweep(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2);

    let data = cfg.model.sample(500, derive_seed(4, 500)).unwrap();
    let gamma = cfg.schedule.gamma_at(500).unwrap();
    let est = DensityEstimate::new(data.clone(), cfg.kernel.clone(), 0.3).unwrap();
    let grid = EvaluationGrid::covering(&data, &cfg.kernel, 0.3, 401).unwrap();
    let plugin = entropy_plugin_detailed(&est, gamma, &grid).unwrap();
    let c1 = centering_plugin(&cfg.model, &cfg.kernel, 0.3, &plugin.mask, &grid).unwrap();
    let h2 = entropy_resubstitution(&est, gamma).unwrap();
    let c2 = centering_resub(&cfg.model, &est, gamma, ResubCentering::Unconditional).unwrap();

    let r1 = &report.rows[0];
    assert_eq!(r1.estimator, EstimatorKind::PluginIntegral);
    assert_eq!(r1.estimate, Some(plugin.estimate.value));
    assert_eq!(r1.centering, Some(c1));
    let nd = deviation_statistic(
        EstimatorKind::PluginIntegral,
        500,
        0.3,
        gamma,
        plugin.estimate.value,
        c1,
        Denominator::MaxLog,
    )
    .unwrap();
    assert_eq!(r1.normalized_deviation, Some(nd));

    let r2 = &report.rows[1];
    assert_eq!(r2.estimate, Some(h2.value));
    assert_eq!(r2.centering, Some(-c2));
    assert_eq!(r2.deviation, Some((h2.value + c2).abs()));
    assert_eq!(
        r2.abs_error,
        Some((h2.value - cfg.model.true_entropy()).abs())
    );
    assert_eq!(report.sups.len(), 2);
    assert_eq!(report.sups[0].sup_normalized_deviation, Some(nd));
}

#[test]
fn sweeps_are_deterministic() {
    let mut cfg = config(
        "expo:lambda=2",
        "gaussian",
        BandwidthRule::Scaled {
            a: 0.5,
            b: 2.0,
            delta: 0.2,
            count: 4,
        },
        vec![300, 600],
        vec![1, 2, 3],
    );
    cfg.estimators = EstimatorKind::ALL.to_vec();
    let a = sweep(&cfg).unwrap();
    let b = sweep(&cfg).unwrap();
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(a.rows.len(), 2 * 3 * 4 * 3);
    let keys: Vec<_> = a.rows.iter().map(|r| (r.n, r.seed, r.estimator)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn failed_rows_do_not_abort_the_sweep() {
    // a tiny bandwidth isolates every point for leave-one-out
    let mut cfg = config(
        "normal:sigma=1",
        "gaussian",
        BandwidthRule::Fixed(vec![1e-6, 0.5]),
        vec![40],
        vec![1],
    );
    cfg.estimators = EstimatorKind::ALL.to_vec();
    let report = sweep(&cfg).unwrap();
    let loo: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.estimator == EstimatorKind::LeaveOneOut)
        .collect();
    assert_eq!(loo[0].status, "error:isolated");
    assert!(loo[0].estimate.is_none());
    assert_eq!(loo[1].status, "ok");
    let sup = report
        .sups
        .iter()
        .find(|s| s.estimator == EstimatorKind::LeaveOneOut)
        .unwrap();
    assert_eq!(sup.failed_rows, 1);
    assert!(sup.sup_normalized_deviation.unwrap().is_finite());
}

#[test]
fn empty_level_set_is_flagged() {
    let mut cfg = config(
        "normal:sigma=1",
        "gaussian",
        BandwidthRule::Fixed(vec![0.5]),
        vec![100],
        vec![2],
    );
    cfg.schedule = entrokit::ThresholdSchedule::new(50.0, 0.0).unwrap();
    let report = sweep(&cfg).unwrap();
    for r in &report.rows {
        assert_eq!(r.status, "empty_level_set");
        assert_eq!(r.estimate, Some(0.0));
    }
}

#[test]
fn warnings_flag_wide_bandwidth_ranges() {
    let cfg = config(
        "uniform",
        "boxcar",
        BandwidthRule::Fixed(vec![0.5]),
        vec![100],
        vec![1],
    );
    let report = sweep(&cfg).unwrap();
    assert_eq!(report.warnings.len(), 1);
    let cfg = config(
        "uniform",
        "boxcar",
        BandwidthRule::Fixed(vec![1e-3]),
        vec![100],
        vec![1],
    );
    assert!(sweep(&cfg).unwrap().warnings.is_empty());
}

#[test]
fn summary_has_documented_keys() {
    let cfg = config(
        "uniform",
        "boxcar",
        BandwidthRule::Fixed(vec![0.1, 0.2]),
        vec![200],
        vec![1, 2, 3],
    );
    let report = sweep(&cfg).unwrap();
    let s = report.summary_json();
    for key in ["config", "medians", "sups", "interval_coverage"] {
        assert!(s.get(key).is_some(), "{key}");
    }
    let m = report
        .median_for(200, EstimatorKind::PluginIntegral)
        .unwrap();
    assert_eq!(m.replicates, 3);
    assert_eq!(report.interval_coverage[0].intervals, 6);
}

#[test]
fn invalid_sweeps_are_rejected() {
    let cfg = config(
        "uniform",
        "boxcar",
        BandwidthRule::Fixed(vec![0.1]),
        vec![10],
        vec![1],
    );
    assert!(sweep(&cfg).is_err());
    let cfg = config(
        "uniform",
        "boxcar",
        BandwidthRule::Fixed(vec![0.1]),
        vec![],
        vec![1],
    );
    assert!(sweep(&cfg).is_err());
    let cfg = config(
        "uniform",
        "boxcar",
        BandwidthRule::Fixed(vec![1.5]),
        vec![100],
        vec![1],
    );
    assert!(sweep(&cfg).is_err());
}

#[test]
fn coverage_experiment_counts_replicates() {
    let model = DistributionModel::parse("normal:sigma=1").unwrap();
    let cfg = CoverageConfig {
        kernel: KernelSpec::parse("gaussian", 1).unwrap(),
        schedule: model.default_schedule(),
        model,
        n: 400,
        h: 0.4,
        replicates: 12,
        base_seed: 5,
        grid_points: None,
    };
    let r = coverage_experiment(&cfg).unwrap();
    assert_eq!(r.intervals.len(), 12);
    assert_eq!(r.coverage, r.covered as f64 / 12.0);
    assert!(r
        .intervals
        .iter()
        .all(|i| i.half_width > 0.0 && i.center.is_finite()));
    assert_eq!(r, coverage_experiment(&cfg).unwrap());
}
