//! Estimators against naive, independently written reference computations.

use entrokit::estimators::{entropy_leave_one_out, entropy_plugin, entropy_resubstitution};
use entrokit::{
    DataSet, DensityEstimate, DistributionModel, EvaluationGrid, KernelFamily, KernelSpec,
};

mod common;

use common::{doubling_riemann, kernel_1d, naive_kde, naive_loo, naive_resub};

fn sample(model: &str, n: usize, seed: u64) -> Vec<f64> {
    DistributionModel::parse(model)
        .unwrap()
        .sample(n, seed)
        .unwrap()
        .as_flat()
        .to_vec()
}

#[test]
fn kde_matches_direct_sum() {
    for (name, family) in [
        ("boxcar", KernelFamily::Boxcar),
        ("epanechnikov", KernelFamily::Epanechnikov),
        ("gaussian", KernelFamily::Gaussian),
        ("poly4", KernelFamily::Polynomial { order: 4 }),
    ] {
        let data = sample("normal:sigma=1", 200, 11);
        let kernel = KernelSpec::new(family, 1).unwrap();
        let est =
            DensityEstimate::new(DataSet::univariate(data.clone()).unwrap(), kernel, 0.35).unwrap();
        for i in 0..81 {
            let x = -4.0 + 0.1 * i as f64;
            let got = est.eval(&[x]).unwrap();
            let want = naive_kde(name, &data, 0.35, x);
            assert!((got - want).abs() < 1e-12, "{name} at {x}: {got} vs {want}");
        }
    }
}

#[test]
fn resubstitution_and_loo_match_direct_sums() {
    for name in ["boxcar", "epanechnikov", "gaussian"] {
        let data = sample("normal:sigma=1", 50, 1);
        let kernel = KernelSpec::parse(name, 1).unwrap();
        let ds = DataSet::univariate(data.clone()).unwrap();
        let est = DensityEstimate::new(ds.clone(), kernel.clone(), 0.8).unwrap();
        let h2 = entropy_resubstitution(&est, 0.01).unwrap().value;
        assert!(
            (h2 - naive_resub(name, &data, 0.8, 0.01)).abs() < 1e-12,
            "{name}"
        );

        let loo = entropy_leave_one_out(&ds, &kernel, 0.8).unwrap().value;
        let want = (0..data.len())
            .map(|i| -naive_loo(name, &data, 0.8, i).ln())
            .sum::<f64>()
            / data.len() as f64;
        assert!((loo - want).abs() < 1e-12, "{name}: {loo} vs {want}");
    }
}

#[test]
fn plugin_matches_doubling_riemann_oracle() {
    let data = sample("normal:sigma=1", 50, 1);
    let kernel = KernelSpec::parse("gaussian", 1).unwrap();
    let ds = DataSet::univariate(data.clone()).unwrap();
    let est = DensityEstimate::new(ds.clone(), kernel.clone(), 0.4).unwrap();
    let grid = EvaluationGrid::covering(&ds, &kernel, 0.4, 8001).unwrap();
    let got = entropy_plugin(&est, 0.01, &grid).unwrap().value;
    let (a, b) = (grid.lower()[0], grid.upper()[0]);
    let want = doubling_riemann(
        |x| {
            let f = naive_kde("gaussian", &data, 0.4, x);
            if f >= 0.01 {
                -f * f.ln()
            } else {
                0.0
            }
        },
        a,
        b,
        1e-6,
    );
    assert!((got - want).abs() < 1e-4, "{got} vs {want}");
}

#[test]
fn plugin_over_level_set_of_flat_estimate() {
    // boxcar, h = 1, coincident points: f̂ = 1 on [c − 1/2, c + 1/2), entropy 0
    let ds = DataSet::univariate(vec![0.3; 5]).unwrap();
    let kernel = KernelSpec::parse("boxcar", 1).unwrap();
    let est = DensityEstimate::new(ds.clone(), kernel.clone(), 1.0).unwrap();
    let grid = EvaluationGrid::covering(&ds, &kernel, 1.0, 1001).unwrap();
    let e = entropy_plugin(&est, 0.5, &grid).unwrap();
    assert_eq!(e.value, 0.0);
    assert!(e.excluded_fraction < 1e-12);
}

#[test]
fn two_dimensional_kde_is_product_of_axes() {
    let model = DistributionModel::parse("normal:sigma=1,d=2").unwrap();
    let ds = model.sample(120, 5).unwrap();
    let kernel = KernelSpec::parse("epanechnikov", 2).unwrap();
    let h = 0.6;
    let est = DensityEstimate::new(ds.clone(), kernel, h).unwrap();
    for &(x, y) in &[(0.0, 0.0), (0.5, -1.2), (1.7, 0.3), (-2.5, 2.5)] {
        let want: f64 = ds
            .rows()
            .map(|r| {
                kernel_1d("epanechnikov", (x - r[0]) / h)
                    * kernel_1d("epanechnikov", (y - r[1]) / h)
            })
            .sum::<f64>()
            / (ds.len() as f64 * h * h);
        let got = est.eval(&[x, y]).unwrap();
        assert!((got - want).abs() < 1e-12, "({x},{y}): {got} vs {want}");
    }
}
