//! Reference computations shared by the test targets.
#![allow(dead_code)]

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// One-dimensional kernel written from the textbook formulas.
pub fn kernel_1d(family: &str, u: f64) -> f64 {
    match family {
        "boxcar" => {
            if (-0.5..0.5).contains(&u) {
                1.0
            } else {
                0.0
            }
        }
        "epanechnikov" => {
            if u.abs() <= 1.0 {
                0.75 * (1.0 - u * u)
            } else {
                0.0
            }
        }
        "gaussian" => {
            if u.abs() <= 8.0 {
                (-0.5 * u * u).exp() / SQRT_2PI
            } else {
                0.0
            }
        }
        "poly4" => {
            if (-1.0..1.0).contains(&u) {
                (9.0 - 15.0 * u * u) / 8.0
            } else {
                0.0
            }
        }
        other => panic!("no oracle for {other}"),
    }
}

pub fn naive_kde(family: &str, data: &[f64], h: f64, x: f64) -> f64 {
    data.iter()
        .map(|&xi| kernel_1d(family, (x - xi) / h))
        .sum::<f64>()
        / (data.len() as f64 * h)
}

pub fn naive_loo(family: &str, data: &[f64], h: f64, i: usize) -> f64 {
    let s: f64 = data
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &xj)| kernel_1d(family, (data[i] - xj) / h))
        .sum();
    s / ((data.len() - 1) as f64 * h)
}

pub fn naive_resub(family: &str, data: &[f64], h: f64, gamma: f64) -> f64 {
    let n = data.len() as f64;
    data.iter()
        .map(|&x| naive_kde(family, data, h, x))
        .filter(|&f| f >= gamma)
        .map(|f| -f.ln())
        .sum::<f64>()
        / n
}

/// Midpoint rule on `[a, b]`, doubling the cell count until two successive
/// sums differ by less than `tol`.
pub fn doubling_riemann(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let riemann = |m: usize| {
        let w = (b - a) / m as f64;
        (0..m).map(|i| f(a + (i as f64 + 0.5) * w)).sum::<f64>() * w
    };
    let mut m = 1024;
    let mut prev = riemann(m);
    while m < 1 << 20 {
        m *= 2;
        let next = riemann(m);
        if (next - prev).abs() < tol {
            return next;
        }
        prev = next;
    }
    prev
}
