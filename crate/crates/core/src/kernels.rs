//! Smoothing kernels.
//!
//! Every kernel is a product of a one-dimensional profile across axes.
//! Compact profiles vanish outside the half-open interval `[-r, r)` so that
//! the kernel is right-continuous; the Gaussian and double-exponential
//! profiles are truncated at a radius where the neglected mass is below
//! double precision.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::{integrate, QuadratureOptions};

/// Evaluation radius of the Gaussian profile.
pub const GAUSSIAN_TRUNCATION: f64 = 8.0;
/// Evaluation radius of the double-exponential profile (`e^-36 < 3e-16`).
pub const DOUBLE_EXPONENTIAL_TRUNCATION: f64 = 36.0;

const MAX_POLY_ORDER: u32 = 10;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `1` on `[-1/2, 1/2)`.
    Boxcar,
    /// `3/4 (1 - t^2)` on `[-1, 1)`.
    Epanechnikov,
    Gaussian,
    /// `exp(-|t|) / 2`.
    DoubleExponential,
    /// Order-`s` polynomial kernel on `[-1, 1)`: the Legendre projection of
    /// the point mass at zero onto polynomials of degree below `s`.
    Polynomial {
        order: u32,
    },
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Boxcar => write!(f, "boxcar"),
            KernelFamily::Epanechnikov => write!(f, "epanechnikov"),
            KernelFamily::Gaussian => write!(f, "gaussian"),
            KernelFamily::DoubleExponential => write!(f, "double_exponential"),
            KernelFamily::Polynomial { order } => write!(f, "poly:s={order}"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "boxcar" => Ok(KernelFamily::Boxcar),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "gaussian" => Ok(KernelFamily::Gaussian),
            "double_exponential" => Ok(KernelFamily::DoubleExponential),
            _ => {
                let order = s
                    .strip_prefix("poly:s=")
                    .ok_or_else(|| Error::Parse(format!("unknown kernel `{s}`")))?
                    .parse::<u32>()
                    .map_err(|e| Error::Parse(format!("kernel `{s}`: {e}")))?;
                Ok(KernelFamily::Polynomial { order })
            }
        }
    }
}

/// A product kernel in `dimension` dimensions with its analytic constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    dimension: usize,
    order: u32,
    /// Half-width of the support per axis; `+inf` for unbounded profiles.
    support_radius: f64,
    sup_norm: f64,
    sq_integral: f64,
    /// Monomial coefficients of the polynomial profile, lowest degree first.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    poly: Vec<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return domain("kernel dimension must be positive");
        }
        let (order, radius, sup1, sq1, poly) = match family {
            KernelFamily::Boxcar => (2, 0.5, 1.0, 1.0, Vec::new()),
            KernelFamily::Epanechnikov => (2, 1.0, 0.75, 0.6, Vec::new()),
            KernelFamily::Gaussian => (2, f64::INFINITY, INV_SQRT_2PI, 0.5 / PI.sqrt(), Vec::new()),
            KernelFamily::DoubleExponential => (2, f64::INFINITY, 0.5, 0.25, Vec::new()),
            KernelFamily::Polynomial { order } => {
                if order < 2 || order % 2 != 0 || order > MAX_POLY_ORDER {
                    return domain(format!(
                        "polynomial kernel order must be even and in 2..={MAX_POLY_ORDER}, got {order}"
                    ));
                }
                let poly = legendre_delta_projection(order);
                let sup = poly_sup_abs(&poly);
                let sq = poly_integral(&poly_mul(&poly, &poly));
                (order, 1.0, sup, sq, poly)
            }
        };
        let d = dimension as i32;
        Ok(Self {
            family,
            dimension,
            order,
            support_radius: radius,
            sup_norm: f64::powi(sup1, d),
            sq_integral: f64::powi(sq1, d),
            poly,
        })
    }

    /// Parses `boxcar | epanechnikov | gaussian | double_exponential | poly:s=<int>`.
    pub fn parse(name: &str, dimension: usize) -> Result<Self> {
        Self::new(name.parse()?, dimension)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Moment order `s`: moments of total degree `1..s` vanish.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn is_compact(&self) -> bool {
        self.support_radius.is_finite()
    }

    /// `sup |K|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `∫ K²`.
    pub fn sq_integral(&self) -> f64 {
        self.sq_integral
    }

    /// Per-axis radius beyond which the profile evaluates to exactly zero.
    pub fn reach(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian => GAUSSIAN_TRUNCATION,
            KernelFamily::DoubleExponential => DOUBLE_EXPONENTIAL_TRUNCATION,
            _ => self.support_radius,
        }
    }

    /// Whether the kernel never takes negative values.
    pub fn is_nonnegative(&self) -> bool {
        !matches!(self.family, KernelFamily::Polynomial { order } if order > 2)
    }

    /// One-dimensional profile `K₁(u)`.
    #[inline]
    pub fn profile(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Boxcar => {
                if (-0.5..0.5).contains(&u) {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Epanechnikov => {
                if (-1.0..1.0).contains(&u) {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => {
                if u.abs() <= GAUSSIAN_TRUNCATION {
                    (-0.5 * u * u).exp() * INV_SQRT_2PI
                } else {
                    0.0
                }
            }
            KernelFamily::DoubleExponential => {
                if u.abs() <= DOUBLE_EXPONENTIAL_TRUNCATION {
                    0.5 * (-u.abs()).exp()
                } else {
                    0.0
                }
            }
            KernelFamily::Polynomial { .. } => {
                if (-1.0..1.0).contains(&u) {
                    horner(&self.poly, u)
                } else {
                    0.0
                }
            }
        }
    }

    /// `Σ K₁((x − y)/h)` over `ys`, summed left to right.
    pub fn profile_sum(&self, x: f64, ys: &[f64], h: f64) -> f64 {
        #[inline(always)]
        fn sum(x: f64, ys: &[f64], h: f64, k: impl Fn(f64) -> f64) -> f64 {
            ys.iter().fold(0.0, |acc, &y| acc + k((x - y) / h))
        }
        match self.family {
            KernelFamily::Boxcar => sum(
                x,
                ys,
                h,
                |u| if (-0.5..0.5).contains(&u) { 1.0 } else { 0.0 },
            ),
            KernelFamily::Epanechnikov => sum(x, ys, h, |u| {
                if (-1.0..1.0).contains(&u) {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }),
            KernelFamily::Gaussian => sum(x, ys, h, |u| {
                if u.abs() <= GAUSSIAN_TRUNCATION {
                    (-0.5 * u * u).exp() * INV_SQRT_2PI
                } else {
                    0.0
                }
            }),
            _ => sum(x, ys, h, |u| self.profile(u)),
        }
    }

    /// `K(t) = Π K₁(tᵢ)` without input validation.
    #[inline]
    pub fn eval_unchecked(&self, t: &[f64]) -> f64 {
        let mut acc = 1.0;
        for &u in t {
            acc *= self.profile(u);
            if acc == 0.0 {
                break;
            }
        }
        acc
    }

    /// Evaluates the kernel at `t`.
    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        if t.len() != self.dimension {
            return domain(format!(
                "point has dimension {} but kernel has dimension {}",
                t.len(),
                self.dimension
            ));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return domain("kernel argument must be finite");
        }
        Ok(self.eval_unchecked(t))
    }

    /// Integration breakpoints for the 1-d profile.
    fn profile_breakpoints(&self) -> Vec<f64> {
        let r = self.reach();
        match self.family {
            KernelFamily::Gaussian | KernelFamily::DoubleExponential => vec![-r, 0.0, r],
            _ => vec![-r, r],
        }
    }

    fn profile_integral(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let opts = QuadratureOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_intervals: 4000,
        };
        Ok(integrate(
            |u| g(u) * self.profile(u),
            &self.profile_breakpoints(),
            opts,
        )?
        .value)
    }

    /// Numerically integrated mixed moments `∫ t₁^j₁ ⋯ t_d^j_d K(t) dt` for
    /// every multi-index of total degree `0..=max_degree`, in graded
    /// lexicographic order.
    ///
    /// Product form lets each mixed moment factor into one-dimensional
    /// integrals.
    pub fn moments(&self, max_degree: u32) -> Result<Vec<(Vec<u32>, f64)>> {
        if max_degree > self.order {
            return domain(format!(
                "moment degree {max_degree} exceeds kernel order {}",
                self.order
            ));
        }
        let one_d: Vec<f64> = (0..=max_degree)
            .map(|j| self.profile_integral(|u| u.powi(j as i32)))
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for degree in 0..=max_degree {
            for index in multi_indices(self.dimension, degree) {
                let m = index.iter().map(|&j| one_d[j as usize]).product();
                out.push((index, m));
            }
        }
        Ok(out)
    }

    /// Numerically checks normalization, the sup-norm bound, the moment
    /// conditions and `∫K²`.
    pub fn verify(&self) -> Result<KernelCheck> {
        let d = self.dimension as i32;
        let mass1 = self.profile_integral(|_| 1.0)?;
        let sq1 = self.profile_integral(|u| self.profile(u))?;

        let r = self.reach();
        let samples = 200_000;
        let sampled_sup1 = (0..=samples)
            .map(|i| self.profile(-r + 2.0 * r * i as f64 / samples as f64).abs())
            .fold(0.0, f64::max);

        let moments = self.moments(self.order)?;
        let low_moment_max = moments
            .iter()
            .filter(|(j, _)| {
                let deg: u32 = j.iter().sum();
                deg >= 1 && deg < self.order
            })
            .map(|(_, m)| m.abs())
            .fold(0.0, f64::max);
        let order_moment_max = moments
            .iter()
            .filter(|(j, _)| j.iter().sum::<u32>() == self.order)
            .map(|(_, m)| m.abs())
            .fold(0.0, f64::max);

        Ok(KernelCheck {
            mass: mass1.powi(d),
            sampled_sup: sampled_sup1.powi(d),
            sup_norm: self.sup_norm,
            low_moment_max,
            order_moment_max,
            sq_integral_numeric: sq1.powi(d),
            sq_integral: self.sq_integral,
        })
    }
}

/// Numerical evidence for the kernel conditions.
#[derive(Debug, Clone, Serialize)]
pub struct KernelCheck {
    pub mass: f64,
    pub sampled_sup: f64,
    pub sup_norm: f64,
    /// Largest |moment| among total degrees `1..s`.
    pub low_moment_max: f64,
    /// Largest |moment| among total degree `s`; mixed moments of product
    /// kernels may vanish at this degree, pure-axis ones do not.
    pub order_moment_max: f64,
    pub sq_integral_numeric: f64,
    pub sq_integral: f64,
}

impl KernelCheck {
    pub fn passes(&self, tol: f64) -> bool {
        (self.mass - 1.0).abs() <= tol
            && self.sampled_sup <= self.sup_norm + tol
            && self.low_moment_max <= tol
            && self.order_moment_max > tol
            && (self.sq_integral_numeric - self.sq_integral).abs() <= tol
    }
}

fn multi_indices(dimension: usize, degree: u32) -> Vec<Vec<u32>> {
    if dimension == 1 {
        return vec![vec![degree]];
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for mut rest in multi_indices(dimension - 1, degree - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `∫_{-1}^{1} p(t) dt`.
fn poly_integral(p: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(k, &c)| 2.0 * c / (k as f64 + 1.0))
        .sum()
}

/// Monomial coefficients of the Legendre polynomials `P_0..=P_max`.
fn legendre_polynomials(max: usize) -> Vec<Vec<f64>> {
    let mut ps = vec![vec![1.0], vec![0.0, 1.0]];
    for k in 1..max {
        let kf = k as f64;
        let mut next = vec![0.0; k + 2];
        for (i, &c) in ps[k].iter().enumerate() {
            next[i + 1] += (2.0 * kf + 1.0) * c / (kf + 1.0);
        }
        for (i, &c) in ps[k - 1].iter().enumerate() {
            next[i] -= kf * c / (kf + 1.0);
        }
        ps.push(next);
    }
    ps.truncate(max + 1);
    ps
}

/// `Σ_{k<s} (2k+1)/2 · P_k(0) · P_k(t)`: reproduces `p(0)` for every
/// polynomial `p` of degree below `s` when integrated against it on `[-1, 1]`.
fn legendre_delta_projection(order: u32) -> Vec<f64> {
    let s = order as usize;
    let ps = legendre_polynomials(s);
    let mut out = vec![0.0; s];
    for (k, p) in ps.iter().enumerate().take(s) {
        let w = (2.0 * k as f64 + 1.0) / 2.0 * p[0];
        for (i, &c) in p.iter().enumerate() {
            out[i] += w * c;
        }
    }
    while out.len() > 1 && out.last() == Some(&0.0) {
        out.pop();
    }
    out
}

/// `max |p|` on `[-1, 1]` via endpoints and bisection on sign changes of `p'`.
fn poly_sup_abs(p: &[f64]) -> f64 {
    let dp: Vec<f64> = p
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect();
    let mut best = horner(p, -1.0).abs().max(horner(p, 1.0).abs());
    if dp.is_empty() {
        return best;
    }
    let steps = 4096;
    let xs: Vec<f64> = (0..=steps)
        .map(|i| -1.0 + 2.0 * i as f64 / steps as f64)
        .collect();
    for w in xs.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (horner(&dp, a), horner(&dp, b));
        if fa == 0.0 {
            best = best.max(horner(p, a).abs());
        }
        if fa * fb < 0.0 {
            let mut fa = fa;
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                let fm = horner(&dp, m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            best = best.max(horner(p, 0.5 * (a + b)).abs());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1(family: KernelFamily) -> KernelSpec {
        KernelSpec::new(family, 1).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(k1(KernelFamily::Boxcar).eval(&[0.0]).unwrap(), 1.0);
        let g = k1(KernelFamily::Gaussian).eval(&[0.0]).unwrap();
        assert!((g - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(k1(KernelFamily::Epanechnikov).eval(&[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_non_finite_and_wrong_dimension() {
        let k = k1(KernelFamily::Gaussian);
        assert!(matches!(k.eval(&[f64::NAN]), Err(Error::Domain(_))));
        assert!(matches!(k.eval(&[0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn boxcar_is_right_continuous() {
        let k = k1(KernelFamily::Boxcar);
        assert_eq!(k.profile(-0.5), 1.0);
        assert_eq!(k.profile(0.5), 0.0);
    }

    #[test]
    fn gaussian_truncates_at_radius_eight() {
        let k = k1(KernelFamily::Gaussian);
        assert!(k.profile(7.99) > 0.0);
        assert_eq!(k.profile(8.01), 0.0);
    }

    #[test]
    fn parses_names() {
        assert_eq!(
            "poly:s=4".parse::<KernelFamily>().unwrap(),
            KernelFamily::Polynomial { order: 4 }
        );
        assert!("triangle".parse::<KernelFamily>().is_err());
        assert!("poly:s=x".parse::<KernelFamily>().is_err());
        for name in [
            "boxcar",
            "epanechnikov",
            "gaussian",
            "double_exponential",
            "poly:s=6",
        ] {
            let f: KernelFamily = name.parse().unwrap();
            assert_eq!(f.to_string(), name);
        }
    }

    #[test]
    fn rejects_odd_or_excessive_polynomial_order() {
        assert!(KernelSpec::new(KernelFamily::Polynomial { order: 3 }, 1).is_err());
        assert!(KernelSpec::new(KernelFamily::Polynomial { order: 12 }, 1).is_err());
        assert!(KernelSpec::new(KernelFamily::Boxcar, 0).is_err());
    }

    #[test]
    fn order_four_polynomial_has_known_closed_form() {
        // (9 - 15 t^2) / 8
        let k = k1(KernelFamily::Polynomial { order: 4 });
        for t in [-0.9, -0.3, 0.0, 0.4, 0.99] {
            assert!((k.profile(t) - (9.0 - 15.0 * t * t) / 8.0).abs() < 1e-14);
        }
        assert!((k.sup_norm() - 9.0 / 8.0).abs() < 1e-14);
        assert!(!k.is_nonnegative());
    }

    #[test]
    fn moment_examples() {
        let epa = k1(KernelFamily::Epanechnikov);
        let m1 = epa.moments(1).unwrap();
        assert_eq!(m1.len(), 2);
        assert_eq!(m1[1].0, vec![1]);
        assert!(m1[1].1.abs() < 1e-14);
        let m2 = epa.moments(2).unwrap();
        assert!((m2[2].1 - 0.2).abs() < 1e-12);
        let boxcar = k1(KernelFamily::Boxcar);
        assert!((boxcar.moments(2).unwrap()[2].1 - 1.0 / 12.0).abs() < 1e-12);
        assert!(boxcar.moments(3).is_err());
    }

    #[test]
    fn product_constants_scale_with_dimension() {
        let k = KernelSpec::new(KernelFamily::Epanechnikov, 2).unwrap();
        assert!((k.sup_norm() - 0.5625).abs() < 1e-15);
        assert!((k.sq_integral() - 0.36).abs() < 1e-15);
        let idx: Vec<Vec<u32>> = k.moments(2).unwrap().into_iter().map(|(j, _)| j).collect();
        assert_eq!(
            idx,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn all_kernels_satisfy_conditions() {
        let families = [
            KernelFamily::Boxcar,
            KernelFamily::Epanechnikov,
            KernelFamily::Gaussian,
            KernelFamily::DoubleExponential,
            KernelFamily::Polynomial { order: 2 },
            KernelFamily::Polynomial { order: 4 },
            KernelFamily::Polynomial { order: 6 },
        ];
        for family in families {
            for d in 1..=2 {
                let check = KernelSpec::new(family, d).unwrap().verify().unwrap();
                assert!(check.passes(1e-6), "{family} d={d}: {check:?}");
            }
        }
    }
}
