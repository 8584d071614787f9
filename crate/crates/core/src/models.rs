//! Ground-truth distributions with known entropies.

use std::f64::consts::{E, PI};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::density::{DataSet, DensityFunction};
use crate::error::{domain, Error, Result};
use crate::estimators::ThresholdSchedule;
use crate::numeric::{integrate, QuadratureOptions};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// An axis-aligned box; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SupportBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return domain("support box bounds must share a positive dimension");
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return domain("support box must have lower < upper on every axis");
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Componentwise intersection; `None` when empty.
    pub fn intersect(&self, other: &SupportBox) -> Option<SupportBox> {
        let lower: Vec<f64> = self
            .lower
            .iter()
            .zip(&other.lower)
            .map(|(a, b)| a.max(*b))
            .collect();
        let upper: Vec<f64> = self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(a, b)| a.min(*b))
            .collect();
        SupportBox::new(lower, upper).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Bounded(SupportBox),
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum ModelFamily {
    /// `U[0,1]ᵈ`.
    Uniform,
    /// `N(0, σ² I)`.
    Normal { sigma: f64 },
    /// `λ e^{−λx}` on `[0, ∞)`.
    Exponential { lambda: f64 },
    /// `1 − cos(2πx)` on `[0, 1]`.
    RaisedCosine,
    /// `w N(0,1) + (1 − w) N(μ,1)`.
    GaussianMixture { weight: f64, mean: f64 },
}

/// A density with sampler and closed-form entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionModel {
    family: ModelFamily,
    dimension: usize,
    entropy: f64,
}

impl fmt::Display for DistributionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl DistributionModel {
    pub fn new(family: ModelFamily, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return domain("model dimension must be positive");
        }
        let d = dimension as f64;
        let entropy = match family {
            ModelFamily::Uniform => 0.0,
            ModelFamily::Normal { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return domain(format!("normal sigma must be positive, got {sigma}"));
                }
                0.5 * d * (2.0 * PI * E * sigma * sigma).ln()
            }
            ModelFamily::Exponential { lambda } => {
                one_dimensional(dimension, "expo")?;
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return domain(format!("exponential rate must be positive, got {lambda}"));
                }
                1.0 - lambda.ln()
            }
            ModelFamily::RaisedCosine => {
                one_dimensional(dimension, "cosine")?;
                // −∫ (1 − cos 2πx) log(1 − cos 2πx) dx over a period
                std::f64::consts::LN_2 - 1.0
            }
            ModelFamily::GaussianMixture { weight, mean } => {
                one_dimensional(dimension, "gaussmix")?;
                if !(weight > 0.0 && weight < 1.0) || !mean.is_finite() {
                    return domain("gaussmix needs 0 < w < 1 and finite mu");
                }
                mixture_entropy(weight, mean)?
            }
        };
        Ok(Self {
            family,
            dimension,
            entropy,
        })
    }

    /// Parses `uniform[:d=k]`, `normal:sigma=s[,d=k]`, `expo:lambda=l`,
    /// `cosine`, `gaussmix:w=w,mu=m`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, params) = spec.split_once(':').unwrap_or((spec, ""));
        let mut d = 1usize;
        let mut sigma = 1.0;
        let mut lambda = 1.0;
        let mut w = 0.5;
        let mut mu = 3.0;
        for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("model parameter `{kv}` is not key=value")))?;
            let k = k.trim();
            let v = v.trim();
            let num = || {
                v.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("model parameter `{k}`: {e}")))
            };
            match (head, k) {
                (_, "d") => {
                    d = v
                        .parse()
                        .map_err(|e| Error::Parse(format!("model parameter `d`: {e}")))?
                }
                ("normal", "sigma") => sigma = num()?,
                ("expo", "lambda") => lambda = num()?,
                ("gaussmix", "w") => w = num()?,
                ("gaussmix", "mu") => mu = num()?,
                _ => {
                    return Err(Error::Parse(format!(
                        "unknown parameter `{k}` for model `{head}`"
                    )))
                }
            }
        }
        let family = match head {
            "uniform" => ModelFamily::Uniform,
            "normal" => ModelFamily::Normal { sigma },
            "expo" => ModelFamily::Exponential { lambda },
            "cosine" => ModelFamily::RaisedCosine,
            "gaussmix" => ModelFamily::GaussianMixture {
                weight: w,
                mean: mu,
            },
            _ => return Err(Error::Parse(format!("unknown model `{head}`"))),
        };
        Self::new(family, d)
    }

    /// Canonical name that round-trips through [`DistributionModel::parse`].
    pub fn name(&self) -> String {
        let d = self.dimension;
        match self.family {
            ModelFamily::Uniform if d == 1 => "uniform".into(),
            ModelFamily::Uniform => format!("uniform:d={d}"),
            ModelFamily::Normal { sigma } if d == 1 => format!("normal:sigma={sigma}"),
            ModelFamily::Normal { sigma } => format!("normal:sigma={sigma},d={d}"),
            ModelFamily::Exponential { lambda } => format!("expo:lambda={lambda}"),
            ModelFamily::RaisedCosine => "cosine".into(),
            ModelFamily::GaussianMixture { weight, mean } => {
                format!("gaussmix:w={weight},mu={mean}")
            }
        }
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `H(f)` in nats.
    pub fn true_entropy(&self) -> f64 {
        self.entropy
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match self.family {
            ModelFamily::Uniform => {
                if x.iter().all(|v| (0.0..=1.0).contains(v)) {
                    1.0
                } else {
                    0.0
                }
            }
            ModelFamily::Normal { sigma } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (-0.5 * r2 / (sigma * sigma)).exp() * (INV_SQRT_2PI / sigma).powi(x.len() as i32)
            }
            ModelFamily::Exponential { lambda } => {
                if x[0] >= 0.0 {
                    lambda * (-lambda * x[0]).exp()
                } else {
                    0.0
                }
            }
            ModelFamily::RaisedCosine => {
                if (0.0..=1.0).contains(&x[0]) {
                    1.0 - (2.0 * PI * x[0]).cos()
                } else {
                    0.0
                }
            }
            ModelFamily::GaussianMixture { weight, mean } => mixture_pdf(weight, mean, x[0]),
        }
    }

    pub fn support(&self) -> Support {
        let d = self.dimension;
        match self.family {
            ModelFamily::Uniform => Support::Bounded(SupportBox {
                lower: vec![0.0; d],
                upper: vec![1.0; d],
            }),
            ModelFamily::RaisedCosine => Support::Bounded(SupportBox {
                lower: vec![0.0],
                upper: vec![1.0],
            }),
            ModelFamily::Exponential { .. } => Support::Bounded(SupportBox {
                lower: vec![0.0],
                upper: vec![f64::INFINITY],
            }),
            ModelFamily::Normal { .. } | ModelFamily::GaussianMixture { .. } => Support::Unbounded,
        }
    }

    /// Whether the support is a bounded box.
    pub fn is_compact(&self) -> bool {
        matches!(self.support(), Support::Bounded(b) if b.upper.iter().chain(&b.lower).all(|v| v.is_finite()))
    }

    /// An upper bound on `sup f` (exact except for the mixture).
    pub fn sup_density(&self) -> f64 {
        match self.family {
            ModelFamily::Uniform => 1.0,
            ModelFamily::Normal { sigma } => (INV_SQRT_2PI / sigma).powi(self.dimension as i32),
            ModelFamily::Exponential { lambda } => lambda,
            ModelFamily::RaisedCosine => 2.0,
            ModelFamily::GaussianMixture { .. } => INV_SQRT_2PI,
        }
    }

    pub fn bounded_away_from_zero(&self) -> bool {
        matches!(self.family, ModelFamily::Uniform)
    }

    /// Largest `s` with bounded order-`s` partial derivatives on a compact
    /// support; `None` means every order. Models without compact support
    /// report `Some(0)`.
    pub fn smoothness_order(&self) -> Option<u32> {
        if self.is_compact() {
            None
        } else {
            Some(0)
        }
    }

    /// Threshold schedule: `α = 0` for densities bounded away from zero,
    /// `β = 0.25, α = 1` otherwise.
    pub fn default_schedule(&self) -> ThresholdSchedule {
        let alpha = if self.bounded_away_from_zero() {
            0.0
        } else {
            1.0
        };
        ThresholdSchedule::new(0.25, alpha).expect("valid constants")
    }

    /// `n` i.i.d. draws from a ChaCha8 stream keyed by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DataSet> {
        if n == 0 {
            return domain("sample size must be at least 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dimension;
        let mut values = Vec::with_capacity(n * d);
        match self.family {
            ModelFamily::Uniform => values.extend((0..n * d).map(|_| rng.gen::<f64>())),
            ModelFamily::Normal { sigma } => {
                values.extend((0..n * d).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)))
            }
            ModelFamily::Exponential { lambda } => {
                let exp = Exp::new(lambda).map_err(|e| Error::Domain(e.to_string()))?;
                values.extend((0..n).map(|_| rng.sample(exp)));
            }
            ModelFamily::RaisedCosine => {
                // rejection from U[0,1] under the envelope sup f = 2
                while values.len() < n {
                    let x: f64 = rng.gen();
                    let u: f64 = rng.gen();
                    if 2.0 * u < 1.0 - (2.0 * PI * x).cos() {
                        values.push(x);
                    }
                }
            }
            ModelFamily::GaussianMixture { weight, mean } => values.extend((0..n).map(|_| {
                let first = rng.gen::<f64>() < weight;
                let z: f64 = rng.sample(StandardNormal);
                if first {
                    z
                } else {
                    mean + z
                }
            })),
        }
        DataSet::from_flat(values, d)
    }

    /// Shrinks the data range by `1/log n` on every side and intersects it
    /// with the model support when known.
    pub fn support_estimate(&self, data: &DataSet) -> Result<SupportBox> {
        let est = empirical_support(data)?;
        match self.support() {
            Support::Bounded(b) => est
                .intersect(&b)
                .ok_or_else(|| Error::Domain("estimated support is empty".into())),
            Support::Unbounded => Ok(est),
        }
    }

    /// Sampled proxy for `E[log² f(X)] < ∞`: the running mean of `log² f`
    /// over `draws` points stays finite and moves by less than 25% over the
    /// last decade of draws.
    pub fn log_square_moment_is_finite(&self, draws: usize, seed: u64) -> Result<bool> {
        let data = self.sample(draws, seed)?;
        let tenth = (draws / 10).max(1);
        let mut sum = 0.0;
        let mut at_tenth = f64::NAN;
        for (i, x) in data.rows().enumerate() {
            let l = self.pdf(x).ln();
            sum += l * l;
            if i + 1 == tenth {
                at_tenth = sum / tenth as f64;
            }
        }
        let full = sum / draws as f64;
        Ok(full.is_finite()
            && (full - at_tenth).abs() <= 0.25 * full.abs().max(at_tenth.abs()) + 1e-12)
    }
}

/// Data range shrunk by `1/log n` on every side.
pub fn empirical_support(data: &DataSet) -> Result<SupportBox> {
    let n = data.len();
    if n < 3 {
        return domain("support estimate needs at least three observations");
    }
    let shrink = 1.0 / (n as f64).ln();
    let (lo, hi) = data.bounds();
    let lower = lo.iter().map(|v| v + shrink).collect();
    let upper = hi.iter().map(|v| v - shrink).collect();
    SupportBox::new(lower, upper).map_err(|_| Error::Domain("estimated support is empty".into()))
}

impl DensityFunction for DistributionModel {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        DistributionModel::pdf(self, x)
    }

    fn breakpoints(&self, _axis: usize) -> Vec<f64> {
        match self.family {
            ModelFamily::Uniform | ModelFamily::RaisedCosine => vec![0.0, 1.0],
            ModelFamily::Exponential { .. } => vec![0.0],
            ModelFamily::Normal { .. } | ModelFamily::GaussianMixture { .. } => Vec::new(),
        }
    }
}

fn one_dimensional(dimension: usize, name: &str) -> Result<()> {
    if dimension != 1 {
        return domain(format!("model `{name}` is one-dimensional"));
    }
    Ok(())
}

fn mixture_pdf(weight: f64, mean: f64, x: f64) -> f64 {
    let a = (-0.5 * x * x).exp();
    let b = (-0.5 * (x - mean) * (x - mean)).exp();
    INV_SQRT_2PI * (weight * a + (1.0 - weight) * b)
}

/// No closed form exists for a Gaussian mixture; the value is fixed by
/// high-accuracy quadrature at construction.
fn mixture_entropy(weight: f64, mean: f64) -> Result<f64> {
    let lo = mean.min(0.0) - 40.0;
    let hi = mean.max(0.0) + 40.0;
    let mut pts = vec![lo, 0.0, mean, hi];
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let opts = QuadratureOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        max_intervals: 4000,
    };
    let r = integrate(
        |x| {
            let p = mixture_pdf(weight, mean, x);
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        },
        &pts,
        opts,
    )?;
    Ok(r.value)
}
