//! Kernel density estimates, evaluation grids and exact smoothed densities.

use std::cell::{Cell, RefCell};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::KernelSpec;
use crate::numeric::{integrate, QuadratureOptions};

/// Largest number of nodes an [`EvaluationGrid`] may hold unless overridden.
pub const DEFAULT_GRID_CAP: usize = 4_000_000;

/// `n` observations in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    values: Vec<f64>,
    dim: usize,
}

impl DataSet {
    pub fn from_flat(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return domain("data dimension must be positive");
        }
        if values.is_empty() {
            return domain("data set must contain at least one observation");
        }
        if !values.len().is_multiple_of(dim) {
            return domain(format!(
                "{} values do not form rows of dimension {dim}",
                values.len()
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!(
                "non-finite value at row {}, column {}",
                pos / dim + 1,
                pos % dim + 1
            ));
        }
        Ok(Self { values, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return domain(format!(
                "row {} has {} columns, expected {dim}",
                i + 1,
                rows[i].len()
            ));
        }
        Self::from_flat(rows.concat(), dim)
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::from_flat(values, 1)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Componentwise minimum and maximum.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for row in self.rows() {
            for (k, &v) in row.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        (lo, hi)
    }
}

/// A rectangular lattice of evaluation nodes; each node is the center of a
/// cell of volume `Π spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    points_per_axis: Vec<usize>,
    spacing: Vec<f64>,
}

impl EvaluationGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points_per_axis: Vec<usize>) -> Result<Self> {
        Self::with_cap(lower, upper, points_per_axis, DEFAULT_GRID_CAP)
    }

    pub fn with_cap(
        lower: Vec<f64>,
        upper: Vec<f64>,
        points_per_axis: Vec<usize>,
        cap: usize,
    ) -> Result<Self> {
        let d = lower.len();
        if d == 0 || upper.len() != d || points_per_axis.len() != d {
            return domain("grid bounds and point counts must share a positive dimension");
        }
        for k in 0..d {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return domain(format!(
                    "grid axis {k}: need finite lower < upper, got [{}, {}]",
                    lower[k], upper[k]
                ));
            }
            if points_per_axis[k] < 2 {
                return domain(format!("grid axis {k}: at least two points required"));
            }
        }
        let total = points_per_axis
            .iter()
            .try_fold(1usize, |acc, &p| acc.checked_mul(p))
            .unwrap_or(usize::MAX);
        if total > cap {
            return Err(Error::GridTooLarge {
                requested: total,
                cap,
            });
        }
        let spacing = (0..d)
            .map(|k| (upper[k] - lower[k]) / (points_per_axis[k] - 1) as f64)
            .collect();
        Ok(Self {
            lower,
            upper,
            points_per_axis,
            spacing,
        })
    }

    /// Default resolution: 401 nodes per axis in one dimension, 101 in two,
    /// and coarser beyond so that the total stays within the cap.
    pub fn default_points_per_axis(dim: usize) -> usize {
        match dim {
            1 => 401,
            2 => 101,
            3 => 61,
            _ => ((DEFAULT_GRID_CAP as f64).powf(1.0 / dim as f64).floor() as usize).max(2),
        }
    }

    /// Grid over the data range padded by the kernel reach `h · reach`.
    pub fn covering(
        data: &DataSet,
        kernel: &KernelSpec,
        bandwidth: f64,
        points_per_axis: usize,
    ) -> Result<Self> {
        let (lo, hi) = data.bounds();
        let pad = bandwidth * kernel.reach();
        let lower = lo.iter().map(|v| v - pad).collect();
        let upper = hi.iter().map(|v| v + pad).collect();
        Self::new(lower, upper, vec![points_per_axis; data.dim()])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn points_per_axis(&self) -> &[usize] {
        &self.points_per_axis
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn cell_diameter(&self) -> f64 {
        self.spacing.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Writes node `index` (row-major, last axis fastest) into `out`.
    pub fn point_into(&self, index: usize, out: &mut [f64]) {
        let mut rem = index;
        for k in (0..self.dim()).rev() {
            let m = self.points_per_axis[k];
            let i = rem % m;
            rem /= m;
            out[k] = if i == m - 1 {
                self.upper[k]
            } else {
                self.lower[k] + i as f64 * self.spacing[k]
            };
        }
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point_into(index, &mut p);
        p
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

/// The kernel density estimate `f̂(x) = (n hᵈ)⁻¹ Σᵢ K((x − Xᵢ)/h)`.
///
/// Observations are kept in lexicographic order internally, so every sum over
/// the sample is independent of the order in which rows were supplied.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    data: DataSet,
    sorted: Vec<f64>,
    order: Vec<usize>,
    kernel: KernelSpec,
    bandwidth: f64,
    scale: f64,
}

impl DensityEstimate {
    pub fn new(data: DataSet, kernel: KernelSpec, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth <= 1.0) {
            return domain(format!("bandwidth must lie in (0, 1], got {bandwidth}"));
        }
        if kernel.dimension() != data.dim() {
            return domain(format!(
                "kernel dimension {} does not match data dimension {}",
                kernel.dimension(),
                data.dim()
            ));
        }
        let d = data.dim();
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| {
            data.row(a)
                .iter()
                .zip(data.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut sorted = Vec::with_capacity(data.as_flat().len());
        for &i in &order {
            sorted.extend_from_slice(data.row(i));
        }
        let scale = 1.0 / (data.len() as f64 * bandwidth.powi(d as i32));
        Ok(Self {
            data,
            sorted,
            order,
            kernel,
            bandwidth,
            scale,
        })
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    fn sorted_row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.sorted[i * d..(i + 1) * d]
    }

    /// Original row index of the `i`-th observation in sorted order.
    pub(crate) fn original_index(&self, sorted_pos: usize) -> usize {
        self.order[sorted_pos]
    }

    /// Sorted positions whose first coordinate can be within kernel reach of `x0`.
    fn window(&self, x0: f64) -> std::ops::Range<usize> {
        let d = self.dim();
        let n = self.n();
        let reach = self.kernel.reach() * self.bandwidth;
        if !reach.is_finite() {
            return 0..n;
        }
        // widened so that rounding never drops a contributing point
        let slack = reach * (1.0 + 1e-9) + 1e-300;
        let (lo, hi) = (x0 - slack, x0 + slack);
        let first = |i: usize| self.sorted[i * d];
        let start = partition(n, |i| first(i) < lo);
        let end = partition(n, |i| first(i) <= hi);
        start..end.max(start)
    }

    /// `Σ K((x − Xⱼ)/h)` over sorted positions, optionally skipping one.
    fn kernel_sum(&self, x: &[f64], skip: Option<usize>, buf: &mut [f64]) -> f64 {
        let h = self.bandwidth;
        let range = self.window(x[0]);
        if buf.len() == 1 {
            let ys = &self.sorted[range.clone()];
            return match skip {
                Some(j) if range.contains(&j) => {
                    let cut = j - range.start;
                    let left = self.kernel.profile_sum(x[0], &ys[..cut], h);
                    left + self.kernel.profile_sum(x[0], &ys[cut + 1..], h)
                }
                _ => self.kernel.profile_sum(x[0], ys, h),
            };
        }
        let mut acc = 0.0;
        for j in range {
            if Some(j) == skip {
                continue;
            }
            let row = self.sorted_row(j);
            for k in 0..buf.len() {
                buf[k] = (x[k] - row[k]) / h;
            }
            acc += self.kernel.eval_unchecked(buf);
        }
        acc
    }

    /// `f̂(x)`; may be negative for higher-order kernels.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return domain(format!(
                "point has dimension {} but data has dimension {}",
                x.len(),
                self.dim()
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return domain("evaluation point must be finite");
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.dim()];
        self.kernel_sum(x, None, &mut buf) * self.scale
    }

    /// `f̂` at every node of `grid`, row-major.
    pub fn eval_grid(&self, grid: &EvaluationGrid) -> Result<Vec<f64>> {
        if grid.dim() != self.dim() {
            return domain(format!(
                "grid dimension {} does not match data dimension {}",
                grid.dim(),
                self.dim()
            ));
        }
        let d = self.dim();
        Ok((0..grid.len())
            .into_par_iter()
            .with_min_len(64)
            .map_init(
                || (vec![0.0; d], vec![0.0; d]),
                |(x, buf), i| {
                    grid.point_into(i, x);
                    self.kernel_sum(x, None, buf) * self.scale
                },
            )
            .collect())
    }

    /// `f̂(Xᵢ)` for every observation, listed in the internal sorted order.
    pub fn eval_at_observations(&self) -> Vec<f64> {
        let d = self.dim();
        (0..self.n())
            .into_par_iter()
            .with_min_len(64)
            .map_init(
                || vec![0.0; d],
                |buf, i| self.kernel_sum(self.sorted_row(i), None, buf) * self.scale,
            )
            .collect()
    }

    /// `((n−1) hᵈ)⁻¹ Σ_{j≠i} K((Xᵢ − Xⱼ)/h)` for every observation, in the
    /// internal sorted order.
    pub fn leave_one_out_at_observations(&self) -> Vec<f64> {
        let d = self.dim();
        let n = self.n();
        let scale = if n > 1 {
            1.0 / ((n - 1) as f64 * self.bandwidth.powi(d as i32))
        } else {
            f64::NAN
        };
        (0..n)
            .into_par_iter()
            .with_min_len(64)
            .map_init(
                || vec![0.0; d],
                |buf, i| self.kernel_sum(self.sorted_row(i), Some(i), buf) * scale,
            )
            .collect()
    }

    /// Observations in the internal sorted order.
    pub fn sorted_observations(&self) -> std::slice::ChunksExact<'_, f64> {
        self.sorted.chunks_exact(self.dim())
    }
}

fn partition(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// A probability density that can be smoothed by a kernel.
pub trait DensityFunction: Sync {
    fn dimension(&self) -> usize;

    fn pdf(&self, x: &[f64]) -> f64;

    /// Coordinates along `axis` where the density or a low-order derivative
    /// is discontinuous; used as quadrature breakpoints.
    fn breakpoints(&self, _axis: usize) -> Vec<f64> {
        Vec::new()
    }
}

/// Adapts a closure into a [`DensityFunction`].
pub struct FnDensity<F> {
    dimension: usize,
    f: F,
    breakpoints: Vec<f64>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnDensity<F> {
    pub fn new(dimension: usize, f: F) -> Self {
        Self {
            dimension,
            f,
            breakpoints: Vec::new(),
        }
    }

    /// Breakpoints applied to every axis.
    pub fn with_breakpoints(mut self, points: Vec<f64>) -> Self {
        self.breakpoints = points;
        self
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> DensityFunction for FnDensity<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn breakpoints(&self, _axis: usize) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// `E f̂(x) = ∫ h⁻ᵈ K((x − y)/h) f(y) dy`, computed as `∫ K(u) f(x − h u) du`
/// by nested adaptive quadrature over the kernel support.
pub fn smoothed_density_eval<D: DensityFunction + ?Sized>(
    model: &D,
    kernel: &KernelSpec,
    bandwidth: f64,
    x: &[f64],
) -> Result<f64> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return domain(format!("bandwidth must be positive, got {bandwidth}"));
    }
    let d = kernel.dimension();
    if model.dimension() != d || x.len() != d {
        return domain("model, kernel and point dimensions must agree");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("evaluation point must be finite");
    }
    let reach = kernel.reach();
    let axis_breaks: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut pts = vec![-reach, reach];
            if !kernel.is_compact() {
                pts.push(0.0);
            }
            for b in model.breakpoints(k) {
                let u = (x[k] - b) / bandwidth;
                if u > -reach && u < reach {
                    pts.push(u);
                }
            }
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            pts
        })
        .collect();

    let opts = QuadratureOptions::default();
    let y = RefCell::new(vec![0.0; d]);
    let failure: Cell<Option<Error>> = Cell::new(None);

    fn axis_integral<D: DensityFunction + ?Sized>(axis: usize, ctx: &Ctx<'_, D>) -> Result<f64> {
        let d = ctx.x.len();
        let integrand = |u: f64| {
            let w = ctx.kernel.profile(u);
            if w == 0.0 {
                return 0.0;
            }
            ctx.y.borrow_mut()[axis] = ctx.x[axis] - ctx.h * u;
            if axis + 1 == d {
                let y = ctx.y.borrow();
                w * ctx.model.pdf(&y)
            } else {
                match axis_integral(axis + 1, ctx) {
                    Ok(v) => w * v,
                    Err(e) => {
                        ctx.failure.set(Some(e));
                        0.0
                    }
                }
            }
        };
        let r = integrate(integrand, &ctx.breaks[axis], ctx.opts)?;
        Ok(r.value)
    }

    struct Ctx<'a, D: ?Sized> {
        model: &'a D,
        kernel: &'a KernelSpec,
        h: f64,
        x: &'a [f64],
        y: &'a RefCell<Vec<f64>>,
        breaks: &'a [Vec<f64>],
        opts: QuadratureOptions,
        failure: &'a Cell<Option<Error>>,
    }

    let ctx = Ctx {
        model,
        kernel,
        h: bandwidth,
        x,
        y: &y,
        breaks: &axis_breaks,
        opts,
        failure: &failure,
    };
    let value = axis_integral(0, &ctx)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(value)
}

/// `max_x |f̂(x) − reference(x)|` over the grid nodes.
pub fn sup_deviation(
    est: &DensityEstimate,
    reference: impl Fn(&[f64]) -> f64 + Sync,
    grid: &EvaluationGrid,
) -> Result<f64> {
    let values = est.eval_grid(grid)?;
    let d = grid.dim();
    Ok(values
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0.0; d],
            |x, (i, v)| {
                grid.point_into(i, x);
                (v - reference(x)).abs()
            },
        )
        .reduce(|| 0.0, f64::max))
}
