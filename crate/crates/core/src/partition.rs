//! The Mallows normalizing constant `Z_n(alpha)`.
//!
//! For a right-invariant metric the constant does not depend on the consensus
//! ranking, so it is computed once per `(n, metric)` against the identity:
//!
//! ```text
//! Z_n(alpha) = sum over R in P_n of exp(-(alpha / n) d(R, id))
//! ```
//!
//! Three exact routes exist (Kendall closed form, exhaustive enumeration for
//! small `n`, and [`ExactPartition`]'s distance histogram) plus an importance
//! sampler for footrule and Spearman at larger `n`. Estimates over an `alpha`
//! grid are stored in a [`LogPartitionTable`] together with a degree-10
//! least-squares polynomial used by the samplers.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{ln_factorial, log_sum_exp};
use crate::rank::{Metric, Ranking};
use crate::rng::{stream_rng, substream};

/// Largest `n` enumerated exhaustively unless a different cap is requested.
pub const DEFAULT_ENUM_CAP: usize = 10;
/// Degree of the fitted polynomial.
pub const FIT_DEGREE: usize = 10;
/// Importance samples drawn per independent RNG stream.
pub const IS_BATCH: u64 = 4096;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("alpha must be a finite nonnegative number, got {0}")]
    InvalidAlpha(f64),
    #[error("exhaustive enumeration limited to n <= {cap}, got n = {n}")]
    TooLarge { n: usize, cap: usize },
    #[error("n must be at least 1")]
    EmptyDomain,
    #[error("{0} distance has no per-item decomposition; importance sampling needs footrule or spearman")]
    Unsupported(Metric),
    #[error("closed form only exists for the kendall distance, not {0}")]
    NoClosedForm(Metric),
    #[error("importance sampling needs at least one sample")]
    ZeroSamples,
    #[error("alpha {alpha} outside the table range [{min}, {max}]")]
    OutOfRange { alpha: f64, min: f64, max: f64 },
    #[error("polynomial fit needs at least {required} grid points, got {points}")]
    GridTooSmall { points: usize, required: usize },
    #[error("grid alpha values must be strictly increasing (position {0})")]
    GridNotIncreasing(usize),
    #[error("log Z must be finite (alpha = {0})")]
    NonFinite(f64),
    #[error("log Z(0) = {found} but log(n!) = {expected}")]
    BadOrigin { found: f64, expected: f64 },
    #[error("Z must decrease in alpha; grid positions {0} and {1} violate this")]
    NotDecreasing(usize, usize),
    #[error("tables cover different grids")]
    GridMismatch,
    #[error("least squares fit failed: {0}")]
    Fit(String),
    #[error("table is for n = {found}, expected n = {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("table is for the {found} distance, expected {expected}")]
    MetricMismatch { expected: Metric, found: Metric },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed partition table: {0}")]
    Json(#[from] serde_json::Error),
}

fn check_alpha(alpha: f64) -> Result<(), PartitionError> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(PartitionError::InvalidAlpha(alpha))
    }
}

/// Anything that can evaluate `log Z_n(alpha)` for one `(n, metric)`.
pub trait LogPartition: Send + Sync {
    fn n(&self) -> usize;
    fn metric(&self) -> Metric;
    fn log_z(&self, alpha: f64) -> Result<f64, PartitionError>;

    /// Verifies the function was built for `n` items under `metric`.
    fn check(&self, n: usize, metric: Metric) -> Result<(), PartitionError> {
        if self.n() != n {
            return Err(PartitionError::SizeMismatch { expected: n, found: self.n() });
        }
        if self.metric() != metric {
            return Err(PartitionError::MetricMismatch { expected: metric, found: self.metric() });
        }
        Ok(())
    }
}

/// `ln(sum_{j=0}^{i-1} exp(-c j))` for `c > 0`.
fn log_geometric(i: usize, c: f64) -> f64 {
    // ln(1 - exp(-x)), switching forms to keep relative precision at both ends
    fn log1mexp(x: f64) -> f64 {
        if x > std::f64::consts::LN_2 {
            (-(-x).exp()).ln_1p()
        } else {
            (-(-x).exp_m1()).ln()
        }
    }
    log1mexp(c * i as f64) - log1mexp(c)
}

/// Closed form `log Z_n(alpha)` for the Kendall distance:
/// `sum_{i=1}^n log sum_{j=0}^{i-1} exp(-alpha j / n)`.
pub fn kendall_log_partition(n: usize, alpha: f64) -> Result<f64, PartitionError> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(PartitionError::EmptyDomain);
    }
    if alpha == 0.0 {
        return Ok(ln_factorial(n));
    }
    let c = alpha / n as f64;
    Ok((2..=n).map(|i| log_geometric(i, c)).sum())
}

/// Kendall closed form as a [`LogPartition`].
#[derive(Debug, Clone, Copy)]
pub struct KendallClosedForm {
    n: usize,
}

impl KendallClosedForm {
    pub fn new(n: usize) -> Result<Self, PartitionError> {
        if n == 0 {
            return Err(PartitionError::EmptyDomain);
        }
        Ok(Self { n })
    }
}

impl LogPartition for KendallClosedForm {
    fn n(&self) -> usize {
        self.n
    }
    fn metric(&self) -> Metric {
        Metric::Kendall
    }
    fn log_z(&self, alpha: f64) -> Result<f64, PartitionError> {
        kendall_log_partition(self.n, alpha)
    }
}

/// Exact `Z_n(alpha)` from the distribution of `d(R, P)` over all of `P_n`.
///
/// Enumeration happens once at construction; evaluation is a log-sum-exp over
/// the distinct distance values.
#[derive(Debug, Clone)]
pub struct ExactPartition {
    n: usize,
    metric: Metric,
    // (distance, multiplicity), sorted by distance
    histogram: Vec<(u64, u64)>,
}

impl ExactPartition {
    pub fn new(n: usize, metric: Metric) -> Result<Self, PartitionError> {
        Self::with_cap(n, metric, DEFAULT_ENUM_CAP)
    }

    pub fn with_cap(n: usize, metric: Metric, cap: usize) -> Result<Self, PartitionError> {
        if n == 0 {
            return Err(PartitionError::EmptyDomain);
        }
        Self::with_reference(&Ranking::identity(n), metric, cap)
    }

    /// Enumerates distances to an arbitrary reference permutation.
    pub fn with_reference(reference: &Ranking, metric: Metric, cap: usize) -> Result<Self, PartitionError> {
        let n = reference.len();
        if n == 0 {
            return Err(PartitionError::EmptyDomain);
        }
        if n > cap {
            return Err(PartitionError::TooLarge { n, cap });
        }
        let mut counts: HashMap<u64, u64> = HashMap::new();
        for_each_permutation(n, |perm| {
            *counts.entry(metric.distance_raw(perm, reference.ranks())).or_default() += 1;
        });
        let mut histogram: Vec<(u64, u64)> = counts.into_iter().collect();
        histogram.sort_unstable();
        Ok(Self { n, metric, histogram })
    }

    pub fn histogram(&self) -> &[(u64, u64)] {
        &self.histogram
    }
}

impl LogPartition for ExactPartition {
    fn n(&self) -> usize {
        self.n
    }
    fn metric(&self) -> Metric {
        self.metric
    }
    fn log_z(&self, alpha: f64) -> Result<f64, PartitionError> {
        check_alpha(alpha)?;
        let c = alpha / self.n as f64;
        let terms: Vec<f64> = self.histogram.iter().map(|&(d, m)| (m as f64).ln() - c * d as f64).collect();
        Ok(log_sum_exp(&terms))
    }
}

/// Visits every permutation of `1..=n` (Heap's algorithm).
pub(crate) fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (1..=n).collect();
    let mut c = vec![0usize; n];
    visit(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// `log Z_n(alpha)` by summing all `n!` terms (`n <= DEFAULT_ENUM_CAP`).
pub fn exact_log_partition(n: usize, alpha: f64, metric: Metric) -> Result<f64, PartitionError> {
    check_alpha(alpha)?;
    ExactPartition::new(n, metric)?.log_z(alpha)
}

/// Importance-sampling estimate of `log Z_n(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsEstimate {
    pub log_z: f64,
    /// Standard error of `Z-hat` divided by `Z-hat`, i.e. the delta-method
    /// standard error of `log Z-hat`.
    pub std_error: f64,
    pub samples: u64,
}

// Running sums of exp(log_w - max), rescaled when the max moves.
#[derive(Debug, Clone, Copy)]
struct WeightSums {
    max: f64,
    sum: f64,
    sum_sq: f64,
    count: u64,
}

impl WeightSums {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0, sum_sq: 0.0, count: 0 }
    }

    fn push(&mut self, log_w: f64) {
        if log_w > self.max {
            let s = (self.max - log_w).exp();
            self.sum *= s;
            self.sum_sq *= s * s;
            self.max = log_w;
        }
        let w = (log_w - self.max).exp();
        self.sum += w;
        self.sum_sq += w * w;
        self.count += 1;
    }

    fn merge(mut self, other: WeightSums) -> WeightSums {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let max = self.max.max(other.max);
        let (sa, sb) = ((self.max - max).exp(), (other.max - max).exp());
        self.sum = self.sum * sa + other.sum * sb;
        self.sum_sq = self.sum_sq * sa * sa + other.sum_sq * sb * sb;
        self.max = max;
        self.count += other.count;
        self
    }

    fn estimate(&self) -> IsEstimate {
        let k = self.count as f64;
        let mean = self.sum / k;
        let var = (self.sum_sq / k - mean * mean).max(0.0);
        IsEstimate { log_z: self.max + mean.ln(), std_error: (var / k).sqrt() / mean, samples: self.count }
    }
}

/// One draw from the sequential pseudo-likelihood proposal; returns the log
/// importance weight `-(alpha/n) d(R, id) - log q(R)`.
///
/// Positions are filled from `n` down to 2, each rank drawn among the unused
/// ones with probability proportional to `exp(-(alpha/n) d_elem(rank, position))`;
/// position 1 takes the last rank. The weight telescopes to
/// `-(alpha/n) d_elem(R_1, 1) + sum_{i>=2} log S_i` with `S_i` the
/// normalizer at position `i`.
fn draw_log_weight<R: Rng + ?Sized>(
    n: usize,
    c: f64,
    metric: Metric,
    avail: &mut Vec<usize>,
    weights: &mut Vec<f64>,
    log_norm: &mut [f64],
    rng: &mut R,
) -> f64 {
    avail.clear();
    avail.extend(1..=n);
    let elem = |r: usize, p: usize| metric.element_distance(r, p).expect("decomposable metric") as f64;
    for pos in (2..=n).rev() {
        let min_d = avail.iter().map(|&r| elem(r, pos)).fold(f64::INFINITY, f64::min);
        weights.clear();
        weights.extend(avail.iter().map(|&r| (-c * (elem(r, pos) - min_d)).exp()));
        let total: f64 = weights.iter().sum();
        let k = crate::numeric::sample_weighted(weights, total, rng);
        log_norm[pos] = -c * min_d + total.ln();
        avail.swap_remove(k);
    }
    let mut log_w = -c * elem(avail[0], 1);
    for &l in &log_norm[2..=n] {
        log_w += l;
    }
    log_w
}

fn is_sums(n: usize, alpha: f64, metric: Metric, k: u64, seed: u64, family: u32) -> WeightSums {
    let c = alpha / n as f64;
    let batches = k.div_ceil(IS_BATCH);
    let parts: Vec<WeightSums> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, substream(family, b as u32));
            let size = IS_BATCH.min(k - b * IS_BATCH);
            let mut sums = WeightSums::new();
            let (mut avail, mut weights) = (Vec::with_capacity(n), Vec::with_capacity(n));
            let mut log_norm = vec![0.0; n + 1];
            for _ in 0..size {
                sums.push(draw_log_weight(n, c, metric, &mut avail, &mut weights, &mut log_norm, &mut rng));
            }
            sums
        })
        .collect();
    // deterministic merge in batch order
    parts.into_iter().fold(WeightSums::new(), WeightSums::merge)
}

/// Importance-sampling estimate of `log Z_n(alpha)` from `k` draws.
///
/// Work is split into batches of [`IS_BATCH`] draws, each on its own stream
/// of `seed`, so the estimate is independent of the thread count.
pub fn importance_sample_log_partition(
    n: usize,
    alpha: f64,
    metric: Metric,
    k: u64,
    seed: u64,
) -> Result<IsEstimate, PartitionError> {
    importance_sample_stream(n, alpha, metric, k, seed, 0)
}

fn importance_sample_stream(
    n: usize,
    alpha: f64,
    metric: Metric,
    k: u64,
    seed: u64,
    family: u32,
) -> Result<IsEstimate, PartitionError> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(PartitionError::EmptyDomain);
    }
    if metric.element_distance(1, 1).is_none() {
        return Err(PartitionError::Unsupported(metric));
    }
    if k == 0 {
        return Err(PartitionError::ZeroSamples);
    }
    Ok(is_sums(n, alpha, metric, k, seed, family).estimate())
}

/// `points` equally spaced values on `[min, max]`.
pub fn alpha_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..points)
            .map(|i| if i == points - 1 { max } else { min + (max - min) * i as f64 / (points - 1) as f64 })
            .collect(),
    }
}

/// 100 points on `[0.01, 20]`.
pub fn default_alpha_grid() -> Vec<f64> {
    alpha_grid(0.01, 20.0, 100)
}

/// Least-squares polynomial in the rescaled variable
/// `x = (2 alpha - lo - hi) / (hi - lo)` on `domain = [lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub coefficients: Vec<f64>,
    pub domain: [f64; 2],
    pub max_residual: f64,
}

impl PolyFit {
    fn scale(domain: [f64; 2], alpha: f64) -> f64 {
        let [lo, hi] = domain;
        if hi > lo {
            (2.0 * alpha - lo - hi) / (hi - lo)
        } else {
            0.0
        }
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        let x = Self::scale(self.domain, alpha);
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Degree-10 least-squares fit of `log Z` over a grid of `(alpha, log Z)`.
pub fn fit_log_partition(grid: &[(f64, f64)]) -> Result<PolyFit, PartitionError> {
    let required = FIT_DEGREE + 2;
    if grid.len() < required {
        return Err(PartitionError::GridTooSmall { points: grid.len(), required });
    }
    check_grid(grid)?;
    let domain = [grid[0].0, grid[grid.len() - 1].0];
    let m = grid.len();
    let design = DMatrix::from_fn(m, FIT_DEGREE + 1, |i, j| PolyFit::scale(domain, grid[i].0).powi(j as i32));
    let target = DVector::from_iterator(m, grid.iter().map(|&(_, y)| y));
    let svd = design.svd(true, true);
    let coef = svd.solve(&target, 1e-14).map_err(|e| PartitionError::Fit(e.to_string()))?;
    let mut fit = PolyFit { coefficients: coef.iter().copied().collect(), domain, max_residual: 0.0 };
    fit.max_residual = grid.iter().map(|&(a, y)| (fit.eval(a) - y).abs()).fold(0.0, f64::max);
    Ok(fit)
}

fn check_grid(grid: &[(f64, f64)]) -> Result<(), PartitionError> {
    for (i, &(a, y)) in grid.iter().enumerate() {
        check_alpha(a)?;
        if !y.is_finite() {
            return Err(PartitionError::NonFinite(a));
        }
        if i > 0 && a <= grid[i - 1].0 {
            return Err(PartitionError::GridNotIncreasing(i));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    ClosedForm,
    ExactEnum,
    ImportanceSampling,
    Imported,
}

/// `log Z_n(alpha)` over a grid plus its polynomial fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPartitionTable {
    pub n: usize,
    pub metric: Metric,
    pub method: PartitionMethod,
    pub grid: Vec<[f64; 2]>,
    /// Coefficients `c0..c10` in the rescaled variable over `domain`.
    pub poly: Vec<f64>,
    pub domain: [f64; 2],
    pub fit_residual: f64,
    #[serde(rename = "K")]
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

impl LogPartitionTable {
    /// Validates the grid and fits the polynomial.
    pub fn from_grid(
        n: usize,
        metric: Metric,
        method: PartitionMethod,
        grid: Vec<(f64, f64)>,
        samples: Option<u64>,
        seed: Option<u64>,
    ) -> Result<Self, PartitionError> {
        if n == 0 {
            return Err(PartitionError::EmptyDomain);
        }
        check_grid(&grid)?;
        if let Some(&(a, y)) = grid.first() {
            let expected = ln_factorial(n);
            if a == 0.0 && (y - expected).abs() > 1e-9 {
                return Err(PartitionError::BadOrigin { found: y, expected });
            }
        }
        if let Some(i) = first_non_decreasing(&grid) {
            match method {
                PartitionMethod::ClosedForm | PartitionMethod::ExactEnum if n > 1 => {
                    return Err(PartitionError::NotDecreasing(i - 1, i));
                }
                PartitionMethod::ImportanceSampling | PartitionMethod::Imported => {
                    warn!("log Z is not decreasing between grid points {} and {}", i - 1, i);
                }
                _ => {}
            }
        }
        let fit = fit_log_partition(&grid)?;
        Ok(Self {
            n,
            metric,
            method,
            grid: grid.into_iter().map(|(a, y)| [a, y]).collect(),
            poly: fit.coefficients,
            domain: fit.domain,
            fit_residual: fit.max_residual,
            samples,
            seed,
        })
    }

    /// Kendall table from the closed form.
    pub fn closed_form(n: usize, alphas: &[f64]) -> Result<Self, PartitionError> {
        let grid = alphas
            .iter()
            .map(|&a| Ok((a, kendall_log_partition(n, a)?)))
            .collect::<Result<Vec<_>, PartitionError>>()?;
        Self::from_grid(n, Metric::Kendall, PartitionMethod::ClosedForm, grid, None, None)
    }

    /// Table from exhaustive enumeration.
    pub fn exact(n: usize, metric: Metric, alphas: &[f64]) -> Result<Self, PartitionError> {
        let exact = ExactPartition::new(n, metric)?;
        let grid = alphas.iter().map(|&a| Ok((a, exact.log_z(a)?))).collect::<Result<Vec<_>, PartitionError>>()?;
        Self::from_grid(n, metric, PartitionMethod::ExactEnum, grid, None, None)
    }

    /// Table from `k` importance samples at every grid point. Grid point `g`
    /// uses stream family `g` of `seed`.
    pub fn importance_sampling(
        n: usize,
        metric: Metric,
        alphas: &[f64],
        k: u64,
        seed: u64,
    ) -> Result<Self, PartitionError> {
        let grid = alphas
            .par_iter()
            .enumerate()
            .map(|(g, &a)| Ok((a, importance_sample_stream(n, a, metric, k, seed, g as u32)?.log_z)))
            .collect::<Result<Vec<_>, PartitionError>>()?;
        Self::from_grid(n, metric, PartitionMethod::ImportanceSampling, grid, Some(k), Some(seed))
    }

    /// Table from externally computed values (e.g. asymptotic approximations).
    pub fn imported(n: usize, metric: Metric, grid: Vec<(f64, f64)>) -> Result<Self, PartitionError> {
        Self::from_grid(n, metric, PartitionMethod::Imported, grid, None, None)
    }

    pub fn alpha_range(&self) -> (f64, f64) {
        (self.domain[0], self.domain[1])
    }

    pub fn fit(&self) -> PolyFit {
        PolyFit { coefficients: self.poly.clone(), domain: self.domain, max_residual: self.fit_residual }
    }

    pub fn to_json(&self) -> Result<String, PartitionError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PartitionError> {
        let table: Self = serde_json::from_str(text)?;
        let grid: Vec<(f64, f64)> = table.grid.iter().map(|&[a, y]| (a, y)).collect();
        check_grid(&grid)?;
        if table.poly.is_empty() {
            return Err(PartitionError::Fit("empty polynomial".into()));
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PartitionError> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PartitionError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn first_non_decreasing(grid: &[(f64, f64)]) -> Option<usize> {
    (1..grid.len()).find(|&i| grid[i].1 >= grid[i - 1].1)
}

/// Polynomial evaluation of a table; no extrapolation outside its range.
pub fn evaluate_log_partition(table: &LogPartitionTable, alpha: f64) -> Result<f64, PartitionError> {
    let [min, max] = table.domain;
    if !(alpha >= min && alpha <= max) {
        return Err(PartitionError::OutOfRange { alpha, min, max });
    }
    Ok(table.fit().eval(alpha))
}

impl LogPartition for LogPartitionTable {
    fn n(&self) -> usize {
        self.n
    }
    fn metric(&self) -> Metric {
        self.metric
    }
    fn log_z(&self, alpha: f64) -> Result<f64, PartitionError> {
        let [min, max] = self.domain;
        if !(alpha >= min && alpha <= max) {
            return Err(PartitionError::OutOfRange { alpha, min, max });
        }
        let x = PolyFit::scale(self.domain, alpha);
        Ok(self.poly.iter().rev().fold(0.0, |acc, &c| acc * x + c))
    }
}

/// Maximum relative change of `log Z` between two tables on the same grid.
pub fn grid_convergence_check(old: &LogPartitionTable, new: &LogPartitionTable) -> Result<f64, PartitionError> {
    if old.grid.len() != new.grid.len() || old.grid.iter().zip(&new.grid).any(|(a, b)| a[0] != b[0]) {
        return Err(PartitionError::GridMismatch);
    }
    Ok(old.grid.iter().zip(&new.grid).map(|(o, n)| (n[1] - o[1]).abs() / o[1].abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kendall_trivial_values() {
        for a in [0.0, 0.3, 7.0] {
            assert_eq!(kendall_log_partition(1, a).unwrap(), 0.0);
        }
        assert!((kendall_log_partition(4, 0.0).unwrap() - 24f64.ln()).abs() < 1e-15);
        assert!(matches!(kendall_log_partition(4, -0.1), Err(PartitionError::InvalidAlpha(_))));
    }

    #[test]
    fn kendall_n3_alpha3_against_enumeration() {
        // brute force over the six permutations of three items
        let mut z = 0.0;
        for_each_permutation(3, |p| {
            let d = Metric::Kendall.distance_raw(p, &[1, 2, 3]);
            z += (-(d as f64)).exp();
        });
        let e1 = (-1f64).exp();
        let closed = (1.0 + e1).ln() + (1.0 + e1 + e1 * e1).ln();
        assert!((z.ln() - closed).abs() < 1e-14);
        assert!((kendall_log_partition(3, 3.0).unwrap() - closed).abs() < 1e-14);
    }

    #[test]
    fn heap_visits_all_permutations() {
        let mut seen = std::collections::HashSet::new();
        for_each_permutation(5, |p| {
            seen.insert(p.to_vec());
        });
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn exact_small_cases() {
        let v = exact_log_partition(2, 2.0, Metric::Footrule).unwrap();
        assert!((v - (1.0 + (-2f64).exp()).ln()).abs() < 1e-15);
        for m in Metric::ALL {
            for n in 1..=6 {
                let v = exact_log_partition(n, 0.0, m).unwrap();
                assert!((v - ln_factorial(n)).abs() < 1e-12);
            }
        }
        assert!(matches!(
            exact_log_partition(11, 1.0, Metric::Footrule),
            Err(PartitionError::TooLarge { n: 11, cap: 10 })
        ));
    }

    #[test]
    fn is_at_zero_is_exact() {
        for n in [1, 2, 5, 9] {
            let est = importance_sample_log_partition(n, 0.0, Metric::Footrule, 5000, 3).unwrap();
            assert_eq!(est.log_z, ln_factorial(n));
            assert_eq!(est.std_error, 0.0);
        }
    }

    #[test]
    fn is_errors() {
        assert!(matches!(
            importance_sample_log_partition(5, 1.0, Metric::Kendall, 10, 1),
            Err(PartitionError::Unsupported(Metric::Kendall))
        ));
        assert!(matches!(
            importance_sample_log_partition(5, 1.0, Metric::Footrule, 0, 1),
            Err(PartitionError::ZeroSamples)
        ));
    }

    #[test]
    fn is_close_to_exact_small() {
        let exact = exact_log_partition(6, 3.0, Metric::Spearman).unwrap();
        let est = importance_sample_log_partition(6, 3.0, Metric::Spearman, 20_000, 11).unwrap();
        assert!((est.log_z - exact).abs() < 4.0 * est.std_error + 1e-3, "{est:?} vs {exact}");
    }

    #[test]
    fn grid_helpers() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[99], 20.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cubic_recovered() {
        let f = |a: f64| 1.5 - 0.25 * a + 0.03 * a * a - 0.001 * a * a * a;
        let grid: Vec<_> = alpha_grid(0.0, 10.0, 30).into_iter().map(|a| (a, f(a))).collect();
        let fit = fit_log_partition(&grid).unwrap();
        for a in [0.0, 0.37, 5.5, 9.99] {
            assert!((fit.eval(a) - f(a)).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_fit() {
        let grid: Vec<_> = alpha_grid(0.5, 3.0, 15).into_iter().map(|a| (a, 2.5)).collect();
        let fit = fit_log_partition(&grid).unwrap();
        assert!((fit.coefficients[0] - 2.5).abs() < 1e-10);
        assert!(fit.coefficients[1..].iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn fit_rejects_small_grid() {
        let grid: Vec<_> = (0..11).map(|i| (i as f64, 0.0)).collect();
        assert!(matches!(fit_log_partition(&grid), Err(PartitionError::GridTooSmall { points: 11, required: 12 })));
        let bad = vec![(0.0, 1.0); 12];
        assert!(matches!(fit_log_partition(&bad), Err(PartitionError::GridNotIncreasing(1))));
    }

    #[test]
    fn table_range_and_knots() {
        let t = LogPartitionTable::closed_form(8, &default_alpha_grid()).unwrap();
        for &[a, y] in &t.grid {
            assert!((evaluate_log_partition(&t, a).unwrap() - y).abs() <= t.fit_residual + 1e-12);
        }
        assert!(matches!(evaluate_log_partition(&t, 21.0), Err(PartitionError::OutOfRange { .. })));
        assert!(evaluate_log_partition(&t, 0.0).is_err());
    }

    #[test]
    fn convergence_check_examples() {
        let grid: Vec<_> = alpha_grid(0.1, 2.0, 12).into_iter().map(|a| (a, 10.0 - a)).collect();
        let t = LogPartitionTable::imported(5, Metric::Footrule, grid.clone()).unwrap();
        assert_eq!(grid_convergence_check(&t, &t).unwrap(), 0.0);

        let ones: Vec<_> = grid.iter().map(|&(a, _)| (a, 1.0)).collect();
        let old = LogPartitionTable::imported(5, Metric::Footrule, ones.clone()).unwrap();
        let new =
            LogPartitionTable::imported(5, Metric::Footrule, ones.iter().map(|&(a, _)| (a, 1.1)).collect()).unwrap();
        assert!((grid_convergence_check(&old, &new).unwrap() - 0.1).abs() < 1e-12);

        let other = LogPartitionTable::imported(
            5,
            Metric::Footrule,
            alpha_grid(0.2, 2.0, 12).into_iter().map(|a| (a, 1.0)).collect(),
        )
        .unwrap();
        assert!(matches!(grid_convergence_check(&old, &other), Err(PartitionError::GridMismatch)));
    }

    #[test]
    fn origin_must_be_log_factorial() {
        let mut grid: Vec<_> = alpha_grid(0.0, 2.0, 12).into_iter().map(|a| (a, 5.0 - a)).collect();
        assert!(matches!(
            LogPartitionTable::imported(4, Metric::Footrule, grid.clone()),
            Err(PartitionError::BadOrigin { .. })
        ));
        grid[0].1 = 24f64.ln();
        grid.iter_mut().skip(1).for_each(|g| g.1 = 24f64.ln() - g.0);
        assert!(LogPartitionTable::imported(4, Metric::Footrule, grid).is_ok());
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let t =
            LogPartitionTable::importance_sampling(7, Metric::Footrule, &alpha_grid(0.01, 5.0, 15), 500, 9).unwrap();
        let back = LogPartitionTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(t, back);
        for (a, b) in t.poly.iter().zip(&back.poly) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let text = t.to_json().unwrap();
        for key in ["\"n\"", "\"metric\"", "\"method\"", "\"grid\"", "\"poly\"", "\"K\"", "\"seed\""] {
            assert!(text.contains(key), "{key}");
        }
    }
}
