//! Rankings that evolve over discrete time.
//!
//! Latent consensus rankings `rho^(0..=T)` form a Markov chain whose
//! transitions are Mallows with scale `beta`. Each slice has its own scale
//! `alpha^(t)`, which follows a Gaussian random walk with variance
//! `sigma_alpha^2` restricted to nonnegative values.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::augment::{AssessorData, AugmentOptions, Augmented};
use crate::numeric::accept;
use crate::partition::{LogPartition, PartitionError};
use crate::rank::{Metric, Ranking};
use crate::rng::stream_rng;
use crate::sampler::{
    check_initial_alpha, distance_delta, leap_and_shift, scale_update, AcceptanceStats, SamplerError, Tuning,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicHyper {
    /// Exponential rate for `alpha^(0)`.
    pub lambda_alpha: f64,
    /// Exponential rate for `beta`.
    pub lambda_beta: f64,
    /// Inverse-gamma shape for `sigma_alpha^2`.
    pub a: f64,
    /// Inverse-gamma scale for `sigma_alpha^2`.
    pub b: f64,
    /// Random-walk step for `beta`.
    pub sigma_beta: f64,
}

impl DynamicHyper {
    /// Same exponential rate for `alpha^(0)` and `beta`, `a = b = 1`,
    /// `sigma_beta = 0.04`.
    pub fn new(lambda: f64) -> Self {
        Self { lambda_alpha: lambda, lambda_beta: lambda, a: 1.0, b: 1.0, sigma_beta: 0.04 }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if positive(self.lambda_alpha)
            && positive(self.lambda_beta)
            && positive(self.a)
            && positive(self.b)
            && positive(self.sigma_beta)
        {
            Ok(())
        } else {
            Err(SamplerError::Prior(format!("hyperparameters must be positive: {self:?}")))
        }
    }
}

/// Observations grouped by time slice; a slice may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimedData {
    pub slices: Vec<Vec<AssessorData>>,
}

impl TimedData {
    pub fn new(slices: Vec<Vec<AssessorData>>) -> Self {
        Self { slices }
    }

    pub fn from_rankings(slices: Vec<Vec<Ranking>>) -> Self {
        Self { slices: slices.into_iter().map(|s| s.iter().map(AssessorData::complete).collect()).collect() }
    }

    /// Index of the last slice, `T`.
    pub fn horizon(&self) -> usize {
        self.slices.len().saturating_sub(1)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.slices.iter().map(Vec::len).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicState {
    pub rho: Vec<Ranking>,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub sigma2: f64,
}

impl DynamicState {
    pub fn assert_invariants(&self) {
        assert_eq!(self.rho.len(), self.alpha.len());
        assert!(self.alpha.iter().all(|&a| a >= 0.0));
        assert!(self.beta >= 0.0);
        assert!(self.sigma2 > 0.0);
    }
}

/// Leap-and-shift update of `rho^(t)`, including the transition terms to
/// both neighbouring slices.
#[allow(clippy::too_many_arguments)]
pub fn mh_rho_t<R: Rng + ?Sized>(
    state: &mut DynamicState,
    t: usize,
    data: &[Ranking],
    metric: Metric,
    leap: usize,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> bool {
    let current = &state.rho[t];
    let n = current.len();
    if n < 2 {
        return false;
    }
    let proposal = leap_and_shift(current, leap, rng).proposal;
    stats.rho_proposed += 1;
    let neighbours: Vec<&Ranking> =
        [t.checked_sub(1), Some(t + 1)].into_iter().flatten().filter_map(|s| state.rho.get(s)).collect();
    let data_delta = distance_delta(metric, data, current, &proposal) as f64;
    let link_delta = distance_delta(metric, neighbours, current, &proposal) as f64;
    let log_ratio = -(state.alpha[t] / n as f64) * data_delta - (state.beta / n as f64) * link_delta;
    if accept(log_ratio, rng) {
        state.rho[t] = proposal;
        stats.rho_accepted += 1;
        true
    } else {
        false
    }
}

/// Gaussian random-walk update of `alpha^(t)`.
///
/// The target is `Z(alpha^(t))^{-N_t} exp(-(alpha^(t) / n) D_t)` times the
/// random-walk densities linking `alpha^(t)` to its neighbours, with the
/// exponential prior on `alpha^(0)`.
#[allow(clippy::too_many_arguments)]
pub fn mh_alpha_t<R: Rng + ?Sized>(
    state: &mut DynamicState,
    t: usize,
    data: &[Ranking],
    metric: Metric,
    table: &dyn LogPartition,
    lambda: f64,
    sigma_alpha: f64,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> Result<bool, PartitionError> {
    let rho = &state.rho[t];
    let distance: f64 = data.iter().map(|r| metric.distance_raw(r.ranks(), rho.ranks()) as f64).sum();
    let prev = t.checked_sub(1).map(|s| state.alpha[s]);
    let next = state.alpha.get(t + 1).copied();
    let two_var = 2.0 * state.sigma2;
    let walk =
        |a: f64| -prev.map_or(0.0, |p| (a - p).powi(2)) / two_var - next.map_or(0.0, |q| (q - a).powi(2)) / two_var;
    let rate = if t == 0 { lambda } else { 0.0 };
    let before = state.alpha[t];
    state.alpha[t] = scale_update(before, rho.len(), data.len(), distance, rate, sigma_alpha, table, walk, stats, rng)?;
    Ok(state.alpha[t] != before)
}

/// Gaussian random-walk update of the transition scale `beta`.
pub fn mh_beta<R: Rng + ?Sized>(
    state: &mut DynamicState,
    metric: Metric,
    table: &dyn LogPartition,
    lambda: f64,
    sigma_beta: f64,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> Result<bool, PartitionError> {
    let n = state.rho[0].len();
    let links = state.rho.len() - 1;
    let distance: f64 = state.rho.windows(2).map(|w| metric.distance_raw(w[1].ranks(), w[0].ranks()) as f64).sum();
    let before = state.beta;
    state.beta = scale_update(before, n, links, distance, lambda, sigma_beta, table, |_| 0.0, stats, rng)?;
    Ok(state.beta != before)
}

/// Conjugate inverse-gamma draw of `sigma_alpha^2` with shape `a + T/2` and
/// scale `b + sum (alpha^(t) - alpha^(t-1))^2 / 2`.
pub fn gibbs_sigma_alpha<R: Rng + ?Sized>(alpha: &[f64], a: f64, b: f64, rng: &mut R) -> f64 {
    let (shape, scale) = inverse_gamma_parameters(alpha, a, b);
    let precision = Gamma::new(shape, 1.0 / scale).expect("positive parameters").sample(rng);
    1.0 / precision
}

/// `(shape, scale)` of the conditional for `sigma_alpha^2`.
pub fn inverse_gamma_parameters(alpha: &[f64], a: f64, b: f64) -> (f64, f64) {
    let steps = alpha.len().saturating_sub(1);
    let ss: f64 = alpha.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    (a + steps as f64 / 2.0, b + 0.5 * ss)
}

/// Parameters that can be held fixed instead of sampled.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DynamicOptions {
    pub fixed_alpha: Option<Vec<f64>>,
    pub fixed_beta: Option<f64>,
    pub fixed_sigma2: Option<f64>,
    /// Starting `sigma_alpha^2` when it is sampled (defaults to 1).
    pub sigma2_init: Option<f64>,
    /// Starting `beta` when it is sampled (defaults to `alpha_init`).
    pub beta_init: Option<f64>,
    pub augment: AugmentOptions,
    pub check_invariants: bool,
}

/// Thinned draws from a dynamic chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicSamples {
    pub n: usize,
    pub metric: Metric,
    pub hyper: DynamicHyper,
    pub tuning: Tuning,
    pub iterations: Vec<usize>,
    pub alpha: Vec<Vec<f64>>,
    pub rho: Vec<Vec<Ranking>>,
    pub beta: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub stats: AcceptanceStats,
    pub beta_stats: AcceptanceStats,
}

impl DynamicSamples {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn slices(&self) -> usize {
        self.rho.first().map_or(0, Vec::len)
    }

    /// Posterior mean rank of every item at every slice, `[t][item]`.
    pub fn mean_rank_trajectories(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.slices()];
        for draw in &self.rho {
            for (t, r) in draw.iter().enumerate() {
                for (i, &k) in r.ranks().iter().enumerate() {
                    out[t][i] += k as f64;
                }
            }
        }
        let total = self.len().max(1) as f64;
        out.iter_mut().flatten().for_each(|v| *v /= total);
        out
    }
}

/// Runs the dynamic sampler. Each sweep updates every `rho^(t)`, every
/// `alpha^(t)`, `beta` and `sigma_alpha^2`, after augmenting incomplete data.
pub fn run_dynamic_chain(
    data: &TimedData,
    metric: Metric,
    hyper: &DynamicHyper,
    tuning: &Tuning,
    table: &dyn LogPartition,
    options: &DynamicOptions,
) -> Result<DynamicSamples, SamplerError> {
    let n = table.n();
    table.check(n, metric)?;
    hyper.validate()?;
    tuning.validate(n)?;
    options.augment.validate()?;
    let slices = data.slices.len();
    if slices == 0 {
        return Err(SamplerError::Data { index: 0, message: "at least one time slice is required".into() });
    }
    let flat: Vec<AssessorData> = data.slices.iter().flatten().cloned().collect();
    let slice_of: Vec<usize> =
        data.slices.iter().enumerate().flat_map(|(t, s)| std::iter::repeat_n(t, s.len())).collect();
    let bounds: Vec<std::ops::Range<usize>> = data
        .slices
        .iter()
        .scan(0, |start, s| {
            let r = *start..*start + s.len();
            *start += s.len();
            Some(r)
        })
        .collect();

    let alpha0 = match &options.fixed_alpha {
        Some(a) if a.len() != slices || a.iter().any(|&x| x.is_nan() || x < 0.0) => {
            return Err(SamplerError::Tuning(format!("fixed_alpha needs {slices} nonnegative values")));
        }
        Some(a) => a.clone(),
        None => vec![tuning.alpha_init; slices],
    };
    let beta0 = options.fixed_beta.or(options.beta_init).unwrap_or(tuning.alpha_init);
    let sigma0 = options.fixed_sigma2.or(options.sigma2_init).unwrap_or(1.0);
    if beta0.is_nan() || beta0 < 0.0 || sigma0.is_nan() || sigma0 <= 0.0 {
        return Err(SamplerError::Tuning("beta must be nonnegative and sigma_alpha^2 positive".into()));
    }
    for (t, s) in data.slices.iter().enumerate() {
        check_initial_alpha(alpha0[t], s.len(), table)?;
    }
    check_initial_alpha(beta0, slices - 1, table)?;

    let mut rng = stream_rng(tuning.seed, 0);
    let mut aug = Augmented::init(&flat, n, tuning.seed)?;
    let mut state = DynamicState {
        rho: (0..slices).map(|_| Ranking::random(n, &mut rng)).collect(),
        alpha: alpha0,
        beta: beta0,
        sigma2: sigma0,
    };
    let mut stats = AcceptanceStats::default();
    let mut beta_stats = AcceptanceStats::default();
    let mut out = DynamicSamples {
        n,
        metric,
        hyper: *hyper,
        tuning: tuning.clone(),
        iterations: Vec::new(),
        alpha: Vec::new(),
        rho: Vec::new(),
        beta: Vec::new(),
        sigma2: Vec::new(),
        stats: AcceptanceStats::default(),
        beta_stats: AcceptanceStats::default(),
    };
    for it in 1..=tuning.iterations {
        if it % options.augment.aug_frequency == 0 {
            let (alpha, rho) = (&state.alpha, &state.rho);
            aug.sweep(&flat, it, &options.augment, metric, |j| (alpha[slice_of[j]], &rho[slice_of[j]]), &mut stats);
        }
        for t in 0..slices {
            mh_rho_t(&mut state, t, &aug.rankings[bounds[t].clone()], metric, tuning.leap, &mut stats, &mut rng);
        }
        if options.fixed_alpha.is_none() {
            for t in 0..slices {
                mh_alpha_t(
                    &mut state,
                    t,
                    &aug.rankings[bounds[t].clone()],
                    metric,
                    table,
                    hyper.lambda_alpha,
                    tuning.sigma_alpha,
                    &mut stats,
                    &mut rng,
                )?;
            }
        }
        if options.fixed_beta.is_none() {
            mh_beta(&mut state, metric, table, hyper.lambda_beta, hyper.sigma_beta, &mut beta_stats, &mut rng)?;
        }
        if options.fixed_sigma2.is_none() {
            state.sigma2 = gibbs_sigma_alpha(&state.alpha, hyper.a, hyper.b, &mut rng);
        }
        if options.check_invariants {
            state.assert_invariants();
        }
        if tuning.keep(it) {
            out.iterations.push(it);
            out.alpha.push(state.alpha.clone());
            out.rho.push(state.rho.clone());
            out.beta.push(state.beta);
            out.sigma2.push(state.sigma2);
        }
    }
    stats.warn_on_range();
    beta_stats.warn_on_range();
    out.stats = stats;
    out.beta_stats = beta_stats;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::KendallClosedForm;

    fn r(v: &[usize]) -> Ranking {
        Ranking::new(v.to_vec()).unwrap()
    }

    #[test]
    fn inverse_gamma_parameters_example() {
        // T = 2, increments 1 and 0
        assert_eq!(inverse_gamma_parameters(&[1.0, 2.0, 2.0], 1.0, 1.0), (2.0, 1.5));
        assert_eq!(inverse_gamma_parameters(&[3.0, 3.0, 3.0], 1.0, 1.0), (2.0, 1.0));
        let mut rng = stream_rng(1, 0);
        assert!((0..1000).all(|_| gibbs_sigma_alpha(&[1.0, 2.0, 2.0], 1.0, 1.0, &mut rng) > 0.0));
    }

    #[test]
    fn negative_alpha_never_accepted() {
        let table = KendallClosedForm::new(3).unwrap();
        let mut state = DynamicState { rho: vec![r(&[1, 2, 3]); 2], alpha: vec![0.01, 0.01], beta: 0.0, sigma2: 1.0 };
        let mut rng = stream_rng(2, 0);
        let mut stats = AcceptanceStats::default();
        for _ in 0..1000 {
            mh_alpha_t(&mut state, 1, &[r(&[1, 2, 3])], Metric::Kendall, &table, 0.1, 1.0, &mut stats, &mut rng)
                .unwrap();
            assert!(state.alpha[1] >= 0.0);
        }
    }

    #[test]
    fn single_slice_beta_samples_prior() {
        let table = KendallClosedForm::new(3).unwrap();
        let mut state = DynamicState { rho: vec![r(&[1, 2, 3])], alpha: vec![1.0], beta: 1.0, sigma2: 1.0 };
        let mut rng = stream_rng(3, 0);
        let mut stats = AcceptanceStats::default();
        let lambda = 0.5;
        let mut sum = 0.0;
        let draws = 200_000;
        for _ in 0..draws {
            mh_beta(&mut state, Metric::Kendall, &table, lambda, 1.0, &mut stats, &mut rng).unwrap();
            sum += state.beta;
        }
        let mean = sum / draws as f64;
        assert!((mean - 2.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn mean_trajectories_of_constant_draws() {
        let s = DynamicSamples {
            n: 3,
            metric: Metric::Kendall,
            hyper: DynamicHyper::new(0.1),
            tuning: Tuning::default_for(Metric::Kendall),
            iterations: vec![1, 2],
            alpha: vec![vec![1.0, 1.0]; 2],
            rho: vec![vec![r(&[1, 2, 3]), r(&[3, 2, 1])]; 2],
            beta: vec![0.0; 2],
            sigma2: vec![1.0; 2],
            stats: AcceptanceStats::default(),
            beta_stats: AcceptanceStats::default(),
        };
        assert_eq!(s.mean_rank_trajectories(), vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]]);
    }

    #[test]
    fn empty_slices_run() {
        let table = KendallClosedForm::new(4).unwrap();
        let data = TimedData::from_rankings(vec![vec![r(&[1, 2, 3, 4])], vec![], vec![r(&[2, 1, 3, 4])]]);
        let tuning = Tuning { iterations: 500, burn_in: 100, thinning: 4, ..Tuning::default_for(Metric::Kendall) };
        let opts = DynamicOptions { check_invariants: true, ..DynamicOptions::default() };
        let s = run_dynamic_chain(&data, Metric::Kendall, &DynamicHyper::new(0.1), &tuning, &table, &opts).unwrap();
        assert_eq!(s.len(), 100);
        assert_eq!(s.slices(), 3);
    }
}
