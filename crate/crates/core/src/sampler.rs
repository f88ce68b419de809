//! Metropolis-Hastings for the Mallows posterior of `(alpha, rho)`.
//!
//! Each iteration proposes a new consensus ranking with leap-and-shift and a
//! new scale parameter from a Gaussian random walk. The same building blocks
//! are reused by the augmentation, mixture and dynamic samplers.

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::accept;
use crate::partition::{LogPartition, PartitionError};
use crate::rank::{Metric, RankError, Ranking};
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid tuning: {0}")]
    Tuning(String),
    #[error("invalid prior: {0}")]
    Prior(String),
    #[error("data ranking {index} has {found} items, expected {expected}")]
    DataSize { index: usize, expected: usize, found: usize },
    #[error("initial alpha {0} is not usable: {1}")]
    InitialAlpha(f64, PartitionError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error("assessor {index}: {message}")]
    Data { index: usize, message: String },
}

/// Exponential prior on `alpha` with rate `lambda`; uniform prior on `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub lambda: f64,
}

impl Priors {
    pub fn new(lambda: f64) -> Result<Self, SamplerError> {
        let p = Self { lambda };
        p.validate()?;
        Ok(p)
    }

    /// `lambda = 1/10` for footrule and Kendall, `n/20` for Spearman.
    pub fn default_for(metric: Metric, n: usize) -> Self {
        match metric {
            Metric::Spearman => Self { lambda: n as f64 / 20.0 },
            Metric::Footrule | Metric::Kendall => Self { lambda: 0.1 },
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.lambda > 0.0 && self.lambda.is_finite() {
            Ok(())
        } else {
            Err(SamplerError::Prior(format!("lambda must be positive, got {}", self.lambda)))
        }
    }
}

/// How the `rho` acceptance ratio treats the leap-and-shift proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalCorrection {
    /// Treat the proposal as symmetric (no Hastings ratio).
    #[default]
    Symmetric,
    /// Multiply by `q(rho' -> rho) / q(rho -> rho')` computed by enumeration.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub leap: usize,
    pub sigma_alpha: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub alpha_init: f64,
    #[serde(default)]
    pub correction: ProposalCorrection,
}

impl Tuning {
    /// `L = 1`, `sigma_alpha = 0.04` (0.0016 for Spearman), 1e5 iterations,
    /// 1e4 burn-in, thinning 10.
    pub fn default_for(metric: Metric) -> Self {
        Self {
            leap: 1,
            sigma_alpha: match metric {
                Metric::Spearman => 0.0016,
                Metric::Footrule | Metric::Kendall => 0.04,
            },
            iterations: 100_000,
            burn_in: 10_000,
            thinning: 10,
            seed: 1,
            alpha_init: 1.0,
            correction: ProposalCorrection::Symmetric,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), SamplerError> {
        let max_leap = n.div_ceil(2).max(1);
        if self.leap < 1 || self.leap > max_leap {
            return Err(SamplerError::Tuning(format!("leap must lie in 1..={max_leap}, got {}", self.leap)));
        }
        if !(self.sigma_alpha > 0.0 && self.sigma_alpha.is_finite()) {
            return Err(SamplerError::Tuning(format!("sigma_alpha must be positive, got {}", self.sigma_alpha)));
        }
        if self.burn_in >= self.iterations {
            return Err(SamplerError::Tuning(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(SamplerError::Tuning("thinning must be at least 1".into()));
        }
        if !(self.alpha_init >= 0.0 && self.alpha_init.is_finite()) {
            return Err(SamplerError::Tuning(format!("alpha_init must be nonnegative, got {}", self.alpha_init)));
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }

    pub(crate) fn keep(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in).is_multiple_of(self.thinning)
    }
}

/// Proposal and acceptance counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub rho_proposed: u64,
    pub rho_accepted: u64,
    pub alpha_proposed: u64,
    pub alpha_accepted: u64,
    /// Alpha proposals rejected because they fell outside the partition table.
    pub alpha_range_rejections: u64,
    /// Alpha proposals skipped because the proposal distribution collapsed.
    #[serde(default)]
    pub alpha_degenerate: u64,
    pub augment_proposed: u64,
    pub augment_accepted: u64,
}

impl AcceptanceStats {
    pub fn rho_rate(&self) -> f64 {
        ratio(self.rho_accepted, self.rho_proposed)
    }

    pub fn alpha_rate(&self) -> f64 {
        ratio(self.alpha_accepted, self.alpha_proposed)
    }

    pub fn augment_rate(&self) -> f64 {
        ratio(self.augment_accepted, self.augment_proposed)
    }

    pub fn range_rejection_rate(&self) -> f64 {
        ratio(self.alpha_range_rejections, self.alpha_proposed)
    }

    pub(crate) fn merge(&mut self, other: &AcceptanceStats) {
        self.rho_proposed += other.rho_proposed;
        self.rho_accepted += other.rho_accepted;
        self.alpha_proposed += other.alpha_proposed;
        self.alpha_accepted += other.alpha_accepted;
        self.alpha_range_rejections += other.alpha_range_rejections;
        self.alpha_degenerate += other.alpha_degenerate;
        self.augment_proposed += other.augment_proposed;
        self.augment_accepted += other.augment_accepted;
    }

    pub(crate) fn warn_on_range(&self) {
        if self.range_rejection_rate() > 0.01 {
            warn!(
                "{:.1}% of alpha proposals fell outside the partition table; regenerate it over a wider range",
                100.0 * self.range_rejection_rate()
            );
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub alpha: f64,
    pub rho: Ranking,
    pub iteration: usize,
    pub stats: AcceptanceStats,
}

impl ChainState {
    pub fn new(alpha: f64, rho: Ranking) -> Self {
        Self { alpha, rho, iteration: 0, stats: AcceptanceStats::default() }
    }
}

/// Inclusive rank window for the leap of an item currently at `current`
/// (the window contains `current`, which is excluded from the support).
///
/// The three cases are checked in order (interior, top, bottom). When
/// `2L > n` the windows are clipped to `1..=n`.
pub fn leap_window(current: usize, n: usize, leap: usize) -> (usize, usize) {
    let (lo, hi) = if leap < current && current + leap <= n {
        (current - leap, current + leap)
    } else if current <= leap {
        (1, 2 * leap)
    } else {
        ((n + 1).saturating_sub(2 * leap), n)
    };
    (lo.max(1), hi.min(n))
}

/// Size of the leap support for an item at `current`.
pub fn leap_support_size(current: usize, n: usize, leap: usize) -> usize {
    let (lo, hi) = leap_window(current, n, leap);
    hi - lo
}

/// Outcome of one leap-and-shift draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeapShift {
    pub proposal: Ranking,
    pub item: usize,
    pub new_rank: usize,
}

/// Moves `item` to `new_rank` and shifts every item ranked between the old
/// and new position one step toward the vacated rank.
pub fn shift(rho: &Ranking, item: usize, new_rank: usize) -> Ranking {
    let old = rho.rank(item);
    let mut out = rho.ranks().to_vec();
    if new_rank > old {
        for r in out.iter_mut() {
            if *r > old && *r <= new_rank {
                *r -= 1;
            }
        }
    } else if new_rank < old {
        for r in out.iter_mut() {
            if *r >= new_rank && *r < old {
                *r += 1;
            }
        }
    }
    out[item] = new_rank;
    Ranking::from_vec_unchecked(out)
}

/// Leap-and-shift proposal with leap size `leap`.
///
/// A ranking of a single item has no other state; it is returned unchanged.
pub fn leap_and_shift<R: Rng + ?Sized>(rho: &Ranking, leap: usize, rng: &mut R) -> LeapShift {
    let n = rho.len();
    if n < 2 {
        return LeapShift { proposal: rho.clone(), item: 0, new_rank: 1 };
    }
    let item = rng.random_range(0..n);
    let current = rho.rank(item);
    let (lo, hi) = leap_window(current, n, leap);
    let mut new_rank = rng.random_range(lo..hi);
    if new_rank >= current {
        new_rank += 1;
    }
    LeapShift { proposal: shift(rho, item, new_rank), item, new_rank }
}

/// Probability of the leap step producing `leaped` (a rank vector that agrees
/// with `rho` everywhere except one item).
pub fn leap_pmf(rho: &Ranking, leaped: &[usize], leap: usize) -> f64 {
    let n = rho.len();
    if leaped.len() != n {
        return 0.0;
    }
    let mut diff = (0..n).filter(|&i| leaped[i] != rho.rank(i));
    let (Some(item), None) = (diff.next(), diff.next()) else {
        return 0.0;
    };
    let current = rho.rank(item);
    let (lo, hi) = leap_window(current, n, leap);
    if leaped[item] < lo || leaped[item] > hi {
        return 0.0;
    }
    1.0 / (n * (hi - lo)) as f64
}

/// Full leap-and-shift transition probability `q(rho -> proposal)`, summing
/// over every `(item, rank)` pair whose shift yields `proposal`.
pub fn proposal_probability(rho: &Ranking, proposal: &Ranking, leap: usize) -> f64 {
    let n = rho.len();
    if n < 2 || rho == proposal {
        return 0.0;
    }
    let changed: Vec<usize> = (0..n).filter(|&i| rho.rank(i) != proposal.rank(i)).collect();
    // a single leap changes a contiguous rank block; only its members can be the leaper
    let mut total = 0.0;
    for &item in &changed {
        let current = rho.rank(item);
        let target = proposal.rank(item);
        let (lo, hi) = leap_window(current, n, leap);
        if target < lo || target > hi {
            continue;
        }
        if shift(rho, item, target) == *proposal {
            total += 1.0 / (n * (hi - lo)) as f64;
        }
    }
    total
}

/// Change in `sum_j d(R_j, rho)` when `old` is replaced by `new`.
pub(crate) fn distance_delta<'a, I>(metric: Metric, data: I, old: &Ranking, new: &Ranking) -> i64
where
    I: IntoIterator<Item = &'a Ranking>,
{
    match metric {
        Metric::Footrule | Metric::Spearman => {
            let changed: Vec<usize> = (0..old.len()).filter(|&i| old.rank(i) != new.rank(i)).collect();
            let mut delta = 0i64;
            for r in data {
                for &i in &changed {
                    let x = r.rank(i);
                    let a = metric.element_distance(x, new.rank(i)).unwrap_or(0) as i64;
                    let b = metric.element_distance(x, old.rank(i)).unwrap_or(0) as i64;
                    delta += a - b;
                }
            }
            delta
        }
        Metric::Kendall => data
            .into_iter()
            .map(|r| {
                metric.distance_raw(r.ranks(), new.ranks()) as i64 - metric.distance_raw(r.ranks(), old.ranks()) as i64
            })
            .sum(),
    }
}

pub(crate) fn total_distance<'a, I>(metric: Metric, data: I, rho: &Ranking) -> f64
where
    I: IntoIterator<Item = &'a Ranking>,
{
    data.into_iter().map(|r| metric.distance_raw(r.ranks(), rho.ranks()) as f64).sum()
}

/// Log Hastings correction `log q(new -> old) - log q(old -> new)`.
pub(crate) fn hastings_log_ratio(old: &Ranking, new: &Ranking, leap: usize) -> f64 {
    proposal_probability(new, old, leap).ln() - proposal_probability(old, new, leap).ln()
}

/// One leap-and-shift update of `rho` against `members`; returns whether the
/// proposal was accepted.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rho_update<'a, I, R>(
    rho: &mut Ranking,
    alpha: f64,
    members: I,
    metric: Metric,
    leap: usize,
    correction: ProposalCorrection,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> bool
where
    I: IntoIterator<Item = &'a Ranking>,
    R: Rng + ?Sized,
{
    let n = rho.len();
    if n < 2 {
        return false;
    }
    let LeapShift { proposal, .. } = leap_and_shift(rho, leap, rng);
    stats.rho_proposed += 1;
    let delta = distance_delta(metric, members, rho, &proposal);
    let mut log_ratio = -(alpha / n as f64) * delta as f64;
    if correction == ProposalCorrection::Exact {
        log_ratio += hastings_log_ratio(rho, &proposal, leap);
    }
    if accept(log_ratio, rng) {
        *rho = proposal;
        stats.rho_accepted += 1;
        true
    } else {
        false
    }
}

/// Gaussian random-walk update of a scale parameter whose log target is
/// `-count * log Z(a) - rate * a - (a / n) * distance` plus `extra(a)`.
///
/// Negative proposals are rejected (outside the prior support). Proposals the
/// partition function cannot evaluate are rejected and counted as range
/// rejections. `count == 0` skips the partition function entirely.
#[allow(clippy::too_many_arguments)]
pub(crate) fn scale_update<R: Rng + ?Sized>(
    current: f64,
    n: usize,
    count: usize,
    distance: f64,
    rate: f64,
    sigma: f64,
    table: &dyn LogPartition,
    extra: impl Fn(f64) -> f64,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> Result<f64, PartitionError> {
    let step = Normal::new(0.0, sigma).expect("validated sigma");
    let proposal = current + step.sample(rng);
    stats.alpha_proposed += 1;
    if proposal < 0.0 {
        return Ok(current);
    }
    let mut log_ratio =
        -rate * (proposal - current) - (proposal - current) / n as f64 * distance + extra(proposal) - extra(current);
    if count > 0 {
        let new_z = match table.log_z(proposal) {
            Ok(z) => z,
            Err(PartitionError::OutOfRange { .. }) => {
                stats.alpha_range_rejections += 1;
                return Ok(current);
            }
            Err(e) => return Err(e),
        };
        log_ratio -= count as f64 * (new_z - table.log_z(current)?);
    }
    if proposal == current || accept(log_ratio, rng) {
        stats.alpha_accepted += 1;
        Ok(proposal)
    } else {
        Ok(current)
    }
}

/// Leap-and-shift Metropolis-Hastings update of `state.rho`.
pub fn mh_step_rho<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &[Ranking],
    metric: Metric,
    leap: usize,
    correction: ProposalCorrection,
    rng: &mut R,
) -> bool {
    rho_update(&mut state.rho, state.alpha, data, metric, leap, correction, &mut state.stats, rng)
}

/// Gaussian random-walk Metropolis-Hastings update of `state.alpha`.
pub fn mh_step_alpha<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &[Ranking],
    metric: Metric,
    table: &dyn LogPartition,
    lambda: f64,
    sigma_alpha: f64,
    rng: &mut R,
) -> Result<bool, PartitionError> {
    let distance = total_distance(metric, data, &state.rho);
    let before = state.alpha;
    state.alpha = scale_update(
        state.alpha,
        state.rho.len(),
        data.len(),
        distance,
        lambda,
        sigma_alpha,
        table,
        |_| 0.0,
        &mut state.stats,
        rng,
    )?;
    Ok(state.alpha != before)
}

/// Thinned posterior draws of `(alpha, rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub n: usize,
    pub metric: Metric,
    pub priors: Priors,
    pub tuning: Tuning,
    pub iterations: Vec<usize>,
    pub alpha: Vec<f64>,
    pub rho: Vec<Ranking>,
    /// Augmented per-assessor rankings at each retained iteration (empty
    /// unless requested).
    pub augmented: Vec<Vec<Ranking>>,
    pub stats: AcceptanceStats,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn alpha_mean(&self) -> f64 {
        self.alpha.iter().sum::<f64>() / self.alpha.len().max(1) as f64
    }

    /// Most frequently sampled consensus ranking; ties go to the first seen.
    pub fn posterior_mode(&self) -> Option<Ranking> {
        most_frequent(&self.rho)
    }
}

pub(crate) fn most_frequent(items: &[Ranking]) -> Option<Ranking> {
    let mut counts: std::collections::HashMap<&Ranking, (usize, usize)> = std::collections::HashMap::new();
    for (i, r) in items.iter().enumerate() {
        counts.entry(r).or_insert((0, i)).0 += 1;
    }
    counts.into_iter().max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1))).map(|(r, _)| r.clone())
}

pub(crate) fn check_data(data: &[Ranking], n: usize) -> Result<(), SamplerError> {
    for (index, r) in data.iter().enumerate() {
        if r.len() != n {
            return Err(SamplerError::DataSize { index, expected: n, found: r.len() });
        }
    }
    Ok(())
}

pub(crate) fn check_initial_alpha(alpha: f64, count: usize, table: &dyn LogPartition) -> Result<(), SamplerError> {
    if count > 0 {
        table.log_z(alpha).map_err(|e| SamplerError::InitialAlpha(alpha, e))?;
    }
    Ok(())
}

/// Runs the full-data sampler.
///
/// The number of items comes from `table`; `data` may be empty, in which case
/// the chain samples the prior.
pub fn run_chain(
    data: &[Ranking],
    metric: Metric,
    priors: &Priors,
    tuning: &Tuning,
    table: &dyn LogPartition,
) -> Result<PosteriorSamples, SamplerError> {
    let n = table.n();
    table.check(n, metric)?;
    check_data(data, n)?;
    priors.validate()?;
    tuning.validate(n)?;
    check_initial_alpha(tuning.alpha_init, data.len(), table)?;

    let mut rng = stream_rng(tuning.seed, 0);
    let mut state = ChainState::new(tuning.alpha_init, Ranking::random(n, &mut rng));
    let mut out = PosteriorSamples {
        n,
        metric,
        priors: *priors,
        tuning: tuning.clone(),
        iterations: Vec::with_capacity(tuning.retained()),
        alpha: Vec::with_capacity(tuning.retained()),
        rho: Vec::with_capacity(tuning.retained()),
        augmented: Vec::new(),
        stats: AcceptanceStats::default(),
    };
    for it in 1..=tuning.iterations {
        state.iteration = it;
        mh_step_rho(&mut state, data, metric, tuning.leap, tuning.correction, &mut rng);
        mh_step_alpha(&mut state, data, metric, table, priors.lambda, tuning.sigma_alpha, &mut rng)?;
        if tuning.keep(it) {
            out.iterations.push(it);
            out.alpha.push(state.alpha);
            out.rho.push(state.rho.clone());
        }
    }
    state.stats.warn_on_range();
    out.stats = state.stats;
    Ok(out)
}

/// `count` rankings, each obtained by applying `moves` independent
/// leap-and-shift moves to `truth`. Assessor `j` uses stream `j` of `seed`.
pub fn generate_by_perturbation(truth: &Ranking, count: usize, moves: usize, leap: usize, seed: u64) -> Vec<Ranking> {
    (0..count)
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            let mut r = truth.clone();
            for _ in 0..moves {
                r = leap_and_shift(&r, leap, &mut rng).proposal;
            }
            r
        })
        .collect()
}

/// Burn-in and spacing for [`sample_mallows_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MallowsDraws {
    pub burn_in: usize,
    pub interval: usize,
}

impl Default for MallowsDraws {
    fn default() -> Self {
        Self { burn_in: 5_000, interval: 100 }
    }
}

/// Draws `count` rankings from the Mallows model with fixed `(alpha, rho)` by
/// running a leap-and-shift chain (L = 1) and keeping widely spaced states.
///
/// Every L = 1 move is an adjacent transposition, so at small `alpha` the
/// plain chain alternates permutation parity. Each step therefore holds with
/// probability 1/2, which makes the chain aperiodic.
pub fn sample_mallows(rho: &Ranking, alpha: f64, metric: Metric, count: usize, seed: u64) -> Vec<Ranking> {
    sample_mallows_with(rho, alpha, metric, count, seed, MallowsDraws::default())
}

pub fn sample_mallows_with(
    rho: &Ranking,
    alpha: f64,
    metric: Metric,
    count: usize,
    seed: u64,
    schedule: MallowsDraws,
) -> Vec<Ranking> {
    let n = rho.len();
    let mut rng = stream_rng(seed, 0);
    let mut current = Ranking::random(n, &mut rng);
    let mut dist = metric.distance_raw(current.ranks(), rho.ranks());
    let c = alpha / n as f64;
    let step = |current: &mut Ranking, dist: &mut u64, rng: &mut crate::rng::ChainRng| {
        if rng.random_bool(0.5) {
            return;
        }
        let prop = leap_and_shift(current, 1, rng).proposal;
        let d = metric.distance_raw(prop.ranks(), rho.ranks());
        if accept(-c * (d as f64 - *dist as f64), rng) {
            *current = prop;
            *dist = d;
        }
    };
    for _ in 0..schedule.burn_in {
        step(&mut current, &mut dist, &mut rng);
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..schedule.interval.max(1) {
            step(&mut current, &mut dist, &mut rng);
        }
        out.push(current.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::KendallClosedForm;
    use crate::rng::stream_rng;

    fn r(v: &[usize]) -> Ranking {
        Ranking::new(v.to_vec()).unwrap()
    }

    #[test]
    fn forced_leap_example() {
        // n=5, L=1, item 0 at rank 1 can only go to rank 2
        assert_eq!(leap_window(1, 5, 1), (1, 2));
        assert_eq!(shift(&r(&[1, 2, 3, 4, 5]), 0, 2), r(&[2, 1, 3, 4, 5]));
    }

    #[test]
    fn windows() {
        assert_eq!(leap_window(3, 10, 2), (1, 5));
        assert_eq!(leap_window(2, 10, 2), (1, 4));
        assert_eq!(leap_window(9, 10, 2), (7, 10));
        // n = 2L - 1 clipping
        assert_eq!(leap_window(3, 5, 3), (1, 5));
        assert_eq!(leap_window(4, 5, 3), (1, 5));
        assert_eq!(leap_window(1, 2, 1), (1, 2));
    }

    #[test]
    fn proposal_never_equals_current() {
        let mut rng = stream_rng(5, 0);
        let rho = r(&[3, 1, 4, 2, 6, 5]);
        for _ in 0..2000 {
            let ls = leap_and_shift(&rho, 2, &mut rng);
            assert_ne!(ls.proposal, rho);
            assert_eq!(ls.proposal.rank(ls.item), ls.new_rank);
        }
    }

    #[test]
    fn shift_downward() {
        // item 3 from rank 4 to rank 1
        assert_eq!(shift(&r(&[1, 2, 3, 4]), 3, 1), r(&[2, 3, 4, 1]));
        assert_eq!(shift(&r(&[1, 2, 3, 4]), 0, 4), r(&[4, 1, 2, 3]));
    }

    #[test]
    fn pmf_basics() {
        let rho = r(&[1, 2, 3, 4, 5]);
        assert_eq!(leap_pmf(&rho, rho.ranks(), 1), 0.0);
        assert!((leap_pmf(&rho, &[2, 2, 3, 4, 5], 1) - 1.0 / 5.0).abs() < 1e-15);
        assert!((leap_pmf(&rho, &[1, 3, 3, 4, 5], 1) - 1.0 / 10.0).abs() < 1e-15);
        assert_eq!(leap_pmf(&rho, &[1, 4, 3, 4, 5], 1), 0.0);
        assert_eq!(leap_pmf(&rho, &[2, 1, 3, 4, 5], 1), 0.0);
    }

    #[test]
    fn proposal_probabilities_sum_to_one() {
        for n in 2..=5usize {
            for leap in 1..=n.div_ceil(2) {
                crate::partition::for_each_permutation(n, |p| {
                    let rho = r(p);
                    let mut total = 0.0;
                    crate::partition::for_each_permutation(n, |q| {
                        total += proposal_probability(&rho, &r(q), leap);
                    });
                    assert!((total - 1.0).abs() < 1e-12, "n={n} L={leap} rho={rho} total={total}");
                });
            }
        }
    }

    #[test]
    fn smaller_distance_always_accepted() {
        let data = vec![r(&[1, 2, 3, 4])];
        let mut rng = stream_rng(1, 0);
        let mut stats = AcceptanceStats::default();
        for _ in 0..200 {
            let mut rho = r(&[4, 3, 2, 1]);
            let before = total_distance(Metric::Footrule, &data, &rho);
            let start = rho.clone();
            let accepted = rho_update(
                &mut rho,
                5.0,
                &data,
                Metric::Footrule,
                1,
                ProposalCorrection::Symmetric,
                &mut stats,
                &mut rng,
            );
            if total_distance(Metric::Footrule, &data, &rho) < before {
                assert!(accepted);
            }
            if !accepted {
                assert_eq!(rho, start);
            }
        }
    }

    #[test]
    fn zero_alpha_always_accepts() {
        let data = vec![r(&[1, 2, 3, 4, 5])];
        let mut state = ChainState::new(0.0, r(&[5, 4, 3, 2, 1]));
        let mut rng = stream_rng(2, 0);
        for _ in 0..500 {
            assert!(mh_step_rho(&mut state, &data, Metric::Spearman, 2, ProposalCorrection::Symmetric, &mut rng));
        }
    }

    #[test]
    fn negative_alpha_rejected() {
        let table = KendallClosedForm::new(3).unwrap();
        let data = vec![r(&[1, 2, 3])];
        let mut state = ChainState::new(1e-4, r(&[1, 2, 3]));
        let mut rng = stream_rng(3, 0);
        for _ in 0..2000 {
            mh_step_alpha(&mut state, &data, Metric::Kendall, &table, 0.1, 1.0, &mut rng).unwrap();
            assert!(state.alpha >= 0.0);
        }
    }

    #[test]
    fn range_rejections_counted() {
        let table =
            crate::partition::LogPartitionTable::closed_form(4, &crate::partition::alpha_grid(0.5, 1.0, 12)).unwrap();
        let data = vec![r(&[1, 2, 3, 4])];
        let mut state = ChainState::new(0.75, r(&[1, 2, 3, 4]));
        let mut rng = stream_rng(4, 0);
        for _ in 0..500 {
            mh_step_alpha(&mut state, &data, Metric::Kendall, &table, 0.1, 1.0, &mut rng).unwrap();
            assert!((0.5..=1.0).contains(&state.alpha));
        }
        assert!(state.stats.alpha_range_rejections > 100);
    }

    #[test]
    fn tuning_validation() {
        let mut t = Tuning::default_for(Metric::Footrule);
        assert!(t.validate(20).is_ok());
        t.leap = 11;
        assert!(t.validate(20).is_err());
        t.leap = 10;
        assert!(t.validate(20).is_ok());
        t.burn_in = t.iterations;
        assert!(t.validate(20).is_err());
        let t = Tuning { iterations: 105, burn_in: 5, thinning: 10, ..Tuning::default_for(Metric::Kendall) };
        assert_eq!(t.retained(), 10);
        assert!(Priors::new(0.0).is_err());
        assert_eq!(Priors::default_for(Metric::Spearman, 20).lambda, 1.0);
    }

    #[test]
    fn single_datum_mode_is_datum() {
        let datum = r(&[2, 4, 1, 3, 5]);
        let table = KendallClosedForm::new(5).unwrap();
        let tuning = Tuning {
            iterations: 20_000,
            burn_in: 2_000,
            thinning: 5,
            sigma_alpha: 0.5,
            alpha_init: 5.0,
            ..Tuning::default_for(Metric::Kendall)
        };
        let s = run_chain(std::slice::from_ref(&datum), Metric::Kendall, &Priors::new(0.1).unwrap(), &tuning, &table)
            .unwrap();
        assert_eq!(s.len(), tuning.retained());
        assert_eq!(s.posterior_mode().unwrap(), datum);
    }

    #[test]
    fn chain_is_deterministic() {
        let table = KendallClosedForm::new(4).unwrap();
        let data = vec![r(&[1, 2, 3, 4]), r(&[2, 1, 3, 4])];
        let tuning = Tuning { iterations: 3000, burn_in: 100, thinning: 7, ..Tuning::default_for(Metric::Kendall) };
        let a = run_chain(&data, Metric::Kendall, &Priors::new(0.1).unwrap(), &tuning, &table).unwrap();
        let b = run_chain(&data, Metric::Kendall, &Priors::new(0.1).unwrap(), &tuning, &table).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_data_rejected() {
        let table = KendallClosedForm::new(4).unwrap();
        let data = vec![r(&[1, 2, 3])];
        let tuning = Tuning { iterations: 10, burn_in: 1, thinning: 1, ..Tuning::default_for(Metric::Kendall) };
        assert!(matches!(
            run_chain(&data, Metric::Kendall, &Priors::new(0.1).unwrap(), &tuning, &table),
            Err(SamplerError::DataSize { .. })
        ));
        assert!(matches!(
            run_chain(&[], Metric::Footrule, &Priors::new(0.1).unwrap(), &tuning, &table),
            Err(SamplerError::Partition(PartitionError::MetricMismatch { .. }))
        ));
    }

    #[test]
    fn perturbation_basics() {
        let truth = r(&[1, 2, 3, 4, 5, 6]);
        let same = generate_by_perturbation(&truth, 4, 0, 1, 9);
        assert!(same.iter().all(|x| *x == truth));
        let moved = generate_by_perturbation(&truth, 50, 10, 2, 9);
        assert!(moved.iter().all(|x| Ranking::new(x.ranks().to_vec()).is_ok()));
    }
}
