//! Data augmentation for incomplete rankings.
//!
//! Three kinds of incomplete data are handled by imputing a full latent
//! ranking per assessor and updating it inside the MCMC loop:
//!
//! * partial rankings (top-t lists or ranks missing at random),
//! * pairwise preferences, closed under transitivity,
//! * weak orderings with ties.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::accept;
use crate::partition::LogPartition;
use crate::rank::{is_consistent, rank_bounds, Metric, PreferenceConstraintSet, Ranking};
use crate::rng::{stream_rng, substream, ChainRng};
use crate::sampler::{
    check_initial_alpha, shift, AcceptanceStats, ChainState, PosteriorSamples, Priors, SamplerError, Tuning,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AugmentError {
    #[error("rank {rank} is out of range for {n} items")]
    RankOutOfRange { rank: usize, n: usize },
    #[error("rank {0} is observed more than once")]
    DuplicateRank(usize),
    #[error("tie groups do not partition the {0} items")]
    BadTieGroups(usize),
    #[error("current ranking violates the assessor's preferences")]
    Inconsistent,
    #[error("preferences mention item {item} but there are only {n} items")]
    ItemOutOfRange { item: usize, n: usize },
    #[error("expected {expected} items, found {found}")]
    SizeMismatch { expected: usize, found: usize },
}

/// A rank vector in which some entries may be missing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialRanking {
    entries: Vec<Option<usize>>,
}

impl PartialRanking {
    pub fn new(entries: Vec<Option<usize>>) -> Result<Self, AugmentError> {
        let n = entries.len();
        let mut seen = vec![false; n + 1];
        for &rank in entries.iter().flatten() {
            if rank == 0 || rank > n {
                return Err(AugmentError::RankOutOfRange { rank, n });
            }
            if std::mem::replace(&mut seen[rank], true) {
                return Err(AugmentError::DuplicateRank(rank));
            }
        }
        Ok(Self { entries })
    }

    pub fn complete(ranking: &Ranking) -> Self {
        Self { entries: ranking.ranks().iter().map(|&r| Some(r)).collect() }
    }

    /// Keeps only the ranks `1..=t` of `ranking`.
    pub fn top_t(ranking: &Ranking, t: usize) -> Self {
        Self { entries: ranking.ranks().iter().map(|&r| (r <= t).then_some(r)).collect() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Option<usize>] {
        &self.entries
    }

    pub fn observed_items(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.entries[i].is_some()).collect()
    }

    pub fn missing_items(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.entries[i].is_none()).collect()
    }

    /// Ranks not used by any observed item, in increasing order.
    pub fn unused_ranks(&self) -> Vec<usize> {
        let mut used = vec![false; self.len() + 1];
        for &r in self.entries.iter().flatten() {
            used[r] = true;
        }
        (1..=self.len()).filter(|&r| !used[r]).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(Option::is_some)
    }

    /// True iff `ranking` agrees with every observed rank.
    pub fn admits(&self, ranking: &Ranking) -> bool {
        ranking.len() == self.len() && self.entries.iter().zip(ranking.ranks()).all(|(e, &r)| e.is_none_or(|x| x == r))
    }
}

/// Weak ordering: groups of tied items, best group first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieSet {
    groups: Vec<Vec<usize>>,
    n: usize,
}

impl TieSet {
    pub fn new(groups: Vec<Vec<usize>>, n: usize) -> Result<Self, AugmentError> {
        let mut seen = vec![false; n];
        for &i in groups.iter().flatten() {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(AugmentError::BadTieGroups(n));
            }
        }
        if seen.iter().any(|s| !s) || groups.iter().any(Vec::is_empty) {
            return Err(AugmentError::BadTieGroups(n));
        }
        Ok(Self { groups, n })
    }

    /// Groups items sharing a score; smaller values rank first. Any numeric
    /// coding works (`1 1 3`, `1 1 2`, ...).
    pub fn from_rank_values(values: &[usize]) -> Result<Self, AugmentError> {
        let mut distinct: Vec<usize> = values.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let groups = distinct.iter().map(|&v| (0..values.len()).filter(|&i| values[i] == v).collect()).collect();
        Self::new(groups, values.len())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn has_ties(&self) -> bool {
        self.groups.iter().any(|g| g.len() > 1)
    }

    /// True iff every item of group `g` outranks every item of group `g + 1`.
    pub fn admits(&self, ranking: &Ranking) -> bool {
        if ranking.len() != self.n {
            return false;
        }
        let mut next = 1;
        self.groups.iter().all(|g| {
            let lo = next;
            next += g.len();
            g.iter().all(|&i| (lo..next).contains(&ranking.rank(i)))
        })
    }
}

/// Observed data for one assessor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssessorData {
    Partial(PartialRanking),
    Preferences(PreferenceConstraintSet),
    Ties(TieSet),
}

impl AssessorData {
    pub fn complete(ranking: &Ranking) -> Self {
        Self::Partial(PartialRanking::complete(ranking))
    }

    pub fn validate(&self, n: usize) -> Result<(), AugmentError> {
        match self {
            Self::Partial(p) if p.len() != n => Err(AugmentError::SizeMismatch { expected: n, found: p.len() }),
            Self::Ties(t) if t.len() != n => Err(AugmentError::SizeMismatch { expected: n, found: t.len() }),
            Self::Preferences(c) => match c.max_item() {
                Some(item) if item >= n => Err(AugmentError::ItemOutOfRange { item, n }),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// True iff `ranking` is compatible with the data.
    pub fn admits(&self, ranking: &Ranking) -> bool {
        match self {
            Self::Partial(p) => p.admits(ranking),
            Self::Preferences(c) => is_consistent(ranking, c),
            Self::Ties(t) => t.admits(ranking),
        }
    }

    /// A random compatible ranking to start from.
    pub fn initial<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Ranking {
        match self {
            Self::Partial(p) => init_fill_in(p, rng),
            Self::Preferences(c) => init_consistent(c, n, rng),
            Self::Ties(t) => resample_ties(t, rng),
        }
    }
}

/// Observed ranks kept; missing items get a random permutation of the
/// unused ranks.
pub fn init_fill_in<R: Rng + ?Sized>(partial: &PartialRanking, rng: &mut R) -> Ranking {
    let mut free = partial.unused_ranks();
    free.shuffle(rng);
    let mut free = free.into_iter();
    let ranks = partial
        .entries
        .iter()
        .map(|e| e.unwrap_or_else(|| free.next().expect("one free rank per missing item")))
        .collect();
    Ranking::from_vec_unchecked(ranks)
}

/// Metropolis-Hastings update of an augmented partial ranking with a
/// proposal drawn uniformly from all compatible fill-ins.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_augment_partial<R: Rng + ?Sized>(
    current: &Ranking,
    partial: &PartialRanking,
    alpha: f64,
    rho: &Ranking,
    metric: Metric,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> Ranking {
    let proposal = init_fill_in(partial, rng);
    mh_choose(current, proposal, alpha, rho, metric, stats, rng)
}

fn mh_choose<R: Rng + ?Sized>(
    current: &Ranking,
    proposal: Ranking,
    alpha: f64,
    rho: &Ranking,
    metric: Metric,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> Ranking {
    stats.augment_proposed += 1;
    let n = rho.len() as f64;
    let delta = metric.distance_raw(proposal.ranks(), rho.ranks()) as f64
        - metric.distance_raw(current.ranks(), rho.ranks()) as f64;
    if accept(-(alpha / n) * delta, rng) {
        stats.augment_accepted += 1;
        proposal
    } else {
        current.clone()
    }
}

/// Leap step restricted to ranks compatible with `constraints`, followed by
/// the usual shift.
///
/// A constrained item moves uniformly within its rank bounds (its current
/// rank included); an unconstrained item moves uniformly over all ranks.
pub fn constrained_leap<R: Rng + ?Sized>(
    current: &Ranking,
    constraints: &PreferenceConstraintSet,
    rng: &mut R,
) -> Result<Ranking, AugmentError> {
    if !is_consistent(current, constraints) {
        return Err(AugmentError::Inconsistent);
    }
    let n = current.len();
    let item = rng.random_range(0..n);
    let (lo, hi) = if constraints.constrained_items().contains(&item) {
        let (l, r) = rank_bounds(constraints, current, item);
        (l + 1, r - 1)
    } else {
        (1, n)
    };
    let new_rank = rng.random_range(lo..=hi);
    Ok(shift(current, item, new_rank))
}

/// Metropolis-Hastings update of an augmented ranking under pairwise
/// preferences, using [`constrained_leap`] as the proposal.
#[allow(clippy::too_many_arguments)]
pub fn mh_augment_preferences<R: Rng + ?Sized>(
    current: &Ranking,
    constraints: &PreferenceConstraintSet,
    alpha: f64,
    rho: &Ranking,
    metric: Metric,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> Result<Ranking, AugmentError> {
    let proposal = constrained_leap(current, constraints, rng)?;
    Ok(mh_choose(current, proposal, alpha, rho, metric, stats, rng))
}

/// Random ranking consistent with `constraints` (randomized topological sort).
pub fn init_consistent<R: Rng + ?Sized>(constraints: &PreferenceConstraintSet, n: usize, rng: &mut R) -> Ranking {
    let mut pending: Vec<usize> = (0..n).map(|i| constraints.preferred_to(i).len()).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !ready.is_empty() {
        let pick = ready.swap_remove(rng.random_range(0..ready.len()));
        order.push(pick);
        for &below in constraints.dominated_by(pick) {
            pending[below] -= 1;
            if pending[below] == 0 {
                ready.push(below);
            }
        }
    }
    Ranking::from_ordering(&order).expect("closed acyclic constraints yield a full order")
}

/// Random complete ranking compatible with `ties`: each group gets a uniform
/// permutation of its block of ranks.
pub fn resample_ties<R: Rng + ?Sized>(ties: &TieSet, rng: &mut R) -> Ranking {
    let mut ranks = vec![0; ties.n];
    let mut next = 1;
    for group in &ties.groups {
        let mut block: Vec<usize> = (next..next + group.len()).collect();
        block.shuffle(rng);
        for (&item, r) in group.iter().zip(block) {
            ranks[item] = r;
        }
        next += group.len();
    }
    Ranking::from_vec_unchecked(ranks)
}

/// Scheduling of augmentation updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentOptions {
    /// Run an augmentation sweep every `aug_frequency` iterations.
    pub aug_frequency: usize,
    /// Propose new tie resolutions every `tie_interval` iterations.
    pub tie_interval: usize,
    /// Keep the augmented rankings of every retained iteration.
    pub record_augmented: bool,
    /// Assert that every augmented ranking satisfies its data after each sweep.
    pub check_constraints: bool,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self { aug_frequency: 1, tie_interval: 10, record_augmented: false, check_constraints: cfg!(debug_assertions) }
    }
}

impl AugmentOptions {
    pub(crate) fn validate(&self) -> Result<(), SamplerError> {
        if self.aug_frequency == 0 || self.tie_interval == 0 {
            return Err(SamplerError::Tuning("aug_frequency and tie_interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Latent full rankings for a set of assessors, each with its own random
/// stream so that sweeps can run in parallel.
#[derive(Debug, Clone)]
pub(crate) struct Augmented {
    pub rankings: Vec<Ranking>,
    rngs: Vec<ChainRng>,
}

impl Augmented {
    /// Starting rankings; assessor `j` uses stream `(1, j)` of `seed`.
    pub fn init(data: &[AssessorData], n: usize, seed: u64) -> Result<Self, SamplerError> {
        let mut rngs: Vec<ChainRng> = (0..data.len()).map(|j| stream_rng(seed, substream(1, j as u32))).collect();
        let mut rankings = Vec::with_capacity(data.len());
        for (index, (d, rng)) in data.iter().zip(&mut rngs).enumerate() {
            d.validate(n).map_err(|e| SamplerError::Data { index, message: e.to_string() })?;
            rankings.push(d.initial(n, rng));
        }
        Ok(Self { rankings, rngs })
    }

    /// One sweep over all assessors. `params(j)` gives the `(alpha, rho)`
    /// that assessor `j` is currently attached to.
    pub fn sweep<'a, F>(
        &mut self,
        data: &[AssessorData],
        iteration: usize,
        options: &AugmentOptions,
        metric: Metric,
        params: F,
        stats: &mut AcceptanceStats,
    ) where
        F: Fn(usize) -> (f64, &'a Ranking) + Sync,
    {
        let local: Vec<AcceptanceStats> = self
            .rankings
            .par_iter_mut()
            .zip(self.rngs.par_iter_mut())
            .zip(data.par_iter())
            .enumerate()
            .map(|(j, ((current, rng), d))| {
                let mut s = AcceptanceStats::default();
                let (alpha, rho) = params(j);
                *current = match d {
                    AssessorData::Partial(p) if p.is_complete() => return s,
                    AssessorData::Partial(p) => gibbs_augment_partial(current, p, alpha, rho, metric, &mut s, rng),
                    AssessorData::Preferences(c) => mh_augment_preferences(current, c, alpha, rho, metric, &mut s, rng)
                        .expect("augmented rankings stay consistent"),
                    AssessorData::Ties(t) if !t.has_ties() || !iteration.is_multiple_of(options.tie_interval) => {
                        return s
                    }
                    AssessorData::Ties(t) => {
                        let proposal = resample_ties(t, rng);
                        mh_choose(current, proposal, alpha, rho, metric, &mut s, rng)
                    }
                };
                if options.check_constraints {
                    assert!(d.admits(current), "assessor {j}: augmented ranking {current} violates its data");
                }
                s
            })
            .collect();
        for s in &local {
            stats.merge(s);
        }
    }
}

/// Runs the sampler on incomplete data, alternating augmentation sweeps with
/// updates of `rho` and `alpha` on the augmented rankings.
pub fn run_chain_partial(
    data: &[AssessorData],
    metric: Metric,
    priors: &Priors,
    tuning: &Tuning,
    table: &dyn LogPartition,
    options: &AugmentOptions,
) -> Result<PosteriorSamples, SamplerError> {
    let n = table.n();
    table.check(n, metric)?;
    priors.validate()?;
    tuning.validate(n)?;
    options.validate()?;
    check_initial_alpha(tuning.alpha_init, data.len(), table)?;

    let mut rng = stream_rng(tuning.seed, 0);
    let mut state = ChainState::new(tuning.alpha_init, Ranking::random(n, &mut rng));
    let mut aug = Augmented::init(data, n, tuning.seed)?;
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
        if it % options.aug_frequency == 0 {
            let (alpha, rho) = (state.alpha, state.rho.clone());
            aug.sweep(data, it, options, metric, |_| (alpha, &rho), &mut state.stats);
        }
        crate::sampler::mh_step_rho(&mut state, &aug.rankings, metric, tuning.leap, tuning.correction, &mut rng);
        crate::sampler::mh_step_alpha(
            &mut state,
            &aug.rankings,
            metric,
            table,
            priors.lambda,
            tuning.sigma_alpha,
            &mut rng,
        )?;
        if tuning.keep(it) {
            out.iterations.push(it);
            out.alpha.push(state.alpha);
            out.rho.push(state.rho.clone());
            if options.record_augmented {
                out.augmented.push(aug.rankings.clone());
            }
        }
    }
    state.stats.warn_on_range();
    out.stats = state.stats;
    Ok(out)
}
