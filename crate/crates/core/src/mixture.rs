//! Finite mixtures of Mallows models and supervised classification.
//!
//! Each cluster `c` has its own consensus `rho_c` and scale `alpha_c`.
//! Cluster weights get a symmetric Dirichlet prior and the scales are kept
//! ordered, `alpha_1 < ... < alpha_C`, which makes the clusters identifiable.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Uniform};
use serde::{Deserialize, Serialize};

use crate::augment::{AssessorData, AugmentOptions, Augmented};
use crate::numeric::{accept, log_sum_exp, sample_weighted, softmax};
use crate::partition::{LogPartition, PartitionError};
use crate::rank::{Metric, Ranking};
use crate::rng::stream_rng;
use crate::sampler::{
    check_initial_alpha, most_frequent, rho_update, scale_update, AcceptanceStats, ProposalCorrection, SamplerError,
    Tuning,
};

/// Below this, `alpha_2` is too small for the scaled Beta proposal of `alpha_1`.
const MIN_BETA_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixturePriors {
    /// Exponential rate shared by every `alpha_c`.
    pub lambda: f64,
    /// Symmetric Dirichlet concentration for the cluster weights.
    pub psi: f64,
    pub clusters: usize,
}

impl MixturePriors {
    pub fn new(lambda: f64, psi: f64, clusters: usize) -> Result<Self, SamplerError> {
        let p = Self { lambda, psi, clusters };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SamplerError::Prior(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.psi > 0.0 && self.psi.is_finite()) {
            return Err(SamplerError::Prior(format!("psi must be positive, got {}", self.psi)));
        }
        if self.clusters == 0 {
            return Err(SamplerError::Prior("at least one cluster is required".into()));
        }
        Ok(())
    }
}

/// Acceptance rule for the ordered scale proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaProposalMode {
    /// Target ratio only, as if the proposals were symmetric.
    #[default]
    AsPublished,
    /// Adds the proposal-density ratio for the Beta and shifted-uniform moves.
    Corrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    pub rho: Vec<Ranking>,
    pub alpha: Vec<f64>,
    pub tau: Vec<f64>,
    pub z: Vec<usize>,
    pub counts: Vec<usize>,
}

impl MixtureState {
    pub fn clusters(&self) -> usize {
        self.rho.len()
    }

    pub(crate) fn recount(&mut self) {
        self.counts = label_counts(&self.z, self.clusters());
    }

    /// Panics if the ordering, simplex or count invariants are broken.
    pub fn assert_invariants(&self) {
        assert!(self.alpha.windows(2).all(|w| w[0] < w[1]), "alpha not ordered: {:?}", self.alpha);
        assert!(self.alpha.iter().all(|&a| a >= 0.0));
        assert!(self.tau.iter().all(|&t| t >= 0.0));
        assert!((self.tau.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(self.counts, label_counts(&self.z, self.clusters()));
    }
}

pub(crate) fn label_counts(z: &[usize], clusters: usize) -> Vec<usize> {
    let mut counts = vec![0; clusters];
    for &c in z {
        counts[c] += 1;
    }
    counts
}

/// Draw from `Dirichlet(psi + n_1, ..., psi + n_C)` via normalized gammas.
pub fn gibbs_tau<R: Rng + ?Sized>(counts: &[usize], psi: f64, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> =
        counts.iter().map(|&c| Gamma::new(psi + c as f64, 1.0).expect("positive shape").sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|d| d / total).collect()
}

/// Unnormalized log probabilities of each cluster for one ranking:
/// `log tau_c - log Z(alpha_c) - (alpha_c / n) d(R, rho_c)`.
pub fn cluster_log_weights(
    ranking: &Ranking,
    tau: &[f64],
    rho: &[Ranking],
    alpha: &[f64],
    metric: Metric,
    table: &dyn LogPartition,
) -> Result<Vec<f64>, PartitionError> {
    let n = ranking.len() as f64;
    (0..tau.len())
        .map(|c| {
            if tau[c] <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let d = metric.distance_raw(ranking.ranks(), rho[c].ranks()) as f64;
            Ok(tau[c].ln() - table.log_z(alpha[c])? - alpha[c] / n * d)
        })
        .collect()
}

/// Normalized cluster membership probabilities for one ranking.
pub fn cluster_probabilities(
    ranking: &Ranking,
    tau: &[f64],
    rho: &[Ranking],
    alpha: &[f64],
    metric: Metric,
    table: &dyn LogPartition,
) -> Result<Vec<f64>, PartitionError> {
    Ok(softmax(&cluster_log_weights(ranking, tau, rho, alpha, metric, table)?))
}

/// Gibbs draw of one assessor's cluster label.
pub fn gibbs_z<R: Rng + ?Sized>(
    ranking: &Ranking,
    tau: &[f64],
    rho: &[Ranking],
    alpha: &[f64],
    metric: Metric,
    table: &dyn LogPartition,
    rng: &mut R,
) -> Result<usize, PartitionError> {
    let weights = cluster_log_weights(ranking, tau, rho, alpha, metric, table)?;
    let lse = log_sum_exp(&weights);
    let probs: Vec<f64> = weights.iter().map(|w| (w - lse).exp()).collect();
    let total = probs.iter().sum();
    Ok(sample_weighted(&probs, total, rng))
}

/// Leap-and-shift update of `rho_c` against the rankings assigned to `c`.
#[allow(clippy::too_many_arguments)]
pub fn mh_rho_cluster<R: Rng + ?Sized>(
    c: usize,
    state: &mut MixtureState,
    data: &[Ranking],
    metric: Metric,
    leap: usize,
    correction: ProposalCorrection,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> bool {
    let z = &state.z;
    let members = data.iter().zip(z).filter(|&(_, &zj)| zj == c).map(|(r, _)| r);
    rho_update(&mut state.rho[c], state.alpha[c], members, metric, leap, correction, stats, rng)
}

/// `log Beta(5, 2)` density.
fn ln_beta52(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    30f64.ln() + 4.0 * x.ln() + (1.0 - x).ln()
}

/// Update of `alpha_c` with the ordered proposals:
///
/// * one cluster: Gaussian random walk,
/// * first of several: `alpha_2 * Beta(5, 2)`,
/// * interior: uniform between the neighbours,
/// * last: uniform on `(alpha_{C-1}, alpha_C + 1)`.
#[allow(clippy::too_many_arguments)]
pub fn mh_alpha_cluster<R: Rng + ?Sized>(
    c: usize,
    state: &mut MixtureState,
    data: &[Ranking],
    metric: Metric,
    lambda: f64,
    sigma_alpha: f64,
    mode: AlphaProposalMode,
    table: &dyn LogPartition,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) -> Result<bool, PartitionError> {
    let n = state.rho[c].len();
    let count = state.counts[c];
    let distance: f64 = data
        .iter()
        .zip(&state.z)
        .filter(|&(_, &zj)| zj == c)
        .map(|(r, _)| metric.distance_raw(r.ranks(), state.rho[c].ranks()) as f64)
        .sum();
    let clusters = state.clusters();
    let current = state.alpha[c];
    if clusters == 1 {
        let next = scale_update(current, n, count, distance, lambda, sigma_alpha, table, |_| 0.0, stats, rng)?;
        state.alpha[c] = next;
        return Ok(next != current);
    }

    stats.alpha_proposed += 1;
    let (proposal, log_q_ratio) = if c == 0 {
        let scale = state.alpha[1];
        if scale <= MIN_BETA_SCALE {
            stats.alpha_degenerate += 1;
            return Ok(false);
        }
        let x = Beta::new(5.0, 2.0).expect("valid shape").sample(rng);
        let proposal = scale * x;
        (proposal, ln_beta52(current / scale) - ln_beta52(x))
    } else if c + 1 < clusters {
        let (lo, hi) = (state.alpha[c - 1], state.alpha[c + 1]);
        (Uniform::new(lo, hi).expect("ordered neighbours").sample(rng), 0.0)
    } else {
        let lo = state.alpha[c - 1];
        let proposal = Uniform::new(lo, current + 1.0).expect("ordered neighbours").sample(rng);
        // reverse move needs current < proposal + 1
        let reverse = if current < proposal + 1.0 { -(proposal + 1.0 - lo).ln() } else { f64::NEG_INFINITY };
        (proposal, reverse + (current + 1.0 - lo).ln())
    };
    // strict ordering can fail only through floating-point ties at the support edges
    let lower_ok = c == 0 || proposal > state.alpha[c - 1];
    let upper_ok = c + 1 == clusters || proposal < state.alpha[c + 1];
    if !(proposal > 0.0 && lower_ok && upper_ok) {
        return Ok(false);
    }
    let mut log_ratio = -lambda * (proposal - current) - (proposal - current) / n as f64 * distance;
    if count > 0 {
        let new_z = match table.log_z(proposal) {
            Ok(z) => z,
            Err(PartitionError::OutOfRange { .. }) => {
                stats.alpha_range_rejections += 1;
                return Ok(false);
            }
            Err(e) => return Err(e),
        };
        log_ratio -= count as f64 * (new_z - table.log_z(current)?);
    }
    if mode == AlphaProposalMode::Corrected {
        log_ratio += log_q_ratio;
    }
    if accept(log_ratio, rng) {
        state.alpha[c] = proposal;
        stats.alpha_accepted += 1;
        Ok(true)
    } else {
        Ok(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MixtureOptions {
    pub alpha_mode: AlphaProposalMode,
    pub augment: AugmentOptions,
    /// Assert the state invariants after every sweep.
    pub check_invariants: bool,
}

/// Thinned draws from a mixture chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSamples {
    pub n: usize,
    pub metric: Metric,
    pub priors: MixturePriors,
    pub tuning: Tuning,
    pub iterations: Vec<usize>,
    pub alpha: Vec<Vec<f64>>,
    pub rho: Vec<Vec<Ranking>>,
    pub tau: Vec<Vec<f64>>,
    pub z: Vec<Vec<usize>>,
    pub augmented: Vec<Vec<Ranking>>,
    pub stats: AcceptanceStats,
}

impl MixtureSamples {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn clusters(&self) -> usize {
        self.priors.clusters
    }

    /// Most frequent `rho_c` per cluster.
    pub fn map_centers(&self) -> Vec<Ranking> {
        (0..self.clusters())
            .map(|c| {
                let draws: Vec<Ranking> = self.rho.iter().map(|r| r[c].clone()).collect();
                most_frequent(&draws).expect("at least one draw")
            })
            .collect()
    }

    /// Fraction of draws placing each assessor in each cluster.
    pub fn label_frequencies(&self) -> Vec<Vec<f64>> {
        let assessors = self.z.first().map_or(0, Vec::len);
        let mut freq = vec![vec![0.0; self.clusters()]; assessors];
        for draw in &self.z {
            for (j, &c) in draw.iter().enumerate() {
                freq[j][c] += 1.0;
            }
        }
        let total = self.z.len().max(1) as f64;
        freq.iter_mut().flatten().for_each(|f| *f /= total);
        freq
    }

    /// Most frequent label per assessor; ties go to the lower cluster index.
    pub fn map_labels(&self) -> Vec<usize> {
        self.label_frequencies()
            .iter()
            .map(|f| {
                let mut best = 0;
                for (c, &p) in f.iter().enumerate() {
                    if p > f[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// Starting point: ordered scales around `alpha_init`, centres drawn from
/// distinct assessors' starting rankings, uniform weights, labels by nearest
/// centre.
fn initial_state<R: Rng + ?Sized>(
    rankings: &[Ranking],
    clusters: usize,
    n: usize,
    alpha_init: f64,
    metric: Metric,
    rng: &mut R,
) -> MixtureState {
    let alpha = (0..clusters).map(|c| alpha_init * (c + 1) as f64 / clusters as f64).collect();
    let rho: Vec<Ranking> = if rankings.len() >= clusters {
        sample(rng, rankings.len(), clusters).iter().map(|j| rankings[j].clone()).collect()
    } else {
        (0..clusters).map(|_| Ranking::random(n, rng)).collect()
    };
    let z: Vec<usize> = rankings
        .iter()
        .map(|r| {
            (0..clusters).min_by_key(|&c| metric.distance_raw(r.ranks(), rho[c].ranks())).expect("at least one cluster")
        })
        .collect();
    let counts = label_counts(&z, clusters);
    MixtureState { rho, alpha, tau: vec![1.0 / clusters as f64; clusters], z, counts }
}

/// Runs the mixture sampler. Incomplete data is augmented using the
/// parameters of each assessor's current cluster.
pub fn run_mixture_chain(
    data: &[AssessorData],
    metric: Metric,
    priors: &MixturePriors,
    tuning: &Tuning,
    table: &dyn LogPartition,
    options: &MixtureOptions,
) -> Result<MixtureSamples, SamplerError> {
    let n = table.n();
    table.check(n, metric)?;
    priors.validate()?;
    tuning.validate(n)?;
    options.augment.validate()?;
    let clusters = priors.clusters;

    let mut rng = stream_rng(tuning.seed, 0);
    let mut aug = Augmented::init(data, n, tuning.seed)?;
    let mut state = initial_state(&aug.rankings, clusters, n, tuning.alpha_init, metric, &mut rng);
    for &a in &state.alpha {
        check_initial_alpha(a, data.len(), table)?;
    }
    let mut stats = AcceptanceStats::default();
    let mut out = MixtureSamples {
        n,
        metric,
        priors: *priors,
        tuning: tuning.clone(),
        iterations: Vec::new(),
        alpha: Vec::new(),
        rho: Vec::new(),
        tau: Vec::new(),
        z: Vec::new(),
        augmented: Vec::new(),
        stats: AcceptanceStats::default(),
    };
    for it in 1..=tuning.iterations {
        if it % options.augment.aug_frequency == 0 {
            let (alpha, rho, z) = (&state.alpha, &state.rho, &state.z);
            aug.sweep(data, it, &options.augment, metric, |j| (alpha[z[j]], &rho[z[j]]), &mut stats);
        }
        for c in 0..clusters {
            mh_rho_cluster(c, &mut state, &aug.rankings, metric, tuning.leap, tuning.correction, &mut stats, &mut rng);
            mh_alpha_cluster(
                c,
                &mut state,
                &aug.rankings,
                metric,
                priors.lambda,
                tuning.sigma_alpha,
                options.alpha_mode,
                table,
                &mut stats,
                &mut rng,
            )?;
        }
        state.tau = gibbs_tau(&state.counts, priors.psi, &mut rng);
        for (j, r) in aug.rankings.iter().enumerate() {
            state.z[j] = gibbs_z(r, &state.tau, &state.rho, &state.alpha, metric, table, &mut rng)?;
        }
        state.recount();
        if options.check_invariants {
            state.assert_invariants();
        }
        if tuning.keep(it) {
            out.iterations.push(it);
            out.alpha.push(state.alpha.clone());
            out.rho.push(state.rho.clone());
            out.tau.push(state.tau.clone());
            out.z.push(state.z.clone());
            if options.augment.record_augmented {
                out.augmented.push(aug.rankings.clone());
            }
        }
    }
    stats.warn_on_range();
    out.stats = stats;
    Ok(out)
}

/// Per-draw within-cluster sum of squared distances,
/// `sum_c sum_{j: z_j = c} d(R_j, rho_c)^2`.
///
/// Uses the recorded augmented rankings when present, `data` otherwise.
pub fn within_cluster_ss(samples: &MixtureSamples, data: &[Ranking]) -> Vec<f64> {
    (0..samples.len())
        .map(|s| {
            let rankings = samples.augmented.get(s).map_or(data, Vec::as_slice);
            rankings
                .iter()
                .zip(&samples.z[s])
                .map(|(r, &c)| {
                    let d = samples.metric.distance_raw(r.ranks(), samples.rho[s][c].ranks()) as f64;
                    d * d
                })
                .sum()
        })
        .collect()
}

/// Elbow of a decreasing curve: the interior point with the largest second
/// difference. `values[i]` belongs to `keys[i]`.
pub fn elbow(keys: &[usize], values: &[f64]) -> Option<usize> {
    if keys.len() != values.len() || values.len() < 3 {
        return None;
    }
    (1..values.len() - 1)
        .map(|i| (i, values[i - 1] - 2.0 * values[i] + values[i + 1]))
        .fold(None, |best: Option<(usize, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
        .map(|(i, _)| keys[i])
}

/// Median of a sample (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// How class scales are modelled in [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassAlpha {
    /// One scale shared by every class.
    #[default]
    Shared,
    /// An unconstrained scale per class.
    PerClass,
}

/// Posterior class probabilities for the test assessors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Rao-Blackwellized class probabilities, one row per test assessor.
    pub probabilities: Vec<Vec<f64>>,
    /// Highest-probability class per test assessor.
    pub map: Vec<usize>,
    pub stats: AcceptanceStats,
}

/// Supervised classification: labels are fixed for the training assessors
/// and sampled for the test assessors.
#[allow(clippy::too_many_arguments)]
pub fn classify(
    train: &[AssessorData],
    labels: &[usize],
    test: &[AssessorData],
    classes: usize,
    metric: Metric,
    priors: &MixturePriors,
    tuning: &Tuning,
    table: &dyn LogPartition,
    alpha_model: ClassAlpha,
    augment: &AugmentOptions,
) -> Result<Classification, SamplerError> {
    let n = table.n();
    table.check(n, metric)?;
    priors.validate()?;
    tuning.validate(n)?;
    augment.validate()?;
    if labels.len() != train.len() {
        return Err(SamplerError::Data {
            index: labels.len().min(train.len()),
            message: format!("{} labels for {} training assessors", labels.len(), train.len()),
        });
    }
    if let Some(index) = labels.iter().position(|&l| l >= classes) {
        return Err(SamplerError::Data {
            index,
            message: format!("label {} exceeds {classes} classes", labels[index]),
        });
    }
    check_initial_alpha(tuning.alpha_init, train.len() + test.len(), table)?;

    let all: Vec<AssessorData> = train.iter().chain(test).cloned().collect();
    let n_train = train.len();
    let mut rng = stream_rng(tuning.seed, 0);
    let mut aug = Augmented::init(&all, n, tuning.seed)?;
    let mut z: Vec<usize> = labels.to_vec();
    z.extend(std::iter::repeat_n(0, test.len()));
    let mut state = MixtureState {
        rho: (0..classes).map(|_| Ranking::random(n, &mut rng)).collect(),
        alpha: vec![tuning.alpha_init; classes],
        tau: vec![1.0 / classes as f64; classes],
        counts: label_counts(&z, classes),
        z,
    };
    for j in n_train..all.len() {
        state.z[j] = rng.random_range(0..classes);
    }
    state.recount();

    let mut stats = AcceptanceStats::default();
    let mut sums = vec![vec![0.0; classes]; test.len()];
    let mut kept = 0usize;
    for it in 1..=tuning.iterations {
        if it % augment.aug_frequency == 0 {
            let (alpha, rho, z) = (&state.alpha, &state.rho, &state.z);
            aug.sweep(&all, it, augment, metric, |j| (alpha[z[j]], &rho[z[j]]), &mut stats);
        }
        for c in 0..classes {
            mh_rho_cluster(c, &mut state, &aug.rankings, metric, tuning.leap, tuning.correction, &mut stats, &mut rng);
        }
        match alpha_model {
            ClassAlpha::Shared => {
                let distance: f64 = aug
                    .rankings
                    .iter()
                    .zip(&state.z)
                    .map(|(r, &c)| metric.distance_raw(r.ranks(), state.rho[c].ranks()) as f64)
                    .sum();
                let next = scale_update(
                    state.alpha[0],
                    n,
                    all.len(),
                    distance,
                    priors.lambda,
                    tuning.sigma_alpha,
                    table,
                    |_| 0.0,
                    &mut stats,
                    &mut rng,
                )?;
                state.alpha.iter_mut().for_each(|a| *a = next);
            }
            ClassAlpha::PerClass => {
                for c in 0..classes {
                    let distance: f64 = aug
                        .rankings
                        .iter()
                        .zip(&state.z)
                        .filter(|&(_, &zj)| zj == c)
                        .map(|(r, _)| metric.distance_raw(r.ranks(), state.rho[c].ranks()) as f64)
                        .sum();
                    state.alpha[c] = scale_update(
                        state.alpha[c],
                        n,
                        state.counts[c],
                        distance,
                        priors.lambda,
                        tuning.sigma_alpha,
                        table,
                        |_| 0.0,
                        &mut stats,
                        &mut rng,
                    )?;
                }
            }
        }
        state.tau = gibbs_tau(&state.counts, priors.psi, &mut rng);
        let keep = tuning.keep(it);
        for j in n_train..all.len() {
            let r = &aug.rankings[j];
            let weights = cluster_log_weights(r, &state.tau, &state.rho, &state.alpha, metric, table)?;
            let probs = softmax(&weights);
            if keep {
                for (s, p) in sums[j - n_train].iter_mut().zip(&probs) {
                    *s += p;
                }
            }
            state.z[j] = sample_weighted(&probs, probs.iter().sum(), &mut rng);
        }
        state.recount();
        if keep {
            kept += 1;
        }
    }
    stats.warn_on_range();
    let probabilities: Vec<Vec<f64>> =
        sums.into_iter().map(|row| row.into_iter().map(|s| s / kept.max(1) as f64).collect()).collect();
    let map =
        probabilities.iter().map(|p| (0..classes).fold(0, |best, c| if p[c] > p[best] { c } else { best })).collect();
    Ok(Classification { probabilities, map, stats })
}

/// Leave-one-out classification: each assessor in turn is classified using
/// all others as training data. Run `j` uses seed `tuning.seed + j`.
#[allow(clippy::too_many_arguments)]
pub fn leave_one_out(
    data: &[AssessorData],
    labels: &[usize],
    classes: usize,
    metric: Metric,
    priors: &MixturePriors,
    tuning: &Tuning,
    table: &dyn LogPartition,
    alpha_model: ClassAlpha,
    augment: &AugmentOptions,
) -> Result<Vec<Vec<f64>>, SamplerError> {
    (0..data.len())
        .map(|j| {
            let train: Vec<AssessorData> =
                data.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, d)| d.clone()).collect();
            let train_labels: Vec<usize> =
                labels.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &l)| l).collect();
            let t = Tuning { seed: tuning.seed.wrapping_add(j as u64), ..tuning.clone() };
            let out = classify(
                &train,
                &train_labels,
                std::slice::from_ref(&data[j]),
                classes,
                metric,
                priors,
                &t,
                table,
                alpha_model,
                augment,
            )?;
            Ok(out.probabilities.into_iter().next().expect("one test assessor"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::KendallClosedForm;

    fn r(v: &[usize]) -> Ranking {
        Ranking::new(v.to_vec()).unwrap()
    }

    #[test]
    fn tau_on_simplex() {
        let mut rng = stream_rng(1, 0);
        for counts in [[0usize, 4], [3, 1], [0, 0]] {
            for _ in 0..100 {
                let t = gibbs_tau(&counts, 2.0, &mut rng);
                assert!(t.iter().all(|&x| x >= 0.0));
                assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_clusters_split_evenly() {
        let table = KendallClosedForm::new(3).unwrap();
        let p = cluster_probabilities(
            &r(&[2, 1, 3]),
            &[0.5, 0.5],
            &[r(&[1, 2, 3]), r(&[3, 1, 2])],
            &[1.0, 1.0],
            Metric::Kendall,
            &table,
        )
        .unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_cluster_never_chosen() {
        let table = KendallClosedForm::new(3).unwrap();
        let mut rng = stream_rng(2, 0);
        for _ in 0..200 {
            let z = gibbs_z(
                &r(&[3, 2, 1]),
                &[1.0, 0.0],
                &[r(&[1, 2, 3]), r(&[3, 2, 1])],
                &[1.0, 2.0],
                Metric::Kendall,
                &table,
                &mut rng,
            )
            .unwrap();
            assert_eq!(z, 0);
        }
    }

    #[test]
    fn interior_proposals_stay_between_neighbours() {
        let table = KendallClosedForm::new(3).unwrap();
        let mut state = MixtureState {
            rho: vec![r(&[1, 2, 3]); 3],
            alpha: vec![1.0, 2.0, 3.0],
            tau: vec![1.0 / 3.0; 3],
            z: vec![0, 1, 2],
            counts: vec![1, 1, 1],
        };
        let data = vec![r(&[1, 2, 3]), r(&[2, 1, 3]), r(&[3, 2, 1])];
        let mut rng = stream_rng(3, 0);
        let mut stats = AcceptanceStats::default();
        for _ in 0..2000 {
            for c in 0..3 {
                mh_alpha_cluster(
                    c,
                    &mut state,
                    &data,
                    Metric::Kendall,
                    0.1,
                    0.1,
                    AlphaProposalMode::Corrected,
                    &table,
                    &mut stats,
                    &mut rng,
                )
                .unwrap();
                state.assert_invariants();
            }
        }
    }

    #[test]
    fn degenerate_beta_scale_is_counted() {
        let table = KendallClosedForm::new(3).unwrap();
        let mut state = MixtureState {
            rho: vec![r(&[1, 2, 3]); 2],
            alpha: vec![1e-8, 1e-7],
            tau: vec![0.5, 0.5],
            z: vec![],
            counts: vec![0, 0],
        };
        let mut rng = stream_rng(4, 0);
        let mut stats = AcceptanceStats::default();
        mh_alpha_cluster(
            0,
            &mut state,
            &[],
            Metric::Kendall,
            0.1,
            0.1,
            AlphaProposalMode::AsPublished,
            &table,
            &mut stats,
            &mut rng,
        )
        .unwrap();
        assert_eq!(stats.alpha_degenerate, 1);
        assert_eq!(state.alpha[0], 1e-8);
    }

    #[test]
    fn elbow_and_median() {
        assert_eq!(elbow(&[1, 2, 3, 4, 5], &[100.0, 60.0, 20.0, 18.0, 17.0]), Some(3));
        assert_eq!(elbow(&[1, 2], &[1.0, 0.0]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn perfect_fit_has_zero_ss() {
        let data = vec![r(&[1, 2, 3]), r(&[3, 2, 1])];
        let s = MixtureSamples {
            n: 3,
            metric: Metric::Footrule,
            priors: MixturePriors::new(0.1, 1.0, 2).unwrap(),
            tuning: Tuning::default_for(Metric::Footrule),
            iterations: vec![1],
            alpha: vec![vec![1.0, 2.0]],
            rho: vec![data.clone()],
            tau: vec![vec![0.5, 0.5]],
            z: vec![vec![0, 1]],
            augmented: vec![],
            stats: AcceptanceStats::default(),
        };
        assert_eq!(within_cluster_ss(&s, &data), vec![0.0]);
        assert_eq!(s.map_labels(), vec![0, 1]);
    }
}
