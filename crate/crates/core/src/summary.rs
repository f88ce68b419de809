//! Posterior summaries of sampled consensus rankings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rank::Ranking;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SummaryError {
    #[error("no posterior samples")]
    NoSamples,
    #[error("samples rank {found} items, expected {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("item {index} is out of range for {n} items")]
    ItemOutOfRange { index: usize, n: usize },
    #[error("a preference query needs two different items, got {0} twice")]
    SameItem(usize),
    #[error("credible level must lie in (0, 1], got {0}")]
    BadLevel(f64),
    #[error("assessor {index} is out of range for {count} assessors")]
    AssessorOutOfRange { index: usize, count: usize },
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
}

/// `probs[i][k - 1]` is the posterior probability that item `i` has rank `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRankMatrix {
    pub probs: Vec<Vec<f64>>,
}

impl MarginalRankMatrix {
    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn row(&self, item: usize) -> &[f64] {
        &self.probs[item]
    }

    /// `P(rank of item <= k)` for `k = 1..=n`.
    pub fn cdf(&self, item: usize) -> Vec<f64> {
        self.probs[item]
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    /// Heat-map plot data: one `item rank probability` line per cell, items
    /// and ranks counted from 1.
    pub fn heat_map_text(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.probs.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                writeln!(out, "{} {} {}", i + 1, k + 1, p).expect("writing to a string");
            }
            out.push('\n');
        }
        out
    }

    /// CDF plot data for one item: `rank cumulative_probability` lines.
    pub fn cdf_text(&self, item: usize) -> String {
        self.cdf(item).iter().enumerate().map(|(k, c)| format!("{} {}\n", k + 1, c)).collect()
    }
}

fn check_samples(samples: &[Ranking]) -> Result<usize, SummaryError> {
    let n = samples.first().ok_or(SummaryError::NoSamples)?.len();
    if let Some(bad) = samples.iter().find(|r| r.len() != n) {
        return Err(SummaryError::SizeMismatch { expected: n, found: bad.len() });
    }
    Ok(n)
}

/// Fraction of samples in which each item takes each rank.
pub fn marginal_rank_matrix(samples: &[Ranking]) -> Result<MarginalRankMatrix, SummaryError> {
    let n = check_samples(samples)?;
    let mut counts = vec![vec![0u64; n]; n];
    for r in samples {
        for (i, &k) in r.ranks().iter().enumerate() {
            counts[i][k - 1] += 1;
        }
    }
    let total = samples.len() as f64;
    Ok(MarginalRankMatrix { probs: counts.iter().map(|row| row.iter().map(|&c| c as f64 / total).collect()).collect() })
}

/// Expected number of items placed at their true rank,
/// `sum_i P(rho_i = truth_i)`.
pub fn trace_statistic(matrix: &MarginalRankMatrix, truth: &Ranking) -> Result<f64, SummaryError> {
    if truth.len() != matrix.n() {
        return Err(SummaryError::SizeMismatch { expected: matrix.n(), found: truth.len() });
    }
    Ok((0..matrix.n()).map(|i| matrix.probs[i][truth.rank(i) - 1]).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpEntry {
    pub item: usize,
    /// `P(rank of item <= position)` at the position where it was chosen.
    pub cumulative: f64,
}

/// Greedy cumulative-probability ordering: position `k` goes to the unchosen
/// item maximizing `P(rank <= k)`; ties go to the lower item index.
pub fn cp_ordering(matrix: &MarginalRankMatrix) -> Vec<CpEntry> {
    let n = matrix.n();
    let cdfs: Vec<Vec<f64>> = (0..n).map(|i| matrix.cdf(i)).collect();
    let mut chosen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !chosen[i]) {
            if best.is_none_or(|b| cdfs[i][k] > cdfs[b][k]) {
                best = Some(i);
            }
        }
        let item = best.expect("an unchosen item remains");
        chosen[item] = true;
        out.push(CpEntry { item, cumulative: cdfs[item][k] });
    }
    out
}

/// Discrete highest-posterior-density set for one item's rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCredibleSet {
    pub item: Option<usize>,
    pub level: f64,
    /// Ranks in the set, increasing.
    pub ranks: Vec<usize>,
    pub mass: f64,
}

impl DiscreteCredibleSet {
    /// Smallest interval `[min, max]` containing the set.
    pub fn interval(&self) -> (usize, usize) {
        (self.ranks[0], *self.ranks.last().expect("set is never empty"))
    }
}

/// Adds ranks in decreasing probability (lower rank first among equals)
/// until the mass reaches `level`. `marginal[k - 1]` is `P(rank = k)`.
pub fn hpdi(marginal: &[f64], level: f64) -> Result<DiscreteCredibleSet, SummaryError> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(SummaryError::BadLevel(level));
    }
    if marginal.is_empty() {
        return Err(SummaryError::NoSamples);
    }
    let mut order: Vec<usize> = (0..marginal.len()).collect();
    order.sort_by(|&a, &b| marginal[b].total_cmp(&marginal[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut ranks = Vec::new();
    for k in order {
        ranks.push(k + 1);
        mass += marginal[k];
        // absorb rounding in sums of sample fractions
        if mass >= level - 1e-12 {
            break;
        }
    }
    ranks.sort_unstable();
    Ok(DiscreteCredibleSet { item: None, level, ranks, mass })
}

pub fn hpdi_for_item(
    matrix: &MarginalRankMatrix,
    item: usize,
    level: f64,
) -> Result<DiscreteCredibleSet, SummaryError> {
    if item >= matrix.n() {
        return Err(SummaryError::ItemOutOfRange { index: item, n: matrix.n() });
    }
    let mut set = hpdi(matrix.row(item), level)?;
    set.item = Some(item);
    Ok(set)
}

/// `P(rank of item <= t)` for every item.
pub fn top_t_probability(samples: &[Ranking], t: usize) -> Result<Vec<f64>, SummaryError> {
    let n = check_samples(samples)?;
    let mut counts = vec![0u64; n];
    for r in samples {
        for (i, &k) in r.ranks().iter().enumerate() {
            if k <= t {
                counts[i] += 1;
            }
        }
    }
    Ok(counts.iter().map(|&c| c as f64 / samples.len() as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    /// `pairwise[i][j] = P(rho_i < rho_j)`.
    pub pairwise: Vec<Vec<f64>>,
    /// `dominates[i][j]`: the rank CDF of `i` is at least that of `j`
    /// everywhere and strictly larger somewhere.
    pub dominates: Vec<Vec<bool>>,
}

pub fn dominance_matrix(samples: &[Ranking]) -> Result<Dominance, SummaryError> {
    let n = check_samples(samples)?;
    let mut counts = vec![vec![0u64; n]; n];
    for r in samples {
        for i in 0..n {
            for j in 0..n {
                if r.rank(i) < r.rank(j) {
                    counts[i][j] += 1;
                }
            }
        }
    }
    let total = samples.len() as f64;
    let pairwise = counts.iter().map(|row| row.iter().map(|&c| c as f64 / total).collect()).collect();
    let m = marginal_rank_matrix(samples)?;
    let cdfs: Vec<Vec<f64>> = (0..n).map(|i| m.cdf(i)).collect();
    const EPS: f64 = 1e-12;
    let dominates = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    i != j
                        && cdfs[i].iter().zip(&cdfs[j]).all(|(a, b)| *a >= *b - EPS)
                        && cdfs[i].iter().zip(&cdfs[j]).any(|(a, b)| *a > *b + EPS)
                })
                .collect()
        })
        .collect();
    Ok(Dominance { pairwise, dominates })
}

/// Posterior predictive probability that assessor `j` prefers item `b` to
/// item `a`, from augmented rankings (`augmented[s][j]`).
pub fn preference_predictive(augmented: &[Vec<Ranking>], j: usize, a: usize, b: usize) -> Result<f64, SummaryError> {
    if a == b {
        return Err(SummaryError::SameItem(a));
    }
    let first = augmented.first().ok_or(SummaryError::NoSamples)?;
    if j >= first.len() {
        return Err(SummaryError::AssessorOutOfRange { index: j, count: first.len() });
    }
    let n = first[j].len();
    for item in [a, b] {
        if item >= n {
            return Err(SummaryError::ItemOutOfRange { index: item, n });
        }
    }
    let hits = augmented.iter().filter(|draw| draw[j].rank(b) < draw[j].rank(a)).count();
    Ok(hits as f64 / augmented.len() as f64)
}

/// `(threshold, true positive rate, false positive rate)` for every distinct
/// score used as a threshold (`score >= threshold` counts as positive),
/// from the highest threshold down.
pub fn roc_points(scores: &[f64], positive: &[bool]) -> Result<Vec<(f64, f64, f64)>, SummaryError> {
    if scores.len() != positive.len() {
        return Err(SummaryError::LengthMismatch { scores: scores.len(), labels: positive.len() });
    }
    let p = positive.iter().filter(|&&x| x).count() as f64;
    let q = positive.len() as f64 - p;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let rate = |hits: usize, total: f64| if total > 0.0 { hits as f64 / total } else { 0.0 };
    let mut out = vec![(f64::INFINITY, 0.0, 0.0)];
    for t in thresholds {
        let tp = scores.iter().zip(positive).filter(|&(&s, &y)| s >= t && y).count();
        let fp = scores.iter().zip(positive).filter(|&(&s, &y)| s >= t && !y).count();
        out.push((t, rate(tp, p), rate(fp, q)));
    }
    Ok(out)
}

/// ROC triplets as text, one `threshold tpr fpr` line each.
pub fn roc_text(points: &[(f64, f64, f64)]) -> String {
    points.iter().map(|(t, tpr, fpr)| format!("{t} {tpr} {fpr}\n")).collect()
}
