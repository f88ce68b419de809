//! Rankings, right-invariant distances and preference constraints.
//!
//! Rankings are stored item-major: `ranks[i]` is the rank of item `i`, with 1
//! the best. The ordering view (`ordering[k]` = item at rank `k + 1`) only
//! exists as a conversion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RankError {
    #[error("dimension mismatch: {left} vs {right} items")]
    DimensionMismatch { left: usize, right: usize },
    #[error("not a permutation of 1..={n}: {detail}")]
    NotAPermutation { n: usize, detail: String },
    #[error("item catalog is empty")]
    EmptyCatalog,
    #[error("duplicate item label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown item label `{0}`")]
    UnknownLabel(String),
    #[error("preference pair relates item {0} to itself")]
    SelfPreference(usize),
    #[error("item index {index} out of range for {n} items")]
    ItemOutOfRange { index: usize, n: usize },
    #[error("inconsistent preferences, cycle through items {0:?}")]
    Cycle(Vec<usize>),
    #[error("unknown metric `{0}` (expected footrule, kendall or spearman)")]
    UnknownMetric(String),
}

/// Labels for the `n` items, addressable in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemCatalog {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl ItemCatalog {
    pub fn new<I, S>(labels: I) -> Result<Self, RankError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(RankError::EmptyCatalog);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(RankError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels, index })
    }

    /// Catalog `1, 2, ..., n`.
    pub fn numbered(n: usize) -> Result<Self, RankError> {
        Self::new((1..=n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, item: usize) -> &str {
        &self.labels[item]
    }

    pub fn position(&self, label: &str) -> Result<usize, RankError> {
        self.index.get(label).copied().ok_or_else(|| RankError::UnknownLabel(label.to_string()))
    }
}

/// A complete ranking of `n` items: a permutation of `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    pub fn new(ranks: Vec<usize>) -> Result<Self, RankError> {
        check_permutation(&ranks)?;
        Ok(Self(ranks))
    }

    pub(crate) fn from_vec_unchecked(ranks: Vec<usize>) -> Self {
        debug_assert!(check_permutation(&ranks).is_ok(), "invalid ranking {ranks:?}");
        Self(ranks)
    }

    pub fn identity(n: usize) -> Self {
        Self((1..=n).collect())
    }

    /// Builds a ranking from an ordering, `order[k]` being the item placed at rank `k + 1`.
    pub fn from_ordering(order: &[usize]) -> Result<Self, RankError> {
        let n = order.len();
        let mut ranks = vec![0; n];
        for (k, &item) in order.iter().enumerate() {
            if item >= n {
                return Err(RankError::ItemOutOfRange { index: item, n });
            }
            if ranks[item] != 0 {
                return Err(RankError::NotAPermutation { n, detail: format!("item {item} appears twice in ordering") });
            }
            ranks[item] = k + 1;
        }
        Ok(Self(ranks))
    }

    /// Uniform draw from all `n!` rankings.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut ranks: Vec<usize> = (1..=n).collect();
        ranks.shuffle(rng);
        Self(ranks)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rank(&self, item: usize) -> usize {
        self.0[item]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// Items listed from rank 1 to rank n.
    pub fn ordering(&self) -> Vec<usize> {
        let mut order = vec![0; self.0.len()];
        for (item, &r) in self.0.iter().enumerate() {
            order[r - 1] = item;
        }
        order
    }

    /// Relabels items by `sigma`: `(R o sigma)_i = R_{sigma(i)}`.
    pub fn compose(&self, sigma: &Ranking) -> Result<Ranking, RankError> {
        same_len(self.len(), sigma.len())?;
        Ok(Ranking(sigma.0.iter().map(|&s| self.0[s - 1]).collect()))
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

fn check_permutation(ranks: &[usize]) -> Result<(), RankError> {
    let n = ranks.len();
    let mut seen = vec![false; n + 1];
    for &r in ranks {
        if r == 0 || r > n {
            return Err(RankError::NotAPermutation { n, detail: format!("rank {r} out of range") });
        }
        if seen[r] {
            return Err(RankError::NotAPermutation { n, detail: format!("rank {r} repeated") });
        }
        seen[r] = true;
    }
    Ok(())
}

fn same_len(left: usize, right: usize) -> Result<(), RankError> {
    if left == right {
        Ok(())
    } else {
        Err(RankError::DimensionMismatch { left, right })
    }
}

/// Right-invariant distance between rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Footrule,
    Kendall,
    Spearman,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Footrule, Metric::Kendall, Metric::Spearman];

    pub fn distance(&self, r: &Ranking, p: &Ranking) -> Result<u64, RankError> {
        same_len(r.len(), p.len())?;
        Ok(self.distance_raw(r.ranks(), p.ranks()))
    }

    pub(crate) fn distance_raw(&self, r: &[usize], p: &[usize]) -> u64 {
        debug_assert_eq!(r.len(), p.len());
        match self {
            Metric::Footrule => r.iter().zip(p).map(|(&a, &b)| a.abs_diff(b) as u64).sum(),
            Metric::Spearman => r
                .iter()
                .zip(p)
                .map(|(&a, &b)| {
                    let d = a.abs_diff(b) as u64;
                    d * d
                })
                .sum(),
            Metric::Kendall => kendall_inversions(r, p),
        }
    }

    /// Per-item contribution `d(r, p)` for metrics that decompose over items.
    pub fn element_distance(&self, r: usize, p: usize) -> Option<u64> {
        let d = r.abs_diff(p) as u64;
        match self {
            Metric::Footrule => Some(d),
            Metric::Spearman => Some(d * d),
            Metric::Kendall => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Footrule => "footrule",
            Metric::Kendall => "kendall",
            Metric::Spearman => "spearman",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = RankError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "footrule" => Ok(Metric::Footrule),
            "kendall" => Ok(Metric::Kendall),
            "spearman" => Ok(Metric::Spearman),
            other => Err(RankError::UnknownMetric(other.to_string())),
        }
    }
}

pub fn footrule_distance(r: &Ranking, p: &Ranking) -> Result<u64, RankError> {
    Metric::Footrule.distance(r, p)
}

pub fn spearman_distance(r: &Ranking, p: &Ranking) -> Result<u64, RankError> {
    Metric::Spearman.distance(r, p)
}

pub fn kendall_distance(r: &Ranking, p: &Ranking) -> Result<u64, RankError> {
    Metric::Kendall.distance(r, p)
}

/// Discordant pairs between `r` and `p`, counted as inversions of `r` read in
/// the order given by `p` (merge sort, O(n log n)).
fn kendall_inversions(r: &[usize], p: &[usize]) -> u64 {
    let n = r.len();
    let mut seq = vec![0usize; n];
    for i in 0..n {
        seq[p[i] - 1] = r[i];
    }
    let mut buf = vec![0usize; n];
    count_inversions(&mut seq, &mut buf)
}

fn count_inversions(v: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (lo, hi) = v.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        count_inversions(lo, blo) + count_inversions(hi, bhi)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// `upper` is preferred to `lower`, so `upper` must receive the smaller rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PreferencePair {
    pub lower: usize,
    pub upper: usize,
}

impl PreferencePair {
    pub fn new(lower: usize, upper: usize) -> Result<Self, RankError> {
        if lower == upper {
            return Err(RankError::SelfPreference(lower));
        }
        Ok(Self { lower, upper })
    }
}

/// Transitively closed, acyclic set of preferences stated by one assessor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceConstraintSet {
    assessor: String,
    pairs: BTreeSet<PreferencePair>,
    constrained: BTreeSet<usize>,
    // item -> items preferred to it
    above: BTreeMap<usize, Vec<usize>>,
    // item -> items it is preferred to
    below: BTreeMap<usize, Vec<usize>>,
}

impl PreferenceConstraintSet {
    pub fn empty() -> Self {
        Self {
            assessor: String::new(),
            pairs: BTreeSet::new(),
            constrained: BTreeSet::new(),
            above: BTreeMap::new(),
            below: BTreeMap::new(),
        }
    }

    pub fn with_assessor(mut self, assessor: impl Into<String>) -> Self {
        self.assessor = assessor.into();
        self
    }

    pub fn assessor(&self) -> &str {
        &self.assessor
    }

    pub fn pairs(&self) -> &BTreeSet<PreferencePair> {
        &self.pairs
    }

    pub fn constrained_items(&self) -> &BTreeSet<usize> {
        &self.constrained
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, lower: usize, upper: usize) -> bool {
        self.pairs.contains(&PreferencePair { lower, upper })
    }

    /// Largest item index mentioned, if any.
    pub fn max_item(&self) -> Option<usize> {
        self.constrained.last().copied()
    }

    /// Items that must be ranked above `item`.
    pub fn preferred_to(&self, item: usize) -> &[usize] {
        self.above.get(&item).map_or(&[], Vec::as_slice)
    }

    /// Items that must be ranked below `item`.
    pub fn dominated_by(&self, item: usize) -> &[usize] {
        self.below.get(&item).map_or(&[], Vec::as_slice)
    }
}

/// Closes `pairs` under transitivity.
///
/// Fails with [`RankError::Cycle`] when the preferences are incompatible; the
/// error carries one witness cycle `a, b, ..., a` where each item is preferred
/// to the previous one.
pub fn transitive_closure<I>(pairs: I) -> Result<PreferenceConstraintSet, RankError>
where
    I: IntoIterator<Item = PreferencePair>,
{
    let input: BTreeSet<PreferencePair> = pairs.into_iter().collect();
    let mut nodes = BTreeSet::new();
    // lower -> uppers
    let mut succ: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut pred: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for p in &input {
        if p.lower == p.upper {
            return Err(RankError::SelfPreference(p.lower));
        }
        nodes.insert(p.lower);
        nodes.insert(p.upper);
        succ.entry(p.lower).or_default().insert(p.upper);
        pred.entry(p.upper).or_default().insert(p.lower);
    }

    // Kahn: repeatedly peel nodes with no outstanding predecessors.
    let mut indeg: BTreeMap<usize, usize> = nodes.iter().map(|&v| (v, pred.get(&v).map_or(0, BTreeSet::len))).collect();
    let mut ready: Vec<usize> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&v, _)| v).collect();
    let mut topo = Vec::with_capacity(nodes.len());
    while let Some(v) = ready.pop() {
        topo.push(v);
        if let Some(next) = succ.get(&v) {
            for &w in next {
                let d = indeg.get_mut(&w).expect("node registered");
                *d -= 1;
                if *d == 0 {
                    ready.push(w);
                }
            }
        }
    }
    if topo.len() < nodes.len() {
        return Err(RankError::Cycle(witness_cycle(&indeg, &pred)));
    }

    // Reachability in reverse topological order.
    let mut reach: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &v in topo.iter().rev() {
        let mut set = BTreeSet::new();
        if let Some(next) = succ.get(&v) {
            for &w in next {
                set.insert(w);
                set.extend(reach[&w].iter().copied());
            }
        }
        reach.insert(v, set);
    }

    let mut closed = BTreeSet::new();
    let mut above: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut below: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&lower, uppers) in &reach {
        for &upper in uppers {
            closed.insert(PreferencePair { lower, upper });
            above.entry(lower).or_default().push(upper);
            below.entry(upper).or_default().push(lower);
        }
    }
    Ok(PreferenceConstraintSet { assessor: String::new(), pairs: closed, constrained: nodes, above, below })
}

fn witness_cycle(indeg: &BTreeMap<usize, usize>, pred: &BTreeMap<usize, BTreeSet<usize>>) -> Vec<usize> {
    // Every node left over by Kahn has a predecessor that is also left over;
    // walking predecessors must revisit a node.
    let left: BTreeSet<usize> = indeg.iter().filter(|(_, &d)| d > 0).map(|(&v, _)| v).collect();
    let start = *left.iter().next().expect("cycle implies leftover nodes");
    let mut path = vec![start];
    let mut pos: HashMap<usize, usize> = HashMap::from([(start, 0)]);
    let mut v = start;
    loop {
        let p = *pred[&v].iter().find(|p| left.contains(p)).expect("leftover node has leftover predecessor");
        if let Some(&i) = pos.get(&p) {
            let mut cycle: Vec<usize> = path[i..].to_vec();
            // path follows predecessors; reverse so each item is preferred to the previous
            cycle.reverse();
            cycle.push(cycle[0]);
            return cycle;
        }
        pos.insert(p, path.len());
        path.push(p);
        v = p;
    }
}

/// True iff every preference in `constraints` holds in `ranking`.
pub fn is_consistent(ranking: &Ranking, constraints: &PreferenceConstraintSet) -> bool {
    let n = ranking.len();
    constraints.pairs.iter().all(|p| p.lower < n && p.upper < n && ranking.rank(p.upper) < ranking.rank(p.lower))
}

/// Open interval `(l, r)` of ranks `item` may take without breaking
/// `constraints`, given the current ranks of every other item.
///
/// `l` is the largest rank among items preferred to `item` (0 if none), `r`
/// the smallest rank among items `item` is preferred to (`n + 1` if none).
pub fn rank_bounds(constraints: &PreferenceConstraintSet, ranking: &Ranking, item: usize) -> (usize, usize) {
    let l = constraints.preferred_to(item).iter().map(|&k| ranking.rank(k)).max().unwrap_or(0);
    let r = constraints.dominated_by(item).iter().map(|&k| ranking.rank(k)).min().unwrap_or(ranking.len() + 1);
    (l, r)
}
