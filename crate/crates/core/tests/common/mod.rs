//! Statistical helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::hash::Hash;

use mallows::rank::{Metric, Ranking};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Asymptotic p-value of the two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
}

/// Asymptotic p-value of the one-sample Kolmogorov-Smirnov test.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = x.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let en = n.sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
}

/// Pearson chi-square p-value; `expected` holds probabilities.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Total variation distance between an empirical sample and a target law.
pub fn tv_empirical<K: Eq + Hash>(draws: impl IntoIterator<Item = K>, target: &HashMap<K, f64>) -> f64 {
    let mut counts: HashMap<K, f64> = HashMap::new();
    let mut total = 0.0;
    for d in draws {
        *counts.entry(d).or_default() += 1.0;
        total += 1.0;
    }
    let mut tv = 0.0;
    for (k, p) in target {
        tv += (counts.get(k).copied().unwrap_or(0.0) / total - p).abs();
    }
    for (k, c) in &counts {
        if !target.contains_key(k) {
            tv += c / total;
        }
    }
    tv / 2.0
}

/// All permutations of `n` items, by recursive insertion.
pub fn all_rankings(n: usize) -> Vec<Ranking> {
    fn extend(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Ranking>) {
        if prefix.len() == n {
            out.push(Ranking::new(prefix.clone()).unwrap());
            return;
        }
        for r in 1..=n {
            if !prefix.contains(&r) {
                prefix.push(r);
                extend(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), n, &mut out);
    out
}

/// Distance computed straight from its definition.
pub fn oracle_distance(metric: Metric, r: &Ranking, p: &Ranking) -> u64 {
    let (r, p) = (r.ranks(), p.ranks());
    match metric {
        Metric::Footrule => r.iter().zip(p).map(|(&a, &b)| a.abs_diff(b) as u64).sum(),
        Metric::Spearman => r.iter().zip(p).map(|(&a, &b)| (a.abs_diff(b) as u64).pow(2)).sum(),
        Metric::Kendall => {
            let mut count = 0;
            for i in 0..r.len() {
                for j in i + 1..r.len() {
                    if (r[i] < r[j]) != (p[i] < p[j]) {
                        count += 1;
                    }
                }
            }
            count
        }
    }
}

/// Sum of distances from `rho` to the data.
pub fn total_distance(data: &[Ranking], rho: &Ranking, metric: Metric) -> f64 {
    data.iter().map(|r| oracle_distance(metric, r, rho) as f64).sum()
}

/// `log Z_n(alpha)` by brute force over all permutations.
pub fn oracle_log_z(n: usize, metric: Metric) -> impl Fn(f64) -> f64 {
    let id = Ranking::identity(n);
    let d: Vec<f64> = all_rankings(n).iter().map(|r| oracle_distance(metric, r, &id) as f64).collect();
    move |alpha| d.iter().map(|x| (-alpha / n as f64 * x).exp()).sum::<f64>().ln()
}

/// Trapezoid grid on `[0, hi]`.
pub fn quadrature_grid(hi: f64, points: usize) -> Vec<(f64, f64)> {
    let h = hi / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let w = if i == 0 || i == points - 1 { h / 2.0 } else { h };
            (i as f64 * h, w)
        })
        .collect()
}

/// Posterior `p(rho, alpha | data)` under an exponential prior, integrated
/// over `alpha` by quadrature. Returns the `rho` marginal and the posterior
/// mean of `alpha`. `log_z` must be exact.
pub fn enumerate_posterior(
    data: &[Ranking],
    n: usize,
    metric: Metric,
    lambda: f64,
    log_z: impl Fn(f64) -> f64,
) -> (HashMap<Ranking, f64>, f64) {
    let rankings = all_rankings(n);
    let sums: Vec<f64> = rankings.iter().map(|r| total_distance(data, r, metric)).collect();
    let big_n = data.len() as f64;
    let grid = quadrature_grid(80.0, 16_001);
    let mut mass = vec![0.0; rankings.len()];
    let (mut total, mut alpha_moment) = (0.0, 0.0);
    for &(a, w) in &grid {
        let base = -lambda * a - big_n * log_z(a);
        for (k, s) in sums.iter().enumerate() {
            let p = w * (base - a / n as f64 * s).exp();
            mass[k] += p;
            total += p;
            alpha_moment += a * p;
        }
    }
    let marginal = rankings.into_iter().zip(mass).map(|(r, m)| (r, m / total)).collect();
    (marginal, alpha_moment / total)
}

/// Mallows probabilities at fixed `alpha` by enumeration.
pub fn mallows_posterior_fixed_alpha(data: &[Ranking], n: usize, metric: Metric, alpha: f64) -> HashMap<Ranking, f64> {
    let rankings = all_rankings(n);
    let logs: Vec<f64> = rankings.iter().map(|r| -alpha / n as f64 * total_distance(data, r, metric)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    rankings.into_iter().zip(logs).map(|(r, l)| (r, (l - max).exp() / total)).collect()
}

/// Prints one line per acceptance criterion and fails the test on a miss.
pub fn report(criterion: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {criterion} ({name}): {} [{detail}]", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}
