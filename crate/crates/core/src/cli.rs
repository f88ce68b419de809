//! The `mallows` command line tool.
//!
//! Every run command writes its outputs into `--out`: the result files, a
//! `config.json` echo of the resolved settings, an `acceptance.json` with
//! proposal counters (for samplers), and a `manifest.json` holding the
//! arguments and the SHA-256 of every output. `mallows rerun --manifest`
//! repeats a run and verifies the outputs are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::run_chain_partial;
use crate::augment::{AssessorData, AugmentOptions, PartialRanking};
use crate::dynamics::{run_dynamic_chain, DynamicHyper, DynamicOptions};
use crate::error::Error;
use crate::io::{
    load_preferences, load_rank_matrix, load_timed_ranks, parse_labels, parse_rank_matrix, parse_rank_matrix_with_ties,
    read_file, write_file, write_rank_matrix, SampleFile, SampleSet,
};
use crate::mixture::{classify, run_mixture_chain, AlphaProposalMode, ClassAlpha, MixtureOptions, MixturePriors};
use crate::partition::{
    alpha_grid, exact_log_partition, grid_convergence_check, kendall_log_partition, LogPartition, LogPartitionTable,
};
use crate::rank::{ItemCatalog, Metric, Ranking};
use crate::sampler::{generate_by_perturbation, run_chain, sample_mallows, Priors, ProposalCorrection, Tuning};
use crate::summary::{
    cp_ordering, dominance_matrix, hpdi_for_item, marginal_rank_matrix, preference_predictive, top_t_probability,
    trace_statistic,
};

#[derive(Debug, Parser)]
#[command(name = "mallows", version, about = "Bayesian inference for the Mallows rank model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or check a log-partition-function table.
    #[command(subcommand)]
    Table(TableCommand),
    /// Fit a single Mallows model to rankings, partial rankings or preferences.
    Fit(FitArgs),
    /// Fit a mixture of Mallows models.
    FitMixture(FitMixtureArgs),
    /// Fit the time-dependent model to timed rankings.
    FitDynamic(FitDynamicArgs),
    /// Summarize a sample file.
    Summarize(SummarizeArgs),
    /// Predictive preference probability for one assessor.
    Predict(PredictArgs),
    /// Classify test assessors given labelled training assessors.
    Classify(ClassifyArgs),
    /// Simulate rankings.
    Simulate(SimulateArgs),
    /// Repeat a run from its manifest and verify identical outputs.
    Rerun(RerunArgs),
}

#[derive(Debug, Subcommand)]
pub enum TableCommand {
    Build(TableBuildArgs),
    Check(TableCheckArgs),
}

#[derive(Debug, Args)]
pub struct TableBuildArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub metric: String,
    /// closed-form, exact or importance-sampling
    #[arg(long, default_value = "importance-sampling")]
    pub method: String,
    /// Importance samples per grid point.
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TableCheckArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Compare against another table on the same grid instead of exact values.
    #[arg(long)]
    pub against: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Sampler settings; every field can also come from the `--config` file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TuningArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub leap: Option<usize>,
    #[arg(long)]
    pub sigma_alpha: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha_init: Option<f64>,
    /// symmetric or exact
    #[arg(long)]
    pub correction: Option<String>,
    /// Number of independent chains, run in parallel with seeds seed, seed+1, ...
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub aug_frequency: Option<usize>,
    #[arg(long)]
    pub tie_interval: Option<usize>,
    /// Store augmented rankings in the sample file.
    #[arg(long)]
    pub record_augmented: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Rank matrix CSV (header of item labels, NA for missing ranks).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Read repeated ranks within a row as ties.
    #[arg(long)]
    pub ties: bool,
    /// Keep only ranks 1..=t of every row.
    #[arg(long)]
    pub top_t_mask: Option<usize>,
    /// Pairwise preferences CSV: assessor_id,less_preferred,more_preferred.
    #[arg(long)]
    pub preferences: Option<PathBuf>,
    /// Item labels for preference data, one per line.
    #[arg(long)]
    pub items: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunCommon {
    #[arg(long)]
    pub metric: Option<String>,
    /// Log-partition table (JSON).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// TOML file with default settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub common: RunCommon,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct MixtureArgs {
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub psi: Option<f64>,
    /// as-published or corrected
    #[arg(long)]
    pub alpha_mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitMixtureArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub mixture: MixtureArgs,
    #[command(flatten)]
    pub common: RunCommon,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DynamicArgs {
    #[arg(long)]
    pub lambda_beta: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub sigma_beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitDynamicArgs {
    /// Timed rank CSV: a time column, then one column per item.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub dynamic: DynamicArgs,
    #[command(flatten)]
    pub common: RunCommon,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub top_t: Option<usize>,
    #[arg(long)]
    pub hpdi: Option<f64>,
    /// One-row rank CSV with the true ranking.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Sample file with recorded augmented rankings.
    #[arg(long)]
    pub samples: PathBuf,
    /// Assessor row number, counted from 1.
    #[arg(long)]
    pub assessor: usize,
    /// Less-preferred item label in the query.
    #[arg(long)]
    pub a: String,
    /// More-preferred item label in the query.
    #[arg(long)]
    pub b: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Class label per training row, one per line.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub per_class_alpha: bool,
    #[arg(long)]
    pub psi: Option<f64>,
    #[command(flatten)]
    pub common: RunCommon,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One-row rank CSV with the generating ranking.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Number of items when no truth is given (identity ranking).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub count: usize,
    /// Leap-and-shift moves per assessor.
    #[arg(long)]
    pub moves: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub leap: usize,
    /// Draw from the Mallows model with this scale instead of perturbing.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write into this directory instead of the original one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Settings file: flat keys matching the long flags (with underscores).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FileConfig {
    pub metric: Option<String>,
    pub table: Option<PathBuf>,
    #[serde(flatten)]
    pub tuning: TuningArgs,
    #[serde(flatten)]
    pub mixture: MixtureArgs,
    #[serde(flatten)]
    pub dynamic: DynamicArgs,
}

/// Record of a run, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub argv: Vec<String>,
    pub outputs: BTreeMap<String, String>,
}

/// Collects output files and their hashes.
#[derive(Debug)]
struct Outputs {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|source| crate::io::IoError::File { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), hashes: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Error> {
        write_file(&self.dir.join(name), contents)?;
        self.hashes.insert(name.to_string(), hex::encode(Sha256::digest(contents.as_bytes())));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Error> {
        let mut text = serde_json::to_string_pretty(value).map_err(crate::io::IoError::from)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn finish(self, argv: &[String]) -> Result<Manifest, Error> {
        let manifest = Manifest { argv: argv.to_vec(), outputs: self.hashes };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(crate::io::IoError::from)?;
        text.push('\n');
        write_file(&self.dir.join("manifest.json"), &text)?;
        Ok(manifest)
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Error> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => toml::from_str(&read_file(p)?).map_err(|e| config_error(format!("{}: {e}", p.display()))),
    }
}

fn parse_metric(s: Option<&str>) -> Result<Metric, Error> {
    Ok(Metric::from_str(s.ok_or_else(|| config_error("--metric is required"))?)?)
}

fn parse_correction(s: Option<&str>) -> Result<ProposalCorrection, Error> {
    match s {
        None | Some("symmetric") => Ok(ProposalCorrection::Symmetric),
        Some("exact") => Ok(ProposalCorrection::Exact),
        Some(other) => Err(config_error(format!("unknown correction {other:?} (symmetric, exact)"))),
    }
}

fn parse_alpha_mode(s: Option<&str>) -> Result<AlphaProposalMode, Error> {
    match s {
        None | Some("as-published") => Ok(AlphaProposalMode::AsPublished),
        Some("corrected") => Ok(AlphaProposalMode::Corrected),
        Some(other) => Err(config_error(format!("unknown alpha mode {other:?} (as-published, corrected)"))),
    }
}

/// Settings after merging flags over the config file over defaults.
#[derive(Debug, Clone, Serialize)]
struct Resolved {
    metric: Metric,
    table: PathBuf,
    lambda: f64,
    tuning: Tuning,
    chains: usize,
    augment: AugmentOptions,
}

fn resolve(common: &RunCommon, cfg: &FileConfig, n: usize) -> Result<Resolved, Error> {
    let f = &common.tuning;
    let c = &cfg.tuning;
    let metric = parse_metric(common.metric.as_deref().or(cfg.metric.as_deref()))?;
    let table = common.table.clone().or(cfg.table.clone()).ok_or_else(|| config_error("--table is required"))?;
    let d = Tuning::default_for(metric);
    let tuning = Tuning {
        leap: f.leap.or(c.leap).unwrap_or(d.leap),
        sigma_alpha: f.sigma_alpha.or(c.sigma_alpha).unwrap_or(d.sigma_alpha),
        iterations: f.iterations.or(c.iterations).unwrap_or(d.iterations),
        burn_in: f.burn_in.or(c.burn_in).unwrap_or(d.burn_in),
        thinning: f.thinning.or(c.thinning).unwrap_or(d.thinning),
        seed: f.seed.or(c.seed).unwrap_or(d.seed),
        alpha_init: f.alpha_init.or(c.alpha_init).unwrap_or(d.alpha_init),
        correction: parse_correction(f.correction.as_deref().or(c.correction.as_deref()))?,
    };
    let defaults = AugmentOptions::default();
    let augment = AugmentOptions {
        aug_frequency: f.aug_frequency.or(c.aug_frequency).unwrap_or(defaults.aug_frequency),
        tie_interval: f.tie_interval.or(c.tie_interval).unwrap_or(defaults.tie_interval),
        record_augmented: f.record_augmented.or(c.record_augmented).unwrap_or(false),
        check_constraints: false,
    };
    Ok(Resolved {
        metric,
        table,
        lambda: f.lambda.or(c.lambda).unwrap_or(Priors::default_for(metric, n).lambda),
        tuning,
        chains: f.chains.or(c.chains).unwrap_or(1).max(1),
        augment,
    })
}

fn load_table(path: &Path, n: usize, metric: Metric) -> Result<LogPartitionTable, Error> {
    let table = LogPartitionTable::load(path)?;
    table.check(n, metric)?;
    Ok(table)
}

/// Assessor data from `--data` or `--preferences`.
fn load_data(args: &DataArgs) -> Result<(ItemCatalog, Vec<AssessorData>), Error> {
    match (&args.data, &args.preferences) {
        (Some(path), None) => {
            let text = read_file(path)?;
            let (catalog, mut rows) = if args.ties {
                parse_rank_matrix_with_ties(&text)?
            } else {
                let m = parse_rank_matrix(&text)?;
                (m.catalog, m.rows.into_iter().map(AssessorData::Partial).collect())
            };
            if let Some(t) = args.top_t_mask {
                for row in &mut rows {
                    if let AssessorData::Partial(p) = row {
                        let masked = p.entries().iter().map(|e| e.filter(|&r| r <= t)).collect();
                        *p = PartialRanking::new(masked)?;
                    }
                }
            }
            Ok((catalog, rows))
        }
        (None, Some(path)) => {
            let catalog = match &args.items {
                Some(p) => Some(ItemCatalog::new(parse_labels(&read_file(p)?))?),
                None => None,
            };
            let prefs = load_preferences(path, catalog.as_ref())?;
            Ok((prefs.catalog, prefs.assessors.into_iter().map(AssessorData::Preferences).collect()))
        }
        _ => Err(config_error("give exactly one of --data and --preferences")),
    }
}

fn all_complete(data: &[AssessorData]) -> Option<Vec<Ranking>> {
    data.iter()
        .map(|d| match d {
            AssessorData::Partial(p) => {
                p.entries().iter().copied().collect::<Option<Vec<usize>>>().map(Ranking::from_vec_unchecked)
            }
            _ => None,
        })
        .collect()
}

fn chain_name(k: usize, chains: usize) -> String {
    if chains == 1 {
        "samples.txt".into()
    } else {
        format!("samples_chain{}.txt", k + 1)
    }
}

fn chain_tuning(t: &Tuning, k: usize) -> Tuning {
    Tuning { seed: t.seed.wrapping_add(k as u64), ..t.clone() }
}

fn fit(args: &FitArgs, argv: &[String]) -> Result<Manifest, Error> {
    let cfg = load_config(args.common.config.as_deref())?;
    let (catalog, data) = load_data(&args.data)?;
    let n = catalog.len();
    let r = resolve(&args.common, &cfg, n)?;
    let table = load_table(&r.table, n, r.metric)?;
    let priors = Priors::new(r.lambda)?;
    let complete = all_complete(&data);
    let runs: Vec<_> = (0..r.chains)
        .into_par_iter()
        .map(|k| {
            let tuning = chain_tuning(&r.tuning, k);
            match &complete {
                Some(rankings) if !r.augment.record_augmented => {
                    run_chain(rankings, r.metric, &priors, &tuning, &table)
                }
                _ => run_chain_partial(&data, r.metric, &priors, &tuning, &table, &r.augment),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut out = Outputs::new(&args.common.out)?;
    out.write_json("config.json", &r)?;
    let mut acceptance = BTreeMap::new();
    for (k, s) in runs.into_iter().enumerate() {
        acceptance.insert(chain_name(k, r.chains), s.stats.clone());
        let file = SampleFile { catalog: catalog.clone(), samples: SampleSet::Static(s) };
        out.write(&chain_name(k, r.chains), &file.to_text())?;
    }
    out.write_json("acceptance.json", &acceptance)?;
    out.finish(argv)
}

fn fit_mixture(args: &FitMixtureArgs, argv: &[String]) -> Result<Manifest, Error> {
    let cfg = load_config(args.common.config.as_deref())?;
    let (catalog, data) = load_data(&args.data)?;
    let n = catalog.len();
    let r = resolve(&args.common, &cfg, n)?;
    let table = load_table(&r.table, n, r.metric)?;
    let m = &args.mixture;
    let clusters = m.clusters.or(cfg.mixture.clusters).ok_or_else(|| config_error("--clusters is required"))?;
    let priors = MixturePriors::new(r.lambda, m.psi.or(cfg.mixture.psi).unwrap_or(2.0), clusters)?;
    let options = MixtureOptions {
        alpha_mode: parse_alpha_mode(m.alpha_mode.as_deref().or(cfg.mixture.alpha_mode.as_deref()))?,
        augment: r.augment,
        check_invariants: false,
    };
    let runs: Vec<_> = (0..r.chains)
        .into_par_iter()
        .map(|k| run_mixture_chain(&data, r.metric, &priors, &chain_tuning(&r.tuning, k), &table, &options))
        .collect::<Result<_, _>>()?;
    let mut out = Outputs::new(&args.common.out)?;
    out.write_json("config.json", &(&r, &priors, &options))?;
    let mut acceptance = BTreeMap::new();
    for (k, s) in runs.into_iter().enumerate() {
        acceptance.insert(chain_name(k, r.chains), s.stats.clone());
        let file = SampleFile { catalog: catalog.clone(), samples: SampleSet::Mixture(s) };
        out.write(&chain_name(k, r.chains), &file.to_text())?;
    }
    out.write_json("acceptance.json", &acceptance)?;
    out.finish(argv)
}

fn fit_dynamic(args: &FitDynamicArgs, argv: &[String]) -> Result<Manifest, Error> {
    let cfg = load_config(args.common.config.as_deref())?;
    let timed = load_timed_ranks(&args.data)?;
    let n = timed.catalog.len();
    let r = resolve(&args.common, &cfg, n)?;
    let table = load_table(&r.table, n, r.metric)?;
    let (d, c) = (&args.dynamic, &cfg.dynamic);
    let base = DynamicHyper::new(r.lambda);
    let hyper = DynamicHyper {
        lambda_alpha: r.lambda,
        lambda_beta: d.lambda_beta.or(c.lambda_beta).unwrap_or(base.lambda_beta),
        a: d.a.or(c.a).unwrap_or(base.a),
        b: d.b.or(c.b).unwrap_or(base.b),
        sigma_beta: d.sigma_beta.or(c.sigma_beta).unwrap_or(base.sigma_beta),
    };
    let options = DynamicOptions { augment: r.augment, ..DynamicOptions::default() };
    let runs: Vec<_> = (0..r.chains)
        .into_par_iter()
        .map(|k| run_dynamic_chain(&timed.data, r.metric, &hyper, &chain_tuning(&r.tuning, k), &table, &options))
        .collect::<Result<_, _>>()?;
    let mut out = Outputs::new(&args.common.out)?;
    out.write_json("config.json", &(&r, &hyper, timed.start))?;
    let mut acceptance = BTreeMap::new();
    for (k, s) in runs.into_iter().enumerate() {
        acceptance.insert(chain_name(k, r.chains), (s.stats.clone(), s.beta_stats.clone()));
        let file = SampleFile { catalog: timed.catalog.clone(), samples: SampleSet::Dynamic(s) };
        out.write(&chain_name(k, r.chains), &file.to_text())?;
    }
    out.write_json("acceptance.json", &acceptance)?;
    out.finish(argv)
}

fn table_build(args: &TableBuildArgs, argv: &[String]) -> Result<Manifest, Error> {
    let metric = parse_metric(Some(&args.metric))?;
    let alphas = alpha_grid(args.alpha_min, args.alpha_max, args.points);
    let table = match args.method.as_str() {
        "closed-form" if metric == Metric::Kendall => LogPartitionTable::closed_form(args.n, &alphas)?,
        "closed-form" => return Err(crate::partition::PartitionError::NoClosedForm(metric).into()),
        "exact" => LogPartitionTable::exact(args.n, metric, &alphas)?,
        "importance-sampling" => {
            LogPartitionTable::importance_sampling(args.n, metric, &alphas, args.samples, args.seed)?
        }
        other => {
            return Err(config_error(format!("unknown method {other:?} (closed-form, exact, importance-sampling)")))
        }
    };
    let mut out = Outputs::new(&args.out)?;
    #[derive(Serialize)]
    struct Echo<'a> {
        n: usize,
        metric: Metric,
        method: &'a str,
        samples: u64,
        seed: u64,
        alpha_min: f64,
        alpha_max: f64,
        points: usize,
        fit_residual: f64,
    }
    out.write_json(
        "config.json",
        &Echo {
            n: args.n,
            metric,
            method: &args.method,
            samples: args.samples,
            seed: args.seed,
            alpha_min: args.alpha_min,
            alpha_max: args.alpha_max,
            points: args.points,
            fit_residual: table.fit_residual,
        },
    )?;
    out.write("table.json", &table.to_json()?)?;
    out.finish(argv)
}

/// Largest relative error of a table's fitted values against exact values.
pub fn table_error_vs_exact(table: &LogPartitionTable) -> Result<Option<f64>, Error> {
    let fit = table.fit();
    let exact = |a: f64| -> Result<Option<f64>, Error> {
        Ok(match table.metric {
            Metric::Kendall => Some(kendall_log_partition(table.n, a)?),
            _ if table.n <= 10 => Some(exact_log_partition(table.n, a, table.metric)?),
            _ => None,
        })
    };
    let mut worst: Option<f64> = None;
    for &[a, _] in &table.grid {
        let Some(e) = exact(a)? else { return Ok(None) };
        let rel = (fit.eval(a) - e).abs() / e.abs().max(f64::MIN_POSITIVE);
        worst = Some(worst.map_or(rel, |w: f64| w.max(rel)));
    }
    Ok(worst)
}

fn table_check(args: &TableCheckArgs, argv: &[String]) -> Result<Option<Manifest>, Error> {
    let table = LogPartitionTable::load(&args.table)?;
    #[derive(Serialize)]
    struct Report {
        n: usize,
        metric: Metric,
        reference: &'static str,
        epsilon: f64,
        fit_residual: f64,
    }
    let (reference, epsilon) = match &args.against {
        Some(p) => ("table", grid_convergence_check(&LogPartitionTable::load(p)?, &table)?),
        None => match table_error_vs_exact(&table)? {
            Some(e) => ("exact", e),
            None => return Err(config_error("no exact values for this table; pass --against")),
        },
    };
    println!("epsilon={epsilon}");
    let report = Report { n: table.n, metric: table.metric, reference, epsilon, fit_residual: table.fit_residual };
    match &args.out {
        Some(dir) => {
            let mut out = Outputs::new(dir)?;
            out.write_json("check.json", &report)?;
            Ok(Some(out.finish(argv)?))
        }
        None => Ok(None),
    }
}

fn load_truth(path: &Path, catalog: &ItemCatalog) -> Result<Ranking, Error> {
    let m = load_rank_matrix(path)?;
    let row = m
        .complete_rows()
        .and_then(|mut r| if r.is_empty() { None } else { Some(r.remove(0)) })
        .ok_or_else(|| config_error("truth file needs one complete row"))?;
    // reorder columns to the catalog's item order
    let ranks =
        catalog.labels().iter().map(|l| m.catalog.position(l).map(|i| row.rank(i))).collect::<Result<Vec<_>, _>>()?;
    Ok(Ranking::new(ranks)?)
}

#[derive(Debug, Serialize)]
struct ItemSummary {
    item: String,
    mean_rank: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hpdi: Option<(usize, usize, Vec<usize>, f64)>,
}

#[derive(Debug, Serialize)]
struct RankSummary {
    items: Vec<ItemSummary>,
    cp_ordering: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<f64>,
    dominance: Vec<(String, String)>,
}

fn summarize_rankings(
    draws: &[Ranking],
    catalog: &ItemCatalog,
    args: &SummarizeArgs,
    truth: Option<&Ranking>,
) -> Result<(RankSummary, String), Error> {
    let m = marginal_rank_matrix(draws)?;
    let top = args.top_t.map(|t| top_t_probability(draws, t)).transpose()?;
    let items = (0..catalog.len())
        .map(|i| {
            let mean_rank = m.row(i).iter().enumerate().map(|(k, p)| (k + 1) as f64 * p).sum();
            let hpdi = args
                .hpdi
                .map(|level| hpdi_for_item(&m, i, level).map(|s| (s.interval().0, s.interval().1, s.ranks, s.mass)))
                .transpose()?;
            Ok(ItemSummary { item: catalog.label(i).into(), mean_rank, top_t: top.as_ref().map(|t| t[i]), hpdi })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let cp = cp_ordering(&m).iter().map(|e| (catalog.label(e.item).to_string(), e.cumulative)).collect();
    let trace = truth.map(|t| trace_statistic(&m, t)).transpose()?;
    let dom = dominance_matrix(draws)?;
    let mut dominance = Vec::new();
    for i in 0..catalog.len() {
        for j in 0..catalog.len() {
            if dom.dominates[i][j] {
                dominance.push((catalog.label(i).to_string(), catalog.label(j).to_string()));
            }
        }
    }
    Ok((RankSummary { items, cp_ordering: cp, trace, dominance }, m.heat_map_text()))
}

fn summarize(args: &SummarizeArgs, argv: &[String]) -> Result<Manifest, Error> {
    let file = SampleFile::load(&args.samples)?;
    let catalog = &file.catalog;
    let truth = args.truth.as_deref().map(|p| load_truth(p, catalog)).transpose()?;
    let mut out = Outputs::new(&args.out)?;
    match &file.samples {
        SampleSet::Static(s) => {
            let (summary, heat) = summarize_rankings(&s.rho, catalog, args, truth.as_ref())?;
            #[derive(Serialize)]
            struct Static {
                draws: usize,
                alpha_mean: f64,
                posterior_mode: Option<String>,
                summary: RankSummary,
            }
            let mode = s.posterior_mode().map(|r| r.to_string());
            out.write_json(
                "summary.json",
                &Static { draws: s.len(), alpha_mean: s.alpha_mean(), posterior_mode: mode, summary },
            )?;
            out.write("heat.txt", &heat)?;
        }
        SampleSet::Mixture(s) => {
            let mut clusters = Vec::new();
            for c in 0..s.clusters() {
                let draws: Vec<Ranking> = s.rho.iter().map(|r| r[c].clone()).collect();
                let (summary, heat) = summarize_rankings(&draws, catalog, args, truth.as_ref())?;
                let alpha_mean = s.alpha.iter().map(|a| a[c]).sum::<f64>() / s.len().max(1) as f64;
                let tau_mean = s.tau.iter().map(|t| t[c]).sum::<f64>() / s.len().max(1) as f64;
                clusters.push((alpha_mean, tau_mean, summary));
                out.write(&format!("heat_cluster{}.txt", c + 1), &heat)?;
            }
            #[derive(Serialize)]
            struct Mixture {
                draws: usize,
                map_labels: Vec<usize>,
                clusters: Vec<(f64, f64, RankSummary)>,
            }
            let map_labels = s.map_labels().iter().map(|c| c + 1).collect();
            out.write_json("summary.json", &Mixture { draws: s.len(), map_labels, clusters })?;
        }
        SampleSet::Dynamic(s) => {
            let mut slices = Vec::new();
            for t in 0..s.slices() {
                let draws: Vec<Ranking> = s.rho.iter().map(|r| r[t].clone()).collect();
                let (summary, heat) = summarize_rankings(&draws, catalog, args, truth.as_ref())?;
                slices.push(summary);
                out.write(&format!("heat_slice{t}.txt"), &heat)?;
            }
            let mut traj = String::from("slice");
            for l in catalog.labels() {
                traj.push(',');
                traj.push_str(l);
            }
            traj.push('\n');
            for (t, row) in s.mean_rank_trajectories().iter().enumerate() {
                traj.push_str(&t.to_string());
                for v in row {
                    traj.push(',');
                    traj.push_str(&v.to_string());
                }
                traj.push('\n');
            }
            out.write("trajectories.csv", &traj)?;
            #[derive(Serialize)]
            struct Dynamic {
                draws: usize,
                beta_mean: f64,
                slices: Vec<RankSummary>,
            }
            let beta_mean = s.beta.iter().sum::<f64>() / s.len().max(1) as f64;
            out.write_json("summary.json", &Dynamic { draws: s.len(), beta_mean, slices })?;
        }
    }
    out.finish(argv)
}

fn predict(args: &PredictArgs, argv: &[String]) -> Result<Manifest, Error> {
    let file = SampleFile::load(&args.samples)?;
    let augmented = match &file.samples {
        SampleSet::Static(s) => &s.augmented,
        SampleSet::Mixture(s) => &s.augmented,
        SampleSet::Dynamic(_) => return Err(config_error("predict needs a static or mixture sample file")),
    };
    if augmented.is_empty() {
        return Err(config_error("sample file has no augmented rankings; fit with --record-augmented true"));
    }
    let j = args.assessor.checked_sub(1).ok_or_else(|| config_error("assessors are numbered from 1"))?;
    let a = file.catalog.position(&args.a)?;
    let b = file.catalog.position(&args.b)?;
    let probability = preference_predictive(augmented, j, a, b)?;
    println!("{probability}");
    let mut out = Outputs::new(&args.out)?;
    #[derive(Serialize)]
    struct Prediction<'a> {
        assessor: usize,
        less_preferred: &'a str,
        more_preferred: &'a str,
        probability: f64,
    }
    out.write_json(
        "prediction.json",
        &Prediction { assessor: args.assessor, less_preferred: &args.a, more_preferred: &args.b, probability },
    )?;
    out.finish(argv)
}

fn classify_cmd(args: &ClassifyArgs, argv: &[String]) -> Result<Manifest, Error> {
    let cfg = load_config(args.common.config.as_deref())?;
    let train = load_rank_matrix(&args.train)?;
    let test = load_rank_matrix(&args.test)?;
    if test.catalog != train.catalog {
        return Err(config_error("training and test files must list the same items in the same order"));
    }
    let names = parse_labels(&read_file(&args.labels)?);
    let mut classes: Vec<String> = Vec::new();
    let labels: Vec<usize> = names
        .iter()
        .map(|l| match classes.iter().position(|c| c == l) {
            Some(k) => k,
            None => {
                classes.push(l.clone());
                classes.len() - 1
            }
        })
        .collect();
    let n = train.catalog.len();
    let r = resolve(&args.common, &cfg, n)?;
    let table = load_table(&r.table, n, r.metric)?;
    let priors = MixturePriors::new(r.lambda, args.psi.or(cfg.mixture.psi).unwrap_or(2.0), classes.len().max(1))?;
    let model = if args.per_class_alpha { ClassAlpha::PerClass } else { ClassAlpha::Shared };
    let to_data = |m: crate::io::RankMatrix| m.rows.into_iter().map(AssessorData::Partial).collect::<Vec<_>>();
    let result = classify(
        &to_data(train),
        &labels,
        &to_data(test),
        classes.len(),
        r.metric,
        &priors,
        &r.tuning,
        &table,
        model,
        &r.augment,
    )?;
    let mut csv = String::from("assessor");
    for c in &classes {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push_str(",map\n");
    for (j, (p, &m)) in result.probabilities.iter().zip(&result.map).enumerate() {
        csv.push_str(&(j + 1).to_string());
        for v in p {
            csv.push(',');
            csv.push_str(&v.to_string());
        }
        csv.push(',');
        csv.push_str(&classes[m]);
        csv.push('\n');
    }
    let mut out = Outputs::new(&args.common.out)?;
    out.write_json("config.json", &(&r, &priors, model))?;
    out.write("classification.csv", &csv)?;
    out.write_json("acceptance.json", &result.stats)?;
    out.finish(argv)
}

fn simulate(args: &SimulateArgs, argv: &[String]) -> Result<Manifest, Error> {
    let (catalog, truth) = match (&args.truth, args.n) {
        (Some(path), _) => {
            let m = load_rank_matrix(path)?;
            let truth = load_truth(path, &m.catalog)?;
            (m.catalog, truth)
        }
        (None, Some(n)) => (ItemCatalog::numbered(n)?, Ranking::identity(n)),
        (None, None) => return Err(config_error("give --truth or --n")),
    };
    let rankings = match (args.moves, args.alpha) {
        (Some(moves), None) => {
            let max_leap = truth.len().div_ceil(2).max(1);
            if args.leap == 0 || args.leap > max_leap {
                return Err(config_error(format!("--leap must lie in 1..={max_leap}")));
            }
            generate_by_perturbation(&truth, args.count, moves, args.leap, args.seed)
        }
        (None, Some(alpha)) if alpha >= 0.0 => {
            sample_mallows(&truth, alpha, parse_metric(args.metric.as_deref())?, args.count, args.seed)
        }
        _ => return Err(config_error("give exactly one of --moves and a nonnegative --alpha")),
    };
    let mut out = Outputs::new(&args.out)?;
    out.write("data.csv", &write_rank_matrix(&catalog, &rankings)?)?;
    out.write("truth.csv", &write_rank_matrix(&catalog, std::slice::from_ref(&truth))?)?;
    out.finish(argv)
}

fn rerun(args: &RerunArgs) -> Result<Manifest, Error> {
    let text = read_file(&args.manifest)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(crate::io::IoError::from)?;
    let mut argv = manifest.argv.clone();
    if let Some(dir) = &args.out {
        let pos = argv.iter().position(|a| a == "--out").ok_or_else(|| config_error("manifest has no --out"))?;
        argv[pos + 1] = dir.to_string_lossy().into_owned();
    }
    let cli = Cli::try_parse_from(std::iter::once("mallows".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| config_error(e.to_string()))?;
    let fresh = execute(&cli, &argv)?.ok_or_else(|| config_error("command writes no outputs"))?;
    let differing: Vec<&String> = manifest
        .outputs
        .iter()
        .filter(|(name, hash)| fresh.outputs.get(*name) != Some(*hash))
        .map(|(name, _)| name)
        .collect();
    if differing.is_empty() {
        println!("identical: {} files", manifest.outputs.len());
        Ok(fresh)
    } else {
        Err(config_error(format!("outputs differ: {differing:?}")))
    }
}

/// Runs one parsed command. `argv` (without the program name) is recorded
/// in the manifest.
pub fn execute(cli: &Cli, argv: &[String]) -> Result<Option<Manifest>, Error> {
    match &cli.command {
        Command::Table(TableCommand::Build(a)) => table_build(a, argv).map(Some),
        Command::Table(TableCommand::Check(a)) => table_check(a, argv),
        Command::Fit(a) => fit(a, argv).map(Some),
        Command::FitMixture(a) => fit_mixture(a, argv).map(Some),
        Command::FitDynamic(a) => fit_dynamic(a, argv).map(Some),
        Command::Summarize(a) => summarize(a, argv).map(Some),
        Command::Predict(a) => predict(a, argv).map(Some),
        Command::Classify(a) => classify_cmd(a, argv).map(Some),
        Command::Simulate(a) => simulate(a, argv).map(Some),
        Command::Rerun(a) => rerun(a).map(Some),
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, &args[1.min(args.len())..]) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
