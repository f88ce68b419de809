//! File formats: rank matrices, pairwise preferences, timed rankings and
//! posterior sample files.
//!
//! Items are addressed by label in every file and by index in memory.
//! Sample files are plain text: `# key=value` header lines followed by one
//! tab-separated row per retained iteration, rankings written as
//! space-separated ranks. Floats use the shortest representation that parses
//! back to the same value, so files round-trip exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::augment::{AssessorData, AugmentError, PartialRanking, TieSet};
use crate::dynamics::{DynamicSamples, TimedData};
use crate::mixture::MixtureSamples;
use crate::rank::{
    transitive_closure, ItemCatalog, Metric, PreferenceConstraintSet, PreferencePair, RankError, Ranking,
};
use crate::sampler::PosteriorSamples;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: cannot read {value:?} as a rank")]
    Cell { row: usize, column: String, value: String },
    #[error("row {row}: rank {value} appears more than once")]
    DuplicateRank { row: usize, value: usize },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}: {source}")]
    Row { row: usize, source: AugmentError },
    #[error("bad header: {0}")]
    Header(String),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error("assessor {assessor}: preferences form a cycle {}", .cycle.join(" < "))]
    Cycle { assessor: String, cycle: Vec<String> },
    #[error("sample file line {line}: {message}")]
    Samples { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IoError {
    fn samples(line: usize, message: impl Into<String>) -> Self {
        Self::Samples { line, message: message.into() }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

/// Parsed rank matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMatrix {
    pub catalog: ItemCatalog,
    pub rows: Vec<PartialRanking>,
}

impl RankMatrix {
    /// Number of missing cells.
    pub fn missing(&self) -> usize {
        self.rows.iter().map(|r| r.missing_items().len()).sum()
    }

    /// The rows as complete rankings, if none has missing entries.
    pub fn complete_rows(&self) -> Option<Vec<Ranking>> {
        self.rows
            .iter()
            .map(|r| r.entries().iter().copied().collect::<Option<Vec<usize>>>().map(Ranking::from_vec_unchecked))
            .collect()
    }
}

/// Raw cells of one row: `None` for missing.
fn parse_cells(
    record: &csv::StringRecord,
    header: &[String],
    row: usize,
    skip: usize,
) -> Result<Vec<Option<usize>>, IoError> {
    let expected = header.len() + skip;
    if record.len() != expected {
        return Err(IoError::Ragged { row, expected, found: record.len() });
    }
    record
        .iter()
        .skip(skip)
        .zip(header)
        .map(|(cell, column)| {
            if is_missing(cell) {
                Ok(None)
            } else {
                cell.parse::<usize>().map(Some).map_err(|_| IoError::Cell {
                    row,
                    column: column.clone(),
                    value: cell.to_string(),
                })
            }
        })
        .collect()
}

fn partial_row(cells: Vec<Option<usize>>, row: usize) -> Result<PartialRanking, IoError> {
    let mut seen = BTreeMap::new();
    for &v in cells.iter().flatten() {
        if seen.insert(v, ()).is_some() {
            return Err(IoError::DuplicateRank { row, value: v });
        }
    }
    PartialRanking::new(cells).map_err(|source| IoError::Row { row, source })
}

/// Parses a rank matrix: header of item labels, one row per assessor,
/// integer ranks, `NA` or empty for missing. Rows are numbered from 1.
pub fn parse_rank_matrix(text: &str) -> Result<RankMatrix, IoError> {
    let mut rdr = reader(text);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let catalog = ItemCatalog::new(header.clone())?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let cells = parse_cells(&record?, &header, row, 0)?;
        rows.push(partial_row(cells, row)?);
    }
    Ok(RankMatrix { catalog, rows })
}

pub fn load_rank_matrix(path: impl AsRef<Path>) -> Result<RankMatrix, IoError> {
    parse_rank_matrix(&read_file(path.as_ref())?)
}

/// Like [`parse_rank_matrix`], but repeated values in a row are read as ties.
pub fn parse_rank_matrix_with_ties(text: &str) -> Result<(ItemCatalog, Vec<AssessorData>), IoError> {
    let mut rdr = reader(text);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let catalog = ItemCatalog::new(header.clone())?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        rows.push(assessor_row(parse_cells(&record?, &header, row, 0)?, row)?);
    }
    Ok((catalog, rows))
}

/// A row with repeated values becomes a tie set, otherwise a partial ranking.
fn assessor_row(cells: Vec<Option<usize>>, row: usize) -> Result<AssessorData, IoError> {
    let mut values: Vec<usize> = cells.iter().flatten().copied().collect();
    values.sort_unstable();
    let has_repeats = values.windows(2).any(|w| w[0] == w[1]);
    if !has_repeats {
        return Ok(AssessorData::Partial(partial_row(cells, row)?));
    }
    let full: Option<Vec<usize>> = cells.into_iter().collect();
    let Some(full) = full else {
        return Err(IoError::Header(format!("row {row}: ties cannot be combined with missing ranks")));
    };
    TieSet::from_rank_values(&full).map(AssessorData::Ties).map_err(|source| IoError::Row { row, source })
}

pub fn write_rank_matrix(catalog: &ItemCatalog, rankings: &[Ranking]) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(catalog.labels())?;
    for r in rankings {
        w.write_record(r.ranks().iter().map(usize::to_string))?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Header(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// One column of labels, with or without a `label` header.
pub fn parse_labels(text: &str) -> Vec<String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
    if lines.peek().is_some_and(|l| l.eq_ignore_ascii_case("label") || l.eq_ignore_ascii_case("item")) {
        lines.next();
    }
    lines.map(str::to_string).collect()
}

/// Preferences per assessor, in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceData {
    pub catalog: ItemCatalog,
    pub assessors: Vec<PreferenceConstraintSet>,
}

/// Parses `assessor_id,less_preferred,more_preferred` rows and closes each
/// assessor's preferences under transitivity. Without a catalog, items are
/// numbered in order of first appearance.
pub fn parse_preferences(text: &str, catalog: Option<&ItemCatalog>) -> Result<PreferenceData, IoError> {
    let mut rdr = reader(text);
    let mut labels: Vec<String> = catalog.map(|c| c.labels().to_vec()).unwrap_or_default();
    let mut index: BTreeMap<String, usize> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
    let mut groups: Vec<(String, Vec<PreferencePair>)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != 3 {
            return Err(IoError::Ragged { row, expected: 3, found: record.len() });
        }
        let mut item = |label: &str| -> Result<usize, IoError> {
            if let Some(&k) = index.get(label) {
                return Ok(k);
            }
            if catalog.is_some() {
                return Err(RankError::UnknownLabel(label.to_string()).into());
            }
            labels.push(label.to_string());
            index.insert(label.to_string(), labels.len() - 1);
            Ok(labels.len() - 1)
        };
        let lower = item(&record[1])?;
        let upper = item(&record[2])?;
        let pair = PreferencePair::new(lower, upper)?;
        match groups.iter_mut().find(|(a, _)| a == &record[0]) {
            Some((_, pairs)) => pairs.push(pair),
            None => groups.push((record[0].to_string(), vec![pair])),
        }
    }
    let catalog = match catalog {
        Some(c) => c.clone(),
        None if labels.is_empty() => {
            return Ok(PreferenceData { catalog: ItemCatalog::numbered(1)?, assessors: vec![] })
        }
        None => ItemCatalog::new(labels)?,
    };
    let assessors = groups
        .into_iter()
        .map(|(assessor, pairs)| match transitive_closure(pairs) {
            Ok(set) => Ok(set.with_assessor(assessor)),
            Err(RankError::Cycle(items)) => {
                Err(IoError::Cycle { assessor, cycle: items.iter().map(|&i| catalog.label(i).to_string()).collect() })
            }
            Err(e) => Err(e.into()),
        })
        .collect::<Result<_, _>>()?;
    Ok(PreferenceData { catalog, assessors })
}

pub fn load_preferences(path: impl AsRef<Path>, catalog: Option<&ItemCatalog>) -> Result<PreferenceData, IoError> {
    parse_preferences(&read_file(path.as_ref())?, catalog)
}

/// Timed rankings: slices `start..=start + T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedRanks {
    pub catalog: ItemCatalog,
    pub start: i64,
    pub data: TimedData,
}

/// Parses a rank matrix with a leading integer time column. Rows are sorted
/// stably by time; time points without rows become empty slices. Repeated
/// values within a row are read as ties.
pub fn parse_timed_ranks(text: &str) -> Result<TimedRanks, IoError> {
    let mut rdr = reader(text);
    let full_header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if full_header.len() < 2 {
        return Err(IoError::Header("expected a time column followed by item labels".into()));
    }
    let header = full_header[1..].to_vec();
    let catalog = ItemCatalog::new(header.clone())?;
    let mut rows: Vec<(i64, AssessorData)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let time = record.get(0).unwrap_or("");
        let t: i64 =
            time.parse().map_err(|_| IoError::Cell { row, column: full_header[0].clone(), value: time.to_string() })?;
        rows.push((t, assessor_row(parse_cells(&record, &header, row, 1)?, row)?));
    }
    rows.sort_by_key(|(t, _)| *t);
    let start = rows.first().map_or(0, |r| r.0);
    let end = rows.last().map_or(0, |r| r.0);
    let mut slices: Vec<Vec<AssessorData>> = vec![Vec::new(); (end - start + 1) as usize];
    for (t, d) in rows {
        slices[(t - start) as usize].push(d);
    }
    Ok(TimedRanks { catalog, start, data: TimedData::new(slices) })
}

pub fn load_timed_ranks(path: impl AsRef<Path>) -> Result<TimedRanks, IoError> {
    parse_timed_ranks(&read_file(path.as_ref())?)
}

/// Posterior draws of any model, as stored in a sample file.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSet {
    Static(PosteriorSamples),
    Mixture(MixtureSamples),
    Dynamic(DynamicSamples),
}

impl SampleSet {
    pub fn model(&self) -> &'static str {
        match self {
            Self::Static(_) => "static",
            Self::Mixture(_) => "mixture",
            Self::Dynamic(_) => "dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub catalog: ItemCatalog,
    pub samples: SampleSet,
}

fn ranks_text(r: &Ranking) -> String {
    r.to_string()
}

fn many_ranks_text(rs: &[Ranking]) -> String {
    rs.iter().map(ranks_text).collect::<Vec<_>>().join(";")
}

fn floats_text(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join("\t")
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

impl SampleFile {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# mallows posterior samples\n");
        let mut head = |k: &str, v: String| {
            writeln!(out, "# {k}={v}").expect("writing to a string");
        };
        head("model", self.samples.model().into());
        head("items", json(&self.catalog.labels()));
        let (metric, n) = match &self.samples {
            SampleSet::Static(s) => (s.metric, s.n),
            SampleSet::Mixture(s) => (s.metric, s.n),
            SampleSet::Dynamic(s) => (s.metric, s.n),
        };
        head("metric", metric.name().into());
        head("n", n.to_string());
        let mut rows = String::new();
        match &self.samples {
            SampleSet::Static(s) => {
                head("priors", json(&s.priors));
                head("tuning", json(&s.tuning));
                head("acceptance", json(&s.stats));
                head("augmented", (!s.augmented.is_empty()).to_string());
                let mut columns = vec!["iteration", "alpha", "rho"];
                if !s.augmented.is_empty() {
                    columns.push("augmented");
                }
                rows.push_str(&columns.join("\t"));
                rows.push('\n');
                for i in 0..s.len() {
                    write!(rows, "{}\t{}\t{}", s.iterations[i], s.alpha[i], ranks_text(&s.rho[i])).expect("string");
                    if let Some(a) = s.augmented.get(i) {
                        write!(rows, "\t{}", many_ranks_text(a)).expect("string");
                    }
                    rows.push('\n');
                }
            }
            SampleSet::Mixture(s) => {
                head("priors", json(&s.priors));
                head("tuning", json(&s.tuning));
                head("acceptance", json(&s.stats));
                head("augmented", (!s.augmented.is_empty()).to_string());
                let c = s.clusters();
                let mut columns = vec!["iteration".to_string()];
                columns.extend((1..=c).map(|k| format!("alpha_{k}")));
                columns.extend((1..=c).map(|k| format!("tau_{k}")));
                columns.extend((1..=c).map(|k| format!("rho_{k}")));
                columns.push("z".into());
                if !s.augmented.is_empty() {
                    columns.push("augmented".into());
                }
                rows.push_str(&columns.join("\t"));
                rows.push('\n');
                for i in 0..s.len() {
                    write!(rows, "{}\t{}\t{}", s.iterations[i], floats_text(&s.alpha[i]), floats_text(&s.tau[i]))
                        .expect("string");
                    for r in &s.rho[i] {
                        write!(rows, "\t{}", ranks_text(r)).expect("string");
                    }
                    let z: Vec<String> = s.z[i].iter().map(|c| (c + 1).to_string()).collect();
                    write!(rows, "\t{}", z.join(" ")).expect("string");
                    if let Some(a) = s.augmented.get(i) {
                        write!(rows, "\t{}", many_ranks_text(a)).expect("string");
                    }
                    rows.push('\n');
                }
            }
            SampleSet::Dynamic(s) => {
                head("hyper", json(&s.hyper));
                head("tuning", json(&s.tuning));
                head("acceptance", json(&s.stats));
                head("beta_acceptance", json(&s.beta_stats));
                head("slices", s.slices().to_string());
                let t = s.slices();
                let mut columns = vec!["iteration".to_string()];
                columns.extend((0..t).map(|k| format!("alpha_{k}")));
                columns.push("beta".into());
                columns.push("sigma2".into());
                columns.extend((0..t).map(|k| format!("rho_{k}")));
                rows.push_str(&columns.join("\t"));
                rows.push('\n');
                for i in 0..s.len() {
                    write!(rows, "{}\t{}\t{}\t{}", s.iterations[i], floats_text(&s.alpha[i]), s.beta[i], s.sigma2[i])
                        .expect("string");
                    for r in &s.rho[i] {
                        write!(rows, "\t{}", ranks_text(r)).expect("string");
                    }
                    rows.push('\n');
                }
            }
        }
        out.push_str(&rows);
        out
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut body = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("# ") {
                if let Some((k, v)) = rest.split_once('=') {
                    header.insert(k.to_string(), v.to_string());
                }
            } else if !line.is_empty() {
                body.push((i + 1, line));
            }
        }
        let get = |k: &str| header.get(k).ok_or_else(|| IoError::samples(0, format!("missing header key {k}")));
        fn from_json<T: DeserializeOwned>(s: &str) -> Result<T, IoError> {
            Ok(serde_json::from_str(s)?)
        }
        let labels: Vec<String> = from_json(get("items")?)?;
        let catalog = ItemCatalog::new(labels)?;
        let metric = Metric::from_str(get("metric")?)?;
        let n: usize = parse_field(get("n")?, 0)?;
        let rows = body.get(1..).unwrap_or_default();
        let samples = match get("model")?.as_str() {
            "static" => {
                let mut s = PosteriorSamples {
                    n,
                    metric,
                    priors: from_json(get("priors")?)?,
                    tuning: from_json(get("tuning")?)?,
                    iterations: vec![],
                    alpha: vec![],
                    rho: vec![],
                    augmented: vec![],
                    stats: from_json(get("acceptance")?)?,
                };
                let augmented = get("augmented")? == "true";
                for &(line, text) in rows {
                    let f: Vec<&str> = text.split('\t').collect();
                    expect_fields(&f, 3 + augmented as usize, line)?;
                    s.iterations.push(parse_field(f[0], line)?);
                    s.alpha.push(parse_field(f[1], line)?);
                    s.rho.push(parse_ranking(f[2], n, line)?);
                    if augmented {
                        s.augmented.push(parse_many(f[3], n, line)?);
                    }
                }
                SampleSet::Static(s)
            }
            "mixture" => {
                let priors: crate::mixture::MixturePriors = from_json(get("priors")?)?;
                let c = priors.clusters;
                let augmented = get("augmented")? == "true";
                let mut s = MixtureSamples {
                    n,
                    metric,
                    priors,
                    tuning: from_json(get("tuning")?)?,
                    iterations: vec![],
                    alpha: vec![],
                    rho: vec![],
                    tau: vec![],
                    z: vec![],
                    augmented: vec![],
                    stats: from_json(get("acceptance")?)?,
                };
                for &(line, text) in rows {
                    let f: Vec<&str> = text.split('\t').collect();
                    expect_fields(&f, 2 + 3 * c + augmented as usize, line)?;
                    s.iterations.push(parse_field(f[0], line)?);
                    s.alpha.push(f[1..1 + c].iter().map(|x| parse_field(x, line)).collect::<Result<_, _>>()?);
                    s.tau.push(f[1 + c..1 + 2 * c].iter().map(|x| parse_field(x, line)).collect::<Result<_, _>>()?);
                    s.rho.push(
                        f[1 + 2 * c..1 + 3 * c].iter().map(|x| parse_ranking(x, n, line)).collect::<Result<_, _>>()?,
                    );
                    let z: Vec<usize> = f[1 + 3 * c]
                        .split_whitespace()
                        .map(|x| parse_field::<usize>(x, line).map(|v| v.wrapping_sub(1)))
                        .collect::<Result<_, _>>()?;
                    if z.iter().any(|&k| k >= c) {
                        return Err(IoError::samples(line, "cluster label out of range"));
                    }
                    s.z.push(z);
                    if augmented {
                        s.augmented.push(parse_many(f[2 + 3 * c], n, line)?);
                    }
                }
                SampleSet::Mixture(s)
            }
            "dynamic" => {
                let t: usize = parse_field(get("slices")?, 0)?;
                let mut s = DynamicSamples {
                    n,
                    metric,
                    hyper: from_json(get("hyper")?)?,
                    tuning: from_json(get("tuning")?)?,
                    iterations: vec![],
                    alpha: vec![],
                    rho: vec![],
                    beta: vec![],
                    sigma2: vec![],
                    stats: from_json(get("acceptance")?)?,
                    beta_stats: from_json(get("beta_acceptance")?)?,
                };
                for &(line, text) in rows {
                    let f: Vec<&str> = text.split('\t').collect();
                    expect_fields(&f, 3 + 2 * t, line)?;
                    s.iterations.push(parse_field(f[0], line)?);
                    s.alpha.push(f[1..1 + t].iter().map(|x| parse_field(x, line)).collect::<Result<_, _>>()?);
                    s.beta.push(parse_field(f[1 + t], line)?);
                    s.sigma2.push(parse_field(f[2 + t], line)?);
                    s.rho
                        .push(f[3 + t..3 + 2 * t].iter().map(|x| parse_ranking(x, n, line)).collect::<Result<_, _>>()?);
                }
                SampleSet::Dynamic(s)
            }
            other => return Err(IoError::samples(0, format!("unknown model {other:?}"))),
        };
        Ok(Self { catalog, samples })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        write_file(path.as_ref(), &self.to_text())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        Self::parse(&read_file(path.as_ref())?)
    }
}

fn expect_fields(f: &[&str], expected: usize, line: usize) -> Result<(), IoError> {
    if f.len() == expected {
        Ok(())
    } else {
        Err(IoError::samples(line, format!("expected {expected} fields, found {}", f.len())))
    }
}

fn parse_field<T: FromStr>(s: &str, line: usize) -> Result<T, IoError> {
    s.trim().parse().map_err(|_| IoError::samples(line, format!("cannot parse {s:?}")))
}

fn parse_ranking(s: &str, n: usize, line: usize) -> Result<Ranking, IoError> {
    let ranks: Vec<usize> = s.split_whitespace().map(|x| parse_field(x, line)).collect::<Result<_, _>>()?;
    if ranks.len() != n {
        return Err(IoError::samples(line, format!("ranking has {} entries, expected {n}", ranks.len())));
    }
    Ranking::new(ranks).map_err(|e| IoError::samples(line, e.to_string()))
}

fn parse_many(s: &str, n: usize, line: usize) -> Result<Vec<Ranking>, IoError> {
    s.split(';').map(|x| parse_ranking(x, n, line)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_matrix_with_missing() {
        let m = parse_rank_matrix("a,b,c\n1,2,3\nNA,NA,NA\n2,NA,1\n").unwrap();
        assert_eq!(m.rows.len(), 3);
        assert_eq!(m.missing(), 4);
        assert!(m.rows[1].observed_items().is_empty());
        assert!(m.complete_rows().is_none());
    }

    #[test]
    fn duplicate_rank_names_row_and_value() {
        let err = parse_rank_matrix("a,b,c\n1,2,3\n3,1,3\n").unwrap_err();
        assert!(matches!(err, IoError::DuplicateRank { row: 2, value: 3 }), "{err}");
        assert!(err.to_string().contains("row 2") && err.to_string().contains("rank 3"));
    }

    #[test]
    fn bad_cells_and_ragged_rows() {
        assert!(matches!(parse_rank_matrix("a,b\n1,x\n"), Err(IoError::Cell { row: 1, .. })));
        assert!(matches!(parse_rank_matrix("a,b\n1,2,3\n"), Err(IoError::Ragged { row: 1, .. })));
        assert!(matches!(parse_rank_matrix("a,b\n1.5,2\n"), Err(IoError::Cell { .. })));
    }

    #[test]
    fn preferences_closure_example() {
        let text = "assessor_id,less_preferred,more_preferred\n1,A1,A2\n1,A2,A5\n1,A4,A5\n";
        let catalog = ItemCatalog::new(["A1", "A2", "A3", "A4", "A5"]).unwrap();
        let p = parse_preferences(text, Some(&catalog)).unwrap();
        assert_eq!(p.assessors.len(), 1);
        assert_eq!(p.assessors[0].len(), 4);
        assert!(p.assessors[0].contains(0, 4));
        assert_eq!(p.assessors[0].assessor(), "1");
    }

    #[test]
    fn preferences_empty_and_cyclic() {
        assert!(parse_preferences("", None).unwrap().assessors.is_empty());
        assert!(parse_preferences("assessor_id,less_preferred,more_preferred\n", None).unwrap().assessors.is_empty());
        let err = parse_preferences("assessor_id,less_preferred,more_preferred\n7,a,b\n7,b,a\n", None).unwrap_err();
        let IoError::Cycle { assessor, cycle } = &err else { panic!("{err}") };
        assert_eq!(assessor, "7");
        assert_eq!(cycle.first(), cycle.last());
    }

    #[test]
    fn preferences_unknown_label() {
        let catalog = ItemCatalog::new(["a", "b"]).unwrap();
        assert!(matches!(
            parse_preferences("x,y,z\n1,a,c\n", Some(&catalog)),
            Err(IoError::Rank(RankError::UnknownLabel(_)))
        ));
    }

    #[test]
    fn timed_sorting_gaps_and_ties() {
        let text = "t,a,b,c\n2,1,2,3\n0,3,2,1\n2,1,1,3\n0,1,2,3\n";
        let t = parse_timed_ranks(text).unwrap();
        assert_eq!(t.start, 0);
        assert_eq!(t.data.counts(), vec![2, 0, 2]);
        // stable: the first t=0 row in the file stays first
        assert_eq!(
            t.data.slices[0][0],
            AssessorData::Partial(PartialRanking::new(vec![Some(3), Some(2), Some(1)]).unwrap())
        );
        assert!(matches!(&t.data.slices[2][1], AssessorData::Ties(ts) if ts.has_ties()));
    }

    #[test]
    fn labels_with_and_without_header() {
        assert_eq!(parse_labels("label\nx\ny\n"), vec!["x", "y"]);
        assert_eq!(parse_labels("x\n\ny\n"), vec!["x", "y"]);
    }

    #[test]
    fn rank_matrix_writer_round_trip() {
        let catalog = ItemCatalog::new(["p", "q", "r"]).unwrap();
        let rs = vec![Ranking::new(vec![2, 1, 3]).unwrap(), Ranking::new(vec![3, 2, 1]).unwrap()];
        let text = write_rank_matrix(&catalog, &rs).unwrap();
        let back = parse_rank_matrix(&text).unwrap();
        assert_eq!(back.catalog, catalog);
        assert_eq!(back.complete_rows().unwrap(), rs);
    }
}
