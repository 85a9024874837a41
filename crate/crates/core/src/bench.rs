//! Benchmark harness: load a question set, run repair sessions, execute the
//! validated queries and score them against expected answers.
//!
//! Scores follow execution accuracy: a run is accurate when its result table
//! matches the expected one up to column order and labels. Runs that end
//! without a validated query are unknown. Runs that cannot be scored (no
//! expected answer, or a query the executor cannot run) are kept and counted
//! separately instead of silently shrinking the denominator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{
    evaluate, load_answer, results_match, AnswerError, Dataset, ExecError, ExternalExecutor,
    ResultTable,
};
use crate::rdf::{Ontology, RdfError};
use crate::repair::{
    EndpointError, Outcome, RepairSession, Repairer, RewriterEndpoint, ScriptedMock,
    DEFAULT_CYCLE_LIMIT,
};
use crate::rules::{CheckConfig, RuleId};
use crate::sparql::parse_query_with_prefixes;
use crate::validate::Validator;

mod report;

pub use report::{parse_report_csv, render_report, Format, ReportParseError};

/// Question complexity crossed with schema complexity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    LowQLowS,
    HighQLowS,
    LowQHighS,
    HighQHighS,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Quadrant::LowQLowS,
        Quadrant::HighQLowS,
        Quadrant::LowQHighS,
        Quadrant::HighQHighS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quadrant::LowQLowS => "LowQLowS",
            Quadrant::HighQLowS => "HighQLowS",
            Quadrant::LowQHighS => "LowQHighS",
            Quadrant::HighQHighS => "HighQHighS",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quadrant::LowQLowS => "Low Question / Low Schema",
            Quadrant::HighQLowS => "High Question / Low Schema",
            Quadrant::LowQHighS => "Low Question / High Schema",
            Quadrant::HighQHighS => "High Question / High Schema",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quadrant {
    type Err = String;

    /// Accepts the short names and the long labels, ignoring case, spaces
    /// and punctuation.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = |text: &str| {
            text.chars()
                .filter(char::is_ascii_alphanumeric)
                .collect::<String>()
                .to_ascii_lowercase()
        };
        let wanted = key(s);
        Quadrant::ALL
            .into_iter()
            .find(|q| key(q.name()) == wanted || key(q.label()) == wanted)
            .ok_or_else(|| format!("unknown quadrant '{s}'"))
    }
}

#[derive(Error, Debug)]
pub enum ManifestError {
    #[error("no manifest.json or manifest.csv in {0}")]
    NotFound(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed manifest: {0}")]
    Malformed(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("ontology {path}: {source}")]
    Ontology { path: String, source: RdfError },
    #[error("data {path}: {source}")]
    Data { path: String, source: RdfError },
    #[error("row {row}: answer {path}: {source}")]
    Answer {
        row: usize,
        path: String,
        source: AnswerError,
    },
}

/// An ontology as used by the harness: parsed, plus the exact text pasted
/// into generation prompts.
#[derive(Clone, Debug)]
pub struct LoadedOntology {
    pub reference: String,
    pub text: String,
    pub ontology: Ontology,
}

impl LoadedOntology {
    pub fn from_text(
        reference: impl Into<String>,
        text: impl Into<String>,
    ) -> Result<Self, RdfError> {
        let text = text.into();
        let ontology = Ontology::from_turtle(&text, None)?;
        Ok(LoadedOntology {
            reference: reference.into(),
            text,
            ontology,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkItem {
    pub id: String,
    pub question: String,
    pub quadrant: Quadrant,
    /// Key into [`Benchmark::ontologies`].
    pub ontology_ref: String,
    pub answer_ref: Option<String>,
    /// `None` when the answer is missing; such runs are unscorable.
    pub expected: Option<ResultTable>,
}

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub ontologies: BTreeMap<String, LoadedOntology>,
    pub data: Option<Dataset>,
    pub items: Vec<BenchmarkItem>,
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    id: String,
    question: String,
    quadrant: String,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    ontology: Option<String>,
}

#[derive(Debug, Deserialize)]
struct JsonManifest {
    #[serde(default)]
    ontology: Option<String>,
    #[serde(default)]
    data: Option<String>,
    items: Vec<ManifestRow>,
}

fn read(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|e| ManifestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn non_empty(value: Option<String>) -> Option<String> {
    value.filter(|v| !v.trim().is_empty())
}

/// Load `manifest.json` (preferred) or `manifest.csv` from `dir`.
///
/// The JSON form is `{"ontology": ..., "data": ..., "items": [...]}`; the CSV
/// form has columns `id,question,quadrant[,answer][,ontology]` and takes the
/// default ontology from `ontology.ttl` and data from `data.ttl` when present.
/// Rows are numbered from 1.
pub fn load_benchmark(dir: &Path) -> Result<Benchmark, ManifestError> {
    let json_path = dir.join("manifest.json");
    let csv_path = dir.join("manifest.csv");
    let (default_ontology, data_ref, rows) = if json_path.exists() {
        let manifest: JsonManifest = serde_json::from_str(&read(&json_path)?)
            .map_err(|e| ManifestError::Malformed(e.to_string()))?;
        (manifest.ontology, manifest.data, manifest.items)
    } else if csv_path.exists() {
        let text = read(&csv_path)?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, record) in reader.deserialize::<ManifestRow>().enumerate() {
            rows.push(record.map_err(|e| ManifestError::Row {
                row: i + 1,
                message: e.to_string(),
            })?);
        }
        let default_file = |name: &str| dir.join(name).exists().then(|| name.to_string());
        (default_file("ontology.ttl"), default_file("data.ttl"), rows)
    } else {
        return Err(ManifestError::NotFound(dir.display().to_string()));
    };

    let data = match non_empty(data_ref) {
        Some(r) => {
            let path = dir.join(&r);
            Some(Dataset::load(&path).map_err(|source| ManifestError::Data { path: r, source })?)
        }
        None => None,
    };

    let mut ontologies = BTreeMap::new();
    let mut items = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, row) in rows.into_iter().enumerate() {
        let n = i + 1;
        let row_error = |message: String| ManifestError::Row { row: n, message };
        let quadrant: Quadrant = row.quadrant.parse().map_err(row_error)?;
        if row.id.trim().is_empty() {
            return Err(row_error("empty id".into()));
        }
        if row.question.trim().is_empty() {
            return Err(row_error("empty question".into()));
        }
        if !ids.insert(row.id.clone()) {
            return Err(row_error(format!("duplicate id '{}'", row.id)));
        }
        let ontology_ref = non_empty(row.ontology)
            .or_else(|| non_empty(default_ontology.clone()))
            .ok_or_else(|| row_error("no ontology given".into()))?;
        if !ontologies.contains_key(&ontology_ref) {
            let path = dir.join(&ontology_ref);
            let base = format!("file://{}", path.display());
            let text = read(&path)?;
            let ontology = Ontology::from_turtle(&text, Some(&base)).map_err(|source| {
                ManifestError::Ontology {
                    path: ontology_ref.clone(),
                    source,
                }
            })?;
            let loaded = LoadedOntology {
                reference: ontology_ref.clone(),
                text,
                ontology,
            };
            ontologies.insert(ontology_ref.clone(), loaded);
        }
        let answer_ref = non_empty(row.answer);
        let expected = match &answer_ref {
            Some(r) if dir.join(r).exists() => {
                let prefixes =
                    Validator::new(ontologies[&ontology_ref].ontology.clone()).prefixes();
                let table = load_answer(&dir.join(r), &prefixes).map_err(|source| {
                    ManifestError::Answer {
                        row: n,
                        path: r.clone(),
                        source,
                    }
                })?;
                Some(table)
            }
            _ => None,
        };
        items.push(BenchmarkItem {
            id: row.id,
            question: row.question,
            quadrant,
            ontology_ref,
            answer_ref,
            expected,
        });
    }
    Ok(Benchmark {
        ontologies,
        data,
        items,
    })
}

/// Hands out a rewriter for each run.
pub trait EndpointProvider: Sync {
    fn endpoint(
        &self,
        item: &BenchmarkItem,
        repeat: usize,
    ) -> Result<Box<dyn RewriterEndpoint + '_>, EndpointError>;
}

/// One endpoint shared by every run.
#[derive(Debug)]
pub struct SharedEndpoint<E>(pub E);

impl<E: RewriterEndpoint> EndpointProvider for SharedEndpoint<E> {
    fn endpoint(
        &self,
        _item: &BenchmarkItem,
        _repeat: usize,
    ) -> Result<Box<dyn RewriterEndpoint + '_>, EndpointError> {
        Ok(Box::new(&self.0))
    }
}

/// A fresh [`ScriptedMock`] per run, scripted per item id.
#[derive(Clone, Debug, Default)]
pub struct MockScripts {
    scripts: BTreeMap<String, String>,
}

impl MockScripts {
    /// Scripts in the `---`-separated format of [`ScriptedMock::from_text`].
    pub fn new(scripts: BTreeMap<String, String>) -> Self {
        MockScripts { scripts }
    }

    /// Reads `<item id>.txt` files.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut scripts = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            if let Some(id) = path.file_stem().and_then(|s| s.to_str()) {
                scripts.insert(id.to_string(), std::fs::read_to_string(&path)?);
            }
        }
        Ok(MockScripts { scripts })
    }

    pub fn len(&self) -> usize {
        self.scripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.is_empty()
    }
}

impl EndpointProvider for MockScripts {
    fn endpoint(
        &self,
        item: &BenchmarkItem,
        _repeat: usize,
    ) -> Result<Box<dyn RewriterEndpoint + '_>, EndpointError> {
        let text = self.scripts.get(&item.id).ok_or_else(|| {
            EndpointError::InvalidResponse(format!("no mock script for item '{}'", item.id))
        })?;
        Ok(Box::new(ScriptedMock::from_text(text)))
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub limit: usize,
    pub parallelism: usize,
    pub repeats: usize,
    pub check_config: CheckConfig,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            limit: DEFAULT_CYCLE_LIMIT,
            parallelism: 1,
            repeats: 1,
            check_config: CheckConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Classification {
    AccurateFirstTime,
    AccurateWithRepair,
    Unknown,
    Inaccurate,
    Unscorable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub item_id: String,
    pub quadrant: Quadrant,
    /// Zero-based repetition index.
    pub repeat: usize,
    pub session: RepairSession,
    pub executed: Option<ResultTable>,
    pub classification: Classification,
    /// Why the run is unscorable, or why execution failed.
    pub note: Option<String>,
}

#[derive(Error, Debug)]
pub enum BenchError {
    #[error("unknown ontology '{ontology}' for item '{item}'")]
    UnknownOntology { item: String, ontology: String },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Classify a finished session. Unknown is decided from the session alone;
/// only validated sessions are executed.
pub fn classify(
    session: &RepairSession,
    expected: Option<&ResultTable>,
    run: impl FnOnce(&str) -> Result<ResultTable, ExecError>,
) -> (Classification, Option<ResultTable>, Option<String>) {
    let query = match (session.outcome, session.final_query()) {
        (Outcome::Unknown, _) | (_, None) => {
            return (Classification::Unknown, None, session.error.clone());
        }
        (_, Some(q)) => q,
    };
    let Some(expected) = expected else {
        return (
            Classification::Unscorable,
            None,
            Some("missing expected answer".into()),
        );
    };
    match run(query) {
        Ok(table) => {
            let class = match (results_match(&table, expected), session.outcome) {
                (false, _) => Classification::Inaccurate,
                (true, Outcome::ValidatedFirstTime) => Classification::AccurateFirstTime,
                (true, _) => Classification::AccurateWithRepair,
            };
            (class, Some(table), None)
        }
        Err(e) => (Classification::Unscorable, None, Some(e.to_string())),
    }
}

/// Built-in evaluation over `data`, handing unsupported queries to
/// `external` when one is configured.
fn execute(
    query: &str,
    validator: &Validator,
    data: Option<&Dataset>,
    external: Option<&dyn ExternalExecutor>,
) -> Result<ResultTable, ExecError> {
    let ast = parse_query_with_prefixes(query, &validator.prefixes())
        .map_err(|e| ExecError::External(e.to_string()))?;
    let builtin = match data {
        Some(data) => evaluate(&ast, data),
        None => Err(ExecError::UnsupportedForExecution {
            feature: "no dataset".into(),
        }),
    };
    match (builtin, external) {
        (Err(ExecError::UnsupportedForExecution { .. }), Some(ext)) => {
            ext.execute(&ast.to_sparql())
        }
        (result, _) => result,
    }
}

/// Run every item `opts.repeats` times on a pool of `opts.parallelism`
/// threads. Records come back in item order, repeats adjacent, whatever the
/// parallelism. Per-run failures are recorded, never raised.
pub fn run_benchmark(
    bench: &Benchmark,
    provider: &dyn EndpointProvider,
    external: Option<&dyn ExternalExecutor>,
    opts: &RunOptions,
) -> Result<Vec<RunRecord>, BenchError> {
    let mut repairers = BTreeMap::new();
    for item in &bench.items {
        if repairers.contains_key(&item.ontology_ref) {
            continue;
        }
        let loaded = bench.ontologies.get(&item.ontology_ref).ok_or_else(|| {
            BenchError::UnknownOntology {
                item: item.id.clone(),
                ontology: item.ontology_ref.clone(),
            }
        })?;
        let validator =
            Validator::new(loaded.ontology.clone()).with_config(opts.check_config.clone());
        let repairer = Repairer::new(validator, loaded.text.clone(), loaded.reference.clone())
            .with_limit(opts.limit);
        repairers.insert(item.ontology_ref.clone(), repairer);
    }

    let jobs: Vec<(&BenchmarkItem, usize)> = bench
        .items
        .iter()
        .flat_map(|item| (0..opts.repeats).map(move |r| (item, r)))
        .collect();
    let run_one = |&(item, repeat): &(&BenchmarkItem, usize)| {
        let repairer = &repairers[&item.ontology_ref];
        let session = match provider.endpoint(item, repeat) {
            Ok(endpoint) => repairer.run(&item.question, endpoint.as_ref()),
            Err(e) => RepairSession {
                question: item.question.clone(),
                ontology_ref: item.ontology_ref.clone(),
                cycle_limit: opts.limit,
                cycles: Vec::new(),
                outcome: Outcome::Unknown,
                error: Some(e.to_string()),
            },
        };
        let (classification, executed, note) =
            classify(&session, item.expected.as_ref(), |query| {
                execute(query, &repairer.validator, bench.data.as_ref(), external)
            });
        RunRecord {
            item_id: item.id.clone(),
            quadrant: item.quadrant,
            repeat,
            session,
            executed,
            classification,
            note,
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism.max(1))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(run_one).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Overall,
    Quadrant,
}

/// How the overall row combines runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Every scorable run weighs the same.
    Pooled,
    /// Every quadrant weighs the same.
    Macro,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Pooled => "pooled",
            Aggregation::Macro => "macro",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pooled" | "micro" => Ok(Aggregation::Pooled),
            "macro" => Ok(Aggregation::Macro),
            _ => Err(format!("unknown aggregation '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    /// Runs in the denominator: every run except unscorable ones.
    pub scored: usize,
    pub accurate_first_time: usize,
    pub accurate_with_repair: usize,
    pub unknown: usize,
    pub inaccurate: usize,
    pub unscorable: usize,
}

impl Counts {
    pub fn tally<'a>(classes: impl IntoIterator<Item = &'a Classification>) -> Self {
        let mut c = Counts::default();
        for class in classes {
            match class {
                Classification::AccurateFirstTime => c.accurate_first_time += 1,
                Classification::AccurateWithRepair => c.accurate_with_repair += 1,
                Classification::Unknown => c.unknown += 1,
                Classification::Inaccurate => c.inaccurate += 1,
                Classification::Unscorable => c.unscorable += 1,
            }
        }
        c.scored = c.accurate_first_time + c.accurate_with_repair + c.unknown + c.inaccurate;
        c
    }
}

/// Percentages in 0..=100; `None` where the denominator is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub ea_first_time: Option<f64>,
    pub ea_with_repairs: Option<f64>,
    pub unknown_with_repairs: Option<f64>,
    pub accuracy_plus_unknown: Option<f64>,
    pub error_rate: Option<f64>,
    pub achievable_improvement: Option<f64>,
}

impl Rates {
    pub const KEYS: [&'static str; 6] = [
        "ea_first_time",
        "ea_with_repairs",
        "unknown_with_repairs",
        "accuracy_plus_unknown",
        "error_rate",
        "achievable_improvement",
    ];

    pub fn from_counts(c: &Counts) -> Self {
        let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
        let total = c.scored;
        let ea_first_time = pct(c.accurate_first_time, total);
        let ea_with_repairs = pct(c.accurate_first_time + c.accurate_with_repair, total);
        let unknown_with_repairs = pct(c.unknown, total);
        let accuracy_plus_unknown = ea_with_repairs
            .zip(unknown_with_repairs)
            .map(|(a, u)| a + u);
        Rates {
            ea_first_time,
            ea_with_repairs,
            unknown_with_repairs,
            accuracy_plus_unknown,
            error_rate: accuracy_plus_unknown.map(|v| 100.0 - v),
            achievable_improvement: pct(c.accurate_with_repair, total - c.accurate_first_time),
        }
    }

    pub fn values(&self) -> [Option<f64>; 6] {
        [
            self.ea_first_time,
            self.ea_with_repairs,
            self.unknown_with_repairs,
            self.accuracy_plus_unknown,
            self.error_rate,
            self.achievable_improvement,
        ]
    }

    pub fn from_values(v: [Option<f64>; 6]) -> Self {
        Rates {
            ea_first_time: v[0],
            ea_with_repairs: v[1],
            unknown_with_repairs: v[2],
            accuracy_plus_unknown: v[3],
            error_rate: v[4],
            achievable_improvement: v[5],
        }
    }

    /// Field-wise combination over the defined values of each field.
    fn combine(all: &[Rates], f: impl Fn(&[f64]) -> Option<f64>) -> Rates {
        let mut out = [None; 6];
        for (k, slot) in out.iter_mut().enumerate() {
            let defined: Vec<f64> = all.iter().filter_map(|r| r.values()[k]).collect();
            *slot = f(&defined);
        }
        Rates::from_values(out)
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation; needs two values.
fn stdev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() >= 2).then(|| {
        let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
        (ss / (xs.len() - 1) as f64).sqrt()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    /// `all` or a quadrant name.
    pub group: String,
    /// Summed over repeats.
    pub counts: Counts,
    /// Mean over repeats.
    pub rates: Rates,
    /// Spread over repeats; present when there was more than one.
    pub stdev: Option<Rates>,
}

pub const ALL_GROUP: &str = "all";

/// Display label for a group id.
pub fn group_label(group: &str) -> String {
    match group.parse::<Quadrant>() {
        Ok(q) => q.label().to_string(),
        Err(_) if group == ALL_GROUP => "All Questions".to_string(),
        Err(_) => group.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleUsage {
    pub rule: RuleId,
    pub count: usize,
    /// Share of all violations; `None` when nothing fired.
    pub percentage: Option<f64>,
}

pub const COUNTING_UNIT: &str = "violations per check report, summed over every cycle of every run";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub counting_unit: String,
    pub aggregation: Aggregation,
    pub repeats: usize,
    pub groups: Vec<GroupMetrics>,
    pub total_violations: usize,
    /// Every rule, most used first.
    pub rule_usage: Vec<RuleUsage>,
}

/// Count violations per rule across every report of every session.
pub fn rule_usage(records: &[RunRecord]) -> (usize, Vec<RuleUsage>) {
    let mut counts: BTreeMap<RuleId, usize> = RuleId::ALL.iter().map(|r| (*r, 0)).collect();
    for record in records {
        for report in record.session.reports() {
            for v in &report.violations {
                *counts.get_mut(&v.rule).unwrap() += 1;
            }
        }
    }
    let total: usize = counts.values().sum();
    let mut usage: Vec<RuleUsage> = counts
        .into_iter()
        .map(|(rule, count)| RuleUsage {
            rule,
            count,
            percentage: (total > 0).then(|| 100.0 * count as f64 / total as f64),
        })
        .collect();
    usage.sort_by(|a, b| b.count.cmp(&a.count).then(a.rule.cmp(&b.rule)));
    (total, usage)
}

fn group_metrics(group: &str, per_repeat: &[Rates], counts: Counts) -> GroupMetrics {
    GroupMetrics {
        group: group.to_string(),
        counts,
        rates: Rates::combine(per_repeat, mean),
        stdev: (per_repeat.len() > 1).then(|| Rates::combine(per_repeat, stdev)),
    }
}

/// Aggregate run records into report rows. The overall row comes first,
/// followed (for [`GroupBy::Quadrant`]) by one row per quadrant in fixed
/// order, including empty ones.
pub fn compute_metrics(
    records: &[RunRecord],
    group_by: GroupBy,
    aggregation: Aggregation,
) -> BenchReport {
    let repeats = records.iter().map(|r| r.repeat + 1).max().unwrap_or(1);
    let counts_where = |repeat: Option<usize>, quadrant: Option<Quadrant>| {
        Counts::tally(
            records
                .iter()
                .filter(|r| repeat.is_none_or(|n| r.repeat == n))
                .filter(|r| quadrant.is_none_or(|q| r.quadrant == q))
                .map(|r| &r.classification),
        )
    };
    let quadrant_rates = |q: Quadrant| -> Vec<Rates> {
        (0..repeats)
            .map(|n| Rates::from_counts(&counts_where(Some(n), Some(q))))
            .collect()
    };

    let overall_rates: Vec<Rates> = match aggregation {
        Aggregation::Pooled => (0..repeats)
            .map(|n| Rates::from_counts(&counts_where(Some(n), None)))
            .collect(),
        Aggregation::Macro => (0..repeats)
            .map(|n| {
                let per_quadrant: Vec<Rates> = Quadrant::ALL
                    .iter()
                    .map(|q| Rates::from_counts(&counts_where(Some(n), Some(*q))))
                    .collect();
                Rates::combine(&per_quadrant, mean)
            })
            .collect(),
    };
    let mut groups = vec![group_metrics(
        ALL_GROUP,
        &overall_rates,
        counts_where(None, None),
    )];
    if group_by == GroupBy::Quadrant {
        for q in Quadrant::ALL {
            groups.push(group_metrics(
                q.name(),
                &quadrant_rates(q),
                counts_where(None, Some(q)),
            ));
        }
    }
    let (total_violations, rule_usage) = rule_usage(records);
    BenchReport {
        counting_unit: COUNTING_UNIT.to_string(),
        aggregation,
        repeats,
        groups,
        total_violations,
        rule_usage,
    }
}
