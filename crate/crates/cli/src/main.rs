//! `obqc`: check generated SPARQL against an ontology, repair it with a
//! rewriter, and score a benchmark.

mod http;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use obqc::bench::{
    compute_metrics, load_benchmark, render_report, run_benchmark, Aggregation, EndpointProvider,
    Format, GroupBy, MockScripts, RunOptions, SharedEndpoint,
};
use obqc::query_graph::{deskolemize_bindings, SkolemConfig};
use obqc::rdf::Ontology;
use obqc::repair::{
    Outcome, RateLimited, Repairer, RewriterEndpoint, ScriptedMock, DEFAULT_CYCLE_LIMIT,
};
use obqc::rules::CheckConfig;
use obqc::validate::Validator;
use serde::Serialize;

use crate::http::{EndpointConfig, HttpEndpoint};

#[derive(Parser)]
#[command(
    name = "obqc",
    version,
    about = "Ontology-based checks for generated SPARQL"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check one query; exits 0 when it passes, 1 on violations, 2 on errors.
    Check(CheckArgs),
    /// Print the conjunctive graph of a query and ontology as N-Quads.
    Dump(DumpArgs),
    /// Generate and repair a query for one question; exits 0 when validated,
    /// 1 when the outcome is unknown.
    Repair(RepairArgs),
    /// Run a benchmark and write the metrics report.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RuleFlags {
    /// Apply the rules exactly as printed: no head-rule exclusions and
    /// datatype ranges count as IRI ranges.
    #[arg(long)]
    paper_strict: bool,
    /// Accept properties that only appear as the subject of a
    /// domain, range or subPropertyOf axiom.
    #[arg(long)]
    accept_schema_mentions: bool,
}

impl RuleFlags {
    fn config(&self) -> CheckConfig {
        let mut config = if self.paper_strict {
            CheckConfig::paper_strict()
        } else {
            CheckConfig::default()
        };
        config.accept_schema_mentions = self.accept_schema_mentions;
        config
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TextOrJson {
    Text,
    Json,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: TextOrJson,
    #[command(flatten)]
    rules: RuleFlags,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    /// Namespace for skolem IRIs.
    #[arg(long)]
    namespace: Option<String>,
}

#[derive(Args)]
#[group(id = "rewriter", required = true, multiple = false)]
struct RepairEndpointArgs {
    /// TOML endpoint config (url, model, api_key_env, temperature, timeout_ms).
    #[arg(long, group = "rewriter")]
    endpoint: Option<PathBuf>,
    /// Scripted responses separated by `---` lines.
    #[arg(long, group = "rewriter")]
    mock: Option<PathBuf>,
}

#[derive(Args)]
struct RepairArgs {
    #[arg(long)]
    question: String,
    #[arg(long)]
    ontology: PathBuf,
    #[command(flatten)]
    rewriter: RepairEndpointArgs,
    #[arg(long, default_value_t = DEFAULT_CYCLE_LIMIT)]
    limit: usize,
    /// Write the full session as JSON.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[command(flatten)]
    rules: RuleFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    Overall,
    Quadrant,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Pooled,
    Macro,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

#[derive(Args)]
#[group(id = "bench_rewriter", required = true, multiple = false)]
struct BenchEndpointArgs {
    #[arg(long, group = "bench_rewriter")]
    endpoint: Option<PathBuf>,
    /// Directory of `<item id>.txt` scripts.
    #[arg(long, group = "bench_rewriter")]
    mock_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory holding manifest.json or manifest.csv.
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    rewriter: BenchEndpointArgs,
    #[arg(long, default_value_t = DEFAULT_CYCLE_LIMIT)]
    limit: usize,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Run every question this many times and report mean and stdev.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, value_enum, default_value = "quadrant")]
    group: GroupArg,
    /// How the overall row combines runs.
    #[arg(long, value_enum, default_value = "pooled")]
    aggregation: AggregationArg,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: ReportFormat,
    /// Write every run record as JSON.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    #[command(flatten)]
    rules: RuleFlags,
}

fn load_ontology(path: &Path) -> Result<(Ontology, String)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading ontology {}", path.display()))?;
    let ontology =
        Ontology::load(path).with_context(|| format!("loading ontology {}", path.display()))?;
    for warning in &ontology.warnings {
        eprintln!("warning: {warning}");
    }
    Ok((ontology, text))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Serialize)]
struct JsonViolation {
    rule: String,
    bindings: BTreeMap<String, String>,
    message: String,
}

#[derive(Serialize)]
struct JsonReport {
    passed: bool,
    violations: Vec<JsonViolation>,
}

fn check(args: &CheckArgs) -> Result<ExitCode> {
    let (ontology, _) = load_ontology(&args.ontology)?;
    let validator = Validator::new(ontology).with_config(args.rules.config());
    let query = read(&args.query)?;
    let validation = validator
        .check_query(&query)
        .with_context(|| format!("parsing {}", args.query.display()))?;
    for notice in validation.notices() {
        eprintln!("note: {notice}");
    }
    let report = &validation.report;
    match args.format {
        TextOrJson::Text => {
            if report.passed {
                println!("passed");
            }
            for v in &report.violations {
                println!("[{}] {}", v.rule, v.message);
            }
        }
        TextOrJson::Json => {
            let prefixes = validator.prefixes();
            let violations = report
                .violations
                .iter()
                .map(|v| {
                    Ok(JsonViolation {
                        rule: v.rule.name().to_string(),
                        bindings: deskolemize_bindings(
                            &validation.built.skolem,
                            &v.bindings,
                            &prefixes,
                        )?,
                        message: v.message.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let json = JsonReport {
                passed: report.passed,
                violations,
            };
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
    }
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn dump(args: &DumpArgs) -> Result<ExitCode> {
    let (ontology, _) = load_ontology(&args.ontology)?;
    let mut skolem = SkolemConfig::default();
    if let Some(ns) = &args.namespace {
        skolem.namespace = ns.clone();
    }
    let validator = Validator::new(ontology).with_skolem_config(skolem);
    let query = read(&args.query)?;
    let validation = validator
        .check_query(&query)
        .with_context(|| format!("parsing {}", args.query.display()))?;
    for notice in validation.notices() {
        eprintln!("note: {notice}");
    }
    print!("{}", validation.built.graph.to_nquads());
    Ok(ExitCode::SUCCESS)
}

fn http_endpoint(path: &Path) -> Result<Box<dyn RewriterEndpoint>> {
    let config = EndpointConfig::load(path)?;
    let interval = Duration::from_millis(config.min_interval_ms);
    let endpoint = HttpEndpoint::new(config)?;
    Ok(if interval.is_zero() {
        Box::new(endpoint)
    } else {
        Box::new(RateLimited::new(endpoint, interval))
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn repair(args: &RepairArgs) -> Result<ExitCode> {
    let (ontology, text) = load_ontology(&args.ontology)?;
    let validator = Validator::new(ontology).with_config(args.rules.config());
    let repairer =
        Repairer::new(validator, text, args.ontology.display().to_string()).with_limit(args.limit);
    let endpoint: Box<dyn RewriterEndpoint> = match (&args.rewriter.endpoint, &args.rewriter.mock) {
        (Some(config), _) => http_endpoint(config)?,
        (None, Some(mock)) => Box::new(ScriptedMock::from_text(&read(mock)?)),
        (None, None) => bail!("either --endpoint or --mock is required"),
    };
    let session = repairer.run(&args.question, endpoint.as_ref());
    if let Some(path) = &args.transcript {
        write_json(path, &session)?;
    }
    if let Some(error) = &session.error {
        eprintln!("error: {error}");
    }
    for (i, cycle) in session.cycles.iter().enumerate() {
        for issue in cycle.issues().into_iter().filter(|_| !cycle.passed()) {
            eprintln!("cycle {i}: {issue}");
        }
    }
    match session.outcome {
        Outcome::ValidatedFirstTime => println!("validated first time"),
        Outcome::ValidatedAfterRepair(n) => println!("validated after {n} repair(s)"),
        Outcome::Unknown => println!("unknown"),
    }
    if let Some(query) = session.final_query() {
        println!("{query}");
    }
    Ok(if session.outcome.is_validated() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn bench(args: &BenchArgs) -> Result<ExitCode> {
    let benchmark = load_benchmark(&args.dataset)
        .with_context(|| format!("loading benchmark {}", args.dataset.display()))?;
    let provider: Box<dyn EndpointProvider> =
        match (&args.rewriter.endpoint, &args.rewriter.mock_dir) {
            (Some(config), _) => Box::new(SharedEndpoint(http_endpoint(config)?)),
            (None, Some(dir)) => Box::new(
                MockScripts::from_dir(dir)
                    .with_context(|| format!("reading mocks in {}", dir.display()))?,
            ),
            (None, None) => bail!("either --endpoint or --mock-dir is required"),
        };
    let opts = RunOptions {
        limit: args.limit,
        parallelism: args.parallel,
        repeats: args.repeats.max(1),
        check_config: args.rules.config(),
    };
    let records = run_benchmark(&benchmark, provider.as_ref(), None, &opts)?;
    if let Some(path) = &args.transcripts {
        write_json(path, &records)?;
    }
    let group_by = match args.group {
        GroupArg::Overall => GroupBy::Overall,
        GroupArg::Quadrant => GroupBy::Quadrant,
    };
    let aggregation = match args.aggregation {
        AggregationArg::Pooled => Aggregation::Pooled,
        AggregationArg::Macro => Aggregation::Macro,
    };
    let format = match args.format {
        ReportFormat::Json => Format::Json,
        ReportFormat::Csv => Format::Csv,
        ReportFormat::Markdown => Format::Markdown,
    };
    let report = compute_metrics(&records, group_by, aggregation);
    let text = render_report(&report, format);
    match &args.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(args) => check(args),
        Command::Dump(args) => dump(args),
        Command::Repair(args) => repair(args),
        Command::Bench(args) => bench(args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
