//! Command front-end: evaluate, compare, curve, grid and synth.
//!
//! Each command is a library function over parsed inputs, so everything the
//! `tierank` binary does can also be driven (and tested) in-process. The
//! clap definitions at the bottom only translate flags and files into
//! those calls.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floatsim::{grid_count, grid_values, ulp, PrecisionFormat};
use crate::io::{
    self, EvaluationReport, LogitsFile, QrelsFile, ReportFormat, RunFile, REPORT_SCHEMA,
};
use crate::metrics::{aggregate, MetricKind, MetricReport, Query, QueryReport};
use crate::oracle::{enumerate_metric, placement_count, EnumerationBudget};
use crate::scoring::{score, ScoringFunction, ScoringRegime};
use crate::synth::{self, SynthConfig};
use crate::ties::ScoredCandidate;

/// Largest disagreement tolerated between a closed form and the oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

/// Where candidate scores come from.
#[derive(Debug, Clone, Copy)]
pub enum ScoreSource<'a> {
    Run(&'a RunFile),
    Logits {
        file: &'a LogitsFile,
        regime: ScoringRegime,
        normalize: bool,
    },
}

impl ScoreSource<'_> {
    fn regime_label(&self) -> Option<String> {
        match self {
            ScoreSource::Run(_) => None,
            ScoreSource::Logits { regime, .. } => Some(regime.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub metrics: Vec<MetricKind>,
    pub cutoffs: Vec<usize>,
    /// Cross-check every query small enough to enumerate.
    pub oracle: bool,
    pub budget: EnumerationBudget,
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metrics: MetricKind::ALL.to_vec(),
            cutoffs: vec![10],
            oracle: false,
            budget: EnumerationBudget::default(),
            workers: 1,
        }
    }
}

impl EvalConfig {
    fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::constraint("at least one metric is required"));
        }
        validate_cutoffs(&self.cutoffs)?;
        if self.workers == 0 {
            return Err(Error::constraint("worker count must be at least 1"));
        }
        Ok(())
    }
}

fn validate_cutoffs(cutoffs: &[usize]) -> Result<()> {
    if cutoffs.is_empty() {
        return Err(Error::constraint("at least one cutoff is required"));
    }
    if cutoffs[0] == 0 {
        return Err(Error::constraint("cutoffs must be at least 1"));
    }
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::constraint("cutoffs must be strictly increasing"));
    }
    Ok(())
}

/// Parses `10`, `1,3,10` or `1..10` (inclusive), or mixes like `1..3,10`.
pub fn parse_cutoffs(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| -> Result<usize> {
            t.trim()
                .parse()
                .map_err(|_| Error::constraint(format!("bad cutoff `{t}`")))
        };
        match part.split_once("..") {
            Some((a, b)) => {
                let b = b.strip_prefix('=').unwrap_or(b);
                out.extend(num(a)?..=num(b)?);
            }
            None => out.push(num(part)?),
        }
    }
    validate_cutoffs(&out)?;
    Ok(out)
}

/// Comma-separated metric names; `all` expands to every metric.
pub fn parse_metrics(s: &str) -> Result<Vec<MetricKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(MetricKind::ALL.to_vec());
    }
    let metrics = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if metrics.is_empty() {
        return Err(Error::constraint("at least one metric is required"));
    }
    Ok(metrics)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

struct PreparedQuery {
    id: String,
    query: Query,
}

struct Prepared {
    queries: Vec<PreparedQuery>,
    skipped: Vec<String>,
    unretrieved: BTreeMap<String, usize>,
}

/// Candidate ids and scores per query, in ingestion order.
fn scored_queries(source: &ScoreSource) -> Result<Vec<(String, Vec<(String, f64)>)>> {
    match source {
        ScoreSource::Run(run) => Ok(run
            .queries()
            .into_iter()
            .map(|(q, recs)| {
                let docs = recs.iter().map(|r| (r.doc_id.clone(), r.score)).collect();
                (q.to_string(), docs)
            })
            .collect()),
        ScoreSource::Logits {
            file,
            regime,
            normalize,
        } => file
            .queries()
            .into_par_iter()
            .map(|(q, recs)| {
                let docs = recs
                    .iter()
                    .map(|r| {
                        let s = score(&r.input, *regime, *normalize).map_err(|e| {
                            Error::invalid(format!("query {q}, document {}: {e}", r.doc_id))
                        })?;
                        Ok((r.doc_id.clone(), s.value))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((q.to_string(), docs))
            })
            .collect(),
    }
}

fn prepare(source: &ScoreSource, qrels: &QrelsFile) -> Result<Prepared> {
    let relevant = qrels.relevant_by_query();
    let empty = HashSet::new();
    let mut queries = Vec::new();
    let mut skipped = Vec::new();
    let mut unretrieved = BTreeMap::new();
    for (qid, docs) in scored_queries(source)? {
        let rel = relevant.get(qid.as_str()).unwrap_or(&empty);
        if rel.is_empty() {
            skipped.push(qid);
            continue;
        }
        let candidates: Vec<ScoredCandidate> = docs
            .into_iter()
            .enumerate()
            .map(|(i, (doc, s))| {
                let is_rel = rel.contains(doc.as_str());
                ScoredCandidate::new(doc, s, is_rel, i)
            })
            .collect();
        let retrieved = candidates.iter().filter(|c| c.relevant).count();
        let missing = rel.len() - retrieved;
        if missing > 0 {
            unretrieved.insert(qid.clone(), missing);
        }
        let query = Query::new(candidates)
            .map_err(|e| Error::invalid(format!("query {qid}: {e}")))?
            .with_unretrieved_relevant(missing);
        queries.push(PreparedQuery { id: qid, query });
    }
    if queries.is_empty() {
        return Err(Error::constraint(format!(
            "no query has a relevant document ({} skipped)",
            skipped.len()
        )));
    }
    queries.sort_by(|a, b| a.id.cmp(&b.id));
    skipped.sort();
    Ok(Prepared {
        queries,
        skipped,
        unretrieved,
    })
}

fn check_against_oracle(q: &PreparedQuery, report: &MetricReport, budget: EnumerationBudget) -> Result<()> {
    let e = enumerate_metric(q.query.profile(), report.metric, report.k, budget)?;
    let worst = [
        (report.expected - e.mean).abs(),
        (report.minimum - e.min).abs(),
        (report.maximum - e.max).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if !(worst <= ORACLE_TOLERANCE) {
        return Err(Error::OracleMismatch(format!(
            "query {} {}@{}: closed form (E {}, min {}, max {}) vs enumeration (E {}, min {}, max {})",
            q.id, report.metric, report.k, report.expected, report.minimum, report.maximum, e.mean, e.min, e.max
        )));
    }
    Ok(())
}

fn evaluate_prepared(prepared: &Prepared, config: &EvalConfig) -> Result<(Vec<Vec<QueryReport>>, usize)> {
    let pairs: Vec<(MetricKind, usize)> = config
        .metrics
        .iter()
        .flat_map(|&m| config.cutoffs.iter().map(move |&k| (m, k)))
        .collect();
    let per_query: Vec<(Vec<MetricReport>, bool)> = prepared
        .queries
        .par_iter()
        .map(|q| {
            let reports = pairs
                .iter()
                .map(|&(m, k)| q.query.report(m, k).map_err(|e| Error::invalid(format!("query {}: {e}", q.id))))
                .collect::<Result<Vec<_>>>()?;
            let checkable =
                config.oracle && placement_count(q.query.profile()) <= config.budget.max_configurations() as u128;
            if checkable {
                for r in &reports {
                    check_against_oracle(q, r, config.budget)?;
                }
            }
            Ok((reports, checkable))
        })
        .collect::<Result<_>>()?;
    let checked = per_query.iter().filter(|(_, c)| *c).count();
    let by_pair = (0..pairs.len())
        .map(|i| {
            prepared
                .queries
                .iter()
                .zip(&per_query)
                .map(|(q, (reports, _))| QueryReport {
                    query_id: q.id.clone(),
                    report: reports[i],
                })
                .collect()
        })
        .collect();
    Ok((by_pair, checked))
}

/// Per-query tie-aware reports and their aggregates for every metric and
/// cutoff. Queries without any judged-relevant document are skipped and
/// listed in the report.
pub fn evaluate(source: &ScoreSource, qrels: &QrelsFile, config: &EvalConfig) -> Result<EvaluationReport> {
    config.validate()?;
    pool(config.workers)?.install(|| {
        let prepared = prepare(source, qrels)?;
        let (by_pair, oracle_checked) = evaluate_prepared(&prepared, config)?;
        let results = by_pair.iter().map(|r| aggregate(r)).collect::<Result<Vec<_>>>()?;
        Ok(EvaluationReport {
            schema: REPORT_SCHEMA.to_string(),
            regime: source.regime_label(),
            queries_evaluated: prepared.queries.len(),
            skipped_queries: prepared.skipped,
            unretrieved_relevant: prepared.unretrieved,
            oracle_checked,
            results,
        })
    })
}

/// The same logits evaluated under several precision regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema: String,
    pub regimes: Vec<EvaluationReport>,
}

pub fn compare(
    logits: &LogitsFile,
    qrels: &QrelsFile,
    regimes: &[ScoringRegime],
    normalize: bool,
    config: &EvalConfig,
) -> Result<Comparison> {
    if regimes.is_empty() {
        return Err(Error::constraint("at least one regime is required"));
    }
    let reports = regimes
        .iter()
        .map(|&regime| {
            let source = ScoreSource::Logits {
                file: logits,
                regime,
                normalize,
            };
            evaluate(&source, qrels, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        schema: REPORT_SCHEMA.to_string(),
        regimes: reports,
    })
}

pub fn write_comparison(cmp: &Comparison, format: ReportFormat) -> Result<Vec<u8>> {
    let mut out = String::new();
    match format {
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(cmp)?;
            out.push('\n');
        }
        ReportFormat::Csv => {
            let _ = writeln!(out, "regime,{}", io::CSV_HEADER);
            for r in &cmp.regimes {
                let label = r.regime.as_deref().unwrap_or("run");
                for a in &r.results {
                    let _ = writeln!(out, "{label},{}", io::csv_row(a));
                }
            }
        }
        ReportFormat::Table => {
            let _ = write!(out, "{:<14}", "metric");
            for r in &cmp.regimes {
                let label = r.regime.as_deref().unwrap_or("run");
                let _ = write!(out, " | {:^35}", label);
            }
            out.push('\n');
            let _ = write!(out, "{:<14}", "");
            for _ in &cmp.regimes {
                let _ = write!(out, " | {:>8} {:>8} {:>8} {:>8}", "M_obl", "E[M]", "Range", "Bias");
            }
            out.push('\n');
            let rows = cmp.regimes.first().map_or(0, |r| r.results.len());
            for i in 0..rows {
                let head = &cmp.regimes[0].results[i];
                let _ = write!(out, "{:<14}", format!("{}@{}", head.metric, head.k));
                for r in &cmp.regimes {
                    let a = &r.results[i];
                    let _ = write!(
                        out,
                        " | {:>8} {:>8} {:>8} {:>8}",
                        io::pct(a.oblivious),
                        io::pct(a.expected),
                        io::pct(a.range_mean),
                        io::pct(a.bias)
                    );
                }
                out.push('\n');
            }
        }
    }
    Ok(out.into_bytes())
}

/// One row of a cutoff curve: aggregate means at one `(regime, metric, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub regime: String,
    pub metric: MetricKind,
    pub k: usize,
    pub oblivious: f64,
    pub expected: f64,
    pub minimum: f64,
    pub maximum: f64,
}

/// Aggregates at every cutoff for every source, ready for plotting.
pub fn curve(sources: &[ScoreSource], qrels: &QrelsFile, config: &EvalConfig) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for source in sources {
        let report = evaluate(source, qrels, config)?;
        let label = source.regime_label().unwrap_or_else(|| "run".to_string());
        rows.extend(report.results.iter().map(|a| CurveRow {
            regime: label.clone(),
            metric: a.metric,
            k: a.k,
            oblivious: a.oblivious,
            expected: a.expected,
            minimum: a.minimum,
            maximum: a.maximum,
        }));
    }
    Ok(rows)
}

pub const CURVE_HEADER: &str = "regime,metric,k,oblivious,expected,minimum,maximum";

pub fn write_curve(rows: &[CurveRow]) -> Vec<u8> {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.regime, r.metric, r.k, r.oblivious, r.expected, r.minimum, r.maximum
        );
    }
    out.into_bytes()
}

/// Representable values of a format inside an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GridListing {
    pub format: PrecisionFormat,
    pub count: u64,
    /// `(value, ulp at value)`, ascending; empty if only the count was asked.
    pub values: Vec<(f64, f64)>,
}

pub fn grid(format: PrecisionFormat, lo: f64, hi: f64, limit: Option<u64>) -> Result<GridListing> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::constraint(format!("bad interval [{lo}, {hi}]")));
    }
    let count = grid_count(lo, hi, format);
    let values = match limit {
        Some(limit) => grid_values(lo, hi, format, limit)?
            .into_iter()
            .map(|v| (v, ulp(v, format)))
            .collect(),
        None => Vec::new(),
    };
    Ok(GridListing { format, count, values })
}

pub fn write_grid(listing: &GridListing) -> Vec<u8> {
    let mut out = format!("# {} values: {}\n", listing.format, listing.count);
    if !listing.values.is_empty() {
        out.push_str("value,ulp\n");
    }
    for (v, u) in &listing.values {
        let _ = writeln!(out, "{v},{u}");
    }
    out.into_bytes()
}

// ---------------------------------------------------------------------------
// command-line surface

#[derive(Debug, Parser)]
#[command(name = "tierank", version, about = "Tie-aware retrieval evaluation under low-precision scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tie-aware report (oblivious, expected, extrema, range, bias) per metric and cutoff.
    Evaluate(EvaluateArgs),
    /// Evaluate the same logits under several precision regimes.
    Compare(CompareArgs),
    /// Per-cutoff CSV of oblivious, expected and extreme values.
    Curve(CurveArgs),
    /// List representable values of a format in an interval.
    Grid(GridArgs),
    /// Write a seeded synthetic logits file and qrels.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Run file (six-column or JSON lines).
    #[arg(long, conflicts_with = "logits")]
    pub run: Option<PathBuf>,
    /// Relevance judgments.
    #[arg(long)]
    pub qrels: PathBuf,
    /// Logits file to score.
    #[arg(long)]
    pub logits: Option<PathBuf>,
    /// Expected scoring function; must match the logits file header.
    #[arg(long)]
    pub phi: Option<ScoringFunction>,
    /// Precision the logits are produced in (defaults to the file's).
    #[arg(long)]
    pub logit_format: Option<PrecisionFormat>,
    /// Precision the scoring function runs in (defaults to the logit format).
    #[arg(long)]
    pub scoring_format: Option<PrecisionFormat>,
    /// Upcast only the scoring function to FP32.
    #[arg(long)]
    pub hps: bool,
    /// Use the raw inner product instead of cosine for dot scoring.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Comma-separated metrics: hits, precision, recall, f1, ndcg, rr, ap, or all.
    #[arg(long, default_value = "ndcg,rr,ap,recall")]
    pub metrics: String,
    /// Cutoffs, e.g. `10`, `1,5,10` or `1..10`.
    #[arg(long, default_value = "10")]
    pub k: String,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json, csv or table.
    #[arg(long, default_value = "table")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Cross-check closed forms against exhaustive enumeration on small queries.
    #[arg(long)]
    pub oracle: bool,
    /// Largest number of tie placements the oracle enumerates per query.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub logits: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long)]
    pub phi: Option<ScoringFunction>,
    /// Regimes such as `fp32`, `bf16`, `bf16+hps` or `fp16->fp32`.
    #[arg(long, default_value = "fp32,bf16,bf16+hps")]
    pub regimes: String,
    #[arg(long)]
    pub no_normalize: bool,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, conflicts_with = "logits")]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub logits: Option<PathBuf>,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long)]
    pub phi: Option<ScoringFunction>,
    #[arg(long, default_value = "fp32,bf16,bf16+hps")]
    pub regimes: String,
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value = "ndcg,rr")]
    pub metrics: String,
    #[arg(long, default_value = "1..10")]
    pub k: String,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// bf16, fp16, fp32 or eXmY.
    #[arg(long, default_value = "bf16")]
    pub precision: PrecisionFormat,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: f64,
    /// Print the count only.
    #[arg(long)]
    pub count_only: bool,
    #[arg(long, default_value_t = 100_000)]
    pub limit: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// miracl (717 x 100) or askubuntu (375 x 20); explicit flags override.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub candidates: Option<usize>,
    #[arg(long)]
    pub relevant_rate: Option<f64>,
    #[arg(long, default_value = "softmax")]
    pub phi: ScoringFunction,
    /// Mean shift of relevant candidates' logits.
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Grid the logits are stored on.
    #[arg(long, default_value = "fp32")]
    pub logit_format: PrecisionFormat,
    /// Directory receiving `logits.jsonl` and `qrels.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_logits(path: &Path, phi: Option<ScoringFunction>) -> Result<LogitsFile> {
    let file = io::parse_logits(&read(path)?)?;
    if let Some(phi) = phi {
        if phi != file.function {
            return Err(Error::constraint(format!(
                "--phi {phi} does not match the logits file ({})",
                file.function
            )));
        }
    }
    Ok(file)
}

fn regime_from_flags(input: &InputArgs, file: &LogitsFile) -> Result<ScoringRegime> {
    let logit = input.logit_format.unwrap_or(file.format);
    if input.hps {
        if input.scoring_format.is_some_and(|f| f != PrecisionFormat::FP32) {
            return Err(Error::constraint("--hps scores in fp32; drop --scoring-format or set it to fp32"));
        }
        if logit.mantissa_bits() >= PrecisionFormat::FP32.mantissa_bits() {
            return Err(Error::constraint("--hps needs a logit format narrower than fp32"));
        }
        return ScoringRegime::high_precision(logit);
    }
    ScoringRegime::new(logit, input.scoring_format.unwrap_or(logit))
}

fn parse_regimes(s: &str) -> Result<Vec<ScoringRegime>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect()
}

fn eval_config(args: &MetricArgs, oracle: bool, budget: EnumerationBudget) -> Result<EvalConfig> {
    Ok(EvalConfig {
        metrics: parse_metrics(&args.metrics)?,
        cutoffs: parse_cutoffs(&args.k)?,
        oracle,
        budget,
        workers: args.workers,
    })
}

/// What a command produced: bytes for the output sink plus warnings.
#[derive(Debug, Default)]
pub struct Output {
    pub bytes: Vec<u8>,
    pub warnings: Vec<String>,
}

fn skipped_warning(skipped: usize) -> Vec<String> {
    if skipped == 0 {
        Vec::new()
    } else {
        vec![format!("{skipped} queries skipped: no relevant document")]
    }
}

/// Runs a parsed command line and returns its output without touching
/// stdout. `synth` writes its two files and reports their paths.
pub fn execute(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Evaluate(args) => {
            let qrels = io::parse_qrels(&read(&args.input.qrels)?)?;
            let config = eval_config(&args.metrics, args.oracle, EnumerationBudget::new(args.budget)?)?;
            let report = match (&args.input.run, &args.input.logits) {
                (Some(run), None) => {
                    let run = io::parse_run(&read(run)?)?;
                    evaluate(&ScoreSource::Run(&run), &qrels, &config)?
                }
                (None, Some(path)) => {
                    let file = load_logits(path, args.input.phi)?;
                    let regime = regime_from_flags(&args.input, &file)?;
                    let source = ScoreSource::Logits {
                        file: &file,
                        regime,
                        normalize: !args.input.no_normalize,
                    };
                    evaluate(&source, &qrels, &config)?
                }
                _ => return Err(Error::constraint("give exactly one of --run or --logits")),
            };
            Ok(Output {
                bytes: io::write_report(&report, args.output.format)?,
                warnings: skipped_warning(report.skipped_queries.len()),
            })
        }
        Command::Compare(args) => {
            let qrels = io::parse_qrels(&read(&args.qrels)?)?;
            let file = load_logits(&args.logits, args.phi)?;
            let regimes = parse_regimes(&args.regimes)?;
            let config = eval_config(&args.metrics, false, EnumerationBudget::default())?;
            let cmp = compare(&file, &qrels, &regimes, !args.no_normalize, &config)?;
            let skipped = cmp.regimes.first().map_or(0, |r| r.skipped_queries.len());
            Ok(Output {
                bytes: write_comparison(&cmp, args.output.format)?,
                warnings: skipped_warning(skipped),
            })
        }
        Command::Curve(args) => {
            let qrels = io::parse_qrels(&read(&args.qrels)?)?;
            let config = EvalConfig {
                metrics: parse_metrics(&args.metrics)?,
                cutoffs: parse_cutoffs(&args.k)?,
                workers: args.workers,
                ..EvalConfig::default()
            };
            let rows = match (&args.run, &args.logits) {
                (Some(run), None) => {
                    let run = io::parse_run(&read(run)?)?;
                    curve(&[ScoreSource::Run(&run)], &qrels, &config)?
                }
                (None, Some(path)) => {
                    let file = load_logits(path, args.phi)?;
                    let sources: Vec<ScoreSource> = parse_regimes(&args.regimes)?
                        .into_iter()
                        .map(|regime| ScoreSource::Logits {
                            file: &file,
                            regime,
                            normalize: !args.no_normalize,
                        })
                        .collect();
                    if sources.is_empty() {
                        return Err(Error::constraint("at least one regime is required"));
                    }
                    curve(&sources, &qrels, &config)?
                }
                _ => return Err(Error::constraint("give exactly one of --run or --logits")),
            };
            Ok(Output {
                bytes: write_curve(&rows),
                warnings: Vec::new(),
            })
        }
        Command::Grid(args) => {
            let limit = (!args.count_only).then_some(args.limit);
            Ok(Output {
                bytes: write_grid(&grid(args.precision, args.lo, args.hi, limit)?),
                warnings: Vec::new(),
            })
        }
        Command::Synth(args) => {
            let base = match &args.preset {
                Some(p) => SynthConfig::preset(p)?,
                None => SynthConfig::default(),
            };
            let config = SynthConfig {
                seed: args.seed,
                queries: args.queries.unwrap_or(base.queries),
                candidates: args.candidates.unwrap_or(base.candidates),
                relevant_rate: args.relevant_rate.unwrap_or(base.relevant_rate),
                function: args.phi,
                shift: args.shift.unwrap_or(base.shift),
                dim: args.dim.unwrap_or(base.dim),
                format: args.logit_format,
            };
            let (logits, qrels) = synth::generate(&config)?;
            std::fs::create_dir_all(&args.out)?;
            let logits_path = args.out.join("logits.jsonl");
            let qrels_path = args.out.join("qrels.txt");
            std::fs::write(&logits_path, io::write_logits(&logits)?)?;
            std::fs::write(&qrels_path, io::write_qrels(&qrels))?;
            Ok(Output {
                bytes: format!("{}\n{}\n", logits_path.display(), qrels_path.display()).into_bytes(),
                warnings: Vec::new(),
            })
        }
    }
}

fn out_path(cli: &Cli) -> Option<&Path> {
    match &cli.command {
        Command::Evaluate(a) => a.output.out.as_deref(),
        Command::Compare(a) => a.output.out.as_deref(),
        Command::Curve(a) => a.out.as_deref(),
        Command::Grid(a) => a.out.as_deref(),
        Command::Synth(_) => None,
    }
}

/// Executes and writes the output to `--out` or stdout; warnings go to stderr.
pub fn run(cli: &Cli) -> Result<()> {
    let output = execute(cli)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    match out_path(cli) {
        Some(path) => std::fs::write(path, &output.bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&output.bytes)?;
        }
    }
    Ok(())
}

/// Mean count of items per tie group and singleton fraction, per regime;
/// handy for eyeballing tie collapse.
pub fn tie_summary(source: &ScoreSource, qrels: &QrelsFile, k: usize) -> Result<TieSummary> {
    let prepared = prepare(source, qrels)?;
    let n = prepared.queries.len() as f64;
    let stats: Vec<_> = prepared.queries.iter().map(|q| q.query.profile().stats(k)).collect();
    let mean = |f: &dyn Fn(&crate::ties::TieStats) -> f64| {
        crate::metrics::pairwise_sum(&stats.iter().map(f).collect::<Vec<_>>()) / n
    };
    Ok(TieSummary {
        queries: prepared.queries.len(),
        mean_groups: mean(&|s| s.num_groups as f64),
        mean_largest_group: mean(&|s| s.largest_group as f64),
        singleton_fraction: mean(&|s| s.singleton_fraction),
        straddling_fraction: mean(&|s| s.straddling_tie as u8 as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieSummary {
    pub queries: usize,
    pub mean_groups: f64,
    pub mean_largest_group: f64,
    pub singleton_fraction: f64,
    /// Fraction of queries whose rank `k` sits inside a tie.
    pub straddling_fraction: f64,
}
