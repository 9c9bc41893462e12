//! Run files, relevance judgments, logit files and reports.
//!
//! Run files come in the usual six-column whitespace format
//! (`qid Q0 docid rank score run`) or as JSON lines; the format is picked
//! from the first non-empty line. Score text is kept verbatim next to its
//! parsed value so a run can be written back byte for byte.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::floatsim::PrecisionFormat;
use crate::metrics::AggregateReport;
use crate::scoring::{LogitInput, ScoringFunction};

pub const REPORT_SCHEMA: &str = "tierank.report/1";
pub const LOGITS_SCHEMA: &str = "tierank.logits/1";

fn text(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(line, "input is not valid UTF-8")
    })
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_score(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line, format!("score `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("score `{s}` is not finite")));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunFormat {
    Trec,
    JsonLines,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub query_id: String,
    pub doc_id: String,
    pub score: f64,
    /// The score exactly as it appeared in the input.
    pub score_text: String,
    pub rank: Option<u64>,
    pub run_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub format: RunFormat,
    pub records: Vec<RunRecord>,
}

#[derive(Deserialize)]
struct JsonRunLine<'a> {
    query_id: String,
    doc_id: String,
    #[serde(borrow)]
    score: &'a RawValue,
    #[serde(default)]
    rank: Option<u64>,
}

pub fn parse_run(bytes: &[u8]) -> Result<RunFile> {
    let s = text(bytes)?;
    let mut lines = content_lines(s).peekable();
    let format = match lines.peek() {
        None => return Err(Error::parse(1, "run file is empty")),
        Some((_, l)) if l.starts_with('{') => RunFormat::JsonLines,
        Some(_) => RunFormat::Trec,
    };
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in lines {
        let record = match format {
            RunFormat::Trec => {
                let cols: Vec<&str> = line.split_whitespace().collect();
                if cols.len() != 6 {
                    return Err(Error::parse(
                        n,
                        format!("expected 6 columns (qid Q0 docid rank score run), found {}", cols.len()),
                    ));
                }
                let rank = cols[3]
                    .parse()
                    .map_err(|_| Error::parse(n, format!("rank `{}` is not an integer", cols[3])))?;
                RunRecord {
                    query_id: cols[0].to_string(),
                    doc_id: cols[2].to_string(),
                    score: parse_score(n, cols[4])?,
                    score_text: cols[4].to_string(),
                    rank: Some(rank),
                    run_name: Some(cols[5].to_string()),
                }
            }
            RunFormat::JsonLines => {
                let rec: JsonRunLine = serde_json::from_str(line).map_err(|e| Error::parse(n, e.to_string()))?;
                let raw = rec.score.get();
                let score_text = if raw.starts_with('"') {
                    serde_json::from_str::<String>(raw).map_err(|e| Error::parse(n, e.to_string()))?
                } else {
                    raw.to_string()
                };
                RunRecord {
                    query_id: rec.query_id,
                    doc_id: rec.doc_id,
                    score: parse_score(n, &score_text)?,
                    score_text,
                    rank: rec.rank,
                    run_name: None,
                }
            }
        };
        if !seen.insert((record.query_id.clone(), record.doc_id.clone())) {
            return Err(Error::parse(
                n,
                format!("duplicate pair ({}, {})", record.query_id, record.doc_id),
            ));
        }
        records.push(record);
    }
    Ok(RunFile { format, records })
}

/// Writes a run in the format it was read from. Missing ranks become the
/// record's position within its query.
pub fn write_run(run: &RunFile) -> Vec<u8> {
    let mut out = String::new();
    let mut position: HashMap<&str, u64> = HashMap::new();
    for r in &run.records {
        let pos = position.entry(&r.query_id).or_insert(0);
        *pos += 1;
        match run.format {
            RunFormat::Trec => {
                let _ = writeln!(
                    out,
                    "{} Q0 {} {} {} {}",
                    r.query_id,
                    r.doc_id,
                    r.rank.unwrap_or(*pos),
                    r.score_text,
                    r.run_name.as_deref().unwrap_or("tierank")
                );
            }
            RunFormat::JsonLines => {
                let score = if r.score_text.parse::<f64>().is_ok()
                    && serde_json::from_str::<serde_json::Number>(&r.score_text).is_ok()
                {
                    r.score_text.clone()
                } else {
                    serde_json::to_string(&r.score_text).expect("string serializes")
                };
                let _ = write!(
                    out,
                    "{{\"query_id\":{},\"doc_id\":{},\"score\":{}",
                    serde_json::to_string(&r.query_id).expect("string serializes"),
                    serde_json::to_string(&r.doc_id).expect("string serializes"),
                    score
                );
                if let Some(rank) = r.rank {
                    let _ = write!(out, ",\"rank\":{rank}");
                }
                out.push_str("}\n");
            }
        }
    }
    out.into_bytes()
}

impl RunFile {
    /// Records grouped by query in first-appearance order; each record's
    /// position in its group is its ingestion index.
    pub fn queries(&self) -> Vec<(&str, Vec<&RunRecord>)> {
        group_by_query(&self.records, |r| &r.query_id)
    }
}

fn group_by_query<'a, T>(items: &'a [T], key: impl Fn(&'a T) -> &'a str) -> Vec<(&'a str, Vec<&'a T>)> {
    let mut order: Vec<(&str, Vec<&T>)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for item in items {
        let q = key(item);
        let slot = *index.entry(q).or_insert_with(|| {
            order.push((q, Vec::new()));
            order.len() - 1
        });
        order[slot].1.push(item);
    }
    order
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrelsRecord {
    pub query_id: String,
    pub doc_id: String,
    pub relevance: u32,
}

impl QrelsRecord {
    pub fn is_relevant(&self) -> bool {
        self.relevance > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QrelsFile {
    pub records: Vec<QrelsRecord>,
}

#[derive(Deserialize)]
struct JsonQrelsLine {
    query_id: String,
    doc_id: String,
    relevance: i64,
}

/// Parses judgments as `qid iter docid rel` lines or JSON lines with
/// `query_id`, `doc_id`, `relevance`.
pub fn parse_qrels(bytes: &[u8]) -> Result<QrelsFile> {
    let s = text(bytes)?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut json = None;
    for (n, line) in content_lines(s) {
        let is_json = *json.get_or_insert(line.starts_with('{'));
        let (query_id, doc_id, relevance) = if is_json {
            let rec: JsonQrelsLine = serde_json::from_str(line).map_err(|e| Error::parse(n, e.to_string()))?;
            (rec.query_id, rec.doc_id, rec.relevance)
        } else {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(Error::parse(
                    n,
                    format!("expected 4 columns (qid iter docid rel), found {}", cols.len()),
                ));
            }
            let rel = cols[3]
                .parse()
                .map_err(|_| Error::parse(n, format!("relevance `{}` is not an integer", cols[3])))?;
            (cols[0].to_string(), cols[2].to_string(), rel)
        };
        let relevance = u32::try_from(relevance)
            .map_err(|_| Error::parse(n, format!("relevance {relevance} must be a non-negative integer")))?;
        if !seen.insert((query_id.clone(), doc_id.clone())) {
            return Err(Error::parse(n, format!("duplicate judgment ({query_id}, {doc_id})")));
        }
        records.push(QrelsRecord {
            query_id,
            doc_id,
            relevance,
        });
    }
    if records.is_empty() {
        return Err(Error::parse(1, "qrels file is empty"));
    }
    Ok(QrelsFile { records })
}

pub fn write_qrels(qrels: &QrelsFile) -> Vec<u8> {
    let mut out = String::new();
    for r in &qrels.records {
        let _ = writeln!(out, "{} 0 {} {}", r.query_id, r.doc_id, r.relevance);
    }
    out.into_bytes()
}

impl QrelsFile {
    /// Relevant (relevance > 0) documents per query.
    pub fn relevant_by_query(&self) -> HashMap<&str, HashSet<&str>> {
        let mut map: HashMap<&str, HashSet<&str>> = HashMap::new();
        for r in self.records.iter().filter(|r| r.is_relevant()) {
            map.entry(&r.query_id).or_default().insert(&r.doc_id);
        }
        map
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitRecord {
    pub query_id: String,
    pub doc_id: String,
    pub input: LogitInput,
}

/// Raw model outputs for one scoring function, stored on the grid of the
/// format the model produced them in.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsFile {
    pub function: ScoringFunction,
    pub format: PrecisionFormat,
    pub records: Vec<LogitRecord>,
}

#[derive(Serialize, Deserialize)]
struct LogitsHeader {
    schema: String,
    function: ScoringFunction,
    format: PrecisionFormat,
}

#[derive(Serialize, Deserialize)]
struct LogitsLine {
    query_id: String,
    doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    logits: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    query_embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    doc_embedding: Option<Vec<f64>>,
}

/// Parses a logits file: a header line declaring the scoring function and
/// source precision, then one JSON record per query-document pair.
///
/// Softmax records carry `logits: [positive, negative]`, sigmoid records
/// `logits: [z]`, dot records `query_embedding` and `doc_embedding`. Values
/// are rounded to the declared format on load.
pub fn parse_logits(bytes: &[u8]) -> Result<LogitsFile> {
    let s = text(bytes)?;
    let mut lines = content_lines(s);
    let (hn, header) = lines.next().ok_or_else(|| Error::parse(1, "logits file is empty"))?;
    let header: LogitsHeader = serde_json::from_str(header).map_err(|e| Error::parse(hn, format!("bad header: {e}")))?;
    if header.schema != LOGITS_SCHEMA {
        return Err(Error::parse(hn, format!("unsupported schema `{}`", header.schema)));
    }
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in lines {
        let rec: LogitsLine = serde_json::from_str(line).map_err(|e| Error::parse(n, e.to_string()))?;
        let input = match (header.function, &rec.logits, &rec.query_embedding, &rec.doc_embedding) {
            (ScoringFunction::Softmax, Some(z), None, None) if z.len() == 2 => LogitInput::SoftmaxLogits {
                positive: z[0],
                negative: z[1],
            },
            (ScoringFunction::Sigmoid, Some(z), None, None) if z.len() == 1 => LogitInput::SigmoidLogit(z[0]),
            (ScoringFunction::Dot, None, Some(q), Some(d)) => LogitInput::EmbeddingPair {
                query: q.clone(),
                document: d.clone(),
            },
            _ => {
                return Err(Error::parse(
                    n,
                    format!("record shape does not match declared function {}", header.function),
                ))
            }
        };
        let input = input.quantized(header.format).map_err(|e| Error::parse(n, e.to_string()))?;
        if !seen.insert((rec.query_id.clone(), rec.doc_id.clone())) {
            return Err(Error::parse(n, format!("duplicate pair ({}, {})", rec.query_id, rec.doc_id)));
        }
        records.push(LogitRecord {
            query_id: rec.query_id,
            doc_id: rec.doc_id,
            input,
        });
    }
    Ok(LogitsFile {
        function: header.function,
        format: header.format,
        records,
    })
}

pub fn write_logits(file: &LogitsFile) -> Result<Vec<u8>> {
    let mut out = serde_json::to_string(&LogitsHeader {
        schema: LOGITS_SCHEMA.to_string(),
        function: file.function,
        format: file.format,
    })?;
    out.push('\n');
    for r in &file.records {
        let mut line = LogitsLine {
            query_id: r.query_id.clone(),
            doc_id: r.doc_id.clone(),
            logits: None,
            query_embedding: None,
            doc_embedding: None,
        };
        match &r.input {
            LogitInput::SoftmaxLogits { positive, negative } => line.logits = Some(vec![*positive, *negative]),
            LogitInput::SigmoidLogit(z) => line.logits = Some(vec![*z]),
            LogitInput::EmbeddingPair { query, document } => {
                line.query_embedding = Some(query.clone());
                line.doc_embedding = Some(document.clone());
            }
        }
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out.into_bytes())
}

impl LogitsFile {
    pub fn queries(&self) -> Vec<(&str, Vec<&LogitRecord>)> {
        group_by_query(&self.records, |r| &r.query_id)
    }
}

/// Everything one evaluation produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema: String,
    /// Scoring regime label when scores were computed from logits.
    pub regime: Option<String>,
    pub queries_evaluated: usize,
    /// Queries dropped because no judged-relevant document exists for them.
    pub skipped_queries: Vec<String>,
    /// Judged-relevant documents missing from each query's candidates,
    /// only for queries where that count is non-zero.
    pub unretrieved_relevant: BTreeMap<String, usize>,
    /// Queries whose closed forms were cross-checked by enumeration.
    pub oracle_checked: usize,
    pub results: Vec<AggregateReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// JSON, raw values in `[0, 1]`.
    Json,
    /// One CSV row per metric and cutoff, raw values.
    Csv,
    /// Aligned text table, values scaled to percent with two decimals.
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" | "text" => Ok(ReportFormat::Table),
            _ => Err(Error::invalid(format!("unknown report format `{s}`"))),
        }
    }
}

pub const CSV_HEADER: &str = "metric,k,queries,oblivious,expected,range,bias,minimum,maximum,range_of_means";

pub(crate) fn csv_row(a: &AggregateReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        a.metric, a.k, a.queries, a.oblivious, a.expected, a.range_mean, a.bias, a.minimum, a.maximum, a.range_of_means
    )
}

pub(crate) fn pct(x: f64) -> String {
    let s = format!("{:.2}", 100.0 * x);
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

pub fn write_report(report: &EvaluationReport, format: ReportFormat) -> Result<Vec<u8>> {
    let mut out = String::new();
    match format {
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(report)?;
            out.push('\n');
        }
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for a in &report.results {
                out.push_str(&csv_row(a));
                out.push('\n');
            }
        }
        ReportFormat::Table => {
            if let Some(regime) = &report.regime {
                let _ = writeln!(out, "regime: {regime}");
            }
            let _ = writeln!(
                out,
                "queries: {} evaluated, {} skipped (no relevant document)",
                report.queries_evaluated,
                report.skipped_queries.len()
            );
            let _ = writeln!(
                out,
                "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>14}",
                "metric", "M_obl", "E[M]", "Range", "Bias", "M_min", "M_max", "Range(extrema)"
            );
            for a in &report.results {
                let _ = writeln!(
                    out,
                    "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>14}",
                    format!("{}@{}", a.metric, a.k),
                    pct(a.oblivious),
                    pct(a.expected),
                    pct(a.range_mean),
                    pct(a.bias),
                    pct(a.minimum),
                    pct(a.maximum),
                    pct(a.range_of_means)
                );
            }
        }
    }
    Ok(out.into_bytes())
}

pub fn parse_report(bytes: &[u8]) -> Result<EvaluationReport> {
    let report: EvaluationReport = serde_json::from_slice(bytes)?;
    if report.schema != REPORT_SCHEMA {
        return Err(Error::invalid(format!("unsupported report schema `{}`", report.schema)));
    }
    Ok(report)
}
