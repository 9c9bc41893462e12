//! Evaluate a run file against qrels.
//!
//! cargo run --example evaluate_run -- path/to/run path/to/qrels
//!
//! Without arguments a small bundled run is used.

use tierank::cli::{evaluate, EvalConfig, ScoreSource};
use tierank::io::{self, ReportFormat};
use tierank::MetricKind;

const RUN: &str = "\
q1 Q0 a 1 1.00000000 bf16
q1 Q0 b 2 1.00000000 bf16
q1 Q0 c 3 0.99609375 bf16
q1 Q0 d 4 0.99609375 bf16
q1 Q0 e 5 0.98828125 bf16
q2 Q0 a 1 0.75 bf16
q2 Q0 b 2 0.75 bf16
q2 Q0 c 3 0.75 bf16
";

const QRELS: &str = "\
q1 0 b 1
q1 0 d 1
q2 0 c 1
";

fn main() -> tierank::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (run, qrels) = match &args[..] {
        [run, qrels, ..] => (std::fs::read(run)?, std::fs::read(qrels)?),
        _ => (RUN.as_bytes().to_vec(), QRELS.as_bytes().to_vec()),
    };
    let run = io::parse_run(&run)?;
    let qrels = io::parse_qrels(&qrels)?;

    let config = EvalConfig {
        metrics: vec![MetricKind::Ndcg, MetricKind::Rr, MetricKind::Ap, MetricKind::Recall],
        cutoffs: vec![1, 3, 10],
        oracle: true,
        ..EvalConfig::default()
    };
    let report = evaluate(&ScoreSource::Run(&run), &qrels, &config)?;
    print!("{}", String::from_utf8_lossy(&io::write_report(&report, ReportFormat::Table)?));
    Ok(())
}
