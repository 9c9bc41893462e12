//! Same synthetic logits, three precision regimes: fp32 throughout, bf16
//! throughout, and bf16 logits with fp32 scoring.

use tierank::cli::{compare, write_comparison, EvalConfig};
use tierank::io::ReportFormat;
use tierank::synth::{generate, SynthConfig};
use tierank::{MetricKind, PrecisionFormat, ScoringRegime};

fn main() -> tierank::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let (logits, qrels) = generate(&SynthConfig { seed, ..SynthConfig::miracl() })?;
    let regimes = [
        ScoringRegime::pure(PrecisionFormat::FP32),
        ScoringRegime::pure(PrecisionFormat::BF16),
        ScoringRegime::high_precision(PrecisionFormat::BF16)?,
    ];
    let config = EvalConfig {
        metrics: vec![MetricKind::Ndcg, MetricKind::Rr, MetricKind::Ap],
        cutoffs: vec![10],
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..EvalConfig::default()
    };
    let cmp = compare(&logits, &qrels, &regimes, true, &config)?;
    println!("{} queries evaluated\n", cmp.regimes[0].queries_evaluated);
    print!("{}", String::from_utf8_lossy(&write_comparison(&cmp, ReportFormat::Table)?));
    Ok(())
}
