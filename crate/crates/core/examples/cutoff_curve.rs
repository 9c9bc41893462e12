//! nDCG and MRR against the cutoff, in CSV, for plotting the band
//! between the worst and best tie order.

use tierank::cli::{curve, write_curve, EvalConfig, ScoreSource};
use tierank::synth::{generate, SynthConfig};
use tierank::{MetricKind, PrecisionFormat, ScoringRegime};

fn main() -> tierank::Result<()> {
    let (logits, qrels) = generate(&SynthConfig { seed: 1, ..SynthConfig::askubuntu() })?;
    let sources: Vec<ScoreSource> = [
        ScoringRegime::pure(PrecisionFormat::BF16),
        ScoringRegime::high_precision(PrecisionFormat::BF16)?,
    ]
    .into_iter()
    .map(|regime| ScoreSource::Logits { file: &logits, regime, normalize: true })
    .collect();
    let config = EvalConfig {
        metrics: vec![MetricKind::Ndcg, MetricKind::Rr],
        cutoffs: (1..=10).collect(),
        ..EvalConfig::default()
    };
    let rows = curve(&sources, &qrels, &config)?;
    print!("{}", String::from_utf8_lossy(&write_curve(&rows)));
    Ok(())
}
