//! Score the same logits with the scoring function in bf16 and with
//! high-precision scoring (bf16 logits, fp32 softmax) and count the ties.

use tierank::scoring::score_batch;
use tierank::synth::{generate, SynthConfig};
use tierank::{group_ties, LogitInput, PrecisionFormat, ScoredCandidate, ScoringRegime};

fn main() -> tierank::Result<()> {
    let config = SynthConfig {
        queries: 1,
        candidates: 100,
        relevant_rate: 0.05,
        seed: 42,
        ..SynthConfig::default()
    };
    let (logits, _) = generate(&config)?;
    let inputs: Vec<LogitInput> = logits.records.iter().map(|r| r.input.clone()).collect();

    let regimes = [
        ScoringRegime::pure(PrecisionFormat::FP32),
        ScoringRegime::pure(PrecisionFormat::BF16),
        ScoringRegime::high_precision(PrecisionFormat::BF16)?,
    ];
    for regime in regimes {
        let scores = score_batch(&inputs, regime, true)?;
        let candidates: Vec<ScoredCandidate> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| ScoredCandidate::new(format!("d{i}"), s, false, i))
            .collect();
        let profile = group_ties(&candidates)?;
        let stats = profile.stats(10);
        let mut top: Vec<f64> = scores.clone();
        top.sort_by(|a, b| b.total_cmp(a));
        println!(
            "{:<11} {:>3} distinct scores, largest tie {:>2}, tie at rank 10: {:<5}  top: {:?}",
            regime.label(),
            profile.num_groups(),
            stats.largest_group,
            stats.straddling_tie,
            &top[..4]
        );
    }
    Ok(())
}
