//! Tie groups of a bf16-scored candidate list and how a cutoff cuts them.

use tierank::{RankedList, ScoredCandidate};

fn main() -> tierank::Result<()> {
    let scores = [
        1.0, 1.0, 1.0, 0.99609375, 0.99609375, 0.99609375, 0.99609375, 0.9921875, 0.98828125, 0.98828125, 0.5,
    ];
    let relevant = [false, false, true, false, true, false, false, false, true, false, false];
    let candidates: Vec<ScoredCandidate> = scores
        .iter()
        .zip(relevant)
        .enumerate()
        .map(|(i, (&s, r))| ScoredCandidate::new(format!("doc{i}"), s, r, i))
        .collect();

    let ranked = RankedList::new(candidates)?;
    let profile = ranked.profile();
    println!("{:>10} {:>5} {:>9} {:>6}", "score", "size", "relevant", "c_n");
    for (g, c) in profile.groups().iter().zip(&profile.cumulative()[1..]) {
        println!("{:>10} {:>5} {:>9} {:>6}", g.value, g.size, g.relevant_count, c);
    }

    for k in [2, 3, 5, 8] {
        let stats = profile.stats(k);
        println!(
            "k={k}: items taken per group {:?}, rank k inside a tie: {}",
            profile.truncation_counts(k),
            stats.straddling_tie
        );
    }
    Ok(())
}
