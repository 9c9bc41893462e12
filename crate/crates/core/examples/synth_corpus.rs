//! Write a seeded synthetic corpus (logits + qrels) to a directory.
//!
//! cargo run --example synth_corpus -- out_dir [miracl|askubuntu] [seed]

use tierank::io;
use tierank::synth::{generate, SynthConfig};

fn main() -> tierank::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "synth-out".into());
    let config = match args.next() {
        Some(p) => SynthConfig::preset(&p)?,
        None => SynthConfig::default(),
    };
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let (logits, qrels) = generate(&SynthConfig { seed, ..config })?;

    std::fs::create_dir_all(&dir)?;
    std::fs::write(format!("{dir}/logits.jsonl"), io::write_logits(&logits)?)?;
    std::fs::write(format!("{dir}/qrels.txt"), io::write_qrels(&qrels))?;
    let relevant = qrels.records.iter().filter(|r| r.is_relevant()).count();
    println!(
        "wrote {} logit records and {} judgments ({relevant} relevant) to {dir}/",
        logits.records.len(),
        qrels.records.len()
    );
    Ok(())
}
