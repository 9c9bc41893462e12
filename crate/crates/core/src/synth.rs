//! Seeded synthetic logit corpora.
//!
//! Non-relevant candidates draw their logits from a standard normal;
//! relevant candidates get the positive logit (or the embedding alignment)
//! shifted by `shift`. The corpus is a pure function of its config.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::floatsim::{quantize, PrecisionFormat};
use crate::io::{LogitRecord, LogitsFile, QrelsFile, QrelsRecord};
use crate::scoring::{LogitInput, ScoringFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub queries: usize,
    pub candidates: usize,
    /// Probability that a candidate is relevant.
    pub relevant_rate: f64,
    pub function: ScoringFunction,
    pub shift: f64,
    /// Embedding width for the dot-product function.
    pub dim: usize,
    /// Grid the logits are stored on.
    pub format: PrecisionFormat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            queries: 100,
            candidates: 100,
            relevant_rate: 0.03,
            function: ScoringFunction::Softmax,
            shift: 3.0,
            dim: 32,
            format: PrecisionFormat::FP32,
        }
    }
}

impl SynthConfig {
    /// 717 queries of 100 candidates, about 2.9 relevant each.
    pub fn miracl() -> Self {
        SynthConfig {
            queries: 717,
            candidates: 100,
            relevant_rate: 0.029,
            ..Self::default()
        }
    }

    /// 375 queries of 20 candidates, about 6 relevant each.
    pub fn askubuntu() -> Self {
        SynthConfig {
            queries: 375,
            candidates: 20,
            relevant_rate: 0.3,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "miracl" => Ok(Self::miracl()),
            "askubuntu" => Ok(Self::askubuntu()),
            _ => Err(Error::invalid(format!("unknown preset `{name}`"))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.queries == 0 || self.candidates == 0 {
            return Err(Error::invalid("need at least one query and one candidate"));
        }
        if !(0.0..=1.0).contains(&self.relevant_rate) {
            return Err(Error::invalid("relevant rate must lie in [0, 1]"));
        }
        if !self.shift.is_finite() {
            return Err(Error::invalid("shift must be finite"));
        }
        if self.function == ScoringFunction::Dot && self.dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Generates a logits file and matching judgments.
pub fn generate(config: &SynthConfig) -> Result<(LogitsFile, QrelsFile)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = (config.queries - 1).to_string().len();
    let doc_width = (config.candidates - 1).to_string().len();
    let q = |x: f64| quantize(x, config.format);
    let mut records = Vec::with_capacity(config.queries * config.candidates);
    let mut qrels = Vec::new();
    for qi in 0..config.queries {
        let query_id = format!("q{qi:0width$}");
        let query_vec: Vec<f64> = match config.function {
            ScoringFunction::Dot => (0..config.dim).map(|_| normal(&mut rng)).collect(),
            _ => Vec::new(),
        };
        let query_norm = query_vec.iter().map(|x| x * x).sum::<f64>().sqrt();
        for di in 0..config.candidates {
            let doc_id = format!("d{di:0doc_width$}");
            let relevant = rng.random::<f64>() < config.relevant_rate;
            let shift = if relevant { config.shift } else { 0.0 };
            let input = match config.function {
                ScoringFunction::Softmax => LogitInput::SoftmaxLogits {
                    positive: q(normal(&mut rng) + shift),
                    negative: q(normal(&mut rng)),
                },
                ScoringFunction::Sigmoid => LogitInput::SigmoidLogit(q(normal(&mut rng) + shift)),
                ScoringFunction::Dot => {
                    let document = query_vec
                        .iter()
                        .map(|&x| q(normal(&mut rng) + shift * x / query_norm.max(f64::MIN_POSITIVE)))
                        .collect();
                    LogitInput::EmbeddingPair {
                        query: query_vec.iter().map(|&x| q(x)).collect(),
                        document,
                    }
                }
            };
            // every pair is judged, so a zero relevant rate still yields a usable qrels file
            qrels.push(QrelsRecord {
                query_id: query_id.clone(),
                doc_id: doc_id.clone(),
                relevance: relevant as u32,
            });
            records.push(LogitRecord {
                query_id: query_id.clone(),
                doc_id,
                input,
            });
        }
    }
    Ok((
        LogitsFile {
            function: config.function,
            format: config.format,
            records,
        },
        QrelsFile { records: qrels },
    ))
}
