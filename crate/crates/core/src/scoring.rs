//! Relevance scoring functions evaluated under a precision regime.
//!
//! Softmax, sigmoid and the embedding inner product are evaluated one
//! elementary operation at a time, each operation correctly rounded into
//! the regime's scoring format. With high-precision scoring the logits stay
//! on their narrow grid and only the scoring function runs in FP32.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floatsim::{qfunc, qop, quantize, BinaryOp, PrecisionFormat, UnaryFn};

/// Which scoring function turns logits into a relevance score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringFunction {
    Softmax,
    Sigmoid,
    Dot,
}

impl fmt::Display for ScoringFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringFunction::Softmax => "softmax",
            ScoringFunction::Sigmoid => "sigmoid",
            ScoringFunction::Dot => "dot",
        })
    }
}

impl FromStr for ScoringFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "softmax" => Ok(ScoringFunction::Softmax),
            "sigmoid" => Ok(ScoringFunction::Sigmoid),
            "dot" | "product" | "cosine" => Ok(ScoringFunction::Dot),
            _ => Err(Error::invalid(format!("unknown scoring function `{s}`"))),
        }
    }
}

/// Precision of the model's logits and precision of the scoring function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoringRegime {
    logit_format: PrecisionFormat,
    scoring_format: PrecisionFormat,
}

impl ScoringRegime {
    /// `scoring_format` must either equal `logit_format` or strictly contain
    /// its grid, so that moving a logit into the scoring format is lossless.
    pub fn new(logit_format: PrecisionFormat, scoring_format: PrecisionFormat) -> Result<Self> {
        let widening = logit_format.is_subset_of(&scoring_format)
            && scoring_format.mantissa_bits() > logit_format.mantissa_bits();
        if scoring_format != logit_format && !widening {
            return Err(Error::constraint(format!(
                "cannot score {logit_format} logits in {scoring_format}: the scoring grid must equal or contain the logit grid"
            )));
        }
        Ok(ScoringRegime {
            logit_format,
            scoring_format,
        })
    }

    /// Logits and scoring function both in `fmt`.
    pub fn pure(fmt: PrecisionFormat) -> Self {
        ScoringRegime {
            logit_format: fmt,
            scoring_format: fmt,
        }
    }

    /// Logits in `low`, scoring function upcast to FP32.
    pub fn high_precision(low: PrecisionFormat) -> Result<Self> {
        Self::new(low, PrecisionFormat::FP32)
    }

    pub fn logit_format(&self) -> PrecisionFormat {
        self.logit_format
    }

    pub fn scoring_format(&self) -> PrecisionFormat {
        self.scoring_format
    }

    pub fn is_high_precision(&self) -> bool {
        self.scoring_format.mantissa_bits() > self.logit_format.mantissa_bits()
    }

    /// `bf16`, `fp32`, or `bf16->fp32` for upcast regimes.
    pub fn label(&self) -> String {
        if self.is_high_precision() {
            format!("{}->{}", self.logit_format, self.scoring_format)
        } else {
            self.logit_format.name()
        }
    }
}

impl fmt::Display for ScoringRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ScoringRegime {
    type Err = Error;

    /// Accepts `fmt`, `low->high`, `low>high`, or `low+hps`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(low) = s.strip_suffix("+hps") {
            return ScoringRegime::high_precision(low.parse()?);
        }
        if let Some((low, high)) = s.split_once("->").or_else(|| s.split_once('>')) {
            return ScoringRegime::new(low.parse()?, high.parse()?);
        }
        Ok(ScoringRegime::pure(s.parse()?))
    }
}

/// Raw model output for one query-document pair.
#[derive(Debug, Clone, PartialEq)]
pub enum LogitInput {
    SoftmaxLogits { positive: f64, negative: f64 },
    SigmoidLogit(f64),
    EmbeddingPair { query: Vec<f64>, document: Vec<f64> },
}

impl LogitInput {
    pub fn function(&self) -> ScoringFunction {
        match self {
            LogitInput::SoftmaxLogits { .. } => ScoringFunction::Softmax,
            LogitInput::SigmoidLogit(_) => ScoringFunction::Sigmoid,
            LogitInput::EmbeddingPair { .. } => ScoringFunction::Dot,
        }
    }

    /// Rounds every component onto `fmt`'s grid, as a model emitting `fmt`
    /// values would have.
    pub fn quantized(&self, fmt: PrecisionFormat) -> Result<LogitInput> {
        let q = |x: f64| -> Result<f64> {
            if x.is_nan() {
                Err(Error::invalid("NaN logit"))
            } else {
                Ok(quantize(x, fmt))
            }
        };
        Ok(match self {
            LogitInput::SoftmaxLogits { positive, negative } => LogitInput::SoftmaxLogits {
                positive: q(*positive)?,
                negative: q(*negative)?,
            },
            LogitInput::SigmoidLogit(z) => LogitInput::SigmoidLogit(q(*z)?),
            LogitInput::EmbeddingPair { query, document } => {
                if query.is_empty() || query.len() != document.len() {
                    return Err(Error::invalid(format!(
                        "embedding lengths {} and {} must match and be non-zero",
                        query.len(),
                        document.len()
                    )));
                }
                LogitInput::EmbeddingPair {
                    query: query.iter().map(|&x| q(x)).collect::<Result<_>>()?,
                    document: document.iter().map(|&x| q(x)).collect::<Result<_>>()?,
                }
            }
        })
    }
}

/// A score together with the regime that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub value: f64,
    pub regime: ScoringRegime,
}

/// Two-logit softmax probability of the positive class.
///
/// The larger logit is subtracted first; both subtractions, both
/// exponentials, the sum and the division are each rounded into the
/// scoring format.
pub fn score_softmax(positive: f64, negative: f64, regime: ScoringRegime) -> Result<RelevanceScore> {
    if positive.is_nan() || negative.is_nan() {
        return Err(Error::invalid("NaN softmax logit"));
    }
    if positive == f64::NEG_INFINITY && negative == f64::NEG_INFINITY {
        return Err(Error::invalid("softmax is undefined when both logits are -inf"));
    }
    let lf = regime.logit_format;
    let (zp, zn) = (quantize(positive, lf), quantize(negative, lf));
    let fmt = regime.scoring_format;
    let m = zp.max(zn);
    let ep = qfunc(qop(zp, m, BinaryOp::Sub, fmt), UnaryFn::Exp, fmt);
    let en = qfunc(qop(zn, m, BinaryOp::Sub, fmt), UnaryFn::Exp, fmt);
    let denom = qop(ep, en, BinaryOp::Add, fmt);
    finish(qop(ep, denom, BinaryOp::Div, fmt), regime)
}

/// Logistic sigmoid `1 / (1 + exp(-z))`, step by step in the scoring format.
pub fn score_sigmoid(z: f64, regime: ScoringRegime) -> Result<RelevanceScore> {
    if z.is_nan() {
        return Err(Error::invalid("NaN sigmoid logit"));
    }
    let fmt = regime.scoring_format;
    let z = quantize(z, regime.logit_format);
    let e = qfunc(qfunc(z, UnaryFn::Negate, fmt), UnaryFn::Exp, fmt);
    let denom = qop(1.0, e, BinaryOp::Add, fmt);
    finish(qop(1.0, denom, BinaryOp::Div, fmt), regime)
}

/// Inner product of two embeddings, accumulated strictly left to right.
///
/// With `normalize` each vector is first divided by its Euclidean norm
/// (cosine similarity), all in the scoring format.
pub fn score_dot(
    query: &[f64],
    document: &[f64],
    regime: ScoringRegime,
    normalize: bool,
) -> Result<RelevanceScore> {
    if query.is_empty() || query.len() != document.len() {
        return Err(Error::invalid(format!(
            "embedding lengths {} and {} must match and be non-zero",
            query.len(),
            document.len()
        )));
    }
    if query.iter().chain(document).any(|x| x.is_nan()) {
        return Err(Error::invalid("NaN embedding component"));
    }
    let fmt = regime.scoring_format;
    let lf = regime.logit_format;
    let load = |v: &[f64]| -> Vec<f64> { v.iter().map(|&x| quantize(x, lf)).collect() };
    let (mut q, mut d) = (load(query), load(document));
    if normalize {
        unit_normalize(&mut q, fmt)?;
        unit_normalize(&mut d, fmt)?;
    }
    let acc = dot(&q, &d, fmt);
    if !acc.is_finite() {
        return Err(Error::invalid(format!("inner product overflowed {fmt}")));
    }
    Ok(RelevanceScore { value: acc, regime })
}

fn dot(a: &[f64], b: &[f64], fmt: PrecisionFormat) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (&x, &y)| {
        qop(acc, qop(x, y, BinaryOp::Mul, fmt), BinaryOp::Add, fmt)
    })
}

fn unit_normalize(v: &mut [f64], fmt: PrecisionFormat) -> Result<()> {
    let norm = qfunc(dot(v, v, fmt), UnaryFn::Sqrt, fmt);
    if norm == 0.0 {
        return Err(Error::invalid("cannot normalize a zero embedding"));
    }
    for x in v.iter_mut() {
        *x = qop(*x, norm, BinaryOp::Div, fmt);
    }
    Ok(())
}

fn finish(value: f64, regime: ScoringRegime) -> Result<RelevanceScore> {
    if value.is_nan() {
        return Err(Error::invalid("score evaluated to NaN"));
    }
    Ok(RelevanceScore { value, regime })
}

/// Scores one input under `regime`. `normalize` applies to embeddings only.
pub fn score(input: &LogitInput, regime: ScoringRegime, normalize: bool) -> Result<RelevanceScore> {
    match input {
        LogitInput::SoftmaxLogits { positive, negative } => score_softmax(*positive, *negative, regime),
        LogitInput::SigmoidLogit(z) => score_sigmoid(*z, regime),
        LogitInput::EmbeddingPair { query, document } => score_dot(query, document, regime, normalize),
    }
}

/// High-precision scoring: logits produced in `low`, scoring function in FP32.
pub fn score_hps(
    input: &LogitInput,
    function: ScoringFunction,
    low: PrecisionFormat,
    normalize: bool,
) -> Result<RelevanceScore> {
    if input.function() != function {
        return Err(Error::invalid(format!(
            "{} input cannot be scored with {function}",
            input.function()
        )));
    }
    score(input, ScoringRegime::high_precision(low)?, normalize)
}

/// Scores a batch in parallel. Output order follows input order and each
/// score is independent of how the batch is split.
pub fn score_batch(inputs: &[LogitInput], regime: ScoringRegime, normalize: bool) -> Result<Vec<f64>> {
    inputs
        .par_iter()
        .map(|input| score(input, regime, normalize).map(|s| s.value))
        .collect()
}
