//! Tie-oblivious and tie-aware ranking metrics.
//!
//! All metrics use binary gains. For a query with tie groups `G_1..G_N` the
//! tie-aware quantities are the exact expectation over all orderings inside
//! the groups, and the best and worst values reachable by reordering inside
//! groups. Expectations are computed in closed form after a single scan over
//! the groups, so no permutation is ever materialized.
//!
//! The closed forms accumulate their terms in rank order, the same order the
//! deterministic evaluator uses. When every group that reaches the cutoff is
//! pure (all relevant or none), both routes perform identical floating-point
//! operations and agree bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ties::{RankedList, ScoredCandidate, TieProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Hits,
    Precision,
    Recall,
    F1,
    Ndcg,
    Rr,
    Ap,
}

impl MetricKind {
    pub const ALL: [MetricKind; 7] = [
        MetricKind::Hits,
        MetricKind::Precision,
        MetricKind::Recall,
        MetricKind::F1,
        MetricKind::Ndcg,
        MetricKind::Rr,
        MetricKind::Ap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Hits => "hits",
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
            MetricKind::F1 => "f1",
            MetricKind::Ndcg => "ndcg",
            MetricKind::Rr => "rr",
            MetricKind::Ap => "ap",
        }
    }

    /// Metrics whose value is a function of the number of relevant items in
    /// the top `k` only.
    pub fn is_count_based(&self) -> bool {
        matches!(
            self,
            MetricKind::Hits | MetricKind::Precision | MetricKind::Recall | MetricKind::F1
        )
    }

    fn needs_relevant(&self) -> bool {
        matches!(
            self,
            MetricKind::Recall | MetricKind::F1 | MetricKind::Ndcg | MetricKind::Ap
        )
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "hits" => MetricKind::Hits,
            "precision" | "p" => MetricKind::Precision,
            "recall" | "r" => MetricKind::Recall,
            "f1" => MetricKind::F1,
            "ndcg" => MetricKind::Ndcg,
            "rr" | "mrr" => MetricKind::Rr,
            "ap" | "map" => MetricKind::Ap,
            other => return Err(Error::invalid(format!("unknown metric `{other}`"))),
        })
    }
}

fn check_cutoff(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("cutoff k must be at least 1"));
    }
    Ok(())
}

fn check_relevant(metric: MetricKind, total_relevant: usize) -> Result<()> {
    if metric.needs_relevant() && total_relevant == 0 {
        return Err(Error::invalid(format!(
            "{metric} is undefined for a query without relevant items"
        )));
    }
    Ok(())
}

/// Discount of rank `r` (1-based): `1 / log2(r + 1)`.
pub fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// DCG of the ideal ranking with `min(total_relevant, k)` relevant items on top.
fn ideal_dcg(total_relevant: usize, k: usize) -> f64 {
    (1..=total_relevant.min(k)).map(discount).sum()
}

/// Deterministic metric of one fixed ranking, given as relevance flags in
/// rank order. Only the first `k` flags are read.
pub fn evaluate_ranking<I>(relevance: I, total_relevant: usize, metric: MetricKind, k: usize) -> Result<f64>
where
    I: IntoIterator<Item = bool>,
{
    check_cutoff(k)?;
    check_relevant(metric, total_relevant)?;
    let top = relevance.into_iter().take(k);
    let n_plus = total_relevant as f64;
    Ok(match metric {
        MetricKind::Hits | MetricKind::Precision | MetricKind::Recall | MetricKind::F1 => {
            let hits = top.filter(|&r| r).count() as f64;
            match metric {
                MetricKind::Hits => hits,
                MetricKind::Precision => hits / k as f64,
                MetricKind::Recall => hits / n_plus,
                _ => 2.0 * hits / (k + total_relevant) as f64,
            }
        }
        MetricKind::Ndcg => {
            let mut dcg = 0.0;
            for (i, rel) in top.enumerate() {
                if rel {
                    dcg += discount(i + 1);
                }
            }
            dcg / ideal_dcg(total_relevant, k)
        }
        MetricKind::Rr => top
            .enumerate()
            .find(|&(_, rel)| rel)
            .map_or(0.0, |(i, _)| 1.0 / (i + 1) as f64),
        MetricKind::Ap => {
            let mut hits = 0usize;
            let mut sum = 0.0;
            for (i, rel) in top.enumerate() {
                if rel {
                    hits += 1;
                    sum += hits as f64 / (i + 1) as f64;
                }
            }
            sum / n_plus
        }
    })
}

/// Expected number of relevant items in the top `k`, `sum_n p_n t_n`, as an
/// exact fraction. Every included group but the last is fully inside the
/// cutoff and contributes its integer `r_n`, so the sum collapses to
/// `(R |G_s| + r_s t_s) / |G_s|` over the straddling group `s`.
fn expected_hits_fraction(profile: &TieProfile, k: usize) -> (u128, u128) {
    let mut full = 0u128;
    let mut last = (0u128, 1u128);
    for (g, _, t) in profile.included(k) {
        if t == g.size {
            full += g.relevant_count as u128;
        } else {
            last = ((g.relevant_count * t) as u128, g.size as u128);
        }
    }
    (full * last.1 + last.0, last.1)
}

/// Closed-form expectation of Hits, Precision, Recall or F1 at `k`.
pub fn expected_count_metric(profile: &TieProfile, k: usize, metric: MetricKind) -> Result<f64> {
    check_cutoff(k)?;
    if !metric.is_count_based() {
        return Err(Error::invalid(format!("{metric} is not a count-based metric")));
    }
    let n_plus = profile.total_relevant();
    check_relevant(metric, n_plus)?;
    // a single rounding: the result is the nearest double to the rational
    let (num, den) = expected_hits_fraction(profile, k);
    let (num, den) = match metric {
        MetricKind::Hits => (num, den),
        MetricKind::Precision => (num, den * k as u128),
        MetricKind::Recall => (num, den * n_plus as u128),
        _ => (2 * num, den * (k + n_plus) as u128),
    };
    Ok(num as f64 / den as f64)
}

/// Closed-form `E[nDCG@k]`: each rank contributes its discount weighted by
/// the relevance probability of the group occupying it.
pub fn expected_ndcg(profile: &TieProfile, k: usize) -> Result<f64> {
    check_cutoff(k)?;
    check_relevant(MetricKind::Ndcg, profile.total_relevant())?;
    let mut dcg = 0.0;
    for (g, before, t) in profile.included(k) {
        if g.relevant_count == 0 {
            continue;
        }
        let p = g.relevance_probability();
        for rank in before + 1..=before + t {
            dcg += p * discount(rank);
        }
    }
    Ok(dcg / ideal_dcg(profile.total_relevant(), k))
}

/// Closed-form `E[RR@k]`.
///
/// Only the first group holding a relevant item matters. For each number
/// `t` of leading non-relevant slots in that group, the probability of that
/// prefix times the probability that the next slot is relevant weights the
/// reciprocal of the rank reached.
pub fn expected_rr(profile: &TieProfile, k: usize) -> Result<f64> {
    check_cutoff(k)?;
    let Some((g, before)) = profile
        .groups()
        .iter()
        .zip(profile.cumulative())
        .find(|(g, _)| g.relevant_count > 0)
        .map(|(g, &before)| (g, before))
    else {
        return Ok(0.0);
    };
    if k <= before {
        return Ok(0.0);
    }
    let size = g.size;
    let relevant = g.relevant_count;
    let last = (size - 1).min(k - before - 1);
    let mut expected = 0.0;
    // probability that the first t slots of the group are all non-relevant
    let mut all_miss = 1.0;
    for t in 0..=last {
        let next_hit = relevant as f64 / (size - t) as f64;
        expected += 1.0 / (before + t + 1) as f64 * all_miss * next_hit;
        if t + relevant >= size {
            break;
        }
        all_miss *= (size - relevant - t) as f64 / (size - t) as f64;
    }
    Ok(expected)
}

/// Closed-form `E[AP@k]`, normalized by `N+`.
///
/// A slot at offset `t` of group `n` is relevant with probability `p_n`; given
/// that, the expected number of relevant items at or above it is
/// `R_{n-1} + 1 + t (r_n - 1) / (|G_n| - 1)`.
pub fn expected_ap(profile: &TieProfile, k: usize) -> Result<f64> {
    check_cutoff(k)?;
    let n_plus = profile.total_relevant();
    check_relevant(MetricKind::Ap, n_plus)?;
    let mut sum = 0.0;
    let mut relevant_before = 0usize;
    for (g, before, t_n) in profile.included(k) {
        if g.relevant_count > 0 {
            let p = g.relevance_probability();
            for t in 0..t_n {
                // t = 0 whenever |G| = 1, so the fraction is only formed for |G| >= 2
                let others = if t == 0 {
                    0.0
                } else {
                    (t * (g.relevant_count - 1)) as f64 / (g.size - 1) as f64
                };
                let expected_hits = (relevant_before + 1) as f64 + others;
                let rank = (before + t + 1) as f64;
                sum += p * (expected_hits / rank);
            }
        }
        relevant_before += g.relevant_count;
    }
    Ok(sum / n_plus as f64)
}

/// Closed-form expectation of any metric.
pub fn expected_metric(profile: &TieProfile, metric: MetricKind, k: usize) -> Result<f64> {
    match metric {
        MetricKind::Ndcg => expected_ndcg(profile, k),
        MetricKind::Rr => expected_rr(profile, k),
        MetricKind::Ap => expected_ap(profile, k),
        _ => expected_count_metric(profile, k, metric),
    }
}

/// Relevance flags of the top `k` when every group lists its relevant items
/// first (`best`) or last.
fn extreme_arrangement(profile: &TieProfile, k: usize, best: bool) -> Vec<bool> {
    let mut flags = Vec::with_capacity(k.min(profile.total_items()));
    for (g, _, t) in profile.included(k) {
        let r = g.relevant_count;
        flags.extend((0..t).map(|i| if best { i < r } else { i >= g.size - r }));
    }
    flags
}

/// `(M_min, M_max)`: the metric with relevant items placed last, respectively
/// first, inside every tie group.
pub fn extrema(profile: &TieProfile, metric: MetricKind, k: usize) -> Result<(f64, f64)> {
    let n_plus = profile.total_relevant();
    let min = evaluate_ranking(extreme_arrangement(profile, k, false), n_plus, metric, k)?;
    let max = evaluate_ranking(extreme_arrangement(profile, k, true), n_plus, metric, k)?;
    Ok((min, max))
}

/// The full set of tie-aware quantities for one metric at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: MetricKind,
    pub k: usize,
    pub oblivious: f64,
    pub expected: f64,
    pub maximum: f64,
    pub minimum: f64,
    pub range: f64,
    pub bias: f64,
}

/// One query ready for evaluation: its ranked candidates and tie profile.
#[derive(Debug, Clone)]
pub struct Query {
    ranked: RankedList,
    profile: TieProfile,
}

impl Query {
    pub fn new(candidates: Vec<ScoredCandidate>) -> Result<Self> {
        Ok(Self::from_ranked(RankedList::new(candidates)?))
    }

    pub fn from_ranked(ranked: RankedList) -> Self {
        let profile = ranked.profile();
        Query { ranked, profile }
    }

    /// Counts judged-relevant documents missing from the candidate list
    /// toward `N+`. They can never be retrieved.
    pub fn with_unretrieved_relevant(mut self, extra: usize) -> Self {
        self.profile = self.profile.with_unretrieved_relevant(extra);
        self
    }

    pub fn ranked(&self) -> &RankedList {
        &self.ranked
    }

    pub fn profile(&self) -> &TieProfile {
        &self.profile
    }

    pub fn total_relevant(&self) -> usize {
        self.profile.total_relevant()
    }

    /// Metric of the index-preserving ordering.
    pub fn oblivious(&self, metric: MetricKind, k: usize) -> Result<f64> {
        if self.total_relevant() == 0 {
            return Err(Error::invalid("query has no relevant items"));
        }
        evaluate_ranking(self.ranked.relevance(), self.total_relevant(), metric, k)
    }

    pub fn expected(&self, metric: MetricKind, k: usize) -> Result<f64> {
        expected_metric(&self.profile, metric, k)
    }

    pub fn extrema(&self, metric: MetricKind, k: usize) -> Result<(f64, f64)> {
        extrema(&self.profile, metric, k)
    }

    pub fn report(&self, metric: MetricKind, k: usize) -> Result<MetricReport> {
        let oblivious = self.oblivious(metric, k)?;
        let expected = self.expected(metric, k)?;
        let (minimum, maximum) = self.extrema(metric, k)?;
        Ok(MetricReport {
            metric,
            k,
            oblivious,
            expected,
            maximum,
            minimum,
            range: maximum - minimum,
            bias: oblivious - expected,
        })
    }
}

/// Tie-oblivious metric: stable descending sort, ties in ingestion order.
pub fn oblivious_metric(candidates: &[ScoredCandidate], metric: MetricKind, k: usize) -> Result<f64> {
    Query::new(candidates.to_vec())?.oblivious(metric, k)
}

/// All six reported quantities for one candidate list.
pub fn report(candidates: &[ScoredCandidate], metric: MetricKind, k: usize) -> Result<MetricReport> {
    Query::new(candidates.to_vec())?.report(metric, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub query_id: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

/// Per-query reports for one `(metric, k)` and their means over queries.
///
/// Range is aggregated two ways: `range_mean` averages the per-query ranges,
/// `range_of_means` is the difference of the averaged extrema. They agree
/// mathematically but are summed separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub metric: MetricKind,
    pub k: usize,
    pub queries: usize,
    pub oblivious: f64,
    pub expected: f64,
    pub maximum: f64,
    pub minimum: f64,
    pub bias: f64,
    pub range_mean: f64,
    pub range_of_means: f64,
    pub per_query: Vec<QueryReport>,
}

/// Pairwise summation over a fixed split; monotone in every input.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().fold(0.0, |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn mean_of(reports: &[QueryReport], field: impl Fn(&MetricReport) -> f64) -> f64 {
    let values: Vec<f64> = reports.iter().map(|q| field(&q.report)).collect();
    pairwise_sum(&values) / values.len() as f64
}

/// Averages per-query reports of a single `(metric, k)`.
///
/// Queries are put in ascending id order first, so the result does not
/// depend on the order they were produced in.
pub fn aggregate(reports: &[QueryReport]) -> Result<AggregateReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate zero queries"))?;
    let (metric, k) = (first.report.metric, first.report.k);
    if reports
        .iter()
        .any(|q| q.report.metric != metric || q.report.k != k)
    {
        return Err(Error::invalid("aggregated reports must share metric and cutoff"));
    }
    let mut per_query = reports.to_vec();
    per_query.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    if per_query.windows(2).any(|w| w[0].query_id == w[1].query_id) {
        return Err(Error::invalid("duplicate query id in aggregation"));
    }
    let maximum = mean_of(&per_query, |r| r.maximum);
    let minimum = mean_of(&per_query, |r| r.minimum);
    Ok(AggregateReport {
        metric,
        k,
        queries: per_query.len(),
        oblivious: mean_of(&per_query, |r| r.oblivious),
        expected: mean_of(&per_query, |r| r.expected),
        maximum,
        minimum,
        bias: mean_of(&per_query, |r| r.bias),
        range_mean: mean_of(&per_query, |r| r.range),
        range_of_means: maximum - minimum,
        per_query,
    })
}
