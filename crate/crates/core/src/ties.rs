//! Tie groups over a scored candidate list.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One candidate of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub doc_id: String,
    pub score: f64,
    pub relevant: bool,
    /// Position in the ingested candidate order, unique within a query.
    pub original_index: usize,
}

impl ScoredCandidate {
    pub fn new(doc_id: impl Into<String>, score: f64, relevant: bool, original_index: usize) -> Self {
        ScoredCandidate {
            doc_id: doc_id.into(),
            score,
            relevant,
            original_index,
        }
    }
}

/// Candidates sorted by descending score, ties kept in ascending
/// `original_index` order.
///
/// This is the fixed, index-preserving ordering a tie-oblivious evaluator
/// would use.
#[derive(Debug, Clone)]
pub struct RankedList {
    candidates: Vec<ScoredCandidate>,
}

impl RankedList {
    pub fn new(mut candidates: Vec<ScoredCandidate>) -> Result<Self> {
        validate(&candidates)?;
        candidates.sort_by(compare_ranked);
        Ok(RankedList { candidates })
    }

    /// Wraps candidates that are already in ranked order.
    pub fn from_sorted(candidates: Vec<ScoredCandidate>) -> Result<Self> {
        validate(&candidates)?;
        if candidates
            .windows(2)
            .any(|w| compare_ranked(&w[0], &w[1]) == Ordering::Greater)
        {
            return Err(Error::invalid("candidates are not in ranked order"));
        }
        Ok(RankedList { candidates })
    }

    pub fn candidates(&self) -> &[ScoredCandidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Relevance flags in ranked order.
    pub fn relevance(&self) -> impl Iterator<Item = bool> + '_ {
        self.candidates.iter().map(|c| c.relevant)
    }

    /// Single left-to-right scan collecting `(|G_n|, r_n)` per group.
    pub fn profile(&self) -> TieProfile {
        // counting pass first so the group vector is allocated exactly once
        let count = 1 + self.candidates.windows(2).filter(|w| w[0].score != w[1].score).count();
        let mut groups: Vec<TieGroup> = Vec::with_capacity(count);
        for c in &self.candidates {
            match groups.last_mut() {
                // == treats -0.0 and +0.0 as one score
                Some(g) if g.value == c.score => {
                    g.size += 1;
                    g.relevant_count += c.relevant as usize;
                }
                _ => groups.push(TieGroup {
                    value: c.score,
                    size: 1,
                    relevant_count: c.relevant as usize,
                }),
            }
        }
        TieProfile::from_groups(groups).expect("scan of a non-empty ranked list")
    }
}

fn validate(candidates: &[ScoredCandidate]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate list is empty"));
    }
    if let Some(c) = candidates.iter().find(|c| !c.score.is_finite()) {
        return Err(Error::invalid(format!(
            "candidate `{}` has non-finite score {}",
            c.doc_id, c.score
        )));
    }
    Ok(())
}

fn compare_ranked(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .expect("scores are finite")
        .then(a.original_index.cmp(&b.original_index))
}

/// Candidates sharing one exact score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieGroup {
    pub value: f64,
    pub size: usize,
    pub relevant_count: usize,
}

impl TieGroup {
    /// Probability that a uniformly chosen slot of this group holds a
    /// relevant item.
    pub fn relevance_probability(&self) -> f64 {
        self.relevant_count as f64 / self.size as f64
    }
}

/// Ordered tie groups of one query plus the counts every closed-form
/// metric needs.
///
/// `total_relevant` is `N+`. It normally equals the sum of the groups'
/// relevant counts; judged-relevant documents that never made it into
/// the candidate list can be added with [`TieProfile::with_unretrieved_relevant`].
#[derive(Debug, Clone, PartialEq)]
pub struct TieProfile {
    groups: Vec<TieGroup>,
    cumulative: Vec<usize>,
    total_relevant: usize,
    total_items: usize,
}

impl TieProfile {
    /// Builds a profile from groups given in descending score order.
    ///
    /// Only sizes and relevant counts matter to the metrics, so callers
    /// may pass placeholder values as long as they strictly decrease.
    pub fn from_groups(groups: Vec<TieGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("profile needs at least one group"));
        }
        for g in &groups {
            if g.size == 0 || g.relevant_count > g.size {
                return Err(Error::invalid(format!(
                    "group of size {} cannot hold {} relevant items",
                    g.size, g.relevant_count
                )));
            }
        }
        if groups.windows(2).any(|w| !(w[0].value > w[1].value)) {
            return Err(Error::invalid("group values must strictly decrease"));
        }
        let mut cumulative = Vec::with_capacity(groups.len() + 1);
        cumulative.push(0);
        let mut acc = 0;
        for g in &groups {
            acc += g.size;
            cumulative.push(acc);
        }
        let total_relevant = groups.iter().map(|g| g.relevant_count).sum();
        Ok(TieProfile {
            groups,
            cumulative,
            total_relevant,
            total_items: acc,
        })
    }

    /// Convenience constructor from `(size, relevant_count)` pairs; group
    /// values are synthesized as descending integers.
    pub fn from_sizes(pairs: &[(usize, usize)]) -> Result<Self> {
        let n = pairs.len();
        let groups = pairs
            .iter()
            .enumerate()
            .map(|(i, &(size, relevant_count))| TieGroup {
                value: (n - i) as f64,
                size,
                relevant_count,
            })
            .collect();
        Self::from_groups(groups)
    }

    /// Counts `extra` judged-relevant documents that are absent from the
    /// candidate list toward `N+`.
    pub fn with_unretrieved_relevant(mut self, extra: usize) -> Self {
        self.total_relevant += extra;
        self
    }

    pub fn groups(&self) -> &[TieGroup] {
        &self.groups
    }

    /// Prefix sizes `c_0 = 0, c_1, ..., c_N`.
    pub fn cumulative(&self) -> &[usize] {
        &self.cumulative
    }

    pub fn total_relevant(&self) -> usize {
        self.total_relevant
    }

    pub fn retrieved_relevant(&self) -> usize {
        self.groups.iter().map(|g| g.relevant_count).sum()
    }

    pub fn total_items(&self) -> usize {
        self.total_items
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Items of each group that land in the top `k`:
    /// `t_n = max(0, min(|G_n|, k - c_{n-1}))`.
    pub fn truncation_counts(&self, k: usize) -> Vec<usize> {
        self.groups
            .iter()
            .zip(&self.cumulative)
            .map(|(g, &before)| g.size.min(k.saturating_sub(before)))
            .collect()
    }

    /// Groups that contribute to the top `k`, with their preceding
    /// cumulative size and truncation count. Stops at the first group that
    /// lies entirely below the cutoff.
    pub(crate) fn included(&self, k: usize) -> impl Iterator<Item = (&TieGroup, usize, usize)> {
        self.groups
            .iter()
            .zip(&self.cumulative)
            .take_while(move |(_, &before)| before < k)
            .map(move |(g, &before)| (g, before, g.size.min(k - before)))
    }

    pub fn stats(&self, k: usize) -> TieStats {
        let largest_group = self.groups.iter().map(|g| g.size).max().unwrap_or(0);
        let tied_items: usize = self.groups.iter().filter(|g| g.size > 1).map(|g| g.size).sum();
        let singleton_groups = self.groups.iter().filter(|g| g.size == 1).count();
        // the group holding rank k, if the list is that long
        let straddling_tie = k >= 1
            && k <= self.total_items
            && self
                .groups
                .iter()
                .zip(&self.cumulative)
                .find(|(g, &before)| before < k && k <= before + g.size)
                .is_some_and(|(g, _)| g.size >= 2);
        TieStats {
            num_groups: self.groups.len(),
            largest_group,
            tied_fraction: tied_items as f64 / self.total_items as f64,
            singleton_fraction: singleton_groups as f64 / self.total_items as f64,
            straddling_tie,
        }
    }
}

/// Sorts the candidates and extracts their tie groups.
pub fn group_ties(candidates: &[ScoredCandidate]) -> Result<TieProfile> {
    Ok(RankedList::new(candidates.to_vec())?.profile())
}

/// Summary of a profile at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieStats {
    pub num_groups: usize,
    pub largest_group: usize,
    /// Fraction of items that share their score with at least one other item.
    pub tied_fraction: f64,
    /// Fraction of items whose score is unique.
    pub singleton_fraction: f64,
    /// Whether rank `k` falls inside a group of size two or more.
    pub straddling_tie: bool,
}
