//! Exhaustive reference for the tie-aware metrics.
//!
//! Items inside a tie group are exchangeable apart from their label, so the
//! orderings of a group collapse to the `C(|G|, r)` ways of placing its
//! relevant items. Every combination of placements across groups is equally
//! likely; enumerating them all gives the exact mean, minimum and maximum of
//! any metric. [`enumerate_permutations`] walks the full factorial space
//! instead and exists to check that the collapse is sound.

use crate::error::{Error, Result};
use crate::metrics::{evaluate_ranking, MetricKind};
use crate::ties::TieProfile;

pub const DEFAULT_MAX_CONFIGURATIONS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    max_configurations: u64,
}

impl EnumerationBudget {
    pub fn new(max_configurations: u64) -> Result<Self> {
        if max_configurations == 0 {
            return Err(Error::invalid("enumeration budget must be at least 1"));
        }
        Ok(EnumerationBudget { max_configurations })
    }

    pub fn max_configurations(&self) -> u64 {
        self.max_configurations
    }

    fn admit(&self, needed: u128) -> Result<()> {
        if needed > self.max_configurations as u128 {
            return Err(Error::BudgetExceeded {
                needed,
                budget: self.max_configurations,
            });
        }
        Ok(())
    }
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_configurations: DEFAULT_MAX_CONFIGURATIONS,
        }
    }
}

/// Exact statistics of a metric over every equally likely configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enumeration {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: u64,
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of distinct label placements, `prod_n C(|G_n|, r_n)`.
pub fn placement_count(profile: &TieProfile) -> u128 {
    profile
        .groups()
        .iter()
        .map(|g| binomial(g.size, g.relevant_count))
        .fold(1u128, |acc, c| acc.saturating_mul(c))
}

/// All length-`n` flag vectors with exactly `r` set, in lexicographic order
/// of the set positions.
fn placements(n: usize, r: usize) -> Vec<Vec<bool>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - left {
            cur[i] = true;
            rec(i + 1, n, left - 1, cur, out);
            cur[i] = false;
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut vec![false; n], &mut out);
    out
}

/// Walks the cartesian product of per-group options, calling `visit` with
/// the concatenated relevance flags of each combination.
fn for_each_combination(options: &[Vec<Vec<bool>>], mut visit: impl FnMut(&[bool]) -> Result<()>) -> Result<()> {
    let mut choice = vec![0usize; options.len()];
    let mut flags: Vec<bool> = options.iter().flat_map(|o| o[0].iter().copied()).collect();
    let offsets: Vec<usize> = options
        .iter()
        .scan(0, |acc, o| {
            let start = *acc;
            *acc += o[0].len();
            Some(start)
        })
        .collect();
    loop {
        visit(&flags)?;
        // odometer, last group fastest
        let mut g = options.len();
        loop {
            if g == 0 {
                return Ok(());
            }
            g -= 1;
            choice[g] += 1;
            if choice[g] < options[g].len() {
                break;
            }
            choice[g] = 0;
        }
        for (h, opts) in options.iter().enumerate().skip(g) {
            let pattern = &opts[choice[h]];
            flags[offsets[h]..offsets[h] + pattern.len()].copy_from_slice(pattern);
        }
    }
}

fn summarize(
    options: &[Vec<Vec<bool>>],
    profile: &TieProfile,
    metric: MetricKind,
    k: usize,
) -> Result<Enumeration> {
    let n_plus = profile.total_relevant();
    let mut sum = CompensatedSum::default();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut count = 0u64;
    for_each_combination(options, |flags| {
        let v = evaluate_ranking(flags.iter().copied(), n_plus, metric, k)?;
        sum.add(v);
        min = min.min(v);
        max = max.max(v);
        count += 1;
        Ok(())
    })?;
    Ok(Enumeration {
        mean: sum.total() / count as f64,
        min,
        max,
        count,
    })
}

/// Mean, minimum and maximum of `metric@k` over every placement of the
/// relevant items inside their tie groups.
pub fn enumerate_metric(
    profile: &TieProfile,
    metric: MetricKind,
    k: usize,
    budget: EnumerationBudget,
) -> Result<Enumeration> {
    budget.admit(placement_count(profile))?;
    let options: Vec<Vec<Vec<bool>>> = profile
        .groups()
        .iter()
        .map(|g| placements(g.size, g.relevant_count))
        .collect();
    summarize(&options, profile, metric, k)
}

fn permutations(items: &[bool]) -> Vec<Vec<bool>> {
    fn rec(k: usize, cur: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for i in k..cur.len() {
            cur.swap(k, i);
            rec(k + 1, cur, out);
            cur.swap(k, i);
        }
    }
    let mut out = Vec::new();
    rec(0, &mut items.to_vec(), &mut out);
    out
}

/// Same statistics over all `prod_n |G_n|!` orderings of distinguishable
/// items.
pub fn enumerate_permutations(
    profile: &TieProfile,
    metric: MetricKind,
    k: usize,
    budget: EnumerationBudget,
) -> Result<Enumeration> {
    let needed = profile
        .groups()
        .iter()
        .map(|g| (1..=g.size as u128).product::<u128>())
        .fold(1u128, |acc, f| acc.saturating_mul(f));
    budget.admit(needed)?;
    let options: Vec<Vec<Vec<bool>>> = profile
        .groups()
        .iter()
        .map(|g| {
            let items: Vec<bool> = (0..g.size).map(|i| i < g.relevant_count).collect();
            permutations(&items)
        })
        .collect();
    summarize(&options, profile, metric, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(pairs: &[(usize, usize)]) -> TieProfile {
        TieProfile::from_sizes(pairs).unwrap()
    }

    #[test]
    fn singletons_have_one_configuration() {
        let p = profile(&[(1, 1), (1, 0), (1, 1)]);
        let e = enumerate_metric(&p, MetricKind::Ap, 3, EnumerationBudget::default()).unwrap();
        assert_eq!(e.count, 1);
        assert_eq!(e.mean, e.min);
        assert_eq!(e.min, e.max);
        assert_eq!(e.mean, (1.0 + 2.0 / 3.0) / 2.0);
    }

    #[test]
    fn pair_rr() {
        let e = enumerate_metric(&profile(&[(2, 1)]), MetricKind::Rr, 2, EnumerationBudget::default()).unwrap();
        assert_eq!(e.count, 2);
        assert_eq!((e.min, e.max, e.mean), (0.5, 1.0, 0.75));
    }

    #[test]
    fn hits_over_two_groups() {
        let p = profile(&[(2, 1), (3, 2)]);
        let e = enumerate_metric(&p, MetricKind::Hits, 3, EnumerationBudget::default()).unwrap();
        assert_eq!(e.count, 6);
        assert!((e.mean - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn budget_refusal() {
        let p = profile(&[(20, 10)]);
        let err = enumerate_metric(&p, MetricKind::Rr, 3, EnumerationBudget::new(1000).unwrap()).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { needed: 184_756, budget: 1000 }));
        assert!(EnumerationBudget::new(0).is_err());
    }

    #[test]
    fn placement_enumeration() {
        assert_eq!(placements(4, 2).len(), 6);
        assert_eq!(placements(3, 0), vec![vec![false; 3]]);
        assert_eq!(placements(2, 2), vec![vec![true; 2]]);
        assert_eq!(permutations(&[true, false, false]).len(), 6);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(placement_count(&profile(&[(6, 3), (4, 1)])), 80);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.total() - 1e-16).abs() < 1e-30);
    }
}
