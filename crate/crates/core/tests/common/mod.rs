#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use tierank::{MetricKind, ScoredCandidate};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

/// `(score text, relevant)` rows of a whitespace-separated fixture.
pub fn load_scores(name: &str) -> Vec<(String, bool)> {
    std::fs::read_to_string(data_path(name))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace();
            let s = it.next().unwrap().to_string();
            let r = it.next().unwrap() == "1";
            (s, r)
        })
        .collect()
}

pub fn candidates(scores: &[f64], relevant: &[bool]) -> Vec<ScoredCandidate> {
    scores
        .iter()
        .zip(relevant)
        .enumerate()
        .map(|(i, (&s, &r))| ScoredCandidate::new(format!("d{i}"), s, r, i))
        .collect()
}

/// Metric of one fixed ranking, written straight from the textbook
/// definitions and sharing no code with the library.
pub fn reference_metric(flags: &[bool], n_plus: usize, metric: MetricKind, k: usize) -> f64 {
    let top = &flags[..k.min(flags.len())];
    let hits = top.iter().filter(|&&r| r).count() as f64;
    let n = n_plus as f64;
    match metric {
        MetricKind::Hits => hits,
        MetricKind::Precision => hits / k as f64,
        MetricKind::Recall => hits / n,
        MetricKind::F1 => {
            let p = hits / k as f64;
            let r = hits / n;
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        }
        MetricKind::Ndcg => {
            let gain = |i: usize| 1.0 / ((i + 2) as f64).log2();
            let dcg: f64 = top.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| gain(i)).sum();
            let ideal: f64 = (0..n_plus.min(k)).map(gain).sum();
            dcg / ideal
        }
        MetricKind::Rr => top.iter().position(|&r| r).map_or(0.0, |i| 1.0 / (i + 1) as f64),
        MetricKind::Ap => {
            let mut seen = 0.0;
            let mut acc = 0.0;
            for (i, &r) in top.iter().enumerate() {
                if r {
                    seen += 1.0;
                    acc += seen / (i + 1) as f64;
                }
            }
            acc / n
        }
    }
}

/// Mean, min and max of a metric over every placement of relevant items
/// inside their groups, by plain recursion.
pub fn reference_stats(groups: &[(usize, usize)], n_plus: usize, metric: MetricKind, k: usize) -> (f64, f64, f64) {
    fn subsets(n: usize, r: usize) -> Vec<Vec<bool>> {
        if r == 0 {
            return vec![vec![false; n]];
        }
        if r == n {
            return vec![vec![true; n]];
        }
        let mut out = Vec::new();
        for mut rest in subsets(n - 1, r - 1) {
            rest.insert(0, true);
            out.push(rest);
        }
        for mut rest in subsets(n - 1, r) {
            rest.insert(0, false);
            out.push(rest);
        }
        out
    }
    let mut all: Vec<Vec<bool>> = vec![Vec::new()];
    for &(size, r) in groups {
        let opts = subsets(size, r);
        all = all
            .iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut v = prefix.clone();
                    v.extend_from_slice(o);
                    v
                })
            })
            .collect();
    }
    let values: Vec<f64> = all.iter().map(|f| reference_metric(f, n_plus, metric, k)).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

/// Random `(size, relevant)` groups with total length at most `max_len`,
/// sizes at most `max_group`, and at least one relevant item.
pub fn random_groups<R: Rng>(rng: &mut R, max_len: usize, max_group: usize) -> Vec<(usize, usize)> {
    loop {
        let target = rng.random_range(1..=max_len);
        let mut groups = Vec::new();
        let mut len = 0;
        while len < target {
            let size = rng.random_range(1..=max_group.min(target - len));
            let r = (0..size).filter(|_| rng.random_bool(0.4)).count();
            groups.push((size, r));
            len += size;
        }
        if groups.iter().any(|&(_, r)| r > 0) {
            return groups;
        }
    }
}

/// Candidates realising `groups`, with relevant items shuffled inside each
/// group and the input order shuffled as a whole.
pub fn candidates_for_groups<R: Rng>(rng: &mut R, groups: &[(usize, usize)]) -> Vec<ScoredCandidate> {
    let mut rows = Vec::new();
    for (gi, &(size, r)) in groups.iter().enumerate() {
        let score = 1.0 - gi as f64 / 64.0;
        let mut flags: Vec<bool> = (0..size).map(|i| i < r).collect();
        flags.shuffle(rng);
        rows.extend(flags.into_iter().map(|f| (score, f)));
    }
    rows.shuffle(rng);
    rows.into_iter()
        .enumerate()
        .map(|(i, (s, f))| ScoredCandidate::new(format!("d{i}"), s, f, i))
        .collect()
}

pub fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tierank-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
