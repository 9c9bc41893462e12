mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tierank::metrics::{aggregate, expected_metric, extrema, report};
use tierank::oracle::{enumerate_metric, enumerate_permutations, placement_count};
use tierank::{EnumerationBudget, Error, MetricKind, Query, QueryReport, ScoredCandidate, TieProfile};

fn metric() -> impl Strategy<Value = MetricKind> {
    proptest::sample::select(MetricKind::ALL.to_vec())
}

/// Groups of up to `max_group` items, at least one relevant item overall.
fn groups(max_groups: usize, max_group: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((1..=max_group).prop_flat_map(|s| (Just(s), 0..=s)), 1..=max_groups)
        .prop_filter("needs a relevant item", |g| g.iter().any(|&(_, r)| r > 0))
}

/// Scores drawn from a handful of levels so ties are common.
fn scored_list() -> impl Strategy<Value = Vec<ScoredCandidate>> {
    prop::collection::vec((0u8..6, prop::bool::weighted(0.35)), 1..25)
        .prop_filter("needs a relevant item", |v| v.iter().any(|&(_, r)| r))
        .prop_map(|v| {
            let scores: Vec<f64> = v.iter().map(|&(l, _)| l as f64 / 4.0).collect();
            let rel: Vec<bool> = v.iter().map(|&(_, r)| r).collect();
            common::candidates(&scores, &rel)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn closed_forms_match_reference_enumeration(g in groups(5, 4), m in metric(), k in 1usize..16) {
        let p = TieProfile::from_sizes(&g).unwrap();
        let (mean, lo, hi) = common::reference_stats(&g, p.total_relevant(), m, k);
        let e = expected_metric(&p, m, k).unwrap();
        let (min, max) = extrema(&p, m, k).unwrap();
        prop_assert!((e - mean).abs() <= 1e-12, "{:?} {}@{}: {} vs {}", g, m, k, e, mean);
        prop_assert!((min - lo).abs() <= 1e-12 && (max - hi).abs() <= 1e-12);
    }

    #[test]
    fn placements_and_permutations_agree(g in groups(3, 4), m in metric(), k in 1usize..10) {
        let p = TieProfile::from_sizes(&g).unwrap();
        let budget = EnumerationBudget::default();
        let a = enumerate_metric(&p, m, k, budget).unwrap();
        let b = enumerate_permutations(&p, m, k, budget).unwrap();
        prop_assert!((a.mean - b.mean).abs() <= 1e-12);
        prop_assert_eq!((a.min, a.max), (b.min, b.max));
        prop_assert_eq!(a.count as u128, placement_count(&p));
    }

    #[test]
    fn oblivious_and_expected_are_sandwiched(c in scored_list(), m in metric(), k in 1usize..30) {
        let r = report(&c, m, k).unwrap();
        prop_assert!(r.minimum <= r.expected && r.expected <= r.maximum, "{:?}", r);
        prop_assert!(r.minimum <= r.oblivious && r.oblivious <= r.maximum, "{:?}", r);
        prop_assert_eq!(r.range, r.maximum - r.minimum);
        prop_assert_eq!(r.bias, r.oblivious - r.expected);
    }

    #[test]
    fn expected_recall_grows_with_k(c in scored_list()) {
        let q = Query::new(c).unwrap();
        let mut last = 0.0;
        for k in 1..=q.ranked().len() + 1 {
            let v = q.expected(MetricKind::Recall, k).unwrap();
            prop_assert!(v >= last);
            last = v;
        }
        prop_assert_eq!(last, 1.0);
    }

    #[test]
    fn tie_aware_values_ignore_input_order_and_score_scale(c in scored_list(), m in metric(), k in 1usize..30, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let base = report(&c, m, k).unwrap();
        let mut shuffled = c.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for (i, s) in shuffled.iter_mut().enumerate() {
            s.original_index = i;
        }
        let r = report(&shuffled, m, k).unwrap();
        prop_assert_eq!((r.expected, r.minimum, r.maximum), (base.expected, base.minimum, base.maximum));
        // an order-preserving rescale keeps every group intact
        let scaled: Vec<ScoredCandidate> = c
            .iter()
            .map(|s| ScoredCandidate { score: s.score * 8.0 - 3.0, ..s.clone() })
            .collect();
        prop_assert_eq!(report(&scaled, m, k).unwrap(), base);
    }
}

#[test]
fn hand_checked_rationals() {
    let pair = TieProfile::from_sizes(&[(2, 1)]).unwrap();
    assert_eq!(expected_metric(&pair, MetricKind::Rr, 1).unwrap(), 0.5);
    assert_eq!(expected_metric(&pair, MetricKind::Rr, 2).unwrap(), 0.75);
    assert_eq!(expected_metric(&pair, MetricKind::Ap, 2).unwrap(), 0.75);
    let three = TieProfile::from_sizes(&[(3, 2)]).unwrap();
    // placements {1,2}, {1,3}, {2,3}: RR 1, 1, 1/2
    assert!((expected_metric(&three, MetricKind::Rr, 3).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    // AP: 1, (1 + 2/3)/2, (1/2 + 2/3)/2
    assert!((expected_metric(&three, MetricKind::Ap, 3).unwrap() - 29.0 / 36.0).abs() < 1e-15);
    let two = TieProfile::from_sizes(&[(2, 1), (3, 2)]).unwrap();
    assert_eq!(expected_metric(&two, MetricKind::Hits, 3).unwrap(), 5.0 / 3.0);
    assert_eq!(expected_metric(&two, MetricKind::Precision, 3).unwrap(), 5.0 / 9.0);
}

#[test]
fn oblivious_follows_input_order_inside_ties() {
    let c = common::candidates(&[0.5, 0.5, 0.5], &[true, true, false]);
    let q = Query::new(c).unwrap().with_unretrieved_relevant(0);
    assert_eq!(q.oblivious(MetricKind::Recall, 2).unwrap(), 1.0);
    let c = common::candidates(&[0.5, 0.5, 0.5], &[false, true, true]);
    assert_eq!(Query::new(c).unwrap().oblivious(MetricKind::Recall, 2).unwrap(), 0.5);
}

#[test]
fn unretrieved_relevant_documents_count_toward_recall() {
    let c = common::candidates(&[0.9, 0.5], &[true, false]);
    let q = Query::new(c).unwrap().with_unretrieved_relevant(3);
    assert_eq!(q.expected(MetricKind::Recall, 2).unwrap(), 0.25);
    assert_eq!(q.extrema(MetricKind::Recall, 2).unwrap(), (0.25, 0.25));
}

#[test]
fn aggregates_are_plain_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let reports: Vec<QueryReport> = (0..37)
        .map(|i| {
            let g = common::random_groups(&mut rng, 20, 5);
            let c = common::candidates_for_groups(&mut rng, &g);
            QueryReport {
                query_id: format!("q{i:02}"),
                report: report(&c, MetricKind::Ndcg, 5).unwrap(),
            }
        })
        .collect();
    let a = aggregate(&reports).unwrap();
    let mean = |f: fn(&QueryReport) -> f64| reports.iter().map(f).sum::<f64>() / reports.len() as f64;
    assert!((a.expected - mean(|r| r.report.expected)).abs() < 1e-14);
    assert!((a.oblivious - mean(|r| r.report.oblivious)).abs() < 1e-14);
    assert!((a.range_mean - mean(|r| r.report.range)).abs() < 1e-14);
    assert!((a.range_of_means - (a.maximum - a.minimum)).abs() < 1e-14);
    assert!((a.bias - (a.oblivious - a.expected)).abs() < 1e-14);
    assert_eq!(a.queries, 37);

    // shuffled input gives bit-identical aggregates
    let mut rev = reports.clone();
    rev.reverse();
    assert_eq!(aggregate(&rev).unwrap(), a);
}

#[test]
fn oracle_refuses_large_profiles() {
    let p = TieProfile::from_sizes(&[(30, 15)]).unwrap();
    let err = enumerate_metric(&p, MetricKind::Ap, 10, EnumerationBudget::default()).unwrap_err();
    assert!(matches!(err, Error::BudgetExceeded { .. }));
    assert_eq!(err.exit_code(), 3);
}
