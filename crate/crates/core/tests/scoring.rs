mod common;

use proptest::prelude::*;
use tierank::floatsim::{quantize, PrecisionFormat};
use tierank::scoring::{score_batch, score_dot, score_hps, score_sigmoid, score_softmax};
use tierank::ties::group_ties;
use tierank::{LogitInput, ScoredCandidate, ScoringFunction, ScoringRegime};

const BF16: PrecisionFormat = PrecisionFormat::BF16;
const FP32: PrecisionFormat = PrecisionFormat::FP32;

/// Nearest value with `m` fraction bits, for normal-range magnitudes:
/// scale the binade to an integer grid and round half to even.
fn round_bits(x: f64, m: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = x.abs().log2().floor() as i32;
    // log2 can land one binade off right at powers of two
    let e = if 2f64.powi(e) > x.abs() { e - 1 } else if 2f64.powi(e + 1) <= x.abs() { e + 1 } else { e };
    let scale = 2f64.powi(m - e);
    (x * scale).round_ties_even() / scale
}

fn bf(x: f64) -> f64 {
    round_bits(x, 7)
}

fn sp(x: f64) -> f64 {
    x as f32 as f64
}

fn hps() -> ScoringRegime {
    ScoringRegime::high_precision(BF16).unwrap()
}

#[test]
fn cosine_in_bf16_follows_stepwise_rounding() {
    // every multiply, add, root and divide rounded, accumulation left to right
    let norm = |v: [f64; 2]| bf(bf(bf(0.0 + bf(v[0] * v[0])) + bf(v[1] * v[1])).sqrt());
    let q = [bf(0.6), bf(0.8)];
    let d = [bf(0.8), bf(0.6)];
    let (nq, nd) = (norm(q), norm(d));
    let qn = [bf(q[0] / nq), bf(q[1] / nq)];
    let dn = [bf(d[0] / nd), bf(d[1] / nd)];
    let want = bf(bf(0.0 + bf(qn[0] * dn[0])) + bf(qn[1] * dn[1]));
    let got = score_dot(&[0.6, 0.8], &[0.8, 0.6], ScoringRegime::pure(BF16), true).unwrap();
    assert_eq!(got.value, want);
    assert!((got.value - 0.96).abs() < 4.0 * 2f64.powi(-8));
}

#[test]
fn trivial_dot_cases() {
    let fp = ScoringRegime::pure(FP32);
    assert_eq!(score_dot(&[1.0, 0.0], &[0.0, 1.0], fp, true).unwrap().value, 0.0);
    assert_eq!(score_dot(&[1.0, 0.0], &[0.0, 1.0], ScoringRegime::pure(BF16), false).unwrap().value, 0.0);
    let same = score_dot(&[0.3, -0.4, 1.2], &[0.3, -0.4, 1.2], fp, true).unwrap().value;
    assert!((same - 1.0).abs() <= 4.0 * 2f64.powi(-23));
    assert!(score_dot(&[0.0, 0.0], &[1.0, 0.0], fp, true).is_err());
    assert!(score_dot(&[1.0], &[1.0, 0.0], fp, true).is_err());
}

#[test]
fn single_precision_sigmoid_and_softmax() {
    let fp = ScoringRegime::pure(FP32);
    // stepwise single-precision oracle and the nearest single to the true value
    let sig = |z: f64| sp(1.0 / sp(1.0 + sp((-z).exp())));
    let got = score_sigmoid(-1.0, fp).unwrap().value;
    assert_eq!(got, sig(-1.0));
    assert!((got - sp(1.0 / (1.0 + 1f64.exp()))).abs() <= 2f64.powi(-25));
    // rounding the intermediates costs one ulp against the one-shot value here
    let got = score_softmax(2.0, 0.0, fp).unwrap().value;
    let want = {
        let en = sp((-2.0f64).exp());
        sp(1.0 / sp(1.0 + en))
    };
    assert_eq!(got, want);
    assert_eq!(sp(1.0 / (1.0 + (-2f64).exp())) - got, 2f64.powi(-24));
}

#[test]
fn saturation_and_symmetry() {
    let b = ScoringRegime::pure(BF16);
    for r in [b, hps(), ScoringRegime::pure(FP32)] {
        assert_eq!(score_softmax(0.0, 0.0, r).unwrap().value, 0.5);
        assert_eq!(score_sigmoid(0.0, r).unwrap().value, 0.5);
    }
    assert_eq!(score_softmax(10.0, -10.0, b).unwrap().value, 1.0);
    assert_eq!(score_sigmoid(30.0, b).unwrap().value, 1.0);
    assert!(score_softmax(f64::NAN, 0.0, b).is_err());
    assert!(score_softmax(f64::NEG_INFINITY, f64::NEG_INFINITY, b).is_err());
    assert!(score_sigmoid(f64::NAN, b).is_err());
    let z = LogitInput::SigmoidLogit(0.0);
    assert_eq!(score_hps(&z, ScoringFunction::Sigmoid, BF16, true).unwrap().value, 0.5);
    assert!(score_hps(&z, ScoringFunction::Softmax, BF16, true).is_err());
}

#[test]
fn high_precision_separates_a_bf16_collision() {
    // walk a grid of bf16 logit pairs for two inputs with different logit
    // gaps that bf16 scoring maps to one value
    let b = ScoringRegime::pure(BF16);
    let grid: Vec<f64> = (0..64).map(|i| bf(3.0 + i as f64 / 16.0)).collect();
    let mut found = None;
    'search: for &p1 in &grid {
        for &p2 in &grid {
            if p2 <= p1 {
                continue;
            }
            let (s1, s2) = (score_softmax(p1, 0.0, b).unwrap(), score_softmax(p2, 0.0, b).unwrap());
            if s1.value == s2.value {
                found = Some((p1, p2));
                break 'search;
            }
        }
    }
    let (p1, p2) = found.expect("bf16 collision in the search grid");
    let h1 = score_softmax(p1, 0.0, hps()).unwrap().value;
    let h2 = score_softmax(p2, 0.0, hps()).unwrap().value;
    assert!(h1 < h2, "hps keeps {p1} and {p2} apart ({h1} vs {h2})");
}

fn fixture_candidates(name: &str) -> Vec<ScoredCandidate> {
    common::load_scores(name)
        .into_iter()
        .enumerate()
        .map(|(i, (s, r))| ScoredCandidate::new(format!("d{i}"), s.parse().unwrap(), r, i))
        .collect()
}

#[test]
fn published_bf16_listing_ties() {
    let bf16 = fixture_candidates("scores_bf16.txt");
    for c in &bf16 {
        // printed to 8 decimals, so compare to the grid within print precision
        assert!((quantize(c.score, BF16) - c.score).abs() < 1e-8, "{} off the bf16 grid", c.score);
    }
    let p = group_ties(&bf16).unwrap();
    let sizes: Vec<usize> = p.groups().iter().take(4).map(|g| g.size).collect();
    assert_eq!(p.groups()[0].value, 1.0);
    assert_eq!(sizes, vec![10, 19, 13, 7]);
    assert_eq!(p.truncation_counts(10)[..3], [10, 0, 0]);
    assert!(p.stats(5).straddling_tie);
    assert_eq!(p.total_relevant(), 2);

    let hps = group_ties(&fixture_candidates("scores_hps.txt")).unwrap();
    assert_eq!((p.num_groups(), hps.num_groups()), (33, 66));
    assert!(hps.stats(10).largest_group < p.stats(10).largest_group);
    assert!(hps.stats(10).singleton_fraction > p.stats(10).singleton_fraction);
}

#[test]
fn high_precision_gives_more_distinct_scores_on_synthetic_pairs() {
    let cfg = tierank::synth::SynthConfig {
        queries: 1,
        candidates: 100,
        relevant_rate: 0.3,
        seed: 5,
        ..Default::default()
    };
    let (logits, _) = tierank::synth::generate(&cfg).unwrap();
    let inputs: Vec<LogitInput> = logits.records.into_iter().map(|r| r.input).collect();
    let distinct = |regime| {
        let mut v = score_batch(&inputs, regime, true).unwrap();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    let (low, high) = (distinct(ScoringRegime::pure(BF16)), distinct(hps()));
    assert!(high >= low, "hps {high} distinct vs bf16 {low}");
    assert!(high > low);
}

#[test]
fn batch_scores_do_not_depend_on_thread_count() {
    let cfg = tierank::synth::SynthConfig {
        queries: 4,
        candidates: 50,
        function: ScoringFunction::Dot,
        dim: 16,
        ..Default::default()
    };
    let (logits, _) = tierank::synth::generate(&cfg).unwrap();
    let inputs: Vec<LogitInput> = logits.records.into_iter().map(|r| r.input).collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| score_batch(&inputs, ScoringRegime::pure(BF16), true).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

fn logit() -> impl Strategy<Value = f64> {
    -20.0f64..20.0
}

fn regimes() -> impl Strategy<Value = ScoringRegime> {
    prop_oneof![
        Just(ScoringRegime::pure(BF16)),
        Just(ScoringRegime::pure(PrecisionFormat::FP16)),
        Just(ScoringRegime::pure(FP32)),
        Just(hps()),
        Just(ScoringRegime::high_precision(PrecisionFormat::FP16).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn scores_lie_in_unit_interval(p in logit(), n in logit(), r in regimes()) {
        let s = score_softmax(p, n, r).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&s));
        let s = score_sigmoid(p, r).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn softmax_complement_within_one_ulp(p in logit(), n in logit(), r in regimes()) {
        let a = score_softmax(p, n, r).unwrap().value;
        let b = score_softmax(n, p, r).unwrap().value;
        let f = r.scoring_format();
        prop_assert!((a + b - 1.0).abs() <= tierank::ulp(1.0, f), "{} + {} in {}", a, b, r);
    }

    #[test]
    fn monotone_in_positive_logit(p in logit(), step in 0.0f64..5.0, n in logit(), r in regimes()) {
        let lo = score_softmax(p, n, r).unwrap().value;
        let hi = score_softmax(p + step, n, r).unwrap().value;
        prop_assert!(lo <= hi);
        prop_assert!(score_sigmoid(p, r).unwrap().value <= score_sigmoid(p + step, r).unwrap().value);
    }

    #[test]
    fn high_precision_refines_low_precision_ties(a in logit(), b in logit()) {
        // equal hps scores for single logits imply equal bf16 scores
        let low = ScoringRegime::pure(BF16);
        if score_sigmoid(a, hps()).unwrap().value == score_sigmoid(b, hps()).unwrap().value {
            prop_assert_eq!(score_sigmoid(a, low).unwrap().value, score_sigmoid(b, low).unwrap().value);
        }
        let (a, b) = (bf(a), bf(b));
        if score_softmax(a, 0.0, hps()).unwrap().value == score_softmax(b, 0.0, hps()).unwrap().value {
            prop_assert_eq!(score_softmax(a, 0.0, low).unwrap().value, score_softmax(b, 0.0, low).unwrap().value);
        }
    }

    #[test]
    fn scores_are_on_the_scoring_grid(p in logit(), n in logit(), r in regimes()) {
        let s = score_softmax(p, n, r).unwrap().value;
        prop_assert_eq!(quantize(s, r.scoring_format()), s);
    }
}
