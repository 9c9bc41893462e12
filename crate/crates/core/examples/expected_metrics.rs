//! One query, every metric: what the sort happened to report, the
//! expectation over tie orders, and the best and worst case.

use tierank::{MetricKind, Query, ScoredCandidate};

fn main() -> tierank::Result<()> {
    // a relevant item on top, then a three-way tie holding two relevant items
    let q = Query::new(vec![
        ScoredCandidate::new("a", 0.9, true, 0),
        ScoredCandidate::new("b", 0.5, true, 1),
        ScoredCandidate::new("c", 0.5, true, 2),
        ScoredCandidate::new("d", 0.5, false, 3),
        ScoredCandidate::new("e", 0.1, false, 4),
    ])?;

    println!("{:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "metric", "M_obl", "E[M]", "M_min", "M_max", "range", "bias");
    for k in [1, 3, 5] {
        for metric in MetricKind::ALL {
            let r = q.report(metric, k)?;
            println!(
                "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                format!("{metric}@{k}"),
                r.oblivious,
                r.expected,
                r.minimum,
                r.maximum,
                r.range,
                r.bias
            );
        }
    }
    Ok(())
}
