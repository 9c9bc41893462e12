//! Cross-check the closed-form expectations against brute-force
//! enumeration of every placement of relevant items within ties.

use tierank::metrics::{expected_metric, extrema};
use tierank::oracle::{enumerate_metric, placement_count};
use tierank::{EnumerationBudget, MetricKind, TieProfile};

fn main() -> tierank::Result<()> {
    // (group size, relevant items in the group), best score first
    let profile = TieProfile::from_sizes(&[(2, 1), (4, 2), (1, 0), (5, 2), (3, 1)])?;
    println!("{} placements to enumerate", placement_count(&profile));

    let budget = EnumerationBudget::default();
    let mut worst = 0.0f64;
    for k in 1..=profile.total_items() {
        for metric in MetricKind::ALL {
            let brute = enumerate_metric(&profile, metric, k, budget)?;
            let closed = expected_metric(&profile, metric, k)?;
            let (lo, hi) = extrema(&profile, metric, k)?;
            assert_eq!((lo, hi), (brute.min, brute.max));
            worst = worst.max((closed - brute.mean).abs());
        }
    }
    println!("largest |closed form - enumeration| over all metrics and cutoffs: {worst:e}");

    let big = TieProfile::from_sizes(&[(40, 20)])?;
    match enumerate_metric(&big, MetricKind::Ap, 10, budget) {
        Err(e) => println!("large profile: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
