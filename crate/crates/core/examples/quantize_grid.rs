//! How coarse are the low-precision grids near 1.0?
//!
//! cargo run --example quantize_grid -- 0.99 1.0

use tierank::floatsim::{grid_count, grid_values, next_down, qop, BinaryOp};
use tierank::{quantize, ulp, PrecisionFormat};

fn main() -> tierank::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (lo, hi) = match args[..] {
        [lo, hi, ..] => (lo, hi),
        _ => (0.99, 1.0),
    };

    for fmt in [PrecisionFormat::BF16, PrecisionFormat::FP16, PrecisionFormat::FP32] {
        println!(
            "{:>5}: {:>8} values in [{lo}, {hi}], ulp(0.995) = {:e}, max finite {:e}",
            fmt.name(),
            grid_count(lo, hi, fmt),
            ulp(0.995, fmt),
            fmt.max_finite()
        );
    }

    let bf16 = PrecisionFormat::BF16;
    println!("\nbf16 grid in [{lo}, {hi}]:");
    for v in grid_values(lo, hi, bf16, 64)? {
        println!("  {v:.8}");
    }

    println!("\nrounding examples:");
    for x in [0.3, 0.9973, 0.99999, 1.0 - 1e-9] {
        println!("  {x:<12} bf16 {:<12} fp16 {}", quantize(x, bf16), quantize(x, PrecisionFormat::FP16));
    }
    // increments below half an ulp vanish
    let almost_one = next_down(1.0, bf16);
    println!(
        "\n{almost_one} + 2^-10 in bf16 = {}",
        qop(almost_one, 2f64.powi(-10), BinaryOp::Add, bf16)
    );
    Ok(())
}
