//! Emulation of reduced-precision binary floating-point formats.
//!
//! Every format is described by its exponent and mantissa widths and is
//! emulated on `f64` values that are constrained to the format's grid.
//! Rounding is always round-to-nearest, ties-to-even, with gradual
//! underflow and overflow to signed infinity.
//!
//! Arithmetic through [`qop`] is correctly rounded: the exact result of
//! the operation is recovered with an error-free transformation and then
//! rounded once into the target format, so no double-rounding artefacts
//! leak in from the `f64` carrier.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const MIN_EXPONENT_BITS: u32 = 2;
const MAX_EXPONENT_BITS: u32 = 8;
const MIN_MANTISSA_BITS: u32 = 1;
const MAX_MANTISSA_BITS: u32 = 50;

/// A binary floating-point format with `exponent_bits` of biased exponent
/// and `mantissa_bits` of stored fraction (the implicit leading bit is not
/// counted).
///
/// Widths are limited to 8 exponent bits and 50 mantissa bits so that
/// every value, midpoint and exact product of the format stays inside the
/// normal `f64` range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionFormat {
    exponent_bits: u32,
    mantissa_bits: u32,
}

impl PrecisionFormat {
    pub const BF16: PrecisionFormat = PrecisionFormat {
        exponent_bits: 8,
        mantissa_bits: 7,
    };
    pub const FP16: PrecisionFormat = PrecisionFormat {
        exponent_bits: 5,
        mantissa_bits: 10,
    };
    pub const FP32: PrecisionFormat = PrecisionFormat {
        exponent_bits: 8,
        mantissa_bits: 23,
    };

    pub fn new(exponent_bits: u32, mantissa_bits: u32) -> Result<Self> {
        if !(MIN_EXPONENT_BITS..=MAX_EXPONENT_BITS).contains(&exponent_bits) {
            return Err(Error::invalid(format!(
                "exponent bits must be in {MIN_EXPONENT_BITS}..={MAX_EXPONENT_BITS}, got {exponent_bits}"
            )));
        }
        if !(MIN_MANTISSA_BITS..=MAX_MANTISSA_BITS).contains(&mantissa_bits) {
            return Err(Error::invalid(format!(
                "mantissa bits must be in {MIN_MANTISSA_BITS}..={MAX_MANTISSA_BITS}, got {mantissa_bits}"
            )));
        }
        Ok(PrecisionFormat {
            exponent_bits,
            mantissa_bits,
        })
    }

    pub fn exponent_bits(&self) -> u32 {
        self.exponent_bits
    }

    pub fn mantissa_bits(&self) -> u32 {
        self.mantissa_bits
    }

    /// Display label: `bf16`, `fp16`, `fp32`, or `e{E}m{M}` otherwise.
    pub fn name(&self) -> String {
        match (self.exponent_bits, self.mantissa_bits) {
            (8, 7) => "bf16".to_string(),
            (5, 10) => "fp16".to_string(),
            (8, 23) => "fp32".to_string(),
            (e, m) => format!("e{e}m{m}"),
        }
    }

    fn bias(&self) -> i32 {
        (1 << (self.exponent_bits - 1)) - 1
    }

    /// Exponent of the smallest normal binade.
    pub fn min_exponent(&self) -> i32 {
        1 - self.bias()
    }

    /// Exponent of the largest finite binade.
    pub fn max_exponent(&self) -> i32 {
        self.bias()
    }

    pub fn max_finite(&self) -> f64 {
        let m = self.mantissa_bits as i32;
        exp2i(self.max_exponent() + 1) - exp2i(self.max_exponent() - m)
    }

    pub fn min_positive_normal(&self) -> f64 {
        exp2i(self.min_exponent())
    }

    pub fn min_positive_subnormal(&self) -> f64 {
        exp2i(self.min_exponent() - self.mantissa_bits as i32)
    }

    /// True when every value of `self` is also a value of `other`.
    pub fn is_subset_of(&self, other: &PrecisionFormat) -> bool {
        self.exponent_bits <= other.exponent_bits && self.mantissa_bits <= other.mantissa_bits
    }
}

impl fmt::Display for PrecisionFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PrecisionFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bf16" | "bfloat16" => Ok(Self::BF16),
            "fp16" | "f16" | "half" => Ok(Self::FP16),
            "fp32" | "f32" | "float" | "single" => Ok(Self::FP32),
            other => {
                let parsed = other
                    .strip_prefix('e')
                    .and_then(|rest| rest.split_once('m'))
                    .and_then(|(e, m)| Some((e.parse().ok()?, m.parse().ok()?)));
                match parsed {
                    Some((e, m)) => PrecisionFormat::new(e, m),
                    None => Err(Error::invalid(format!("unknown precision format `{s}`"))),
                }
            }
        }
    }
}

impl Serialize for PrecisionFormat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for PrecisionFormat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A value known to lie on the grid of `format`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedValue {
    value: f64,
    format: PrecisionFormat,
}

impl QuantizedValue {
    pub fn new(x: f64, format: PrecisionFormat) -> Self {
        QuantizedValue {
            value: quantize(x, format),
            format,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn format(&self) -> PrecisionFormat {
        self.format
    }
}

/// Exact `2^e` for any exponent that `f64` can hold, normal or subnormal.
pub(crate) fn exp2i(e: i32) -> f64 {
    if e >= -1022 {
        assert!(e <= 1023, "2^{e} overflows f64");
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        assert!(e >= -1074, "2^{e} underflows f64");
        f64::from_bits(1u64 << (e + 1074))
    }
}

/// `floor(log2(a))` for a positive finite `a`, read from the bit pattern.
fn floor_log2(a: f64) -> i32 {
    let bits = a.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        let frac = bits & ((1u64 << 52) - 1);
        (63 - frac.leading_zeros() as i32) - 1074
    } else {
        biased - 1023
    }
}

/// Round `x` to the nearest value representable in `fmt` (ties to even).
///
/// Magnitudes that round above the largest finite value become signed
/// infinity. Zero keeps its sign, NaN propagates.
pub fn quantize(x: f64, fmt: PrecisionFormat) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let a = x.abs();
    let e = floor_log2(a).max(fmt.min_exponent());
    let quantum = exp2i(e - fmt.mantissa_bits as i32);
    let rounded = (a / quantum).round_ties_even() * quantum;
    let rounded = if rounded > fmt.max_finite() {
        f64::INFINITY
    } else {
        rounded
    };
    rounded.copysign(x)
}

/// Spacing between adjacent representable values in the binade of `x`.
///
/// Zero and subnormal magnitudes get the fixed subnormal spacing.
pub fn ulp(x: f64, fmt: PrecisionFormat) -> f64 {
    if x.is_nan() {
        return x;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let a = x.abs();
    if a < fmt.min_positive_normal() {
        return fmt.min_positive_subnormal();
    }
    exp2i(floor_log2(a) - fmt.mantissa_bits as i32)
}

/// Position of a representable magnitude on the format's grid, counting
/// from zero. `2^(emax+1)` (the first value past the finite range) gets the
/// ordinal after the largest finite value.
fn magnitude_ordinal(a: f64, fmt: PrecisionFormat) -> i64 {
    let per_binade = 1i64 << fmt.mantissa_bits;
    if a < fmt.min_positive_normal() {
        return (a / fmt.min_positive_subnormal()) as i64;
    }
    let e = floor_log2(a).min(fmt.max_exponent() + 1);
    let frac = ((a / exp2i(e) - 1.0) * per_binade as f64) as i64;
    (e - fmt.min_exponent() + 1) as i64 * per_binade + frac
}

fn magnitude_from_ordinal(ord: i64, fmt: PrecisionFormat) -> f64 {
    let per_binade = 1i64 << fmt.mantissa_bits;
    if ord < per_binade {
        return ord as f64 * fmt.min_positive_subnormal();
    }
    let binade = ord / per_binade;
    let frac = ord % per_binade;
    let e = fmt.min_exponent() + binade as i32 - 1;
    exp2i(e) * (1.0 + frac as f64 / per_binade as f64)
}

/// Signed grid ordinal of a representable value. Both zeros map to 0.
pub fn grid_ordinal(x: f64, fmt: PrecisionFormat) -> i64 {
    let a = if x.is_infinite() {
        exp2i(fmt.max_exponent() + 1)
    } else {
        x.abs()
    };
    let ord = magnitude_ordinal(a, fmt);
    if x < 0.0 {
        -ord
    } else {
        ord
    }
}

/// Inverse of [`grid_ordinal`]; ordinals past the finite range give infinity.
pub fn from_grid_ordinal(ord: i64, fmt: PrecisionFormat) -> f64 {
    let v = magnitude_from_ordinal(ord.abs(), fmt);
    let v = if v > fmt.max_finite() {
        f64::INFINITY
    } else {
        v
    };
    if ord < 0 {
        -v
    } else {
        v
    }
}

/// Smallest representable value strictly greater than the representable `x`.
pub fn next_up(x: f64, fmt: PrecisionFormat) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    from_grid_ordinal(grid_ordinal(x, fmt) + 1, fmt)
}

/// Largest representable value strictly less than the representable `x`.
pub fn next_down(x: f64, fmt: PrecisionFormat) -> f64 {
    -next_up(-x, fmt)
}

/// Number of representable values in the closed interval `[lo, hi]`.
pub fn grid_count(lo: f64, hi: f64, fmt: PrecisionFormat) -> u64 {
    match grid_bounds(lo, hi, fmt) {
        Some((first, last)) => (last - first + 1) as u64,
        None => 0,
    }
}

fn grid_bounds(lo: f64, hi: f64, fmt: PrecisionFormat) -> Option<(i64, i64)> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return None;
    }
    let mut first = quantize(lo, fmt);
    if first < lo {
        first = next_up(first, fmt);
    }
    let mut last = quantize(hi, fmt);
    if last > hi {
        last = next_down(last, fmt);
    }
    if first > last || first.is_infinite() || last.is_infinite() {
        return None;
    }
    Some((grid_ordinal(first, fmt), grid_ordinal(last, fmt)))
}

/// All representable values in `[lo, hi]`, ascending. Refuses to list more
/// than `limit` values.
pub fn grid_values(lo: f64, hi: f64, fmt: PrecisionFormat, limit: u64) -> Result<Vec<f64>> {
    let Some((first, last)) = grid_bounds(lo, hi, fmt) else {
        return Ok(Vec::new());
    };
    let count = (last - first + 1) as u64;
    if count > limit {
        return Err(Error::constraint(format!(
            "interval holds {count} {fmt} values, listing limit is {limit}"
        )));
    }
    Ok((first..=last)
        .map(|ord| {
            let v = from_grid_ordinal(ord, fmt);
            if v == 0.0 && lo.is_sign_negative() && hi.is_sign_negative() {
                -0.0
            } else {
                v
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Exp,
    Negate,
    Sqrt,
}

/// Correctly rounded `a op b` in `fmt`.
pub fn qop(a: f64, b: f64, op: BinaryOp, fmt: PrecisionFormat) -> f64 {
    match op {
        BinaryOp::Add => round_sum(a, b, fmt),
        BinaryOp::Sub => round_sum(a, -b, fmt),
        BinaryOp::Mul => {
            let p = a * b;
            if !p.is_finite() || p == 0.0 {
                return quantize(p, fmt);
            }
            let err = a.mul_add(b, -p);
            round_with_residual(p, sign_of(err), fmt)
        }
        BinaryOp::Div => {
            let q = a / b;
            if !q.is_finite() || q == 0.0 {
                return quantize(q, fmt);
            }
            // a - q*b, exactly; the true quotient sits on the side of q given by r/b
            let r = (-q).mul_add(b, a);
            round_with_residual(q, sign_of(r) * sign_of(b), fmt)
        }
    }
}

/// `f(x)` evaluated in `f64` and rounded into `fmt`.
pub fn qfunc(x: f64, f: UnaryFn, fmt: PrecisionFormat) -> f64 {
    match f {
        UnaryFn::Exp => quantize(x.exp(), fmt),
        UnaryFn::Negate => quantize(-x, fmt),
        UnaryFn::Sqrt => {
            let s = x.sqrt();
            if !s.is_finite() || s == 0.0 {
                return quantize(s, fmt);
            }
            let r = (-s).mul_add(s, x);
            round_with_residual(s, sign_of(r), fmt)
        }
    }
}

fn sign_of(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn round_sum(a: f64, b: f64, fmt: PrecisionFormat) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return quantize(s, fmt);
    }
    // two-sum error term
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    round_with_residual(s, sign_of(err), fmt)
}

/// Round `approx + delta` into `fmt`, where `approx` is the `f64` rounding of
/// the exact value and `direction` is the sign of `exact - approx`.
///
/// The only case where `quantize(approx)` can be wrong is an `approx` that
/// lands exactly on a midpoint of the target grid while the exact value sits
/// just to one side of it.
fn round_with_residual(approx: f64, direction: i32, fmt: PrecisionFormat) -> f64 {
    let q = quantize(approx, fmt);
    if direction == 0 || q == approx || q.is_infinite() && approx.abs() > 2.0 * fmt.max_finite()
    {
        return q;
    }
    let ord = grid_ordinal(q, fmt);
    let other_ord = if approx > q { ord + 1 } else { ord - 1 };
    // unbounded neighbour: past max finite it is 2^(emax+1), not infinity
    let other = {
        let m = magnitude_from_ordinal(other_ord.abs(), fmt);
        if other_ord < 0 {
            -m
        } else {
            m
        }
    };
    let q_finite = if q.is_infinite() {
        exp2i(fmt.max_exponent() + 1).copysign(q)
    } else {
        q
    };
    let midpoint = (q_finite + other) / 2.0;
    if approx != midpoint {
        return q;
    }
    let toward_other = (direction > 0) == (other > q_finite);
    let chosen = if toward_other { other } else { q_finite };
    if chosen.abs() > fmt.max_finite() {
        f64::INFINITY.copysign(chosen)
    } else if chosen == 0.0 {
        0.0f64.copysign(approx)
    } else {
        chosen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BF16: PrecisionFormat = PrecisionFormat::BF16;
    const FP16: PrecisionFormat = PrecisionFormat::FP16;
    const FP32: PrecisionFormat = PrecisionFormat::FP32;

    #[test]
    fn canonical_formats() {
        assert_eq!((BF16.exponent_bits(), BF16.mantissa_bits()), (8, 7));
        assert_eq!((FP16.exponent_bits(), FP16.mantissa_bits()), (5, 10));
        assert_eq!((FP32.exponent_bits(), FP32.mantissa_bits()), (8, 23));
        assert_eq!(FP16.max_finite(), 65504.0);
        assert_eq!(FP32.max_finite(), f32::MAX as f64);
        assert_eq!(FP32.min_positive_subnormal(), 2f64.powi(-149));
        assert_eq!(FP16.min_positive_subnormal(), 2f64.powi(-24));
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(PrecisionFormat::new(1, 7).is_err());
        assert!(PrecisionFormat::new(8, 0).is_err());
        assert!(PrecisionFormat::new(9, 7).is_err());
        assert!(PrecisionFormat::new(8, 51).is_err());
        assert!(PrecisionFormat::new(4, 3).is_ok());
    }

    #[test]
    fn parse_names() {
        assert_eq!("bf16".parse::<PrecisionFormat>().unwrap(), BF16);
        assert_eq!("FP16".parse::<PrecisionFormat>().unwrap(), FP16);
        assert_eq!("e8m23".parse::<PrecisionFormat>().unwrap(), FP32);
        assert_eq!(
            "e4m3".parse::<PrecisionFormat>().unwrap().name(),
            "e4m3".to_string()
        );
        assert!("fp8".parse::<PrecisionFormat>().is_err());
    }

    #[test]
    fn quantize_fixed_points() {
        assert_eq!(quantize(1.0, BF16), 1.0);
        assert_eq!(quantize(0.99609375, BF16), 0.99609375);
        assert_eq!(quantize(-0.0, BF16).to_bits(), (-0.0f64).to_bits());
        assert!(quantize(f64::NAN, BF16).is_nan());
        assert_eq!(quantize(f64::NEG_INFINITY, FP16), f64::NEG_INFINITY);
    }

    #[test]
    fn quantize_overflow_and_underflow() {
        assert_eq!(quantize(65504.0, FP16), 65504.0);
        // midpoint between max finite and 2^16 rounds to even, i.e. to infinity
        assert_eq!(quantize(65520.0, FP16), f64::INFINITY);
        assert_eq!(quantize(65519.99, FP16), 65504.0);
        assert_eq!(quantize(-1e6, FP16), f64::NEG_INFINITY);
        let tiny = FP16.min_positive_subnormal();
        assert_eq!(quantize(tiny * 0.5, FP16), 0.0);
        assert_eq!(quantize(tiny * 0.51, FP16), tiny);
        assert_eq!(quantize(tiny * 1.5, FP16), 2.0 * tiny);
        assert_eq!(quantize(-tiny * 0.25, FP16).to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn ulp_values() {
        assert_eq!(ulp(0.75, BF16), 0.00390625);
        assert_eq!(ulp(0.75, FP32), 2f64.powi(-24));
        assert_eq!(ulp(1.5, BF16), 2f64.powi(-7));
        assert_eq!(ulp(0.99609375, BF16), 0.99609375 - 0.9921875);
        assert_eq!(ulp(0.0, FP16), FP16.min_positive_subnormal());
        assert_eq!(ulp(1e-6, FP16), FP16.min_positive_subnormal());
    }

    #[test]
    fn ordinals_walk_the_grid() {
        assert_eq!(next_up(1.0, BF16), 1.0078125);
        assert_eq!(next_down(1.0, BF16), 0.99609375);
        assert_eq!(next_up(0.0, FP16), FP16.min_positive_subnormal());
        assert_eq!(next_down(0.0, FP16), -FP16.min_positive_subnormal());
        assert_eq!(next_up(FP16.max_finite(), FP16), f64::INFINITY);
        assert_eq!(next_up(-1.0, BF16), -0.99609375);
        let sub_top = FP16.min_positive_normal() - FP16.min_positive_subnormal();
        assert_eq!(next_up(sub_top, FP16), FP16.min_positive_normal());
        for &x in &[0.3, 1.7, 123.0, 1e-5, -2.5] {
            let q = quantize(x, FP16);
            assert_eq!(from_grid_ordinal(grid_ordinal(q, FP16), FP16), q);
        }
    }

    #[test]
    fn grid_listing() {
        let vals = grid_values(0.99, 1.0, BF16, 100).unwrap();
        assert_eq!(vals, vec![0.9921875, 0.99609375, 1.0]);
        assert_eq!(grid_values(1.0, 1.0, BF16, 10).unwrap(), vec![1.0]);
        assert!(grid_values(0.3, 0.3, BF16, 10).unwrap().is_empty());
        assert_eq!(grid_count(0.99, 1.0, BF16), 3);
        assert!(grid_count(0.99, 1.0, FP32) > 100_000);
        assert!(grid_values(0.0, 1.0, FP32, 1000).is_err());
        assert_eq!(grid_count(-1.0, 1.0, PrecisionFormat::new(2, 1).unwrap()), 5);
    }

    #[test]
    fn qop_basics() {
        assert_eq!(qop(1.0, 2f64.powi(-9), BinaryOp::Add, BF16), 1.0);
        assert_eq!(qop(0.5, 0.5, BinaryOp::Add, BF16), 1.0);
        assert_eq!(qop(1.0, 0.0, BinaryOp::Div, BF16), f64::INFINITY);
        assert_eq!(qop(-1.0, 0.0, BinaryOp::Div, BF16), f64::NEG_INFINITY);
        assert!(qop(f64::INFINITY, f64::INFINITY, BinaryOp::Sub, BF16).is_nan());
        assert_eq!(qop(3.0, 2.0, BinaryOp::Mul, FP16), 6.0);
    }

    #[test]
    fn qop_resolves_hidden_midpoints() {
        // 1 + (2^-41 + 2^-81): f64 rounds the sum onto the e8m40 midpoint
        // 1 + 2^-41, the exact value is above it and must round up.
        let fmt = PrecisionFormat::new(8, 40).unwrap();
        let b = 2f64.powi(-41) + 2f64.powi(-81);
        assert_eq!(quantize(b, fmt), b);
        assert_eq!(quantize(1.0 + b, fmt), 1.0, "naive double rounding");
        assert_eq!(qop(1.0, b, BinaryOp::Add, fmt), 1.0 + 2f64.powi(-40));
        assert_eq!(qop(1.0, -b, BinaryOp::Sub, fmt), 1.0 + 2f64.powi(-40));
        assert_eq!(qop(-1.0, -b, BinaryOp::Add, fmt), -(1.0 + 2f64.powi(-40)));
        assert_eq!(round_with_residual(1.0 + 2f64.powi(-41), -1, fmt), 1.0);
    }

    #[test]
    fn qfunc_basics() {
        assert_eq!(qfunc(0.0, UnaryFn::Exp, BF16), 1.0);
        assert_eq!(qfunc(100.0, UnaryFn::Exp, FP16), f64::INFINITY);
        assert_eq!(qfunc(2.0, UnaryFn::Negate, BF16), -2.0);
        assert_eq!(qfunc(4.0, UnaryFn::Sqrt, BF16), 2.0);
        assert_eq!(qfunc(2.0, UnaryFn::Sqrt, FP32), (2.0f32).sqrt() as f64);
    }

    #[test]
    fn quantized_value_is_on_grid() {
        let v = QuantizedValue::new(0.3, BF16);
        assert_eq!(quantize(v.value(), v.format()), v.value());
    }
}
