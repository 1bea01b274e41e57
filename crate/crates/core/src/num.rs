//! Scalar abstraction shared by the numeric parts of the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type usable for weights, scales and incomes.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every literal used by the crate fits both `f32` and `f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Formats a number for the one-value-per-line output files.
///
/// Decimal point is '.', no grouping separators. Integral values print without a
/// fractional part; anything else is rounded to 12 significant digits and printed
/// with the shortest decimal that reads back to that rounded value.
pub fn format_number<T: Scalar>(x: T) -> String {
    let v = x.as_f64();
    if !v.is_finite() {
        return v.to_string();
    }
    if v == v.trunc() && v.abs() < 1e15 {
        // -0 prints as 0
        return format!("{}", v as i64);
    }
    let rounded: f64 = format!("{:.11e}", v).parse().unwrap_or(v);
    if rounded == rounded.trunc() && rounded.abs() < 1e15 {
        return format!("{}", rounded as i64);
    }
    format!("{}", rounded)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_have_no_fraction() {
        assert_eq!(format_number(14500.0_f64), "14500");
        assert_eq!(format_number(3.0_f32), "3");
        assert_eq!(format_number(-0.0_f64), "0");
        assert_eq!(format_number(3_000_000.0_f64), "3000000");
    }

    #[test]
    fn fractions_are_shortest_after_rounding() {
        assert_eq!(format_number(1.0_f64 + 0.7 + 0.5), "2.2");
        assert_eq!(format_number(0.1_f64 + 0.2), "0.3");
        assert_eq!(format_number(0.5_f64), "0.5");
        assert_eq!(format_number(3.5_f64.powf(0.7)), "2.40351939535");
        assert_eq!(format_number(0.7_f32), "0.699999988079");
    }

    #[test]
    fn tiny_and_huge_values_stay_decimal() {
        assert_eq!(format_number(1e-7_f64), "0.0000001");
        assert_eq!(format_number(1.5e16_f64), "15000000000000000");
    }
}
