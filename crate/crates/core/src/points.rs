//! Decimal point values and their textual form.

use std::str::FromStr;

use rust_decimal::{Decimal, RoundingStrategy};

pub use rust_decimal::Decimal as Points;

/// Render with at most four fractional digits, trailing zeros trimmed.
pub fn format_points(value: Decimal) -> String {
    let rounded = value
        .round_dp_with_strategy(4, RoundingStrategy::MidpointAwayFromZero)
        .normalize();
    if rounded.is_zero() {
        "0".to_string()
    } else {
        rounded.to_string()
    }
}

/// Parse a non-negative decimal written with "." as the separator.
pub fn parse_points(text: &str) -> Result<Decimal, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("points value is empty".into());
    }
    let value = Decimal::from_str(t).map_err(|_| format!("{t:?} is not a decimal number"))?;
    if value.is_sign_negative() && !value.is_zero() {
        return Err(format!("{t:?} is negative; points are magnitudes"));
    }
    Ok(value)
}
