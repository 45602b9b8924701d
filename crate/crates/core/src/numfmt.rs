//! Numeric formatting for CSV artifacts.

/// Format a float with 17 significant digits, enough for exact f64 round-trips.
pub fn float17(value: f64) -> String {
    format!("{value:.16e}")
}
