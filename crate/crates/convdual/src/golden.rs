//! Plain-text golden vectors: one decimal value per line with 17
//! significant digits.

use std::num::ParseFloatError;

/// Formats values one per line, 17 significant digits each.
#[must_use]
pub fn format_values(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.16e}\n")).collect()
}

/// Parses a golden file, skipping blank lines and `#` comments.
pub fn parse_values(text: &str) -> Result<Vec<f64>, ParseFloatError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}
