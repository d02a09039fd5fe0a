//! Fixed-schema CSV helpers. All floating-point output is rendered at 12
//! significant digits so artifacts diff cleanly across runs.

use crate::error::{Error, Result};

/// Formats a float at 12 significant digits, trimming the exponent form that
/// `{:e}` would force on round numbers.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let formatted = format!("{:.*e}", 11, x);
    // Re-render small-magnitude numbers in plain notation when that is exact.
    let plain = format!("{:.12}", x);
    if let Ok(back) = plain.parse::<f64>() {
        let scale = x.abs().max(1e-300);
        if ((back - x) / scale).abs() < 5e-12 && x.abs() < 1e15 && x.abs() >= 1e-6 {
            let trimmed = plain.trim_end_matches('0').trim_end_matches('.');
            return trimmed.to_string();
        }
    }
    formatted
}

/// Splits a CSV line into exactly `want` floats.
pub fn parse_fields(line: &str, want: usize, lineno: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != want {
        return Err(Error::Config {
            line: lineno,
            column: 1,
            message: format!("expected {want} fields, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .enumerate()
        .map(|(col, f)| {
            f.parse::<f64>().map_err(|_| Error::Config {
                line: lineno,
                column: col + 1,
                message: format!("not a number: {f}"),
            })
        })
        .collect()
}
