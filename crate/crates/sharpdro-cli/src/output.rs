//! Result-table writers: plain delimited text with fixed column order.
//!
//! All result tables share the normative column set
//! `method,seed,epoch,severity,accuracy,loss,sharpness,grad_norm,omega_or_score_mean`.
//! Floats print in Rust's shortest round-trip form, so files are
//! byte-stable across runs; absent values print as empty fields.

use std::fmt::Write as _;
use std::path::Path;

use sharpdro::methods::{Method, RunRecord};

use crate::CliError;

pub const RESULT_HEADER: &str =
    "method,seed,epoch,severity,accuracy,loss,sharpness,grad_norm,omega_or_score_mean";

pub fn method_name(method: Method) -> &'static str {
    match method {
        Method::Erm => "ERM",
        Method::GroupDro => "GroupDRO",
        Method::Rex => "REx",
        Method::Sam => "SAM",
        Method::SharpDroAware => "SharpDROAware",
        Method::SharpDroAgnostic => "SharpDROAgnostic",
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Renders one run's record as normative CSV rows (no header).
pub fn record_rows(method: Method, seed: u64, record: &RunRecord) -> String {
    let mut out = String::new();
    for row in &record.rows {
        for m in &row.metrics {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                method_name(method),
                seed,
                row.epoch,
                m.severity,
                fmt_opt(m.accuracy),
                fmt_opt(m.loss),
                fmt_opt(m.sharpness),
                fmt_opt(m.grad_norm),
                fmt_opt(row.omega_or_score_mean[m.severity]),
            );
        }
    }
    out
}

pub fn write_results_csv(
    path: &Path,
    body_chunks: &[String],
) -> Result<(), CliError> {
    let mut text = String::from(RESULT_HEADER);
    text.push('\n');
    for chunk in body_chunks {
        text.push_str(chunk);
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display()), None))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display()), None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optional_values_render_as_empty_fields() {
        assert_eq!(fmt_opt(None), "");
        assert_eq!(fmt_opt(Some(0.5)), "0.5");
        // shortest round-trip form preserves the value exactly
        let x = 0.1 + 0.2;
        let s = fmt_opt(Some(x));
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
