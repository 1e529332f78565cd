use std::io::{self, Write};

use super::metrics::MetricsReport;

/// Column order of every metrics CSV.
pub const CSV_HEADER: &str = "predictor,horizon,history,samples,rmse,mae,infer_ms,params";

/// Formats like C's `%.6g`: six significant digits, trailing zeros
/// dropped, exponent form outside `[1e-4, 1e6)`.
pub fn format_g6(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // The exponent must come from the rounded value: 999999.5 prints as 1e+06.
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV line (no newline) for `r`.
pub fn csv_row(r: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.predictor,
        r.horizon,
        r.history,
        r.samples,
        format_g6(r.rmse),
        format_g6(r.mae),
        format_g6(r.infer_ms),
        r.params
    )
}

/// Header plus one row per report.
pub fn write_csv<'a>(mut out: impl Write, reports: impl IntoIterator<Item = &'a MetricsReport>) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", csv_row(r))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (999999.5, "1e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (0.0215, "0.0215"),
            (1.23456789, "1.23457"),
            (-2.5e-7, "-2.5e-07"),
            (1e100, "1e+100"),
            (100.0, "100"),
            (0.000123456789, "0.000123457"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g6(x), want, "{x}");
        }
    }
}
