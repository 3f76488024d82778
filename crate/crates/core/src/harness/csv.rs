use std::fmt::Write as _;
use std::path::Path;

use super::run::MetricsRow;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "axis,detector,success_rate,ser,channel_mse,runtime_ms,bound";

/// Six significant digits, shortest decimal form.
fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn to_csv_string(rows: &[MetricsRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no rows to write".into()));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let bound = r.bound.map(sig6).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sig6(r.axis_value),
            r.detector,
            sig6(r.success_rate),
            sig6(r.ser),
            sig6(r.channel_mse),
            sig6(r.runtime_ms),
            bound
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

pub fn emit_csv(rows: &[MetricsRow], destination: &Path) -> Result<()> {
    let text = to_csv_string(rows)?;
    std::fs::write(destination, text).map_err(|source| Error::Io { path: destination.to_path_buf(), source })
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config("missing metrics CSV header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Config(format!("malformed metrics row {}: {line:?}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(MetricsRow {
                axis_value: num(f[0])?,
                detector: f[1].to_string(),
                success_rate: num(f[2])?,
                ser: num(f[3])?,
                channel_mse: num(f[4])?,
                runtime_ms: num(f[5])?,
                bound: if f[6].is_empty() { None } else { Some(num(f[6])?) },
            })
        })
        .collect()
}
