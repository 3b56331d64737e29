//! CSV traces and the per-run JSON summary.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliResult;

/// Shortest round-tripping decimal, switching to exponent form outside
/// `[1e-4, 1e6)` so tiny gaps stay short.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e6).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes a header row and `rows` to `path`.
pub fn write_csv<P: AsRef<Path>>(
    path: P,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> CliResult<usize> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    let mut count = 0;
    for row in rows {
        w.write_record(&row)?;
        count += 1;
    }
    w.flush()?;
    Ok(count)
}

/// Outcome of one run, printed as a single JSON line.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: &'static str,
    pub status: String,
    pub iterations: usize,
    pub final_f: f64,
    pub final_grad_norm: f64,
    pub bound_violations: usize,
    pub wall_time_s: f64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl RunSummary {
    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extra.insert(key.to_string(), value.into());
        self
    }

    pub fn print(&self) {
        println!("{}", serde_json::to_string(self).expect("summary serializes"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 0.25, 1.0 / 3.0, 1e-300, -2.5e-7, 123456789.0, 5e-5] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(1e-300), "1e-300");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.csv");
        let n = write_csv(&p, &["a", "b"], vec![vec!["1".into(), "2".into()]]).unwrap();
        assert_eq!(n, 1);
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n1,2\n");
    }
}
