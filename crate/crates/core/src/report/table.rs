//! Result rows and their CSV form.
//!
//! Every file starts with `#` comment lines carrying the code version, the
//! command and the fully resolved configuration as one line of JSON. Numbers
//! are written as `{:.14e}` (15 significant digits); a blank field means the
//! value is absent, e.g. no oracle was requested or `P(y)` vanished.

use std::hash::Hasher;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::JointDistribution;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    /// `P(y)` is zero at this point; no CPF values are reported.
    ConditioningImpossible,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::ConditioningImpossible => "conditioning-impossible",
        }
    }
}

/// One `(t = τ, y)` point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    /// Dimensionless time `γ(n̄+1)t`.
    pub axis: f64,
    pub t: f64,
    pub tau: f64,
    pub y: f64,
    pub status: RowStatus,
    /// Series contribution of orders `1..=max_order`.
    pub per_order: Vec<f64>,
    pub total: Option<f64>,
    pub oracle: Option<f64>,
    pub oracle_stderr: Option<f64>,
    /// FNV-1a over the bit patterns of the series joint table.
    pub checksum: u64,
}

pub fn joint_checksum(joint: &JointDistribution) -> u64 {
    let mut h = fnv::FnvHasher::default();
    for v in joint.values() {
        h.write_u64(v.to_bits());
    }
    h.finish()
}

pub fn fmt_num(v: f64) -> String {
    format!("{v:.14e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Header lines, column names and string records of one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(command: &str, config_json: &str, columns: Vec<String>) -> Self {
        Self {
            comments: vec![
                format!("opnm {VERSION}"),
                format!("command: {command}"),
                format!("config: {config_json}"),
                "time axis: gamma*(nbar+1)*t with tau = t".into(),
            ],
            columns,
            records: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.comments {
            for line in c.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.records {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        out.push_str(std::str::from_utf8(&bytes).expect("records are UTF-8"));
        Ok(out)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

pub fn row_columns(max_order: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["axis", "t", "tau", "y", "status"].iter().map(|s| s.to_string()).collect();
    cols.extend((1..=max_order).map(|n| format!("cpf_order_{n}")));
    cols.extend(["cpf_total", "oracle_cpf", "oracle_stderr", "joint_checksum"].iter().map(|s| s.to_string()));
    cols
}

impl ResultRow {
    pub fn record(&self, max_order: usize) -> Vec<String> {
        let mut r = vec![fmt_num(self.axis), fmt_num(self.t), fmt_num(self.tau), fmt_num(self.y)];
        r.push(self.status.as_str().into());
        for n in 0..max_order {
            r.push(fmt_opt(self.per_order.get(n).copied()));
        }
        r.push(fmt_opt(self.total));
        r.push(fmt_opt(self.oracle));
        r.push(fmt_opt(self.oracle_stderr));
        r.push(format!("{:016x}", self.checksum));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_significant_digits() {
        assert_eq!(fmt_num(0.1), "1.00000000000000e-1");
        assert_eq!(fmt_num(-2.5e-12), "-2.50000000000000e-12");
        assert_eq!(fmt_num(1.0 / 3.0).parse::<f64>().unwrap(), 0.333333333333333);
    }

    #[test]
    fn csv_has_comment_header_and_lf_endings() {
        let mut t = CsvTable::new("simulate", "{\"a\":1}", row_columns(2));
        let row = ResultRow {
            axis: 0.5,
            t: 0.5,
            tau: 0.5,
            y: -1.0,
            status: RowStatus::Ok,
            per_order: vec![0.0, 1e-3],
            total: Some(1e-3),
            oracle: None,
            oracle_stderr: None,
            checksum: 42,
        };
        t.records.push(row.record(2));
        let text = t.to_csv().unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# opnm {VERSION}"));
        assert_eq!(lines[2], "# config: {\"a\":1}");
        assert_eq!(
            lines[4],
            "axis,t,tau,y,status,cpf_order_1,cpf_order_2,cpf_total,oracle_cpf,oracle_stderr,joint_checksum"
        );
        assert!(lines[5].ends_with(",,,000000000000002a"));
        assert_eq!(lines.len(), 6);
    }
}
