//! CSV tables, the JSON run summary and their on-disk layout.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row.iter().map(|x| fmt_f64(*x)).collect());
    }

    pub fn push_text(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Hard checks decide the exit status; soft ones are reported only.
    pub hard: bool,
    pub value: String,
    pub relation: String,
    pub bound: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64, hard: bool) -> Self {
        Self {
            name: name.to_string(),
            passed: value <= bound,
            hard,
            value: fmt_f64(value),
            relation: "<=".into(),
            bound: fmt_f64(bound),
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64, hard: bool) -> Self {
        Self {
            name: name.to_string(),
            passed: value >= bound,
            hard,
            value: fmt_f64(value),
            relation: ">=".into(),
            bound: fmt_f64(bound),
        }
    }

    pub fn greater(name: &str, value: f64, bound: f64, hard: bool) -> Self {
        Self {
            name: name.to_string(),
            passed: value > bound,
            hard,
            value: fmt_f64(value),
            relation: ">".into(),
            bound: fmt_f64(bound),
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64, hard: bool) -> Self {
        Self {
            name: name.to_string(),
            passed: value >= lo && value <= hi,
            hard,
            value: fmt_f64(value),
            relation: "in".into(),
            bound: format!("[{},{}]", fmt_f64(lo), fmt_f64(hi)),
        }
    }

    pub fn flag(name: &str, passed: bool, hard: bool) -> Self {
        Self {
            name: name.to_string(),
            passed,
            hard,
            value: passed.to_string(),
            relation: "==".into(),
            bound: "true".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub version: String,
    pub config_hash: String,
    pub speed: String,
    pub status: Status,
    pub checks: Vec<Check>,
    /// Reported numbers as round-trip decimal strings.
    pub values: BTreeMap<String, String>,
    pub errors: Vec<String>,
}

impl Summary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(|v| v.parse().ok())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config_text: String,
    pub summary: Summary,
    pub tables: Vec<Table>,
    /// Wall-clock milliseconds per stage; written apart from the summary.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.summary.status == Status::Pass
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `config.txt`, one CSV per table, `summary.json` and
    /// `timings.json` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.txt"), &self.config_text)?;
        for t in &self.tables {
            fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        let summary = serde_json::to_string_pretty(&self.summary).map_err(io::Error::other)?;
        fs::write(dir.join("summary.json"), summary + "\n")?;
        let timings = serde_json::to_string_pretty(&self.timings).map_err(io::Error::other)?;
        fs::write(dir.join("timings.json"), timings + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new("demo", &["t", "x"]);
        t.push(&[0.0, 0.1]);
        t.push(&[1e-10, -2.5]);
        assert_eq!(t.to_csv(), "t,x\n0e0,1e-1\n1e-10,-2.5e0\n");
    }

    #[test]
    fn checks_compare_as_named() {
        assert!(Check::at_most("a", 1e-9, 1e-8, true).passed);
        assert!(!Check::at_most("a", f64::NAN, 1e-8, true).passed);
        assert!(Check::within("r", 2.0, 1.5, 2.5, true).passed);
        assert!(!Check::greater("g", 0.0, 0.0, true).passed);
    }

    proptest! {
        #[test]
        fn float_format_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
