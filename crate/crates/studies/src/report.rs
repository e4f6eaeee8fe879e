use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use paperprint_core::{Error, Result};

/// One table per study: the leading `keys` columns are the independent
/// variables, one row per value (or cell).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub columns: Vec<String>,
    pub keys: usize,
    pub rows: Vec<Vec<f64>>,
    /// Whole-study quantities such as fitted slopes and p-values.
    pub summary: BTreeMap<String, f64>,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl StudyReport {
    pub fn new(
        study: &str,
        columns: &[&str],
        keys: usize,
        seed: u64,
        config: serde_json::Value,
    ) -> Self {
        Self {
            study: study.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            keys,
            rows: Vec::new(),
            summary: BTreeMap::new(),
            seed,
            config,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Domain(format!(
                "{} row has {} values for {} columns",
                self.study,
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        let i = self.columns.iter().position(|c| c == name)?;
        self.rows.get(row).map(|r| r[i])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Format(format!("csv: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v}")))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Format(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }

    /// Config, seed and summary; enough to rerun and check the CSV.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "study": self.study,
            "seed": self.seed,
            "columns": self.columns,
            "rows": self.rows.len(),
            "summary": self.summary,
            "config": self.config,
        })
    }
}
