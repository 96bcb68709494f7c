use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::mc::McReport;
use crate::error::Result;
use crate::estimator::Method;

/// One row of the long-format report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub set: String,
    pub method: Method,
    pub horizon_q: f64,
    pub bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub ci_width: f64,
    pub failures: usize,
    #[serde(rename = "B")]
    pub reps: usize,
    pub n: usize,
    pub seed: u64,
}

impl McReport {
    pub fn rows(&self) -> Vec<McRow> {
        self.cells
            .iter()
            .map(|c| McRow {
                set: self.set.clone(),
                method: c.method,
                horizon_q: c.quantile,
                bias: c.bias,
                rmse: c.rmse,
                coverage: c.coverage,
                ci_width: c.mean_ci_width,
                failures: self.failures,
                reps: self.reps,
                n: self.n,
                seed: self.seed,
            })
            .collect()
    }
}

pub fn write_report_json<W: Write>(writer: W, report: &McReport) -> Result<()> {
    serde_json::to_writer_pretty(writer, report)?;
    Ok(())
}

pub fn read_report_json<R: Read>(reader: R) -> Result<McReport> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_report_csv<W: Write>(writer: W, report: &McReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in report.rows() {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_report_csv<R: Read>(reader: R) -> Result<Vec<McRow>> {
    Ok(csv::Reader::from_reader(reader).deserialize().collect::<Result<_, _>>()?)
}
