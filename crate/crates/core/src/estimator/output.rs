use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AteResult, Method};
use crate::error::Result;

#[derive(Serialize, Deserialize)]
struct Row {
    horizon: f64,
    method: Method,
    estimate: f64,
    std_err: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    clipped_fraction: f64,
}

/// One row per result; absent standard errors and intervals are empty cells.
pub fn write_results_csv<W: Write>(writer: W, results: &[AteResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in results {
        w.serialize(Row {
            horizon: r.horizon,
            method: r.method,
            estimate: r.estimate,
            std_err: r.std_err,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            clipped_fraction: r.clipped_fraction,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Inverse of [`write_results_csv`]. The CSV does not carry `n` or the
/// weak-instrument fraction; both come back as zero.
pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<AteResult>> {
    csv::Reader::from_reader(reader)
        .deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(AteResult {
                std_err: row.std_err,
                ci_low: row.ci_low,
                ci_high: row.ci_high,
                clipped_fraction: row.clipped_fraction,
                ..AteResult::point(row.horizon, row.method, row.estimate, 0)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let mut a = AteResult::point(1.5, Method::Onestep, -0.125, 0);
        a.std_err = Some(0.03);
        a.ci_low = Some(-0.2);
        a.ci_high = Some(-0.05);
        a.clipped_fraction = 0.01;
        let b = AteResult::point(1.5, Method::Plugin, 0.1, 0);
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("horizon,method,estimate,std_err,ci_low,ci_high,clipped_fraction\n"));
        assert!(text.contains("1.5,plugin,0.1,,,,0"));
        assert_eq!(read_results_csv(buf.as_slice()).unwrap(), vec![a, b]);
    }
}
