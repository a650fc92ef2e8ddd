//! Per-iteration metrics CSV and long-format traces.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const METRICS_VERSION_LINE: &str = "# lyapunov-metrics v1";
pub const METRICS_COLUMNS: [&str; 7] = [
    "iteration",
    "mean_return",
    "mean_constraint_return",
    "violation_fraction",
    "policy_kl",
    "lambda",
    "wall_clock",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    /// Mean undiscounted cost return of the evaluation episodes.
    pub mean_return: f64,
    pub mean_constraint_return: f64,
    /// Fraction of evaluation episodes with constraint return above d0.
    pub violation_fraction: f64,
    pub policy_kl: f64,
    pub lambda: Option<f64>,
    pub wall_clock: Option<f64>,
}

pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl MetricsWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> MetricsWriter<W> {
    /// Writes the version line and the header immediately.
    pub fn new(mut sink: W) -> Result<Self> {
        writeln!(sink, "{METRICS_VERSION_LINE}")?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
        inner.write_record(METRICS_COLUMNS)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| crate::error::HarnessError::Io(e.into_error()))
    }
}

/// Reads a metrics file; comment lines are skipped and unknown columns ignored.
pub fn read_metrics<R: std::io::Read>(reader: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

/// Tidy rows `(run, seed, iteration, metric, value)` for external plotting.
pub fn write_traces<W: Write>(sink: W, run: &str, seed: u64, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["run", "seed", "iteration", "metric", "value"])?;
    for row in rows {
        let it = row.iteration.to_string();
        let s = seed.to_string();
        let mut put = |metric: &str, value: f64| w.write_record([run, &s, &it, metric, &value.to_string()]);
        put("mean_return", row.mean_return)?;
        put("mean_constraint_return", row.mean_constraint_return)?;
        put("violation_fraction", row.violation_fraction)?;
        put("policy_kl", row.policy_kl)?;
        if let Some(l) = row.lambda {
            put("lambda", l)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize) -> MetricsRow {
        MetricsRow {
            iteration: i,
            mean_return: -1.5 * i as f64,
            mean_constraint_return: 0.25,
            violation_fraction: 0.1,
            policy_kl: 1e-3,
            lambda: if i % 2 == 0 { Some(0.5) } else { None },
            wall_clock: None,
        }
    }

    #[test]
    fn header_only_and_round_trip() {
        let w = MetricsWriter::new(Vec::new()).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(
            text,
            "# lyapunov-metrics v1\niteration,mean_return,mean_constraint_return,violation_fraction,policy_kl,lambda,wall_clock\n"
        );
        let mut w = MetricsWriter::new(Vec::new()).unwrap();
        let rows: Vec<MetricsRow> = (1..4).map(row).collect();
        for r in &rows {
            w.write(r).unwrap();
        }
        let bytes = w.into_inner().unwrap();
        assert_eq!(read_metrics(&bytes[..]).unwrap(), rows);
    }

    #[test]
    fn unknown_columns_are_ignored() {
        let text = "# lyapunov-metrics v1\niteration,mean_return,mean_constraint_return,violation_fraction,policy_kl,lambda,wall_clock,extra\n1,2,3,0.5,0.1,,,zzz\n";
        let rows = read_metrics(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].lambda, None);
        assert_eq!(rows[0].violation_fraction, 0.5);
    }

    #[test]
    fn traces_are_long_format() {
        let mut out = Vec::new();
        write_traces(&mut out, "ddpg", 3, &[row(2)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 5);
        assert!(text.contains("ddpg,3,2,lambda,0.5"));
    }
}
