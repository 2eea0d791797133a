//! Per-iteration run records shared by SubSearch and the filtering baseline.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// Absent for methods without a temperature.
    pub temperature: Option<f64>,
    pub current_cost: f64,
    pub best_cost: f64,
    pub accepted_moves: Option<usize>,
    pub subgraph_size: usize,
    /// Filled only when ground truth is known.
    pub estimation_error: Option<f64>,
    pub outliers_in_s: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "iter",
                "temperature",
                "current_cost",
                "best_cost",
                "accepted_moves",
                "subgraph_size",
                "estimation_error",
                "outliers_in_s",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        Ok(RunTrace { rows })
    }
}

/// Ground-truth columns for a trace row.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Annotation {
    pub estimation_error: Option<f64>,
    pub outliers_in_s: Option<usize>,
}

/// Supplies ground-truth columns for evaluated states.
pub trait TraceAnnotator {
    fn annotate(&self, eval: &crate::estimator::Evaluation) -> Annotation;
}
