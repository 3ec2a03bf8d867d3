//! Per-step norm traces and their CSV form.

use std::io::{Read, Write};

use dlr_core::dlr::{gram, DlrState};
use dlr_core::integrators::HeatModel;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

pub const CSV_HEADER: [&str; 8] = [
    "step",
    "time",
    "energy_norm",
    "h_norm",
    "v_norm",
    "gram_min_singular_value",
    "effective_rank",
    "fp_iters",
];

/// Relative per-step slack when deciding monotonicity.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub h_norm: f64,
    pub v_norm: f64,
    pub gram_min_singular_value: f64,
    pub effective_rank: usize,
    /// Picard iterations, implicit scheme only.
    pub fp_iters: Option<usize>,
}

impl TraceRow {
    pub fn measure(model: &HeatModel, state: &DlrState, step: usize, rank_tol_factor: f64, fp_iters: Option<usize>) -> Result<Self> {
        let ops = model.ops();
        let mu = model.measure();
        let g = gram(ops, state.modes())?;
        Ok(Self {
            step,
            time: state.time(),
            energy: state.norm_energy(ops, mu)?,
            h_norm: state.norm_h(ops, mu)?,
            v_norm: state.norm_v(ops, mu)?,
            gram_min_singular_value: g.min_singular_value(),
            effective_rank: g.effective_rank(rank_tol_factor),
            fp_iters,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormTrace {
    pub rows: Vec<TraceRow>,
}

fn count_increases(values: impl Iterator<Item = f64>) -> usize {
    let mut prev: Option<f64> = None;
    let mut n = 0;
    for v in values {
        if let Some(p) = prev {
            if v > p + MONOTONE_SLACK * v.abs() {
                n += 1;
            }
        }
        prev = Some(v);
    }
    n
}

impl NormTrace {
    pub fn push(&mut self, row: TraceRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.step < row.step));
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Steps at which the energy norm grew beyond the slack.
    pub fn energy_increases(&self) -> usize {
        count_increases(self.rows.iter().map(|r| r.energy))
    }

    pub fn h_increases(&self) -> usize {
        count_increases(self.rows.iter().map(|r| r.h_norm))
    }

    pub fn energy_monotone(&self) -> bool {
        self.energy_increases() == 0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.step.to_string(),
                format!("{:.16e}", r.time),
                format!("{:.16e}", r.energy),
                format!("{:.16e}", r.h_norm),
                format!("{:.16e}", r.v_norm),
                format!("{:.16e}", r.gram_min_singular_value),
                r.effective_rank.to_string(),
                r.fp_iters.map(|n| n.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        if header != CSV_HEADER {
            return Err(ExperimentError::config("trace.csv", format!("unexpected header {header:?}")));
        }
        let bad = |col: &str| ExperimentError::config("trace.csv", format!("unparsable `{col}`"));
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
            let u = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(CSV_HEADER[i]));
            rows.push(TraceRow {
                step: u(0)?,
                time: f(1)?,
                energy: f(2)?,
                h_norm: f(3)?,
                v_norm: f(4)?,
                gram_min_singular_value: f(5)?,
                effective_rank: u(6)?,
                fp_iters: if rec[7].is_empty() { None } else { Some(u(7)?) },
            });
        }
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: usize, energy: f64) -> TraceRow {
        TraceRow {
            step,
            time: step as f64 * 0.1,
            energy,
            h_norm: energy / 3.0,
            v_norm: std::f64::consts::PI * energy,
            gram_min_singular_value: 1.0 / 7.0,
            effective_rank: 3,
            fp_iters: if step.is_multiple_of(2) { Some(step) } else { None },
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let trace = NormTrace {
            rows: (0..5).map(|k| row(k, 1.0 / (k as f64 + 3.0))).collect(),
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,time,energy_norm,h_norm,v_norm,gram_min_singular_value,effective_rank,fp_iters"));
        assert_eq!(NormTrace::read_csv(buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn increases_respect_slack() {
        let t = NormTrace {
            rows: vec![row(0, 1.0), row(1, 1.0 + 1e-13), row(2, 0.5), row(3, 0.6)],
        };
        assert_eq!(t.energy_increases(), 1);
    }
}
