//! Uniformly sampled time series shared by every simulator.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker attached to a trajectory sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: String,
}

impl Event {
    pub fn new(t: f64, kind: impl Into<String>) -> Self {
        Event {
            t,
            kind: kind.into(),
        }
    }
}

/// States, outputs and inputs sampled at `t0 + i·dt`.
///
/// All three sequences have one entry per sample. Channels a simulator does
/// not produce are stored as zero-length vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub events: Vec<Event>,
    pub seed: Option<u64>,
}

impl Trajectory {
    /// A trajectory with states only.
    pub fn from_states(t0: f64, dt: f64, states: Vec<DVector<f64>>) -> Self {
        let n = states.len();
        Trajectory {
            t0,
            dt,
            states,
            outputs: vec![DVector::zeros(0); n],
            inputs: vec![DVector::zeros(0); n],
            events: Vec::new(),
            seed: None,
        }
    }

    pub fn new(
        t0: f64,
        dt: f64,
        states: Vec<DVector<f64>>,
        outputs: Vec<DVector<f64>>,
        inputs: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if outputs.len() != states.len() || inputs.len() != states.len() {
            return Err(Error::DimensionMismatch {
                context: "trajectory sequence lengths",
                expected: states.len(),
                got: if outputs.len() != states.len() {
                    outputs.len()
                } else {
                    inputs.len()
                },
            });
        }
        Ok(Trajectory {
            t0,
            dt,
            states,
            outputs,
            inputs,
            events: Vec::new(),
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has no samples")
    }

    /// Component `i` of every state.
    pub fn state_component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[i]).collect()
    }

    pub fn output_component(&self, i: usize) -> Vec<f64> {
        self.outputs.iter().map(|y| y[i]).collect()
    }

    /// Nearest sample index to time `t`, clamped into range.
    pub fn index_at(&self, t: f64) -> usize {
        let i = ((t - self.t0) / self.dt).round();
        (i.max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    fn widths(&self) -> (usize, usize, usize) {
        let w = |v: &[DVector<f64>]| v.first().map_or(0, |x| x.len());
        (w(&self.states), w(&self.outputs), w(&self.inputs))
    }

    /// CSV with header `t,x1..xn,y1..yk,u1..um`; `preamble` lines are written first.
    pub fn to_csv(&self, preamble: &[String]) -> String {
        let (n, k, m) = self.widths();
        let mut out = String::new();
        for line in preamble {
            out.push_str(line);
            out.push('\n');
        }
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=k).map(|i| format!("y{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.len() {
            let mut row = vec![fmt_num(self.time(i))];
            row.extend(self.states[i].iter().map(|&v| fmt_num(v)));
            row.extend(self.outputs[i].iter().map(|&v| fmt_num(v)));
            row.extend(self.inputs[i].iter().map(|&v| fmt_num(v)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Event markers as CSV `t,event`.
    pub fn events_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for line in preamble {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("t,event\n");
        for e in &self.events {
            let _ = writeln!(out, "{},{}", fmt_num(e.t), e.kind);
        }
        out
    }
}

/// Seventeen significant digits, `.` decimal separator.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}
