use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// One row of the iteration log. Row 0 describes the initialization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub data_fidelity: f64,
    pub reg_u: f64,
    pub reg_k: f64,
    /// Lipschitz estimates after the iteration; for PAM these hold `1/τ`.
    pub l_u: f64,
    pub l_k: f64,
    /// Backtracking retries spent in this iteration (both blocks).
    pub retries: usize,
    /// Wall-clock seconds since the run started.
    pub seconds: f64,
}

pub const TRACE_CSV_HEADER: &str = "iter,objective,data_fidelity,reg_u,reg_k,L_u,L_k,retries,seconds";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
}

impl SolverTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.last().map(|r| r.objective)
    }

    /// Largest increase `Ψ_{t+1} - Ψ_t` over the run (negative if strictly decreasing).
    pub fn max_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].objective - w[0].objective)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.iter,
                r.objective,
                r.data_fidelity,
                r.reg_u,
                r.reg_k,
                r.l_u,
                r.l_k,
                r.retries,
                r.seconds
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Parses the output of [`SolverTrace::write_csv`].
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == TRACE_CSV_HEADER => {}
            other => return Err(format!("unexpected trace header {other:?}")),
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(format!("line {}: expected 9 fields, got {}", n + 2, fields.len()));
            }
            let f = |i: usize| -> Result<f64, String> {
                fields[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| format!("line {}: field {}: {e}", n + 2, i + 1))
            };
            let int = |i: usize| -> Result<usize, String> {
                fields[i]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| format!("line {}: field {}: {e}", n + 2, i + 1))
            };
            records.push(IterationRecord {
                iter: int(0)?,
                objective: f(1)?,
                data_fidelity: f(2)?,
                reg_u: f(3)?,
                reg_k: f(4)?,
                l_u: f(5)?,
                l_k: f(6)?,
                retries: int(7)?,
                seconds: f(8)?,
            });
        }
        Ok(Self { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iter: usize, objective: f64) -> IterationRecord {
        IterationRecord {
            iter,
            objective,
            data_fidelity: objective / 2.0,
            reg_u: objective / 4.0,
            reg_k: objective / 4.0,
            l_u: 1.0,
            l_k: 1024.0,
            retries: iter % 3,
            seconds: 0.125 * iter as f64,
        }
    }

    #[test]
    fn csv_round_trip() {
        let trace = SolverTrace {
            records: vec![record(0, 10.0), record(1, 0.1 + 0.2), record(2, 1e-300)],
        };
        let text = trace.to_csv();
        assert!(text.starts_with(TRACE_CSV_HEADER));
        assert_eq!(SolverTrace::from_csv(&text).unwrap(), trace);
        assert!(SolverTrace::from_csv("iter,objective\n").is_err());
    }

    #[test]
    fn max_increase() {
        let trace = SolverTrace {
            records: vec![record(0, 3.0), record(1, 2.0), record(2, 2.5)],
        };
        assert_eq!(trace.max_increase(), 0.5);
        assert_eq!(trace.final_objective(), Some(2.5));
    }
}
