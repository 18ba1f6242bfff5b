//! Per-iteration records, trace sinks and the shared solve driver types.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column header of every trace CSV, in order.
pub const CSV_HEADER: &str =
    "k,objective,stationarity,feasibility,lagrangian,dual_lambda,dual_mu,delta,d_norm,descent_ok,wallclock_ns";

/// One row of a solver trace. Fields a solver does not produce are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: u64,
    /// `f(x_k) + h(x_k)` (finite part).
    pub objective: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    pub lagrangian: Option<f64>,
    pub dual_norm_lambda: f64,
    pub dual_norm_mu: Option<f64>,
    pub delta: Option<f64>,
    pub d_norm: Option<f64>,
    /// `None` when the descent certificate does not apply to this step.
    pub descent_ok: Option<bool>,
    pub wallclock_ns: u64,
    /// `τ` used by the step that produced this iterate (not in the CSV).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// `‖z_k‖ / ‖z_k − z_{k−1}‖` (not in the CSV).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_ratio: Option<f64>,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl IterationRecord {
    pub fn csv_row(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(fmt_f64).unwrap_or_default()
        }
        [
            self.k.to_string(),
            fmt_f64(self.objective),
            fmt_f64(self.stationarity),
            fmt_f64(self.feasibility),
            opt(self.lagrangian),
            fmt_f64(self.dual_norm_lambda),
            opt(self.dual_norm_mu),
            opt(self.delta),
            opt(self.d_norm),
            self.descent_ok.map(|b| b.to_string()).unwrap_or_default(),
            self.wallclock_ns.to_string(),
        ]
        .join(",")
    }
}

/// Consumes iteration records in iteration order.
pub trait TraceSink {
    fn record(&mut self, rec: &IterationRecord) -> Result<()>;
}

impl TraceSink for Vec<IterationRecord> {
    fn record(&mut self, rec: &IterationRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &IterationRecord) -> Result<()> {
        Ok(())
    }
}

impl<T: TraceSink + ?Sized> TraceSink for &mut T {
    fn record(&mut self, rec: &IterationRecord) -> Result<()> {
        (**self).record(rec)
    }
}

/// Streams records as CSV rows; the header is written on construction.
pub struct CsvTraceWriter<W: Write> {
    out: W,
    label: String,
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(mut out: W, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        writeln!(out, "{CSV_HEADER}").map_err(|e| Error::io(&label, e))?;
        Ok(Self { out, label })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TraceSink for CsvTraceWriter<W> {
    fn record(&mut self, rec: &IterationRecord) -> Result<()> {
        writeln!(self.out, "{}", rec.csv_row()).map_err(|e| Error::io(&self.label, e))?;
        self.out.flush().map_err(|e| Error::io(&self.label, e))
    }
}

/// When to stop and how often to emit records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_iters: u64,
    pub eps_stat: f64,
    pub eps_feas: f64,
    /// Emit every `record_every`-th iteration (the final one is always emitted).
    pub record_every: u64,
}

impl StoppingRule {
    pub fn new(max_iters: u64, eps_stat: f64, eps_feas: f64) -> Self {
        Self {
            max_iters,
            eps_stat,
            eps_feas,
            record_every: 1,
        }
    }

    pub fn with_record_every(mut self, every: u64) -> Self {
        self.record_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.eps_stat > 0.0 && self.eps_feas > 0.0) {
            return Err(Error::invalid(format!(
                "tolerances must be positive, got eps_stat={} eps_feas={}",
                self.eps_stat, self.eps_feas
            )));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn should_record(&self, k: u64, last: bool) -> bool {
        last || k.is_multiple_of(self.record_every)
    }

    pub(crate) fn satisfied(&self, stat: f64, feas: f64) -> bool {
        stat <= self.eps_stat && feas <= self.eps_feas
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    IterationCap,
}

/// Counters for the per-iteration certificates of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub descent_checked: u64,
    pub descent_failed: u64,
    /// Largest certificate violation seen, relative to `1 + |L_β(w_k)|`.
    pub descent_worst_relative_gap: f64,
    pub d_bound_checked: u64,
    pub d_bound_failed: u64,
    pub max_mu_norm: f64,
}

/// Outcome of a solver run.
#[derive(Debug, Clone)]
pub struct SolveResult<S> {
    pub state: S,
    pub termination: Termination,
    pub iterations: u64,
    pub stationarity: f64,
    pub feasibility: f64,
    pub objective: f64,
    pub wallclock_ns: u64,
    /// Present for P-Lagrangian runs only.
    pub certificates: Option<CertificateSummary>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> IterationRecord {
        IterationRecord {
            k: 3,
            objective: -1.5,
            stationarity: 0.1,
            feasibility: 0.0,
            lagrangian: Some(2.0),
            dual_norm_lambda: 1.0,
            dual_norm_mu: None,
            delta: None,
            d_norm: None,
            descent_ok: None,
            wallclock_ns: 12,
            tau: None,
            z_ratio: None,
        }
    }

    #[test]
    fn csv_row_has_empty_cells_for_missing_fields() {
        let row = rec().csv_row();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert_eq!(
            row,
            "3,-1.5000000000000000e0,1.0000000000000001e-1,0.0000000000000000e0,2.0000000000000000e0,1.0000000000000000e0,,,,,12"
        );
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn stopping_rule_validation() {
        assert!(StoppingRule::new(0, 1e-3, 1e-3).validate().is_err());
        assert!(StoppingRule::new(1, 0.0, 1e-3).validate().is_err());
        assert!(StoppingRule::new(1, 1e-3, 1e-3).with_record_every(0).validate().is_err());
        assert!(StoppingRule::new(1, 1e-3, 1e-3).validate().is_ok());
    }

    #[test]
    fn csv_writer_emits_header() {
        let mut w = CsvTraceWriter::new(Vec::new(), "mem").unwrap();
        w.record(&rec()).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("3,"));
    }
}
