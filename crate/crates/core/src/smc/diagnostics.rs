use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Weights and likelihoods of every particle at one resampling check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub member: usize,
    /// Letter index within the member, or `None` for the end-of-member check.
    pub letter: Option<usize>,
    /// ESS before any resampling at this check.
    pub ess: f64,
    pub resampled: bool,
    /// Log-weights before resampling.
    pub log_weights: Vec<f64>,
    pub log_liks: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SmcDiagnostics {
    pub trace: Vec<TraceRow>,
    pub resample_events: usize,
    /// Per member, per particle log of `p(Y|F) / p(Y|F~)` applied at the member's end.
    pub correction_log_multipliers: Vec<Vec<f64>>,
    /// Members cut at the letter cap.
    pub truncations: usize,
    /// `log p(Y | F^M)` of the returned clone.
    pub final_log_lik: f64,
}

impl SmcDiagnostics {
    pub fn min_ess(&self) -> Option<f64> {
        self.trace.iter().map(|r| r.ess).reduce(f64::min)
    }
}

/// Writes one CSV row per (check, particle).
pub fn write_trace_csv<W: Write>(diag: &SmcDiagnostics, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "member",
        "letter",
        "particle",
        "ess",
        "resampled",
        "log_weight",
        "log_lik",
    ])?;
    for row in &diag.trace {
        let letter = row
            .letter
            .map_or_else(|| "end".to_string(), |l| l.to_string());
        for (d, (lw, ll)) in row.log_weights.iter().zip(&row.log_liks).enumerate() {
            w.write_record([
                row.member.to_string(),
                letter.clone(),
                d.to_string(),
                row.ess.to_string(),
                row.resampled.to_string(),
                lw.to_string(),
                ll.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
