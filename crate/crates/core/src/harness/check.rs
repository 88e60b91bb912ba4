//! Closed-form likelihood versus numerical integration.
//!
//! The closed form drops an additive constant that depends on `Y`, `sigma`
//! and the offset prior width, so agreement means that the offset
//! `oracle - closed_form` is the same for every `F` sharing `(Y, sigma)`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::likelihood::{
    log_marginal_likelihood, numeric_integration_oracle, LikelihoodParams, QuadratureSettings,
};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub f: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub row: usize,
    /// Index of the `(Y, sigma)` group, in order of first appearance.
    pub group: usize,
    pub closed_form: f64,
    pub oracle: f64,
    pub offset: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub rows: usize,
    pub groups: usize,
    /// Largest `max - min` of the offset within a group.
    pub max_offset_spread: f64,
    pub all_converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub rows: Vec<CheckResult>,
    pub summary: CheckSummary,
}

fn parse_vector(field: &str, path: &Path, line: usize, column: usize) -> Result<Vec<f64>> {
    field
        .split_whitespace()
        .map(|w| {
            w.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                column,
                message: format!("cannot parse number {w:?}"),
            })
        })
        .collect()
}

/// Reads a CSV with header `f,y,sigma`, vectors space-separated.
pub fn read_check_input(path: &Path) -> Result<Vec<CheckRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec?;
        let err = |column: usize, message: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: message.to_string(),
        };
        if i == 0 {
            if rec.iter().ne(["f", "y", "sigma"]) {
                return Err(err(1, "expected header `f,y,sigma`"));
            }
            continue;
        }
        if rec.len() != 3 {
            return Err(err(1, "expected 3 fields"));
        }
        let col_y = rec[0].chars().count() + 2;
        let col_s = col_y + rec[1].chars().count() + 1;
        let f = parse_vector(&rec[0], path, line, 1)?;
        let y = parse_vector(&rec[1], path, line, col_y)?;
        let sigma: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| err(col_s, "cannot parse sigma"))?;
        out.push(CheckRow { f, y, sigma });
    }
    Ok(out)
}

pub fn check_likelihood(
    rows: &[CheckRow],
    tau: f64,
    settings: &QuadratureSettings,
) -> Result<CheckReport> {
    let mut keys: Vec<(Vec<u64>, u64)> = Vec::new();
    let mut results = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let key = (r.y.iter().map(|v| v.to_bits()).collect(), r.sigma.to_bits());
        let group = match keys.iter().position(|k| *k == key) {
            Some(g) => g,
            None => {
                keys.push(key);
                keys.len() - 1
            }
        };
        let closed = log_marginal_likelihood(&r.f, &r.y, &LikelihoodParams::with_sigma(r.sigma))?;
        let oracle = numeric_integration_oracle(&r.f, &r.y, r.sigma, tau, settings)?;
        results.push(CheckResult {
            row: i,
            group,
            closed_form: closed,
            oracle: oracle.log_value,
            offset: oracle.log_value - closed,
            converged: oracle.converged,
        });
    }
    let mut spread: f64 = 0.0;
    for g in 0..keys.len() {
        let offs: Vec<f64> = results
            .iter()
            .filter(|r| r.group == g)
            .map(|r| r.offset)
            .collect();
        let hi = offs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = offs.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max(hi - lo);
    }
    let summary = CheckSummary {
        rows: results.len(),
        groups: keys.len(),
        max_offset_spread: spread,
        all_converged: results.iter().all(|r| r.converged),
    };
    Ok(CheckReport {
        rows: results,
        summary,
    })
}

pub fn format_check_csv(rows: &[CheckResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
