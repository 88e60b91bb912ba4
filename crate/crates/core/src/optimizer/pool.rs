use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mean_var;
use crate::seq_model::Sequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub sequence: Sequence,
    pub y: f64,
    /// `(y - start_mean) / start_std`.
    pub y_norm: f64,
}

/// Measured sequences with a normalization frozen at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPool {
    entries: Vec<Measurement>,
    seen: HashSet<Sequence>,
    start_mean: f64,
    start_std: f64,
}

impl MeasurementPool {
    /// Builds a pool from raw measurements. Later duplicates of a sequence are
    /// dropped; the normalization uses the deduplicated initial values, with a
    /// unit scale when they have no spread.
    pub fn new(raw: Vec<(Sequence, f64)>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if raw.iter().any(|(_, y)| !y.is_finite()) {
            return Err(Error::MalformedInput("measurements must be finite".into()));
        }
        let mut seen = HashSet::new();
        let kept: Vec<(Sequence, f64)> = raw
            .into_iter()
            .filter(|(s, _)| seen.insert(s.clone()))
            .collect();
        let ys: Vec<f64> = kept.iter().map(|(_, y)| *y).collect();
        let (start_mean, var) = mean_var(&ys);
        let start_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let entries = kept
            .into_iter()
            .map(|(sequence, y)| Measurement {
                sequence,
                y,
                y_norm: (y - start_mean) / start_std,
            })
            .collect();
        Ok(MeasurementPool {
            entries,
            seen,
            start_mean,
            start_std,
        })
    }

    pub fn start_mean(&self) -> f64 {
        self.start_mean
    }

    pub fn start_std(&self) -> f64 {
        self.start_std
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.start_mean) / self.start_std
    }

    /// Adds a measurement under the frozen transform. Returns `false` and
    /// leaves the pool unchanged if the sequence was already measured.
    pub fn add(&mut self, sequence: Sequence, y: f64) -> Result<bool> {
        if !y.is_finite() {
            return Err(Error::MalformedInput("measurements must be finite".into()));
        }
        if !self.seen.insert(sequence.clone()) {
            return Ok(false);
        }
        self.entries.push(Measurement {
            sequence,
            y,
            y_norm: self.normalize(y),
        });
        Ok(true)
    }

    pub fn contains(&self, x: &Sequence) -> bool {
        self.seen.contains(x)
    }

    pub fn entries(&self) -> &[Measurement] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices of the `k` highest `y_norm` entries, earlier entries first on ties.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| self.entries[b].y_norm.total_cmp(&self.entries[a].y_norm));
        idx.truncate(k);
        idx
    }

    pub fn best_y(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.y)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
