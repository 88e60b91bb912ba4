use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::seq_model::{Alphabet, LatentClone, Sequence};

/// A deterministic black-box objective.
pub trait Oracle: Send + Sync {
    fn evaluate(&self, x: &Sequence) -> Result<f64>;
}

/// `f(X) = log p(X | latent)` for a hidden per-position categorical.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCloneOracle {
    pub latent: LatentClone,
}

impl LatentCloneOracle {
    pub fn new(latent: LatentClone) -> Self {
        LatentCloneOracle { latent }
    }

    pub fn optimum(&self) -> (Sequence, f64) {
        let x = self.latent.argmax();
        let f = self
            .latent
            .log_prob(&x)
            .expect("argmax has the latent's length");
        (x, f)
    }
}

impl Oracle for LatentCloneOracle {
    fn evaluate(&self, x: &Sequence) -> Result<f64> {
        self.latent.log_prob(x)
    }
}

/// Synthetic oracle entry point.
pub fn synthetic_oracle(latent: &LatentClone, x: &Sequence) -> Result<f64> {
    latent.log_prob(x)
}

/// Lookup table of measured values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableOracle {
    table: HashMap<Sequence, f64>,
}

impl TableOracle {
    pub fn new(table: HashMap<Sequence, f64>) -> Self {
        TableOracle { table }
    }

    /// Reads a headed `sequence,y` CSV.
    pub fn from_csv(path: &Path, alphabet: &Alphabet) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut table = HashMap::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let parse_err = |column: usize, message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                column,
                message,
            };
            if rec.len() != 2 {
                return Err(parse_err(
                    1,
                    format!("expected 2 fields, found {}", rec.len()),
                ));
            }
            let seq = alphabet.parse(&rec[0]).map_err(|(c, m)| parse_err(c, m))?;
            let y: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|e| parse_err(rec[0].len() + 2, format!("bad value: {e}")))?;
            table.insert(seq, y);
        }
        Ok(TableOracle { table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Oracle for TableOracle {
    fn evaluate(&self, x: &Sequence) -> Result<f64> {
        self.table
            .get(x)
            .copied()
            .ok_or_else(|| Error::MalformedInput(format!("sequence {x} not in the oracle table")))
    }
}
