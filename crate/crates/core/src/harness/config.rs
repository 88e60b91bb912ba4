use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{BoConfig, Method};
use crate::seq_model::{Alphabet, CloneLm, CloneModel, ConjugateModel, ConjugateModelParams};

/// Which clone model the optimizer uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Dirichlet-categorical model with a shared symmetric concentration, or
    /// explicit per-position concentrations.
    ExactConjugate {
        length: usize,
        #[serde(default)]
        concentration: Option<f64>,
        #[serde(default)]
        alpha: Option<Vec<Vec<f64>>>,
    },
    /// A model file written by `fit-model`, relative to the config file.
    File { path: PathBuf },
}

/// The objective being optimized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleSpec {
    /// `f(X) = log p(X | latent)` with a fresh latent per replicate drawn from
    /// `prior`, or from the conjugate model's own prior when absent.
    Latent {
        #[serde(default)]
        prior: Option<ConjugateModelParams>,
    },
    /// Values looked up in a `sequence,y` CSV.
    Table { path: PathBuf },
}

/// Where the starting measurements come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialPoolSpec {
    /// `size` draws from the replicate's hidden latent, measured by the oracle.
    LatentSample { size: usize },
    /// A `sequence,y` CSV.
    File { path: PathBuf },
}

impl Default for InitialPoolSpec {
    fn default() -> Self {
        InitialPoolSpec::LatentSample { size: 1 }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::CloneBo, Method::Greedy, Method::Genetic]
}

fn default_replicates() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alphabet: Alphabet,
    pub model: ModelSpec,
    pub oracle: OracleSpec,
    #[serde(default)]
    pub initial_pool: InitialPoolSpec,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Master seed; every random stream of the run is derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub bo: BoConfig,
    /// Record wall-clock times in trajectories (breaks byte reproducibility).
    #[serde(default)]
    pub record_timing: bool,
}

impl RunConfig {
    /// Parses a config; relative paths inside it resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(config_error)?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        if let ModelSpec::File { path } = &mut cfg.model {
            fix(path);
        }
        if let OracleSpec::Table { path } = &mut cfg.oracle {
            fix(path);
        }
        if let InitialPoolSpec::File { path } = &mut cfg.initial_pool {
            fix(path);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.bo.budget == 0 {
            return Err(Error::config("bo.budget", "must be at least 1"));
        }
        if let InitialPoolSpec::LatentSample { size: 0 } = self.initial_pool {
            return Err(Error::config("initial_pool.size", "must be at least 1"));
        }
        if matches!(self.oracle, OracleSpec::Table { .. })
            && matches!(self.initial_pool, InitialPoolSpec::LatentSample { .. })
        {
            return Err(Error::config(
                "initial_pool",
                "a table oracle needs an initial pool file",
            ));
        }
        self.bo.validate()
    }

    pub fn build_model(&self) -> Result<CloneModel> {
        let model = match &self.model {
            ModelSpec::ExactConjugate {
                length,
                concentration,
                alpha,
            } => {
                let params = match (concentration, alpha) {
                    (Some(c), None) => {
                        ConjugateModelParams::uniform(*length, self.alphabet.size(), *c)
                    }
                    (None, Some(a)) => ConjugateModelParams {
                        length: *length,
                        alpha: a.clone(),
                    },
                    (None, None) => {
                        ConjugateModelParams::uniform(*length, self.alphabet.size(), 1.0)
                    }
                    (Some(_), Some(_)) => {
                        return Err(Error::config(
                            "model",
                            "give either concentration or alpha, not both",
                        ))
                    }
                };
                CloneModel::ExactConjugate(
                    ConjugateModel::new(self.alphabet.clone(), params)
                        .map_err(|e| Error::config("model", e.to_string()))?,
                )
            }
            ModelSpec::File { path } => CloneModel::from_json(&std::fs::read_to_string(path)?)?,
        };
        if model.alphabet().size() != self.alphabet.size() {
            return Err(Error::config(
                "alphabet",
                format!(
                    "model alphabet has {} letters, config declares {}",
                    model.alphabet().size(),
                    self.alphabet.size()
                ),
            ));
        }
        Ok(model)
    }

    /// Dirichlet prior of the synthetic latent oracle.
    pub fn latent_prior(&self, model: &CloneModel) -> Result<ConjugateModelParams> {
        match (&self.oracle, model) {
            (OracleSpec::Latent { prior: Some(p) }, _) => {
                p.validate(&self.alphabet)
                    .map_err(|e| Error::config("oracle.prior", e.to_string()))?;
                Ok(p.clone())
            }
            (OracleSpec::Latent { prior: None }, CloneModel::ExactConjugate(m)) => {
                Ok(m.params().clone())
            }
            (OracleSpec::Latent { prior: None }, _) => Err(Error::config(
                "oracle.prior",
                "required unless the model is exact-conjugate",
            )),
            (OracleSpec::Table { .. }, _) => Err(Error::config(
                "oracle",
                "table oracles have no latent prior",
            )),
        }
    }
}

fn config_error(e: serde_json::Error) -> Error {
    Error::Config {
        key: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    }
}
