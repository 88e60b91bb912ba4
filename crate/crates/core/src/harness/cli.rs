//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::benchmark::{run_benchmark, run_replicate, write_benchmark, write_trajectory};
use super::check::{check_likelihood, format_check_csv, read_check_input};
use super::config::RunConfig;
use super::io::{
    atomic_write, format_corpus, format_sequences, guard_overwrite, read_corpus, read_pool_csv,
};
use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodParams, QuadratureSettings};
use crate::optimizer::{select_conditioning_subset, MeasurementPool, Method};
use crate::seq_model::{
    fit_markov, gen_synthetic_families, perplexity, sample_clone, Alphabet, CloneLm, CloneModel,
    ConjugateModel, ConjugateModelParams, LatentClone, Sequence,
};
use crate::smc::{sample_posterior_clone, write_trace_csv, SmcConfig};

#[derive(Debug, Parser)]
#[command(
    name = "clonebo",
    version,
    about = "Clone-informed Bayesian optimization of sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic clonal families and their hidden latents.
    GenData(GenDataArgs),
    /// Fit or construct a clone model from a corpus.
    FitModel(FitModelArgs),
    /// Sample a clone from the model prior.
    SampleClone(SampleCloneArgs),
    /// Sample a clone conditioned on measurements with twisted SMC.
    PosteriorSample(PosteriorSampleArgs),
    /// Run one optimization trajectory.
    Optimize(OptimizeArgs),
    /// Run replicated benchmarks and aggregate them.
    Benchmark(BenchmarkArgs),
    /// Compare the closed-form likelihood against numerical integration.
    CheckLikelihood(CheckLikelihoodArgs),
}

#[derive(Debug, Args)]
pub struct AlphabetArgs {
    /// Number of letters; letters are written as integer ids.
    #[arg(long, conflicts_with = "symbols")]
    pub alphabet_size: Option<usize>,
    /// One character per letter, e.g. ACDEFGHIKLMNPQRSTVWY.
    #[arg(long)]
    pub symbols: Option<String>,
}

impl AlphabetArgs {
    fn build(&self) -> Result<Alphabet> {
        match (&self.alphabet_size, &self.symbols) {
            (_, Some(s)) => Alphabet::with_symbols(s),
            (Some(n), None) => Alphabet::new(*n),
            (None, None) => Err(Error::config(
                "alphabet",
                "pass --alphabet-size or --symbols",
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub alphabet: AlphabetArgs,
    #[arg(long)]
    pub length: usize,
    /// Symmetric Dirichlet concentration of the latent prior.
    #[arg(long, default_value_t = 1.0)]
    pub concentration: f64,
    #[arg(long)]
    pub families: usize,
    /// Members per family after the seed.
    #[arg(long)]
    pub members: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelKind {
    Markov,
    ExactConjugate,
}

#[derive(Debug, Args)]
pub struct FitModelArgs {
    #[command(flatten)]
    pub alphabet: AlphabetArgs,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "markov")]
    pub kind: ModelKind,
    /// Markov order.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Markov additive smoothing.
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    /// Dirichlet concentration for the exact-conjugate kind.
    #[arg(long, default_value_t = 1.0)]
    pub concentration: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SampleCloneArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Seed sequence in the model's alphabet encoding.
    #[arg(long)]
    pub x0: String,
    #[arg(long, default_value_t = 6)]
    pub members: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Output sequence file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PosteriorSampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Measurements as a `sequence,y` CSV.
    #[arg(long)]
    pub pool: PathBuf,
    /// Seed sequence; defaults to the best measured sequence.
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub particles: usize,
    #[arg(long, default_value_t = 6)]
    pub members: usize,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long, default_value_t = 0.25)]
    pub sigma_tilde: f64,
    #[arg(long, default_value_t = 75)]
    pub n_cond_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-check SMC trace.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunOverrides {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    /// Method to run; the first configured method by default.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
    /// Trajectory CSV path; `<output_dir>/trajectory.csv` by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckLikelihoodArgs {
    /// CSV with header `f,y,sigma`; vectors are space-separated.
    #[arg(long)]
    pub input: PathBuf,
    /// Prior scale of the offset in the numerical integral.
    #[arg(long, default_value_t = 1e3)]
    pub tau: f64,
    /// Report CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_model(path: &Path) -> Result<CloneModel> {
    CloneModel::from_json(&std::fs::read_to_string(path)?)
}

fn parse_seq(alphabet: &Alphabet, text: &str, flag: &str) -> Result<Sequence> {
    alphabet
        .parse(text)
        .map_err(|(c, m)| Error::config(flag, format!("column {c}: {m}")))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => atomic_write(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

#[derive(Serialize)]
struct LatentFile<'a> {
    alphabet: &'a Alphabet,
    prior: &'a ConjugateModelParams,
    seed: u64,
    latents: &'a [LatentClone],
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let alphabet = a.alphabet.build()?;
    let corpus_path = a.out_dir.join("corpus.txt");
    let latent_path = a.out_dir.join("latents.json");
    guard_overwrite(&corpus_path, a.force)?;
    guard_overwrite(&latent_path, a.force)?;
    let prior = ConjugateModelParams::uniform(a.length, alphabet.size(), a.concentration);
    prior
        .validate(&alphabet)
        .map_err(|e| Error::config("concentration", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let corpus = gen_synthetic_families(&prior, &alphabet, a.families, a.members, &mut rng)?;
    atomic_write(
        &corpus_path,
        format_corpus(&corpus.families, &alphabet).as_bytes(),
    )?;
    let mut json = serde_json::to_string_pretty(&LatentFile {
        alphabet: &alphabet,
        prior: &prior,
        seed: a.seed,
        latents: &corpus.latents,
    })?;
    json.push('\n');
    atomic_write(&latent_path, json.as_bytes())?;
    print_json(&serde_json::json!({
        "families": corpus.families.len(),
        "corpus": corpus_path,
        "latents": latent_path,
    }))
}

fn fit_model(a: &FitModelArgs) -> Result<()> {
    guard_overwrite(&a.out, a.force)?;
    let alphabet = a.alphabet.build()?;
    let corpus = read_corpus(&a.corpus, &alphabet)?;
    if corpus.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let model = match a.kind {
        ModelKind::Markov => {
            CloneModel::Markov(fit_markov(&corpus, &alphabet, a.order, a.smoothing)?)
        }
        ModelKind::ExactConjugate => {
            let length = corpus[0].seed.len();
            let params = ConjugateModelParams::uniform(length, alphabet.size(), a.concentration);
            CloneModel::ExactConjugate(ConjugateModel::new(alphabet, params)?)
        }
    };
    let ppl = perplexity(&model, &corpus)?;
    let mut json = model.to_json()?;
    json.push('\n');
    atomic_write(&a.out, json.as_bytes())?;
    print_json(&serde_json::json!({
        "kind": model.kind_name(),
        "families": corpus.len(),
        "train_perplexity": ppl,
        "model": a.out,
    }))
}

fn sample_clone_cmd(a: &SampleCloneArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let x0 = parse_seq(model.alphabet(), &a.x0, "x0")?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let sampled = sample_clone(&model, &x0, a.members, &mut rng, a.max_len)?;
    let seqs: Vec<Sequence> = sampled.clone.sequences().cloned().collect();
    emit(a.out.as_deref(), &format_sequences(&seqs, model.alphabet()))?;
    if sampled.truncated > 0 {
        eprintln!(
            "{}",
            serde_json::json!({"warning": "truncated", "members": sampled.truncated})
        );
    }
    Ok(())
}

fn posterior_sample(a: &PosteriorSampleArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let alphabet = model.alphabet().clone();
    let pool = MeasurementPool::new(read_pool_csv(&a.pool, &alphabet)?)?;
    let x0 = match &a.x0 {
        Some(s) => parse_seq(&alphabet, s, "x0")?,
        None => pool.entries()[pool.top_k(1)[0]].sequence.clone(),
    };
    let cond = select_conditioning_subset(&model, &x0, &pool, a.n_cond_max)?;
    let config = SmcConfig {
        particles: a.particles,
        members: a.members,
        max_len: a.max_len,
        ..SmcConfig::default()
    };
    let params = LikelihoodParams {
        sigma_tilde: a.sigma_tilde,
        n_cond_max: a.n_cond_max,
        ..LikelihoodParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (clone, diag) = sample_posterior_clone(&model, &x0, &cond, &config, &params, &mut rng)?;
    let seqs: Vec<Sequence> = clone.sequences().cloned().collect();
    emit(a.out.as_deref(), &format_sequences(&seqs, &alphabet))?;
    if let Some(path) = &a.diagnostics {
        let mut buf = Vec::new();
        write_trace_csv(&diag, &mut buf)?;
        atomic_write(path, &buf)?;
    }
    Ok(())
}

fn load_run_config(o: &RunOverrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&o.config)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(b) = o.budget {
        cfg.bo.budget = b;
    }
    Ok(cfg)
}

fn optimize(a: &OptimizeArgs) -> Result<()> {
    let cfg = load_run_config(&a.run)?;
    cfg.validate()?;
    let method: Method = match &a.method {
        Some(m) => m.parse()?,
        None => cfg.methods[0],
    };
    let model = Arc::new(cfg.build_model()?);
    let result = run_replicate(&cfg, &model, &[method], a.replicate)?;
    let traj = &result.trajectories[0];
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("trajectory.csv"));
    write_trajectory(&cfg, &out, traj, a.replicate)?;
    print_json(&serde_json::json!({
        "method": method.name(),
        "steps": traj.records.len(),
        "final_best": traj.final_best(),
        "stopped": traj.stopped,
        "trajectory": out,
    }))
}

fn benchmark(a: &BenchmarkArgs) -> Result<()> {
    let mut cfg = load_run_config(&a.run)?;
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    let (results, summary) = run_benchmark(&cfg)?;
    write_benchmark(&cfg, &cfg.output_dir, &results, &summary)?;
    let finals: serde_json::Map<String, serde_json::Value> = summary
        .methods
        .iter()
        .map(|m| {
            (
                m.method.name().to_string(),
                serde_json::json!({"final_mean": m.final_mean, "final_std": m.final_std}),
            )
        })
        .collect();
    print_json(&serde_json::json!({
        "replicates": cfg.replicates,
        "output_dir": cfg.output_dir,
        "methods": finals,
    }))
}

fn check_likelihood_cmd(a: &CheckLikelihoodArgs) -> Result<()> {
    let rows = read_check_input(&a.input)?;
    let report = check_likelihood(&rows, a.tau, &QuadratureSettings::default())?;
    emit(a.out.as_deref(), &format_check_csv(&report.rows)?)?;
    if a.out.is_some() {
        print_json(&report.summary)?;
    } else {
        eprintln!("{}", serde_json::to_string(&report.summary)?);
    }
    Ok(())
}

/// Runs a parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::FitModel(a) => fit_model(a),
        Command::SampleClone(a) => sample_clone_cmd(a),
        Command::PosteriorSample(a) => posterior_sample(a),
        Command::Optimize(a) => optimize(a),
        Command::Benchmark(a) => benchmark(a),
        Command::CheckLikelihood(a) => check_likelihood_cmd(a),
    }
}

/// Process exit code for an error: 2 for bad configuration, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 2,
        _ => 1,
    }
}

/// Machine-readable error line for standard error.
pub fn error_json(err: &Error) -> String {
    let mut v = serde_json::json!({"error": err.kind(), "message": err.to_string()});
    match err {
        Error::Config { key, .. } => {
            v["key"] = serde_json::json!(key);
        }
        Error::Parse {
            path, line, column, ..
        } => {
            v["path"] = serde_json::json!(path);
            v["line"] = serde_json::json!(line);
            v["column"] = serde_json::json!(column);
        }
        _ => {}
    }
    v.to_string()
}
