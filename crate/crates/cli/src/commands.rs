use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use simmoe::inference::fit_observed;
use simmoe::metrics::{evaluate_fitted, DensityGrid, EvalConfig, GridAxis, EVAL_SEED};
use simmoe::model::{default_hyperparameters, FitConfig};
use simmoe::predict::{GaussianMixture, PosteriorDraws};
use simmoe::rng::stream;
use simmoe::synth::{generate, SynthKind};

use crate::config::FitSettings;
use crate::data::{eta_sidecar, fmt_real, read_dataset, read_inputs, write_dataset, write_eta};
use crate::error::{CliError, Result};
use crate::model_file::{MatrixRecord, ModelFile};

#[derive(Debug, Parser)]
#[command(name = "simmoe", version, about = "Similarity-based Bayesian mixture-of-experts regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic benchmark dataset.
    Generate(GenerateArgs),
    /// Fit a model to a CSV dataset.
    Fit(FitArgs),
    /// Write the predictive mixture at each query input.
    Predict(PredictArgs),
    /// Score a model against a synthetic generator on held-out contexts.
    Evaluate(EvaluateArgs),
}

fn parse_kind(s: &str) -> std::result::Result<SynthKind, String> {
    s.parse().map_err(|e: simmoe::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// `oned` or `twod`.
    #[arg(long, value_parser = parse_kind)]
    pub which: SynthKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub experts: usize,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `stochastic` or `closed_projected`.
    #[arg(long)]
    pub gate_mode: Option<String>,
    #[arg(long)]
    pub gate_subiterations: Option<usize>,
    #[arg(long)]
    pub gate_mc_samples: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// JSON file of fit settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// The training data the model was fitted to.
    #[arg(long)]
    pub data: PathBuf,
    /// CSV with columns `x1..xDx`.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Expert posterior draws; defaults to the model's setting.
    #[arg(long)]
    pub ke: Option<usize>,
    /// Gate posterior draws; defaults to the model's setting.
    #[arg(long)]
    pub kg: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each predictive density on a grid with this many cells per axis.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_parser = parse_kind)]
    pub which: SynthKind,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub contexts: usize,
    /// Cells per axis; 512 for `oned` and 128 for `twod` by default.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Draws from the true conditional per context.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed of the held-out contexts and the Monte Carlo draws.
    #[arg(long, default_value_t = EVAL_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub ke: Option<usize>,
    #[arg(long)]
    pub kg: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate_cmd(&a, stdout),
        Command::Fit(a) => fit_cmd(&a, stdout),
        Command::Predict(a) => predict_cmd(&a, stdout),
        Command::Evaluate(a) => evaluate_cmd(&a, stdout),
    }
}

fn say(stdout: &mut dyn Write, text: std::fmt::Arguments) -> Result<()> {
    writeln!(stdout, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

pub fn generate_cmd(a: &GenerateArgs, stdout: &mut dyn Write) -> Result<()> {
    let synth = generate(a.which, a.n, a.seed)?;
    write_dataset(&a.out, &synth.data)?;
    if a.which == SynthKind::TwoD {
        let eta: Vec<[f64; 2]> =
            synth.contexts.iter().map(|c| c.eta.expect("twod contexts carry their latent")).collect();
        let side = eta_sidecar(&a.out);
        write_eta(&side, &eta)?;
        say(stdout, format_args!("wrote {} rows to {} and {}", a.n, a.out.display(), side.display()))
    } else {
        say(stdout, format_args!("wrote {} rows to {}", a.n, a.out.display()))
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve_fit_config(a: &FitArgs) -> Result<FitConfig> {
    let file = match &a.config {
        Some(p) => FitSettings::load(p)?,
        None => FitSettings::default(),
    };
    let flags = FitSettings {
        iterations: a.iterations,
        seed: a.seed,
        gate_mode: a.gate_mode.clone(),
        gate_subiterations: a.gate_subiterations,
        gate_mc_samples: a.gate_mc_samples,
        adam_learning_rate: a.learning_rate,
        ..FitSettings::default()
    };
    file.overridden_by(&flags).apply(&FitConfig::default())
}

pub fn fit_cmd(a: &FitArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = resolve_fit_config(a)?;
    let data = read_dataset(&a.data)?;
    let defaults = default_hyperparameters(&data, a.experts)?;
    for w in &defaults.warnings {
        log::warn!("{w}");
    }
    let hp = defaults.hyperparameters;
    let init = simmoe::model::init_state(&data, &hp, config.seed)?;
    let mut failed_write = None;
    let (state, trace) = fit_observed(&data, &hp, &config, init, |r| {
        let line = format!("iteration {} elbo {} gate_objective {}", r.iteration, fmt_real(r.elbo), fmt_real(r.gate_objective));
        if let Err(e) = writeln!(stdout, "{line}") {
            failed_write.get_or_insert(e);
        }
    })?;
    if let Some(e) = failed_write {
        return Err(CliError::io(Path::new("<stdout>"), e));
    }
    ModelFile::new(&data, &hp, &state, &config, &trace).save(&a.out)
}

#[derive(Debug, Serialize)]
struct PredictionRecord {
    input: Vec<f64>,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<MatrixRecord>,
}

#[derive(Debug, Serialize)]
struct PredictionFile {
    ke: usize,
    kg: usize,
    seed: u64,
    predictions: Vec<PredictionRecord>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Path of the density grid of query `i`.
pub fn grid_path(out: &Path, i: usize) -> PathBuf {
    out.with_extension(format!("grid{i}.csv"))
}

/// Box of ±6 marginal standard deviations around the mixture mean.
fn grid_axes(m: &GaussianMixture, cells: usize) -> Result<Vec<GridAxis>> {
    let mean = m.mean();
    (0..mean.len())
        .map(|j| {
            let second: f64 = (0..m.len())
                .map(|k| m.weights()[k] * (m.covariances()[k][(j, j)] + (m.means()[k][j] - mean[j]).powi(2)))
                .sum();
            let sd = second.sqrt();
            Ok(GridAxis::covering(mean[j] - 6.0 * sd, mean[j] + 6.0 * sd, cells)?)
        })
        .collect()
}

pub fn predict_cmd(a: &PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let data = read_dataset(&a.data)?;
    let state = model.state(&data)?;
    let ke = a.ke.or(model.fit.config.predictive_ke).unwrap_or(FitConfig::default().predictive_ke);
    let kg = a.kg.or(model.fit.config.predictive_kg).unwrap_or(FitConfig::default().predictive_kg);
    let inputs = read_inputs(&a.inputs, data.dx())?;
    let draws = PosteriorDraws::new(&data, &state, ke, kg, &mut stream(a.seed, 0))?;
    let mut predictions = Vec::with_capacity(inputs.len());
    for (i, x) in inputs.iter().enumerate() {
        let m = draws.predictive(x, &data)?;
        if let Some(cells) = a.grid {
            let grid = DensityGrid::from_mixture(grid_axes(&m, cells)?, &m)?;
            let path = grid_path(&a.out, i);
            let mut w = create(&path)?;
            grid.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
        }
        predictions.push(PredictionRecord {
            input: x.clone(),
            weights: m.weights().to_vec(),
            means: m.means().to_vec(),
            covariances: m.covariances().iter().map(MatrixRecord::of).collect(),
        });
    }
    let file = PredictionFile { ke, kg, seed: a.seed, predictions };
    let mut w = create(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &file).map_err(|e| CliError::io(&a.out, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(&a.out, e))?;
    say(stdout, format_args!("wrote {} predictive mixtures to {}", inputs.len(), a.out.display()))
}

pub fn evaluate_cmd(a: &EvaluateArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let data = read_dataset(&a.data)?;
    let state = model.state(&data)?;
    if data.dx() != a.which.dx() || data.dy() != a.which.dy() {
        return Err(simmoe::Error::DimensionMismatch(format!(
            "dataset is {}→{}, the {:?} generator is {}→{}",
            data.dx(),
            data.dy(),
            a.which,
            a.which.dx(),
            a.which.dy()
        ))
        .into());
    }
    let mut cfg = EvalConfig::for_kind(a.which, a.seed);
    if let Some(g) = a.grid {
        cfg.grid = g;
    }
    if let Some(s) = a.samples {
        cfg.samples = s;
    }
    let ke = a.ke.or(model.fit.config.predictive_ke).unwrap_or(FitConfig::default().predictive_ke);
    let kg = a.kg.or(model.fit.config.predictive_kg).unwrap_or(FitConfig::default().predictive_kg);
    let bench = evaluate_fitted(a.which, &data, &state, a.contexts, &cfg, ke, kg)?;

    let mut w = create(&a.out)?;
    let io = |e| CliError::io(&a.out, e);
    writeln!(w, "context_id,kl,hellinger,tv").map_err(io)?;
    for (i, m) in bench.metrics.iter().enumerate() {
        writeln!(w, "{i},{},{},{}", fmt_real(m.kl), fmt_real(m.hellinger), fmt_real(m.tv)).map_err(io)?;
    }
    let mean = bench.mean();
    writeln!(w, "mean,{},{},{}", fmt_real(mean.kl), fmt_real(mean.hellinger), fmt_real(mean.tv)).map_err(io)?;
    w.flush().map_err(io)?;
    say(
        stdout,
        format_args!("mean KL {:.4e}, Hellinger {:.4e}, TV {:.4e} over {} contexts", mean.kl, mean.hellinger, mean.tv, a.contexts),
    )
}
