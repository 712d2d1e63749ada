//! Command-line driver.
//!
//! Every subcommand takes one JSON experiment config, applies the flag
//! overrides, validates the result and writes its outputs to the config's
//! output directory. Exit codes: 0 success, 1 runtime failure, 2 bad
//! configuration or arguments.

mod commands;
mod config;

pub use config::{
    DataConfig, ExperimentConfig, GenerateConfig, GradcheckConfig, SampleConfig, SyntheticTask,
    TaskConfig,
};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::inference::NegPhase;
use crate::learning::Prior;

#[derive(Debug, Parser)]
#[command(name = "dynef", version, about = "Train, sample and evaluate discrete time-series models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum-likelihood training.
    TrainMl(RunArgs),
    /// Langevin posterior sampling.
    TrainBayes(RunArgs),
    /// Sample sequences from a checkpoint (or the initial parameters).
    Sample(RunArgs),
    /// Task accuracy or held-out log-likelihood of a checkpoint.
    Eval(RunArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(RunArgs),
    /// Write the spike-train encoding of a task dataset.
    Encode(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment config (JSON).
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// uniform, gaussian or gmm.
    #[arg(long)]
    pub prior: Option<String>,
    /// Comma-separated mixture means.
    #[arg(long, allow_hyphen_values = true)]
    pub gmm_means: Option<String>,
    #[arg(long)]
    pub gmm_std: Option<f64>,
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
    #[arg(long)]
    pub gibbs_samples: Option<usize>,
    #[arg(long)]
    pub gibbs_burnin: Option<usize>,
    /// exact, gibbs or auto.
    #[arg(long)]
    pub neg_phase: Option<String>,
    /// Encoding length in task mode and sample length.
    #[arg(long)]
    pub t_len: Option<usize>,
    /// Rotation range in degrees, `low,high`.
    #[arg(long, allow_hyphen_values = true)]
    pub rotation_range: Option<String>,
    /// Drop all lateral edges.
    #[arg(long)]
    pub no_lateral: bool,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{what}: `{v}`: {e}")))
        })
        .collect()
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), Error> {
        if let Some(v) = self.lr {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.snapshot_stride {
            cfg.train.snapshot_stride = v;
        }
        if let Some(v) = self.gibbs_samples {
            cfg.train.gibbs.n_samples = v;
        }
        if let Some(v) = self.gibbs_burnin {
            cfg.train.gibbs.burn_in = v;
        }
        if let Some(v) = &self.neg_phase {
            cfg.train.neg_phase = v.parse::<NegPhase>()?;
        }
        let means = self.gmm_means.as_deref().map(|s| parse_floats(s, "--gmm-means")).transpose()?;
        match self.prior.as_deref() {
            None => {}
            Some("uniform") => cfg.train.prior = Prior::Uniform,
            Some("gaussian") => {
                cfg.train.prior = Prior::Gaussian {
                    mean: means.as_ref().and_then(|m| m.first().copied()).unwrap_or(0.0),
                    std: self.gmm_std.unwrap_or(1.0),
                }
            }
            Some("gmm") => {
                cfg.train.prior = Prior::gmm(
                    means.clone().unwrap_or_else(|| vec![0.0, -1.0]),
                    self.gmm_std.unwrap_or(0.15),
                )
            }
            Some(other) => return Err(Error::Config(format!("unknown prior `{other}`"))),
        }
        if self.prior.is_none() && (means.is_some() || self.gmm_std.is_some()) {
            match &mut cfg.train.prior {
                Prior::GaussianMixture { means: m, std, weights } => {
                    if let Some(new) = means {
                        if new.len() != m.len() {
                            weights.clear();
                        }
                        *m = new;
                    }
                    if let Some(s) = self.gmm_std {
                        *std = s;
                    }
                }
                _ => return Err(Error::Config("--gmm-means/--gmm-std need a mixture prior".into())),
            }
        }
        if let Some(t) = self.t_len {
            cfg.sample.t_len = t;
            if let Some(task) = &mut cfg.task {
                task.t_len = t;
            }
        }
        if let Some(r) = &self.rotation_range {
            let v = parse_floats(r, "--rotation-range")?;
            let task = cfg
                .task
                .as_mut()
                .ok_or_else(|| Error::Config("--rotation-range needs a task config".into()))?;
            match v[..] {
                [lo, hi] => task.rotation_range = [lo, hi],
                _ => return Err(Error::Config("--rotation-range takes `low,high`".into())),
            }
        }
        if self.no_lateral {
            if let Some(task) = &mut cfg.task {
                task.lateral = false;
            }
            if let Some(g) = &mut cfg.graphs {
                g.lateral.clear();
            }
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.train.seed = cfg.seed;
        Ok(())
    }
}

/// A failed run and its exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn config(e: Error) -> Self {
        Failure::Config(e.to_string())
    }

    fn runtime(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("DYNEF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("DYNEF_THREADS must be a positive integer, got `{v}`")))?;
    // a second initialisation in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Load, override and validate a config.
pub fn prepare(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(Failure::config)?;
    args.overrides.apply(&mut cfg).map_err(Failure::config)?;
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let (name, args) = match &cli.command {
        Command::TrainMl(a) => ("train-ml", a),
        Command::TrainBayes(a) => ("train-bayes", a),
        Command::Sample(a) => ("sample", a),
        Command::Eval(a) => ("eval", a),
        Command::Gradcheck(a) => ("gradcheck", a),
        Command::Encode(a) => ("encode", a),
    };
    let cfg = prepare(args)?;
    let checkpoint = args.overrides.checkpoint.as_deref();
    let run = commands::Run::new(name, cfg).map_err(Failure::runtime)?;
    match cli.command {
        Command::TrainMl(_) => run.train_ml(),
        Command::TrainBayes(_) => run.train_bayes(),
        Command::Sample(_) => run.sample(checkpoint),
        Command::Eval(_) => run.eval(checkpoint),
        Command::Gradcheck(_) => run.gradcheck(checkpoint),
        Command::Encode(_) => run.encode(),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.code()
        }
    }
}
