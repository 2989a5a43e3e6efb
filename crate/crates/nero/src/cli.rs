//! Argument parsing and dispatch for the `nero` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nero_core::synth::{OodLayout, ScenarioSpec, TrainConfig};
use nero_core::{LambdaMode, NormMode, YMode};

use crate::bundle_io::read_json;
use crate::commands::*;
use crate::config::{Baselines, RunConfig};
use crate::error::{Error, Result, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "nero", version, about = "Post-hoc OOD detection from neuron-level relevance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic dataset
    Gen(GenArgs),
    /// Train the toy network on a generated dataset and export bundles
    TrainToy(TrainArgs),
    /// Fit the detector on a train bundle
    Fit(RunArgs),
    /// Score one bundle with a fitted model
    Score(RunArgs),
    /// Compare the detector with the baselines on an ID/OOD pair
    Eval(RunArgs),
    /// Detector AUROC/FPR95 over bottom-channel counts
    SweepK(RunArgs),
    /// Write the per-sample relevance matrix of a bundle
    RelevanceDump(RunArgs),
    /// Channel-wise mean relevance of ID vs OOD samples
    PlotData(RunArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scenario JSON; omitted fields take their defaults
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Place OOD blobs between ID classes
    #[arg(long)]
    pub hard: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `nero gen`
    #[arg(long)]
    pub data: PathBuf,
    /// Training JSON; omitted fields take their defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden_bias: Option<f64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Run configuration JSON; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test_id: Option<PathBuf>,
    #[arg(long)]
    pub test_ood: Option<PathBuf>,
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Subspace dimension (default: smallest z reaching --variance-fraction)
    #[arg(long)]
    pub z: Option<usize>,
    #[arg(long)]
    pub variance_fraction: Option<f64>,
    /// Bottom-channel count (default: ceil(d/2))
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated k list for sweep-k
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub y_mode: Option<YMode>,
    #[arg(long)]
    pub lambda_mode: Option<LambdaMode>,
    #[arg(long)]
    pub norm: Option<NormMode>,
    /// Comma-separated baselines to run, or "none"
    #[arg(long, value_delimiter = ',')]
    pub baselines: Option<Vec<String>>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub react_percentile: Option<f64>,
    #[arg(long)]
    pub ridge_scale: Option<f64>,
    /// Moving-average window for plot-data
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident: $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() {
            $cfg.$field = v.into();
        })*
    };
}

impl RunArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        overlay!(cfg, self: train, test_id, test_ood, bundle, model, out, z, k, ks);
        overlay!(cfg, self: variance_fraction, eps, y_mode, lambda_mode, norm, temperature,
            react_percentile, ridge_scale, window, seed);
        if let Some(names) = &self.baselines {
            cfg.baselines = Baselines::from_names(names)?;
        }
        Ok(cfg)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Json { path, source } => Error::config(format!("{}: {source}", path.display())),
        other => other,
    }
}

impl GenArgs {
    pub fn resolve(&self) -> Result<ScenarioSpec> {
        let mut spec: ScenarioSpec = match &self.spec {
            Some(p) => read_json(p).map_err(config_error)?,
            None => ScenarioSpec::default(),
        };
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if self.hard {
            spec.layout = OodLayout::Hard;
        }
        Ok(spec)
    }
}

impl TrainArgs {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut c: TrainConfig = match &self.config {
            Some(p) => read_json(p).map_err(config_error)?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.lr {
            c.learning_rate = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.hidden_bias {
            c.hidden_bias = v;
        }
        if let Some(v) = self.init_scale {
            c.init_scale = v;
        }
        Ok(c)
    }
}

/// Runs one parsed command and returns its summary line.
pub fn run(command: &Command) -> Result<String> {
    Ok(match command {
        Command::Gen(a) => {
            let spec = a.resolve()?;
            let ds = cmd_gen(&spec, &a.out)?;
            format!(
                "gen: {} train, {} test, {} ood samples in {}",
                ds.train_inputs.rows(),
                ds.test_inputs.rows(),
                ds.ood_inputs.rows(),
                a.out.display()
            )
        }
        Command::TrainToy(a) => {
            let s = cmd_train_toy(&a.data, &a.resolve()?, &a.out)?;
            format!(
                "train-toy: loss {:.4} -> {:.4}, train acc {:.4}, test acc {:.4}",
                s.initial_loss, s.final_loss, s.train_accuracy, s.test_accuracy
            )
        }
        Command::Fit(a) => {
            let m = cmd_fit(&a.resolve()?)?;
            format!(
                "fit: z={} k={} lambda={:.6} skipped={}",
                m.z(),
                m.k,
                m.lambda,
                m.stats.skipped_pairs
            )
        }
        Command::Score(a) => format!("score: {} samples", cmd_score(&a.resolve()?)?.len()),
        Command::Eval(a) => {
            let reports = cmd_eval(&a.resolve()?)?;
            let mut s = String::from("method          auroc    fpr95");
            for r in reports {
                s.push_str(&format!("\n{:<14} {:>7.4} {:>8.4}", r.method_name, r.auroc, r.fpr95));
            }
            s
        }
        Command::SweepK(a) => {
            let rows = cmd_sweep_k(&a.resolve()?)?;
            let mut s = String::from("k     auroc    fpr95");
            for r in rows {
                s.push_str(&format!("\n{:<4} {:>7.4} {:>8.4}", r.k, r.auroc, r.fpr95));
            }
            s
        }
        Command::RelevanceDump(a) => {
            let b = cmd_relevance_dump(&a.resolve()?)?;
            format!(
                "relevance-dump: {} samples, {} skipped (sample, class) pairs",
                b.bias.len(),
                b.skipped_pairs
            )
        }
        Command::PlotData(a) => format!("plot-data: {} channels", cmd_plot_data(&a.resolve()?)?.len()),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                msg.push_str(&format!("\n  caused by: {s}"));
                source = s.source();
            }
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}
