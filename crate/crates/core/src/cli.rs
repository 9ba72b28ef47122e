//! Command-line front end: `quantize`, `eval` and `theory`.
//!
//! Exit codes: 0 success, 1 a theory check failed, 2 invalid input or
//! configuration, 3 degenerate alphabet.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{load_data, load_model, read_labels, save_model, write_json, write_records_csv};
use crate::lab::{run_experiment, Experiment, ExperimentConfig};
use crate::network::{forward, output_relative_error, quantize_network, top_k_accuracy, QuantizeParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gpfq", version, about = "Post-training quantization of neural network weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantize every dense and conv2d layer of a model.
    Quantize(QuantizeArgs),
    /// Accuracy of a model on labelled data, optionally against a reference.
    Eval(EvalArgs),
    /// Run a seeded synthetic experiment and its pass/fail checks.
    Theory(TheoryArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Gpfq,
    Msq,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Calibration data archive.
    #[arg(long)]
    pub data: PathBuf,
    /// Alphabet size M.
    #[arg(long)]
    pub levels: usize,
    /// Radius multiplier: radius = C_α · median |W| per layer.
    #[arg(long = "c-alpha")]
    pub c_alpha: f64,
    /// Quantized model archive to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Recorded in the report; quantization itself uses no randomness.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "gpfq")]
    pub method: MethodArg,
    /// Omit wall-clock fields so reports are byte-identical across runs.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Whitespace-separated class indices, one per sample.
    #[arg(long)]
    pub labels: PathBuf,
    /// Model whose outputs the disagreement is measured against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long = "top-k")]
    pub top_k: Option<usize>,
    /// Metrics file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// decay, generalize, subspace, levelsets, increments or special.
    #[arg(long)]
    pub experiment: Experiment,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub m: Option<usize>,
    /// Comma-separated neuron lengths.
    #[arg(long = "n-grid", value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "alt-m")]
    pub alt_m: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "sigma-z")]
    pub sigma_z: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Comma-separated weights for the increments experiment.
    #[arg(long = "w-values", value_delimiter = ',', allow_hyphen_values = true)]
    pub w_values: Option<Vec<f64>>,
    #[arg(long = "ratio-bound")]
    pub ratio_bound: Option<f64>,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-trial records as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub no_timing: bool,
}

impl TheoryArgs {
    pub fn config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::default_for(self.experiment);
        c.seed = self.seed;
        if let Some(v) = self.m {
            c.m = v;
        }
        if let Some(v) = &self.n_grid {
            c.n_grid = v.clone();
        }
        if self.d.is_some() {
            c.d = self.d;
        }
        if self.alt_m.is_some() {
            c.alt_m = self.alt_m;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if self.sigma.is_some() {
            c.sigma = self.sigma;
        }
        if self.sigma_z.is_some() {
            c.sigma_z = self.sigma_z;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if self.samples.is_some() {
            c.samples = self.samples;
        }
        if let Some(v) = self.levels {
            c.levels = v;
        }
        if let Some(v) = self.radius {
            c.radius = v;
        }
        if let Some(v) = &self.w_values {
            c.w_values = v.clone();
        }
        if self.ratio_bound.is_some() {
            c.ratio_bound = self.ratio_bound;
        }
        c
    }
}

#[derive(Debug, Serialize)]
pub struct TopK {
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub model: String,
    pub samples: usize,
    pub top1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<TopK>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    /// `‖Φ_ref(X) − Φ(X)‖_F / ‖Φ_ref(X)‖_F` over final-layer outputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_disagreement: Option<f64>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DegenerateAlphabet { .. } => EXIT_DEGENERATE,
        _ => EXIT_INVALID,
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn quantize(args: &QuantizeArgs) -> Result<i32> {
    let model = load_model(&args.model)?;
    let batch = load_data(&args.data)?;
    let params = match args.method {
        MethodArg::Gpfq => QuantizeParams::gpfq(args.levels, args.c_alpha),
        MethodArg::Msq => QuantizeParams::msq(args.levels, args.c_alpha),
    };
    let (quantized, mut report) = with_threads(args.threads, || quantize_network(&model, &batch, &params))?;
    report.seed = args.seed;
    if args.no_timing {
        report = report.without_timing();
    }
    save_model(&args.out, &quantized)?;
    write_json(&args.report, &report)?;
    eprintln!(
        "quantized {} layers, output relative error {:.6}",
        report.layers.len(),
        report.output_relative_error
    );
    Ok(EXIT_OK)
}

fn eval(args: &EvalArgs) -> Result<i32> {
    let model = load_model(&args.model)?;
    let batch = load_data(&args.data)?;
    let labels = read_labels(&args.labels)?;
    if labels.len() != batch.samples() {
        return Err(Error::DimensionMismatch {
            context: "label count",
            expected: batch.samples(),
            found: labels.len(),
        });
    }
    let reference = args.reference.as_ref().map(load_model).transpose()?;
    let report = with_threads(args.threads, || {
        let out = forward(&model, &batch, None)?;
        let top1 = top_k_accuracy(out.data.view(), &labels, 1)?;
        let top_k = args
            .top_k
            .map(|k| top_k_accuracy(out.data.view(), &labels, k).map(|accuracy| TopK { k, accuracy }))
            .transpose()?;
        let relative_disagreement = reference
            .as_ref()
            .map(|r| output_relative_error(r, &model, &batch))
            .transpose()?;
        Ok(EvalReport {
            schema_version: 1,
            model: model.name.clone(),
            samples: batch.samples(),
            top1,
            top_k,
            reference: reference.as_ref().map(|r| r.name.clone()),
            relative_disagreement,
        })
    })?;
    match &args.out {
        Some(p) => write_json(p, &report)?,
        None => print_json(&report)?,
    }
    Ok(EXIT_OK)
}

fn theory(args: &TheoryArgs) -> Result<i32> {
    let cfg = args.config();
    cfg.validate()?;
    let mut report = with_threads(args.threads, || run_experiment(&cfg))?;
    if args.no_timing {
        report = report.without_timing();
    }
    for c in &report.checks {
        eprintln!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(p) = &args.csv {
        write_records_csv(p, &report)?;
    }
    match &args.out {
        Some(p) => write_json(p, &report)?,
        None => print_json(&report)?,
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Quantize(a) => quantize(a),
        Command::Eval(a) => eval(a),
        Command::Theory(a) => theory(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}
