//! The `bayeserr` command-line interface.

pub mod commands;
pub mod io;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{BiasBoundReport, BoundParameters};
use crate::calibration::PairedEstimator;
use crate::error::{Error, Result};
use crate::estimator::estimate_bayes_error;
use crate::evaluation::{BootstrapOptions, CiMethod};
use crate::rng::Seed;
use crate::synthdata::{CorruptionSpec, GaussianMixtureSpec, PosteriorModel};

use commands::EstimateMethod;
use io::{Dataset, FileDigest, Format};

pub const SCHEMA_VERSION: &str = "bayeserr-report/1";

#[derive(Debug, Parser)]
#[command(
    name = "bayeserr",
    version,
    about = "Bayes error estimation from soft labels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the Bayes error of a dataset file.
    Estimate(EstimateArgs),
    /// Evaluate bias and consistency bounds.
    BiasBound(BiasBoundArgs),
    /// Generate synthetic soft-label, count and paired files.
    Gen(GenArgs),
    /// Measure the bias of hard-label averaging across label counts.
    SimulateBias(SimulateBiasArgs),
    /// Score estimators with the FeeBee noise-injection protocol.
    Feebee(FeebeeArgs),
    /// Track estimates while the corruption progressively breaks the order.
    OrderBreak(OrderBreakArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report (for `gen`: the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compact single-line JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CiArgs {
    /// Attach a bootstrap interval (default method: bca).
    #[arg(long, num_args = 0..=1, default_missing_value = "bca")]
    pub ci: Option<CiMethod>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Inferred from the header when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Comma-separated; defaults to clean, hard or isotonic by format.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    /// Bin count for the plain `hist` method.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub ci: CiArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BiasBoundArgs {
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub m: Option<u64>,
    /// Upper bound on the Bayes error.
    #[arg(long = "E")]
    #[serde(rename = "E")]
    pub e: Option<f64>,
    /// Margin: every posterior is at least this far from 1/2.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Soft-label file for the sample-average bound.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct DistArgs {
    /// gauss-mix, label-flip, or a preset: benchmark, a, b, c.
    #[arg(long, default_value = "gauss-mix")]
    pub dist: String,
    /// Weight of the positive component (gauss-mix, default 0.4).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Negative-class mean, comma-separated (default 0,0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu0: Option<Vec<f64>>,
    /// Positive-class mean, comma-separated (default 2,2).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu1: Option<Vec<f64>>,
    /// Flip rate (label-flip, default 0.1).
    #[arg(long)]
    pub nu: Option<f64>,
}

impl DistArgs {
    pub fn model(&self) -> Result<PosteriorModel> {
        let mixture_flags = self.theta.is_some() || self.mu0.is_some() || self.mu1.is_some();
        let model = match self.dist.as_str() {
            "gauss-mix" => {
                if self.nu.is_some() {
                    return Err(Error::Usage("--nu applies to label-flip only".into()));
                }
                PosteriorModel::GaussianMixture(
                    GaussianMixtureSpec::new(
                        self.theta.unwrap_or(0.4),
                        self.mu0.clone().unwrap_or_else(|| vec![0.0, 0.0]),
                        self.mu1.clone().unwrap_or_else(|| vec![2.0, 2.0]),
                        1.0,
                    )
                    .map_err(usage)?,
                )
            }
            "label-flip" => {
                if mixture_flags {
                    return Err(Error::Usage(
                        "--theta/--mu0/--mu1 apply to gauss-mix only".into(),
                    ));
                }
                PosteriorModel::LabelFlip {
                    nu: self.nu.unwrap_or(0.1),
                }
            }
            name => {
                let preset = PosteriorModel::preset(name).ok_or_else(|| {
                    Error::Usage(format!(
                        "unknown --dist '{name}'; expected gauss-mix, label-flip, benchmark, a, b or c"
                    ))
                })?;
                if mixture_flags || self.nu.is_some() {
                    return Err(Error::Usage(format!(
                        "preset '{name}' fixes its parameters; use gauss-mix or label-flip to set them"
                    )));
                }
                preset
            }
        };
        model.validate().map_err(usage)?;
        Ok(model)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dist: DistArgs,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Hard labels per instance.
    #[arg(long)]
    pub m: Option<u64>,
    /// none, beta or logit-gaussian.
    #[arg(long, default_value = "none")]
    pub corruption: String,
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.7)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateBiasArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dist: DistArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "10,25,50,100,250,500,1000"
    )]
    pub m_list: Vec<u64>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub repeats: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct FeebeeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "corrupted,isotonic")]
    pub method: Vec<String>,
    /// Bin count for the plain `hist` method.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Upper bound on the clean Bayes error.
    #[arg(long = "E")]
    #[serde(rename = "E")]
    pub e: f64,
    /// Number of noise-grid intervals.
    #[arg(long = "N", default_value_t = 100)]
    #[serde(rename = "N")]
    pub n_grid: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct OrderBreakArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dist: DistArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.25,0.5,1,2")]
    pub sigma_list: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.7)]
    pub b: f64,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "isotonic")]
    pub method: Vec<String>,
    /// Bin count for the plain `hist` method.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

fn usage(e: Error) -> Error {
    match e {
        Error::Usage(_) => e,
        other => Error::Usage(other.to_string()),
    }
}

/// Top-level JSON document printed by every command.
#[derive(Debug, Serialize)]
pub struct RunReport<T: Serialize> {
    pub schema: &'static str,
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub results: T,
}

fn emit<T: Serialize, P: Serialize>(
    command: &'static str,
    params: &P,
    output: &OutputArgs,
    inputs: Vec<FileDigest>,
    results: T,
    write_out: bool,
) -> Result<String> {
    let report = RunReport {
        schema: SCHEMA_VERSION,
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: output.seed,
        parameters: serde_json::to_value(params)?,
        inputs,
        results,
    };
    let mut text = if output.json {
        serde_json::to_string(&report)?
    } else {
        serde_json::to_string_pretty(&report)?
    };
    text.push('\n');
    if write_out {
        if let Some(path) = &output.out {
            io::write_files_atomically(&[(path.clone(), text.clone().into_bytes())])?;
        }
    }
    Ok(text)
}

fn bootstrap_options(args: &CiArgs, seed: u64) -> Result<Option<BootstrapOptions>> {
    let Some(method) = args.ci else {
        return Ok(None);
    };
    if args.resamples < 100 {
        return Err(Error::Usage(format!(
            "--resamples must be at least 100, got {}",
            args.resamples
        )));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Error::Usage(format!(
            "--level {} not in (0, 1)",
            args.level
        )));
    }
    Ok(Some(BootstrapOptions {
        resamples: args.resamples,
        level: args.level,
        method,
        seed: Seed(seed),
    }))
}

/// Resolves the bare `hist` method name to `hist-<bins>`.
fn method_name(name: &str, bins: usize) -> String {
    if name == "hist" {
        format!("hist-{bins}")
    } else {
        name.to_string()
    }
}

fn parse_paired_methods(names: &[String], bins: usize) -> Result<Vec<PairedEstimator>> {
    if names.is_empty() {
        return Err(Error::Usage("--method needs at least one value".into()));
    }
    names
        .iter()
        .map(|s| {
            method_name(s, bins)
                .parse::<PairedEstimator>()
                .map_err(|_| Error::Usage(format!("unknown paired method '{s}'")))
        })
        .collect()
}

fn cmd_estimate(args: &EstimateArgs) -> Result<String> {
    let ci = bootstrap_options(&args.ci, args.output.seed)?;
    let methods: Vec<EstimateMethod> = args
        .method
        .iter()
        .map(|s| method_name(s, args.bins).parse())
        .collect::<Result<_>>()?;
    let (data, digest) = io::read_dataset(&args.input, args.format)?;
    let methods = if methods.is_empty() {
        vec![match data.format() {
            Format::Soft => EstimateMethod::Clean,
            Format::Counts => EstimateMethod::Hard,
            Format::Paired => "isotonic".parse()?,
        }]
    } else {
        methods
    };
    // Check every method against the format before running any of them.
    for &m in &methods {
        let ok = matches!(
            (m, data.format()),
            (
                EstimateMethod::Clean | EstimateMethod::Corrupted,
                Format::Soft | Format::Paired
            ) | (EstimateMethod::Hard, Format::Counts)
                | (EstimateMethod::Calibrated(_), Format::Paired)
        );
        if !ok {
            return Err(commands::estimate_with(&data, m, None).unwrap_err());
        }
    }
    let reports = methods
        .iter()
        .map(|&m| commands::estimate_with(&data, m, ci.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    emit("estimate", args, &args.output, vec![digest], reports, true)
}

fn cmd_bias_bound(args: &BiasBoundArgs) -> Result<String> {
    let (soft, inputs) = match &args.input {
        Some(path) => match io::read_dataset(path, Some(Format::Soft))? {
            (Dataset::Soft(s), d) => (Some(s), vec![d]),
            _ => unreachable!("format checked by the reader"),
        },
        None => (None, Vec::new()),
    };
    let params = BoundParameters {
        n: args.n,
        m: args.m,
        e: args.e,
        c: args.c,
        delta: args.delta,
    };
    let report = BiasBoundReport::compute(params, soft.as_ref()).map_err(usage)?;
    emit("bias-bound", args, &args.output, inputs, report, true)
}

#[derive(Debug, Serialize)]
struct GenResults {
    files: Vec<FileDigest>,
    clean_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_bayes_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hard_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    corrupted_estimate: Option<f64>,
}

fn cmd_gen(args: &GenArgs) -> Result<String> {
    let model = args.dist.model()?;
    let dir = args
        .output
        .out
        .clone()
        .ok_or_else(|| Error::Usage("gen needs --out DIR".into()))?;
    if args.n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    if args.m == Some(0) {
        return Err(Error::Usage("--m must be at least 1".into()));
    }
    let corruption = match args.corruption.as_str() {
        "none" => None,
        "beta" => Some(CorruptionSpec::Beta {
            a: args.a,
            b: args.b,
        }),
        "logit-gaussian" => Some(CorruptionSpec::LogitGaussian {
            a: args.a,
            b: args.b,
            sigma: args.sigma,
        }),
        other => {
            return Err(Error::Usage(format!(
                "unknown --corruption '{other}'; expected none, beta or logit-gaussian"
            )))
        }
    };
    if let Some(spec) = &corruption {
        spec.validate().map_err(usage)?;
    }
    if dir.exists() && !dir.is_dir() {
        return Err(Error::Usage(format!(
            "--out {} is not a directory",
            dir.display()
        )));
    }

    let g = commands::generate(
        &model,
        args.n,
        args.m,
        corruption.as_ref(),
        Seed(args.output.seed),
    )?;
    let mut datasets = vec![("soft.csv", Dataset::Soft(g.soft.clone()))];
    if let Some(c) = &g.counts {
        datasets.push(("counts.csv", Dataset::Counts(c.clone())));
    }
    if let Some(p) = &g.paired {
        datasets.push(("paired.csv", Dataset::Paired(p.clone())));
    }
    let mut files = Vec::new();
    let mut digests = Vec::new();
    for (name, data) in &datasets {
        let bytes = io::dataset_to_csv(data)?;
        let path = dir.join(name);
        digests.push(FileDigest {
            path: path.display().to_string(),
            format: data.format(),
            rows: data.len(),
            sha256: io::sha256_hex(&bytes),
        });
        files.push((path, bytes));
    }
    fs::create_dir_all(&dir)?;
    io::write_files_atomically(&files)?;

    let results = GenResults {
        files: digests,
        clean_estimate: estimate_bayes_error(&g.soft),
        exact_bayes_error: model.exact_bayes_error(),
        hard_estimate: g
            .counts
            .as_ref()
            .map(|c| crate::estimator::soft_from_hard(c).map(|s| estimate_bayes_error(&s)))
            .transpose()?,
        corrupted_estimate: g
            .paired
            .as_ref()
            .map(|p| PairedEstimator::Corrupted.estimate(p))
            .transpose()?,
    };
    emit("gen", args, &args.output, Vec::new(), results, false)
}

fn cmd_simulate_bias(args: &SimulateBiasArgs) -> Result<String> {
    let model = args.dist.model()?;
    if args.n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let sim = commands::simulate_bias(
        &model,
        &args.m_list,
        args.n,
        args.repeats,
        Seed(args.output.seed),
    )?;
    emit("simulate-bias", args, &args.output, Vec::new(), sim, true)
}

fn cmd_feebee(args: &FeebeeArgs) -> Result<String> {
    let methods = parse_paired_methods(&args.method, args.bins)?;
    if !(args.e > 0.0 && args.e <= 0.5) {
        return Err(Error::Usage(format!("--E {} not in (0, 0.5]", args.e)));
    }
    if args.n_grid == 0 {
        return Err(Error::Usage("--N must be at least 1".into()));
    }
    let (data, digest) = io::read_dataset(&args.input, Some(Format::Paired))?;
    let Dataset::Paired(paired) = data else {
        unreachable!("format checked by the reader")
    };
    let table = commands::feebee_table(
        &paired,
        &methods,
        args.e,
        args.n_grid,
        Seed(args.output.seed),
    )?;
    emit("feebee", args, &args.output, vec![digest], table, true)
}

fn cmd_order_break(args: &OrderBreakArgs) -> Result<String> {
    let model = args.dist.model()?;
    let methods = parse_paired_methods(&args.method, args.bins)?;
    if args.n < 2 {
        return Err(Error::Usage("--n must be at least 2".into()));
    }
    if args.m == Some(0) {
        return Err(Error::Usage("--m must be at least 1".into()));
    }
    let sweep = commands::order_break_sweep(
        &model,
        &args.sigma_list,
        args.a,
        args.b,
        args.m,
        args.n,
        &methods,
        Seed(args.output.seed),
    )?;
    emit("order-break", args, &args.output, Vec::new(), sweep, true)
}

/// Runs a parsed command and returns the JSON text for stdout.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::BiasBound(a) => cmd_bias_bound(a),
        Command::Gen(a) => cmd_gen(a),
        Command::SimulateBias(a) => cmd_simulate_bias(a),
        Command::Feebee(a) => cmd_feebee(a),
        Command::OrderBreak(a) => cmd_order_break(a),
    }
}

/// Parses `args`, runs the command, prints the report and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
