#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod benchmark;

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fitzloss::check::{run_suite, CheckConfig, Suite};
use fitzloss::data::{Manifest, Split};
use fitzloss::losses::fy_value;
use fitzloss::train::{lbfgs_minimize, split_mse, write_model, ModelHeader, TrainConfig};
use fitzloss::{Execution, Generator, LossSpec, ProbVector};

/// Fenchel-Young and Fitzpatrick losses: evaluation, property checks,
/// training and benchmarking.
#[derive(Parser)]
#[command(name = "fitzloss", version)]
struct Cli {
    /// Run every data-parallel section on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    /// Worker threads for data-parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one loss at (y, θ) and print a JSON record.
    Eval(EvalArgs),
    /// Write FY and Fitzpatrick losses along y = e_1, θ = (s, 0, …, 0) as CSV.
    Curve(CurveArgs),
    /// Run randomized property suites.
    Check(CheckArgs),
    /// Fit a linear model on the train split of a manifest dataset.
    Train(TrainArgs),
    /// Select λ on dev MSE for every dataset × loss and report test MSE.
    Benchmark(benchmark::BenchmarkArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    loss: LossSpec,
    /// Comma-separated target, e.g. `1,0`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    y: Vec<f64>,
    /// Comma-separated scores, e.g. `0.5,-1`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    theta: Vec<f64>,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    generator: Generator,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// `lo:hi`
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true, default_value = "-5:5")]
    s_range: (f64, f64),
    #[arg(long, default_value_t = 201)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per property (default: each property's own count).
    #[arg(long)]
    trials: Option<usize>,
    /// Fix the dimension of sampled instances.
    #[arg(long)]
    k: Option<usize>,
    /// Points per simplex edge for the grid oracle.
    #[arg(long, default_value_t = 400)]
    resolution: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    loss: LossSpec,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound '{lo}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound '{hi}'"))?;
    if !(lo < hi) {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// A run that completed but found failures; exit code 1.
#[derive(Debug)]
pub(crate) struct Failed;

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("failed")
    }
}

impl std::error::Error for Failed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let execution = if cli.sequential { Execution::Sequential } else { Execution::default() };
    let result = with_threads(cli.threads, || match cli.command {
        Command::Eval(args) => eval(args),
        Command::Curve(args) => curve(args),
        Command::Check(args) => check(args, execution),
        Command::Train(args) => train(args, execution),
        Command::Benchmark(args) => benchmark::run(args, execution, cli.threads),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Failed>() => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> anyhow::Result<R> + Send) -> anyhow::Result<R> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R>(_threads: Option<usize>, f: impl FnOnce() -> anyhow::Result<R>) -> anyhow::Result<R> {
    f()
}

#[derive(Serialize)]
struct EvalRecord {
    loss: String,
    value: f64,
    grad: Vec<f64>,
    link: Vec<f64>,
    y_star: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let e = args.loss.evaluate(&args.y, &args.theta)?;
    let record = EvalRecord {
        loss: args.loss.to_string(),
        value: e.value,
        grad: e.grad,
        link: e.link,
        y_star: e.y_star,
        lambda_star: e.solve.as_ref().map(|s| s.lambda_star),
        residual: e.solve.as_ref().map(|s| s.residual),
    };
    println!("{}", serde_json::to_string(&record)?);
    Ok(())
}

fn curve(args: CurveArgs) -> anyhow::Result<()> {
    if args.k < 2 {
        bail!("--k must be at least 2");
    }
    if args.steps < 2 {
        bail!("--steps must be at least 2");
    }
    let g = args.generator;
    let y = ProbVector::vertex(args.k, 0);
    let (lo, hi) = args.s_range;
    let mut csv = String::from("s,fy,fitz\n");
    let mut violations = 0;
    for i in 0..args.steps {
        let s = lo + (hi - lo) * i as f64 / (args.steps - 1) as f64;
        let mut theta = vec![0.0; args.k];
        theta[0] = s;
        let fy = fy_value(g, &y, &theta)?;
        let fitz = LossSpec::fitzpatrick(g).value(&y, &theta)?;
        if !(fitz >= 0.0 && fitz <= fy + 1e-9) {
            eprintln!("sandwich violated at s = {s}: fitz = {fitz}, fy = {fy}");
            violations += 1;
        }
        csv.push_str(&format!("{s:.11e},{fy:.11e},{fitz:.11e}\n"));
    }
    fs::write(&args.out, csv).with_context(|| format!("writing {}", args.out.display()))?;
    if violations > 0 {
        return Err(Failed.into());
    }
    Ok(())
}

fn check(args: CheckArgs, execution: Execution) -> anyhow::Result<()> {
    let cfg = CheckConfig {
        seed: args.seed,
        trials: args.trials,
        k: args.k,
        grid_resolution: args.resolution,
        execution,
    };
    let report = run_suite(args.suite, &cfg)?;
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failed.into())
    }
}

#[derive(Serialize)]
struct TrainRecord {
    dataset: String,
    loss: String,
    lambda: f64,
    seed: u64,
    iterations: usize,
    converged: bool,
    grad_norm_rel: f64,
    objective: f64,
    train_mse: Option<f64>,
    dev_mse: Option<f64>,
    test_mse: Option<f64>,
    model: PathBuf,
}

fn train(args: TrainArgs, execution: Execution) -> anyhow::Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let data = manifest
        .load_dataset(&args.dataset)
        .with_context(|| format!("loading dataset '{}'", args.dataset))?;
    let cfg = TrainConfig {
        seed: args.seed,
        max_iter: args.max_iter,
        grad_tol: args.grad_tol,
        execution,
        ..TrainConfig::new(args.loss, args.lambda)
    };
    let outcome = lbfgs_minimize(&data.view(Split::Train), &cfg)
        .with_context(|| format!("training {} on '{}'", args.loss, args.dataset))?;
    let header = ModelHeader { loss: args.loss, lambda: args.lambda, seed: args.seed };
    fs::write(&args.out, write_model(&outcome.w, &header))
        .with_context(|| format!("writing {}", args.out.display()))?;

    let mse = |split| {
        let view = data.view(split);
        if view.is_empty() {
            Ok(None)
        } else {
            split_mse(&outcome.w, &view, args.loss).map(Some)
        }
    };
    let record = TrainRecord {
        dataset: data.name.clone(),
        loss: args.loss.to_string(),
        lambda: args.lambda,
        seed: args.seed,
        iterations: outcome.iterations,
        converged: outcome.converged,
        grad_norm_rel: outcome.grad_norm_rel,
        objective: *outcome.trace.last().expect("trace holds the start value"),
        train_mse: mse(Split::Train)?,
        dev_mse: mse(Split::Dev)?,
        test_mse: mse(Split::Test)?,
        model: args.out,
    };
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{}", serde_json::to_string(&record)?)?;
    Ok(())
}
