//! λ selection on dev MSE for every dataset × loss, with a JSON report and
//! a wide CSV table of test MSEs (datasets as rows, losses as columns).

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;

use fitzloss::data::{Dataset, Manifest, Split};
use fitzloss::train::{lbfgs_minimize, predict, split_mse, TrainConfig, WeightMatrix};
use fitzloss::{Error, Execution, LossSpec};

use crate::Failed;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Only these manifest entries (default: all).
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "logistic,fitzpatrick-logistic,sparsemax,fitzpatrick-sparsemax"
    )]
    losses: Vec<LossSpec>,
    #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-3,1e-2,1e-1,1,1e1,1e2,1e3,1e4")]
    lambda_grid: Vec<f64>,
    /// Directory for `report.json` and `table.csv`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
}

#[derive(Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub environment: Environment,
    pub lambda_grid: Vec<f64>,
    pub losses: Vec<String>,
    pub datasets: Vec<DatasetReport>,
}

#[derive(Serialize)]
pub struct Environment {
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp: String,
    pub seed: u64,
    pub threads: usize,
    pub execution: &'static str,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub lbfgs_memory: usize,
    pub mse: &'static str,
}

#[derive(Serialize)]
pub struct DatasetReport {
    pub name: String,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub split_sizes: Option<[usize; 3]>,
    pub results: Vec<LossResult>,
    /// Predictions of each Fenchel-Young loss and its Fitzpatrick sibling
    /// under the same weights.
    pub sibling_checks: Vec<SiblingCheck>,
    pub error: Option<String>,
}

#[derive(Serialize)]
pub struct LossResult {
    pub loss: String,
    pub best_lambda: Option<f64>,
    pub dev_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub cells: Vec<Cell>,
    pub error: Option<String>,
}

#[derive(Clone, Serialize)]
pub struct Cell {
    pub lambda: f64,
    pub train_mse: Option<f64>,
    pub dev_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub grad_norm_rel: Option<f64>,
    /// The line search stalled and the best iterate was scored instead.
    pub line_search_fallback: bool,
    pub error: Option<String>,
}

#[derive(Serialize)]
pub struct SiblingCheck {
    pub loss: String,
    pub sibling: String,
    pub lambda: f64,
    pub max_prediction_diff: f64,
}

pub fn run(args: BenchmarkArgs, execution: Execution, threads: Option<usize>) -> anyhow::Result<()> {
    if args.losses.is_empty() {
        bail!("--losses is empty");
    }
    if args.lambda_grid.is_empty() || args.lambda_grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        bail!("--lambda-grid needs positive finite values");
    }
    let manifest = Manifest::load(&args.manifest)?;
    let names: Vec<String> = if args.datasets.is_empty() {
        manifest.datasets.iter().map(|d| d.name.clone()).collect()
    } else {
        args.datasets.clone()
    };
    if names.is_empty() {
        bail!("manifest {} lists no datasets", args.manifest.display());
    }

    let base = TrainConfig::new(args.losses[0], 1.0);
    let report = Report {
        schema_version: SCHEMA_VERSION,
        environment: Environment {
            tool: "fitzloss",
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: args.seed,
            threads: thread_count(threads, execution),
            execution: if execution.is_parallel() { "parallel" } else { "sequential" },
            grad_tol: args.grad_tol,
            max_iter: args.max_iter,
            lbfgs_memory: base.lbfgs_memory,
            mse: "mean over samples of the squared euclidean norm of the residual",
        },
        lambda_grid: args.lambda_grid.clone(),
        losses: args.losses.iter().map(ToString::to_string).collect(),
        datasets: names.iter().map(|name| run_dataset(&manifest, name, &args, execution)).collect(),
    };

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    fs::write(args.out.join("report.json"), json)?;
    fs::write(args.out.join("table.csv"), table(&report))?;
    eprint!("{}", table(&report));

    let failed = report
        .datasets
        .iter()
        .any(|d| d.error.is_some() || d.results.iter().any(|r| r.error.is_some()));
    if failed {
        return Err(Failed.into());
    }
    Ok(())
}

fn thread_count(threads: Option<usize>, execution: Execution) -> usize {
    if !execution.is_parallel() {
        return 1;
    }
    #[cfg(feature = "parallel")]
    {
        threads.unwrap_or_else(rayon::current_num_threads)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        1
    }
}

fn run_dataset(manifest: &Manifest, name: &str, args: &BenchmarkArgs, execution: Execution) -> DatasetReport {
    let mut report = DatasetReport {
        name: name.to_string(),
        n: None,
        d: None,
        k: None,
        split_sizes: None,
        results: Vec::new(),
        sibling_checks: Vec::new(),
        error: None,
    };
    let data = match manifest.load_dataset(name) {
        Ok(data) => data,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.n = Some(data.n());
    report.d = Some(data.d());
    report.k = Some(data.k());
    report.split_sizes = Some(Split::ALL.map(|s| data.view(s).len()));
    if data.view(Split::Dev).is_empty() {
        report.error = Some("dev split is empty; cannot select lambda".into());
        return report;
    }

    let cells: Vec<(LossSpec, f64)> = args
        .losses
        .iter()
        .flat_map(|&loss| args.lambda_grid.iter().map(move |&lambda| (loss, lambda)))
        .collect();
    let trained = execution.map(&cells, |&(loss, lambda)| train_cell(&data, loss, lambda, args, execution));

    let mut best_weights: Vec<(LossSpec, f64, WeightMatrix)> = Vec::new();
    for (i, &loss) in args.losses.iter().enumerate() {
        let row = &trained[i * args.lambda_grid.len()..(i + 1) * args.lambda_grid.len()];
        let best = row
            .iter()
            .filter_map(|(cell, w)| Some((cell.dev_mse?, cell.lambda, cell, w.as_ref()?)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut result = LossResult {
            loss: loss.to_string(),
            best_lambda: None,
            dev_mse: None,
            test_mse: None,
            cells: Vec::new(),
            error: None,
        };
        match best {
            Some((dev, lambda, cell, w)) => {
                result.best_lambda = Some(lambda);
                result.dev_mse = Some(dev);
                result.test_mse = cell.test_mse;
                best_weights.push((loss, lambda, w.clone()));
            }
            None => result.error = Some("no lambda in the grid trained successfully".into()),
        }
        result.cells = row.iter().map(|(cell, _)| cell.clone()).collect();
        report.results.push(result);
    }

    for (loss, lambda, w) in &best_weights {
        if loss.family != fitzloss::Family::FenchelYoung {
            continue;
        }
        let sibling = loss.sibling();
        let max_diff = (0..data.n())
            .map(|i| {
                let x = data.features().row(i);
                match (predict(w, x, *loss), predict(w, x, sibling)) {
                    (Ok(a), Ok(b)) => a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max),
                    _ => f64::INFINITY,
                }
            })
            .fold(0.0, f64::max);
        report.sibling_checks.push(SiblingCheck {
            loss: loss.to_string(),
            sibling: sibling.to_string(),
            lambda: *lambda,
            max_prediction_diff: max_diff,
        });
    }
    report
}

fn train_cell(
    data: &Dataset,
    loss: LossSpec,
    lambda: f64,
    args: &BenchmarkArgs,
    execution: Execution,
) -> (Cell, Option<WeightMatrix>) {
    let mut cell = Cell {
        lambda,
        train_mse: None,
        dev_mse: None,
        test_mse: None,
        iterations: None,
        converged: false,
        grad_norm_rel: None,
        line_search_fallback: false,
        error: None,
    };
    let cfg = TrainConfig {
        seed: args.seed,
        max_iter: args.max_iter,
        grad_tol: args.grad_tol,
        execution,
        ..TrainConfig::new(loss, lambda)
    };
    let w = match lbfgs_minimize(&data.view(Split::Train), &cfg) {
        Ok(out) => {
            cell.iterations = Some(out.iterations);
            cell.converged = out.converged;
            cell.grad_norm_rel = Some(out.grad_norm_rel);
            out.w
        }
        Err(Error::LineSearch { iteration, best, .. }) => {
            cell.iterations = Some(iteration);
            cell.line_search_fallback = true;
            *best
        }
        Err(e) => {
            cell.error = Some(e.to_string());
            return (cell, None);
        }
    };
    let mse = |split| {
        let view = data.view(split);
        (!view.is_empty()).then(|| split_mse(&w, &view, loss)).transpose()
    };
    match (mse(Split::Train), mse(Split::Dev), mse(Split::Test)) {
        (Ok(train), Ok(dev), Ok(test)) => {
            cell.train_mse = train;
            cell.dev_mse = dev;
            cell.test_mse = test;
            (cell, Some(w))
        }
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
            cell.error = Some(e.to_string());
            (cell, None)
        }
    }
}

/// Test MSE per dataset (rows) and loss (columns); `NA` where unavailable.
pub fn table(report: &Report) -> String {
    let mut out = String::from("dataset");
    for loss in &report.losses {
        out.push(',');
        out.push_str(loss);
    }
    out.push('\n');
    for d in &report.datasets {
        out.push_str(&d.name);
        for loss in &report.losses {
            let value = d.results.iter().find(|r| &r.loss == loss).and_then(|r| r.test_mse);
            match value {
                Some(v) => out.push_str(&format!(",{v:.6}")),
                None => out.push_str(",NA"),
            }
        }
        out.push('\n');
    }
    out
}
