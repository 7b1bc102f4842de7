//! `matprod`: bounds, simulations and partition families from the command line.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 restriction
//! failure under `--strict`, 4 non-finite numerics.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use matprod_core::baranyai::{build_partitions, verify_family, PartitionFamily};
use matprod_core::bounds::BoundReport;
use matprod_core::config::{parse_config, Overrides, RunConfig, SEED_ENV};
use matprod_core::montecarlo::{rate_fit, run_error_trials, scalar_floor_check};
use matprod_core::report::{to_json, write_records_csv, RunManifest, Summary};
use matprod_core::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_RESTRICTION: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "matprod",
    version,
    about = "Concentration of normalized random matrix products"
)]
struct Cli {
    /// Worker thread cap (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every closed-form bound at (L, n, d, δ).
    Bounds(BoundsArgs),
    /// Run error trials and write records.csv, summary.json, manifest.json.
    Simulate(SimArgs),
    /// `simulate`, then print the fitted convergence rate.
    Rate(SimArgs),
    /// Build and verify a family of parallel classes of k-subsets of [N].
    Baranyai(BaranyaiArgs),
    /// Median of √n |Z_n - 1| for scalar Rademacher products.
    ScalarFloor(FloorArgs),
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long = "L")]
    l: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    delta: f64,
    /// Exit 3 when the admissibility restriction fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated product lengths.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// Number of expansion terms recorded per trial.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Exit 3 when the restriction fails at any grid point.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct BaranyaiArgs {
    #[arg(long = "N")]
    n: usize,
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
struct FloorArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
}

/// A failure carrying its process exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::NonFinite(_)) {
            EXIT_NUMERIC
        } else {
            EXIT_USAGE
        };
        Self {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self {
            code: EXIT_USAGE,
            msg: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        msg: msg.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Bounds(a) => cmd_bounds(&a),
        Command::Simulate(a) => cmd_simulate("simulate", &a, cli.threads),
        Command::Rate(a) => cmd_simulate("rate", &a, cli.threads),
        Command::Baranyai(a) => cmd_baranyai(&a),
        Command::ScalarFloor(a) => cmd_scalar_floor(&a),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn emit<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    out.write_all(to_json(value).as_bytes())?;
    Ok(())
}

fn cmd_bounds(a: &BoundsArgs) -> Result<u8, Failure> {
    let report = BoundReport::evaluate(a.l, a.n, a.d, a.delta)?;
    emit(&report)?;
    if a.strict && !report.restriction_ok {
        return Ok(EXIT_RESTRICTION);
    }
    Ok(0)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_simulate(command: &str, a: &SimArgs, threads: Option<usize>) -> Result<u8, Failure> {
    let raw = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            Some(parse_config(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let flags = Overrides {
        d: a.d,
        n_grid: a.n.clone(),
        trials: a.trials,
        delta: a.delta,
        depth: a.k,
        seed: a.seed,
        threads,
    };
    let resolved = RunConfig::resolve(raw.as_ref(), env_seed().as_deref(), &flags)?;
    let config = resolved.experiment()?;
    let records = run_error_trials(&config)?;

    fs::create_dir_all(&a.out).map_err(|e| usage(format!("{}: {e}", a.out.display())))?;
    let csv_path = a.out.join("records.csv");
    let file =
        fs::File::create(&csv_path).map_err(|e| usage(format!("{}: {e}", csv_path.display())))?;
    let mut w = BufWriter::new(file);
    write_records_csv(&mut w, &records, config.depth())?;
    w.flush()?;

    let manifest = RunManifest {
        command: command.to_string(),
        config_digest: resolved.digest(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        master_seed: resolved.seed,
    };
    write_file(&a.out.join("manifest.json"), to_json(&manifest).as_bytes())?;

    if let Some(bad) = records.iter().find(|r| !r.is_finite()) {
        return Err(Failure {
            code: EXIT_NUMERIC,
            msg: format!(
                "non-finite error at n = {}, trial {}",
                bad.n, bad.trial_index
            ),
        });
    }
    let summary = Summary::build(command, &config, &records)?;
    write_file(&a.out.join("summary.json"), to_json(&summary).as_bytes())?;

    if command == "rate" {
        emit(&rate_fit(&records)?)?;
    }
    if a.strict && summary.per_n.iter().any(|p| !p.restriction_ok) {
        return Ok(EXIT_RESTRICTION);
    }
    Ok(0)
}

#[derive(Serialize)]
struct FamilyOutput {
    #[serde(flatten)]
    family: PartitionFamily,
    class_count: usize,
    verified: bool,
}

fn cmd_baranyai(a: &BaranyaiArgs) -> Result<u8, Failure> {
    let family = build_partitions(a.n, a.k)?;
    let verified = verify_family(&family);
    let class_count = family.class_count();
    emit(&FamilyOutput {
        family,
        class_count,
        verified,
    })?;
    Ok(if verified { 0 } else { EXIT_NUMERIC })
}

#[derive(Serialize)]
struct FloorPoint {
    n: usize,
    median_scaled_error: f64,
}

fn cmd_scalar_floor(a: &FloorArgs) -> Result<u8, Failure> {
    let seed = match (a.seed, env_seed()) {
        (Some(s), _) => s,
        (None, Some(s)) => s
            .trim()
            .parse()
            .map_err(|e| usage(format!("{SEED_ENV}: {e}")))?,
        (None, None) => 0,
    };
    let points: Vec<FloorPoint> = scalar_floor_check(&a.n, a.trials, seed)?
        .into_iter()
        .map(|(n, median_scaled_error)| FloorPoint {
            n,
            median_scaled_error,
        })
        .collect();
    emit(&points)?;
    Ok(0)
}
