use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use strom_cli::artifacts::load_model;
use strom_cli::config::{RunConfig, UsageError};
use strom_cli::run::{render_report, run_at, write_outputs};
use strom_cli::{bench, train, verify};
use strom_core::par;

const EXIT_USAGE: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Space-time reduced-order models for linear dynamical systems.
#[derive(Parser)]
#[command(name = "strom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (`key = value` lines); built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `paths.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, overriding `workers` (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run FOM sweeps and build spatial and temporal bases.
    Train(Common),
    /// Solve the reduced models at a parameter point.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated parameter values; defaults to `test_params`.
        #[arg(long)]
        param: Option<String>,
    },
    /// Run the oracle suites.
    Verify(Common),
    /// Time the offline and online phases in sequential and parallel mode.
    Bench(Common),
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn cmd_train(c: &Common) -> Result<u8> {
    let cfg = load_config(c)?;
    let outcome = par::install(cfg.workers, || train::train(&cfg, true))?;
    println!(
        "trained n_s = {}, n_t = {} from {} samples (rank {}); artifacts in {}",
        outcome.basis.n_s(),
        outcome.basis.n_t(),
        cfg.samples.len(),
        outcome.sigma.len(),
        cfg.out_dir.display()
    );
    Ok(0)
}

fn cmd_run(c: &Common, param: Option<&str>) -> Result<u8> {
    let cfg = load_config(c)?;
    let params = match param {
        Some(p) => vec![cfg.parse_param(p)?],
        None if cfg.test_params.is_empty() => {
            return Err(UsageError("no --param given and the config has no test_params".into()).into())
        }
        None => cfg.test_params.clone(),
    };
    let (basis, _) = load_model(&cfg.out_dir)?;
    for (i, p) in params.iter().enumerate() {
        let outcome = par::install(cfg.workers, || run_at(&cfg, &basis, p))?;
        let suffix = if params.len() == 1 {
            String::new()
        } else {
            format!("_{i}")
        };
        write_outputs(&cfg.out_dir, &suffix, &outcome)?;
        info!("wrote run_report{suffix}.txt");
        let report = render_report(&outcome);
        let summary: String = report.split("\n[series]").next().unwrap_or("").to_string();
        println!("{summary}");
    }
    Ok(0)
}

fn cmd_verify(c: &Common) -> Result<u8> {
    let cfg = load_config(c)?;
    let results = par::install(cfg.workers, || verify::run_all(cfg.seed, cfg.verify_perturb_st));
    let text = verify::render(&results);
    print!("{text}");
    if std::fs::create_dir_all(&cfg.out_dir).is_ok() {
        std::fs::write(cfg.out_dir.join("verify_report.txt"), &text).context("writing verify_report.txt")?;
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("failed suites: {}", failed.join(", "));
        Ok(EXIT_VERIFY)
    }
}

fn cmd_bench(c: &Common) -> Result<u8> {
    let cfg = load_config(c)?;
    let rows = bench::bench(&cfg)?;
    let text = bench::render(&rows);
    print!("{text}");
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    std::fs::write(cfg.out_dir.join("bench_report.csv"), &text).context("writing bench_report.csv")?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Run { common, param } => cmd_run(common, param.as_deref()),
        Command::Verify(c) => cmd_verify(c),
        Command::Bench(c) => cmd_bench(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            };
            ExitCode::from(code)
        }
    }
}
