use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use wavelab_cli::config::{Experiment, RunConfig};
use wavelab_cli::run::{run, RunError};

/// Stochastic Burgers experiments.
#[derive(Debug, Parser)]
#[command(name = "wavelab", version)]
struct Cli {
    experiment: Experiment,
    /// Flat `key = value` config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    /// Also write SVG line plots.
    #[arg(long)]
    svg: bool,
}

fn configure(cli: &Cli) -> Result<RunConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path, Some(cli.experiment))?,
        None => RunConfig::defaults(cli.experiment),
    };
    if let Some(dir) = &cli.output {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed)?;
    }
    if let Some(paths) = cli.paths {
        cfg.set_paths(paths)?;
    }
    cfg.emit_svg |= cli.svg;
    Ok(cfg)
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("WAVELAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("WAVELAB_THREADS must be a nonnegative integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn fail(message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": message }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return fail(e);
    }
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(e.to_string()),
    };
    println!("{}", cfg.experiment.name());
    for line in &outcome.summary {
        println!("  {line}");
    }
    for c in &outcome.checks {
        println!("  [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for f in &outcome.files {
        println!("  wrote {}", f.display());
    }
    if outcome.all_pass() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{}", json!({ "failures": outcome.failures() }));
        ExitCode::from(1)
    }
}
