//! `cwlab` — configuration-driven front end for the conductance-walk
//! laboratory.
//!
//! A run is one TOML file (see [`config`]) naming a command and an
//! environment; outputs land in a directory as CSV tables, a JSON report,
//! and SVG plots. Exit status: 0 on success, 1 when an asserted
//! verification check fails (the report files are still written), 2 on
//! configuration, environment, or I/O errors.

mod commands;
mod config;
mod outputs;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cwlab_core::build_env;

#[derive(Parser)]
#[command(
    name = "cwlab",
    about = "Random walks among random conductances on ℤ: exact heat kernels, walker ensembles, and limit-law verification",
    version
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the environment seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: CWLAB_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print nothing but errors.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn thread_count(cli: &Cli) -> Result<Option<usize>, String> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var("CWLAB_THREADS") {
        Ok(text) => text
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("CWLAB_THREADS: expected a thread count, got {text:?}")),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    // 0 means "pick the core count", matching the thread-pool convention.
    if let Some(n) = thread_count(&cli)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }

    let text = fs::read_to_string(&cli.config)
        .map_err(|e| format!("{}: {e}", cli.config.display()))?;
    let mut cfg = config::parse_config(&text)
        .map_err(|e| format!("{}: {e}", cli.config.display()))?;
    if let Some(seed) = cli.seed {
        cfg.spec.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }

    let env = build_env(cfg.spec.clone()).map_err(|e| format!("env: {e}"))?;
    fs::create_dir_all(&cfg.out).map_err(|e| format!("{}: {e}", cfg.out.display()))?;

    let say = |line: &str| {
        if !cli.quiet {
            println!("{line}");
        }
    };
    say(&format!("environment {env}", env = env.spec()));

    let outcome = commands::run(&cfg, &env, &cfg.out).map_err(|e| e.to_string())?;
    for file in &outcome.files {
        say(&format!("wrote {}", file.display()));
    }

    if let Some(report) = &outcome.report {
        for o in &report.outcomes {
            let verdict = match (o.asserted, o.passed) {
                (true, true) => "pass     ",
                (true, false) => "FAIL     ",
                (false, true) => "info:pass",
                (false, false) => "info:fail",
            };
            say(&format!("{verdict} {:<24} {}", o.check, o.detail));
        }
        let failed =
            report.outcomes.iter().filter(|o| o.asserted && !o.passed).count();
        if failed == 0 {
            say("verdict: all asserted checks passed");
        } else {
            // Failures go to stderr even under --quiet; the exit code alone
            // should never be the only trace.
            eprintln!("verdict: {failed} asserted check(s) failed");
        }
    }
    Ok(outcome.all_passed())
}
