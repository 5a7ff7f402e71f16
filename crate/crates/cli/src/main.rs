//! Scenario-driven verification runs.
//!
//! `latticeq run <config.json> [--seed N] [--out DIR]` executes one named
//! scenario end to end and writes a manifest, an assertion list and the
//! plot-ready CSV tables into the output directory. Exit code 0 means
//! every in-config assertion passed, 2 means an assertion failed, 1 means
//! the run errored. `latticeq validate <config.json>` only checks the
//! config against the scenario schema.
//!
//! CSV bodies are byte-identical across reruns with the same config and
//! seed; wall-clock information is confined to the manifest.

mod outcome;
mod scenarios;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "latticeq", version, about = "Lattice renewal / log-periodic tail scenarios")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario config and write reports
    Run {
        /// path to the scenario config (JSON)
        config: PathBuf,
        /// override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// output directory (default: runs/<scenario>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a config against the scenario schema
    Validate {
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Validate { config } => match load(&config) {
            Ok((cfg, _)) => {
                println!("ok: scenario '{}' is valid", cfg.name());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(1)
            }
        },
        Cmd::Run { config, seed, out } => match run(&config, seed, out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}

fn load(path: &PathBuf) -> Result<(scenarios::Scenario, String), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let hash = {
        let mut h = Sha256::new();
        h.update(&bytes);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect::<String>()
    };
    let cfg = scenarios::Scenario::parse(&bytes)?;
    Ok((cfg, hash))
}

fn run(path: &PathBuf, seed_override: Option<u64>, out: Option<PathBuf>) -> Result<bool, String> {
    let (mut cfg, config_hash) = load(path)?;
    if let Some(s) = seed_override {
        cfg.set_seed(s);
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("runs").join(cfg.name()));
    std::fs::create_dir_all(&out_dir).map_err(|e| format!("cannot create output dir: {e}"))?;

    let outcome = cfg.execute(&out_dir).map_err(|e| format!("scenario failed: {e}"))?;

    let manifest = serde_json::json!({
        "scenario": cfg.name(),
        "config_sha256": config_hash,
        "seed": cfg.seed(),
        "version": env!("CARGO_PKG_VERSION"),
        "created_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    outcome.write(&out_dir).map_err(|e| e.to_string())?;

    let passed = outcome.all_passed();
    for a in &outcome.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    println!(
        "{}: {} assertions, {} tables -> {}",
        cfg.name(),
        outcome.assertions.len(),
        outcome.tables.len(),
        out_dir.display()
    );
    Ok(passed)
}
