use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use modsense::orchestrator::{exit_code, load_config, run, RunOptions, Task};
use modsense::Error;

/// Run a modular-sensor sweep and write CSV tables and SVG figures.
#[derive(Parser, Debug)]
#[command(name = "sensor", version, about)]
struct Cli {
    /// qfi-scan, phase-diagram, collapse, global-opt, ssh-bands, ssh-qfi,
    /// ssh-winding or oracle-check
    task: String,

    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,

    /// Output directory [default: the config's `out`, else ./results]
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on this
    #[arg(long)]
    workers: Option<usize>,

    /// Override a config field, e.g. `--set xy.J=0.4 --set axes.0.count=50`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sensor: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let task = Task::from_name(&cli.task)?;
    let mut overrides = vec![format!("task=\"{}\"", task.name())];
    if let Some(w) = cli.workers {
        overrides.push(format!("workers={w}"));
    }
    overrides.extend(cli.set.iter().cloned());
    let cfg = load_config(&cli.config, &overrides)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let report = run(&cfg, &RunOptions { out, cache_dir: None })?;
    eprintln!(
        "sensor {}: {} rows ({} failed), {} computed, {} from cache, config {}",
        report.task,
        report.rows,
        report.failed,
        report.computed,
        report.cached,
        &report.config_sha256[..12]
    );
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}
