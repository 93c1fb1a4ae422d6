use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use blochsum::runner::{parse_config, run_with_workers, write_outputs, Experiment};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Run one numerical experiment described by a config file.
#[derive(Debug, Parser)]
#[command(name = "blochsum", version)]
struct Cli {
    /// spectrum, pimatrix, decay, sumrule, perturb, trace or delta
    experiment: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for random potential families; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("blochsum: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let experiment: Experiment = match cli.experiment.parse() {
        Ok(e) => e,
        Err(e) => return usage_error(e),
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return usage_error(format!("{}: {e}", cli.config.display())),
    };
    let mut config = match parse_config(&text, experiment) {
        Ok(c) => c,
        Err(e) => return usage_error(format!("{}: {e}", cli.config.display())),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if let Some(out) = cli.out {
        config.out = Some(out);
    }
    let out_dir = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));
    let workers = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    if workers == 0 {
        return usage_error("--workers must be at least 1");
    }

    let outcome = match run_with_workers(&config, workers) {
        Ok(o) => o,
        Err(e) => return usage_error(e),
    };
    if let Err(e) = write_outputs(&outcome, &out_dir) {
        return usage_error(format!("writing to {}: {e}", out_dir.display()));
    }

    let report = &outcome.report;
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        print!(
            "{status} {}: {:.3e} (tolerance {:.1e})",
            check.name, check.value, check.tolerance
        );
        match &check.detail {
            Some(d) => println!(" {d}"),
            None => println!(),
        }
    }
    for e in &report.errors {
        println!("ERROR {e}");
    }
    println!("report: {}", out_dir.join("report.json").display());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
