use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use phaselift::experiments::{self, ExperimentConfig, ExperimentReport, DEMOS};
use phaselift::Error;

#[derive(Parser)]
#[command(name = "phaselift", version, about = "Phase retrieval experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run one of the shipped configs by name (`--list` shows them).
    Demo {
        #[arg(required_unless_present = "list")]
        name: Option<String>,
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(clap::Args)]
struct RunOpts {
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Image(_) => 2,
        Error::Io(_) | Error::Csv(_) => 1,
        _ => 3,
    }
}

fn execute(mut config: ExperimentConfig, opts: RunOpts) -> Result<(), Error> {
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    let out = opts.out.unwrap_or_else(|| config.output_dir.clone());
    let start = Instant::now();
    let report = experiments::run_to_dir(&config, &out, opts.threads)?;
    let elapsed = start.elapsed().as_secs_f64();
    // Kept apart from report.json so reruns stay byte-identical.
    std::fs::write(out.join("timing.json"), format!("{{\"seconds\": {elapsed:.3}}}\n"))?;
    summarize(&report);
    eprintln!("wrote {} ({elapsed:.1} s)", out.display());
    Ok(())
}

fn summarize(report: &ExperimentReport) {
    for note in &report.notes {
        println!("note: {note}");
    }
    println!("method        masks  r  snr_target  mean_mse_db  median_mse  success");
    for a in &report.aggregates {
        let level = a.snr_target_db.map_or("-".to_string(), |s| format!("{s}"));
        println!(
            "{:<12} {:>6} {:>2} {:>11} {:>12.2} {:>11.3e} {:>8.2}",
            a.method, a.masks, a.oversample, level, a.mean_mse_db, a.median_mse, a.success_rate
        );
    }
    for f in &report.fits {
        println!("slope {} masks={}: {:.3} dB/dB", f.method, f.masks, f.slope);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, opts } => ExperimentConfig::load(&config).and_then(|c| execute(c, opts)),
        Command::Demo { list: true, .. } => {
            for (name, _) in DEMOS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Demo { name, opts, .. } => {
            experiments::demo_config(name.as_deref().unwrap_or_default()).and_then(|c| execute(c, opts))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
