use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use podsim_cli::config::ExperimentSpec;
use podsim_cli::experiment::{read_summary, run_experiment, write_experiment};
use podsim_cli::{capacity, goldens, plot, Result, OUT_DIR_ENV};

/// Locality-aware scheduling experiments.
///
/// A spec is a TOML file, or `preset:<name>` for a bundled one (desk,
/// reference, reference_lognormal, hotspot). Output directories can be
/// overridden with PODSIM_OUT_DIR.
#[derive(Parser)]
#[command(name = "podsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every policy, load and replication; write results.csv,
    /// summary.csv and charts.
    Run {
        spec: PathBuf,
        /// Worker threads, overriding the spec.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Report the throughput margin and the busiest servers.
    Capacity {
        spec: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Emit chart data and SVG charts from a summary table.
    Plot { summary: PathBuf },
    /// Check the golden traces, or regenerate them with --write.
    Goldens {
        #[arg(long)]
        write: bool,
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn env_out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { spec, workers } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if workers.is_some() {
                spec.run.workers = workers;
            }
            let exp = run_experiment(&spec)?;
            if let Some(m) = exp.margin {
                println!("throughput margin {m}");
            }
            let dir = spec.output_dir(env_out_dir().as_deref());
            let (results, summary) = write_experiment(&exp, &dir)?;
            println!("{} rows -> {}", exp.rows.len(), results.display());
            println!("{} summary rows -> {}", exp.summary.len(), summary.display());
            for p in plot::emit_plot_data(&exp.summary, &dir)? {
                println!("chart -> {}", p.display());
            }
        }
        Command::Capacity { spec, top } => {
            let spec = ExperimentSpec::load(&spec)?;
            print!("{}", capacity::capacity_report(&spec, top)?);
        }
        Command::Plot { summary } => {
            let rows = read_summary(&summary)?;
            let dir = env_out_dir().unwrap_or_else(|| summary.parent().unwrap_or(Path::new(".")).to_path_buf());
            for p in plot::emit_plot_data(&rows, &dir)? {
                println!("{}", p.display());
            }
        }
        Command::Goldens { write, dir } => {
            let dir = dir.unwrap_or_else(goldens::default_dir);
            if write {
                for p in goldens::write_goldens(&dir)? {
                    println!("wrote {}", p.display());
                }
            } else {
                goldens::check_goldens(&dir)?;
                println!("goldens match ({}); pass --write to regenerate", dir.display());
            }
        }
    }
    Ok(())
}
