use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};
use reweval_cli::{
    parse_algorithms, parse_days, parse_p_values, run_evaluate, run_optimize,
    run_reference, run_report, run_simulate, CliError, CliResult, ConfigSource,
    OptimizeArgs, ReportArgs, RunManifest, SimulateArgs,
};

/// Offline evaluation of recommender algorithms with recalibrated
/// sampling weights.
#[derive(Parser)]
#[command(name = "reweval", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic adoption log from a scenario config.
    Simulate {
        /// Scenario config file.
        #[arg(long, value_name = "FILE", conflicts_with = "default_scenario")]
        config: Option<PathBuf>,
        /// Run the built-in default scenario instead of a config file.
        #[arg(long)]
        default_scenario: bool,
        /// Override the scenario's seed.
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
        /// Output log CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Export the item marginal of one day as a reference distribution.
    Reference {
        /// Adoption log CSV.
        #[arg(long, value_name = "FILE")]
        log: PathBuf,
        /// Snapshot day.
        #[arg(long, value_name = "DAY")]
        day: u32,
        /// Output reference CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Fit recalibration weights pulling one day's marginal toward a
    /// reference day's.
    Optimize {
        /// Adoption log CSV.
        #[arg(long, value_name = "FILE")]
        log: PathBuf,
        /// Day whose marginal is the target.
        #[arg(long, value_name = "DAY")]
        ref_day: u32,
        /// Day whose marginal is recalibrated.
        #[arg(long, value_name = "DAY")]
        day: u32,
        /// Number of items with adjustable weights.
        #[arg(long, value_name = "P")]
        p: usize,
        /// Output weights CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score algorithms over a day range, classically and reweighted.
    Evaluate {
        /// Adoption log CSV.
        #[arg(long, value_name = "FILE")]
        log: PathBuf,
        /// Reference day for the weights; defaults to the first
        /// evaluation day.
        #[arg(long, value_name = "DAY")]
        ref_day: Option<u32>,
        /// Days to evaluate: comma list of DAY, A..B, or A..B:STEP.
        #[arg(long, value_name = "SPEC")]
        days: String,
        /// Comma list of algorithms: constant[:items=A|B|...],
        /// cosine_cf[:norm=standard], naive_cf.
        #[arg(long, value_name = "LIST")]
        algorithm: String,
        /// Comma list of p values; 0 is classical evaluation.
        #[arg(long, value_name = "LIST", default_value = "0")]
        p: String,
        /// Recommendation list length.
        #[arg(long, value_name = "K", default_value_t = 10)]
        k: usize,
        /// Monte Carlo scoring with this many pairs instead of the exact
        /// sum.
        #[arg(long, value_name = "N", num_args = 0..=1, default_missing_value = "20000")]
        sampled: Option<usize>,
        /// Seed for Monte Carlo scoring.
        #[arg(long, value_name = "SEED", default_value_t = 0)]
        seed: u64,
        /// Output report CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Directory for weight CSVs; defaults to the report's directory.
        #[arg(long, value_name = "DIR")]
        weights_dir: Option<PathBuf>,
    },
    /// Split a report into per-algorithm day/p/score series.
    Report {
        /// Report CSV written by evaluate.
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Directory for the series CSVs.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Comma list restricting which algorithms get a series.
        #[arg(long, value_name = "LIST")]
        algorithm: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate {
            config,
            default_scenario,
            seed,
            out,
        } => {
            let source = match (config, default_scenario) {
                (Some(path), false) => ConfigSource::File(path),
                (None, true) => ConfigSource::Default,
                (None, false) => {
                    return Err(CliError::Usage(
                        "pass --config FILE or --default-scenario".to_string(),
                    ))
                }
                (Some(_), true) => unreachable!("clap rejects the combination"),
            };
            let summary = run_simulate(&SimulateArgs {
                config: source,
                seed_override: seed,
                out: out.clone(),
            })?;
            println!(
                "wrote {}: {} users, {} items, {} events through day {}",
                out.display(),
                summary.users,
                summary.items,
                summary.events,
                summary.last_day
            );
        }
        Command::Reference { log, day, out } => {
            let summary = run_reference(&log, day, &out)?;
            println!(
                "wrote {}: {} items at day {}",
                out.display(),
                summary.items,
                summary.day
            );
        }
        Command::Optimize {
            log,
            ref_day,
            day,
            p,
            out,
        } => {
            let summary = run_optimize(&OptimizeArgs {
                log_path: log,
                reference_day: ref_day,
                day,
                p,
                out: out.clone(),
            })?;
            println!(
                "wrote {}: divergence {} -> {} in {} iterations (converged={}, free={}, dropped={})",
                out.display(),
                summary.divergence_initial,
                summary.divergence_final,
                summary.iterations,
                summary.converged,
                summary.free_items,
                summary.dropped_items
            );
        }
        Command::Evaluate {
            log,
            ref_day,
            days,
            algorithm,
            p,
            k,
            sampled,
            seed,
            out,
            weights_dir,
        } => {
            let evaluation_days = parse_days(&days)?;
            let reference_day = match ref_day {
                Some(day) => day,
                None => *evaluation_days.first().ok_or_else(|| {
                    CliError::Usage("no evaluation days given".to_string())
                })?,
            };
            let manifest = RunManifest {
                log_path: log,
                reference_day,
                evaluation_days,
                algorithms: parse_algorithms(&algorithm)?,
                p_values: parse_p_values(&p)?,
                k,
                sample_size: sampled,
                seed,
                out: out.clone(),
                weights_dir,
            };
            let summary = run_evaluate(&manifest)?;
            println!(
                "wrote {}: {} rows, {} weight files",
                out.display(),
                summary.rows.len(),
                summary.weight_files.len()
            );
        }
        Command::Report {
            report,
            out_dir,
            algorithm,
        } => {
            let algorithms = algorithm.map(|list| {
                list.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            });
            let summary = run_report(&ReportArgs {
                report_path: report,
                out_dir,
                algorithms,
            })?;
            println!("wrote {} series files", summary.files.len());
            for file in &summary.files {
                println!("  {}", file.display());
            }
        }
    }
    Ok(())
}
