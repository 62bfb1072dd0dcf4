//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use nbwrangle_harvest::crawl::StopReason;
use nbwrangle_harvest::HarvestResult;

use crate::config::{self, PipelineConfig};
use crate::{convert, stages};

pub const EXIT_FATAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "nbwrangle", version, about = "Harvest notebooks and trace their data-wrangling operations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crawl the catalog (live or mock) into the output directory.
    Harvest {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert notebooks (files or directories) into trace files.
    Convert {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value = config::DEFAULT_OUT_DIR)]
        out: PathBuf,
        /// Worker threads; defaults to available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
        /// Dataset name recorded for every input.
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Report how a name is defined in a notebook.
    AnalyzeTerm {
        #[arg(long)]
        notebook: PathBuf,
        #[arg(long, required = true)]
        term: Vec<String>,
    },
    /// Summarize a directory of traces into summary.csv and stats.json.
    Report {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value = config::DEFAULT_OUT_DIR)]
        out: PathBuf,
    },
    /// Harvest, convert and report in one go.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .try_init();
}

fn workers(jobs: Option<usize>) -> usize {
    jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<PipelineConfig> {
    let mut config = config::load_config(path)?;
    if let Some(out) = out {
        config.out_dir = out;
    }
    Ok(config)
}

fn stop_text(stop: StopReason) -> &'static str {
    match stop {
        StopReason::NothingRequested => "nothing requested",
        StopReason::TargetReached => "target reached",
        StopReason::CatalogExhausted => "catalog exhausted",
        StopReason::PageCap => "page cap",
        StopReason::ListingFailed => "listing failed",
    }
}

fn print_harvest(r: &HarvestResult) {
    println!(
        "harvest: {} notebooks from {} datasets, {} pages, {} rate-limit events ({})",
        r.notebooks_fetched,
        r.datasets_touched,
        r.pages_visited,
        r.rate_limit_events,
        stop_text(r.stop)
    );
}

fn print_convert(s: &convert::ConvertSummary) {
    println!(
        "convert: {} traces written, {} notebooks skipped, {} diagnostics",
        s.traces_written,
        s.skipped,
        s.diagnostics.len()
    );
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Harvest { config, out } => {
            let config = load(&config, out)?;
            let outcome = stages::harvest(&config)?;
            print_harvest(&outcome.result);
        }
        Command::Convert {
            paths,
            out,
            jobs,
            dataset,
        } => {
            let found = convert::discover(&paths, dataset.as_deref());
            let summary = convert::convert(&found, &out, workers(jobs))?;
            print_convert(&summary);
        }
        Command::AnalyzeTerm { notebook, term } => {
            for report in stages::analyze_terms(&notebook, &term)? {
                println!("{}", report.message);
            }
        }
        Command::Report { traces, out } => {
            let (rows, stats) = stages::report(&traces, &out)?;
            println!(
                "report: {rows} rows from {} notebooks",
                stats.notebooks_processed
            );
        }
        Command::Pipeline { config, out, jobs } => {
            let config = load(&config, out)?;
            let outcome = stages::pipeline(&config, workers(jobs))?;
            print_harvest(&outcome.harvest);
            print_convert(&outcome.convert);
            println!(
                "report: {} rows from {} notebooks",
                outcome.rows, outcome.stats.notebooks_processed
            );
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Exit status is
/// 0 on success, 1 on a fatal error and 2 on a usage error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(run(["nbwrangle", "frobnicate"]), ExitCode::from(EXIT_USAGE));
        assert_eq!(run(["nbwrangle", "convert"]), ExitCode::from(EXIT_USAGE));
    }

    #[test]
    fn missing_config_is_fatal() {
        assert_eq!(
            run(["nbwrangle", "harvest", "--config", "/nonexistent/x.cfg"]),
            ExitCode::from(EXIT_FATAL)
        );
    }
}
