//! Implementation of the `reweval` command line: simulate a feedback-loop
//! scenario, export reference marginals, fit recalibration weights, score
//! algorithms over a day range, and regroup the report into per-algorithm
//! series.

use std::collections::BTreeSet;
use std::fmt;

use reweval::AlgorithmSpec;

pub mod commands;
pub mod report;

pub use commands::{
    run_evaluate, run_optimize, run_reference, run_report, run_simulate, ConfigSource,
    EvaluateSummary, OptimizeArgs, OptimizeSummary, ReferenceSummary, ReportArgs,
    ReportSummary, RunManifest, SimulateArgs, SimulateSummary,
};
pub use report::{ReportRow, REPORT_CSV_HEADER};

/// Failures split by exit code: bad invocations exit 1, bad or missing
/// data exits 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Data(err) => write!(f, "{err:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<reweval::Error> for CliError {
    fn from(err: reweval::Error) -> CliError {
        CliError::Data(err.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::Data(err.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> CliError {
        CliError::Data(err)
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses a day selection: comma-separated integers and inclusive ranges
/// `A..B` or `A..B:STEP`. Returns the days sorted and deduplicated.
pub fn parse_days(spec: &str) -> CliResult<Vec<u32>> {
    let mut days = BTreeSet::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(usage(format!("empty day segment in '{spec}'")));
        }
        match part.split_once("..") {
            None => {
                let day = part
                    .parse::<u32>()
                    .map_err(|_| usage(format!("invalid day '{part}'")))?;
                days.insert(day);
            }
            Some((start, rest)) => {
                let (end, step) = match rest.split_once(':') {
                    Some((end, step)) => (end, step),
                    None => (rest, "1"),
                };
                let start = start
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| usage(format!("invalid range start in '{part}'")))?;
                let end = end
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| usage(format!("invalid range end in '{part}'")))?;
                let step = step
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| usage(format!("invalid range step in '{part}'")))?;
                if step == 0 {
                    return Err(usage(format!("zero step in '{part}'")));
                }
                if start > end {
                    return Err(usage(format!("descending range '{part}'")));
                }
                let mut day = start;
                while day <= end {
                    days.insert(day);
                    match day.checked_add(step) {
                        Some(next) => day = next,
                        None => break,
                    }
                }
            }
        }
    }
    Ok(days.into_iter().collect())
}

/// Parses a comma list of p values, sorted and deduplicated. Zero means
/// classical unweighted evaluation.
pub fn parse_p_values(spec: &str) -> CliResult<Vec<usize>> {
    let mut values = BTreeSet::new();
    for part in spec.split(',') {
        let part = part.trim();
        let p = part
            .parse::<usize>()
            .map_err(|_| usage(format!("invalid p value '{part}'")))?;
        values.insert(p);
    }
    Ok(values.into_iter().collect())
}

/// Parses a comma list of algorithm specs, dropping duplicates but
/// keeping first-seen order.
pub fn parse_algorithms(spec: &str) -> CliResult<Vec<AlgorithmSpec>> {
    let mut seen = BTreeSet::new();
    let mut algorithms = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let algorithm =
            AlgorithmSpec::parse(part).map_err(|e| usage(e.to_string()))?;
        if seen.insert(algorithm.name()) {
            algorithms.push(algorithm);
        }
    }
    if algorithms.is_empty() {
        return Err(usage("no algorithms given"));
    }
    Ok(algorithms)
}
