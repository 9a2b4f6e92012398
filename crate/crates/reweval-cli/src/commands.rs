//! The five subcommand implementations. Each returns a summary struct;
//! printing is left to the binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use reweval::{
    kl_divergence, optimize_weights, restrict_reference, AlgorithmSpec, EvalDistribution,
    EvalMode, EvalResult, InteractionLog, OptimizerOptions, Recommender, ReferenceMarginal,
    ScenarioConfig, Snapshot,
};

use crate::report::{parse_report, ReportRow, REPORT_CSV_HEADER};
use crate::{usage, CliResult};

/// Scenario source for `simulate`.
#[derive(Debug, Clone)]
pub enum ConfigSource {
    File(PathBuf),
    Default,
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub config: ConfigSource,
    pub seed_override: Option<u64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub users: usize,
    pub items: usize,
    pub events: usize,
    pub last_day: u32,
}

pub fn run_simulate(args: &SimulateArgs) -> CliResult<SimulateSummary> {
    let mut config = match &args.config {
        ConfigSource::File(path) => ScenarioConfig::read_file(path)?,
        ConfigSource::Default => ScenarioConfig::default_scenario(),
    };
    if let Some(seed) = args.seed_override {
        config.seed = seed;
    }
    let log = reweval::generate(&config)?;
    write_text(&args.out, &log.to_csv_string())?;
    Ok(SimulateSummary {
        users: log.n_users(),
        items: log.n_items(),
        events: log.n_events(),
        last_day: log.last_day().unwrap_or(0),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSummary {
    pub day: u32,
    pub items: usize,
}

pub fn run_reference(log_path: &Path, day: u32, out: &Path) -> CliResult<ReferenceSummary> {
    let log = read_log(log_path)?;
    let snapshot = log.snapshot_at(day);
    let distribution = EvalDistribution::uniform(&snapshot);
    let reference = ReferenceMarginal::from_snapshot(&snapshot, &distribution)?;
    write_text(out, &reference.to_csv_string(&log))?;
    Ok(ReferenceSummary {
        day,
        items: snapshot.n_items(),
    })
}

#[derive(Debug, Clone)]
pub struct OptimizeArgs {
    pub log_path: PathBuf,
    pub reference_day: u32,
    pub day: u32,
    pub p: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSummary {
    pub divergence_initial: f64,
    pub divergence_final: f64,
    pub iterations: usize,
    pub converged: bool,
    pub free_items: usize,
    pub dropped_items: usize,
}

pub fn run_optimize(args: &OptimizeArgs) -> CliResult<OptimizeSummary> {
    let log = read_log(&args.log_path)?;
    let reference = reference_at(&log, args.reference_day)?;
    let snapshot = log.snapshot_at(args.day);
    let distribution = EvalDistribution::uniform(&snapshot);
    let options = OptimizerOptions::default();
    let solution = optimize_weights(&snapshot, &distribution, &reference, args.p, &options)?;
    write_text(&args.out, &solution.to_csv_string(&log))?;
    Ok(OptimizeSummary {
        divergence_initial: solution.divergence_initial,
        divergence_final: solution.divergence_final,
        iterations: solution.iterations,
        converged: solution.converged,
        free_items: solution.free_items.len(),
        dropped_items: solution.dropped_items.len(),
    })
}

/// Everything `evaluate` needs: which log, which reference day, which
/// evaluation days, which algorithms, which p values, and how to score.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub log_path: PathBuf,
    pub reference_day: u32,
    pub evaluation_days: Vec<u32>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub p_values: Vec<usize>,
    pub k: usize,
    /// `None` runs the exact evaluator, `Some(n)` draws n Monte Carlo pairs.
    pub sample_size: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    /// Directory for weight files; defaults to the report's directory.
    pub weights_dir: Option<PathBuf>,
}

impl RunManifest {
    fn validate(&self) -> CliResult<()> {
        if self.evaluation_days.is_empty() {
            return Err(usage("no evaluation days given"));
        }
        if self.algorithms.is_empty() {
            return Err(usage("no algorithms given"));
        }
        if self.p_values.is_empty() {
            return Err(usage("no p values given"));
        }
        if self.k == 0 {
            return Err(usage("k must be at least 1"));
        }
        if self.sample_size == Some(0) {
            return Err(usage("sample size must be at least 1"));
        }
        let first = self.evaluation_days[0];
        if self.reference_day > first {
            return Err(usage(format!(
                "reference day {} is after the first evaluation day {first}",
                self.reference_day
            )));
        }
        Ok(())
    }

    fn weights_dir(&self) -> PathBuf {
        if let Some(dir) = &self.weights_dir {
            return dir.clone();
        }
        self.out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateSummary {
    pub rows: Vec<ReportRow>,
    pub weight_files: Vec<PathBuf>,
}

pub fn run_evaluate(manifest: &RunManifest) -> CliResult<EvaluateSummary> {
    manifest.validate()?;
    let log = read_log(&manifest.log_path)?;
    let reference = reference_at(&log, manifest.reference_day)?;
    let weights_dir = manifest.weights_dir();
    let options = OptimizerOptions::default();

    let mut rows = Vec::new();
    let mut weight_files = Vec::new();
    for &day in &manifest.evaluation_days {
        let snapshot = log.snapshot_at(day);
        let distribution = EvalDistribution::uniform(&snapshot);
        let (restricted, _) = restrict_reference(&reference, &snapshot)?;
        let unit_marginal = distribution.item_marginal(&snapshot)?;
        let unit_divergence = kl_divergence(&restricted, &unit_marginal)?;

        let mut solutions = BTreeMap::new();
        for &p in &manifest.p_values {
            if p == 0 {
                continue;
            }
            let solution =
                optimize_weights(&snapshot, &distribution, &reference, p, &options)?;
            let file_name = format!("weights_day{day}_p{p}.csv");
            let path = weights_dir.join(&file_name);
            write_text(&path, &solution.to_csv_string(&log))?;
            weight_files.push(path);
            solutions.insert(p, (solution, file_name));
        }

        for algorithm in &manifest.algorithms {
            let recommender = algorithm.build(&log, manifest.k)?;
            let classical = score(&*recommender, &snapshot, &distribution, manifest)?;
            for &p in &manifest.p_values {
                let row = if p == 0 {
                    ReportRow {
                        day,
                        algorithm: algorithm.name(),
                        p,
                        mode: mode_of(manifest),
                        classical_score: classical.score,
                        reweighted_score: classical.score,
                        n_pairs: classical.n_pairs,
                        std_error: classical.std_error,
                        seed: classical.seed,
                        divergence_initial: unit_divergence,
                        divergence_final: unit_divergence,
                        weights_file: String::new(),
                    }
                } else {
                    let (solution, file_name) = &solutions[&p];
                    let mut weighted = distribution.clone();
                    weighted.clear_weights();
                    for (&item, &weight) in &solution.weights {
                        weighted.set_weight(item, weight)?;
                    }
                    let reweighted = score(&*recommender, &snapshot, &weighted, manifest)?;
                    ReportRow {
                        day,
                        algorithm: algorithm.name(),
                        p,
                        mode: mode_of(manifest),
                        classical_score: classical.score,
                        reweighted_score: reweighted.score,
                        n_pairs: reweighted.n_pairs,
                        std_error: reweighted.std_error,
                        seed: reweighted.seed,
                        divergence_initial: solution.divergence_initial,
                        divergence_final: solution.divergence_final,
                        weights_file: file_name.clone(),
                    }
                };
                rows.push(row);
            }
        }
    }

    rows.sort_by(|a, b| {
        (a.day, &a.algorithm, a.p).cmp(&(b.day, &b.algorithm, b.p))
    });
    let mut text = String::from(REPORT_CSV_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    write_text(&manifest.out, &text)?;
    Ok(EvaluateSummary { rows, weight_files })
}

#[derive(Debug, Clone)]
pub struct ReportArgs {
    pub report_path: PathBuf,
    pub out_dir: PathBuf,
    /// Restricts the series to these algorithm names; defaults to every
    /// algorithm present in the report.
    pub algorithms: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub files: Vec<PathBuf>,
}

pub fn run_report(args: &ReportArgs) -> CliResult<ReportSummary> {
    let text = fs::read_to_string(&args.report_path)
        .with_context(|| format!("reading {}", args.report_path.display()))?;
    let source_name = args.report_path.display().to_string();
    let rows = parse_report(&text, &source_name)?;

    let names: Vec<String> = match &args.algorithms {
        Some(names) => names.clone(),
        None => {
            let mut names: Vec<String> =
                rows.iter().map(|r| r.algorithm.clone()).collect();
            names.sort();
            names.dedup();
            names
        }
    };

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut files = Vec::new();
    for name in &names {
        let mut series: Vec<&ReportRow> =
            rows.iter().filter(|r| &r.algorithm == name).collect();
        series.sort_by_key(|r| (r.day, r.p));
        let mut text = String::from("day,p,score\n");
        for row in series {
            text.push_str(&format!("{},{},{}\n", row.day, row.p, row.reweighted_score));
        }
        let path = args.out_dir.join(format!("series_{}.csv", sanitize(name)));
        write_text(&path, &text)?;
        files.push(path);
    }
    Ok(ReportSummary { files })
}

fn read_log(path: &Path) -> CliResult<InteractionLog> {
    Ok(InteractionLog::read_csv(path)?)
}

fn reference_at(log: &InteractionLog, day: u32) -> CliResult<ReferenceMarginal> {
    let snapshot = log.snapshot_at(day);
    let distribution = EvalDistribution::uniform(&snapshot);
    Ok(ReferenceMarginal::from_snapshot(&snapshot, &distribution)?)
}

fn mode_of(manifest: &RunManifest) -> EvalMode {
    if manifest.sample_size.is_some() {
        EvalMode::Sampled
    } else {
        EvalMode::Exact
    }
}

fn score(
    recommender: &dyn Recommender,
    snapshot: &Snapshot,
    distribution: &EvalDistribution,
    manifest: &RunManifest,
) -> CliResult<EvalResult> {
    let result = match manifest.sample_size {
        None => reweval::evaluate_exact(recommender, snapshot, distribution, manifest.k)?,
        Some(n) => reweval::evaluate_sampled(
            recommender,
            snapshot,
            distribution,
            manifest.k,
            n,
            manifest.seed,
        )?,
    };
    Ok(result)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitized_names_are_file_safe() {
        assert_eq!(sanitize("cosine_cf"), "cosine_cf");
        assert_eq!(sanitize("constant:items=4|2"), "constant-items-4-2");
    }

    #[test]
    fn manifest_validation_catches_bad_inputs() {
        let manifest = RunManifest {
            log_path: PathBuf::from("log.csv"),
            reference_day: 9,
            evaluation_days: vec![5, 8],
            algorithms: vec![AlgorithmSpec::parse("naive_cf").unwrap()],
            p_values: vec![0],
            k: 5,
            sample_size: None,
            seed: 0,
            out: PathBuf::from("report.csv"),
            weights_dir: None,
        };
        assert!(matches!(
            manifest.validate(),
            Err(crate::CliError::Usage(_))
        ));
        let mut ok = manifest.clone();
        ok.reference_day = 5;
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.k = 0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.evaluation_days.clear();
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.sample_size = Some(0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn weights_dir_defaults_next_to_the_report() {
        let manifest = RunManifest {
            log_path: PathBuf::from("log.csv"),
            reference_day: 0,
            evaluation_days: vec![1],
            algorithms: vec![AlgorithmSpec::parse("naive_cf").unwrap()],
            p_values: vec![0],
            k: 5,
            sample_size: None,
            seed: 0,
            out: PathBuf::from("runs/report.csv"),
            weights_dir: None,
        };
        assert_eq!(manifest.weights_dir(), PathBuf::from("runs"));
        let mut bare = manifest.clone();
        bare.out = PathBuf::from("report.csv");
        assert_eq!(bare.weights_dir(), PathBuf::from("."));
        let mut explicit = manifest;
        explicit.weights_dir = Some(PathBuf::from("w"));
        assert_eq!(explicit.weights_dir(), PathBuf::from("w"));
    }
}
