//! Row model for the evaluation report CSV.

use reweval::EvalMode;

use crate::{CliError, CliResult};

fn malformed(msg: String) -> CliError {
    CliError::Data(anyhow::anyhow!(msg))
}

pub const REPORT_CSV_HEADER: &str = "day,algorithm,p,mode,classical_score,\
reweighted_score,n_pairs,std_error,seed,divergence_initial,divergence_final,weights_file";

/// One evaluated (day, algorithm, p) cell. For p = 0 the reweighted score
/// equals the classical one and both divergence columns report the
/// divergence under unit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub day: u32,
    pub algorithm: String,
    pub p: usize,
    pub mode: EvalMode,
    pub classical_score: f64,
    pub reweighted_score: f64,
    pub n_pairs: usize,
    pub std_error: Option<f64>,
    pub seed: Option<u64>,
    pub divergence_initial: f64,
    pub divergence_final: f64,
    pub weights_file: String,
}

impl ReportRow {
    pub fn to_csv(&self) -> String {
        let std_error = self
            .std_error
            .map(|e| e.to_string())
            .unwrap_or_default();
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.day,
            self.algorithm,
            self.p,
            self.mode,
            self.classical_score,
            self.reweighted_score,
            self.n_pairs,
            std_error,
            seed,
            self.divergence_initial,
            self.divergence_final,
            self.weights_file,
        )
    }

    pub fn parse(line: &str, source_name: &str, line_no: usize) -> CliResult<ReportRow> {
        let bad = |msg: String| malformed(format!("{source_name}:{line_no}: {msg}"));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(bad(format!("expected 12 fields, got {}", fields.len())));
        }
        let day = fields[0]
            .parse::<u32>()
            .map_err(|_| bad(format!("invalid day '{}'", fields[0])))?;
        let p = fields[2]
            .parse::<usize>()
            .map_err(|_| bad(format!("invalid p '{}'", fields[2])))?;
        let mode = match fields[3] {
            "exact" => EvalMode::Exact,
            "sampled" => EvalMode::Sampled,
            other => return Err(bad(format!("invalid mode '{other}'"))),
        };
        let float = |idx: usize, name: &str| -> CliResult<f64> {
            fields[idx]
                .parse::<f64>()
                .map_err(|_| bad(format!("invalid {name} '{}'", fields[idx])))
        };
        let classical_score = float(4, "classical_score")?;
        let reweighted_score = float(5, "reweighted_score")?;
        let n_pairs = fields[6]
            .parse::<usize>()
            .map_err(|_| bad(format!("invalid n_pairs '{}'", fields[6])))?;
        let std_error = if fields[7].is_empty() {
            None
        } else {
            Some(float(7, "std_error")?)
        };
        let seed = if fields[8].is_empty() {
            None
        } else {
            Some(
                fields[8]
                    .parse::<u64>()
                    .map_err(|_| bad(format!("invalid seed '{}'", fields[8])))?,
            )
        };
        let divergence_initial = float(9, "divergence_initial")?;
        let divergence_final = float(10, "divergence_final")?;
        Ok(ReportRow {
            day,
            algorithm: fields[1].to_string(),
            p,
            mode,
            classical_score,
            reweighted_score,
            n_pairs,
            std_error,
            seed,
            divergence_initial,
            divergence_final,
            weights_file: fields[11].to_string(),
        })
    }
}

/// Parses a full report CSV, header included.
pub fn parse_report(text: &str, source_name: &str) -> CliResult<Vec<ReportRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == REPORT_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(malformed(format!(
                "{source_name}:1: expected report header, got '{header}'"
            )))
        }
        None => return Err(malformed(format!("{source_name}: empty report"))),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        rows.push(ReportRow::parse(line, source_name, idx + 1)?);
    }
    Ok(rows)
}
