//! Report rows and append-only report files.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use skipfree::ruin::{CrossingQuery, VerificationReport};
use skipfree::walk::Estimate;

use crate::config::Format;
use crate::error::CliError;

/// One verified crossing query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub kind: &'static str,
    pub portfolio: Option<usize>,
    pub x: i64,
    pub y: Option<i64>,
    pub closed_form: f64,
    pub occupation_corrected: f64,
    pub mc_estimate: f64,
    pub mc_std_err: f64,
    pub trials: u64,
    pub horizon: u64,
    pub master_seed: u64,
    pub censored_fraction: f64,
    pub oracle_truncated: Option<f64>,
    pub oracle_horizon: Option<u64>,
    pub mc_agrees: bool,
    pub oracle_below_closed_form: Option<bool>,
    pub mc_agrees_corrected: bool,
    pub pass: bool,
    pub wall_time_s: Option<f64>,
}

pub fn query_kind(q: &CrossingQuery) -> &'static str {
    match q {
        CrossingQuery::PortfolioJump { .. } => "portfolio_jump",
        CrossingQuery::PortfolioTail { .. } => "portfolio_tail",
        CrossingQuery::PerturbedClaimJump { .. } => "perturbed_claim_jump",
    }
}

impl VerifyRow {
    pub fn new(r: &VerificationReport, master_seed: u64, wall_time_s: Option<f64>) -> Self {
        Self {
            kind: query_kind(&r.query),
            portfolio: r.query.portfolio(),
            x: r.query.x(),
            y: r.query.y(),
            closed_form: r.closed_form,
            occupation_corrected: r.occupation_corrected,
            mc_estimate: r.mc_estimate,
            mc_std_err: r.mc_std_err,
            trials: r.trials,
            horizon: r.horizon,
            master_seed,
            censored_fraction: r.censored_fraction,
            oracle_truncated: r.oracle_truncated,
            oracle_horizon: r.oracle_horizon,
            mc_agrees: r.mc_agrees,
            oracle_below_closed_form: r.oracle_below_closed_form,
            mc_agrees_corrected: r.mc_agrees_corrected,
            pass: r.pass,
            wall_time_s,
        }
    }
}

/// One exact identity check, or an aggregate over a batch of instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub suite: &'static str,
    pub instance: String,
    pub expected: f64,
    pub observed: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub wall_time_s: Option<f64>,
}

/// Ruin probability estimate for one initial capital.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateRow {
    pub capital: u64,
    pub estimate: f64,
    pub std_err: f64,
    pub trials: u64,
    pub horizon: u64,
    pub master_seed: u64,
    pub censored_fraction: f64,
    pub oracle_truncated: Option<f64>,
    pub oracle_horizon: Option<u64>,
    /// Present when the oracle ran at the Monte Carlo horizon.
    pub oracle_agrees: Option<bool>,
    pub wall_time_s: Option<f64>,
}

impl SimulateRow {
    pub fn new(capital: u64, est: &Estimate, horizon: u64, master_seed: u64) -> Self {
        Self {
            capital,
            estimate: est.p_hat,
            std_err: est.std_err,
            trials: est.trials,
            horizon,
            master_seed,
            censored_fraction: est.censored_fraction,
            oracle_truncated: None,
            oracle_horizon: None,
            oracle_agrees: None,
            wall_time_s: None,
        }
    }
}

/// Encodes rows; CSV gets a header line when `header` is set.
pub fn render<R: Serialize>(rows: &[R], format: Format, header: bool) -> Result<Vec<u8>, CliError> {
    let encode = |e: &dyn std::fmt::Display| CliError::Encode(e.to_string());
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(header)
                .from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| encode(&e))?;
            }
            w.into_inner().map_err(|e| encode(&e))
        }
        Format::Structured => {
            let mut out = Vec::new();
            for row in rows {
                serde_json::to_writer(&mut out, row).map_err(|e| encode(&e))?;
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

/// Appends the rows in a single write. A CSV header is written only when
/// the file is new or empty. Without a path the rows go to stdout.
pub fn append_rows<R: Serialize>(
    path: Option<&Path>,
    rows: &[R],
    format: Format,
) -> Result<(), CliError> {
    let io_err = |source, p: &Path| CliError::Io {
        path: p.to_path_buf(),
        source,
    };
    let Some(path) = path else {
        let bytes = render(rows, format, true)?;
        return std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| io_err(e, Path::new("<stdout>")));
    };
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let bytes = render(rows, format, fresh)?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(e, path))?;
    file.write_all(&bytes).map_err(|e| io_err(e, path))
}
