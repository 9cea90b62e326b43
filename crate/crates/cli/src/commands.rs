//! The three subcommands. Each builds its full report in memory and appends
//! it to the output only after every row is computed.

use std::time::Instant;

use skipfree::combinatorics::{
    ballot_probability, first_passage_pmf_dp, kemperman_first_passage_pmf, qualifying_rotations,
};
use skipfree::oracle::{oracle_ballot, Cmp, Enumerator, PathEvent};
use skipfree::pmf::{family_pmf, Pmf};
use skipfree::ruin::{verify_all, within_se, VerifyOptions};
use skipfree::walk::ruin_probability_estimate;

use crate::config::{BallotSuite, KempermanSuite, RotationSuite, Settings};
use crate::error::CliError;
use crate::report::{append_rows, IdentityRow, SimulateRow, VerifyRow};

/// Summary of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub rows: usize,
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

fn elapsed(settings: &Settings, start: Instant) -> Option<f64> {
    settings.timing.then(|| start.elapsed().as_secs_f64())
}

pub fn verify_rows(settings: &Settings) -> Result<Vec<VerifyRow>, CliError> {
    let start = Instant::now();
    let model = settings.model()?;
    let queries = settings.queries()?;
    let options = VerifyOptions {
        mc: settings.monte_carlo(&model),
        oracle_horizon: settings.oracle_horizon,
        oracle_budget: settings.oracle_budget,
    };
    let reports = verify_all(&model, &queries, &options)?;
    let wall = elapsed(settings, start);
    Ok(reports
        .iter()
        .map(|r| VerifyRow::new(r, settings.master_seed, wall))
        .collect())
}

pub fn cmd_verify(settings: &Settings) -> Result<Outcome, CliError> {
    let rows = verify_rows(settings)?;
    append_rows(settings.out.as_deref(), &rows, settings.format)?;
    Ok(Outcome {
        rows: rows.len(),
        passed: rows.iter().all(|r| r.pass),
    })
}

fn corpus(families: &[skipfree::pmf::Family]) -> Result<Vec<Pmf>, CliError> {
    families
        .iter()
        .map(|f| family_pmf(f).map_err(CliError::config))
        .collect()
}

fn ballot_rows(suite: &BallotSuite) -> Result<Vec<IdentityRow>, CliError> {
    let mut rows = Vec::new();
    for (j, pmf) in corpus(&suite.increments)?.iter().enumerate() {
        let lowest = pmf.min_value().min(0);
        for n in 1..=suite.max_n {
            for k in lowest * n as i64..=n as i64 {
                let Some(observed) = oracle_ballot(pmf, n, k)? else {
                    continue;
                };
                let expected: f64 = ballot_probability(n, k)?;
                let deviation = (observed - expected).abs();
                rows.push(IdentityRow {
                    suite: "ballot",
                    instance: format!("pmf={} n={n} k={k}", j + 1),
                    expected,
                    observed,
                    deviation,
                    tolerance: suite.tolerance,
                    pass: deviation <= suite.tolerance,
                    wall_time_s: None,
                });
            }
        }
    }
    Ok(rows)
}

/// Offsets of the rotations whose partial sums first reach the total at
/// the final step, by direct scan.
fn brute_force_offsets(seq: &[i64]) -> Vec<usize> {
    let n = seq.len();
    let total: i64 = seq.iter().sum();
    (0..n)
        .filter(|&i| {
            let mut s = 0;
            (0..n).all(|j| {
                s += seq[(i + j) % n];
                j + 1 == n || s > total
            })
        })
        .collect()
}

fn rotation_rows(suite: &RotationSuite) -> Result<Vec<IdentityRow>, CliError> {
    if suite.entries.is_empty() {
        return Err(CliError::Config("rotation suite needs entries".into()));
    }
    let mut rows = Vec::new();
    for len in 1..=suite.max_len {
        let mut digits = vec![0usize; len];
        let mut seq = vec![0i64; len];
        let (mut checked, mut agreeing) = (0u64, 0u64);
        loop {
            for (s, &d) in seq.iter_mut().zip(&digits) {
                *s = suite.entries[d];
            }
            let total: i64 = seq.iter().sum();
            if total < 0 {
                checked += 1;
                let cert = qualifying_rotations(&seq)?;
                let brute = brute_force_offsets(&seq);
                if cert.qualifying_offsets.len() as i64 == -total
                    && cert.qualifying_offsets == brute
                {
                    agreeing += 1;
                }
            }
            // odometer increment
            let mut pos = 0;
            while pos < len {
                digits[pos] += 1;
                if digits[pos] < suite.entries.len() {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
            if pos == len {
                break;
            }
        }
        rows.push(IdentityRow {
            suite: "rotations",
            instance: format!("length={len} sequences={checked}"),
            expected: checked as f64,
            observed: agreeing as f64,
            deviation: (checked - agreeing) as f64,
            tolerance: 0.0,
            pass: checked == agreeing,
            wall_time_s: None,
        });
    }
    Ok(rows)
}

fn kemperman_rows(suite: &KempermanSuite) -> Result<Vec<IdentityRow>, CliError> {
    let mut rows = Vec::new();
    for (j, pmf) in corpus(&suite.increments)?.iter().enumerate() {
        for k in 1..=suite.max_k {
            let kem = kemperman_first_passage_pmf(pmf, k, suite.max_n)?;
            let dp = first_passage_pmf_dp(pmf, k, suite.max_n)?;
            let deviation = (1..=suite.max_n)
                .map(|n| (kem[&n] - dp[&n]).abs())
                .fold(0.0, f64::max);
            rows.push(IdentityRow {
                suite: "kemperman",
                instance: format!("pmf={} k={k} n<={}", j + 1, suite.max_n),
                expected: dp.values().sum(),
                observed: kem.values().sum(),
                deviation,
                tolerance: suite.tolerance,
                pass: deviation <= suite.tolerance,
                wall_time_s: None,
            });
        }
    }
    Ok(rows)
}

pub fn identity_rows(settings: &Settings) -> Result<Vec<IdentityRow>, CliError> {
    let suites = settings
        .config
        .identities
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [identities] section".into()))?;
    let mut rows = Vec::new();
    let mut timed = |mut batch: Vec<IdentityRow>, start: Instant| {
        let wall = elapsed(settings, start);
        for r in &mut batch {
            r.wall_time_s = wall;
        }
        rows.extend(batch);
    };
    if let Some(s) = &suites.ballot {
        let start = Instant::now();
        timed(ballot_rows(s)?, start);
    }
    if let Some(s) = &suites.rotations {
        let start = Instant::now();
        timed(rotation_rows(s)?, start);
    }
    if let Some(s) = &suites.kemperman {
        let start = Instant::now();
        timed(kemperman_rows(s)?, start);
    }
    if rows.is_empty() {
        return Err(CliError::Config("no identity suites configured".into()));
    }
    Ok(rows)
}

pub fn cmd_identities(settings: &Settings) -> Result<Outcome, CliError> {
    let rows = identity_rows(settings)?;
    append_rows(settings.out.as_deref(), &rows, settings.format)?;
    Ok(Outcome {
        rows: rows.len(),
        passed: rows.iter().all(|r| r.pass),
    })
}

pub fn simulate_rows(settings: &Settings) -> Result<Vec<SimulateRow>, CliError> {
    let start = Instant::now();
    let model = settings.model()?;
    let capitals = &settings
        .config
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [simulate] section".into()))?
        .capitals;
    if capitals.is_empty() {
        return Err(CliError::Config(
            "simulate needs at least one capital".into(),
        ));
    }
    let mc = settings.monte_carlo(&model);
    let oracle = Enumerator::for_model(model.spec()).with_budget(settings.oracle_budget);
    let mut rows = Vec::with_capacity(capitals.len());
    for &u in capitals {
        let level =
            i64::try_from(u).map_err(|_| CliError::Config(format!("capital {u} too large")))?;
        let est = ruin_probability_estimate(&model, u, &mc);
        let mut row = SimulateRow::new(u, &est, mc.horizon, settings.master_seed);
        if let Some(h) = settings.oracle_horizon {
            let exact = oracle.probability(
                &PathEvent::FirstCrossingTime {
                    level,
                    cmp: Cmp::Le,
                    time: h,
                },
                h,
            )?;
            row.oracle_truncated = Some(exact);
            row.oracle_horizon = Some(h);
            row.oracle_agrees = (h == mc.horizon).then(|| within_se(exact, est.p_hat, est.std_err));
        }
        rows.push(row);
    }
    let wall = elapsed(settings, start);
    for r in &mut rows {
        r.wall_time_s = wall;
    }
    Ok(rows)
}

pub fn cmd_simulate(settings: &Settings) -> Result<Outcome, CliError> {
    let rows = simulate_rows(settings)?;
    append_rows(settings.out.as_deref(), &rows, settings.format)?;
    Ok(Outcome {
        rows: rows.len(),
        passed: rows.iter().all(|r| r.oracle_agrees != Some(false)),
    })
}
