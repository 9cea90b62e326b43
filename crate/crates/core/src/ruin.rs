//! Level-crossing probabilities of the dual walk with attribution of the
//! crossing jump: closed forms, Monte Carlo estimators of the corresponding
//! path events, and assembled verification reports.
//!
//! All events concern `τ̂_0`, the first time the dual walk `X̂` is strictly
//! above zero, the position `y = X̂(τ̂_0 - 1) <= 0` it jumps from, and the
//! landing position `X̂(τ̂_0) >= x`:
//!
//! * [`CrossingQuery::PortfolioJump`]: portfolio `i` jumped by exactly
//!   `x + 1 - y`; closed form `P(C^i(1) = x + 1 - y)`.
//! * [`CrossingQuery::PortfolioTail`]: `y` summed out, portfolio `i` jumped by
//!   at least `x + 1`; closed form `P(C^i(1) >= x + 1)`.
//! * [`CrossingQuery::PerturbedClaimJump`]: total claims caused the jump, as
//!   the union `{ΔC >= x+1-y, ΔZ = -1} ∪ {ΔC >= x-y, ΔZ >= 0}`; closed form
//!   `P(C >= x+1-y) P(Z = -1) + P(C >= x-y) P(Z >= 0)`.
//!
//! The closed forms treat the expected number of visits to `y` before the
//! crossing as one. [`occupation_weight`] computes that expectation exactly;
//! the Monte Carlo and enumeration estimates track
//! `occupation_weight * closed_form`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{CompensatedSum, Probability};
use crate::oracle::{Cmp, Enumerator, PathEvent, StepCondition};
use crate::pmf::{ClaimPmf, PerturbationPmf};
use crate::walk::{
    CensorRule, CrossingRecord, Estimate, MonteCarlo, RiskModelSpec, Simulator, TrialSeed,
    ValidModel,
};

/// Monte Carlo agreement threshold in standard errors.
pub const SE_TOLERANCE: f64 = 3.5;

/// Slack allowed when an enumeration truncation is compared with its
/// closed form.
pub const ORACLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrossingQuery {
    PortfolioJump { portfolio: usize, x: i64, y: i64 },
    PortfolioTail { portfolio: usize, x: i64 },
    PerturbedClaimJump { x: i64, y: i64 },
}

fn check_xy(x: i64, y: Option<i64>) -> Result<()> {
    if x < 1 {
        return Err(Error::DomainError(format!(
            "landing level x = {x} must be >= 1"
        )));
    }
    if let Some(y) = y {
        if y > 0 {
            return Err(Error::DomainError(format!(
                "pre-crossing position y = {y} must be <= 0"
            )));
        }
    }
    Ok(())
}

/// `P(C^i(1) = x + 1 - y)`.
pub fn portfolio_jump_probability<T: Probability>(
    claim: &ClaimPmf<T>,
    x: i64,
    y: i64,
) -> Result<T> {
    check_xy(x, Some(y))?;
    Ok(claim.prob(x + 1 - y))
}

/// `P(C^i(1) >= x + 1)`, counting truncated tail mass.
pub fn portfolio_tail_probability<T: Probability>(claim: &ClaimPmf<T>, x: i64) -> Result<T> {
    check_xy(x, None)?;
    Ok(claim.upper_tail(x + 1))
}

/// `P(C(1) >= x+1-y) P(Z(1) = -1) + P(C(1) >= x-y) P(Z(1) >= 0)`.
pub fn perturbed_claim_jump_probability<T: Probability>(
    claims_total: &ClaimPmf<T>,
    z: &PerturbationPmf<T>,
    x: i64,
    y: i64,
) -> Result<T> {
    check_xy(x, Some(y))?;
    Ok(claims_total.upper_tail(x + 1 - y) * z.prob(-1)
        + claims_total.upper_tail(x - y) * z.mass_at_least(0))
}

impl CrossingQuery {
    pub fn x(&self) -> i64 {
        match *self {
            Self::PortfolioJump { x, .. }
            | Self::PortfolioTail { x, .. }
            | Self::PerturbedClaimJump { x, .. } => x,
        }
    }

    pub fn y(&self) -> Option<i64> {
        match *self {
            Self::PortfolioJump { y, .. } | Self::PerturbedClaimJump { y, .. } => Some(y),
            Self::PortfolioTail { .. } => None,
        }
    }

    pub fn portfolio(&self) -> Option<usize> {
        match *self {
            Self::PortfolioJump { portfolio, .. } | Self::PortfolioTail { portfolio, .. } => {
                Some(portfolio)
            }
            Self::PerturbedClaimJump { .. } => None,
        }
    }

    /// Checks parameter ranges and that the query fits the model variant.
    pub fn check<T: Probability>(&self, model: &RiskModelSpec<T>) -> Result<()> {
        check_xy(self.x(), self.y())?;
        if let Some(i) = self.portfolio() {
            if !matches!(model, RiskModelSpec::UnitDrift { .. }) {
                return Err(Error::QueryMismatch(
                    "portfolio attribution needs the unit-drift model".into(),
                ));
            }
            model.portfolio(i)?;
        }
        Ok(())
    }

    /// Closed-form right-hand side.
    pub fn closed_form<T: Probability>(&self, model: &RiskModelSpec<T>) -> Result<T> {
        self.check(model)?;
        match *self {
            Self::PortfolioJump { portfolio, x, y } => {
                portfolio_jump_probability(model.portfolio(portfolio)?, x, y)
            }
            Self::PortfolioTail { portfolio, x } => {
                portfolio_tail_probability(model.portfolio(portfolio)?, x)
            }
            Self::PerturbedClaimJump { x, y } => {
                perturbed_claim_jump_probability(&model.total_claims(), &model.perturbation(), x, y)
            }
        }
    }

    /// Whether a simulated first passage over level 0 belongs to the event.
    /// Censored trials never do.
    pub fn matches(&self, record: &CrossingRecord) -> bool {
        let CrossingRecord::Crossed {
            y_pre,
            landing,
            step,
            ..
        } = record
        else {
            return false;
        };
        let x = self.x();
        if *landing < x {
            return false;
        }
        match *self {
            Self::PortfolioJump { portfolio, y, .. } => {
                *y_pre == y && step.component_jumps[portfolio - 1] == x + 1 - y
            }
            Self::PortfolioTail { portfolio, .. } => step.component_jumps[portfolio - 1] > x,
            Self::PerturbedClaimJump { y, .. } => {
                let dc = step.claims_total();
                let dz = step.z_jump;
                *y_pre == y && ((dc >= x + 1 - y && dz == -1) || (dc >= x - y && dz >= 0))
            }
        }
    }

    /// Condition on the crossing step `(pre, post, draw)` defining the event.
    pub fn step_condition(&self) -> StepCondition {
        let x = self.x();
        let mut conds = vec![StepCondition::Post(Cmp::Ge, x)];
        match *self {
            Self::PortfolioJump { portfolio, y, .. } => {
                conds.push(StepCondition::Pre(Cmp::Eq, y));
                conds.push(StepCondition::Component {
                    index: portfolio,
                    cmp: Cmp::Eq,
                    value: x + 1 - y,
                });
            }
            Self::PortfolioTail { portfolio, .. } => {
                conds.push(StepCondition::Component {
                    index: portfolio,
                    cmp: Cmp::Ge,
                    value: x + 1,
                });
            }
            Self::PerturbedClaimJump { y, .. } => {
                conds.push(StepCondition::Pre(Cmp::Eq, y));
                conds.push(StepCondition::Any(vec![
                    StepCondition::All(vec![
                        StepCondition::ClaimsTotal(Cmp::Ge, x + 1 - y),
                        StepCondition::Perturbation(Cmp::Eq, -1),
                    ]),
                    StepCondition::All(vec![
                        StepCondition::ClaimsTotal(Cmp::Ge, x - y),
                        StepCondition::Perturbation(Cmp::Ge, 0),
                    ]),
                ]));
            }
        }
        StepCondition::All(conds)
    }

    /// The same event written with the enumeration combinators.
    pub fn path_event(&self) -> PathEvent {
        PathEvent::AtFirstCrossing {
            level: 0,
            condition: self.step_condition(),
        }
    }
}

/// Monte Carlo estimates for several queries from one set of simulated
/// first passages.
pub fn estimate_queries<T: Probability>(
    model: &ValidModel<T>,
    queries: &[CrossingQuery],
    mc: &MonteCarlo,
) -> Result<Vec<Estimate>> {
    for q in queries {
        q.check(model.spec())?;
    }
    let sim = Simulator::new(model);
    let censor = CensorRule::new(model.spec());
    let censored_slot = queries.len();
    let counts = mc.tally(queries.len() + 1, |index, counts| {
        let record = sim.simulate_to_level(TrialSeed::new(mc.master_seed, index), mc.horizon, 0);
        if let CrossingRecord::Censored { final_position, .. } = record {
            if censor.at_risk(final_position, 0) {
                counts[censored_slot] += 1;
            }
            return;
        }
        for (slot, q) in queries.iter().enumerate() {
            if q.matches(&record) {
                counts[slot] += 1;
            }
        }
    });
    Ok(counts[..queries.len()]
        .iter()
        .map(|&hits| Estimate::from_counts(hits, counts[censored_slot], mc.trials))
        .collect())
}

/// Monte Carlo frequency of the portfolio-jump crossing event.
pub fn estimate_portfolio_jump<T: Probability>(
    model: &ValidModel<T>,
    portfolio: usize,
    x: i64,
    y: i64,
    mc: &MonteCarlo,
) -> Result<Estimate> {
    let q = CrossingQuery::PortfolioJump { portfolio, x, y };
    Ok(estimate_queries(model, &[q], mc)?[0])
}

/// Monte Carlo frequency of the "claims caused the crossing" event.
pub fn estimate_perturbed_claim_jump<T: Probability>(
    model: &ValidModel<T>,
    x: i64,
    y: i64,
    mc: &MonteCarlo,
) -> Result<Estimate> {
    let q = CrossingQuery::PerturbedClaimJump { x, y };
    Ok(estimate_queries(model, &[q], mc)?[0])
}

/// Exact probability of the query's event intersected with
/// `{τ̂_0 <= horizon}`.
pub fn oracle_crossing_truncation<T: Probability>(
    model: &RiskModelSpec<T>,
    query: &CrossingQuery,
    horizon: u64,
    budget: u64,
) -> Result<T> {
    query.check(model)?;
    Enumerator::for_model(model)
        .with_budget(budget)
        .probability(&query.path_event(), horizon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub query: CrossingQuery,
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub mc_std_err: f64,
    pub trials: u64,
    pub horizon: u64,
    pub censored_fraction: f64,
    pub oracle_truncated: Option<f64>,
    pub oracle_horizon: Option<u64>,
    /// [`occupation_corrected`] at the Monte Carlo horizon.
    pub occupation_corrected: f64,
    /// `|closed_form - mc_estimate| <= 3.5 mc_std_err`.
    pub mc_agrees: bool,
    /// `oracle_truncated <= closed_form + 1e-9`, when the oracle ran.
    pub oracle_below_closed_form: Option<bool>,
    /// `|occupation_corrected - mc_estimate| <= 3.5 mc_std_err`; not part
    /// of `pass`.
    pub mc_agrees_corrected: bool,
    pub pass: bool,
}

impl VerificationReport {
    pub fn assemble(
        query: CrossingQuery,
        closed_form: f64,
        occupation_corrected: f64,
        estimate: &Estimate,
        horizon: u64,
        oracle: Option<(f64, u64)>,
    ) -> Self {
        let mc_agrees = within_se(closed_form, estimate.p_hat, estimate.std_err);
        let oracle_below_closed_form = oracle.map(|(v, _)| v <= closed_form + ORACLE_SLACK);
        Self {
            query,
            closed_form,
            mc_estimate: estimate.p_hat,
            mc_std_err: estimate.std_err,
            trials: estimate.trials,
            horizon,
            censored_fraction: estimate.censored_fraction,
            oracle_truncated: oracle.map(|(v, _)| v),
            oracle_horizon: oracle.map(|(_, h)| h),
            occupation_corrected,
            mc_agrees,
            oracle_below_closed_form,
            mc_agrees_corrected: within_se(occupation_corrected, estimate.p_hat, estimate.std_err),
            pass: mc_agrees && oracle_below_closed_form.unwrap_or(true),
        }
    }
}

/// `|expected - estimate| <= 3.5 se`.
pub fn within_se(expected: f64, estimate: f64, se: f64) -> bool {
    (expected - estimate).abs() <= SE_TOLERANCE * se
}

/// Verification settings shared by a batch of queries.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub mc: MonteCarlo,
    pub oracle_horizon: Option<u64>,
    pub oracle_budget: u64,
}

/// Closed form, Monte Carlo estimate and optional enumeration truncation
/// for each query.
pub fn verify_all<T: Probability>(
    model: &ValidModel<T>,
    queries: &[CrossingQuery],
    options: &VerifyOptions,
) -> Result<Vec<VerificationReport>> {
    let closed: Vec<f64> = queries
        .iter()
        .map(|q| {
            q.closed_form(model.spec())
                .map(|v| v.to_f64().unwrap_or(f64::NAN))
        })
        .collect::<Result<_>>()?;
    let oracle: Vec<Option<(f64, u64)>> = match options.oracle_horizon {
        None => vec![None; queries.len()],
        Some(h) => queries
            .iter()
            .map(|q| {
                oracle_crossing_truncation(model.spec(), q, h, options.oracle_budget)
                    .map(|v| Some((v.to_f64().unwrap_or(f64::NAN), h)))
            })
            .collect::<Result<_>>()?,
    };
    let corrected: Vec<f64> = queries
        .iter()
        .map(|q| {
            occupation_corrected(model.spec(), q, options.mc.horizon)
                .map(|v| v.to_f64().unwrap_or(f64::NAN))
        })
        .collect::<Result<_>>()?;
    let estimates = estimate_queries(model, queries, &options.mc)?;
    Ok(queries
        .iter()
        .enumerate()
        .map(|(j, q)| {
            VerificationReport::assemble(
                *q,
                closed[j],
                corrected[j],
                &estimates[j],
                options.mc.horizon,
                oracle[j],
            )
        })
        .collect())
}

/// Single-query form of [`verify_all`].
pub fn verify<T: Probability>(
    model: &ValidModel<T>,
    query: &CrossingQuery,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    Ok(verify_all(model, std::slice::from_ref(query), options)?.remove(0))
}

/// `Σ_{n=1}^{horizon} P(X̂(n-1) = y, max_{m <= n-1} X̂(m) <= 0)`: the expected
/// number of visits to `y` before the dual walk first exceeds zero,
/// truncated at `horizon` steps. Exact dynamic programming over positions.
pub fn occupation_weight<T: Probability>(
    model: &RiskModelSpec<T>,
    y: i64,
    horizon: u64,
) -> Result<T> {
    if y > 0 {
        return Err(Error::DomainError(format!("y = {y} must be <= 0")));
    }
    let increments = model.dual_increment_pmf();
    if increments.min_value() < -1 {
        return Err(Error::DomainError(
            "dual walk is not downwards skip-free".into(),
        ));
    }
    // index j holds position -j
    let width = horizon as usize + 1;
    let mut mass = vec![T::zero(); width];
    mass[0] = T::one();
    let mut visits = CompensatedSum::new();
    for n in 1..=horizon {
        // term n uses X̂(n-1)
        if let Some(&p) = mass.get((-y) as usize) {
            visits.add(p);
        }
        if n == horizon {
            break;
        }
        let mut next = vec![T::zero(); width];
        for (j, &p) in mass.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            for &(v, q) in increments.entries() {
                let landing = -(j as i64) + v;
                if landing <= 0 && ((-landing) as usize) < width {
                    next[(-landing) as usize] = next[(-landing) as usize] + p * q;
                }
            }
        }
        mass = next;
    }
    Ok(visits.value())
}

/// Exact probability of the query's event within `horizon` steps, as
/// `Σ_y occupation_weight(y) · P(one step from y satisfies the event)`.
///
/// This is the value the Monte Carlo and enumeration estimates converge to.
pub fn occupation_corrected<T: Probability>(
    model: &RiskModelSpec<T>,
    query: &CrossingQuery,
    horizon: u64,
) -> Result<T> {
    query.check(model)?;
    let steps = Enumerator::for_model(model);
    let condition = query.step_condition();
    let starts = match query.y() {
        Some(y) => y..=y,
        None => {
            let max_up = steps.outcomes().map(|(inc, _, _)| inc).max().unwrap_or(0);
            (query.x() - max_up).min(0)..=0
        }
    };
    let mut total = CompensatedSum::new();
    for y in starts {
        let one_step: T = steps
            .outcomes()
            .filter(|&(inc, _, draw)| condition.eval(y, y + inc, draw))
            .map(|(_, p, _)| p)
            .sum();
        if one_step > T::zero() {
            total.add(occupation_weight(model, y, horizon)? * one_step);
        }
    }
    Ok(total.value())
}

/// Indicator functional `1{X̂(n-1) = y, Ŝ(n-1) <= 0} 1{ΔC^i(n) = x + 1 - y}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpIndicator {
    pub portfolio: usize,
    pub x: i64,
    pub y: i64,
}

impl JumpIndicator {
    fn jump(&self) -> i64 {
        self.x + 1 - self.y
    }

    /// `Σ_n E[∫ H(n, ε) dF_i(ε)]` up to `horizon` steps: the occupation of `y`
    /// times `P(C^i(1) = x + 1 - y)`.
    pub fn expected_integrated<T: Probability>(
        &self,
        model: &RiskModelSpec<T>,
        horizon: u64,
    ) -> Result<T> {
        check_xy(self.x, Some(self.y))?;
        let claim = model.portfolio(self.portfolio)?;
        Ok(occupation_weight(model, self.y, horizon)? * claim.prob(self.jump()))
    }

    /// Monte Carlo estimate of `E[Σ_{n <= horizon} H(n, ΔC^i(n))]`.
    pub fn estimate_sum<T: Probability>(
        &self,
        model: &ValidModel<T>,
        mc: &MonteCarlo,
    ) -> Result<Estimate> {
        check_xy(self.x, Some(self.y))?;
        model.portfolio(self.portfolio)?;
        let sim = Simulator::new(model);
        let slot = self.portfolio - 1;
        let counts = mc.tally(2, |index, counts| {
            let mut fired = 0u64;
            sim.walk(TrialSeed::new(mc.master_seed, index), mc.horizon, |s| {
                // s.pre <= 0 and every earlier position <= 0 while walking
                if s.pre == self.y && s.component_jumps[slot] == self.jump() {
                    assert!(s.post > 0, "indicator fired before the first crossing");
                    fired += 1;
                }
                s.post <= 0
            });
            counts[0] += fired;
            counts[1] += fired * fired;
        });
        let n = mc.trials as f64;
        let mean = counts[0] as f64 / n;
        let var = (counts[1] as f64 / n - mean * mean).max(0.0);
        Ok(Estimate {
            hits: counts[0],
            trials: mc.trials,
            p_hat: mean,
            std_err: (var / n).sqrt(),
            censored_fraction: 0.0,
        })
    }
}
