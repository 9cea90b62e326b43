//! Risk-process models, their dual walks, and seeded simulation to first
//! passage.
//!
//! The dual walk `X̂ = -X` starts at zero. For the unit-drift model its
//! increment is `ΔC - 1`, for the perturbed model `ΔC - ΔZ`. Both are
//! downwards skip-free: no increment is below `-1`.

use std::ops::Deref;

use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::Probability;
use crate::pmf::{ClaimPmf, PerturbationPmf, Pmf};

/// Probability threshold below which a later crossing is treated as decided.
pub const CENSOR_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum RiskModelSpec<T = f64> {
    /// `X(n) = n - (C^1 + ... + C^m)(n)`.
    UnitDrift { portfolios: Vec<ClaimPmf<T>> },
    /// `X(n) = Z(n) - (C^1 + ... + C^m)(n)`.
    Perturbed {
        portfolios: Vec<ClaimPmf<T>>,
        perturbation: PerturbationPmf<T>,
    },
}

impl<T: Probability> RiskModelSpec<T> {
    pub fn unit_drift(portfolios: Vec<ClaimPmf<T>>) -> Self {
        Self::UnitDrift { portfolios }
    }

    pub fn perturbed(portfolios: Vec<ClaimPmf<T>>, perturbation: PerturbationPmf<T>) -> Self {
        Self::Perturbed {
            portfolios,
            perturbation,
        }
    }

    pub fn portfolios(&self) -> &[ClaimPmf<T>] {
        match self {
            Self::UnitDrift { portfolios } | Self::Perturbed { portfolios, .. } => portfolios,
        }
    }

    /// 1-based portfolio lookup.
    pub fn portfolio(&self, index: usize) -> Result<&ClaimPmf<T>> {
        let count = self.portfolios().len();
        if index == 0 || index > count {
            return Err(Error::PortfolioIndex { index, count });
        }
        Ok(&self.portfolios()[index - 1])
    }

    /// Law of `ΔZ`; the unit drift is the point mass at one.
    pub fn perturbation(&self) -> PerturbationPmf<T> {
        match self {
            Self::UnitDrift { .. } => {
                PerturbationPmf::new(Pmf::delta(1)).expect("delta(1) is skip-free")
            }
            Self::Perturbed { perturbation, .. } => perturbation.clone(),
        }
    }

    /// Law of the total claim increment `ΔC`.
    pub fn total_claims(&self) -> ClaimPmf<T> {
        ClaimPmf::total(self.portfolios())
    }

    /// `μ = E ΔC`.
    pub fn claims_mean(&self) -> T {
        self.portfolios().iter().map(|c| c.expectation()).sum()
    }

    /// Mean upward drift of the risk process: 1, or `E ΔZ`.
    pub fn drift_mean(&self) -> T {
        match self {
            Self::UnitDrift { .. } => T::one(),
            Self::Perturbed { perturbation, .. } => perturbation.expectation(),
        }
    }

    /// Law of one increment of the dual walk `X̂`.
    pub fn dual_increment_pmf(&self) -> Pmf<T> {
        let claims = self.total_claims();
        match self {
            Self::UnitDrift { .. } => claims.shift(-1),
            Self::Perturbed { perturbation, .. } => claims.convolve(&perturbation.negate()),
        }
    }
}

/// Model that satisfies the net profit condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidModel<T = f64>(RiskModelSpec<T>);

impl<T> ValidModel<T> {
    pub fn spec(&self) -> &RiskModelSpec<T> {
        &self.0
    }

    pub fn into_spec(self) -> RiskModelSpec<T> {
        self.0
    }
}

impl<T> Deref for ValidModel<T> {
    type Target = RiskModelSpec<T>;
    fn deref(&self) -> &RiskModelSpec<T> {
        &self.0
    }
}

/// Accepts the model iff mean claims are strictly below the upward drift.
pub fn validate_model<T: Probability>(spec: RiskModelSpec<T>) -> Result<ValidModel<T>> {
    if spec.portfolios().is_empty() {
        return Err(Error::NoPortfolios);
    }
    let claims_mean = spec.claims_mean();
    let drift_mean = spec.drift_mean();
    if claims_mean.is_nan() || drift_mean.is_nan() || claims_mean >= drift_mean {
        return Err(Error::NetProfitViolation {
            claims_mean: claims_mean.to_f64().unwrap_or(f64::NAN),
            drift_mean: drift_mean.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(ValidModel(spec))
}

/// Increments drawn at one time step. All components jump together.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepDraw {
    /// `ΔC^i` per portfolio.
    pub component_jumps: Vec<i64>,
    /// `ΔZ`; always 1 for the unit-drift model.
    pub z_jump: i64,
}

impl StepDraw {
    pub fn claims_total(&self) -> i64 {
        self.component_jumps.iter().sum()
    }
}

/// Increment of `X̂` produced by one step.
pub fn dual_increment(step: &StepDraw) -> i64 {
    step.claims_total() - step.z_jump
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CrossingRecord {
    /// The dual walk exceeded the level at step `tau`, coming from `y_pre`.
    Crossed {
        tau: u64,
        y_pre: i64,
        landing: i64,
        step: StepDraw,
    },
    /// No crossing within `horizon` steps.
    Censored { horizon: u64, final_position: i64 },
}

impl CrossingRecord {
    pub fn is_crossed(&self) -> bool {
        matches!(self, Self::Crossed { .. })
    }
}

/// Identifies the random stream of one trial.
///
/// The stream is a pure function of `(master, index)`, so a trial's draws do
/// not depend on which worker runs it or in which order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialSeed {
    pub master: u64,
    pub index: u64,
}

impl TrialSeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

#[derive(Debug, Clone)]
struct Sampler {
    values: Vec<i64>,
    alias: Option<WeightedAliasIndex<f64>>,
}

impl Sampler {
    fn new<T: Probability>(pmf: &Pmf<T>) -> Self {
        let values: Vec<i64> = pmf.entries().iter().map(|&(v, _)| v).collect();
        let alias = if values.len() > 1 {
            let weights = pmf
                .entries()
                .iter()
                .map(|&(_, p)| p.to_f64().unwrap_or(0.0))
                .collect();
            Some(WeightedAliasIndex::new(weights).expect("validated pmf has positive weights"))
        } else {
            None
        };
        Self { values, alias }
    }

    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> i64 {
        match &self.alias {
            Some(alias) => self.values[alias.sample(rng)],
            None => self.values[0],
        }
    }
}

/// Per-step observation handed to path observers.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    /// Step number, starting at 1.
    pub n: u64,
    /// `X̂(n - 1)`.
    pub pre: i64,
    /// `X̂(n)`.
    pub post: i64,
    pub component_jumps: &'a [i64],
    pub z_jump: i64,
}

/// Samples dual-walk paths of a validated model.
///
/// Alias tables are built once; sampling ignores any truncated tail mass
/// (the table is renormalised).
#[derive(Debug, Clone)]
pub struct Simulator {
    components: Vec<Sampler>,
    perturbation: Option<Sampler>,
}

impl Simulator {
    pub fn new<T: Probability>(model: &ValidModel<T>) -> Self {
        let components = model.portfolios().iter().map(|c| Sampler::new(c)).collect();
        let perturbation = match model.spec() {
            RiskModelSpec::UnitDrift { .. } => None,
            RiskModelSpec::Perturbed { perturbation, .. } => Some(Sampler::new(perturbation)),
        };
        Self {
            components,
            perturbation,
        }
    }

    pub fn portfolio_count(&self) -> usize {
        self.components.len()
    }

    /// Runs the dual walk for up to `horizon` steps, calling `observe` after
    /// each step. Stops early when `observe` returns `false`. Returns the
    /// number of steps taken and the final position.
    pub fn walk<F>(&self, seed: TrialSeed, horizon: u64, mut observe: F) -> (u64, i64)
    where
        F: FnMut(StepView<'_>) -> bool,
    {
        let mut rng = seed.rng();
        let mut jumps = vec![0i64; self.components.len()];
        let mut position = 0i64;
        for n in 1..=horizon {
            let mut total = 0;
            for (slot, sampler) in jumps.iter_mut().zip(&self.components) {
                *slot = sampler.draw(&mut rng);
                total += *slot;
            }
            let z_jump = match &self.perturbation {
                Some(s) => s.draw(&mut rng),
                None => 1,
            };
            let increment = total - z_jump;
            debug_assert!(increment >= -1, "dual increment {increment} below -1");
            let pre = position;
            position += increment;
            let keep_going = observe(StepView {
                n,
                pre,
                post: position,
                component_jumps: &jumps,
                z_jump,
            });
            if !keep_going {
                return (n, position);
            }
        }
        (horizon, position)
    }

    /// First passage of `X̂` strictly above `level`.
    pub fn simulate_to_level(&self, seed: TrialSeed, horizon: u64, level: i64) -> CrossingRecord {
        let mut crossing = None;
        let (_, final_position) = self.walk(seed, horizon, |s| {
            if s.post > level {
                crossing = Some(CrossingRecord::Crossed {
                    tau: s.n,
                    y_pre: s.pre,
                    landing: s.post,
                    step: StepDraw {
                        component_jumps: s.component_jumps.to_vec(),
                        z_jump: s.z_jump,
                    },
                });
                false
            } else {
                true
            }
        });
        crossing.unwrap_or(CrossingRecord::Censored {
            horizon,
            final_position,
        })
    }

    /// The step draws of a trial, for replay checks.
    pub fn replay(&self, seed: TrialSeed, steps: u64) -> Vec<StepDraw> {
        let mut path = Vec::with_capacity(steps as usize);
        self.walk(seed, steps, |s| {
            path.push(StepDraw {
                component_jumps: s.component_jumps.to_vec(),
                z_jump: s.z_jump,
            });
            true
        });
        path
    }
}

/// First passage of the dual walk over level 0.
pub fn simulate_until_crossing<T: Probability>(
    model: &ValidModel<T>,
    horizon: u64,
    seed: TrialSeed,
) -> CrossingRecord {
    Simulator::new(model).simulate_to_level(seed, horizon, 0)
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub trials: u64,
    pub horizon: u64,
    pub master_seed: u64,
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
}

const BATCH: u64 = 4096;

impl MonteCarlo {
    /// Runs `trial(index, counters)` for every trial and sums the counters.
    ///
    /// Counter sums are integer, so the result is independent of batching
    /// and worker count.
    pub fn tally<F>(&self, counters: usize, trial: F) -> Vec<u64>
    where
        F: Fn(u64, &mut [u64]) + Sync,
    {
        let batches = self.trials.div_ceil(BATCH);
        let trials = self.trials;
        let run_batch = |b: u64| {
            let mut local = vec![0u64; counters];
            let end = ((b + 1) * BATCH).min(trials);
            for index in b * BATCH..end {
                trial(index, &mut local);
            }
            local
        };
        let add = |mut a: Vec<u64>, b: Vec<u64>| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        };
        if self.workers == 1 {
            return (0..batches).map(run_batch).fold(vec![0; counters], add);
        }
        let work = || {
            (0..batches)
                .into_par_iter()
                .map(run_batch)
                .reduce(|| vec![0; counters], add)
        };
        if self.workers == 0 {
            work()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .expect("thread pool")
                .install(work)
        }
    }
}

/// Frequency estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub std_err: f64,
    /// Fraction of trials that had not crossed at the horizon and could
    /// still cross later with probability above [`CENSOR_THRESHOLD`].
    pub censored_fraction: f64,
}

impl Estimate {
    pub fn from_counts(hits: u64, censored: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p_hat = hits as f64 / n;
        Self {
            hits,
            trials,
            p_hat,
            std_err: (p_hat * (1.0 - p_hat) / n).sqrt(),
            censored_fraction: censored as f64 / n,
        }
    }
}

/// Adjustment coefficient `R > 0` with `E exp(R·ξ) = 1` for the increment
/// law `ξ`. `None` when no increment is positive (crossing impossible);
/// `Some(0)` when the mean is not negative.
pub fn adjustment_coefficient<T: Probability>(increments: &Pmf<T>) -> Option<f64> {
    let table: Vec<(f64, f64)> = increments
        .entries()
        .iter()
        .map(|&(v, p)| (v as f64, p.to_f64().unwrap_or(0.0)))
        .collect();
    if table.iter().all(|&(v, _)| v <= 0.0) {
        return None;
    }
    let mass: f64 = table.iter().map(|&(_, p)| p).sum();
    let mean: f64 = table.iter().map(|&(v, p)| v * p).sum::<f64>() / mass;
    if mean >= 0.0 {
        return Some(0.0);
    }
    let excess = |r: f64| table.iter().map(|&(v, p)| p * (r * v).exp()).sum::<f64>() / mass - 1.0;
    let mut hi = 1.0;
    while excess(hi) <= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // lo may still be 0 when the root sits below double precision; keep a
    // conservative (smaller) coefficient
    Some(lo)
}

/// Decides whether a non-crossed trial still matters: a walk `gap` units at
/// or below the level crosses later with probability at most
/// `exp(-R (gap + 1))`.
#[derive(Debug, Clone, Copy)]
pub struct CensorRule {
    coefficient: Option<f64>,
}

impl CensorRule {
    pub fn new<T: Probability>(model: &RiskModelSpec<T>) -> Self {
        Self {
            coefficient: adjustment_coefficient(&model.dual_increment_pmf()),
        }
    }

    /// True when `position` below `level` leaves a later-crossing chance
    /// above [`CENSOR_THRESHOLD`].
    pub fn at_risk(&self, position: i64, level: i64) -> bool {
        match self.coefficient {
            None => false,
            Some(r) => {
                let gap = (level - position) as f64;
                r * (gap + 1.0) < -CENSOR_THRESHOLD.ln()
            }
        }
    }

    /// Smallest gap below the level that counts as decided.
    pub fn floor_gap(&self) -> Option<u64> {
        self.coefficient.map(|r| {
            if r > 0.0 {
                (-CENSOR_THRESHOLD.ln() / r).ceil() as u64
            } else {
                u64::MAX
            }
        })
    }
}

/// Horizon putting the Lundberg floor four standard deviations above the
/// mean final position, so fewer than 1e-3 of trials end at risk.
pub fn default_horizon<T: Probability>(model: &ValidModel<T>) -> u64 {
    let increments = model.dual_increment_pmf();
    let floor = match CensorRule::new(model.spec()).floor_gap() {
        None => return 1,
        Some(f) => f as f64,
    };
    let drift = -(increments.expectation() / increments.total_mass())
        .to_f64()
        .unwrap_or(0.0);
    let sd = increments.variance().to_f64().unwrap_or(0.0).sqrt();
    if drift <= 0.0 {
        return u64::MAX;
    }
    let s = (4.0 * sd + (16.0 * sd * sd + 4.0 * drift * floor).sqrt()) / (2.0 * drift);
    (s * s).ceil().max(1.0) as u64
}

/// Monte Carlo estimate of `P(u + X(n) < 0 for some n <= horizon)`.
///
/// Ruin of `X` from capital `u` is the first passage of `X̂` above `u`.
pub fn ruin_probability_estimate<T: Probability>(
    model: &ValidModel<T>,
    u: u64,
    mc: &MonteCarlo,
) -> Estimate {
    let sim = Simulator::new(model);
    let censor = CensorRule::new(model.spec());
    let level = u as i64;
    let counts = mc.tally(2, |index, counts| {
        match sim.simulate_to_level(TrialSeed::new(mc.master_seed, index), mc.horizon, level) {
            CrossingRecord::Crossed { .. } => counts[0] += 1,
            CrossingRecord::Censored { final_position, .. } => {
                if censor.at_risk(final_position, level) {
                    counts[1] += 1;
                }
            }
        }
    });
    Estimate::from_counts(counts[0], counts[1], mc.trials)
}
