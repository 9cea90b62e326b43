//! Exhaustive enumeration of finite-horizon increment histories.
//!
//! Every history of step draws up to the horizon is visited depth-first and
//! its probability added (with compensated summation) when the queried
//! [`PathEvent`] holds. Branches whose outcome is already decided for every
//! extension stop early. The result is the exact probability of the event on
//! the truncated path space, up to floating-point accumulation.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::{CompensatedSum, Probability};
use crate::pmf::Pmf;
use crate::walk::{RiskModelSpec, StepDraw};

/// Default cap on visited leaves.
pub const DEFAULT_LEAF_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Cmp {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Eq => lhs == rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Gt => lhs > rhs,
        }
    }
}

/// Predicate on a single step `n`: positions `X̂(n-1)`, `X̂(n)` and the
/// draws. Draw conditions are false on plain walks, which carry no draws.
#[derive(Debug, Clone, PartialEq)]
pub enum StepCondition {
    Pre(Cmp, i64),
    Post(Cmp, i64),
    /// `ΔC^i` for the 1-based portfolio `index`.
    Component {
        index: usize,
        cmp: Cmp,
        value: i64,
    },
    ClaimsTotal(Cmp, i64),
    Perturbation(Cmp, i64),
    All(Vec<StepCondition>),
    Any(Vec<StepCondition>),
    Not(Box<StepCondition>),
}

impl StepCondition {
    pub fn eval(&self, pre: i64, post: i64, draw: Option<&StepDraw>) -> bool {
        match self {
            Self::Pre(c, v) => c.holds(pre, *v),
            Self::Post(c, v) => c.holds(post, *v),
            Self::Component { index, cmp, value } => draw
                .and_then(|d| d.component_jumps.get(index.wrapping_sub(1)))
                .is_some_and(|&j| cmp.holds(j, *value)),
            Self::ClaimsTotal(c, v) => draw.is_some_and(|d| c.holds(d.claims_total(), *v)),
            Self::Perturbation(c, v) => draw.is_some_and(|d| c.holds(d.z_jump, *v)),
            Self::All(cs) => cs.iter().all(|c| c.eval(pre, post, draw)),
            Self::Any(cs) => cs.iter().any(|c| c.eval(pre, post, draw)),
            Self::Not(c) => !c.eval(pre, post, draw),
        }
    }
}

/// Predicate over a finite path `X̂(0..=horizon)` and its step draws.
///
/// Times beyond the enumeration horizon are never observed: a first
/// crossing that has not happened by the horizon counts as not happening.
#[derive(Debug, Clone, PartialEq)]
pub enum PathEvent {
    /// `X̂(time) cmp value`.
    PositionAt {
        time: u64,
        cmp: Cmp,
        value: i64,
    },
    /// `X̂(t) <= bound` for every `from <= t <= to`.
    MaxAtMost {
        from: u64,
        to: u64,
        bound: i64,
    },
    /// `X̂(t) >= bound` for every `from <= t <= to`.
    MinAtLeast {
        from: u64,
        to: u64,
        bound: i64,
    },
    /// First time `X̂ > level`, compared with `time`.
    FirstCrossingTime {
        level: i64,
        cmp: Cmp,
        time: u64,
    },
    /// `X̂` exceeds `level` within the horizon and the first such step
    /// satisfies `condition`.
    AtFirstCrossing {
        level: i64,
        condition: StepCondition,
    },
    All(Vec<PathEvent>),
    Any(Vec<PathEvent>),
    Not(Box<PathEvent>),
}

struct Prefix<'a> {
    positions: &'a [i64],
    draws: &'a [Option<&'a StepDraw>],
    horizon: u64,
    max_up: i64,
}

impl Prefix<'_> {
    fn now(&self) -> u64 {
        self.positions.len() as u64 - 1
    }

    fn first_crossing(&self, level: i64) -> Option<u64> {
        self.positions
            .iter()
            .skip(1)
            .position(|&p| p > level)
            .map(|i| i as u64 + 1)
    }

    /// True when no extension up to the horizon can exceed `level`.
    fn cannot_cross(&self, level: i64) -> bool {
        let now = self.now();
        let pos = self.positions[now as usize];
        now >= self.horizon || pos + self.max_up * (self.horizon - now) as i64 <= level
    }
}

fn all3(items: impl Iterator<Item = Option<bool>>) -> Option<bool> {
    let mut undecided = false;
    for s in items {
        match s {
            Some(false) => return Some(false),
            None => undecided = true,
            Some(true) => {}
        }
    }
    if undecided {
        None
    } else {
        Some(true)
    }
}

impl PathEvent {
    /// `Some(v)` when every extension of the prefix gives `v`.
    fn status(&self, prefix: &Prefix<'_>) -> Option<bool> {
        let now = prefix.now();
        match self {
            Self::PositionAt { time, cmp, value } => {
                if *time > prefix.horizon {
                    Some(false)
                } else if now >= *time {
                    Some(cmp.holds(prefix.positions[*time as usize], *value))
                } else {
                    None
                }
            }
            Self::MaxAtMost { from, to, bound } | Self::MinAtLeast { from, to, bound } => {
                let is_max = matches!(self, Self::MaxAtMost { .. });
                let last = now.min(*to);
                if *from <= last {
                    let violated = prefix.positions[*from as usize..=last as usize]
                        .iter()
                        .any(|&p| if is_max { p > *bound } else { p < *bound });
                    if violated {
                        return Some(false);
                    }
                }
                if now >= *to || now >= prefix.horizon {
                    Some(true)
                } else {
                    None
                }
            }
            Self::FirstCrossingTime { level, cmp, time } => match prefix.first_crossing(*level) {
                Some(tau) => Some(cmp.holds(tau as i64, *time as i64)),
                // no crossing by `now`, so tau > now
                None if now >= *time || prefix.cannot_cross(*level) => {
                    Some(matches!(cmp, Cmp::Gt | Cmp::Ge))
                }
                None => None,
            },
            Self::AtFirstCrossing { level, condition } => match prefix.first_crossing(*level) {
                Some(tau) => {
                    let t = tau as usize;
                    Some(condition.eval(
                        prefix.positions[t - 1],
                        prefix.positions[t],
                        prefix.draws[t - 1],
                    ))
                }
                None if prefix.cannot_cross(*level) => Some(false),
                None => None,
            },
            Self::All(events) => all3(events.iter().map(|e| e.status(prefix))),
            Self::Any(events) => {
                all3(events.iter().map(|e| e.status(prefix).map(|v| !v))).map(|v| !v)
            }
            Self::Not(event) => event.status(prefix).map(|v| !v),
        }
    }
}

#[derive(Debug, Clone)]
struct Outcome<T> {
    increment: i64,
    prob: T,
    draw: Option<StepDraw>,
}

/// Enumerates step histories of a risk model or a plain integer walk.
#[derive(Debug, Clone)]
pub struct Enumerator<T = f64> {
    outcomes: Vec<Outcome<T>>,
    max_up: i64,
    budget: u64,
}

impl<T: Probability> Enumerator<T> {
    /// Steps of the dual walk of `model`; one outcome per joint draw of all
    /// components (and the perturbation).
    pub fn for_model(model: &RiskModelSpec<T>) -> Self {
        let mut partial: Vec<(Vec<i64>, T)> = vec![(Vec::new(), T::one())];
        for portfolio in model.portfolios() {
            partial = partial
                .iter()
                .flat_map(|(jumps, p)| {
                    portfolio.entries().iter().map(move |&(v, q)| {
                        let mut next = jumps.clone();
                        next.push(v);
                        (next, *p * q)
                    })
                })
                .collect();
        }
        let z_law = model.perturbation();
        let outcomes = partial
            .into_iter()
            .flat_map(|(jumps, p)| {
                z_law.entries().iter().map(move |&(z, q)| {
                    let draw = StepDraw {
                        component_jumps: jumps.clone(),
                        z_jump: z,
                    };
                    Outcome {
                        increment: draw.claims_total() - z,
                        prob: p * q,
                        draw: Some(draw),
                    }
                })
            })
            .collect();
        Self::from_outcomes(outcomes)
    }

    /// Steps of a plain walk whose positions are the partial sums of
    /// `increments`.
    pub fn for_walk(increments: &Pmf<T>) -> Self {
        let outcomes = increments
            .entries()
            .iter()
            .map(|&(v, p)| Outcome {
                increment: v,
                prob: p,
                draw: None,
            })
            .collect();
        Self::from_outcomes(outcomes)
    }

    fn from_outcomes(outcomes: Vec<Outcome<T>>) -> Self {
        let max_up = outcomes.iter().map(|o| o.increment).max().unwrap_or(0);
        Self {
            outcomes,
            max_up,
            budget: DEFAULT_LEAF_BUDGET,
        }
    }

    /// One-step outcomes as `(increment, probability, draw)`.
    pub fn outcomes(&self) -> impl Iterator<Item = (i64, T, Option<&StepDraw>)> + '_ {
        self.outcomes
            .iter()
            .map(|o| (o.increment, o.prob, o.draw.as_ref()))
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    /// Leaf count without pruning: `(outcomes per step)^horizon`.
    pub fn unpruned_leaves(&self, horizon: u64) -> u128 {
        let base = self.outcomes.len() as u128;
        (0..horizon).fold(1u128, |acc, _| acc.saturating_mul(base))
    }

    /// Exact probability of `event` over histories of length `horizon`.
    pub fn probability(&self, event: &PathEvent, horizon: u64) -> Result<T> {
        let visited = AtomicU64::new(0);
        let root = Prefix {
            positions: &[0],
            draws: &[],
            horizon,
            max_up: self.max_up,
        };
        if let Some(v) = event.status(&root) {
            return Ok(if v { T::one() } else { T::zero() });
        }
        // first-step subtrees run in parallel; merged in outcome order
        let parts: Vec<Result<CompensatedSum<T>>> = self
            .outcomes
            .par_iter()
            .map(|first| {
                let mut positions = Vec::with_capacity(horizon as usize + 1);
                let mut draws = Vec::with_capacity(horizon as usize);
                positions.push(0);
                positions.push(first.increment);
                draws.push(first.draw.as_ref());
                let mut acc = CompensatedSum::new();
                self.descend(
                    event,
                    horizon,
                    &mut positions,
                    &mut draws,
                    first.prob,
                    &mut acc,
                    &visited,
                )?;
                Ok(acc)
            })
            .collect();
        let mut total = CompensatedSum::new();
        for part in parts {
            total.merge(&part?);
        }
        Ok(total.value())
    }

    #[allow(clippy::too_many_arguments)]
    fn descend<'a>(
        &'a self,
        event: &PathEvent,
        horizon: u64,
        positions: &mut Vec<i64>,
        draws: &mut Vec<Option<&'a StepDraw>>,
        prob: T,
        acc: &mut CompensatedSum<T>,
        visited: &AtomicU64,
    ) -> Result<()> {
        let prefix = Prefix {
            positions,
            draws,
            horizon,
            max_up: self.max_up,
        };
        let decided = event.status(&prefix).or_else(|| {
            // every condition resolves by the horizon; anything left open
            // refers to unobserved times
            (prefix.now() >= horizon).then_some(false)
        });
        if let Some(v) = decided {
            if visited.fetch_add(1, Ordering::Relaxed) >= self.budget {
                return Err(Error::BudgetExceeded {
                    budget: self.budget,
                    required: self.unpruned_leaves(horizon),
                });
            }
            if v {
                acc.add(prob);
            }
            return Ok(());
        }
        let here = *positions.last().expect("non-empty path");
        for outcome in &self.outcomes {
            positions.push(here + outcome.increment);
            draws.push(outcome.draw.as_ref());
            let r = self.descend(
                event,
                horizon,
                positions,
                draws,
                prob * outcome.prob,
                acc,
                visited,
            );
            positions.pop();
            draws.pop();
            r?;
        }
        Ok(())
    }
}

/// Exact probability of `event` for the dual walk of `model` up to
/// `horizon`, with the default leaf budget.
pub fn enumerate_event_probability<T: Probability>(
    model: &RiskModelSpec<T>,
    event: &PathEvent,
    horizon: u64,
) -> Result<T> {
    Enumerator::for_model(model).probability(event, horizon)
}

/// `P(R(i) > 0 for 1 <= i <= n | R(n) = k)` by enumeration; `None` when
/// `P(R(n) = k) = 0`.
pub fn oracle_ballot<T: Probability>(increments: &Pmf<T>, n: u64, k: i64) -> Result<Option<T>> {
    oracle_ballot_with_budget(increments, n, k, DEFAULT_LEAF_BUDGET)
}

pub fn oracle_ballot_with_budget<T: Probability>(
    increments: &Pmf<T>,
    n: u64,
    k: i64,
    budget: u64,
) -> Result<Option<T>> {
    if increments.max_value() > 1 {
        return Err(Error::NotSkipFree {
            max: increments.max_value(),
        });
    }
    if n == 0 {
        return Err(Error::DomainError(
            "ballot horizon n must be positive".into(),
        ));
    }
    let oracle = Enumerator::for_walk(increments).with_budget(budget);
    let ends_at_k = PathEvent::PositionAt {
        time: n,
        cmp: Cmp::Eq,
        value: k,
    };
    let marginal = oracle.probability(&ends_at_k, n)?;
    if marginal <= T::zero() {
        return Ok(None);
    }
    let joint = oracle.probability(
        &PathEvent::All(vec![
            PathEvent::MinAtLeast {
                from: 1,
                to: n,
                bound: 1,
            },
            ends_at_k,
        ]),
        n,
    )?;
    Ok(Some(joint / marginal))
}

/// `P(τ(k) = n)` for `1 <= n <= n_max` by enumerating the walk itself.
pub fn oracle_first_passage<T: Probability>(
    increments: &Pmf<T>,
    k: i64,
    n_max: u64,
) -> Result<Vec<T>> {
    let oracle = Enumerator::for_walk(increments);
    (1..=n_max)
        .map(|n| {
            oracle.probability(
                &PathEvent::FirstCrossingTime {
                    level: k - 1,
                    cmp: Cmp::Eq,
                    time: n,
                },
                n,
            )
        })
        .collect()
}
