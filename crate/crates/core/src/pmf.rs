//! Finite-support probability mass functions over the integers.
//!
//! A [`Pmf`] is an explicit table of `(value, probability)` pairs plus a
//! `tail_mass` recording how much probability was cut away when an
//! infinite-support family was truncated. Downstream arithmetic is exact on
//! the table; the tail is carried along so callers can bound the error.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{CompensatedSum, Probability};

#[derive(Debug, Clone, PartialEq)]
pub struct Pmf<T = f64> {
    entries: Vec<(i64, T)>,
    tail_mass: T,
}

/// Builds a PMF from raw `(value, probability)` pairs.
///
/// Duplicate values are merged by summing, zero-probability entries are
/// dropped and the result is sorted by value.
pub fn make_pmf<T: Probability>(entries: impl IntoIterator<Item = (i64, T)>) -> Result<Pmf<T>> {
    Pmf::new(entries)
}

impl<T: Probability> Pmf<T> {
    pub fn new(entries: impl IntoIterator<Item = (i64, T)>) -> Result<Self> {
        Self::with_tail(entries, T::zero())
    }

    /// Builds a truncated PMF whose table carries `1 - tail_mass`.
    pub fn with_tail(entries: impl IntoIterator<Item = (i64, T)>, tail_mass: T) -> Result<Self> {
        let mut raw: Vec<(i64, T)> = entries.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::EmptyPmf);
        }
        for &(value, prob) in &raw {
            if !(prob.is_finite() && prob >= T::zero()) {
                return Err(Error::NegativeProbability {
                    value,
                    prob: prob.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if tail_mass.is_nan() || tail_mass < T::zero() {
            return Err(Error::BadParameter(format!("tail mass {tail_mass} < 0")));
        }
        raw.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(i64, T)> = Vec::with_capacity(raw.len());
        for (value, prob) in raw {
            match merged.last_mut() {
                Some((last, p)) if *last == value => *p = *p + prob,
                _ => merged.push((value, prob)),
            }
        }
        merged.retain(|&(_, p)| p > T::zero());
        let pmf = Self {
            entries: merged,
            tail_mass,
        };
        pmf.validate()?;
        Ok(pmf)
    }

    /// Point mass at `value`.
    pub fn delta(value: i64) -> Self {
        Self {
            entries: vec![(value, T::one())],
            tail_mass: T::zero(),
        }
    }

    /// Checks the type invariants: sorted distinct support, non-negative
    /// probabilities and total mass (table plus tail) equal to one.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyPmf);
        }
        for w in self.entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::BadParameter(format!(
                    "support not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        for &(value, prob) in &self.entries {
            if prob.is_nan() || prob < T::zero() {
                return Err(Error::NegativeProbability {
                    value,
                    prob: prob.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let total = self.total_mass() + self.tail_mass;
        let gap = (total - T::one()).abs();
        if gap.is_nan() || gap > T::mass_tolerance() {
            return Err(Error::MassNotOne {
                total: total.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(i64, T)] {
        &self.entries
    }

    pub fn tail_mass(&self) -> T {
        self.tail_mass
    }

    /// Mass held by the explicit table.
    pub fn total_mass(&self) -> T {
        self.entries
            .iter()
            .map(|&(_, p)| p)
            .collect::<CompensatedSum<T>>()
            .value()
    }

    pub fn min_value(&self) -> i64 {
        self.entries[0].0
    }

    pub fn max_value(&self) -> i64 {
        self.entries[self.entries.len() - 1].0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Probability of exactly `value` (zero off the support).
    pub fn prob(&self, value: i64) -> T {
        match self.entries.binary_search_by_key(&value, |&(v, _)| v) {
            Ok(i) => self.entries[i].1,
            Err(_) => T::zero(),
        }
    }

    /// Table mass at values `>= value`. Does not include `tail_mass`.
    pub fn mass_at_least(&self, value: i64) -> T {
        let start = self.entries.partition_point(|&(v, _)| v < value);
        self.entries[start..]
            .iter()
            .map(|&(_, p)| p)
            .collect::<CompensatedSum<T>>()
            .value()
    }

    /// Table mass at values `<= value`. Does not include `tail_mass`.
    pub fn mass_at_most(&self, value: i64) -> T {
        let end = self.entries.partition_point(|&(v, _)| v <= value);
        self.entries[..end]
            .iter()
            .map(|&(_, p)| p)
            .collect::<CompensatedSum<T>>()
            .value()
    }

    /// Mean over the explicit table; the tail mass is excluded.
    pub fn expectation(&self) -> T {
        self.entries
            .iter()
            .map(|&(v, p)| T::from_int(v) * p)
            .collect::<CompensatedSum<T>>()
            .value()
    }

    /// Variance over the explicit table, renormalised to its own mass.
    pub fn variance(&self) -> T {
        let mass = self.total_mass();
        let mean = self.expectation() / mass;
        self.entries
            .iter()
            .map(|&(v, p)| {
                let d = T::from_int(v) - mean;
                d * d * p
            })
            .collect::<CompensatedSum<T>>()
            .value()
            / mass
    }

    /// Law of `-X`.
    pub fn negate(&self) -> Self {
        Self {
            entries: self.entries.iter().rev().map(|&(v, p)| (-v, p)).collect(),
            tail_mass: self.tail_mass,
        }
    }

    /// Law of `X + offset`.
    pub fn shift(&self, offset: i64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(v, p)| (v + offset, p)).collect(),
            tail_mass: self.tail_mass,
        }
    }

    /// Law of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &Self) -> Self {
        let lo = self.min_value() + other.min_value();
        let width = (self.max_value() - self.min_value() + other.max_value() - other.min_value())
            as usize
            + 1;
        let mut dense = vec![CompensatedSum::<T>::new(); width];
        for &(va, pa) in &self.entries {
            for &(vb, pb) in &other.entries {
                dense[(va + vb - lo) as usize].add(pa * pb);
            }
        }
        let mut tail = self.tail_mass + other.tail_mass - self.tail_mass * other.tail_mass;
        let mut entries = Vec::new();
        for (offset, acc) in dense.iter().enumerate() {
            let p = acc.value();
            if p <= T::zero() {
                continue;
            }
            if p < T::underflow_cutoff() {
                tail = tail + p;
            } else {
                entries.push((lo + offset as i64, p));
            }
        }
        Self {
            entries,
            tail_mass: tail,
        }
    }

    /// `n`-fold convolution power; `n = 0` gives the point mass at zero.
    pub fn power_convolve(&self, n: u32) -> Self {
        let mut result = Self::delta(0);
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.convolve(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.convolve(&base);
            }
        }
        result
    }

    /// Converts the probabilities to another scalar type.
    pub fn cast<U: Probability>(&self) -> Pmf<U> {
        Pmf {
            entries: self
                .entries
                .iter()
                .map(|&(v, p)| (v, U::from_f64_lossy(p.to_f64().unwrap_or(f64::NAN))))
                .collect(),
            tail_mass: U::from_f64_lossy(self.tail_mass.to_f64().unwrap_or(f64::NAN)),
        }
    }
}

/// Free-function form of [`Pmf::expectation`].
pub fn expectation<T: Probability>(pmf: &Pmf<T>) -> T {
    pmf.expectation()
}

/// Free-function form of [`Pmf::convolve`].
pub fn convolve<T: Probability>(a: &Pmf<T>, b: &Pmf<T>) -> Pmf<T> {
    a.convolve(b)
}

/// Free-function form of [`Pmf::power_convolve`].
pub fn power_convolve<T: Probability>(pmf: &Pmf<T>, n: u32) -> Pmf<T> {
    pmf.power_convolve(n)
}

/// Claim-size law: support on the non-negative integers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimPmf<T = f64>(Pmf<T>);

impl<T: Probability> ClaimPmf<T> {
    pub fn new(pmf: Pmf<T>) -> Result<Self> {
        if pmf.min_value() < 0 {
            return Err(Error::NegativeClaim {
                min: pmf.min_value(),
            });
        }
        Ok(Self(pmf))
    }

    pub fn pmf(&self) -> &Pmf<T> {
        &self.0
    }

    /// `P(C >= value)`, counting the truncated tail as lying above every
    /// table value.
    pub fn upper_tail(&self, value: i64) -> T {
        if value <= 0 {
            return T::one();
        }
        self.0.mass_at_least(value) + self.0.tail_mass
    }

    /// Law of the total claim of several independent portfolios.
    pub fn total<'a>(portfolios: impl IntoIterator<Item = &'a ClaimPmf<T>>) -> ClaimPmf<T> {
        let pmf = portfolios
            .into_iter()
            .fold(Pmf::delta(0), |acc, c| acc.convolve(&c.0));
        ClaimPmf(pmf)
    }
}

impl<T> Deref for ClaimPmf<T> {
    type Target = Pmf<T>;
    fn deref(&self) -> &Pmf<T> {
        &self.0
    }
}

impl<T: Probability> TryFrom<Pmf<T>> for ClaimPmf<T> {
    type Error = Error;
    fn try_from(pmf: Pmf<T>) -> Result<Self> {
        Self::new(pmf)
    }
}

/// Perturbation increment law: support bounded above by one.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPmf<T = f64>(Pmf<T>);

impl<T: Probability> PerturbationPmf<T> {
    pub fn new(pmf: Pmf<T>) -> Result<Self> {
        if pmf.max_value() > 1 {
            return Err(Error::NotSkipFree {
                max: pmf.max_value(),
            });
        }
        Ok(Self(pmf))
    }

    pub fn pmf(&self) -> &Pmf<T> {
        &self.0
    }
}

impl<T> Deref for PerturbationPmf<T> {
    type Target = Pmf<T>;
    fn deref(&self) -> &Pmf<T> {
        &self.0
    }
}

impl<T: Probability> TryFrom<Pmf<T>> for PerturbationPmf<T> {
    type Error = Error;
    fn try_from(pmf: Pmf<T>) -> Result<Self> {
        Self::new(pmf)
    }
}

/// Parametric description of an increment law, as written in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Explicit `[value, probability]` pairs.
    Table { entries: Vec<(i64, f64)> },
    /// `p_k = (1 - a) a^k`, `k >= 0`, truncated at tail mass `tolerance`.
    Geometric { a: f64, tolerance: f64 },
    /// Poisson(`lambda`) truncated at tail mass `tolerance`.
    Poisson { lambda: f64, tolerance: f64 },
}

/// Materialises a family into a finite table.
///
/// Infinite families are cut at the smallest `K` whose remaining tail mass
/// is at most the tolerance; the cut mass is recorded as `tail_mass`.
pub fn family_pmf<T: Probability>(family: &Family) -> Result<Pmf<T>> {
    match family {
        Family::Table { entries } => {
            Pmf::new(entries.iter().map(|&(v, p)| (v, T::from_f64_lossy(p))))
        }
        &Family::Geometric { a, tolerance } => {
            check_tolerance(tolerance)?;
            if !(0.0..1.0).contains(&a) {
                return Err(Error::BadParameter(format!(
                    "geometric a = {a} not in [0, 1)"
                )));
            }
            let mut entries = Vec::new();
            let mut power = 1.0f64;
            let mut k = 0i64;
            loop {
                entries.push((k, (1.0 - a) * power));
                power *= a;
                // power = a^(k+1) = P(U > k)
                if power <= tolerance {
                    break;
                }
                k += 1;
            }
            to_truncated(entries, power)
        }
        &Family::Poisson { lambda, tolerance } => {
            check_tolerance(tolerance)?;
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(Error::BadParameter(format!(
                    "poisson lambda = {lambda} < 0"
                )));
            }
            if lambda == 0.0 {
                return Ok(Pmf::delta(0));
            }
            let terms = poisson_terms(lambda, tolerance);
            // tails[k] = sum_{j > k} p_j, accumulated from the far end
            let mut tails = vec![0.0f64; terms.len()];
            let mut acc = 0.0f64;
            for k in (0..terms.len()).rev() {
                tails[k] = acc;
                acc += terms[k];
            }
            let cut = tails
                .iter()
                .position(|&t| t <= tolerance)
                .unwrap_or(terms.len() - 1);
            let entries = terms[..=cut]
                .iter()
                .enumerate()
                .map(|(k, &p)| (k as i64, p))
                .collect();
            to_truncated(entries, tails[cut])
        }
    }
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::BadParameter(format!(
            "truncation tolerance {tolerance} must be positive"
        )));
    }
    Ok(())
}

fn to_truncated<T: Probability>(entries: Vec<(i64, f64)>, tail: f64) -> Result<Pmf<T>> {
    Pmf::with_tail(
        entries.into_iter().map(|(v, p)| (v, T::from_f64_lossy(p))),
        T::from_f64_lossy(tail),
    )
}

/// Poisson probabilities from zero until the terms are negligible next to
/// `tolerance`.
fn poisson_terms(lambda: f64, tolerance: f64) -> Vec<f64> {
    let ln_lambda = lambda.ln();
    let mut ln_factorial = 0.0f64;
    let mut terms = Vec::new();
    let mut k = 0u64;
    loop {
        if k > 0 {
            ln_factorial += (k as f64).ln();
        }
        let p = (-lambda + k as f64 * ln_lambda - ln_factorial).exp();
        terms.push(p);
        if k as f64 > lambda && p < tolerance * 1e-6 {
            break;
        }
        k += 1;
    }
    terms
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(entries: &[(i64, f64)]) -> Pmf {
        Pmf::new(entries.iter().copied()).unwrap()
    }

    #[test]
    fn make_pmf_examples() {
        assert_eq!(pmf(&[(0, 1.0)]), Pmf::delta(0));
        let bern = pmf(&[(0, 0.5), (1, 0.5)]);
        assert_eq!(bern.entries(), &[(0, 0.5), (1, 0.5)]);
        let merged = pmf(&[(0, 0.3), (0, 0.2), (2, 0.5)]);
        assert_eq!(merged.entries(), &[(0, 0.5), (2, 0.5)]);
        assert_eq!(merged.tail_mass(), 0.0);
    }

    #[test]
    fn make_pmf_errors() {
        assert!(matches!(
            make_pmf([(0, -0.1), (1, 1.1)]),
            Err(Error::NegativeProbability { value: 0, .. })
        ));
        assert!(matches!(
            make_pmf([(0, 0.5), (1, 0.4)]),
            Err(Error::MassNotOne { .. })
        ));
        assert!(matches!(
            make_pmf::<f64>(std::iter::empty()),
            Err(Error::EmptyPmf)
        ));
        // within tolerance
        assert!(make_pmf([(0, 0.5), (1, 0.5 + 5e-13)]).is_ok());
        assert!(make_pmf([(0, 0.5), (1, 0.5 + 5e-12)]).is_err());
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(Pmf::<f64>::delta(3).expectation(), 3.0);
        assert_eq!(pmf(&[(0, 0.5), (1, 0.5)]).expectation(), 0.5);
        let geo: Pmf = family_pmf(&Family::Geometric {
            a: 0.5,
            tolerance: 1e-12,
        })
        .unwrap();
        assert!((geo.expectation() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn convolve_examples() {
        let p = pmf(&[(-2, 0.1), (0, 0.6), (3, 0.3)]);
        assert_eq!(Pmf::delta(0).convolve(&p), p);
        let b = pmf(&[(0, 0.5), (1, 0.5)]);
        assert_eq!(b.convolve(&b).entries(), &[(0, 0.25), (1, 0.5), (2, 0.25)]);
        let s = pmf(&[(-1, 0.5), (1, 0.5)]);
        assert!((s.power_convolve(3).prob(1) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn power_convolve_examples() {
        let b = pmf(&[(0, 0.5), (1, 0.5)]);
        assert_eq!(b.power_convolve(0), Pmf::delta(0));
        assert_eq!(b.power_convolve(1), b);
        assert!((b.power_convolve(4).prob(2) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn geometric_family() {
        let zero: Pmf = family_pmf(&Family::Geometric {
            a: 0.0,
            tolerance: 1e-12,
        })
        .unwrap();
        assert_eq!(zero.entries(), &[(0, 1.0)]);

        let geo: Pmf = family_pmf(&Family::Geometric {
            a: 0.5,
            tolerance: 1e-12,
        })
        .unwrap();
        assert_eq!(geo.min_value(), 0);
        assert_eq!(geo.max_value(), 39);
        assert_eq!(geo.len(), 40);
        assert_eq!(geo.prob(1), 0.25);
        assert!(geo.tail_mass() <= 1e-12);
        // 0.5^40
        assert_eq!(geo.tail_mass(), 0.5f64.powi(40));
    }

    #[test]
    fn poisson_family() {
        let p: Pmf = family_pmf(&Family::Poisson {
            lambda: 2.0,
            tolerance: 1e-10,
        })
        .unwrap();
        assert!(p.tail_mass() <= 1e-10);
        assert!((p.prob(3) - (-2.0f64).exp() * 8.0 / 6.0).abs() < 1e-15);
        assert!((p.expectation() - 2.0).abs() < 1e-8);
        // smallest cut: dropping the last table entry would exceed the tolerance
        let last = p.prob(p.max_value());
        assert!(p.tail_mass() + last > 1e-10);

        let zero: Pmf = family_pmf(&Family::Poisson {
            lambda: 0.0,
            tolerance: 1e-10,
        })
        .unwrap();
        assert_eq!(zero, Pmf::delta(0));
    }

    #[test]
    fn family_errors() {
        let bad = [
            Family::Geometric {
                a: 1.0,
                tolerance: 1e-12,
            },
            Family::Geometric {
                a: -0.1,
                tolerance: 1e-12,
            },
            Family::Geometric {
                a: 0.5,
                tolerance: 0.0,
            },
            Family::Poisson {
                lambda: -1.0,
                tolerance: 1e-12,
            },
        ];
        for f in &bad {
            assert!(
                matches!(family_pmf::<f64>(f), Err(Error::BadParameter(_))),
                "{f:?}"
            );
        }
    }

    #[test]
    fn table_family_as_perturbation() {
        let z: Pmf = family_pmf(&Family::Table {
            entries: vec![(-1, 0.6), (1, 0.4)],
        })
        .unwrap();
        assert!(PerturbationPmf::new(z.clone()).is_ok());
        assert!(matches!(
            ClaimPmf::new(z),
            Err(Error::NegativeClaim { min: -1 })
        ));
        assert!(matches!(
            PerturbationPmf::new(pmf(&[(0, 0.5), (2, 0.5)])),
            Err(Error::NotSkipFree { max: 2 })
        ));
    }

    #[test]
    fn claim_upper_tail_includes_truncated_mass() {
        let geo = ClaimPmf::new(
            family_pmf::<f64>(&Family::Geometric {
                a: 0.5,
                tolerance: 1e-12,
            })
            .unwrap(),
        )
        .unwrap();
        assert!((geo.upper_tail(2) - 0.25).abs() < 1e-15);
        assert_eq!(geo.upper_tail(0), 1.0);
        assert_eq!(geo.upper_tail(100), geo.tail_mass());
    }

    #[test]
    fn underflow_moves_to_tail() {
        let tiny = pmf(&[(0, 1.0 - 1e-160), (1, 1e-160)]);
        let sq = tiny.convolve(&tiny);
        // 1e-320 is below the cutoff: moved to the tail; 2e-160 survives
        assert_eq!(sq.len(), 2);
        assert!(sq.tail_mass() > 0.0 && sq.tail_mass() < 1e-300);
        assert!(sq.validate().is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let b = Pmf::<f32>::new([(0, 0.5f32), (1, 0.5)]).unwrap();
        assert!((b.power_convolve(4).prob(2) - 0.375).abs() < 1e-6);
        let g: Pmf<f32> = family_pmf(&Family::Geometric {
            a: 0.5,
            tolerance: 1e-6,
        })
        .unwrap();
        assert!((g.expectation() - 1.0).abs() < 1e-4);
    }
}
