//! Ballot theorem, cyclic lemma and hitting-time identities for upwards
//! skip-free walks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::num::Probability;
use crate::pmf::Pmf;

/// `P(R(i) > 0 for all 1 <= i <= n | R(n) = k)` for cyclically
/// interchangeable increments bounded above by one: `k/n`, or 0 for `k <= 0`.
pub fn ballot_probability<T: Probability>(n: u64, k: i64) -> Result<T> {
    if n == 0 {
        return Err(Error::DomainError(
            "ballot horizon n must be positive".into(),
        ));
    }
    if k > n as i64 {
        return Err(Error::DomainError(format!(
            "final value {k} unreachable in {n} steps of size at most one"
        )));
    }
    if k <= 0 {
        return Ok(T::zero());
    }
    Ok(T::from_int(k) / T::from_int(n as i64))
}

/// The rotations of a sequence that first reach `-k` at their last step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationCertificate {
    pub sequence: Vec<i64>,
    /// Minus the sequence total.
    pub k: u64,
    /// 0-based start offsets `i`: the rotation is
    /// `(x[i], x[i+1], ..., x[n-1], x[0], ..., x[i-1])`. Sorted ascending.
    pub qualifying_offsets: Vec<usize>,
}

impl RotationCertificate {
    pub fn rotation(&self, offset: usize) -> Vec<i64> {
        let n = self.sequence.len();
        (0..n).map(|j| self.sequence[(offset + j) % n]).collect()
    }

    /// Rechecks each listed rotation and the count against `k`.
    pub fn verify(&self) -> bool {
        self.qualifying_offsets.len() as u64 == self.k
            && self
                .qualifying_offsets
                .iter()
                .all(|&i| first_hits_at_end(&self.rotation(i), -(self.k as i64)))
    }
}

fn first_hits_at_end(seq: &[i64], target: i64) -> bool {
    let mut s = 0;
    for (j, &x) in seq.iter().enumerate() {
        s += x;
        if j + 1 < seq.len() && s <= target {
            return false;
        }
    }
    s == target
}

/// Finds the rotations whose partial sums first reach `-k` at step `n`.
///
/// With `s_j` the partial sums and `-M` their minimum, the qualifying
/// rotations start just after the first visits to the levels
/// `-(M-k+1), ..., -M`.
pub fn qualifying_rotations(sequence: &[i64]) -> Result<RotationCertificate> {
    if let Some(&bad) = sequence.iter().find(|&&x| x < -1) {
        return Err(Error::BadSequence(format!("entry {bad} below -1")));
    }
    let total: i64 = sequence.iter().sum();
    if total >= 0 {
        return Err(Error::BadSequence(format!("sum {total} is not negative")));
    }
    let n = sequence.len();
    let k = -total;
    // first_visit[l] = first j with s_j = -l
    let mut first_visit = vec![0usize];
    let mut s = 0i64;
    for (j, &x) in sequence.iter().enumerate() {
        s += x;
        if -s >= first_visit.len() as i64 {
            // skip-free downwards: new minimum is exactly one below
            first_visit.push(j + 1);
        }
    }
    let depth = first_visit.len() as i64 - 1;
    let mut offsets: Vec<usize> = ((depth - k + 1)..=depth)
        .map(|l| first_visit[l as usize] % n)
        .collect();
    offsets.sort_unstable();
    Ok(RotationCertificate {
        sequence: sequence.to_vec(),
        k: k as u64,
        qualifying_offsets: offsets,
    })
}

fn check_skip_free<T: Probability>(increments: &Pmf<T>, k: i64) -> Result<()> {
    if increments.max_value() > 1 {
        return Err(Error::NotSkipFree {
            max: increments.max_value(),
        });
    }
    if k < 1 {
        return Err(Error::DomainError(format!(
            "level k = {k} must be positive"
        )));
    }
    Ok(())
}

/// `P(τ(k) = n)` for `1 <= n <= n_max` from the hitting-time theorem
/// `n P(τ(k) = n) = k P(R(n) = k)`.
pub fn kemperman_first_passage_pmf<T: Probability>(
    increments: &Pmf<T>,
    k: i64,
    n_max: u64,
) -> Result<BTreeMap<u64, T>> {
    check_skip_free(increments, k)?;
    let mut law = Pmf::delta(0);
    let mut out = BTreeMap::new();
    for n in 1..=n_max {
        law = law.convolve(increments);
        out.insert(n, T::from_int(k) / T::from_int(n as i64) * law.prob(k));
    }
    Ok(out)
}

/// `P(τ(k) = n)` by forward dynamic programming with level `k` absorbing.
pub fn first_passage_pmf_dp<T: Probability>(
    increments: &Pmf<T>,
    k: i64,
    n_max: u64,
) -> Result<BTreeMap<u64, T>> {
    check_skip_free(increments, k)?;
    let down = (-increments.min_value()).max(0);
    // index j holds position k-1-j; the walk starts at index k-1 and falls
    // at most down*n_max below zero
    let width = (k - 1) as usize + (down as u64 * n_max) as usize + 1;
    let mut mass = vec![T::zero(); width];
    mass[(k - 1) as usize] = T::one();
    let mut out = BTreeMap::new();
    for n in 1..=n_max {
        let mut next = vec![T::zero(); width];
        let mut absorbed = T::zero();
        for (idx, &p) in mass.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            let position = k - 1 - idx as i64;
            for &(v, q) in increments.entries() {
                let landing = position + v;
                if landing >= k {
                    absorbed = absorbed + p * q;
                } else {
                    let j = (k - 1 - landing) as usize;
                    if j < width {
                        next[j] = next[j] + p * q;
                    }
                }
            }
        }
        out.insert(n, absorbed);
        mass = next;
    }
    Ok(out)
}
