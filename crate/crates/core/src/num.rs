//! Scalar abstraction for probabilities.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point type used to carry probability mass.
///
/// Everything exact (PMF arithmetic, the combinatorial identities, the
/// enumeration oracle, closed forms) is generic over this trait. Monte Carlo
/// frequencies are plain `f64`.
pub trait Probability:
    Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Allowed deviation of total mass from one.
    fn mass_tolerance() -> Self;

    /// Entries below this are moved into `tail_mass` during convolution.
    fn underflow_cutoff() -> Self;

    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(Self::nan)
    }

    fn from_count(value: usize) -> Self {
        Self::from_usize(value).unwrap_or_else(Self::nan)
    }

    fn from_int(value: i64) -> Self {
        Self::from_i64(value).unwrap_or_else(Self::nan)
    }
}

impl Probability for f64 {
    fn mass_tolerance() -> Self {
        1e-12
    }

    fn underflow_cutoff() -> Self {
        1e-300
    }
}

impl Probability for f32 {
    fn mass_tolerance() -> Self {
        1e-5
    }

    fn underflow_cutoff() -> Self {
        1e-37
    }
}

/// Kahan-Babuska compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Probability> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation = self.compensation + ((self.sum - t) + value);
        } else {
            self.compensation = self.compensation + ((value - t) + self.sum);
        }
        self.sum = t;
    }

    /// Folds another accumulator into this one, keeping both error terms.
    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

impl<T: Probability> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}
