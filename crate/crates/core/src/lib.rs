//! Discrete-time ruin theory for skip-free integer random walks.
//!
//! * [`pmf`]: exact arithmetic on finite integer probability tables.
//! * [`walk`]: unit-drift and perturbed risk models, dual-walk simulation.
//! * [`combinatorics`]: ballot theorem, cyclic lemma, hitting-time theorem.
//! * [`ruin`]: level-crossing closed forms and their Monte Carlo estimators.
//! * [`oracle`]: exhaustive path enumeration for exact truncated probabilities.
//!
//! Exact computations are generic over the [`Probability`] scalar; the
//! aliases below fix it to `f64` (or `f32` with the `F32` suffix).

pub mod combinatorics;
pub mod error;
pub mod num;
pub mod oracle;
pub mod pmf;
pub mod ruin;
pub mod walk;

pub use error::{Error, Result};
pub use num::{CompensatedSum, Probability};

pub type IntegerPmf = pmf::Pmf<f64>;
pub type ClaimPmf = pmf::ClaimPmf<f64>;
pub type PerturbationPmf = pmf::PerturbationPmf<f64>;
pub type RiskModelSpec = walk::RiskModelSpec<f64>;
pub type ValidModel = walk::ValidModel<f64>;

pub type IntegerPmfF32 = pmf::Pmf<f32>;
pub type ClaimPmfF32 = pmf::ClaimPmf<f32>;
pub type PerturbationPmfF32 = pmf::PerturbationPmf<f32>;
pub type RiskModelSpecF32 = walk::RiskModelSpec<f32>;
