//! Sparse Sobol index estimation in high dimension via randomized
//! multiple pick-freeze sampling and L1-penalized regression.
//!
//! The pipeline: sample a random design matrix whose rows encode freeze
//! sets ([`design`]), run the pick-freeze Monte Carlo engine to get one
//! closed-index estimate per row ([`pickfreeze`]), regress that vector on
//! the design with the LASSO ([`lasso`]), and threshold the solution to
//! recover which variables matter ([`recovery`]). Additive polynomial
//! test models with an exact analytic oracle live in [`model`];
//! closed-form calculators for the error thresholds, failure
//! probabilities and sample-size requirements of the supporting theory
//! live in [`bounds`].
//!
//! Everything numeric is generic over the scalar type ([`Real`], i.e.
//! `f32` or `f64`); `*64` aliases below fix the default precision.
//! All randomness derives from a single 64-bit seed through counter-based
//! streams, so results are reproducible and independent of scheduling.

pub mod bounds;
pub mod design;
pub mod lasso;
pub mod model;
pub mod pickfreeze;
pub mod recovery;
pub mod rng;
pub mod scalar;

pub use design::{Alphabet, DesignMatrix, DesignScheme, ExpanderReport, GramStats, UdpViolation};
pub use model::{AdditiveModel, InputSpec, ModelFn, Polynomial, SobolVector};
pub use scalar::Real;

pub use bounds::{BoundParams, BoundReport, ClassicalCost};
pub use lasso::{KktReport, LassoProblem, LassoSolution};
pub use pickfreeze::{EstimateVector, MonteCarloPlan, PickFreezeSample, SchemeKind, SweepResult};
pub use recovery::{RecoveryReport, SupportComparison};

/// Default-precision aliases.
pub type AdditiveModel64 = AdditiveModel<f64>;
pub type SobolVector64 = SobolVector<f64>;
pub type GramStats64 = GramStats<f64>;
pub type PickFreezeSample64 = PickFreezeSample<f64>;
pub type EstimateVector64 = EstimateVector<f64>;
pub type LassoSolution64 = LassoSolution<f64>;
pub type BoundParams64 = BoundParams<f64>;
pub type BoundReport64 = BoundReport<f64>;
pub type RecoveryReport64 = RecoveryReport<f64>;
