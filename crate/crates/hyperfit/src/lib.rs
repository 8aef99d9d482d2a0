//! Discovery of sparse incompressible hyperelastic constitutive models
//! from stress-strain data.
//!
//! The pipeline pairs three sparse regression algorithms (coordinate-
//! descent LASSO, least angle regression, orthogonal matching pursuit)
//! with three model selection criteria (AIC, BIC, K-fold cross-
//! validation), on model libraries built from Mooney-Rivlin, Ogden, and
//! orthotropic invariant features:
//!
//! 1. [`kinematics`] builds deformation gradients for the supported
//!    loading protocols and evaluates their invariants.
//! 2. [`library`] defines the basis terms and their pressure-eliminated
//!    stress contributions.
//! 3. [`assembly`] stacks the weighted per-mode subsystems into a
//!    standardized global regression system.
//! 4. [`solvers`] produce candidate solution paths under a non-negativity
//!    constraint.
//! 5. [`selection`] scores the paths and picks a model complexity.
//! 6. [`refine`] refits the selected terms on the physical system (ridge
//!    least squares, or joint nonlinear least squares when exponential
//!    inner coefficients are active) and applies hard thresholding.
//! 7. [`data`] generates synthetic benchmark datasets and reads/writes
//!    the CSV dataset format.
//! 8. [`pipeline`] orchestrates whole discovery runs and benchmark sweeps
//!    and writes their reports.

pub mod assembly;
pub mod data;
pub mod error;
pub mod kinematics;
pub mod library;
pub mod pipeline;
pub mod refine;
pub mod rng;
pub mod selection;
pub mod solvers;

pub use error::{Error, Result};
