//! Sparse regression solvers producing candidate solution paths on a
//! standardized regression system.
//!
//! All three algorithms enforce non-negative coefficients: coordinate
//! descent clamps its soft-threshold updates, the angle-regression path
//! admits only positively correlated features and drops active features at
//! zero crossings, and the matching pursuit selects by positive
//! correlation and refits with non-negative least squares.

mod lars;
mod lasso;
pub mod nnls;
mod omp;

pub use lars::lars_path;
pub use lasso::{auto_lambda_grid, kkt_violation, lambda_max, lasso_path};
pub use omp::{omp_path, OMP_CORR_TOL};

use serde::{Deserialize, Serialize};

/// Which solver produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Coordinate-descent penalized LASSO.
    Lasso,
    /// Least angle regression with zero-crossing drops.
    Lars,
    /// Orthogonal matching pursuit.
    Omp,
}

impl Algorithm {
    /// Lowercase label used in file names and reports.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Lasso => "lasso",
            Algorithm::Lars => "lars",
            Algorithm::Omp => "omp",
        }
    }

    /// Parse a label.
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Some(Algorithm::Lasso),
            "lars" => Some(Algorithm::Lars),
            "omp" => Some(Algorithm::Omp),
            _ => None,
        }
    }
}

/// One candidate solution along a path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathPoint {
    /// Active columns (positions into the retained design columns), in
    /// activation order for the stepwise solvers and ascending order for
    /// the penalized solver.
    pub active_set: Vec<usize>,
    /// Scaled coefficients over all retained columns (zeros off the active
    /// set); all non-negative.
    pub c_scaled: Vec<f64>,
    /// The regularization knob: `λ` for the penalized solver, the step
    /// index for the stepwise solvers.
    pub knob: f64,
    /// Residual sum of squares of this solution on the standardized
    /// system.
    pub rss: f64,
    /// Non-fatal solver diagnostics (e.g. sweep-limit termination).
    pub warning: Option<String>,
}

impl PathPoint {
    /// Number of strictly positive coefficients.
    pub fn n_active(&self) -> usize {
        self.c_scaled.iter().filter(|&&c| c > 0.0).count()
    }
}

/// An ordered family of candidate sparse solutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionPath {
    /// Path points, ordered by decreasing penalty or increasing step.
    pub points: Vec<PathPoint>,
    /// Producing algorithm.
    pub algorithm: Algorithm,
    /// Reason the path ended early, if it did.
    pub truncation: Option<String>,
}
