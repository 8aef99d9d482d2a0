//! Non-negative LASSO by cyclic coordinate descent.
//!
//! Minimizes `||y - X c||² + λ ||c||₁` subject to `c >= 0` for a strictly
//! decreasing sequence of penalties, warm-starting each solve from the
//! previous one.

use nalgebra::DVector;

use crate::assembly::RegressionSystem;
use crate::error::{Error, Result};

use super::{Algorithm, PathPoint, SolutionPath};

/// Convergence threshold on the largest per-sweep coefficient change.
const CD_TOL: f64 = 1e-8;
/// Sweep budget per penalty value.
const CD_MAX_SWEEPS: usize = 10_000;

/// Smallest penalty for which the all-zero vector is optimal:
/// `λ_max = 2 max_j x_jᵀ y` (non-negative constraint, so only positive
/// correlations count).
pub fn lambda_max(system: &RegressionSystem) -> f64 {
    let corr = system.design.transpose() * &system.target;
    2.0 * corr.iter().cloned().fold(0.0, f64::max)
}

/// The default path grid: 100 logarithmically spaced penalties from
/// `λ_max` down to `1e-4 λ_max`.
pub fn auto_lambda_grid(system: &RegressionSystem) -> Vec<f64> {
    let lmax = lambda_max(system);
    if lmax <= 0.0 {
        return vec![];
    }
    let n = 100;
    let lmin = 1e-4 * lmax;
    let ratio = (lmin / lmax).ln();
    (0..n)
        .map(|i| lmax * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Solve the non-negative penalized problem along `lambdas` (strictly
/// decreasing, all positive). Pass an empty slice to use the automatic
/// grid.
pub fn lasso_path(system: &RegressionSystem, lambdas: &[f64]) -> Result<SolutionPath> {
    let grid: Vec<f64> = if lambdas.is_empty() {
        auto_lambda_grid(system)
    } else {
        for w in lambdas.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::Contract(
                    "lasso penalties must be strictly decreasing".into(),
                ));
            }
        }
        if lambdas.iter().any(|&l| l <= 0.0) {
            return Err(Error::Contract("lasso penalties must be positive".into()));
        }
        lambdas.to_vec()
    };

    let x = &system.design;
    let y = &system.target;
    let p = x.ncols();
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared()).collect();

    let mut c = vec![0.0f64; p];
    let mut residual: DVector<f64> = y.clone();
    let mut points = Vec::with_capacity(grid.len());

    for &lambda in &grid {
        let mut warning = None;
        let mut converged = false;
        for _sweep in 0..CD_MAX_SWEEPS {
            let mut max_delta = 0.0f64;
            for j in 0..p {
                if col_sq[j] == 0.0 {
                    continue;
                }
                let xj = x.column(j);
                // Correlation with the residual excluding column j's own
                // contribution.
                let rho = xj.dot(&residual) + col_sq[j] * c[j];
                let new = ((rho - 0.5 * lambda) / col_sq[j]).max(0.0);
                let delta = new - c[j];
                if delta != 0.0 {
                    residual.axpy(-delta, &xj, 1.0);
                    c[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta < CD_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            warning = Some(format!(
                "coordinate descent hit the {CD_MAX_SWEEPS}-sweep budget at λ = {lambda:.6e}"
            ));
        }
        let active_set: Vec<usize> = (0..p).filter(|&j| c[j] > 0.0).collect();
        points.push(PathPoint {
            active_set,
            c_scaled: c.clone(),
            knob: lambda,
            rss: residual.norm_squared(),
            warning,
        });
    }

    Ok(SolutionPath {
        points,
        algorithm: Algorithm::Lasso,
        truncation: None,
    })
}

/// Largest violation of the non-negative KKT conditions at a path point:
/// active columns must satisfy `2 x_jᵀ r = λ`, inactive ones
/// `2 x_jᵀ r <= λ`.
pub fn kkt_violation(system: &RegressionSystem, point: &PathPoint) -> f64 {
    let x = &system.design;
    let r = &system.target - x * DVector::from_column_slice(&point.c_scaled);
    let lambda = point.knob;
    let mut worst = 0.0f64;
    for j in 0..x.ncols() {
        let g = 2.0 * x.column(j).dot(&r);
        let v = if point.c_scaled[j] > 0.0 {
            (g - lambda).abs()
        } else {
            (g - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::testutil::system_from_raw;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn orthonormal_system() -> crate::assembly::RegressionSystem {
        let design = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let target = DVector::from_vec(vec![1.0, 0.5]);
        system_from_raw(design, target)
    }

    #[test]
    fn above_lambda_max_everything_is_zero() {
        let sys = orthonormal_system();
        let lmax = lambda_max(&sys);
        assert_relative_eq!(lmax, 2.0, epsilon = 1e-12);
        let path = lasso_path(&sys, &[lmax * 1.5, lmax]).unwrap();
        for pt in &path.points {
            assert!(pt.c_scaled.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn orthonormal_soft_threshold_closed_form() {
        let sys = orthonormal_system();
        let path = lasso_path(&sys, &[0.4]).unwrap();
        let pt = &path.points[0];
        // ĉ_1 = 1.0 → c = 1.0 - λ/2 = 0.8; ĉ_2 = 0.5 → c = 0.3.
        assert_relative_eq!(pt.c_scaled[0], 0.8, epsilon = 1e-9);
        assert_relative_eq!(pt.c_scaled[1], 0.3, epsilon = 1e-9);
    }

    #[test]
    fn tiny_penalty_approaches_nnls() {
        use crate::rng::standard_normal;
        let n = 30;
        let p = 4;
        let x = DMatrix::from_fn(n, p, |i, j| standard_normal(5, (i * p + j) as u64));
        let truth = DVector::from_vec(vec![1.0, 0.0, 2.0, 0.5]);
        let y = &x * &truth;
        let sys = system_from_raw(x.clone(), y.clone());
        let path = lasso_path(&sys, &[1e-9]).unwrap();
        let c = &path.points[0].c_scaled;
        let nn = crate::solvers::nnls::nnls(&x, &y);
        for j in 0..p {
            assert_relative_eq!(c[j], nn[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn kkt_holds_along_auto_grid() {
        use crate::rng::standard_normal;
        let n = 40;
        let p = 6;
        let x = DMatrix::from_fn(n, p, |i, j| standard_normal(11, (i * p + j) as u64));
        let truth = DVector::from_vec(vec![2.0, 0.0, 1.0, 0.0, 0.0, 0.4]);
        let y = &x * &truth + DVector::from_fn(n, |i, _| 0.05 * standard_normal(12, i as u64));
        let sys = system_from_raw(x, y);
        let path = lasso_path(&sys, &[]).unwrap();
        assert_eq!(path.points.len(), 100);
        let scale = lambda_max(&sys).max(1.0);
        for pt in &path.points {
            assert!(
                kkt_violation(&sys, pt) <= 1e-6 * scale,
                "kkt violated at λ = {}",
                pt.knob
            );
        }
        // RSS is non-increasing along decreasing λ.
        for w in path.points.windows(2) {
            assert!(w[1].rss <= w[0].rss + 1e-9);
        }
    }
}
