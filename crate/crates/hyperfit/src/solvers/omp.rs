//! Orthogonal matching pursuit with non-negative refits.
//!
//! At each step the inactive column with the largest positive normalized
//! correlation to the residual joins the active set, and the coefficients
//! are re-estimated by non-negative least squares restricted to the active
//! columns. The path stops when the residual is (numerically) orthogonal
//! to every remaining column, when the step budget is exhausted, or when
//! the newly selected column is assigned a zero coefficient.

use nalgebra::DVector;

use crate::assembly::RegressionSystem;
use crate::error::{Error, Result};

use super::{nnls::nnls, Algorithm, PathPoint, SolutionPath};

/// Default relative correlation tolerance for termination.
pub const OMP_CORR_TOL: f64 = 1e-10;

/// Trace the greedy pursuit path for at most `max_steps` selections.
/// `corr_tol` is relative to the initial maximal normalized correlation.
pub fn omp_path(
    system: &RegressionSystem,
    max_steps: usize,
    corr_tol: f64,
) -> Result<SolutionPath> {
    if corr_tol < 0.0 {
        return Err(Error::Contract("corr_tol must be non-negative".into()));
    }
    let x = &system.design;
    let y = &system.target;
    let p = x.ncols();
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();

    let mut residual: DVector<f64> = y.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut points = vec![PathPoint {
        active_set: vec![],
        c_scaled: vec![0.0; p],
        knob: 0.0,
        rss: residual.norm_squared(),
        warning: None,
    }];

    let normalized_corr = |j: usize, r: &DVector<f64>| -> f64 {
        if norms[j] == 0.0 {
            0.0
        } else {
            x.column(j).dot(r) / norms[j]
        }
    };

    let init = (0..p)
        .map(|j| normalized_corr(j, &residual))
        .fold(0.0, f64::max);
    if init <= 0.0 {
        return Ok(SolutionPath {
            points,
            algorithm: Algorithm::Omp,
            truncation: None,
        });
    }
    let floor = corr_tol * init;

    for step in 1..=max_steps {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..p {
            if active.contains(&j) {
                continue;
            }
            let v = normalized_corr(j, &residual);
            if v > floor && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((j, v));
            }
        }
        let Some((j_new, _)) = best else {
            break;
        };
        active.push(j_new);

        let xa = x.select_columns(active.iter());
        let c_active = nnls(&xa, y);
        if c_active[active.len() - 1] == 0.0 {
            active.pop();
            break;
        }
        residual = y - &xa * &c_active;

        let mut c_full = vec![0.0; p];
        for (pos, &j) in active.iter().enumerate() {
            c_full[j] = c_active[pos];
        }
        points.push(PathPoint {
            active_set: active.clone(),
            c_scaled: c_full,
            knob: step as f64,
            rss: residual.norm_squared(),
            warning: None,
        });
    }

    Ok(SolutionPath {
        points,
        algorithm: Algorithm::Omp,
        truncation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::testutil::system_from_raw;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn single_column_fits_in_one_step() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 2.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 4.0]);
        let sys = system_from_raw(x, y);
        let path = omp_path(&sys, 5, OMP_CORR_TOL).unwrap();
        assert_eq!(path.points.len(), 2);
        assert_relative_eq!(path.points[1].c_scaled[0], 2.0, epsilon = 1e-10);
        assert!(path.points[1].rss < 1e-20);
    }

    #[test]
    fn orthonormal_two_sparse_recovered_in_two_steps() {
        let mut x = DMatrix::zeros(4, 4);
        for j in 0..4 {
            x[(j, j)] = 1.0;
        }
        let truth = DVector::from_vec(vec![0.0, 3.0, 0.0, 1.5]);
        let y = &x * &truth;
        let sys = system_from_raw(x, y);
        let path = omp_path(&sys, 4, OMP_CORR_TOL).unwrap();
        // Two steps suffice; the residual is then orthogonal to the rest.
        assert_eq!(path.points.len(), 3);
        assert_eq!(path.points[2].active_set, vec![1, 3]);
        assert_relative_eq!(path.points[2].c_scaled[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(path.points[2].c_scaled[3], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn path_terminates_when_residual_orthogonal() {
        // y lies in the span of column 0; column 1 is orthogonal to y.
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![5.0, 0.0]);
        let sys = system_from_raw(x, y);
        let path = omp_path(&sys, 4, OMP_CORR_TOL).unwrap();
        assert_eq!(path.points.len(), 2);
    }

    #[test]
    fn refit_is_restricted_nnls() {
        use crate::rng::standard_normal;
        let n = 30;
        let p = 6;
        let x = DMatrix::from_fn(n, p, |i, j| standard_normal(21, (i * p + j) as u64));
        let truth = DVector::from_vec(vec![0.0, 2.0, 0.0, 0.0, 1.0, 0.0]);
        let y = &x * &truth + DVector::from_fn(n, |i, _| 0.05 * standard_normal(22, i as u64));
        let sys = system_from_raw(x.clone(), y.clone());
        let path = omp_path(&sys, 4, OMP_CORR_TOL).unwrap();
        let last = path.points.last().unwrap();
        let xa = x.select_columns(last.active_set.iter());
        let refit = nnls(&xa, &y);
        for (pos, &j) in last.active_set.iter().enumerate() {
            assert_relative_eq!(last.c_scaled[j], refit[pos], epsilon = 1e-8);
        }
        // Strictly decreasing RSS until termination.
        for w in path.points.windows(2) {
            assert!(w[1].rss < w[0].rss);
        }
    }
}
