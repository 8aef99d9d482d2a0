//! Non-negative least angle regression with zero-crossing drops.
//!
//! Only positively correlated features are eligible to enter. Coefficients
//! move along the direction that keeps all active correlations equal; a
//! breakpoint occurs when an inactive feature reaches the common
//! correlation (entry) or an active coefficient reaches zero (drop). The
//! path therefore tracks the non-negative LASSO solution path, with the
//! common correlation playing the role of half the penalty.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::assembly::RegressionSystem;
use crate::error::Result;

use super::{Algorithm, PathPoint, SolutionPath};

/// Correlations at or below `rel * initial` count as exhausted.
const CORR_EXHAUSTED_REL: f64 = 1e-12;
/// Steps smaller than this are considered stalled.
const STALL_STEP: f64 = 1e-14;

/// Trace the non-negative angle-regression path for at most `max_steps`
/// breakpoints.
pub fn lars_path(system: &RegressionSystem, max_steps: usize) -> Result<SolutionPath> {
    let x = &system.design;
    let y = &system.target;
    let p = x.ncols();

    let mut c = vec![0.0f64; p];
    let mut residual: DVector<f64> = y.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut truncation = None;

    let mut points = vec![PathPoint {
        active_set: vec![],
        c_scaled: c.clone(),
        knob: 0.0,
        rss: residual.norm_squared(),
        warning: None,
    }];

    let init_corr = (x.transpose() * &residual)
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    if init_corr <= 0.0 {
        return Ok(SolutionPath {
            points,
            algorithm: Algorithm::Lars,
            truncation,
        });
    }
    let corr_floor = CORR_EXHAUSTED_REL * init_corr;

    let mut stalls = 0usize;
    let mut step_index = 0usize;
    while step_index < max_steps {
        let corr = x.transpose() * &residual;

        if active.is_empty() {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..p {
                if corr[j] > corr_floor && best.is_none_or(|(_, v)| corr[j] > v) {
                    best = Some((j, corr[j]));
                }
            }
            match best {
                Some((j, _)) => active.push(j),
                None => break,
            }
        }

        // Common correlation of the active set (equal in exact arithmetic).
        let c_max = active.iter().map(|&j| corr[j]).fold(f64::MIN, f64::max);
        if c_max <= corr_floor {
            break;
        }

        // Equiangular direction d with X_Aᵀ X_A d = 1, so every active
        // correlation decreases at unit rate per unit of path parameter.
        let xa = x.select_columns(active.iter());
        let gram = xa.transpose() * &xa;
        let ones = DVector::from_element(active.len(), 1.0);
        let dir = match solve_spd(&gram, &ones) {
            Some(d) => d,
            None => {
                truncation = Some(format!(
                    "active-set Gram matrix singular at step {step_index}"
                ));
                break;
            }
        };
        let u = &xa * &dir;
        let rates = x.transpose() * &u;

        // Candidate events along the step. Only positively correlated
        // features are eligible to enter.
        let gamma_stop = c_max;
        let mut gamma_entry = f64::INFINITY;
        let mut entry_j = None;
        for j in 0..p {
            if active.contains(&j) || corr[j] <= corr_floor {
                continue;
            }
            let denom = 1.0 - rates[j];
            if denom <= 1e-12 {
                continue;
            }
            let g = (c_max - corr[j]) / denom;
            if g > STALL_STEP && g < gamma_entry {
                gamma_entry = g;
                entry_j = Some(j);
            }
        }
        let mut gamma_drop = f64::INFINITY;
        let mut drop_pos = None;
        for (q, &j) in active.iter().enumerate() {
            if dir[q] < 0.0 {
                let g = -c[j] / dir[q];
                if g < gamma_drop {
                    gamma_drop = g;
                    drop_pos = Some(q);
                }
            }
        }

        let gamma = gamma_stop.min(gamma_entry).min(gamma_drop);
        if gamma <= STALL_STEP {
            stalls += 1;
            if stalls > 1 {
                truncation = Some(format!("path stalled at step {step_index}"));
                break;
            }
        } else {
            stalls = 0;
        }

        for (q, &j) in active.iter().enumerate() {
            c[j] = (c[j] + gamma * dir[q]).max(0.0);
        }
        residual.axpy(-gamma, &u, 1.0);

        let dropped = if gamma_drop <= gamma_entry && gamma_drop <= gamma_stop {
            let q = drop_pos.expect("drop event has a position");
            let j = active.remove(q);
            c[j] = 0.0;
            true
        } else {
            false
        };

        step_index += 1;
        points.push(PathPoint {
            active_set: active.clone(),
            c_scaled: c.clone(),
            knob: step_index as f64,
            rss: residual.norm_squared(),
            warning: None,
        });

        if !dropped {
            if gamma_entry <= gamma_stop {
                active.push(entry_j.expect("entry event has a column"));
            } else {
                // Active correlations exhausted: the path ends at the
                // non-negative least-squares fit of the active set.
                break;
            }
        }
    }

    Ok(SolutionPath {
        points,
        algorithm: Algorithm::Lars,
        truncation,
    })
}

/// Cholesky solve with a jittered retry for nearly singular systems.
fn solve_spd(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = Cholesky::new(gram.clone()) {
        return Some(chol.solve(rhs));
    }
    let mut jittered = gram.clone();
    for i in 0..jittered.nrows() {
        jittered[(i, i)] += 1e-12 * (1.0 + gram[(i, i)].abs());
    }
    Cholesky::new(jittered).map(|chol| chol.solve(rhs))
}
