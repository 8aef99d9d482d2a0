//! Bound-constrained nonlinear least squares (Levenberg-Marquardt with
//! projection onto box bounds and an active-bound set).

use nalgebra::{DMatrix, DVector};

/// A residual/Jacobian pair for `min ||r(x)||²`.
pub trait LeastSquaresProblem {
    /// Residual vector length.
    fn n_residuals(&self) -> usize;
    /// Fill `out` with the residuals at `x`.
    fn residuals(&self, x: &[f64], out: &mut DVector<f64>);
    /// Fill `out` (n_residuals × n_params) with the Jacobian at `x`.
    fn jacobian(&self, x: &[f64], out: &mut DMatrix<f64>);
}

/// Box bounds, one entry per parameter.
#[derive(Debug, Clone)]
pub struct Bounds {
    /// Lower bounds (may be `-inf`).
    pub lower: Vec<f64>,
    /// Upper bounds (may be `inf`).
    pub upper: Vec<f64>,
}

impl Bounds {
    /// Clamp `x` into the box.
    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.max(self.lower[i]).min(self.upper[i]);
        }
    }
}

/// Termination settings.
#[derive(Debug, Clone)]
pub struct LmOptions {
    /// Maximum number of iterations.
    pub max_iter: usize,
    /// Relative cost-decrease threshold.
    pub cost_tol: f64,
    /// Projected-gradient infinity-norm threshold.
    pub grad_tol: f64,
    /// Consecutive rejected steps before declaring divergence.
    pub max_rejects: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            cost_tol: 1e-10,
            grad_tol: 1e-8,
            max_rejects: 20,
        }
    }
}

/// Result of a solve.
#[derive(Debug, Clone)]
pub struct LmOutcome {
    /// Best parameters found.
    pub params: Vec<f64>,
    /// Cost `||r||²` at the best parameters.
    pub cost: f64,
    /// Iterations performed.
    pub iterations: usize,
    /// Whether a convergence test fired (false on divergence or iteration
    /// exhaustion).
    pub converged: bool,
    /// Human-readable termination reason.
    pub message: String,
}

/// Minimize `||r(x)||²` subject to box bounds, starting from `x0`.
pub fn levenberg_marquardt(
    problem: &dyn LeastSquaresProblem,
    x0: &[f64],
    bounds: &Bounds,
    opts: &LmOptions,
) -> LmOutcome {
    let n = problem.n_residuals();
    let m = x0.len();
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);

    let mut r = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, m);
    problem.residuals(&x, &mut r);
    let mut cost = r.norm_squared();

    let mut best_x = x.clone();
    let mut best_cost = cost;

    let mut mu = -1.0; // initialized from the first Jacobian
    let mut rejects = 0usize;
    let mut iterations = 0usize;
    let mut message = "iteration budget exhausted".to_string();
    let mut converged = false;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        problem.jacobian(&x, &mut jac);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r; // half-gradient of the cost

        if mu < 0.0 {
            let max_diag = (0..m).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
            mu = 1e-3 * max_diag.max(1e-12);
        }

        // Projected gradient: a coordinate pinned at a bound with the
        // gradient pushing outward is stationary.
        let at_lower: Vec<bool> = (0..m).map(|i| x[i] <= bounds.lower[i]).collect();
        let at_upper: Vec<bool> = (0..m).map(|i| x[i] >= bounds.upper[i]).collect();
        let mut pg_inf = 0.0f64;
        let mut free: Vec<usize> = Vec::with_capacity(m);
        for i in 0..m {
            let gi = 2.0 * g[i];
            let blocked = (at_lower[i] && gi > 0.0) || (at_upper[i] && gi < 0.0);
            if !blocked {
                pg_inf = pg_inf.max(gi.abs());
                free.push(i);
            }
        }
        if pg_inf < opts.grad_tol {
            message = format!("projected gradient below {:.1e}", opts.grad_tol);
            converged = true;
            break;
        }
        if free.is_empty() {
            message = "all parameters pinned at bounds".into();
            converged = true;
            break;
        }

        // Damped normal equations on the free coordinates.
        let nf = free.len();
        let mut a = DMatrix::zeros(nf, nf);
        let mut b = DVector::zeros(nf);
        for (ii, &i) in free.iter().enumerate() {
            for (kk, &k) in free.iter().enumerate() {
                a[(ii, kk)] = jtj[(i, k)];
            }
            b[ii] = -g[i];
        }
        for ii in 0..nf {
            let d = a[(ii, ii)].max(1e-12);
            a[(ii, ii)] += mu * d;
        }
        let step = match a.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => {
                // Fall back to a steeper, safer damping.
                mu *= 10.0;
                rejects += 1;
                if rejects >= opts.max_rejects {
                    message = "normal equations repeatedly singular".into();
                    break;
                }
                continue;
            }
        };

        let mut x_trial = x.clone();
        for (ii, &i) in free.iter().enumerate() {
            x_trial[i] += step[ii];
        }
        bounds.clamp(&mut x_trial);

        let mut r_trial = DVector::zeros(n);
        problem.residuals(&x_trial, &mut r_trial);
        let cost_trial = r_trial.norm_squared();

        if cost_trial < cost {
            let rel = (cost - cost_trial) / cost.max(1e-300);
            x = x_trial;
            r = r_trial;
            cost = cost_trial;
            if cost < best_cost {
                best_cost = cost;
                best_x = x.clone();
            }
            mu = (mu / 3.0).max(1e-14);
            rejects = 0;
            if rel < opts.cost_tol {
                message = format!("relative cost decrease below {:.1e}", opts.cost_tol);
                converged = true;
                break;
            }
        } else {
            mu *= 2.0;
            rejects += 1;
            if rejects >= opts.max_rejects {
                message = format!("{} consecutive rejected steps", opts.max_rejects);
                break;
            }
            if mu > 1e30 {
                message = "damping overflow".into();
                break;
            }
        }
    }

    LmOutcome {
        params: best_x,
        cost: best_cost,
        iterations,
        converged,
        message,
    }
}
