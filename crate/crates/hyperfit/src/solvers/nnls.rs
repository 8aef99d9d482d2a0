//! Non-negative least squares by the Lawson-Hanson active-set method.

use nalgebra::{DMatrix, DVector};

/// Solve `min ||A x - b||²` subject to `x >= 0`.
///
/// Classic active-set iteration: grow the passive set by the most positive
/// dual component, solve the unconstrained problem on the passive set, and
/// step back along the segment to the previous iterate whenever a passive
/// coefficient would turn non-positive. A candidate whose restricted
/// solve immediately returns non-positive is rejected for the current
/// pass, as in the original algorithm.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 || a.nrows() == 0 {
        return x;
    }
    let mut passive = vec![false; n];
    // Candidates rejected in the current pass (cleared on any successful
    // passive-set change).
    let mut rejected = vec![false; n];

    // Dual feasibility tolerance, on the scale of Aᵀb.
    let dual_scale = (a.transpose() * b).amax().max(f64::MIN_POSITIVE);
    let dual_tol = 1e-12 * dual_scale;

    let max_outer = 10 * n + 20;
    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let mut best = None;
        for j in 0..n {
            if !passive[j] && !rejected[j] && w[j] > dual_tol {
                match best {
                    Some((_, wv)) if wv >= w[j] => {}
                    _ => best = Some((j, w[j])),
                }
            }
        }
        let Some((j_new, _)) = best else {
            break;
        };
        passive[j_new] = true;

        let mut inner_ok = true;
        for _inner in 0..(10 * n + 20) {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            if idx.is_empty() {
                inner_ok = false;
                break;
            }
            let z = restricted_lstsq(a, b, &idx);
            let z_max = z.iter().cloned().fold(0.0, f64::max);
            let z_floor = 1e-13 * z_max;
            if z.iter().all(|&v| v > z_floor) {
                for (pos, &j) in idx.iter().enumerate() {
                    x[j] = z[pos];
                }
                break;
            }
            // Step back: α = min over offending coefficients of
            // x / (x - z).
            let mut alpha = f64::INFINITY;
            for (pos, &j) in idx.iter().enumerate() {
                if z[pos] <= z_floor {
                    let denom = x[j] - z[pos];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (pos, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[pos] - x[j]);
            }
            // Remove coefficients driven to (numerical) zero.
            let x_max = idx.iter().map(|&j| x[j]).fold(0.0, f64::max);
            let x_floor = 1e-13 * x_max;
            for &j in &idx {
                if x[j] <= x_floor {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }

        if !passive[j_new] || !inner_ok {
            // The candidate was pushed straight back out: reject it for
            // this pass so the next-best dual component gets a chance.
            rejected[j_new] = true;
        } else {
            rejected.fill(false);
        }
    }
    x
}

/// Unconstrained least squares on the given columns (SVD-based).
fn restricted_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> Vec<f64> {
    if idx.is_empty() {
        return Vec::new();
    }
    let sub = a.select_columns(idx.iter());
    let svd = sub.svd(true, true);
    let sol = svd
        .solve(b, 1e-13 * svd.singular_values.max())
        .expect("svd solve");
    sol.iter().copied().collect()
}

/// Ridge-regularized NNLS: `min ||A x - b||² + λ ||x||²` with `x >= 0`,
/// solved on the augmented system `[A; √λ I]`.
pub fn nnls_ridge(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> DVector<f64> {
    if lambda <= 0.0 {
        return nnls(a, b);
    }
    let (n, p) = (a.nrows(), a.ncols());
    let mut aug = DMatrix::zeros(n + p, p);
    aug.view_mut((0, 0), (n, p)).copy_from(a);
    let sqrt_l = lambda.sqrt();
    for j in 0..p {
        aug[(n + j, j)] = sqrt_l;
    }
    let mut baug = DVector::zeros(n + p);
    baug.rows_mut(0, n).copy_from(b);
    nnls(&aug, &baug)
}
