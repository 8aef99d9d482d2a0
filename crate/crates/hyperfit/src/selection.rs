//! Model selection: information criteria and K-fold cross-validation over
//! solution paths.
//!
//! All three criteria judge a path point through the unpenalized
//! non-negative refit restricted to the point's positive support: the
//! information criteria score the refit's RSS and active count on the
//! full system, and cross-validation scores per-fold refits on held-out
//! rows. The pursuit path already consists of such refits; debiasing the
//! penalized and angular paths the same way makes the complexity
//! trade-off comparable across solvers and keeps the criteria blind to
//! shrinkage.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{standardize_rows, RegressionSystem};
use crate::error::{Error, Result};
use crate::rng::shuffle;
use crate::solvers::{lars_path, lasso_path, omp_path, Algorithm, SolutionPath, OMP_CORR_TOL};

/// RSS floor substituted for an exactly zero residual so the logarithm in
/// the information criteria stays finite.
pub const RSS_FLOOR: f64 = 1e-300;

/// Which selection criterion to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Akaike information criterion.
    Aic,
    /// Bayesian information criterion.
    Bic,
    /// K-fold cross-validation.
    Cv,
}

impl Criterion {
    /// Lowercase label used in file names and reports.
    pub fn label(self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Cv => "cv",
        }
    }

    /// Parse a label.
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Some(Criterion::Aic),
            "bic" => Some(Criterion::Bic),
            "cv" => Some(Criterion::Cv),
            _ => None,
        }
    }
}

/// Akaike information criterion, `n ln(RSS/n) + 2 k`.
pub fn aic(rss: f64, n_obs: usize, n_active: usize) -> f64 {
    let rss = rss.max(RSS_FLOOR);
    n_obs as f64 * (rss / n_obs as f64).ln() + 2.0 * n_active as f64
}

/// Bayesian information criterion, `n ln(RSS/n) + k ln n`.
pub fn bic(rss: f64, n_obs: usize, n_active: usize) -> f64 {
    let rss = rss.max(RSS_FLOOR);
    n_obs as f64 * (rss / n_obs as f64).ln() + n_active as f64 * (n_obs as f64).ln()
}

/// Scores of every path point under one criterion, with the winner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Criterion that produced the result.
    pub criterion: Criterion,
    /// Score per path point (CV: mean validation error at the point's
    /// knob).
    pub scores: Vec<f64>,
    /// Index of the selected path point.
    pub chosen_index: usize,
    /// One-standard-error band of the CV curve (reported for plotting,
    /// not used for selection).
    pub cv_std_err: Option<Vec<f64>>,
}

/// Pick the minimizing index; ties resolve to the smaller active set, then
/// the smaller index.
fn argmin_with_ties(scores: &[f64], n_active: &[usize]) -> usize {
    let mut best = 0usize;
    for i in 1..scores.len() {
        let better =
            scores[i] < scores[best] || (scores[i] == scores[best] && n_active[i] < n_active[best]);
        if better {
            best = i;
        }
    }
    best
}

/// Per-point fit/complexity pairs used by the information criteria: the
/// RSS of the unpenalized non-negative refit restricted to the point's
/// positive support, and the refit's strictly positive count.
///
/// Scoring the refit rather than the shrunk path solution keeps the
/// criteria insensitive to the penalty bias: the pursuit path already
/// stores exact refits, and the penalized/angular paths are debiased here
/// the same way, so all three algorithms trade complexity against the
/// same notion of fit. Residuals at numerical-noise scale are floored
/// relative to the target energy so noiseless ties resolve toward the
/// smaller support.
pub fn refit_scores(system: &RegressionSystem, path: &SolutionPath) -> Vec<(f64, usize)> {
    let floor = (1e-22 * system.target.norm_squared()).max(RSS_FLOOR);
    let mut cache: Vec<(Vec<usize>, (f64, usize))> = Vec::new();
    path.points
        .iter()
        .map(|p| {
            let support: Vec<usize> = p
                .c_scaled
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0.0)
                .map(|(j, _)| j)
                .collect();
            if support.is_empty() {
                return (system.target.norm_squared().max(floor), 0);
            }
            if let Some((_, hit)) = cache.iter().find(|(s, _)| *s == support) {
                return *hit;
            }
            let sub = system.design.select_columns(support.iter());
            let c = crate::solvers::nnls::nnls(&sub, &system.target);
            let rss = (&system.target - &sub * &c).norm_squared().max(floor);
            let k = c.iter().filter(|&&v| v > 0.0).count();
            cache.push((support, (rss, k)));
            (rss, k)
        })
        .collect()
}

/// Score a path with AIC or BIC using per-point non-negative refit RSS.
pub fn select_information_criterion(
    path: &SolutionPath,
    criterion: Criterion,
    n_obs: usize,
    system: &RegressionSystem,
) -> Result<SelectionResult> {
    if path.points.is_empty() {
        return Err(Error::Contract("cannot select from an empty path".into()));
    }
    let score_fn = match criterion {
        Criterion::Aic => aic,
        Criterion::Bic => bic,
        Criterion::Cv => {
            return Err(Error::Contract(
                "CV selection requires the cross-validation driver".into(),
            ))
        }
    };
    let fits = refit_scores(system, path);
    let n_active: Vec<usize> = fits.iter().map(|&(_, k)| k).collect();
    let scores: Vec<f64> = fits
        .iter()
        .map(|&(rss, k)| score_fn(rss, n_obs, k))
        .collect();
    let chosen_index = argmin_with_ties(&scores, &n_active);
    Ok(SelectionResult {
        criterion,
        scores,
        chosen_index,
        cv_std_err: None,
    })
}

/// Solver configuration shared between the full path and the fold paths.
#[derive(Debug, Clone)]
pub enum PathSpec {
    /// Penalized solver on a fixed penalty grid.
    Lasso {
        /// Strictly decreasing penalties (the full system's grid).
        lambdas: Vec<f64>,
    },
    /// Angle-regression path with a step budget.
    Lars {
        /// Maximum number of breakpoints.
        max_steps: usize,
    },
    /// Matching pursuit with a step budget.
    Omp {
        /// Maximum number of selections.
        max_steps: usize,
        /// Relative correlation floor for termination.
        corr_tol: f64,
    },
}

impl PathSpec {
    /// The algorithm this spec drives.
    pub fn algorithm(&self) -> Algorithm {
        match self {
            PathSpec::Lasso { .. } => Algorithm::Lasso,
            PathSpec::Lars { .. } => Algorithm::Lars,
            PathSpec::Omp { .. } => Algorithm::Omp,
        }
    }

    /// Run the solver on a system.
    pub fn run(&self, system: &RegressionSystem) -> Result<SolutionPath> {
        match self {
            PathSpec::Lasso { lambdas } => lasso_path(system, lambdas),
            PathSpec::Lars { max_steps } => lars_path(system, *max_steps),
            PathSpec::Omp {
                max_steps,
                corr_tol,
            } => omp_path(system, *max_steps, *corr_tol),
        }
    }

    /// Default spec for an algorithm on a given system: the automatic
    /// penalty grid for the penalized solver, `min(n_φ, n_obs - 1)` steps
    /// for the stepwise solvers.
    pub fn default_for(algorithm: Algorithm, system: &RegressionSystem) -> Self {
        let max_steps = system.n_retained().min(system.n_obs().saturating_sub(1));
        match algorithm {
            Algorithm::Lasso => PathSpec::Lasso {
                lambdas: crate::solvers::auto_lambda_grid(system),
            },
            Algorithm::Lars => PathSpec::Lars { max_steps },
            Algorithm::Omp => PathSpec::Omp {
                max_steps,
                corr_tol: OMP_CORR_TOL,
            },
        }
    }
}

/// Mean validation error and one-standard-error band per knob of the full
/// path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvCurve {
    /// Knob value per full-path point.
    pub knobs: Vec<f64>,
    /// Mean validation error across folds.
    pub mean: Vec<f64>,
    /// Sample standard deviation across folds divided by √K.
    pub std_err: Vec<f64>,
}

/// K-fold cross-validation of a path specification against the assembled
/// system. Rows are shuffled with `seed` and split into K near-equal
/// folds; per fold, standardization statistics and the solution path are
/// recomputed on the training rows only, and validation errors are
/// compared at matched knob values.
pub fn kfold_cv(
    system: &RegressionSystem,
    spec: &PathSpec,
    full_path: &SolutionPath,
    k: usize,
    seed: u64,
) -> Result<CvCurve> {
    let n = system.weighted_design.nrows();
    if k < 2 {
        return Err(Error::Contract("cross-validation needs K >= 2".into()));
    }
    if n < k {
        return Err(Error::Contract(format!(
            "cannot split {n} observations into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, seed);

    // Near-equal fold sizes: the first n % K folds get one extra row.
    let base = n / k;
    let extra = n % k;
    let mut folds: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut at = 0usize;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(order[at..at + len].to_vec());
        at += len;
    }

    let knobs: Vec<f64> = full_path.points.iter().map(|p| p.knob).collect();
    let n_knobs = knobs.len();

    let fold_errors: Vec<Vec<f64>> = folds
        .par_iter()
        .map(|val_rows| -> Result<Vec<f64>> {
            let mut in_val = vec![false; n];
            for &r in val_rows {
                in_val[r] = true;
            }
            let train_rows: Vec<usize> = (0..n).filter(|&r| !in_val[r]).collect();
            let std = standardize_rows(
                &system.weighted_design,
                &system.weighted_target,
                &train_rows,
            )?;
            let fold_system = RegressionSystem {
                design: std.design,
                target: std.target,
                col_mean: std.col_mean,
                col_std: std.col_std,
                target_mean: std.target_mean,
                weights: system.weights.clone(),
                excluded_cols: std.excluded,
                retained_cols: std.retained,
                weighted_design: system.weighted_design.clone(),
                weighted_target: system.weighted_target.clone(),
                rows: system.rows.clone(),
            };
            let fold_path = spec.run(&fold_system)?;
            if fold_path.points.is_empty() {
                return Err(Error::Contract("empty fold path".into()));
            }
            // Score each knob's candidate support by its non-negative
            // refit on the training rows (same debiasing as the
            // information criteria), cached per distinct support.
            let mut cache: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
            let mut errs = Vec::with_capacity(n_knobs);
            for idx in 0..n_knobs {
                // Match by knob position; stepwise fold paths shorter than
                // the full path repeat their final model.
                let point = &fold_path.points[idx.min(fold_path.points.len() - 1)];
                let support: Vec<usize> = point
                    .c_scaled
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0.0)
                    .map(|(jj, _)| jj)
                    .collect();
                let c_scaled: Vec<f64> = match cache.iter().find(|(s, _)| *s == support) {
                    Some((_, c)) => c.clone(),
                    None => {
                        let mut c = vec![0.0; fold_system.n_retained()];
                        if !support.is_empty() {
                            let sub = fold_system.design.select_columns(support.iter());
                            let refit = crate::solvers::nnls::nnls(&sub, &fold_system.target);
                            for (pos, &jj) in support.iter().enumerate() {
                                c[jj] = refit[pos];
                            }
                        }
                        cache.push((support, c.clone()));
                        c
                    }
                };
                let c_phys = fold_system.back_transform(&c_scaled);
                let intercept = fold_system.intercept(&c_phys);
                let mut sq = 0.0;
                for &r in val_rows {
                    let mut pred = intercept;
                    for (j, c) in c_phys.iter().enumerate() {
                        if *c != 0.0 {
                            pred += c * system.weighted_design[(r, j)];
                        }
                    }
                    let d = system.weighted_target[r] - pred;
                    sq += d * d;
                }
                errs.push(sq / val_rows.len() as f64);
            }
            Ok(errs)
        })
        .collect::<Result<Vec<_>>>()?;

    let kf = k as f64;
    let mut mean = vec![0.0; n_knobs];
    let mut std_err = vec![0.0; n_knobs];
    for i in 0..n_knobs {
        let m = fold_errors.iter().map(|f| f[i]).sum::<f64>() / kf;
        let var = fold_errors
            .iter()
            .map(|f| (f[i] - m) * (f[i] - m))
            .sum::<f64>()
            / (kf - 1.0);
        mean[i] = m;
        std_err[i] = (var / kf).sqrt();
    }
    Ok(CvCurve {
        knobs,
        mean,
        std_err,
    })
}

/// Select from a path under `criterion`. For CV, `cv` must carry the
/// cross-validated curve at the full path's knobs.
pub fn select(
    path: &SolutionPath,
    criterion: Criterion,
    system: &RegressionSystem,
    cv: Option<&CvCurve>,
) -> Result<SelectionResult> {
    let n_obs = system.n_obs();
    match criterion {
        Criterion::Aic | Criterion::Bic => {
            select_information_criterion(path, criterion, n_obs, system)
        }
        Criterion::Cv => {
            let curve = cv.ok_or_else(|| {
                Error::Contract("CV selection requires a cross-validation curve".into())
            })?;
            if curve.mean.len() != path.points.len() {
                return Err(Error::Contract(
                    "CV curve does not match the path length".into(),
                ));
            }
            let n_active: Vec<usize> = path.points.iter().map(|p| p.n_active()).collect();
            let chosen_index = argmin_with_ties(&curve.mean, &n_active);
            Ok(SelectionResult {
                criterion,
                scores: curve.mean.clone(),
                chosen_index,
                cv_std_err: Some(curve.std_err.clone()),
            })
        }
    }
}

/// Residual sum of squares of a scaled coefficient vector on the
/// standardized system.
pub fn standardized_rss(system: &RegressionSystem, c_scaled: &[f64]) -> f64 {
    let r = &system.target - &system.design * DVector::from_column_slice(c_scaled);
    r.norm_squared()
}
