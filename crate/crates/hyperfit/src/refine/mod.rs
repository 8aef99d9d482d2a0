//! Final parameter refinement: refit the selected active set on the
//! weighted, unstandardized system and hard-threshold negligible
//! coefficients.
//!
//! When no tunable exponential coefficients are active the refit is a
//! ridge-regularized non-negative linear least squares solve. Otherwise
//! the linear coefficients and the inner exponential coefficients are
//! optimized jointly by bound-constrained nonlinear least squares with
//! analytic Jacobians.

pub mod nlls;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{mode_weights, Dataset};
use crate::error::{Error, Result};
use crate::library::{
    check_consistency, stress_contribution, stress_contribution_dw, ConsistencyReport,
    EnergyCoefficients, KinematicContext, ModelLibrary,
};
use crate::solvers::nnls::nnls_ridge;
use nlls::{levenberg_marquardt, Bounds, LeastSquaresProblem, LmOptions};

/// Hard-threshold cutoff on refined coefficients (dataset stress units).
pub const HARD_THRESHOLD: f64 = 1e-6;

/// Default ridge regularization weight.
pub const DEFAULT_LAMBDA_R: f64 = 1e-6;

/// Default bounds for the exponential inner coefficients.
pub const W_BOUNDS: (f64, f64) = (1e-3, 1e2);

/// One active term of a discovered model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveTerm {
    /// Library column index.
    pub index: usize,
    /// Report descriptor (e.g. `MR(1,0)`, `Ogden(-3)`, `Ortho(12)`).
    pub descriptor: String,
    /// Physical coefficient (dataset stress units).
    pub coefficient: f64,
    /// Optimized inner coefficient, for exponential terms.
    pub w: Option<f64>,
}

/// Per-mode goodness-of-fit metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    /// Mode label (e.g. `UT`, `SHEAR_FS`).
    pub mode: String,
    /// Coefficient of determination; absent when the block's stress has
    /// zero variance.
    pub r2: Option<f64>,
    /// Root-mean-square error in dataset units.
    pub rmse: f64,
    /// RMSE normalized by the block's RMS stress.
    pub nrmse: f64,
}

/// Fit metrics of a discovered model on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    /// Per-mode metrics, in block order.
    pub per_mode: Vec<ModeMetrics>,
    /// Pooled coefficient of determination over all observations.
    pub overall_r2: Option<f64>,
    /// Pooled RMSE over all observations.
    pub overall_rmse: f64,
    /// Mean of the per-mode NRMSE values.
    pub avg_nrmse: f64,
    /// Mean of the per-mode RMSE values.
    pub avg_rmse: f64,
}

/// Provenance of a discovery run, attached by the pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Sparse solver name.
    pub algorithm: Option<String>,
    /// Selection criterion name.
    pub criterion: Option<String>,
    /// Seed of the run.
    pub seed: Option<u64>,
    /// Wall time of the sparse stage in seconds.
    pub sparse_seconds: f64,
    /// Wall time of the refinement stage in seconds.
    pub refine_seconds: f64,
}

/// A refined sparse constitutive model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredModel {
    /// Active terms after thresholding, in library order.
    pub terms: Vec<ActiveTerm>,
    /// Stress units of the coefficients.
    pub units: String,
    /// Fit metrics against the refinement dataset.
    pub metrics: ModelMetrics,
    /// Linear-elastic consistency report (isotropic libraries only).
    pub consistency: Option<ConsistencyReport>,
    /// Set when the nonlinear refinement did not converge.
    pub non_convergence: Option<String>,
    /// Run provenance.
    pub provenance: Provenance,
}

impl DiscoveredModel {
    /// Library indices of the active terms.
    pub fn active_indices(&self) -> Vec<usize> {
        self.terms.iter().map(|t| t.index).collect()
    }

    /// Expand to full-library coefficients.
    pub fn to_coefficients(&self, lib: &ModelLibrary) -> EnergyCoefficients {
        let mut coeffs = EnergyCoefficients::zeros(lib);
        for t in &self.terms {
            coeffs.c[t.index] = t.coefficient;
            if t.w.is_some() {
                coeffs.w[t.index] = t.w;
            }
        }
        coeffs
    }
}

/// Precomputed per-sample kinematic contexts for a dataset.
pub struct GeometryCache {
    /// contexts[block][sample].
    pub contexts: Vec<Vec<KinematicContext>>,
    /// Per-block weights.
    pub weights: Vec<f64>,
    /// Total number of scalar observations.
    pub n_obs: usize,
}

impl GeometryCache {
    /// Build contexts for every sample of `data` under `lib`'s frame.
    pub fn build(data: &Dataset, lib: &ModelLibrary) -> Result<Self> {
        let weights = mode_weights(data)?;
        let mut contexts = Vec::with_capacity(data.blocks.len());
        for block in &data.blocks {
            let mut per_block = Vec::with_capacity(block.samples.len());
            for sample in &block.samples {
                per_block.push(KinematicContext::for_mode(
                    block.mode.kind,
                    &sample.params,
                    lib.frame.as_ref(),
                )?);
            }
            contexts.push(per_block);
        }
        Ok(Self {
            contexts,
            weights,
            n_obs: data.n_obs(),
        })
    }

    /// Weighted design column of `term` with slot value `w`, stacked in
    /// row order.
    fn weighted_column(
        &self,
        data: &Dataset,
        lib: &ModelLibrary,
        term: usize,
        w: Option<f64>,
    ) -> Result<DVector<f64>> {
        let mut col = DVector::zeros(self.n_obs);
        let mut row = 0;
        for (k, block) in data.blocks.iter().enumerate() {
            for (si, _) in block.samples.iter().enumerate() {
                let vals = stress_contribution(lib, term, &block.mode, &self.contexts[k][si], w)?;
                for v in vals {
                    col[row] = self.weights[k] * v;
                    row += 1;
                }
            }
        }
        Ok(col)
    }

    /// Derivative of the weighted design column with respect to the slot.
    fn weighted_column_dw(
        &self,
        data: &Dataset,
        lib: &ModelLibrary,
        term: usize,
        w: f64,
    ) -> Result<DVector<f64>> {
        let mut col = DVector::zeros(self.n_obs);
        let mut row = 0;
        for (k, block) in data.blocks.iter().enumerate() {
            for (si, _) in block.samples.iter().enumerate() {
                let vals =
                    stress_contribution_dw(lib, term, &block.mode, &self.contexts[k][si], w)?;
                for v in vals {
                    col[row] = self.weights[k] * v;
                    row += 1;
                }
            }
        }
        Ok(col)
    }

    /// Weighted target vector in row order.
    fn weighted_target(&self, data: &Dataset) -> DVector<f64> {
        let mut y = DVector::zeros(self.n_obs);
        let mut row = 0;
        for (k, block) in data.blocks.iter().enumerate() {
            for sample in &block.samples {
                for &v in &sample.values {
                    y[row] = self.weights[k] * v;
                    row += 1;
                }
            }
        }
        y
    }
}

fn build_model(
    lib: &ModelLibrary,
    data: &Dataset,
    active: &[usize],
    c: &[f64],
    w: &[Option<f64>],
    threshold: f64,
    non_convergence: Option<String>,
) -> Result<DiscoveredModel> {
    // Hard thresholding: coefficients below the cutoff drop out of the
    // active set entirely.
    let mut terms = Vec::new();
    for (pos, &idx) in active.iter().enumerate() {
        if c[pos] >= threshold {
            terms.push(ActiveTerm {
                index: idx,
                descriptor: lib.terms[idx].describe(),
                coefficient: c[pos],
                w: w[pos],
            });
        }
    }
    terms.sort_by_key(|t| t.index);

    let mut model = DiscoveredModel {
        terms,
        units: data.units.label().to_string(),
        metrics: ModelMetrics {
            per_mode: vec![],
            overall_r2: None,
            overall_rmse: 0.0,
            avg_nrmse: 0.0,
            avg_rmse: 0.0,
        },
        consistency: None,
        non_convergence,
        provenance: Provenance::default(),
    };
    model.metrics = evaluate_metrics(&model, data, lib)?;
    if !lib.is_orthotropic() {
        model.consistency = Some(check_consistency(lib, &model.to_coefficients(lib))?);
    }
    Ok(model)
}

/// Ridge-regularized non-negative refit of `active` on the weighted,
/// unstandardized system, followed by hard thresholding. The nonlinear
/// slots stay fixed at the library's linearization values.
pub fn refit_linear(
    data: &Dataset,
    lib: &ModelLibrary,
    active: &[usize],
    lambda_r: f64,
    threshold: f64,
) -> Result<DiscoveredModel> {
    if active.is_empty() {
        return Err(Error::DegenerateModel(
            "refinement needs a non-empty active set".into(),
        ));
    }
    data.validate()?;
    let cache = GeometryCache::build(data, lib)?;
    let y = cache.weighted_target(data);
    let mut psi = DMatrix::zeros(cache.n_obs, active.len());
    for (pos, &idx) in active.iter().enumerate() {
        psi.set_column(pos, &cache.weighted_column(data, lib, idx, None)?);
    }
    let c = nnls_ridge(&psi, &y, lambda_r);
    let w: Vec<Option<f64>> = active.iter().map(|&idx| lib.w_bar[idx]).collect();
    build_model(lib, data, active, c.as_slice(), &w, threshold, None)
}

/// Joint residual for the nonlinear refinement: parameters are the active
/// coefficients followed by the active slots' inner coefficients.
pub struct JointProblem<'a> {
    data: &'a Dataset,
    lib: &'a ModelLibrary,
    cache: GeometryCache,
    active: Vec<usize>,
    /// Positions (into `active`) of the terms owning a slot.
    slot_positions: Vec<usize>,
    y: DVector<f64>,
    sqrt_lambda_r: f64,
}

impl JointProblem<'_> {
    fn n_params(&self) -> usize {
        self.active.len() + self.slot_positions.len()
    }

    fn slot_value(&self, x: &[f64], pos: usize) -> Option<f64> {
        self.slot_positions
            .iter()
            .position(|&p| p == pos)
            .map(|s| x[self.active.len() + s])
            .or(self.lib.w_bar[self.active[pos]])
    }
}

/// Build the joint refinement residual problem for external verification
/// (e.g. finite-difference Jacobian checks); parameters are the active
/// coefficients followed by the active slots' inner coefficients.
pub fn joint_problem_for_tests<'a>(
    data: &'a Dataset,
    lib: &'a ModelLibrary,
    active: &[usize],
    lambda_r: f64,
) -> Result<JointProblem<'a>> {
    let cache = GeometryCache::build(data, lib)?;
    let y = cache.weighted_target(data);
    let slot_positions: Vec<usize> = active
        .iter()
        .enumerate()
        .filter(|(_, &idx)| lib.terms[idx].has_nonlinear_slot())
        .map(|(pos, _)| pos)
        .collect();
    Ok(JointProblem {
        data,
        lib,
        cache,
        active: active.to_vec(),
        slot_positions,
        y,
        sqrt_lambda_r: lambda_r.max(0.0).sqrt(),
    })
}

impl LeastSquaresProblem for JointProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.y.len() + self.active.len()
    }

    fn residuals(&self, x: &[f64], out: &mut DVector<f64>) {
        let n = self.y.len();
        let mut pred = DVector::zeros(n);
        for (pos, &idx) in self.active.iter().enumerate() {
            let w = self.slot_value(x, pos);
            let col = self
                .cache
                .weighted_column(self.data, self.lib, idx, w)
                .expect("column evaluation");
            pred.axpy(x[pos], &col, 1.0);
        }
        for i in 0..n {
            out[i] = self.y[i] - pred[i];
        }
        for pos in 0..self.active.len() {
            out[n + pos] = self.sqrt_lambda_r * x[pos];
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut DMatrix<f64>) {
        let n = self.y.len();
        out.fill(0.0);
        for (pos, &idx) in self.active.iter().enumerate() {
            let col = self
                .cache
                .weighted_column(self.data, self.lib, idx, self.slot_value(x, pos))
                .expect("column evaluation");
            for i in 0..n {
                out[(i, pos)] = -col[i];
            }
            out[(n + pos, pos)] = self.sqrt_lambda_r;
        }
        for (s, &pos) in self.slot_positions.iter().enumerate() {
            let idx = self.active[pos];
            let w = self.slot_value(x, pos).expect("slot value");
            let dcol = self
                .cache
                .weighted_column_dw(self.data, self.lib, idx, w)
                .expect("column derivative");
            for i in 0..n {
                out[(i, self.active.len() + s)] = -x[pos] * dcol[i];
            }
        }
    }
}

/// Jointly refit the active coefficients and their exponential inner
/// coefficients, then hard-threshold. Initialization: coefficients from
/// the linearized ridge refit, inner coefficients at the library's
/// linearization values.
pub fn refit_nonlinear(
    data: &Dataset,
    lib: &ModelLibrary,
    active: &[usize],
    lambda_r: f64,
    w_bounds: (f64, f64),
    threshold: f64,
) -> Result<DiscoveredModel> {
    if active.is_empty() {
        return Err(Error::DegenerateModel(
            "refinement needs a non-empty active set".into(),
        ));
    }
    data.validate()?;
    let slot_positions: Vec<usize> = active
        .iter()
        .enumerate()
        .filter(|(_, &idx)| lib.terms[idx].has_nonlinear_slot())
        .map(|(pos, _)| pos)
        .collect();
    if slot_positions.is_empty() {
        return refit_linear(data, lib, active, lambda_r, threshold);
    }

    let cache = GeometryCache::build(data, lib)?;
    let y = cache.weighted_target(data);

    // Linear initialization at the linearization values.
    let mut psi = DMatrix::zeros(cache.n_obs, active.len());
    for (pos, &idx) in active.iter().enumerate() {
        psi.set_column(pos, &cache.weighted_column(data, lib, idx, None)?);
    }
    let c0 = nnls_ridge(&psi, &y, lambda_r);

    let problem = JointProblem {
        data,
        lib,
        cache,
        active: active.to_vec(),
        slot_positions: slot_positions.clone(),
        y,
        sqrt_lambda_r: lambda_r.max(0.0).sqrt(),
    };

    let mut x0: Vec<f64> = c0.iter().copied().collect();
    let mut lower = vec![0.0; active.len()];
    let mut upper = vec![f64::INFINITY; active.len()];
    for &pos in &slot_positions {
        let w_init = lib.w_bar[active[pos]]
            .unwrap_or(1.0)
            .clamp(w_bounds.0, w_bounds.1);
        x0.push(w_init);
        lower.push(w_bounds.0);
        upper.push(w_bounds.1);
    }
    debug_assert_eq!(x0.len(), problem.n_params());

    let outcome = levenberg_marquardt(
        &problem,
        &x0,
        &Bounds { lower, upper },
        &LmOptions::default(),
    );

    let c: Vec<f64> = outcome.params[..active.len()].to_vec();
    let mut w: Vec<Option<f64>> = active.iter().map(|&idx| lib.w_bar[idx]).collect();
    for (s, &pos) in slot_positions.iter().enumerate() {
        w[pos] = Some(outcome.params[active.len() + s]);
    }
    let non_convergence = (!outcome.converged).then(|| outcome.message.clone());
    build_model(lib, data, active, &c, &w, threshold, non_convergence)
}

/// Predictions of a model for every observation of `data`, in row order
/// (unweighted, dataset units).
pub fn predict(model: &DiscoveredModel, data: &Dataset, lib: &ModelLibrary) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(data.n_obs());
    for block in &data.blocks {
        for sample in &block.samples {
            let ctx =
                KinematicContext::for_mode(block.mode.kind, &sample.params, lib.frame.as_ref())?;
            let mut pred = vec![0.0; block.mode.measured_components.len()];
            for term in &model.terms {
                let vals = stress_contribution(lib, term.index, &block.mode, &ctx, term.w)?;
                for (i, v) in vals.iter().enumerate() {
                    pred[i] += term.coefficient * v;
                }
            }
            out.extend(pred);
        }
    }
    Ok(out)
}

/// Goodness-of-fit metrics of `model` against `data`: per-mode R², RMSE,
/// and NRMSE (normalized by the block RMS stress), plus pooled overall
/// values and per-mode averages.
pub fn evaluate_metrics(
    model: &DiscoveredModel,
    data: &Dataset,
    lib: &ModelLibrary,
) -> Result<ModelMetrics> {
    data.validate()?;
    let pred = predict(model, data, lib)?;

    let mut per_mode = Vec::with_capacity(data.blocks.len());
    let mut row = 0usize;
    let mut pooled_sq = 0.0;
    let mut pooled_values: Vec<f64> = Vec::with_capacity(data.n_obs());

    for block in &data.blocks {
        let n = block.n_obs();
        let measured: Vec<f64> = block
            .samples
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .collect();
        let predicted = &pred[row..row + n];
        row += n;

        let mean = measured.iter().sum::<f64>() / n as f64;
        let ss_tot: f64 = measured.iter().map(|v| (v - mean) * (v - mean)).sum();
        let ss_res: f64 = measured
            .iter()
            .zip(predicted)
            .map(|(m, p)| (m - p) * (m - p))
            .sum();
        pooled_sq += ss_res;
        pooled_values.extend_from_slice(&measured);

        let rmse = (ss_res / n as f64).sqrt();
        let rms = block.rms();
        per_mode.push(ModeMetrics {
            mode: block.mode.kind.label().to_string(),
            r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
            rmse,
            nrmse: if rms > 0.0 { rmse / rms } else { f64::NAN },
        });
    }

    let n_total = pooled_values.len() as f64;
    let pooled_mean = pooled_values.iter().sum::<f64>() / n_total;
    let pooled_tot: f64 = pooled_values
        .iter()
        .map(|v| (v - pooled_mean) * (v - pooled_mean))
        .sum();
    Ok(ModelMetrics {
        overall_r2: (pooled_tot > 0.0).then(|| 1.0 - pooled_sq / pooled_tot),
        overall_rmse: (pooled_sq / n_total).sqrt(),
        avg_nrmse: per_mode.iter().map(|m| m.nrmse).sum::<f64>() / per_mode.len() as f64,
        avg_rmse: per_mode.iter().map(|m| m.rmse).sum::<f64>() / per_mode.len() as f64,
        per_mode,
    })
}
