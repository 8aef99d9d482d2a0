//! Regression-system assembly: per-mode RMS weighting, stacking,
//! standardization, and the back-transformation to physical coefficients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::LoadingMode;
use crate::library::{stress_contribution, KinematicContext, ModelLibrary};

/// Stress units of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(missing_docs)]
pub enum Units {
    Pa,
    KPa,
    MPa,
}

impl Units {
    /// Unit label as written in dataset files and reports.
    pub fn label(self) -> &'static str {
        match self {
            Units::Pa => "Pa",
            Units::KPa => "kPa",
            Units::MPa => "MPa",
        }
    }

    /// Parse a unit label.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Pa" => Some(Units::Pa),
            "kPa" => Some(Units::KPa),
            "MPa" => Some(Units::MPa),
            _ => None,
        }
    }
}

/// One measured state: protocol parameters plus the stress values for the
/// mode's measured components (in component order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Protocol parameters (one or two, per the mode kind).
    pub params: Vec<f64>,
    /// Measured stresses, aligned with `mode.measured_components`.
    pub values: Vec<f64>,
}

/// All samples of one deformation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBlock {
    /// The protocol and its measured components.
    pub mode: LoadingMode,
    /// Measured samples.
    pub samples: Vec<Sample>,
}

impl ModeBlock {
    /// Number of scalar observations in the block.
    pub fn n_obs(&self) -> usize {
        self.samples.len() * self.mode.measured_components.len()
    }

    /// Root-mean-square of the block's stress observations.
    pub fn rms(&self) -> f64 {
        let n = self.n_obs();
        if n == 0 {
            return 0.0;
        }
        let sum_sq: f64 = self
            .samples
            .iter()
            .flat_map(|s| s.values.iter())
            .map(|v| v * v)
            .sum();
        (sum_sq / n as f64).sqrt()
    }
}

/// A stress-strain dataset: one block per deformation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Mode blocks in file order.
    pub blocks: Vec<ModeBlock>,
    /// Stress units of all values.
    pub units: Units,
}

impl Dataset {
    /// Total number of scalar observations.
    pub fn n_obs(&self) -> usize {
        self.blocks.iter().map(|b| b.n_obs()).sum()
    }

    /// Validate block shapes and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Contract("dataset has no blocks".into()));
        }
        for (k, block) in self.blocks.iter().enumerate() {
            if block.samples.is_empty() {
                return Err(Error::Contract(format!("block {k} has no samples")));
            }
            for s in &block.samples {
                if s.params.len() != block.mode.kind.n_params() {
                    return Err(Error::Contract(format!(
                        "block {k}: sample has {} parameters, mode takes {}",
                        s.params.len(),
                        block.mode.kind.n_params()
                    )));
                }
                if s.values.len() != block.mode.measured_components.len() {
                    return Err(Error::Contract(format!(
                        "block {k}: sample has {} values, mode measures {}",
                        s.values.len(),
                        block.mode.measured_components.len()
                    )));
                }
                if s.params
                    .iter()
                    .chain(s.values.iter())
                    .any(|v| !v.is_finite())
                {
                    return Err(Error::Contract(format!("block {k}: non-finite sample")));
                }
            }
        }
        Ok(())
    }
}

/// Identifies the dataset origin of one stacked row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowInfo {
    /// Block index within the dataset.
    pub block: usize,
    /// Sample index within the block.
    pub sample: usize,
    /// Component position within the sample.
    pub component: usize,
}

/// The weighted, standardized global regression system together with the
/// scaling metadata needed to move between scaled and physical
/// coefficients.
#[derive(Debug, Clone)]
pub struct RegressionSystem {
    /// Standardized design matrix (retained columns only).
    pub design: DMatrix<f64>,
    /// Centered, weighted target vector.
    pub target: DVector<f64>,
    /// Column means of the weighted matrix (all library columns).
    pub col_mean: Vec<f64>,
    /// Column standard deviations of the weighted matrix (population
    /// convention, all library columns).
    pub col_std: Vec<f64>,
    /// Mean of the weighted target.
    pub target_mean: f64,
    /// Per-block RMS weights.
    pub weights: Vec<f64>,
    /// Library column indices excluded for zero variance.
    pub excluded_cols: Vec<usize>,
    /// Library column indices of the retained design columns, in order.
    pub retained_cols: Vec<usize>,
    /// Weighted, unstandardized design matrix (all library columns).
    pub weighted_design: DMatrix<f64>,
    /// Weighted, unstandardized target.
    pub weighted_target: DVector<f64>,
    /// Row provenance, aligned with the stacked rows.
    pub rows: Vec<RowInfo>,
}

/// Relative variance floor below which a column counts as constant.
const ZERO_VARIANCE_REL: f64 = 1e-12;

/// Per-mode scalar weights `ω_k = P_rms / P_rms_k`, where `P_rms_k` is the
/// RMS over block `k`'s observations and `P_rms` the RMS of the per-block
/// values.
pub fn mode_weights(data: &Dataset) -> Result<Vec<f64>> {
    data.validate()?;
    let per_block: Vec<f64> = data.blocks.iter().map(|b| b.rms()).collect();
    for (k, r) in per_block.iter().enumerate() {
        if *r == 0.0 {
            return Err(Error::DegenerateWeight(format!(
                "block {k} has all-zero stresses"
            )));
        }
    }
    let global = (per_block.iter().map(|r| r * r).sum::<f64>() / per_block.len() as f64).sqrt();
    Ok(per_block.iter().map(|r| global / r).collect())
}

/// Outcome of standardizing a set of rows of a weighted system.
pub(crate) struct Standardized {
    pub design: DMatrix<f64>,
    pub target: DVector<f64>,
    pub col_mean: Vec<f64>,
    pub col_std: Vec<f64>,
    pub target_mean: f64,
    pub retained: Vec<usize>,
    pub excluded: Vec<usize>,
}

/// Standardize `rows` of the weighted system: each retained column is
/// scaled to zero mean and unit population variance, the target is
/// centered, and constant columns are excluded.
pub(crate) fn standardize_rows(
    weighted: &DMatrix<f64>,
    target: &DVector<f64>,
    rows: &[usize],
) -> Result<Standardized> {
    let n = rows.len();
    let p = weighted.ncols();
    if n == 0 {
        return Err(Error::Contract(
            "cannot standardize an empty row set".into(),
        ));
    }
    let nf = n as f64;
    let mut col_mean = vec![0.0; p];
    let mut col_std = vec![0.0; p];
    for j in 0..p {
        let mut sum = 0.0;
        for &r in rows {
            sum += weighted[(r, j)];
        }
        let mu = sum / nf;
        let mut var = 0.0;
        for &r in rows {
            let d = weighted[(r, j)] - mu;
            var += d * d;
        }
        col_mean[j] = mu;
        col_std[j] = (var / nf).sqrt();
    }
    let max_std = col_std.iter().cloned().fold(0.0, f64::max);
    if max_std == 0.0 {
        return Err(Error::Contract(
            "all design columns have zero variance (stress-free data?)".into(),
        ));
    }
    let threshold = ZERO_VARIANCE_REL * max_std;
    let mut retained = Vec::new();
    let mut excluded = Vec::new();
    for (j, std) in col_std.iter().enumerate() {
        if *std < threshold {
            excluded.push(j);
        } else {
            retained.push(j);
        }
    }

    let mut design = DMatrix::zeros(n, retained.len());
    for (jj, &j) in retained.iter().enumerate() {
        for (ii, &r) in rows.iter().enumerate() {
            design[(ii, jj)] = (weighted[(r, j)] - col_mean[j]) / col_std[j];
        }
    }
    let target_mean = rows.iter().map(|&r| target[r]).sum::<f64>() / nf;
    let mut centered = DVector::zeros(n);
    for (ii, &r) in rows.iter().enumerate() {
        centered[ii] = target[r] - target_mean;
    }
    Ok(Standardized {
        design,
        target: centered,
        col_mean,
        col_std,
        target_mean,
        retained,
        excluded,
    })
}

/// Assemble the weighted, standardized regression system for `data` under
/// `lib`. Column `j` of the unweighted system holds the stress
/// contribution of term `j` at every observation; rows of block `k` are
/// scaled by `ω_k`; columns are then standardized and the target centered.
pub fn assemble(data: &Dataset, lib: &ModelLibrary) -> Result<RegressionSystem> {
    let weights = mode_weights(data)?;
    let p = lib.n_terms();
    let n = data.n_obs();

    let mut weighted_design = DMatrix::zeros(n, p);
    let mut weighted_target = DVector::zeros(n);
    let mut rows = Vec::with_capacity(n);

    let mut row = 0;
    for (k, block) in data.blocks.iter().enumerate() {
        let w = weights[k];
        for (si, sample) in block.samples.iter().enumerate() {
            let ctx =
                KinematicContext::for_mode(block.mode.kind, &sample.params, lib.frame.as_ref())?;
            let ncomp = block.mode.measured_components.len();
            for j in 0..p {
                let vals = stress_contribution(lib, j, &block.mode, &ctx, None)?;
                for (ci, v) in vals.iter().enumerate() {
                    weighted_design[(row + ci, j)] = w * v;
                }
            }
            for ci in 0..ncomp {
                weighted_target[row + ci] = w * sample.values[ci];
                rows.push(RowInfo {
                    block: k,
                    sample: si,
                    component: ci,
                });
            }
            row += ncomp;
        }
    }

    let all_rows: Vec<usize> = (0..n).collect();
    let std = standardize_rows(&weighted_design, &weighted_target, &all_rows)?;

    Ok(RegressionSystem {
        design: std.design,
        target: std.target,
        col_mean: std.col_mean,
        col_std: std.col_std,
        target_mean: std.target_mean,
        weights,
        excluded_cols: std.excluded,
        retained_cols: std.retained,
        weighted_design,
        weighted_target,
        rows,
    })
}

impl RegressionSystem {
    /// Number of stacked observations.
    pub fn n_obs(&self) -> usize {
        self.design.nrows()
    }

    /// Number of retained design columns.
    pub fn n_retained(&self) -> usize {
        self.design.ncols()
    }

    /// Back-transform scaled coefficients (one per retained column) to
    /// physical coefficients over all library columns, with zeros at the
    /// excluded ones.
    pub fn back_transform(&self, c_scaled: &[f64]) -> Vec<f64> {
        assert_eq!(
            c_scaled.len(),
            self.retained_cols.len(),
            "scaled coefficients must be dimensioned to the retained columns"
        );
        let mut c = vec![0.0; self.col_std.len()];
        for (jj, &j) in self.retained_cols.iter().enumerate() {
            c[j] = c_scaled[jj] / self.col_std[j];
        }
        c
    }

    /// Intercept created by centering, in weighted stress units:
    /// `target_mean - Σ_j c*_j col_mean_j`.
    pub fn intercept(&self, c_physical: &[f64]) -> f64 {
        let mut b = self.target_mean;
        for (j, c) in c_physical.iter().enumerate() {
            b -= c * self.col_mean[j];
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::ModeKind;
    use crate::library::make_isotropic_library;
    use approx::assert_relative_eq;

    fn toy_dataset(rms_scale: &[f64]) -> Dataset {
        // One UT block per requested scale, with sample values arranged so
        // the block RMS equals the scale.
        let blocks = rms_scale
            .iter()
            .map(|&r| ModeBlock {
                mode: LoadingMode::standard(ModeKind::Ut),
                samples: vec![
                    Sample {
                        params: vec![1.2],
                        values: vec![r],
                    },
                    Sample {
                        params: vec![1.5],
                        values: vec![-r],
                    },
                ],
            })
            .collect();
        Dataset {
            blocks,
            units: Units::Pa,
        }
    }

    #[test]
    fn weights_match_rms_arithmetic() {
        let w = mode_weights(&toy_dataset(&[1.0, 2.0])).unwrap();
        let expected = (2.5f64).sqrt();
        assert_relative_eq!(w[0], expected, epsilon = 1e-12);
        assert_relative_eq!(w[1], expected / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn equal_rms_gives_unit_weights() {
        let w = mode_weights(&toy_dataset(&[3.0, 3.0, 3.0])).unwrap();
        for wi in w {
            assert_relative_eq!(wi, 1.0, epsilon = 1e-12);
        }
        let w = mode_weights(&toy_dataset(&[7.5])).unwrap();
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_block_is_degenerate() {
        let mut data = toy_dataset(&[1.0]);
        for s in &mut data.blocks[0].samples {
            s.values = vec![0.0];
        }
        assert!(matches!(
            mode_weights(&data),
            Err(Error::DegenerateWeight(_))
        ));
    }

    fn forward_dataset() -> (Dataset, ModelLibrary) {
        // Noise-free data generated by 2 (I1 - 3): P11 = 4 (λ - λ⁻²) in UT.
        let lib = make_isotropic_library(2, &[]).unwrap();
        let mode = LoadingMode::standard(ModeKind::Ut);
        let samples: Vec<Sample> = (0..12)
            .map(|i| {
                let l = 1.1 + 0.25 * i as f64;
                Sample {
                    params: vec![l],
                    values: vec![4.0 * (l - l.powi(-2))],
                }
            })
            .collect();
        let data = Dataset {
            blocks: vec![ModeBlock { mode, samples }],
            units: Units::Pa,
        };
        (data, lib)
    }

    #[test]
    fn standardization_invariants() {
        let (data, lib) = forward_dataset();
        let sys = assemble(&data, &lib).unwrap();
        let n = sys.n_obs() as f64;
        for j in 0..sys.n_retained() {
            let col = sys.design.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-10, "column {j} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-10, "column {j} std");
        }
        assert!(sys.target.sum().abs() / n < 1e-10);
    }

    #[test]
    fn destandardizing_reproduces_weighted_matrix() {
        let (data, lib) = forward_dataset();
        let sys = assemble(&data, &lib).unwrap();
        for (jj, &j) in sys.retained_cols.iter().enumerate() {
            for i in 0..sys.n_obs() {
                let back = sys.design[(i, jj)] * sys.col_std[j] + sys.col_mean[j];
                assert_relative_eq!(back, sys.weighted_design[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn prediction_scale_consistency() {
        let (data, lib) = forward_dataset();
        let sys = assemble(&data, &lib).unwrap();
        let c_scaled: Vec<f64> = (0..sys.n_retained())
            .map(|j| 0.3 + 0.1 * j as f64)
            .collect();
        let c_phys = sys.back_transform(&c_scaled);
        let b = sys.intercept(&c_phys);
        let scaled_pred = &sys.design * DVector::from_vec(c_scaled)
            + DVector::from_element(sys.n_obs(), sys.target_mean);
        let phys_pred = &sys.weighted_design * DVector::from_vec(c_phys)
            + DVector::from_element(sys.n_obs(), b);
        for i in 0..sys.n_obs() {
            assert_relative_eq!(scaled_pred[i], phys_pred[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn single_column_roundtrip_recovers_coefficient() {
        let (data, lib) = forward_dataset();
        let sys = assemble(&data, &lib).unwrap();
        // Column for MR(1,0) is the generator; noiseless OLS on the
        // standardized column then back-transformed must recover c = 2.
        let j = 0usize;
        let jj = sys.retained_cols.iter().position(|&c| c == j).unwrap();
        let col = sys.design.column(jj);
        let c_scaled = col.dot(&sys.target) / col.dot(&col);
        let mut scaled = vec![0.0; sys.n_retained()];
        scaled[jj] = c_scaled;
        let c = sys.back_transform(&scaled);
        assert_relative_eq!(c[j], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn excluded_columns_are_recorded_and_zeroed() {
        // P11 in UT for MR terms: the (0,2) term has zero stress only in
        // very specific cases, so instead force a constant column by using
        // identity deformation for an extra synthetic column check.
        let (data, lib) = forward_dataset();
        let sys = assemble(&data, &lib).unwrap();
        // All five columns vary in UT, so nothing should be excluded here.
        assert!(sys.excluded_cols.is_empty());

        // Identity-only dataset: every column is zero -> contract error.
        let mode = LoadingMode::standard(ModeKind::Ut);
        let data = Dataset {
            blocks: vec![ModeBlock {
                mode,
                samples: vec![
                    Sample {
                        params: vec![1.0],
                        values: vec![0.1],
                    },
                    Sample {
                        params: vec![1.0],
                        values: vec![0.2],
                    },
                ],
            }],
            units: Units::Pa,
        };
        assert!(matches!(assemble(&data, &lib), Err(Error::Contract(_))));
    }

    #[test]
    fn block_permutation_preserves_physics() {
        // Two blocks; permuting them permutes rows but the back-transformed
        // single-column OLS coefficient is unchanged.
        let lib = make_isotropic_library(1, &[]).unwrap();
        let make = |kinds: [(ModeKind, f64); 2]| {
            let blocks = kinds
                .iter()
                .map(|&(kind, scale)| {
                    let mode = LoadingMode::standard(kind);
                    let samples = (0..8)
                        .map(|i| {
                            let l = 1.05 + 0.2 * i as f64;
                            let ctx = KinematicContext::for_mode(kind, &[l], None).unwrap();
                            let s = stress_contribution(&lib, 0, &mode, &ctx, None).unwrap();
                            Sample {
                                params: vec![l],
                                values: vec![scale * s[0]],
                            }
                        })
                        .collect();
                    ModeBlock { mode, samples }
                })
                .collect();
            Dataset {
                blocks,
                units: Units::Pa,
            }
        };
        let fit = |data: &Dataset| {
            let sys = assemble(data, &lib).unwrap();
            let jj = 0;
            let col = sys.design.column(jj);
            let c_scaled = col.dot(&sys.target) / col.dot(&col);
            let mut scaled = vec![0.0; sys.n_retained()];
            scaled[jj] = c_scaled;
            sys.back_transform(&scaled)[0]
        };
        let a = fit(&make([(ModeKind::Ut, 2.0), (ModeKind::Ps, 2.0)]));
        let b = fit(&make([(ModeKind::Ps, 2.0), (ModeKind::Ut, 2.0)]));
        assert_relative_eq!(a, b, epsilon = 1e-8);
    }
}
