//! Deformation kinematics: loading modes, deformation gradients, and the
//! isotropic/anisotropic invariants they induce.
//!
//! Every loading protocol supported by the fitting pipeline is an
//! incompressible deformation with an explicit gradient, so `det F = 1`
//! holds exactly (up to rounding) for all gradients produced here.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labels for the first Piola-Kirchhoff stress components that a test
/// protocol can measure. `P11`/`P22`/`P12` refer to the laboratory axes of
/// the isotropic protocols; the `f`/`s`/`n` labels refer to the material
/// frame of the orthotropic protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(missing_docs)]
pub enum StressComponent {
    P11,
    P22,
    P12,
    Pff,
    Pnn,
    Pfs,
    Psf,
    Pfn,
    Pnf,
    Psn,
    Pns,
}

impl StressComponent {
    /// Matrix indices (row, column) of this component, with the material
    /// frame mapped onto the laboratory axes (f, s, n) = (1, 2, 3).
    pub fn indices(self) -> (usize, usize) {
        match self {
            StressComponent::P11 | StressComponent::Pff => (0, 0),
            StressComponent::P22 => (1, 1),
            StressComponent::P12 | StressComponent::Pfs => (0, 1),
            StressComponent::Pnn => (2, 2),
            StressComponent::Psf => (1, 0),
            StressComponent::Pfn => (0, 2),
            StressComponent::Pnf => (2, 0),
            StressComponent::Psn => (1, 2),
            StressComponent::Pns => (2, 1),
        }
    }

    /// Parse a component label as it appears in dataset files.
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "P11" => StressComponent::P11,
            "P22" => StressComponent::P22,
            "P12" => StressComponent::P12,
            "Pff" => StressComponent::Pff,
            "Pnn" => StressComponent::Pnn,
            "Pfs" => StressComponent::Pfs,
            "Psf" => StressComponent::Psf,
            "Pfn" => StressComponent::Pfn,
            "Pnf" => StressComponent::Pnf,
            "Psn" => StressComponent::Psn,
            "Pns" => StressComponent::Pns,
            _ => return None,
        })
    }

    /// Label used in dataset files and reports.
    pub fn label(self) -> &'static str {
        match self {
            StressComponent::P11 => "P11",
            StressComponent::P22 => "P22",
            StressComponent::P12 => "P12",
            StressComponent::Pff => "Pff",
            StressComponent::Pnn => "Pnn",
            StressComponent::Pfs => "Pfs",
            StressComponent::Psf => "Psf",
            StressComponent::Pfn => "Pfn",
            StressComponent::Pnf => "Pnf",
            StressComponent::Psn => "Psn",
            StressComponent::Pns => "Pns",
        }
    }
}

/// Deformation protocol kinds.
///
/// `Ut`/`Ss`/`Ps`/`Bt`/`Ebt` are the classical isotropic protocols on the
/// laboratory axes; `AnisoBt` is biaxial extension in the fiber-normal
/// plane of an orthotropic sample; the six `Shear*` kinds are the triaxial
/// simple-shear protocols of the material frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(missing_docs)]
pub enum ModeKind {
    Ut,
    Ss,
    Ps,
    Bt,
    Ebt,
    AnisoBt,
    ShearFs,
    ShearSf,
    ShearFn,
    ShearNf,
    ShearSn,
    ShearNs,
}

impl ModeKind {
    /// Number of scalar parameters of the protocol (stretches or shears).
    pub fn n_params(self) -> usize {
        match self {
            ModeKind::Bt | ModeKind::AnisoBt => 2,
            _ => 1,
        }
    }

    /// Whether the parameters are stretches (must be positive) rather than
    /// shear amounts.
    pub fn params_are_stretches(self) -> bool {
        matches!(
            self,
            ModeKind::Ut | ModeKind::Ps | ModeKind::Bt | ModeKind::Ebt | ModeKind::AnisoBt
        )
    }

    /// The diagonal axis whose nominal stress vanishes by the boundary
    /// conditions of the protocol, determining the hydrostatic pressure.
    /// Shear protocols return `None`: only their pressure-free shear
    /// components are measurable.
    pub fn zero_stress_axis(self) -> Option<usize> {
        match self {
            ModeKind::Ut | ModeKind::Ss | ModeKind::Ps | ModeKind::Bt | ModeKind::Ebt => Some(2),
            ModeKind::AnisoBt => Some(1),
            _ => None,
        }
    }

    /// Stress components that the boundary conditions of this protocol
    /// determine.
    pub fn determinable_components(self) -> &'static [StressComponent] {
        match self {
            ModeKind::Ut | ModeKind::Ps | ModeKind::Bt | ModeKind::Ebt => {
                &[StressComponent::P11, StressComponent::P22]
            }
            ModeKind::Ss => &[
                StressComponent::P11,
                StressComponent::P22,
                StressComponent::P12,
            ],
            ModeKind::AnisoBt => &[StressComponent::Pff, StressComponent::Pnn],
            ModeKind::ShearFs => &[StressComponent::Pfs],
            ModeKind::ShearSf => &[StressComponent::Psf],
            ModeKind::ShearFn => &[StressComponent::Pfn],
            ModeKind::ShearNf => &[StressComponent::Pnf],
            ModeKind::ShearSn => &[StressComponent::Psn],
            ModeKind::ShearNs => &[StressComponent::Pns],
        }
    }

    /// Label used in dataset files.
    pub fn label(self) -> &'static str {
        match self {
            ModeKind::Ut => "UT",
            ModeKind::Ss => "SS",
            ModeKind::Ps => "PS",
            ModeKind::Bt => "BT",
            ModeKind::Ebt => "EBT",
            ModeKind::AnisoBt => "ANISO_BT",
            ModeKind::ShearFs => "SHEAR_FS",
            ModeKind::ShearSf => "SHEAR_SF",
            ModeKind::ShearFn => "SHEAR_FN",
            ModeKind::ShearNf => "SHEAR_NF",
            ModeKind::ShearSn => "SHEAR_SN",
            ModeKind::ShearNs => "SHEAR_NS",
        }
    }

    /// Parse a dataset-file label.
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "UT" => ModeKind::Ut,
            "SS" => ModeKind::Ss,
            "PS" => ModeKind::Ps,
            "BT" => ModeKind::Bt,
            "EBT" => ModeKind::Ebt,
            "ANISO_BT" => ModeKind::AnisoBt,
            "SHEAR_FS" => ModeKind::ShearFs,
            "SHEAR_SF" => ModeKind::ShearSf,
            "SHEAR_FN" => ModeKind::ShearFn,
            "SHEAR_NF" => ModeKind::ShearNf,
            "SHEAR_SN" => ModeKind::ShearSn,
            "SHEAR_NS" => ModeKind::ShearNs,
            _ => return None,
        })
    }
}

/// A deformation protocol together with the stress components recorded for
/// it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingMode {
    /// Protocol kind.
    pub kind: ModeKind,
    /// Components measured in this protocol, in dataset column order.
    pub measured_components: Vec<StressComponent>,
}

impl LoadingMode {
    /// A mode measuring the given components, validated against the kinds
    /// the protocol can determine.
    pub fn new(kind: ModeKind, measured_components: Vec<StressComponent>) -> Result<Self> {
        if measured_components.is_empty() {
            return Err(Error::Contract(format!(
                "mode {} has no measured components",
                kind.label()
            )));
        }
        for c in &measured_components {
            if !kind.determinable_components().contains(c) {
                return Err(Error::Contract(format!(
                    "component {} is not determinable for mode {}",
                    c.label(),
                    kind.label()
                )));
            }
        }
        Ok(Self {
            kind,
            measured_components,
        })
    }

    /// The mode with its conventional primary component(s): `P11` for the
    /// isotropic tension protocols, `P12` for simple shear, `Pff`/`Pnn` for
    /// orthotropic biaxial extension, and the matching shear component for
    /// the triaxial shear protocols.
    pub fn standard(kind: ModeKind) -> Self {
        let comps = match kind {
            ModeKind::Ut | ModeKind::Ps | ModeKind::Ebt | ModeKind::Bt => {
                vec![StressComponent::P11]
            }
            ModeKind::Ss => vec![StressComponent::P12],
            ModeKind::AnisoBt => vec![StressComponent::Pff, StressComponent::Pnn],
            ModeKind::ShearFs => vec![StressComponent::Pfs],
            ModeKind::ShearSf => vec![StressComponent::Psf],
            ModeKind::ShearFn => vec![StressComponent::Pfn],
            ModeKind::ShearNf => vec![StressComponent::Pnf],
            ModeKind::ShearSn => vec![StressComponent::Psn],
            ModeKind::ShearNs => vec![StressComponent::Pns],
        };
        Self {
            kind,
            measured_components: comps,
        }
    }
}

/// An incompressible deformation gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationGradient(pub Matrix3<f64>);

impl DeformationGradient {
    /// Determinant of the gradient (should be 1 for all protocols here).
    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    /// Inverse transpose, used for pressure elimination.
    pub fn inverse_transpose(&self) -> Result<Matrix3<f64>> {
        self.0
            .try_inverse()
            .map(|inv| inv.transpose())
            .ok_or_else(|| Error::Domain("singular deformation gradient".into()))
    }
}

/// Orthonormal material frame (fiber, sheet, normal directions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralFrame {
    /// Fiber direction.
    pub f0: Vector3<f64>,
    /// Sheet direction.
    pub s0: Vector3<f64>,
    /// Sheet-normal direction.
    pub n0: Vector3<f64>,
}

impl StructuralFrame {
    /// The canonical frame aligned with the laboratory axes.
    pub fn canonical() -> Self {
        Self {
            f0: Vector3::x(),
            s0: Vector3::y(),
            n0: Vector3::z(),
        }
    }

    /// Validate pairwise orthonormality to 1e-12.
    pub fn validate(&self) -> Result<()> {
        let tol = 1e-12;
        let dirs = [self.f0, self.s0, self.n0];
        for (i, a) in dirs.iter().enumerate() {
            if (a.norm() - 1.0).abs() > tol {
                return Err(Error::Domain(format!(
                    "frame direction {i} is not a unit vector"
                )));
            }
            for b in dirs.iter().skip(i + 1) {
                if a.dot(b).abs() > tol {
                    return Err(Error::Domain("frame directions are not orthogonal".into()));
                }
            }
        }
        Ok(())
    }
}

/// Principal invariants, principal stretches, and (optionally) the
/// anisotropic stretch/coupling invariants of a deformation state.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSet {
    /// First principal invariant of C = FᵀF.
    pub i1: f64,
    /// Second principal invariant of C.
    pub i2: f64,
    /// Principal stretches (singular values of F), descending.
    pub stretches: [f64; 3],
    /// Anisotropic invariants, present when a structural frame is supplied.
    pub aniso: Option<AnisoInvariants>,
}

/// The six anisotropic invariants of the orthotropic frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(missing_docs)]
pub struct AnisoInvariants {
    pub i4f: f64,
    pub i4s: f64,
    pub i4n: f64,
    pub i8fs: f64,
    pub i8fn: f64,
    pub i8sn: f64,
}

/// Build the deformation gradient of `kind` at the given parameters.
///
/// Stretch parameters must be strictly positive; shear parameters must be
/// finite. `params` must carry exactly `kind.n_params()` values.
pub fn deformation_gradient(kind: ModeKind, params: &[f64]) -> Result<DeformationGradient> {
    if params.len() != kind.n_params() {
        return Err(Error::Contract(format!(
            "mode {} takes {} parameter(s), got {}",
            kind.label(),
            kind.n_params(),
            params.len()
        )));
    }
    for &p in params {
        if !p.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite parameter for mode {}",
                kind.label()
            )));
        }
        if kind.params_are_stretches() && p <= 0.0 {
            return Err(Error::Domain(format!(
                "non-positive stretch {p} for mode {}",
                kind.label()
            )));
        }
    }
    let f = match kind {
        ModeKind::Ut => {
            let l = params[0];
            Matrix3::from_diagonal(&Vector3::new(l, l.powf(-0.5), l.powf(-0.5)))
        }
        ModeKind::Ps => {
            let l = params[0];
            Matrix3::from_diagonal(&Vector3::new(l, 1.0, 1.0 / l))
        }
        ModeKind::Bt => {
            let (l1, l2) = (params[0], params[1]);
            Matrix3::from_diagonal(&Vector3::new(l1, l2, 1.0 / (l1 * l2)))
        }
        ModeKind::Ebt => {
            let l = params[0];
            Matrix3::from_diagonal(&Vector3::new(l, l, l.powi(-2)))
        }
        ModeKind::AnisoBt => {
            let (lf, ln) = (params[0], params[1]);
            Matrix3::from_diagonal(&Vector3::new(lf, 1.0 / (lf * ln), ln))
        }
        ModeKind::Ss | ModeKind::ShearFs => shear_gradient(0, 1, params[0]),
        ModeKind::ShearSf => shear_gradient(1, 0, params[0]),
        ModeKind::ShearFn => shear_gradient(0, 2, params[0]),
        ModeKind::ShearNf => shear_gradient(2, 0, params[0]),
        ModeKind::ShearSn => shear_gradient(1, 2, params[0]),
        ModeKind::ShearNs => shear_gradient(2, 1, params[0]),
    };
    Ok(DeformationGradient(f))
}

fn shear_gradient(row: usize, col: usize, gamma: f64) -> Matrix3<f64> {
    let mut f = Matrix3::identity();
    f[(row, col)] = gamma;
    f
}

/// Evaluate the invariants of `f`, including the anisotropic set when a
/// structural frame is supplied.
pub fn invariants(
    f: &DeformationGradient,
    frame: Option<&StructuralFrame>,
) -> Result<InvariantSet> {
    if f.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite deformation gradient".into()));
    }
    let c = f.0.transpose() * f.0;
    let i1 = c.trace();
    let i2 = 0.5 * (i1 * i1 - (c * c).trace());

    // Principal stretches as singular values of F; more robust than an
    // eigen-decomposition of C near repeated stretches.
    let mut sv: Vec<f64> =
        f.0.svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let stretches = [sv[0], sv[1], sv[2]];

    let aniso = match frame {
        Some(fr) => {
            fr.validate()?;
            let cf = c * fr.f0;
            let cs = c * fr.s0;
            let cn = c * fr.n0;
            Some(AnisoInvariants {
                i4f: fr.f0.dot(&cf),
                i4s: fr.s0.dot(&cs),
                i4n: fr.n0.dot(&cn),
                i8fs: fr.f0.dot(&cs),
                i8fn: fr.f0.dot(&cn),
                i8sn: fr.s0.dot(&cn),
            })
        }
        None => None,
    };

    Ok(InvariantSet {
        i1,
        i2,
        stretches,
        aniso,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all_kinds() -> Vec<ModeKind> {
        vec![
            ModeKind::Ut,
            ModeKind::Ss,
            ModeKind::Ps,
            ModeKind::Bt,
            ModeKind::Ebt,
            ModeKind::AnisoBt,
            ModeKind::ShearFs,
            ModeKind::ShearSf,
            ModeKind::ShearFn,
            ModeKind::ShearNf,
            ModeKind::ShearSn,
            ModeKind::ShearNs,
        ]
    }

    #[test]
    fn ut_gradient_matches_closed_form() {
        let f = deformation_gradient(ModeKind::Ut, &[4.0]).unwrap();
        assert_relative_eq!(f.0[(0, 0)], 4.0);
        assert_relative_eq!(f.0[(1, 1)], 0.5);
        assert_relative_eq!(f.0[(2, 2)], 0.5);
        assert_eq!(f.0[(0, 1)], 0.0);
    }

    #[test]
    fn ps_gradient_matches_closed_form() {
        let f = deformation_gradient(ModeKind::Ps, &[2.0]).unwrap();
        assert_relative_eq!(f.0[(0, 0)], 2.0);
        assert_relative_eq!(f.0[(1, 1)], 1.0);
        assert_relative_eq!(f.0[(2, 2)], 0.5);
    }

    #[test]
    fn zero_shear_is_identity() {
        let f = deformation_gradient(ModeKind::Ss, &[0.0]).unwrap();
        assert_eq!(f.0, Matrix3::identity());
    }

    #[test]
    fn determinants_are_one() {
        for kind in all_kinds() {
            let params: Vec<f64> = match (kind.n_params(), kind.params_are_stretches()) {
                (1, true) => vec![1.7],
                (2, true) => vec![1.3, 0.8],
                (1, false) => vec![0.45],
                _ => unreachable!(),
            };
            let f = deformation_gradient(kind, &params).unwrap();
            assert!(
                (f.det() - 1.0).abs() < 1e-12,
                "det != 1 for {:?}: {}",
                kind,
                f.det()
            );
        }
    }

    #[test]
    fn non_positive_stretch_is_domain_error() {
        assert!(matches!(
            deformation_gradient(ModeKind::Ut, &[0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            deformation_gradient(ModeKind::Bt, &[1.0, -2.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn identity_invariants() {
        let f = DeformationGradient(Matrix3::identity());
        let inv = invariants(&f, Some(&StructuralFrame::canonical())).unwrap();
        assert_relative_eq!(inv.i1, 3.0, epsilon = 1e-14);
        assert_relative_eq!(inv.i2, 3.0, epsilon = 1e-14);
        for s in inv.stretches {
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        }
        let a = inv.aniso.unwrap();
        assert_relative_eq!(a.i4f, 1.0, epsilon = 1e-14);
        assert_relative_eq!(a.i4s, 1.0, epsilon = 1e-14);
        assert_relative_eq!(a.i4n, 1.0, epsilon = 1e-14);
        assert_relative_eq!(a.i8fs, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ut_invariants_at_two() {
        let f = deformation_gradient(ModeKind::Ut, &[2.0]).unwrap();
        let inv = invariants(&f, None).unwrap();
        assert_relative_eq!(inv.i1, 5.0, epsilon = 1e-12);
        assert_relative_eq!(inv.i2, 4.25, epsilon = 1e-12);
    }

    #[test]
    fn shear_fs_aniso_invariants() {
        let f = deformation_gradient(ModeKind::ShearFs, &[0.3]).unwrap();
        let inv = invariants(&f, Some(&StructuralFrame::canonical())).unwrap();
        let a = inv.aniso.unwrap();
        assert_relative_eq!(a.i4f, 1.0, epsilon = 1e-14);
        assert_relative_eq!(a.i4s, 1.09, epsilon = 1e-12);
        assert_relative_eq!(a.i8fs, 0.3, epsilon = 1e-14);
    }

    #[test]
    fn simple_shear_invariants_all_modes() {
        let gamma: f64 = 0.37;
        for kind in [
            ModeKind::Ss,
            ModeKind::ShearFs,
            ModeKind::ShearSf,
            ModeKind::ShearFn,
            ModeKind::ShearNf,
            ModeKind::ShearSn,
            ModeKind::ShearNs,
        ] {
            let f = deformation_gradient(kind, &[gamma]).unwrap();
            let inv = invariants(&f, None).unwrap();
            assert_relative_eq!(inv.i1, 3.0 + gamma * gamma, epsilon = 1e-10);
            assert_relative_eq!(inv.i2, 3.0 + gamma * gamma, epsilon = 1e-10);
        }
    }

    #[test]
    fn stretch_squares_sum_to_i1_and_i4_decomposes_trace() {
        for kind in all_kinds() {
            let params: Vec<f64> = match (kind.n_params(), kind.params_are_stretches()) {
                (1, true) => vec![2.3],
                (2, true) => vec![1.15, 0.95],
                (1, false) => vec![0.5],
                _ => unreachable!(),
            };
            let f = deformation_gradient(kind, &params).unwrap();
            let inv = invariants(&f, Some(&StructuralFrame::canonical())).unwrap();
            let sum_sq: f64 = inv.stretches.iter().map(|s| s * s).sum();
            assert_relative_eq!(sum_sq, inv.i1, epsilon = 1e-10);
            let a = inv.aniso.unwrap();
            assert_relative_eq!(a.i4f + a.i4s + a.i4n, inv.i1, epsilon = 1e-10);
        }
    }

    #[test]
    fn non_orthonormal_frame_is_rejected() {
        let bad = StructuralFrame {
            f0: Vector3::new(1.0, 0.1, 0.0),
            s0: Vector3::y(),
            n0: Vector3::z(),
        };
        let f = DeformationGradient(Matrix3::identity());
        assert!(matches!(invariants(&f, Some(&bad)), Err(Error::Domain(_))));
    }

    #[test]
    fn component_whitelist() {
        assert!(LoadingMode::new(ModeKind::Ut, vec![StressComponent::P12]).is_err());
        assert!(LoadingMode::new(ModeKind::ShearFs, vec![StressComponent::Psf]).is_err());
        assert!(LoadingMode::new(ModeKind::ShearFs, vec![StressComponent::Pfs]).is_ok());
        assert!(LoadingMode::new(ModeKind::AnisoBt, vec![StressComponent::Pff]).is_ok());
    }
}
