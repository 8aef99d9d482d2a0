//! Constitutive model libraries: basis terms, energies, and per-term stress
//! contributions with pressure elimination.
//!
//! Two families of libraries are provided. The isotropic library combines
//! generalized Mooney-Rivlin polynomials `(I1-3)^j (I2-3)^k` with Ogden
//! stretch terms `Σ λ_i^α - 3`. The orthotropic library carries 32 terms,
//! four functional variants (linear, exponential-linear, quadratic,
//! exponential-quadratic) for each of the eight invariant arguments
//! `{I1-3, I2-3, max(I4f,1)-1, max(I4s,1)-1, max(I4n,1)-1, I8fs, I8fn,
//! I8sn}`; the exponential variants carry a tunable inner coefficient.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    deformation_gradient, DeformationGradient, LoadingMode, ModeKind, StructuralFrame,
};

/// Basis-term families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TermFamily {
    /// Mooney-Rivlin monomial `(I1-3)^j (I2-3)^k`, `j + k >= 1`.
    MooneyRivlin {
        /// Exponent of `I1 - 3`.
        j: u32,
        /// Exponent of `I2 - 3`.
        k: u32,
    },
    /// Ogden stretch term `λ1^α + λ2^α + λ3^α - 3` with fixed exponent.
    Ogden {
        /// Stretch exponent (nonzero).
        alpha: f64,
    },
    /// Orthotropic term by its 1-based position in the 32-term family.
    Ortho {
        /// Index in `1..=32`.
        index: u32,
    },
}

/// One library feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisTerm {
    /// Functional family of the term.
    pub family: TermFamily,
}

impl BasisTerm {
    /// Whether the term owns a tunable inner (exponential) coefficient.
    pub fn has_nonlinear_slot(&self) -> bool {
        match self.family {
            TermFamily::Ortho { index } => index % 2 == 0,
            _ => false,
        }
    }

    /// Human-readable descriptor used in reports.
    pub fn describe(&self) -> String {
        match self.family {
            TermFamily::MooneyRivlin { j, k } => format!("MR({j},{k})"),
            TermFamily::Ogden { alpha } => format!("Ogden({alpha})"),
            TermFamily::Ortho { index } => format!("Ortho({index})"),
        }
    }
}

/// The eight invariant arguments of the orthotropic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OrthoArg {
    I1,
    I2,
    I4F,
    I4S,
    I4N,
    I8Fs,
    I8Fn,
    I8Sn,
}

/// The four functional variants applied to each orthotropic argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OrthoVariant {
    Linear,
    ExpLinear,
    Quadratic,
    ExpQuadratic,
}

fn ortho_parts(index: u32) -> (OrthoArg, OrthoVariant) {
    debug_assert!((1..=32).contains(&index));
    let arg = match (index - 1) / 4 {
        0 => OrthoArg::I1,
        1 => OrthoArg::I2,
        2 => OrthoArg::I4F,
        3 => OrthoArg::I4S,
        4 => OrthoArg::I4N,
        5 => OrthoArg::I8Fs,
        6 => OrthoArg::I8Fn,
        _ => OrthoArg::I8Sn,
    };
    let variant = match (index - 1) % 4 {
        0 => OrthoVariant::Linear,
        1 => OrthoVariant::ExpLinear,
        2 => OrthoVariant::Quadratic,
        _ => OrthoVariant::ExpQuadratic,
    };
    (arg, variant)
}

/// An ordered term list with the fixed linearization values of its
/// nonlinear slots and, for orthotropic libraries, the material frame.
///
/// Term order is stable and defines the column order of every design
/// matrix assembled from the library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLibrary {
    /// Ordered basis terms.
    pub terms: Vec<BasisTerm>,
    /// Linearization value of each term's nonlinear slot (`None` for terms
    /// without one).
    pub w_bar: Vec<Option<f64>>,
    /// Material frame for orthotropic terms.
    pub frame: Option<StructuralFrame>,
}

/// Linear coefficients and nonlinear slot values of a model drawn from a
/// library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCoefficients {
    /// Per-term linear coefficients (stress units); all must be >= 0.
    pub c: Vec<f64>,
    /// Per-term nonlinear slot values (`None` where absent).
    pub w: Vec<Option<f64>>,
}

impl EnergyCoefficients {
    /// All-zero coefficients dimensioned to `lib`.
    pub fn zeros(lib: &ModelLibrary) -> Self {
        Self {
            c: vec![0.0; lib.terms.len()],
            w: lib.w_bar.clone(),
        }
    }
}

/// Initial shear moduli implied by an isotropic model (the linearization
/// consistency check).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Mooney-Rivlin part, `2 (c_(1,0) + c_(0,1))`.
    pub mu0_mr: f64,
    /// Ogden part, `½ Σ c_l α_l (α_l - 1)`.
    pub mu0_ogden: f64,
    /// Total initial shear modulus.
    pub mu0_total: f64,
    /// Set when the total is not strictly positive.
    pub non_positive: bool,
}

impl ModelLibrary {
    /// Number of terms.
    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Indices of terms carrying a nonlinear slot.
    pub fn nonlinear_slots(&self) -> Vec<usize> {
        self.terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.has_nonlinear_slot())
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether the library is orthotropic.
    pub fn is_orthotropic(&self) -> bool {
        self.frame.is_some()
    }

    /// A copy of the library with the given (0-based) terms removed.
    pub fn without_terms(&self, drop: &[usize]) -> Self {
        let mut lib = self.clone();
        let keep: Vec<usize> = (0..self.terms.len())
            .filter(|i| !drop.contains(i))
            .collect();
        lib.terms = keep.iter().map(|&i| self.terms[i]).collect();
        lib.w_bar = keep.iter().map(|&i| self.w_bar[i]).collect();
        lib
    }
}

/// Build the isotropic library: Mooney-Rivlin monomials for all `(j, k)`
/// with `1 <= j + k <= mr_order` in graded order (`j` descending within a
/// grade), followed by one Ogden term per exponent in `ogden_alphas`.
pub fn make_isotropic_library(mr_order: u32, ogden_alphas: &[f64]) -> Result<ModelLibrary> {
    if mr_order < 1 {
        return Err(Error::Config("mr_order must be at least 1".into()));
    }
    let mut terms = Vec::new();
    for grade in 1..=mr_order {
        for j in (0..=grade).rev() {
            let k = grade - j;
            terms.push(BasisTerm {
                family: TermFamily::MooneyRivlin { j, k },
            });
        }
    }
    for &alpha in ogden_alphas {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::Config(format!("invalid Ogden exponent {alpha}")));
        }
        terms.push(BasisTerm {
            family: TermFamily::Ogden { alpha },
        });
    }
    let w_bar = vec![None; terms.len()];
    Ok(ModelLibrary {
        terms,
        w_bar,
        frame: None,
    })
}

/// Build the full 32-term orthotropic library with every exponential inner
/// coefficient linearized at `w_bar`.
pub fn make_orthotropic_library(frame: StructuralFrame, w_bar: f64) -> Result<ModelLibrary> {
    frame.validate()?;
    if w_bar <= 0.0 || !w_bar.is_finite() {
        return Err(Error::Config(format!(
            "w_bar must be positive and finite, got {w_bar}"
        )));
    }
    let mut terms = Vec::with_capacity(32);
    let mut w = Vec::with_capacity(32);
    for index in 1..=32u32 {
        terms.push(BasisTerm {
            family: TermFamily::Ortho { index },
        });
        w.push((index % 2 == 0).then_some(w_bar));
    }
    Ok(ModelLibrary {
        terms,
        w_bar: w,
        frame: Some(frame),
    })
}

/// The orthotropic library with the residual-stress-inducing first-power
/// terms removed: the linear and exponential-linear variants of the
/// clamped `I4` arguments (φ9, φ10, φ13, φ14, φ17, φ18) and of the `I8`
/// arguments (φ21, φ22, φ25, φ26, φ29, φ30). Their one-sided stress does
/// not vanish in the undeformed state.
///
/// This leaves 20 terms carrying 10 exponential inner coefficients, i.e.
/// 30 material parameters in total.
pub fn make_orthotropic_library_reduced(
    frame: StructuralFrame,
    w_bar: f64,
) -> Result<ModelLibrary> {
    let full = make_orthotropic_library(frame, w_bar)?;
    Ok(full.without_terms(&[8, 9, 12, 13, 16, 17, 20, 21, 24, 25, 28, 29]))
}

/// Everything about a deformation state that term evaluation needs,
/// computed once per sample.
#[derive(Debug, Clone)]
pub struct KinematicContext {
    /// Deformation gradient.
    pub f: Matrix3<f64>,
    /// Inverse transpose of the gradient.
    pub f_inv_t: Matrix3<f64>,
    /// Right Cauchy-Green tensor.
    pub c: Matrix3<f64>,
    /// tr C.
    pub i1: f64,
    /// ½[(tr C)² - tr C²].
    pub i2: f64,
    /// SVD factors (u, singular values, vᵀ) of F.
    svd: (Matrix3<f64>, Vector3<f64>, Matrix3<f64>),
    /// Anisotropic invariants when the library has a frame.
    pub aniso: Option<crate::kinematics::AnisoInvariants>,
    frame: Option<StructuralFrame>,
}

impl KinematicContext {
    /// Precompute the context for a gradient, optionally with a frame.
    pub fn new(f: &DeformationGradient, frame: Option<&StructuralFrame>) -> Result<Self> {
        let inv = crate::kinematics::invariants(f, frame)?;
        let svd = f.0.svd(true, true);
        let u = Matrix3::from(svd.u.expect("svd with u"));
        let vt = Matrix3::from(svd.v_t.expect("svd with v_t"));
        Ok(Self {
            f: f.0,
            f_inv_t: f.inverse_transpose()?,
            c: f.0.transpose() * f.0,
            i1: inv.i1,
            i2: inv.i2,
            svd: (u, svd.singular_values, vt),
            aniso: inv.aniso,
            frame: frame.copied(),
        })
    }

    /// Context for a loading mode at the given parameters.
    pub fn for_mode(
        kind: ModeKind,
        params: &[f64],
        frame: Option<&StructuralFrame>,
    ) -> Result<Self> {
        let f = deformation_gradient(kind, params)?;
        Self::new(&f, frame)
    }

    fn aniso(&self) -> Result<&crate::kinematics::AnisoInvariants> {
        self.aniso
            .as_ref()
            .ok_or_else(|| Error::Contract("orthotropic term evaluated without a frame".into()))
    }

    fn frame(&self) -> Result<&StructuralFrame> {
        self.frame
            .as_ref()
            .ok_or_else(|| Error::Contract("orthotropic term evaluated without a frame".into()))
    }
}

fn d_i1_d_f(ctx: &KinematicContext) -> Matrix3<f64> {
    2.0 * ctx.f
}

fn d_i2_d_f(ctx: &KinematicContext) -> Matrix3<f64> {
    2.0 * (ctx.i1 * ctx.f - ctx.f * ctx.c)
}

fn structural_tensor(a: &Vector3<f64>, b: &Vector3<f64>) -> Matrix3<f64> {
    a * b.transpose() + b * a.transpose()
}

/// Scalar value of the orthotropic argument, with the `max(I4, 1)` clamp
/// already applied.
fn ortho_arg_value(arg: OrthoArg, ctx: &KinematicContext) -> Result<f64> {
    Ok(match arg {
        OrthoArg::I1 => ctx.i1 - 3.0,
        OrthoArg::I2 => ctx.i2 - 3.0,
        OrthoArg::I4F => (ctx.aniso()?.i4f.max(1.0)) - 1.0,
        OrthoArg::I4S => (ctx.aniso()?.i4s.max(1.0)) - 1.0,
        OrthoArg::I4N => (ctx.aniso()?.i4n.max(1.0)) - 1.0,
        OrthoArg::I8Fs => ctx.aniso()?.i8fs,
        OrthoArg::I8Fn => ctx.aniso()?.i8fn,
        OrthoArg::I8Sn => ctx.aniso()?.i8sn,
    })
}

/// Gradient of the orthotropic argument with respect to F. The clamped
/// `max(I4, 1) - 1` arguments take the one-sided subgradient 0 at and
/// below I4 = 1.
fn ortho_arg_gradient(arg: OrthoArg, ctx: &KinematicContext) -> Result<Matrix3<f64>> {
    Ok(match arg {
        OrthoArg::I1 => d_i1_d_f(ctx),
        OrthoArg::I2 => d_i2_d_f(ctx),
        OrthoArg::I4F => {
            let fr = ctx.frame()?;
            if ctx.aniso()?.i4f > 1.0 {
                2.0 * ctx.f * (fr.f0 * fr.f0.transpose())
            } else {
                Matrix3::zeros()
            }
        }
        OrthoArg::I4S => {
            let fr = ctx.frame()?;
            if ctx.aniso()?.i4s > 1.0 {
                2.0 * ctx.f * (fr.s0 * fr.s0.transpose())
            } else {
                Matrix3::zeros()
            }
        }
        OrthoArg::I4N => {
            let fr = ctx.frame()?;
            if ctx.aniso()?.i4n > 1.0 {
                2.0 * ctx.f * (fr.n0 * fr.n0.transpose())
            } else {
                Matrix3::zeros()
            }
        }
        OrthoArg::I8Fs => {
            let fr = ctx.frame()?;
            ctx.f * structural_tensor(&fr.f0, &fr.s0)
        }
        OrthoArg::I8Fn => {
            let fr = ctx.frame()?;
            ctx.f * structural_tensor(&fr.f0, &fr.n0)
        }
        OrthoArg::I8Sn => {
            let fr = ctx.frame()?;
            ctx.f * structural_tensor(&fr.s0, &fr.n0)
        }
    })
}

/// Outer scale h(w, g) such that dφ/dF = h · dg/dF for the orthotropic
/// variants, and its derivative with respect to w.
fn ortho_variant_scale(variant: OrthoVariant, g: f64, w: f64) -> (f64, f64) {
    match variant {
        OrthoVariant::Linear => (1.0, 0.0),
        OrthoVariant::Quadratic => (2.0 * g, 0.0),
        OrthoVariant::ExpLinear => {
            let e = (w * g).exp();
            (w * e, e * (1.0 + w * g))
        }
        OrthoVariant::ExpQuadratic => {
            let e = (w * g * g).exp();
            (2.0 * w * g * e, 2.0 * g * e * (1.0 + w * g * g))
        }
    }
}

fn ortho_variant_energy(variant: OrthoVariant, g: f64, w: f64) -> f64 {
    match variant {
        OrthoVariant::Linear => g,
        OrthoVariant::Quadratic => g * g,
        OrthoVariant::ExpLinear => (w * g).exp() - 1.0,
        OrthoVariant::ExpQuadratic => (w * g * g).exp() - 1.0,
    }
}

/// Value of basis function `term` at the deformation state `ctx`.
///
/// `w` is the term's nonlinear slot value; ignored (may be `None`) for
/// terms without one.
pub fn term_energy(term: &BasisTerm, ctx: &KinematicContext, w: Option<f64>) -> Result<f64> {
    Ok(match term.family {
        TermFamily::MooneyRivlin { j, k } => {
            (ctx.i1 - 3.0).powi(j as i32) * (ctx.i2 - 3.0).powi(k as i32)
        }
        TermFamily::Ogden { alpha } => {
            let s = &ctx.svd.1;
            s[0].powf(alpha) + s[1].powf(alpha) + s[2].powf(alpha) - 3.0
        }
        TermFamily::Ortho { index } => {
            let (arg, variant) = ortho_parts(index);
            let g = ortho_arg_value(arg, ctx)?;
            let wv = w.unwrap_or(1.0);
            ortho_variant_energy(variant, g, wv)
        }
    })
}

/// Analytic derivative of basis function `term` with respect to F, before
/// any pressure elimination.
pub fn term_gradient(
    term: &BasisTerm,
    ctx: &KinematicContext,
    w: Option<f64>,
) -> Result<Matrix3<f64>> {
    Ok(match term.family {
        TermFamily::MooneyRivlin { j, k } => {
            let a = ctx.i1 - 3.0;
            let b = ctx.i2 - 3.0;
            let mut grad = Matrix3::zeros();
            if j > 0 {
                grad += (j as f64) * a.powi(j as i32 - 1) * b.powi(k as i32) * d_i1_d_f(ctx);
            }
            if k > 0 {
                grad += (k as f64) * a.powi(j as i32) * b.powi(k as i32 - 1) * d_i2_d_f(ctx);
            }
            grad
        }
        TermFamily::Ogden { alpha } => {
            // Spectral derivative: F = U Σ Vᵀ gives d(Σ σ_i^α)/dF = U diag(α σ_i^{α-1}) Vᵀ.
            // For the diagonal protocols F is already diagonal with positive
            // entries, so the closed form applies directly.
            if is_diagonal(&ctx.f) {
                Matrix3::from_diagonal(&Vector3::new(
                    alpha * ctx.f[(0, 0)].powf(alpha - 1.0),
                    alpha * ctx.f[(1, 1)].powf(alpha - 1.0),
                    alpha * ctx.f[(2, 2)].powf(alpha - 1.0),
                ))
            } else {
                let (u, s, vt) = &ctx.svd;
                let d = Matrix3::from_diagonal(&Vector3::new(
                    alpha * s[0].powf(alpha - 1.0),
                    alpha * s[1].powf(alpha - 1.0),
                    alpha * s[2].powf(alpha - 1.0),
                ));
                u * d * vt
            }
        }
        TermFamily::Ortho { index } => {
            let (arg, variant) = ortho_parts(index);
            let g = ortho_arg_value(arg, ctx)?;
            let (h, _) = ortho_variant_scale(variant, g, w.unwrap_or(1.0));
            if h == 0.0 {
                Matrix3::zeros()
            } else {
                h * ortho_arg_gradient(arg, ctx)?
            }
        }
    })
}

fn is_diagonal(m: &Matrix3<f64>) -> bool {
    m[(0, 1)] == 0.0
        && m[(0, 2)] == 0.0
        && m[(1, 0)] == 0.0
        && m[(1, 2)] == 0.0
        && m[(2, 0)] == 0.0
        && m[(2, 1)] == 0.0
}

/// Pressure-eliminated stress components of a raw energy gradient `grad`
/// for the given mode, filtered to `components`.
fn eliminate_pressure(
    grad: &Matrix3<f64>,
    ctx: &KinematicContext,
    kind: ModeKind,
    components: &[crate::kinematics::StressComponent],
    out: &mut Vec<f64>,
) -> Result<()> {
    let p = match kind.zero_stress_axis() {
        Some(z) => grad[(z, z)] / ctx.f_inv_t[(z, z)],
        None => 0.0,
    };
    for comp in components {
        if !kind.determinable_components().contains(comp) {
            return Err(Error::Contract(format!(
                "component {} is not determinable for mode {}",
                comp.label(),
                kind.label()
            )));
        }
        let (r, c) = comp.indices();
        out.push(grad[(r, c)] - p * ctx.f_inv_t[(r, c)]);
    }
    Ok(())
}

/// Stress contribution of one term: the pressure-eliminated derivative
/// `∂φ_j/∂F - p_j F^{-T}` filtered to the mode's measured components.
pub fn stress_contribution(
    lib: &ModelLibrary,
    term_index: usize,
    mode: &LoadingMode,
    ctx: &KinematicContext,
    w: Option<f64>,
) -> Result<Vec<f64>> {
    let term = &lib.terms[term_index];
    let w = w.or(lib.w_bar[term_index]);
    let grad = term_gradient(term, ctx, w)?;
    let mut out = Vec::with_capacity(mode.measured_components.len());
    eliminate_pressure(&grad, ctx, mode.kind, &mode.measured_components, &mut out)?;
    Ok(out)
}

/// Derivative of the stress contribution with respect to the term's
/// nonlinear slot. Errors for terms without a slot.
pub fn stress_contribution_dw(
    lib: &ModelLibrary,
    term_index: usize,
    mode: &LoadingMode,
    ctx: &KinematicContext,
    w: f64,
) -> Result<Vec<f64>> {
    let term = &lib.terms[term_index];
    let TermFamily::Ortho { index } = term.family else {
        return Err(Error::Contract(format!(
            "term {} has no nonlinear slot",
            term.describe()
        )));
    };
    if !term.has_nonlinear_slot() {
        return Err(Error::Contract(format!(
            "term {} has no nonlinear slot",
            term.describe()
        )));
    }
    let (arg, variant) = ortho_parts(index);
    let g = ortho_arg_value(arg, ctx)?;
    let (_, dh_dw) = ortho_variant_scale(variant, g, w);
    let grad = if dh_dw == 0.0 {
        Matrix3::zeros()
    } else {
        dh_dw * ortho_arg_gradient(arg, ctx)?
    };
    let mut out = Vec::with_capacity(mode.measured_components.len());
    eliminate_pressure(&grad, ctx, mode.kind, &mode.measured_components, &mut out)?;
    Ok(out)
}

/// Total strain energy `Σ c_j φ_j` of a model at deformation gradient `f`.
pub fn energy(
    lib: &ModelLibrary,
    coeffs: &EnergyCoefficients,
    f: &DeformationGradient,
) -> Result<f64> {
    if coeffs.c.len() != lib.terms.len() {
        return Err(Error::Contract(
            "coefficient vector not dimensioned to the library".into(),
        ));
    }
    let ctx = KinematicContext::new(f, lib.frame.as_ref())?;
    let mut total = 0.0;
    for (i, term) in lib.terms.iter().enumerate() {
        if coeffs.c[i] == 0.0 {
            continue;
        }
        let w = coeffs.w[i].or(lib.w_bar[i]);
        total += coeffs.c[i] * term_energy(term, &ctx, w)?;
    }
    Ok(total)
}

/// Evaluate the linear-elastic consistency conditions of an isotropic
/// model.
pub fn check_consistency(
    lib: &ModelLibrary,
    coeffs: &EnergyCoefficients,
) -> Result<ConsistencyReport> {
    if lib.is_orthotropic() {
        return Err(Error::Unsupported(
            "consistency conditions are defined for isotropic libraries".into(),
        ));
    }
    let mut mu0_mr = 0.0;
    let mut mu0_ogden = 0.0;
    for (i, term) in lib.terms.iter().enumerate() {
        match term.family {
            TermFamily::MooneyRivlin { j: 1, k: 0 } | TermFamily::MooneyRivlin { j: 0, k: 1 } => {
                mu0_mr += 2.0 * coeffs.c[i];
            }
            TermFamily::Ogden { alpha } => {
                mu0_ogden += 0.5 * coeffs.c[i] * alpha * (alpha - 1.0);
            }
            _ => {}
        }
    }
    let mu0_total = mu0_mr + mu0_ogden;
    Ok(ConsistencyReport {
        mu0_mr,
        mu0_ogden,
        mu0_total,
        non_positive: mu0_total <= 0.0,
    })
}
