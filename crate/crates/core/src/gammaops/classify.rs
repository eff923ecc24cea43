//! Classification, the unitary/c.n.u. split and the dilation-based sufficient condition.

use nalgebra::Complex;
use serde::Serialize;

use super::vn::{vn_falsify_with, VnConfig, VnProbe, VnVerdict};
use super::{FundamentalTuple, GammaTuple};
use crate::error::{LabError, Result};
use crate::matcore::{hermitian_eigen, is_isometry, is_normal, is_unitary, joint_eigenvalues, op_norm, CMatrix, StructureCheck, Subspace, Tolerances};
use crate::polydisc::{in_bgamma, in_gamma, GammaPoint};
use crate::scalar::Real;

/// Outcome of [`classify`]. Only `Falsified` and `GammaUnitary` are certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaClass {
    GammaUnitary,
    GammaIsometry,
    GammaContractionNotFalsified,
    Falsified,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct ClassifyReport<T: Real> {
    pub class: GammaClass,
    pub evidence: String,
    pub commutation_defect: T,
    pub p_norm: T,
    /// Normality residuals of `S₁, …, S_{n−1}, P`.
    pub normal_residuals: Vec<T>,
    pub p_unitary: StructureCheck<T>,
    pub p_isometry: StructureCheck<T>,
    /// Largest root-modulus margin over the joint eigenvalues, when computable.
    pub spectrum_margin: Option<T>,
    pub spectrum_on_boundary: bool,
    pub vn: Option<VnVerdict<T>>,
}

/// Classifies a tuple, building a falsifier probe for its degree.
pub fn classify<T: Real>(g: &GammaTuple<T>, config: VnConfig, tol: &Tolerances) -> Result<ClassifyReport<T>> {
    let probe = VnProbe::new(g.n(), config)?;
    classify_with(g, &probe, tol)
}

struct SpectrumCheck<T: Real> {
    margin: Option<T>,
    on_boundary: bool,
    outside: Option<Vec<Complex<T>>>,
}

fn spectrum_check<T: Real>(g: &GammaTuple<T>, seed: u64, tol: &Tolerances) -> Result<SpectrumCheck<T>> {
    let Ok(js) = joint_eigenvalues(&g.entries(), tol, seed) else {
        return Ok(SpectrumCheck {
            margin: None,
            on_boundary: false,
            outside: None,
        });
    };
    let mut margin = -T::one();
    let mut on_boundary = true;
    let mut outside = None;
    for lam in js {
        let pt = GammaPoint::new(lam.clone());
        let m = in_gamma(&pt, tol)?;
        margin = margin.max(m.margin);
        if !m.inside && outside.is_none() {
            outside = Some(lam.clone());
        }
        on_boundary &= in_bgamma(&pt, tol)?;
    }
    Ok(SpectrumCheck {
        margin: Some(margin),
        on_boundary,
        outside,
    })
}

/// Classifies a tuple against a prebuilt probe of matching degree.
pub fn classify_with<T: Real>(g: &GammaTuple<T>, probe: &VnProbe<T>, tol: &Tolerances) -> Result<ClassifyReport<T>> {
    let (comm, i, j) = g.commutation_defect();
    let p_norm = op_norm(g.p());
    let normal_residuals = g.entries().iter().map(|m| is_normal(m, tol).residual).collect::<Vec<_>>();
    let mut report = ClassifyReport {
        class: GammaClass::Falsified,
        evidence: String::new(),
        commutation_defect: comm,
        p_norm,
        normal_residuals,
        p_unitary: is_unitary(g.p(), tol),
        p_isometry: is_isometry(g.p(), tol),
        spectrum_margin: None,
        spectrum_on_boundary: false,
        vn: None,
    };
    if comm > tol.eq::<T>() {
        report.evidence = format!("entries {i} and {j} do not commute (relative residual {:.3e})", comm.as_f64());
        return Ok(report);
    }
    if p_norm > T::one() + tol.cert::<T>() {
        report.evidence = format!("‖P‖ = {:.6} exceeds 1", p_norm.as_f64());
        return Ok(report);
    }
    let spec = spectrum_check(g, probe.config.seed, tol)?;
    report.spectrum_margin = spec.margin;
    report.spectrum_on_boundary = spec.on_boundary;
    if let Some(lam) = spec.outside {
        report.evidence = format!(
            "joint eigenvalue {:?} lies outside Γₙ (margin {:.3e})",
            lam.iter().map(|z| (z.re.as_f64(), z.im.as_f64())).collect::<Vec<_>>(),
            spec.margin.unwrap_or(T::zero()).as_f64()
        );
        return Ok(report);
    }
    let eq = tol.eq::<T>();
    let all_normal = g
        .entries()
        .iter()
        .zip(&report.normal_residuals)
        .all(|(m, &r)| r <= eq * op_norm(m).max(T::one()).powi(2));
    if all_normal && report.p_unitary.holds && spec.margin.is_some() && spec.on_boundary {
        report.class = GammaClass::GammaUnitary;
        report.evidence = "normal entries, unitary P, joint spectrum in bΓₙ".into();
        return Ok(report);
    }
    let vn = vn_falsify_with(g, probe, tol)?;
    let falsified = vn.is_falsified();
    report.vn = Some(vn);
    if falsified {
        report.evidence = "a test polynomial violates the von Neumann inequality over Γₙ".into();
        return Ok(report);
    }
    if report.p_isometry.holds {
        report.class = GammaClass::GammaIsometry;
        report.evidence = "P is an isometry and sampling found no violation".into();
    } else {
        report.class = GammaClass::GammaContractionNotFalsified;
        report.evidence = "sampling found no violation (evidence, not proof)".into();
    }
    Ok(report)
}

/// Verdict of a Γₘ-contraction test on a single tuple.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct GammaTest<T: Real> {
    pub passed: bool,
    pub reason: Option<String>,
    pub commutation_defect: T,
    pub p_norm: T,
    pub spectrum_margin: Option<T>,
    pub vn_ratio: Option<T>,
}

/// Tests a tuple for Γₘ-contractivity (m = `g.n()`): commutation, `‖P‖ ≤ 1`,
/// joint spectrum in Γₘ and the sampling falsifier. For m = 1 this is `‖P‖ ≤ 1`.
pub fn test_gamma_contraction<T: Real>(
    g: &GammaTuple<T>,
    probe: Option<&VnProbe<T>>,
    tol: &Tolerances,
) -> Result<GammaTest<T>> {
    let p_norm = op_norm(g.p());
    let mut t = GammaTest {
        passed: false,
        reason: None,
        commutation_defect: T::zero(),
        p_norm,
        spectrum_margin: None,
        vn_ratio: None,
    };
    if p_norm > T::one() + tol.cert::<T>() {
        t.reason = Some(format!("‖P‖ = {:.6} exceeds 1", p_norm.as_f64()));
        return Ok(t);
    }
    if g.n() == 1 || g.dim() == 0 {
        t.passed = true;
        return Ok(t);
    }
    let (comm, i, j) = g.commutation_defect();
    t.commutation_defect = comm;
    if comm > tol.eq::<T>() {
        t.reason = Some(format!("entries {i} and {j} do not commute"));
        return Ok(t);
    }
    let seed = probe.map_or(0, |p| p.config.seed);
    let spec = spectrum_check(g, seed, tol)?;
    t.spectrum_margin = spec.margin;
    if spec.outside.is_some() {
        t.reason = Some("joint spectrum leaves Γₘ".into());
        return Ok(t);
    }
    if let Some(probe) = probe {
        let vn = vn_falsify_with(g, probe, tol)?;
        t.vn_ratio = Some(vn.ratio());
        if vn.is_falsified() {
            t.reason = Some(format!("von Neumann ratio {:.6} exceeds 1", vn.ratio().as_f64()));
            return Ok(t);
        }
    }
    t.passed = true;
    Ok(t)
}

/// Which weighted pencil to form from a tuple `X₁, …, X_{n−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilKind {
    /// `((n−j)/n)(X_j + X_{n−j}* z)`.
    Direct,
    /// `((n−j)/n)(X_j* + X_{n−j} z)`.
    Adjoint,
}

/// The weighted pencil tuple at `z`, as a tuple of degree `n − 1`.
pub fn weighted_pencil<T: Real>(x: &[CMatrix<T>], z: Complex<T>, kind: PencilKind) -> Result<GammaTuple<T>> {
    let n = x.len() + 1;
    let entry = |j: usize| -> CMatrix<T> {
        let w = Complex::new(T::lit((n - j) as f64 / n as f64), T::zero());
        let m = match kind {
            PencilKind::Direct => &x[j - 1] + x[n - j - 1].adjoint() * z,
            PencilKind::Adjoint => x[j - 1].adjoint() + &x[n - j - 1] * z,
        };
        m * w
    };
    let mut e: Vec<CMatrix<T>> = (1..n).map(entry).collect();
    let p = e.pop().ok_or_else(|| LabError::InvalidArgument("pencil needs n ≥ 2".into()))?;
    GammaTuple::new(e, p)
}

/// Unit-circle grid `e^{2πik/res}`.
pub fn circle_grid<T: Real>(res: usize) -> Vec<Complex<T>> {
    (0..res)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / res as f64;
            Complex::new(T::lit(t.cos()), T::lit(t.sin()))
        })
        .collect()
}

/// Result of testing one condition over the circle grid.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct ConditionOutcome<T: Real> {
    pub passed: bool,
    pub points_tested: usize,
    pub worst_vn_ratio: T,
    pub worst_p_norm: T,
    /// Angle and reason of the first failing grid point.
    pub first_failure: Option<(f64, String)>,
}

pub(crate) fn run_pencil<T: Real>(
    x: &[CMatrix<T>],
    kind: PencilKind,
    zs: &[Complex<T>],
    probe: Option<&VnProbe<T>>,
    tol: &Tolerances,
) -> Result<ConditionOutcome<T>> {
    let mut out = ConditionOutcome {
        passed: true,
        points_tested: 0,
        worst_vn_ratio: T::zero(),
        worst_p_norm: T::zero(),
        first_failure: None,
    };
    for &z in zs {
        let tuple = weighted_pencil(x, z, kind)?;
        let t = test_gamma_contraction(&tuple, probe, tol)?;
        out.points_tested += 1;
        out.worst_p_norm = out.worst_p_norm.max(t.p_norm);
        if let Some(r) = t.vn_ratio {
            out.worst_vn_ratio = out.worst_vn_ratio.max(r);
        }
        if !t.passed && out.first_failure.is_none() {
            out.passed = false;
            out.first_failure = Some((z.im.atan2(z.re).as_f64(), t.reason.unwrap_or_default()));
        }
    }
    Ok(out)
}

/// Report of the dilation-based sufficient condition.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct SufficiencyReport<T: Real> {
    /// True only if no falsification occurred anywhere ("certified modulo sampling").
    pub certified: bool,
    pub sigma1: ConditionOutcome<T>,
    pub sigma2: ConditionOutcome<T>,
    pub condition2: GammaTest<T>,
}

/// Checks that `Σ₁(z)`, `Σ₂(z)` (on a circle grid of `resolution` points) and
/// `((n−1)/n S₁, …, (1/n) S_{n−1})` are Γ_{n−1}-contractions.
pub fn sufficient_condition_check<T: Real>(
    g: &GammaTuple<T>,
    f: &FundamentalTuple<T>,
    fadj: &FundamentalTuple<T>,
    resolution: usize,
    config: VnConfig,
    tol: &Tolerances,
) -> Result<SufficiencyReport<T>> {
    let n = g.n();
    if n < 2 || f.n() != n || fadj.n() != n {
        return Err(LabError::DimensionMismatch("fundamental tuples do not match the tuple degree".into()));
    }
    let probe = if n - 1 >= 2 {
        Some(VnProbe::new(n - 1, config)?)
    } else {
        None
    };
    let zs = circle_grid::<T>(resolution);
    let sigma1 = run_pencil(&f.a, PencilKind::Direct, &zs, probe.as_ref(), tol)?;
    let sigma2 = run_pencil(&fadj.a, PencilKind::Adjoint, &zs, probe.as_ref(), tol)?;
    let scaled: Vec<CMatrix<T>> = (1..n)
        .map(|j| g.s(j) * Complex::new(T::lit((n - j) as f64 / n as f64), T::zero()))
        .collect();
    let mut e = scaled;
    let p = e.pop().expect("n ≥ 2");
    let cond2 = test_gamma_contraction(&GammaTuple::new(e, p)?, probe.as_ref(), tol)?;
    Ok(SufficiencyReport {
        certified: sigma1.passed && sigma2.passed && cond2.passed,
        sigma1,
        sigma2,
        condition2: cond2,
    })
}

/// Canonical split into the Γₙ-unitary part and the c.n.u. part.
#[derive(Debug, Clone)]
pub struct CnuSplit<T: Real> {
    pub unitary: Subspace<T>,
    pub cnu: Subspace<T>,
    pub unitary_tuple: GammaTuple<T>,
    pub cnu_tuple: GammaTuple<T>,
    /// `max(‖(I−Π)XΠ‖, ‖ΠX(I−Π)‖)` for `X = S₁, …, S_{n−1}, P`.
    pub reducing_residuals: Vec<T>,
}

/// Maximal subspace on which `P` is unitary: the kernel of
/// `Σ_{j≤dim} (P*ʲ D_P² Pʲ + Pʲ D_{P*}² P*ʲ)`, checked to reduce every entry.
pub fn cnu_part<T: Real>(g: &GammaTuple<T>, tol: &Tolerances) -> Result<CnuSplit<T>> {
    let dim = g.dim();
    let (unitary, cnu) = unitary_subspace(g.p(), tol);
    let proj = unitary.projector();
    let off = CMatrix::<T>::identity(dim, dim) - &proj;
    let mut reducing_residuals = Vec::new();
    for (k, x) in g.entries().iter().enumerate() {
        let r = op_norm(&(&off * x * &proj)).max(op_norm(&(&proj * x * &off)));
        if r > tol.eq::<T>() * (T::one() + op_norm(x)) {
            return Err(LabError::NotReducing {
                index: k + 1,
                residual: r.as_f64(),
            });
        }
        reducing_residuals.push(r);
    }
    Ok(CnuSplit {
        unitary_tuple: g.compress(&unitary.basis),
        cnu_tuple: g.compress(&cnu.basis),
        unitary,
        cnu,
        reducing_residuals,
    })
}

/// The unitary subspace of a contraction and its orthogonal complement.
pub fn unitary_subspace<T: Real>(p: &CMatrix<T>, tol: &Tolerances) -> (Subspace<T>, Subspace<T>) {
    let dim = p.nrows();
    let id = CMatrix::<T>::identity(dim, dim);
    let dp2 = &id - p.adjoint() * p;
    let dps2 = &id - p * p.adjoint();
    let mut m = CMatrix::<T>::zeros(dim, dim);
    let mut pj = id.clone();
    for _ in 0..=dim {
        m += pj.adjoint() * &dp2 * &pj + &pj * &dps2 * pj.adjoint();
        pj = &pj * p;
    }
    let (vals, vecs) = hermitian_eigen(&m);
    let cut = tol.rank::<T>() * vals.first().copied().unwrap_or(T::zero()).max(T::one());
    let kernel: Vec<usize> = (0..dim).filter(|&k| vals[k] <= cut).collect();
    let range: Vec<usize> = (0..dim).filter(|&k| vals[k] > cut).collect();
    let pick = |idx: &[usize]| {
        let mut b = CMatrix::zeros(dim, idx.len());
        for (d, &s) in idx.iter().enumerate() {
            b.set_column(d, &vecs.column(s));
        }
        Subspace::from_basis(b)
    };
    (pick(&kernel), pick(&range))
}
