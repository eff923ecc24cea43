//! Finite sections of block Toeplitz operators on vector-valued Hardy space:
//! pencil symbols, pure Γₙ-isometry checks and the intertwining of pencils
//! through an inner matrix polynomial.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::gammaops::{circle_grid, run_pencil, ConditionOutcome, PencilKind, VnConfig, VnProbe};
use crate::matcore::{commutator_norm, op_norm, serde_fmt, CMatrix, Tolerances};
use crate::scalar::Real;

/// The pencil `φ(z) = constant + z·linear` with square coefficients of equal size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PencilSymbol<T: Real> {
    #[serde(rename = "const", with = "serde_fmt::matrix")]
    pub constant: CMatrix<T>,
    #[serde(with = "serde_fmt::matrix")]
    pub linear: CMatrix<T>,
}

impl<T: Real> PencilSymbol<T> {
    pub fn new(constant: CMatrix<T>, linear: CMatrix<T>) -> Result<Self> {
        if !constant.is_square() || constant.shape() != linear.shape() {
            return Err(LabError::DimensionMismatch(format!(
                "pencil coefficients are {:?} and {:?}",
                constant.shape(),
                linear.shape()
            )));
        }
        Ok(Self { constant, linear })
    }

    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, z: Complex<T>) -> CMatrix<T> {
        &self.constant + &self.linear * z
    }

    pub fn as_polynomial(&self) -> MatrixPolynomial<T> {
        MatrixPolynomial {
            coeffs: vec![self.constant.clone(), self.linear.clone()],
        }
    }
}

/// `Θ(z) = Σ_j z^j C_j` with coefficients of a common shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MatrixPolynomial<T: Real> {
    #[serde(with = "serde_fmt::matrices")]
    pub coeffs: Vec<CMatrix<T>>,
}

impl<T: Real> MatrixPolynomial<T> {
    pub fn new(coeffs: Vec<CMatrix<T>>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| LabError::InvalidArgument("matrix polynomial needs a coefficient".into()))?
            .shape();
        if coeffs.iter().any(|c| c.shape() != first) {
            return Err(LabError::DimensionMismatch("coefficients differ in shape".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coeffs[0].shape()
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex<T>) -> CMatrix<T> {
        let mut acc = self.coeffs[self.degree()].clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc * z + c;
        }
        acc
    }

    /// Block lower-triangular section with `depth + 1` block rows and columns.
    pub fn toeplitz_section(&self, depth: usize) -> CMatrix<T> {
        let (r, c) = self.shape();
        let mut m = CMatrix::zeros(r * (depth + 1), c * (depth + 1));
        for col in 0..=depth {
            for (j, coeff) in self.coeffs.iter().enumerate() {
                let row = col + j;
                if row > depth {
                    break;
                }
                m.view_mut((row * r, col * c), (r, c)).copy_from(coeff);
            }
        }
        m
    }

    /// `max ‖Θ(e^{it})*Θ(e^{it}) − I‖` over `res` equally spaced angles.
    pub fn inner_residual(&self, res: usize) -> T {
        let c = self.shape().1;
        let id = CMatrix::<T>::identity(c, c);
        circle_grid::<T>(res)
            .iter()
            .map(|&z| {
                let v = self.eval(z);
                op_norm(&(v.adjoint() * v - &id))
            })
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Finite section of `T_φ` on `H²(ℂᵏ)` truncated after `depth` powers of `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzTrunc<T: Real> {
    pub symbol: PencilSymbol<T>,
    pub depth: usize,
    pub matrix: CMatrix<T>,
}

/// Block bidiagonal section: `constant` on the diagonal, `linear` below it.
pub fn toeplitz<T: Real>(symbol: &PencilSymbol<T>, depth: usize) -> Result<ToeplitzTrunc<T>> {
    if depth < 2 {
        return Err(LabError::TruncationTooShallow { depth, required: 2 });
    }
    Ok(ToeplitzTrunc {
        matrix: symbol.as_polynomial().toeplitz_section(depth),
        symbol: symbol.clone(),
        depth,
    })
}

/// First `keep_blocks · k` columns of `m`.
fn leading_columns<T: Real>(m: &CMatrix<T>, cols: usize) -> CMatrix<T> {
    m.columns(0, cols).into_owned()
}

/// Outcome of [`pure_gamma_isometry_check`].
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct PureIsometryVerdict<T: Real> {
    pub passed: bool,
    pub reason: Option<String>,
    /// Largest pairwise commutator among the Toeplitz entries.
    pub commutation_residual: T,
    /// `max_i ‖(T_{φ_i} − T_{φ_{n−i}}*T_z)|interior‖`.
    pub algebra_residual: T,
    /// The weighted pencils on the unimodular grid.
    pub pencils: ConditionOutcome<T>,
}

/// Builds `(T_{F_i*+F_{n−i}z})_i` with `T_z` and checks that it is a pure Γₙ-isometry.
///
/// Commutation and the isometry algebra are verified on the finite section.
/// Contractivity reduces to the weighted pencils being Γ_{n−1}-contractions on `resolution` unimodular points.
pub fn pure_gamma_isometry_check<T: Real>(
    f: &[CMatrix<T>],
    depth: usize,
    resolution: usize,
    config: VnConfig,
    tol: &Tolerances,
) -> Result<PureIsometryVerdict<T>> {
    let n = f.len() + 1;
    if n < 2 {
        return Err(LabError::InvalidArgument("need at least one symbol coefficient".into()));
    }
    let k = f[0].nrows();
    if f.iter().any(|m| m.shape() != (k, k)) {
        return Err(LabError::DimensionMismatch("symbol coefficients differ in shape".into()));
    }
    let symbols: Vec<PencilSymbol<T>> = (1..n)
        .map(|i| PencilSymbol::new(f[i - 1].adjoint(), f[n - i - 1].clone()))
        .collect::<Result<_>>()?;
    let ts: Vec<CMatrix<T>> = symbols
        .iter()
        .map(|s| toeplitz(s, depth).map(|t| t.matrix))
        .collect::<Result<_>>()?;
    let id = CMatrix::<T>::identity(k, k);
    let shift = toeplitz(&PencilSymbol::new(CMatrix::zeros(k, k), id)?, depth)?.matrix;

    let mut all = ts.clone();
    all.push(shift.clone());
    let norms: Vec<T> = all.iter().map(op_norm).collect();
    let mut comm = T::zero();
    for a in 0..all.len() {
        for b in (a + 1)..all.len() {
            comm = comm.max(commutator_norm(&all[a], &all[b]) / (T::one() + norms[a] * norms[b]));
        }
    }
    let interior = k * depth;
    let mut algebra = T::zero();
    for i in 1..n {
        let d = &ts[i - 1] - ts[n - i - 1].adjoint() * &shift;
        algebra = algebra.max(op_norm(&leading_columns(&d, interior)));
    }

    let probe = if n - 1 >= 2 { Some(VnProbe::new(n - 1, config)?) } else { None };
    let pencils = run_pencil(f, PencilKind::Adjoint, &circle_grid::<T>(resolution), probe.as_ref(), tol)?;

    let reason = if comm > tol.eq::<T>() {
        Some(format!("Toeplitz entries do not commute (residual {:.3e})", comm.as_f64()))
    } else if algebra > tol.eq::<T>() {
        Some(format!("T_φi ≠ T_φ(n−i)* T_z on the interior (residual {:.3e})", algebra.as_f64()))
    } else if !pencils.passed {
        Some(match &pencils.first_failure {
            Some((angle, why)) => format!("weighted pencil fails at angle {angle:.4}: {why}"),
            None => "weighted pencil fails".into(),
        })
    } else {
        None
    };
    Ok(PureIsometryVerdict {
        passed: reason.is_none(),
        reason,
        commutation_residual: comm,
        algebra_residual: algebra,
        pencils,
    })
}

/// Output of [`blh_intertwine`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BlhResult<T: Real> {
    /// `B₁, …, B_{n−1}` with `(A_i* + zA_{n−i})Θ = Θ(B_i + zB_{n−i}*)`.
    #[serde(with = "serde_fmt::matrices")]
    pub b: Vec<CMatrix<T>>,
    /// `max ‖(A_i* + zA_{n−i})Θ(z) − Θ(z)(B_i + zB_{n−i}*)‖` over the disc grid.
    pub residual: T,
    /// Deviation of the compressed sections from bidiagonal Toeplitz form on interior blocks.
    pub structure_residual: T,
    /// `max ‖T_φ T_Θ − T_Θ T_ψ‖` on the section, i.e. invariance of the range of `T_Θ`.
    pub invariance_residual: T,
    pub inner_residual: T,
    pub depth: usize,
}

/// 32 points: two circles of radius 0.45 and 0.9.
pub fn disc_grid<T: Real>() -> Vec<Complex<T>> {
    let mut v = Vec::with_capacity(32);
    for r in [0.45, 0.9] {
        for z in circle_grid::<T>(16) {
            v.push(z * Complex::new(T::lit(r), T::zero()));
        }
    }
    v
}

/// Extracts `B_i` from `G_i = T_Θ* T_{A_i*+zA_{n−i}} T_Θ` and checks the intertwining identity.
///
/// `theta` maps `ℂᵐ → ℂᵏ` and must have isometric boundary values; the `A_i` are `k×k`.
pub fn blh_intertwine<T: Real>(
    theta: &MatrixPolynomial<T>,
    a: &[CMatrix<T>],
    depth: usize,
    tol: &Tolerances,
) -> Result<BlhResult<T>> {
    let n = a.len() + 1;
    let (k, m) = theta.shape();
    if n < 2 || a.iter().any(|x| x.shape() != (k, k)) {
        return Err(LabError::DimensionMismatch(format!(
            "A_i must be {k}x{k} to act on the range of Θ"
        )));
    }
    let deg = theta.degree();
    let required = 2 * (1 + deg);
    if depth < required {
        return Err(LabError::TruncationTooShallow { depth, required });
    }
    let inner_residual = theta.inner_residual(64);
    if inner_residual > tol.eq::<T>() {
        return Err(LabError::NotInner {
            residual: inner_residual.as_f64(),
        });
    }
    let t_theta = theta.toeplitz_section(depth);
    let blocks = depth + 1;
    // Rows of T_Θ* T_φ T_Θ past this block index see the truncation.
    let interior = blocks - (deg + 1);

    let mut diag = Vec::with_capacity(n - 1);
    let mut sub = Vec::with_capacity(n - 1);
    let mut structure = T::zero();
    let mut sections = Vec::with_capacity(n - 1);
    for i in 1..n {
        let phi = PencilSymbol::new(a[i - 1].adjoint(), a[n - i - 1].clone())?;
        let t_phi = phi.as_polynomial().toeplitz_section(depth);
        let g = t_theta.adjoint() * &t_phi * &t_theta;
        let block = |r: usize, c: usize| g.view((r * m, c * m), (m, m)).into_owned();
        let b_diag = block(0, 0);
        let b_sub = block(1, 0);
        for r in 0..interior {
            for c in 0..interior {
                let want = if r == c {
                    b_diag.clone()
                } else if r == c + 1 {
                    b_sub.clone()
                } else {
                    CMatrix::zeros(m, m)
                };
                structure = structure.max(op_norm(&(block(r, c) - want)));
            }
        }
        diag.push(b_diag);
        sub.push(b_sub);
        sections.push(t_phi);
    }
    // The subdiagonal of G_i is B_{n−i}*, which must agree with the diagonal of G_{n−i}.
    for i in 1..n {
        structure = structure.max(op_norm(&(&sub[i - 1] - diag[n - i - 1].adjoint())));
    }
    if structure > tol.eq::<T>() {
        return Err(LabError::NotToeplitz {
            residual: structure.as_f64(),
        });
    }
    let b = diag;

    let mut invariance = T::zero();
    for i in 1..n {
        let psi = PencilSymbol::new(b[i - 1].clone(), b[n - i - 1].adjoint())?;
        let t_psi = psi.as_polynomial().toeplitz_section(depth);
        invariance = invariance.max(op_norm(&(&sections[i - 1] * &t_theta - &t_theta * t_psi)));
    }

    let mut residual = T::zero();
    for z in disc_grid::<T>() {
        let th = theta.eval(z);
        for i in 1..n {
            let lhs = (a[i - 1].adjoint() + &a[n - i - 1] * z) * &th;
            let rhs = &th * (&b[i - 1] + b[n - i - 1].adjoint() * z);
            residual = residual.max(op_norm(&(lhs - rhs)));
        }
    }
    Ok(BlhResult {
        b,
        residual,
        structure_residual: structure,
        invariance_residual: invariance,
        inner_residual,
        depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{cx, gaussian_matrix, haar_unitary, seeded_rng};

    type M = CMatrix<f64>;

    fn small() -> VnConfig {
        VnConfig {
            samples: 30,
            ..VnConfig::default()
        }
    }

    #[test]
    fn shift_and_identity_sections() {
        let k = 2;
        let shift = toeplitz(&PencilSymbol::new(M::zeros(k, k), M::identity(k, k)).unwrap(), 3).unwrap();
        let mut want = M::zeros(8, 8);
        for r in 2..8 {
            want[(r, r - 2)] = cx(1.0, 0.0);
        }
        assert_eq!(shift.matrix, want);
        let id = toeplitz(&PencilSymbol::new(M::identity(k, k), M::zeros(k, k)).unwrap(), 3).unwrap();
        assert_eq!(id.matrix, M::identity(8, 8));
        assert!(toeplitz(&PencilSymbol::new(M::zeros(1, 1), M::zeros(1, 1)).unwrap(), 1).is_err());
    }

    #[test]
    fn bidiagonal_assembly_blockwise() {
        let mut rng = seeded_rng(3);
        let f: M = gaussian_matrix(2, 2, &mut rng);
        let g: M = gaussian_matrix(2, 2, &mut rng);
        let t = toeplitz(&PencilSymbol::new(f.adjoint(), g.clone()).unwrap(), 2).unwrap();
        assert_eq!(t.matrix.shape(), (6, 6));
        for r in 0..3 {
            for c in 0..3 {
                let blk = t.matrix.view((2 * r, 2 * c), (2, 2)).into_owned();
                let want = if r == c {
                    f.adjoint()
                } else if r == c + 1 {
                    g.clone()
                } else {
                    M::zeros(2, 2)
                };
                assert_eq!(blk, want);
            }
        }
    }

    #[test]
    fn pure_isometry_examples() {
        let tol = Tolerances::default();
        let zero = vec![M::zeros(2, 2); 2];
        let v = pure_gamma_isometry_check(&zero, 4, 16, small(), &tol).unwrap();
        assert!(v.passed, "{v:?}");
        let half = vec![M::from_element(1, 1, cx(0.5, 0.0))];
        let v = pure_gamma_isometry_check(&half, 4, 32, small(), &tol).unwrap();
        assert!(v.passed);
        // sup over the circle of |½(0.5 + 0.5z)| is ½, attained at z = 1.
        assert!((v.pencils.worst_p_norm - 0.5).abs() < 1e-12);
        let three = vec![M::identity(2, 2) * cx(3.0, 0.0)];
        let v = pure_gamma_isometry_check(&three, 4, 16, small(), &tol).unwrap();
        assert!(!v.passed);
        assert!(v.algebra_residual < 1e-12);
    }

    #[test]
    fn blh_scalar_blaschke() {
        let tol = Tolerances::default();
        let mut rng = seeded_rng(9);
        let a: Vec<M> = (0..2).map(|_| gaussian_matrix(2, 2, &mut rng)).collect();
        let theta = MatrixPolynomial::new(vec![M::zeros(2, 2), M::identity(2, 2)]).unwrap();
        let r = blh_intertwine(&theta, &a, 6, &tol).unwrap();
        for i in 0..2 {
            assert!(op_norm(&(&r.b[i] - a[i].adjoint())) < 1e-12);
        }
        assert!(r.residual < 1e-12 && r.invariance_residual < 1e-12);
    }

    #[test]
    fn blh_constant_unitary() {
        let tol = Tolerances::default();
        let mut rng = seeded_rng(4);
        let w: M = haar_unitary(3, &mut rng);
        let a: Vec<M> = (0..3).map(|_| gaussian_matrix(3, 3, &mut rng)).collect();
        let theta = MatrixPolynomial::new(vec![w.clone()]).unwrap();
        let r = blh_intertwine(&theta, &a, 4, &tol).unwrap();
        for i in 1..4 {
            // Oracle: B_i + zB_{n−i}* = W*(A_i* + zA_{n−i})W.
            assert!(op_norm(&(&r.b[i - 1] - w.adjoint() * a[i - 1].adjoint() * &w)) < 1e-12);
        }
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn blh_diagonal_mixture_and_depth_stability() {
        let tol = Tolerances::default();
        let d = |x: f64, y: f64| M::from_diagonal(&nalgebra::DVector::from_vec(vec![cx(x, 0.0), cx(0.0, y)]));
        let a = vec![d(0.3, 0.2), d(-0.1, 0.4)];
        let theta = MatrixPolynomial::new(vec![d(0.0, 1.0) * cx(0.0, -1.0), d(1.0, 0.0)]).unwrap();
        let r1 = blh_intertwine(&theta, &a, 4, &tol).unwrap();
        let r2 = blh_intertwine(&theta, &a, 8, &tol).unwrap();
        assert!(r1.residual < 1e-8);
        for (x, y) in r1.b.iter().zip(&r2.b) {
            assert!(op_norm(&(x - y)) < 1e-10);
        }
    }

    #[test]
    fn blh_rejects_non_inner_and_non_invariant() {
        let tol = Tolerances::default();
        let a = vec![M::identity(2, 2), M::identity(2, 2)];
        let half = MatrixPolynomial::new(vec![M::identity(2, 2) * cx(0.5, 0.0)]).unwrap();
        assert!(matches!(blh_intertwine(&half, &a, 4, &tol), Err(LabError::NotInner { .. })));
        // Range of diag(z, 1) is not invariant under a pencil mixing the coordinates.
        let mut mix = M::zeros(2, 2);
        mix[(0, 1)] = cx(1.0, 0.0);
        let theta = MatrixPolynomial::new(vec![
            M::from_diagonal(&nalgebra::DVector::from_vec(vec![cx(0.0, 0.0), cx(1.0, 0.0)])),
            M::from_diagonal(&nalgebra::DVector::from_vec(vec![cx(1.0, 0.0), cx(0.0, 0.0)])),
        ])
        .unwrap();
        let mix = mix.adjoint();
        let r = blh_intertwine(&theta, &[mix.clone(), mix], 4, &tol);
        assert!(matches!(r, Err(LabError::NotToeplitz { .. })), "{r:?}");
    }
}
