//! Dense complex linear algebra shared by every other module.
//!
//! Everything here is a pure function of its inputs. Randomized routines take
//! an explicit seed so repeated calls are bit-identical.

use nalgebra::{Complex, ComplexField, DMatrix, Schur, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::Real;

/// Dense complex matrix, the carrier of every operator in the crate.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Builds a complex scalar from two `f64` parts.
pub fn cx<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// Promotes a real scalar to a complex one.
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Numerical thresholds used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Residual threshold for identities that hold exactly in theory.
    pub eq_tol: f64,
    /// Relative threshold for deciding that a singular value is zero.
    pub rank_tol: f64,
    /// Margin required before declaring a falsification.
    pub cert_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eq_tol: 1e-8,
            rank_tol: 1e-10,
            cert_tol: 1e-6,
        }
    }
}

impl Tolerances {
    /// Validated constructor: all positive and `rank_tol < eq_tol < 1`.
    pub fn new(eq_tol: f64, rank_tol: f64, cert_tol: f64) -> Result<Self> {
        let ok = eq_tol > 0.0 && rank_tol > 0.0 && cert_tol > 0.0 && rank_tol < eq_tol && eq_tol < 1.0;
        if !ok {
            return Err(LabError::InvalidArgument(format!(
                "tolerances must satisfy 0 < rank_tol < eq_tol < 1 and cert_tol > 0 (got eq {eq_tol}, rank {rank_tol}, cert {cert_tol})"
            )));
        }
        Ok(Self {
            eq_tol,
            rank_tol,
            cert_tol,
        })
    }

    pub fn eq<T: Real>(&self) -> T {
        T::lit(self.eq_tol)
    }

    pub fn rank<T: Real>(&self) -> T {
        T::lit(self.rank_tol)
    }

    pub fn cert<T: Real>(&self) -> T {
        T::lit(self.cert_tol)
    }
}

/// A subspace of `C^ambient_dim` given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace<T: Real> {
    pub ambient_dim: usize,
    /// Columns form an orthonormal basis.
    pub basis: CMatrix<T>,
}

impl<T: Real> Subspace<T> {
    /// Wraps a matrix whose columns are assumed orthonormal.
    pub fn from_basis(basis: CMatrix<T>) -> Self {
        Self {
            ambient_dim: basis.nrows(),
            basis,
        }
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Self::from_basis(CMatrix::zeros(ambient_dim, 0))
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self::from_basis(CMatrix::identity(ambient_dim, ambient_dim))
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> CMatrix<T> {
        &self.basis * self.basis.adjoint()
    }

    /// Orthogonal complement in the ambient space.
    pub fn complement(&self, tol: &Tolerances) -> Self {
        let id = CMatrix::<T>::identity(self.ambient_dim, self.ambient_dim);
        let q = id - self.projector();
        let mut c = range_basis(&q, tol);
        // The complement of a proper subspace has exactly the remaining dimension.
        let want = self.ambient_dim - self.dim();
        if c.dim() > want {
            c.basis = c.basis.columns(0, want).into_owned();
        }
        c
    }

    /// `‖B*B − I‖`, the orthonormality defect of the stored basis.
    pub fn orthonormality_residual(&self) -> T {
        let g = self.basis.adjoint() * &self.basis;
        op_norm(&(g - CMatrix::identity(self.dim(), self.dim())))
    }
}

/// Largest singular value; zero for empty matrices.
pub fn op_norm<T: Real>(m: &CMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().fold(T::zero(), |a, &b| if b > a { b } else { a })
}

/// Frobenius norm.
pub fn fro_norm<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Singular values in non-increasing order.
pub fn singular_values<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<T> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// `‖AB − BA‖`.
pub fn commutator_norm<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    op_norm(&(a * b - b * a))
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues in non-increasing order.
pub fn hermitian_eigen<T: Real>(m: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()).scale(T::lit(0.5));
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues at or below `rank_tol · λ_max` are treated as exact zeros, so
/// roundoff in `I − P*P` does not manufacture spurious defect directions.
pub fn psd_sqrt<T: Real>(m: &CMatrix<T>, tol: &Tolerances) -> Result<CMatrix<T>> {
    psd_sqrt_scaled(m, T::zero(), tol)
}

/// [`psd_sqrt`] with eigenvalues below `rank_tol·max(λmax, scale)` clipped.
///
/// A positive `scale` gives an absolute floor, which is what defect
/// operators of near-isometries need.
pub fn psd_sqrt_scaled<T: Real>(m: &CMatrix<T>, scale: T, tol: &Tolerances) -> Result<CMatrix<T>> {
    if m.nrows() != m.ncols() {
        return Err(LabError::DimensionMismatch(format!(
            "psd_sqrt needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let norm = op_norm(m);
    let herm = op_norm(&(m - m.adjoint()));
    if herm > tol.eq::<T>() * norm {
        return Err(LabError::NotHermitian {
            residual: herm.as_f64(),
        });
    }
    let (vals, vecs) = hermitian_eigen(m);
    let lmin = vals[n - 1];
    if lmin < -tol.eq::<T>() {
        return Err(LabError::NotPsd {
            min_eigenvalue: lmin.as_f64(),
        });
    }
    let cut = tol.rank::<T>() * vals[0].max(scale).max(T::zero());
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let r = if l > cut { l.sqrt() } else { T::zero() };
        scaled.column_mut(j).scale_mut(r);
    }
    let s = &scaled * vecs.adjoint();
    Ok((&s + s.adjoint()).scale(T::lit(0.5)))
}

/// Orthonormal basis for the numerical range of `m`.
pub fn range_basis<T: Real>(m: &CMatrix<T>, tol: &Tolerances) -> Subspace<T> {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return Subspace::zero(rows);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(T::zero(), |a, &b| if b > a { b } else { a });
    if smax <= T::zero() {
        return Subspace::zero(rows);
    }
    let cut = tol.rank::<T>() * smax;
    let mut idx: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > cut).collect();
    idx.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut basis = CMatrix::zeros(rows, idx.len());
    for (dst, &src) in idx.iter().enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    Subspace::from_basis(basis)
}

/// Moore–Penrose pseudo-inverse with the crate's rank threshold.
pub fn pinv<T: Real>(m: &CMatrix<T>, tol: &Tolerances) -> CMatrix<T> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return CMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().fold(T::zero(), |a, &b| if b > a { b } else { a });
    let cut = tol.rank::<T>() * smax;
    let mut out = CMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > T::zero() {
            let col = vt.row(k).adjoint() * u.column(k).adjoint();
            out += col.scale(T::one() / s);
        }
    }
    out
}

/// A boolean structural verdict together with its defining residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StructureCheck<T: Real> {
    pub holds: bool,
    pub residual: T,
}

fn structure<T: Real>(residual: T, m: &CMatrix<T>, tol: &Tolerances) -> StructureCheck<T> {
    let scale = op_norm(m).max(T::one());
    StructureCheck {
        holds: residual <= tol.eq::<T>() * scale * scale,
        residual,
    }
}

/// Checks `M*M = I`.
pub fn is_isometry<T: Real>(m: &CMatrix<T>, tol: &Tolerances) -> StructureCheck<T> {
    let g = m.adjoint() * m;
    let r = op_norm(&(g - CMatrix::identity(m.ncols(), m.ncols())));
    structure(r, m, tol)
}

/// Checks `M*M = I` and `MM* = I`.
pub fn is_unitary<T: Real>(m: &CMatrix<T>, tol: &Tolerances) -> StructureCheck<T> {
    let n = m.nrows();
    let a = op_norm(&(m.adjoint() * m - CMatrix::identity(m.ncols(), m.ncols())));
    let b = op_norm(&(m * m.adjoint() - CMatrix::identity(n, n)));
    structure(a.max(b), m, tol)
}

/// Checks `MM* = M*M`.
pub fn is_normal<T: Real>(m: &CMatrix<T>, tol: &Tolerances) -> StructureCheck<T> {
    let r = op_norm(&(m * m.adjoint() - m.adjoint() * m));
    structure(r, m, tol)
}

/// Unitary (or partial isometry) factor `UV*` of the polar decomposition.
pub fn polar_unitary<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return CMatrix::zeros(r, c);
    }
    let svd = m.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

/// Seeded ChaCha generator used by every randomized routine.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian draw, `E|z|² = 1`.
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    cx(a / std::f64::consts::SQRT_2, b / std::f64::consts::SQRT_2)
}

/// Matrix of independent standard complex Gaussians.
pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<T> {
    let mut m = CMatrix::zeros(rows, cols);
    // Fill row by row so the draw order is independent of storage layout.
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

/// Haar-distributed unitary via phase-corrected QR of a Ginibre matrix.
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix<T> {
    if dim == 0 {
        return CMatrix::zeros(0, 0);
    }
    let g = gaussian_matrix::<T, R>(dim, dim, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let a = d.modulus();
        if a > T::zero() {
            let phase = d / re(a);
            for i in 0..dim {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Joint eigenvalues of pairwise commuting matrices.
///
/// A random real combination is Schur-triangularized and the diagonals of all
/// conjugated inputs are read off. Up to five combinations are tried.
pub fn joint_eigenvalues<T: Real>(ts: &[CMatrix<T>], tol: &Tolerances, seed: u64) -> Result<Vec<Vec<Complex<T>>>> {
    if ts.is_empty() {
        return Ok(Vec::new());
    }
    let dim = ts[0].nrows();
    for (k, t) in ts.iter().enumerate() {
        if t.nrows() != dim || t.ncols() != dim {
            return Err(LabError::DimensionMismatch(format!(
                "entry {k} is {}x{}, expected {dim}x{dim}",
                t.nrows(),
                t.ncols()
            )));
        }
    }
    if dim == 0 {
        return Ok(Vec::new());
    }
    let norms: Vec<T> = ts.iter().map(op_norm).collect();
    for i in 0..ts.len() {
        for j in (i + 1)..ts.len() {
            let r = commutator_norm(&ts[i], &ts[j]);
            if r > tol.eq::<T>() * (norms[i] * norms[j] + T::one()) {
                return Err(LabError::NotCommuting {
                    i,
                    j,
                    residual: r.as_f64(),
                });
            }
        }
    }
    let mut rng = seeded_rng(seed);
    let floor = T::eps() * T::lit(100.0);
    let mut worst = T::zero();
    const ATTEMPTS: usize = 5;
    for _ in 0..ATTEMPTS {
        let mut l = CMatrix::<T>::zeros(dim, dim);
        for t in ts {
            let c: f64 = rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            l += t.scale(T::lit(c));
        }
        let q = match Schur::try_new(l.clone(), T::eps(), 10_000) {
            Some(schur) => schur.unpack().0,
            None => {
                // Break exact nilpotent structure that can stall the QR sweep.
                let w = haar_unitary::<T, _>(dim, &mut rng);
                match Schur::try_new(w.adjoint() * &l * &w, T::eps(), 10_000) {
                    Some(schur) => w * schur.unpack().0,
                    None => continue,
                }
            }
        };
        let conj: Vec<CMatrix<T>> = ts.iter().map(|t| q.adjoint() * t * &q).collect();
        let mut ok = true;
        worst = T::zero();
        for (t, n) in conj.iter().zip(&norms) {
            let mut low = T::zero();
            for j in 0..dim {
                for i in (j + 1)..dim {
                    low += t[(i, j)].norm_sqr();
                }
            }
            let low = low.sqrt();
            worst = worst.max(low);
            if low > tol.eq::<T>() * *n + floor {
                ok = false;
            }
        }
        if ok {
            return Ok((0..dim).map(|k| conj.iter().map(|t| t[(k, k)]).collect()).collect());
        }
    }
    Err(LabError::TriangularizationFailed {
        attempts: ATTEMPTS,
        residual: worst.as_f64(),
    })
}

/// Block-diagonal assembly of square or rectangular blocks.
pub fn block_diag<T: Real>(blocks: &[&CMatrix<T>]) -> CMatrix<T> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Interchange form of a matrix: `{"rows", "cols", "data": [[re, im], …]}` in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl CMatrixJson {
    pub fn from_matrix<T: Real>(m: &CMatrix<T>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re.as_f64(), z.im.as_f64()]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    /// Converts back, checking the entry count and finiteness.
    pub fn to_matrix<T: Real>(&self) -> Result<CMatrix<T>> {
        if self.data.len() != self.rows * self.cols {
            return Err(LabError::Malformed(format!(
                "matrix data has {} entries, expected rows·cols = {}",
                self.data.len(),
                self.rows * self.cols
            )));
        }
        if let Some(k) = self.data.iter().position(|z| !z[0].is_finite() || !z[1].is_finite()) {
            return Err(LabError::Malformed(format!("matrix entry {k} is not finite")));
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let z = self.data[i * self.cols + j];
            cx(z[0], z[1])
        }))
    }
}

/// Serde adapters that write matrices and complex numbers in the interchange format.
pub mod serde_fmt {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub mod matrix {
        use super::*;

        pub fn serialize<T: Real, S: Serializer>(m: &CMatrix<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
            CMatrixJson::from_matrix(m).serialize(s)
        }

        pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix<T>, D::Error> {
            let j = CMatrixJson::deserialize(d)?;
            j.to_matrix().map_err(serde::de::Error::custom)
        }
    }

    pub mod matrices {
        use super::*;

        pub fn serialize<T: Real, S: Serializer>(ms: &[CMatrix<T>], s: S) -> std::result::Result<S::Ok, S::Error> {
            let v: Vec<CMatrixJson> = ms.iter().map(CMatrixJson::from_matrix).collect();
            v.serialize(s)
        }

        pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMatrix<T>>, D::Error> {
            let v = Vec::<CMatrixJson>::deserialize(d)?;
            v.iter()
                .map(|j| j.to_matrix().map_err(serde::de::Error::custom))
                .collect()
        }
    }

    pub mod complex {
        use super::*;

        pub fn serialize<T: Real, S: Serializer>(z: &Complex<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
            [z.re.as_f64(), z.im.as_f64()].serialize(s)
        }

        pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> std::result::Result<Complex<T>, D::Error> {
            let [a, b] = <[f64; 2]>::deserialize(d)?;
            Ok(cx(a, b))
        }
    }

    pub mod complex_vec {
        use super::*;

        pub fn serialize<T: Real, S: Serializer>(zs: &[Complex<T>], s: S) -> std::result::Result<S::Ok, S::Error> {
            let v: Vec<[f64; 2]> = zs.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect();
            v.serialize(s)
        }

        pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Complex<T>>, D::Error> {
            let v = Vec::<[f64; 2]>::deserialize(d)?;
            Ok(v.into_iter().map(|[a, b]| cx(a, b)).collect())
        }
    }

    pub mod complex_vecs {
        use super::*;

        pub fn serialize<T: Real, S: Serializer>(zs: &[Vec<Complex<T>>], s: S) -> std::result::Result<S::Ok, S::Error> {
            let v: Vec<Vec<[f64; 2]>> = zs
                .iter()
                .map(|row| row.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect())
                .collect();
            v.serialize(s)
        }

        pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<Complex<T>>>, D::Error> {
            let v = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
            Ok(v.into_iter()
                .map(|row| row.into_iter().map(|[a, b]| cx(a, b)).collect())
                .collect())
        }
    }
}
