//! Γₙ-contractions: tuples, defect operators, fundamental operator tuples,
//! contractivity falsification, classification and example generators.

mod classify;
mod generators;
mod vn;

pub use classify::{
    circle_grid, classify, classify_with, cnu_part, sufficient_condition_check, test_gamma_contraction,
    unitary_subspace, weighted_pencil, ClassifyReport, CnuSplit, ConditionOutcome, GammaClass, GammaTest,
    PencilKind, SufficiencyReport,
};
pub(crate) use classify::run_pencil;
pub use generators::{
    gen_diagonal, gen_diagonal_normal, gen_diagonal_unitary, gen_symmetrized_ando, random_conjugate, symmetrize_operators,
    PointLaw,
};
pub use vn::{monomial_exponents, vn_falsify, vn_falsify_with, MultiPoly, VnConfig, VnProbe, VnVerdict};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::matcore::{
    commutator_norm, hermitian_eigen, op_norm, psd_sqrt_scaled, range_basis, CMatrix, CMatrixJson, Subspace, Tolerances,
};
use crate::polydisc::GammaPoint;
use crate::scalar::Real;

/// A tuple `(S₁, …, S_{n−1}, P)` of square matrices of a common size.
///
/// Construction only checks shapes; [`GammaTuple::validate`] checks the
/// commutation and contractivity invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTuple<T: Real> {
    n: usize,
    s: Vec<CMatrix<T>>,
    p: CMatrix<T>,
}

impl<T: Real> GammaTuple<T> {
    /// Builds the tuple with `n = s.len() + 1`.
    pub fn new(s: Vec<CMatrix<T>>, p: CMatrix<T>) -> Result<Self> {
        let dim = p.nrows();
        if p.ncols() != dim {
            return Err(LabError::DimensionMismatch(format!("P is {}x{}", p.nrows(), p.ncols())));
        }
        for (k, m) in s.iter().enumerate() {
            if m.shape() != (dim, dim) {
                return Err(LabError::DimensionMismatch(format!(
                    "S_{} is {}x{}, expected {dim}x{dim}",
                    k + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Self { n: s.len() + 1, s, p })
    }

    /// A 1×1 tuple holding the coordinates of a point.
    pub fn from_point(pt: &GammaPoint<T>) -> Self {
        let one = |z| CMatrix::from_element(1, 1, z);
        let s = pt.coords[..pt.n - 1].iter().map(|&z| one(z)).collect();
        Self {
            n: pt.n,
            s,
            p: one(pt.p()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// `S_i` for `1 ≤ i ≤ n − 1`.
    pub fn s(&self, i: usize) -> &CMatrix<T> {
        &self.s[i - 1]
    }

    pub fn s_all(&self) -> &[CMatrix<T>] {
        &self.s
    }

    pub fn p(&self) -> &CMatrix<T> {
        &self.p
    }

    /// All entries in order `S₁, …, S_{n−1}, P`.
    pub fn entries(&self) -> Vec<CMatrix<T>> {
        let mut v = self.s.clone();
        v.push(self.p.clone());
        v
    }

    /// `(S₁*, …, S_{n−1}*, P*)`.
    pub fn adjoint(&self) -> Self {
        Self {
            n: self.n,
            s: self.s.iter().map(|m| m.adjoint()).collect(),
            p: self.p.adjoint(),
        }
    }

    /// Applies `X ↦ f(X)` to every entry.
    pub fn map(&self, f: impl Fn(&CMatrix<T>) -> CMatrix<T>) -> Self {
        Self {
            n: self.n,
            s: self.s.iter().map(&f).collect(),
            p: f(&self.p),
        }
    }

    /// `X ↦ UXU*` for a unitary `U`.
    pub fn conjugate(&self, u: &CMatrix<T>) -> Self {
        self.map(|m| u * m * u.adjoint())
    }

    /// `X ↦ B*XB` for an isometry `B`; restriction to a reducing subspace.
    pub fn compress(&self, basis: &CMatrix<T>) -> Self {
        self.map(|m| basis.adjoint() * m * basis)
    }

    /// Orthogonal direct sum of two tuples of the same degree.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(LabError::DimensionMismatch(format!(
                "degrees differ: {} vs {}",
                self.n, other.n
            )));
        }
        let sum = |a: &CMatrix<T>, b: &CMatrix<T>| crate::matcore::block_diag(&[a, b]);
        Ok(Self {
            n: self.n,
            s: self.s.iter().zip(&other.s).map(|(a, b)| sum(a, b)).collect(),
            p: sum(&self.p, &other.p),
        })
    }

    /// Largest commutator norm relative to `‖X‖‖Y‖ + 1`, with the offending pair.
    pub fn commutation_defect(&self) -> (T, usize, usize) {
        let e = self.entries();
        let norms: Vec<T> = e.iter().map(op_norm).collect();
        let mut worst = (T::zero(), 0, 0);
        for i in 0..e.len() {
            for j in (i + 1)..e.len() {
                let r = commutator_norm(&e[i], &e[j]) / (norms[i] * norms[j] + T::one());
                if r > worst.0 {
                    worst = (r, i, j);
                }
            }
        }
        worst
    }

    /// Checks pairwise commutation and `‖P‖ ≤ 1 + cert_tol`.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let (r, i, j) = self.commutation_defect();
        if r > tol.eq::<T>() {
            return Err(LabError::NotCommuting {
                i,
                j,
                residual: r.as_f64(),
            });
        }
        let np = op_norm(&self.p);
        if np > T::one() + tol.cert::<T>() {
            return Err(LabError::NotContraction { norm: np.as_f64() });
        }
        Ok(())
    }

    /// `max_i ‖S_i*P − PS_i*‖ / (1 + ‖S_i‖‖P‖)` and its index.
    pub fn star_commutation_defect(&self) -> (T, usize) {
        let np = op_norm(&self.p);
        let mut worst = (T::zero(), 1);
        for (k, s) in self.s.iter().enumerate() {
            let r = op_norm(&(s.adjoint() * &self.p - &self.p * s.adjoint())) / (T::one() + op_norm(s) * np);
            if r > worst.0 {
                worst = (r, k + 1);
            }
        }
        worst
    }
}

/// Interchange form `{"n", "S", "P"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaTupleJson {
    pub n: usize,
    #[serde(rename = "S")]
    pub s: Vec<CMatrixJson>,
    #[serde(rename = "P")]
    pub p: CMatrixJson,
}

impl GammaTupleJson {
    pub fn from_tuple<T: Real>(g: &GammaTuple<T>) -> Self {
        Self {
            n: g.n,
            s: g.s.iter().map(CMatrixJson::from_matrix).collect(),
            p: CMatrixJson::from_matrix(&g.p),
        }
    }

    pub fn to_tuple<T: Real>(&self) -> Result<GammaTuple<T>> {
        if self.n == 0 || self.s.len() + 1 != self.n {
            return Err(LabError::Malformed(format!(
                "field \"S\" has {} matrices but n = {} requires {}",
                self.s.len(),
                self.n,
                self.n.saturating_sub(1)
            )));
        }
        let s = self
            .s
            .iter()
            .enumerate()
            .map(|(k, m)| m.to_matrix().map_err(|e| LabError::Malformed(format!("S[{k}]: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let p = self.p.to_matrix().map_err(|e| LabError::Malformed(format!("P: {e}")))?;
        GammaTuple::new(s, p)
    }
}

impl<T: Real> Serialize for GammaTuple<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GammaTupleJson::from_tuple(self).serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for GammaTuple<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        GammaTupleJson::deserialize(d)?.to_tuple().map_err(serde::de::Error::custom)
    }
}

/// Defect operators of a contraction and their ranges.
#[derive(Debug, Clone)]
pub struct DefectPair<T: Real> {
    /// `D_P = (I − P*P)^{1/2}`.
    pub d_p: CMatrix<T>,
    /// `D_{P*} = (I − PP*)^{1/2}`.
    pub d_p_star: CMatrix<T>,
    pub defect: Subspace<T>,
    pub defect_star: Subspace<T>,
    /// `‖PD_P − D_{P*}P‖`.
    pub intertwining_residual: T,
}

/// Computes `D_P`, `D_{P*}` and the defect spaces.
pub fn defect_pair<T: Real>(p: &CMatrix<T>, tol: &Tolerances) -> Result<DefectPair<T>> {
    let dim = p.nrows();
    let np = op_norm(p);
    if np > T::one() + tol.cert::<T>() {
        return Err(LabError::NotContraction { norm: np.as_f64() });
    }
    // Allow the slight negativity that a norm of 1 + cert_tol produces.
    let loose = Tolerances {
        eq_tol: tol.eq_tol.max(3.0 * tol.cert_tol),
        ..*tol
    };
    let id = CMatrix::<T>::identity(dim, dim);
    let d_p = psd_sqrt_scaled(&(&id - p.adjoint() * p), T::one(), &loose)?;
    let d_p_star = psd_sqrt_scaled(&(&id - p * p.adjoint()), T::one(), &loose)?;
    let defect = range_basis(&d_p, tol);
    let defect_star = range_basis(&d_p_star, tol);
    let intertwining_residual = op_norm(&(p * &d_p - &d_p_star * p));
    Ok(DefectPair {
        d_p,
        d_p_star,
        defect,
        defect_star,
        intertwining_residual,
    })
}

/// The operators `A₁, …, A_{n−1}` on `𝒟_P`, in the basis `defect.basis`.
#[derive(Debug, Clone)]
pub struct FundamentalTuple<T: Real> {
    pub defect: Subspace<T>,
    pub a: Vec<CMatrix<T>>,
    /// `‖D_P A_i D_P − (S_i − S_{n−i}*P)‖` on the full space.
    pub residuals: Vec<T>,
    /// `‖(I − BB*)(S_i − S_{n−i}*P)‖`.
    pub leakage: Vec<T>,
    /// `‖(S_i − S_{n−i}*P)(I − BB*)‖`.
    pub leakage_adjoint: Vec<T>,
    /// Set when some leakage exceeds `eq_tol·(1 + ‖S_i‖)`: the input is not a Γₙ-contraction.
    pub leakage_detected: bool,
}

impl<T: Real> FundamentalTuple<T> {
    pub fn n(&self) -> usize {
        self.a.len() + 1
    }

    /// Defect dimension `k`.
    pub fn k(&self) -> usize {
        self.defect.dim()
    }

    /// `A_i` for `1 ≤ i ≤ n − 1`.
    pub fn a(&self, i: usize) -> &CMatrix<T> {
        &self.a[i - 1]
    }

    /// `BA_iB*`, the operator extended by zero to the whole space.
    pub fn embedded(&self, i: usize) -> CMatrix<T> {
        &self.defect.basis * self.a(i) * self.defect.basis.adjoint()
    }

    /// Turns a leakage warning into an error.
    pub fn require_clean(&self) -> Result<()> {
        if self.leakage_detected {
            let worst = self
                .leakage
                .iter()
                .chain(&self.leakage_adjoint)
                .fold(T::zero(), |a, &b| a.max(b));
            return Err(LabError::LeakageDetected {
                leakage: worst.as_f64(),
            });
        }
        Ok(())
    }

    /// Same operators expressed in another orthonormal basis `B' = BW` of the defect space.
    pub fn rebased(&self, w: &CMatrix<T>) -> Self {
        Self {
            defect: Subspace::from_basis(&self.defect.basis * w),
            a: self.a.iter().map(|a| w.adjoint() * a * w).collect(),
            ..self.clone()
        }
    }

    pub fn max_residual(&self) -> T {
        self.residuals.iter().fold(T::zero(), |a, &b| a.max(b))
    }
}

/// Solves `S_i − S_{n−i}*P = D_P A_i D_P` on the defect space of `P`.
pub fn fo_tuple<T: Real>(g: &GammaTuple<T>, tol: &Tolerances) -> Result<FundamentalTuple<T>> {
    let dp = defect_pair(g.p(), tol)?;
    fo_tuple_in_basis(g, &dp.d_p, &dp.defect.basis, tol)
}

/// The solve of [`fo_tuple`] in a caller-chosen orthonormal basis of `𝒟_P`.
pub fn fo_tuple_in_basis<T: Real>(
    g: &GammaTuple<T>,
    d_p: &CMatrix<T>,
    basis: &CMatrix<T>,
    tol: &Tolerances,
) -> Result<FundamentalTuple<T>> {
    let n = g.n();
    let dim = g.dim();
    let k = basis.ncols();
    let d_r = basis.adjoint() * d_p * basis;
    let d_inv = if k == 0 {
        CMatrix::zeros(0, 0)
    } else {
        let (vals, vecs) = hermitian_eigen(&d_r);
        let (lmax, lmin) = (vals[0], vals[k - 1]);
        if lmin <= T::zero() || lmax / lmin > T::one() / tol.rank::<T>() {
            return Err(LabError::DefectSolveIllConditioned {
                condition: if lmin > T::zero() { (lmax / lmin).as_f64() } else { f64::INFINITY },
            });
        }
        let mut scaled = vecs.clone();
        for (j, &l) in vals.iter().enumerate() {
            scaled.column_mut(j).scale_mut(T::one() / l);
        }
        scaled * vecs.adjoint()
    };
    let off = CMatrix::<T>::identity(dim, dim) - basis * basis.adjoint();
    let mut out = FundamentalTuple {
        defect: Subspace::from_basis(basis.clone()),
        a: Vec::with_capacity(n - 1),
        residuals: Vec::with_capacity(n - 1),
        leakage: Vec::with_capacity(n - 1),
        leakage_adjoint: Vec::with_capacity(n - 1),
        leakage_detected: false,
    };
    for i in 1..n {
        let x = g.s(i) - g.s(n - i).adjoint() * g.p();
        let a = &d_inv * (basis.adjoint() * &x * basis) * &d_inv;
        let full = basis * &a * basis.adjoint();
        out.residuals.push(op_norm(&(d_p * full * d_p - &x)));
        let lk = op_norm(&(&off * &x));
        let lka = op_norm(&(&x * &off));
        if lk.max(lka) > tol.eq::<T>() * (T::one() + op_norm(g.s(i))) {
            out.leakage_detected = true;
        }
        out.leakage.push(lk);
        out.leakage_adjoint.push(lka);
        out.a.push(a);
    }
    Ok(out)
}

/// Per-index residuals of `D_P S_i = A_i D_P + A_{n−i}* D_P P`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct IdentityReport<T: Real> {
    pub residuals: Vec<T>,
    pub max: T,
}

/// Checks the defect intertwining identity on the full space.
pub fn verify_fundamental_identity<T: Real>(
    g: &GammaTuple<T>,
    f: &FundamentalTuple<T>,
    tol: &Tolerances,
) -> Result<IdentityReport<T>> {
    let dp = defect_pair(g.p(), tol)?;
    let n = g.n();
    let residuals: Vec<T> = (1..n)
        .map(|i| {
            let lhs = &dp.d_p * g.s(i);
            let rhs = f.embedded(i) * &dp.d_p + f.embedded(n - i).adjoint() * &dp.d_p * g.p();
            op_norm(&(lhs - rhs))
        })
        .collect();
    let max = residuals.iter().fold(T::zero(), |a, &b| a.max(b));
    Ok(IdentityReport { residuals, max })
}

#[cfg(test)]
mod tests;
