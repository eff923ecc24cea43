//! Truncated Schäffer-type Γₙ-isometric dilation on `H ⊕ 𝒟_P^N` and its checks.
//!
//! The block matrices are lower bidiagonal, so products of finite sections are
//! exact. Only identities that involve adjoints feel the truncation, and only
//! through the last defect block; those are measured on the columns of
//! `H ⊕ 𝒟_P^{N−1}`.

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::gammaops::{
    cnu_part, defect_pair, monomial_exponents, FundamentalTuple, GammaTuple, GammaTupleJson, VnConfig,
};
use crate::hardy::{pure_gamma_isometry_check, PureIsometryVerdict};
use crate::matcore::{commutator_norm, op_norm, pinv, range_basis, CMatrix, Subspace, Tolerances};
use crate::scalar::Real;

/// Residuals recorded when a dilation is built.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct DilationResiduals<T: Real> {
    /// `‖(V*V − I)|interior‖`.
    pub interior_isometry: T,
    /// `max_i ‖(R_i − R_{n−i}*V)|interior‖`.
    pub algebra: T,
    /// Largest `‖[X, Y]‖ / (1 + ‖X‖‖Y‖)` over entries of the dilation.
    pub commutation: T,
    /// `max ‖(I − P_H)X*|_H‖`: `H` is invariant under the adjoints.
    pub coextension: T,
    /// Rank of `span{Vᵏh : k ≤ N}` against the dimension of the dilation space.
    pub krylov_rank: usize,
    pub dilation_dim: usize,
}

/// `(R₁, …, R_{n−1}, V)` on `H ⊕ 𝒟_P^N` with `H` embedded as the leading coordinates.
#[derive(Debug, Clone)]
pub struct DilationTuple<T: Real> {
    pub base: GammaTuple<T>,
    pub depth: usize,
    pub defect_dim: usize,
    pub r: Vec<CMatrix<T>>,
    pub v: CMatrix<T>,
    pub embed: Subspace<T>,
    pub residuals: DilationResiduals<T>,
}

#[derive(Serialize)]
#[serde(bound = "")]
struct DilationSummary<'a, T: Real> {
    base: GammaTupleJson,
    depth: usize,
    defect_dim: usize,
    residuals: &'a DilationResiduals<T>,
}

impl<T: Real> Serialize for DilationTuple<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DilationSummary {
            base: GammaTupleJson::from_tuple(&self.base),
            depth: self.depth,
            defect_dim: self.defect_dim,
            residuals: &self.residuals,
        }
        .serialize(s)
    }
}

impl<T: Real> DilationTuple<T> {
    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    /// `R_i` for `1 ≤ i ≤ n − 1`.
    pub fn r(&self, i: usize) -> &CMatrix<T> {
        &self.r[i - 1]
    }

    /// The dilation as a tuple, for export or further testing.
    pub fn as_tuple(&self) -> GammaTuple<T> {
        GammaTuple::new(self.r.clone(), self.v.clone()).expect("dilation blocks are square and equal in size")
    }

    /// Number of leading coordinates unaffected by the truncation edge.
    pub fn interior(&self) -> usize {
        self.base.dim() + (self.depth - 1) * self.defect_dim
    }

    fn entries(&self) -> Vec<&CMatrix<T>> {
        self.r.iter().chain(std::iter::once(&self.v)).collect()
    }
}

fn leading_cols<T: Real>(m: &CMatrix<T>, cols: usize) -> CMatrix<T> {
    m.columns(0, cols).into_owned()
}

/// Materializes the Schäffer block matrices truncated to `depth` copies of `𝒟_P`.
///
/// `V` has `P` in the corner, `D_P` below it and identities shifting down the
/// tail; `R_i` has `S_i`, then `A_{n−i}*D_P` below it, `A_i` on the tail
/// diagonal and `A_{n−i}*` on the tail subdiagonal.
pub fn schaffer_dilate<T: Real>(
    g: &GammaTuple<T>,
    f: &FundamentalTuple<T>,
    depth: usize,
    tol: &Tolerances,
) -> Result<DilationTuple<T>> {
    if depth < 2 {
        return Err(LabError::TruncationTooShallow { depth, required: 2 });
    }
    let n = g.n();
    if f.n() != n {
        return Err(LabError::DimensionMismatch(format!(
            "fundamental tuple has {} operators, the tuple needs {}",
            f.a.len(),
            n - 1
        )));
    }
    f.require_clean()?;
    for i in 1..n {
        let r = f.residuals[i - 1];
        if r > tol.eq::<T>() * (T::one() + op_norm(g.s(i))) {
            return Err(LabError::HypothesisViolated(format!(
                "fundamental equation {i} has residual {:.3e}",
                r.as_f64()
            )));
        }
    }
    let h = g.dim();
    let k = f.k();
    let total = h + depth * k;
    let dp = defect_pair(g.p(), tol)?;
    let lead = f.defect.basis.adjoint() * &dp.d_p;
    let block = |j: usize| h + (j - 1) * k;

    let mut v = CMatrix::zeros(total, total);
    v.view_mut((0, 0), (h, h)).copy_from(g.p());
    v.view_mut((block(1), 0), (k, h)).copy_from(&lead);
    let id = CMatrix::<T>::identity(k, k);
    for j in 1..depth {
        v.view_mut((block(j + 1), block(j)), (k, k)).copy_from(&id);
    }

    let r: Vec<CMatrix<T>> = (1..n)
        .map(|i| {
            let ai = f.a(i);
            let back = f.a(n - i).adjoint();
            let mut m = CMatrix::zeros(total, total);
            m.view_mut((0, 0), (h, h)).copy_from(g.s(i));
            m.view_mut((block(1), 0), (k, h)).copy_from(&(&back * &lead));
            for j in 1..=depth {
                m.view_mut((block(j), block(j)), (k, k)).copy_from(ai);
                if j < depth {
                    m.view_mut((block(j + 1), block(j)), (k, k)).copy_from(&back);
                }
            }
            m
        })
        .collect();

    let mut basis = CMatrix::zeros(total, h);
    basis.view_mut((0, 0), (h, h)).fill_with_identity();
    let embed = Subspace::from_basis(basis);

    let mut d = DilationTuple {
        base: g.clone(),
        depth,
        defect_dim: k,
        r,
        v,
        embed,
        residuals: DilationResiduals {
            interior_isometry: T::zero(),
            algebra: T::zero(),
            commutation: T::zero(),
            coextension: T::zero(),
            krylov_rank: 0,
            dilation_dim: total,
        },
    };
    d.residuals = dilation_residuals(&d, tol);
    Ok(d)
}

fn dilation_residuals<T: Real>(d: &DilationTuple<T>, tol: &Tolerances) -> DilationResiduals<T> {
    let n = d.n();
    let total = d.dim();
    let inner = d.interior();
    let id = CMatrix::<T>::identity(total, total);
    let interior_isometry = op_norm(&leading_cols(&(d.v.adjoint() * &d.v - &id), inner));
    let algebra = (1..n)
        .map(|i| op_norm(&leading_cols(&(d.r(i) - d.r(n - i).adjoint() * &d.v), inner)))
        .fold(T::zero(), |a, b| a.max(b));

    let entries = d.entries();
    let norms: Vec<T> = entries.iter().map(|m| op_norm(m)).collect();
    let mut commutation = T::zero();
    for a in 0..entries.len() {
        for b in (a + 1)..entries.len() {
            let c = commutator_norm(entries[a], entries[b]) / (T::one() + norms[a] * norms[b]);
            commutation = commutation.max(c);
        }
    }

    let e = &d.embed.basis;
    let off = &id - e * e.adjoint();
    let coextension = entries
        .iter()
        .map(|x| op_norm(&(&off * x.adjoint() * e)))
        .fold(T::zero(), |a, b| a.max(b));

    let h = d.base.dim();
    let mut krylov = CMatrix::zeros(total, h * (d.depth + 1));
    let mut cur = e.clone();
    for j in 0..=d.depth {
        krylov.view_mut((0, j * h), (total, h)).copy_from(&cur);
        cur = &d.v * cur;
    }
    DilationResiduals {
        interior_isometry,
        algebra,
        commutation,
        coextension,
        krylov_rank: range_basis(&krylov, tol).dim(),
        dilation_dim: total,
    }
}

/// Compression residuals `‖P_H q(R, V)|_H − q(S, P)‖` over monomials `q`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct CompressionReport<T: Real> {
    pub degree_requested: usize,
    /// The requested degree capped at `N/2`.
    pub degree_used: usize,
    pub monomials: usize,
    pub max_residual: T,
    /// Largest residual divided by `Π max(1, ‖X_j‖)^{e_j}`.
    pub max_relative_residual: T,
    pub worst_monomial: Vec<u32>,
    /// Interior `max_i ‖R_i − R_{n−i}*V‖`, copied from the dilation.
    pub algebra: T,
    pub passed: bool,
}

/// Checks the compression identity for every monomial of total degree ≤ `max_degree`.
pub fn verify_dilation<T: Real>(d: &DilationTuple<T>, max_degree: usize, tol: &Tolerances) -> CompressionReport<T> {
    let n = d.n();
    let degree = max_degree.min(d.depth / 2);
    let exps = monomial_exponents(n, degree);
    let big = d.entries();
    let small = d.base.entries();
    let norms: Vec<T> = big.iter().map(|m| op_norm(m).max(T::one())).collect();
    let e = &d.embed.basis;
    let h = d.base.dim();

    let results: Vec<(T, T)> = exps
        .par_iter()
        .map(|ex| {
            let mut lifted = e.clone();
            let mut base = CMatrix::<T>::identity(h, h);
            let mut growth = T::one();
            for (j, &p) in ex.iter().enumerate().rev() {
                for _ in 0..p {
                    lifted = big[j] * lifted;
                    base = &small[j] * base;
                    growth *= norms[j];
                }
            }
            let r = op_norm(&(e.adjoint() * lifted - base));
            (r, r / growth)
        })
        .collect();

    let mut worst = 0;
    let mut max_rel = T::zero();
    for (idx, &(r, rel)) in results.iter().enumerate() {
        if r > results[worst].0 {
            worst = idx;
        }
        max_rel = max_rel.max(rel);
    }
    let max_residual = results[worst].0;
    let algebra = d.residuals.algebra;
    CompressionReport {
        degree_requested: max_degree,
        degree_used: degree,
        monomials: exps.len(),
        max_residual,
        max_relative_residual: max_rel,
        worst_monomial: exps[worst].clone(),
        algebra,
        passed: max_rel <= tol.eq::<T>() && algebra <= tol.eq::<T>(),
    }
}

/// `Σ_{m≥0} Pᵐ Y P*ᵐ`, the solution of `X − PXP* = Y`, by doubling.
///
/// Requires spectral radius of `P` below one.
pub fn stein_sum<T: Real>(p: &CMatrix<T>, y: &CMatrix<T>) -> Result<CMatrix<T>> {
    let mut x = y.clone();
    let mut a = p.clone();
    for _ in 0..64 {
        let an = op_norm(&a);
        if an * an <= T::eps() {
            return Ok(x);
        }
        x += &a * &x * a.adjoint();
        a = &a * &a;
    }
    Err(LabError::NoConvergence {
        iterations: 64,
        increment: op_norm(&a).as_f64(),
    })
}

/// Operators `C_i` on `H` with `S_i = C_i + PC_{n−i}*`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct Representation<T: Real> {
    #[serde(with = "crate::matcore::serde_fmt::matrices")]
    pub c: Vec<CMatrix<T>>,
    pub alpha: f64,
    /// `‖S_i − (C_i + PC_{n−i}*)‖` per index.
    pub residuals: Vec<T>,
    pub max_residual: T,
    pub unitary_dim: usize,
}

/// Splits `S_i = C_i + PC_{n−i}*` from the dilation.
///
/// On the completely non-unitary part, `C_i` is the compression to `H` of the
/// operator that acts as the constant coefficient of `R_i*` on each wandering
/// copy `Vᵐ(K ⊖ VK)`. That is `C_i* = Σ Pᵐ Y_i P*ᵐ` with
/// `Y_i = P_H(I − VV*)R_i*(I − VV*)|_H`. On the unitary part the tuple satisfies
/// `S_i = PS_{n−i}*`, and `C_i` is `α S_i` for `i < n − i`, `(1 − α) S_i` for
/// `i > n − i` and `S_i / 2` in the middle.
pub fn representation_split<T: Real>(d: &DilationTuple<T>, alpha: f64, tol: &Tolerances) -> Result<Representation<T>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LabError::InvalidArgument(format!("alpha = {alpha} is outside [0, 1]")));
    }
    let n = d.n();
    let g = &d.base;
    let h = g.dim();
    let e = &d.embed.basis;
    let total = d.dim();
    let wandering = (CMatrix::<T>::identity(total, total) - &d.v * d.v.adjoint()) * e;
    let split = cnu_part(g, tol)?;
    let uc = &split.cnu.basis;
    let uu = &split.unitary.basis;
    let pc = uc.adjoint() * g.p() * uc;

    let mut c = Vec::with_capacity(n - 1);
    for i in 1..n {
        let y = wandering.adjoint() * d.r(i).adjoint() * &wandering;
        let yc = uc.adjoint() * y.adjoint() * uc;
        let cnu = uc * stein_sum(&pc, &yc)? * uc.adjoint();
        let w = if 2 * i < n {
            alpha
        } else if 2 * i > n {
            1.0 - alpha
        } else {
            0.5
        };
        let su = uu.adjoint() * g.s(i) * uu;
        let unit = uu * su * Complex::new(T::lit(w), T::zero()) * uu.adjoint();
        c.push(cnu + unit);
    }
    let residuals: Vec<T> = (1..n)
        .map(|i| op_norm(&(g.s(i) - (&c[i - 1] + g.p() * c[n - i - 1].adjoint()))))
        .collect();
    let max_residual = residuals.iter().fold(T::zero(), |a, &b| a.max(b));
    if max_residual > T::lit(100.0) * tol.eq::<T>() {
        return Err(LabError::SplitResidualLarge {
            residual: max_residual.as_f64(),
        });
    }
    debug_assert_eq!(c.iter().map(|m| m.nrows()).max().unwrap_or(h), h);
    Ok(Representation {
        c,
        alpha,
        residuals,
        max_residual,
        unitary_dim: split.unitary.dim(),
    })
}

/// The Γₙ-isometry on `K ⊖ H` and the fundamental operators read back from it.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct WExtraction<T: Real> {
    #[serde(skip)]
    pub w: Vec<CMatrix<T>>,
    #[serde(skip)]
    pub w_iso: CMatrix<T>,
    #[serde(with = "crate::matcore::serde_fmt::matrices")]
    pub a_recovered: Vec<CMatrix<T>>,
    /// `max_i ‖φ*W_iφ − A_i‖`.
    pub recovery_residual: T,
    /// `‖φ*φ − I‖` for `φ: D_Px ↦ Tx`.
    pub embedding_residual: T,
    /// `max_i ‖(W_i − W_{n−i}*W)|interior‖` on `K ⊖ H`.
    pub tail_algebra: T,
}

/// Restricts the dilation to `K ⊖ H` and recovers `A_i = φ*W_iφ`.
pub fn extract_w<T: Real>(d: &DilationTuple<T>, f: &FundamentalTuple<T>, tol: &Tolerances) -> Result<WExtraction<T>> {
    if d.depth < 3 {
        return Err(LabError::TruncationTooShallow {
            depth: d.depth,
            required: 3,
        });
    }
    let n = d.n();
    let h = d.base.dim();
    let k = d.defect_dim;
    let tail = d.dim() - h;
    let w: Vec<CMatrix<T>> = d.r.iter().map(|m| m.view((h, h), (tail, tail)).into_owned()).collect();
    let w_iso = d.v.view((h, h), (tail, tail)).into_owned();
    let t_block = d.v.view((h, 0), (tail, h)).into_owned();
    let dp = defect_pair(d.base.p(), tol)?;
    let phi = t_block * pinv(&dp.d_p, tol) * &f.defect.basis;
    let embedding_residual = op_norm(&(phi.adjoint() * &phi - CMatrix::<T>::identity(k, k)));
    let a_recovered: Vec<CMatrix<T>> = w.iter().map(|wi| phi.adjoint() * wi * &phi).collect();
    let recovery_residual = a_recovered
        .iter()
        .zip(&f.a)
        .map(|(x, y)| op_norm(&(x - y)))
        .fold(T::zero(), |a, b| a.max(b));
    let inner = (d.depth - 1) * k;
    let tail_algebra = (1..n)
        .map(|i| op_norm(&leading_cols(&(&w[i - 1] - w[n - i - 1].adjoint() * &w_iso), inner)))
        .fold(T::zero(), |a, b| a.max(b));
    Ok(WExtraction {
        w,
        w_iso,
        a_recovered,
        recovery_residual,
        embedding_residual,
        tail_algebra,
    })
}

/// The Hardy-space test a Γₙ-isometric dilation on `H ⊕ ℓ²(𝒟_P)` forces on the
/// fundamental operators `B_i` of the adjoint tuple.
///
/// A failure certifies that no such dilation exists.
pub fn necessary1_check<T: Real>(
    fadj: &FundamentalTuple<T>,
    depth: usize,
    resolution: usize,
    config: VnConfig,
    tol: &Tolerances,
) -> Result<PureIsometryVerdict<T>> {
    pure_gamma_isometry_check(&fadj.a, depth, resolution, config, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gammaops::{fo_tuple, gen_diagonal_normal, gen_diagonal_unitary, gen_symmetrized_ando};
    use crate::matcore::cx;

    type M = CMatrix<f64>;

    fn dilate(g: &GammaTuple<f64>, depth: usize) -> (DilationTuple<f64>, FundamentalTuple<f64>) {
        let tol = Tolerances::default();
        let f = fo_tuple(g, &tol).unwrap();
        (schaffer_dilate(g, &f, depth, &tol).unwrap(), f)
    }

    fn scalar_tuple() -> GammaTuple<f64> {
        // π₃(0.5, −0.3i, 0.2 + 0.1i).
        let pt = crate::polydisc::symmetrize(&[cx(0.5, 0.0), cx(0.0, -0.3), cx(0.2, 0.1)]);
        GammaTuple::from_point(&pt)
    }

    #[test]
    fn zero_defect_dilation_is_the_tuple() {
        let g = gen_diagonal_unitary::<f64>(3, 3, 2).unwrap();
        let (d, _) = dilate(&g, 4);
        assert_eq!(d.dim(), 3);
        assert_eq!(&d.v, g.p());
        assert_eq!(d.r(1), g.s(1));
        let rep = representation_split(&d, 0.5, &Tolerances::default()).unwrap();
        assert!(rep.max_residual < 1e-14);
    }

    #[test]
    fn scalar_dilation_structure() {
        let g = scalar_tuple();
        let (d, _) = dilate(&g, 8);
        assert_eq!(d.dim(), 9);
        let p = g.p()[(0, 0)];
        let mut want = M::zeros(9, 9);
        want[(0, 0)] = p;
        want[(1, 0)] = cx((1.0 - p.norm_sqr()).sqrt(), 0.0);
        for j in 2..9 {
            want[(j, j - 1)] = cx(1.0, 0.0);
        }
        // The defect basis vector may carry a phase; compare moduli of the D_P entry.
        let mut got = d.v.clone();
        got[(1, 0)] = cx(got[(1, 0)].norm(), 0.0);
        assert!(op_norm(&(got - want)) < 1e-14);
        let vv = d.v.adjoint() * &d.v;
        for r in 0..9 {
            for c in 0..9 {
                let expect = if r == c && r < 8 { 1.0 } else { 0.0 };
                assert!((vv[(r, c)] - cx(expect, 0.0)).norm() < 1e-14, "({r},{c})");
            }
        }
    }

    #[test]
    fn ando_interior_commutators() {
        let g = gen_symmetrized_ando::<f64>(4, 3, 5).unwrap();
        let (d, _) = dilate(&g, 12);
        assert!(d.residuals.commutation <= 1e-8);
        assert!(d.residuals.algebra <= 1e-8);
        assert!(d.residuals.interior_isometry <= 1e-12);
        assert!(d.residuals.coextension <= 1e-12);
    }

    #[test]
    fn compression_identity() {
        let tol = Tolerances::default();
        let g = gen_symmetrized_ando::<f64>(3, 4, 2).unwrap();
        let (d, _) = dilate(&g, 12);
        let rep = verify_dilation(&d, 5, &tol);
        assert_eq!(rep.degree_used, 5);
        assert!(rep.max_residual <= 1e-6, "{rep:?}");
        let capped = verify_dilation(&d, 9, &tol);
        assert_eq!(capped.degree_used, 6);
        // The constant monomial and V compress exactly.
        let e = &d.embed.basis;
        assert_eq!(e.adjoint() * &d.v * e, *g.p());
    }

    #[test]
    fn representation_examples() {
        let tol = Tolerances::default();
        let g = scalar_tuple();
        let (d, _) = dilate(&g, 6);
        let rep = representation_split(&d, 0.5, &tol).unwrap();
        let (s, p) = (g.s(1)[(0, 0)], g.p()[(0, 0)]);
        let (c1, c2) = (rep.c[0][(0, 0)], rep.c[1][(0, 0)]);
        assert!((s - (c1 + p * c2.conj())).norm() < 1e-8);
        for seed in 0..4 {
            let g = gen_symmetrized_ando::<f64>(4, 4, seed).unwrap();
            let (d, _) = dilate(&g, 6);
            assert!(representation_split(&d, 0.5, &tol).unwrap().max_residual <= 1e-6);
        }
    }

    #[test]
    fn representation_with_unitary_summand() {
        let tol = Tolerances::default();
        let u = gen_diagonal_unitary::<f64>(2, 3, 7).unwrap();
        let c = gen_diagonal_normal::<f64>(2, 3, 8).unwrap();
        let g = u.direct_sum(&c).unwrap();
        let (d, _) = dilate(&g, 6);
        for alpha in [0.2, 0.5, 0.9] {
            let rep = representation_split(&d, alpha, &tol).unwrap();
            assert_eq!(rep.unitary_dim, 2);
            assert!(rep.max_residual < 1e-10);
        }
    }

    #[test]
    fn w_extraction_round_trip() {
        let tol = Tolerances::default();
        let g = scalar_tuple();
        let (d, f) = dilate(&g, 5);
        let x = extract_w(&d, &f, &tol).unwrap();
        for (a, b) in x.a_recovered.iter().zip(&f.a) {
            assert!((a[(0, 0)] - b[(0, 0)]).norm() < 1e-14);
        }
        let g = gen_symmetrized_ando::<f64>(5, 3, 1).unwrap();
        let (d, f) = dilate(&g, 6);
        let x = extract_w(&d, &f, &tol).unwrap();
        assert!(x.recovery_residual <= 1e-8 && x.embedding_residual <= 1e-8);
        assert!(x.tail_algebra <= 1e-8);
        let (d2, _) = dilate(&g, 2);
        assert!(matches!(extract_w(&d2, &f, &tol), Err(LabError::TruncationTooShallow { .. })));
    }

    #[test]
    fn zero_defect_extraction_is_vacuous() {
        let tol = Tolerances::default();
        let g = gen_diagonal_unitary::<f64>(2, 3, 1).unwrap();
        let (d, f) = dilate(&g, 4);
        let x = extract_w(&d, &f, &tol).unwrap();
        assert!(x.a_recovered.iter().all(|a| a.is_empty()));
        assert_eq!(x.recovery_residual, 0.0);
    }

    #[test]
    fn necessary_condition_examples() {
        let tol = Tolerances::default();
        let cfg = VnConfig {
            samples: 30,
            ..VnConfig::default()
        };
        let g = gen_symmetrized_ando::<f64>(4, 3, 6).unwrap();
        let fadj = fo_tuple(&g.adjoint(), &tol).unwrap();
        assert!(necessary1_check(&fadj, 4, 16, cfg, &tol).unwrap().passed);
        let mut bad = fadj.clone();
        bad.a[0] *= cx(30.0, 0.0);
        assert!(!necessary1_check(&bad, 4, 16, cfg, &tol).unwrap().passed);
        let zero = FundamentalTuple {
            a: vec![M::zeros(2, 2); 2],
            ..fadj
        };
        assert!(necessary1_check(&zero, 4, 16, cfg, &tol).unwrap().passed);
    }

    #[test]
    fn rejects_shallow_depth() {
        let g = scalar_tuple();
        let tol = Tolerances::default();
        let f = fo_tuple(&g, &tol).unwrap();
        assert!(matches!(
            schaffer_dilate(&g, &f, 1, &tol),
            Err(LabError::TruncationTooShallow { .. })
        ));
    }
}
