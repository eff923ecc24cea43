//! Characteristic functions, characteristic tuples and the decision procedure
//! for unitary equivalence of Γₙ-contractions with `S_i*P = PS_i*`.

use nalgebra::{Complex, ComplexField};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::gammaops::{circle_grid, defect_pair, fo_tuple, unitary_subspace, FundamentalTuple, GammaTuple};
use crate::matcore::{
    hermitian_eigen, haar_unitary, op_norm, polar_unitary, psd_sqrt, seeded_rng, serde_fmt, singular_values,
    CMatrix, Tolerances,
};
use crate::scalar::Real;

/// `Δ_P(t)` at one unimodular point.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct DeltaSample<T: Real> {
    pub t: f64,
    #[serde(with = "serde_fmt::matrix")]
    pub value: CMatrix<T>,
}

/// Samples of `Θ_P(z): 𝒟_P → 𝒟_{P*}` in fixed orthonormal bases of the two defect spaces.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct CharFnGrid<T: Real> {
    #[serde(with = "serde_fmt::complex_vec")]
    pub points: Vec<Complex<T>>,
    #[serde(with = "serde_fmt::matrices")]
    pub values: Vec<CMatrix<T>>,
    #[serde(skip)]
    pub defect_basis: CMatrix<T>,
    #[serde(skip)]
    pub defect_star_basis: CMatrix<T>,
    pub delta: Vec<DeltaSample<T>>,
    /// Angles where `I − e^{it}P*` was too close to singular.
    pub skipped: Vec<f64>,
}

impl<T: Real> CharFnGrid<T> {
    /// `max_j ‖Θ(z_j)‖`.
    pub fn max_norm(&self) -> T {
        self.values.iter().map(op_norm).fold(T::zero(), |a, b| a.max(b))
    }

    /// `‖B_* Θ(0) + P B‖` where `B`, `B_*` are the defect bases; `None` if 0 is not on the grid.
    pub fn origin_residual(&self, p: &CMatrix<T>) -> Option<T> {
        let j = self.points.iter().position(|z| z.re == T::zero() && z.im == T::zero())?;
        Some(op_norm(&(&self.defect_star_basis * &self.values[j] + p * &self.defect_basis)))
    }
}

/// `0` together with 32 equally spaced points on the circle of radius 0.9.
pub fn coincidence_grid<T: Real>() -> Vec<Complex<T>> {
    let mut v = vec![Complex::new(T::zero(), T::zero())];
    v.extend(circle_grid::<T>(32).into_iter().map(|z| z * Complex::new(T::lit(0.9), T::zero())));
    v
}

/// `Θ_P(z) = [−P + zD_{P*}(I − zP*)⁻¹D_P]|_{𝒟_P}` in the default defect bases.
pub fn char_fn<T: Real>(
    p: &CMatrix<T>,
    points: &[Complex<T>],
    delta_resolution: usize,
    tol: &Tolerances,
) -> Result<CharFnGrid<T>> {
    let dp = defect_pair(p, tol)?;
    char_fn_in_bases(p, &dp.defect.basis, &dp.defect_star.basis, points, delta_resolution, tol)
}

/// [`char_fn`] with caller-supplied orthonormal bases of `𝒟_P` and `𝒟_{P*}`.
pub fn char_fn_in_bases<T: Real>(
    p: &CMatrix<T>,
    basis: &CMatrix<T>,
    basis_star: &CMatrix<T>,
    points: &[Complex<T>],
    delta_resolution: usize,
    tol: &Tolerances,
) -> Result<CharFnGrid<T>> {
    if let Some(z) = points.iter().find(|z| z.norm_sqr() >= T::one()) {
        return Err(LabError::InvalidArgument(format!(
            "characteristic function needs |z| < 1, got {z}"
        )));
    }
    let dim = p.nrows();
    let dp = defect_pair(p, tol)?;
    let id = CMatrix::<T>::identity(dim, dim);
    let rhs = &dp.d_p * basis;
    let lhs_left = basis_star.adjoint();
    let eval = |z: Complex<T>| -> Option<CMatrix<T>> {
        let m = &id - p.adjoint() * z;
        let solved = m.lu().solve(&rhs)?;
        Some(&lhs_left * (-(p * basis) + &dp.d_p_star * solved * z))
    };
    let values = points
        .iter()
        .map(|&z| eval(z).ok_or_else(|| LabError::InvalidArgument(format!("I − zP* is singular at z = {z}"))))
        .collect::<Result<Vec<_>>>()?;

    let mut delta = Vec::new();
    let mut skipped = Vec::new();
    let k = basis.ncols();
    let loose = Tolerances {
        eq_tol: tol.eq_tol.max(tol.cert_tol),
        ..*tol
    };
    for (idx, z) in circle_grid::<T>(delta_resolution).into_iter().enumerate() {
        let t = std::f64::consts::TAU * idx as f64 / delta_resolution as f64;
        let sigma = singular_values(&(&id - p.adjoint() * z));
        if sigma.last().is_some_and(|&s| s <= tol.rank::<T>()) {
            skipped.push(t);
            continue;
        }
        let Some(th) = eval(z) else {
            skipped.push(t);
            continue;
        };
        let value = psd_sqrt(&(CMatrix::identity(k, k) - th.adjoint() * th), &loose)?;
        delta.push(DeltaSample { t, value });
    }
    Ok(CharFnGrid {
        points: points.to_vec(),
        values,
        defect_basis: basis.clone(),
        defect_star_basis: basis_star.clone(),
        delta,
        skipped,
    })
}

/// `(A₁, …, A_{n−1}, Θ_P)` with `Θ_P` expressed in the basis the `A_i` use.
#[derive(Debug, Clone)]
pub struct CharTuple<T: Real> {
    pub f: FundamentalTuple<T>,
    pub theta: CharFnGrid<T>,
}

/// Builds the characteristic tuple of `g`; `fadj` fixes the basis of `𝒟_{P*}`.
pub fn char_tuple<T: Real>(
    g: &GammaTuple<T>,
    f: &FundamentalTuple<T>,
    fadj: &FundamentalTuple<T>,
    points: &[Complex<T>],
    tol: &Tolerances,
) -> Result<CharTuple<T>> {
    let theta = char_fn_in_bases(g.p(), &f.defect.basis, &fadj.defect.basis, points, 0, tol)?;
    Ok(CharTuple { f: f.clone(), theta })
}

/// A unitary invariant that differs between the two sides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsifierEvidence {
    pub test: String,
    pub discrepancy: f64,
    pub bound: f64,
}

/// Outcome of [`coincidence_solve`].
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case", bound = "")]
pub enum CoincidenceVerdict<T: Real> {
    Certified {
        #[serde(with = "serde_fmt::matrix")]
        u: CMatrix<T>,
        #[serde(with = "serde_fmt::matrix")]
        u_star: CMatrix<T>,
        residual: T,
        /// `None` for the intertwiner-space start, otherwise the random restart index.
        restart: Option<usize>,
    },
    NoCertificate {
        best_residual: Option<T>,
        evidence: Option<FalsifierEvidence>,
    },
}

impl<T: Real> CoincidenceVerdict<T> {
    pub fn is_certified(&self) -> bool {
        matches!(self, Self::Certified { .. })
    }

    pub fn evidence(&self) -> Option<&FalsifierEvidence> {
        match self {
            Self::NoCertificate { evidence, .. } => evidence.as_ref(),
            Self::Certified { .. } => None,
        }
    }
}

/// Knobs for [`coincidence_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoincidenceConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Run the alignment stage even when a falsifier has already rejected.
    pub force_alignment: bool,
}

impl Default for CoincidenceConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_sweeps: 400,
            force_alignment: false,
        }
    }
}

struct Sides<'a, T: Real> {
    a: &'a [CMatrix<T>],
    a2: &'a [CMatrix<T>],
    b: &'a [CMatrix<T>],
    b2: &'a [CMatrix<T>],
    th: &'a [CMatrix<T>],
    th2: &'a [CMatrix<T>],
}

impl<T: Real> Sides<'_, T> {
    fn k(&self) -> usize {
        self.th.first().map_or(self.a.first().map_or(0, |m| m.nrows()), |m| m.ncols())
    }

    fn k_star(&self) -> usize {
        self.th.first().map_or(self.b.first().map_or(0, |m| m.nrows()), |m| m.nrows())
    }

    fn scale(&self) -> T {
        let mut s = T::one();
        for m in self.a.iter().chain(self.a2).chain(self.b).chain(self.b2).chain(self.th).chain(self.th2) {
            s = s.max(op_norm(m));
        }
        s
    }

    /// `sqrt(Σ_j‖u_*Θ_j − Θ'_j u‖² + Σ_i‖uA_i − A'_i u‖² + Σ_i‖u_*B_i − B'_i u_*‖²)`, Frobenius norms.
    fn residual(&self, u: &CMatrix<T>, us: &CMatrix<T>) -> T {
        let mut r = T::zero();
        for (t, t2) in self.th.iter().zip(self.th2) {
            r += (us * t - t2 * u).norm_squared();
        }
        for (x, x2) in self.a.iter().zip(self.a2) {
            r += (u * x - x2 * u).norm_squared();
        }
        for (x, x2) in self.b.iter().zip(self.b2) {
            r += (us * x - x2 * us).norm_squared();
        }
        r.sqrt()
    }

    /// Alternating Procrustes sweeps; each step maximizes the linearized alignment.
    fn align(&self, mut u: CMatrix<T>, mut us: CMatrix<T>, sweeps: usize) -> (CMatrix<T>, CMatrix<T>, T) {
        let mut r = self.residual(&u, &us);
        for _ in 0..sweeps {
            if self.k() > 0 {
                let mut m = CMatrix::zeros(self.k(), self.k());
                for (t, t2) in self.th.iter().zip(self.th2) {
                    m += t2.adjoint() * &us * t;
                }
                for (x, x2) in self.a.iter().zip(self.a2) {
                    m += x2 * &u * x.adjoint() + x2.adjoint() * &u * x;
                }
                u = polar_unitary(&m);
            }
            if self.k_star() > 0 {
                let mut m = CMatrix::zeros(self.k_star(), self.k_star());
                for (t, t2) in self.th.iter().zip(self.th2) {
                    m += t2 * &u * t.adjoint();
                }
                for (x, x2) in self.b.iter().zip(self.b2) {
                    m += x2 * &us * x.adjoint() + x2.adjoint() * &us * x;
                }
                us = polar_unitary(&m);
            }
            let next = self.residual(&u, &us);
            let stalled = r - next <= T::lit(1e-13) * (T::one() + r);
            r = next;
            if stalled || r <= T::eps() {
                break;
            }
        }
        (u, us, r)
    }

    /// Polar parts of a generic solution of the linear intertwining equations
    /// (with their adjoint counterparts); `None` if only the zero solution exists.
    fn intertwiner_start(&self, seed: u64, tol: &Tolerances) -> Option<(CMatrix<T>, CMatrix<T>)> {
        let (k, ks) = (self.k(), self.k_star());
        let nu = k * k;
        let cols = nu + ks * ks;
        if cols == 0 {
            return Some((CMatrix::zeros(0, 0), CMatrix::zeros(0, 0)));
        }
        let mut gram = CMatrix::<T>::zeros(cols, cols);
        let mut add = |blocks: &[(usize, CMatrix<T>)]| {
            let rows = blocks[0].1.nrows();
            let mut l = CMatrix::<T>::zeros(rows, cols);
            for (off, b) in blocks {
                let mut v = l.view_mut((0, *off), (rows, b.ncols()));
                v += b;
            }
            let s = op_norm(&l).max(T::one());
            gram += l.adjoint() * &l / Complex::new(s * s, T::zero());
        };
        let eye = |d: usize| CMatrix::<T>::identity(d, d);
        // vec(XM) = (Mᵀ ⊗ I)vec X and vec(MX) = (I ⊗ M)vec X.
        let right = |m: &CMatrix<T>, rows: usize| m.transpose().kronecker(&eye(rows));
        let left = |m: &CMatrix<T>, cols: usize| eye(cols).kronecker(m);
        for (x, x2) in self.a.iter().zip(self.a2) {
            add(&[(0, right(x, k) - left(x2, k))]);
            add(&[(0, right(&x.adjoint(), k) - left(&x2.adjoint(), k))]);
        }
        for (x, x2) in self.b.iter().zip(self.b2) {
            add(&[(nu, right(x, ks) - left(x2, ks))]);
            add(&[(nu, right(&x.adjoint(), ks) - left(&x2.adjoint(), ks))]);
        }
        for (t, t2) in self.th.iter().zip(self.th2) {
            // u_*Θ − Θ'u = 0 and uΘ* − Θ'*u_* = 0.
            add(&[(nu, right(t, ks)), (0, -left(t2, k))]);
            add(&[(0, right(&t.adjoint(), k)), (nu, -left(&t2.adjoint(), ks))]);
        }
        let (vals, vecs) = hermitian_eigen(&gram);
        let cut = tol.cert::<T>() * tol.cert::<T>() * vals[0].max(T::one());
        let null: Vec<usize> = (0..cols).filter(|&j| vals[j] <= cut).collect();
        if null.is_empty() {
            return None;
        }
        let mut rng = seeded_rng(seed);
        let mut x = nalgebra::DVector::<Complex<T>>::zeros(cols);
        for &j in &null {
            let c = Complex::new(T::lit(rng.random_range(-1.0..1.0)), T::lit(rng.random_range(-1.0..1.0)));
            x += vecs.column(j) * c;
        }
        let u = CMatrix::from_column_slice(k, k, &x.as_slice()[..nu]);
        let us = CMatrix::from_column_slice(ks, ks, &x.as_slice()[nu..]);
        Some((polar_unitary(&u), polar_unitary(&us)))
    }
}

fn sv_gap<T: Real>(x: &CMatrix<T>, y: &CMatrix<T>) -> T {
    singular_values(x)
        .iter()
        .zip(singular_values(y))
        .map(|(a, b)| (*a - b).abs())
        .fold(T::zero(), |a, b| a.max(b))
}

/// Traces of all words of length ≤ 3 in `X_i, X_i*`.
fn word_traces<T: Real>(xs: &[CMatrix<T>]) -> Vec<Complex<T>> {
    let mut letters: Vec<CMatrix<T>> = xs.to_vec();
    letters.extend(xs.iter().map(|m| m.adjoint()));
    let mut out = Vec::new();
    for a in &letters {
        out.push(a.trace());
        for b in &letters {
            let ab = a * b;
            out.push(ab.trace());
            for c in &letters {
                out.push((&ab * c).trace());
            }
        }
    }
    out
}

fn quick_falsify<T: Real>(s: &Sides<'_, T>, tol: &Tolerances) -> Option<FalsifierEvidence> {
    let scale = s.scale();
    let bound = tol.cert_tol * scale.as_f64();
    let check = |test: &str, gap: T, bound: f64| -> Option<FalsifierEvidence> {
        (gap.as_f64() > bound).then(|| FalsifierEvidence {
            test: test.into(),
            discrepancy: gap.as_f64(),
            bound,
        })
    };
    for (j, (t, t2)) in s.th.iter().zip(s.th2).enumerate() {
        if let Some(e) = check(&format!("singular values of Θ at grid point {j}"), sv_gap(t, t2), bound) {
            return Some(e);
        }
    }
    for (i, (x, x2)) in s.a.iter().zip(s.a2).enumerate() {
        if let Some(e) = check(&format!("singular values of A_{}", i + 1), sv_gap(x, x2), bound) {
            return Some(e);
        }
    }
    for (i, (x, x2)) in s.b.iter().zip(s.b2).enumerate() {
        if let Some(e) = check(&format!("singular values of B_{}", i + 1), sv_gap(x, x2), bound) {
            return Some(e);
        }
    }
    for (name, xs, ys, dim) in [("A", s.a, s.a2, s.k()), ("B", s.b, s.b2, s.k_star())] {
        let w = word_traces(xs);
        let w2 = word_traces(ys);
        let gap = w.iter().zip(&w2).map(|(a, b)| (a - b).modulus()).fold(T::zero(), |a, b| a.max(b));
        let cube = scale * scale * scale;
        if let Some(e) = check(
            &format!("traces of words of length ≤ 3 in the {name}-tuple"),
            gap,
            tol.cert_tol * (dim.max(1) as f64) * cube.as_f64(),
        ) {
            return Some(e);
        }
    }
    // tr(A_i Θ_j*Θ_j) is invariant under u alone.
    for (j, (t, t2)) in s.th.iter().zip(s.th2).enumerate() {
        let m = t.adjoint() * t;
        let m2 = t2.adjoint() * t2;
        for (x, x2) in s.a.iter().zip(s.a2) {
            let gap = ((x * &m).trace() - (x2 * &m2).trace()).modulus();
            let b = tol.cert_tol * (s.k().max(1) as f64) * (scale * scale * scale).as_f64();
            if let Some(e) = check(&format!("tr(A_i Θ*Θ) at grid point {j}"), gap, b) {
                return Some(e);
            }
        }
    }
    None
}

/// Searches for unitaries `u: 𝒟_P → 𝒟_{P'}`, `u_*: 𝒟_{P*} → 𝒟_{P'*}` with
/// `u_*Θ = Θ'u` on the grid, `uA_i = A'_iu` and `u_*B_i = B'_iu_*`.
///
/// Unitary invariants are compared first. Alignment starts from the polar part
/// of a generic solution of the linearized equations and falls back to
/// seeded random restarts. Certification requires the joint residual to be at
/// most `cert_tol·scale`.
pub fn coincidence_solve<T: Real>(
    ct: &CharTuple<T>,
    ct2: &CharTuple<T>,
    badj: &FundamentalTuple<T>,
    badj2: &FundamentalTuple<T>,
    config: CoincidenceConfig,
    tol: &Tolerances,
) -> Result<CoincidenceVerdict<T>> {
    if ct.f.n() != ct2.f.n() || badj.n() != ct.f.n() || badj2.n() != ct2.f.n() {
        return Err(LabError::DimensionMismatch("tuples have different degrees".into()));
    }
    if ct.theta.points != ct2.theta.points {
        return Err(LabError::DimensionMismatch("characteristic functions use different grids".into()));
    }
    let dims = (ct.f.k(), badj.k());
    let dims2 = (ct2.f.k(), badj2.k());
    if dims != dims2 {
        return Ok(CoincidenceVerdict::NoCertificate {
            best_residual: None,
            evidence: Some(FalsifierEvidence {
                test: format!("defect dimensions {dims:?} vs {dims2:?}"),
                discrepancy: f64::INFINITY,
                bound: 0.0,
            }),
        });
    }
    let s = Sides {
        a: &ct.f.a,
        a2: &ct2.f.a,
        b: &badj.a,
        b2: &badj2.a,
        th: &ct.theta.values,
        th2: &ct2.theta.values,
    };
    let evidence = quick_falsify(&s, tol);
    if evidence.is_some() && !config.force_alignment {
        return Ok(CoincidenceVerdict::NoCertificate {
            best_residual: None,
            evidence,
        });
    }
    let bound = tol.cert::<T>() * s.scale();
    let mut best: Option<(CMatrix<T>, CMatrix<T>, T, Option<usize>)> = None;
    if let Some((u, us)) = s.intertwiner_start(config.seed, tol) {
        let (u, us, r) = s.align(u, us, config.max_sweeps);
        best = Some((u, us, r, None));
    }
    if best.as_ref().is_none_or(|b| b.2 > bound) {
        let (k, ks) = (s.k(), s.k_star());
        let runs: Vec<(CMatrix<T>, CMatrix<T>, T)> = (0..config.restarts)
            .into_par_iter()
            .map(|idx| {
                let mut rng = seeded_rng(config.seed.wrapping_add(1 + idx as u64));
                let u = haar_unitary(k, &mut rng);
                let us = haar_unitary(ks, &mut rng);
                s.align(u, us, config.max_sweeps)
            })
            .collect();
        for (idx, (u, us, r)) in runs.into_iter().enumerate() {
            if best.as_ref().is_none_or(|b| r < b.2) {
                best = Some((u, us, r, Some(idx)));
            }
        }
    }
    Ok(match best {
        Some((u, u_star, residual, restart)) if residual <= bound => CoincidenceVerdict::Certified {
            u,
            u_star,
            residual,
            restart,
        },
        other => CoincidenceVerdict::NoCertificate {
            best_residual: other.map(|b| b.2),
            evidence,
        },
    })
}

/// Independent check of a certificate: a unitary `U: H → H'` intertwining both tuples.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct Confirmation<T: Real> {
    #[serde(with = "serde_fmt::matrix")]
    pub u: CMatrix<T>,
    /// `max(max_i ‖US_i − S'_iU‖, ‖UP − P'U‖)`.
    pub residual: T,
    /// `max(‖UB − B'u‖, ‖UB_* − B'_*u_*‖)` on the defect bases.
    pub anchor_residual: T,
}

/// Final answer of [`decide_equivalence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalence {
    Equivalent,
    /// A unitary invariant differs.
    NotEquivalent,
    /// No certificate and no falsifier.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct EquivalenceReport<T: Real> {
    pub verdict: Equivalence,
    pub coincidence: CoincidenceVerdict<T>,
    pub confirmation: Option<Confirmation<T>>,
    /// Set when a fundamental equation could not be solved cleanly.
    pub leakage: bool,
    pub grid_note: &'static str,
}

fn confirm<T: Real>(
    g: &GammaTuple<T>,
    g2: &GammaTuple<T>,
    anchors: [(&CMatrix<T>, &CMatrix<T>, &CMatrix<T>); 2],
) -> Confirmation<T> {
    let (d, d2) = (g.dim(), g2.dim());
    let e = g.entries();
    let e2 = g2.entries();
    let id = CMatrix::<T>::identity(d2, d2);
    let id_src = CMatrix::<T>::identity(d, d);
    let cols = d2 * d;
    let mut blocks: Vec<(CMatrix<T>, CMatrix<T>)> = Vec::new();
    for (x, x2) in e.iter().zip(&e2) {
        for (y, y2) in [(x.clone(), x2.clone()), (x.adjoint(), x2.adjoint())] {
            let l = y.transpose().kronecker(&id) - id_src.kronecker(&y2);
            let rhs = CMatrix::zeros(l.nrows(), 1);
            blocks.push((l, rhs));
        }
    }
    // U·basis = basis'·u pins down the solution.
    for (basis, basis2, w) in anchors {
        if basis.ncols() == 0 {
            continue;
        }
        let l = basis.transpose().kronecker(&id);
        let target = basis2 * w;
        let rhs = CMatrix::from_column_slice(target.len(), 1, target.as_slice());
        blocks.push((l, rhs));
    }
    let rows: usize = blocks.iter().map(|b| b.0.nrows()).sum();
    let mut l = CMatrix::<T>::zeros(rows, cols);
    let mut rhs = CMatrix::<T>::zeros(rows, 1);
    let mut at = 0;
    for (b, r) in &blocks {
        l.view_mut((at, 0), (b.nrows(), cols)).copy_from(b);
        rhs.view_mut((at, 0), (b.nrows(), 1)).copy_from(r);
        at += b.nrows();
    }
    let x = l
        .svd(true, true)
        .solve(&rhs, T::eps() * T::lit(1e3))
        .unwrap_or_else(|_| CMatrix::zeros(cols, 1));
    let u = polar_unitary(&CMatrix::from_column_slice(d2, d, x.as_slice()));
    let residual = e
        .iter()
        .zip(&e2)
        .map(|(x, x2)| op_norm(&(&u * x - x2 * &u)))
        .fold(T::zero(), |a, b| a.max(b));
    let anchor_residual = anchors
        .iter()
        .map(|(b, b2, w)| op_norm(&(&u * *b - *b2 * *w)))
        .fold(T::zero(), |a, b| a.max(b));
    Confirmation {
        u,
        residual,
        anchor_residual,
    }
}

fn check_hypotheses<T: Real>(g: &GammaTuple<T>, which: &str, tol: &Tolerances) -> Result<()> {
    let (r, i) = g.star_commutation_defect();
    if r > tol.eq::<T>() {
        return Err(LabError::HypothesisViolated(format!(
            "{which} tuple: S_{i}*P ≠ PS_{i}* (relative residual {:.3e})",
            r.as_f64()
        )));
    }
    let (unit, _) = unitary_subspace(g.p(), tol);
    if unit.dim() > 0 {
        return Err(LabError::HypothesisViolated(format!(
            "{which} tuple: P has a unitary part of dimension {}",
            unit.dim()
        )));
    }
    Ok(())
}

/// Decides unitary equivalence of two completely non-unitary tuples with `S_i*P = PS_i*`.
pub fn decide_equivalence<T: Real>(
    g: &GammaTuple<T>,
    g2: &GammaTuple<T>,
    config: CoincidenceConfig,
    tol: &Tolerances,
) -> Result<EquivalenceReport<T>> {
    if g.n() != g2.n() {
        return Err(LabError::DimensionMismatch(format!("degrees {} and {}", g.n(), g2.n())));
    }
    check_hypotheses(g, "first", tol)?;
    check_hypotheses(g2, "second", tol)?;
    let grid_note = "coincidence is checked on 0 and 32 points of |z| = 0.9, not on the whole disc";
    if g.dim() != g2.dim() {
        return Ok(EquivalenceReport {
            verdict: Equivalence::NotEquivalent,
            coincidence: CoincidenceVerdict::NoCertificate {
                best_residual: None,
                evidence: Some(FalsifierEvidence {
                    test: format!("space dimensions {} vs {}", g.dim(), g2.dim()),
                    discrepancy: f64::INFINITY,
                    bound: 0.0,
                }),
            },
            confirmation: None,
            leakage: false,
            grid_note,
        });
    }
    let grid = coincidence_grid::<T>();
    let side = |x: &GammaTuple<T>| -> Result<(CharTuple<T>, FundamentalTuple<T>)> {
        let f = fo_tuple(x, tol)?;
        let fadj = fo_tuple(&x.adjoint(), tol)?;
        Ok((char_tuple(x, &f, &fadj, &grid, tol)?, fadj))
    };
    let (ct, badj) = side(g)?;
    let (ct2, badj2) = side(g2)?;
    let leakage = ct.f.leakage_detected || ct2.f.leakage_detected || badj.leakage_detected || badj2.leakage_detected;
    let coincidence = coincidence_solve(&ct, &ct2, &badj, &badj2, config, tol)?;
    let (verdict, confirmation) = match &coincidence {
        CoincidenceVerdict::Certified { u, u_star, .. } => {
            let c = confirm(
                g,
                g2,
                [
                    (&ct.f.defect.basis, &ct2.f.defect.basis, u),
                    (&badj.defect.basis, &badj2.defect.basis, u_star),
                ],
            );
            let scale = g
                .entries()
                .iter()
                .chain(g2.entries().iter())
                .map(op_norm)
                .fold(T::one(), |a, b| a.max(b));
            let ok = c.residual <= tol.cert::<T>() * scale && c.anchor_residual <= tol.cert::<T>() * scale;
            (if ok { Equivalence::Equivalent } else { Equivalence::Inconclusive }, Some(c))
        }
        CoincidenceVerdict::NoCertificate { evidence, .. } => (
            if evidence.is_some() {
                Equivalence::NotEquivalent
            } else {
                Equivalence::Inconclusive
            },
            None,
        ),
    };
    Ok(EquivalenceReport {
        verdict,
        coincidence,
        confirmation,
        leakage,
        grid_note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gammaops::{gen_diagonal_normal, random_conjugate, symmetrize_operators};
    use crate::matcore::{cx, gaussian_matrix};

    type M = CMatrix<f64>;

    fn nilpotent_family(dim: usize, n: usize, seed: u64) -> GammaTuple<f64> {
        // Symmetrization of (T, 0, …, 0): S₁ = T, the rest and P vanish.
        let mut t: M = gaussian_matrix(dim, dim, &mut seeded_rng(seed));
        let nt = op_norm(&t);
        t *= cx(0.8 / nt, 0.0);
        let mut ops = vec![M::zeros(dim, dim); n - 1];
        ops.insert(0, t);
        symmetrize_operators(&ops).unwrap()
    }

    #[test]
    fn origin_and_zero_contraction() {
        let tol = Tolerances::default();
        let pts = coincidence_grid::<f64>();
        let g = gen_diagonal_normal::<f64>(3, 3, 1).unwrap();
        let th = char_fn(g.p(), &pts, 16, &tol).unwrap();
        assert!(th.origin_residual(g.p()).unwrap() < 1e-12);
        assert!(th.max_norm() <= 1.0 + 1e-10);
        let z = M::zeros(3, 3);
        let th = char_fn(&z, &pts, 8, &tol).unwrap();
        for (p, v) in pts.iter().zip(&th.values) {
            assert!(op_norm(&(v - M::identity(3, 3) * *p)) < 1e-14);
        }
    }

    #[test]
    fn scalar_mobius_value() {
        let tol = Tolerances::default();
        let p = M::from_element(1, 1, cx(0.5, 0.0));
        let th = char_fn(&p, &[cx(0.5, 0.0), cx(0.0, 0.3)], 8, &tol).unwrap();
        assert!(th.values[0][(0, 0)].norm() < 1e-15);
        // Oracle: the Möbius map (z − p)/(1 − p̄z), up to the basis phases.
        let z: Complex<f64> = cx(0.0, 0.3);
        let (half, one): (Complex<f64>, Complex<f64>) = (cx(0.5, 0.0), cx(1.0, 0.0));
        let m = (z - half) / (one - z * 0.5);
        assert!((th.values[1][(0, 0)].norm() - m.norm()).abs() < 1e-14);
        // |Θ| = 1 on the circle, so Δ vanishes.
        assert!(th.delta.iter().all(|d| d.value[(0, 0)].norm() < 1e-6));
        assert!(char_fn(&p, &[cx(1.0, 0.0)], 0, &tol).is_err());
    }

    #[test]
    fn self_and_conjugate_certify() {
        let tol = Tolerances::default();
        for seed in 0..3 {
            let g = gen_diagonal_normal::<f64>(4, 3, seed).unwrap();
            let r = decide_equivalence(&g, &g, CoincidenceConfig::default(), &tol).unwrap();
            assert_eq!(r.verdict, Equivalence::Equivalent);
            if let CoincidenceVerdict::Certified { residual, .. } = r.coincidence {
                assert!(residual <= 1e-12);
            }
            let (h, _) = random_conjugate(&g, 100 + seed);
            let r = decide_equivalence(&g, &h, CoincidenceConfig::default(), &tol).unwrap();
            assert_eq!(r.verdict, Equivalence::Equivalent, "{r:?}");
            assert!(r.confirmation.unwrap().residual <= 1e-6);
        }
    }

    #[test]
    fn non_normal_family_certifies_and_rejects() {
        let tol = Tolerances::default();
        let g = nilpotent_family(4, 3, 5);
        let (h, _) = random_conjugate(&g, 9);
        let r = decide_equivalence(&g, &h, CoincidenceConfig::default(), &tol).unwrap();
        assert_eq!(r.verdict, Equivalence::Equivalent, "{r:?}");
        let other = nilpotent_family(4, 3, 6);
        let r = decide_equivalence(&g, &other, CoincidenceConfig::default(), &tol).unwrap();
        assert_eq!(r.verdict, Equivalence::NotEquivalent);
    }

    #[test]
    fn scaled_p_is_rejected() {
        let tol = Tolerances::default();
        let g = gen_diagonal_normal::<f64>(3, 3, 4).unwrap();
        let mut e = g.s_all().to_vec();
        e.push(g.p() * cx(0.9, 0.0));
        let p = e.pop().unwrap();
        let h = GammaTuple::new(e, p).unwrap();
        let r = decide_equivalence(&g, &h, CoincidenceConfig::default(), &tol).unwrap();
        assert_eq!(r.verdict, Equivalence::NotEquivalent);
        assert!(r.coincidence.evidence().unwrap().test.contains("Θ"));
    }

    #[test]
    fn shifted_fundamental_operator_is_rejected_even_when_forced() {
        let tol = Tolerances::default();
        let grid = coincidence_grid::<f64>();
        let g = gen_diagonal_normal::<f64>(3, 4, 2).unwrap();
        let f = fo_tuple(&g, &tol).unwrap();
        let fadj = fo_tuple(&g.adjoint(), &tol).unwrap();
        let ct = char_tuple(&g, &f, &fadj, &grid, &tol).unwrap();
        let mut ct2 = ct.clone();
        let k = ct2.f.k();
        ct2.f.a[0] += M::identity(k, k) * cx(0.3, 0.0);
        let cfg = CoincidenceConfig {
            force_alignment: true,
            ..CoincidenceConfig::default()
        };
        let v = coincidence_solve(&ct, &ct2, &fadj, &fadj, cfg, &tol).unwrap();
        assert!(!v.is_certified());
        assert!(v.evidence().is_some());
    }

    #[test]
    fn scalars_equivalent_iff_equal() {
        let tol = Tolerances::default();
        let a: GammaTuple<f64> = GammaTuple::from_point(&crate::polydisc::symmetrize(&[cx(0.2, 0.1), cx(-0.4, 0.0)]));
        let b: GammaTuple<f64> = GammaTuple::from_point(&crate::polydisc::symmetrize(&[cx(0.2, 0.1), cx(-0.41, 0.0)]));
        let cfg = CoincidenceConfig::default();
        assert_eq!(decide_equivalence(&a, &a, cfg, &tol).unwrap().verdict, Equivalence::Equivalent);
        assert_eq!(decide_equivalence(&a, &b, cfg, &tol).unwrap().verdict, Equivalence::NotEquivalent);
    }

    #[test]
    fn hypothesis_is_enforced() {
        let tol = Tolerances::default();
        let g = crate::gammaops::gen_symmetrized_ando::<f64>(3, 3, 1).unwrap();
        assert!(matches!(
            decide_equivalence(&g, &g, CoincidenceConfig::default(), &tol),
            Err(LabError::HypothesisViolated(_))
        ));
    }
}
