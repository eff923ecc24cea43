//! Operator model for c.n.u. Γₙ-contractions with `S_i*P = PS_i*`.
//!
//! `W₁h = Σ zᵏ ⊗ D_PPᵏh` carries the Hardy-space half of the model and `W₂`
//! the Laurent half built from the asymptotic limits `𝒜 = lim P*ᵏPᵏ` and
//! `𝒜_* = lim PᵏP*ᵏ`. For a finite c.n.u. matrix the spectral radius is below
//! one, so `𝒜 = 0` and `W₂` vanishes. The Laurent half is exercised on finite
//! sections of lower-banded operators on `ℓ²`, where the limits are computed
//! exactly on the leading coordinates.

use nalgebra::{Complex, ComplexField, Schur};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::gammaops::{
    defect_pair, fo_tuple, symmetrize_operators, unitary_subspace, FundamentalTuple, GammaTuple,
};
use crate::matcore::{commutator_norm, hermitian_eigen, op_norm, pinv, psd_sqrt, range_basis, serde_fmt, CMatrix, Subspace, Tolerances};
use crate::scalar::Real;

const ITER_CAP: usize = 100_000;

/// Identities the limits satisfy in theory, measured.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(bound = "")]
pub struct AsymptoticResiduals<T: Real> {
    /// `‖P*𝒜P − 𝒜‖`.
    pub fixed_point: T,
    /// `‖V_r*V_r − I‖` on `ran 𝒜`.
    pub v_isometry: T,
    /// `max(‖[Q_r, V_r]‖, ‖[Q_r, V_r*]‖)`.
    pub q_commutation: T,
}

/// Strong limits of `P*ᵏPᵏ` and `PᵏP*ᵏ` with the operators `V` and `Q` on `ran 𝒜`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct AsymptoticData<T: Real> {
    #[serde(with = "serde_fmt::matrix")]
    pub a_lim: CMatrix<T>,
    #[serde(with = "serde_fmt::matrix")]
    pub astar_lim: CMatrix<T>,
    #[serde(skip)]
    pub ran_a: Subspace<T>,
    /// `V(𝒜^{1/2}x) = 𝒜^{1/2}Px` in the basis of `ran_a`.
    #[serde(with = "serde_fmt::matrix")]
    pub v_r: CMatrix<T>,
    /// `(I − 𝒜^{1/2}𝒜_*𝒜^{1/2})^{1/2}` in the basis of `ran_a`.
    #[serde(with = "serde_fmt::matrix")]
    pub q_r: CMatrix<T>,
    pub iterations_used: usize,
    pub last_increment: T,
    /// Trailing coordinates polluted by the section edge; zero for genuine matrices.
    pub section_edge: usize,
    pub residuals: AsymptoticResiduals<T>,
}

impl<T: Real> AsymptoticData<T> {
    pub fn dim(&self) -> usize {
        self.a_lim.nrows()
    }

    pub fn rank(&self) -> usize {
        self.ran_a.dim()
    }

    /// `𝒜^{1/2}` on the whole space.
    pub fn a_sqrt(&self) -> CMatrix<T> {
        let mut b = self.ran_a.basis.clone();
        let lam = (self.ran_a.basis.adjoint() * &self.a_lim * &self.ran_a.basis).map(|z| z.re);
        for j in 0..b.ncols() {
            b.column_mut(j).scale_mut(lam[(j, j)].max(T::zero()).sqrt());
        }
        b * self.ran_a.basis.adjoint()
    }

    /// `V` written as an operator on the ambient space (zero off `ran 𝒜`).
    pub fn v_ambient(&self) -> CMatrix<T> {
        &self.ran_a.basis * &self.v_r * self.ran_a.basis.adjoint()
    }
}

fn spectral_radius<T: Real>(p: &CMatrix<T>) -> T {
    if p.nrows() == 0 {
        return T::zero();
    }
    match Schur::new(p.clone()).eigenvalues() {
        Some(ev) => ev.iter().fold(T::zero(), |a, z| a.max(z.modulus())),
        None => T::one(),
    }
}

fn default_iterations<T: Real>(p: &CMatrix<T>) -> usize {
    let rho = spectral_radius(p).as_f64().min(1.0 - 1e-6);
    let factor = (1.0 / (1.0 - rho * rho)).ceil();
    let guess = 10.0 * p.nrows().max(1) as f64 * factor;
    if guess.is_finite() {
        (guess as usize).clamp(16, ITER_CAP)
    } else {
        ITER_CAP
    }
}

/// Iterates `M ↦ step(M)` from the identity until the increment drops below `stop`.
fn monotone_limit<T: Real>(
    dim: usize,
    max_iter: usize,
    stop: T,
    mut step: impl FnMut(usize) -> CMatrix<T>,
) -> Result<(CMatrix<T>, usize, T)> {
    let mut m = CMatrix::<T>::identity(dim, dim);
    let mut inc = T::zero();
    for k in 1..=max_iter {
        let next = step(k);
        inc = op_norm(&(&next - &m));
        m = next;
        if inc <= stop {
            return Ok((m, k, inc));
        }
    }
    Err(LabError::NoConvergence {
        iterations: max_iter,
        increment: inc.as_f64(),
    })
}

/// Limits of `P*ᵏPᵏ` and `PᵏP*ᵏ` for a c.n.u. contraction.
///
/// The Cauchy stop uses `rank_tol`, so the range of `𝒜` (eigenvalues above
/// `eq_tol`) is not contaminated by the unconverged tail.
pub fn asymptotic_limits<T: Real>(p: &CMatrix<T>, tol: &Tolerances, max_iter: Option<usize>) -> Result<AsymptoticData<T>> {
    if p.nrows() != p.ncols() {
        return Err(LabError::DimensionMismatch(format!("P is {}x{}", p.nrows(), p.ncols())));
    }
    let np = op_norm(p);
    if np > T::one() + tol.cert::<T>() {
        return Err(LabError::NotContraction { norm: np.as_f64() });
    }
    let (unitary, _) = unitary_subspace(p, tol);
    if unitary.dim() > 0 {
        return Err(LabError::NotCnu { dim: unitary.dim() });
    }
    let dim = p.nrows();
    let max_iter = max_iter.unwrap_or_else(|| default_iterations(p));
    let stop = tol.rank::<T>();
    let ps = p.adjoint();
    let mut cur = CMatrix::<T>::identity(dim, dim);
    let (a_lim, ka, inc_a) = monotone_limit(dim, max_iter, stop, |_| {
        cur = &ps * &cur * p;
        cur.clone()
    })?;
    let mut cur = CMatrix::<T>::identity(dim, dim);
    let (astar_lim, kb, inc_b) = monotone_limit(dim, max_iter, stop, |_| {
        cur = p * &cur * &ps;
        cur.clone()
    })?;
    finish(a_lim, astar_lim, p, ka.max(kb), inc_a.max(inc_b), 0, tol)
}

/// [`asymptotic_limits`] for a lower-banded operator on `ℓ²`, known through its
/// finite sections.
///
/// `section(N)` must return the leading `N×N` block, with `P e_j` supported on
/// `e_j, …, e_{j+bandwidth}`. Then the leading `m×m` blocks of `P*ᵏPᵏ` are read
/// exactly from a section of size `m + bandwidth·k`, and those of `PᵏP*ᵏ`
/// from the `m×m` section.
pub fn asymptotic_limits_sectioned<T: Real>(
    section: impl Fn(usize) -> CMatrix<T>,
    bandwidth: usize,
    m: usize,
    tol: &Tolerances,
    max_iter: Option<usize>,
) -> Result<AsymptoticData<T>> {
    if m == 0 {
        return Err(LabError::InvalidArgument("section size must be positive".into()));
    }
    let probe = section(m + bandwidth + 1);
    let zero = T::zero();
    for i in 0..probe.nrows() {
        for j in 0..probe.ncols() {
            let inside = i >= j && i <= j + bandwidth;
            if !inside && probe[(i, j)].modulus() > zero {
                return Err(LabError::InvalidArgument(format!(
                    "section entry ({i}, {j}) lies outside the lower band of width {bandwidth}"
                )));
            }
        }
    }
    let np = op_norm(&probe);
    if np > T::one() + tol.cert::<T>() {
        return Err(LabError::NotContraction { norm: np.as_f64() });
    }
    let max_iter = max_iter.unwrap_or(50 * m).min(ITER_CAP);
    let stop = tol.rank::<T>();
    // Columns of Pᵏ restricted to the first m coordinates, padded to m + bandwidth·k rows.
    let mut cols = CMatrix::<T>::identity(m, m);
    let (a_lim, ka, inc_a) = monotone_limit(m, max_iter, stop, |k| {
        let rows = m + bandwidth * k;
        let pk = section(rows);
        cols = pk.columns(0, cols.nrows()).into_owned() * &cols;
        cols.adjoint() * &cols
    })?;
    let pm = section(m);
    let pms = pm.adjoint();
    let mut cur = CMatrix::<T>::identity(m, m);
    let (astar_lim, kb, inc_b) = monotone_limit(m, max_iter, stop, |_| {
        cur = &pm * &cur * &pms;
        cur.clone()
    })?;
    finish(a_lim, astar_lim, &pm, ka.max(kb), inc_a.max(inc_b), 2 * bandwidth, tol)
}

fn finish<T: Real>(
    a_lim: CMatrix<T>,
    astar_lim: CMatrix<T>,
    p: &CMatrix<T>,
    iterations_used: usize,
    last_increment: T,
    section_edge: usize,
    tol: &Tolerances,
) -> Result<AsymptoticData<T>> {
    let dim = a_lim.nrows();
    let (vals, vecs) = hermitian_eigen(&a_lim);
    let keep: Vec<usize> = (0..dim).filter(|&k| vals[k] > tol.eq::<T>()).collect();
    let mut basis = CMatrix::<T>::zeros(dim, keep.len());
    for (d, &s) in keep.iter().enumerate() {
        basis.set_column(d, &vecs.column(s));
    }
    let r = keep.len();
    let ran_a = Subspace::from_basis(basis);
    let mut ad = AsymptoticData {
        a_lim,
        astar_lim,
        ran_a,
        v_r: CMatrix::zeros(r, r),
        q_r: CMatrix::zeros(r, r),
        iterations_used,
        last_increment,
        section_edge,
        residuals: AsymptoticResiduals {
            fixed_point: T::zero(),
            v_isometry: T::zero(),
            q_commutation: T::zero(),
        },
    };
    ad.residuals.fixed_point = op_norm(&(p.adjoint() * &ad.a_lim * p - &ad.a_lim));
    if r == 0 {
        return Ok(ad);
    }
    let b = &ad.ran_a.basis;
    let a_half = ad.a_sqrt();
    // V_r Λ^{1/2} B* = B* 𝒜^{1/2} P, solved by right-multiplying with B Λ^{-1/2}.
    let mut inv_half = CMatrix::<T>::zeros(r, r);
    for (d, &s) in keep.iter().enumerate() {
        inv_half[(d, d)] = Complex::new(T::one() / vals[s].sqrt(), T::zero());
    }
    ad.v_r = b.adjoint() * &a_half * p * b * inv_half;
    let inner = b.adjoint() * &a_half * &ad.astar_lim * &a_half * b;
    ad.q_r = psd_sqrt(&(CMatrix::identity(r, r) - inner), tol)?;
    ad.residuals.v_isometry = op_norm(&(ad.v_r.adjoint() * &ad.v_r - CMatrix::identity(r, r)));
    ad.residuals.q_commutation =
        commutator_norm(&ad.q_r, &ad.v_r).max(commutator_norm(&ad.q_r, &ad.v_r.adjoint()));
    Ok(ad)
}

/// Whether [`build_embedding`] enforces `S_i*P = PS_i*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    Strict,
    /// Builds the embedding anyway, for counterexamples.
    Relaxed,
}

/// Truncated `W = (W₁, W₂)`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct ModelEmbedding<T: Real> {
    pub fourier_depth: usize,
    pub laurent_depth: usize,
    /// Blocks `B*D_PPᵏ`, `k = 0..=fourier_depth`, stacked.
    #[serde(with = "serde_fmt::matrix")]
    pub w1: CMatrix<T>,
    /// Blocks for frequencies `−laurent_depth..=laurent_depth` in the basis of `𝒟_{P*}`, stacked.
    #[serde(with = "serde_fmt::matrix")]
    pub w2: CMatrix<T>,
    #[serde(skip)]
    pub h0: Subspace<T>,
    #[serde(skip)]
    pub defect_basis: CMatrix<T>,
    #[serde(skip)]
    pub defect_star_basis: CMatrix<T>,
    /// `‖P^{fourier_depth+1}‖`: `‖W₁h‖² = ‖h‖² − ‖P^{d+1}h‖²` on the truncation.
    pub tail_bound: T,
    /// Columns not affected by a section edge.
    pub valid_cols: usize,
    /// Largest `‖S_i*P − PS_i*‖ / (1 + ‖S_i‖‖P‖)`.
    pub star_commutation: T,
    pub mode: EmbeddingMode,
}

impl<T: Real> ModelEmbedding<T> {
    /// `k`-th Fourier coefficient block of `W₁` in ambient coordinates, `D_PPᵏ`.
    fn w1_ambient(&self, k: usize) -> CMatrix<T> {
        let kd = self.defect_basis.ncols();
        &self.defect_basis * self.w1.rows(k * kd, kd)
    }

    /// Laurent coefficient block of `W₂` at frequency `j` in ambient coordinates.
    fn w2_ambient(&self, j: isize) -> CMatrix<T> {
        let ks = self.defect_star_basis.ncols();
        let row = (j + self.laurent_depth as isize) as usize * ks;
        &self.defect_star_basis * self.w2.rows(row, ks)
    }
}

/// Assembles the truncated `W₁` and `W₂`.
pub fn build_embedding<T: Real>(
    g: &GammaTuple<T>,
    ad: &AsymptoticData<T>,
    fourier_depth: usize,
    laurent_depth: usize,
    mode: EmbeddingMode,
    tol: &Tolerances,
) -> Result<ModelEmbedding<T>> {
    let dim = g.dim();
    if ad.dim() != dim {
        return Err(LabError::DimensionMismatch(format!(
            "asymptotic data has dimension {}, the tuple {}",
            ad.dim(),
            dim
        )));
    }
    if fourier_depth == 0 {
        return Err(LabError::TruncationTooShallow { depth: 0, required: 1 });
    }
    let p = g.p();
    let np = op_norm(p);
    let mut star_commutation = T::zero();
    for i in 1..g.n() {
        let s = g.s(i);
        let r = op_norm(&(s.adjoint() * p - p * s.adjoint()));
        star_commutation = star_commutation.max(r / (T::one() + op_norm(s) * np));
        if mode == EmbeddingMode::Strict && r > tol.eq::<T>() * (T::one() + op_norm(s) * np) {
            return Err(LabError::CommutationViolated {
                index: i,
                residual: r.as_f64(),
            });
        }
    }
    let dp = defect_pair(p, tol)?;
    let bd = &dp.defect.basis;
    let bs = &dp.defect_star.basis;
    let (kd, ks) = (bd.ncols(), bs.ncols());

    let mut w1 = CMatrix::<T>::zeros(kd * (fourier_depth + 1), dim);
    let mut pk = CMatrix::<T>::identity(dim, dim);
    for k in 0..=fourier_depth {
        w1.rows_mut(k * kd, kd).copy_from(&(bd.adjoint() * &dp.d_p * &pk));
        pk = &pk * p;
    }
    let tail_bound = op_norm(&pk);

    let r = ad.rank();
    let mut w2 = CMatrix::<T>::zeros(ks * (2 * laurent_depth + 1), dim);
    let mut h0 = Subspace::full(dim);
    if r > 0 {
        let rb = &ad.ran_a.basis;
        let a_half = ad.a_sqrt();
        let sv = crate::matcore::singular_values(&ad.q_r);
        let smax = sv.first().copied().unwrap_or(T::zero());
        let smin = sv.iter().copied().filter(|&s| s > tol.rank::<T>() * smax).fold(smax, |a, b| a.min(b));
        let condition = if smin > T::zero() { smax / smin } else { T::zero() / T::zero() };
        if !(condition <= T::one() / tol.eq::<T>()) {
            return Err(LabError::QInverseIllConditioned {
                condition: condition.as_f64(),
            });
        }
        let q_inv = pinv(&ad.q_r, tol);
        // H₀ = {x : B*𝒜^{1/2}x ∈ ran Q}.
        let ran_q = range_basis(&ad.q_r, tol);
        let off = CMatrix::<T>::identity(r, r) - ran_q.projector();
        let into = rb.adjoint() * &a_half;
        let obstruction = &off * &into;
        h0 = range_basis(&obstruction.adjoint(), tol).complement(tol);

        let left = bs.adjoint() * &dp.d_p_star * &a_half * rb * &q_inv;
        let mut fwd = CMatrix::<T>::identity(r, r);
        let mut bwd = CMatrix::<T>::identity(r, r);
        let vs = ad.v_r.adjoint();
        for j in 0..=laurent_depth {
            let pos = (laurent_depth + j) * ks;
            w2.rows_mut(pos, ks).copy_from(&(&left * &fwd * &into));
            if j > 0 {
                let neg = (laurent_depth - j) * ks;
                w2.rows_mut(neg, ks).copy_from(&(&left * &bwd * &into));
            }
            fwd = &ad.v_r * fwd;
            bwd = &vs * bwd;
        }
    }
    Ok(ModelEmbedding {
        fourier_depth,
        laurent_depth,
        w1,
        w2,
        h0,
        defect_basis: bd.clone(),
        defect_star_basis: bs.clone(),
        tail_bound,
        valid_cols: dim.saturating_sub(ad.section_edge),
        star_commutation,
        mode,
    })
}

/// Intertwining residuals of the model on interior rows and valid columns.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct ModelReport<T: Real> {
    /// `‖W₁S_i − (I⊗A_i + M_z*⊗A_{n−i}*)W₁‖`, per `i`.
    pub w1_residuals: Vec<T>,
    /// `‖W₁P − (M_z*⊗I)W₁‖`.
    pub w1_p_residual: T,
    /// `‖W₂S_i − (I⊗B_i* + M_{e^{it}}*⊗PP*B_{n−i})W₂‖`, per `i`.
    pub w2_residuals: Vec<T>,
    pub w2_p_residual: T,
    /// False when `ran 𝒜 = 0`, so that `W₂ = 0` and its side is vacuous.
    pub w2_checked: bool,
    pub max_w1: T,
    pub max_w2: T,
}

/// Compares `(W₁ ⊕ W₂)S_i` with the model operators applied to `W₁ ⊕ W₂`.
///
/// `f` and `fadj` are the F_O-tuples of the tuple and of its adjoint. The top
/// Fourier and Laurent blocks are excluded because their neighbours are cut off.
pub fn verify_model<T: Real>(
    g: &GammaTuple<T>,
    me: &ModelEmbedding<T>,
    f: &FundamentalTuple<T>,
    fadj: &FundamentalTuple<T>,
    w2_checked: bool,
) -> Result<ModelReport<T>> {
    let n = g.n();
    if f.n() != n || fadj.n() != n {
        return Err(LabError::DimensionMismatch("F_O-tuples do not match the tuple".into()));
    }
    let cols = me.valid_cols;
    let lead = |m: CMatrix<T>| m.columns(0, cols).into_owned();
    let p = g.p();
    let pps = p * p.adjoint();

    let c: Vec<CMatrix<T>> = (0..=me.fourier_depth).map(|k| me.w1_ambient(k)).collect();
    let mut w1_residuals = Vec::with_capacity(n - 1);
    for i in 1..n {
        let (ai, aj) = (f.embedded(i), f.embedded(n - i).adjoint());
        let mut worst = T::zero();
        for k in 0..me.fourier_depth {
            let d = &c[k] * g.s(i) - &ai * &c[k] - &aj * &c[k + 1];
            worst = worst.max(op_norm(&lead(d)));
        }
        w1_residuals.push(worst);
    }
    let w1_p_residual = (0..me.fourier_depth)
        .map(|k| op_norm(&lead(&c[k] * p - &c[k + 1])))
        .fold(T::zero(), |a, b| a.max(b));

    let l = me.laurent_depth as isize;
    let e: Vec<CMatrix<T>> = (-l..=l).map(|j| me.w2_ambient(j)).collect();
    let mut w2_residuals = Vec::with_capacity(n - 1);
    let mut w2_p_residual = T::zero();
    if w2_checked {
        for i in 1..n {
            let bi = fadj.embedded(i).adjoint();
            let bj = &pps * fadj.embedded(n - i);
            let mut worst = T::zero();
            for k in 0..e.len() - 1 {
                let d = &e[k] * g.s(i) - &bi * &e[k] - &bj * &e[k + 1];
                worst = worst.max(op_norm(&lead(d)));
            }
            w2_residuals.push(worst);
        }
        w2_p_residual = (0..e.len() - 1)
            .map(|k| op_norm(&lead(&e[k] * p - &e[k + 1])))
            .fold(T::zero(), |a, b| a.max(b));
    } else {
        w2_residuals = vec![T::zero(); n - 1];
    }
    let max_w1 = w1_residuals.iter().fold(w1_p_residual, |a, &b| a.max(b));
    let max_w2 = w2_residuals.iter().fold(w2_p_residual, |a, &b| a.max(b));
    Ok(ModelReport {
        w1_residuals,
        w1_p_residual,
        w2_residuals,
        w2_p_residual,
        w2_checked,
        max_w1,
        max_w2,
    })
}

/// Residuals of the two defect identities satisfied by the adjoint F_O-tuple.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct Lemma1Report<T: Real> {
    /// `‖B_i*D_{P*}𝒜^{1/2} + PP*B_{n−i}D_{P*}𝒜^{1/2}V − D_{P*}S_i𝒜^{1/2}‖` on `ran 𝒜`.
    pub range_residuals: Vec<T>,
    /// `‖B_i*D_{P*}P* + PP*B_{n−i}D_{P*} − D_{P*}S_iP*‖`.
    pub adjoint_residuals: Vec<T>,
    pub max: T,
}

/// Checks both identities for every `i`, on all coordinates.
pub fn lemma1_check<T: Real>(
    g: &GammaTuple<T>,
    fadj: &FundamentalTuple<T>,
    ad: &AsymptoticData<T>,
    tol: &Tolerances,
) -> Result<Lemma1Report<T>> {
    lemma1_on(g, fadj, ad, g.dim(), tol)
}

fn lemma1_on<T: Real>(
    g: &GammaTuple<T>,
    fadj: &FundamentalTuple<T>,
    ad: &AsymptoticData<T>,
    cols: usize,
    tol: &Tolerances,
) -> Result<Lemma1Report<T>> {
    let n = g.n();
    if fadj.n() != n || ad.dim() != g.dim() {
        return Err(LabError::DimensionMismatch("lemma inputs do not match the tuple".into()));
    }
    let p = g.p();
    let ps = p.adjoint();
    let pps = p * &ps;
    let dps = defect_pair(p, tol)?.d_p_star;
    // 𝒜^{1/2} restricted to ran 𝒜 and V on the same domain, in ambient coordinates.
    let a_half = ad.a_sqrt() * ad.ran_a.projector();
    let v = ad.v_ambient();
    let lead = |m: CMatrix<T>| m.columns(0, cols).into_owned();
    let mut range_residuals = Vec::with_capacity(n - 1);
    let mut adjoint_residuals = Vec::with_capacity(n - 1);
    for i in 1..n {
        let bi = fadj.embedded(i).adjoint();
        let bj = &pps * fadj.embedded(n - i);
        let r1 = &bi * &dps * &a_half + &bj * &dps * &a_half * &v - &dps * g.s(i) * &a_half;
        let r2 = &bi * &dps * &ps + &bj * &dps - &dps * g.s(i) * &ps;
        range_residuals.push(op_norm(&lead(r1)));
        adjoint_residuals.push(op_norm(&lead(r2)));
    }
    let max = range_residuals
        .iter()
        .chain(&adjoint_residuals)
        .fold(T::zero(), |a, &b| a.max(b));
    Ok(Lemma1Report {
        range_residuals,
        adjoint_residuals,
        max,
    })
}

/// One closed form compared against the computed operator.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct FormulaResidual<T: Real> {
    pub name: String,
    pub residual: T,
}

/// Outcome of the weighted-shift counterexample.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct Example1Report<T: Real> {
    pub alpha: T,
    pub n: usize,
    pub dim: usize,
    /// `‖(D_{P*}S₁𝒜 − D_{P*}𝒜S₁)e₁‖`.
    pub gap: T,
    /// `2α(1 − α²)`.
    pub gap_closed_form: T,
    /// `(D_{P*}S₁𝒜 − D_{P*}𝒜S₁)e₁` on the leading coordinates.
    #[serde(with = "serde_fmt::complex_vec")]
    pub difference: Vec<Complex<T>>,
    /// Constant term of the model operator applied to `W₂e₁`, minus `D_{P*}S₁𝒜e₁`.
    pub model_vs_lemma: T,
    /// Coordinates on which the closed forms are compared.
    pub checked_coordinates: usize,
    pub formula_residuals: Vec<FormulaResidual<T>>,
    pub star_commutation: T,
    pub lemma1: Lemma1Report<T>,
    pub model: ModelReport<T>,
}

impl<T: Real> Example1Report<T> {
    pub fn max_formula_residual(&self) -> T {
        self.formula_residuals
            .iter()
            .fold(T::zero(), |a, r| a.max(r.residual))
    }
}

/// `T e_j = w_j e_{j+1}` with `w₁ = α` and `w_j = 1` afterwards, as an `N×N` section.
pub fn weighted_shift_section<T: Real>(size: usize, alpha: T) -> CMatrix<T> {
    let mut t = CMatrix::<T>::zeros(size, size);
    for j in 0..size.saturating_sub(1) {
        let w = if j == 0 { alpha } else { T::one() };
        t[(j + 1, j)] = Complex::new(w, T::zero());
    }
    t
}

fn diag_of<T: Real>(size: usize, head: &[T]) -> CMatrix<T> {
    let mut d = CMatrix::<T>::zeros(size, size);
    for (j, &x) in head.iter().enumerate().take(size) {
        d[(j, j)] = Complex::new(x, T::zero());
    }
    d
}

/// The symmetrization of `(I, …, I, T, T)` for the weighted shift `T`.
///
/// `P = T²` fails `S₁*P = PS₁*`, and the constant terms of the two sides of the
/// model relation on `W₂` differ on `e₁` by `2α(1 − α²)`.
pub fn example1_counterexample<T: Real>(m: usize, n: usize, alpha: T, tol: &Tolerances) -> Result<Example1Report<T>> {
    if m < 8 {
        return Err(LabError::InvalidArgument(format!("dimension must be at least 8 (got {m})")));
    }
    if n < 2 {
        return Err(LabError::InvalidArgument(format!("degree must be at least 2 (got {n})")));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(LabError::InvalidArgument(format!("alpha must lie in (0, 1) (got {alpha})")));
    }
    let build = |size: usize| -> Result<GammaTuple<T>> {
        let t = weighted_shift_section(size, alpha);
        let mut ops = vec![CMatrix::<T>::identity(size, size); n - 2];
        ops.push(t.clone());
        ops.push(t);
        symmetrize_operators(&ops)
    };
    let g = build(m)?;
    let ad = asymptotic_limits_sectioned(
        |size| {
            let t = weighted_shift_section(size, alpha);
            &t * &t
        },
        2,
        m,
        tol,
        None,
    )?;
    let c = m - 4;
    let lead = |x: &CMatrix<T>| x.view((0, 0), (c, c)).into_owned();
    let dp = defect_pair(g.p(), tol)?;
    let f = fo_tuple(&g, tol)?;
    let fadj = fo_tuple(&g.adjoint(), tol)?;

    let one = T::one();
    let two = T::lit(2.0);
    let nm2 = T::lit((n - 2) as f64);
    let beta = (one - alpha * alpha).sqrt();
    let mut ones = vec![one; m];
    ones[0] = alpha;
    let a_half_closed = diag_of(m, &ones);
    let d_p_closed = diag_of(m, &[beta]);
    let d_ps_closed = diag_of(m, &[one, one, beta]);
    let mut b1_closed = diag_of(m, &[nm2, nm2, nm2]);
    b1_closed[(0, 1)] += Complex::new(two * alpha, T::zero());
    b1_closed[(1, 2)] += Complex::new(two * beta, T::zero());
    let mut bn_closed = CMatrix::<T>::zeros(m, m);
    bn_closed[(0, 1)] = Complex::new(two * alpha, T::zero());
    bn_closed[(1, 2)] = Complex::new(two * beta, T::zero());

    let a_half = ad.a_sqrt();
    let astar_half = psd_sqrt(&ad.astar_lim, tol)?;
    let q = psd_sqrt(
        &(CMatrix::identity(m, m) - &a_half * &ad.astar_lim * &a_half),
        tol,
    )?;
    let b1 = fadj.embedded(1);
    let bn = fadj.embedded(n - 1);
    let resid = |name: &str, got: &CMatrix<T>, want: &CMatrix<T>| FormulaResidual {
        name: name.to_string(),
        residual: op_norm(&(lead(got) - lead(want))),
    };
    let mut formulas = vec![
        resid("D_P", &dp.d_p, &d_p_closed),
        resid("D_P*", &dp.d_p_star, &d_ps_closed),
        resid("A^1/2", &a_half, &a_half_closed),
        resid("A_*^1/2", &astar_half, &CMatrix::zeros(m, m)),
        resid("Q", &q, &CMatrix::identity(m, m)),
        resid("B_1", &b1, &b1_closed),
    ];
    if n > 2 {
        formulas.push(resid("B_n-1", &bn, &bn_closed));
    }

    // Every factor is diagonal or lower banded, so compressions act exactly on e₁.
    let s1 = g.s(1);
    let dps = &dp.d_p_star;
    let lhs = dps * s1 * &ad.a_lim;
    let rhs = dps * &ad.a_lim * s1;
    let diff = (&lhs - &rhs).column(0).into_owned();
    let gap = diff.norm();
    let p = g.p();
    let model_const = b1.adjoint() * dps * &ad.a_lim + p * p.adjoint() * &bn * dps * &ad.a_lim * p;
    let model_vs_lemma = (model_const - &lhs).column(0).norm();

    let me = build_embedding(&g, &ad, 2 * m, 1, EmbeddingMode::Relaxed, tol)?;
    let model = verify_model(&g, &me, &f, &fadj, ad.rank() > 0)?;
    let lemma1 = lemma1_on(&g, &fadj, &ad, c, tol)?;
    Ok(Example1Report {
        alpha,
        n,
        dim: m,
        gap,
        gap_closed_form: two * alpha * (one - alpha * alpha),
        difference: diff.iter().take(c).copied().collect(),
        model_vs_lemma,
        checked_coordinates: c,
        formula_residuals: formulas,
        star_commutation: me.star_commutation,
        lemma1,
        model,
    })
}

/// Everything the model pipeline computes for one tuple.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "")]
pub struct ModelPipeline<T: Real> {
    pub asymptotic: AsymptoticData<T>,
    pub embedding: ModelEmbedding<T>,
    pub lemma1: Lemma1Report<T>,
    pub model: ModelReport<T>,
}

/// Limits, embedding, lemma identities and intertwining for a finite tuple.
pub fn model_pipeline<T: Real>(
    g: &GammaTuple<T>,
    fourier_depth: usize,
    laurent_depth: usize,
    mode: EmbeddingMode,
    tol: &Tolerances,
) -> Result<ModelPipeline<T>> {
    let asymptotic = asymptotic_limits(g.p(), tol, None)?;
    let embedding = build_embedding(g, &asymptotic, fourier_depth, laurent_depth, mode, tol)?;
    let f = fo_tuple(g, tol)?;
    let fadj = fo_tuple(&g.adjoint(), tol)?;
    let lemma1 = lemma1_check(g, &fadj, &asymptotic, tol)?;
    let model = verify_model(g, &embedding, &f, &fadj, asymptotic.rank() > 0)?;
    Ok(ModelPipeline {
        asymptotic,
        embedding,
        lemma1,
        model,
    })
}
