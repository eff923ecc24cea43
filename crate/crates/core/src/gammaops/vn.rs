//! Sampling falsifier for the von Neumann inequality over Γₙ.
//!
//! For each test polynomial p the sup of |p| over Γₙ is estimated from below
//! on πₙ(𝕋ⁿ) (maximum principle), so a ratio ‖p(S, P)‖ / sup above one is
//! evidence against contractivity. The sup estimate combines a multiset grid,
//! local pattern-search refinement and the values of p at joint eigenvalues.

use std::collections::HashMap;

use nalgebra::{Complex, ComplexField};
use rayon::prelude::*;
use serde::Serialize;

use super::GammaTuple;
use crate::error::{LabError, Result};
use crate::matcore::{complex_normal, joint_eigenvalues, op_norm, seeded_rng, serde_fmt, CMatrix, Tolerances};
use crate::polydisc::{elementary_symmetric, grid_angle, in_gamma, torus_multiset_indices, GammaPoint, DEFAULT_GRID_CAP};
use crate::scalar::Real;

/// Sampling parameters of the falsifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub struct VnConfig {
    /// Total degree bound of the test polynomials.
    pub degree: usize,
    /// Number of random polynomials (the coordinate functions are always tested too).
    pub samples: usize,
    /// Points per circle in the torus grid.
    pub resolution: usize,
    pub seed: u64,
    pub grid_cap: usize,
}

impl Default for VnConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            samples: 200,
            resolution: 24,
            seed: 0,
            grid_cap: DEFAULT_GRID_CAP,
        }
    }
}

/// Exponent vectors of total degree ≤ `degree`, graded and then lexicographically descending.
pub fn monomial_exponents(nvars: usize, degree: usize) -> Vec<Vec<u32>> {
    fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            compositions(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if nvars == 0 {
        out.push(Vec::new());
        return out;
    }
    for d in 0..=degree as u32 {
        compositions(d, nvars, &mut Vec::new(), &mut out);
    }
    out
}

/// Monomials with a recipe `m = parent · x_var` for incremental evaluation.
#[derive(Debug, Clone)]
struct MonomialBasis {
    exps: Vec<Vec<u32>>,
    parent: Vec<Option<(usize, usize)>>,
}

impl MonomialBasis {
    fn new(nvars: usize, degree: usize) -> Self {
        let exps = monomial_exponents(nvars, degree);
        let index: HashMap<Vec<u32>, usize> = exps.iter().cloned().enumerate().map(|(k, e)| (e, k)).collect();
        let parent = exps
            .iter()
            .map(|e| {
                let var = e.iter().position(|&x| x > 0)?;
                let mut up = e.clone();
                up[var] -= 1;
                Some((index[&up], var))
            })
            .collect();
        Self { exps, parent }
    }

    fn len(&self) -> usize {
        self.exps.len()
    }

    fn eval_scalar<T: Real>(&self, x: &[Complex<T>], out: &mut Vec<Complex<T>>) {
        out.clear();
        for par in &self.parent {
            out.push(match *par {
                None => Complex::new(T::one(), T::zero()),
                Some((k, v)) => out[k] * x[v],
            });
        }
    }

    fn eval_ops<T: Real>(&self, x: &[CMatrix<T>]) -> Vec<CMatrix<T>> {
        let dim = x.first().map_or(0, |m| m.nrows());
        let mut out: Vec<CMatrix<T>> = Vec::with_capacity(self.len());
        for par in &self.parent {
            let m = match *par {
                None => CMatrix::identity(dim, dim),
                Some((k, v)) => &out[k] * &x[v],
            };
            out.push(m);
        }
        out
    }
}

/// One term `c · z^e` of a polynomial.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct Term<T: Real> {
    pub exponents: Vec<u32>,
    #[serde(with = "serde_fmt::complex")]
    pub coeff: Complex<T>,
}

/// Polynomial in `nvars` complex variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct MultiPoly<T: Real> {
    pub nvars: usize,
    pub terms: Vec<Term<T>>,
}

impl<T: Real> MultiPoly<T> {
    /// The coordinate function `z_j` (0-based `j`).
    pub fn coordinate(nvars: usize, j: usize) -> Self {
        let mut e = vec![0; nvars];
        e[j] = 1;
        Self {
            nvars,
            terms: vec![Term {
                exponents: e,
                coeff: Complex::new(T::one(), T::zero()),
            }],
        }
    }

    /// Evaluates at a point.
    pub fn eval(&self, z: &[Complex<T>]) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for t in &self.terms {
            let mut m = t.coeff;
            for (&e, &x) in t.exponents.iter().zip(z) {
                for _ in 0..e {
                    m *= x;
                }
            }
            acc += m;
        }
        acc
    }

    /// Evaluates on a commuting tuple of matrices.
    pub fn eval_operator(&self, x: &[CMatrix<T>]) -> CMatrix<T> {
        let dim = x.first().map_or(0, |m| m.nrows());
        let mut acc = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            let mut m = CMatrix::<T>::identity(dim, dim);
            for (v, &e) in t.exponents.iter().enumerate() {
                for _ in 0..e {
                    m = m * &x[v];
                }
            }
            acc += m * t.coeff;
        }
        acc
    }
}

/// Test polynomials with precomputed lower bounds for their sup over Γₙ.
///
/// Building a probe is the expensive part of the falsifier; reuse one probe
/// for many tuples of the same degree `n`.
#[derive(Debug, Clone)]
pub struct VnProbe<T: Real> {
    pub nvars: usize,
    pub config: VnConfig,
    basis: MonomialBasis,
    coeffs: Vec<Vec<Complex<T>>>,
    /// Lower bound of sup_{Γₙ} |p| for each polynomial.
    pub sups: Vec<T>,
}

impl<T: Real> VnProbe<T> {
    pub fn new(nvars: usize, config: VnConfig) -> Result<Self> {
        if config.degree < 1 {
            return Err(LabError::InvalidArgument("polynomial degree must be at least 1".into()));
        }
        if nvars == 0 {
            return Err(LabError::InvalidArgument("need at least one variable".into()));
        }
        let basis = MonomialBasis::new(nvars, config.degree);
        let nm = basis.len();
        let mut coeffs = Vec::with_capacity(nvars + config.samples);
        for j in 0..nvars {
            let mut c = vec![Complex::new(T::zero(), T::zero()); nm];
            c[1 + j] = Complex::new(T::one(), T::zero());
            coeffs.push(c);
        }
        let mut rng = seeded_rng(config.seed);
        for _ in 0..config.samples {
            coeffs.push((0..nm).map(|_| complex_normal(&mut rng)).collect());
        }
        let grid = torus_multiset_indices(nvars, config.resolution, config.grid_cap)?;
        let res = config.resolution;
        let roots: Vec<Complex<T>> = (0..res)
            .map(|k| {
                let t = grid_angle(k, res);
                Complex::new(T::lit(t.cos()), T::lit(t.sin()))
            })
            .collect();
        let np = coeffs.len();
        let chunk_best: Vec<Vec<(T, usize)>> = grid
            .par_chunks(2048)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut best = vec![(-T::one(), 0usize); np];
                let mut mon = Vec::with_capacity(nm);
                let mut z = vec![Complex::new(T::zero(), T::zero()); nvars];
                for (off, idx) in chunk.iter().enumerate() {
                    for (slot, &k) in z.iter_mut().zip(idx) {
                        *slot = roots[k];
                    }
                    let s = elementary_symmetric(&z);
                    basis.eval_scalar(&s, &mut mon);
                    for (b, c) in best.iter_mut().zip(&coeffs) {
                        let v = dot(c, &mon).modulus();
                        if v > b.0 {
                            *b = (v, 2048 * ci + off);
                        }
                    }
                }
                best
            })
            .collect();
        let mut best = vec![(-T::one(), 0usize); np];
        for cb in &chunk_best {
            for (b, &x) in best.iter_mut().zip(cb) {
                if x.0 > b.0 {
                    *b = x;
                }
            }
        }
        let sups: Vec<T> = (0..np)
            .into_par_iter()
            .map(|k| {
                let start: Vec<f64> = grid[best[k].1].iter().map(|&i| grid_angle(i, res)).collect();
                let refined = refine(&basis, &coeffs[k], start, res);
                refined.max(best[k].0)
            })
            .collect();
        Ok(Self {
            nvars,
            config,
            basis,
            coeffs,
            sups,
        })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Polynomial `k` in term form.
    pub fn polynomial(&self, k: usize) -> MultiPoly<T> {
        MultiPoly {
            nvars: self.nvars,
            terms: self
                .basis
                .exps
                .iter()
                .zip(&self.coeffs[k])
                .filter(|(_, c)| c.re != T::zero() || c.im != T::zero())
                .map(|(e, &c)| Term {
                    exponents: e.clone(),
                    coeff: c,
                })
                .collect(),
        }
    }
}

fn dot<T: Real>(c: &[Complex<T>], m: &[Complex<T>]) -> Complex<T> {
    c.iter()
        .zip(m)
        .fold(Complex::new(T::zero(), T::zero()), |a, (x, y)| a + *x * *y)
}

/// Coordinate-wise pattern search for a local max of |p ∘ πₙ| on the torus.
fn refine<T: Real>(basis: &MonomialBasis, c: &[Complex<T>], mut theta: Vec<f64>, res: usize) -> T {
    let value = |th: &[f64], mon: &mut Vec<Complex<T>>| {
        let z: Vec<Complex<T>> = th.iter().map(|t| Complex::new(T::lit(t.cos()), T::lit(t.sin()))).collect();
        basis.eval_scalar(&elementary_symmetric(&z), mon);
        dot(c, mon).modulus()
    };
    let mut mon = Vec::with_capacity(basis.len());
    let mut best = value(&theta, &mut mon);
    let mut h = std::f64::consts::PI / res as f64;
    let mut iters = 0;
    while h > 1e-9 && iters < 2000 {
        iters += 1;
        let mut improved = false;
        for v in 0..theta.len() {
            for dir in [1.0, -1.0] {
                let old = theta[v];
                theta[v] = old + dir * h;
                let f = value(&theta, &mut mon);
                if f > best {
                    best = f;
                    improved = true;
                    break;
                }
                theta[v] = old;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    best
}

/// Outcome of the falsifier. Non-falsification is evidence, not proof.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case", bound = "")]
pub enum VnVerdict<T: Real> {
    Falsified {
        index: usize,
        ratio: T,
        witness: MultiPoly<T>,
    },
    NotFalsified {
        max_ratio: T,
        polynomials: usize,
    },
}

impl<T: Real> VnVerdict<T> {
    pub fn is_falsified(&self) -> bool {
        matches!(self, VnVerdict::Falsified { .. })
    }

    /// The largest ratio seen (the witness ratio when falsified).
    pub fn ratio(&self) -> T {
        match self {
            VnVerdict::Falsified { ratio, .. } => *ratio,
            VnVerdict::NotFalsified { max_ratio, .. } => *max_ratio,
        }
    }
}

/// Builds a probe for `g.n()` variables and runs [`vn_falsify_with`].
pub fn vn_falsify<T: Real>(g: &GammaTuple<T>, config: VnConfig, tol: &Tolerances) -> Result<VnVerdict<T>> {
    let probe = VnProbe::new(g.n(), config)?;
    vn_falsify_with(g, &probe, tol)
}

/// Tests every polynomial of the probe against the tuple.
pub fn vn_falsify_with<T: Real>(g: &GammaTuple<T>, probe: &VnProbe<T>, tol: &Tolerances) -> Result<VnVerdict<T>> {
    if probe.nvars != g.n() {
        return Err(LabError::DimensionMismatch(format!(
            "probe has {} variables, tuple has degree {}",
            probe.nvars,
            g.n()
        )));
    }
    let entries = g.entries();
    // Joint eigenvalues inside Γₙ give a second lower bound for each sup.
    let mut eig_mons: Vec<Vec<Complex<T>>> = Vec::new();
    if let Ok(js) = joint_eigenvalues(&entries, tol, probe.config.seed) {
        for lam in js {
            let inside = in_gamma(&GammaPoint::new(lam.clone()), tol).map(|m| m.inside).unwrap_or(false);
            if inside {
                let mut mon = Vec::new();
                probe.basis.eval_scalar(&lam, &mut mon);
                eig_mons.push(mon);
            }
        }
    }
    let ops = probe.basis.eval_ops(&entries);
    let dim = g.dim();
    let ratios: Vec<T> = (0..probe.len())
        .into_par_iter()
        .map(|k| {
            let c = &probe.coeffs[k];
            let mut m = CMatrix::<T>::zeros(dim, dim);
            for (op, &ck) in ops.iter().zip(c) {
                if ck.re != T::zero() || ck.im != T::zero() {
                    m += op * ck;
                }
            }
            let norm = op_norm(&m);
            let sup = eig_mons
                .iter()
                .map(|mon| dot(c, mon).modulus())
                .fold(probe.sups[k], |a, b| a.max(b));
            if sup > T::zero() {
                norm / sup
            } else if norm > T::zero() {
                T::lit(f64::INFINITY)
            } else {
                T::zero()
            }
        })
        .collect();
    let limit = T::one() + tol.cert::<T>();
    if let Some(index) = ratios.iter().position(|&r| r > limit) {
        return Ok(VnVerdict::Falsified {
            index,
            ratio: ratios[index],
            witness: probe.polynomial(index),
        });
    }
    Ok(VnVerdict::NotFalsified {
        max_ratio: ratios.iter().fold(T::zero(), |a, &b| a.max(b)),
        polynomials: ratios.len(),
    })
}
