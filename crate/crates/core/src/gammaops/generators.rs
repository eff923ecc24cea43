//! Seeded tuples with a known contractivity guarantee.

use nalgebra::Complex;
use rand::Rng;

use super::GammaTuple;
use crate::error::{LabError, Result};
use crate::matcore::{complex_normal, gaussian_matrix, haar_unitary, op_norm, seeded_rng, CMatrix};
use crate::polydisc::elementary_symmetric;
use crate::scalar::Real;

/// Where diagonal generators draw their points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLaw {
    /// Modulus uniform in `[0, 0.95]`.
    Interior,
    /// Modulus exactly one.
    Boundary,
}

/// Symmetrization `(e₁(X), …, eₙ(X))` of commuting matrices `X₁, …, Xₙ`.
pub fn symmetrize_operators<T: Real>(ops: &[CMatrix<T>]) -> Result<GammaTuple<T>> {
    let n = ops.len();
    if n == 0 {
        return Err(LabError::InvalidArgument("need at least one operator".into()));
    }
    let dim = ops[0].nrows();
    let mut e: Vec<CMatrix<T>> = vec![CMatrix::zeros(dim, dim); n + 1];
    e[0] = CMatrix::identity(dim, dim);
    for (m, x) in ops.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            let add = &e[k - 1] * x;
            e[k] += add;
        }
    }
    let p = e.pop().expect("n ≥ 1");
    e.remove(0);
    GammaTuple::new(e, p)
}

fn check_shape(dim: usize, n: usize) -> Result<()> {
    if dim == 0 || n < 2 {
        return Err(LabError::InvalidArgument(format!(
            "generators need dim ≥ 1 and n ≥ 2 (got dim {dim}, n {n})"
        )));
    }
    Ok(())
}

/// Symmetrization of `(I, …, I, T₁, T₂)` for commuting contractions `T₁ = f(T)`, `T₂ = g(T)`.
///
/// `T` is a normalized Gaussian matrix and `f`, `g` random quadratics, each
/// rescaled to an operator norm drawn from `[0.6, 0.95]`.
pub fn gen_symmetrized_ando<T: Real>(dim: usize, n: usize, seed: u64) -> Result<GammaTuple<T>> {
    check_shape(dim, n)?;
    let mut rng = seeded_rng(seed);
    let mut t: CMatrix<T> = gaussian_matrix(dim, dim, &mut rng);
    let nt = op_norm(&t);
    t /= Complex::new(nt, T::zero());
    let t2 = &t * &t;
    let id = CMatrix::<T>::identity(dim, dim);
    let quad = |rng: &mut rand_chacha::ChaCha8Rng| -> CMatrix<T> {
        let c: [Complex<T>; 3] = [complex_normal(rng), complex_normal(rng), complex_normal(rng)];
        let m = &id * c[0] + &t * c[1] + &t2 * c[2];
        let target: f64 = rng.random_range(0.6..0.95);
        let nm = op_norm(&m);
        m * Complex::new(T::lit(target) / nm, T::zero())
    };
    let a = quad(&mut rng);
    let b = quad(&mut rng);
    let mut ops = vec![id.clone(); n - 2];
    ops.push(a);
    ops.push(b);
    symmetrize_operators(&ops)
}

/// Diagonal tuple whose k-th diagonal entries are `πₙ` of a random point of the polydisc.
pub fn gen_diagonal<T: Real>(dim: usize, n: usize, seed: u64, law: PointLaw) -> Result<GammaTuple<T>> {
    check_shape(dim, n)?;
    let mut rng = seeded_rng(seed);
    let mut s: Vec<CMatrix<T>> = vec![CMatrix::zeros(dim, dim); n - 1];
    let mut p = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        let z: Vec<Complex<T>> = (0..n)
            .map(|_| {
                let r: f64 = match law {
                    PointLaw::Interior => rng.random_range(0.0..=0.95),
                    PointLaw::Boundary => 1.0,
                };
                let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                Complex::new(T::lit(r * th.cos()), T::lit(r * th.sin()))
            })
            .collect();
        let e = elementary_symmetric(&z);
        for i in 0..n - 1 {
            s[i][(k, k)] = e[i];
        }
        p[(k, k)] = e[n - 1];
    }
    GammaTuple::new(s, p)
}

/// Diagonal tuple from interior points of the polydisc.
pub fn gen_diagonal_normal<T: Real>(dim: usize, n: usize, seed: u64) -> Result<GammaTuple<T>> {
    gen_diagonal(dim, n, seed, PointLaw::Interior)
}

/// Diagonal tuple from unimodular points, a Γₙ-unitary by construction.
pub fn gen_diagonal_unitary<T: Real>(dim: usize, n: usize, seed: u64) -> Result<GammaTuple<T>> {
    gen_diagonal(dim, n, seed, PointLaw::Boundary)
}

/// `UGU*` for a seeded Haar unitary `U`; returns the tuple and `U`.
pub fn random_conjugate<T: Real>(g: &GammaTuple<T>, seed: u64) -> (GammaTuple<T>, CMatrix<T>) {
    let u = haar_unitary(g.dim(), &mut seeded_rng(seed));
    (g.conjugate(&u), u)
}
