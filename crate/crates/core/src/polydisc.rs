//! Geometry of the symmetrized polydisc Γₙ: the symmetrization map, membership
//! tests for Γₙ and its distinguished boundary, and torus samplers.

use nalgebra::{Complex, ComplexField, Schur};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matcore::{cx, haar_unitary, seeded_rng, serde_fmt, CMatrix, Tolerances};
use crate::scalar::Real;

/// Default cap on the number of grid points materialized at once.
pub const DEFAULT_GRID_CAP: usize = 1_000_000;

/// Raw coordinates `(s₁, …, s_{n−1}, p)`; no membership claim is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GammaPoint<T: Real> {
    pub n: usize,
    #[serde(with = "serde_fmt::complex_vec")]
    pub coords: Vec<Complex<T>>,
}

impl<T: Real> GammaPoint<T> {
    pub fn new(coords: Vec<Complex<T>>) -> Self {
        Self {
            n: coords.len(),
            coords,
        }
    }

    /// The last coordinate `p`.
    pub fn p(&self) -> Complex<T> {
        self.coords[self.n - 1]
    }
}

/// Elementary symmetric polynomials `e₁, …, eₙ` of `z`, by expanding `∏(t + zᵢ)`.
pub fn symmetrize<T: Real>(z: &[Complex<T>]) -> GammaPoint<T> {
    GammaPoint::new(elementary_symmetric(z))
}

/// `e₁(z), …, eₙ(z)` via the product recurrence.
pub fn elementary_symmetric<T: Real>(z: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = z.len();
    // e[k] holds e_k of the prefix processed so far; e[0] = 1.
    let mut e = vec![Complex::new(T::zero(), T::zero()); n + 1];
    e[0] = Complex::new(T::one(), T::zero());
    for (m, &zi) in z.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] = e[k] + e[k - 1] * zi;
        }
    }
    e.remove(0);
    e
}

/// Roots of `tⁿ − s₁tⁿ⁻¹ + s₂tⁿ⁻² − … + (−1)ⁿp` via the companion matrix.
pub fn gamma_roots<T: Real>(pt: &GammaPoint<T>) -> Result<Vec<Complex<T>>> {
    let n = pt.coords.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![pt.coords[0]]);
    }
    // Monic polynomial tⁿ + c_{n−1}tⁿ⁻¹ + … + c₀ with c_{n−k} = (−1)^k s_k.
    let mut comp = CMatrix::<T>::zeros(n, n);
    for k in 1..=n {
        let sign = if k % 2 == 0 { T::one() } else { -T::one() };
        let c = pt.coords[k - 1] * sign;
        comp[(0, k - 1)] = -c;
    }
    for i in 1..n {
        comp[(i, i - 1)] = Complex::new(T::one(), T::zero());
    }
    // Exactly nilpotent companions can stall the shifted QR iteration; a fixed
    // unitary similarity breaks the structure without moving the eigenvalues.
    let schur = match Schur::try_new(comp.clone(), T::eps(), 10_000) {
        Some(s) => s,
        None => {
            let q = haar_unitary::<T, _>(n, &mut seeded_rng(0x5eed));
            Schur::try_new(q.adjoint() * comp * &q, T::eps(), 10_000).ok_or(LabError::RootFindingFailed)?
        }
    };
    let (_, t) = schur.unpack();
    let roots: Vec<Complex<T>> = (0..n).map(|k| t[(k, k)]).collect();
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LabError::RootFindingFailed);
    }
    Ok(roots)
}

/// Replaces clusters of nearby roots by their centroid.
///
/// A root of multiplicity m moves by about ε^{1/m} under roundoff while the
/// mean of the cluster stays accurate, so margins are read off the centroids.
fn cluster_centroids<T: Real>(roots: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = roots.len();
    if n <= 1 {
        return roots.to_vec();
    }
    let scale = roots.iter().fold(T::one(), |a, z| a.max(z.modulus()));
    let radius = T::lit(8.0) * T::eps().powf(T::one() / T::lit(n as f64)) * scale;
    // Single-linkage clustering with a small union-find.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (roots[i] - roots[j]).modulus() <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut out = Vec::new();
    for r in 0..n {
        if find(&mut parent, r) != r {
            continue;
        }
        let members: Vec<Complex<T>> = (0..n).filter(|&k| find(&mut parent, k) == r).map(|k| roots[k]).collect();
        let sum = members.iter().fold(Complex::new(T::zero(), T::zero()), |a, &b| a + b);
        out.push(sum / Complex::new(T::lit(members.len() as f64), T::zero()));
    }
    out
}

/// Membership verdict with the signed distance of the outermost root from the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Membership<T: Real> {
    pub inside: bool,
    pub margin: T,
}

/// Decides `pt ∈ Γₙ` by checking that all roots lie in the closed unit disc.
pub fn in_gamma<T: Real>(pt: &GammaPoint<T>, tol: &Tolerances) -> Result<Membership<T>> {
    let roots = gamma_roots(pt)?;
    if roots.is_empty() {
        return Ok(Membership {
            inside: true,
            margin: -T::one(),
        });
    }
    let cents = cluster_centroids(&roots);
    let rmax = cents.iter().fold(T::zero(), |a, z| a.max(z.modulus()));
    let margin = rmax - T::one();
    Ok(Membership {
        inside: margin <= tol.cert::<T>(),
        margin,
    })
}

/// Decides `pt ∈ bΓₙ`: inside Γₙ with `|p| = 1`.
pub fn in_bgamma<T: Real>(pt: &GammaPoint<T>, tol: &Tolerances) -> Result<bool> {
    if pt.coords.is_empty() {
        return Ok(false);
    }
    let m = in_gamma(pt, tol)?;
    Ok(m.inside && (pt.p().modulus() - T::one()).abs() <= tol.cert::<T>())
}

fn unit_root<T: Real>(k: usize, resolution: usize) -> Complex<T> {
    let t = 2.0 * std::f64::consts::PI * (k as f64) / (resolution as f64);
    cx(t.cos(), t.sin())
}

/// Full tensor grid `{e^{2πik/resolution}}ⁿ` in lexicographic order.
pub fn torus_grid<T: Real>(n: usize, resolution: usize, cap: usize) -> Result<Vec<Vec<Complex<T>>>> {
    if resolution < 2 {
        return Err(LabError::InvalidArgument("torus resolution must be at least 2".into()));
    }
    let size = (resolution as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(LabError::GridTooLarge { requested: size, cap });
    }
    let roots: Vec<Complex<T>> = (0..resolution).map(|k| unit_root(k, resolution)).collect();
    let mut out = Vec::with_capacity(size as usize);
    let mut idx = vec![0usize; n];
    loop {
        out.push(idx.iter().map(|&k| roots[k]).collect());
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < resolution {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Seeded subsample of the tensor grid: `size` points with independent grid indices.
pub fn torus_subsample<T: Real>(n: usize, resolution: usize, size: usize, seed: u64) -> Result<Vec<Vec<Complex<T>>>> {
    if resolution < 2 {
        return Err(LabError::InvalidArgument("torus resolution must be at least 2".into()));
    }
    let mut rng = seeded_rng(seed);
    Ok((0..size)
        .map(|_| (0..n).map(|_| unit_root(rng.random_range(0..resolution), resolution)).collect())
        .collect())
}

/// Grid indices `0 ≤ k₁ ≤ … ≤ kₙ < resolution`.
///
/// Since πₙ is symmetric, these multisets cover πₙ(grid) with far fewer points
/// than the tensor grid.
pub fn torus_multiset_indices(n: usize, resolution: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    if resolution < 2 {
        return Err(LabError::InvalidArgument("torus resolution must be at least 2".into()));
    }
    let size = binomial((resolution + n - 1) as u128, n as u128);
    if size > cap as u128 {
        return Err(LabError::GridTooLarge { requested: size, cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    if n == 0 {
        out.push(Vec::new());
        return Ok(out);
    }
    let mut idx = vec![0usize; n];
    loop {
        out.push(idx.clone());
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            if idx[d] + 1 < resolution {
                idx[d] += 1;
                let v = idx[d];
                for slot in idx.iter_mut().skip(d + 1) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Angle of grid index `k` at the given resolution.
pub fn grid_angle(k: usize, resolution: usize) -> f64 {
    2.0 * std::f64::consts::PI * (k as f64) / (resolution as f64)
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn c(a: f64, b: f64) -> C {
        C::new(a, b)
    }

    #[test]
    fn symmetrize_examples() {
        let z = symmetrize(&[c(0.0, 0.0); 4]);
        assert!(z.coords.iter().all(|w| w.norm() == 0.0));
        let z = symmetrize(&[c(1.0, 0.0); 3]);
        assert_eq!(z.coords, vec![c(3.0, 0.0), c(3.0, 0.0), c(1.0, 0.0)]);
        // (t+0.5)(t−0.5)(t+i) = t³ + i t² − 0.25 t − 0.25 i
        let z = symmetrize(&[c(0.5, 0.0), c(-0.5, 0.0), c(0.0, 1.0)]);
        let want = [c(0.0, 1.0), c(-0.25, 0.0), c(0.0, -0.25)];
        for (a, b) in z.coords.iter().zip(want) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn membership_examples() {
        let tol = Tolerances::default();
        let m = in_gamma(&GammaPoint::new(vec![c(0.0, 0.0); 3]), &tol).unwrap();
        assert!(m.inside && (m.margin + 1.0).abs() < 1e-12);
        let ones = GammaPoint::new(vec![c(3.0, 0.0), c(3.0, 0.0), c(1.0, 0.0)]);
        let m = in_gamma(&ones, &tol).unwrap();
        assert!(m.inside && m.margin.abs() < 1e-9, "margin {}", m.margin);
        assert!(in_bgamma(&ones, &tol).unwrap());
        let out = GammaPoint::new(vec![c(3.3, 0.0), c(3.0, 0.0), c(1.0, 0.0)]);
        let m = in_gamma(&out, &tol).unwrap();
        assert!(!m.inside && m.margin > 0.0);
        assert!(!in_bgamma(&GammaPoint::new(vec![c(0.0, 0.0); 3]), &tol).unwrap());
    }

    #[test]
    fn grids() {
        let g: Vec<Vec<C>> = torus_grid(1, 4, DEFAULT_GRID_CAP).unwrap();
        let want = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (p, w) in g.iter().zip(want) {
            assert!((p[0] - w).norm() < 1e-15);
        }
        assert_eq!(torus_grid::<f64>(2, 2, DEFAULT_GRID_CAP).unwrap().len(), 4);
        let s: Vec<Vec<C>> = torus_subsample(3, 10, 500, 7).unwrap();
        assert_eq!(s.len(), 500);
        assert!(s.iter().flatten().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        assert!(matches!(
            torus_grid::<f64>(7, 24, DEFAULT_GRID_CAP),
            Err(LabError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn multiset_grid_counts() {
        // Oracle: stars and bars, C(r + n − 1, n).
        assert_eq!(torus_multiset_indices(3, 24, DEFAULT_GRID_CAP).unwrap().len(), 2600);
        assert_eq!(torus_multiset_indices(2, 3, DEFAULT_GRID_CAP).unwrap().len(), 6);
        let all = torus_multiset_indices(4, 5, DEFAULT_GRID_CAP).unwrap();
        assert!(all.iter().all(|v| v.windows(2).all(|w| w[0] <= w[1])));
    }

    fn disc_point() -> impl Strategy<Value = C> {
        (0.0f64..=1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| C::from_polar(r, t))
    }

    proptest! {
        #[test]
        fn symmetrized_disc_points_are_in_gamma(z in prop::collection::vec(disc_point(), 1..6)) {
            let tol = Tolerances::default();
            prop_assert!(in_gamma(&symmetrize(&z), &tol).unwrap().inside);
        }

        #[test]
        fn symmetrize_is_permutation_invariant(z in prop::collection::vec(disc_point(), 2..6), shift in 0usize..5) {
            let mut w = z.clone();
            let k = shift % w.len();
            w.rotate_left(k);
            w.reverse();
            let a = symmetrize(&z);
            let b = symmetrize(&w);
            for (x, y) in a.coords.iter().zip(&b.coords) {
                prop_assert!((x - y).norm() <= 1e-14 * (1.0 + x.norm()));
            }
        }

        #[test]
        fn boundary_iff_unimodular(
            angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 2..6),
            shrink in prop::collection::vec(prop::bool::ANY, 2..6),
        ) {
            let tol = Tolerances::default();
            let z: Vec<C> = angles
                .iter()
                .zip(shrink.iter().cycle())
                .map(|(&t, &s)| C::from_polar(if s { 0.7 } else { 1.0 }, t))
                .collect();
            let all_unimodular = z.iter().all(|w| (w.norm() - 1.0).abs() < 1e-12);
            prop_assert_eq!(in_bgamma(&symmetrize(&z), &tol).unwrap(), all_unimodular);
        }
    }
}
