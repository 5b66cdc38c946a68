//! SU(n) algebra bases, polar (Cartan) decomposition on SL(n, C) and the
//! unitarity distances used by gauge cooling.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const DET_TOL: f64 = 1e-10;
const MAX_CONDITION: f64 = 1e12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Orthonormal basis `X^a` of su(n) under `<X, Y> = tr(X^dagger Y) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieBasis {
    pub n: usize,
    pub matrices: Vec<CMatrix>,
}

/// `i sigma` for n = 2, `i lambda` (Gell-Mann) for n = 3.
pub fn su_basis(n: usize) -> Result<LieBasis> {
    let i = c(0.0, 1.0);
    let o = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let hermitian: Vec<Vec<Complex64>> = match n {
        2 => vec![vec![o, one, one, o], vec![o, -i, i, o], vec![one, o, o, -one]],
        3 => {
            let s = c(1.0 / 3f64.sqrt(), 0.0);
            vec![
                vec![o, one, o, one, o, o, o, o, o],
                vec![o, -i, o, i, o, o, o, o, o],
                vec![one, o, o, o, -one, o, o, o, o],
                vec![o, o, one, o, o, o, one, o, o],
                vec![o, o, -i, o, o, o, i, o, o],
                vec![o, o, o, o, o, one, o, one, o],
                vec![o, o, o, o, o, -i, o, i, o],
                vec![s, o, o, o, s, o, o, o, -2.0 * s],
            ]
        }
        _ => return Err(Error::Unsupported(n)),
    };
    let matrices = hermitian.into_iter().map(|h| CMatrix::from_row_slice(n, n, &h) * i).collect();
    Ok(LieBasis { n, matrices })
}

/// `<A, B> = tr(A^dagger B) / 2`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    (a.adjoint() * b).trace() * 0.5
}

impl LieBasis {
    pub fn dim(&self) -> usize {
        self.matrices.len()
    }

    /// `-sum_a X^a X^a`.
    pub fn casimir(&self) -> CMatrix {
        -self.matrices.iter().fold(CMatrix::zeros(self.n, self.n), |acc, x| acc + x * x)
    }

    /// `2 (n^2 - 1) / n`.
    pub fn casimir_value(&self) -> f64 {
        let n = self.n as f64;
        2.0 * (n * n - 1.0) / n
    }

    /// `sum_a coeffs[a] X^a`.
    pub fn combine(&self, coeffs: &[Complex64]) -> CMatrix {
        self.matrices.iter().zip(coeffs).fold(CMatrix::zeros(self.n, self.n), |acc, (x, k)| acc + x * *k)
    }

    /// Traceless Hermitian `sum_a c_a (i X^a)` with real Gaussian `c_a` of scale `sigma`.
    pub fn random_hermitian<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> CMatrix {
        let co: Vec<Complex64> = (0..self.dim()).map(|_| c(0.0, sigma * rng.sample::<f64, _>(StandardNormal))).collect();
        self.combine(&co)
    }

    pub fn random_unitary<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let co: Vec<Complex64> = (0..self.dim()).map(|_| c(2.0 * rng.sample::<f64, _>(StandardNormal), 0.0)).collect();
        self.combine(&co).exp()
    }
}

/// Element of SL(n, C).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub u: CMatrix,
}

impl GroupElement {
    pub fn new(u: CMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::InvalidParameter("group element must be square".into()));
        }
        let d = u.determinant();
        if (d - 1.0).norm() > DET_TOL {
            return Err(Error::Domain(format!("det U = {d}, expected 1")));
        }
        Ok(Self { u })
    }

    pub fn identity(n: usize) -> Self {
        Self { u: CMatrix::identity(n, n) }
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn is_unitary(&self) -> bool {
        let n = self.n();
        (self.u.adjoint() * &self.u - CMatrix::identity(n, n)).norm() < DET_TOL
    }
}

/// `U = V exp(Y)` with `V` unitary and `Y` Hermitian traceless.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanPair {
    pub v: CMatrix,
    pub y: CMatrix,
}

impl CartanPair {
    pub fn reconstruct(&self) -> CMatrix {
        &self.v * hermitian_function(&self.y, f64::exp)
    }
}

/// `f(H)` for Hermitian `H` through its eigendecomposition.
pub fn hermitian_function(h: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| c(f(l), 0.0)));
    q * d * q.adjoint()
}

/// Polar decomposition through `W = sqrt(U^dagger U)`, `Y = log W`, `V = U W^{-1}`.
pub fn polar_decompose(g: &GroupElement) -> Result<CartanPair> {
    let u = &g.u;
    let mut h = u.adjoint() * u;
    // Symmetrise so the eigen solver sees an exactly Hermitian input.
    h = (&h + h.adjoint()) * c(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::IllConditioned(hi / lo));
    }
    let q = &eig.eigenvectors;
    let diag = |f: &dyn Fn(f64) -> f64| CMatrix::from_diagonal(&eig.eigenvalues.map(|l| c(f(l), 0.0)));
    let y = q * diag(&|l| 0.5 * l.ln()) * q.adjoint();
    let w_inv = q * diag(&|l| 1.0 / l.sqrt()) * q.adjoint();
    let v = u * w_inv;
    debug_assert!(y.trace().norm() < 1e-8, "tr Y = {}", y.trace());
    Ok(CartanPair { v, y })
}

/// `sum [tr(U^dagger U) - n]`.
pub fn distance_trace(links: &[GroupElement]) -> f64 {
    links.iter().map(|g| (g.u.adjoint() * &g.u).trace().re - g.n() as f64).sum()
}

/// `(1/2) sum <Y, Y>` with `Y` from the polar decomposition.
pub fn distance_cartan(links: &[GroupElement]) -> Result<f64> {
    let mut f = 0.0;
    for g in links {
        let y = polar_decompose(g)?.y;
        f += 0.5 * inner(&y, &y).re;
    }
    Ok(f)
}

/// Random SL(n, C) element `V exp(Y)` with `|Y|_F = y_norm` in a random direction.
pub fn random_sl<R: Rng + ?Sized>(basis: &LieBasis, y_norm: f64, rng: &mut R) -> GroupElement {
    let v = basis.random_unitary(rng);
    let y = basis.random_hermitian(1.0, rng);
    let y = &y * c(y_norm / y.norm(), 0.0);
    GroupElement { u: v * hermitian_function(&y, f64::exp) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn id(n: usize) -> CMatrix {
        CMatrix::identity(n, n)
    }

    #[test]
    fn bases_are_orthonormal_and_skew_hermitian() {
        for n in [2, 3] {
            let b = su_basis(n).unwrap();
            assert_eq!(b.dim(), n * n - 1);
            for (i, x) in b.matrices.iter().enumerate() {
                assert!(x.trace().norm() < 1e-14);
                assert!((x.adjoint() + x).norm() < 1e-14);
                for (j, y) in b.matrices.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((inner(x, y) - e).norm() < 1e-13, "n={n} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn casimir_values() {
        let b2 = su_basis(2).unwrap();
        assert!((b2.casimir() - id(2) * c(3.0, 0.0)).norm() < 1e-13);
        let b3 = su_basis(3).unwrap();
        assert!((b3.casimir() - id(3) * c(16.0 / 3.0, 0.0)).norm() < 1e-13);
        assert_eq!(b3.casimir_value(), 16.0 / 3.0);
    }

    #[test]
    fn unsupported_rank() {
        assert!(matches!(su_basis(4), Err(Error::Unsupported(4))));
    }

    #[test]
    fn determinant_is_checked() {
        assert!(GroupElement::new(id(2) * c(2.0, 0.0)).is_err());
        assert!(GroupElement::new(id(3)).unwrap().is_unitary());
    }

    #[test]
    fn polar_of_unitary_is_trivial() {
        let b = su_basis(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = b.random_unitary(&mut rng);
        let p = polar_decompose(&GroupElement::new(u.clone()).unwrap()).unwrap();
        assert!(p.y.norm() < 1e-12);
        assert!((p.v - u).norm() < 1e-12);
    }

    #[test]
    fn polar_recovers_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2, 3] {
            let b = su_basis(n).unwrap();
            for _ in 0..20 {
                let y0 = b.random_hermitian(0.5, &mut rng);
                let g = GroupElement::new(y0.clone().exp()).unwrap();
                let p = polar_decompose(&g).unwrap();
                assert!((p.y - &y0).norm() < 1e-10);
                let d = distance_cartan(&[g]).unwrap();
                assert!((d - 0.5 * inner(&y0, &y0).re).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn polar_round_trip_on_random_sl() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3] {
            let b = su_basis(n).unwrap();
            for k in 0..1000 {
                let g = random_sl(&b, 2.0 * (k as f64 + 0.5) / 1000.0, &mut rng);
                let p = polar_decompose(&g).unwrap();
                assert!((p.v.adjoint() * &p.v - id(n)).norm() < 1e-10);
                assert!((p.reconstruct() - &g.u).norm() < 1e-10);
                assert!((p.y.adjoint() - &p.y).norm() < 1e-12);
                assert!(p.y.trace().norm() < 1e-10);
            }
        }
    }

    #[test]
    fn ill_conditioned_input() {
        let u = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1e7, 0.0), c(1e-7, 0.0)]));
        assert!(matches!(polar_decompose(&GroupElement { u }), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn trace_distance_of_diagonal_exponential() {
        let y: f64 = 0.5;
        let u = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(y.exp(), 0.0), c((-y).exp(), 0.0)]));
        let d = distance_trace(&[GroupElement::new(u).unwrap()]);
        assert!((d - (2.0 * (2.0 * y).cosh() - 2.0)).abs() < 1e-14);
        assert!((d - 1.0862).abs() < 1e-4);
    }

    #[test]
    fn distances_agree_at_leading_order() {
        // tr(exp 2Y) - n = 2 tr Y^2 + O(Y^4) while (1/2)<Y, Y> = tr Y^2 / 4, so the
        // ratio under the half-trace metric tends to 1/8. The cubic term tr Y^3
        // vanishes on su(2) only.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [2, 3] {
            let b = su_basis(n).unwrap();
            for _ in 0..50 {
                let y = 0.01 * rng.random::<f64>() + 1e-4;
                let g = random_sl(&b, y, &mut rng);
                let ratio = distance_cartan(&[g.clone()]).unwrap() / distance_trace(&[g]);
                let bound = if n == 2 { y * y } else { y };
                assert!((ratio - 0.125).abs() < 0.125 * bound, "{ratio}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn distances_nonnegative_and_unitarily_invariant(seed in 0u64..1_000_000, n in 2usize..4, y in 0.0f64..2.0) {
            let b = su_basis(n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let links: Vec<GroupElement> = (0..4).map(|_| random_sl(&b, y, &mut rng)).collect();
            let ft = distance_trace(&links);
            let fc = distance_cartan(&links).unwrap();
            prop_assert!(ft >= -1e-12 && fc >= -1e-12);
            let moved: Vec<GroupElement> = links
                .iter()
                .map(|l| GroupElement { u: b.random_unitary(&mut rng) * &l.u * b.random_unitary(&mut rng) })
                .collect();
            prop_assert!((distance_trace(&moved) - ft).abs() < 1e-9 * (1.0 + ft));
            prop_assert!((distance_cartan(&moved).unwrap() - fc).abs() < 1e-9 * (1.0 + fc));
        }

        #[test]
        fn unitary_fields_have_zero_distance(seed in 0u64..1_000_000, n in 2usize..4) {
            let b = su_basis(n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let links: Vec<GroupElement> = (0..3).map(|_| GroupElement { u: b.random_unitary(&mut rng) }).collect();
            prop_assert!(distance_trace(&links).abs() < 1e-12);
            prop_assert!(distance_cartan(&links).unwrap().abs() < 1e-12);
        }
    }
}
