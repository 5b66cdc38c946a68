//! Thomas algorithm for tridiagonal systems, plain and cyclic.

use std::ops::{Add, Div, Mul, Sub};

pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Send + Sync {
    fn zero() -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Scalar for num_complex::Complex64 {
    fn zero() -> Self {
        num_complex::Complex64::new(0.0, 0.0)
    }
}

/// Solves `a_i u_{i-1} + b_i u_i + c_i u_{i+1} = d_i` in place of `d`.
/// `a[0]` and `c[n-1]` are ignored.
pub fn thomas<T: Scalar>(a: &[T], b: &[T], c: &[T], d: &mut [T]) {
    let n = d.len();
    let mut cp = vec![T::zero(); n];
    let mut beta = b[0];
    cp[0] = c[0] / beta;
    d[0] = d[0] / beta;
    for i in 1..n {
        beta = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / beta;
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - cp[i] * d[i + 1];
    }
}

/// Pre-factored constant-coefficient system `(I - r D2) u = d` on `n` nodes,
/// with `D2` the three-point second difference and either zero ghost values
/// or periodic wrap-around.
#[derive(Debug, Clone)]
pub struct ImplicitDiffusion {
    n: usize,
    r: f64,
    cp: Vec<f64>,
    inv_beta: Vec<f64>,
    /// Sherman-Morrison correction vector for the cyclic case.
    cyclic: Option<(Vec<f64>, f64)>,
}

impl ImplicitDiffusion {
    pub fn new(n: usize, r: f64, periodic: bool) -> Self {
        let off = -r;
        let diag = 1.0 + 2.0 * r;
        if !periodic {
            let (cp, inv_beta) = Self::factor(n, diag, diag, off);
            return Self { n, r, cp, inv_beta, cyclic: None };
        }
        // Cyclic system A = T + u v^T with u = (gamma, 0.., off), v = (1, 0.., off/gamma).
        let gamma = -diag;
        let first = diag - gamma;
        let last = diag - off * off / gamma;
        let (cp, inv_beta) = Self::factor_ends(n, first, diag, last, off);
        let mut s = Self { n, r, cp, inv_beta, cyclic: None };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = off;
        s.solve_plain(&mut u);
        let vz = u[0] + off / gamma * u[n - 1];
        s.cyclic = Some((u, vz));
        s
    }

    fn factor(n: usize, first: f64, diag: f64, off: f64) -> (Vec<f64>, Vec<f64>) {
        Self::factor_ends(n, first, diag, diag, off)
    }

    fn factor_ends(n: usize, first: f64, diag: f64, last: f64, off: f64) -> (Vec<f64>, Vec<f64>) {
        let mut cp = vec![0.0; n];
        let mut inv_beta = vec![0.0; n];
        let mut beta = first;
        inv_beta[0] = 1.0 / beta;
        cp[0] = off / beta;
        for i in 1..n {
            let bi = if i == n - 1 { last } else { diag };
            beta = bi - off * cp[i - 1];
            inv_beta[i] = 1.0 / beta;
            cp[i] = off / beta;
        }
        (cp, inv_beta)
    }

    fn solve_plain(&self, d: &mut [f64]) {
        let off = -self.r;
        d[0] *= self.inv_beta[0];
        for i in 1..self.n {
            d[i] = (d[i] - off * d[i - 1]) * self.inv_beta[i];
        }
        for i in (0..self.n - 1).rev() {
            d[i] -= self.cp[i] * d[i + 1];
        }
    }

    /// Overwrites `d` with the solution.
    pub fn solve(&self, d: &mut [f64]) {
        debug_assert_eq!(d.len(), self.n);
        self.solve_plain(d);
        if let Some((z, vz)) = &self.cyclic {
            let off = -self.r;
            let gamma = -(1.0 + 2.0 * self.r);
            let vy = d[0] + off / gamma * d[self.n - 1];
            let f = vy / (1.0 + vz);
            for (di, zi) in d.iter_mut().zip(z) {
                *di -= f * zi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn apply(n: usize, r: f64, periodic: bool, u: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let left = if i > 0 {
                    u[i - 1]
                } else if periodic {
                    u[n - 1]
                } else {
                    0.0
                };
                let right = if i + 1 < n {
                    u[i + 1]
                } else if periodic {
                    u[0]
                } else {
                    0.0
                };
                (1.0 + 2.0 * r) * u[i] - r * (left + right)
            })
            .collect()
    }

    #[test]
    fn complex_thomas_solves_system() {
        let n = 6;
        let a: Vec<Complex64> = (0..n).map(|i| Complex64::new(-1.0, 0.1 * i as f64)).collect();
        let b: Vec<Complex64> = (0..n).map(|_| Complex64::new(4.0, 1.0)).collect();
        let c: Vec<Complex64> = (0..n).map(|i| Complex64::new(-0.5, -0.2 * i as f64)).collect();
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut d: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut v = b[i] * x[i];
                if i > 0 {
                    v += a[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += c[i] * x[i + 1];
                }
                v
            })
            .collect();
        thomas(&a, &b, &c, &mut d);
        for i in 0..n {
            assert!((d[i] - x[i]).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn implicit_diffusion_inverts(r in 0.01f64..50.0, periodic: bool,
                                      u in proptest::collection::vec(-1.0f64..1.0, 12)) {
            let s = ImplicitDiffusion::new(12, r, periodic);
            let mut d = apply(12, r, periodic, &u);
            s.solve(&mut d);
            for (x, y) in d.iter().zip(&u) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
