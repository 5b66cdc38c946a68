//! The complex density `rho(x, t)` on the real axis,
//! `d_t rho = d_x (S' rho) + d_xx rho`, for the quartic action.
//!
//! Fluxes use the exponentially fitted (Bernoulli function) two-point
//! discretisation, whose discrete steady state is exactly proportional to
//! `exp(-S(x_i))`; time stepping is implicit Euler.

use num_complex::Complex64;

use super::tridiag::thomas;
use crate::error::{Error, Result};
use crate::model::QuarticModel;

/// `z / (e^z - 1)`, continuous at `z = 0`.
fn bernoulli(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        1.0 - z / 2.0 + z * z / 12.0
    } else {
        z / (z.exp() - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexDensity1D {
    pub x: Vec<f64>,
    pub rho: Vec<Complex64>,
    pub h: f64,
    pub time: f64,
}

impl ComplexDensity1D {
    pub fn integral(&self) -> Complex64 {
        self.rho.iter().sum::<Complex64>() * self.h
    }

    /// `\int rho(x) O(x) dx`.
    pub fn expectation(&self, obs: impl Fn(Complex64) -> Complex64) -> Complex64 {
        self.x.iter().zip(&self.rho).map(|(&x, r)| obs(Complex64::new(x, 0.0)) * r).sum::<Complex64>() * self.h
    }
}

/// Implicit-Euler propagator for the complex density on `[x_min, x_max]` with
/// zero-flux ends.
pub struct ComplexDensitySolver {
    x: Vec<f64>,
    h: f64,
    dt: f64,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
}

impl ComplexDensitySolver {
    pub fn new(model: QuarticModel, x_min: f64, x_max: f64, nodes: usize, dt: f64) -> Result<Self> {
        if nodes < 8 || !(x_max > x_min) || !(dt > 0.0) {
            return Err(Error::InvalidParameter("need >= 8 nodes, ordered bounds and dt > 0".into()));
        }
        let h = (x_max - x_min) / (nodes - 1) as f64;
        let x: Vec<f64> = (0..nodes).map(|i| x_min + i as f64 * h).collect();
        let s: Vec<Complex64> = x.iter().map(|&v| model.action(Complex64::new(v, 0.0))).collect();
        let r = dt / (h * h);
        let zero = Complex64::new(0.0, 0.0);
        let mut a = vec![zero; nodes];
        let mut b = vec![Complex64::new(1.0, 0.0); nodes];
        let mut c = vec![zero; nodes];
        for i in 0..nodes - 1 {
            let ds = s[i + 1] - s[i];
            // Flux between i and i+1 couples rho_{i+1} with B(-dS) and rho_i with B(dS).
            let (bp, bm) = (bernoulli(ds), bernoulli(-ds));
            b[i] += r * bp;
            c[i] -= r * bm;
            b[i + 1] += r * bm;
            a[i + 1] -= r * bp;
        }
        Ok(Self { x, h, dt, a, b, c })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Real Gaussian start `N(0, sigma^2)` normalised on the grid.
    pub fn gaussian(&self, sigma: f64) -> ComplexDensity1D {
        let mut rho: Vec<Complex64> = self.x.iter().map(|&x| Complex64::new((-0.5 * (x / sigma).powi(2)).exp(), 0.0)).collect();
        let m: Complex64 = rho.iter().sum::<Complex64>() * self.h;
        rho.iter_mut().for_each(|r| *r /= m);
        ComplexDensity1D { x: self.x.clone(), rho, h: self.h, time: 0.0 }
    }

    pub fn step(&self, d: &mut ComplexDensity1D) {
        thomas(&self.a, &self.b, &self.c, &mut d.rho);
        d.time += self.dt;
    }

    pub fn evolve(&self, d: &mut ComplexDensity1D, t_end: f64) {
        let steps = ((t_end - d.time) / self.dt).round().max(0.0) as usize;
        for _ in 0..steps {
            self.step(d);
        }
    }
}

/// Steady state of the complex density for the quartic model.
pub fn solve_complex_density(b: f64, x_min: f64, x_max: f64, nodes: usize, dt: f64, tol: f64, max_t: f64) -> Result<ComplexDensity1D> {
    let solver = ComplexDensitySolver::new(QuarticModel::new(b)?, x_min, x_max, nodes, dt)?;
    let mut d = solver.gaussian(0.5);
    let mut residual = f64::INFINITY;
    while d.time < max_t {
        let prev = d.rho.clone();
        solver.step(&mut d);
        residual = prev.iter().zip(&d.rho).map(|(p, q)| (p - q).norm()).sum::<f64>() * d.h / dt;
        if residual < tol {
            return Ok(d);
        }
    }
    Err(Error::NotConverged { max_t, residual })
}
