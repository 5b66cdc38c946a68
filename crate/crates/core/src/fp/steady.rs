//! Steady states of the Fokker-Planck step.
//!
//! Plain relaxation repeats the time step until the L1 change rate drops
//! below tolerance. The Krylov path reaches the same fixed point by solving
//! the stationarity condition of the very same step with GMRES, which costs
//! a few hundred steps instead of tens of thousands.

use serde::{Deserialize, Serialize};

use super::characteristics::CharacteristicTable;
use super::fd::FdStepper;
use super::fourier::{FourierEval, FourierStepper};
use super::grid::{Grid2D, GridFunction2D};
use super::krylov::gmres;
use super::{Backend, LinearStepper};
use crate::error::Error;
use crate::model::DriftField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    pub dt: f64,
    /// Target for `|P(t + dt) - P(t)|_1 / dt`.
    pub tol: f64,
    /// Budget in simulated time; every operator application counts as one step.
    pub max_t: f64,
    /// Relaxation time before switching to Krylov corrections.
    pub warmup_t: f64,
    pub krylov: bool,
    pub restart: usize,
    pub eval: FourierEval,
    /// Order of the exponential mode filter of the Fourier backend; 0 disables it.
    pub filter_order: u32,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { dt: 1e-3, tol: 1e-8, max_t: 200.0, warmup_t: 1.0, krylov: true, restart: 60, eval: FourierEval::Nufft, filter_order: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub p: GridFunction2D,
    pub backend: Backend,
    pub dt: f64,
    /// Final `|P(t + dt) - P(t)|_1 / dt`.
    pub residual: f64,
    /// `(simulated time, residual)` samples.
    pub history: Vec<(f64, f64)>,
    /// Mass multiplier of one unnormalised step at the steady state.
    pub step_multiplier: f64,
    /// Largest negative mass clipped in one step.
    pub max_clipped_mass: f64,
    /// Nodes whose characteristics met a pole.
    pub flagged_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SteadyError {
    NotConverged { max_t: f64, residual: f64, last: Box<GridFunction2D> },
    Failed(Error),
}

impl From<SteadyError> for Error {
    fn from(e: SteadyError) -> Self {
        match e {
            SteadyError::NotConverged { max_t, residual, .. } => Error::NotConverged { max_t, residual },
            SteadyError::Failed(e) => e,
        }
    }
}

impl std::fmt::Display for SteadyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        Error::from(self.clone()).fmt(f)
    }
}

impl std::error::Error for SteadyError {}

/// Default initial condition: product Gaussian with `sigma_x = 0.5`, `sigma_y = 2 dy`,
/// centred at the middle of the x range and at `y = 0`.
pub fn initial_condition(grid: Grid2D) -> GridFunction2D {
    let xc = if grid.x_min < 0.0 && grid.x_max > 0.0 { 0.0 } else { 0.5 * (grid.x_min + grid.x_max) };
    GridFunction2D::gaussian(grid, xc, 0.0, 0.5, 2.0 * grid.dy())
}

fn boxed_stepper(field: &dyn DriftField, grid: Grid2D, backend: Backend, opts: &SteadyOptions) -> (Box<dyn LinearStepper>, usize) {
    let table = CharacteristicTable::build(field, grid, opts.dt);
    let flagged = table.flagged;
    let st: Box<dyn LinearStepper> = match backend {
        Backend::FiniteDifference => Box::new(FdStepper::new(table)),
        Backend::Fourier => {
            let st = FourierStepper::new(table, opts.eval);
            Box::new(if opts.filter_order > 0 { st.with_filter(opts.filter_order) } else { st })
        }
    };
    (st, flagged)
}

/// Relaxes `field`'s density to steady state from the default initial condition.
pub fn solve_steady(field: &dyn DriftField, grid: Grid2D, backend: Backend, opts: &SteadyOptions) -> Result<SteadyState, SteadyError> {
    if !(opts.dt > 0.0 && opts.tol > 0.0 && opts.max_t > 0.0) {
        return Err(SteadyError::Failed(Error::InvalidParameter("dt, tol and max_t must be positive".into())));
    }
    let (stepper, flagged) = boxed_stepper(field, grid, backend, opts);
    let mut st = solve_steady_with(stepper.as_ref(), initial_condition(grid), backend == Backend::FiniteDifference, opts)?;
    st.backend = backend;
    st.flagged_nodes = flagged;
    Ok(st)
}

struct Density<'a> {
    stepper: &'a dyn LinearStepper,
    clip: bool,
    max_clipped: f64,
}

impl Density<'_> {
    /// One normalised step; returns the new values and the unnormalised mass.
    fn step(&mut self, p: &[f64]) -> (Vec<f64>, f64) {
        let g = *self.stepper.grid();
        let mut v = self.stepper.advance(p, None);
        if self.clip {
            let mut c = 0.0;
            for x in v.iter_mut() {
                if *x < 0.0 {
                    c -= *x;
                    *x = 0.0;
                }
            }
            self.max_clipped = self.max_clipped.max(c * g.cell_area());
        }
        let mass = g.integrate(&v);
        v.iter_mut().for_each(|x| *x /= mass);
        (v, mass)
    }
}

/// Steady state of an arbitrary stepper from a given start.
pub fn solve_steady_with(
    stepper: &dyn LinearStepper,
    start: GridFunction2D,
    clip: bool,
    opts: &SteadyOptions,
) -> Result<SteadyState, SteadyError> {
    let g = *stepper.grid();
    let dt = stepper.dt();
    let mut dens = Density { stepper, clip, max_clipped: 0.0 };
    let mut p = start.values;
    let mut t = 0.0;
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut mu = 1.0;
    let relax_until = if opts.krylov { opts.warmup_t.min(opts.max_t) } else { opts.max_t };
    let mut k = 0usize;
    while t < relax_until {
        let (next, m) = dens.step(&p);
        residual = g.l1_distance(&next, &p) / dt;
        mu = m;
        p = next;
        t += dt;
        k += 1;
        if k % 100 == 0 {
            history.push((t, residual));
        }
        if residual < opts.tol {
            break;
        }
    }
    if opts.krylov && residual >= opts.tol {
        for _outer in 0..50 {
            let ap = stepper.advance(&p, None);
            t += dt;
            mu = g.integrate(&ap);
            let r: Vec<f64> = ap.iter().zip(&p).map(|(a, b)| a / mu - b).collect();
            residual = g.l1(&r) / dt;
            history.push((t, residual));
            if residual < opts.tol || t >= opts.max_t {
                break;
            }
            let psum: f64 = p.iter().sum();
            let pref = p.clone();
            let op = |v: &[f64]| -> Vec<f64> {
                let av = stepper.advance(v, None);
                let s: f64 = av.iter().sum::<f64>() / psum;
                v.iter().zip(av.iter().zip(&pref)).map(|(vi, (ai, pi))| vi - (ai - s * pi) / mu).collect()
            };
            let budget = ((opts.max_t - t) / dt).max(1.0) as usize;
            let mut delta = vec![0.0; g.len()];
            let rep = gmres(op, &r, &mut delta, opts.restart, 1e-4, budget.min(3000));
            t += rep.iterations as f64 * dt;
            p.iter_mut().zip(&delta).for_each(|(a, d)| *a += d);
            if clip {
                p.iter_mut().for_each(|a| *a = a.max(0.0));
            }
            let mass = g.integrate(&p);
            p.iter_mut().for_each(|a| *a /= mass);
        }
    }
    // Report the residual of a genuine step from the returned state.
    let (next, m) = dens.step(&p);
    mu = if opts.krylov { m } else { mu };
    residual = g.l1_distance(&next, &p) / dt;
    history.push((t + dt, residual));
    let state = GridFunction2D { grid: g, values: next, time: t + dt };
    if residual >= opts.tol {
        return Err(SteadyError::NotConverged { max_t: opts.max_t, residual, last: Box::new(state) });
    }
    Ok(SteadyState {
        p: state,
        backend: Backend::FiniteDifference,
        dt,
        residual,
        history,
        step_multiplier: mu,
        max_clipped_mass: dens.max_clipped,
        flagged_nodes: 0,
    })
}

/// Zero-mass steady state `x` of the affine step `x -> Pi(A x / mu + b)`, where
/// `b` is one step of the source from a zero state and `Pi` removes the
/// component along `anchor` (a unit-mass steady density with multiplier `mu`).
///
/// Returns `x` and the final `|x(t + dt) - x(t)|_1 / dt`.
pub fn solve_source_steady(
    stepper: &dyn LinearStepper,
    anchor: &[f64],
    mu: f64,
    source: &[f64],
    opts: &SteadyOptions,
) -> Result<(Vec<f64>, f64), SteadyError> {
    let g = *stepper.grid();
    let dt = stepper.dt();
    let asum: f64 = anchor.iter().sum();
    let project = |mut v: Vec<f64>| -> Vec<f64> {
        let s: f64 = v.iter().sum::<f64>() / asum;
        v.iter_mut().zip(anchor).for_each(|(a, p)| *a -= s * p);
        v
    };
    let zero = vec![0.0; g.len()];
    let b = project(stepper.advance(&zero, Some(source)));
    let apply = |x: &[f64]| -> Vec<f64> {
        let ax = stepper.advance(x, None);
        project(ax.iter().zip(&b).map(|(a, bi)| a / mu + bi).collect())
    };
    let mut x = vec![0.0; g.len()];
    let mut t = 0.0;
    let mut residual;
    if opts.krylov {
        loop {
            let nx = apply(&x);
            t += dt;
            let r: Vec<f64> = nx.iter().zip(&x).map(|(a, c)| a - c).collect();
            residual = g.l1(&r) / dt;
            if residual < opts.tol || t >= opts.max_t {
                break;
            }
            let op = |v: &[f64]| -> Vec<f64> {
                let av = project(stepper.advance(v, None).iter().map(|a| a / mu).collect());
                v.iter().zip(&av).map(|(a, c)| a - c).collect()
            };
            let budget = ((opts.max_t - t) / dt).max(1.0) as usize;
            let mut delta = vec![0.0; g.len()];
            let rep = gmres(op, &r, &mut delta, opts.restart, 1e-6, budget.min(4000));
            t += rep.iterations as f64 * dt;
            x.iter_mut().zip(&delta).for_each(|(a, d)| *a += d);
        }
    } else {
        loop {
            let nx = apply(&x);
            t += dt;
            residual = g.l1_distance(&nx, &x) / dt;
            x = nx;
            if residual < opts.tol || t >= opts.max_t {
                break;
            }
        }
    }
    if residual >= opts.tol {
        let last = GridFunction2D { grid: g, values: x, time: t };
        return Err(SteadyError::NotConverged { max_t: opts.max_t, residual, last: Box::new(last) });
    }
    Ok((x, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ComplexPoint, FnField};

    /// Ornstein-Uhlenbeck in x with a linear contraction toward y = 0.25 x:
    /// the x-marginal of the steady state is exp(-x^2/2).
    fn ou() -> impl DriftField {
        FnField::new(|p: ComplexPoint| (-p.x, 0.0))
    }

    #[test]
    fn relaxation_and_krylov_agree() {
        let g = Grid2D::new(-6.0, 6.0, -1.0, 1.0, 96, 16).unwrap();
        let f = ou();
        let mut o = SteadyOptions { dt: 1e-2, tol: 1e-8, max_t: 100.0, krylov: false, ..Default::default() };
        let a = solve_steady(&f, g, Backend::FiniteDifference, &o).unwrap();
        o.krylov = true;
        let b = solve_steady(&f, g, Backend::FiniteDifference, &o).unwrap();
        assert!(b.history.last().unwrap().0 < a.history.last().unwrap().0);
        assert!(g.l1_distance(&a.p.values, &b.p.values) < 1e-5);
        assert!((b.p.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ou_steady_state_marginal_is_gaussian() {
        let g = Grid2D::new(-6.0, 6.0, -1.0, 1.0, 192, 16).unwrap();
        // The NUFFT error floor over dt = 1e-2 sits near 1e-8.
        let o = SteadyOptions { dt: 1e-2, tol: 1e-7, filter_order: 0, ..Default::default() };
        let s = solve_steady(&ou(), g, Backend::Fourier, &o).unwrap();
        let x2 = s.p.expectation(|z| z * z);
        // y-profile is frozen (J = 0), so <x^2> must approach 1.
        let y2 = s.p.expectation(|z| num_complex::Complex64::new(z.im * z.im, 0.0)).re;
        assert!((x2.re + y2 - 1.0).abs() < 2e-2, "{}", x2.re + y2);
    }

    #[test]
    fn not_converged_carries_last_iterate() {
        let g = Grid2D::new(-6.0, 6.0, -1.0, 1.0, 48, 16).unwrap();
        let o = SteadyOptions { dt: 1e-2, max_t: 0.05, krylov: false, ..Default::default() };
        match solve_steady(&ou(), g, Backend::FiniteDifference, &o) {
            Err(SteadyError::NotConverged { last, .. }) => assert!((last.integral() - 1.0).abs() < 1e-12),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
