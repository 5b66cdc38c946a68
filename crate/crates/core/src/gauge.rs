//! Gauge transformations and cooling on periodic 1-D link chains, the
//! cooled SU(n) eigenvalue dynamics and the one-link SU(2) runs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::lie::{distance_trace, hermitian_function, CMatrix, GroupElement, LieBasis};
use crate::model::{exact_expectation_su2, wrap_periodic, ComplexPoint, Su2OneLinkModel};
use crate::sampler::{estimate_many, run_chains, ObservableEstimate, SamplerConfig, Trajectory};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Periodic chain of links `U_0 .. U_{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkChain {
    /// `U_x = exp(i theta_x)` with complex angles.
    U1 {
        theta: Vec<Complex64>,
    },
    SUn {
        links: Vec<GroupElement>,
    },
}

/// Per-site elements `g_x` of the complexified group.
#[derive(Debug, Clone, PartialEq)]
pub enum GaugeChoice {
    /// `g_x = exp(i phi_x)`; `phi_x = -i h_x` with real `h_x` is a pure `i g` gauge.
    U1 {
        phi: Vec<Complex64>,
    },
    SUn {
        g: Vec<CMatrix>,
    },
}

impl LinkChain {
    pub fn len(&self) -> usize {
        match self {
            LinkChain::U1 { theta } => theta.len(),
            LinkChain::SUn { links } => links.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `tr(U_0 U_1 ... U_{N-1})`; for U(1) this is `exp(i sum theta)`.
    pub fn loop_trace(&self) -> Complex64 {
        match self {
            LinkChain::U1 { theta } => (c(0.0, 1.0) * theta.iter().sum::<Complex64>()).exp(),
            LinkChain::SUn { links } => {
                let n = links[0].n();
                links.iter().fold(CMatrix::identity(n, n), |acc, l| acc * &l.u).trace()
            }
        }
    }

    /// `F`: `(1/2) sum Y_x^2` for U(1), `sum [tr(U^dagger U) - n]` for SU(n).
    pub fn distance(&self) -> f64 {
        match self {
            LinkChain::U1 { theta } => theta.iter().map(|t| 0.5 * t.im * t.im).sum(),
            LinkChain::SUn { links } => distance_trace(links),
        }
    }
}

/// `U_x -> g_x^{-1} U_x g_{x+1}`.
pub fn gauge_transform(chain: &LinkChain, g: &GaugeChoice) -> Result<LinkChain> {
    let n = chain.len();
    match (chain, g) {
        (LinkChain::U1 { theta }, GaugeChoice::U1 { phi }) if phi.len() == n => {
            Ok(LinkChain::U1 { theta: (0..n).map(|x| theta[x] - phi[x] + phi[(x + 1) % n]).collect() })
        }
        (LinkChain::SUn { links }, GaugeChoice::SUn { g }) if g.len() == n => {
            let mut out = Vec::with_capacity(n);
            for x in 0..n {
                let inv = g[x].clone().try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?;
                out.push(GroupElement { u: inv * &links[x].u * &g[(x + 1) % n] });
            }
            Ok(LinkChain::SUn { links: out })
        }
        _ => Err(Error::InvalidParameter("gauge choice does not match the chain".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolReport {
    #[serde(rename = "F_before")]
    pub f_before: f64,
    #[serde(rename = "F_after")]
    pub f_after: f64,
    pub iterations: usize,
    /// Stopped early because the relative decrease fell below 1e-12.
    pub stalled: bool,
}

pub const COOL_STEPS: usize = 50;
pub const COOL_RATE: f64 = 0.1;
const STALL_RTOL: f64 = 1e-12;

/// `M_x = U_{x-1}^dagger U_{x-1} - U_x U_x^dagger`; `dF = 2 tr(H M_x)` for `g_x = exp(H)`.
fn cooling_gradient(links: &[GroupElement]) -> Vec<CMatrix> {
    let n = links.len();
    let dim = links[0].n();
    (0..n)
        .map(|x| {
            let prev = &links[(x + n - 1) % n].u;
            let cur = &links[x].u;
            let m = prev.adjoint() * prev - cur * cur.adjoint();
            let tr = m.trace() / dim as f64;
            (m - CMatrix::identity(dim, dim) * tr) * c(2.0, 0.0)
        })
        .collect()
}

/// Gradient descent on `F = distance_trace` over Hermitian gauge exponents,
/// halving the step until `F` decreases.
pub fn cool_gradient(chain: &LinkChain, steps: usize, rate: f64) -> Result<(LinkChain, CoolReport)> {
    let LinkChain::SUn { links } = chain else {
        return Err(Error::InvalidParameter("gradient cooling needs an SU(n) chain".into()));
    };
    let f_before = distance_trace(links);
    let mut cur = links.clone();
    let mut f = f_before;
    let mut stalled = false;
    let mut it = 0;
    while it < steps {
        it += 1;
        let grad = cooling_gradient(&cur);
        let mut eta = rate;
        let mut accepted = None;
        for _ in 0..40 {
            let g: Vec<CMatrix> = grad.iter().map(|m| hermitian_function(&(m * c(-eta, 0.0)), f64::exp)).collect();
            let LinkChain::SUn { links: trial } = gauge_transform(&LinkChain::SUn { links: cur.clone() }, &GaugeChoice::SUn { g })? else {
                unreachable!()
            };
            let ft = distance_trace(&trial);
            if ft <= f {
                accepted = Some((trial, ft));
                break;
            }
            eta *= 0.5;
        }
        match accepted {
            Some((trial, ft)) => {
                let rel = (f - ft) / f.abs().max(f64::MIN_POSITIVE);
                cur = trial;
                f = ft;
                if rel < STALL_RTOL {
                    stalled = true;
                    break;
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    Ok((LinkChain::SUn { links: cur }, CoolReport { f_before, f_after: f, iterations: it, stalled }))
}

/// `Y_x = -Im theta_x`, the non-compact part of `exp(i theta_x)`.
fn u1_y(theta: &[Complex64]) -> Vec<f64> {
    theta.iter().map(|t| -t.im).collect()
}

/// Right-hand side `Y_x - Y_{x-1}` of the cooling Poisson equation on a 1-D chain.
pub fn u1_poisson_rhs(theta: &[Complex64]) -> Vec<f64> {
    let y = u1_y(theta);
    let n = y.len();
    (0..n).map(|x| y[x] - y[(x + n - 1) % n]).collect()
}

/// Exact cooling of a U(1) chain: solves `2h_x - h_{x-1} - h_{x+1} = Y_x - Y_{x-1}`
/// (zero mean) and applies `Y_x -> Y_x - h_x + h_{x+1}`.
pub fn cool_u1_poisson(chain: &LinkChain) -> Result<(LinkChain, GaugeChoice)> {
    let LinkChain::U1 { theta } = chain else {
        return Err(Error::InvalidParameter("Poisson cooling needs a U(1) chain".into()));
    };
    let y = u1_y(theta);
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    // On a ring the optimum has every cooled Y equal to the mean, so
    // h_{x+1} - h_x = mean - Y_x.
    let mut h = vec![0.0; n];
    for x in 0..n - 1 {
        h[x + 1] = h[x] + mean - y[x];
    }
    let hm = h.iter().sum::<f64>() / n as f64;
    h.iter_mut().for_each(|v| *v -= hm);
    let g = GaugeChoice::U1 { phi: h.iter().map(|v| c(0.0, -v)).collect() };
    Ok((gauge_transform(chain, &g)?, g))
}

/// Holomorphic action of the U(1) link angles.
pub trait U1Action: Send + Sync {
    fn value(&self, theta: &[Complex64]) -> Complex64;
    /// `dS / d theta_k`.
    fn gradient(&self, theta: &[Complex64]) -> Vec<Complex64>;
}

/// `S = -(A + iB) cos(theta_0 + ... + theta_{N-1})`, gauge invariant on the ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolonomyCosine {
    pub a: f64,
    pub b: f64,
}

impl U1Action for HolonomyCosine {
    fn value(&self, theta: &[Complex64]) -> Complex64 {
        -c(self.a, self.b) * theta.iter().sum::<Complex64>().cos()
    }

    fn gradient(&self, theta: &[Complex64]) -> Vec<Complex64> {
        let d = c(self.a, self.b) * theta.iter().sum::<Complex64>().sin();
        vec![d; theta.len()]
    }
}

/// Euler-Maruyama step of the U(1) chain: `dx = K dt + dw`, `dy = J dt` with
/// `K + iJ = -dS/d theta` and `<dw^2> = 2 dt`; then optional Poisson cooling.
pub fn u1_chain_cl_step<R: Rng + ?Sized>(
    chain: &LinkChain,
    action: &dyn U1Action,
    dt: f64,
    cool: bool,
    overflow_threshold: f64,
    rng: &mut R,
) -> Result<LinkChain> {
    let LinkChain::U1 { theta } = chain else {
        return Err(Error::InvalidParameter("U(1) step needs a U(1) chain".into()));
    };
    let grad = action.gradient(theta);
    let sd = (2.0 * dt).sqrt();
    let mut out = Vec::with_capacity(theta.len());
    for (t, g) in theta.iter().zip(&grad) {
        let drift = -g;
        let x = t.re + drift.re * dt + sd * rng.sample::<f64, _>(StandardNormal);
        let y = t.im + drift.im * dt;
        if !(x.abs() <= overflow_threshold && y.abs() <= overflow_threshold) {
            return Err(Error::Overflow { threshold: overflow_threshold });
        }
        out.push(c(wrap_periodic(x, TAU), y));
    }
    let next = LinkChain::U1 { theta: out };
    if cool {
        Ok(cool_u1_poisson(&next)?.0)
    } else {
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct U1CoolCheck {
    pub n_links: usize,
    pub dt: f64,
    pub steps: usize,
    /// Largest `|Y_cooled - Y_uncooled|` over links and steps.
    pub max_step_drift: f64,
    /// Largest gauge exponent `|h|` the cooling produced.
    pub max_gauge: f64,
    /// Largest Poisson right-hand side before cooling.
    pub max_rhs: f64,
}

/// Runs the chain from a point on M, comparing each cooled step with the same
/// uncooled step.
pub fn u1_cool_check(n_links: usize, action: &dyn U1Action, dt: f64, steps: usize, seed: u64) -> Result<U1CoolCheck> {
    if n_links == 0 {
        return Err(Error::InvalidParameter("need at least one link".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta: Vec<Complex64> = (0..n_links).map(|_| c(rng.random::<f64>() * TAU, 0.1)).collect();
    let mut rep = U1CoolCheck { n_links, dt, steps, max_step_drift: 0.0, max_gauge: 0.0, max_rhs: 0.0 };
    for _ in 0..steps {
        let raw = u1_chain_cl_step(&LinkChain::U1 { theta }, action, dt, false, 1e8, &mut rng)?;
        let LinkChain::U1 { theta: raw_t } = &raw else { unreachable!() };
        rep.max_rhs = u1_poisson_rhs(raw_t).iter().fold(rep.max_rhs, |m, v| m.max(v.abs()));
        let (cooled, g) = cool_u1_poisson(&raw)?;
        let GaugeChoice::U1 { phi } = g else { unreachable!() };
        rep.max_gauge = phi.iter().fold(rep.max_gauge, |m, p| m.max(p.norm()));
        let LinkChain::U1 { theta: ct } = cooled else { unreachable!() };
        rep.max_step_drift = ct.iter().zip(raw_t).fold(rep.max_step_drift, |m, (a, b)| m.max((a.im - b.im).abs()));
        theta = ct;
    }
    Ok(rep)
}

/// Eigenvalues of the cooled SU(n) chain, `prod lambda = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenState {
    pub lambda: Vec<Complex64>,
    pub n_links: usize,
}

pub const COLLISION_EPS: f64 = 1e-8;
pub const RENORMALIZE_EVERY: usize = 1000;

impl EigenState {
    pub fn new(lambda: Vec<Complex64>, n_links: usize) -> Result<Self> {
        let s = Self { lambda, n_links };
        let p = s.product();
        if (p - 1.0).norm() > 1e-10 {
            return Err(Error::Domain(format!("eigenvalue product {p}, expected 1")));
        }
        Ok(s)
    }

    pub fn product(&self) -> Complex64 {
        self.lambda.iter().product()
    }

    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (j, a) in self.lambda.iter().enumerate() {
            for b in &self.lambda[j + 1..] {
                gap = gap.min((a - b).norm());
            }
        }
        gap
    }

    pub fn sq_norm(&self) -> f64 {
        self.lambda.iter().map(|l| l.norm_sqr()).sum()
    }

    pub fn trace(&self) -> Complex64 {
        self.lambda.iter().sum()
    }

    /// `lambda -> lambda / (prod lambda)^{1/n}`.
    pub fn renormalize(&mut self) {
        let r = self.product().powf(1.0 / self.lambda.len() as f64);
        self.lambda.iter_mut().for_each(|l| *l /= r);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDrift {
    pub drift: Vec<Complex64>,
    /// `noise[j][a]` multiplies `dw^a` with `<(dw^a)^2> = 2 dt`.
    pub noise: Vec<Vec<Complex64>>,
}

/// Ito drift and noise loadings of the cooled eigenvalue dynamics, multiplied
/// through by N. `K^a + i J^a` is the Lie derivative `D_a S` of the action.
pub fn eigen_drift(state: &EigenState, ka: &[f64], ja: &[f64], basis: &LieBasis) -> Result<EigenDrift> {
    let n = basis.n;
    let lam = &state.lambda;
    if lam.len() != n || ka.len() != basis.dim() || ja.len() != basis.dim() {
        return Err(Error::InvalidParameter("eigen drift dimensions do not match the basis".into()));
    }
    let gap = state.min_gap();
    if gap < COLLISION_EPS {
        return Err(Error::Collision(gap));
    }
    let big_n = state.n_links as f64;
    let cas = basis.casimir_value();
    let mut drift = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for j in 0..n {
        let mut s = c(cas, 0.0);
        for (a, x) in basis.matrices.iter().enumerate() {
            s += c(ka[a], ja[a]) * x[(j, j)];
            // 2 e_j^T X Omega_j X e_j
            let mut om = c(0.0, 0.0);
            for k in (0..n).filter(|&k| k != j) {
                om += x[(j, k)] * lam[k] / (lam[k] - lam[j]) * x[(k, j)];
            }
            s += 2.0 * om;
        }
        drift.push(-big_n * s * lam[j]);
        noise.push(basis.matrices.iter().map(|x| -big_n.sqrt() * lam[j] * x[(j, j)]).collect());
    }
    Ok(EigenDrift { drift, noise })
}

/// `D_a S` for `S(U) = -(A + iB) tr U` at `U = diag(lambda)`, by fourth-order
/// central differences along `exp(t X^a) U`.
pub fn trace_action_derivatives(lambda: &[Complex64], a: f64, b: f64, basis: &LieBasis) -> Vec<Complex64> {
    let u = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.to_vec()));
    let coupling = -c(a, b);
    let s = |m: &CMatrix| coupling * m.trace();
    let h = 1e-3;
    basis
        .matrices
        .iter()
        .map(|x| {
            let at = |t: f64| s(&((x * c(t, 0.0)).exp() * &u));
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
        })
        .collect()
}

/// The stencil of [`trace_action_derivatives`] reduced to per-eigenvalue weights:
/// at diagonal `U`, `tr(exp(t X) U) = sum_j exp(t X)_jj lambda_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStencil {
    weights: Vec<Vec<Complex64>>,
}

impl TraceStencil {
    pub fn new(basis: &LieBasis) -> Self {
        let h = 1e-3;
        let weights = basis
            .matrices
            .iter()
            .map(|x| {
                let d = |t: f64| (x * c(t, 0.0)).exp();
                let (p2, p1, m1, m2) = (d(2.0 * h), d(h), d(-h), d(-2.0 * h));
                (0..basis.n).map(|j| (-p2[(j, j)] + 8.0 * p1[(j, j)] - 8.0 * m1[(j, j)] + m2[(j, j)]) / (12.0 * h)).collect()
            })
            .collect();
        Self { weights }
    }

    pub fn derivatives(&self, lambda: &[Complex64], a: f64, b: f64) -> Vec<Complex64> {
        let coupling = -c(a, b);
        self.weights.iter().map(|w| coupling * w.iter().zip(lambda).map(|(w, l)| w * l).sum::<Complex64>()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub n: usize,
    pub n_links: usize,
    pub a: f64,
    pub b: f64,
    /// Drop the imaginary Lie-derivative components `J^a`.
    pub j_zero: bool,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub paths: usize,
    pub seed: u64,
    pub renormalize: bool,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            n: 2,
            n_links: 1,
            a: 1.0,
            b: 0.0,
            j_zero: false,
            dt: 1e-5,
            steps: 10_000,
            record_every: 100,
            paths: 1000,
            seed: 0,
            renormalize: true,
        }
    }
}

/// One Euler-Maruyama step on `ln lambda_j` with the Ito-corrected drift, which
/// keeps `prod lambda` fixed up to roundoff. Collisions halve the step (up to
/// 2^-20) and retry it as two substeps.
pub fn eigen_step<R: Rng + ?Sized>(
    state: &EigenState,
    cfg: &EigenConfig,
    basis: &LieBasis,
    stencil: &TraceStencil,
    dt: f64,
    rng: &mut R,
) -> Result<EigenState> {
    match eigen_step_once(state, cfg, basis, stencil, dt, rng) {
        Err(Error::Collision(_)) if dt > cfg.dt * 2f64.powi(-20) => {
            let half = eigen_step(state, cfg, basis, stencil, 0.5 * dt, rng)?;
            eigen_step(&half, cfg, basis, stencil, 0.5 * dt, rng)
        }
        r => r,
    }
}

fn eigen_step_once<R: Rng + ?Sized>(
    state: &EigenState,
    cfg: &EigenConfig,
    basis: &LieBasis,
    stencil: &TraceStencil,
    dt: f64,
    rng: &mut R,
) -> Result<EigenState> {
    let d = stencil.derivatives(&state.lambda, cfg.a, cfg.b);
    let ka: Vec<f64> = d.iter().map(|v| v.re).collect();
    let ja: Vec<f64> = d.iter().map(|v| if cfg.j_zero { 0.0 } else { v.im }).collect();
    let dr = eigen_drift(state, &ka, &ja, basis)?;
    let sd = (2.0 * dt).sqrt();
    let eta: Vec<f64> = (0..basis.dim()).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let lambda: Vec<Complex64> = (0..basis.n)
        .map(|j| {
            let l = state.lambda[j];
            // d ln l = dl / l - (dl / l)^2 / 2 with <dw^2> = 2 dt.
            let ito: Complex64 = dr.noise[j].iter().map(|q| (q / l).powi(2)).sum();
            let noise: Complex64 = dr.noise[j].iter().zip(&eta).map(|(q, e)| q / l * e).sum();
            l * ((dr.drift[j] / l - ito) * dt + noise).exp()
        })
        .collect();
    let next = EigenState { lambda, n_links: state.n_links };
    if next.min_gap() < COLLISION_EPS {
        return Err(Error::Collision(next.min_gap()));
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRun {
    pub times: Vec<f64>,
    /// Ensemble mean of `sum_j |lambda_j|^2` at each record time.
    pub mean_sq_norm: Vec<f64>,
    /// Ensemble mean of `tr U = sum lambda_j`.
    pub mean_trace: Vec<Complex64>,
    /// Largest `|prod lambda - 1|` seen before any renormalisation.
    pub max_product_defect: f64,
    /// Path 0, for CSV output.
    pub first_path: Vec<EigenState>,
}

/// `paths` independent trajectories from `init` with seeds `seed + k`.
pub fn run_eigen(init: &EigenState, cfg: &EigenConfig) -> Result<EigenRun> {
    let basis = crate::lie::su_basis(cfg.n)?;
    let stencil = TraceStencil::new(&basis);
    if init.lambda.len() != cfg.n {
        return Err(Error::InvalidParameter("initial state has the wrong rank".into()));
    }
    let rec = cfg.record_every.max(1);
    let n_rec = cfg.steps / rec + 1;
    let per_path: Vec<(Vec<EigenState>, f64)> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|k| -> Result<(Vec<EigenState>, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k));
            let mut s = EigenState { lambda: init.lambda.clone(), n_links: cfg.n_links };
            let mut out = Vec::with_capacity(n_rec);
            out.push(s.clone());
            let mut defect: f64 = 0.0;
            for step in 1..=cfg.steps {
                s = eigen_step(&s, cfg, &basis, &stencil, cfg.dt, &mut rng)?;
                defect = defect.max((s.product() - 1.0).norm());
                if cfg.renormalize && step % RENORMALIZE_EVERY == 0 {
                    s.renormalize();
                }
                if step % rec == 0 {
                    out.push(s.clone());
                }
            }
            Ok((out, defect))
        })
        .collect::<Result<_>>()?;
    let np = per_path.len().max(1) as f64;
    let times: Vec<f64> = (0..n_rec).map(|i| (i * rec) as f64 * cfg.dt).collect();
    let mean_sq_norm = (0..n_rec).map(|i| per_path.iter().map(|(p, _)| p[i].sq_norm()).sum::<f64>() / np).collect();
    let mean_trace = (0..n_rec).map(|i| per_path.iter().map(|(p, _)| p[i].trace()).sum::<Complex64>() / np).collect();
    let max_product_defect = per_path.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let first_path = per_path.into_iter().next().map(|(p, _)| p).unwrap_or_default();
    Ok(EigenRun { times, mean_sq_norm, mean_trace, max_product_defect, first_path })
}

/// `t,re_l1,im_l1,...` with 17 significant digits.
pub fn eigen_csv(times: &[f64], path: &[EigenState]) -> String {
    let n = path.first().map(|s| s.lambda.len()).unwrap_or(0);
    let mut s = String::from("t");
    for j in 1..=n {
        s.push_str(&format!(",re_l{j},im_l{j}"));
    }
    s.push('\n');
    for (t, st) in times.iter().zip(path) {
        s.push_str(&format!("{t:.16e}"));
        for l in &st.lambda {
            s.push_str(&format!(",{:.16e},{:.16e}", l.re, l.im));
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Su2Run {
    pub a: f64,
    pub b: f64,
    pub cooled: bool,
    pub estimate: ObservableEstimate,
    pub exact: Complex64,
    /// `|estimate - exact|` in combined standard errors.
    pub sigmas: f64,
    pub overflow_count: usize,
    pub pole_rejections: usize,
}

/// One-link SU(2) with `S = -(A + iB) tr U`, estimating `<tr U>`.
///
/// `cooled = true` runs the cooled dynamics in eigenvalue-angle coordinates;
/// `cooled = false` runs uncooled Langevin on SL(2, C) with the exponential
/// update `U -> exp(sum_a X^a (-D_a S dt + dw^a)) U`.
pub fn run_su2_onelink(a: f64, b: f64, cfg: &SamplerConfig, chains: usize, cooled: bool) -> Result<(Vec<Trajectory>, Su2Run)> {
    let model = Su2OneLinkModel::new(a, b)?;
    let trajs = if cooled { run_chains(&model, cfg, chains)? } else { run_matrix_chains(a, b, cfg, chains)? };
    let estimate = estimate_many(&trajs, Su2OneLinkModel::observable)?;
    let exact = exact_expectation_su2(a, b)?;
    let run = Su2Run {
        a,
        b,
        cooled,
        estimate,
        exact,
        sigmas: estimate.sigmas_from(exact, c(0.0, 0.0)),
        overflow_count: trajs.iter().map(|t| t.overflow_count).sum(),
        pole_rejections: trajs.iter().map(|t| t.pole_rejections).sum(),
    };
    Ok((trajs, run))
}

/// Angle `z` with `tr U = 2 cos z`, on the branch with `Re z` in `[0, pi]`.
fn su2_angle(u: &CMatrix) -> ComplexPoint {
    let t = u.trace() / 2.0;
    let z = t.acos();
    ComplexPoint::new(z.re, z.im)
}

fn run_matrix_chains(a: f64, b: f64, cfg: &SamplerConfig, chains: usize) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let basis = crate::lie::su_basis(2)?;
    let coupling = -c(a, b);
    (0..chains as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = SamplerConfig { seed: cfg.seed.wrapping_add(k), ..*cfg };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let burn = (cfg.burn_in / cfg.dt).round() as usize;
            let thin = ((cfg.thin / cfg.dt).round() as usize).max(1);
            let mut traj = Trajectory {
                samples: Vec::with_capacity(cfg.n_samples),
                times: Vec::with_capacity(cfg.n_samples),
                overflow_count: 0,
                pole_rejections: 0,
                truncated: false,
                config: cfg,
            };
            let start = CMatrix::identity(2, 2);
            let mut u = start.clone();
            let (mut step, mut since) = (0u64, 0usize);
            let sd = (2.0 * cfg.dt).sqrt();
            while traj.samples.len() < cfg.n_samples {
                // D_a S = coupling * tr(X^a U)
                let gen: CMatrix = basis.matrices.iter().fold(DMatrix::zeros(2, 2), |acc, x| {
                    let d = coupling * (x * &u).trace();
                    acc + x * (-d * cfg.dt + sd * rng.sample::<f64, _>(StandardNormal))
                });
                u = gen.exp() * u;
                step += 1;
                since += 1;
                if !(u.norm() <= cfg.overflow_threshold) {
                    traj.overflow_count += 1;
                    if traj.overflow_count > cfg.max_restarts {
                        traj.truncated = true;
                        break;
                    }
                    u = start.clone();
                    since = 0;
                    continue;
                }
                if since >= burn && (since - burn) % thin == 0 {
                    traj.samples.push(su2_angle(&u));
                    traj.times.push(step as f64 * cfg.dt);
                }
            }
            Ok(traj)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{random_sl, su_basis};
    use proptest::prelude::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_chain(n: usize, links: usize, y: f64, seed: u64) -> LinkChain {
        let b = su_basis(n).unwrap();
        let mut r = rng(seed);
        LinkChain::SUn { links: (0..links).map(|_| random_sl(&b, y, &mut r)).collect() }
    }

    fn random_gauge(n: usize, len: usize, y: f64, seed: u64) -> GaugeChoice {
        let b = su_basis(n).unwrap();
        let mut r = rng(seed);
        GaugeChoice::SUn { g: (0..len).map(|_| random_sl(&b, y, &mut r).u).collect() }
    }

    #[test]
    fn identity_gauge_is_a_no_op() {
        let ch = random_chain(2, 4, 0.5, 1);
        let g = GaugeChoice::SUn { g: vec![CMatrix::identity(2, 2); 4] };
        assert_eq!(gauge_transform(&ch, &g).unwrap(), ch);
    }

    #[test]
    fn complexified_gauge_changes_distance_not_loop() {
        let ch = random_chain(2, 4, 0.3, 2);
        let t = gauge_transform(&ch, &random_gauge(2, 4, 0.7, 3)).unwrap();
        assert!((t.loop_trace() - ch.loop_trace()).norm() < 1e-12);
        assert!((t.distance() - ch.distance()).abs() > 1e-3);
    }

    #[test]
    fn mismatched_gauge_is_rejected() {
        let ch = random_chain(2, 3, 0.3, 2);
        assert!(gauge_transform(&ch, &random_gauge(2, 4, 0.1, 3)).is_err());
        assert!(gauge_transform(&ch, &GaugeChoice::U1 { phi: vec![c(0.0, 0.0); 3] }).is_err());
    }

    #[test]
    fn cooling_unitary_chain_keeps_zero_distance() {
        let b = su_basis(3).unwrap();
        let mut r = rng(4);
        let ch = LinkChain::SUn { links: (0..4).map(|_| GroupElement { u: b.random_unitary(&mut r) }).collect() };
        let (cooled, rep) = cool_gradient(&ch, COOL_STEPS, COOL_RATE).unwrap();
        assert!(rep.f_before.abs() < 1e-12 && rep.f_after.abs() < 1e-12);
        assert!((cooled.loop_trace() - ch.loop_trace()).norm() < 1e-12);
    }

    #[test]
    fn cooling_reduces_single_nonunitary_link() {
        let b = su_basis(2).unwrap();
        let mut r = rng(5);
        let mut links: Vec<GroupElement> = (0..4).map(|_| GroupElement { u: b.random_unitary(&mut r) }).collect();
        let w = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.3f64.exp(), 0.0), c((-0.3f64).exp(), 0.0)]));
        links[1] = GroupElement { u: w * &links[1].u };
        let ch = LinkChain::SUn { links };
        let (cooled, rep) = cool_gradient(&ch, COOL_STEPS, COOL_RATE).unwrap();
        assert!(rep.f_after < rep.f_before, "{rep:?}");
        assert!((cooled.loop_trace() - ch.loop_trace()).norm() < 1e-12);
    }

    #[test]
    fn cooled_single_link_reaches_eigenvalue_bound() {
        // Conjugation can lower tr(U^dagger U) - 2 down to |l|^2 + |1/l|^2 - 2, reached
        // by the normal matrix with the same eigenvalues.
        let ch = random_chain(2, 1, 0.8, 6);
        let LinkChain::SUn { links } = &ch else { unreachable!() };
        let eig = links[0].u.clone().eigenvalues().unwrap();
        let bound: f64 = eig.iter().map(|l| l.norm_sqr()).sum::<f64>() - 2.0;
        let (cooled, rep) = cool_gradient(&ch, 2000, COOL_RATE).unwrap();
        assert!(rep.f_after >= bound - 1e-9);
        assert!((rep.f_after - bound).abs() < 1e-6 * (1.0 + bound), "{} vs {bound}", rep.f_after);
        let LinkChain::SUn { links: cl } = cooled else { unreachable!() };
        let u = &cl[0].u;
        // Normal: U U^dagger = U^dagger U.
        assert!((u * u.adjoint() - u.adjoint() * u).norm() < 1e-3);
    }

    #[test]
    fn gradient_cooling_rejects_u1() {
        assert!(cool_gradient(&LinkChain::U1 { theta: vec![c(0.0, 0.1)] }, 5, 0.1).is_err());
    }

    #[test]
    fn poisson_cooling_four_sites() {
        let ys = [0.4, -0.1, -0.1, -0.2];
        let theta: Vec<Complex64> = ys.iter().enumerate().map(|(k, y)| c(0.3 * k as f64, -y)).collect();
        let ch = LinkChain::U1 { theta: theta.clone() };
        let (cooled, g) = cool_u1_poisson(&ch).unwrap();
        let LinkChain::U1 { theta: ct } = &cooled else { unreachable!() };
        for t in ct {
            assert!(t.im.abs() < 1e-14);
        }
        assert!(cooled.distance() < 1e-28);
        // Dense solve of the pinned Laplacian.
        let n = 4;
        let mut a = DMatrix::<f64>::zeros(n + 1, n);
        for x in 0..n {
            a[(x, x)] += 2.0;
            a[(x, (x + n - 1) % n)] -= 1.0;
            a[(x, (x + 1) % n)] -= 1.0;
            a[(n, x)] = 1.0;
        }
        let rhs = u1_poisson_rhs(&theta);
        let mut bvec = nalgebra::DVector::<f64>::zeros(n + 1);
        for x in 0..n {
            bvec[x] = rhs[x];
        }
        let sol = a.clone().svd(true, true).solve(&bvec, 1e-14).unwrap();
        let GaugeChoice::U1 { phi } = g else { unreachable!() };
        for x in 0..n {
            assert!((phi[x] - c(0.0, -sol[x])).norm() < 1e-12);
        }
        let before: f64 = ys.iter().sum();
        let after: f64 = ct.iter().map(|t| -t.im).sum();
        assert!((before - after).abs() < 1e-14);
    }

    #[test]
    fn poisson_cooling_on_manifold_is_identity() {
        let theta = vec![c(0.1, 0.3), c(2.0, 0.3), c(4.0, 0.3)];
        let (cooled, g) = cool_u1_poisson(&LinkChain::U1 { theta: theta.clone() }).unwrap();
        let GaugeChoice::U1 { phi } = g else { unreachable!() };
        assert!(phi.iter().all(|p| p.norm() < 1e-15));
        assert_eq!(cooled, LinkChain::U1 { theta });
    }

    #[test]
    fn abelian_dynamics_stays_on_manifold() {
        let rep = u1_cool_check(8, &HolonomyCosine { a: 1.0, b: 0.5 }, 1e-6, 2000, 9).unwrap();
        assert!(rep.max_step_drift < 1e-8, "{rep:?}");
        assert!(rep.max_gauge < 1e-10, "{rep:?}");
    }

    #[test]
    fn cooling_projects_off_manifold_field() {
        let mut r = rng(10);
        let theta: Vec<Complex64> = (0..6).map(|_| c(r.random::<f64>() * TAU, r.random::<f64>() - 0.5)).collect();
        let ch = LinkChain::U1 { theta };
        let (cooled, _) = cool_u1_poisson(&ch).unwrap();
        assert!(cooled.distance() < ch.distance());
        let LinkChain::U1 { theta: ct } = &cooled else { unreachable!() };
        assert!(u1_poisson_rhs(ct).iter().all(|v| v.abs() < 1e-10));
        let (again, _) = cool_u1_poisson(&cooled).unwrap();
        let LinkChain::U1 { theta: at } = &again else { unreachable!() };
        assert!(at.iter().zip(ct).all(|(a, b)| (a - b).norm() < 1e-12));
        assert!((cooled.loop_trace() - ch.loop_trace()).norm() < 1e-12);
    }

    #[test]
    fn imaginary_drift_integrates_to_zero_over_x() {
        let act = HolonomyCosine { a: 1.0, b: 0.7 };
        for y in [-0.5, 0.2, 1.3] {
            let m = 64;
            let mut sum = 0.0;
            for k in 0..m {
                let th = [c(TAU * k as f64 / m as f64, y)];
                sum += (-act.gradient(&th)[0]).im;
            }
            assert!(sum.abs() / (m as f64) < 1e-14);
        }
    }

    #[test]
    fn eigen_drift_matches_direct_formula_for_real_dynamics() {
        let b = su_basis(2).unwrap();
        let th: f64 = 0.7;
        let st = EigenState::new(vec![Complex64::from_polar(1.0, th), Complex64::from_polar(1.0, -th)], 1).unwrap();
        let d = eigen_drift(&st, &[0.0; 3], &[0.0; 3], &b).unwrap();
        // Only X^1, X^2 are off-diagonal, each giving X_12 X_21 = -1.
        let (l1, l2) = (st.lambda[0], st.lambda[1]);
        let e1 = -(c(3.0, 0.0) + 2.0 * (-2.0) * l2 / (l2 - l1)) * l1;
        let e2 = -(c(3.0, 0.0) + 2.0 * (-2.0) * l1 / (l1 - l2)) * l2;
        assert!((d.drift[0] - e1).norm() < 1e-12);
        assert!((d.drift[1] - e2).norm() < 1e-12);
        // For unit-modulus eigenvalues the drift is 2i cot(theta) - 1 times lambda.
        let cot = 1.0 / th.tan();
        assert!((d.drift[0] - (c(0.0, 2.0 * cot) - 1.0) * l1).norm() < 1e-12);
    }

    #[test]
    fn collision_is_reported() {
        let b = su_basis(2).unwrap();
        let st = EigenState { lambda: vec![c(1.0, 0.0), c(1.0, 1e-9)], n_links: 1 };
        assert!(matches!(eigen_drift(&st, &[0.0; 3], &[0.0; 3], &b), Err(Error::Collision(_))));
    }

    #[test]
    fn lie_derivatives_match_closed_form() {
        for n in [2, 3] {
            let b = su_basis(n).unwrap();
            let lam: Vec<Complex64> = match n {
                2 => vec![c(1.2, 0.3), c(1.2, 0.3).inv()],
                _ => {
                    let (p, q) = (c(0.9, 0.4), c(-0.5, 1.1));
                    vec![p, q, (p * q).inv()]
                }
            };
            let d = trace_action_derivatives(&lam, 1.0, 0.6, &b);
            let u = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam.clone()));
            for (x, dv) in b.matrices.iter().zip(&d) {
                let e = -c(1.0, 0.6) * (x * &u).trace();
                assert!((dv - e).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn stencil_matches_group_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 3] {
            let b = su_basis(n).unwrap();
            let st = TraceStencil::new(&b);
            for _ in 0..20 {
                let mut lam: Vec<Complex64> = (0..n - 1).map(|_| c(rng.random::<f64>() - 0.5, 4.0 * rng.random::<f64>()).exp()).collect();
                lam.push(lam.iter().product::<Complex64>().inv());
                let (a, bb) = (rng.random::<f64>(), rng.random::<f64>() - 0.5);
                for (u, v) in st.derivatives(&lam, a, bb).iter().zip(trace_action_derivatives(&lam, a, bb, &b)) {
                    assert!((u - v).norm() < 1e-12 * (1.0 + v.norm()));
                }
            }
        }
    }

    #[test]
    fn eigen_dynamics_reproduces_coordinate_drift() {
        // For n = 2, N = 1, lambda = e^{iz}: d lambda = lambda (i dz - dt), dz from the
        // (x, y) equations of the one-link model.
        let b = su_basis(2).unwrap();
        let z = c(0.8, 0.35);
        let (aa, bb) = (1.0, 0.2);
        let l = (c(0.0, 1.0) * z).exp();
        let st = EigenState::new(vec![l, l.inv()], 1).unwrap();
        let d = trace_action_derivatives(&st.lambda, aa, bb, &b);
        let ka: Vec<f64> = d.iter().map(|v| v.re).collect();
        let ja: Vec<f64> = d.iter().map(|v| v.im).collect();
        let dr = eigen_drift(&st, &ka, &ja, &b).unwrap();
        let (k, j) = crate::model::drift_su2(ComplexPoint::new(z.re, z.im), aa, bb, 1e-12).unwrap();
        let expect = l * (c(0.0, 1.0) * c(k, j) - 1.0);
        assert!((dr.drift[0] - expect).norm() < 1e-8, "{} vs {expect}", dr.drift[0]);
    }

    #[test]
    fn product_constraint_without_renormalisation() {
        let init = EigenState::new(vec![c(0.3, 0.2).exp(), c(-0.3, -0.2).exp()], 1).unwrap();
        let cfg = EigenConfig {
            a: 1.0,
            b: 0.2,
            dt: 1e-5,
            steps: 100_000,
            paths: 1,
            renormalize: false,
            record_every: 10_000,
            ..Default::default()
        };
        let run = run_eigen(&init, &cfg).unwrap();
        assert!(run.max_product_defect < 1e-3, "{}", run.max_product_defect);
    }

    #[test]
    fn linear_step_conserves_product_in_mean() {
        // A plain step l + drift dt + noise sqrt(2dt) eta changes prod l by a zero-mean
        // O(dt) fluctuation; its exact Gaussian mean is off by drift_1 drift_2 dt^2 only.
        let b = su_basis(2).unwrap();
        let st = EigenState::new(vec![c(0.4, 0.7).exp(), c(-0.4, -0.7).exp()], 1).unwrap();
        let d = trace_action_derivatives(&st.lambda, 1.0, 0.5, &b);
        let ka: Vec<f64> = d.iter().map(|v| v.re).collect();
        let ja: Vec<f64> = d.iter().map(|v| v.im).collect();
        let dr = eigen_drift(&st, &ka, &ja, &b).unwrap();
        for dt in [1e-3, 1e-4, 1e-5] {
            let det = (st.lambda[0] + dr.drift[0] * dt) * (st.lambda[1] + dr.drift[1] * dt);
            let noise: Complex64 = (0..3).map(|a| dr.noise[0][a] * dr.noise[1][a]).sum::<Complex64>() * 2.0 * dt;
            let mean = det + noise;
            assert!((mean - 1.0 - dr.drift[0] * dr.drift[1] * dt * dt).norm() < 1e-14);
        }
    }

    #[test]
    fn renormalised_product_stays_close() {
        let (p, q) = (c(0.2, 0.1).exp(), c(-0.1, 0.6).exp());
        let init = EigenState::new(vec![p, q, (p * q).inv()], 2).unwrap();
        let cfg = EigenConfig { n: 3, n_links: 2, a: 1.0, b: 0.3, steps: 5000, paths: 4, ..Default::default() };
        let run = run_eigen(&init, &cfg).unwrap();
        assert!(run.max_product_defect < 1e-6, "{}", run.max_product_defect);
        let csv = eigen_csv(&run.times, &run.first_path);
        assert!(csv.starts_with("t,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3\n"));
        assert_eq!(csv.lines().count(), run.times.len() + 1);
    }

    #[test]
    fn uncooled_matrix_langevin_real_action() {
        let cfg = SamplerConfig { dt: 2e-3, burn_in: 2.0, thin: 0.1, n_samples: 2000, seed: 11, ..Default::default() };
        let (_, run) = run_su2_onelink(1.0, 0.0, &cfg, 4, false).unwrap();
        // The imaginary part is pure roundoff for a real action.
        assert!((run.estimate.mean.re - run.exact.re).abs() < 3.0 * run.estimate.stderr.re, "{run:?}");
        assert!(run.estimate.mean.im.abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn loop_trace_gauge_invariant(seed in 0u64..100_000, n in 2usize..4, len in 1usize..6, y in 0.0f64..1.0) {
            let ch = random_chain(n, len, 0.4, seed);
            let t = gauge_transform(&ch, &random_gauge(n, len, y, seed + 1)).unwrap();
            prop_assert!((t.loop_trace() - ch.loop_trace()).norm() < 1e-12 * (1.0 + ch.loop_trace().norm()));
        }

        #[test]
        fn u1_loop_gauge_invariant(seed in 0u64..100_000, len in 1usize..8) {
            let mut r = rng(seed);
            let theta: Vec<Complex64> = (0..len).map(|_| c(r.random::<f64>() * TAU, r.random::<f64>() - 0.5)).collect();
            let phi: Vec<Complex64> = (0..len).map(|_| c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)).collect();
            let ch = LinkChain::U1 { theta };
            let t = gauge_transform(&ch, &GaugeChoice::U1 { phi }).unwrap();
            prop_assert!((t.loop_trace() - ch.loop_trace()).norm() < 1e-12);
        }

        #[test]
        fn gradient_cooling_is_monotone(seed in 0u64..100_000, n in 2usize..4) {
            let ch = random_chain(n, 3, 0.6, seed);
            let LinkChain::SUn { links } = &ch else { unreachable!() };
            let mut cur = LinkChain::SUn { links: links.clone() };
            let mut f = ch.distance();
            for _ in 0..10 {
                let (next, rep) = cool_gradient(&cur, 1, COOL_RATE).unwrap();
                prop_assert!(rep.f_after <= f + 1e-12);
                f = rep.f_after;
                cur = next;
            }
            prop_assert!((cur.loop_trace() - ch.loop_trace()).norm() < 1e-10 * (1.0 + ch.loop_trace().norm()));
        }
    }
}
