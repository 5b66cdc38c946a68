//! Expansion of the quartic-model steady density near `B = sqrt(3)`.
//!
//! With `B = sqrt(3) - eps`, the cascade `P_0, P_1, ...` of the formal
//! expansion in powers of `eps` is solved on a periodic box with the Fourier
//! backend. The support-aligned terms `~P_{k/2}` of the expansion in powers of
//! `sqrt(eps)` follow from Taylor-expanding `P^eps(x, a^eps y)` with
//! `a^eps = 1 / alpha^eps`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp::characteristics::CharacteristicTable;
use crate::fp::fourier::{spectral_derivative, Fft2, FourierStepper};
use crate::fp::steady::{initial_condition, solve_source_steady, solve_steady_with};
use crate::fp::{Grid2D, GridFunction2D, SteadyError, SteadyOptions};
use crate::model::QuarticModel;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Truncated power series `sum c_k t^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series(pub Vec<f64>);

impl Series {
    pub fn mul(&self, other: &Series) -> Series {
        let n = self.0.len().min(other.0.len());
        let mut c = vec![0.0; n];
        for (i, a) in self.0.iter().enumerate().take(n) {
            for (j, b) in other.0.iter().enumerate().take(n - i) {
                c[i + j] += a * b;
            }
        }
        Series(c)
    }

    /// `f^r` for `f_0 > 0` by the J.C.P. Miller recurrence.
    pub fn powf(&self, r: f64) -> Series {
        let f = &self.0;
        let n = f.len();
        let mut g = vec![0.0; n];
        g[0] = f[0].powf(r);
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((r + 1.0) * j as f64 - k as f64) * f[j] * g[k - j];
            }
            g[k] = acc / (k as f64 * f[0]);
        }
        Series(g)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// `alpha^eps = sqrt(1 - sqrt(1 - B^2 / 3))` at `B = sqrt(3) - eps`; the
/// support of `P^eps` in `y` is `[-alpha / sqrt 2, alpha / sqrt 2]`.
pub fn alpha_eps(eps: f64) -> Result<f64> {
    if !(0.0..SQRT3).contains(&eps) {
        return Err(Error::Domain(format!("alpha^eps needs 0 <= eps < sqrt 3, got {eps}")));
    }
    Ok(std::f64::consts::SQRT_2 * crate::model::strip_half_width(SQRT3 - eps)?)
}

/// Coefficients of `a^eps = 1 / alpha^eps = sum_k a_{k/2} eps^{k/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ACoefficients {
    /// `coeffs[k]` multiplies `eps^{k/2}`; `coeffs[0] = 1`.
    pub coeffs: Vec<f64>,
}

impl ACoefficients {
    /// Terms up to `eps^{order/2}`, from series arithmetic on the closed form
    /// with `t = sqrt(eps)`: `1 - B^2/3 = t^2 (2/sqrt3 - t^2/3)`.
    pub fn new(order: usize) -> Self {
        let n = order + 2;
        let mut inner = vec![0.0; n];
        inner[0] = 2.0 / SQRT3;
        if n > 2 {
            inner[2] = -1.0 / 3.0;
        }
        // sqrt(1 - B^2/3) = t w(t)
        let w = Series(inner).powf(0.5);
        let mut alpha2 = vec![0.0; n];
        alpha2[0] = 1.0;
        for k in 1..n {
            alpha2[k] = -w.0[k - 1];
        }
        let a = Series(alpha2).powf(-0.5);
        Self { coeffs: a.0[..=order].to_vec() }
    }

    pub fn a_half(&self) -> f64 {
        self.coeffs[1]
    }

    pub fn a_one(&self) -> f64 {
        self.coeffs[2]
    }

    pub fn series(&self) -> Series {
        Series(self.coeffs.clone())
    }

    /// `sum_{k < terms} a_{k/2} eps^{k/2}`.
    pub fn partial_sum(&self, eps: f64, terms: usize) -> f64 {
        Series(self.coeffs[..terms.min(self.coeffs.len())].to_vec()).eval(eps.sqrt())
    }
}

/// Polynomial observable `O(z) = sum_p c_p z^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyObservable(pub Vec<Complex64>);

impl PolyObservable {
    pub fn monomial(p: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); p + 1];
        c[p] = Complex64::new(1.0, 0.0);
        Self(c)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeOptions {
    pub steady: SteadyOptions,
    /// Inner GMRES tolerance of each cascade level is relative to the source.
    pub level_tol: f64,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        Self { steady: SteadyOptions { max_t: 100.0, ..Default::default() }, level_tol: 1e-8 }
    }
}

/// `P_0` (unit mass) followed by `P_1 .. P_L` (zero mass).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub grid: Grid2D,
    pub terms: Vec<Vec<f64>>,
    /// Final change rates of every level.
    pub residuals: Vec<f64>,
    /// Mass multiplier of one step at `P_0`.
    pub mu0: f64,
}

fn fourier_stepper(grid: Grid2D, opts: &SteadyOptions) -> Result<FourierStepper> {
    let q = QuarticModel::new(SQRT3)?;
    let st = FourierStepper::new(CharacteristicTable::build(&q, grid, opts.dt), opts.eval);
    Ok(if opts.filter_order > 0 { st.with_filter(opts.filter_order) } else { st })
}

/// Right-hand side forcing `y dP/dx - x dP/dy` of level `l` from `P_{l-1}`.
pub fn cascade_source(prev: &[f64], grid: Grid2D, fft: &Fft2) -> Vec<f64> {
    let px = spectral_derivative(prev, grid, fft, 1, 0);
    let py = spectral_derivative(prev, grid, fft, 0, 1);
    let mut s = Vec::with_capacity(grid.len());
    for j in 0..grid.m {
        for i in 0..grid.n {
            let k = grid.idx(i, j);
            s.push(grid.y(j) * px[k] - grid.x(i) * py[k]);
        }
    }
    s
}

/// Solves `P_0` at `B = sqrt 3` and the cascade levels `1..=order` (at most 5).
pub fn solve_cascade(order: usize, grid: Grid2D, opts: &CascadeOptions) -> Result<Cascade> {
    if order > 5 {
        return Err(Error::InvalidParameter(format!("cascade order {order} exceeds 5")));
    }
    let st = fourier_stepper(grid, &opts.steady)?;
    let p0 = match solve_steady_with(&st, initial_condition(grid), false, &opts.steady) {
        Ok(s) => s,
        Err(SteadyError::NotConverged { residual, .. }) => return Err(Error::CascadeNotConverged { level: 0, residual }),
        Err(SteadyError::Failed(e)) => return Err(e),
    };
    let mu0 = p0.step_multiplier;
    let mut terms = vec![p0.p.values];
    let mut residuals = vec![p0.residual];
    for level in 1..=order {
        let src = cascade_source(&terms[level - 1], grid, st.fft());
        let scale = grid.l1(&src).max(1.0);
        let o = SteadyOptions { tol: opts.level_tol * scale, ..opts.steady };
        match solve_source_steady(&st, &terms[0], mu0, &src, &o) {
            Ok((x, r)) => {
                terms.push(x);
                residuals.push(r);
            }
            Err(SteadyError::NotConverged { residual, .. }) => return Err(Error::CascadeNotConverged { level, residual }),
            Err(SteadyError::Failed(e)) => return Err(e),
        }
    }
    Ok(Cascade { grid, terms, residuals, mu0 })
}

/// `~P_{k/2}` for `k = 0 ..= 2L + 1` from `P^eps(x, a^eps y)` expanded in `t = sqrt(eps)`:
/// `~P = sum_l sum_j t^{2l} delta(t)^j y^j / j! d^j P_l / dy^j`, `delta = a - 1`.
pub fn scale_terms(cascade: &Cascade, a: &ACoefficients) -> Vec<Vec<f64>> {
    let g = cascade.grid;
    let fft = Fft2::new(g.n, g.m);
    let kmax = 2 * (cascade.terms.len() - 1) + 1;
    assert!(a.coeffs.len() > kmax, "need a-coefficients up to order {kmax}");
    let mut delta = a.coeffs[..=kmax].to_vec();
    delta[0] = 0.0;
    let delta = Series(delta);
    // powers[j] = delta^j truncated at t^kmax.
    let mut powers = vec![Series({
        let mut v = vec![0.0; kmax + 1];
        v[0] = 1.0;
        v
    })];
    for j in 1..=kmax {
        powers.push(powers[j - 1].mul(&delta));
    }
    let ys: Vec<f64> = (0..g.len()).map(|k| g.y(k / g.n)).collect();
    let mut out = vec![vec![0.0; g.len()]; kmax + 1];
    for (l, pl) in cascade.terms.iter().enumerate() {
        for j in 0..=(kmax - 2 * l) {
            let d = if j == 0 { pl.clone() } else { spectral_derivative(pl, g, &fft, 0, j as u32) };
            let fact: f64 = (1..=j).map(|v| v as f64).product();
            for (k, term) in out.iter_mut().enumerate().skip(2 * l + j) {
                let c = powers[j].0[k - 2 * l];
                if c == 0.0 {
                    continue;
                }
                for ((t, dv), y) in term.iter_mut().zip(&d).zip(&ys) {
                    *t += c * y.powi(j as i32) / fact * dv;
                }
            }
        }
    }
    out
}

/// `<O>_l = \int\int O(x + iy) P_l` for every cascade level.
pub fn observable_coefficients_direct(cascade: &Cascade, obs: &PolyObservable) -> Vec<Complex64> {
    cascade.terms.iter().map(|p| GridFunction2D { grid: cascade.grid, values: p.clone(), time: 0.0 }.expectation(|z| obs.eval(z))).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `<O>_{k/2}` from `<O>^eps = a \int\int O(x + i a y) ~P^eps`, expanded in `sqrt(eps)`.
pub fn observable_coefficients_scaled(scaled: &[Vec<f64>], grid: Grid2D, a: &ACoefficients, obs: &PolyObservable) -> Vec<Complex64> {
    let kmax = scaled.len() - 1;
    let a_series = Series(a.coeffs[..=kmax].to_vec());
    let deg = obs.0.len().saturating_sub(1);
    // a^{q+1} for q = 0..=deg
    let mut apow = vec![a_series.clone()];
    for q in 1..=deg {
        apow.push(apow[q - 1].mul(&a_series));
    }
    // moments[s][p][q] = \int\int x^{p-q} (iy)^q ~P_{s/2}
    let mom = |vals: &[f64], px: usize, qy: usize| -> Complex64 {
        let mut acc = 0.0;
        for j in 0..grid.m {
            let yq = grid.y(j).powi(qy as i32);
            for i in 0..grid.n {
                acc += grid.x(i).powi(px as i32) * yq * vals[grid.idx(i, j)];
            }
        }
        Complex64::new(0.0, 1.0).powu(qy as u32) * acc * grid.cell_area()
    };
    let mut out = vec![Complex64::new(0.0, 0.0); kmax + 1];
    for (s, vals) in scaled.iter().enumerate() {
        for (p, cp) in obs.0.iter().enumerate() {
            if *cp == Complex64::new(0.0, 0.0) {
                continue;
            }
            for q in 0..=p {
                let m = mom(vals, p - q, q) * *cp * binomial(p, q);
                for (k, o) in out.iter_mut().enumerate().skip(s) {
                    *o += m * apow[q].0[k - s];
                }
            }
        }
    }
    out
}

/// Trigonometric interpolation of every column at `y -> scale * y`.
fn rescale_columns(values: &[f64], grid: Grid2D, scale: f64) -> Vec<f64> {
    let (n, m) = (grid.n, grid.m);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let mut out = vec![0.0; n * m];
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for i in 0..n {
        for j in 0..m {
            col[j] = Complex64::new(values[grid.idx(i, j)], 0.0);
        }
        fft.process(&mut col);
        for j in 0..m {
            let th = std::f64::consts::TAU * (scale * grid.y(j) - grid.y(0)) / grid.ly();
            let mut acc = 0.0;
            for (idx, c) in col.iter().enumerate() {
                let k = if idx < m.div_ceil(2) { idx as f64 } else { idx as f64 - m as f64 };
                if m % 2 == 0 && idx == m / 2 {
                    acc += c.re * (k * th).cos();
                } else {
                    acc += (c * Complex64::from_polar(1.0, k * th)).re;
                }
            }
            out[grid.idx(i, j)] = acc / m as f64;
        }
    }
    out
}

/// `P^eps(x, y) ~ sum_{k < terms} eps^{k/2} ~P_{k/2}(x, alpha^eps y)`.
pub fn reconstruct(scaled: &[Vec<f64>], grid: Grid2D, eps: f64, terms: usize) -> Result<GridFunction2D> {
    let alpha = alpha_eps(eps)?;
    let t = eps.sqrt();
    let mut sum = vec![0.0; grid.len()];
    for (k, v) in scaled.iter().enumerate().take(terms) {
        let w = t.powi(k as i32);
        sum.iter_mut().zip(v).for_each(|(s, x)| *s += w * x);
    }
    Ok(GridFunction2D { grid, values: rescale_columns(&sum, grid, alpha), time: 0.0 })
}

/// The formal expansion `sum_l eps^l P_l` without support alignment.
pub fn reconstruct_direct(cascade: &Cascade, eps: f64) -> GridFunction2D {
    let mut sum = vec![0.0; cascade.grid.len()];
    for (l, v) in cascade.terms.iter().enumerate() {
        let w = eps.powi(l as i32);
        sum.iter_mut().zip(v).for_each(|(s, x)| *s += w * x);
    }
    GridFunction2D { grid: cascade.grid, values: sum, time: 0.0 }
}

/// `\int |min(P, 0)|`, the mass of the oscillations below zero.
pub fn negative_mass(p: &GridFunction2D) -> f64 {
    p.values.iter().map(|v| (-v).max(0.0)).sum::<f64>() * p.grid.cell_area()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSet {
    pub order: usize,
    pub cascade: Cascade,
    pub scaled: Vec<Vec<f64>>,
    pub a: ACoefficients,
    /// `<O>_{k/2}` for `k = 0 ..= 2L + 1` via the scaled terms.
    pub obs_coeffs: Vec<Complex64>,
    /// `<O>_l` straight from the cascade.
    pub obs_direct: Vec<Complex64>,
}

impl ExpansionSet {
    pub fn build(order: usize, grid: Grid2D, opts: &CascadeOptions, obs: &PolyObservable) -> Result<Self> {
        let cascade = solve_cascade(order, grid, opts)?;
        let a = ACoefficients::new(2 * order + 1);
        let scaled = scale_terms(&cascade, &a);
        let obs_coeffs = observable_coefficients_scaled(&scaled, grid, &a, obs);
        let obs_direct = observable_coefficients_direct(&cascade, obs);
        Ok(Self { order, cascade, scaled, a, obs_coeffs, obs_direct })
    }

    /// Truncated series `sum_{k < terms} eps^{k/2} <O>_{k/2}`.
    pub fn observable_at(&self, eps: f64, terms: usize) -> Complex64 {
        let t = Complex64::new(eps, 0.0).sqrt();
        self.obs_coeffs.iter().take(terms).enumerate().map(|(k, c)| c * t.powu(k as u32)).sum()
    }

    /// Integer orders only, valid for either sign of `eps`.
    pub fn observable_integer_orders(&self, eps: f64) -> Complex64 {
        self.obs_direct.iter().enumerate().map(|(l, c)| c * eps.powi(l as i32)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leading_a_coefficients_closed_form() {
        let a = ACoefficients::new(6);
        assert_eq!(a.coeffs[0], 1.0);
        // 1/alpha = (1 - s)^{-1/2}, s = c sqrt(eps) + O(eps^{3/2}), c^2 = 2/sqrt3.
        let c = (2.0 / SQRT3).sqrt();
        assert!((a.a_half() - c / 2.0).abs() < 1e-14);
        assert!((a.a_one() - 3.0 * c * c / 8.0).abs() < 1e-14);
    }

    #[test]
    fn a_series_matches_closed_form() {
        let a = ACoefficients::new(24);
        for eps in [1e-4, 1e-3, 1e-2, 0.05, 0.1] {
            let exact = 1.0 / alpha_eps(eps).unwrap();
            let err: Vec<f64> = [4, 8, 16, 25].iter().map(|&n| (a.partial_sum(eps, n) - exact).abs()).collect();
            assert!(err.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{eps}: {err:?}");
            assert!(err[3] < 1e-6, "{eps}: {err:?}");
        }
    }

    #[test]
    fn series_power_inverts() {
        let f = Series(vec![2.0, 0.3, -0.1, 0.05, 0.0, 0.01]);
        let g = f.powf(-1.0).mul(&f);
        assert!((g.0[0] - 1.0).abs() < 1e-15);
        assert!(g.0[1..].iter().all(|c| c.abs() < 1e-15));
        let h = f.powf(0.5);
        let hh = h.mul(&h);
        assert!(hh.0.iter().zip(&f.0).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn alpha_eps_domain() {
        assert!((alpha_eps(0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(alpha_eps(-0.1).is_err());
    }

    #[test]
    fn scaled_terms_of_synthetic_cascade() {
        // P_0 = exp(-x^2 - y^2 / s^2) alone: ~P(x, y) = P_0(x, a y) exactly, so the
        // series in t must match the direct evaluation.
        let g = Grid2D::new(-4.0, 4.0, -2.0, 2.0, 32, 64).unwrap();
        let s2 = 0.1;
        let p0 = GridFunction2D::from_fn(g, |x, y| (-x * x - y * y / s2).exp()).values;
        let c = Cascade { grid: g, terms: vec![p0], residuals: vec![0.0], mu0: 1.0 };
        let a = ACoefficients::new(1);
        let scaled = scale_terms(&c, &a);
        assert_eq!(scaled.len(), 2);
        assert_eq!(scaled[0], c.terms[0]);
        for j in 0..g.m {
            for i in 0..g.n {
                let (x, y) = (g.x(i), g.y(j));
                let dy = -2.0 * y / s2 * (-x * x - y * y / s2).exp();
                assert!((scaled[1][g.idx(i, j)] - a.a_half() * y * dy).abs() < 1e-9);
            }
        }
        // y dP/dy integrates to -P over each slice.
        let m1 = g.integrate(&scaled[1]);
        let direct: f64 = -a.a_half() * g.integrate(&c.terms[0]);
        assert!((m1 - direct).abs() < 1e-10, "{m1} vs {direct}");
    }

    #[test]
    fn half_order_observable_vanishes_for_any_density() {
        // <O>^eps = a \int O(x + i a y) P(x, a y) does not depend on a.
        let g = Grid2D::new(-5.0, 5.0, -2.0, 2.0, 48, 96).unwrap();
        let p0 = GridFunction2D::from_fn(g, |x, y| (-x * x - (y - 0.1 * x) * (y - 0.1 * x) / 0.05).exp()).values;
        let c = Cascade { grid: g, terms: vec![p0], residuals: vec![0.0], mu0: 1.0 };
        let a = ACoefficients::new(1);
        let scaled = scale_terms(&c, &a);
        let o = observable_coefficients_scaled(&scaled, g, &a, &PolyObservable::monomial(2));
        let d = observable_coefficients_direct(&c, &PolyObservable::monomial(2));
        assert!((o[0] - d[0]).norm() < 1e-12);
        assert!(o[1].norm() < 1e-9, "{}", o[1]);
    }

    #[test]
    fn column_rescale_is_exact_for_band_limited_data() {
        let g = Grid2D::new(-1.0, 1.0, -1.0, 1.0, 8, 32).unwrap();
        let w = std::f64::consts::PI;
        let f = GridFunction2D::from_fn(g, |x, y| 1.0 + x + (w * y).cos() + 0.5 * (3.0 * w * y).sin());
        let r = rescale_columns(&f.values, g, 0.8);
        for j in 0..g.m {
            for i in 0..g.n {
                let (x, y) = (g.x(i), 0.8 * g.y(j));
                let e = 1.0 + x + (w * y).cos() + 0.5 * (3.0 * w * y).sin();
                assert!((r[g.idx(i, j)] - e).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn poly_observable_eval(re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let z = Complex64::new(re, im);
            let o = PolyObservable(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0), Complex64::new(3.0, 0.0)]);
            let e = 1.0 + Complex64::new(0.0, 2.0) * z + 3.0 * z * z;
            prop_assert!((o.eval(z) - e).norm() < 1e-12);
        }
    }
}
