//! Fourier-spectral backend on a periodic box.
//!
//! The density is held as a trigonometric interpolant. Values at the
//! characteristic feet are evaluated either by direct summation over all
//! modes or by a Gaussian-gridding non-uniform FFT that reproduces the
//! direct sum to about 1e-12 relative to the coefficient mass.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::characteristics::CharacteristicTable;
use super::grid::{Grid2D, GridFunction2D};
use super::LinearStepper;
use crate::error::{Error, Result};

/// Two-dimensional FFT on row-major `m x n` data (x fastest).
pub struct Fft2 {
    n: usize,
    m: usize,
    fx: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            m,
            fx: planner.plan_fft_forward(n),
            fy: planner.plan_fft_forward(m),
            ix: planner.plan_fft_inverse(n),
            iy: planner.plan_fft_inverse(m),
        }
    }

    /// Unnormalised transform in place; `inverse` uses `e^{+i}`.
    pub fn process(&self, data: &mut [Complex64], inverse: bool) {
        let (n, m) = (self.n, self.m);
        let (fx, fy) = if inverse { (&self.ix, &self.iy) } else { (&self.fx, &self.fy) };
        data.par_chunks_mut(n).for_each(|row| fx.process(row));
        let mut t = vec![Complex64::new(0.0, 0.0); n * m];
        for j in 0..m {
            for i in 0..n {
                t[i * m + j] = data[j * n + i];
            }
        }
        t.par_chunks_mut(m).for_each(|col| fy.process(col));
        for j in 0..m {
            for i in 0..n {
                data[j * n + i] = t[i * m + j];
            }
        }
    }
}

/// `(storage index, signed wavenumber, weight)` for every mode; an even
/// length's Nyquist mode is split evenly between `+n/2` and `-n/2` so the
/// interpolant stays real off the grid.
fn modes(n: usize) -> Vec<(usize, i64, f64)> {
    let mut v = Vec::with_capacity(n + 1);
    for idx in 0..n {
        let k = idx as i64;
        if n % 2 == 0 && idx == n / 2 {
            v.push((idx, k, 0.5));
            v.push((idx, -k, 0.5));
        } else if idx < n.div_ceil(2) {
            v.push((idx, k, 1.0));
        } else {
            v.push((idx, k - n as i64, 1.0));
        }
    }
    v
}

/// Fourier coefficients `P_{n,m}` normalised so that
/// `P(x_i, y_j) = sum P_{n,m} exp(2 pi i (n i / N + m j / M))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField2D {
    pub grid: Grid2D,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField2D {
    pub fn from_values(values: &[f64], grid: Grid2D, fft: &Fft2) -> Self {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut data, false);
        let s = 1.0 / grid.len() as f64;
        data.iter_mut().for_each(|c| *c *= s);
        Self { grid, coeffs: data }
    }

    /// Nodal values, with the largest imaginary part relative to the largest real part.
    pub fn to_values(&self, fft: &Fft2) -> (Vec<f64>, f64) {
        let mut data = self.coeffs.clone();
        fft.process(&mut data, true);
        let max_re = data.iter().fold(0.0f64, |a, c| a.max(c.re.abs()));
        let max_im = data.iter().fold(0.0f64, |a, c| a.max(c.im.abs()));
        let rel = if max_re > 0.0 { max_im / max_re } else { max_im };
        (data.into_iter().map(|c| c.re).collect(), rel)
    }

    /// Direct summation of the interpolant at an arbitrary point.
    pub fn eval_direct(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let th = TAU * (x - g.x(0)) / g.lx();
        let ph = TAU * (y - g.y(0)) / g.ly();
        let mx = modes(g.n);
        let my = modes(g.m);
        let ex: Vec<Complex64> = mx.iter().map(|&(_, k, w)| Complex64::from_polar(w, k as f64 * th)).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for &(jm, km, wm) in &my {
            let row = &self.coeffs[jm * g.n..(jm + 1) * g.n];
            let inner: Complex64 = mx.iter().zip(&ex).map(|(&(im, _, _), e)| row[im] * e).sum();
            acc += inner * Complex64::from_polar(wm, km as f64 * ph);
        }
        acc.re
    }
}

/// Derivative factors `(i k)^order` by storage index; the Nyquist mode of an
/// even length keeps only its cosine part, so odd orders drop it.
fn derivative_factors(n: usize, length: f64, order: u32) -> Vec<Complex64> {
    (0..n)
        .map(|idx| {
            if order == 0 {
                return Complex64::new(1.0, 0.0);
            }
            let nyquist = n % 2 == 0 && idx == n / 2;
            if nyquist && order % 2 == 1 {
                return Complex64::new(0.0, 0.0);
            }
            let k = if idx <= n / 2 { idx as f64 } else { idx as f64 - n as f64 };
            Complex64::new(0.0, TAU * k / length).powu(order)
        })
        .collect()
}

/// `d^ox/dx^ox d^oy/dy^oy` of nodal values through their trigonometric interpolant.
pub fn spectral_derivative(values: &[f64], grid: Grid2D, fft: &Fft2, ox: u32, oy: u32) -> Vec<f64> {
    let mut s = SpectralField2D::from_values(values, grid, fft);
    let fx = derivative_factors(grid.n, grid.lx(), ox);
    let fy = derivative_factors(grid.m, grid.ly(), oy);
    for (k, c) in s.coeffs.iter_mut().enumerate() {
        *c *= fx[k % grid.n] * fy[k / grid.n];
    }
    s.to_values(fft).0
}

/// Gaussian-gridding evaluation of a trigonometric interpolant at fixed targets.
pub struct Nufft2 {
    n: usize,
    m: usize,
    fine_n: usize,
    fine_m: usize,
    spread: usize,
    deconv_x: Vec<f64>,
    deconv_y: Vec<f64>,
    fine_fft: Fft2,
    base_x: Vec<u32>,
    base_y: Vec<u32>,
    wx: Vec<f64>,
    wy: Vec<f64>,
}

impl Nufft2 {
    /// Upsampling 2 and 12 kernel points each side give about 1e-12 accuracy.
    pub fn new(grid: &Grid2D, xs: &[f64], ys: &[f64]) -> Self {
        Self::with_spread(grid, xs, ys, 12)
    }

    /// `spread` kernel points on each side of a target.
    pub fn with_spread(grid: &Grid2D, xs: &[f64], ys: &[f64], spread: usize) -> Self {
        assert!((1..=32).contains(&spread), "spread must lie in 1..=32");
        let (n, m) = (grid.n, grid.m);
        let (fine_n, fine_m) = (2 * n, 2 * m);
        // Kernel width for R = 2 in terms of the number of coarse modes.
        let tau = |modes: usize| PI * spread as f64 / ((modes * modes) as f64 * 2.0 * 1.5);
        let (tx, ty) = (tau(n), tau(m));
        let deconv = |len: usize, t: f64| -> Vec<f64> {
            // Indexed by signed wavenumber + len/2.
            (0..=len)
                .map(|i| {
                    let k = i as f64 - (len / 2) as f64;
                    (PI / t).sqrt() * (k * k * t).exp()
                })
                .collect()
        };
        let weights = |coords: &[f64], origin: f64, length: f64, mr: usize, t: f64| {
            let h = TAU / mr as f64;
            let mut base = Vec::with_capacity(coords.len());
            let mut w = Vec::with_capacity(coords.len() * 2 * spread);
            for &c in coords {
                let th = (TAU * (c - origin) / length).rem_euclid(TAU);
                let l0 = (th / h).floor() as i64;
                let start = l0 - spread as i64 + 1;
                base.push(start.rem_euclid(mr as i64) as u32);
                for a in 0..2 * spread as i64 {
                    let d = th - (start + a) as f64 * h;
                    w.push((-d * d / (4.0 * t)).exp());
                }
            }
            (base, w)
        };
        let (base_x, wx) = weights(xs, grid.x(0), grid.lx(), fine_n, tx);
        let (base_y, wy) = weights(ys, grid.y(0), grid.ly(), fine_m, ty);
        Self {
            n,
            m,
            fine_n,
            fine_m,
            spread,
            deconv_x: deconv(n, tx),
            deconv_y: deconv(m, ty),
            fine_fft: Fft2::new(fine_n, fine_m),
            base_x,
            base_y,
            wx,
            wy,
        }
    }

    /// Interpolant values at every target.
    pub fn eval(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let (fnn, fmm) = (self.fine_n, self.fine_m);
        let mut fine = vec![Complex64::new(0.0, 0.0); fnn * fmm];
        let mx = modes(self.n);
        let my = modes(self.m);
        for &(jm, km, wm) in &my {
            let fy = (km.rem_euclid(fmm as i64)) as usize;
            let dy = self.deconv_y[(km + (self.m / 2) as i64) as usize] * wm;
            for &(im, kn, wn) in &mx {
                let fx = (kn.rem_euclid(fnn as i64)) as usize;
                let dx = self.deconv_x[(kn + (self.n / 2) as i64) as usize] * wn;
                fine[fy * fnn + fx] += coeffs[jm * self.n + im] * (dx * dy);
            }
        }
        self.fine_fft.process(&mut fine, true);
        let s2 = 2 * self.spread;
        // Periodic padding so every kernel window is a contiguous block.
        let (pn, pm) = (fnn + s2, fmm + s2);
        let mut h = vec![0.0; pn * pm];
        for j in 0..pm {
            let src = &fine[(j % fmm) * fnn..(j % fmm + 1) * fnn];
            let dst = &mut h[j * pn..(j + 1) * pn];
            for (i, d) in dst.iter_mut().enumerate() {
                *d = src[i % fnn].re;
            }
        }
        let norm = 1.0 / (fnn * fmm) as f64;
        match s2 {
            18 => self.contract::<18>(&h, pn, norm),
            24 => self.contract::<24>(&h, pn, norm),
            _ => self.contract_dyn(&h, pn, norm),
        }
    }

    fn contract<const S2: usize>(&self, h: &[f64], pn: usize, norm: f64) -> Vec<f64> {
        (0..self.base_x.len())
            .into_par_iter()
            .map(|t| {
                let (bx, by) = (self.base_x[t] as usize, self.base_y[t] as usize);
                let wx: &[f64; S2] = self.wx[t * S2..(t + 1) * S2].try_into().unwrap();
                let wy: &[f64; S2] = self.wy[t * S2..(t + 1) * S2].try_into().unwrap();
                // Contract along y first; the row updates vectorise.
                let mut col = [0.0f64; S2];
                for (b, wyb) in wy.iter().enumerate() {
                    let start = (by + b) * pn + bx;
                    let row: &[f64; S2] = h[start..start + S2].try_into().unwrap();
                    for c in 0..S2 {
                        col[c] += wyb * row[c];
                    }
                }
                let mut acc = 0.0;
                for c in 0..S2 {
                    acc += col[c] * wx[c];
                }
                acc * norm
            })
            .collect()
    }

    fn contract_dyn(&self, h: &[f64], pn: usize, norm: f64) -> Vec<f64> {
        let s2 = 2 * self.spread;
        (0..self.base_x.len())
            .into_par_iter()
            .map(|t| {
                let bx = self.base_x[t] as usize;
                let by = self.base_y[t] as usize;
                let wx = &self.wx[t * s2..(t + 1) * s2];
                let wy = &self.wy[t * s2..(t + 1) * s2];
                let mut col = [0.0f64; 64];
                let col = &mut col[..s2];
                for (b, wyb) in wy.iter().enumerate() {
                    let start = (by + b) * pn + bx;
                    for (c, r) in col.iter_mut().zip(&h[start..start + s2]) {
                        *c += wyb * r;
                    }
                }
                let acc: f64 = col.iter().zip(wx).map(|(c, w)| c * w).sum();
                acc * norm
            })
            .collect()
    }
}

/// How the interpolant is evaluated at the characteristic feet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierEval {
    /// Sum over all modes at every foot, `O(N^2 M^2)` per step.
    Direct,
    /// Non-uniform FFT, `O(NM log NM)` per step.
    Nufft,
}

/// Kernel half-width used by the stepper: about 1e-10 relative to the coefficient mass.
pub const STEPPER_SPREAD: usize = 9;

pub struct FourierStepper {
    table: CharacteristicTable,
    /// Feet outside the box along a non-periodic direction read zero.
    inside: Vec<bool>,
    fft: Fft2,
    nufft: Option<Nufft2>,
    diffusion: Vec<f64>,
    /// Per-mode damping `exp(-36 eta^order)`, `eta = |k| / (N / 2)`; empty means none.
    filter: Vec<f64>,
}

fn exp_filter(n: usize, order: u32) -> Vec<f64> {
    (0..n)
        .map(|idx| {
            let k = if idx <= n / 2 { idx as f64 } else { n as f64 - idx as f64 };
            (-36.0 * (k / (n as f64 / 2.0)).powi(order as i32)).exp()
        })
        .collect()
}

impl FourierStepper {
    pub fn new(table: CharacteristicTable, eval: FourierEval) -> Self {
        let g = table.grid;
        let fft = Fft2::new(g.n, g.m);
        let nufft = match eval {
            FourierEval::Direct => None,
            FourierEval::Nufft => {
                let xs = wrap_all(&table.foot_x, g.x_min, g.lx());
                let ys = wrap_all(&table.foot_y, g.y_min, g.ly());
                Some(Nufft2::with_spread(&g, &xs, &ys, STEPPER_SPREAD))
            }
        };
        let periodic_x = table.x_period.is_some();
        let inside = table
            .foot_x
            .iter()
            .zip(&table.foot_y)
            .map(|(&x, &y)| (periodic_x || (g.x_min..g.x_max).contains(&x)) && (g.y_min..g.y_max).contains(&y))
            .collect();
        let diffusion = (0..g.n)
            .map(|idx| {
                let k = if idx <= g.n / 2 { idx as f64 } else { idx as f64 - g.n as f64 };
                1.0 / (1.0 + 4.0 * PI * PI * k * k * table.dt / (g.lx() * g.lx()))
            })
            .collect();
        Self { table, inside, fft, nufft, diffusion, filter: Vec::new() }
    }

    /// Adds an exponential filter of the given (even) order in both directions.
    pub fn with_filter(mut self, order: u32) -> Self {
        let g = self.table.grid;
        let (fx, fy) = (exp_filter(g.n, order), exp_filter(g.m, order));
        self.filter = (0..g.len()).map(|k| fx[k % g.n] * fy[k / g.n]).collect();
        self
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn table(&self) -> &CharacteristicTable {
        &self.table
    }

    fn feet_values(&self, field: &SpectralField2D) -> Vec<f64> {
        match &self.nufft {
            Some(nu) => nu.eval(&field.coeffs),
            None => {
                (0..self.table.grid.len()).into_par_iter().map(|k| field.eval_direct(self.table.foot_x[k], self.table.foot_y[k])).collect()
            }
        }
    }

    /// Spectral step with an optional nodal source term.
    pub fn step_spectral(&self, field: &SpectralField2D, source: Option<&[f64]>) -> SpectralField2D {
        let g = self.table.grid;
        let dt = self.table.dt;
        let mut vals = self.feet_values(field);
        for (k, v) in vals.iter_mut().enumerate() {
            *v = if self.inside[k] { *v * self.table.lambda[k] } else { 0.0 };
            if let Some(s) = source {
                *v += dt * s[k];
            }
        }
        let mut next = SpectralField2D::from_values(&vals, g, &self.fft);
        for (k, c) in next.coeffs.iter_mut().enumerate() {
            *c *= self.diffusion[k % g.n];
        }
        if !self.filter.is_empty() {
            next.coeffs.iter_mut().zip(&self.filter).for_each(|(c, f)| *c *= f);
        }
        next
    }
}

/// Reduces periodic box coordinates into `[origin, origin + length)`.
fn wrap_all(v: &[f64], origin: f64, length: f64) -> Vec<f64> {
    v.iter().map(|&c| origin + (c - origin).rem_euclid(length)).collect()
}

impl LinearStepper for FourierStepper {
    fn grid(&self) -> &Grid2D {
        &self.table.grid
    }

    fn dt(&self) -> f64 {
        self.table.dt
    }

    fn advance(&self, p: &[f64], source: Option<&[f64]>) -> Vec<f64> {
        let field = SpectralField2D::from_values(p, self.table.grid, &self.fft);
        self.step_spectral(&field, source).to_values(&self.fft).0
    }
}

/// One spectral step of a density followed by renormalisation of the mean mode.
pub fn step_fourier(field: &SpectralField2D, stepper: &FourierStepper) -> SpectralField2D {
    let mut next = stepper.step_spectral(field, None);
    let mass = next.coeffs[0].re * field.grid.lx() * field.grid.ly();
    if mass != 0.0 {
        let s = 1.0 / mass;
        next.coeffs.iter_mut().for_each(|c| *c *= s);
    }
    next
}

/// Fails with [`Error::Alias`] when the density at the box edges exceeds
/// `threshold` times its maximum.
pub fn check_alias(p: &GridFunction2D, threshold: f64) -> Result<()> {
    let g = &p.grid;
    let mut edge: f64 = 0.0;
    for j in 0..g.m {
        edge = edge.max(p.at(0, j).abs()).max(p.at(g.n - 1, j).abs());
    }
    for i in 0..g.n {
        edge = edge.max(p.at(i, 0).abs()).max(p.at(i, g.m - 1).abs());
    }
    let ratio = edge / p.max_abs().max(f64::MIN_POSITIVE);
    if ratio > threshold {
        Err(Error::Alias { ratio })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FnField, QuarticModel};

    fn smooth(g: Grid2D) -> GridFunction2D {
        GridFunction2D::from_fn(g, |x, y| (-(x - 0.3).powi(2) - 3.0 * (y + 0.1).powi(2) + 0.4 * x * y).exp())
    }

    #[test]
    fn roundtrip_and_direct_sum_on_nodes() {
        let g = Grid2D::new(-4.0, 4.0, -2.0, 2.0, 16, 12).unwrap();
        let fft = Fft2::new(g.n, g.m);
        let p = smooth(g);
        let s = SpectralField2D::from_values(&p.values, g, &fft);
        let (back, rel_im) = s.to_values(&fft);
        assert!(rel_im < 1e-14);
        for (a, b) in back.iter().zip(&p.values) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((s.eval_direct(g.x(3), g.y(5)) - p.at(3, 5)).abs() < 1e-13);
    }

    #[test]
    fn nufft_matches_direct_summation() {
        let g = Grid2D::new(-4.0, 4.0, -2.0, 2.0, 24, 16).unwrap();
        let fft = Fft2::new(g.n, g.m);
        let s = SpectralField2D::from_values(&smooth(g).values, g, &fft);
        let xs: Vec<f64> = (0..50).map(|k| -4.0 + 8.0 * ((k as f64 * 0.618).fract())).collect();
        let ys: Vec<f64> = (0..50).map(|k| -2.0 + 4.0 * ((k as f64 * 0.414 + 0.1).fract())).collect();
        let nu = Nufft2::new(&g, &xs, &ys);
        let fast = nu.eval(&s.coeffs);
        let scale: f64 = s.coeffs.iter().map(|c| c.norm()).sum();
        for k in 0..xs.len() {
            let d = s.eval_direct(xs[k], ys[k]);
            assert!((fast[k] - d).abs() < 1e-11 * scale, "{k}: {} vs {d}", fast[k]);
        }
    }

    #[test]
    fn spectral_derivatives_of_trig_polynomial() {
        let g = Grid2D::new(0.0, 2.0, -1.0, 1.0, 32, 16).unwrap();
        let fft = Fft2::new(g.n, g.m);
        let w = PI;
        let f = GridFunction2D::from_fn(g, |x, y| (w * x).sin() * (2.0 * w * y).cos());
        let dx = spectral_derivative(&f.values, g, &fft, 1, 0);
        let dyy = spectral_derivative(&f.values, g, &fft, 0, 2);
        let d3 = spectral_derivative(&f.values, g, &fft, 1, 3);
        for j in 0..g.m {
            for i in 0..g.n {
                let (x, y) = (g.x(i), g.y(j));
                let k = g.idx(i, j);
                assert!((dx[k] - w * (w * x).cos() * (2.0 * w * y).cos()).abs() < 1e-12);
                assert!((dyy[k] + 4.0 * w * w * f.values[k]).abs() < 1e-11);
                assert!((d3[k] - w * (w * x).cos() * 8.0 * w.powi(3) * (2.0 * w * y).sin()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn filter_spares_resolved_modes() {
        let f = exp_filter(64, 16);
        assert_eq!(f[0], 1.0);
        assert!(1.0 - f[8] < 1e-8);
        assert!((f[32] - (-36.0f64).exp()).abs() < 1e-20);
        assert_eq!(f[1], f[63]);
    }

    #[test]
    fn constant_density_unchanged_by_zero_field() {
        let g = Grid2D::new(0.0, 1.0, 0.0, 1.0, 8, 8).unwrap();
        let f = FnField::new(|_| (0.0, 0.0));
        for eval in [FourierEval::Direct, FourierEval::Nufft] {
            let st = FourierStepper::new(CharacteristicTable::build(&f, g, 0.01), eval);
            let s = SpectralField2D::from_values(&vec![1.0; 64], g, st.fft());
            let n = step_fourier(&s, &st);
            let (v, _) = n.to_values(st.fft());
            assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn pure_diffusion_mode_decay_factor() {
        let g = Grid2D::new(0.0, 2.0, 0.0, 1.0, 16, 8).unwrap();
        let f = FnField::new(|_| (0.0, 0.0));
        let dt = 0.01;
        let st = FourierStepper::new(CharacteristicTable::build(&f, g, dt), FourierEval::Direct);
        let mode = 3.0;
        let vals = GridFunction2D::from_fn(g, |x, _| (TAU * mode * (x - g.x(0)) / g.lx()).cos());
        let s = SpectralField2D::from_values(&vals.values, g, st.fft());
        let n = st.step_spectral(&s, None);
        let factor = 1.0 / (1.0 + 4.0 * PI * PI * mode * mode * dt / (g.lx() * g.lx()));
        let ratio = n.coeffs[3] / s.coeffs[3];
        assert!((ratio.re - factor).abs() < 1e-13 && ratio.im.abs() < 1e-13);
    }

    #[test]
    fn spectral_step_stays_real() {
        let g = Grid2D::new(-5.0, 5.0, -1.0, 1.0, 48, 24).unwrap();
        let q = QuarticModel::new(1.0).unwrap();
        let st = FourierStepper::new(CharacteristicTable::build(&q, g, 1e-3), FourierEval::Nufft);
        let p = GridFunction2D::gaussian(g, 0.0, 0.0, 0.5, 0.2);
        let s = SpectralField2D::from_values(&p.values, g, st.fft());
        let n = step_fourier(&s, &st);
        let (_, rel_im) = n.to_values(st.fft());
        assert!(rel_im < 1e-10);
    }

    #[test]
    fn direct_and_nufft_steps_agree() {
        let g = Grid2D::new(-5.0, 5.0, -1.0, 1.0, 32, 16).unwrap();
        let q = QuarticModel::new(1.5).unwrap();
        let table = CharacteristicTable::build(&q, g, 1e-3);
        let a = FourierStepper::new(table.clone(), FourierEval::Direct);
        let b = FourierStepper::new(table, FourierEval::Nufft);
        let p = GridFunction2D::gaussian(g, 0.0, 0.0, 0.5, 0.2);
        let va = a.advance(&p.values, None);
        let vb = b.advance(&p.values, None);
        assert!(g.l1_distance(&va, &vb) < 1e-8);
    }

    #[test]
    fn alias_check_flags_edge_mass() {
        let g = Grid2D::new(-1.0, 1.0, -1.0, 1.0, 16, 16).unwrap();
        let wide = GridFunction2D::gaussian(g, 0.0, 0.0, 1.0, 1.0);
        assert!(matches!(check_alias(&wide, 1e-12), Err(Error::Alias { .. })));
        let narrow = GridFunction2D::gaussian(g, 0.0, 0.0, 0.05, 0.05);
        assert!(check_alias(&narrow, 1e-12).is_ok());
    }
}
