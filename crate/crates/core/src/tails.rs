//! Marginals, tail fits and the boundary term of a steady density.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp::GridFunction2D;
use crate::model::{ComplexPoint, DriftField};

/// Values below this fraction of the maximum are treated as numerical zero.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    /// Profile along `x = y`, parametrised by the radius.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub axis: Axis,
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
}

impl Marginal {
    /// Trapezoid integral over the coordinates.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.coords, &self.values)
    }

    /// Linear interpolation; zero outside the coordinate range.
    pub fn value_at(&self, c: f64) -> f64 {
        let k = self.coords.partition_point(|&v| v <= c);
        if k == 0 || k == self.coords.len() {
            return if k > 0 && c == self.coords[k - 1] { self.values[k - 1] } else { 0.0 };
        }
        let (c0, c1) = (self.coords[k - 1], self.coords[k]);
        let w = (c - c0) / (c1 - c0);
        (1.0 - w) * self.values[k - 1] + w * self.values[k]
    }

    /// CSV body with header `coord,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("coord,value\n");
        for (c, v) in self.coords.iter().zip(&self.values) {
            s.push_str(&format!("{:.16e},{:.16e}\n", c, v));
        }
        s
    }
}

fn trapezoid(c: &[f64], v: &[f64]) -> f64 {
    c.windows(2).zip(v.windows(2)).map(|(c, v)| 0.5 * (c[1] - c[0]) * (v[0] + v[1])).sum()
}

/// `P_x` and `P_y` by trapezoid integration along the other axis. Negative
/// nodal values (spectral ringing) are clipped before integrating and both
/// marginals are renormalised.
pub fn marginals(p: &GridFunction2D) -> (Marginal, Marginal) {
    let g = p.grid;
    let xs: Vec<f64> = (0..g.n).map(|i| g.x(i)).collect();
    let ys: Vec<f64> = (0..g.m).map(|j| g.y(j)).collect();
    let v = |i: usize, j: usize| p.at(i, j).max(0.0);
    let px: Vec<f64> = (0..g.n).map(|i| trapezoid(&ys, &(0..g.m).map(|j| v(i, j)).collect::<Vec<_>>())).collect();
    let py: Vec<f64> = (0..g.m).map(|j| trapezoid(&xs, &(0..g.n).map(|i| v(i, j)).collect::<Vec<_>>())).collect();
    let norm = |c: Vec<f64>, vals: Vec<f64>, axis| {
        let s = trapezoid(&c, &vals);
        let values = if s > 0.0 { vals.iter().map(|x| x / s).collect() } else { vals };
        Marginal { axis, coords: c, values }
    };
    (norm(xs, px, Axis::X), norm(ys, py, Axis::Y))
}

/// Bilinear samples of `P` along the diagonal `x = y` at radii `dr, 2 dr, ...`
/// (both directions, radius signed), not normalised.
pub fn diagonal_profile(p: &GridFunction2D) -> Marginal {
    let g = p.grid;
    let dr = g.dx().min(g.dy()) * std::f64::consts::SQRT_2;
    let reach = g.x_max.min(g.y_max).min(-g.x_min).min(-g.y_min) * std::f64::consts::SQRT_2;
    let count = (reach / dr).floor() as i64;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for k in -count..=count {
        let r = k as f64 * dr;
        let t = r / std::f64::consts::SQRT_2;
        coords.push(r);
        values.push(bilinear(p, t, t));
    }
    Marginal { axis: Axis::Diagonal, coords, values }
}

fn bilinear(p: &GridFunction2D, x: f64, y: f64) -> f64 {
    let g = p.grid;
    let fx = ((x - g.x_min) / g.dx() - 0.5).clamp(0.0, (g.n - 1) as f64);
    let fy = ((y - g.y_min) / g.dy() - 0.5).clamp(0.0, (g.m - 1) as f64);
    let (i0, j0) = ((fx.floor() as usize).min(g.n - 2), (fy.floor() as usize).min(g.m - 2));
    let (wx, wy) = (fx - i0 as f64, fy - j0 as f64);
    (1.0 - wy) * ((1.0 - wx) * p.at(i0, j0) + wx * p.at(i0 + 1, j0)) + wy * ((1.0 - wx) * p.at(i0, j0 + 1) + wx * p.at(i0 + 1, j0 + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Power,
    Exponential,
    /// `log P` against `1 / eps`.
    Transition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub kind: TailKind,
    /// Decay exponent, decay rate, or `alpha_0` for a transition fit.
    pub exponent: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares line `v = a + b u`; returns `(a, b, r^2, max |residual|)`.
pub fn linear_fit(u: &[f64], v: &[f64]) -> (f64, f64, f64, f64) {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let suu: f64 = u.iter().map(|a| (a - mu).powi(2)).sum();
    let suv: f64 = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum();
    let svv: f64 = v.iter().map(|b| (b - mv).powi(2)).sum();
    let b = suv / suu;
    let a = mv - b * mu;
    let ss_res: f64 = u.iter().zip(v).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let r2 = if svv > 0.0 { (1.0 - ss_res / svv).clamp(0.0, 1.0) } else { 1.0 };
    let worst = u.iter().zip(v).fold(0.0f64, |w, (x, y)| w.max((y - a - b * x).abs()));
    (a, b, r2, worst)
}

/// Points with `lo <= |coord| <= hi` from both sides, checked against the noise floor.
fn window_points(m: &Marginal, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("fit window [{lo}, {hi}] must satisfy 0 <= lo < hi")));
    }
    let max = m.values.iter().fold(0.0f64, |a, v| a.max(*v));
    let pts: Vec<(f64, f64)> =
        m.coords.iter().zip(&m.values).filter(|(c, _)| (lo..=hi).contains(&c.abs())).map(|(&c, &v)| (c, v)).collect();
    if pts.len() < 8 {
        return Err(Error::EmptyWindow { lo, hi, count: pts.len() });
    }
    if let Some(&(c, _)) = pts.iter().find(|(_, v)| !(*v > NOISE_FLOOR * max)) {
        return Err(Error::NonPositiveValues { at: c });
    }
    Ok(pts)
}

/// `m(c) ~ A |c|^{-beta}` fitted on `lo <= |c| <= hi`, both sides pooled.
pub fn fit_power_tail(m: &Marginal, lo: f64, hi: f64) -> Result<TailFit> {
    let pts = window_points(m, lo, hi)?;
    if lo <= 0.0 {
        return Err(Error::InvalidParameter("power fit window must exclude the origin".into()));
    }
    let u: Vec<f64> = pts.iter().map(|(c, _)| c.abs().ln()).collect();
    let v: Vec<f64> = pts.iter().map(|(_, p)| p.ln()).collect();
    let (a, b, r2, _) = linear_fit(&u, &v);
    Ok(TailFit { kind: TailKind::Power, exponent: -b, amplitude: a.exp(), window: (lo, hi), r_squared: r2, n_points: pts.len() })
}

/// `m(c) ~ A e^{-rate |c|}` fitted on `lo <= |c| <= hi`, both sides pooled.
pub fn fit_exp_tail(m: &Marginal, lo: f64, hi: f64) -> Result<TailFit> {
    let pts = window_points(m, lo, hi)?;
    let u: Vec<f64> = pts.iter().map(|(c, _)| c.abs()).collect();
    let v: Vec<f64> = pts.iter().map(|(_, p)| p.ln()).collect();
    let (a, b, r2, _) = linear_fit(&u, &v);
    Ok(TailFit { kind: TailKind::Exponential, exponent: -b, amplitude: a.exp(), window: (lo, hi), r_squared: r2, n_points: pts.len() })
}

/// `log v = log A + alpha_0 / eps`. Points below [`NOISE_FLOOR`] (absolute,
/// the values are already normalised densities) are dropped; at least five must remain.
pub fn fit_transition_constant(eps: &[f64], values: &[f64]) -> Result<TailFit> {
    if eps.len() != values.len() || eps.iter().any(|e| *e == 0.0 || !e.is_finite()) {
        return Err(Error::InvalidParameter("need matching, finite, non-zero eps values".into()));
    }
    let pts: Vec<(f64, f64)> = eps.iter().zip(values).filter(|(_, v)| **v > NOISE_FLOOR).map(|(&e, &v)| (e, v)).collect();
    if pts.len() < 5 {
        return Err(Error::BelowNoiseFloor { floor: NOISE_FLOOR });
    }
    let u: Vec<f64> = pts.iter().map(|(e, _)| 1.0 / e).collect();
    let v: Vec<f64> = pts.iter().map(|(_, p)| p.ln()).collect();
    let (a, b, r2, _) = linear_fit(&u, &v);
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(TailFit { kind: TailKind::Transition, exponent: b, amplitude: a.exp(), window: (lo, hi), r_squared: r2, n_points: pts.len() })
}

/// `E(y) = \int J(x, y) O(x + iy) P(x, y) dx` on the grid row nearest `y`.
pub fn boundary_term(p: &GridFunction2D, field: &dyn DriftField, obs: impl Fn(Complex64) -> Complex64, y: f64) -> Result<Complex64> {
    let g = p.grid;
    let j = g.row_of(y)?;
    let yj = g.y(j);
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &v) in p.row(j).iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let pt = ComplexPoint::new(g.x(i), yj);
        let (_, jv) = field.drift(pt)?;
        acc += jv * obs(pt.z()) * v;
    }
    Ok(acc * g.dx())
}

/// Large-`y` boundary term of the quartic model with `O = z^2` for a density
/// `P ~ C / (x^2 + y^2)^3`.
pub fn boundary_term_limit(c: f64, b: f64, y: f64) -> Complex64 {
    -c * PI * Complex64::new(4.0 * y * y - 1.0, b) / (4.0 * y * y)
}

/// `C` of `P ~ C / (x^2 + y^2)^3` from the amplitude `A` of `P_y ~ A |y|^{-5}`,
/// using `\int (x^2 + y^2)^{-3} dx = 3 pi / (8 |y|^5)`.
pub fn radial_amplitude_from_marginal(a: f64) -> f64 {
    8.0 * a / (3.0 * PI)
}
