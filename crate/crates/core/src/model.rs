//! Model actions, their complexified drift fields and exact reference values.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// A point `z = x + i y` of the complexified configuration space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub x: f64,
    pub y: f64,
}

impl ComplexPoint {
    pub const ORIGIN: ComplexPoint = ComplexPoint { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Real and imaginary velocity of the complex Langevin flow.
pub trait DriftField: Send + Sync {
    /// Returns `(K, J)` at `p`.
    fn drift(&self, p: ComplexPoint) -> Result<(f64, f64)>;

    /// Returns `f = dK/dx + dJ/dy`. The default uses central differences.
    fn divergence(&self, p: ComplexPoint) -> Result<f64> {
        let h = 1e-5;
        let (kp, _) = self.drift(ComplexPoint::new(p.x + h, p.y))?;
        let (km, _) = self.drift(ComplexPoint::new(p.x - h, p.y))?;
        let (_, jp) = self.drift(ComplexPoint::new(p.x, p.y + h))?;
        let (_, jm) = self.drift(ComplexPoint::new(p.x, p.y - h))?;
        Ok((kp - km + jp - jm) / (2.0 * h))
    }

    /// Period of the x coordinate, if it is compact.
    fn x_period(&self) -> Option<f64> {
        None
    }
}

/// `S(x) = (1 + iB) x^2 / 2 + x^4 / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticModel {
    b: f64,
}

impl QuarticModel {
    /// Negative `B` is rejected; it maps to `y -> -y`.
    pub fn new(b: f64) -> Result<Self> {
        if !b.is_finite() || b < 0.0 {
            return Err(Error::InvalidParameter(format!("B must be finite and >= 0, got {b}")));
        }
        Ok(Self { b })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn action(&self, z: Complex64) -> Complex64 {
        0.5 * Complex64::new(1.0, self.b) * z * z + 0.25 * z.powi(4)
    }

    pub fn action_derivative(&self, z: Complex64) -> Complex64 {
        Complex64::new(1.0, self.b) * z + z.powi(3)
    }
}

impl DriftField for QuarticModel {
    fn drift(&self, p: ComplexPoint) -> Result<(f64, f64)> {
        Ok(drift_quartic(p, self.b))
    }

    fn divergence(&self, p: ComplexPoint) -> Result<f64> {
        Ok(-2.0 * (1.0 + 3.0 * p.x * p.x - 3.0 * p.y * p.y))
    }
}

/// `(K, J)` for the quartic action.
pub fn drift_quartic(p: ComplexPoint, b: f64) -> (f64, f64) {
    let (x, y) = (p.x, p.y);
    let k = -(x - b * y + x * x * x - 3.0 * x * y * y);
    let j = -(y + b * x + 3.0 * x * x * y - y * y * y);
    (k, j)
}

/// Half-width of the strip `|y| <= alpha` that confines the quartic flow.
pub fn strip_half_width(b: f64) -> Result<f64> {
    let limit = 3f64.sqrt();
    // Allow roundoff when the caller passes sqrt(3) computed another way.
    if !(0.0..=limit + 1e-12).contains(&b) {
        return Err(Error::Domain(format!("no confining strip for B = {b} (need 0 <= B <= sqrt 3)")));
    }
    // sqrt 3 is not representable; its nearest doubles are treated as the endpoint.
    let inner = if (b - limit).abs() < 1e-12 { 0.0 } else { (1.0 - b * b / 3.0).max(0.0).sqrt() };
    Ok(std::f64::consts::FRAC_1_SQRT_2 * (1.0 - inner).sqrt())
}

/// Default pole guard on `|cosh 2y - cos 2x|`.
pub const SU2_POLE_EPS: f64 = 1e-10;

/// One-link SU(2) model `S(U) = -(A + iB) tr U` in eigenvalue-angle coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su2OneLinkModel {
    a: f64,
    b: f64,
    pole_eps: f64,
}

impl Su2OneLinkModel {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("A must be > 0, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidParameter(format!("B must be >= 0, got {b}")));
        }
        Ok(Self { a, b, pole_eps: SU2_POLE_EPS })
    }

    pub fn with_pole_eps(mut self, eps: f64) -> Self {
        self.pole_eps = eps;
        self
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// The observable `e^{iz} + e^{-iz} = tr U`.
    pub fn observable(z: Complex64) -> Complex64 {
        2.0 * z.cos()
    }
}

/// Reduces `x` to `[0, period)`.
pub fn wrap_periodic(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    // rem_euclid can round up to `period` for tiny negative inputs.
    if r >= period {
        0.0
    } else {
        r
    }
}

/// `(K, J)` for the one-link SU(2) model.
pub fn drift_su2(p: ComplexPoint, a: f64, b: f64, pole_eps: f64) -> Result<(f64, f64)> {
    let (x, y) = (p.x, p.y);
    let d = (2.0 * y).cosh() - (2.0 * x).cos();
    if d.abs() < pole_eps {
        return Err(Error::Pole { x, y, gap: d.abs() });
    }
    let (sx, cx) = x.sin_cos();
    let (shy, chy) = (y.sinh(), y.cosh());
    let k = 2.0 * (-a * chy * sx + b * shy * cx + (2.0 * x).sin() / d);
    let j = -2.0 * (a * shy * cx + b * chy * sx + (2.0 * y).sinh() / d);
    Ok((k, j))
}

impl DriftField for Su2OneLinkModel {
    fn drift(&self, p: ComplexPoint) -> Result<(f64, f64)> {
        drift_su2(p, self.a, self.b, self.pole_eps)
    }

    fn divergence(&self, p: ComplexPoint) -> Result<f64> {
        let (x, y) = (p.x, p.y);
        let d = (2.0 * y).cosh() - (2.0 * x).cos();
        if d.abs() < self.pole_eps {
            return Err(Error::Pole { x, y, gap: d.abs() });
        }
        // dK/dx = dJ/dy by holomorphy.
        let dkdx =
            2.0 * (-self.a * y.cosh() * x.cos() - self.b * y.sinh() * x.sin() + 2.0 * ((2.0 * x).cos() * (2.0 * y).cosh() - 1.0) / (d * d));
        Ok(2.0 * dkdx)
    }

    fn x_period(&self) -> Option<f64> {
        Some(TAU)
    }
}

/// A drift field given by a closure, mainly for tests and check problems.
pub struct FnField<F> {
    f: F,
    period: Option<f64>,
}

impl<F> FnField<F>
where
    F: Fn(ComplexPoint) -> (f64, f64) + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f, period: None }
    }

    pub fn periodic(f: F, period: f64) -> Self {
        Self { f, period: Some(period) }
    }
}

impl<F> DriftField for FnField<F>
where
    F: Fn(ComplexPoint) -> (f64, f64) + Send + Sync,
{
    fn drift(&self, p: ComplexPoint) -> Result<(f64, f64)> {
        Ok((self.f)(p))
    }

    fn x_period(&self) -> Option<f64> {
        self.period
    }
}

/// Quadrature tolerance for the exact oracles.
pub const ORACLE_TOL: f64 = 1e-12;
/// Truncation radius for the quartic weight.
pub const QUARTIC_RADIUS: f64 = 10.0;

/// `<O>` under `exp(-S)` on the real axis, truncated to `[-radius, radius]`.
pub fn exact_expectation_quartic_with_radius<O>(b: f64, obs: O, radius: f64) -> Result<Complex64>
where
    O: Fn(Complex64) -> Complex64,
{
    let model = QuarticModel::new(b)?;
    let w = |x: f64| (-model.action(Complex64::new(x, 0.0))).exp();
    // Split at the origin and at +-2 where most of the weight sits.
    let cuts = [-radius, -2.0, 0.0, 2.0, radius];
    let mut z = Complex64::new(0.0, 0.0);
    let mut num = Complex64::new(0.0, 0.0);
    for win in cuts.windows(2) {
        z += quadrature::integrate(w, win[0], win[1], ORACLE_TOL / 8.0)?;
        num += quadrature::integrate(|x| obs(Complex64::new(x, 0.0)) * w(x), win[0], win[1], ORACLE_TOL / 8.0)?;
    }
    Ok(num / z)
}

/// `<O>` for the quartic model.
pub fn exact_expectation_quartic<O>(b: f64, obs: O) -> Result<Complex64>
where
    O: Fn(Complex64) -> Complex64,
{
    exact_expectation_quartic_with_radius(b, obs, QUARTIC_RADIUS)
}

/// `<tr U>` for the one-link SU(2) model, as a Haar class-function integral.
pub fn exact_expectation_su2(a: f64, b: f64) -> Result<Complex64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter("A and B must be finite".into()));
    }
    let c = Complex64::new(a, b);
    let w = |x: f64| (2.0 * c * x.cos()).exp() * x.sin().powi(2);
    let mut z = Complex64::new(0.0, 0.0);
    let mut num = Complex64::new(0.0, 0.0);
    for k in 0..4 {
        let (lo, hi) = (k as f64 * PI / 2.0, (k + 1) as f64 * PI / 2.0);
        z += quadrature::integrate(w, lo, hi, ORACLE_TOL / 4.0)?;
        num += quadrature::integrate(|x| 2.0 * x.cos() * w(x), lo, hi, ORACLE_TOL / 4.0)?;
    }
    Ok(num / z)
}

/// Largest Cauchy-Riemann defect of `field` at `p`, by central differences.
pub fn cr_residual(field: &dyn DriftField, p: ComplexPoint, h: f64) -> Result<f64> {
    let (kxp, jxp) = field.drift(ComplexPoint::new(p.x + h, p.y))?;
    let (kxm, jxm) = field.drift(ComplexPoint::new(p.x - h, p.y))?;
    let (kyp, jyp) = field.drift(ComplexPoint::new(p.x, p.y + h))?;
    let (kym, jym) = field.drift(ComplexPoint::new(p.x, p.y - h))?;
    let kx = (kxp - kxm) / (2.0 * h);
    let jx = (jxp - jxm) / (2.0 * h);
    let ky = (kyp - kym) / (2.0 * h);
    let jy = (jyp - jym) / (2.0 * h);
    Ok((kx - jy).abs().max((ky + jx).abs()))
}
