use rayon::prelude::*;

use super::grid::Grid2D;
use crate::error::Result;
use crate::model::{ComplexPoint, DriftField};

/// One RK4 step of the backward characteristic ODE from `(x, y)` over `h`.
fn rk4_back(field: &dyn DriftField, x: f64, y: f64, h: f64) -> Result<(f64, f64)> {
    let v = |x: f64, y: f64| -> Result<(f64, f64)> {
        let (k, j) = field.drift(ComplexPoint::new(x, y))?;
        Ok((-k, -j))
    };
    let (k1x, k1y) = v(x, y)?;
    let (k2x, k2y) = v(x + 0.5 * h * k1x, y + 0.5 * h * k1y)?;
    let (k3x, k3y) = v(x + 0.5 * h * k2x, y + 0.5 * h * k2y)?;
    let (k4x, k4y) = v(x + h * k3x, y + h * k3y)?;
    Ok((x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x), y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)))
}

/// Traces the characteristic through `(x, y)` back over `dt`.
///
/// Returns the foot `(x~, y~)` and `lambda = exp(-\int f ds)` along the
/// characteristic, with `f = dK/dx + dJ/dy` integrated by Simpson's rule
/// on the start, midpoint and foot.
pub fn backtrace(field: &dyn DriftField, x: f64, y: f64, dt: f64) -> Result<(f64, f64, f64)> {
    let (fx, fy) = rk4_back(field, x, y, dt)?;
    let (mx, my) = rk4_back(field, x, y, 0.5 * dt)?;
    let f0 = field.divergence(ComplexPoint::new(x, y))?;
    let fm = field.divergence(ComplexPoint::new(mx, my))?;
    let f1 = field.divergence(ComplexPoint::new(fx, fy))?;
    let integral = dt / 6.0 * (f0 + 4.0 * fm + f1);
    Ok((fx, fy, (-integral).exp()))
}

/// Backtrace split into `substeps` pieces; used near drift poles.
pub fn backtrace_substeps(field: &dyn DriftField, x: f64, y: f64, dt: f64, substeps: usize) -> Result<(f64, f64, f64)> {
    let h = dt / substeps as f64;
    let (mut cx, mut cy, mut lam) = (x, y, 1.0);
    for _ in 0..substeps {
        let (nx, ny, l) = backtrace(field, cx, cy, h)?;
        cx = nx;
        cy = ny;
        lam *= l;
    }
    Ok((cx, cy, lam))
}

/// Foot and Jacobian factor of one node, plus whether it met a pole.
///
/// Stiff nodes (`dt |f|` large) are split into substeps. A characteristic
/// that escapes to infinity within `dt` carries no density: lambda = 0.
fn trace_node(field: &dyn DriftField, x: f64, y: f64, dt: f64) -> (f64, f64, f64, bool) {
    let finite = |r: &(f64, f64, f64)| r.0.is_finite() && r.1.is_finite() && r.2.is_finite();
    if let Ok(f) = field.divergence(ComplexPoint::new(x, y)) {
        let s = (dt * f.abs() / STIFF_STEP).ceil().clamp(1.0, MAX_SUBSTEPS as f64) as usize;
        match backtrace_substeps(field, x, y, dt, s) {
            Ok(r) if finite(&r) => return (r.0, r.1, r.2, false),
            Ok(_) => return (x, y, 0.0, false),
            Err(_) => {}
        }
    }
    for s in [4, 16, 64, 256] {
        if let Ok(r) = backtrace_substeps(field, x, y, dt, s) {
            return if finite(&r) { (r.0, r.1, r.2, true) } else { (x, y, 0.0, true) };
        }
    }
    // Sitting on a pole: freeze the node.
    (x, y, 1.0, true)
}

const STIFF_STEP: f64 = 0.5;
const MAX_SUBSTEPS: usize = 4096;

/// Foot points and Jacobian factors for every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicTable {
    pub grid: Grid2D,
    pub dt: f64,
    pub foot_x: Vec<f64>,
    pub foot_y: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Nodes whose characteristic met a pole; they needed substeps or were frozen.
    pub flagged: usize,
    /// Period of x, if the field is periodic in x.
    pub x_period: Option<f64>,
}

impl CharacteristicTable {
    pub fn build(field: &dyn DriftField, grid: Grid2D, dt: f64) -> Self {
        let rows: Vec<Vec<(f64, f64, f64, bool)>> = (0..grid.m)
            .into_par_iter()
            .map(|j| {
                let y = grid.y(j);
                (0..grid.n).map(|i| trace_node(field, grid.x(i), y, dt)).collect()
            })
            .collect();
        let mut t = Self {
            grid,
            dt,
            foot_x: Vec::with_capacity(grid.len()),
            foot_y: Vec::with_capacity(grid.len()),
            lambda: Vec::with_capacity(grid.len()),
            flagged: 0,
            x_period: field.x_period(),
        };
        for (a, b, l, f) in rows.into_iter().flatten() {
            t.foot_x.push(a);
            t.foot_y.push(b);
            t.lambda.push(l);
            t.flagged += f as usize;
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FnField, QuarticModel};

    #[test]
    fn zero_field_is_stationary() {
        let f = FnField::new(|_| (0.0, 0.0));
        let (x, y, l) = backtrace(&f, 0.3, -0.7, 0.01).unwrap();
        assert_eq!((x, y, l), (0.3, -0.7, 1.0));
    }

    #[test]
    fn rigid_rotation_foot_and_unit_jacobian() {
        let f = FnField::new(|p: ComplexPoint| (-p.y, p.x));
        let dt = 0.01;
        let (x, y, l) = backtrace(&f, 1.0, 0.5, dt).unwrap();
        let (s, c) = (-dt).sin_cos();
        let (ex, ey) = (c * 1.0 - s * 0.5, s * 1.0 + c * 0.5);
        assert!((x - ex).abs() < 1e-12 && (y - ey).abs() < 1e-12);
        assert!((l - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quartic_matches_fine_step_reference() {
        let q = QuarticModel::new(1.0).unwrap();
        let dt = 1e-3;
        let (x, y, l) = backtrace(&q, 1.0, 0.2, dt).unwrap();
        let (rx, ry, rl) = backtrace_substeps(&q, 1.0, 0.2, dt, 1000).unwrap();
        assert!((x - rx).abs() < 1e-9 && (y - ry).abs() < 1e-9);
        assert!((l - rl).abs() < 1e-9);
    }

    #[test]
    fn jacobian_tracks_area_change() {
        // Linear contraction K = -x, J = -2y has f = -3, so lambda = e^{3 dt}.
        let f = FnField::new(|p: ComplexPoint| (-p.x, -2.0 * p.y));
        let (_, _, l) = backtrace(&f, 0.4, 0.1, 0.05).unwrap();
        assert!((l - (0.15f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn escaping_characteristic_carries_no_density() {
        // Backwards, y' = y^2 blows up at s = 1/y.
        let f = FnField::new(|p: ComplexPoint| (0.0, -p.y * p.y));
        let g = Grid2D::new(-1.0, 1.0, 9.0, 11.0, 8, 8).unwrap();
        let t = CharacteristicTable::build(&f, g, 1.0);
        assert!(t.lambda.iter().all(|&l| l == 0.0));
        assert!(t.foot_x.iter().chain(&t.foot_y).all(|v| v.is_finite()));
        let t = CharacteristicTable::build(&f, g, 1e-3);
        assert!(t.lambda.iter().all(|&l| l > 0.0 && l.is_finite()), "{:?}", t.lambda);
    }

    #[test]
    fn stiff_nodes_match_fine_reference() {
        let s = crate::model::Su2OneLinkModel::new(1.0, 3.0).unwrap();
        let (x, y, dt) = (1.0, 4.5, 1e-3);
        let (a, b, l, _) = trace_node(&s, x, y, dt);
        let (ra, rb, rl) = backtrace_substeps(&s, x, y, dt, 2000).unwrap();
        assert!((a - ra).abs() < 1e-6 && (b - rb).abs() < 1e-6, "{a} {b} vs {ra} {rb}");
        assert!((l / rl - 1.0).abs() < 1e-4);
    }
}
