//! Finite-difference backend: bilinear interpolation at the characteristic
//! feet, then an implicit diffusion solve along x for every row.

use rayon::prelude::*;

use super::characteristics::CharacteristicTable;
use super::grid::{Grid2D, GridFunction2D};
use super::tridiag::ImplicitDiffusion;
use super::LinearStepper;

/// Bilinear weights of one foot point: four node indices and their weights.
/// Indices of nodes outside the domain carry zero weight.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    idx: [u32; 4],
    w: [f64; 4],
}

pub struct FdStepper {
    table: CharacteristicTable,
    stencils: Vec<Stencil>,
    solver: ImplicitDiffusion,
}

impl FdStepper {
    pub fn new(table: CharacteristicTable) -> Self {
        let g = table.grid;
        let periodic = table.x_period.is_some();
        let stencils = (0..g.len()).map(|k| stencil(&g, table.foot_x[k], table.foot_y[k], table.x_period)).collect();
        let r = table.dt / (g.dx() * g.dx());
        let solver = ImplicitDiffusion::new(g.n, r, periodic);
        Self { table, stencils, solver }
    }

    pub fn table(&self) -> &CharacteristicTable {
        &self.table
    }
}

fn stencil(g: &Grid2D, x: f64, y: f64, period: Option<f64>) -> Stencil {
    let fx = (x - g.x_min) / g.dx() - 0.5;
    let fy = (y - g.y_min) / g.dy() - 0.5;
    let i0 = fx.floor();
    let j0 = fy.floor();
    let tx = fx - i0;
    let ty = fy - j0;
    let mut st = Stencil { idx: [0; 4], w: [0.0; 4] };
    let corners = [(0, 0, (1.0 - tx) * (1.0 - ty)), (1, 0, tx * (1.0 - ty)), (0, 1, (1.0 - tx) * ty), (1, 1, tx * ty)];
    for (c, &(di, dj, w)) in corners.iter().enumerate() {
        let j = j0 as i64 + dj;
        let mut i = i0 as i64 + di;
        if period.is_some() {
            i = i.rem_euclid(g.n as i64);
        }
        if i < 0 || i >= g.n as i64 || j < 0 || j >= g.m as i64 || !w.is_finite() {
            continue;
        }
        st.idx[c] = (j as usize * g.n + i as usize) as u32;
        st.w[c] = w;
    }
    st
}

impl LinearStepper for FdStepper {
    fn grid(&self) -> &Grid2D {
        &self.table.grid
    }

    fn dt(&self) -> f64 {
        self.table.dt
    }

    fn advance(&self, p: &[f64], source: Option<&[f64]>) -> Vec<f64> {
        let g = self.table.grid;
        let dt = self.table.dt;
        let mut out = vec![0.0; g.len()];
        out.par_chunks_mut(g.n).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                let k = j * g.n + i;
                let s = &self.stencils[k];
                let interp = s.w[0] * p[s.idx[0] as usize]
                    + s.w[1] * p[s.idx[1] as usize]
                    + s.w[2] * p[s.idx[2] as usize]
                    + s.w[3] * p[s.idx[3] as usize];
                *v = self.table.lambda[k] * interp;
                if let Some(src) = source {
                    *v += dt * src[k];
                }
            }
            self.solver.solve(row);
        });
        out
    }
}

/// Outcome of one density step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Integral before renormalisation.
    pub mass_before: f64,
    /// Integral of the negative part removed by clipping.
    pub clipped_mass: f64,
}

/// One finite-difference step of a density: advance, clip negatives, renormalise.
pub fn step_fd(p: &GridFunction2D, stepper: &FdStepper) -> (GridFunction2D, StepReport) {
    let g = p.grid;
    let mut values = stepper.advance(&p.values, None);
    let mut clipped = 0.0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            clipped -= *v;
            *v = 0.0;
        }
    }
    let mut next = GridFunction2D { grid: g, values, time: p.time + stepper.dt() };
    let mass_before = next.integral();
    next.renormalize();
    (next, StepReport { mass_before, clipped_mass: clipped * g.cell_area() })
}
