use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell-centred grid on `[x_min, x_max] x [y_min, y_max]`.
///
/// Node `(i, j)` sits at the centre of cell `(i, j)`; values are stored
/// row-major with `x` fastest, index `j * n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n: usize,
    pub m: usize,
}

impl Grid2D {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, n: usize, m: usize) -> Result<Self> {
        if n < 8 || m < 8 {
            return Err(Error::InvalidParameter(format!("grid needs at least 8x8 cells, got {n}x{m}")));
        }
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_max <= x_min || y_max <= y_min {
            return Err(Error::InvalidParameter("grid bounds must be finite and ordered".into()));
        }
        Ok(Self { x_min, x_max, y_min, y_max, n, m })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.m as f64
    }

    pub fn lx(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn ly(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + (j as f64 + 0.5) * self.dy()
    }

    pub fn len(&self) -> usize {
        self.n * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Row index whose node is closest to `y`.
    pub fn row_of(&self, y: f64) -> Result<usize> {
        let f = (y - self.y_min) / self.dy() - 0.5;
        let j = f.round();
        if !(0.0..self.m as f64).contains(&j) {
            return Err(Error::RowOutOfRange { y });
        }
        Ok(j as usize)
    }

    /// Integral of nodal values by the midpoint rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_area()
    }

    /// L1 norm of nodal values.
    pub fn l1(&self, values: &[f64]) -> f64 {
        values.iter().map(|v| v.abs()).sum::<f64>() * self.cell_area()
    }

    /// L1 distance between two nodal fields.
    pub fn l1_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum::<f64>() * self.cell_area()
    }
}

/// Nodal values of a density on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction2D {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GridFunction2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.len()], time: 0.0 }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.m {
            for i in 0..grid.n {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self { grid, values, time: 0.0 }
    }

    /// Product Gaussian `N(x0, sx^2) N(y0, sy^2)`, renormalised on the grid.
    pub fn gaussian(grid: Grid2D, x0: f64, y0: f64, sx: f64, sy: f64) -> Self {
        let mut g = Self::from_fn(grid, |x, y| (-0.5 * ((x - x0) / sx).powi(2) - 0.5 * ((y - y0) / sy).powi(2)).exp());
        g.renormalize();
        g
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.grid.n..(j + 1) * self.grid.n]
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn renormalize(&mut self) {
        let s = self.integral();
        if s != 0.0 {
            self.values.iter_mut().for_each(|v| *v /= s);
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `\int\int O(x + iy) P(x, y) dx dy`.
    pub fn expectation(&self, obs: impl Fn(Complex64) -> Complex64) -> Complex64 {
        let g = &self.grid;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..g.m {
            let y = g.y(j);
            for i in 0..g.n {
                let v = self.values[g.idx(i, j)];
                if v != 0.0 {
                    acc += obs(Complex64::new(g.x(i), y)) * v;
                }
            }
        }
        acc * g.cell_area()
    }

    /// Integral of `|P|` over nodes with `|y| > y_cut`, relative to the total `|P|`.
    pub fn relative_mass_outside(&self, y_cut: f64) -> f64 {
        let g = &self.grid;
        let mut out = 0.0;
        for j in 0..g.m {
            if g.y(j).abs() > y_cut {
                out += self.row(j).iter().map(|v| v.abs()).sum::<f64>();
            }
        }
        let total: f64 = self.values.iter().map(|v| v.abs()).sum();
        if total == 0.0 {
            0.0
        } else {
            out / total
        }
    }

    /// Largest `|P|` on rows with `|y| > y_cut`, relative to `max |P|`.
    pub fn relative_max_outside(&self, y_cut: f64) -> f64 {
        let g = &self.grid;
        let mut out: f64 = 0.0;
        for j in 0..g.m {
            if g.y(j).abs() > y_cut {
                out = self.row(j).iter().fold(out, |a, v| a.max(v.abs()));
            }
        }
        let mx = self.max_abs();
        if mx == 0.0 {
            0.0
        } else {
            out / mx
        }
    }

    /// CSV body with header `x,y,p`.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut s = String::with_capacity(g.len() * 72);
        s.push_str("x,y,p\n");
        for j in 0..g.m {
            for i in 0..g.n {
                s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", g.x(i), g.y(j), self.at(i, j)));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(Grid2D::new(0.0, 1.0, 0.0, 1.0, 4, 16).is_err());
        assert!(Grid2D::new(1.0, 0.0, 0.0, 1.0, 16, 16).is_err());
        assert!(Grid2D::new(0.0, f64::NAN, 0.0, 1.0, 16, 16).is_err());
    }

    #[test]
    fn nodes_are_cell_centred() {
        let g = Grid2D::new(-1.0, 1.0, -2.0, 2.0, 10, 8).unwrap();
        assert!((g.x(0) + 0.9).abs() < 1e-15);
        assert!((g.y(7) - 1.75).abs() < 1e-15);
        assert_eq!(g.row_of(1.7).unwrap(), 7);
        assert!(g.row_of(2.5).is_err());
    }

    #[test]
    fn gaussian_is_normalised_with_right_moments() {
        let g = Grid2D::new(-6.0, 6.0, -3.0, 3.0, 240, 240).unwrap();
        let p = GridFunction2D::gaussian(g, 0.0, 0.0, 0.5, 0.25);
        assert!((p.integral() - 1.0).abs() < 1e-14);
        let m = p.expectation(|z| Complex64::new(z.re * z.re, z.im * z.im));
        assert!((m.re - 0.25).abs() < 1e-10 && (m.im - 0.0625).abs() < 1e-10);
    }
}
