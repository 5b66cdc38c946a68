//! Serialisable records for estimates, fits, expansion coefficients and
//! steady-state metadata.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fp::{Backend, Grid2D, SteadyState};
use crate::sampler::ObservableEstimate;
use crate::tails::{TailFit, TailKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub mean_re: f64,
    pub mean_im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_samples: usize,
    pub n_effective: f64,
    pub overflow_count: usize,
    pub seed: u64,
}

impl EstimateRecord {
    pub fn new(model: &str, params: &[(&str, f64)], est: &ObservableEstimate, overflow_count: usize, seed: u64) -> Self {
        Self {
            model: model.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            mean_re: est.mean.re,
            mean_im: est.mean.im,
            stderr_re: est.stderr.re,
            stderr_im: est.stderr.im,
            n_samples: est.n_samples,
            n_effective: est.n_effective,
            overflow_count,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub kind: TailKind,
    pub exponent: f64,
    pub amplitude: f64,
    pub window: [f64; 2],
    pub r2: f64,
    pub n_points: usize,
}

impl From<&TailFit> for FitRecord {
    fn from(f: &TailFit) -> Self {
        Self {
            kind: f.kind,
            exponent: f.exponent,
            amplitude: f.amplitude,
            window: [f.window.0, f.window.1],
            r2: f.r_squared,
            n_points: f.n_points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub k_over_2: f64,
    pub re: f64,
    pub im: f64,
}

/// `[{k_over_2, re, im}]` for coefficients of `eps^{k/2}`, `k = 0, 1, ...`.
pub fn coefficient_table(coeffs: &[Complex64]) -> Vec<CoefficientRecord> {
    coeffs.iter().enumerate().map(|(k, c)| CoefficientRecord { k_over_2: k as f64 / 2.0, re: c.re, im: c.im }).collect()
}

/// Metadata written next to a steady-state CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub grid: Grid2D,
    pub backend: Backend,
    pub dt: f64,
    pub residual: f64,
    pub step_multiplier: f64,
    pub max_clipped_mass: f64,
    pub flagged_nodes: usize,
}

impl From<&SteadyState> for GridSidecar {
    fn from(s: &SteadyState) -> Self {
        Self {
            grid: s.p.grid,
            backend: s.backend,
            dt: s.dt,
            residual: s.residual,
            step_multiplier: s.step_multiplier,
            max_clipped_mass: s.max_clipped_mass,
            flagged_nodes: s.flagged_nodes,
        }
    }
}
