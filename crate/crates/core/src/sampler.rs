//! Euler-Maruyama integration of the complex Langevin equation and
//! observable estimates with batch-means error bars.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{wrap_periodic, ComplexPoint, DriftField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub dt: f64,
    /// Burn-in time `T`.
    pub burn_in: f64,
    /// Time between recorded samples.
    pub thin: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub overflow_threshold: f64,
    pub initial_point: ComplexPoint,
    /// Give up after this many overflow restarts.
    pub max_restarts: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            burn_in: 10.0,
            thin: 0.05,
            n_samples: 10_000,
            seed: 0,
            overflow_threshold: 1e6,
            initial_point: ComplexPoint::ORIGIN,
            max_restarts: 1000,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.thin < self.dt {
            return Err(Error::InvalidParameter("thinning interval must be >= dt".into()));
        }
        if !(self.burn_in >= 0.0) || !(self.overflow_threshold > 0.0) || !self.initial_point.is_finite() {
            return Err(Error::InvalidParameter("burn-in, overflow threshold and initial point must be valid".into()));
        }
        Ok(())
    }

    fn steps_per(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }
}

/// Why a single step was not taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure {
    Overflow,
    Pole,
}

/// `x' = x + K dt + sqrt(2 dt) eta`, `y' = y + J dt`.
pub fn step_euler_maruyama<R: Rng + ?Sized>(
    p: ComplexPoint,
    field: &dyn DriftField,
    dt: f64,
    overflow_threshold: f64,
    rng: &mut R,
) -> std::result::Result<ComplexPoint, StepFailure> {
    let (k, j) = field.drift(p).map_err(|_| StepFailure::Pole)?;
    let eta: f64 = rng.sample(StandardNormal);
    let mut x = p.x + k * dt + (2.0 * dt).sqrt() * eta;
    let y = p.y + j * dt;
    if !(x.abs() <= overflow_threshold && y.abs() <= overflow_threshold) {
        return Err(StepFailure::Overflow);
    }
    if let Some(period) = field.x_period() {
        x = wrap_periodic(x, period);
    }
    Ok(ComplexPoint::new(x, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<ComplexPoint>,
    pub times: Vec<f64>,
    pub overflow_count: usize,
    pub pole_rejections: usize,
    /// Set when the restart cap was hit before all samples were drawn.
    pub truncated: bool,
    pub config: SamplerConfig,
}

impl Trajectory {
    /// CSV body with header `t,x,y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,y\n");
        for (t, p) in self.times.iter().zip(&self.samples) {
            s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", t, p.x, p.y));
        }
        s
    }

    pub fn max_abs_y(&self) -> f64 {
        self.samples.iter().fold(0.0, |a, p| a.max(p.y.abs()))
    }
}

/// Runs one chain: burn-in, then one sample every `thin`. An overflow
/// restarts the chain (including burn-in) from the initial point; samples
/// already recorded are kept.
pub fn run_chain(field: &dyn DriftField, cfg: &SamplerConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let burn = cfg.steps_per(cfg.burn_in);
    let thin = cfg.steps_per(cfg.thin).max(1);
    let mut traj = Trajectory {
        samples: Vec::with_capacity(cfg.n_samples),
        times: Vec::with_capacity(cfg.n_samples),
        overflow_count: 0,
        pole_rejections: 0,
        truncated: false,
        config: *cfg,
    };
    if let Err(e) = field.drift(cfg.initial_point) {
        return Err(Error::InvalidParameter(format!("initial point: {e}")));
    }
    let mut p = cfg.initial_point;
    let mut step: u64 = 0;
    let mut since_start = 0usize;
    // Global clock keeps times strictly increasing across restarts.
    while traj.samples.len() < cfg.n_samples {
        match step_euler_maruyama(p, field, cfg.dt, cfg.overflow_threshold, &mut rng) {
            Ok(np) => {
                p = np;
                step += 1;
                since_start += 1;
                if since_start >= burn && (since_start - burn) % thin == 0 {
                    traj.samples.push(p);
                    traj.times.push(step as f64 * cfg.dt);
                }
            }
            Err(StepFailure::Pole) => {
                traj.pole_rejections += 1;
                if traj.pole_rejections > 1000 * cfg.max_restarts.max(1) {
                    traj.truncated = true;
                    break;
                }
            }
            Err(StepFailure::Overflow) => {
                traj.overflow_count += 1;
                if traj.overflow_count > cfg.max_restarts {
                    traj.truncated = true;
                    break;
                }
                p = cfg.initial_point;
                step += 1;
                since_start = 0;
            }
        }
    }
    Ok(traj)
}

/// Independent chains with seeds `seed, seed + 1, ...`, run in parallel.
pub fn run_chains(field: &dyn DriftField, cfg: &SamplerConfig, chains: usize) -> Result<Vec<Trajectory>> {
    (0..chains as u64).into_par_iter().map(|k| run_chain(field, &SamplerConfig { seed: cfg.seed.wrapping_add(k), ..*cfg })).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableEstimate {
    pub mean: Complex64,
    /// Componentwise standard errors.
    pub stderr: Complex64,
    pub n_samples: usize,
    pub n_effective: f64,
}

impl ObservableEstimate {
    /// Distance to `exact` in units of the combined componentwise error,
    /// the larger of the real and imaginary parts.
    pub fn sigmas_from(&self, exact: Complex64, other_err: Complex64) -> f64 {
        let er = (self.stderr.re.powi(2) + other_err.re.powi(2)).sqrt();
        let ei = (self.stderr.im.powi(2) + other_err.im.powi(2)).sqrt();
        let z = |d: f64, e: f64| {
            if e > 0.0 {
                d.abs() / e
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        z(self.mean.re - exact.re, er).max(z(self.mean.im - exact.im, ei))
    }
}

/// Samples per batch: batch length `50 * thin`.
pub const BATCH_SAMPLES: usize = 50;

/// Mean and batch-means error of `O(z)` over one or more trajectories.
pub fn estimate_many(trajs: &[Trajectory], obs: impl Fn(Complex64) -> Complex64) -> Result<ObservableEstimate> {
    let n: usize = trajs.iter().map(|t| t.samples.len()).sum();
    if n < 100 {
        return Err(Error::InsufficientSamples { needed: 100, got: n });
    }
    let mut batches: Vec<Complex64> = Vec::new();
    let mut all = Vec::with_capacity(n);
    for t in trajs {
        let vals: Vec<Complex64> = t.samples.iter().map(|p| obs(p.z())).collect();
        for chunk in vals.chunks_exact(BATCH_SAMPLES) {
            batches.push(chunk.iter().sum::<Complex64>() / BATCH_SAMPLES as f64);
        }
        all.extend(vals);
    }
    let mean = all.iter().sum::<Complex64>() / n as f64;
    let nb = batches.len();
    if nb < 2 {
        return Err(Error::InsufficientSamples { needed: 2 * BATCH_SAMPLES, got: n });
    }
    let bm = batches.iter().sum::<Complex64>() / nb as f64;
    let var_b = |f: fn(Complex64) -> f64| batches.iter().map(|b| (f(*b) - f(bm)).powi(2)).sum::<f64>() / (nb - 1) as f64;
    let se_re = (var_b(|c| c.re) / nb as f64).sqrt();
    let se_im = (var_b(|c| c.im) / nb as f64).sqrt();
    let var_re = all.iter().map(|v| (v.re - mean.re).powi(2)).sum::<f64>() / (n - 1) as f64;
    let var_im = all.iter().map(|v| (v.im - mean.im).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se2 = se_re * se_re + se_im * se_im;
    let n_effective = if se2 > 0.0 { ((var_re + var_im) / se2).min(n as f64) } else { n as f64 };
    Ok(ObservableEstimate { mean, stderr: Complex64::new(se_re, se_im), n_samples: n, n_effective })
}

pub fn estimate_observable(traj: &Trajectory, obs: impl Fn(Complex64) -> Complex64) -> Result<ObservableEstimate> {
    estimate_many(std::slice::from_ref(traj), obs)
}
