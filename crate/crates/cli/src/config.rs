//! Run configuration: one TOML file with a flat section per module.

use std::fmt;
use std::str::FromStr;

use cllab::fp::{Backend, Grid2D, SteadyOptions};
use cllab::model::ComplexPoint;
use cllab::sampler::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    QuarticScan,
    FpSolve,
    Tails,
    Boundary,
    Asymptotics,
    Su2,
    U1CoolCheck,
    Eigen,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::QuarticScan => "quartic-scan",
            Experiment::FpSolve => "fp-solve",
            Experiment::Tails => "tails",
            Experiment::Boundary => "boundary",
            Experiment::Asymptotics => "asymptotics",
            Experiment::Su2 => "su2",
            Experiment::U1CoolCheck => "u1-cool-check",
            Experiment::Eigen => "eigen",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMethod {
    Cl,
    Fp,
    Both,
}

impl ScanMethod {
    pub fn runs_cl(self) -> bool {
        self != ScanMethod::Fp
    }

    pub fn runs_fp(self) -> bool {
        self != ScanMethod::Cl
    }
}

impl FromStr for ScanMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cl" => Ok(ScanMethod::Cl),
            "fp" => Ok(ScanMethod::Fp),
            "both" => Ok(ScanMethod::Both),
            _ => Err(format!("unknown method `{s}` (expected cl, fp or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub dt: f64,
    pub burn_in: f64,
    pub thin: f64,
    pub n_samples: usize,
    pub chains: usize,
    pub overflow_threshold: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { dt: 1e-4, burn_in: 10.0, thin: 0.05, n_samples: 10_000, chains: 4, overflow_threshold: 1e6, x0: 0.0, y0: 0.0 }
    }
}

impl SamplerSection {
    pub fn sampler_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            dt: self.dt,
            burn_in: self.burn_in,
            thin: self.thin,
            n_samples: self.n_samples,
            seed,
            overflow_threshold: self.overflow_threshold,
            initial_point: ComplexPoint::new(self.x0, self.y0),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpSection {
    pub backend: Backend,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n: usize,
    pub m: usize,
    pub dt: f64,
    pub tol: f64,
    pub max_t: f64,
    pub filter_order: u32,
}

impl Default for FpSection {
    fn default() -> Self {
        Self {
            backend: Backend::FiniteDifference,
            x_min: -6.0,
            x_max: 6.0,
            y_min: -6.0,
            y_max: 6.0,
            n: 240,
            m: 240,
            dt: 1e-3,
            tol: 1e-8,
            max_t: 200.0,
            filter_order: 16,
        }
    }
}

impl FpSection {
    pub fn grid(&self) -> Result<Grid2D, CliError> {
        Ok(Grid2D::new(self.x_min, self.x_max, self.y_min, self.y_max, self.n, self.m)?)
    }

    pub fn steady_options(&self) -> SteadyOptions {
        SteadyOptions { dt: self.dt, tol: self.tol, max_t: self.max_t, filter_order: self.filter_order, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub b_list: Vec<f64>,
    pub method: ScanMethod,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self { b_list: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0], method: ScanMethod::Both }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpSolveSection {
    pub b: f64,
}

impl Default for FpSolveSection {
    fn default() -> Self {
        Self { b: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailsSection {
    pub b: f64,
    pub window_x: [f64; 2],
    pub window_y: [f64; 2],
    pub window_diagonal: [f64; 2],
}

impl Default for TailsSection {
    fn default() -> Self {
        Self { b: 2.3, window_x: [3.0, 6.0], window_y: [1.5, 3.5], window_diagonal: [2.0, 5.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundarySection {
    pub b: f64,
    /// Plateau window in `y`.
    pub window: [f64; 2],
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self { b: 2.3, window: [1.5, 3.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticsSection {
    pub order: usize,
    pub eps_list: Vec<f64>,
    /// Observable `z^power`.
    pub power: usize,
    pub x_max: f64,
    pub y_max: f64,
    pub n: usize,
    pub m: usize,
    pub dt: f64,
    pub max_t: f64,
    pub level_tol: f64,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        Self { order: 5, eps_list: vec![0.02], power: 2, x_max: 5.0, y_max: 1.0, n: 480, m: 240, dt: 1e-3, max_t: 100.0, level_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Su2Section {
    pub a: f64,
    pub b: f64,
    pub cooled: bool,
    /// Starting angle; z = 0 is a pole of the drift.
    pub x0: f64,
    pub y0: f64,
}

impl Default for Su2Section {
    fn default() -> Self {
        Self { a: 1.0, b: 0.2, cooled: true, x0: 1.0, y0: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct U1Section {
    pub n_links: usize,
    pub a: f64,
    pub b: f64,
    pub dt: f64,
    pub steps: usize,
}

impl Default for U1Section {
    fn default() -> Self {
        Self { n_links: 8, a: 1.0, b: 0.5, dt: 1e-6, steps: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenSection {
    pub n: usize,
    pub n_links: usize,
    pub a: f64,
    pub b: f64,
    pub j_zero: bool,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub paths: usize,
    /// Initial `|Im log lambda_j|`.
    pub init_spread: f64,
}

impl Default for EigenSection {
    fn default() -> Self {
        Self { n: 2, n_links: 1, a: 1.0, b: 0.0, j_zero: false, dt: 1e-5, steps: 10_000, record_every: 100, paths: 1000, init_spread: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub fp: FpSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub fp_solve: FpSolveSection,
    #[serde(default)]
    pub tails: TailsSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub asymptotics: AsymptoticsSection,
    #[serde(default)]
    pub su2: Su2Section,
    #[serde(default)]
    pub u1: U1Section,
    #[serde(default)]
    pub eigen: EigenSection,
}

fn default_out() -> String {
    ".".into()
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg.into()))
    }
}

fn window_ok(w: [f64; 2]) -> bool {
    w[0].is_finite() && w[1].is_finite() && w[0] < w[1]
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            out: default_out(),
            sampler: Default::default(),
            fp: Default::default(),
            scan: Default::default(),
            fp_solve: Default::default(),
            tails: Default::default(),
            boundary: Default::default(),
            asymptotics: Default::default(),
            su2: Default::default(),
            u1: Default::default(),
            eigen: Default::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Range checks beyond what the schema enforces.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.sampler;
        check(self.seed <= i64::MAX as u64, "seed must be below 2^63")?;
        check(s.dt > 0.0 && s.thin >= s.dt && s.burn_in >= 0.0, "sampler: need dt > 0, thin >= dt, burn_in >= 0")?;
        check(s.n_samples >= 2 && s.chains >= 1, "sampler: need n_samples >= 2 and chains >= 1")?;
        let f = &self.fp;
        check(f.x_min < f.x_max && f.y_min < f.y_max, "fp: empty domain")?;
        check(f.n >= 8 && f.m >= 8, "fp: grid needs at least 8x8 nodes")?;
        check(f.dt > 0.0 && f.tol > 0.0 && f.max_t > 0.0, "fp: dt, tol and max_t must be positive")?;
        check(!self.scan.b_list.is_empty(), "scan: b_list is empty")?;
        check(self.scan.b_list.iter().all(|b| (0.0..=5.0).contains(b)), "scan: every B must lie in [0, 5]")?;
        check(
            window_ok(self.tails.window_x) && window_ok(self.tails.window_y) && window_ok(self.tails.window_diagonal),
            "tails: windows must satisfy lo < hi",
        )?;
        check(window_ok(self.boundary.window), "boundary: window must satisfy lo < hi")?;
        let a = &self.asymptotics;
        check((1..=5).contains(&a.order), "asymptotics: order must be in 1..=5")?;
        check(a.eps_list.iter().all(|e| (0.0..cllab::asymptotics::SQRT3).contains(e)), "asymptotics: eps must lie in [0, sqrt 3)")?;
        check(a.n >= 8 && a.m >= 8 && a.x_max > 0.0 && a.y_max > 0.0, "asymptotics: invalid grid")?;
        check(self.u1.n_links >= 1 && self.u1.dt > 0.0, "u1: need n_links >= 1 and dt > 0")?;
        let e = &self.eigen;
        check(e.n == 2 || e.n == 3, "eigen: n must be 2 or 3")?;
        check(e.n_links >= 1 && e.paths >= 1 && e.record_every >= 1 && e.dt > 0.0, "eigen: invalid run parameters")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::from_toml("experiment = \"tails\"\n[tails]\nbee = 2.3\n").unwrap_err();
        assert!(err.to_string().contains("bee"), "{err}");
    }

    #[test]
    fn out_of_range_scan() {
        let err = RunConfig::from_toml("experiment = \"quartic-scan\"\n[scan]\nb_list = [1.0, 6.0]\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = RunConfig::from_toml("experiment = \"su2\"\n").unwrap();
        assert_eq!(cfg, RunConfig::new(Experiment::Su2));
    }

    proptest! {
        #[test]
        fn toml_round_trip(seed in 0u64..(i64::MAX as u64), b in 0.0f64..5.0, dt in 1e-7f64..1e-2, eps in proptest::collection::vec(0.0f64..1.7, 1..4), n in 8usize..1000) {
            let mut cfg = RunConfig::new(Experiment::Asymptotics);
            cfg.seed = seed;
            cfg.fp_solve.b = b;
            cfg.fp.dt = dt;
            cfg.asymptotics.eps_list = eps;
            cfg.eigen.steps = n;
            let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
