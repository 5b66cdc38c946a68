//! Fokker-Planck solver for the density of the complex Langevin process.

pub mod characteristics;
pub mod density1d;
pub mod fd;
pub mod fourier;
pub mod grid;
pub mod krylov;
pub mod steady;
pub mod tridiag;

use serde::{Deserialize, Serialize};

pub use characteristics::{backtrace, CharacteristicTable};
pub use fd::{step_fd, FdStepper, StepReport};
pub use fourier::{step_fourier, FourierEval, FourierStepper, SpectralField2D};
pub use grid::{Grid2D, GridFunction2D};
pub use steady::{solve_steady, SteadyError, SteadyOptions, SteadyState};

/// Spatial discretisation used by the steady solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    FiniteDifference,
    Fourier,
}

/// One semi-Lagrangian time step as an affine map on nodal values:
/// `p -> (I - dt D_xx)^{-1} [lambda p(foot) + dt s]`.
pub trait LinearStepper: Sync {
    fn grid(&self) -> &Grid2D;
    fn dt(&self) -> f64;
    fn advance(&self, p: &[f64], source: Option<&[f64]>) -> Vec<f64>;
}
