//! Complex Langevin sampling, Fokker-Planck verification, tail diagnostics,
//! small-parameter expansions and gauge cooling for model problems.

pub mod asymptotics;
pub mod error;
pub mod fp;
pub mod gauge;
pub mod io;
pub mod lie;
pub mod model;
pub mod quadrature;
pub mod sampler;
pub mod tails;

pub use error::{Error, Result};
pub use model::{ComplexPoint, DriftField, QuarticModel, Su2OneLinkModel};
