//! Constant-rank differential constraints, A-free projections on periodic
//! grids, cell problems and high-contrast homogenization experiments.

pub mod cell;
pub mod contrast;
pub mod error;
pub mod fields;
pub mod integrand;
pub mod optim;
pub mod projection;
pub mod symbols;

pub use contrast::{GammaSweepReport, HighContrastProblem};
pub use error::{Error, Result};
pub use fields::{Grid, Microstructure, PeriodicField};
pub use integrand::{IntegrandSpec, SoftFamily};
pub use optim::{SolveOptions, SolveReport};
pub use projection::{ProjectionPlan, ZeroModePolicy};
pub use symbols::DifferentialOperator;
