//! Simulation and analysis toolkit for anomalous diffusion of gradient-descent
//! optimizers.
//!
//! The crate generates fractal, convex and shuffled-smoothed loss landscapes,
//! runs a noisy gradient-descent walker on them, and measures the walker (or
//! any externally recorded optimizer trajectory) with mean-squared
//! displacement regimes, Lévy α-stable gradient fits, path fractality and
//! landscape roughness estimators.
//!
//! Numerical code is generic over [`Real`] (`f32`/`f64`); the aliases at the
//! crate root fix the scalar to `f64`, the storage type used by the
//! trajectory container.

pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod fractal;
pub mod heavytail;
pub mod io;
pub mod landscape;
pub mod model;
pub mod optimize;
pub mod scalar;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Trajectory = model::Trajectory<f64>;
pub type Trajectory32 = model::Trajectory<f32>;
pub type Series = model::Series<f64>;
pub type HeightField = landscape::HeightField<f64>;
pub type HeightField32 = landscape::HeightField<f32>;
pub type Minimum = landscape::Minimum<f64>;
pub type SimConfig = simulator::SimConfig<f64>;
pub type SimResult = simulator::SimResult<f64>;
pub type MsdCurve = diffusion::MsdCurve<f64>;
pub type PowerLawFit = diffusion::PowerLawFit<f64>;
pub type RegimeReport = diffusion::RegimeReport<f64>;
pub type BetaSeries = diffusion::BetaSeries<f64>;
pub type StableParams = heavytail::StableParams<f64>;
pub type StableFit = heavytail::StableFit<f64>;
pub type PathFractalResult = fractal::PathFractalResult<f64>;
pub type MslCurve = fractal::MslCurve<f64>;

pub use model::{displacement_sq, Window};

/// Tool version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
