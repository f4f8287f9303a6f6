//! Irreversible entropy production of two coupled, driven-dissipative quantum
//! harmonic oscillators: steady-state covariances from the Lyapunov equation,
//! entropy production and flux rates, optomechanical noise spectra, the
//! cavity-BEC polariton pipeline, a stochastic-trajectory cross-check and
//! least-squares spectrum fitting.

pub mod config;
pub mod dicke;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod fit;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod spectra;

pub use config::{load_config, parse_config, Config};
pub use dynamics::{CovarianceMatrix, DiffusionMatrix, DriftMatrix, Stability, StabilityClass};
pub use entropy::{steady_state_entropy_production, EntropyRates};
pub use error::{Error, Result};
pub use model::{preset, thermal_occupation, OptomechDetection, Preset, Setup, SystemParams};
pub use spectra::{BathKernel, Spectrum, SpectrumKind};
