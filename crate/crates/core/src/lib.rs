//! Three-parameter beta process toolkit: stick-breaking draws, beta-Bernoulli
//! feature matrices, exact and asymptotic feature-count laws, and Gibbs
//! sampling for a discrete factor model built on the process.

pub mod bep;
pub mod bp;
pub mod error;
pub mod factor;
pub mod powerlaw;
pub mod stats;

pub use bep::{CountStats, FeatureMatrix};
pub use bp::{BPParams, BetaProcessDraw, StickTrace};
pub use error::{Error, Result};
pub use factor::{FactorHyper, FactorState, MCMCConfig, Trace};
pub use powerlaw::{AsymptoticLaw, CurveKind, MeanCurve};
pub use stats::{DistSpec, RandomStream};

/// Version string stamped into output files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
