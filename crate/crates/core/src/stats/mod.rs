//! Seeded random streams, special functions, scalar sampling and
//! goodness-of-fit helpers shared by every other module.

pub(crate) mod dist;
pub mod gof;
mod rng;
pub mod special;

pub use dist::{draw, sample_gamma, sample_log_beta, sample_normal, sample_poisson, DistSpec};
pub use rng::RandomStream;
pub use special::log_gamma;
