//! Galves-Löcherbach spiking networks whose in-weights need not be bounded.
//!
//! - [`network`]: weights, intensities and the built-in patterns.
//! - [`conditions`]: sufficient conditions for non-explosion and contraction.
//! - [`dynamics`]: exact simulation by thinning and Lyapunov bounds.
//! - [`coupling`]: coupled copies and their contraction rate.
//! - [`replica`]: the replica mean-field system and rate estimators.
//! - [`solver`]: stationary mean-field rates and an independent oracle.
//! - [`specfun`]: exponential integrals and the rate-equation kernels.
//! - [`io`] and [`cli`]: spec files, CSV output and the command line.
//!
//! The API counts neurons from 0; files and the command line count from 1.

pub mod cli;
pub mod conditions;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod network;
pub mod quad;
pub mod replica;
pub mod rng;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
pub use network::{NetworkSpec, NetworkState};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/conditions.md")]
    mod conditions {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    mod coupling {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
