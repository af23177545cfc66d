//! Equilibria of the Trail of Lost Pennies stake-governed tug-of-war and the
//! Brownian Boost system obtained in the small-`kappa` limit.
//!
//! * [`params`]: parameter validation and the central domain.
//! * [`phimaps`]: the basic rational maps, the shift map and its orbits.
//! * [`abmn`]: default and standard ABMN solutions, the Mina margin and `lambda_max`.
//! * [`bboost`]: the Brownian Boost flow, ODE pair and prize totals.
//! * [`sim`]: game simulation, Penny Forfeit and the scaled-drift diffusion.

pub mod abmn;
pub mod bboost;
pub mod error;
pub mod numeric;
pub mod params;
pub mod phimaps;
pub mod sim;

pub use error::{Error, Result};
pub use params::{CentralDomain, GameParams, Regime};
