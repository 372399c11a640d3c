//! Numerical laboratory for the geodesic flow of a negatively curved genus-two
//! surface: Jacobi fields and Riccati solutions, expansion rates, pressure,
//! weighted resolvents of `−X + V`, and checks of the horocyclic intertwining
//! identities.

mod cache;
pub mod error;
pub mod geometry;
pub mod intertwining;
pub mod flow;
mod jet;
pub mod rates;
pub mod resolvent;
pub mod riccati;
#[cfg(test)]
mod testutil;

pub use error::{LabError, Result};
