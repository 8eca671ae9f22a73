//! Certified construction of a symplectic map of R⁶ with an elliptic fixed
//! point that attracts an orbit.
//!
//! The map is a product of rational rotations and time-one maps of
//! bump-coupled Hamiltonians. Everything that can be exact is exact
//! (phases, denominators, step counts); everything transcendental is an
//! outward-rounded enclosure.

pub mod budget;
pub mod construction;
pub mod error;
pub mod flows;
pub mod mechanism;
pub mod numeric;
pub mod profiles;
pub mod rotations;

pub use error::{Error, Result};
