//! Casimir force gradients between Au surfaces from the Lifshitz theory, and
//! a simulate-calibrate-compare pipeline for frequency-modulation AFM
//! measurements of those gradients.

pub mod lifshitz;
pub mod optics;
pub mod quadrature;
pub mod summation;
pub mod units;
pub mod electrostatics;
pub mod force;
pub mod vexp;
pub mod analysis;
pub mod io;
