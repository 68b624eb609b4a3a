//! Physical constants and unit conversions.
//!
//! Public interfaces take energies in eV and angular frequencies in rad/s;
//! every conversion between the two goes through [`ev_to_rad_per_s`] and
//! [`rad_per_s_to_ev`], which use the exact SI value of the elementary charge
//! and the CODATA 2018 reduced Planck constant below.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact SI).
pub const K_BOLTZMANN: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s (exact SI).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Elementary charge, C (exact SI).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Apéry's constant ζ(3).
pub const ZETA_3: f64 = 1.202_056_903_159_594_3;

/// Room temperature of the measurements, 20 °C.
pub const ROOM_TEMPERATURE: f64 = 293.15;

/// Converts a photon energy in eV to an angular frequency in rad/s.
#[inline]
pub fn ev_to_rad_per_s(energy_ev: f64) -> f64 {
    energy_ev * ELEMENTARY_CHARGE / HBAR
}

/// Converts an angular frequency in rad/s to a photon energy in eV.
#[inline]
pub fn rad_per_s_to_ev(omega: f64) -> f64 {
    omega * HBAR / ELEMENTARY_CHARGE
}

pub const NM: f64 = 1e-9;
pub const UM: f64 = 1e-6;

/// Force gradients are reported externally in μN/m.
pub const MICRO_NEWTON_PER_METER: f64 = 1e-6;
