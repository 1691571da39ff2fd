//! Physical constants (CODATA 2018) and species presets.

use std::f64::consts::PI;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Mass of ⁴⁰Ca in atomic mass units.
pub const CA40_MASS_U: f64 = 39.962_590_9;
/// S₁/₂ ↔ D₅/₂ quadrupole transition in ⁴⁰Ca⁺, m.
pub const CA40_QUBIT_WAVELENGTH: f64 = 729e-9;

pub const MICRO: f64 = 1e-6;

/// Converts a frequency in Hz to angular frequency in rad/s.
#[inline]
pub fn angular(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

/// Converts an angular frequency in rad/s to Hz.
#[inline]
pub fn hertz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}
