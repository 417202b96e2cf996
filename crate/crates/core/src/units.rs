//! Conversion between the interface units (Hz, MHz) and the angular units
//! (rad/s) used by every Hamiltonian.

use std::f64::consts::PI;

pub const MHZ: f64 = 1e6;

/// Hz to rad/s.
#[inline]
pub fn angular(hz: f64) -> f64 {
    2.0 * PI * hz
}

/// rad/s to Hz.
#[inline]
pub fn hertz(rad_per_s: f64) -> f64 {
    rad_per_s / (2.0 * PI)
}
