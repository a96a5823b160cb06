use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// CODATA 2018 values in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants<F> {
    /// Reduced Planck constant, J·s.
    pub hbar: F,
    /// Speed of light in vacuum, m/s.
    pub c: F,
    /// Vacuum permittivity, F/m.
    pub eps0: F,
}

pub const HBAR: f64 = 1.054_571_817e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

impl<F: Real> PhysicalConstants<F> {
    pub fn codata() -> Self {
        Self {
            hbar: F::lit(HBAR),
            c: F::lit(SPEED_OF_LIGHT),
            eps0: F::lit(VACUUM_PERMITTIVITY),
        }
    }
}

impl<F: Real> Default for PhysicalConstants<F> {
    fn default() -> Self {
        Self::codata()
    }
}
