use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Mass of a ⁸⁷Rb atom, kg.
pub const RB87_MASS: f64 = 1.443e-25;

/// Transition and species constants.
///
/// Only the wavelength, lifetime and mass are stored; everything else is
/// derived so the identities `k·λ = 2π` and `σ₀ = 3λ²/(2π)` hold by
/// construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Transition wavelength, m.
    pub wavelength: f64,
    /// Natural lifetime of the excited level τ_a, s.
    pub lifetime: f64,
    /// Atomic mass, kg.
    pub mass: f64,
}

impl Default for PhysicalConstants {
    /// Rubidium-87 D2 line.
    fn default() -> Self {
        Self {
            wavelength: 780e-9,
            lifetime: 26.2e-9,
            mass: RB87_MASS,
        }
    }
}

impl PhysicalConstants {
    pub fn new(wavelength: f64, lifetime: f64, mass: f64) -> Result<Self> {
        let c = Self {
            wavelength,
            lifetime,
            mass,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return invalid(format!("wavelength must be > 0, got {}", self.wavelength));
        }
        if !(self.lifetime > 0.0 && self.lifetime.is_finite()) {
            return invalid(format!("lifetime must be > 0, got {}", self.lifetime));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return invalid(format!("mass must be > 0, got {}", self.mass));
        }
        Ok(())
    }

    /// k = 2π/λ, 1/m.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Γ_a = 1/τ_a, 1/s.
    pub fn natural_rate(&self) -> f64 {
        1.0 / self.lifetime
    }

    /// Resonant two-level cross-section σ₀ = 3λ²/(2π), m².
    pub fn cross_section(&self) -> f64 {
        3.0 * self.wavelength * self.wavelength / (2.0 * PI)
    }

    pub fn boltzmann(&self) -> f64 {
        BOLTZMANN
    }

    /// 1/e half-width of the per-component velocity distribution,
    /// v_w = sqrt(2 k_B T / m), m/s.
    pub fn velocity_width(&self, temperature: f64) -> f64 {
        (2.0 * BOLTZMANN * temperature / self.mass).sqrt()
    }

    /// Maxwell–Boltzmann mean speed sqrt(8 k_B T / (π m)), m/s.
    pub fn mean_speed(&self, temperature: f64) -> f64 {
        (8.0 * BOLTZMANN * temperature / (PI * self.mass)).sqrt()
    }

    /// Maxwell–Boltzmann RMS speed sqrt(3 k_B T / m), m/s.
    pub fn rms_speed(&self, temperature: f64) -> f64 {
        (3.0 * BOLTZMANN * temperature / self.mass).sqrt()
    }

    /// Mean distance travelled during one natural lifetime, m.
    pub fn dephasing_length(&self, temperature: f64) -> f64 {
        self.mean_speed(temperature) * self.lifetime
    }
}
