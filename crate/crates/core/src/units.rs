//! Physical constants (CODATA 2018) and unit conversions.

use std::f64::consts::PI;

pub const AMU: f64 = 1.660_539_066_60e-27;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Ordinary frequency in Hz to angular frequency.
pub fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn khz(f: f64) -> f64 {
    hz(f * 1e3)
}

pub fn mhz(f: f64) -> f64 {
    hz(f * 1e6)
}

/// Angular frequency back to Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Wavevector magnitude for a vacuum wavelength in nanometres.
pub fn wavevector_from_nm(lambda_nm: f64) -> f64 {
    2.0 * PI / (lambda_nm * 1e-9)
}

/// Temperature stored as an angular frequency (ħ = k_B = 1) to kelvin.
pub fn temperature_kelvin(t: f64) -> f64 {
    t * HBAR / BOLTZMANN
}

/// Coulomb length scale ℓ = (e²/4πε₀ M ω_z²)^{1/3} in metres.
pub fn coulomb_length(mass_amu: f64, omega_z: f64) -> f64 {
    let m = mass_amu * AMU;
    (ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * PI * VACUUM_PERMITTIVITY * m * omega_z * omega_z))
        .cbrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_frequency() {
        assert!((to_hz(mhz(1.25)) - 1.25e6).abs() < 1e-6);
    }

    #[test]
    fn coulomb_length_is_micrometres_for_mg() {
        let l = coulomb_length(25.0, mhz(1.0));
        assert!(l > 3e-6 && l < 6e-6, "{l}");
    }
}
