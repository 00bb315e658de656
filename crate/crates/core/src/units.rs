//! Physical constants and unit conversions.
//!
//! Fields are in Gauss, frequencies in MHz (GHz at user-facing boundaries),
//! times in µs unless a name says otherwise.

/// Bohr magneton over Planck constant, MHz per Gauss (per unit g).
pub const BOHR_MHZ_PER_GAUSS: f64 = 1.3996245;

/// Boltzmann constant over Planck constant, MHz per Kelvin.
pub const BOLTZMANN_MHZ_PER_KELVIN: f64 = 20836.61912;

/// Default sample temperature (room temperature).
pub const ROOM_TEMPERATURE_K: f64 = 300.0;

/// Electron Zeeman frequency per Gauss for a given g factor.
#[inline]
pub fn gyromagnetic_mhz_per_gauss(g: f64) -> f64 {
    g * BOHR_MHZ_PER_GAUSS
}

/// Field interval equivalent to a frequency interval at fixed g.
///
/// 65 MHz at g = 2.0028 is 23.19 G.
#[inline]
pub fn frequency_to_field_offset(delta_mhz: f64, g: f64) -> f64 {
    delta_mhz / gyromagnetic_mhz_per_gauss(g)
}

#[inline]
pub fn field_to_frequency_offset(delta_gauss: f64, g: f64) -> f64 {
    delta_gauss * gyromagnetic_mhz_per_gauss(g)
}

/// Amplitude factor for a microwave attenuation in dB (0 dB → 1).
#[inline]
pub fn attenuation_amplitude_factor(attenuation_db: f64) -> f64 {
    10f64.powf(-attenuation_db / 20.0)
}
