//! Continuous-wave EPR spectra: field sweeps, rotational patterns and
//! population-weighted line intensities.
//!
//! Intensities are in arbitrary units scaled so that the thermal θ = 0
//! central line has unit peak-to-peak amplitude for the same spin system,
//! frequency, line shape and temperature.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::pump::{thermal_level_populations, PopulationState};
use crate::spectrum::{linspace, AxisKind, LineShape, Spectrum};
use crate::spin::{resonance_fields_with, FieldOrientation, Resonance, SpinHamiltonian, SpinSystem};
use crate::units::ROOM_TEMPERATURE_K;

#[derive(Debug, Clone, PartialEq)]
pub enum Populations {
    /// High-temperature Boltzmann populations at each resonance field.
    Thermal { temperature_k: f64 },
    /// Fixed level populations (e.g. optically pumped), independent of field.
    Fixed(PopulationState),
}

impl Default for Populations {
    fn default() -> Self {
        Populations::Thermal {
            temperature_k: ROOM_TEMPERATURE_K,
        }
    }
}

impl Populations {
    fn temperature(&self) -> f64 {
        match self {
            Populations::Thermal { temperature_k } => *temperature_k,
            Populations::Fixed(_) => ROOM_TEMPERATURE_K,
        }
    }

    fn validate(&self, levels: usize) -> Result<()> {
        match self {
            Populations::Thermal { temperature_k } if !(*temperature_k > 0.0) => {
                Err(invalid("populations", "temperature must be > 0 K"))
            }
            Populations::Fixed(p) if p.levels() != levels => Err(invalid(
                "populations",
                format!("{} populations for a {levels}-level system", p.levels()),
            )),
            _ => Ok(()),
        }
    }
}

/// One resolved line: where it sits and how strong it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub resonance: Resonance,
    /// p_lower − p_upper
    pub population_difference: f64,
    /// matrixElementSq × population difference
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub min_gauss: f64,
    pub max_gauss: f64,
    pub points: usize,
}

impl SweepRange {
    pub fn new(min_gauss: f64, max_gauss: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(invalid("sweep", format!("nPoints = {points} must be ≥ 2")));
        }
        if !(min_gauss.is_finite() && max_gauss.is_finite() && max_gauss > min_gauss && min_gauss >= 0.0) {
            return Err(invalid("sweep", format!("range [{min_gauss}, {max_gauss}] G is invalid")));
        }
        Ok(SweepRange {
            min_gauss,
            max_gauss,
            points,
        })
    }

    pub fn axis(&self) -> Vec<f64> {
        linspace(self.min_gauss, self.max_gauss, self.points)
    }

    /// Resonance search window: the sweep widened so lines just outside still contribute tails.
    pub(crate) fn search_window(&self, margin: f64) -> (f64, f64) {
        ((self.min_gauss - margin).max(0.0), self.max_gauss + margin)
    }
}

pub(crate) fn lines_for(
    ham: &SpinHamiltonian,
    theta_deg: f64,
    f_ghz: f64,
    window: (f64, f64),
    populations: &Populations,
) -> Result<Vec<Line>> {
    let resonances = resonance_fields_with(ham, theta_deg, f_ghz, window)?;
    Ok(resonances
        .into_iter()
        .map(|r| {
            let dp = match populations {
                Populations::Thermal { temperature_k } => {
                    let e = ham.levels(&FieldOrientation {
                        b0_gauss: r.field_gauss,
                        theta_deg,
                    });
                    let p = thermal_level_populations(&e, *temperature_k);
                    p[r.lower] - p[r.upper]
                }
                Populations::Fixed(state) => state.difference(r.lower, r.upper),
            };
            Line {
                resonance: r,
                population_difference: dp,
                weight: r.matrix_element_sq * dp,
            }
        })
        .collect())
}

/// Peak-to-peak amplitude of the strongest thermal line at θ = 0 on the
/// Zeeman field f/(gβ): the central ±1/2 line for half-integer spins.
pub fn reference_amplitude(sys: &SpinSystem, f_ghz: f64, shape: &LineShape, temperature_k: f64) -> Result<f64> {
    let ham = SpinHamiltonian::new(sys)?;
    let b = f_ghz * 1e3 / sys.gyromagnetic();
    let set = ham.transitions(&FieldOrientation::new(b, 0.0)?);
    let p = thermal_level_populations(&set.energies, temperature_k);
    let strongest = set
        .allowed()
        .map(|t| t.matrix_element_sq * (p[t.lower] - p[t.upper]))
        .fold(0.0f64, |m, w| m.max(w.abs()));
    let amp = strongest * shape.peak_to_peak();
    Ok(if amp > 0.0 { amp } else { 1.0 })
}

fn synthesize(axis: &[f64], lines: &[Line], shape: &LineShape, scale: f64) -> Vec<f64> {
    axis.iter()
        .map(|&b| {
            lines
                .iter()
                .map(|l| l.weight * shape.value(b - l.resonance.field_gauss))
                .sum::<f64>()
                * scale
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FieldSweep {
    pub spectrum: Spectrum,
    pub lines: Vec<Line>,
}

pub fn field_sweep(
    sys: &SpinSystem,
    theta_deg: f64,
    f_ghz: f64,
    range: &SweepRange,
    shape: &LineShape,
    populations: &Populations,
) -> Result<FieldSweep> {
    let ham = SpinHamiltonian::new(sys)?;
    populations.validate(ham.dimension())?;
    let margin = 20.0 * shape.width_pp;
    let lines = lines_for(&ham, theta_deg, f_ghz, range.search_window(margin), populations)?;
    let scale = 1.0 / reference_amplitude(sys, f_ghz, shape, populations.temperature())?;
    let axis = range.axis();
    let intensity = synthesize(&axis, &lines, shape, scale);
    let pumped = matches!(populations, Populations::Fixed(_));
    let spectrum = Spectrum::new(AxisKind::FieldGauss, axis, intensity)?
        .with_meta("fMW_GHz", f_ghz)
        .with_meta("theta_deg", theta_deg)
        .with_meta("temperature_K", populations.temperature())
        .with_meta("pump", if pumped { "on" } else { "off" })
        .with_meta("shape", format!("{:?}", shape.kind))
        .with_meta("linewidthPP_G", shape.width_pp);
    Ok(FieldSweep { spectrum, lines })
}

#[derive(Debug, Clone)]
pub struct RotationalPattern {
    /// One spectrum per angle, in grid order.
    pub spectra: Vec<(f64, Spectrum)>,
    /// Resonance fields per angle, ascending in field.
    pub positions: Vec<(f64, Vec<Resonance>)>,
}

pub fn rotational_pattern(
    sys: &SpinSystem,
    f_ghz: f64,
    thetas_deg: &[f64],
    range: &SweepRange,
    shape: &LineShape,
    populations: &Populations,
) -> Result<RotationalPattern> {
    if let Some(bad) = thetas_deg.iter().find(|t| !(0.0..=90.0).contains(*t)) {
        return Err(invalid("angle grid", format!("θ = {bad}° outside [0, 90]")));
    }
    let sweeps = thetas_deg
        .par_iter()
        .map(|&theta| field_sweep(sys, theta, f_ghz, range, shape, populations).map(|s| (theta, s)))
        .collect::<Result<Vec<_>>>()?;
    let mut spectra = Vec::with_capacity(sweeps.len());
    let mut positions = Vec::with_capacity(sweeps.len());
    for (theta, sweep) in sweeps {
        positions.push((
            theta,
            sweep
                .lines
                .iter()
                .map(|l| l.resonance)
                .filter(|r| r.field_gauss >= range.min_gauss && r.field_gauss <= range.max_gauss)
                .collect(),
        ));
        spectra.push((theta, sweep.spectrum));
    }
    Ok(RotationalPattern { spectra, positions })
}
