//! Pump-frequency-swept four-pulse DEER.
//!
//! The probe echo is reduced by every partner species the pump pulse flips:
//! echo(fp) = E0 · Π (1 − λ_s · P_s(fp)). The pump amplitude is scaled by the
//! square root of the resonator power transmission and the flip probability
//! is the rectangular-pulse Rabi formula averaged over a Gaussian partner line.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::pulse::RelaxationParams;
use crate::pump::{PopulationState, PumpModel};
use crate::quadrature::gauss_hermite;
use crate::spectrum::{AxisKind, Spectrum};
use crate::units::field_to_frequency_offset;

/// Quadrature order for the partner line average.
const LINE_QUADRATURE_POINTS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ResonatorShape {
    #[default]
    LorentzianPower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorProfile {
    pub center_ghz: f64,
    /// Full width at half maximum of the power transmission, MHz. May be infinite.
    pub fwhm_mhz: f64,
    pub shape: ResonatorShape,
}

impl ResonatorProfile {
    pub fn new(center_ghz: f64, fwhm_mhz: f64) -> Result<Self> {
        if !(center_ghz.is_finite() && center_ghz > 0.0) {
            return Err(invalid("resonator", format!("center {center_ghz} GHz must be > 0")));
        }
        if !(fwhm_mhz > 0.0) || fwhm_mhz.is_nan() {
            return Err(invalid("resonator", format!("fwhm {fwhm_mhz} MHz must be > 0")));
        }
        Ok(ResonatorProfile {
            center_ghz,
            fwhm_mhz,
            shape: ResonatorShape::LorentzianPower,
        })
    }

    /// Power transmission in (0, 1].
    pub fn transmission(&self, f_ghz: f64) -> f64 {
        match self.shape {
            ResonatorShape::LorentzianPower => {
                let x = 2.0 * (f_ghz - self.center_ghz) * 1e3 / self.fwhm_mhz;
                1.0 / (1.0 + x * x)
            }
        }
    }

    pub fn in_band(&self, f_ghz: f64) -> bool {
        (f_ghz - self.center_ghz).abs() * 1e3 <= 0.5 * self.fwhm_mhz
    }
}

pub fn resonator_transmission(profile: &ResonatorProfile, f_ghz: f64) -> f64 {
    profile.transmission(f_ghz)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinePosition {
    AbsoluteGhz(f64),
    /// Relative to the probe frequency.
    OffsetMhz(f64),
    /// Resonance this far above the probe line in field; converted with `g`.
    OffsetGauss { gauss: f64, g: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartnerSpecies {
    pub label: String,
    pub position: LinePosition,
    /// Gaussian line, peak-to-peak derivative width in MHz (σ = width/2).
    pub width_mhz: f64,
    /// Echo reduction for a fully flipped partner, 0..=1.
    pub lambda: f64,
}

impl PartnerSpecies {
    pub fn new(label: impl Into<String>, position: LinePosition, width_mhz: f64, lambda: f64) -> Result<Self> {
        let p = PartnerSpecies {
            label: label.into(),
            position,
            width_mhz,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(invalid("partner", format!("{}: λ = {} outside [0, 1]", self.label, self.lambda)));
        }
        if !(self.width_mhz.is_finite() && self.width_mhz > 0.0) {
            return Err(invalid("partner", format!("{}: width {} MHz must be > 0", self.label, self.width_mhz)));
        }
        if let LinePosition::OffsetGauss { g, .. } = self.position {
            if !(g > 0.0) {
                return Err(invalid("partner", format!("{}: g = {g} must be > 0", self.label)));
            }
        }
        Ok(())
    }

    /// Line center in GHz given the probe frequency.
    pub fn center_ghz(&self, fs_ghz: f64) -> f64 {
        match self.position {
            LinePosition::AbsoluteGhz(f) => f,
            LinePosition::OffsetMhz(d) => fs_ghz + d * 1e-3,
            // higher resonance field at fixed frequency ⇔ lower frequency at fixed field
            LinePosition::OffsetGauss { gauss, g } => fs_ghz - field_to_frequency_offset(gauss, g) * 1e-3,
        }
    }

    fn sigma_mhz(&self) -> f64 {
        0.5 * self.width_mhz
    }
}

/// Rectangular-pulse flip probability: Rabi frequency `rabi_mhz`, detuning
/// `detuning_mhz`, duration in µs.
pub fn flip_probability(rabi_mhz: f64, detuning_mhz: f64, duration_us: f64) -> f64 {
    let g2 = rabi_mhz * rabi_mhz + detuning_mhz * detuning_mhz;
    if g2 == 0.0 {
        return 0.0;
    }
    let s = (PI * g2.sqrt() * duration_us).sin();
    rabi_mhz * rabi_mhz / g2 * s * s
}

/// Pump Rabi frequency at `fp`: a π pulse at the resonator center, scaled by
/// the amplitude transmission.
pub fn pump_rabi_frequency(fp_ghz: f64, pump_ns: f64, resonator: &ResonatorProfile) -> f64 {
    let calibrated = 1.0 / (2.0 * pump_ns * 1e-3);
    calibrated * resonator.transmission(fp_ghz).sqrt()
}

/// Line-averaged flip probability of a partner for a pump pulse at `fp`.
pub fn pump_excitation_probability(
    partner: &PartnerSpecies,
    fs_ghz: f64,
    fp_ghz: f64,
    pump_ns: f64,
    resonator: &ResonatorProfile,
) -> f64 {
    excitation_with_rule(partner, fs_ghz, fp_ghz, pump_ns, resonator, &gauss_hermite(LINE_QUADRATURE_POINTS))
}

fn excitation_with_rule(
    partner: &PartnerSpecies,
    fs_ghz: f64,
    fp_ghz: f64,
    pump_ns: f64,
    resonator: &ResonatorProfile,
    rule: &[(f64, f64)],
) -> f64 {
    let rabi = pump_rabi_frequency(fp_ghz, pump_ns, resonator);
    let center = partner.center_ghz(fs_ghz) * 1e3;
    let sigma = partner.sigma_mhz();
    let t = pump_ns * 1e-3;
    let fp = fp_ghz * 1e3;
    let p: f64 = rule
        .iter()
        .map(|&(x, w)| {
            let f = center + std::f64::consts::SQRT_2 * sigma * x;
            w * flip_probability(rabi, f - fp, t)
        })
        .sum::<f64>()
        / PI.sqrt();
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EchoKind {
    Stimulated,
    Refocused,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpticalMode {
    Continuous,
    PulsedPrelude { light_us: f64, gap_us: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeerSweepConfig {
    pub fs_ghz: f64,
    pub fp_start_ghz: f64,
    pub fp_stop_ghz: f64,
    pub step_mhz: f64,
    pub pump_pulse_ns: f64,
    pub echo_kind: EchoKind,
    pub optical_mode: OpticalMode,
    /// Stimulated over refocused echo amplitude.
    pub stimulated_ratio: f64,
    /// Time the probe coherence spends transverse, µs.
    pub echo_time_us: f64,
    /// Probed level pair (ascending energy indices).
    pub probed_lower: usize,
}

impl Default for DeerSweepConfig {
    fn default() -> Self {
        DeerSweepConfig {
            fs_ghz: 9.308,
            fp_start_ghz: 9.150,
            fp_stop_ghz: 9.399,
            step_mhz: 1.0,
            pump_pulse_ns: 100.0,
            echo_kind: EchoKind::Stimulated,
            optical_mode: OpticalMode::Continuous,
            stimulated_ratio: 2.0,
            echo_time_us: 2.4,
            probed_lower: 2,
        }
    }
}

impl DeerSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_mhz.is_finite() && self.step_mhz > 0.0) {
            return Err(invalid("deer sweep", format!("step {} MHz must be > 0", self.step_mhz)));
        }
        if !(self.fs_ghz > 0.0 && self.fp_start_ghz > 0.0 && self.fp_stop_ghz.is_finite()) {
            return Err(invalid("deer sweep", "frequencies must be positive"));
        }
        if self.pump_grid().len() < 2 {
            return Err(invalid("deer sweep", "pump range holds fewer than 2 points"));
        }
        if !(self.pump_pulse_ns.is_finite() && self.pump_pulse_ns > 0.0) {
            return Err(invalid("deer sweep", "pump pulse duration must be > 0"));
        }
        if !(self.stimulated_ratio.is_finite() && self.stimulated_ratio > 0.0) {
            return Err(invalid("deer sweep", "stimulated/refocused ratio must be > 0"));
        }
        if !(self.echo_time_us >= 0.0) {
            return Err(invalid("deer sweep", "echo time must be ≥ 0"));
        }
        if let OpticalMode::PulsedPrelude { light_us, gap_us } = self.optical_mode {
            if !(light_us >= 0.0 && gap_us >= 0.0) {
                return Err(invalid("deer sweep", "optical prelude durations must be ≥ 0"));
            }
        }
        Ok(())
    }

    /// Pump frequencies start + k·step up to stop, GHz.
    pub fn pump_grid(&self) -> Vec<f64> {
        if !(self.step_mhz > 0.0) || self.fp_stop_ghz < self.fp_start_ghz {
            return Vec::new();
        }
        let span = (self.fp_stop_ghz - self.fp_start_ghz) * 1e3;
        let n = (span / self.step_mhz + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|k| self.fp_start_ghz + k as f64 * self.step_mhz * 1e-3)
            .collect()
    }
}

/// Probe echo in the absence of pumping.
pub fn unpumped_echo(cfg: &DeerSweepConfig, pump: &PumpModel, relaxation: &RelaxationParams) -> Result<f64> {
    let upper = cfg.probed_lower + 1;
    if upper >= pump.levels() {
        return Err(invalid("deer sweep", format!("probed level {} out of range", cfg.probed_lower)));
    }
    let state = match cfg.optical_mode {
        OpticalMode::Continuous => PopulationState::new(pump.illuminated_fixed_point(), 0.0)?,
        OpticalMode::PulsedPrelude { light_us, gap_us } => pump.after_optical_pulse(light_us, gap_us)?,
    };
    let kind = match cfg.echo_kind {
        EchoKind::Stimulated => cfg.stimulated_ratio,
        EchoKind::Refocused => 1.0,
    };
    Ok(state.difference(cfg.probed_lower, upper).abs() * kind * (-cfg.echo_time_us / relaxation.t2_us).exp())
}

#[derive(Debug, Clone)]
pub struct DeerResult {
    pub spectrum: Spectrum,
    pub e0: f64,
    pub diagnostics: Vec<String>,
}

pub fn deer_sweep(
    cfg: &DeerSweepConfig,
    partners: &[PartnerSpecies],
    resonator: &ResonatorProfile,
    pump: &PumpModel,
    relaxation: &RelaxationParams,
) -> Result<DeerResult> {
    cfg.validate()?;
    for p in partners {
        p.validate()?;
    }
    let mut diagnostics = Vec::new();
    if !resonator.in_band(cfg.fs_ghz) {
        diagnostics.push(format!(
            "probe {} GHz lies outside the resonator band {} ± {} MHz",
            cfg.fs_ghz,
            resonator.center_ghz,
            0.5 * resonator.fwhm_mhz
        ));
    }
    let e0 = unpumped_echo(cfg, pump, relaxation)?;
    let rule = gauss_hermite(LINE_QUADRATURE_POINTS);
    let grid = cfg.pump_grid();
    let echo: Vec<f64> = grid
        .par_iter()
        .map(|&fp| {
            partners.iter().fold(e0, |acc, s| {
                acc * (1.0 - s.lambda * excitation_with_rule(s, cfg.fs_ghz, fp, cfg.pump_pulse_ns, resonator, &rule))
            })
        })
        .collect();
    let axis = grid.iter().map(|f| f * 1e3).collect();
    let spectrum = Spectrum::new(AxisKind::FrequencyMhz, axis, echo)?
        .with_meta("fs_GHz", cfg.fs_ghz)
        .with_meta("pumpPulse_ns", cfg.pump_pulse_ns)
        .with_meta("echoKind", format!("{:?}", cfg.echo_kind))
        .with_meta("opticalMode", format!("{:?}", cfg.optical_mode))
        .with_meta("resonator_center_GHz", resonator.center_ghz)
        .with_meta("resonator_fwhm_MHz", resonator.fwhm_mhz)
        .with_meta("E0", e0)
        .with_meta("partners", partners.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join(";"));
    Ok(DeerResult {
        spectrum,
        e0,
        diagnostics,
    })
}

/// Probe self-dip, the carbon-related partner 23.2 G above the probe line,
/// and the V2 high-field line.
pub fn default_partners() -> Vec<PartnerSpecies> {
    let width = field_to_frequency_offset(3.0, 2.0028);
    vec![
        PartnerSpecies {
            label: "V2 probe line".into(),
            position: LinePosition::OffsetMhz(0.0),
            width_mhz: width,
            lambda: 0.3,
        },
        PartnerSpecies {
            label: "carbon defect".into(),
            position: LinePosition::OffsetGauss { gauss: 23.2, g: 2.0028 },
            width_mhz: width,
            lambda: 0.2,
        },
        PartnerSpecies {
            label: "V2 high-field line".into(),
            position: LinePosition::AbsoluteGhz(9.178),
            width_mhz: width,
            lambda: 0.3,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dip {
    /// Refined position, in the spectrum's axis units.
    pub position: f64,
    /// Prominence below the surrounding maxima.
    pub depth: f64,
    /// Depth relative to the reference (surrounding) level.
    pub relative_depth: f64,
}

/// Local minima whose prominence exceeds `prominence`, positions refined by
/// a parabola through the three samples around each minimum.
pub fn dip_detect(spectrum: &Spectrum, prominence: f64) -> Vec<Dip> {
    let y = &spectrum.intensity;
    let x = &spectrum.axis;
    let n = y.len();
    let mut dips = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if !(y[i] < y[i - 1]) {
            i += 1;
            continue;
        }
        // walk across a flat bottom
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        if j + 1 >= n || y[j + 1] <= y[i] {
            i = j + 1;
            continue;
        }
        let level = y[i];
        let mut left = level;
        for k in (0..i).rev() {
            if y[k] < level {
                break;
            }
            left = left.max(y[k]);
        }
        let mut right = level;
        for &v in &y[j + 1..] {
            if v < level {
                break;
            }
            right = right.max(v);
        }
        let reference = left.min(right);
        let (pos, bottom) = if i == j {
            let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
            let curv = a - 2.0 * b + c;
            if curv > 0.0 {
                let off = 0.5 * (a - c) / curv;
                let h = 0.5 * (x[i + 1] - x[i - 1]);
                (x[i] + off * h, b - 0.25 * (a - c) * off)
            } else {
                (x[i], b)
            }
        } else {
            (0.5 * (x[i] + x[j]), level)
        };
        let depth = reference - bottom;
        if reference - level >= prominence && depth > 0.0 {
            dips.push(Dip {
                position: pos,
                depth,
                relative_depth: if reference != 0.0 { depth / reference.abs() } else { 0.0 },
            });
        }
        i = j + 1;
    }
    dips
}
