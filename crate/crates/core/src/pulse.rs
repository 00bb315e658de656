//! Density-matrix simulation of pulsed EPR sequences.
//!
//! States live in the eigenbasis of the static spin Hamiltonian, in a frame
//! rotating at the probe frequency: level k carries k microwave quanta, so the
//! frame Hamiltonian is diag(E_k − E_0 − f·k). Pulses use the rotating-wave
//! drive between adjacent levels; delays are free precession plus
//! phenomenological T1/T2 damping. Inhomogeneous broadening is a Gaussian
//! distribution of detunings sampled by Gauss–Hermite quadrature.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::cw::{lines_for, reference_amplitude, FieldSweep, Populations, SweepRange};
use crate::error::{invalid, Error, Result};
use crate::linalg::{c, hermitian_eigenvalues, hermiticity_defect, CMatrix, Propagator, C64};
use crate::pump::{thermal_level_populations, PopulationState, PumpModel};
use crate::quadrature::gaussian_samples;
use crate::spectrum::{AxisKind, LineShape, Spectrum};
use crate::spin::{FieldOrientation, SpinHamiltonian, SpinSystem};
use crate::units::{attenuation_amplitude_factor, ROOM_TEMPERATURE_K};

pub const DEFAULT_QUADRATURE_POINTS: usize = 16;

/// Largest pump–probe separation, as a fraction of the probe frequency.
const MAX_FRAME_DETUNING: f64 = 0.05;
/// Samples taken across a finite acquisition window.
const ACQUISITION_SAMPLES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Probe,
    Pump,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    /// Linearly polarized microwave amplitude, Gauss.
    B1Gauss(f64),
    /// Attenuation relative to the engine's reference B1.
    AttenuationDb(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwPulse {
    pub channel: Channel,
    pub duration_ns: f64,
    pub drive: Drive,
    pub phase_deg: f64,
}

impl MwPulse {
    pub fn probe(duration_ns: f64, b1_gauss: f64, phase_deg: f64) -> Self {
        MwPulse {
            channel: Channel::Probe,
            duration_ns,
            drive: Drive::B1Gauss(b1_gauss),
            phase_deg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Mw(MwPulse),
    Delay { duration_us: f64 },
    Optical { duration_us: f64 },
    AcquireEcho { window_us: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSequence {
    pub events: Vec<Event>,
}

impl PulseSequence {
    pub fn new(events: Vec<Event>) -> Result<Self> {
        let seq = PulseSequence { events };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, e) in self.events.iter().enumerate() {
            let d = match e {
                Event::Mw(p) => {
                    if !p.phase_deg.is_finite() {
                        return Err(Error::Sequence(format!("event {k}: phase is not finite")));
                    }
                    p.duration_ns
                }
                Event::Delay { duration_us } | Event::Optical { duration_us } => *duration_us,
                Event::AcquireEcho { window_us } => *window_us,
            };
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Sequence(format!("event {k}: duration {d} must be ≥ 0")));
            }
        }
        Ok(())
    }

    pub fn acquisitions(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::AcquireEcho { .. }))
            .count()
    }

    /// π/2 – τ – π – τ – echo, both pulses at one B1 (π twice as long).
    pub fn hahn_echo(pi_half_ns: f64, b1_gauss: f64, tau_us: f64, phase_deg: f64) -> Result<Self> {
        Self::new(vec![
            Event::Mw(MwPulse::probe(pi_half_ns, b1_gauss, phase_deg)),
            Event::Delay { duration_us: tau_us },
            Event::Mw(MwPulse::probe(2.0 * pi_half_ns, b1_gauss, phase_deg)),
            Event::Delay { duration_us: tau_us },
            Event::AcquireEcho { window_us: 0.0 },
        ])
    }

    pub fn total_duration_us(&self) -> f64 {
        self.events
            .iter()
            .map(|e| match e {
                Event::Mw(p) => p.duration_ns * 1e-3,
                Event::Delay { duration_us } | Event::Optical { duration_us } => *duration_us,
                Event::AcquireEcho { window_us } => *window_us,
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationParams {
    pub t1_us: f64,
    pub t2_us: f64,
}

impl RelaxationParams {
    pub fn new(t1_us: f64, t2_us: f64) -> Result<Self> {
        if !(t1_us.is_finite() && t1_us > 0.0 && t2_us.is_finite() && t2_us > 0.0) {
            return Err(invalid("relaxation", format!("T1 = {t1_us}, T2 = {t2_us} µs must be > 0")));
        }
        if t2_us > 2.0 * t1_us {
            return Err(invalid("relaxation", format!("T2 = {t2_us} µs exceeds 2·T1 = {} µs", 2.0 * t1_us)));
        }
        Ok(RelaxationParams { t1_us, t2_us })
    }
}

/// Quadrature-sampled ensemble: one density matrix per detuning offset.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinEnsembleState {
    pub rho: Vec<CMatrix>,
    pub weights: Vec<f64>,
    pub offsets_mhz: Vec<f64>,
    pub frame_ghz: f64,
    pub inhomogeneous_width_mhz: f64,
    pub time_us: f64,
}

impl SpinEnsembleState {
    pub fn dimension(&self) -> usize {
        self.rho[0].nrows()
    }

    pub fn mean(&self) -> CMatrix {
        let n = self.dimension();
        self.rho
            .iter()
            .zip(&self.weights)
            .fold(CMatrix::zeros(n, n), |acc, (r, w)| acc + r * c(*w))
    }

    fn weighted(&self, f: impl Fn(&CMatrix) -> C64) -> C64 {
        self.rho.iter().zip(&self.weights).map(|(r, w)| f(r) * *w).sum()
    }

    pub fn trace(&self) -> C64 {
        self.weighted(|r| r.trace())
    }

    /// Populations by ascending level energy.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dimension()).map(|k| self.weighted(|r| r[(k, k)]).re).collect()
    }

    pub fn population_difference(&self, lower: usize, upper: usize) -> f64 {
        self.weighted(|r| r[(lower, lower)] - r[(upper, upper)]).re
    }

    pub fn coherence(&self, lower: usize, upper: usize) -> C64 {
        self.weighted(|r| r[(lower, upper)])
    }

    /// 2·|ρ_{k,k+1}|; equals the population difference right after an ideal π/2 pulse.
    pub fn echo_amplitude(&self, lower: usize) -> f64 {
        2.0 * self.coherence(lower, lower + 1).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.rho
            .iter()
            .map(|r| hermitian_eigenvalues(&hermitize(r))[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.rho.iter().map(hermiticity_defect).fold(0.0, f64::max)
    }

    /// tr(ρ²) of each isochromat.
    pub fn purities(&self) -> Vec<f64> {
        self.rho.iter().map(|r| (r * r).trace().re).collect()
    }
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Echo {
    pub time_us: f64,
    pub amplitude: f64,
    pub coherence: C64,
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    pub state: SpinEnsembleState,
    pub echoes: Vec<Echo>,
}

#[derive(Debug, Clone)]
pub struct PulseEngine {
    energies: Vec<f64>,
    /// |⟨k|S⊥|k+1⟩|
    couplings: Vec<f64>,
    gamma: f64,
    probe_mhz: f64,
    pump_mhz: Option<f64>,
    reference_b1_gauss: Option<f64>,
    probed: usize,
    selective: bool,
    relaxation: Option<RelaxationParams>,
    optical: Option<PumpModel>,
    equilibrium: Vec<f64>,
    inhomogeneous_width_mhz: f64,
    isochromats: Vec<(f64, f64)>,
}

impl PulseEngine {
    /// Engine probing the level pair (`probed_lower`, `probed_lower + 1`).
    pub fn new(sys: &SpinSystem, field: &FieldOrientation, probe_ghz: f64, probed_lower: usize) -> Result<Self> {
        if !(probe_ghz.is_finite() && probe_ghz > 0.0) {
            return Err(invalid("probe frequency", format!("{probe_ghz} GHz must be > 0")));
        }
        let ham = SpinHamiltonian::new(sys)?;
        let set = ham.transitions(field);
        let n = set.energies.len();
        if probed_lower + 1 >= n {
            return Err(invalid(
                "probed transition",
                format!("lower level {probed_lower} leaves no upper level in a {n}-level system"),
            ));
        }
        let couplings = (0..n - 1).map(|k| set.perpendicular[(k, k + 1)].norm()).collect();
        let equilibrium = thermal_level_populations(&set.energies, ROOM_TEMPERATURE_K);
        Ok(PulseEngine {
            energies: set.energies,
            couplings,
            gamma: sys.gyromagnetic(),
            probe_mhz: probe_ghz * 1e3,
            pump_mhz: None,
            reference_b1_gauss: None,
            probed: probed_lower,
            selective: true,
            relaxation: None,
            optical: None,
            equilibrium,
            inhomogeneous_width_mhz: 0.0,
            isochromats: vec![(0.0, 1.0)],
        })
    }

    pub fn with_temperature(mut self, temperature_k: f64) -> Result<Self> {
        if !(temperature_k > 0.0 && temperature_k.is_finite()) {
            return Err(invalid("temperature", format!("{temperature_k} K must be > 0")));
        }
        self.equilibrium = thermal_level_populations(&self.energies, temperature_k);
        Ok(self)
    }

    pub fn with_pump_frequency(mut self, pump_ghz: f64) -> Result<Self> {
        let fp = pump_ghz * 1e3;
        if !((fp - self.probe_mhz).abs() <= MAX_FRAME_DETUNING * self.probe_mhz) {
            return Err(invalid(
                "pump frequency",
                format!("{pump_ghz} GHz is too far from the probe frame for the rotating-wave drive"),
            ));
        }
        self.pump_mhz = Some(fp);
        Ok(self)
    }

    pub fn with_reference_b1(mut self, b1_gauss: f64) -> Result<Self> {
        if !(b1_gauss.is_finite() && b1_gauss > 0.0) {
            return Err(invalid("reference B1", format!("{b1_gauss} G must be > 0")));
        }
        self.reference_b1_gauss = Some(b1_gauss);
        Ok(self)
    }

    pub fn with_relaxation(mut self, params: RelaxationParams) -> Self {
        self.relaxation = Some(params);
        self
    }

    /// Attach optical pumping; the dark equilibrium becomes the model's thermal state.
    pub fn with_optical_pumping(mut self, model: PumpModel) -> Result<Self> {
        if model.levels() != self.energies.len() {
            return Err(invalid("pump model", "level count differs from the spin system"));
        }
        self.equilibrium = model.thermal_state().by_energy();
        self.optical = Some(model);
        Ok(self)
    }

    /// Gaussian detuning distribution with standard deviation `width_mhz`.
    pub fn with_inhomogeneity(mut self, width_mhz: f64, points: usize) -> Result<Self> {
        if !(width_mhz.is_finite() && width_mhz >= 0.0) || points == 0 {
            return Err(invalid("inhomogeneous width", format!("{width_mhz} MHz with {points} points")));
        }
        self.inhomogeneous_width_mhz = width_mhz;
        self.isochromats = gaussian_samples(width_mhz, points);
        Ok(self)
    }

    /// Drive every adjacent pair instead of the probed transition only.
    pub fn drive_all_transitions(mut self) -> Self {
        self.selective = false;
        self
    }

    pub fn dimension(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn probed(&self) -> usize {
        self.probed
    }

    pub fn relaxation(&self) -> Option<RelaxationParams> {
        self.relaxation
    }

    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }

    pub fn transition_frequency_mhz(&self, lower: usize) -> f64 {
        self.energies[lower + 1] - self.energies[lower]
    }

    /// Probe frequency minus the probed transition frequency.
    pub fn detuning_mhz(&self) -> f64 {
        self.probe_mhz - self.transition_frequency_mhz(self.probed)
    }

    /// On-resonance nutation frequency of the probed transition, MHz.
    pub fn nutation_frequency_mhz(&self, b1_gauss: f64) -> f64 {
        self.gamma * b1_gauss * self.couplings[self.probed]
    }

    /// B1 that rotates the probed transition by `angle_deg` in `duration_ns`.
    pub fn b1_for_rotation(&self, angle_deg: f64, duration_ns: f64) -> Result<f64> {
        if !(duration_ns > 0.0) {
            return Err(invalid("pulse", format!("duration {duration_ns} ns must be > 0")));
        }
        let coupling = self.couplings[self.probed];
        if coupling < 1e-9 {
            return Err(Error::Numerical("probed transition has no drive coupling".into()));
        }
        let cycles = angle_deg / 360.0;
        Ok(cycles / (duration_ns * 1e-3) / (self.gamma * coupling))
    }

    pub fn resolve_b1(&self, drive: Drive) -> Result<f64> {
        let b1 = match drive {
            Drive::B1Gauss(b) => b,
            Drive::AttenuationDb(db) => {
                let reference = self.reference_b1_gauss.ok_or_else(|| {
                    invalid("pulse", "attenuation given without a reference B1 for 0 dB")
                })?;
                reference * attenuation_amplitude_factor(db)
            }
        };
        if !(b1.is_finite() && b1 >= 0.0) {
            return Err(invalid("pulse", format!("B1 = {b1} G must be ≥ 0")));
        }
        Ok(b1)
    }

    pub fn state_from_populations(&self, by_energy: &[f64]) -> Result<SpinEnsembleState> {
        if by_energy.len() != self.dimension() {
            return Err(invalid("initial state", "population count differs from the spin system"));
        }
        let total: f64 = by_energy.iter().sum();
        if by_energy.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(invalid("initial state", "populations must be ≥ 0 and sum to 1"));
        }
        let diag = CMatrix::from_fn(self.dimension(), self.dimension(), |r, col| {
            if r == col {
                c(by_energy[r])
            } else {
                c(0.0)
            }
        });
        Ok(SpinEnsembleState {
            rho: vec![diag; self.isochromats.len()],
            weights: self.isochromats.iter().map(|(_, w)| *w).collect(),
            offsets_mhz: self.isochromats.iter().map(|(x, _)| *x).collect(),
            frame_ghz: self.probe_mhz * 1e-3,
            inhomogeneous_width_mhz: self.inhomogeneous_width_mhz,
            time_us: 0.0,
        })
    }

    pub fn thermal_state(&self) -> SpinEnsembleState {
        self.state_from_populations(&self.equilibrium)
            .expect("equilibrium populations are normalized")
    }

    fn frame_diagonal(&self, frame_mhz: f64, offset_mhz: f64) -> Vec<f64> {
        let e0 = self.energies[0];
        self.energies
            .iter()
            .enumerate()
            .map(|(k, e)| e - e0 - (frame_mhz - offset_mhz) * k as f64)
            .collect()
    }

    /// Adjacent pair a pulse on `frame_mhz` addresses selectively.
    fn addressed(&self, frame_mhz: f64) -> usize {
        (0..self.dimension() - 1)
            .min_by(|&a, &b| {
                let da = (self.transition_frequency_mhz(a) - frame_mhz).abs();
                let db = (self.transition_frequency_mhz(b) - frame_mhz).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }

    fn pulse_generators(&self, frame_mhz: f64, b1_gauss: f64, phase_deg: f64, target: usize) -> Vec<Propagator> {
        let nu1 = 0.5 * self.gamma * b1_gauss;
        let phase = C64::from_polar(1.0, -phase_deg.to_radians());
        let pairs: Vec<usize> = if self.selective {
            vec![target]
        } else {
            (0..self.dimension() - 1).collect()
        };
        self.isochromats
            .iter()
            .map(|&(offset, _)| {
                let n = self.dimension();
                let diag = self.frame_diagonal(frame_mhz, offset);
                let mut h = CMatrix::from_fn(n, n, |r, col| if r == col { c(diag[r]) } else { c(0.0) });
                for &k in &pairs {
                    let v = phase * (nu1 * self.couplings[k]);
                    h[(k + 1, k)] = v;
                    h[(k, k + 1)] = v.conj();
                }
                Propagator::new(&h)
            })
            .collect()
    }

    /// diag(exp(i 2π Δ k t)) taking the probe frame to a frame Δ higher.
    fn frame_shift(&self, delta_mhz: f64, t_us: f64) -> CMatrix {
        let n = self.dimension();
        CMatrix::from_fn(n, n, |r, col| {
            if r == col {
                C64::from_polar(1.0, 2.0 * PI * delta_mhz * r as f64 * t_us)
            } else {
                c(0.0)
            }
        })
    }

    pub fn apply_pulse(&self, state: &SpinEnsembleState, pulse: &MwPulse) -> Result<SpinEnsembleState> {
        if !(pulse.duration_ns.is_finite() && pulse.duration_ns >= 0.0) {
            return Err(Error::Sequence(format!("pulse duration {} ns", pulse.duration_ns)));
        }
        let b1 = self.resolve_b1(pulse.drive)?;
        let frame = match pulse.channel {
            Channel::Probe => self.probe_mhz,
            Channel::Pump => self
                .pump_mhz
                .ok_or_else(|| invalid("pulse", "pump-channel pulse without a pump frequency"))?,
        };
        let target = match pulse.channel {
            Channel::Probe => self.probed,
            Channel::Pump => self.addressed(frame),
        };
        let t = pulse.duration_ns * 1e-3;
        let delta = frame - self.probe_mhz;
        let (into, back) = if delta != 0.0 {
            (
                Some(self.frame_shift(delta, state.time_us)),
                Some(self.frame_shift(delta, state.time_us + t).adjoint()),
            )
        } else {
            (None, None)
        };
        let gens = self.pulse_generators(frame, b1, pulse.phase_deg, target);
        let mut next = state.clone();
        for (rho, g) in next.rho.iter_mut().zip(&gens) {
            let mut r = match &into {
                Some(v) => v * &*rho * v.adjoint(),
                None => rho.clone(),
            };
            let u = g.unitary(t);
            r = &u * r * u.adjoint();
            if let Some(w) = &back {
                r = w * r * w.adjoint();
            }
            *rho = r;
        }
        next.time_us += t;
        Ok(next)
    }

    /// Phenomenological damping: coherences × exp(−dt/T2), populations relax
    /// toward equilibrium with exp(−dt/T1). Does not advance the clock.
    pub fn apply_relaxation(
        &self,
        state: &SpinEnsembleState,
        params: &RelaxationParams,
        dt_us: f64,
    ) -> Result<SpinEnsembleState> {
        if !(dt_us >= 0.0) {
            return Err(invalid("relaxation", format!("dt = {dt_us} µs must be ≥ 0")));
        }
        let a = (-dt_us / params.t1_us).exp();
        let b = (-dt_us / params.t2_us).exp();
        let mut next = state.clone();
        for rho in next.rho.iter_mut() {
            damp(rho, &self.equilibrium, a, b);
        }
        Ok(next)
    }

    fn precess(&self, state: &mut SpinEnsembleState, dt_us: f64) {
        for (rho, &offset) in state.rho.iter_mut().zip(&state.offsets_mhz) {
            let h = self.frame_diagonal(self.probe_mhz, offset);
            let n = h.len();
            for r in 0..n {
                for col in 0..n {
                    if r != col {
                        rho[(r, col)] *= C64::from_polar(1.0, -2.0 * PI * (h[r] - h[col]) * dt_us);
                    }
                }
            }
        }
    }

    /// Free precession with relaxation (when configured).
    pub fn apply_delay(&self, state: &SpinEnsembleState, dt_us: f64) -> Result<SpinEnsembleState> {
        if !(dt_us.is_finite() && dt_us >= 0.0) {
            return Err(Error::Sequence(format!("delay {dt_us} µs must be ≥ 0")));
        }
        let mut next = match &self.relaxation {
            Some(p) => self.apply_relaxation(state, p, dt_us)?,
            None => state.clone(),
        };
        self.precess(&mut next, dt_us);
        next.time_us += dt_us;
        Ok(next)
    }

    /// Illumination: populations follow the pump model; coherences are lost at
    /// the repopulation rate on top of T2.
    pub fn apply_optical(&self, state: &SpinEnsembleState, dt_us: f64) -> Result<SpinEnsembleState> {
        let model = self
            .optical
            .as_ref()
            .ok_or_else(|| Error::Sequence("optical pulse without an optical pumping model".into()))?;
        if !(dt_us.is_finite() && dt_us >= 0.0) {
            return Err(Error::Sequence(format!("optical pulse {dt_us} µs must be ≥ 0")));
        }
        let target = PopulationState::new(model.illuminated_fixed_point(), 0.0)?.by_energy();
        let t_eff = model.effective_pump_time();
        let a = (-dt_us / t_eff).exp();
        let t2_rate = self.relaxation.map_or(0.0, |p| 1.0 / p.t2_us);
        let b = (-dt_us * (1.0 / t_eff + t2_rate)).exp();
        let mut next = state.clone();
        for rho in next.rho.iter_mut() {
            damp(rho, &target, a, b);
        }
        self.precess(&mut next, dt_us);
        next.time_us += dt_us;
        Ok(next)
    }

    fn acquire(&self, state: &SpinEnsembleState, window_us: f64) -> Result<(SpinEnsembleState, Echo)> {
        let sample = |s: &SpinEnsembleState| {
            let coh = s.coherence(self.probed, self.probed + 1);
            Echo {
                time_us: s.time_us,
                amplitude: 2.0 * coh.norm(),
                coherence: coh,
            }
        };
        if window_us == 0.0 {
            return Ok((state.clone(), sample(state)));
        }
        let step = window_us / (ACQUISITION_SAMPLES - 1) as f64;
        let mut s = state.clone();
        let mut best = sample(&s);
        for _ in 1..ACQUISITION_SAMPLES {
            s = self.apply_delay(&s, step)?;
            let e = sample(&s);
            if e.amplitude > best.amplitude {
                best = e;
            }
        }
        Ok((s, best))
    }

    pub fn apply_event(&self, state: &SpinEnsembleState, event: &Event) -> Result<(SpinEnsembleState, Option<Echo>)> {
        Ok(match event {
            Event::Mw(p) => (self.apply_pulse(state, p)?, None),
            Event::Delay { duration_us } => (self.apply_delay(state, *duration_us)?, None),
            Event::Optical { duration_us } => (self.apply_optical(state, *duration_us)?, None),
            Event::AcquireEcho { window_us } => {
                let (s, e) = self.acquire(state, *window_us)?;
                (s, Some(e))
            }
        })
    }

    pub fn run(&self, seq: &PulseSequence, initial: &SpinEnsembleState) -> Result<SequenceOutput> {
        seq.validate()?;
        let mut state = initial.clone();
        let mut echoes = Vec::new();
        for event in &seq.events {
            let (next, echo) = self.apply_event(&state, event)?;
            state = next;
            echoes.extend(echo);
        }
        Ok(SequenceOutput { state, echoes })
    }

    /// Like [`run`](Self::run) but requires at least one acquisition.
    pub fn run_detected(&self, seq: &PulseSequence, initial: &SpinEnsembleState) -> Result<SequenceOutput> {
        if seq.acquisitions() == 0 {
            return Err(Error::Sequence("detected sequence has no echo acquisition".into()));
        }
        self.run(seq, initial)
    }
}

fn damp(rho: &mut CMatrix, target: &[f64], a: f64, b: f64) {
    let n = rho.nrows();
    for r in 0..n {
        for col in 0..n {
            if r == col {
                let p = rho[(r, r)].re;
                rho[(r, r)] = c(target[r] + (p - target[r]) * a);
            } else {
                rho[(r, col)] *= b;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiTrace {
    pub b1_gauss: f64,
    pub attenuation_db: Option<f64>,
    /// Probed population difference vs nutation pulse length (ns).
    pub trace: Spectrum,
    pub frequency_mhz: f64,
}

/// Nutation traces for each drive strength, starting from `initial`.
pub fn rabi_traces(
    engine: &PulseEngine,
    drives: &[Drive],
    times_ns: &[f64],
    initial: &SpinEnsembleState,
) -> Result<Vec<RabiTrace>> {
    if times_ns.windows(2).any(|w| w[1] <= w[0]) || times_ns.first().is_some_and(|t| *t < 0.0) {
        return Err(invalid("time grid", "nutation lengths must be ≥ 0 and increasing"));
    }
    drives
        .iter()
        .map(|&drive| {
            let b1 = engine.resolve_b1(drive)?;
            let gens = engine.pulse_generators(engine.probe_mhz, b1, 0.0, engine.probed);
            let values: Vec<f64> = times_ns
                .par_iter()
                .map(|&t| {
                    let mut s = initial.clone();
                    for (rho, g) in s.rho.iter_mut().zip(&gens) {
                        let u = g.unitary(t * 1e-3);
                        *rho = &u * &*rho * u.adjoint();
                    }
                    s.population_difference(engine.probed, engine.probed + 1)
                })
                .collect();
            let t_us: Vec<f64> = times_ns.iter().map(|t| t * 1e-3).collect();
            let frequency_mhz = dominant_frequency(&t_us, &values)?;
            let attenuation_db = match drive {
                Drive::AttenuationDb(db) => Some(db),
                Drive::B1Gauss(_) => None,
            };
            let mut trace = Spectrum::new(AxisKind::TimeNs, times_ns.to_vec(), values)?
                .with_meta("B1_G", b1)
                .with_meta("rabi_MHz", frequency_mhz)
                .with_meta("detuning_MHz", engine.detuning_mhz())
                .with_meta("inhomogeneousWidth_MHz", engine.inhomogeneous_width_mhz);
            if let Some(db) = attenuation_db {
                trace = trace.with_meta("attenuation_dB", db);
            }
            Ok(RabiTrace {
                b1_gauss: b1,
                attenuation_db,
                trace,
                frequency_mhz,
            })
        })
        .collect()
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(1e-12) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Residual sum of squares of the best a·cos + b·sin + c fit at frequency `f`.
fn sinusoid_residual(t: &[f64], y: &[f64], f: f64) -> f64 {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let w = 2.0 * PI * f * ti;
        let row = Vector3::new(w.cos(), w.sin(), 1.0);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let Some(coef) = ata.lu().solve(&aty) else {
        return f64::INFINITY;
    };
    t.iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let w = 2.0 * PI * f * ti;
            let r = yi - (coef[0] * w.cos() + coef[1] * w.sin() + coef[2]);
            r * r
        })
        .sum()
}

/// Oscillation frequency of a sampled trace (cycles per time unit).
///
/// The Hann-windowed spectrum locates the peak; a sinusoid least-squares fit
/// around it removes the window's leakage bias.
pub fn dominant_frequency(t: &[f64], y: &[f64]) -> Result<f64> {
    let n = t.len();
    if n < 8 || y.len() != n {
        return Err(invalid("trace", format!("{n} samples, at least 8 required")));
    }
    let t0 = t[0];
    let span = t[n - 1] - t0;
    if !(span > 0.0) {
        return Err(invalid("trace", "time span must be positive"));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let windowed: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let x = (ti - t0) / span;
            (ti - t0, (yi - mean) * 0.5 * (1.0 - (2.0 * PI * x).cos()))
        })
        .collect();
    if windowed.iter().all(|(_, v)| v.abs() < 1e-15) {
        return Err(Error::Numerical("trace has no oscillating component".into()));
    }
    let power = |f: f64| {
        let (re, im) = windowed.iter().fold((0.0, 0.0), |(re, im), &(ti, v)| {
            let a = -2.0 * PI * f * ti;
            (re + v * a.cos(), im + v * a.sin())
        });
        re * re + im * im
    };
    let nyquist = 0.5 * (n - 1) as f64 / span;
    let step = 0.25 / span;
    let lowest = 1.5 / span;
    if lowest >= nyquist {
        return Err(invalid("trace", "too few samples to resolve an oscillation"));
    }
    let mut best = (lowest, power(lowest));
    let mut f = lowest + step;
    while f <= nyquist {
        let p = power(f);
        if p > best.1 {
            best = (f, p);
        }
        f += step;
    }
    let peak = golden_max(power, (best.0 - step).max(lowest * 0.5), best.0 + step);
    let rel: Vec<f64> = t.iter().map(|ti| ti - t0).collect();
    let fitted = golden_max(
        |f| -sinusoid_residual(&rel, y, f),
        (peak - 2.0 * step).max(0.5 / span),
        peak + 2.0 * step,
    );
    Ok(fitted)
}

/// Light-on prelude ahead of an echo sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalPrelude {
    pub light_us: f64,
    /// Dark gap between light-off and the first microwave pulse.
    pub gap_us: f64,
}

impl Default for OpticalPrelude {
    fn default() -> Self {
        OpticalPrelude {
            light_us: 900.0,
            gap_us: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HahnEchoSettings {
    pub pi_half_ns: f64,
    pub phase_deg: f64,
    pub prelude: Option<OpticalPrelude>,
}

impl Default for HahnEchoSettings {
    fn default() -> Self {
        HahnEchoSettings {
            pi_half_ns: 16.0,
            phase_deg: 0.0,
            prelude: Some(OpticalPrelude::default()),
        }
    }
}

/// State at the start of the microwave sequence (after any optical prelude).
pub fn prepared_state(engine: &PulseEngine, prelude: Option<OpticalPrelude>) -> Result<SpinEnsembleState> {
    let thermal = engine.thermal_state();
    match prelude {
        None => Ok(thermal),
        Some(p) => {
            let lit = engine.apply_optical(&thermal, p.light_us)?;
            engine.apply_delay(&lit, p.gap_us)
        }
    }
}

/// Echo amplitude vs 2τ.
pub fn hahn_echo_decay(engine: &PulseEngine, taus_us: &[f64], settings: &HahnEchoSettings) -> Result<Spectrum> {
    let relax = engine
        .relaxation
        .ok_or_else(|| invalid("echo decay", "relaxation parameters are required"))?;
    if taus_us.windows(2).any(|w| w[1] <= w[0]) || taus_us.first().is_some_and(|t| *t < 0.0) {
        return Err(invalid("τ grid", "delays must be ≥ 0 and increasing"));
    }
    let b1 = engine.b1_for_rotation(90.0, settings.pi_half_ns)?;
    let start = prepared_state(engine, settings.prelude)?;
    let amplitudes = taus_us
        .par_iter()
        .map(|&tau| {
            let seq = PulseSequence::hahn_echo(settings.pi_half_ns, b1, tau, settings.phase_deg)?;
            let out = engine.run_detected(&seq, &start)?;
            Ok(out.echoes[0].amplitude)
        })
        .collect::<Result<Vec<f64>>>()?;
    let axis = taus_us.iter().map(|t| 2.0 * t).collect();
    let mut s = Spectrum::new(AxisKind::TimeUs, axis, amplitudes)?
        .with_meta("T1_us", relax.t1_us)
        .with_meta("T2_us", relax.t2_us)
        .with_meta("piHalf_ns", settings.pi_half_ns)
        .with_meta("B1_G", b1)
        .with_meta(
            "initial_population_difference",
            start.population_difference(engine.probed, engine.probed + 1),
        );
    if let Some(p) = settings.prelude {
        s = s.with_meta("optical_us", p.light_us).with_meta("gap_us", p.gap_us);
    }
    Ok(s)
}

/// Additional paramagnetic species contributing lines to a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraSpecies {
    pub system: SpinSystem,
    /// Concentration relative to the main species.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoSweepConfig {
    pub theta_deg: f64,
    pub f_ghz: f64,
    pub range: SweepRange,
    /// The absorption variant of this shape is used.
    pub shape: LineShape,
    pub populations: Populations,
    pub two_tau_us: f64,
    pub t2_us: f64,
    pub extra: Vec<ExtraSpecies>,
}

/// Echo-detected field sweep: absorption lines scaled by exp(−2τ/T2),
/// normalized so the thermal central line at 2τ → 0 peaks at 1.
pub fn echo_detected_field_sweep(sys: &SpinSystem, cfg: &EchoSweepConfig) -> Result<FieldSweep> {
    if !(cfg.two_tau_us >= 0.0 && cfg.t2_us > 0.0) {
        return Err(invalid("echo sweep", "2τ must be ≥ 0 and T2 > 0"));
    }
    let shape = LineShape::new(cfg.shape.kind.absorption(), cfg.shape.width_pp)?;
    let window = cfg.range.search_window(20.0 * shape.width_pp);
    let ham = SpinHamiltonian::new(sys)?;
    let temperature = match &cfg.populations {
        Populations::Thermal { temperature_k } => *temperature_k,
        Populations::Fixed(_) => ROOM_TEMPERATURE_K,
    };
    let mut lines = lines_for(&ham, cfg.theta_deg, cfg.f_ghz, window, &cfg.populations)?;
    let mut per_line_shape = vec![shape; lines.len()];
    for species in &cfg.extra {
        let h = SpinHamiltonian::new(&species.system)?;
        let s = LineShape::new(shape.kind, species.system.linewidth_pp)?;
        for mut l in lines_for(&h, cfg.theta_deg, cfg.f_ghz, window, &Populations::Thermal { temperature_k: temperature })? {
            l.weight *= species.weight;
            lines.push(l);
            per_line_shape.push(s);
        }
    }
    let decay = (-cfg.two_tau_us / cfg.t2_us).exp();
    let scale = decay / reference_amplitude(sys, cfg.f_ghz, &shape, temperature)?;
    let axis = cfg.range.axis();
    let intensity = axis
        .iter()
        .map(|&b| {
            lines
                .iter()
                .zip(&per_line_shape)
                .map(|(l, s)| l.weight * s.value(b - l.resonance.field_gauss))
                .sum::<f64>()
                * scale
        })
        .collect();
    let spectrum = Spectrum::new(AxisKind::FieldGauss, axis, intensity)?
        .with_meta("fMW_GHz", cfg.f_ghz)
        .with_meta("theta_deg", cfg.theta_deg)
        .with_meta("twoTau_us", cfg.two_tau_us)
        .with_meta("T2_us", cfg.t2_us)
        .with_meta("extra_species", cfg.extra.len());
    Ok(FieldSweep { spectrum, lines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::resonance_fields;
    use crate::spectrum::LineShapeKind;

    const F: f64 = 9.308;

    fn v2() -> SpinSystem {
        SpinSystem::v2_silicon_vacancy()
    }

    /// Engine exactly on resonance with the low-field (2,3) line at θ = 0.
    fn engine() -> PulseEngine {
        let res = resonance_fields(&v2(), 0.0, F, (3250.0, 3400.0)).unwrap();
        let low = res.iter().find(|r| r.lower == 2).unwrap();
        let field = FieldOrientation::new(low.field_gauss, 0.0).unwrap();
        let probe = PulseEngine::new(&v2(), &field, F, 2).unwrap();
        let exact = probe.transition_frequency_mhz(2) * 1e-3;
        PulseEngine::new(&v2(), &field, exact, 2).unwrap()
    }

    fn pumped(engine: &PulseEngine) -> PumpModel {
        PumpModel::new(0.05, 228.8, 354.0, 300.0, engine.energies()).unwrap()
    }

    fn max_diff(a: &SpinEnsembleState, b: &SpinEnsembleState) -> f64 {
        a.rho
            .iter()
            .zip(&b.rho)
            .map(|(x, y)| (x - y).iter().map(|v| v.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_b1_pulse_leaves_populations_untouched() {
        let e = engine();
        let s = e.thermal_state();
        let out = e.apply_pulse(&s, &MwPulse::probe(100.0, 0.0, 0.0)).unwrap();
        assert!(max_diff(&s, &out) < 1e-15);
    }

    #[test]
    fn pi_pulse_inverts_probed_difference() {
        let e = engine();
        let s = e.thermal_state();
        let d = s.population_difference(2, 3);
        let b1 = e.b1_for_rotation(180.0, 40.0).unwrap();
        let out = e.apply_pulse(&s, &MwPulse::probe(40.0, b1, 0.0)).unwrap();
        assert!((out.population_difference(2, 3) + d).abs() < 1e-12 * d.abs().max(1e-6) + 1e-15);
        // doubled amplitude, half the length
        assert!((e.b1_for_rotation(180.0, 20.0).unwrap() - 2.0 * b1).abs() < 1e-12);
        let out2 = e.apply_pulse(&s, &MwPulse::probe(20.0, 2.0 * b1, 0.0)).unwrap();
        assert!(max_diff(&out, &out2) < 1e-12);
    }

    #[test]
    fn attenuation_requires_reference() {
        let e = engine();
        let p = MwPulse {
            channel: Channel::Probe,
            duration_ns: 10.0,
            drive: Drive::AttenuationDb(5.0),
            phase_deg: 0.0,
        };
        assert!(e.apply_pulse(&e.thermal_state(), &p).is_err());
        let e = e.with_reference_b1(1.0).unwrap();
        assert!((e.resolve_b1(p.drive).unwrap() - 0.562341325).abs() < 1e-8);
    }

    #[test]
    fn relaxation_identity_and_t2_scaling() {
        let relax = RelaxationParams::new(354.0, 48.0).unwrap();
        let e = engine().with_relaxation(relax);
        let b1 = e.b1_for_rotation(90.0, 16.0).unwrap();
        let s = e.apply_pulse(&e.thermal_state(), &MwPulse::probe(16.0, b1, 0.0)).unwrap();
        let same = e.apply_relaxation(&s, &relax, 0.0).unwrap();
        assert!(max_diff(&s, &same) == 0.0);
        let later = e.apply_relaxation(&s, &relax, 48.0).unwrap();
        let ratio = later.coherence(2, 3).norm() / s.coherence(2, 3).norm();
        assert!((ratio - (-1f64).exp()).abs() < 1e-12);
        assert!((later.trace().re - 1.0).abs() < 1e-12);
        assert!(RelaxationParams::new(10.0, 25.0).is_err());
        assert!(RelaxationParams::new(10.0, 20.0).is_ok());
    }

    #[test]
    fn delays_compose() {
        let e = engine().with_relaxation(RelaxationParams::new(354.0, 48.0).unwrap());
        let b1 = e.b1_for_rotation(90.0, 16.0).unwrap();
        let s = e.apply_pulse(&e.thermal_state(), &MwPulse::probe(16.0, b1, 30.0)).unwrap();
        let two = e.apply_delay(&e.apply_delay(&s, 3.7).unwrap(), 11.2).unwrap();
        let one = e.apply_delay(&s, 14.9).unwrap();
        assert!(max_diff(&one, &two) < 1e-14);
    }

    #[test]
    fn hahn_echo_decays_with_t2() {
        let e = engine().with_relaxation(RelaxationParams::new(354.0, 48.0).unwrap());
        let taus = [0.0, 1.2, 10.0, 24.0, 60.0];
        let s = hahn_echo_decay(&e, &taus, &HahnEchoSettings { prelude: None, ..Default::default() }).unwrap();
        let a0 = s.intensity[0];
        let d = e.thermal_state().population_difference(2, 3);
        assert!((a0 - d).abs() < 1e-12);
        for (x, y) in s.axis.iter().zip(&s.intensity) {
            assert!((y / a0 - (-x / 48.0).exp()).abs() < 1e-9, "2τ = {x}");
        }
        assert!((s.intensity[3] / a0 - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn optical_prelude_enlarges_echo_without_changing_decay() {
        let base = engine().with_relaxation(RelaxationParams::new(354.0, 48.0).unwrap());
        let e = base.clone().with_optical_pumping(pumped(&base)).unwrap();
        let taus = [0.0, 5.0, 20.0];
        let lit = hahn_echo_decay(&e, &taus, &HahnEchoSettings::default()).unwrap();
        let dark = hahn_echo_decay(&e, &taus, &HahnEchoSettings { prelude: None, ..Default::default() }).unwrap();
        let want = pumped(&base).after_optical_pulse(900.0, 20.0).unwrap().difference(2, 3);
        assert!((lit.intensity[0] - want).abs() < 1e-12, "{} vs {want}", lit.intensity[0]);
        assert!(lit.intensity[0] > dark.intensity[0]);
        for k in 0..taus.len() {
            let r1 = lit.intensity[k] / lit.intensity[0];
            let r2 = dark.intensity[k] / dark.intensity[0];
            assert!((r1 - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn echo_magnitude_ignores_global_phase() {
        let e = engine()
            .with_relaxation(RelaxationParams::new(354.0, 48.0).unwrap())
            .with_inhomogeneity(2.0, DEFAULT_QUADRATURE_POINTS)
            .unwrap();
        let b1 = e.b1_for_rotation(90.0, 16.0).unwrap();
        let amp = |phase| {
            let seq = PulseSequence::hahn_echo(16.0, b1, 3.0, phase).unwrap();
            e.run_detected(&seq, &e.thermal_state()).unwrap().echoes[0].amplitude
        };
        let a = amp(0.0);
        for phase in [37.0, 90.0, 211.0] {
            assert!((amp(phase) - a).abs() < 1e-12 * a.max(1e-12));
        }
    }

    #[test]
    fn inhomogeneous_dephasing_refocuses() {
        let e = engine()
            .with_inhomogeneity(3.0, DEFAULT_QUADRATURE_POINTS)
            .unwrap();
        let b1 = e.b1_for_rotation(90.0, 4.0).unwrap();
        let start = e.thermal_state();
        let fid = e.apply_delay(&e.apply_pulse(&start, &MwPulse::probe(4.0, b1, 0.0)).unwrap(), 2.0).unwrap();
        let echo = e.run_detected(&PulseSequence::hahn_echo(4.0, b1, 2.0, 0.0).unwrap(), &start).unwrap();
        assert!(fid.echo_amplitude(2) < 0.05 * echo.echoes[0].amplitude);
        assert!(echo.echoes[0].amplitude > 0.9 * start.population_difference(2, 3));
    }

    #[test]
    fn detected_signal_is_linear_in_initial_difference() {
        let e = engine();
        let b1 = e.b1_for_rotation(90.0, 16.0).unwrap();
        let seq = PulseSequence::hahn_echo(16.0, b1, 1.0, 0.0).unwrap();
        let base = [0.25; 4];
        let delta = [-0.01, -0.004, 0.006, 0.008];
        let state = |k: f64| {
            let p: Vec<f64> = base.iter().zip(&delta).map(|(b, d)| b + k * d).collect();
            e.state_from_populations(&p).unwrap()
        };
        let a1 = e.run_detected(&seq, &state(1.0)).unwrap().echoes[0].coherence;
        let a2 = e.run_detected(&seq, &state(2.0)).unwrap().echoes[0].coherence;
        assert!((a2 - a1 * 2.0).norm() < 1e-9 * a2.norm());
    }

    #[test]
    fn detected_sequence_needs_acquisition() {
        let e = engine();
        let seq = PulseSequence::new(vec![Event::Delay { duration_us: 1.0 }]).unwrap();
        assert!(matches!(e.run_detected(&seq, &e.thermal_state()), Err(Error::Sequence(_))));
        assert!(PulseSequence::new(vec![Event::Delay { duration_us: -1.0 }]).is_err());
        let optical = PulseSequence::new(vec![Event::Optical { duration_us: 1.0 }]).unwrap();
        assert!(e.run(&optical, &e.thermal_state()).is_err());
    }

    #[test]
    fn rabi_frequency_scales_with_attenuation() {
        let e = engine().with_reference_b1(1.0).unwrap();
        let times: Vec<f64> = (0..801).map(|k| k as f64 * 5.0).collect();
        let drives = [Drive::AttenuationDb(10.0), Drive::AttenuationDb(5.0), Drive::AttenuationDb(0.0)];
        let traces = rabi_traces(&e, &drives, &times, &e.thermal_state()).unwrap();
        let f: Vec<f64> = traces.iter().map(|t| t.frequency_mhz).collect();
        for (t, d) in traces.iter().zip(&drives) {
            let want = e.nutation_frequency_mhz(e.resolve_b1(*d).unwrap());
            assert!((t.frequency_mhz / want - 1.0).abs() < 1e-4, "{} vs {want}", t.frequency_mhz);
        }
        assert!((f[1] / f[0] / 1.778279 - 1.0).abs() < 0.02);
        assert!((f[2] / f[0] / 3.162278 - 1.0).abs() < 0.02);
    }

    #[test]
    fn undamped_on_resonance_nutation() {
        let e = engine();
        let s = e.thermal_state();
        let d = s.population_difference(2, 3);
        let times: Vec<f64> = (0..400).map(|k| k as f64 * 10.0).collect();
        let tr = rabi_traces(&e, &[Drive::B1Gauss(0.3)], &times, &s).unwrap();
        let nu = e.nutation_frequency_mhz(0.3);
        for (t, y) in tr[0].trace.axis.iter().zip(&tr[0].trace.intensity) {
            assert!((y - d * (2.0 * PI * nu * t * 1e-3).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn off_resonance_follows_generalized_rabi() {
        let on = engine();
        let delta = 1.5;
        let probe = (on.transition_frequency_mhz(2) + delta) * 1e-3;
        let low = resonance_fields(&v2(), 0.0, F, (3250.0, 3400.0))
            .unwrap()
            .into_iter()
            .find(|r| r.lower == 2)
            .unwrap();
        let sys_field = FieldOrientation::new(low.field_gauss, 0.0).unwrap();
        let e = PulseEngine::new(&v2(), &sys_field, probe, 2).unwrap();
        assert!((e.detuning_mhz() - delta).abs() < 1e-9);
        let b1 = 1.0;
        let nu = e.nutation_frequency_mhz(b1);
        let times: Vec<f64> = (0..1001).map(|k| k as f64 * 4.0).collect();
        let tr = rabi_traces(&e, &[Drive::B1Gauss(b1)], &times, &e.thermal_state()).unwrap();
        let want = (nu * nu + delta * delta).sqrt();
        assert!((tr[0].frequency_mhz / want - 1.0).abs() < 0.01, "{} vs {want}", tr[0].frequency_mhz);
    }

    #[test]
    fn dominant_frequency_of_partial_periods() {
        let t: Vec<f64> = (0..300).map(|k| k as f64 * 0.01).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.3 + (2.0 * PI * 1.23 * t + 0.4).cos()).collect();
        assert!((dominant_frequency(&t, &y).unwrap() - 1.23).abs() < 1e-6);
        assert!(dominant_frequency(&t[..4], &y[..4]).is_err());
    }

    #[test]
    fn pump_channel_drives_the_addressed_line() {
        let e = engine().with_pump_frequency(F - 0.065).unwrap();
        // outer (0,1) line sits 2D·2 = 140 MHz lower; pump at −65 MHz addresses (1,2)
        let p = MwPulse {
            channel: Channel::Pump,
            duration_ns: 20.0,
            drive: Drive::B1Gauss(1.0),
            phase_deg: 0.0,
        };
        let s = e.thermal_state();
        let out = e.apply_pulse(&s, &p).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-12);
        assert!((out.population_difference(2, 3) - s.population_difference(2, 3)).abs() > 0.0);
        assert!(engine().with_pump_frequency(2.0 * F).is_err());
    }

    fn echo_cfg(two_tau: f64, extra: Vec<ExtraSpecies>) -> EchoSweepConfig {
        EchoSweepConfig {
            theta_deg: 0.0,
            f_ghz: F,
            range: SweepRange::new(3270.0, 3370.0, 2001).unwrap(),
            shape: LineShape::new(LineShapeKind::GaussianAbsorption, 3.0).unwrap(),
            populations: Populations::default(),
            two_tau_us: two_tau,
            t2_us: 48.0,
            extra,
        }
    }

    #[test]
    fn echo_sweep_lines_and_extra_species() {
        let s = echo_detected_field_sweep(&v2(), &echo_cfg(2.4, vec![])).unwrap();
        let fields: Vec<f64> = s.lines.iter().map(|l| l.resonance.field_gauss).collect();
        for (f, want) in fields.iter().zip([3297.0, 3320.5, 3345.0]) {
            assert!((f - want).abs() < 2.5, "{f}");
        }
        assert!(s.spectrum.intensity.iter().all(|v| *v >= 0.0));
        let low = fields[0];
        let carbon = SpinSystem::spin_half_resonant_at(low + 23.2, F * 1e3, 3.0, "carbon").unwrap();
        let with = echo_detected_field_sweep(&v2(), &echo_cfg(2.4, vec![ExtraSpecies { system: carbon, weight: 1.0 }])).unwrap();
        assert_eq!(with.lines.len(), 4);
        assert!((with.lines[3].resonance.field_gauss - low - 23.2).abs() < 0.01);
    }

    #[test]
    fn long_echo_delay_kills_the_sweep() {
        let near = echo_detected_field_sweep(&v2(), &echo_cfg(0.0, vec![])).unwrap();
        let far = echo_detected_field_sweep(&v2(), &echo_cfg(48.0 * 10.0, vec![])).unwrap();
        assert!(far.spectrum.max_abs() < 1e-3 * near.spectrum.max_abs());
        assert!((near.spectrum.max_abs() - 1.0).abs() < 0.05);
    }
}
