//! Ground-state population dynamics under optical pumping and spin-lattice
//! relaxation.
//!
//! Two competing first-order processes act on the 2S+1 level populations:
//! optical pumping toward a polarized state (time constant Top) and lattice
//! relaxation toward the thermal state (T1). Under constant illumination the
//! populations relax monoexponentially with 1/Top_eff = 1/Top + 1/T1 toward
//! the combined fixed point; in the dark they relax with T1 to thermal
//! equilibrium. Both cases are solved in closed form.

use crate::error::{invalid, Error, Result};
use crate::spectrum::{AxisKind, Spectrum};
use crate::units::BOLTZMANN_MHZ_PER_KELVIN;

const SUM_TOLERANCE: f64 = 1e-9;

/// High-temperature Boltzmann populations, in the order of `energies_mhz`.
pub fn thermal_level_populations(energies_mhz: &[f64], temperature_k: f64) -> Vec<f64> {
    let kt = BOLTZMANN_MHZ_PER_KELVIN * temperature_k;
    let raw: Vec<f64> = energies_mhz.iter().map(|e| 1.0 - e / kt).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Level occupation probabilities ordered by descending m_S.
///
/// With levels sorted by ascending energy (positive g, X-band fields),
/// energy level `k` is `p[n − 1 − k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub p: Vec<f64>,
    pub timestamp_us: f64,
}

impl PopulationState {
    pub fn new(p: Vec<f64>, timestamp_us: f64) -> Result<Self> {
        if p.len() < 2 {
            return Err(invalid("populations", "need at least two levels"));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("populations", "occupations must be finite and ≥ 0"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid("populations", format!("sum is {sum}, expected 1")));
        }
        Ok(PopulationState { p, timestamp_us })
    }

    pub fn uniform(levels: usize) -> Self {
        PopulationState {
            p: vec![1.0 / levels as f64; levels],
            timestamp_us: 0.0,
        }
    }

    /// From populations listed by ascending level energy.
    pub fn from_levels(by_energy: &[f64], timestamp_us: f64) -> Self {
        PopulationState {
            p: by_energy.iter().rev().copied().collect(),
            timestamp_us,
        }
    }

    pub fn levels(&self) -> usize {
        self.p.len()
    }

    /// Population of energy level `k` (ascending order).
    pub fn level(&self, k: usize) -> f64 {
        self.p[self.p.len() - 1 - k]
    }

    /// Populations in ascending level-energy order.
    pub fn by_energy(&self) -> Vec<f64> {
        self.p.iter().rev().copied().collect()
    }

    /// p_lower − p_upper for an energy-level pair.
    pub fn difference(&self, lower: usize, upper: usize) -> f64 {
        self.level(lower) - self.level(upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpModel {
    /// Pump polarization amplitude, 0 ≤ ε ≤ 1/4.
    pub epsilon: f64,
    /// Bare optical pumping time, µs.
    pub t_op_us: f64,
    pub t1_us: f64,
    pub temperature_k: f64,
    thermal: Vec<f64>,
    pump: Vec<f64>,
}

impl PumpModel {
    /// `level_energies_mhz` in ascending order, evaluated at the working field.
    pub fn new(
        epsilon: f64,
        t_op_us: f64,
        t1_us: f64,
        temperature_k: f64,
        level_energies_mhz: &[f64],
    ) -> Result<Self> {
        if !(0.0..=0.25).contains(&epsilon) {
            return Err(invalid("pump model", format!("ε = {epsilon} outside [0, 1/4]")));
        }
        if !(t_op_us > 0.0 && t_op_us.is_finite()) {
            return Err(invalid("pump model", format!("Top = {t_op_us} µs must be > 0")));
        }
        if !(t1_us > 0.0 && t1_us.is_finite()) {
            return Err(invalid("pump model", format!("T1 = {t1_us} µs must be > 0")));
        }
        if !(temperature_k > 0.0) {
            return Err(invalid("pump model", "temperature must be > 0 K"));
        }
        if level_energies_mhz.len() < 2 {
            return Err(invalid("pump model", "need at least two levels"));
        }
        let thermal: Vec<f64> = thermal_level_populations(level_energies_mhz, temperature_k)
            .into_iter()
            .rev()
            .collect();
        let target = polarization_target(thermal.len());
        let pump = thermal
            .iter()
            .zip(&target)
            .map(|(th, q)| (1.0 - 4.0 * epsilon) * th + 4.0 * epsilon * q)
            .collect();
        Ok(PumpModel {
            epsilon,
            t_op_us,
            t1_us,
            temperature_k,
            thermal,
            pump,
        })
    }

    /// Builds the model from an observed (effective) pumping time, i.e. the
    /// time constant a monoexponential fit to the illuminated segment returns.
    pub fn from_effective_pump_time(
        epsilon: f64,
        t_op_effective_us: f64,
        t1_us: f64,
        temperature_k: f64,
        level_energies_mhz: &[f64],
    ) -> Result<Self> {
        if !(t_op_effective_us > 0.0 && t_op_effective_us < t1_us) {
            return Err(invalid(
                "pump model",
                format!("effective Top = {t_op_effective_us} µs must lie in (0, T1)"),
            ));
        }
        let bare = 1.0 / (1.0 / t_op_effective_us - 1.0 / t1_us);
        Self::new(epsilon, bare, t1_us, temperature_k, level_energies_mhz)
    }

    /// 1 / (1/Top + 1/T1)
    pub fn effective_pump_time(&self) -> f64 {
        1.0 / (1.0 / self.t_op_us + 1.0 / self.t1_us)
    }

    pub fn levels(&self) -> usize {
        self.thermal.len()
    }

    pub fn thermal_state(&self) -> PopulationState {
        PopulationState {
            p: self.thermal.clone(),
            timestamp_us: 0.0,
        }
    }

    /// Pure optical-pumping target (descending m_S).
    pub fn pump_steady_state(&self) -> &[f64] {
        &self.pump
    }

    /// Fixed point under illumination with lattice relaxation active.
    pub fn illuminated_fixed_point(&self) -> Vec<f64> {
        let a = self.effective_pump_time() / self.t_op_us;
        self.thermal
            .iter()
            .zip(&self.pump)
            .map(|(th, pu)| th + a * (pu - th))
            .collect()
    }

    pub fn evolve(&self, state: &PopulationState, light_on: bool, dt_us: f64) -> Result<PopulationState> {
        if !(dt_us >= 0.0) {
            return Err(invalid("evolution", format!("dt = {dt_us} µs must be ≥ 0")));
        }
        if state.levels() != self.levels() {
            return Err(invalid("evolution", "state and model level counts differ"));
        }
        let (target, tau) = if light_on {
            (self.illuminated_fixed_point(), self.effective_pump_time())
        } else {
            (self.thermal.clone(), self.t1_us)
        };
        let decay = (-dt_us / tau).exp();
        let p = state
            .p
            .iter()
            .zip(&target)
            .map(|(p, t)| t + (p - t) * decay)
            .collect();
        Ok(PopulationState {
            p,
            timestamp_us: state.timestamp_us + dt_us,
        })
    }

    /// Populations after `light_us` of illumination followed by `dark_us`, starting thermal.
    pub fn after_optical_pulse(&self, light_us: f64, dark_us: f64) -> Result<PopulationState> {
        let lit = self.evolve(&self.thermal_state(), true, light_us)?;
        self.evolve(&lit, false, dark_us)
    }
}

/// Optical pumping concentrates population in |m_S| = 1/2 (half-integer S)
/// or m_S = 0 (integer S). Descending-m_S order.
fn polarization_target(levels: usize) -> Vec<f64> {
    let s = (levels - 1) as f64 / 2.0;
    let ms: Vec<f64> = (0..levels).map(|k| s - k as f64).collect();
    let smallest = ms.iter().fold(f64::MAX, |m, v| m.min(v.abs()));
    let chosen = ms.iter().filter(|m| (m.abs() - smallest).abs() < 1e-9).count() as f64;
    ms.iter()
        .map(|m| if (m.abs() - smallest).abs() < 1e-9 { 1.0 / chosen } else { 0.0 })
        .collect()
}

/// Timing of the optically pumped, echo-detected recovery measurement.
///
/// Time zero is the light onset. Each delay is the start of the echo
/// sequence relative to light onset and may be negative (before the light).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySequence {
    pub optical_duration_us: f64,
    /// Earliest allowed start of the echo sequence.
    pub sweep_start_us: f64,
    /// Probed transition as ascending energy-level indices.
    pub lower: usize,
    pub upper: usize,
}

impl Default for RecoverySequence {
    fn default() -> Self {
        RecoverySequence {
            optical_duration_us: 1000.0,
            sweep_start_us: -200.0,
            lower: 2,
            upper: 3,
        }
    }
}

/// Population difference of the probed transition as the echo sequence is
/// translated through the optical pumping pulse.
pub fn echo_detected_recovery_trace(
    model: &PumpModel,
    seq: &RecoverySequence,
    delays_us: &[f64],
) -> Result<Spectrum> {
    if !(seq.optical_duration_us > 0.0) {
        return Err(Error::Sequence("optical pulse duration must be > 0".into()));
    }
    if seq.upper >= model.levels() || seq.lower >= seq.upper {
        return Err(Error::Sequence(format!(
            "probed levels ({}, {}) invalid for {} levels",
            seq.lower,
            seq.upper,
            model.levels()
        )));
    }
    if let Some(&first) = delays_us.first() {
        if first < seq.sweep_start_us {
            return Err(Error::Sequence(format!(
                "microwave pulse at {first} µs is scheduled before the sweep start {} µs",
                seq.sweep_start_us
            )));
        }
    }
    let thermal = model.thermal_state();
    let at_light_off = model.evolve(&thermal, true, seq.optical_duration_us)?;
    let values = delays_us
        .iter()
        .map(|&t| {
            let state = if t <= 0.0 {
                thermal.clone()
            } else if t <= seq.optical_duration_us {
                model.evolve(&thermal, true, t)?
            } else {
                model.evolve(&at_light_off, false, t - seq.optical_duration_us)?
            };
            Ok(state.difference(seq.lower, seq.upper))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Spectrum::new(AxisKind::TimeUs, delays_us.to_vec(), values)?
        .with_meta("optical_duration_us", seq.optical_duration_us)
        .with_meta("t_op_bare_us", model.t_op_us)
        .with_meta("t_op_effective_us", model.effective_pump_time())
        .with_meta("t1_us", model.t1_us)
        .with_meta("epsilon", model.epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{FieldOrientation, SpinHamiltonian, SpinSystem};
    use proptest::prelude::*;

    fn energies() -> Vec<f64> {
        SpinHamiltonian::new(&SpinSystem::v2_silicon_vacancy())
            .unwrap()
            .levels(&FieldOrientation::new(3295.6, 0.0).unwrap())
    }

    fn model(eps: f64) -> PumpModel {
        PumpModel::new(eps, 139.0, 354.0, 300.0, &energies()).unwrap()
    }

    #[test]
    fn pump_target_matches_three_halves_pattern_at_uniform_thermal() {
        let m = PumpModel::new(0.1, 139.0, 354.0, 1e12, &energies()).unwrap();
        let want = [0.15, 0.35, 0.35, 0.15];
        for (p, w) in m.pump_steady_state().iter().zip(want) {
            assert!((p - w).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let m = model(0.1);
        let s = m.thermal_state();
        assert_eq!(m.evolve(&s, true, 0.0).unwrap().p, s.p);
    }

    #[test]
    fn dark_long_time_reaches_thermal() {
        let m = model(0.2);
        let pumped = m.evolve(&m.thermal_state(), true, 5000.0).unwrap();
        let back = m.evolve(&pumped, false, 1e6).unwrap();
        for (a, b) in back.p.iter().zip(&m.thermal_state().p) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn thermal_lower_levels_more_populated() {
        let p = thermal_level_populations(&energies(), 300.0);
        assert!(p.windows(2).all(|w| w[0] > w[1]));
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn effective_pump_time_round_trip() {
        let m = PumpModel::from_effective_pump_time(0.1, 139.0, 354.0, 300.0, &energies()).unwrap();
        assert!((m.effective_pump_time() - 139.0).abs() < 1e-9);
        assert!(PumpModel::from_effective_pump_time(0.1, 400.0, 354.0, 300.0, &energies()).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let e = energies();
        assert!(PumpModel::new(0.3, 139.0, 354.0, 300.0, &e).is_err());
        assert!(PumpModel::new(0.1, 0.0, 354.0, 300.0, &e).is_err());
        assert!(PumpModel::new(0.1, 139.0, -1.0, 300.0, &e).is_err());
        assert!(model(0.1).evolve(&model(0.1).thermal_state(), true, -1.0).is_err());
        assert!(PopulationState::new(vec![0.5, 0.6], 0.0).is_err());
        assert!(PopulationState::new(vec![-0.1, 1.1], 0.0).is_err());
    }

    #[test]
    fn recovery_baseline_before_light() {
        let m = model(0.1);
        let tr = echo_detected_recovery_trace(&m, &RecoverySequence::default(), &[-150.0, -100.0, -1.0]).unwrap();
        let th = m.thermal_state().difference(2, 3);
        assert!(tr.intensity.iter().all(|&v| v == th));
    }

    #[test]
    fn recovery_flat_without_polarization() {
        let m = model(0.0);
        let delays: Vec<f64> = (0..40).map(|k| -100.0 + 80.0 * k as f64).collect();
        let tr = echo_detected_recovery_trace(&m, &RecoverySequence::default(), &delays).unwrap();
        let first = tr.intensity[0];
        assert!(tr.intensity.iter().all(|&v| (v - first).abs() <= 1e-15 * first.abs()));
    }

    #[test]
    fn recovery_rejects_early_pulses() {
        let m = model(0.1);
        let err = echo_detected_recovery_trace(&m, &RecoverySequence::default(), &[-500.0, 0.0]);
        assert!(matches!(err, Err(Error::Sequence(_))));
        let bad = RecoverySequence {
            optical_duration_us: 0.0,
            ..Default::default()
        };
        assert!(echo_detected_recovery_trace(&m, &bad, &[0.0]).is_err());
    }

    #[test]
    fn one_outer_transition_inverts_under_light() {
        let m = model(0.05);
        let lit = m.evolve(&m.thermal_state(), true, 1e5).unwrap();
        let th = m.thermal_state();
        // transitions (0,1) and (2,3) are the outer lines
        let flips = [(0, 1), (1, 2), (2, 3)]
            .iter()
            .filter(|(l, u)| lit.difference(*l, *u).signum() != th.difference(*l, *u).signum())
            .count();
        assert_eq!(flips, 1);
    }

    proptest! {
        #[test]
        fn conserves_probability_and_positivity(
            eps in 0.0f64..=0.25,
            steps in proptest::collection::vec((any::<bool>(), 0.0f64..2000.0), 1..20),
        ) {
            let m = model(eps);
            let mut s = m.thermal_state();
            for (light, dt) in steps {
                s = m.evolve(&s, light, dt).unwrap();
                let sum: f64 = s.p.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(s.p.iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn semigroup(eps in 0.0f64..=0.25, light in any::<bool>(), a in 0.0f64..1000.0, b in 0.0f64..1000.0) {
            let m = model(eps);
            let s0 = m.thermal_state();
            let two = m.evolve(&m.evolve(&s0, light, a).unwrap(), light, b).unwrap();
            let one = m.evolve(&s0, light, a + b).unwrap();
            for (x, y) in two.p.iter().zip(&one.p) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }

        #[test]
        fn monotone_approach(eps in 0.0f64..=0.25, light in any::<bool>(), dts in proptest::collection::vec(0.0f64..300.0, 1..10)) {
            let m = model(eps);
            let target = if light { m.illuminated_fixed_point() } else { m.thermal_state().p };
            let start = if light { m.thermal_state() } else { m.evolve(&m.thermal_state(), true, 800.0).unwrap() };
            let dist = |s: &PopulationState| s.p.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>();
            let mut s = start;
            let mut last = dist(&s);
            for dt in dts {
                s = m.evolve(&s, light, dt).unwrap();
                let d = dist(&s);
                prop_assert!(d <= last + 1e-16);
                last = d;
            }
        }
    }
}
