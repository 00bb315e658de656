use proptest::prelude::*;
use sicspin_core::pulse::{Channel, Drive, Event, MwPulse, PulseEngine, PulseSequence, RelaxationParams, SpinEnsembleState};
use sicspin_core::pump::PumpModel;
use sicspin_core::spin::{resonance_fields, FieldOrientation, SpinSystem};

fn probed_field(theta: f64) -> f64 {
    resonance_fields(&SpinSystem::v2_silicon_vacancy(), theta, 9.308, (3150.0, 3500.0))
        .unwrap()
        .into_iter()
        .find(|r| r.lower == 2 && r.upper == 3)
        .unwrap()
        .field_gauss
}

fn engine(theta: f64, t1: Option<f64>, t2_fraction: f64, width: f64) -> PulseEngine {
    let sys = SpinSystem::v2_silicon_vacancy();
    let mut e = PulseEngine::new(&sys, &FieldOrientation::new(probed_field(theta), theta).unwrap(), 9.308, 2)
        .unwrap()
        .with_pump_frequency(9.243)
        .unwrap()
        .with_inhomogeneity(width, 4)
        .unwrap();
    let pump = PumpModel::from_effective_pump_time(0.05, 139.0, 354.0, 300.0, e.energies()).unwrap();
    e = e.with_optical_pumping(pump).unwrap();
    if let Some(t1) = t1 {
        e = e.with_relaxation(RelaxationParams::new(t1, t1 * t2_fraction).unwrap());
    }
    e
}

fn event() -> impl Strategy<Value = Event> {
    prop_oneof![
        (any::<bool>(), 1.0f64..300.0, 0.0f64..12.0, 0.0f64..360.0).prop_map(|(pump, ns, b1, phase)| {
            Event::Mw(MwPulse {
                channel: if pump { Channel::Pump } else { Channel::Probe },
                duration_ns: ns,
                drive: Drive::B1Gauss(b1),
                phase_deg: phase,
            })
        }),
        (0.0f64..200.0).prop_map(|duration_us| Event::Delay { duration_us }),
        (0.0f64..500.0).prop_map(|duration_us| Event::Optical { duration_us }),
        (0.0f64..0.5).prop_map(|window_us| Event::AcquireEcho { window_us }),
    ]
}

fn assert_physical(s: &SpinEnsembleState) -> Result<(), TestCaseError> {
    prop_assert!((s.trace() - 1.0).norm() < 1e-10, "trace {}", s.trace());
    prop_assert!(s.hermiticity_defect() < 1e-10);
    prop_assert!(s.min_eigenvalue() > -1e-9, "min eigenvalue {}", s.min_eigenvalue());
    for p in s.populations() {
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&p));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_sequences_stay_physical(
        theta in 0.0f64..90.0,
        t1 in prop::option::of(10.0f64..1000.0),
        t2_fraction in 0.05f64..=1.0,
        width in 0.0f64..3.0,
        events in prop::collection::vec(event(), 1..10),
    ) {
        let e = engine(theta, t1, t2_fraction, width);
        let mut s = e.thermal_state();
        assert_physical(&s)?;
        for ev in &events {
            let (next, echo) = e.apply_event(&s, ev).unwrap();
            assert_physical(&next)?;
            if let Some(echo) = echo {
                prop_assert!(echo.amplitude.is_finite() && echo.amplitude <= 2.0);
            }
            s = next;
        }
    }

    #[test]
    fn unitary_evolution_conserves_purity(
        width in 0.0f64..3.0,
        events in prop::collection::vec(event().prop_filter("coherent only", |e| !matches!(e, Event::Optical { .. })), 1..10),
    ) {
        let e = engine(0.0, None, 1.0, width);
        let start = e.thermal_state();
        let out = e.run(&PulseSequence::new(events).unwrap(), &start).unwrap();
        for (a, b) in out.state.purities().iter().zip(start.purities()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn relaxation_moves_toward_equilibrium(t1 in 10.0f64..1000.0, dt in 0.0f64..2000.0) {
        let e = engine(0.0, Some(t1), 0.5, 0.0);
        let pi = e.b1_for_rotation(180.0, 32.0).unwrap();
        let flipped = e.apply_pulse(&e.thermal_state(), &MwPulse::probe(32.0, pi, 0.0)).unwrap();
        let later = e.apply_delay(&flipped, dt).unwrap();
        let eq = e.equilibrium();
        let dist = |s: &SpinEnsembleState| s.populations().iter().zip(eq).map(|(p, q)| (p - q).abs()).sum::<f64>();
        prop_assert!(dist(&later) <= dist(&flipped) + 1e-12);
        let expected = dist(&flipped) * (-dt / t1).exp();
        prop_assert!((dist(&later) - expected).abs() < 1e-9 + 1e-6 * expected);
    }
}

#[test]
fn echo_of_detected_hahn_sequence_matches_prepared_difference() {
    let e = engine(0.0, None, 1.0, 0.0);
    let b1 = e.b1_for_rotation(90.0, 16.0).unwrap();
    let seq = PulseSequence::hahn_echo(16.0, b1, 2.0, 0.0).unwrap();
    let start = e.thermal_state();
    let out = e.run_detected(&seq, &start).unwrap();
    let dp = start.population_difference(2, 3).abs();
    assert!((out.echoes[0].amplitude - dp).abs() < 1e-3 * dp);
}
