use proptest::prelude::*;
use sicspin_core::cw::{field_sweep, Populations, SweepRange};
use sicspin_core::fit::{fit_mono_exponential, fit_piecewise_recovery_from, fit_trace};
use sicspin_core::noise::add_gaussian_noise;
use sicspin_core::peldor::{deer_sweep, default_partners, dip_detect, DeerSweepConfig, ResonatorProfile};
use sicspin_core::pulse::{hahn_echo_decay, HahnEchoSettings, PulseEngine, RelaxationParams};
use sicspin_core::pump::{echo_detected_recovery_trace, PopulationState, PumpModel, RecoverySequence};
use sicspin_core::spectrum::{linspace, LineShape, LineShapeKind};
use sicspin_core::spin::{resonance_fields, FieldOrientation, SpinHamiltonian, SpinSystem};
use sicspin_core::swr::{demag_factors, dispersion_frequency, resonance_fields_at_frequency, StripeSpec};

fn levels_at_probe(theta: f64) -> (f64, Vec<f64>) {
    let sys = SpinSystem::v2_silicon_vacancy();
    let field = resonance_fields(&sys, theta, 9.308, (3150.0, 3500.0))
        .unwrap()
        .into_iter()
        .find(|r| r.lower == 2 && r.upper == 3)
        .unwrap()
        .field_gauss;
    let e = SpinHamiltonian::new(&sys).unwrap().levels(&FieldOrientation::new(field, theta).unwrap());
    (field, e)
}

#[test]
fn recovery_trace_refits_to_its_time_constants() {
    let (_, e) = levels_at_probe(0.0);
    let model = PumpModel::from_effective_pump_time(0.05, 139.0, 354.0, 300.0, &e).unwrap();
    let delays = linspace(-200.0, 2800.0, 301);
    let trace = echo_detected_recovery_trace(&model, &RecoverySequence::default(), &delays).unwrap();
    let fit = fit_piecewise_recovery_from(&trace, 0.0, 1000.0).unwrap();
    assert!((fit.during.params.time_constant - 139.0).abs() < 1e-3);
    assert!((fit.after.params.time_constant - 354.0).abs() < 1e-3);
    assert!(fit.boundary_gap.abs() < 1e-9);
}

#[test]
fn hahn_decay_refits_to_t2_with_and_without_noise() {
    let (field, _) = levels_at_probe(0.0);
    let sys = SpinSystem::v2_silicon_vacancy();
    let mut engine = PulseEngine::new(&sys, &FieldOrientation::new(field, 0.0).unwrap(), 9.308, 2).unwrap();
    let pump = PumpModel::from_effective_pump_time(0.05, 139.0, 354.0, 300.0, engine.energies()).unwrap();
    engine = engine
        .with_optical_pumping(pump)
        .unwrap()
        .with_relaxation(RelaxationParams::new(354.0, 48.0).unwrap());
    let taus = linspace(0.5, 60.0, 120);
    let trace = hahn_echo_decay(&engine, &taus, &HahnEchoSettings::default()).unwrap();
    let clean = fit_trace(&trace, None).unwrap();
    assert!((clean.params.time_constant - 48.0).abs() < 0.05);
    let noisy = add_gaussian_noise(&trace.intensity, 0.01 * trace.max_abs(), 7);
    let fit = fit_mono_exponential(&trace.axis, &noisy, None).unwrap();
    assert!((fit.params.time_constant - 48.0).abs() < 0.02 * 48.0);
    assert!(fit.std_errors.time_constant > 0.0);
}

#[test]
fn default_deer_sweep_dips_at_probe_and_partner() {
    let (_, e) = levels_at_probe(0.0);
    let pump = PumpModel::from_effective_pump_time(0.05, 139.0, 354.0, 300.0, &e).unwrap();
    let res = deer_sweep(
        &DeerSweepConfig::default(),
        &default_partners(),
        &ResonatorProfile::new(9.308, 100.0).unwrap(),
        &pump,
        &RelaxationParams::new(354.0, 48.0).unwrap(),
    )
    .unwrap();
    assert_eq!(res.spectrum.len(), 250);
    let dips = dip_detect(&res.spectrum, 0.02 * res.e0);
    for want in [9308.0, 9243.0] {
        assert!(dips.iter().any(|d| (d.position - want).abs() < 1.0), "{want}: {dips:?}");
    }
    assert!(res.spectrum.intensity.iter().all(|v| *v > 0.0 && *v <= res.e0 + 1e-12));
}

#[test]
fn pumped_sweep_inverts_exactly_one_outer_line_at_any_angle() {
    let sys = SpinSystem::v2_silicon_vacancy();
    let range = SweepRange::new(3200.0, 3450.0, 501).unwrap();
    let shape = LineShape::new(LineShapeKind::LorentzianDerivative, 3.0).unwrap();
    for theta in [0.0, 20.0, 40.0, 70.0, 90.0] {
        let (_, e) = levels_at_probe(theta);
        let pump = PumpModel::from_effective_pump_time(0.05, 139.0, 354.0, 300.0, &e).unwrap();
        let state = PopulationState::new(pump.illuminated_fixed_point(), 0.0).unwrap();
        let thermal = field_sweep(&sys, theta, 9.308, &range, &shape, &Populations::default()).unwrap();
        let pumped = field_sweep(&sys, theta, 9.308, &range, &shape, &Populations::Fixed(state)).unwrap();
        assert_eq!(thermal.lines.len(), 3, "θ = {theta}");
        let flips = [0, 2]
            .iter()
            .filter(|&&i| thermal.lines[i].population_difference.signum() != pumped.lines[i].population_difference.signum())
            .count();
        assert_eq!(flips, 1, "θ = {theta}");
    }
}

/// Reference values from a 60-digit evaluation of the prism closed form.
#[test]
fn demag_factors_match_extended_precision_reference() {
    let cases = [
        ((40.4, 10.0, 416.0), [0.7713952915466867, 2.0424678643813603e-05, 0.2285842837746695]),
        ((10.0, 10.0, 500.0), [0.4999952680217869, 9.463956426209538e-06, 0.4999952680217869]),
        ((100.0, 300.0, 100.0), [0.27639713833536267, 0.0007629143692243845, 0.7228399472954129]),
    ];
    for ((t, w, l), want) in cases {
        let spec = StripeSpec { thickness_nm: t, width_nm: w, length_um: l, ..StripeSpec::permalloy() };
        let n = demag_factors(&spec).unwrap();
        for (got, want) in [n.width, n.length, n.thickness].into_iter().zip(want) {
            assert!((got - want).abs() < 1e-11, "{t}/{w}/{l}: {got} vs {want}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swr_fields_round_trip_through_dispersion(f in 25.0f64..40.0, a in 0.5e-6f64..2e-6) {
        let spec = StripeSpec { exchange_erg_per_cm: a, ..StripeSpec::permalloy() };
        for m in resonance_fields_at_frequency(&spec, f, 6).unwrap() {
            let back = dispersion_frequency(&spec, m.field_gauss, m.n).unwrap();
            prop_assert!((back - f).abs() * 1e3 < 0.5, "n = {}: {back} GHz", m.n);
        }
    }

    #[test]
    fn demag_factors_sum_to_one(t in 10.0f64..500.0, w in 10.0f64..5000.0, l in 0.05f64..500.0) {
        let spec = StripeSpec { thickness_nm: t, width_nm: w, length_um: l, ..StripeSpec::permalloy() };
        let n = demag_factors(&spec).unwrap();
        prop_assert!((n.sum() - 1.0).abs() < 1e-9);
    }
}
