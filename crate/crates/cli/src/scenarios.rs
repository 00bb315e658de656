//! One runner per scenario: resolved parameters in, a table and a plot out.

use std::path::PathBuf;

use sicspin_core::cw::{field_sweep, rotational_pattern, Populations, SweepRange};
use sicspin_core::fit::{fit_mono_exponential, fit_piecewise_recovery_from, ExpParams, FitResult};
use sicspin_core::noise::add_gaussian_noise;
use sicspin_core::peldor::{
    deer_sweep, default_partners, dip_detect, DeerSweepConfig, EchoKind, LinePosition, OpticalMode,
    PartnerSpecies, ResonatorProfile,
};
use sicspin_core::pulse::{
    echo_detected_field_sweep, hahn_echo_decay, prepared_state, rabi_traces, Drive, EchoSweepConfig, ExtraSpecies,
    HahnEchoSettings, OpticalPrelude, PulseEngine, RelaxationParams,
};
use sicspin_core::pump::{echo_detected_recovery_trace, PopulationState, PumpModel, RecoverySequence};
use sicspin_core::spin::{resonance_fields, Resonance};
use sicspin_core::swr::{default_shape, demag_factors, swr_spectrum, StripeSpec};
use sicspin_core::units::{field_to_frequency_offset, gyromagnetic_mhz_per_gauss};
use sicspin_core::{AxisKind, FieldOrientation, LineShape, LineShapeKind, Spectrum, Spin, SpinHamiltonian, SpinSystem};

use crate::config::{render_value, Params, Values};
use crate::error::{CliError, CliResult};
use crate::plot::{Plot, Series};
use crate::schema::{extra_species_keys, partner_keys, Scenario};
use crate::sequence::SequenceTemplate;
use crate::table::Table;

/// Everything a scenario produces.
#[derive(Debug, Clone)]
pub struct Output {
    pub table: Table,
    pub plot: Plot,
    /// Secondary CSV files requested by the config.
    pub extra: Vec<(PathBuf, Table)>,
    /// Non-fatal notes for stderr.
    pub notes: Vec<String>,
}

/// `n` evenly spaced values from `lo` to `hi`.
fn linspace_checked(key: &str, lo: f64, hi: f64, n: usize) -> CliResult<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(CliError::config(format!("{key}: need at least 2 points over an increasing range")));
    }
    Ok(sicspin_core::spectrum::linspace(lo, hi, n))
}

pub fn run(p: &Params) -> CliResult<Output> {
    let mut out = match p.scenario {
        Scenario::RotPattern => rotpattern(p),
        Scenario::FieldSweep => fieldsweep(p),
        Scenario::Rabi => rabi(p),
        Scenario::EchoDecay => echodecay(p),
        Scenario::PumpRecovery => pumprecovery(p),
        Scenario::Deer => deer(p),
        Scenario::Swr => swr(p),
        Scenario::Fit => fit(p),
    }?;
    let mut meta = params_meta(&p.values);
    meta.append(&mut out.table.meta);
    meta.insert("scenario".into(), p.scenario.name().into());
    out.table.meta = meta;
    Ok(out)
}

fn params_meta(v: &Values) -> std::collections::BTreeMap<String, String> {
    v.raw()
        .iter()
        .filter_map(|(k, val)| render_value(val).map(|s| (k.clone(), s)))
        .collect()
}

fn with_spectrum_meta(mut t: Table, s: &Spectrum) -> Table {
    for (k, v) in &s.meta {
        t.meta.insert(k.clone(), v.clone());
    }
    t
}

fn spin_system(v: &Values) -> CliResult<SpinSystem> {
    Ok(SpinSystem::new(
        Spin::new(v.f64("S")?)?,
        v.f64("g")?,
        v.f64("D")?,
        v.f64("E")?,
        v.f64("linewidthPP")?,
        "main",
    )?)
}

fn line_shape(v: &Values) -> CliResult<LineShape> {
    let kind = match v.str("shape")? {
        "lorentzianDerivative" => LineShapeKind::LorentzianDerivative,
        "gaussianDerivative" => LineShapeKind::GaussianDerivative,
        "lorentzianAbsorption" => LineShapeKind::LorentzianAbsorption,
        _ => LineShapeKind::GaussianAbsorption,
    };
    Ok(LineShape::new(kind, v.f64("linewidthPP")?)?)
}

fn sweep_range(v: &Values) -> CliResult<SweepRange> {
    Ok(SweepRange::new(v.f64("fieldMin")?, v.f64("fieldMax")?, v.usize("points")?)?)
}

/// Field window wide enough to hold every allowed line at `f_ghz`.
fn search_window(sys: &SpinSystem, f_ghz: f64) -> (f64, f64) {
    let gamma = gyromagnetic_mhz_per_gauss(sys.g);
    let center = f_ghz * 1e3 / gamma;
    let spread = 2.0 * sys.spin.value() * (sys.d_mhz.abs() + 3.0 * sys.e_mhz.abs()) * 2.0 / gamma + 50.0;
    ((center - spread).max(0.0), center + spread)
}

fn probed_resonance(sys: &SpinSystem, theta: f64, f_ghz: f64, lower: usize) -> CliResult<Resonance> {
    resonance_fields(sys, theta, f_ghz, search_window(sys, f_ghz))?
        .into_iter()
        .find(|r| r.lower == lower && r.upper == lower + 1)
        .ok_or_else(|| {
            CliError::config(format!(
                "no resonance of levels ({lower}, {}) at {f_ghz} GHz, θ = {theta}°",
                lower + 1
            ))
        })
}

fn pump_model(v: &Values, energies_asc: &[f64]) -> CliResult<PumpModel> {
    let (eps, top, t1, temp) = (v.f64("epsilon")?, v.f64("Top")?, v.f64("T1")?, v.f64("temperature")?);
    Ok(if v.bool("topIsEffective")? {
        PumpModel::from_effective_pump_time(eps, top, t1, temp, energies_asc)?
    } else {
        PumpModel::new(eps, top, t1, temp, energies_asc)?
    })
}

fn pump_meta(t: Table, m: &PumpModel) -> Table {
    t.meta("Top_bare_us", m.t_op_us).meta("Top_eff_us", m.effective_pump_time())
}

fn level_energies(sys: &SpinSystem, field: f64, theta: f64) -> CliResult<Vec<f64>> {
    let ham = SpinHamiltonian::new(sys)?;
    Ok(ham.levels(&FieldOrientation::new(field, theta)?))
}

fn rotpattern(p: &Params) -> CliResult<Output> {
    let v = &p.values;
    let sys = spin_system(v)?;
    let (lo, hi, step) = (v.f64("thetaMin")?, v.f64("thetaMax")?, v.f64("thetaStep")?);
    if !(step > 0.0 && hi >= lo) {
        return Err(CliError::config("rotpattern: thetaStep must be > 0 and thetaMax ≥ thetaMin"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let thetas: Vec<f64> = (0..count).map(|k| lo + k as f64 * step).collect();
    let range = sweep_range(v)?;
    let pattern = rotational_pattern(
        &sys,
        v.f64("fMW")?,
        &thetas,
        &range,
        &line_shape(v)?,
        &Populations::Thermal {
            temperature_k: v.f64("temperature")?,
        },
    )?;
    let width = pattern.positions.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    let mut table = Table::new().column("angle_deg", thetas.clone());
    let mut series = Vec::new();
    for k in 0..width {
        let col: Vec<f64> = pattern
            .positions
            .iter()
            .map(|(_, r)| r.get(k).map_or(f64::NAN, |x| x.field_gauss))
            .collect();
        series.push(Series::points(
            format!("line {}", k + 1),
            thetas.iter().copied().zip(col.iter().copied()).collect(),
        ));
        table = table.column(format!("line_{}_G", k + 1), col);
    }
    table = table.meta("lines_max", width).meta("angles", thetas.len());
    let mut extra = Vec::new();
    if let Some(path) = v.opt_str("spectraPath")? {
        let mut t = Table::new().column("field_G", range.axis());
        for (theta, s) in &pattern.spectra {
            t = t.column(format!("theta_{theta}"), s.intensity.clone());
        }
        extra.push((PathBuf::from(path), t.meta("scenario", "rotpattern").meta("fMW", v.f64("fMW")?)));
    }
    Ok(Output {
        table,
        plot: Plot {
            title: format!("Resonance fields at {} GHz", v.f64("fMW")?),
            x_label: "angle (deg)".into(),
            y_label: "field (G)".into(),
            series,
        },
        extra,
        notes: Vec::new(),
    })
}

fn extra_species(v: &Values, sys: &SpinSystem, theta: f64, f_ghz: f64) -> CliResult<Vec<ExtraSpecies>> {
    let Some(tables) = v.opt_tables("extraSpecies", &extra_species_keys())? else {
        return Ok(Vec::new());
    };
    tables
        .iter()
        .map(|t| {
            let label = t.str("label")?;
            let lw = t.f64("linewidthPP")?;
            let system = match (t.opt_f64("g")?, t.opt_f64("lowFieldOffset")?) {
                (Some(g), None) => SpinSystem::new(Spin::HALF, g, 0.0, 0.0, lw, label)?,
                (None, Some(offset)) => {
                    let low = resonance_fields(sys, theta, f_ghz, search_window(sys, f_ghz))?
                        .first()
                        .map(|r| r.field_gauss)
                        .ok_or_else(|| CliError::config("extraSpecies: main species has no line to offset from"))?;
                    SpinSystem::spin_half_resonant_at(low + offset, f_ghz * 1e3, lw, label)?
                }
                _ => {
                    return Err(CliError::config(format!(
                        "extraSpecies `{label}`: set exactly one of `g` and `lowFieldOffset`"
                    )))
                }
            };
            Ok(ExtraSpecies {
                system,
                weight: t.f64("weight")?,
            })
        })
        .collect()
}

fn fieldsweep(p: &Params) -> CliResult<Output> {
    let v = &p.values;
    let sys = spin_system(v)?;
    let (f, theta) = (v.f64("fMW")?, v.f64("theta")?);
    let range = sweep_range(v)?;
    let shape = line_shape(v)?;
    let mut table = Table::new();
    let populations = match v.str("populations")? {
        "thermal" => Populations::Thermal {
            temperature_k: v.f64("temperature")?,
        },
        "uniform" => Populations::Fixed(PopulationState::uniform(sys.spin.multiplicity())),
        _ => {
            let center = f * 1e3 / gyromagnetic_mhz_per_gauss(sys.g);
            let model = pump_model(v, &level_energies(&sys, center, theta)?)?;
            table = pump_meta(table, &model);
            Populations::Fixed(PopulationState::new(model.illuminated_fixed_point(), 0.0)?)
        }
    };
    let extra = extra_species(v, &sys, theta, f)?;
    let echo = v.str("detection")? == "echo";
    if !echo && !extra.is_empty() {
        return Err(CliError::config("fieldsweep: extraSpecies requires detection = \"echo\""));
    }
    let sweep = if echo {
        echo_detected_field_sweep(
            &sys,
            &EchoSweepConfig {
                theta_deg: theta,
                f_ghz: f,
                range,
                shape,
                populations,
                two_tau_us: v.f64("twoTau")?,
                t2_us: v.f64("T2")?,
                extra,
            },
        )?
    } else {
        field_sweep(&sys, theta, f, &range, &shape, &populations)?
    };
    let s = &sweep.spectrum;
    table = with_spectrum_meta(table, s)
        .column(AxisKind::FieldGauss.column_name(), s.axis.clone())
        .column("intensity", s.intensity.clone());
    let in_range: Vec<_> = sweep
        .lines
        .iter()
        .filter(|l| l.resonance.field_gauss >= s.axis[0] && l.resonance.field_gauss <= s.axis[s.len() - 1])
        .collect();
    for (k, l) in in_range.iter().enumerate() {
        table = table
            .meta(format!("line_{}_G", k + 1), l.resonance.field_gauss)
            .meta(format!("line_{}_weight", k + 1), l.weight);
    }
    Ok(Output {
        table,
        plot: Plot {
            title: format!("{} field sweep, {f} GHz, θ = {theta}°", if echo { "Echo-detected" } else { "CW" }),
            x_label: "field (G)".into(),
            y_label: "intensity (arb.)".into(),
            series: vec![Series::line("intensity", &s.axis, &s.intensity)],
        },
        extra: Vec::new(),
        notes: Vec::new(),
    })
}

/// Engine on the probed transition with pumping, inhomogeneity and optional extras attached.
fn engine(v: &Values, with_relaxation: bool) -> CliResult<(PulseEngine, PumpModel)> {
    let sys = spin_system(v)?;
    let (f, theta, lower) = (v.f64("fMW")?, v.f64("theta")?, v.usize("probedLower")?);
    let field = match v.opt_f64("field")? {
        Some(b) => b,
        None => probed_resonance(&sys, theta, f, lower)?.field_gauss,
    };
    let mut e = PulseEngine::new(&sys, &FieldOrientation::new(field, theta)?, f, lower)?
        .with_temperature(v.f64("temperature")?)?
        .with_inhomogeneity(v.f64("inhomogeneousWidth")?, v.usize("quadraturePoints")?)?;
    let model = pump_model(v, e.energies())?;
    e = e.with_optical_pumping(model.clone())?;
    if with_relaxation {
        e = e.with_relaxation(RelaxationParams::new(v.f64("T1")?, v.f64("T2")?)?);
    }
    if let Some(b1) = v.opt_f64("referenceB1")? {
        e = e.with_reference_b1(b1)?;
    }
    Ok((e, model))
}

fn prelude(v: &Values) -> CliResult<OpticalPrelude> {
    Ok(OpticalPrelude {
        light_us: v.f64("lightDuration")?,
        gap_us: v.f64("gap")?,
    })
}

fn rabi(p: &Params) -> CliResult<Output> {
    let v = &p.values;
    let (engine, model) = engine(v, false)?;
    let (t_max, t_step) = (v.f64("tMax")?, v.f64("tStep")?);
    if !(t_step > 0.0 && t_max > t_step) {
        return Err(CliError::config("rabi: need tStep > 0 and tMax > tStep"));
    }
    let n = (t_max / t_step + 1e-9).floor() as usize + 1;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * t_step).collect();
    let (drives, names): (Vec<Drive>, Vec<String>) = match v.opt_f64_list("b1")? {
        Some(b1) => b1.iter().map(|b| (Drive::B1Gauss(*b), format!("b1_{b}G"))).unzip(),
        None => v
            .f64_list("attenuations")?
            .iter()
            .map(|db| (Drive::AttenuationDb(*db), format!("att_{db}dB")))
            .unzip(),
    };
    if drives.is_empty() {
        return Err(CliError::config("rabi: empty drive list"));
    }
    let initial = match v.str("initial")? {
        "thermal" => engine.thermal_state(),
        _ => prepared_state(&engine, Some(prelude(v)?))?,
    };
    let traces = rabi_traces(&engine, &drives, &times, &initial)?;
    let mut table = pump_meta(Table::new(), &model)
        .column(AxisKind::TimeNs.column_name(), times.clone())
        .meta("detuning_MHz", engine.detuning_mhz())
        .meta("transition_MHz", engine.transition_frequency_mhz(engine.probed()));
    let mut series = Vec::new();
    let mut notes = Vec::new();
    let f0 = traces[0].frequency_mhz;
    for (tr, name) in traces.iter().zip(&names) {
        table = table
            .meta(format!("rabi_MHz.{name}"), tr.frequency_mhz)
            .meta(format!("rabi_ratio.{name}"), tr.frequency_mhz / f0)
            .meta(format!("B1_G.{name}"), tr.b1_gauss)
            .column(name.clone(), tr.trace.intensity.clone());
        series.push(Series::line(name.clone(), &times, &tr.trace.intensity));
        if tr.frequency_mhz * t_max * 1e-3 < 1.5 {
            notes.push(format!("{name}: fewer than 1.5 nutation periods in the window; raise tMax or B1"));
        }
    }
    Ok(Output {
        table,
        plot: Plot {
            title: "Nutation of the probed transition".into(),
            x_label: "pulse length (ns)".into(),
            y_label: "population difference".into(),
            series,
        },
        extra: Vec::new(),
        notes,
    })
}

fn fit_meta(t: Table, prefix: &str, f: &FitResult) -> Table {
    let mut t = t
        .meta(format!("{prefix}.amplitude"), f.params.amplitude)
        .meta(format!("{prefix}.timeConstant_us"), f.params.time_constant)
        .meta(format!("{prefix}.offset"), f.params.offset)
        .meta(format!("{prefix}.amplitude_err"), f.std_errors.amplitude)
        .meta(format!("{prefix}.timeConstant_err_us"), f.std_errors.time_constant)
        .meta(format!("{prefix}.offset_err"), f.std_errors.offset)
        .meta(format!("{prefix}.residualNorm"), f.residual_norm)
        .meta(format!("{prefix}.converged"), f.converged)
        .meta(format!("{prefix}.iterations"), f.iterations);
    if let Some(d) = &f.diagnostic {
        t = t.meta(format!("{prefix}.diagnostic"), d);
    }
    t
}

fn echodecay(p: &Params) -> CliResult<Output> {
    let v = &p.values;
    let (mut engine, model) = engine(v, true)?;
    if let Some(fp) = v.opt_f64("pumpFrequency")? {
        engine = engine.with_pump_frequency(fp)?;
    }
    let taus = linspace_checked("τ grid", v.f64("tauStart")?, v.f64("tauStop")?, v.usize("tauPoints")?)?;
    let prelude = if v.bool("prelude")? { Some(prelude(v)?) } else { None };
    let mut table = pump_meta(Table::new(), &model);
    let trace = match v.opt_str_list("sequence")? {
        None => hahn_echo_decay(
            &engine,
            &taus,
            &HahnEchoSettings {
                pi_half_ns: v.f64("piHalf")?,
                phase_deg: v.f64("phase")?,
                prelude,
            },
        )?,
        Some(lines) => {
            let template = SequenceTemplate::parse(&lines)?;
            let start = prepared_state(&engine, prelude)?;
            let amplitudes = taus
                .iter()
                .map(|&tau| {
                    let seq = template.instantiate(&engine, tau)?;
                    let out = engine.run_detected(&seq, &start)?;
                    Ok(out.echoes.last().map_or(0.0, |e| e.amplitude))
                })
                .collect::<CliResult<Vec<f64>>>()?;
            table = table.meta("sequence", lines.join(" | "));
            Spectrum::new(AxisKind::TimeUs, taus.iter().map(|t| 2.0 * t).collect(), amplitudes)?
        }
    };
    table = with_spectrum_meta(table, &trace)
        .column("twoTau_us", trace.axis.clone())
        .column("echo", trace.intensity.clone());
    let mut series = vec![Series::line("echo", &trace.axis, &trace.intensity)];
    let mut notes = Vec::new();
    if v.bool("fit")? {
        let f = fit_mono_exponential(&trace.axis, &trace.intensity, None)?;
        let model: Vec<f64> = trace.axis.iter().map(|&t| f.params.eval(t)).collect();
        if let Some(d) = &f.diagnostic {
            notes.push(format!("echo decay fit: {d}"));
        }
        table = fit_meta(table, "fit", &f).column("fit", model.clone());
        series.push(Series::line(format!("fit, T2 = {:.2} µs", f.params.time_constant), &trace.axis, &model));
    }
    Ok(Output {
        table,
        plot: Plot {
            title: "Echo decay".into(),
            x_label: "2τ (µs)".into(),
            y_label: "echo amplitude".into(),
            series,
        },
        extra: Vec::new(),
        notes,
    })
}

fn pumprecovery(p: &Params) -> CliResult<Output> {
    let v = &p.values;
    let sys = spin_system(v)?;
    let (f, theta, lower) = (v.f64("fMW")?, v.f64("theta")?, v.usize("probedLower")?);
    let field = probed_resonance(&sys, theta, f, lower)?.field_gauss;
    let model = pump_model(v, &level_energies(&sys, field, theta)?)?;
    let light_off = v.f64("opticalDuration")?;
    let seq = RecoverySequence {
        optical_duration_us: light_off,
        sweep_start_us: v.f64("sweepStart")?,
        lower,
        upper: lower + 1,
    };
    let delays = linspace_checked("echo positions", v.f64("sweepStart")?, v.f64("sweepStop")?, v.usize("points")?)?;
    let mut trace = echo_detected_recovery_trace(&model, &seq, &delays)?;
    let noise = v.f64("noise")?;
    if noise < 0.0 {
        return Err(CliError::config("pumprecovery: noise must be ≥ 0"));
    }
    if noise > 0.0 {
        trace.intensity = add_gaussian_noise(&trace.intensity, noise * trace.max_abs(), v.u64("seed")?);
    }
    let mut table = with_spectrum_meta(pump_meta(Table::new(), &model), &trace)
        .meta("field_G", field)
        .column("delay_us", trace.axis.clone())
        .column("population_difference", trace.intensity.clone());
    let mut series = vec![Series::line("signal", &trace.axis, &trace.intensity)];
    let mut notes = Vec::new();
    if v.bool("fit")? {
        let fit = fit_piecewise_recovery_from(&trace, 0.0, light_off)?;
        let eval = |r: &FitResult, t: f64| if r.converged { r.params.eval(t) } else { r.params.offset };
        let curve: Vec<f64> = trace
            .axis
            .iter()
            .map(|&t| {
                if t < 0.0 {
                    f64::NAN
                } else if t <= light_off {
                    eval(&fit.during, t)
                } else {
                    eval(&fit.after, t)
                }
            })
            .collect();
        for (name, r) in [("during", &fit.during), ("after", &fit.after)] {
            if let Some(d) = &r.diagnostic {
                notes.push(format!("{name}-light fit: {d}"));
            }
        }
        table = fit_meta(table, "fit_during", &fit.during);
        table = fit_meta(table, "fit_after", &fit.after)
            .meta("fit_boundary_gap", fit.boundary_gap)
            .column("fit", curve.clone());
        if fit.during.converged && fit.after.converged {
            let (eff, t1) = (fit.during.params.time_constant, fit.after.params.time_constant);
            if eff < t1 {
                table = table.meta("fit_Top_bare_us", 1.0 / (1.0 / eff - 1.0 / t1));
            }
        }
        series.push(Series::line("piecewise fit", &trace.axis, &curve));
    }
    Ok(Output {
        table,
        plot: Plot {
            title: "Echo-detected optical pumping and recovery".into(),
            x_label: "echo position after light onset (µs)".into(),
            y_label: "population difference".into(),
            series,
        },
        extra: Vec::new(),
        notes,
    })
}

fn partners(v: &Values) -> CliResult<Vec<PartnerSpecies>> {
    let Some(tables) = v.opt_tables("partners", &partner_keys())? else {
        return Ok(default_partners());
    };
    tables
        .iter()
        .map(|t| {
            let label = t.str("label")?;
            let g = t.f64("gFactor")?;
            let position = match (t.opt_f64("offsetMHz")?, t.opt_f64("offsetGauss")?, t.opt_f64("absoluteGHz")?) {
                (Some(x), None, None) => LinePosition::OffsetMhz(x),
                (None, Some(x), None) => LinePosition::OffsetGauss { gauss: x, g },
                (None, None, Some(x)) => LinePosition::AbsoluteGhz(x),
                _ => {
                    return Err(CliError::config(format!(
                        "partners `{label}`: set exactly one of offsetMHz, offsetGauss and absoluteGHz"
                    )))
                }
            };
            let width = match t.opt_f64("width")? {
                Some(w) => w,
                None => field_to_frequency_offset(t.f64("widthGauss")?, g),
            };
            Ok(PartnerSpecies::new(label, position, width, t.f64("lambda")?)?)
        })
        .collect()
}

fn deer(p: &Params) -> CliResult<Output> {
    let v = &p.values;
    let sys = spin_system(v)?;
    let (fs, theta, lower) = (v.f64("fs")?, v.f64("theta")?, v.usize("probedLower")?);
    let field = probed_resonance(&sys, theta, fs, lower)?.field_gauss;
    let model = pump_model(v, &level_energies(&sys, field, theta)?)?;
    let relax = RelaxationParams::new(v.f64("T1")?, v.f64("T2")?)?;
    let resonator = ResonatorProfile::new(v.f64("resonatorCenter")?, v.f64("resonatorFwhm")?)?;
    let cfg = DeerSweepConfig {
        fs_ghz: fs,
        fp_start_ghz: v.f64("fpStart")?,
        fp_stop_ghz: v.f64("fpStop")?,
        step_mhz: v.f64("step")?,
        pump_pulse_ns: v.f64("pumpPulse")?,
        echo_kind: match v.str("echoKind")? {
            "refocused" => EchoKind::Refocused,
            _ => EchoKind::Stimulated,
        },
        optical_mode: match v.str("opticalMode")? {
            "pulsed" => OpticalMode::PulsedPrelude {
                light_us: v.f64("lightDuration")?,
                gap_us: v.f64("gap")?,
            },
            _ => OpticalMode::Continuous,
        },
        stimulated_ratio: v.f64("stimulatedRatio")?,
        echo_time_us: v.f64("echoTime")?,
        probed_lower: lower,
    };
    let partners = partners(v)?;
    let result = deer_sweep(&cfg, &partners, &resonator, &model, &relax)?;
    let s = &result.spectrum;
    let normalized: Vec<f64> = s.intensity.iter().map(|e| e / result.e0).collect();
    let dips = dip_detect(s, v.f64("dipProminence")? * result.e0);
    let mut table = with_spectrum_meta(pump_meta(Table::new(), &model), s)
        .meta("field_G", field)
        .meta("dips", dips.len())
        .column(AxisKind::FrequencyMhz.column_name(), s.axis.clone())
        .column("echo", s.intensity.clone())
        .column("echo_normalized", normalized.clone());
    for (k, d) in dips.iter().enumerate() {
        table = table
            .meta(format!("dip_{}_MHz", k + 1), d.position)
            .meta(format!("dip_{}_relative_depth", k + 1), d.relative_depth);
    }
    Ok(Output {
        table,
        plot: Plot {
            title: format!("Pump-frequency sweep, fs = {fs} GHz"),
            x_label: "pump frequency (MHz)".into(),
            y_label: "echo / unpumped echo".into(),
            series: vec![Series::line("echo", &s.axis, &normalized)],
        },
        extra: Vec::new(),
        notes: result.diagnostics,
    })
}

fn swr(p: &Params) -> CliResult<Output> {
    let v = &p.values;
    let spec = StripeSpec {
        thickness_nm: v.f64("thickness")?,
        width_nm: v.f64("width")?,
        length_um: v.f64("length")?,
        ms4pi_gauss: v.f64("Ms4pi")?,
        g: v.f64("g")?,
        exchange_erg_per_cm: v.f64("exchange")?,
        effective_width_nm: v.opt_f64("effectiveWidth")?,
    };
    spec.validate()?;
    let f = v.f64("fMW")?;
    let n_max = u32::try_from(v.usize("nMax")?).map_err(|_| CliError::config("swr: nMax too large"))?;
    let range = SweepRange::new(v.f64("fieldMin")?, v.f64("fieldMax")?, v.usize("points")?)?;
    let lw = v.f64("linewidth")?;
    let absorption = swr_spectrum(&spec, f, &range, &default_shape(lw, false)?, n_max)?;
    let derivative = swr_spectrum(&spec, f, &range, &default_shape(lw, true)?, n_max)?;
    let demag = demag_factors(&spec)?;
    let a = &absorption.spectrum;
    let mut table = with_spectrum_meta(Table::new(), a)
        .meta("demag_width", demag.width)
        .meta("demag_length", demag.length)
        .meta("demag_thickness", demag.thickness)
        .column(AxisKind::FieldGauss.column_name(), a.axis.clone())
        .column("absorption", a.intensity.clone())
        .column("derivative", derivative.spectrum.intensity.clone());
    table.meta.remove("variant");
    for m in &absorption.modes {
        table = table.meta(format!("mode_{}_G", m.n), m.field_gauss);
    }
    let mut notes = Vec::new();
    let outside = absorption
        .modes
        .iter()
        .filter(|m| m.field_gauss < range.min_gauss || m.field_gauss > range.max_gauss)
        .count();
    if outside > 0 {
        notes.push(format!("{outside} mode(s) fall outside the sweep window"));
    }
    Ok(Output {
        table,
        plot: Plot {
            title: format!("Spin-wave resonance at {f} GHz"),
            x_label: "field (G)".into(),
            y_label: "intensity (arb.)".into(),
            series: vec![
                Series::line("absorption", &a.axis, &a.intensity),
                Series::line("derivative", &a.axis, &derivative.spectrum.intensity),
            ],
        },
        extra: Vec::new(),
        notes,
    })
}

fn fit(p: &Params) -> CliResult<Output> {
    let v = &p.values;
    let path = p.input_path(v.str("data")?);
    let (t, y) = crate::table::read_two_columns(&path)?;
    let mut table = Table::new().meta("data", path.display());
    let mut notes = Vec::new();
    let curve: Vec<f64> = match v.opt_f64("lightOff")? {
        None => {
            let guess = v.opt_f64("tauGuess")?.map(|tau| ExpParams::new(y[0], tau, *y.last().unwrap_or(&0.0)));
            let f = fit_mono_exponential(&t, &y, guess)?;
            if let Some(d) = &f.diagnostic {
                notes.push(format!("fit: {d}"));
            }
            table = fit_meta(table, "fit", &f);
            t.iter().map(|&x| f.params.eval(x)).collect()
        }
        Some(off) => {
            let on = v.f64("lightOn")?;
            let trace = Spectrum::new(AxisKind::TimeUs, t.clone(), y.clone())?;
            let fit = fit_piecewise_recovery_from(&trace, on, off)?;
            table = fit_meta(table, "fit_during", &fit.during);
            table = fit_meta(table, "fit_after", &fit.after).meta("fit_boundary_gap", fit.boundary_gap);
            let eval = |r: &FitResult, x: f64| if r.converged { r.params.eval(x) } else { r.params.offset };
            t.iter()
                .map(|&x| {
                    if x < on {
                        f64::NAN
                    } else if x <= off {
                        eval(&fit.during, x)
                    } else {
                        eval(&fit.after, x)
                    }
                })
                .collect()
        }
    };
    let residual: Vec<f64> = y.iter().zip(&curve).map(|(a, b)| a - b).collect();
    table = table
        .column("time_us", t.clone())
        .column("data", y.clone())
        .column("fit", curve.clone())
        .column("residual", residual);
    Ok(Output {
        table,
        plot: Plot {
            title: "Monoexponential fit".into(),
            x_label: "time (µs)".into(),
            y_label: "signal".into(),
            series: vec![Series::points("data", t.iter().copied().zip(y).collect()), Series::line("fit", &t, &curve)],
        },
        extra: Vec::new(),
        notes,
    })
}
