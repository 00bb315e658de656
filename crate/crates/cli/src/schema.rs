//! Scenario catalog: every accepted key with its type, default and unit.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    RotPattern,
    FieldSweep,
    Rabi,
    EchoDecay,
    PumpRecovery,
    Deer,
    Swr,
    Fit,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::RotPattern,
        Scenario::FieldSweep,
        Scenario::Rabi,
        Scenario::EchoDecay,
        Scenario::PumpRecovery,
        Scenario::Deer,
        Scenario::Swr,
        Scenario::Fit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::RotPattern => "rotpattern",
            Scenario::FieldSweep => "fieldsweep",
            Scenario::Rabi => "rabi",
            Scenario::EchoDecay => "echodecay",
            Scenario::PumpRecovery => "pumprecovery",
            Scenario::Deer => "deer",
            Scenario::Swr => "swr",
            Scenario::Fit => "fit",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::RotPattern => "CW resonance positions and spectra over a polar-angle grid",
            Scenario::FieldSweep => "CW (derivative) or echo-detected (absorption) field sweep at one angle",
            Scenario::Rabi => "nutation traces of the probed transition for a list of drive strengths",
            Scenario::EchoDecay => "Hahn (or user-defined) echo amplitude vs 2τ after an optical prelude",
            Scenario::PumpRecovery => "echo-detected population difference translated through an optical pulse",
            Scenario::Deer => "probe echo vs pump frequency with partner-species dips",
            Scenario::Swr => "spin-wave resonance modes and spectrum of a ferromagnetic nanostripe",
            Scenario::Fit => "monoexponential (or two-segment) fit of a two-column CSV trace",
        }
    }

    pub fn keys(self) -> Vec<KeySpec> {
        let mut k = Vec::new();
        match self {
            Scenario::RotPattern => {
                k.push(required_float("fMW", "GHz", "microwave frequency"));
                k.extend(spin_keys());
                k.extend([
                    float("thetaMin", 0.0, "deg", "first polar angle"),
                    float("thetaMax", 90.0, "deg", "last polar angle"),
                    float("thetaStep", 3.0, "deg", "angle step"),
                ]);
                k.extend(sweep_keys(3250.0, 3450.0, 2001));
                k.push(optional_text("spectraPath", "also write every spectrum as one column per angle"));
            }
            Scenario::FieldSweep => {
                k.push(required_float("fMW", "GHz", "microwave frequency"));
                k.extend(spin_keys());
                k.push(float("theta", 0.0, "deg", "polar angle of the field from the c axis"));
                k.extend(sweep_keys(3250.0, 3400.0, 1501));
                k.extend([
                    choice("populations", &["thermal", "pumped", "uniform"], "thermal", "level populations"),
                    choice("detection", &["cw", "echo"], "cw", "cw: field-modulated derivative; echo: absorption scaled by exp(-2τ/T2)"),
                    float("twoTau", 2.4, "us", "echo time for echo detection"),
                    float("T2", 48.0, "us", "phase memory time for echo detection"),
                    float("T1", 354.0, "us", "spin-lattice relaxation time"),
                    KeySpec {
                        name: "extraSpecies",
                        kind: ValueKind::Tables(extra_species_keys),
                        default: Fallback::BuiltIn("none"),
                        unit: "",
                        doc: "additional S=1/2 species (echo detection only)",
                    },
                ]);
                k.extend(pump_keys());
            }
            Scenario::Rabi => {
                k.push(required_float("fMW", "GHz", "probe frequency"));
                k.extend(spin_keys());
                k.extend(probe_keys());
                k.extend([
                    float_list("attenuations", &[10.0, 5.0, 0.0], "dB", "attenuations relative to referenceB1"),
                    optional_float_list("b1", "G", "explicit drive amplitudes; replaces attenuations when set"),
                    float("referenceB1", 3.0, "G", "drive amplitude at 0 dB"),
                    float("tMax", 2000.0, "ns", "longest nutation pulse"),
                    float("tStep", 2.0, "ns", "nutation pulse increment"),
                    choice("initial", &["pumped", "thermal"], "pumped", "state before the nutation pulse"),
                    float("T1", 354.0, "us", "spin-lattice relaxation time"),
                ]);
                k.extend(ensemble_keys());
                k.extend(prelude_keys());
                k.extend(pump_keys());
            }
            Scenario::EchoDecay => {
                k.push(required_float("fMW", "GHz", "probe frequency"));
                k.extend(spin_keys());
                k.extend(probe_keys());
                k.extend([
                    float("T1", 354.0, "us", "spin-lattice relaxation time"),
                    float("T2", 48.0, "us", "phase memory time"),
                    float("tauStart", 0.5, "us", "first τ"),
                    float("tauStop", 60.0, "us", "last τ"),
                    int("tauPoints", 120, "1", "number of τ values"),
                    float("piHalf", 16.0, "ns", "π/2 pulse length (π pulse is twice as long)"),
                    float("phase", 0.0, "deg", "phase of both pulses"),
                    boolean("prelude", true, "apply the optical prelude before the sequence"),
                    optional_float("referenceB1", "G", "drive amplitude at 0 dB (needed by dB pulses in a custom sequence)"),
                    optional_float("pumpFrequency", "GHz", "pump channel frequency for a custom sequence"),
                    KeySpec {
                        name: "sequence",
                        kind: ValueKind::TextList,
                        default: Fallback::BuiltIn("Hahn echo"),
                        unit: "",
                        doc: "custom event list, see the sequence syntax below",
                    },
                    boolean("fit", true, "fit a monoexponential to the decay and report T2"),
                ]);
                k.extend(ensemble_keys());
                k.extend(prelude_keys());
                k.extend(pump_keys());
            }
            Scenario::PumpRecovery => {
                k.push(float("fMW", 9.308, "GHz", "probe frequency (fixes the working field)"));
                k.extend(spin_keys());
                k.extend([
                    float("theta", 0.0, "deg", "polar angle"),
                    int("probedLower", 2, "1", "lower level of the probed pair (ascending energy index)"),
                    float("opticalDuration", 1000.0, "us", "length of the optical pulse"),
                    float("sweepStart", -200.0, "us", "first echo position relative to light onset"),
                    float("sweepStop", 2800.0, "us", "last echo position"),
                    int("points", 301, "1", "number of echo positions"),
                    float("noise", 0.0, "1", "Gaussian noise standard deviation relative to the largest |signal|"),
                    int("seed", 1, "1", "noise generator seed"),
                    boolean("fit", true, "fit the during-light and after-light segments"),
                    float("T1", 354.0, "us", "spin-lattice relaxation time"),
                ]);
                k.extend(pump_keys());
            }
            Scenario::Deer => {
                k.extend(spin_keys());
                k.extend([
                    float("fs", 9.308, "GHz", "probe frequency"),
                    float("theta", 0.0, "deg", "polar angle"),
                    float("fpStart", 9.150, "GHz", "first pump frequency"),
                    float("fpStop", 9.399, "GHz", "last pump frequency"),
                    float("step", 1.0, "MHz", "pump frequency step"),
                    float("pumpPulse", 100.0, "ns", "pump pulse length (π at resonator center)"),
                    choice("echoKind", &["stimulated", "refocused"], "stimulated", "detected echo"),
                    choice("opticalMode", &["continuous", "pulsed"], "continuous", "optical pumping during the sweep"),
                    float("stimulatedRatio", 2.0, "1", "stimulated over refocused echo amplitude"),
                    float("echoTime", 2.4, "us", "transverse time of the probe coherence"),
                    int("probedLower", 2, "1", "lower level of the probed pair (ascending energy index)"),
                    float("resonatorCenter", 9.308, "GHz", "resonator center frequency"),
                    float("resonatorFwhm", 100.0, "MHz", "resonator power full width at half maximum"),
                    float("T1", 354.0, "us", "spin-lattice relaxation time"),
                    float("T2", 48.0, "us", "phase memory time"),
                    float("dipProminence", 0.02, "1", "dip detection threshold as a fraction of the unpumped echo"),
                    KeySpec {
                        name: "partners",
                        kind: ValueKind::Tables(partner_keys),
                        default: Fallback::BuiltIn("probe line (λ=0.3), carbon defect 23.2 G above (λ=0.2), V2 line at 9.178 GHz (λ=0.3); 3 G wide"),
                        unit: "",
                        doc: "pumped species",
                    },
                ]);
                k.extend(prelude_keys());
                k.extend(pump_keys());
            }
            Scenario::Swr => {
                k.extend([
                    required_float("fMW", "GHz", "microwave frequency"),
                    float("thickness", 100.0, "nm", "stripe thickness"),
                    float("width", 300.0, "nm", "stripe width (field direction)"),
                    float("length", 100.0, "um", "stripe length"),
                    float("Ms4pi", 11700.0, "G", "saturation induction 4πMs"),
                    float("g", 2.00, "1", "g factor"),
                    float("exchange", 1.3e-6, "erg/cm", "exchange stiffness A"),
                    optional_float("effectiveWidth", "nm", "width used for k quantization (defaults to width)"),
                    int("nMax", 6, "1", "highest mode index"),
                    float("fieldMin", 11500.0, "G", "sweep start"),
                    float("fieldMax", 14000.0, "G", "sweep end"),
                    int("points", 2501, "1", "sweep points"),
                    float("linewidth", 30.0, "G", "peak-to-peak width of each mode line"),
                ]);
            }
            Scenario::Fit => {
                k.extend([
                    KeySpec {
                        name: "data",
                        kind: ValueKind::Text,
                        default: Fallback::Required,
                        unit: "",
                        doc: "two-column CSV (time in µs, value); '#' lines and one header row are skipped; relative to the config file",
                    },
                    optional_float("lightOff", "us", "split time; fits the two segments independently when set"),
                    float("lightOn", 0.0, "us", "start of the first segment in a two-segment fit"),
                    optional_float("tauGuess", "us", "initial time constant (single fit only)"),
                ]);
            }
        }
        k
    }
}

#[derive(Clone, Copy)]
pub enum ValueKind {
    Float,
    Int,
    Bool,
    Choice(&'static [&'static str]),
    Text,
    FloatList,
    TextList,
    Tables(fn() -> Vec<KeySpec>),
}

impl std::fmt::Debug for ValueKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.type_name())
    }
}

impl ValueKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            ValueKind::Float => "number",
            ValueKind::Int => "integer",
            ValueKind::Bool => "boolean",
            ValueKind::Choice(_) => "choice",
            ValueKind::Text => "string",
            ValueKind::FloatList => "number list",
            ValueKind::TextList => "string list",
            ValueKind::Tables(_) => "table list",
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ValueKind::Float | ValueKind::Int | ValueKind::FloatList)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fallback {
    Required,
    Optional,
    Float(f64),
    Int(i64),
    Bool(bool),
    Choice(&'static str),
    FloatList(&'static [f64]),
    /// Default supplied by the scenario code, described in words.
    BuiltIn(&'static str),
}

impl Fallback {
    pub fn to_value(&self) -> Option<toml::Value> {
        use toml::Value as V;
        match self {
            Fallback::Float(v) => Some(V::Float(*v)),
            Fallback::Int(v) => Some(V::Integer(*v)),
            Fallback::Bool(v) => Some(V::Boolean(*v)),
            Fallback::Choice(v) => Some(V::String((*v).into())),
            Fallback::FloatList(v) => Some(V::Array(v.iter().map(|x| V::Float(*x)).collect())),
            Fallback::Required | Fallback::Optional | Fallback::BuiltIn(_) => None,
        }
    }

    fn describe(&self) -> String {
        match self {
            Fallback::Required => "required".into(),
            Fallback::Optional => "unset".into(),
            Fallback::Float(v) => format!("{v}"),
            Fallback::Int(v) => format!("{v}"),
            Fallback::Bool(v) => format!("{v}"),
            Fallback::Choice(v) => format!("\"{v}\""),
            Fallback::FloatList(v) => format!("{v:?}"),
            Fallback::BuiltIn(v) => format!("<{v}>"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: ValueKind,
    pub default: Fallback,
    /// Empty for non-numeric keys; "1" for dimensionless numbers.
    pub unit: &'static str,
    pub doc: &'static str,
}

fn float(name: &'static str, v: f64, unit: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::Float, default: Fallback::Float(v), unit, doc }
}

fn required_float(name: &'static str, unit: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::Float, default: Fallback::Required, unit, doc }
}

fn optional_float(name: &'static str, unit: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::Float, default: Fallback::Optional, unit, doc }
}

fn int(name: &'static str, v: i64, unit: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::Int, default: Fallback::Int(v), unit, doc }
}

fn boolean(name: &'static str, v: bool, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::Bool, default: Fallback::Bool(v), unit: "", doc }
}

fn choice(name: &'static str, options: &'static [&'static str], v: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::Choice(options), default: Fallback::Choice(v), unit: "", doc }
}

fn optional_text(name: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::Text, default: Fallback::Optional, unit: "", doc }
}

fn required_text(name: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::Text, default: Fallback::Required, unit: "", doc }
}

fn float_list(name: &'static str, v: &'static [f64], unit: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::FloatList, default: Fallback::FloatList(v), unit, doc }
}

fn optional_float_list(name: &'static str, unit: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, kind: ValueKind::FloatList, default: Fallback::Optional, unit, doc }
}

fn spin_keys() -> Vec<KeySpec> {
    vec![
        float("S", 1.5, "1", "spin quantum number"),
        float("g", 2.0028, "1", "isotropic g factor"),
        float("D", 35.0, "MHz", "axial zero-field splitting (sign selects which outer line inverts)"),
        float("E", 0.0, "MHz", "rhombic zero-field splitting"),
        float("linewidthPP", 3.0, "G", "peak-to-peak linewidth"),
        float("temperature", 300.0, "K", "lattice temperature"),
    ]
}

fn sweep_keys(lo: f64, hi: f64, points: i64) -> Vec<KeySpec> {
    vec![
        float("fieldMin", lo, "G", "sweep start"),
        float("fieldMax", hi, "G", "sweep end"),
        int("points", points, "1", "sweep points"),
        choice(
            "shape",
            &["lorentzianDerivative", "gaussianDerivative", "lorentzianAbsorption", "gaussianAbsorption"],
            "lorentzianDerivative",
            "line shape",
        ),
    ]
}

fn pump_keys() -> Vec<KeySpec> {
    vec![
        float("epsilon", 0.05, "1", "pump polarization into mS=±1/2, in [0, 1/4]"),
        float("Top", 139.0, "us", "optical pumping time"),
        boolean("topIsEffective", true, "Top is the observed time constant 1/(1/Top+1/T1) rather than the bare optical one"),
    ]
}

fn probe_keys() -> Vec<KeySpec> {
    vec![
        float("theta", 0.0, "deg", "polar angle"),
        int("probedLower", 2, "1", "lower level of the probed pair (ascending energy index)"),
        optional_float("field", "G", "static field (defaults to the probed resonance at fMW)"),
    ]
}

fn ensemble_keys() -> Vec<KeySpec> {
    vec![
        float("inhomogeneousWidth", 0.0, "MHz", "standard deviation of the Gaussian offset distribution"),
        int("quadraturePoints", 16, "1", "Gauss-Hermite points over the offset distribution"),
    ]
}

fn prelude_keys() -> Vec<KeySpec> {
    vec![
        float("lightDuration", 900.0, "us", "optical prelude length"),
        float("gap", 20.0, "us", "dark gap between light-off and the first microwave pulse"),
    ]
}

pub fn extra_species_keys() -> Vec<KeySpec> {
    vec![
        required_text("label", "name of the species"),
        optional_float("g", "1", "g factor of the species"),
        optional_float("lowFieldOffset", "G", "place the line this far above the probed low-field line (sets g)"),
        float("linewidthPP", 3.0, "G", "peak-to-peak linewidth"),
        float("weight", 1.0, "1", "concentration relative to the main species"),
    ]
}

pub fn partner_keys() -> Vec<KeySpec> {
    vec![
        required_text("label", "name of the species"),
        optional_float("offsetMHz", "MHz", "line center relative to fs"),
        optional_float("offsetGauss", "G", "line center as a field offset above the probe line"),
        float("gFactor", 2.0028, "1", "g factor converting offsetGauss and widthGauss"),
        optional_float("absoluteGHz", "GHz", "line center"),
        optional_float("width", "MHz", "line width (peak-to-peak)"),
        float("widthGauss", 3.0, "G", "line width in field units, used when width is unset"),
        required_float("lambda", "1", "modulation depth in [0, 1]"),
    ]
}

pub fn output_keys() -> Vec<KeySpec> {
    vec![
        optional_text("csvPath", "CSV output path (default <scenario>.csv)"),
        optional_text("plotPath", "SVG plot path (no plot when unset)"),
        int("precision", 6, "1", "decimal places in CSV data rows"),
    ]
}

pub const SEQUENCE_SYNTAX: &str = "\
Sequence events (echodecay `sequence`, one string per event):
  mw <probe|pump> <length>ns <amplitude> [<phase>deg]
      amplitude: <x>G (B1), <x>dB (attenuation from referenceB1) or <x>pi (rotation angle x·π)
  delay <t>us | delay tau | delay <k>tau
  optical <t>us
  echo [<window>us]
The echo amplitude reported for each τ is the last acquired echo.";

fn write_keys(out: &mut String, keys: &[KeySpec], indent: &str) {
    for key in keys {
        let unit = if key.unit.is_empty() { String::new() } else { format!(" [{}]", key.unit) };
        let kind = match key.kind {
            ValueKind::Choice(opts) => format!("one of {}", opts.join("|")),
            k => k.type_name().to_string(),
        };
        let _ = writeln!(
            out,
            "{indent}{}{unit} ({kind}) = {}  {}",
            key.name,
            key.default.describe(),
            key.doc
        );
        if let ValueKind::Tables(sub) = key.kind {
            write_keys(out, &sub(), &format!("{indent}    "));
        }
    }
}

/// Text catalog of every scenario and key.
pub fn catalog() -> String {
    let mut out = String::new();
    for s in Scenario::ALL {
        let _ = writeln!(out, "{}: {}", s.name(), s.summary());
        write_keys(&mut out, &s.keys(), "    ");
        out.push('\n');
    }
    out.push_str("output (table [output] in every config):\n");
    write_keys(&mut out, &output_keys(), "    ");
    out.push('\n');
    out.push_str(SEQUENCE_SYNTAX);
    out.push('\n');
    out
}
