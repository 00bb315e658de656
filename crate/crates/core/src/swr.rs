//! Spin-wave resonance of a ferromagnetic nanostripe magnetized in-plane
//! along its width.
//!
//! Modes are standing waves across the width, k_n = nπ/w_eff, on the
//! dipole-exchange dispersion for k parallel to M:
//! f = γ'·√[(H_i + Λk²)(H_i + Λk² + 4πMs·F(kT))], F(x) = (1 − e^{−x})/x,
//! with the internal field H_i = H − N_width·4πMs.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cw::SweepRange;
use crate::error::{invalid, Error, Result};
use crate::spectrum::{AxisKind, LineShape, LineShapeKind, Spectrum};
use crate::units::gyromagnetic_mhz_per_gauss;

/// Bisection stops once the bracket is this narrow, Gauss.
pub const FIELD_TOLERANCE_GAUSS: f64 = 0.1;
/// Upper end of the resonance-field search, Gauss.
const MAX_FIELD_GAUSS: f64 = 200_000.0;

const NM_TO_CM: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripeSpec {
    pub thickness_nm: f64,
    pub width_nm: f64,
    pub length_um: f64,
    /// Saturation induction 4πMs, Gauss.
    pub ms4pi_gauss: f64,
    pub g: f64,
    /// Exchange stiffness, erg/cm.
    pub exchange_erg_per_cm: f64,
    /// Width used for the wavevector quantization; defaults to the geometric width.
    pub effective_width_nm: Option<f64>,
}

impl StripeSpec {
    /// Permalloy stripe: 100 nm × 300 nm × 100 µm, 4πMs = 11700 G, g = 2.00.
    pub fn permalloy() -> Self {
        StripeSpec {
            thickness_nm: 100.0,
            width_nm: 300.0,
            length_um: 100.0,
            ms4pi_gauss: 11700.0,
            g: 2.00,
            exchange_erg_per_cm: 1.3e-6,
            effective_width_nm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("thickness", self.thickness_nm),
            ("width", self.width_nm),
            ("length", self.length_um),
            ("Ms4pi", self.ms4pi_gauss),
            ("g", self.g),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid("stripe", format!("{name} = {v} must be > 0")));
            }
        }
        if !(self.exchange_erg_per_cm.is_finite() && self.exchange_erg_per_cm >= 0.0) {
            return Err(invalid("stripe", "exchange stiffness must be ≥ 0"));
        }
        if let Some(w) = self.effective_width_nm {
            if !(w > 0.0) {
                return Err(invalid("stripe", format!("effective width {w} nm must be > 0")));
            }
        }
        Ok(())
    }

    pub fn effective_width_nm(&self) -> f64 {
        self.effective_width_nm.unwrap_or(self.width_nm)
    }

    /// Exchange field per k², Gauss·cm²: 2A/Ms with Ms = 4πMs/4π.
    pub fn exchange_constant(&self) -> f64 {
        2.0 * self.exchange_erg_per_cm / (self.ms4pi_gauss / (4.0 * PI))
    }

    /// k_n in rad/cm.
    pub fn wavevector(&self, n: u32) -> f64 {
        n as f64 * PI / (self.effective_width_nm() * NM_TO_CM)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemagFactors {
    pub width: f64,
    pub length: f64,
    pub thickness: f64,
}

impl DemagFactors {
    pub fn sum(&self) -> f64 {
        self.width + self.length + self.thickness
    }
}

/// Demagnetizing factor along the `c` edge of a rectangular prism with half
/// edges `a`, `b`, `c` (any common unit).
pub fn prism_factor(a: f64, b: f64, c: f64) -> f64 {
    let (a2, b2, c2) = (a * a, b * b, c * c);
    let r = (a2 + b2 + c2).sqrt();
    let ab = (a2 + b2).sqrt();
    let bc = (b2 + c2).sqrt();
    let ac = (a2 + c2).sqrt();
    // Logs of near-unit ratios go through ln_1p, and the cubic terms are
    // regrouped into positive pieces; the textbook form loses ~1e-7 at
    // aspect ratios of 10^4.
    let mut s = (b2 - c2) / (b * c) * (-(a2 / (r + bc) + a) / (r + a)).ln_1p();
    s += (a2 - c2) / (a * c) * (-(b2 / (r + ac) + b) / (r + b)).ln_1p();
    s += b / c * ((a2 / (ab + b) + a) / b).ln_1p();
    s += a / c * ((b2 / (ab + a) + b) / a).ln_1p();
    s -= c / a * ((b2 / (bc + c) + b) / c).ln_1p();
    s -= c / b * ((a2 / (ac + c) + a) / c).ln_1p();
    s += 2.0 * (a * b / (c * r)).atan();
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    // a³ + b³ − (a² + b²)^{3/2}
    let mut p = small.powi(3) - small * small * (ab * ab + ab * big + big * big) / (ab + big);
    p += a2 * b2 * (1.0 / (r + bc) + 1.0 / (r + ac));
    p += 2.0 * c2 * a2 * b2 * (1.0 / ((r + bc) * (bc + c) * (r + c)) + 1.0 / ((r + ac) * (ac + c) * (r + c)));
    s += p / (3.0 * a * b * c);
    s / PI
}

pub fn demag_factors(spec: &StripeSpec) -> Result<DemagFactors> {
    spec.validate()?;
    let w = 0.5 * spec.width_nm;
    let l = 0.5 * spec.length_um * 1e3;
    let t = 0.5 * spec.thickness_nm;
    Ok(DemagFactors {
        width: prism_factor(l, t, w),
        length: prism_factor(t, w, l),
        thickness: prism_factor(w, l, t),
    })
}

/// (1 − e^{−x})/x, continuous at 0.
fn thin_film_factor(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Precomputed stripe quantities for repeated dispersion evaluation.
#[derive(Debug, Clone, Copy)]
struct Dispersion {
    gamma: f64,
    demag_field: f64,
    exchange: f64,
    ms4pi: f64,
    thickness_cm: f64,
}

impl Dispersion {
    fn new(spec: &StripeSpec) -> Result<Self> {
        let n = demag_factors(spec)?;
        Ok(Dispersion {
            gamma: gyromagnetic_mhz_per_gauss(spec.g),
            demag_field: n.width * spec.ms4pi_gauss,
            exchange: spec.exchange_constant(),
            ms4pi: spec.ms4pi_gauss,
            thickness_cm: spec.thickness_nm * NM_TO_CM,
        })
    }

    /// GHz
    fn frequency(&self, h: f64, k: f64) -> Result<f64> {
        let hi = h - self.demag_field;
        if !(hi > 0.0) {
            return Err(Error::Unsaturated { internal_field: hi });
        }
        let stiff = hi + self.exchange * k * k;
        let f = self.gamma * (stiff * (stiff + self.ms4pi * thin_film_factor(k * self.thickness_cm))).sqrt();
        Ok(f * 1e-3)
    }

    fn saturation_field(&self) -> f64 {
        self.demag_field
    }

    fn resonance(&self, f_ghz: f64, k: f64) -> Option<f64> {
        let lo0 = self.saturation_field() * (1.0 + 1e-12) + 1e-9;
        let below = |h: f64| self.frequency(h, k).map(|f| f < f_ghz).unwrap_or(true);
        if !below(lo0) || below(MAX_FIELD_GAUSS) {
            return None;
        }
        let (mut lo, mut hi) = (lo0, MAX_FIELD_GAUSS);
        while hi - lo > FIELD_TOLERANCE_GAUSS {
            let mid = 0.5 * (lo + hi);
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Frequency of mode `n` (n = 0 is the uniform mode) at applied field `h`, GHz.
pub fn dispersion_frequency(spec: &StripeSpec, h_gauss: f64, n: u32) -> Result<f64> {
    Dispersion::new(spec)?.frequency(h_gauss, spec.wavevector(n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwrMode {
    pub n: u32,
    /// rad/cm
    pub k: f64,
    pub field_gauss: f64,
}

/// Mode fields for n = 1..=n_max at fixed frequency; modes without a root
/// in the physical range are omitted.
pub fn resonance_fields_at_frequency(spec: &StripeSpec, f_ghz: f64, n_max: u32) -> Result<Vec<SwrMode>> {
    if !(f_ghz.is_finite() && f_ghz > 0.0) {
        return Err(invalid("frequency", format!("fMW = {f_ghz} GHz must be > 0")));
    }
    if n_max == 0 {
        return Err(invalid("mode count", "nMax must be ≥ 1"));
    }
    let disp = Dispersion::new(spec)?;
    Ok((1..=n_max)
        .into_par_iter()
        .filter_map(|n| {
            let k = spec.wavevector(n);
            disp.resonance(f_ghz, k).map(|field_gauss| SwrMode { n, k, field_gauss })
        })
        .collect())
}

/// Field of the k = 0 mode with the stripe's internal demagnetizing field.
pub fn uniform_mode_field(spec: &StripeSpec, f_ghz: f64) -> Result<Option<f64>> {
    Ok(Dispersion::new(spec)?.resonance(f_ghz, 0.0))
}

/// In-plane thin-film Kittel resonance field: f = γ'√(H(H + 4πMs)).
pub fn kittel_film_field(f_ghz: f64, ms4pi: f64, g: f64) -> f64 {
    let x = f_ghz * 1e3 / gyromagnetic_mhz_per_gauss(g);
    0.5 * (-ms4pi + (ms4pi * ms4pi + 4.0 * x * x).sqrt())
}

#[derive(Debug, Clone)]
pub struct SwrSpectrum {
    pub modes: Vec<SwrMode>,
    pub spectrum: Spectrum,
}

/// Equal-amplitude lines at the mode fields (each peak, or peak-to-peak for
/// derivative shapes, has unit height).
pub fn swr_spectrum(
    spec: &StripeSpec,
    f_ghz: f64,
    range: &SweepRange,
    shape: &LineShape,
    n_max: u32,
) -> Result<SwrSpectrum> {
    let modes = resonance_fields_at_frequency(spec, f_ghz, n_max)?;
    let scale = 1.0 / shape.peak_to_peak();
    let axis = range.axis();
    let intensity = axis
        .iter()
        .map(|&b| modes.iter().map(|m| shape.value(b - m.field_gauss)).sum::<f64>() * scale)
        .collect();
    let variant = if shape.kind.is_derivative() { "derivative" } else { "absorption" };
    let spectrum = Spectrum::new(AxisKind::FieldGauss, axis, intensity)?
        .with_meta("fMW_GHz", f_ghz)
        .with_meta("modes", modes.len())
        .with_meta("variant", variant)
        .with_meta("linewidth_G", shape.width_pp)
        .with_meta("Ms4pi_G", spec.ms4pi_gauss)
        .with_meta("A_erg_per_cm", spec.exchange_erg_per_cm)
        .with_meta("width_eff_nm", spec.effective_width_nm());
    Ok(SwrSpectrum { modes, spectrum })
}

/// Default line shape for spin-wave spectra.
pub fn default_shape(width_pp: f64, derivative: bool) -> Result<LineShape> {
    let kind = if derivative {
        LineShapeKind::LorentzianDerivative
    } else {
        LineShapeKind::LorentzianAbsorption
    };
    LineShape::new(kind, width_pp)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gauss–Legendre nodes/weights on [0, 1].
    fn legendre(n: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(n);
        for i in 1..=n {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            out.push((0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    }

    /// ∫_A∫_A 1/√(|ρ−ρ'|² + d²) over a 2p × 2q face, reduced to the
    /// difference variables and split into two Duffy triangles.
    fn face_interaction(p: f64, q: f64, d: f64, rule: &[(f64, f64)]) -> f64 {
        let (u_max, v_max) = (2.0 * p, 2.0 * q);
        let f = |u: f64, v: f64| 4.0 * (u_max - u) * (v_max - v) / (u * u + v * v + d * d).sqrt();
        let mut total = 0.0;
        for &(s, ws) in rule {
            for &(t, wt) in rule {
                // u ≥ v·U/V half: u = sU, v = stV
                total += ws * wt * s * u_max * v_max * f(s * u_max, s * t * v_max);
                // other half: v = sV, u = stU
                total += ws * wt * s * u_max * v_max * f(s * t * u_max, s * v_max);
            }
        }
        total
    }

    /// N_c from the surface-charge energy: (I(0) − I(2c)) / (2πV).
    fn charge_oracle(a: f64, b: f64, c: f64) -> f64 {
        let rule = legendre(80);
        let volume = 8.0 * a * b * c;
        (face_interaction(a, b, 0.0, &rule) - face_interaction(a, b, 2.0 * c, &rule)) / (2.0 * PI * volume)
    }

    #[test]
    fn closed_form_matches_surface_charge_integral() {
        for (a, b, c) in [(1.0, 1.0, 1.0), (1.0, 2.0, 3.0), (0.5, 1.0, 4.0), (3.0, 1.0, 0.5)] {
            let closed = prism_factor(a, b, c);
            let oracle = charge_oracle(a, b, c);
            assert!((closed - oracle).abs() < 1e-6, "{a} {b} {c}: {closed} vs {oracle}");
        }
    }

    #[test]
    fn factors_sum_to_one() {
        let cube = prism_factor(2.0, 2.0, 2.0);
        assert!((cube - 1.0 / 3.0).abs() < 1e-12);
        let n = demag_factors(&StripeSpec::permalloy()).unwrap();
        assert!((n.sum() - 1.0).abs() < 1e-9, "{}", n.sum());
        assert!(n.width > n.length);
        assert!((n.width - 0.276397).abs() < 1e-5);
        let film = StripeSpec {
            thickness_nm: 1.0,
            width_nm: 1e5,
            length_um: 100.0,
            ..StripeSpec::permalloy()
        };
        let f = demag_factors(&film).unwrap();
        assert!(f.thickness > 0.999 && f.width < 1e-3 && f.length < 1e-3);
        for v in [f.width, f.length, f.thickness, n.width, n.length, n.thickness] {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn kittel_limits() {
        // wide thin film: no demag along width, k → 0
        let film = StripeSpec {
            thickness_nm: 1.0,
            width_nm: 1e9,
            length_um: 1e7,
            exchange_erg_per_cm: 0.0,
            ..StripeSpec::permalloy()
        };
        let h = 3000.0;
        let f = dispersion_frequency(&film, h, 0).unwrap();
        let want = gyromagnetic_mhz_per_gauss(2.0) * (h * (h + 11700.0)).sqrt() * 1e-3;
        assert!((f / want - 1.0).abs() < 1e-4);
        let kf = kittel_film_field(34.0, 11700.0, 2.0);
        let back = gyromagnetic_mhz_per_gauss(2.0) * (kf * (kf + 11700.0)).sqrt() * 1e-3;
        assert!((back - 34.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_dispersion_is_mode_independent() {
        // A = 0 and kT → 0 so F → 1
        let spec = StripeSpec {
            thickness_nm: 1e-6,
            exchange_erg_per_cm: 0.0,
            ..StripeSpec::permalloy()
        };
        let f0 = dispersion_frequency(&spec, 15000.0, 0).unwrap();
        for n in 1..6 {
            assert!((dispersion_frequency(&spec, 15000.0, n).unwrap() / f0 - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn unsaturated_is_an_error() {
        let spec = StripeSpec::permalloy();
        assert!(matches!(dispersion_frequency(&spec, 1000.0, 1), Err(Error::Unsaturated { .. })));
    }

    #[test]
    fn monotone_in_field_and_round_trip() {
        let spec = StripeSpec::permalloy();
        for n in 1..=6 {
            let mut last = 0.0;
            for k in 0..200 {
                let h = 3300.0 + 100.0 * k as f64;
                let f = dispersion_frequency(&spec, h, n).unwrap();
                assert!(f > last);
                last = f;
            }
        }
        for m in resonance_fields_at_frequency(&spec, 34.0, 8).unwrap() {
            let f = dispersion_frequency(&spec, m.field_gauss, m.n).unwrap();
            assert!((f - 34.0).abs() * 1e3 < 0.5, "n = {}", m.n);
        }
    }

    #[test]
    fn more_exchange_lowers_every_field() {
        let spec = StripeSpec::permalloy();
        let stiff = StripeSpec {
            exchange_erg_per_cm: 2.0 * spec.exchange_erg_per_cm,
            ..spec
        };
        let a = resonance_fields_at_frequency(&spec, 34.0, 6).unwrap();
        let b = resonance_fields_at_frequency(&stiff, 34.0, 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(y.field_gauss < x.field_gauss);
        }
    }

    #[test]
    fn wide_quantization_approaches_uniform_mode() {
        let spec = StripeSpec {
            effective_width_nm: Some(1e9),
            ..StripeSpec::permalloy()
        };
        let uniform = uniform_mode_field(&spec, 34.0).unwrap().unwrap();
        for m in resonance_fields_at_frequency(&spec, 34.0, 6).unwrap() {
            assert!((m.field_gauss - uniform).abs() < 0.5);
        }
    }

    #[test]
    fn spectrum_lines_have_equal_height() {
        let spec = StripeSpec::permalloy();
        let shape = default_shape(20.0, false).unwrap();
        let range = SweepRange::new(10000.0, 15000.0, 5001).unwrap();
        let s = swr_spectrum(&spec, 34.0, &range, &shape, 6).unwrap();
        assert_eq!(s.modes.len(), 6);
        let deriv = swr_spectrum(&spec, 34.0, &range, &default_shape(20.0, true).unwrap(), 6).unwrap();
        let integral: f64 = deriv.spectrum.intensity.iter().sum();
        let total: f64 = deriv.spectrum.intensity.iter().map(|v| v.abs()).sum();
        assert!(integral.abs() < 1e-3 * total);
        let none = swr_spectrum(&spec, 0.5, &range, &shape, 6).unwrap();
        assert!(none.modes.is_empty());
        assert!(none.spectrum.intensity.iter().all(|v| *v == 0.0));
    }
}
