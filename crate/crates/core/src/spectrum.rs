//! Sampled 1-D traces and EPR line shapes.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AxisKind {
    FieldGauss,
    FrequencyMhz,
    AngleDeg,
    TimeUs,
    TimeNs,
}

impl AxisKind {
    pub fn column_name(self) -> &'static str {
        match self {
            AxisKind::FieldGauss => "field_G",
            AxisKind::FrequencyMhz => "frequency_MHz",
            AxisKind::AngleDeg => "angle_deg",
            AxisKind::TimeUs => "time_us",
            AxisKind::TimeNs => "time_ns",
        }
    }
}

impl fmt::Display for AxisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub axis_kind: AxisKind,
    pub axis: Vec<f64>,
    pub intensity: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

impl Spectrum {
    pub fn new(axis_kind: AxisKind, axis: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        if axis.len() != intensity.len() {
            return Err(invalid(
                "spectrum",
                format!("axis has {} samples, intensity {}", axis.len(), intensity.len()),
            ));
        }
        if axis.iter().chain(&intensity).any(|v| !v.is_finite()) {
            return Err(invalid("spectrum", "non-finite sample"));
        }
        if axis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("spectrum", "axis is not strictly increasing"));
        }
        Ok(Spectrum {
            axis_kind,
            axis,
            intensity,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.intensity.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `n` evenly spaced samples over [lo, hi], endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineShapeKind {
    LorentzianDerivative,
    GaussianDerivative,
    LorentzianAbsorption,
    GaussianAbsorption,
}

impl LineShapeKind {
    pub fn is_derivative(self) -> bool {
        matches!(
            self,
            LineShapeKind::LorentzianDerivative | LineShapeKind::GaussianDerivative
        )
    }

    pub fn absorption(self) -> Self {
        match self {
            LineShapeKind::LorentzianDerivative | LineShapeKind::LorentzianAbsorption => {
                LineShapeKind::LorentzianAbsorption
            }
            _ => LineShapeKind::GaussianAbsorption,
        }
    }

    pub fn derivative(self) -> Self {
        match self {
            LineShapeKind::LorentzianDerivative | LineShapeKind::LorentzianAbsorption => {
                LineShapeKind::LorentzianDerivative
            }
            _ => LineShapeKind::GaussianDerivative,
        }
    }
}

/// Area-normalized line (or its field derivative). `width_pp` is the
/// peak-to-peak width of the derivative curve for both variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineShape {
    pub kind: LineShapeKind,
    pub width_pp: f64,
}

impl LineShape {
    pub fn new(kind: LineShapeKind, width_pp: f64) -> Result<Self> {
        if !(width_pp.is_finite() && width_pp > 0.0) {
            return Err(invalid("line shape", format!("widthPP = {width_pp} must be > 0")));
        }
        Ok(LineShape { kind, width_pp })
    }

    /// Lorentzian half width at half maximum.
    fn hwhm(&self) -> f64 {
        0.5 * 3f64.sqrt() * self.width_pp
    }

    fn sigma(&self) -> f64 {
        0.5 * self.width_pp
    }

    pub fn value(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match self.kind {
            LineShapeKind::LorentzianAbsorption => {
                let g = self.hwhm();
                g / (PI * (x * x + g * g))
            }
            LineShapeKind::LorentzianDerivative => {
                let g = self.hwhm();
                let d = x * x + g * g;
                -2.0 * g * x / (PI * d * d)
            }
            LineShapeKind::GaussianAbsorption => {
                let s = self.sigma();
                (-0.5 * x * x / (s * s)).exp() / (s * (2.0 * PI).sqrt())
            }
            LineShapeKind::GaussianDerivative => {
                let s = self.sigma();
                -x / (s * s) * (-0.5 * x * x / (s * s)).exp() / (s * (2.0 * PI).sqrt())
            }
        }
    }

    /// max − min of the curve (peak height for absorption shapes).
    pub fn peak_to_peak(&self) -> f64 {
        let half = 0.5 * self.width_pp;
        if self.kind.is_derivative() {
            self.value(-half) - self.value(half)
        } else {
            self.value(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapz(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                w * f(a + k as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn derivative_extrema_sit_at_half_width_pp() {
        for kind in [LineShapeKind::LorentzianDerivative, LineShapeKind::GaussianDerivative] {
            let s = LineShape::new(kind, 3.0).unwrap();
            let h = 1e-6;
            let slope = (s.value(-1.5 + h) - s.value(-1.5 - h)) / (2.0 * h);
            assert!(slope.abs() < 1e-8, "{kind:?} slope {slope}");
            assert!(s.value(-1.5) > 0.0);
        }
    }

    #[test]
    fn absorption_is_normalized_and_derivative_integrates_to_zero() {
        for kind in [LineShapeKind::LorentzianAbsorption, LineShapeKind::GaussianAbsorption] {
            let s = LineShape::new(kind, 3.0).unwrap();
            let area = trapz(|x| s.value(x), -3000.0, 3000.0, 600_000);
            assert!((area - 1.0).abs() < 1e-3, "{kind:?} area {area}");
        }
        for kind in [LineShapeKind::LorentzianDerivative, LineShapeKind::GaussianDerivative] {
            let s = LineShape::new(kind, 3.0).unwrap();
            let integral = trapz(|x| s.value(x), -20.0, 20.0, 4000);
            assert!(integral.abs() < 1e-3 * s.peak_to_peak());
        }
    }

    #[test]
    fn derivative_is_finite_difference_of_absorption() {
        let abs = LineShape::new(LineShapeKind::LorentzianAbsorption, 2.0).unwrap();
        let der = LineShape::new(LineShapeKind::LorentzianDerivative, 2.0).unwrap();
        for x in [-4.0, -0.3, 0.0, 1.1, 5.0] {
            let fd = (abs.value(x + 1e-5) - abs.value(x - 1e-5)) / 2e-5;
            assert!((fd - der.value(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn spectrum_rejects_bad_axes() {
        assert!(Spectrum::new(AxisKind::TimeUs, vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Spectrum::new(AxisKind::TimeUs, vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Spectrum::new(AxisKind::TimeUs, vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(LineShape::new(LineShapeKind::GaussianAbsorption, 0.0).is_err());
    }
}
