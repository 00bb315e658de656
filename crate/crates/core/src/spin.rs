//! Static spin Hamiltonian of a single paramagnetic center: spin operators,
//! Zeeman plus axial/rhombic zero-field splitting, transition frequencies and
//! resonance fields.
//!
//! The zero-field-splitting principal axis is the crystal c axis (z). The
//! static field lies in the xz plane at polar angle θ from c. Energy levels
//! are sorted ascending; at X-band fields level `k` continues adiabatically
//! to the Zeeman state m_S = −S + k.

use nalgebra::DVector;

use crate::error::{invalid, Result};
use crate::linalg::{c, hermitian_eigen, hermitian_eigenvalues, CMatrix, I};
use crate::units::gyromagnetic_mhz_per_gauss;

/// Matrix elements below this are forbidden transitions.
pub const FORBIDDEN_THRESHOLD: f64 = 1e-6;

/// Magic angle arccos(1/√3) in degrees.
pub const MAGIC_ANGLE_DEG: f64 = 54.735_610_317_245_35;

/// Half-integer-valued spin quantum number, stored as 2S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice: 1 };
    pub const THREE_HALVES: Spin = Spin { twice: 3 };

    pub fn new(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !s.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(invalid("spin", format!("S = {s}: 2S+1 must be an integer ≥ 2")));
        }
        Ok(Spin {
            twice: twice.round() as u32,
        })
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// 2S + 1
    pub fn multiplicity(self) -> usize {
        self.twice as usize + 1
    }

    /// m_S values in basis order: S, S−1, …, −S.
    pub fn projections(self) -> Vec<f64> {
        (0..self.multiplicity())
            .map(|k| self.value() - k as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
}

/// Sx, Sy, Sz in the |S⟩, |S−1⟩, …, |−S⟩ basis.
pub fn spin_operators(spin: Spin) -> SpinOperators {
    let n = spin.multiplicity();
    let s = spin.value();
    let m = spin.projections();
    let mut raise = CMatrix::zeros(n, n);
    for k in 1..n {
        // ⟨m+1|S+|m⟩ with m = m[k], m+1 = m[k-1]
        raise[(k - 1, k)] = c((s * (s + 1.0) - m[k] * (m[k] + 1.0)).sqrt());
    }
    let lower = raise.adjoint();
    let x = (&raise + &lower) * c(0.5);
    let y = (&raise - &lower) * (-I * 0.5);
    let z = CMatrix::from_diagonal(&DVector::from_iterator(n, m.iter().map(|&v| c(v))));
    SpinOperators { x, y, z }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    pub spin: Spin,
    pub g: f64,
    /// Axial zero-field splitting, MHz.
    pub d_mhz: f64,
    /// Rhombic zero-field splitting, MHz.
    pub e_mhz: f64,
    /// Peak-to-peak derivative linewidth, Gauss.
    pub linewidth_pp: f64,
    pub label: String,
}

impl SpinSystem {
    pub fn new(
        spin: Spin,
        g: f64,
        d_mhz: f64,
        e_mhz: f64,
        linewidth_pp: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let sys = SpinSystem {
            spin,
            g,
            d_mhz,
            e_mhz,
            linewidth_pp,
            label: label.into(),
        };
        sys.validate()?;
        Ok(sys)
    }

    /// The V2 silicon vacancy in 4H-SiC: S = 3/2, g = 2.0028, D = 35 MHz, 3 G lines.
    pub fn v2_silicon_vacancy() -> Self {
        SpinSystem {
            spin: Spin::THREE_HALVES,
            g: 2.0028,
            d_mhz: 35.0,
            e_mhz: 0.0,
            linewidth_pp: 3.0,
            label: "V2".into(),
        }
    }

    /// An S = 1/2 species whose g factor puts its line at `field_gauss` for `f_mhz`.
    pub fn spin_half_resonant_at(
        field_gauss: f64,
        f_mhz: f64,
        linewidth_pp: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if field_gauss <= 0.0 || f_mhz <= 0.0 {
            return Err(invalid("species", "field and frequency must be positive"));
        }
        let g = f_mhz / (crate::units::BOHR_MHZ_PER_GAUSS * field_gauss);
        Self::new(Spin::HALF, g, 0.0, 0.0, linewidth_pp, label)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(invalid("spin system", format!("g = {} must be > 0", self.g)));
        }
        if !(self.linewidth_pp.is_finite() && self.linewidth_pp > 0.0) {
            return Err(invalid(
                "spin system",
                format!("linewidthPP = {} must be > 0", self.linewidth_pp),
            ));
        }
        if !self.d_mhz.is_finite() || !self.e_mhz.is_finite() {
            return Err(invalid("spin system", "D and E must be finite"));
        }
        if self.d_mhz != 0.0 && self.e_mhz != 0.0 && self.e_mhz.abs() > self.d_mhz.abs() / 3.0 {
            return Err(invalid(
                "spin system",
                format!("|E| = {} exceeds |D|/3 = {}", self.e_mhz.abs(), self.d_mhz.abs() / 3.0),
            ));
        }
        Ok(())
    }

    pub fn gyromagnetic(&self) -> f64 {
        gyromagnetic_mhz_per_gauss(self.g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOrientation {
    pub b0_gauss: f64,
    pub theta_deg: f64,
}

impl FieldOrientation {
    pub fn new(b0_gauss: f64, theta_deg: f64) -> Result<Self> {
        if !(b0_gauss.is_finite() && b0_gauss >= 0.0) {
            return Err(invalid("field", format!("B0 = {b0_gauss} G must be ≥ 0")));
        }
        if !(0.0..=90.0).contains(&theta_deg) {
            return Err(invalid("field", format!("θ = {theta_deg}° outside [0, 90]")));
        }
        Ok(FieldOrientation { b0_gauss, theta_deg })
    }

    /// Unit vector (sin θ, 0, cos θ).
    pub fn direction(&self) -> [f64; 3] {
        let t = self.theta_deg.to_radians();
        [t.sin(), 0.0, t.cos()]
    }

    /// Unit vector perpendicular to the field in the xz plane.
    pub fn perpendicular(&self) -> [f64; 3] {
        let t = self.theta_deg.to_radians();
        [t.cos(), 0.0, -t.sin()]
    }
}

/// Precomputed operators for repeated Hamiltonian evaluation over a field grid.
#[derive(Debug, Clone)]
pub struct SpinHamiltonian {
    gamma: f64,
    ops: SpinOperators,
    zero_field: CMatrix,
}

impl SpinHamiltonian {
    pub fn new(sys: &SpinSystem) -> Result<Self> {
        sys.validate()?;
        let ops = spin_operators(sys.spin);
        let n = sys.spin.multiplicity();
        let s = sys.spin.value();
        let sz2 = &ops.z * &ops.z;
        let shift = CMatrix::identity(n, n) * c(s * (s + 1.0) / 3.0);
        let axial = (&sz2 - shift) * c(sys.d_mhz);
        let rhombic = (&ops.x * &ops.x - &ops.y * &ops.y) * c(sys.e_mhz);
        Ok(SpinHamiltonian {
            gamma: sys.gyromagnetic(),
            ops,
            zero_field: axial + rhombic,
        })
    }

    pub fn dimension(&self) -> usize {
        self.zero_field.nrows()
    }

    pub fn operators(&self) -> &SpinOperators {
        &self.ops
    }

    pub(crate) fn component(&self, dir: [f64; 3]) -> CMatrix {
        &self.ops.x * c(dir[0]) + &self.ops.y * c(dir[1]) + &self.ops.z * c(dir[2])
    }

    pub(crate) fn matrix_along(&self, b0: f64, dir: [f64; 3]) -> CMatrix {
        &self.zero_field + self.component(dir) * c(self.gamma * b0)
    }

    /// Hamiltonian in MHz.
    pub fn matrix(&self, field: &FieldOrientation) -> CMatrix {
        self.matrix_along(field.b0_gauss, field.direction())
    }

    /// Ascending energy levels, MHz.
    pub fn levels(&self, field: &FieldOrientation) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix(field))
    }

    pub fn transitions(&self, field: &FieldOrientation) -> TransitionSet {
        let (energies, vectors) = hermitian_eigen(&self.matrix(field));
        let perp = vectors.adjoint() * self.component(field.perpendicular()) * &vectors;
        let n = energies.len();
        let mut transitions = Vec::with_capacity(n * (n - 1) / 2);
        for lower in 0..n {
            for upper in lower + 1..n {
                let m2 = perp[(lower, upper)].norm_sqr();
                transitions.push(Transition {
                    lower,
                    upper,
                    frequency_mhz: energies[upper] - energies[lower],
                    matrix_element_sq: m2,
                    allowed: m2 >= FORBIDDEN_THRESHOLD,
                });
            }
        }
        TransitionSet {
            energies,
            perpendicular: perp,
            transitions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    pub frequency_mhz: f64,
    pub matrix_element_sq: f64,
    pub allowed: bool,
}

#[derive(Debug, Clone)]
pub struct TransitionSet {
    /// Ascending level energies, MHz.
    pub energies: Vec<f64>,
    /// ⟨i|S⊥|j⟩ in the eigenbasis.
    pub perpendicular: CMatrix,
    pub transitions: Vec<Transition>,
}

impl TransitionSet {
    pub fn allowed(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.allowed)
    }

    pub fn get(&self, lower: usize, upper: usize) -> Option<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.lower == lower && t.upper == upper)
    }

    /// Adjacent-level (Δm_S = ±1 in the high-field limit) transitions.
    pub fn adjacent(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.upper == t.lower + 1)
    }
}

pub fn spin_hamiltonian(sys: &SpinSystem, field: &FieldOrientation) -> Result<CMatrix> {
    Ok(SpinHamiltonian::new(sys)?.matrix(field))
}

pub fn transitions(sys: &SpinSystem, field: &FieldOrientation) -> Result<TransitionSet> {
    Ok(SpinHamiltonian::new(sys)?.transitions(field))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub field_gauss: f64,
    pub lower: usize,
    pub upper: usize,
    pub matrix_element_sq: f64,
}

/// Bracket width for the resonance-field scan, Gauss.
const SCAN_STEP_GAUSS: f64 = 1.0;
/// Final bracket width, Gauss.
const FIELD_TOLERANCE_GAUSS: f64 = 1e-3;

/// All fields in `range` where an allowed transition matches `f_ghz`, sorted ascending.
pub fn resonance_fields(
    sys: &SpinSystem,
    theta_deg: f64,
    f_ghz: f64,
    range: (f64, f64),
) -> Result<Vec<Resonance>> {
    let ham = SpinHamiltonian::new(sys)?;
    resonance_fields_with(&ham, theta_deg, f_ghz, range)
}

pub fn resonance_fields_with(
    ham: &SpinHamiltonian,
    theta_deg: f64,
    f_ghz: f64,
    range: (f64, f64),
) -> Result<Vec<Resonance>> {
    if !(f_ghz.is_finite() && f_ghz > 0.0) {
        return Err(invalid("frequency", format!("fMW = {f_ghz} GHz must be > 0")));
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
        return Err(invalid("field range", format!("[{lo}, {hi}] G is empty or negative")));
    }
    FieldOrientation::new(lo, theta_deg)?;
    let f_mhz = f_ghz * 1e3;
    let n = ham.dimension();
    let dir = FieldOrientation { b0_gauss: 0.0, theta_deg }.direction();
    let mismatch = |b: f64| -> Vec<f64> {
        let e = hermitian_eigenvalues(&ham.matrix_along(b, dir));
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(e[j] - e[i] - f_mhz);
            }
        }
        out
    };
    let pair_of = |idx: usize| -> (usize, usize) {
        let mut k = idx;
        for i in 0..n {
            let row = n - 1 - i;
            if k < row {
                return (i, i + 1 + k);
            }
            k -= row;
        }
        unreachable!()
    };

    let steps = ((hi - lo) / SCAN_STEP_GAUSS).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
        .collect();
    let values: Vec<Vec<f64>> = grid.iter().map(|&b| mismatch(b)).collect();

    let mut roots = Vec::new();
    for k in 0..steps {
        for (p, (&ga, &gb)) in values[k].iter().zip(&values[k + 1]).enumerate() {
            let root = if ga == 0.0 {
                Some(grid[k])
            } else if k + 1 == steps && gb == 0.0 {
                Some(grid[k + 1])
            } else if ga * gb < 0.0 {
                let (mut a, mut b, mut fa) = (grid[k], grid[k + 1], ga);
                while b - a > FIELD_TOLERANCE_GAUSS {
                    let mid = 0.5 * (a + b);
                    let fm = mismatch(mid)[p];
                    if fm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if (fm < 0.0) == (fa < 0.0) {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                Some(0.5 * (a + b))
            } else {
                None
            };
            if let Some(b_res) = root {
                roots.push((b_res, pair_of(p)));
            }
        }
    }

    let mut out = Vec::with_capacity(roots.len());
    for (b_res, (lower, upper)) in roots {
        let set = ham.transitions(&FieldOrientation {
            b0_gauss: b_res,
            theta_deg,
        });
        let m2 = set.perpendicular[(lower, upper)].norm_sqr();
        if m2 >= FORBIDDEN_THRESHOLD {
            out.push(Resonance {
                field_gauss: b_res,
                lower,
                upper,
                matrix_element_sq: m2,
            });
        }
    }
    out.sort_by(|a, b| {
        a.field_gauss
            .total_cmp(&b.field_gauss)
            .then(a.lower.cmp(&b.lower))
    });
    Ok(out)
}

/// Transition frequency of a level pair at a field, MHz.
pub fn transition_frequency(
    ham: &SpinHamiltonian,
    field: &FieldOrientation,
    lower: usize,
    upper: usize,
) -> f64 {
    let e = ham.levels(field);
    e[upper] - e[lower]
}
