//! Small dense Hermitian helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// Column `k` of the returned matrix is the eigenvector of eigenvalue `k`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// max |M − M†|
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        for col in 0..m.ncols() {
            worst = worst.max((m[(r, col)] - m[(col, r)].conj()).norm());
        }
    }
    worst
}

/// Decomposed Hermitian generator; evaluates exp(−i 2π H t) for any t.
#[derive(Debug, Clone)]
pub struct Propagator {
    values: Vec<f64>,
    vectors: CMatrix,
}

impl Propagator {
    pub fn new(h: &CMatrix) -> Self {
        let (values, vectors) = hermitian_eigen(h);
        Self { values, vectors }
    }

    /// Unitary for a duration in µs when `h` is in MHz.
    pub fn unitary(&self, t_us: f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &e) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * e * t_us);
            for r in 0..n {
                scaled[(r, k)] *= phase;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagator_of_diagonal_generator() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(-0.5)]));
        let u = Propagator::new(&h).unitary(0.25);
        // exp(-i 2π · 1 · 0.25) = -i
        assert!((u[(0, 0)] - C64::new(0.0, -1.0)).norm() < 1e-12);
        assert!(u[(0, 1)].norm() < 1e-12);
        let uu = &u * u.adjoint();
        assert!((uu - CMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_are_sorted() {
        let h = CMatrix::from_row_slice(2, 2, &[c(3.0), I, -I, c(-1.0)]);
        let (v, vecs) = hermitian_eigen(&h);
        assert!(v[0] < v[1]);
        let back = &vecs * CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v.iter().map(|&x| c(x)).collect())) * vecs.adjoint();
        assert!((back - h).norm() < 1e-12);
    }
}
