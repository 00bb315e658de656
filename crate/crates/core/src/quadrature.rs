//! Gauss–Hermite rules built with the Golub–Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights for ∫ e^{−x²} f(x) dx ≈ Σ wᵢ f(xᵢ), nodes ascending.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature order must be positive");
    if n == 1 {
        return vec![(0.0, std::f64::consts::PI.sqrt())];
    }
    let jacobi = DMatrix::from_fn(n, n, |r, c| {
        if r + 1 == c || c + 1 == r {
            (r.max(c) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Exact symmetry about zero.
    for k in 0..n / 2 {
        let x = 0.5 * (rule[n - 1 - k].0 - rule[k].0);
        let w = 0.5 * (rule[n - 1 - k].1 + rule[k].1);
        rule[k] = (-x, w);
        rule[n - 1 - k] = (x, w);
    }
    if n % 2 == 1 {
        rule[n / 2].0 = 0.0;
    }
    rule
}

/// Offsets and probability weights sampling a zero-mean Gaussian with
/// standard deviation `sigma`. Weights sum to one.
pub fn gaussian_samples(sigma: f64, n: usize) -> Vec<(f64, f64)> {
    if sigma == 0.0 {
        return vec![(0.0, 1.0)];
    }
    let norm = std::f64::consts::PI.sqrt();
    gauss_hermite(n)
        .into_iter()
        .map(|(x, w)| (std::f64::consts::SQRT_2 * sigma * x, w / norm))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_moments() {
        let rule = gauss_hermite(16);
        let m0: f64 = rule.iter().map(|(_, w)| w).sum();
        let m2: f64 = rule.iter().map(|(x, w)| w * x * x).sum();
        let m4: f64 = rule.iter().map(|(x, w)| w * x.powi(4)).sum();
        let sp = std::f64::consts::PI.sqrt();
        assert!((m0 - sp).abs() < 1e-12);
        assert!((m2 - sp / 2.0).abs() < 1e-12);
        assert!((m4 - 3.0 * sp / 4.0).abs() < 1e-12);
    }

    #[test]
    fn known_two_point_rule() {
        let rule = gauss_hermite(2);
        assert!((rule[1].0 - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((rule[0].1 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_samples_variance() {
        let s = gaussian_samples(2.5, 16);
        let var: f64 = s.iter().map(|(x, w)| w * x * x).sum();
        assert!((var - 6.25).abs() < 1e-10);
    }
}
