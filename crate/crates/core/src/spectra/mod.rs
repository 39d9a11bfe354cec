//! Symmetric eigenvalues and functionals of empirical spectral distributions.

mod eigen;

pub use eigen::{asymmetry, check_symmetric, max_residual, symmetric_eigen, SymmetricEigen};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry tolerance accepted by [`symmetric_eigenvalues`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Eigenvalues of a symmetric matrix, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSpectrum {
    eigenvalues: Vec<f64>,
    source_dim: usize,
}

impl EmpiricalSpectrum {
    /// Wraps arbitrary eigenvalues (any order).
    pub fn from_eigenvalues(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("spectrum needs at least one eigenvalue"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spectrum contains non-finite eigenvalues"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let source_dim = values.len();
        Ok(Self {
            eigenvalues: values,
            source_dim,
        })
    }

    /// Descending order: `λ_1 ≥ … ≥ λ_p`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn ascending(&self) -> impl DoubleEndedIterator<Item = f64> + ExactSizeIterator + '_ {
        self.eigenvalues.iter().rev().copied()
    }

    pub fn len(&self) -> usize {
        self.source_dim
    }

    pub fn is_empty(&self) -> bool {
        self.source_dim == 0
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[self.source_dim - 1]
    }

    pub fn mean(&self) -> f64 {
        self.eigenvalues.iter().sum::<f64>() / self.source_dim as f64
    }

    /// `F(x) = #{λ_i ≤ x} / p`.
    pub fn cdf(&self, x: f64) -> f64 {
        // eigenvalues are descending: count the suffix that is <= x
        let above = self.eigenvalues.partition_point(|&l| l > x);
        (self.source_dim - above) as f64 / self.source_dim as f64
    }

    /// Smallest eigenvalue `λ` with `F(λ) ≥ q`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        let p = self.source_dim as f64;
        // rank k (1-based, ascending) = ceil(q p); guard against q p landing a hair above an integer
        let k = ((q * p - 1e-9 * p.max(1.0)).ceil() as usize).clamp(1, self.source_dim);
        Ok(self.eigenvalues[self.source_dim - k])
    }

    /// Kolmogorov–Smirnov distance to `cdf`, evaluated at both one-sided
    /// limits of every atom.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let p = self.source_dim as f64;
        let asc: Vec<f64> = self.ascending().collect();
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i < asc.len() {
            let x = asc[i];
            let mut j = i;
            while j < asc.len() && asc[j] == x {
                j += 1;
            }
            let below = i as f64 / p;
            let at = j as f64 / p;
            worst = worst.max((at - cdf(x)).abs()).max((below - cdf(x.next_down())).abs());
            i = j;
        }
        worst
    }

    /// `s(z) = (1/p) Σ 1/(λ_i - z)` for `Im z > 0`.
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::domain(format!("Stieltjes transform needs Im z > 0, got {z}")));
        }
        let sum: Complex64 = self.eigenvalues.iter().map(|&l| (Complex64::new(l, 0.0) - z).inv()).sum();
        Ok(sum / self.source_dim as f64)
    }

    /// Correlation-matrix spectra: all eigenvalues ≥ −1e−10 and mean 1 within 1e−8.
    pub fn is_correlation_spectrum(&self) -> bool {
        self.min() >= -1e-10 && (self.mean() - 1.0).abs() <= 1e-8
    }
}

/// Eigenvalues of a symmetric matrix (`‖A − Aᵀ‖_max ≤ 1e−8`).
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<EmpiricalSpectrum> {
    eigen::check_symmetric(a, SYMMETRY_TOL)?;
    if a.nrows() == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let eig = symmetric_eigen(a, false)?;
    EmpiricalSpectrum::from_eigenvalues(eig.eigenvalues)
}

/// Eigenvalues plus the residual check `max ‖Av − λv‖ ≤ 1e−8 · max(1, ‖A‖)`.
pub fn symmetric_eigenvalues_verified(a: &DMatrix<f64>) -> Result<(EmpiricalSpectrum, f64)> {
    eigen::check_symmetric(a, SYMMETRY_TOL)?;
    let eig = symmetric_eigen(a, true)?;
    let residual = max_residual(a, &eig).unwrap_or(0.0);
    let scale = eig
        .eigenvalues
        .iter()
        .fold(1.0f64, |acc, l| acc.max(l.abs()));
    if residual > 1e-8 * scale {
        return Err(Error::Contract(format!("eigen residual {residual:e} exceeds bound")));
    }
    Ok((EmpiricalSpectrum::from_eigenvalues(eig.eigenvalues)?, residual))
}

pub fn esd_cdf(spectrum: &EmpiricalSpectrum, x: f64) -> f64 {
    spectrum.cdf(x)
}

pub fn esd_quantile(spectrum: &EmpiricalSpectrum, q: f64) -> Result<f64> {
    spectrum.quantile(q)
}

pub fn ks_distance<F: Fn(f64) -> f64>(spectrum: &EmpiricalSpectrum, cdf: F) -> f64 {
    spectrum.ks_distance(cdf)
}

pub fn stieltjes_empirical(spectrum: &EmpiricalSpectrum, z: Complex64) -> Result<Complex64> {
    spectrum.stieltjes(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(v: &[f64]) -> EmpiricalSpectrum {
        EmpiricalSpectrum::from_eigenvalues(v.to_vec()).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        let s = symmetric_eigenvalues(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 1.0, 1.0]);
        let s = symmetric_eigenvalues(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        assert!((s.eigenvalues()[0] - 1.5).abs() < 1e-15 && (s.eigenvalues()[1] - 0.5).abs() < 1e-15);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        assert_eq!(symmetric_eigenvalues(&d).unwrap().eigenvalues(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(symmetric_eigenvalues(&a), Err(Error::Contract(_))));
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(spec(&[1.0, 1.0, 1.0]).cdf(1.0), 1.0);
        assert!((spec(&[3.0, 2.0, 1.0]).cdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(spec(&[3.0, 2.0, 1.0]).cdf(0.5), 0.0);
    }

    #[test]
    fn quantile_examples() {
        let s = spec(&[3.0, 2.0, 1.0]);
        assert_eq!(s.quantile(0.5).unwrap(), 2.0);
        assert_eq!(s.quantile(1e-9).unwrap(), 1.0);
        assert_eq!(s.quantile(0.999).unwrap(), 3.0);
        assert!(s.quantile(0.0).is_err());
        assert!(s.quantile(1.0).is_err());
        // q p exactly integral: 0.3 * 10 = 3.0000000000000004 in floating point
        let t = spec(&(1..=10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(t.quantile(0.3).unwrap(), 3.0);
    }

    #[test]
    fn ks_examples() {
        let s = spec(&[3.0, 2.0, 1.0]);
        assert_eq!(s.ks_distance(|x| s.cdf(x)), 0.0);
        let one = spec(&[1.0]);
        assert_eq!(one.ks_distance(|x| if x >= 1.0 { 1.0 } else { 0.0 }), 0.0);

        // brute force against uniform on [0, 4]: enumerate atoms and both one-sided limits
        let uniform = |x: f64| (x / 4.0).clamp(0.0, 1.0);
        let mut brute: f64 = 0.0;
        for (i, x) in [1.0, 2.0, 3.0].iter().enumerate() {
            brute = brute.max((i as f64 / 3.0 - uniform(*x)).abs());
            brute = brute.max(((i + 1) as f64 / 3.0 - uniform(*x)).abs());
        }
        assert!((s.ks_distance(uniform) - brute).abs() < 1e-15);
        assert!((brute - 0.25).abs() < 1e-15);
    }

    #[test]
    fn stieltjes_examples() {
        let z = Complex64::new(0.0, 1.0);
        let s = spec(&[0.0]).stieltjes(z).unwrap();
        assert!((s - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let s = spec(&[1.0, 1.0]).stieltjes(z).unwrap();
        assert!((s - Complex64::new(0.5, 0.5)).norm() < 1e-15);
        assert!(spec(&[1.0]).stieltjes(Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn residual_bound_on_random_symmetric_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for case in 0..100 {
            let p = 1 + (case * 3) % 300;
            let b = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            let a = (&b + b.transpose()) * 0.5;
            let (s, res) = symmetric_eigenvalues_verified(&a).unwrap();
            let norm = s.max().abs().max(s.min().abs()).max(1.0);
            assert!(res <= 1e-8 * norm, "p={p} residual {res}");
            // independent check of the trace
            assert!((s.eigenvalues().iter().sum::<f64>() - a.trace()).abs() < 1e-9 * p as f64);
        }
    }

    #[test]
    fn agrees_with_nalgebra_on_random_matrix() {
        let p = 60;
        let b = DMatrix::from_fn(p, p, |i, j| ((i * 31 + j * 17) % 23) as f64 / 7.0 - 1.5);
        let a = &b * b.transpose();
        let ours = symmetric_eigenvalues(&a).unwrap();
        let mut reference: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in ours.eigenvalues().iter().zip(&reference) {
            assert!((x - y).abs() < 1e-9 * reference[0].max(1.0));
        }
    }

    proptest! {
        #[test]
        fn ks_against_own_cdf_is_zero(values in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let s = EmpiricalSpectrum::from_eigenvalues(values).unwrap();
            prop_assert_eq!(s.ks_distance(|x| s.cdf(x)), 0.0);
        }

        #[test]
        fn quantile_is_generalized_inverse(values in proptest::collection::vec(-5.0f64..5.0, 1..40), q in 0.001f64..0.999) {
            let s = EmpiricalSpectrum::from_eigenvalues(values).unwrap();
            let x = s.quantile(q).unwrap();
            prop_assert!(s.cdf(x) >= q - 1e-9);
            prop_assert!(s.cdf(x.next_down()) < q);
        }

        #[test]
        fn stieltjes_maps_to_upper_half_plane(values in proptest::collection::vec(-5.0f64..5.0, 1..40), re in -6.0f64..6.0, im in 0.01f64..3.0) {
            let s = EmpiricalSpectrum::from_eigenvalues(values).unwrap();
            let z = Complex64::new(re, im);
            let v = s.stieltjes(z).unwrap();
            prop_assert!(v.im > 0.0);
            prop_assert!(v.norm() <= 1.0 / im + 1e-12);
        }
    }
}
