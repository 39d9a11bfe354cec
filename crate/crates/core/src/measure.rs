use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finitely supported probability measure, atoms sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure, sorting atoms. Weights must be nonnegative and sum to 1 within 1e-12.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() || atoms.is_empty() {
            return Err(Error::invalid("measure needs equally many atoms and weights, at least one"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("measure weights must be nonnegative and atoms finite"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("measure weights sum to {total}, expected 1")));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (atoms, weights) = pairs.into_iter().unzip();
        Ok(Self { atoms, weights })
    }

    pub fn point_mass(at: f64) -> Self {
        Self {
            atoms: vec![at],
            weights: vec![1.0],
        }
    }

    /// Uniform measure on `values`, merging values closer than `merge_tol`.
    pub fn uniform(values: &[f64], merge_tol: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty value list"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let w = 1.0 / sorted.len() as f64;
        let mut atoms: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        for v in sorted {
            match atoms.last() {
                Some(&last) if (v - last).abs() <= merge_tol => {
                    *counts.last_mut().unwrap() += 1;
                    *sums.last_mut().unwrap() += v;
                }
                _ => {
                    atoms.push(v);
                    counts.push(1);
                    sums.push(v);
                }
            }
        }
        let atoms = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        let weights = counts.iter().map(|&c| c as f64 * w).collect();
        Ok(Self { atoms, weights })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, w)| a * w).sum()
    }

    pub fn min(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    /// Weight placed at exactly zero (within 1e-12).
    pub fn mass_at_zero(&self) -> f64 {
        self.iter().filter(|(a, _)| a.abs() <= 1e-12).map(|(_, w)| w).sum()
    }
}
