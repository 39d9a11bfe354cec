//! Population correlation matrices `T`, square-root factors `U` with
//! `U Uᵀ = T`, and the sparsity index sets `I(i)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::spectra::{check_symmetric, symmetric_eigen};

/// Entries of `U` with magnitude at or below this count as zero for `I(i)`.
pub const ZERO_THRESHOLD: f64 = 1e-12;
/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as rounding and clamped to zero.
pub const PSD_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    Identity,
    GivenT,
    GivenU,
}

/// Serializable description of a population model; `p` is supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Identity,
    /// Banded Toeplitz `T` with `coeffs[d-1]` on the `d`-th sub/superdiagonals.
    BandedToeplitz { coeffs: Vec<f64> },
    /// Banded symmetric Toeplitz `U` (unit diagonal), `T = U Uᵀ`.
    SparseRoot { root_coeffs: Vec<f64> },
}

impl ModelSpec {
    pub fn build(&self, p: usize) -> Result<PopulationModel> {
        match self {
            ModelSpec::Identity => build_identity(p),
            ModelSpec::BandedToeplitz { coeffs } => build_banded_toeplitz(p, coeffs),
            ModelSpec::SparseRoot { root_coeffs } => build_from_sparse_root(p, root_coeffs),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            ModelSpec::Identity => true,
            ModelSpec::BandedToeplitz { coeffs } => coeffs.iter().all(|&c| c == 0.0),
            ModelSpec::SparseRoot { root_coeffs } => root_coeffs.iter().all(|&c| c == 0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PopulationModel {
    p: usize,
    mode: ModelMode,
    t: DMatrix<f64>,
    u: DMatrix<f64>,
    /// Correlation matrix actually generating the data: `D T D`, `D = diag(T)^{-1/2}`.
    t_hat: DMatrix<f64>,
    /// Eigenvalues of `t_hat`, ascending.
    t_hat_eigenvalues: Vec<f64>,
    index_sets: Vec<Vec<usize>>,
}

impl PopulationModel {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mode(&self) -> ModelMode {
        self.mode
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn t_hat(&self) -> &DMatrix<f64> {
        &self.t_hat
    }

    pub fn is_identity(&self) -> bool {
        self.mode == ModelMode::Identity
    }

    /// `I(i) = {k : U_ik ≠ 0 or U_ki ≠ 0}`, zero-based.
    pub fn index_sets(&self) -> &[Vec<usize>] {
        &self.index_sets
    }

    pub fn max_index_set_size(&self) -> usize {
        self.index_sets.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Rows `k` grouped so that `X_k = Σ_l U_kl X̃_l` has the same law within a group:
    /// rows with the same multiset of nonzero coefficients.
    pub fn row_classes(&self) -> Vec<Vec<usize>> {
        let mut keys: Vec<(Vec<i64>, Vec<usize>)> = Vec::new();
        for k in 0..self.p {
            let mut coeffs: Vec<i64> = self
                .u
                .row(k)
                .iter()
                .filter(|v| v.abs() > ZERO_THRESHOLD)
                .map(|v| (v * 1e9).round() as i64)
                .collect();
            coeffs.sort_unstable();
            match keys.iter_mut().find(|(key, _)| *key == coeffs) {
                Some((_, rows)) => rows.push(k),
                None => keys.push((coeffs, vec![k])),
            }
        }
        keys.into_iter().map(|(_, rows)| rows).collect()
    }
}

pub fn build_identity(p: usize) -> Result<PopulationModel> {
    if p == 0 {
        return Err(Error::invalid("dimension p must be at least 1"));
    }
    let eye = DMatrix::identity(p, p);
    Ok(PopulationModel {
        p,
        mode: ModelMode::Identity,
        t: eye.clone(),
        u: eye.clone(),
        t_hat: eye,
        t_hat_eigenvalues: vec![1.0; p],
        index_sets: (0..p).map(|i| vec![i]).collect(),
    })
}

fn banded_toeplitz(p: usize, coeffs: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        let d = i.abs_diff(j);
        if d == 0 {
            1.0
        } else {
            coeffs.get(d - 1).copied().unwrap_or(0.0)
        }
    })
}

fn index_sets_of(u: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let p = u.nrows();
    (0..p)
        .map(|i| {
            (0..p)
                .filter(|&k| u[(i, k)].abs() > ZERO_THRESHOLD || u[(k, i)].abs() > ZERO_THRESHOLD)
                .collect()
        })
        .collect()
}

/// `T_ij = 1` on the diagonal and `coeffs[d-1]` where `|i - j| = d`.
pub fn build_banded_toeplitz(p: usize, coeffs: &[f64]) -> Result<PopulationModel> {
    if p == 0 {
        return Err(Error::invalid("dimension p must be at least 1"));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("Toeplitz coefficients must be finite"));
    }
    if coeffs.iter().all(|&c| c == 0.0) {
        return build_identity(p);
    }
    let t = banded_toeplitz(p, coeffs);
    let eig = symmetric_eigen(&t, true)?;
    let min = eig.eigenvalues[0];
    if min < -PSD_CLAMP {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let u = sqrt_from_eigen(&eig);
    let index_sets = index_sets_of(&u);
    Ok(PopulationModel {
        p,
        mode: ModelMode::GivenT,
        t_hat: t.clone(),
        t,
        u,
        t_hat_eigenvalues: eig.eigenvalues,
        index_sets,
    })
}

/// `U` banded symmetric Toeplitz with unit diagonal and `root_coeffs` off the
/// diagonal; `T = U Uᵀ`. The data are generated from `U`, so `I(i)` is the band.
pub fn build_from_sparse_root(p: usize, root_coeffs: &[f64]) -> Result<PopulationModel> {
    if p == 0 {
        return Err(Error::invalid("dimension p must be at least 1"));
    }
    if root_coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("root coefficients must be finite"));
    }
    if root_coeffs.iter().all(|&c| c == 0.0) {
        return build_identity(p);
    }
    if root_coeffs.len() >= p {
        return Err(Error::invalid(format!(
            "bandwidth {} must be smaller than p = {p}",
            root_coeffs.len()
        )));
    }
    let u = banded_toeplitz(p, root_coeffs);
    let t = &u * u.transpose();
    let d: Vec<f64> = t.diagonal().iter().map(|v| v.sqrt().recip()).collect();
    let mut t_hat = DMatrix::from_fn(p, p, |i, j| t[(i, j)] * d[i] * d[j]);
    for i in 0..p {
        t_hat[(i, i)] = 1.0;
    }
    let eig = symmetric_eigen(&t_hat, false)?;
    let min = eig.eigenvalues[0];
    if min <= PSD_CLAMP {
        return Err(Error::invalid(format!(
            "root coefficients give a degenerate T (smallest eigenvalue {min:e})"
        )));
    }
    let index_sets = index_sets_of(&u);
    Ok(PopulationModel {
        p,
        mode: ModelMode::GivenU,
        t,
        u,
        t_hat,
        t_hat_eigenvalues: eig.eigenvalues,
        index_sets,
    })
}

fn sqrt_from_eigen(eig: &crate::spectra::SymmetricEigen) -> DMatrix<f64> {
    let v = eig.eigenvectors.as_ref().expect("eigenvectors requested");
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * roots[c]);
    let u = &scaled * v.transpose();
    (&u + u.transpose()) * 0.5
}

/// Symmetric `U` with `U U = T`, via the eigendecomposition of `T`.
pub fn hermitian_sqrt(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(t, 1e-12)?;
    let eig = symmetric_eigen(t, true)?;
    if let Some(&min) = eig.eigenvalues.first() {
        if min < -PSD_CLAMP {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(sqrt_from_eigen(&eig))
}

/// Finite-n diagnostics for the population assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub p: usize,
    pub gamma: f64,
    pub mode: ModelMode,
    /// Smallest eigenvalue of the data-generating correlation matrix.
    pub lambda_min_t: f64,
    /// Its eigenvalues, ascending.
    pub esd_t_summary: Vec<f64>,
    pub max_index_set_size: usize,
    /// Whether the supplied `T` itself has unit diagonal (false for rescaled `given_u` models).
    pub unit_diagonal_ok: bool,
    pub psd_ok: bool,
}

pub fn validate_assumptions(model: &PopulationModel, gamma: f64) -> AssumptionReport {
    let esd = model.t_hat_eigenvalues.clone();
    let unit_diagonal_ok = model.t.diagonal().iter().all(|d| (d - 1.0).abs() <= 1e-12);
    AssumptionReport {
        p: model.p,
        gamma,
        mode: model.mode,
        lambda_min_t: esd[0],
        psd_ok: esd[0] >= -PSD_CLAMP,
        esd_t_summary: esd,
        max_index_set_size: model.max_index_set_size(),
        unit_diagonal_ok,
    }
}

/// Uniform measure on the eigenvalues of the data-generating correlation matrix
/// (equal eigenvalues merged).
pub fn esd_of_t(model: &PopulationModel) -> DiscreteMeasure {
    DiscreteMeasure::uniform(&model.t_hat_eigenvalues, 1e-12).expect("p >= 1")
}
