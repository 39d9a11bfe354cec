//! One realization of the data model: `X̃`, `X = U X̃`, `S = X Xᵀ / n`,
//! `R = M S M` with `M = diag(S)^{-1/2}`, and `Y = n^{-1/2} M X`.

use nalgebra::{DMatrix, DVector, Dyn, MatrixView, U1};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::population::PopulationModel;
use crate::rng::StreamKey;
use crate::spectra::{symmetric_eigen, symmetric_eigenvalues, EmpiricalSpectrum};

/// A borrowed row of `Y`.
pub type RowView<'a> = MatrixView<'a, f64, U1, Dyn, U1, Dyn>;

/// Rows whose norm is below this are rejected as degenerate.
pub const DEGENERATE_ROW_NORM: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct SampleEnsemble {
    p: usize,
    n: usize,
    xtilde: DMatrix<f64>,
    x: DMatrix<f64>,
    s: DMatrix<f64>,
    r: DMatrix<f64>,
    y: DMatrix<f64>,
    key: StreamKey,
}

/// Draws `X̃` column by column from the stream `key` and builds the ensemble.
pub fn generate(
    model: &PopulationModel,
    spec: &DistributionSpec,
    n: usize,
    key: impl Into<StreamKey>,
) -> Result<SampleEnsemble> {
    let key = key.into();
    if n < 2 {
        return Err(Error::invalid(format!("sample size n must be at least 2, got {n}")));
    }
    let p = model.p();
    let mut data = vec![0.0; p * n];
    spec.fill(&mut key.rng(), &mut data);
    let xtilde = DMatrix::from_vec(p, n, data);
    let x = if model.is_identity() {
        xtilde.clone()
    } else {
        model.u() * &xtilde
    };
    SampleEnsemble::from_data(xtilde, x, key)
}

impl SampleEnsemble {
    /// Builds `S`, `R` and `Y` from a given `X` (and the `X̃` it came from).
    pub fn from_data(xtilde: DMatrix<f64>, x: DMatrix<f64>, key: StreamKey) -> Result<Self> {
        let (p, n) = x.shape();
        if xtilde.shape() != (p, n) {
            return Err(Error::invalid("X and X̃ must have the same shape"));
        }
        if n < 2 || p == 0 {
            return Err(Error::invalid(format!("need p >= 1 and n >= 2, got {p}x{n}")));
        }
        let s = (&x * x.transpose()) / n as f64;
        let mut m = vec![0.0; p];
        for (k, mk) in m.iter_mut().enumerate() {
            let skk = s[(k, k)];
            if !((skk * n as f64).sqrt() >= DEGENERATE_ROW_NORM) || !skk.is_finite() {
                return Err(Error::DegenerateSample { row: k });
            }
            *mk = skk.sqrt().recip();
        }
        let r = DMatrix::from_fn(p, p, |i, j| m[i] * s[(i, j)] * m[j]);
        let scale = (n as f64).sqrt().recip();
        let y = DMatrix::from_fn(p, n, |k, j| scale * m[k] * x[(k, j)]);
        Ok(Self {
            p,
            n,
            xtilde,
            x,
            s,
            r,
            y,
            key,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn xtilde(&self) -> &DMatrix<f64> {
        &self.xtilde
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Eigenvalues of `R`.
    pub fn r_spectrum(&self) -> Result<EmpiricalSpectrum> {
        symmetric_eigenvalues(&self.r)
    }

    /// `Yᵀ Y` (n × n).
    pub fn companion(&self) -> DMatrix<f64> {
        self.y.transpose() * &self.y
    }

    /// `Σ_j Y_kj⁴` for each row `k`.
    pub fn row_fourth_moment_sums(&self) -> Vec<f64> {
        (0..self.p)
            .map(|k| self.y.row(k).iter().map(|v| v.powi(4)).sum())
            .collect()
    }

    /// Read-only split of `Y` into row `k` (zero-based) and the remaining rows.
    pub fn remove_row_view(&self, k: usize) -> Result<RowRemoval<'_>> {
        if k >= self.p {
            return Err(Error::IndexOutOfRange { index: k, len: self.p });
        }
        Ok(RowRemoval { ensemble: self, k })
    }
}

/// Row `k` of `Y` and the `(p-1) × n` remainder `Y₋ₖ`.
#[derive(Debug, Clone, Copy)]
pub struct RowRemoval<'a> {
    ensemble: &'a SampleEnsemble,
    k: usize,
}

impl<'a> RowRemoval<'a> {
    pub fn index(&self) -> usize {
        self.k
    }

    /// `ỹ_k` as a 1 × n view.
    pub fn row(&self) -> RowView<'a> {
        self.ensemble.y.row(self.k)
    }

    pub fn row_vector(&self) -> DVector<f64> {
        self.row().transpose()
    }

    /// Rows of `Y` other than `k`, in order.
    pub fn remainder_rows(&self) -> impl Iterator<Item = RowView<'a>> + 'a {
        let (y, k) = (&self.ensemble.y, self.k);
        (0..y.nrows()).filter(move |&i| i != k).map(move |i| y.row(i))
    }

    pub fn remainder(&self) -> DMatrix<f64> {
        self.ensemble.y.clone().remove_row(self.k)
    }

    /// `Y₋ₖ Y₋ₖᵀ`: `R` with row and column `k` removed.
    pub fn remainder_gram(&self) -> DMatrix<f64> {
        self.ensemble.r.clone().remove_row(self.k).remove_column(self.k)
    }

    /// `Y₋ₖᵀ Y₋ₖ = YᵀY − ỹₖᵀỹₖ` (n × n).
    pub fn remainder_companion(&self) -> DMatrix<f64> {
        let rem = self.remainder();
        rem.transpose() * rem
    }
}

/// Largest gap between matched (sorted) eigenvalues of `R = YYᵀ` and `YᵀY`,
/// including the extra zero eigenvalues of the larger matrix.
pub fn companion_eigen_check(ensemble: &SampleEnsemble) -> Result<f64> {
    let mut a = symmetric_eigen(ensemble.r(), false)?.eigenvalues;
    let mut b = symmetric_eigen(&ensemble.companion(), false)?.eigenvalues;
    a.reverse();
    b.reverse();
    let common = a.len().min(b.len());
    let matched = a.iter().zip(&b).take(common).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    let extra = a[common..]
        .iter()
        .chain(&b[common..])
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(matched.max(extra))
}
