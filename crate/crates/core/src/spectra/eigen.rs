//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by implicit-shift QL iteration (the EISPACK `tred2`/`tql2` pair).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigenvalues (ascending) and, optionally, orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<f64>>,
}

/// Largest entrywise asymmetry `max |A_ij - A_ji|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_symmetric(a: &DMatrix<f64>, tol: f64) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Contract(format!("matrix is {}x{}, expected square", a.nrows(), a.ncols())));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Contract("matrix has non-finite entries".into()));
    }
    let asym = asymmetry(a);
    if asym > tol {
        return Err(Error::Contract(format!("matrix is not symmetric: max |A - A^T| = {asym:e}")));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen(a: &DMatrix<f64>, want_vectors: bool) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n == 0 {
        return Ok(SymmetricEigen {
            eigenvalues: Vec::new(),
            eigenvectors: want_vectors.then(|| DMatrix::zeros(0, 0)),
        });
    }
    // Column-major working copy: v[c * n + r] holds V[r][c].
    let mut v: Vec<f64> = a.as_slice().to_vec();
    for c in 0..n {
        for r in 0..c {
            v[c * n + r] = v[r * n + c];
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e, want_vectors);
    tql2(n, &mut v, &mut d, &mut e, want_vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let eigenvectors = want_vectors.then(|| {
        DMatrix::from_fn(n, n, |r, c| v[order[c] * n + r])
    });
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let at = |r: usize, c: usize| c * n + r;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                let col = &v[at(0, j)..at(0, j) + n];
                for k in (j + 1)..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let base = at(0, j);
                for k in j..i {
                    v[base + k] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for (i, di) in d.iter_mut().enumerate() {
            *di = v[at(i, i)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..(n - 1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], vectors: bool) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let max_sweeps = 60 * n.max(1);
    let mut sweeps = 0usize;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::EigenNonConvergence { iterations: sweeps });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if vectors {
                        let (left, right) = v.split_at_mut((i + 1) * n);
                        let col_i = &mut left[i * n..];
                        let col_next = &mut right[..n];
                        for (vi, vn) in col_i.iter_mut().zip(col_next.iter_mut()) {
                            let hk = *vn;
                            *vn = s * *vi + c * hk;
                            *vi = c * *vi - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// `max_i ||A v_i - λ_i v_i||` over the returned eigenpairs.
pub fn max_residual(a: &DMatrix<f64>, eig: &SymmetricEigen) -> Option<f64> {
    let vecs = eig.eigenvectors.as_ref()?;
    let av = a * vecs;
    let mut worst: f64 = 0.0;
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        let r = (av.column(c) - vecs.column(c) * lambda).norm();
        worst = worst.max(r);
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_and_empty() {
        let e = symmetric_eigen(&DMatrix::from_element(1, 1, 3.5), true).unwrap();
        assert_eq!(e.eigenvalues, vec![3.5]);
        assert_eq!(e.eigenvectors.unwrap()[(0, 0)].abs(), 1.0);
        assert!(symmetric_eigen(&DMatrix::zeros(0, 0), false).unwrap().eigenvalues.is_empty());
    }

    #[test]
    fn two_by_two_analytic() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let e = symmetric_eigen(&a, true).unwrap();
        assert!((e.eigenvalues[0] - 0.5).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 1.5).abs() < 1e-15);
        let v = e.eigenvectors.unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[(0, 1)].abs() - h).abs() < 1e-15 && (v[(1, 1)].abs() - h).abs() < 1e-15);
        assert!(v[(0, 0)] * v[(1, 0)] < 0.0);
    }

    #[test]
    fn diagonal_and_zero_matrices() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0, 1.0]));
        assert_eq!(symmetric_eigen(&a, false).unwrap().eigenvalues, vec![1.0, 2.0, 3.0]);
        let z = DMatrix::zeros(4, 4);
        assert_eq!(symmetric_eigen(&z, true).unwrap().eigenvalues, vec![0.0; 4]);
    }

    #[test]
    fn values_only_matches_with_vectors() {
        let n = 37;
        let a = DMatrix::from_fn(n, n, |i, j| (((i * 7 + j * 3) % 11) as f64 + ((i + j) as f64).sin()) / 5.0);
        let a = &a + a.transpose();
        let with = symmetric_eigen(&a, true).unwrap();
        let without = symmetric_eigen(&a, false).unwrap();
        for (x, y) in with.eigenvalues.iter().zip(&without.eigenvalues) {
            assert!((x - y).abs() < 1e-11);
        }
        assert!(max_residual(&a, &with).unwrap() < 1e-11);
    }
}
