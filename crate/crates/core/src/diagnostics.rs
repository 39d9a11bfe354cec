//! Resolvent quadratic forms, the master-equation residual, self-normalized
//! moment estimators and their Laplace-integral counterparts.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{laplace_profile, DistributionSpec, LaplaceMode, LaplaceProfile};
use crate::ensemble::{generate, SampleEnsemble};
use crate::error::{Error, Result};
use crate::population::PopulationModel;
use crate::quadrature::{integrate_half_line_multiscale, QuadOptions};
use crate::rng::StreamKey;
use crate::stats::{batch_mean, batched_statistic, ComplexEstimate, Estimate, DEFAULT_BATCHES};

/// Slack allowed on `|W_n| ≤ 2/Im z`.
pub const W_BOUND_SLACK: f64 = 1e-10;

fn check_upper(z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("z must lie in the upper half-plane, got {z}")))
    }
}

/// `W_n(z)` for one removed row together with its split into diagonal and
/// off-diagonal parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventDiagnostics {
    pub z: Complex64,
    pub w_n: Complex64,
    /// `Σ_i D_ii (Y_i² − 1/n)`.
    pub w_n1: Complex64,
    /// `Σ_{i≠j} Y_i D_ij Y_j`.
    pub w_n2: Complex64,
    pub trace_d_over_n: Complex64,
    /// `|W_n| ≤ 2/Im z`.
    pub bound_check: bool,
}

impl ResolventDiagnostics {
    /// `|W_n − W_n1 − W_n2|`.
    pub fn decomposition_error(&self) -> f64 {
        (self.w_n - self.w_n1 - self.w_n2).norm()
    }
}

/// `D(z) = (YᵀY − ỹ₁ᵀỹ₁ − zI)⁻¹` for the first row.
pub fn resolvent_d(ensemble: &SampleEnsemble, z: Complex64) -> Result<DMatrix<Complex64>> {
    resolvent_d_row(ensemble, 0, z)
}

/// `D(z)` with row `k` (zero-based) removed, by LU factorization of the shifted matrix.
pub fn resolvent_d_row(ensemble: &SampleEnsemble, k: usize, z: Complex64) -> Result<DMatrix<Complex64>> {
    check_upper(z)?;
    let rest = ensemble.remove_row_view(k)?.remainder_companion();
    let n = rest.nrows();
    let mut shifted: DMatrix<Complex64> = rest.map(|v| Complex64::new(v, 0.0));
    for i in 0..n {
        shifted[(i, i)] -= z;
    }
    shifted
        .try_inverse()
        .ok_or_else(|| Error::Contract(format!("shifted matrix singular at z = {z}")))
}

/// Diagnostics for the first row.
pub fn compute_w(ensemble: &SampleEnsemble, z: Complex64) -> Result<ResolventDiagnostics> {
    compute_w_row(ensemble, 0, z)
}

pub fn compute_w_row(ensemble: &SampleEnsemble, k: usize, z: Complex64) -> Result<ResolventDiagnostics> {
    let d = resolvent_d_row(ensemble, k, z)?;
    let y = ensemble.remove_row_view(k)?.row_vector();
    let n = ensemble.n();
    let inv_n = 1.0 / n as f64;
    let mut w_n1 = Complex64::new(0.0, 0.0);
    let mut w_n2 = Complex64::new(0.0, 0.0);
    let mut trace = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let dij = d[(i, j)];
            if i == j {
                w_n1 += dij * (y[i] * y[i] - inv_n);
                trace += dij;
            } else {
                w_n2 += dij * (y[i] * y[j]);
            }
        }
    }
    let quad: Complex64 = (0..n)
        .map(|j| y[j] * (0..n).map(|i| y[i] * d[(i, j)]).sum::<Complex64>())
        .sum();
    let trace_d_over_n = trace * inv_n;
    let w_n = quad - trace_d_over_n;
    Ok(ResolventDiagnostics {
        z,
        w_n,
        w_n1,
        w_n2,
        trace_d_over_n,
        bound_check: w_n.norm() <= 2.0 / z.im + W_BOUND_SLACK,
    })
}

/// Averages the diagnostics over a subset of removed rows.
pub fn compute_w_averaged(ensemble: &SampleEnsemble, rows: &[usize], z: Complex64) -> Result<ResolventDiagnostics> {
    if rows.is_empty() {
        return Err(Error::invalid("row subset must be non-empty"));
    }
    let all: Vec<ResolventDiagnostics> = rows
        .iter()
        .map(|&k| compute_w_row(ensemble, k, z))
        .collect::<Result<_>>()?;
    let m = all.len() as f64;
    let avg = |f: fn(&ResolventDiagnostics) -> Complex64| all.iter().map(f).sum::<Complex64>() / m;
    let w_n = avg(|d| d.w_n);
    Ok(ResolventDiagnostics {
        z,
        w_n,
        w_n1: avg(|d| d.w_n1),
        w_n2: avg(|d| d.w_n2),
        trace_d_over_n: avg(|d| d.trace_d_over_n),
        bound_check: all.iter().all(|d| d.bound_check),
    })
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < 2 {
        return Err(Error::invalid(format!("need at least 2 replicates, got {replicates}")));
    }
    Ok(())
}

/// Both sides of `−z E[s_n] = E[1/(1 + W_n + γ E[s_n] − (1 − γ)/z)]` and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterResidual {
    pub z: Complex64,
    pub p: usize,
    pub n: usize,
    pub replicates: usize,
    pub lhs: Complex64,
    pub rhs: Complex64,
    /// `lhs − rhs` with a batch standard error.
    pub residual: ComplexEstimate,
}

/// Replicate `r` uses the stream `key.with_replicate(r)`; replicates run in parallel.
pub fn master_equation_residual(
    model: &PopulationModel,
    spec: &DistributionSpec,
    n: usize,
    z: Complex64,
    replicates: usize,
    key: impl Into<StreamKey>,
) -> Result<MasterResidual> {
    if !model.is_identity() {
        return Err(Error::UnsupportedModel(
            "the master equation is stated for i.i.d. entries; use the identity model".into(),
        ));
    }
    check_upper(z)?;
    check_replicates(replicates)?;
    let key = key.into();
    let draws: Vec<(Complex64, Complex64)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let e = generate(model, spec, n, key.with_replicate(r as u32))?;
            let s = e.r_spectrum()?.stieltjes(z)?;
            let w = compute_w(&e, z)?.w_n;
            Ok((s, w))
        })
        .collect::<Result<_>>()?;
    Ok(master_residual_from_draws(z, model.p(), n, &draws))
}

/// Master-equation residual from per-replicate `(s_n(z), W_n(z))` pairs.
pub fn master_residual_from_draws(z: Complex64, p: usize, n: usize, draws: &[(Complex64, Complex64)]) -> MasterResidual {
    let gamma = p as f64 / n as f64;
    let sides = |items: &[(Complex64, Complex64)]| {
        let m = items.len() as f64;
        let mean_s = items.iter().map(|x| x.0).sum::<Complex64>() / m;
        let lhs = -z * mean_s;
        let rhs = items
            .iter()
            .map(|&(_, w)| (1.0 + w + gamma * mean_s - (1.0 - gamma) / z).inv())
            .sum::<Complex64>()
            / m;
        (lhs, rhs)
    };
    let (lhs, rhs) = sides(draws);
    let residual = batched_statistic(draws, DEFAULT_BATCHES, |items| {
        let (l, r) = sides(items);
        l - r
    });
    MasterResidual {
        z,
        p,
        n,
        replicates: draws.len(),
        lhs,
        rhs,
        residual,
    }
}

/// Replicate-mean estimates of the self-normalized moments.
///
/// Rows with the same `U`-row pattern are pooled; `n_e_y4` and `n_e_y1y2`
/// refer to the class of the first row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: usize,
    pub n: usize,
    /// `n E[Y₁₁⁴]`.
    pub n_e_y4: Estimate,
    /// `n E[Y₁₁ Y₁₂]`.
    pub n_e_y1y2: Estimate,
    /// `max_k n |E[Y_k1]|`, with the standard error of the maximizing row class.
    pub n_max_first_moment: Estimate,
    /// `Σ_{i,k} E[Y_k1² Y_i1²]`.
    pub mixed_second_sum: Estimate,
    pub replicates: usize,
}

struct ReplicateMoments {
    first: Vec<f64>,
    fourth: f64,
    cross: f64,
    mixed: f64,
}

fn replicate_moments(e: &SampleEnsemble, classes: &[Vec<usize>], first_class: usize) -> ReplicateMoments {
    let (p, n) = (e.p(), e.n());
    let y = e.y();
    let row_sum: Vec<f64> = (0..p).map(|k| y.row(k).sum()).collect();
    let class_mean = |c: &[usize], f: &dyn Fn(usize) -> f64| c.iter().map(|&k| f(k)).sum::<f64>() / c.len() as f64;
    let first = classes.iter().map(|c| class_mean(c, &|k| row_sum[k])).collect();
    let target = &classes[first_class];
    let fourth = class_mean(target, &|k| y.row(k).iter().map(|v| v.powi(4)).sum());
    let cross = class_mean(target, &|k| (row_sum[k] * row_sum[k] - 1.0) / (n as f64 - 1.0));
    let mixed = (0..n)
        .map(|j| y.column(j).iter().map(|v| v * v).sum::<f64>().powi(2))
        .sum::<f64>()
        / n as f64;
    ReplicateMoments {
        first,
        fourth,
        cross,
        mixed,
    }
}

/// Replicate `r` uses the stream `key.with_replicate(r)`; replicates run in parallel.
pub fn moment_estimates(
    model: &PopulationModel,
    spec: &DistributionSpec,
    n: usize,
    replicates: usize,
    key: impl Into<StreamKey>,
) -> Result<MomentReport> {
    check_replicates(replicates)?;
    let key = key.into();
    let classes = model.row_classes();
    let first_class = classes.iter().position(|c| c.contains(&0)).expect("row 0 has a class");
    let reps: Vec<ReplicateMoments> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let e = generate(model, spec, n, key.with_replicate(r as u32))?;
            Ok(replicate_moments(&e, &classes, first_class))
        })
        .collect::<Result<_>>()?;
    let collect = |f: &dyn Fn(&ReplicateMoments) -> f64| batch_mean(&reps.iter().map(f).collect::<Vec<_>>(), DEFAULT_BATCHES);
    let n_max_first_moment = (0..classes.len())
        .map(|c| {
            let est = collect(&|r| r.first[c]);
            Estimate {
                value: est.value.abs(),
                std_error: est.std_error,
            }
        })
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one class");
    Ok(MomentReport {
        p: model.p(),
        n,
        n_e_y4: collect(&|r| r.fourth),
        n_e_y1y2: collect(&|r| r.cross),
        n_max_first_moment,
        mixed_second_sum: collect(&|r| r.mixed),
        replicates,
    })
}

/// Result of a Laplace-integral moment evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceMoment {
    pub value: f64,
    /// Quadrature error bound, or the Monte Carlo standard error.
    pub abs_error: f64,
    pub mode: LaplaceMode,
    pub warning: Option<String>,
}

// Dyadic split points 2^-40 … 2^20 cover peaks down to the 1/n² scale of heavy tails.
const SCALE_LO: i32 = -40;
const SCALE_HI: i32 = 20;

fn laplace_integral<F>(profile: &LaplaceProfile, integrand: F) -> Result<LaplaceMoment>
where
    F: Fn(&LaplaceProfile, f64) -> Result<f64>,
{
    let run = |prof: &LaplaceProfile| -> Result<(f64, f64)> {
        let mut failure = None;
        let r = integrate_half_line_multiscale(
            |t| match integrand(prof, t) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            SCALE_LO,
            SCALE_HI,
            QuadOptions {
                abs_tol: 1e-13,
                rel_tol: 1e-11,
                max_intervals: 400,
            },
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((r.value, r.abs_error))
    };
    let (value, abs_error) = run(profile)?;
    if profile.mode() != LaplaceMode::MonteCarlo {
        return Ok(LaplaceMoment {
            value,
            abs_error,
            mode: profile.mode(),
            warning: None,
        });
    }
    let per: Vec<f64> = profile
        .monte_carlo_batches(DEFAULT_BATCHES)
        .iter()
        .map(|b| run(b).map(|r| r.0))
        .collect::<Result<_>>()?;
    let std_error = batch_mean(&per, per.len()).std_error;
    Ok(LaplaceMoment {
        value,
        abs_error: std_error,
        mode: LaplaceMode::MonteCarlo,
        warning: Some(format!(
            "Monte Carlo Laplace profile: precision limited to standard error {std_error:.3e}"
        )),
    })
}

/// `E[Y₁₁⁴] = ∫₀^∞ t φ(t)^{n−1} φ''(t) dt` for i.i.d. entries.
pub fn laplace_fourth_moment(spec: &DistributionSpec, n: usize) -> Result<LaplaceMoment> {
    laplace_fourth_moment_with(&laplace_profile(spec), n)
}

pub fn laplace_fourth_moment_with(profile: &LaplaceProfile, n: usize) -> Result<LaplaceMoment> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    laplace_integral(profile, |prof, t| {
        let phi = prof.phi(t)?.value;
        let d2 = prof.phi_d2(t)?.value;
        Ok(t * phi.powi(n as i32 - 1) * d2)
    })
}

/// `E[Y₁₁ Y₁₂] = ∫₀^∞ ψ(s)² φ(s)^{n−2} ds` for i.i.d. entries.
pub fn laplace_cross_moment(spec: &DistributionSpec, n: usize) -> Result<LaplaceMoment> {
    laplace_cross_moment_with(&laplace_profile(spec), n)
}

pub fn laplace_cross_moment_with(profile: &LaplaceProfile, n: usize) -> Result<LaplaceMoment> {
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    if profile.spec().is_symmetric() && profile.mode() != LaplaceMode::MonteCarlo {
        return Ok(LaplaceMoment {
            value: 0.0,
            abs_error: 0.0,
            mode: profile.mode(),
            warning: None,
        });
    }
    let mut m = laplace_integral(profile, |prof, s| {
        let psi = prof.psi(s)?.value;
        Ok(psi * psi * prof.phi(s)?.value.powi(n as i32 - 2))
    })?;
    m.value = m.value.max(0.0);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{build_banded_toeplitz, build_from_sparse_root, build_identity};

    fn ens(p: usize, n: usize, seed: u64) -> SampleEnsemble {
        generate(&build_identity(p).unwrap(), &DistributionSpec::gaussian(), n, seed).unwrap()
    }

    fn op_norm(m: &DMatrix<Complex64>) -> f64 {
        // largest singular value via the Hermitian Gram matrix
        let g = m.adjoint() * m;
        let herm = g.map(|c| c.re);
        // g is Hermitian with (generally) nonzero imaginary parts; bound via Frobenius of g is too loose,
        // so use power iteration on g directly
        let n = g.nrows();
        let _ = herm;
        let mut v = nalgebra::DVector::<Complex64>::from_element(n, Complex64::new(1.0, 0.0));
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = &g * &v;
            lambda = w.norm();
            v = w / Complex64::new(lambda, 0.0);
        }
        lambda.sqrt()
    }

    #[test]
    fn p_equal_one_gives_scaled_identity() {
        let e = ens(1, 6, 3);
        let z = Complex64::i();
        let d = resolvent_d(&e, z).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { Complex64::i() } else { Complex64::new(0.0, 0.0) };
                assert!((d[(i, j)] - want).norm() < 1e-15);
            }
        }
        let w = compute_w(&e, z).unwrap();
        assert!(w.w_n.norm() < 1e-14);
    }

    #[test]
    fn resolvent_is_an_inverse_with_bounded_norm() {
        let e = ens(30, 40, 5);
        for im in [0.5, 1.0, 2.0] {
            let z = Complex64::new(0.7, im);
            let d = resolvent_d(&e, z).unwrap();
            let a = e.remove_row_view(0).unwrap().remainder_companion().map(|v| Complex64::new(v, 0.0))
                - DMatrix::<Complex64>::identity(40, 40) * z;
            let prod = &d * a;
            let err = (prod - DMatrix::<Complex64>::identity(40, 40)).iter().fold(0.0f64, |m, c| m.max(c.norm()));
            assert!(err < 1e-8);
            assert!(op_norm(&d) <= 1.0 / im + 1e-8);
        }
        assert!(resolvent_d(&e, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn w_decomposition_and_bound() {
        let specs = [DistributionSpec::gaussian(), DistributionSpec::student_t(3.0).unwrap(), DistributionSpec::centered_exponential()];
        let models = [
            build_identity(20).unwrap(),
            build_banded_toeplitz(20, &[0.5, 0.25]).unwrap(),
            build_from_sparse_root(20, &[0.5]).unwrap(),
        ];
        for (i, m) in models.iter().enumerate() {
            for (j, s) in specs.iter().enumerate() {
                for n in [15, 30] {
                    let e = generate(m, s, n, (i * 10 + j) as u64).unwrap();
                    for im in [0.5, 1.0, 2.0] {
                        let w = compute_w(&e, Complex64::new(0.3, im)).unwrap();
                        assert!(w.decomposition_error() <= 1e-10);
                        assert!(w.bound_check);
                    }
                }
            }
        }
    }

    #[test]
    fn averaged_w_matches_single_row() {
        let e = ens(10, 20, 8);
        let z = Complex64::i();
        let a = compute_w_averaged(&e, &[2], z).unwrap();
        assert_eq!(a.w_n, compute_w_row(&e, 2, z).unwrap().w_n);
        let b = compute_w_averaged(&e, &[0, 1, 2], z).unwrap();
        assert!(b.decomposition_error() < 1e-10);
        assert!(compute_w_averaged(&e, &[], z).is_err());
    }

    #[test]
    fn master_residual_rejects_dependent_models() {
        let m = build_banded_toeplitz(10, &[0.3]).unwrap();
        let r = master_equation_residual(&m, &DistributionSpec::gaussian(), 20, Complex64::i(), 4, 1);
        assert!(matches!(r, Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn master_residual_small_and_deterministic() {
        let m = build_identity(40).unwrap();
        let a = master_equation_residual(&m, &DistributionSpec::gaussian(), 80, Complex64::i(), 40, 9).unwrap();
        let b = master_equation_residual(&m, &DistributionSpec::gaussian(), 80, Complex64::i(), 40, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.residual.value.norm() < 0.1, "{:?}", a.residual);
    }

    #[test]
    fn moment_estimates_gaussian() {
        let m = build_identity(20).unwrap();
        let n = 50;
        let r = moment_estimates(&m, &DistributionSpec::gaussian(), n, 200, 4).unwrap();
        assert!(r.n_e_y4.within(3.0 / (n as f64 + 2.0), 3.0), "{:?}", r.n_e_y4);
        assert!(r.n_e_y1y2.within(0.0, 3.0), "{:?}", r.n_e_y1y2);
        assert!((0.0..=1.0).contains(&r.n_e_y4.value));
        assert!(moment_estimates(&m, &DistributionSpec::gaussian(), n, 1, 4).is_err());
    }

    #[test]
    fn mixed_second_sum_bounded_for_banded() {
        let m = build_banded_toeplitz(50, &[0.5, 0.25]).unwrap();
        let r = moment_estimates(&m, &DistributionSpec::gaussian(), 100, 20, 6).unwrap();
        assert!(r.mixed_second_sum.value <= 5.0);
        assert!(r.mixed_second_sum.value >= 0.2);
    }

    #[test]
    fn laplace_fourth_gaussian_closed_form() {
        for n in [4usize, 50, 256] {
            let m = laplace_fourth_moment(&DistributionSpec::gaussian(), n).unwrap();
            let want = 3.0 / (n as f64 * (n as f64 + 2.0));
            assert!((m.value - want).abs() < 1e-10, "n {n}: {} vs {want}", m.value);
            assert!(m.abs_error <= 1e-10);
            assert!(m.warning.is_none());
        }
    }

    #[test]
    fn laplace_fourth_quadrature_profile_agrees() {
        let prof = LaplaceProfile::quadrature(&DistributionSpec::gaussian());
        let m = laplace_fourth_moment_with(&prof, 50).unwrap();
        assert!((m.value - 3.0 / 2600.0).abs() < 1e-9);
    }

    #[test]
    fn laplace_fourth_in_range() {
        let specs = [
            DistributionSpec::student_t(3.0).unwrap(),
            DistributionSpec::symmetrized_pareto(1.5).unwrap(),
            DistributionSpec::centered_exponential(),
        ];
        for s in specs {
            for n in [4usize, 64] {
                let v = laplace_fourth_moment(&s, n).unwrap().value;
                assert!(v > 0.0 && v <= 1.0 / n as f64 + 1e-12, "{} n {n}: {v}", s.label());
            }
        }
    }

    #[test]
    fn laplace_cross_moment_behaviour() {
        assert_eq!(laplace_cross_moment(&DistributionSpec::gaussian(), 10).unwrap().value, 0.0);
        let cexp = DistributionSpec::centered_exponential();
        let a = laplace_cross_moment(&cexp, 100).unwrap().value;
        let b = laplace_cross_moment(&cexp, 400).unwrap().value;
        assert!(a > 0.0 && b > 0.0);
        assert!(400.0 * b < 100.0 * a);
    }

    #[test]
    fn laplace_cross_matches_simulation() {
        let cexp = DistributionSpec::centered_exponential();
        let n = 20;
        let m = laplace_cross_moment(&cexp, n).unwrap();
        let r = moment_estimates(&build_identity(20).unwrap(), &cexp, n, 400, 13).unwrap();
        assert!(r.n_e_y1y2.within(n as f64 * m.value, 3.0), "{:?} vs {}", r.n_e_y1y2, n as f64 * m.value);
    }

    #[test]
    fn laplace_monte_carlo_mode_warns() {
        let prof = LaplaceProfile::monte_carlo(&DistributionSpec::gaussian(), 20_000, 3).unwrap();
        let m = laplace_fourth_moment_with(&prof, 10).unwrap();
        assert_eq!(m.mode, LaplaceMode::MonteCarlo);
        assert!(m.warning.is_some());
        assert!(m.abs_error > 0.0);
        assert!((m.value - 3.0 / 120.0).abs() <= 4.0 * m.abs_error + 1e-4);
    }
}
