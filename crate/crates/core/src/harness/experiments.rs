//! The experiment kinds behind the CLI subcommands.
//!
//! Randomness: the `(size i, distribution d)` cell uses experiment index
//! `i * distributions.len() + d` and replicate `r` the stream
//! `StreamKey::new(seed, index, r)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Size};
use super::output::{num, Artifact};
use crate::diagnostics::{
    compute_w, laplace_cross_moment, laplace_fourth_moment, master_residual_from_draws, moment_estimates,
    LaplaceMoment, MomentReport, ResolventDiagnostics,
};
use crate::distributions::DistributionSpec;
use crate::ensemble::generate;
use crate::error::Result;
use crate::limit_laws::{default_grid, lsd_density_on_grid, lsd_quantiles, LsdSolution, MpLaw};
use crate::population::{esd_of_t, validate_assumptions, PopulationModel};
use crate::rng::StreamKey;
use crate::spectra::EmpiricalSpectrum;
use crate::stats::{batch_mean, Estimate, DEFAULT_BATCHES};

/// Description recorded in manifests.
pub const STREAM_DERIVATION: &str =
    "ChaCha12 seeded from `seed`, stream = (size_index * distributions + distribution_index) << 32 | replicate";

fn cell_key(config: &ExperimentConfig, size_index: usize, dist_index: usize) -> StreamKey {
    let index = size_index * config.distributions.len() + dist_index;
    StreamKey::new(config.seed, index as u32, 0)
}

/// ESD of `R` for each replicate, in replicate order.
pub fn replicate_spectra(
    model: &PopulationModel,
    spec: &DistributionSpec,
    n: usize,
    replicates: usize,
    key: StreamKey,
) -> Result<Vec<EmpiricalSpectrum>> {
    (0..replicates)
        .into_par_iter()
        .map(|r| generate(model, spec, n, key.with_replicate(r as u32))?.r_spectrum())
        .collect()
}

/// Generalized law for `H = esd_of_t(model)` and `γ = p/n` on the default grid.
pub fn lsd_reference(config: &ExperimentConfig, model: &PopulationModel, size: Size) -> Result<LsdSolution> {
    let h = esd_of_t(model);
    let t = &config.tolerances;
    let grid = default_grid(size.gamma(), &h, t.grid_points);
    lsd_density_on_grid(size.gamma(), &h, &grid, t.epsilon, &t.solver())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQRow {
    pub q: f64,
    pub mean_a: f64,
    pub se_a: f64,
    pub mean_b: f64,
    pub se_b: f64,
    /// `|mean_a − mean_b|`.
    pub gap: f64,
    /// Quantile of the generalized limit law.
    pub lsd: f64,
}

impl QQRow {
    pub fn joint_se(&self) -> f64 {
        self.se_a.hypot(self.se_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQSizeReport {
    pub p: usize,
    pub n: usize,
    pub dist_a: String,
    pub dist_b: String,
    pub rows: Vec<QQRow>,
    pub max_gap: f64,
}

impl QQSizeReport {
    /// Largest gap over levels `q <= q_max`.
    pub fn max_gap_up_to(&self, q_max: f64) -> f64 {
        self.rows.iter().filter(|r| r.q <= q_max).fold(0.0, |m, r| m.max(r.gap))
    }

    pub fn row_at(&self, q: f64) -> Option<&QQRow> {
        self.rows.iter().find(|r| (r.q - q).abs() < 1e-12)
    }
}

/// Mean simulated quantiles of the ESD of `R` under two entry laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQReport {
    pub seed: u64,
    pub replicates: usize,
    pub sizes: Vec<QQSizeReport>,
}

fn mean_quantiles(spectra: &[EmpiricalSpectrum], q_list: &[f64]) -> Result<Vec<Estimate>> {
    q_list
        .iter()
        .map(|&q| {
            let vals = spectra.iter().map(|s| s.quantile(q)).collect::<Result<Vec<_>>>()?;
            Ok(batch_mean(&vals, DEFAULT_BATCHES))
        })
        .collect()
}

/// Runs the two-distribution quantile comparison for every configured size.
pub fn qq_experiment(config: &ExperimentConfig) -> Result<QQReport> {
    config.validate()?;
    let models = config.models()?;
    qq_with_models(config, &models)
}

fn qq_with_models(config: &ExperimentConfig, models: &[PopulationModel]) -> Result<QQReport> {
    let (a, b) = (&config.distributions[0], &config.distributions[1]);
    let mut sizes = Vec::with_capacity(config.sizes.len());
    for (i, (size, model)) in config.sizes.iter().zip(models).enumerate() {
        let spec_a = replicate_spectra(model, a, size.n, config.replicates, cell_key(config, i, 0))?;
        let spec_b = replicate_spectra(model, b, size.n, config.replicates, cell_key(config, i, 1))?;
        let qa = mean_quantiles(&spec_a, &config.q_list)?;
        let qb = mean_quantiles(&spec_b, &config.q_list)?;
        let lsd = lsd_quantiles(&lsd_reference(config, model, *size)?, &config.q_list)?;
        let rows: Vec<QQRow> = config
            .q_list
            .iter()
            .enumerate()
            .map(|(k, &q)| QQRow {
                q,
                mean_a: qa[k].value,
                se_a: qa[k].std_error,
                mean_b: qb[k].value,
                se_b: qb[k].std_error,
                gap: (qa[k].value - qb[k].value).abs(),
                lsd: lsd[k],
            })
            .collect();
        let max_gap = rows.iter().fold(0.0, |m: f64, r| m.max(r.gap));
        sizes.push(QQSizeReport {
            p: size.p,
            n: size.n,
            dist_a: a.label(),
            dist_b: b.label(),
            rows,
            max_gap,
        });
    }
    Ok(QQReport {
        seed: config.seed,
        replicates: config.replicates,
        sizes,
    })
}

pub(crate) fn qq_artifacts(config: &ExperimentConfig, models: &[PopulationModel]) -> Result<(Vec<Artifact>, QQReport)> {
    let report = qq_with_models(config, models)?;
    let mut out = Vec::new();
    for s in &report.sizes {
        let name = format!("qq_{}x{}_{}_vs_{}.csv", s.p, s.n, s.dist_a, s.dist_b);
        out.push(Artifact::csv(
            name,
            &["q", "mean_a", "se_a", "mean_b", "se_b", "gap", "lsd"],
            s.rows.iter().map(|r| [r.q, r.mean_a, r.se_a, r.mean_b, r.se_b, r.gap, r.lsd].map(num)),
        )?);
    }
    out.push(Artifact::json("qq_report.json", &report)?);
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SimulateSummary {
    p: usize,
    n: usize,
    gamma: f64,
    distribution: String,
    replicates: usize,
    reference: String,
    ks_to_reference: Estimate,
    max_eigenvalue: Estimate,
    min_eigenvalue: Estimate,
}

pub(crate) fn simulate(config: &ExperimentConfig, models: &[PopulationModel]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    for (i, (size, model)) in config.sizes.iter().zip(models).enumerate() {
        let mp = MpLaw::new(size.gamma())?;
        let lsd = if model.is_identity() {
            None
        } else {
            Some(lsd_reference(config, model, *size)?)
        };
        for (d, spec) in config.distributions.iter().enumerate() {
            let spectra = replicate_spectra(model, spec, size.n, config.replicates, cell_key(config, i, d))?;
            let ks: Vec<f64> = match &lsd {
                None => spectra.iter().map(|s| s.ks_distance(|x| mp.cdf(x))).collect(),
                Some(sol) => {
                    let cdf = sol.cdf_fn();
                    spectra.iter().map(|s| s.ks_distance(&cdf)).collect()
                }
            };
            let stem = format!("simulate_{}_{}", size.label(), spec.label());
            out.push(Artifact::csv(
                format!("{stem}.csv"),
                &["replicate", "index", "eigenvalue"],
                spectra.iter().enumerate().flat_map(|(r, s)| {
                    s.eigenvalues()
                        .iter()
                        .enumerate()
                        .map(move |(k, &v)| vec![r.to_string(), k.to_string(), num(v)])
                }),
            )?);
            let summary = SimulateSummary {
                p: size.p,
                n: size.n,
                gamma: size.gamma(),
                distribution: spec.label(),
                replicates: config.replicates,
                reference: if lsd.is_none() { "marchenko_pastur" } else { "generalized" }.into(),
                ks_to_reference: batch_mean(&ks, DEFAULT_BATCHES),
                max_eigenvalue: batch_mean(&spectra.iter().map(|s| s.max()).collect::<Vec<_>>(), DEFAULT_BATCHES),
                min_eigenvalue: batch_mean(&spectra.iter().map(|s| s.min()).collect::<Vec<_>>(), DEFAULT_BATCHES),
            };
            out.push(Artifact::json(format!("{stem}.json"), &summary)?);
        }
    }
    Ok(out)
}

fn law_tables(
    stem: &str,
    grid: &[f64],
    density: &[f64],
    cdf: &[f64],
    q_list: &[f64],
    quantiles: &[f64],
) -> Result<Vec<Artifact>> {
    Ok(vec![
        Artifact::csv(
            format!("{stem}_density.csv"),
            &["x", "density"],
            grid.iter().zip(density).map(|(&x, &f)| [num(x), num(f)]),
        )?,
        Artifact::csv(
            format!("{stem}_cdf.csv"),
            &["x", "cdf"],
            grid.iter().zip(cdf).map(|(&x, &c)| [num(x), num(c)]),
        )?,
        Artifact::csv(
            format!("{stem}_quantile.csv"),
            &["q", "quantile"],
            q_list.iter().zip(quantiles).map(|(&q, &v)| [num(q), num(v)]),
        )?,
    ])
}

pub(crate) fn mp(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let mut targets: Vec<(String, f64)> = config.sizes.iter().map(|s| (s.label(), s.gamma())).collect();
    if let Some(g) = config.gamma {
        targets.insert(0, (format!("gamma{g}"), g));
    }
    let mut out = Vec::new();
    for (label, gamma) in targets {
        let law = MpLaw::new(gamma)?;
        let m = config.tolerances.grid_points;
        let hi = 1.05 * law.b;
        let grid: Vec<f64> = (0..m).map(|i| hi * i as f64 / (m - 1) as f64).collect();
        let density: Vec<f64> = grid.iter().map(|&x| law.density(x)).collect();
        let cdf: Vec<f64> = grid.iter().map(|&x| law.cdf(x)).collect();
        let quantiles = config.q_list.iter().map(|&q| law.quantile(q)).collect::<Result<Vec<_>>>()?;
        out.extend(law_tables(&format!("mp_{label}"), &grid, &density, &cdf, &config.q_list, &quantiles)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LsdReport {
    p: usize,
    n: usize,
    gamma: f64,
    epsilon: f64,
    zero_mass: f64,
    zero_mass_flagged: bool,
    continuous_mass: f64,
    max_residual: f64,
    max_iterations: usize,
}

pub(crate) fn lsd(config: &ExperimentConfig, models: &[PopulationModel]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    for (size, model) in config.sizes.iter().zip(models) {
        let sol = lsd_reference(config, model, *size)?;
        let quantiles = lsd_quantiles(&sol, &config.q_list)?;
        let stem = format!("lsd_{}", size.label());
        out.extend(law_tables(&stem, &sol.grid, &sol.density, &sol.cdf_table(), &config.q_list, &quantiles)?);
        let report = LsdReport {
            p: size.p,
            n: size.n,
            gamma: size.gamma(),
            epsilon: sol.epsilon,
            zero_mass: sol.zero_mass,
            zero_mass_flagged: sol.zero_mass_flagged,
            continuous_mass: sol.continuous_mass(),
            max_residual: sol.residuals.iter().fold(0.0, |m: f64, &r| m.max(r)),
            max_iterations: sol.iterations.iter().copied().max().unwrap_or(0),
        };
        out.push(Artifact::json(format!("{stem}_report.json"), &report)?);
    }
    Ok(out)
}

pub(crate) fn validate(config: &ExperimentConfig, models: &[PopulationModel]) -> Result<Vec<Artifact>> {
    config
        .sizes
        .iter()
        .zip(models)
        .map(|(size, model)| {
            Artifact::json(
                format!("validate_{}.json", size.label()),
                &validate_assumptions(model, size.gamma()),
            )
        })
        .collect()
}

pub(crate) fn diagnose(config: &ExperimentConfig, models: &[PopulationModel]) -> Result<Vec<Artifact>> {
    let zs: Vec<Complex64> = config.z_grid.iter().map(|z| z.complex()).collect();
    let mut out = Vec::new();
    for (i, (size, model)) in config.sizes.iter().zip(models).enumerate() {
        for (d, spec) in config.distributions.iter().enumerate() {
            let key = cell_key(config, i, d);
            let with_s = model.is_identity();
            // per replicate: diagnostics and (identity model only) s_n for every z
            let reps: Vec<(Vec<ResolventDiagnostics>, Vec<Complex64>)> = (0..config.replicates)
                .into_par_iter()
                .map(|r| {
                    let e = generate(model, spec, size.n, key.with_replicate(r as u32))?;
                    let w = zs.iter().map(|&z| compute_w(&e, z)).collect::<Result<Vec<_>>>()?;
                    let s = if with_s {
                        let spectrum = e.r_spectrum()?;
                        zs.iter().map(|&z| spectrum.stieltjes(z)).collect::<Result<Vec<_>>>()?
                    } else {
                        Vec::new()
                    };
                    Ok((w, s))
                })
                .collect::<Result<_>>()?;
            let stem = format!("diagnose_{}_{}", size.label(), spec.label());
            let mut rows = Vec::new();
            let mut master = Vec::new();
            for (k, &z) in zs.iter().enumerate() {
                let w: Vec<&ResolventDiagnostics> = reps.iter().map(|r| &r.0[k]).collect();
                let abs = batch_mean(&w.iter().map(|d| d.w_n.norm()).collect::<Vec<_>>(), DEFAULT_BATCHES);
                let mean = |f: fn(&ResolventDiagnostics) -> Complex64| {
                    w.iter().map(|d| f(d)).sum::<Complex64>() / w.len() as f64
                };
                let (wn, w1, w2) = (mean(|d| d.w_n), mean(|d| d.w_n1), mean(|d| d.w_n2));
                let w1_se = batch_mean(&w.iter().map(|d| d.w_n1.re).collect::<Vec<_>>(), DEFAULT_BATCHES)
                    .std_error
                    .hypot(batch_mean(&w.iter().map(|d| d.w_n1.im).collect::<Vec<_>>(), DEFAULT_BATCHES).std_error);
                let max_abs = w.iter().fold(0.0f64, |m, d| m.max(d.w_n.norm()));
                let max_decomp = w.iter().fold(0.0f64, |m, d| m.max(d.decomposition_error()));
                rows.push(vec![
                    num(z.re),
                    num(z.im),
                    num(abs.value),
                    num(abs.std_error),
                    num(max_abs),
                    num(2.0 / z.im),
                    w.iter().all(|d| d.bound_check).to_string(),
                    num(wn.re),
                    num(wn.im),
                    num(w1.re),
                    num(w1.im),
                    num(w1_se),
                    num(w2.re),
                    num(w2.im),
                    num(max_decomp),
                ]);
                if with_s {
                    let draws: Vec<(Complex64, Complex64)> = reps.iter().map(|r| (r.1[k], r.0[k].w_n)).collect();
                    let m = master_residual_from_draws(z, size.p, size.n, &draws);
                    master.push(
                        [z.re, z.im, m.residual.value.re, m.residual.value.im, m.residual.value.norm(), m.residual.std_error]
                            .map(num),
                    );
                }
            }
            out.push(Artifact::csv(
                format!("{stem}.csv"),
                &[
                    "z_re",
                    "z_im",
                    "mean_abs_w",
                    "se_abs_w",
                    "max_abs_w",
                    "bound",
                    "bound_ok",
                    "w_re",
                    "w_im",
                    "w1_re",
                    "w1_im",
                    "w1_se",
                    "w2_re",
                    "w2_im",
                    "max_decomposition_error",
                ],
                rows,
            )?);
            if with_s {
                out.push(Artifact::csv(
                    format!("{stem}_master.csv"),
                    &["z_re", "z_im", "residual_re", "residual_im", "residual_abs", "residual_se"],
                    master,
                )?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MomentsOutput {
    distribution: String,
    simulated: MomentReport,
    /// `n E[Y₁₁⁴]` from the Laplace integral (identity model only).
    laplace_n_e_y4: Option<LaplaceMoment>,
    /// `n E[Y₁₁ Y₁₂]` from the Laplace integral (identity model only).
    laplace_n_e_y1y2: Option<LaplaceMoment>,
}

fn scaled(mut m: LaplaceMoment, n: usize) -> LaplaceMoment {
    m.value *= n as f64;
    m.abs_error *= n as f64;
    m
}

pub(crate) fn moments(config: &ExperimentConfig, models: &[PopulationModel]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    let mut sweeps: Vec<Vec<[String; 5]>> = vec![Vec::new(); config.distributions.len()];
    for (i, (size, model)) in config.sizes.iter().zip(models).enumerate() {
        for (d, spec) in config.distributions.iter().enumerate() {
            let report = moment_estimates(model, spec, size.n, config.replicates, cell_key(config, i, d))?;
            let (l4, l12) = if model.is_identity() {
                (
                    Some(scaled(laplace_fourth_moment(spec, size.n)?, size.n)),
                    Some(scaled(laplace_cross_moment(spec, size.n)?, size.n)),
                )
            } else {
                (None, None)
            };
            for (name, est) in [
                ("n_e_y4", report.n_e_y4),
                ("n_e_y1y2", report.n_e_y1y2),
                ("n_max_first_moment", report.n_max_first_moment),
                ("mixed_second_sum", report.mixed_second_sum),
            ] {
                sweeps[d].push([size.p.to_string(), size.n.to_string(), name.into(), num(est.value), num(est.std_error)]);
            }
            let result = MomentsOutput {
                distribution: spec.label(),
                simulated: report,
                laplace_n_e_y4: l4,
                laplace_n_e_y1y2: l12,
            };
            out.push(Artifact::json(format!("moments_{}_{}.json", size.label(), spec.label()), &result)?);
        }
    }
    for (spec, rows) in config.distributions.iter().zip(sweeps) {
        out.push(Artifact::csv(
            format!("moments_{}.csv", spec.label()),
            &["p", "n", "statistic", "estimate", "stderr"],
            rows,
        )?);
    }
    Ok(out)
}
