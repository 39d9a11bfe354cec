//! Entry laws for the data matrix and the Laplace-transform quantities of
//! their squares.
//!
//! All finite-variance laws are standardized to mean 0 and variance 1.
//! The symmetrized Pareto law is left unscaled: the correlation matrix is
//! invariant to the scale of each row, so only its tail index matters.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Pareto, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_half_line, integrate_half_line_multiscale, QuadOptions};
use crate::rng::StreamKey;
use crate::stats::{batch_mean, Estimate, DEFAULT_BATCHES};

/// Entry law of `X̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    Gaussian,
    /// Student t with `dof > 2`, divided by `sqrt(dof / (dof - 2))`.
    StudentT { dof: f64 },
    /// `|ξ|` Pareto with survival `x^-alpha` on `[1, ∞)`, independent random sign.
    SymmetrizedPareto { alpha: f64 },
    /// `E - 1` with `E` standard exponential.
    CenteredExponential,
}

/// A validated entry law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionKind", into = "DistributionKind")]
pub struct DistributionSpec {
    kind: DistributionKind,
}

impl TryFrom<DistributionKind> for DistributionSpec {
    type Error = Error;

    fn try_from(kind: DistributionKind) -> Result<Self> {
        DistributionSpec::new(kind)
    }
}

impl From<DistributionSpec> for DistributionKind {
    fn from(spec: DistributionSpec) -> Self {
        spec.kind
    }
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind) -> Result<Self> {
        match kind {
            DistributionKind::StudentT { dof } if !(dof > 2.0 && dof.is_finite()) => Err(Error::invalid(format!(
                "student_t requires dof > 2 for standardization, got {dof}"
            ))),
            DistributionKind::SymmetrizedPareto { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                Error::invalid(format!("symmetrized_pareto requires alpha > 0, got {alpha}")),
            ),
            _ => Ok(Self { kind }),
        }
    }

    pub fn gaussian() -> Self {
        Self {
            kind: DistributionKind::Gaussian,
        }
    }

    pub fn student_t(dof: f64) -> Result<Self> {
        Self::new(DistributionKind::StudentT { dof })
    }

    pub fn symmetrized_pareto(alpha: f64) -> Result<Self> {
        Self::new(DistributionKind::SymmetrizedPareto { alpha })
    }

    pub fn centered_exponential() -> Self {
        Self {
            kind: DistributionKind::CenteredExponential,
        }
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self.kind, DistributionKind::CenteredExponential)
    }

    pub fn has_finite_variance(&self) -> bool {
        match self.kind {
            DistributionKind::SymmetrizedPareto { alpha } => alpha > 2.0,
            _ => true,
        }
    }

    pub fn tail_index(&self) -> Option<f64> {
        match self.kind {
            DistributionKind::StudentT { dof } => Some(dof),
            DistributionKind::SymmetrizedPareto { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// Short name used in output file names, e.g. `t3` or `pareto1.5`.
    pub fn label(&self) -> String {
        match self.kind {
            DistributionKind::Gaussian => "gaussian".into(),
            DistributionKind::StudentT { dof } => format!("t{dof}"),
            DistributionKind::SymmetrizedPareto { alpha } => format!("pareto{alpha}"),
            DistributionKind::CenteredExponential => "cexp".into(),
        }
    }

    /// Fills `out` with i.i.d. draws from `rng`, in order.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.kind {
            DistributionKind::Gaussian => {
                for x in out.iter_mut() {
                    *x = StandardNormal.sample(rng);
                }
            }
            DistributionKind::StudentT { dof } => {
                let t = StudentT::new(dof).expect("validated dof");
                let scale = (dof / (dof - 2.0)).sqrt().recip();
                for x in out.iter_mut() {
                    *x = t.sample(rng) * scale;
                }
            }
            DistributionKind::SymmetrizedPareto { alpha } => {
                let pareto = Pareto::new(1.0, alpha).expect("validated alpha");
                for x in out.iter_mut() {
                    let magnitude: f64 = pareto.sample(rng);
                    *x = if rng.random::<bool>() { magnitude } else { -magnitude };
                }
            }
            DistributionKind::CenteredExponential => {
                for x in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *x = e - 1.0;
                }
            }
        }
    }
}

/// Draws `count` values from the stream identified by `key`.
pub fn sample(spec: &DistributionSpec, count: usize, key: impl Into<StreamKey>) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = key.into().rng();
    let mut out = vec![0.0; count];
    spec.fill(&mut rng, &mut out);
    Ok(out)
}

/// How a [`LaplaceProfile`] evaluates its expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceMode {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// Default Monte Carlo sample size for Laplace evaluators.
pub const DEFAULT_LAPLACE_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy)]
enum Moment {
    Phi,
    PhiD1,
    PhiD2,
    Psi,
}

impl Moment {
    fn weight(self, x: f64) -> f64 {
        match self {
            Moment::Phi => 1.0,
            Moment::PhiD1 => -x * x,
            Moment::PhiD2 => x.powi(4),
            Moment::Psi => x,
        }
    }
}

/// Evaluators for `φ(s) = E exp(-sξ²)`, its first two derivatives and
/// `ψ(s) = E ξ exp(-sξ²)`.
///
/// Quadrature evaluations carry an absolute error bound (at most `1e-10`);
/// Monte Carlo evaluations carry a standard error.
#[derive(Debug, Clone)]
pub struct LaplaceProfile {
    spec: DistributionSpec,
    mode: LaplaceMode,
    samples: Option<Arc<[f64]>>,
}

/// Picks the closed form for Gaussian entries and adaptive quadrature otherwise.
pub fn laplace_profile(spec: &DistributionSpec) -> LaplaceProfile {
    match spec.kind {
        DistributionKind::Gaussian => LaplaceProfile {
            spec: *spec,
            mode: LaplaceMode::ClosedForm,
            samples: None,
        },
        _ => LaplaceProfile::quadrature(spec),
    }
}

impl LaplaceProfile {
    /// Quadrature evaluator for any law, Gaussian included.
    pub fn quadrature(spec: &DistributionSpec) -> Self {
        Self {
            spec: *spec,
            mode: LaplaceMode::Quadrature,
            samples: None,
        }
    }

    pub fn monte_carlo(spec: &DistributionSpec, draws: usize, key: impl Into<StreamKey>) -> Result<Self> {
        let samples = sample(spec, draws, key)?;
        Ok(Self {
            spec: *spec,
            mode: LaplaceMode::MonteCarlo,
            samples: Some(samples.into()),
        })
    }

    pub fn mode(&self) -> LaplaceMode {
        self.mode
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn phi(&self, s: f64) -> Result<Estimate> {
        self.eval(Moment::Phi, s)
    }

    /// `φ'(s) = -E[ξ² exp(-sξ²)]`.
    pub fn phi_d1(&self, s: f64) -> Result<Estimate> {
        self.eval(Moment::PhiD1, s)
    }

    /// `φ''(s) = E[ξ⁴ exp(-sξ²)]`.
    pub fn phi_d2(&self, s: f64) -> Result<Estimate> {
        self.eval(Moment::PhiD2, s)
    }

    pub fn psi(&self, s: f64) -> Result<Estimate> {
        self.eval(Moment::Psi, s)
    }

    fn eval(&self, moment: Moment, s: f64) -> Result<Estimate> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::domain(format!("Laplace argument must be finite and >= 0, got {s}")));
        }
        if matches!(moment, Moment::Psi) && self.spec.is_symmetric() && self.mode != LaplaceMode::MonteCarlo {
            return Ok(Estimate::exact(0.0));
        }
        if matches!(moment, Moment::Phi) && s == 0.0 {
            return Ok(Estimate::exact(1.0));
        }
        match self.mode {
            LaplaceMode::ClosedForm => Ok(Estimate::exact(gaussian_closed_form(moment, s))),
            LaplaceMode::Quadrature => {
                if s == 0.0 {
                    return Err(Error::domain("derivatives at s = 0 need moments that may not exist"));
                }
                self.quadrature_eval(moment, s)
            }
            LaplaceMode::MonteCarlo => {
                let xs = self.samples.as_ref().expect("monte carlo samples");
                let vals: Vec<f64> = xs.iter().map(|&x| moment.weight(x) * (-s * x * x).exp()).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1).max(1) as f64;
                Ok(Estimate {
                    value: mean,
                    std_error: (var / vals.len() as f64).sqrt(),
                })
            }
        }
    }

    fn quadrature_eval(&self, moment: Moment, s: f64) -> Result<Estimate> {
        let opts = QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_intervals: 2000,
        };
        let h = |x: f64| moment.weight(x) * (-s * x * x).exp();
        let r = match self.spec.kind {
            DistributionKind::Gaussian => {
                let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
                let mut r = integrate_half_line(|x| h(x) * norm * (-0.5 * x * x).exp(), opts)?;
                r.value *= 2.0;
                r.abs_error *= 2.0;
                r
            }
            DistributionKind::StudentT { dof } => {
                let c = (dof / (dof - 2.0)).sqrt();
                let log_norm = libm::lgamma(0.5 * (dof + 1.0)) - libm::lgamma(0.5 * dof) - 0.5 * (dof * std::f64::consts::PI).ln();
                let density = |x: f64| {
                    let t = c * x;
                    c * (log_norm - 0.5 * (dof + 1.0) * (t * t / dof).ln_1p()).exp()
                };
                let mut r = integrate_half_line(|x| h(x) * density(x), opts)?;
                r.value *= 2.0;
                r.abs_error *= 2.0;
                r
            }
            DistributionKind::SymmetrizedPareto { alpha } => pareto_eval(moment, alpha, s, opts)?,
            DistributionKind::CenteredExponential => {
                let near = integrate(|x| h(x - 1.0) * (-x).exp(), 0.0, 1.0, opts)?;
                let far = integrate_half_line(|t| h(t) * (-(1.0 + t)).exp(), opts)?;
                crate::quadrature::QuadResult {
                    value: near.value + far.value,
                    abs_error: near.abs_error + far.abs_error,
                }
            }
        };
        Ok(Estimate {
            value: r.value,
            std_error: r.abs_error,
        })
    }

    /// Splits the Monte Carlo sample into batches and returns one profile per batch.
    pub(crate) fn monte_carlo_batches(&self, batches: usize) -> Vec<LaplaceProfile> {
        let xs = match &self.samples {
            Some(xs) => xs,
            None => return Vec::new(),
        };
        let b = batches.clamp(1, xs.len());
        (0..b)
            .map(|i| {
                let lo = i * xs.len() / b;
                let hi = (i + 1) * xs.len() / b;
                LaplaceProfile {
                    spec: self.spec,
                    mode: LaplaceMode::MonteCarlo,
                    samples: Some(xs[lo..hi].to_vec().into()),
                }
            })
            .collect()
    }
}

// In y = s x² the Pareto moments become (α/2) s^{α/2 - k} ∫_s^∞ y^{k - α/2 - 1} e^{-y} dy,
// which stays well conditioned when s is tiny and the tail is heavy.
fn pareto_eval(moment: Moment, alpha: f64, s: f64, opts: QuadOptions) -> Result<crate::quadrature::QuadResult> {
    let (k, sign) = match moment {
        Moment::Phi => (0, 1.0),
        Moment::PhiD1 => (1, -1.0),
        Moment::PhiD2 => (2, 1.0),
        Moment::Psi => {
            return Ok(crate::quadrature::QuadResult {
                value: 0.0,
                abs_error: 0.0,
            })
        }
    };
    let power = k as f64 - 0.5 * alpha - 1.0;
    let lo = (s.log2().floor() as i32 - 2).max(-1000);
    let r = integrate_half_line_multiscale(|t| (s + t).powf(power) * (-(s + t)).exp(), lo, 8, opts)?;
    let scale = sign * 0.5 * alpha * s.powf(0.5 * alpha - k as f64);
    Ok(crate::quadrature::QuadResult {
        value: scale * r.value,
        abs_error: scale.abs() * r.abs_error,
    })
}

fn gaussian_closed_form(moment: Moment, s: f64) -> f64 {
    let base = 1.0 + 2.0 * s;
    match moment {
        Moment::Phi => base.powf(-0.5),
        Moment::PhiD1 => -base.powf(-1.5),
        Moment::PhiD2 => 3.0 * base.powf(-2.5),
        Moment::Psi => 0.0,
    }
}

/// Sample mean and variance of `xs`, used by standardization checks.
pub fn sample_moments(xs: &[f64]) -> (f64, f64) {
    let est = batch_mean(xs, DEFAULT_BATCHES);
    let var = xs.iter().map(|x| (x - est.value).powi(2)).sum::<f64>() / (xs.len() - 1).max(1) as f64;
    (est.value, var)
}
