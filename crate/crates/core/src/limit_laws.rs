//! The Marčenko–Pastur law in closed form and the fixed-point solver for the
//! generalized law whose Stieltjes transform solves
//! `s(z) = ∫ dH(λ) / (λ(1 − γ − γ z s(z)) − z)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::quadrature::{integrate, QuadOptions};

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("gamma must be positive and finite, got {gamma}")))
    }
}

fn check_upper(z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("z must lie in the upper half-plane, got {z}")))
    }
}

/// Marčenko–Pastur law with ratio `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpLaw {
    pub gamma: f64,
    /// Lower edge `(1 − √γ)²`.
    pub a: f64,
    /// Upper edge `(1 + √γ)²`.
    pub b: f64,
    /// Point mass at zero, `max(0, 1 − 1/γ)`.
    pub zero_mass: f64,
}

impl MpLaw {
    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let r = gamma.sqrt();
        Ok(Self {
            gamma,
            a: (1.0 - r).powi(2),
            b: (1.0 + r).powi(2),
            zero_mass: (1.0 - 1.0 / gamma).max(0.0),
        })
    }

    /// Density of the continuous part; zero outside `(a, b)` and at `x = 0`.
    pub fn density(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b || x <= 0.0 {
            return 0.0;
        }
        ((self.b - x) * (x - self.a)).sqrt() / (2.0 * std::f64::consts::PI * self.gamma * x)
    }

    // x = a + (b - a) sin²(θ/2) turns the square-root edges into a smooth integrand.
    fn theta_of(&self, x: f64) -> f64 {
        let u = ((x - self.a) / (self.b - self.a)).clamp(0.0, 1.0);
        2.0 * u.sqrt().asin()
    }

    fn continuous_mass_to_theta(&self, theta: f64) -> f64 {
        let w = 0.5 * (self.b - self.a);
        let c = w * w / (2.0 * std::f64::consts::PI * self.gamma);
        let integrand = |t: f64| {
            let x = self.a + (self.b - self.a) * (0.5 * t).sin().powi(2);
            c * t.sin().powi(2) / x
        };
        integrate(integrand, 0.0, theta, QuadOptions::with_abs_tol(1e-13))
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    }

    /// Mass of the continuous part, `min(1, 1/γ)` up to quadrature error.
    pub fn continuous_mass(&self) -> f64 {
        self.continuous_mass_to_theta(std::f64::consts::PI)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x <= self.a {
            return self.zero_mass;
        }
        if x >= self.b {
            return 1.0;
        }
        (self.zero_mass + self.continuous_mass_to_theta(self.theta_of(x))).clamp(0.0, 1.0)
    }

    /// Generalized inverse of [`MpLaw::cdf`]; zero when `q` is within the point mass.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        if q <= self.zero_mass {
            return Ok(0.0);
        }
        // bisection in θ, where the cdf is smooth and strictly increasing
        let target = q - self.zero_mass;
        let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.continuous_mass_to_theta(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(self.a + (self.b - self.a) * (0.5 * hi).sin().powi(2))
    }

    /// Root with positive imaginary part of `γ z S² + (z + γ − 1) S + 1 = 0`.
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        check_upper(z)?;
        let roots = quadratic_roots(self.gamma, z);
        let mut s = if roots[0].im > 0.0 && !(roots[1].im > 0.0) {
            roots[0]
        } else if roots[1].im > 0.0 && !(roots[0].im > 0.0) {
            roots[1]
        } else if roots[0].im >= roots[1].im {
            roots[0]
        } else {
            roots[1]
        };
        // one Newton step cleans up rounding from the root formula
        let (a, b) = (self.gamma * z, z + self.gamma - 1.0);
        let deriv = 2.0 * a * s + b;
        if deriv.norm() > 0.0 {
            let step = (a * s * s + b * s + 1.0) / deriv;
            if (s - step).im > 0.0 {
                s -= step;
            }
        }
        Ok(s)
    }

    /// `|γ z S² + (z + γ − 1) S + 1|`.
    pub fn quadratic_residual(&self, z: Complex64, s: Complex64) -> f64 {
        (self.gamma * z * s * s + (z + self.gamma - 1.0) * s + 1.0).norm()
    }

    /// `|−zS − 1/(1 + γS − (1 − γ)/z)|`.
    pub fn self_consistency_residual(&self, z: Complex64, s: Complex64) -> f64 {
        (-z * s - (1.0 + self.gamma * s - (1.0 - self.gamma) / z).inv()).norm()
    }
}

/// Both roots of `γ z S² + (z + γ − 1) S + 1 = 0`, computed without cancellation.
pub fn quadratic_roots(gamma: f64, z: Complex64) -> [Complex64; 2] {
    let a = gamma * z;
    let b = z + gamma - 1.0;
    let disc = (b * b - 4.0 * a).sqrt();
    let q = if (b.conj() * disc).re >= 0.0 {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    [q / a, q.inv()]
}

pub fn mp_density(gamma: f64, x: f64) -> Result<f64> {
    Ok(MpLaw::new(gamma)?.density(x))
}

pub fn mp_cdf(gamma: f64, x: f64) -> Result<f64> {
    Ok(MpLaw::new(gamma)?.cdf(x))
}

pub fn mp_quantile(gamma: f64, q: f64) -> Result<f64> {
    MpLaw::new(gamma)?.quantile(q)
}

pub fn mp_stieltjes(gamma: f64, z: Complex64) -> Result<Complex64> {
    MpLaw::new(gamma)?.stieltjes(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// A converged fixed point with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub s: Complex64,
    pub iterations: usize,
    pub residual: f64,
    /// Damping in effect at convergence.
    pub damping: f64,
    /// Whether the companion-transform fallback produced the solution.
    pub companion: bool,
}

const STALL_WINDOW: usize = 100;

/// Right-hand side `G(s) = Σ_λ w_λ / (λ(1 − γ − γ z s) − z)`.
pub fn lsd_map(gamma: f64, h: &DiscreteMeasure, z: Complex64, s: Complex64) -> Complex64 {
    let factor = 1.0 - gamma - gamma * z * s;
    h.iter().map(|(l, w)| w / (l * factor - z)).sum()
}

/// Damped fixed-point iteration from `s₀ = −1/z`.
pub fn solve_lsd(gamma: f64, h: &DiscreteMeasure, z: Complex64, opts: &SolverOptions) -> Result<FixedPoint> {
    solve_lsd_from(gamma, h, z, opts, -z.inv())
}

/// Damped fixed-point iteration `s ← (1 − d) s + d G(s)` from a given start.
///
/// If the iteration fails even at the smallest damping, Newton's method from
/// `start` and then the companion-transform fallback are tried before the
/// original error is returned.
pub fn solve_lsd_from(
    gamma: f64,
    h: &DiscreteMeasure,
    z: Complex64,
    opts: &SolverOptions,
    start: Complex64,
) -> Result<FixedPoint> {
    check_gamma(gamma)?;
    check_upper(z)?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::invalid(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    if !(start.im > 0.0) {
        return Err(Error::invalid("starting point must lie in the upper half-plane"));
    }
    match damped_iteration(|s| lsd_map(gamma, h, z, s), start, opts) {
        Ok((s, iterations, residual, damping)) => Ok(FixedPoint {
            s,
            iterations,
            residual,
            damping,
            companion: false,
        }),
        Err(err) => newton(gamma, h, z, start, opts)
            .map(|(s, iterations, residual)| FixedPoint {
                s,
                iterations,
                residual,
                damping: opts.damping,
                companion: false,
            })
            .or_else(|_| solve_companion(gamma, h, z, opts))
            .map_err(|_| err),
    }
}

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_MAX_HALVINGS: usize = 40;

/// Newton's method on `s − G(s) = 0` with step halving, keeping every
/// iterate in the upper half-plane and the residual non-increasing.
fn newton(
    gamma: f64,
    h: &DiscreteMeasure,
    z: Complex64,
    start: Complex64,
    opts: &SolverOptions,
) -> Result<(Complex64, usize, f64)> {
    let residual_at = |s: Complex64| (s - lsd_map(gamma, h, z, s)).norm();
    let mut s = start;
    let mut residual = residual_at(s);
    let max_iter = opts.max_iter.min(NEWTON_MAX_ITER);
    for iteration in 0..max_iter {
        if residual <= opts.tol {
            return Ok((s, iteration, residual));
        }
        let factor = 1.0 - gamma - gamma * z * s;
        let deriv: Complex64 = h
            .iter()
            .map(|(l, w)| {
                let den = l * factor - z;
                w * l * gamma * z / (den * den)
            })
            .sum();
        let step = (s - lsd_map(gamma, h, z, s)) / (1.0 - deriv);
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..NEWTON_MAX_HALVINGS {
            let next = s - t * step;
            if next.im > 0.0 {
                let r = residual_at(next);
                if r < residual {
                    s = next;
                    residual = r;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if residual <= opts.tol {
        Ok((s, max_iter, residual))
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual,
        })
    }
}

// The damping is halved whenever a window of iterations makes no progress or a
// step leaves the upper half-plane, down to `damping / 64`.
fn damped_iteration<F: Fn(Complex64) -> Complex64>(
    map: F,
    start: Complex64,
    opts: &SolverOptions,
) -> Result<(Complex64, usize, f64, f64)> {
    let min_damping = opts.damping / 64.0;
    let mut d = opts.damping;
    let mut s = start;
    let mut residual = f64::INFINITY;
    let (mut window_best, mut previous_best) = (f64::INFINITY, f64::INFINITY);
    for iteration in 0..=opts.max_iter {
        let g = map(s);
        residual = (s - g).norm();
        if residual <= opts.tol {
            return Ok((s, iteration, residual, d));
        }
        if iteration == opts.max_iter {
            break;
        }
        window_best = window_best.min(residual);
        if iteration > 0 && iteration % STALL_WINDOW == 0 {
            if window_best > 0.9 * previous_best && d > min_damping {
                d *= 0.5;
            }
            previous_best = window_best;
            window_best = f64::INFINITY;
        }
        let next = (1.0 - d) * s + d * g;
        if !(next.im > 0.0) {
            if d > min_damping {
                d *= 0.5;
                continue;
            }
            return Err(Error::Instability {
                iteration: iteration + 1,
                imag: next.im,
            });
        }
        s = next;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Fallback for points where the fixed point of `G` repels (typically outside
/// the support): iterate the companion transform
/// `s̲ = −1/(z − γ ∫ λ dH/(1 + λ s̲))`, map back through `s̲ = −(1 − γ)/z + γ s`
/// and polish with Newton steps on `s = G(s)`.
fn solve_companion(gamma: f64, h: &DiscreteMeasure, z: Complex64, opts: &SolverOptions) -> Result<FixedPoint> {
    let map = |c: Complex64| {
        let acc: Complex64 = h.iter().map(|(l, w)| w * l / (1.0 + l * c)).sum();
        -(z - gamma * acc).inv()
    };
    let inner = SolverOptions {
        tol: opts.tol * 1e-2,
        ..*opts
    };
    let (c, iterations, _, damping) = damped_iteration(map, -z.inv(), &inner)?;
    let s = (c + (1.0 - gamma) / z) / gamma;
    if !(s.im > 0.0) {
        return Err(Error::Instability { iteration: iterations, imag: s.im });
    }
    let (s, polish, residual) = newton(gamma, h, z, s, opts)?;
    Ok(FixedPoint {
        s,
        iterations: iterations + polish,
        residual,
        damping,
        companion: true,
    })
}

/// Generalized Marčenko–Pastur law tabulated on a grid by Stieltjes inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsdSolution {
    pub gamma: f64,
    pub h: DiscreteMeasure,
    pub grid: Vec<f64>,
    pub epsilon: f64,
    pub s_values: Vec<Complex64>,
    /// Density of the continuous part: `Im(s(x + iε) + m₀/(x + iε)) / π`, `m₀` the zero mass.
    pub density: Vec<f64>,
    pub zero_mass: f64,
    /// Set when `H` charges zero, where the zero mass is not `max(0, 1 − 1/γ)`.
    pub zero_mass_flagged: bool,
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
}

/// Solves on every grid point `x + iε`, warm-starting from the previous point.
pub fn lsd_density_on_grid(
    gamma: f64,
    h: &DiscreteMeasure,
    grid: &[f64],
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<LsdSolution> {
    check_gamma(gamma)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("grid must be non-empty and strictly increasing"));
    }
    let zero_mass_flagged = h.mass_at_zero() > 0.0;
    let zero_mass = (1.0 - 1.0 / gamma).max(0.0);
    let mut s_values = Vec::with_capacity(grid.len());
    let mut density = Vec::with_capacity(grid.len());
    let mut iterations = Vec::with_capacity(grid.len());
    let mut residuals = Vec::with_capacity(grid.len());
    let mut previous: Option<Complex64> = None;
    for (index, &x) in grid.iter().enumerate() {
        let z = Complex64::new(x, epsilon);
        let fp = match previous {
            Some(start) => solve_lsd_from(gamma, h, z, opts, start).or_else(|_| solve_lsd(gamma, h, z, opts)),
            None => solve_lsd(gamma, h, z, opts),
        }
        .map_err(|e| Error::AtGridPoint {
            index,
            source: Box::new(e),
        })?;
        previous = Some(fp.s);
        let continuous = fp.s + zero_mass / z;
        density.push((continuous.im / std::f64::consts::PI).max(0.0));
        s_values.push(fp.s);
        iterations.push(fp.iterations);
        residuals.push(fp.residual);
    }
    Ok(LsdSolution {
        gamma,
        h: h.clone(),
        grid: grid.to_vec(),
        epsilon,
        s_values,
        density,
        zero_mass,
        zero_mass_flagged,
        iterations,
        residuals,
    })
}

/// Grid over `[0.9 λ_min(H) (1 − √γ)², 1.05 λ_max(H) (1 + √γ)²]`, starting just
/// above zero when the lower edge vanishes.
pub fn default_grid(gamma: f64, h: &DiscreteMeasure, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let hi = 1.05 * h.max().max(0.0) * (1.0 + gamma.sqrt()).powi(2);
    let edge = 0.9 * h.min().max(0.0) * (1.0 - gamma.sqrt()).powi(2);
    let lo = if edge > 0.0 { edge } else { hi / (4.0 * points as f64) };
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

impl LsdSolution {
    /// Trapezoid mass of the tabulated density.
    pub fn continuous_mass(&self) -> f64 {
        self.cumulative().last().copied().unwrap_or(0.0)
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.grid.len());
        out.push(0.0);
        for i in 1..self.grid.len() {
            acc += 0.5 * (self.density[i] + self.density[i - 1]) * (self.grid[i] - self.grid[i - 1]);
            out.push(acc);
        }
        out
    }

    /// CDF at the grid points, continuous part rescaled to mass `1 − zero_mass`.
    pub fn cdf_table(&self) -> Vec<f64> {
        let cum = self.cumulative();
        let total = *cum.last().unwrap();
        let scale = if total > 0.0 { (1.0 - self.zero_mass) / total } else { 0.0 };
        let base = if self.grid[0] >= 0.0 { self.zero_mass } else { 0.0 };
        cum.iter().map(|c| (base + c * scale).min(1.0)).collect()
    }

    /// Piecewise-linear CDF built from [`LsdSolution::cdf_table`].
    pub fn cdf(&self, x: f64) -> f64 {
        let table = self.cdf_table();
        self.cdf_with(&table, x)
    }

    fn cdf_with(&self, table: &[f64], x: f64) -> f64 {
        let first = self.grid[0];
        if x < first {
            return if x >= 0.0 { self.zero_mass } else { 0.0 };
        }
        let last = *self.grid.last().unwrap();
        if x >= last {
            return 1.0;
        }
        let i = self.grid.partition_point(|&g| g <= x);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let t = (x - x0) / (x1 - x0);
        table[i - 1] + t * (table[i] - table[i - 1])
    }

    /// Returns a closure evaluating the CDF without rebuilding the table.
    pub fn cdf_fn(&self) -> impl Fn(f64) -> f64 + '_ {
        let table = self.cdf_table();
        move |x| self.cdf_with(&table, x)
    }
}

/// Quantiles of the tabulated law; levels at or below the zero mass map to 0.
pub fn lsd_quantiles(solution: &LsdSolution, q_list: &[f64]) -> Result<Vec<f64>> {
    let table = solution.cdf_table();
    q_list
        .iter()
        .map(|&q| {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::domain(format!("quantile level must lie in (0, 1), got {q}")));
            }
            if q <= solution.zero_mass {
                return Ok(0.0);
            }
            let i = table.partition_point(|&c| c < q);
            if i == 0 {
                return Ok(solution.grid[0]);
            }
            if i >= table.len() {
                return Ok(*solution.grid.last().unwrap());
            }
            let (c0, c1) = (table[i - 1], table[i]);
            let t = if c1 > c0 { (q - c0) / (c1 - c0) } else { 1.0 };
            Ok(solution.grid[i - 1] + t * (solution.grid[i] - solution.grid[i - 1]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_grid() -> Vec<Complex64> {
        let mut zs = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                let re = -1.0 + 1.25 * i as f64;
                let im = 0.1 + (2.0 - 0.1) * j as f64 / 3.0;
                zs.push(Complex64::new(re, im));
            }
        }
        zs
    }

    #[test]
    fn density_examples() {
        assert!((mp_density(1.0, 2.0).unwrap() - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert_eq!(mp_density(0.25, 3.0).unwrap(), 0.0);
        let law = MpLaw::new(0.3).unwrap();
        assert_eq!(law.density(law.a), 0.0);
        assert_eq!(mp_density(1.0, 0.0).unwrap(), 0.0);
        assert!(mp_density(-1.0, 1.0).is_err());
        assert!((MpLaw::new(0.25).unwrap().b - 2.25).abs() < 1e-15);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(mp_cdf(0.5, -0.1).unwrap(), 0.0);
        assert_eq!(mp_cdf(2.0, 0.0).unwrap(), 0.5);
        assert!((mp_cdf(0.5, 2.9142).unwrap() - 1.0).abs() < 1e-8);
        for gamma in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let law = MpLaw::new(gamma).unwrap();
            let want = 1.0 - law.zero_mass;
            assert!((law.continuous_mass() - want).abs() < 1e-10, "gamma {gamma}");
        }
    }

    #[test]
    fn cdf_matches_direct_quadrature_of_density() {
        // independent route: integrate the density formula in x with the adaptive rule
        let law = MpLaw::new(0.5).unwrap();
        for x in [0.2, 0.7, 1.5, 2.5] {
            let direct = integrate(|t| law.density(t), law.a, x, QuadOptions::with_abs_tol(1e-11)).unwrap();
            assert!((law.cdf(x) - direct.value).abs() < 1e-8, "x {x}");
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(mp_quantile(2.0, 0.25).unwrap(), 0.0);
        let top = mp_quantile(1.0, 1.0 - 1e-9).unwrap();
        assert!(top < 4.0 && top > 3.99);
        assert!(mp_quantile(1.0, 1.0).is_err());
        for gamma in [0.25, 0.5, 1.0, 2.0] {
            let law = MpLaw::new(gamma).unwrap();
            for i in 1..20 {
                let q = i as f64 / 20.0;
                let x = law.quantile(q).unwrap();
                if q > law.zero_mass {
                    assert!((law.cdf(x) - q).abs() < 1e-8, "gamma {gamma} q {q}");
                } else {
                    assert_eq!(x, 0.0);
                }
            }
        }
    }

    #[test]
    fn stieltjes_contract_on_grid() {
        for gamma in [0.25, 0.5, 1.0, 2.0] {
            let law = MpLaw::new(gamma).unwrap();
            for z in z_grid() {
                let s = law.stieltjes(z).unwrap();
                assert!(s.im > 0.0);
                assert!(law.quadratic_residual(z, s) <= 1e-12, "gamma {gamma} z {z}");
                assert!(law.self_consistency_residual(z, s) <= 1e-10);
                // brute force over both roots: exactly one in the upper half-plane
                let roots = quadratic_roots(gamma, z);
                assert_eq!(roots.iter().filter(|r| r.im > 0.0).count(), 1, "gamma {gamma} z {z}");
            }
        }
        assert!(mp_stieltjes(0.5, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn stieltjes_matches_density_integral() {
        let law = MpLaw::new(0.5).unwrap();
        let z = Complex64::new(1.0, 0.7);
        let re = integrate(|x| ((x - z.re) / ((x - z.re).powi(2) + z.im * z.im)) * law.density(x), law.a, law.b, QuadOptions::with_abs_tol(1e-12)).unwrap();
        let im = integrate(|x| (z.im / ((x - z.re).powi(2) + z.im * z.im)) * law.density(x), law.a, law.b, QuadOptions::with_abs_tol(1e-12)).unwrap();
        let s = law.stieltjes(z).unwrap();
        assert!((s - Complex64::new(re.value, im.value)).norm() < 1e-9);
    }

    #[test]
    fn solver_reduces_to_mp_for_point_mass() {
        let h = DiscreteMeasure::point_mass(1.0);
        let opts = SolverOptions::default();
        let z = Complex64::new(0.0, 1.0);
        let fp = solve_lsd(0.5, &h, z, &opts).unwrap();
        assert!((fp.s - mp_stieltjes(0.5, z).unwrap()).norm() < 1e-8);
        let z = Complex64::new(0.5, 0.5);
        let fp = solve_lsd(1.0, &h, z, &opts).unwrap();
        assert!((fp.s - mp_stieltjes(1.0, z).unwrap()).norm() < 1e-8);
        for gamma in [0.25, 0.5, 1.0, 2.0] {
            for z in z_grid() {
                let fp = solve_lsd(gamma, &h, z, &opts).unwrap();
                assert!(fp.s.im > 0.0);
                assert!((fp.s - mp_stieltjes(gamma, z).unwrap()).norm() < 1e-8, "gamma {gamma} z {z}");
            }
        }
    }

    #[test]
    fn solver_errors() {
        let h = DiscreteMeasure::point_mass(1.0);
        let z = Complex64::new(1.0, 0.01);
        let tight = SolverOptions { max_iter: 3, tol: 1e-300, ..Default::default() };
        assert!(matches!(solve_lsd(0.5, &h, z, &tight), Err(Error::NonConvergence { iterations: 3, .. })));
        assert!(solve_lsd(0.5, &h, Complex64::new(1.0, 0.0), &SolverOptions::default()).is_err());
        let bad = SolverOptions { damping: 0.0, ..Default::default() };
        assert!(solve_lsd(0.5, &h, z, &bad).is_err());
    }

    #[test]
    fn density_grid_matches_closed_form() {
        let gamma = 0.5;
        let law = MpLaw::new(gamma).unwrap();
        let grid: Vec<f64> = (0..400).map(|i| 0.05 + (3.2 - 0.05) * i as f64 / 399.0).collect();
        // near the square-root edges the smoothing bias is O(sqrt(eps)), so 1e-4 is needed for 0.01
        let sol = lsd_density_on_grid(gamma, &DiscreteMeasure::point_mass(1.0), &grid, 1e-4, &SolverOptions::default()).unwrap();
        for (x, d) in grid.iter().zip(&sol.density) {
            assert!((d - law.density(*x)).abs() < 0.01, "x {x}: {d} vs {}", law.density(*x));
        }
        assert!((sol.continuous_mass() - 1.0).abs() < 0.02);
        assert!(sol.residuals.iter().all(|&r| r <= 1e-10));
        let q = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let lq = lsd_quantiles(&sol, &q).unwrap();
        for (qq, x) in q.iter().zip(&lq) {
            assert!((x - law.quantile(*qq).unwrap()).abs() < 0.02);
        }
        assert!(lq.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn density_beyond_support_vanishes() {
        let gamma: f64 = 0.5;
        let h = DiscreteMeasure::uniform(&[0.5, 1.0, 1.5], 0.0).unwrap();
        let edge = h.max() * (1.0 + gamma.sqrt()).powi(2);
        let grid: Vec<f64> = (0..50).map(|i| edge * (1.01 + 0.02 * i as f64)).collect();
        let sol = lsd_density_on_grid(gamma, &h, &grid, 1e-3, &SolverOptions::default()).unwrap();
        assert!(sol.density.iter().all(|&d| d <= 0.01));
    }

    #[test]
    fn zero_mass_and_low_quantiles() {
        let gamma = 2.0;
        let h = DiscreteMeasure::point_mass(1.0);
        let grid = default_grid(gamma, &h, 600);
        let sol = lsd_density_on_grid(gamma, &h, &grid, 1e-3, &SolverOptions::default()).unwrap();
        assert_eq!(sol.zero_mass, 0.5);
        assert!(!sol.zero_mass_flagged);
        assert_eq!(lsd_quantiles(&sol, &[0.3]).unwrap(), vec![0.0]);
        let law = MpLaw::new(gamma).unwrap();
        assert!((lsd_quantiles(&sol, &[0.75]).unwrap()[0] - law.quantile(0.75).unwrap()).abs() < 0.03);
        assert!(lsd_quantiles(&sol, &[1.0]).is_err());
    }
}
