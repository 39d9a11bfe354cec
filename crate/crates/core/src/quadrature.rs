//! Globally adaptive Gauss–Kronrod (7/15 point) integration.

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Integral estimate with an absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// Bisects the segment with the largest error estimate until the summed
/// error is below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
        });
    }
    let mut segments = vec![gk15(&mut f, a, b)];
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature {
                estimate: value,
                abs_error: error,
            });
        }
        if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            return Ok(QuadResult {
                value,
                abs_error: error,
            });
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                estimate: value,
                abs_error: error,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval collapsed to adjacent floats; keep it and accept its error.
            segments.push(Segment { error: 0.0, ..seg });
            continue;
        }
        segments.push(gk15(&mut f, seg.a, mid));
        segments.push(gk15(&mut f, mid, seg.b));
    }
}

/// Integrates `f` over `[0, ∞)` through the map `t = u / (1 - u)`, `u ∈ [0, 1)`.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut f: F, opts: QuadOptions) -> Result<QuadResult> {
    integrate(
        |u| {
            let v = 1.0 - u;
            let t = u / v;
            let jac = 1.0 / (v * v);
            let y = f(t) * jac;
            if y.is_finite() {
                y
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        opts,
    )
}

/// Integrates `f` over `[0, ∞)` split at the dyadic points `2^lo_exp, …, 2^hi_exp`.
///
/// Useful when the integrand lives on an unknown scale (for instance a sharp
/// peak near zero) that a single mapped interval could miss. Each piece is
/// integrated adaptively with `abs_tol` shared evenly between the pieces.
pub fn integrate_half_line_multiscale<F: FnMut(f64) -> f64>(
    mut f: F,
    lo_exp: i32,
    hi_exp: i32,
    opts: QuadOptions,
) -> Result<QuadResult> {
    let pieces = (hi_exp - lo_exp + 2).max(2) as f64;
    let piece_opts = QuadOptions {
        abs_tol: opts.abs_tol / pieces,
        ..opts
    };
    let mut total = QuadResult {
        value: 0.0,
        abs_error: 0.0,
    };
    let mut add = |r: QuadResult| {
        total.value += r.value;
        total.abs_error += r.abs_error;
    };
    let mut left = 0.0;
    for e in lo_exp..=hi_exp {
        let right = 2f64.powi(e);
        add(integrate(&mut f, left, right, piece_opts)?);
        left = right;
    }
    let start = left;
    add(integrate_half_line(|t| f(start + t), piece_opts)?);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiscale_finds_narrow_peak() {
        // mass 1 concentrated on the scale 1e-8
        let w = 1e-8;
        let f = |t: f64| (-t / w).exp() / w;
        let r = integrate_half_line_multiscale(f, -40, 10, QuadOptions::with_abs_tol(1e-12)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 5.0 * x.powi(4) - 3.0 * x * x + 1.0, -1.0, 2.0, QuadOptions::default()).unwrap();
        // 32 + 1 - (8 + 1) + 3 = 27
        assert!((r.value - 27.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let r = integrate(|x| x.sqrt(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn half_line_exponential_and_rational() {
        let r = integrate_half_line(|t| (-t).exp(), QuadOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
        let r = integrate_half_line(|t| 1.0 / (1.0 + t * t), QuadOptions::default()).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn reports_failure_on_divergent_integrand() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, QuadOptions { max_intervals: 50, ..Default::default() });
        assert!(r.is_err());
    }
}
