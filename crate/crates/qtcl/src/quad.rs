//! Adaptive quadrature and uniform-grid integration helpers.
//!
//! The workhorse is a globally adaptive Gauss–Kronrod 7–15 scheme over a
//! complex-valued integrand: the interval with the largest embedded error
//! estimate is bisected until the summed estimate meets the tolerance.
//! Callers pass explicit split points so that removable singularities sit
//! on panel boundaries, where the Kronrod nodes never land.

use num_complex::Complex64 as C64;

use crate::{Error, Result};

// Gauss-Kronrod 7-15 abscissae and weights on [-1, 1].
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
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

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_intervals: 10_000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadEstimate {
    pub value: C64,
    pub error: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        kronrod += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::Integration { estimate: f64::NAN, tolerance: 0.0 });
    }
    let error = ((kronrod - gauss) * half).norm();
    Ok(Panel { a, b, value, error })
}

/// Adaptive integral of a complex integrand over [a, b]. `splits` lists
/// interior points where the panel decomposition must begin.
pub fn integrate_complex<F: Fn(f64) -> C64>(
    f: F,
    a: f64,
    b: f64,
    splits: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadEstimate> {
    if b <= a {
        return Ok(QuadEstimate { value: C64::ZERO, error: 0.0 });
    }
    let mut edges: Vec<f64> = std::iter::once(a)
        .chain(splits.iter().copied().filter(|x| *x > a && *x < b))
        .chain(std::iter::once(b))
        .collect();
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut panels = Vec::with_capacity(64);
    for w in edges.windows(2) {
        panels.push(kronrod15(&f, w[0], w[1])?);
    }

    let min_width = (b - a) * 1e-14;
    loop {
        let total: C64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let tol = cfg.atol.max(cfg.rtol * total.norm());
        if err <= tol {
            return Ok(QuadEstimate { value: total, error: err });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.error.partial_cmp(&y.error).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let Panel { a: pa, b: pb, .. } = panels[worst];
        if panels.len() >= cfg.max_intervals || pb - pa < min_width {
            return Err(Error::Integration { estimate: err, tolerance: tol });
        }
        let mid = 0.5 * (pa + pb);
        panels[worst] = kronrod15(&f, pa, mid)?;
        panels.push(kronrod15(&f, mid, pb)?);
    }
}

/// Real-integrand wrapper around [`integrate_complex`].
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    splits: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadEstimate> {
    integrate_complex(|x| C64::new(f(x), 0.0), a, b, splits, cfg)
}

/// Cauchy principal value of ∫ f(x)/(x − pole) dx over [a, b].
///
/// A symmetric window (pole − ε, pole + ε) is excised for
/// ε ∈ {0.1, 0.05, 0.025}·pole and the ε → 0 limit is recovered by
/// fitting I(ε) = I₀ + c₁ε + c₃ε³, the error model of symmetric excision.
pub fn principal_value<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    pole: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    assert!(a < pole && pole < b, "pole must lie inside the interval");
    let eps: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|s| s * pole).collect();
    assert!(pole - eps[0] > a && pole + eps[0] < b);

    let mut vals = [0.0f64; 3];
    for (k, e) in eps.iter().enumerate() {
        let left = integrate(|x| f(x) / (x - pole), a, pole - e, &[], cfg)?;
        let right = integrate(|x| f(x) / (x - pole), pole + e, b, &[], cfg)?;
        vals[k] = left.value.re + right.value.re;
    }
    // solve the 3x3 system for I0 with basis {1, eps, eps^3}
    let (e0, e1, e2) = (eps[0], eps[1], eps[2]);
    let det = e1 * e2.powi(3) - e2 * e1.powi(3) - (e0 * e2.powi(3) - e2 * e0.powi(3))
        + e0 * e1.powi(3)
        - e1 * e0.powi(3);
    let i0 = (vals[0] * (e1 * e2.powi(3) - e2 * e1.powi(3))
        - vals[1] * (e0 * e2.powi(3) - e2 * e0.powi(3))
        + vals[2] * (e0 * e1.powi(3) - e1 * e0.powi(3)))
        / det;
    Ok(i0)
}

/// Composite Simpson over a uniform grid; the slice length must be odd
/// (an even number of panels).
pub fn composite_simpson(values: &[C64], h: f64) -> C64 {
    let n = values.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "composite Simpson needs an even panel count");
    let mut acc = values[0] + values[n];
    for (j, v) in values.iter().enumerate().take(n).skip(1) {
        acc += *v * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

/// Cumulative integral on a uniform grid, fourth order at every node.
/// Even nodes use composite Simpson; odd nodes close the half panel with
/// the three-point Newton–Cotes rule.
pub fn cumulative_simpson(values: &[C64], h: f64) -> Vec<C64> {
    let n = values.len();
    let mut out = vec![C64::ZERO; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = (values[0] + values[1]) * (h / 2.0);
        return out;
    }
    for j in 1..n {
        if j == 1 {
            out[1] = (values[0] * 5.0 + values[1] * 8.0 - values[2]) * (h / 12.0);
        } else if j.is_multiple_of(2) {
            out[j] = out[j - 2] + (values[j - 2] + values[j - 1] * 4.0 + values[j]) * (h / 3.0);
        } else {
            out[j] = out[j - 1] + (-values[j - 2] + values[j - 1] * 8.0 + values[j] * 5.0) * (h / 12.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let cfg = QuadConfig::default();
        let r = integrate(|x| x * x, 0.0, 1.0, &[], &cfg).unwrap();
        assert_abs_diff_eq!(r.value.re, 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn sine_integral() {
        let cfg = QuadConfig::default();
        let r = integrate(f64::sin, 0.0, std::f64::consts::PI, &[], &cfg).unwrap();
        assert_abs_diff_eq!(r.value.re, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn damped_oscillation() {
        // ∫₀^∞ e^{-x} cos(10x) dx = 1/101, tail beyond 40 is ~1e-18
        let cfg = QuadConfig::default();
        let r = integrate(|x| (-x).exp() * (10.0 * x).cos(), 0.0, 40.0, &[], &cfg).unwrap();
        assert_abs_diff_eq!(r.value.re, 1.0 / 101.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_exponential() {
        let cfg = QuadConfig::default();
        let r = integrate_complex(|x| C64::new(0.0, x).exp(), 0.0, 1.0, &[0.5], &cfg).unwrap();
        assert_abs_diff_eq!(r.value.re, 1.0f64.sin(), epsilon = 1e-13);
        assert_abs_diff_eq!(r.value.im, 1.0 - 1.0f64.cos(), epsilon = 1e-13);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let cfg = QuadConfig::default();
        let r = integrate(|x| 1.0 / x, -1.0, 1.0, &[], &cfg);
        assert!(matches!(r, Err(Error::Integration { .. })));
    }

    #[test]
    fn principal_value_symmetric_cancellation() {
        let cfg = QuadConfig::default();
        let v = principal_value(|_| 1.0, 0.0, 2.0, 1.0, &cfg).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn principal_value_with_smooth_numerator() {
        // P∫₀⁴ x/(x-1) dx = 4 + ln 3
        let cfg = QuadConfig::default();
        let v = principal_value(|x| x, 0.0, 4.0, 1.0, &cfg).unwrap();
        assert_abs_diff_eq!(v, 4.0 + 3.0f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn cumulative_simpson_matches_antiderivative() {
        let h = 0.01;
        let values: Vec<C64> = (0..=200).map(|k| C64::new((k as f64 * h).sin(), 0.0)).collect();
        let cum = cumulative_simpson(&values, h);
        for (k, c) in cum.iter().enumerate() {
            let t = k as f64 * h;
            assert_abs_diff_eq!(c.re, 1.0 - t.cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn composite_simpson_quartic_error() {
        let h: f64 = 0.05;
        let values: Vec<C64> = (0..=20).map(|k| C64::new((k as f64 * h).exp(), 0.0)).collect();
        let v = composite_simpson(&values, h);
        assert_abs_diff_eq!(v.re, 1.0f64.exp() - 1.0, epsilon = 1e-6);
    }
}
