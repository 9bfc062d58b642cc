//! Ohmic spectral density and the bath time kernels derived from it.
//!
//! All kernels are frequency integrals over J(ω) = λ ω exp(−ω/Ω) weighted
//! by the thermal factor coth(βω/2) ± 1:
//!
//! - `f_kernels`: f±(t) = ∫ J (coth ± 1) sin[(ω−ω₀)t]/(ω−ω₀) dω, the
//!   population decay and excitation rates of the single-qubit model;
//! - `g_kernel`: the complex coherence decay rate, whose real part equals
//!   (f₊ + f₋)/2 and whose imaginary part is the frequency-shift integral;
//! - `correlation_kernels`: the emission/absorption correlation functions
//!   C±(τ) entering the two-qubit memory integral, related to the above by
//!   f±′(t) = 2 Re C±(t) and g′(t) = C₋(t) + conj C₊(t).
//!
//! Integrals run over [0, 40Ω]; the Ohmic tail beyond that is below 1e−15
//! relative. The integrand at ω = ω₀ is removable and is evaluated by its
//! series limit; the adaptive quadrature is forced to split there.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::io::Write;

use crate::quad::{self, QuadConfig};
use crate::{Error, Result};

/// Ohmic bath parameters plus the system transition frequency entering
/// the kernels. λ = 0 is allowed and makes every kernel vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub lambda: f64,
    pub omega_c: f64,
    pub omega0: f64,
    pub beta: f64,
}

/// t → ∞ kernel values: the memoryless (Markovian) rates.
#[derive(Debug, Clone, Copy)]
pub struct MarkovLimits {
    pub f_plus_inf: f64,
    pub f_minus_inf: f64,
    pub g_inf: C64,
}

impl BathSpec {
    pub fn new(lambda: f64, omega_c: f64, omega0: f64, beta: f64) -> Result<Self> {
        if lambda.is_nan() || lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
        }
        for (name, v) in [("omega_c", omega_c), ("omega0", omega0), ("beta", beta)] {
            if v.is_nan() || v <= 0.0 || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self { lambda, omega_c, omega0, beta })
    }

    /// J(ω) = λ ω exp(−ω/Ω).
    pub fn spectral_density(&self, omega: f64) -> Result<f64> {
        if omega < 0.0 {
            return Err(Error::Domain(format!("spectral density needs omega >= 0, got {omega}")));
        }
        Ok(self.j(omega))
    }

    fn j(&self, omega: f64) -> f64 {
        self.lambda * omega * (-omega / self.omega_c).exp()
    }

    /// J(ω) coth(βω/2); the ω → 0 limit 2λ/β is substituted below βω = 1e−4
    /// where the direct product would lose digits.
    pub(crate) fn j_coth(&self, omega: f64) -> f64 {
        if self.beta * omega < 1e-4 {
            2.0 * self.lambda / self.beta * (-omega / self.omega_c).exp()
        } else {
            self.j(omega) / (0.5 * self.beta * omega).tanh()
        }
    }

    /// J (coth + 1)/2, the emission weight.
    pub(crate) fn phi_plus(&self, omega: f64) -> f64 {
        0.5 * (self.j_coth(omega) + self.j(omega))
    }

    /// J (coth − 1)/2, the absorption weight.
    pub(crate) fn phi_minus(&self, omega: f64) -> f64 {
        0.5 * (self.j_coth(omega) - self.j(omega))
    }

    /// Upper integration limit; the tail of J beyond contributes < 1e−15.
    pub fn omega_max(&self) -> f64 {
        40.0 * self.omega_c
    }

    fn quad_config(&self) -> QuadConfig {
        // long-time kernels are heavily oscillatory; allow deep refinement
        QuadConfig { max_intervals: 20_000, ..QuadConfig::default() }
    }

    /// f₊(t), f₋(t). Both vanish at t = 0.
    pub fn f_kernels(&self, t: f64) -> Result<(f64, f64)> {
        if t < 0.0 {
            return Err(Error::Domain(format!("kernel time must be >= 0, got {t}")));
        }
        if t == 0.0 || self.lambda == 0.0 {
            return Ok((0.0, 0.0));
        }
        let w0 = self.omega0;
        // one adaptive pass: re holds the coth part, im the ±1 part
        let est = quad::integrate_complex(
            |w| C64::new(self.j_coth(w), self.j(w)) * sinc_kernel(w - w0, t),
            0.0,
            self.omega_max(),
            &[w0],
            &self.quad_config(),
        )?;
        Ok((est.value.re + est.value.im, est.value.re - est.value.im))
    }

    /// Complex coherence decay rate g(t); g(0) = 0.
    pub fn g_kernel(&self, t: f64) -> Result<C64> {
        if t < 0.0 {
            return Err(Error::Domain(format!("kernel time must be >= 0, got {t}")));
        }
        if t == 0.0 || self.lambda == 0.0 {
            return Ok(C64::ZERO);
        }
        let w0 = self.omega0;
        let est = quad::integrate_complex(
            |w| {
                let x = w - w0;
                C64::new(self.j_coth(w) * sinc_kernel(x, t), self.j_coth(w) * versine_kernel(x, t))
            },
            0.0,
            self.omega_max(),
            &[w0],
            &self.quad_config(),
        )?;
        Ok(est.value)
    }

    /// C₊(τ), C₋(τ): the emission and absorption correlation kernels.
    pub fn correlation_kernels(&self, tau: f64) -> Result<(C64, C64)> {
        if tau < 0.0 {
            return Err(Error::Domain(format!("kernel time must be >= 0, got {tau}")));
        }
        if self.lambda == 0.0 {
            return Ok((C64::ZERO, C64::ZERO));
        }
        let w0 = self.omega0;
        let cfg = self.quad_config();
        let c_plus = quad::integrate_complex(
            |w| C64::from_polar(self.phi_plus(w), (w0 - w) * tau),
            0.0,
            self.omega_max(),
            &[w0],
            &cfg,
        )?;
        let c_minus = quad::integrate_complex(
            |w| C64::from_polar(self.phi_minus(w), -(w0 - w) * tau),
            0.0,
            self.omega_max(),
            &[w0],
            &cfg,
        )?;
        Ok((c_plus.value, c_minus.value))
    }

    /// f±(∞) = π J(ω₀)(coth(βω₀/2) ± 1) and the complex g(∞), whose
    /// imaginary part is the principal-value shift integral.
    pub fn markov_limits(&self) -> Result<MarkovLimits> {
        if self.lambda == 0.0 {
            return Ok(MarkovLimits { f_plus_inf: 0.0, f_minus_inf: 0.0, g_inf: C64::ZERO });
        }
        let w0 = self.omega0;
        if w0 >= 0.9 * self.omega_max() {
            return Err(Error::Domain(format!(
                "omega0 = {w0} lies outside the integration domain [0, {}]",
                self.omega_max()
            )));
        }
        let jc = self.j_coth(w0);
        let f_plus_inf = PI * (jc + self.j(w0));
        let f_minus_inf = PI * (jc - self.j(w0));
        let shift =
            quad::principal_value(|w| self.j_coth(w), 0.0, self.omega_max(), w0, &self.quad_config())?;
        Ok(MarkovLimits { f_plus_inf, f_minus_inf, g_inf: C64::new(PI * jc, shift) })
    }

    /// ∫₀^∞ C₊(τ) e^{iaτ} dτ, evaluated in the frequency domain:
    /// π φ₊(ω₀+a) plus i times the principal-value integral of
    /// φ₊(ω)/(ω₀+a−ω). Finite for every real shift a.
    pub fn half_fourier_plus(&self, shift: f64) -> Result<C64> {
        self.half_fourier(shift, true)
    }

    /// ∫₀^∞ C₋(τ) e^{iaτ} dτ = π φ₋(ω₀−a) + i PV ∫ φ₋(ω)/(ω−ω₀+a) dω.
    pub fn half_fourier_minus(&self, shift: f64) -> Result<C64> {
        self.half_fourier(shift, false)
    }

    fn half_fourier(&self, shift: f64, plus: bool) -> Result<C64> {
        if self.lambda == 0.0 {
            return Ok(C64::ZERO);
        }
        let phi = |w: f64| if plus { self.phi_plus(w) } else { self.phi_minus(w) };
        // pole of the time integral in the frequency variable
        let pole = if plus { self.omega0 + shift } else { self.omega0 - shift };
        // sign of (ω − pole) in the PV denominator after normalization
        let denom_sign = if plus { -1.0 } else { 1.0 };
        let cfg = self.quad_config();
        let wmax = self.omega_max();
        if pole <= 0.0 {
            let est = quad::integrate(|w| phi(w) / (denom_sign * (w - pole)), 0.0, wmax, &[], &cfg)?;
            return Ok(C64::new(0.0, est.value.re));
        }
        if pole >= 0.9 * wmax {
            return Err(Error::Domain(format!(
                "half-Fourier pole {pole} lies outside the integration domain [0, {wmax}]"
            )));
        }
        let pv = quad::principal_value(phi, 0.0, wmax, pole, &cfg)?;
        Ok(C64::new(PI * phi(pole), denom_sign * pv))
    }
}

/// sin(x t)/x with the x → 0 limit t.
fn sinc_kernel(x: f64, t: f64) -> f64 {
    let xt = x * t;
    if xt.abs() < 1e-4 {
        t * (1.0 - xt * xt / 6.0)
    } else {
        xt.sin() / x
    }
}

/// (1 − cos(x t))/x with the x → 0 limit 0.
fn versine_kernel(x: f64, t: f64) -> f64 {
    let xt = x * t;
    if xt.abs() < 1e-4 {
        x * t * t * 0.5 * (1.0 - xt * xt / 12.0)
    } else {
        (1.0 - xt.cos()) / x
    }
}

/// All five kernels tabulated on a uniform time grid with cubic
/// interpolation between nodes.
///
/// C±(τ) are evaluated by adaptive quadrature at every node; f±(t) and
/// g(t) are their cumulative time integrals (the identities
/// f±′ = 2 Re C± and g′ = C₋ + conj C₊ hold exactly), accumulated with a
/// fourth-order rule on the same grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    spec: BathSpec,
    dt: f64,
    times: Vec<f64>,
    f_plus: Vec<f64>,
    f_minus: Vec<f64>,
    g: Vec<C64>,
    c_plus: Vec<C64>,
    c_minus: Vec<C64>,
    warnings: Vec<String>,
}

impl KernelTable {
    /// Tabulates on [0, n·dt_kernel] with n = ⌈t_max/dt_kernel⌉.
    ///
    /// Beyond λt = 20 the oscillatory quadratures are not chased: once
    /// f± sit within 1e−4 of their Markov limits on three consecutive
    /// nodes, the remaining f±/g nodes are filled with those limits.
    pub fn build(spec: BathSpec, t_max: f64, dt_kernel: f64) -> Result<Self> {
        if t_max.is_nan() || t_max <= 0.0 {
            return Err(Error::Domain(format!("t_max must be > 0, got {t_max}")));
        }
        if dt_kernel.is_nan() || dt_kernel <= 0.0 || dt_kernel > t_max {
            return Err(Error::Domain(format!(
                "dt_kernel must satisfy 0 < dt_kernel <= t_max, got {dt_kernel}"
            )));
        }
        let n = ((t_max / dt_kernel) - 1e-9).ceil().max(1.0) as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt_kernel).collect();

        let guard_start = if spec.lambda > 0.0 { 20.0 / spec.lambda } else { f64::INFINITY };
        let limits = if times[n] > guard_start { Some(spec.markov_limits()?) } else { None };

        let mut c_plus = Vec::with_capacity(n + 1);
        let mut c_minus = Vec::with_capacity(n + 1);
        for (k, &t) in times.iter().enumerate() {
            let (cp, cm) = spec
                .correlation_kernels(t)
                .map_err(|e| Error::KernelBuild { index: k, t, source: Box::new(e) })?;
            c_plus.push(cp);
            c_minus.push(cm);
        }

        let f_plus_c = quad::cumulative_simpson(
            &c_plus.iter().map(|c| C64::new(2.0 * c.re, 0.0)).collect::<Vec<_>>(),
            dt_kernel,
        );
        let f_minus_c = quad::cumulative_simpson(
            &c_minus.iter().map(|c| C64::new(2.0 * c.re, 0.0)).collect::<Vec<_>>(),
            dt_kernel,
        );
        let g = {
            let integrand: Vec<C64> =
                c_plus.iter().zip(&c_minus).map(|(cp, cm)| cm + cp.conj()).collect();
            quad::cumulative_simpson(&integrand, dt_kernel)
        };
        let mut f_plus: Vec<f64> = f_plus_c.iter().map(|z| z.re).collect();
        let mut f_minus: Vec<f64> = f_minus_c.iter().map(|z| z.re).collect();
        let mut g = g;

        let mut warnings = Vec::new();
        if let Some(lim) = limits {
            if let Some(k0) = markov_switch_index(&times, &f_plus, &f_minus, &lim, guard_start) {
                for k in k0..=n {
                    f_plus[k] = lim.f_plus_inf;
                    f_minus[k] = lim.f_minus_inf;
                    g[k] = lim.g_inf;
                }
                warnings.push(format!(
                    "f/g kernels switched to Markov limits from t = {} (grid index {k0})",
                    times[k0]
                ));
            }
        }

        for k in 0..=n {
            if f_minus[k] < -1e-10 || f_plus[k] - f_minus[k] < -1e-10 {
                warnings.push(format!(
                    "kernel ordering f_plus >= f_minus >= 0 violated at t = {}: f_plus = {:.6e}, f_minus = {:.6e}",
                    times[k], f_plus[k], f_minus[k]
                ));
            }
        }

        Ok(Self { spec, dt: dt_kernel, times, f_plus, f_minus, g, c_plus, c_minus, warnings })
    }

    pub fn spec(&self) -> &BathSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn c_plus_values(&self) -> &[C64] {
        &self.c_plus
    }

    pub fn c_minus_values(&self) -> &[C64] {
        &self.c_minus
    }

    fn coverage(&self, t: f64) -> Result<f64> {
        let end = self.t_end();
        if t < -1e-12 || t > end * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::Coverage { t, t_max: end });
        }
        Ok(t.clamp(0.0, end))
    }

    pub fn f_kernels_at(&self, t: f64) -> Result<(f64, f64)> {
        let t = self.coverage(t)?;
        Ok((interp_real(&self.f_plus, self.dt, t), interp_real(&self.f_minus, self.dt, t)))
    }

    pub fn f_plus_at(&self, t: f64) -> Result<f64> {
        Ok(self.f_kernels_at(t)?.0)
    }

    pub fn f_minus_at(&self, t: f64) -> Result<f64> {
        Ok(self.f_kernels_at(t)?.1)
    }

    pub fn g_at(&self, t: f64) -> Result<C64> {
        let t = self.coverage(t)?;
        Ok(interp_complex(&self.g, self.dt, t))
    }

    pub fn c_plus_at(&self, tau: f64) -> Result<C64> {
        let tau = self.coverage(tau)?;
        Ok(interp_complex(&self.c_plus, self.dt, tau))
    }

    pub fn c_minus_at(&self, tau: f64) -> Result<C64> {
        let tau = self.coverage(tau)?;
        Ok(interp_complex(&self.c_minus, self.dt, tau))
    }

    /// Dumps the table as CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,f_plus,f_minus,g_re,g_im,cplus_re,cplus_im,cminus_re,cminus_im")?;
        for k in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                fmt17(self.times[k]),
                fmt17(self.f_plus[k]),
                fmt17(self.f_minus[k]),
                fmt17(self.g[k].re),
                fmt17(self.g[k].im),
                fmt17(self.c_plus[k].re),
                fmt17(self.c_plus[k].im),
                fmt17(self.c_minus[k].re),
                fmt17(self.c_minus[k].im)
            )?;
        }
        Ok(())
    }
}

/// 17-significant-digit formatting used by every CSV writer.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// First grid index past `guard_start` from which f± have sat within 1e−4
/// of their Markov limits on three consecutive nodes, counted back so that
/// the fill starts at the first of the three.
fn markov_switch_index(
    times: &[f64],
    f_plus: &[f64],
    f_minus: &[f64],
    lim: &MarkovLimits,
    guard_start: f64,
) -> Option<usize> {
    let mut stable = 0usize;
    for (k, &t) in times.iter().enumerate() {
        if t <= guard_start {
            continue;
        }
        let near = (f_plus[k] - lim.f_plus_inf).abs() < 1e-4
            && (f_minus[k] - lim.f_minus_inf).abs() < 1e-4;
        stable = if near { stable + 1 } else { 0 };
        if stable == 3 {
            return Some(k - 2);
        }
    }
    None
}

fn stencil(len: usize, dt: f64, t: f64) -> (usize, [f64; 4]) {
    // 4-point Lagrange interpolation on a uniform grid
    let u = t / dt;
    let cell = (u.floor() as usize).min(len - 2);
    let base = cell.saturating_sub(1).min(len - 4);
    let s = u - base as f64;
    let mut w = [0.0; 4];
    for (i, wi) in w.iter_mut().enumerate() {
        let mut acc = 1.0;
        for j in 0..4 {
            if i != j {
                acc *= (s - j as f64) / (i as f64 - j as f64);
            }
        }
        *wi = acc;
    }
    (base, w)
}

fn interp_real(values: &[f64], dt: f64, t: f64) -> f64 {
    if values.len() < 4 {
        // tiny tables fall back to linear interpolation
        let u = (t / dt).min((values.len() - 1) as f64);
        let k = (u.floor() as usize).min(values.len() - 2);
        let s = u - k as f64;
        return values[k] * (1.0 - s) + values[k + 1] * s;
    }
    let (base, w) = stencil(values.len(), dt, t);
    (0..4).map(|i| w[i] * values[base + i]).sum()
}

fn interp_complex(values: &[C64], dt: f64, t: f64) -> C64 {
    if values.len() < 4 {
        let u = (t / dt).min((values.len() - 1) as f64);
        let k = (u.floor() as usize).min(values.len() - 2);
        let s = u - k as f64;
        return values[k] * (1.0 - s) + values[k + 1] * s;
    }
    let (base, w) = stencil(values.len(), dt, t);
    (0..4).map(|i| values[base + i] * w[i]).sum()
}
