//! The two reference models expressed as right-hand-side generators.
//!
//! A [`Generator`] wraps the full linear superoperator dρ/dt of a model.
//! Under [`Rule::Traditional`] it is applied to the live state. Under
//! [`Rule::Element`] the state is spliced first: every entry except the
//! selected one is replaced by its frozen initial value, which turns the
//! master equation into one uncoupled scalar equation per element.

use num_complex::Complex64 as C64;
use std::sync::Arc;

use crate::bath::{BathSpec, KernelTable};
use crate::linalg::{two_qubit_operators, ComplexMatrix, ElementIndex};
use crate::quad;
use crate::{Error, Result};

/// Which elements of the state the generator treats as live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// All elements live: the reference master equation.
    Traditional,
    /// Only the selected element is live; the rest stay frozen at the
    /// initial value supplied to [`Generator::eval`].
    Element(ElementIndex),
}

type RhsFn = dyn Fn(f64, &ComplexMatrix) -> Result<ComplexMatrix> + Send + Sync;

/// Time-dependent linear superoperator with an element-substitution rule.
#[derive(Clone)]
pub struct Generator {
    dim: usize,
    rule: Rule,
    rhs: Arc<RhsFn>,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    /// Same superoperator under a different substitution rule.
    pub fn with_rule(&self, rule: Rule) -> Self {
        Self { dim: self.dim, rule, rhs: Arc::clone(&self.rhs) }
    }

    /// dρ/dt at time `t`. `rho` carries the live data, `rho_init` the
    /// frozen data used by the element rule (ignored by the traditional
    /// rule).
    pub fn eval(&self, t: f64, rho: &ComplexMatrix, rho_init: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "generator dimension {} does not match state dimension {}",
                self.dim,
                rho.dim()
            )));
        }
        match self.rule {
            Rule::Traditional => (self.rhs)(t, rho),
            Rule::Element(idx) => {
                idx.validate(self.dim)?;
                if rho_init.dim() != self.dim {
                    return Err(Error::Dimension(format!(
                        "frozen state dimension {} does not match generator dimension {}",
                        rho_init.dim(),
                        self.dim
                    )));
                }
                let mut spliced = rho_init.clone();
                spliced[idx] = rho[idx];
                (self.rhs)(t, &spliced)
            }
        }
    }
}

/// Qubit relaxing in a thermal bath. The populations couple through
/// f±(t) and the coherence decays with the complex rate g(t).
#[derive(Debug, Clone, Copy)]
pub struct SingleQubitModel {
    pub bath: BathSpec,
}

impl SingleQubitModel {
    pub fn new(bath: BathSpec) -> Self {
        Self { bath }
    }

    /// Time-dependent generator reading f±, g from the kernel table.
    pub fn generator(&self, rule: Rule, kernels: Arc<KernelTable>) -> Generator {
        let rhs = move |t: f64, rho: &ComplexMatrix| -> Result<ComplexMatrix> {
            let (f_plus, f_minus) = kernels.f_kernels_at(t)?;
            let g = kernels.g_at(t)?;
            Ok(single_qubit_rhs(rho, f_plus, f_minus, g))
        };
        Generator { dim: 2, rule, rhs: Arc::new(rhs) }
    }

    /// Constant-coefficient generator at the t → ∞ kernel values.
    pub fn markov_generator(&self, rule: Rule) -> Result<Generator> {
        let lim = self.bath.markov_limits()?;
        let rhs = move |_t: f64, rho: &ComplexMatrix| -> Result<ComplexMatrix> {
            Ok(single_qubit_rhs(rho, lim.f_plus_inf, lim.f_minus_inf, lim.g_inf))
        };
        Ok(Generator { dim: 2, rule, rhs: Arc::new(rhs) })
    }
}

fn single_qubit_rhs(rho: &ComplexMatrix, f_plus: f64, f_minus: f64, g: C64) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(2);
    let gain = -f_plus * rho[(0, 0)] + f_minus * rho[(1, 1)];
    out[(0, 0)] = gain;
    out[(1, 1)] = -gain;
    out[(1, 0)] = -g * rho[(1, 0)];
    out[(0, 1)] = -g.conj() * rho[(0, 1)];
    out
}

/// Two dipole-coupled qubits radiating into a common bath. `alpha1` and
/// `alpha2` weight each qubit's coupling; `v` is the excitation-exchange
/// strength that dresses the coupling operator in the interaction picture.
#[derive(Debug, Clone, Copy)]
pub struct TwoQubitModel {
    pub bath: BathSpec,
    pub v: f64,
    pub alpha1: C64,
    pub alpha2: C64,
}

impl TwoQubitModel {
    pub fn new(bath: BathSpec, v: f64, alpha1: C64, alpha2: C64) -> Result<Self> {
        if !v.is_finite() || !alpha1.is_finite() || !alpha2.is_finite() {
            return Err(Error::Domain("two-qubit couplings must be finite".into()));
        }
        Ok(Self { bath, v, alpha1, alpha2 })
    }

    /// The interaction-picture coupling operator
    /// K(t) = (P₊¹R(α₂,−α₁) + P₋¹R(α₂,α₁))σ₊² + (P₊²R(α₁,−α₂) + P₋²R(α₁,α₂))σ₊¹
    /// with R(α,β) = α cos(tV) + iβ sin(tV).
    pub fn k_operator(&self, t: f64) -> ComplexMatrix {
        let ops = two_qubit_operators();
        let r = |alpha: C64, beta: C64| alpha * (t * self.v).cos() + C64::I * beta * (t * self.v).sin();
        let mut k = ops
            .proj_excited_1
            .scaled(r(self.alpha2, -self.alpha1))
            .add(&ops.proj_ground_1.scaled(r(self.alpha2, self.alpha1)))
            .matmul(&ops.sigma_plus_2);
        let second = ops
            .proj_excited_2
            .scaled(r(self.alpha1, -self.alpha2))
            .add(&ops.proj_ground_2.scaled(r(self.alpha1, self.alpha2)))
            .matmul(&ops.sigma_plus_1);
        k = k.add(&second);
        k
    }

    /// Memory-integral generator. `t_origin` is the lower limit of the
    /// memory integral (0 for the reference solver).
    pub fn generator(&self, rule: Rule, kernels: Arc<KernelTable>, t_origin: f64) -> Result<Generator> {
        let mem = TwoQubitMemory::tabulated(self, &kernels, t_origin)?;
        Ok(Generator { dim: 4, rule, rhs: Arc::new(move |t, rho: &ComplexMatrix| mem.rhs(t, rho)) })
    }

    /// Memoryless generator: the memory integral is extended to an
    /// infinite horizon, evaluated in the frequency domain.
    pub fn markov_generator(&self, rule: Rule) -> Result<Generator> {
        let mem = TwoQubitMemory::markovian(self)?;
        Ok(Generator { dim: 4, rule, rhs: Arc::new(move |t, rho: &ComplexMatrix| mem.rhs(t, rho)) })
    }
}

/// Scalar memory integrals ∫ C±(τ)·{cos, sin}(Vτ) dτ, either cumulative
/// on the kernel grid or at their infinite-horizon constants.
enum MemoryIntegrals {
    Tabulated { dt: f64, t_end: f64, cos_plus: Vec<C64>, sin_plus: Vec<C64>, cos_minus: Vec<C64>, sin_minus: Vec<C64> },
    Constant { cos_plus: C64, sin_plus: C64, cos_minus: C64, sin_minus: C64 },
}

struct TwoQubitMemory {
    v: f64,
    origin: f64,
    k_cos: ComplexMatrix,
    k_sin: ComplexMatrix,
    k_cos_dag: ComplexMatrix,
    k_sin_dag: ComplexMatrix,
    integrals: MemoryIntegrals,
}

impl TwoQubitMemory {
    fn operator_parts(model: &TwoQubitModel) -> (ComplexMatrix, ComplexMatrix) {
        let ops = two_qubit_operators();
        // K(t) = k_cos·cos(Vt) + k_sin·sin(Vt)
        let k_cos = ops
            .sigma_plus_1
            .scaled(model.alpha1)
            .add(&ops.sigma_plus_2.scaled(model.alpha2));
        let k_sin = ops
            .proj_ground_1
            .sub(&ops.proj_excited_1)
            .matmul(&ops.sigma_plus_2)
            .scaled(C64::I * model.alpha1)
            .add(
                &ops.proj_ground_2
                    .sub(&ops.proj_excited_2)
                    .matmul(&ops.sigma_plus_1)
                    .scaled(C64::I * model.alpha2),
            );
        (k_cos, k_sin)
    }

    fn tabulated(model: &TwoQubitModel, kernels: &KernelTable, t_origin: f64) -> Result<Self> {
        if t_origin < 0.0 {
            return Err(Error::Domain(format!("memory origin must be >= 0, got {t_origin}")));
        }
        let (k_cos, k_sin) = Self::operator_parts(model);
        let dt = kernels.dt();
        let v = model.v;
        let weight = |values: &[C64], f: fn(f64) -> f64| -> Vec<C64> {
            values
                .iter()
                .enumerate()
                .map(|(j, c)| c * f(v * j as f64 * dt))
                .collect()
        };
        let cos_plus = quad::cumulative_simpson(&weight(kernels.c_plus_values(), f64::cos), dt);
        let sin_plus = quad::cumulative_simpson(&weight(kernels.c_plus_values(), f64::sin), dt);
        let cos_minus = quad::cumulative_simpson(&weight(kernels.c_minus_values(), f64::cos), dt);
        let sin_minus = quad::cumulative_simpson(&weight(kernels.c_minus_values(), f64::sin), dt);
        Ok(Self {
            v,
            origin: t_origin,
            k_cos_dag: k_cos.adjoint(),
            k_sin_dag: k_sin.adjoint(),
            k_cos,
            k_sin,
            integrals: MemoryIntegrals::Tabulated {
                dt,
                t_end: kernels.t_end(),
                cos_plus,
                sin_plus,
                cos_minus,
                sin_minus,
            },
        })
    }

    fn markovian(model: &TwoQubitModel) -> Result<Self> {
        let (k_cos, k_sin) = Self::operator_parts(model);
        let v = model.v;
        let bath = &model.bath;
        let hp_pos = bath.half_fourier_plus(v)?;
        let hp_neg = bath.half_fourier_plus(-v)?;
        let hm_pos = bath.half_fourier_minus(v)?;
        let hm_neg = bath.half_fourier_minus(-v)?;
        let half_i = C64::new(0.0, -0.5); // 1/(2i)
        Ok(Self {
            v,
            origin: 0.0,
            k_cos_dag: k_cos.adjoint(),
            k_sin_dag: k_sin.adjoint(),
            k_cos,
            k_sin,
            integrals: MemoryIntegrals::Constant {
                cos_plus: (hp_pos + hp_neg) * 0.5,
                sin_plus: (hp_pos - hp_neg) * half_i,
                cos_minus: (hm_pos + hm_neg) * 0.5,
                sin_minus: (hm_pos - hm_neg) * half_i,
            },
        })
    }

    fn lookup(&self, span: f64) -> Result<(C64, C64, C64, C64)> {
        match &self.integrals {
            MemoryIntegrals::Constant { cos_plus, sin_plus, cos_minus, sin_minus } => {
                Ok((*cos_plus, *sin_plus, *cos_minus, *sin_minus))
            }
            MemoryIntegrals::Tabulated { dt, t_end, cos_plus, sin_plus, cos_minus, sin_minus } => {
                if span > t_end * (1.0 + 1e-12) + 1e-12 {
                    return Err(Error::Coverage { t: span, t_max: *t_end });
                }
                let s = span.clamp(0.0, *t_end);
                Ok((
                    interp(cos_plus, *dt, s),
                    interp(sin_plus, *dt, s),
                    interp(cos_minus, *dt, s),
                    interp(sin_minus, *dt, s),
                ))
            }
        }
    }

    fn rhs(&self, t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let span = t - self.origin;
        if span < -1e-12 {
            return Err(Error::Domain(format!(
                "generator evaluated at t = {t} before its memory origin {}",
                self.origin
            )));
        }
        let (icp, isp, icm, ism) = self.lookup(span.max(0.0))?;
        let (c, s) = ((self.v * t).cos(), (self.v * t).sin());

        // K(t), K†(t) and their quadrature companions at absolute time
        let k = self.k_cos.scaled(C64::new(c, 0.0)).add(&self.k_sin.scaled(C64::new(s, 0.0)));
        let k_dag = self.k_cos_dag.scaled(C64::new(c, 0.0)).add(&self.k_sin_dag.scaled(C64::new(s, 0.0)));
        let k_perp = self.k_cos.scaled(C64::new(s, 0.0)).sub(&self.k_sin.scaled(C64::new(c, 0.0)));
        let k_perp_dag =
            self.k_cos_dag.scaled(C64::new(s, 0.0)).sub(&self.k_sin_dag.scaled(C64::new(c, 0.0)));

        // emission memory A = ∫ C₊(t−t₁) K†(t₁) dt₁, absorption memory
        // B = ∫ C₋(t−t₁) K(t₁) dt₁, both reduced to the scalar integrals
        let a = k_dag.scaled(icp).add(&k_perp_dag.scaled(isp));
        let b = k.scaled(icm).add(&k_perp.scaled(ism));
        let a_dag = a.adjoint();
        let b_dag = b.adjoint();

        let a_rho = a.matmul(rho);
        let b_rho = b.matmul(rho);
        let mut out = a_rho.matmul(&k);
        out = out.sub(&k.matmul(&a_rho));
        out = out.add(&b_rho.matmul(&k_dag));
        out = out.sub(&k_dag.matmul(&b_rho));

        let kd_rho = k_dag.matmul(rho);
        let rho_ad = rho.matmul(&a_dag);
        out = out.add(&kd_rho.matmul(&a_dag));
        out = out.sub(&rho_ad.matmul(&k_dag));

        let k_rho = k.matmul(rho);
        let rho_bd = rho.matmul(&b_dag);
        out = out.add(&k_rho.matmul(&b_dag));
        out = out.sub(&rho_bd.matmul(&k));
        Ok(out)
    }
}

fn interp(values: &[C64], dt: f64, t: f64) -> C64 {
    // 4-point Lagrange, same scheme as the kernel table
    let n = values.len();
    if n < 4 {
        let u = (t / dt).min((n - 1) as f64);
        let k = (u.floor() as usize).min(n - 2);
        let s = u - k as f64;
        return values[k] * (1.0 - s) + values[k + 1] * s;
    }
    let u = t / dt;
    let cell = (u.floor() as usize).min(n - 2);
    let base = cell.saturating_sub(1).min(n - 4);
    let s = u - base as f64;
    let mut acc = C64::ZERO;
    for i in 0..4 {
        let mut w = 1.0;
        for j in 0..4 {
            if i != j {
                w *= (s - j as f64) / (i as f64 - j as f64);
            }
        }
        acc += values[base + i] * w;
    }
    acc
}
