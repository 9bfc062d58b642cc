//! The solver families.
//!
//! `solve_traditional` integrates the full time-local master equation with
//! classical fixed-step fourth-order Runge–Kutta and serves as the
//! reference. `solve_element_interval` solves one element's scalar
//! equation in closed quadrature form over one interval, and
//! `solve_iterative` chains those solutions across restart intervals,
//! re-freezing the remaining elements at each boundary. `solve_markov`
//! reuses the Runge–Kutta path with memoryless generators.
//!
//! Unit trace is enforced structurally: the reconstruction closes the last
//! diagonal as 1 minus the rest. The raw, pre-closure trace of every step
//! is recorded in the trajectory as the drift diagnostic.

use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

use crate::linalg::{canonical_element_set, ComplexMatrix, DensityMatrix, ElementIndex};
use crate::models::{Generator, Rule};
use crate::quad;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Traditional,
    ElementIterative,
    Markov,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Traditional => "traditional",
            Method::ElementIterative => "element_iterative",
            Method::Markov => "markov",
        }
    }
}

/// Fixed-step solver settings. `dt` is the inner sub-step, `restart_step`
/// the sampling and re-freezing interval; the two must tile exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub restart_step: f64,
    pub t_final: f64,
    pub renormalize_trace: bool,
    pub method: Method,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt.is_nan() || self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.dt > self.restart_step * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "dt = {} exceeds restart_step = {}",
                self.dt, self.restart_step
            )));
        }
        if self.restart_step > self.t_final * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "restart_step = {} exceeds t_final = {}",
                self.restart_step, self.t_final
            )));
        }
        let ratio = self.restart_step / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::Config(format!(
                "restart_step/dt = {ratio} is not a positive integer; sub-steps must tile the interval"
            )));
        }
        Ok(())
    }

    /// Sample times: every restart multiple, plus t_final when the last
    /// interval is partial.
    fn boundaries(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let n_full = (self.t_final / self.restart_step + 1e-9).floor() as usize;
        for k in 1..=n_full {
            out.push(k as f64 * self.restart_step);
        }
        if self.t_final - out.last().unwrap() > 1e-9 * self.restart_step {
            out.push(self.t_final);
        }
        out
    }
}

/// Time-ordered solver output: states at every sample time together with
/// the raw (pre-closure) trace and the canonical element series.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    traces: Vec<C64>,
    elements: BTreeMap<ElementIndex, Vec<C64>>,
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            traces: Vec::new(),
            elements: canonical_element_set(dim).into_iter().map(|i| (i, Vec::new())).collect(),
        }
    }

    fn push(&mut self, t: f64, state: DensityMatrix, raw_trace: C64) {
        for (idx, series) in self.elements.iter_mut() {
            series.push(state.matrix()[*idx]);
        }
        self.times.push(t);
        self.states.push(state);
        self.traces.push(raw_trace);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn raw_traces(&self) -> &[C64] {
        &self.traces
    }

    pub fn element_series(&self, idx: ElementIndex) -> Option<&[C64]> {
        self.elements.get(&idx).map(|v| v.as_slice())
    }

    pub fn element_indices(&self) -> impl Iterator<Item = ElementIndex> + '_ {
        self.elements.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory is never empty")
    }

    /// Largest |Tr − 1| along the trajectory.
    pub fn max_trace_drift(&self) -> f64 {
        self.traces.iter().map(|tr| (tr - C64::ONE).norm()).fold(0.0, f64::max)
    }

    /// Per-step |Tr − 1|; index k is the drift accumulated over step k.
    pub fn step_drifts(&self) -> Vec<f64> {
        self.traces.iter().skip(1).map(|tr| (tr - C64::ONE).norm()).collect()
    }
}

fn rk4_step(gen: &Generator, t: f64, h: f64, state: &ComplexMatrix) -> Result<ComplexMatrix> {
    let half = C64::new(h / 2.0, 0.0);
    let k1 = gen.eval(t, state, state)?;
    let mut s = state.clone();
    s.add_scaled(&k1, half);
    let k2 = gen.eval(t + h / 2.0, &s, state)?;
    let mut s = state.clone();
    s.add_scaled(&k2, half);
    let k3 = gen.eval(t + h / 2.0, &s, state)?;
    let mut s = state.clone();
    s.add_scaled(&k3, C64::new(h, 0.0));
    let k4 = gen.eval(t + h, &s, state)?;

    let mut out = state.clone();
    out.add_scaled(&k1, C64::new(h / 6.0, 0.0));
    out.add_scaled(&k2, C64::new(h / 3.0, 0.0));
    out.add_scaled(&k3, C64::new(h / 3.0, 0.0));
    out.add_scaled(&k4, C64::new(h / 6.0, 0.0));
    Ok(out)
}

fn integrate_fixed_grid(gen: &Generator, rho0: &DensityMatrix, cfg: &SolverConfig) -> Result<Trajectory> {
    let mut traj = Trajectory::new(gen.dim());
    let mut state = rho0.matrix().clone();
    traj.push(0.0, rho0.clone(), state.trace());

    let boundaries = cfg.boundaries();
    for pair in boundaries.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let n_sub = ((b - a) / cfg.dt).round().max(1.0) as usize;
        let h = (b - a) / n_sub as f64;
        for j in 0..n_sub {
            let t = a + j as f64 * h;
            state = rk4_step(gen, t, h, &state)?;
            if !state.is_finite() {
                return Err(Error::Divergence { t: t + h });
            }
        }
        let raw_trace = state.trace();
        traj.push(b, DensityMatrix::from_matrix(state.clone())?, raw_trace);
    }
    Ok(traj)
}

/// Reference solver: fixed-step fourth-order integration of the
/// traditional time-local master equation.
pub fn solve_traditional(gen: &Generator, rho0: &DensityMatrix, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.method != Method::Traditional {
        return Err(Error::Config("solve_traditional needs method = traditional".into()));
    }
    if gen.rule() != Rule::Traditional {
        return Err(Error::Config("solve_traditional needs a traditional-rule generator".into()));
    }
    integrate_fixed_grid(gen, rho0, cfg)
}

/// Constant/memoryless-coefficient run, same integrator as the reference.
pub fn solve_markov(gen: &Generator, rho0: &DensityMatrix, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.method != Method::Markov {
        return Err(Error::Config("solve_markov needs method = markov".into()));
    }
    if gen.rule() != Rule::Traditional {
        return Err(Error::Config("solve_markov needs a traditional-rule generator".into()));
    }
    integrate_fixed_grid(gen, rho0, cfg)
}

/// Closed quadrature solution of one element's scalar equation on
/// [t_start, t_end] with every other element frozen at `rho_init`:
///
/// ρ_idx(t_end) = e^{M(t_end)} ρ_idx(t_start)
///              + ∫ e^{M(t_end) − M(s)} ℐ(s) ds,  M(s) = ∫ 𝒦 ds′,
///
/// where 𝒦 is the coefficient of the live element and ℐ collects the
/// frozen terms. Inner integrals use composite Simpson on the dt sub-grid.
pub fn solve_element_interval(
    gen: &Generator,
    idx: ElementIndex,
    rho_init: &DensityMatrix,
    t_start: f64,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<C64> {
    if gen.rule() != Rule::Element(idx) {
        return Err(Error::Config(
            "solve_element_interval needs a generator built with the matching element rule".into(),
        ));
    }
    if t_start.is_nan() || t_end.is_nan() || t_start >= t_end {
        return Err(Error::Domain(format!("interval must satisfy t_start < t_end, got [{t_start}, {t_end}]")));
    }
    let dim = gen.dim();
    idx.validate(dim)?;

    let m = (((t_end - t_start) / cfg.dt).round() as usize).max(1);
    let nodes = 2 * m;
    let h = (t_end - t_start) / nodes as f64;

    let unit = crate::linalg::elementary_matrix(idx, dim)?;
    let zero = ComplexMatrix::zeros(dim);

    let mut live_coeff = Vec::with_capacity(nodes + 1);
    let mut inhomogeneity = Vec::with_capacity(nodes + 1);
    for j in 0..=nodes {
        let t = t_start + j as f64 * h;
        live_coeff.push(gen.eval(t, &unit, &zero)?[idx]);
        inhomogeneity.push(gen.eval(t, &zero, rho_init.matrix())?[idx]);
    }

    let exponent = quad::cumulative_simpson(&live_coeff, h);
    let m_end = exponent[nodes];
    let weighted: Vec<C64> = (0..=nodes)
        .map(|j| (m_end - exponent[j]).exp() * inhomogeneity[j])
        .collect();
    let source = quad::composite_simpson(&weighted, h);

    let result = m_end.exp() * rho_init.matrix()[idx] + source;
    if !result.re.is_finite() || !result.im.is_finite() {
        return Err(Error::Divergence { t: t_end });
    }
    Ok(result)
}

/// Piecewise element propagation: on each restart interval every canonical
/// element (plus the redundant last diagonal, kept for the raw-trace
/// diagnostic) is solved with the others frozen at the interval start,
/// then the state is rebuilt.
///
/// With `renormalize_trace` unset the rebuild closes the last diagonal to
/// enforce unit trace; set, the raw diagonal values are divided by their
/// raw sum instead.
pub fn solve_iterative(gen: &Generator, rho0: &DensityMatrix, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.method != Method::ElementIterative {
        return Err(Error::Config("solve_iterative needs method = element_iterative".into()));
    }
    let dim = gen.dim();
    let canonical = canonical_element_set(dim);
    let last_diag = ElementIndex::new(dim - 1, dim - 1);
    let sub_cfg = SolverConfig { ..*cfg };

    let mut traj = Trajectory::new(dim);
    let mut state = rho0.clone();
    traj.push(0.0, state.clone(), state.trace());

    let boundaries = cfg.boundaries();
    for pair in boundaries.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mut raw: BTreeMap<ElementIndex, C64> = BTreeMap::new();
        for idx in canonical.iter().copied().chain(std::iter::once(last_diag)) {
            let value =
                solve_element_interval(&gen.with_rule(Rule::Element(idx)), idx, &state, a, b, &sub_cfg)?;
            raw.insert(idx, value);
        }
        let raw_trace: C64 = (0..dim).map(|i| raw[&ElementIndex::new(i, i)]).sum();

        state = if cfg.renormalize_trace {
            rebuild_renormalized(&raw, raw_trace, dim)?
        } else {
            let canonical_map: BTreeMap<ElementIndex, C64> =
                canonical.iter().map(|idx| (*idx, raw[idx])).collect();
            crate::linalg::reconstruct(&canonical_map, dim)?
        };
        traj.push(b, state.clone(), raw_trace);
    }
    Ok(traj)
}

fn rebuild_renormalized(
    raw: &BTreeMap<ElementIndex, C64>,
    raw_trace: C64,
    dim: usize,
) -> Result<DensityMatrix> {
    if raw_trace.norm() < 1e-12 {
        return Err(Error::Divergence { t: f64::NAN });
    }
    let mut m = ComplexMatrix::zeros(dim);
    for (idx, value) in raw {
        if idx.is_diagonal() {
            if value.im.abs() > crate::linalg::HERMITICITY_TOL {
                return Err(Error::NonRealDiagonal { imag: value.im });
            }
            m[*idx] = C64::new(value.re / raw_trace.re, 0.0);
        } else {
            m[*idx] = *value;
            m[(idx.col, idx.row)] = value.conj();
        }
    }
    // force exact closure against rounding in the division
    let partial: f64 = (0..dim - 1).map(|i| m[(i, i)].re).sum();
    m[(dim - 1, dim - 1)] = C64::new(1.0 - partial, 0.0);
    DensityMatrix::from_matrix(m)
}

/// Deviation report between two trajectories on the same time grid.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub per_element_max_dev: BTreeMap<ElementIndex, f64>,
    pub max_abs_deviation: f64,
    pub final_time_deviation: f64,
    pub max_trace_drift_a: f64,
    pub max_trace_drift_b: f64,
}

pub fn compare(a: &Trajectory, b: &Trajectory) -> Result<CompareReport> {
    if a.len() != b.len()
        || a.times()
            .iter()
            .zip(b.times())
            .any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0))
    {
        return Err(Error::GridMismatch);
    }
    let keys_a: Vec<_> = a.element_indices().collect();
    let keys_b: Vec<_> = b.element_indices().collect();
    if keys_a != keys_b {
        return Err(Error::GridMismatch);
    }

    let mut per_element = BTreeMap::new();
    let mut overall: f64 = 0.0;
    let mut final_dev: f64 = 0.0;
    for idx in keys_a {
        let sa = a.element_series(idx).unwrap();
        let sb = b.element_series(idx).unwrap();
        let max_dev = sa.iter().zip(sb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let last = (sa.last().unwrap() - sb.last().unwrap()).norm();
        per_element.insert(idx, max_dev);
        overall = overall.max(max_dev);
        final_dev = final_dev.max(last);
    }
    Ok(CompareReport {
        per_element_max_dev: per_element,
        max_abs_deviation: overall,
        final_time_deviation: final_dev,
        max_trace_drift_a: a.max_trace_drift(),
        max_trace_drift_b: b.max_trace_drift(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{BathSpec, KernelTable};
    use crate::models::{SingleQubitModel, TwoQubitModel};
    use approx::assert_abs_diff_eq;
    use std::sync::{Arc, OnceLock};

    fn fig1_bath() -> BathSpec {
        BathSpec::new(1.0, 10.0, 2.0, 0.3).unwrap()
    }

    fn short_table() -> Arc<KernelTable> {
        static TABLE: OnceLock<Arc<KernelTable>> = OnceLock::new();
        Arc::clone(TABLE.get_or_init(|| Arc::new(KernelTable::build(fig1_bath(), 1.2, 0.0025).unwrap())))
    }

    fn cfg(method: Method) -> SolverConfig {
        SolverConfig { dt: 0.005, restart_step: 0.05, t_final: 1.0, renormalize_trace: false, method }
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(Method::Traditional);
        assert!(c.validate().is_ok());
        c.dt = 0.04;
        assert!(c.validate().is_err()); // 0.05/0.04 does not tile
        c.dt = 0.06;
        assert!(c.validate().is_err()); // dt > restart_step
        c = cfg(Method::Traditional);
        c.restart_step = 2.0;
        assert!(c.validate().is_err()); // restart_step > t_final
        c = cfg(Method::Traditional);
        c.t_final = 1.03; // partial last interval is fine
        assert!(c.validate().is_ok());
        assert_eq!(c.boundaries().len(), 22);
    }

    #[test]
    fn zero_coupling_keeps_state_constant() {
        let bath = BathSpec::new(0.0, 10.0, 2.0, 0.3).unwrap();
        let table = Arc::new(KernelTable::build(bath, 1.0, 0.01).unwrap());
        let model = SingleQubitModel::new(bath);
        let rho0 = DensityMatrix::from_matrix(ComplexMatrix::from_rows(&[
            &[C64::new(0.7, 0.0), C64::new(0.1, -0.2)],
            &[C64::new(0.1, 0.2), C64::new(0.3, 0.0)],
        ]))
        .unwrap();

        let gen = model.generator(Rule::Traditional, Arc::clone(&table));
        let traj = solve_traditional(&gen, &rho0, &cfg(Method::Traditional)).unwrap();
        for state in traj.states() {
            assert!(state.matrix().max_abs_diff(rho0.matrix()) < 1e-14);
        }

        let traj = solve_iterative(&gen, &rho0, &cfg(Method::ElementIterative)).unwrap();
        for state in traj.states() {
            assert!(state.matrix().max_abs_diff(rho0.matrix()) < 1e-14);
        }
    }

    #[test]
    fn frozen_interval_returns_initial_value() {
        let bath = BathSpec::new(0.0, 10.0, 2.0, 0.3).unwrap();
        let table = Arc::new(KernelTable::build(bath, 1.0, 0.01).unwrap());
        let gen = SingleQubitModel::new(bath)
            .generator(Rule::Element(ElementIndex::new(1, 0)), table);
        let rho0 = DensityMatrix::from_matrix(ComplexMatrix::from_rows(&[
            &[C64::new(0.6, 0.0), C64::new(0.0, -0.25)],
            &[C64::new(0.0, 0.25), C64::new(0.4, 0.0)],
        ]))
        .unwrap();
        let v = solve_element_interval(
            &gen,
            ElementIndex::new(1, 0),
            &rho0,
            0.0,
            0.3,
            &cfg(Method::ElementIterative),
        )
        .unwrap();
        assert_eq!(v, C64::new(0.0, 0.25));
    }

    #[test]
    fn coherence_element_is_pure_exponential() {
        // д/дt ρ₂₁ = −g(t) ρ₂₁ has no inhomogeneity: the element solution
        // must equal ρ₂₁(0)·exp(−∫g).
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let idx = ElementIndex::new(1, 0);
        let gen = model.generator(Rule::Element(idx), Arc::clone(&table));
        let rho0 = DensityMatrix::from_matrix(ComplexMatrix::from_rows(&[
            &[C64::new(0.5, 0.0), C64::new(0.2, -0.1)],
            &[C64::new(0.2, 0.1), C64::new(0.5, 0.0)],
        ]))
        .unwrap();
        let t_end = 0.8;
        let got =
            solve_element_interval(&gen, idx, &rho0, 0.0, t_end, &cfg(Method::ElementIterative)).unwrap();

        // independent fine-grid quadrature of ∫ g
        let n = 4000;
        let h = t_end / n as f64;
        let g_vals: Vec<C64> = (0..=n).map(|j| table.g_at(j as f64 * h).unwrap()).collect();
        let int_g = quad::composite_simpson(&g_vals, h);
        let expect = C64::new(0.2, 0.1) * (-int_g).exp();
        assert!((got - expect).norm() < 1e-9, "dev {:.2e}", (got - expect).norm());
    }

    #[test]
    fn population_element_matches_quadrature_form() {
        // with ρ₂₂(t₀) = 0 the population element decays as exp(−∫f₊)
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let idx = ElementIndex::new(0, 0);
        let gen = model.generator(Rule::Element(idx), Arc::clone(&table));
        let rho0 = DensityMatrix::basis_state(2, 0);
        let t_end = 0.6;
        let got =
            solve_element_interval(&gen, idx, &rho0, 0.0, t_end, &cfg(Method::ElementIterative)).unwrap();

        let n = 4000;
        let h = t_end / n as f64;
        let f_vals: Vec<C64> = (0..=n)
            .map(|j| C64::new(table.f_plus_at(j as f64 * h).unwrap(), 0.0))
            .collect();
        let int_f = quad::composite_simpson(&f_vals, h);
        let expect = (-int_f).exp();
        assert!((got - expect).norm() < 1e-9);
    }

    #[test]
    fn population_element_quadrature_with_source_term() {
        // full closed form on one interval:
        //   rho11(t1) = e^{-F(t1)} rho11(t0) + ∫ e^{-(F(t1)-F(s))} f-(s) rho22(t0) ds
        // with F the running integral of f+; rebuilt here on a fine grid,
        // independently of the solver's cumulative scheme.
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let idx = ElementIndex::new(0, 0);
        let gen = model.generator(Rule::Element(idx), Arc::clone(&table));
        let rho0 = DensityMatrix::from_matrix(ComplexMatrix::from_rows(&[
            &[C64::new(0.55, 0.0), C64::new(0.1, 0.02)],
            &[C64::new(0.1, -0.02), C64::new(0.45, 0.0)],
        ]))
        .unwrap();
        let (t0, t1) = (0.2, 0.7);
        let got = solve_element_interval(&gen, idx, &rho0, t0, t1, &cfg(Method::ElementIterative))
            .unwrap();

        let n = 20_000;
        let h = (t1 - t0) / n as f64;
        let mut f_cum = vec![0.0f64; n + 1];
        for j in 1..=n {
            // trapezoid on a fine grid is accurate enough at h = 2.5e-5
            let a = table.f_plus_at(t0 + (j - 1) as f64 * h).unwrap();
            let b = table.f_plus_at(t0 + j as f64 * h).unwrap();
            f_cum[j] = f_cum[j - 1] + 0.5 * h * (a + b);
        }
        let rho22_frozen = rho0.matrix()[(1, 1)].re;
        let mut source = 0.0;
        for j in 0..=n {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            let fm = table.f_minus_at(t0 + j as f64 * h).unwrap();
            source += w * h * (-(f_cum[n] - f_cum[j])).exp() * fm * rho22_frozen;
        }
        let expect = (-f_cum[n]).exp() * rho0.matrix()[(0, 0)].re + source;
        assert!(
            (got.re - expect).abs() < 1e-7 && got.im.abs() < 1e-12,
            "element solution {got} vs independent quadrature {expect}"
        );
    }

    #[test]
    fn single_restart_interval_equals_element_solutions() {
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let gen = model.generator(Rule::Traditional, Arc::clone(&table));
        let rho0 = DensityMatrix::from_matrix(ComplexMatrix::from_rows(&[
            &[C64::new(0.8, 0.0), C64::new(0.1, 0.05)],
            &[C64::new(0.1, -0.05), C64::new(0.2, 0.0)],
        ]))
        .unwrap();
        let c = SolverConfig {
            dt: 0.01,
            restart_step: 0.5,
            t_final: 0.5,
            renormalize_trace: false,
            method: Method::ElementIterative,
        };
        let traj = solve_iterative(&gen, &rho0, &c).unwrap();
        assert_eq!(traj.len(), 2);
        for idx in canonical_element_set(2) {
            let direct = solve_element_interval(
                &gen.with_rule(Rule::Element(idx)),
                idx,
                &rho0,
                0.0,
                0.5,
                &c,
            )
            .unwrap();
            if idx.is_diagonal() {
                assert_abs_diff_eq!(
                    traj.element_series(idx).unwrap()[1].re,
                    direct.re,
                    epsilon = 1e-14
                );
            } else {
                assert!((traj.element_series(idx).unwrap()[1] - direct).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn traditional_solver_is_fourth_order() {
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let gen = model.generator(Rule::Traditional, Arc::clone(&table));
        let rho0 = DensityMatrix::basis_state(2, 0);
        let mut finals = Vec::new();
        for dt in [0.02, 0.01, 0.005] {
            let c = SolverConfig {
                dt,
                restart_step: 0.1,
                t_final: 0.5,
                renormalize_trace: false,
                method: Method::Traditional,
            };
            let traj = solve_traditional(&gen, &rho0, &c).unwrap();
            finals.push(traj.final_state().matrix()[(0, 0)].re);
        }
        let change1 = (finals[0] - finals[1]).abs();
        let change2 = (finals[1] - finals[2]).abs();
        assert!(
            change2 <= change1 / 10.0,
            "solution changes {change1:.3e} -> {change2:.3e} under dt halving"
        );
    }

    #[test]
    fn trajectories_stay_hermitian() {
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let gen = model.generator(Rule::Traditional, Arc::clone(&table));
        let rho0 = DensityMatrix::from_matrix(ComplexMatrix::from_rows(&[
            &[C64::new(0.9, 0.0), C64::new(0.05, 0.1)],
            &[C64::new(0.05, -0.1), C64::new(0.1, 0.0)],
        ]))
        .unwrap();
        let trad = solve_traditional(&gen, &rho0, &cfg(Method::Traditional)).unwrap();
        let iter = solve_iterative(&gen, &rho0, &cfg(Method::ElementIterative)).unwrap();
        for traj in [trad, iter] {
            for state in traj.states() {
                assert!(state.matrix().hermiticity_deviation() <= 1e-10);
            }
        }
    }

    #[test]
    fn solvers_are_affine_in_initial_data() {
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let gen = model.generator(Rule::Traditional, Arc::clone(&table));
        let rho_a = DensityMatrix::basis_state(2, 0);
        let rho_b = DensityMatrix::from_matrix(ComplexMatrix::from_rows(&[
            &[C64::new(0.3, 0.0), C64::new(0.1, 0.2)],
            &[C64::new(0.1, -0.2), C64::new(0.7, 0.0)],
        ]))
        .unwrap();
        let alpha = 0.3;
        let mixed = DensityMatrix::from_matrix(
            rho_a.matrix().scaled(C64::new(alpha, 0.0)).add(&rho_b.matrix().scaled(C64::new(1.0 - alpha, 0.0))),
        )
        .unwrap();

        for (method, solver) in [
            (Method::Traditional, solve_traditional as fn(&Generator, &DensityMatrix, &SolverConfig) -> Result<Trajectory>),
            (Method::ElementIterative, solve_iterative as fn(&Generator, &DensityMatrix, &SolverConfig) -> Result<Trajectory>),
        ] {
            let c = cfg(method);
            let ta = solver(&gen, &rho_a, &c).unwrap();
            let tb = solver(&gen, &rho_b, &c).unwrap();
            let tm = solver(&gen, &mixed, &c).unwrap();
            for k in 0..tm.len() {
                let combo = ta.states()[k]
                    .matrix()
                    .scaled(C64::new(alpha, 0.0))
                    .add(&tb.states()[k].matrix().scaled(C64::new(1.0 - alpha, 0.0)));
                assert!(tm.states()[k].matrix().max_abs_diff(&combo) <= 1e-10);
            }
        }
    }

    #[test]
    fn markov_solver_matches_closed_form() {
        let bath = fig1_bath();
        let model = SingleQubitModel::new(bath);
        let gen = model.markov_generator(Rule::Traditional).unwrap();
        let lim = bath.markov_limits().unwrap();
        let rho0 = DensityMatrix::basis_state(2, 0);
        let c = SolverConfig {
            dt: 0.001,
            restart_step: 0.05,
            t_final: 1.0,
            renormalize_trace: false,
            method: Method::Markov,
        };
        let traj = solve_markov(&gen, &rho0, &c).unwrap();
        let steady = lim.f_minus_inf / (lim.f_plus_inf + lim.f_minus_inf);
        let rate = lim.f_plus_inf + lim.f_minus_inf;
        for (t, state) in traj.times().iter().zip(traj.states()) {
            let expect = steady + (1.0 - steady) * (-rate * t).exp();
            assert_abs_diff_eq!(state.matrix()[(0, 0)].re, expect, epsilon = 1e-7);
        }
    }

    #[test]
    fn markov_high_temperature_symmetrizes() {
        let bath = BathSpec::new(1.0, 10.0, 2.0, 1e-3).unwrap();
        let model = SingleQubitModel::new(bath);
        let gen = model.markov_generator(Rule::Traditional).unwrap();
        let rho0 = DensityMatrix::basis_state(2, 0);
        // rates scale like 2λ/β ≈ 2000, so a short horizon suffices
        let c = SolverConfig {
            dt: 1e-5,
            restart_step: 1e-3,
            t_final: 0.01,
            renormalize_trace: false,
            method: Method::Markov,
        };
        let traj = solve_markov(&gen, &rho0, &c).unwrap();
        assert_abs_diff_eq!(traj.final_state().matrix()[(0, 0)].re, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn zero_temperature_is_pure_decay() {
        let bath = BathSpec::new(1.0, 10.0, 2.0, 200.0).unwrap();
        let table = Arc::new(KernelTable::build(bath, 1.0, 0.005).unwrap());
        let gen = SingleQubitModel::new(bath).generator(Rule::Traditional, table);
        let rho0 = DensityMatrix::basis_state(2, 0);
        let traj = solve_traditional(&gen, &rho0, &cfg(Method::Traditional)).unwrap();
        let pops: Vec<f64> = traj.states().iter().map(|s| s.matrix()[(0, 0)].re).collect();
        assert!(pops.windows(2).all(|w| w[1] <= w[0] + 1e-12), "population must not grow");
        assert!(*pops.last().unwrap() < 0.01, "rho11(1) = {}", pops.last().unwrap());
    }

    #[test]
    fn markov_keeps_zero_coherence() {
        let bath = fig1_bath();
        let gen = SingleQubitModel::new(bath).markov_generator(Rule::Traditional).unwrap();
        let rho0 = DensityMatrix::from_matrix(ComplexMatrix::from_rows(&[
            &[C64::new(0.6, 0.0), C64::ZERO],
            &[C64::ZERO, C64::new(0.4, 0.0)],
        ]))
        .unwrap();
        let traj = solve_markov(&gen, &rho0, &cfg(Method::Markov)).unwrap();
        for state in traj.states() {
            assert_eq!(state.matrix()[(1, 0)], C64::ZERO);
        }
    }

    #[test]
    fn compare_reports() {
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let gen = model.generator(Rule::Traditional, Arc::clone(&table));
        let rho0 = DensityMatrix::basis_state(2, 0);
        let trad = solve_traditional(&gen, &rho0, &cfg(Method::Traditional)).unwrap();

        let self_report = compare(&trad, &trad).unwrap();
        assert_eq!(self_report.max_abs_deviation, 0.0);
        assert_eq!(self_report.final_time_deviation, 0.0);

        let iter = solve_iterative(&gen, &rho0, &cfg(Method::ElementIterative)).unwrap();
        let report = compare(&trad, &iter).unwrap();
        assert!(report.max_abs_deviation > 0.0);
        assert!(report.max_trace_drift_a < 1e-12);
        assert!(report.max_trace_drift_b > 1e-6);

        let mut other = cfg(Method::Traditional);
        other.t_final = 0.5;
        let short = solve_traditional(&gen, &rho0, &other).unwrap();
        assert!(matches!(compare(&trad, &short), Err(Error::GridMismatch)));
    }

    #[test]
    fn iterative_two_qubit_states_are_valid() {
        let table = short_table();
        let model =
            TwoQubitModel::new(*table.spec(), 0.6, C64::new(0.4, 0.3), C64::new(0.5, 0.2)).unwrap();
        let gen = model.generator(Rule::Traditional, Arc::clone(&table), 0.0).unwrap();
        let rho0 = DensityMatrix::basis_state(4, 0);
        let mut c = cfg(Method::ElementIterative);
        c.t_final = 0.4;
        let traj = solve_iterative(&gen, &rho0, &c).unwrap();
        for state in traj.states() {
            assert!(state.matrix().hermiticity_deviation() <= 1e-10);
            assert!((state.trace() - C64::ONE).norm() < 1e-12);
        }
        // populations move toward a mixed state instead of blowing up
        let final_pop = traj.final_state().matrix()[(0, 0)].re;
        assert!(final_pop > -0.02 && final_pop < 1.0);
    }

    #[test]
    fn element_rule_agrees_with_traditional_to_second_order() {
        // On one interval with the frozen data taken from the reference
        // trajectory, the element solution differs from the reference at
        // second order: halving the interval shrinks the deviation by ~4.
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let gen = model.generator(Rule::Traditional, Arc::clone(&table));
        let rho0 = DensityMatrix::basis_state(2, 0);
        let fine = SolverConfig {
            dt: 0.00125,
            restart_step: 0.00625,
            t_final: 0.2,
            renormalize_trace: false,
            method: Method::Traditional,
        };
        let reference = solve_traditional(&gen, &rho0, &fine).unwrap();
        let state_at = |t: f64| {
            let k = reference.times().iter().position(|x| (x - t).abs() < 1e-12).unwrap();
            reference.states()[k].clone()
        };
        let t_start = 0.05;
        let idx = ElementIndex::new(0, 0);
        let egen = gen.with_rule(Rule::Element(idx));
        let devs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&step| {
                let frozen = state_at(t_start);
                let cfg = SolverConfig {
                    dt: step / 20.0,
                    restart_step: step,
                    t_final: t_start + step,
                    renormalize_trace: false,
                    method: Method::ElementIterative,
                };
                let got =
                    solve_element_interval(&egen, idx, &frozen, t_start, t_start + step, &cfg).unwrap();
                (got - state_at(t_start + step).matrix()[idx]).norm()
            })
            .collect();
        let (r1, r2) = (devs[0] / devs[1], devs[1] / devs[2]);
        assert!((3.5..=4.5).contains(&r1), "first halving ratio {r1}");
        assert!((3.5..=4.5).contains(&r2), "second halving ratio {r2}");
    }

    #[test]
    fn single_qubit_populations_stay_near_physical() {
        let table5 = Arc::new(KernelTable::build(fig1_bath(), 5.0, 0.005).unwrap());
        let model = SingleQubitModel::new(fig1_bath());
        let gen = model.generator(Rule::Traditional, Arc::clone(&table5));
        let rho0 = DensityMatrix::basis_state(2, 0);
        let c = SolverConfig {
            dt: 0.005,
            restart_step: 0.05,
            t_final: 5.0,
            renormalize_trace: false,
            method: Method::Traditional,
        };
        let trad = solve_traditional(&gen, &rho0, &c).unwrap();
        let iter = solve_iterative(&gen, &rho0, &SolverConfig { method: Method::ElementIterative, ..c })
            .unwrap();
        for traj in [trad, iter] {
            for state in traj.states() {
                for i in 0..2 {
                    let p = state.matrix()[(i, i)].re;
                    assert!((-0.02..=1.02).contains(&p), "population {p} escapes [-0.02, 1.02]");
                }
            }
        }
    }

    #[test]
    fn iterative_scheme_tracks_markov_reference() {
        // The restart scheme also applies to the memoryless generator.
        // The constant rates are active from t = 0 (no kernel ramp-in),
        // so the per-step contraction rate·step must be kept small.
        let model = SingleQubitModel::new(fig1_bath());
        let gen = model.markov_generator(Rule::Traditional).unwrap();
        let rho0 = DensityMatrix::basis_state(2, 0);
        let c = SolverConfig {
            dt: 0.0005,
            restart_step: 0.005,
            t_final: 1.0,
            renormalize_trace: false,
            method: Method::Markov,
        };
        let markov = solve_markov(&gen, &rho0, &c).unwrap();
        let iter = solve_iterative(&gen, &rho0, &SolverConfig { method: Method::ElementIterative, ..c })
            .unwrap();
        let report = compare(&markov, &iter).unwrap();
        assert!(
            report.per_element_max_dev[&ElementIndex::new(0, 0)] < 0.02,
            "markov iterative deviation {}",
            report.max_abs_deviation
        );
    }

    #[test]
    fn two_qubit_markov_run_reaches_rotating_steady_state() {
        // The memoryless equation is autonomous in the frame rotating
        // with the exchange Hamiltonian; there the state must settle. In
        // the interaction picture it keeps precessing because the steady
        // state does not commute with the exchange term.
        let model =
            TwoQubitModel::new(fig1_bath(), 0.6, C64::new(0.4, 0.3), C64::new(0.5, 0.2)).unwrap();
        let gen = model.markov_generator(Rule::Traditional).unwrap();
        let rho0 = DensityMatrix::basis_state(4, 0);
        // the common bath supports a subradiant mode relaxing at a rate
        // near 0.05, so the settling horizon is of order 1/0.05
        let c = SolverConfig {
            dt: 0.005,
            restart_step: 1.0,
            t_final: 102.0,
            renormalize_trace: false,
            method: Method::Markov,
        };
        let traj = solve_markov(&gen, &rho0, &c).unwrap();

        let ops = crate::linalg::two_qubit_operators();
        let h = ops
            .sigma_plus_1
            .matmul(&ops.sigma_minus_2)
            .add(&ops.sigma_plus_2.matmul(&ops.sigma_minus_1))
            .scaled(C64::new(model.v, 0.0));
        let rotate_back = |t: f64, rho: &ComplexMatrix| -> ComplexMatrix {
            let u = expm_test(&h.scaled(C64::new(0.0, -t)));
            let u_dag = expm_test(&h.scaled(C64::new(0.0, t)));
            u.matmul(rho).matmul(&u_dag)
        };
        let at = |t: f64| {
            let k = traj.times().iter().position(|x| (x - t).abs() < 1e-9).unwrap();
            rotate_back(t, traj.states()[k].matrix())
        };
        let early = at(22.0).max_abs_diff(&at(20.0));
        let late = at(102.0).max_abs_diff(&at(100.0));
        assert!(late < 1e-4, "rotating-frame drift {late:.2e} between t = 100 and 102");
        assert!(late < early / 10.0, "drift must keep decaying: {early:.2e} -> {late:.2e}");
    }

    fn expm_test(m: &ComplexMatrix) -> ComplexMatrix {
        let norm: f64 = m.entries().iter().map(|z| z.norm()).sum();
        let squarings = (norm.log2().ceil().max(0.0) as u32) + 2;
        let scaled = m.scaled(C64::new(1.0 / 2f64.powi(squarings as i32), 0.0));
        let mut result = ComplexMatrix::identity(m.dim());
        let mut term = ComplexMatrix::identity(m.dim());
        for k in 1..=24 {
            term = term.matmul(&scaled).scaled(C64::new(1.0 / k as f64, 0.0));
            result = result.add(&term);
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }

    #[test]
    fn renormalized_rebuild_keeps_unit_trace() {
        let table = short_table();
        let model = SingleQubitModel::new(*table.spec());
        let gen = model.generator(Rule::Traditional, Arc::clone(&table));
        let rho0 = DensityMatrix::basis_state(2, 0);
        let mut c = cfg(Method::ElementIterative);
        c.renormalize_trace = true;
        let traj = solve_iterative(&gen, &rho0, &c).unwrap();
        for state in traj.states() {
            assert!((state.trace() - C64::ONE).norm() < 1e-12);
        }
        // raw traces still record the drift
        assert!(traj.max_trace_drift() > 1e-6);
    }
}
