//! Configuration-file front end: parse a run description, execute the
//! selected solver(s) and write CSV trajectories.
//!
//! The configuration format is line-oriented `key = value` with `#`
//! comments and case-sensitive keys. Unknown and duplicate keys are
//! rejected. Times and frequencies are plain numbers in mutually
//! consistent units; the bundled figure presets use lambda = 1.

use num_complex::Complex64 as C64;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::bath::{fmt17, BathSpec, KernelTable};
use crate::linalg::{canonical_element_set, DensityMatrix, ElementIndex};
use crate::models::{Rule, SingleQubitModel, TwoQubitModel};
use crate::propagator::{
    compare, solve_iterative, solve_markov, solve_traditional, Method, SolverConfig, Trajectory,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    SingleQubit,
    TwoQubit,
}

impl ModelKind {
    fn name(&self) -> &'static str {
        match self {
            ModelKind::SingleQubit => "single_qubit",
            ModelKind::TwoQubit => "two_qubit",
        }
    }

    fn dim(&self) -> usize {
        match self {
            ModelKind::SingleQubit => 2,
            ModelKind::TwoQubit => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Traditional,
    ElementIterative,
    Markov,
    CompareAll,
}

impl SolverKind {
    fn name(&self) -> &'static str {
        match self {
            SolverKind::Traditional => "traditional",
            SolverKind::ElementIterative => "element_iterative",
            SolverKind::Markov => "markov",
            SolverKind::CompareAll => "compare_all",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Excited,
    Ground,
    Mixed,
    Custom(BTreeMap<ElementIndex, C64>),
}

impl InitialState {
    fn name(&self) -> &'static str {
        match self {
            InitialState::Excited => "excited",
            InitialState::Ground => "ground",
            InitialState::Mixed => "mixed",
            InitialState::Custom(_) => "custom",
        }
    }
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub solver: SolverKind,
    pub lambda: f64,
    pub omega_c: f64,
    pub omega0: f64,
    pub beta: f64,
    pub v: f64,
    pub alpha1: C64,
    pub alpha2: C64,
    pub dt: f64,
    pub restart_step: f64,
    pub t_final: f64,
    pub dt_kernel: f64,
    pub renormalize_trace: bool,
    pub initial_state: InitialState,
    pub output_path: PathBuf,
}

struct RawEntry {
    line: usize,
    value: String,
    used: bool,
}

struct RawConfig(BTreeMap<String, RawEntry>);

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, raw_line) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse { line, msg: "empty key".into() });
            }
            if map.contains_key(&key) {
                return Err(Error::Parse { line, msg: format!("duplicate key `{key}`") });
            }
            map.insert(key, RawEntry { line, value, used: false });
        }
        Ok(Self(map))
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.0.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn require(&mut self, key: &str) -> Result<(usize, String)> {
        self.take(key).ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing required key `{key}`"),
        })
    }

    fn reject_unused(&self) -> Result<()> {
        if let Some((key, e)) = self.0.iter().filter(|(_, e)| !e.used).min_by_key(|(_, e)| e.line) {
            return Err(Error::Parse { line: e.line, msg: format!("unknown key `{key}`") });
        }
        Ok(())
    }
}

fn parse_f64(key: &str, line: usize, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("key `{key}`: `{value}` is not a number"),
    })
}

fn parse_bool(key: &str, line: usize, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Parse { line, msg: format!("key `{key}`: expected true or false, got `{value}`") }),
    }
}

fn parse_complex(key: &str, line: usize, value: &str) -> Result<C64> {
    let mut parts = value.splitn(2, ',');
    let re = parse_f64(key, line, parts.next().unwrap_or("").trim())?;
    let im = match parts.next() {
        Some(s) => parse_f64(key, line, s.trim())?,
        None => 0.0,
    };
    Ok(C64::new(re, im))
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut raw = RawConfig::parse(text)?;

    let (line, value) = raw.require("model")?;
    let model = match value.as_str() {
        "single_qubit" => ModelKind::SingleQubit,
        "two_qubit" => ModelKind::TwoQubit,
        other => {
            return Err(Error::Parse { line, msg: format!("key `model`: unknown model `{other}`") })
        }
    };
    let (line, value) = raw.require("solver")?;
    let solver = match value.as_str() {
        "traditional" => SolverKind::Traditional,
        "element_iterative" => SolverKind::ElementIterative,
        "markov" => SolverKind::Markov,
        "compare_all" => SolverKind::CompareAll,
        other => {
            return Err(Error::Parse { line, msg: format!("key `solver`: unknown solver `{other}`") })
        }
    };

    let float = |raw: &mut RawConfig, key: &str| -> Result<f64> {
        let (line, value) = raw.require(key)?;
        parse_f64(key, line, &value)
    };
    let lambda = float(&mut raw, "lambda")?;
    let omega_c = float(&mut raw, "omega_c")?;
    let omega0 = float(&mut raw, "omega0")?;
    let beta = float(&mut raw, "beta")?;
    let restart_step = float(&mut raw, "restart_step")?;
    let t_final = float(&mut raw, "t_final")?;

    let two_qubit_keys = ["v", "alpha1_re", "alpha1_im", "alpha2_re", "alpha2_im"];
    let (v, alpha1, alpha2) = match model {
        ModelKind::TwoQubit => {
            let v = float(&mut raw, "v")?;
            let a1re = float(&mut raw, "alpha1_re")?;
            let a1im = float(&mut raw, "alpha1_im")?;
            let a2re = float(&mut raw, "alpha2_re")?;
            let a2im = float(&mut raw, "alpha2_im")?;
            (v, C64::new(a1re, a1im), C64::new(a2re, a2im))
        }
        ModelKind::SingleQubit => {
            for key in two_qubit_keys {
                if let Some((line, _)) = raw.take(key) {
                    return Err(Error::Parse {
                        line,
                        msg: format!("key `{key}` only applies to model = two_qubit"),
                    });
                }
            }
            (0.0, C64::ZERO, C64::ZERO)
        }
    };

    let dt = match raw.take("dt") {
        Some((line, value)) => parse_f64("dt", line, &value)?,
        None => restart_step / 10.0,
    };
    let dt_kernel = match raw.take("dt_kernel") {
        Some((line, value)) => parse_f64("dt_kernel", line, &value)?,
        None if lambda > 0.0 => 0.01 / lambda,
        None => 0.01,
    };
    let renormalize_trace = match raw.take("renormalize_trace") {
        Some((line, value)) => parse_bool("renormalize_trace", line, &value)?,
        None => false,
    };
    let output_path = match raw.take("output_path") {
        Some((_, value)) => PathBuf::from(value),
        None => PathBuf::from("."),
    };

    let initial_kind = raw.take("initial_state");
    let canonical = canonical_element_set(model.dim());
    let rho_key = |idx: &ElementIndex| format!("rho_{}{}", idx.row + 1, idx.col + 1);
    let initial_state = match initial_kind.as_ref().map(|(_, v)| v.as_str()) {
        None | Some("excited") => InitialState::Excited,
        Some("ground") => InitialState::Ground,
        Some("mixed") => InitialState::Mixed,
        Some("custom") => {
            let mut elements = BTreeMap::new();
            for idx in &canonical {
                let key = rho_key(idx);
                let (line, value) = raw.require(&key)?;
                elements.insert(*idx, parse_complex(&key, line, &value)?);
            }
            InitialState::Custom(elements)
        }
        Some(other) => {
            let msg = format!("key `initial_state`: unknown preset `{other}`");
            return Err(Error::Parse { line: initial_kind.unwrap().0, msg });
        }
    };
    if !matches!(initial_state, InitialState::Custom(_)) {
        for idx in &canonical {
            if let Some((line, _)) = raw.take(&rho_key(idx)) {
                return Err(Error::Parse {
                    line,
                    msg: format!("key `{}` requires initial_state = custom", rho_key(idx)),
                });
            }
        }
    }

    raw.reject_unused()?;

    let config = RunConfig {
        model,
        solver,
        lambda,
        omega_c,
        omega0,
        beta,
        v,
        alpha1,
        alpha2,
        dt,
        restart_step,
        t_final,
        dt_kernel,
        renormalize_trace,
        initial_state,
        output_path,
    };
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        BathSpec::new(self.lambda, self.omega_c, self.omega0, self.beta)?;
        self.solver_config(Method::Traditional).validate()?;
        if self.dt_kernel.is_nan() || self.dt_kernel <= 0.0 || self.dt_kernel > self.t_final {
            return Err(Error::Config(format!(
                "dt_kernel must satisfy 0 < dt_kernel <= t_final, got {}",
                self.dt_kernel
            )));
        }
        if let InitialState::Custom(elements) = &self.initial_state {
            crate::linalg::reconstruct(elements, self.model.dim())?;
        }
        Ok(())
    }

    fn solver_config(&self, method: Method) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            restart_step: self.restart_step,
            t_final: self.t_final,
            renormalize_trace: self.renormalize_trace,
            method,
        }
    }

    fn bath(&self) -> BathSpec {
        BathSpec::new(self.lambda, self.omega_c, self.omega0, self.beta).expect("validated")
    }

    pub fn initial_density(&self) -> Result<DensityMatrix> {
        let dim = self.model.dim();
        Ok(match &self.initial_state {
            InitialState::Excited => DensityMatrix::basis_state(dim, 0),
            InitialState::Ground => DensityMatrix::basis_state(dim, dim - 1),
            InitialState::Mixed => DensityMatrix::maximally_mixed(dim),
            InitialState::Custom(elements) => crate::linalg::reconstruct(elements, dim)?,
        })
    }

    /// Canonical `key = value` document; parsing it back yields an equal
    /// configuration.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model = {}", self.model.name());
        let _ = writeln!(out, "solver = {}", self.solver.name());
        let _ = writeln!(out, "lambda = {}", self.lambda);
        let _ = writeln!(out, "omega_c = {}", self.omega_c);
        let _ = writeln!(out, "omega0 = {}", self.omega0);
        let _ = writeln!(out, "beta = {}", self.beta);
        if self.model == ModelKind::TwoQubit {
            let _ = writeln!(out, "v = {}", self.v);
            let _ = writeln!(out, "alpha1_re = {}", self.alpha1.re);
            let _ = writeln!(out, "alpha1_im = {}", self.alpha1.im);
            let _ = writeln!(out, "alpha2_re = {}", self.alpha2.re);
            let _ = writeln!(out, "alpha2_im = {}", self.alpha2.im);
        }
        let _ = writeln!(out, "dt = {}", self.dt);
        let _ = writeln!(out, "restart_step = {}", self.restart_step);
        let _ = writeln!(out, "t_final = {}", self.t_final);
        let _ = writeln!(out, "dt_kernel = {}", self.dt_kernel);
        let _ = writeln!(out, "renormalize_trace = {}", self.renormalize_trace);
        let _ = writeln!(out, "initial_state = {}", self.initial_state.name());
        if let InitialState::Custom(elements) = &self.initial_state {
            for idx in canonical_element_set(self.model.dim()) {
                let z = elements[&idx];
                let _ = writeln!(out, "rho_{}{} = {},{}", idx.row + 1, idx.col + 1, z.re, z.im);
            }
        }
        let _ = writeln!(out, "output_path = {}", self.output_path.display());
        out
    }
}

/// Built-in single-qubit reproduction preset.
pub fn fig1_config(out: &Path) -> RunConfig {
    RunConfig {
        model: ModelKind::SingleQubit,
        solver: SolverKind::CompareAll,
        lambda: 1.0,
        omega_c: 10.0,
        omega0: 2.0,
        beta: 0.3,
        v: 0.0,
        alpha1: C64::ZERO,
        alpha2: C64::ZERO,
        dt: 0.005,
        restart_step: 0.05,
        t_final: 5.0,
        dt_kernel: 0.0025,
        renormalize_trace: false,
        initial_state: InitialState::Excited,
        output_path: out.to_path_buf(),
    }
}

/// Built-in two-qubit reproduction preset.
pub fn fig2_config(out: &Path) -> RunConfig {
    RunConfig {
        model: ModelKind::TwoQubit,
        solver: SolverKind::CompareAll,
        v: 0.6,
        alpha1: C64::new(0.4, 0.3),
        alpha2: C64::new(0.5, 0.2),
        ..fig1_config(out)
    }
}

/// What a run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub max_abs_deviation: Option<f64>,
    pub warnings: Vec<String>,
}

fn ensure_output_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", path.display()),
        )));
    }
    Ok(())
}

fn write_trajectory_csv(path: &Path, traj: &Trajectory, dim: usize) -> Result<()> {
    let mut file = fs::File::create(path)?;
    let mut header = String::from("t");
    let canonical = canonical_element_set(dim);
    for idx in &canonical {
        let _ = write!(header, ",rho_{0}_re,rho_{0}_im", idx.label());
    }
    header.push_str(",raw_trace_re,raw_trace_im");
    writeln!(file, "{header}")?;
    for k in 0..traj.len() {
        let mut row = fmt17(traj.times()[k]);
        for idx in &canonical {
            let z = traj.element_series(*idx).unwrap()[k];
            row.push(',');
            row.push_str(&fmt17(z.re));
            row.push(',');
            row.push_str(&fmt17(z.im));
        }
        let tr = traj.raw_traces()[k];
        row.push(',');
        row.push_str(&fmt17(tr.re));
        row.push(',');
        row.push_str(&fmt17(tr.im));
        writeln!(file, "{row}")?;
    }
    Ok(())
}

fn write_comparison_csv(path: &Path, a: &Trajectory, b: &Trajectory, dim: usize) -> Result<()> {
    let mut file = fs::File::create(path)?;
    let canonical = canonical_element_set(dim);
    let mut header = String::from("t");
    for idx in &canonical {
        let _ = write!(header, ",dev_rho_{}", idx.label());
    }
    writeln!(file, "{header}")?;
    for k in 0..a.len() {
        let mut row = fmt17(a.times()[k]);
        for idx in &canonical {
            let dev = (a.element_series(*idx).unwrap()[k] - b.element_series(*idx).unwrap()[k]).norm();
            row.push(',');
            row.push_str(&fmt17(dev));
        }
        writeln!(file, "{row}")?;
    }
    Ok(())
}

struct ModelRunner {
    config: RunConfig,
    bath: BathSpec,
    table: Arc<KernelTable>,
    rho0: DensityMatrix,
}

impl ModelRunner {
    fn new(config: &RunConfig) -> Result<Self> {
        let bath = config.bath();
        let table = Arc::new(KernelTable::build(bath, config.t_final, config.dt_kernel)?);
        let rho0 = config.initial_density()?;
        Ok(Self { config: config.clone(), bath, table, rho0 })
    }

    fn solve(&self, method: Method) -> Result<Trajectory> {
        let cfg = self.config.solver_config(method);
        match (self.config.model, method) {
            (ModelKind::SingleQubit, Method::Traditional) => {
                let gen = SingleQubitModel::new(self.bath)
                    .generator(Rule::Traditional, Arc::clone(&self.table));
                solve_traditional(&gen, &self.rho0, &cfg)
            }
            (ModelKind::SingleQubit, Method::ElementIterative) => {
                let gen = SingleQubitModel::new(self.bath)
                    .generator(Rule::Traditional, Arc::clone(&self.table));
                solve_iterative(&gen, &self.rho0, &cfg)
            }
            (ModelKind::SingleQubit, Method::Markov) => {
                let gen = SingleQubitModel::new(self.bath).markov_generator(Rule::Traditional)?;
                solve_markov(&gen, &self.rho0, &cfg)
            }
            (ModelKind::TwoQubit, Method::Traditional) => {
                let gen = self.two_qubit()?.generator(Rule::Traditional, Arc::clone(&self.table), 0.0)?;
                solve_traditional(&gen, &self.rho0, &cfg)
            }
            (ModelKind::TwoQubit, Method::ElementIterative) => {
                let gen = self.two_qubit()?.generator(Rule::Traditional, Arc::clone(&self.table), 0.0)?;
                solve_iterative(&gen, &self.rho0, &cfg)
            }
            (ModelKind::TwoQubit, Method::Markov) => {
                let gen = self.two_qubit()?.markov_generator(Rule::Traditional)?;
                solve_markov(&gen, &self.rho0, &cfg)
            }
        }
    }

    fn two_qubit(&self) -> Result<TwoQubitModel> {
        TwoQubitModel::new(self.bath, self.config.v, self.config.alpha1, self.config.alpha2)
    }
}

/// Executes the configured run and writes the CSV outputs.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    ensure_output_dir(&config.output_path)?;
    let runner = ModelRunner::new(config)?;
    let dim = config.model.dim();
    let out = &config.output_path;
    let mut files = Vec::new();
    let mut max_abs_deviation = None;

    match config.solver {
        SolverKind::Traditional | SolverKind::ElementIterative | SolverKind::Markov => {
            let (method, name) = match config.solver {
                SolverKind::Traditional => (Method::Traditional, "traditional.csv"),
                SolverKind::ElementIterative => (Method::ElementIterative, "iterative.csv"),
                SolverKind::Markov => (Method::Markov, "markov.csv"),
                SolverKind::CompareAll => unreachable!(),
            };
            let traj = runner.solve(method)?;
            let path = out.join(name);
            write_trajectory_csv(&path, &traj, dim)?;
            files.push(path);
        }
        SolverKind::CompareAll => {
            let trad = runner.solve(Method::Traditional)?;
            let iter = runner.solve(Method::ElementIterative)?;
            let markov = runner.solve(Method::Markov)?;
            for (traj, name) in
                [(&trad, "traditional.csv"), (&iter, "iterative.csv"), (&markov, "markov.csv")]
            {
                let path = out.join(name);
                write_trajectory_csv(&path, traj, dim)?;
                files.push(path);
            }
            let report = compare(&trad, &iter)?;
            let path = out.join("comparison.csv");
            write_comparison_csv(&path, &trad, &iter, dim)?;
            files.push(path);
            max_abs_deviation = Some(report.max_abs_deviation);
        }
    }

    Ok(RunSummary {
        files,
        max_abs_deviation,
        warnings: runner.table.warnings().to_vec(),
    })
}

/// Builds the kernel table for the configured bath and dumps it as CSV.
pub fn dump_kernels(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    ensure_output_dir(&config.output_path)?;
    let bath = config.bath();
    let table = KernelTable::build(bath, config.t_final, config.dt_kernel)?;
    let path = config.output_path.join("kernels.csv");
    let mut file = fs::File::create(&path)?;
    table.write_csv(&mut file)?;
    Ok(RunSummary { files: vec![path], max_abs_deviation: None, warnings: table.warnings().to_vec() })
}
