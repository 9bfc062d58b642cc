//! Dense complex matrix algebra for small open systems.
//!
//! Everything in scope is n ≤ 4, so matrices are stored as flat row-major
//! vectors and all operations are plain loops. The module also owns the
//! canonical independent element set of a hermitian unit-trace matrix:
//! the first n−1 diagonal entries plus the strictly lower triangle,
//! (n−1)(n+2)/2 elements in total.

use num_complex::Complex64 as C64;
use std::collections::BTreeMap;
use std::ops::{Index, IndexMut};

use crate::{Error, Result};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;

/// Dense n×n complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self { dim, data: vec![C64::ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::ONE;
        }
        m
    }

    /// Builds a matrix from row slices; every row must have length `dim`.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        assert!(dim >= 1 && rows.iter().all(|r| r.len() == dim));
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C64::ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { dim: self.dim, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { dim: self.dim, data }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let data = self.data.iter().map(|a| a * factor).collect();
        Self { dim: self.dim, data }
    }

    pub fn add_scaled(&mut self, other: &Self, factor: C64) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * factor;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Kronecker product; `self` is the left factor.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                if a == C64::ZERO {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other.data[k * m + l];
                    }
                }
            }
        }
        out
    }

    /// Largest |a_ij − conj(a_ji)| over all entries.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        dev
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Index<ElementIndex> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: ElementIndex) -> &C64 {
        &self.data[idx.row * self.dim + idx.col]
    }
}

impl IndexMut<ElementIndex> for ComplexMatrix {
    fn index_mut(&mut self, idx: ElementIndex) -> &mut C64 {
        &mut self.data[idx.row * self.dim + idx.col]
    }
}

/// Row/column pair selecting one matrix element. 0-based internally; the
/// CLI prints 1-based labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementIndex {
    pub row: usize,
    pub col: usize,
}

impl ElementIndex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.row >= dim || self.col >= dim {
            return Err(Error::IndexOutOfRange { i: self.row, j: self.col, dim });
        }
        Ok(())
    }

    pub fn is_diagonal(&self) -> bool {
        self.row == self.col
    }

    /// 1-based label used in CSV headers, e.g. (0,1) → "12".
    pub fn label(&self) -> String {
        format!("{}{}", self.row + 1, self.col + 1)
    }
}

/// The canonical independent set: diagonal (i,i) for i < n−1, then the
/// strictly lower triangle in row-major order. Size (n−1)(n+2)/2.
pub fn canonical_element_set(dim: usize) -> Vec<ElementIndex> {
    let mut set = Vec::with_capacity((dim - 1) * (dim + 2) / 2);
    for i in 0..dim.saturating_sub(1) {
        set.push(ElementIndex::new(i, i));
    }
    for i in 1..dim {
        for j in 0..i {
            set.push(ElementIndex::new(i, j));
        }
    }
    set
}

/// Hermitian matrix with unit trace. Constructors validate; solvers may
/// still produce states with negative populations, which is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        Self::from_matrix_with_tol(matrix, TRACE_TOL)
    }

    pub fn from_matrix_with_tol(matrix: ComplexMatrix, trace_tol: f64) -> Result<Self> {
        let dev = matrix.hermiticity_deviation();
        if dev > HERMITICITY_TOL {
            return Err(Error::NotHermitian { dev });
        }
        let tr = matrix.trace();
        if (tr - C64::ONE).norm() > trace_tol {
            return Err(Error::NotUnitTrace { trace: tr, tol: trace_tol });
        }
        Ok(Self { matrix })
    }

    /// Pure state |k⟩⟨k|.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        assert!(k < dim);
        let mut m = ComplexMatrix::zeros(dim);
        m[(k, k)] = C64::ONE;
        Self { matrix: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim).scaled(C64::new(1.0 / dim as f64, 0.0)) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

/// E_ij: unit entry at (row, col), zero elsewhere.
pub fn elementary_matrix(idx: ElementIndex, dim: usize) -> Result<ComplexMatrix> {
    idx.validate(dim)?;
    let mut m = ComplexMatrix::zeros(dim);
    m[idx] = C64::ONE;
    Ok(m)
}

/// Tr(E_ij† ρ) = ρ_ij.
pub fn extract_element(rho: &DensityMatrix, idx: ElementIndex) -> Result<C64> {
    idx.validate(rho.dim())?;
    Ok(rho.matrix()[idx])
}

/// Rebuilds the full density matrix from the canonical independent set:
/// conjugates fill the upper triangle and the last diagonal entry is
/// 1 − Σ of the others.
pub fn reconstruct(elements: &BTreeMap<ElementIndex, C64>, dim: usize) -> Result<DensityMatrix> {
    let canonical = canonical_element_set(dim);
    if elements.len() != canonical.len() {
        return Err(Error::ElementSet(format!(
            "expected {} elements for dimension {}, got {}",
            canonical.len(),
            dim,
            elements.len()
        )));
    }
    for idx in &canonical {
        if !elements.contains_key(idx) {
            return Err(Error::ElementSet(format!(
                "missing element ({},{})",
                idx.row, idx.col
            )));
        }
    }

    let mut m = ComplexMatrix::zeros(dim);
    let mut diag_sum = 0.0;
    for (idx, value) in elements {
        if idx.is_diagonal() {
            if value.im.abs() > HERMITICITY_TOL {
                return Err(Error::NonRealDiagonal { imag: value.im });
            }
            m[*idx] = C64::new(value.re, 0.0);
            diag_sum += value.re;
        } else {
            m[*idx] = *value;
            m[(idx.col, idx.row)] = value.conj();
        }
    }
    m[(dim - 1, dim - 1)] = C64::new(1.0 - diag_sum, 0.0);
    // trace is exactly 1 by construction
    DensityMatrix::from_matrix(m)
}

/// ab − ba.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "commutator of {}×{0} and {}×{1} matrices",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.matmul(b).sub(&b.matmul(a)))
}

/// σ₊ = |e⟩⟨g| in the (e, g) basis.
pub fn sigma_plus() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2);
    m[(0, 1)] = C64::ONE;
    m
}

/// σ₋ = |g⟩⟨e|.
pub fn sigma_minus() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2);
    m[(1, 0)] = C64::ONE;
    m
}

/// Single-qubit raising/lowering and excited/ground projectors lifted to
/// the two-qubit space. Qubit 1 is the left tensor factor; the product
/// basis is |ee⟩, |eg⟩, |ge⟩, |gg⟩.
pub struct TwoQubitOperators {
    pub sigma_plus_1: ComplexMatrix,
    pub sigma_minus_1: ComplexMatrix,
    pub sigma_plus_2: ComplexMatrix,
    pub sigma_minus_2: ComplexMatrix,
    pub proj_excited_1: ComplexMatrix,
    pub proj_ground_1: ComplexMatrix,
    pub proj_excited_2: ComplexMatrix,
    pub proj_ground_2: ComplexMatrix,
}

pub fn two_qubit_operators() -> TwoQubitOperators {
    let id = ComplexMatrix::identity(2);
    let sp = sigma_plus();
    let sm = sigma_minus();
    let pe = sp.matmul(&sm);
    let pg = sm.matmul(&sp);
    TwoQubitOperators {
        sigma_plus_1: sp.kron(&id),
        sigma_minus_1: sm.kron(&id),
        sigma_plus_2: id.kron(&sp),
        sigma_minus_2: id.kron(&sm),
        proj_excited_1: pe.kron(&id),
        proj_ground_1: pg.kron(&id),
        proj_excited_2: id.kron(&pe),
        proj_ground_2: id.kron(&pg),
    }
}
