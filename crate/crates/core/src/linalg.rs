//! Dense complex linear algebra over multi-qubit Hilbert spaces.
//!
//! Matrices are row-major. Global operators act on `2^n` dimensional spaces
//! whose tensor factors follow a [`QubitLayout`]; the first variable of the
//! layout is the leftmost (most significant) factor.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use thiserror::Error;

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("trace {0} exceeds 1")]
    TraceTooLarge(f64),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

/// Numerical tolerances shared by every rank and inclusion decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative cutoff below which singular/eigen values count as zero.
    pub rank_tol: f64,
    /// Max-entry residual allowed in subspace inclusion tests.
    pub incl_tol: f64,
    pub herm_tol: f64,
    pub trace_tol: f64,
    /// Absolute floor under which a state's largest eigenvalue counts as zero.
    pub zero_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: 1e-9,
            incl_tol: 1e-8,
            herm_tol: 1e-9,
            trace_tol: 1e-9,
            zero_tol: 1e-13,
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self {
            rows,
            cols,
            data: values.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(dim: usize, columns: &[Vec<C64>]) -> Self {
        Self::from_fn(dim, columns.len(), |r, c| columns[c][r])
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// `|v⟩⟨w|`
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |r, c| v[r] * w[c].conj())
    }

    /// `|v⟩⟨v|`
    pub fn pure_state(v: &[C64]) -> Self {
        Self::outer(v, v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<C64>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Entrywise deviation from Hermiticity, `max |M - M†|`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    /// `(M + M†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        })
    }

    /// `max |U†U - I|`
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.rows))
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A ρ A†`
    pub fn conjugate(&self, rho: &Self) -> Self {
        &(self * rho) * &self.adjoint()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Kronecker product with `a`'s factor leftmost.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.rows * b.rows, a.cols * b.cols, |r, c| {
        a[(r / b.rows, c / b.cols)] * b[(r % b.rows, c % b.cols)]
    })
}

/// Canonical tensor-factor order of the qubit variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitLayout {
    order: Vec<String>,
    index: HashMap<String, usize>,
}

impl QubitLayout {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, LinalgError> {
        let mut index = HashMap::new();
        let mut order = Vec::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            let n = n.as_ref().to_string();
            if index.insert(n.clone(), i).is_some() {
                return Err(LinalgError::DuplicateVariable(n));
            }
            order.push(n);
        }
        Ok(Self { order, index })
    }

    pub fn names(&self) -> &[String] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Dimension of the global Hilbert space.
    pub fn dim(&self) -> usize {
        1 << self.order.len()
    }

    pub fn position(&self, name: &str) -> Result<usize, LinalgError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| LinalgError::UnknownVariable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn positions<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>, LinalgError> {
        let mut seen = BTreeSet::new();
        names
            .iter()
            .map(|n| {
                let p = self.position(n.as_ref())?;
                if !seen.insert(p) {
                    return Err(LinalgError::DuplicateVariable(n.as_ref().to_string()));
                }
                Ok(p)
            })
            .collect()
    }

    /// Bit shift of the variable at `pos` inside a global basis index.
    fn shift(&self, pos: usize) -> usize {
        self.order.len() - 1 - pos
    }

    /// Extracts the local index of `x` on the given positions (first position most significant).
    fn gather(&self, x: usize, positions: &[usize]) -> usize {
        positions
            .iter()
            .fold(0, |acc, &p| (acc << 1) | ((x >> self.shift(p)) & 1))
    }

    fn mask(&self, positions: &[usize]) -> usize {
        positions.iter().fold(0, |m, &p| m | (1 << self.shift(p)))
    }
}

/// Cylindrical extension of `op` acting on `targets` (in the given order) to the whole layout.
pub fn embed<S: AsRef<str>>(
    op: &ComplexMatrix,
    targets: &[S],
    layout: &QubitLayout,
) -> Result<ComplexMatrix, LinalgError> {
    let positions = layout.positions(targets)?;
    let local = 1usize << positions.len();
    if op.rows() != local || op.cols() != local {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} operator on {} qubit(s)",
            op.rows(),
            op.cols(),
            positions.len()
        )));
    }
    let dim = layout.dim();
    let mask = layout.mask(&positions);
    let mut out = ComplexMatrix::zeros(dim, dim);
    for x in 0..dim {
        let lx = layout.gather(x, &positions);
        for y in 0..dim {
            if (x & !mask) != (y & !mask) {
                continue;
            }
            out[(x, y)] = op[(lx, layout.gather(y, &positions))];
        }
    }
    Ok(out)
}

/// Embeds a vector of the local space on `targets` tensored with a fixed global
/// basis state on the other variables. Used to build states such as `|0⟩_q ⊗ |ψ⟩`.
pub fn local_to_global_index(
    layout: &QubitLayout,
    positions: &[usize],
    local: usize,
    rest: usize,
) -> usize {
    let mut x = rest & !layout.mask(positions);
    let k = positions.len();
    for (j, &p) in positions.iter().enumerate() {
        let bit = (local >> (k - 1 - j)) & 1;
        x |= bit << layout.shift(p);
    }
    x
}

/// Traces out `traced_out`; the result acts on the remaining variables in layout order.
pub fn partial_trace<S: AsRef<str>>(
    m: &ComplexMatrix,
    traced_out: &[S],
    layout: &QubitLayout,
) -> Result<ComplexMatrix, LinalgError> {
    let dim = layout.dim();
    if m.rows() != dim || m.cols() != dim {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} matrix on {} qubit(s)",
            m.rows(),
            m.cols(),
            layout.len()
        )));
    }
    let traced: BTreeSet<usize> = layout.positions(traced_out)?.into_iter().collect();
    let kept: Vec<usize> = (0..layout.len()).filter(|p| !traced.contains(p)).collect();
    let traced: Vec<usize> = traced.into_iter().collect();
    let kdim = 1usize << kept.len();
    let tdim = 1usize << traced.len();
    let mut out = ComplexMatrix::zeros(kdim, kdim);
    for r in 0..kdim {
        for c in 0..kdim {
            let mut acc = ZERO;
            for t in 0..tdim {
                let x = compose(layout, &kept, r, &traced, t);
                let y = compose(layout, &kept, c, &traced, t);
                acc += m[(x, y)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Reduced operator on `keep` (in the given order).
pub fn reduce_to<S: AsRef<str>>(
    m: &ComplexMatrix,
    keep: &[S],
    layout: &QubitLayout,
) -> Result<ComplexMatrix, LinalgError> {
    let keep_pos = layout.positions(keep)?;
    let traced: Vec<&str> = layout
        .names()
        .iter()
        .enumerate()
        .filter(|(i, _)| !keep_pos.contains(i))
        .map(|(_, n)| n.as_str())
        .collect();
    let reduced = partial_trace(m, &traced, layout)?;
    // `reduced` follows layout order; permute into the requested order.
    let mut sorted = keep_pos.clone();
    sorted.sort_unstable();
    if sorted == keep_pos {
        return Ok(reduced);
    }
    let names: Vec<&str> = sorted.iter().map(|&p| layout.names()[p].as_str()).collect();
    let sub = QubitLayout::new(&names)?;
    let order: Vec<&str> = keep_pos
        .iter()
        .map(|&p| layout.names()[p].as_str())
        .collect();
    let perm = permutation_matrix(&order, &sub)?;
    Ok(&(&perm * &reduced) * &perm.adjoint())
}

/// Unitary mapping layout-ordered basis states to `order`-ordered ones.
fn permutation_matrix(order: &[&str], layout: &QubitLayout) -> Result<ComplexMatrix, LinalgError> {
    let positions = layout.positions(order)?;
    let dim = layout.dim();
    let mut p = ComplexMatrix::zeros(dim, dim);
    for x in 0..dim {
        p[(layout.gather(x, &positions), x)] = ONE;
    }
    Ok(p)
}

fn compose(layout: &QubitLayout, kept: &[usize], r: usize, traced: &[usize], t: usize) -> usize {
    let mut x = 0;
    for (j, &p) in kept.iter().enumerate() {
        x |= ((r >> (kept.len() - 1 - j)) & 1) << layout.shift(p);
    }
    for (j, &p) in traced.iter().enumerate() {
        x |= ((t >> (traced.len() - 1 - j)) & 1) << layout.shift(p);
    }
    x
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one column per eigenvalue.
    pub vectors: ComplexMatrix,
}

pub fn eig_hermitian(m: &ComplexMatrix, herm_tol: f64) -> Result<Eigen, LinalgError> {
    let dev = m.hermitian_deviation();
    if dev > herm_tol * m.max_abs().max(1.0) {
        return Err(LinalgError::NotHermitian(dev));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let h = m.hermitian_part();
    let mat = faer::Mat::<C64>::from_fn(n, n, |r, c| h[(r, c)]);
    let eig = mat
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| LinalgError::Eigen(format!("{e:?}")))?;
    // faer sorts eigenvalues in nondecreasing order.
    let (s, u) = (eig.S().column_vector(), eig.U());
    let values = (0..n).rev().map(|i| s[i].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| u[(r, n - 1 - c)]);
    Ok(Eigen { values, vectors })
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn basis_vector(dim: usize, i: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[i] = ONE;
    v
}

/// Removes the components of `v` along the orthonormal `basis` (two passes).
fn project_out(v: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = inner(b, v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
}

/// Orthonormal basis of the span of `vectors`.
///
/// Components whose residual norm is at most `tol` times the largest input norm
/// are treated as linearly dependent and dropped.
pub fn orthonormalize(vectors: &[Vec<C64>], tol: f64) -> Vec<Vec<C64>> {
    orthonormalize_scaled(vectors, tol, 0.0)
}

/// [`orthonormalize`] with the cutoff taken relative to `max(scale, largest input norm)`.
///
/// Images of unit vectors pass the operator's scale here, so that images which are all
/// rounding noise collapse to the zero subspace.
pub fn orthonormalize_scaled(vectors: &[Vec<C64>], tol: f64, scale: f64) -> Vec<Vec<C64>> {
    let scale = vectors.iter().map(|v| norm(v)).fold(scale, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let cutoff = tol * scale;
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        project_out(&mut w, &basis);
        let n = norm(&w);
        if n > cutoff {
            w.iter_mut().for_each(|z| *z /= n);
            basis.push(w);
        }
    }
    basis
}

/// Extends an orthonormal family to a basis of `C^dim`; returns only the new vectors.
///
/// Candidates are computational basis vectors, picked greedily by largest residual.
pub fn complete_basis(basis: &[Vec<C64>], dim: usize) -> Vec<Vec<C64>> {
    let mut all: Vec<Vec<C64>> = basis.to_vec();
    let mut extra = Vec::new();
    let mut residuals: Vec<Vec<C64>> = (0..dim)
        .map(|i| {
            let mut e = basis_vector(dim, i);
            project_out(&mut e, &all);
            e
        })
        .collect();
    while all.len() < dim {
        let (best, n) = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, norm(r)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("dim > 0");
        if n < 1e-12 {
            break;
        }
        let mut w = residuals[best].clone();
        project_out(&mut w, &all);
        let n = norm(&w);
        w.iter_mut().for_each(|z| *z /= n);
        for r in residuals.iter_mut() {
            project_out(r, std::slice::from_ref(&w));
        }
        all.push(w.clone());
        extra.push(w);
    }
    extra
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0., 1., 1., 0.])
    }

    fn cnot() -> ComplexMatrix {
        ComplexMatrix::from_real(
            4,
            4,
            &[
                1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.,
            ],
        )
    }

    #[test]
    fn tensor_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn tensor_of_projectors_has_single_entry() {
        let p0 = ComplexMatrix::from_real(2, 2, &[1., 0., 0., 0.]);
        let p1 = ComplexMatrix::from_real(2, 2, &[0., 0., 0., 1.]);
        let t = tensor(&p0, &p1);
        let mut expected = ComplexMatrix::zeros(4, 4);
        expected[(1, 1)] = ONE;
        assert_eq!(t, expected);
    }

    #[test]
    fn tensor_with_column_vector() {
        let ket0 = ComplexMatrix::from_real(2, 1, &[1., 0.]);
        let t = tensor(&pauli_x(), &ket0);
        assert_eq!(t.rows(), 4);
        assert_eq!(t.cols(), 2);
        // X ⊗ |0⟩ applied to |0⟩ gives |10⟩.
        assert_eq!(t.column(0), vec![c(0.), c(0.), c(1.), c(0.)]);
    }

    #[test]
    fn embed_single_qubit_on_second_factor() {
        let layout = QubitLayout::new(&["q0", "q1"]).unwrap();
        let e = embed(&pauli_x(), &["q1"], &layout).unwrap();
        assert_eq!(e, tensor(&ComplexMatrix::identity(2), &pauli_x()));
    }

    #[test]
    fn embed_cnot_with_reversed_targets() {
        let layout = QubitLayout::new(&["q0", "q1"]).unwrap();
        let e = embed(&cnot(), &["q1", "q0"], &layout).unwrap();
        // Control q1, target q0: |q0 q1⟩ = |01⟩ ↦ |11⟩, |11⟩ ↦ |01⟩, |00⟩,|10⟩ fixed.
        let images = [0usize, 3, 2, 1];
        for (x, &y) in images.iter().enumerate() {
            assert_eq!(
                e.apply(&basis_vector(4, x)),
                basis_vector(4, y),
                "basis {x}"
            );
        }
    }

    #[test]
    fn embed_identity_is_global_identity() {
        let layout = QubitLayout::new(&["a", "b", "c"]).unwrap();
        let e = embed(&ComplexMatrix::identity(2), &["b"], &layout).unwrap();
        assert_eq!(e, ComplexMatrix::identity(8));
    }

    #[test]
    fn embed_errors() {
        let layout = QubitLayout::new(&["q0", "q1"]).unwrap();
        assert!(matches!(
            embed(&pauli_x(), &["zz"], &layout),
            Err(LinalgError::UnknownVariable(_))
        ));
        assert!(matches!(
            embed(&pauli_x(), &["q0", "q1"], &layout),
            Err(LinalgError::DimensionMismatch(_))
        ));
        assert!(matches!(
            embed(&cnot(), &["q0", "q0"], &layout),
            Err(LinalgError::DuplicateVariable(_))
        ));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let layout = QubitLayout::new(&["a", "b"]).unwrap();
        let ra = ComplexMatrix::from_real(2, 2, &[0.7, 0.2, 0.2, 0.3]);
        let rb = ComplexMatrix::from_real(2, 2, &[0.25, 0.0, 0.0, 0.25]);
        let r = partial_trace(&tensor(&ra, &rb), &["b"], &layout).unwrap();
        assert!(r.max_abs_diff(&ra.scale_real(0.5)) < 1e-15);
        let r = partial_trace(&tensor(&ra, &rb), &["a"], &layout).unwrap();
        assert!(r.max_abs_diff(&rb) < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let layout = QubitLayout::new(&["q0", "q1"]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = vec![c(s), c(0.), c(0.), c(s)];
        let r = partial_trace(&ComplexMatrix::pure_state(&phi), &["q1"], &layout).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_of_nothing() {
        let layout = QubitLayout::new(&["q0"]).unwrap();
        let m = ComplexMatrix::from_real(2, 2, &[1., 2., 3., 4.]);
        let none: [&str; 0] = [];
        assert_eq!(partial_trace(&m, &none, &layout).unwrap(), m);
    }

    #[test]
    fn reduce_to_respects_requested_order() {
        let layout = QubitLayout::new(&["a", "b"]).unwrap();
        let ra = ComplexMatrix::from_real(2, 2, &[1., 0., 0., 0.]);
        let rb = ComplexMatrix::from_real(2, 2, &[0., 0., 0., 1.]);
        let rho = tensor(&ra, &rb);
        assert_eq!(
            reduce_to(&rho, &["b", "a"], &layout).unwrap(),
            tensor(&rb, &ra)
        );
    }

    #[test]
    fn eig_diagonal() {
        let m = ComplexMatrix::from_real(2, 2, &[1., 0., 0., 3.]);
        let e = eig_hermitian(&m, 1e-9).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        assert!(e.vectors[(1, 0)].norm() > 1.0 - 1e-12);
    }

    #[test]
    fn eig_pauli_x() {
        let e = eig_hermitian(&pauli_x(), 1e-9).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
        let plus = e.vectors.column(0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((inner(&plus, &[c(s), c(s)]).norm() - 1.0).abs() < 1e-12);
        let recon = &(&e.vectors
            * &ComplexMatrix::diag(&e.values.iter().map(|&v| c(v)).collect::<Vec<_>>()))
            * &e.vectors.adjoint();
        assert!(recon.max_abs_diff(&pauli_x()) < 1e-12);
    }

    #[test]
    fn eig_degenerate_complex_reconstructs() {
        // Rank-2 projector onto complex vectors, embedded sparsely in a 16x16 block.
        let i = C64::new(0.0, 1.0);
        let u = vec![
            c(0.5),
            i * 0.5,
            c(0.0),
            c(-0.5),
            c(0.0),
            i * -0.5,
            c(0.0),
            c(0.0),
        ];
        let v = vec![
            c(0.0),
            c(0.0),
            c(1.0),
            c(0.0),
            c(0.0),
            c(0.0),
            c(0.0),
            c(0.0),
        ];
        let small = &ComplexMatrix::outer(&u, &u) + &ComplexMatrix::outer(&v, &v);
        let m = tensor(&small, &ComplexMatrix::diag(&[c(1.0), c(0.0)]));
        let e = eig_hermitian(&m, 1e-9).unwrap();
        assert!(e.values.iter().all(|x| x.is_finite()));
        assert!((e.values[0] - 1.0).abs() < 1e-12 && (e.values[1] - 1.0).abs() < 1e-12);
        assert!(e.values[2].abs() < 1e-12);
        let recon = &(&e.vectors
            * &ComplexMatrix::diag(&e.values.iter().map(|&x| c(x)).collect::<Vec<_>>()))
            * &e.vectors.adjoint();
        assert!(recon.max_abs_diff(&m) < 1e-12);
        let gram = &e.vectors.adjoint() * &e.vectors;
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(16)) < 1e-12);
    }

    #[test]
    fn eig_zero_and_non_hermitian() {
        let e = eig_hermitian(&ComplexMatrix::zeros(3, 3), 1e-9).unwrap();
        assert!(e.values.iter().all(|v| v.abs() < 1e-15));
        let m = ComplexMatrix::from_real(2, 2, &[0., 1., 0., 0.]);
        assert!(matches!(
            eig_hermitian(&m, 1e-9),
            Err(LinalgError::NotHermitian(_))
        ));
    }

    #[test]
    fn orthonormalize_cases() {
        let v0 = vec![c(1.), c(0.)];
        let v0b = vec![c(2.), c(0.)];
        assert_eq!(orthonormalize(&[v0.clone(), v0b], 1e-9).len(), 1);
        let plus = vec![c(1.), c(1.)];
        let minus = vec![c(1.), c(-1.)];
        let b = orthonormalize(&[plus, minus], 1e-9);
        assert_eq!(b.len(), 2);
        assert!(inner(&b[0], &b[1]).norm() < 1e-15);
        assert!(orthonormalize(&[], 1e-9).is_empty());
    }

    #[test]
    fn complete_basis_fills_space() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b = vec![vec![c(s), c(0.), c(0.), c(s)]];
        let extra = complete_basis(&b, 4);
        assert_eq!(extra.len(), 3);
        let mut all = b.clone();
        all.extend(extra);
        let m = ComplexMatrix::from_columns(4, &all);
        assert!(m.unitarity_deviation() < 1e-14);
    }
}
