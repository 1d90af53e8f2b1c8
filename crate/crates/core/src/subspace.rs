//! The lattice of subspaces of a Hilbert space, stored as orthonormal bases.

use serde::{Deserialize, Serialize};

use crate::linalg::{
    basis_vector, complete_basis, eig_hermitian, inner, norm, orthonormalize,
    orthonormalize_scaled, ComplexMatrix, LinalgError, Tolerances, C64,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubspaceWire", into = "SubspaceWire")]
pub struct Subspace {
    ambient_dim: usize,
    basis: Vec<Vec<C64>>,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: (0..ambient_dim)
                .map(|i| basis_vector(ambient_dim, i))
                .collect(),
        }
    }

    /// Span of arbitrary vectors.
    pub fn span(
        ambient_dim: usize,
        vectors: &[Vec<C64>],
        tol: &Tolerances,
    ) -> Result<Self, LinalgError> {
        if let Some(v) = vectors.iter().find(|v| v.len() != ambient_dim) {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector of length {} in a {ambient_dim}-dimensional space",
                v.len()
            )));
        }
        Ok(Self {
            ambient_dim,
            basis: orthonormalize(vectors, tol.rank_tol),
        })
    }

    /// Span of computational basis states given by index.
    pub fn computational(ambient_dim: usize, indices: &[usize]) -> Self {
        let vectors: Vec<_> = indices
            .iter()
            .map(|&i| basis_vector(ambient_dim, i))
            .collect();
        Self {
            ambient_dim,
            basis: orthonormalize(&vectors, 1e-12),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[Vec<C64>] {
        &self.basis
    }

    pub fn projector(&self) -> ComplexMatrix {
        let mut p = ComplexMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for b in &self.basis {
            for r in 0..self.ambient_dim {
                for c in 0..self.ambient_dim {
                    p[(r, c)] += b[r] * b[c].conj();
                }
            }
        }
        p
    }

    /// Norm of the component of `v` outside this subspace.
    pub fn residual_norm(&self, v: &[C64]) -> f64 {
        norm(&self.residual(v))
    }

    fn residual(&self, v: &[C64]) -> Vec<C64> {
        let mut w = v.to_vec();
        for _ in 0..2 {
            for b in &self.basis {
                let c = inner(b, &w);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        w
    }

    fn check_same(&self, other: &Self) -> Result<(), LinalgError> {
        if self.ambient_dim != other.ambient_dim {
            return Err(LinalgError::DimensionMismatch(format!(
                "subspaces of C^{} and C^{}",
                self.ambient_dim, other.ambient_dim
            )));
        }
        Ok(())
    }

    /// `max |(I - P_other) B_self|` entrywise.
    pub fn leq_residual(&self, other: &Self) -> Result<f64, LinalgError> {
        self.check_same(other)?;
        Ok(self
            .basis
            .iter()
            .flat_map(|b| other.residual(b))
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    pub fn leq(&self, other: &Self, tol: &Tolerances) -> Result<bool, LinalgError> {
        Ok(self.leq_residual(other)? <= tol.incl_tol)
    }

    /// Subspace equality, i.e. mutual inclusion.
    pub fn same_as(&self, other: &Self, tol: &Tolerances) -> Result<bool, LinalgError> {
        Ok(self.leq(other, tol)? && other.leq(self, tol)?)
    }

    pub fn join(&self, other: &Self, tol: &Tolerances) -> Result<Self, LinalgError> {
        self.check_same(other)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.clone());
        }
        let mut vectors = self.basis.clone();
        vectors.extend(other.basis.iter().cloned());
        Ok(Self {
            ambient_dim: self.ambient_dim,
            basis: orthonormalize(&vectors, tol.rank_tol),
        })
    }

    pub fn meet(&self, other: &Self, tol: &Tolerances) -> Result<Self, LinalgError> {
        self.check_same(other)?;
        let j = self.orthocomplement().join(&other.orthocomplement(), tol)?;
        Ok(j.orthocomplement())
    }

    pub fn orthocomplement(&self) -> Self {
        Self {
            ambient_dim: self.ambient_dim,
            basis: complete_basis(&self.basis, self.ambient_dim),
        }
    }

    /// Span of `op` applied to every vector of the subspace.
    pub fn image(&self, op: &ComplexMatrix, tol: &Tolerances) -> Result<Self, LinalgError> {
        if op.cols() != self.ambient_dim {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} operator on C^{}",
                op.rows(),
                op.cols(),
                self.ambient_dim
            )));
        }
        let images: Vec<Vec<C64>> = self.basis.iter().map(|b| op.apply(b)).collect();
        Ok(Self {
            ambient_dim: op.rows(),
            basis: orthonormalize_scaled(&images, tol.rank_tol, column_scale(op)),
        })
    }

    /// Joint image under a family of operators (e.g. Kraus operators).
    pub fn image_all(&self, ops: &[ComplexMatrix], tol: &Tolerances) -> Result<Self, LinalgError> {
        let rows = ops.first().map_or(self.ambient_dim, ComplexMatrix::rows);
        let mut images = Vec::new();
        for op in ops {
            if op.cols() != self.ambient_dim || op.rows() != rows {
                return Err(LinalgError::DimensionMismatch(
                    "Kraus operator shape".into(),
                ));
            }
            images.extend(self.basis.iter().map(|b| op.apply(b)));
        }
        let scale = ops.iter().map(column_scale).fold(0.0, f64::max);
        Ok(Self {
            ambient_dim: rows,
            basis: orthonormalize_scaled(&images, tol.rank_tol, scale),
        })
    }

    /// Basis obtained by orthonormalizing the projector's columns in index order.
    ///
    /// Subspaces spanned by computational basis states get computational basis vectors.
    pub fn canonical_basis(&self, tol: &Tolerances) -> Vec<Vec<C64>> {
        let p = self.projector();
        let basis = orthonormalize(&p.columns(), tol.rank_tol.max(1e-10));
        if basis.len() == self.dim() {
            basis
        } else {
            self.basis.clone()
        }
    }

    /// Rebuilds the basis from its projector columns; see [`Subspace::canonical_basis`].
    pub fn canonicalized(&self, tol: &Tolerances) -> Self {
        Self {
            ambient_dim: self.ambient_dim,
            basis: self.canonical_basis(tol),
        }
    }
}

/// Largest column norm of `op`, a lower bound on its operator norm.
fn column_scale(op: &ComplexMatrix) -> f64 {
    (0..op.cols())
        .map(|c| norm(&op.column(c)))
        .fold(0.0, f64::max)
}

/// Checks that `rho` is a partial density operator.
pub fn check_state(rho: &ComplexMatrix, tol: &Tolerances) -> Result<(), LinalgError> {
    let tr = rho.trace().re;
    if tr > 1.0 + tol.trace_tol {
        return Err(LinalgError::TraceTooLarge(tr));
    }
    support(rho, tol).map(|_| ())
}

/// Span of the eigenvectors of `rho` whose eigenvalue exceeds `rank_tol · λ_max`.
pub fn support(rho: &ComplexMatrix, tol: &Tolerances) -> Result<Subspace, LinalgError> {
    if !rho.is_square() {
        return Err(LinalgError::DimensionMismatch("non-square state".into()));
    }
    let n = rho.rows();
    let eig = eig_hermitian(rho, tol.herm_tol)?;
    let lmax = eig.values.first().copied().unwrap_or(0.0);
    let lmin = eig.values.last().copied().unwrap_or(0.0);
    if lmin < -tol.herm_tol * lmax.abs().max(1.0) {
        return Err(LinalgError::NotPsd(lmin));
    }
    if lmax <= tol.zero_tol {
        return Ok(Subspace::zero(n));
    }
    let cutoff = tol.rank_tol * lmax;
    let basis = eig
        .values
        .iter()
        .enumerate()
        .take_while(|(_, &v)| v > cutoff)
        .map(|(i, _)| eig.vectors.column(i))
        .collect();
    Ok(Subspace {
        ambient_dim: n,
        basis,
    })
}

/// Abstraction of a finite set of states: the join of their supports.
pub fn alpha_s(
    ambient_dim: usize,
    states: &[ComplexMatrix],
    tol: &Tolerances,
) -> Result<Subspace, LinalgError> {
    for rho in states {
        check_state(rho, tol)?;
    }
    joint_support(ambient_dim, states, tol)
}

/// Join of the supports of PSD matrices, computed as the support of `Σ ρ_j / Tr ρ_j`.
///
/// One eigendecomposition of the sum is better conditioned than joining per-state
/// supports: eigenvectors of eigenvalues near the rank cutoff are only accurate to
/// about `ε / λ`, and a join would turn that error into a spurious dimension.
pub fn joint_support(
    ambient_dim: usize,
    states: &[ComplexMatrix],
    tol: &Tolerances,
) -> Result<Subspace, LinalgError> {
    let mut sum = ComplexMatrix::zeros(ambient_dim, ambient_dim);
    for rho in states {
        if rho.rows() != ambient_dim || !rho.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} state in a {ambient_dim}-dimensional space",
                rho.rows(),
                rho.cols()
            )));
        }
        let tr = rho.trace().re;
        if tr > tol.zero_tol {
            sum = &sum + &rho.scale_real(1.0 / tr);
        }
    }
    support(&sum, tol)
}

/// Membership of `rho` in the concretization of `p`.
pub fn gamma_s_contains(
    p: &Subspace,
    rho: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<bool, LinalgError> {
    check_state(rho, tol)?;
    support(rho, tol)?.leq(p, tol)
}

#[derive(Serialize, Deserialize)]
struct SubspaceWire {
    ambient_dim: usize,
    /// Basis vectors concatenated column after column, each entry `[re, im]`.
    basis: Vec<[f64; 2]>,
}

impl From<Subspace> for SubspaceWire {
    fn from(s: Subspace) -> Self {
        Self {
            ambient_dim: s.ambient_dim,
            basis: s.basis.iter().flatten().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<SubspaceWire> for Subspace {
    type Error = String;

    fn try_from(w: SubspaceWire) -> Result<Self, String> {
        if w.ambient_dim == 0 {
            if w.basis.is_empty() {
                return Ok(Subspace::zero(0));
            }
            return Err("basis entries for a zero-dimensional space".into());
        }
        if !w.basis.len().is_multiple_of(w.ambient_dim) {
            return Err(format!(
                "{} basis entries is not a multiple of ambient_dim {}",
                w.basis.len(),
                w.ambient_dim
            ));
        }
        let vectors: Vec<Vec<C64>> = w
            .basis
            .chunks(w.ambient_dim)
            .map(|c| c.iter().map(|&[re, im]| C64::new(re, im)).collect())
            .collect();
        let gram = ComplexMatrix::from_fn(vectors.len(), vectors.len(), |r, c| {
            inner(&vectors[r], &vectors[c])
        });
        let basis = if gram.max_abs_diff(&ComplexMatrix::identity(vectors.len())) <= 1e-10 {
            vectors
        } else {
            orthonormalize(&vectors, Tolerances::default().rank_tol)
        };
        Ok(Subspace {
            ambient_dim: w.ambient_dim,
            basis,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn projector_extremes() {
        assert_eq!(Subspace::full(4).projector(), ComplexMatrix::identity(4));
        assert_eq!(Subspace::zero(4).projector(), ComplexMatrix::zeros(4, 4));
        let p = Subspace::computational(4, &[0, 3]).projector();
        assert_eq!(p, ComplexMatrix::diag(&[ONE, c(0.), c(0.), ONE]));
    }

    #[test]
    fn support_examples() {
        let s = support(&ComplexMatrix::pure_state(&[c(1.), c(0.)]), &tol()).unwrap();
        assert!(s
            .same_as(&Subspace::computational(2, &[0]), &tol())
            .unwrap());
        let s = support(&ComplexMatrix::identity(2).scale_real(0.5), &tol()).unwrap();
        assert_eq!(s.dim(), 2);
        let phi = [c(S), c(0.), c(0.), c(S)];
        let rho = &ComplexMatrix::pure_state(&phi).scale_real(0.5)
            + &ComplexMatrix::pure_state(&[c(1.), c(0.), c(0.), c(0.)]).scale_real(0.5);
        let s = support(&rho, &tol()).unwrap();
        assert!(s
            .same_as(&Subspace::computational(4, &[0, 3]), &tol())
            .unwrap());
    }

    #[test]
    fn support_rejects_negative() {
        let m = ComplexMatrix::from_real(2, 2, &[1., 0., 0., -0.5]);
        assert!(matches!(support(&m, &tol()), Err(LinalgError::NotPsd(_))));
    }

    #[test]
    fn leq_examples() {
        let t = tol();
        assert!(Subspace::zero(4)
            .leq(&Subspace::computational(4, &[2]), &t)
            .unwrap());
        assert!(Subspace::computational(4, &[0])
            .leq(&Subspace::computational(4, &[0, 3]), &t)
            .unwrap());
        let plus = Subspace::span(2, &[vec![c(S), c(S)]], &t).unwrap();
        let zero = Subspace::computational(2, &[0]);
        assert!(!plus.leq(&zero, &t).unwrap());
        assert!((plus.leq_residual(&zero).unwrap() - S).abs() < 1e-12);
        assert!(Subspace::zero(2).leq(&Subspace::zero(4), &t).is_err());
    }

    #[test]
    fn lattice_operations() {
        let t = tol();
        let j = Subspace::computational(2, &[0])
            .join(&Subspace::computational(2, &[1]), &t)
            .unwrap();
        assert_eq!(j.dim(), 2);
        let m = Subspace::computational(4, &[0, 3])
            .meet(&Subspace::computational(4, &[0, 1]), &t)
            .unwrap();
        assert!(m.same_as(&Subspace::computational(4, &[0]), &t).unwrap());
        assert!(Subspace::full(8).orthocomplement().is_zero());
        assert_eq!(Subspace::zero(8).orthocomplement().dim(), 8);
    }

    #[test]
    fn image_examples() {
        let t = tol();
        let s = Subspace::span(4, &[vec![c(1.), c(2.), c(0.), c(0.)]], &t).unwrap();
        assert!(s
            .image(&ComplexMatrix::identity(4), &t)
            .unwrap()
            .same_as(&s, &t)
            .unwrap());
        let p00 = Subspace::computational(4, &[0]).projector();
        let phi = Subspace::span(4, &[vec![c(S), c(0.), c(0.), c(S)]], &t).unwrap();
        let img = phi.image(&p00, &t).unwrap();
        assert!(img.same_as(&Subspace::computational(4, &[0]), &t).unwrap());
        let h = ComplexMatrix::from_real(2, 2, &[S, S, S, -S]);
        assert_eq!(Subspace::full(2).image(&h, &t).unwrap().dim(), 2);
        // Images that are all rounding noise give the zero subspace.
        let noisy = Subspace::span(2, &[vec![c(1.), c(1e-16)]], &t).unwrap();
        let p1 = Subspace::computational(2, &[1]).projector();
        assert!(noisy.image(&p1, &t).unwrap().is_zero());
        assert!(noisy.image_all(&[p1], &t).unwrap().is_zero());
    }

    #[test]
    fn alpha_gamma_examples() {
        let t = tol();
        let states = [
            ComplexMatrix::pure_state(&[c(1.), c(0.)]),
            ComplexMatrix::pure_state(&[c(0.), c(1.)]),
        ];
        assert_eq!(alpha_s(2, &states, &t).unwrap().dim(), 2);
        assert!(alpha_s(2, &[], &t).unwrap().is_zero());
        let phi = ComplexMatrix::pure_state(&[c(S), c(0.), c(0.), c(S)]);
        assert!(gamma_s_contains(&Subspace::computational(4, &[0, 3]), &phi, &t).unwrap());
        let big = ComplexMatrix::identity(2);
        assert!(matches!(
            gamma_s_contains(&Subspace::full(2), &big, &t),
            Err(LinalgError::TraceTooLarge(_))
        ));
    }

    #[test]
    fn canonical_basis_is_computational_when_possible() {
        let t = tol();
        let ghz_plus = vec![c(S), c(0.), c(0.), c(0.), c(0.), c(0.), c(0.), c(S)];
        let ghz_minus = vec![c(S), c(0.), c(0.), c(0.), c(0.), c(0.), c(0.), c(-S)];
        let s = Subspace::span(8, &[ghz_plus, ghz_minus], &t).unwrap();
        let b = s.canonical_basis(&t);
        assert_eq!(b.len(), 2);
        assert!((b[0][0].norm() - 1.0).abs() < 1e-12);
        assert!((b[1][7].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let t = tol();
        let s = Subspace::span(4, &[vec![c(1.), C64::new(0., 1.), c(0.), c(0.)]], &t).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: Subspace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["ambient_dim"], 4);
        assert_eq!(v["basis"].as_array().unwrap().len(), 4);
    }
}
