//! Seeded generators for states, subspaces, unitaries and programs.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::lang::{Program, Stmt, StmtKind, BUILTIN_GATES};
use crate::linalg::{orthonormalize, ComplexMatrix, QubitLayout, Tolerances, C64, ZERO};
use crate::subspace::Subspace;

pub fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Uniformly distributed unit vector of `C^dim`.
pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v = gaussian_vector(dim, rng);
        let n = crate::linalg::norm(&v);
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform unit vector of a nonzero subspace, expressed in the ambient space.
pub fn random_pure_in<R: Rng + ?Sized>(sub: &Subspace, rng: &mut R) -> Vec<C64> {
    let coeffs = random_pure(sub.dim(), rng);
    let mut v = vec![ZERO; sub.ambient_dim()];
    for (c, b) in coeffs.iter().zip(sub.basis()) {
        for (x, y) in v.iter_mut().zip(b) {
            *x += c * y;
        }
    }
    v
}

/// Trace-one mixture of `rank` random pure states from `sub` with random weights.
pub fn random_state_in<R: Rng + ?Sized>(sub: &Subspace, rank: usize, rng: &mut R) -> ComplexMatrix {
    let weights: Vec<f64> = (0..rank.max(1))
        .map(|_| rng.sample::<f64, _>(Exp1) + 1e-3)
        .collect();
    let total: f64 = weights.iter().sum();
    let d = sub.ambient_dim();
    weights.iter().fold(ComplexMatrix::zeros(d, d), |acc, w| {
        &acc + &ComplexMatrix::pure_state(&random_pure_in(sub, rng)).scale_real(w / total)
    })
}

/// Random density matrix of the given rank (trace one).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> ComplexMatrix {
    random_state_in(&Subspace::full(dim), rank, rng)
}

/// Density matrix with random rank in `1..=dim` and trace in `(0.1, 1]`.
pub fn random_partial_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let rank = rng.random_range(1..=dim);
    let scale = if rng.random_bool(0.5) {
        1.0
    } else {
        rng.random_range(0.1..1.0)
    };
    random_density(dim, rank, rng).scale_real(scale)
}

/// Span of `k` random vectors, or of `k` random computational basis states with probability 1/3.
pub fn random_subspace<R: Rng + ?Sized>(dim: usize, k: usize, rng: &mut R) -> Subspace {
    let k = k.min(dim);
    if rng.random_range(0..3) == 0 {
        let mut idx: Vec<usize> = (0..dim).collect();
        for i in 0..k {
            let j = rng.random_range(i..dim);
            idx.swap(i, j);
        }
        return Subspace::computational(dim, &idx[..k]);
    }
    let vs: Vec<Vec<C64>> = (0..k).map(|_| gaussian_vector(dim, rng)).collect();
    Subspace::span(dim, &vs, &Tolerances::default()).expect("uniform lengths")
}

/// Haar-distributed unitary (Gram-Schmidt of a complex Ginibre matrix).
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    loop {
        let cols: Vec<Vec<C64>> = (0..dim).map(|_| gaussian_vector(dim, rng)).collect();
        let q = orthonormalize(&cols, 1e-8);
        if q.len() == dim {
            return ComplexMatrix::from_columns(dim, &q);
        }
    }
}

/// Shape of generated programs.
#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_qubits: usize,
    /// Upper bound on the number of statements, counting nested ones.
    pub max_stmts: usize,
    pub loops: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_qubits: 3,
            max_stmts: 8,
            loops: true,
        }
    }
}

struct Gen<'r, R: Rng + ?Sized> {
    rng: &'r mut R,
    program: Program,
    budget: usize,
}

impl<R: Rng + ?Sized> Gen<'_, R> {
    fn targets(&mut self, max: usize) -> Vec<String> {
        let mut names = self.program.layout.names().to_vec();
        let k = self.rng.random_range(1..=max.min(names.len()));
        for i in 0..k {
            let j = self.rng.random_range(i..names.len());
            names.swap(i, j);
        }
        names.truncate(k);
        names
    }

    fn fresh(&self, prefix: &str) -> String {
        let n = self.program.unitaries.len() + self.program.spaces.len();
        format!("{prefix}{n}")
    }

    fn declare_haar(&mut self, arity: usize) -> String {
        let name = self.fresh("U");
        let u = haar_unitary(1 << arity, self.rng);
        self.program.declare_unitary(&name, u);
        name
    }

    fn gate(&mut self, targets: &[String]) -> String {
        let k = targets.len();
        if self.rng.random_bool(0.4) {
            return self.declare_haar(k);
        }
        let pool: Vec<&str> = BUILTIN_GATES
            .iter()
            .copied()
            .filter(|g| crate::lang::builtin_gate(g).is_some_and(|m| m.rows() == 1 << k))
            .collect();
        if pool.is_empty() {
            return self.declare_haar(k);
        }
        pool[self.rng.random_range(0..pool.len())].to_string()
    }

    /// A guard space on `k` qubits; `proper` excludes the full space.
    fn space(&mut self, k: usize, proper: bool) -> String {
        let d = 1usize << k;
        match self.rng.random_range(0..if proper { 3 } else { 4 }) {
            0 => "zero".into(),
            1 => "one".into(),
            2 => {
                let name = self.fresh("P");
                let dim = self.rng.random_range(1..d);
                let vectors: Vec<Vec<C64>> = if self.rng.random_bool(0.3) {
                    random_subspace(d, dim, self.rng).basis().to_vec()
                } else {
                    (0..dim).map(|_| gaussian_vector(d, self.rng)).collect()
                };
                self.program
                    .declare_space(&name, vectors)
                    .expect("uniform lengths");
                name
            }
            _ => "full".into(),
        }
    }

    fn block(&mut self, in_loop: bool) -> Vec<Stmt> {
        let mut out = vec![self.stmt(in_loop)];
        while self.budget > 0 && self.rng.random_bool(0.6) {
            out.push(self.stmt(in_loop));
        }
        out
    }

    fn stmt(&mut self, in_loop: bool) -> Stmt {
        self.budget = self.budget.saturating_sub(1);
        let compound = self.budget >= 2;
        let choice = self.rng.random_range(0..if compound { 9 } else { 6 });
        let kind = match choice {
            0 => StmtKind::Skip,
            1 => StmtKind::Init {
                targets: self.targets(2),
            },
            2..=4 => {
                let targets = self.targets(2);
                let gate = self.gate(&targets);
                StmtKind::Unitary { targets, gate }
            }
            5 => {
                let targets = self.targets(2);
                let space = self.space(targets.len(), false);
                StmtKind::Assert { targets, space }
            }
            8 if !in_loop => {
                let targets = self.targets(2);
                let space = self.space(targets.len(), true);
                self.budget = self.budget.saturating_sub(1);
                let mut body = if self.budget > 0 && self.rng.random_bool(0.5) {
                    self.block(true)
                } else {
                    Vec::new()
                };
                // A generic rotation on the guard qubits makes the loop exit geometrically.
                let gate = self.declare_haar(targets.len());
                body.push(Stmt::new(StmtKind::Unitary {
                    targets: targets.clone(),
                    gate,
                }));
                StmtKind::While {
                    targets,
                    space,
                    body,
                }
            }
            _ => {
                let targets = self.targets(2);
                let space = self.space(targets.len(), false);
                let then_branch = self.block(in_loop);
                let else_branch = self.block(in_loop);
                StmtKind::If {
                    targets,
                    space,
                    then_branch,
                    else_branch,
                }
            }
        };
        Stmt::new(kind)
    }
}

/// Random well-formed program over `q0..q{n-1}` with `n ≤ cfg.max_qubits`.
pub fn random_program<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Program {
    let n = rng.random_range(1..=cfg.max_qubits.max(1));
    let names: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    random_program_on(&QubitLayout::new(&names).expect("distinct names"), cfg, rng)
}

pub fn random_program_on<R: Rng + ?Sized>(
    layout: &QubitLayout,
    cfg: &GenConfig,
    rng: &mut R,
) -> Program {
    let mut g = Gen {
        rng,
        program: Program::new(layout.clone()),
        budget: cfg.max_stmts.max(1),
    };
    // Generating as if inside a loop suppresses further loops.
    let body = g.block(!cfg.loops);
    g.program.with_body(body)
}
