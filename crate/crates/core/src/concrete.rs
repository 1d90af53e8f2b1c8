//! Denotational semantics on partial density operators, Kraus extraction, and
//! state-preparation programs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{Program, Stmt, StmtKind};
use crate::linalg::{
    basis_vector, complete_basis, eig_hermitian, embed, ComplexMatrix, LinalgError, QubitLayout,
    Tolerances, C64, ONE, ZERO,
};
use crate::subspace::check_state;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    /// Some loop still held more than `trace_eps` of mass after `max_iters` unrollings.
    /// `partial` is the program output with every loop truncated at the budget.
    #[error("loop did not converge: accumulated trace {accumulated}, residual {residual}")]
    LoopBudgetExceeded {
        partial: Box<State>,
        accumulated: f64,
        residual: f64,
    },
    #[error("empty set of states")]
    EmptySet,
    #[error("state with trace {0} cannot be normalized")]
    ZeroState(f64),
    #[error("state has trace {0}, expected 1")]
    TraceNotOne(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A partial density operator over a qubit layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateWire", into = "StateWire")]
pub struct State {
    pub layout: QubitLayout,
    pub rho: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct StateWire {
    layout: Vec<String>,
    rho: Vec<Vec<C64>>,
}

impl From<State> for StateWire {
    fn from(s: State) -> Self {
        Self {
            layout: s.layout.names().to_vec(),
            rho: (0..s.rho.rows()).map(|r| s.rho.row(r).to_vec()).collect(),
        }
    }
}

impl TryFrom<StateWire> for State {
    type Error = LinalgError;

    fn try_from(w: StateWire) -> Result<Self, Self::Error> {
        let layout = QubitLayout::new(&w.layout)?;
        let rho = ComplexMatrix::from_rows(&w.rho)?;
        State::new(layout, rho, &Tolerances::default())
    }
}

impl State {
    /// Validated constructor: square of the layout's dimension, PSD, trace at most one.
    pub fn new(
        layout: QubitLayout,
        rho: ComplexMatrix,
        tol: &Tolerances,
    ) -> Result<Self, LinalgError> {
        let d = layout.dim();
        if rho.rows() != d || rho.cols() != d {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} state for {} qubit(s)",
                rho.rows(),
                rho.cols(),
                layout.len()
            )));
        }
        check_state(&rho, tol)?;
        Ok(Self { layout, rho })
    }

    pub fn pure(layout: QubitLayout, psi: &[C64]) -> Self {
        Self {
            rho: ComplexMatrix::pure_state(psi),
            layout,
        }
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }
}

/// Truncation of the infinite sum defining a loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopPolicy {
    pub trace_eps: f64,
    pub max_iters: usize,
}

impl Default for LoopPolicy {
    fn default() -> Self {
        Self {
            trace_eps: 1e-10,
            max_iters: 10_000,
        }
    }
}

/// Per-run bookkeeping of loop unrolling.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalStats {
    /// Total number of exit summands added across all loop executions.
    pub summands: usize,
    /// Set when a loop hit `max_iters`: (accumulated exit trace, residual in-loop trace).
    pub exceeded: Option<(f64, f64)>,
}

struct Evaluator<'a> {
    program: &'a Program,
    policy: LoopPolicy,
    stats: EvalStats,
}

impl Evaluator<'_> {
    fn block(
        &mut self,
        body: &[Stmt],
        mut rho: ComplexMatrix,
    ) -> Result<ComplexMatrix, LinalgError> {
        for s in body {
            rho = self.stmt(s, rho)?;
        }
        Ok(rho)
    }

    fn stmt(&mut self, s: &Stmt, rho: ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        let p = self.program;
        Ok(match &s.kind {
            StmtKind::Skip => rho,
            StmtKind::Init { targets } => {
                let k = 1usize << targets.len();
                let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
                for i in 0..k {
                    let op = embed(
                        &ComplexMatrix::outer(&basis_vector(k, 0), &basis_vector(k, i)),
                        targets,
                        &p.layout,
                    )?;
                    out = &out + &op.conjugate(&rho);
                }
                out
            }
            StmtKind::Unitary { targets, gate } => p.gate_operator(targets, gate)?.conjugate(&rho),
            StmtKind::Assert { targets, space } => {
                p.guard_operator(targets, space, false)?.conjugate(&rho)
            }
            StmtKind::If {
                targets,
                space,
                then_branch,
                else_branch,
            } => {
                let yes = p.guard_operator(targets, space, false)?.conjugate(&rho);
                let no = p.guard_operator(targets, space, true)?.conjugate(&rho);
                let a = self.block(then_branch, yes)?;
                let b = self.block(else_branch, no)?;
                &a + &b
            }
            StmtKind::While {
                targets,
                space,
                body,
            } => {
                let enter = p.guard_operator(targets, space, false)?;
                let exit = p.guard_operator(targets, space, true)?;
                let mut inside = rho;
                let mut acc = ComplexMatrix::zeros(inside.rows(), inside.cols());
                let mut iters = 0;
                loop {
                    acc = &acc + &exit.conjugate(&inside);
                    self.stats.summands += 1;
                    inside = self.block(body, enter.conjugate(&inside))?;
                    iters += 1;
                    let residual = inside.trace().re;
                    if residual < self.policy.trace_eps {
                        break;
                    }
                    if iters >= self.policy.max_iters {
                        let accumulated = acc.trace().re;
                        let (a0, r0) = self.stats.exceeded.unwrap_or((0.0, 0.0));
                        self.stats.exceeded = Some((a0 + accumulated, r0 + residual));
                        break;
                    }
                }
                acc
            }
        })
    }
}

/// Runs `body` (a fragment of `p`) on a raw density matrix.
pub fn eval_block(
    p: &Program,
    body: &[Stmt],
    rho: &ComplexMatrix,
    policy: LoopPolicy,
) -> Result<(ComplexMatrix, EvalStats), LinalgError> {
    let mut ev = Evaluator {
        program: p,
        policy,
        stats: EvalStats::default(),
    };
    let out = ev.block(body, rho.clone())?.hermitian_part();
    Ok((out, ev.stats))
}

/// Output state of `p` on `rho`.
///
/// Each loop contributes exit summands until the mass still inside the loop drops
/// below `trace_eps`.
pub fn eval(p: &Program, rho: &State, policy: LoopPolicy) -> Result<State, EvalError> {
    if rho.layout != p.layout {
        return Err(
            LinalgError::DimensionMismatch("state and program layouts differ".into()).into(),
        );
    }
    let (out, stats) = eval_block(p, &p.body, &rho.rho, policy)?;
    let state = State {
        layout: p.layout.clone(),
        rho: out,
    };
    match stats.exceeded {
        None => Ok(state),
        Some((accumulated, residual)) => Err(EvalError::LoopBudgetExceeded {
            partial: Box::new(state),
            accumulated,
            residual,
        }),
    }
}

/// Convenience wrapper over [`eval`] for raw matrices.
pub fn eval_matrix(
    p: &Program,
    rho: &ComplexMatrix,
    policy: LoopPolicy,
) -> Result<ComplexMatrix, EvalError> {
    let state = State {
        layout: p.layout.clone(),
        rho: rho.clone(),
    };
    eval(p, &state, policy).map(|s| s.rho)
}

/// Kraus operators of the channel computed by `p`, read off its Choi matrix.
pub fn kraus_of(
    p: &Program,
    policy: LoopPolicy,
    tol: &Tolerances,
) -> Result<Vec<ComplexMatrix>, EvalError> {
    let d = p.layout.dim();
    let run = |psi: &[C64]| eval_matrix(p, &ComplexMatrix::pure_state(psi), policy);
    let diag: Vec<ComplexMatrix> = (0..d)
        .map(|i| run(&basis_vector(d, i)))
        .collect::<Result<_, _>>()?;
    // Off-diagonal units from PSD inputs:
    // |i><j| = |+><+| + i|+i><+i| - (1+i)/2 (|i><i| + |j><j|).
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let iu = C64::new(0.0, 1.0);
    let mut units = vec![vec![ComplexMatrix::zeros(d, d); d]; d];
    for i in 0..d {
        units[i][i] = diag[i].clone();
        for j in i + 1..d {
            let mut plus = vec![ZERO; d];
            plus[i] = ONE * h;
            plus[j] = ONE * h;
            let mut plus_i = vec![ZERO; d];
            plus_i[i] = ONE * h;
            plus_i[j] = iu * h;
            let a = run(&plus)?;
            let b = run(&plus_i)?;
            let c = (&diag[i] + &diag[j]).scale(C64::new(0.5, 0.5));
            let eij = &(&a + &b.scale(iu)) - &c;
            units[j][i] = eij.adjoint();
            units[i][j] = eij;
        }
    }
    let choi = ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, a) = (r / d, r % d);
        let (j, b) = (c / d, c % d);
        units[i][j][(a, b)]
    });
    let eig = eig_hermitian(&choi.hermitian_part(), tol.herm_tol.max(1e-7))?;
    let lmax = eig.values.first().copied().unwrap_or(0.0);
    if lmax <= tol.zero_tol {
        return Ok(Vec::new());
    }
    Ok(eig
        .values
        .iter()
        .enumerate()
        .take_while(|(_, &l)| l > tol.rank_tol * lmax)
        .map(|(k, &l)| {
            let v = eig.vectors.column(k);
            let s = l.sqrt();
            ComplexMatrix::from_fn(d, d, |a, i| v[i * d + a] * s)
        })
        .collect())
}

/// Applies a Kraus family: `Σ_k E_k ρ E_k†`.
pub fn apply_kraus(ops: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    ops.iter()
        .fold(ComplexMatrix::zeros(rho.rows(), rho.cols()), |acc, e| {
            &acc + &e.conjugate(rho)
        })
}

/// Uniform mixture of the normalized members; its support is the join of theirs.
pub fn mix_representative(
    states: &[ComplexMatrix],
    tol: &Tolerances,
) -> Result<ComplexMatrix, EvalError> {
    let first = states.first().ok_or(EvalError::EmptySet)?;
    let mut acc = ComplexMatrix::zeros(first.rows(), first.cols());
    for rho in states {
        let tr = rho.trace().re;
        if tr <= tol.rank_tol {
            return Err(EvalError::ZeroState(tr));
        }
        acc = &acc + &rho.scale_real(1.0 / tr);
    }
    Ok(acc.scale_real(1.0 / states.len() as f64))
}

/// Program mapping every input σ to `Tr(σ)·ρ`.
///
/// Resets all qubits, rotates `|0…0⟩` to the purification-like vector `Σ √λ_i |ψ_i⟩`,
/// then dephases in the eigenbasis of ρ with a chain of conditionals.
pub fn prepare_program(rho: &State, tol: &Tolerances) -> Result<Program, EvalError> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > tol.trace_tol.max(1e-9) {
        return Err(EvalError::TraceNotOne(tr));
    }
    let d = rho.layout.dim();
    let eig = eig_hermitian(&rho.rho, tol.herm_tol)?;
    let eigvecs = eig.vectors.columns();
    let mut psi = vec![ZERO; d];
    for (l, v) in eig.values.iter().zip(&eigvecs) {
        let w = l.max(0.0).sqrt();
        for (p, x) in psi.iter_mut().zip(v) {
            *p += x * w;
        }
    }
    let n = crate::linalg::norm(&psi);
    for x in &mut psi {
        *x /= n;
    }
    let mut cols = vec![psi.clone()];
    cols.extend(complete_basis(&cols, d));
    let u = ComplexMatrix::from_columns(d, &cols);

    let names = rho.layout.names().to_vec();
    let mut program = Program::new(rho.layout.clone());
    program.declare_unitary("Uprep", u);
    for (i, v) in eigvecs.iter().take(d - 1).enumerate() {
        program.declare_space(&format!("P{i}"), vec![v.clone()])?;
    }
    let skip = || Stmt::new(StmtKind::Skip);
    let mut chain = vec![skip()];
    for i in (0..d - 1).rev() {
        chain = vec![Stmt::new(StmtKind::If {
            targets: names.clone(),
            space: format!("P{i}"),
            then_branch: vec![skip()],
            else_branch: chain,
        })];
    }
    let mut body = vec![
        Stmt::new(StmtKind::Init {
            targets: names.clone(),
        }),
        Stmt::new(StmtKind::Unitary {
            targets: names,
            gate: "Uprep".into(),
        }),
    ];
    body.extend(chain);
    Ok(program.with_body(body))
}
