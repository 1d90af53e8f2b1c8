//! Subspace and local-subspace abstract domains and the forward analyzer.
//!
//! A global element is a subspace `Q` of the whole state space; it describes the
//! states whose support lies in `Q`. A local element fixes a signature
//! `(s_1, …, s_m)` of proper qubit subsets and keeps one subspace per subset; it
//! describes the states whose reduced state on each `s_i` has support in the
//! `i`-th part. Local transfers are the best abstractions of the global ones.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concrete::{eval_block, LoopPolicy};
use crate::lang::{Program, Span, Stmt, StmtKind};
use crate::linalg::{
    basis_vector, embed, local_to_global_index, partial_trace, reduce_to, ComplexMatrix,
    LinalgError, QubitLayout, Tolerances, C64, ZERO,
};
use crate::random::{random_pure_in, random_state_in};
use crate::subspace::{joint_support, support, Subspace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid signature: {0}")]
    InvalidSignature(String),
    #[error("loop analysis did not stabilize within {0} iterations")]
    FixpointBudget(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tuple of proper, nonempty qubit subsets; subsets may overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(Vec<Vec<String>>);

impl Signature {
    pub fn new(subsets: Vec<Vec<String>>) -> Result<Self, DomainError> {
        if subsets.is_empty() {
            return Err(DomainError::InvalidSignature("no subsets".into()));
        }
        for s in &subsets {
            if s.is_empty() {
                return Err(DomainError::InvalidSignature("empty subset".into()));
            }
            let mut sorted = s.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != s.len() {
                return Err(DomainError::InvalidSignature(format!(
                    "repeated qubit in {s:?}"
                )));
            }
        }
        Ok(Self(subsets))
    }

    /// Parses `q1,q2;q2,q3`.
    pub fn parse(text: &str) -> Result<Self, DomainError> {
        Self::new(
            text.split(';')
                .map(|s| {
                    s.split(',')
                        .map(|q| q.trim().to_string())
                        .filter(|q| !q.is_empty())
                        .collect()
                })
                .collect(),
        )
    }

    /// Every proper subset in `subsets` must name declared qubits and leave at least one out.
    pub fn validate(&self, layout: &QubitLayout) -> Result<(), DomainError> {
        for s in &self.0 {
            for q in s {
                if !layout.contains(q) {
                    return Err(DomainError::InvalidSignature(format!(
                        "unknown qubit `{q}`"
                    )));
                }
            }
            if s.len() >= layout.len() {
                return Err(DomainError::InvalidSignature(format!(
                    "{s:?} is not a proper subset"
                )));
            }
        }
        Ok(())
    }

    pub fn subsets(&self) -> &[Vec<String>] {
        &self.0
    }

    /// Length of the longest strict chain: `Σ 2^|s_i|`.
    pub fn height(&self) -> usize {
        self.0.iter().map(|s| 1usize << s.len()).sum()
    }

    /// All subsets of the given size, in lexicographic order of positions.
    pub fn all_of_size(layout: &QubitLayout, k: usize) -> Result<Self, DomainError> {
        fn rec(
            names: &[String],
            k: usize,
            start: usize,
            cur: &mut Vec<String>,
            out: &mut Vec<Vec<String>>,
        ) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..names.len() {
                cur.push(names[i].clone());
                rec(names, k, i + 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(layout.names(), k, 0, &mut Vec::new(), &mut out);
        let sig = Self::new(out)?;
        sig.validate(layout)?;
        Ok(sig)
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.join(",")).collect();
        write!(f, "{}", parts.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainKind {
    Subspace,
    LocalSubspace(Signature),
}

impl DomainKind {
    /// Parses `subspace` or `local:q1,q2;q2,q3`.
    pub fn parse(text: &str) -> Result<Self, DomainError> {
        if text == "subspace" {
            Ok(Self::Subspace)
        } else if let Some(sig) = text.strip_prefix("local:") {
            Ok(Self::LocalSubspace(Signature::parse(sig)?))
        } else {
            Err(DomainError::InvalidSignature(format!(
                "unknown domain `{text}`"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElementWire", into = "ElementWire")]
pub enum AbstractElement {
    Global(Subspace),
    Local {
        signature: Signature,
        parts: Vec<Subspace>,
    },
}

#[derive(Serialize, Deserialize)]
struct ElementWire {
    kind: String,
    #[serde(default)]
    signature: Vec<Vec<String>>,
    parts: Vec<Subspace>,
}

impl From<AbstractElement> for ElementWire {
    fn from(e: AbstractElement) -> Self {
        match e {
            AbstractElement::Global(s) => Self {
                kind: "subspace".into(),
                signature: Vec::new(),
                parts: vec![s],
            },
            AbstractElement::Local { signature, parts } => Self {
                kind: "local".into(),
                signature: signature.0,
                parts,
            },
        }
    }
}

impl TryFrom<ElementWire> for AbstractElement {
    type Error = DomainError;

    fn try_from(w: ElementWire) -> Result<Self, Self::Error> {
        match w.kind.as_str() {
            "subspace" => {
                let [part]: [Subspace; 1] = w.parts.try_into().map_err(|_| {
                    DomainError::ShapeMismatch("global element needs exactly one part".into())
                })?;
                Ok(Self::Global(part))
            }
            "local" => {
                let signature = Signature::new(w.signature)?;
                if signature.0.len() != w.parts.len() {
                    return Err(DomainError::ShapeMismatch(
                        "one part per subset expected".into(),
                    ));
                }
                for (s, p) in signature.0.iter().zip(&w.parts) {
                    if p.ambient_dim() != 1 << s.len() {
                        return Err(DomainError::ShapeMismatch(format!(
                            "part for {s:?} has dimension {}",
                            p.ambient_dim()
                        )));
                    }
                }
                Ok(Self::Local {
                    signature,
                    parts: w.parts,
                })
            }
            other => Err(DomainError::ShapeMismatch(format!(
                "unknown element kind `{other}`"
            ))),
        }
    }
}

impl AbstractElement {
    pub fn parts(&self) -> &[Subspace] {
        match self {
            Self::Global(s) => std::slice::from_ref(s),
            Self::Local { parts, .. } => parts,
        }
    }

    pub fn as_global(&self) -> Option<&Subspace> {
        match self {
            Self::Global(s) => Some(s),
            Self::Local { .. } => None,
        }
    }
}

/// One step of a straight-line fragment: a statement or a branch guard.
///
/// Guards are the implicit `assert P` / `assert P⊥` of conditionals and loops.
#[derive(Debug, Clone, Copy)]
pub enum Item<'a> {
    Stmt(&'a Stmt),
    Guard {
        targets: &'a [String],
        space: &'a str,
        negate: bool,
        span: Span,
    },
}

impl<'a> Item<'a> {
    pub fn span(&self) -> Span {
        match self {
            Item::Stmt(s) => s.span,
            Item::Guard { span, .. } => *span,
        }
    }

    pub fn is_basic(&self) -> bool {
        match self {
            Item::Stmt(s) => !matches!(s.kind, StmtKind::If { .. } | StmtKind::While { .. }),
            Item::Guard { .. } => true,
        }
    }

    pub fn guard(stmt: &'a Stmt, negate: bool) -> Option<Self> {
        match &stmt.kind {
            StmtKind::If { targets, space, .. } | StmtKind::While { targets, space, .. } => {
                Some(Item::Guard {
                    targets,
                    space,
                    negate,
                    span: stmt.span,
                })
            }
            _ => None,
        }
    }
}

pub fn items(body: &[Stmt]) -> Vec<Item<'_>> {
    body.iter().map(Item::Stmt).collect()
}

/// Iteration counts of every loop analysis performed.
#[derive(Debug, Clone, Default)]
pub struct AnalysisStats {
    pub loop_iterations: Vec<usize>,
}

/// A domain instantiated over a qubit layout.
#[derive(Debug, Clone)]
pub struct Domain {
    pub kind: DomainKind,
    pub layout: QubitLayout,
    pub tol: Tolerances,
}

impl Domain {
    pub fn new(
        kind: DomainKind,
        layout: QubitLayout,
        tol: Tolerances,
    ) -> Result<Self, DomainError> {
        if let DomainKind::LocalSubspace(sig) = &kind {
            sig.validate(&layout)?;
        }
        Ok(Self { kind, layout, tol })
    }

    pub fn global(layout: QubitLayout) -> Self {
        Self {
            kind: DomainKind::Subspace,
            layout,
            tol: Tolerances::default(),
        }
    }

    pub fn height(&self) -> usize {
        match &self.kind {
            DomainKind::Subspace => self.layout.dim(),
            DomainKind::LocalSubspace(sig) => sig.height(),
        }
    }

    fn local_dims(&self) -> Vec<usize> {
        match &self.kind {
            DomainKind::Subspace => vec![self.layout.dim()],
            DomainKind::LocalSubspace(sig) => sig.0.iter().map(|s| 1 << s.len()).collect(),
        }
    }

    fn assemble(&self, mut parts: Vec<Subspace>) -> AbstractElement {
        match &self.kind {
            DomainKind::Subspace => AbstractElement::Global(parts.remove(0)),
            DomainKind::LocalSubspace(sig) => AbstractElement::Local {
                signature: sig.clone(),
                parts,
            },
        }
    }

    pub fn bottom(&self) -> AbstractElement {
        self.assemble(self.local_dims().into_iter().map(Subspace::zero).collect())
    }

    pub fn top(&self) -> AbstractElement {
        self.assemble(self.local_dims().into_iter().map(Subspace::full).collect())
    }

    /// Fails unless `e` belongs to this domain.
    pub fn check(&self, e: &AbstractElement) -> Result<(), DomainError> {
        match (&self.kind, e) {
            (DomainKind::Subspace, AbstractElement::Global(_)) => {}
            (DomainKind::LocalSubspace(a), AbstractElement::Local { signature, .. })
                if a == signature => {}
            _ => {
                return Err(DomainError::ShapeMismatch(
                    "element does not belong to the domain".into(),
                ))
            }
        }
        for (p, d) in e.parts().iter().zip(self.local_dims()) {
            if p.ambient_dim() != d {
                return Err(DomainError::ShapeMismatch(format!(
                    "part lives in C^{} but C^{d} was expected",
                    p.ambient_dim()
                )));
            }
        }
        Ok(())
    }

    fn check2(&self, a: &AbstractElement, b: &AbstractElement) -> Result<(), DomainError> {
        self.check(a)?;
        self.check(b)
    }

    /// Largest inclusion residual over the parts; `a ⊑ b` iff it is within `incl_tol`.
    pub fn leq_residual(
        &self,
        a: &AbstractElement,
        b: &AbstractElement,
    ) -> Result<f64, DomainError> {
        self.check2(a, b)?;
        let mut worst = 0.0f64;
        for (x, y) in a.parts().iter().zip(b.parts()) {
            worst = worst.max(x.leq_residual(y)?);
        }
        Ok(worst)
    }

    pub fn leq(&self, a: &AbstractElement, b: &AbstractElement) -> Result<bool, DomainError> {
        Ok(self.leq_residual(a, b)? <= self.tol.incl_tol)
    }

    pub fn equal(&self, a: &AbstractElement, b: &AbstractElement) -> Result<bool, DomainError> {
        Ok(self.leq(a, b)? && self.leq(b, a)?)
    }

    pub fn join(
        &self,
        a: &AbstractElement,
        b: &AbstractElement,
    ) -> Result<AbstractElement, DomainError> {
        self.check2(a, b)?;
        let parts = a
            .parts()
            .iter()
            .zip(b.parts())
            .map(|(x, y)| x.join(y, &self.tol))
            .collect::<Result<_, _>>()?;
        Ok(self.assemble(parts))
    }

    pub fn meet(
        &self,
        a: &AbstractElement,
        b: &AbstractElement,
    ) -> Result<AbstractElement, DomainError> {
        self.check2(a, b)?;
        let parts = a
            .parts()
            .iter()
            .zip(b.parts())
            .map(|(x, y)| x.meet(y, &self.tol))
            .collect::<Result<_, _>>()?;
        Ok(self.assemble(parts))
    }

    /// Abstraction of a finite set of states (density matrices over the layout).
    pub fn alpha(&self, states: &[ComplexMatrix]) -> Result<AbstractElement, DomainError> {
        for rho in states {
            crate::subspace::check_state(rho, &self.tol)?;
            if rho.rows() != self.layout.dim() {
                return Err(DomainError::ShapeMismatch(format!(
                    "{}x{} state over {} qubit(s)",
                    rho.rows(),
                    rho.cols(),
                    self.layout.len()
                )));
            }
        }
        let parts = match &self.kind {
            DomainKind::Subspace => vec![joint_support(self.layout.dim(), states, &self.tol)?],
            DomainKind::LocalSubspace(sig) => sig
                .0
                .iter()
                .map(|s| {
                    let reduced = states
                        .iter()
                        .map(|rho| reduce_to(rho, s, &self.layout))
                        .collect::<Result<Vec<_>, _>>()?;
                    joint_support(1 << s.len(), &reduced, &self.tol)
                })
                .collect::<Result<_, LinalgError>>()?,
        };
        Ok(self.assemble(parts))
    }

    /// Abstraction of the set of all states supported in `q`.
    pub fn alpha_subspace(&self, q: &Subspace) -> Result<AbstractElement, DomainError> {
        match &self.kind {
            DomainKind::Subspace => Ok(AbstractElement::Global(q.clone())),
            DomainKind::LocalSubspace(sig) => {
                let proj = q.projector();
                let parts = sig
                    .0
                    .iter()
                    .map(|s| support(&reduce_to(&proj, s, &self.layout)?, &self.tol))
                    .collect::<Result<_, _>>()?;
                Ok(self.assemble(parts))
            }
        }
    }

    /// Largest global subspace whose states all lie in the concretization of `e`.
    pub fn gamma_as_subspace(&self, e: &AbstractElement) -> Result<Subspace, DomainError> {
        self.check(e)?;
        match e {
            AbstractElement::Global(s) => Ok(s.clone()),
            AbstractElement::Local { signature, parts } => {
                let mut acc = Subspace::full(self.layout.dim());
                for (s, p) in signature.0.iter().zip(parts) {
                    let cyl = support(&embed(&p.projector(), s, &self.layout)?, &self.tol)?;
                    acc = acc.meet(&cyl, &self.tol)?;
                }
                Ok(acc)
            }
        }
    }

    /// Concretization membership: is the support of `rho` covered by `e`?
    pub fn gamma_contains(
        &self,
        e: &AbstractElement,
        rho: &ComplexMatrix,
    ) -> Result<bool, DomainError> {
        let g = self.gamma_as_subspace(e)?;
        Ok(crate::subspace::gamma_s_contains(&g, rho, &self.tol)?)
    }

    /// Image of a global subspace under a basic item.
    pub fn global_transfer(
        &self,
        p: &Program,
        item: &Item,
        q: &Subspace,
    ) -> Result<Subspace, DomainError> {
        let tol = &self.tol;
        Ok(match item {
            Item::Guard {
                targets,
                space,
                negate,
                ..
            } => q.image(&p.guard_operator(targets, space, *negate)?, tol)?,
            Item::Stmt(s) => match &s.kind {
                StmtKind::Skip => q.clone(),
                StmtKind::Init { targets } => self.init_transfer(targets, q)?,
                StmtKind::Unitary { targets, gate } => {
                    q.image(&p.gate_operator(targets, gate)?, tol)?
                }
                StmtKind::Assert { targets, space } => {
                    q.image(&p.guard_operator(targets, space, false)?, tol)?
                }
                StmtKind::If { .. } | StmtKind::While { .. } => {
                    return Err(DomainError::ShapeMismatch(
                        "compound statement is not basic".into(),
                    ))
                }
            },
        })
    }

    /// `|0⟩_targets ⊗ supp Tr_targets(Q)`.
    fn init_transfer(&self, targets: &[String], q: &Subspace) -> Result<Subspace, DomainError> {
        let layout = &self.layout;
        let reduced = partial_trace(&q.projector(), targets, layout)?;
        let rest = support(&reduced, &self.tol)?;
        let target_pos = layout.positions(targets)?;
        let rest_pos: Vec<usize> = (0..layout.len())
            .filter(|i| !target_pos.contains(i))
            .collect();
        let dim = layout.dim();
        let vectors: Vec<Vec<C64>> = rest
            .basis()
            .iter()
            .map(|phi| {
                let mut v = vec![ZERO; dim];
                for (r, c) in phi.iter().enumerate() {
                    v[local_to_global_index(layout, &rest_pos, r, 0)] = *c;
                }
                v
            })
            .collect();
        Ok(Subspace::span(dim, &vectors, &self.tol)?)
    }

    /// Abstract transfer of a basic item; for local elements, `α ∘ transfer ∘ γ`.
    pub fn transfer(
        &self,
        p: &Program,
        item: &Item,
        e: &AbstractElement,
    ) -> Result<AbstractElement, DomainError> {
        self.check(e)?;
        match e {
            AbstractElement::Global(q) => {
                Ok(AbstractElement::Global(self.global_transfer(p, item, q)?))
            }
            AbstractElement::Local { .. } => {
                let g = self.gamma_as_subspace(e)?;
                self.alpha_subspace(&self.global_transfer(p, item, &g)?)
            }
        }
    }

    pub fn analyze(
        &self,
        p: &Program,
        e: &AbstractElement,
    ) -> Result<AbstractElement, DomainError> {
        self.analyze_with_stats(p, e).map(|(out, _)| out)
    }

    pub fn analyze_with_stats(
        &self,
        p: &Program,
        e: &AbstractElement,
    ) -> Result<(AbstractElement, AnalysisStats), DomainError> {
        let mut stats = AnalysisStats::default();
        let out = self.analyze_items(p, &items(&p.body), e, &mut stats)?;
        Ok((out, stats))
    }

    pub fn analyze_items(
        &self,
        p: &Program,
        items: &[Item],
        e: &AbstractElement,
        stats: &mut AnalysisStats,
    ) -> Result<AbstractElement, DomainError> {
        let mut cur = e.clone();
        for item in items {
            cur = self.analyze_item(p, item, &cur, stats)?;
        }
        Ok(cur)
    }

    pub fn analyze_item(
        &self,
        p: &Program,
        item: &Item,
        e: &AbstractElement,
        stats: &mut AnalysisStats,
    ) -> Result<AbstractElement, DomainError> {
        let stmt = match item {
            Item::Stmt(s) if !item.is_basic() => *s,
            _ => return self.transfer(p, item, e),
        };
        match &stmt.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                let yes = self.transfer(p, &Item::guard(stmt, false).expect("guarded"), e)?;
                let yes = self.analyze_items(p, &items(then_branch), &yes, stats)?;
                let no = self.transfer(p, &Item::guard(stmt, true).expect("guarded"), e)?;
                let no = self.analyze_items(p, &items(else_branch), &no, stats)?;
                self.join(&yes, &no)
            }
            StmtKind::While { .. } => {
                let inv = self.loop_invariant(p, stmt, e, stats)?;
                self.transfer(p, &Item::guard(stmt, true).expect("guarded"), &inv)
            }
            _ => unreachable!("basic statements handled above"),
        }
    }

    /// Result of one loop iteration: `assert P; body` applied to `e`.
    pub fn loop_step(
        &self,
        p: &Program,
        stmt: &Stmt,
        e: &AbstractElement,
        stats: &mut AnalysisStats,
    ) -> Result<AbstractElement, DomainError> {
        let StmtKind::While { body, .. } = &stmt.kind else {
            return Err(DomainError::ShapeMismatch("not a loop".into()));
        };
        let entered = self.transfer(p, &Item::guard(stmt, false).expect("guarded"), e)?;
        self.analyze_items(p, &items(body), &entered, stats)
    }

    /// Least `d ⊒ e` with `loop_step(d) ⊑ d`, by increasing iteration `d ← d ⊔ loop_step(d)`.
    pub fn loop_invariant(
        &self,
        p: &Program,
        stmt: &Stmt,
        e: &AbstractElement,
        stats: &mut AnalysisStats,
    ) -> Result<AbstractElement, DomainError> {
        let budget = self.height() + 1;
        let mut d = e.clone();
        for n in 1..=budget {
            let next = self.join(&d, &self.loop_step(p, stmt, &d, stats)?)?;
            if self.leq(&next, &d)? {
                stats.loop_iterations.push(n);
                return Ok(d);
            }
            d = next;
        }
        Err(DomainError::FixpointBudget(budget))
    }
}

/// Outcome of a completeness check.
#[derive(Debug, Clone)]
pub enum CompletenessVerdict {
    Complete,
    /// A state in the concretization of the input at which abstracting after running
    /// the program gives a strictly smaller element than running the analyzer on its
    /// abstraction.
    IncompleteWitness {
        state: ComplexMatrix,
        concrete: AbstractElement,
        analyzed: AbstractElement,
        gap: f64,
    },
}

#[derive(Debug, Clone)]
pub struct CompletenessReport {
    /// `α(⋃ eval(ρ_j))` over all sampled states.
    pub sampled: AbstractElement,
    pub analyzed: AbstractElement,
    /// Largest inclusion residual between `sampled` and `analyzed`, in either direction.
    pub deviation: f64,
    pub samples: usize,
    pub verdict: CompletenessVerdict,
}

impl Domain {
    /// Candidate states from the concretization of `e`: basis states of its maximal
    /// subspace, pairwise superpositions, `trials` random pure states and full-rank mixtures.
    pub fn gamma_samples<R: Rng + ?Sized>(
        &self,
        e: &AbstractElement,
        trials: usize,
        rng: &mut R,
    ) -> Result<Vec<ComplexMatrix>, DomainError> {
        let g = self.gamma_as_subspace(e)?;
        if g.is_zero() {
            return Ok(Vec::new());
        }
        let basis = g.canonical_basis(&self.tol);
        let mut out: Vec<ComplexMatrix> =
            basis.iter().map(|b| ComplexMatrix::pure_state(b)).collect();
        let phases = [
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, -1.0),
        ];
        for i in 0..basis.len() {
            for j in i + 1..basis.len() {
                for ph in phases {
                    let v: Vec<C64> = basis[i]
                        .iter()
                        .zip(&basis[j])
                        .map(|(a, b)| (a + ph * b) * FRAC_1_SQRT_2)
                        .collect();
                    out.push(ComplexMatrix::pure_state(&v));
                }
            }
        }
        for _ in 0..trials {
            out.push(ComplexMatrix::pure_state(&random_pure_in(&g, rng)));
        }
        for _ in 0..trials.div_ceil(4).max(1) {
            out.push(random_state_in(&g, g.dim(), rng));
        }
        Ok(out)
    }

    /// Compares `α ∘ eval` with `analyze ∘ α` on states drawn from the concretization of `e`.
    pub fn check_completeness<R: Rng + ?Sized>(
        &self,
        p: &Program,
        e: &AbstractElement,
        trials: usize,
        policy: LoopPolicy,
        rng: &mut R,
    ) -> Result<CompletenessReport, DomainError> {
        let analyzed = self.analyze(p, e)?;
        let mut sampled = self.bottom();
        let mut verdict = CompletenessVerdict::Complete;
        let mut worst_gap = 0.0;
        let samples = self.gamma_samples(e, trials.max(1), rng)?;
        let mut used = 0;
        for rho in &samples {
            let (out, stats) = eval_block(p, &p.body, rho, policy)?;
            if stats.exceeded.is_some() {
                continue;
            }
            used += 1;
            let concrete = self.alpha(&[out])?;
            sampled = self.join(&sampled, &concrete)?;
            let local = self.analyze(p, &self.alpha(std::slice::from_ref(rho))?)?;
            let gap = self.leq_residual(&local, &concrete)?;
            if gap > self.tol.incl_tol && gap > worst_gap {
                worst_gap = gap;
                verdict = CompletenessVerdict::IncompleteWitness {
                    state: rho.clone(),
                    concrete,
                    analyzed: local,
                    gap,
                };
            }
        }
        let deviation = self
            .leq_residual(&sampled, &analyzed)?
            .max(self.leq_residual(&analyzed, &sampled)?);
        Ok(CompletenessReport {
            sampled,
            analyzed,
            deviation,
            samples: used,
            verdict,
        })
    }
}

/// Global basis state `|bits⟩` as a vector, for building elements in tests and examples.
pub fn ket(bits: &str) -> Vec<C64> {
    basis_vector(
        1 << bits.len(),
        usize::from_str_radix(bits, 2).expect("binary string"),
    )
}
