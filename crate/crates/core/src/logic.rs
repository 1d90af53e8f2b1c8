//! Hoare and incorrectness triples over the abstract domains, with derivation trees
//! that can be serialized and independently replayed.
//!
//! Hoare rules: `Exp`, `Seq`, `Meas`, `While`, `Imp`. Incorrectness rules: `ExpIn`,
//! `SeqIn`, `MeasIn`, `WhileIn`, `ImpIn`. Every node records its triple and the byte
//! span of the program fragment it covers.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concrete::{eval_block, mix_representative, LoopPolicy, State};
use crate::domain::{items, AbstractElement, AnalysisStats, Domain, DomainError, DomainKind, Item};
use crate::lang::{Program, Stmt, StmtKind};
use crate::linalg::{ComplexMatrix, Tolerances};
use crate::subspace::Subspace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogicError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("incorrectness triples are only supported over the subspace domain")]
    UnsupportedDomain,
    #[error("{0}")]
    Program(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    Exp,
    Seq,
    Meas,
    Imp,
    While,
    ExpIn,
    SeqIn,
    MeasIn,
    ImpIn,
    WhileIn,
}

impl Rule {
    fn incorrectness(self) -> bool {
        matches!(
            self,
            Rule::ExpIn | Rule::SeqIn | Rule::MeasIn | Rule::ImpIn | Rule::WhileIn
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conclusion {
    pub pre: AbstractElement,
    pub post: AbstractElement,
    pub program_span: [usize; 2],
}

/// A recorded order fact `lhs ⊑ rhs` with its inclusion residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideCondition {
    pub lhs: AbstractElement,
    pub rhs: AbstractElement,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub rule: Rule,
    pub conclusion: Conclusion,
    #[serde(default)]
    pub premises: Vec<Derivation>,
    #[serde(default)]
    pub side: Vec<SideCondition>,
}

impl Derivation {
    pub fn pre(&self) -> &AbstractElement {
        &self.conclusion.pre
    }

    pub fn post(&self) -> &AbstractElement {
        &self.conclusion.post
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }
}

fn fragment_span(items: &[Item]) -> [usize; 2] {
    let start = items.iter().map(|i| i.span().start).min().unwrap_or(0);
    let end = items.iter().map(|i| i.span().end).max().unwrap_or(0);
    [start, end]
}

fn while_parts(stmt: &Stmt) -> Option<&[Stmt]> {
    match &stmt.kind {
        StmtKind::While { body, .. } => Some(body),
        _ => None,
    }
}

/// `assert P; body` of a loop as a fragment.
fn loop_body_items(stmt: &Stmt) -> Vec<Item<'_>> {
    let mut out = vec![Item::guard(stmt, false).expect("loop")];
    out.extend(items(while_parts(stmt).expect("loop")));
    out
}

fn branch_items(stmt: &Stmt, negate: bool) -> Vec<Item<'_>> {
    let StmtKind::If {
        then_branch,
        else_branch,
        ..
    } = &stmt.kind
    else {
        unreachable!("conditional expected")
    };
    let mut out = vec![Item::guard(stmt, negate).expect("conditional")];
    out.extend(items(if negate { else_branch } else { then_branch }));
    out
}

/// Strongest postcondition, computed by the forward analyzer.
pub fn spc(
    domain: &Domain,
    p: &Program,
    a: &AbstractElement,
) -> Result<AbstractElement, LogicError> {
    Ok(domain.analyze(p, a)?)
}

struct Builder<'a> {
    domain: &'a Domain,
    program: &'a Program,
    incorrectness: bool,
}

impl Builder<'_> {
    fn node(
        &self,
        rule: Rule,
        items: &[Item],
        pre: AbstractElement,
        post: AbstractElement,
    ) -> Derivation {
        Derivation {
            rule,
            conclusion: Conclusion {
                pre,
                post,
                program_span: fragment_span(items),
            },
            premises: Vec::new(),
            side: Vec::new(),
        }
    }

    fn side(
        &self,
        lhs: &AbstractElement,
        rhs: &AbstractElement,
    ) -> Result<SideCondition, LogicError> {
        Ok(SideCondition {
            lhs: lhs.clone(),
            rhs: rhs.clone(),
            residual: self.domain.leq_residual(lhs, rhs)?,
        })
    }

    /// Consequence node `a ⊑ a'`, `{a'} S {b'}`, `b' ⊑ b` (Hoare) or its dual.
    fn consequence(
        &self,
        items: &[Item],
        pre: &AbstractElement,
        post: &AbstractElement,
        inner: Derivation,
    ) -> Result<Derivation, LogicError> {
        let (rule, side) = if self.incorrectness {
            (
                Rule::ImpIn,
                vec![self.side(inner.pre(), pre)?, self.side(post, inner.post())?],
            )
        } else {
            (
                Rule::Imp,
                vec![self.side(pre, inner.pre())?, self.side(inner.post(), post)?],
            )
        };
        let mut d = self.node(rule, items, pre.clone(), post.clone());
        d.premises = vec![inner];
        d.side = side;
        Ok(d)
    }

    fn fragment(&self, items: &[Item], a: &AbstractElement) -> Result<Derivation, LogicError> {
        let first = self.item(&items[0], a)?;
        if items.len() == 1 {
            return Ok(first);
        }
        let rest = self.fragment(&items[1..], first.post())?;
        let rule = if self.incorrectness {
            Rule::SeqIn
        } else {
            Rule::Seq
        };
        let mut d = self.node(rule, items, a.clone(), rest.post().clone());
        d.premises = vec![first, rest];
        Ok(d)
    }

    fn item(&self, item: &Item, a: &AbstractElement) -> Result<Derivation, LogicError> {
        let one = std::slice::from_ref(item);
        let stmt = match item {
            Item::Stmt(s) if !item.is_basic() => *s,
            _ => {
                let post = self.domain.transfer(self.program, item, a)?;
                let rule = if self.incorrectness {
                    Rule::ExpIn
                } else {
                    Rule::Exp
                };
                return Ok(self.node(rule, one, a.clone(), post));
            }
        };
        match &stmt.kind {
            StmtKind::If { .. } => {
                let yes = self.fragment(&branch_items(stmt, false), a)?;
                let no = self.fragment(&branch_items(stmt, true), a)?;
                let post = self.domain.join(yes.post(), no.post())?;
                let rule = if self.incorrectness {
                    Rule::MeasIn
                } else {
                    Rule::Meas
                };
                let mut d = self.node(rule, one, a.clone(), post);
                d.premises = vec![yes, no];
                Ok(d)
            }
            StmtKind::While { .. } if self.incorrectness => self.while_in(stmt, one, a),
            StmtKind::While { .. } => self.while_hoare(stmt, one, a),
            _ => unreachable!("basic statements handled above"),
        }
    }

    fn while_hoare(
        &self,
        stmt: &Stmt,
        one: &[Item],
        a: &AbstractElement,
    ) -> Result<Derivation, LogicError> {
        let inv =
            self.domain
                .loop_invariant(self.program, stmt, a, &mut AnalysisStats::default())?;
        let body_items = loop_body_items(stmt);
        let body = self.fragment(&body_items, &inv)?;
        let body = self.consequence(&body_items, &inv, &inv, body)?;
        let exit_item = [Item::guard(stmt, true).expect("loop")];
        let exit = self.fragment(&exit_item, &inv)?;
        let mut w = self.node(Rule::While, one, inv.clone(), exit.post().clone());
        w.premises = vec![body, exit];
        let post = w.post().clone();
        self.consequence(one, a, &post, w)
    }

    /// Unrolled chain `a_{i+1} = step(a_i)`, `b_i = exit(a_i)`, cut once `a_{n+1} ⊑ ⋁_{i≤n} a_i`.
    fn while_in(
        &self,
        stmt: &Stmt,
        one: &[Item],
        a: &AbstractElement,
    ) -> Result<Derivation, LogicError> {
        let body_items = loop_body_items(stmt);
        let exit_item = [Item::guard(stmt, true).expect("loop")];
        let budget = self.domain.height() + 1;
        let mut premises = Vec::new();
        let mut cur = a.clone();
        let mut seen = self.domain.bottom();
        let mut exits = self.domain.bottom();
        for _ in 0..budget {
            seen = self.domain.join(&seen, &cur)?;
            let body = self.fragment(&body_items, &cur)?;
            let exit = self.fragment(&exit_item, &cur)?;
            exits = self.domain.join(&exits, exit.post())?;
            let next = body.post().clone();
            premises.push(body);
            premises.push(exit);
            if self.domain.leq(&next, &seen)? {
                let mut d = self.node(Rule::WhileIn, one, a.clone(), exits);
                d.side = vec![self.side(&next, &seen)?];
                d.premises = premises;
                return Ok(d);
            }
            cur = next;
        }
        Err(DomainError::FixpointBudget(budget).into())
    }
}

/// Concrete evidence against a Hoare triple.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub state: State,
    pub output: State,
    /// Inclusion residual of the output's support in the postcondition.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Valid,
    Invalid,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct HoareReport {
    pub verdict: Verdict,
    pub spc: AbstractElement,
    /// Inclusion residual of `spc(pre)` in `post`.
    pub residual: f64,
    pub derivation: Option<Derivation>,
    pub witness: Option<Witness>,
}

fn check_shapes(
    domain: &Domain,
    p: &Program,
    pre: &AbstractElement,
    post: &AbstractElement,
) -> Result<(), LogicError> {
    if p.layout != domain.layout {
        return Err(LogicError::Program(
            "program and domain layouts differ".into(),
        ));
    }
    domain.check(pre)?;
    domain.check(post)?;
    Ok(())
}

/// Derivation of `{pre} p {post}` ending in a consequence step, or `None` if the triple
/// is not derivable.
pub fn derive_hoare(
    domain: &Domain,
    p: &Program,
    pre: &AbstractElement,
    post: &AbstractElement,
) -> Result<Option<Derivation>, LogicError> {
    check_shapes(domain, p, pre, post)?;
    let b = Builder {
        domain,
        program: p,
        incorrectness: false,
    };
    let body = items(&p.body);
    let inner = b.fragment(&body, pre)?;
    if !domain.leq(inner.post(), post)? {
        return Ok(None);
    }
    Ok(Some(b.consequence(&body, pre, post, inner)?))
}

/// Decides `{pre} p {post}`: valid iff `spc(pre) ⊑ post`.
///
/// Invalid triples come with a concrete witness: the uniform mixture over a basis of the
/// precondition's maximal subspace, or sampled candidates for local domains. A local
/// triple without a confirmed witness is reported as unknown.
pub fn check_hoare<R: Rng + ?Sized>(
    domain: &Domain,
    p: &Program,
    pre: &AbstractElement,
    post: &AbstractElement,
    policy: LoopPolicy,
    rng: &mut R,
) -> Result<HoareReport, LogicError> {
    check_shapes(domain, p, pre, post)?;
    let spc = spc(domain, p, pre)?;
    let residual = domain.leq_residual(&spc, post)?;
    if residual <= domain.tol.incl_tol {
        let derivation = derive_hoare(domain, p, pre, post)?;
        return Ok(HoareReport {
            verdict: Verdict::Valid,
            spc,
            residual,
            derivation,
            witness: None,
        });
    }
    let witness = find_witness(domain, p, pre, post, policy, rng)?;
    let verdict = match (&domain.kind, &witness) {
        (DomainKind::Subspace, _) | (_, Some(_)) => Verdict::Invalid,
        _ => Verdict::Unknown,
    };
    Ok(HoareReport {
        verdict,
        spc,
        residual,
        derivation: None,
        witness,
    })
}

fn witness_for(
    domain: &Domain,
    p: &Program,
    post: &AbstractElement,
    rho: &ComplexMatrix,
    policy: LoopPolicy,
) -> Result<Option<Witness>, LogicError> {
    // A truncated loop under-approximates the output support, so any violation it shows is real.
    let (out, _) = eval_block(p, &p.body, rho, policy).map_err(DomainError::from)?;
    let concrete = domain.alpha(std::slice::from_ref(&out))?;
    let residual = domain.leq_residual(&concrete, post)?;
    if residual <= domain.tol.incl_tol {
        return Ok(None);
    }
    Ok(Some(Witness {
        state: State {
            layout: p.layout.clone(),
            rho: rho.clone(),
        },
        output: State {
            layout: p.layout.clone(),
            rho: out,
        },
        residual,
    }))
}

fn find_witness<R: Rng + ?Sized>(
    domain: &Domain,
    p: &Program,
    pre: &AbstractElement,
    post: &AbstractElement,
    policy: LoopPolicy,
    rng: &mut R,
) -> Result<Option<Witness>, LogicError> {
    let g = domain.gamma_as_subspace(pre)?;
    if g.is_zero() {
        return Ok(None);
    }
    let pure: Vec<ComplexMatrix> = g
        .basis()
        .iter()
        .map(|b| ComplexMatrix::pure_state(b))
        .collect();
    let mix =
        mix_representative(&pure, &domain.tol).map_err(|e| LogicError::Program(e.to_string()))?;
    let mut best = witness_for(domain, p, post, &mix, policy)?;
    if best.is_none() || matches!(domain.kind, DomainKind::LocalSubspace(_)) {
        for rho in domain.gamma_samples(pre, 16, rng)? {
            if let Some(w) = witness_for(domain, p, post, &rho, policy)? {
                if best.as_ref().is_none_or(|b| w.residual > b.residual) {
                    best = Some(w);
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct IncorrectnessReport {
    pub valid: bool,
    pub spc: AbstractElement,
    /// Inclusion residual of `post` in `spc(pre)`.
    pub residual: f64,
    pub derivation: Option<Derivation>,
    /// Projection of `post` onto the orthocomplement of `spc(pre)`; zero iff valid.
    pub gap: Option<AbstractElement>,
}

/// Decides `[pre] p [post]`: valid iff `post ⊑ spc(pre)`. Subspace domain only.
pub fn check_incorrectness(
    domain: &Domain,
    p: &Program,
    pre: &AbstractElement,
    post: &AbstractElement,
) -> Result<IncorrectnessReport, LogicError> {
    if domain.kind != DomainKind::Subspace {
        return Err(LogicError::UnsupportedDomain);
    }
    check_shapes(domain, p, pre, post)?;
    let b = Builder {
        domain,
        program: p,
        incorrectness: true,
    };
    let body = items(&p.body);
    let inner = b.fragment(&body, pre)?;
    let spc = inner.post().clone();
    let residual = domain.leq_residual(post, &spc)?;
    if residual <= domain.tol.incl_tol {
        let derivation = b.consequence(&body, pre, post, inner)?;
        return Ok(IncorrectnessReport {
            valid: true,
            spc,
            residual,
            derivation: Some(derivation),
            gap: None,
        });
    }
    let (AbstractElement::Global(s), AbstractElement::Global(q)) = (&spc, post) else {
        unreachable!("subspace domain")
    };
    let outside = &ComplexMatrix::identity(s.ambient_dim()) - &s.projector();
    let gap = q.image(&outside, &domain.tol).map_err(DomainError::from)?;
    Ok(IncorrectnessReport {
        valid: false,
        spc,
        residual,
        derivation: None,
        gap: Some(AbstractElement::Global(gap)),
    })
}

/// First node of a derivation that fails to instantiate its rule.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("derivation rejected at premise path {path:?}: {reason}")]
pub struct ReplayError {
    /// Premise indices from the root to the failing node.
    pub path: Vec<usize>,
    pub reason: String,
}

struct Replayer<'a> {
    domain: Domain,
    program: &'a Program,
    incorrectness: bool,
}

type Check = Result<(), ReplayError>;

fn fail(path: &[usize], reason: impl Into<String>) -> Check {
    Err(ReplayError {
        path: path.to_vec(),
        reason: reason.into(),
    })
}

impl Replayer<'_> {
    fn same(&self, a: &AbstractElement, b: &AbstractElement, what: &str, path: &[usize]) -> Check {
        match self.domain.equal(a, b) {
            Ok(true) => Ok(()),
            Ok(false) => fail(path, format!("{what} does not match")),
            Err(e) => fail(path, format!("{what}: {e}")),
        }
    }

    fn leq(&self, a: &AbstractElement, b: &AbstractElement, what: &str, path: &[usize]) -> Check {
        match self.domain.leq(a, b) {
            Ok(true) => Ok(()),
            Ok(false) => fail(path, format!("side condition {what} does not hold")),
            Err(e) => fail(path, format!("{what}: {e}")),
        }
    }

    fn rule_is(&self, d: &Derivation, hoare: Rule, incorrect: Rule, path: &[usize]) -> Check {
        let want = if self.incorrectness { incorrect } else { hoare };
        if d.rule == want {
            Ok(())
        } else {
            fail(path, format!("expected {want:?}, found {:?}", d.rule))
        }
    }

    fn premises(&self, d: &Derivation, n: usize, path: &[usize]) -> Check {
        if d.premises.len() == n {
            Ok(())
        } else {
            fail(
                path,
                format!(
                    "{:?} needs {n} premise(s), found {}",
                    d.rule,
                    d.premises.len()
                ),
            )
        }
    }

    fn node(&self, d: &Derivation, items: &[Item], path: &mut Vec<usize>) -> Check {
        if items.is_empty() {
            return fail(path, "empty fragment");
        }
        if d.rule.incorrectness() != self.incorrectness {
            return fail(path, format!("{:?} mixes proof systems", d.rule));
        }
        if d.conclusion.program_span != fragment_span(items) {
            return fail(path, "program span does not match the fragment");
        }
        for e in [d.pre(), d.post()] {
            if let Err(e) = self.domain.check(e) {
                return fail(path, e.to_string());
            }
        }
        match d.rule {
            Rule::Imp | Rule::ImpIn => self.consequence(d, items, path),
            Rule::Seq | Rule::SeqIn => self.seq(d, items, path),
            _ if items.len() != 1 => fail(path, format!("{:?} covers a single statement", d.rule)),
            Rule::Exp | Rule::ExpIn => self.exp(d, &items[0], path),
            Rule::Meas | Rule::MeasIn => self.meas(d, &items[0], path),
            Rule::While => self.while_hoare(d, &items[0], path),
            Rule::WhileIn => self.while_in(d, &items[0], path),
        }
    }

    fn child(&self, d: &Derivation, i: usize, items: &[Item], path: &mut Vec<usize>) -> Check {
        path.push(i);
        let r = self.node(&d.premises[i], items, path);
        path.pop();
        r
    }

    fn consequence(&self, d: &Derivation, items: &[Item], path: &mut Vec<usize>) -> Check {
        self.premises(d, 1, path)?;
        if d.side.len() != 2 {
            return fail(path, "consequence needs two side conditions");
        }
        let inner = &d.premises[0];
        let (pre_l, pre_r, post_l, post_r) = if self.incorrectness {
            (inner.pre(), d.pre(), d.post(), inner.post())
        } else {
            (d.pre(), inner.pre(), inner.post(), d.post())
        };
        self.same(&d.side[0].lhs, pre_l, "precondition side lhs", path)?;
        self.same(&d.side[0].rhs, pre_r, "precondition side rhs", path)?;
        self.same(&d.side[1].lhs, post_l, "postcondition side lhs", path)?;
        self.same(&d.side[1].rhs, post_r, "postcondition side rhs", path)?;
        self.leq(pre_l, pre_r, "on preconditions", path)?;
        self.leq(post_l, post_r, "on postconditions", path)?;
        self.child(d, 0, items, path)
    }

    fn seq(&self, d: &Derivation, items: &[Item], path: &mut Vec<usize>) -> Check {
        self.rule_is(d, Rule::Seq, Rule::SeqIn, path)?;
        self.premises(d, 2, path)?;
        let (first, second) = (&d.premises[0], &d.premises[1]);
        self.same(d.pre(), first.pre(), "sequence precondition", path)?;
        self.same(first.post(), second.pre(), "intermediate assertion", path)?;
        self.same(second.post(), d.post(), "sequence postcondition", path)?;
        let mut last = fail(path, "no split of the fragment matches the premises");
        for k in 1..items.len() {
            if fragment_span(&items[..k]) != first.conclusion.program_span
                || fragment_span(&items[k..]) != second.conclusion.program_span
            {
                continue;
            }
            last = self
                .child(d, 0, &items[..k], path)
                .and_then(|_| self.child(d, 1, &items[k..], path));
            if last.is_ok() {
                break;
            }
        }
        last
    }

    fn exp(&self, d: &Derivation, item: &Item, path: &mut [usize]) -> Check {
        self.rule_is(d, Rule::Exp, Rule::ExpIn, path)?;
        self.premises(d, 0, path)?;
        if !item.is_basic() {
            return fail(path, "axiom applied to a compound statement");
        }
        match self.domain.transfer(self.program, item, d.pre()) {
            Ok(post) => self.same(&post, d.post(), "transfer output", path),
            Err(e) => fail(path, e.to_string()),
        }
    }

    fn meas(&self, d: &Derivation, item: &Item, path: &mut Vec<usize>) -> Check {
        let stmt = match item {
            Item::Stmt(s) if matches!(s.kind, StmtKind::If { .. }) => *s,
            _ => return fail(path, "measurement rule needs a conditional"),
        };
        self.premises(d, 2, path)?;
        let (yes, no) = (&d.premises[0], &d.premises[1]);
        self.same(yes.pre(), d.pre(), "then-branch precondition", path)?;
        self.same(no.pre(), d.pre(), "else-branch precondition", path)?;
        match self.domain.join(yes.post(), no.post()) {
            Ok(j) => self.same(&j, d.post(), "join of branch postconditions", path)?,
            Err(e) => return fail(path, e.to_string()),
        }
        self.child(d, 0, &branch_items(stmt, false), path)?;
        self.child(d, 1, &branch_items(stmt, true), path)
    }

    fn loop_stmt<'s>(&self, item: &Item<'s>, path: &[usize]) -> Result<&'s Stmt, ReplayError> {
        match item {
            Item::Stmt(s) if matches!(s.kind, StmtKind::While { .. }) => Ok(*s),
            _ => fail(path, "loop rule needs a loop").map(|_| unreachable!()),
        }
    }

    fn while_hoare(&self, d: &Derivation, item: &Item, path: &mut Vec<usize>) -> Check {
        let stmt = self.loop_stmt(item, path)?;
        self.premises(d, 2, path)?;
        let (body, exit) = (&d.premises[0], &d.premises[1]);
        self.same(body.pre(), d.pre(), "invariant (body precondition)", path)?;
        self.same(body.post(), d.pre(), "invariant (body postcondition)", path)?;
        self.same(exit.pre(), d.pre(), "invariant (exit precondition)", path)?;
        self.same(exit.post(), d.post(), "loop postcondition", path)?;
        match self
            .domain
            .loop_step(self.program, stmt, d.pre(), &mut AnalysisStats::default())
        {
            Ok(step) => self.leq(&step, d.pre(), "invariant is preserved by the body", path)?,
            Err(e) => return fail(path, e.to_string()),
        }
        self.child(d, 0, &loop_body_items(stmt), path)?;
        self.child(d, 1, &[Item::guard(stmt, true).expect("loop")], path)
    }

    fn while_in(&self, d: &Derivation, item: &Item, path: &mut Vec<usize>) -> Check {
        let stmt = self.loop_stmt(item, path)?;
        let n = d.premises.len();
        if n == 0 || !n.is_multiple_of(2) {
            return fail(path, "unrolled loop needs body/exit premise pairs");
        }
        if d.side.len() != 1 {
            return fail(path, "unrolled loop needs one truncation side condition");
        }
        let body_items = loop_body_items(stmt);
        let exit_items = [Item::guard(stmt, true).expect("loop")];
        let mut seen = self.domain.bottom();
        let mut exits = self.domain.bottom();
        let mut expected_pre = d.pre().clone();
        for i in 0..n / 2 {
            let (body, exit) = (&d.premises[2 * i], &d.premises[2 * i + 1]);
            self.same(body.pre(), &expected_pre, "chain element", path)?;
            self.same(exit.pre(), &expected_pre, "exit precondition", path)?;
            seen = self
                .domain
                .join(&seen, &expected_pre)
                .map_err(|e| ReplayError {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
            exits = self
                .domain
                .join(&exits, exit.post())
                .map_err(|e| ReplayError {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
            self.child(d, 2 * i, &body_items, path)?;
            self.child(d, 2 * i + 1, &exit_items, path)?;
            expected_pre = body.post().clone();
        }
        self.same(&d.side[0].lhs, &expected_pre, "truncation side lhs", path)?;
        self.same(&d.side[0].rhs, &seen, "truncation side rhs", path)?;
        self.leq(&expected_pre, &seen, "chain is saturated", path)?;
        self.same(&exits, d.post(), "join of exit postconditions", path)
    }
}

/// Checks that `d` is a derivation for `p` in the Hoare or incorrectness system.
pub fn replay(d: &Derivation, p: &Program, tol: &Tolerances) -> Result<(), ReplayError> {
    let kind = match d.pre() {
        AbstractElement::Global(_) => DomainKind::Subspace,
        AbstractElement::Local { signature, .. } => DomainKind::LocalSubspace(signature.clone()),
    };
    let domain = Domain::new(kind, p.layout.clone(), *tol).map_err(|e| ReplayError {
        path: Vec::new(),
        reason: e.to_string(),
    })?;
    let r = Replayer {
        domain,
        program: p,
        incorrectness: d.rule.incorrectness(),
    };
    if r.incorrectness && r.domain.kind != DomainKind::Subspace {
        return fail(&[], "incorrectness derivations need the subspace domain");
    }
    r.node(d, &items(&p.body), &mut Vec::new())
}

#[derive(Debug, Clone, Serialize)]
pub struct CompositionReport {
    pub equal: bool,
    /// `analyze(p1; p2)` vs `analyze(p2) ∘ analyze(p1)`: residual of each inclusion.
    pub residual_forward: f64,
    pub residual_backward: f64,
}

/// Compares the analysis of `p1; p2` with the composition of the two analyses.
pub fn composition_identity_test(
    domain: &Domain,
    p1: &Program,
    p2: &Program,
    a: &AbstractElement,
) -> Result<CompositionReport, LogicError> {
    let joint = p1.concat(p2).map_err(LogicError::Program)?;
    let whole = domain.analyze(&joint, a)?;
    let staged = domain.analyze(p2, &domain.analyze(p1, a)?)?;
    let residual_forward = domain.leq_residual(&whole, &staged)?;
    let residual_backward = domain.leq_residual(&staged, &whole)?;
    Ok(CompositionReport {
        equal: residual_forward <= domain.tol.incl_tol && residual_backward <= domain.tol.incl_tol,
        residual_forward,
        residual_backward,
    })
}

/// Global element spanned by the given vectors, for examples and tests.
pub fn global_span(
    vectors: &[Vec<crate::C64>],
    tol: &Tolerances,
) -> Result<AbstractElement, LogicError> {
    let dim = vectors.first().map_or(1, Vec::len);
    Ok(AbstractElement::Global(
        Subspace::span(dim, vectors, tol).map_err(DomainError::from)?,
    ))
}
