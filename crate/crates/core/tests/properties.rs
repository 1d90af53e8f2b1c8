use proptest::prelude::*;
use qai_core::concrete::{apply_kraus, eval_block, kraus_of, LoopPolicy, State};
use qai_core::domain::{AbstractElement, Domain, DomainKind, Signature};
use qai_core::lang::{parse, pretty, Program, Stmt, StmtKind};
use qai_core::linalg::eig_hermitian;
use qai_core::logic::{check_hoare, check_incorrectness, replay, spc, Verdict};
use qai_core::random::{
    random_density, random_partial_density, random_program, random_program_on, random_subspace,
    GenConfig,
};
use qai_core::{ComplexMatrix, QubitLayout, Subspace, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn layout(n: usize) -> QubitLayout {
    let names: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    QubitLayout::new(&names).unwrap()
}

fn random_pre(dim: usize, r: &mut ChaCha8Rng) -> Subspace {
    let k = r.random_range(1..=dim);
    random_subspace(dim, k, r)
}

fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    *eig_hermitian(m, 1e-9).unwrap().values.last().unwrap()
}

fn domains(l: &QubitLayout) -> Vec<Domain> {
    let mut out = vec![Domain::global(l.clone())];
    if l.len() >= 2 {
        let sig = Signature::all_of_size(l, 2.min(l.len() - 1)).unwrap();
        out.push(
            Domain::new(
                DomainKind::LocalSubspace(sig),
                l.clone(),
                Tolerances::default(),
            )
            .unwrap(),
        );
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pretty_then_parse_is_identity(seed in any::<u64>()) {
        let p = random_program(&GenConfig::default(), &mut rng(seed));
        prop_assert_eq!(parse(&pretty(&p)).unwrap(), p);
    }

    #[test]
    fn semantics_is_linear(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&GenConfig::default(), &mut r);
        let dim = p.layout.dim();
        let (a, b) = (random_partial_density(dim, &mut r), random_partial_density(dim, &mut r));
        let (x, y) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let mix = &a.scale_real(x) + &b.scale_real(y);
        let policy = LoopPolicy { trace_eps: 1e-14, ..LoopPolicy::default() };
        let (out, _) = eval_block(&p, &p.body, &mix, policy).unwrap();
        let (oa, _) = eval_block(&p, &p.body, &a, policy).unwrap();
        let (ob, _) = eval_block(&p, &p.body, &b, policy).unwrap();
        let sum = &oa.scale_real(x) + &ob.scale_real(y);
        prop_assert!(out.max_abs_diff(&sum) < 1e-8);
    }

    #[test]
    fn semantics_does_not_increase_trace(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&GenConfig::default(), &mut r);
        let rho = random_partial_density(p.layout.dim(), &mut r);
        let (out, _) = eval_block(&p, &p.body, &rho, LoopPolicy::default()).unwrap();
        prop_assert!(out.trace().re <= rho.trace().re + 1e-12);
        prop_assert!(min_eigenvalue(&out) >= -1e-10);
    }

    #[test]
    fn loop_partial_sums_increase_in_loewner_order(seed in any::<u64>(), k in 0usize..6) {
        let mut r = rng(seed);
        let p = std::iter::repeat_with(|| random_program(&GenConfig::default(), &mut r))
            .find(Program::has_loops)
            .unwrap();
        let rho = random_partial_density(p.layout.dim(), &mut r);
        let at = |iters| eval_block(&p, &p.body, &rho, LoopPolicy { trace_eps: 0.0, max_iters: iters }).unwrap().0;
        let diff = &at(k + 1) - &at(k);
        prop_assert!(min_eigenvalue(&diff.hermitian_part()) >= -1e-10);
    }

    #[test]
    fn kraus_channel_reproduces_eval(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&GenConfig::default(), &mut r);
        // Some generated loops leak mass slowly; give them room to converge.
        let policy = LoopPolicy { max_iters: 1_000_000, ..LoopPolicy::default() };
        let ops = kraus_of(&p, policy, &Tolerances::default()).unwrap();
        for _ in 0..3 {
            let rho = random_partial_density(p.layout.dim(), &mut r);
            let (out, _) = eval_block(&p, &p.body, &rho, policy).unwrap();
            prop_assert!(apply_kraus(&ops, &rho).max_abs_diff(&out) < 1e-7);
        }
    }

    #[test]
    fn analysis_is_sound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&GenConfig::default(), &mut r);
        let rank = r.random_range(1..=2.min(p.layout.dim()));
        let rho = random_density(p.layout.dim(), rank, &mut r);
        // A truncated loop under-approximates the output, which keeps the check meaningful.
        let (out, _) = eval_block(&p, &p.body, &rho, LoopPolicy::default()).unwrap();
        for d in domains(&p.layout) {
            let concrete = d.alpha(std::slice::from_ref(&out)).unwrap();
            let analyzed = d.analyze(&p, &d.alpha(std::slice::from_ref(&rho)).unwrap()).unwrap();
            prop_assert!(d.leq(&concrete, &analyzed).unwrap());
        }
    }

    #[test]
    fn global_analysis_preserves_joins(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&GenConfig::default(), &mut r);
        let d = Domain::global(p.layout.clone());
        let dim = p.layout.dim();
        let a = AbstractElement::Global(random_pre(dim, &mut r));
        let b = AbstractElement::Global(random_pre(dim, &mut r));
        let whole = d.analyze(&p, &d.join(&a, &b).unwrap()).unwrap();
        let parts = d.join(&d.analyze(&p, &a).unwrap(), &d.analyze(&p, &b).unwrap()).unwrap();
        prop_assert!(d.equal(&whole, &parts).unwrap());
    }

    #[test]
    fn analysis_is_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&GenConfig::default(), &mut r);
        let dim = p.layout.dim();
        for d in domains(&p.layout) {
            let a = d.alpha(&[random_density(dim, 1, &mut r)]).unwrap();
            let b = d.alpha(&[random_density(dim, 1, &mut r)]).unwrap();
            let bigger = d.join(&a, &b).unwrap();
            prop_assert!(d.leq(&d.analyze(&p, &a).unwrap(), &d.analyze(&p, &bigger).unwrap()).unwrap());
        }
    }

    #[test]
    fn conditional_is_join_of_guarded_branches(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=3);
        let cfg = GenConfig { max_stmts: 10, ..GenConfig::default() };
        let mut base = random_program_on(&layout(n), &cfg, &mut r);
        let cut = r.random_range(0..=base.body.len());
        let (s1, s2) = (base.body[..cut].to_vec(), base.body[cut..].to_vec());
        let target = format!("q{}", r.random_range(0..n));
        let g = random_subspace(2, 1, &mut r);
        base.declare_space("G", g.basis().to_vec()).unwrap();
        base.declare_space("Gc", g.orthocomplement().basis().to_vec()).unwrap();
        let guarded = |space: &str, body: Vec<Stmt>| {
            let mut stmts = vec![Stmt::new(StmtKind::Assert { targets: vec![target.clone()], space: space.into() })];
            stmts.extend(body);
            base.clone().with_body(stmts)
        };
        let cond = base.clone().with_body(vec![Stmt::new(StmtKind::If {
            targets: vec![target.clone()],
            space: "G".into(),
            then_branch: s1.clone(),
            else_branch: s2.clone(),
        })]);
        for d in domains(&base.layout) {
            let a = d.alpha(&[random_partial_density(base.layout.dim(), &mut r)]).unwrap();
            let joined = d.join(
                &d.analyze(&guarded("G", s1.clone()), &a).unwrap(),
                &d.analyze(&guarded("Gc", s2.clone()), &a).unwrap(),
            ).unwrap();
            prop_assert!(d.equal(&d.analyze(&cond, &a).unwrap(), &joined).unwrap());
        }
    }

    #[test]
    fn strongest_postcondition_is_the_only_post_valid_both_ways(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_program(&GenConfig::default(), &mut r);
        let d = Domain::global(p.layout.clone());
        let dim = p.layout.dim();
        let pre = AbstractElement::Global(random_pre(dim, &mut r));
        let s = spc(&d, &p, &pre).unwrap();
        let hoare = check_hoare(&d, &p, &pre, &s, LoopPolicy::default(), &mut r).unwrap();
        let under = check_incorrectness(&d, &p, &pre, &s).unwrap();
        prop_assert_eq!(hoare.verdict, Verdict::Valid);
        prop_assert!(under.valid);
        prop_assert!(replay(hoare.derivation.as_ref().unwrap(), &p, &d.tol).is_ok());
        prop_assert!(replay(under.derivation.as_ref().unwrap(), &p, &d.tol).is_ok());
        let other = AbstractElement::Global(random_pre(dim, &mut r));
        let both = check_hoare(&d, &p, &pre, &other, LoopPolicy::default(), &mut r).unwrap().verdict == Verdict::Valid
            && check_incorrectness(&d, &p, &pre, &other).unwrap().valid;
        prop_assert_eq!(both, d.equal(&other, &s).unwrap());
    }

    #[test]
    fn subspace_lattice_laws(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = 1 << r.random_range(1..=3);
        let t = Tolerances::default();
        let a = random_subspace(dim, r.random_range(0..=dim), &mut r);
        let b = random_subspace(dim, r.random_range(0..=dim), &mut r);
        let j = a.join(&b, &t).unwrap();
        let m = a.meet(&b, &t).unwrap();
        prop_assert!(a.leq(&j, &t).unwrap() && b.leq(&j, &t).unwrap());
        prop_assert!(m.leq(&a, &t).unwrap() && m.leq(&b, &t).unwrap());
        prop_assert!(j.same_as(&b.join(&a, &t).unwrap(), &t).unwrap());
        prop_assert!(a.orthocomplement().orthocomplement().same_as(&a, &t).unwrap());
        let de_morgan = a.orthocomplement().meet(&b.orthocomplement(), &t).unwrap();
        prop_assert!(j.orthocomplement().same_as(&de_morgan, &t).unwrap());
        prop_assert!(j.dim() + m.dim() <= a.dim() + b.dim());
    }

    #[test]
    fn json_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=3);
        let l = layout(n);
        for d in domains(&l) {
            let e = d.alpha(&[random_density(l.dim(), 2, &mut r)]).unwrap();
            let back: AbstractElement = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
            prop_assert!(d.equal(&back, &e).unwrap());
        }
        let s = State::new(l.clone(), random_density(l.dim(), 2, &mut r), &Tolerances::default()).unwrap();
        let back: State = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert_eq!(back.rho, s.rho);
    }
}

#[test]
fn program_concatenation_rejects_conflicting_declarations() {
    let mut r = rng(11);
    let l = layout(2);
    let a: Program = random_program_on(&l, &GenConfig::default(), &mut r);
    let b: Program = random_program_on(&l, &GenConfig::default(), &mut r);
    let shared = a.unitaries.keys().any(|k| b.unitaries.contains_key(k));
    if shared {
        assert!(a.concat(&b).is_err());
    }
    assert!(a.concat(&a.clone().with_body(vec![])).is_ok());
}
