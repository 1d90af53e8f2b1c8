//! `qai`: parse, run, analyze and verify quantum while-programs.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qai_core::concrete::{eval, EvalError, LoopPolicy, State};
use qai_core::domain::{AbstractElement, CompletenessVerdict, Domain, DomainKind, Signature};
use qai_core::lang::{self, ParseError, Program};
use qai_core::logic::{self, Derivation, Verdict};
use qai_core::{ComplexMatrix, Tolerances, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "qai",
    version,
    about = "Abstract interpretation and triple checking for quantum while-programs"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Relative eigenvalue cutoff for supports.
    #[arg(long, global = true, default_value_t = 1e-9)]
    rank_tol: f64,
    /// Tolerance of subspace inclusion tests.
    #[arg(long, global = true, default_value_t = 1e-8)]
    incl_tol: f64,
    /// Emit machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and pretty-print a program.
    Parse { file: PathBuf },
    /// Run a program on a state.
    Run {
        file: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        trace_eps: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
    },
    /// Abstract post-state of a program.
    Analyze {
        file: PathBuf,
        #[arg(long)]
        pre: PathBuf,
        #[arg(long, default_value = "subspace")]
        domain: String,
    },
    /// Check a Hoare triple {pre} file {post}.
    Hoare {
        file: PathBuf,
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long, default_value = "subspace")]
        domain: String,
        /// Include the concrete counterexample in the report.
        #[arg(long)]
        witness: bool,
    },
    /// Check an incorrectness triple [pre] file [post] over the subspace domain.
    Incorrect {
        file: PathBuf,
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
    },
    /// Re-check a derivation against a program.
    Replay { derivation: PathBuf, file: PathBuf },
    /// Compare completeness of the subspace domain and a local-subspace domain.
    CompareDomains {
        file: PathBuf,
        #[arg(long)]
        pre: PathBuf,
        /// Signature such as `q1,q2;q2,q3`.
        #[arg(long)]
        local: String,
        #[arg(long, default_value_t = 16)]
        trials: usize,
    },
    /// Built-in three-qubit GHZ rotation on which the local-subspace domain is incomplete.
    #[command(name = "paper-5-3")]
    Ghz,
}

/// Failure with its exit code: 2 for input problems, 3 for numeric ones.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

type Outcome = Result<(Value, String, u8), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    match run(&cli) {
        Ok((value, text, code)) => {
            let out = if g.json || text.is_empty() {
                serde_json::to_string(&value).expect("serializable") + "\n"
            } else {
                text
            };
            if let Err(e) = write_output(g.output.as_deref(), &out) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            if g.json {
                println!("{}", json!({ "error": f.message, "exit_code": f.code }));
            }
            ExitCode::from(f.code)
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn tolerances(g: &GlobalOpts) -> Result<Tolerances, Failure> {
    if !(g.rank_tol > 0.0 && g.incl_tol > 0.0) {
        return Err(Failure::usage("tolerances must be positive"));
    }
    Ok(Tolerances {
        rank_tol: g.rank_tol,
        incl_tol: g.incl_tol,
        ..Tolerances::default()
    })
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let text = read(path)?;
    lang::parse(&text).map_err(|e| match e {
        ParseError::Invalid(diags) => Failure::usage(format!(
            "{}: invalid program\n{}",
            path.display(),
            diags
                .iter()
                .map(|d| format!("  {d}"))
                .collect::<Vec<_>>()
                .join("\n")
        )),
        other => Failure::usage(format!("{}:{other}", path.display())),
    })
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn make_domain(text: &str, p: &Program, tol: Tolerances) -> Result<Domain, Failure> {
    let kind = DomainKind::parse(text).map_err(|e| Failure::usage(e.to_string()))?;
    Domain::new(kind, p.layout.clone(), tol).map_err(|e| Failure::usage(e.to_string()))
}

/// Reads an element and moves it into `domain`: subspaces are abstracted locally,
/// local elements are concretized to their maximal subspace.
fn load_element(path: &Path, domain: &Domain) -> Result<AbstractElement, Failure> {
    let e: AbstractElement = load_json(path)?;
    let converted = match (&domain.kind, &e) {
        (DomainKind::LocalSubspace(_), AbstractElement::Global(q)) => domain.alpha_subspace(q),
        (DomainKind::Subspace, AbstractElement::Local { signature, .. }) => Domain::new(
            DomainKind::LocalSubspace(signature.clone()),
            domain.layout.clone(),
            domain.tol,
        )
        .and_then(|local| local.gamma_as_subspace(&e))
        .map(AbstractElement::Global),
        _ => Ok(e),
    }
    .map_err(|err| Failure::usage(format!("{}: {err}", path.display())))?;
    domain
        .check(&converted)
        .map_err(|err| Failure::usage(format!("{}: {err}", path.display())))?;
    Ok(converted)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Every derivation is replayed before it is shown.
fn checked(d: &Derivation, p: &Program, tol: &Tolerances) -> Result<(), Failure> {
    logic::replay(d, p, tol)
        .map_err(|e| Failure::numeric(format!("emitted derivation failed replay: {e}")))
}

fn run(cli: &Cli) -> Outcome {
    let tol = tolerances(&cli.global)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.global.seed);
    match &cli.command {
        Command::Parse { file } => {
            let p = load_program(file)?;
            Ok((to_value(&p), lang::pretty(&p), 0))
        }
        Command::Run {
            file,
            state,
            trace_eps,
            max_iters,
        } => {
            let p = load_program(file)?;
            let s: State = load_json(state)?;
            if !(*trace_eps > 0.0 && *max_iters >= 1) {
                return Err(Failure::usage(
                    "--trace-eps must be positive and --max-iters at least 1",
                ));
            }
            let policy = LoopPolicy {
                trace_eps: *trace_eps,
                max_iters: *max_iters,
            };
            match eval(&p, &s, policy) {
                Ok(out) => Ok((to_value(&out), String::new(), 0)),
                Err(EvalError::LoopBudgetExceeded {
                    partial,
                    accumulated,
                    residual,
                }) => {
                    let v = json!({
                        "error": "loop budget exceeded",
                        "partial": to_value(&*partial),
                        "accumulated": accumulated,
                        "residual": residual,
                    });
                    eprintln!("error: loop budget exceeded (residual trace {residual})");
                    Ok((v, String::new(), 3))
                }
                Err(e) => Err(Failure::usage(e.to_string())),
            }
        }
        Command::Analyze { file, pre, domain } => {
            let p = load_program(file)?;
            let d = make_domain(domain, &p, tol)?;
            let a = load_element(pre, &d)?;
            let out = d
                .analyze(&p, &a)
                .map_err(|e| Failure::numeric(e.to_string()))?;
            Ok((to_value(&out), String::new(), 0))
        }
        Command::Hoare {
            file,
            pre,
            post,
            domain,
            witness,
        } => {
            let p = load_program(file)?;
            let d = make_domain(domain, &p, tol)?;
            let a = load_element(pre, &d)?;
            let b = load_element(post, &d)?;
            let report = logic::check_hoare(&d, &p, &a, &b, LoopPolicy::default(), &mut rng)
                .map_err(|e| Failure::numeric(e.to_string()))?;
            if let Some(der) = &report.derivation {
                checked(der, &p, &tol)?;
            }
            let mut v = to_value(&report);
            if !witness {
                v.as_object_mut().expect("object").remove("witness");
            }
            let text = format!(
                "{}\nspc residual: {:e}\n",
                match report.verdict {
                    Verdict::Valid => "valid",
                    Verdict::Invalid => "invalid",
                    Verdict::Unknown => "unknown",
                },
                report.residual
            );
            let code = if report.verdict == Verdict::Valid {
                0
            } else {
                1
            };
            Ok((v, if cli.global.json { String::new() } else { text }, code))
        }
        Command::Incorrect { file, pre, post } => {
            let p = load_program(file)?;
            let d = Domain::new(DomainKind::Subspace, p.layout.clone(), tol)
                .map_err(|e| Failure::usage(e.to_string()))?;
            let a = load_element(pre, &d)?;
            let b = load_element(post, &d)?;
            let report = logic::check_incorrectness(&d, &p, &a, &b)
                .map_err(|e| Failure::numeric(e.to_string()))?;
            if let Some(der) = &report.derivation {
                checked(der, &p, &tol)?;
            }
            let code = if report.valid { 0 } else { 1 };
            Ok((to_value(&report), String::new(), code))
        }
        Command::Replay { derivation, file } => {
            let p = load_program(file)?;
            let raw: Value = load_json(derivation)?;
            let raw = match raw.get("derivation") {
                Some(inner) if !inner.is_null() => inner.clone(),
                _ => raw,
            };
            let d: Derivation = serde_json::from_value(raw)
                .map_err(|e| Failure::usage(format!("{}: {e}", derivation.display())))?;
            match logic::replay(&d, &p, &tol) {
                Ok(()) => Ok((
                    json!({ "replay": true, "nodes": d.size() }),
                    "replay: ok\n".into(),
                    0,
                )),
                Err(e) => Ok((
                    json!({ "replay": false, "path": e.path, "reason": e.reason }),
                    format!("replay: rejected at {:?}: {}\n", e.path, e.reason),
                    1,
                )),
            }
        }
        Command::CompareDomains {
            file,
            pre,
            local,
            trials,
        } => {
            let p = load_program(file)?;
            let sig = local.strip_prefix("local:").unwrap_or(local);
            let sig = Signature::parse(sig).map_err(|e| Failure::usage(e.to_string()))?;
            let global = Domain::new(DomainKind::Subspace, p.layout.clone(), tol)
                .map_err(|e| Failure::usage(e.to_string()))?;
            let localdom = Domain::new(DomainKind::LocalSubspace(sig), p.layout.clone(), tol)
                .map_err(|e| Failure::usage(e.to_string()))?;
            let ga = load_element(pre, &global)?;
            let la = load_element(pre, &localdom)?;
            let mut code = 0;
            let mut sections = Vec::new();
            for (name, d, a) in [("subspace", &global, &ga), ("local", &localdom, &la)] {
                let r = d
                    .check_completeness(&p, a, (*trials).max(1), LoopPolicy::default(), &mut rng)
                    .map_err(|e| Failure::numeric(e.to_string()))?;
                let verdict = match &r.verdict {
                    CompletenessVerdict::Complete => json!({ "verdict": "Complete" }),
                    CompletenessVerdict::IncompleteWitness {
                        state,
                        concrete,
                        analyzed,
                        gap,
                    } => {
                        code = 1;
                        json!({
                            "verdict": "IncompleteWitness",
                            "witness": to_value(&State { layout: p.layout.clone(), rho: state.clone() }),
                            "alpha_of_output": to_value(concrete),
                            "analysis_of_alpha": to_value(analyzed),
                            "gap": gap,
                        })
                    }
                };
                sections.push((
                    name,
                    json!({
                        "samples": r.samples,
                        "deviation": r.deviation,
                        "analyzed": to_value(&r.analyzed),
                        "result": verdict,
                    }),
                ));
            }
            let v = Value::Object(
                sections
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            );
            Ok((v, String::new(), code))
        }
        Command::Ghz => ghz_demo(tol, &mut rng),
    }
}

/// Source of the built-in program: `U` maps GHZ+ to |000> and GHZ- to |111>, fixing
/// the other basis states.
fn ghz_source() -> String {
    let s = FRAC_1_SQRT_2;
    let mut rows = vec![vec![0.0f64; 8]; 8];
    rows[0][0] = s;
    rows[0][7] = s;
    rows[7][0] = s;
    rows[7][7] = -s;
    for (i, row) in rows.iter_mut().enumerate().take(7).skip(1) {
        row[i] = 1.0;
    }
    let rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "[{}]",
                r.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        })
        .collect();
    format!(
        "qubits q1 q2 q3;\nunitary U = [{}];\nq1, q2, q3 *= U;\n",
        rows.join(",\n    ")
    )
}

fn ghz_demo(tol: Tolerances, rng: &mut ChaCha8Rng) -> Outcome {
    let start = Instant::now();
    let src = ghz_source();
    let p = lang::parse(&src).map_err(|e| Failure::numeric(e.to_string()))?;
    let sig = Signature::parse("q1,q2;q2,q3").expect("valid signature");
    let d = Domain::new(DomainKind::LocalSubspace(sig), p.layout.clone(), tol)
        .map_err(|e| Failure::numeric(e.to_string()))?;
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    let ghz = ComplexMatrix::pure_state(&[s, z, z, z, z, z, z, s]);
    let state = State {
        layout: p.layout.clone(),
        rho: ghz.clone(),
    };
    let num = |e: &dyn std::fmt::Display| Failure::numeric(e.to_string());
    let before = d.alpha(std::slice::from_ref(&ghz)).map_err(|e| num(&e))?;
    let out = eval(&p, &state, LoopPolicy::default()).map_err(|e| num(&e))?;
    let after = d
        .alpha(std::slice::from_ref(&out.rho))
        .map_err(|e| num(&e))?;
    let analyzed = d.analyze(&p, &before).map_err(|e| num(&e))?;
    let ket11 = [z, z, z, C64::new(1.0, 0.0)];
    let contains_11: Vec<bool> = analyzed
        .parts()
        .iter()
        .map(|q| q.residual_norm(&ket11) <= tol.incl_tol)
        .collect();
    let report = d
        .check_completeness(&p, &before, 8, LoopPolicy::default(), rng)
        .map_err(|e| num(&e))?;
    let witness = matches!(
        report.verdict,
        CompletenessVerdict::IncompleteWitness { .. }
    );
    let v = json!({
        "program": src,
        "signature": "q1,q2;q2,q3",
        "alpha_input": to_value(&before),
        "alpha_output": to_value(&after),
        "analyzed": to_value(&analyzed),
        "analyzed_contains_11": contains_11,
        "verdict": if witness { "IncompleteWitness" } else { "Complete" },
        "seconds": start.elapsed().as_secs_f64(),
    });
    let text = format!(
        "alpha(GHZ+)          = {}\nalpha(U GHZ+)        = {}\nanalyze(alpha(GHZ+)) = {}\n|11> in each part: {:?}\nverdict: {}\n",
        describe(&before),
        describe(&after),
        describe(&analyzed),
        contains_11,
        if witness { "IncompleteWitness" } else { "Complete" },
    );
    Ok((v, text, if witness { 1 } else { 0 }))
}

/// Short human form of a local element: the dimension of each part and its basis when computational.
fn describe(e: &AbstractElement) -> String {
    let parts: Vec<String> = e
        .parts()
        .iter()
        .map(|q| {
            let k = q.ambient_dim().trailing_zeros() as usize;
            let kets: Vec<String> = (0..q.ambient_dim())
                .filter(|&i| {
                    let mut v = vec![C64::new(0.0, 0.0); q.ambient_dim()];
                    v[i] = C64::new(1.0, 0.0);
                    q.residual_norm(&v) < 1e-8
                })
                .map(|i| format!("|{i:0k$b}>"))
                .collect();
            if kets.len() == q.dim() {
                format!("span{{{}}}", kets.join(", "))
            } else {
                format!("<{}-dim subspace>", q.dim())
            }
        })
        .collect();
    format!("({})", parts.join(", "))
}
