//! Command-line front end. [`run`] is the whole program minus process exit.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::gen::{small_groupoids, Sampler, GEN_SIGNATURE};
use crate::groupoid::{arrow_groupoid, classify, diagonal, interval, GroupoidJson, DEFAULT_SEARCH_LIMIT};
use crate::homotopy::{factorize, solve_lift_with_limit, three_for_two, verify_wfs, LiftingProblemJson, TypedFunctorJson};
use crate::kernel::{validate_signature, Kernel, KernelMode, TraceStep};
use crate::semantics::{
    extensionality_check_discrete, reflection_countermodel, Backend, FillerPolicy, Interpreter, SemEnv, SemEnvJson,
    SemError,
};
use crate::syntax::{parse, parse_term, parse_type, Context, Judgement, Program, Signature};

pub const TOOL: &str = "pathcheck";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "pathcheck", version, about = "Identity-type checker with a groupoid model")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct RunConfig {
    /// Accept the reflection rule (identifications become equalities).
    #[arg(long, global = true)]
    pub extensional: bool,
    /// Push substitutions through J eagerly.
    #[arg(long = "strict-j", global = true)]
    pub strict_j: bool,
    #[arg(long, value_enum, global = true)]
    pub backend: Option<BackendArg>,
    /// Emit the JSON report.
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// Bound on candidate assignments explored by functor searches.
    #[arg(long = "max-search", env = "PATHCHECK_MAX_SEARCH", default_value_t = DEFAULT_SEARCH_LIMIT, global = true)]
    pub max_search: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            extensional: false,
            strict_j: false,
            backend: None,
            json: false,
            seed: 0,
            max_search: DEFAULT_SEARCH_LIMIT,
        }
    }
}

impl RunConfig {
    pub fn mode(&self) -> KernelMode {
        KernelMode { extensional: self.extensional, strict_j: self.strict_j }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendArg {
    Groupoid,
    Discrete,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Groupoid => Backend::Groupoid,
            BackendArg::Discrete => Backend::Discrete,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Type-check programs.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Interpret the goals of a program in finite groupoids.
    Interpret {
        file: PathBuf,
        /// Environment JSON.
        #[arg(long)]
        env: Option<PathBuf>,
        /// Built-in environment: interval, z2 or discrete-N.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Run a demonstration suite.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
    },
    /// Answer a lifting, factorization, classification or path-object query.
    Hom {
        /// Query JSON.
        query: Option<PathBuf>,
        /// Built-in query instead of a file.
        #[arg(long, value_enum)]
        example: Option<HomExample>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoName {
    Countermodel,
    ExtensionalSet,
    Coherence,
    Wfs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum HomExample {
    LiftInterval,
    FactorDiagonal,
    ClassifyDiagonal,
    PathObjectInterval,
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub goals: Vec<GoalReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GoalReport {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceStep>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Accepted,
    Rejected,
    Passed,
    Failed,
    Error,
}

impl Status {
    pub fn ok(self) -> bool {
        matches!(self, Status::Accepted | Status::Passed)
    }
}

impl Report {
    pub fn new(goals: Vec<GoalReport>) -> Report {
        Report { tool: TOOL.into(), version: VERSION.into(), goals }
    }

    /// 0 when every goal passed, 1 on a rejection or failure, 2 on input or
    /// configuration errors.
    pub fn exit_code(&self) -> i32 {
        if self.goals.iter().any(|g| g.status == Status::Error) {
            2
        } else if self.goals.iter().all(|g| g.status.ok()) {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_human(&self) -> String {
        let mut out = String::new();
        for g in &self.goals {
            out.push_str(&format!("{}: {}\n", g.name, serde_json::to_value(g.status).unwrap().as_str().unwrap()));
            if let Some(e) = &g.error {
                out.push_str(&format!("  {e}\n"));
            }
        }
        let ok = self.goals.iter().filter(|g| g.status.ok()).count();
        out.push_str(&format!("{ok}/{} ok\n", self.goals.len()));
        out
    }
}

fn passed(name: impl Into<String>, ok: bool, witness: Value) -> GoalReport {
    GoalReport {
        name: name.into(),
        status: if ok { Status::Passed } else { Status::Failed },
        trace: None,
        witness: Some(witness),
        error: None,
    }
}

fn errored(name: impl Into<String>, status: Status, e: impl ToString) -> GoalReport {
    GoalReport { name: name.into(), status, trace: None, witness: None, error: Some(e.to_string()) }
}

fn input_error(e: impl ToString) -> Report {
    Report::new(vec![errored("input", Status::Error, e)])
}

// ---------------------------------------------------------------------------
// Commands

/// Parses arguments, runs the command and writes the report to `out`.
/// Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    let report = execute(&cli);
    let text = if cli.config.json { report.to_json() + "\n" } else { report.to_human() };
    let _ = out.write_all(text.as_bytes());
    report.exit_code()
}

pub fn execute(cli: &Cli) -> Report {
    let c = &cli.config;
    match &cli.command {
        Command::Check { files } => cmd_check(files, c),
        Command::Interpret { file, env, preset } => cmd_interpret(file, env.as_deref(), preset.as_deref(), c),
        Command::Demo { name } => cmd_demo(*name, c),
        Command::Hom { query, example } => cmd_hom(query.as_deref(), *example, c),
    }
}

fn load(path: &Path) -> Result<Program, String> {
    let src = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&src).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn check_source(label: &str, prog: &Program, config: &RunConfig) -> Vec<GoalReport> {
    let prefix = if label.is_empty() { String::new() } else { format!("{label}: ") };
    let v = validate_signature(&prog.signature);
    if !v.accepted {
        return vec![errored(format!("{prefix}signature"), Status::Rejected, v.reason.unwrap_or_default())];
    }
    let k = Kernel::new(&prog.signature, config.mode());
    prog.goals
        .iter()
        .map(|g| {
            let v = k.check_judgement(&g.judgement);
            GoalReport {
                name: format!("{prefix}{}", g.name()),
                status: if v.accepted { Status::Accepted } else { Status::Rejected },
                trace: Some(v.trace),
                witness: None,
                error: v.reason,
            }
        })
        .collect()
}

pub fn cmd_check(files: &[PathBuf], config: &RunConfig) -> Report {
    let mut goals = Vec::new();
    for f in files {
        match load(f) {
            Ok(prog) => goals.extend(check_source(&f.display().to_string(), &prog, config)),
            Err(e) => return input_error(e),
        }
    }
    Report::new(goals)
}

fn environment(sig: &Signature, env: Option<&Path>, preset: Option<&str>, config: &RunConfig) -> Result<SemEnv, String> {
    match env {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let json: SemEnvJson = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut env = SemEnv::from_json(&json).map_err(|e| e.to_string())?;
            if let Some(b) = config.backend {
                env.backend = b.into();
            }
            Ok(env)
        }
        None => {
            let backend = config.backend.map(Backend::from);
            let name = preset.unwrap_or(match backend {
                Some(Backend::Discrete) => "discrete-2",
                _ => "interval",
            });
            match backend {
                Some(b) => SemEnv::preset_with_backend(name, sig, b),
                None => SemEnv::preset(name, sig),
            }
            .map_err(|e| e.to_string())
        }
    }
}

fn interpret_goal(interp: &Interpreter, j: &Judgement) -> Result<(bool, Value), SemError> {
    let ctx = j.context();
    let sc = interp.interp_context(ctx)?;
    let context = json!({
        "groupoid": sc.total().to_json(),
        "fibrations": sc.is_chain_of_fibrations(),
    });
    let fib = |ty| -> Result<Value, SemError> {
        let f = interp.interp_type(ctx, ty)?;
        Ok(json!({
            "total": f.total_groupoid().to_json(),
            "projection": f.projection().to_json(),
            "fibration": f.is_fibration(),
        }))
    };
    Ok(match j {
        Judgement::IsType(_, a) => {
            let t = fib(a)?;
            (t["fibration"] == true, json!({"context": context, "type": t}))
        }
        Judgement::HasType(_, t, a) => {
            let s = interp.interp_term(ctx, t, a)?;
            let ok = s.fibration.is_fibration() && s.is_section();
            (ok, json!({"context": context, "type": fib(a)?, "section": s.section.to_json(), "is_section": s.is_section()}))
        }
        Judgement::TermEq(_, x, y, a) => {
            let l = interp.interp_term(ctx, x, a)?;
            let r = interp.interp_term(ctx, y, a)?;
            let equal = l.section == r.section;
            (
                equal && l.is_section() && r.is_section(),
                json!({"context": context, "type": fib(a)?, "lhs": l.section.to_json(), "rhs": r.section.to_json(), "equal": equal}),
            )
        }
        Judgement::TypeEq(_, a, b) => {
            let l = interp.interp_type(ctx, a)?;
            let r = interp.interp_type(ctx, b)?;
            let equal = l.projection() == r.projection();
            (equal, json!({"context": context, "lhs": fib(a)?, "rhs": fib(b)?, "equal": equal}))
        }
    })
}

pub fn interpret_program(prog: &Program, env: SemEnv, config: &RunConfig) -> Vec<GoalReport> {
    let interp = match Interpreter::new(&prog.signature, env) {
        Ok(i) => i.with_limit(config.max_search),
        Err(e) => return vec![errored("environment", Status::Error, e)],
    };
    let k = Kernel::new(&prog.signature, KernelMode::DEFAULT);
    prog.goals
        .iter()
        .map(|g| {
            let v = k.check_judgement(&g.judgement);
            if !v.accepted {
                return errored(g.name(), Status::Rejected, v.reason.unwrap_or_default());
            }
            match interpret_goal(&interp, &g.judgement) {
                Ok((ok, w)) => passed(g.name(), ok, w),
                Err(e) => errored(g.name(), Status::Failed, e),
            }
        })
        .collect()
}

pub fn cmd_interpret(file: &Path, env: Option<&Path>, preset: Option<&str>, config: &RunConfig) -> Report {
    let prog = match load(file) {
        Ok(p) => p,
        Err(e) => return input_error(e),
    };
    let v = validate_signature(&prog.signature);
    if !v.accepted {
        return input_error(v.reason.unwrap_or_default());
    }
    let env = match environment(&prog.signature, env, preset, config) {
        Ok(e) => e,
        Err(e) => return input_error(e),
    };
    Report::new(interpret_program(&prog, env, config))
}

// ---------------------------------------------------------------------------
// Demos

pub type Probe = (&'static [(&'static str, &'static str)], &'static str);

/// `(context, term)` pairs probed by `demo coherence`, in the generator
/// signature.
pub const COHERENCE_PROBES: &[Probe] = &[
    (&[], "(J A [x y z => D x y z] [x => d x] v w r)[a/v, b/w, p/r]"),
    (&[], "(J A [x y z => B x] [x => f x] v w r)[a/v, b/w, p/r]"),
    (&[], "(J A [x y z => B y] [x => f x] v w r)[a/v, b/w, p/r]"),
    (&[], "(J A [x y z => Id A x y] [x => refl A x] v w r)[a/v, b/w, p/r]"),
    (&[], "(J A [x y z => Id A y x] [x => refl A x] v w r)[a/v, b/w, p/r]"),
    (&[], "(J A [x y z => A] [x => x] v w r)[a/v, b/w, p/r]"),
    (
        &[],
        "(J A [x y z => Sig (s : A) Id A s y] [x => pair x (refl A x) as Sig (s : A) Id A s x] v w r)[a/v, b/w, p/r]",
    ),
    (&[], "(J A [x y z => D x y z] [x => d x] v b r)[a/v, p/r]"),
    (&[], "(J A [x y z => B y] [x => f x] a b r)[p/r]"),
    (&[], "(J A [x y z => D x y z] [x => d x] v v (refl A v))[b/v]"),
    (&[("u", "A"), ("e", "Id A a u")], "(J A [x y z => D x y z] [x => d x] v w r)[a/v, u/w, e/r]"),
    (&[("u", "A"), ("e", "Id A u b")], "(J A [x y z => B y] [x => f x] v w r)[u/v, b/w, e/r]"),
];

/// Probes valid without the path constant `p`, for discrete environments.
pub const DISCRETE_PROBES: &[Probe] = &[
    (&[], "(J A [x y z => D x y z] [x => d x] v w r)[a/v, a/w, (refl A a)/r]"),
    (&[], "(J A [x y z => B y] [x => f x] v w r)[b/v, b/w, (refl A b)/r]"),
    (&[], "(J A [x y z => D x y z] [x => d x] v v (refl A v))[b/v]"),
    (&[("u", "A"), ("e", "Id A a u")], "(J A [x y z => D x y z] [x => d x] v w r)[a/v, u/w, e/r]"),
];

fn parse_context(sig: &Signature, entries: &[(&str, &str)]) -> Result<Context, String> {
    let mut ctx = Context::new();
    for (x, ty) in entries {
        let t = parse_type(sig, &ctx, ty).map_err(|e| e.to_string())?;
        ctx = ctx.extend(x, t);
    }
    Ok(ctx)
}

pub fn coherence_suite(config: &RunConfig) -> Vec<GoalReport> {
    let full = parse(GEN_SIGNATURE).expect("generator signature").signature;
    let without_p = parse(&GEN_SIGNATURE.replace("assume p : Id A a b\n", "")).expect("signature").signature;
    let runs: [(&str, &Signature, &[Probe]); 3] =
        [("interval", &full, COHERENCE_PROBES), ("z2", &full, COHERENCE_PROBES), ("discrete-2", &without_p, DISCRETE_PROBES)];
    let mut goals = Vec::new();
    for (preset, sig, probes) in runs {
        let interp = match SemEnv::preset(preset, sig).and_then(|e| Interpreter::new(sig, e)) {
            Ok(i) => i.with_limit(config.max_search),
            Err(e) => {
                goals.push(errored(format!("coherence {preset}"), Status::Error, e));
                continue;
            }
        };
        for (ctx_text, term) in probes {
            for (policy, tag) in [(FillerPolicy::LexLeast, "same choice"), (FillerPolicy::Last, "injected choice")] {
                let binders: Vec<String> = ctx_text.iter().map(|(x, t)| format!("({x} : {t})")).collect();
                let name = if binders.is_empty() {
                    format!("{preset} [{tag}] {term}")
                } else {
                    format!("{preset} [{tag}] {} ⊢ {term}", binders.join(" "))
                };
                let res = parse_context(sig, ctx_text).and_then(|ctx| {
                    let t = parse_term(sig, &ctx, term).map_err(|e| e.to_string())?;
                    interp.coherence_probe(&ctx, &t, policy).map_err(|e| e.to_string())
                });
                goals.push(match res {
                    Ok(r) => passed(name, r.homotopy_found, serde_json::to_value(&r).unwrap()),
                    Err(e) => errored(name, Status::Failed, e),
                });
            }
        }
    }
    goals
}

pub fn wfs_suite(config: &RunConfig) -> Vec<GoalReport> {
    let mut goals = Vec::new();
    let gs: Vec<_> = small_groupoids(2, 1).into_iter().map(|(_, g)| Arc::new(g)).collect();
    let mut universe = Vec::new();
    for a in &gs {
        for b in &gs {
            if let Ok(fs) = crate::groupoid::enumerate_functors(a, b, config.max_search) {
                universe.extend(fs);
            }
        }
    }
    match verify_wfs(&universe, config.max_search) {
        Ok(r) => {
            let ok = r.passed();
            goals.push(passed(
                "weak factorization systems (exhaustive, ≤2 objects, ≤1 generator)",
                ok,
                json!({"maps": r.maps, "factorizations_checked": r.factorizations_checked, "lifting_checks": r.lifting_checks, "failures": r.failures}),
            ));
        }
        Err(e) => goals.push(errored("weak factorization systems", Status::Failed, e)),
    }
    let mut s = Sampler::new(config.seed, 3);
    let mut violations = 0;
    for _ in 0..50 {
        let (f, g) = s.composable_pair();
        match three_for_two(&f, &g) {
            Ok(t) if t.holds => {}
            _ => violations += 1,
        }
    }
    goals.push(passed(format!("three-for-two (50 random pairs, seed {})", config.seed), violations == 0, json!({"pairs": 50, "violations": violations})));
    let mut solved = 0;
    let squares = 20;
    for _ in 0..squares {
        let prob = s.lifting_square(4);
        if let Ok(Some(l)) = solve_lift_with_limit(&prob, config.max_search) {
            if prob.is_filler(&l) {
                solved += 1;
            }
        }
    }
    goals.push(passed(
        format!("lifting (20 random squares, seed {})", config.seed),
        solved == squares,
        json!({"squares": squares, "solved": solved}),
    ));
    goals
}

pub fn cmd_demo(name: DemoName, config: &RunConfig) -> Report {
    let goals = match name {
        DemoName::Countermodel => vec![match reflection_countermodel() {
            Ok(r) => {
                let ok = r.fiber_objects == 1 && !r.a_equals_b && r.discrete_fiber_objects == 0;
                passed("reflection countermodel (interval)", ok, serde_json::to_value(&r).unwrap())
            }
            Err(e) => errored("reflection countermodel (interval)", Status::Failed, e),
        }],
        DemoName::ExtensionalSet => (1..=5)
            .map(|n| match extensionality_check_discrete(n) {
                Ok(r) => passed(format!("discrete-{n}"), r.passed, serde_json::to_value(&r).unwrap()),
                Err(e) => errored(format!("discrete-{n}"), Status::Failed, e),
            })
            .collect(),
        DemoName::Coherence => coherence_suite(config),
        DemoName::Wfs => wfs_suite(config),
    };
    Report::new(goals)
}

// ---------------------------------------------------------------------------
// Homotopy queries

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "query", rename_all = "kebab-case")]
pub enum HomQuery {
    Lift { problem: LiftingProblemJson },
    Factor { functor: TypedFunctorJson },
    Classify { functor: TypedFunctorJson },
    PathObject { groupoid: GroupoidJson },
}

pub fn example_query(ex: HomExample) -> HomQuery {
    let i = Arc::new(interval());
    let po = arrow_groupoid(&i);
    let (_, delta) = diagonal(&i);
    match ex {
        HomExample::LiftInterval => HomQuery::Lift {
            problem: LiftingProblemJson {
                f: TypedFunctorJson::from_functor(&po.r),
                g: TypedFunctorJson::from_functor(&po.p),
                h: TypedFunctorJson::from_functor(&po.r),
                k: TypedFunctorJson::from_functor(&po.p),
            },
        },
        HomExample::FactorDiagonal => HomQuery::Factor { functor: TypedFunctorJson::from_functor(&delta) },
        HomExample::ClassifyDiagonal => HomQuery::Classify { functor: TypedFunctorJson::from_functor(&delta) },
        HomExample::PathObjectInterval => HomQuery::PathObject { groupoid: i.to_json() },
    }
}

pub fn answer(q: &HomQuery, config: &RunConfig) -> GoalReport {
    let res: Result<GoalReport, String> = (|| match q {
        HomQuery::Lift { problem } => {
            let prob = problem.to_problem().map_err(|e| e.to_string())?;
            let l = solve_lift_with_limit(&prob, config.max_search).map_err(|e| e.to_string())?;
            let ok = l.as_ref().is_some_and(|l| prob.is_filler(l));
            Ok(passed("lift", ok, json!({"filler": l.map(|l| TypedFunctorJson::from_functor(&l))})))
        }
        HomQuery::Factor { functor } => {
            let f = functor.to_functor().map_err(|e| e.to_string())?;
            let fac = factorize(&f);
            Ok(passed(
                "factor",
                fac.is_valid(&f),
                json!({
                    "middle": fac.middle.to_json(),
                    "i": TypedFunctorJson::from_functor(&fac.i),
                    "p": TypedFunctorJson::from_functor(&fac.p),
                    "recomposes": fac.recomposes_to(&f),
                }),
            ))
        }
        HomQuery::Classify { functor } => {
            let f = functor.to_functor().map_err(|e| e.to_string())?;
            Ok(passed("classify", true, serde_json::to_value(classify(&f)).unwrap()))
        }
        HomQuery::PathObject { groupoid } => {
            let g = Arc::new(groupoid.validate().map_err(|e| e.to_string())?);
            let po = arrow_groupoid(&g);
            let (_, delta) = diagonal(&g);
            let r_ok = classify(&po.r).acyclic_cofibration;
            let p_ok = classify(&po.p).fibration;
            let diag = po.p.after(&po.r) == delta;
            Ok(passed(
                "path-object",
                r_ok && p_ok && diag,
                json!({
                    "path_groupoid": po.total().to_json(),
                    "r": TypedFunctorJson::from_functor(&po.r),
                    "p": TypedFunctorJson::from_functor(&po.p),
                    "r_acyclic_cofibration": r_ok,
                    "p_fibration": p_ok,
                    "p_after_r_is_diagonal": diag,
                }),
            ))
        }
    })();
    res.unwrap_or_else(|e| errored("query", Status::Error, e))
}

pub fn cmd_hom(query: Option<&Path>, example: Option<HomExample>, config: &RunConfig) -> Report {
    let q = match (query, example) {
        (_, Some(ex)) => example_query(ex),
        (Some(path), None) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return input_error(format!("{}: {e}", path.display())),
            };
            match serde_json::from_str::<HomQuery>(&text) {
                Ok(q) => q,
                Err(e) => return input_error(format!("{}: {e}", path.display())),
            }
        }
        (None, None) => return input_error("hom needs a query file or --example"),
    };
    Report::new(vec![answer(&q, config)])
}
