//! Acceptance suite. One line per criterion; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use pathcheck::cli::{self, DemoName, RunConfig, Status};
use pathcheck::gen::{gen_signature, small_groupoids, GoalGen, Sampler};
use pathcheck::groupoid::{arrow_groupoid, classify, diagonal, DEFAULT_SEARCH_LIMIT};
use pathcheck::homotopy::{factorize, solve_lift_with_limit, three_for_two};
use pathcheck::kernel::{Kernel, KernelMode};
use pathcheck::semantics::{stability_check, Interpreter, SemEnv};
use pathcheck::syntax::{parse, Judgement};

const SEED: u64 = 20_240_601;
/// Morphism cap for the fibrations of the stability samples.
const MAX_STABILITY_MORPHISMS: usize = 32;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    ok: bool,
    detail: String,
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn within(t: Duration, budget_s: f64) -> bool {
    t.as_secs_f64() < budget_s
}

fn c1_rule_corpus() -> Outcome {
    let t = Instant::now();
    let cfg = RunConfig::default();
    let rules = cli::cmd_check(&[corpus("rules.mltt"), corpus("idconv.mltt")], &cfg);
    let accepted = rules.goals.iter().filter(|g| g.status == Status::Accepted).count();
    let refl = cli::cmd_check(&[corpus("reflection.mltt")], &cfg);
    let ext = cli::cmd_check(&[corpus("reflection.mltt")], &RunConfig { extensional: true, ..RunConfig::default() });
    let el = t.elapsed();
    let ok = rules.goals.len() >= 20
        && accepted == rules.goals.len()
        && refl.exit_code() == 1
        && ext.exit_code() == 0
        && within(el, 1.0);
    Outcome {
        ok,
        detail: format!(
            "{accepted}/{} accepted; reflection exit {} default, {} extensional; {:.3}s (< 1s)",
            rules.goals.len(),
            refl.exit_code(),
            ext.exit_code(),
            el.as_secs_f64()
        ),
    }
}

fn c2_path_objects() -> Outcome {
    let t = Instant::now();
    let gs = small_groupoids(3, 2);
    let mut failures = 0;
    for (_, g) in &gs {
        let g = Arc::new(g.clone());
        let po = arrow_groupoid(&g);
        let (_, delta) = diagonal(&g);
        if !(classify(&po.r).acyclic_cofibration && classify(&po.p).fibration && po.p.after(&po.r) == delta) {
            failures += 1;
        }
    }
    let el = t.elapsed();
    Outcome {
        ok: failures == 0 && within(el, 60.0),
        detail: format!("{} groupoids, {failures} failures; {:.2}s (< 60s)", gs.len(), el.as_secs_f64()),
    }
}

fn c3_lifting() -> Outcome {
    let t = Instant::now();
    let mut s = Sampler::new(SEED, 4);
    let n = 100;
    let mut solved = 0;
    for _ in 0..n {
        let prob = s.lifting_square(4);
        if let Ok(Some(l)) = solve_lift_with_limit(&prob, DEFAULT_SEARCH_LIMIT) {
            if prob.is_filler(&l) {
                solved += 1;
            }
        }
    }
    let el = t.elapsed();
    Outcome {
        ok: solved == n && within(el, 60.0),
        detail: format!("{solved}/{n} squares filled, both triangles checked; {:.2}s (< 60s)", el.as_secs_f64()),
    }
}

fn c4_factorization() -> Outcome {
    let mut s = Sampler::new(SEED + 1, 3);
    let n = 50;
    let good = (0..n)
        .filter(|_| {
            let f = s.any_functor();
            factorize(&f).is_valid(&f)
        })
        .count();
    Outcome { ok: good == n, detail: format!("{good}/{n} factor exactly as acyclic cofibration then fibration") }
}

fn eq_goals(file: &str) -> (pathcheck::syntax::Signature, Vec<Judgement>) {
    let prog = parse(&std::fs::read_to_string(corpus(file)).unwrap()).unwrap();
    let eqs = prog.goals.into_iter().map(|g| g.judgement).filter(|j| matches!(j, Judgement::TermEq(..))).collect();
    (prog.signature, eqs)
}

fn c5_soundness() -> Outcome {
    let mut total = 0;
    let mut equal = 0;
    let mut underivable = 0;
    let mut gen = GoalGen::new(SEED);
    let generated = gen.equation_corpus(40);
    let mut batches = vec![(gen_signature(), generated)];
    batches.push(eq_goals("rules.mltt"));
    batches.push(eq_goals("idconv.mltt"));
    batches.push(eq_goals("sigma.mltt"));
    for (sig, eqs) in &batches {
        let k = Kernel::new(sig, KernelMode::DEFAULT);
        underivable += eqs.iter().filter(|j| !k.check_judgement(j).accepted).count();
        for preset in ["interval", "z2"] {
            let interp = Interpreter::new(sig, SemEnv::preset(preset, sig).unwrap()).unwrap();
            let r = interp.check_soundness(eqs);
            total += r.items.len();
            equal += r.items.iter().filter(|i| i.equal).count();
        }
    }
    Outcome {
        ok: underivable == 0 && equal == total && total >= 60,
        detail: format!("{equal}/{total} interpreted equal (interval, z2); {underivable} not derivable"),
    }
}

fn c6_countermodel() -> Outcome {
    let r = cli::cmd_demo(DemoName::Countermodel, &RunConfig::default());
    let w = r.goals[0].witness.clone().unwrap_or_default();
    let fiber = w["fiber_objects"].as_u64().unwrap_or(u64::MAX);
    let distinct = w["a_equals_b"] == false;
    Outcome {
        ok: fiber == 1 && distinct && r.exit_code() == 0,
        detail: format!("fibre over (0,1) has {fiber} object (expected exactly 1); ⟦a⟧ ≠ ⟦b⟧: {distinct}"),
    }
}

fn c7_extensional_set() -> Outcome {
    let r = cli::cmd_demo(DemoName::ExtensionalSet, &RunConfig::default());
    let ok = r.goals.len() == 5 && r.goals.iter().all(|g| g.status == Status::Passed);
    Outcome { ok, detail: format!("{}/5 discrete environments pass", r.goals.iter().filter(|g| g.status.ok()).count()) }
}

fn c8_stability() -> Outcome {
    let mut s = Sampler::new(SEED + 2, 3);
    let n = 50;
    let mut found = 0;
    let mut i = 0;
    while i < n {
        let g = s.fibration_bounded(3, MAX_STABILITY_MORPHISMS);
        if g.cod().object_count() > 3 {
            continue;
        }
        let base = g.cod().clone();
        let gamma2 = s.groupoid();
        let Some(sigma) = s.functor(&gamma2, &base) else { continue };
        i += 1;
        if stability_check(&g, &sigma).is_ok_and(|r| r.iso_found) {
            found += 1;
        }
    }
    Outcome { ok: found == n, detail: format!("{found}/{n} isomorphisms σ*(B^I) ≅ (σ*B)^I found (≤3 objects, ≤{MAX_STABILITY_MORPHISMS} morphisms)") }
}

fn c9_coherence() -> Outcome {
    let r = cli::cmd_demo(DemoName::Coherence, &RunConfig::default());
    let found = r.goals.iter().filter(|g| g.status == Status::Passed).count();
    let injected = r.goals.iter().filter(|g| g.name.contains("injected")).count();
    let strict_failures = r
        .goals
        .iter()
        .filter(|g| g.witness.as_ref().is_some_and(|w| w["strict_equal"] == false))
        .count();
    Outcome {
        ok: r.goals.len() >= 20 && found == r.goals.len() && injected > 0,
        detail: format!(
            "{found}/{} probes joined by a vertical homotopy ({injected} with injected filler); {strict_failures} strictly unequal",
            r.goals.len()
        ),
    }
}

fn c10_three_for_two() -> Outcome {
    let mut s = Sampler::new(SEED + 3, 3);
    let n = 200;
    let violations = (0..n)
        .filter(|_| {
            let (f, g) = s.composable_pair();
            !three_for_two(&f, &g).is_ok_and(|t| t.holds)
        })
        .count();
    Outcome { ok: violations == 0, detail: format!("{violations} violations in {n} composable pairs") }
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let code = cli::run(args.iter().copied(), &mut out);
    (code, out)
}

fn c11_determinism() -> Outcome {
    let rules = corpus("rules.mltt");
    let rules = rules.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["pathcheck", "--json", "--seed", "11", "demo", "wfs"],
        vec!["pathcheck", "--json", "demo", "coherence"],
        vec!["pathcheck", "--json", "check", rules],
        vec!["pathcheck", "--json", "interpret", rules],
    ];
    let mut same = 0;
    for args in &runs {
        let a = run_cli(args);
        let b = run_cli(args);
        if a == b && !a.1.is_empty() {
            same += 1;
        }
    }
    let bin = env!("CARGO_BIN_EXE_pathcheck");
    let proc_run = || std::process::Command::new(bin).args(["demo", "wfs", "--json", "--seed", "11"]).output().unwrap();
    let (p, q) = (proc_run(), proc_run());
    let in_process = run_cli(&runs[0]);
    let binary_same = p.stdout == q.stdout && p.stdout == in_process.1 && p.status.code() == Some(in_process.0);
    Outcome {
        ok: same == runs.len() && binary_same,
        detail: format!("{same}/{} reports byte-identical across runs; binary agrees: {binary_same}", runs.len()),
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("rule-instance corpus", c1_rule_corpus),
        ("path objects of small groupoids", c2_path_objects),
        ("lifting axiom", c3_lifting),
        ("factorization axiom", c4_factorization),
        ("soundness of definitional equality", c5_soundness),
        ("reflection countermodel", c6_countermodel),
        ("extensional discrete environments", c7_extensional_set),
        ("substitution stability", c8_stability),
        ("coherence of J", c9_coherence),
        ("three-for-two", c10_three_for_two),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.ok { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
