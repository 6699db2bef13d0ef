use std::path::Path;
use std::time::Instant;

use pathcheck::gen::{gen_signature, GoalGen};
use pathcheck::kernel::{validate_signature, JRule, Kernel, KernelMode};
use pathcheck::syntax::{parse, Context, Judgement, TermExpr, TypeExpr};

fn corpus(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)).unwrap()
}

#[test]
fn fuzz_goals_terminate() {
    let sig = gen_signature();
    let mut g = GoalGen::new(7);
    let goals: Vec<_> = (0..10_000).map(|i| g.goal(i + 1, 4)).collect();
    let t = Instant::now();
    let verdicts = Kernel::new(&sig, KernelMode::DEFAULT).check_program(&goals);
    assert_eq!(verdicts.len(), goals.len());
    assert!(verdicts.iter().all(|v| v.accepted || v.reason.is_some()));
    assert!(t.elapsed().as_secs() < 60);
}

#[test]
fn modes_are_monotone() {
    let sig = gen_signature();
    let mut g = GoalGen::new(8);
    let goals: Vec<_> = (0..3_000).map(|i| g.goal(i + 1, 3)).collect();
    let default = Kernel::new(&sig, KernelMode::DEFAULT).check_program(&goals);
    let ext = Kernel::new(&sig, KernelMode::EXTENSIONAL).check_program(&goals);
    let strict = Kernel::new(&sig, KernelMode::STRICT_J).check_program(&goals);
    let accepted = default.iter().filter(|v| v.accepted).count();
    assert!(accepted > 50, "only {accepted} random goals accepted");
    for (i, d) in default.iter().enumerate() {
        if d.accepted {
            assert!(ext[i].accepted, "extensional rejects {}", goals[i].judgement);
            assert!(strict[i].accepted, "strict J rejects {}", goals[i].judgement);
        }
    }
}

#[test]
fn definitional_equality_is_an_equivalence() {
    let sig = gen_signature();
    let k = Kernel::new(&sig, KernelMode::DEFAULT);
    let eqs = GoalGen::new(9).equation_corpus(120);
    let mut by_type: Vec<(TypeExpr, Vec<TermExpr>)> = Vec::new();
    for j in &eqs {
        let Judgement::TermEq(ctx, x, y, ty) = j else { panic!("not an equation") };
        assert!(k.def_equal(ctx, x, x, ty));
        assert!(k.def_equal(ctx, x, y, ty));
        assert!(k.def_equal(ctx, y, x, ty), "not symmetric: {j}");
        match by_type.iter_mut().find(|(t, _)| k.def_equal_types(ctx, t, ty)) {
            Some((_, ts)) => ts.extend([x.clone(), y.clone()]),
            None => by_type.push((ty.clone(), vec![x.clone(), y.clone()])),
        }
    }
    let ctx = Context::new();
    for (ty, ts) in &by_type {
        for a in ts {
            for b in ts {
                if !k.def_equal(&ctx, a, b, ty) {
                    continue;
                }
                for c in ts {
                    if k.def_equal(&ctx, b, c, ty) {
                        assert!(k.def_equal(&ctx, a, c, ty), "not transitive: {a} {b} {c}");
                    }
                }
            }
        }
    }
}

#[test]
fn j_rule_forms_agree() {
    let sig = gen_signature();
    let mut g = GoalGen::new(10);
    let goals: Vec<_> = (0..3_000).map(|i| g.goal(i + 1, 3)).collect();
    let param = Kernel::new(&sig, KernelMode::DEFAULT).check_program(&goals);
    let closed = Kernel::new(&sig, KernelMode::DEFAULT).with_j_rule(JRule::Closed).check_program(&goals);
    assert!(param.iter().filter(|v| v.accepted).count() > 50);
    for (i, (p, c)) in param.iter().zip(&closed).enumerate() {
        assert_eq!(p.accepted, c.accepted, "J rules disagree on {}", goals[i].judgement);
    }
    let rules = parse(&corpus("rules.mltt")).unwrap();
    let closed = Kernel::new(&rules.signature, KernelMode::DEFAULT).with_j_rule(JRule::Closed);
    assert!(closed.check_program(&rules.goals).iter().all(|v| v.accepted));
}

#[test]
fn corpus_verdicts() {
    for (file, mode, expect) in [
        ("rules.mltt", KernelMode::DEFAULT, true),
        ("idconv.mltt", KernelMode::DEFAULT, true),
        ("sigma.mltt", KernelMode::DEFAULT, true),
        ("reflection.mltt", KernelMode::DEFAULT, false),
        ("reflection.mltt", KernelMode::EXTENSIONAL, true),
    ] {
        let prog = parse(&corpus(file)).unwrap();
        assert!(validate_signature(&prog.signature).accepted);
        let vs = Kernel::new(&prog.signature, mode).check_program(&prog.goals);
        assert_eq!(vs.iter().all(|v| v.accepted), expect, "{file}");
    }
}

#[test]
fn accepted_goals_carry_traces() {
    let prog = parse(&corpus("rules.mltt")).unwrap();
    for v in Kernel::new(&prog.signature, KernelMode::DEFAULT).check_program(&prog.goals) {
        assert!(!v.trace.is_empty());
        assert!(v.reason.is_none());
    }
}

#[test]
fn ill_formed_signature_is_reported() {
    let prog = parse("assume A : Type\nassume a : A\ndef b : A := refl A a\n");
    if let Ok(p) = prog {
        assert!(!validate_signature(&p.signature).accepted);
    }
}
