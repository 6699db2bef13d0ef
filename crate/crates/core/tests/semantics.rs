use std::path::Path;
use std::sync::Arc;
use std::thread;

use pathcheck::gen::{gen_signature, GoalGen, Sampler};
use pathcheck::groupoid::DEFAULT_SEARCH_LIMIT;
use pathcheck::semantics::{
    backend_agreement, extensionality_check_discrete, stability_check, FillerCache, FillerPolicy, Interpreter,
    SemEnv, SemEnvJson, SemError,
};
use pathcheck::syntax::{parse, Judgement, Program};

fn program(name: &str) -> Program {
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)).unwrap();
    parse(&src).unwrap()
}

#[test]
fn corpus_interprets_to_fibrations_and_sections() {
    let mut checked = 0;
    for file in ["rules.mltt", "idconv.mltt", "sigma.mltt", "paths.mltt", "reflection.mltt"] {
        let prog = program(file);
        for preset in ["interval", "z2", "discrete-2"] {
            let Ok(env) = SemEnv::preset(preset, &prog.signature) else {
                assert!(preset.starts_with("discrete"), "{file} has no {preset} environment");
                continue;
            };
            let interp = Interpreter::new(&prog.signature, env).unwrap();
            for g in &prog.goals {
                let ctx = g.judgement.context();
                let sc = interp.interp_context(ctx).unwrap();
                assert!(sc.is_chain_of_fibrations());
                let (ty, term) = match &g.judgement {
                    Judgement::IsType(_, a) | Judgement::TypeEq(_, a, _) => (a, None),
                    Judgement::HasType(_, t, a) | Judgement::TermEq(_, t, _, a) => (a, Some(t)),
                };
                let fib = match interp.interp_type(ctx, ty) {
                    Ok(f) => f,
                    Err(SemError::Unsupported(_)) => continue,
                    Err(e) => panic!("{file} {preset} {}: {e}", g.judgement),
                };
                assert!(fib.is_fibration(), "{file} {preset} {}", g.judgement);
                if let Some(t) = term {
                    assert!(interp.interp_term(ctx, t, ty).unwrap().is_section());
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 60);
}

#[test]
fn pi_is_unsupported() {
    let prog = program("pi.mltt");
    let interp = Interpreter::new(&prog.signature, SemEnv::preset("interval", &prog.signature).unwrap()).unwrap();
    let Judgement::IsType(ctx, ty) = &prog.goals[0].judgement else { panic!() };
    assert!(matches!(interp.interp_type(ctx, ty), Err(SemError::Unsupported(_))));
}

#[test]
fn path_type_total_over_interval() {
    let prog = program("paths.mltt");
    let interp = Interpreter::new(&prog.signature, SemEnv::preset("interval", &prog.signature).unwrap()).unwrap();
    let Judgement::IsType(ctx, ty) = &prog.goals[0].judgement else { panic!() };
    assert_eq!(interp.interp_type(ctx, ty).unwrap().total_groupoid().object_count(), 4);
}

#[test]
fn environment_json_reingests() {
    let sig = gen_signature();
    let eqs = GoalGen::new(4).equation_corpus(30);
    for preset in ["interval", "z2"] {
        let env = SemEnv::preset(preset, &sig).unwrap();
        let text = serde_json::to_string(&env.to_json()).unwrap();
        let back: SemEnvJson = serde_json::from_str(&text).unwrap();
        let env2 = SemEnv::from_json(&back).unwrap();
        assert_eq!(serde_json::to_string(&env2.to_json()).unwrap(), text);
        let a = Interpreter::new(&sig, env).unwrap();
        let b = Interpreter::new(&sig, env2).unwrap();
        for j in &eqs {
            let Judgement::TermEq(ctx, x, _, ty) = j else { continue };
            assert_eq!(a.interp_term(ctx, x, ty).unwrap().value, b.interp_term(ctx, x, ty).unwrap().value);
        }
        assert!(a.check_soundness(&eqs).passed);
    }
}

#[test]
fn discrete_environment_has_no_path_between_distinct_points() {
    assert!(matches!(SemEnv::preset("discrete-3", &gen_signature()), Err(SemError::Env(_))));
}

#[test]
fn malformed_environment_is_rejected() {
    let sig = gen_signature();
    let mut json = SemEnv::preset("interval", &sig).unwrap().to_json();
    json.terms.remove("a");
    let env = SemEnv::from_json(&json).unwrap();
    assert!(Interpreter::new(&sig, env).is_err());
}

#[test]
fn backends_agree_on_discrete_environments() {
    let prog = program("sigma.mltt");
    let idconv = program("idconv.mltt");
    for n in 1..=3 {
        for p in [&prog, &idconv] {
            let goals: Vec<_> = p.goals.iter().map(|g| g.judgement.clone()).collect();
            let items = backend_agreement(&p.signature, &goals, n, DEFAULT_SEARCH_LIMIT).unwrap();
            assert!(items.iter().all(|i| i.isomorphic), "discrete-{n}: {items:?}");
        }
    }
}

#[test]
fn filler_cache_first_writer_wins() {
    let mut s = Sampler::new(5, 3);
    let probs: Vec<_> = (0..12).map(|_| s.lifting_square(3)).collect();
    let cache = Arc::new(FillerCache::new(FillerPolicy::LexLeast));
    let results: Vec<_> = (0..8)
        .map(|_| {
            let cache = Arc::clone(&cache);
            let probs = probs.clone();
            thread::spawn(move || probs.iter().map(|p| cache.get_or_solve(p).unwrap()).collect::<Vec<_>>())
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    for r in &results[1..] {
        assert_eq!(r, &results[0]);
    }
    for (p, l) in probs.iter().zip(&results[0]) {
        assert!(p.is_filler(l));
    }
    assert!(cache.len() <= probs.len() && !cache.is_empty());
}

#[test]
fn filler_policies_give_fillers() {
    let mut s = Sampler::new(6, 3);
    for _ in 0..20 {
        let p = s.lifting_square(3);
        for policy in [FillerPolicy::LexLeast, FillerPolicy::Nth(1), FillerPolicy::Last] {
            let l = FillerCache::new(policy).get_or_solve(&p).unwrap();
            assert!(p.is_filler(&l));
        }
    }
}

#[test]
fn discrete_extensionality_sizes() {
    for n in 1..=8 {
        assert!(extensionality_check_discrete(n).unwrap().passed, "n = {n}");
    }
    assert!(extensionality_check_discrete(0).is_err());
    assert!(extensionality_check_discrete(9).is_err());
}

#[test]
fn stability_on_identity_substitution() {
    let mut s = Sampler::new(12, 3);
    for _ in 0..10 {
        let g = s.fibration_bounded(3, 24);
        let id = pathcheck::groupoid::GFunctor::identity(g.cod());
        let r = stability_check(&g, &id).unwrap();
        assert!(r.iso_found && r.bijective && r.over_base && r.respects_r);
    }
}
