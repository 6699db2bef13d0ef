//! Seeded generators: small groupoids, maps and squares, random goals, and a
//! corpus of derivable equations.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::groupoid::{
    codiscrete, cyclic_group, disjoint_union, klein_group, product, symmetric_group3, terminal, FinGroupoid,
    FunctorSearch, GFunctor,
};
use crate::homotopy::{factorize, LiftingProblem};
use crate::syntax::{parse, Context, Goal, Judgement, Name, Signature, TermExpr, TypeExpr};

/// Vertex groups, with the number of generators each needs.
fn vertex_groups() -> Vec<(&'static str, FinGroupoid, usize)> {
    vec![
        ("1", terminal(), 0),
        ("Z2", cyclic_group(2), 1),
        ("Z3", cyclic_group(3), 1),
        ("Z4", cyclic_group(4), 1),
        ("V4", klein_group(), 2),
        ("S3", symmetric_group3(), 2),
    ]
}

/// Connected groupoid on `k` objects with vertex group `g`.
fn connected(k: usize, g: &FinGroupoid) -> FinGroupoid {
    let p = product(&Arc::new(codiscrete(k)), &Arc::new(g.clone()));
    (*p.groupoid).clone()
}

/// Every groupoid with at most `max_objects` objects presentable by at most
/// `max_generators` non-identity isomorphisms, up to isomorphism, with vertex
/// groups among `1, Z2, Z3, Z4, V4, S3`. A connected component on `k`
/// objects with vertex group `G` costs `k - 1 + rank(G)` generators.
pub fn small_groupoids(max_objects: usize, max_generators: usize) -> Vec<(String, FinGroupoid)> {
    let groups = vertex_groups();
    // components as (size, group index), in non-increasing order
    let mut comps: Vec<(usize, usize)> = Vec::new();
    for k in 1..=max_objects {
        for gi in 0..groups.len() {
            comps.push((k, gi));
        }
    }
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    fn rec(
        comps: &[(usize, usize)],
        groups: &[(&'static str, FinGroupoid, usize)],
        start: usize,
        objects: usize,
        gens: usize,
        max_objects: usize,
        max_generators: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<(String, FinGroupoid)>,
    ) {
        if !stack.is_empty() {
            let mut name = Vec::new();
            let mut g: Option<FinGroupoid> = None;
            for &c in stack.iter() {
                let (k, gi) = comps[c];
                name.push(format!("{}{}", groups[gi].0, if k > 1 { format!("x{k}") } else { String::new() }));
                let part = connected(k, &groups[gi].1);
                g = Some(match g {
                    None => part,
                    Some(acc) => disjoint_union(&acc, &part),
                });
            }
            out.push((name.join("+"), g.unwrap()));
        }
        for c in start..comps.len() {
            let (k, gi) = comps[c];
            let cost = k - 1 + groups[gi].2;
            if objects + k <= max_objects && gens + cost <= max_generators {
                stack.push(c);
                rec(comps, groups, c, objects + k, gens + cost, max_objects, max_generators, stack, out);
                stack.pop();
            }
        }
    }
    rec(&comps, &groups, 0, 0, 0, max_objects, max_generators, &mut stack, &mut out);
    out
}

/// Seeded source of groupoids, functors and lifting squares.
pub struct Sampler {
    pub rng: ChaCha8Rng,
    pool: Vec<Arc<FinGroupoid>>,
    limit: u64,
}

impl Sampler {
    pub fn new(seed: u64, max_objects: usize) -> Sampler {
        let pool = small_groupoids(max_objects, 2).into_iter().map(|(_, g)| Arc::new(g)).collect();
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), pool, limit: 2_000_000 }
    }

    pub fn groupoid(&mut self) -> Arc<FinGroupoid> {
        self.pool.choose(&mut self.rng).unwrap().clone()
    }

    /// A functor `a → b` drawn uniformly, or `None` if there is none.
    pub fn functor(&mut self, a: &Arc<FinGroupoid>, b: &Arc<FinGroupoid>) -> Option<GFunctor> {
        let all = FunctorSearch::new(a, b).limit(self.limit).all().ok()?;
        all.choose(&mut self.rng).cloned()
    }

    /// A functor between two random groupoids.
    pub fn any_functor(&mut self) -> GFunctor {
        loop {
            let (a, b) = (self.groupoid(), self.groupoid());
            if let Some(f) = self.functor(&a, &b) {
                return f;
            }
        }
    }

    /// A fibration whose domain has at most `max_objects` objects: a product
    /// projection or the fibration half of a factorization.
    pub fn fibration(&mut self, max_objects: usize) -> GFunctor {
        self.fibration_bounded(max_objects, usize::MAX)
    }

    /// As [`Sampler::fibration`], with at most `max_morphisms` morphisms in
    /// the domain.
    pub fn fibration_bounded(&mut self, max_objects: usize, max_morphisms: usize) -> GFunctor {
        loop {
            let f = if self.rng.gen_bool(0.5) {
                let (x, y) = (self.groupoid(), self.groupoid());
                let p = product(&x, &y);
                if self.rng.gen_bool(0.5) { p.fst } else { p.snd }
            } else {
                factorize(&self.any_functor()).p
            };
            if f.dom().object_count() <= max_objects && f.dom().morphism_count() <= max_morphisms {
                return f;
            }
        }
    }

    /// An acyclic cofibration whose codomain has at most `max_objects`
    /// objects.
    pub fn acyclic_cofibration(&mut self, max_objects: usize) -> GFunctor {
        loop {
            let f = self.any_functor();
            let i = factorize(&f).i;
            if i.cod().object_count() <= max_objects {
                return i;
            }
        }
    }

    /// A commuting square with left leg an acyclic cofibration and right leg
    /// a fibration, all groupoids with at most `max_objects` objects.
    pub fn lifting_square(&mut self, max_objects: usize) -> LiftingProblem {
        loop {
            let f = self.acyclic_cofibration(max_objects);
            let g = self.fibration(max_objects);
            let Some(k) = self.functor(f.cod(), g.cod()) else { continue };
            let kf = k.after(&f);
            let Ok(hs) = FunctorSearch::new(f.dom(), g.dom()).over(&g, &kf).limit(self.limit).all() else { continue };
            let Some(h) = hs.choose(&mut self.rng).cloned() else { continue };
            if let Ok(p) = LiftingProblem::new(f, g, h, k) {
                return p;
            }
        }
    }

    /// `f : A → B`, `g : B → C`.
    pub fn composable_pair(&mut self) -> (GFunctor, GFunctor) {
        loop {
            let f = self.any_functor();
            let c = self.groupoid();
            if let Some(g) = self.functor(f.cod(), &c) {
                return (f, g);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Goals

/// Signature shared by the goal generators.
pub const GEN_SIGNATURE: &str = "\
assume A : Type
assume a : A
assume b : A
assume p : Id A a b
assume B : (x : A) Type
assume f : (x : A) B x
assume D : (x : A) (y : A) (z : Id A x y) Type
assume d : (x : A) D x x (refl A x)
def c : A := a
def q : Id A a a := refl A a
";

pub fn gen_signature() -> Signature {
    parse(GEN_SIGNATURE).expect("generator signature parses").signature
}

/// Closed terms of type `A`, some of them reducible.
const ATOMS: &[&str] = &[
    "a",
    "b",
    "c",
    "fst (pair a (f a) as Sig (x : A) B x)",
    "app (lam (x : A) x) b",
    "fst (pair b (refl A b) as Sig (x : A) Id A x x)",
    "J A [x y z => A] [x => x] a b p",
];

/// `(body, type)` with free variable `x : A`.
const BODIES: &[(&str, &str)] = &[
    ("x", "A"),
    ("f x", "B x"),
    ("refl A x", "Id A x x"),
    ("d x", "D x x (refl A x)"),
    ("pair x (f x) as Sig (y : A) B y", "Sig (y : A) B y"),
    ("J A [u v w => B u] [u => f u] x x (refl A x)", "B x"),
    ("fst (pair x (refl A x) as Sig (y : A) Id A y y)", "A"),
];

/// `(family, base, result)` where `result` is `family[x/x, x/y, refl/z]`.
const FAMILIES: &[(&str, &str, &str)] = &[
    ("D x y z", "d x", "D x x (refl A x)"),
    ("B x", "f x", "B x"),
    ("B y", "f x", "B x"),
    ("A", "x", "A"),
    ("Id A x y", "refl A x", "Id A x x"),
    ("Id A y x", "refl A x", "Id A x x"),
    ("Sig (s : A) Id A s y", "pair x (refl A x) as Sig (s : A) Id A s x", "Sig (s : A) Id A s x"),
];

fn subst_x(text: &str, s: &str) -> String {
    let mut out = String::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if word == "x" {
            out.push('(');
            out.push_str(s);
            out.push(')');
        } else {
            out.push_str(word);
        }
        word.clear();
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            out.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}

/// Seeded generator of goals over [`GEN_SIGNATURE`].
pub struct GoalGen {
    pub rng: ChaCha8Rng,
    pub sig: Signature,
}

impl GoalGen {
    pub fn new(seed: u64) -> GoalGen {
        GoalGen { rng: ChaCha8Rng::seed_from_u64(seed), sig: gen_signature() }
    }

    fn atom(&mut self) -> String {
        ATOMS.choose(&mut self.rng).unwrap().to_string()
    }

    /// One `eq` line that the kernel derives in default mode.
    pub fn equation_line(&mut self) -> String {
        let s = self.atom();
        match self.rng.gen_range(0..6) {
            0 => {
                let (body, ty) = BODIES.choose(&mut self.rng).unwrap();
                format!("eq app (lam (x : A) {body}) ({s}) = {} : {}", subst_x(body, &s), subst_x(ty, &s))
            }
            1 => format!("eq fst (pair ({s}) (f ({s})) as Sig (x : A) B x) = {s} : A"),
            2 => format!("eq snd (pair ({s}) (f ({s})) as Sig (x : A) B x) = f ({s}) : B ({s})"),
            3 => {
                let (fam, base, res) = FAMILIES.choose(&mut self.rng).unwrap();
                format!(
                    "eq J A [x y z => {fam}] [x => {base}] ({s}) ({s}) (refl A ({s})) = {} : {}",
                    subst_x(base, &s),
                    subst_x(res, &s)
                )
            }
            4 => format!(
                "eq (J A [x y z => D x y z] [x => d x] v v (refl A v))[{s}/v] = d ({s}) : D ({s}) ({s}) (refl A ({s}))"
            ),
            _ => match self.rng.gen_range(0..4) {
                0 => format!("eq {s} = {s} : A"),
                1 => "eq c = a : A".to_string(),
                2 => "eq q = refl A a : Id A a a".to_string(),
                _ => "eq p = p : Id A a b".to_string(),
            },
        }
    }

    /// `n` derivable equations, parsed against [`GEN_SIGNATURE`].
    pub fn equation_corpus(&mut self, n: usize) -> Vec<Judgement> {
        let lines: Vec<String> = (0..n).map(|_| self.equation_line()).collect();
        let src = format!("{GEN_SIGNATURE}{}\n", lines.join("\n"));
        let prog = parse(&src).expect("generated equations parse");
        prog.goals.into_iter().map(|g| g.judgement).collect()
    }

    fn var_name(&mut self) -> Name {
        ["x", "y", "z", "w"].choose(&mut self.rng).unwrap().to_string()
    }

    fn pick_var(&mut self, scope: &[Name]) -> TermExpr {
        if !scope.is_empty() && self.rng.gen_bool(0.7) {
            TermExpr::var(scope.choose(&mut self.rng).unwrap())
        } else {
            TermExpr::var(&self.var_name())
        }
    }

    /// A random term, not necessarily well typed.
    pub fn term(&mut self, scope: &[Name], depth: usize) -> TermExpr {
        if depth == 0 {
            return match self.rng.gen_range(0..4) {
                0 => self.pick_var(scope),
                1 => TermExpr::constant("a", vec![]),
                2 => TermExpr::constant("b", vec![]),
                _ => TermExpr::constant(["p", "c", "q"].choose(&mut self.rng).unwrap(), vec![]),
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..11) {
            0 => self.pick_var(scope),
            1 => {
                let n = self.rng.gen_range(0..3);
                let args = (0..n).map(|_| self.term(scope, d)).collect();
                TermExpr::constant(["f", "d", "a", "p"].choose(&mut self.rng).unwrap(), args)
            }
            2 => {
                let x = self.var_name();
                let ty = self.ty(scope, d);
                let mut inner = scope.to_vec();
                inner.push(x.clone());
                TermExpr::Lam(x, Box::new(ty), Box::new(self.term(&inner, d)))
            }
            3 => TermExpr::App(Box::new(self.term(scope, d)), Box::new(self.term(scope, d))),
            4 => {
                let ann = self.ty(scope, d);
                TermExpr::Pair(Box::new(self.term(scope, d)), Box::new(self.term(scope, d)), Box::new(ann))
            }
            5 => TermExpr::Fst(Box::new(self.term(scope, d))),
            6 => TermExpr::Snd(Box::new(self.term(scope, d))),
            7 => TermExpr::Refl(Box::new(self.ty(scope, d)), Box::new(self.term(scope, d))),
            8 | 9 => {
                let (x, y, z, v) = ("x".to_string(), "y".to_string(), "z".to_string(), "v".to_string());
                let mut fam_scope = scope.to_vec();
                fam_scope.extend([x.clone(), y.clone(), z.clone()]);
                let mut base_scope = scope.to_vec();
                base_scope.push(v.clone());
                let j = crate::syntax::JElim {
                    ty: self.ty(scope, d),
                    x,
                    y,
                    z,
                    family: self.ty(&fam_scope, d),
                    base_var: v,
                    base: self.term(&base_scope, d),
                    left: self.term(scope, d),
                    right: self.term(scope, d),
                    path: self.term(scope, d),
                };
                let t = TermExpr::J(Box::new(j));
                if self.rng.gen_bool(0.3) && !scope.is_empty() {
                    let w = scope.choose(&mut self.rng).unwrap().clone();
                    crate::syntax::substitute_term(&t, &crate::syntax::single(&w, self.term(scope, 0)))
                } else {
                    t
                }
            }
            _ => TermExpr::constant("a", vec![]),
        }
    }

    /// A random type, not necessarily well formed.
    pub fn ty(&mut self, scope: &[Name], depth: usize) -> TypeExpr {
        if depth == 0 {
            return TypeExpr::base("A", vec![]);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..7) {
            0 | 1 => TypeExpr::base("A", vec![]),
            2 => TypeExpr::base("B", vec![self.term(scope, d)]),
            3 => TypeExpr::id(self.ty(scope, d), self.term(scope, d), self.term(scope, d)),
            4 => {
                let x = self.var_name();
                let a = self.ty(scope, d);
                let mut inner = scope.to_vec();
                inner.push(x.clone());
                TypeExpr::Pi(x, Box::new(a), Box::new(self.ty(&inner, d)))
            }
            5 => {
                let x = self.var_name();
                let a = self.ty(scope, d);
                let mut inner = scope.to_vec();
                inner.push(x.clone());
                TypeExpr::Sigma(x, Box::new(a), Box::new(self.ty(&inner, d)))
            }
            _ => TypeExpr::base("D", vec![self.term(scope, d), self.term(scope, d), self.term(scope, d)]),
        }
    }

    /// A random goal over a random (possibly ill-formed) context.
    pub fn goal(&mut self, line: usize, depth: usize) -> Goal {
        let mut ctx = Context::new();
        let mut scope = Vec::new();
        for _ in 0..self.rng.gen_range(0..3) {
            let x = self.var_name();
            let t = self.ty(&scope, 1);
            ctx = ctx.extend(&x, t);
            scope.push(x);
        }
        let judgement = match self.rng.gen_range(0..4) {
            0 => Judgement::IsType(ctx, self.ty(&scope, depth)),
            1 => Judgement::HasType(ctx, self.term(&scope, depth), self.ty(&scope, depth)),
            2 => Judgement::TypeEq(ctx, self.ty(&scope, depth), self.ty(&scope, depth)),
            _ => Judgement::TermEq(ctx, self.term(&scope, depth), self.term(&scope, depth), self.ty(&scope, depth)),
        };
        Goal { line, judgement }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_groupoid_census() {
        let gs = small_groupoids(3, 2);
        assert!(gs.iter().all(|(_, g)| g.check_laws().is_ok() && g.object_count() <= 3));
        assert!(gs.iter().any(|(n, _)| n == "1x2"));
        let names: std::collections::BTreeSet<_> = gs.iter().map(|(n, _)| n.clone()).collect();
        assert_eq!(names.len(), gs.len());
    }

    #[test]
    fn squares_commute() {
        let mut s = Sampler::new(7, 3);
        for _ in 0..5 {
            assert!(s.lifting_square(4).commutes());
        }
    }

    #[test]
    fn substitution_of_x_is_word_based() {
        assert_eq!(subst_x("D x x (refl A x)", "a"), "D (a) (a) (refl A (a))");
        assert_eq!(subst_x("x_1 xx", "a"), "x_1 xx");
    }

    #[test]
    fn equations_are_deterministic() {
        let a: Vec<String> = (0..20).map({
            let mut g = GoalGen::new(3);
            move |_| g.equation_line()
        }).collect();
        let mut g = GoalGen::new(3);
        let b: Vec<String> = (0..20).map(|_| g.equation_line()).collect();
        assert_eq!(a, b);
    }
}
