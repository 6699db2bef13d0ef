//! Weak factorization machinery over finite groupoids: lifting problems,
//! the left lifting property, mapping-path-space factorizations,
//! three-for-two and desk-scale checks of the factorization-system axioms.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groupoid::{
    self, classify, natural_isos, ArrowGroupoid, FinGroupoid, FunctorSearch, GFunctor, GroupoidError, MapClass,
    NatIso, PairGroupoid, DEFAULT_SEARCH_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomotopyError {
    #[error("lifting square does not commute")]
    NotCommuting,
    #[error("maps are not composable or not parallel: {0}")]
    Shape(String),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
}

/// A commutative square
///
/// ```text
///   A --h--> C
///   |        |
///   f        g
///   v        v
///   B --k--> D
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LiftingProblem {
    pub f: GFunctor,
    pub g: GFunctor,
    pub h: GFunctor,
    pub k: GFunctor,
}

impl LiftingProblem {
    pub fn new(f: GFunctor, g: GFunctor, h: GFunctor, k: GFunctor) -> Result<LiftingProblem, HomotopyError> {
        let prob = LiftingProblem { f, g, h, k };
        prob.check_shape()?;
        if !prob.commutes() {
            return Err(HomotopyError::NotCommuting);
        }
        Ok(prob)
    }

    fn check_shape(&self) -> Result<(), HomotopyError> {
        let same = |a: &Arc<FinGroupoid>, b: &Arc<FinGroupoid>, what: &str| {
            if **a == **b {
                Ok(())
            } else {
                Err(HomotopyError::Shape(what.to_string()))
            }
        };
        same(self.f.dom(), self.h.dom(), "dom f ≠ dom h")?;
        same(self.f.cod(), self.k.dom(), "cod f ≠ dom k")?;
        same(self.h.cod(), self.g.dom(), "cod h ≠ dom g")?;
        same(self.g.cod(), self.k.cod(), "cod g ≠ cod k")
    }

    pub fn commutes(&self) -> bool {
        self.g.after(&self.h) == self.k.after(&self.f)
    }

    /// Both triangles: `l ∘ f = h` and `g ∘ l = k`.
    pub fn is_filler(&self, l: &GFunctor) -> bool {
        l.check().is_ok() && l.after(&self.f) == self.h && self.g.after(l) == self.k
    }

    fn search(&self, limit: u64) -> FunctorSearch {
        FunctorSearch::new(self.f.cod(), self.h.cod())
            .through(&self.f, &self.h)
            .over(&self.g, &self.k)
            .limit(limit)
    }

    pub fn to_json(&self) -> LiftingProblemJson {
        LiftingProblemJson {
            f: TypedFunctorJson::from_functor(&self.f),
            g: TypedFunctorJson::from_functor(&self.g),
            h: TypedFunctorJson::from_functor(&self.h),
            k: TypedFunctorJson::from_functor(&self.k),
        }
    }
}

/// A functor together with its domain and codomain tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedFunctorJson {
    pub dom: groupoid::GroupoidJson,
    pub cod: groupoid::GroupoidJson,
    pub obj: Vec<usize>,
    pub mor: Vec<usize>,
}

impl TypedFunctorJson {
    pub fn from_functor(f: &GFunctor) -> TypedFunctorJson {
        TypedFunctorJson {
            dom: f.dom().to_json(),
            cod: f.cod().to_json(),
            obj: f.obj_map().to_vec(),
            mor: f.mor_map().to_vec(),
        }
    }

    pub fn to_functor(&self) -> Result<GFunctor, GroupoidError> {
        let dom = Arc::new(self.dom.validate()?);
        let cod = Arc::new(self.cod.validate()?);
        GFunctor::new(dom, cod, self.obj.clone(), self.mor.clone())
    }
}

/// Wire form of a lifting problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftingProblemJson {
    pub f: TypedFunctorJson,
    pub g: TypedFunctorJson,
    pub h: TypedFunctorJson,
    pub k: TypedFunctorJson,
}

impl LiftingProblemJson {
    /// Rebuilds the square, sharing groupoids that are structurally equal.
    pub fn to_problem(&self) -> Result<LiftingProblem, HomotopyError> {
        let mut pool: Vec<Arc<FinGroupoid>> = Vec::new();
        let mut intern = |j: &groupoid::GroupoidJson| -> Result<Arc<FinGroupoid>, GroupoidError> {
            let g = j.validate()?;
            if let Some(p) = pool.iter().find(|p| ***p == g) {
                return Ok(p.clone());
            }
            let g = Arc::new(g);
            pool.push(g.clone());
            Ok(g)
        };
        let mut mk = |t: &TypedFunctorJson| -> Result<GFunctor, GroupoidError> {
            let dom = intern(&t.dom)?;
            let cod = intern(&t.cod)?;
            GFunctor::new(dom, cod, t.obj.clone(), t.mor.clone())
        };
        let f = mk(&self.f)?;
        let g = mk(&self.g)?;
        let h = mk(&self.h)?;
        let k = mk(&self.k)?;
        LiftingProblem::new(f, g, h, k)
    }
}

/// Lexicographically first diagonal filler, with both triangles re-checked.
pub fn solve_lift(prob: &LiftingProblem) -> Result<Option<GFunctor>, HomotopyError> {
    solve_lift_with_limit(prob, DEFAULT_SEARCH_LIMIT)
}

pub fn solve_lift_with_limit(prob: &LiftingProblem, limit: u64) -> Result<Option<GFunctor>, HomotopyError> {
    if !prob.commutes() {
        return Err(HomotopyError::NotCommuting);
    }
    let found = prob.search(limit).first()?;
    if let Some(l) = &found {
        assert!(prob.is_filler(l), "filler search returned a map violating a triangle");
    }
    Ok(found)
}

/// The `n`-th filler in lexicographic order (0-based), or the last one when
/// there are fewer.
pub fn nth_filler(prob: &LiftingProblem, n: usize, limit: u64) -> Result<Option<GFunctor>, HomotopyError> {
    if !prob.commutes() {
        return Err(HomotopyError::NotCommuting);
    }
    let mut seen = 0;
    let mut found = None;
    prob.search(limit).for_each(|l| {
        found = Some(l);
        seen += 1;
        seen <= n
    })?;
    if let Some(l) = &found {
        assert!(prob.is_filler(l), "filler search returned a map violating a triangle");
    }
    Ok(found)
}

/// Every filler in lexicographic order.
pub fn all_fillers(prob: &LiftingProblem, limit: u64) -> Result<Vec<GFunctor>, HomotopyError> {
    if !prob.commutes() {
        return Err(HomotopyError::NotCommuting);
    }
    Ok(prob.search(limit).all()?)
}

/// `f ⋔ g`: every commuting square from `f` to `g` has a filler.
pub fn has_llp(f: &GFunctor, g: &GFunctor) -> Result<bool, HomotopyError> {
    has_llp_with_limit(f, g, DEFAULT_SEARCH_LIMIT)
}

pub fn has_llp_with_limit(f: &GFunctor, g: &GFunctor, limit: u64) -> Result<bool, HomotopyError> {
    Ok(llp_counterexample(f, g, limit)?.is_none())
}

/// A commuting square from `f` to `g` without a filler, if one exists.
pub fn llp_counterexample(f: &GFunctor, g: &GFunctor, limit: u64) -> Result<Option<LiftingProblem>, HomotopyError> {
    let tops = FunctorSearch::new(f.dom(), g.dom()).limit(limit).all()?;
    let mut counter = None;
    for h in tops {
        let gh = g.after(&h);
        let mut err = None;
        FunctorSearch::new(f.cod(), g.cod()).through(f, &gh).limit(limit).for_each(|k| {
            let prob = LiftingProblem { f: f.clone(), g: g.clone(), h: h.clone(), k };
            match prob.search(limit).first() {
                Ok(Some(_)) => true,
                Ok(None) => {
                    counter = Some(prob);
                    false
                }
                Err(e) => {
                    err = Some(e);
                    false
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e.into());
        }
        if counter.is_some() {
            break;
        }
    }
    Ok(counter)
}

/// Mapping-path-space factorization `A --i--> C --p--> B` of `f`.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub middle: Arc<FinGroupoid>,
    pub i: GFunctor,
    pub p: GFunctor,
    /// Objects of the middle groupoid as pairs `(a, β)` with `src β = f(a)`.
    pub pairs: PairGroupoid,
}

/// Objects of `C` are `(a, β)` with `β : f(a) → b`; a morphism
/// `(a, β) → (a', β')` is a pair `(α, γ)` with `γ∘β = β'∘f(α)`.
pub fn factorize(f: &GFunctor) -> Factorization {
    let a = f.dom();
    let b = f.cod();
    let arrows = ArrowGroupoid::new(b);
    let bi = &arrows.groupoid;
    let pairs = PairGroupoid::build(
        a,
        bi,
        |x, beta| b.src(beta) == f.obj(x),
        |alpha, m| arrows.phi(m) == f.mor(alpha),
    );
    let middle = pairs.groupoid.clone();
    let i = GFunctor::new_unchecked(
        a.clone(),
        middle.clone(),
        (0..a.object_count())
            .map(|x| pairs.obj_index(x, b.id(f.obj(x))).expect("(a, id) is an object"))
            .collect(),
        (0..a.morphism_count())
            .map(|alpha| {
                let (s, t) = (a.src(alpha), a.dst(alpha));
                let m = arrows
                    .mor(b.id(f.obj(s)), b.id(f.obj(t)), f.mor(alpha))
                    .expect("constant square");
                pairs.mor_index(alpha, m).expect("(α, f α) is a morphism")
            })
            .collect(),
    );
    let p = GFunctor::new_unchecked(
        middle.clone(),
        b.clone(),
        (0..middle.object_count()).map(|o| b.dst(pairs.obj_pair(o).1)).collect(),
        (0..middle.morphism_count()).map(|k| arrows.psi(pairs.mor_pair(k).1)).collect(),
    );
    Factorization { middle, i, p, pairs }
}

impl Factorization {
    pub fn recomposes_to(&self, f: &GFunctor) -> bool {
        self.p.after(&self.i) == *f
    }

    pub fn is_valid(&self, f: &GFunctor) -> bool {
        self.recomposes_to(f) && classify(&self.i).acyclic_cofibration && classify(&self.p).fibration
    }
}

/// Equivalence flags for `f`, `g` and `g∘f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreeForTwo {
    pub f: bool,
    pub g: bool,
    pub composite: bool,
    pub holds: bool,
}

pub fn three_for_two(f: &GFunctor, g: &GFunctor) -> Result<ThreeForTwo, HomotopyError> {
    if **f.cod() != **g.dom() {
        return Err(HomotopyError::Shape("g ∘ f is not defined".into()));
    }
    let ef = groupoid::is_equivalence(f);
    let eg = groupoid::is_equivalence(g);
    let egf = groupoid::is_equivalence(&g.after(f));
    let count = [ef, eg, egf].iter().filter(|&&b| b).count();
    Ok(ThreeForTwo { f: ef, g: eg, composite: egf, holds: count != 2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfsCheck {
    pub kind: String,
    pub left: usize,
    pub right: Option<usize>,
    pub passed: bool,
}

/// Outcome of checking both factorization systems on a finite universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfsReport {
    pub maps: usize,
    pub classes: Vec<MapClass>,
    pub factorizations_checked: usize,
    pub lifting_checks: usize,
    pub failures: Vec<WfsCheck>,
}

impl WfsReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks, on `universe`, that every map factors as an acyclic cofibration
/// followed by a fibration, that acyclic cofibrations lift against
/// fibrations, and that cofibrations lift against acyclic fibrations.
pub fn verify_wfs(universe: &[GFunctor], limit: u64) -> Result<WfsReport, HomotopyError> {
    let classes: Vec<MapClass> = universe.iter().map(classify).collect();
    let mut failures = Vec::new();
    let mut lifting_checks = 0;
    for (n, f) in universe.iter().enumerate() {
        if !factorize(f).is_valid(f) {
            failures.push(WfsCheck { kind: "factorization".into(), left: n, right: None, passed: false });
        }
    }
    for (i, ci) in classes.iter().enumerate() {
        for (j, cj) in classes.iter().enumerate() {
            let pairs = [
                ("acyclic-cofibration/fibration", ci.acyclic_cofibration && cj.fibration),
                ("cofibration/acyclic-fibration", ci.cofibration && cj.acyclic_fibration),
            ];
            for (kind, relevant) in pairs {
                if relevant {
                    lifting_checks += 1;
                    if !has_llp_with_limit(&universe[i], &universe[j], limit)? {
                        failures.push(WfsCheck { kind: kind.into(), left: i, right: Some(j), passed: false });
                    }
                }
            }
        }
    }
    Ok(WfsReport { maps: universe.len(), classes, factorizations_checked: universe.len(), lifting_checks, failures })
}

/// A right homotopy `f ~ g`, presented as a natural isomorphism. When
/// `relative_to` is a fibration `q`, components must be `q`-vertical.
pub fn right_homotopy(f: &GFunctor, g: &GFunctor, relative_to: Option<&GFunctor>) -> Result<Option<NatIso>, HomotopyError> {
    if **f.dom() != **g.dom() || **f.cod() != **g.cod() {
        return Err(HomotopyError::Shape("maps are not parallel".into()));
    }
    let found = match relative_to {
        Some(q) => {
            if q.after(f) != q.after(g) {
                return Err(HomotopyError::Shape("maps lie over different base maps".into()));
            }
            let base = q.cod().clone();
            let q = q.clone();
            natural_isos(f, g, &move |c| base.is_identity(q.mor(c)), Some(1))
        }
        None => natural_isos(f, g, &|_| true, Some(1)),
    };
    Ok(found.into_iter().next())
}
