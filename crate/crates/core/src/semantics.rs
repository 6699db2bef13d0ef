//! Interpretation of the type theory in finite groupoids.
//!
//! A context is a chain of fibrations ending in the terminal groupoid. A type
//! over `Γ` is a fibration `E → ⟦Γ⟧` whose total `E` is a subgroupoid of
//! `⟦Γ⟧ × F`, where the fibre groupoid `F` depends only on the shape of the
//! type: a family's total for `B(…)`, the arrow groupoid of `F_A` for
//! `Id A a b`, and `F_A × F_B` for `Σ`. A term `t : A` is a functor
//! `t̂ : ⟦Γ⟧ → F_A` whose graph `⟨id, t̂⟩` is a section of `⟦A⟧`.
//!
//! `J` is the diagonal filler of
//!
//! ```text
//!   Γ.A ───⟨r, d̂⟩──> ⟦D⟧
//!    │ r               │
//!    v                 v
//!   Γ.A.A.Id ════════ Γ.A.A.Id
//! ```
//!
//! chosen through a [`FillerCache`].

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groupoid::{
    arrow_groupoid, classify, cyclic_group, diagonal, discrete, find_iso, interval, product, pullback,
    relative_path_object, terminal, ArrowGroupoid, FinGroupoid, FunctorJson, FunctorSearch, GFunctor, GroupoidError,
    PairGroupoid, Product, DEFAULT_SEARCH_LIMIT,
};
use crate::homotopy::{nth_filler, right_homotopy, solve_lift_with_limit, HomotopyError, LiftingProblem, TypedFunctorJson};
use crate::kernel::{Kernel, KernelMode};
use crate::syntax::{
    parse, substitute_term_eager, Context, Decl, JElim, Judgement, Name, Signature, TermExpr, TypeExpr,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Groupoid,
    Discrete,
}

#[derive(Debug, Error)]
pub enum SemError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("environment: {0}")]
    Env(String),
    #[error("kernel: {0}")]
    Kernel(String),
    #[error("size guard: {0}")]
    SizeGuard(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
}

pub type SResult<T> = Result<T, SemError>;

/// Upper bound on `|mor ⟦Γ⟧| · |mor F|` when building a total.
pub const MAX_CELLS: usize = 4_000_000;

fn invariant<T>(msg: impl Into<String>) -> SResult<T> {
    Err(SemError::Invariant(msg.into()))
}

// ---------------------------------------------------------------------------
// Environments

/// Interpretation of the signature: a fibration per type family (over the
/// interpreted telescope) and a section per assumed term constant.
#[derive(Clone, Debug)]
pub struct SemEnv {
    pub backend: Backend,
    pub types: BTreeMap<Name, GFunctor>,
    /// Sections `⟦Δ⟧ → ⟦A⟧` as object/morphism maps into the interpreted total.
    pub terms: BTreeMap<Name, FunctorJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemEnvJson {
    pub backend: Backend,
    #[serde(default)]
    pub types: BTreeMap<Name, TypedFunctorJson>,
    #[serde(default)]
    pub terms: BTreeMap<Name, FunctorJson>,
}

impl SemEnv {
    pub fn from_json(json: &SemEnvJson) -> SResult<SemEnv> {
        let mut types = BTreeMap::new();
        for (k, v) in &json.types {
            types.insert(k.clone(), v.to_functor()?);
        }
        Ok(SemEnv { backend: json.backend, types, terms: json.terms.clone() })
    }

    pub fn to_json(&self) -> SemEnvJson {
        SemEnvJson {
            backend: self.backend,
            types: self.types.iter().map(|(k, v)| (k.clone(), TypedFunctorJson::from_functor(v))).collect(),
            terms: self.terms.clone(),
        }
    }

    /// Built-in environments: `interval`, `z2` and `discrete-N`. Closed type
    /// constants become the preset groupoid `K`, families over `Δ` the
    /// constant family `⟦Δ⟧ × K → ⟦Δ⟧`, and the `k`-th assumed term
    /// constant the `k`-th section (cyclically) in lexicographic order.
    pub fn preset(name: &str, sig: &Signature) -> SResult<SemEnv> {
        let backend = if name.starts_with("discrete-") { Backend::Discrete } else { Backend::Groupoid };
        SemEnv::preset_with_backend(name, sig, backend)
    }

    pub fn preset_with_backend(name: &str, sig: &Signature, backend: Backend) -> SResult<SemEnv> {
        let k = Arc::new(preset_groupoid(name)?);
        let env = SemEnv { backend, types: BTreeMap::new(), terms: BTreeMap::new() };
        let mut interp = Interpreter::unchecked(sig, env);
        let mut counter = 0usize;
        for d in &sig.decls {
            match d {
                Decl::TypeFamily { name, tele } => {
                    let tctx = interp.interp_context(tele)?;
                    let prod = product(&tctx.total(), &k);
                    interp.env.types.insert(name.clone(), prod.fst.clone());
                }
                Decl::TermConst { def: Some(_), .. } => {}
                Decl::TermConst { name, tele, ty, def: None } => {
                    let tctx = interp.interp_context(tele)?;
                    let tsem = interp.ty(&tctx, ty)?;
                    let base = tctx.total();
                    let sections = FunctorSearch::new(&base, &tsem.total.groupoid)
                        .over(&tsem.total.left, &GFunctor::identity(&base))
                        .limit(interp.limit)
                        .all()?;
                    if sections.is_empty() {
                        return Err(SemError::Env(format!("'{name}' has no section in the chosen environment")));
                    }
                    let s = &sections[counter % sections.len()];
                    counter += 1;
                    interp.env.terms.insert(name.clone(), s.to_json());
                }
            }
        }
        Ok(interp.env)
    }
}

/// The groupoid behind a preset name.
pub fn preset_groupoid(name: &str) -> SResult<FinGroupoid> {
    match name {
        "interval" => Ok(interval()),
        "z2" => Ok(cyclic_group(2)),
        _ => match name.strip_prefix("discrete-").and_then(|n| n.parse::<usize>().ok()) {
            Some(n) if n >= 1 => Ok(discrete(n)),
            _ => Err(SemError::Env(format!("unknown preset '{name}' (expected interval, z2 or discrete-N)"))),
        },
    }
}

// ---------------------------------------------------------------------------
// Filler cache

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FillerPolicy {
    /// The lexicographically least filler.
    LexLeast,
    /// The `n`-th filler in lexicographic order (or the last, if fewer).
    Nth(usize),
    /// The lexicographically greatest filler.
    Last,
}

/// Chosen fillers per lifting problem. Concurrent callers agree on the first
/// filler stored for a problem.
#[derive(Debug)]
pub struct FillerCache {
    map: Mutex<HashMap<LiftingProblem, GFunctor>>,
    pub policy: FillerPolicy,
    pub limit: u64,
}

impl Default for FillerCache {
    fn default() -> Self {
        FillerCache::new(FillerPolicy::LexLeast)
    }
}

impl FillerCache {
    pub fn new(policy: FillerPolicy) -> FillerCache {
        FillerCache { map: Mutex::new(HashMap::new()), policy, limit: DEFAULT_SEARCH_LIMIT }
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_solve(&self, prob: &LiftingProblem) -> SResult<GFunctor> {
        if let Some(l) = self.map.lock().unwrap().get(prob) {
            return Ok(l.clone());
        }
        let found = match self.policy {
            FillerPolicy::LexLeast => solve_lift_with_limit(prob, self.limit)?,
            FillerPolicy::Nth(n) => nth_filler(prob, n, self.limit)?,
            FillerPolicy::Last => nth_filler(prob, usize::MAX, self.limit)?,
        };
        let Some(l) = found else {
            return invariant("no diagonal filler for a J square");
        };
        let mut map = self.map.lock().unwrap();
        Ok(map.entry(prob.clone()).or_insert(l).clone())
    }
}

// ---------------------------------------------------------------------------
// Semantic objects

#[derive(Clone, Debug)]
enum FiberKind {
    Base,
    Path(Arc<ArrowGroupoid>, Arc<Fiber>),
    Flat,
    Sigma(Arc<Product>, Arc<Fiber>),
}

/// Fibre groupoid of a type shape.
#[derive(Clone, Debug)]
pub struct Fiber {
    pub groupoid: Arc<FinGroupoid>,
    kind: FiberKind,
}

/// A type over a context: the projection `total.left : E → ⟦Γ⟧`.
#[derive(Clone, Debug)]
pub struct SemFibration {
    pub fiber: Arc<Fiber>,
    pub total: Arc<PairGroupoid>,
    pub base: Arc<FinGroupoid>,
}

impl SemFibration {
    pub fn projection(&self) -> &GFunctor {
        &self.total.left
    }

    pub fn total_groupoid(&self) -> &Arc<FinGroupoid> {
        &self.total.groupoid
    }

    pub fn is_fibration(&self) -> bool {
        classify(self.projection()).fibration
    }

    /// `⟨id, value⟩ : ⟦Γ⟧ → E`, when it lands in the total.
    pub fn section_of(&self, value: &GFunctor) -> Option<GFunctor> {
        self.total.pair(&GFunctor::identity(&self.base), value)
    }
}

#[derive(Clone, Debug)]
pub struct SemEntry {
    pub name: Name,
    pub ty: TypeExpr,
    pub sem: SemFibration,
}

/// A chain of fibrations `⟦Γ⟧ → … → 1`.
#[derive(Clone, Debug)]
pub struct SemContext {
    pub entries: Vec<SemEntry>,
    pub terminal: Arc<FinGroupoid>,
}

impl SemContext {
    pub fn empty() -> SemContext {
        SemContext { entries: Vec::new(), terminal: Arc::new(terminal()) }
    }

    pub fn total(&self) -> Arc<FinGroupoid> {
        match self.entries.last() {
            Some(e) => e.sem.total.groupoid.clone(),
            None => self.terminal.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn syntax(&self) -> Context {
        Context { entries: self.entries.iter().map(|e| (e.name.clone(), e.ty.clone())).collect() }
    }

    fn with(&self, name: &str, ty: &TypeExpr, sem: SemFibration) -> SemContext {
        let mut c = self.clone();
        c.entries.push(SemEntry { name: name.to_string(), ty: ty.clone(), sem });
        c
    }

    fn last_total(&self) -> &PairGroupoid {
        &self.entries.last().expect("non-empty context").sem.total
    }

    /// Each link of the chain is a fibration.
    pub fn is_chain_of_fibrations(&self) -> bool {
        self.entries.iter().all(|e| e.sem.is_fibration())
    }
}

/// A term: `value : ⟦Γ⟧ → F` and its graph `section : ⟦Γ⟧ → E`.
#[derive(Clone, Debug)]
pub struct SemSection {
    pub fibration: SemFibration,
    pub value: GFunctor,
    pub section: GFunctor,
}

impl SemSection {
    pub fn is_section(&self) -> bool {
        self.fibration.projection().after(&self.section).is_identity()
    }
}

fn shape(ty: &TypeExpr) -> SResult<String> {
    Ok(match ty {
        TypeExpr::Base(f, _) => f.clone(),
        TypeExpr::Id(a, _, _) => format!("Id({})", shape(a)?),
        TypeExpr::Sigma(_, a, b) => format!("Sig({},{})", shape(a)?, shape(b)?),
        TypeExpr::Pi(..) => return Err(SemError::Unsupported("Π types have no interpretation in this backend".into())),
    })
}

// ---------------------------------------------------------------------------
// Interpreter

pub struct Interpreter<'a> {
    pub sig: &'a Signature,
    pub env: SemEnv,
    pub cache: Arc<FillerCache>,
    pub limit: u64,
    fibers: RefCell<HashMap<String, Arc<Fiber>>>,
    teles: RefCell<HashMap<Name, SemContext>>,
    consts: RefCell<HashMap<Name, GFunctor>>,
}

impl<'a> Interpreter<'a> {
    /// An interpreter over a validated environment.
    pub fn new(sig: &'a Signature, env: SemEnv) -> SResult<Interpreter<'a>> {
        let interp = Interpreter::unchecked(sig, env);
        interp.check_env()?;
        Ok(interp)
    }

    fn unchecked(sig: &'a Signature, env: SemEnv) -> Interpreter<'a> {
        Interpreter {
            sig,
            env,
            cache: Arc::new(FillerCache::default()),
            limit: DEFAULT_SEARCH_LIMIT,
            fibers: RefCell::new(HashMap::new()),
            teles: RefCell::new(HashMap::new()),
            consts: RefCell::new(HashMap::new()),
        }
    }

    pub fn with_cache(mut self, cache: Arc<FillerCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_limit(mut self, limit: u64) -> Self {
        self.limit = limit;
        self
    }

    /// A fresh interpreter over the same environment with its own filler
    /// cache.
    pub fn independent(&self, policy: FillerPolicy) -> Interpreter<'a> {
        let mut cache = FillerCache::new(policy);
        cache.limit = self.cache.limit;
        Interpreter::unchecked(self.sig, self.env.clone()).with_cache(Arc::new(cache)).with_limit(self.limit)
    }

    fn check_env(&self) -> SResult<()> {
        for d in &self.sig.decls {
            match d {
                Decl::TypeFamily { name, .. } => {
                    self.family(name)?;
                }
                Decl::TermConst { def: Some(_), .. } => {}
                Decl::TermConst { name, .. } => {
                    self.const_value(name)?;
                }
            }
        }
        Ok(())
    }

    fn family(&self, name: &str) -> SResult<GFunctor> {
        let Some(Decl::TypeFamily { tele, .. }) = self.sig.lookup(name) else {
            return Err(SemError::Env(format!("'{name}' is not a type family")));
        };
        let f = self.env.types.get(name).ok_or_else(|| SemError::Env(format!("no fibration given for '{name}'")))?;
        let tctx = self.tele_context(name, tele)?;
        if **f.cod() != *tctx.total() {
            return Err(SemError::Env(format!("fibration for '{name}' is not over its interpreted telescope")));
        }
        if !classify(f).fibration {
            return Err(SemError::Env(format!("map given for '{name}' is not a fibration")));
        }
        if self.env.backend == Backend::Discrete && !f.dom().is_discrete() {
            return Err(SemError::Env(format!("'{name}' is not discrete, as the discrete backend requires")));
        }
        Ok(f.clone())
    }

    fn tele_context(&self, head: &str, tele: &Context) -> SResult<SemContext> {
        if let Some(c) = self.teles.borrow().get(head) {
            return Ok(c.clone());
        }
        let c = self.interp_context(tele)?;
        self.teles.borrow_mut().insert(head.to_string(), c.clone());
        Ok(c)
    }

    /// `⟦c⟧ : ⟦Δ⟧ → F` for an assumed term constant `c` over telescope `Δ`.
    fn const_value(&self, name: &str) -> SResult<GFunctor> {
        if let Some(v) = self.consts.borrow().get(name) {
            return Ok(v.clone());
        }
        let Some(Decl::TermConst { tele, ty, .. }) = self.sig.lookup(name) else {
            return Err(SemError::Env(format!("'{name}' is not a term constant")));
        };
        let tctx = self.tele_context(name, tele)?;
        let tsem = self.ty(&tctx, ty)?;
        let json = self.env.terms.get(name).ok_or_else(|| SemError::Env(format!("no section given for '{name}'")))?;
        let s = GFunctor::from_json(tctx.total(), tsem.total.groupoid.clone(), json)
            .map_err(|e| SemError::Env(format!("section for '{name}': {e}")))?;
        if !tsem.total.left.after(&s).is_identity() {
            return Err(SemError::Env(format!("map given for '{name}' is not a section")));
        }
        let v = tsem.total.right.after(&s);
        self.consts.borrow_mut().insert(name.to_string(), v.clone());
        Ok(v)
    }

    pub fn interp_context(&self, ctx: &Context) -> SResult<SemContext> {
        let mut c = SemContext::empty();
        for (x, t) in &ctx.entries {
            c = self.extend(&c, x, t)?;
        }
        Ok(c)
    }

    /// Interprets `ty` over `ctx`, checking that the result is a fibration.
    pub fn interp_type(&self, ctx: &Context, ty: &TypeExpr) -> SResult<SemFibration> {
        let c = self.interp_context(ctx)?;
        let sem = self.ty(&c, ty)?;
        if !sem.is_fibration() {
            return invariant(format!("⟦{ty}⟧ is not a fibration"));
        }
        Ok(sem)
    }

    /// Interprets `t : ty` over `ctx`, checking the section property.
    pub fn interp_term(&self, ctx: &Context, t: &TermExpr, ty: &TypeExpr) -> SResult<SemSection> {
        let c = self.interp_context(ctx)?;
        self.section_in(&c, t, ty)
    }

    fn section_in(&self, c: &SemContext, t: &TermExpr, ty: &TypeExpr) -> SResult<SemSection> {
        let fibration = self.ty(c, ty)?;
        let value = self.term(c, t)?;
        let Some(section) = fibration.section_of(&value) else {
            return invariant(format!("⟦{t}⟧ does not land in ⟦{ty}⟧"));
        };
        let s = SemSection { fibration, value, section };
        if !s.is_section() {
            return invariant(format!("⟦{t}⟧ is not a section"));
        }
        Ok(s)
    }

    fn extend(&self, ctx: &SemContext, x: &str, ty: &TypeExpr) -> SResult<SemContext> {
        let sem = self.ty(ctx, ty)?;
        Ok(ctx.with(x, ty, sem))
    }

    fn fiber(&self, ty: &TypeExpr) -> SResult<Arc<Fiber>> {
        let key = shape(ty)?;
        if let Some(f) = self.fibers.borrow().get(&key) {
            return Ok(f.clone());
        }
        let f = match ty {
            TypeExpr::Base(name, _) => Fiber { groupoid: self.family(name)?.dom().clone(), kind: FiberKind::Base },
            TypeExpr::Id(a, _, _) => {
                let fa = self.fiber(a)?;
                match self.env.backend {
                    Backend::Groupoid => {
                        let ag = Arc::new(ArrowGroupoid::new(&fa.groupoid));
                        Fiber { groupoid: ag.groupoid.clone(), kind: FiberKind::Path(ag, fa) }
                    }
                    Backend::Discrete => Fiber { groupoid: fa.groupoid.clone(), kind: FiberKind::Flat },
                }
            }
            TypeExpr::Sigma(_, a, b) => {
                let fa = self.fiber(a)?;
                let fb = self.fiber(b)?;
                let prod = Arc::new(product(&fa.groupoid, &fb.groupoid));
                Fiber { groupoid: prod.groupoid.clone(), kind: FiberKind::Sigma(prod, fb) }
            }
            TypeExpr::Pi(..) => unreachable!("rejected by shape"),
        };
        let f = Arc::new(f);
        self.fibers.borrow_mut().insert(key, f.clone());
        Ok(f)
    }

    /// `⟨⟦a₁⟧, …, ⟦aₙ⟧⟩ : ⟦Γ⟧ → ⟦Δ⟧` for the arguments of `head`.
    fn tuple(&self, ctx: &SemContext, head: &str, tele: &Context, args: &[TermExpr]) -> SResult<GFunctor> {
        let tctx = self.tele_context(head, tele)?;
        let mut cur = GFunctor::to_terminal(&ctx.total(), &tctx.terminal);
        for (i, a) in args.iter().enumerate() {
            let v = self.term(ctx, a)?;
            cur = match tctx.entries[i].sem.total.pair(&cur, &v) {
                Some(f) => f,
                None => return invariant(format!("argument {} of '{head}' lies outside its type", i + 1)),
            };
        }
        Ok(cur)
    }

    fn ty(&self, ctx: &SemContext, ty: &TypeExpr) -> SResult<SemFibration> {
        let base = ctx.total();
        let fiber = self.fiber(ty)?;
        let f = &fiber.groupoid;
        let cells = base.morphism_count().saturating_mul(f.morphism_count());
        if cells > MAX_CELLS {
            return Err(SemError::SizeGuard(format!("⟦{ty}⟧ would range over {cells} candidate morphisms")));
        }
        let total = match ty {
            TypeExpr::Base(name, args) => {
                let proj = self.family(name)?;
                let Some(Decl::TypeFamily { tele, .. }) = self.sig.lookup(name) else { unreachable!() };
                let chi = self.tuple(ctx, name, tele, args)?;
                PairGroupoid::build(&base, f, |g, e| proj.obj(e) == chi.obj(g), |g, m| proj.mor(m) == chi.mor(g))
            }
            TypeExpr::Id(a, x, y) => {
                let ta = self.ty(ctx, a)?;
                let av = self.term(ctx, x)?;
                let bv = self.term(ctx, y)?;
                match &fiber.kind {
                    FiberKind::Path(ag, fa) => {
                        let fa = &fa.groupoid;
                        PairGroupoid::build(
                            &base,
                            f,
                            |g, phi| {
                                fa.src(phi) == av.obj(g)
                                    && fa.dst(phi) == bv.obj(g)
                                    && ta.total.mor_index(base.id(g), phi).is_some()
                            },
                            |g, k| ag.phi(k) == av.mor(g) && ag.psi(k) == bv.mor(g),
                        )
                    }
                    FiberKind::Flat => PairGroupoid::build(
                        &base,
                        f,
                        |g, e| e == av.obj(g) && e == bv.obj(g),
                        |g, m| m == av.mor(g) && m == bv.mor(g),
                    ),
                    _ => unreachable!("identity types have path or flat fibres"),
                }
            }
            TypeExpr::Sigma(x, a, b) => {
                let ta = self.ty(ctx, a)?;
                let ext = ctx.with(x, a, ta.clone());
                let tb = self.ty(&ext, b)?;
                let FiberKind::Sigma(_, fb) = &fiber.kind else { unreachable!() };
                let (nb, mb) = (fb.groupoid.object_count(), fb.groupoid.morphism_count());
                PairGroupoid::build(
                    &base,
                    f,
                    |g, o| ta.total.obj_index(g, o / nb).is_some_and(|i| tb.total.obj_index(i, o % nb).is_some()),
                    |g, m| ta.total.mor_index(g, m / mb).is_some_and(|i| tb.total.mor_index(i, m % mb).is_some()),
                )
            }
            TypeExpr::Pi(..) => unreachable!("rejected by shape"),
        };
        Ok(SemFibration { fiber, total: Arc::new(total), base })
    }

    fn var(&self, ctx: &SemContext, x: &str) -> SResult<GFunctor> {
        let Some(i) = ctx.entries.iter().rposition(|e| e.name == x) else {
            return invariant(format!("variable '{x}' is not in the interpreted context"));
        };
        let mut f = GFunctor::identity(&ctx.total());
        for j in (i + 1..ctx.len()).rev() {
            f = ctx.entries[j].sem.total.left.after(&f);
        }
        Ok(ctx.entries[i].sem.total.right.after(&f))
    }

    fn inferred_type(&self, ctx: &SemContext, t: &TermExpr) -> SResult<TypeExpr> {
        let k = Kernel::new(self.sig, KernelMode::DEFAULT);
        let ty = k.infer(&ctx.syntax(), t).map_err(|e| SemError::Kernel(e.to_string()))?;
        k.normalize_type(&ty).map_err(|e| SemError::Kernel(e.to_string()))
    }

    /// `⟦t⟧ : ⟦Γ⟧ → F`.
    fn term(&self, ctx: &SemContext, t: &TermExpr) -> SResult<GFunctor> {
        match t {
            TermExpr::Var(x) => self.var(ctx, x),
            TermExpr::Const(c, args) => match self.sig.lookup(c) {
                Some(Decl::TermConst { def: Some(body), .. }) => {
                    let v = self.term(&SemContext::empty(), body)?;
                    Ok(v.after(&GFunctor::to_terminal(&ctx.total(), v.dom())))
                }
                Some(Decl::TermConst { tele, .. }) => {
                    let v = self.const_value(c)?;
                    let chi = self.tuple(ctx, c, tele, args)?;
                    Ok(v.after(&chi))
                }
                _ => Err(SemError::Env(format!("unknown term constant '{c}'"))),
            },
            TermExpr::Lam(..) => Err(SemError::Unsupported("λ-abstraction (Π types are not interpreted)".into())),
            TermExpr::App(f, a) => match &**f {
                TermExpr::Lam(x, dom, body) => {
                    let ext = self.extend(ctx, x, dom)?;
                    let bv = self.term(&ext, body)?;
                    let av = self.term(ctx, a)?;
                    let Some(sub) = ext.last_total().pair(&GFunctor::identity(&ctx.total()), &av) else {
                        return invariant("argument lies outside the domain");
                    };
                    Ok(bv.after(&sub))
                }
                _ => Err(SemError::Unsupported("application of a non-λ term (Π types are not interpreted)".into())),
            },
            TermExpr::Pair(a, b, ann) => {
                let fiber = self.fiber(ann)?;
                let FiberKind::Sigma(prod, _) = &fiber.kind else {
                    return invariant("pair annotated with a non-Σ type");
                };
                Ok(prod.pair(&self.term(ctx, a)?, &self.term(ctx, b)?))
            }
            TermExpr::Fst(p) | TermExpr::Snd(p) => {
                let ty = self.inferred_type(ctx, p)?;
                let fiber = self.fiber(&ty)?;
                let FiberKind::Sigma(prod, _) = &fiber.kind else {
                    return invariant("projection from a non-Σ term");
                };
                let pv = self.term(ctx, p)?;
                Ok(if matches!(t, TermExpr::Fst(_)) { prod.fst.after(&pv) } else { prod.snd.after(&pv) })
            }
            TermExpr::Refl(a, x) => {
                let xv = self.term(ctx, x)?;
                let id_ty = TypeExpr::id((**a).clone(), (**x).clone(), (**x).clone());
                match &self.fiber(&id_ty)?.kind {
                    FiberKind::Path(ag, _) => Ok(ag.r().after(&xv)),
                    _ => Ok(xv),
                }
            }
            TermExpr::J(j) => self.j(ctx, j),
            TermExpr::SuspSub(body, s) => {
                let k = Kernel::new(self.sig, KernelMode::DEFAULT);
                let (inner, body, s) =
                    k.suspsub_domain(&ctx.syntax(), body, s).map_err(|e| SemError::Kernel(e.to_string()))?;
                let mut ext = ctx.clone();
                for (x, ty) in inner.entries.iter().skip(ctx.len()) {
                    ext = self.extend(&ext, x, ty)?;
                }
                let jv = self.term(&ext, &body)?;
                // ⟨id, ⟦c₁⟧, …⟩ : ⟦Γ⟧ → ⟦Γ.Δ⟧
                let mut map = GFunctor::identity(&ctx.total());
                for (i, (x, _)) in inner.entries.iter().skip(ctx.len()).enumerate() {
                    let cv = self.term(ctx, &s[x])?;
                    map = match ext.entries[ctx.len() + i].sem.total.pair(&map, &cv) {
                        Some(m) => m,
                        None => return invariant(format!("substituted term for '{x}' lies outside its type")),
                    };
                }
                Ok(jv.after(&map))
            }
        }
    }

    fn j(&self, ctx: &SemContext, j: &JElim) -> SResult<GFunctor> {
        let a = &j.ty;
        let w1 = self.extend(ctx, &j.x, a)?;
        let w2 = self.extend(&w1, &j.y, a)?;
        let id_ty = TypeExpr::id(a.clone(), TermExpr::Var(j.x.clone()), TermExpr::Var(j.y.clone()));
        let w3 = self.extend(&w2, &j.z, &id_ty)?;
        let d = self.ty(&w3, &j.family)?;
        let base_ctx = ctx.with(&j.base_var, a, w1.entries.last().unwrap().sem.clone());
        let dv = self.term(&base_ctx, &j.base)?;

        // r : Γ.A → Γ.A.A.Id, (γ, e) ↦ (γ, e, e, refl e)
        let ga = w1.total();
        let v = w1.last_total().right.clone();
        let r2 = w2.last_total().pair(&GFunctor::identity(&ga), &v);
        let zv = match &self.fiber(&id_ty)?.kind {
            FiberKind::Path(ag, _) => ag.r().after(&v),
            _ => v.clone(),
        };
        let r3 = r2.and_then(|r2| w3.last_total().pair(&r2, &zv));
        let Some(r3) = r3 else {
            return invariant("reflexivity map leaves the identity context");
        };
        let Some(top) = d.total.pair(&r3, &dv) else {
            return invariant("base case does not lie over the reflexivity map");
        };
        let prob = LiftingProblem::new(r3, d.total.left.clone(), top, GFunctor::identity(&w3.total()))?;
        let filler = self.cache.get_or_solve(&prob)?;
        let generic = d.total.right.after(&filler);

        let av = self.term(ctx, &j.left)?;
        let bv = self.term(ctx, &j.right)?;
        let pv = self.term(ctx, &j.path)?;
        let inst = w1
            .last_total()
            .pair(&GFunctor::identity(&ctx.total()), &av)
            .and_then(|i1| w2.last_total().pair(&i1, &bv))
            .and_then(|i2| w3.last_total().pair(&i2, &pv));
        let Some(inst) = inst else {
            return invariant("J arguments do not form a point of the identity context");
        };
        Ok(generic.after(&inst))
    }

    // -- checks -------------------------------------------------------------

    /// Interprets both sides of each term equation and compares them.
    pub fn check_soundness(&self, eqs: &[Judgement]) -> SoundnessReport {
        let items: Vec<SoundnessItem> = eqs
            .iter()
            .map(|j| {
                let Judgement::TermEq(ctx, x, y, ty) = j else {
                    return SoundnessItem { judgement: j.to_string(), equal: false, error: Some("not a term equation".into()) };
                };
                let res = self.interp_context(ctx).and_then(|c| {
                    let l = self.section_in(&c, x, ty)?;
                    let r = self.section_in(&c, y, ty)?;
                    Ok(l.value == r.value)
                });
                match res {
                    Ok(equal) => SoundnessItem { judgement: j.to_string(), equal, error: None },
                    Err(e) => SoundnessItem { judgement: j.to_string(), equal: false, error: Some(e.to_string()) },
                }
            })
            .collect();
        let passed = items.iter().all(|i| i.equal);
        SoundnessReport { items, passed }
    }

    /// Compares `⟦t⟧` for a suspended substitution `t = J[s]` (the cached
    /// filler, pulled back along `⟦s⟧`) with the interpretation of the
    /// substituted `J`, computed with an independent cache using
    /// `rhs_policy`.
    pub fn coherence_probe(&self, ctx: &Context, t: &TermExpr, rhs_policy: FillerPolicy) -> SResult<CoherenceReport> {
        let TermExpr::SuspSub(body, s) = t else {
            return Err(SemError::Kernel("coherence probe needs a suspended substitution".into()));
        };
        let k = Kernel::new(self.sig, KernelMode::DEFAULT);
        let v = k.check_term(ctx, t, &k.infer(ctx, t).map_err(|e| SemError::Kernel(e.to_string()))?);
        if !v.accepted {
            return Err(SemError::Kernel(v.reason.unwrap_or_default()));
        }
        let ty = k.infer(ctx, t).map_err(|e| SemError::Kernel(e.to_string()))?;
        let substituted = substitute_term_eager(body, s);
        let c = self.interp_context(ctx)?;
        let lhs = self.section_in(&c, t, &ty)?;
        let fresh = self.independent(rhs_policy);
        let c2 = fresh.interp_context(ctx)?;
        let rhs = fresh.section_in(&c2, &substituted, &ty)?;
        if *lhs.section.cod() != *rhs.section.cod() {
            return invariant("the two sides interpret into different fibrations");
        }
        let strict_equal = lhs.section == rhs.section;
        let h = right_homotopy(&lhs.section, &rhs.section, Some(lhs.fibration.projection()))?;
        Ok(CoherenceReport {
            term: t.to_string(),
            substituted: substituted.to_string(),
            rhs_policy,
            strict_equal,
            homotopy_found: h.is_some(),
            components: h.map(|n| n.components),
            lhs: lhs.value.to_json(),
            rhs: rhs.value.to_json(),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SoundnessItem {
    pub judgement: String,
    pub equal: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SoundnessReport {
    pub items: Vec<SoundnessItem>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoherenceReport {
    pub term: String,
    pub substituted: String,
    pub rhs_policy: FillerPolicy,
    pub strict_equal: bool,
    pub homotopy_found: bool,
    /// Components of the vertical natural isomorphism `lhs ⇒ rhs`.
    pub components: Option<Vec<usize>>,
    pub lhs: FunctorJson,
    pub rhs: FunctorJson,
}

// ---------------------------------------------------------------------------
// Demonstrations

const COUNTERMODEL_SIG: &str = "assume A : Type\nassume a : A\nassume b : A\nassume p : Id A a b\n";

#[derive(Clone, Debug, Serialize)]
pub struct CountermodelReport {
    pub environment: String,
    /// Objects of the fibre of `⟦Id A a b⟧` over the point `⟨⟦a⟧, ⟦b⟧⟩`.
    pub fiber_objects: usize,
    /// The inhabitant, as a morphism of `⟦A⟧`.
    pub inhabitant: Option<usize>,
    pub a: usize,
    pub b: usize,
    pub a_equals_b: bool,
    /// Fibre size in the discrete environment with two objects.
    pub discrete_fiber_objects: usize,
    pub refutes_reflection: bool,
}

/// `A ↦ I`, `a ↦ 0`, `b ↦ 1`: the identity type is inhabited while the
/// endpoints differ.
pub fn reflection_countermodel() -> SResult<CountermodelReport> {
    let sig = parse(COUNTERMODEL_SIG).expect("built-in signature").signature;
    let env = SemEnv::preset("interval", &sig)?;
    let interp = Interpreter::new(&sig, env)?;
    let a = TermExpr::constant("a", vec![]);
    let b = TermExpr::constant("b", vec![]);
    let ty_a = TypeExpr::base("A", vec![]);
    let id = TypeExpr::id(ty_a.clone(), a.clone(), b.clone());
    let fib = interp.interp_type(&Context::new(), &id)?;
    let av = interp.interp_term(&Context::new(), &a, &ty_a)?.value.obj(0);
    let bv = interp.interp_term(&Context::new(), &b, &ty_a)?.value.obj(0);
    let fiber_objects = fib.total_groupoid().object_count();
    let inhabitant = (fiber_objects > 0).then(|| fib.total.obj_pair(0).1);

    // the same signature without the path, on two discrete points
    let sig2 = parse("assume A : Type\nassume a : A\nassume b : A\n").unwrap().signature;
    let env2 = SemEnv::preset("discrete-2", &sig2)?;
    let interp2 = Interpreter::new(&sig2, env2)?;
    let discrete_fiber_objects = interp2.interp_type(&Context::new(), &id)?.total_groupoid().object_count();

    Ok(CountermodelReport {
        environment: "interval".into(),
        fiber_objects,
        inhabitant,
        a: av,
        b: bv,
        a_equals_b: av == bv,
        discrete_fiber_objects,
        refutes_reflection: fiber_objects > 0 && av != bv,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberCase {
    pub x: usize,
    pub y: usize,
    pub fiber_objects: usize,
    pub fiber_objects_groupoid_backend: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionalityReport {
    pub n: usize,
    pub cases: Vec<FiberCase>,
    /// Id fibres are inhabited exactly over the diagonal, in both backends.
    pub fibers_ok: bool,
    /// `A^I ≅ A` over `A × A` (via `p` and `Δ`).
    pub path_object_iso: bool,
    pub passed: bool,
}

/// For the discrete groupoid on `n` objects the identity type is the diagonal.
pub fn extensionality_check_discrete(n: usize) -> SResult<ExtensionalityReport> {
    if n == 0 || n > 8 {
        return Err(SemError::Env(format!("discrete size {n} outside 1..=8")));
    }
    let a = Arc::new(discrete(n));
    let po = arrow_groupoid(&a);
    let (_, delta) = diagonal(&a);
    let iso = find_iso(po.total(), &a, Some((&po.p, &delta)), DEFAULT_SEARCH_LIMIT)?;

    let sig = parse("assume A : Type\n").unwrap().signature;
    let ctx = Context::new().extend("x", TypeExpr::base("A", vec![])).extend("y", TypeExpr::base("A", vec![]));
    let id = TypeExpr::id(TypeExpr::base("A", vec![]), TermExpr::var("x"), TermExpr::var("y"));
    let preset = format!("discrete-{n}");
    let fibers = |backend: Backend| -> SResult<Vec<(usize, usize, usize)>> {
        let env = SemEnv::preset_with_backend(&preset, &sig, backend)?;
        let interp = Interpreter::new(&sig, env)?;
        let c = interp.interp_context(&ctx)?;
        let fib = interp.ty(&c, &id)?;
        let xv = interp.var(&c, "x")?;
        let yv = interp.var(&c, "y")?;
        let base = c.total();
        let mut out = Vec::new();
        for g in 0..base.object_count() {
            let count = (0..fib.total_groupoid().object_count()).filter(|&o| fib.total.obj_pair(o).0 == g).count();
            out.push((xv.obj(g), yv.obj(g), count));
        }
        Ok(out)
    };
    let flat = fibers(Backend::Discrete)?;
    let full = fibers(Backend::Groupoid)?;
    let cases: Vec<FiberCase> = flat
        .iter()
        .zip(&full)
        .map(|(&(x, y, c), &(_, _, c2))| FiberCase { x, y, fiber_objects: c, fiber_objects_groupoid_backend: c2 })
        .collect();
    let fibers_ok = cases
        .iter()
        .all(|c| (c.fiber_objects > 0) == (c.x == c.y) && c.fiber_objects == c.fiber_objects_groupoid_backend);
    let path_object_iso = iso.is_some();
    Ok(ExtensionalityReport { n, cases, fibers_ok, path_object_iso, passed: fibers_ok && path_object_iso })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub pulled_back_objects: usize,
    pub fresh_objects: usize,
    pub bijective: bool,
    pub over_base: bool,
    pub respects_r: bool,
    pub iso_found: bool,
    pub iso: Option<FunctorJson>,
}

/// `σ*(B^I) ≅ (σ*B)^I` over `Γ'`, compatible with the reflexivity sections,
/// for a fibration `g : B → Γ` and `σ : Γ' → Γ`. The comparison map sends
/// `(γ', v)` to the vertical arrow `(id_γ', v)` of `σ*B`; it is built
/// directly and then checked to be an isomorphism with both properties.
pub fn stability_check(g: &GFunctor, sigma: &GFunctor) -> SResult<StabilityReport> {
    let po = relative_path_object(g)?;
    let lhs = pullback(sigma, &po.to_base());
    let sb = pullback(sigma, g);
    let rhs = relative_path_object(&sb.left)?;
    let gamma2 = sigma.dom();

    let rhs_obj: HashMap<usize, usize> = rhs.inclusion.obj_map().iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let rhs_mor: HashMap<usize, usize> = rhs.inclusion.mor_map().iter().enumerate().map(|(i, &k)| (k, i)).collect();
    // vertical arrow of σ*B over γ' with B-component v
    let vertical = |gp: usize, v: usize| sb.mor_index(gamma2.id(gp), v);

    let lg = &lhs.groupoid;
    let mut obj = Vec::with_capacity(lg.object_count());
    for o in 0..lg.object_count() {
        let (gp, e) = lhs.obj_pair(o);
        let v = po.inclusion.obj(e);
        let Some(&t) = vertical(gp, v).and_then(|m| rhs_obj.get(&m)) else {
            return invariant("comparison map misses an object");
        };
        obj.push(t);
    }
    let mut mor = Vec::with_capacity(lg.morphism_count());
    for k in 0..lg.morphism_count() {
        let (alpha, e) = lhs.mor_pair(k);
        let big = po.inclusion.mor(e);
        let (s, t) = (lhs.obj_pair(lg.src(k)), lhs.obj_pair(lg.dst(k)));
        let (vs, vt) = (po.inclusion.obj(s.1), po.inclusion.obj(t.1));
        let m = (|| {
            let ms = vertical(s.0, vs)?;
            let mt = vertical(t.0, vt)?;
            let phi = sb.mor_index(alpha, po.arrows.phi(big))?;
            let a = rhs.arrows.mor(ms, mt, phi)?;
            rhs_mor.get(&a).copied()
        })();
        let Some(m) = m else {
            return invariant("comparison map misses a morphism");
        };
        mor.push(m);
    }
    let kappa = GFunctor::new(lg.clone(), rhs.total.clone(), obj, mor)?;
    let bijective = {
        let mut o = kappa.obj_map().to_vec();
        let mut m = kappa.mor_map().to_vec();
        o.sort_unstable();
        o.dedup();
        m.sort_unstable();
        m.dedup();
        o.len() == rhs.total.object_count() && m.len() == rhs.total.morphism_count()
            && kappa.obj_map().len() == o.len() && kappa.mor_map().len() == m.len()
    };
    let over = rhs.to_base().after(&kappa) == lhs.left;
    let r_lhs = lhs.pair(&sb.left, &po.r.after(&sb.right));
    let respects_r = r_lhs.is_some_and(|r| kappa.after(&r) == rhs.r);
    let ok = bijective && over && respects_r;
    Ok(StabilityReport {
        pulled_back_objects: lg.object_count(),
        fresh_objects: rhs.total.object_count(),
        bijective,
        over_base: over,
        respects_r,
        iso_found: ok,
        iso: ok.then(|| kappa.to_json()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AgreementItem {
    pub goal: String,
    pub isomorphic: bool,
    pub error: Option<String>,
}

/// Interprets every goal type (and term) of a closed program in the
/// `discrete-n` environment with both backends and looks for an isomorphism
/// of totals carrying one section to the other.
pub fn backend_agreement(sig: &Signature, goals: &[Judgement], n: usize, limit: u64) -> SResult<Vec<AgreementItem>> {
    let preset = format!("discrete-{n}");
    let g_env = SemEnv::preset_with_backend(&preset, sig, Backend::Groupoid)?;
    let d_env = SemEnv::preset_with_backend(&preset, sig, Backend::Discrete)?;
    let gi = Interpreter::new(sig, g_env)?;
    let di = Interpreter::new(sig, d_env)?;
    let mut out = Vec::new();
    for j in goals {
        let (ctx, term, ty) = match j {
            Judgement::IsType(c, t) => (c, None, t),
            Judgement::HasType(c, t, a) => (c, Some(t), a),
            Judgement::TermEq(c, x, _, a) => (c, Some(x), a),
            Judgement::TypeEq(c, a, _) => (c, None, a),
        };
        let res = (|| -> SResult<bool> {
            let gt = gi.interp_type(ctx, ty)?;
            let dt = di.interp_type(ctx, ty)?;
            let mut search = FunctorSearch::new(gt.total_groupoid(), dt.total_groupoid()).isomorphisms().limit(limit);
            if let Some(t) = term {
                let gs = gi.interp_term(ctx, t, ty)?;
                let ds = di.interp_term(ctx, t, ty)?;
                if gs.section.dom().object_count() != ds.section.dom().object_count() {
                    return Ok(false);
                }
                if *gs.section.dom() == *ds.section.dom() {
                    search = search.through(&gs.section, &ds.section);
                }
            }
            if gt.total_groupoid().object_count() != dt.total_groupoid().object_count()
                || gt.total_groupoid().morphism_count() != dt.total_groupoid().morphism_count()
            {
                return Ok(false);
            }
            Ok(search.first()?.is_some())
        })();
        out.push(match res {
            Ok(b) => AgreementItem { goal: j.to_string(), isomorphic: b, error: None },
            Err(e) => AgreementItem { goal: j.to_string(), isomorphic: false, error: Some(e.to_string()) },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_term, parse_type};

    const SIG: &str = "\
assume A : Type
assume a : A
assume b : A
assume p : Id A a b
assume B : (x : A) Type
assume f : (x : A) B x
assume D : (x : A) (y : A) (z : Id A x y) Type
assume d : (x : A) D x x (refl A x)
";

    fn sig() -> Signature {
        parse(SIG).unwrap().signature
    }

    #[test]
    fn empty_context_is_terminal() {
        let s = sig();
        let interp = Interpreter::new(&s, SemEnv::preset("interval", &s).unwrap()).unwrap();
        let c = interp.interp_context(&Context::new()).unwrap();
        assert_eq!(c.total().object_count(), 1);
        assert_eq!(c.total().morphism_count(), 1);
    }

    #[test]
    fn two_variable_context_is_square() {
        let s = sig();
        let interp = Interpreter::new(&s, SemEnv::preset("interval", &s).unwrap()).unwrap();
        let ctx = Context::new().extend("x", TypeExpr::base("A", vec![])).extend("y", TypeExpr::base("A", vec![]));
        let c = interp.interp_context(&ctx).unwrap();
        assert_eq!(c.total().object_count(), 4);
        assert_eq!(c.total().morphism_count(), 16);
        assert!(c.is_chain_of_fibrations());
    }

    #[test]
    fn id_over_two_points_is_path_fibration() {
        let s = sig();
        let interp = Interpreter::new(&s, SemEnv::preset("interval", &s).unwrap()).unwrap();
        let ctx = Context::new().extend("x", TypeExpr::base("A", vec![])).extend("y", TypeExpr::base("A", vec![]));
        let ty = parse_type(&s, &ctx, "Id A x y").unwrap();
        let fib = interp.interp_type(&ctx, &ty).unwrap();
        assert_eq!(fib.total_groupoid().object_count(), 4);
        // isomorphic to I^I → I × I
        let i = Arc::new(interval());
        let po = arrow_groupoid(&i);
        assert!(find_iso(fib.total_groupoid(), po.total(), None, DEFAULT_SEARCH_LIMIT).unwrap().is_some());
    }

    #[test]
    fn refl_is_r() {
        let s = sig();
        let interp = Interpreter::new(&s, SemEnv::preset("interval", &s).unwrap()).unwrap();
        let ctx = Context::new().extend("x", TypeExpr::base("A", vec![]));
        let t = parse_term(&s, &ctx, "refl A x").unwrap();
        let ty = parse_type(&s, &ctx, "Id A x x").unwrap();
        let sec = interp.interp_term(&ctx, &t, &ty).unwrap();
        let c = interp.interp_context(&ctx).unwrap();
        let i = Arc::new(interval());
        let r = ArrowGroupoid::new(&i).r();
        assert_eq!(sec.value, r.after(&c.entries[0].sem.total.right));
    }

    #[test]
    fn j_triangles() {
        let s = sig();
        let interp = Interpreter::new(&s, SemEnv::preset("interval", &s).unwrap()).unwrap();
        let c = Context::new();
        let j = parse_term(&s, &c, "J A [x y z => D x y z] [x => d x] a a (refl A a)").unwrap();
        let da = parse_term(&s, &c, "d a").unwrap();
        let ty = parse_type(&s, &c, "D a a (refl A a)").unwrap();
        let lhs = interp.interp_term(&c, &j, &ty).unwrap();
        let rhs = interp.interp_term(&c, &da, &ty).unwrap();
        assert_eq!(lhs.value, rhs.value);
        let jp = parse_term(&s, &c, "J A [x y z => D x y z] [x => d x] a b p").unwrap();
        let typ = parse_type(&s, &c, "D a b p").unwrap();
        assert!(interp.interp_term(&c, &jp, &typ).unwrap().is_section());
        assert_eq!(interp.cache.len(), 1);
    }

    #[test]
    fn pi_is_unsupported() {
        let s = sig();
        let interp = Interpreter::new(&s, SemEnv::preset("interval", &s).unwrap()).unwrap();
        let ty = parse_type(&s, &Context::new(), "Pi (x : A) B x").unwrap();
        assert!(matches!(interp.interp_type(&Context::new(), &ty), Err(SemError::Unsupported(_))));
    }

    #[test]
    fn countermodel() {
        let r = reflection_countermodel().unwrap();
        assert_eq!(r.fiber_objects, 1);
        assert!(!r.a_equals_b);
        assert_eq!(r.discrete_fiber_objects, 0);
        assert!(r.refutes_reflection);
    }

    #[test]
    fn discrete_extensionality() {
        for n in 1..=3 {
            let r = extensionality_check_discrete(n).unwrap();
            assert!(r.passed, "{r:?}");
        }
        let r = extensionality_check_discrete(3).unwrap();
        assert_eq!(r.cases.iter().filter(|c| c.x != c.y && c.fiber_objects == 0).count(), 6);
    }

    #[test]
    fn stability_identity_and_point() {
        let i = Arc::new(interval());
        let gamma = Arc::new(discrete(2));
        let prod = product(&i, &gamma);
        let g = prod.snd.clone();
        let r = stability_check(&g, &GFunctor::identity(&gamma)).unwrap();
        assert!(r.iso_found);
        let t = Arc::new(terminal());
        let pt = GFunctor::point(&t, &gamma, 1);
        let r = stability_check(&g, &pt).unwrap();
        assert!(r.iso_found);
        assert_eq!(r.fresh_objects, 4);
    }

    #[test]
    fn coherence_with_injected_filler() {
        let s = sig();
        let interp = Interpreter::new(&s, SemEnv::preset("interval", &s).unwrap()).unwrap();
        let c = Context::new();
        let t = parse_term(&s, &c, "(J A [x y z => D x y z] [x => d x] v w q)[a/v, b/w, p/q]").unwrap();
        let same = interp.coherence_probe(&c, &t, FillerPolicy::LexLeast).unwrap();
        assert!(same.homotopy_found);
        let injected = interp.coherence_probe(&c, &t, FillerPolicy::Last).unwrap();
        assert!(injected.homotopy_found);
        assert!(!injected.strict_equal);
    }

    #[test]
    fn env_json_round_trip() {
        let s = sig();
        let env = SemEnv::preset("z2", &s).unwrap();
        let json = serde_json::to_string(&env.to_json()).unwrap();
        let back: SemEnvJson = serde_json::from_str(&json).unwrap();
        let env2 = SemEnv::from_json(&back).unwrap();
        assert!(Interpreter::new(&s, env2).is_ok());
    }
}
