//! Type checker and definitional equality.
//!
//! Terms carry enough annotations that every term infers its type; checking
//! is inference followed by a conversion test. Definitional equality
//! normalizes both sides (beta, projections, `J` on `refl`, unfolding of
//! `def` constants) and compares up to renaming of bound variables.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{
    alpha_eq_term, alpha_eq_type, fresh_name, free_vars_term, single, substitute_term, substitute_term_eager,
    substitute_type, Context, Decl, Goal, JElim, Judgement, Name, Signature, Subst, TermExpr, TypeExpr,
};

/// Rule names that may appear in a derivation trace.
pub const RULES: &[&str] = &[
    "Π form.", "Π intro.", "Π elim.", "Π conv.", "Σ form.", "Σ intro.", "Σ elim.", "Σ conv.", "Id form.", "Id intro.",
    "Id elim.", "Id conv.", "Id refl.", "Id B.-C.", "r B.-C.", "J B.-C.", "Var", "Const", "Delta", "Base form.", "Conv",
    "Ctx", "ESubst",
];

const DEFAULT_FUEL: u64 = 200_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct KernelMode {
    pub extensional: bool,
    pub strict_j: bool,
}

impl KernelMode {
    pub const DEFAULT: KernelMode = KernelMode { extensional: false, strict_j: false };
    pub const EXTENSIONAL: KernelMode = KernelMode { extensional: true, strict_j: false };
    pub const STRICT_J: KernelMode = KernelMode { extensional: false, strict_j: true };
}

/// Which form of the identity elimination rule the checker applies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JRule {
    /// Derive `J(d,x,y,z) : D(x,y,z)` over the generic context, then
    /// instantiate by substitution.
    #[default]
    Parameterized,
    /// Check the premises directly at `a`, `b`, `p`.
    Closed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: String,
    pub judgement: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub accepted: bool,
    pub trace: Vec<TraceStep>,
    pub reason: Option<String>,
}

impl Verdict {
    fn from_result(r: Result<(), KernelError>, trace: Vec<TraceStep>) -> Verdict {
        match r {
            Ok(()) => Verdict { accepted: true, trace, reason: None },
            Err(e) => Verdict { accepted: false, trace, reason: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("{0}")]
    Ill(String),
    #[error("normalization fuel exhausted")]
    Fuel,
}

type KResult<T> = Result<T, KernelError>;

fn ill<T>(msg: impl Into<String>) -> KResult<T> {
    Err(KernelError::Ill(msg.into()))
}

#[derive(Clone, Debug)]
pub struct Kernel<'a> {
    pub sig: &'a Signature,
    pub mode: KernelMode,
    pub j_rule: JRule,
    pub fuel: u64,
}

impl<'a> Kernel<'a> {
    pub fn new(sig: &'a Signature, mode: KernelMode) -> Kernel<'a> {
        Kernel { sig, mode, j_rule: JRule::Parameterized, fuel: DEFAULT_FUEL }
    }

    pub fn with_j_rule(mut self, r: JRule) -> Self {
        self.j_rule = r;
        self
    }

    fn session(&self) -> Session<'_> {
        Session { sig: self.sig, mode: self.mode, j_rule: self.j_rule, fuel: self.fuel, trace: Vec::new() }
    }

    fn run(&self, f: impl FnOnce(&mut Session) -> KResult<()>) -> Verdict {
        let mut s = self.session();
        let r = f(&mut s);
        Verdict::from_result(r, s.trace)
    }

    pub fn validate_signature(&self) -> Verdict {
        let mut s = self.session();
        let mut r = Ok(());
        for i in 0..self.sig.decls.len() {
            let prefix = Signature { decls: self.sig.decls[..i].to_vec() };
            let mut sub = Session { sig: &prefix, mode: self.mode, j_rule: self.j_rule, fuel: self.fuel, trace: Vec::new() };
            let d = &self.sig.decls[i];
            let res = sub.check_decl(d).map_err(|e| KernelError::Ill(format!("declaration '{}': {e}", d.name())));
            s.trace.append(&mut sub.trace);
            if res.is_err() {
                r = res;
                break;
            }
        }
        Verdict::from_result(r, s.trace)
    }

    pub fn check_context(&self, ctx: &Context) -> Verdict {
        self.run(|s| s.check_ctx(ctx))
    }

    pub fn check_type(&self, ctx: &Context, ty: &TypeExpr) -> Verdict {
        self.run(|s| {
            s.check_ctx(ctx)?;
            s.check_type(ctx, ty)
        })
    }

    pub fn check_term(&self, ctx: &Context, t: &TermExpr, ty: &TypeExpr) -> Verdict {
        self.run(|s| {
            s.check_ctx(ctx)?;
            s.check_type(ctx, ty)?;
            s.check(ctx, t, ty)
        })
    }

    pub fn infer(&self, ctx: &Context, t: &TermExpr) -> KResult<TypeExpr> {
        self.session().infer(ctx, t)
    }

    /// Definitional equality of two terms. Both sides are expected to check
    /// against `ty`; the type only matters through the context it lives in.
    pub fn def_equal(&self, ctx: &Context, x: &TermExpr, y: &TermExpr, _ty: &TypeExpr) -> bool {
        self.session().conv_term(ctx, x, y).unwrap_or(false)
    }

    pub fn def_equal_types(&self, ctx: &Context, a: &TypeExpr, b: &TypeExpr) -> bool {
        self.session().conv_type(ctx, a, b).unwrap_or(false)
    }

    /// Context in which the body of a suspended substitution is checked.
    pub fn suspsub_domain(&self, ctx: &Context, body: &TermExpr, s: &Subst) -> KResult<(Context, TermExpr, Subst)> {
        self.session().suspsub_domain(ctx, body, s)
    }

    pub fn normalize_term(&self, t: &TermExpr) -> KResult<TermExpr> {
        self.session().nf(t)
    }

    pub fn normalize_type(&self, t: &TypeExpr) -> KResult<TypeExpr> {
        self.session().nf_ty(t)
    }

    pub fn check_judgement(&self, j: &Judgement) -> Verdict {
        self.run(|s| s.judgement(j))
    }

    pub fn check_program(&self, goals: &[Goal]) -> Vec<Verdict> {
        goals.iter().map(|g| self.check_judgement(&g.judgement)).collect()
    }
}

pub fn validate_signature(sig: &Signature) -> Verdict {
    Kernel::new(sig, KernelMode::DEFAULT).validate_signature()
}

pub fn check_type(sig: &Signature, ctx: &Context, ty: &TypeExpr) -> Verdict {
    Kernel::new(sig, KernelMode::DEFAULT).check_type(ctx, ty)
}

pub fn check_term(sig: &Signature, ctx: &Context, t: &TermExpr, ty: &TypeExpr) -> Verdict {
    Kernel::new(sig, KernelMode::DEFAULT).check_term(ctx, t, ty)
}

pub fn def_equal(sig: &Signature, ctx: &Context, x: &TermExpr, y: &TermExpr, ty: &TypeExpr) -> bool {
    Kernel::new(sig, KernelMode::DEFAULT).def_equal(ctx, x, y, ty)
}

pub fn check_program(sig: &Signature, goals: &[Goal], mode: KernelMode) -> Vec<Verdict> {
    Kernel::new(sig, mode).check_program(goals)
}

struct Session<'a> {
    sig: &'a Signature,
    mode: KernelMode,
    j_rule: JRule,
    fuel: u64,
    trace: Vec<TraceStep>,
}

fn has_id(t: &TypeExpr) -> bool {
    match t {
        TypeExpr::Id(..) => true,
        TypeExpr::Pi(_, a, b) | TypeExpr::Sigma(_, a, b) => has_id(a) || has_id(b),
        TypeExpr::Base(..) => false,
    }
}

fn has_refl(t: &TermExpr) -> bool {
    match t {
        TermExpr::Refl(..) => true,
        TermExpr::Var(_) => false,
        TermExpr::Const(_, args) => args.iter().any(has_refl),
        TermExpr::Lam(_, _, b) | TermExpr::Fst(b) | TermExpr::Snd(b) => has_refl(b),
        TermExpr::App(f, a) | TermExpr::Pair(f, a, _) => has_refl(f) || has_refl(a),
        TermExpr::J(j) => has_refl(&j.base) || has_refl(&j.left) || has_refl(&j.right) || has_refl(&j.path),
        TermExpr::SuspSub(b, s) => has_refl(b) || s.values().any(has_refl),
    }
}

impl<'a> Session<'a> {
    fn log(&mut self, rule: &str, j: impl Into<String>) {
        self.trace.push(TraceStep { rule: rule.to_string(), judgement: j.into() });
    }

    fn tick(&mut self) -> KResult<()> {
        if self.fuel == 0 {
            return Err(KernelError::Fuel);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn judgement(&mut self, j: &Judgement) -> KResult<()> {
        let ctx = j.context();
        self.check_ctx(ctx)?;
        match j {
            Judgement::IsType(_, t) => self.check_type(ctx, t),
            Judgement::HasType(_, t, a) => {
                self.check_type(ctx, a)?;
                self.check(ctx, t, a)
            }
            Judgement::TypeEq(_, a, b) => {
                self.check_type(ctx, a)?;
                self.check_type(ctx, b)?;
                if self.conv_type(ctx, a, b)? {
                    Ok(())
                } else {
                    ill(format!("types {a} and {b} are not definitionally equal"))
                }
            }
            Judgement::TermEq(_, x, y, a) => {
                self.check_type(ctx, a)?;
                self.check(ctx, x, a).map_err(|e| KernelError::Ill(format!("left side: {e}")))?;
                self.check(ctx, y, a).map_err(|e| KernelError::Ill(format!("right side: {e}")))?;
                if self.conv_term(ctx, x, y)? {
                    Ok(())
                } else {
                    ill(format!("{x} and {y} are not definitionally equal"))
                }
            }
        }
    }

    fn check_decl(&mut self, d: &Decl) -> KResult<()> {
        self.check_ctx(d.tele())?;
        match d {
            Decl::TypeFamily { .. } => Ok(()),
            Decl::TermConst { tele, ty, def, .. } => {
                self.check_type(tele, ty)?;
                if let Some(body) = def {
                    self.check(tele, body, ty)?;
                }
                Ok(())
            }
        }
    }

    fn check_ctx(&mut self, ctx: &Context) -> KResult<()> {
        let mut prefix = Context::new();
        for (x, t) in &ctx.entries {
            if prefix.lookup(x).is_some() || self.sig.lookup(x).is_some() {
                return ill(format!("context variable '{x}' is already declared"));
            }
            self.check_type(&prefix, t)?;
            prefix.entries.push((x.clone(), t.clone()));
            self.log("Ctx", format!("{prefix} ctx"));
        }
        Ok(())
    }

    fn check_type(&mut self, ctx: &Context, t: &TypeExpr) -> KResult<()> {
        match t {
            TypeExpr::Base(f, args) => {
                let tele = match self.sig.lookup(f) {
                    Some(Decl::TypeFamily { tele, .. }) => tele.clone(),
                    Some(_) => return ill(format!("'{f}' is not a type family")),
                    None => return ill(format!("unbound type family '{f}'")),
                };
                self.check_args(ctx, f, &tele, args)?;
                self.log("Base form.", judge(ctx, format!("{t} type")));
                Ok(())
            }
            TypeExpr::Pi(x, a, b) | TypeExpr::Sigma(x, a, b) => {
                self.check_type(ctx, a)?;
                let inner = ctx.extend(x, (**a).clone());
                self.check_type(&inner, b)?;
                let rule = if matches!(t, TypeExpr::Pi(..)) { "Π form." } else { "Σ form." };
                self.log(rule, judge(ctx, format!("{t} type")));
                Ok(())
            }
            TypeExpr::Id(a, x, y) => {
                self.check_type(ctx, a)?;
                self.check(ctx, x, a).map_err(|e| KernelError::Ill(format!("in Id left endpoint: {e}")))?;
                self.check(ctx, y, a).map_err(|e| KernelError::Ill(format!("in Id right endpoint: {e}")))?;
                self.log("Id form.", judge(ctx, format!("{t} type")));
                Ok(())
            }
        }
    }

    /// Checks `args` against telescope `tele` and returns the instantiating
    /// substitution.
    fn check_args(&mut self, ctx: &Context, head: &str, tele: &Context, args: &[TermExpr]) -> KResult<Subst> {
        if args.len() != tele.len() {
            return ill(format!("'{head}' expects {} argument(s), got {}", tele.len(), args.len()));
        }
        let mut s = Subst::new();
        for ((x, ty), a) in tele.entries.iter().zip(args) {
            let expected = self.subst_type(ty, &s);
            self.check(ctx, a, &expected).map_err(|e| KernelError::Ill(format!("argument '{x}' of '{head}': {e}")))?;
            s.insert(x.clone(), a.clone());
        }
        Ok(s)
    }

    fn subst_type(&mut self, t: &TypeExpr, s: &Subst) -> TypeExpr {
        let out = substitute_type(t, s);
        if !s.is_empty() && has_id(t) {
            self.log("Id B.-C.", format!("{t}{} = {out} type", show_subst(s)));
        }
        out
    }

    fn subst_term(&mut self, t: &TermExpr, s: &Subst) -> TermExpr {
        let out = substitute_term(t, s);
        if !s.is_empty() && has_refl(t) {
            self.log("r B.-C.", format!("({t}){} = {out}", show_subst(s)));
        }
        out
    }

    fn check(&mut self, ctx: &Context, t: &TermExpr, ty: &TypeExpr) -> KResult<()> {
        let inferred = self.infer(ctx, t)?;
        if alpha_eq_type(&inferred, ty) {
            return Ok(());
        }
        if self.conv_type(ctx, &inferred, ty)? {
            self.log("Conv", judge(ctx, format!("{t} : {ty}")));
            Ok(())
        } else {
            ill(format!("{t} has type {inferred}, expected {ty}"))
        }
    }

    fn infer(&mut self, ctx: &Context, t: &TermExpr) -> KResult<TypeExpr> {
        self.tick()?;
        let ty = match t {
            TermExpr::Var(x) => match ctx.lookup(x) {
                Some(ty) => {
                    let ty = ty.clone();
                    self.log("Var", judge(ctx, format!("{x} : {ty}")));
                    ty
                }
                None => return ill(format!("unbound variable '{x}'")),
            },
            TermExpr::Const(c, args) => {
                let (tele, ty) = match self.sig.lookup(c) {
                    Some(Decl::TermConst { tele, ty, .. }) => (tele.clone(), ty.clone()),
                    Some(_) => return ill(format!("'{c}' is a type family, not a term")),
                    None => return ill(format!("unbound constant '{c}'")),
                };
                let s = self.check_args(ctx, c, &tele, args)?;
                let out = self.subst_type(&ty, &s);
                self.log("Const", judge(ctx, format!("{t} : {out}")));
                out
            }
            TermExpr::Lam(x, a, b) => {
                self.check_type(ctx, a)?;
                let inner = ctx.extend(x, (**a).clone());
                let bt = self.infer(&inner, b)?;
                let out = TypeExpr::Pi(x.clone(), a.clone(), Box::new(bt));
                self.log("Π intro.", judge(ctx, format!("{t} : {out}")));
                out
            }
            TermExpr::App(f, a) => {
                let ft = self.infer(ctx, f)?;
                let ft = self.nf_ty(&ft)?;
                let TypeExpr::Pi(x, dom, cod) = ft else {
                    return ill(format!("{f} is applied but has non-Π type {ft}"));
                };
                self.check(ctx, a, &dom).map_err(|e| KernelError::Ill(format!("argument of application: {e}")))?;
                let out = self.subst_type(&cod, &single(&x, (**a).clone()));
                self.log("Π elim.", judge(ctx, format!("{t} : {out}")));
                out
            }
            TermExpr::Pair(a, b, ann) => {
                self.check_type(ctx, ann)?;
                let norm = self.nf_ty(ann)?;
                let TypeExpr::Sigma(x, fa, fb) = norm else {
                    return ill(format!("pair annotation {ann} is not a Σ type"));
                };
                self.check(ctx, a, &fa).map_err(|e| KernelError::Ill(format!("first component: {e}")))?;
                let bt = self.subst_type(&fb, &single(&x, (**a).clone()));
                self.check(ctx, b, &bt).map_err(|e| KernelError::Ill(format!("second component: {e}")))?;
                self.log("Σ intro.", judge(ctx, format!("{t} : {ann}")));
                (**ann).clone()
            }
            TermExpr::Fst(p) | TermExpr::Snd(p) => {
                let pt = self.infer(ctx, p)?;
                let pt = self.nf_ty(&pt)?;
                let TypeExpr::Sigma(x, fa, fb) = pt else {
                    return ill(format!("projection from {p} of non-Σ type {pt}"));
                };
                let out = if matches!(t, TermExpr::Fst(_)) {
                    *fa
                } else {
                    self.subst_type(&fb, &single(&x, TermExpr::Fst(p.clone())))
                };
                self.log("Σ elim.", judge(ctx, format!("{t} : {out}")));
                out
            }
            TermExpr::Refl(a, x) => {
                self.check_type(ctx, a)?;
                self.check(ctx, x, a)?;
                let out = TypeExpr::Id(a.clone(), x.clone(), x.clone());
                self.log("Id intro.", judge(ctx, format!("{t} : {out}")));
                out
            }
            TermExpr::J(j) => self.infer_j(ctx, j)?,
            TermExpr::SuspSub(body, s) => self.infer_suspsub(ctx, body, s)?,
        };
        Ok(ty)
    }

    fn infer_j(&mut self, ctx: &Context, j: &JElim) -> KResult<TypeExpr> {
        let a = &j.ty;
        // premises live in Γ for the parameterized form, in the empty context
        // for the closed form
        let base_ctx = match self.j_rule {
            JRule::Parameterized => ctx.clone(),
            JRule::Closed => Context::new(),
        };
        self.check_type(&base_ctx, a).map_err(|e| KernelError::Ill(format!("J type: {e}")))?;
        let fam_ctx = base_ctx
            .extend(&j.x, a.clone())
            .extend(&j.y, a.clone())
            .extend(&j.z, TypeExpr::id(a.clone(), TermExpr::Var(j.x.clone()), TermExpr::Var(j.y.clone())));
        if fam_ctx.entries.iter().filter(|(n, _)| *n == j.x || *n == j.y || *n == j.z).count() != 3
            || j.x == j.y
            || j.y == j.z
            || j.x == j.z
        {
            return ill("J family binders must be distinct");
        }
        self.check_type(&fam_ctx, &j.family).map_err(|e| KernelError::Ill(format!("J family premise: {e}")))?;
        let base_ctx_x = base_ctx.extend(&j.base_var, a.clone());
        let xv = TermExpr::Var(j.base_var.clone());
        let mut diag = Subst::new();
        diag.insert(j.x.clone(), xv.clone());
        diag.insert(j.y.clone(), xv.clone());
        diag.insert(j.z.clone(), TermExpr::Refl(Box::new(a.clone()), Box::new(xv)));
        let base_ty = self.subst_type(&j.family, &diag);
        self.check(&base_ctx_x, &j.base, &base_ty).map_err(|e| KernelError::Ill(format!("J base-case premise: {e}")))?;

        if self.j_rule == JRule::Parameterized {
            self.log("Id elim.", judge(&fam_ctx, format!("J(d, {}, {}, {}) : {}", j.x, j.y, j.z, j.family)));
        }
        self.check_type(ctx, a)?;
        self.check(ctx, &j.left, a).map_err(|e| KernelError::Ill(format!("J left endpoint: {e}")))?;
        self.check(ctx, &j.right, a).map_err(|e| KernelError::Ill(format!("J right endpoint: {e}")))?;
        let path_ty = TypeExpr::id(a.clone(), j.left.clone(), j.right.clone());
        self.check(ctx, &j.path, &path_ty).map_err(|e| KernelError::Ill(format!("J path premise: {e}")))?;
        let mut inst = Subst::new();
        inst.insert(j.x.clone(), j.left.clone());
        inst.insert(j.y.clone(), j.right.clone());
        inst.insert(j.z.clone(), j.path.clone());
        let out = self.subst_type(&j.family, &inst);
        match self.j_rule {
            JRule::Parameterized => self.log("ESubst", judge(ctx, format!("J instance : {out}"))),
            JRule::Closed => self.log("Id elim.", judge(ctx, format!("J instance : {out}"))),
        }
        Ok(out)
    }

    /// A suspended substitution `t[s]` binds the domain of `s` in `t`. The
    /// type of each domain variable is read off the `J` head when it occurs
    /// there as an endpoint or as the path, and inferred from its value
    /// otherwise. Returns the context `Γ, Δ` of the body with the domain
    /// renamed apart from `Γ`, the renamed body and the renamed substitution.
    fn suspsub_domain(&mut self, ctx: &Context, body: &TermExpr, s: &Subst) -> KResult<(Context, TermExpr, Subst)> {
        if !body.is_j_rooted() {
            return ill("suspended substitution on a term that is not J-rooted");
        }
        // rename the bound domain apart from the context and the values
        let mut avoid: BTreeSet<Name> = ctx.names().cloned().collect();
        for d in &self.sig.decls {
            avoid.insert(d.name().to_string());
        }
        for v in s.values() {
            avoid.extend(free_vars_term(v));
        }
        avoid.extend(free_vars_term(body));
        let mut rename = Subst::new();
        let mut s2 = Subst::new();
        for (k, v) in s {
            let k2 = fresh_name(k, &avoid);
            avoid.insert(k2.clone());
            rename.insert(k.clone(), TermExpr::Var(k2.clone()));
            s2.insert(k2, v.clone());
        }
        let body = substitute_term_eager(body, &rename);
        let TermExpr::J(j) = &body else {
            return ill("suspended substitution must wrap a J term");
        };
        let as_var = |t: &TermExpr| match t {
            TermExpr::Var(x) if s2.contains_key(x) => Some(x.clone()),
            _ => None,
        };
        let mut hinted: Vec<(Name, TypeExpr)> = Vec::new();
        for e in [&j.left, &j.right] {
            if let Some(x) = as_var(e) {
                if !hinted.iter().any(|(n, _)| *n == x) {
                    hinted.push((x, j.ty.clone()));
                }
            }
        }
        let path_hint = as_var(&j.path).filter(|x| !hinted.iter().any(|(n, _)| n == x));
        let mut inner = ctx.clone();
        for (k, v) in &s2 {
            if hinted.iter().any(|(n, _)| n == k) || path_hint.as_ref() == Some(k) {
                continue;
            }
            let t = self.infer(ctx, v)?;
            inner.entries.push((k.clone(), t));
        }
        for (k, t) in &hinted {
            inner.entries.push((k.clone(), t.clone()));
        }
        if let Some(p) = &path_hint {
            inner.entries.push((p.clone(), TypeExpr::id(j.ty.clone(), j.left.clone(), j.right.clone())));
        }
        self.check_ctx(&inner).map_err(|e| KernelError::Ill(format!("suspended substitution domain: {e}")))?;
        Ok((inner, body, s2))
    }

    fn infer_suspsub(&mut self, ctx: &Context, body: &TermExpr, s: &Subst) -> KResult<TypeExpr> {
        let (inner, body, s2) = self.suspsub_domain(ctx, body, s)?;
        let body_ty = self.infer(&inner, &body)?;
        // the substitution must be a well-typed context morphism
        for (k, t) in inner.entries.iter().skip(ctx.len()) {
            let expected = self.subst_type(t, &s2);
            let v = &s2[k];
            self.check(ctx, v, &expected).map_err(|e| KernelError::Ill(format!("substituted term for '{k}': {e}")))?;
        }
        let out = self.subst_type(&body_ty, &s2);
        self.log("ESubst", judge(ctx, format!("{} : {out}", TermExpr::SuspSub(Box::new(body.clone()), s2.clone()))));
        Ok(out)
    }

    // -- normalization ------------------------------------------------------

    fn nf(&mut self, t: &TermExpr) -> KResult<TermExpr> {
        self.tick()?;
        Ok(match t {
            TermExpr::Var(_) => t.clone(),
            TermExpr::Const(c, args) => {
                if let Some(Decl::TermConst { def: Some(body), tele, .. }) = self.sig.lookup(c) {
                    let s: Subst = tele.names().cloned().zip(args.iter().cloned()).collect();
                    let unfolded = substitute_term(body, &s);
                    self.log("Delta", format!("{t} = {unfolded}"));
                    return self.nf(&unfolded);
                }
                TermExpr::Const(c.clone(), args.iter().map(|a| self.nf(a)).collect::<KResult<_>>()?)
            }
            TermExpr::Lam(x, a, b) => TermExpr::Lam(x.clone(), Box::new(self.nf_ty(a)?), Box::new(self.nf(b)?)),
            TermExpr::App(f, a) => {
                let f2 = self.nf(f)?;
                let a2 = self.nf(a)?;
                if let TermExpr::Lam(x, _, b) = &f2 {
                    let red = self.subst_term(b, &single(x, a2.clone()));
                    self.log("Π conv.", format!("app ({f2}) ({a2}) = {red}"));
                    return self.nf(&red);
                }
                TermExpr::App(Box::new(f2), Box::new(a2))
            }
            TermExpr::Pair(a, b, ty) => TermExpr::Pair(Box::new(self.nf(a)?), Box::new(self.nf(b)?), Box::new(self.nf_ty(ty)?)),
            TermExpr::Fst(p) | TermExpr::Snd(p) => {
                let p2 = self.nf(p)?;
                let first = matches!(t, TermExpr::Fst(_));
                if let TermExpr::Pair(a, b, _) = &p2 {
                    let out = if first { (**a).clone() } else { (**b).clone() };
                    self.log("Σ conv.", format!("{} = {out}", if first { "fst" } else { "snd" }));
                    return Ok(out);
                }
                if first {
                    TermExpr::Fst(Box::new(p2))
                } else {
                    TermExpr::Snd(Box::new(p2))
                }
            }
            TermExpr::Refl(a, x) => TermExpr::Refl(Box::new(self.nf_ty(a)?), Box::new(self.nf(x)?)),
            TermExpr::J(j) => {
                let path = self.nf(&j.path)?;
                if let TermExpr::Refl(_, x) = &path {
                    let red = self.subst_term(&j.base, &single(&j.base_var, (**x).clone()));
                    self.log("Id conv.", format!("J(d, {x}, {x}, refl {x}) = {red}"));
                    return self.nf(&red);
                }
                TermExpr::J(Box::new(JElim {
                    ty: self.nf_ty(&j.ty)?,
                    x: j.x.clone(),
                    y: j.y.clone(),
                    z: j.z.clone(),
                    family: self.nf_ty(&j.family)?,
                    base_var: j.base_var.clone(),
                    base: self.nf(&j.base)?,
                    left: self.nf(&j.left)?,
                    right: self.nf(&j.right)?,
                    path,
                }))
            }
            TermExpr::SuspSub(body, s) => {
                if self.mode.strict_j {
                    let out = substitute_term_eager(body, s);
                    self.log("J B.-C.", format!("{t} = {out}"));
                    return self.nf(&out);
                }
                let body2 = self.nf(body)?;
                let s2: Subst = s.iter().map(|(k, v)| Ok((k.clone(), self.nf(v)?))).collect::<KResult<_>>()?;
                if body2.is_j_rooted() {
                    let fv = free_vars_term(&body2);
                    let s3: Subst = s2.into_iter().filter(|(k, _)| fv.contains(k)).collect();
                    if s3.is_empty() {
                        body2
                    } else {
                        TermExpr::SuspSub(Box::new(body2), s3)
                    }
                } else {
                    let out = self.subst_term(&body2, &s2);
                    self.nf(&out)?
                }
            }
        })
    }

    fn nf_ty(&mut self, t: &TypeExpr) -> KResult<TypeExpr> {
        self.tick()?;
        Ok(match t {
            TypeExpr::Base(f, args) => TypeExpr::Base(f.clone(), args.iter().map(|a| self.nf(a)).collect::<KResult<_>>()?),
            TypeExpr::Pi(x, a, b) => TypeExpr::Pi(x.clone(), Box::new(self.nf_ty(a)?), Box::new(self.nf_ty(b)?)),
            TypeExpr::Sigma(x, a, b) => TypeExpr::Sigma(x.clone(), Box::new(self.nf_ty(a)?), Box::new(self.nf_ty(b)?)),
            TypeExpr::Id(a, x, y) => TypeExpr::Id(Box::new(self.nf_ty(a)?), Box::new(self.nf(x)?), Box::new(self.nf(y)?)),
        })
    }

    // -- conversion ---------------------------------------------------------

    fn hypotheses(&mut self, ctx: &Context) -> KResult<Classes> {
        let mut eqs = Vec::new();
        for (_, t) in &ctx.entries {
            if let TypeExpr::Id(_, a, b) = t {
                eqs.push(((**a).clone(), (**b).clone()));
            }
        }
        for d in &self.sig.decls {
            if let Decl::TermConst { tele, ty: TypeExpr::Id(_, a, b), .. } = d {
                if tele.is_empty() {
                    eqs.push(((**a).clone(), (**b).clone()));
                }
            }
        }
        let mut classes = Classes::default();
        for (a, b) in eqs {
            let a = self.nf(&a)?;
            let b = self.nf(&b)?;
            classes.union(a, b);
        }
        Ok(classes)
    }

    fn conv_term(&mut self, ctx: &Context, x: &TermExpr, y: &TermExpr) -> KResult<bool> {
        let a = self.nf(x)?;
        let b = self.nf(y)?;
        if alpha_eq_term(&a, &b) {
            return Ok(true);
        }
        if self.mode.extensional {
            let classes = self.hypotheses(ctx)?;
            if !classes.is_empty() && Modulo::new(&classes).term(&a, &b) {
                self.log("Id refl.", judge(ctx, format!("{x} = {y}")));
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn conv_type(&mut self, ctx: &Context, x: &TypeExpr, y: &TypeExpr) -> KResult<bool> {
        let a = self.nf_ty(x)?;
        let b = self.nf_ty(y)?;
        if alpha_eq_type(&a, &b) {
            return Ok(true);
        }
        if self.mode.extensional {
            let classes = self.hypotheses(ctx)?;
            if !classes.is_empty() && Modulo::new(&classes).ty(&a, &b) {
                self.log("Id refl.", judge(ctx, format!("{x} = {y} type")));
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn judge(ctx: &Context, body: String) -> String {
    if ctx.is_empty() {
        format!("⊢ {body}")
    } else {
        format!("{ctx} ⊢ {body}")
    }
}

fn show_subst(s: &Subst) -> String {
    let parts: Vec<String> = s.iter().map(|(k, v)| format!("{v}/{k}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Equivalence classes of normal forms, generated by identity hypotheses.
#[derive(Default)]
struct Classes {
    terms: Vec<TermExpr>,
    parent: Vec<usize>,
}

impl Classes {
    fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn index(&mut self, t: TermExpr) -> usize {
        if let Some(i) = self.terms.iter().position(|u| alpha_eq_term(u, &t)) {
            return i;
        }
        self.terms.push(t);
        self.parent.push(self.parent.len());
        self.parent.len() - 1
    }

    fn find(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: TermExpr, b: TermExpr) {
        let i = self.index(a);
        let j = self.index(b);
        let (ri, rj) = (self.find(i), self.find(j));
        if ri != rj {
            self.parent[ri.max(rj)] = ri.min(rj);
        }
    }

    fn same(&self, a: &TermExpr, b: &TermExpr) -> bool {
        let i = self.terms.iter().position(|u| alpha_eq_term(u, a));
        let j = self.terms.iter().position(|u| alpha_eq_term(u, b));
        matches!((i, j), (Some(i), Some(j)) if self.find(i) == self.find(j))
    }
}

/// Structural comparison that identifies hypothesis-related subterms.
struct Modulo<'c> {
    classes: &'c Classes,
    left: Vec<Name>,
    right: Vec<Name>,
}

impl<'c> Modulo<'c> {
    fn new(classes: &'c Classes) -> Self {
        Modulo { classes, left: vec![], right: vec![] }
    }

    fn closed_here(&self, t: &TermExpr, bound: &[Name]) -> bool {
        free_vars_term(t).iter().all(|v| !bound.contains(v))
    }

    fn under<T>(&mut self, xs: &[&Name], ys: &[&Name], f: impl FnOnce(&mut Self) -> T) -> T {
        let n = self.left.len();
        self.left.extend(xs.iter().map(|s| (*s).clone()));
        self.right.extend(ys.iter().map(|s| (*s).clone()));
        let r = f(self);
        self.left.truncate(n);
        self.right.truncate(n);
        r
    }

    fn var(&self, x: &str, y: &str) -> bool {
        let i = self.left.iter().rposition(|n| n == x);
        let j = self.right.iter().rposition(|n| n == y);
        match (i, j) {
            (Some(i), Some(j)) => i == j,
            (None, None) => x == y,
            _ => false,
        }
    }

    fn term(&mut self, a: &TermExpr, b: &TermExpr) -> bool {
        use TermExpr::*;
        if self.closed_here(a, &self.left) && self.closed_here(b, &self.right) && (alpha_eq_term(a, b) || self.classes.same(a, b)) {
            return true;
        }
        match (a, b) {
            (Var(x), Var(y)) => self.var(x, y),
            (Const(c, xs), Const(d, ys)) => c == d && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.term(x, y)),
            (Lam(x, a1, b1), Lam(y, a2, b2)) => self.ty(a1, a2) && self.under(&[x], &[y], |s| s.term(b1, b2)),
            (App(f1, a1), App(f2, a2)) => self.term(f1, f2) && self.term(a1, a2),
            (Pair(a1, b1, t1), Pair(a2, b2, t2)) => self.term(a1, a2) && self.term(b1, b2) && self.ty(t1, t2),
            (Fst(p), Fst(q)) | (Snd(p), Snd(q)) => self.term(p, q),
            (Refl(a1, x1), Refl(a2, x2)) => self.ty(a1, a2) && self.term(x1, x2),
            (J(j1), J(j2)) => {
                self.ty(&j1.ty, &j2.ty)
                    && self.under(&[&j1.x, &j1.y, &j1.z], &[&j2.x, &j2.y, &j2.z], |s| s.ty(&j1.family, &j2.family))
                    && self.under(&[&j1.base_var], &[&j2.base_var], |s| s.term(&j1.base, &j2.base))
                    && self.term(&j1.left, &j2.left)
                    && self.term(&j1.right, &j2.right)
                    && self.term(&j1.path, &j2.path)
            }
            (SuspSub(..), SuspSub(..)) => alpha_eq_term(a, b),
            _ => false,
        }
    }

    fn ty(&mut self, a: &TypeExpr, b: &TypeExpr) -> bool {
        use TypeExpr::*;
        match (a, b) {
            (Base(c, xs), Base(d, ys)) => c == d && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.term(x, y)),
            (Pi(x, a1, b1), Pi(y, a2, b2)) | (Sigma(x, a1, b1), Sigma(y, a2, b2)) => {
                self.ty(a1, a2) && self.under(&[x], &[y], |s| s.ty(b1, b2))
            }
            (Id(a1, x1, y1), Id(a2, x2, y2)) => self.ty(a1, a2) && self.term(x1, x2) && self.term(y1, y2),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_term, parse_type};

    const SIG: &str = "\
assume A : Type
assume a : A
assume b : A
assume c : A
assume p : Id A a b
assume B : (x : A) Type
assume f : (x : A) B x
assume D : (x : A) (y : A) (z : Id A x y) Type
assume d : (x : A) D x x (refl A x)
";

    fn sig() -> Signature {
        let p = parse(SIG).unwrap();
        assert!(validate_signature(&p.signature).accepted);
        p.signature
    }

    fn goal(src: &str) -> Judgement {
        let p = parse(&format!("{SIG}{src}\n")).unwrap();
        p.goals[0].judgement.clone()
    }

    fn accepted(src: &str, mode: KernelMode) -> bool {
        let s = sig();
        Kernel::new(&s, mode).check_judgement(&goal(src)).accepted
    }

    #[test]
    fn signature_validation() {
        let ok = parse("assume A : Type\nassume B : (x : A) Type").unwrap();
        assert!(validate_signature(&ok.signature).accepted);
        let ok = parse("assume A : Type\nassume D : (x : A) (y : A) (z : Id A x y) Type").unwrap();
        assert!(validate_signature(&ok.signature).accepted);
        // B over an undeclared A, constructed by hand since the parser rejects it
        let bad = Signature {
            decls: vec![Decl::TypeFamily {
                name: "B".into(),
                tele: Context::new().extend("x", TypeExpr::base("A", vec![])),
            }],
        };
        let v = validate_signature(&bad);
        assert!(!v.accepted);
        assert!(v.reason.unwrap().contains("unbound type family 'A'"));
    }

    #[test]
    fn id_formation() {
        let s = sig();
        let ctx = Context::new().extend("x", TypeExpr::base("A", vec![])).extend("y", TypeExpr::base("A", vec![]));
        let t = parse_type(&s, &ctx, "Id A x y").unwrap();
        assert!(check_type(&s, &ctx, &t).accepted);
        let ctx1 = Context::new().extend("x", TypeExpr::base("A", vec![]));
        let t = TypeExpr::id(TypeExpr::base("A", vec![]), TermExpr::var("x"), TermExpr::var("y"));
        assert!(!check_type(&s, &ctx1, &t).accepted);
        assert!(accepted("checktype Pi (x : A) Id A x x", KernelMode::DEFAULT));
    }

    #[test]
    fn rule_instances() {
        assert!(accepted("check refl A a : Id A a a", KernelMode::DEFAULT));
        assert!(accepted("check J A [x y z => D x y z] [x => d x] a b p : D a b p", KernelMode::DEFAULT));
        assert!(!accepted("check refl A a : Id A a b", KernelMode::DEFAULT));
        assert!(accepted("eq J A [x y z => D x y z] [x => d x] a a (refl A a) = d a : D a a (refl A a)", KernelMode::DEFAULT));
        assert!(accepted("eq app (lam (x : A) f x) a = f a : B a", KernelMode::DEFAULT));
        assert!(accepted("eq fst (pair a (f a) as Sig (x : A) B x) = a : A", KernelMode::DEFAULT));
    }

    #[test]
    fn reflection_needs_extensional_mode() {
        let g = "eq a = b : A";
        assert!(!accepted(g, KernelMode::DEFAULT));
        assert!(accepted(g, KernelMode::EXTENSIONAL));
        assert!(!accepted("eq a = c : A", KernelMode::EXTENSIONAL));
        // congruence through a constant
        assert!(accepted("eq f a = f b : B a", KernelMode::EXTENSIONAL));
    }

    #[test]
    fn strict_j_collapses_suspensions() {
        let g = "eq (J A [x y z => D x y z] [x => d x] v b q)[a/v, p/q] = J A [x y z => D x y z] [x => d x] a b p : D a b p";
        assert!(!accepted(g, KernelMode::DEFAULT));
        assert!(accepted(g, KernelMode::STRICT_J));
        let s = sig();
        let Judgement::TermEq(_, l, r, ty) = goal(g) else { panic!() };
        assert!(!def_equal(&s, &Context::new(), &l, &r, &ty));
    }

    #[test]
    fn suspension_of_reducible_j_computes() {
        let g = "eq (J A [x y z => D x y z] [x => d x] v v (refl A v))[c/v] = d c : D c c (refl A c)";
        assert!(accepted(g, KernelMode::DEFAULT));
    }

    #[test]
    fn trace_uses_rule_vocabulary() {
        let s = sig();
        let v = Kernel::new(&s, KernelMode::DEFAULT)
            .check_judgement(&goal("eq J A [x y z => D x y z] [x => d x] a a (refl A a) = d a : D a a (refl A a)"));
        assert!(v.accepted);
        assert!(v.trace.iter().all(|t| RULES.contains(&t.rule.as_str())));
        for r in ["Id elim.", "Id conv.", "Id intro."] {
            assert!(v.trace.iter().any(|t| t.rule == r), "missing {r}");
        }
    }

    #[test]
    fn closed_and_parameterized_j_agree() {
        let s = sig();
        for src in [
            "check J A [x y z => D x y z] [x => d x] a b p : D a b p",
            "check J A [x y z => D x y z] [x => d x] a a p : D a b p",
            "check J A [x y z => D x y z] [x => f x] a b p : D a b p",
            "check J A [x y z => B x] [x => f x] a b p : B a",
        ] {
            let j = goal(src);
            let p = Kernel::new(&s, KernelMode::DEFAULT).check_judgement(&j).accepted;
            let c = Kernel::new(&s, KernelMode::DEFAULT).with_j_rule(JRule::Closed).check_judgement(&j).accepted;
            assert_eq!(p, c, "{src}");
        }
    }

    #[test]
    fn def_constants_unfold() {
        let src = format!("{SIG}def e : A := a\neq e = a : A\n");
        let p = parse(&src).unwrap();
        assert!(validate_signature(&p.signature).accepted);
        let v = check_program(&p.signature, &p.goals, KernelMode::DEFAULT);
        assert!(v[0].accepted);
    }

    #[test]
    fn empty_goal_list() {
        assert!(check_program(&sig(), &[], KernelMode::DEFAULT).is_empty());
    }

    #[test]
    fn normalization_respects_fuel() {
        let s = sig();
        let t = parse_term(&s, &Context::new(), "app (lam (x : A) x) a").unwrap();
        let mut k = Kernel::new(&s, KernelMode::DEFAULT);
        k.fuel = 1;
        assert_eq!(k.normalize_term(&t), Err(KernelError::Fuel));
        k.fuel = 100;
        assert_eq!(k.normalize_term(&t).unwrap(), TermExpr::constant("a", vec![]));
    }
}
