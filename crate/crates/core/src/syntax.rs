//! Abstract syntax of the type theory, the `.mltt` surface syntax, and
//! substitution.
//!
//! Substitution pushes through every former except `J`: substituting into a
//! `J`-rooted term produces (or extends) a suspended substitution node, so the
//! compatibility of `J` with substitution is never forced syntactically. On
//! `Id` and `refl` it pushes through, so their compatibility with
//! substitution holds as an identity of syntax trees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub type Name = String;

/// Simultaneous substitution, variable ↦ term.
pub type Subst = BTreeMap<Name, TermExpr>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    /// A declared type family applied to arguments.
    Base(Name, Vec<TermExpr>),
    Pi(Name, Box<TypeExpr>, Box<TypeExpr>),
    Sigma(Name, Box<TypeExpr>, Box<TypeExpr>),
    Id(Box<TypeExpr>, Box<TermExpr>, Box<TermExpr>),
}

/// `J_{A,D}(d, a, b, p)` with the family `D` bound over `x y z` and the base
/// case `d` bound over `base_var`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JElim {
    pub ty: TypeExpr,
    pub x: Name,
    pub y: Name,
    pub z: Name,
    pub family: TypeExpr,
    pub base_var: Name,
    pub base: TermExpr,
    pub left: TermExpr,
    pub right: TermExpr,
    pub path: TermExpr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TermExpr {
    Var(Name),
    Const(Name, Vec<TermExpr>),
    Lam(Name, Box<TypeExpr>, Box<TermExpr>),
    App(Box<TermExpr>, Box<TermExpr>),
    /// Pair annotated with its Σ type.
    Pair(Box<TermExpr>, Box<TermExpr>, Box<TypeExpr>),
    Fst(Box<TermExpr>),
    Snd(Box<TermExpr>),
    Refl(Box<TypeExpr>, Box<TermExpr>),
    J(Box<JElim>),
    /// Suspended substitution on a `J`-rooted term. The substitution binds
    /// its domain inside the body.
    SuspSub(Box<TermExpr>, Subst),
}

impl TermExpr {
    pub fn var(x: &str) -> TermExpr {
        TermExpr::Var(x.to_string())
    }

    pub fn constant(c: &str, args: Vec<TermExpr>) -> TermExpr {
        TermExpr::Const(c.to_string(), args)
    }

    pub fn is_j_rooted(&self) -> bool {
        match self {
            TermExpr::J(_) => true,
            TermExpr::SuspSub(t, _) => t.is_j_rooted(),
            _ => false,
        }
    }
}

impl TypeExpr {
    pub fn base(c: &str, args: Vec<TermExpr>) -> TypeExpr {
        TypeExpr::Base(c.to_string(), args)
    }

    pub fn id(a: TypeExpr, x: TermExpr, y: TermExpr) -> TypeExpr {
        TypeExpr::Id(Box::new(a), Box::new(x), Box::new(y))
    }
}

/// Ordered variable declarations.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Context {
    pub entries: Vec<(Name, TypeExpr)>,
}

impl Context {
    pub fn new() -> Context {
        Context::default()
    }

    pub fn extend(&self, x: &str, ty: TypeExpr) -> Context {
        let mut c = self.clone();
        c.entries.push((x.to_string(), ty));
        c
    }

    pub fn lookup(&self, x: &str) -> Option<&TypeExpr> {
        self.entries.iter().rev().find(|(n, _)| n == x).map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.entries.iter().map(|(n, _)| n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decl {
    TypeFamily { name: Name, tele: Context },
    TermConst { name: Name, tele: Context, ty: TypeExpr, def: Option<TermExpr> },
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::TypeFamily { name, .. } | Decl::TermConst { name, .. } => name,
        }
    }

    pub fn tele(&self) -> &Context {
        match self {
            Decl::TypeFamily { tele, .. } | Decl::TermConst { tele, .. } => tele,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub decls: Vec<Decl>,
}

impl Signature {
    pub fn lookup(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name() == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.decls.iter().position(|d| d.name() == name)
    }

    pub fn push(&mut self, d: Decl) {
        self.decls.push(d);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Judgement {
    IsType(Context, TypeExpr),
    HasType(Context, TermExpr, TypeExpr),
    TypeEq(Context, TypeExpr, TypeExpr),
    TermEq(Context, TermExpr, TermExpr, TypeExpr),
}

impl Judgement {
    pub fn context(&self) -> &Context {
        match self {
            Judgement::IsType(c, _)
            | Judgement::HasType(c, _, _)
            | Judgement::TypeEq(c, _, _)
            | Judgement::TermEq(c, _, _, _) => c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Goal {
    pub line: usize,
    pub judgement: Judgement,
}

impl Goal {
    pub fn name(&self) -> String {
        let kind = match self.judgement {
            Judgement::IsType(..) => "checktype",
            Judgement::HasType(..) => "check",
            Judgement::TypeEq(..) => "eqtype",
            Judgement::TermEq(..) => "eq",
        };
        format!("line {} ({kind})", self.line)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub signature: Signature,
    pub goals: Vec<Goal>,
}

// ---------------------------------------------------------------------------
// Free variables and names

pub fn free_vars_term(t: &TermExpr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fv_term(t, &mut Vec::new(), &mut out);
    out
}

pub fn free_vars_type(t: &TypeExpr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fv_type(t, &mut Vec::new(), &mut out);
    out
}

fn fv_term(t: &TermExpr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match t {
        TermExpr::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        TermExpr::Const(_, args) => args.iter().for_each(|a| fv_term(a, bound, out)),
        TermExpr::Lam(x, a, b) => {
            fv_type(a, bound, out);
            bound.push(x.clone());
            fv_term(b, bound, out);
            bound.pop();
        }
        TermExpr::App(f, a) => {
            fv_term(f, bound, out);
            fv_term(a, bound, out);
        }
        TermExpr::Pair(a, b, ty) => {
            fv_term(a, bound, out);
            fv_term(b, bound, out);
            fv_type(ty, bound, out);
        }
        TermExpr::Fst(t) | TermExpr::Snd(t) => fv_term(t, bound, out),
        TermExpr::Refl(a, x) => {
            fv_type(a, bound, out);
            fv_term(x, bound, out);
        }
        TermExpr::J(j) => {
            fv_type(&j.ty, bound, out);
            let n = bound.len();
            bound.extend([j.x.clone(), j.y.clone(), j.z.clone()]);
            fv_type(&j.family, bound, out);
            bound.truncate(n);
            bound.push(j.base_var.clone());
            fv_term(&j.base, bound, out);
            bound.pop();
            fv_term(&j.left, bound, out);
            fv_term(&j.right, bound, out);
            fv_term(&j.path, bound, out);
        }
        TermExpr::SuspSub(body, s) => {
            for v in s.values() {
                fv_term(v, bound, out);
            }
            let n = bound.len();
            bound.extend(s.keys().cloned());
            fv_term(body, bound, out);
            bound.truncate(n);
        }
    }
}

fn fv_type(t: &TypeExpr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match t {
        TypeExpr::Base(_, args) => args.iter().for_each(|a| fv_term(a, bound, out)),
        TypeExpr::Pi(x, a, b) | TypeExpr::Sigma(x, a, b) => {
            fv_type(a, bound, out);
            bound.push(x.clone());
            fv_type(b, bound, out);
            bound.pop();
        }
        TypeExpr::Id(a, x, y) => {
            fv_type(a, bound, out);
            fv_term(x, bound, out);
            fv_term(y, bound, out);
        }
    }
}

/// Every identifier occurring anywhere (variables, binders and constants).
fn all_names_term(t: &TermExpr, out: &mut BTreeSet<Name>) {
    match t {
        TermExpr::Var(x) => {
            out.insert(x.clone());
        }
        TermExpr::Const(c, args) => {
            out.insert(c.clone());
            args.iter().for_each(|a| all_names_term(a, out));
        }
        TermExpr::Lam(x, a, b) => {
            out.insert(x.clone());
            all_names_type(a, out);
            all_names_term(b, out);
        }
        TermExpr::App(f, a) => {
            all_names_term(f, out);
            all_names_term(a, out);
        }
        TermExpr::Pair(a, b, ty) => {
            all_names_term(a, out);
            all_names_term(b, out);
            all_names_type(ty, out);
        }
        TermExpr::Fst(t) | TermExpr::Snd(t) => all_names_term(t, out),
        TermExpr::Refl(a, x) => {
            all_names_type(a, out);
            all_names_term(x, out);
        }
        TermExpr::J(j) => {
            out.extend([j.x.clone(), j.y.clone(), j.z.clone(), j.base_var.clone()]);
            all_names_type(&j.ty, out);
            all_names_type(&j.family, out);
            all_names_term(&j.base, out);
            all_names_term(&j.left, out);
            all_names_term(&j.right, out);
            all_names_term(&j.path, out);
        }
        TermExpr::SuspSub(body, s) => {
            for (k, v) in s {
                out.insert(k.clone());
                all_names_term(v, out);
            }
            all_names_term(body, out);
        }
    }
}

fn all_names_type(t: &TypeExpr, out: &mut BTreeSet<Name>) {
    match t {
        TypeExpr::Base(c, args) => {
            out.insert(c.clone());
            args.iter().for_each(|a| all_names_term(a, out));
        }
        TypeExpr::Pi(x, a, b) | TypeExpr::Sigma(x, a, b) => {
            out.insert(x.clone());
            all_names_type(a, out);
            all_names_type(b, out);
        }
        TypeExpr::Id(a, x, y) => {
            all_names_type(a, out);
            all_names_term(x, out);
            all_names_term(y, out);
        }
    }
}

/// `base`, or `base_1`, `base_2`, … whichever is first not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    if !avoid.contains(base) {
        return base.to_string();
    }
    let stem = match base.rfind('_') {
        Some(i) if base[i + 1..].chars().all(|c| c.is_ascii_digit()) && i + 1 < base.len() => &base[..i],
        _ => base,
    };
    (1..).map(|k| format!("{stem}_{k}")).find(|n| !avoid.contains(n)).unwrap()
}

// ---------------------------------------------------------------------------
// Substitution

/// Capture-avoiding substitution; suspends on `J`-rooted terms.
pub fn substitute_term(t: &TermExpr, s: &Subst) -> TermExpr {
    Substituter { suspend_j: true }.term(t, s)
}

pub fn substitute_type(t: &TypeExpr, s: &Subst) -> TypeExpr {
    Substituter { suspend_j: true }.ty(t, s)
}

/// Capture-avoiding substitution that also pushes through `J` and resolves
/// suspended substitutions.
pub fn substitute_term_eager(t: &TermExpr, s: &Subst) -> TermExpr {
    Substituter { suspend_j: false }.term(t, s)
}

pub fn substitute_type_eager(t: &TypeExpr, s: &Subst) -> TypeExpr {
    Substituter { suspend_j: false }.ty(t, s)
}

pub fn single(x: &str, t: TermExpr) -> Subst {
    let mut s = Subst::new();
    s.insert(x.to_string(), t);
    s
}

struct Substituter {
    suspend_j: bool,
}

impl Substituter {
    /// Prepares to go under binder `x` whose scope is `body_names`: drops `x`
    /// from the substitution and renames it if it would capture.
    fn binder(&self, x: &str, s: &Subst, scope: &dyn Fn(&mut BTreeSet<Name>)) -> (Name, Subst) {
        let mut inner = s.clone();
        inner.remove(x);
        let captures = inner.values().any(|v| free_vars_term(v).contains(x));
        if !captures {
            return (x.to_string(), inner);
        }
        let mut avoid = BTreeSet::new();
        scope(&mut avoid);
        for (k, v) in &inner {
            avoid.insert(k.clone());
            all_names_term(v, &mut avoid);
        }
        let fresh = fresh_name(x, &avoid);
        inner.insert(x.to_string(), TermExpr::Var(fresh.clone()));
        (fresh, inner)
    }

    fn term(&self, t: &TermExpr, s: &Subst) -> TermExpr {
        if s.is_empty() {
            return t.clone();
        }
        match t {
            TermExpr::Var(x) => s.get(x).cloned().unwrap_or_else(|| t.clone()),
            TermExpr::Const(c, args) => TermExpr::Const(c.clone(), args.iter().map(|a| self.term(a, s)).collect()),
            TermExpr::Lam(x, a, b) => {
                let (x2, inner) = self.binder(x, s, &|out| all_names_term(b, out));
                TermExpr::Lam(x2, Box::new(self.ty(a, s)), Box::new(self.term(b, &inner)))
            }
            TermExpr::App(f, a) => TermExpr::App(Box::new(self.term(f, s)), Box::new(self.term(a, s))),
            TermExpr::Pair(a, b, ty) => {
                TermExpr::Pair(Box::new(self.term(a, s)), Box::new(self.term(b, s)), Box::new(self.ty(ty, s)))
            }
            TermExpr::Fst(p) => TermExpr::Fst(Box::new(self.term(p, s))),
            TermExpr::Snd(p) => TermExpr::Snd(Box::new(self.term(p, s))),
            TermExpr::Refl(a, x) => TermExpr::Refl(Box::new(self.ty(a, s)), Box::new(self.term(x, s))),
            TermExpr::J(j) => {
                if self.suspend_j {
                    let fv = free_vars_term(t);
                    let restricted: Subst = s.iter().filter(|(k, _)| fv.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
                    if restricted.is_empty() {
                        t.clone()
                    } else {
                        TermExpr::SuspSub(Box::new(t.clone()), restricted)
                    }
                } else {
                    TermExpr::J(Box::new(self.j(j, s)))
                }
            }
            TermExpr::SuspSub(body, inner) => {
                if self.suspend_j {
                    let fv_body = free_vars_term(body);
                    let mut merged: Subst = inner.iter().map(|(k, v)| (k.clone(), self.term(v, s))).collect();
                    for (w, v) in s {
                        if fv_body.contains(w) && !inner.contains_key(w) {
                            merged.insert(w.clone(), v.clone());
                        }
                    }
                    TermExpr::SuspSub(body.clone(), merged)
                } else {
                    let collapsed = self.term(body, inner);
                    self.term(&collapsed, s)
                }
            }
        }
    }

    fn j(&self, j: &JElim, s: &Subst) -> JElim {
        let ty = self.ty(&j.ty, s);
        // family binders x y z, renamed as a block when any would capture
        let mut inner = s.clone();
        for v in [&j.x, &j.y, &j.z] {
            inner.remove(v.as_str());
        }
        let range_fv: BTreeSet<Name> = inner.values().flat_map(free_vars_term).collect();
        let (mut x, mut y, mut z) = (j.x.clone(), j.y.clone(), j.z.clone());
        if [&x, &y, &z].iter().any(|v| range_fv.contains(v.as_str())) {
            let mut avoid = BTreeSet::new();
            all_names_type(&j.family, &mut avoid);
            for (k, v) in &inner {
                avoid.insert(k.clone());
                all_names_term(v, &mut avoid);
            }
            for v in [&mut x, &mut y, &mut z] {
                if range_fv.contains(v.as_str()) {
                    let f = fresh_name(v, &avoid);
                    avoid.insert(f.clone());
                    inner.insert(v.clone(), TermExpr::Var(f.clone()));
                    *v = f;
                }
            }
        }
        let family = self.ty(&j.family, &inner);
        let (base_var, inner_b) = self.binder(&j.base_var, s, &|out| all_names_term(&j.base, out));
        JElim {
            ty,
            x,
            y,
            z,
            family,
            base_var,
            base: self.term(&j.base, &inner_b),
            left: self.term(&j.left, s),
            right: self.term(&j.right, s),
            path: self.term(&j.path, s),
        }
    }

    fn ty(&self, t: &TypeExpr, s: &Subst) -> TypeExpr {
        if s.is_empty() {
            return t.clone();
        }
        match t {
            TypeExpr::Base(c, args) => TypeExpr::Base(c.clone(), args.iter().map(|a| self.term(a, s)).collect()),
            TypeExpr::Pi(x, a, b) | TypeExpr::Sigma(x, a, b) => {
                let (x2, inner) = self.binder(x, s, &|out| all_names_type(b, out));
                let a2 = Box::new(self.ty(a, s));
                let b2 = Box::new(self.ty(b, &inner));
                if matches!(t, TypeExpr::Pi(..)) {
                    TypeExpr::Pi(x2, a2, b2)
                } else {
                    TypeExpr::Sigma(x2, a2, b2)
                }
            }
            TypeExpr::Id(a, x, y) => TypeExpr::Id(Box::new(self.ty(a, s)), Box::new(self.term(x, s)), Box::new(self.term(y, s))),
        }
    }
}

// ---------------------------------------------------------------------------
// Alpha equivalence

pub fn alpha_eq_term(a: &TermExpr, b: &TermExpr) -> bool {
    Alpha::default().term(a, b)
}

pub fn alpha_eq_type(a: &TypeExpr, b: &TypeExpr) -> bool {
    Alpha::default().ty(a, b)
}

#[derive(Default)]
struct Alpha {
    left: Vec<Name>,
    right: Vec<Name>,
}

impl Alpha {
    fn var(&self, x: &str, y: &str) -> bool {
        let i = self.left.iter().rposition(|n| n == x);
        let j = self.right.iter().rposition(|n| n == y);
        match (i, j) {
            (Some(i), Some(j)) => i == j,
            (None, None) => x == y,
            _ => false,
        }
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

    fn term(&mut self, a: &TermExpr, b: &TermExpr) -> bool {
        use TermExpr::*;
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
            (SuspSub(t1, s1), SuspSub(t2, s2)) => {
                if s1.len() != s2.len() {
                    return false;
                }
                let k1: Vec<&Name> = s1.keys().collect();
                let k2: Vec<&Name> = s2.keys().collect();
                // try every matching of the bound domains
                let mut perm: Vec<usize> = (0..k2.len()).collect();
                loop {
                    let ok = (0..k1.len()).all(|i| self.term(&s1[k1[i]], &s2[k2[perm[i]]])) && {
                        let ys: Vec<&Name> = perm.iter().map(|&p| k2[p]).collect();
                        self.under(&k1, &ys, |s| s.term(t1, t2))
                    };
                    if ok {
                        return true;
                    }
                    if k1.len() > 6 || !next_permutation(&mut perm) {
                        return false;
                    }
                }
            }
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

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

// ---------------------------------------------------------------------------
// Printing

fn is_atomic_term(t: &TermExpr) -> bool {
    matches!(t, TermExpr::Var(_)) || matches!(t, TermExpr::Const(_, args) if args.is_empty())
}

struct ATerm<'a>(&'a TermExpr);

impl fmt::Display for ATerm<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if is_atomic_term(self.0) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "({})", self.0)
        }
    }
}

struct AType<'a>(&'a TypeExpr);

impl fmt::Display for AType<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            TypeExpr::Base(_, args) if args.is_empty() => write!(f, "{}", self.0),
            _ => write!(f, "({})", self.0),
        }
    }
}

impl fmt::Display for TermExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermExpr::Var(x) => write!(f, "{x}"),
            TermExpr::Const(c, args) => {
                write!(f, "{c}")?;
                for a in args {
                    write!(f, " {}", ATerm(a))?;
                }
                Ok(())
            }
            TermExpr::Lam(x, a, b) => write!(f, "lam ({x} : {a}) {b}"),
            TermExpr::App(g, a) => write!(f, "app {} {}", ATerm(g), ATerm(a)),
            TermExpr::Pair(a, b, ty) => write!(f, "pair {} {} as {ty}", ATerm(a), ATerm(b)),
            TermExpr::Fst(p) => write!(f, "fst {}", ATerm(p)),
            TermExpr::Snd(p) => write!(f, "snd {}", ATerm(p)),
            TermExpr::Refl(a, x) => write!(f, "refl {} {}", AType(a), ATerm(x)),
            TermExpr::J(j) => write!(
                f,
                "J {} [{} {} {} => {}] [{} => {}] {} {} {}",
                AType(&j.ty),
                j.x,
                j.y,
                j.z,
                j.family,
                j.base_var,
                j.base,
                ATerm(&j.left),
                ATerm(&j.right),
                ATerm(&j.path)
            ),
            TermExpr::SuspSub(body, s) => {
                write!(f, "({body})[")?;
                for (i, (v, c)) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}/{v}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Base(c, args) => {
                write!(f, "{c}")?;
                for a in args {
                    write!(f, " {}", ATerm(a))?;
                }
                Ok(())
            }
            TypeExpr::Pi(x, a, b) => write!(f, "Pi ({x} : {a}) {b}"),
            TypeExpr::Sigma(x, a, b) => write!(f, "Sig ({x} : {a}) {b}"),
            TypeExpr::Id(a, x, y) => write!(f, "Id {} {} {}", AType(a), ATerm(x), ATerm(y)),
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (x, t)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "({x} : {t})")?;
        }
        Ok(())
    }
}

impl fmt::Display for Judgement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ctx = self.context();
        if !ctx.is_empty() {
            write!(f, "{ctx} ⊢ ")?;
        }
        match self {
            Judgement::IsType(_, t) => write!(f, "checktype {t}"),
            Judgement::HasType(_, t, a) => write!(f, "check {t} : {a}"),
            Judgement::TypeEq(_, a, b) => write!(f, "eqtype {a} = {b}"),
            Judgement::TermEq(_, x, y, a) => write!(f, "eq {x} = {y} : {a}"),
        }
    }
}

impl fmt::Display for Decl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decl::TypeFamily { name, tele } => {
                write!(f, "assume {name} : ")?;
                if !tele.is_empty() {
                    write!(f, "{tele} ")?;
                }
                write!(f, "Type")
            }
            Decl::TermConst { name, def: Some(body), ty, .. } => write!(f, "def {name} : {ty} := {body}"),
            Decl::TermConst { name, tele, ty, def: None } => {
                write!(f, "assume {name} : ")?;
                if !tele.is_empty() {
                    write!(f, "{tele} ")?;
                }
                write!(f, "{ty}")
            }
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.signature.decls {
            writeln!(f, "{d}")?;
        }
        for g in &self.goals {
            writeln!(f, "{}", g.judgement)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Lexing and parsing

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Kw(&'static str),
    Sym(&'static str),
}

const KEYWORDS: &[&str] = &[
    "assume", "def", "check", "checktype", "eq", "Type", "Pi", "Sig", "Id", "lam", "app", "pair", "as", "fst", "snd",
    "refl", "J",
];

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex_line(text: &str, line: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            break;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word),
            };
            out.push(Token { tok, line, col });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = match two.as_str() {
            ":=" => Some(":="),
            "=>" => Some("=>"),
            _ => None,
        };
        if let Some(s) = sym {
            out.push(Token { tok: Tok::Sym(s), line, col });
            i += 2;
            continue;
        }
        let sym = match c {
            '(' => "(",
            ')' => ")",
            '[' => "[",
            ']' => "]",
            ':' => ":",
            '=' => "=",
            '/' => "/",
            ',' => ",",
            _ => return Err(ParseError { line, col, message: format!("unexpected character '{c}'") }),
        };
        out.push(Token { tok: Tok::Sym(sym), line, col });
        i += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
enum RawType {
    Base(String, Pos, Vec<RawTerm>),
    Pi(String, Box<RawType>, Box<RawType>),
    Sigma(String, Box<RawType>, Box<RawType>),
    Id(Box<RawType>, Box<RawTerm>, Box<RawTerm>),
}

#[derive(Debug, Clone)]
enum RawTerm {
    Ident(String, Pos, Vec<RawTerm>),
    Lam(String, Box<RawType>, Box<RawTerm>),
    App(Box<RawTerm>, Box<RawTerm>),
    Pair(Box<RawTerm>, Box<RawTerm>, Box<RawType>),
    Fst(Box<RawTerm>),
    Snd(Box<RawTerm>),
    Refl(Box<RawType>, Box<RawTerm>),
    J {
        ty: Box<RawType>,
        fam: [String; 3],
        family: Box<RawType>,
        base_var: String,
        base: Box<RawTerm>,
        args: Box<[RawTerm; 3]>,
    },
    Subst(Box<RawTerm>, Vec<(RawTerm, String)>),
}

struct TokStream {
    toks: Vec<Token>,
    i: usize,
    line: usize,
    end_col: usize,
}

impl TokStream {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        match self.toks.get(self.i) {
            Some(t) => Pos { line: t.line, col: t.col },
            None => Pos { line: self.line, col: self.end_col },
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let p = self.pos();
        Err(ParseError { line: p.line, col: p.col, message: msg.into() })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Kw(x)) if *x == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.i += 1;
            Ok(())
        } else {
            self.err(format!("expected '{s}'{}", self.found()))
        }
    }

    fn expect_kw(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_kw(s) {
            self.i += 1;
            Ok(())
        } else {
            self.err(format!("expected '{s}'{}", self.found()))
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(Tok::Ident(s)) => format!(", found '{s}'"),
            Some(Tok::Kw(s)) | Some(Tok::Sym(s)) => format!(", found '{s}'"),
            None => ", found end of line".to_string(),
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        let p = self.pos();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.i += 1;
                Ok((s, p))
            }
            _ => self.err(format!("expected a name{}", self.found())),
        }
    }

    fn starts_aterm(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(_))) || self.is_sym("(")
    }

    // type ::= Pi (x : type) type | Sig (x : type) type | Id atype aterm aterm | NAME {aterm}
    fn ty(&mut self) -> Result<RawType, ParseError> {
        if self.is_kw("Pi") || self.is_kw("Sig") {
            let pi = self.is_kw("Pi");
            self.i += 1;
            self.expect_sym("(")?;
            let (x, _) = self.ident()?;
            self.expect_sym(":")?;
            let a = self.ty()?;
            self.expect_sym(")")?;
            let b = self.ty()?;
            return Ok(if pi { RawType::Pi(x, Box::new(a), Box::new(b)) } else { RawType::Sigma(x, Box::new(a), Box::new(b)) });
        }
        if self.is_kw("Id") {
            self.i += 1;
            let a = self.atype()?;
            let x = self.aterm()?;
            let y = self.aterm()?;
            return Ok(RawType::Id(Box::new(a), Box::new(x), Box::new(y)));
        }
        let (c, p) = self.ident()?;
        let mut args = Vec::new();
        while self.starts_aterm() {
            args.push(self.aterm()?);
        }
        Ok(RawType::Base(c, p, args))
    }

    fn atype(&mut self) -> Result<RawType, ParseError> {
        if self.is_sym("(") {
            self.i += 1;
            let t = self.ty()?;
            self.expect_sym(")")?;
            return Ok(t);
        }
        let (c, p) = self.ident()?;
        Ok(RawType::Base(c, p, vec![]))
    }

    // aterm ::= NAME | "(" term ")", followed by any number of [term/NAME, ...]
    fn aterm(&mut self) -> Result<RawTerm, ParseError> {
        let t = if self.is_sym("(") {
            self.i += 1;
            let t = self.term()?;
            self.expect_sym(")")?;
            t
        } else {
            let (x, p) = self.ident()?;
            RawTerm::Ident(x, p, vec![])
        };
        self.postfix(t)
    }

    fn postfix(&mut self, mut t: RawTerm) -> Result<RawTerm, ParseError> {
        while self.is_sym("[") {
            self.i += 1;
            let mut entries = Vec::new();
            loop {
                let c = self.term()?;
                self.expect_sym("/")?;
                let (v, _) = self.ident()?;
                entries.push((c, v));
                if self.is_sym(",") {
                    self.i += 1;
                } else {
                    break;
                }
            }
            self.expect_sym("]")?;
            t = RawTerm::Subst(Box::new(t), entries);
        }
        Ok(t)
    }

    fn term(&mut self) -> Result<RawTerm, ParseError> {
        let kw = match self.peek() {
            Some(Tok::Kw(k)) => Some(*k),
            _ => None,
        };
        match kw {
            Some("lam") => {
                self.i += 1;
                self.expect_sym("(")?;
                let (x, _) = self.ident()?;
                self.expect_sym(":")?;
                let a = self.ty()?;
                self.expect_sym(")")?;
                let b = self.term()?;
                Ok(RawTerm::Lam(x, Box::new(a), Box::new(b)))
            }
            Some("app") => {
                self.i += 1;
                let f = self.aterm()?;
                let a = self.aterm()?;
                Ok(RawTerm::App(Box::new(f), Box::new(a)))
            }
            Some("pair") => {
                self.i += 1;
                let a = self.aterm()?;
                let b = self.aterm()?;
                self.expect_kw("as")?;
                let t = self.ty()?;
                Ok(RawTerm::Pair(Box::new(a), Box::new(b), Box::new(t)))
            }
            Some("fst") | Some("snd") => {
                self.i += 1;
                let p = self.aterm()?;
                Ok(if kw == Some("fst") { RawTerm::Fst(Box::new(p)) } else { RawTerm::Snd(Box::new(p)) })
            }
            Some("refl") => {
                self.i += 1;
                let a = self.atype()?;
                let x = self.aterm()?;
                Ok(RawTerm::Refl(Box::new(a), Box::new(x)))
            }
            Some("J") => {
                self.i += 1;
                let ty = self.atype()?;
                self.expect_sym("[")?;
                let (x, _) = self.ident()?;
                let (y, _) = self.ident()?;
                let (z, _) = self.ident()?;
                self.expect_sym("=>")?;
                let family = self.ty()?;
                self.expect_sym("]")?;
                self.expect_sym("[")?;
                let (bv, _) = self.ident()?;
                self.expect_sym("=>")?;
                let base = self.term()?;
                self.expect_sym("]")?;
                let a = self.aterm()?;
                let b = self.aterm()?;
                let p = self.aterm()?;
                Ok(RawTerm::J {
                    ty: Box::new(ty),
                    fam: [x, y, z],
                    family: Box::new(family),
                    base_var: bv,
                    base: Box::new(base),
                    args: Box::new([a, b, p]),
                })
            }
            Some(k) => self.err(format!("unexpected keyword '{k}' in term position")),
            None => {
                if self.is_sym("(") {
                    return self.aterm();
                }
                let (x, p) = self.ident()?;
                let mut args = Vec::new();
                while self.starts_aterm() {
                    args.push(self.aterm()?);
                }
                self.postfix(RawTerm::Ident(x, p, args))
            }
        }
    }

    fn tele(&mut self) -> Result<Vec<(String, RawType)>, ParseError> {
        let mut out = Vec::new();
        while self.is_sym("(") {
            self.i += 1;
            let (x, _) = self.ident()?;
            self.expect_sym(":")?;
            let t = self.ty()?;
            self.expect_sym(")")?;
            out.push((x, t));
        }
        Ok(out)
    }

    fn done(&self) -> Result<(), ParseError> {
        if self.i < self.toks.len() {
            self.err(format!("unexpected trailing input{}", self.found()))
        } else {
            Ok(())
        }
    }
}

/// Name resolution, scope checking and binder freshening.
struct Resolver<'a> {
    sig: &'a Signature,
    scope: Vec<(String, Name)>,
}

impl<'a> Resolver<'a> {
    fn avoid(&self) -> BTreeSet<Name> {
        let mut s: BTreeSet<Name> = self.sig.decls.iter().map(|d| d.name().to_string()).collect();
        for (_, n) in &self.scope {
            s.insert(n.clone());
        }
        s
    }

    fn bind(&mut self, x: &str) -> Name {
        let fresh = fresh_name(x, &self.avoid());
        self.scope.push((x.to_string(), fresh.clone()));
        fresh
    }

    fn lookup(&self, x: &str) -> Option<&Name> {
        self.scope.iter().rev().find(|(o, _)| o == x).map(|(_, n)| n)
    }

    fn err<T>(p: &Pos, msg: String) -> Result<T, ParseError> {
        Err(ParseError { line: p.line, col: p.col, message: msg })
    }

    fn ty(&mut self, t: &RawType) -> Result<TypeExpr, ParseError> {
        Ok(match t {
            RawType::Base(c, p, args) => {
                match self.sig.lookup(c) {
                    Some(Decl::TypeFamily { .. }) => {}
                    Some(_) => return Self::err(p, format!("'{c}' is a term constant, not a type family")),
                    None => return Self::err(p, format!("unbound identifier '{c}'")),
                }
                let args = args.iter().map(|a| self.term(a)).collect::<Result<_, _>>()?;
                TypeExpr::Base(c.clone(), args)
            }
            RawType::Pi(x, a, b) | RawType::Sigma(x, a, b) => {
                let a2 = self.ty(a)?;
                let x2 = self.bind(x);
                let b2 = self.ty(b);
                self.scope.pop();
                let b2 = b2?;
                if matches!(t, RawType::Pi(..)) {
                    TypeExpr::Pi(x2, Box::new(a2), Box::new(b2))
                } else {
                    TypeExpr::Sigma(x2, Box::new(a2), Box::new(b2))
                }
            }
            RawType::Id(a, x, y) => TypeExpr::Id(Box::new(self.ty(a)?), Box::new(self.term(x)?), Box::new(self.term(y)?)),
        })
    }

    fn term(&mut self, t: &RawTerm) -> Result<TermExpr, ParseError> {
        Ok(match t {
            RawTerm::Ident(x, p, args) => {
                if let Some(n) = self.lookup(x) {
                    if !args.is_empty() {
                        return Self::err(p, format!("variable '{x}' applied to arguments (use 'app')"));
                    }
                    TermExpr::Var(n.clone())
                } else {
                    match self.sig.lookup(x) {
                        Some(Decl::TermConst { .. }) => {}
                        Some(_) => return Self::err(p, format!("'{x}' is a type family, not a term")),
                        None => return Self::err(p, format!("unbound identifier '{x}'")),
                    }
                    let args = args.iter().map(|a| self.term(a)).collect::<Result<_, _>>()?;
                    TermExpr::Const(x.clone(), args)
                }
            }
            RawTerm::Lam(x, a, b) => {
                let a2 = self.ty(a)?;
                let x2 = self.bind(x);
                let b2 = self.term(b);
                self.scope.pop();
                TermExpr::Lam(x2, Box::new(a2), Box::new(b2?))
            }
            RawTerm::App(f, a) => TermExpr::App(Box::new(self.term(f)?), Box::new(self.term(a)?)),
            RawTerm::Pair(a, b, ty) => TermExpr::Pair(Box::new(self.term(a)?), Box::new(self.term(b)?), Box::new(self.ty(ty)?)),
            RawTerm::Fst(p) => TermExpr::Fst(Box::new(self.term(p)?)),
            RawTerm::Snd(p) => TermExpr::Snd(Box::new(self.term(p)?)),
            RawTerm::Refl(a, x) => TermExpr::Refl(Box::new(self.ty(a)?), Box::new(self.term(x)?)),
            RawTerm::J { ty, fam, family, base_var, base, args } => {
                let ty = self.ty(ty)?;
                let x = self.bind(&fam[0]);
                let y = self.bind(&fam[1]);
                let z = self.bind(&fam[2]);
                let family = self.ty(family);
                self.scope.truncate(self.scope.len() - 3);
                let family = family?;
                let bv = self.bind(base_var);
                let base = self.term(base);
                self.scope.pop();
                let base = base?;
                TermExpr::J(Box::new(JElim {
                    ty,
                    x,
                    y,
                    z,
                    family,
                    base_var: bv,
                    base,
                    left: self.term(&args[0])?,
                    right: self.term(&args[1])?,
                    path: self.term(&args[2])?,
                }))
            }
            RawTerm::Subst(body, entries) => {
                let mut s = Subst::new();
                let values = entries.iter().map(|(c, _)| self.term(c)).collect::<Result<Vec<_>, _>>()?;
                let n = self.scope.len();
                for ((_, v), c) in entries.iter().zip(values) {
                    let v2 = self.bind(v);
                    s.insert(v2, c);
                }
                let body = self.term(body);
                self.scope.truncate(n);
                substitute_term(&body?, &s)
            }
        })
    }
}

/// Parses a `.mltt` source file.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let mut program = Program::default();
    for (ln, text) in source.lines().enumerate() {
        let line = ln + 1;
        let toks = lex_line(text, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut ts = TokStream { toks, i: 0, line, end_col: text.chars().count() + 1 };
        let head = ts.peek().cloned();
        match head {
            Some(Tok::Kw("assume")) => {
                ts.i += 1;
                let name_pos = ts.pos();
                let (name, _) = ts.ident()?;
                ts.expect_sym(":")?;
                let tele = ts.tele()?;
                let is_family = ts.is_kw("Type");
                let result = if is_family {
                    ts.i += 1;
                    None
                } else {
                    Some(ts.ty()?)
                };
                ts.done()?;
                if program.signature.lookup(&name).is_some() {
                    return Resolver::err(&name_pos, format!("duplicate declaration '{name}'"));
                }
                let mut r = Resolver { sig: &program.signature, scope: vec![] };
                let mut ctx = Context::new();
                for (x, t) in &tele {
                    let t2 = r.ty(t)?;
                    let x2 = r.bind(x);
                    ctx.entries.push((x2, t2));
                }
                let decl = match result {
                    None => Decl::TypeFamily { name, tele: ctx },
                    Some(t) => {
                        let ty = r.ty(&t)?;
                        Decl::TermConst { name, tele: ctx, ty, def: None }
                    }
                };
                program.signature.push(decl);
            }
            Some(Tok::Kw("def")) => {
                ts.i += 1;
                let name_pos = ts.pos();
                let (name, _) = ts.ident()?;
                ts.expect_sym(":")?;
                let t = ts.ty()?;
                ts.expect_sym(":=")?;
                let body = ts.term()?;
                ts.done()?;
                if program.signature.lookup(&name).is_some() {
                    return Resolver::err(&name_pos, format!("duplicate declaration '{name}'"));
                }
                let mut r = Resolver { sig: &program.signature, scope: vec![] };
                let ty = r.ty(&t)?;
                let body = r.term(&body)?;
                program.signature.push(Decl::TermConst { name, tele: Context::new(), ty, def: Some(body) });
            }
            Some(Tok::Kw("check")) => {
                ts.i += 1;
                let t = ts.term()?;
                ts.expect_sym(":")?;
                let a = ts.ty()?;
                ts.done()?;
                let mut r = Resolver { sig: &program.signature, scope: vec![] };
                let j = Judgement::HasType(Context::new(), r.term(&t)?, r.ty(&a)?);
                program.goals.push(Goal { line, judgement: j });
            }
            Some(Tok::Kw("checktype")) => {
                ts.i += 1;
                let a = ts.ty()?;
                ts.done()?;
                let mut r = Resolver { sig: &program.signature, scope: vec![] };
                let j = Judgement::IsType(Context::new(), r.ty(&a)?);
                program.goals.push(Goal { line, judgement: j });
            }
            Some(Tok::Kw("eq")) => {
                ts.i += 1;
                let x = ts.term()?;
                ts.expect_sym("=")?;
                let y = ts.term()?;
                ts.expect_sym(":")?;
                let a = ts.ty()?;
                ts.done()?;
                let mut r = Resolver { sig: &program.signature, scope: vec![] };
                let j = Judgement::TermEq(Context::new(), r.term(&x)?, r.term(&y)?, r.ty(&a)?);
                program.goals.push(Goal { line, judgement: j });
            }
            _ => return ts.err("expected 'assume', 'def', 'check', 'checktype' or 'eq'"),
        }
    }
    Ok(program)
}

/// Parses a single term against a signature, with `ctx` variables in scope.
pub fn parse_term(sig: &Signature, ctx: &Context, text: &str) -> Result<TermExpr, ParseError> {
    let toks = lex_line(text, 1)?;
    let mut ts = TokStream { toks, i: 0, line: 1, end_col: text.chars().count() + 1 };
    let raw = ts.term()?;
    ts.done()?;
    let mut r = Resolver { sig, scope: ctx.names().map(|n| (n.clone(), n.clone())).collect() };
    r.term(&raw)
}

/// Parses a single type against a signature, with `ctx` variables in scope.
pub fn parse_type(sig: &Signature, ctx: &Context, text: &str) -> Result<TypeExpr, ParseError> {
    let toks = lex_line(text, 1)?;
    let mut ts = TokStream { toks, i: 0, line: 1, end_col: text.chars().count() + 1 };
    let raw = ts.ty()?;
    ts.done()?;
    let mut r = Resolver { sig, scope: ctx.names().map(|n| (n.clone(), n.clone())).collect() };
    r.ty(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIG: &str = "\
assume A : Type
assume a : A
assume b : A
assume c : A
assume B : (x : A) Type
assume D : (x : A) (y : A) (z : Id A x y) Type
assume d : (x : A) D x x (refl A x)
";

    fn sig() -> Signature {
        parse(SIG).unwrap().signature
    }

    #[test]
    fn assume_type() {
        let p = parse("assume A : Type").unwrap();
        assert_eq!(p.signature.decls, vec![Decl::TypeFamily { name: "A".into(), tele: Context::new() }]);
    }

    #[test]
    fn refl_goal() {
        let p = parse("assume A : Type\nassume a : A\ncheck refl A a : Id A a a").unwrap();
        match &p.goals[0].judgement {
            Judgement::HasType(_, TermExpr::Refl(..), TypeExpr::Id(..)) => {}
            other => panic!("unexpected goal {other:?}"),
        }
    }

    #[test]
    fn j_goal() {
        let src = format!("{SIG}assume p : Id A a b\ncheck J A [x y z => D x y z] [x => d x] a b p : D a b p\n");
        let p = parse(&src).unwrap();
        match &p.goals[0].judgement {
            Judgement::HasType(_, TermExpr::J(j), _) => {
                assert_eq!((j.x.as_str(), j.y.as_str(), j.z.as_str()), ("x", "y", "z"));
            }
            other => panic!("unexpected goal {other:?}"),
        }
    }

    #[test]
    fn printing() {
        let s = sig();
        let ctx = Context::new().extend("x", TypeExpr::base("A", vec![])).extend("y", TypeExpr::base("A", vec![]));
        assert_eq!(parse_term(&s, &ctx, "refl A a").unwrap().to_string(), "refl A a");
        assert_eq!(parse_type(&s, &ctx, "Id A x y").unwrap().to_string(), "Id A x y");
        let t = parse_term(&s, &Context::new(), "(J A [x y z => D x y z] [x => d x] v v (refl A v))[c/v]").unwrap();
        assert!(matches!(t, TermExpr::SuspSub(..)));
        assert_eq!(t.to_string(), "(J A [x y z => D x y z] [x => d x] v v (refl A v))[c/v]");
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("assume A : Type\nassume B : (x : A) Typo").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse("assume A : Type\nassume A : Type").unwrap_err();
        assert!(e.message.contains("duplicate"));
        let e = parse("assume B : (x : A) Type").unwrap_err();
        assert!(e.message.contains("unbound identifier 'A'"));
        assert_eq!((e.line, e.col), (1, 17));
        let e = parse("assume A : Type\ncheck $").unwrap_err();
        assert!(e.message.contains("unexpected character"));
    }

    #[test]
    fn parser_freshens_shadowing_binders() {
        let s = sig();
        let t = parse_term(&s, &Context::new(), "lam (a : A) lam (a : A) a").unwrap();
        match t {
            TermExpr::Lam(x, _, body) => match *body {
                TermExpr::Lam(y, _, inner) => {
                    assert_ne!(x, "a");
                    assert_ne!(x, y);
                    assert_eq!(*inner, TermExpr::Var(y));
                }
                _ => panic!(),
            },
            _ => panic!(),
        }
    }

    #[test]
    fn substitution_pushes_through_id_and_refl() {
        let s = sig();
        let ctx = Context::new().extend("x", TypeExpr::base("A", vec![]));
        let ty = parse_type(&s, &ctx, "Id (B x) x x").unwrap();
        let sub = single("x", TermExpr::constant("c", vec![]));
        assert_eq!(substitute_type(&ty, &sub), parse_type(&s, &Context::new(), "Id (B c) c c").unwrap());
        let r = parse_term(&s, &ctx, "refl (B x) x").unwrap();
        assert_eq!(substitute_term(&r, &sub), parse_term(&s, &Context::new(), "refl (B c) c").unwrap());
    }

    #[test]
    fn substitution_suspends_on_j() {
        let s = sig();
        let ctx = Context::new().extend("v", TypeExpr::base("A", vec![]));
        let j = parse_term(&s, &ctx, "J A [x y z => D x y z] [x => d x] v v (refl A v)").unwrap();
        let sub = single("v", TermExpr::constant("c", vec![]));
        match substitute_term(&j, &sub) {
            TermExpr::SuspSub(body, m) => {
                assert_eq!(*body, j);
                assert_eq!(m, sub);
            }
            other => panic!("expected suspension, got {other}"),
        }
        let eager = substitute_term_eager(&j, &sub);
        assert!(matches!(eager, TermExpr::J(_)));
        // closed J terms are untouched
        let closed = parse_term(&s, &Context::new(), "J A [x y z => D x y z] [x => d x] a a (refl A a)").unwrap();
        assert_eq!(substitute_term(&closed, &sub), closed);
    }

    #[test]
    fn nested_suspensions_merge() {
        let s = sig();
        let ctx = Context::new().extend("v", TypeExpr::base("A", vec![])).extend("w", TypeExpr::base("A", vec![]));
        let j = parse_term(&s, &ctx, "J A [x y z => D x y z] [x => d x] v w (refl A v)").unwrap();
        let once = substitute_term(&j, &single("v", TermExpr::var("w")));
        let twice = substitute_term(&once, &single("w", TermExpr::constant("c", vec![])));
        match twice {
            TermExpr::SuspSub(_, m) => {
                assert_eq!(m.len(), 2);
                assert_eq!(m["v"], TermExpr::constant("c", vec![]));
                assert_eq!(m["w"], TermExpr::constant("c", vec![]));
            }
            other => panic!("expected suspension, got {other}"),
        }
    }

    #[test]
    fn capture_avoidance() {
        let a = TypeExpr::base("A", vec![]);
        let body = TermExpr::Refl(Box::new(TypeExpr::base("B", vec![TermExpr::var("y")])), Box::new(TermExpr::var("y_1")));
        let t = TermExpr::Lam("y_1".into(), Box::new(a.clone()), Box::new(body));
        let out = substitute_term(&t, &single("y", TermExpr::var("y_1")));
        match &out {
            TermExpr::Lam(x, _, body) => {
                assert_ne!(x, "y_1");
                let expect = TermExpr::Refl(Box::new(TypeExpr::base("B", vec![TermExpr::var("y_1")])), Box::new(TermExpr::var(x)));
                assert_eq!(**body, expect);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn alpha_equivalence() {
        let s = sig();
        let l1 = parse_term(&s, &Context::new(), "lam (x : A) x").unwrap();
        let l2 = parse_term(&s, &Context::new(), "lam (y : A) y").unwrap();
        assert!(alpha_eq_term(&l1, &l2));
        let i1 = parse_type(&s, &Context::new(), "Id A a b").unwrap();
        let i2 = parse_type(&s, &Context::new(), "Id A b a").unwrap();
        assert!(!alpha_eq_type(&i1, &i2));
        let s1 = parse_term(&s, &Context::new(), "(J A [x y z => D x y z] [x => d x] v v (refl A v))[c/v]").unwrap();
        let s2 = parse_term(&s, &Context::new(), "(J A [p q r => D p q r] [t => d t] u u (refl A u))[c/u]").unwrap();
        assert!(alpha_eq_term(&s1, &s2));
        let s3 = parse_term(&s, &Context::new(), "(J A [p q r => D p q r] [t => d t] u u (refl A u))[b/u]").unwrap();
        assert!(!alpha_eq_term(&s1, &s3));
    }

    #[test]
    fn program_print_reparses() {
        let src = format!("{SIG}assume p : Id A a b\ndef e : A := a\ncheck J A [x y z => D x y z] [x => d x] a b p : D a b p\neq app (lam (x : A) x) a = a : A\nchecktype Sig (x : A) B x\n");
        let p = parse(&src).unwrap();
        let again = parse(&p.to_string()).unwrap();
        assert_eq!(p.signature, again.signature);
        assert_eq!(p.goals.len(), again.goals.len());
        for (g, h) in p.goals.iter().zip(&again.goals) {
            assert_eq!(g.judgement, h.judgement);
        }
    }
}
