//! Finite groupoids given by full composition tables, functors between them,
//! and the constructions needed by the homotopy semantics: products,
//! pullbacks, exponentials, arrow groupoids (path objects) and the three
//! classifiers of the groupoid model structure.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on the estimated number of candidate functors a search may visit.
pub const DEFAULT_SEARCH_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupoidError {
    #[error("invalid groupoid table: {0}")]
    InvalidTable(String),
    #[error("not a functor: {0}")]
    NotFunctor(String),
    #[error("search bound {bound:.3e} exceeds limit {limit}")]
    SizeLimit { bound: f64, limit: u64 },
    #[error("functor is not a Grothendieck fibration")]
    NotFibration,
    #[error("shape mismatch: {0}")]
    Mismatch(String),
}

/// A finite groupoid. Objects are `0..n`, morphisms are `0..m`, both dense.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FinGroupoid {
    n: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    identity: Vec<usize>,
    inv: Vec<usize>,
    out: Vec<Vec<usize>>,
    inn: Vec<Vec<usize>>,
    out_pos: Vec<usize>,
    // comp(g, f) = comp_data[comp_off[f] + out_pos[g]] whenever src(g) = dst(f)
    comp_off: Vec<usize>,
    comp_data: Vec<usize>,
}

impl fmt::Debug for FinGroupoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FinGroupoid")
            .field("objects", &self.n)
            .field("morphisms", &self.src.len())
            .finish()
    }
}

impl FinGroupoid {
    /// Builds the tables from an arrow list and a composition oracle. The
    /// caller guarantees the groupoid laws; `check_laws` verifies them.
    pub fn build(
        n: usize,
        arrows: &[(usize, usize)],
        identity: Vec<usize>,
        inv: Vec<usize>,
        mut compose: impl FnMut(usize, usize) -> usize,
    ) -> FinGroupoid {
        let m = arrows.len();
        let src: Vec<usize> = arrows.iter().map(|a| a.0).collect();
        let dst: Vec<usize> = arrows.iter().map(|a| a.1).collect();
        let mut out = vec![Vec::new(); n];
        let mut inn = vec![Vec::new(); n];
        let mut out_pos = vec![0; m];
        for k in 0..m {
            out_pos[k] = out[src[k]].len();
            out[src[k]].push(k);
            inn[dst[k]].push(k);
        }
        let mut comp_off = Vec::with_capacity(m);
        let mut comp_data = Vec::new();
        for f in 0..m {
            comp_off.push(comp_data.len());
            for &g in &out[dst[f]] {
                comp_data.push(compose(g, f));
            }
        }
        FinGroupoid { n, src, dst, identity, inv, out, inn, out_pos, comp_off, comp_data }
    }

    pub fn object_count(&self) -> usize {
        self.n
    }

    pub fn morphism_count(&self) -> usize {
        self.src.len()
    }

    pub fn src(&self, f: usize) -> usize {
        self.src[f]
    }

    pub fn dst(&self, f: usize) -> usize {
        self.dst[f]
    }

    pub fn id(&self, o: usize) -> usize {
        self.identity[o]
    }

    pub fn inv(&self, f: usize) -> usize {
        self.inv[f]
    }

    pub fn is_identity(&self, f: usize) -> bool {
        self.identity[self.src[f]] == f
    }

    /// Morphisms out of `o`, ascending.
    pub fn out(&self, o: usize) -> &[usize] {
        &self.out[o]
    }

    /// Morphisms into `o`, ascending.
    pub fn into(&self, o: usize) -> &[usize] {
        &self.inn[o]
    }

    /// `g ∘ f`, defined iff `dst(f) = src(g)`.
    pub fn comp(&self, g: usize, f: usize) -> Option<usize> {
        if self.dst[f] != self.src[g] {
            return None;
        }
        Some(self.comp_data[self.comp_off[f] + self.out_pos[g]])
    }

    /// `g ∘ f` for a pair known to be composable.
    pub fn c(&self, g: usize, f: usize) -> usize {
        debug_assert_eq!(self.dst[f], self.src[g]);
        self.comp_data[self.comp_off[f] + self.out_pos[g]]
    }

    pub fn hom(&self, a: usize, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[a].iter().copied().filter(move |&f| self.dst[f] == b)
    }

    pub fn hom_size(&self, a: usize, b: usize) -> usize {
        self.hom(a, b).count()
    }

    pub fn is_discrete(&self) -> bool {
        self.src.len() == self.n
    }

    /// Connected-component label per object (labels are the least object of the component).
    pub fn components(&self) -> Vec<usize> {
        let mut label: Vec<usize> = (0..self.n).collect();
        fn find(l: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while l[r] != r {
                r = l[r];
            }
            let mut y = x;
            while l[y] != r {
                let nx = l[y];
                l[y] = r;
                y = nx;
            }
            r
        }
        for f in 0..self.src.len() {
            let a = find(&mut label, self.src[f]);
            let b = find(&mut label, self.dst[f]);
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                label[hi] = lo;
            }
        }
        (0..self.n).map(|x| find(&mut label, x)).collect()
    }

    /// Exhaustively checks identity, associativity and inverse laws.
    pub fn check_laws(&self) -> Result<(), GroupoidError> {
        let bad = |s: String| Err(GroupoidError::InvalidTable(s));
        for o in 0..self.n {
            let i = self.identity[o];
            if self.src[i] != o || self.dst[i] != o {
                return bad(format!("identity {i} of object {o} is not an endomorphism of {o}"));
            }
        }
        for f in 0..self.src.len() {
            for &g in &self.out[self.dst[f]] {
                let gf = self.c(g, f);
                if self.src[gf] != self.src[f] || self.dst[gf] != self.dst[g] {
                    return bad(format!("composite {g}∘{f} = {gf} has wrong endpoints"));
                }
            }
            if self.c(self.identity[self.dst[f]], f) != f || self.c(f, self.identity[self.src[f]]) != f {
                return bad(format!("identity law fails at morphism {f}"));
            }
            let i = self.inv[f];
            if i >= self.src.len()
                || self.src[i] != self.dst[f]
                || self.dst[i] != self.src[f]
                || self.c(i, f) != self.identity[self.src[f]]
                || self.c(f, i) != self.identity[self.dst[f]]
            {
                return bad(format!("morphism {f} has no two-sided inverse"));
            }
        }
        for f in 0..self.src.len() {
            for &g in &self.out[self.dst[f]] {
                let gf = self.c(g, f);
                for &h in &self.out[self.dst[g]] {
                    if self.c(h, gf) != self.c(self.c(h, g), f) {
                        return bad(format!("associativity fails at ({h},{g},{f})"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Greedy generating set: a morphism is a generator when it is not in the
    /// subgroupoid generated by the identities and the earlier generators.
    pub fn generators(&self) -> Vec<usize> {
        let m = self.src.len();
        let mut inside = vec![false; m];
        let mut members: Vec<usize> = Vec::new();
        for &i in &self.identity {
            inside[i] = true;
            members.push(i);
        }
        let mut gens = Vec::new();
        for k in 0..m {
            if inside[k] {
                continue;
            }
            gens.push(k);
            let mut work = vec![k];
            inside[k] = true;
            while let Some(x) = work.pop() {
                members.push(x);
                let mut fresh = vec![self.inv[x]];
                for &y in &self.out[self.dst[x]] {
                    if inside[y] {
                        fresh.push(self.c(y, x));
                    }
                }
                for &y in &self.inn[self.src[x]] {
                    if inside[y] {
                        fresh.push(self.c(x, y));
                    }
                }
                for z in fresh {
                    if !inside[z] {
                        inside[z] = true;
                        work.push(z);
                    }
                }
            }
        }
        gens
    }

    pub fn to_json(&self) -> GroupoidJson {
        let mut comp = Vec::new();
        for f in 0..self.src.len() {
            for &g in &self.out[self.dst[f]] {
                comp.push([g, f, self.c(g, f)]);
            }
        }
        comp.sort();
        GroupoidJson {
            objects: self.n,
            morphisms: (0..self.src.len())
                .map(|k| MorphismJson { id: k, src: self.src[k], dst: self.dst[k] })
                .collect(),
            identity: self.identity.clone(),
            comp,
            inv: self.inv.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphismJson {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
}

/// Wire form of a groupoid: ids are 0-based and dense.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupoidJson {
    pub objects: usize,
    pub morphisms: Vec<MorphismJson>,
    pub identity: Vec<usize>,
    pub comp: Vec<[usize; 3]>,
    pub inv: Vec<usize>,
}

impl GroupoidJson {
    /// Checks every groupoid law and returns the validated groupoid.
    pub fn validate(&self) -> Result<FinGroupoid, GroupoidError> {
        let bad = |s: String| Err(GroupoidError::InvalidTable(s));
        let n = self.objects;
        let m = self.morphisms.len();
        let mut arrows = vec![(0, 0); m];
        let mut seen = vec![false; m];
        for mj in &self.morphisms {
            if mj.id >= m || seen[mj.id] {
                return bad(format!("morphism ids must be dense and unique (offending id {})", mj.id));
            }
            if mj.src >= n || mj.dst >= n {
                return bad(format!("morphism {} has an endpoint out of range", mj.id));
            }
            seen[mj.id] = true;
            arrows[mj.id] = (mj.src, mj.dst);
        }
        if self.identity.len() != n {
            return bad(format!("expected {n} identities, found {}", self.identity.len()));
        }
        if self.inv.len() != m {
            return bad(format!("expected {m} inverse entries, found {}", self.inv.len()));
        }
        if let Some(&i) = self.identity.iter().find(|&&i| i >= m) {
            return bad(format!("identity {i} out of range"));
        }
        if let Some(&i) = self.inv.iter().find(|&&i| i >= m) {
            return bad(format!("inverse {i} out of range"));
        }
        let mut table: HashMap<(usize, usize), usize> = HashMap::new();
        for &[g, f, gf] in &self.comp {
            if g >= m || f >= m || gf >= m {
                return bad(format!("composition entry [{g},{f},{gf}] out of range"));
            }
            if arrows[f].1 != arrows[g].0 {
                return bad(format!("composition entry for non-composable pair ({g},{f})"));
            }
            if table.insert((g, f), gf).is_some() {
                return bad(format!("duplicate composition entry for ({g},{f})"));
            }
        }
        for f in 0..m {
            for g in 0..m {
                if arrows[f].1 == arrows[g].0 && !table.contains_key(&(g, f)) {
                    return bad(format!("missing composite {g}∘{f}"));
                }
            }
        }
        let g = FinGroupoid::build(n, &arrows, self.identity.clone(), self.inv.clone(), |g, f| table[&(g, f)]);
        g.check_laws()?;
        Ok(g)
    }
}

/// Returns true iff the table satisfies every groupoid law.
pub fn validate(json: &GroupoidJson) -> bool {
    json.validate().is_ok()
}

/// Wire form of a functor (domain and codomain travel separately).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctorJson {
    pub obj: Vec<usize>,
    pub mor: Vec<usize>,
}

/// A functor between finite groupoids.
#[allow(clippy::derived_hash_with_manual_eq)]
#[derive(Clone, Debug, Hash, Eq)]
pub struct GFunctor {
    dom: Arc<FinGroupoid>,
    cod: Arc<FinGroupoid>,
    obj: Vec<usize>,
    mor: Vec<usize>,
}

impl PartialEq for GFunctor {
    fn eq(&self, other: &Self) -> bool {
        self.obj == other.obj
            && self.mor == other.mor
            && (Arc::ptr_eq(&self.dom, &other.dom) || self.dom == other.dom)
            && (Arc::ptr_eq(&self.cod, &other.cod) || self.cod == other.cod)
    }
}

impl GFunctor {
    /// Checked constructor: verifies endpoints, identities and composition.
    pub fn new(
        dom: Arc<FinGroupoid>,
        cod: Arc<FinGroupoid>,
        obj: Vec<usize>,
        mor: Vec<usize>,
    ) -> Result<GFunctor, GroupoidError> {
        let f = GFunctor { dom, cod, obj, mor };
        f.check()?;
        Ok(f)
    }

    pub(crate) fn new_unchecked(
        dom: Arc<FinGroupoid>,
        cod: Arc<FinGroupoid>,
        obj: Vec<usize>,
        mor: Vec<usize>,
    ) -> GFunctor {
        GFunctor { dom, cod, obj, mor }
    }

    pub fn from_json(dom: Arc<FinGroupoid>, cod: Arc<FinGroupoid>, json: &FunctorJson) -> Result<GFunctor, GroupoidError> {
        GFunctor::new(dom, cod, json.obj.clone(), json.mor.clone())
    }

    pub fn to_json(&self) -> FunctorJson {
        FunctorJson { obj: self.obj.clone(), mor: self.mor.clone() }
    }

    pub fn check(&self) -> Result<(), GroupoidError> {
        let bad = |s: String| Err(GroupoidError::NotFunctor(s));
        let (a, b) = (&*self.dom, &*self.cod);
        if self.obj.len() != a.n || self.mor.len() != a.morphism_count() {
            return bad("object or morphism map has the wrong length".into());
        }
        if self.obj.iter().any(|&o| o >= b.n) || self.mor.iter().any(|&k| k >= b.morphism_count()) {
            return bad("image out of range".into());
        }
        for k in 0..a.morphism_count() {
            let fk = self.mor[k];
            if b.src(fk) != self.obj[a.src(k)] || b.dst(fk) != self.obj[a.dst(k)] {
                return bad(format!("morphism {k} is sent to a morphism with wrong endpoints"));
            }
        }
        for o in 0..a.n {
            if self.mor[a.id(o)] != b.id(self.obj[o]) {
                return bad(format!("identity of object {o} is not preserved"));
            }
        }
        for f in 0..a.morphism_count() {
            for &g in a.out(a.dst(f)) {
                if self.mor[a.c(g, f)] != b.c(self.mor[g], self.mor[f]) {
                    return bad(format!("composite {g}∘{f} is not preserved"));
                }
            }
        }
        Ok(())
    }

    pub fn identity(g: &Arc<FinGroupoid>) -> GFunctor {
        GFunctor {
            dom: g.clone(),
            cod: g.clone(),
            obj: (0..g.n).collect(),
            mor: (0..g.morphism_count()).collect(),
        }
    }

    /// The unique functor into the terminal groupoid.
    pub fn to_terminal(g: &Arc<FinGroupoid>, terminal: &Arc<FinGroupoid>) -> GFunctor {
        GFunctor {
            dom: g.clone(),
            cod: terminal.clone(),
            obj: vec![0; g.n],
            mor: vec![0; g.morphism_count()],
        }
    }

    /// The functor picking out object `o` of `g` from `terminal`.
    pub fn point(terminal: &Arc<FinGroupoid>, g: &Arc<FinGroupoid>, o: usize) -> GFunctor {
        GFunctor { dom: terminal.clone(), cod: g.clone(), obj: vec![o], mor: vec![g.id(o)] }
    }

    pub fn dom(&self) -> &Arc<FinGroupoid> {
        &self.dom
    }

    pub fn cod(&self) -> &Arc<FinGroupoid> {
        &self.cod
    }

    pub fn obj(&self, o: usize) -> usize {
        self.obj[o]
    }

    pub fn mor(&self, k: usize) -> usize {
        self.mor[k]
    }

    pub fn obj_map(&self) -> &[usize] {
        &self.obj
    }

    pub fn mor_map(&self) -> &[usize] {
        &self.mor
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &GFunctor) -> GFunctor {
        assert!(
            Arc::ptr_eq(&first.cod, &self.dom) || *first.cod == *self.dom,
            "composing functors with mismatched (co)domains"
        );
        GFunctor {
            dom: first.dom.clone(),
            cod: self.cod.clone(),
            obj: first.obj.iter().map(|&o| self.obj[o]).collect(),
            mor: first.mor.iter().map(|&k| self.mor[k]).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.obj.iter().enumerate().all(|(i, &o)| i == o) && self.mor.iter().enumerate().all(|(i, &k)| i == k)
    }
}

// ---------------------------------------------------------------------------
// Basic groupoids

pub fn terminal() -> FinGroupoid {
    FinGroupoid::build(1, &[(0, 0)], vec![0], vec![0], |_, _| 0)
}

pub fn empty() -> FinGroupoid {
    FinGroupoid::build(0, &[], vec![], vec![], |_, _| unreachable!())
}

pub fn discrete(n: usize) -> FinGroupoid {
    let arrows: Vec<_> = (0..n).map(|i| (i, i)).collect();
    FinGroupoid::build(n, &arrows, (0..n).collect(), (0..n).collect(), |g, _| g)
}

/// Exactly one morphism between any two objects. Identities come first,
/// then the pairs `(i, j)`, `i ≠ j`, in lexicographic order.
pub fn codiscrete(n: usize) -> FinGroupoid {
    let mut arrows: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                arrows.push((i, j));
            }
        }
    }
    let index: HashMap<(usize, usize), usize> = arrows.iter().enumerate().map(|(k, &a)| (a, k)).collect();
    let inv = arrows.iter().map(|&(i, j)| index[&(j, i)]).collect();
    let arrows2 = arrows.clone();
    FinGroupoid::build(n, &arrows, (0..n).collect(), inv, move |g, f| index[&(arrows2[f].0, arrows2[g].1)])
}

/// The interval: two objects, `id0, id1, u: 0→1, u⁻¹: 1→0`.
pub fn interval() -> FinGroupoid {
    codiscrete(2)
}

/// One-object groupoid from a group multiplication table (`table[g][h] = g·h`,
/// element 0 the unit).
pub fn group(table: &[Vec<usize>]) -> FinGroupoid {
    let k = table.len();
    let arrows = vec![(0, 0); k];
    let inv = (0..k).map(|g| (0..k).find(|&h| table[g][h] == 0).expect("group element without inverse")).collect();
    FinGroupoid::build(1, &arrows, vec![0], inv, |g, f| table[g][f])
}

pub fn cyclic_group(k: usize) -> FinGroupoid {
    let table: Vec<Vec<usize>> = (0..k).map(|g| (0..k).map(|h| (g + h) % k).collect()).collect();
    group(&table)
}

/// Klein four-group.
pub fn klein_group() -> FinGroupoid {
    let table: Vec<Vec<usize>> = (0..4).map(|g| (0..4).map(|h| g ^ h).collect()).collect();
    group(&table)
}

/// Symmetric group on three letters.
pub fn symmetric_group3() -> FinGroupoid {
    let perms: Vec<[usize; 3]> = vec![[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 1, 0], [1, 2, 0], [2, 0, 1]];
    let index = |p: [usize; 3]| perms.iter().position(|&q| q == p).unwrap();
    let table: Vec<Vec<usize>> = perms
        .iter()
        .map(|g| perms.iter().map(|h| index([g[h[0]], g[h[1]], g[h[2]]])).collect())
        .collect();
    group(&table)
}

pub fn disjoint_union(a: &FinGroupoid, b: &FinGroupoid) -> FinGroupoid {
    let (na, ma) = (a.n, a.morphism_count());
    let mut arrows: Vec<(usize, usize)> = (0..ma).map(|k| (a.src(k), a.dst(k))).collect();
    arrows.extend((0..b.morphism_count()).map(|k| (b.src(k) + na, b.dst(k) + na)));
    let mut identity = a.identity.clone();
    identity.extend(b.identity.iter().map(|&i| i + ma));
    let mut inv = a.inv.clone();
    inv.extend(b.inv.iter().map(|&i| i + ma));
    FinGroupoid::build(na + b.n, &arrows, identity, inv, |g, f| {
        if f < ma {
            a.c(g, f)
        } else {
            b.c(g - ma, f - ma) + ma
        }
    })
}

// ---------------------------------------------------------------------------
// Products and pullbacks

/// `A × B` with its projections. Object `(a, b)` is `a·|B| + b`, morphism
/// `(f, g)` is `f·|mor B| + g`.
#[derive(Clone, Debug)]
pub struct Product {
    pub groupoid: Arc<FinGroupoid>,
    pub fst: GFunctor,
    pub snd: GFunctor,
}

impl Product {
    pub fn obj(&self, a: usize, b: usize) -> usize {
        a * self.snd.cod.n + b
    }

    pub fn mor(&self, f: usize, g: usize) -> usize {
        f * self.snd.cod.morphism_count() + g
    }

    /// `⟨f, g⟩ : X → A × B`.
    pub fn pair(&self, f: &GFunctor, g: &GFunctor) -> GFunctor {
        GFunctor {
            dom: f.dom.clone(),
            cod: self.groupoid.clone(),
            obj: (0..f.dom.n).map(|x| self.obj(f.obj[x], g.obj[x])).collect(),
            mor: (0..f.dom.morphism_count()).map(|k| self.mor(f.mor[k], g.mor[k])).collect(),
        }
    }
}

pub fn product(a: &Arc<FinGroupoid>, b: &Arc<FinGroupoid>) -> Product {
    let (nb, mb) = (b.n, b.morphism_count());
    let mut arrows = Vec::with_capacity(a.morphism_count() * mb);
    for f in 0..a.morphism_count() {
        for g in 0..mb {
            arrows.push((a.src(f) * nb + b.src(g), a.dst(f) * nb + b.dst(g)));
        }
    }
    let identity = (0..a.n * nb).map(|o| a.id(o / nb.max(1)) * mb + b.id(o % nb.max(1))).collect();
    let inv = (0..arrows.len()).map(|k| a.inv(k / mb) * mb + b.inv(k % mb)).collect();
    let p = Arc::new(FinGroupoid::build(a.n * nb, &arrows, identity, inv, |g, f| {
        a.c(g / mb, f / mb) * mb + b.c(g % mb, f % mb)
    }));
    let fst = GFunctor {
        dom: p.clone(),
        cod: a.clone(),
        obj: (0..p.n).map(|o| o / nb).collect(),
        mor: (0..p.morphism_count()).map(|k| k / mb).collect(),
    };
    let snd = GFunctor {
        dom: p.clone(),
        cod: b.clone(),
        obj: (0..p.n).map(|o| o % nb).collect(),
        mor: (0..p.morphism_count()).map(|k| k % mb).collect(),
    };
    Product { groupoid: p, fst, snd }
}

pub fn diagonal(a: &Arc<FinGroupoid>) -> (Product, GFunctor) {
    let prod = product(a, a);
    let id = GFunctor::identity(a);
    let d = prod.pair(&id, &id);
    (prod, d)
}

/// A subgroupoid of a product `X × Y` given by explicit object and morphism
/// pairs, with index lookups. Pullbacks and interpreted types both use it.
#[derive(Clone, Debug)]
pub struct PairGroupoid {
    pub groupoid: Arc<FinGroupoid>,
    pub left: GFunctor,
    pub right: GFunctor,
    obj_pairs: Vec<(usize, usize)>,
    mor_pairs: Vec<(usize, usize)>,
    obj_index: HashMap<(usize, usize), usize>,
    mor_index: HashMap<(usize, usize), usize>,
}

impl PairGroupoid {
    /// Builds the subgroupoid of `x × y` whose objects satisfy `obj_ok` and
    /// whose morphisms (between kept objects) satisfy `mor_ok`. The predicates
    /// must describe a subgroupoid (closed under identities, composition and
    /// inverses). Objects are ordered `x`-major.
    pub fn build(
        x: &Arc<FinGroupoid>,
        y: &Arc<FinGroupoid>,
        mut obj_ok: impl FnMut(usize, usize) -> bool,
        mut mor_ok: impl FnMut(usize, usize) -> bool,
    ) -> PairGroupoid {
        let mut obj_pairs = Vec::new();
        let mut obj_index = HashMap::new();
        for a in 0..x.n {
            for b in 0..y.n {
                if obj_ok(a, b) {
                    obj_index.insert((a, b), obj_pairs.len());
                    obj_pairs.push((a, b));
                }
            }
        }
        let mut mor_pairs = Vec::new();
        let mut mor_index = HashMap::new();
        let mut arrows = Vec::new();
        let mut by_x = vec![Vec::new(); x.n];
        for (i, &(a, _)) in obj_pairs.iter().enumerate() {
            by_x[a].push(i);
        }
        for f in 0..x.morphism_count() {
            for &b in &by_x[x.src(f)] {
                let b0 = obj_pairs[b].1;
                for &g in y.out(b0) {
                    if let Some(&t) = obj_index.get(&(x.dst(f), y.dst(g))) {
                        if mor_ok(f, g) {
                            mor_index.insert((f, g), mor_pairs.len());
                            mor_pairs.push((f, g));
                            arrows.push((b, t));
                        }
                    }
                }
            }
        }
        let identity = obj_pairs.iter().map(|&(a, b)| mor_index[&(x.id(a), y.id(b))]).collect();
        let inv = mor_pairs.iter().map(|&(f, g)| mor_index[&(x.inv(f), y.inv(g))]).collect();
        let groupoid = Arc::new(FinGroupoid::build(obj_pairs.len(), &arrows, identity, inv, |g, f| {
            let (g1, g2) = mor_pairs[g];
            let (f1, f2) = mor_pairs[f];
            mor_index[&(x.c(g1, f1), y.c(g2, f2))]
        }));
        let left = GFunctor {
            dom: groupoid.clone(),
            cod: x.clone(),
            obj: obj_pairs.iter().map(|p| p.0).collect(),
            mor: mor_pairs.iter().map(|p| p.0).collect(),
        };
        let right = GFunctor {
            dom: groupoid.clone(),
            cod: y.clone(),
            obj: obj_pairs.iter().map(|p| p.1).collect(),
            mor: mor_pairs.iter().map(|p| p.1).collect(),
        };
        PairGroupoid { groupoid, left, right, obj_pairs, mor_pairs, obj_index, mor_index }
    }

    pub fn obj_index(&self, a: usize, b: usize) -> Option<usize> {
        self.obj_index.get(&(a, b)).copied()
    }

    pub fn mor_index(&self, f: usize, g: usize) -> Option<usize> {
        self.mor_index.get(&(f, g)).copied()
    }

    pub fn obj_pair(&self, o: usize) -> (usize, usize) {
        self.obj_pairs[o]
    }

    pub fn mor_pair(&self, k: usize) -> (usize, usize) {
        self.mor_pairs[k]
    }

    /// `⟨f, g⟩ : W → self`, or `None` when some pair is not in the subgroupoid.
    pub fn pair(&self, f: &GFunctor, g: &GFunctor) -> Option<GFunctor> {
        let obj = (0..f.dom.n).map(|w| self.obj_index(f.obj[w], g.obj[w])).collect::<Option<Vec<_>>>()?;
        let mor = (0..f.dom.morphism_count())
            .map(|k| self.mor_index(f.mor[k], g.mor[k]))
            .collect::<Option<Vec<_>>>()?;
        Some(GFunctor { dom: f.dom.clone(), cod: self.groupoid.clone(), obj, mor })
    }
}

/// `A ×_C B` for `f: A → C`, `g: B → C`; `left`/`right` are the projections.
pub fn pullback(f: &GFunctor, g: &GFunctor) -> PairGroupoid {
    assert!(*f.cod == *g.cod, "pullback of functors with different codomains");
    PairGroupoid::build(&f.dom, &g.dom, |a, b| f.obj[a] == g.obj[b], |x, y| f.mor[x] == g.mor[y])
}

/// Full subgroupoid on `objects` (kept in the given order) with its inclusion.
pub fn full_subgroupoid(g: &Arc<FinGroupoid>, objects: &[usize]) -> (Arc<FinGroupoid>, GFunctor) {
    let pos: HashMap<usize, usize> = objects.iter().enumerate().map(|(i, &o)| (o, i)).collect();
    let mut mors = Vec::new();
    let mut arrows = Vec::new();
    for &o in objects {
        for &k in g.out(o) {
            if let Some(&t) = pos.get(&g.dst(k)) {
                arrows.push((pos[&o], t));
                mors.push(k);
            }
        }
    }
    let mpos: HashMap<usize, usize> = mors.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let identity = objects.iter().map(|&o| mpos[&g.id(o)]).collect();
    let inv = mors.iter().map(|&k| mpos[&g.inv(k)]).collect();
    let sub = Arc::new(FinGroupoid::build(objects.len(), &arrows, identity, inv, |a, b| mpos[&g.c(mors[a], mors[b])]));
    let incl = GFunctor { dom: sub.clone(), cod: g.clone(), obj: objects.to_vec(), mor: mors };
    (sub, incl)
}

/// Relabels objects by `perm` (object `o` becomes `perm[o]`) and morphisms by
/// `mperm`; returns the relabelled groupoid and the isomorphism onto it.
pub fn relabel(g: &Arc<FinGroupoid>, perm: &[usize], mperm: &[usize]) -> (Arc<FinGroupoid>, GFunctor) {
    let m = g.morphism_count();
    let mut back = vec![0; m];
    for (k, &p) in mperm.iter().enumerate() {
        back[p] = k;
    }
    let arrows: Vec<_> = (0..m).map(|p| (perm[g.src(back[p])], perm[g.dst(back[p])])).collect();
    let mut identity = vec![0; g.n];
    for o in 0..g.n {
        identity[perm[o]] = mperm[g.id(o)];
    }
    let inv = (0..m).map(|p| mperm[g.inv(back[p])]).collect();
    let h = Arc::new(FinGroupoid::build(g.n, &arrows, identity, inv, |a, b| mperm[g.c(back[a], back[b])]));
    let iso = GFunctor { dom: g.clone(), cod: h.clone(), obj: perm.to_vec(), mor: mperm.to_vec() };
    (h, iso)
}

// ---------------------------------------------------------------------------
// Arrow groupoids and path objects

/// The arrow groupoid of `A`: objects are the morphisms of `A`; a morphism
/// `f → g` is a pair `(φ, ψ)` with `ψ∘f = g∘φ`. Since `ψ` is determined by
/// `φ`, morphisms are indexed by `(f, g, φ)`.
#[derive(Clone, Debug)]
pub struct ArrowGroupoid {
    pub base: Arc<FinGroupoid>,
    pub groupoid: Arc<FinGroupoid>,
    phi: Vec<usize>,
    psi: Vec<usize>,
    index: HashMap<(usize, usize, usize), usize>,
}

impl ArrowGroupoid {
    pub fn new(a: &Arc<FinGroupoid>) -> ArrowGroupoid {
        let m = a.morphism_count();
        let mut arrows = Vec::new();
        let mut phi = Vec::new();
        let mut psi = Vec::new();
        let mut index = HashMap::new();
        for f in 0..m {
            for g in 0..m {
                for p in a.hom(a.src(f), a.src(g)) {
                    let q = a.c(a.c(g, p), a.inv(f));
                    index.insert((f, g, p), arrows.len());
                    arrows.push((f, g));
                    phi.push(p);
                    psi.push(q);
                }
            }
        }
        let identity = (0..m).map(|f| index[&(f, f, a.id(a.src(f)))]).collect();
        let inv = (0..arrows.len()).map(|k| index[&(arrows[k].1, arrows[k].0, a.inv(phi[k]))]).collect();
        let groupoid = Arc::new(FinGroupoid::build(m, &arrows, identity, inv, |g, f| {
            index[&(arrows[f].0, arrows[g].1, a.c(phi[g], phi[f]))]
        }));
        ArrowGroupoid { base: a.clone(), groupoid, phi, psi, index }
    }

    /// Source-side component `φ` of a morphism of the arrow groupoid.
    pub fn phi(&self, k: usize) -> usize {
        self.phi[k]
    }

    /// Target-side component `ψ`.
    pub fn psi(&self, k: usize) -> usize {
        self.psi[k]
    }

    /// The morphism `f → g` with source component `φ`.
    pub fn mor(&self, f: usize, g: usize, phi: usize) -> Option<usize> {
        self.index.get(&(f, g, phi)).copied()
    }

    /// `r : A → A^I`, constant paths.
    pub fn r(&self) -> GFunctor {
        let a = &self.base;
        GFunctor {
            dom: a.clone(),
            cod: self.groupoid.clone(),
            obj: (0..a.n).map(|o| a.id(o)).collect(),
            mor: (0..a.morphism_count())
                .map(|b| self.index[&(a.id(a.src(b)), a.id(a.dst(b)), b)])
                .collect(),
        }
    }

    /// Endpoint map `A^I → X` for a groupoid `X` containing pairs of `A`
    /// objects/morphisms, given by `pair_obj`/`pair_mor`.
    fn endpoints(&self, cod: Arc<FinGroupoid>, pair_obj: impl Fn(usize, usize) -> usize, pair_mor: impl Fn(usize, usize) -> usize) -> GFunctor {
        let a = &self.base;
        let p = &self.groupoid;
        GFunctor {
            dom: p.clone(),
            cod,
            obj: (0..p.n).map(|f| pair_obj(a.src(f), a.dst(f))).collect(),
            mor: (0..p.morphism_count()).map(|k| pair_mor(self.phi[k], self.psi[k])).collect(),
        }
    }

    /// `p : A^I → A × A`, source and target.
    pub fn p(&self, prod: &Product) -> GFunctor {
        self.endpoints(prod.groupoid.clone(), |x, y| prod.obj(x, y), |f, g| prod.mor(f, g))
    }
}

/// A path object `A → A^I → A × A` together with the product it lands in.
#[derive(Clone, Debug)]
pub struct PathObject {
    pub arrows: ArrowGroupoid,
    pub product: Product,
    pub r: GFunctor,
    pub p: GFunctor,
}

impl PathObject {
    pub fn total(&self) -> &Arc<FinGroupoid> {
        &self.arrows.groupoid
    }
}

pub fn arrow_groupoid(a: &Arc<FinGroupoid>) -> PathObject {
    let arrows = ArrowGroupoid::new(a);
    let product = product(a, a);
    let r = arrows.r();
    let p = arrows.p(&product);
    PathObject { arrows, product, r, p }
}

/// `f^I : A^I → B^I`, acting by `f` on both components.
pub fn arrow_functor(f: &GFunctor, source: &ArrowGroupoid, target: &ArrowGroupoid) -> GFunctor {
    let pa = &source.groupoid;
    GFunctor {
        dom: pa.clone(),
        cod: target.groupoid.clone(),
        obj: (0..pa.n).map(|k| f.mor[k]).collect(),
        mor: (0..pa.morphism_count())
            .map(|k| {
                target
                    .mor(f.mor[pa.src(k)], f.mor[pa.dst(k)], f.mor[source.phi[k]])
                    .expect("image of an arrow-groupoid morphism")
            })
            .collect(),
    }
}

/// Fibrewise path object of a fibration `g : B → Γ`: the full subgroupoid of
/// `B^I` on vertical arrows, with `r_g : B → P` and `p_g : P → B ×_Γ B`.
#[derive(Clone, Debug)]
pub struct RelativePathObject {
    pub fibration: GFunctor,
    pub arrows: ArrowGroupoid,
    pub total: Arc<FinGroupoid>,
    /// Inclusion of `P` into the full arrow groupoid of `B`.
    pub inclusion: GFunctor,
    pub pairs: PairGroupoid,
    pub r: GFunctor,
    pub p: GFunctor,
}

impl RelativePathObject {
    /// `P → Γ`.
    pub fn to_base(&self) -> GFunctor {
        self.fibration.after(&self.pairs.left).after(&self.p)
    }

    /// Fibrewise diagonal `B → B ×_Γ B`.
    pub fn diagonal(&self) -> GFunctor {
        let id = GFunctor::identity(self.fibration.dom());
        self.pairs.pair(&id, &id).expect("diagonal lands in the fibre product")
    }
}

pub fn relative_path_object(g: &GFunctor) -> Result<RelativePathObject, GroupoidError> {
    if !classify(g).grothendieck_fibration {
        return Err(GroupoidError::NotFibration);
    }
    let b = g.dom().clone();
    let arrows = ArrowGroupoid::new(&b);
    let gamma = g.cod();
    let vertical: Vec<usize> = (0..b.morphism_count()).filter(|&v| gamma.is_identity(g.mor(v))).collect();
    let (total, inclusion) = full_subgroupoid(&arrows.groupoid, &vertical);
    let pairs = pullback(g, g);
    let p = GFunctor {
        dom: total.clone(),
        cod: pairs.groupoid.clone(),
        obj: vertical
            .iter()
            .map(|&v| pairs.obj_index(b.src(v), b.dst(v)).expect("vertical arrow endpoints lie over one object"))
            .collect(),
        mor: inclusion
            .mor
            .iter()
            .map(|&k| pairs.mor_index(arrows.phi(k), arrows.psi(k)).expect("components lie over one morphism"))
            .collect(),
    };
    let pos: HashMap<usize, usize> = vertical.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mpos: HashMap<usize, usize> = inclusion.mor.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let full_r = arrows.r();
    let r = GFunctor {
        dom: b.clone(),
        cod: total.clone(),
        obj: full_r.obj.iter().map(|o| pos[o]).collect(),
        mor: full_r.mor.iter().map(|k| mpos[k]).collect(),
    };
    Ok(RelativePathObject { fibration: g.clone(), arrows, total, inclusion, pairs, r, p })
}

// ---------------------------------------------------------------------------
// Classification

/// Membership of a functor in the classes of the groupoid model structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapClass {
    pub injective_on_objects: bool,
    pub grothendieck_fibration: bool,
    pub equivalence: bool,
    pub cofibration: bool,
    pub fibration: bool,
    pub weak_equivalence: bool,
    pub acyclic_cofibration: bool,
    pub acyclic_fibration: bool,
}

impl MapClass {
    fn from_flags(injective_on_objects: bool, grothendieck_fibration: bool, equivalence: bool) -> MapClass {
        MapClass {
            injective_on_objects,
            grothendieck_fibration,
            equivalence,
            cofibration: injective_on_objects,
            fibration: grothendieck_fibration,
            weak_equivalence: equivalence,
            acyclic_cofibration: injective_on_objects && equivalence,
            acyclic_fibration: grothendieck_fibration && equivalence,
        }
    }
}

pub fn is_injective_on_objects(f: &GFunctor) -> bool {
    let mut seen = HashSet::new();
    f.obj.iter().all(|o| seen.insert(*o))
}

/// Every codomain morphism out of `f(e)` lifts to a morphism out of `e`.
pub fn is_fibration(f: &GFunctor) -> bool {
    let (a, b) = (&f.dom, &f.cod);
    (0..a.n).all(|e| {
        let images: HashSet<usize> = a.out(e).iter().map(|&k| f.mor[k]).collect();
        b.out(f.obj[e]).iter().all(|beta| images.contains(beta))
    })
}

pub fn is_fully_faithful(f: &GFunctor) -> bool {
    let (a, b) = (&f.dom, &f.cod);
    for x in 0..a.n {
        for y in 0..a.n {
            let imgs: HashSet<usize> = a.hom(x, y).map(|k| f.mor[k]).collect();
            let count = a.hom_size(x, y);
            if imgs.len() != count || count != b.hom_size(f.obj[x], f.obj[y]) {
                return false;
            }
        }
    }
    true
}

pub fn is_essentially_surjective(f: &GFunctor) -> bool {
    let comp = f.cod.components();
    let hit: HashSet<usize> = f.obj.iter().map(|&o| comp[o]).collect();
    comp.iter().all(|c| hit.contains(c))
}

pub fn is_equivalence(f: &GFunctor) -> bool {
    is_fully_faithful(f) && is_essentially_surjective(f)
}

pub fn classify(f: &GFunctor) -> MapClass {
    MapClass::from_flags(is_injective_on_objects(f), is_fibration(f), is_equivalence(f))
}

// ---------------------------------------------------------------------------
// Functor enumeration

/// Constrained enumeration of functors `dom → cod` in lexicographic order of
/// (object map, morphism map).
#[derive(Clone)]
pub struct FunctorSearch {
    dom: Arc<FinGroupoid>,
    cod: Arc<FinGroupoid>,
    fixed_obj: Vec<Option<usize>>,
    fixed_mor: Vec<Option<usize>>,
    over: Option<(GFunctor, GFunctor)>,
    inconsistent: bool,
    iso: bool,
    limit: u64,
}

impl FunctorSearch {
    pub fn new(dom: &Arc<FinGroupoid>, cod: &Arc<FinGroupoid>) -> FunctorSearch {
        FunctorSearch {
            dom: dom.clone(),
            cod: cod.clone(),
            fixed_obj: vec![None; dom.n],
            fixed_mor: vec![None; dom.morphism_count()],
            over: None,
            inconsistent: false,
            iso: false,
            limit: DEFAULT_SEARCH_LIMIT,
        }
    }

    /// Requires `F ∘ f = h` for `f : X → dom`, `h : X → cod`.
    pub fn through(mut self, f: &GFunctor, h: &GFunctor) -> FunctorSearch {
        for x in 0..f.dom.n {
            self.fix_obj(f.obj[x], h.obj[x]);
        }
        for k in 0..f.dom.morphism_count() {
            self.fix_mor(f.mor[k], h.mor[k]);
        }
        self
    }

    pub fn fix_obj(&mut self, o: usize, v: usize) {
        match self.fixed_obj[o] {
            Some(w) if w != v => self.inconsistent = true,
            _ => self.fixed_obj[o] = Some(v),
        }
    }

    pub fn fix_mor(&mut self, k: usize, v: usize) {
        match self.fixed_mor[k] {
            Some(w) if w != v => self.inconsistent = true,
            _ => self.fixed_mor[k] = Some(v),
        }
    }

    /// Requires `g ∘ F = k` for `g : cod → X`, `k : dom → X`.
    pub fn over(mut self, g: &GFunctor, k: &GFunctor) -> FunctorSearch {
        self.over = Some((g.clone(), k.clone()));
        self
    }

    /// Restricts to isomorphisms.
    pub fn isomorphisms(mut self) -> FunctorSearch {
        self.iso = true;
        self
    }

    pub fn limit(mut self, limit: u64) -> FunctorSearch {
        self.limit = limit;
        self
    }

    fn obj_candidates(&self, a: usize) -> Vec<usize> {
        if let Some(v) = self.fixed_obj[a] {
            return vec![v];
        }
        (0..self.cod.n)
            .filter(|&b| self.over.as_ref().is_none_or(|(g, k)| g.obj[b] == k.obj[a]))
            .collect()
    }

    /// Upper bound on the number of candidate functors:
    /// `Π_a |candidates(a)| · (max hom size)^(free generators)`.
    pub fn bound(&self) -> f64 {
        let objs: f64 = (0..self.dom.n)
            .map(|a| {
                let c = self.obj_candidates(a).len();
                if self.iso {
                    c.saturating_sub(a).max(1) as f64
                } else {
                    c as f64
                }
            })
            .product();
        // with an `over` constraint a generator can only go to morphisms over
        // one fixed base morphism
        let mut max_hom = 0usize;
        for b in 0..self.cod.n {
            let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
            for &k in self.cod.out(b) {
                let base = self.over.as_ref().map_or(0, |(g, _)| g.mor[k]);
                *counts.entry((self.cod.dst(k), base)).or_default() += 1;
            }
            max_hom = max_hom.max(counts.values().copied().max().unwrap_or(0));
        }
        let free = self.dom.generators().iter().filter(|&&k| self.fixed_mor[k].is_none()).count();
        objs * (max_hom.max(1) as f64).powi(free as i32)
    }

    fn guard(&self) -> Result<(), GroupoidError> {
        let bound = self.bound();
        if bound > self.limit as f64 {
            return Err(GroupoidError::SizeLimit { bound, limit: self.limit });
        }
        Ok(())
    }

    /// Visits every solution in lexicographic order until `visit` returns false.
    pub fn for_each(&self, mut visit: impl FnMut(GFunctor) -> bool) -> Result<(), GroupoidError> {
        self.guard()?;
        if self.inconsistent {
            return Ok(());
        }
        let cands: Vec<Vec<usize>> = (0..self.dom.n).map(|a| self.obj_candidates(a)).collect();
        let mut obj = vec![usize::MAX; self.dom.n];
        let mut used = vec![false; self.cod.n];
        self.objects(0, &cands, &mut obj, &mut used, &mut visit);
        Ok(())
    }

    fn objects(
        &self,
        a: usize,
        cands: &[Vec<usize>],
        obj: &mut Vec<usize>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(GFunctor) -> bool,
    ) -> bool {
        if a == self.dom.n {
            return self.morphisms(obj, visit);
        }
        for &b in &cands[a] {
            if self.iso && used[b] {
                continue;
            }
            obj[a] = b;
            if self.objects_ok(a, obj) {
                used[b] = true;
                let go_on = self.objects(a + 1, cands, obj, used, visit);
                used[b] = false;
                if !go_on {
                    return false;
                }
            }
        }
        obj[a] = usize::MAX;
        true
    }

    // Checks the newly placed object `a` against every earlier object.
    fn objects_ok(&self, a: usize, obj: &[usize]) -> bool {
        let (d, c) = (&*self.dom, &*self.cod);
        let check = |k: usize| -> bool {
            let (s, t) = (obj[d.src(k)], obj[d.dst(k)]);
            if let Some(v) = self.fixed_mor[k] {
                return c.src(v) == s && c.dst(v) == t;
            }
            match &self.over {
                Some((g, kk)) => c.hom(s, t).any(|beta| g.mor[beta] == kk.mor[k]),
                None => c.hom(s, t).next().is_some(),
            }
        };
        for &k in d.out(a) {
            if d.dst(k) <= a && !check(k) {
                return false;
            }
        }
        for &k in d.into(a) {
            if d.src(k) < a && !check(k) {
                return false;
            }
        }
        if self.iso {
            for x in 0..=a {
                if d.hom_size(x, a) != c.hom_size(obj[x], obj[a]) || d.hom_size(a, x) != c.hom_size(obj[a], obj[x]) {
                    return false;
                }
            }
        }
        true
    }

    fn morphisms(&self, obj: &[usize], visit: &mut dyn FnMut(GFunctor) -> bool) -> bool {
        let d = &*self.dom;
        let mut state = MorState { mor: vec![usize::MAX; d.morphism_count()], trail: Vec::new() };
        for o in 0..d.n {
            if !self.assign(&mut state, obj, d.id(o), self.cod.id(obj[o])) {
                return true;
            }
        }
        for k in 0..d.morphism_count() {
            if let Some(v) = self.fixed_mor[k] {
                if !self.assign(&mut state, obj, k, v) {
                    return true;
                }
            }
        }
        self.branch(0, obj, &mut state, visit)
    }

    fn branch(&self, from: usize, obj: &[usize], state: &mut MorState, visit: &mut dyn FnMut(GFunctor) -> bool) -> bool {
        let d = &*self.dom;
        let c = &*self.cod;
        let mut k = from;
        while k < d.morphism_count() && state.mor[k] != usize::MAX {
            k += 1;
        }
        if k == d.morphism_count() {
            if self.iso {
                let mut seen = HashSet::new();
                if !state.mor.iter().all(|v| seen.insert(*v)) || seen.len() != c.morphism_count() {
                    return true;
                }
            }
            return visit(GFunctor {
                dom: self.dom.clone(),
                cod: self.cod.clone(),
                obj: obj.to_vec(),
                mor: state.mor.clone(),
            });
        }
        let cands: Vec<usize> = c
            .hom(obj[d.src(k)], obj[d.dst(k)])
            .filter(|&beta| self.over.as_ref().is_none_or(|(g, kk)| g.mor[beta] == kk.mor[k]))
            .collect();
        for beta in cands {
            let mark = state.trail.len();
            if self.assign(state, obj, k, beta) && !self.branch(k + 1, obj, state, visit) {
                return false;
            }
            state.undo(mark);
        }
        true
    }

    /// Assigns `k ↦ v` and propagates through inverses and composites.
    fn assign(&self, state: &mut MorState, obj: &[usize], k: usize, v: usize) -> bool {
        let d = &*self.dom;
        let c = &*self.cod;
        let mut work = vec![(k, v)];
        while let Some((k, v)) = work.pop() {
            let cur = state.mor[k];
            if cur != usize::MAX {
                if cur != v {
                    return false;
                }
                continue;
            }
            if c.src(v) != obj[d.src(k)] || c.dst(v) != obj[d.dst(k)] {
                return false;
            }
            if let Some(fv) = self.fixed_mor[k] {
                if fv != v {
                    return false;
                }
            }
            if let Some((g, kk)) = &self.over {
                if g.mor[v] != kk.mor[k] {
                    return false;
                }
            }
            state.mor[k] = v;
            state.trail.push(k);
            work.push((d.inv(k), c.inv(v)));
            for &n in d.out(d.dst(k)) {
                let w = state.mor[n];
                if w != usize::MAX {
                    work.push((d.c(n, k), c.c(w, v)));
                }
            }
            for &n in d.into(d.src(k)) {
                let w = state.mor[n];
                if w != usize::MAX {
                    work.push((d.c(k, n), c.c(v, w)));
                }
            }
        }
        true
    }

    pub fn first(&self) -> Result<Option<GFunctor>, GroupoidError> {
        let mut found = None;
        self.for_each(|f| {
            found = Some(f);
            false
        })?;
        Ok(found)
    }

    pub fn all(&self) -> Result<Vec<GFunctor>, GroupoidError> {
        let mut found = Vec::new();
        self.for_each(|f| {
            found.push(f);
            true
        })?;
        Ok(found)
    }

    pub fn count(&self) -> Result<usize, GroupoidError> {
        let mut n = 0;
        self.for_each(|_| {
            n += 1;
            true
        })?;
        Ok(n)
    }
}

struct MorState {
    mor: Vec<usize>,
    trail: Vec<usize>,
}

impl MorState {
    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let k = self.trail.pop().unwrap();
            self.mor[k] = usize::MAX;
        }
    }
}

/// All functors `a → b`, lexicographically ordered.
pub fn enumerate_functors(a: &Arc<FinGroupoid>, b: &Arc<FinGroupoid>, limit: u64) -> Result<Vec<GFunctor>, GroupoidError> {
    FunctorSearch::new(a, b).limit(limit).all()
}

/// An isomorphism `a → b`, optionally commuting with maps `pa : a → X`, `pb : b → X`.
pub fn find_iso(
    a: &Arc<FinGroupoid>,
    b: &Arc<FinGroupoid>,
    over: Option<(&GFunctor, &GFunctor)>,
    limit: u64,
) -> Result<Option<GFunctor>, GroupoidError> {
    if a.n != b.n || a.morphism_count() != b.morphism_count() {
        return Ok(None);
    }
    let mut s = FunctorSearch::new(a, b).isomorphisms().limit(limit);
    if let Some((pa, pb)) = over {
        s = s.over(pb, pa);
    }
    s.first()
}

// ---------------------------------------------------------------------------
// Natural isomorphisms and exponentials

/// A natural isomorphism between parallel functors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NatIso {
    pub source: GFunctor,
    pub target: GFunctor,
    pub components: Vec<usize>,
}

impl NatIso {
    pub fn check(&self) -> bool {
        let (f, g) = (&self.source, &self.target);
        let (a, b) = (&*f.dom, &*f.cod);
        if self.components.len() != a.n {
            return false;
        }
        (0..a.n).all(|x| {
            let c = self.components[x];
            b.src(c) == f.obj[x] && b.dst(c) == g.obj[x]
        }) && (0..a.morphism_count()).all(|k| {
            b.c(g.mor[k], self.components[a.src(k)]) == b.c(self.components[a.dst(k)], f.mor[k])
        })
    }

    /// The same data as a functor `A → B^I` into the arrow groupoid of `B`.
    pub fn as_path(&self, arrows: &ArrowGroupoid) -> GFunctor {
        let a = &self.source.dom;
        GFunctor {
            dom: a.clone(),
            cod: arrows.groupoid.clone(),
            obj: self.components.clone(),
            mor: (0..a.morphism_count())
                .map(|k| {
                    arrows
                        .mor(self.components[a.src(k)], self.components[a.dst(k)], self.source.mor[k])
                        .expect("naturality square")
                })
                .collect(),
        }
    }
}

/// Natural isomorphisms `f ⇒ g` in lexicographic order of components, each
/// component satisfying `allowed`. Stops after `max` results when given.
pub fn natural_isos(
    f: &GFunctor,
    g: &GFunctor,
    allowed: &dyn Fn(usize) -> bool,
    max: Option<usize>,
) -> Vec<NatIso> {
    let a = f.dom.clone();
    let b = f.cod.clone();
    let mut out = Vec::new();
    let mut comps = vec![usize::MAX; a.n];
    fn go(
        x: usize,
        a: &FinGroupoid,
        b: &FinGroupoid,
        f: &GFunctor,
        g: &GFunctor,
        allowed: &dyn Fn(usize) -> bool,
        comps: &mut Vec<usize>,
        out: &mut Vec<NatIso>,
        max: Option<usize>,
    ) -> bool {
        if x == a.n {
            out.push(NatIso { source: f.clone(), target: g.clone(), components: comps.clone() });
            return max.is_none_or(|m| out.len() < m);
        }
        let cands: Vec<usize> = b.hom(f.obj[x], g.obj[x]).filter(|&c| allowed(c)).collect();
        for c in cands {
            comps[x] = c;
            let natural = a
                .out(x)
                .iter()
                .filter(|&&k| a.dst(k) <= x)
                .chain(a.into(x).iter().filter(|&&k| a.src(k) < x))
                .all(|&k| b.c(g.mor[k], comps[a.src(k)]) == b.c(comps[a.dst(k)], f.mor[k]));
            if natural && !go(x + 1, a, b, f, g, allowed, comps, out, max) {
                return false;
            }
        }
        comps[x] = usize::MAX;
        true
    }
    go(0, &a, &b, f, g, allowed, &mut comps, &mut out, max);
    out
}

/// The functor groupoid `B^A`: objects are functors, morphisms natural isos.
#[derive(Clone, Debug)]
pub struct Exponential {
    pub groupoid: Arc<FinGroupoid>,
    pub functors: Vec<GFunctor>,
    pub transformations: Vec<NatIso>,
}

pub fn exponential(a: &Arc<FinGroupoid>, b: &Arc<FinGroupoid>, limit: u64) -> Result<Exponential, GroupoidError> {
    let functors = enumerate_functors(a, b, limit)?;
    let mut transformations = Vec::new();
    let mut arrows = Vec::new();
    let mut index: HashMap<(usize, usize, Vec<usize>), usize> = HashMap::new();
    for (i, f) in functors.iter().enumerate() {
        for (j, g) in functors.iter().enumerate() {
            for t in natural_isos(f, g, &|_| true, None) {
                index.insert((i, j, t.components.clone()), arrows.len());
                arrows.push((i, j));
                transformations.push(t);
            }
        }
    }
    let identity = (0..functors.len())
        .map(|i| index[&(i, i, (0..a.n).map(|x| b.id(functors[i].obj[x])).collect())])
        .collect();
    let inv = (0..arrows.len())
        .map(|k| {
            let comps = transformations[k].components.iter().map(|&c| b.inv(c)).collect();
            index[&(arrows[k].1, arrows[k].0, comps)]
        })
        .collect();
    let groupoid = Arc::new(FinGroupoid::build(functors.len(), &arrows, identity, inv, |g, f| {
        let comps = (0..a.n)
            .map(|x| b.c(transformations[g].components[x], transformations[f].components[x]))
            .collect();
        index[&(arrows[f].0, arrows[g].1, comps)]
    }));
    Ok(Exponential { groupoid, functors, transformations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(g: FinGroupoid) -> Arc<FinGroupoid> {
        Arc::new(g)
    }

    #[test]
    fn interval_shape() {
        let i = interval();
        assert_eq!(i.object_count(), 2);
        assert_eq!(i.morphism_count(), 4);
        assert_eq!(i.hom_size(0, 1), 1);
        assert!(validate(&i.to_json()));
        assert!(validate(&discrete(2).to_json()));
    }

    #[test]
    fn non_invertible_table_rejected() {
        // Two objects, one arrow 0→1 and identities: 1→0 is missing.
        let json = GroupoidJson {
            objects: 2,
            morphisms: vec![
                MorphismJson { id: 0, src: 0, dst: 0 },
                MorphismJson { id: 1, src: 1, dst: 1 },
                MorphismJson { id: 2, src: 0, dst: 1 },
            ],
            identity: vec![0, 1],
            comp: vec![[0, 0, 0], [1, 1, 1], [2, 0, 2], [1, 2, 2]],
            inv: vec![0, 1, 2],
        };
        assert!(!validate(&json));
        assert!(matches!(json.validate(), Err(GroupoidError::InvalidTable(_))));
    }

    #[test]
    fn json_round_trip_validates() {
        for g in [interval(), cyclic_group(3), symmetric_group3(), codiscrete(3), disjoint_union(&interval(), &klein_group())] {
            let back = g.to_json().validate().unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn product_and_diagonal() {
        let i = arc(interval());
        let (prod, d) = diagonal(&i);
        assert_eq!(prod.groupoid.object_count(), 4);
        assert_eq!(prod.groupoid.morphism_count(), 16);
        prod.groupoid.check_laws().unwrap();
        d.check().unwrap();
        assert_eq!(d.mor(2), prod.mor(2, 2));
        let t = terminal();
        assert_eq!((t.object_count(), t.morphism_count()), (1, 1));
    }

    #[test]
    fn pullback_of_diagonal_along_itself_is_interval() {
        let i = arc(interval());
        let (_, d) = diagonal(&i);
        let pb = pullback(&d, &d);
        let iso = find_iso(&pb.groupoid, &i, None, DEFAULT_SEARCH_LIMIT).unwrap();
        assert!(iso.is_some());
    }

    #[test]
    fn pullback_along_identity_is_a_copy() {
        let g = arc(disjoint_union(&interval(), &cyclic_group(2)));
        let t = arc(terminal());
        let f = GFunctor::to_terminal(&g, &t);
        let pb = pullback(&f, &GFunctor::identity(&t));
        assert!(find_iso(&pb.groupoid, &g, None, DEFAULT_SEARCH_LIMIT).unwrap().is_some());
    }

    #[test]
    fn exponential_counts() {
        let i = arc(interval());
        let t = arc(terminal());
        let d2 = arc(discrete(2));
        assert_eq!(exponential(&i, &i, DEFAULT_SEARCH_LIMIT).unwrap().groupoid.object_count(), 4);
        assert_eq!(exponential(&i, &d2, DEFAULT_SEARCH_LIMIT).unwrap().groupoid.object_count(), 2);
        let e = exponential(&t, &i, DEFAULT_SEARCH_LIMIT).unwrap();
        e.groupoid.check_laws().unwrap();
        assert!(find_iso(&e.groupoid, &i, None, DEFAULT_SEARCH_LIMIT).unwrap().is_some());
    }

    #[test]
    fn exponential_by_interval_is_arrow_groupoid() {
        for g in [interval(), cyclic_group(2), codiscrete(3)] {
            let g = arc(g);
            let e = exponential(&arc(interval()), &g, DEFAULT_SEARCH_LIMIT).unwrap();
            let p = arrow_groupoid(&g);
            assert!(find_iso(&e.groupoid, p.total(), None, DEFAULT_SEARCH_LIMIT).unwrap().is_some());
        }
    }

    #[test]
    fn enumerate_small() {
        let i = arc(interval());
        let t = arc(terminal());
        assert_eq!(enumerate_functors(&t, &i, DEFAULT_SEARCH_LIMIT).unwrap().len(), 2);
        assert_eq!(enumerate_functors(&i, &t, DEFAULT_SEARCH_LIMIT).unwrap().len(), 1);
        assert_eq!(enumerate_functors(&i, &i, DEFAULT_SEARCH_LIMIT).unwrap().len(), 4);
    }

    #[test]
    fn enumeration_matches_brute_force() {
        // Brute force over all object/morphism maps, filtered by the functor check.
        let a = arc(cyclic_group(2));
        let b = arc(disjoint_union(&cyclic_group(2), &interval()));
        let mut brute = Vec::new();
        let (na, ma, nb, mb) = (a.object_count(), a.morphism_count(), b.object_count(), b.morphism_count());
        let total = nb.pow(na as u32) * mb.pow(ma as u32);
        for code in 0..total {
            let mut c = code;
            let mut obj = Vec::new();
            for _ in 0..na {
                obj.push(c % nb);
                c /= nb;
            }
            let mut mor = Vec::new();
            for _ in 0..ma {
                mor.push(c % mb);
                c /= mb;
            }
            if let Ok(f) = GFunctor::new(a.clone(), b.clone(), obj, mor) {
                brute.push((f.obj_map().to_vec(), f.mor_map().to_vec()));
            }
        }
        brute.sort();
        let found: Vec<_> = enumerate_functors(&a, &b, DEFAULT_SEARCH_LIMIT)
            .unwrap()
            .into_iter()
            .map(|f| (f.obj_map().to_vec(), f.mor_map().to_vec()))
            .collect();
        assert_eq!(found, brute);
    }

    #[test]
    fn size_guard_refuses() {
        let big = arc(codiscrete(6));
        let err = FunctorSearch::new(&big, &big).limit(100).first().unwrap_err();
        assert!(matches!(err, GroupoidError::SizeLimit { .. }));
    }

    #[test]
    fn arrow_groupoid_of_interval() {
        let i = arc(interval());
        let po = arrow_groupoid(&i);
        assert_eq!(po.total().object_count(), 4);
        po.total().check_laws().unwrap();
        po.r.check().unwrap();
        po.p.check().unwrap();
        let (_, d) = diagonal(&i);
        assert_eq!(po.p.after(&po.r), d);
        assert!(classify(&po.r).acyclic_cofibration);
        assert!(classify(&po.p).fibration);
    }

    #[test]
    fn arrow_groupoid_of_discrete_is_discrete() {
        let a = arc(discrete(3));
        let po = arrow_groupoid(&a);
        let (_, d) = diagonal(&a);
        let iso = find_iso(&a, po.total(), Some((&d, &po.p)), DEFAULT_SEARCH_LIMIT).unwrap();
        assert!(iso.is_some());
    }

    #[test]
    fn diagonal_is_not_a_fibration() {
        let i = arc(interval());
        let (_, d) = diagonal(&i);
        let c = classify(&d);
        assert!(!c.fibration);
        assert!(c.injective_on_objects);
    }

    #[test]
    fn arrow_functor_is_functorial() {
        let a = arc(codiscrete(2));
        let b = arc(disjoint_union(&interval(), &cyclic_group(2)));
        let (aa, bb) = (ArrowGroupoid::new(&a), ArrowGroupoid::new(&b));
        let id = arrow_functor(&GFunctor::identity(&a), &aa, &aa);
        assert!(id.is_identity());
        for f in enumerate_functors(&a, &b, DEFAULT_SEARCH_LIMIT).unwrap() {
            let fi = arrow_functor(&f, &aa, &bb);
            fi.check().unwrap();
            assert_eq!(fi.after(&aa.r()), bb.r().after(&f));
            for g in enumerate_functors(&b, &b, DEFAULT_SEARCH_LIMIT).unwrap().iter().take(6) {
                let gi = arrow_functor(g, &bb, &bb);
                assert_eq!(arrow_functor(&g.after(&f), &aa, &bb), gi.after(&fi));
            }
        }
    }

    #[test]
    fn relative_path_object_over_terminal() {
        let b = arc(interval());
        let t = arc(terminal());
        let rp = relative_path_object(&GFunctor::to_terminal(&b, &t)).unwrap();
        assert_eq!(rp.total.object_count(), 4);
        assert_eq!(rp.p.after(&rp.r), rp.diagonal());
        assert!(classify(&rp.r).acyclic_cofibration);
        assert!(classify(&rp.p).fibration);
    }

    #[test]
    fn relative_path_object_of_projection() {
        let i = arc(interval());
        let gamma = arc(codiscrete(2));
        let prod = product(&i, &gamma);
        let rp = relative_path_object(&prod.snd).unwrap();
        let ii = arrow_groupoid(&i);
        let target = product(ii.total(), &gamma);
        assert!(find_iso(&rp.total, &target.groupoid, None, DEFAULT_SEARCH_LIMIT).unwrap().is_some());
    }

    #[test]
    fn relative_path_object_rejects_non_fibration() {
        let i = arc(interval());
        let (_, d) = diagonal(&i);
        assert!(matches!(relative_path_object(&d), Err(GroupoidError::NotFibration)));
    }

    #[test]
    fn classify_invariant_under_relabelling() {
        let i = arc(interval());
        let po = arrow_groupoid(&i);
        let n = po.total().object_count();
        let m = po.total().morphism_count();
        let perm: Vec<usize> = (0..n).rev().collect();
        let mperm: Vec<usize> = (0..m).map(|k| (k * 5 + 3) % m).collect();
        let (_, iso) = relabel(po.total(), &perm, &mperm);
        iso.check().unwrap();
        // p' = p ∘ iso⁻¹ and r' = iso ∘ r classify the same way.
        let back = find_iso(iso.cod(), po.total(), None, DEFAULT_SEARCH_LIMIT).unwrap().unwrap();
        let p2 = po.p.after(&back);
        let r2 = iso.after(&po.r);
        assert_eq!(classify(&p2), classify(&po.p));
        assert_eq!(classify(&r2), classify(&po.r));
    }

    #[test]
    fn generators_of_small_groupoids() {
        assert_eq!(interval().generators().len(), 1);
        assert_eq!(cyclic_group(3).generators().len(), 1);
        assert_eq!(klein_group().generators().len(), 2);
        assert_eq!(symmetric_group3().generators().len(), 2);
        assert_eq!(codiscrete(3).generators().len(), 2);
        assert_eq!(discrete(3).generators().len(), 0);
    }

    #[test]
    fn natural_isos_between_points() {
        let t = arc(terminal());
        let i = arc(interval());
        let a = GFunctor::point(&t, &i, 0);
        let b = GFunctor::point(&t, &i, 1);
        let isos = natural_isos(&a, &b, &|_| true, None);
        assert_eq!(isos.len(), 1);
        assert!(isos[0].check());
    }
}
