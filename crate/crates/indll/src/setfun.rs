//! Finite sets and functions between them: the index category that every
//! annotation in this crate lives in.
//!
//! Elements come from a single inductive universe so that constructions such
//! as pullbacks and coproducts are canonical: running them twice on the same
//! inputs yields bit-identical results.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A point of the element universe.
///
/// `Pair` is used by pullbacks, `Inl`/`Inr` by coproducts and `Unit` as the
/// point of the canonical one-element set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Elem {
    Atom(String),
    Unit,
    Pair(Box<Elem>, Box<Elem>),
    Inl(Box<Elem>),
    Inr(Box<Elem>),
}

impl Elem {
    pub fn atom(s: &str) -> Elem {
        Elem::Atom(s.to_string())
    }
    pub fn pair(a: Elem, b: Elem) -> Elem {
        Elem::Pair(Box::new(a), Box::new(b))
    }
    pub fn inl(a: Elem) -> Elem {
        Elem::Inl(Box::new(a))
    }
    pub fn inr(a: Elem) -> Elem {
        Elem::Inr(Box::new(a))
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Atom(s) => write!(f, "{s}"),
            Elem::Unit => write!(f, "unit"),
            Elem::Pair(a, b) => write!(f, "({a},{b})"),
            Elem::Inl(a) => write!(f, "inl {a}"),
            Elem::Inr(a) => write!(f, "inr {a}"),
        }
    }
}

/// A finite set of elements.
pub type Locus = BTreeSet<Elem>;

/// The canonical empty set.
pub fn empty_locus() -> Locus {
    BTreeSet::new()
}

/// The canonical one-element set `{unit}`.
pub fn unit_locus() -> Locus {
    let mut s = BTreeSet::new();
    s.insert(Elem::Unit);
    s
}

/// Build a locus of atoms from names.
pub fn atoms(names: &[&str]) -> Locus {
    names.iter().map(|n| Elem::atom(n)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SetFunError {
    #[error("graph entry maps element outside the stated codomain: {0} -> {1}")]
    ValueOutsideCodomain(Elem, Elem),
    #[error("graph key outside the stated domain: {0}")]
    KeyOutsideDomain(Elem),
    #[error("graph misses an element of the domain: {0}")]
    MissingKey(Elem),
    #[error("codomain of the first function differs from domain of the second")]
    ComposeMismatch,
    #[error("functions do not share a codomain")]
    CodomainMismatch,
    #[error("function is not a bijection")]
    NotBijective,
    #[error("element {0} is not in the codomain")]
    NotInCodomain(Elem),
    #[error("element {0} is not in the locus")]
    NotInLocus(Elem),
}

/// A total function between two loci, stored by its graph.
///
/// Equality is extensional: two values compare equal exactly when they have
/// the same domain, codomain and graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SetFun {
    dom: Locus,
    cod: Locus,
    graph: BTreeMap<Elem, Elem>,
}

impl fmt::Display for SetFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.graph.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k} => {v}")?;
        }
        write!(f, "}}")
    }
}

impl SetFun {
    /// Build a function, checking totality and codomain containment.
    pub fn new(dom: Locus, cod: Locus, graph: BTreeMap<Elem, Elem>) -> Result<SetFun, SetFunError> {
        for (k, v) in &graph {
            if !dom.contains(k) {
                return Err(SetFunError::KeyOutsideDomain(k.clone()));
            }
            if !cod.contains(v) {
                return Err(SetFunError::ValueOutsideCodomain(k.clone(), v.clone()));
            }
        }
        for k in &dom {
            if !graph.contains_key(k) {
                return Err(SetFunError::MissingKey(k.clone()));
            }
        }
        Ok(SetFun { dom, cod, graph })
    }

    /// Build a function from a closure over the domain.
    pub fn from_fn(dom: Locus, cod: Locus, f: impl Fn(&Elem) -> Elem) -> Result<SetFun, SetFunError> {
        let graph = dom.iter().map(|x| (x.clone(), f(x))).collect();
        SetFun::new(dom, cod, graph)
    }

    pub fn dom(&self) -> &Locus {
        &self.dom
    }
    pub fn cod(&self) -> &Locus {
        &self.cod
    }
    pub fn graph(&self) -> &BTreeMap<Elem, Elem> {
        &self.graph
    }

    /// Apply the function to an element of its domain.
    pub fn apply(&self, x: &Elem) -> Result<Elem, SetFunError> {
        self.graph
            .get(x)
            .cloned()
            .ok_or_else(|| SetFunError::NotInLocus(x.clone()))
    }

    /// The identity function on a locus.
    pub fn identity(l: &Locus) -> SetFun {
        SetFun {
            dom: l.clone(),
            cod: l.clone(),
            graph: l.iter().map(|x| (x.clone(), x.clone())).collect(),
        }
    }

    /// The unique function from the empty set into `cod`.
    pub fn init(cod: &Locus) -> SetFun {
        SetFun {
            dom: empty_locus(),
            cod: cod.clone(),
            graph: BTreeMap::new(),
        }
    }

    /// The function from the one-element set picking out `x` in `cod`.
    pub fn cst(x: &Elem, cod: &Locus) -> Result<SetFun, SetFunError> {
        if !cod.contains(x) {
            return Err(SetFunError::NotInCodomain(x.clone()));
        }
        let mut graph = BTreeMap::new();
        graph.insert(Elem::Unit, x.clone());
        Ok(SetFun {
            dom: unit_locus(),
            cod: cod.clone(),
            graph,
        })
    }

    /// The unique function from `dom` to the one-element set.
    pub fn terminal(dom: &Locus) -> SetFun {
        SetFun {
            dom: dom.clone(),
            cod: unit_locus(),
            graph: dom.iter().map(|x| (x.clone(), Elem::Unit)).collect(),
        }
    }

    /// Diagrammatic composition: `compose(f, g)(x) = g(f(x))`.
    pub fn compose(f: &SetFun, g: &SetFun) -> Result<SetFun, SetFunError> {
        if f.cod != g.dom {
            return Err(SetFunError::ComposeMismatch);
        }
        let graph = f
            .graph
            .iter()
            .map(|(k, v)| (k.clone(), g.graph[v].clone()))
            .collect();
        Ok(SetFun {
            dom: f.dom.clone(),
            cod: g.cod.clone(),
            graph,
        })
    }

    /// Image of the function as a subset of its codomain.
    pub fn image(&self) -> Locus {
        self.graph.values().cloned().collect()
    }

    /// Preimage of an element of the codomain.
    pub fn preimage(&self, y: &Elem) -> Result<Locus, SetFunError> {
        if !self.cod.contains(y) {
            return Err(SetFunError::NotInCodomain(y.clone()));
        }
        Ok(self
            .graph
            .iter()
            .filter(|(_, v)| *v == y)
            .map(|(k, _)| k.clone())
            .collect())
    }

    pub fn is_injective(&self) -> bool {
        self.image().len() == self.dom.len()
    }

    pub fn is_surjective(&self) -> bool {
        self.image() == self.cod
    }

    pub fn is_bijection(&self) -> bool {
        self.is_injective() && self.is_surjective()
    }

    pub fn is_identity(&self) -> bool {
        self.dom == self.cod && self.graph.iter().all(|(k, v)| k == v)
    }

    /// Inverse of a bijection.
    pub fn invert(&self) -> Result<SetFun, SetFunError> {
        if !self.is_bijection() {
            return Err(SetFunError::NotBijective);
        }
        let graph = self.graph.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
        Ok(SetFun {
            dom: self.cod.clone(),
            cod: self.dom.clone(),
            graph,
        })
    }
}

/// A pullback square for a cospan `f : I -> K`, `g : J -> K`.
///
/// The apex consists of the pairs `(x, y)` with `f(x) = g(y)`, tagged with
/// the `Pair` constructor, together with the two projections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pullback {
    /// The apex locus `{ (x,y) | f(x) = g(y) }`.
    pub locus: Locus,
    /// Projection to the domain of `f`.
    pub p1: SetFun,
    /// Projection to the domain of `g`.
    pub p2: SetFun,
}

/// Canonical pullback of a cospan with shared codomain.
pub fn pullback(f: &SetFun, g: &SetFun) -> Result<Pullback, SetFunError> {
    if f.cod != g.cod {
        return Err(SetFunError::CodomainMismatch);
    }
    let mut locus = BTreeSet::new();
    let mut g1 = BTreeMap::new();
    let mut g2 = BTreeMap::new();
    for (x, fx) in &f.graph {
        for (y, gy) in &g.graph {
            if fx == gy {
                let p = Elem::pair(x.clone(), y.clone());
                g1.insert(p.clone(), x.clone());
                g2.insert(p.clone(), y.clone());
                locus.insert(p);
            }
        }
    }
    Ok(Pullback {
        p1: SetFun {
            dom: locus.clone(),
            cod: f.dom.clone(),
            graph: g1,
        },
        p2: SetFun {
            dom: locus.clone(),
            cod: g.dom.clone(),
            graph: g2,
        },
        locus,
    })
}

/// A binary coproduct: tagged union with its two injections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coproduct {
    pub locus: Locus,
    pub inl: SetFun,
    pub inr: SetFun,
}

/// Canonical coproduct of two loci, tagging with `Inl` / `Inr`.
pub fn coproduct(a: &Locus, b: &Locus) -> Coproduct {
    let mut locus = BTreeSet::new();
    let mut gl = BTreeMap::new();
    let mut gr = BTreeMap::new();
    for x in a {
        let t = Elem::inl(x.clone());
        gl.insert(x.clone(), t.clone());
        locus.insert(t);
    }
    for y in b {
        let t = Elem::inr(y.clone());
        gr.insert(y.clone(), t.clone());
        locus.insert(t);
    }
    Coproduct {
        inl: SetFun {
            dom: a.clone(),
            cod: locus.clone(),
            graph: gl,
        },
        inr: SetFun {
            dom: b.clone(),
            cod: locus.clone(),
            graph: gr,
        },
        locus,
    }
}

/// Copairing `[f, g]` out of the canonical coproduct of the two domains.
pub fn copair(f: &SetFun, g: &SetFun) -> Result<SetFun, SetFunError> {
    if f.cod != g.cod {
        return Err(SetFunError::CodomainMismatch);
    }
    let cp = coproduct(&f.dom, &g.dom);
    let mut graph = BTreeMap::new();
    for (x, v) in &f.graph {
        graph.insert(Elem::inl(x.clone()), v.clone());
    }
    for (y, v) in &g.graph {
        graph.insert(Elem::inr(y.clone()), v.clone());
    }
    Ok(SetFun {
        dom: cp.locus,
        cod: f.cod.clone(),
        graph,
    })
}

/// Coproduct of two functions: acts as `f` on the left summand and `g` on
/// the right one, landing in the coproduct of the codomains.
pub fn fun_sum(f: &SetFun, g: &SetFun) -> SetFun {
    let cp_cod = coproduct(&f.cod, &g.cod);
    let cp_dom = coproduct(&f.dom, &g.dom);
    let mut graph = BTreeMap::new();
    for (x, v) in &f.graph {
        graph.insert(Elem::inl(x.clone()), Elem::inl(v.clone()));
    }
    for (y, v) in &g.graph {
        graph.insert(Elem::inr(y.clone()), Elem::inr(v.clone()));
    }
    SetFun {
        dom: cp_dom.locus,
        cod: cp_cod.locus,
        graph,
    }
}

/// An indexed (n-ary) coproduct of loci, tagging element `z` of the
/// component keyed `k` as the pair `(k, z)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedCoproduct {
    pub locus: Locus,
    /// One injection per component, in input order.
    pub injections: Vec<SetFun>,
}

/// Canonical coproduct of a finite family of loci keyed by elements.
pub fn indexed_coproduct(family: &[(Elem, Locus)]) -> IndexedCoproduct {
    let mut locus = BTreeSet::new();
    for (k, l) in family {
        for z in l {
            locus.insert(Elem::pair(k.clone(), z.clone()));
        }
    }
    let injections = family
        .iter()
        .map(|(k, l)| SetFun {
            dom: l.clone(),
            cod: locus.clone(),
            graph: l
                .iter()
                .map(|z| (z.clone(), Elem::pair(k.clone(), z.clone())))
                .collect(),
        })
        .collect();
    IndexedCoproduct { locus, injections }
}

/// Indexed coproduct of a family of functions sharing the key structure:
/// acts componentwise, `(k, z) -> (k, u_k(z))`.
pub fn indexed_fun_sum(keys: &[Elem], funs: &[&SetFun]) -> SetFun {
    assert_eq!(keys.len(), funs.len());
    let dom_fam: Vec<(Elem, Locus)> = keys
        .iter()
        .zip(funs)
        .map(|(k, f)| (k.clone(), f.dom.clone()))
        .collect();
    let cod_fam: Vec<(Elem, Locus)> = keys
        .iter()
        .zip(funs)
        .map(|(k, f)| (k.clone(), f.cod.clone()))
        .collect();
    let dom = indexed_coproduct(&dom_fam).locus;
    let cod = indexed_coproduct(&cod_fam).locus;
    let mut graph = BTreeMap::new();
    for (k, f) in keys.iter().zip(funs) {
        for (z, v) in &f.graph {
            graph.insert(
                Elem::pair(k.clone(), z.clone()),
                Elem::pair(k.clone(), v.clone()),
            );
        }
    }
    SetFun { dom, cod, graph }
}

/// Whether two functions with a shared codomain are jointly surjective,
/// both injective and have disjoint images: the condition required of the
/// pair of injections carried by the additive connectives.
pub fn is_bot_pair(i: &SetFun, j: &SetFun) -> bool {
    if i.cod != j.cod {
        return false;
    }
    if !i.is_injective() || !j.is_injective() {
        return false;
    }
    let im_i = i.image();
    let im_j = j.image();
    if im_i.intersection(&im_j).next().is_some() {
        return false;
    }
    im_i.union(&im_j).count() == i.cod.len()
}

/// All functions from `dom` to `cod`, in a deterministic order.
///
/// The number of results is `|cod|^|dom|`; callers are expected to bound the
/// sizes involved.
pub fn all_functions(dom: &Locus, cod: &Locus) -> Vec<SetFun> {
    let keys: Vec<&Elem> = dom.iter().collect();
    let vals: Vec<&Elem> = cod.iter().collect();
    if keys.is_empty() {
        return vec![SetFun::init(cod)
            .graph
            .is_empty()
            .then(|| SetFun {
                dom: dom.clone(),
                cod: cod.clone(),
                graph: BTreeMap::new(),
            })
            .unwrap()];
    }
    if vals.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let n = vals.len();
    let total = n.checked_pow(keys.len() as u32).unwrap_or(usize::MAX);
    let mut idx = vec![0usize; keys.len()];
    for _ in 0..total {
        let graph: BTreeMap<Elem, Elem> = keys
            .iter()
            .zip(idx.iter())
            .map(|(k, &i)| ((*k).clone(), vals[i].clone()))
            .collect();
        out.push(SetFun {
            dom: dom.clone(),
            cod: cod.clone(),
            graph,
        });
        // increment the mixed-radix counter
        for d in idx.iter_mut() {
            *d += 1;
            if *d < n {
                break;
            }
            *d = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f_ab_to_k() -> (Locus, Locus, SetFun, SetFun) {
        let i = atoms(&["a", "b"]);
        let k = atoms(&["k1", "k2"]);
        let f = SetFun::from_fn(i.clone(), k.clone(), |x| {
            if *x == Elem::atom("a") {
                Elem::atom("k1")
            } else {
                Elem::atom("k2")
            }
        })
        .unwrap();
        let g = SetFun::from_fn(i.clone(), k.clone(), |_| Elem::atom("k1")).unwrap();
        (i, k, f, g)
    }

    #[test]
    fn compose_associates_and_respects_identity() {
        let (i, k, f, _) = f_ab_to_k();
        let idi = SetFun::identity(&i);
        let idk = SetFun::identity(&k);
        assert_eq!(SetFun::compose(&idi, &f).unwrap(), f);
        assert_eq!(SetFun::compose(&f, &idk).unwrap(), f);
    }

    #[test]
    fn compose_requires_matching_middle() {
        let (i, _, f, _) = f_ab_to_k();
        let idi = SetFun::identity(&i);
        assert_eq!(SetFun::compose(&f, &idi), Err(SetFunError::ComposeMismatch));
    }

    #[test]
    fn pullback_square_commutes() {
        let (_, _, f, g) = f_ab_to_k();
        let pb = pullback(&f, &g).unwrap();
        assert_eq!(
            SetFun::compose(&pb.p1, &f).unwrap(),
            SetFun::compose(&pb.p2, &g).unwrap()
        );
        // f sends only a to k1 and g is constant k1, so the apex is {(a,a),(a,b)}.
        assert_eq!(pb.locus.len(), 2);
    }

    #[test]
    fn pullback_universal_property_small() {
        let (_, _, f, g) = f_ab_to_k();
        let pb = pullback(&f, &g).unwrap();
        // For every competitor pair of maps from a small test locus that
        // closes the square, there is exactly one mediating map.
        let t = atoms(&["t"]);
        for u in all_functions(&t, f.dom()) {
            for v in all_functions(&t, g.dom()) {
                let uf = SetFun::compose(&u, &f).unwrap();
                let vg = SetFun::compose(&v, &g).unwrap();
                if uf != vg {
                    continue;
                }
                let mediating: Vec<SetFun> = all_functions(&t, &pb.locus)
                    .into_iter()
                    .filter(|m| {
                        SetFun::compose(m, &pb.p1).unwrap() == u
                            && SetFun::compose(m, &pb.p2).unwrap() == v
                    })
                    .collect();
                assert_eq!(mediating.len(), 1);
            }
        }
    }

    #[test]
    fn coproduct_injections_form_bot_pair() {
        let a = atoms(&["x"]);
        let b = atoms(&["y", "z"]);
        let cp = coproduct(&a, &b);
        assert!(is_bot_pair(&cp.inl, &cp.inr));
        assert_eq!(cp.locus.len(), 3);
    }

    #[test]
    fn copair_restricts_to_components() {
        let a = atoms(&["x"]);
        let b = atoms(&["y"]);
        let k = atoms(&["k1", "k2"]);
        let f = SetFun::from_fn(a.clone(), k.clone(), |_| Elem::atom("k1")).unwrap();
        let g = SetFun::from_fn(b.clone(), k.clone(), |_| Elem::atom("k2")).unwrap();
        let cp = coproduct(&a, &b);
        let h = copair(&f, &g).unwrap();
        assert_eq!(SetFun::compose(&cp.inl, &h).unwrap(), f);
        assert_eq!(SetFun::compose(&cp.inr, &h).unwrap(), g);
    }

    #[test]
    fn invert_round_trips_bijections() {
        let i = atoms(&["a", "b"]);
        let j = atoms(&["c", "d"]);
        let f = SetFun::from_fn(i.clone(), j.clone(), |x| {
            if *x == Elem::atom("a") {
                Elem::atom("d")
            } else {
                Elem::atom("c")
            }
        })
        .unwrap();
        let inv = f.invert().unwrap();
        assert!(SetFun::compose(&f, &inv).unwrap().is_identity());
        assert!(SetFun::compose(&inv, &f).unwrap().is_identity());
    }

    #[test]
    fn invert_rejects_non_bijections() {
        let (_, _, _, g) = f_ab_to_k();
        assert_eq!(g.invert(), Err(SetFunError::NotBijective));
    }

    #[test]
    fn init_and_cst_are_canonical() {
        let k = atoms(&["k1"]);
        let i = SetFun::init(&k);
        assert!(i.dom().is_empty());
        let c = SetFun::cst(&Elem::atom("k1"), &k).unwrap();
        assert_eq!(c.apply(&Elem::Unit).unwrap(), Elem::atom("k1"));
        assert!(SetFun::cst(&Elem::atom("nope"), &k).is_err());
    }

    #[test]
    fn all_functions_counts() {
        let a = atoms(&["x", "y"]);
        let b = atoms(&["1", "2", "3"]);
        assert_eq!(all_functions(&a, &b).len(), 9);
        assert_eq!(all_functions(&empty_locus(), &b).len(), 1);
        assert_eq!(all_functions(&a, &empty_locus()).len(), 0);
    }

    #[test]
    fn preimage_partitions_domain() {
        let (_, k, f, _) = f_ab_to_k();
        let mut total = 0;
        for y in &k {
            total += f.preimage(y).unwrap().len();
        }
        assert_eq!(total, f.dom().len());
    }
}
