//! Proof-relevant subtyping between formulae over a shared locus.
//!
//! A derivation is a tree whose nodes cache their endpoints; `check_sub`
//! re-derives every cached value. Besides the checker, this module provides
//! constructive builders (reflexivity, transitivity, base-change lifting,
//! dualization, the canonical derivation between any two base-change chains
//! with equal composite), a bounded decision procedure, and the gluing of a
//! family of pointwise derivations into one derivation over the whole locus.

use crate::formula::{
    apply_chain, base_change, chain_composite, check_def, Formula, FormulaError, VarEnv,
};
use crate::setfun::{pullback, Elem, Locus, SetFun, SetFunError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubError {
    #[error("formula error: {0}")]
    Formula(#[from] FormulaError),
    #[error("set-level error: {0}")]
    SetFun(#[from] SetFunError),
    #[error("cached endpoint does not match the rule structure: {0}")]
    EndpointMismatch(String),
    #[error("rule applied to formulae of the wrong shape: {0}")]
    ShapeMismatch(String),
    #[error("additive premise injections are not orthogonal")]
    Orthogonality,
    #[error("exponential witness does not compose to the stated annotation")]
    WitnessComposite,
    #[error("search budget exceeded")]
    BudgetExceeded,
    #[error("missing pointwise derivation for {0}")]
    MissingPoint(Elem),
    #[error("base-change chains have different composites")]
    ChainMismatch,
}

/// The rule used at a derivation node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubNode {
    AxPVar,
    AxNVar,
    AxOne,
    AxBot,
    AxZero,
    AxTop,
    TensorCong(Box<SubDeriv>, Box<SubDeriv>),
    ParCong(Box<SubDeriv>, Box<SubDeriv>),
    WithRule(Box<SubDeriv>, Box<SubDeriv>),
    PlusRule(Box<SubDeriv>, Box<SubDeriv>),
    BangRule(SetFun, Box<SubDeriv>),
    QuestRule(SetFun, Box<SubDeriv>),
}

/// A subtyping derivation with cached endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubDeriv {
    pub locus: Locus,
    pub lhs: Formula,
    pub rhs: Formula,
    pub node: SubNode,
}

impl SubDeriv {
    pub fn size(&self) -> usize {
        1 + match &self.node {
            SubNode::TensorCong(a, b)
            | SubNode::ParCong(a, b)
            | SubNode::WithRule(a, b)
            | SubNode::PlusRule(a, b) => a.size() + b.size(),
            SubNode::BangRule(_, a) | SubNode::QuestRule(_, a) => a.size(),
            _ => 0,
        }
    }
}

/// Validate a derivation bottom-up, re-deriving every cached endpoint, and
/// return the endpoints of the root.
pub fn check_sub(d: &SubDeriv, env: &VarEnv) -> Result<(Locus, Formula, Formula), SubError> {
    check_sub_inner(d, env)?;
    // definedness of the root endpoints (subderivations are covered by the
    // structural checks relating them to the root)
    check_def(&d.locus, &d.lhs, env)?;
    check_def(&d.locus, &d.rhs, env)?;
    if d.lhs.erase() != d.rhs.erase() {
        return Err(SubError::EndpointMismatch("erasures differ".into()));
    }
    Ok((d.locus.clone(), d.lhs.clone(), d.rhs.clone()))
}

fn expect(cond: bool, what: &str) -> Result<(), SubError> {
    if cond {
        Ok(())
    } else {
        Err(SubError::EndpointMismatch(what.to_string()))
    }
}

#[allow(clippy::only_used_in_recursion)]
fn check_sub_inner(d: &SubDeriv, env: &VarEnv) -> Result<(), SubError> {
    match (&d.node, &d.lhs, &d.rhs) {
        (SubNode::AxPVar, Formula::PVar(f, x), Formula::PVar(g, y)) => {
            expect(f == g && x == y && f.dom() == &d.locus, "variable axiom")
        }
        (SubNode::AxNVar, Formula::NVar(f, x), Formula::NVar(g, y)) => {
            expect(f == g && x == y && f.dom() == &d.locus, "variable axiom")
        }
        (SubNode::AxOne, Formula::One, Formula::One) => Ok(()),
        (SubNode::AxBot, Formula::Bot, Formula::Bot) => Ok(()),
        (SubNode::AxZero, Formula::Zero, Formula::Zero) => {
            expect(d.locus.is_empty(), "additive unit locus")
        }
        (SubNode::AxTop, Formula::Top, Formula::Top) => {
            expect(d.locus.is_empty(), "additive unit locus")
        }
        (SubNode::TensorCong(d1, d2), Formula::Tensor(a, b), Formula::Tensor(a2, b2))
        | (SubNode::ParCong(d1, d2), Formula::Par(a, b), Formula::Par(a2, b2)) => {
            expect(
                d1.locus == d.locus && d2.locus == d.locus,
                "congruence locus",
            )?;
            expect(
                d1.lhs == **a && d1.rhs == **a2 && d2.lhs == **b && d2.rhs == **b2,
                "congruence endpoints",
            )?;
            check_sub_inner(d1, env)?;
            check_sub_inner(d2, env)
        }
        (SubNode::WithRule(d1, d2), Formula::With(i, j, a, b), Formula::With(i2, j2, a2, b2))
        | (SubNode::PlusRule(d1, d2), Formula::Plus(i, j, a, b), Formula::Plus(i2, j2, a2, b2)) => {
            expect(
                i.cod() == &d.locus && i2.cod() == &d.locus,
                "additive locus",
            )?;
            // The two orthogonality side conditions are part of the rule and
            // are never omitted.
            if !pullback(i, j2)?.locus.is_empty() || !pullback(j, i2)?.locus.is_empty() {
                return Err(SubError::Orthogonality);
            }
            let pi = pullback(i, i2)?;
            let pj = pullback(j, j2)?;
            expect(d1.locus == pi.locus && d2.locus == pj.locus, "premise locus")?;
            expect(
                d1.lhs == base_change(&pi.p1, a)?
                    && d1.rhs == base_change(&pi.p2, a2)?
                    && d2.lhs == base_change(&pj.p1, b)?
                    && d2.rhs == base_change(&pj.p2, b2)?,
                "additive premise endpoints",
            )?;
            check_sub_inner(d1, env)?;
            check_sub_inner(d2, env)
        }
        (SubNode::BangRule(g, d1), Formula::Bang(u, a), Formula::Bang(w, a2)) => {
            if g.cod() != u.dom() {
                return Err(SubError::WitnessComposite);
            }
            if &SetFun::compose(g, u)? != w {
                return Err(SubError::WitnessComposite);
            }
            expect(d1.locus == *g.dom(), "premise locus")?;
            expect(
                d1.lhs == base_change(g, a)? && d1.rhs == **a2,
                "exponential premise endpoints",
            )?;
            check_sub_inner(d1, env)
        }
        (SubNode::QuestRule(g, d1), Formula::Quest(w, a), Formula::Quest(u, a2)) => {
            if g.cod() != u.dom() {
                return Err(SubError::WitnessComposite);
            }
            if &SetFun::compose(g, u)? != w {
                return Err(SubError::WitnessComposite);
            }
            expect(d1.locus == *g.dom(), "premise locus")?;
            expect(
                d1.lhs == **a && d1.rhs == base_change(g, a2)?,
                "exponential premise endpoints",
            )?;
            check_sub_inner(d1, env)
        }
        _ => Err(SubError::ShapeMismatch(format!(
            "rule does not fit endpoints {} / {}",
            d.lhs.erase(),
            d.rhs.erase()
        ))),
    }
}

// --- canonical derivations between base-change chains ----------------------

/// Fold a chain of base changes over an annotated connective: returns the
/// resulting annotation together with the chain of base changes applied to
/// the body. This is shared by exponentials and by each branch of an
/// additive, whose re-annotation through pullbacks has the same shape.
fn fold_chain(chain: &[SetFun], ann: &SetFun) -> Result<(SetFun, Vec<SetFun>), SetFunError> {
    let mut idx = ann.clone();
    let mut body: Vec<SetFun> = Vec::new();
    for f in chain.iter().rev() {
        let pb = pullback(f, &idx)?;
        idx = pb.p1;
        body.insert(0, pb.p2);
    }
    Ok((idx, body))
}

/// Match the two iterated-pullback loci produced by folding two chains with
/// equal composite over the same annotation: every element is determined by
/// its pair (image under the new annotation, image under the body chain), so
/// keyed matching yields the canonical bijection from the second locus to
/// the first.
fn chain_bijection(
    idx_f: &SetFun,
    body_f: &[SetFun],
    idx_g: &SetFun,
    body_g: &[SetFun],
    core_locus: &Locus,
) -> Result<SetFun, SubError> {
    let cf = chain_composite(body_f, core_locus)?;
    let cg = chain_composite(body_g, core_locus)?;
    let mut key_f: BTreeMap<(Elem, Elem), Elem> = BTreeMap::new();
    for p in idx_f.dom() {
        key_f.insert((idx_f.apply(p)?, cf.apply(p)?), p.clone());
    }
    let mut graph = BTreeMap::new();
    for q in idx_g.dom() {
        let key = (idx_g.apply(q)?, cg.apply(q)?);
        let p = key_f
            .get(&key)
            .ok_or(SubError::ChainMismatch)?;
        graph.insert(q.clone(), p.clone());
    }
    if graph.len() != idx_f.dom().len() && key_f.len() != graph.len() {
        return Err(SubError::ChainMismatch);
    }
    Ok(SetFun::new(idx_g.dom().clone(), idx_f.dom().clone(), graph)?)
}

/// The canonical derivation `fs(a) <= gs(a)` between the results of two
/// base-change chains with the same composite, by induction on `a`.
pub fn chain_sub(
    fs: &[SetFun],
    gs: &[SetFun],
    locus_a: &Locus,
    a: &Formula,
) -> Result<SubDeriv, SubError> {
    let comp_f = chain_composite(fs, locus_a)?;
    let comp_g = chain_composite(gs, locus_a)?;
    if comp_f != comp_g {
        return Err(SubError::ChainMismatch);
    }
    let locus = comp_f.dom().clone();
    let lhs = apply_chain(fs, a)?;
    let rhs = apply_chain(gs, a)?;
    let node = match a {
        Formula::PVar(..) => SubNode::AxPVar,
        Formula::NVar(..) => SubNode::AxNVar,
        Formula::One => SubNode::AxOne,
        Formula::Bot => SubNode::AxBot,
        Formula::Zero => SubNode::AxZero,
        Formula::Top => SubNode::AxTop,
        Formula::Tensor(x, y) => SubNode::TensorCong(
            Box::new(chain_sub(fs, gs, locus_a, x)?),
            Box::new(chain_sub(fs, gs, locus_a, y)?),
        ),
        Formula::Par(x, y) => SubNode::ParCong(
            Box::new(chain_sub(fs, gs, locus_a, x)?),
            Box::new(chain_sub(fs, gs, locus_a, y)?),
        ),
        Formula::Bang(u, body) => {
            let (idx_f, body_f) = fold_chain(fs, u)?;
            let (idx_g, body_g) = fold_chain(gs, u)?;
            let beta = chain_bijection(&idx_f, &body_f, &idx_g, &body_g, u.dom())?;
            let mut lhs_chain = vec![beta.clone()];
            lhs_chain.extend(body_f.iter().cloned());
            let prem = chain_sub(&lhs_chain, &body_g, u.dom(), body)?;
            SubNode::BangRule(beta, Box::new(prem))
        }
        Formula::Quest(u, body) => {
            let (idx_f, body_f) = fold_chain(fs, u)?;
            let (idx_g, body_g) = fold_chain(gs, u)?;
            // witness from the left-hand locus into the right-hand one
            let gamma = chain_bijection(&idx_g, &body_g, &idx_f, &body_f, u.dom())?;
            let mut rhs_chain = vec![gamma.clone()];
            rhs_chain.extend(body_g.iter().cloned());
            let prem = chain_sub(&body_f, &rhs_chain, u.dom(), body)?;
            SubNode::QuestRule(gamma, Box::new(prem))
        }
        Formula::With(i, j, al, ar) | Formula::Plus(i, j, al, ar) => {
            let (i_f, chl_f) = fold_chain(fs, i)?;
            let (i_g, chl_g) = fold_chain(gs, i)?;
            let (j_f, chr_f) = fold_chain(fs, j)?;
            let (j_g, chr_g) = fold_chain(gs, j)?;
            let pi = pullback(&i_f, &i_g)?;
            let pj = pullback(&j_f, &j_g)?;
            let mut l1 = vec![pi.p1.clone()];
            l1.extend(chl_f.iter().cloned());
            let mut l2 = vec![pi.p2.clone()];
            l2.extend(chl_g.iter().cloned());
            let prem1 = chain_sub(&l1, &l2, i.dom(), al)?;
            let mut r1 = vec![pj.p1.clone()];
            r1.extend(chr_f.iter().cloned());
            let mut r2 = vec![pj.p2.clone()];
            r2.extend(chr_g.iter().cloned());
            let prem2 = chain_sub(&r1, &r2, j.dom(), ar)?;
            match a {
                Formula::With(..) => SubNode::WithRule(Box::new(prem1), Box::new(prem2)),
                _ => SubNode::PlusRule(Box::new(prem1), Box::new(prem2)),
            }
        }
    };
    Ok(SubDeriv {
        locus,
        lhs,
        rhs,
        node,
    })
}

/// Reflexivity: `a <= a`, with identity witnesses at every exponential.
pub fn refl(locus: &Locus, a: &Formula) -> Result<SubDeriv, SubError> {
    chain_sub(&[], &[], locus, a)
}

/// The two derivations witnessing that applying two base changes in
/// sequence is equivalent to applying their composite.
pub fn compose_iso(
    f: &SetFun,
    g: &SetFun,
    locus_a: &Locus,
    a: &Formula,
) -> Result<(SubDeriv, SubDeriv), SubError> {
    let fg = SetFun::compose(f, g)?;
    let fwd = chain_sub(
        &[f.clone(), g.clone()],
        std::slice::from_ref(&fg),
        locus_a,
        a,
    )?;
    let bwd = chain_sub(
        std::slice::from_ref(&fg),
        &[f.clone(), g.clone()],
        locus_a,
        a,
    )?;
    Ok((fwd, bwd))
}

/// Dualize a derivation: from `a <= b` build `negate(b) <= negate(a)`.
pub fn negate_sub(d: &SubDeriv) -> Result<SubDeriv, SubError> {
    let lhs = d.rhs.negate();
    let rhs = d.lhs.negate();
    let node = match (&d.node, &d.lhs, &d.rhs) {
        (SubNode::AxPVar, ..) => SubNode::AxNVar,
        (SubNode::AxNVar, ..) => SubNode::AxPVar,
        (SubNode::AxOne, ..) => SubNode::AxBot,
        (SubNode::AxBot, ..) => SubNode::AxOne,
        (SubNode::AxZero, ..) => SubNode::AxTop,
        (SubNode::AxTop, ..) => SubNode::AxZero,
        (SubNode::TensorCong(d1, d2), ..) => {
            SubNode::ParCong(Box::new(negate_sub(d1)?), Box::new(negate_sub(d2)?))
        }
        (SubNode::ParCong(d1, d2), ..) => {
            SubNode::TensorCong(Box::new(negate_sub(d1)?), Box::new(negate_sub(d2)?))
        }
        (SubNode::BangRule(g, e), ..) => SubNode::QuestRule(g.clone(), Box::new(negate_sub(e)?)),
        (SubNode::QuestRule(g, e), ..) => SubNode::BangRule(g.clone(), Box::new(negate_sub(e)?)),
        (
            SubNode::WithRule(e1, e2),
            Formula::With(i, j, al, ar),
            Formula::With(i2, j2, al2, ar2),
        )
        | (
            SubNode::PlusRule(e1, e2),
            Formula::Plus(i, j, al, ar),
            Formula::Plus(i2, j2, al2, ar2),
        ) => {
            // The premises of the dual rule live over the pullback taken in
            // the other order; transport along the pair-swap bijection.
            let prem1 = dual_additive_premise(e1, i, i2, &al2.negate(), &al.negate())?;
            let prem2 = dual_additive_premise(e2, j, j2, &ar2.negate(), &ar.negate())?;
            match &d.node {
                SubNode::WithRule(..) => SubNode::PlusRule(Box::new(prem1), Box::new(prem2)),
                _ => SubNode::WithRule(Box::new(prem1), Box::new(prem2)),
            }
        }
        _ => {
            return Err(SubError::ShapeMismatch(
                "dualization applied to malformed derivation".into(),
            ))
        }
    };
    Ok(SubDeriv {
        locus: d.locus.clone(),
        lhs,
        rhs,
        node,
    })
}

/// Premise of the dual additive rule: given `e : p1(a) <= p2(a2)` over the
/// pullback of `(i, i2)`, produce `q1(negate a2) <= q2(negate a)` over the
/// pullback of `(i2, i)`.
fn dual_additive_premise(
    e: &SubDeriv,
    i: &SetFun,
    i2: &SetFun,
    neg_a2: &Formula,
    neg_a: &Formula,
) -> Result<SubDeriv, SubError> {
    let p = pullback(i, i2)?;
    let p_sw = pullback(i2, i)?;
    // pair swap from pullback(i2, i) onto pullback(i, i2)
    let mut graph = BTreeMap::new();
    for q in &p_sw.locus {
        if let Elem::Pair(t, s) = q {
            graph.insert(q.clone(), Elem::pair((**s).clone(), (**t).clone()));
        }
    }
    let sigma = SetFun::new(p_sw.locus.clone(), p.locus.clone(), graph)?;
    let ne = negate_sub(e)?;
    // ne : p2(neg_a2') <= p1(neg_a') over p; transport to p_sw
    let left = chain_sub(
        std::slice::from_ref(&p_sw.p1),
        &[sigma.clone(), p.p2.clone()],
        i2.dom(),
        neg_a2,
    )?;
    let mid = bc_sub(&sigma, &ne)?;
    let right = chain_sub(
        &[sigma.clone(), p.p1.clone()],
        std::slice::from_ref(&p_sw.p2),
        i.dom(),
        neg_a,
    )?;
    trans(&left, &trans(&mid, &right)?)
}

/// Transitivity: compose two derivations sharing a middle formula.
pub fn trans(d1: &SubDeriv, d2: &SubDeriv) -> Result<SubDeriv, SubError> {
    if d1.rhs != d2.lhs || d1.locus != d2.locus {
        return Err(SubError::EndpointMismatch(
            "transitivity endpoints do not meet".into(),
        ));
    }
    let node = match (&d1.node, &d2.node) {
        (SubNode::AxPVar, SubNode::AxPVar) => SubNode::AxPVar,
        (SubNode::AxNVar, SubNode::AxNVar) => SubNode::AxNVar,
        (SubNode::AxOne, SubNode::AxOne) => SubNode::AxOne,
        (SubNode::AxBot, SubNode::AxBot) => SubNode::AxBot,
        (SubNode::AxZero, SubNode::AxZero) => SubNode::AxZero,
        (SubNode::AxTop, SubNode::AxTop) => SubNode::AxTop,
        (SubNode::TensorCong(a1, b1), SubNode::TensorCong(a2, b2)) => {
            SubNode::TensorCong(Box::new(trans(a1, a2)?), Box::new(trans(b1, b2)?))
        }
        (SubNode::ParCong(a1, b1), SubNode::ParCong(a2, b2)) => {
            SubNode::ParCong(Box::new(trans(a1, a2)?), Box::new(trans(b1, b2)?))
        }
        (SubNode::BangRule(g1, e1), SubNode::BangRule(g2, e2)) => {
            // witness g2;g1, premise (g2;g1)(a) <= g2(g1(a)) <= g2(a') <= a''
            let (u, a) = match &d1.lhs {
                Formula::Bang(u, a) => (u, a),
                _ => return Err(SubError::ShapeMismatch("transitivity on exponential".into())),
            };
            let g = SetFun::compose(g2, g1)?;
            let s1 = chain_sub(
                std::slice::from_ref(&g),
                &[g2.clone(), g1.clone()],
                u.dom(),
                a,
            )?;
            let s2 = bc_sub(g2, e1)?;
            let prem = trans(&s1, &trans(&s2, e2)?)?;
            SubNode::BangRule(g, Box::new(prem))
        }
        (SubNode::QuestRule(g1, e1), SubNode::QuestRule(g2, e2)) => {
            let (u2, a2) = match &d2.rhs {
                Formula::Quest(u2, a2) => (u2, a2),
                _ => return Err(SubError::ShapeMismatch("transitivity on exponential".into())),
            };
            let g = SetFun::compose(g1, g2)?;
            let s2 = bc_sub(g1, e2)?;
            let s3 = chain_sub(
                &[g1.clone(), g2.clone()],
                std::slice::from_ref(&g),
                u2.dom(),
                a2,
            )?;
            let prem = trans(e1, &trans(&s2, &s3)?)?;
            SubNode::QuestRule(g, Box::new(prem))
        }
        (SubNode::WithRule(e1, e2), SubNode::WithRule(f1, f2)) => {
            let (i, j, al, ar) = unpack_with(&d1.lhs)?;
            let (im, jm, alm, arm) = unpack_with(&d1.rhs)?;
            let (i2, j2, al2, ar2) = unpack_with(&d2.rhs)?;
            let prem1 = trans_additive_premise(e1, f1, i, im, i2, al, alm, al2)?;
            let prem2 = trans_additive_premise(e2, f2, j, jm, j2, ar, arm, ar2)?;
            SubNode::WithRule(Box::new(prem1), Box::new(prem2))
        }
        (SubNode::PlusRule(e1, e2), SubNode::PlusRule(f1, f2)) => {
            let (i, j, al, ar) = unpack_plus(&d1.lhs)?;
            let (im, jm, alm, arm) = unpack_plus(&d1.rhs)?;
            let (i2, j2, al2, ar2) = unpack_plus(&d2.rhs)?;
            let prem1 = trans_additive_premise(e1, f1, i, im, i2, al, alm, al2)?;
            let prem2 = trans_additive_premise(e2, f2, j, jm, j2, ar, arm, ar2)?;
            SubNode::PlusRule(Box::new(prem1), Box::new(prem2))
        }
        _ => {
            return Err(SubError::ShapeMismatch(
                "transitivity across different rules".into(),
            ))
        }
    };
    Ok(SubDeriv {
        locus: d1.locus.clone(),
        lhs: d1.lhs.clone(),
        rhs: d2.rhs.clone(),
        node,
    })
}

fn unpack_with(a: &Formula) -> Result<(&SetFun, &SetFun, &Formula, &Formula), SubError> {
    match a {
        Formula::With(i, j, x, y) => Ok((i, j, x, y)),
        _ => Err(SubError::ShapeMismatch("expected additive product".into())),
    }
}

fn unpack_plus(a: &Formula) -> Result<(&SetFun, &SetFun, &Formula, &Formula), SubError> {
    match a {
        Formula::Plus(i, j, x, y) => Ok((i, j, x, y)),
        _ => Err(SubError::ShapeMismatch("expected additive sum".into())),
    }
}

/// Build the premise of the composed additive rule. The injections of the
/// three formulae share their images, so each pullback of two of them has
/// bijective projections; the three pullbacks are glued along the middle
/// injection.
#[allow(clippy::too_many_arguments)]
fn trans_additive_premise(
    e1: &SubDeriv,
    e2: &SubDeriv,
    i: &SetFun,
    im: &SetFun,
    i2: &SetFun,
    a: &Formula,
    am: &Formula,
    a2: &Formula,
) -> Result<SubDeriv, SubError> {
    let p1 = pullback(i, im)?;
    let p2 = pullback(im, i2)?;
    let p3 = pullback(i, i2)?;
    // inverse of the injective middle annotation on its image
    let mid_inverse: BTreeMap<Elem, Elem> = im
        .graph()
        .iter()
        .map(|(k, v)| (v.clone(), k.clone()))
        .collect();
    let mut g1 = BTreeMap::new();
    let mut g2 = BTreeMap::new();
    for q in &p3.locus {
        if let Elem::Pair(s, t) = q {
            let x = i.apply(s)?;
            let sm = mid_inverse
                .get(&x)
                .ok_or(SubError::Orthogonality)?
                .clone();
            g1.insert(q.clone(), Elem::pair((**s).clone(), sm.clone()));
            g2.insert(q.clone(), Elem::pair(sm, (**t).clone()));
        }
    }
    let phi1 = SetFun::new(p3.locus.clone(), p1.locus.clone(), g1)?;
    let phi2 = SetFun::new(p3.locus.clone(), p2.locus.clone(), g2)?;
    let s1 = chain_sub(
        std::slice::from_ref(&p3.p1),
        &[phi1.clone(), p1.p1.clone()],
        i.dom(),
        a,
    )?;
    let s2 = bc_sub(&phi1, e1)?;
    let s3 = chain_sub(
        &[phi1.clone(), p1.p2.clone()],
        &[phi2.clone(), p2.p1.clone()],
        im.dom(),
        am,
    )?;
    let s4 = bc_sub(&phi2, e2)?;
    let s5 = chain_sub(
        &[phi2.clone(), p2.p2.clone()],
        std::slice::from_ref(&p3.p2),
        i2.dom(),
        a2,
    )?;
    trans(&s1, &trans(&s2, &trans(&s3, &trans(&s4, &s5)?)?)?)
}

/// Lift a derivation along a base change: from `a <= b` over the codomain of
/// `f`, build `f(a) <= f(b)` over its domain.
pub fn bc_sub(f: &SetFun, d: &SubDeriv) -> Result<SubDeriv, SubError> {
    if f.cod() != &d.locus {
        return Err(SubError::EndpointMismatch(
            "base change does not target the derivation locus".into(),
        ));
    }
    let lhs = base_change(f, &d.lhs)?;
    let rhs = base_change(f, &d.rhs)?;
    let locus = f.dom().clone();
    let node = match (&d.node, &d.lhs, &d.rhs) {
        (SubNode::AxPVar, ..) => SubNode::AxPVar,
        (SubNode::AxNVar, ..) => SubNode::AxNVar,
        (SubNode::AxOne, ..) => SubNode::AxOne,
        (SubNode::AxBot, ..) => SubNode::AxBot,
        (SubNode::AxZero, ..) => SubNode::AxZero,
        (SubNode::AxTop, ..) => SubNode::AxTop,
        (SubNode::TensorCong(d1, d2), ..) => {
            SubNode::TensorCong(Box::new(bc_sub(f, d1)?), Box::new(bc_sub(f, d2)?))
        }
        (SubNode::ParCong(d1, d2), ..) => {
            SubNode::ParCong(Box::new(bc_sub(f, d1)?), Box::new(bc_sub(f, d2)?))
        }
        (SubNode::BangRule(g, e), Formula::Bang(u, a), Formula::Bang(_, a2)) => {
            let gu = SetFun::compose(g, u)?;
            let pu = pullback(f, u)?;
            let pgu = pullback(f, &gu)?;
            // witness (k, y) -> (k, g(y))
            let mut graph = BTreeMap::new();
            for q in &pgu.locus {
                if let Elem::Pair(k, y) = q {
                    graph.insert(
                        q.clone(),
                        Elem::pair((**k).clone(), g.apply(y)?),
                    );
                }
            }
            let gstar = SetFun::new(pgu.locus.clone(), pu.locus.clone(), graph)?;
            let s1 = chain_sub(
                &[gstar.clone(), pu.p2.clone()],
                &[pgu.p2.clone(), g.clone()],
                u.dom(),
                a,
            )?;
            let s2 = bc_sub(&pgu.p2, e)?;
            let _ = a2;
            let prem = trans(&s1, &s2)?;
            SubNode::BangRule(gstar, Box::new(prem))
        }
        (SubNode::QuestRule(g, e), Formula::Quest(_, a), Formula::Quest(u, a2)) => {
            let gu = SetFun::compose(g, u)?;
            let pu = pullback(f, u)?;
            let pgu = pullback(f, &gu)?;
            let mut graph = BTreeMap::new();
            for q in &pgu.locus {
                if let Elem::Pair(k, y) = q {
                    graph.insert(
                        q.clone(),
                        Elem::pair((**k).clone(), g.apply(y)?),
                    );
                }
            }
            let gstar = SetFun::new(pgu.locus.clone(), pu.locus.clone(), graph)?;
            let s1 = bc_sub(&pgu.p2, e)?;
            let s2 = chain_sub(
                &[pgu.p2.clone(), g.clone()],
                &[gstar.clone(), pu.p2.clone()],
                u.dom(),
                a2,
            )?;
            let _ = a;
            let prem = trans(&s1, &s2)?;
            SubNode::QuestRule(gstar, Box::new(prem))
        }
        (SubNode::WithRule(e1, e2), Formula::With(i, j, al, ar), Formula::With(i2, j2, al2, ar2))
        | (SubNode::PlusRule(e1, e2), Formula::Plus(i, j, al, ar), Formula::Plus(i2, j2, al2, ar2)) => {
            let prem1 = bc_additive_premise(f, e1, i, i2, al, al2)?;
            let prem2 = bc_additive_premise(f, e2, j, j2, ar, ar2)?;
            match &d.node {
                SubNode::WithRule(..) => SubNode::WithRule(Box::new(prem1), Box::new(prem2)),
                _ => SubNode::PlusRule(Box::new(prem1), Box::new(prem2)),
            }
        }
        _ => {
            return Err(SubError::ShapeMismatch(
                "base change applied to malformed derivation".into(),
            ))
        }
    };
    Ok(SubDeriv {
        locus,
        lhs,
        rhs,
        node,
    })
}

/// One branch premise for base-changing an additive rule.
fn bc_additive_premise(
    f: &SetFun,
    e: &SubDeriv,
    i: &SetFun,
    i2: &SetFun,
    a: &Formula,
    a2: &Formula,
) -> Result<SubDeriv, SubError> {
    let pi = pullback(f, i)?;
    let pi2 = pullback(f, i2)?;
    let p = pullback(i, i2)?;
    let q = pullback(&pi.p1, &pi2.p1)?;
    // map ((k,s),(k,t)) over q to (s,t) over p
    let mut graph = BTreeMap::new();
    for x in &q.locus {
        if let Elem::Pair(l, r) = x {
            if let (Elem::Pair(_, s), Elem::Pair(_, t)) = (&**l, &**r) {
                graph.insert(x.clone(), Elem::pair((**s).clone(), (**t).clone()));
            }
        }
    }
    let psi = SetFun::new(q.locus.clone(), p.locus.clone(), graph)?;
    let s1 = chain_sub(
        &[q.p1.clone(), pi.p2.clone()],
        &[psi.clone(), p.p1.clone()],
        i.dom(),
        a,
    )?;
    let s2 = bc_sub(&psi, e)?;
    let s3 = chain_sub(
        &[psi.clone(), p.p2.clone()],
        &[q.p2.clone(), pi2.p2.clone()],
        i2.dom(),
        a2,
    )?;
    trans(&s1, &trans(&s2, &s3)?)
}

// --- decision procedure ----------------------------------------------------

/// Bounded decision of the subtyping relation by structural search over
/// exponential witnesses.
pub struct Decider {
    memo: HashMap<(Locus, Formula, Formula), Option<SubDeriv>>,
    /// Maximum number of candidate witnesses per exponential node.
    pub node_budget: usize,
}

impl Default for Decider {
    fn default() -> Self {
        Decider {
            memo: HashMap::new(),
            node_budget: 1_000_000,
        }
    }
}

impl Decider {
    pub fn new(node_budget: usize) -> Self {
        Decider {
            memo: HashMap::new(),
            node_budget,
        }
    }

    /// Decide `a <= b` over `locus`, returning a derivation when the search
    /// finds one.
    pub fn decide(
        &mut self,
        locus: &Locus,
        a: &Formula,
        b: &Formula,
    ) -> Result<Option<SubDeriv>, SubError> {
        if a.erase() != b.erase() {
            return Ok(None);
        }
        let key = (locus.clone(), a.clone(), b.clone());
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let res = self.decide_uncached(locus, a, b)?;
        self.memo.insert(key, res.clone());
        Ok(res)
    }

    fn decide_uncached(
        &mut self,
        locus: &Locus,
        a: &Formula,
        b: &Formula,
    ) -> Result<Option<SubDeriv>, SubError> {
        let mk = |node: SubNode| SubDeriv {
            locus: locus.clone(),
            lhs: a.clone(),
            rhs: b.clone(),
            node,
        };
        match (a, b) {
            (Formula::PVar(f, x), Formula::PVar(g, y)) => {
                Ok((f == g && x == y).then(|| mk(SubNode::AxPVar)))
            }
            (Formula::NVar(f, x), Formula::NVar(g, y)) => {
                Ok((f == g && x == y).then(|| mk(SubNode::AxNVar)))
            }
            (Formula::One, Formula::One) => Ok(Some(mk(SubNode::AxOne))),
            (Formula::Bot, Formula::Bot) => Ok(Some(mk(SubNode::AxBot))),
            (Formula::Zero, Formula::Zero) => Ok(Some(mk(SubNode::AxZero))),
            (Formula::Top, Formula::Top) => Ok(Some(mk(SubNode::AxTop))),
            (Formula::Tensor(a1, a2), Formula::Tensor(b1, b2)) => {
                let d1 = self.decide(locus, a1, b1)?;
                let d2 = self.decide(locus, a2, b2)?;
                Ok(match (d1, d2) {
                    (Some(d1), Some(d2)) => {
                        Some(mk(SubNode::TensorCong(Box::new(d1), Box::new(d2))))
                    }
                    _ => None,
                })
            }
            (Formula::Par(a1, a2), Formula::Par(b1, b2)) => {
                let d1 = self.decide(locus, a1, b1)?;
                let d2 = self.decide(locus, a2, b2)?;
                Ok(match (d1, d2) {
                    (Some(d1), Some(d2)) => Some(mk(SubNode::ParCong(Box::new(d1), Box::new(d2)))),
                    _ => None,
                })
            }
            (Formula::With(i, j, a1, a2), Formula::With(i2, j2, b1, b2))
            | (Formula::Plus(i, j, a1, a2), Formula::Plus(i2, j2, b1, b2)) => {
                if !pullback(i, j2)?.locus.is_empty() || !pullback(j, i2)?.locus.is_empty() {
                    return Ok(None);
                }
                let pi = pullback(i, i2)?;
                let pj = pullback(j, j2)?;
                let d1 = self.decide(
                    &pi.locus,
                    &base_change(&pi.p1, a1)?,
                    &base_change(&pi.p2, b1)?,
                )?;
                let d2 = self.decide(
                    &pj.locus,
                    &base_change(&pj.p1, a2)?,
                    &base_change(&pj.p2, b2)?,
                )?;
                Ok(match (d1, d2) {
                    (Some(d1), Some(d2)) => Some(mk(match a {
                        Formula::With(..) => SubNode::WithRule(Box::new(d1), Box::new(d2)),
                        _ => SubNode::PlusRule(Box::new(d1), Box::new(d2)),
                    })),
                    _ => None,
                })
            }
            (Formula::Bang(u, a1), Formula::Bang(w, b1)) => {
                for g in self.witness_candidates(u, w)? {
                    if let Some(prem) = self.decide(g.dom(), &base_change(&g, a1)?, b1)? {
                        return Ok(Some(mk(SubNode::BangRule(g, Box::new(prem)))));
                    }
                }
                Ok(None)
            }
            (Formula::Quest(w, a1), Formula::Quest(u, b1)) => {
                for g in self.witness_candidates(u, w)? {
                    if let Some(prem) = self.decide(g.dom(), a1, &base_change(&g, b1)?)? {
                        return Ok(Some(mk(SubNode::QuestRule(g, Box::new(prem)))));
                    }
                }
                Ok(None)
            }
            _ => Ok(None),
        }
    }

    /// All functions `g : dom(w) -> dom(u)` with `g;u = w`, enumerated
    /// fiberwise, in deterministic order, subject to the node budget.
    fn witness_candidates(&self, u: &SetFun, w: &SetFun) -> Result<Vec<SetFun>, SubError> {
        if u.cod() != w.cod() {
            return Ok(Vec::new());
        }
        let keys: Vec<&Elem> = w.dom().iter().collect();
        let mut fibers: Vec<Vec<Elem>> = Vec::with_capacity(keys.len());
        let mut count: usize = 1;
        for y in &keys {
            let target = w.apply(y)?;
            let fiber: Vec<Elem> = u.preimage(&target)?.into_iter().collect();
            if fiber.is_empty() {
                return Ok(Vec::new());
            }
            count = count.saturating_mul(fiber.len());
            if count > self.node_budget {
                return Err(SubError::BudgetExceeded);
            }
            fibers.push(fiber);
        }
        let mut out = Vec::with_capacity(count);
        let mut idx = vec![0usize; keys.len()];
        for _ in 0..count {
            let graph: BTreeMap<Elem, Elem> = keys
                .iter()
                .enumerate()
                .map(|(pos, k)| ((*k).clone(), fibers[pos][idx[pos]].clone()))
                .collect();
            out.push(SetFun::new(w.dom().clone(), u.dom().clone(), graph)?);
            for (d, fib) in idx.iter_mut().zip(&fibers) {
                *d += 1;
                if *d < fib.len() {
                    break;
                }
                *d = 0;
            }
        }
        Ok(out)
    }
}

/// One-shot wrapper around [`Decider`].
pub fn decide_subtype(
    locus: &Locus,
    a: &Formula,
    b: &Formula,
    node_budget: usize,
) -> Result<Option<SubDeriv>, SubError> {
    Decider::new(node_budget).decide(locus, a, b)
}

// --- decomposition of pointwise derivations --------------------------------

/// Glue a family of derivations between the restrictions of `a` and `b` to
/// each point of `locus` into a single derivation `a <= b` over `locus`.
pub fn decompose(
    points: &BTreeMap<Elem, SubDeriv>,
    locus: &Locus,
    a: &Formula,
    b: &Formula,
) -> Result<SubDeriv, SubError> {
    // validate the family's endpoints once at the root
    for x in locus {
        let d = points.get(x).ok_or_else(|| SubError::MissingPoint(x.clone()))?;
        let cst = SetFun::cst(x, locus)?;
        if d.lhs != base_change(&cst, a)? || d.rhs != base_change(&cst, b)? {
            return Err(SubError::EndpointMismatch(format!(
                "pointwise derivation at {x} has wrong endpoints"
            )));
        }
    }
    decompose_inner(points, locus, a, b)
}

fn decompose_inner(
    points: &BTreeMap<Elem, SubDeriv>,
    locus: &Locus,
    a: &Formula,
    b: &Formula,
) -> Result<SubDeriv, SubError> {
    let mk = |node: SubNode| SubDeriv {
        locus: locus.clone(),
        lhs: a.clone(),
        rhs: b.clone(),
        node,
    };
    let point = |x: &Elem| -> Result<&SubDeriv, SubError> {
        points.get(x).ok_or_else(|| SubError::MissingPoint(x.clone()))
    };
    match (a, b) {
        (Formula::PVar(f, x), Formula::PVar(g, y)) if f == g && x == y => Ok(mk(SubNode::AxPVar)),
        (Formula::NVar(f, x), Formula::NVar(g, y)) if f == g && x == y => Ok(mk(SubNode::AxNVar)),
        (Formula::One, Formula::One) => Ok(mk(SubNode::AxOne)),
        (Formula::Bot, Formula::Bot) => Ok(mk(SubNode::AxBot)),
        (Formula::Zero, Formula::Zero) if locus.is_empty() => Ok(mk(SubNode::AxZero)),
        (Formula::Top, Formula::Top) if locus.is_empty() => Ok(mk(SubNode::AxTop)),
        (Formula::Tensor(a1, a2), Formula::Tensor(b1, b2))
        | (Formula::Par(a1, a2), Formula::Par(b1, b2)) => {
            let mut p1 = BTreeMap::new();
            let mut p2 = BTreeMap::new();
            for x in locus {
                match &point(x)?.node {
                    SubNode::TensorCong(d1, d2) | SubNode::ParCong(d1, d2) => {
                        p1.insert(x.clone(), (**d1).clone());
                        p2.insert(x.clone(), (**d2).clone());
                    }
                    _ => {
                        return Err(SubError::ShapeMismatch(
                            "pointwise derivation does not match connective".into(),
                        ))
                    }
                }
            }
            let d1 = decompose_inner(&p1, locus, a1, b1)?;
            let d2 = decompose_inner(&p2, locus, a2, b2)?;
            Ok(mk(match a {
                Formula::Tensor(..) => SubNode::TensorCong(Box::new(d1), Box::new(d2)),
                _ => SubNode::ParCong(Box::new(d1), Box::new(d2)),
            }))
        }
        (Formula::Bang(u, a0), Formula::Bang(w, b0)) => {
            // glue the fiberwise witnesses into one function over dom(w)
            let mut graph: BTreeMap<Elem, Elem> = BTreeMap::new();
            let mut new_points: BTreeMap<Elem, SubDeriv> = BTreeMap::new();
            for y in w.dom() {
                let x = w.apply(y)?;
                let dx = point(&x)?;
                let (gx, prem_x) = match &dx.node {
                    SubNode::BangRule(g, p) => (g, p),
                    _ => {
                        return Err(SubError::ShapeMismatch(
                            "pointwise derivation is not an exponential rule".into(),
                        ))
                    }
                };
                let cst_x = SetFun::cst(&x, locus)?;
                let pux = pullback(&cst_x, u)?;
                let pwx = pullback(&cst_x, w)?;
                let q = Elem::pair(Elem::Unit, y.clone());
                let img = gx.apply(&q)?;
                let z = match &img {
                    Elem::Pair(_, z) => (**z).clone(),
                    _ => return Err(SubError::ShapeMismatch("witness image shape".into())),
                };
                graph.insert(y.clone(), z);
                // pointwise premise over the singleton at y
                let cst_q = SetFun::cst(&q, &pwx.locus)?;
                let py = bc_sub(&cst_q, prem_x)?;
                let z_target = graph[y].clone();
                let cst_y = SetFun::cst(y, w.dom())?;
                let g_partial = SetFun::cst(&z_target, u.dom())?;
                let left = chain_sub(
                    std::slice::from_ref(&g_partial),
                    &[cst_q.clone(), gx.clone(), pux.p2.clone()],
                    u.dom(),
                    a0,
                )?;
                let right = chain_sub(
                    &[cst_q.clone(), pwx.p2.clone()],
                    std::slice::from_ref(&cst_y),
                    w.dom(),
                    b0,
                )?;
                let pt = trans(&left, &trans(&py, &right)?)?;
                new_points.insert(y.clone(), pt);
            }
            let g = SetFun::new(w.dom().clone(), u.dom().clone(), graph)?;
            if &SetFun::compose(&g, u)? != w {
                return Err(SubError::WitnessComposite);
            }
            // re-key the premise points: they were built with lhs cst to the
            // selected element of dom(u); rebuild so the lhs is cst_y(g(a0)).
            let ga0 = base_change(&g, a0)?;
            let mut fixed_points = BTreeMap::new();
            for (y, pt) in new_points {
                let cst_y = SetFun::cst(&y, w.dom())?;
                let want_lhs = base_change(&cst_y, &ga0)?;
                let fix = chain_sub(
                    &[cst_y.clone(), g.clone()],
                    &[SetFun::cst(&g.apply(&y)?, u.dom())?],
                    u.dom(),
                    a0,
                )?;
                debug_assert_eq!(fix.lhs, want_lhs);
                fixed_points.insert(y, trans(&fix, &pt)?);
            }
            let prem = decompose_inner(&fixed_points, w.dom(), &ga0, b0)?;
            Ok(mk(SubNode::BangRule(g, Box::new(prem))))
        }
        (Formula::Quest(w, a0), Formula::Quest(u, b0)) => {
            let mut graph: BTreeMap<Elem, Elem> = BTreeMap::new();
            let mut new_points: BTreeMap<Elem, SubDeriv> = BTreeMap::new();
            for z in w.dom() {
                let x = w.apply(z)?;
                let dx = point(&x)?;
                let (gx, prem_x) = match &dx.node {
                    SubNode::QuestRule(g, p) => (g, p),
                    _ => {
                        return Err(SubError::ShapeMismatch(
                            "pointwise derivation is not an exponential rule".into(),
                        ))
                    }
                };
                let cst_x = SetFun::cst(&x, locus)?;
                let pux = pullback(&cst_x, u)?;
                let pwx = pullback(&cst_x, w)?;
                let p = Elem::pair(Elem::Unit, z.clone());
                let img = gx.apply(&p)?;
                let y = match &img {
                    Elem::Pair(_, y) => (**y).clone(),
                    _ => return Err(SubError::ShapeMismatch("witness image shape".into())),
                };
                graph.insert(z.clone(), y.clone());
                let cst_p = SetFun::cst(&p, &pwx.locus)?;
                let pz = bc_sub(&cst_p, prem_x)?;
                let cst_z = SetFun::cst(z, w.dom())?;
                let left = chain_sub(
                    std::slice::from_ref(&cst_z),
                    &[cst_p.clone(), pwx.p2.clone()],
                    w.dom(),
                    a0,
                )?;
                let right = chain_sub(
                    &[cst_p.clone(), gx.clone(), pux.p2.clone()],
                    std::slice::from_ref(&SetFun::cst(&y, u.dom())?),
                    u.dom(),
                    b0,
                )?;
                let pt = trans(&left, &trans(&pz, &right)?)?;
                new_points.insert(z.clone(), pt);
            }
            let g = SetFun::new(w.dom().clone(), u.dom().clone(), graph)?;
            if &SetFun::compose(&g, u)? != w {
                return Err(SubError::WitnessComposite);
            }
            let gb0 = base_change(&g, b0)?;
            let mut fixed_points = BTreeMap::new();
            for (z, pt) in new_points {
                let cst_z = SetFun::cst(&z, w.dom())?;
                let fix = chain_sub(
                    &[SetFun::cst(&g.apply(&z)?, u.dom())?],
                    &[cst_z.clone(), g.clone()],
                    u.dom(),
                    b0,
                )?;
                fixed_points.insert(z, trans(&pt, &fix)?);
            }
            let prem = decompose_inner(&fixed_points, w.dom(), a0, &gb0)?;
            Ok(mk(SubNode::QuestRule(g, Box::new(prem))))
        }
        (Formula::With(i, j, al, ar), Formula::With(i2, j2, bl, br))
        | (Formula::Plus(i, j, al, ar), Formula::Plus(i2, j2, bl, br)) => {
            if !pullback(i, j2)?.locus.is_empty() || !pullback(j, i2)?.locus.is_empty() {
                return Err(SubError::Orthogonality);
            }
            let left_branch = |first: bool| -> Result<SubDeriv, SubError> {
                let (inj, inj2, ca, cb) = if first {
                    (i, i2, al, bl)
                } else {
                    (j, j2, ar, br)
                };
                let p = pullback(inj, inj2)?;
                let mut pts = BTreeMap::new();
                for pe in &p.locus {
                    let (s, t) = match pe {
                        Elem::Pair(s, t) => ((**s).clone(), (**t).clone()),
                        _ => unreachable!(),
                    };
                    let x = inj.apply(&s)?;
                    let dx = point(&x)?;
                    let ex = match (&dx.node, first) {
                        (SubNode::WithRule(e1, _), true) | (SubNode::PlusRule(e1, _), true) => e1,
                        (SubNode::WithRule(_, e2), false) | (SubNode::PlusRule(_, e2), false) => e2,
                        _ => {
                            return Err(SubError::ShapeMismatch(
                                "pointwise derivation is not an additive rule".into(),
                            ))
                        }
                    };
                    let cst_x = SetFun::cst(&x, locus)?;
                    let pix = pullback(&cst_x, inj)?;
                    let pix2 = pullback(&cst_x, inj2)?;
                    let q = Elem::pair(
                        Elem::pair(Elem::Unit, s.clone()),
                        Elem::pair(Elem::Unit, t.clone()),
                    );
                    let rx = pullback(&pix.p1, &pix2.p1)?;
                    let cst_q = SetFun::cst(&q, &rx.locus)?;
                    let pq = bc_sub(&cst_q, ex)?;
                    let cst_p = SetFun::cst(pe, &p.locus)?;
                    let lchain = chain_sub(
                        &[cst_p.clone(), p.p1.clone()],
                        &[cst_q.clone(), rx.p1.clone(), pix.p2.clone()],
                        inj.dom(),
                        ca,
                    )?;
                    let rchain = chain_sub(
                        &[cst_q.clone(), rx.p2.clone(), pix2.p2.clone()],
                        &[cst_p.clone(), p.p2.clone()],
                        inj2.dom(),
                        cb,
                    )?;
                    pts.insert(pe.clone(), trans(&lchain, &trans(&pq, &rchain)?)?);
                }
                decompose_inner(
                    &pts,
                    &p.locus,
                    &base_change(&p.p1, ca)?,
                    &base_change(&p.p2, cb)?,
                )
            };
            let prem1 = left_branch(true)?;
            let prem2 = left_branch(false)?;
            Ok(mk(match a {
                Formula::With(..) => SubNode::WithRule(Box::new(prem1), Box::new(prem2)),
                _ => SubNode::PlusRule(Box::new(prem1), Box::new(prem2)),
            }))
        }
        _ => Err(SubError::ShapeMismatch(
            "decomposition endpoints do not match".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::check_def;
    use crate::setfun::{atoms, coproduct};

    fn env2() -> (Locus, VarEnv) {
        let i = atoms(&["a", "b"]);
        let mut env = VarEnv::new();
        env.insert("X".to_string(), i.clone());
        env.insert("Y".to_string(), i.clone());
        (i, env)
    }

    fn pvar(f: SetFun, x: &str) -> Formula {
        Formula::PVar(f, x.to_string())
    }

    /// A formula over `i = {a, b}` exercising every class of connective.
    fn sample(i: &Locus) -> Formula {
        let id = SetFun::identity(i);
        let x = pvar(id.clone(), "X");
        let y = Formula::NVar(id.clone(), "Y".to_string());
        let sum = coproduct(i, i);
        let fold = crate::setfun::copair(&SetFun::identity(i), &SetFun::identity(i)).unwrap();
        let la = atoms(&["a"]);
        let lb = atoms(&["b"]);
        let ia = SetFun::from_fn(la.clone(), i.clone(), |e| e.clone()).unwrap();
        let ib = SetFun::from_fn(lb.clone(), i.clone(), |e| e.clone()).unwrap();
        Formula::tensor(
            Formula::tensor(
                Formula::bang(id.clone(), Formula::par(x, y)),
                Formula::quest(
                    fold,
                    Formula::plus(
                        sum.inl.clone(),
                        sum.inr.clone(),
                        pvar(SetFun::identity(i), "X"),
                        pvar(SetFun::identity(i), "Y"),
                    ),
                ),
            ),
            Formula::par(
                Formula::with(
                    ia.clone(),
                    ib.clone(),
                    pvar(ia, "X"),
                    Formula::NVar(ib, "Y".to_string()),
                ),
                Formula::One,
            ),
        )
    }

    #[test]
    fn refl_checks_on_rich_formula() {
        let (i, env) = env2();
        let a = sample(&i);
        check_def(&i, &a, &env).unwrap();
        let d = refl(&i, &a).unwrap();
        let (l, lhs, rhs) = check_sub(&d, &env).unwrap();
        assert_eq!(l, i);
        assert_eq!(lhs, a);
        assert_eq!(rhs, a);
    }

    #[test]
    fn compose_iso_checks_both_directions() {
        let (i, env) = env2();
        let a = sample(&i);
        let mid = atoms(&["p", "q", "r"]);
        let g = SetFun::from_fn(mid.clone(), i.clone(), |e| match e {
            Elem::Atom(s) if s == "r" => Elem::atom("b"),
            _ => Elem::atom("a"),
        })
        .unwrap();
        let top = atoms(&["m", "n"]);
        let f = SetFun::from_fn(top.clone(), mid.clone(), |e| match e {
            Elem::Atom(s) if s == "m" => Elem::atom("p"),
            _ => Elem::atom("r"),
        })
        .unwrap();
        let (fwd, bwd) = compose_iso(&f, &g, &i, &a).unwrap();
        check_sub(&fwd, &env).unwrap();
        check_sub(&bwd, &env).unwrap();
        assert_eq!(fwd.lhs, bwd.rhs);
        assert_eq!(fwd.rhs, bwd.lhs);
        let round = trans(&fwd, &bwd).unwrap();
        check_sub(&round, &env).unwrap();
    }

    fn incl_a(i: &Locus) -> SetFun {
        let sub = atoms(&["a"]);
        SetFun::from_fn(sub, i.clone(), |e| e.clone()).unwrap()
    }

    #[test]
    fn decide_finds_exponential_widening() {
        let (i, env) = env2();
        let incl = incl_a(&i);
        let narrow = Formula::bang(incl.clone(), pvar(incl.clone(), "X"));
        let wide = Formula::bang(SetFun::identity(&i), pvar(SetFun::identity(&i), "X"));
        check_def(&i, &narrow, &env).unwrap();
        check_def(&i, &wide, &env).unwrap();
        let d = decide_subtype(&i, &wide, &narrow, 10_000).unwrap().unwrap();
        check_sub(&d, &env).unwrap();
        // no converse: the inclusion has no section over the missing point
        assert!(decide_subtype(&i, &narrow, &wide, 10_000).unwrap().is_none());
    }

    #[test]
    fn decide_agrees_with_negation_dual() {
        let (i, env) = env2();
        let incl = incl_a(&i);
        let narrow = Formula::bang(incl.clone(), pvar(incl.clone(), "X"));
        let wide = Formula::bang(SetFun::identity(&i), pvar(SetFun::identity(&i), "X"));
        let d = decide_subtype(&i, &wide, &narrow, 10_000).unwrap().unwrap();
        let nd = negate_sub(&d).unwrap();
        check_sub(&nd, &env).unwrap();
        assert_eq!(nd.lhs, narrow.negate());
        assert_eq!(nd.rhs, wide.negate());
        let direct = decide_subtype(&i, &narrow.negate(), &wide.negate(), 10_000)
            .unwrap()
            .unwrap();
        check_sub(&direct, &env).unwrap();
    }

    #[test]
    fn base_change_of_derivation_checks() {
        let (i, env) = env2();
        let incl = incl_a(&i);
        let narrow = Formula::bang(incl.clone(), pvar(incl.clone(), "X"));
        let wide = Formula::bang(SetFun::identity(&i), pvar(SetFun::identity(&i), "X"));
        let d = decide_subtype(&i, &wide, &narrow, 10_000).unwrap().unwrap();
        let three = atoms(&["u", "v", "w"]);
        let f = SetFun::from_fn(three.clone(), i.clone(), |e| match e {
            Elem::Atom(s) if s == "w" => Elem::atom("b"),
            _ => Elem::atom("a"),
        })
        .unwrap();
        let bd = bc_sub(&f, &d).unwrap();
        let (l, lhs, rhs) = check_sub(&bd, &env).unwrap();
        assert_eq!(l, three);
        assert_eq!(lhs, base_change(&f, &wide).unwrap());
        assert_eq!(rhs, base_change(&f, &narrow).unwrap());
    }

    #[test]
    fn transitivity_through_three_exponentials() {
        let (i, env) = env2();
        let incl = incl_a(&i);
        let narrow = Formula::bang(incl.clone(), pvar(incl.clone(), "X"));
        let wide = Formula::bang(SetFun::identity(&i), pvar(SetFun::identity(&i), "X"));
        let dbl = atoms(&["a1", "a2", "b1"]);
        let cover = SetFun::from_fn(dbl.clone(), i.clone(), |e| match e {
            Elem::Atom(s) if s.starts_with('a') => Elem::atom("a"),
            _ => Elem::atom("b"),
        })
        .unwrap();
        let covered = Formula::bang(cover.clone(), pvar(cover.clone(), "X"));
        let d1 = decide_subtype(&i, &covered, &wide, 10_000).unwrap().unwrap();
        let d2 = decide_subtype(&i, &wide, &narrow, 10_000).unwrap().unwrap();
        let d = trans(&d1, &d2).unwrap();
        let (_, lhs, rhs) = check_sub(&d, &env).unwrap();
        assert_eq!(lhs, covered);
        assert_eq!(rhs, narrow);
    }

    fn additive_pair(i: &Locus) -> (Locus, Formula, Formula) {
        let sum = coproduct(i, i);
        let k = sum.locus.clone();
        let incl = incl_a(i);
        let a1 = Formula::with(
            sum.inl.clone(),
            sum.inr.clone(),
            Formula::bang(SetFun::identity(i), pvar(SetFun::identity(i), "X")),
            pvar(SetFun::identity(i), "Y"),
        );
        let a2 = Formula::with(
            sum.inl.clone(),
            sum.inr.clone(),
            Formula::bang(incl.clone(), pvar(incl, "X")),
            pvar(SetFun::identity(i), "Y"),
        );
        (k, a1, a2)
    }

    #[test]
    fn additive_rule_with_orthogonality_and_trans() {
        let (i, env) = env2();
        let (k, a1, a2) = additive_pair(&i);
        check_def(&k, &a1, &env).unwrap();
        check_def(&k, &a2, &env).unwrap();
        let d = decide_subtype(&k, &a1, &a2, 10_000).unwrap().unwrap();
        check_sub(&d, &env).unwrap();
        let r = refl(&k, &a2).unwrap();
        let t = trans(&d, &r).unwrap();
        let (_, lhs, rhs) = check_sub(&t, &env).unwrap();
        assert_eq!(lhs, a1);
        assert_eq!(rhs, a2);
        // dualization of the additive rule
        let nd = negate_sub(&d).unwrap();
        check_sub(&nd, &env).unwrap();
        assert_eq!(nd.lhs, a2.negate());
        assert_eq!(nd.rhs, a1.negate());
    }

    #[test]
    fn decomposition_rebuilds_a_global_derivation() {
        let (i, env) = env2();
        let incl = incl_a(&i);
        let narrow = Formula::bang(incl.clone(), pvar(incl.clone(), "X"));
        let wide = Formula::bang(SetFun::identity(&i), pvar(SetFun::identity(&i), "X"));
        let d = decide_subtype(&i, &wide, &narrow, 10_000).unwrap().unwrap();
        let mut pts = BTreeMap::new();
        for x in &i {
            let cst = SetFun::cst(x, &i).unwrap();
            pts.insert(x.clone(), bc_sub(&cst, &d).unwrap());
        }
        let glued = decompose(&pts, &i, &wide, &narrow).unwrap();
        let (l, lhs, rhs) = check_sub(&glued, &env).unwrap();
        assert_eq!(l, i);
        assert_eq!(lhs, wide);
        assert_eq!(rhs, narrow);
    }

    #[test]
    fn decomposition_rebuilds_additive_and_nested() {
        let (i, env) = env2();
        let (k, a1, a2) = additive_pair(&i);
        let d = decide_subtype(&k, &a1, &a2, 10_000).unwrap().unwrap();
        let mut pts = BTreeMap::new();
        for x in &k {
            let cst = SetFun::cst(x, &k).unwrap();
            pts.insert(x.clone(), bc_sub(&cst, &d).unwrap());
        }
        let glued = decompose(&pts, &k, &a1, &a2).unwrap();
        check_sub(&glued, &env).unwrap();
        assert_eq!(glued.lhs, a1);
        assert_eq!(glued.rhs, a2);
    }

    #[test]
    fn chain_mismatch_rejected() {
        let (i, _) = env2();
        let a = pvar(SetFun::identity(&i), "X");
        let swap = SetFun::from_fn(i.clone(), i.clone(), |e| match e {
            Elem::Atom(s) if s == "a" => Elem::atom("b"),
            _ => Elem::atom("a"),
        })
        .unwrap();
        let id = SetFun::identity(&i);
        assert!(matches!(
            chain_sub(std::slice::from_ref(&swap), std::slice::from_ref(&id), &i, &a),
            Err(SubError::ChainMismatch)
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let big = atoms(&["p", "q", "r", "s", "t", "u", "v", "w"]);
        let one = atoms(&["z"]);
        let mut env = VarEnv::new();
        env.insert("X".to_string(), big.clone());
        let to_pt = SetFun::terminal(&big);
        let cod_fix = SetFun::from_fn(big.clone(), one.clone(), |_| Elem::atom("z")).unwrap();
        let a = Formula::bang(cod_fix.clone(), pvar(SetFun::identity(&big), "X"));
        let b = Formula::bang(cod_fix, pvar(SetFun::identity(&big), "X"));
        let _ = to_pt;
        // 8 fibers of size 8 = 8^8 candidate witnesses, over a budget of 10
        let r = decide_subtype(&one, &a, &b, 10);
        assert!(matches!(r, Err(SubError::BudgetExceeded)));
    }
}
