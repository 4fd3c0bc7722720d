//! Derived proof constructions.
//!
//! The central one turns a subtyping derivation `A ⊑ B` into a proof of
//! `A ⊢ B` whose erasure is the η-expanded identity on the common erased
//! formula. The exponential cases re-express the annotation change as a
//! dereliction under a promotion; the additive cases select the matching
//! summand of the re-indexed product on the left.

use crate::formula::{base_change, Formula, VarEnv};
use crate::llproof::Side;
use crate::proof::{mk, mk_with_concl, Proof, ProofError, ProofNode, Sequent};
use crate::setfun::{pullback, Elem, SetFun};
use crate::subtyping::{bc_sub, chain_sub, refl, trans, SubDeriv, SubNode};

/// A proof of `A ⊢ B` with the positions of the two endpoint occurrences;
/// a position is `None` when the occurrence is a dropped unit (`A = 1` on
/// the left, `B = ⊥` on the right). The conclusion contains no other items.
#[derive(Debug, Clone)]
pub struct Tracked {
    pub proof: Proof,
    pub lhs: Option<usize>,
    pub rhs: Option<usize>,
}

fn adjust(pos: Option<usize>, removed: Option<usize>) -> Option<usize> {
    match (pos, removed) {
        (Some(p), Some(r)) if p > r => Some(p - 1),
        (p, _) => p,
    }
}

fn bad(msg: &str) -> ProofError {
    ProofError::RuleMismatch(msg.to_string())
}

/// Turn a subtyping derivation into a proof of its two endpoints.
pub fn sub_to_proof(rho: &SubDeriv, env: &VarEnv) -> Result<Tracked, ProofError> {
    match &rho.node {
        SubNode::AxPVar | SubNode::AxNVar => {
            let (f, var, negative) = match &rho.lhs {
                Formula::PVar(f, x) => (f.clone(), x.clone(), false),
                Formula::NVar(f, x) => (f.clone(), x.clone(), true),
                _ => return Err(bad("variable axiom endpoints")),
            };
            Ok(Tracked {
                proof: mk(ProofNode::Ax { f, var, negative }, env)?,
                lhs: Some(0),
                rhs: Some(1),
            })
        }
        SubNode::AxOne => Ok(Tracked {
            proof: mk(
                ProofNode::OneIntro {
                    locus: rho.locus.clone(),
                },
                env,
            )?,
            lhs: None,
            rhs: Some(0),
        }),
        SubNode::AxBot => Ok(Tracked {
            proof: mk(
                ProofNode::OneIntro {
                    locus: rho.locus.clone(),
                },
                env,
            )?,
            lhs: Some(0),
            rhs: None,
        }),
        SubNode::AxZero => Ok(Tracked {
            proof: mk_with_concl(
                ProofNode::TopIntro { pos: 0 },
                Sequent::new(
                    rho.locus.clone(),
                    vec![
                        (Side::Left, Formula::Zero),
                        (Side::Right, Formula::Zero),
                    ],
                ),
                env,
            )?,
            lhs: Some(0),
            rhs: Some(1),
        }),
        SubNode::AxTop => Ok(Tracked {
            proof: mk_with_concl(
                ProofNode::TopIntro { pos: 1 },
                Sequent::new(
                    rho.locus.clone(),
                    vec![(Side::Left, Formula::Top), (Side::Right, Formula::Top)],
                ),
                env,
            )?,
            lhs: Some(0),
            rhs: Some(1),
        }),
        SubNode::TensorCong(d1, d2) => {
            let t1 = sub_to_proof(d1, env)?;
            let t2 = sub_to_proof(d2, env)?;
            let off = t1.proof.concl.items.len() - usize::from(t1.rhs.is_some());
            let t = mk(
                ProofNode::TensorIntro {
                    p1: t1.rhs,
                    p2: t2.rhs,
                    out_side: Side::Right,
                    left: Box::new(t1.proof),
                    right: Box::new(t2.proof),
                },
                env,
            )?;
            let a1 = adjust(t1.lhs, t1.rhs);
            let a2 = adjust(t2.lhs, t2.rhs).map(|k| k + off);
            let par = mk(
                ProofNode::ParIntro {
                    p1: a1,
                    p2: a2,
                    out: (0, Side::Left),
                    prem: Box::new(t),
                },
                env,
            )?;
            Ok(Tracked {
                proof: par,
                lhs: Some(0),
                rhs: Some(1),
            })
        }
        SubNode::ParCong(d1, d2) => {
            let t1 = sub_to_proof(d1, env)?;
            let t2 = sub_to_proof(d2, env)?;
            let off = t1.proof.concl.items.len() - usize::from(t1.lhs.is_some());
            let t = mk(
                ProofNode::TensorIntro {
                    p1: t1.lhs,
                    p2: t2.lhs,
                    out_side: Side::Left,
                    left: Box::new(t1.proof),
                    right: Box::new(t2.proof),
                },
                env,
            )?;
            let a1 = adjust(t1.rhs, t1.lhs);
            let a2 = adjust(t2.rhs, t2.lhs).map(|k| k + off);
            let par = mk(
                ProofNode::ParIntro {
                    p1: a1,
                    p2: a2,
                    out: (1, Side::Right),
                    prem: Box::new(t),
                },
                env,
            )?;
            Ok(Tracked {
                proof: par,
                lhs: Some(0),
                rhs: Some(1),
            })
        }
        SubNode::BangRule(g, e) => {
            let (u, a) = match &rho.lhs {
                Formula::Bang(u, a) => (u.clone(), (**a).clone()),
                _ => return Err(bad("bang rule endpoints")),
            };
            let a2 = match &rho.rhs {
                Formula::Bang(_, a2) => (**a2).clone(),
                _ => return Err(bad("bang rule endpoints")),
            };
            let gu = SetFun::compose(g, &u)?;
            let pb = pullback(&gu, &u)?;
            let f = SetFun::from_fn(g.dom().clone(), pb.locus.clone(), |y| {
                Elem::pair(y.clone(), g.apply(y).expect("domain checked"))
            })?;
            // f(p2(A)) ⊑ g(A) ⊑ A'
            let rho2 = trans(
                &chain_sub(
                    &[f.clone(), pb.p2.clone()],
                    std::slice::from_ref(g),
                    u.dom(),
                    &a,
                )?,
                e,
            )?;
            let inner = sub_to_proof(&rho2, env)?;
            let d = mk(
                ProofNode::Dereliction {
                    f,
                    u: pb.p1.clone(),
                    body: base_change(&pb.p2, &a)?.negate(),
                    pos: inner.lhs,
                    out: (0, Side::Left),
                    prem: Box::new(inner.proof),
                },
                env,
            )?;
            let prem_pos = adjust(inner.rhs, inner.lhs).map(|k| k + 1);
            let concl = Sequent::new(
                u.cod().clone(),
                vec![
                    (Side::Left, rho.lhs.clone()),
                    (Side::Right, Formula::bang(gu.clone(), a2)),
                ],
            );
            let pr = mk_with_concl(
                ProofNode::Promotion {
                    v: gu,
                    out: (1, Side::Right),
                    prem_pos,
                    prem: Box::new(d),
                },
                concl,
                env,
            )?;
            Ok(Tracked {
                proof: pr,
                lhs: Some(0),
                rhs: Some(1),
            })
        }
        SubNode::QuestRule(g, e) => {
            let (u, a2) = match &rho.rhs {
                Formula::Quest(u, a2) => (u.clone(), (**a2).clone()),
                _ => return Err(bad("quest rule endpoints")),
            };
            let a = match &rho.lhs {
                Formula::Quest(_, a) => (**a).clone(),
                _ => return Err(bad("quest rule endpoints")),
            };
            let gu = SetFun::compose(g, &u)?;
            let pb = pullback(&gu, &u)?;
            let f = SetFun::from_fn(g.dom().clone(), pb.locus.clone(), |y| {
                Elem::pair(y.clone(), g.apply(y).expect("domain checked"))
            })?;
            // A ⊑ g(A') ⊑ f(p2(A'))
            let rho2 = trans(
                e,
                &chain_sub(
                    std::slice::from_ref(g),
                    &[f.clone(), pb.p2.clone()],
                    u.dom(),
                    &a2,
                )?,
            )?;
            let inner = sub_to_proof(&rho2, env)?;
            let at = inner.proof.concl.items.len() - usize::from(inner.rhs.is_some());
            let d = mk(
                ProofNode::Dereliction {
                    f,
                    u: pb.p1.clone(),
                    body: base_change(&pb.p2, &a2)?,
                    pos: inner.rhs,
                    out: (at, Side::Right),
                    prem: Box::new(inner.proof),
                },
                env,
            )?;
            let prem_pos = adjust(inner.lhs, inner.rhs);
            let concl = Sequent::new(
                u.cod().clone(),
                vec![
                    (Side::Left, Formula::quest(gu.clone(), a)),
                    (Side::Right, rho.rhs.clone()),
                ],
            );
            let pr = mk_with_concl(
                ProofNode::Promotion {
                    v: gu,
                    out: (0, Side::Left),
                    prem_pos,
                    prem: Box::new(d),
                },
                concl,
                env,
            )?;
            Ok(Tracked {
                proof: pr,
                lhs: Some(0),
                rhs: Some(1),
            })
        }
        SubNode::WithRule(e1, e2) => {
            let (i, j, a, b) = match &rho.lhs {
                Formula::With(i, j, a, b) => (i, j, (**a).clone(), (**b).clone()),
                _ => return Err(bad("product rule endpoints")),
            };
            let (i2, j2, a2, b2) = match &rho.rhs {
                Formula::With(i2, j2, a2, b2) => (i2, j2, (**a2).clone(), (**b2).clone()),
                _ => return Err(bad("product rule endpoints")),
            };
            // branch: (re-indexed product on the left) ⊢ target component
            let branch = |inj_new: &SetFun,
                          inj_old: &SetFun,
                          e: &SubDeriv,
                          comp_old: &Formula,
                          comp_new: &Formula,
                          first: bool|
             -> Result<(Proof, Option<usize>), ProofError> {
                let pi = pullback(inj_new, inj_old)?;
                let pq = pullback(inj_old, inj_new)?;
                let phi = SetFun::compose(&pi.p1.invert()?, &pi.p2)?;
                let h = SetFun::from_fn(inj_new.dom().clone(), pq.locus.clone(), |p| {
                    Elem::pair(phi.apply(p).expect("domain checked"), p.clone())
                })?;
                let rho_inner = trans(
                    &chain_sub(
                        &[pi.p1.invert()?, pi.p2.clone()],
                        &[h.clone(), pq.p1.clone()],
                        inj_old.dom(),
                        comp_old,
                    )?,
                    &trans(
                        &bc_sub(&h, e)?,
                        &chain_sub(
                            &[h.clone(), pq.p2.clone()],
                            &[],
                            inj_new.dom(),
                            comp_new,
                        )?,
                    )?,
                )?;
                let inner = sub_to_proof(&rho_inner, env)?;
                let principal = base_change(inj_new, &rho.lhs)?.negate();
                let node = if first {
                    ProofNode::PlusIntro1 {
                        principal,
                        out: (0, Side::Left),
                        ppos: inner.lhs,
                        prem: Box::new(inner.proof),
                    }
                } else {
                    ProofNode::PlusIntro2 {
                        principal,
                        out: (0, Side::Left),
                        ppos: inner.lhs,
                        prem: Box::new(inner.proof),
                    }
                };
                let p = mk(node, env)?;
                let comp_pos = adjust(inner.rhs, inner.lhs).map(|k| k + 1);
                Ok((p, comp_pos))
            };
            let (bl, lpos) = branch(i2, i, e1, &a, &a2, true)?;
            let (br, rpos) = branch(j2, j, e2, &b, &b2, false)?;
            let concl = Sequent::new(
                i2.cod().clone(),
                vec![
                    (Side::Left, rho.lhs.clone()),
                    (Side::Right, rho.rhs.clone()),
                ],
            );
            let w = mk_with_concl(
                ProofNode::WithIntro {
                    i: i2.clone(),
                    j: j2.clone(),
                    out: (1, Side::Right),
                    lpos,
                    rpos,
                    left: Box::new(bl),
                    right: Box::new(br),
                },
                concl,
                env,
            )?;
            Ok(Tracked {
                proof: w,
                lhs: Some(0),
                rhs: Some(1),
            })
        }
        SubNode::PlusRule(e1, e2) => {
            let (i, j, a, _b) = match &rho.lhs {
                Formula::Plus(i, j, a, b) => (i, j, (**a).clone(), (**b).clone()),
                _ => return Err(bad("sum rule endpoints")),
            };
            // branch: component ⊢ (re-indexed sum on the right)
            let branch = |inj_old: &SetFun,
                          inj_new: &SetFun,
                          e: &SubDeriv,
                          comp_old: &Formula,
                          first: bool|
             -> Result<(Proof, Option<usize>), ProofError> {
                let m = pullback(inj_old, inj_new)?;
                let h1 = m.p1.invert()?;
                // comp_old ⊑ h1(m.p1(comp_old)) ⊑ h1(m.p2(target component))
                let rho_inner = trans(
                    &chain_sub(
                        &[],
                        &[h1.clone(), m.p1.clone()],
                        inj_old.dom(),
                        comp_old,
                    )?,
                    &bc_sub(&h1, e)?,
                )?;
                let inner = sub_to_proof(&rho_inner, env)?;
                let principal = base_change(inj_old, &rho.rhs)?;
                let at = inner.proof.concl.items.len() - usize::from(inner.rhs.is_some());
                let node = if first {
                    ProofNode::PlusIntro1 {
                        principal,
                        out: (at, Side::Right),
                        ppos: inner.rhs,
                        prem: Box::new(inner.proof),
                    }
                } else {
                    ProofNode::PlusIntro2 {
                        principal,
                        out: (at, Side::Right),
                        ppos: inner.rhs,
                        prem: Box::new(inner.proof),
                    }
                };
                let p = mk(node, env)?;
                let comp_pos = adjust(inner.lhs, inner.rhs);
                Ok((p, comp_pos))
            };
            let (i2, j2) = match &rho.rhs {
                Formula::Plus(i2, j2, _, _) => (i2, j2),
                _ => return Err(bad("sum rule endpoints")),
            };
            let _ = (i2, j2);
            let (bl, lpos) = branch(i, i2, e1, &a, true)?;
            let (br, rpos) = branch(j, j2, e2, &_b, false)?;
            let concl = Sequent::new(
                i.cod().clone(),
                vec![
                    (Side::Left, rho.lhs.clone()),
                    (Side::Right, rho.rhs.clone()),
                ],
            );
            let w = mk_with_concl(
                ProofNode::WithIntro {
                    i: i.clone(),
                    j: j.clone(),
                    out: (0, Side::Left),
                    lpos,
                    rpos,
                    left: Box::new(bl),
                    right: Box::new(br),
                },
                concl,
                env,
            )?;
            Ok(Tracked {
                proof: w,
                lhs: Some(0),
                rhs: Some(1),
            })
        }
    }
}

/// The canonical proof of `A ⊢ A`.
pub fn identity_proof(
    locus: &crate::setfun::Locus,
    a: &Formula,
    env: &VarEnv,
) -> Result<Tracked, ProofError> {
    let rho = refl(locus, a).map_err(ProofError::Subtyping)?;
    sub_to_proof(&rho, env)
}

// ---------------------------------------------------------------------------
// Administrative-step elimination.
//
// `bc_over_proof` re-indexes a whole core proof along a function, and
// `rewrite_eff` rewrites one occurrence along a subtyping derivation,
// pushing it through the rule that introduced the occurrence. Both keep
// the erased proof exactly unchanged; `elaborate` uses them to remove
// `BaseChangeStep` and `SubtypeStep` nodes.
// ---------------------------------------------------------------------------

use crate::proof::{eff, phys, premises, Item};
use crate::subtyping::negate_sub;

fn unremove(k: usize, removed: Option<usize>) -> usize {
    match removed {
        Some(r) if k >= r => k + 1,
        _ => k,
    }
}

/// Undo an insertion at `at`: `None` when `k` is the inserted occurrence.
fn uninsert(k: usize, at: usize) -> Option<usize> {
    use std::cmp::Ordering::*;
    match k.cmp(&at) {
        Equal => None,
        Less => Some(k),
        Greater => Some(k - 1),
    }
}

/// Map an index into the list with `removed` positions filtered out back to
/// an index into the original list.
fn unfilter(k: usize, removed: &[usize]) -> usize {
    let mut orig = 0usize;
    let mut left = k;
    loop {
        if removed.contains(&orig) {
            orig += 1;
            continue;
        }
        if left == 0 {
            return orig;
        }
        left -= 1;
        orig += 1;
    }
}

fn meta_free_expected() -> ProofError {
    ProofError::RuleMismatch("administrative node in a core-only transformation".to_string())
}

/// In the conclusion context `ctx` (a list of items), find an item of `prem`
/// other than `skip` whose effective value is `bc(inj, c)` for the context
/// item `c` at `ctx_pos`.
fn find_reindexed(
    prem: &Proof,
    skip: Option<usize>,
    inj: &SetFun,
    target: &Formula,
) -> Result<usize, ProofError> {
    let want = base_change(inj, target)?;
    prem.concl
        .items
        .iter()
        .enumerate()
        .position(|(k, it)| Some(k) != skip && eff(it) == want)
        .ok_or_else(|| bad("re-indexed context occurrence not found"))
}

/// Rewrite the occurrence at `pos` (in effective reading) from
/// `sigma.lhs` to `sigma.rhs`, producing a proof with the same erasure.
/// `p` must be free of administrative nodes.
pub fn rewrite_eff(p: &Proof, pos: Option<usize>, sigma: &SubDeriv, env: &VarEnv) -> Result<Proof, ProofError> {
    if sigma.lhs == sigma.rhs {
        return Ok(p.clone());
    }
    let Some(k) = pos else {
        return Err(bad("virtual occurrence rewritten to a different formula"));
    };
    let side = p
        .concl
        .items
        .get(k)
        .map(|(s, _)| *s)
        .ok_or(ProofError::BadPosition(k))?;
    if eff(&p.concl.items[k]) != sigma.lhs {
        return Err(bad("occurrence does not match the rewrite's source endpoint"));
    }
    match &p.node {
        ProofNode::Ax { .. } | ProofNode::OneIntro { .. } => {
            Err(bad("axiom occurrence admits only the trivial rewrite"))
        }
        ProofNode::TopIntro { pos: tpos } => {
            let mut concl = p.concl.clone();
            concl.items[k] = phys(side, sigma.rhs.clone());
            mk_with_concl(ProofNode::TopIntro { pos: *tpos }, concl, env)
        }
        ProofNode::Cut {
            formula,
            lpos,
            rpos,
            left,
            right,
        } => {
            let lenl = left.concl.items.len() - usize::from(lpos.is_some());
            let (left, right) = if k < lenl {
                let orig = unremove(k, *lpos);
                (rewrite_eff(left, Some(orig), sigma, env)?, (**right).clone())
            } else {
                let orig = unremove(k - lenl, *rpos);
                ((**left).clone(), rewrite_eff(right, Some(orig), sigma, env)?)
            };
            mk(
                ProofNode::Cut {
                    formula: formula.clone(),
                    lpos: *lpos,
                    rpos: *rpos,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                env,
            )
        }
        ProofNode::TensorIntro {
            p1,
            p2,
            out_side,
            left,
            right,
        } => {
            if k == p.concl.items.len() - 1 {
                let (s1, s2) = match &sigma.node {
                    SubNode::TensorCong(s1, s2) => (s1, s2),
                    _ => return Err(bad("tensor occurrence needs a tensor derivation")),
                };
                let left = rewrite_eff(left, *p1, s1, env)?;
                let right = rewrite_eff(right, *p2, s2, env)?;
                mk(
                    ProofNode::TensorIntro {
                        p1: *p1,
                        p2: *p2,
                        out_side: *out_side,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    env,
                )
            } else {
                let lenl = left.concl.items.len() - usize::from(p1.is_some());
                let (left, right) = if k < lenl {
                    let orig = unremove(k, *p1);
                    (rewrite_eff(left, Some(orig), sigma, env)?, (**right).clone())
                } else {
                    let orig = unremove(k - lenl, *p2);
                    ((**left).clone(), rewrite_eff(right, Some(orig), sigma, env)?)
                };
                mk(
                    ProofNode::TensorIntro {
                        p1: *p1,
                        p2: *p2,
                        out_side: *out_side,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    env,
                )
            }
        }
        ProofNode::ParIntro { p1, p2, out, prem } => {
            let prem = match uninsert(k, out.0) {
                None => {
                    let (s1, s2) = match &sigma.node {
                        SubNode::ParCong(s1, s2) => (s1, s2),
                        _ => return Err(bad("par occurrence needs a par derivation")),
                    };
                    rewrite_eff(&rewrite_eff(prem, *p1, s1, env)?, *p2, s2, env)?
                }
                Some(kk) => {
                    let mut removed: Vec<usize> = [*p1, *p2].iter().flatten().copied().collect();
                    removed.sort_unstable();
                    let orig = unfilter(kk, &removed);
                    rewrite_eff(prem, Some(orig), sigma, env)?
                }
            };
            mk(
                ProofNode::ParIntro {
                    p1: *p1,
                    p2: *p2,
                    out: *out,
                    prem: Box::new(prem),
                },
                env,
            )
        }
        ProofNode::PlusIntro1 {
            principal,
            out,
            ppos,
            prem,
        }
        | ProofNode::PlusIntro2 {
            principal,
            out,
            ppos,
            prem,
        } => {
            let first = matches!(p.node, ProofNode::PlusIntro1 { .. });
            match uninsert(k, out.0) {
                None => {
                    let (s1, s2) = match &sigma.node {
                        SubNode::PlusRule(s1, s2) => (s1, s2),
                        _ => return Err(bad("sum occurrence needs a sum derivation")),
                    };
                    let (io, comp_old) = match (principal, first) {
                        (Formula::Plus(i, _, a, _), true) => (i, (**a).clone()),
                        (Formula::Plus(_, j, _, b), false) => (j, (**b).clone()),
                        _ => return Err(bad("sum introduction principal shape")),
                    };
                    let (inew, comp_new) = match (&sigma.rhs, first) {
                        (Formula::Plus(i2, _, a2, _), true) => (i2, (**a2).clone()),
                        (Formula::Plus(_, j2, _, b2), false) => (j2, (**b2).clone()),
                        _ => return Err(bad("sum derivation endpoint shape")),
                    };
                    let s = if first { s1 } else { s2 };
                    let pq = pullback(io, inew)?;
                    let io_inv = io.invert()?;
                    let inew_inv = inew.invert()?;
                    let h = SetFun::from_fn(
                        io.cod().clone(),
                        pq.locus.clone(),
                        |t| {
                            Elem::pair(
                                io_inv.apply(t).expect("bijection"),
                                inew_inv.apply(t).expect("bijection"),
                            )
                        },
                    )?;
                    let tau = trans(
                        &chain_sub(
                            std::slice::from_ref(&io.invert()?),
                            &[h.clone(), pq.p1.clone()],
                            io.dom(),
                            &comp_old,
                        )?,
                        &trans(
                            &bc_sub(&h, s)?,
                            &chain_sub(
                                &[h.clone(), pq.p2.clone()],
                                std::slice::from_ref(&inew.invert()?),
                                inew.dom(),
                                &comp_new,
                            )?,
                        )?,
                    )?;
                    let prem = rewrite_eff(prem, *ppos, &tau, env)?;
                    let node = if first {
                        ProofNode::PlusIntro1 {
                            principal: sigma.rhs.clone(),
                            out: *out,
                            ppos: *ppos,
                            prem: Box::new(prem),
                        }
                    } else {
                        ProofNode::PlusIntro2 {
                            principal: sigma.rhs.clone(),
                            out: *out,
                            ppos: *ppos,
                            prem: Box::new(prem),
                        }
                    };
                    mk(node, env)
                }
                Some(kk) => {
                    let orig = unremove(kk, *ppos);
                    let prem = rewrite_eff(prem, Some(orig), sigma, env)?;
                    let node = if first {
                        ProofNode::PlusIntro1 {
                            principal: principal.clone(),
                            out: *out,
                            ppos: *ppos,
                            prem: Box::new(prem),
                        }
                    } else {
                        ProofNode::PlusIntro2 {
                            principal: principal.clone(),
                            out: *out,
                            ppos: *ppos,
                            prem: Box::new(prem),
                        }
                    };
                    mk(node, env)
                }
            }
        }
        ProofNode::WithIntro {
            i,
            j,
            out,
            lpos,
            rpos,
            left,
            right,
        } => {
            let mut concl = p.concl.clone();
            concl.items[k] = phys(side, sigma.rhs.clone());
            if k == out.0 {
                let (s1, s2) = match &sigma.node {
                    SubNode::WithRule(s1, s2) => (s1, s2),
                    _ => return Err(bad("product occurrence needs a product derivation")),
                };
                let (a_old, b_old) = match &sigma.lhs {
                    Formula::With(_, _, a, b) => ((**a).clone(), (**b).clone()),
                    _ => return Err(bad("product derivation endpoint shape")),
                };
                let (i2, j2, a_new, b_new) = match &sigma.rhs {
                    Formula::With(i2, j2, a2, b2) => {
                        (i2.clone(), j2.clone(), (**a2).clone(), (**b2).clone())
                    }
                    _ => return Err(bad("product derivation endpoint shape")),
                };
                let ctx: Vec<Item> = p
                    .concl
                    .items
                    .iter()
                    .enumerate()
                    .filter(|(x, _)| *x != out.0)
                    .map(|(_, it)| it.clone())
                    .collect();
                let left = reindex_additive_branch(
                    left, *lpos, i, &i2, s1, &a_old, &a_new, &ctx, env,
                )?;
                let right = reindex_additive_branch(
                    right, *rpos, j, &j2, s2, &b_old, &b_new, &ctx, env,
                )?;
                mk_with_concl(
                    ProofNode::WithIntro {
                        i: i2,
                        j: j2,
                        out: *out,
                        lpos: *lpos,
                        rpos: *rpos,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    concl,
                    env,
                )
            } else {
                let old = eff(&p.concl.items[k]);
                let li = find_reindexed(left, *lpos, i, &old)?;
                let ri = find_reindexed(right, *rpos, j, &old)?;
                let left = rewrite_eff(left, Some(li), &bc_sub(i, sigma)?, env)?;
                let right = rewrite_eff(right, Some(ri), &bc_sub(j, sigma)?, env)?;
                mk_with_concl(
                    ProofNode::WithIntro {
                        i: i.clone(),
                        j: j.clone(),
                        out: *out,
                        lpos: *lpos,
                        rpos: *rpos,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    concl,
                    env,
                )
            }
        }
        ProofNode::Contraction { keep, drop, prem } => {
            let orig = if k < *drop { k } else { k + 1 };
            let prem = if orig == *keep {
                rewrite_eff(&rewrite_eff(prem, Some(*keep), sigma, env)?, Some(*drop), sigma, env)?
            } else {
                rewrite_eff(prem, Some(orig), sigma, env)?
            };
            mk(
                ProofNode::Contraction {
                    keep: *keep,
                    drop: *drop,
                    prem: Box::new(prem),
                },
                env,
            )
        }
        ProofNode::Dereliction {
            f,
            u,
            body,
            pos,
            out,
            prem,
        } => match uninsert(k, out.0) {
            None => {
                let (g, s) = match &sigma.node {
                    SubNode::QuestRule(g, s) => (g, s),
                    _ => return Err(bad("quest occurrence needs a quest derivation")),
                };
                let (u2, body2) = match &sigma.rhs {
                    Formula::Quest(u2, b2) => (u2.clone(), (**b2).clone()),
                    _ => return Err(bad("quest derivation endpoint shape")),
                };
                let f2 = SetFun::compose(f, g)?;
                let tau = trans(
                    &bc_sub(f, s)?,
                    &chain_sub(
                        &[f.clone(), g.clone()],
                        std::slice::from_ref(&f2),
                        u2.dom(),
                        &body2,
                    )?,
                )?;
                let prem = rewrite_eff(prem, *pos, &tau, env)?;
                mk(
                    ProofNode::Dereliction {
                        f: f2,
                        u: u2,
                        body: body2,
                        pos: *pos,
                        out: *out,
                        prem: Box::new(prem),
                    },
                    env,
                )
            }
            Some(kk) => {
                let orig = unremove(kk, *pos);
                let prem = rewrite_eff(prem, Some(orig), sigma, env)?;
                mk(
                    ProofNode::Dereliction {
                        f: f.clone(),
                        u: u.clone(),
                        body: body.clone(),
                        pos: *pos,
                        out: *out,
                        prem: Box::new(prem),
                    },
                    env,
                )
            }
        },
        ProofNode::Weakening { u, body, out, prem } => match uninsert(k, out.0) {
            None => {
                let (u2, body2) = match &sigma.rhs {
                    Formula::Quest(u2, b2) => (u2.clone(), (**b2).clone()),
                    _ => return Err(bad("quest derivation endpoint shape")),
                };
                if !matches!(sigma.node, SubNode::QuestRule(..)) {
                    return Err(bad("quest occurrence needs a quest derivation"));
                }
                mk(
                    ProofNode::Weakening {
                        u: u2,
                        body: body2,
                        out: *out,
                        prem: prem.clone(),
                    },
                    env,
                )
            }
            Some(kk) => {
                let prem = rewrite_eff(prem, Some(kk), sigma, env)?;
                mk(
                    ProofNode::Weakening {
                        u: u.clone(),
                        body: body.clone(),
                        out: *out,
                        prem: Box::new(prem),
                    },
                    env,
                )
            }
        },
        ProofNode::Promotion {
            v,
            out,
            prem_pos,
            prem,
        } => {
            let mut concl = p.concl.clone();
            concl.items[k] = phys(side, sigma.rhs.clone());
            let ctx: Vec<Item> = p
                .concl
                .items
                .iter()
                .enumerate()
                .filter(|(x, _)| *x != out.0)
                .map(|(_, it)| it.clone())
                .collect();
            match uninsert(k, out.0) {
                None => {
                    let (g, s) = match &sigma.node {
                        SubNode::BangRule(g, s) => (g, s),
                        _ => return Err(bad("bang occurrence needs a bang derivation")),
                    };
                    let gv = SetFun::compose(g, v)?;
                    let step = bc_over_proof(g, prem, env)?;
                    let step = rewrite_eff(&step, *prem_pos, s, env)?;
                    let step = fix_context(
                        &step,
                        *prem_pos,
                        &ctx,
                        |re| base_change(g, re),
                        v,
                        |c| chain_sub(&[g.clone(), v.clone()], std::slice::from_ref(&gv), v.cod(), c),
                        env,
                    )?;
                    mk_with_concl(
                        ProofNode::Promotion {
                            v: gv,
                            out: *out,
                            prem_pos: *prem_pos,
                            prem: Box::new(step),
                        },
                        concl,
                        env,
                    )
                }
                Some(_) => {
                    let old = eff(&p.concl.items[k]);
                    let idx = find_reindexed(prem, *prem_pos, v, &old)?;
                    let prem = rewrite_eff(prem, Some(idx), &bc_sub(v, sigma)?, env)?;
                    mk_with_concl(
                        ProofNode::Promotion {
                            v: v.clone(),
                            out: *out,
                            prem_pos: *prem_pos,
                            prem: Box::new(prem),
                        },
                        concl,
                        env,
                    )
                }
            }
        }
        ProofNode::SubtypeStep { .. } | ProofNode::BaseChangeStep { .. } => {
            Err(meta_free_expected())
        }
    }
}

/// Rebuild one premise of a `WithIntro` whose principal occurrence is
/// being rewritten: transport it to the new injection's domain and adapt
/// its component and context occurrences.
#[allow(clippy::too_many_arguments)]
fn reindex_additive_branch(
    prem: &Proof,
    comp_pos: Option<usize>,
    inj_old: &SetFun,
    inj_new: &SetFun,
    s: &SubDeriv,
    comp_old: &Formula,
    comp_new: &Formula,
    ctx: &[Item],
    env: &VarEnv,
) -> Result<Proof, ProofError> {
    let pi = pullback(inj_new, inj_old)?;
    let phi = SetFun::compose(&pi.p1.invert()?, &pi.p2)?;
    let step = bc_over_proof(&phi, prem, env)?;
    // context: bc(phi, bc(inj_old, c)) becomes bc(inj_new, c)
    let step = fix_context(
        &step,
        comp_pos,
        ctx,
        |c_reindexed| base_change(&phi, c_reindexed),
        inj_old,
        |c| {
            chain_sub(
                &[phi.clone(), inj_old.clone()],
                std::slice::from_ref(inj_new),
                inj_old.cod(),
                c,
            )
        },
        env,
    )?;
    // component: bc(phi, comp_old) becomes comp_new
    let pq = pullback(inj_old, inj_new)?;
    let h = SetFun::from_fn(inj_new.dom().clone(), pq.locus.clone(), |x| {
        Elem::pair(phi.apply(x).expect("domain checked"), x.clone())
    })?;
    let tau = trans(
        &chain_sub(
            std::slice::from_ref(&phi),
            &[h.clone(), pq.p1.clone()],
            inj_old.dom(),
            comp_old,
        )?,
        &trans(
            &bc_sub(&h, s)?,
            &chain_sub(
                &[h.clone(), pq.p2.clone()],
                &[],
                inj_new.dom(),
                comp_new,
            )?,
        )?,
    )?;
    rewrite_eff(&step, comp_pos, &tau, env)
}

/// Rewrite every context occurrence of a premise (everything except
/// `skip`) along a derivation built from the matching conclusion context
/// item. A premise occurrence matches a context item `c` when its current
/// effective value is `pre(bc(inj, c))`; `mk_tau(c)` must produce a
/// derivation whose left endpoint is that value.
fn fix_context(
    prem: &Proof,
    skip: Option<usize>,
    ctx: &[Item],
    pre: impl Fn(&Formula) -> Result<Formula, crate::formula::FormulaError>,
    inj: &SetFun,
    mk_tau: impl Fn(&Formula) -> Result<SubDeriv, crate::subtyping::SubError>,
    env: &VarEnv,
) -> Result<Proof, ProofError> {
    let mut available: Vec<Option<Formula>> = ctx.iter().map(|it| Some(eff(it))).collect();
    let mut current = prem.clone();
    let positions: Vec<usize> = (0..prem.concl.items.len())
        .filter(|x| Some(*x) != skip)
        .collect();
    for idx in positions {
        let here = eff(&current.concl.items[idx]);
        let mut found = None;
        for (ci, slot) in available.iter_mut().enumerate() {
            if let Some(c) = slot {
                let reindexed = base_change(inj, c).map_err(ProofError::Formula)?;
                if pre(&reindexed).map_err(ProofError::Formula)? == here {
                    found = Some(ci);
                    break;
                }
            }
        }
        let Some(ci) = found else {
            if here == Formula::Bot {
                continue;
            }
            return Err(bad("re-indexed context occurrence not matched"));
        };
        let c = available[ci].take().expect("just matched");
        let tau = mk_tau(&c).map_err(ProofError::Subtyping)?;
        current = rewrite_eff(&current, Some(idx), &tau, env)?;
    }
    Ok(current)
}

/// Re-index a core proof along `f`: the conclusion is the item-wise base
/// change of the original conclusion, the erasure is unchanged.
pub fn bc_over_proof(f: &SetFun, p: &Proof, env: &VarEnv) -> Result<Proof, ProofError> {
    match &p.node {
        ProofNode::Ax {
            f: anno,
            var,
            negative,
        } => mk(
            ProofNode::Ax {
                f: SetFun::compose(f, anno)?,
                var: var.clone(),
                negative: *negative,
            },
            env,
        ),
        ProofNode::OneIntro { .. } => mk(
            ProofNode::OneIntro {
                locus: f.dom().clone(),
            },
            env,
        ),
        ProofNode::TopIntro { pos } => {
            let items = p
                .concl
                .items
                .iter()
                .map(|(s, a)| Ok::<_, ProofError>((*s, base_change(f, a)?)))
                .collect::<Result<Vec<_>, _>>()?;
            mk_with_concl(
                ProofNode::TopIntro { pos: *pos },
                Sequent::new(f.dom().clone(), items),
                env,
            )
        }
        ProofNode::Cut {
            formula,
            lpos,
            rpos,
            left,
            right,
        } => mk(
            ProofNode::Cut {
                formula: base_change(f, formula)?,
                lpos: *lpos,
                rpos: *rpos,
                left: Box::new(bc_over_proof(f, left, env)?),
                right: Box::new(bc_over_proof(f, right, env)?),
            },
            env,
        ),
        ProofNode::TensorIntro {
            p1,
            p2,
            out_side,
            left,
            right,
        } => mk(
            ProofNode::TensorIntro {
                p1: *p1,
                p2: *p2,
                out_side: *out_side,
                left: Box::new(bc_over_proof(f, left, env)?),
                right: Box::new(bc_over_proof(f, right, env)?),
            },
            env,
        ),
        ProofNode::ParIntro { p1, p2, out, prem } => mk(
            ProofNode::ParIntro {
                p1: *p1,
                p2: *p2,
                out: *out,
                prem: Box::new(bc_over_proof(f, prem, env)?),
            },
            env,
        ),
        ProofNode::PlusIntro1 {
            principal,
            out,
            ppos,
            prem,
        }
        | ProofNode::PlusIntro2 {
            principal,
            out,
            ppos,
            prem,
        } => {
            let first = matches!(p.node, ProofNode::PlusIntro1 { .. });
            let (inj, comp) = match (principal, first) {
                (Formula::Plus(i, _, a, _), true) => (i, (**a).clone()),
                (Formula::Plus(_, j, _, b), false) => (j, (**b).clone()),
                _ => return Err(bad("sum introduction principal shape")),
            };
            let m = pullback(f, inj)?;
            let step = bc_over_proof(f, prem, env)?;
            let tau = chain_sub(
                &[f.clone(), inj.invert()?],
                &[m.p1.invert()?, m.p2.clone()],
                inj.dom(),
                &comp,
            )
            .map_err(ProofError::Subtyping)?;
            let step = rewrite_eff(&step, *ppos, &tau, env)?;
            let principal = base_change(f, principal)?;
            let node = if first {
                ProofNode::PlusIntro1 {
                    principal,
                    out: *out,
                    ppos: *ppos,
                    prem: Box::new(step),
                }
            } else {
                ProofNode::PlusIntro2 {
                    principal,
                    out: *out,
                    ppos: *ppos,
                    prem: Box::new(step),
                }
            };
            mk(node, env)
        }
        ProofNode::WithIntro {
            i,
            j,
            out,
            lpos,
            rpos,
            left,
            right,
        } => {
            let ctx: Vec<Item> = p
                .concl
                .items
                .iter()
                .enumerate()
                .filter(|(x, _)| *x != out.0)
                .map(|(_, it)| it.clone())
                .collect();
            let items = p
                .concl
                .items
                .iter()
                .map(|(s, a)| Ok::<_, ProofError>((*s, base_change(f, a)?)))
                .collect::<Result<Vec<_>, _>>()?;
            let mut branches = Vec::new();
            for (inj, prem, cpos) in [(i, left, lpos), (j, right, rpos)] {
                let m = pullback(f, inj)?;
                let step = bc_over_proof(&m.p2, prem, env)?;
                let step = fix_context(
                    &step,
                    *cpos,
                    &ctx,
                    |re| base_change(&m.p2, re),
                    inj,
                    |c| {
                        chain_sub(
                            &[m.p2.clone(), inj.clone()],
                            &[m.p1.clone(), f.clone()],
                            inj.cod(),
                            c,
                        )
                    },
                    env,
                )?;
                branches.push((m.p1.clone(), step));
            }
            let (i2, right2) = branches.pop().expect("two branches");
            let (i1, left2) = branches.pop().expect("two branches");
            mk_with_concl(
                ProofNode::WithIntro {
                    i: i1,
                    j: i2,
                    out: *out,
                    lpos: *lpos,
                    rpos: *rpos,
                    left: Box::new(left2),
                    right: Box::new(right2),
                },
                Sequent::new(f.dom().clone(), items),
                env,
            )
        }
        ProofNode::Contraction { keep, drop, prem } => mk(
            ProofNode::Contraction {
                keep: *keep,
                drop: *drop,
                prem: Box::new(bc_over_proof(f, prem, env)?),
            },
            env,
        ),
        ProofNode::Dereliction {
            f: f0,
            u,
            body,
            pos,
            out,
            prem,
        } => {
            let m = pullback(f, u)?;
            let f0f = SetFun::compose(f, f0)?;
            let fprime = SetFun::from_fn(f.dom().clone(), m.locus.clone(), |x| {
                Elem::pair(x.clone(), f0f.apply(x).expect("domain checked"))
            })?;
            let step = bc_over_proof(f, prem, env)?;
            let tau = chain_sub(
                &[f.clone(), f0.clone()],
                &[fprime.clone(), m.p2.clone()],
                u.dom(),
                body,
            )
            .map_err(ProofError::Subtyping)?;
            let step = rewrite_eff(&step, *pos, &tau, env)?;
            mk(
                ProofNode::Dereliction {
                    f: fprime,
                    u: m.p1.clone(),
                    body: base_change(&m.p2, body)?,
                    pos: *pos,
                    out: *out,
                    prem: Box::new(step),
                },
                env,
            )
        }
        ProofNode::Weakening { u, body, out, prem } => {
            let m = pullback(f, u)?;
            mk(
                ProofNode::Weakening {
                    u: m.p1.clone(),
                    body: base_change(&m.p2, body)?,
                    out: *out,
                    prem: Box::new(bc_over_proof(f, prem, env)?),
                },
                env,
            )
        }
        ProofNode::Promotion {
            v,
            out,
            prem_pos,
            prem,
        } => {
            let ctx: Vec<Item> = p
                .concl
                .items
                .iter()
                .enumerate()
                .filter(|(x, _)| *x != out.0)
                .map(|(_, it)| it.clone())
                .collect();
            let items = p
                .concl
                .items
                .iter()
                .map(|(s, a)| Ok::<_, ProofError>((*s, base_change(f, a)?)))
                .collect::<Result<Vec<_>, _>>()?;
            let m = pullback(f, v)?;
            let step = bc_over_proof(&m.p2, prem, env)?;
            let step = fix_context(
                &step,
                *prem_pos,
                &ctx,
                |re| base_change(&m.p2, re),
                v,
                |c| {
                    chain_sub(
                        &[m.p2.clone(), v.clone()],
                        &[m.p1.clone(), f.clone()],
                        v.cod(),
                        c,
                    )
                },
                env,
            )?;
            mk_with_concl(
                ProofNode::Promotion {
                    v: m.p1.clone(),
                    out: *out,
                    prem_pos: *prem_pos,
                    prem: Box::new(step),
                },
                Sequent::new(f.dom().clone(), items),
                env,
            )
        }
        ProofNode::SubtypeStep { .. } | ProofNode::BaseChangeStep { .. } => {
            Err(meta_free_expected())
        }
    }
}

/// Rewrite the physical occurrence at `pos` along `rho` (left-side
/// occurrences move contravariantly): on the right the occurrence changes
/// from `rho.lhs` to `rho.rhs`, on the left from `rho.rhs` to `rho.lhs`.
pub fn sub_over_proof(
    p: &Proof,
    pos: usize,
    rho: &SubDeriv,
    env: &VarEnv,
) -> Result<Proof, ProofError> {
    let side = p
        .concl
        .items
        .get(pos)
        .map(|(s, _)| *s)
        .ok_or(ProofError::BadPosition(pos))?;
    let sigma = match side {
        Side::Right => rho.clone(),
        Side::Left => negate_sub(rho).map_err(ProofError::Subtyping)?,
    };
    rewrite_eff(p, Some(pos), &sigma, env)
}

/// Remove every administrative node, keeping the conclusion and the
/// erasure exactly.
pub fn elaborate(p: &Proof, env: &VarEnv) -> Result<Proof, ProofError> {
    match &p.node {
        ProofNode::SubtypeStep { pos, rho, prem } => {
            let core = elaborate(prem, env)?;
            sub_over_proof(&core, *pos, rho, env)
        }
        ProofNode::BaseChangeStep { f, prem } => {
            let core = elaborate(prem, env)?;
            bc_over_proof(f, &core, env)
        }
        _ => {
            let mut node = p.node.clone();
            elaborate_children(&mut node, env)?;
            Ok(Proof {
                concl: p.concl.clone(),
                node,
            })
        }
    }
}

fn elaborate_children(node: &mut ProofNode, env: &VarEnv) -> Result<(), ProofError> {
    match node {
        ProofNode::Cut { left, right, .. }
        | ProofNode::TensorIntro { left, right, .. }
        | ProofNode::WithIntro { left, right, .. } => {
            **left = elaborate(left, env)?;
            **right = elaborate(right, env)?;
        }
        ProofNode::ParIntro { prem, .. }
        | ProofNode::PlusIntro1 { prem, .. }
        | ProofNode::PlusIntro2 { prem, .. }
        | ProofNode::Contraction { prem, .. }
        | ProofNode::Dereliction { prem, .. }
        | ProofNode::Weakening { prem, .. }
        | ProofNode::Promotion { prem, .. } => {
            **prem = elaborate(prem, env)?;
        }
        _ => {}
    }
    Ok(())
}

/// True when the proof contains no administrative nodes.
pub fn is_core(p: &Proof) -> bool {
    !matches!(
        p.node,
        ProofNode::SubtypeStep { .. } | ProofNode::BaseChangeStep { .. }
    ) && premises(&p.node).iter().all(|q| is_core(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llproof::{check_ll, ll_identity};
    use crate::proof::{check_proof, erase_proof};
    use crate::setfun::{atoms, unit_locus, Locus};
    use crate::subtyping::decide_subtype;
    use std::collections::BTreeMap;

    fn env2() -> VarEnv {
        let mut env = BTreeMap::new();
        env.insert("X".to_string(), atoms(&["p", "q"]));
        env
    }

    fn incl(sub: &Locus, sup: &Locus) -> SetFun {
        SetFun::from_fn(sub.clone(), sup.clone(), |x| x.clone()).unwrap()
    }

    fn rich(locus: &Locus, env: &VarEnv) -> Formula {
        let f = SetFun::from_fn(locus.clone(), env["X"].clone(), |_| Elem::atom("p")).unwrap();
        let v = Formula::PVar(f.clone(), "X".into());
        let nv = Formula::NVar(f, "X".into());
        let t = Formula::tensor(v.clone(), Formula::One);
        let p = Formula::par(Formula::Bot, nv);
        let q = Formula::quest(SetFun::identity(locus), t.clone());
        let bg = Formula::bang(SetFun::identity(locus), p.clone());
        Formula::tensor(Formula::par(q, bg), Formula::tensor(t, p))
    }

    #[test]
    fn identity_proof_checks_and_erases_to_ll_identity() {
        let env = env2();
        let locus = atoms(&["a", "b"]);
        let a = rich(&locus, &env);
        let t = identity_proof(&locus, &a, &env).unwrap();
        check_proof(&t.proof, &env).unwrap();
        let er = erase_proof(&t.proof);
        check_ll(&er).unwrap();
        let (llid, _, _) = ll_identity(&a.erase()).unwrap();
        assert_eq!(er, llid);
    }

    #[test]
    fn identity_proof_on_additives_checks() {
        let env = env2();
        let ia = atoms(&["a"]);
        let iab = atoms(&["a", "b"]);
        let ib = atoms(&["b"]);
        let i = incl(&ia, &iab);
        let j = incl(&ib, &iab);
        let comp_a = rich(&ia, &env);
        let comp_b = Formula::One;
        let w = Formula::with(i.clone(), j.clone(), comp_a.clone(), comp_b.clone());
        let t = identity_proof(&iab, &w, &env).unwrap();
        check_proof(&t.proof, &env).unwrap();
        check_ll(&erase_proof(&t.proof)).unwrap();
        let p = Formula::plus(i, j, comp_a, comp_b);
        let t = identity_proof(&iab, &p, &env).unwrap();
        check_proof(&t.proof, &env).unwrap();
        check_ll(&erase_proof(&t.proof)).unwrap();
    }

    #[test]
    fn exponential_widening_proof_checks_and_is_identity_shaped() {
        let env = env2();
        let locus = atoms(&["a", "b"]);
        let sub = atoms(&["a"]);
        let body = rich(&locus, &env);
        // !_{id} body ⊑ !_{incl} (incl body): a proper widening
        let lhs = Formula::bang(SetFun::identity(&locus), body.clone());
        let i = incl(&sub, &locus);
        let rhs = Formula::bang(i.clone(), base_change(&i, &body).unwrap());
        let rho = decide_subtype(&locus, &lhs, &rhs, 100_000)
            .unwrap()
            .expect("widening holds");
        let t = sub_to_proof(&rho, &env).unwrap();
        check_proof(&t.proof, &env).unwrap();
        assert!(t.proof.concl.same_judgement(&Sequent::new(
            locus.clone(),
            vec![(Side::Left, lhs.clone()), (Side::Right, rhs.clone())]
        )));
        let er = erase_proof(&t.proof);
        check_ll(&er).unwrap();
        let (llid, _, _) = ll_identity(&lhs.erase()).unwrap();
        assert_eq!(crate::llproof::canonical_ll(&er.items), {
            let _ = &llid;
            crate::llproof::canonical_ll(&llid.items)
        });
    }

    #[test]
    fn unit_endpoints_are_tracked_as_virtual() {
        let env = env2();
        let l = unit_locus();
        let t = identity_proof(&l, &Formula::One, &env).unwrap();
        assert_eq!((t.lhs, t.rhs), (None, Some(0)));
        let t = identity_proof(&l, &Formula::Bot, &env).unwrap();
        assert_eq!((t.lhs, t.rhs), (Some(0), None));
        let t = identity_proof(&l, &Formula::tensor(Formula::One, Formula::Bot), &env).unwrap();
        check_proof(&t.proof, &env).unwrap();
        check_ll(&erase_proof(&t.proof)).unwrap();
    }

    #[test]
    fn reindex_identity_proof_along_noninjective_map() {
        let env = env2();
        let locus = atoms(&["a", "b"]);
        let big = atoms(&["a", "b", "c"]);
        let f = SetFun::from_fn(big.clone(), locus.clone(), |x| {
            if *x == Elem::atom("c") {
                Elem::atom("a")
            } else {
                x.clone()
            }
        })
        .unwrap();
        let a = rich(&locus, &env);
        let t = identity_proof(&locus, &a, &env).unwrap();
        let q = bc_over_proof(&f, &t.proof, &env).unwrap();
        check_proof(&q, &env).unwrap();
        assert_eq!(q.concl.locus, big);
        assert_eq!(
            q.concl.items,
            t.proof
                .concl
                .items
                .iter()
                .map(|(s, x)| (*s, base_change(&f, x).unwrap()))
                .collect::<Vec<_>>()
        );
        assert_eq!(erase_proof(&q), erase_proof(&t.proof));
    }

    #[test]
    fn reindex_additive_identity_proof() {
        let env = env2();
        let ia = atoms(&["a"]);
        let iab = atoms(&["a", "b"]);
        let ib = atoms(&["b"]);
        let i = incl(&ia, &iab);
        let j = incl(&ib, &iab);
        let w = Formula::with(i.clone(), j.clone(), rich(&ia, &env), Formula::One);
        let t = identity_proof(&iab, &w, &env).unwrap();
        let big = atoms(&["a", "b", "c"]);
        let f = SetFun::from_fn(big.clone(), iab.clone(), |x| {
            if *x == Elem::atom("c") {
                Elem::atom("b")
            } else {
                x.clone()
            }
        })
        .unwrap();
        let q = bc_over_proof(&f, &t.proof, &env).unwrap();
        check_proof(&q, &env).unwrap();
        assert_eq!(erase_proof(&q), erase_proof(&t.proof));

        let p = Formula::plus(i, j, rich(&ia, &env), Formula::One);
        let t = identity_proof(&iab, &p, &env).unwrap();
        let q = bc_over_proof(&f, &t.proof, &env).unwrap();
        check_proof(&q, &env).unwrap();
        assert_eq!(erase_proof(&q), erase_proof(&t.proof));
    }

    #[test]
    fn rewrite_with_widening_keeps_erasure() {
        let env = env2();
        let locus = atoms(&["a", "b"]);
        let sub = atoms(&["a"]);
        let body = rich(&locus, &env);
        let lhs = Formula::bang(SetFun::identity(&locus), body.clone());
        let i = incl(&sub, &locus);
        let rhs = Formula::bang(i.clone(), base_change(&i, &body).unwrap());
        let rho = decide_subtype(&locus, &lhs, &rhs, 100_000)
            .unwrap()
            .expect("widening holds");
        let t = identity_proof(&locus, &lhs, &env).unwrap();
        let pos = t.rhs.expect("physical endpoint");
        let q = sub_over_proof(&t.proof, pos, &rho, &env).unwrap();
        check_proof(&q, &env).unwrap();
        assert_eq!(eff(&q.concl.items[pos]), rhs);
        assert_eq!(erase_proof(&q), erase_proof(&t.proof));
        // and contravariantly: narrowing the left endpoint of the identity
        // on the wider formula yields a proof of lhs ⊢ rhs
        let t2 = identity_proof(&locus, &rhs, &env).unwrap();
        let pos = t2.lhs.expect("physical endpoint");
        let q = sub_over_proof(&t2.proof, pos, &rho, &env).unwrap();
        check_proof(&q, &env).unwrap();
        assert_eq!(q.concl.items[pos], (Side::Left, lhs.clone()));
        assert_eq!(erase_proof(&q), erase_proof(&t2.proof));
    }

    #[test]
    fn rewrite_additive_occurrence() {
        let env = env2();
        let ia = atoms(&["a"]);
        let iab = atoms(&["a", "b"]);
        let ib = atoms(&["b"]);
        let i = incl(&ia, &iab);
        let j = incl(&ib, &iab);
        // widen the left component's exponential annotation
        let body = rich(&ia, &env);
        let narrow = Formula::bang(SetFun::identity(&ia), body.clone());
        let empty = crate::setfun::empty_locus();
        let e = incl(&empty, &ia);
        let widened = Formula::bang(e.clone(), base_change(&e, &body).unwrap());
        for small in [
            Formula::with(i.clone(), j.clone(), narrow.clone(), Formula::One),
            Formula::plus(i.clone(), j.clone(), narrow.clone(), Formula::One),
        ] {
            let wide = match &small {
                Formula::With(..) => {
                    Formula::with(i.clone(), j.clone(), widened.clone(), Formula::One)
                }
                _ => Formula::plus(i.clone(), j.clone(), widened.clone(), Formula::One),
            };
            let rho = decide_subtype(&iab, &small, &wide, 100_000)
                .unwrap()
                .expect("component widening holds");
            let t = identity_proof(&iab, &small, &env).unwrap();
            let q = sub_over_proof(&t.proof, t.rhs.unwrap(), &rho, &env).unwrap();
            check_proof(&q, &env).unwrap();
            assert_eq!(eff(&q.concl.items[t.rhs.unwrap()]), wide);
            assert_eq!(erase_proof(&q), erase_proof(&t.proof));
        }
    }

    #[test]
    fn elaborate_removes_administrative_nodes() {
        let env = env2();
        let locus = atoms(&["a", "b"]);
        let sub = atoms(&["a"]);
        let a = rich(&locus, &env);
        let t = identity_proof(&locus, &a, &env).unwrap();
        // wrap in a subtype step widening the right endpoint, then a
        // re-indexing step along an inclusion
        let lhs = Formula::bang(SetFun::identity(&locus), a.clone());
        let tb = identity_proof(&locus, &lhs, &env).unwrap();
        let i = incl(&sub, &locus);
        let rhs = Formula::bang(i.clone(), base_change(&i, &a).unwrap());
        let rho = decide_subtype(&locus, &lhs, &rhs, 100_000)
            .unwrap()
            .expect("widening holds");
        let stepped = mk(
            ProofNode::SubtypeStep {
                pos: tb.rhs.unwrap(),
                rho,
                prem: Box::new(tb.proof.clone()),
            },
            &env,
        )
        .unwrap();
        let reindexed = mk(
            ProofNode::BaseChangeStep {
                f: incl(&sub, &locus),
                prem: Box::new(stepped.clone()),
            },
            &env,
        )
        .unwrap();
        for p in [&stepped, &reindexed] {
            let core = elaborate(p, &env).unwrap();
            assert!(is_core(&core));
            check_proof(&core, &env).unwrap();
            assert!(core.concl.same_judgement(&p.concl));
            assert_eq!(erase_proof(&core), erase_proof(p));
        }
        let _ = t;
    }
}
