//! Cut elimination.
//!
//! Cuts are addressed by their path in the proof tree ([`CutId`]). A
//! single reduction step ([`reduce_at`]) eliminates the addressed cut the
//! way the erased calculus would — principal reductions when both cut
//! occurrences are introduced immediately above the cut, commutations
//! otherwise — while managing the indices with the two administrative
//! nodes. Administrative nodes sitting directly on a cut premise are
//! structurally invisible below; they are commuted out of the way (one
//! rule at a time, never rebuilt wholesale) as part of the step that
//! consumes the cut.
//!
//! Because the calculus has no exchange rule, a reduct generally concludes
//! a permutation of the original sequent (possibly with extra inert-unit
//! occurrences). Every step therefore returns a position map from the old
//! conclusion to the new one, and the ancestors of the reduced cut are
//! rebuilt along it; occurrences that disappear are always inert units and
//! ancestor references to them become virtual.
//!
//! The module also provides full normalization under two strategies, a
//! parallel (top-to-bottom, simultaneous) reduction, a normal form for the
//! decidable fragment of the vertical congruence on proofs ([`vnf`]) with
//! the induced sound-but-incomplete equivalence test ([`equiv`]), and a
//! mirror of the single-step reducer on erased proofs ([`ll_reduce_at`])
//! used to validate that reduction commutes with erasure.

use crate::formula::{base_change, Formula, FormulaError, VarEnv};
use crate::llproof::{LLError, Side};
use crate::proof::{
    self, eff, mk, mk_with_concl, Item, Proof, ProofError, ProofNode, Sequent,
};
use crate::setfun::{pullback, SetFun, SetFunError};
use crate::subtyping::{
    bc_sub, chain_sub, decide_subtype, negate_sub, trans, SubDeriv, SubError, SubNode,
};
use serde::{Deserialize, Serialize};

/// Address of a cut node: the sequence of premise indices from the root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CutId {
    pub path: Vec<usize>,
}

impl CutId {
    pub fn new(path: Vec<usize>) -> CutId {
        CutId { path }
    }
}

/// Audit record of a normalization run: replaying `steps` from `initial`
/// reproduces `result`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub steps: Vec<(CutId, String)>,
    pub initial: Proof,
    pub result: Proof,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CutError {
    #[error("path does not address a cut node")]
    NotACut,
    #[error("cut against a configuration the rewrite system does not cover: {0}")]
    Irreducible(String),
    #[error("step budget exceeded")]
    StepBudgetExceeded,
    #[error("proofs conclude different judgements")]
    SequentMismatch,
    #[error("rebuilt proof failed to check: {0}")]
    Proof(#[from] ProofError),
    #[error("subtyping witness construction failed: {0}")]
    Sub(#[from] SubError),
    #[error("formula operation failed: {0}")]
    Formula(#[from] FormulaError),
    #[error("set-level operation failed: {0}")]
    SetFun(#[from] SetFunError),
    #[error("erased-proof operation failed: {0}")]
    Erased(#[from] LLError),
}

/// Reduction strategy for [`normalize`]: `Uppermost` picks a cut of
/// maximal depth (leftmost among those), `Lowermost` one of minimal depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Uppermost,
    Lowermost,
}

pub const DEFAULT_STEP_BUDGET: usize = 100_000;

/// Position map from an old conclusion to a new one. `None` marks an
/// occurrence that disappeared; such occurrences are always inert units.
type Map = Vec<Option<usize>>;

fn idmap(n: usize) -> Map {
    (0..n).map(Some).collect()
}

fn remap(m: &Map, pos: Option<usize>) -> Option<usize> {
    pos.and_then(|k| m.get(k).copied().flatten())
}

fn compose_maps(a: &Map, b: &Map) -> Map {
    a.iter()
        .map(|v| v.and_then(|j| b.get(j).copied().flatten()))
        .collect()
}

/// Index of `x` in the list obtained by removing `r`.
fn rm_idx(x: usize, r: Option<usize>) -> usize {
    x - usize::from(r.is_some_and(|r0| r0 < x))
}

/// Original index of position `x` of a list from which `r` was removed.
fn un_rm(x: usize, r: Option<usize>) -> usize {
    x + usize::from(r.is_some_and(|r0| r0 <= x))
}

/// Index before an insertion at `at`; `None` when `x` is the insertion.
fn un_ins(x: usize, at: usize) -> Option<usize> {
    match x.cmp(&at) {
        std::cmp::Ordering::Less => Some(x),
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some(x - 1),
    }
}

/// Provenance tag used to compute position maps: (source, index). Sources
/// 0 and 1 are the two cut premises; 2 marks fresh material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Tag(u8, usize);

fn map_from_tags(old: &[Tag], new: &[Tag]) -> Map {
    old.iter()
        .map(|t| new.iter().position(|u| u == t))
        .collect()
}

// ---------------------------------------------------------------------------
// Cut listing and navigation
// ---------------------------------------------------------------------------

/// All cut nodes of the proof, in deterministic preorder.
pub fn list_cuts(p: &Proof) -> Vec<CutId> {
    let mut out = Vec::new();
    collect_cuts(p, &mut Vec::new(), &mut out);
    out
}

fn collect_cuts(p: &Proof, path: &mut Vec<usize>, out: &mut Vec<CutId>) {
    if matches!(p.node, ProofNode::Cut { .. }) {
        out.push(CutId::new(path.clone()));
    }
    for (k, prem) in proof::premises(&p.node).into_iter().enumerate() {
        path.push(k);
        collect_cuts(prem, path, out);
        path.pop();
    }
}

fn child(p: &Proof, k: usize) -> Option<&Proof> {
    proof::premises(&p.node).into_iter().nth(k)
}

// ---------------------------------------------------------------------------
// Ancestor rebuilding along a position map
// ---------------------------------------------------------------------------

/// Re-apply a subtyping step at a physical position, picking the
/// orientation that fits the side of the occurrence.
fn apply_step(p: &Proof, pos: usize, rho: &SubDeriv, env: &VarEnv) -> Result<Proof, CutError> {
    if rho.lhs == rho.rhs {
        return Ok(p.clone());
    }
    let direct = mk(
        ProofNode::SubtypeStep {
            pos,
            rho: rho.clone(),
            prem: Box::new(p.clone()),
        },
        env,
    );
    match direct {
        Ok(q) => Ok(q),
        Err(_) => {
            let flipped = negate_sub(rho)?;
            Ok(mk(
                ProofNode::SubtypeStep {
                    pos,
                    rho: flipped,
                    prem: Box::new(p.clone()),
                },
                env,
            )?)
        }
    }
}

/// Rebuild `p` after its `ci`-th premise was replaced by `nc`, whose
/// conclusion relates to the old one through `m`. Returns the rebuilt
/// proof and the map of its own conclusion.
fn rebuild_one(
    p: &Proof,
    ci: usize,
    nc: Proof,
    m: &Map,
    env: &VarEnv,
) -> Result<(Proof, Map), CutError> {
    match &p.node {
        ProofNode::Cut {
            formula,
            lpos,
            rpos,
            left,
            right,
        } => {
            let (lp2, rp2, nl, nr) = if ci == 0 {
                (remap(m, *lpos), *rpos, nc.clone(), (**right).clone())
            } else {
                (*lpos, remap(m, *rpos), (**left).clone(), nc.clone())
            };
            let old_l = left.concl.items.len() - usize::from(lpos.is_some());
            let old_r = right.concl.items.len() - usize::from(rpos.is_some());
            let new_l = nl.concl.items.len() - usize::from(lp2.is_some());
            let mut sigma: Map = Vec::new();
            for i in 0..old_l {
                sigma.push(if ci == 0 {
                    remap(m, Some(un_rm(i, *lpos))).map(|j| rm_idx(j, lp2))
                } else {
                    Some(i)
                });
            }
            for i in 0..old_r {
                sigma.push(if ci == 1 {
                    remap(m, Some(un_rm(i, *rpos)))
                        .map(|j| new_l + rm_idx(j, rp2))
                } else {
                    Some(new_l + i)
                });
            }
            let q = mk(
                ProofNode::Cut {
                    formula: formula.clone(),
                    lpos: lp2,
                    rpos: rp2,
                    left: Box::new(nl),
                    right: Box::new(nr),
                },
                env,
            )?;
            Ok((q, sigma))
        }
        ProofNode::TensorIntro {
            p1,
            p2,
            out_side,
            left,
            right,
        } => {
            let (p1n, p2n, nl, nr) = if ci == 0 {
                (remap(m, *p1), *p2, nc.clone(), (**right).clone())
            } else {
                (*p1, remap(m, *p2), (**left).clone(), nc.clone())
            };
            let old_l = left.concl.items.len() - usize::from(p1.is_some());
            let old_r = right.concl.items.len() - usize::from(p2.is_some());
            let new_l = nl.concl.items.len() - usize::from(p1n.is_some());
            let new_r = nr.concl.items.len() - usize::from(p2n.is_some());
            let mut sigma: Map = Vec::new();
            for i in 0..old_l {
                sigma.push(if ci == 0 {
                    remap(m, Some(un_rm(i, *p1))).map(|j| rm_idx(j, p1n))
                } else {
                    Some(i)
                });
            }
            for i in 0..old_r {
                sigma.push(if ci == 1 {
                    remap(m, Some(un_rm(i, *p2))).map(|j| new_l + rm_idx(j, p2n))
                } else {
                    Some(new_l + i)
                });
            }
            sigma.push(Some(new_l + new_r));
            let q = mk(
                ProofNode::TensorIntro {
                    p1: p1n,
                    p2: p2n,
                    out_side: *out_side,
                    left: Box::new(nl),
                    right: Box::new(nr),
                },
                env,
            )?;
            Ok((q, sigma))
        }
        ProofNode::ParIntro { p1, p2, out, prem } => {
            let p1n = remap(m, *p1);
            let p2n = remap(m, *p2);
            let old_kept: Vec<usize> = (0..prem.concl.items.len())
                .filter(|k| Some(*k) != *p1 && Some(*k) != *p2)
                .collect();
            let new_kept: Vec<usize> = (0..nc.concl.items.len())
                .filter(|k| Some(*k) != p1n && Some(*k) != p2n)
                .collect();
            let mut sigma: Map = Vec::new();
            for (fi, k) in old_kept.iter().enumerate() {
                let _ = fi;
                sigma.push(remap(m, Some(*k)).and_then(|j| {
                    new_kept
                        .iter()
                        .position(|x| *x == j)
                        .map(|fj| fj + usize::from(out.0 <= fj))
                }));
            }
            sigma.insert(out.0, Some(out.0));
            let q = mk(
                ProofNode::ParIntro {
                    p1: p1n,
                    p2: p2n,
                    out: *out,
                    prem: Box::new(nc),
                },
                env,
            )?;
            Ok((q, sigma))
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
            let ppn = remap(m, *ppos);
            let old_n = prem.concl.items.len() - usize::from(ppos.is_some());
            let mut sigma: Map = Vec::new();
            for i in 0..old_n {
                sigma.push(
                    remap(m, Some(un_rm(i, *ppos)))
                        .map(|j| rm_idx(j, ppn))
                        .map(|j| j + usize::from(out.0 <= j)),
                );
            }
            sigma.insert(out.0, Some(out.0));
            let node = if first {
                ProofNode::PlusIntro1 {
                    principal: principal.clone(),
                    out: *out,
                    ppos: ppn,
                    prem: Box::new(nc),
                }
            } else {
                ProofNode::PlusIntro2 {
                    principal: principal.clone(),
                    out: *out,
                    ppos: ppn,
                    prem: Box::new(nc),
                }
            };
            Ok((mk(node, env)?, sigma))
        }
        ProofNode::Contraction { keep, drop, .. } => {
            let keepn = remap(m, Some(*keep))
                .ok_or_else(|| CutError::Irreducible("contracted occurrence vanished".into()))?;
            let dropn = remap(m, Some(*drop))
                .ok_or_else(|| CutError::Irreducible("contracted occurrence vanished".into()))?;
            let old_n = p.concl.items.len();
            let mut sigma: Map = Vec::new();
            for i in 0..old_n {
                sigma.push(
                    remap(m, Some(un_rm(i, Some(*drop)))).map(|j| rm_idx(j, Some(dropn))),
                );
            }
            let q = mk(
                ProofNode::Contraction {
                    keep: keepn,
                    drop: dropn,
                    prem: Box::new(nc),
                },
                env,
            )?;
            Ok((q, sigma))
        }
        ProofNode::Dereliction {
            f,
            u,
            body,
            pos,
            out,
            ..
        } => {
            let posn = remap(m, *pos);
            let old_n = p.concl.items.len() - 1;
            let mut sigma: Map = Vec::new();
            for i in 0..old_n {
                sigma.push(
                    remap(m, Some(un_rm(i, *pos)))
                        .map(|j| rm_idx(j, posn))
                        .map(|j| j + usize::from(out.0 <= j)),
                );
            }
            sigma.insert(out.0, Some(out.0));
            let q = mk(
                ProofNode::Dereliction {
                    f: f.clone(),
                    u: u.clone(),
                    body: body.clone(),
                    pos: posn,
                    out: *out,
                    prem: Box::new(nc),
                },
                env,
            )?;
            Ok((q, sigma))
        }
        ProofNode::Weakening { u, body, out, .. } => {
            let mut sigma: Map = m
                .iter()
                .map(|v| v.map(|j| j + usize::from(out.0 <= j)))
                .collect();
            sigma.insert(out.0, Some(out.0));
            let q = mk(
                ProofNode::Weakening {
                    u: u.clone(),
                    body: body.clone(),
                    out: *out,
                    prem: Box::new(nc),
                },
                env,
            )?;
            Ok((q, sigma))
        }
        ProofNode::Promotion {
            v,
            out,
            prem_pos,
            prem,
        } => {
            let ppn = remap(m, *prem_pos);
            let (concl, sigma) = realign_cached_ctx(
                &p.concl,
                out.0,
                prem.concl.items.len(),
                *prem_pos,
                &nc,
                ppn,
                m,
            )?;
            let new_out0 = out.0.min(nc.concl.items.len() - usize::from(ppn.is_some()));
            let q = mk_with_concl(
                ProofNode::Promotion {
                    v: v.clone(),
                    out: (new_out0, out.1),
                    prem_pos: ppn,
                    prem: Box::new(nc),
                },
                concl,
                env,
            )?;
            Ok((q, sigma))
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
            if ci == 1 {
                // the conclusion follows the first premise, so a change in
                // the second premise leaves it untouched
                let rpn = remap(m, *rpos);
                let q = mk_with_concl(
                    ProofNode::WithIntro {
                        i: i.clone(),
                        j: j.clone(),
                        out: *out,
                        lpos: *lpos,
                        rpos: rpn,
                        left: left.clone(),
                        right: Box::new(nc),
                    },
                    p.concl.clone(),
                    env,
                )?;
                return Ok((q, idmap(p.concl.items.len())));
            }
            let lpn = remap(m, *lpos);
            let (concl, sigma) = realign_cached_ctx(
                &p.concl,
                out.0,
                left.concl.items.len(),
                *lpos,
                &nc,
                lpn,
                m,
            )?;
            let new_out0 = out.0.min(nc.concl.items.len() - usize::from(lpn.is_some()));
            let q = mk_with_concl(
                ProofNode::WithIntro {
                    i: i.clone(),
                    j: j.clone(),
                    out: (new_out0, out.1),
                    lpos: lpn,
                    rpos: *rpos,
                    left: Box::new(nc),
                    right: right.clone(),
                },
                concl,
                env,
            )?;
            Ok((q, sigma))
        }
        ProofNode::SubtypeStep { pos, rho, .. } => match remap(m, Some(*pos)) {
            None => Ok((nc, m.clone())),
            Some(posn) => {
                let q = apply_step(&nc, posn, rho, env)?;
                Ok((q, m.clone()))
            }
        },
        ProofNode::BaseChangeStep { f, .. } => {
            let q = mk(
                ProofNode::BaseChangeStep {
                    f: f.clone(),
                    prem: Box::new(nc),
                },
                env,
            )?;
            Ok((q, m.clone()))
        }
        _ => Err(CutError::NotACut),
    }
}

fn is_ident(m: &Map) -> bool {
    m.iter().enumerate().all(|(i, v)| *v == Some(i))
}

/// Rebuild the cached conclusion of a context-re-indexing rule after its
/// context-carrying premise changed along `m`, keeping the conclusion
/// context positionally aligned with the premise — the alignment the
/// erased checker computes. Premise occurrences that vanished or appeared
/// are inert units; the former are dropped from the conclusion, the latter
/// padded with inert units.
fn realign_cached_ctx(
    old_concl: &Sequent,
    out0: usize,
    old_prem_len: usize,
    old_ppos: Option<usize>,
    nc: &Proof,
    new_ppos: Option<usize>,
    m: &Map,
) -> Result<(Sequent, Map), CutError> {
    let new_ctx_len = nc.concl.items.len() - usize::from(new_ppos.is_some());
    let old_ctx: Vec<Item> = old_concl
        .items
        .iter()
        .enumerate()
        .filter(|(x, _)| *x != out0)
        .map(|(_, it)| it.clone())
        .collect();
    let n_old = old_ctx.len();
    if is_ident(m)
        && m.len() == old_prem_len
        && nc.concl.items.len() == old_prem_len
        && old_ppos == new_ppos
    {
        return Ok((old_concl.clone(), idmap(old_concl.items.len())));
    }
    if old_prem_len - usize::from(old_ppos.is_some()) != n_old {
        return Err(blocked(
            "cached context is not positionally aligned with its premise",
        ));
    }
    let mut new_ctx: Vec<Option<Item>> = vec![None; new_ctx_len];
    let mut sigma: Map = vec![None; old_concl.items.len()];
    for (t, item) in old_ctx.iter().enumerate() {
        let p_old = un_rm(t, old_ppos);
        let u = t + usize::from(out0 <= t);
        if let Some(q) = remap(m, Some(p_old)) {
            let s = rm_idx(q, new_ppos);
            new_ctx[s] = Some(item.clone());
            sigma[u] = Some(s);
        }
    }
    for (s, slot) in new_ctx.iter_mut().enumerate() {
        if slot.is_none() {
            let prem_pos = un_rm(s, new_ppos);
            let side = nc
                .concl
                .items
                .get(prem_pos)
                .map(|(sd, _)| *sd)
                .unwrap_or(Side::Right);
            *slot = Some(proof::phys(side, Formula::Bot));
        }
    }
    let new_out0 = out0.min(new_ctx_len);
    let mut items: Vec<Item> = new_ctx.into_iter().map(|s| s.expect("filled")).collect();
    items.insert(new_out0, old_concl.items[out0].clone());
    for v in sigma.iter_mut().flatten() {
        if new_out0 <= *v {
            *v += 1;
        }
    }
    sigma[out0] = Some(new_out0);
    Ok((Sequent::new(old_concl.locus.clone(), items), sigma))
}

// ---------------------------------------------------------------------------
// One-level commutation of the administrative nodes
// ---------------------------------------------------------------------------

fn blocked(msg: &str) -> CutError {
    CutError::Irreducible(msg.to_string())
}

fn bcnode(h: &SetFun, p: &Proof, env: &VarEnv) -> Result<Proof, CutError> {
    Ok(mk(
        ProofNode::BaseChangeStep {
            f: h.clone(),
            prem: Box::new(p.clone()),
        },
        env,
    )?)
}

/// The stored witness of a subtyping step reads in the direction of the
/// physical formula; this is its view on effective values.
fn eff_rho(side: Side, rho: &SubDeriv) -> Result<SubDeriv, CutError> {
    match side {
        Side::Right => Ok(rho.clone()),
        Side::Left => Ok(negate_sub(rho)?),
    }
}

/// [`apply_step`] for an optional position: a virtual occurrence admits
/// only the trivial rewrite.
fn opt_step(
    p: &Proof,
    pos: Option<usize>,
    tau: &SubDeriv,
    env: &VarEnv,
) -> Result<Proof, CutError> {
    if tau.lhs == tau.rhs {
        return Ok(p.clone());
    }
    match pos {
        Some(k) => apply_step(p, k, tau, env),
        None => Err(blocked("virtual occurrence cannot be rewritten")),
    }
}

/// Rewrite every context occurrence of `prem` (everything except `skip`)
/// along a derivation built from the matching conclusion context item; a
/// premise occurrence matches `c` when its effective value is
/// `pre(bc(inj, c))`. Returns the rewritten proof together with the
/// matching (context index to premise position; `None` for an inert-unit
/// item without a counterpart).
fn fix_context_steps(
    prem: &Proof,
    skip: Option<usize>,
    ctx: &[Item],
    pre: impl Fn(&Formula) -> Result<Formula, FormulaError>,
    inj: &SetFun,
    mk_tau: impl Fn(&Formula) -> Result<SubDeriv, SubError>,
    env: &VarEnv,
) -> Result<(Proof, Vec<Option<usize>>), CutError> {
    let mut available: Vec<Option<Formula>> = ctx.iter().map(|it| Some(eff(it))).collect();
    let mut matched: Vec<Option<usize>> = vec![None; ctx.len()];
    let mut current = prem.clone();
    for idx in (0..prem.concl.items.len()).filter(|x| Some(*x) != skip) {
        let here = eff(&current.concl.items[idx]);
        // positional candidate first, then first syntactic match
        let guess = matched.iter().filter(|m| m.is_some()).count();
        let order: Vec<usize> = std::iter::once(guess)
            .chain((0..available.len()).filter(|c| *c != guess))
            .filter(|c| *c < available.len())
            .collect();
        let mut found = None;
        for ci in order {
            if let Some(c) = &available[ci] {
                if pre(&base_change(inj, c)?)? == here {
                    found = Some(ci);
                    break;
                }
            }
        }
        let Some(ci) = found else {
            if here == Formula::Bot {
                continue;
            }
            return Err(blocked("re-indexed context occurrence not matched"));
        };
        let c = available[ci].take().expect("just matched");
        matched[ci] = Some(idx);
        let tau = mk_tau(&c)?;
        current = opt_step(&current, Some(idx), &tau, env)?;
    }
    for (ci, m) in matched.iter().enumerate() {
        if m.is_none() && eff(&ctx[ci]) != Formula::Bot {
            return Err(blocked("conclusion context occurrence not matched"));
        }
    }
    Ok((current, matched))
}

fn bc_seq(h: &SetFun, s: &Sequent) -> Result<Sequent, CutError> {
    Ok(Sequent::new(
        h.dom().clone(),
        proof::bc_items(h, &s.items)?,
    ))
}

/// Commute a whole-sequent re-indexing one rule upwards: the result
/// concludes the same sequent but its root is the rule applied inside
/// `inner` (or a fused re-indexing). The premises of the new root carry
/// fresh administrative nodes.
fn push_bc_one(h: &SetFun, inner: &Proof, env: &VarEnv) -> Result<Proof, CutError> {
    match &inner.node {
        ProofNode::Ax { f, var, negative } => Ok(mk(
            ProofNode::Ax {
                f: SetFun::compose(h, f)?,
                var: var.clone(),
                negative: *negative,
            },
            env,
        )?),
        ProofNode::OneIntro { .. } => Ok(mk(
            ProofNode::OneIntro {
                locus: h.dom().clone(),
            },
            env,
        )?),
        ProofNode::TopIntro { pos } => Ok(mk_with_concl(
            ProofNode::TopIntro { pos: *pos },
            bc_seq(h, &inner.concl)?,
            env,
        )?),
        ProofNode::Cut {
            formula,
            lpos,
            rpos,
            left,
            right,
        } => Ok(mk(
            ProofNode::Cut {
                formula: base_change(h, formula)?,
                lpos: *lpos,
                rpos: *rpos,
                left: Box::new(bcnode(h, left, env)?),
                right: Box::new(bcnode(h, right, env)?),
            },
            env,
        )?),
        ProofNode::TensorIntro {
            p1,
            p2,
            out_side,
            left,
            right,
        } => Ok(mk(
            ProofNode::TensorIntro {
                p1: *p1,
                p2: *p2,
                out_side: *out_side,
                left: Box::new(bcnode(h, left, env)?),
                right: Box::new(bcnode(h, right, env)?),
            },
            env,
        )?),
        ProofNode::ParIntro { p1, p2, out, prem } => Ok(mk(
            ProofNode::ParIntro {
                p1: *p1,
                p2: *p2,
                out: *out,
                prem: Box::new(bcnode(h, prem, env)?),
            },
            env,
        )?),
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
            let first = matches!(inner.node, ProofNode::PlusIntro1 { .. });
            let (inj, comp) = match (principal, first) {
                (Formula::Plus(i, _, a, _), true) => (i, (**a).clone()),
                (Formula::Plus(_, j, _, b), false) => (j, (**b).clone()),
                _ => return Err(blocked("sum introduction principal shape")),
            };
            let m = pullback(h, inj)?;
            let tau = chain_sub(
                &[h.clone(), inj.invert()?],
                &[m.p1.invert()?, m.p2.clone()],
                inj.dom(),
                &comp,
            )?;
            let step = opt_step(&bcnode(h, prem, env)?, *ppos, &tau, env)?;
            let node = if first {
                ProofNode::PlusIntro1 {
                    principal: base_change(h, principal)?,
                    out: *out,
                    ppos: *ppos,
                    prem: Box::new(step),
                }
            } else {
                ProofNode::PlusIntro2 {
                    principal: base_change(h, principal)?,
                    out: *out,
                    ppos: *ppos,
                    prem: Box::new(step),
                }
            };
            Ok(mk(node, env)?)
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
            let ctx: Vec<Item> = inner
                .concl
                .items
                .iter()
                .enumerate()
                .filter(|(x, _)| *x != out.0)
                .map(|(_, it)| it.clone())
                .collect();
            let mut branches = Vec::new();
            let mut injs = Vec::new();
            for (inj, prem, cpos) in [(i, left, lpos), (j, right, rpos)] {
                let m = pullback(h, inj)?;
                let step = bcnode(&m.p2, prem, env)?;
                let (step, _) = fix_context_steps(
                    &step,
                    *cpos,
                    &ctx,
                    |re| base_change(&m.p2, re),
                    inj,
                    |c| {
                        chain_sub(
                            &[m.p2.clone(), inj.clone()],
                            &[m.p1.clone(), h.clone()],
                            inj.cod(),
                            c,
                        )
                    },
                    env,
                )?;
                branches.push(step);
                injs.push(m.p1);
            }
            let right_b = branches.pop().expect("two branches");
            let left_b = branches.pop().expect("two branches");
            Ok(mk_with_concl(
                ProofNode::WithIntro {
                    i: injs[0].clone(),
                    j: injs[1].clone(),
                    out: *out,
                    lpos: *lpos,
                    rpos: *rpos,
                    left: Box::new(left_b),
                    right: Box::new(right_b),
                },
                bc_seq(h, &inner.concl)?,
                env,
            )?)
        }
        ProofNode::Contraction { keep, drop, prem } => Ok(mk(
            ProofNode::Contraction {
                keep: *keep,
                drop: *drop,
                prem: Box::new(bcnode(h, prem, env)?),
            },
            env,
        )?),
        ProofNode::Dereliction {
            f,
            u,
            body,
            pos,
            out,
            prem,
        } => {
            let pu = pullback(h, u)?;
            let f2 = {
                let fd = f.clone();
                let hh = h.clone();
                SetFun::from_fn(h.dom().clone(), pu.locus.clone(), |x| {
                    crate::setfun::Elem::pair(
                        x.clone(),
                        fd.apply(&hh.apply(x).expect("domain checked"))
                            .expect("domain checked"),
                    )
                })?
            };
            let body2 = base_change(&pu.p2, body)?;
            let tau = chain_sub(
                &[h.clone(), f.clone()],
                &[f2.clone(), pu.p2.clone()],
                u.dom(),
                body,
            )?;
            let step = opt_step(&bcnode(h, prem, env)?, *pos, &tau, env)?;
            Ok(mk(
                ProofNode::Dereliction {
                    f: f2,
                    u: pu.p1,
                    body: body2,
                    pos: *pos,
                    out: *out,
                    prem: Box::new(step),
                },
                env,
            )?)
        }
        ProofNode::Weakening { u, body, out, prem } => {
            let pu = pullback(h, u)?;
            Ok(mk(
                ProofNode::Weakening {
                    u: pu.p1,
                    body: base_change(&pu.p2, body)?,
                    out: *out,
                    prem: Box::new(bcnode(h, prem, env)?),
                },
                env,
            )?)
        }
        ProofNode::Promotion {
            v,
            out,
            prem_pos,
            prem,
        } => {
            let pv = pullback(h, v)?;
            let ctx: Vec<Item> = inner
                .concl
                .items
                .iter()
                .enumerate()
                .filter(|(x, _)| *x != out.0)
                .map(|(_, it)| it.clone())
                .collect();
            let step = bcnode(&pv.p2, prem, env)?;
            let (step, _) = fix_context_steps(
                &step,
                *prem_pos,
                &ctx,
                |re| base_change(&pv.p2, re),
                v,
                |c| {
                    chain_sub(
                        &[pv.p2.clone(), v.clone()],
                        &[pv.p1.clone(), h.clone()],
                        v.cod(),
                        c,
                    )
                },
                env,
            )?;
            Ok(mk_with_concl(
                ProofNode::Promotion {
                    v: pv.p1,
                    out: *out,
                    prem_pos: *prem_pos,
                    prem: Box::new(step),
                },
                bc_seq(h, &inner.concl)?,
                env,
            )?)
        }
        ProofNode::SubtypeStep { pos, rho, prem } => {
            let rho2 = bc_sub(h, rho)?;
            let stepped = bcnode(h, prem, env)?;
            apply_step(&stepped, *pos, &rho2, env)
        }
        ProofNode::BaseChangeStep { f, prem } => {
            // fusing into a composite re-indexing would rebuild additive
            // annotations with a different pullback nesting; commute the
            // inner re-indexing out of the way first
            let inner2 = push_bc_one(f, prem, env)?;
            push_bc_one(h, &inner2, env)
        }
    }
}

/// Commute a single-occurrence rewrite one rule upwards: the conclusion
/// (`inner`'s conclusion with the occurrence at `pos` rewritten along
/// `rho`) is preserved, but the root becomes the rule applied inside
/// `inner`, with the rewrite decomposed into its premises.
fn push_sub_one(pos: usize, rho: &SubDeriv, inner: &Proof, env: &VarEnv) -> Result<Proof, CutError> {
    let side = inner
        .concl
        .items
        .get(pos)
        .map(|(s, _)| *s)
        .ok_or(CutError::Proof(ProofError::BadPosition(pos)))?;
    let sig = eff_rho(side, rho)?;
    if sig.lhs == sig.rhs {
        return Ok(inner.clone());
    }
    let stepped_concl = {
        let mut c = inner.concl.clone();
        c.items[pos] = proof::phys(side, sig.rhs.clone());
        c
    };
    match &inner.node {
        ProofNode::Ax { .. } | ProofNode::OneIntro { .. } => {
            Err(blocked("nontrivial rewrite on an axiom occurrence"))
        }
        ProofNode::TopIntro { pos: tpos } => Ok(mk_with_concl(
            ProofNode::TopIntro { pos: *tpos },
            stepped_concl,
            env,
        )?),
        ProofNode::Cut {
            formula,
            lpos,
            rpos,
            left,
            right,
        } => {
            let lenl = left.concl.items.len() - usize::from(lpos.is_some());
            let (left, right) = if pos < lenl {
                let orig = un_rm(pos, *lpos);
                (apply_step(left, orig, &sig, env)?, (**right).clone())
            } else {
                let orig = un_rm(pos - lenl, *rpos);
                ((**left).clone(), apply_step(right, orig, &sig, env)?)
            };
            Ok(mk(
                ProofNode::Cut {
                    formula: formula.clone(),
                    lpos: *lpos,
                    rpos: *rpos,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                env,
            )?)
        }
        ProofNode::TensorIntro {
            p1,
            p2,
            out_side,
            left,
            right,
        } => {
            if pos == inner.concl.items.len() - 1 {
                let (s1, s2) = match &sig.node {
                    SubNode::TensorCong(s1, s2) => (s1, s2),
                    _ => return Err(blocked("tensor occurrence needs a tensor derivation")),
                };
                Ok(mk(
                    ProofNode::TensorIntro {
                        p1: *p1,
                        p2: *p2,
                        out_side: *out_side,
                        left: Box::new(opt_step(left, *p1, s1, env)?),
                        right: Box::new(opt_step(right, *p2, s2, env)?),
                    },
                    env,
                )?)
            } else {
                let lenl = left.concl.items.len() - usize::from(p1.is_some());
                let (left, right) = if pos < lenl {
                    let orig = un_rm(pos, *p1);
                    (apply_step(left, orig, &sig, env)?, (**right).clone())
                } else {
                    let orig = un_rm(pos - lenl, *p2);
                    ((**left).clone(), apply_step(right, orig, &sig, env)?)
                };
                Ok(mk(
                    ProofNode::TensorIntro {
                        p1: *p1,
                        p2: *p2,
                        out_side: *out_side,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    env,
                )?)
            }
        }
        ProofNode::ParIntro { p1, p2, out, prem } => {
            let prem = match un_ins(pos, out.0) {
                None => {
                    let (s1, s2) = match &sig.node {
                        SubNode::ParCong(s1, s2) => (s1, s2),
                        _ => return Err(blocked("par occurrence needs a par derivation")),
                    };
                    opt_step(&opt_step(prem, *p1, s1, env)?, *p2, s2, env)?
                }
                Some(kk) => {
                    let mut removed: Vec<usize> =
                        [*p1, *p2].iter().flatten().copied().collect();
                    removed.sort_unstable();
                    let mut orig = kk;
                    for r in &removed {
                        if *r <= orig {
                            orig += 1;
                        }
                    }
                    apply_step(prem, orig, &sig, env)?
                }
            };
            Ok(mk(
                ProofNode::ParIntro {
                    p1: *p1,
                    p2: *p2,
                    out: *out,
                    prem: Box::new(prem),
                },
                env,
            )?)
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
            let first = matches!(inner.node, ProofNode::PlusIntro1 { .. });
            match un_ins(pos, out.0) {
                None => {
                    let (s1, s2) = match &sig.node {
                        SubNode::PlusRule(s1, s2) => (s1, s2),
                        _ => return Err(blocked("sum occurrence needs a sum derivation")),
                    };
                    let (io, comp_old) = match (principal, first) {
                        (Formula::Plus(i, _, a, _), true) => (i, (**a).clone()),
                        (Formula::Plus(_, j, _, b), false) => (j, (**b).clone()),
                        _ => return Err(blocked("sum introduction principal shape")),
                    };
                    let (inew, comp_new) = match (&sig.rhs, first) {
                        (Formula::Plus(i2, _, a2, _), true) => (i2, (**a2).clone()),
                        (Formula::Plus(_, j2, _, b2), false) => (j2, (**b2).clone()),
                        _ => return Err(blocked("sum derivation endpoint shape")),
                    };
                    let s = if first { s1 } else { s2 };
                    let pq = pullback(io, inew)?;
                    let io_inv = io.invert()?;
                    let inew_inv = inew.invert()?;
                    let hmap = SetFun::from_fn(io.cod().clone(), pq.locus.clone(), |t| {
                        crate::setfun::Elem::pair(
                            io_inv.apply(t).expect("bijection"),
                            inew_inv.apply(t).expect("bijection"),
                        )
                    })?;
                    let tau = trans(
                        &chain_sub(
                            std::slice::from_ref(&io.invert()?),
                            &[hmap.clone(), pq.p1.clone()],
                            io.dom(),
                            &comp_old,
                        )?,
                        &trans(
                            &bc_sub(&hmap, s)?,
                            &chain_sub(
                                &[hmap.clone(), pq.p2.clone()],
                                std::slice::from_ref(&inew.invert()?),
                                inew.dom(),
                                &comp_new,
                            )?,
                        )?,
                    )?;
                    let prem = opt_step(prem, *ppos, &tau, env)?;
                    let node = if first {
                        ProofNode::PlusIntro1 {
                            principal: sig.rhs.clone(),
                            out: *out,
                            ppos: *ppos,
                            prem: Box::new(prem),
                        }
                    } else {
                        ProofNode::PlusIntro2 {
                            principal: sig.rhs.clone(),
                            out: *out,
                            ppos: *ppos,
                            prem: Box::new(prem),
                        }
                    };
                    Ok(mk(node, env)?)
                }
                Some(kk) => {
                    let orig = un_rm(kk, *ppos);
                    let prem = apply_step(prem, orig, &sig, env)?;
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
                    Ok(mk(node, env)?)
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
            let ctx: Vec<Item> = inner
                .concl
                .items
                .iter()
                .enumerate()
                .filter(|(x, _)| *x != out.0)
                .map(|(_, it)| it.clone())
                .collect();
            if pos == out.0 {
                let (s1, s2) = match &sig.node {
                    SubNode::WithRule(s1, s2) => (s1, s2),
                    _ => return Err(blocked("product occurrence needs a product derivation")),
                };
                let (a_old, b_old) = match &sig.lhs {
                    Formula::With(_, _, a, b) => ((**a).clone(), (**b).clone()),
                    _ => return Err(blocked("product derivation endpoint shape")),
                };
                let (i2, j2, a_new, b_new) = match &sig.rhs {
                    Formula::With(i2, j2, a2, b2) => {
                        (i2.clone(), j2.clone(), (**a2).clone(), (**b2).clone())
                    }
                    _ => return Err(blocked("product derivation endpoint shape")),
                };
                let left = push_sub_branch(
                    left, *lpos, i, &i2, s1, &a_old, &a_new, &ctx, env,
                )?;
                let right = push_sub_branch(
                    right, *rpos, j, &j2, s2, &b_old, &b_new, &ctx, env,
                )?;
                Ok(mk_with_concl(
                    ProofNode::WithIntro {
                        i: i2,
                        j: j2,
                        out: *out,
                        lpos: *lpos,
                        rpos: *rpos,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    stepped_concl,
                    env,
                )?)
            } else {
                let old = eff(&inner.concl.items[pos]);
                let li = find_reindexed(left, *lpos, i, &old)?;
                let ri = find_reindexed(right, *rpos, j, &old)?;
                let left = apply_step(left, li, &bc_sub(i, &sig)?, env)?;
                let right = apply_step(right, ri, &bc_sub(j, &sig)?, env)?;
                Ok(mk_with_concl(
                    ProofNode::WithIntro {
                        i: i.clone(),
                        j: j.clone(),
                        out: *out,
                        lpos: *lpos,
                        rpos: *rpos,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    stepped_concl,
                    env,
                )?)
            }
        }
        ProofNode::Contraction { keep, drop, prem } => {
            let orig = if pos < *drop { pos } else { pos + 1 };
            let prem = if orig == *keep {
                apply_step(&apply_step(prem, *keep, &sig, env)?, *drop, &sig, env)?
            } else {
                apply_step(prem, orig, &sig, env)?
            };
            Ok(mk(
                ProofNode::Contraction {
                    keep: *keep,
                    drop: *drop,
                    prem: Box::new(prem),
                },
                env,
            )?)
        }
        ProofNode::Dereliction {
            f,
            u,
            body,
            pos: dpos,
            out,
            prem,
        } => match un_ins(pos, out.0) {
            None => {
                let (g, s) = match &sig.node {
                    SubNode::QuestRule(g, s) => (g, s),
                    _ => return Err(blocked("quest occurrence needs a quest derivation")),
                };
                let (u2, body2) = match &sig.rhs {
                    Formula::Quest(u2, b2) => (u2.clone(), (**b2).clone()),
                    _ => return Err(blocked("quest derivation endpoint shape")),
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
                let prem = opt_step(prem, *dpos, &tau, env)?;
                Ok(mk(
                    ProofNode::Dereliction {
                        f: f2,
                        u: u2,
                        body: body2,
                        pos: *dpos,
                        out: *out,
                        prem: Box::new(prem),
                    },
                    env,
                )?)
            }
            Some(kk) => {
                let orig = un_rm(kk, *dpos);
                let prem = apply_step(prem, orig, &sig, env)?;
                Ok(mk(
                    ProofNode::Dereliction {
                        f: f.clone(),
                        u: u.clone(),
                        body: body.clone(),
                        pos: *dpos,
                        out: *out,
                        prem: Box::new(prem),
                    },
                    env,
                )?)
            }
        },
        ProofNode::Weakening { u, body, out, prem } => match un_ins(pos, out.0) {
            None => {
                let (u2, body2) = match &sig.rhs {
                    Formula::Quest(u2, b2) => (u2.clone(), (**b2).clone()),
                    _ => return Err(blocked("quest derivation endpoint shape")),
                };
                if !matches!(sig.node, SubNode::QuestRule(..)) {
                    return Err(blocked("quest occurrence needs a quest derivation"));
                }
                Ok(mk(
                    ProofNode::Weakening {
                        u: u2,
                        body: body2,
                        out: *out,
                        prem: prem.clone(),
                    },
                    env,
                )?)
            }
            Some(kk) => {
                let prem = apply_step(prem, kk, &sig, env)?;
                Ok(mk(
                    ProofNode::Weakening {
                        u: u.clone(),
                        body: body.clone(),
                        out: *out,
                        prem: Box::new(prem),
                    },
                    env,
                )?)
            }
        },
        ProofNode::Promotion {
            v,
            out,
            prem_pos,
            prem,
        } => {
            let ctx: Vec<Item> = inner
                .concl
                .items
                .iter()
                .enumerate()
                .filter(|(x, _)| *x != out.0)
                .map(|(_, it)| it.clone())
                .collect();
            match un_ins(pos, out.0) {
                None => {
                    let (g, s) = match &sig.node {
                        SubNode::BangRule(g, s) => (g, s),
                        _ => return Err(blocked("bang occurrence needs a bang derivation")),
                    };
                    let gv = SetFun::compose(g, v)?;
                    let step = bcnode(g, prem, env)?;
                    let step = opt_step(&step, *prem_pos, s, env)?;
                    let (step, _) = fix_context_steps(
                        &step,
                        *prem_pos,
                        &ctx,
                        |re| base_change(g, re),
                        v,
                        |c| {
                            chain_sub(
                                &[g.clone(), v.clone()],
                                std::slice::from_ref(&gv),
                                v.cod(),
                                c,
                            )
                        },
                        env,
                    )?;
                    Ok(mk_with_concl(
                        ProofNode::Promotion {
                            v: gv,
                            out: *out,
                            prem_pos: *prem_pos,
                            prem: Box::new(step),
                        },
                        stepped_concl,
                        env,
                    )?)
                }
                Some(_) => {
                    let old = eff(&inner.concl.items[pos]);
                    let idx = find_reindexed(prem, *prem_pos, v, &old)?;
                    let prem = apply_step(prem, idx, &bc_sub(v, &sig)?, env)?;
                    Ok(mk_with_concl(
                        ProofNode::Promotion {
                            v: v.clone(),
                            out: *out,
                            prem_pos: *prem_pos,
                            prem: Box::new(prem),
                        },
                        stepped_concl,
                        env,
                    )?)
                }
            }
        }
        ProofNode::SubtypeStep {
            pos: pos2,
            rho: rho2,
            prem,
        } => {
            if *pos2 == pos {
                let side2 = prem
                    .concl
                    .items
                    .get(pos)
                    .map(|(s, _)| *s)
                    .ok_or(CutError::Proof(ProofError::BadPosition(pos)))?;
                let sig2 = eff_rho(side2, rho2)?;
                let fused = trans(&sig2, &sig)?;
                apply_step(prem, pos, &fused, env)
            } else {
                let q = apply_step(prem, pos, &sig, env)?;
                apply_step(&q, *pos2, rho2, env)
            }
        }
        ProofNode::BaseChangeStep { f, prem } => {
            let pushed = push_bc_one(f, prem, env)?;
            apply_step(&pushed, pos, &sig, env)
        }
    }
}

/// Rebuild one premise of a `WithIntro` whose principal occurrence is
/// rewritten: transport it to the new injection's domain with a fresh
/// re-indexing node, then adapt its component and context occurrences.
#[allow(clippy::too_many_arguments)]
fn push_sub_branch(
    prem: &Proof,
    comp_pos: Option<usize>,
    inj_old: &SetFun,
    inj_new: &SetFun,
    s: &SubDeriv,
    comp_old: &Formula,
    comp_new: &Formula,
    ctx: &[Item],
    env: &VarEnv,
) -> Result<Proof, CutError> {
    let pi = pullback(inj_new, inj_old)?;
    let phi = SetFun::compose(&pi.p1.invert()?, &pi.p2)?;
    let step = bcnode(&phi, prem, env)?;
    let (step, _) = fix_context_steps(
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
    let pq = pullback(inj_old, inj_new)?;
    let hmap = SetFun::from_fn(inj_new.dom().clone(), pq.locus.clone(), |x| {
        crate::setfun::Elem::pair(phi.apply(x).expect("domain checked"), x.clone())
    })?;
    let tau = trans(
        &chain_sub(
            std::slice::from_ref(&phi),
            &[hmap.clone(), pq.p1.clone()],
            inj_old.dom(),
            comp_old,
        )?,
        &trans(
            &bc_sub(&hmap, s)?,
            &chain_sub(&[hmap.clone(), pq.p2.clone()], &[], inj_new.dom(), comp_new)?,
        )?,
    )?;
    opt_step(&step, comp_pos, &tau, env)
}

/// First premise occurrence (other than `skip`) whose effective value is
/// the `inj`-re-indexing of `target`.
fn find_reindexed(
    prem: &Proof,
    skip: Option<usize>,
    inj: &SetFun,
    target: &Formula,
) -> Result<usize, CutError> {
    let want = base_change(inj, target)?;
    prem.concl
        .items
        .iter()
        .enumerate()
        .position(|(k, it)| Some(k) != skip && eff(it) == want)
        .ok_or_else(|| blocked("re-indexed context occurrence not found"))
}

// ---------------------------------------------------------------------------
// Single-cut reduction
// ---------------------------------------------------------------------------

/// Whether the occurrence at `pos` of the conclusion of `p` is the one
/// introduced by `p`'s root rule.
fn principal_at(p: &Proof, pos: Option<usize>) -> bool {
    let Some(k) = pos else { return false };
    match &p.node {
        ProofNode::Ax { .. } => true,
        ProofNode::OneIntro { .. } => k == 0,
        ProofNode::TopIntro { pos } => k == *pos,
        ProofNode::TensorIntro { .. } => k == p.concl.items.len() - 1,
        ProofNode::ParIntro { out, .. }
        | ProofNode::PlusIntro1 { out, .. }
        | ProofNode::PlusIntro2 { out, .. }
        | ProofNode::WithIntro { out, .. }
        | ProofNode::Dereliction { out, .. }
        | ProofNode::Weakening { out, .. }
        | ProofNode::Promotion { out, .. } => k == out.0,
        ProofNode::Contraction { keep, drop, .. } => k == rm_idx(*keep, Some(*drop)),
        _ => false,
    }
}

fn is_leaf(p: &Proof) -> bool {
    matches!(
        p.node,
        ProofNode::Ax { .. } | ProofNode::OneIntro { .. } | ProofNode::TopIntro { .. }
    )
}

/// Commute the administrative nodes out of a cut premise root: re-indexing
/// and cut-formula rewrites are pushed one rule upwards, context rewrites
/// are stripped off and returned so the caller can replay them below the
/// reduct. The conclusion is preserved except at the stripped positions.
fn expose(
    mut t: Proof,
    cutpos: Option<usize>,
    env: &VarEnv,
) -> Result<(Proof, Vec<(usize, SubDeriv)>), CutError> {
    let mut pend = Vec::new();
    for _ in 0..10_000 {
        match &t.node {
            ProofNode::BaseChangeStep { f, prem } => {
                t = push_bc_one(f, prem, env)?;
            }
            ProofNode::SubtypeStep { pos, rho, prem } => {
                let side = t.concl.items[*pos].0;
                let sig = eff_rho(side, rho)?;
                if sig.lhs == sig.rhs {
                    t = (**prem).clone();
                } else if Some(*pos) == cutpos {
                    t = push_sub_one(*pos, rho, prem, env)?;
                } else {
                    pend.push((*pos, rho.clone()));
                    t = (**prem).clone();
                }
            }
            _ => return Ok((t, pend)),
        }
    }
    Err(blocked("administrative commutation did not converge"))
}

/// Reduce the cut at the root of `p`. Returns the reduct, the position map
/// of its conclusion relative to `p`'s, and the applied rule's name.
fn reduce_cut_node(p: &Proof, env: &VarEnv) -> Result<(Proof, Map, String), CutError> {
    let ProofNode::Cut {
        formula,
        lpos,
        rpos,
        left,
        right,
    } = &p.node
    else {
        return Err(CutError::NotACut);
    };
    let (lp, rp) = (*lpos, *rpos);
    let (lt, pendl) = expose((**left).clone(), lp, env)?;
    let (rt, pendr) = expose((**right).clone(), rp, env)?;
    let nl = lt.concl.items.len() - usize::from(lp.is_some());
    let (q, m, name) = dispatch(formula, lp, rp, &lt, &rt, &p.concl.locus, env, 0)?;
    let mut out = q;
    let replay = pendl
        .iter()
        .rev()
        .map(|(pos, rho)| (rm_idx(*pos, lp), rho))
        .chain(
            pendr
                .iter()
                .rev()
                .map(|(pos, rho)| (nl + rm_idx(*pos, rp), rho)),
        );
    for (o, rho) in replay {
        match m.get(o).copied().flatten() {
            Some(o2) => out = apply_step(&out, o2, rho, env)?,
            None => return Err(blocked("stripped rewrite lost its occurrence")),
        }
    }
    Ok((out, m, name))
}

#[allow(clippy::too_many_arguments)]
fn dispatch(
    f: &Formula,
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &Proof,
    rt: &Proof,
    locus: &crate::setfun::Locus,
    env: &VarEnv,
    depth: usize,
) -> Result<(Proof, Map, String), CutError> {
    if depth > 2 {
        return Err(blocked("mirrored dispatch did not settle"));
    }
    let nl = lt.concl.items.len() - usize::from(lp.is_some());
    let nr = rt.concl.items.len() - usize::from(rp.is_some());
    let mirror = |env: &VarEnv| -> Result<(Proof, Map, String), CutError> {
        let (q, m, name) = dispatch(&f.negate(), rp, lp, rt, lt, locus, env, depth + 1)?;
        let mut mm: Map = Vec::with_capacity(nl + nr);
        for i in 0..nl {
            mm.push(m[nr + i]);
        }
        for j in 0..nr {
            mm.push(m[j]);
        }
        Ok((q, mm, name))
    };
    let mut cur_items = proof::remove_at(&lt.concl.items, lp)?;
    cur_items.extend(proof::remove_at(&rt.concl.items, rp)?);
    // absorption by the additive truth rule
    if matches!(lt.node, ProofNode::TopIntro { .. })
        || matches!(rt.node, ProofNode::TopIntro { .. })
    {
        let pos = cur_items
            .iter()
            .position(|it| eff(it) == Formula::Top)
            .ok_or_else(|| blocked("no surviving additive-true occurrence"))?;
        let q = mk_with_concl(
            ProofNode::TopIntro { pos },
            Sequent::new(locus.clone(), cur_items),
            env,
        )?;
        return Ok((q, idmap(nl + nr), "zero-top".to_string()));
    }
    // axiom cuts
    if matches!(lt.node, ProofNode::Ax { .. }) && lp.is_some() {
        let rpk = rp.ok_or_else(|| blocked("axiom cut against a virtual occurrence"))?;
        let mut m: Map = vec![Some(rpk)];
        for i in 0..nr {
            m.push(Some(un_rm(i, rp)));
        }
        return Ok((rt.clone(), m, "axiom".to_string()));
    }
    if matches!(rt.node, ProofNode::Ax { .. }) && rp.is_some() {
        let lpk = lp.ok_or_else(|| blocked("axiom cut against a virtual occurrence"))?;
        let mut m: Map = (0..nl).map(|i| Some(un_rm(i, lp))).collect();
        m.push(Some(lpk));
        return Ok((lt.clone(), m, "axiom".to_string()));
    }
    // a multiplicative unit against its (possibly virtual) dual
    if matches!(rt.node, ProofNode::OneIntro { .. }) && rp == Some(0) {
        let m: Map = (0..nl).map(|i| Some(un_rm(i, lp))).collect();
        return Ok((lt.clone(), m, "one-bot".to_string()));
    }
    if matches!(lt.node, ProofNode::OneIntro { .. }) && lp == Some(0) {
        let m: Map = (0..nr).map(|i| Some(un_rm(i, rp))).collect();
        return Ok((rt.clone(), m, "one-bot".to_string()));
    }
    let lprin = principal_at(lt, lp);
    let rprin = principal_at(rt, rp);
    if lprin && rprin {
        return match (&lt.node, &rt.node) {
            (ProofNode::TensorIntro { .. }, ProofNode::ParIntro { .. }) => {
                tensor_par(f, lp, rp, lt, rt, env)
            }
            (ProofNode::ParIntro { .. }, ProofNode::TensorIntro { .. }) => mirror(env),
            (
                ProofNode::PlusIntro1 { .. } | ProofNode::PlusIntro2 { .. },
                ProofNode::WithIntro { .. },
            ) => plus_with(lp, rp, lt, rt, env),
            (
                ProofNode::WithIntro { .. },
                ProofNode::PlusIntro1 { .. } | ProofNode::PlusIntro2 { .. },
            ) => mirror(env),
            (ProofNode::Promotion { .. }, ProofNode::Dereliction { .. }) => {
                prom_derel(lp, rp, lt, rt, env)
            }
            (ProofNode::Dereliction { .. }, ProofNode::Promotion { .. }) => mirror(env),
            (ProofNode::Promotion { .. }, ProofNode::Weakening { .. }) => {
                prom_weak(lp, rp, lt, rt, env)
            }
            (ProofNode::Weakening { .. }, ProofNode::Promotion { .. }) => mirror(env),
            (ProofNode::Promotion { .. }, ProofNode::Contraction { .. }) => {
                prom_contr(f, lp, rp, lt, rt, env)
            }
            (ProofNode::Contraction { .. }, ProofNode::Promotion { .. }) => mirror(env),
            _ => Err(blocked("principal pair outside the rewrite system")),
        };
    }
    if lprin
        && matches!(lt.node, ProofNode::Promotion { .. })
        && matches!(rt.node, ProofNode::Promotion { .. })
    {
        return prom_prom(f, lp, rp, lt, rt, locus, env);
    }
    if rprin
        && matches!(rt.node, ProofNode::Promotion { .. })
        && matches!(lt.node, ProofNode::Promotion { .. })
    {
        return mirror(env);
    }
    if !lprin && !is_leaf(lt) && !matches!(lt.node, ProofNode::Promotion { .. }) {
        return commute_left(f, lp, rp, lt, rt, locus, env);
    }
    if !rprin && !is_leaf(rt) && !matches!(rt.node, ProofNode::Promotion { .. }) {
        return mirror(env);
    }
    Err(blocked("no applicable reduction for this cut configuration"))
}

// ---------------------------------------------------------------------------
// Key cases
// ---------------------------------------------------------------------------

fn tensor_par(
    _f: &Formula,
    _lp: Option<usize>,
    _rp: Option<usize>,
    lt: &Proof,
    rt: &Proof,
    env: &VarEnv,
) -> Result<(Proof, Map, String), CutError> {
    let ProofNode::TensorIntro {
        p1,
        p2,
        left: a,
        right: b,
        ..
    } = &lt.node
    else {
        return Err(blocked("tensor-par case shape"));
    };
    let ProofNode::ParIntro {
        p1: q1,
        p2: q2,
        prem: q,
        ..
    } = &rt.node
    else {
        return Err(blocked("tensor-par case shape"));
    };
    let af = proof::eff_at(&a.concl.items, *p1)?;
    let bf = proof::eff_at(&b.concl.items, *p2)?;
    let na = a.concl.items.len() - usize::from(p1.is_some());
    let c1 = mk(
        ProofNode::Cut {
            formula: af,
            lpos: *p1,
            rpos: *q1,
            left: a.clone(),
            right: q.clone(),
        },
        env,
    )?;
    let q2p = q2.map(|y| na + rm_idx(y, *q1));
    let res = mk(
        ProofNode::Cut {
            formula: bf,
            lpos: *p2,
            rpos: q2p,
            left: b.clone(),
            right: Box::new(c1),
        },
        env,
    )?;
    let a_tags: Vec<Tag> = (0..a.concl.items.len())
        .filter(|x| Some(*x) != *p1)
        .map(|x| Tag(0, rm_idx(x, *p1)))
        .collect();
    let b_tags: Vec<Tag> = (0..b.concl.items.len())
        .filter(|x| Some(*x) != *p2)
        .map(|x| Tag(0, na + rm_idx(x, *p2)))
        .collect();
    let q_tags: Vec<Tag> = (0..q.concl.items.len())
        .filter(|y| Some(*y) != *q1 && Some(*y) != *q2)
        .map(|y| {
            let fy = y
                - usize::from(q1.is_some_and(|r| r < y))
                - usize::from(q2.is_some_and(|r| r < y));
            Tag(1, fy)
        })
        .collect();
    let mut old = a_tags.clone();
    old.extend(b_tags.iter().copied());
    old.extend(q_tags.iter().copied());
    let mut new = b_tags;
    new.extend(a_tags);
    new.extend(q_tags);
    Ok((res, map_from_tags(&old, &new), "tensor-par".to_string()))
}

fn plus_with(
    _lp: Option<usize>,
    rp: Option<usize>,
    lt: &Proof,
    rt: &Proof,
    env: &VarEnv,
) -> Result<(Proof, Map, String), CutError> {
    let (first, ppos, q1) = match &lt.node {
        ProofNode::PlusIntro1 { ppos, prem, .. } => (true, ppos, prem),
        ProofNode::PlusIntro2 { ppos, prem, .. } => (false, ppos, prem),
        _ => return Err(blocked("plus-with case shape")),
    };
    let ProofNode::WithIntro {
        i,
        j,
        lpos,
        rpos,
        left,
        right,
        ..
    } = &rt.node
    else {
        return Err(blocked("plus-with case shape"));
    };
    let (inj, branch, cpos) = if first { (i, left, lpos) } else { (j, right, rpos) };
    let iv = inj.invert()?;
    let bcb = bcnode(&iv, branch, env)?;
    let rrem = proof::remove_at(&rt.concl.items, rp)?;
    let (stepped, matched) = fix_context_steps(
        &bcb,
        *cpos,
        &rrem,
        |re| base_change(&iv, re),
        inj,
        |c| chain_sub(&[iv.clone(), inj.clone()], &[], inj.cod(), c),
        env,
    )?;
    let f2 = proof::eff_at(&q1.concl.items, *ppos)?;
    let res = mk(
        ProofNode::Cut {
            formula: f2,
            lpos: *ppos,
            rpos: *cpos,
            left: q1.clone(),
            right: Box::new(stepped),
        },
        env,
    )?;
    let nq = q1.concl.items.len() - usize::from(ppos.is_some());
    let mut m: Map = (0..nq).map(Some).collect();
    for t in &matched {
        m.push(t.map(|t0| nq + rm_idx(t0, *cpos)));
    }
    Ok((res, m, "plus-with".to_string()))
}

fn prom_derel(
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &Proof,
    rt: &Proof,
    env: &VarEnv,
) -> Result<(Proof, Map, String), CutError> {
    let ProofNode::Promotion {
        v,
        prem_pos: ppp,
        prem: q1,
        ..
    } = &lt.node
    else {
        return Err(blocked("promotion-dereliction case shape"));
    };
    let ProofNode::Dereliction {
        f: fd,
        pos: dpos,
        prem: q2,
        ..
    } = &rt.node
    else {
        return Err(blocked("promotion-dereliction case shape"));
    };
    let lrem = proof::remove_at(&lt.concl.items, lp)?;
    let bcq = bcnode(fd, q1, env)?;
    let (stepped, matched) = fix_context_steps(
        &bcq,
        *ppp,
        &lrem,
        |re| base_change(fd, re),
        v,
        |c| chain_sub(&[fd.clone(), v.clone()], &[], v.cod(), c),
        env,
    )?;
    let f2 = proof::eff_at(&stepped.concl.items, *ppp)?;
    let ns = stepped.concl.items.len() - usize::from(ppp.is_some());
    let res = mk(
        ProofNode::Cut {
            formula: f2,
            lpos: *ppp,
            rpos: *dpos,
            left: Box::new(stepped),
            right: q2.clone(),
        },
        env,
    )?;
    let nr = rt.concl.items.len() - usize::from(rp.is_some());
    let mut m: Map = matched
        .iter()
        .map(|t| t.map(|t0| rm_idx(t0, *ppp)))
        .collect();
    m.extend((0..nr).map(|k| Some(ns + k)));
    Ok((res, m, "promotion-dereliction".to_string()))
}

fn prom_weak(
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &Proof,
    rt: &Proof,
    env: &VarEnv,
) -> Result<(Proof, Map, String), CutError> {
    let ProofNode::Weakening { prem: q2, .. } = &rt.node else {
        return Err(blocked("promotion-weakening case shape"));
    };
    let lrem = proof::remove_at(&lt.concl.items, lp)?;
    let mut acc = (**q2).clone();
    let mut rank = 0usize;
    let mut m: Map = Vec::new();
    for it in &lrem {
        let e = eff(it);
        if e == Formula::Bot {
            m.push(None);
            continue;
        }
        let Formula::Quest(uk, bk) = e else {
            return Err(blocked("promotion context occurrence is not a why-not"));
        };
        acc = mk(
            ProofNode::Weakening {
                u: uk,
                body: *bk,
                out: (rank, it.0),
                prem: Box::new(acc),
            },
            env,
        )?;
        m.push(Some(rank));
        rank += 1;
    }
    let nr = rt.concl.items.len() - usize::from(rp.is_some());
    m.extend((0..nr).map(|k| Some(rank + k)));
    Ok((acc, m, "promotion-weakening".to_string()))
}

fn prom_contr(
    f: &Formula,
    lp: Option<usize>,
    _rp: Option<usize>,
    lt: &Proof,
    rt: &Proof,
    env: &VarEnv,
) -> Result<(Proof, Map, String), CutError> {
    let ProofNode::Contraction {
        keep,
        drop,
        prem: q2,
    } = &rt.node
    else {
        return Err(blocked("promotion-contraction case shape"));
    };
    let c1 = mk(
        ProofNode::Cut {
            formula: f.clone(),
            lpos: lp,
            rpos: Some(*drop),
            left: Box::new(lt.clone()),
            right: q2.clone(),
        },
        env,
    )?;
    let nl = lt.concl.items.len() - usize::from(lp.is_some());
    let keep1 = nl + rm_idx(*keep, Some(*drop));
    let mut acc = mk(
        ProofNode::Cut {
            formula: f.clone(),
            lpos: lp,
            rpos: Some(keep1),
            left: Box::new(lt.clone()),
            right: Box::new(c1),
        },
        env,
    )?;
    let lrem = proof::remove_at(&lt.concl.items, lp)?;
    let rest = q2.concl.items.len() - 2;
    // second copy of the promotion context, first copy, remaining context
    let mut live: Vec<Tag> = (0..nl)
        .map(|x| Tag(0, x))
        .chain((0..nl).map(|x| Tag(2, x)))
        .chain((0..rest).map(|k| Tag(1, k)))
        .collect();
    for (x, it) in lrem.iter().enumerate() {
        if eff(it) == Formula::Bot {
            continue;
        }
        let kp = live
            .iter()
            .position(|t| *t == Tag(0, x))
            .ok_or_else(|| blocked("duplicated occurrence lost"))?;
        let dp = live
            .iter()
            .position(|t| *t == Tag(2, x))
            .ok_or_else(|| blocked("duplicated occurrence lost"))?;
        acc = mk(
            ProofNode::Contraction {
                keep: kp,
                drop: dp,
                prem: Box::new(acc),
            },
            env,
        )?;
        live.remove(dp);
    }
    let old: Vec<Tag> = (0..nl)
        .map(|x| Tag(0, x))
        .chain((0..rest).map(|k| Tag(1, k)))
        .collect();
    Ok((acc, map_from_tags(&old, &live), "promotion-contraction".to_string()))
}

fn prom_prom(
    f: &Formula,
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &Proof,
    rt: &Proof,
    locus: &crate::setfun::Locus,
    env: &VarEnv,
) -> Result<(Proof, Map, String), CutError> {
    let ProofNode::Promotion {
        v: v2,
        out: out2,
        prem_pos: pp2,
        prem: q2,
    } = &rt.node
    else {
        return Err(blocked("promotion-promotion case shape"));
    };
    let rpk = rp.ok_or_else(|| blocked("re-indexed bang occurrence is virtual"))?;
    let target = base_change(v2, &f.negate())?;
    let cand = un_rm(rm_idx(rpk, Some(out2.0)), *pp2);
    let r2 = if Some(cand) != *pp2 && q2.concl.items.get(cand).map(eff) == Some(target.clone()) {
        cand
    } else {
        q2.concl
            .items
            .iter()
            .enumerate()
            .position(|(k, it)| Some(k) != *pp2 && eff(it) == target)
            .ok_or_else(|| blocked("re-indexed cut occurrence not found under the promotion"))?
    };
    let inner_l = bcnode(v2, lt, env)?;
    let inner = mk(
        ProofNode::Cut {
            formula: base_change(v2, f)?,
            lpos: lp,
            rpos: Some(r2),
            left: Box::new(inner_l),
            right: q2.clone(),
        },
        env,
    )?;
    let nl = lt.concl.items.len() - usize::from(lp.is_some());
    let mut cur = proof::remove_at(&lt.concl.items, lp)?;
    cur.extend(proof::remove_at(&rt.concl.items, rp)?);
    let n = cur.len();
    let new_out = (nl + rm_idx(out2.0, rp), out2.1);
    let ppn = pp2.map(|x| nl + rm_idx(x, Some(r2)));
    let res = mk_with_concl(
        ProofNode::Promotion {
            v: v2.clone(),
            out: new_out,
            prem_pos: ppn,
            prem: Box::new(inner),
        },
        Sequent::new(locus.clone(), cur),
        env,
    )?;
    Ok((res, idmap(n), "promotion-promotion".to_string()))
}

// ---------------------------------------------------------------------------
// Commutation: the cut is routed into the premise of the left root rule
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn commute_left(
    f: &Formula,
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &Proof,
    rt: &Proof,
    locus: &crate::setfun::Locus,
    env: &VarEnv,
) -> Result<(Proof, Map, String), CutError> {
    let nl = lt.concl.items.len() - usize::from(lp.is_some());
    let nr = rt.concl.items.len() - usize::from(rp.is_some());
    let old: Vec<Tag> = (0..nl)
        .map(|x| Tag(0, x))
        .chain((0..nr).map(|k| Tag(1, k)))
        .collect();
    match &lt.node {
        ProofNode::Cut {
            formula: g,
            lpos: gl,
            rpos: gr,
            left: a,
            right: b,
        } => {
            let lena = a.concl.items.len() - usize::from(gl.is_some());
            let mut new = Vec::new();
            let res = if lp.is_some_and(|k| k < lena) {
                let orig = lp.map(|k| un_rm(k, *gl));
                let inner = mk(
                    ProofNode::Cut {
                        formula: f.clone(),
                        lpos: orig,
                        rpos: rp,
                        left: a.clone(),
                        right: Box::new(rt.clone()),
                    },
                    env,
                )?;
                let gl2 = gl.map(|x| rm_idx(x, orig));
                for x in 0..a.concl.items.len() {
                    if Some(x) != orig && Some(x) != *gl {
                        new.push(Tag(0, rm_idx(rm_idx(x, *gl), lp)));
                    }
                }
                new.extend((0..nr).map(|k| Tag(1, k)));
                for y in 0..b.concl.items.len() {
                    if Some(y) != *gr {
                        new.push(Tag(0, rm_idx(lena + rm_idx(y, *gr), lp)));
                    }
                }
                mk(
                    ProofNode::Cut {
                        formula: g.clone(),
                        lpos: gl2,
                        rpos: *gr,
                        left: Box::new(inner),
                        right: b.clone(),
                    },
                    env,
                )?
            } else {
                let orig = lp.map(|k| un_rm(k - lena, *gr));
                let inner = mk(
                    ProofNode::Cut {
                        formula: f.clone(),
                        lpos: orig,
                        rpos: rp,
                        left: b.clone(),
                        right: Box::new(rt.clone()),
                    },
                    env,
                )?;
                let gr2 = gr.map(|x| rm_idx(x, orig));
                for x in 0..a.concl.items.len() {
                    if Some(x) != *gl {
                        new.push(Tag(0, rm_idx(rm_idx(x, *gl), lp)));
                    }
                }
                for y in 0..b.concl.items.len() {
                    if Some(y) != orig && Some(y) != *gr {
                        new.push(Tag(0, rm_idx(lena + rm_idx(y, *gr), lp)));
                    }
                }
                new.extend((0..nr).map(|k| Tag(1, k)));
                mk(
                    ProofNode::Cut {
                        formula: g.clone(),
                        lpos: *gl,
                        rpos: gr2,
                        left: a.clone(),
                        right: Box::new(inner),
                    },
                    env,
                )?
            };
            Ok((res, map_from_tags(&old, &new), "commute-cut".to_string()))
        }
        ProofNode::TensorIntro {
            p1,
            p2,
            out_side,
            left: a,
            right: b,
        } => {
            let lena = a.concl.items.len() - usize::from(p1.is_some());
            let prin_tag = Tag(0, rm_idx(lt.concl.items.len() - 1, lp));
            let mut new = Vec::new();
            let res = if lp.is_some_and(|k| k < lena) {
                let orig = lp.map(|k| un_rm(k, *p1));
                let inner = mk(
                    ProofNode::Cut {
                        formula: f.clone(),
                        lpos: orig,
                        rpos: rp,
                        left: a.clone(),
                        right: Box::new(rt.clone()),
                    },
                    env,
                )?;
                for x in 0..a.concl.items.len() {
                    if Some(x) != orig && Some(x) != *p1 {
                        new.push(Tag(0, rm_idx(rm_idx(x, *p1), lp)));
                    }
                }
                new.extend((0..nr).map(|k| Tag(1, k)));
                for y in 0..b.concl.items.len() {
                    if Some(y) != *p2 {
                        new.push(Tag(0, rm_idx(lena + rm_idx(y, *p2), lp)));
                    }
                }
                new.push(prin_tag);
                mk(
                    ProofNode::TensorIntro {
                        p1: p1.map(|x| rm_idx(x, orig)),
                        p2: *p2,
                        out_side: *out_side,
                        left: Box::new(inner),
                        right: b.clone(),
                    },
                    env,
                )?
            } else {
                let orig = lp.map(|k| un_rm(k - lena, *p2));
                let inner = mk(
                    ProofNode::Cut {
                        formula: f.clone(),
                        lpos: orig,
                        rpos: rp,
                        left: b.clone(),
                        right: Box::new(rt.clone()),
                    },
                    env,
                )?;
                for x in 0..a.concl.items.len() {
                    if Some(x) != *p1 {
                        new.push(Tag(0, rm_idx(rm_idx(x, *p1), lp)));
                    }
                }
                for y in 0..b.concl.items.len() {
                    if Some(y) != orig && Some(y) != *p2 {
                        new.push(Tag(0, rm_idx(lena + rm_idx(y, *p2), lp)));
                    }
                }
                new.extend((0..nr).map(|k| Tag(1, k)));
                new.push(prin_tag);
                mk(
                    ProofNode::TensorIntro {
                        p1: *p1,
                        p2: p2.map(|x| rm_idx(x, orig)),
                        out_side: *out_side,
                        left: a.clone(),
                        right: Box::new(inner),
                    },
                    env,
                )?
            };
            Ok((res, map_from_tags(&old, &new), "commute-tensor".to_string()))
        }
        ProofNode::ParIntro { p1, p2, out, prem } => {
            let orig = lp.map(|k| {
                let mut o = un_ins(k, out.0).expect("non-principal occurrence");
                let mut removed: Vec<usize> = [*p1, *p2].iter().flatten().copied().collect();
                removed.sort_unstable();
                for r in removed {
                    if r <= o {
                        o += 1;
                    }
                }
                o
            });
            let inner = mk(
                ProofNode::Cut {
                    formula: f.clone(),
                    lpos: orig,
                    rpos: rp,
                    left: prem.clone(),
                    right: Box::new(rt.clone()),
                },
                env,
            )?;
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let res = mk(
                ProofNode::ParIntro {
                    p1: p1.map(|x| rm_idx(x, orig)),
                    p2: p2.map(|x| rm_idx(x, orig)),
                    out: (out0, out.1),
                    prem: Box::new(inner),
                },
                env,
            )?;
            Ok((res, idmap(nl + nr), "commute-par".to_string()))
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
            let first = matches!(lt.node, ProofNode::PlusIntro1 { .. });
            let orig = lp.map(|k| un_rm(un_ins(k, out.0).expect("non-principal"), *ppos));
            let inner = mk(
                ProofNode::Cut {
                    formula: f.clone(),
                    lpos: orig,
                    rpos: rp,
                    left: prem.clone(),
                    right: Box::new(rt.clone()),
                },
                env,
            )?;
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let pposn = ppos.map(|x| rm_idx(x, orig));
            let node = if first {
                ProofNode::PlusIntro1 {
                    principal: principal.clone(),
                    out: (out0, out.1),
                    ppos: pposn,
                    prem: Box::new(inner),
                }
            } else {
                ProofNode::PlusIntro2 {
                    principal: principal.clone(),
                    out: (out0, out.1),
                    ppos: pposn,
                    prem: Box::new(inner),
                }
            };
            Ok((mk(node, env)?, idmap(nl + nr), "commute-plus".to_string()))
        }
        ProofNode::Contraction { keep, drop, prem } => {
            let orig = lp.map(|k| un_rm(k, Some(*drop)));
            let inner = mk(
                ProofNode::Cut {
                    formula: f.clone(),
                    lpos: orig,
                    rpos: rp,
                    left: prem.clone(),
                    right: Box::new(rt.clone()),
                },
                env,
            )?;
            let res = mk(
                ProofNode::Contraction {
                    keep: rm_idx(*keep, orig),
                    drop: rm_idx(*drop, orig),
                    prem: Box::new(inner),
                },
                env,
            )?;
            Ok((res, idmap(nl + nr), "commute-contraction".to_string()))
        }
        ProofNode::Dereliction {
            f: fd,
            u,
            body,
            pos,
            out,
            prem,
        } => {
            let orig = lp.map(|k| un_rm(un_ins(k, out.0).expect("non-principal"), *pos));
            let inner = mk(
                ProofNode::Cut {
                    formula: f.clone(),
                    lpos: orig,
                    rpos: rp,
                    left: prem.clone(),
                    right: Box::new(rt.clone()),
                },
                env,
            )?;
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let res = mk(
                ProofNode::Dereliction {
                    f: fd.clone(),
                    u: u.clone(),
                    body: body.clone(),
                    pos: pos.map(|x| rm_idx(x, orig)),
                    out: (out0, out.1),
                    prem: Box::new(inner),
                },
                env,
            )?;
            Ok((res, idmap(nl + nr), "commute-dereliction".to_string()))
        }
        ProofNode::Weakening { u, body, out, prem } => {
            let orig = lp.map(|k| un_ins(k, out.0).expect("non-principal"));
            let inner = mk(
                ProofNode::Cut {
                    formula: f.clone(),
                    lpos: orig,
                    rpos: rp,
                    left: prem.clone(),
                    right: Box::new(rt.clone()),
                },
                env,
            )?;
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let res = mk(
                ProofNode::Weakening {
                    u: u.clone(),
                    body: body.clone(),
                    out: (out0, out.1),
                    prem: Box::new(inner),
                },
                env,
            )?;
            Ok((res, idmap(nl + nr), "commute-weakening".to_string()))
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
            let kk = lp.map(|k| un_ins(k, out.0).expect("non-principal"));
            let mut inners = Vec::new();
            let mut cposns = Vec::new();
            for (inj, branch, cpos) in [(i, left, lpos), (j, right, rpos)] {
                let s = if *f == Formula::Bot {
                    None
                } else {
                    let want = base_change(inj, f)?;
                    let cand = kk.map(|k0| un_rm(k0, *cpos));
                    let hit = cand.filter(|c| {
                        Some(*c) != *cpos && branch.concl.items.get(*c).map(eff) == Some(want.clone())
                    });
                    match hit {
                        Some(c) => Some(c),
                        None => Some(
                            branch
                                .concl
                                .items
                                .iter()
                                .enumerate()
                                .position(|(k, it)| Some(k) != *cpos && eff(it) == want)
                                .ok_or_else(|| {
                                    blocked("cut occurrence not found in the product branch")
                                })?,
                        ),
                    }
                };
                let rtb = bcnode(inj, rt, env)?;
                let inner = mk(
                    ProofNode::Cut {
                        formula: base_change(inj, f)?,
                        lpos: s,
                        rpos: rp,
                        left: branch.clone(),
                        right: Box::new(rtb),
                    },
                    env,
                )?;
                cposns.push(cpos.map(|x| rm_idx(x, s)));
                inners.push(inner);
            }
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let mut cur = proof::remove_at(&lt.concl.items, lp)?;
            cur.extend(proof::remove_at(&rt.concl.items, rp)?);
            let right_b = inners.pop().expect("two branches");
            let left_b = inners.pop().expect("two branches");
            let res = mk_with_concl(
                ProofNode::WithIntro {
                    i: i.clone(),
                    j: j.clone(),
                    out: (out0, out.1),
                    lpos: cposns[0],
                    rpos: cposns[1],
                    left: Box::new(left_b),
                    right: Box::new(right_b),
                },
                Sequent::new(locus.clone(), cur),
                env,
            )?;
            Ok((res, idmap(nl + nr), "commute-with".to_string()))
        }
        _ => Err(blocked("commutation not available at this root rule")),
    }
}

// ---------------------------------------------------------------------------
// Public reduction operations
// ---------------------------------------------------------------------------

type StepLog = Vec<(Vec<usize>, String)>;

/// Reduce the cuts addressed by `targets` (paths relative to `p`),
/// innermost first, rebuilding each ancestor along the position maps.
fn reduce_rec(
    p: &Proof,
    targets: &[Vec<usize>],
    env: &VarEnv,
) -> Result<(Proof, Map, StepLog), CutError> {
    let mut cur = p.clone();
    let mut m = idmap(p.concl.items.len());
    let mut log: StepLog = Vec::new();
    let mut by_child: std::collections::BTreeMap<usize, Vec<Vec<usize>>> =
        std::collections::BTreeMap::new();
    let mut root_here = false;
    for t in targets {
        match t.split_first() {
            None => root_here = true,
            Some((k, rest)) => by_child.entry(*k).or_default().push(rest.to_vec()),
        }
    }
    for (k, subs) in by_child {
        let prem = child(&cur, k).ok_or(CutError::NotACut)?.clone();
        let (np, mp, sublog) = reduce_rec(&prem, &subs, env)?;
        let (nc, mm) = rebuild_one(&cur, k, np, &mp, env)?;
        cur = nc;
        m = compose_maps(&m, &mm);
        log.extend(
            sublog
                .into_iter()
                .map(|(path, name)| (std::iter::once(k).chain(path).collect(), name)),
        );
    }
    if root_here {
        let (nc, mm, name) = reduce_cut_node(&cur, env)?;
        cur = nc;
        m = compose_maps(&m, &mm);
        log.push((Vec::new(), name));
    }
    Ok((cur, m, log))
}

fn cut_at<'a>(p: &'a Proof, path: &[usize]) -> Result<&'a Proof, CutError> {
    let mut cur = p;
    for &k in path {
        cur = child(cur, k).ok_or(CutError::NotACut)?;
    }
    if matches!(cur.node, ProofNode::Cut { .. }) {
        Ok(cur)
    } else {
        Err(CutError::NotACut)
    }
}

/// One reduction step at the addressed cut. The result concludes the same
/// judgement as `p` up to inert-unit occurrences and their order.
pub fn reduce_at(p: &Proof, c: &CutId, env: &VarEnv) -> Result<Proof, CutError> {
    cut_at(p, &c.path)?;
    let (q, _, _) = reduce_rec(p, std::slice::from_ref(&c.path), env)?;
    Ok(q)
}

/// Simultaneously reduce a set of cuts, innermost first.
pub fn parallel_reduce(p: &Proof, cs: &[CutId], env: &VarEnv) -> Result<Proof, CutError> {
    if cs.is_empty() {
        return Ok(p.clone());
    }
    let mut paths: Vec<Vec<usize>> = cs.iter().map(|c| c.path.clone()).collect();
    paths.sort();
    paths.dedup();
    for path in &paths {
        cut_at(p, path)?;
    }
    let (q, _, _) = reduce_rec(p, &paths, env)?;
    Ok(q)
}

/// Repeatedly reduce until no cut remains, following `strategy`, with at
/// most `budget` steps.
pub fn normalize(
    p: &Proof,
    env: &VarEnv,
    strategy: Strategy,
    budget: usize,
) -> Result<(Proof, ReductionTrace), CutError> {
    let initial = p.clone();
    let mut cur = p.clone();
    let mut steps = Vec::new();
    loop {
        let cuts = list_cuts(&cur);
        let Some(target) = (match strategy {
            Strategy::Uppermost => cuts
                .iter()
                .max_by(|a, b| a.path.len().cmp(&b.path.len()).then(b.path.cmp(&a.path))),
            Strategy::Lowermost => cuts
                .iter()
                .min_by(|a, b| a.path.len().cmp(&b.path.len()).then(a.path.cmp(&b.path))),
        })
        .cloned() else {
            break;
        };
        if steps.len() >= budget {
            return Err(CutError::StepBudgetExceeded);
        }
        let (q, _, log) = reduce_rec(&cur, std::slice::from_ref(&target.path), env)?;
        let name = log
            .into_iter()
            .next()
            .map(|(_, n)| n)
            .unwrap_or_default();
        steps.push((target, name));
        cur = q;
    }
    let result = cur.clone();
    Ok((cur, ReductionTrace { steps, initial, result }))
}

// ---------------------------------------------------------------------------
// Value normal form and derivation equivalence
// ---------------------------------------------------------------------------

fn vnf_children(node: &ProofNode, env: &VarEnv) -> Result<ProofNode, CutError> {
    let mut n2 = node.clone();
    match &mut n2 {
        ProofNode::Cut { left, right, .. }
        | ProofNode::TensorIntro { left, right, .. }
        | ProofNode::WithIntro { left, right, .. } => {
            **left = vnf(left, env)?;
            **right = vnf(right, env)?;
        }
        ProofNode::ParIntro { prem, .. }
        | ProofNode::PlusIntro1 { prem, .. }
        | ProofNode::PlusIntro2 { prem, .. }
        | ProofNode::Contraction { prem, .. }
        | ProofNode::Dereliction { prem, .. }
        | ProofNode::Weakening { prem, .. }
        | ProofNode::Promotion { prem, .. }
        | ProofNode::SubtypeStep { prem, .. }
        | ProofNode::BaseChangeStep { prem, .. } => {
            **prem = vnf(prem, env)?;
        }
        _ => {}
    }
    Ok(n2)
}

/// Normal form for comparing derivations modulo the choice of rewriting
/// witnesses: trivial rewrites are removed, stacked rewrites at the same
/// occurrence are fused, each witness is replaced by the canonical one the
/// decision procedure returns, and a rewrite feeding the cut occurrence
/// from the left is moved to the right premise. The conclusion is
/// preserved exactly.
pub fn vnf(p: &Proof, env: &VarEnv) -> Result<Proof, CutError> {
    let node2 = vnf_children(&p.node, env)?;
    let mut cur = match &node2 {
        ProofNode::TopIntro { .. }
        | ProofNode::WithIntro { .. }
        | ProofNode::Promotion { .. } => mk_with_concl(node2, p.concl.clone(), env)?,
        _ => mk(node2, env)?,
    };
    loop {
        let next: Option<Proof> = match &cur.node {
            ProofNode::SubtypeStep { pos, rho, prem } => {
                let pos = *pos;
                let side = cur.concl.items[pos].0;
                let sig = eff_rho(side, rho)?;
                if sig.lhs == sig.rhs {
                    Some((**prem).clone())
                } else if let Some(canon) =
                    decide_subtype(&prem.concl.locus, &rho.lhs, &rho.rhs, 20_000)
                        .ok()
                        .flatten()
                        .filter(|c| c != rho)
                {
                    Some(mk(
                        ProofNode::SubtypeStep {
                            pos,
                            rho: canon,
                            prem: prem.clone(),
                        },
                        env,
                    )?)
                } else if let ProofNode::SubtypeStep {
                    pos: pos2,
                    rho: rho2,
                    prem: prem2,
                } = &prem.node
                {
                    if *pos2 == pos {
                        let sig_inner = eff_rho(side, rho2)?;
                        let fused = trans(&sig_inner, &sig)?;
                        Some(apply_step(prem2, pos, &fused, env)?)
                    } else {
                        None
                    }
                } else {
                    None
                }
            }
            ProofNode::Cut {
                lpos: Some(lk),
                rpos,
                left,
                right,
                ..
            } => {
                if let ProofNode::SubtypeStep { pos: spos, rho, prem } = &left.node {
                    if *spos == *lk && rpos.is_some() {
                        let rpk = rpos.expect("checked");
                        let side = left.concl.items[*lk].0;
                        let sig = eff_rho(side, rho)?;
                        let moved = apply_step(right, rpk, &negate_sub(&sig)?, env)?;
                        let new_right = vnf(&moved, env)?;
                        Some(mk(
                            ProofNode::Cut {
                                formula: sig.lhs.clone(),
                                lpos: Some(*lk),
                                rpos: *rpos,
                                left: prem.clone(),
                                right: Box::new(new_right),
                            },
                            env,
                        )?)
                    } else {
                        None
                    }
                } else {
                    None
                }
            }
            _ => None,
        };
        match next {
            Some(n) => cur = n,
            None => break,
        }
    }
    Ok(cur)
}

/// Whether two proofs of the same judgement have the same normal form for
/// the purposes of witness-irrelevant comparison.
pub fn equiv(p1: &Proof, p2: &Proof, env: &VarEnv) -> Result<bool, CutError> {
    if !p1.concl.same_judgement(&p2.concl) {
        return Err(CutError::SequentMismatch);
    }
    Ok(vnf(p1, env)? == vnf(p2, env)?)
}

// ---------------------------------------------------------------------------
// Erased mirror: the same reduction on plain proofs
// ---------------------------------------------------------------------------
//
// The functions below perform, on erased proofs, exactly the structural
// choices the indexed reducer makes: same dispatch order, same position
// arithmetic, same routing and nesting of the generated cuts. Witness
// bookkeeping (re-indexings and rewrites) has no erased counterpart, so the
// corresponding nodes simply do not appear. Context matching compares
// erased formulae where the indexed reducer compares indexed ones; the two
// can in principle pick different representatives among occurrences that
// only differ in their annotations, in which case the erasure of an indexed
// reduct may differ from the erased reduct by a permutation of such
// occurrences.

use crate::formula::LLFormula;
use crate::llproof::{self, ll_mk, ll_premises, LLNode, LLProof};

fn eff_ll_it(it: &crate::llproof::LLItem) -> LLFormula {
    crate::llproof::eff_ll(it)
}

/// All cut nodes of an erased proof, in deterministic preorder.
pub fn ll_list_cuts(p: &LLProof) -> Vec<CutId> {
    let mut out = Vec::new();
    ll_collect_cuts(p, &mut Vec::new(), &mut out);
    out
}

fn ll_collect_cuts(p: &LLProof, path: &mut Vec<usize>, out: &mut Vec<CutId>) {
    if matches!(p.node, LLNode::Cut { .. }) {
        out.push(CutId::new(path.clone()));
    }
    for (k, prem) in ll_premises(&p.node).into_iter().enumerate() {
        path.push(k);
        ll_collect_cuts(prem, path, out);
        path.pop();
    }
}

fn ll_child(p: &LLProof, k: usize) -> Option<&LLProof> {
    ll_premises(&p.node).into_iter().nth(k)
}

/// Translate a cut address so it is valid in the erasure of `p`:
/// administrative nodes disappear, and with them their path segments.
pub fn erase_cut_path(p: &Proof, c: &CutId) -> CutId {
    let mut out = Vec::new();
    let mut cur = p;
    for &k in &c.path {
        if !matches!(
            cur.node,
            ProofNode::SubtypeStep { .. } | ProofNode::BaseChangeStep { .. }
        ) {
            out.push(k);
        }
        cur = match proof::premises(&cur.node).into_iter().nth(k) {
            Some(q) => q,
            None => return CutId::new(out),
        };
    }
    CutId::new(out)
}

fn ll_principal_at(p: &LLProof, pos: Option<usize>) -> bool {
    let Some(k) = pos else { return false };
    match &p.node {
        LLNode::Ax { .. } => true,
        LLNode::OneIntro => k == 0,
        LLNode::TopIntro { pos } => k == *pos,
        LLNode::TensorIntro { .. } => k == p.items.len() - 1,
        LLNode::ParIntro { out, .. }
        | LLNode::PlusIntro1 { out, .. }
        | LLNode::PlusIntro2 { out, .. }
        | LLNode::WithIntro { out, .. }
        | LLNode::Dereliction { out, .. }
        | LLNode::Weakening { out, .. }
        | LLNode::Promotion { out, .. } => k == out.0,
        LLNode::Contraction { keep, drop, .. } => k == rm_idx(*keep, Some(*drop)),
        LLNode::Cut { .. } => false,
    }
}

fn ll_is_leaf(p: &LLProof) -> bool {
    matches!(
        p.node,
        LLNode::Ax { .. } | LLNode::OneIntro | LLNode::TopIntro { .. }
    )
}

/// The erased counterpart of the context matching the indexed reducer
/// performs: positional candidate first, then first occurrence with the
/// same erased value; unmatched premise occurrences must be inert units.
fn ll_ctx_match(
    prem: &LLProof,
    skip: Option<usize>,
    ctx: &[crate::llproof::LLItem],
) -> Result<Vec<Option<usize>>, CutError> {
    let mut available: Vec<Option<LLFormula>> = ctx.iter().map(|it| Some(eff_ll_it(it))).collect();
    let mut matched: Vec<Option<usize>> = vec![None; ctx.len()];
    for idx in (0..prem.items.len()).filter(|x| Some(*x) != skip) {
        let here = eff_ll_it(&prem.items[idx]);
        let guess = matched.iter().filter(|m| m.is_some()).count();
        let order: Vec<usize> = std::iter::once(guess)
            .chain((0..available.len()).filter(|c| *c != guess))
            .filter(|c| *c < available.len())
            .collect();
        let mut found = None;
        for ci in order {
            if let Some(c) = &available[ci] {
                if *c == here {
                    found = Some(ci);
                    break;
                }
            }
        }
        let Some(ci) = found else {
            if here == LLFormula::Bot {
                continue;
            }
            return Err(blocked("re-indexed context occurrence not matched"));
        };
        available[ci] = None;
        matched[ci] = Some(idx);
    }
    for (ci, m) in matched.iter().enumerate() {
        if m.is_none() && eff_ll_it(&ctx[ci]) != LLFormula::Bot {
            return Err(blocked("conclusion context occurrence not matched"));
        }
    }
    Ok(matched)
}

/// σ of a context-re-indexing rule whose premise changed along `m`, with
/// the same arithmetic as the indexed realignment.
#[allow(clippy::too_many_arguments)]
fn ll_realign_sigma(
    old_len: usize,
    out0: usize,
    old_prem_len: usize,
    old_ppos: Option<usize>,
    new_prem_len: usize,
    new_ppos: Option<usize>,
    m: &Map,
) -> Result<Map, CutError> {
    let new_ctx_len = new_prem_len - usize::from(new_ppos.is_some());
    if is_ident(m) && m.len() == old_prem_len && new_prem_len == old_prem_len && old_ppos == new_ppos
    {
        return Ok(idmap(old_len));
    }
    let n_old = old_len - 1;
    if old_prem_len - usize::from(old_ppos.is_some()) != n_old {
        return Err(blocked(
            "cached context is not positionally aligned with its premise",
        ));
    }
    let mut sigma: Map = vec![None; old_len];
    for t in 0..n_old {
        let u = t + usize::from(out0 <= t);
        if let Some(q) = remap(m, Some(un_rm(t, old_ppos))) {
            sigma[u] = Some(rm_idx(q, new_ppos));
        }
    }
    let new_out0 = out0.min(new_ctx_len);
    for v in sigma.iter_mut().flatten() {
        if new_out0 <= *v {
            *v += 1;
        }
    }
    sigma[out0] = Some(new_out0);
    Ok(sigma)
}

/// Erased counterpart of the ancestor rebuilding along a position map.
fn ll_rebuild_one(p: &LLProof, ci: usize, nc: LLProof, m: &Map) -> Result<(LLProof, Map), CutError> {
    match &p.node {
        LLNode::Cut {
            formula,
            lpos,
            rpos,
            left,
            right,
        } => {
            let (lp2, rp2, nl, nr) = if ci == 0 {
                (remap(m, *lpos), *rpos, nc.clone(), (**right).clone())
            } else {
                (*lpos, remap(m, *rpos), (**left).clone(), nc.clone())
            };
            let old_l = left.items.len() - usize::from(lpos.is_some());
            let old_r = right.items.len() - usize::from(rpos.is_some());
            let new_l = nl.items.len() - usize::from(lp2.is_some());
            let mut sigma: Map = Vec::new();
            for i in 0..old_l {
                sigma.push(if ci == 0 {
                    remap(m, Some(un_rm(i, *lpos))).map(|j| rm_idx(j, lp2))
                } else {
                    Some(i)
                });
            }
            for i in 0..old_r {
                sigma.push(if ci == 1 {
                    remap(m, Some(un_rm(i, *rpos))).map(|j| new_l + rm_idx(j, rp2))
                } else {
                    Some(new_l + i)
                });
            }
            let q = ll_mk(LLNode::Cut {
                formula: formula.clone(),
                lpos: lp2,
                rpos: rp2,
                left: Box::new(nl),
                right: Box::new(nr),
            })?;
            Ok((q, sigma))
        }
        LLNode::TensorIntro {
            p1,
            p2,
            out_side,
            left,
            right,
        } => {
            let (p1n, p2n, nl, nr) = if ci == 0 {
                (remap(m, *p1), *p2, nc.clone(), (**right).clone())
            } else {
                (*p1, remap(m, *p2), (**left).clone(), nc.clone())
            };
            let old_l = left.items.len() - usize::from(p1.is_some());
            let old_r = right.items.len() - usize::from(p2.is_some());
            let new_l = nl.items.len() - usize::from(p1n.is_some());
            let new_r = nr.items.len() - usize::from(p2n.is_some());
            let mut sigma: Map = Vec::new();
            for i in 0..old_l {
                sigma.push(if ci == 0 {
                    remap(m, Some(un_rm(i, *p1))).map(|j| rm_idx(j, p1n))
                } else {
                    Some(i)
                });
            }
            for i in 0..old_r {
                sigma.push(if ci == 1 {
                    remap(m, Some(un_rm(i, *p2))).map(|j| new_l + rm_idx(j, p2n))
                } else {
                    Some(new_l + i)
                });
            }
            sigma.push(Some(new_l + new_r));
            let q = ll_mk(LLNode::TensorIntro {
                p1: p1n,
                p2: p2n,
                out_side: *out_side,
                left: Box::new(nl),
                right: Box::new(nr),
            })?;
            Ok((q, sigma))
        }
        LLNode::ParIntro { p1, p2, out, prem } => {
            let p1n = remap(m, *p1);
            let p2n = remap(m, *p2);
            let old_kept: Vec<usize> = (0..prem.items.len())
                .filter(|k| Some(*k) != *p1 && Some(*k) != *p2)
                .collect();
            let new_kept: Vec<usize> = (0..nc.items.len())
                .filter(|k| Some(*k) != p1n && Some(*k) != p2n)
                .collect();
            let mut sigma: Map = Vec::new();
            for k in old_kept {
                sigma.push(remap(m, Some(k)).and_then(|j| {
                    new_kept
                        .iter()
                        .position(|x| *x == j)
                        .map(|fj| fj + usize::from(out.0 <= fj))
                }));
            }
            sigma.insert(out.0, Some(out.0));
            let q = ll_mk(LLNode::ParIntro {
                p1: p1n,
                p2: p2n,
                out: *out,
                prem: Box::new(nc),
            })?;
            Ok((q, sigma))
        }
        LLNode::PlusIntro1 {
            principal,
            out,
            ppos,
            prem,
        }
        | LLNode::PlusIntro2 {
            principal,
            out,
            ppos,
            prem,
        } => {
            let first = matches!(p.node, LLNode::PlusIntro1 { .. });
            let ppn = remap(m, *ppos);
            let old_n = prem.items.len() - usize::from(ppos.is_some());
            let mut sigma: Map = Vec::new();
            for i in 0..old_n {
                sigma.push(
                    remap(m, Some(un_rm(i, *ppos)))
                        .map(|j| rm_idx(j, ppn))
                        .map(|j| j + usize::from(out.0 <= j)),
                );
            }
            sigma.insert(out.0, Some(out.0));
            let node = if first {
                LLNode::PlusIntro1 {
                    principal: principal.clone(),
                    out: *out,
                    ppos: ppn,
                    prem: Box::new(nc),
                }
            } else {
                LLNode::PlusIntro2 {
                    principal: principal.clone(),
                    out: *out,
                    ppos: ppn,
                    prem: Box::new(nc),
                }
            };
            Ok((ll_mk(node)?, sigma))
        }
        LLNode::Contraction { keep, drop, .. } => {
            let keepn = remap(m, Some(*keep))
                .ok_or_else(|| CutError::Irreducible("contracted occurrence vanished".into()))?;
            let dropn = remap(m, Some(*drop))
                .ok_or_else(|| CutError::Irreducible("contracted occurrence vanished".into()))?;
            let old_n = p.items.len();
            let mut sigma: Map = Vec::new();
            for i in 0..old_n {
                sigma
                    .push(remap(m, Some(un_rm(i, Some(*drop)))).map(|j| rm_idx(j, Some(dropn))));
            }
            let q = ll_mk(LLNode::Contraction {
                keep: keepn,
                drop: dropn,
                prem: Box::new(nc),
            })?;
            Ok((q, sigma))
        }
        LLNode::Dereliction {
            pos, out, body, ..
        } => {
            let posn = remap(m, *pos);
            let old_n = p.items.len() - 1;
            let mut sigma: Map = Vec::new();
            for i in 0..old_n {
                sigma.push(
                    remap(m, Some(un_rm(i, *pos)))
                        .map(|j| rm_idx(j, posn))
                        .map(|j| j + usize::from(out.0 <= j)),
                );
            }
            sigma.insert(out.0, Some(out.0));
            let q = ll_mk(LLNode::Dereliction {
                pos: posn,
                out: *out,
                body: body.clone(),
                prem: Box::new(nc),
            })?;
            Ok((q, sigma))
        }
        LLNode::Weakening { body, out, .. } => {
            let mut sigma: Map = m
                .iter()
                .map(|v| v.map(|j| j + usize::from(out.0 <= j)))
                .collect();
            sigma.insert(out.0, Some(out.0));
            let q = ll_mk(LLNode::Weakening {
                body: body.clone(),
                out: *out,
                prem: Box::new(nc),
            })?;
            Ok((q, sigma))
        }
        LLNode::Promotion {
            out,
            prem_pos,
            prem,
        } => {
            let ppn = remap(m, *prem_pos);
            let sigma = ll_realign_sigma(
                p.items.len(),
                out.0,
                prem.items.len(),
                *prem_pos,
                nc.items.len(),
                ppn,
                m,
            )?;
            let new_out0 = out.0.min(nc.items.len() - usize::from(ppn.is_some()));
            let q = ll_mk(LLNode::Promotion {
                out: (new_out0, out.1),
                prem_pos: ppn,
                prem: Box::new(nc),
            })?;
            Ok((q, sigma))
        }
        LLNode::WithIntro {
            out,
            lpos,
            rpos,
            left,
            right,
        } => {
            if ci == 1 {
                let rpn = remap(m, *rpos);
                let q = ll_mk(LLNode::WithIntro {
                    out: *out,
                    lpos: *lpos,
                    rpos: rpn,
                    left: left.clone(),
                    right: Box::new(nc),
                })?;
                return Ok((q, idmap(p.items.len())));
            }
            let lpn = remap(m, *lpos);
            let sigma = ll_realign_sigma(
                p.items.len(),
                out.0,
                left.items.len(),
                *lpos,
                nc.items.len(),
                lpn,
                m,
            )?;
            let new_out0 = out.0.min(nc.items.len() - usize::from(lpn.is_some()));
            let q = ll_mk(LLNode::WithIntro {
                out: (new_out0, out.1),
                lpos: lpn,
                rpos: *rpos,
                left: Box::new(nc),
                right: right.clone(),
            })?;
            Ok((q, sigma))
        }
        _ => Err(CutError::NotACut),
    }
}

fn ll_reduce_cut_node(p: &LLProof) -> Result<(LLProof, Map, String), CutError> {
    let LLNode::Cut {
        formula,
        lpos,
        rpos,
        left,
        right,
    } = &p.node
    else {
        return Err(CutError::NotACut);
    };
    ll_dispatch(formula, *lpos, *rpos, left, right, 0)
}

fn ll_dispatch(
    f: &LLFormula,
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &LLProof,
    rt: &LLProof,
    depth: usize,
) -> Result<(LLProof, Map, String), CutError> {
    if depth > 2 {
        return Err(blocked("mirrored dispatch did not settle"));
    }
    let nl = lt.items.len() - usize::from(lp.is_some());
    let nr = rt.items.len() - usize::from(rp.is_some());
    let mirror = || -> Result<(LLProof, Map, String), CutError> {
        let (q, m, name) = ll_dispatch(&f.negate(), rp, lp, rt, lt, depth + 1)?;
        let mut mm: Map = Vec::with_capacity(nl + nr);
        for i in 0..nl {
            mm.push(m[nr + i]);
        }
        for j in 0..nr {
            mm.push(m[j]);
        }
        Ok((q, mm, name))
    };
    let mut cur_items = llproof::remove_at(&lt.items, lp)?;
    cur_items.extend(llproof::remove_at(&rt.items, rp)?);
    if matches!(lt.node, LLNode::TopIntro { .. }) || matches!(rt.node, LLNode::TopIntro { .. }) {
        let pos = cur_items
            .iter()
            .position(|it| eff_ll_it(it) == LLFormula::Top)
            .ok_or_else(|| blocked("no surviving additive-true occurrence"))?;
        let q = LLProof {
            items: cur_items,
            node: LLNode::TopIntro { pos },
        };
        return Ok((q, idmap(nl + nr), "zero-top".to_string()));
    }
    if matches!(lt.node, LLNode::Ax { .. }) && lp.is_some() {
        let rpk = rp.ok_or_else(|| blocked("axiom cut against a virtual occurrence"))?;
        let mut m: Map = vec![Some(rpk)];
        for i in 0..nr {
            m.push(Some(un_rm(i, rp)));
        }
        return Ok((rt.clone(), m, "axiom".to_string()));
    }
    if matches!(rt.node, LLNode::Ax { .. }) && rp.is_some() {
        let lpk = lp.ok_or_else(|| blocked("axiom cut against a virtual occurrence"))?;
        let mut m: Map = (0..nl).map(|i| Some(un_rm(i, lp))).collect();
        m.push(Some(lpk));
        return Ok((lt.clone(), m, "axiom".to_string()));
    }
    if matches!(rt.node, LLNode::OneIntro) && rp == Some(0) {
        let m: Map = (0..nl).map(|i| Some(un_rm(i, lp))).collect();
        return Ok((lt.clone(), m, "one-bot".to_string()));
    }
    if matches!(lt.node, LLNode::OneIntro) && lp == Some(0) {
        let m: Map = (0..nr).map(|i| Some(un_rm(i, rp))).collect();
        return Ok((rt.clone(), m, "one-bot".to_string()));
    }
    let lprin = ll_principal_at(lt, lp);
    let rprin = ll_principal_at(rt, rp);
    if lprin && rprin {
        return match (&lt.node, &rt.node) {
            (LLNode::TensorIntro { .. }, LLNode::ParIntro { .. }) => ll_tensor_par(lt, rt),
            (LLNode::ParIntro { .. }, LLNode::TensorIntro { .. }) => mirror(),
            (LLNode::PlusIntro1 { .. } | LLNode::PlusIntro2 { .. }, LLNode::WithIntro { .. }) => {
                ll_plus_with(rp, lt, rt)
            }
            (LLNode::WithIntro { .. }, LLNode::PlusIntro1 { .. } | LLNode::PlusIntro2 { .. }) => {
                mirror()
            }
            (LLNode::Promotion { .. }, LLNode::Dereliction { .. }) => ll_prom_derel(lp, rp, lt, rt),
            (LLNode::Dereliction { .. }, LLNode::Promotion { .. }) => mirror(),
            (LLNode::Promotion { .. }, LLNode::Weakening { .. }) => ll_prom_weak(lp, rp, lt, rt),
            (LLNode::Weakening { .. }, LLNode::Promotion { .. }) => mirror(),
            (LLNode::Promotion { .. }, LLNode::Contraction { .. }) => {
                ll_prom_contr(f, lp, lt, rt)
            }
            (LLNode::Contraction { .. }, LLNode::Promotion { .. }) => mirror(),
            _ => Err(blocked("principal pair outside the rewrite system")),
        };
    }
    if lprin
        && matches!(lt.node, LLNode::Promotion { .. })
        && matches!(rt.node, LLNode::Promotion { .. })
    {
        return ll_prom_prom(f, lp, rp, lt, rt);
    }
    if rprin
        && matches!(rt.node, LLNode::Promotion { .. })
        && matches!(lt.node, LLNode::Promotion { .. })
    {
        return mirror();
    }
    if !lprin && !ll_is_leaf(lt) && !matches!(lt.node, LLNode::Promotion { .. }) {
        return ll_commute_left(f, lp, rp, lt, rt);
    }
    if !rprin && !ll_is_leaf(rt) && !matches!(rt.node, LLNode::Promotion { .. }) {
        return mirror();
    }
    Err(blocked("no applicable reduction for this cut configuration"))
}

fn ll_tensor_par(lt: &LLProof, rt: &LLProof) -> Result<(LLProof, Map, String), CutError> {
    let LLNode::TensorIntro {
        p1,
        p2,
        left: a,
        right: b,
        ..
    } = &lt.node
    else {
        return Err(blocked("tensor-par case shape"));
    };
    let LLNode::ParIntro {
        p1: q1,
        p2: q2,
        prem: q,
        ..
    } = &rt.node
    else {
        return Err(blocked("tensor-par case shape"));
    };
    let af = llproof::eff_at(&a.items, *p1)?;
    let bf = llproof::eff_at(&b.items, *p2)?;
    let na = a.items.len() - usize::from(p1.is_some());
    let c1 = ll_mk(LLNode::Cut {
        formula: af,
        lpos: *p1,
        rpos: *q1,
        left: a.clone(),
        right: q.clone(),
    })?;
    let q2p = q2.map(|y| na + rm_idx(y, *q1));
    let res = ll_mk(LLNode::Cut {
        formula: bf,
        lpos: *p2,
        rpos: q2p,
        left: b.clone(),
        right: Box::new(c1),
    })?;
    let a_tags: Vec<Tag> = (0..a.items.len())
        .filter(|x| Some(*x) != *p1)
        .map(|x| Tag(0, rm_idx(x, *p1)))
        .collect();
    let b_tags: Vec<Tag> = (0..b.items.len())
        .filter(|x| Some(*x) != *p2)
        .map(|x| Tag(0, na + rm_idx(x, *p2)))
        .collect();
    let q_tags: Vec<Tag> = (0..q.items.len())
        .filter(|y| Some(*y) != *q1 && Some(*y) != *q2)
        .map(|y| {
            let fy = y
                - usize::from(q1.is_some_and(|r| r < y))
                - usize::from(q2.is_some_and(|r| r < y));
            Tag(1, fy)
        })
        .collect();
    let mut old = a_tags.clone();
    old.extend(b_tags.iter().copied());
    old.extend(q_tags.iter().copied());
    let mut new = b_tags;
    new.extend(a_tags);
    new.extend(q_tags);
    Ok((res, map_from_tags(&old, &new), "tensor-par".to_string()))
}

fn ll_plus_with(
    rp: Option<usize>,
    lt: &LLProof,
    rt: &LLProof,
) -> Result<(LLProof, Map, String), CutError> {
    let (first, ppos, q1) = match &lt.node {
        LLNode::PlusIntro1 { ppos, prem, .. } => (true, ppos, prem),
        LLNode::PlusIntro2 { ppos, prem, .. } => (false, ppos, prem),
        _ => return Err(blocked("plus-with case shape")),
    };
    let LLNode::WithIntro {
        lpos,
        rpos,
        left,
        right,
        ..
    } = &rt.node
    else {
        return Err(blocked("plus-with case shape"));
    };
    let (branch, cpos) = if first { (left, lpos) } else { (right, rpos) };
    let rrem = llproof::remove_at(&rt.items, rp)?;
    let matched = ll_ctx_match(branch, *cpos, &rrem)?;
    let f2 = llproof::eff_at(&q1.items, *ppos)?;
    let res = ll_mk(LLNode::Cut {
        formula: f2,
        lpos: *ppos,
        rpos: *cpos,
        left: q1.clone(),
        right: branch.clone(),
    })?;
    let nq = q1.items.len() - usize::from(ppos.is_some());
    let mut m: Map = (0..nq).map(Some).collect();
    for t in &matched {
        m.push(t.map(|t0| nq + rm_idx(t0, *cpos)));
    }
    Ok((res, m, "plus-with".to_string()))
}

fn ll_prom_derel(
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &LLProof,
    rt: &LLProof,
) -> Result<(LLProof, Map, String), CutError> {
    let LLNode::Promotion {
        prem_pos: ppp,
        prem: q1,
        ..
    } = &lt.node
    else {
        return Err(blocked("promotion-dereliction case shape"));
    };
    let LLNode::Dereliction {
        pos: dpos,
        prem: q2,
        ..
    } = &rt.node
    else {
        return Err(blocked("promotion-dereliction case shape"));
    };
    let lrem = llproof::remove_at(&lt.items, lp)?;
    let matched = ll_ctx_match(q1, *ppp, &lrem)?;
    let f2 = llproof::eff_at(&q1.items, *ppp)?;
    let ns = q1.items.len() - usize::from(ppp.is_some());
    let res = ll_mk(LLNode::Cut {
        formula: f2,
        lpos: *ppp,
        rpos: *dpos,
        left: q1.clone(),
        right: q2.clone(),
    })?;
    let nr = rt.items.len() - usize::from(rp.is_some());
    let mut m: Map = matched
        .iter()
        .map(|t| t.map(|t0| rm_idx(t0, *ppp)))
        .collect();
    m.extend((0..nr).map(|k| Some(ns + k)));
    Ok((res, m, "promotion-dereliction".to_string()))
}

fn ll_prom_weak(
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &LLProof,
    rt: &LLProof,
) -> Result<(LLProof, Map, String), CutError> {
    let LLNode::Weakening { prem: q2, .. } = &rt.node else {
        return Err(blocked("promotion-weakening case shape"));
    };
    let lrem = llproof::remove_at(&lt.items, lp)?;
    let mut acc = (**q2).clone();
    let mut rank = 0usize;
    let mut m: Map = Vec::new();
    for it in &lrem {
        let e = eff_ll_it(it);
        if e == LLFormula::Bot {
            m.push(None);
            continue;
        }
        let LLFormula::Quest(bk) = e else {
            return Err(blocked("promotion context occurrence is not a why-not"));
        };
        acc = ll_mk(LLNode::Weakening {
            body: *bk,
            out: (rank, it.0),
            prem: Box::new(acc),
        })?;
        m.push(Some(rank));
        rank += 1;
    }
    let nr = rt.items.len() - usize::from(rp.is_some());
    m.extend((0..nr).map(|k| Some(rank + k)));
    Ok((acc, m, "promotion-weakening".to_string()))
}

fn ll_prom_contr(
    f: &LLFormula,
    lp: Option<usize>,
    lt: &LLProof,
    rt: &LLProof,
) -> Result<(LLProof, Map, String), CutError> {
    let LLNode::Contraction {
        keep,
        drop,
        prem: q2,
    } = &rt.node
    else {
        return Err(blocked("promotion-contraction case shape"));
    };
    let c1 = ll_mk(LLNode::Cut {
        formula: f.clone(),
        lpos: lp,
        rpos: Some(*drop),
        left: Box::new(lt.clone()),
        right: q2.clone(),
    })?;
    let nl = lt.items.len() - usize::from(lp.is_some());
    let keep1 = nl + rm_idx(*keep, Some(*drop));
    let mut acc = ll_mk(LLNode::Cut {
        formula: f.clone(),
        lpos: lp,
        rpos: Some(keep1),
        left: Box::new(lt.clone()),
        right: Box::new(c1),
    })?;
    let lrem = llproof::remove_at(&lt.items, lp)?;
    let rest = q2.items.len() - 2;
    let mut live: Vec<Tag> = (0..nl)
        .map(|x| Tag(0, x))
        .chain((0..nl).map(|x| Tag(2, x)))
        .chain((0..rest).map(|k| Tag(1, k)))
        .collect();
    for (x, it) in lrem.iter().enumerate() {
        if eff_ll_it(it) == LLFormula::Bot {
            continue;
        }
        let kp = live
            .iter()
            .position(|t| *t == Tag(0, x))
            .ok_or_else(|| blocked("duplicated occurrence lost"))?;
        let dp = live
            .iter()
            .position(|t| *t == Tag(2, x))
            .ok_or_else(|| blocked("duplicated occurrence lost"))?;
        acc = ll_mk(LLNode::Contraction {
            keep: kp,
            drop: dp,
            prem: Box::new(acc),
        })?;
        live.remove(dp);
    }
    let old: Vec<Tag> = (0..nl)
        .map(|x| Tag(0, x))
        .chain((0..rest).map(|k| Tag(1, k)))
        .collect();
    Ok((acc, map_from_tags(&old, &live), "promotion-contraction".to_string()))
}

fn ll_prom_prom(
    f: &LLFormula,
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &LLProof,
    rt: &LLProof,
) -> Result<(LLProof, Map, String), CutError> {
    let LLNode::Promotion {
        out: out2,
        prem_pos: pp2,
        prem: q2,
    } = &rt.node
    else {
        return Err(blocked("promotion-promotion case shape"));
    };
    let rpk = rp.ok_or_else(|| blocked("re-indexed bang occurrence is virtual"))?;
    let target = f.negate();
    let cand = un_rm(rm_idx(rpk, Some(out2.0)), *pp2);
    let r2 = if Some(cand) != *pp2 && q2.items.get(cand).map(eff_ll_it) == Some(target.clone()) {
        cand
    } else {
        q2.items
            .iter()
            .enumerate()
            .position(|(k, it)| Some(k) != *pp2 && eff_ll_it(it) == target)
            .ok_or_else(|| blocked("re-indexed cut occurrence not found under the promotion"))?
    };
    let inner = ll_mk(LLNode::Cut {
        formula: f.clone(),
        lpos: lp,
        rpos: Some(r2),
        left: Box::new(lt.clone()),
        right: q2.clone(),
    })?;
    let nl = lt.items.len() - usize::from(lp.is_some());
    let n = nl + rt.items.len() - usize::from(rp.is_some());
    let new_out = (nl + rm_idx(out2.0, rp), out2.1);
    let ppn = pp2.map(|x| nl + rm_idx(x, Some(r2)));
    let res = ll_mk(LLNode::Promotion {
        out: new_out,
        prem_pos: ppn,
        prem: Box::new(inner),
    })?;
    Ok((res, idmap(n), "promotion-promotion".to_string()))
}

fn ll_commute_left(
    f: &LLFormula,
    lp: Option<usize>,
    rp: Option<usize>,
    lt: &LLProof,
    rt: &LLProof,
) -> Result<(LLProof, Map, String), CutError> {
    let nl = lt.items.len() - usize::from(lp.is_some());
    let nr = rt.items.len() - usize::from(rp.is_some());
    let old: Vec<Tag> = (0..nl)
        .map(|x| Tag(0, x))
        .chain((0..nr).map(|k| Tag(1, k)))
        .collect();
    match &lt.node {
        LLNode::Cut {
            formula: g,
            lpos: gl,
            rpos: gr,
            left: a,
            right: b,
        } => {
            let lena = a.items.len() - usize::from(gl.is_some());
            let mut new = Vec::new();
            let res = if lp.is_some_and(|k| k < lena) {
                let orig = lp.map(|k| un_rm(k, *gl));
                let inner = ll_mk(LLNode::Cut {
                    formula: f.clone(),
                    lpos: orig,
                    rpos: rp,
                    left: a.clone(),
                    right: Box::new(rt.clone()),
                })?;
                let gl2 = gl.map(|x| rm_idx(x, orig));
                for x in 0..a.items.len() {
                    if Some(x) != orig && Some(x) != *gl {
                        new.push(Tag(0, rm_idx(rm_idx(x, *gl), lp)));
                    }
                }
                new.extend((0..nr).map(|k| Tag(1, k)));
                for y in 0..b.items.len() {
                    if Some(y) != *gr {
                        new.push(Tag(0, rm_idx(lena + rm_idx(y, *gr), lp)));
                    }
                }
                ll_mk(LLNode::Cut {
                    formula: g.clone(),
                    lpos: gl2,
                    rpos: *gr,
                    left: Box::new(inner),
                    right: b.clone(),
                })?
            } else {
                let orig = lp.map(|k| un_rm(k - lena, *gr));
                let inner = ll_mk(LLNode::Cut {
                    formula: f.clone(),
                    lpos: orig,
                    rpos: rp,
                    left: b.clone(),
                    right: Box::new(rt.clone()),
                })?;
                let gr2 = gr.map(|x| rm_idx(x, orig));
                for x in 0..a.items.len() {
                    if Some(x) != *gl {
                        new.push(Tag(0, rm_idx(rm_idx(x, *gl), lp)));
                    }
                }
                for y in 0..b.items.len() {
                    if Some(y) != orig && Some(y) != *gr {
                        new.push(Tag(0, rm_idx(lena + rm_idx(y, *gr), lp)));
                    }
                }
                new.extend((0..nr).map(|k| Tag(1, k)));
                ll_mk(LLNode::Cut {
                    formula: g.clone(),
                    lpos: *gl,
                    rpos: gr2,
                    left: a.clone(),
                    right: Box::new(inner),
                })?
            };
            Ok((res, map_from_tags(&old, &new), "commute-cut".to_string()))
        }
        LLNode::TensorIntro {
            p1,
            p2,
            out_side,
            left: a,
            right: b,
        } => {
            let lena = a.items.len() - usize::from(p1.is_some());
            let prin_tag = Tag(0, rm_idx(lt.items.len() - 1, lp));
            let mut new = Vec::new();
            let res = if lp.is_some_and(|k| k < lena) {
                let orig = lp.map(|k| un_rm(k, *p1));
                let inner = ll_mk(LLNode::Cut {
                    formula: f.clone(),
                    lpos: orig,
                    rpos: rp,
                    left: a.clone(),
                    right: Box::new(rt.clone()),
                })?;
                for x in 0..a.items.len() {
                    if Some(x) != orig && Some(x) != *p1 {
                        new.push(Tag(0, rm_idx(rm_idx(x, *p1), lp)));
                    }
                }
                new.extend((0..nr).map(|k| Tag(1, k)));
                for y in 0..b.items.len() {
                    if Some(y) != *p2 {
                        new.push(Tag(0, rm_idx(lena + rm_idx(y, *p2), lp)));
                    }
                }
                new.push(prin_tag);
                ll_mk(LLNode::TensorIntro {
                    p1: p1.map(|x| rm_idx(x, orig)),
                    p2: *p2,
                    out_side: *out_side,
                    left: Box::new(inner),
                    right: b.clone(),
                })?
            } else {
                let orig = lp.map(|k| un_rm(k - lena, *p2));
                let inner = ll_mk(LLNode::Cut {
                    formula: f.clone(),
                    lpos: orig,
                    rpos: rp,
                    left: b.clone(),
                    right: Box::new(rt.clone()),
                })?;
                for x in 0..a.items.len() {
                    if Some(x) != *p1 {
                        new.push(Tag(0, rm_idx(rm_idx(x, *p1), lp)));
                    }
                }
                for y in 0..b.items.len() {
                    if Some(y) != orig && Some(y) != *p2 {
                        new.push(Tag(0, rm_idx(lena + rm_idx(y, *p2), lp)));
                    }
                }
                new.extend((0..nr).map(|k| Tag(1, k)));
                new.push(prin_tag);
                ll_mk(LLNode::TensorIntro {
                    p1: *p1,
                    p2: p2.map(|x| rm_idx(x, orig)),
                    out_side: *out_side,
                    left: a.clone(),
                    right: Box::new(inner),
                })?
            };
            Ok((res, map_from_tags(&old, &new), "commute-tensor".to_string()))
        }
        LLNode::ParIntro { p1, p2, out, prem } => {
            let orig = lp.map(|k| {
                let mut o = un_ins(k, out.0).expect("non-principal occurrence");
                let mut removed: Vec<usize> = [*p1, *p2].iter().flatten().copied().collect();
                removed.sort_unstable();
                for r in removed {
                    if r <= o {
                        o += 1;
                    }
                }
                o
            });
            let inner = ll_mk(LLNode::Cut {
                formula: f.clone(),
                lpos: orig,
                rpos: rp,
                left: prem.clone(),
                right: Box::new(rt.clone()),
            })?;
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let res = ll_mk(LLNode::ParIntro {
                p1: p1.map(|x| rm_idx(x, orig)),
                p2: p2.map(|x| rm_idx(x, orig)),
                out: (out0, out.1),
                prem: Box::new(inner),
            })?;
            Ok((res, idmap(nl + nr), "commute-par".to_string()))
        }
        LLNode::PlusIntro1 {
            principal,
            out,
            ppos,
            prem,
        }
        | LLNode::PlusIntro2 {
            principal,
            out,
            ppos,
            prem,
        } => {
            let first = matches!(lt.node, LLNode::PlusIntro1 { .. });
            let orig = lp.map(|k| un_rm(un_ins(k, out.0).expect("non-principal"), *ppos));
            let inner = ll_mk(LLNode::Cut {
                formula: f.clone(),
                lpos: orig,
                rpos: rp,
                left: prem.clone(),
                right: Box::new(rt.clone()),
            })?;
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let pposn = ppos.map(|x| rm_idx(x, orig));
            let node = if first {
                LLNode::PlusIntro1 {
                    principal: principal.clone(),
                    out: (out0, out.1),
                    ppos: pposn,
                    prem: Box::new(inner),
                }
            } else {
                LLNode::PlusIntro2 {
                    principal: principal.clone(),
                    out: (out0, out.1),
                    ppos: pposn,
                    prem: Box::new(inner),
                }
            };
            Ok((ll_mk(node)?, idmap(nl + nr), "commute-plus".to_string()))
        }
        LLNode::Contraction { keep, drop, prem } => {
            let orig = lp.map(|k| un_rm(k, Some(*drop)));
            let inner = ll_mk(LLNode::Cut {
                formula: f.clone(),
                lpos: orig,
                rpos: rp,
                left: prem.clone(),
                right: Box::new(rt.clone()),
            })?;
            let res = ll_mk(LLNode::Contraction {
                keep: rm_idx(*keep, orig),
                drop: rm_idx(*drop, orig),
                prem: Box::new(inner),
            })?;
            Ok((res, idmap(nl + nr), "commute-contraction".to_string()))
        }
        LLNode::Dereliction {
            pos, out, body, prem,
        } => {
            let orig = lp.map(|k| un_rm(un_ins(k, out.0).expect("non-principal"), *pos));
            let inner = ll_mk(LLNode::Cut {
                formula: f.clone(),
                lpos: orig,
                rpos: rp,
                left: prem.clone(),
                right: Box::new(rt.clone()),
            })?;
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let res = ll_mk(LLNode::Dereliction {
                pos: pos.map(|x| rm_idx(x, orig)),
                out: (out0, out.1),
                body: body.clone(),
                prem: Box::new(inner),
            })?;
            Ok((res, idmap(nl + nr), "commute-dereliction".to_string()))
        }
        LLNode::Weakening { body, out, prem } => {
            let orig = lp.map(|k| un_ins(k, out.0).expect("non-principal"));
            let inner = ll_mk(LLNode::Cut {
                formula: f.clone(),
                lpos: orig,
                rpos: rp,
                left: prem.clone(),
                right: Box::new(rt.clone()),
            })?;
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let res = ll_mk(LLNode::Weakening {
                body: body.clone(),
                out: (out0, out.1),
                prem: Box::new(inner),
            })?;
            Ok((res, idmap(nl + nr), "commute-weakening".to_string()))
        }
        LLNode::WithIntro {
            out,
            lpos,
            rpos,
            left,
            right,
        } => {
            let kk = lp.map(|k| un_ins(k, out.0).expect("non-principal"));
            let mut inners = Vec::new();
            let mut cposns = Vec::new();
            for (branch, cpos) in [(left, lpos), (right, rpos)] {
                let s = if *f == LLFormula::Bot {
                    None
                } else {
                    let cand = kk.map(|k0| un_rm(k0, *cpos));
                    let hit = cand.filter(|c| {
                        Some(*c) != *cpos && branch.items.get(*c).map(eff_ll_it) == Some(f.clone())
                    });
                    match hit {
                        Some(c) => Some(c),
                        None => Some(
                            branch
                                .items
                                .iter()
                                .enumerate()
                                .position(|(k, it)| Some(k) != *cpos && eff_ll_it(it) == *f)
                                .ok_or_else(|| {
                                    blocked("cut occurrence not found in the product branch")
                                })?,
                        ),
                    }
                };
                let inner = ll_mk(LLNode::Cut {
                    formula: f.clone(),
                    lpos: s,
                    rpos: rp,
                    left: branch.clone(),
                    right: Box::new(rt.clone()),
                })?;
                cposns.push(cpos.map(|x| rm_idx(x, s)));
                inners.push(inner);
            }
            let out0 = out.0 - usize::from(lp.is_some_and(|k| k < out.0));
            let right_b = inners.pop().expect("two branches");
            let left_b = inners.pop().expect("two branches");
            let res = ll_mk(LLNode::WithIntro {
                out: (out0, out.1),
                lpos: cposns[0],
                rpos: cposns[1],
                left: Box::new(left_b),
                right: Box::new(right_b),
            })?;
            Ok((res, idmap(nl + nr), "commute-with".to_string()))
        }
        _ => Err(blocked("commutation not available at this root rule")),
    }
}

fn ll_reduce_rec(
    p: &LLProof,
    targets: &[Vec<usize>],
) -> Result<(LLProof, Map, StepLog), CutError> {
    let mut cur = p.clone();
    let mut m = idmap(p.items.len());
    let mut log: StepLog = Vec::new();
    let mut by_child: std::collections::BTreeMap<usize, Vec<Vec<usize>>> =
        std::collections::BTreeMap::new();
    let mut root_here = false;
    for t in targets {
        match t.split_first() {
            None => root_here = true,
            Some((k, rest)) => by_child.entry(*k).or_default().push(rest.to_vec()),
        }
    }
    for (k, subs) in by_child {
        let prem = ll_child(&cur, k).ok_or(CutError::NotACut)?.clone();
        let (np, mp, sublog) = ll_reduce_rec(&prem, &subs)?;
        let (nc, mm) = ll_rebuild_one(&cur, k, np, &mp)?;
        cur = nc;
        m = compose_maps(&m, &mm);
        log.extend(
            sublog
                .into_iter()
                .map(|(path, name)| (std::iter::once(k).chain(path).collect(), name)),
        );
    }
    if root_here {
        let (nc, mm, name) = ll_reduce_cut_node(&cur)?;
        cur = nc;
        m = compose_maps(&m, &mm);
        log.push((Vec::new(), name));
    }
    Ok((cur, m, log))
}

/// One reduction step at the addressed cut of an erased proof, making the
/// same structural choices as [`reduce_at`] does on indexed proofs.
pub fn ll_reduce_at(p: &LLProof, c: &CutId) -> Result<LLProof, CutError> {
    let mut cur = p;
    for &k in &c.path {
        cur = ll_child(cur, k).ok_or(CutError::NotACut)?;
    }
    if !matches!(cur.node, LLNode::Cut { .. }) {
        return Err(CutError::NotACut);
    }
    let (q, _, _) = ll_reduce_rec(p, std::slice::from_ref(&c.path))?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derived::{identity_proof, Tracked};
    use crate::llproof::check_ll;
    use crate::proof::{check_proof, erase_proof};
    use crate::setfun::{atoms, Elem, Locus};
    use crate::structural::{collapses_to_identity, seely};
    use crate::subtyping::refl;

    fn env() -> VarEnv {
        let mut e = VarEnv::new();
        e.insert("X".to_string(), atoms(&["p", "q"]));
        e
    }

    fn pv(f: SetFun) -> Formula {
        Formula::PVar(f, "X".to_string())
    }

    fn map(dom: &Locus, cod: &Locus, pairs: &[(&str, &str)]) -> SetFun {
        SetFun::from_fn(dom.clone(), cod.clone(), |x| {
            let s = match x {
                Elem::Atom(s) => s.as_str(),
                Elem::Unit => "*",
                _ => panic!("unexpected element"),
            };
            let t = pairs.iter().find(|(a, _)| *a == s).unwrap().1;
            Elem::atom(t)
        })
        .unwrap()
    }

    fn cut_identities(a: &Tracked, b: &Tracked, f: &Formula, e: &VarEnv) -> Proof {
        mk(
            ProofNode::Cut {
                formula: f.clone(),
                lpos: a.rhs,
                rpos: b.lhs,
                left: Box::new(a.proof.clone()),
                right: Box::new(b.proof.clone()),
            },
            e,
        )
        .unwrap()
    }

    /// Run one-step reduction to completion following the uppermost
    /// strategy, asserting after every step that the proof still checks,
    /// keeps its judgement, and that its erasure tracks the erased
    /// one-step reduction exactly.
    fn normalize_mirrored(p: &Proof, e: &VarEnv) -> Proof {
        let mut cur = p.clone();
        for _ in 0..DEFAULT_STEP_BUDGET {
            let cuts = list_cuts(&cur);
            let Some(target) = cuts
                .iter()
                .max_by(|a, b| a.path.len().cmp(&b.path.len()).then(b.path.cmp(&a.path)))
                .cloned()
            else {
                return cur;
            };
            let q = reduce_at(&cur, &target, e).unwrap();
            check_proof(&q, e).unwrap();
            assert!(cur.concl.same_judgement(&q.concl));
            let llq = ll_reduce_at(&erase_proof(&cur), &erase_cut_path(&cur, &target)).unwrap();
            check_ll(&llq).unwrap();
            assert_eq!(erase_proof(&q), llq);
            cur = q;
        }
        panic!("did not normalize within the budget");
    }

    #[test]
    fn cut_free_proofs_have_no_cuts_and_normalize_trivially() {
        let e = env();
        let il = atoms(&["s", "t"]);
        let a = Formula::tensor(pv(map(&il, &atoms(&["p", "q"]), &[("s", "p"), ("t", "q")])), Formula::One);
        let t = identity_proof(&il, &a, &e).unwrap();
        assert!(list_cuts(&t.proof).is_empty());
        let (q, trace) = normalize(&t.proof, &e, Strategy::Uppermost, DEFAULT_STEP_BUDGET).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(q, t.proof);
        assert_eq!(parallel_reduce(&t.proof, &[], &e).unwrap(), t.proof);
    }

    #[test]
    fn addressing_a_non_cut_is_rejected() {
        let e = env();
        let il = atoms(&["s"]);
        let a = pv(map(&il, &atoms(&["p", "q"]), &[("s", "p")]));
        let t = identity_proof(&il, &a, &e).unwrap();
        assert!(matches!(
            reduce_at(&t.proof, &CutId::new(vec![]), &e),
            Err(CutError::NotACut)
        ));
    }

    #[test]
    fn axiom_cut_reduces_in_one_step() {
        let e = env();
        let il = atoms(&["s"]);
        let a = pv(map(&il, &atoms(&["p", "q"]), &[("s", "p")]));
        let id1 = identity_proof(&il, &a, &e).unwrap();
        let id2 = identity_proof(&il, &a, &e).unwrap();
        let p = cut_identities(&id1, &id2, &a, &e);
        let q = normalize_mirrored(&p, &e);
        assert_eq!(q.cut_count(), 0);
        assert!(p.concl.same_judgement(&q.concl));
        assert!(collapses_to_identity(&q).unwrap());
    }

    #[test]
    fn multiplicative_identity_cut_normalizes() {
        let e = env();
        let il = atoms(&["s", "t"]);
        let xl = atoms(&["p", "q"]);
        let a = Formula::tensor(
            pv(map(&il, &xl, &[("s", "p"), ("t", "q")])),
            Formula::par(Formula::Bot, pv(map(&il, &xl, &[("s", "q"), ("t", "q")]))),
        );
        let id1 = identity_proof(&il, &a, &e).unwrap();
        let id2 = identity_proof(&il, &a, &e).unwrap();
        let p = cut_identities(&id1, &id2, &a, &e);
        let q = normalize_mirrored(&p, &e);
        assert_eq!(q.cut_count(), 0);
        assert!(p.concl.same_judgement(&q.concl));
    }

    #[test]
    fn exponential_identity_cut_normalizes() {
        let e = env();
        let il = atoms(&["s", "t"]);
        let xl = atoms(&["p", "q"]);
        let u = map(&il, &il, &[("s", "t"), ("t", "s")]);
        let a = Formula::quest(u, pv(map(&il, &xl, &[("s", "p"), ("t", "q")])));
        let id1 = identity_proof(&il, &a, &e).unwrap();
        let id2 = identity_proof(&il, &a, &e).unwrap();
        let p = cut_identities(&id1, &id2, &a, &e);
        let q = normalize_mirrored(&p, &e);
        assert_eq!(q.cut_count(), 0);
        assert!(p.concl.same_judgement(&q.concl));
    }

    #[test]
    fn additive_identity_cut_normalizes() {
        let e = env();
        let il = atoms(&["s", "t"]);
        let xl = atoms(&["p", "q"]);
        let jl = atoms(&["j"]);
        let kl = atoms(&["k"]);
        let i = map(&jl, &il, &[("j", "s")]);
        let j = map(&kl, &il, &[("k", "t")]);
        let a = Formula::with(
            i,
            j,
            pv(map(&jl, &xl, &[("j", "p")])),
            pv(map(&kl, &xl, &[("k", "q")])),
        );
        let id1 = identity_proof(&il, &a, &e).unwrap();
        let id2 = identity_proof(&il, &a, &e).unwrap();
        let p = cut_identities(&id1, &id2, &a, &e);
        let q = normalize_mirrored(&p, &e);
        assert_eq!(q.cut_count(), 0);
        assert!(p.concl.same_judgement(&q.concl));
    }

    #[test]
    fn seely_roundtrip_normalizes_to_an_identity() {
        let e = env();
        let il = atoms(&["s", "t"]);
        let jl = atoms(&["a1", "a2"]);
        let kl = atoms(&["b1"]);
        let xl = atoms(&["p", "q"]);
        let u = map(&jl, &il, &[("a1", "s"), ("a2", "t")]);
        let v = map(&kl, &il, &[("b1", "s")]);
        let a = pv(map(&jl, &xl, &[("a1", "p"), ("a2", "q")]));
        let b = pv(map(&kl, &xl, &[("b1", "q")]));
        let (fwd, bwd) = seely(&u, &v, &a, &b, &e).unwrap();
        // cut the two directions along the banged product
        let big = fwd
            .concl
            .items
            .iter()
            .position(|it| it.0 == Side::Right)
            .unwrap();
        let f = eff(&fwd.concl.items[big]);
        let bpos = bwd
            .concl
            .items
            .iter()
            .position(|it| eff(it) == f.negate())
            .unwrap();
        let p = mk(
            ProofNode::Cut {
                formula: f,
                lpos: Some(big),
                rpos: Some(bpos),
                left: Box::new(fwd),
                right: Box::new(bwd),
            },
            &e,
        )
        .unwrap();
        let q = normalize_mirrored(&p, &e);
        assert_eq!(q.cut_count(), 0);
        assert!(p.concl.same_judgement(&q.concl));
    }

    #[test]
    fn both_strategies_agree_on_the_judgement() {
        let e = env();
        let il = atoms(&["s"]);
        let xl = atoms(&["p", "q"]);
        let a = Formula::quest(
            SetFun::identity(&il),
            pv(map(&il, &xl, &[("s", "p")])),
        );
        let id1 = identity_proof(&il, &a, &e).unwrap();
        let id2 = identity_proof(&il, &a, &e).unwrap();
        let p = cut_identities(&id1, &id2, &a, &e);
        let (qu, _) = normalize(&p, &e, Strategy::Uppermost, DEFAULT_STEP_BUDGET).unwrap();
        let (ql, _) = normalize(&p, &e, Strategy::Lowermost, DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(qu.cut_count(), 0);
        assert_eq!(ql.cut_count(), 0);
        assert!(qu.concl.same_judgement(&ql.concl));
        assert!(p.concl.same_judgement(&qu.concl));
    }

    #[test]
    fn budget_zero_is_enforced() {
        let e = env();
        let il = atoms(&["s"]);
        let a = pv(map(&il, &atoms(&["p", "q"]), &[("s", "p")]));
        let id1 = identity_proof(&il, &a, &e).unwrap();
        let id2 = identity_proof(&il, &a, &e).unwrap();
        let p = cut_identities(&id1, &id2, &a, &e);
        assert!(matches!(
            normalize(&p, &e, Strategy::Uppermost, 0),
            Err(CutError::StepBudgetExceeded)
        ));
    }

    #[test]
    fn vnf_removes_trivial_rewrites_and_equiv_ignores_them() {
        let e = env();
        let il = atoms(&["s", "t"]);
        let xl = atoms(&["p", "q"]);
        let a = pv(map(&il, &xl, &[("s", "p"), ("t", "q")]));
        let t = identity_proof(&il, &a, &e).unwrap();
        let pos = t.rhs.unwrap();
        let rho = refl(&il, &a).unwrap();
        let detour = mk(
            ProofNode::SubtypeStep {
                pos,
                rho: rho.clone(),
                prem: Box::new(t.proof.clone()),
            },
            &e,
        )
        .unwrap();
        let stacked = mk(
            ProofNode::SubtypeStep {
                pos,
                rho,
                prem: Box::new(detour.clone()),
            },
            &e,
        )
        .unwrap();
        assert_eq!(vnf(&detour, &e).unwrap(), vnf(&t.proof, &e).unwrap());
        assert!(equiv(&detour, &t.proof, &e).unwrap());
        assert!(equiv(&stacked, &t.proof, &e).unwrap());
    }

    #[test]
    fn equiv_requires_matching_judgements() {
        let e = env();
        let il = atoms(&["s"]);
        let xl = atoms(&["p", "q"]);
        let a = pv(map(&il, &xl, &[("s", "p")]));
        let b = pv(map(&il, &xl, &[("s", "q")]));
        let ta = identity_proof(&il, &a, &e).unwrap();
        let tb = identity_proof(&il, &b, &e).unwrap();
        assert!(matches!(
            equiv(&ta.proof, &tb.proof, &e),
            Err(CutError::SequentMismatch)
        ));
    }
}
