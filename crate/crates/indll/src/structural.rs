//! Derived structural proofs.
//!
//! * [`seely`]: the two directions of the comparison between a tensor of
//!   bangs `!_u A ⊗ !_v B` and a single bang of an indexed product over the
//!   coproduct of the two index sets.
//! * [`distrib`]: the two directions of the distribution of `⊗` over an
//!   indexed sum.
//! * [`intersect_proofs`]: pointwise intersection of a family of proofs
//!   sharing a rule skeleton, producing one proof over the keyed coproduct
//!   of the member loci.
//! * [`collapses_to_identity`]: whether a proof of `A ⊢ A'` erases to the
//!   η-expanded identity proof, up to cuts against identities.

use crate::derived::{elaborate, identity_proof, sub_over_proof};
use crate::formula::{apply_chain, base_change, intersect, Formula, VarEnv};
use crate::llproof::{ll_is_identity, Side};
use crate::proof::{
    eff, erase_proof, mk, mk_with_concl, Item, Proof, ProofError, ProofNode, Sequent,
};
use crate::setfun::{
    coproduct, copair, indexed_coproduct, indexed_fun_sum, pullback, Elem, Locus, SetFun,
};
use crate::subtyping::{chain_sub, decide_subtype, SubDeriv, SubNode};

fn bad(msg: &str) -> ProofError {
    ProofError::RuleMismatch(msg.to_string())
}

fn adj(pos: Option<usize>, removed: Option<usize>) -> Option<usize> {
    match (pos, removed) {
        (Some(p), Some(r)) if p > r => Some(p - 1),
        (p, _) => p,
    }
}

fn ins(pos: Option<usize>, at: usize) -> Option<usize> {
    pos.map(|k| if k >= at { k + 1 } else { k })
}

/// Rewrite the left-stored occurrence at `pos`, currently `base`, into the
/// chain image `fs(base)`; the chain composite must be the identity on the
/// conclusion locus, so the two forms are interprovable.
fn cast_left(
    p: Proof,
    pos: Option<usize>,
    fs: &[SetFun],
    base: &Formula,
    env: &VarEnv,
) -> Result<Proof, ProofError> {
    let Some(k) = pos else { return Ok(p) };
    let locus = p.concl.locus.clone();
    let rho = chain_sub(fs, &[], &locus, base).map_err(ProofError::Subtyping)?;
    if rho.lhs == rho.rhs {
        return Ok(p);
    }
    sub_over_proof(&p, k, &rho, env)
}

/// Rewrite the right-stored occurrence at `pos`, currently `base`, into the
/// chain image `fs(base)`; the chain composite must be the identity.
fn cast_right(
    p: Proof,
    pos: Option<usize>,
    fs: &[SetFun],
    base: &Formula,
    env: &VarEnv,
) -> Result<Proof, ProofError> {
    let Some(k) = pos else { return Ok(p) };
    let locus = p.concl.locus.clone();
    let rho = chain_sub(&[], fs, &locus, base).map_err(ProofError::Subtyping)?;
    if rho.lhs == rho.rhs {
        return Ok(p);
    }
    sub_over_proof(&p, k, &rho, env)
}

/// Both directions of `!_u A ⊗ !_v B ⊣⊢ !_{[u,v]} (A &_{ι1,ι2} B)` over the
/// common codomain of `u` and `v`. Returns `(forward, backward)` where the
/// forward proof has the tensor on the left.
pub fn seely(
    u: &SetFun,
    v: &SetFun,
    a: &Formula,
    b: &Formula,
    env: &VarEnv,
) -> Result<(Proof, Proof), ProofError> {
    let i_locus = u.cod().clone();
    if v.cod() != &i_locus {
        return Err(ProofError::LocusMismatch);
    }
    let cp = coproduct(u.dom(), v.dom());
    let i1 = cp.inl.clone();
    let i2 = cp.inr.clone();
    let cop = copair(u, v).map_err(ProofError::SetFun)?;
    let w = Formula::with(i1.clone(), i2.clone(), a.clone(), b.clone());
    let big = Formula::bang(cop.clone(), w.clone());
    let bang_u_a = Formula::bang(u.clone(), a.clone());
    let bang_v_b = Formula::bang(v.clone(), b.clone());

    // One forward branch: derelict the selected bang back to its body and
    // weaken in the image of the other one, so that the context becomes the
    // conclusion context re-indexed along the selected coproduct injection.
    let fwd_branch = |sel: &SetFun,
                      oth: &SetFun,
                      comp: &Formula,
                      other_comp: &Formula,
                      sel_first: bool|
     -> Result<(Proof, Option<usize>), ProofError> {
        let dl = sel.dom().clone();
        let t = identity_proof(&dl, comp, env)?;
        let q = pullback(sel, sel).map_err(ProofError::SetFun)?;
        let diag = SetFun::from_fn(dl.clone(), q.locus.clone(), |x| {
            Elem::pair(x.clone(), x.clone())
        })
        .map_err(ProofError::SetFun)?;
        let p = cast_left(t.proof, t.lhs, &[diag.clone(), q.p2.clone()], comp, env)?;
        let p = mk(
            ProofNode::Dereliction {
                f: diag,
                u: q.p1.clone(),
                body: base_change(&q.p2, comp)?.negate(),
                pos: t.lhs,
                out: (0, Side::Left),
                prem: Box::new(p),
            },
            env,
        )?;
        let rhs = ins(adj(t.rhs, t.lhs), 0);
        let r = pullback(sel, oth).map_err(ProofError::SetFun)?;
        let at = usize::from(sel_first);
        let p = mk(
            ProofNode::Weakening {
                u: r.p1.clone(),
                body: base_change(&r.p2, other_comp)?.negate(),
                out: (at, Side::Left),
                prem: Box::new(p),
            },
            env,
        )?;
        Ok((p, ins(rhs, at)))
    };
    let (lp, lr) = fwd_branch(&i1, &i2, a, b, true)?;
    let (rp, rr) = fwd_branch(&i2, &i1, b, a, false)?;
    let with_concl = Sequent::new(
        cp.locus.clone(),
        vec![
            (Side::Left, Formula::bang(i1.clone(), a.clone())),
            (Side::Left, Formula::bang(i2.clone(), b.clone())),
            (Side::Right, w.clone()),
        ],
    );
    let p = mk_with_concl(
        ProofNode::WithIntro {
            i: i1.clone(),
            j: i2.clone(),
            out: (2, Side::Right),
            lpos: lr,
            rpos: rr,
            left: Box::new(lp),
            right: Box::new(rp),
        },
        with_concl,
        env,
    )?;
    // Trade the two context bangs for their images under the copairing, so
    // that promotion along the copairing applies.
    let mut casts = Vec::new();
    for (ann, inj, comp, tag_inl) in [(u, &i1, a, true), (v, &i2, b, false)] {
        let pb = pullback(&cop, ann).map_err(ProofError::SetFun)?;
        let h = SetFun::from_fn(ann.dom().clone(), pb.locus.clone(), |x| {
            let tag = if tag_inl {
                Elem::inl(x.clone())
            } else {
                Elem::inr(x.clone())
            };
            Elem::pair(tag, x.clone())
        })
        .map_err(ProofError::SetFun)?;
        let d = chain_sub(&[h.clone(), pb.p2.clone()], &[], ann.dom(), comp)
            .map_err(ProofError::Subtyping)?;
        casts.push(SubDeriv {
            locus: cp.locus.clone(),
            lhs: Formula::bang(pb.p1.clone(), base_change(&pb.p2, comp)?),
            rhs: Formula::bang(inj.clone(), comp.clone()),
            node: SubNode::BangRule(h, Box::new(d)),
        });
    }
    let mut p = p;
    for (k, rho) in casts.into_iter().enumerate() {
        p = mk(
            ProofNode::SubtypeStep {
                pos: k,
                rho,
                prem: Box::new(p),
            },
            env,
        )?;
    }
    let prom_concl = Sequent::new(
        i_locus.clone(),
        vec![
            (Side::Left, bang_u_a.clone()),
            (Side::Left, bang_v_b.clone()),
            (Side::Right, big.clone()),
        ],
    );
    let p = mk_with_concl(
        ProofNode::Promotion {
            v: cop.clone(),
            out: (2, Side::Right),
            prem_pos: Some(2),
            prem: Box::new(p),
        },
        prom_concl,
        env,
    )?;
    let forward = mk(
        ProofNode::ParIntro {
            p1: Some(0),
            p2: Some(1),
            out: (0, Side::Left),
            prem: Box::new(p),
        },
        env,
    )?;

    // One backward branch: select the matching product component on the
    // left, derelict it into the combined bang's image, and promote the
    // selected component's own bang on the right.
    let bwd_branch = |sel: &SetFun, first: bool| -> Result<Proof, ProofError> {
        let dl = sel.dom().clone();
        let comp = if first { a } else { b };
        let t = identity_proof(&dl, comp, env)?;
        let pb = pullback(sel, &cop).map_err(ProofError::SetFun)?;
        let f = SetFun::from_fn(dl.clone(), pb.locus.clone(), |x| {
            let tag = if first {
                Elem::inl(x.clone())
            } else {
                Elem::inr(x.clone())
            };
            Elem::pair(x.clone(), tag)
        })
        .map_err(ProofError::SetFun)?;
        let x_f = apply_chain(&[f.clone(), pb.p2.clone()], &w)?;
        let Formula::With(ix, jx, _, _) = &x_f else {
            return Err(bad("re-indexed product lost its shape"));
        };
        let sel_cp_inj = if first { &i1 } else { &i2 };
        let r = pullback(&pb.p2, sel_cp_inj).map_err(ProofError::SetFun)?;
        let q = pullback(&f, &r.p1).map_err(ProofError::SetFun)?;
        let inner = if first { ix } else { jx };
        let inv = inner.invert().map_err(ProofError::SetFun)?;
        let p = cast_left(
            t.proof,
            t.lhs,
            &[inv, q.p2.clone(), r.p2.clone()],
            comp,
            env,
        )?;
        let principal = x_f.negate();
        let node = if first {
            ProofNode::PlusIntro1 {
                principal,
                out: (0, Side::Left),
                ppos: t.lhs,
                prem: Box::new(p),
            }
        } else {
            ProofNode::PlusIntro2 {
                principal,
                out: (0, Side::Left),
                ppos: t.lhs,
                prem: Box::new(p),
            }
        };
        let p = mk(node, env)?;
        let rhs_pos = ins(adj(t.rhs, t.lhs), 0);
        let p = mk(
            ProofNode::Dereliction {
                f,
                u: pb.p1.clone(),
                body: base_change(&pb.p2, &w)?.negate(),
                pos: Some(0),
                out: (0, Side::Left),
                prem: Box::new(p),
            },
            env,
        )?;
        let prom_concl = Sequent::new(
            i_locus.clone(),
            vec![
                (Side::Left, big.clone()),
                (
                    Side::Right,
                    Formula::bang(sel.clone(), comp.clone()),
                ),
            ],
        );
        mk_with_concl(
            ProofNode::Promotion {
                v: sel.clone(),
                out: (1, Side::Right),
                prem_pos: rhs_pos,
                prem: Box::new(p),
            },
            prom_concl,
            env,
        )
    };
    let pa = bwd_branch(u, true)?;
    let pb = bwd_branch(v, false)?;
    let p = mk(
        ProofNode::TensorIntro {
            p1: Some(1),
            p2: Some(1),
            out_side: Side::Right,
            left: Box::new(pa),
            right: Box::new(pb),
        },
        env,
    )?;
    let backward = mk(
        ProofNode::Contraction {
            keep: 0,
            drop: 1,
            prem: Box::new(p),
        },
        env,
    )?;
    Ok((forward, backward))
}

/// Both directions of
/// `A ⊗ (B ⊕_{i,j} C) ⊣⊢ (i(A) ⊗ B) ⊕_{i,j} (j(A) ⊗ C)` over the common
/// codomain of `i` and `j`. Returns `(forward, backward)` where the forward
/// proof has the undistributed tensor on the left.
pub fn distrib(
    a: &Formula,
    i: &SetFun,
    j: &SetFun,
    b: &Formula,
    c: &Formula,
    env: &VarEnv,
) -> Result<(Proof, Proof), ProofError> {
    let i_locus = i.cod().clone();
    if j.cod() != &i_locus {
        return Err(ProofError::LocusMismatch);
    }
    let plus_bc = Formula::plus(i.clone(), j.clone(), b.clone(), c.clone());
    let lhs_t = Formula::tensor(a.clone(), plus_bc.clone());
    let ta = Formula::tensor(base_change(i, a)?, b.clone());
    let tb = Formula::tensor(base_change(j, a)?, c.clone());
    let rhs_p = Formula::plus(i.clone(), j.clone(), ta.clone(), tb.clone());

    // One forward branch (over the domain of `inj`): build the distributed
    // tensor from two identities and inject it into the re-indexed sum.
    let fwd_branch =
        |inj: &SetFun, comp: &Formula, first: bool| -> Result<(Proof, Option<usize>), ProofError> {
            let dl = inj.dom().clone();
            let ra = base_change(inj, a)?;
            let t1 = identity_proof(&dl, &ra, env)?;
            let t2 = identity_proof(&dl, comp, env)?;
            let off = t1.proof.concl.items.len() - usize::from(t1.rhs.is_some());
            let p = mk(
                ProofNode::TensorIntro {
                    p1: t1.rhs,
                    p2: t2.rhs,
                    out_side: Side::Right,
                    left: Box::new(t1.proof.clone()),
                    right: Box::new(t2.proof.clone()),
                },
                env,
            )?;
            let bl = adj(t2.lhs, t2.rhs).map(|k| k + off);
            let tpos = p.concl.items.len() - 1;
            let m = pullback(inj, inj).map_err(ProofError::SetFun)?;
            let minv = m.p1.invert().map_err(ProofError::SetFun)?;
            let tcomp = Formula::tensor(ra.clone(), comp.clone());
            let p = cast_right(p, Some(tpos), &[minv, m.p2.clone()], &tcomp, env)?;
            let principal = base_change(inj, &rhs_p)?;
            let node = if first {
                ProofNode::PlusIntro1 {
                    principal,
                    out: (tpos, Side::Right),
                    ppos: Some(tpos),
                    prem: Box::new(p),
                }
            } else {
                ProofNode::PlusIntro2 {
                    principal,
                    out: (tpos, Side::Right),
                    ppos: Some(tpos),
                    prem: Box::new(p),
                }
            };
            Ok((mk(node, env)?, bl))
        };
    let (lp, lpos) = fwd_branch(i, b, true)?;
    let (rp, rpos) = fwd_branch(j, c, false)?;
    let concl = Sequent::new(
        i_locus.clone(),
        vec![
            (Side::Left, a.clone()),
            (Side::Left, plus_bc.clone()),
            (Side::Right, rhs_p.clone()),
        ],
    );
    let p = mk_with_concl(
        ProofNode::WithIntro {
            i: i.clone(),
            j: j.clone(),
            out: (1, Side::Left),
            lpos,
            rpos,
            left: Box::new(lp),
            right: Box::new(rp),
        },
        concl,
        env,
    )?;
    let forward = mk(
        ProofNode::ParIntro {
            p1: Some(0),
            p2: Some(1),
            out: (0, Side::Left),
            prem: Box::new(p),
        },
        env,
    )?;

    // One backward branch: inject the component into the re-indexed sum
    // first, then tensor with the re-indexed `A` and split the distributed
    // tensor on the left.
    let bwd_branch = |inj: &SetFun, comp: &Formula, first: bool| -> Result<Proof, ProofError> {
        let dl = inj.dom().clone();
        let ra = base_change(inj, a)?;
        let t1 = identity_proof(&dl, &ra, env)?;
        let t2 = identity_proof(&dl, comp, env)?;
        let m = pullback(inj, inj).map_err(ProofError::SetFun)?;
        let minv = m.p1.invert().map_err(ProofError::SetFun)?;
        let p2 = cast_right(t2.proof.clone(), t2.rhs, &[minv, m.p2.clone()], comp, env)?;
        let at = match t2.rhs {
            Some(k) => k,
            None => p2.concl.items.len(),
        };
        let principal = base_change(inj, &plus_bc)?;
        let node = if first {
            ProofNode::PlusIntro1 {
                principal,
                out: (at, Side::Right),
                ppos: t2.rhs,
                prem: Box::new(p2),
            }
        } else {
            ProofNode::PlusIntro2 {
                principal,
                out: (at, Side::Right),
                ppos: t2.rhs,
                prem: Box::new(p2),
            }
        };
        let p2 = mk(node, env)?;
        let lpos2 = ins(adj(t2.lhs, t2.rhs), at);
        let off = t1.proof.concl.items.len() - usize::from(t1.rhs.is_some());
        let p = mk(
            ProofNode::TensorIntro {
                p1: t1.rhs,
                p2: Some(at),
                out_side: Side::Right,
                left: Box::new(t1.proof.clone()),
                right: Box::new(p2),
            },
            env,
        )?;
        let al = adj(t1.lhs, t1.rhs);
        let bl = adj(lpos2, Some(at)).map(|k| k + off);
        mk(
            ProofNode::ParIntro {
                p1: al,
                p2: bl,
                out: (0, Side::Left),
                prem: Box::new(p),
            },
            env,
        )
    };
    let lp = bwd_branch(i, b, true)?;
    let rp = bwd_branch(j, c, false)?;
    let concl = Sequent::new(
        i_locus,
        vec![(Side::Left, rhs_p.clone()), (Side::Right, lhs_t.clone())],
    );
    let backward = mk_with_concl(
        ProofNode::WithIntro {
            i: i.clone(),
            j: j.clone(),
            out: (0, Side::Left),
            lpos: Some(0),
            rpos: Some(0),
            left: Box::new(lp),
            right: Box::new(rp),
        },
        concl,
        env,
    )?;
    Ok((forward, backward))
}

// --- proof intersection ----------------------------------------------------

const MEDIATION_BUDGET: usize = 200_000;

fn family_keys(n: usize) -> Vec<Elem> {
    (0..n).map(|k| Elem::atom(&k.to_string())).collect()
}

fn inter(fam: &[(Locus, Formula)]) -> Result<Formula, ProofError> {
    Ok(intersect(fam)?.formula)
}

/// Intersection of the formulae at a fixed occurrence across the members.
fn inter_at(ps: &[&Proof], idx: usize) -> Result<Formula, ProofError> {
    let fam: Vec<(Locus, Formula)> = ps
        .iter()
        .map(|p| (p.concl.locus.clone(), p.concl.items[idx].1.clone()))
        .collect();
    inter(&fam)
}

/// Itemwise intersection of the member conclusions.
fn inter_items(ps: &[&Proof]) -> Result<(Locus, Vec<Item>), ProofError> {
    let keys = family_keys(ps.len());
    let fam: Vec<(Elem, Locus)> = keys
        .into_iter()
        .zip(ps.iter().map(|p| p.concl.locus.clone()))
        .collect();
    let locus = indexed_coproduct(&fam).locus;
    let len = ps[0].concl.items.len();
    if ps.iter().any(|p| p.concl.items.len() != len) {
        return Err(ProofError::SkeletonMismatch);
    }
    let mut items = Vec::with_capacity(len);
    for idx in 0..len {
        let side = ps[0].concl.items[idx].0;
        if ps.iter().any(|p| p.concl.items[idx].0 != side) {
            return Err(ProofError::SkeletonMismatch);
        }
        items.push((side, inter_at(ps, idx)?));
    }
    Ok((locus, items))
}

/// Rewrite the occurrence at `pos` to the target effective value through a
/// decided subtyping witness. Intersections of re-indexed formulae and the
/// re-indexing of the intersection differ syntactically (base change is only
/// functorial up to interprovability), and this bridges the gap.
fn mediate(p: Proof, pos: usize, target: &Formula, env: &VarEnv) -> Result<Proof, ProofError> {
    let cur = eff(&p.concl.items[pos]);
    if cur == *target {
        return Ok(p);
    }
    let side = p.concl.items[pos].0;
    let locus = p.concl.locus.clone();
    let rho = match side {
        Side::Right => decide_subtype(&locus, &cur, target, MEDIATION_BUDGET),
        Side::Left => decide_subtype(&locus, &target.negate(), &cur.negate(), MEDIATION_BUDGET),
    }
    .map_err(ProofError::Subtyping)?
    .ok_or_else(|| bad("no subtyping witness for a premise realignment"))?;
    mk(
        ProofNode::SubtypeStep {
            pos,
            rho,
            prem: Box::new(p),
        },
        env,
    )
}

/// Align every context item of a re-indexing premise with the re-indexed
/// intersected conclusion. An item at premise position `p` is paired with
/// the conclusion context position `q` whose image under the member
/// injections matches it in every member.
#[allow(clippy::too_many_arguments)]
fn mediate_context(
    mut prem: Proof,
    member_prems: &[&Proof],
    member_ctx_effs: &[Vec<Formula>],
    inter_ctx_effs: &[Formula],
    member_injs: &[&SetFun],
    inj_sum: &SetFun,
    skip: Option<usize>,
    env: &VarEnv,
) -> Result<Proof, ProofError> {
    let nq = inter_ctx_effs.len();
    let np = prem.concl.items.len();
    let mut used = vec![false; nq];
    for p in 0..np {
        if Some(p) == skip {
            continue;
        }
        let mut found = None;
        'q: for q in 0..nq {
            if used[q] {
                continue;
            }
            for (x, m) in member_prems.iter().enumerate() {
                let want = base_change(member_injs[x], &member_ctx_effs[x][q])?;
                if eff(&m.concl.items[p]) != want {
                    continue 'q;
                }
            }
            found = Some(q);
            break;
        }
        match found {
            Some(q) => {
                used[q] = true;
                let target = base_change(inj_sum, &inter_ctx_effs[q])?;
                prem = mediate(prem, p, &target, env)?;
            }
            None => {
                if eff(&prem.concl.items[p]) == Formula::Bot {
                    continue;
                }
                return Err(bad("cannot align an intersected premise context"));
            }
        }
    }
    Ok(prem)
}

fn ctx_effs(p: &Proof, out: usize) -> Vec<Formula> {
    p.concl
        .items
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != out)
        .map(|(_, it)| eff(it))
        .collect()
}

/// Pointwise intersection of a family of proofs with a common rule
/// skeleton. The members are first reduced to their core rules; the result
/// proves the itemwise intersection of the member conclusions over the keyed
/// coproduct of the member loci.
pub fn intersect_proofs(family: &[(Locus, Proof)], env: &VarEnv) -> Result<Proof, ProofError> {
    if family.is_empty() {
        return Err(bad("cannot intersect an empty family of proofs"));
    }
    for (l, p) in family {
        if &p.concl.locus != l {
            return Err(ProofError::LocusMismatch);
        }
    }
    let base = erase_proof(&family[0].1);
    if family.iter().skip(1).any(|(_, p)| erase_proof(p) != base) {
        return Err(ProofError::SkeletonMismatch);
    }
    let cores: Vec<Proof> = family
        .iter()
        .map(|(_, p)| elaborate(p, env))
        .collect::<Result<_, _>>()?;
    let refs: Vec<&Proof> = cores.iter().collect();
    zip_proofs(&refs, env)
}

fn zip_proofs(ps: &[&Proof], env: &VarEnv) -> Result<Proof, ProofError> {
    let keys = family_keys(ps.len());
    let key_refs: Vec<Elem> = keys.clone();
    let sum = |funs: &[&SetFun]| indexed_fun_sum(&key_refs, funs);
    let skel = || ProofError::SkeletonMismatch;
    match &ps[0].node {
        ProofNode::Ax { var, negative, .. } => {
            let fam: Vec<(Locus, Formula)> = ps
                .iter()
                .map(|p| match &p.node {
                    ProofNode::Ax {
                        f,
                        var: v2,
                        negative: n2,
                    } if v2 == var && n2 == negative => {
                        Ok((p.concl.locus.clone(), Formula::PVar(f.clone(), var.clone())))
                    }
                    _ => Err(skel()),
                })
                .collect::<Result<_, _>>()?;
            let Formula::PVar(f, _) = inter(&fam)? else {
                return Err(skel());
            };
            mk(
                ProofNode::Ax {
                    f,
                    var: var.clone(),
                    negative: *negative,
                },
                env,
            )
        }
        ProofNode::OneIntro { .. } => {
            let (locus, _) = inter_items(ps)?;
            mk(ProofNode::OneIntro { locus }, env)
        }
        ProofNode::TopIntro { pos } => {
            for p in ps.iter().skip(1) {
                let ProofNode::TopIntro { pos: p2 } = &p.node else {
                    return Err(skel());
                };
                if p2 != pos {
                    return Err(skel());
                }
            }
            let (locus, items) = inter_items(ps)?;
            mk_with_concl(ProofNode::TopIntro { pos: *pos }, Sequent::new(locus, items), env)
        }
        ProofNode::Cut { lpos, rpos, .. } => {
            let mut fam = Vec::new();
            let mut lefts = Vec::new();
            let mut rights = Vec::new();
            for p in ps.iter() {
                let ProofNode::Cut {
                    formula,
                    lpos: l2,
                    rpos: r2,
                    left,
                    right,
                } = &p.node
                else {
                    return Err(skel());
                };
                if l2 != lpos || r2 != rpos {
                    return Err(skel());
                }
                fam.push((p.concl.locus.clone(), formula.clone()));
                lefts.push(&**left);
                rights.push(&**right);
            }
            mk(
                ProofNode::Cut {
                    formula: inter(&fam)?,
                    lpos: *lpos,
                    rpos: *rpos,
                    left: Box::new(zip_proofs(&lefts, env)?),
                    right: Box::new(zip_proofs(&rights, env)?),
                },
                env,
            )
        }
        ProofNode::TensorIntro { p1, p2, out_side, .. } => {
            let mut lefts = Vec::new();
            let mut rights = Vec::new();
            for p in ps.iter() {
                let ProofNode::TensorIntro {
                    p1: a2,
                    p2: b2,
                    out_side: s2,
                    left,
                    right,
                } = &p.node
                else {
                    return Err(skel());
                };
                if a2 != p1 || b2 != p2 || s2 != out_side {
                    return Err(skel());
                }
                lefts.push(&**left);
                rights.push(&**right);
            }
            mk(
                ProofNode::TensorIntro {
                    p1: *p1,
                    p2: *p2,
                    out_side: *out_side,
                    left: Box::new(zip_proofs(&lefts, env)?),
                    right: Box::new(zip_proofs(&rights, env)?),
                },
                env,
            )
        }
        ProofNode::ParIntro { p1, p2, out, .. } => {
            let mut prems = Vec::new();
            for p in ps.iter() {
                let ProofNode::ParIntro {
                    p1: a2,
                    p2: b2,
                    out: o2,
                    prem,
                } = &p.node
                else {
                    return Err(skel());
                };
                if a2 != p1 || b2 != p2 || o2 != out {
                    return Err(skel());
                }
                prems.push(&**prem);
            }
            mk(
                ProofNode::ParIntro {
                    p1: *p1,
                    p2: *p2,
                    out: *out,
                    prem: Box::new(zip_proofs(&prems, env)?),
                },
                env,
            )
        }
        ProofNode::Contraction { keep, drop, .. } => {
            let mut prems = Vec::new();
            for p in ps.iter() {
                let ProofNode::Contraction {
                    keep: k2,
                    drop: d2,
                    prem,
                } = &p.node
                else {
                    return Err(skel());
                };
                if k2 != keep || d2 != drop {
                    return Err(skel());
                }
                prems.push(&**prem);
            }
            mk(
                ProofNode::Contraction {
                    keep: *keep,
                    drop: *drop,
                    prem: Box::new(zip_proofs(&prems, env)?),
                },
                env,
            )
        }
        ProofNode::Weakening { out, .. } => {
            let mut us = Vec::new();
            let mut bodies = Vec::new();
            let mut prems = Vec::new();
            for p in ps.iter() {
                let ProofNode::Weakening { u, body, out: o2, prem } = &p.node else {
                    return Err(skel());
                };
                if o2 != out {
                    return Err(skel());
                }
                us.push(u);
                bodies.push((u.dom().clone(), body.clone()));
                prems.push(&**prem);
            }
            mk(
                ProofNode::Weakening {
                    u: sum(&us),
                    body: inter(&bodies)?,
                    out: *out,
                    prem: Box::new(zip_proofs(&prems, env)?),
                },
                env,
            )
        }
        ProofNode::Dereliction { pos, out, .. } => {
            let mut fs = Vec::new();
            let mut us = Vec::new();
            let mut bodies = Vec::new();
            let mut prems = Vec::new();
            for p in ps.iter() {
                let ProofNode::Dereliction {
                    f,
                    u,
                    body,
                    pos: p2,
                    out: o2,
                    prem,
                } = &p.node
                else {
                    return Err(skel());
                };
                if p2 != pos || o2 != out {
                    return Err(skel());
                }
                fs.push(f);
                us.push(u);
                bodies.push((u.dom().clone(), body.clone()));
                prems.push(&**prem);
            }
            let f_sum = sum(&fs);
            let body_i = inter(&bodies)?;
            let mut prem = zip_proofs(&prems, env)?;
            if let Some(k) = pos {
                prem = mediate(prem, *k, &base_change(&f_sum, &body_i)?, env)?;
            }
            mk(
                ProofNode::Dereliction {
                    f: f_sum,
                    u: sum(&us),
                    body: body_i,
                    pos: *pos,
                    out: *out,
                    prem: Box::new(prem),
                },
                env,
            )
        }
        ProofNode::PlusIntro1 { out, ppos, .. } | ProofNode::PlusIntro2 { out, ppos, .. } => {
            let first = matches!(ps[0].node, ProofNode::PlusIntro1 { .. });
            let mut fam = Vec::new();
            let mut prems = Vec::new();
            for p in ps.iter() {
                let (principal, o2, pp2, prem, f2) = match &p.node {
                    ProofNode::PlusIntro1 {
                        principal,
                        out: o2,
                        ppos: pp2,
                        prem,
                    } => (principal, o2, pp2, prem, true),
                    ProofNode::PlusIntro2 {
                        principal,
                        out: o2,
                        ppos: pp2,
                        prem,
                    } => (principal, o2, pp2, prem, false),
                    _ => return Err(skel()),
                };
                if o2 != out || pp2 != ppos || f2 != first {
                    return Err(skel());
                }
                fam.push((p.concl.locus.clone(), principal.clone()));
                prems.push(&**prem);
            }
            let principal = inter(&fam)?;
            let Formula::Plus(pi, pj, ka, kb) = &principal else {
                return Err(skel());
            };
            let (inj, kept) = if first { (pi, &**ka) } else { (pj, &**kb) };
            let inv = inj.invert().map_err(ProofError::SetFun)?;
            let expected = base_change(&inv, kept)?;
            let mut prem = zip_proofs(&prems, env)?;
            if let Some(k) = ppos {
                prem = mediate(prem, *k, &expected, env)?;
            }
            let node = if first {
                ProofNode::PlusIntro1 {
                    principal,
                    out: *out,
                    ppos: *ppos,
                    prem: Box::new(prem),
                }
            } else {
                ProofNode::PlusIntro2 {
                    principal,
                    out: *out,
                    ppos: *ppos,
                    prem: Box::new(prem),
                }
            };
            mk(node, env)
        }
        ProofNode::WithIntro { out, lpos, rpos, .. } => {
            let mut is = Vec::new();
            let mut js = Vec::new();
            let mut lefts = Vec::new();
            let mut rights = Vec::new();
            for p in ps.iter() {
                let ProofNode::WithIntro {
                    i,
                    j,
                    out: o2,
                    lpos: l2,
                    rpos: r2,
                    left,
                    right,
                } = &p.node
                else {
                    return Err(skel());
                };
                if o2 != out || l2 != lpos || r2 != rpos {
                    return Err(skel());
                }
                is.push(i);
                js.push(j);
                lefts.push(&**left);
                rights.push(&**right);
            }
            let i_sum = sum(&is);
            let j_sum = sum(&js);
            let (locus, items) = inter_items(ps)?;
            let member_ctx: Vec<Vec<Formula>> = ps.iter().map(|p| ctx_effs(p, out.0)).collect();
            let inter_ctx: Vec<Formula> = items
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != out.0)
                .map(|(_, it)| eff(it))
                .collect();
            let left = zip_proofs(&lefts, env)?;
            let left = mediate_context(
                left, &lefts, &member_ctx, &inter_ctx, &is, &i_sum, *lpos, env,
            )?;
            let right = zip_proofs(&rights, env)?;
            let right = mediate_context(
                right, &rights, &member_ctx, &inter_ctx, &js, &j_sum, *rpos, env,
            )?;
            mk_with_concl(
                ProofNode::WithIntro {
                    i: i_sum,
                    j: j_sum,
                    out: *out,
                    lpos: *lpos,
                    rpos: *rpos,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                Sequent::new(locus, items),
                env,
            )
        }
        ProofNode::Promotion { out, prem_pos, .. } => {
            let mut vs = Vec::new();
            let mut prems = Vec::new();
            for p in ps.iter() {
                let ProofNode::Promotion {
                    v,
                    out: o2,
                    prem_pos: pp2,
                    prem,
                } = &p.node
                else {
                    return Err(skel());
                };
                if o2 != out || pp2 != prem_pos {
                    return Err(skel());
                }
                vs.push(v);
                prems.push(&**prem);
            }
            let v_sum = sum(&vs);
            let (locus, items) = inter_items(ps)?;
            let member_ctx: Vec<Vec<Formula>> = ps.iter().map(|p| ctx_effs(p, out.0)).collect();
            let inter_ctx: Vec<Formula> = items
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != out.0)
                .map(|(_, it)| eff(it))
                .collect();
            let prem = zip_proofs(&prems, env)?;
            let prem = mediate_context(
                prem, &prems, &member_ctx, &inter_ctx, &vs, &v_sum, *prem_pos, env,
            )?;
            mk_with_concl(
                ProofNode::Promotion {
                    v: v_sum,
                    out: *out,
                    prem_pos: *prem_pos,
                    prem: Box::new(prem),
                },
                Sequent::new(locus, items),
                env,
            )
        }
        ProofNode::SubtypeStep { .. } | ProofNode::BaseChangeStep { .. } => Err(skel()),
    }
}

/// Whether a proof of `A ⊢ A'` (with `A` and `A'` refining the same erased
/// formula) erases to the η-expanded identity proof, up to occurrence
/// bookkeeping and up to cuts against identity subproofs. The conclusion
/// must consist of at most one occurrence per side; missing occurrences are
/// read as dropped units.
pub fn collapses_to_identity(p: &Proof) -> Result<bool, ProofError> {
    if p.concl.items.len() > 2 {
        return Err(ProofError::WrongShape);
    }
    let mut left = None;
    let mut right = None;
    for (s, f) in &p.concl.items {
        let slot = match s {
            Side::Left => &mut left,
            Side::Right => &mut right,
        };
        if slot.replace(f.clone()).is_some() {
            return Err(ProofError::WrongShape);
        }
    }
    let lf = left.unwrap_or(Formula::One);
    let rf = right.unwrap_or(Formula::Bot);
    if lf.erase() != rf.erase() {
        return Ok(false);
    }
    ll_is_identity(&erase_proof(p), &lf.erase()).map_err(|e| bad(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derived::bc_over_proof;
    use crate::llproof::check_ll;
    use crate::proof::{canonical_items, check_proof};
    use crate::setfun::{atoms, unit_locus};

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

    fn expect_two_sided(p: &Proof, lhs: &Formula, rhs: &Formula) {
        assert_eq!(
            canonical_items(&p.concl.items),
            canonical_items(&[(Side::Left, lhs.clone()), (Side::Right, rhs.clone())])
        );
    }

    #[test]
    fn seely_proofs_check_in_both_directions() {
        let e = env();
        let xl = atoms(&["p", "q"]);
        let il = atoms(&["s", "t"]);
        let jl = atoms(&["a1", "a2"]);
        let kl = atoms(&["b1"]);
        let u = map(&jl, &il, &[("a1", "s"), ("a2", "t")]);
        let v = map(&kl, &il, &[("b1", "s")]);
        let a = Formula::tensor(pv(map(&jl, &xl, &[("a1", "p"), ("a2", "q")])), Formula::One);
        let b = Formula::quest(SetFun::identity(&kl), pv(map(&kl, &xl, &[("b1", "q")])));
        let (fwd, bwd) = seely(&u, &v, &a, &b, &e).unwrap();
        check_proof(&fwd, &e).unwrap();
        check_proof(&bwd, &e).unwrap();
        check_ll(&erase_proof(&fwd)).unwrap();
        check_ll(&erase_proof(&bwd)).unwrap();
        let cp = coproduct(&jl, &kl);
        let big = Formula::bang(
            copair(&u, &v).unwrap(),
            Formula::with(cp.inl.clone(), cp.inr.clone(), a.clone(), b.clone()),
        );
        let tensor = Formula::tensor(Formula::bang(u, a), Formula::bang(v, b));
        assert_eq!(fwd.concl.locus, il);
        expect_two_sided(&fwd, &tensor, &big);
        expect_two_sided(&bwd, &big, &tensor);
    }

    #[test]
    fn seely_degenerates_to_the_empty_index() {
        let e = env();
        let il = atoms(&["s"]);
        let u = SetFun::init(&il);
        let v = SetFun::init(&il);
        let a = pv(SetFun::init(&atoms(&["p", "q"])));
        let (fwd, bwd) = seely(&u, &v, &a, &a, &e).unwrap();
        check_proof(&fwd, &e).unwrap();
        check_proof(&bwd, &e).unwrap();
    }

    #[test]
    fn distrib_proofs_check_in_both_directions() {
        let e = env();
        let xl = atoms(&["p", "q"]);
        let il = atoms(&["s", "t"]);
        let jl = atoms(&["j1"]);
        let kl = atoms(&["k1"]);
        let i = map(&jl, &il, &[("j1", "s")]);
        let j = map(&kl, &il, &[("k1", "t")]);
        let a = Formula::par(
            pv(map(&il, &xl, &[("s", "p"), ("t", "q")])),
            Formula::bang(SetFun::identity(&il), Formula::One),
        );
        let b = pv(map(&jl, &xl, &[("j1", "p")]));
        let c = Formula::tensor(pv(map(&kl, &xl, &[("k1", "q")])), Formula::Bot);
        let (fwd, bwd) = distrib(&a, &i, &j, &b, &c, &e).unwrap();
        check_proof(&fwd, &e).unwrap();
        check_proof(&bwd, &e).unwrap();
        check_ll(&erase_proof(&fwd)).unwrap();
        check_ll(&erase_proof(&bwd)).unwrap();
        let plus_bc = Formula::plus(i.clone(), j.clone(), b.clone(), c.clone());
        let lhs = Formula::tensor(a.clone(), plus_bc);
        let rhs = Formula::plus(
            i.clone(),
            j.clone(),
            Formula::tensor(base_change(&i, &a).unwrap(), b),
            Formula::tensor(base_change(&j, &a).unwrap(), c),
        );
        expect_two_sided(&fwd, &lhs, &rhs);
        expect_two_sided(&bwd, &rhs, &lhs);
    }

    #[test]
    fn distrib_with_an_empty_summand() {
        let e = env();
        let il = atoms(&["s"]);
        let jl = atoms(&["j1"]);
        let i = map(&jl, &il, &[("j1", "s")]);
        let j = SetFun::init(&il);
        let a = pv(map(&il, &atoms(&["p", "q"]), &[("s", "p")]));
        let b = Formula::One;
        let c = Formula::Top;
        let (fwd, bwd) = distrib(&a, &i, &j, &b, &c, &e).unwrap();
        check_proof(&fwd, &e).unwrap();
        check_proof(&bwd, &e).unwrap();
    }

    #[test]
    fn intersection_of_axioms_copairs_the_annotations() {
        let e = env();
        let ul = unit_locus();
        let xl = atoms(&["p", "q"]);
        let f1 = map(&ul, &xl, &[("*", "p")]);
        let f2 = map(&ul, &xl, &[("*", "q")]);
        let mk_ax = |f: &SetFun| {
            mk(
                ProofNode::Ax {
                    f: f.clone(),
                    var: "X".to_string(),
                    negative: false,
                },
                &e,
            )
            .unwrap()
        };
        let family = vec![(ul.clone(), mk_ax(&f1)), (ul.clone(), mk_ax(&f2))];
        let p = intersect_proofs(&family, &e).unwrap();
        check_proof(&p, &e).unwrap();
        assert_eq!(p.concl.locus.len(), 2);
        // restricting along each injection gives back the member up to the
        // subtyping preorder (here even up to equality of annotations)
        let inj = intersect(&[
            (ul.clone(), pv(f1.clone())),
            (ul.clone(), pv(f2.clone())),
        ])
        .unwrap()
        .injections;
        for (k, f) in [(0usize, &f1), (1usize, &f2)] {
            let r = bc_over_proof(&inj[k], &p, &e).unwrap();
            check_proof(&r, &e).unwrap();
            let target = mk_ax(f);
            // the annotations agree after composing with the injection
            assert_eq!(
                erase_proof(&r),
                erase_proof(&target)
            );
            assert_eq!(
                canonical_items(&r.concl.items)
                    .iter()
                    .map(|f| f.erase())
                    .collect::<Vec<_>>(),
                canonical_items(&target.concl.items)
                    .iter()
                    .map(|f| f.erase())
                    .collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn intersection_of_unit_proofs() {
        let e = env();
        let p1 = mk(
            ProofNode::OneIntro {
                locus: unit_locus(),
            },
            &e,
        )
        .unwrap();
        let p2 = mk(
            ProofNode::OneIntro {
                locus: atoms(&["z1", "z2"]),
            },
            &e,
        )
        .unwrap();
        let family = vec![
            (unit_locus(), p1),
            (atoms(&["z1", "z2"]), p2),
        ];
        let p = intersect_proofs(&family, &e).unwrap();
        check_proof(&p, &e).unwrap();
        assert_eq!(p.concl.locus.len(), 3);
        assert_eq!(canonical_items(&p.concl.items), vec![Formula::One]);
    }

    #[test]
    fn intersection_of_exponential_identities_mediates_the_reindexing() {
        let e = env();
        let xl = atoms(&["p", "q"]);
        let ul = unit_locus();
        let j1 = atoms(&["e1"]);
        let j2 = atoms(&["e1", "e2"]);
        let u1 = SetFun::terminal(&j1);
        let u2 = SetFun::terminal(&j2);
        let a1 = Formula::bang(u1, pv(map(&j1, &xl, &[("e1", "p")])));
        let a2 = Formula::bang(u2, pv(map(&j2, &xl, &[("e1", "p"), ("e2", "q")])));
        let t1 = identity_proof(&ul, &a1, &e).unwrap();
        let t2 = identity_proof(&ul, &a2, &e).unwrap();
        let family = vec![(ul.clone(), t1.proof), (ul.clone(), t2.proof)];
        let p = intersect_proofs(&family, &e).unwrap();
        check_proof(&p, &e).unwrap();
        let expected = inter(&[(ul.clone(), a1), (ul, a2)]).unwrap();
        assert_eq!(
            canonical_items(&p.concl.items),
            canonical_items(&[
                (Side::Left, expected.clone()),
                (Side::Right, expected)
            ])
        );
    }

    #[test]
    fn intersection_of_additive_identities() {
        let e = env();
        let xl = atoms(&["p", "q"]);
        let il = atoms(&["s", "t"]);
        let jl = atoms(&["j1"]);
        let kl = atoms(&["k1"]);
        let i = map(&jl, &il, &[("j1", "s")]);
        let j = map(&kl, &il, &[("k1", "t")]);
        let w1 = Formula::with(
            i.clone(),
            j.clone(),
            pv(map(&jl, &xl, &[("j1", "p")])),
            pv(map(&kl, &xl, &[("k1", "q")])),
        );
        let i2 = map(&jl, &il, &[("j1", "t")]);
        let j2 = map(&kl, &il, &[("k1", "s")]);
        let w2 = Formula::with(
            i2,
            j2,
            pv(map(&jl, &xl, &[("j1", "q")])),
            pv(map(&kl, &xl, &[("k1", "p")])),
        );
        let t1 = identity_proof(&il, &w1, &e).unwrap();
        let t2 = identity_proof(&il, &w2, &e).unwrap();
        let family = vec![(il.clone(), t1.proof), (il.clone(), t2.proof)];
        let p = intersect_proofs(&family, &e).unwrap();
        check_proof(&p, &e).unwrap();
        let expected = inter(&[(il.clone(), w1), (il, w2)]).unwrap();
        assert_eq!(
            canonical_items(&p.concl.items),
            canonical_items(&[
                (Side::Left, expected.clone()),
                (Side::Right, expected)
            ])
        );
    }

    #[test]
    fn skeleton_mismatch_is_reported() {
        let e = env();
        let ul = unit_locus();
        let one = mk(ProofNode::OneIntro { locus: ul.clone() }, &e).unwrap();
        let ax = mk(
            ProofNode::Ax {
                f: map(&ul, &atoms(&["p", "q"]), &[("*", "p")]),
                var: "X".to_string(),
                negative: false,
            },
            &e,
        )
        .unwrap();
        let family = vec![(ul.clone(), one), (ul, ax)];
        assert!(matches!(
            intersect_proofs(&family, &e),
            Err(ProofError::SkeletonMismatch)
        ));
    }

    #[test]
    fn identity_collapse_is_recognized() {
        let e = env();
        let il = atoms(&["s", "t"]);
        let xl = atoms(&["p", "q"]);
        let u = map(&il, &il, &[("s", "t"), ("t", "s")]);
        let a = Formula::tensor(
            Formula::quest(u, pv(map(&il, &xl, &[("s", "p"), ("t", "q")]))),
            Formula::One,
        );
        let t = identity_proof(&il, &a, &e).unwrap();
        assert!(collapses_to_identity(&t.proof).unwrap());
    }

    #[test]
    fn identity_collapse_rejects_detours_and_mismatches() {
        let e = env();
        let il = atoms(&["s"]);
        let xl = atoms(&["p", "q"]);
        let q = Formula::quest(
            SetFun::identity(&il),
            pv(map(&il, &xl, &[("s", "p")])),
        );
        let t = identity_proof(&il, &q, &e).unwrap();
        assert!(collapses_to_identity(&t.proof).unwrap());
        // weaken in a copy and contract it away: same sequent, not the
        // identity proof
        let Formula::Quest(u, body) = &q else { panic!() };
        let w = mk(
            ProofNode::Weakening {
                u: u.clone(),
                body: (**body).clone(),
                out: (2, Side::Right),
                prem: Box::new(t.proof),
            },
            &e,
        )
        .unwrap();
        let c = mk(
            ProofNode::Contraction {
                keep: 1,
                drop: 2,
                prem: Box::new(w),
            },
            &e,
        )
        .unwrap();
        check_proof(&c, &e).unwrap();
        assert!(!collapses_to_identity(&c).unwrap());
        // three occurrences are not a two-sided judgement
        let w3 = mk(
            ProofNode::Weakening {
                u: u.clone(),
                body: (**body).clone(),
                out: (2, Side::Right),
                prem: Box::new(c),
            },
            &e,
        )
        .unwrap();
        assert!(matches!(
            collapses_to_identity(&w3),
            Err(ProofError::WrongShape)
        ));
        // different refinements of the same erasure still collapse; a
        // different erasure on the two sides does not
        let widened = identity_proof(&il, &q, &e).unwrap();
        let rho = decide_subtype(
            &il,
            &q,
            &Formula::quest(SetFun::identity(&il), pv(map(&il, &xl, &[("s", "q")]))),
            100_000,
        );
        // the two refinements are unrelated, so no witness exists; the
        // plain identity still collapses
        assert!(rho.unwrap().is_none());
        assert!(collapses_to_identity(&widened.proof).unwrap());
    }
}
