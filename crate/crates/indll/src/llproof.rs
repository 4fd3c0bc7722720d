//! Plain classical linear-logic proofs, used as the target of annotation
//! erasure and as an independent validation layer.
//!
//! Sequents are two-sided ordered lists of formulae, compared up to the
//! usual symmetries: a formula on the left is the same sequent datum as its
//! negation on the right, and unit occurrences that carry no content (a `1`
//! on the left, equivalently a `⊥` on the right) may be dropped. Rules read
//! formulae through their right-hand effective value (the stored formula on
//! the right, its negation on the left), point at occurrences by position,
//! and place their principal occurrence at an explicit (position, side).
//! A position of `None` denotes a dropped unit occurrence.

use crate::formula::LLFormula;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

pub type LLItem = (Side, LLFormula);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LLError {
    #[error("position {0} out of range")]
    BadPosition(usize),
    #[error("rule does not match the pointed formula: {0}")]
    RuleMismatch(String),
    #[error("cached conclusion differs from the computed one: {0}")]
    BadCache(String),
}

/// The value a rule sees at a position: the formula itself on the right, its
/// negation for a formula stored on the left.
pub fn eff_ll(item: &LLItem) -> LLFormula {
    match item.0 {
        Side::Right => item.1.clone(),
        Side::Left => item.1.negate(),
    }
}

/// Store an effective (right-reading) value on the given side.
pub fn phys_ll(side: Side, eff: LLFormula) -> LLItem {
    match side {
        Side::Right => (side, eff),
        Side::Left => (side, eff.negate()),
    }
}

/// Canonical multiset of a sequent: everything read on the right, inert
/// unit occurrences removed, sorted.
pub fn canonical_ll(items: &[LLItem]) -> Vec<LLFormula> {
    let mut v: Vec<LLFormula> = items
        .iter()
        .map(eff_ll)
        .filter(|f| *f != LLFormula::Bot)
        .collect();
    v.sort();
    v
}

pub(crate) fn remove_at(items: &[LLItem], pos: Option<usize>) -> Result<Vec<LLItem>, LLError> {
    match pos {
        None => Ok(items.to_vec()),
        Some(k) => {
            if k >= items.len() {
                return Err(LLError::BadPosition(k));
            }
            let mut v = items.to_vec();
            v.remove(k);
            Ok(v)
        }
    }
}

pub(crate) fn eff_at(items: &[LLItem], pos: Option<usize>) -> Result<LLFormula, LLError> {
    match pos {
        None => Ok(LLFormula::Bot),
        Some(k) => items.get(k).map(eff_ll).ok_or(LLError::BadPosition(k)),
    }
}

pub(crate) fn insert_at(
    mut items: Vec<LLItem>,
    out: (usize, Side),
    eff: LLFormula,
) -> Result<Vec<LLItem>, LLError> {
    if out.0 > items.len() {
        return Err(LLError::BadPosition(out.0));
    }
    items.insert(out.0, phys_ll(out.1, eff));
    Ok(items)
}

/// An erased proof with its cached conclusion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LLProof {
    pub items: Vec<LLItem>,
    pub node: LLNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LLNode {
    Ax {
        var: String,
        negative: bool,
    },
    Cut {
        formula: LLFormula,
        lpos: Option<usize>,
        rpos: Option<usize>,
        left: Box<LLProof>,
        right: Box<LLProof>,
    },
    OneIntro,
    TensorIntro {
        p1: Option<usize>,
        p2: Option<usize>,
        out_side: Side,
        left: Box<LLProof>,
        right: Box<LLProof>,
    },
    ParIntro {
        p1: Option<usize>,
        p2: Option<usize>,
        out: (usize, Side),
        prem: Box<LLProof>,
    },
    TopIntro {
        pos: usize,
    },
    WithIntro {
        out: (usize, Side),
        lpos: Option<usize>,
        rpos: Option<usize>,
        left: Box<LLProof>,
        right: Box<LLProof>,
    },
    PlusIntro1 {
        principal: LLFormula,
        out: (usize, Side),
        ppos: Option<usize>,
        prem: Box<LLProof>,
    },
    PlusIntro2 {
        principal: LLFormula,
        out: (usize, Side),
        ppos: Option<usize>,
        prem: Box<LLProof>,
    },
    Contraction {
        keep: usize,
        drop: usize,
        prem: Box<LLProof>,
    },
    Dereliction {
        pos: Option<usize>,
        out: (usize, Side),
        body: LLFormula,
        prem: Box<LLProof>,
    },
    Weakening {
        body: LLFormula,
        out: (usize, Side),
        prem: Box<LLProof>,
    },
    Promotion {
        out: (usize, Side),
        prem_pos: Option<usize>,
        prem: Box<LLProof>,
    },
}

impl LLProof {
    pub fn size(&self) -> usize {
        1 + ll_premises(&self.node)
            .iter()
            .map(|p| p.size())
            .sum::<usize>()
    }
}

pub fn ll_premises(node: &LLNode) -> Vec<&LLProof> {
    match node {
        LLNode::Cut { left, right, .. }
        | LLNode::TensorIntro { left, right, .. }
        | LLNode::WithIntro { left, right, .. } => vec![left, right],
        LLNode::ParIntro { prem, .. }
        | LLNode::PlusIntro1 { prem, .. }
        | LLNode::PlusIntro2 { prem, .. }
        | LLNode::Contraction { prem, .. }
        | LLNode::Dereliction { prem, .. }
        | LLNode::Weakening { prem, .. }
        | LLNode::Promotion { prem, .. } => vec![prem],
        _ => vec![],
    }
}

/// Compute the conclusion items determined by a node and its (already
/// accepted) premises. Shared by the checker and the builders. `TopIntro`
/// is the one rule whose context is free, so it has no computed conclusion
/// and is handled by the checker directly.
pub fn ll_conclusion(node: &LLNode) -> Result<Vec<LLItem>, LLError> {
    match node {
        LLNode::Ax { var, negative } => {
            let v = if *negative {
                LLFormula::NVar(var.clone())
            } else {
                LLFormula::Var(var.clone())
            };
            Ok(vec![(Side::Left, v.clone()), (Side::Right, v)])
        }
        LLNode::Cut {
            formula,
            lpos,
            rpos,
            left,
            right,
        } => {
            if eff_at(&left.items, *lpos)? != *formula {
                return Err(LLError::RuleMismatch("cut left premise".into()));
            }
            if eff_at(&right.items, *rpos)? != formula.negate() {
                return Err(LLError::RuleMismatch("cut right premise".into()));
            }
            let mut items = remove_at(&left.items, *lpos)?;
            items.extend(remove_at(&right.items, *rpos)?);
            Ok(items)
        }
        LLNode::OneIntro => Ok(vec![(Side::Right, LLFormula::One)]),
        LLNode::TensorIntro {
            p1,
            p2,
            out_side,
            left,
            right,
        } => {
            let a = eff_at(&left.items, *p1)?;
            let b = eff_at(&right.items, *p2)?;
            let mut items = remove_at(&left.items, *p1)?;
            items.extend(remove_at(&right.items, *p2)?);
            items.push(phys_ll(
                *out_side,
                LLFormula::Tensor(Box::new(a), Box::new(b)),
            ));
            Ok(items)
        }
        LLNode::ParIntro { p1, p2, out, prem } => {
            if p1.is_some() && p1 == p2 {
                return Err(LLError::RuleMismatch("par on a single occurrence".into()));
            }
            let a = eff_at(&prem.items, *p1)?;
            let b = eff_at(&prem.items, *p2)?;
            let items: Vec<LLItem> = prem
                .items
                .iter()
                .enumerate()
                .filter(|(k, _)| Some(*k) != *p1 && Some(*k) != *p2)
                .map(|(_, it)| it.clone())
                .collect();
            insert_at(items, *out, LLFormula::Par(Box::new(a), Box::new(b)))
        }
        LLNode::TopIntro { .. } => Err(LLError::RuleMismatch(
            "top introduction has no computable conclusion".into(),
        )),
        LLNode::WithIntro {
            out,
            lpos,
            rpos,
            left,
            right,
        } => {
            let a = eff_at(&left.items, *lpos)?;
            let b = eff_at(&right.items, *rpos)?;
            let ctx = remove_at(&left.items, *lpos)?;
            let rctx = remove_at(&right.items, *rpos)?;
            if canonical_ll(&ctx) != canonical_ll(&rctx) {
                return Err(LLError::RuleMismatch(
                    "additive premises have different contexts".into(),
                ));
            }
            insert_at(ctx, *out, LLFormula::With(Box::new(a), Box::new(b)))
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
            let (a, b) = match principal {
                LLFormula::Plus(a, b) => (a, b),
                _ => return Err(LLError::RuleMismatch("sum introduction".into())),
            };
            let kept = if matches!(node, LLNode::PlusIntro1 { .. }) {
                a
            } else {
                b
            };
            if eff_at(&prem.items, *ppos)? != **kept {
                return Err(LLError::RuleMismatch("sum introduction premise".into()));
            }
            let items = remove_at(&prem.items, *ppos)?;
            insert_at(items, *out, principal.clone())
        }
        LLNode::Contraction { keep, drop, prem } => {
            if keep == drop {
                return Err(LLError::RuleMismatch(
                    "contraction on one occurrence".into(),
                ));
            }
            let a = eff_at(&prem.items, Some(*keep))?;
            let b = eff_at(&prem.items, Some(*drop))?;
            if a != b || !matches!(a, LLFormula::Quest(_)) {
                return Err(LLError::RuleMismatch("contraction occurrences".into()));
            }
            remove_at(&prem.items, Some(*drop))
        }
        LLNode::Dereliction {
            pos,
            out,
            body,
            prem,
        } => {
            if eff_at(&prem.items, *pos)? != *body {
                return Err(LLError::RuleMismatch("dereliction premise".into()));
            }
            let items = remove_at(&prem.items, *pos)?;
            insert_at(items, *out, LLFormula::Quest(Box::new(body.clone())))
        }
        LLNode::Weakening { body, out, prem } => insert_at(
            prem.items.clone(),
            *out,
            LLFormula::Quest(Box::new(body.clone())),
        ),
        LLNode::Promotion {
            out,
            prem_pos,
            prem,
        } => {
            let body = eff_at(&prem.items, *prem_pos)?;
            let ctx = remove_at(&prem.items, *prem_pos)?;
            for f in canonical_ll(&ctx) {
                if !matches!(f, LLFormula::Quest(_)) {
                    return Err(LLError::RuleMismatch(
                        "promotion context is not banged".into(),
                    ));
                }
            }
            insert_at(ctx, *out, LLFormula::Bang(Box::new(body)))
        }
    }
}

/// Validate a proof bottom-up: every cached conclusion must equal the
/// computed one exactly.
pub fn check_ll(p: &LLProof) -> Result<(), LLError> {
    for sub in ll_premises(&p.node) {
        check_ll(sub)?;
    }
    if let LLNode::TopIntro { pos } = &p.node {
        if eff_at(&p.items, Some(*pos))? != LLFormula::Top {
            return Err(LLError::RuleMismatch("top introduction".into()));
        }
        return Ok(());
    }
    let computed = ll_conclusion(&p.node)?;
    if computed != p.items {
        return Err(LLError::BadCache(format!(
            "expected {computed:?}, cached {:?}",
            p.items
        )));
    }
    Ok(())
}

/// Build a node into a proof by computing its conclusion.
pub fn ll_mk(node: LLNode) -> Result<LLProof, LLError> {
    let items = ll_conclusion(&node)?;
    Ok(LLProof { items, node })
}

fn adjust(pos: Option<usize>, removed: Option<usize>) -> Option<usize> {
    match (pos, removed) {
        (Some(p), Some(r)) if p > r => Some(p - 1),
        (p, _) => p,
    }
}

/// The η-expanded identity proof of `A ⊢ A`. Returns the proof together
/// with the positions of the left and right occurrence of `A`; a position
/// is `None` when the occurrence is a dropped unit (the left one for `1`,
/// the right one for `⊥`). The conclusion always has at most two items.
pub fn ll_identity(a: &LLFormula) -> Result<(LLProof, Option<usize>, Option<usize>), LLError> {
    match a {
        LLFormula::Var(x) => Ok((
            ll_mk(LLNode::Ax {
                var: x.clone(),
                negative: false,
            })?,
            Some(0),
            Some(1),
        )),
        LLFormula::NVar(x) => Ok((
            ll_mk(LLNode::Ax {
                var: x.clone(),
                negative: true,
            })?,
            Some(0),
            Some(1),
        )),
        LLFormula::One => Ok((ll_mk(LLNode::OneIntro)?, None, Some(0))),
        LLFormula::Bot => Ok((ll_mk(LLNode::OneIntro)?, Some(0), None)),
        LLFormula::Zero => Ok((
            LLProof {
                items: vec![
                    (Side::Left, LLFormula::Zero),
                    (Side::Right, LLFormula::Zero),
                ],
                node: LLNode::TopIntro { pos: 0 },
            },
            Some(0),
            Some(1),
        )),
        LLFormula::Top => Ok((
            LLProof {
                items: vec![(Side::Left, LLFormula::Top), (Side::Right, LLFormula::Top)],
                node: LLNode::TopIntro { pos: 1 },
            },
            Some(0),
            Some(1),
        )),
        LLFormula::Tensor(x, y) => {
            let (pi1, l1, r1) = ll_identity(x)?;
            let (pi2, l2, r2) = ll_identity(y)?;
            let off = pi1.items.len() - usize::from(r1.is_some());
            let t = ll_mk(LLNode::TensorIntro {
                p1: r1,
                p2: r2,
                out_side: Side::Right,
                left: Box::new(pi1),
                right: Box::new(pi2),
            })?;
            let a1 = adjust(l1, r1);
            let a2 = adjust(l2, r2).map(|k| k + off);
            let par = ll_mk(LLNode::ParIntro {
                p1: a1,
                p2: a2,
                out: (0, Side::Left),
                prem: Box::new(t),
            })?;
            Ok((par, Some(0), Some(1)))
        }
        LLFormula::Par(x, y) => {
            let (pi1, l1, r1) = ll_identity(x)?;
            let (pi2, l2, r2) = ll_identity(y)?;
            let off = pi1.items.len() - usize::from(l1.is_some());
            let t = ll_mk(LLNode::TensorIntro {
                p1: l1,
                p2: l2,
                out_side: Side::Left,
                left: Box::new(pi1),
                right: Box::new(pi2),
            })?;
            let a1 = adjust(r1, l1);
            let a2 = adjust(r2, l2).map(|k| k + off);
            let par = ll_mk(LLNode::ParIntro {
                p1: a1,
                p2: a2,
                out: (1, Side::Right),
                prem: Box::new(t),
            })?;
            Ok((par, Some(0), Some(1)))
        }
        LLFormula::With(x, y) => {
            // branch k: (&(x,y) read on the left) ⊢ component, by selecting
            // the k-th summand of the dual sum on the left
            let principal = LLFormula::Plus(Box::new(x.negate()), Box::new(y.negate()));
            let mk_branch =
                |comp: &LLFormula, first: bool| -> Result<(LLProof, Option<usize>), LLError> {
                    let (p, l, r) = ll_identity(comp)?;
                    let node = if first {
                        LLNode::PlusIntro1 {
                            principal: principal.clone(),
                            out: (0, Side::Left),
                            ppos: l,
                            prem: Box::new(p),
                        }
                    } else {
                        LLNode::PlusIntro2 {
                            principal: principal.clone(),
                            out: (0, Side::Left),
                            ppos: l,
                            prem: Box::new(p),
                        }
                    };
                    Ok((ll_mk(node)?, adjust(r, l).map(|k| k + 1)))
                };
            let (bl, rl) = mk_branch(x, true)?;
            let (br, rr) = mk_branch(y, false)?;
            let w = ll_mk(LLNode::WithIntro {
                out: (1, Side::Right),
                lpos: rl,
                rpos: rr,
                left: Box::new(bl),
                right: Box::new(br),
            })?;
            Ok((w, Some(0), Some(1)))
        }
        LLFormula::Plus(x, y) => {
            // branch k: component ⊢ x ⊕ y, then assemble the dual product
            // on the left
            let principal = a.clone();
            let mk_branch =
                |comp: &LLFormula, first: bool| -> Result<(LLProof, Option<usize>), LLError> {
                    let (p, l, r) = ll_identity(comp)?;
                    let at = p.items.len() - usize::from(r.is_some());
                    let node = if first {
                        LLNode::PlusIntro1 {
                            principal: principal.clone(),
                            out: (at, Side::Right),
                            ppos: r,
                            prem: Box::new(p),
                        }
                    } else {
                        LLNode::PlusIntro2 {
                            principal: principal.clone(),
                            out: (at, Side::Right),
                            ppos: r,
                            prem: Box::new(p),
                        }
                    };
                    Ok((ll_mk(node)?, adjust(l, r)))
                };
            let (bl, ll) = mk_branch(x, true)?;
            let (br, lr) = mk_branch(y, false)?;
            let w = ll_mk(LLNode::WithIntro {
                out: (0, Side::Left),
                lpos: ll,
                rpos: lr,
                left: Box::new(bl),
                right: Box::new(br),
            })?;
            Ok((w, Some(0), Some(1)))
        }
        LLFormula::Bang(x) => {
            let (p, l, r) = ll_identity(x)?;
            let d = ll_mk(LLNode::Dereliction {
                pos: l,
                out: (0, Side::Left),
                body: x.negate(),
                prem: Box::new(p),
            })?;
            let pr = ll_mk(LLNode::Promotion {
                out: (1, Side::Right),
                prem_pos: adjust(r, l).map(|k| k + 1),
                prem: Box::new(d),
            })?;
            Ok((pr, Some(0), Some(1)))
        }
        LLFormula::Quest(x) => {
            let (p, l, r) = ll_identity(x)?;
            let d = ll_mk(LLNode::Dereliction {
                pos: r,
                out: (p.items.len() - usize::from(r.is_some()), Side::Right),
                body: (**x).clone(),
                prem: Box::new(p),
            })?;
            let pr = ll_mk(LLNode::Promotion {
                out: (0, Side::Left),
                prem_pos: adjust(l, r),
                prem: Box::new(d),
            })?;
            Ok((pr, Some(0), Some(1)))
        }
    }
}

/// For each premise of `p`, where each premise item ends up in the
/// conclusion: `flow[r] = Some(c)` when premise item `r` survives as
/// conclusion item `c`, `None` when the rule consumes it. The right premise
/// of `WithIntro` is matched canonically by the checker, so its flow is all
/// `None` and callers must pair its context by value instead.
fn premise_flows(p: &LLProof) -> Vec<Vec<Option<usize>>> {
    fn rm_map(len: usize, pos: Option<usize>) -> Vec<Option<usize>> {
        (0..len)
            .map(|r| match pos {
                Some(k) if r == k => None,
                Some(k) if r > k => Some(r - 1),
                _ => Some(r),
            })
            .collect()
    }
    fn after_insert(v: Vec<Option<usize>>, at: usize) -> Vec<Option<usize>> {
        v.into_iter()
            .map(|c| c.map(|c| if c >= at { c + 1 } else { c }))
            .collect()
    }
    match &p.node {
        LLNode::Cut {
            lpos,
            rpos,
            left,
            right,
            ..
        } => {
            let off = left.items.len() - usize::from(lpos.is_some());
            let rf = rm_map(right.items.len(), *rpos)
                .into_iter()
                .map(|c| c.map(|c| c + off))
                .collect();
            vec![rm_map(left.items.len(), *lpos), rf]
        }
        LLNode::TensorIntro {
            p1,
            p2,
            left,
            right,
            ..
        } => {
            let off = left.items.len() - usize::from(p1.is_some());
            let rf = rm_map(right.items.len(), *p2)
                .into_iter()
                .map(|c| c.map(|c| c + off))
                .collect();
            vec![rm_map(left.items.len(), *p1), rf]
        }
        LLNode::ParIntro { p1, p2, out, prem } => {
            let mut flow = Vec::with_capacity(prem.items.len());
            let mut next = 0usize;
            for r in 0..prem.items.len() {
                if Some(r) == *p1 || Some(r) == *p2 {
                    flow.push(None);
                } else {
                    flow.push(Some(next));
                    next += 1;
                }
            }
            vec![after_insert(flow, out.0)]
        }
        LLNode::WithIntro {
            out,
            lpos,
            left,
            right,
            ..
        } => {
            vec![
                after_insert(rm_map(left.items.len(), *lpos), out.0),
                vec![None; right.items.len()],
            ]
        }
        LLNode::PlusIntro1 { out, ppos, prem, .. } | LLNode::PlusIntro2 { out, ppos, prem, .. } => {
            vec![after_insert(rm_map(prem.items.len(), *ppos), out.0)]
        }
        LLNode::Contraction { drop, prem, .. } => {
            vec![rm_map(prem.items.len(), Some(*drop))]
        }
        LLNode::Dereliction { pos, out, prem, .. } => {
            vec![after_insert(rm_map(prem.items.len(), *pos), out.0)]
        }
        LLNode::Weakening { out, prem, .. } => {
            vec![after_insert((0..prem.items.len()).map(Some).collect(), out.0)]
        }
        LLNode::Promotion {
            out,
            prem_pos,
            prem,
        } => {
            vec![after_insert(rm_map(prem.items.len(), *prem_pos), out.0)]
        }
        _ => vec![],
    }
}

/// Equivalence of proofs under an explicit correspondence `sigma` of
/// conclusion positions (`sigma[r]` is the `q`-position paired with the
/// `p`-position `r`). Items are compared by effective value, so an
/// occurrence stored on one side in `p` may correspond to its negation
/// stored on the other side in `q`. A cut in `p` whose one premise is an
/// identity proof of the cut formula may be bypassed entirely.
fn eq_ll(p: &LLProof, q: &LLProof, sigma: &[usize]) -> bool {
    if p.items.len() != q.items.len() || sigma.len() != p.items.len() {
        return false;
    }
    for (r, &s) in sigma.iter().enumerate() {
        if s >= q.items.len() || eff_ll(&p.items[r]) != eff_ll(&q.items[s]) {
            return false;
        }
    }
    if matches!(p.node, LLNode::Cut { .. }) {
        if matches!(q.node, LLNode::Cut { .. }) && eq_nodes(p, q, sigma) {
            return true;
        }
        return cut_bypass(p, q, sigma);
    }
    eq_nodes(p, q, sigma)
}

fn eq_nodes(p: &LLProof, q: &LLProof, sigma: &[usize]) -> bool {
    use LLNode::*;
    let pf = premise_flows(p);
    let qf = premise_flows(q);
    match (&p.node, &q.node) {
        (
            Ax {
                var: v1,
                negative: n1,
            },
            Ax {
                var: v2,
                negative: n2,
            },
        ) => v1 == v2 && n1 == n2,
        (OneIntro, OneIntro) => true,
        (TopIntro { pos: a }, TopIntro { pos: b }) => sigma[*a] == *b,
        (
            Cut {
                formula: f1,
                lpos: l1,
                rpos: r1,
                left: a1,
                right: b1,
            },
            Cut {
                formula: f2,
                lpos: l2,
                rpos: r2,
                left: a2,
                right: b2,
            },
        ) => {
            f1 == f2
                && match_premise(a1, a2, &pf[0], &qf[0], sigma, &[(*l1, *l2)])
                && match_premise(b1, b2, &pf[1], &qf[1], sigma, &[(*r1, *r2)])
        }
        (
            TensorIntro {
                p1: x1,
                p2: y1,
                left: a1,
                right: b1,
                ..
            },
            TensorIntro {
                p1: x2,
                p2: y2,
                left: a2,
                right: b2,
                ..
            },
        ) => {
            sigma[p.items.len() - 1] == q.items.len() - 1
                && match_premise(a1, a2, &pf[0], &qf[0], sigma, &[(*x1, *x2)])
                && match_premise(b1, b2, &pf[1], &qf[1], sigma, &[(*y1, *y2)])
        }
        (
            ParIntro {
                p1: x1,
                p2: y1,
                out: o1,
                prem: m1,
            },
            ParIntro {
                p1: x2,
                p2: y2,
                out: o2,
                prem: m2,
            },
        ) => {
            sigma[o1.0] == o2.0
                && match_premise(m1, m2, &pf[0], &qf[0], sigma, &[(*x1, *x2), (*y1, *y2)])
        }
        (
            WithIntro {
                out: o1,
                lpos: l1,
                rpos: r1,
                left: a1,
                right: b1,
            },
            WithIntro {
                out: o2,
                lpos: l2,
                rpos: r2,
                left: a2,
                right: b2,
            },
        ) => {
            sigma[o1.0] == o2.0
                && match_premise(a1, a2, &pf[0], &qf[0], sigma, &[(*l1, *l2)])
                && match_by_value(b1, b2, *r1, *r2)
        }
        (
            PlusIntro1 {
                principal: f1,
                out: o1,
                ppos: x1,
                prem: m1,
            },
            PlusIntro1 {
                principal: f2,
                out: o2,
                ppos: x2,
                prem: m2,
            },
        )
        | (
            PlusIntro2 {
                principal: f1,
                out: o1,
                ppos: x1,
                prem: m1,
            },
            PlusIntro2 {
                principal: f2,
                out: o2,
                ppos: x2,
                prem: m2,
            },
        ) => {
            f1 == f2
                && sigma[o1.0] == o2.0
                && match_premise(m1, m2, &pf[0], &qf[0], sigma, &[(*x1, *x2)])
        }
        (
            Contraction {
                drop: d1, prem: m1, ..
            },
            Contraction {
                drop: d2, prem: m2, ..
            },
        ) => match_premise(m1, m2, &pf[0], &qf[0], sigma, &[(Some(*d1), Some(*d2))]),
        (
            Dereliction {
                pos: x1,
                out: o1,
                body: f1,
                prem: m1,
            },
            Dereliction {
                pos: x2,
                out: o2,
                body: f2,
                prem: m2,
            },
        ) => {
            f1 == f2
                && sigma[o1.0] == o2.0
                && match_premise(m1, m2, &pf[0], &qf[0], sigma, &[(*x1, *x2)])
        }
        (
            Weakening {
                body: f1,
                out: o1,
                prem: m1,
            },
            Weakening {
                body: f2,
                out: o2,
                prem: m2,
            },
        ) => f1 == f2 && sigma[o1.0] == o2.0 && match_premise(m1, m2, &pf[0], &qf[0], sigma, &[]),
        (
            Promotion {
                out: o1,
                prem_pos: x1,
                prem: m1,
            },
            Promotion {
                out: o2,
                prem_pos: x2,
                prem: m2,
            },
        ) => sigma[o1.0] == o2.0 && match_premise(m1, m2, &pf[0], &qf[0], sigma, &[(*x1, *x2)]),
        _ => false,
    }
}

/// Derive the premise correspondence from the conclusion one via the
/// position flows, seed the rule-consumed positions from `consumed`, and
/// recurse.
fn match_premise(
    pp: &LLProof,
    qp: &LLProof,
    pf: &[Option<usize>],
    qf: &[Option<usize>],
    sigma: &[usize],
    consumed: &[(Option<usize>, Option<usize>)],
) -> bool {
    let n = pp.items.len();
    if qp.items.len() != n {
        return false;
    }
    let mut qinv = vec![None; sigma.len()];
    for (r, f) in qf.iter().enumerate() {
        if let Some(c) = f {
            qinv[*c] = Some(r);
        }
    }
    let mut sp = vec![usize::MAX; n];
    for (pa, qa) in consumed {
        match (pa, qa) {
            (Some(x), Some(y)) => {
                if *x >= n || *y >= n {
                    return false;
                }
                sp[*x] = *y;
            }
            (None, None) => {}
            _ => return false,
        }
    }
    for (r, slot) in sp.iter_mut().enumerate() {
        if *slot != usize::MAX {
            continue;
        }
        let Some(c) = pf[r] else { return false };
        let Some(s) = qinv.get(sigma[c]).copied().flatten() else {
            return false;
        };
        *slot = s;
    }
    let mut seen = vec![false; n];
    for &s in &sp {
        if s >= n || seen[s] {
            return false;
        }
        seen[s] = true;
    }
    eq_ll(pp, qp, &sp)
}

/// Pair the premises of a canonically-matched context (the right premise of
/// `WithIntro`) greedily by effective value.
fn match_by_value(pp: &LLProof, qp: &LLProof, p_pos: Option<usize>, q_pos: Option<usize>) -> bool {
    let n = pp.items.len();
    if qp.items.len() != n {
        return false;
    }
    let mut sp = vec![usize::MAX; n];
    let mut used = vec![false; n];
    match (p_pos, q_pos) {
        (Some(x), Some(y)) => {
            if x >= n || y >= n {
                return false;
            }
            sp[x] = y;
            used[y] = true;
        }
        (None, None) => {}
        _ => return false,
    }
    for (r, slot) in sp.iter_mut().enumerate() {
        if *slot != usize::MAX {
            continue;
        }
        let e = eff_ll(&pp.items[r]);
        let Some(s) = (0..n).find(|&s| !used[s] && eff_ll(&qp.items[s]) == e) else {
            return false;
        };
        *slot = s;
        used[s] = true;
    }
    eq_ll(pp, qp, &sp)
}

/// If one premise of the cut is an identity proof of the cut formula, the
/// cut is the other premise up to bookkeeping: compare that premise against
/// `q` directly, routing the cut occurrence to wherever the identity's free
/// endpoint went. Only physical (non-dropped) endpoints are handled.
fn cut_bypass(p: &LLProof, q: &LLProof, sigma: &[usize]) -> bool {
    let LLNode::Cut {
        formula,
        lpos,
        rpos,
        left,
        right,
    } = &p.node
    else {
        return false;
    };
    let flows = premise_flows(p);
    let left_ctx = left.items.len() - usize::from(lpos.is_some());
    for branch_is_right in [true, false] {
        let (branch, other, bpos, opos) = if branch_is_right {
            (right, left, *rpos, *lpos)
        } else {
            (left, right, *lpos, *rpos)
        };
        let (Some(bp), Some(op)) = (bpos, opos) else {
            continue;
        };
        if branch.items.len() != 2 || bp > 1 || op >= other.items.len() {
            continue;
        }
        let is_identity = [formula.clone(), formula.negate()].iter().any(|x| {
            ll_identity(x).is_ok_and(|(idp, _, _)| {
                idp.items.len() == 2 && (eq_ll(branch, &idp, &[0, 1]) || eq_ll(branch, &idp, &[1, 0]))
            })
        });
        if !is_identity {
            continue;
        }
        let leftover = 1 - bp;
        let leftover_c = if branch_is_right {
            left_ctx + leftover - usize::from(bp < leftover)
        } else {
            leftover - usize::from(bp < leftover)
        };
        let of = if branch_is_right { &flows[0] } else { &flows[1] };
        let mut sp = Vec::with_capacity(other.items.len());
        let mut ok = true;
        for (r, f) in of.iter().enumerate() {
            if r == op {
                sp.push(sigma[leftover_c]);
            } else {
                match f {
                    Some(c) => sp.push(sigma[*c]),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if ok && eq_ll(other, q, &sp) {
            return true;
        }
    }
    false
}

fn all_perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in all_perms(n - 1) {
        for at in 0..=rest.len() {
            let mut v = rest.clone();
            v.insert(at, n - 1);
            out.push(v);
        }
    }
    out
}

/// Decide whether `p` proves `A ⊢ A` by the η-expanded identity proof of
/// `a`, up to occurrence bookkeeping (positions and storage sides) and up
/// to cuts against identity subproofs.
pub fn ll_is_identity(p: &LLProof, a: &LLFormula) -> Result<bool, LLError> {
    let (idp, _, _) = ll_identity(a)?;
    if p.items.len() != idp.items.len() || p.items.len() > 4 {
        return Ok(false);
    }
    Ok(all_perms(p.items.len())
        .iter()
        .any(|sigma| eq_ll(p, &idp, sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::LLFormula as L;

    fn var(x: &str) -> L {
        L::Var(x.to_string())
    }

    fn rich() -> L {
        let t = L::Tensor(Box::new(var("x")), Box::new(L::One));
        let p = L::Par(Box::new(L::Bot), Box::new(L::NVar("y".into())));
        let w = L::With(Box::new(t.clone()), Box::new(p.clone()));
        let s = L::Plus(Box::new(L::Bang(Box::new(var("z")))), Box::new(w));
        L::Quest(Box::new(L::Tensor(Box::new(s), Box::new(p))))
    }

    #[test]
    fn identity_checks_on_rich_formula() {
        let a = rich();
        let (p, l, r) = ll_identity(&a).unwrap();
        check_ll(&p).unwrap();
        assert_eq!(eff_at(&p.items, l).unwrap(), a.negate());
        assert_eq!(eff_at(&p.items, r).unwrap(), a);
        assert_eq!(
            canonical_ll(&p.items),
            canonical_ll(&[(Side::Left, a.clone()), (Side::Right, a)])
        );
    }

    #[test]
    fn identity_on_units_uses_virtual_occurrences() {
        let (p, l, r) = ll_identity(&L::One).unwrap();
        check_ll(&p).unwrap();
        assert_eq!(l, None);
        assert_eq!(r, Some(0));
        let (p, l, r) = ll_identity(&L::Bot).unwrap();
        check_ll(&p).unwrap();
        assert_eq!(l, Some(0));
        assert_eq!(r, None);
        // bang of 1 exercises a virtual dereliction position
        let (p, _, _) = ll_identity(&L::Bang(Box::new(L::One))).unwrap();
        check_ll(&p).unwrap();
        // tensor with unit components exercises virtual split positions
        let (p, _, _) = ll_identity(&L::Tensor(Box::new(L::One), Box::new(L::Bot))).unwrap();
        check_ll(&p).unwrap();
        // exponentials over units exercise virtual promotion bodies
        for f in [
            L::Bang(Box::new(L::Bot)),
            L::Quest(Box::new(L::One)),
            L::Quest(Box::new(L::Bot)),
        ] {
            let (p, _, _) = ll_identity(&f).unwrap();
            check_ll(&p).unwrap();
        }
    }

    #[test]
    fn cut_of_identities_checks() {
        let a = rich();
        let (p1, _, r1) = ll_identity(&a).unwrap();
        let (p2, l2, _) = ll_identity(&a).unwrap();
        let c = ll_mk(LLNode::Cut {
            formula: a.clone(),
            lpos: r1,
            rpos: l2,
            left: Box::new(p1),
            right: Box::new(p2),
        })
        .unwrap();
        check_ll(&c).unwrap();
        assert_eq!(
            canonical_ll(&c.items),
            canonical_ll(&[(Side::Left, a.clone()), (Side::Right, a)])
        );
    }

    #[test]
    fn bad_cache_is_rejected() {
        let (mut p, _, _) = ll_identity(&var("x")).unwrap();
        p.items[0].1 = var("w");
        assert!(check_ll(&p).is_err());
    }

    #[test]
    fn contraction_and_weakening_check() {
        let body = var("x");
        let q = L::Quest(Box::new(body.clone()));
        let (id, l, r) = ll_identity(&q).unwrap();
        let w = ll_mk(LLNode::Weakening {
            body: body.clone(),
            out: (2, Side::Right),
            prem: Box::new(id),
        })
        .unwrap();
        let c = ll_mk(LLNode::Contraction {
            keep: r.unwrap(),
            drop: 2,
            prem: Box::new(w),
        })
        .unwrap();
        check_ll(&c).unwrap();
        assert_eq!(eff_at(&c.items, l).unwrap(), q.negate());
        // same sequent as the identity, but the proof takes a
        // weaken-then-contract detour and is not recognized as one
        assert!(!ll_is_identity(&c, &q).unwrap());
    }

    #[test]
    fn identity_recognition_accepts_identities_and_identity_cuts() {
        let a = rich();
        let (p, _, _) = ll_identity(&a).unwrap();
        assert!(ll_is_identity(&p, &a).unwrap());
        let (p1, _, r1) = ll_identity(&a).unwrap();
        let (p2, l2, _) = ll_identity(&a).unwrap();
        let c = ll_mk(LLNode::Cut {
            formula: a.clone(),
            lpos: r1,
            rpos: l2,
            left: Box::new(p1),
            right: Box::new(p2),
        })
        .unwrap();
        assert!(ll_is_identity(&c, &a).unwrap());
        assert!(!ll_is_identity(&c, &L::Tensor(Box::new(a.clone()), Box::new(L::One))).unwrap());
    }

    #[test]
    fn identity_recognition_rejects_the_twist() {
        // on x ⊗ x the twist proof has the same sequents and rule kinds as
        // the identity everywhere; only the wiring of the two occurrences
        // differs
        let x = var("x");
        let t = L::Tensor(Box::new(x.clone()), Box::new(x.clone()));
        let (id1, l1, r1) = ll_identity(&x).unwrap();
        let (id2, l2, r2) = ll_identity(&x).unwrap();
        let off = id1.items.len() - usize::from(r1.is_some());
        let ten = ll_mk(LLNode::TensorIntro {
            p1: r1,
            p2: r2,
            out_side: Side::Right,
            left: Box::new(id1),
            right: Box::new(id2),
        })
        .unwrap();
        let a1 = adjust(l1, r1);
        let a2 = adjust(l2, r2).map(|k| k + off);
        let twist = ll_mk(LLNode::ParIntro {
            p1: a2,
            p2: a1,
            out: (0, Side::Left),
            prem: Box::new(ten),
        })
        .unwrap();
        check_ll(&twist).unwrap();
        assert!(!ll_is_identity(&twist, &t).unwrap());
        let (id, _, _) = ll_identity(&t).unwrap();
        assert!(ll_is_identity(&id, &t).unwrap());
    }
}
