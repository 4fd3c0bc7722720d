//! Proofs of indexed sequents.
//!
//! A sequent is a finite index set (the locus) together with an ordered
//! two-sided list of formulae defined over it. As in the erased calculus
//! ([`crate::llproof`]), rules read occurrences through their right-hand
//! effective value, a left occurrence of `A` standing for `A⊥` on the
//! right; inert unit occurrences (a `1` on the left / `⊥` on the right)
//! may be virtual, denoted by a position of `None`.
//!
//! Every node caches its conclusion. For most rules the conclusion is
//! determined by the premises and the rule data and the cache must match it
//! exactly; the rules whose conclusion context is not recoverable from the
//! premises (`TopIntro`, and the two rules that re-index their context,
//! `WithIntro` and `Promotion`) are validated against the cache, comparing
//! contexts up to the canonical sequent form.
//!
//! Two administrative nodes, [`ProofNode::SubtypeStep`] and
//! [`ProofNode::BaseChangeStep`], rewrite one occurrence along a subtyping
//! derivation resp. re-index a whole sequent; both are invisible in the
//! erasure.

use crate::formula::{base_change, check_def, Formula, FormulaError, VarEnv};
use crate::llproof::{LLItem, LLNode, LLProof, Side};
use crate::setfun::{is_bot_pair, Locus, SetFun, SetFunError};
use crate::subtyping::{check_sub, SubDeriv, SubError};
use serde::{Deserialize, Serialize};

pub type Item = (Side, Formula);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Sequent {
    pub locus: Locus,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProofError {
    #[error("position {0} out of range")]
    BadPosition(usize),
    #[error("premise loci do not fit the rule data")]
    LocusMismatch,
    #[error("rule does not match the pointed formula: {0}")]
    RuleMismatch(String),
    #[error("cached conclusion differs from the computed one: {0}")]
    BadCache(String),
    #[error("ill-formed formula in a sequent: {0}")]
    Formula(#[from] FormulaError),
    #[error("set-level operation failed: {0}")]
    SetFun(#[from] SetFunError),
    #[error("invalid subtyping witness: {0}")]
    Subtyping(#[from] SubError),
    #[error("proofs in the family do not share a rule skeleton")]
    SkeletonMismatch,
    #[error("conclusion is not a two-sided single-formula sequent")]
    WrongShape,
}

/// The value a rule sees at a position.
pub fn eff(item: &Item) -> Formula {
    match item.0 {
        Side::Right => item.1.clone(),
        Side::Left => item.1.negate(),
    }
}

/// Store an effective (right-reading) value on the given side.
pub fn phys(side: Side, e: Formula) -> Item {
    match side {
        Side::Right => (side, e),
        Side::Left => (side, e.negate()),
    }
}

/// Canonical multiset of the items: everything read on the right, inert
/// unit occurrences removed, sorted. Two sequents denote the same
/// judgement iff their loci and canonical multisets agree.
pub fn canonical_items(items: &[Item]) -> Vec<Formula> {
    let mut v: Vec<Formula> = items
        .iter()
        .map(eff)
        .filter(|f| *f != Formula::Bot)
        .collect();
    v.sort();
    v
}

impl Sequent {
    pub fn new(locus: Locus, items: Vec<Item>) -> Sequent {
        Sequent { locus, items }
    }

    /// Equality of judgements: same locus, same canonical multiset.
    pub fn same_judgement(&self, other: &Sequent) -> bool {
        self.locus == other.locus && canonical_items(&self.items) == canonical_items(&other.items)
    }

    pub fn check_def(&self, env: &VarEnv) -> Result<(), FormulaError> {
        for (_, f) in &self.items {
            check_def(&self.locus, f, env)?;
        }
        Ok(())
    }
}

pub(crate) fn remove_at(items: &[Item], pos: Option<usize>) -> Result<Vec<Item>, ProofError> {
    match pos {
        None => Ok(items.to_vec()),
        Some(k) => {
            if k >= items.len() {
                return Err(ProofError::BadPosition(k));
            }
            let mut v = items.to_vec();
            v.remove(k);
            Ok(v)
        }
    }
}

pub(crate) fn eff_at(items: &[Item], pos: Option<usize>) -> Result<Formula, ProofError> {
    match pos {
        None => Ok(Formula::Bot),
        Some(k) => items.get(k).map(eff).ok_or(ProofError::BadPosition(k)),
    }
}

pub(crate) fn insert_at(
    mut items: Vec<Item>,
    out: (usize, Side),
    e: Formula,
) -> Result<Vec<Item>, ProofError> {
    if out.0 > items.len() {
        return Err(ProofError::BadPosition(out.0));
    }
    items.insert(out.0, phys(out.1, e));
    Ok(items)
}

pub(crate) fn bc_items(f: &SetFun, items: &[Item]) -> Result<Vec<Item>, ProofError> {
    items
        .iter()
        .map(|(s, a)| Ok((*s, base_change(f, a)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    pub concl: Sequent,
    pub node: ProofNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProofNode {
    /// `f(X) ⊢ f(X)` over the domain of `f`.
    Ax {
        f: SetFun,
        var: String,
        negative: bool,
    },
    /// `formula` is the effective value consumed from the left premise; the
    /// right premise provides its negation.
    Cut {
        formula: Formula,
        lpos: Option<usize>,
        rpos: Option<usize>,
        left: Box<Proof>,
        right: Box<Proof>,
    },
    /// `⊢_I 1` over any locus.
    OneIntro { locus: Locus },
    TensorIntro {
        p1: Option<usize>,
        p2: Option<usize>,
        out_side: Side,
        left: Box<Proof>,
        right: Box<Proof>,
    },
    ParIntro {
        p1: Option<usize>,
        p2: Option<usize>,
        out: (usize, Side),
        prem: Box<Proof>,
    },
    /// Any sequent over the empty locus containing an effective `⊤`.
    TopIntro { pos: usize },
    /// Principal `A &_{i,j} B`; the premises hold the components over the
    /// domains of `i` and `j`, in a context re-indexed along `i` resp. `j`.
    WithIntro {
        i: SetFun,
        j: SetFun,
        out: (usize, Side),
        lpos: Option<usize>,
        rpos: Option<usize>,
        left: Box<Proof>,
        right: Box<Proof>,
    },
    /// Principal `A ⊕_{i,j} B` where `i` is a bijection and `j` has empty
    /// domain; the premise holds `inv(i)(A)`.
    PlusIntro1 {
        principal: Formula,
        out: (usize, Side),
        ppos: Option<usize>,
        prem: Box<Proof>,
    },
    PlusIntro2 {
        principal: Formula,
        out: (usize, Side),
        ppos: Option<usize>,
        prem: Box<Proof>,
    },
    /// Merges two occurrences with the same effective `?_w A`.
    Contraction {
        keep: usize,
        drop: usize,
        prem: Box<Proof>,
    },
    /// From an occurrence of `f(B)` infer `?_u B`, where `f` splits `u`
    /// (`f;u = id` on the conclusion locus).
    Dereliction {
        f: SetFun,
        u: SetFun,
        body: Formula,
        pos: Option<usize>,
        out: (usize, Side),
        prem: Box<Proof>,
    },
    Weakening {
        u: SetFun,
        body: Formula,
        out: (usize, Side),
        prem: Box<Proof>,
    },
    /// Introduces `!_v B` from a premise over the domain of `v` whose
    /// context is the conclusion context re-indexed along `v`; every
    /// context occurrence must be an effective-left bang.
    Promotion {
        v: SetFun,
        out: (usize, Side),
        prem_pos: Option<usize>,
        prem: Box<Proof>,
    },
    /// Rewrites one occurrence along a subtyping derivation: covariantly
    /// on the right (`lhs` becomes `rhs`), contravariantly on the left.
    SubtypeStep {
        pos: usize,
        rho: SubDeriv,
        prem: Box<Proof>,
    },
    /// Re-indexes the whole sequent along `f`.
    BaseChangeStep { f: SetFun, prem: Box<Proof> },
}

pub fn premises(node: &ProofNode) -> Vec<&Proof> {
    match node {
        ProofNode::Cut { left, right, .. }
        | ProofNode::TensorIntro { left, right, .. }
        | ProofNode::WithIntro { left, right, .. } => vec![left, right],
        ProofNode::ParIntro { prem, .. }
        | ProofNode::PlusIntro1 { prem, .. }
        | ProofNode::PlusIntro2 { prem, .. }
        | ProofNode::Contraction { prem, .. }
        | ProofNode::Dereliction { prem, .. }
        | ProofNode::Weakening { prem, .. }
        | ProofNode::Promotion { prem, .. }
        | ProofNode::SubtypeStep { prem, .. }
        | ProofNode::BaseChangeStep { prem, .. } => vec![prem],
        _ => vec![],
    }
}

impl Proof {
    pub fn size(&self) -> usize {
        1 + premises(&self.node).iter().map(|p| p.size()).sum::<usize>()
    }

    /// Number of cut nodes in the tree.
    pub fn cut_count(&self) -> usize {
        let here = usize::from(matches!(self.node, ProofNode::Cut { .. }));
        here + premises(&self.node)
            .iter()
            .map(|p| p.cut_count())
            .sum::<usize>()
    }
}

/// Compute the conclusion of a node whose conclusion is determined by its
/// premises and witnesses. `TopIntro`, `WithIntro` and `Promotion` return
/// `None`; they are validated against the cached conclusion instead.
fn computed_conclusion(node: &ProofNode, env: &VarEnv) -> Result<Option<Sequent>, ProofError> {
    let seq = match node {
        ProofNode::Ax { f, var, negative } => {
            let v = if *negative {
                Formula::NVar(f.clone(), var.clone())
            } else {
                Formula::PVar(f.clone(), var.clone())
            };
            Sequent::new(
                f.dom().clone(),
                vec![(Side::Left, v.clone()), (Side::Right, v)],
            )
        }
        ProofNode::Cut {
            formula,
            lpos,
            rpos,
            left,
            right,
        } => {
            if left.concl.locus != right.concl.locus {
                return Err(ProofError::LocusMismatch);
            }
            if eff_at(&left.concl.items, *lpos)? != *formula {
                return Err(ProofError::RuleMismatch("cut left premise".into()));
            }
            if eff_at(&right.concl.items, *rpos)? != formula.negate() {
                return Err(ProofError::RuleMismatch("cut right premise".into()));
            }
            let mut items = remove_at(&left.concl.items, *lpos)?;
            items.extend(remove_at(&right.concl.items, *rpos)?);
            Sequent::new(left.concl.locus.clone(), items)
        }
        ProofNode::OneIntro { locus } => {
            Sequent::new(locus.clone(), vec![(Side::Right, Formula::One)])
        }
        ProofNode::TensorIntro {
            p1,
            p2,
            out_side,
            left,
            right,
        } => {
            if left.concl.locus != right.concl.locus {
                return Err(ProofError::LocusMismatch);
            }
            let a = eff_at(&left.concl.items, *p1)?;
            let b = eff_at(&right.concl.items, *p2)?;
            let mut items = remove_at(&left.concl.items, *p1)?;
            items.extend(remove_at(&right.concl.items, *p2)?);
            items.push(phys(*out_side, Formula::tensor(a, b)));
            Sequent::new(left.concl.locus.clone(), items)
        }
        ProofNode::ParIntro { p1, p2, out, prem } => {
            if p1.is_some() && p1 == p2 {
                return Err(ProofError::RuleMismatch("par on a single occurrence".into()));
            }
            let a = eff_at(&prem.concl.items, *p1)?;
            let b = eff_at(&prem.concl.items, *p2)?;
            let items: Vec<Item> = prem
                .concl
                .items
                .iter()
                .enumerate()
                .filter(|(k, _)| Some(*k) != *p1 && Some(*k) != *p2)
                .map(|(_, it)| it.clone())
                .collect();
            Sequent::new(
                prem.concl.locus.clone(),
                insert_at(items, *out, Formula::par(a, b))?,
            )
        }
        ProofNode::TopIntro { .. } | ProofNode::WithIntro { .. } | ProofNode::Promotion { .. } => {
            return Ok(None)
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
            let first = matches!(node, ProofNode::PlusIntro1 { .. });
            let (i, j, a, b) = match principal {
                Formula::Plus(i, j, a, b) => (i, j, a, b),
                _ => return Err(ProofError::RuleMismatch("sum introduction".into())),
            };
            let (inj, partner, kept) = if first { (i, j, a) } else { (j, i, b) };
            if !inj.is_bijection() {
                return Err(ProofError::RuleMismatch(
                    "selected summand injection is not a bijection".into(),
                ));
            }
            if !partner.dom().is_empty() {
                return Err(ProofError::RuleMismatch(
                    "discarded summand does not live over the empty locus".into(),
                ));
            }
            if prem.concl.locus != *inj.cod() {
                return Err(ProofError::LocusMismatch);
            }
            let expected = base_change(&inj.invert()?, kept)?;
            if eff_at(&prem.concl.items, *ppos)? != expected {
                return Err(ProofError::RuleMismatch("sum introduction premise".into()));
            }
            Sequent::new(
                prem.concl.locus.clone(),
                insert_at(remove_at(&prem.concl.items, *ppos)?, *out, principal.clone())?,
            )
        }
        ProofNode::Contraction { keep, drop, prem } => {
            if keep == drop {
                return Err(ProofError::RuleMismatch(
                    "contraction on one occurrence".into(),
                ));
            }
            let a = eff_at(&prem.concl.items, Some(*keep))?;
            let b = eff_at(&prem.concl.items, Some(*drop))?;
            if a != b || !matches!(a, Formula::Quest(..)) {
                return Err(ProofError::RuleMismatch("contraction occurrences".into()));
            }
            Sequent::new(
                prem.concl.locus.clone(),
                remove_at(&prem.concl.items, Some(*drop))?,
            )
        }
        ProofNode::Dereliction {
            f,
            u,
            body,
            pos,
            out,
            prem,
        } => {
            let locus = prem.concl.locus.clone();
            if *f.dom() != locus || f.cod() != u.dom() || *u.cod() != locus {
                return Err(ProofError::LocusMismatch);
            }
            if !SetFun::compose(f, u)?.is_identity() {
                return Err(ProofError::RuleMismatch(
                    "dereliction witness does not split the annotation".into(),
                ));
            }
            if eff_at(&prem.concl.items, *pos)? != base_change(f, body)? {
                return Err(ProofError::RuleMismatch("dereliction premise".into()));
            }
            Sequent::new(
                locus,
                insert_at(
                    remove_at(&prem.concl.items, *pos)?,
                    *out,
                    Formula::quest(u.clone(), body.clone()),
                )?,
            )
        }
        ProofNode::Weakening { u, body, out, prem } => {
            if *u.cod() != prem.concl.locus {
                return Err(ProofError::LocusMismatch);
            }
            check_def(u.dom(), body, env)?;
            Sequent::new(
                prem.concl.locus.clone(),
                insert_at(
                    prem.concl.items.clone(),
                    *out,
                    Formula::quest(u.clone(), body.clone()),
                )?,
            )
        }
        ProofNode::SubtypeStep { pos, rho, prem } => {
            let (locus, lhs, rhs) = check_sub(rho, env)?;
            if locus != prem.concl.locus {
                return Err(ProofError::LocusMismatch);
            }
            let Some((side, f)) = prem.concl.items.get(*pos).cloned() else {
                return Err(ProofError::BadPosition(*pos));
            };
            let new = match side {
                Side::Right => {
                    if f != lhs {
                        return Err(ProofError::RuleMismatch(
                            "subtype step premise (right occurrence)".into(),
                        ));
                    }
                    rhs
                }
                Side::Left => {
                    if f != rhs {
                        return Err(ProofError::RuleMismatch(
                            "subtype step premise (left occurrence)".into(),
                        ));
                    }
                    lhs
                }
            };
            let mut items = prem.concl.items.clone();
            items[*pos] = (side, new);
            Sequent::new(locus, items)
        }
        ProofNode::BaseChangeStep { f, prem } => {
            if *f.cod() != prem.concl.locus {
                return Err(ProofError::LocusMismatch);
            }
            Sequent::new(f.dom().clone(), bc_items(f, &prem.concl.items)?)
        }
    };
    Ok(Some(seq))
}

/// Validate the cache-dependent rules against the claimed conclusion.
fn check_against_cache(p: &Proof, _env: &VarEnv) -> Result<(), ProofError> {
    match &p.node {
        ProofNode::TopIntro { pos } => {
            if !p.concl.locus.is_empty() {
                return Err(ProofError::RuleMismatch(
                    "additive unit requires the empty locus".into(),
                ));
            }
            if eff_at(&p.concl.items, Some(*pos))? != Formula::Top {
                return Err(ProofError::RuleMismatch("top introduction".into()));
            }
            Ok(())
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
            if *i.cod() != p.concl.locus || *j.cod() != p.concl.locus {
                return Err(ProofError::LocusMismatch);
            }
            if !is_bot_pair(i, j) {
                return Err(ProofError::RuleMismatch(
                    "additive injections are not an orthogonal covering pair".into(),
                ));
            }
            if left.concl.locus != *i.dom() || right.concl.locus != *j.dom() {
                return Err(ProofError::LocusMismatch);
            }
            let a = eff_at(&left.concl.items, *lpos)?;
            let b = eff_at(&right.concl.items, *rpos)?;
            let principal = Formula::with(i.clone(), j.clone(), a, b);
            let Some(it) = p.concl.items.get(out.0) else {
                return Err(ProofError::BadPosition(out.0));
            };
            if *it != phys(out.1, principal) {
                return Err(ProofError::BadCache("product principal occurrence".into()));
            }
            let ctx = remove_at(&p.concl.items, Some(out.0))?;
            for (inj, prem, ppos) in [(i, left, lpos), (j, right, rpos)] {
                let expected = bc_items(inj, &ctx)?;
                if canonical_items(&remove_at(&prem.concl.items, *ppos)?)
                    != canonical_items(&expected)
                {
                    return Err(ProofError::RuleMismatch(
                        "additive premise context does not re-index the conclusion context"
                            .into(),
                    ));
                }
            }
            Ok(())
        }
        ProofNode::Promotion {
            v,
            out,
            prem_pos,
            prem,
        } => {
            if prem.concl.locus != *v.dom() || *v.cod() != p.concl.locus {
                return Err(ProofError::LocusMismatch);
            }
            let body = eff_at(&prem.concl.items, *prem_pos)?;
            let principal = Formula::bang(v.clone(), body);
            let Some(it) = p.concl.items.get(out.0) else {
                return Err(ProofError::BadPosition(out.0));
            };
            if *it != phys(out.1, principal) {
                return Err(ProofError::BadCache("promotion principal occurrence".into()));
            }
            let ctx = remove_at(&p.concl.items, Some(out.0))?;
            for f in canonical_items(&ctx) {
                if !matches!(f, Formula::Quest(..)) {
                    return Err(ProofError::RuleMismatch(
                        "promotion context is not banged".into(),
                    ));
                }
            }
            let expected = bc_items(v, &ctx)?;
            if canonical_items(&remove_at(&prem.concl.items, *prem_pos)?)
                != canonical_items(&expected)
            {
                return Err(ProofError::RuleMismatch(
                    "promotion premise context does not re-index the conclusion context".into(),
                ));
            }
            Ok(())
        }
        _ => unreachable!(),
    }
}

/// Validate a proof bottom-up: every sequent is well defined over its locus
/// and every cached conclusion matches its rule.
pub fn check_proof(p: &Proof, env: &VarEnv) -> Result<(), ProofError> {
    for sub in premises(&p.node) {
        check_proof(sub, env)?;
    }
    p.concl.check_def(env)?;
    match computed_conclusion(&p.node, env)? {
        Some(seq) => {
            if seq != p.concl {
                return Err(ProofError::BadCache(format!(
                    "expected {seq:?}, cached {:?}",
                    p.concl
                )));
            }
            Ok(())
        }
        None => check_against_cache(p, env),
    }
}

/// Build a premise-determined node into a proof.
pub fn mk(node: ProofNode, env: &VarEnv) -> Result<Proof, ProofError> {
    let concl = computed_conclusion(&node, env)?
        .expect("cache-dependent rule passed to mk; use mk_with_concl");
    Ok(Proof { concl, node })
}

/// Build a cache-dependent node (`TopIntro`, `WithIntro`, `Promotion`)
/// against an explicitly supplied conclusion, validating it.
pub fn mk_with_concl(node: ProofNode, concl: Sequent, env: &VarEnv) -> Result<Proof, ProofError> {
    let p = Proof { concl, node };
    check_against_cache(&p, env)?;
    Ok(p)
}

fn erase_items(items: &[Item]) -> Vec<LLItem> {
    items.iter().map(|(s, f)| (*s, f.erase())).collect()
}

/// Erase all index information. Administrative steps disappear; every
/// other node maps to its plain counterpart at the same positions.
pub fn erase_proof(p: &Proof) -> LLProof {
    let items = erase_items(&p.concl.items);
    let node = match &p.node {
        ProofNode::Ax { var, negative, .. } => LLNode::Ax {
            var: var.clone(),
            negative: *negative,
        },
        ProofNode::Cut {
            formula,
            lpos,
            rpos,
            left,
            right,
        } => LLNode::Cut {
            formula: formula.erase(),
            lpos: *lpos,
            rpos: *rpos,
            left: Box::new(erase_proof(left)),
            right: Box::new(erase_proof(right)),
        },
        ProofNode::OneIntro { .. } => LLNode::OneIntro,
        ProofNode::TensorIntro {
            p1,
            p2,
            out_side,
            left,
            right,
        } => LLNode::TensorIntro {
            p1: *p1,
            p2: *p2,
            out_side: *out_side,
            left: Box::new(erase_proof(left)),
            right: Box::new(erase_proof(right)),
        },
        ProofNode::ParIntro { p1, p2, out, prem } => LLNode::ParIntro {
            p1: *p1,
            p2: *p2,
            out: *out,
            prem: Box::new(erase_proof(prem)),
        },
        ProofNode::TopIntro { pos } => LLNode::TopIntro { pos: *pos },
        ProofNode::WithIntro {
            out,
            lpos,
            rpos,
            left,
            right,
            ..
        } => LLNode::WithIntro {
            out: *out,
            lpos: *lpos,
            rpos: *rpos,
            left: Box::new(erase_proof(left)),
            right: Box::new(erase_proof(right)),
        },
        ProofNode::PlusIntro1 {
            principal,
            out,
            ppos,
            prem,
        } => LLNode::PlusIntro1 {
            principal: principal.erase(),
            out: *out,
            ppos: *ppos,
            prem: Box::new(erase_proof(prem)),
        },
        ProofNode::PlusIntro2 {
            principal,
            out,
            ppos,
            prem,
        } => LLNode::PlusIntro2 {
            principal: principal.erase(),
            out: *out,
            ppos: *ppos,
            prem: Box::new(erase_proof(prem)),
        },
        ProofNode::Contraction { keep, drop, prem } => LLNode::Contraction {
            keep: *keep,
            drop: *drop,
            prem: Box::new(erase_proof(prem)),
        },
        ProofNode::Dereliction {
            body,
            pos,
            out,
            prem,
            ..
        } => LLNode::Dereliction {
            pos: *pos,
            out: *out,
            body: body.erase(),
            prem: Box::new(erase_proof(prem)),
        },
        ProofNode::Weakening {
            body, out, prem, ..
        } => LLNode::Weakening {
            body: body.erase(),
            out: *out,
            prem: Box::new(erase_proof(prem)),
        },
        ProofNode::Promotion {
            out,
            prem_pos,
            prem,
            ..
        } => LLNode::Promotion {
            out: *out,
            prem_pos: *prem_pos,
            prem: Box::new(erase_proof(prem)),
        },
        ProofNode::SubtypeStep { prem, .. } | ProofNode::BaseChangeStep { prem, .. } => {
            return erase_proof(prem)
        }
    };
    LLProof { items, node }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llproof::check_ll;
    use crate::setfun::{atoms, SetFun};
    use crate::subtyping::refl;
    use std::collections::BTreeMap;

    fn env2() -> VarEnv {
        let mut env = BTreeMap::new();
        env.insert("X".to_string(), atoms(&["p", "q"]));
        env
    }

    #[test]
    fn axiom_and_cut_check_and_erase() {
        let env = env2();
        let i = atoms(&["a", "b"]);
        let f = SetFun::from_fn(i.clone(), atoms(&["p", "q"]), |_| {
            crate::setfun::Elem::atom("p")
        })
        .unwrap();
        let ax1 = mk(
            ProofNode::Ax {
                f: f.clone(),
                var: "X".into(),
                negative: false,
            },
            &env,
        )
        .unwrap();
        let ax2 = ax1.clone();
        let v = Formula::PVar(f, "X".into());
        let c = mk(
            ProofNode::Cut {
                formula: v.clone(),
                lpos: Some(1),
                rpos: Some(0),
                left: Box::new(ax1),
                right: Box::new(ax2),
            },
            &env,
        )
        .unwrap();
        check_proof(&c, &env).unwrap();
        assert!(c.concl.same_judgement(&Sequent::new(
            i,
            vec![(Side::Left, v.clone()), (Side::Right, v)]
        )));
        check_ll(&erase_proof(&c)).unwrap();
    }

    #[test]
    fn subtype_step_rewrites_an_occurrence() {
        let env = env2();
        let i = atoms(&["a"]);
        let f = SetFun::from_fn(i.clone(), atoms(&["p", "q"]), |_| {
            crate::setfun::Elem::atom("q")
        })
        .unwrap();
        let ax = mk(
            ProofNode::Ax {
                f: f.clone(),
                var: "X".into(),
                negative: false,
            },
            &env,
        )
        .unwrap();
        let rho = refl(&i, &Formula::PVar(f, "X".into())).unwrap();
        let s = mk(
            ProofNode::SubtypeStep {
                pos: 1,
                rho,
                prem: Box::new(ax.clone()),
            },
            &env,
        )
        .unwrap();
        check_proof(&s, &env).unwrap();
        assert_eq!(erase_proof(&s), erase_proof(&ax));
    }

    #[test]
    fn bad_cache_is_rejected() {
        let env = env2();
        let p = mk(
            ProofNode::OneIntro {
                locus: atoms(&["a"]),
            },
            &env,
        )
        .unwrap();
        let mut bad = p;
        bad.concl.items[0] = (Side::Left, Formula::One);
        assert!(check_proof(&bad, &env).is_err());
    }
}
