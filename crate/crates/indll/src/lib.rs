//! Kernel, normalizer and semantics oracle for an idempotent indexed
//! refinement of classical linear logic.
//!
//! The crate is organized bottom-up:
//! - [`setfun`]: finite sets/functions, pullbacks, coproducts;
//! - [`formula`]: annotated formulae, erasure, base change, intersection;
//! - [`subtyping`]: proof-relevant subtyping derivations and deciders;
//! - [`proof`]: sequents, proof trees, their checker and the plain
//!   linear-logic mirror used as an independent oracle;
//! - [`cutelim`]: pointed cut elimination, normalization, proof equivalence;
//! - [`scott`]: preorder/relation semantics used as a second oracle;
//! - [`itypes`]: idempotent intersection types and the two-way bridge;
//! - [`syntax`], [`workspace`], [`cli`]: concrete syntax and the command
//!   line front end;
//! - [`corpus`]: deterministic generators used by tests and `selftest`.

pub mod setfun;
pub mod subtyping;
pub mod formula;
pub mod llproof;
pub mod derived;
pub mod structural;
pub mod proof;
pub mod cutelim;
