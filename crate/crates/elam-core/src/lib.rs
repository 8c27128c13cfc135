//! Core calculus: terms of untyped lambda calculus with pairs, leveled
//! second-order types with flat instantiation, typing derivations and their
//! transformations, normal-order reduction, the standard arithmetic terms,
//! a compiler from elementary recursive function definitions to typed closed
//! terms, and the cut-rank reduction pipeline that evaluates such terms
//! through derivation surgery.
//!
//! The crate is `no_std` (alloc only) and purely functional: every value is
//! immutable after construction and safe to share between threads.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cutelim;
pub mod elemc;
pub mod reduction;
pub mod stdterms;
pub mod syntax;
pub mod typing;

pub use syntax::{Term, TyVar, Type};
pub use typing::{Context, Derivation, Rule};
