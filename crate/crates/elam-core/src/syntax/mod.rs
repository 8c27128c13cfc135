//! Terms and types: the raw syntax both halves of the system share.
//!
//! Terms are untyped lambda terms with pairs; types are leveled, with
//! quantifiers binding a variable of strictly smaller level whose body may
//! mention only the bound variable. Both are immutable trees with shared
//! (`Arc`) children, so clones are cheap and values are `Send + Sync`.

mod term;
mod ty;

pub use term::{alpha_eq, free_vars, fresh_name, occurs_free, substitute, Term};
pub use ty::{free_ty_vars, is_flat, is_level, type_substitute, TyVar, Type};
