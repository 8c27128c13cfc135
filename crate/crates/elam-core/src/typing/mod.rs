//! Contexts, typing judgments, derivation trees, rule validation, and the
//! rank measure, plus the derivation transformations (weakening, flat type
//! substitution, redex removal, cut) shared by reduction and the cut-rank
//! pipeline.
//!
//! There is no type inference here: every typed artifact carries an explicit
//! derivation produced by a builder, and `check_derivation` re-validates any
//! derivation node by node.

mod derivation;
mod transform;

pub use derivation::{
    ax, all_e_closed, all_e_flat, all_i, check_derivation, context_rank, imp_e, imp_i, level_of,
    prod_el, prod_er, prod_i, rank, weaken, CheckError, Context, Derivation, Payload, Rule,
    TypeError,
};
pub use derivation::imp_es;
pub use transform::{
    contract_pair_redexes, cut, derivation_cut_rank, derivation_height, eigenvars,
    normalize_derivation, rebuild_node as transform_rebuild, remove_alli_alles,
    rename_free_term_var, subst_flat_deriv,
};
