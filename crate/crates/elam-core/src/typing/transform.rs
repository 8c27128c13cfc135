use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::derivation::{
    all_e_closed, all_e_flat, all_i, ax, imp_e, imp_i, prod_el, prod_er, prod_i, rank, weaken,
    Context, Derivation, Payload, Rule, TypeError,
};
use crate::syntax::free_ty_vars;
use crate::syntax::{free_vars, is_flat, type_substitute, Term, TyVar, Type};

/// Minimal height of a derivation under the annotated rules: axioms at 0,
/// unary rules child + 1, binary rules max(children) + 1.
pub fn derivation_height(d: &Derivation) -> u64 {
    match d.rule() {
        Rule::Ax => 0,
        _ => 1 + d.kids().iter().map(derivation_height).max().unwrap_or(0),
    }
}

/// Minimal cut-rank: one more than the largest rank among ImpE argument
/// types (0 when there is no application). Errors if a type exceeds level 1.
pub fn derivation_cut_rank(d: &Derivation) -> Result<u64, TypeError> {
    let mut k = 0;
    if d.rule() == Rule::ImpE {
        k = rank(d.kids()[1].ty())? + 1;
    }
    for kid in d.kids() {
        k = k.max(derivation_cut_rank(kid)?);
    }
    Ok(k)
}

/// All eigenvariables generalized by AllI nodes in `d`.
pub fn eigenvars(d: &Derivation) -> BTreeSet<TyVar> {
    let mut out = BTreeSet::new();
    fn go(d: &Derivation, out: &mut BTreeSet<TyVar>) {
        if let Some(Payload::Generalized(v)) = d.payload() {
            out.insert(v.clone());
        }
        for k in d.kids() {
            go(k, out);
        }
    }
    go(d, &mut out);
    out
}

/// Rename a type variable throughout a derivation (judgment types, context
/// types and payloads, including AllI payloads). Used to freshen
/// eigenvariables; `to` must not occur anywhere in `d`.
pub fn rename_eigenvar(d: &Derivation, from: &TyVar, to: &TyVar) -> Derivation {
    let to_ty = Type::Var(to.clone());
    map_ty(d, &|t| type_substitute(t, from, &to_ty), &|p| match p {
        Payload::Generalized(v) if v == from => Payload::Generalized(to.clone()),
        Payload::Generalized(v) => Payload::Generalized(v.clone()),
        Payload::Instantiated(t) => Payload::Instantiated(type_substitute(t, from, &to_ty)),
    })
}

fn map_ty(
    d: &Derivation,
    f: &impl Fn(&Type) -> Type,
    fp: &impl Fn(&Payload) -> Payload,
) -> Derivation {
    let ctx: Context = d.ctx().iter().map(|(x, t)| (x.clone(), f(t))).collect();
    let kids = d.kids().iter().map(|k| map_ty(k, f, fp)).collect();
    Derivation::make(
        d.rule(),
        ctx,
        d.subject().clone(),
        f(d.ty()),
        d.payload().map(fp),
        kids,
    )
}

/// Substitute a flat type for a level-0 variable throughout a derivation:
/// from `G |- t : ty` obtain `G[a := flat] |- t : ty[a := flat]`. The rule
/// skeleton, and hence height and cut-rank, are unchanged (flat substitution
/// does not alter ranks).
pub fn subst_flat_deriv(
    d: &Derivation,
    var: &TyVar,
    flat: &Type,
) -> Result<Derivation, TypeError> {
    if !is_flat(flat) {
        return Err(TypeError::NotFlat(flat.clone()));
    }
    // Freshen eigenvariables that collide with the substituted variable or
    // with the variables of the flat type.
    let mut clash: BTreeSet<TyVar> = free_ty_vars(flat);
    clash.insert(var.clone());
    let mut renamed = d.clone();
    let used = eigenvars(&renamed);
    if used.iter().any(|v| clash.contains(v)) {
        let mut avoid: BTreeSet<String> = used.iter().map(|v| v.name.clone()).collect();
        avoid.extend(clash.iter().map(|v| v.name.clone()));
        for v in &used {
            if clash.contains(v) {
                let name = crate::syntax::fresh_name(&v.name, &avoid);
                avoid.insert(name.clone());
                renamed = rename_eigenvar(&renamed, v, &TyVar::new(name, v.level));
            }
        }
    }
    Ok(map_ty(&renamed, &|t| type_substitute(t, var, flat), &|p| {
        match p {
            Payload::Generalized(v) => Payload::Generalized(v.clone()),
            Payload::Instantiated(t) => Payload::Instantiated(type_substitute(t, var, flat)),
        }
    }))
}

/// Remove every AllI-immediately-under-AllEFlat redex by pushing the flat
/// instantiation through the premise derivation. Conclusion unchanged;
/// height never increases.
pub fn remove_alli_alles(d: &Derivation) -> Result<Derivation, TypeError> {
    normalize_derivation_with(d, false)
}

/// Contract every derivation-level pair redex (a projection whose premise
/// ends in ProdI) by selecting the matching component. Conclusion unchanged;
/// height never increases.
pub fn contract_pair_redexes(d: &Derivation) -> Result<Derivation, TypeError> {
    normalize_derivation_with(d, true)
}

/// The preprocessing pass the cut-rank pipeline assumes: no quantifier
/// redexes and no derivation-level pair redexes. Idempotent.
pub fn normalize_derivation(d: &Derivation) -> Result<Derivation, TypeError> {
    let no_q = normalize_derivation_with(d, false)?;
    normalize_derivation_with(&no_q, true)
}

fn normalize_derivation_with(d: &Derivation, pairs: bool) -> Result<Derivation, TypeError> {
    let kids: Vec<Derivation> = d
        .kids()
        .iter()
        .map(|k| normalize_derivation_with(k, pairs))
        .collect::<Result<_, _>>()?;
    let mut node = rebuild_node(d, kids)?;
    loop {
        match node.rule() {
            Rule::AllEFlat if node.kids()[0].rule() == Rule::AllI => {
                let alli = node.kids()[0].clone();
                let Some(Payload::Instantiated(flat)) = node.payload().cloned() else {
                    return Err(TypeError::BadShape("AllEFlat payload missing"));
                };
                let Some(Payload::Generalized(var)) = alli.payload().cloned() else {
                    return Err(TypeError::BadShape("AllI payload missing"));
                };
                // The eigenvariable is absent from the context, so the
                // substituted premise proves the instantiated conclusion in
                // the same context.
                node = subst_flat_deriv(&alli.kids()[0], &var, &flat)?;
            }
            Rule::ProdEL if pairs && node.kids()[0].rule() == Rule::ProdI => {
                node = node.kids()[0].kids()[0].clone();
            }
            Rule::ProdER if pairs && node.kids()[0].rule() == Rule::ProdI => {
                node = node.kids()[0].kids()[1].clone();
            }
            _ => break,
        }
    }
    Ok(node)
}

/// Rebuild a node of the same rule shape over new premises, re-validating
/// the rule's side conditions.
pub fn rebuild_node(d: &Derivation, kids: Vec<Derivation>) -> Result<Derivation, TypeError> {
    match d.rule() {
        Rule::Ax => Ok(d.clone()),
        Rule::ImpI => {
            let Term::Lam(x, _) = d.subject() else {
                return Err(TypeError::SubjectMismatch);
            };
            let [p] = <[Derivation; 1]>::try_from(kids)
                .map_err(|_| TypeError::BadShape("ImpI arity"))?;
            imp_i(p, x)
        }
        Rule::ImpE => {
            let [f, a] = <[Derivation; 2]>::try_from(kids)
                .map_err(|_| TypeError::BadShape("ImpE arity"))?;
            imp_e(f, a)
        }
        Rule::ProdI => {
            let [l, r] = <[Derivation; 2]>::try_from(kids)
                .map_err(|_| TypeError::BadShape("ProdI arity"))?;
            prod_i(l, r)
        }
        Rule::ProdEL => {
            let [p] = <[Derivation; 1]>::try_from(kids)
                .map_err(|_| TypeError::BadShape("ProdE arity"))?;
            prod_el(p)
        }
        Rule::ProdER => {
            let [p] = <[Derivation; 1]>::try_from(kids)
                .map_err(|_| TypeError::BadShape("ProdE arity"))?;
            prod_er(p)
        }
        Rule::AllI => {
            let Some(Payload::Generalized(v)) = d.payload() else {
                return Err(TypeError::BadShape("AllI payload missing"));
            };
            let [p] = <[Derivation; 1]>::try_from(kids)
                .map_err(|_| TypeError::BadShape("AllI arity"))?;
            all_i(p, v)
        }
        Rule::AllEClosed => {
            let Some(Payload::Instantiated(t)) = d.payload() else {
                return Err(TypeError::BadShape("AllE payload missing"));
            };
            let [p] = <[Derivation; 1]>::try_from(kids)
                .map_err(|_| TypeError::BadShape("AllE arity"))?;
            all_e_closed(p, t)
        }
        Rule::AllEFlat => {
            let Some(Payload::Instantiated(t)) = d.payload() else {
                return Err(TypeError::BadShape("AllE payload missing"));
            };
            let [p] = <[Derivation; 1]>::try_from(kids)
                .map_err(|_| TypeError::BadShape("AllE arity"))?;
            all_e_flat(p, t)
        }
    }
}

/// Rename the free term variable `from` to `to` throughout a derivation
/// (subjects, context keys). `to` must be fresh for the whole subtree.
pub fn rename_free_term_var(
    d: &Derivation,
    from: &str,
    to: &str,
) -> Result<Derivation, TypeError> {
    let Some(ty_from) = d.ctx().get(from).cloned() else {
        // Not in scope: by the typing invariant it cannot occur free.
        return Ok(d.clone());
    };
    let mut ctx = d.ctx().clone();
    ctx.remove(from);
    ctx.insert(to.to_string(), ty_from.clone());
    match d.rule() {
        Rule::Ax => {
            let Term::Var(x) = d.subject() else {
                return Err(TypeError::SubjectMismatch);
            };
            ax(&ctx, if x == from { to } else { x })
        }
        Rule::ImpI => {
            let Term::Lam(x, _) = d.subject().clone() else {
                return Err(TypeError::SubjectMismatch);
            };
            if x == from {
                // Rebinding shadows `from` below; only this node's context
                // entry changes, the premise must additionally see `to`.
                let mut want = ctx.clone();
                want.insert(x.clone(), match d.ty() {
                    Type::Arrow(a, _) => (**a).clone(),
                    t => return Err(TypeError::NotAnArrow(t.clone())),
                });
                let p = weaken(&d.kids()[0], &want)?;
                imp_i(p, &x)
            } else {
                let p = rename_free_term_var(&d.kids()[0], from, to)?;
                imp_i(p, &x)
            }
        }
        _ => {
            let kids: Vec<Derivation> = d
                .kids()
                .iter()
                .map(|k| rename_free_term_var(k, from, to))
                .collect::<Result<_, _>>()?;
            rebuild_node(d, kids)
        }
    }
}

/// Cut: from `G, x:rho |- s : sigma` (as `body`, with `x` bound in its
/// context) and `G' |- r : rho` with `G'` contained in `G`, conclude
/// `G |- s[x := r] : sigma`. Height of the result is at most the sum of the
/// heights; cut-rank does not increase beyond the max of the two sides.
pub fn cut(body: &Derivation, x: &str, arg: &Derivation) -> Result<Derivation, TypeError> {
    let Some(rho) = body.ctx().get(x) else {
        return Err(TypeError::MissingBinding(x.to_string()));
    };
    if arg.ty() != rho {
        return Err(TypeError::ArgTypeMismatch {
            expected: rho.clone(),
            found: arg.ty().clone(),
        });
    }
    let mut outer = body.ctx().clone();
    outer.remove(x);
    for (v, t) in arg.ctx() {
        if outer.get(v) != Some(t) {
            return Err(TypeError::CtxMismatch);
        }
    }
    let fv_arg = free_vars(arg.subject());
    cut_go(body, x, arg, &fv_arg)
}

fn cut_go(
    body: &Derivation,
    x: &str,
    arg: &Derivation,
    fv_arg: &BTreeSet<String>,
) -> Result<Derivation, TypeError> {
    let mut ctx = body.ctx().clone();
    ctx.remove(x);
    match body.rule() {
        Rule::Ax => {
            let Term::Var(y) = body.subject() else {
                return Err(TypeError::SubjectMismatch);
            };
            if y == x {
                weaken(arg, &ctx)
            } else {
                ax(&ctx, y)
            }
        }
        Rule::ImpI => {
            let Term::Lam(y, _) = body.subject().clone() else {
                return Err(TypeError::SubjectMismatch);
            };
            if y == x {
                // x is shadowed below; just drop it from this conclusion.
                return Ok(Derivation::make(
                    Rule::ImpI,
                    ctx,
                    body.subject().clone(),
                    body.ty().clone(),
                    None,
                    body.kids().to_vec(),
                ));
            }
            if fv_arg.contains(&y) {
                // The binder would capture a free variable of the argument.
                let mut avoid = fv_arg.clone();
                avoid.extend(body.kids()[0].ctx().keys().cloned());
                avoid.extend(free_vars(body.kids()[0].subject()));
                let y2 = crate::syntax::fresh_name(&y, &avoid);
                let p = rename_free_term_var(&body.kids()[0], &y, &y2)?;
                let p = cut_go(&p, x, arg, fv_arg)?;
                imp_i(p, &y2)
            } else {
                let p = cut_go(&body.kids()[0], x, arg, fv_arg)?;
                imp_i(p, &y)
            }
        }
        _ => {
            let kids: Vec<Derivation> = body
                .kids()
                .iter()
                .map(|k| cut_go(k, x, arg, fv_arg))
                .collect::<Result<_, _>>()?;
            rebuild_node(body, kids)
        }
    }
}
