use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::syntax::free_ty_vars;
use crate::syntax::{is_flat, is_level, type_substitute, Term, TyVar, Type};

/// A typing context: a finite map from term variables to types.
pub type Context = BTreeMap<String, Type>;

/// The nine typing rules.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Rule {
    Ax,
    ImpI,
    ImpE,
    ProdI,
    ProdEL,
    ProdER,
    AllI,
    AllEClosed,
    AllEFlat,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Ax => "Ax",
            Rule::ImpI => "ImpI",
            Rule::ImpE => "ImpE",
            Rule::ProdI => "ProdI",
            Rule::ProdEL => "ProdEL",
            Rule::ProdER => "ProdER",
            Rule::AllI => "AllI",
            Rule::AllEClosed => "AllEClosed",
            Rule::AllEFlat => "AllEFlat",
        }
    }
}

/// Extra rule data: the generalized variable for AllI, the instantiating
/// type for the two AllE rules.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Payload {
    Generalized(TyVar),
    Instantiated(Type),
}

#[derive(PartialEq, Eq)]
struct Node {
    rule: Rule,
    ctx: Context,
    term: Term,
    ty: Type,
    payload: Option<Payload>,
    kids: Vec<Derivation>,
}

/// A typing derivation certifying `ctx |- term : ty`. Nodes are shared
/// (`Arc`), so reusing a subderivation in several places is free.
#[derive(Clone, PartialEq, Eq)]
pub struct Derivation(Arc<Node>);

impl Derivation {
    pub fn rule(&self) -> Rule {
        self.0.rule
    }
    pub fn ctx(&self) -> &Context {
        &self.0.ctx
    }
    pub fn subject(&self) -> &Term {
        &self.0.term
    }
    pub fn ty(&self) -> &Type {
        &self.0.ty
    }
    pub fn payload(&self) -> Option<&Payload> {
        self.0.payload.as_ref()
    }
    pub fn kids(&self) -> &[Derivation] {
        &self.0.kids
    }

    pub fn node_count(&self) -> u64 {
        1 + self.kids().iter().map(Derivation::node_count).sum::<u64>()
    }

    pub(crate) fn make(
        rule: Rule,
        ctx: Context,
        term: Term,
        ty: Type,
        payload: Option<Payload>,
        kids: Vec<Derivation>,
    ) -> Derivation {
        Derivation(Arc::new(Node {
            rule,
            ctx,
            term,
            ty,
            payload,
            kids,
        }))
    }
}

impl fmt::Debug for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[... |- {:?} : {:?}]",
            self.rule().name(),
            self.subject(),
            self.ty()
        )
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TypeError {
    AxiomMiss(String),
    SubjectMismatch,
    CtxMismatch,
    NotAnArrow(Type),
    NotAProduct(Type),
    NotAForall(Type),
    ArgTypeMismatch { expected: Type, found: Type },
    EigenvarInContext(TyVar),
    NonInterleaving(TyVar),
    NotClosed(Type),
    BadInstLevel { quantifier_level: u32, found: Type },
    NotFlat(Type),
    LevelTooHigh(Type),
    BadShape(&'static str),
    MissingBinding(String),
    ConclusionMismatch,
    Budget(&'static str),
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeError::AxiomMiss(x) => write!(f, "axiom-miss: {x} not bound in context"),
            TypeError::SubjectMismatch => write!(f, "subject does not match rule shape"),
            TypeError::CtxMismatch => write!(f, "premise context does not match"),
            TypeError::NotAnArrow(t) => write!(f, "not an arrow type: {t:?}"),
            TypeError::NotAProduct(t) => write!(f, "not a product type: {t:?}"),
            TypeError::NotAForall(t) => write!(f, "not a quantified type: {t:?}"),
            TypeError::ArgTypeMismatch { expected, found } => {
                write!(f, "argument type mismatch: expected {expected:?}, found {found:?}")
            }
            TypeError::EigenvarInContext(v) => {
                write!(f, "generalized variable {v:?} occurs free in the context")
            }
            TypeError::NonInterleaving(v) => {
                write!(f, "body of a quantifier over {v:?} mentions another free variable")
            }
            TypeError::NotClosed(t) => write!(f, "not-closed: {t:?} has free type variables"),
            TypeError::BadInstLevel {
                quantifier_level,
                found,
            } => write!(
                f,
                "instantiating type {found:?} has no level <= {quantifier_level}"
            ),
            TypeError::NotFlat(t) => write!(f, "not a flat type: {t:?}"),
            TypeError::LevelTooHigh(t) => write!(f, "type exceeds level 1: {t:?}"),
            TypeError::BadShape(s) => write!(f, "malformed derivation node: {s}"),
            TypeError::MissingBinding(x) => write!(f, "variable {x} not bound in context"),
            TypeError::ConclusionMismatch => write!(f, "conclusion does not follow from premises"),
            TypeError::Budget(what) => write!(f, "budget exceeded: {what}"),
        }
    }
}

/// A validation failure together with the path (child indices from the
/// root) of the offending node.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CheckError {
    pub path: Vec<usize>,
    pub error: TypeError,
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at node ")?;
        if self.path.is_empty() {
            write!(f, "(root)")?;
        } else {
            for (i, p) in self.path.iter().enumerate() {
                if i > 0 {
                    write!(f, ".")?;
                }
                write!(f, "{p}")?;
            }
        }
        write!(f, ": {}", self.error)
    }
}

/// Least level (searched up to 8) at which `t` sits in the type grammar.
pub fn level_of(t: &Type) -> Option<u32> {
    (0..=8).find(|&n| is_level(t, n))
}

fn well_formed(t: &Type) -> Result<(), TypeError> {
    if level_of(t).is_some() {
        Ok(())
    } else {
        Err(TypeError::BadShape("type fits no level"))
    }
}

// ---------------------------------------------------------------------------
// Builders. Each checks its own side conditions, so anything assembled from
// these passes check_derivation by construction.
// ---------------------------------------------------------------------------

pub fn ax(ctx: &Context, var: &str) -> Result<Derivation, TypeError> {
    let ty = ctx
        .get(var)
        .cloned()
        .ok_or_else(|| TypeError::AxiomMiss(var.to_string()))?;
    Ok(Derivation::make(
        Rule::Ax,
        ctx.clone(),
        Term::var(var),
        ty,
        None,
        Vec::new(),
    ))
}

/// From `ctx, x:s |- r : t` conclude `ctx |- \x.r : s -> t`.
pub fn imp_i(premise: Derivation, bound: &str) -> Result<Derivation, TypeError> {
    let mut ctx = premise.ctx().clone();
    let dom = ctx
        .remove(bound)
        .ok_or_else(|| TypeError::MissingBinding(bound.to_string()))?;
    let ty = Type::arrow(dom, premise.ty().clone());
    let term = Term::lam(bound, premise.subject().clone());
    Ok(Derivation::make(
        Rule::ImpI,
        ctx,
        term,
        ty,
        None,
        alloc::vec![premise],
    ))
}

pub fn imp_e(fun: Derivation, arg: Derivation) -> Result<Derivation, TypeError> {
    if fun.ctx() != arg.ctx() {
        return Err(TypeError::CtxMismatch);
    }
    let (dom, cod) = match fun.ty() {
        Type::Arrow(a, b) => ((**a).clone(), (**b).clone()),
        other => return Err(TypeError::NotAnArrow(other.clone())),
    };
    if arg.ty() != &dom {
        return Err(TypeError::ArgTypeMismatch {
            expected: dom,
            found: arg.ty().clone(),
        });
    }
    let term = Term::app(fun.subject().clone(), arg.subject().clone());
    let ctx = fun.ctx().clone();
    Ok(Derivation::make(
        Rule::ImpE,
        ctx,
        term,
        cod,
        None,
        alloc::vec![fun, arg],
    ))
}

/// Apply `fun` to the arguments in order.
pub fn imp_es(
    fun: Derivation,
    args: impl IntoIterator<Item = Derivation>,
) -> Result<Derivation, TypeError> {
    let mut d = fun;
    for a in args {
        d = imp_e(d, a)?;
    }
    Ok(d)
}

pub fn prod_i(left: Derivation, right: Derivation) -> Result<Derivation, TypeError> {
    if left.ctx() != right.ctx() {
        return Err(TypeError::CtxMismatch);
    }
    let ty = Type::prod(left.ty().clone(), right.ty().clone());
    let term = Term::pair(left.subject().clone(), right.subject().clone());
    let ctx = left.ctx().clone();
    Ok(Derivation::make(
        Rule::ProdI,
        ctx,
        term,
        ty,
        None,
        alloc::vec![left, right],
    ))
}

pub fn prod_el(premise: Derivation) -> Result<Derivation, TypeError> {
    let ty = match premise.ty() {
        Type::Prod(a, _) => (**a).clone(),
        other => return Err(TypeError::NotAProduct(other.clone())),
    };
    let term = Term::proj_l(premise.subject().clone());
    let ctx = premise.ctx().clone();
    Ok(Derivation::make(
        Rule::ProdEL,
        ctx,
        term,
        ty,
        None,
        alloc::vec![premise],
    ))
}

pub fn prod_er(premise: Derivation) -> Result<Derivation, TypeError> {
    let ty = match premise.ty() {
        Type::Prod(_, b) => (**b).clone(),
        other => return Err(TypeError::NotAProduct(other.clone())),
    };
    let term = Term::proj_r(premise.subject().clone());
    let ctx = premise.ctx().clone();
    Ok(Derivation::make(
        Rule::ProdER,
        ctx,
        term,
        ty,
        None,
        alloc::vec![premise],
    ))
}

/// Generalize `var` (which must not occur free in the context, and must be
/// the only free variable of the premise type).
pub fn all_i(premise: Derivation, var: &TyVar) -> Result<Derivation, TypeError> {
    for t in premise.ctx().values() {
        if free_ty_vars(t).contains(var) {
            return Err(TypeError::EigenvarInContext(var.clone()));
        }
    }
    let fv = free_ty_vars(premise.ty());
    if !fv.iter().all(|v| v == var) {
        return Err(TypeError::NonInterleaving(var.clone()));
    }
    if !is_level(premise.ty(), var.level) {
        return Err(TypeError::BadShape("premise type is not at the variable's level"));
    }
    let ty = Type::forall(var, premise.ty().clone());
    let term = premise.subject().clone();
    let ctx = premise.ctx().clone();
    Ok(Derivation::make(
        Rule::AllI,
        ctx,
        term,
        ty,
        Some(Payload::Generalized(var.clone())),
        alloc::vec![premise],
    ))
}

/// Instantiate a quantifier over a level-`k` variable at a closed type of
/// some level `l <= k`.
pub fn all_e_closed(premise: Derivation, inst: &Type) -> Result<Derivation, TypeError> {
    let (var, body) = match premise.ty() {
        Type::Forall(v, b) => (v.clone(), (**b).clone()),
        other => return Err(TypeError::NotAForall(other.clone())),
    };
    if !inst.is_closed() {
        return Err(TypeError::NotClosed(inst.clone()));
    }
    if !(0..=var.level).any(|l| is_level(inst, l)) {
        return Err(TypeError::BadInstLevel {
            quantifier_level: var.level,
            found: inst.clone(),
        });
    }
    let ty = type_substitute(&body, &var, inst);
    let term = premise.subject().clone();
    let ctx = premise.ctx().clone();
    Ok(Derivation::make(
        Rule::AllEClosed,
        ctx,
        term,
        ty,
        Some(Payload::Instantiated(inst.clone())),
        alloc::vec![premise],
    ))
}

/// Instantiate a quantifier over a level-0 variable at a flat type.
pub fn all_e_flat(premise: Derivation, inst: &Type) -> Result<Derivation, TypeError> {
    let (var, body) = match premise.ty() {
        Type::Forall(v, b) => (v.clone(), (**b).clone()),
        other => return Err(TypeError::NotAForall(other.clone())),
    };
    if var.level != 0 {
        return Err(TypeError::BadShape("flat instantiation needs a level-0 quantifier"));
    }
    if !is_flat(inst) {
        return Err(TypeError::NotFlat(inst.clone()));
    }
    let ty = type_substitute(&body, &var, inst);
    let term = premise.subject().clone();
    let ctx = premise.ctx().clone();
    Ok(Derivation::make(
        Rule::AllEFlat,
        ctx,
        term,
        ty,
        Some(Payload::Instantiated(inst.clone())),
        alloc::vec![premise],
    ))
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Validate every node against its rule. Errors name the violated side
/// condition and the path to the node.
pub fn check_derivation(d: &Derivation) -> Result<(), CheckError> {
    let mut path = Vec::new();
    check_node(d, &mut path)
}

fn fail(path: &[usize], error: TypeError) -> Result<(), CheckError> {
    Err(CheckError {
        path: path.to_vec(),
        error,
    })
}

fn check_node(d: &Derivation, path: &mut Vec<usize>) -> Result<(), CheckError> {
    for t in d.ctx().values() {
        if let Err(e) = well_formed(t) {
            return fail(path, e);
        }
    }
    if let Err(e) = well_formed(d.ty()) {
        return fail(path, e);
    }
    let kids = d.kids();
    match d.rule() {
        Rule::Ax => {
            if !kids.is_empty() {
                return fail(path, TypeError::BadShape("axiom with premises"));
            }
            match d.subject() {
                Term::Var(x) => match d.ctx().get(x) {
                    Some(t) if t == d.ty() => {}
                    Some(_) => return fail(path, TypeError::ConclusionMismatch),
                    None => return fail(path, TypeError::AxiomMiss(x.clone())),
                },
                _ => return fail(path, TypeError::SubjectMismatch),
            }
        }
        Rule::ImpI => {
            let [p] = kids else {
                return fail(path, TypeError::BadShape("ImpI arity"));
            };
            let (x, body) = match d.subject() {
                Term::Lam(x, b) => (x, b),
                _ => return fail(path, TypeError::SubjectMismatch),
            };
            let (dom, cod) = match d.ty() {
                Type::Arrow(a, b) => (a, b),
                t => return fail(path, TypeError::NotAnArrow(t.clone())),
            };
            let mut expect = d.ctx().clone();
            expect.insert(x.clone(), (**dom).clone());
            if p.ctx() != &expect {
                return fail(path, TypeError::CtxMismatch);
            }
            if p.subject() != &**body || p.ty() != &**cod {
                return fail(path, TypeError::ConclusionMismatch);
            }
        }
        Rule::ImpE => {
            let [f, a] = kids else {
                return fail(path, TypeError::BadShape("ImpE arity"));
            };
            let (tf, ta) = match d.subject() {
                Term::App(tf, ta) => (tf, ta),
                _ => return fail(path, TypeError::SubjectMismatch),
            };
            if f.ctx() != d.ctx() || a.ctx() != d.ctx() {
                return fail(path, TypeError::CtxMismatch);
            }
            if f.subject() != &**tf || a.subject() != &**ta {
                return fail(path, TypeError::ConclusionMismatch);
            }
            match f.ty() {
                Type::Arrow(dom, cod) => {
                    if a.ty() != &**dom {
                        return fail(
                            path,
                            TypeError::ArgTypeMismatch {
                                expected: (**dom).clone(),
                                found: a.ty().clone(),
                            },
                        );
                    }
                    if d.ty() != &**cod {
                        return fail(path, TypeError::ConclusionMismatch);
                    }
                }
                t => return fail(path, TypeError::NotAnArrow(t.clone())),
            }
        }
        Rule::ProdI => {
            let [l, r] = kids else {
                return fail(path, TypeError::BadShape("ProdI arity"));
            };
            let (tl, tr) = match d.subject() {
                Term::Pair(a, b) => (a, b),
                _ => return fail(path, TypeError::SubjectMismatch),
            };
            if l.ctx() != d.ctx() || r.ctx() != d.ctx() {
                return fail(path, TypeError::CtxMismatch);
            }
            if l.subject() != &**tl || r.subject() != &**tr {
                return fail(path, TypeError::ConclusionMismatch);
            }
            if d.ty() != &Type::prod(l.ty().clone(), r.ty().clone()) {
                return fail(path, TypeError::ConclusionMismatch);
            }
        }
        Rule::ProdEL | Rule::ProdER => {
            let [p] = kids else {
                return fail(path, TypeError::BadShape("ProdE arity"));
            };
            let inner = match (d.rule(), d.subject()) {
                (Rule::ProdEL, Term::ProjL(r)) | (Rule::ProdER, Term::ProjR(r)) => r,
                _ => return fail(path, TypeError::SubjectMismatch),
            };
            if p.ctx() != d.ctx() {
                return fail(path, TypeError::CtxMismatch);
            }
            if p.subject() != &**inner {
                return fail(path, TypeError::ConclusionMismatch);
            }
            match p.ty() {
                Type::Prod(a, b) => {
                    let sel = if d.rule() == Rule::ProdEL { a } else { b };
                    if d.ty() != &**sel {
                        return fail(path, TypeError::ConclusionMismatch);
                    }
                }
                t => return fail(path, TypeError::NotAProduct(t.clone())),
            }
        }
        Rule::AllI => {
            let [p] = kids else {
                return fail(path, TypeError::BadShape("AllI arity"));
            };
            let Some(Payload::Generalized(var)) = d.payload() else {
                return fail(path, TypeError::BadShape("AllI payload missing"));
            };
            if p.ctx() != d.ctx() || p.subject() != d.subject() {
                return fail(path, TypeError::CtxMismatch);
            }
            for t in d.ctx().values() {
                if free_ty_vars(t).contains(var) {
                    return fail(path, TypeError::EigenvarInContext(var.clone()));
                }
            }
            let fv = free_ty_vars(p.ty());
            if !fv.iter().all(|v| v == var) {
                return fail(path, TypeError::NonInterleaving(var.clone()));
            }
            if !is_level(p.ty(), var.level) {
                return fail(path, TypeError::BadShape("premise type not at variable level"));
            }
            if d.ty() != &Type::forall(var, p.ty().clone()) {
                return fail(path, TypeError::ConclusionMismatch);
            }
        }
        Rule::AllEClosed | Rule::AllEFlat => {
            let [p] = kids else {
                return fail(path, TypeError::BadShape("AllE arity"));
            };
            let Some(Payload::Instantiated(inst)) = d.payload() else {
                return fail(path, TypeError::BadShape("AllE payload missing"));
            };
            if p.ctx() != d.ctx() || p.subject() != d.subject() {
                return fail(path, TypeError::CtxMismatch);
            }
            let (var, body) = match p.ty() {
                Type::Forall(v, b) => (v, b),
                t => return fail(path, TypeError::NotAForall(t.clone())),
            };
            if d.rule() == Rule::AllEClosed {
                if !inst.is_closed() {
                    return fail(path, TypeError::NotClosed(inst.clone()));
                }
                if !(0..=var.level).any(|l| is_level(inst, l)) {
                    return fail(
                        path,
                        TypeError::BadInstLevel {
                            quantifier_level: var.level,
                            found: inst.clone(),
                        },
                    );
                }
            } else {
                if var.level != 0 {
                    return fail(path, TypeError::BadShape("flat instantiation of non-level-0"));
                }
                if !is_flat(inst) {
                    return fail(path, TypeError::NotFlat(inst.clone()));
                }
            }
            if d.ty() != &type_substitute(body, var, inst) {
                return fail(path, TypeError::ConclusionMismatch);
            }
        }
    }
    for (i, k) in kids.iter().enumerate() {
        path.push(i);
        check_node(k, path)?;
        path.pop();
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Rank
// ---------------------------------------------------------------------------

/// The rank of a level <= 1 type: variables 0, products max, arrows
/// max(rank dom + 1, rank cod), quantifiers transparent.
pub fn rank(t: &Type) -> Result<u64, TypeError> {
    if !is_level(t, 0) && !is_level(t, 1) {
        return Err(TypeError::LevelTooHigh(t.clone()));
    }
    fn rk(t: &Type) -> u64 {
        match t {
            Type::Var(_) => 0,
            Type::Prod(a, b) => rk(a).max(rk(b)),
            Type::Arrow(a, b) => (rk(a) + 1).max(rk(b)),
            Type::Forall(_, b) => rk(b),
        }
    }
    Ok(rk(t))
}

/// Max rank of the context's types, 0 if empty.
pub fn context_rank(ctx: &Context) -> Result<u64, TypeError> {
    let mut m = 0;
    for t in ctx.values() {
        m = m.max(rank(t)?);
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Weakening
// ---------------------------------------------------------------------------

/// Weaken `d` to the larger context `target`. Eigenvariables of AllI nodes
/// that would clash with the added types are renamed first.
pub fn weaken(d: &Derivation, target: &Context) -> Result<Derivation, TypeError> {
    for (x, t) in d.ctx() {
        if target.get(x) != Some(t) {
            return Err(TypeError::CtxMismatch);
        }
    }
    let mut added = Context::new();
    for (x, t) in target {
        if !d.ctx().contains_key(x) {
            added.insert(x.clone(), t.clone());
        }
    }
    if added.is_empty() {
        return Ok(d.clone());
    }
    let mut clash: alloc::collections::BTreeSet<TyVar> = alloc::collections::BTreeSet::new();
    for t in added.values() {
        clash.extend(free_ty_vars(t));
    }
    let mut renamed = d.clone();
    if !clash.is_empty() {
        let used = super::transform::eigenvars(&renamed);
        let mut avoid: alloc::collections::BTreeSet<String> =
            used.iter().map(|v| v.name.clone()).collect();
        avoid.extend(clash.iter().map(|v| v.name.clone()));
        for v in used {
            if clash.contains(&v) {
                let fresh_name = crate::syntax::fresh_name(&v.name, &avoid);
                avoid.insert(fresh_name.clone());
                let to = TyVar::new(fresh_name, v.level);
                renamed = super::transform::rename_eigenvar(&renamed, &v, &to);
            }
        }
    }
    Ok(weaken_unchecked(&renamed, &added))
}

fn weaken_unchecked(d: &Derivation, added: &Context) -> Derivation {
    let mut ctx = added.clone();
    for (x, t) in d.ctx() {
        ctx.insert(x.clone(), t.clone());
    }
    let kids = d
        .kids()
        .iter()
        .map(|k| weaken_unchecked(k, added))
        .collect();
    Derivation::make(
        d.rule(),
        ctx,
        d.subject().clone(),
        d.ty().clone(),
        d.payload().cloned(),
        kids,
    )
}
