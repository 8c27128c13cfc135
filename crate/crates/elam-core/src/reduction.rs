//! Beta and projection reduction under the normal-order (leftmost-outermost)
//! strategy with explicit fuel, eta only as an equality test, the Church
//! numeral codec, and reduction that transports a typing derivation along
//! with the term.

use alloc::string::String;
use alloc::sync::Arc;

use crate::syntax::{alpha_eq, substitute, Term};
use crate::typing::{
    self, cut, imp_e, imp_i, prod_el, prod_er, prod_i, remove_alli_alles, Derivation, Rule,
    TypeError,
};

/// Result of fuel-bounded normalization. A `FuelExhausted` outcome is a
/// value, not a failure: it carries the partially reduced term and the
/// number of contractions performed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NormalizeResult {
    Normal { term: Term, steps: u64 },
    FuelExhausted { partial: Term, steps: u64 },
}

impl NormalizeResult {
    pub fn term(&self) -> &Term {
        match self {
            NormalizeResult::Normal { term, .. } => term,
            NormalizeResult::FuelExhausted { partial, .. } => partial,
        }
    }

    pub fn steps(&self) -> u64 {
        match self {
            NormalizeResult::Normal { steps, .. } | NormalizeResult::FuelExhausted { steps, .. } => {
                *steps
            }
        }
    }

    pub fn is_normal(&self) -> bool {
        matches!(self, NormalizeResult::Normal { .. })
    }
}

/// Contract the leftmost-outermost redex (beta, or a projection applied to a
/// pair); `None` if the term is normal.
pub fn step(t: &Term) -> Option<Term> {
    match t {
        Term::Var(_) => None,
        Term::App(f, a) => {
            if let Term::Lam(x, body) = &**f {
                return Some(substitute(body, x, a));
            }
            if let Some(f2) = step(f) {
                return Some(Term::App(Arc::new(f2), a.clone()));
            }
            step(a).map(|a2| Term::App(f.clone(), Arc::new(a2)))
        }
        Term::Lam(x, b) => step(b).map(|b2| Term::lam(x.clone(), b2)),
        Term::Pair(l, r) => {
            if let Some(l2) = step(l) {
                return Some(Term::Pair(Arc::new(l2), r.clone()));
            }
            step(r).map(|r2| Term::Pair(l.clone(), Arc::new(r2)))
        }
        Term::ProjL(u) => {
            if let Term::Pair(l, _) = &**u {
                return Some((**l).clone());
            }
            step(u).map(Term::proj_l)
        }
        Term::ProjR(u) => {
            if let Term::Pair(_, r) = &**u {
                return Some((**r).clone());
            }
            step(u).map(Term::proj_r)
        }
    }
}

/// True if the term contains no beta or projection redex.
pub fn is_normal(t: &Term) -> bool {
    match t {
        Term::Var(_) => true,
        Term::App(f, a) => !matches!(&**f, Term::Lam(..)) && is_normal(f) && is_normal(a),
        Term::Lam(_, b) => is_normal(b),
        Term::Pair(l, r) => is_normal(l) && is_normal(r),
        Term::ProjL(u) | Term::ProjR(u) => !matches!(&**u, Term::Pair(..)) && is_normal(u),
    }
}

struct Fuel {
    left: u64,
    used: u64,
}

impl Fuel {
    fn take(&mut self) -> bool {
        if self.left == 0 {
            false
        } else {
            self.left -= 1;
            self.used += 1;
            true
        }
    }
}

// Errors carry the partially reduced term when fuel runs out.
fn whnf(t: Term, fuel: &mut Fuel) -> Result<Term, Term> {
    match t {
        Term::App(f, a) => {
            let f2 = whnf((*f).clone(), fuel).map_err(|p| Term::App(Arc::new(p), a.clone()))?;
            if let Term::Lam(x, body) = &f2 {
                if !fuel.take() {
                    return Err(Term::App(Arc::new(f2.clone()), a));
                }
                whnf(substitute(body, x, &a), fuel)
            } else {
                Ok(Term::App(Arc::new(f2), a))
            }
        }
        Term::ProjL(u) => {
            let u2 = whnf((*u).clone(), fuel).map_err(|p| Term::proj_l(p))?;
            if let Term::Pair(l, _) = &u2 {
                if !fuel.take() {
                    return Err(Term::proj_l(u2.clone()));
                }
                whnf((**l).clone(), fuel)
            } else {
                Ok(Term::proj_l(u2))
            }
        }
        Term::ProjR(u) => {
            let u2 = whnf((*u).clone(), fuel).map_err(|p| Term::proj_r(p))?;
            if let Term::Pair(_, r) = &u2 {
                if !fuel.take() {
                    return Err(Term::proj_r(u2.clone()));
                }
                whnf((**r).clone(), fuel)
            } else {
                Ok(Term::proj_r(u2))
            }
        }
        other => Ok(other),
    }
}

fn nf(t: Term, fuel: &mut Fuel) -> Result<Term, Term> {
    let t = whnf(t, fuel)?;
    match t {
        Term::Var(_) => Ok(t),
        Term::Lam(x, b) => match nf((*b).clone(), fuel) {
            Ok(b2) => Ok(Term::lam(x, b2)),
            Err(p) => Err(Term::lam(x, p)),
        },
        Term::App(f, a) => {
            // Head is stable (not a lambda); finish the function part, then
            // the argument, left to right.
            let f2 = nf((*f).clone(), fuel).map_err(|p| Term::App(Arc::new(p), a.clone()))?;
            let f2 = Arc::new(f2);
            match nf((*a).clone(), fuel) {
                Ok(a2) => Ok(Term::App(f2, Arc::new(a2))),
                Err(p) => Err(Term::App(f2, Arc::new(p))),
            }
        }
        Term::Pair(l, r) => {
            let l2 = nf((*l).clone(), fuel).map_err(|p| Term::Pair(Arc::new(p), r.clone()))?;
            let l2 = Arc::new(l2);
            match nf((*r).clone(), fuel) {
                Ok(r2) => Ok(Term::Pair(l2, Arc::new(r2))),
                Err(p) => Err(Term::Pair(l2, Arc::new(p))),
            }
        }
        Term::ProjL(u) => match nf((*u).clone(), fuel) {
            Ok(u2) => Ok(Term::proj_l(u2)),
            Err(p) => Err(Term::proj_l(p)),
        },
        Term::ProjR(u) => match nf((*u).clone(), fuel) {
            Ok(u2) => Ok(Term::proj_r(u2)),
            Err(p) => Err(Term::proj_r(p)),
        },
    }
}

/// Normalize under the leftmost-outermost strategy, contracting at most
/// `fuel` redexes. Implemented as a recursive normalizer that performs the
/// same contraction sequence as iterating [`step`].
pub fn normalize(t: &Term, fuel: u64) -> NormalizeResult {
    let mut f = Fuel {
        left: fuel,
        used: 0,
    };
    match nf(t.clone(), &mut f) {
        Ok(term) => NormalizeResult::Normal {
            term,
            steps: f.used,
        },
        Err(partial) => NormalizeResult::FuelExhausted {
            partial,
            steps: f.used,
        },
    }
}

/// Why an equality query could not be decided.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Undecided {
    pub fuel: u64,
}

/// Beta-equality, decided by comparing normal forms up to alpha.
pub fn beta_eq(a: &Term, b: &Term, fuel: u64) -> Result<bool, Undecided> {
    let na = normalize(a, fuel);
    let nb = normalize(b, fuel);
    match (na, nb) {
        (
            NormalizeResult::Normal { term: ta, .. },
            NormalizeResult::Normal { term: tb, .. },
        ) => Ok(alpha_eq(&ta, &tb)),
        _ => Err(Undecided { fuel }),
    }
}

/// Exhaustive eta-contraction: `\x. t x` becomes `t` whenever `x` is not
/// free in `t`. Applied bottom-up to a fixpoint; on a normal input it never
/// introduces a beta or projection redex.
pub fn eta_contract(t: &Term) -> Term {
    match t {
        Term::Var(_) => t.clone(),
        Term::App(f, a) => Term::app(eta_contract(f), eta_contract(a)),
        Term::Pair(l, r) => Term::pair(eta_contract(l), eta_contract(r)),
        Term::ProjL(u) => Term::proj_l(eta_contract(u)),
        Term::ProjR(u) => Term::proj_r(eta_contract(u)),
        Term::Lam(x, b) => {
            let b2 = eta_contract(b);
            if let Term::App(f, a) = &b2 {
                if matches!(&**a, Term::Var(y) if y == x)
                    && !crate::syntax::occurs_free(f, x)
                {
                    return (**f).clone();
                }
            }
            Term::lam(x.clone(), b2)
        }
    }
}

/// Beta-eta-equality: normalize both sides, eta-contract exhaustively, then
/// compare up to alpha.
pub fn beta_eta_eq(a: &Term, b: &Term, fuel: u64) -> Result<bool, Undecided> {
    let na = normalize(a, fuel);
    let nb = normalize(b, fuel);
    match (na, nb) {
        (
            NormalizeResult::Normal { term: ta, .. },
            NormalizeResult::Normal { term: tb, .. },
        ) => Ok(alpha_eq(&eta_contract(&ta), &eta_contract(&tb))),
        _ => Err(Undecided { fuel }),
    }
}

/// The Church numeral `\f.\x. f^n x`.
pub fn encode_numeral(n: u64) -> Term {
    let mut body = Term::var("x");
    for _ in 0..n {
        body = Term::app(Term::var("f"), body);
    }
    Term::lams(&["f", "x"], body)
}

/// Decode a normal term as a numeral, up to alpha; the bare identity
/// `\x.x` decodes as 1 (its eta-expansion is the numeral).
pub fn decode_numeral(t: &Term) -> Option<u64> {
    let Term::Lam(f, body) = t else { return None };
    match &**body {
        // \x. x as the eta-contracted numeral 1
        Term::Var(x) if x == f => Some(1),
        Term::Lam(x, spine) => {
            if f == x {
                // binder shadowing: \f.\f. ... can only be zero-shaped
                return match &**spine {
                    Term::Var(z) if z == x => Some(0),
                    _ => None,
                };
            }
            let mut n = 0u64;
            let mut cur = spine;
            loop {
                match &**cur {
                    Term::Var(z) if z == x => return Some(n),
                    Term::App(g, rest) => match &**g {
                        Term::Var(h) if h == f => {
                            n += 1;
                            cur = rest;
                        }
                        _ => return None,
                    },
                    _ => return None,
                }
            }
        }
        _ => None,
    }
}

/// Outcome of fuel-bounded derivation-transporting reduction.
#[derive(Clone, Debug)]
pub enum DerivNormalizeResult {
    Normal { derivation: Derivation, steps: u64 },
    FuelExhausted { derivation: Derivation, steps: u64 },
}

impl DerivNormalizeResult {
    pub fn derivation(&self) -> &Derivation {
        match self {
            DerivNormalizeResult::Normal { derivation, .. }
            | DerivNormalizeResult::FuelExhausted { derivation, .. } => derivation,
        }
    }

    pub fn steps(&self) -> u64 {
        match self {
            DerivNormalizeResult::Normal { steps, .. }
            | DerivNormalizeResult::FuelExhausted { steps, .. } => *steps,
        }
    }

    pub fn is_normal(&self) -> bool {
        matches!(self, DerivNormalizeResult::Normal { .. })
    }
}

/// Reduce the subject of a derivation in leftmost-outermost order while
/// transporting the derivation: beta steps substitute the argument
/// derivation through the body (cut), projection steps select the matching
/// ProdI premise. Context and type of the conclusion never change.
pub fn reduce_with_derivation(
    d: &Derivation,
    fuel: u64,
) -> Result<DerivNormalizeResult, TypeError> {
    let mut cur = remove_alli_alles(d)?;
    let mut steps = 0u64;
    while steps < fuel {
        match contract_first(&cur)? {
            Some(next) => {
                // Quantifier redexes can appear after a cut; they are
                // derivation-level only and do not count as term steps.
                cur = remove_alli_alles(&next)?;
                steps += 1;
            }
            None => {
                return Ok(DerivNormalizeResult::Normal {
                    derivation: cur,
                    steps,
                })
            }
        }
    }
    if contract_first(&cur)?.is_none() {
        Ok(DerivNormalizeResult::Normal {
            derivation: cur,
            steps,
        })
    } else {
        Ok(DerivNormalizeResult::FuelExhausted {
            derivation: cur,
            steps,
        })
    }
}

/// Contract the leftmost-outermost redex of the subject inside the
/// derivation. Returns `None` if the subject is normal.
fn contract_first(d: &Derivation) -> Result<Option<Derivation>, TypeError> {
    match d.rule() {
        Rule::Ax => Ok(None),
        Rule::ImpE => {
            let fun = &d.kids()[0];
            let arg = &d.kids()[1];
            if matches!(fun.subject(), Term::Lam(..)) {
                // With quantifier redexes removed, a lambda of arrow type
                // ends in ImpI.
                if fun.rule() != Rule::ImpI {
                    return Err(TypeError::BadShape("lambda subject not concluded by ImpI"));
                }
                let Term::Lam(x, _) = fun.subject().clone() else {
                    return Err(TypeError::SubjectMismatch);
                };
                return Ok(Some(cut(&fun.kids()[0], &x, arg)?));
            }
            if let Some(f2) = contract_first(fun)? {
                return Ok(Some(imp_e(f2, arg.clone())?));
            }
            Ok(contract_first(arg)?
                .map(|a2| imp_e(fun.clone(), a2))
                .transpose()?)
        }
        Rule::ProdEL | Rule::ProdER => {
            let p = &d.kids()[0];
            if matches!(p.subject(), Term::Pair(..)) {
                if p.rule() != Rule::ProdI {
                    return Err(TypeError::BadShape("pair subject not concluded by ProdI"));
                }
                let pick = if d.rule() == Rule::ProdEL { 0 } else { 1 };
                return Ok(Some(p.kids()[pick].clone()));
            }
            let inner = contract_first(p)?;
            Ok(inner
                .map(|p2| {
                    if d.rule() == Rule::ProdEL {
                        prod_el(p2)
                    } else {
                        prod_er(p2)
                    }
                })
                .transpose()?)
        }
        Rule::ImpI => Ok(contract_first(&d.kids()[0])?
            .map(|p| {
                let Term::Lam(x, _) = d.subject().clone() else {
                    return Err(TypeError::SubjectMismatch);
                };
                imp_i(p, &x)
            })
            .transpose()?),
        Rule::ProdI => {
            let l = &d.kids()[0];
            let r = &d.kids()[1];
            if let Some(l2) = contract_first(l)? {
                return Ok(Some(prod_i(l2, r.clone())?));
            }
            Ok(contract_first(r)?
                .map(|r2| prod_i(l.clone(), r2))
                .transpose()?)
        }
        Rule::AllI | Rule::AllEClosed | Rule::AllEFlat => {
            let inner = contract_first(&d.kids()[0])?;
            Ok(inner
                .map(|p| typing::transform_rebuild(d, alloc::vec![p]))
                .transpose()?)
        }
    }
}
