use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use core::fmt;

/// A type variable with its intrinsic level tag.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TyVar {
    pub name: String,
    pub level: u32,
}

impl TyVar {
    pub fn new(name: impl Into<String>, level: u32) -> TyVar {
        TyVar {
            name: name.into(),
            level,
        }
    }
}

impl fmt::Debug for TyVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}_{}", self.level, self.name)
    }
}

/// A leveled type. In `Forall(v, body)` the body's free type variables are
/// contained in `{v}` (non-interleaving); the constructor [`Type::forall`]
/// enforces this and canonicalizes the bound name, so structural equality
/// coincides with alpha-equivalence of types.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Var(TyVar),
    Arrow(Arc<Type>, Arc<Type>),
    Prod(Arc<Type>, Arc<Type>),
    Forall(TyVar, Arc<Type>),
}

/// Canonical bound-variable name used by [`Type::forall`].
pub(crate) const CANON_BOUND: &str = "t";

impl Type {
    pub fn var(name: impl Into<String>, level: u32) -> Type {
        Type::Var(TyVar::new(name, level))
    }

    pub fn arrow(dom: Type, cod: Type) -> Type {
        Type::Arrow(Arc::new(dom), Arc::new(cod))
    }

    pub fn prod(left: Type, right: Type) -> Type {
        Type::Prod(Arc::new(left), Arc::new(right))
    }

    /// Quantify `var` in `body`. Panics if `body` mentions any other free
    /// type variable: quantification here is non-interleaved by grammar.
    /// The bound variable is renamed to a canonical name, which makes
    /// alpha-equivalent quantified types structurally equal.
    pub fn forall(var: &TyVar, body: Type) -> Type {
        let fv = free_ty_vars(&body);
        assert!(
            fv.iter().all(|v| v == var),
            "forall body may mention only the bound variable"
        );
        let canon = TyVar::new(CANON_BOUND, var.level);
        let body = type_substitute(&body, var, &Type::Var(canon.clone()));
        Type::Forall(canon, Arc::new(body))
    }

    /// The numeral type `N(t) = (t -> t) -> (t -> t)`.
    pub fn numeral(t: Type) -> Type {
        let step = Type::arrow(t.clone(), t);
        Type::arrow(step.clone(), step)
    }

    /// If `self` is `N(t)`, return `t`.
    pub fn unfold_numeral(&self) -> Option<&Type> {
        if let Type::Arrow(a, b) = self {
            if a == b {
                if let Type::Arrow(t1, t2) = &**a {
                    if t1 == t2 {
                        return Some(t1);
                    }
                }
            }
        }
        None
    }

    /// `Nat_0 = forall a0. N(a0)`.
    pub fn nat0() -> Type {
        let a = TyVar::new("t", 0);
        Type::forall(&a, Type::numeral(Type::Var(a.clone())))
    }

    /// `Nat_1 = forall a1. N(a1)`.
    pub fn nat1() -> Type {
        let a = TyVar::new("t", 1);
        Type::forall(&a, Type::numeral(Type::Var(a.clone())))
    }

    /// The tower `base^(k)`: `base^(0) = base`, `base^(k+1) = N(base^(k))`.
    pub fn tower(base: Type, k: u32) -> Type {
        let mut t = base;
        for _ in 0..k {
            t = Type::numeral(t);
        }
        t
    }

    /// `Nat_0^(k)`.
    pub fn nat0_tower(k: u32) -> Type {
        Type::tower(Type::nat0(), k)
    }

    pub fn is_closed(&self) -> bool {
        free_ty_vars(self).is_empty()
    }
}

impl fmt::Debug for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Var(v) => write!(f, "{v:?}"),
            Type::Arrow(a, b) => write!(f, "({a:?} -> {b:?})"),
            Type::Prod(a, b) => write!(f, "({a:?} * {b:?})"),
            Type::Forall(v, b) => write!(f, "(forall {v:?}. {b:?})"),
        }
    }
}

/// Free type variables (bound occurrences excluded).
pub fn free_ty_vars(t: &Type) -> BTreeSet<TyVar> {
    fn go(t: &Type, bound: &mut alloc::vec::Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match t {
            Type::Var(v) => {
                if !bound.iter().any(|b| b == v) {
                    out.insert(v.clone());
                }
            }
            Type::Arrow(a, b) | Type::Prod(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Type::Forall(v, b) => {
                bound.push(v.clone());
                go(b, bound, out);
                bound.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(t, &mut alloc::vec::Vec::new(), &mut out);
    out
}

/// Replace free occurrences of `var` in `t` by `replacement`.
///
/// Quantified bodies mention only their own bound variable, so substitution
/// never descends into a `Forall` and capture is impossible.
pub fn type_substitute(t: &Type, var: &TyVar, replacement: &Type) -> Type {
    match t {
        Type::Var(v) => {
            if v == var {
                replacement.clone()
            } else {
                t.clone()
            }
        }
        Type::Arrow(a, b) => Type::arrow(
            type_substitute(a, var, replacement),
            type_substitute(b, var, replacement),
        ),
        Type::Prod(a, b) => Type::prod(
            type_substitute(a, var, replacement),
            type_substitute(b, var, replacement),
        ),
        Type::Forall(v, _) => {
            debug_assert!(v != var || t == t, "bound variable is canonical");
            t.clone()
        }
    }
}

/// Grammar membership: is `t` a type of level `n`? Variables must carry
/// level exactly `n`; arrows and products need both sides at level `n`;
/// a quantifier over a level-`k` variable requires `k < n` and its body at
/// level `k` (with the free-variable constraint enforced at construction).
pub fn is_level(t: &Type, n: u32) -> bool {
    match t {
        Type::Var(v) => v.level == n,
        Type::Arrow(a, b) | Type::Prod(a, b) => is_level(a, n) && is_level(b, n),
        Type::Forall(v, body) => v.level < n && is_level(body, v.level),
    }
}

/// Flat types: level-0 variables and products only.
pub fn is_flat(t: &Type) -> bool {
    match t {
        Type::Var(v) => v.level == 0,
        Type::Prod(a, b) => is_flat(a) && is_flat(b),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a0() -> Type {
        Type::var("b", 0)
    }

    #[test]
    fn nat0_is_level_1_and_2_but_not_0() {
        let n = Type::nat0();
        assert!(is_level(&n, 1));
        assert!(is_level(&n, 2));
        assert!(!is_level(&n, 0));
    }

    #[test]
    fn variable_level_mismatch() {
        let a1 = Type::var("b", 1);
        assert!(!is_level(&a1, 2));
        assert!(is_level(&a1, 1));
    }

    #[test]
    fn flat_types() {
        assert!(is_flat(&Type::prod(a0(), Type::prod(a0(), a0()))));
        assert!(!is_flat(&Type::arrow(a0(), a0())));
        // distinct level-0 variables may mix in one flat type
        assert!(is_flat(&Type::prod(a0(), Type::var("c", 0))));
        assert!(!is_flat(&Type::var("b", 1)));
    }

    #[test]
    fn flat_implies_level_0() {
        let sigmas = [
            a0(),
            Type::prod(a0(), a0()),
            Type::prod(Type::prod(a0(), Type::var("c", 0)), a0()),
        ];
        for s in sigmas {
            assert!(is_flat(&s) && is_level(&s, 0));
        }
    }

    #[test]
    fn substitute_into_numeral_type() {
        // N(a0)[a0 := a0*a0] = N(a0*a0)
        let v = TyVar::new("b", 0);
        let n = Type::numeral(a0());
        let flat = Type::prod(a0(), a0());
        assert_eq!(
            type_substitute(&n, &v, &flat),
            Type::numeral(Type::prod(a0(), a0()))
        );
    }

    #[test]
    fn substitute_whole_variable_and_miss() {
        let v1 = TyVar::new("b", 1);
        let t = Type::arrow(Type::Var(v1.clone()), Type::Var(v1.clone()));
        assert_eq!(
            type_substitute(&t, &v1, &Type::nat0()),
            Type::arrow(Type::nat0(), Type::nat0())
        );
        // different variable: unchanged
        let w = TyVar::new("c", 0);
        assert_eq!(type_substitute(&a0(), &w, &Type::prod(a0(), a0())), a0());
    }

    #[test]
    fn forall_is_canonical() {
        let b = TyVar::new("b", 0);
        let c = TyVar::new("c", 0);
        let t1 = Type::forall(&b, Type::numeral(Type::Var(b.clone())));
        let t2 = Type::forall(&c, Type::numeral(Type::Var(c.clone())));
        assert_eq!(t1, t2);
        assert_eq!(t1, Type::nat0());
    }

    #[test]
    fn no_closed_level_0_types_among_small_grammar() {
        // level-0 grammar has no quantifiers, so every level-0 type has a
        // free variable; spot-check the claim structurally
        let cases = [a0(), Type::prod(a0(), a0())];
        for t in cases {
            assert!(is_level(&t, 0));
            assert!(!t.is_closed());
        }
    }

    #[test]
    fn unfold_numeral_shape() {
        let n = Type::numeral(Type::nat0());
        assert_eq!(n.unfold_numeral(), Some(&Type::nat0()));
        assert_eq!(Type::nat0().unfold_numeral(), None);
    }
}
