use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

/// An untyped lambda term with pairs.
///
/// Children are `Arc`-shared: cloning is O(1) and reduction reuses
/// unchanged subtrees, which keeps Church-arithmetic workloads feasible.
#[derive(Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    App(Arc<Term>, Arc<Term>),
    Lam(String, Arc<Term>),
    Pair(Arc<Term>, Arc<Term>),
    ProjL(Arc<Term>),
    ProjR(Arc<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App(Arc::new(fun), Arc::new(arg))
    }

    /// Left-associated application `f a1 ... an`.
    pub fn apps(fun: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(fun, Term::app)
    }

    pub fn lam(bound: impl Into<String>, body: Term) -> Term {
        Term::Lam(bound.into(), Arc::new(body))
    }

    /// `\x1 ... xn. body`.
    pub fn lams(bound: &[&str], body: Term) -> Term {
        bound
            .iter()
            .rev()
            .fold(body, |acc, x| Term::lam(*x, acc))
    }

    pub fn pair(left: Term, right: Term) -> Term {
        Term::Pair(Arc::new(left), Arc::new(right))
    }

    pub fn proj_l(t: Term) -> Term {
        Term::ProjL(Arc::new(t))
    }

    pub fn proj_r(t: Term) -> Term {
        Term::ProjR(Arc::new(t))
    }

    /// Number of constructor nodes (>= 1). Shared subtrees are counted once
    /// per occurrence, i.e. this is the size of the unfolded tree.
    pub fn size(&self) -> u64 {
        // Shared spines get deep; walk with an explicit stack and a
        // per-pointer memo so DAG-shaped terms stay linear.
        fn go(t: &Term, memo: &mut BTreeMap<*const Term, u64>) -> u64 {
            match t {
                Term::Var(_) => 1,
                Term::App(a, b) | Term::Pair(a, b) => {
                    1 + memo_go(a, memo) + memo_go(b, memo)
                }
                Term::Lam(_, b) | Term::ProjL(b) | Term::ProjR(b) => 1 + memo_go(b, memo),
            }
        }
        fn memo_go(t: &Arc<Term>, memo: &mut BTreeMap<*const Term, u64>) -> u64 {
            let key = Arc::as_ptr(t);
            if let Some(&n) = memo.get(&key) {
                return n;
            }
            let n = go(t, memo);
            memo.insert(key, n);
            n
        }
        go(self, &mut BTreeMap::new())
    }

    /// The size measure governed by the `2^m` height law: variables, lambdas
    /// and projections count, applications and pairs do not (the binary
    /// typing rules merge premises at `max + 1`, which is why those two
    /// constructors are height-neutral).
    pub fn bound_size(&self) -> u64 {
        fn go(t: &Term, memo: &mut BTreeMap<*const Term, u64>) -> u64 {
            match t {
                Term::Var(_) => 1,
                Term::App(a, b) => memo_go(a, memo) + memo_go(b, memo),
                Term::Pair(a, b) => memo_go(a, memo) + memo_go(b, memo),
                Term::Lam(_, b) => 1 + memo_go(b, memo),
                Term::ProjL(b) | Term::ProjR(b) => 1 + memo_go(b, memo),
            }
        }
        fn memo_go(t: &Arc<Term>, memo: &mut BTreeMap<*const Term, u64>) -> u64 {
            let key = Arc::as_ptr(t);
            if let Some(&n) = memo.get(&key) {
                return n;
            }
            let n = go(t, memo);
            memo.insert(key, n);
            n
        }
        go(self, &mut BTreeMap::new())
    }

    /// True if the term contains no lambda abstraction.
    pub fn is_lambda_free(&self) -> bool {
        let mut stack = alloc::vec![self];
        while let Some(t) = stack.pop() {
            match t {
                Term::Lam(..) => return false,
                Term::Var(_) => {}
                Term::App(a, b) | Term::Pair(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                Term::ProjL(a) | Term::ProjR(a) => stack.push(a),
            }
        }
        true
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => write!(f, "{x}"),
            Term::App(a, b) => write!(f, "({:?} {:?})", a, b),
            Term::Lam(x, b) => write!(f, "(\\{x}. {:?})", b),
            Term::Pair(a, b) => write!(f, "<{:?}, {:?}>", a, b),
            Term::ProjL(a) => write!(f, "(fst {:?})", a),
            Term::ProjR(a) => write!(f, "(snd {:?})", a),
        }
    }
}

/// The set of free term variables.
pub fn free_vars(t: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_free(t, &mut Vec::new(), &mut out);
    out
}

fn collect_free(t: &Term, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match t {
        Term::Var(x) => {
            if !bound.iter().any(|b| b == x) {
                out.insert(x.clone());
            }
        }
        Term::App(a, b) | Term::Pair(a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Term::Lam(x, b) => {
            bound.push(x.clone());
            collect_free(b, bound, out);
            bound.pop();
        }
        Term::ProjL(a) | Term::ProjR(a) => collect_free(a, bound, out),
    }
}

/// True if `x` occurs free in `t`.
pub fn occurs_free(t: &Term, x: &str) -> bool {
    match t {
        Term::Var(y) => y == x,
        Term::App(a, b) | Term::Pair(a, b) => occurs_free(a, x) || occurs_free(b, x),
        Term::Lam(y, b) => y != x && occurs_free(b, x),
        Term::ProjL(a) | Term::ProjR(a) => occurs_free(a, x),
    }
}

/// A name based on `base` that is not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    // Strip a numeric suffix so fresh names of fresh names stay short.
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "x" } else { stem };
    if !avoid.contains(base) && base == stem {
        return base.to_string();
    }
    let mut i: u64 = 1;
    loop {
        let candidate = alloc::format!("{stem}{i}");
        if !avoid.contains(&candidate) {
            return candidate;
        }
        i += 1;
    }
}

struct Subst<'a> {
    x: &'a str,
    replacement: &'a Term,
    fv_replacement: BTreeSet<String>,
    // Memoized results are only valid while no enclosing binder has been
    // renamed; `subst` bypasses the memo inside renamed scopes.
    memo: BTreeMap<*const Term, Arc<Term>>,
    occurs_memo: BTreeMap<*const Term, bool>,
}

impl<'a> Subst<'a> {
    fn occurs(&mut self, t: &Arc<Term>) -> bool {
        let key = Arc::as_ptr(t);
        if let Some(&b) = self.occurs_memo.get(&key) {
            return b;
        }
        let b = match &**t {
            Term::Var(y) => y == self.x,
            Term::App(a, b) | Term::Pair(a, b) => self.occurs(a) || self.occurs(b),
            Term::Lam(y, b) => y != self.x && self.occurs(b),
            Term::ProjL(a) | Term::ProjR(a) => self.occurs(a),
        };
        self.occurs_memo.insert(key, b);
        b
    }

    fn subst(&mut self, t: &Arc<Term>, renames: &BTreeMap<String, String>) -> Arc<Term> {
        let cacheable = renames.is_empty();
        if cacheable {
            if let Some(r) = self.memo.get(&Arc::as_ptr(t)) {
                return r.clone();
            }
            if !self.occurs(t) {
                return t.clone();
            }
        }
        let result: Arc<Term> = match &**t {
            Term::Var(y) => {
                if let Some(y2) = renames.get(y) {
                    Arc::new(Term::Var(y2.clone()))
                } else if y == self.x {
                    Arc::new(self.replacement.clone())
                } else {
                    t.clone()
                }
            }
            Term::App(a, b) => Arc::new(Term::App(
                self.subst(a, renames),
                self.subst(b, renames),
            )),
            Term::Pair(a, b) => Arc::new(Term::Pair(
                self.subst(a, renames),
                self.subst(b, renames),
            )),
            Term::ProjL(a) => Arc::new(Term::ProjL(self.subst(a, renames))),
            Term::ProjR(a) => Arc::new(Term::ProjR(self.subst(a, renames))),
            Term::Lam(y, body) => {
                let y_now = renames.get(y).unwrap_or(y);
                if y_now == self.x && renames.is_empty() {
                    // Binder shadows the substituted variable.
                    t.clone()
                } else if self.fv_replacement.contains(y_now.as_str()) {
                    // Capture: rename the binder away from the replacement's
                    // free variables (and from everything in sight).
                    let mut avoid = self.fv_replacement.clone();
                    avoid.extend(free_vars(body));
                    avoid.extend(renames.values().cloned());
                    avoid.insert(self.x.to_string());
                    let y2 = fresh_name(y_now, &avoid);
                    let mut renames2 = renames.clone();
                    renames2.insert(y.clone(), y2.clone());
                    Arc::new(Term::Lam(y2, self.subst(body, &renames2)))
                } else {
                    let mut renames2;
                    let renames_here = if renames.contains_key(y) {
                        // The old rename is shadowed by this binder.
                        renames2 = renames.clone();
                        renames2.remove(y);
                        &renames2
                    } else {
                        renames
                    };
                    Arc::new(Term::Lam(y.clone(), self.subst(body, renames_here)))
                }
            }
        };
        if cacheable {
            self.memo.insert(Arc::as_ptr(t), result.clone());
        }
        result
    }
}

/// Capture-avoiding substitution `t[x := s]`. The result is alpha-equivalent
/// regardless of which fresh names renaming picks.
pub fn substitute(t: &Term, x: &str, s: &Term) -> Term {
    let mut st = Subst {
        x,
        replacement: s,
        fv_replacement: free_vars(s),
        memo: BTreeMap::new(),
        occurs_memo: BTreeMap::new(),
    };
    let root = Arc::new(t.clone());
    (*st.subst(&root, &BTreeMap::new())).clone()
}

/// Equality up to renaming of bound variables.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    fn go(
        a: &Term,
        b: &Term,
        depth: u64,
        enva: &mut BTreeMap<String, u64>,
        envb: &mut BTreeMap<String, u64>,
    ) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => match (enva.get(x), envb.get(y)) {
                (Some(i), Some(j)) => i == j,
                (None, None) => x == y,
                _ => false,
            },
            (Term::App(a1, a2), Term::App(b1, b2))
            | (Term::Pair(a1, a2), Term::Pair(b1, b2)) => {
                go(a1, b1, depth, enva, envb) && go(a2, b2, depth, enva, envb)
            }
            (Term::ProjL(a1), Term::ProjL(b1)) | (Term::ProjR(a1), Term::ProjR(b1)) => {
                go(a1, b1, depth, enva, envb)
            }
            (Term::Lam(x, a1), Term::Lam(y, b1)) => {
                let olda = enva.insert(x.clone(), depth);
                let oldb = envb.insert(y.clone(), depth);
                let r = go(a1, b1, depth + 1, enva, envb);
                match olda {
                    Some(v) => {
                        enva.insert(x.clone(), v);
                    }
                    None => {
                        enva.remove(x);
                    }
                }
                match oldb {
                    Some(v) => {
                        envb.insert(y.clone(), v);
                    }
                    None => {
                        envb.remove(y);
                    }
                }
                r
            }
            _ => false,
        }
    }
    go(a, b, 0, &mut BTreeMap::new(), &mut BTreeMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &str) -> Term {
        Term::var(x)
    }

    #[test]
    fn free_vars_of_closed_identity_is_empty() {
        let id = Term::lam("x", v("x"));
        assert!(free_vars(&id).is_empty());
    }

    #[test]
    fn free_vars_sees_through_binders() {
        // \f.\x. f (g x)  has exactly {g} free
        let t = Term::lams(&["f", "x"], Term::app(v("f"), Term::app(v("g"), v("x"))));
        let fv = free_vars(&t);
        assert_eq!(fv.into_iter().collect::<alloc::vec::Vec<_>>(), ["g"]);
    }

    #[test]
    fn free_vars_of_pair_with_projection() {
        let t = Term::pair(v("x"), Term::proj_l(v("x")));
        let fv = free_vars(&t);
        assert_eq!(fv.into_iter().collect::<alloc::vec::Vec<_>>(), ["x"]);
    }

    #[test]
    fn substitute_into_application() {
        // (f y)[y := \s.\z. z] = f (\s.\z. z)
        let zero = Term::lams(&["s", "z"], v("z"));
        let t = Term::app(v("f"), v("y"));
        let r = substitute(&t, "y", &zero);
        assert!(alpha_eq(&r, &Term::app(v("f"), zero)));
    }

    #[test]
    fn substitute_renames_on_capture() {
        // (\y. x)[x := y] must not capture: result is \y'. y
        let t = Term::lam("y", v("x"));
        let r = substitute(&t, "x", &v("y"));
        if let Term::Lam(b, body) = &r {
            assert_ne!(b, "y");
            assert_eq!(**body, v("y"));
        } else {
            panic!("expected lambda, got {r:?}");
        }
        assert!(alpha_eq(&r, &Term::lam("w", v("y"))));
    }

    #[test]
    fn substitute_at_variable_site() {
        let s = Term::pair(v("a"), v("b"));
        assert_eq!(substitute(&v("x"), "x", &s), s);
    }

    #[test]
    fn substitute_identity_is_alpha_identity() {
        let ts = [
            Term::lam("x", Term::app(v("x"), v("y"))),
            Term::pair(Term::proj_r(v("y")), Term::lam("y", v("y"))),
            Term::apps(v("y"), [v("y"), v("z")]),
        ];
        for t in ts {
            assert!(alpha_eq(&substitute(&t, "y", &v("y")), &t));
        }
    }

    #[test]
    fn free_vars_equation_under_substitution() {
        // x free in t: fv(t[x:=s]) = (fv t \ x) + fv s
        let t = Term::app(Term::lam("a", v("x")), v("b"));
        let s = Term::app(v("c"), v("d"));
        let r = substitute(&t, "x", &s);
        let mut expect = free_vars(&t);
        expect.remove("x");
        expect.extend(free_vars(&s));
        assert_eq!(free_vars(&r), expect);
    }

    #[test]
    fn alpha_eq_basic() {
        assert!(alpha_eq(&Term::lam("x", v("x")), &Term::lam("y", v("y"))));
        // \x.\y.x is not \y.\x.x
        let k = Term::lams(&["x", "y"], v("x"));
        let fl = Term::lams(&["y", "x"], v("x"));
        assert!(!alpha_eq(&k, &fl));
    }

    #[test]
    fn shadowed_binder_stops_substitution() {
        // (\x. x) [x := y] is unchanged
        let t = Term::lam("x", v("x"));
        assert!(alpha_eq(&substitute(&t, "x", &v("y")), &t));
    }

    #[test]
    fn sizes() {
        let t = Term::app(v("x"), v("y"));
        assert_eq!(t.size(), 3);
        assert_eq!(t.bound_size(), 2);
        let p = Term::proj_l(Term::pair(v("x"), Term::lam("y", v("y"))));
        assert_eq!(p.size(), 5);
        assert_eq!(p.bound_size(), 4); // 2 vars + 1 lam + 1 proj
        assert!(!p.is_lambda_free());
        assert!(t.is_lambda_free());
    }
}
