//! Elementary recursive function definitions: the expression DSL, its
//! reference interpreter (the oracle tests compile against), iterated
//! exponentials, and the compiler producing closed typed terms.
//!
//! A compiled function at tower index `k` has type
//! `etas -> (Nat0^(k+l))^arity -> Nat0^(k)`; plugging one sufficiently
//! large numeral `#L` into every eta slot makes the term compute the
//! function on Church numerals, for any `L >= 2_r(sum of inputs)`.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;

use crate::reduction::{decode_numeral, encode_numeral, normalize, NormalizeResult};
use crate::stdterms::{
    basic, basic_nat0, cast_down_tower, numeral, numeral_at, numeral_tower, subt, sum_step,
    BasicFn, IterMode, NamedTerm,
};
use crate::syntax::{Term, Type};
use crate::typing::{
    all_e_closed, ax, check_derivation, imp_e, imp_es, imp_i, prod_el, prod_i, weaken, Context,
    Derivation, TypeError,
};

/// An elementary recursive function definition.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ElemExpr {
    Zero,
    Succ,
    Add,
    Sub,
    Mul,
    /// `Proj(i, n)`: the i-th of n arguments (0-based).
    Proj(u32, u32),
    /// `Comp(g, [h1..hm])`: `g(h1(args), ..., hm(args))`.
    Comp(Box<ElemExpr>, Vec<ElemExpr>),
    /// Bounded sum over the first argument of `g`: the compiled function
    /// takes the bound as its last argument, `f(ys, x) = sum_{i<x} g(i, ys)`.
    BSum(Box<ElemExpr>),
    /// Bounded product, empty product is 1.
    BProd(Box<ElemExpr>),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ElemError {
    Arity { expected: u32, found: u32 },
    MixedArities,
    BadProjection { index: u32, arity: u32 },
    Overflow,
    Budget(String),
    Typing(TypeError),
}

impl From<TypeError> for ElemError {
    fn from(e: TypeError) -> Self {
        ElemError::Typing(e)
    }
}

impl fmt::Display for ElemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElemError::Arity { expected, found } => {
                write!(f, "arity mismatch: expected {expected}, found {found}")
            }
            ElemError::MixedArities => write!(f, "composition arguments have mixed arities"),
            ElemError::BadProjection { index, arity } => {
                write!(f, "projection index {index} out of range for arity {arity}")
            }
            ElemError::Overflow => write!(f, "oracle value exceeds the machine range"),
            ElemError::Budget(s) => write!(f, "budget exceeded: {s}"),
            ElemError::Typing(e) => write!(f, "typing: {e}"),
        }
    }
}

impl ElemExpr {
    /// Number of arguments; validates arity consistency throughout.
    pub fn arity(&self) -> Result<u32, ElemError> {
        match self {
            ElemExpr::Zero => Ok(0),
            ElemExpr::Succ => Ok(1),
            ElemExpr::Add | ElemExpr::Sub | ElemExpr::Mul => Ok(2),
            ElemExpr::Proj(i, n) => {
                if i < n {
                    Ok(*n)
                } else {
                    Err(ElemError::BadProjection {
                        index: *i,
                        arity: *n,
                    })
                }
            }
            ElemExpr::Comp(g, hs) => {
                let ga = g.arity()?;
                if ga as usize != hs.len() {
                    return Err(ElemError::Arity {
                        expected: ga,
                        found: hs.len() as u32,
                    });
                }
                let mut common = None;
                for h in hs {
                    let a = h.arity()?;
                    match common {
                        None => common = Some(a),
                        Some(c) if c == a => {}
                        Some(_) => return Err(ElemError::MixedArities),
                    }
                }
                Ok(common.unwrap_or(0))
            }
            ElemExpr::BSum(g) | ElemExpr::BProd(g) => {
                let ga = g.arity()?;
                if ga == 0 {
                    return Err(ElemError::Arity {
                        expected: 1,
                        found: 0,
                    });
                }
                Ok(ga)
            }
        }
    }
}

/// Reference semantics on machine naturals; overflow is an error, truncated
/// subtraction clamps at zero.
pub fn eval_oracle(e: &ElemExpr, args: &[u64]) -> Result<u64, ElemError> {
    let arity = e.arity()?;
    if args.len() != arity as usize {
        return Err(ElemError::Arity {
            expected: arity,
            found: args.len() as u32,
        });
    }
    match e {
        ElemExpr::Zero => Ok(0),
        ElemExpr::Succ => args[0].checked_add(1).ok_or(ElemError::Overflow),
        ElemExpr::Add => args[0].checked_add(args[1]).ok_or(ElemError::Overflow),
        ElemExpr::Sub => Ok(args[0].saturating_sub(args[1])),
        ElemExpr::Mul => args[0].checked_mul(args[1]).ok_or(ElemError::Overflow),
        ElemExpr::Proj(i, _) => Ok(args[*i as usize]),
        ElemExpr::Comp(g, hs) => {
            let mut vals = Vec::with_capacity(hs.len());
            for h in hs {
                vals.push(eval_oracle(h, args)?);
            }
            eval_oracle(g, &vals)
        }
        ElemExpr::BSum(g) => {
            let (bound, ys) = args.split_last().unwrap();
            let mut acc: u64 = 0;
            let mut gargs = Vec::with_capacity(args.len());
            for i in 0..*bound {
                gargs.clear();
                gargs.push(i);
                gargs.extend_from_slice(ys);
                acc = acc
                    .checked_add(eval_oracle(g, &gargs)?)
                    .ok_or(ElemError::Overflow)?;
            }
            Ok(acc)
        }
        ElemExpr::BProd(g) => {
            let (bound, ys) = args.split_last().unwrap();
            let mut acc: u64 = 1;
            let mut gargs = Vec::with_capacity(args.len());
            for i in 0..*bound {
                gargs.clear();
                gargs.push(i);
                gargs.extend_from_slice(ys);
                acc = acc
                    .checked_mul(eval_oracle(g, &gargs)?)
                    .ok_or(ElemError::Overflow)?;
            }
            Ok(acc)
        }
    }
}

/// Default cap on the bit length of tower values.
pub const TOWER_BIT_BUDGET: u64 = 1 << 22;

/// `2_k(n)`: `2_0(n) = n`, `2_(k+1)(n) = 2^(2_k(n))`, as an exact big
/// integer, rejecting results above `budget_bits` bits.
pub fn two_tower_with_budget(k: u32, n: u64, budget_bits: u64) -> Result<BigUint, ElemError> {
    let mut t = BigUint::from(n);
    for _ in 0..k {
        if t > BigUint::from(budget_bits) {
            return Err(ElemError::Budget("tower exponent too large".to_string()));
        }
        let exp: u64 = u64::try_from(&t).map_err(|_| ElemError::Budget("tower".to_string()))?;
        t = BigUint::from(1u32) << exp as usize;
    }
    Ok(t)
}

pub fn two_tower(k: u32, n: u64) -> Result<BigUint, ElemError> {
    two_tower_with_budget(k, n, TOWER_BIT_BUDGET)
}

/// `h <= 2_k(m)` decided without materializing the tower.
pub fn le_two_tower(h: u64, k: u32, m: u64) -> bool {
    if k == 0 {
        return h <= m;
    }
    if h <= 1 {
        return true;
    }
    // h <= 2^x  iff  ceil(log2 h) <= x
    let ceil_log2 = 64 - (h - 1).leading_zeros() as u64;
    le_two_tower(ceil_log2, k - 1, m)
}

/// A certified growth bound: for every argument vector and every
/// `M > sum(args)`, the value is at most `2_tower(M) - strict`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct GrowthBound {
    pub tower: u64,
    pub strict: bool,
}

/// Smallest `c` (conservative table) with `2_c(X) >= p * X` for all `X >= 1`.
fn absorb(p: u64) -> u64 {
    match p {
        0 | 1 => 0,
        2 => 1,
        3..=4 => 2,
        5..=16 => 3,
        _ => 4,
    }
}

/// An exponent `s` with `sum_i h_i(args) <= 2_s(sum args)` for all args.
fn comp_sum_exponent(hs: &[ElemExpr]) -> Result<u64, ElemError> {
    // Distinct plain projections sum to at most the input sum.
    let mut seen: Vec<u32> = Vec::new();
    if hs.iter().all(|h| match h {
        ElemExpr::Proj(i, _) if !seen.contains(i) => {
            seen.push(*i);
            true
        }
        _ => false,
    }) {
        return Ok(0);
    }
    let bounds: Vec<GrowthBound> = hs.iter().map(growth_bound).collect::<Result<_, _>>()?;
    let p = hs.len() as u64;
    let s_star = bounds.iter().map(|b| b.tower).max().unwrap_or(0);
    Ok(if p == 1 {
        // h <= 2_s1(S + 1) - strict, and <= S itself when strict at tower 0
        if bounds[0].strict && bounds[0].tower == 0 {
            0
        } else {
            bounds[0].tower + 1
        }
    } else if s_star == 0 {
        // every h_i <= S + 1, so the sum is at most p * (S + 1)
        1 + absorb(p)
    } else {
        // sum <= p * 2_(s*)(S + 1) <= p * 2_(s*+1)(S)
        s_star + 1 + absorb(p)
    })
}

/// Syntactic growth bound; each constructor adds a fixed tower increment.
pub fn growth_bound(e: &ElemExpr) -> Result<GrowthBound, ElemError> {
    e.arity()?;
    Ok(match e {
        ElemExpr::Zero | ElemExpr::Proj(..) | ElemExpr::Add | ElemExpr::Sub => GrowthBound {
            tower: 0,
            strict: true,
        },
        ElemExpr::Succ => GrowthBound {
            tower: 0,
            strict: false,
        },
        ElemExpr::Mul => GrowthBound {
            tower: 1,
            strict: true,
        },
        ElemExpr::Comp(g, hs) => {
            let bg = growth_bound(g)?;
            if hs.is_empty() {
                bg
            } else {
                GrowthBound {
                    tower: bg.tower + comp_sum_exponent(hs)?,
                    strict: bg.strict,
                }
            }
        }
        ElemExpr::BSum(g) => {
            let bg = growth_bound(g)?;
            if bg.tower == 0 {
                // at most (M-1) terms of value <= M: (M-1) * M < 2^M... no:
                // (M-1)*M can reach 2^M only past M = 5; checked directly,
                // (M-1)*M < 2^M fails at M = 5 (20 < 32 ok), holds for all M.
                GrowthBound {
                    tower: 1,
                    strict: true,
                }
            } else {
                GrowthBound {
                    tower: bg.tower.max(1) + 2,
                    strict: true,
                }
            }
        }
        ElemExpr::BProd(g) => {
            let bg = growth_bound(g)?;
            let tower = if bg.tower == 0 {
                // values <= M, at most M - 1 factors: M^(M-1) < 2_2(M)
                2
            } else {
                bg.tower.max(1) + 2
            };
            GrowthBound {
                tower,
                strict: true,
            }
        }
    })
}

/// A function compiled at tower index `k`, with the bookkeeping that makes
/// its parameter contract checkable.
#[derive(Clone)]
pub struct CompiledFn {
    pub term: Term,
    pub derivation: Derivation,
    pub k: u32,
    pub l: u32,
    pub r: u64,
    pub etas: Vec<Type>,
    pub arity: u32,
}

impl CompiledFn {
    /// Full type: `etas -> (Nat0^(k+l))^arity -> Nat0^(k)`.
    pub fn expected_ty(&self) -> Type {
        let mut t = Type::nat0_tower(self.k);
        for _ in 0..self.arity {
            t = Type::arrow(Type::nat0_tower(self.k + self.l), t);
        }
        for eta in self.etas.iter().rev() {
            t = Type::arrow(eta.clone(), t);
        }
        t
    }

    /// Structural audit: derivation checks, concludes the stored term at
    /// the stated type in the empty context, and every eta entry matches
    /// the closed grammar `eta ::= Nat0^(k) | N(eta) | N(eta * eta)`.
    pub fn audit(&self) -> Result<(), ElemError> {
        check_derivation(&self.derivation).map_err(|e| ElemError::Typing(e.error))?;
        if !self.derivation.ctx().is_empty()
            || self.derivation.subject() != &self.term
            || self.derivation.ty() != &self.expected_ty()
        {
            return Err(ElemError::Typing(TypeError::ConclusionMismatch));
        }
        for eta in &self.etas {
            if !is_eta(eta, self.k) {
                return Err(ElemError::Typing(TypeError::BadShape(
                    "eta entry outside the parameter-type grammar",
                )));
            }
        }
        Ok(())
    }
}

/// The parameter-type grammar of compiled functions.
pub fn is_eta(t: &Type, k: u32) -> bool {
    if t == &Type::nat0_tower(k) {
        return true;
    }
    match t.unfold_numeral() {
        Some(inner) => {
            if is_eta(inner, k) {
                return true;
            }
            match inner {
                Type::Prod(a, b) => a == b && is_eta(a, k),
                _ => false,
            }
        }
        None => false,
    }
}

fn fresh_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| alloc::format!("{prefix}{i}")).collect()
}

/// Apply `cd` `levels` times, from `Nat0^(from)` downwards.
fn cd_iter(arg: Derivation, from: u32, levels: u32) -> Result<Derivation, ElemError> {
    let mut d = arg;
    for step in 0..levels {
        let j = from - step - 1;
        let cd = cast_down_tower(j)?;
        let ctx = d.ctx().clone();
        d = imp_es(weaken(&cd.derivation, &ctx)?, [d])?;
    }
    Ok(d)
}

fn suc_add_mul_at(f: BasicFn, k: u32) -> Result<NamedTerm, ElemError> {
    Ok(if k == 0 {
        basic_nat0(f)?
    } else {
        basic(f, &Type::nat0_tower(k - 1))?
    })
}

/// Compile `e` at tower index `k` per the inductive construction:
/// base functions directly, composition by downcast plumbing, bounded sums
/// and products by pair iteration.
pub fn compile_lemma(e: &ElemExpr, k: u32) -> Result<CompiledFn, ElemError> {
    let arity = e.arity()?;
    match e {
        ElemExpr::Zero => {
            let d = numeral_tower(0, k)?;
            Ok(CompiledFn {
                term: d.subject().clone(),
                derivation: d,
                k,
                l: 0,
                r: 0,
                etas: Vec::new(),
                arity,
            })
        }
        ElemExpr::Succ | ElemExpr::Add | ElemExpr::Mul => {
            let f = match e {
                ElemExpr::Succ => BasicFn::Suc,
                ElemExpr::Add => BasicFn::Add,
                _ => BasicFn::Mul,
            };
            let nt = suc_add_mul_at(f, k)?;
            Ok(CompiledFn {
                term: nt.term.clone(),
                derivation: nt.derivation,
                k,
                l: 0,
                r: 0,
                etas: Vec::new(),
                arity,
            })
        }
        ElemExpr::Sub => {
            if k == 0 {
                // \n.\c. sub (cd n) c  at (Nat0^(1))^2 -> Nat0, l = 1
                let ctx: Context = [
                    ("n".to_string(), Type::nat0_tower(1)),
                    ("c".to_string(), Type::nat0_tower(1)),
                ]
                .into_iter()
                .collect();
                let cd = cast_down_tower(0)?;
                let sub = crate::stdterms::subtraction()?;
                let cd_n = imp_es(weaken(&cd.derivation, &ctx)?, [ax(&ctx, "n")?])?;
                let body = imp_es(weaken(&sub.derivation, &ctx)?, [cd_n, ax(&ctx, "c")?])?;
                let d = imp_i(imp_i(body, "c")?, "n")?;
                Ok(CompiledFn {
                    term: d.subject().clone(),
                    derivation: d,
                    k,
                    l: 1,
                    r: 0,
                    etas: Vec::new(),
                    arity,
                })
            } else {
                let nt = subt(k - 1)?;
                Ok(CompiledFn {
                    term: nt.term.clone(),
                    derivation: nt.derivation,
                    k,
                    l: 0,
                    r: 0,
                    etas: alloc::vec![Type::nat0_tower(k + 1)],
                    arity,
                })
            }
        }
        ElemExpr::Proj(i, n) => {
            let names = fresh_names("x", *n as usize);
            let ctx: Context = names
                .iter()
                .map(|x| (x.clone(), Type::nat0_tower(k)))
                .collect();
            let mut d = ax(&ctx, &names[*i as usize])?;
            for x in names.iter().rev() {
                d = imp_i(d, x)?;
            }
            Ok(CompiledFn {
                term: d.subject().clone(),
                derivation: d,
                k,
                l: 0,
                r: 0,
                etas: Vec::new(),
                arity,
            })
        }
        ElemExpr::Comp(g, hs) => compile_comp(g, hs, k, arity),
        ElemExpr::BSum(g) => compile_bounded(g, k, arity, IterMode::Sum),
        ElemExpr::BProd(g) => compile_bounded(g, k, arity, IterMode::Prod),
    }
}

fn compile_comp(
    g: &ElemExpr,
    hs: &[ElemExpr],
    k: u32,
    arity: u32,
) -> Result<CompiledFn, ElemError> {
    let cg = compile_lemma(g, k)?;
    let chs: Vec<CompiledFn> = hs
        .iter()
        .map(|h| compile_lemma(h, k + cg.l))
        .collect::<Result<_, _>>()?;
    let max_lh = chs.iter().map(|c| c.l).max().unwrap_or(0);
    let l = cg.l + max_lh;

    // Parameter exponent: a part with no eta slots imposes no constraint,
    // otherwise the head needs its parameter at 2_(r_g) of the inner sums.
    let mut r = 0u64;
    if !cg.etas.is_empty() {
        r = r.max(cg.r + comp_sum_exponent(hs)?);
    }
    for ch in &chs {
        if !ch.etas.is_empty() {
            r = r.max(ch.r);
        }
    }

    let v_names = fresh_names("v", cg.etas.len());
    let mut w_names: Vec<Vec<String>> = Vec::new();
    for (i, ch) in chs.iter().enumerate() {
        w_names.push(
            (1..=ch.etas.len())
                .map(|j| alloc::format!("w{}_{}", i + 1, j))
                .collect(),
        );
    }
    let n_names = fresh_names("n", arity as usize);

    let mut ctx: Context = Context::new();
    for (name, eta) in v_names.iter().zip(cg.etas.iter()) {
        ctx.insert(name.clone(), eta.clone());
    }
    for (ws, ch) in w_names.iter().zip(chs.iter()) {
        for (name, eta) in ws.iter().zip(ch.etas.iter()) {
            ctx.insert(name.clone(), eta.clone());
        }
    }
    for name in &n_names {
        ctx.insert(name.clone(), Type::nat0_tower(k + l));
    }

    let mut g_args: Vec<Derivation> = Vec::new();
    for name in &v_names {
        g_args.push(ax(&ctx, name)?);
    }
    for (ch, ws) in chs.iter().zip(w_names.iter()) {
        let mut call = weaken(&ch.derivation, &ctx)?;
        for w in ws {
            call = imp_e(call, ax(&ctx, w)?)?;
        }
        for nn in &n_names {
            let arg = cd_iter(ax(&ctx, nn)?, k + l, l - cg.l - ch.l)?;
            call = imp_e(call, arg)?;
        }
        g_args.push(call);
    }
    let body = imp_es(weaken(&cg.derivation, &ctx)?, g_args)?;
    let mut d = body;
    for name in n_names.iter().rev() {
        d = imp_i(d, name)?;
    }
    for ws in w_names.iter().rev() {
        for name in ws.iter().rev() {
            d = imp_i(d, name)?;
        }
    }
    for name in v_names.iter().rev() {
        d = imp_i(d, name)?;
    }

    let mut etas = cg.etas.clone();
    for ch in &chs {
        etas.extend(ch.etas.iter().cloned());
    }
    Ok(CompiledFn {
        term: d.subject().clone(),
        derivation: d,
        k,
        l,
        r,
        etas,
        arity,
    })
}


fn compile_bounded(
    g: &ElemExpr,
    k: u32,
    arity: u32,
    mode: IterMode,
) -> Result<CompiledFn, ElemError> {
    let cg = compile_lemma(g, k + 1)?;
    let l = cg.l;
    let j = k + l + 1;
    let hi = Type::nat0_tower(j);
    let pair_ty = Type::prod(hi.clone(), hi.clone());

    let w_names = fresh_names("w", cg.etas.len());
    let y_count = arity as usize - 1;
    let n_names = fresh_names("n", y_count);

    let mut ctx: Context = Context::new();
    ctx.insert("u".to_string(), Type::numeral(pair_ty.clone()));
    ctx.insert("v".to_string(), Type::nat0_tower(k + l + 2));
    for (name, eta) in w_names.iter().zip(cg.etas.iter()) {
        ctx.insert(name.clone(), eta.clone());
    }
    for name in &n_names {
        ctx.insert(name.clone(), hi.clone());
    }
    ctx.insert("m".to_string(), hi.clone());

    // g applied to its parameters, the index variable y, then the carried
    // arguments: g's first argument is the summation index.
    let mut yctx = ctx.clone();
    yctx.insert("y".to_string(), hi.clone());
    let mut g_call = weaken(&cg.derivation, &yctx)?;
    for w in &w_names {
        g_call = imp_e(g_call, ax(&yctx, w)?)?;
    }
    g_call = imp_e(g_call, ax(&yctx, "y")?)?;
    for nn in &n_names {
        g_call = imp_e(g_call, ax(&yctx, nn)?)?;
    }

    let (_t_fn, p_fn) = sum_step(mode, k, l, "v", "m", "y", &g_call)?;

    let start_left = match mode {
        IterMode::Sum => 0,
        IterMode::Prod => 1,
    };
    let start = prod_i(
        weaken(&numeral_tower(start_left, j)?, &ctx)?,
        weaken(&numeral_tower(0, j)?, &ctx)?,
    )?;
    let iterated = imp_es(ax(&ctx, "u")?, [p_fn.derivation, start])?;
    let summed = prod_el(iterated)?;
    let body = cd_iter(summed, j, l + 1)?;

    let mut d = imp_i(body, "m")?;
    for name in n_names.iter().rev() {
        d = imp_i(d, name)?;
    }
    for name in w_names.iter().rev() {
        d = imp_i(d, name)?;
    }
    d = imp_i(d, "v")?;
    d = imp_i(d, "u")?;

    let mut etas = alloc::vec![Type::numeral(pair_ty), Type::nat0_tower(k + l + 2)];
    etas.extend(cg.etas.iter().cloned());

    // Values of g on indices below the bound stay under 2_(s')(sum + bound);
    // r combines that cast requirement with g's own parameter demand.
    let s_prime = growth_bound(g)?.tower;
    let mut r = s_prime;
    if !cg.etas.is_empty() {
        r = r.max(cg.r);
    }

    Ok(CompiledFn {
        term: d.subject().clone(),
        derivation: d,
        k,
        l: l + 1,
        r,
        etas,
        arity,
    })
}

/// A closed term of type `Nat1^arity -> Nat0` computing the function on
/// Church numerals by reduction alone.
#[derive(Clone)]
pub struct TopCompiled {
    pub term: Term,
    pub derivation: Derivation,
    pub arity: u32,
}

impl TopCompiled {
    pub fn audit(&self) -> Result<(), ElemError> {
        check_derivation(&self.derivation).map_err(|e| ElemError::Typing(e.error))?;
        let mut ty = Type::nat0();
        for _ in 0..self.arity {
            ty = Type::arrow(Type::nat1(), ty);
        }
        if !self.derivation.ctx().is_empty()
            || self.derivation.subject() != &self.term
            || self.derivation.ty() != &ty
        {
            return Err(ElemError::Typing(TypeError::ConclusionMismatch));
        }
        Ok(())
    }
}

/// Instantiate `x : Nat1` at the closed level-1 type `inner`, giving
/// `x : N(inner)`.
fn input_at(ctx: &Context, x: &str, inner: &Type) -> Result<Derivation, ElemError> {
    Ok(all_e_closed(ax(ctx, x)?, inner)?)
}

/// Build the parameter numeral for one eta slot: the sum of all inputs at
/// `eta^(s)`, then `r` (even) applications of `#2` stepping down to `eta`.
/// Its value is `2_r(sum of inputs)`.
fn parameter_for_eta(
    ctx: &Context,
    input_names: &[String],
    eta: &Type,
    s: u32,
    r: u32,
) -> Result<Derivation, ElemError> {
    let eta_s = Type::tower(eta.clone(), s);
    let inner_s = eta_s
        .unfold_numeral()
        .cloned()
        .ok_or(ElemError::Typing(TypeError::BadShape("eta not numeral-shaped")))?;
    // S := x1 + (x2 + (... + xn)) at eta^(s); empty sum is #0.
    let mut sum = match input_names.split_first() {
        None => weaken(&numeral_at(0, &eta_s)?, ctx)?,
        Some((first, rest)) => {
            let mut acc = input_at(ctx, first, &inner_s)?;
            if !rest.is_empty() {
                let add = basic(BasicFn::Add, &inner_s)?;
                // right fold: add x1 (add x2 ... xn)
                let mut args: Vec<Derivation> = alloc::vec![acc];
                for x in rest {
                    args.push(input_at(ctx, x, &inner_s)?);
                }
                let mut it = args.into_iter().rev();
                let mut folded = it.next().unwrap();
                for a in it {
                    folded = imp_es(weaken(&add.derivation, ctx)?, [a, folded])?;
                }
                acc = folded;
            }
            acc
        }
    };
    // Descend: each pair of #2 applications drops one tower level of eta^(.)
    debug_assert_eq!(r % 2, 0);
    debug_assert_eq!(r / 2, s);
    for step in 0..s {
        let level = s - step; // current: eta^(level)
        let t_inner = Type::tower(eta.clone(), level - 1); // target eta^(level-1)
        let zeta = t_inner
            .unfold_numeral()
            .cloned()
            .ok_or(ElemError::Typing(TypeError::BadShape("eta tower not numeral-shaped")))?;
        // first #2 : T -> T, a numeral at N(zeta -> zeta)
        let two_fn = weaken(&numeral(2, &Type::arrow(zeta.clone(), zeta.clone()))?, ctx)?;
        // second #2 : T, a numeral at N(zeta)
        let two_val = weaken(&numeral(2, &zeta)?, ctx)?;
        sum = imp_es(sum, [two_fn, two_val])?;
    }
    Ok(sum)
}

/// Compile to the top-level representation `Nat1^arity -> Nat0`:
/// instantiate each input to sum into every parameter slot, form the
/// large numerals, instantiate the inputs again at the working level, cast
/// the result down, and eta-expand so that application to numerals reduces
/// to a numeral without eta steps.
pub fn compile_top(e: &ElemExpr) -> Result<TopCompiled, ElemError> {
    let cf = compile_lemma(e, 1)?;
    // Round the parameter exponent up to an even value; s is half of it.
    let r_even = cf.r + (cf.r & 1);
    let s = u32::try_from(r_even / 2).map_err(|_| ElemError::Budget("r too large".into()))?;
    let r_even = u32::try_from(r_even).map_err(|_| ElemError::Budget("r too large".into()))?;

    let input_names = fresh_names("x", cf.arity as usize);
    let ctx: Context = input_names
        .iter()
        .map(|x| (x.clone(), Type::nat1()))
        .collect();

    let mut call = weaken(&cf.derivation, &ctx)?;
    for eta in &cf.etas {
        let param = parameter_for_eta(&ctx, &input_names, eta, s, r_even)?;
        call = imp_e(call, param)?;
    }
    let work_inner = Type::nat0_tower(cf.l);
    for x in &input_names {
        call = imp_e(call, input_at(&ctx, x, &work_inner)?)?;
    }
    // result : Nat0^(1); cast down to Nat0
    let cd = cast_down_tower(0)?;
    let core = imp_es(weaken(&cd.derivation, &ctx)?, [call])?;
    let mut t_deriv = core;
    for x in input_names.iter().rev() {
        t_deriv = imp_i(t_deriv, x)?;
    }

    // eta-expanded wrapper: \xs.\s.\z. T xs s z
    let b = crate::stdterms::base_var();
    let bv = Type::Var(b.clone());
    let mut wctx: Context = input_names
        .iter()
        .map(|x| (x.clone(), Type::nat1()))
        .collect();
    wctx.insert("s".to_string(), Type::arrow(bv.clone(), bv.clone()));
    wctx.insert("z".to_string(), bv.clone());
    let mut applied = weaken(&t_deriv, &wctx)?;
    for x in &input_names {
        applied = imp_e(applied, ax(&wctx, x)?)?;
    }
    let opened = crate::typing::all_e_flat(applied, &bv)?;
    let body = imp_es(opened, [ax(&wctx, "s")?, ax(&wctx, "z")?])?;
    let gen = crate::typing::all_i(imp_i(imp_i(body, "z")?, "s")?, &b)?;
    let mut d = gen;
    for x in input_names.iter().rev() {
        d = imp_i(d, x)?;
    }

    Ok(TopCompiled {
        term: d.subject().clone(),
        derivation: d,
        arity: cf.arity,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunError {
    Arity { expected: u32, found: u32 },
    FuelExhausted { steps: u64 },
    /// The normal form was not a numeral: a compiler bug.
    NotANumeral,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Arity { expected, found } => {
                write!(f, "arity mismatch: expected {expected}, found {found}")
            }
            RunError::FuelExhausted { steps } => write!(f, "fuel exhausted after {steps} steps"),
            RunError::NotANumeral => write!(f, "normal form is not a numeral"),
        }
    }
}

/// Apply a compiled function to numerals, normalize, decode.
pub fn run_compiled(c: &TopCompiled, args: &[u64], fuel: u64) -> Result<u64, RunError> {
    if args.len() != c.arity as usize {
        return Err(RunError::Arity {
            expected: c.arity,
            found: args.len() as u32,
        });
    }
    let t = Term::apps(c.term.clone(), args.iter().map(|&n| encode_numeral(n)));
    match normalize(&t, fuel) {
        NormalizeResult::Normal { term, .. } => {
            decode_numeral(&term).ok_or(RunError::NotANumeral)
        }
        NormalizeResult::FuelExhausted { steps, .. } => Err(RunError::FuelExhausted { steps }),
    }
}
