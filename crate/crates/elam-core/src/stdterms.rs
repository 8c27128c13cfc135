//! Builders for the standard arithmetic terms: each returns the untyped
//! term together with a checked derivation at the requested type instance.
//!
//! Numeral types come in towers: `Nat0^(0) = Nat0` and
//! `Nat0^(k+1) = N(Nat0^(k))`. Terms that move values between tower levels
//! are the typecasts: `cast_down` is unconditional, the upward casts need a
//! large first argument, recorded as a machine-checkable side condition.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::syntax::{Term, TyVar, Type};
use crate::typing::{
    all_e_flat, all_i, ax, check_derivation, imp_e, imp_es, imp_i, prod_el, prod_i, prod_er,
    weaken, Context, Derivation, TypeError,
};

/// A tower type `base^(k)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TowerType {
    pub base: Type,
    pub k: u32,
}

impl TowerType {
    pub fn expand(&self) -> Type {
        Type::tower(self.base.clone(), self.k)
    }
}

/// A large-parameter side condition on a term's numeral arguments: the
/// first argument must be at least the stated function of the rest.
#[derive(Clone, Copy)]
pub enum SideCondition {
    None,
    /// `args[0] >= f(&args[1..])`
    FirstAtLeast(fn(&[u64]) -> u64),
}

impl SideCondition {
    /// Check the condition against concrete numeral arguments.
    pub fn holds(&self, args: &[u64]) -> bool {
        match self {
            SideCondition::None => true,
            SideCondition::FirstAtLeast(f) => {
                !args.is_empty() && args[0] >= f(&args[1..])
            }
        }
    }
}

/// A named term with its checked derivation and documented behaviour.
#[derive(Clone)]
pub struct NamedTerm {
    pub name: String,
    pub term: Term,
    pub derivation: Derivation,
    /// Operational property, human-readable.
    pub property: String,
    pub requires: SideCondition,
}

impl NamedTerm {
    fn new(
        name: &str,
        derivation: Derivation,
        property: &str,
        requires: SideCondition,
    ) -> NamedTerm {
        NamedTerm {
            name: name.to_string(),
            term: derivation.subject().clone(),
            derivation,
            property: property.to_string(),
            requires,
        }
    }

    pub fn ty(&self) -> &Type {
        self.derivation.ty()
    }

    /// Self-check: the derivation validates and concludes this term.
    pub fn audit(&self) -> Result<(), TypeError> {
        check_derivation(&self.derivation).map_err(|e| e.error)?;
        if !crate::syntax::alpha_eq(&self.term, self.derivation.subject()) {
            return Err(TypeError::SubjectMismatch);
        }
        Ok(())
    }
}

fn ctx_of(pairs: &[(&str, Type)]) -> Context {
    pairs
        .iter()
        .map(|(x, t)| (x.to_string(), t.clone()))
        .collect()
}

fn lam_chain(mut d: Derivation, binders: &[&str]) -> Result<Derivation, TypeError> {
    for b in binders {
        d = imp_i(d, b)?;
    }
    Ok(d)
}

/// Splice a derivation (typically closed) into a wider context and apply it.
fn apply_in(
    f: &Derivation,
    ctx: &Context,
    args: impl IntoIterator<Item = Derivation>,
) -> Result<Derivation, TypeError> {
    imp_es(weaken(f, ctx)?, args)
}

/// The standard free level-0 type variable used by open instances.
pub fn base_var() -> TyVar {
    TyVar::new("b", 0)
}

fn bv() -> Type {
    Type::Var(base_var())
}

/// Closed numeral derivation `|- \f.\x. f^n x : N(tau)`.
pub fn numeral(n: u64, tau: &Type) -> Result<Derivation, TypeError> {
    let ctx = ctx_of(&[("f", Type::arrow(tau.clone(), tau.clone())), ("x", tau.clone())]);
    let mut d = ax(&ctx, "x")?;
    let f = ax(&ctx, "f")?;
    for _ in 0..n {
        d = imp_e(f.clone(), d)?;
    }
    lam_chain(d, &["x", "f"])
}

/// Closed numeral at a numeral-shaped type `N(tau)`, or at `Nat0` via
/// generalization over the base variable.
pub fn numeral_at(n: u64, ty: &Type) -> Result<Derivation, TypeError> {
    if ty == &Type::nat0() {
        let d = numeral(n, &bv())?;
        return all_i(d, &base_var());
    }
    match ty.unfold_numeral() {
        Some(tau) => numeral(n, &tau.clone()),
        None => Err(TypeError::BadShape("numerals inhabit N(tau) or Nat0")),
    }
}

/// Closed numeral at `Nat0^(k)`.
pub fn numeral_tower(n: u64, k: u32) -> Result<Derivation, TypeError> {
    numeral_at(n, &Type::nat0_tower(k))
}

/// The three basic functions.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BasicFn {
    Suc,
    Add,
    Mul,
}

impl BasicFn {
    pub fn name(self) -> &'static str {
        match self {
            BasicFn::Suc => "suc",
            BasicFn::Add => "add",
            BasicFn::Mul => "mul",
        }
    }
}

/// `suc`, `add`, `mul` at the generic instance over `tau`:
/// `N(tau) -> N(tau)` resp. `N(tau) -> N(tau) -> N(tau)`.
pub fn basic(f: BasicFn, tau: &Type) -> Result<NamedTerm, TypeError> {
    let n_tau = Type::numeral(tau.clone());
    let step = Type::arrow(tau.clone(), tau.clone());
    let d = match f {
        BasicFn::Suc => {
            // \n.\s.\z. s (n s z)
            let ctx = ctx_of(&[("n", n_tau), ("s", step), ("z", tau.clone())]);
            let nsz = imp_es(ax(&ctx, "n")?, [ax(&ctx, "s")?, ax(&ctx, "z")?])?;
            let body = imp_e(ax(&ctx, "s")?, nsz)?;
            lam_chain(body, &["z", "s", "n"])?
        }
        BasicFn::Add => {
            // \m.\n.\s.\z. m s (n s z)
            let ctx = ctx_of(&[
                ("m", n_tau.clone()),
                ("n", n_tau),
                ("s", step),
                ("z", tau.clone()),
            ]);
            let nsz = imp_es(ax(&ctx, "n")?, [ax(&ctx, "s")?, ax(&ctx, "z")?])?;
            let body = imp_es(ax(&ctx, "m")?, [ax(&ctx, "s")?, nsz])?;
            lam_chain(body, &["z", "s", "n", "m"])?
        }
        BasicFn::Mul => {
            // \m.\n.\s. m (n s)
            let ctx = ctx_of(&[("m", n_tau.clone()), ("n", n_tau), ("s", step)]);
            let ns = imp_e(ax(&ctx, "n")?, ax(&ctx, "s")?)?;
            let body = imp_e(ax(&ctx, "m")?, ns)?;
            lam_chain(body, &["s", "n", "m"])?
        }
    };
    let prop = match f {
        BasicFn::Suc => "suc #n ~ #(n+1)",
        BasicFn::Add => "add #m #n ~ #(m+n)",
        BasicFn::Mul => "mul #m #n ~ #(m*n)",
    };
    Ok(NamedTerm::new(f.name(), d, prop, SideCondition::None))
}

/// `suc`, `add`, `mul` at `Nat0 -> ... -> Nat0`, instantiating each numeral
/// argument at the base variable by flat instantiation and generalizing the
/// result.
pub fn basic_nat0(f: BasicFn) -> Result<NamedTerm, TypeError> {
    let nat0 = Type::nat0();
    let step = Type::arrow(bv(), bv());
    let d = match f {
        BasicFn::Suc => {
            let ctx = ctx_of(&[("n", nat0.clone()), ("s", step), ("z", bv())]);
            let n_inst = all_e_flat(ax(&ctx, "n")?, &bv())?;
            let nsz = imp_es(n_inst, [ax(&ctx, "s")?, ax(&ctx, "z")?])?;
            let body = imp_e(ax(&ctx, "s")?, nsz)?;
            let n_alpha = lam_chain(body, &["z", "s"])?;
            imp_i(all_i(n_alpha, &base_var())?, "n")?
        }
        BasicFn::Add => {
            let ctx = ctx_of(&[
                ("m", nat0.clone()),
                ("n", nat0.clone()),
                ("s", step),
                ("z", bv()),
            ]);
            let m_inst = all_e_flat(ax(&ctx, "m")?, &bv())?;
            let n_inst = all_e_flat(ax(&ctx, "n")?, &bv())?;
            let nsz = imp_es(n_inst, [ax(&ctx, "s")?, ax(&ctx, "z")?])?;
            let body = imp_es(m_inst, [ax(&ctx, "s")?, nsz])?;
            let gen = all_i(lam_chain(body, &["z", "s"])?, &base_var())?;
            lam_chain(gen, &["n", "m"])?
        }
        BasicFn::Mul => {
            let ctx = ctx_of(&[("m", nat0.clone()), ("n", nat0.clone()), ("s", step)]);
            let m_inst = all_e_flat(ax(&ctx, "m")?, &bv())?;
            let n_inst = all_e_flat(ax(&ctx, "n")?, &bv())?;
            let ns = imp_e(n_inst, ax(&ctx, "s")?)?;
            let body = imp_e(m_inst, ns)?;
            let gen = all_i(imp_i(body, "s")?, &base_var())?;
            lam_chain(gen, &["n", "m"])?
        }
    };
    let prop = match f {
        BasicFn::Suc => "suc #n ~ #(n+1) at Nat0",
        BasicFn::Add => "add #m #n ~ #(m+n) at Nat0",
        BasicFn::Mul => "mul #m #n ~ #(m*n) at Nat0",
    };
    Ok(NamedTerm::new(f.name(), d, prop, SideCondition::None))
}

/// The downward typecast `cd = \n. n suc #0 : arg -> inner` where `arg`
/// is `N(inner)` and `inner` is itself numeral-shaped or `Nat0`.
/// `cd #n ~ #n`.
pub fn cast_down(arg_ty: &Type) -> Result<NamedTerm, TypeError> {
    let inner = arg_ty
        .unfold_numeral()
        .cloned()
        .ok_or(TypeError::BadShape("cast_down argument must be N(-)"))?;
    let suc = if inner == Type::nat0() {
        basic_nat0(BasicFn::Suc)?
    } else if inner.unfold_numeral().is_some() {
        let tau = inner.unfold_numeral().unwrap().clone();
        basic(BasicFn::Suc, &tau)?
    } else {
        return Err(TypeError::BadShape(
            "cast_down supports N(N(tau)) -> N(tau) and N(Nat0) -> Nat0",
        ));
    };
    let zero = numeral_at(0, &inner)?;
    let ctx = ctx_of(&[("n", arg_ty.clone())]);
    let body = imp_es(ax(&ctx, "n")?, [weaken(&suc.derivation, &ctx)?, weaken(&zero, &ctx)?])?;
    let d = imp_i(body, "n")?;
    Ok(NamedTerm::new("cd", d, "cd #n ~ #n", SideCondition::None))
}

/// `cd` one level down the `Nat0` tower: `Nat0^(k+1) -> Nat0^(k)`.
pub fn cast_down_tower(k: u32) -> Result<NamedTerm, TypeError> {
    cast_down(&Type::nat0_tower(k + 1))
}

/// The predecessor `pred = \n.\s.\z. snd (n P <z,z>)` with
/// `P = \p. <s (fst p), fst p>`, typed `Nat0 -> Nat0` by instantiating the
/// input at the flat product of the base variable with itself.
/// `pred #(n+1) ~ #n` and `pred #0 ~ #0`.
pub fn predecessor() -> Result<NamedTerm, TypeError> {
    let step = Type::arrow(bv(), bv());
    let pp = Type::prod(bv(), bv());
    let ctx = ctx_of(&[("n", Type::nat0()), ("s", step), ("z", bv())]);

    // P : (b*b) -> (b*b) in the ambient context
    let mut pctx = ctx.clone();
    pctx.insert("p".to_string(), pp.clone());
    let fst_p = prod_el(ax(&pctx, "p")?)?;
    let p_body = prod_i(imp_e(ax(&pctx, "s")?, fst_p.clone())?, fst_p)?;
    let p_fn = imp_i(p_body, "p")?;

    let n_inst = all_e_flat(ax(&ctx, "n")?, &pp)?;
    let zz = prod_i(ax(&ctx, "z")?, ax(&ctx, "z")?)?;
    let iterated = imp_es(n_inst, [p_fn, zz])?;
    let body = prod_er(iterated)?;
    let gen = all_i(lam_chain(body, &["z", "s"])?, &base_var())?;
    let d = imp_i(gen, "n")?;
    Ok(NamedTerm::new(
        "pred",
        d,
        "pred #0 ~ #0, pred #(n+1) ~ #n",
        SideCondition::None,
    ))
}

/// Subtraction by predecessor iteration:
/// `sub = \m.\n. n pred m : Nat0 -> N(Nat0) -> Nat0`, `sub #m #n ~ #(m-n)`
/// truncated at zero.
pub fn subtraction() -> Result<NamedTerm, TypeError> {
    let ctx = ctx_of(&[("m", Type::nat0()), ("n", Type::numeral(Type::nat0()))]);
    let pred = predecessor()?;
    let body = imp_es(ax(&ctx, "n")?, [weaken(&pred.derivation, &ctx)?, ax(&ctx, "m")?])?;
    let d = lam_chain(body, &["n", "m"])?;
    Ok(NamedTerm::new(
        "sub",
        d,
        "sub #m #n ~ #(m - n), truncated",
        SideCondition::None,
    ))
}

/// Zero test `chi0 = \n.\x.\y. n (\w. y) x : N(tau) -> tau -> tau -> tau`:
/// `chi0 #0 x y ~ x`, `chi0 #(n+1) x y ~ y`.
pub fn chi_zero(tau: &Type) -> Result<NamedTerm, TypeError> {
    let ctx = ctx_of(&[
        ("n", Type::numeral(tau.clone())),
        ("x", tau.clone()),
        ("y", tau.clone()),
    ]);
    let mut wctx = ctx.clone();
    wctx.insert("w".to_string(), tau.clone());
    let const_y = imp_i(ax(&wctx, "y")?, "w")?;
    let body = imp_es(ax(&ctx, "n")?, [const_y, ax(&ctx, "x")?])?;
    let d = lam_chain(body, &["y", "x", "n"])?;
    Ok(NamedTerm::new(
        "chi0",
        d,
        "chi0 #0 x y ~ x, chi0 #(n+1) x y ~ y",
        SideCondition::None,
    ))
}

/// `chi0` at the open instance `Nat0 -> b -> b -> b` by flat instantiation
/// of the numeral input.
pub fn chi_zero_nat0() -> Result<NamedTerm, TypeError> {
    let ctx = ctx_of(&[("n", Type::nat0()), ("x", bv()), ("y", bv())]);
    let mut wctx = ctx.clone();
    wctx.insert("w".to_string(), bv());
    let const_y = imp_i(ax(&wctx, "y")?, "w")?;
    let n_inst = all_e_flat(ax(&ctx, "n")?, &bv())?;
    let body = imp_es(n_inst, [const_y, ax(&ctx, "x")?])?;
    let d = lam_chain(body, &["y", "x", "n"])?;
    Ok(NamedTerm::new(
        "chi0",
        d,
        "chi0 #0 x y ~ x, chi0 #(n+1) x y ~ y",
        SideCondition::None,
    ))
}

/// Bounded successor `t0`, at tower index `k`:
/// `Nat0^(k) -> Nat0^(k+1) -> Nat0^(k+1)`, with `t0 #0 #m ~ #m` and
/// `t0 #(n+1) #m ~ #(m+1)`.
///
/// The term is `\n.\x.\s.\z.\s2.\z2. chi0 n (s (x s z) s2 z2) (x s z s2 z2)`.
/// At `k = 0` the two scrutinees are instantiated at the base variable by
/// flat instantiation and the inner abstraction is generalized; at `k >= 1`
/// the tower unfolds structurally.
pub fn t_zero(k: u32) -> Result<NamedTerm, TypeError> {
    let prop = "t0 #0 #m ~ #m, t0 #(n+1) #m ~ #(m+1)";
    if k == 0 {
        let nat0 = Type::nat0();
        let ctx = ctx_of(&[
            ("n", nat0.clone()),
            ("x", Type::numeral(nat0.clone())),
            ("s", Type::arrow(nat0.clone(), nat0.clone())),
            ("z", nat0.clone()),
            ("s2", Type::arrow(bv(), bv())),
            ("z2", bv()),
        ]);
        let xsz = imp_es(ax(&ctx, "x")?, [ax(&ctx, "s")?, ax(&ctx, "z")?])?;
        let sxsz = imp_e(ax(&ctx, "s")?, xsz.clone())?;
        let succ_branch = imp_es(all_e_flat(sxsz, &bv())?, [ax(&ctx, "s2")?, ax(&ctx, "z2")?])?;
        let zero_branch = imp_es(all_e_flat(xsz, &bv())?, [ax(&ctx, "s2")?, ax(&ctx, "z2")?])?;
        let chi = chi_zero_nat0()?;
        let body = apply_in(
            &chi.derivation,
            &ctx,
            [ax(&ctx, "n")?, succ_branch, zero_branch],
        )?;
        let inner = lam_chain(body, &["z2", "s2"])?;
        let gen = all_i(inner, &base_var())?;
        let d = lam_chain(gen, &["z", "s", "x", "n"])?;
        Ok(NamedTerm::new("t0", d, prop, SideCondition::None))
    } else {
        let lo = Type::nat0_tower(k - 1); // scrutinee level
        let mid = Type::nat0_tower(k);
        let ctx = ctx_of(&[
            ("n", mid.clone()),
            ("x", Type::nat0_tower(k + 1)),
            ("s", Type::arrow(mid.clone(), mid.clone())),
            ("z", mid.clone()),
            ("s2", Type::arrow(lo.clone(), lo.clone())),
            ("z2", lo.clone()),
        ]);
        let xsz = imp_es(ax(&ctx, "x")?, [ax(&ctx, "s")?, ax(&ctx, "z")?])?;
        let sxsz = imp_e(ax(&ctx, "s")?, xsz.clone())?;
        let succ_branch = imp_es(sxsz, [ax(&ctx, "s2")?, ax(&ctx, "z2")?])?;
        let zero_branch = imp_es(xsz, [ax(&ctx, "s2")?, ax(&ctx, "z2")?])?;
        let chi = chi_zero(&lo)?;
        let body = apply_in(
            &chi.derivation,
            &ctx,
            [ax(&ctx, "n")?, succ_branch, zero_branch],
        )?;
        let d = lam_chain(body, &["z2", "s2", "z", "s", "x", "n"])?;
        Ok(NamedTerm::new("t0", d, prop, SideCondition::None))
    }
}

/// Upward typecast `cu_k : Nat0^(k+2) -> Nat0^(k) -> Nat0^(k+1)` with
/// `cu_k #m #n ~ #n` as long as `m >= n`. The base `cu_0` iterates
/// "if x < n then x+1 else x" built from `sub`; `cu_k` for `k >= 1` builds
/// the same loop from the homogeneous subtraction one level down.
pub fn cast_up(k: u32) -> Result<NamedTerm, TypeError> {
    let prop = "cu #m #n ~ #n when m >= n";
    let requires = SideCondition::FirstAtLeast(|rest| rest.first().copied().unwrap_or(0));
    if k == 0 {
        let n_nat0 = Type::numeral(Type::nat0());
        let ctx = ctx_of(&[("m", Type::nat0_tower(2)), ("n", Type::nat0())]);
        let mut xctx = ctx.clone();
        xctx.insert("x".to_string(), n_nat0.clone());
        let sub = subtraction()?;
        let t0 = t_zero(0)?;
        let sub_nx = apply_in(&sub.derivation, &xctx, [ax(&xctx, "n")?, ax(&xctx, "x")?])?;
        let step = imp_i(
            apply_in(&t0.derivation, &xctx, [sub_nx, ax(&xctx, "x")?])?,
            "x",
        )?;
        let zero = weaken(&numeral_tower(0, 1)?, &ctx)?;
        let body = imp_es(ax(&ctx, "m")?, [step, zero])?;
        let d = lam_chain(body, &["n", "m"])?;
        Ok(NamedTerm::new("cu", d, prop, requires))
    } else {
        let ctx = ctx_of(&[
            ("m", Type::nat0_tower(k + 2)),
            ("n", Type::nat0_tower(k)),
        ]);
        let mut xctx = ctx.clone();
        xctx.insert("x".to_string(), Type::nat0_tower(k + 1));
        let cd_hi = cast_down_tower(k + 1)?; // Nat0^(k+2) -> Nat0^(k+1)
        let cd_lo = cast_down_tower(k)?; // Nat0^(k+1) -> Nat0^(k)
        let sub_k = subt(k - 1)?; // Nat0^(k+1) -> Nat0^(k)^3
        let t0 = t_zero(k)?;
        let cd_m = apply_in(&cd_hi.derivation, &xctx, [ax(&xctx, "m")?])?;
        let cd_x = apply_in(&cd_lo.derivation, &xctx, [ax(&xctx, "x")?])?;
        let diff = apply_in(&sub_k.derivation, &xctx, [cd_m, ax(&xctx, "n")?, cd_x])?;
        let step = imp_i(
            apply_in(&t0.derivation, &xctx, [diff, ax(&xctx, "x")?])?,
            "x",
        )?;
        let zero = weaken(&numeral_tower(0, k + 1)?, &ctx)?;
        let body = imp_es(ax(&ctx, "m")?, [step, zero])?;
        let d = lam_chain(body, &["n", "m"])?;
        Ok(NamedTerm::new("cu", d, prop, requires))
    }
}

/// Homogeneous subtraction with a large parameter, 0-based family index:
/// `subt(j) : Nat0^(j+2) -> (Nat0^(j+1))^3` with
/// `subt #L #n #c ~ #(n - c)` truncated, as long as `L >= n - c`.
///
/// `subt(0)` is the base `\m.\n.\c. cu_0 m (sub (cd n) c)`; `subt(j+1)` is
/// `\m.\n1.\n2. cu_(j+1) m (subt(j) (cd m) (cd n1) (cd n2))`.
pub fn subt(j: u32) -> Result<NamedTerm, TypeError> {
    let prop = "subt #L #n #c ~ #(n - c) truncated, when L >= n - c";
    let requires = SideCondition::FirstAtLeast(|rest| {
        let n = rest.first().copied().unwrap_or(0);
        let c = rest.get(1).copied().unwrap_or(0);
        n.saturating_sub(c)
    });
    if j == 0 {
        let ctx = ctx_of(&[
            ("m", Type::nat0_tower(2)),
            ("n", Type::nat0_tower(1)),
            ("c", Type::nat0_tower(1)),
        ]);
        let cd = cast_down_tower(0)?;
        let sub = subtraction()?;
        let cu = cast_up(0)?;
        let cd_n = apply_in(&cd.derivation, &ctx, [ax(&ctx, "n")?])?;
        let diff = apply_in(&sub.derivation, &ctx, [cd_n, ax(&ctx, "c")?])?;
        let body = apply_in(&cu.derivation, &ctx, [ax(&ctx, "m")?, diff])?;
        let d = lam_chain(body, &["c", "n", "m"])?;
        Ok(NamedTerm::new("subt", d, prop, requires))
    } else {
        let ctx = ctx_of(&[
            ("m", Type::nat0_tower(j + 2)),
            ("n1", Type::nat0_tower(j + 1)),
            ("n2", Type::nat0_tower(j + 1)),
        ]);
        let cd_m = cast_down_tower(j + 1)?;
        let cd_n = cast_down_tower(j)?;
        let prev = subt(j - 1)?;
        let cu = cast_up(j)?;
        let m_down = apply_in(&cd_m.derivation, &ctx, [ax(&ctx, "m")?])?;
        let n1_down = apply_in(&cd_n.derivation, &ctx, [ax(&ctx, "n1")?])?;
        let n2_down = apply_in(&cd_n.derivation, &ctx, [ax(&ctx, "n2")?])?;
        let diff = apply_in(&prev.derivation, &ctx, [m_down, n1_down, n2_down])?;
        let body = apply_in(&cu.derivation, &ctx, [ax(&ctx, "m")?, diff])?;
        let d = lam_chain(body, &["n2", "n1", "m"])?;
        Ok(NamedTerm::new("subt", d, prop, requires))
    }
}

/// Iterated upward typecast
/// `cu^(l)_k : Nat0^(k+l+1) -> Nat0^(k) -> Nat0^(k+l)`:
/// `cu^(0)_k = \m.\n. n` and
/// `cu^(l+1)_k = \m.\n. cu_(k+l) m (cu^(l)_k (cd m) n)`.
/// Casts `#n` up `l` levels as long as the parameter is at least `n`.
pub fn cast_up_iter(l: u32, k: u32) -> Result<NamedTerm, TypeError> {
    let prop = "cuiter #m #n ~ #n (l levels up) when m >= n";
    let requires = SideCondition::FirstAtLeast(|rest| rest.first().copied().unwrap_or(0));
    if l == 0 {
        let ctx = ctx_of(&[
            ("m", Type::nat0_tower(k + 1)),
            ("n", Type::nat0_tower(k)),
        ]);
        let d = lam_chain(ax(&ctx, "n")?, &["n", "m"])?;
        Ok(NamedTerm::new("cuiter", d, prop, SideCondition::None))
    } else {
        let ctx = ctx_of(&[
            ("m", Type::nat0_tower(k + l + 1)),
            ("n", Type::nat0_tower(k)),
        ]);
        let cd = cast_down_tower(k + l)?;
        let inner = cast_up_iter(l - 1, k)?;
        let cu = cast_up(k + l - 1)?;
        let cd_m = apply_in(&cd.derivation, &ctx, [ax(&ctx, "m")?])?;
        let lifted = apply_in(&inner.derivation, &ctx, [cd_m, ax(&ctx, "n")?])?;
        let body = apply_in(&cu.derivation, &ctx, [ax(&ctx, "m")?, lifted])?;
        let d = lam_chain(body, &["n", "m"])?;
        Ok(NamedTerm::new("cuiter", d, prop, requires))
    }
}

/// Numeral-level conditional at tower index `j >= 1`:
/// `chitilde = \n.\x.\y.\s.\z. chi0 n (x s z) (y s z)` of type
/// `(Nat0^(j))^3 -> Nat0^(j)`, with `chitilde #0 #i #j ~ #i` and
/// `chitilde #(n+1) #i #j ~ #j`.
pub fn chi_zero_lifted(k: u32, l: u32) -> Result<NamedTerm, TypeError> {
    let j = k + l + 1;
    let hi = Type::nat0_tower(j);
    let lo = Type::nat0_tower(j - 1);
    let ctx = ctx_of(&[
        ("n", hi.clone()),
        ("x", hi.clone()),
        ("y", hi.clone()),
        ("s", Type::arrow(lo.clone(), lo.clone())),
        ("z", lo.clone()),
    ]);
    let chi = chi_zero(&lo)?;
    let xsz = imp_es(ax(&ctx, "x")?, [ax(&ctx, "s")?, ax(&ctx, "z")?])?;
    let ysz = imp_es(ax(&ctx, "y")?, [ax(&ctx, "s")?, ax(&ctx, "z")?])?;
    let body = apply_in(&chi.derivation, &ctx, [ax(&ctx, "n")?, xsz, ysz])?;
    let d = lam_chain(body, &["z", "s", "y", "x", "n"])?;
    Ok(NamedTerm::new(
        "chitilde",
        d,
        "chitilde #0 #i #j ~ #i, chitilde #(n+1) #i #j ~ #j",
        SideCondition::None,
    ))
}

/// Sum or product mode for the bounded-iteration step.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum IterMode {
    Sum,
    Prod,
}

/// The conditional accumulator `T` and pair step `P` of the bounded
/// sum/product construction at indices `(k, l)`.
///
/// `g_call` must derive `ctx, y : Nat0^(k+l+1) |- g-value : Nat0^(k+1)`
/// where `ctx` binds the large parameter `v : Nat0^(k+l+2)` and the bound
/// argument `m : Nat0^(k+l+1)` (names passed in). Then
/// `T = \x.\y. chitilde (subt v m y) x (op x (cuiter v g-value))` of type
/// `(Nat0^(k+l+1))^2 -> Nat0^(k+l+1)` behaves, for large enough `v`, as
/// "if y < m then op(x, g(..,y)) else x", and
/// `P = \p. <T (fst p) (snd p), suc (snd p)>` steps the accumulator pair.
pub fn sum_step(
    mode: IterMode,
    k: u32,
    l: u32,
    v_name: &str,
    m_name: &str,
    y_name: &str,
    g_call: &Derivation,
) -> Result<(NamedTerm, NamedTerm), TypeError> {
    let j = k + l + 1;
    let hi = Type::nat0_tower(j);
    if g_call.ty() != &Type::nat0_tower(k + 1) {
        return Err(TypeError::BadShape("g-call must produce Nat0^(k+1)"));
    }
    if g_call.ctx().get(v_name) != Some(&Type::nat0_tower(k + l + 2))
        || g_call.ctx().get(m_name) != Some(&hi)
        || g_call.ctx().get(y_name) != Some(&hi)
    {
        return Err(TypeError::BadShape("sum_step context bindings are off"));
    }

    // x enters scope under the binder y, so build the body in ctx + x.
    let mut bctx = g_call.ctx().clone();
    bctx.insert("x".to_string(), hi.clone());
    let g_call = weaken(g_call, &bctx)?;

    let subt_j = subt(j - 1)?; // Nat0^(j+1) -> (Nat0^(j))^3
    let guard = apply_in(
        &subt_j.derivation,
        &bctx,
        [ax(&bctx, v_name)?, ax(&bctx, m_name)?, ax(&bctx, y_name)?],
    )?;
    let lift = cast_up_iter(l, k + 1)?; // Nat0^(k+l+2) -> Nat0^(k+1) -> Nat0^(k+l+1)
    let lifted_g = apply_in(&lift.derivation, &bctx, [ax(&bctx, v_name)?, g_call])?;
    let op = match mode {
        IterMode::Sum => basic(BasicFn::Add, &Type::nat0_tower(j - 1))?,
        IterMode::Prod => basic(BasicFn::Mul, &Type::nat0_tower(j - 1))?,
    };
    let acc = apply_in(&op.derivation, &bctx, [ax(&bctx, "x")?, lifted_g])?;
    let chit = chi_zero_lifted(k, l)?;
    let t_body = apply_in(&chit.derivation, &bctx, [guard, ax(&bctx, "x")?, acc])?;
    let t_fn = imp_i(imp_i(t_body, y_name)?, "x")?;
    let t_named = NamedTerm::new(
        "sumstep-t",
        t_fn.clone(),
        "T #x #y ~ if y < m then op(x, g(.., y)) else x, for large v",
        SideCondition::None,
    );

    // P = \p. <T (fst p) (snd p), suc (snd p)>
    let mut pctx = t_fn.ctx().clone();
    pctx.insert("p".to_string(), Type::prod(hi.clone(), hi.clone()));
    let tp = weaken(&t_fn, &pctx)?;
    let fst_p = prod_el(ax(&pctx, "p")?)?;
    let snd_p = prod_er(ax(&pctx, "p")?)?;
    let left = imp_es(tp, [fst_p, snd_p.clone()])?;
    let suc = basic(BasicFn::Suc, &Type::nat0_tower(j - 1))?;
    let right = apply_in(&suc.derivation, &pctx, [snd_p])?;
    let p_fn = imp_i(prod_i(left, right)?, "p")?;
    let p_named = NamedTerm::new(
        "sumstep-p",
        p_fn,
        "P <acc, i> steps the bounded iteration accumulator",
        SideCondition::None,
    );
    Ok((t_named, p_named))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{beta_eq, beta_eta_eq, decode_numeral, encode_numeral, normalize};

    const FUEL: u64 = 1_000_000;

    fn run1(nt: &NamedTerm, a: u64) -> Option<u64> {
        let t = Term::app(nt.term.clone(), encode_numeral(a));
        decode_numeral(normalize(&t, FUEL).term())
    }

    fn run2(nt: &NamedTerm, a: u64, b: u64) -> Option<u64> {
        let t = Term::apps(nt.term.clone(), [encode_numeral(a), encode_numeral(b)]);
        decode_numeral(normalize(&t, FUEL).term())
    }

    #[test]
    fn numerals_check_and_decode() {
        for n in [0u64, 1, 3, 7] {
            let d = numeral_at(n, &Type::nat0()).unwrap();
            check_derivation(&d).unwrap();
            assert_eq!(decode_numeral(d.subject()), Some(n));
            let d1 = numeral_tower(n, 2).unwrap();
            check_derivation(&d1).unwrap();
        }
    }

    #[test]
    fn suc_add_mul_operational() {
        let tau = Type::numeral(bv());
        let suc = basic(BasicFn::Suc, &tau).unwrap();
        suc.audit().unwrap();
        assert_eq!(run1(&suc, 4), Some(5));

        let add = basic_nat0(BasicFn::Add).unwrap();
        add.audit().unwrap();
        assert_eq!(run2(&add, 2, 3), Some(5));

        let mul = basic(BasicFn::Mul, &bv()).unwrap();
        mul.audit().unwrap();
        assert_eq!(run2(&mul, 0, 7), Some(0));
        assert_eq!(run2(&mul, 3, 4), Some(12));
    }

    #[test]
    fn cast_down_instances() {
        let cd = cast_down(&Type::numeral(Type::numeral(bv()))).unwrap();
        cd.audit().unwrap();
        assert_eq!(run1(&cd, 0), Some(0));
        assert_eq!(run1(&cd, 7), Some(7));

        let cd0 = cast_down_tower(0).unwrap();
        cd0.audit().unwrap();
        assert_eq!(cd0.ty(), &Type::arrow(Type::nat0_tower(1), Type::nat0()));
        assert_eq!(run1(&cd0, 5), Some(5));
    }

    #[test]
    fn predecessor_operational() {
        let pred = predecessor().unwrap();
        pred.audit().unwrap();
        // eta-equality at 0: pred #0 normalizes to \s.\z. snd <z, z>... -> #0
        for (and_in, out) in [(0u64, 0u64), (1, 0), (5, 4)] {
            let t = Term::app(pred.term.clone(), encode_numeral(and_in));
            let eq = beta_eta_eq(&t, &encode_numeral(out), FUEL).unwrap();
            assert!(eq, "pred {and_in} should be {out}");
        }
    }

    #[test]
    fn subtraction_operational() {
        let sub = subtraction().unwrap();
        sub.audit().unwrap();
        for (m, n) in [(5u64, 3u64), (3, 5), (4, 0), (0, 2)] {
            let t = Term::apps(sub.term.clone(), [encode_numeral(m), encode_numeral(n)]);
            let eq = beta_eta_eq(&t, &encode_numeral(m.saturating_sub(n)), FUEL).unwrap();
            assert!(eq, "sub {m} {n}");
        }
    }

    #[test]
    fn chi_zero_operational() {
        let chi = chi_zero(&bv()).unwrap();
        chi.audit().unwrap();
        // chi0 #0 a b ~ a; chi0 #2 a b ~ b  (a, b free variables)
        let t0 = Term::apps(
            chi.term.clone(),
            [encode_numeral(0), Term::var("a"), Term::var("b")],
        );
        assert!(beta_eq(&t0, &Term::var("a"), FUEL).unwrap());
        let t2 = Term::apps(
            chi.term.clone(),
            [encode_numeral(2), Term::var("a"), Term::var("b")],
        );
        assert!(beta_eq(&t2, &Term::var("b"), FUEL).unwrap());
    }

    #[test]
    fn t_zero_operational_both_indices() {
        for k in [0u32, 1] {
            let t0 = t_zero(k).unwrap();
            t0.audit().unwrap();
            for (n, m, out) in [(0u64, 9u64, 9u64), (4, 9, 10), (1, 0, 1)] {
                let t = Term::apps(t0.term.clone(), [encode_numeral(n), encode_numeral(m)]);
                let eq = beta_eta_eq(&t, &encode_numeral(out), FUEL).unwrap();
                assert!(eq, "t0(k={k}) {n} {m} -> {out}");
            }
        }
    }

    #[test]
    fn cast_up_operational() {
        for k in [0u32, 1] {
            let cu = cast_up(k).unwrap();
            cu.audit().unwrap();
            for (m, n) in [(5u64, 3u64), (3, 3), (10, 0)] {
                assert!(cu.requires.holds(&[m, n]));
                let t = Term::apps(cu.term.clone(), [encode_numeral(m), encode_numeral(n)]);
                let eq = beta_eta_eq(&t, &encode_numeral(n), FUEL).unwrap();
                assert!(eq, "cu_{k} {m} {n}");
            }
            // unconstrained direction: m < n does not cast correctly
            assert!(!cu.requires.holds(&[2, 3]));
        }
    }

    #[test]
    fn subt_base_operational() {
        let s = subt(0).unwrap();
        s.audit().unwrap();
        for (l, n, c) in [(9u64, 7u64, 3u64), (10, 2, 5), (10, 5, 5)] {
            let t = Term::apps(
                s.term.clone(),
                [encode_numeral(l), encode_numeral(n), encode_numeral(c)],
            );
            let eq = beta_eta_eq(&t, &encode_numeral(n.saturating_sub(c)), FUEL).unwrap();
            assert!(eq, "subt {l} {n} {c}");
        }
    }

    #[test]
    fn cast_up_iter_zero_levels() {
        let c = cast_up_iter(0, 1).unwrap();
        c.audit().unwrap();
        let t = Term::apps(c.term.clone(), [encode_numeral(9), encode_numeral(6)]);
        assert!(beta_eq(&t, &encode_numeral(6), FUEL).unwrap());
    }

    #[test]
    fn chi_zero_lifted_operational() {
        let chit = chi_zero_lifted(0, 0).unwrap();
        chit.audit().unwrap();
        for (n, x, y, out) in [(0u64, 4u64, 9u64, 4u64), (2, 4, 9, 9)] {
            let t = Term::apps(
                chit.term.clone(),
                [encode_numeral(n), encode_numeral(x), encode_numeral(y)],
            );
            let eq = beta_eta_eq(&t, &encode_numeral(out), FUEL).unwrap();
            assert!(eq, "chitilde {n} {x} {y}");
        }
    }
}
