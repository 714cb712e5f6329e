use std::collections::BTreeSet;

use super::*;
use crate::boundary::translate_type;

fn seq_err(rule: &str, construct: impl Into<String>, msg: impl Into<String>) -> TypeError {
    TypeError::new(ErrorCode::Seq, rule, construct, msg)
}

fn val_err(rule: &str, construct: impl Into<String>, msg: impl Into<String>) -> TypeError {
    TypeError::new(ErrorCode::Val, rule, construct, msg)
}

fn show_ty(t: &Type) -> String {
    type_str(t)
}

// ---------------------------------------------------------------------------
// Values

fn pack_rule(ctx: &TypingContext, witness: &Type, inner: Type, ann: &Type, shown: &str) -> TResult<Type> {
    let Type::Exists(a, body) = ann else {
        return Err(val_err(
            "annotation-mismatch",
            shown,
            format!("pack annotation {} is not an existential", show_ty(ann)),
        ));
    };
    wf_type(&ctx.delta, witness).map_err(|m| val_err("ill-formed", shown, m))?;
    wf_type(&ctx.delta, ann).map_err(|m| val_err("ill-formed", shown, m))?;
    let expect = substitute(body.as_ref(), &TyVar::ty(a.clone()), Omega::Type(witness.clone()))?;
    if !alpha_equal(&inner, &expect) {
        return Err(val_err(
            "annotation-mismatch",
            shown,
            format!("packed value has type {}, expected {}", show_ty(&inner), show_ty(&expect)),
        ));
    }
    Ok(ann.clone())
}

fn fold_rule(ctx: &TypingContext, ann: &Type, inner: Type, shown: &str) -> TResult<Type> {
    let Type::Mu(a, body) = ann else {
        return Err(val_err(
            "annotation-mismatch",
            shown,
            format!("fold annotation {} is not recursive", show_ty(ann)),
        ));
    };
    wf_type(&ctx.delta, ann).map_err(|m| val_err("ill-formed", shown, m))?;
    let expect = substitute(body.as_ref(), &TyVar::ty(a.clone()), Omega::Type(ann.clone()))?;
    if !alpha_equal(&inner, &expect) {
        return Err(val_err(
            "annotation-mismatch",
            shown,
            format!("folded value has type {}, expected {}", show_ty(&inner), show_ty(&expect)),
        ));
    }
    Ok(ann.clone())
}

fn inst_rule(ctx: &TypingContext, inner: Type, omega: &Omega, shown: &str) -> TResult<Type> {
    let ct = match inner.as_code() {
        Some(ct) if !ct.delta.is_empty() => ct,
        _ => {
            return Err(val_err(
                "not-polymorphic",
                shown,
                format!("cannot instantiate a value of type {}", show_ty(&inner)),
            ))
        }
    };
    let binder = &ct.delta[0];
    if binder.kind != omega.kind() {
        return Err(val_err(
            "kind-mismatch",
            shown,
            format!(
                "{} is a {} variable but was instantiated with a {}",
                binder.name,
                binder.kind,
                omega.kind()
            ),
        ));
    }
    wf(&ctx.delta, omega).map_err(|m| val_err("ill-formed", shown, m))?;
    if let Omega::Type(t) = omega {
        wf_type(&ctx.delta, t).map_err(|m| val_err("ill-formed", shown, m))?;
    }
    if matches!(omega, Omega::Marker(Marker::Out)) {
        return Err(val_err("ill-formed", shown, "`out` cannot instantiate a T marker variable"));
    }
    let rest = CodeType {
        delta: ct.delta[1..].to_vec(),
        ..ct.clone()
    };
    Ok(Type::code(substitute(&rest, binder, omega.clone())?))
}

fn check_word(ctx: &TypingContext, w: &Word) -> TResult<Type> {
    let shown = || word_str(w);
    match w {
        Word::Unit => Ok(Type::Unit),
        Word::Int(_) => Ok(Type::Int),
        Word::Loc(l) => match ctx.psi.get(l) {
            Some((Mutability::Ref, HeapType::Tuple(ts))) => Ok(Type::Ref(ts.clone())),
            Some((_, h)) => Ok(Type::Box(Box::new(h.clone()))),
            None => Err(val_err("unbound-location", shown(), format!("unknown label {l}"))),
        },
        Word::Pack(t, inner, ann) => {
            let it = check_word(ctx, inner)?;
            pack_rule(ctx, t, it, ann, &shown())
        }
        Word::Fold(ann, inner) => {
            let it = check_word(ctx, inner)?;
            fold_rule(ctx, ann, it, &shown())
        }
        Word::Inst(inner, o) => {
            let it = check_word(ctx, inner)?;
            inst_rule(ctx, it, o, &shown())
        }
    }
}

pub(super) fn check_small(ctx: &TypingContext, u: &Small) -> TResult<Type> {
    let shown = || small_str(u);
    match u {
        Small::Word(w) => check_word(ctx, w),
        Small::Reg(r) => ctx.chi.get(*r).cloned().ok_or_else(|| {
            val_err("unbound-register", shown(), format!("register {r} holds no value"))
        }),
        Small::Pack(t, inner, ann) => {
            let it = check_small(ctx, inner)?;
            pack_rule(ctx, t, it, ann, &shown())
        }
        Small::Fold(ann, inner) => {
            let it = check_small(ctx, inner)?;
            fold_rule(ctx, ann, it, &shown())
        }
        Small::Inst(inner, o) => {
            let it = check_small(ctx, inner)?;
            inst_rule(ctx, it, o, &shown())
        }
    }
}

// ---------------------------------------------------------------------------
// Instructions

fn reg_type<'a>(ctx: &'a TypingContext, r: Reg, shown: &str) -> TResult<&'a Type> {
    ctx.chi
        .get(r)
        .ok_or_else(|| val_err("unbound-register", shown, format!("register {r} holds no value")))
}

fn expect_int(t: &Type, what: &str, shown: &str, rule: &str) -> TResult<()> {
    if *t == Type::Int {
        Ok(())
    } else {
        Err(seq_err(rule, shown, format!("{what} has type {}, expected int", show_ty(t))))
    }
}

fn not_marker_dest(ctx: &TypingContext, rd: Reg, shown: &str, rule: &str) -> TResult<()> {
    if *ctx.q() == Marker::Reg(rd) {
        Err(seq_err(
            rule,
            shown,
            format!("{rd} holds the return continuation and cannot be overwritten"),
        ))
    } else {
        Ok(())
    }
}

fn visible<'a>(ctx: &'a TypingContext, i: usize, shown: &str, rule: &str) -> TResult<&'a Type> {
    ctx.sigma.get(i).ok_or_else(|| {
        seq_err(
            rule,
            shown,
            format!("stack slot {i} is not visible in {}", stack_str(&ctx.sigma)),
        )
    })
}

/// Binder names that already occur in Δ are renamed in the rest of the
/// sequence; the second component reports such a renaming.
type Renaming = Option<(TyVar, TyVar)>;

fn bind_fresh(ctx: &TypingContext, v: TyVar) -> (TyVar, Renaming) {
    if ctx.has_var(&v) {
        let fresh = fresh_in(v.clone(), &ctx.delta);
        (fresh.clone(), Some((v, fresh)))
    } else {
        (v, None)
    }
}

fn post_of(ctx: &TypingContext) -> InstructionPost {
    InstructionPost {
        delta: ctx.delta.clone(),
        chi: ctx.chi.clone(),
        sigma: ctx.sigma.clone(),
        marker: ctx.q().clone(),
    }
}

pub(super) fn check_instr(
    holes: &Holes,
    ctx: &TypingContext,
    instr: &Instr,
) -> TResult<(InstructionPost, Renaming)> {
    let shown = instr_str(instr);
    let shown = shown.as_str();
    let q = ctx.q().clone();
    wf_return_marker(&ctx.delta, &ctx.delta, &ctx.chi, &ctx.sigma, &q)
        .map_err(|e| TypeError { construct: shown.to_string(), ..e })?;
    let mut post = post_of(ctx);
    let mut renaming = None;
    match instr {
        Instr::Aop(p, rd, rs, u) => {
            let rule = p.mnemonic();
            not_marker_dest(ctx, *rd, shown, rule)?;
            expect_int(reg_type(ctx, *rs, shown)?, &format!("{rs}"), shown, rule)?;
            expect_int(&check_small(ctx, u)?, &small_str(u), shown, rule)?;
            post.chi = ctx.chi.with(*rd, Type::Int);
        }
        Instr::Bnz(r, u) => {
            expect_int(reg_type(ctx, *r, shown)?, &format!("{r}"), shown, "bnz")?;
            let t = check_small(ctx, u)?;
            check_branch_target(holes, ctx, &t, shown, "bnz")?;
        }
        Instr::Ld(rd, rs, i) => {
            not_marker_dest(ctx, *rd, shown, "ld")?;
            let t = reg_type(ctx, *rs, shown)?;
            let ts = match t {
                Type::Ref(ts) => ts,
                Type::Box(h) => match h.as_ref() {
                    HeapType::Tuple(ts) => ts,
                    HeapType::Code(_) => {
                        return Err(seq_err("ld", shown, format!("{rs} points to code, not a tuple")))
                    }
                },
                _ => {
                    return Err(seq_err(
                        "ld",
                        shown,
                        format!("{rs} has type {}, expected a tuple reference", show_ty(t)),
                    ))
                }
            };
            let ti = ts.get(*i).ok_or_else(|| {
                seq_err("ld", shown, format!("index {i} out of range for a {}-tuple", ts.len()))
            })?;
            post.chi = ctx.chi.with(*rd, ti.clone());
        }
        Instr::St(rd, i, rs) => {
            let t = reg_type(ctx, *rd, shown)?;
            let Type::Ref(ts) = t else {
                return Err(seq_err(
                    "st",
                    shown,
                    format!("{rd} has type {}; only ref tuples are mutable", show_ty(t)),
                ));
            };
            let ti = ts.get(*i).ok_or_else(|| {
                seq_err("st", shown, format!("index {i} out of range for a {}-tuple", ts.len()))
            })?;
            let ts_ = reg_type(ctx, *rs, shown)?;
            if !alpha_equal(ti, ts_) {
                return Err(seq_err(
                    "st",
                    shown,
                    format!("storing {} into a slot of type {}", show_ty(ts_), show_ty(ti)),
                ));
            }
        }
        Instr::Ralloc(rd, n) | Instr::Balloc(rd, n) => {
            let rule = if matches!(instr, Instr::Ralloc(..)) { "ralloc" } else { "balloc" };
            not_marker_dest(ctx, *rd, shown, rule)?;
            if *n > ctx.sigma.depth() {
                return Err(seq_err(
                    rule,
                    shown,
                    format!("cannot pop {n} cells from {}", stack_str(&ctx.sigma)),
                ));
            }
            if let Marker::Index(i) = q {
                if i < *n {
                    return Err(seq_err(rule, shown, "would consume the return continuation"));
                }
            }
            let ts = ctx.sigma.prefix[..*n].to_vec();
            let t = if rule == "ralloc" { Type::Ref(ts) } else { Type::box_tuple(ts) };
            post.chi = ctx.chi.with(*rd, t);
            post.sigma = ctx.sigma.drop_top(*n).expect("checked depth");
            post.marker = inc(&q, -(*n as isize));
        }
        Instr::Mv(rd, u) => {
            match u.as_reg() {
                Some(rs) if q == Marker::Reg(rs) => {
                    let t = reg_type(ctx, rs, shown)?.clone();
                    post.chi = ctx.chi.with(*rd, t);
                    post.marker = Marker::Reg(*rd);
                }
                _ => {
                    not_marker_dest(ctx, *rd, shown, "mv")?;
                    let t = check_small(ctx, u)?;
                    post.chi = ctx.chi.with(*rd, t);
                }
            }
        }
        Instr::Salloc(n) => {
            post.sigma = ctx.sigma.push_prefix(&vec![Type::Unit; *n]);
            post.marker = inc(&q, *n as isize);
        }
        Instr::Sfree(n) => {
            if *n > ctx.sigma.depth() {
                return Err(seq_err(
                    "sfree",
                    shown,
                    format!("cannot free {n} cells from {}", stack_str(&ctx.sigma)),
                ));
            }
            if let Marker::Index(i) = q {
                if i < *n {
                    return Err(seq_err(
                        "sfree",
                        shown,
                        format!("would free the return continuation at slot {i}"),
                    ));
                }
            }
            post.sigma = ctx.sigma.drop_top(*n).expect("checked depth");
            post.marker = inc(&q, -(*n as isize));
        }
        Instr::Sld(rd, i) => {
            let t = visible(ctx, *i, shown, "sld")?.clone();
            if q == Marker::Index(*i) {
                post.marker = Marker::Reg(*rd);
            } else {
                not_marker_dest(ctx, *rd, shown, "sld")?;
            }
            post.chi = ctx.chi.with(*rd, t);
        }
        Instr::Sst(i, rs) => {
            visible(ctx, *i, shown, "sst")?;
            let t = reg_type(ctx, *rs, shown)?.clone();
            if q == Marker::Reg(*rs) {
                post.marker = Marker::Index(*i);
            } else if q == Marker::Index(*i) {
                return Err(seq_err(
                    "sst",
                    shown,
                    format!("slot {i} holds the return continuation"),
                ));
            }
            post.sigma.prefix[*i] = t;
        }
        Instr::Unpack(a, rd, u) => {
            not_marker_dest(ctx, *rd, shown, "unpack")?;
            let t = check_small(ctx, u)?;
            let Type::Exists(b, body) = &t else {
                return Err(seq_err(
                    "unpack",
                    shown,
                    format!("{} is not an existential package", show_ty(&t)),
                ));
            };
            let (v, r) = bind_fresh(ctx, TyVar::ty(a.clone()));
            renaming = r;
            let opened = substitute(body.as_ref(), &TyVar::ty(b.clone()), Omega::Type(Type::Var(v.name.clone())))?;
            post.delta.push(v);
            post.chi = ctx.chi.with(*rd, opened);
        }
        Instr::Unfold(rd, u) => {
            not_marker_dest(ctx, *rd, shown, "unfold")?;
            let t = check_small(ctx, u)?;
            let Type::Mu(a, body) = &t else {
                return Err(seq_err(
                    "unfold",
                    shown,
                    format!("{} is not a recursive type", show_ty(&t)),
                ));
            };
            let opened = substitute(body.as_ref(), &TyVar::ty(a.clone()), Omega::Type(t.clone()))?;
            post.chi = ctx.chi.with(*rd, opened);
        }
        Instr::Protect(phi, z) => {
            for t in phi {
                wf_type(&ctx.delta, t).map_err(|m| seq_err("protect", shown, m))?;
            }
            let n = phi.len();
            if ctx.sigma.depth() < n || !types_equal(&ctx.sigma.prefix[..n], phi) {
                return Err(seq_err(
                    "protect",
                    shown,
                    format!("stack {} does not start with {}", stack_str(&ctx.sigma), phi_str(phi)),
                ));
            }
            if let Marker::Index(i) = q {
                if i >= n {
                    return Err(TypeError::new(
                        ErrorCode::WfRet,
                        "marker-not-visible",
                        shown,
                        format!("protect would hide the return continuation at slot {i}"),
                    ));
                }
            }
            let (v, r) = bind_fresh(ctx, TyVar::stack(z.clone()));
            renaming = r;
            post.sigma = Stack::new(phi.clone(), Tail::Var(v.name.clone()));
            post.delta.push(v);
        }
        Instr::Import(imp) => {
            post = check_import(holes, ctx, imp, shown)?;
        }
    }
    Ok((post, renaming))
}

fn check_import(holes: &Holes, ctx: &TypingContext, imp: &Import, shown: &str) -> TResult<InstructionPost> {
    let q = ctx.q().clone();
    wf(&ctx.delta, &imp.sigma).map_err(|m| seq_err("import", shown, m))?;
    let prefix = split_suffix(&ctx.sigma, &imp.sigma).ok_or_else(|| {
        seq_err(
            "import",
            shown,
            format!(
                "{} is not a tail of the current stack {}",
                stack_str(&imp.sigma),
                stack_str(&ctx.sigma)
            ),
        )
    })?;
    let c = prefix.len();
    match q {
        Marker::Index(i) if i >= c => {}
        Marker::Halt(..) => {}
        _ => {
            return Err(seq_err(
                "import",
                shown,
                format!(
                    "the return continuation ({}) must lie in the protected tail or be a halting marker",
                    marker_str(&q)
                ),
            ))
        }
    }
    let requested = TyVar::stack(imp.zeta.clone().unwrap_or_else(|| "z".into()));
    let zeta = fresh_in(requested.clone(), &ctx.delta);
    let body = if zeta != requested {
        substitute(imp.body.as_ref(), &requested, Omega::Stack(Stack::var(zeta.name.clone())))?
    } else {
        (*imp.body).clone()
    };
    let mut inner = ctx.clone();
    inner.delta.push(zeta.clone());
    inner.sigma = Stack::new(prefix, Tail::Var(zeta.name.clone()));
    inner.marker = Some(Marker::Out);
    inner.aliases.clear();
    let (t, out) = super::f::check_expr(holes, &inner, &body).map_err(|e| e.within(shown.to_string()))?;
    if !alpha_equal(&t, &imp.ty) {
        return Err(seq_err(
            "import",
            shown,
            format!("body has type {}, annotation says {}", show_ty(&t), show_ty(&imp.ty)),
        ));
    }
    if out.tail != Tail::Var(zeta.name.clone()) {
        return Err(seq_err(
            "import",
            shown,
            format!("body must leave the protected tail in place, but produced {}", stack_str(&out)),
        ));
    }
    let k = out.prefix.len();
    let restored = substitute(
        &Stack::new(out.prefix, Tail::Var(zeta.name.clone())),
        &zeta,
        Omega::Stack(imp.sigma.clone()),
    )?;
    let tt = translate_type(&imp.ty).map_err(|m| seq_err("import", shown, m))?;
    Ok(InstructionPost {
        delta: ctx.delta.clone(),
        chi: RegFile::single(imp.rd, tt),
        sigma: restored,
        marker: inc(&q, k as isize - c as isize),
    })
}

fn check_branch_target(holes: &Holes, ctx: &TypingContext, t: &Type, shown: &str, rule: &str) -> TResult<()> {
    let ct = t.as_code().ok_or_else(|| {
        seq_err(rule, shown, format!("target has type {}, expected a code pointer", show_ty(t)))
    })?;
    if !ct.delta.is_empty() {
        return Err(seq_err(
            rule,
            shown,
            format!(
                "target must be fully instantiated, but still binds [{}]",
                ct.delta.iter().map(|v| v.name.as_str()).collect::<Vec<_>>().join(", ")
            ),
        ));
    }
    if !alpha_equal(&ct.sigma, &ctx.sigma) {
        return Err(seq_err(
            rule,
            shown,
            format!(
                "target expects stack {}, current stack is {}",
                stack_str(&ct.sigma),
                stack_str(&ctx.sigma)
            ),
        ));
    }
    if !holes.unify_marker(ctx, ctx.q(), &ct.marker) {
        return Err(seq_err(
            rule,
            shown,
            format!(
                "target returns to {}, but the current return marker is {}",
                marker_str(&ct.marker),
                marker_str(ctx.q())
            ),
        ));
    }
    if !regfile_subtype(&ctx.chi, &ct.chi) {
        return Err(seq_err(
            rule,
            shown,
            format!(
                "registers {{{}}} do not provide the target's {{{}}}",
                regfile_str(&ctx.chi),
                regfile_str(&ct.chi)
            ),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Terminators

fn check_call(
    holes: &Holes,
    ctx: &TypingContext,
    u: &Small,
    sigma0: &Stack,
    q_ret: &Marker,
    shown: &str,
) -> TResult<()> {
    let err = |m: String| seq_err("call", shown, m);
    let t = check_small(ctx, u)?;
    let ct = t
        .as_code()
        .ok_or_else(|| err(format!("target has type {}, expected a code pointer", show_ty(&t))))?;
    let (zeta, eps) = match ct.delta.as_slice() {
        [a, b] if a.kind == Kind::Stack && b.kind == Kind::Marker => (a.clone(), b.clone()),
        [a, b] if a.kind == Kind::Marker && b.kind == Kind::Stack => (b.clone(), a.clone()),
        _ => {
            return Err(err(format!(
                "call target must abstract exactly a stack tail and a return marker, found {}",
                code_type_str(ct)
            )))
        }
    };
    wf(&ctx.delta, sigma0).map_err(err)?;
    let prefix = split_suffix(&ctx.sigma, sigma0).ok_or_else(|| {
        err(format!(
            "{} is not a tail of the current stack {}",
            stack_str(sigma0),
            stack_str(&ctx.sigma)
        ))
    })?;
    let c = prefix.len();
    if ct.sigma.tail != Tail::Var(zeta.name.clone()) {
        return Err(err(format!("target stack {} does not end in {}", stack_str(&ct.sigma), zeta.name)));
    }
    let ret = ret_addr_type(&ct.marker, &ct.chi, &ct.sigma).ok_or_else(|| {
        err(format!("target has no return continuation at {}", marker_str(&ct.marker)))
    })?;
    if ret.marker != Marker::Var(eps.name.clone()) {
        return Err(err(format!(
            "the target's continuation must return to {}, not {}",
            eps.name,
            marker_str(&ret.marker)
        )));
    }
    if ret.sigma.tail != Tail::Var(zeta.name.clone()) {
        return Err(err(format!(
            "the target's continuation stack {} does not end in {}",
            stack_str(&ret.sigma),
            zeta.name
        )));
    }
    let k = ret.sigma.prefix.len();
    let (_, tau) = ret.chi.iter().next().expect("continuation has one register");

    // Parts of the callee's interface that must not mention its binders.
    let mut rest = ct.chi.clone();
    if let Marker::Reg(r) = &ct.marker {
        rest.0.remove(r);
    }
    let binders: BTreeSet<TyVar> = [zeta.clone(), eps.clone()].into();
    let outer: Vec<TyVar> = ctx.delta.iter().filter(|v| !binders.contains(v)).cloned().collect();
    for (what, fv) in [
        ("argument registers", free_vars(&rest)),
        ("return type", free_vars(tau)),
    ] {
        if let Some(v) = fv.iter().find(|v| binders.contains(v) || !(outer.contains(v) || is_hole_name(&v.name))) {
            return Err(err(format!("{what} of the target mention {}", v.name)));
        }
    }

    let expected = match ctx.q() {
        Marker::Halt(..) => {
            if !holes.unify_marker(ctx, ctx.q(), q_ret) {
                return Err(err(format!(
                    "return marker {} differs from the current halting marker {}",
                    marker_str(q_ret),
                    marker_str(ctx.q())
                )));
            }
            q_ret.clone()
        }
        Marker::Index(i) => {
            if *i < c {
                return Err(err(format!(
                    "the return continuation at slot {i} lies in the {c}-slot prefix passed to the callee"
                )));
            }
            let want = Marker::Index(i + k - c);
            if *q_ret != want {
                return Err(err(format!(
                    "the continuation will sit at slot {}, but the call names {}",
                    i + k - c,
                    marker_str(q_ret)
                )));
            }
            want
        }
        other => {
            return Err(err(format!(
                "call needs the current continuation on the stack or a halting marker, found {}",
                marker_str(other)
            )))
        }
    };

    let mut s = Subst::new();
    s.bind(&zeta, Omega::Stack(sigma0.clone()))?;
    s.bind(&eps, Omega::Marker(expected))?;
    let body = CodeType {
        delta: vec![],
        ..ct.clone()
    };
    let inst = apply_subst(&body, &s);
    wf(&ctx.delta, &inst).map_err(err)?;
    if !alpha_equal(&inst.sigma, &ctx.sigma) {
        return Err(err(format!(
            "target expects stack {}, current stack is {}",
            stack_str(&inst.sigma),
            stack_str(&ctx.sigma)
        )));
    }
    if !regfile_subtype(&ctx.chi, &inst.chi) {
        return Err(err(format!(
            "registers {{{}}} do not provide the target's {{{}}}",
            regfile_str(&ctx.chi),
            regfile_str(&inst.chi)
        )));
    }
    Ok(())
}

fn check_halt(holes: &Holes, ctx: &TypingContext, t: &Type, s: &Stack, r: Reg, shown: &str) -> TResult<()> {
    let rule = "halt";
    if !matches!(ctx.q(), Marker::Halt(..)) {
        return Err(seq_err(
            rule,
            shown,
            format!("halting requires a halting marker, but the marker is {}", marker_str(ctx.q())),
        ));
    }
    wf_type(&ctx.delta, t).map_err(|m| seq_err(rule, shown, m))?;
    wf(&ctx.delta, s).map_err(|m| seq_err(rule, shown, m))?;
    let have = reg_type(ctx, r, shown)?;
    if !alpha_equal(have, t) {
        return Err(seq_err(
            rule,
            shown,
            format!("{r} has type {}, halting at {}", show_ty(have), show_ty(t)),
        ));
    }
    if !alpha_equal(&ctx.sigma, s) {
        return Err(seq_err(
            rule,
            shown,
            format!("stack is {}, halting at {}", stack_str(&ctx.sigma), stack_str(s)),
        ));
    }
    if !holes.unify_marker(ctx, ctx.q(), &Marker::halt(t.clone(), s.clone())) {
        return Err(seq_err(
            rule,
            shown,
            format!("halting at ret({}, {}) but the marker is {}", show_ty(t), stack_str(s), marker_str(ctx.q())),
        ));
    }
    Ok(())
}

fn check_term(holes: &Holes, ctx: &TypingContext, term: &Terminator) -> TResult<()> {
    let shown = terminator_str(term);
    let shown = shown.as_str();
    wf_return_marker(&ctx.delta, &ctx.delta, &ctx.chi, &ctx.sigma, ctx.q())
        .map_err(|e| TypeError { construct: shown.to_string(), ..e })?;
    match term {
        Terminator::Jmp(u) => {
            let t = check_small(ctx, u)?;
            check_branch_target(holes, ctx, &t, shown, "jmp")
        }
        Terminator::Call(u, s0, q_ret) => check_call(holes, ctx, u, s0, q_ret, shown),
        Terminator::Ret(r, r2) => {
            if *ctx.q() != Marker::Reg(*r) {
                return Err(seq_err(
                    "ret",
                    shown,
                    format!(
                        "the return continuation must be in register {r}, but the marker is {}",
                        marker_str(ctx.q())
                    ),
                ));
            }
            let t = reg_type(ctx, *r, shown)?;
            let ct = continuation(t).ok_or_else(|| {
                seq_err("ret", shown, format!("{r} has type {}, not a continuation", show_ty(t)))
            })?;
            let (want_reg, want_ty) = ct.chi.iter().next().expect("one register");
            if want_reg != r2 {
                return Err(seq_err(
                    "ret",
                    shown,
                    format!("the continuation expects its result in {want_reg}, not {r2}"),
                ));
            }
            let have = reg_type(ctx, *r2, shown)?;
            if !alpha_equal(have, want_ty) {
                return Err(seq_err(
                    "ret",
                    shown,
                    format!("{r2} has type {}, the continuation expects {}", show_ty(have), show_ty(want_ty)),
                ));
            }
            if !alpha_equal(&ctx.sigma, &ct.sigma) {
                return Err(seq_err(
                    "ret",
                    shown,
                    format!(
                        "stack is {}, the continuation expects {}",
                        stack_str(&ctx.sigma),
                        stack_str(&ct.sigma)
                    ),
                ));
            }
            Ok(())
        }
        Terminator::RetHalt(t, s, r) | Terminator::Halt(t, s, r) => check_halt(holes, ctx, t, s, *r, shown),
    }
}

// ---------------------------------------------------------------------------
// Sequences, heaps, components

pub(super) fn check_seq(holes: &Holes, mut ctx: TypingContext, seq: Seq) -> TResult<()> {
    let Seq { mut instrs, mut term } = seq;
    let mut k = 0;
    while k < instrs.len() {
        let (post, renaming) = check_instr(holes, &ctx, &instrs[k])?;
        if let Instr::Protect(phi, _) = &instrs[k] {
            let hidden = ctx.sigma.drop_top(phi.len()).expect("protect checked the prefix");
            if let Tail::Var(z) = &post.sigma.tail {
                ctx.aliases.push((z.clone(), hidden));
            }
        }
        if let Some((old, new)) = renaming {
            let omega = match new.kind {
                Kind::Type => Omega::Type(Type::Var(new.name.clone())),
                _ => Omega::Stack(Stack::var(new.name.clone())),
            };
            let rest = Seq::new(instrs.split_off(k + 1), term);
            let rest = substitute(&rest, &old, omega)?;
            instrs.extend(rest.instrs);
            term = rest.term;
        }
        ctx.delta = post.delta;
        ctx.chi = post.chi;
        ctx.sigma = post.sigma;
        ctx.marker = Some(post.marker);
        k += 1;
    }
    check_term(holes, &ctx, &term)
}

fn word_locs(w: &Word, out: &mut Vec<Name>) {
    match w {
        Word::Loc(l) => out.push(l.clone()),
        Word::Pack(_, w, _) | Word::Fold(_, w) | Word::Inst(w, _) => word_locs(w, out),
        Word::Unit | Word::Int(_) => {}
    }
}

/// `Ψ ⊢ H : Ψ'`: code blocks are checked under their own annotations with
/// the whole fragment in scope; tuple types are read off their words.
pub fn check_heap_fragment(psi: &HeapTyping, heap: &[(Name, HeapValue)]) -> TResult<HeapTyping> {
    check_heap(&Holes::new(), psi, heap)
}

fn check_heap(holes: &Holes, psi: &HeapTyping, heap: &[(Name, HeapValue)]) -> TResult<HeapTyping> {
    let heap_err = |l: &str, m: String| TypeError::new(ErrorCode::Heap, "heap", l.to_string(), m);
    let mut full = psi.clone();
    let mut frag = HeapTyping::new();
    for (l, h) in heap {
        if full.contains_key(l) || frag.contains_key(l) {
            return Err(heap_err(l, format!("label {l} is already bound")));
        }
        if let HeapValue::Code(b) = h {
            let t = Type::code(b.ty.clone());
            wf_type(&[], &t).map_err(|m| heap_err(l, m))?;
            frag.insert(l.clone(), (Mutability::Box, HeapType::Code(b.ty.clone())));
        }
    }
    full.extend(frag.clone());

    let mut pending: Vec<(&Name, Mutability, &Vec<Word>)> = heap
        .iter()
        .filter_map(|(l, h)| match h {
            HeapValue::Tuple(m, ws) => Some((l, *m, ws)),
            HeapValue::Code(_) => None,
        })
        .collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut waiting = Vec::new();
        for (l, m, ws) in pending {
            let mut locs = Vec::new();
            ws.iter().for_each(|w| word_locs(w, &mut locs));
            let blocked = locs
                .iter()
                .any(|x| !full.contains_key(x) && heap.iter().any(|(y, _)| y == x));
            if blocked {
                waiting.push((l, m, ws));
                continue;
            }
            let ctx = TypingContext {
                psi: full.clone(),
                ..Default::default()
            };
            let ts = ws
                .iter()
                .map(|w| check_word(&ctx, w))
                .collect::<TResult<Vec<_>>>()
                .map_err(|e| e.within(format!("heap tuple {l}")))?;
            full.insert(l.clone(), (m, HeapType::Tuple(ts.clone())));
            frag.insert(l.clone(), (m, HeapType::Tuple(ts)));
        }
        if waiting.len() == before {
            return Err(heap_err(waiting[0].0, "heap tuples refer to each other cyclically".into()));
        }
        pending = waiting;
    }

    for (l, h) in heap {
        if let HeapValue::Code(b) = h {
            let ctx = TypingContext {
                psi: full.clone(),
                delta: b.ty.delta.clone(),
                gamma: vec![],
                chi: b.ty.chi.clone(),
                sigma: b.ty.sigma.clone(),
                marker: Some(b.ty.marker.clone()),
                aliases: vec![],
            };
            wf_return_marker(&[], &ctx.delta, &ctx.chi, &ctx.sigma, ctx.q())
                .and_then(|_| check_seq(holes, ctx, b.body.clone()))
                .map_err(|e| e.within(format!("heap block {l}")))?;
        }
    }
    Ok(frag)
}

pub(super) fn check_component(holes: &Holes, ctx: &TypingContext, c: &Component) -> TResult<(Type, Stack)> {
    if let Some((l, _)) = ctx.psi.iter().find(|(_, (m, _))| *m == Mutability::Ref) {
        return Err(TypeError::new(
            ErrorCode::Component,
            "component",
            l.clone(),
            format!("a component cannot be checked against a heap holding the mutable tuple {l}"),
        ));
    }
    let frag = check_heap(holes, &ctx.psi, &c.heap)?;
    let mut inner = ctx.clone();
    inner.psi.extend(frag);
    inner.aliases.clear();
    check_seq(holes, inner, c.seq.clone())?;
    let q = ctx.q();
    let (t, s) = typeof_marker(q, &ctx.chi, &ctx.sigma).ok_or_else(|| {
        TypeError::new(
            ErrorCode::Component,
            "component",
            marker_str(q),
            format!("no result type at marker {}", marker_str(q)),
        )
    })?;
    match (holes.resolve_type(&t), holes.resolve_stack(&s)) {
        (Some(t), Some(s)) => Ok((t, s)),
        _ => Err(TypeError::new(
            ErrorCode::Component,
            "component",
            "",
            "the component never halts, so its out-stack cannot be determined",
        )),
    }
}
