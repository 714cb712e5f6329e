use super::*;
use crate::boundary::translate_type;

fn expr_err(rule: &str, e: &Expr, msg: impl Into<String>) -> TypeError {
    let mut shown = expr_str(e);
    if shown.len() > 120 {
        let cut = (0..=117).rev().find(|&i| shown.is_char_boundary(i)).unwrap_or(0);
        shown.truncate(cut);
        shown.push_str("...");
    }
    TypeError::new(ErrorCode::Expr, rule, shown, msg)
}

/// F types may not use T-only constructors outside of stack prefixes.
fn wf_ftype(delta: &[TyVar], bound: &mut Vec<Name>, t: &Type) -> Result<(), String> {
    match t {
        Type::Var(a) => {
            if bound.contains(a) || delta.contains(&TyVar::ty(a.clone())) {
                Ok(())
            } else {
                Err(format!("unbound type variable {a}"))
            }
        }
        Type::Unit | Type::Int => Ok(()),
        Type::Mu(a, body) => {
            bound.push(a.clone());
            let r = wf_ftype(delta, bound, body);
            bound.pop();
            r
        }
        Type::Tuple(ts) => ts.iter().try_for_each(|t| wf_ftype(delta, bound, t)),
        Type::Arrow(a) => {
            a.params.iter().try_for_each(|t| wf_ftype(delta, bound, t))?;
            wf_ftype(delta, bound, &a.result)?;
            let mut scope = delta.to_vec();
            scope.extend(bound.iter().map(|n| TyVar::ty(n.clone())));
            a.phi_in
                .iter()
                .chain(&a.phi_out)
                .try_for_each(|t| wf_type(&scope, t))
        }
        Type::Exists(..) | Type::Ref(_) | Type::Box(_) => {
            Err(format!("{} is a T type, not an F type", type_str(t)))
        }
    }
}

pub(super) fn check_ftype(delta: &[TyVar], t: &Type) -> Result<(), String> {
    wf_ftype(delta, &mut Vec::new(), t)
}

fn with_stack(ctx: &TypingContext, sigma: Stack) -> TypingContext {
    TypingContext {
        sigma,
        ..ctx.clone()
    }
}

fn expect(e: &Expr, got: &Type, want: &Type, what: &str) -> TResult<()> {
    if alpha_equal(got, want) {
        Ok(())
    } else {
        Err(expr_err(
            what,
            e,
            format!("has type {}, expected {}", type_str(got), type_str(want)),
        ))
    }
}

pub(super) fn check_expr(holes: &Holes, ctx: &TypingContext, e: &Expr) -> TResult<(Type, Stack)> {
    let sigma = ctx.sigma.clone();
    match e {
        Expr::Var(x) => match ctx.lookup(x) {
            Some(t) => Ok((t.clone(), sigma)),
            None => Err(expr_err("var", e, format!("unbound variable {x}"))),
        },
        Expr::Unit => Ok((Type::Unit, sigma)),
        Expr::Int(_) => Ok((Type::Int, sigma)),
        Expr::Binop(_, a, b) => {
            let (ta, s1) = check_expr(holes, ctx, a)?;
            expect(a, &ta, &Type::Int, "binop")?;
            let (tb, s2) = check_expr(holes, &with_stack(ctx, s1), b)?;
            expect(b, &tb, &Type::Int, "binop")?;
            Ok((Type::Int, s2))
        }
        Expr::If0(c, t, f) => {
            let (tc, s1) = check_expr(holes, ctx, c)?;
            expect(c, &tc, &Type::Int, "if0")?;
            let inner = with_stack(ctx, s1);
            let (tt, st) = check_expr(holes, &inner, t)?;
            let (tf, sf) = check_expr(holes, &inner, f)?;
            if !alpha_equal(&tt, &tf) {
                return Err(expr_err(
                    "if0",
                    e,
                    format!("branches have types {} and {}", type_str(&tt), type_str(&tf)),
                ));
            }
            if !alpha_equal(&st, &sf) {
                return Err(expr_err(
                    "if0",
                    e,
                    format!("branches leave stacks {} and {}", stack_str(&st), stack_str(&sf)),
                ));
            }
            Ok((tt, st))
        }
        Expr::Lam(l) => {
            for (x, t) in &l.params {
                check_ftype(&ctx.delta, t).map_err(|m| expr_err("lam", e, format!("parameter {x}: {m}")))?;
            }
            for t in l.phi_in.iter().chain(&l.phi_out) {
                wf_type(&ctx.delta, t).map_err(|m| expr_err("lam", e, m))?;
            }
            let zeta = fresh_in(TyVar::stack("z"), &ctx.delta);
            let mut inner = ctx.clone();
            inner.delta.push(zeta.clone());
            inner.gamma.extend(l.params.iter().cloned());
            inner.sigma = Stack::new(l.phi_in.clone(), Tail::Var(zeta.name.clone()));
            inner.marker = Some(Marker::Out);
            let (t, out) = check_expr(holes, &inner, &l.body)?;
            let want = Stack::new(l.phi_out.clone(), Tail::Var(zeta.name.clone()));
            if !alpha_equal(&out, &want) {
                return Err(expr_err(
                    "lam",
                    e,
                    format!(
                        "body leaves stack {}, but the function promises {}",
                        stack_str(&out),
                        stack_str(&want)
                    ),
                ));
            }
            if free_vars(&t).contains(&zeta) {
                return Err(expr_err("lam", e, "result type mentions the abstract stack tail"));
            }
            let params = l.params.iter().map(|(_, t)| t.clone()).collect();
            Ok((Type::stack_arrow(params, l.phi_in.clone(), l.phi_out.clone(), t), sigma))
        }
        Expr::App(f, args) => {
            let (tf, mut s) = check_expr(holes, ctx, f)?;
            let Type::Arrow(arrow) = &tf else {
                return Err(expr_err("app", f, format!("has type {}, not a function", type_str(&tf))));
            };
            if arrow.params.len() != args.len() {
                return Err(expr_err(
                    "app",
                    e,
                    format!("function takes {} arguments, given {}", arrow.params.len(), args.len()),
                ));
            }
            for (a, want) in args.iter().zip(&arrow.params) {
                let (ta, s2) = check_expr(holes, &with_stack(ctx, s), a)?;
                expect(a, &ta, want, "app")?;
                s = s2;
            }
            let n = arrow.phi_in.len();
            if s.depth() < n || !types_equal(&s.prefix[..n], &arrow.phi_in) {
                return Err(expr_err(
                    "app",
                    e,
                    format!(
                        "function needs the stack to start with {}, but it is {}",
                        phi_str(&arrow.phi_in),
                        stack_str(&s)
                    ),
                ));
            }
            let rest = s.drop_top(n).expect("checked depth");
            Ok(((*arrow.result).clone(), rest.push_prefix(&arrow.phi_out)))
        }
        Expr::Fold(ann, body) => {
            check_ftype(&ctx.delta, ann).map_err(|m| expr_err("fold", e, m))?;
            let Type::Mu(a, inner) = ann else {
                return Err(expr_err("fold", e, format!("{} is not a recursive type", type_str(ann))));
            };
            let want = substitute(inner.as_ref(), &TyVar::ty(a.clone()), Omega::Type(ann.clone()))?;
            let (t, s) = check_expr(holes, ctx, body)?;
            expect(body, &t, &want, "fold")?;
            Ok((ann.clone(), s))
        }
        Expr::Unfold(body) => {
            let (t, s) = check_expr(holes, ctx, body)?;
            let Type::Mu(a, inner) = &t else {
                return Err(expr_err("unfold", body, format!("has type {}, not a recursive type", type_str(&t))));
            };
            let opened = substitute(inner.as_ref(), &TyVar::ty(a.clone()), Omega::Type(t.clone()))?;
            Ok((opened, s))
        }
        Expr::Tuple(es) => {
            let mut s = sigma;
            let mut ts = Vec::with_capacity(es.len());
            for x in es {
                let (t, s2) = check_expr(holes, &with_stack(ctx, s), x)?;
                ts.push(t);
                s = s2;
            }
            Ok((Type::Tuple(ts), s))
        }
        Expr::Proj(i, body) => {
            let (t, s) = check_expr(holes, ctx, body)?;
            match &t {
                Type::Tuple(ts) if *i < ts.len() => Ok((ts[*i].clone(), s)),
                Type::Tuple(ts) => Err(expr_err(
                    "proj",
                    e,
                    format!("index {i} out of range for a {}-tuple", ts.len()),
                )),
                _ => Err(expr_err("proj", body, format!("has type {}, not a tuple", type_str(&t)))),
            }
        }
        Expr::Boundary(t, comp) => {
            check_ftype(&ctx.delta, t).map_err(|m| expr_err("boundary", e, m))?;
            let tt = translate_type(t).map_err(|m| expr_err("boundary", e, m))?;
            let hole = holes.fresh_stack();
            let mut inner = ctx.clone();
            inner.chi = RegFile::new();
            inner.marker = Some(Marker::halt(tt, hole));
            inner.aliases.clear();
            let (_, out) = tal::check_component(holes, &inner, comp)
                .map_err(|err| err.within(format!("boundary FT[{}]", type_str(t))))?;
            wf(&ctx.delta, &out).map_err(|m| expr_err("boundary", e, format!("out-stack {}: {m}", stack_str(&out))))?;
            Ok((t.clone(), out))
        }
    }
}
