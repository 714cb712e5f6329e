//! Type translation and value translation across the F/T boundary.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::machine::Memory;
use crate::syntax::*;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BoundaryError {
    #[error("value {value} does not have boundary type {ty}")]
    Mismatch { ty: String, value: String },
    #[error("dangling location {0}")]
    Dangling(Name),
    #[error("{0}")]
    NotFType(String),
}

fn mismatch(ty: &Type, value: String) -> BoundaryError {
    BoundaryError::Mismatch {
        ty: type_str(ty),
        value,
    }
}

fn pick(base: TyVar, avoid: &BTreeSet<TyVar>) -> TyVar {
    if avoid.contains(&base) {
        fresh_var(&base, avoid)
    } else {
        base
    }
}

/// Map an F type to the T type of its values once they cross into T.
pub fn translate_type(t: &Type) -> Result<Type, String> {
    match t {
        Type::Var(_) | Type::Unit | Type::Int => Ok(t.clone()),
        Type::Mu(a, body) => Ok(Type::Mu(a.clone(), Box::new(translate_type(body)?))),
        Type::Tuple(ts) => Ok(Type::box_tuple(ts.iter().map(translate_type).collect::<Result<_, _>>()?)),
        Type::Arrow(a) => {
            let params = a.params.iter().map(translate_type).collect::<Result<Vec<_>, _>>()?;
            let result = translate_type(&a.result)?;
            let mut avoid = BTreeSet::new();
            for x in params.iter().chain([&result]).chain(&a.phi_in).chain(&a.phi_out) {
                avoid.extend(free_vars(x));
            }
            let z = pick(TyVar::stack("z"), &avoid);
            let e = pick(TyVar::marker("e"), &avoid);
            Ok(wrapper_code_type(&params, &a.phi_in, &a.phi_out, result, &z, &e))
        }
        Type::Exists(..) | Type::Ref(_) | Type::Box(_) => {
            Err(format!("{} is not an F type", type_str(t)))
        }
    }
}

/// `box ∀[z,e]{ra: box ∀[]{r1: res; φo::z} e; pn::…::p1::φi::z} ra`
fn wrapper_code_type(
    params: &[Type],
    phi_in: &[Type],
    phi_out: &[Type],
    result: Type,
    z: &TyVar,
    e: &TyVar,
) -> Type {
    let tail = Tail::Var(z.name.clone());
    let cont = continuation_type(result, Stack::new(phi_out.to_vec(), tail.clone()), Marker::Var(e.name.clone()));
    let mut prefix: Vec<Type> = params.iter().rev().cloned().collect();
    prefix.extend(phi_in.iter().cloned());
    Type::code(CodeType {
        delta: vec![z.clone(), e.clone()],
        chi: RegFile::single(Reg::Ra, cont),
        sigma: Stack::new(prefix, tail),
        marker: Marker::Reg(Reg::Ra),
    })
}

fn continuation_type(result: Type, sigma: Stack, marker: Marker) -> Type {
    Type::code(CodeType {
        delta: vec![],
        chi: RegFile::single(Reg::R1, result),
        sigma,
        marker,
    })
}

fn unroll(t: &Type) -> Result<Type, BoundaryError> {
    let Type::Mu(a, body) = t else {
        unreachable!("unroll on a non-recursive type")
    };
    substitute(body.as_ref(), &TyVar::ty(a.clone()), Omega::Type(t.clone()))
        .map_err(|e| BoundaryError::NotFType(e.to_string()))
}

/// Translate an F value of type `ty` into a T word, allocating in `mem`.
pub fn export_value(ty: &Type, v: &Expr, mem: &mut Memory) -> Result<Word, BoundaryError> {
    match (ty, v) {
        (Type::Unit, Expr::Unit) => Ok(Word::Unit),
        (Type::Int, Expr::Int(n)) => Ok(Word::Int(n.clone())),
        (Type::Mu(..), Expr::Fold(_, inner)) => {
            let w = export_value(&unroll(ty)?, inner, mem)?;
            let tt = translate_type(ty).map_err(BoundaryError::NotFType)?;
            Ok(Word::Fold(tt, Box::new(w)))
        }
        (Type::Tuple(ts), Expr::Tuple(vs)) if ts.len() == vs.len() => {
            let ws = ts
                .iter()
                .zip(vs)
                .map(|(t, v)| export_value(t, v, mem))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Word::Loc(mem.alloc("l", HeapValue::Tuple(Mutability::Box, ws))))
        }
        (Type::Arrow(a), Expr::Lam(l)) if a.params.len() == l.params.len() => {
            let block = export_wrapper(ty, a, v)?;
            Ok(Word::Loc(mem.alloc("wrap", HeapValue::Code(block))))
        }
        _ => Err(mismatch(ty, expr_str(v))),
    }
}

fn sld(r: Reg, i: usize) -> Instr {
    Instr::Sld(r, i)
}

fn sst(i: usize, r: Reg) -> Instr {
    Instr::Sst(i, r)
}

/// Code block that runs the F function `f` on arguments taken from the stack.
fn export_wrapper(ty: &Type, a: &Arrow, f: &Expr) -> Result<CodeBlock, BoundaryError> {
    let code = translate_type(ty).map_err(BoundaryError::NotFType)?;
    let ct = code.as_code().expect("arrows translate to code").clone();
    let z = ct.delta[0].name.clone();
    let n = a.params.len();
    let m = a.phi_in.len();
    let k = a.phi_out.len();
    let cont = ct.chi.get(Reg::Ra).expect("continuation register").clone();
    let mut instrs = Vec::new();

    // Argument i (1-based) sits at `slot(i)` while the body runs, under a
    // stack typing of `during`.
    let (slot, during): (Box<dyn Fn(usize) -> usize>, Stack) = if m == 0 && k == 0 {
        instrs.push(Instr::Salloc(1));
        instrs.push(sst(0, Reg::Ra));
        (Box::new(move |i| n + 1 - i), ct.sigma.push(cont.clone()))
    } else {
        // Rearrange `args :: φi :: z` into `φi :: args :: cont :: z`.
        instrs.push(Instr::Salloc(1));
        for s in 0..n + m {
            instrs.push(sld(Reg::R2, s + 1));
            instrs.push(sst(s, Reg::R2));
        }
        instrs.push(sst(n + m, Reg::Ra));
        for _ in 0..m {
            instrs.push(sld(Reg::R2, n + m - 1));
            for s in (1..n + m).rev() {
                instrs.push(sld(Reg::R3, s - 1));
                instrs.push(sst(s, Reg::R3));
            }
            instrs.push(sst(0, Reg::R2));
        }
        let mut prefix = a.phi_in.clone();
        prefix.extend(ct.sigma.prefix[..n].iter().cloned());
        prefix.push(cont.clone());
        (Box::new(move |i| m + n - i), Stack::new(prefix, Tail::Var(z.clone())))
    };

    let args = a
        .params
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let tp = translate_type(p).map_err(BoundaryError::NotFType)?;
            let comp = Component {
                seq: Seq::new(vec![sld(Reg::R1, slot(j + 1))], Terminator::Halt(tp, during.clone(), Reg::R1)),
                heap: vec![],
            };
            Ok(Expr::Boundary(p.clone(), Box::new(comp)))
        })
        .collect::<Result<Vec<_>, BoundaryError>>()?;

    let protected = if m == 0 && k == 0 {
        Stack::var(z.clone())
    } else {
        during.drop_top(m + n).expect("prefix present")
    };
    instrs.push(Instr::Import(Import {
        rd: Reg::R1,
        sigma: protected,
        zeta: None,
        ty: (*a.result).clone(),
        body: Box::new(Expr::app(f.clone(), args)),
    }));
    if m == 0 && k == 0 {
        instrs.push(sld(Reg::Ra, 0));
        instrs.push(Instr::Sfree(n + 1));
    } else {
        instrs.push(sld(Reg::Ra, k + n));
        for j in (0..k).rev() {
            instrs.push(sld(Reg::R2, j));
            instrs.push(sst(j + n + 1, Reg::R2));
        }
        instrs.push(Instr::Sfree(n + 1));
    }
    Ok(CodeBlock {
        ty: ct,
        body: Seq::new(instrs, Terminator::Ret(Reg::Ra, Reg::R1)),
    })
}

/// Translate a T word into an F value of type `ty`. Functions become F
/// lambdas that call back into T through a freshly allocated return block.
pub fn import_value(ty: &Type, w: &Word, mem: &mut Memory) -> Result<Expr, BoundaryError> {
    match (ty, w) {
        (Type::Unit, Word::Unit) => Ok(Expr::Unit),
        (Type::Int, Word::Int(n)) => Ok(Expr::Int(n.clone())),
        (Type::Mu(..), Word::Fold(_, inner)) => {
            let v = import_value(&unroll(ty)?, inner, mem)?;
            Ok(Expr::Fold(ty.clone(), Box::new(v)))
        }
        (Type::Tuple(ts), Word::Loc(l)) => {
            let ws = match mem.heap_value(l) {
                Some(HeapValue::Tuple(Mutability::Box, ws)) if ws.len() == ts.len() => ws.clone(),
                Some(_) => return Err(mismatch(ty, word_str(w))),
                None => return Err(BoundaryError::Dangling(l.clone())),
            };
            let vs = ts
                .iter()
                .zip(&ws)
                .map(|(t, w)| import_value(t, w, mem))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Expr::Tuple(vs))
        }
        (Type::Arrow(a), _) => match w.head_and_instantiations().0 {
            Word::Loc(l) if matches!(mem.heap_value(l), Some(HeapValue::Code(_))) => {
                Ok(import_wrapper(ty, a, w, mem))
            }
            Word::Loc(l) if mem.heap_value(l).is_none() => Err(BoundaryError::Dangling(l.clone())),
            _ => Err(mismatch(ty, word_str(w))),
        },
        _ => Err(mismatch(ty, word_str(w))),
    }
}

fn import_wrapper(ty: &Type, a: &Arrow, w: &Word, mem: &mut Memory) -> Expr {
    let z = pick(TyVar::stack("z"), &free_vars(ty)).name;
    let tail = Stack::var(z.clone());
    let result = translate_type(&a.result).expect("F arrow");
    let out = tail.push_prefix(&a.phi_out);
    let ret_marker = Marker::halt(result.clone(), out.clone());
    let end = CodeBlock {
        ty: CodeType {
            delta: vec![TyVar::stack(z.clone())],
            chi: RegFile::single(Reg::R1, result.clone()),
            sigma: out.clone(),
            marker: ret_marker.clone(),
        },
        body: Seq::new(vec![], Terminator::Halt(result, out, Reg::R1)),
    };
    let end_label = mem.alloc("end", HeapValue::Code(end));

    let params: Vec<(Name, Type)> = a
        .params
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("x{}", i + 1), t.clone()))
        .collect();
    let mut instrs = vec![Instr::Protect(a.phi_in.clone(), z.clone())];
    for (x, t) in &params {
        instrs.push(Instr::Import(Import {
            rd: Reg::R1,
            sigma: tail.clone(),
            zeta: None,
            ty: t.clone(),
            body: Box::new(Expr::Var(x.clone())),
        }));
        instrs.push(Instr::Salloc(1));
        instrs.push(sst(0, Reg::R1));
    }
    instrs.push(Instr::Mv(
        Reg::Ra,
        Small::Word(Word::loc(end_label).inst([Omega::Stack(tail.clone())])),
    ));
    let call = Terminator::Call(Small::Word(w.clone()), tail, ret_marker);
    let body = Expr::Boundary(
        (*a.result).clone(),
        Box::new(Component {
            seq: Seq::new(instrs, call),
            heap: vec![],
        }),
    );
    Expr::Lam(Lambda {
        phi_in: a.phi_in.clone(),
        phi_out: a.phi_out.clone(),
        params,
        body: Box::new(body),
    })
}
