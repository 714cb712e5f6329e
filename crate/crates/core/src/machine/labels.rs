//! Heap label renaming, used when a component's local heap is merged into
//! the global heap. Nested components bind their own labels.

use std::collections::BTreeMap;

use crate::syntax::*;

pub type LabelMap = BTreeMap<Name, Name>;

pub fn word(w: &Word, m: &LabelMap) -> Word {
    match w {
        Word::Loc(l) => Word::Loc(m.get(l).cloned().unwrap_or_else(|| l.clone())),
        Word::Pack(t, inner, ann) => Word::Pack(t.clone(), Box::new(word(inner, m)), ann.clone()),
        Word::Fold(t, inner) => Word::Fold(t.clone(), Box::new(word(inner, m))),
        Word::Inst(inner, o) => Word::Inst(Box::new(word(inner, m)), o.clone()),
        Word::Unit | Word::Int(_) => w.clone(),
    }
}

pub fn small(u: &Small, m: &LabelMap) -> Small {
    match u {
        Small::Word(w) => Small::Word(word(w, m)),
        Small::Reg(_) => u.clone(),
        Small::Pack(t, inner, ann) => Small::Pack(t.clone(), Box::new(small(inner, m)), ann.clone()),
        Small::Fold(t, inner) => Small::Fold(t.clone(), Box::new(small(inner, m))),
        Small::Inst(inner, o) => Small::Inst(Box::new(small(inner, m)), o.clone()),
    }
}

fn instr(i: &Instr, m: &LabelMap) -> Instr {
    match i {
        Instr::Aop(p, rd, rs, u) => Instr::Aop(*p, *rd, *rs, small(u, m)),
        Instr::Bnz(r, u) => Instr::Bnz(*r, small(u, m)),
        Instr::Mv(r, u) => Instr::Mv(*r, small(u, m)),
        Instr::Unpack(a, r, u) => Instr::Unpack(a.clone(), *r, small(u, m)),
        Instr::Unfold(r, u) => Instr::Unfold(*r, small(u, m)),
        Instr::Import(im) => Instr::Import(Import {
            body: Box::new(expr(&im.body, m)),
            ..im.clone()
        }),
        _ => i.clone(),
    }
}

pub fn seq(s: &Seq, m: &LabelMap) -> Seq {
    let term = match &s.term {
        Terminator::Jmp(u) => Terminator::Jmp(small(u, m)),
        Terminator::Call(u, sigma, q) => Terminator::Call(small(u, m), sigma.clone(), q.clone()),
        t => t.clone(),
    };
    Seq::new(s.instrs.iter().map(|i| instr(i, m)).collect(), term)
}

pub fn heap_value(h: &HeapValue, m: &LabelMap) -> HeapValue {
    match h {
        HeapValue::Code(b) => HeapValue::Code(CodeBlock {
            ty: b.ty.clone(),
            body: seq(&b.body, m),
        }),
        HeapValue::Tuple(mu, ws) => HeapValue::Tuple(*mu, ws.iter().map(|w| word(w, m)).collect()),
    }
}

pub fn component(c: &Component, m: &LabelMap) -> Component {
    let mut inner = m.clone();
    for (l, _) in &c.heap {
        inner.remove(l);
    }
    Component {
        seq: seq(&c.seq, &inner),
        heap: c
            .heap
            .iter()
            .map(|(l, h)| (l.clone(), heap_value(h, &inner)))
            .collect(),
    }
}

pub fn expr(e: &Expr, m: &LabelMap) -> Expr {
    if m.is_empty() {
        return e.clone();
    }
    let b = |x: &Expr| Box::new(expr(x, m));
    match e {
        Expr::Var(_) | Expr::Unit | Expr::Int(_) => e.clone(),
        Expr::Binop(p, x, y) => Expr::Binop(*p, b(x), b(y)),
        Expr::If0(x, y, z) => Expr::If0(b(x), b(y), b(z)),
        Expr::Lam(l) => Expr::Lam(Lambda {
            body: b(&l.body),
            ..l.clone()
        }),
        Expr::App(f, args) => Expr::App(b(f), args.iter().map(|a| expr(a, m)).collect()),
        Expr::Fold(t, x) => Expr::Fold(t.clone(), b(x)),
        Expr::Unfold(x) => Expr::Unfold(b(x)),
        Expr::Tuple(xs) => Expr::Tuple(xs.iter().map(|x| expr(x, m)).collect()),
        Expr::Proj(i, x) => Expr::Proj(*i, b(x)),
        Expr::Boundary(t, c) => Expr::Boundary(t.clone(), Box::new(component(c, m))),
    }
}
