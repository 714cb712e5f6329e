//! Printing in the concrete syntax accepted by `crate::parser`.

use std::fmt::{self, Display, Write};

use super::terms::*;
use super::types::*;

fn join<T>(xs: &[T], sep: &str, f: impl Fn(&T) -> String) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(sep)
}

pub fn type_str(t: &Type) -> String {
    match t {
        Type::Var(n) => n.clone(),
        Type::Unit => "unit".into(),
        Type::Int => "int".into(),
        Type::Exists(a, t) => format!("exists {a}. {}", type_str(t)),
        Type::Mu(a, t) => format!("mu {a}. {}", type_str(t)),
        Type::Ref(ts) => format!("ref <{}>", join(ts, ", ", type_str)),
        Type::Box(h) => format!("box {}", heap_type_str(h)),
        Type::Tuple(ts) => format!("<{}>", join(ts, ", ", type_str)),
        Type::Arrow(a) => {
            let mut s = format!("({})", join(&a.params, ", ", type_str));
            if !a.is_plain() {
                let _ = write!(s, "[{} => {}]", phi_str(&a.phi_in), phi_str(&a.phi_out));
            }
            let _ = write!(s, " -> {}", type_str(&a.result));
            s
        }
    }
}

pub fn heap_type_str(h: &HeapType) -> String {
    match h {
        HeapType::Code(c) => code_type_str(c),
        HeapType::Tuple(ts) => format!("<{}>", join(ts, ", ", type_str)),
    }
}

pub fn code_type_str(c: &CodeType) -> String {
    format!(
        "code[{}]{{{}; {}}} {}",
        join(&c.delta, ", ", |v| v.name.clone()),
        regfile_str(&c.chi),
        stack_str(&c.sigma),
        marker_str(&c.marker)
    )
}

pub fn regfile_str(chi: &RegFile) -> String {
    chi.iter()
        .map(|(r, t)| format!("{r}: {}", type_str(t)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn stack_str(s: &Stack) -> String {
    let mut out = String::new();
    for t in &s.prefix {
        out.push_str(&type_str(t));
        out.push_str(" :: ");
    }
    match &s.tail {
        Tail::Empty => out.push('*'),
        Tail::Var(z) => out.push_str(z),
    }
    out
}

pub fn phi_str(phi: &[Type]) -> String {
    let mut out = String::new();
    for t in phi {
        out.push_str(&type_str(t));
        out.push_str(" :: ");
    }
    out.push('.');
    out
}

pub fn marker_str(q: &Marker) -> String {
    match q {
        Marker::Reg(r) => r.to_string(),
        Marker::Index(i) => i.to_string(),
        Marker::Var(e) => e.clone(),
        Marker::Halt(t, s) => format!("ret({}, {})", type_str(t), stack_str(s)),
        Marker::Out => "out".into(),
    }
}

pub fn omega_str(o: &Omega) -> String {
    match o {
        Omega::Type(t) => type_str(t),
        Omega::Stack(s) => stack_str(s),
        Omega::Marker(m) => marker_str(m),
    }
}

pub fn word_str(w: &Word) -> String {
    match w {
        Word::Unit => "()".into(),
        Word::Int(n) => n.to_string(),
        Word::Loc(l) => l.clone(),
        Word::Pack(t, w, e) => format!("pack <{}, {}> as {}", type_str(t), word_str(w), type_str(e)),
        Word::Fold(t, w) => format!("fold {} {}", type_str(t), word_str(w)),
        Word::Inst(w, o) => match w.as_ref() {
            Word::Pack(..) | Word::Fold(..) => format!("({})[{}]", word_str(w), omega_str(o)),
            _ => format!("{}[{}]", word_str(w), omega_str(o)),
        },
    }
}

pub fn small_str(u: &Small) -> String {
    match u {
        Small::Word(w) => word_str(w),
        Small::Reg(r) => r.to_string(),
        Small::Pack(t, u, e) => format!("pack <{}, {}> as {}", type_str(t), small_str(u), type_str(e)),
        Small::Fold(t, u) => format!("fold {} {}", type_str(t), small_str(u)),
        Small::Inst(u, o) => match u.as_ref() {
            Small::Pack(..) | Small::Fold(..) => format!("({})[{}]", small_str(u), omega_str(o)),
            _ => format!("{}[{}]", small_str(u), omega_str(o)),
        },
    }
}

/// Indentation-aware printer for terms.
struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn new() -> Self {
        Printer {
            out: String::new(),
            indent: 0,
        }
    }

    fn newline(&mut self) {
        self.out.push('\n');
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
    }

    fn s(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn instr(&mut self, i: &Instr) {
        match i {
            Instr::Aop(p, rd, rs, u) => {
                let txt = format!("{} {rd}, {rs}, {}", p.mnemonic(), small_str(u));
                self.s(&txt)
            }
            Instr::Bnz(r, u) => self.s(&format!("bnz {r}, {}", small_str(u))),
            Instr::Ld(rd, rs, i) => self.s(&format!("ld {rd}, {rs}[{i}]")),
            Instr::St(rd, i, rs) => self.s(&format!("st {rd}[{i}], {rs}")),
            Instr::Ralloc(rd, n) => self.s(&format!("ralloc {rd}, {n}")),
            Instr::Balloc(rd, n) => self.s(&format!("balloc {rd}, {n}")),
            Instr::Mv(rd, u) => self.s(&format!("mv {rd}, {}", small_str(u))),
            Instr::Salloc(n) => self.s(&format!("salloc {n}")),
            Instr::Sfree(n) => self.s(&format!("sfree {n}")),
            Instr::Sld(rd, i) => self.s(&format!("sld {rd}, {i}")),
            Instr::Sst(i, rs) => self.s(&format!("sst {i}, {rs}")),
            Instr::Unpack(a, rd, u) => self.s(&format!("unpack <{a}, {rd}> {}", small_str(u))),
            Instr::Unfold(rd, u) => self.s(&format!("unfold {rd}, {}", small_str(u))),
            Instr::Protect(phi, z) => self.s(&format!("protect {}, {z}", phi_str(phi))),
            Instr::Import(im) => {
                let head = match &im.zeta {
                    Some(z) => format!("import {}, {} as {z}, {} TF{{", im.rd, stack_str(&im.sigma), type_str(&im.ty)),
                    None => format!("import {}, {}, {} TF{{", im.rd, stack_str(&im.sigma), type_str(&im.ty)),
                };
                self.s(&head);
                self.s(" ");
                self.expr(&im.body, 0);
                self.s(" }");
            }
        }
    }

    fn term(&mut self, t: &Terminator) {
        let txt = match t {
            Terminator::Jmp(u) => format!("jmp {}", small_str(u)),
            Terminator::Call(u, s, q) => {
                format!("call {} {{{}, {}}}", small_str(u), stack_str(s), marker_str(q))
            }
            Terminator::Ret(r, r2) => format!("ret {r} {{{r2}}}"),
            Terminator::RetHalt(t, s, r) => {
                format!("ret ret({}, {}) {{{r}}}", type_str(t), stack_str(s))
            }
            Terminator::Halt(t, s, r) => format!("halt[{}, {}] {r}", type_str(t), stack_str(s)),
        };
        self.s(&txt);
    }

    fn seq(&mut self, s: &Seq) {
        for (k, i) in s.instrs.iter().enumerate() {
            if k > 0 {
                self.newline();
            }
            self.instr(i);
            self.s(";");
        }
        if !s.instrs.is_empty() {
            self.newline();
        }
        self.term(&s.term);
    }

    fn heap_value(&mut self, h: &HeapValue) {
        match h {
            HeapValue::Code(b) => {
                self.s(&code_type_str(&b.ty));
                self.s(".");
                self.indent += 1;
                self.newline();
                self.seq(&b.body);
                self.indent -= 1;
            }
            HeapValue::Tuple(m, ws) => {
                self.s(&format!("{} <{}>", m.keyword(), join(ws, ", ", word_str)));
            }
        }
    }

    fn component(&mut self, c: &Component) {
        self.s("(");
        self.indent += 1;
        self.seq(&c.seq);
        self.s(",");
        self.indent -= 1;
        self.newline();
        self.s("where");
        self.indent += 1;
        for (k, (l, h)) in c.heap.iter().enumerate() {
            if k > 0 {
                self.s(",");
            }
            self.newline();
            self.s(&format!("{l} -> "));
            self.heap_value(h);
        }
        self.indent -= 1;
        self.newline();
        self.s(")");
    }

    /// Precedence levels: 0 lambda, 1 sum, 2 product, 3 prefix forms, 4 application, 5 atom.
    fn expr(&mut self, e: &Expr, prec: u8) {
        let own = expr_prec(e);
        let paren = own < prec;
        if paren {
            self.s("(");
        }
        match e {
            Expr::Var(x) => self.s(x),
            Expr::Unit => self.s("()"),
            Expr::Int(n) => self.s(&n.to_string()),
            Expr::Binop(p, a, b) => {
                let lvl = if *p == Prim::Mul { 2 } else { 1 };
                self.expr(a, lvl);
                self.s(&format!(" {} ", p.symbol()));
                self.expr(b, lvl + 1);
            }
            Expr::If0(a, b, c) => {
                self.s("if0 ");
                self.expr(a, 5);
                self.s(" ");
                self.expr(b, 5);
                self.s(" ");
                self.expr(c, 5);
            }
            Expr::Lam(l) => {
                self.s("lam ");
                if !(l.phi_in.is_empty() && l.phi_out.is_empty()) {
                    self.s(&format!("[{} => {}] ", phi_str(&l.phi_in), phi_str(&l.phi_out)));
                }
                let ps = join(&l.params, ", ", |(x, t)| format!("{x}: {}", type_str(t)));
                self.s(&format!("({ps}). "));
                self.expr(&l.body, 0);
            }
            Expr::App(f, args) => {
                self.expr(f, 4);
                self.s("(");
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        self.s(", ");
                    }
                    self.expr(a, 0);
                }
                self.s(")");
            }
            Expr::Fold(t, x) => {
                self.s(&format!("fold {} ", type_str(t)));
                self.expr(x, 3);
            }
            Expr::Unfold(x) => {
                self.s("unfold ");
                self.expr(x, 4);
            }
            Expr::Proj(i, x) => {
                self.s(&format!("pi.{i} "));
                self.expr(x, 4);
            }
            Expr::Tuple(es) => {
                self.s("(");
                for (k, a) in es.iter().enumerate() {
                    if k > 0 {
                        self.s(", ");
                    }
                    self.expr(a, 0);
                }
                if es.len() <= 1 {
                    self.s(",");
                }
                self.s(")");
            }
            Expr::Boundary(t, c) => {
                self.s(&format!("FT[{}]", type_str(t)));
                self.component(c);
            }
        }
        if paren {
            self.s(")");
        }
    }
}

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Lam(_) => 0,
        Expr::Binop(Prim::Mul, ..) => 2,
        Expr::Binop(..) => 1,
        Expr::If0(..) | Expr::Fold(..) | Expr::Unfold(_) | Expr::Proj(..) => 3,
        Expr::App(..) => 4,
        // A negative literal directly under application would read as subtraction.
        Expr::Int(n) if n.sign() == num_bigint::Sign::Minus => 4,
        _ => 5,
    }
}

pub fn expr_str(e: &Expr) -> String {
    let mut p = Printer::new();
    p.expr(e, 0);
    p.out
}

pub fn component_str(c: &Component) -> String {
    let mut p = Printer::new();
    p.component(c);
    p.out
}

pub fn seq_str(s: &Seq) -> String {
    let mut p = Printer::new();
    p.seq(s);
    p.out
}

pub fn instr_str(i: &Instr) -> String {
    let mut p = Printer::new();
    p.instr(i);
    p.out
}

pub fn terminator_str(t: &Terminator) -> String {
    let mut p = Printer::new();
    p.term(t);
    p.out
}

pub fn heap_value_str(h: &HeapValue) -> String {
    let mut p = Printer::new();
    p.heap_value(h);
    p.out
}

pub fn program_str(prog: &Program) -> String {
    match prog {
        Program::Expr(e) => expr_str(e),
        Program::Component(c) => component_str(c),
    }
}

macro_rules! display_via {
    ($t:ty, $f:path) => {
        impl Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&$f(self))
            }
        }
    };
}

display_via!(Type, type_str);
display_via!(HeapType, heap_type_str);
display_via!(CodeType, code_type_str);
display_via!(RegFile, regfile_str);
display_via!(Stack, stack_str);
display_via!(Marker, marker_str);
display_via!(Omega, omega_str);
display_via!(Word, word_str);
display_via!(Small, small_str);
display_via!(Instr, instr_str);
display_via!(Terminator, terminator_str);
display_via!(Seq, seq_str);
display_via!(HeapValue, heap_value_str);
display_via!(Component, component_str);
display_via!(Expr, expr_str);
display_via!(Program, program_str);
