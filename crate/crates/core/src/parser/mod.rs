//! Recursive-descent parser for `.ftal` source text.
//!
//! Binder names carry their kind by prefix: names starting with `z` are stack
//! variables, names starting with `e` are marker variables, and all other
//! names are type variables.

mod lexer;

use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::syntax::*;
use lexer::{lex, Tok, Token};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub message: String,
}

impl ParseError {
    fn at(src: &str, offset: usize, expected: Vec<String>, message: String) -> ParseError {
        let offset = offset.min(src.len());
        let before = &src[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ParseError {
            offset,
            line,
            column,
            expected,
            message,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

type PResult<T> = Result<T, ParseError>;

const RESERVED: &[&str] = &[
    "lam", "if0", "fold", "unfold", "pi", "FT", "TF", "mu", "exists", "ref", "box", "code", "unit",
    "int", "ret", "out", "where", "pack", "as", "entry",
];

const INSTRS: &[&str] = &[
    "add", "sub", "mul", "mult", "bnz", "ld", "st", "ralloc", "balloc", "mv", "salloc", "sfree",
    "sld", "sst", "unpack", "unfold", "protect", "import",
];

const TERMINATORS: &[&str] = &["jmp", "call", "ret", "halt"];

fn is_reserved(s: &str) -> bool {
    RESERVED.contains(&s) || Reg::from_name(s).is_some()
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> PResult<Self> {
        Ok(Parser {
            src,
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &[&str], message: impl Into<String>) -> PResult<T> {
        Err(ParseError::at(
            self.src,
            self.offset(),
            expected.iter().map(|s| s.to_string()).collect(),
            message.into(),
        ))
    }

    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        self.err(expected, format!("unexpected {}", self.peek().describe()))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.unexpected(&[&format!("`{s}`")])
        }
    }

    fn expect_kw(&mut self, s: &str) -> PResult<()> {
        if self.eat_kw(s) {
            Ok(())
        } else {
            self.unexpected(&[&format!("`{s}`")])
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected(&[what]),
        }
    }

    fn binder(&mut self, kind: Kind) -> PResult<String> {
        let at = self.pos;
        let name = self.ident(&format!("{kind} variable"))?;
        if Kind::from_name(&name) != kind {
            self.pos = at;
            return self.err(
                &[],
                format!("`{name}` cannot name a {kind} variable (stack variables start with `z`, marker variables with `e`)"),
            );
        }
        Ok(name)
    }

    fn nat(&mut self) -> PResult<usize> {
        match self.peek().clone() {
            Tok::Int(n) => match n.to_usize() {
                Some(k) => {
                    self.bump();
                    Ok(k)
                }
                None => self.err(&[], "number out of range"),
            },
            _ => self.unexpected(&["natural number"]),
        }
    }

    fn reg(&mut self) -> PResult<Reg> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(r) = Reg::from_name(s) {
                self.bump();
                return Ok(r);
            }
        }
        self.unexpected(&["register"])
    }

    fn peek_reg(&self) -> Option<Reg> {
        match self.peek() {
            Tok::Ident(s) => Reg::from_name(s),
            _ => None,
        }
    }

    fn eof(&mut self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.unexpected(&["end of input"])
        }
    }

    // -----------------------------------------------------------------------
    // Types

    fn ty(&mut self) -> PResult<Type> {
        if self.eat_kw("exists") {
            let a = self.binder(Kind::Type)?;
            self.expect_sym(".")?;
            return Ok(Type::Exists(a, Box::new(self.ty()?)));
        }
        if self.eat_kw("mu") {
            let a = self.binder(Kind::Type)?;
            self.expect_sym(".")?;
            return Ok(Type::Mu(a, Box::new(self.ty()?)));
        }
        if self.eat_sym("(") {
            let mut ts = Vec::new();
            if !self.is_sym(")") {
                ts.push(self.ty()?);
                while self.eat_sym(",") {
                    ts.push(self.ty()?);
                }
            }
            self.expect_sym(")")?;
            if self.eat_sym("[") {
                let phi_in = self.phi()?;
                self.expect_sym("=>")?;
                let phi_out = self.phi()?;
                self.expect_sym("]")?;
                self.expect_sym("->")?;
                return Ok(Type::stack_arrow(ts, phi_in, phi_out, self.ty()?));
            }
            if self.eat_sym("->") {
                return Ok(Type::arrow(ts, self.ty()?));
            }
            if ts.len() == 1 {
                return Ok(ts.pop().expect("one element"));
            }
            return self.unexpected(&["`->`", "`[`"]);
        }
        let atom = self.atom_ty()?;
        if self.eat_sym("->") {
            return Ok(Type::arrow(vec![atom], self.ty()?));
        }
        Ok(atom)
    }

    fn atom_ty(&mut self) -> PResult<Type> {
        if self.eat_kw("unit") {
            return Ok(Type::Unit);
        }
        if self.eat_kw("int") {
            return Ok(Type::Int);
        }
        if self.eat_kw("ref") {
            return Ok(Type::Ref(self.angle_types()?));
        }
        if self.eat_kw("box") {
            return Ok(Type::Box(Box::new(self.heap_type()?)));
        }
        if self.is_sym("<") {
            return Ok(Type::Tuple(self.angle_types()?));
        }
        if let Tok::Ident(s) = self.peek() {
            if !is_reserved(s) {
                if Kind::from_name(s) != Kind::Type {
                    return self.err(&["type"], format!("`{s}` names a {} variable, not a type", Kind::from_name(s)));
                }
                let s = s.clone();
                self.bump();
                return Ok(Type::Var(s));
            }
        }
        self.unexpected(&["type"])
    }

    fn angle_types(&mut self) -> PResult<Vec<Type>> {
        self.expect_sym("<")?;
        let mut ts = Vec::new();
        if !self.is_sym(">") {
            ts.push(self.ty()?);
            while self.eat_sym(",") {
                ts.push(self.ty()?);
            }
        }
        self.expect_sym(">")?;
        Ok(ts)
    }

    fn heap_type(&mut self) -> PResult<HeapType> {
        if self.is_sym("<") {
            return Ok(HeapType::Tuple(self.angle_types()?));
        }
        if self.is_kw("code") {
            return Ok(HeapType::Code(self.code_type()?));
        }
        self.unexpected(&["`code`", "`<`"])
    }

    fn code_type(&mut self) -> PResult<CodeType> {
        self.expect_kw("code")?;
        self.expect_sym("[")?;
        let mut delta: Vec<TyVar> = Vec::new();
        if !self.is_sym("]") {
            loop {
                let name = self.ident("binder")?;
                let v = TyVar::new(Kind::from_name(&name), name);
                if delta.contains(&v) {
                    return self.err(&[], format!("duplicate binder `{}`", v.name));
                }
                delta.push(v);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym("]")?;
        self.expect_sym("{")?;
        let chi = self.regfile()?;
        self.expect_sym(";")?;
        let sigma = self.stack()?;
        self.expect_sym("}")?;
        let marker = self.marker()?;
        Ok(CodeType {
            delta,
            chi,
            sigma,
            marker,
        })
    }

    fn regfile(&mut self) -> PResult<RegFile> {
        let mut chi = RegFile::new();
        if self.is_sym(";") {
            return Ok(chi);
        }
        loop {
            let r = self.reg()?;
            self.expect_sym(":")?;
            let t = self.ty()?;
            if chi.get(r).is_some() {
                return self.err(&[], format!("register {r} typed twice"));
            }
            chi = chi.with(r, t);
            if !self.eat_sym(",") {
                return Ok(chi);
            }
        }
    }

    fn stack(&mut self) -> PResult<Stack> {
        if self.eat_sym("*") {
            return Ok(Stack::empty());
        }
        if let Tok::Ident(s) = self.peek() {
            if !is_reserved(s) && Kind::from_name(s) == Kind::Stack {
                let s = s.clone();
                self.bump();
                return Ok(Stack::var(s));
            }
        }
        let t = self.ty()?;
        self.stack_after(t)
    }

    fn stack_after(&mut self, first: Type) -> PResult<Stack> {
        self.expect_sym("::")?;
        let rest = self.stack()?;
        Ok(rest.push(first))
    }

    fn phi(&mut self) -> PResult<Vec<Type>> {
        let mut out = Vec::new();
        while !self.eat_sym(".") {
            out.push(self.ty()?);
            self.expect_sym("::")?;
        }
        Ok(out)
    }

    fn marker(&mut self) -> PResult<Marker> {
        if let Some(r) = self.peek_reg() {
            self.bump();
            return Ok(Marker::Reg(r));
        }
        if let Tok::Int(_) = self.peek() {
            return Ok(Marker::Index(self.nat()?));
        }
        if self.eat_kw("out") {
            return Ok(Marker::Out);
        }
        if self.eat_kw("ret") {
            self.expect_sym("(")?;
            let t = self.ty()?;
            self.expect_sym(",")?;
            let s = self.stack()?;
            self.expect_sym(")")?;
            return Ok(Marker::halt(t, s));
        }
        if let Tok::Ident(s) = self.peek() {
            if !is_reserved(s) && Kind::from_name(s) == Kind::Marker {
                let s = s.clone();
                self.bump();
                return Ok(Marker::Var(s));
            }
        }
        self.unexpected(&["return marker"])
    }

    fn omega(&mut self) -> PResult<Omega> {
        if self.is_sym("*") {
            return Ok(Omega::Stack(self.stack()?));
        }
        match self.peek().clone() {
            Tok::Int(_) => return Ok(Omega::Marker(self.marker()?)),
            Tok::Ident(s) => {
                if Reg::from_name(&s).is_some() || s == "out" || s == "ret" {
                    return Ok(Omega::Marker(self.marker()?));
                }
                if !is_reserved(&s) {
                    match Kind::from_name(&s) {
                        Kind::Stack => return Ok(Omega::Stack(self.stack()?)),
                        Kind::Marker => return Ok(Omega::Marker(self.marker()?)),
                        Kind::Type => {}
                    }
                }
            }
            _ => {}
        }
        let t = self.ty()?;
        if self.is_sym("::") {
            return Ok(Omega::Stack(self.stack_after(t)?));
        }
        Ok(Omega::Type(t))
    }

    // -----------------------------------------------------------------------
    // T values and code

    fn small(&mut self) -> PResult<Small> {
        let mut u = self.small_atom()?;
        while self.eat_sym("[") {
            loop {
                let o = self.omega()?;
                u = Small::Inst(Box::new(u), o);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("]")?;
        }
        Ok(u.normalize())
    }

    fn small_atom(&mut self) -> PResult<Small> {
        if self.eat_sym("(") {
            if self.eat_sym(")") {
                return Ok(Small::Word(Word::Unit));
            }
            let u = self.small()?;
            self.expect_sym(")")?;
            return Ok(u);
        }
        if self.eat_sym("-") {
            let n = self.int_lit()?;
            return Ok(Small::Word(Word::Int(-n)));
        }
        if let Tok::Int(_) = self.peek() {
            return Ok(Small::Word(Word::Int(self.int_lit()?)));
        }
        if let Some(r) = self.peek_reg() {
            self.bump();
            return Ok(Small::Reg(r));
        }
        if self.eat_kw("pack") {
            self.expect_sym("<")?;
            let t = self.ty()?;
            self.expect_sym(",")?;
            let u = self.small()?;
            self.expect_sym(">")?;
            self.expect_kw("as")?;
            let e = self.ty()?;
            return Ok(Small::Pack(t, Box::new(u), e));
        }
        if self.eat_kw("fold") {
            let t = self.ty()?;
            let u = self.small()?;
            return Ok(Small::Fold(t, Box::new(u)));
        }
        let l = self.ident("small value")?;
        Ok(Small::Word(Word::Loc(l)))
    }

    fn int_lit(&mut self) -> PResult<BigInt> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.unexpected(&["integer"]),
        }
    }

    fn word(&mut self) -> PResult<Word> {
        let at = self.pos;
        match self.small()? {
            Small::Word(w) => Ok(w),
            _ => {
                self.pos = at;
                self.err(&["word value"], "heap tuples cannot mention registers")
            }
        }
    }

    fn seq(&mut self) -> PResult<Seq> {
        let mut instrs = Vec::new();
        loop {
            let Tok::Ident(m) = self.peek().clone() else {
                return self.unexpected(&["instruction"]);
            };
            if TERMINATORS.contains(&m.as_str()) {
                let term = self.terminator()?;
                return Ok(Seq::new(instrs, term));
            }
            if !INSTRS.contains(&m.as_str()) {
                return self.unexpected(&["instruction"]);
            }
            instrs.push(self.instr()?);
            self.eat_sym(";");
        }
    }

    fn terminator(&mut self) -> PResult<Terminator> {
        let Tok::Ident(m) = self.bump() else {
            unreachable!("caller checked")
        };
        match m.as_str() {
            "jmp" => Ok(Terminator::Jmp(self.small()?)),
            "call" => {
                let u = self.small()?;
                self.expect_sym("{")?;
                let s = self.stack()?;
                self.expect_sym(",")?;
                let q = self.marker()?;
                self.expect_sym("}")?;
                Ok(Terminator::Call(u, s, q))
            }
            "ret" => {
                if self.is_kw("ret") {
                    let Marker::Halt(t, s) = self.marker()? else {
                        unreachable!("`ret` always parses as a halting marker")
                    };
                    self.expect_sym("{")?;
                    let r = self.reg()?;
                    self.expect_sym("}")?;
                    return Ok(Terminator::RetHalt(*t, *s, r));
                }
                let r = self.reg()?;
                self.expect_sym("{")?;
                let r2 = self.reg()?;
                self.expect_sym("}")?;
                Ok(Terminator::Ret(r, r2))
            }
            "halt" => {
                self.expect_sym("[")?;
                let t = self.ty()?;
                self.expect_sym(",")?;
                let s = self.stack()?;
                self.expect_sym("]")?;
                Ok(Terminator::Halt(t, s, self.reg()?))
            }
            _ => unreachable!("terminator mnemonic"),
        }
    }

    fn instr(&mut self) -> PResult<Instr> {
        let Tok::Ident(m) = self.bump() else {
            unreachable!("caller checked")
        };
        let instr = match m.as_str() {
            "add" | "sub" | "mul" | "mult" => {
                let p = match m.as_str() {
                    "add" => Prim::Add,
                    "sub" => Prim::Sub,
                    _ => Prim::Mul,
                };
                let rd = self.reg()?;
                self.expect_sym(",")?;
                let rs = self.reg()?;
                self.expect_sym(",")?;
                Instr::Aop(p, rd, rs, self.small()?)
            }
            "bnz" => {
                let r = self.reg()?;
                self.expect_sym(",")?;
                Instr::Bnz(r, self.small()?)
            }
            "ld" => {
                let rd = self.reg()?;
                self.expect_sym(",")?;
                let rs = self.reg()?;
                self.expect_sym("[")?;
                let i = self.nat()?;
                self.expect_sym("]")?;
                Instr::Ld(rd, rs, i)
            }
            "st" => {
                let rd = self.reg()?;
                self.expect_sym("[")?;
                let i = self.nat()?;
                self.expect_sym("]")?;
                self.expect_sym(",")?;
                Instr::St(rd, i, self.reg()?)
            }
            "ralloc" | "balloc" => {
                let rd = self.reg()?;
                self.expect_sym(",")?;
                let n = self.nat()?;
                if m == "ralloc" {
                    Instr::Ralloc(rd, n)
                } else {
                    Instr::Balloc(rd, n)
                }
            }
            "mv" => {
                let rd = self.reg()?;
                self.expect_sym(",")?;
                Instr::Mv(rd, self.small()?)
            }
            "salloc" => Instr::Salloc(self.nat()?),
            "sfree" => Instr::Sfree(self.nat()?),
            "sld" => {
                let rd = self.reg()?;
                self.expect_sym(",")?;
                Instr::Sld(rd, self.nat()?)
            }
            "sst" => {
                let i = self.nat()?;
                self.expect_sym(",")?;
                Instr::Sst(i, self.reg()?)
            }
            "unpack" => {
                self.expect_sym("<")?;
                let a = self.binder(Kind::Type)?;
                self.expect_sym(",")?;
                let rd = self.reg()?;
                self.expect_sym(">")?;
                Instr::Unpack(a, rd, self.small()?)
            }
            "unfold" => {
                let rd = self.reg()?;
                self.expect_sym(",")?;
                Instr::Unfold(rd, self.small()?)
            }
            "protect" => {
                let phi = self.phi()?;
                self.expect_sym(",")?;
                Instr::Protect(phi, self.binder(Kind::Stack)?)
            }
            "import" => {
                let rd = self.reg()?;
                self.expect_sym(",")?;
                let sigma = self.stack()?;
                let zeta = if self.eat_kw("as") {
                    Some(self.binder(Kind::Stack)?)
                } else {
                    None
                };
                self.expect_sym(",")?;
                let ty = self.ty()?;
                self.expect_kw("TF")?;
                self.expect_sym("{")?;
                let body = self.expr()?;
                self.expect_sym("}")?;
                Instr::Import(Import {
                    rd,
                    sigma,
                    zeta,
                    ty,
                    body: Box::new(body),
                })
            }
            _ => unreachable!("instruction mnemonic"),
        };
        Ok(instr)
    }

    fn component(&mut self) -> PResult<Component> {
        self.expect_sym("(")?;
        let seq = self.seq()?;
        let mut heap: Vec<(Name, HeapValue)> = Vec::new();
        if self.eat_sym(",") {
            self.expect_kw("where")?;
            while !self.is_sym(")") {
                let l = self.ident("label")?;
                if heap.iter().any(|(k, _)| *k == l) {
                    return self.err(&[], format!("label `{l}` bound twice"));
                }
                self.expect_sym("->")?;
                let h = self.heap_value()?;
                heap.push((l, h));
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(Component { seq, heap })
    }

    fn heap_value(&mut self) -> PResult<HeapValue> {
        if self.is_kw("code") {
            let ty = self.code_type()?;
            self.expect_sym(".")?;
            let body = self.seq()?;
            return Ok(HeapValue::Code(CodeBlock { ty, body }));
        }
        let m = if self.eat_kw("ref") {
            Mutability::Ref
        } else {
            self.eat_kw("box");
            Mutability::Box
        };
        self.expect_sym("<")?;
        let mut ws = Vec::new();
        if !self.is_sym(">") {
            ws.push(self.word()?);
            while self.eat_sym(",") {
                ws.push(self.word()?);
            }
        }
        self.expect_sym(">")?;
        Ok(HeapValue::Tuple(m, ws))
    }

    // -----------------------------------------------------------------------
    // F expressions

    fn expr(&mut self) -> PResult<Expr> {
        if self.eat_kw("lam") {
            let (mut phi_in, mut phi_out) = (vec![], vec![]);
            if self.eat_sym("[") {
                phi_in = self.phi()?;
                self.expect_sym("=>")?;
                phi_out = self.phi()?;
                self.expect_sym("]")?;
            }
            self.expect_sym("(")?;
            let mut params = Vec::new();
            if !self.is_sym(")") {
                loop {
                    let x = self.ident("parameter")?;
                    self.expect_sym(":")?;
                    params.push((x, self.ty()?));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(")")?;
            self.expect_sym(".")?;
            let body = self.expr()?;
            return Ok(Expr::Lam(Lambda {
                phi_in,
                phi_out,
                params,
                body: Box::new(body),
            }));
        }
        let mut e = self.prod()?;
        loop {
            let p = if self.is_sym("+") {
                Prim::Add
            } else if self.is_sym("-") {
                Prim::Sub
            } else {
                return Ok(e);
            };
            self.bump();
            let rhs = self.prod()?;
            e = Expr::Binop(p, Box::new(e), Box::new(rhs));
        }
    }

    fn prod(&mut self) -> PResult<Expr> {
        let mut e = self.unary()?;
        while self.eat_sym("*") {
            let rhs = self.unary()?;
            e = Expr::Binop(Prim::Mul, Box::new(e), Box::new(rhs));
        }
        Ok(e)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_kw("if0") {
            let a = self.atom()?;
            let b = self.atom()?;
            let c = self.atom()?;
            return Ok(Expr::If0(Box::new(a), Box::new(b), Box::new(c)));
        }
        if self.eat_kw("fold") {
            let t = self.ty()?;
            return Ok(Expr::Fold(t, Box::new(self.unary()?)));
        }
        if self.eat_kw("unfold") {
            return Ok(Expr::Unfold(Box::new(self.post()?)));
        }
        if self.eat_kw("pi") {
            self.expect_sym(".")?;
            let i = self.nat()?;
            return Ok(Expr::Proj(i, Box::new(self.post()?)));
        }
        self.post()
    }

    fn post(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        while self.eat_sym("(") {
            let mut args = Vec::new();
            if !self.is_sym(")") {
                args.push(self.expr()?);
                while self.eat_sym(",") {
                    args.push(self.expr()?);
                }
            }
            self.expect_sym(")")?;
            e = Expr::App(Box::new(e), args);
        }
        Ok(e)
    }

    fn atom(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            let n = self.int_lit()?;
            return Ok(Expr::Int(-n));
        }
        if let Tok::Int(_) = self.peek() {
            return Ok(Expr::Int(self.int_lit()?));
        }
        if self.eat_kw("FT") {
            self.expect_sym("[")?;
            let t = self.ty()?;
            self.expect_sym("]")?;
            let c = self.component()?;
            return Ok(Expr::Boundary(t, Box::new(c)));
        }
        if self.eat_sym("(") {
            if self.eat_sym(")") {
                return Ok(Expr::Unit);
            }
            if self.eat_sym(",") {
                self.expect_sym(")")?;
                return Ok(Expr::Tuple(vec![]));
            }
            let first = self.expr()?;
            if self.eat_sym(")") {
                return Ok(first);
            }
            let mut es = vec![first];
            while self.eat_sym(",") {
                if self.is_sym(")") {
                    break;
                }
                es.push(self.expr()?);
            }
            self.expect_sym(")")?;
            return Ok(Expr::Tuple(es));
        }
        if self.is_kw("lam") {
            return self.expr();
        }
        let x = self.ident("expression")?;
        Ok(Expr::Var(x))
    }

    fn looks_like_component(&self) -> bool {
        if !self.is_sym("(") {
            return false;
        }
        let Tok::Ident(m) = self.peek_at(1) else {
            return false;
        };
        if !INSTRS.contains(&m.as_str()) && !TERMINATORS.contains(&m.as_str()) {
            return false;
        }
        !matches!(self.peek_at(2), Tok::Sym(")" | "," | "(" | "+" | "-" | "*"))
    }

    fn program(&mut self) -> PResult<Program> {
        let prog = if self.eat_kw("entry") {
            match self.bump() {
                Tok::Ident(k) if k == "T" => Program::Component(self.component()?),
                Tok::Ident(k) if k == "F" => Program::Expr(self.expr()?),
                _ => {
                    self.pos -= 1;
                    return self.unexpected(&["`F`", "`T`"]);
                }
            }
        } else if self.looks_like_component() {
            Program::Component(self.component()?)
        } else {
            Program::Expr(self.expr()?)
        };
        self.eof()?;
        Ok(prog)
    }
}

fn run<T>(src: &str, f: impl FnOnce(&mut Parser) -> PResult<T>) -> PResult<T> {
    let mut p = Parser::new(src)?;
    let v = f(&mut p)?;
    p.eof()?;
    Ok(v)
}

/// Parse a whole `.ftal` file: an F expression or a bare T component.
pub fn parse_program(src: &str) -> PResult<Program> {
    Parser::new(src)?.program()
}

pub fn parse_type(src: &str) -> PResult<Type> {
    run(src, |p| p.ty())
}

pub fn parse_expr(src: &str) -> PResult<Expr> {
    run(src, |p| p.expr())
}

pub fn parse_component(src: &str) -> PResult<Component> {
    run(src, |p| p.component())
}

pub fn parse_stack(src: &str) -> PResult<Stack> {
    run(src, |p| p.stack())
}

pub fn parse_marker(src: &str) -> PResult<Marker> {
    run(src, |p| p.marker())
}

pub fn parse_small(src: &str) -> PResult<Small> {
    run(src, |p| p.small())
}

pub fn parse_seq(src: &str) -> PResult<Seq> {
    run(src, |p| p.seq())
}

pub fn parse_instr(src: &str) -> PResult<Instr> {
    run(src, |p| match p.peek() {
        Tok::Ident(m) if INSTRS.contains(&m.as_str()) => p.instr(),
        _ => p.unexpected(&["instruction"]),
    })
}

pub fn parse_heap_value(src: &str) -> PResult<HeapValue> {
    run(src, |p| p.heap_value())
}

pub fn parse_regfile(src: &str) -> PResult<RegFile> {
    run(src, |p| p.regfile())
}

/// Parse an integer literal with optional sign (used for job inputs and CLI args).
pub fn parse_int(src: &str) -> Option<BigInt> {
    src.trim().parse().ok()
}
