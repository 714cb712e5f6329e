use num_bigint::BigInt;

use super::types::{CodeType, Marker, Name, Omega, Reg, Stack, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Prim {
    Add,
    Sub,
    Mul,
}

impl Prim {
    pub fn symbol(self) -> &'static str {
        match self {
            Prim::Add => "+",
            Prim::Sub => "-",
            Prim::Mul => "*",
        }
    }
    pub fn mnemonic(self) -> &'static str {
        match self {
            Prim::Add => "add",
            Prim::Sub => "sub",
            Prim::Mul => "mul",
        }
    }
    pub fn apply(self, a: &BigInt, b: &BigInt) -> BigInt {
        match self {
            Prim::Add => a + b,
            Prim::Sub => a - b,
            Prim::Mul => a * b,
        }
    }
}

/// F expressions, including the stack-modifying lambda and the `FT` boundary.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(Name),
    Unit,
    Int(BigInt),
    Binop(Prim, Box<Expr>, Box<Expr>),
    If0(Box<Expr>, Box<Expr>, Box<Expr>),
    Lam(Lambda),
    App(Box<Expr>, Vec<Expr>),
    Fold(Type, Box<Expr>),
    Unfold(Box<Expr>),
    Tuple(Vec<Expr>),
    Proj(usize, Box<Expr>),
    Boundary(Type, Box<Component>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lambda {
    pub phi_in: Vec<Type>,
    pub phi_out: Vec<Type>,
    pub params: Vec<(Name, Type)>,
    pub body: Box<Expr>,
}

impl Expr {
    pub fn int(n: impl Into<BigInt>) -> Expr {
        Expr::Int(n.into())
    }
    pub fn app(f: Expr, args: Vec<Expr>) -> Expr {
        Expr::App(Box::new(f), args)
    }
    pub fn lam(params: Vec<(Name, Type)>, body: Expr) -> Expr {
        Expr::Lam(Lambda {
            phi_in: vec![],
            phi_out: vec![],
            params,
            body: Box::new(body),
        })
    }
    pub fn is_value(&self) -> bool {
        match self {
            Expr::Unit | Expr::Int(_) | Expr::Lam(_) => true,
            Expr::Fold(_, e) => e.is_value(),
            Expr::Tuple(es) => es.iter().all(Expr::is_value),
            _ => false,
        }
    }
}

/// Word values: register-sized values with no register references.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Word {
    Unit,
    Int(BigInt),
    Loc(Name),
    Pack(Type, Box<Word>, Type),
    Fold(Type, Box<Word>),
    Inst(Box<Word>, Omega),
}

/// Small values: operands, which may read registers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Small {
    Word(Word),
    Reg(Reg),
    Pack(Type, Box<Small>, Type),
    Fold(Type, Box<Small>),
    Inst(Box<Small>, Omega),
}

impl Small {
    pub fn loc(l: impl Into<Name>) -> Small {
        Small::Word(Word::Loc(l.into()))
    }
    pub fn int(n: impl Into<BigInt>) -> Small {
        Small::Word(Word::Int(n.into()))
    }
    pub fn inst(self, omegas: impl IntoIterator<Item = Omega>) -> Small {
        omegas
            .into_iter()
            .fold(self, |u, w| Small::Inst(Box::new(u), w))
    }

    /// Canonical form: register-free subtrees become `Small::Word`.
    pub fn normalize(self) -> Small {
        match self {
            Small::Word(w) => Small::Word(w),
            Small::Reg(r) => Small::Reg(r),
            Small::Pack(t, u, e) => match u.normalize() {
                Small::Word(w) => Small::Word(Word::Pack(t, Box::new(w), e)),
                u => Small::Pack(t, Box::new(u), e),
            },
            Small::Fold(t, u) => match u.normalize() {
                Small::Word(w) => Small::Word(Word::Fold(t, Box::new(w))),
                u => Small::Fold(t, Box::new(u)),
            },
            Small::Inst(u, o) => match u.normalize() {
                Small::Word(w) => Small::Word(Word::Inst(Box::new(w), o)),
                u => Small::Inst(Box::new(u), o),
            },
        }
    }

    pub fn as_reg(&self) -> Option<Reg> {
        match self {
            Small::Reg(r) => Some(*r),
            _ => None,
        }
    }
}

impl Word {
    pub fn int(n: impl Into<BigInt>) -> Word {
        Word::Int(n.into())
    }
    pub fn loc(l: impl Into<Name>) -> Word {
        Word::Loc(l.into())
    }
    pub fn inst(self, omegas: impl IntoIterator<Item = Omega>) -> Word {
        omegas
            .into_iter()
            .fold(self, |w, o| Word::Inst(Box::new(w), o))
    }
    /// Peel instantiations: `l[w1][w2]` → (`l`, [w1, w2]).
    pub fn head_and_instantiations(&self) -> (&Word, Vec<&Omega>) {
        let mut omegas = Vec::new();
        let mut cur = self;
        while let Word::Inst(inner, o) = cur {
            omegas.push(o);
            cur = inner;
        }
        omegas.reverse();
        (cur, omegas)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mutability {
    Ref,
    Box,
}

impl Mutability {
    pub fn keyword(self) -> &'static str {
        match self {
            Mutability::Ref => "ref",
            Mutability::Box => "box",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CodeBlock {
    pub ty: CodeType,
    pub body: Seq,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[allow(clippy::large_enum_variant)]
pub enum HeapValue {
    Code(CodeBlock),
    Tuple(Mutability, Vec<Word>),
}

impl HeapValue {
    pub fn mutability(&self) -> Mutability {
        match self {
            HeapValue::Code(_) => Mutability::Box,
            HeapValue::Tuple(m, _) => *m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Import {
    pub rd: Reg,
    pub sigma: Stack,
    /// Name for the abstracted tail while checking the body; fresh when absent.
    pub zeta: Option<Name>,
    pub ty: Type,
    pub body: Box<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    Aop(Prim, Reg, Reg, Small),
    Bnz(Reg, Small),
    Ld(Reg, Reg, usize),
    St(Reg, usize, Reg),
    Ralloc(Reg, usize),
    Balloc(Reg, usize),
    Mv(Reg, Small),
    Salloc(usize),
    Sfree(usize),
    Sld(Reg, usize),
    Sst(usize, Reg),
    Unpack(Name, Reg, Small),
    Unfold(Reg, Small),
    Protect(Vec<Type>, Name),
    Import(Import),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Terminator {
    Jmp(Small),
    Call(Small, Stack, Marker),
    Ret(Reg, Reg),
    /// `ret ret(t, s) {r}`: synonym for `halt[t, s] r`.
    RetHalt(Type, Stack, Reg),
    Halt(Type, Stack, Reg),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Seq {
    pub instrs: Vec<Instr>,
    pub term: Terminator,
}

impl Seq {
    pub fn new(instrs: Vec<Instr>, term: Terminator) -> Seq {
        Seq { instrs, term }
    }
}

/// A T component `(I, H)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Component {
    pub seq: Seq,
    pub heap: Vec<(Name, HeapValue)>,
}

/// A parsed file: either an F expression or a bare T component.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Program {
    Expr(Expr),
    Component(Component),
}
