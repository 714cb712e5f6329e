use std::collections::BTreeMap;
use std::fmt;

pub type Name = String;

/// The fixed register set `r1..r7, ra`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reg {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    Ra,
}

impl Reg {
    pub const ALL: [Reg; 8] = [
        Reg::R1,
        Reg::R2,
        Reg::R3,
        Reg::R4,
        Reg::R5,
        Reg::R6,
        Reg::R7,
        Reg::Ra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reg::R1 => "r1",
            Reg::R2 => "r2",
            Reg::R3 => "r3",
            Reg::R4 => "r4",
            Reg::R5 => "r5",
            Reg::R6 => "r6",
            Reg::R7 => "r7",
            Reg::Ra => "ra",
        }
    }

    pub fn from_name(s: &str) -> Option<Reg> {
        Reg::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kinds of type-level variables: value types, stack tails, return markers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Type,
    Stack,
    Marker,
}

impl Kind {
    /// Kind implied by a binder name in `code[...]` lists and instantiations:
    /// `z...` is a stack variable, `e...` a marker variable, anything else a type.
    pub fn from_name(name: &str) -> Kind {
        if name.starts_with('z') || name.starts_with('ζ') {
            Kind::Stack
        } else if name.starts_with('e') || name.starts_with('ε') {
            Kind::Marker
        } else {
            Kind::Type
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Type => "type",
            Kind::Stack => "stack",
            Kind::Marker => "marker",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TyVar {
    pub kind: Kind,
    pub name: Name,
}

impl TyVar {
    pub fn new(kind: Kind, name: impl Into<Name>) -> Self {
        TyVar {
            kind,
            name: name.into(),
        }
    }
    pub fn ty(name: impl Into<Name>) -> Self {
        Self::new(Kind::Type, name)
    }
    pub fn stack(name: impl Into<Name>) -> Self {
        Self::new(Kind::Stack, name)
    }
    pub fn marker(name: impl Into<Name>) -> Self {
        Self::new(Kind::Marker, name)
    }
}

/// Value types of both languages. F tuples and arrows live alongside the
/// T-only constructors; `translate_type` maps the former to the latter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Var(Name),
    Unit,
    Int,
    Exists(Name, Box<Type>),
    Mu(Name, Box<Type>),
    Ref(Vec<Type>),
    Box(Box<HeapType>),
    /// F tuple type.
    Tuple(Vec<Type>),
    /// F arrow; plain when both stack prefixes are empty.
    Arrow(Arrow),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Arrow {
    pub params: Vec<Type>,
    pub phi_in: Vec<Type>,
    pub phi_out: Vec<Type>,
    pub result: Box<Type>,
}

impl Arrow {
    pub fn is_plain(&self) -> bool {
        self.phi_in.is_empty() && self.phi_out.is_empty()
    }
}

/// Heap-value types ψ.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum HeapType {
    Code(CodeType),
    Tuple(Vec<Type>),
}

/// `∀[Δ]{χ; σ} q`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CodeType {
    pub delta: Vec<TyVar>,
    pub chi: RegFile,
    pub sigma: Stack,
    pub marker: Marker,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RegFile(pub BTreeMap<Reg, Type>);

impl RegFile {
    pub fn new() -> Self {
        RegFile(BTreeMap::new())
    }
    pub fn get(&self, r: Reg) -> Option<&Type> {
        self.0.get(&r)
    }
    pub fn with(&self, r: Reg, t: Type) -> RegFile {
        let mut m = self.0.clone();
        m.insert(r, t);
        RegFile(m)
    }
    pub fn single(r: Reg, t: Type) -> RegFile {
        RegFile::new().with(r, t)
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn iter(&self) -> impl Iterator<Item = (&Reg, &Type)> {
        self.0.iter()
    }
}

impl FromIterator<(Reg, Type)> for RegFile {
    fn from_iter<I: IntoIterator<Item = (Reg, Type)>>(iter: I) -> Self {
        RegFile(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tail {
    Empty,
    Var(Name),
}

/// A stack typing: visible prefix (index 0 = top) then a tail.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Stack {
    pub prefix: Vec<Type>,
    pub tail: Tail,
}

impl Stack {
    pub fn empty() -> Stack {
        Stack {
            prefix: vec![],
            tail: Tail::Empty,
        }
    }
    pub fn var(name: impl Into<Name>) -> Stack {
        Stack {
            prefix: vec![],
            tail: Tail::Var(name.into()),
        }
    }
    pub fn new(prefix: Vec<Type>, tail: Tail) -> Stack {
        Stack { prefix, tail }
    }
    /// `phi :: self`
    pub fn push_prefix(&self, phi: &[Type]) -> Stack {
        let mut prefix = phi.to_vec();
        prefix.extend(self.prefix.iter().cloned());
        Stack {
            prefix,
            tail: self.tail.clone(),
        }
    }
    pub fn push(&self, t: Type) -> Stack {
        self.push_prefix(std::slice::from_ref(&t))
    }
    pub fn drop_top(&self, n: usize) -> Option<Stack> {
        if n > self.prefix.len() {
            return None;
        }
        Some(Stack {
            prefix: self.prefix[n..].to_vec(),
            tail: self.tail.clone(),
        })
    }
    pub fn get(&self, i: usize) -> Option<&Type> {
        self.prefix.get(i)
    }
    pub fn depth(&self) -> usize {
        self.prefix.len()
    }
}

impl Default for Stack {
    fn default() -> Stack {
        Stack::empty()
    }
}

/// Return markers q.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Marker {
    Reg(Reg),
    Index(usize),
    Var(Name),
    Halt(Box<Type>, Box<Stack>),
    Out,
}

impl Marker {
    pub fn halt(t: Type, s: Stack) -> Marker {
        Marker::Halt(Box::new(t), Box::new(s))
    }
}

/// Type instantiation ω.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Omega {
    Type(Type),
    Stack(Stack),
    Marker(Marker),
}

impl Omega {
    pub fn kind(&self) -> Kind {
        match self {
            Omega::Type(_) => Kind::Type,
            Omega::Stack(_) => Kind::Stack,
            Omega::Marker(_) => Kind::Marker,
        }
    }
}

impl Type {
    pub fn var(n: impl Into<Name>) -> Type {
        Type::Var(n.into())
    }
    pub fn code(ct: CodeType) -> Type {
        Type::Box(Box::new(HeapType::Code(ct)))
    }
    pub fn box_tuple(ts: Vec<Type>) -> Type {
        Type::Box(Box::new(HeapType::Tuple(ts)))
    }
    pub fn arrow(params: Vec<Type>, result: Type) -> Type {
        Type::Arrow(Arrow {
            params,
            phi_in: vec![],
            phi_out: vec![],
            result: Box::new(result),
        })
    }
    pub fn stack_arrow(params: Vec<Type>, phi_in: Vec<Type>, phi_out: Vec<Type>, result: Type) -> Type {
        Type::Arrow(Arrow {
            params,
            phi_in,
            phi_out,
            result: Box::new(result),
        })
    }
    /// Code type behind a `box ∀[..]{..}` pointer, if any.
    pub fn as_code(&self) -> Option<&CodeType> {
        match self {
            Type::Box(h) => match h.as_ref() {
                HeapType::Code(c) => Some(c),
                HeapType::Tuple(_) => None,
            },
            _ => None,
        }
    }
}
