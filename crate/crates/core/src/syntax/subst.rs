//! Free variables, capture-avoiding substitution and alpha-equivalence.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::terms::*;
use super::types::*;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("kind mismatch: {var} is a {expected} variable but was given a {found}")]
pub struct KindError {
    pub var: Name,
    pub expected: Kind,
    pub found: Kind,
}

/// A simultaneous substitution for type, stack and marker variables.
#[derive(Clone, Debug, Default)]
pub struct Subst {
    types: BTreeMap<Name, Type>,
    stacks: BTreeMap<Name, Stack>,
    markers: BTreeMap<Name, Marker>,
    range_fv: BTreeSet<TyVar>,
}

impl Subst {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(var: &TyVar, omega: Omega) -> Result<Self, KindError> {
        let mut s = Subst::new();
        s.bind(var, omega)?;
        Ok(s)
    }

    pub fn bind(&mut self, var: &TyVar, omega: Omega) -> Result<(), KindError> {
        if var.kind != omega.kind() {
            return Err(KindError {
                var: var.name.clone(),
                expected: var.kind,
                found: omega.kind(),
            });
        }
        self.range_fv.extend(free_vars(&omega));
        match omega {
            Omega::Type(t) => {
                self.types.insert(var.name.clone(), t);
            }
            Omega::Stack(s) => {
                self.stacks.insert(var.name.clone(), s);
            }
            Omega::Marker(m) => {
                self.markers.insert(var.name.clone(), m);
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty() && self.stacks.is_empty() && self.markers.is_empty()
    }

    fn remove(&mut self, v: &TyVar) {
        match v.kind {
            Kind::Type => {
                self.types.remove(&v.name);
            }
            Kind::Stack => {
                self.stacks.remove(&v.name);
            }
            Kind::Marker => {
                self.markers.remove(&v.name);
            }
        }
    }

    /// Move under `binders`, renaming any binder that would capture a variable
    /// of the substitution's range.
    fn enter(
        &self,
        binders: &[TyVar],
        body_fv: impl FnOnce() -> BTreeSet<TyVar>,
    ) -> (Subst, Vec<TyVar>) {
        let mut inner = self.clone();
        for b in binders {
            inner.remove(b);
        }
        if inner.is_empty() || !binders.iter().any(|b| inner.range_fv.contains(b)) {
            return (inner, binders.to_vec());
        }
        let mut avoid = body_fv();
        avoid.extend(inner.range_fv.iter().cloned());
        avoid.extend(binders.iter().cloned());
        let mut renamed = Vec::with_capacity(binders.len());
        for b in binders {
            if inner.range_fv.contains(b) {
                let fresh = fresh_var(b, &avoid);
                avoid.insert(fresh.clone());
                let omega = match b.kind {
                    Kind::Type => Omega::Type(Type::Var(fresh.name.clone())),
                    Kind::Stack => Omega::Stack(Stack::var(fresh.name.clone())),
                    Kind::Marker => Omega::Marker(Marker::Var(fresh.name.clone())),
                };
                inner.bind(b, omega).expect("kinds agree by construction");
                renamed.push(fresh);
            } else {
                renamed.push(b.clone());
            }
        }
        (inner, renamed)
    }
}

/// A variable of the same kind and name stem as `base` that is not in `avoid`.
pub fn fresh_var(base: &TyVar, avoid: &BTreeSet<TyVar>) -> TyVar {
    let stem = base.name.trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'');
    let stem = if stem.is_empty() { "v" } else { stem };
    (1..)
        .map(|i| TyVar::new(base.kind, format!("{stem}{i}")))
        .find(|v| !avoid.contains(v))
        .expect("infinite supply")
}

/// Binding-aware operations shared by every syntactic category.
pub trait Syntax: Clone {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>);
    fn apply(&self, s: &Subst) -> Self;
    fn alpha(&self, other: &Self, env: &mut AlphaEnv) -> bool;
}

pub fn free_vars<T: Syntax>(x: &T) -> BTreeSet<TyVar> {
    let mut out = BTreeSet::new();
    x.collect_fv(&mut Vec::new(), &mut out);
    out
}

pub fn alpha_equal<T: Syntax>(a: &T, b: &T) -> bool {
    a.alpha(b, &mut AlphaEnv::default())
}

pub fn substitute<T: Syntax>(x: &T, var: &TyVar, omega: Omega) -> Result<T, KindError> {
    Ok(x.apply(&Subst::single(var, omega)?))
}

pub fn apply_subst<T: Syntax>(x: &T, s: &Subst) -> T {
    if s.is_empty() {
        x.clone()
    } else {
        x.apply(s)
    }
}

fn note(v: TyVar, bound: &[TyVar], out: &mut BTreeSet<TyVar>) {
    if !bound.contains(&v) {
        out.insert(v);
    }
}

fn fv_all<T: Syntax>(xs: &[T], bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
    for x in xs {
        x.collect_fv(bound, out);
    }
}

fn alpha_all<T: Syntax>(a: &[T], b: &[T], env: &mut AlphaEnv) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.alpha(y, env))
}

/// Pairs of binders currently in scope on each side of an alpha comparison.
#[derive(Default, Debug)]
pub struct AlphaEnv {
    tyvars: Vec<(TyVar, TyVar)>,
    terms: Vec<(Name, Name)>,
}

impl AlphaEnv {
    fn same_var(&self, kind: Kind, x: &str, y: &str) -> bool {
        for (l, r) in self.tyvars.iter().rev() {
            let lm = l.kind == kind && l.name == x;
            let rm = r.kind == kind && r.name == y;
            if lm || rm {
                return lm && rm;
            }
        }
        x == y
    }
    fn same_term(&self, x: &str, y: &str) -> bool {
        for (l, r) in self.terms.iter().rev() {
            if l == x || r == y {
                return l == x && r == y;
            }
        }
        x == y
    }
    fn push(&mut self, a: TyVar, b: TyVar) {
        self.tyvars.push((a, b));
    }
    fn pop(&mut self, n: usize) {
        let len = self.tyvars.len();
        self.tyvars.truncate(len - n);
    }
}

// ---------------------------------------------------------------------------
// Types

impl Syntax for Type {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Type::Var(n) => note(TyVar::ty(n.clone()), bound, out),
            Type::Unit | Type::Int => {}
            Type::Exists(a, t) | Type::Mu(a, t) => {
                bound.push(TyVar::ty(a.clone()));
                t.collect_fv(bound, out);
                bound.pop();
            }
            Type::Ref(ts) | Type::Tuple(ts) => fv_all(ts, bound, out),
            Type::Box(h) => h.collect_fv(bound, out),
            Type::Arrow(a) => {
                fv_all(&a.params, bound, out);
                fv_all(&a.phi_in, bound, out);
                fv_all(&a.phi_out, bound, out);
                a.result.collect_fv(bound, out);
            }
        }
    }

    fn apply(&self, s: &Subst) -> Type {
        match self {
            Type::Var(n) => s.types.get(n).cloned().unwrap_or_else(|| self.clone()),
            Type::Unit | Type::Int => self.clone(),
            Type::Exists(a, t) | Type::Mu(a, t) => {
                let (inner, bs) = s.enter(&[TyVar::ty(a.clone())], || free_vars(t.as_ref()));
                let body = Box::new(t.apply(&inner));
                let a = bs[0].name.clone();
                if matches!(self, Type::Exists(..)) {
                    Type::Exists(a, body)
                } else {
                    Type::Mu(a, body)
                }
            }
            Type::Ref(ts) => Type::Ref(ts.iter().map(|t| t.apply(s)).collect()),
            Type::Tuple(ts) => Type::Tuple(ts.iter().map(|t| t.apply(s)).collect()),
            Type::Box(h) => Type::Box(Box::new(h.apply(s))),
            Type::Arrow(a) => Type::Arrow(Arrow {
                params: a.params.iter().map(|t| t.apply(s)).collect(),
                phi_in: a.phi_in.iter().map(|t| t.apply(s)).collect(),
                phi_out: a.phi_out.iter().map(|t| t.apply(s)).collect(),
                result: Box::new(a.result.apply(s)),
            }),
        }
    }

    fn alpha(&self, other: &Type, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (Type::Var(a), Type::Var(b)) => env.same_var(Kind::Type, a, b),
            (Type::Unit, Type::Unit) | (Type::Int, Type::Int) => true,
            (Type::Exists(a, t), Type::Exists(b, u)) | (Type::Mu(a, t), Type::Mu(b, u)) => {
                env.push(TyVar::ty(a.clone()), TyVar::ty(b.clone()));
                let r = t.alpha(u, env);
                env.pop(1);
                r
            }
            (Type::Ref(a), Type::Ref(b)) | (Type::Tuple(a), Type::Tuple(b)) => {
                alpha_all(a, b, env)
            }
            (Type::Box(a), Type::Box(b)) => a.alpha(b, env),
            (Type::Arrow(a), Type::Arrow(b)) => {
                alpha_all(&a.params, &b.params, env)
                    && alpha_all(&a.phi_in, &b.phi_in, env)
                    && alpha_all(&a.phi_out, &b.phi_out, env)
                    && a.result.alpha(&b.result, env)
            }
            _ => false,
        }
    }
}

impl Syntax for HeapType {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            HeapType::Code(c) => c.collect_fv(bound, out),
            HeapType::Tuple(ts) => fv_all(ts, bound, out),
        }
    }
    fn apply(&self, s: &Subst) -> HeapType {
        match self {
            HeapType::Code(c) => HeapType::Code(c.apply(s)),
            HeapType::Tuple(ts) => HeapType::Tuple(ts.iter().map(|t| t.apply(s)).collect()),
        }
    }
    fn alpha(&self, other: &HeapType, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (HeapType::Code(a), HeapType::Code(b)) => a.alpha(b, env),
            (HeapType::Tuple(a), HeapType::Tuple(b)) => alpha_all(a, b, env),
            _ => false,
        }
    }
}

fn code_parts_fv(c: &CodeType, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
    c.chi.collect_fv(bound, out);
    c.sigma.collect_fv(bound, out);
    c.marker.collect_fv(bound, out);
}

impl Syntax for CodeType {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        let n = bound.len();
        bound.extend(self.delta.iter().cloned());
        code_parts_fv(self, bound, out);
        bound.truncate(n);
    }
    fn apply(&self, s: &Subst) -> CodeType {
        let (inner, delta) = s.enter(&self.delta, || {
            let mut out = BTreeSet::new();
            code_parts_fv(self, &mut Vec::new(), &mut out);
            out
        });
        CodeType {
            delta,
            chi: self.chi.apply(&inner),
            sigma: self.sigma.apply(&inner),
            marker: self.marker.apply(&inner),
        }
    }
    fn alpha(&self, other: &CodeType, env: &mut AlphaEnv) -> bool {
        if self.delta.len() != other.delta.len()
            || self.delta.iter().zip(&other.delta).any(|(a, b)| a.kind != b.kind)
        {
            return false;
        }
        for (a, b) in self.delta.iter().zip(&other.delta) {
            env.push(a.clone(), b.clone());
        }
        let r = self.chi.alpha(&other.chi, env)
            && self.sigma.alpha(&other.sigma, env)
            && self.marker.alpha(&other.marker, env);
        env.pop(self.delta.len());
        r
    }
}

impl Syntax for RegFile {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        for t in self.0.values() {
            t.collect_fv(bound, out);
        }
    }
    fn apply(&self, s: &Subst) -> RegFile {
        RegFile(self.0.iter().map(|(r, t)| (*r, t.apply(s))).collect())
    }
    fn alpha(&self, other: &RegFile, env: &mut AlphaEnv) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .all(|(r, t)| other.0.get(r).is_some_and(|u| t.alpha(u, env)))
    }
}

impl Syntax for Stack {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        fv_all(&self.prefix, bound, out);
        if let Tail::Var(z) = &self.tail {
            note(TyVar::stack(z.clone()), bound, out);
        }
    }
    fn apply(&self, s: &Subst) -> Stack {
        let mut prefix: Vec<Type> = self.prefix.iter().map(|t| t.apply(s)).collect();
        match &self.tail {
            Tail::Var(z) => match s.stacks.get(z) {
                Some(rep) => {
                    prefix.extend(rep.prefix.iter().cloned());
                    Stack::new(prefix, rep.tail.clone())
                }
                None => Stack::new(prefix, self.tail.clone()),
            },
            Tail::Empty => Stack::new(prefix, Tail::Empty),
        }
    }
    fn alpha(&self, other: &Stack, env: &mut AlphaEnv) -> bool {
        alpha_all(&self.prefix, &other.prefix, env)
            && match (&self.tail, &other.tail) {
                (Tail::Empty, Tail::Empty) => true,
                (Tail::Var(a), Tail::Var(b)) => env.same_var(Kind::Stack, a, b),
                _ => false,
            }
    }
}

impl Syntax for Marker {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Marker::Var(e) => note(TyVar::marker(e.clone()), bound, out),
            Marker::Halt(t, s) => {
                t.collect_fv(bound, out);
                s.collect_fv(bound, out);
            }
            Marker::Reg(_) | Marker::Index(_) | Marker::Out => {}
        }
    }
    fn apply(&self, s: &Subst) -> Marker {
        match self {
            Marker::Var(e) => s.markers.get(e).cloned().unwrap_or_else(|| self.clone()),
            Marker::Halt(t, st) => Marker::halt(t.apply(s), st.apply(s)),
            _ => self.clone(),
        }
    }
    fn alpha(&self, other: &Marker, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (Marker::Var(a), Marker::Var(b)) => env.same_var(Kind::Marker, a, b),
            (Marker::Halt(t, s), Marker::Halt(u, r)) => t.alpha(u, env) && s.alpha(r, env),
            (Marker::Reg(a), Marker::Reg(b)) => a == b,
            (Marker::Index(a), Marker::Index(b)) => a == b,
            (Marker::Out, Marker::Out) => true,
            _ => false,
        }
    }
}

impl Syntax for Omega {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Omega::Type(t) => t.collect_fv(bound, out),
            Omega::Stack(s) => s.collect_fv(bound, out),
            Omega::Marker(m) => m.collect_fv(bound, out),
        }
    }
    fn apply(&self, s: &Subst) -> Omega {
        match self {
            Omega::Type(t) => Omega::Type(t.apply(s)),
            Omega::Stack(x) => Omega::Stack(x.apply(s)),
            Omega::Marker(m) => Omega::Marker(m.apply(s)),
        }
    }
    fn alpha(&self, other: &Omega, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (Omega::Type(a), Omega::Type(b)) => a.alpha(b, env),
            (Omega::Stack(a), Omega::Stack(b)) => a.alpha(b, env),
            (Omega::Marker(a), Omega::Marker(b)) => a.alpha(b, env),
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Values

impl Syntax for Word {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Word::Unit | Word::Int(_) | Word::Loc(_) => {}
            Word::Pack(t, w, e) => {
                t.collect_fv(bound, out);
                w.collect_fv(bound, out);
                e.collect_fv(bound, out);
            }
            Word::Fold(t, w) => {
                t.collect_fv(bound, out);
                w.collect_fv(bound, out);
            }
            Word::Inst(w, o) => {
                w.collect_fv(bound, out);
                o.collect_fv(bound, out);
            }
        }
    }
    fn apply(&self, s: &Subst) -> Word {
        match self {
            Word::Unit | Word::Int(_) | Word::Loc(_) => self.clone(),
            Word::Pack(t, w, e) => Word::Pack(t.apply(s), Box::new(w.apply(s)), e.apply(s)),
            Word::Fold(t, w) => Word::Fold(t.apply(s), Box::new(w.apply(s))),
            Word::Inst(w, o) => Word::Inst(Box::new(w.apply(s)), o.apply(s)),
        }
    }
    fn alpha(&self, other: &Word, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (Word::Unit, Word::Unit) => true,
            (Word::Int(a), Word::Int(b)) => a == b,
            (Word::Loc(a), Word::Loc(b)) => a == b,
            (Word::Pack(t, w, e), Word::Pack(t2, w2, e2)) => {
                t.alpha(t2, env) && w.alpha(w2, env) && e.alpha(e2, env)
            }
            (Word::Fold(t, w), Word::Fold(t2, w2)) => t.alpha(t2, env) && w.alpha(w2, env),
            (Word::Inst(w, o), Word::Inst(w2, o2)) => w.alpha(w2, env) && o.alpha(o2, env),
            _ => false,
        }
    }
}

impl Syntax for Small {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Small::Word(w) => w.collect_fv(bound, out),
            Small::Reg(_) => {}
            Small::Pack(t, u, e) => {
                t.collect_fv(bound, out);
                u.collect_fv(bound, out);
                e.collect_fv(bound, out);
            }
            Small::Fold(t, u) => {
                t.collect_fv(bound, out);
                u.collect_fv(bound, out);
            }
            Small::Inst(u, o) => {
                u.collect_fv(bound, out);
                o.collect_fv(bound, out);
            }
        }
    }
    fn apply(&self, s: &Subst) -> Small {
        match self {
            Small::Word(w) => Small::Word(w.apply(s)),
            Small::Reg(_) => self.clone(),
            Small::Pack(t, u, e) => Small::Pack(t.apply(s), Box::new(u.apply(s)), e.apply(s)),
            Small::Fold(t, u) => Small::Fold(t.apply(s), Box::new(u.apply(s))),
            Small::Inst(u, o) => Small::Inst(Box::new(u.apply(s)), o.apply(s)),
        }
    }
    fn alpha(&self, other: &Small, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (Small::Word(a), Small::Word(b)) => a.alpha(b, env),
            (Small::Reg(a), Small::Reg(b)) => a == b,
            (Small::Pack(t, u, e), Small::Pack(t2, u2, e2)) => {
                t.alpha(t2, env) && u.alpha(u2, env) && e.alpha(e2, env)
            }
            (Small::Fold(t, u), Small::Fold(t2, u2)) => t.alpha(t2, env) && u.alpha(u2, env),
            (Small::Inst(u, o), Small::Inst(u2, o2)) => u.alpha(u2, env) && o.alpha(o2, env),
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Instructions and components

/// The variable an instruction binds over the rest of its sequence.
fn seq_binder(i: &Instr) -> Option<TyVar> {
    match i {
        Instr::Unpack(a, _, _) => Some(TyVar::ty(a.clone())),
        Instr::Protect(_, z) => Some(TyVar::stack(z.clone())),
        _ => None,
    }
}

fn with_binder(i: &Instr, b: &TyVar) -> Instr {
    match i {
        Instr::Unpack(_, r, u) => Instr::Unpack(b.name.clone(), *r, u.clone()),
        Instr::Protect(phi, _) => Instr::Protect(phi.clone(), b.name.clone()),
        _ => i.clone(),
    }
}

impl Syntax for Instr {
    /// Free variables of the instruction itself; its sequence binder is handled by `Seq`.
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Instr::Aop(_, _, _, u)
            | Instr::Bnz(_, u)
            | Instr::Mv(_, u)
            | Instr::Unpack(_, _, u)
            | Instr::Unfold(_, u) => u.collect_fv(bound, out),
            Instr::Protect(phi, _) => fv_all(phi, bound, out),
            Instr::Import(im) => {
                im.sigma.collect_fv(bound, out);
                im.ty.collect_fv(bound, out);
                let n = bound.len();
                if let Some(z) = &im.zeta {
                    bound.push(TyVar::stack(z.clone()));
                }
                im.body.collect_fv(bound, out);
                bound.truncate(n);
            }
            Instr::Ld(..)
            | Instr::St(..)
            | Instr::Ralloc(..)
            | Instr::Balloc(..)
            | Instr::Salloc(_)
            | Instr::Sfree(_)
            | Instr::Sld(..)
            | Instr::Sst(..) => {}
        }
    }
    fn apply(&self, s: &Subst) -> Instr {
        match self {
            Instr::Aop(p, rd, rs, u) => Instr::Aop(*p, *rd, *rs, u.apply(s)),
            Instr::Bnz(r, u) => Instr::Bnz(*r, u.apply(s)),
            Instr::Mv(r, u) => Instr::Mv(*r, u.apply(s)),
            Instr::Unpack(a, r, u) => Instr::Unpack(a.clone(), *r, u.apply(s)),
            Instr::Unfold(r, u) => Instr::Unfold(*r, u.apply(s)),
            Instr::Protect(phi, z) => {
                Instr::Protect(phi.iter().map(|t| t.apply(s)).collect(), z.clone())
            }
            Instr::Import(im) => {
                let (inner, zeta) = match &im.zeta {
                    Some(z) => {
                        let (inner, bs) =
                            s.enter(&[TyVar::stack(z.clone())], || free_vars(im.body.as_ref()));
                        (inner, Some(bs[0].name.clone()))
                    }
                    None => (s.clone(), None),
                };
                Instr::Import(Import {
                    rd: im.rd,
                    sigma: im.sigma.apply(s),
                    zeta,
                    ty: im.ty.apply(s),
                    body: Box::new(im.body.apply(&inner)),
                })
            }
            _ => self.clone(),
        }
    }
    fn alpha(&self, other: &Instr, env: &mut AlphaEnv) -> bool {
        use Instr::*;
        match (self, other) {
            (Aop(p, a, b, u), Aop(p2, a2, b2, u2)) => {
                p == p2 && a == a2 && b == b2 && u.alpha(u2, env)
            }
            (Bnz(r, u), Bnz(r2, u2)) | (Mv(r, u), Mv(r2, u2)) | (Unfold(r, u), Unfold(r2, u2)) => {
                r == r2 && u.alpha(u2, env)
            }
            (Unpack(_, r, u), Unpack(_, r2, u2)) => r == r2 && u.alpha(u2, env),
            (Protect(phi, _), Protect(phi2, _)) => alpha_all(phi, phi2, env),
            (Import(a), Import(b)) => {
                if a.rd != b.rd || !a.sigma.alpha(&b.sigma, env) || !a.ty.alpha(&b.ty, env) {
                    return false;
                }
                let pushed = match (&a.zeta, &b.zeta) {
                    (Some(x), Some(y)) => {
                        env.push(TyVar::stack(x.clone()), TyVar::stack(y.clone()));
                        1
                    }
                    (None, None) => 0,
                    _ => return false,
                };
                let r = a.body.alpha(&b.body, env);
                env.pop(pushed);
                r
            }
            _ => self == other,
        }
    }
}

impl Syntax for Terminator {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Terminator::Jmp(u) => u.collect_fv(bound, out),
            Terminator::Call(u, s, q) => {
                u.collect_fv(bound, out);
                s.collect_fv(bound, out);
                q.collect_fv(bound, out);
            }
            Terminator::Ret(..) => {}
            Terminator::RetHalt(t, s, _) | Terminator::Halt(t, s, _) => {
                t.collect_fv(bound, out);
                s.collect_fv(bound, out);
            }
        }
    }
    fn apply(&self, s: &Subst) -> Terminator {
        match self {
            Terminator::Jmp(u) => Terminator::Jmp(u.apply(s)),
            Terminator::Call(u, st, q) => Terminator::Call(u.apply(s), st.apply(s), q.apply(s)),
            Terminator::Ret(..) => self.clone(),
            Terminator::RetHalt(t, st, r) => Terminator::RetHalt(t.apply(s), st.apply(s), *r),
            Terminator::Halt(t, st, r) => Terminator::Halt(t.apply(s), st.apply(s), *r),
        }
    }
    fn alpha(&self, other: &Terminator, env: &mut AlphaEnv) -> bool {
        use Terminator::*;
        match (self, other) {
            (Jmp(u), Jmp(u2)) => u.alpha(u2, env),
            (Call(u, s, q), Call(u2, s2, q2)) => {
                u.alpha(u2, env) && s.alpha(s2, env) && q.alpha(q2, env)
            }
            (Ret(a, b), Ret(a2, b2)) => a == a2 && b == b2,
            (RetHalt(t, s, r), RetHalt(t2, s2, r2)) | (Halt(t, s, r), Halt(t2, s2, r2)) => {
                r == r2 && t.alpha(t2, env) && s.alpha(s2, env)
            }
            _ => false,
        }
    }
}

fn seq_fv(instrs: &[Instr], term: &Terminator, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
    let n = bound.len();
    for i in instrs {
        i.collect_fv(bound, out);
        if let Some(b) = seq_binder(i) {
            bound.push(b);
        }
    }
    term.collect_fv(bound, out);
    bound.truncate(n);
}

fn seq_apply(instrs: &[Instr], term: &Terminator, s: &Subst) -> (Vec<Instr>, Terminator) {
    let mut out = Vec::with_capacity(instrs.len());
    let mut cur = s.clone();
    for (idx, i) in instrs.iter().enumerate() {
        let applied = i.apply(&cur);
        match seq_binder(i) {
            Some(b) => {
                let rest = &instrs[idx + 1..];
                let (inner, bs) = cur.enter(std::slice::from_ref(&b), || {
                    let mut o = BTreeSet::new();
                    seq_fv(rest, term, &mut Vec::new(), &mut o);
                    o
                });
                out.push(with_binder(&applied, &bs[0]));
                cur = inner;
            }
            None => out.push(applied),
        }
    }
    (out, term.apply(&cur))
}

impl Syntax for Seq {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        seq_fv(&self.instrs, &self.term, bound, out);
    }
    fn apply(&self, s: &Subst) -> Seq {
        let (instrs, term) = seq_apply(&self.instrs, &self.term, s);
        Seq { instrs, term }
    }
    fn alpha(&self, other: &Seq, env: &mut AlphaEnv) -> bool {
        if self.instrs.len() != other.instrs.len() {
            return false;
        }
        let mut pushed = 0;
        let mut ok = true;
        for (a, b) in self.instrs.iter().zip(&other.instrs) {
            if !a.alpha(b, env) {
                ok = false;
                break;
            }
            match (seq_binder(a), seq_binder(b)) {
                (Some(x), Some(y)) => {
                    env.push(x, y);
                    pushed += 1;
                }
                (None, None) => {}
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        let ok = ok && self.term.alpha(&other.term, env);
        env.pop(pushed);
        ok
    }
}

impl Syntax for CodeBlock {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        let n = bound.len();
        bound.extend(self.ty.delta.iter().cloned());
        code_parts_fv(&self.ty, bound, out);
        self.body.collect_fv(bound, out);
        bound.truncate(n);
    }
    fn apply(&self, s: &Subst) -> CodeBlock {
        let (inner, delta) = s.enter(&self.ty.delta, || {
            let mut out = BTreeSet::new();
            code_parts_fv(&self.ty, &mut Vec::new(), &mut out);
            self.body.collect_fv(&mut Vec::new(), &mut out);
            out
        });
        CodeBlock {
            ty: CodeType {
                delta,
                chi: self.ty.chi.apply(&inner),
                sigma: self.ty.sigma.apply(&inner),
                marker: self.ty.marker.apply(&inner),
            },
            body: self.body.apply(&inner),
        }
    }
    fn alpha(&self, other: &CodeBlock, env: &mut AlphaEnv) -> bool {
        if !self.ty.alpha(&other.ty, env) {
            return false;
        }
        for (a, b) in self.ty.delta.iter().zip(&other.ty.delta) {
            env.push(a.clone(), b.clone());
        }
        let r = self.body.alpha(&other.body, env);
        env.pop(self.ty.delta.len());
        r
    }
}

impl Syntax for HeapValue {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            HeapValue::Code(c) => c.collect_fv(bound, out),
            HeapValue::Tuple(_, ws) => fv_all(ws, bound, out),
        }
    }
    fn apply(&self, s: &Subst) -> HeapValue {
        match self {
            HeapValue::Code(c) => HeapValue::Code(c.apply(s)),
            HeapValue::Tuple(m, ws) => HeapValue::Tuple(*m, ws.iter().map(|w| w.apply(s)).collect()),
        }
    }
    fn alpha(&self, other: &HeapValue, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (HeapValue::Code(a), HeapValue::Code(b)) => a.alpha(b, env),
            (HeapValue::Tuple(m, a), HeapValue::Tuple(m2, b)) => m == m2 && alpha_all(a, b, env),
            _ => false,
        }
    }
}

impl Syntax for Component {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        self.seq.collect_fv(bound, out);
        for (_, h) in &self.heap {
            h.collect_fv(bound, out);
        }
    }
    fn apply(&self, s: &Subst) -> Component {
        Component {
            seq: self.seq.apply(s),
            heap: self.heap.iter().map(|(l, h)| (l.clone(), h.apply(s))).collect(),
        }
    }
    fn alpha(&self, other: &Component, env: &mut AlphaEnv) -> bool {
        self.seq.alpha(&other.seq, env)
            && self.heap.len() == other.heap.len()
            && self.heap.iter().all(|(l, h)| {
                other
                    .heap
                    .iter()
                    .find(|(l2, _)| l2 == l)
                    .is_some_and(|(_, h2)| h.alpha(h2, env))
            })
    }
}

// ---------------------------------------------------------------------------
// F expressions

impl Syntax for Expr {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Expr::Var(_) | Expr::Unit | Expr::Int(_) => {}
            Expr::Binop(_, a, b) => {
                a.collect_fv(bound, out);
                b.collect_fv(bound, out);
            }
            Expr::If0(a, b, c) => {
                a.collect_fv(bound, out);
                b.collect_fv(bound, out);
                c.collect_fv(bound, out);
            }
            Expr::Lam(l) => {
                fv_all(&l.phi_in, bound, out);
                fv_all(&l.phi_out, bound, out);
                for (_, t) in &l.params {
                    t.collect_fv(bound, out);
                }
                l.body.collect_fv(bound, out);
            }
            Expr::App(f, args) => {
                f.collect_fv(bound, out);
                fv_all(args, bound, out);
            }
            Expr::Fold(t, e) => {
                t.collect_fv(bound, out);
                e.collect_fv(bound, out);
            }
            Expr::Unfold(e) | Expr::Proj(_, e) => e.collect_fv(bound, out),
            Expr::Tuple(es) => fv_all(es, bound, out),
            Expr::Boundary(t, c) => {
                t.collect_fv(bound, out);
                c.collect_fv(bound, out);
            }
        }
    }
    fn apply(&self, s: &Subst) -> Expr {
        match self {
            Expr::Var(_) | Expr::Unit | Expr::Int(_) => self.clone(),
            Expr::Binop(p, a, b) => Expr::Binop(*p, Box::new(a.apply(s)), Box::new(b.apply(s))),
            Expr::If0(a, b, c) => Expr::If0(
                Box::new(a.apply(s)),
                Box::new(b.apply(s)),
                Box::new(c.apply(s)),
            ),
            Expr::Lam(l) => Expr::Lam(Lambda {
                phi_in: l.phi_in.iter().map(|t| t.apply(s)).collect(),
                phi_out: l.phi_out.iter().map(|t| t.apply(s)).collect(),
                params: l.params.iter().map(|(x, t)| (x.clone(), t.apply(s))).collect(),
                body: Box::new(l.body.apply(s)),
            }),
            Expr::App(f, args) => Expr::App(
                Box::new(f.apply(s)),
                args.iter().map(|a| a.apply(s)).collect(),
            ),
            Expr::Fold(t, e) => Expr::Fold(t.apply(s), Box::new(e.apply(s))),
            Expr::Unfold(e) => Expr::Unfold(Box::new(e.apply(s))),
            Expr::Proj(i, e) => Expr::Proj(*i, Box::new(e.apply(s))),
            Expr::Tuple(es) => Expr::Tuple(es.iter().map(|e| e.apply(s)).collect()),
            Expr::Boundary(t, c) => Expr::Boundary(t.apply(s), Box::new(c.apply(s))),
        }
    }
    fn alpha(&self, other: &Expr, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (Expr::Var(x), Expr::Var(y)) => env.same_term(x, y),
            (Expr::Unit, Expr::Unit) => true,
            (Expr::Int(a), Expr::Int(b)) => a == b,
            (Expr::Binop(p, a, b), Expr::Binop(p2, a2, b2)) => {
                p == p2 && a.alpha(a2, env) && b.alpha(b2, env)
            }
            (Expr::If0(a, b, c), Expr::If0(a2, b2, c2)) => {
                a.alpha(a2, env) && b.alpha(b2, env) && c.alpha(c2, env)
            }
            (Expr::Lam(l), Expr::Lam(m)) => {
                if l.params.len() != m.params.len()
                    || !alpha_all(&l.phi_in, &m.phi_in, env)
                    || !alpha_all(&l.phi_out, &m.phi_out, env)
                    || !l
                        .params
                        .iter()
                        .zip(&m.params)
                        .all(|((_, t), (_, u))| t.alpha(u, env))
                {
                    return false;
                }
                let n = env.terms.len();
                for ((x, _), (y, _)) in l.params.iter().zip(&m.params) {
                    env.terms.push((x.clone(), y.clone()));
                }
                let r = l.body.alpha(&m.body, env);
                env.terms.truncate(n);
                r
            }
            (Expr::App(f, a), Expr::App(g, b)) => f.alpha(g, env) && alpha_all(a, b, env),
            (Expr::Fold(t, e), Expr::Fold(u, f)) => t.alpha(u, env) && e.alpha(f, env),
            (Expr::Unfold(e), Expr::Unfold(f)) => e.alpha(f, env),
            (Expr::Proj(i, e), Expr::Proj(j, f)) => i == j && e.alpha(f, env),
            (Expr::Tuple(a), Expr::Tuple(b)) => alpha_all(a, b, env),
            (Expr::Boundary(t, c), Expr::Boundary(u, d)) => t.alpha(u, env) && c.alpha(d, env),
            _ => false,
        }
    }
}

impl Syntax for Program {
    fn collect_fv(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Program::Expr(e) => e.collect_fv(bound, out),
            Program::Component(c) => c.collect_fv(bound, out),
        }
    }
    fn apply(&self, s: &Subst) -> Program {
        match self {
            Program::Expr(e) => Program::Expr(e.apply(s)),
            Program::Component(c) => Program::Component(c.apply(s)),
        }
    }
    fn alpha(&self, other: &Program, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (Program::Expr(a), Program::Expr(b)) => a.alpha(b, env),
            (Program::Component(a), Program::Component(b)) => a.alpha(b, env),
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// F term variables

/// Substitute closed F values for term variables, respecting shadowing by
/// lambda parameters. Reaches into embedded T code (`import` bodies).
pub fn subst_terms(e: &Expr, env: &[(Name, Expr)]) -> Expr {
    if env.is_empty() {
        return e.clone();
    }
    match e {
        Expr::Var(x) => env
            .iter()
            .rev()
            .find(|(y, _)| y == x)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| e.clone()),
        Expr::Unit | Expr::Int(_) => e.clone(),
        Expr::Binop(p, a, b) => Expr::Binop(
            *p,
            Box::new(subst_terms(a, env)),
            Box::new(subst_terms(b, env)),
        ),
        Expr::If0(a, b, c) => Expr::If0(
            Box::new(subst_terms(a, env)),
            Box::new(subst_terms(b, env)),
            Box::new(subst_terms(c, env)),
        ),
        Expr::Lam(l) => {
            let inner: Vec<(Name, Expr)> = env
                .iter()
                .filter(|(x, _)| !l.params.iter().any(|(p, _)| p == x))
                .cloned()
                .collect();
            Expr::Lam(Lambda {
                body: Box::new(subst_terms(&l.body, &inner)),
                ..l.clone()
            })
        }
        Expr::App(f, args) => Expr::App(
            Box::new(subst_terms(f, env)),
            args.iter().map(|a| subst_terms(a, env)).collect(),
        ),
        Expr::Fold(t, x) => Expr::Fold(t.clone(), Box::new(subst_terms(x, env))),
        Expr::Unfold(x) => Expr::Unfold(Box::new(subst_terms(x, env))),
        Expr::Proj(i, x) => Expr::Proj(*i, Box::new(subst_terms(x, env))),
        Expr::Tuple(es) => Expr::Tuple(es.iter().map(|x| subst_terms(x, env)).collect()),
        Expr::Boundary(t, c) => Expr::Boundary(t.clone(), Box::new(subst_terms_component(c, env))),
    }
}

pub fn subst_terms_component(c: &Component, env: &[(Name, Expr)]) -> Component {
    Component {
        seq: subst_terms_seq(&c.seq, env),
        heap: c
            .heap
            .iter()
            .map(|(l, h)| {
                let h = match h {
                    HeapValue::Code(b) => HeapValue::Code(CodeBlock {
                        ty: b.ty.clone(),
                        body: subst_terms_seq(&b.body, env),
                    }),
                    t => t.clone(),
                };
                (l.clone(), h)
            })
            .collect(),
    }
}

pub fn subst_terms_seq(s: &Seq, env: &[(Name, Expr)]) -> Seq {
    Seq {
        instrs: s
            .instrs
            .iter()
            .map(|i| match i {
                Instr::Import(im) => Instr::Import(Import {
                    body: Box::new(subst_terms(&im.body, env)),
                    ..im.clone()
                }),
                _ => i.clone(),
            })
            .collect(),
        term: s.term.clone(),
    }
}

/// Free F term variables of an expression (including those under `import`).
pub fn free_term_vars(e: &Expr) -> BTreeSet<Name> {
    fn go(e: &Expr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match e {
            Expr::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Expr::Unit | Expr::Int(_) => {}
            Expr::Binop(_, a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Expr::If0(a, b, c) => {
                go(a, bound, out);
                go(b, bound, out);
                go(c, bound, out);
            }
            Expr::Lam(l) => {
                let n = bound.len();
                bound.extend(l.params.iter().map(|(x, _)| x.clone()));
                go(&l.body, bound, out);
                bound.truncate(n);
            }
            Expr::App(f, args) => {
                go(f, bound, out);
                for a in args {
                    go(a, bound, out);
                }
            }
            Expr::Fold(_, x) | Expr::Unfold(x) | Expr::Proj(_, x) => go(x, bound, out),
            Expr::Tuple(es) => {
                for x in es {
                    go(x, bound, out);
                }
            }
            Expr::Boundary(_, c) => {
                let seqs = std::iter::once(&c.seq).chain(c.heap.iter().filter_map(|(_, h)| match h {
                    HeapValue::Code(b) => Some(&b.body),
                    _ => None,
                }));
                for s in seqs {
                    for i in &s.instrs {
                        if let Instr::Import(im) = i {
                            go(&im.body, bound, out);
                        }
                    }
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(e, &mut Vec::new(), &mut out);
    out
}
