//! Type checking for T instruction sequences and components, F expressions,
//! and the boundaries between them.
//!
//! The out-stack of an `FT[τ](..)` boundary is not written in the source, so
//! the checker opens a hole for it and fills the hole at the first comparison
//! against the halting marker (a `halt`, a halting `call`, or a jump target).
//! A bare T program gets a hole for its result type as well.

mod f;
mod tal;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::syntax::*;

pub use tal::check_heap_fragment;

/// Static heap typing Ψ: label to mutability and heap-value type.
pub type HeapTyping = BTreeMap<Name, (Mutability, HeapType)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    WfRet,
    Val,
    Seq,
    Heap,
    Component,
    Expr,
    Kind,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::WfRet => "E-WFRET",
            ErrorCode::Val => "E-VAL",
            ErrorCode::Seq => "E-SEQ",
            ErrorCode::Heap => "E-HEAP",
            ErrorCode::Component => "E-COMPONENT",
            ErrorCode::Expr => "E-EXPR",
            ErrorCode::Kind => "KindError",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rejected program. `code` and `rule` describe the innermost failure;
/// `context` lists the enclosing constructs, innermost first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeError {
    pub code: ErrorCode,
    pub rule: String,
    pub construct: String,
    pub message: String,
    pub context: Vec<String>,
}

impl TypeError {
    pub fn new(
        code: ErrorCode,
        rule: impl Into<String>,
        construct: impl Into<String>,
        message: impl Into<String>,
    ) -> TypeError {
        TypeError {
            code,
            rule: rule.into(),
            construct: construct.into(),
            message: message.into(),
            context: Vec::new(),
        }
    }

    pub fn within(mut self, frame: impl Into<String>) -> TypeError {
        self.context.push(frame.into());
        self
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.code, self.rule, self.message)?;
        if !self.construct.is_empty() {
            write!(f, "\n  at: {}", self.construct)?;
        }
        for c in &self.context {
            write!(f, "\n  in {c}")?;
        }
        Ok(())
    }
}

impl std::error::Error for TypeError {}

impl From<KindError> for TypeError {
    fn from(e: KindError) -> Self {
        TypeError::new(ErrorCode::Kind, "kind", e.var.clone(), e.to_string())
    }
}

pub type TResult<T> = Result<T, TypeError>;

/// The postcondition of a single instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstructionPost {
    pub delta: Vec<TyVar>,
    pub chi: RegFile,
    pub sigma: Stack,
    pub marker: Marker,
}

/// Ψ; Δ; Γ; χ; σ; q, plus the stack aliases introduced by `protect` in the
/// current component (the protected tail each abstract variable stands for).
#[derive(Clone, Debug, Default)]
pub struct TypingContext {
    pub psi: HeapTyping,
    pub delta: Vec<TyVar>,
    pub gamma: Vec<(Name, Type)>,
    pub chi: RegFile,
    pub sigma: Stack,
    pub marker: Option<Marker>,
    aliases: Vec<(Name, Stack)>,
}

impl TypingContext {
    /// The empty context with the given stack and marker.
    pub fn new(sigma: Stack, marker: Marker) -> Self {
        TypingContext {
            sigma,
            marker: Some(marker),
            ..Default::default()
        }
    }

    pub fn q(&self) -> &Marker {
        self.marker.as_ref().unwrap_or(&Marker::Out)
    }

    fn has_var(&self, v: &TyVar) -> bool {
        self.delta.contains(v)
    }

    fn lookup(&self, x: &str) -> Option<&Type> {
        self.gamma.iter().rev().find(|(y, _)| y == x).map(|(_, t)| t)
    }

    /// Rewrite protect-introduced variables back to the tails they hide.
    fn outer<T: Syntax>(&self, x: &T) -> T {
        let mut out = x.clone();
        for (z, s) in self.aliases.iter().rev() {
            out = substitute(&out, &TyVar::stack(z.clone()), Omega::Stack(s.clone()))
                .expect("stack for stack variable");
        }
        out
    }
}

/// Hole storage for inferred boundary out-stacks and top-level result types.
#[derive(Debug, Default)]
pub struct Holes {
    stacks: RefCell<Vec<Option<Stack>>>,
    types: RefCell<Vec<Option<Type>>>,
}

const STACK_HOLE: &str = "?out#";
const TYPE_HOLE: &str = "?ty#";

fn hole_index(name: &str, prefix: &str) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok()
}

fn is_hole_name(name: &str) -> bool {
    name.starts_with('?')
}

impl Holes {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh_stack(&self) -> Stack {
        let mut v = self.stacks.borrow_mut();
        v.push(None);
        Stack::var(format!("{STACK_HOLE}{}", v.len() - 1))
    }

    fn fresh_type(&self) -> Type {
        let mut v = self.types.borrow_mut();
        v.push(None);
        Type::Var(format!("{TYPE_HOLE}{}", v.len() - 1))
    }

    fn stack_hole(s: &Stack) -> Option<usize> {
        match &s.tail {
            Tail::Var(n) if s.prefix.is_empty() => hole_index(n, STACK_HOLE),
            _ => None,
        }
    }

    fn type_hole(t: &Type) -> Option<usize> {
        match t {
            Type::Var(n) => hole_index(n, TYPE_HOLE),
            _ => None,
        }
    }

    pub fn resolve_stack(&self, s: &Stack) -> Option<Stack> {
        match Self::stack_hole(s) {
            Some(i) => self.stacks.borrow()[i].clone(),
            None => Some(s.clone()),
        }
    }

    pub fn resolve_type(&self, t: &Type) -> Option<Type> {
        match Self::type_hole(t) {
            Some(i) => self.types.borrow()[i].clone(),
            None => Some(t.clone()),
        }
    }

    fn unify_stack(&self, a: &Stack, b: &Stack) -> bool {
        for (x, y) in [(a, b), (b, a)] {
            if let Some(i) = Self::stack_hole(x) {
                let bound = self.stacks.borrow()[i].clone();
                return match bound {
                    Some(s) => self.unify_stack(&s, y),
                    None => {
                        self.stacks.borrow_mut()[i] = Some(y.clone());
                        true
                    }
                };
            }
        }
        alpha_equal(a, b)
    }

    fn unify_type(&self, a: &Type, b: &Type) -> bool {
        for (x, y) in [(a, b), (b, a)] {
            if let Some(i) = Self::type_hole(x) {
                let bound = self.types.borrow()[i].clone();
                return match bound {
                    Some(t) => self.unify_type(&t, y),
                    None => {
                        self.types.borrow_mut()[i] = Some(y.clone());
                        true
                    }
                };
            }
        }
        alpha_equal(a, b)
    }

    /// Compare two markers, reading both through the context's protect
    /// aliases and filling any open holes.
    fn unify_marker(&self, ctx: &TypingContext, a: &Marker, b: &Marker) -> bool {
        let (a, b) = (ctx.outer(a), ctx.outer(b));
        match (&a, &b) {
            (Marker::Halt(ta, sa), Marker::Halt(tb, sb)) => {
                self.unify_type(ta, tb) && self.unify_stack(sa, sb)
            }
            _ => alpha_equal(&a, &b),
        }
    }
}

// ---------------------------------------------------------------------------
// Metafunctions

/// The continuation code type `∀[]{r':τ; σ'} q'` behind a box pointer.
fn continuation(t: &Type) -> Option<&CodeType> {
    let ct = t.as_code()?;
    (ct.delta.is_empty() && ct.chi.0.len() == 1).then_some(ct)
}

/// The continuation code type stored at marker `q`.
pub fn ret_addr_type(q: &Marker, chi: &RegFile, sigma: &Stack) -> Option<CodeType> {
    let t = match q {
        Marker::Reg(r) => chi.get(*r)?,
        Marker::Index(i) => sigma.get(*i)?,
        _ => return None,
    };
    continuation(t).cloned()
}

/// The value type and stack that the return continuation at `q` expects.
pub fn typeof_marker(q: &Marker, chi: &RegFile, sigma: &Stack) -> Option<(Type, Stack)> {
    match q {
        Marker::Halt(t, s) => Some(((**t).clone(), (**s).clone())),
        Marker::Reg(_) | Marker::Index(_) => {
            let ct = ret_addr_type(q, chi, sigma)?;
            let (_, t) = ct.chi.iter().next()?;
            Some((t.clone(), ct.sigma.clone()))
        }
        Marker::Var(_) | Marker::Out => None,
    }
}

/// Width subtyping on register files: every register `sub` requires is
/// present in `have` at an alpha-equal type.
pub fn regfile_subtype(have: &RegFile, want: &RegFile) -> bool {
    want.iter()
        .all(|(r, t)| have.get(*r).is_some_and(|h| alpha_equal(h, t)))
}

pub fn wf_return_marker(
    outer: &[TyVar],
    delta: &[TyVar],
    chi: &RegFile,
    sigma: &Stack,
    q: &Marker,
) -> TResult<()> {
    let err = |rule: &str, msg: String| {
        Err(TypeError::new(ErrorCode::WfRet, rule, marker_str(q), msg))
    };
    match q {
        Marker::Var(e) => {
            let v = TyVar::marker(e.clone());
            if delta.contains(&v) && !outer.contains(&v) {
                Ok(())
            } else {
                err(
                    "epsilon-marker",
                    format!("a block cannot return through the abstract marker {e}"),
                )
            }
        }
        Marker::Reg(_) | Marker::Index(_) => {
            if typeof_marker(q, chi, sigma).is_some() {
                Ok(())
            } else {
                err(
                    "marker-not-visible",
                    format!(
                        "no return continuation visible at {} (registers {{{}}}, stack {})",
                        marker_str(q),
                        regfile_str(chi),
                        stack_str(sigma)
                    ),
                )
            }
        }
        Marker::Halt(..) | Marker::Out => Ok(()),
    }
}

/// `inc(q, d)`: shift a stack-index marker, identity otherwise.
fn inc(q: &Marker, d: isize) -> Marker {
    match q {
        Marker::Index(i) => Marker::Index((*i as isize + d).max(0) as usize),
        other => other.clone(),
    }
}

/// If `sigma` is `prefix :: tail`, return the prefix.
fn split_suffix(sigma: &Stack, tail: &Stack) -> Option<Vec<Type>> {
    if !alpha_equal(
        &Stack::new(vec![], sigma.tail.clone()),
        &Stack::new(vec![], tail.tail.clone()),
    ) {
        return None;
    }
    let n = sigma.prefix.len().checked_sub(tail.prefix.len())?;
    sigma.prefix[n..]
        .iter()
        .zip(&tail.prefix)
        .all(|(a, b)| alpha_equal(a, b))
        .then(|| sigma.prefix[..n].to_vec())
}

fn types_equal(a: &[Type], b: &[Type]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| alpha_equal(x, y))
}

fn mentions_out(t: &Type) -> bool {
    fn stack(s: &Stack) -> bool {
        s.prefix.iter().any(mentions_out)
    }
    fn marker(q: &Marker) -> bool {
        match q {
            Marker::Out => true,
            Marker::Halt(t, s) => mentions_out(t) || stack(s),
            _ => false,
        }
    }
    match t {
        Type::Var(_) | Type::Unit | Type::Int => false,
        Type::Exists(_, t) | Type::Mu(_, t) => mentions_out(t),
        Type::Ref(ts) | Type::Tuple(ts) => ts.iter().any(mentions_out),
        Type::Box(h) => match h.as_ref() {
            HeapType::Tuple(ts) => ts.iter().any(mentions_out),
            HeapType::Code(c) => {
                c.chi.iter().any(|(_, t)| mentions_out(t)) || stack(&c.sigma) || marker(&c.marker)
            }
        },
        Type::Arrow(a) => {
            a.params.iter().any(mentions_out)
                || a.phi_in.iter().chain(&a.phi_out).any(mentions_out)
                || mentions_out(&a.result)
        }
    }
}

fn duplicate_binder(t: &Type) -> Option<Name> {
    let mut found = None;
    fn walk(t: &Type, found: &mut Option<Name>) {
        match t {
            Type::Box(h) => match h.as_ref() {
                HeapType::Code(c) => {
                    let mut seen = BTreeSet::new();
                    for v in &c.delta {
                        if !seen.insert(v) {
                            *found = Some(v.name.clone());
                        }
                    }
                    c.chi.iter().for_each(|(_, t)| walk(t, found));
                    c.sigma.prefix.iter().for_each(|t| walk(t, found));
                }
                HeapType::Tuple(ts) => ts.iter().for_each(|t| walk(t, found)),
            },
            Type::Exists(_, t) | Type::Mu(_, t) => walk(t, found),
            Type::Ref(ts) | Type::Tuple(ts) => ts.iter().for_each(|t| walk(t, found)),
            Type::Arrow(a) => {
                a.params.iter().for_each(|t| walk(t, found));
                a.phi_in.iter().chain(&a.phi_out).for_each(|t| walk(t, found));
                walk(&a.result, found);
            }
            _ => {}
        }
    }
    walk(t, &mut found);
    found
}

/// Well-formedness of any syntax under Δ: every free variable is bound.
fn wf<T: Syntax>(delta: &[TyVar], x: &T) -> Result<(), String> {
    for v in free_vars(x) {
        if !is_hole_name(&v.name) && !delta.contains(&v) {
            return Err(format!("unbound {} variable {}", v.kind, v.name));
        }
    }
    Ok(())
}

/// Well-formedness of a value type: bound variables, no `out` marker inside
/// code types, distinct code binders.
fn wf_type(delta: &[TyVar], t: &Type) -> Result<(), String> {
    wf(delta, t)?;
    if mentions_out(t) {
        return Err(format!("the `out` marker cannot appear in T type {}", type_str(t)));
    }
    if let Some(n) = duplicate_binder(t) {
        return Err(format!("code type binds {n} twice"));
    }
    Ok(())
}

fn fresh_in(base: TyVar, delta: &[TyVar]) -> TyVar {
    if !delta.contains(&base) {
        return base;
    }
    fresh_var(&base, &delta.iter().cloned().collect())
}

// ---------------------------------------------------------------------------
// Entry points

/// Check a whole program. F programs start on the empty stack; a bare T
/// component starts on the empty stack with an inferred halting marker.
pub fn check_program(p: &Program) -> TResult<(Type, Stack)> {
    let holes = Holes::new();
    match p {
        Program::Expr(e) => {
            let ctx = TypingContext::new(Stack::empty(), Marker::Out);
            f::check_expr(&holes, &ctx, e)
        }
        Program::Component(c) => {
            let q = Marker::halt(holes.fresh_type(), holes.fresh_stack());
            let ctx = TypingContext::new(Stack::empty(), q.clone());
            tal::check_component(&holes, &ctx, c)?;
            resolve_halt(&holes, &q).ok_or_else(|| {
                TypeError::new(
                    ErrorCode::Component,
                    "component",
                    "",
                    "the program never halts, so its result type cannot be determined",
                )
            })
        }
    }
}

fn resolve_halt(holes: &Holes, q: &Marker) -> Option<(Type, Stack)> {
    let Marker::Halt(t, s) = q else { return None };
    Some((holes.resolve_type(t)?, holes.resolve_stack(s)?))
}

/// Type an F (or FT) expression under `ctx`, yielding its type and out-stack.
pub fn check_expression(ctx: &TypingContext, e: &Expr) -> TResult<(Type, Stack)> {
    f::check_expr(&Holes::new(), ctx, e)
}

/// Type a component under `ctx`; the result is `typeof_marker(q, χ, σ)`.
pub fn check_component(ctx: &TypingContext, c: &Component) -> TResult<(Type, Stack)> {
    let holes = Holes::new();
    tal::check_component(&holes, ctx, c)
}

pub fn check_instruction(ctx: &TypingContext, i: &Instr) -> TResult<InstructionPost> {
    let holes = Holes::new();
    tal::check_instr(&holes, ctx, i).map(|(post, _)| post)
}

pub fn check_instruction_sequence(ctx: &TypingContext, s: &Seq) -> TResult<()> {
    tal::check_seq(&Holes::new(), ctx.clone(), s.clone())
}

pub fn check_small_value(ctx: &TypingContext, u: &Small) -> TResult<Type> {
    tal::check_small(ctx, u)
}
