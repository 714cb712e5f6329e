//! Deterministic small-step machine for FT configurations.
//!
//! F terms are evaluated with an explicit stack of evaluation frames. Moving
//! focus into a subterm is bookkeeping and costs no fuel; every reduction
//! (a T instruction, an F redex, a boundary crossing, a heap merge) is one step.

pub mod labels;
mod memory;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::Zero;
use serde::Serialize;

use crate::boundary::{export_value, import_value};
use crate::syntax::*;
use crate::typeck::HeapTyping;

pub use memory::Memory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StuckKind {
    UnboundRegister,
    UnboundLocation,
    StackUnderflow,
    BadIndex,
    TypeConfusion,
    HaltOutsideBoundary,
    UninstantiatedBinder,
}

impl StuckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StuckKind::UnboundRegister => "unbound-register",
            StuckKind::UnboundLocation => "unbound-location",
            StuckKind::StackUnderflow => "stack-underflow",
            StuckKind::BadIndex => "bad-index",
            StuckKind::TypeConfusion => "type-confusion",
            StuckKind::HaltOutsideBoundary => "halt-outside-boundary",
            StuckKind::UninstantiatedBinder => "uninstantiated-binder",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stuck {
    pub kind: StuckKind,
    pub message: String,
}

impl fmt::Display for Stuck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stuck ({}): {}", self.kind.as_str(), self.message)
    }
}

fn stuck<T>(kind: StuckKind, message: impl Into<String>) -> Result<T, Stuck> {
    Err(Stuck {
        kind,
        message: message.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// An F program reduced to a value.
    Value(Expr),
    /// A bare T program halted with this word in the result register.
    Halted(Word),
    /// Fuel ran out.
    Running,
    Stuck(Stuck),
}

impl Outcome {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Outcome::Value(_) | Outcome::Halted(_))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => f.write_str(&value_str(v)),
            Outcome::Halted(w) => f.write_str(&word_str(w)),
            Outcome::Running => f.write_str("running"),
            Outcome::Stuck(s) => s.fmt(f),
        }
    }
}

/// Printed form of an F value; unit prints as `()`.
pub fn value_str(v: &Expr) -> String {
    match v {
        Expr::Unit => "()".into(),
        _ => expr_str(v),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpKind {
    Jmp,
    Call,
    Ret,
    Halt,
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Lang {
    F,
    T,
}

/// One record per reduction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub step: u64,
    pub lang: Lang,
    pub redex: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump: Option<JumpKind>,
    pub registers: BTreeMap<String, String>,
    pub stack_depth: usize,
}

#[derive(Clone, Debug)]
enum Frame {
    BinopL(Prim, Expr),
    BinopR(Prim, Expr),
    If0(Expr, Expr),
    AppFun(Vec<Expr>),
    /// Function value, evaluated arguments, remaining arguments (reversed).
    AppArg(Expr, Vec<Expr>, Vec<Expr>),
    Fold(Type),
    Unfold,
    Tuple(Vec<Expr>, Vec<Expr>),
    Proj(usize),
    /// T code running under `FT[τ]`.
    Boundary(Type),
    /// F code running under `import rd, σ, τ TF{·}; rest`.
    Import(Reg, Type, Seq),
}

#[derive(Clone, Debug)]
enum Redex {
    Binop(Prim, Expr, Expr),
    If0(Expr, Expr, Expr),
    App(Expr, Vec<Expr>),
    Unfold(Expr),
    Proj(usize, Expr),
    Export(Reg, Type, Expr, Seq),
}

#[derive(Clone, Debug)]
enum Focus {
    Expr(Expr),
    Value(Expr),
    Seq(Seq),
    Component(Component),
    Redex(Redex),
}

pub struct Machine {
    pub mem: Memory,
    focus: Focus,
    frames: Vec<Frame>,
    steps: u64,
    done: Option<Outcome>,
    trace: Option<Vec<TraceEvent>>,
    /// Instantiated block bodies; code in the heap never changes.
    bodies: HashMap<(Name, Vec<Omega>), Seq>,
}

impl Machine {
    pub fn new(prog: &Program) -> Machine {
        let focus = match prog {
            Program::Expr(e) => Focus::Expr(e.clone()),
            Program::Component(c) => Focus::Component(c.clone()),
        };
        Machine {
            mem: Memory::new(),
            focus,
            frames: Vec::new(),
            steps: 0,
            done: None,
            trace: None,
            bodies: HashMap::new(),
        }
    }

    pub fn with_trace(mut self) -> Machine {
        self.trace = Some(Vec::new());
        self
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Perform one reduction. Returns the final outcome once the
    /// configuration is terminal or stuck.
    pub fn step(&mut self) -> Option<Outcome> {
        if let Some(o) = &self.done {
            return Some(o.clone());
        }
        if let Some(o) = self.settle() {
            self.done = Some(o.clone());
            return Some(o);
        }
        let before = self.trace.as_ref().map(|_| self.mem.regs.clone());
        match self.reduce() {
            Ok(info) => {
                self.steps += 1;
                if let (Some(before), Some((lang, redex, jump))) = (before, info) {
                    let registers = self
                        .mem
                        .regs
                        .iter()
                        .filter(|(r, w)| before.get(r) != Some(w))
                        .map(|(r, w)| (r.name().to_string(), word_str(w)))
                        .collect();
                    let ev = TraceEvent {
                        step: self.steps,
                        lang,
                        redex,
                        jump,
                        registers,
                        stack_depth: self.mem.depth(),
                    };
                    self.trace.as_mut().expect("tracing").push(ev);
                }
                self.done.clone()
            }
            Err(s) => {
                let o = Outcome::Stuck(s);
                self.done = Some(o.clone());
                Some(o)
            }
        }
    }

    /// Run for at most `fuel` reductions.
    pub fn run(&mut self, fuel: u64) -> Outcome {
        let start = self.steps;
        while self.steps - start < fuel {
            if let Some(o) = self.step() {
                return o;
            }
        }
        if let Some(o) = &self.done {
            return o.clone();
        }
        match self.settle() {
            Some(o) => {
                self.done = Some(o.clone());
                o
            }
            None => Outcome::Running,
        }
    }

    /// Bookkeeping moves up to the next redex. Returns the outcome if the
    /// configuration is terminal.
    fn settle(&mut self) -> Option<Outcome> {
        loop {
            let focus = std::mem::replace(&mut self.focus, Focus::Value(Expr::Unit));
            self.focus = match focus {
                Focus::Expr(e) => match self.descend(e) {
                    Ok(f) => f,
                    Err(s) => return Some(Outcome::Stuck(s)),
                },
                Focus::Value(v) => match self.frames.pop() {
                    None => {
                        self.focus = Focus::Value(v.clone());
                        return Some(Outcome::Value(v));
                    }
                    Some(fr) => match self.plug(fr, v) {
                        Ok(f) => f,
                        Err(s) => return Some(Outcome::Stuck(s)),
                    },
                },
                Focus::Component(c) if c.heap.is_empty() => Focus::Seq(c.seq),
                Focus::Seq(mut s) if matches!(s.instrs.first(), Some(Instr::Import(_))) => {
                    let Instr::Import(im) = s.instrs.remove(0) else {
                        unreachable!()
                    };
                    self.frames.push(Frame::Import(im.rd, im.ty, s));
                    Focus::Expr(*im.body)
                }
                other => {
                    self.focus = other;
                    return None;
                }
            };
        }
    }

    fn descend(&mut self, e: Expr) -> Result<Focus, Stuck> {
        if e.is_value() {
            return Ok(Focus::Value(e));
        }
        Ok(match e {
            Expr::Binop(p, a, b) => {
                self.frames.push(Frame::BinopL(p, *b));
                Focus::Expr(*a)
            }
            Expr::If0(c, t, f) => {
                self.frames.push(Frame::If0(*t, *f));
                Focus::Expr(*c)
            }
            Expr::App(f, args) => {
                self.frames.push(Frame::AppFun(args));
                Focus::Expr(*f)
            }
            Expr::Fold(t, x) => {
                self.frames.push(Frame::Fold(t));
                Focus::Expr(*x)
            }
            Expr::Unfold(x) => {
                self.frames.push(Frame::Unfold);
                Focus::Expr(*x)
            }
            Expr::Proj(i, x) => {
                self.frames.push(Frame::Proj(i));
                Focus::Expr(*x)
            }
            Expr::Tuple(xs) => {
                let mut done = Vec::new();
                let mut rest: Vec<Expr> = xs.into_iter().rev().collect();
                loop {
                    match rest.pop() {
                        Some(x) if x.is_value() => done.push(x),
                        Some(x) => {
                            self.frames.push(Frame::Tuple(done, rest));
                            return Ok(Focus::Expr(x));
                        }
                        None => unreachable!("a tuple of values is a value"),
                    }
                }
            }
            Expr::Boundary(t, c) => {
                self.frames.push(Frame::Boundary(t));
                Focus::Component(*c)
            }
            Expr::Var(x) => return stuck(StuckKind::TypeConfusion, format!("free variable {x}")),
            Expr::Unit | Expr::Int(_) | Expr::Lam(_) => unreachable!("values handled above"),
        })
    }

    fn plug(&mut self, fr: Frame, v: Expr) -> Result<Focus, Stuck> {
        Ok(match fr {
            Frame::BinopL(p, b) => {
                self.frames.push(Frame::BinopR(p, v));
                Focus::Expr(b)
            }
            Frame::BinopR(p, a) => Focus::Redex(Redex::Binop(p, a, v)),
            Frame::If0(t, f) => Focus::Redex(Redex::If0(v, t, f)),
            Frame::AppFun(args) => self.next_arg(v, Vec::new(), args.into_iter().rev().collect()),
            Frame::AppArg(f, mut done, rest) => {
                done.push(v);
                self.next_arg(f, done, rest)
            }
            Frame::Fold(t) => Focus::Value(Expr::Fold(t, Box::new(v))),
            Frame::Unfold => Focus::Redex(Redex::Unfold(v)),
            Frame::Proj(i) => Focus::Redex(Redex::Proj(i, v)),
            Frame::Tuple(mut done, mut rest) => {
                done.push(v);
                loop {
                    match rest.pop() {
                        Some(x) if x.is_value() => done.push(x),
                        Some(x) => {
                            self.frames.push(Frame::Tuple(done, rest));
                            return Ok(Focus::Expr(x));
                        }
                        None => return Ok(Focus::Value(Expr::Tuple(done))),
                    }
                }
            }
            Frame::Import(rd, t, rest) => Focus::Redex(Redex::Export(rd, t, v, rest)),
            Frame::Boundary(_) => {
                return stuck(StuckKind::TypeConfusion, "F value returned into T code");
            }
        })
    }

    fn next_arg(&mut self, f: Expr, done: Vec<Expr>, mut rest: Vec<Expr>) -> Focus {
        match rest.pop() {
            Some(x) => {
                self.frames.push(Frame::AppArg(f, done, rest));
                Focus::Expr(x)
            }
            None => Focus::Redex(Redex::App(f, done)),
        }
    }

    fn reduce(&mut self) -> Result<Option<(Lang, String, Option<JumpKind>)>, Stuck> {
        let focus = std::mem::replace(&mut self.focus, Focus::Value(Expr::Unit));
        match focus {
            Focus::Redex(r) => {
                let shown = if self.trace.is_some() { redex_str(&r) } else { String::new() };
                let (lang, jump) = match r {
                    Redex::Export(..) => (Lang::T, Some(JumpKind::Boundary)),
                    _ => (Lang::F, None),
                };
                self.focus = self.reduce_f(r)?;
                Ok(Some((lang, shown, jump)))
            }
            Focus::Component(c) => {
                let shown = format!(
                    "merge {}",
                    c.heap.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>().join(", ")
                );
                self.focus = Focus::Seq(self.merge(c));
                Ok(Some((Lang::T, shown, None)))
            }
            Focus::Seq(s) => self.reduce_t(s).map(Some),
            Focus::Expr(_) | Focus::Value(_) => unreachable!("settle stops at redexes"),
        }
    }

    fn merge(&mut self, c: Component) -> Seq {
        let mut map = labels::LabelMap::new();
        for (l, _) in &c.heap {
            let fresh = self.mem.fresh_label(l);
            map.insert(l.clone(), fresh);
        }
        for (l, h) in &c.heap {
            self.mem.heap.insert(map[l].clone(), labels::heap_value(h, &map));
        }
        labels::seq(&c.seq, &map)
    }

    fn reduce_f(&mut self, r: Redex) -> Result<Focus, Stuck> {
        Ok(match r {
            Redex::Binop(p, a, b) => match (a, b) {
                (Expr::Int(x), Expr::Int(y)) => Focus::Value(Expr::Int(p.apply(&x, &y))),
                _ => return stuck(StuckKind::TypeConfusion, format!("{} on non-integers", p.symbol())),
            },
            Redex::If0(c, t, f) => match c {
                Expr::Int(n) => Focus::Expr(if n.is_zero() { t } else { f }),
                _ => return stuck(StuckKind::TypeConfusion, "if0 on a non-integer"),
            },
            Redex::App(f, args) => match f {
                Expr::Lam(l) if l.params.len() == args.len() => {
                    let env: Vec<(Name, Expr)> = l.params.iter().map(|(x, _)| x.clone()).zip(args).collect();
                    Focus::Expr(subst_terms(&l.body, &env))
                }
                Expr::Lam(_) => return stuck(StuckKind::TypeConfusion, "arity mismatch"),
                _ => return stuck(StuckKind::TypeConfusion, "application of a non-function"),
            },
            Redex::Unfold(v) => match v {
                Expr::Fold(_, inner) => Focus::Value(*inner),
                _ => return stuck(StuckKind::TypeConfusion, "unfold of a non-fold"),
            },
            Redex::Proj(i, v) => match v {
                Expr::Tuple(mut vs) if i < vs.len() => Focus::Value(vs.swap_remove(i)),
                Expr::Tuple(_) => return stuck(StuckKind::BadIndex, format!("projection {i}")),
                _ => return stuck(StuckKind::TypeConfusion, "projection from a non-tuple"),
            },
            Redex::Export(rd, t, v, mut rest) => {
                let w = export_value(&t, &v, &mut self.mem)
                    .map_err(|e| Stuck { kind: StuckKind::TypeConfusion, message: e.to_string() })?;
                rest.instrs.insert(0, Instr::Mv(rd, Small::Word(w)));
                Focus::Seq(rest)
            }
        })
    }

    fn reg(&self, r: Reg) -> Result<Word, Stuck> {
        match self.mem.reg(r) {
            Some(w) => Ok(w.clone()),
            None => stuck(StuckKind::UnboundRegister, format!("{r} is unset")),
        }
    }

    fn small(&self, u: &Small) -> Result<Word, Stuck> {
        Ok(match u {
            Small::Word(w) => w.clone(),
            Small::Reg(r) => self.reg(*r)?,
            Small::Pack(t, inner, ann) => Word::Pack(t.clone(), Box::new(self.small(inner)?), ann.clone()),
            Small::Fold(t, inner) => Word::Fold(t.clone(), Box::new(self.small(inner)?)),
            Small::Inst(inner, o) => Word::Inst(Box::new(self.small(inner)?), o.clone()),
        })
    }

    fn int(&self, r: Reg) -> Result<num_bigint::BigInt, Stuck> {
        match self.reg(r)? {
            Word::Int(n) => Ok(n),
            w => stuck(StuckKind::TypeConfusion, format!("{r} holds {}, not an integer", word_str(&w))),
        }
    }

    fn slot(&self, i: usize) -> Result<Word, Stuck> {
        match self.mem.slot(i) {
            Some(w) => Ok(w.clone()),
            None => stuck(StuckKind::StackUnderflow, format!("slot {i} of a depth-{} stack", self.mem.depth())),
        }
    }

    fn tuple(&mut self, r: Reg) -> Result<(Name, &mut HeapValue), Stuck> {
        let l = match self.reg(r)? {
            Word::Loc(l) => l,
            w => return stuck(StuckKind::TypeConfusion, format!("{r} holds {}, not a location", word_str(&w))),
        };
        match self.mem.heap.get_mut(&l) {
            Some(h @ HeapValue::Tuple(..)) => Ok((l, h)),
            Some(_) => stuck(StuckKind::TypeConfusion, format!("{l} is a code block")),
            None => stuck(StuckKind::UnboundLocation, l),
        }
    }

    /// The body of the code block `w` points to, with `extra` instantiations
    /// supplying any binders `w` leaves open.
    fn target(&mut self, w: &Word, extra: &[Omega]) -> Result<Seq, Stuck> {
        let (head, omegas) = w.head_and_instantiations();
        let l = match head {
            Word::Loc(l) => l,
            _ => return stuck(StuckKind::TypeConfusion, format!("jump to {}", word_str(w))),
        };
        let block = match self.mem.heap_value(l) {
            Some(HeapValue::Code(b)) => b,
            Some(_) => return stuck(StuckKind::TypeConfusion, format!("jump to tuple {l}")),
            None => return stuck(StuckKind::UnboundLocation, l.clone()),
        };
        let mut key: Vec<Omega> = omegas.iter().map(|o| (*o).clone()).collect();
        key.extend(extra.iter().cloned());
        let key = (l.clone(), key);
        if let Some(body) = self.bodies.get(&key) {
            return Ok(body.clone());
        }
        let delta = &block.ty.delta;
        if omegas.len() > delta.len() {
            return stuck(StuckKind::TypeConfusion, format!("{l} over-instantiated"));
        }
        let mut s = Subst::new();
        for (v, o) in delta.iter().zip(&omegas) {
            s.bind(v, (*o).clone())
                .map_err(|e| Stuck { kind: StuckKind::TypeConfusion, message: e.to_string() })?;
        }
        let mut open: Vec<&TyVar> = delta[omegas.len()..].iter().collect();
        for o in extra {
            if let Some(pos) = open.iter().position(|v| v.kind == o.kind()) {
                let v = open.remove(pos);
                s.bind(v, o.clone()).expect("kinds agree");
            }
        }
        if let Some(v) = open.first() {
            return stuck(StuckKind::UninstantiatedBinder, format!("{l} leaves {} open", v.name));
        }
        let body = apply_subst(&block.body, &s);
        self.bodies.insert(key, body.clone());
        Ok(body)
    }

    fn reduce_t(&mut self, mut s: Seq) -> Result<(Lang, String, Option<JumpKind>), Stuck> {
        if s.instrs.is_empty() {
            let shown = if self.trace.is_some() { terminator_str(&s.term) } else { String::new() };
            let (next, jump) = self.terminate(s.term)?;
            if let Some(f) = next {
                self.focus = f;
            }
            return Ok((Lang::T, shown, Some(jump)));
        }
        let i = s.instrs.remove(0);
        let shown = if self.trace.is_some() { instr_str(&i) } else { String::new() };
        let mut jump = None;
        match i {
            Instr::Aop(p, rd, rs, u) => {
                let a = self.int(rs)?;
                let b = match self.small(&u)? {
                    Word::Int(n) => n,
                    w => return stuck(StuckKind::TypeConfusion, format!("{} on {}", p.mnemonic(), word_str(&w))),
                };
                self.mem.set_reg(rd, Word::Int(p.apply(&a, &b)));
            }
            Instr::Bnz(r, u) => {
                if !self.int(r)?.is_zero() {
                    let w = self.small(&u)?;
                    s = self.target(&w, &[])?;
                    jump = Some(JumpKind::Jmp);
                }
            }
            Instr::Ld(rd, rs, i) => {
                let (l, h) = self.tuple(rs)?;
                let HeapValue::Tuple(_, ws) = h else { unreachable!() };
                let Some(w) = ws.get(i).cloned() else {
                    return stuck(StuckKind::BadIndex, format!("{l}[{i}]"));
                };
                self.mem.set_reg(rd, w);
            }
            Instr::St(rd, i, rs) => {
                let w = self.reg(rs)?;
                let (l, h) = self.tuple(rd)?;
                let HeapValue::Tuple(m, ws) = h else { unreachable!() };
                if *m != Mutability::Ref {
                    return stuck(StuckKind::TypeConfusion, format!("store into immutable {l}"));
                }
                match ws.get_mut(i) {
                    Some(slot) => *slot = w,
                    None => return stuck(StuckKind::BadIndex, format!("{l}[{i}]")),
                }
            }
            Instr::Ralloc(rd, n) | Instr::Balloc(rd, n) => {
                if self.mem.depth() < n {
                    return stuck(StuckKind::StackUnderflow, format!("allocating {n} words"));
                }
                let ws = (0..n).map(|_| self.mem.pop().expect("depth checked")).collect();
                let m = if matches!(i, Instr::Ralloc(..)) { Mutability::Ref } else { Mutability::Box };
                let l = self.mem.alloc("l", HeapValue::Tuple(m, ws));
                self.mem.set_reg(rd, Word::Loc(l));
            }
            Instr::Mv(rd, u) => {
                let w = self.small(&u)?;
                self.mem.set_reg(rd, w);
            }
            Instr::Salloc(n) => (0..n).for_each(|_| self.mem.push(Word::Unit)),
            Instr::Sfree(n) => {
                if self.mem.depth() < n {
                    return stuck(StuckKind::StackUnderflow, format!("freeing {n} words"));
                }
                (0..n).for_each(|_| {
                    self.mem.pop();
                });
            }
            Instr::Sld(rd, i) => {
                let w = self.slot(i)?;
                self.mem.set_reg(rd, w);
            }
            Instr::Sst(i, rs) => {
                let w = self.reg(rs)?;
                if !self.mem.set_slot(i, w) {
                    return stuck(StuckKind::StackUnderflow, format!("slot {i} of a depth-{} stack", self.mem.depth()));
                }
            }
            Instr::Unpack(a, rd, u) => match self.small(&u)? {
                Word::Pack(t, w, _) => {
                    self.mem.set_reg(rd, *w);
                    s = apply_subst(&s, &Subst::single(&TyVar::ty(a), Omega::Type(t)).expect("type binder"));
                }
                w => return stuck(StuckKind::TypeConfusion, format!("unpack of {}", word_str(&w))),
            },
            Instr::Unfold(rd, u) => match self.small(&u)? {
                Word::Fold(_, w) => self.mem.set_reg(rd, *w),
                w => return stuck(StuckKind::TypeConfusion, format!("unfold of {}", word_str(&w))),
            },
            Instr::Protect(..) => {}
            Instr::Import(_) => unreachable!("settle enters imports"),
        }
        self.focus = Focus::Seq(s);
        Ok((Lang::T, shown, jump))
    }

    fn terminate(&mut self, term: Terminator) -> Result<(Option<Focus>, JumpKind), Stuck> {
        Ok(match term {
            Terminator::Jmp(u) => {
                let w = self.small(&u)?;
                (Some(Focus::Seq(self.target(&w, &[])?)), JumpKind::Jmp)
            }
            Terminator::Call(u, sigma, q) => {
                let w = self.small(&u)?;
                let extra = [Omega::Stack(sigma), Omega::Marker(q)];
                (Some(Focus::Seq(self.target(&w, &extra)?)), JumpKind::Call)
            }
            Terminator::Ret(r, _) => {
                let w = self.reg(r)?;
                (Some(Focus::Seq(self.target(&w, &[])?)), JumpKind::Ret)
            }
            Terminator::Halt(_, _, r) | Terminator::RetHalt(_, _, r) => {
                let w = self.reg(r)?;
                match self.frames.pop() {
                    None => {
                        self.done = Some(Outcome::Halted(w));
                        (None, JumpKind::Halt)
                    }
                    Some(Frame::Boundary(t)) => {
                        let v = import_value(&t, &w, &mut self.mem)
                            .map_err(|e| Stuck { kind: StuckKind::TypeConfusion, message: e.to_string() })?;
                        (Some(Focus::Value(v)), JumpKind::Halt)
                    }
                    Some(_) => return stuck(StuckKind::HaltOutsideBoundary, "halt with no enclosing boundary"),
                }
            }
        })
    }
}

fn redex_str(r: &Redex) -> String {
    let s = match r {
        Redex::Binop(p, a, b) => expr_str(&Expr::Binop(*p, Box::new(a.clone()), Box::new(b.clone()))),
        Redex::If0(c, _, _) => format!("if0 {}", expr_str(c)),
        Redex::App(f, args) => {
            let arity = match f {
                Expr::Lam(l) => l.params.len(),
                _ => 0,
            };
            format!(
                "apply/{arity} ({})",
                args.iter().map(value_str).collect::<Vec<_>>().join(", ")
            )
        }
        Redex::Unfold(v) => format!("unfold {}", expr_str(v)),
        Redex::Proj(i, v) => format!("pi.{i} {}", expr_str(v)),
        Redex::Export(rd, t, v, _) => format!("import {rd}, TF[{}] {}", type_str(t), value_str(v)),
    };
    if s.chars().count() > 100 {
        let mut t: String = s.chars().take(97).collect();
        t.push_str("...");
        t
    } else {
        s
    }
}

/// Result of running a closed program under a fuel budget.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub steps: u64,
    pub memory: Memory,
}

pub fn run_program(prog: &Program, fuel: u64) -> RunResult {
    let mut m = Machine::new(prog);
    let outcome = m.run(fuel);
    RunResult {
        outcome,
        steps: m.steps,
        memory: m.mem,
    }
}

/// Run with tracing enabled.
pub fn trace_program(prog: &Program, fuel: u64) -> (RunResult, Vec<TraceEvent>) {
    let mut m = Machine::new(prog).with_trace();
    let outcome = m.run(fuel);
    let trace = m.take_trace();
    (
        RunResult {
            outcome,
            steps: m.steps,
            memory: m.mem,
        },
        trace,
    )
}

/// What an outside observer sees of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail")]
pub enum Observation {
    Terminated(String),
    RunningAfter(u64),
    Stuck(String),
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Terminated(v) => write!(f, "terminated {v}"),
            Observation::RunningAfter(n) => write!(f, "running after {n} steps"),
            Observation::Stuck(s) => write!(f, "{s}"),
        }
    }
}

pub fn observe(prog: &Program, fuel: u64) -> Observation {
    match run_program(prog, fuel).outcome {
        Outcome::Value(v) => Observation::Terminated(value_str(&v)),
        Outcome::Halted(w) => Observation::Terminated(word_str(&w)),
        Outcome::Running => Observation::RunningAfter(fuel),
        Outcome::Stuck(s) => Observation::Stuck(s.to_string()),
    }
}

/// Heap typing of a runtime heap: code blocks by annotation, tuples by the
/// types of their words. Words with no syntactic type make the tuple absent.
pub fn heap_typing(mem: &Memory) -> HeapTyping {
    let mut psi = HeapTyping::new();
    for (l, h) in &mem.heap {
        if let HeapValue::Code(b) = h {
            psi.insert(l.clone(), (Mutability::Box, HeapType::Code(b.ty.clone())));
        }
    }
    loop {
        let mut changed = false;
        for (l, h) in &mem.heap {
            if let HeapValue::Tuple(m, ws) = h {
                if psi.contains_key(l) {
                    continue;
                }
                let ts: Option<Vec<Type>> = ws.iter().map(|w| word_type(w, &psi)).collect();
                if let Some(ts) = ts {
                    psi.insert(l.clone(), (*m, HeapType::Tuple(ts)));
                    changed = true;
                }
            }
        }
        if !changed {
            return psi;
        }
    }
}

fn word_type(w: &Word, psi: &HeapTyping) -> Option<Type> {
    match w {
        Word::Unit => Some(Type::Unit),
        Word::Int(_) => Some(Type::Int),
        Word::Loc(l) => psi.get(l).map(|(m, h)| match m {
            Mutability::Box => Type::Box(Box::new(h.clone())),
            Mutability::Ref => match h {
                HeapType::Tuple(ts) => Type::Ref(ts.clone()),
                HeapType::Code(_) => Type::Box(Box::new(h.clone())),
            },
        }),
        Word::Pack(_, _, ann) => Some(ann.clone()),
        Word::Fold(t, _) => Some(t.clone()),
        Word::Inst(..) => {
            let (head, omegas) = w.head_and_instantiations();
            let Type::Box(h) = word_type(head, psi)? else { return None };
            let HeapType::Code(mut ct) = *h else { return None };
            let mut s = Subst::new();
            for (v, o) in ct.delta.iter().zip(&omegas) {
                s.bind(v, (*o).clone()).ok()?;
            }
            let rest = ct.delta.split_off(omegas.len().min(ct.delta.len()));
            let ct = CodeType { delta: rest, ..ct };
            Some(Type::code(apply_subst(&ct, &s)))
        }
    }
}
