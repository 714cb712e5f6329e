use num_bigint::BigInt;
use proptest::prelude::*;

use ftal::corpus;
use ftal::harness::apply_to_input;
use ftal::machine::*;
use ftal::parser::{parse_expr, parse_program};
use ftal::syntax::*;
use ftal::typeck::check_program;

fn program(src: &str) -> Program {
    parse_program(src).unwrap_or_else(|e| panic!("{e}"))
}

fn bundled(name: &str) -> Program {
    program(corpus::program(name).unwrap().source)
}

fn applied(name: &str, n: i64) -> Program {
    let Program::Expr(f) = bundled(name) else { panic!("{name} is not an F function") };
    Program::Expr(apply_to_input(&f, &BigInt::from(n)).unwrap())
}

fn stuck_kind(src: &str) -> StuckKind {
    match run_program(&program(src), 1000).outcome {
        Outcome::Stuck(s) => s.kind,
        other => panic!("expected stuck, got {other}"),
    }
}

#[test]
fn f_value_takes_no_steps() {
    let r = run_program(&program("5"), 10);
    assert_eq!(r.outcome, Outcome::Value(Expr::int(5)));
    assert_eq!(r.steps, 0);
}

#[test]
fn first_step_merges_the_component_heap() {
    let mut m = Machine::new(&program("(jmp l, where l -> code[]{; *} ret(int, *). mv r1, 1; halt[int, *] r1)"));
    assert!(m.step().is_none());
    assert_eq!(m.steps(), 1);
    let labels: Vec<_> = m.mem.heap.keys().cloned().collect();
    assert_eq!(labels, vec!["l#0".to_string()]);
    let Some(HeapValue::Code(b)) = m.mem.heap_value("l#0") else { panic!("code block") };
    assert_eq!(b.body.instrs, vec![Instr::Mv(Reg::R1, Small::int(1))]);
}

#[test]
fn call_to_call_merges_every_block() {
    let mut m = Machine::new(&bundled("call_to_call"));
    m.step();
    assert_eq!(m.mem.heap.len(), 5);
}

#[test]
fn single_instructions() {
    let r = run_program(&program("(mv r1, 42; halt[int, *] r1)"), 10);
    assert_eq!(r.outcome, Outcome::Halted(Word::int(42)));
    assert_eq!(r.memory.reg(Reg::R1), Some(&Word::int(42)));

    let r = run_program(&program("(salloc 2; mv r1, 1; halt[int, unit :: unit :: *] r1)"), 10);
    assert_eq!(r.memory.depth(), 2);
    assert!(r.memory.stack_words().all(|w| *w == Word::Unit));
}

#[test]
fn boundary_halt_yields_an_f_value() {
    let r = run_program(&program("FT[int](mv r1, 2; halt[int, *] r1)"), 10);
    assert_eq!(r.outcome, Outcome::Value(Expr::int(2)));
}

#[test]
fn arithmetic_and_branches() {
    let src = "(mv r1, 6; mul r1, r1, 7; sub r1, r1, 2; bnz r1, l; halt[int, *] r1, \
               where l -> code[]{r1: int; *} ret(int, *). add r1, r1, 100; halt[int, *] r1)";
    assert_eq!(run_program(&program(src), 100).outcome, Outcome::Halted(Word::int(140)));
}

#[test]
fn tuples_and_stack_slots() {
    let src = "(mv r1, 3; salloc 2; sst 0, r1; sst 1, r1; ralloc r2, 2; mv r3, 9; st r2[1], r3; \
               ld r1, r2[1]; halt[int, *] r1)";
    let r = run_program(&program(src), 100);
    assert_eq!(r.outcome, Outcome::Halted(Word::int(9)));
    assert_eq!(r.memory.depth(), 0);
}

#[test]
fn corpus_runs() {
    let r = run_program(&bundled("call_to_call"), 10_000);
    assert_eq!(r.outcome, Outcome::Halted(Word::int(2)));
    assert_eq!(r.memory.depth(), 0);
    assert_eq!(run_program(&bundled("jit"), 10_000).outcome, Outcome::Value(Expr::int(2)));
    assert_eq!(run_program(&bundled("import_one_plus_one"), 10_000).outcome, Outcome::Halted(Word::int(2)));
    assert_eq!(run_program(&bundled("withref"), 10_000).outcome, Outcome::Value(Expr::int(42)));
    assert_eq!(run_program(&applied("factorial_f", -3), 1000).outcome, Outcome::Running);
}

#[test]
fn observations() {
    assert_eq!(observe(&applied("basic_blocks_f1", 5), 100_000), Observation::Terminated("7".into()));
    assert_eq!(observe(&applied("factorial_t", 4), 100_000), Observation::Terminated("24".into()));
    assert_eq!(observe(&applied("factorial_t", -1), 1000), Observation::RunningAfter(1000));
}

#[test]
fn push7_leaves_seven_on_the_stack() {
    let Program::Expr(f) = bundled("push7_stack_lambda") else { panic!() };
    let r = run_program(&Program::Expr(Expr::app(f, vec![Expr::int(3)])), 1000);
    assert_eq!(r.outcome, Outcome::Value(Expr::Unit));
    assert_eq!(r.memory.depth(), 1);
    assert_eq!(r.memory.slot(0), Some(&Word::int(7)));
}

#[test]
fn call_to_call_control_flow() {
    let (r, trace) = trace_program(&bundled("call_to_call"), 10_000);
    assert_eq!(r.steps, trace.len() as u64);
    let jumps: Vec<_> = trace.iter().filter_map(|ev| ev.jump).collect();
    use JumpKind::*;
    assert_eq!(jumps, vec![Call, Call, Jmp, Ret, Ret, Halt]);
    assert_eq!(trace.last().unwrap().stack_depth, 0);
}

#[test]
fn boundary_crossings_are_traced() {
    let (_, trace) = trace_program(&bundled("jit"), 10_000);
    assert!(trace.iter().any(|ev| ev.jump == Some(JumpKind::Boundary)));
    assert!(trace.iter().any(|ev| ev.lang == Lang::F));
    assert!(trace.iter().any(|ev| ev.lang == Lang::T));
}

#[test]
fn stuck_configurations() {
    assert_eq!(stuck_kind("(sld r1, 0; halt[int, *] r1)"), StuckKind::StackUnderflow);
    assert_eq!(stuck_kind("(halt[int, *] r4)"), StuckKind::UnboundRegister);
    assert_eq!(stuck_kind("(jmp nowhere)"), StuckKind::UnboundLocation);
    assert_eq!(
        stuck_kind("(jmp l, where l -> code[z]{; z} ret(int, z). mv r1, 1; halt[int, z] r1)"),
        StuckKind::UninstantiatedBinder
    );
    assert_eq!(stuck_kind("(mv r1, 1; ld r2, r1[0]; halt[int, *] r2)"), StuckKind::TypeConfusion);
    assert_eq!(stuck_kind("1 + ()"), StuckKind::TypeConfusion);
}

#[test]
fn fuel_is_counted_in_reductions() {
    let mut m = Machine::new(&applied("factorial_f", -1));
    assert_eq!(m.run(250), Outcome::Running);
    assert_eq!(m.steps(), 250);
    assert_eq!(m.run(250), Outcome::Running);
    assert_eq!(m.steps(), 500);
}

#[test]
fn heap_typing_covers_runtime_allocations() {
    let r = run_program(&bundled("withref"), 10_000);
    let psi = heap_typing(&r.memory);
    assert!(psi.values().any(|(m, h)| *m == Mutability::Ref && *h == HeapType::Tuple(vec![Type::Int])));
}

// Closed integer programs and an independent evaluator for them.
fn int_expr() -> impl Strategy<Value = Expr> {
    let leaf = (-20i64..20).prop_map(Expr::int);
    leaf.prop_recursive(5, 40, 3, |inner| {
        prop_oneof![
            (prop_oneof![Just(Prim::Add), Just(Prim::Sub), Just(Prim::Mul)], inner.clone(), inner.clone())
                .prop_map(|(p, a, b)| Expr::Binop(p, Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(c, t, f)| Expr::If0(Box::new(c), Box::new(t), Box::new(f))),
            inner.clone().prop_map(|body| Expr::app(Expr::lam(vec![("x".into(), Type::Int)], body), vec![Expr::int(1)])),
            inner.clone().prop_map(|e| Expr::Proj(0, Box::new(Expr::Tuple(vec![e, Expr::Unit])))),
            inner.prop_map(|e| {
                let src = format!("FT[int](protect ., zp; import r1, zp, int TF{{{}}}; halt[int, zp] r1)", expr_str(&e));
                parse_expr(&src).unwrap()
            }),
        ]
    })
}

fn eval(e: &Expr) -> BigInt {
    match e {
        Expr::Int(n) => n.clone(),
        Expr::Binop(p, a, b) => {
            let (a, b) = (eval(a), eval(b));
            match p {
                Prim::Add => a + b,
                Prim::Sub => a - b,
                Prim::Mul => a * b,
            }
        }
        Expr::If0(c, t, f) => {
            if eval(c) == BigInt::from(0) {
                eval(t)
            } else {
                eval(f)
            }
        }
        Expr::App(f, _) => match f.as_ref() {
            Expr::Lam(l) => eval(&l.body),
            _ => unreachable!(),
        },
        Expr::Proj(_, t) => match t.as_ref() {
            Expr::Tuple(es) => eval(&es[0]),
            _ => unreachable!(),
        },
        Expr::Boundary(_, c) => match &c.seq.instrs[1] {
            Instr::Import(im) => eval(&im.body),
            _ => unreachable!(),
        },
        _ => unreachable!("generator produced {}", expr_str(e)),
    }
}

proptest! {
    #[test]
    fn well_typed_integer_programs_evaluate_correctly(e in int_expr()) {
        let p = Program::Expr(e.clone());
        let (t, _) = check_program(&p).map_err(|err| TestCaseError::fail(err.to_string()))?;
        prop_assert_eq!(t, Type::Int);
        let out = run_program(&p, 100_000).outcome;
        prop_assert_eq!(out, Outcome::Value(Expr::Int(eval(&e))));
    }

    #[test]
    fn runs_are_deterministic(e in int_expr()) {
        let p = Program::Expr(e);
        let (a, ta) = trace_program(&p, 100_000);
        let (b, tb) = trace_program(&p, 100_000);
        prop_assert_eq!(a.outcome, b.outcome);
        prop_assert_eq!(ta, tb);
    }
}
