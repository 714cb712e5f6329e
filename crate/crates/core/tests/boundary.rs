use ftal::boundary::*;
use ftal::corpus;
use ftal::machine::{heap_typing, Machine, Memory, Outcome};
use ftal::parser::*;
use ftal::syntax::*;
use ftal::typeck::{check_expression, check_small_value, TypingContext};
use proptest::prelude::*;

fn ty(s: &str) -> Type {
    parse_type(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn expr(s: &str) -> Expr {
    parse_expr(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

/// The type the checker assigns to `w` given the runtime heap.
fn word_type(mem: &Memory, w: &Word) -> Type {
    let mut ctx = TypingContext::new(Stack::empty(), Marker::halt(Type::Unit, Stack::empty()));
    ctx.psi = heap_typing(mem);
    check_small_value(&ctx, &Small::Word(w.clone())).unwrap_or_else(|e| panic!("{}: {e}", word_str(w)))
}

fn run_with(mem: Memory, e: Expr) -> Outcome {
    let mut m = Machine::new(&Program::Expr(e));
    m.mem = mem;
    m.run(100_000)
}

#[test]
fn type_translation() {
    assert_eq!(translate_type(&Type::Int).unwrap(), Type::Int);
    assert_eq!(translate_type(&ty("<int, unit>")).unwrap(), ty("box <int, unit>"));
    assert!(alpha_equal(
        &translate_type(&ty("(int) -> int")).unwrap(),
        &ty("box code[z, e]{ra: box code[]{r1: int; z} e; int :: z} ra"),
    ));
    assert!(translate_type(&ty("ref <int>")).is_err());
}

#[test]
fn stack_modifying_arrow_translation_keeps_the_prefixes() {
    let t = translate_type(&ty("(int)[unit :: . => int :: .] -> unit")).unwrap();
    let c = t.as_code().expect("code pointer");
    assert_eq!(c.sigma.prefix, vec![Type::Int, Type::Unit]);
    let cont = c.chi.get(Reg::Ra).and_then(Type::as_code).expect("continuation");
    assert_eq!(cont.sigma.prefix, vec![Type::Int]);
}

#[test]
fn translation_avoids_capturing_free_stack_names() {
    let t = translate_type(&ty("(int)[box code[]{r1: int; z} ret(int, z) :: . => .] -> int")).unwrap();
    let c = t.as_code().unwrap();
    assert!(!c.delta.contains(&TyVar::stack("z")));
    assert!(free_vars(&t).contains(&TyVar::stack("z")));
}

#[test]
fn export_first_order_values() {
    let mut mem = Memory::new();
    assert_eq!(export_value(&Type::Int, &Expr::int(5), &mut mem).unwrap(), Word::int(5));
    assert!(mem.heap.is_empty());

    let w = export_value(&ty("<int>"), &Expr::Tuple(vec![Expr::int(7)]), &mut mem).unwrap();
    let Word::Loc(l) = &w else { panic!("tuple exports to a location") };
    assert_eq!(mem.heap[l], HeapValue::Tuple(Mutability::Box, vec![Word::int(7)]));
}

#[test]
fn export_function_allocates_one_wrapper() {
    let mut mem = Memory::new();
    let w = export_value(&ty("(int) -> int"), &expr("lam (x: int). x"), &mut mem).unwrap();
    assert_eq!(mem.heap.len(), 1);
    assert!(matches!(mem.heap.values().next(), Some(HeapValue::Code(_))));
    assert!(alpha_equal(&word_type(&mem, &w), &translate_type(&ty("(int) -> int")).unwrap()));

    let back = import_value(&ty("(int) -> int"), &w, &mut mem).unwrap();
    for n in [-4, 0, 9] {
        let out = run_with(mem.clone(), Expr::app(back.clone(), vec![Expr::int(n)]));
        assert_eq!(out, Outcome::Value(Expr::int(n)));
    }
}

#[test]
fn import_first_order_values() {
    let mut mem = Memory::new();
    assert_eq!(import_value(&Type::Int, &Word::int(5), &mut mem).unwrap(), Expr::int(5));
    let l = mem.alloc("l", HeapValue::Tuple(Mutability::Box, vec![Word::int(1), Word::int(2)]));
    assert_eq!(
        import_value(&ty("<int, int>"), &Word::loc(l), &mut mem).unwrap(),
        Expr::Tuple(vec![Expr::int(1), Expr::int(2)])
    );
}

#[test]
fn import_rejects_mismatched_words() {
    let mut mem = Memory::new();
    assert!(import_value(&Type::Int, &Word::Unit, &mut mem).is_err());
    assert!(import_value(&ty("<int>"), &Word::loc("nowhere"), &mut mem).is_err());
    let l = mem.alloc("l", HeapValue::Tuple(Mutability::Ref, vec![Word::int(1)]));
    assert!(import_value(&ty("<int>"), &Word::loc(l), &mut mem).is_err());
}

#[test]
fn imported_jit_block_doubles() {
    let Program::Expr(Expr::App(f, _)) = parse_program(corpus::program("jit").unwrap().source).unwrap() else {
        panic!("jit is an application")
    };
    let Expr::Boundary(_, comp) = f.as_ref() else { panic!("jit applies a boundary") };
    let mut mem = Memory::new();
    for (l, h) in &comp.heap {
        mem.heap.insert(l.clone(), h.clone());
    }
    let h = import_value(&ty("(int) -> int"), &Word::loc("lh"), &mut mem).unwrap();
    let out = run_with(mem, Expr::app(h, vec![Expr::int(1)]));
    assert_eq!(out, Outcome::Value(Expr::int(2)));
}

#[test]
fn imported_function_typechecks_at_its_f_type() {
    let mut mem = Memory::new();
    let t = ty("(int, int) -> int");
    let w = export_value(&t, &expr("lam (x: int, y: int). x - y"), &mut mem).unwrap();
    let back = import_value(&t, &w, &mut mem).unwrap();
    let mut ctx = TypingContext::new(Stack::empty(), Marker::Out);
    ctx.psi = heap_typing(&mem);
    let (got, _) = check_expression(&ctx, &back).unwrap();
    assert!(alpha_equal(&got, &t));
    let out = run_with(mem, Expr::app(back, vec![Expr::int(10), Expr::int(3)]));
    assert_eq!(out, Outcome::Value(Expr::int(7)));
}

#[test]
fn stack_modifying_function_round_trip() {
    let Program::Expr(push7) = parse_program(corpus::program("push7_stack_lambda").unwrap().source).unwrap() else {
        panic!()
    };
    let t = ty("(int)[. => int :: .] -> unit");
    let mut mem = Memory::new();
    let w = export_value(&t, &push7, &mut mem).unwrap();
    assert!(alpha_equal(&word_type(&mem, &w), &translate_type(&t).unwrap()));
    let back = import_value(&t, &w, &mut mem).unwrap();
    let mut m = Machine::new(&Program::Expr(Expr::app(back, vec![Expr::int(3)])));
    m.mem = mem;
    assert_eq!(m.run(100_000), Outcome::Value(Expr::Unit));
    assert_eq!(m.mem.depth(), 1);
    assert_eq!(m.mem.slot(0), Some(&Word::int(7)));
}

fn f_value() -> impl Strategy<Value = (Type, Expr)> {
    let leaf = prop_oneof![
        Just((Type::Unit, Expr::Unit)),
        (-1000i64..1000).prop_map(|n| (Type::Int, Expr::int(n))),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(|vs| {
                let (ts, es): (Vec<_>, Vec<_>) = vs.into_iter().unzip();
                (Type::Tuple(ts), Expr::Tuple(es))
            }),
            inner.prop_map(|(t, e)| {
                let mu = Type::Mu("a".into(), Box::new(Type::Tuple(vec![t])));
                (mu.clone(), Expr::Fold(mu, Box::new(Expr::Tuple(vec![e]))))
            }),
        ]
    })
}

proptest! {
    #[test]
    fn first_order_values_round_trip((t, v) in f_value()) {
        let mut mem = Memory::new();
        let w = export_value(&t, &v, &mut mem).unwrap();
        prop_assert!(alpha_equal(&word_type(&mem, &w), &translate_type(&t).unwrap()));
        prop_assert_eq!(import_value(&t, &w, &mut mem).unwrap(), v);
    }

    #[test]
    fn exported_affine_functions_agree(a in -20i64..20, b in -20i64..20, n in -50i64..50) {
        let t = ty("(int) -> int");
        let f = expr(&format!("lam (x: int). x * {a} + {b}"));
        let mut mem = Memory::new();
        let w = export_value(&t, &f, &mut mem).unwrap();
        let back = import_value(&t, &w, &mut mem).unwrap();
        let out = run_with(mem, Expr::app(back, vec![Expr::int(n)]));
        prop_assert_eq!(out, Outcome::Value(Expr::int(n * a + b)));
    }
}
