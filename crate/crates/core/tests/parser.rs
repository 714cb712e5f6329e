use ftal::parser::*;
use ftal::syntax::*;

#[test]
fn identity_lambda() {
    let e = parse_expr("lam (x:int). x").unwrap();
    assert_eq!(e, Expr::lam(vec![("x".into(), Type::Int)], Expr::Var("x".into())));
}

#[test]
fn boundary_with_empty_heap() {
    let p = parse_program("FT[int]( mv r1, 42; halt[int, *] r1 , where )").unwrap();
    let Program::Expr(Expr::Boundary(t, c)) = p else { panic!("expected a boundary") };
    assert_eq!(t, Type::Int);
    assert!(c.heap.is_empty());
    assert_eq!(c.seq.instrs, vec![Instr::Mv(Reg::R1, Small::int(42))]);
    assert_eq!(c.seq.term, Terminator::Halt(Type::Int, Stack::empty(), Reg::R1));
}

#[test]
fn empty_input_fails_at_offset_zero() {
    let e = parse_program("").unwrap_err();
    assert_eq!(e.offset, 0);
    assert_eq!((e.line, e.column), (1, 1));
}

#[test]
fn errors_report_line_and_column() {
    let e = parse_program("(\n  mv r1, 1;\n  halt[int, *] r9\n)").unwrap_err();
    assert_eq!(e.line, 3);
    assert!(e.column > 1);
}

#[test]
fn arrow_translation_type() {
    let t = parse_type("box code[z,e]{ra: box code[]{r1:int; z} e; int::z} ra").unwrap();
    let c = t.as_code().expect("code pointer");
    assert_eq!(c.delta, vec![TyVar::stack("z"), TyVar::marker("e")]);
    assert_eq!(c.marker, Marker::Reg(Reg::Ra));
    assert_eq!(c.sigma, Stack::new(vec![Type::Int], Tail::Var("z".into())));
}

#[test]
fn recursive_and_reference_types() {
    assert_eq!(
        parse_type("mu a. (a) -> int").unwrap(),
        Type::Mu("a".into(), Box::new(Type::arrow(vec![Type::var("a")], Type::Int)))
    );
    assert_eq!(parse_type("ref <int, unit>").unwrap(), Type::Ref(vec![Type::Int, Type::Unit]));
    assert_eq!(
        parse_type("box <int>").unwrap(),
        Type::box_tuple(vec![Type::Int])
    );
}

#[test]
fn stack_modifying_arrow() {
    let t = parse_type("(int)[. => int :: .] -> unit").unwrap();
    assert_eq!(t, Type::stack_arrow(vec![Type::Int], vec![], vec![Type::Int], Type::Unit));
}

#[test]
fn markers() {
    assert_eq!(parse_marker("ra").unwrap(), Marker::Reg(Reg::Ra));
    assert_eq!(parse_marker("2").unwrap(), Marker::Index(2));
    assert_eq!(parse_marker("e1").unwrap(), Marker::Var("e1".into()));
    assert_eq!(parse_marker("out").unwrap(), Marker::Out);
    assert_eq!(
        parse_marker("ret(int, z)").unwrap(),
        Marker::halt(Type::Int, Stack::var("z"))
    );
}

#[test]
fn kind_follows_the_binder_name() {
    assert!(parse_type("z").is_err());
    assert!(parse_stack("int :: a").is_err());
}

#[test]
fn instantiation_forms_agree() {
    assert_eq!(parse_small("l[z, e]").unwrap(), parse_small("l[z][e]").unwrap());
}

#[test]
fn comments_are_ignored() {
    let p = parse_program("-- a comment\n42 -- trailing\n").unwrap();
    assert_eq!(p, Program::Expr(Expr::int(42)));
}

#[test]
fn negative_literals() {
    assert_eq!(parse_expr("-3").unwrap(), Expr::int(-3));
    assert_eq!(parse_int("-17"), Some((-17).into()));
}

#[test]
fn instruction_forms() {
    let cases = [
        "add r1, r2, 3",
        "bnz r1, l[*]",
        "ld r1, r2[0]",
        "st r2[1], r3",
        "ralloc r1, 2",
        "balloc r1, 0",
        "mv r1, ()",
        "salloc 2",
        "sfree 1",
        "sld r1, 0",
        "sst 0, r1",
        "unpack <a, r1> r2",
        "unfold r1, r2",
        "protect int :: ., z",
        "import r1, *, int TF{1 + 1}",
    ];
    for src in cases {
        let i = parse_instr(src).unwrap_or_else(|e| panic!("{src}: {e}"));
        assert_eq!(parse_instr(&instr_str(&i)).unwrap(), i, "{src}");
    }
}

#[test]
fn heap_values() {
    let h = parse_heap_value("code[z]{r1: int; z} ret(int, z). halt[int, z] r1").unwrap();
    assert!(matches!(h, HeapValue::Code(_)));
    let h = parse_heap_value("ref <1, ()>").unwrap();
    assert_eq!(h, HeapValue::Tuple(Mutability::Ref, vec![Word::int(1), Word::Unit]));
}
