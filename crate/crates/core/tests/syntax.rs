use ftal::parser::{parse_expr, parse_program, parse_stack, parse_type};
use ftal::syntax::*;
use proptest::prelude::*;

fn ty(s: &str) -> Type {
    parse_type(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

#[test]
fn alpha_equal_renames_binders() {
    assert!(alpha_equal(&ty("mu a. a"), &ty("mu b. b")));
    assert!(alpha_equal(
        &ty("box code[z, e]{ra: box code[]{r1: int; z} e; int :: z} ra"),
        &ty("box code[z2, e2]{ra: box code[]{r1: int; z2} e2; int :: z2} ra"),
    ));
    assert!(!alpha_equal(&Type::Int, &Type::Unit));
    assert!(!alpha_equal(&ty("mu a. a"), &ty("mu a. int")));
}

#[test]
fn substitution_examples() {
    let s = substitute(&parse_stack("int :: z").unwrap(), &TyVar::stack("z"), Omega::Stack(Stack::empty())).unwrap();
    assert_eq!(s, parse_stack("int :: *").unwrap());

    let t = substitute(
        &ty("box code[]{r1: int; z} e"),
        &TyVar::marker("e"),
        Omega::Marker(Marker::halt(Type::Int, Stack::empty())),
    )
    .unwrap();
    assert_eq!(t, ty("box code[]{r1: int; z} ret(int, *)"));

    let t = substitute(&ty("exists a. a"), &TyVar::ty("a"), Omega::Type(Type::Int)).unwrap();
    assert_eq!(t, ty("exists a. a"));
}

#[test]
fn substitution_rejects_kind_mismatch() {
    assert!(substitute(&ty("a"), &TyVar::ty("a"), Omega::Stack(Stack::empty())).is_err());
}

#[test]
fn substitution_avoids_capture() {
    let t = substitute(&ty("mu b. <a, b>"), &TyVar::ty("a"), Omega::Type(ty("b"))).unwrap();
    let Type::Mu(bound, _) = &t else { panic!("not a mu type") };
    assert_ne!(bound, "b");
    assert!(free_vars(&t).contains(&TyVar::ty("b")));
}

#[test]
fn free_variable_examples() {
    let fv = free_vars(&parse_stack("int :: z").unwrap());
    assert_eq!(fv.into_iter().collect::<Vec<_>>(), vec![TyVar::stack("z")]);
    assert!(free_vars(&ty("box code[z, e]{ra: box code[]{r1: int; z} e; z} ra")).is_empty());
    let Program::Component(c) = parse_program("(jmp l, where l -> code[]{; *} ret(int, *). mv r1, 1; halt[int, *] r1)").unwrap()
    else {
        panic!("expected a component")
    };
    assert!(free_vars(&c).is_empty());
}

#[test]
fn printing_examples() {
    assert_eq!(type_str(&Type::Int), "int");
    assert_eq!(stack_str(&Stack::empty()), "*");
    let Program::Expr(Expr::Boundary(_, c)) = parse_program("FT[int](mv r1, 42; halt[int, *] r1, where)").unwrap() else {
        panic!("expected a boundary")
    };
    assert_eq!(terminator_str(&c.seq.term), "halt[int, *] r1");
}

#[test]
fn free_term_vars_respect_binders() {
    let e = parse_expr("lam (x: int). x + y").unwrap();
    assert_eq!(free_term_vars(&e).into_iter().collect::<Vec<_>>(), vec!["y".to_string()]);
}

#[test]
fn term_substitution_respects_shadowing() {
    let e = parse_expr("(lam (x: int). x + y)(x)").unwrap();
    let out = subst_terms(&e, &[("x".into(), Expr::int(1)), ("y".into(), Expr::int(2))]);
    assert_eq!(out, parse_expr("(lam (x: int). x + 2)(1)").unwrap());
}

// ---------------------------------------------------------------------------
// Generators

fn type_var() -> impl Strategy<Value = Name> {
    prop_oneof![Just("a".to_string()), Just("b".to_string()), Just("c".to_string())]
}

fn stack_of(t: BoxedStrategy<Type>) -> impl Strategy<Value = Stack> {
    (
        prop::collection::vec(t, 0..3),
        prop_oneof![Just(Tail::Empty), Just(Tail::Var("z".into()))],
    )
        .prop_map(|(prefix, tail)| Stack::new(prefix, tail))
}

fn marker_of(t: BoxedStrategy<Type>) -> impl Strategy<Value = Marker> {
    prop_oneof![
        Just(Marker::Reg(Reg::Ra)),
        Just(Marker::Reg(Reg::R3)),
        (0usize..4).prop_map(Marker::Index),
        Just(Marker::Var("e".into())),
        (t.clone(), stack_of(t)).prop_map(|(t, s)| Marker::halt(t, s)),
    ]
}

fn arb_type() -> impl Strategy<Value = Type> {
    let leaf = prop_oneof![Just(Type::Int), Just(Type::Unit), type_var().prop_map(Type::Var)];
    leaf.prop_recursive(4, 32, 3, |inner| {
        let boxed = inner.clone().boxed();
        prop_oneof![
            (type_var(), inner.clone()).prop_map(|(a, t)| Type::Mu(a, Box::new(t))),
            (type_var(), inner.clone()).prop_map(|(a, t)| Type::Exists(a, Box::new(t))),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Type::Ref),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Type::box_tuple),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Type::Tuple),
            (prop::collection::vec(inner.clone(), 0..3), inner.clone())
                .prop_map(|(ps, r)| Type::arrow(ps, r)),
            (
                prop::collection::vec(inner.clone(), 0..2),
                prop::collection::vec(inner.clone(), 0..2),
                prop::collection::vec(inner.clone(), 1..2),
                inner.clone(),
            )
                .prop_map(|(ps, pi, po, r)| Type::stack_arrow(ps, pi, po, r)),
            (inner.clone(), stack_of(boxed.clone()), marker_of(boxed)).prop_map(|(t, sigma, marker)| {
                Type::code(CodeType {
                    delta: vec![TyVar::stack("z"), TyVar::marker("e")],
                    chi: RegFile::single(Reg::R1, t),
                    sigma,
                    marker,
                })
            }),
        ]
    })
}

fn f_type() -> impl Strategy<Value = Type> {
    let leaf = prop_oneof![Just(Type::Int), Just(Type::Unit)];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..3).prop_map(Type::Tuple),
            (prop::collection::vec(inner.clone(), 0..3), inner.clone()).prop_map(|(ps, r)| Type::arrow(ps, r)),
        ]
    })
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Unit),
        (-50i64..50).prop_map(Expr::int),
        prop_oneof![Just("x"), Just("y")].prop_map(|x| Expr::Var(x.to_string())),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (
                prop_oneof![Just(Prim::Add), Just(Prim::Sub), Just(Prim::Mul)],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(p, a, b)| Expr::Binop(p, Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(c, t, f)| Expr::If0(Box::new(c), Box::new(t), Box::new(f))),
            (prop_oneof![Just("x"), Just("y")], f_type(), inner.clone())
                .prop_map(|(x, t, b)| Expr::lam(vec![(x.to_string(), t)], b)),
            (inner.clone(), prop::collection::vec(inner.clone(), 0..3)).prop_map(|(f, args)| Expr::app(f, args)),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Tuple),
            (0usize..3, inner.clone()).prop_map(|(i, e)| Expr::Proj(i, Box::new(e))),
            inner.clone().prop_map(|e| Expr::Unfold(Box::new(e))),
            inner.prop_map(|e| Expr::Fold(Type::Mu("a".into(), Box::new(Type::Int)), Box::new(e))),
        ]
    })
}

fn rename_free(t: &Type, from: &str, to: &str) -> Type {
    substitute(t, &TyVar::ty(from), Omega::Type(Type::var(to))).unwrap()
}

proptest! {
    #[test]
    fn types_survive_print_and_parse(t in arb_type()) {
        let printed = type_str(&t);
        let back = parse_type(&printed).map_err(|e| TestCaseError::fail(format!("{printed}: {e}")))?;
        prop_assert!(alpha_equal(&t, &back), "{} reparsed as {}", printed, type_str(&back));
    }

    #[test]
    fn expressions_survive_print_and_parse(e in arb_expr()) {
        let printed = expr_str(&e);
        let back = parse_expr(&printed).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
        prop_assert!(alpha_equal(&e, &back), "{} reparsed as {}", printed, expr_str(&back));
    }

    #[test]
    fn alpha_equal_is_reflexive_and_symmetric(a in arb_type(), b in arb_type()) {
        prop_assert!(alpha_equal(&a, &a));
        prop_assert_eq!(alpha_equal(&a, &b), alpha_equal(&b, &a));
    }

    #[test]
    fn renaming_a_mu_binder_preserves_alpha_equality(t in arb_type()) {
        let fresh = "q";
        let a = Type::Mu("a".into(), Box::new(t.clone()));
        let b = Type::Mu(fresh.into(), Box::new(rename_free(&t, "a", fresh)));
        prop_assert!(alpha_equal(&a, &b));
    }

    #[test]
    fn substituting_a_variable_for_itself_is_identity(t in arb_type()) {
        let same = substitute(&t, &TyVar::ty("a"), Omega::Type(Type::var("a"))).unwrap();
        prop_assert!(alpha_equal(&t, &same));
    }

    #[test]
    fn substitution_for_an_absent_variable_is_identity(t in arb_type(), u in arb_type()) {
        let absent = TyVar::ty("nowhere");
        let out = substitute(&t, &absent, Omega::Type(u)).unwrap();
        prop_assert!(alpha_equal(&t, &out));
    }

    #[test]
    fn closed_substitution_eliminates_the_variable(t in arb_type()) {
        let out = substitute(&t, &TyVar::ty("a"), Omega::Type(Type::Int)).unwrap();
        prop_assert!(!free_vars(&out).contains(&TyVar::ty("a")));
    }

    #[test]
    fn substitution_respects_alpha_equivalence(t in arb_type(), u in arb_type()) {
        let renamed = Type::Mu("q".into(), Box::new(rename_free(&t, "b", "q")));
        let original = Type::Mu("b".into(), Box::new(t));
        let var = TyVar::ty("a");
        let x = substitute(&original, &var, Omega::Type(u.clone())).unwrap();
        let y = substitute(&renamed, &var, Omega::Type(u)).unwrap();
        prop_assert!(alpha_equal(&x, &y));
    }
}
