//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use num_bigint::BigInt;

use ftal::boundary::{export_value, import_value, translate_type};
use ftal::corpus::{self, PROGRAMS};
use ftal::harness::{apply_to_input, diff_equiv, Summary};
use ftal::machine::{observe, run_program, trace_program, value_str, Memory, Observation, Outcome};
use ftal::parser::{parse_expr, parse_program, parse_type};
use ftal::syntax::*;
use ftal::typeck::{check_program, ErrorCode};

const FUEL: u64 = 100_000;
const SAFETY_FUEL: u64 = 1_000_000;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn parse(src: &str) -> Program {
    parse_program(src).unwrap_or_else(|e| panic!("corpus source does not parse: {e}"))
}

fn source(name: &str) -> &'static str {
    corpus::program(name).expect("bundled program").source
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::from(1), |acc, k| acc * k)
}

fn apply(name: &str, n: i64) -> Program {
    let Program::Expr(f) = parse(source(name)) else {
        panic!("{name} is not an F function");
    };
    Program::Expr(apply_to_input(&f, &BigInt::from(n)).expect("applicable"))
}

fn expect_value(what: &str, got: &Outcome, want: &str) -> Result<(), String> {
    match got {
        Outcome::Value(v) if value_str(v) == want => Ok(()),
        Outcome::Halted(w) if word_str(w) == want => Ok(()),
        other => Err(format!("{what}: expected {want}, got {other}")),
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {took:?}, limit {limit:?}"))
    }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    for e in PROGRAMS {
        let (t, s) = check_program(&parse(e.source)).map_err(|err| format!("{}: {err}", e.name))?;
        let shown = format!("{}; {}", type_str(&t), stack_str(&s));
        if shown != e.expected_type {
            return Err(format!("{}: checked at {shown}, expected {}", e.name, e.expected_type));
        }
    }
    within(Duration::from_secs(1), start)?;
    Ok(format!("{} programs at their stated types in {:?}", PROGRAMS.len(), start.elapsed()))
}

fn criterion_2() -> Check {
    let start = Instant::now();

    let r = run_program(&parse(source("call_to_call")), FUEL);
    expect_value("call_to_call", &r.outcome, "2")?;
    if r.memory.depth() != 0 {
        return Err(format!("call_to_call left {} stack cells", r.memory.depth()));
    }

    expect_value("jit", &run_program(&parse(source("jit")), FUEL).outcome, "2")?;

    for v in 0..=10 {
        let want = (v + 2).to_string();
        for f in ["basic_blocks_f1", "basic_blocks_f2"] {
            expect_value(&format!("{f}({v})"), &run_program(&apply(f, v), FUEL).outcome, &want)?;
        }
    }

    for v in 0..=8u32 {
        let want = factorial(v).to_string();
        for f in ["factorial_f", "factorial_t"] {
            let out = run_program(&apply(f, v.into()), FUEL).outcome;
            expect_value(&format!("{f}({v})"), &out, &want)?;
        }
    }

    match run_program(&parse(source("withref")), FUEL).outcome {
        Outcome::Value(Expr::Int(_)) => {}
        other => return Err(format!("withref: expected an integer, got {other}")),
    }

    within(Duration::from_secs(5), start)?;
    Ok(format!("all expected results in {:?}", start.elapsed()))
}

fn criterion_3() -> Check {
    for name in ["basic_blocks", "factorial"] {
        let job = corpus::job(name, None).map_err(|e| format!("{name}: {e}"))?;
        let verdict = diff_equiv(&job).map_err(|e| format!("{name}: {e}"))?;
        if verdict.summary != Summary::ConsistentEquivalent {
            return Err(format!("{name}: {}", verdict.summary));
        }
        for row in verdict.rows.iter().filter(|r| r.input.starts_with('-')) {
            let diverged = Observation::RunningAfter(job.fuel);
            if row.left != diverged || row.right != diverged {
                return Err(format!("{name}({}): {} vs {}", row.input, row.left, row.right));
            }
        }
        if name == "factorial" && verdict.rows.iter().filter(|r| r.input.starts_with('-')).count() != 2 {
            return Err("factorial job lacks the two negative inputs".into());
        }
    }
    let job = corpus::job("identity_vs_successor", None).map_err(|e| e.to_string())?;
    let verdict = diff_equiv(&job).map_err(|e| e.to_string())?;
    let want = Summary::Distinguished { witness: "0".into() };
    if verdict.summary != want {
        return Err(format!("identity vs successor: {}", verdict.summary));
    }
    Ok("basic_blocks, factorial equivalent; identity vs successor distinguished(0)".into())
}

fn replace(src: &str, from: &str, to: &str) -> String {
    assert!(src.contains(from), "mutation anchor missing: {from}");
    src.replacen(from, to, 1)
}

/// Ill-typed variants of corpus programs with the code each must be rejected with.
fn negative_suite() -> Vec<(&'static str, String, ErrorCode)> {
    let c2c = source("call_to_call");
    let l2_ret = "sld ra, 0;\n    sfree 1;\n    ret ra {r1}";
    vec![
        (
            "jmp to a block with a different return marker",
            "FT[int](\n  mv r1, 1;\n  jmp k,\nwhere\n  k -> code[]{r1: int; *} ret(unit, *).\n    \
             mv r1, ();\n    halt[unit, *] r1\n)"
                .into(),
            ErrorCode::Seq,
        ),
        (
            "halt without a halting marker",
            replace(c2c, "mult r1, r1, 2;\n    ret ra {r1}", "mult r1, r1, 2;\n    halt[int, z] r1"),
            ErrorCode::Seq,
        ),
        (
            "ret while the marker is a stack index",
            replace(c2c, l2_ret, "sld ra, 0;\n    ret ra {r1}"),
            ErrorCode::Seq,
        ),
        (
            "call while the marker is a register",
            replace(
                c2c,
                "salloc 1;\n    sst 0, ra;\n    mv ra, l2ret[z, e];\n    call l2 {(box code[]{r1: int; z} e) :: z, 0}",
                "call l2 {z, e}",
            ),
            ErrorCode::Seq,
        ),
        (
            "call with the wrong continuation index",
            replace(c2c, "e) :: z, 0}", "e) :: z, 1}"),
            ErrorCode::Seq,
        ),
        (
            "mv into the marker register",
            replace(c2c, "salloc 1;\n    sst 0, ra;\n    mv ra, l2ret", "mv ra, l2ret"),
            ErrorCode::Seq,
        ),
        (
            "st into a box tuple",
            "(\n  mv r1, 5;\n  salloc 1;\n  sst 0, r1;\n  balloc r2, 1;\n  mv r1, 1;\n  st r2[0], r1;\n  \
             halt[int, *] r1\n)"
                .into(),
            ErrorCode::Seq,
        ),
        (
            "protect hiding a stack-index marker",
            "(\n  mv ra, k;\n  call l {*, ret(int, *)},\nwhere\n  k -> code[]{r1: int; *} ret(int, *).\n    \
             halt[int, *] r1,\n  l -> code[z, e]{ra: box code[]{r1: int; z} e; z} ra.\n    salloc 1;\n    \
             sst 0, ra;\n    protect ., z2;\n    mv r1, 1;\n    sld ra, 0;\n    sfree 1;\n    ret ra {r1}\n)"
                .into(),
            ErrorCode::WfRet,
        ),
        (
            "register file missing a required register",
            replace(c2c, "mv r1, 1;\n    jmp l2aux", "jmp l2aux"),
            ErrorCode::Seq,
        ),
        (
            "import protecting the continuation slot",
            replace(c2c, l2_ret, &format!("import r2, z, int TF{{1}};\n    {l2_ret}")),
            ErrorCode::Seq,
        ),
        (
            "sfree past the marker",
            replace(c2c, l2_ret, "sfree 1;\n    sld ra, 0;\n    ret ra {r1}"),
            ErrorCode::Seq,
        ),
        (
            "jump to an uninstantiated target",
            replace(c2c, "jmp l2aux[z, e]", "jmp l2aux"),
            ErrorCode::Seq,
        ),
        (
            "binop on unit",
            replace(source("import_one_plus_one"), "TF{1 + 1}", "TF{1 + ()}"),
            ErrorCode::Expr,
        ),
        (
            "block returning through an abstract marker",
            "(\n  mv r1, 1;\n  halt[int, *] r1,\nwhere\n  l -> code[z, e]{r1: int; z} e.\n    halt[int, z] r1\n)".into(),
            ErrorCode::WfRet,
        ),
        (
            "ambient ref cell under a boundary",
            "(\n  import r1, *, int TF{ FT[int](mv r1, 3; halt[int, *] r1) };\n  halt[int, *] r1,\nwhere\n  \
             cell -> ref <1>\n)"
                .into(),
            ErrorCode::Component,
        ),
    ]
}

fn criterion_4() -> Check {
    let suite = negative_suite();
    for (what, src, want) in &suite {
        let prog = parse_program(src).map_err(|e| format!("{what}: mutation does not parse: {e}"))?;
        match check_program(&prog) {
            Ok((t, s)) => return Err(format!("{what}: accepted at {}; {}", type_str(&t), stack_str(&s))),
            Err(e) if e.code != *want => return Err(format!("{what}: expected {want}, got {e}")),
            Err(_) => {}
        }
    }
    Ok(format!("{} mutations rejected with the expected codes", suite.len()))
}

/// Variants of corpus programs that remain well-typed.
fn accepted_mutations() -> Vec<(&'static str, String)> {
    let c2c = source("call_to_call");
    vec![
        ("triple instead of double", replace(c2c, "mult r1, r1, 2", "mult r1, r1, 3")),
        (
            "continuation moved to r2",
            replace(
                &replace(
                    &replace(c2c, "mv r1, 1;\n    jmp l2aux[z, e]", "mv r1, 1;\n    mv r2, ra;\n    jmp l2aux[z, e]"),
                    "l2aux -> code[z, e]{r1: int, ra: box code[]{r1: int; z} e; z} ra.",
                    "l2aux -> code[z, e]{r1: int, r2: box code[]{r1: int; z} e; z} r2.",
                ),
                "mult r1, r1, 2;\n    ret ra {r1}",
                "mult r1, r1, 2;\n    ret r2 {r1}",
            ),
        ),
        ("jit with a different h", replace(source("jit"), "mul r1, r1, 2", "sub r1, r1, 5")),
        ("import of a larger sum", replace(source("import_one_plus_one"), "TF{1 + 1}", "TF{(1 + 1) * 21}")),
        ("withref storing a sum", replace(source("withref"), "get() * 7", "get() + 7")),
    ]
}

fn criterion_5() -> Check {
    let mut programs: Vec<(String, Program)> = PROGRAMS.iter().map(|e| (e.name.to_string(), parse(e.source))).collect();
    for (what, src) in accepted_mutations() {
        let prog = parse_program(&src).map_err(|e| format!("{what}: {e}"))?;
        check_program(&prog).map_err(|e| format!("{what} should typecheck: {e}"))?;
        programs.push((what.to_string(), prog));
    }
    for f in ["basic_blocks_f1", "basic_blocks_f2", "factorial_f", "factorial_t"] {
        for v in [0, 1, 5, 10] {
            programs.push((format!("{f}({v})"), apply(f, v)));
        }
    }
    for (name, prog) in &programs {
        if let Outcome::Stuck(s) = run_program(prog, SAFETY_FUEL).outcome {
            return Err(format!("{name}: {s}"));
        }
    }
    Ok(format!("{} runs, none stuck within {SAFETY_FUEL} steps", programs.len()))
}

fn first_order_round_trip(ty: &str, value: &str) -> Result<(), String> {
    let t = parse_type(ty).map_err(|e| e.to_string())?;
    let v = parse_expr(value).map_err(|e| e.to_string())?;
    let mut mem = Memory::new();
    let w = export_value(&t, &v, &mut mem).map_err(|e| e.to_string())?;
    let back = import_value(&t, &w, &mut mem).map_err(|e| e.to_string())?;
    if back == v {
        Ok(())
    } else {
        Err(format!("{value} : {ty} came back as {}", expr_str(&back)))
    }
}

fn criterion_6() -> Check {
    for e in PROGRAMS {
        let p = parse(e.source);
        let printed = program_str(&p);
        let again = parse_program(&printed).map_err(|err| format!("{}: reprint does not parse: {err}", e.name))?;
        if !alpha_equal(&p, &again) {
            return Err(format!("{}: parse after pretty is not alpha-equal", e.name));
        }
    }

    let cases = [
        ("int", "42"),
        ("int", "-7"),
        ("unit", "()"),
        ("mu a. int", "fold (mu a. int) 3"),
        ("<int, unit, <int, int>>", "(1, (), (2, 3))"),
        ("mu a. <int, int>", "fold (mu a. <int, int>) (4, 5)"),
    ];
    for (ty, v) in cases {
        first_order_round_trip(ty, v)?;
    }

    let fty = parse_type("(int) -> int").map_err(|e| e.to_string())?;
    let tty = translate_type(&fty)?;
    let f = "lam (x: int). if0 x 7 (x * 3 - 1)";
    let through = format!(
        "FT[{}](import r1, *, {} TF{{{f}}}; halt[{}, *] r1)",
        type_str(&fty),
        type_str(&fty),
        type_str(&tty)
    );
    let direct = parse_expr(f).map_err(|e| e.to_string())?;
    let wrapped = parse_expr(&through).map_err(|e| e.to_string())?;
    check_program(&Program::Expr(wrapped.clone())).map_err(|e| e.to_string())?;
    for n in -10..10 {
        let n = BigInt::from(n);
        let a = observe(&Program::Expr(apply_to_input(&direct, &n).map_err(|e| e.to_string())?), FUEL);
        let b = observe(&Program::Expr(apply_to_input(&wrapped, &n).map_err(|e| e.to_string())?), FUEL);
        if a != b || !matches!(a, Observation::Terminated(_)) {
            return Err(format!("higher-order round trip differs at {n}: {a} vs {b}"));
        }
    }
    Ok(format!(
        "{} corpus reprints, {} first-order values, 20 higher-order samples",
        PROGRAMS.len(),
        cases.len()
    ))
}

fn trace_bytes(prog: &Program) -> Vec<u8> {
    let (_, events) = trace_program(prog, FUEL);
    let mut out = Vec::new();
    for ev in &events {
        serde_json::to_writer(&mut out, ev).expect("trace event serializes");
        out.push(b'\n');
    }
    out
}

fn criterion_7() -> Check {
    let mut programs: Vec<(String, Program)> = PROGRAMS.iter().map(|e| (e.name.to_string(), parse(e.source))).collect();
    for f in ["basic_blocks_f1", "basic_blocks_f2", "factorial_f", "factorial_t"] {
        programs.push((format!("{f}(5)"), apply(f, 5)));
    }
    let mut bytes = 0;
    for (name, prog) in &programs {
        let a = trace_bytes(prog);
        if a != trace_bytes(prog) {
            return Err(format!("{name}: traces differ between runs"));
        }
        bytes += a.len();
    }
    if bytes == 0 {
        return Err("every trace was empty".into());
    }
    Ok(format!("{} traces ({bytes} bytes) byte-identical across runs", programs.len()))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("corpus typechecking", criterion_1),
        ("corpus execution", criterion_2),
        ("equivalence harness", criterion_3),
        ("negative typing suite", criterion_4),
        ("safety", criterion_5),
        ("round trips", criterion_6),
        ("determinism", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} ({name}): PASS - {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL - {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
