use std::path::PathBuf;

use num_bigint::BigInt;

use ftal::corpus;
use ftal::harness::*;
use ftal::machine::Observation;
use ftal::parser::{parse_expr, parse_type};
use ftal::syntax::*;

fn job(left: &str, right: &str, inputs: &[i64], fuel: u64) -> EquivJob {
    EquivJob {
        left: parse_expr(left).unwrap(),
        right: parse_expr(right).unwrap(),
        ty: parse_type("(int) -> int").unwrap(),
        inputs: inputs.iter().copied().map(BigInt::from).collect(),
        fuel,
    }
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ftal-harness-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn apply_builds_the_application() {
    let id = parse_expr("lam (x: int). x").unwrap();
    assert_eq!(
        apply_to_input(&id, &BigInt::from(0)).unwrap(),
        Expr::app(id.clone(), vec![Expr::int(0)])
    );
    assert!(apply_to_input(&parse_expr("lam (x: unit). x").unwrap(), &BigInt::from(0)).is_err());
    assert!(apply_to_input(&Expr::int(3), &BigInt::from(0)).is_err());
}

#[test]
fn identity_and_successor_are_distinguished_at_zero() {
    let v = diff_equiv(&job("lam (x: int). x", "lam (x: int). x + 1", &[0], 1000)).unwrap();
    assert_eq!(v.summary, Summary::Distinguished { witness: "0".into() });
    assert_eq!(v.rows[0].left, Observation::Terminated("0".into()));
    assert_eq!(v.rows[0].right, Observation::Terminated("1".into()));
    assert!(!v.rows[0].agree);
}

#[test]
fn basic_blocks_job_agrees_everywhere() {
    let v = diff_equiv(&corpus::job("basic_blocks", None).unwrap()).unwrap();
    assert_eq!(v.summary, Summary::ConsistentEquivalent);
    assert_eq!(v.rows.len(), 11);
    for (i, row) in v.rows.iter().enumerate() {
        assert_eq!(row.left, Observation::Terminated((i + 2).to_string()));
        assert!(row.agree);
    }
}

#[test]
fn factorial_job_diverges_on_negative_inputs() {
    let v = diff_equiv(&corpus::job("factorial", Some(2000)).unwrap()).unwrap();
    assert_eq!(v.summary, Summary::ConsistentEquivalent);
    let inputs: Vec<_> = v.rows.iter().map(|r| r.input.as_str()).collect();
    assert_eq!(inputs, ["-3", "-1", "0", "1", "2", "3", "4", "5", "6", "7", "8"]);
    assert_eq!(v.rows[0].left, Observation::RunningAfter(2000));
    assert_eq!(v.rows[10].right, Observation::Terminated("40320".into()));
}

#[test]
fn one_sided_divergence_is_inconclusive() {
    let fact = corpus::program("factorial_f").unwrap().source;
    let v = diff_equiv(&job(fact, "lam (x: int). 1", &[-2, 1], 500)).unwrap();
    assert_eq!(v.summary, Summary::Inconclusive { fuel: 500 });
}

#[test]
fn distinguishing_row_outranks_inconclusive_ones() {
    let fact = corpus::program("factorial_f").unwrap().source;
    let v = diff_equiv(&job(fact, "lam (x: int). 2", &[-2, 1], 500)).unwrap();
    assert_eq!(v.summary, Summary::Distinguished { witness: "1".into() });
}

#[test]
fn inputs_are_sorted_and_deduplicated() {
    let v = diff_equiv(&job("lam (x: int). x", "lam (x: int). x", &[3, -1, 3, 0], 100)).unwrap();
    let inputs: Vec<_> = v.rows.iter().map(|r| r.input.clone()).collect();
    assert_eq!(inputs, ["-1", "0", "3"]);
}

#[test]
fn functions_must_have_the_job_type() {
    let mut j = job("lam (x: int). x", "lam (x: int). x", &[0], 100);
    j.ty = parse_type("(int) -> unit").unwrap();
    assert!(matches!(diff_equiv(&j), Err(HarnessError::IllTyped(_))));
    let j = job("lam (x: int). x + ()", "lam (x: int). x", &[0], 100);
    assert!(matches!(diff_equiv(&j), Err(HarnessError::Type { .. })));
}

#[test]
fn input_specs() {
    let list: InputSpec = serde_json::from_str("[2, 1, 2]").unwrap();
    assert_eq!(list.values(), vec![BigInt::from(1), BigInt::from(2)]);
    let mixed: InputSpec = serde_json::from_str(r#"{"values": [-3], "range": {"from": 0, "to": 2}}"#).unwrap();
    assert_eq!(mixed.values(), [-3, 0, 1, 2].map(BigInt::from).to_vec());
}

#[test]
fn jobs_load_relative_to_their_file() {
    let dir = scratch_dir("load");
    std::fs::create_dir_all(dir.join("src")).unwrap();
    std::fs::write(dir.join("src/a.ftal"), "lam (x: int). x * 2").unwrap();
    std::fs::write(dir.join("src/b.ftal"), "lam (x: int). x + x").unwrap();
    std::fs::write(
        dir.join("job.json"),
        r#"{"left": "src/a.ftal", "right": "src/b.ftal", "type": "(int) -> int", "inputs": [1, 2]}"#,
    )
    .unwrap();
    let j = load_job(&dir.join("job.json"), None).unwrap();
    assert_eq!(j.fuel, DEFAULT_FUEL);
    assert_eq!(load_job(&dir.join("job.json"), Some(7)).unwrap().fuel, 7);
    assert_eq!(diff_equiv(&j).unwrap().summary, Summary::ConsistentEquivalent);

    assert!(matches!(load_job(&dir.join("missing.json"), None), Err(HarnessError::Io { .. })));
    std::fs::write(dir.join("bad.json"), "{").unwrap();
    assert!(matches!(load_job(&dir.join("bad.json"), None), Err(HarnessError::Job(_))));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verdict_serializes_with_a_tag() {
    let v = diff_equiv(&job("lam (x: int). x", "lam (x: int). x + 1", &[0], 100)).unwrap();
    let json = serde_json::to_value(&v).unwrap();
    assert_eq!(json["summary"]["verdict"], "distinguished");
    assert_eq!(json["summary"]["witness"], "0");
    assert_eq!(json["rows"][0]["left"]["kind"], "Terminated");
    assert_eq!(v.summary.to_string(), "distinguished(0)");
}
