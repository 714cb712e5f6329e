use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use ftal::corpus;
use ftal::harness::{self, diff_equiv, HarnessError, Summary, Verdict};
use ftal::machine::{self, value_str, Outcome};
use ftal::parser::{parse_program, ParseError};
use ftal::syntax::{program_str, stack_str, type_str, word_str, Program};
use ftal::typeck::{check_program, TypeError};

const OK: u8 = 0;
const TYPE_ERROR: u8 = 1;
const PARSE_ERROR: u8 = 2;
const STUCK: u8 = 3;
const DISTINGUISHED: u8 = 4;
const INCONCLUSIVE: u8 = 5;

#[derive(Parser)]
#[command(name = "ftal", version, about = "Check, run and compare FT programs")]
struct Cli {
    /// Step budget for runs.
    #[arg(long, global = true, env = "FTAL_FUEL", default_value_t = harness::DEFAULT_FUEL,
          value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    /// Emit machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type check a program and print its type and final stack.
    Check { file: PathBuf },
    /// Type check and run a program.
    Run { file: PathBuf },
    /// Run a program, writing one JSON record per reduction.
    Trace {
        file: PathBuf,
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Compare two functions on a set of inputs described by a job file.
    Eq { job: PathBuf },
    /// Pretty-print a program.
    Fmt { file: PathBuf },
    /// Check and run the bundled example programs and jobs.
    Corpus,
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    detail: Value,
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure {
            code: PARSE_ERROR,
            kind: "parse-error",
            message: e.to_string(),
            detail: json!({ "offset": e.offset, "line": e.line, "column": e.column, "expected": e.expected }),
        }
    }
}

impl From<TypeError> for Failure {
    fn from(e: TypeError) -> Self {
        Failure {
            code: TYPE_ERROR,
            kind: "type-error",
            message: e.to_string(),
            detail: json!({ "code": e.code.as_str(), "rule": e.rule, "construct": e.construct, "context": e.context }),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Parse { source, what } => {
                let mut f = Failure::from(*source);
                f.message = format!("{what}: {}", f.message);
                f
            }
            HarnessError::Type { source, what } => {
                let mut f = Failure::from(*source);
                f.message = format!("{what}: {}", f.message);
                f
            }
            HarnessError::IllTyped(m) => Failure {
                code: TYPE_ERROR,
                kind: "type-error",
                message: m,
                detail: Value::Null,
            },
            e @ (HarnessError::Io { .. } | HarnessError::Job(_)) => io_failure(e.to_string()),
        }
    }
}

fn io_failure(message: String) -> Failure {
    Failure {
        code: PARSE_ERROR,
        kind: "io-error",
        message,
        detail: Value::Null,
    }
}

fn load(path: &Path) -> Result<Program, Failure> {
    let src = fs::read_to_string(path).map_err(|e| io_failure(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_program(&src)?)
}

struct Out {
    json: bool,
}

impl Out {
    fn emit(&self, text: impl AsRef<str>, value: Value) {
        if self.json {
            println!("{value}");
        } else {
            println!("{}", text.as_ref());
        }
    }
}

fn outcome_report(outcome: &Outcome, steps: u64, fuel: u64) -> (u8, String, Value) {
    match outcome {
        Outcome::Value(v) => (OK, value_str(v), json!({ "status": "value", "value": value_str(v), "steps": steps })),
        Outcome::Halted(w) => (OK, word_str(w), json!({ "status": "halted", "value": word_str(w), "steps": steps })),
        Outcome::Running => (
            INCONCLUSIVE,
            format!("running after {fuel} steps"),
            json!({ "status": "running", "steps": steps }),
        ),
        Outcome::Stuck(s) => (
            STUCK,
            s.to_string(),
            json!({ "status": "stuck", "reason": s.kind.as_str(), "message": s.message, "steps": steps }),
        ),
    }
}

fn check(out: &Out, file: &Path) -> Result<u8, Failure> {
    let prog = load(file)?;
    let (t, s) = check_program(&prog)?;
    out.emit(
        format!("{}; {}", type_str(&t), stack_str(&s)),
        json!({ "status": "ok", "type": type_str(&t), "stack": stack_str(&s) }),
    );
    Ok(OK)
}

fn run(out: &Out, file: &Path, fuel: u64) -> Result<u8, Failure> {
    let prog = load(file)?;
    check_program(&prog)?;
    let r = machine::run_program(&prog, fuel);
    let (code, text, value) = outcome_report(&r.outcome, r.steps, fuel);
    out.emit(text, value);
    Ok(code)
}

fn trace(out: &Out, file: &Path, fuel: u64, trace_out: Option<&Path>) -> Result<u8, Failure> {
    let prog = load(file)?;
    check_program(&prog)?;
    let (r, events) = machine::trace_program(&prog, fuel);
    let mut lines = String::new();
    for ev in &events {
        lines.push_str(&serde_json::to_string(ev).expect("trace records serialize"));
        lines.push('\n');
    }
    let (code, text, value) = outcome_report(&r.outcome, r.steps, fuel);
    match trace_out {
        Some(p) => {
            fs::write(p, lines).map_err(|e| io_failure(format!("cannot write {}: {e}", p.display())))?;
            out.emit(text, value);
        }
        None => {
            io::stdout().write_all(lines.as_bytes()).map_err(|e| io_failure(e.to_string()))?;
            if out.json {
                eprintln!("{value}");
            } else {
                eprintln!("{text}");
            }
        }
    }
    Ok(code)
}

fn verdict_code(v: &Verdict) -> u8 {
    match v.summary {
        Summary::ConsistentEquivalent => OK,
        Summary::Distinguished { .. } => DISTINGUISHED,
        Summary::Inconclusive { .. } => INCONCLUSIVE,
    }
}

fn print_verdict(out: &Out, v: &Verdict) {
    if out.json {
        println!("{}", serde_json::to_string(v).expect("verdicts serialize"));
        return;
    }
    for row in &v.rows {
        let mark = if row.agree { "=" } else { "!" };
        println!("{:>6}  {mark}  {}  |  {}", row.input, row.left, row.right);
    }
    println!("{}", v.summary);
}

fn eq(out: &Out, job: &Path, fuel: Option<u64>) -> Result<u8, Failure> {
    let job = harness::load_job(job, fuel)?;
    let v = diff_equiv(&job)?;
    print_verdict(out, &v);
    Ok(verdict_code(&v))
}

fn fmt(file: &Path) -> Result<u8, Failure> {
    let prog = load(file)?;
    println!("{}", program_str(&prog));
    Ok(OK)
}

fn corpus_suite(out: &Out, fuel: u64) -> Result<u8, Failure> {
    let mut rows = Vec::new();
    for e in corpus::PROGRAMS {
        let (pass, detail) = match parse_program(e.source) {
            Err(err) => (false, format!("parse: {err}")),
            Ok(prog) => match check_program(&prog) {
                Err(err) => (false, format!("check: {err}")),
                Ok((t, s)) => {
                    let shown = format!("{}; {}", type_str(&t), stack_str(&s));
                    if shown != e.expected_type {
                        (false, format!("type {shown}, expected {}", e.expected_type))
                    } else {
                        let r = machine::run_program(&prog, fuel);
                        let (_, text, _) = outcome_report(&r.outcome, r.steps, fuel);
                        match (e.expected_result, &r.outcome) {
                            (_, Outcome::Stuck(_) | Outcome::Running) => (false, text),
                            (Some(want), _) if text != want => (false, format!("result {text}, expected {want}")),
                            (Some(_), _) => (true, format!("{shown} => {text}")),
                            (None, _) => (true, shown),
                        }
                    }
                }
            },
        };
        rows.push((e.name.to_string(), pass, detail));
    }
    for (name, _) in corpus::JOBS {
        let expected = match *name {
            "identity_vs_successor" => Summary::Distinguished { witness: "0".into() },
            _ => Summary::ConsistentEquivalent,
        };
        let (pass, detail) = match corpus::job(name, None).and_then(|j| diff_equiv(&j)) {
            Ok(v) => (v.summary == expected, v.summary.to_string()),
            Err(e) => (false, e.to_string()),
        };
        rows.push((format!("eq {name}"), pass, detail));
    }
    let all = rows.iter().all(|(_, p, _)| *p);
    if out.json {
        let items: Vec<Value> = rows
            .iter()
            .map(|(n, p, d)| json!({ "name": n, "pass": p, "detail": d }))
            .collect();
        println!("{}", json!({ "status": if all { "ok" } else { "failed" }, "entries": items }));
    } else {
        let width = rows.iter().map(|(n, _, _)| n.len()).max().unwrap_or(0);
        for (n, p, d) in &rows {
            println!("{n:<width$}  {}  {d}", if *p { "pass" } else { "FAIL" });
        }
    }
    Ok(if all { OK } else { TYPE_ERROR })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Out { json: cli.json };
    let explicit_fuel = std::env::args().any(|a| a == "--fuel" || a.starts_with("--fuel="))
        || std::env::var_os("FTAL_FUEL").is_some();
    let result = match &cli.cmd {
        Cmd::Check { file } => check(&out, file),
        Cmd::Run { file } => run(&out, file, cli.fuel),
        Cmd::Trace { file, trace_out } => trace(&out, file, cli.fuel, trace_out.as_deref()),
        Cmd::Eq { job } => eq(&out, job, explicit_fuel.then_some(cli.fuel)),
        Cmd::Fmt { file } => fmt(file),
        Cmd::Corpus => corpus_suite(&out, cli.fuel),
    };
    let code = match result {
        Ok(c) => c,
        Err(f) => {
            if out.json {
                println!("{}", json!({ "status": f.kind, "message": f.message, "detail": f.detail }));
            } else {
                eprintln!("{}: {}", f.kind, f.message);
            }
            f.code
        }
    };
    ExitCode::from(code)
}
