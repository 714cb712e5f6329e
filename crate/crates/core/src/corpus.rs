//! The bundled example programs and equivalence jobs.

use crate::harness::{EquivJob, HarnessError, JobSpec};

pub struct Entry {
    pub name: &'static str,
    pub source: &'static str,
    /// `check` output: the program's type and final stack.
    pub expected_type: &'static str,
    /// `run` output, for programs that reduce to a first-order result.
    pub expected_result: Option<&'static str>,
}

macro_rules! entry {
    ($name:literal, $ty:literal, $result:expr) => {
        Entry {
            name: $name,
            source: include_str!(concat!("../corpus/", $name, ".ftal")),
            expected_type: $ty,
            expected_result: $result,
        }
    };
}

pub const PROGRAMS: &[Entry] = &[
    entry!("basic_blocks_f1", "(int) -> int; *", None),
    entry!("basic_blocks_f2", "(int) -> int; *", None),
    entry!("call_to_call", "int; *", Some("2")),
    entry!("factorial_f", "(int) -> int; *", None),
    entry!("factorial_t", "(int) -> int; *", None),
    entry!("import_one_plus_one", "int; *", Some("2")),
    entry!("jit", "int; *", Some("2")),
    entry!("push7_stack_lambda", "(int)[. => int :: .] -> unit; *", None),
    entry!("withref", "int; *", Some("42")),
];

/// Embedded sources addressable by the relative paths used in job files.
const FILES: &[(&str, &str)] = &[
    ("jobs/identity.ftal", include_str!("../corpus/jobs/identity.ftal")),
    ("jobs/successor.ftal", include_str!("../corpus/jobs/successor.ftal")),
];

pub const JOBS: &[(&str, &str)] = &[
    ("basic_blocks", include_str!("../corpus/jobs/basic_blocks.json")),
    ("factorial", include_str!("../corpus/jobs/factorial.json")),
    ("identity_vs_successor", include_str!("../corpus/jobs/identity_vs_successor.json")),
];

pub fn program(name: &str) -> Option<&'static Entry> {
    PROGRAMS.iter().find(|e| e.name == name)
}

fn lookup(path: &str) -> Option<&'static str> {
    let full = format!("jobs/{path}");
    let mut parts: Vec<&str> = Vec::new();
    for seg in full.split('/') {
        match seg {
            ".." => {
                parts.pop();
            }
            "." | "" => {}
            s => parts.push(s),
        }
    }
    let norm = parts.join("/");
    if let Some(stem) = norm.strip_suffix(".ftal") {
        if let Some(e) = program(stem) {
            return Some(e.source);
        }
    }
    FILES.iter().find(|(p, _)| *p == norm).map(|(_, s)| *s)
}

/// A bundled job with its sources resolved from the embedded corpus.
pub fn job(name: &str, fuel_override: Option<u64>) -> Result<EquivJob, HarnessError> {
    let (_, text) = JOBS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| HarnessError::IllTyped(format!("no bundled job named {name}")))?;
    let spec: JobSpec = serde_json::from_str(text)?;
    spec.resolve(
        |p| lookup(p).map(str::to_string).ok_or_else(|| HarnessError::IllTyped(format!("no bundled file {p}"))),
        fuel_override,
    )
}
