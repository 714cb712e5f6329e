//! Differential equivalence testing: run two functions on the same integer
//! inputs under the same fuel and compare what an observer sees.

use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::machine::{observe, Observation};
use crate::parser::{parse_program, parse_type, ParseError};
use crate::syntax::*;
use crate::typeck::{check_program, TypeError};

pub const DEFAULT_FUEL: u64 = 100_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed job file: {0}")]
    Job(#[from] serde_json::Error),
    #[error("{what}: {source}")]
    Parse { what: String, source: Box<ParseError> },
    #[error("{what}: {source}")]
    Type { what: String, source: Box<TypeError> },
    #[error("{0}")]
    IllTyped(String),
}

/// A pair of closed F functions to compare.
#[derive(Clone, Debug)]
pub struct EquivJob {
    pub left: Expr,
    pub right: Expr,
    pub ty: Type,
    pub inputs: Vec<BigInt>,
    pub fuel: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RangeSpec {
    pub from: i64,
    /// Inclusive.
    pub to: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    List(Vec<i64>),
    Mixed {
        #[serde(default)]
        values: Vec<i64>,
        #[serde(default)]
        range: Option<RangeSpec>,
    },
}

impl InputSpec {
    pub fn values(&self) -> Vec<BigInt> {
        let mut out: Vec<i64> = match self {
            InputSpec::List(v) => v.clone(),
            InputSpec::Mixed { values, range } => {
                let mut v = values.clone();
                if let Some(r) = range {
                    v.extend(r.from..=r.to);
                }
                v
            }
        };
        out.sort_unstable();
        out.dedup();
        out.into_iter().map(BigInt::from).collect()
    }
}

/// On-disk job description; `left` and `right` are paths relative to the
/// job file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JobSpec {
    pub left: String,
    pub right: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub inputs: InputSpec,
    #[serde(default)]
    pub fuel: Option<u64>,
}

fn parse_fn(what: &str, src: &str) -> Result<Expr, HarnessError> {
    match parse_program(src) {
        Ok(Program::Expr(e)) => Ok(e),
        Ok(Program::Component(_)) => Err(HarnessError::IllTyped(format!("{what}: expected an F function, found a T component"))),
        Err(source) => Err(HarnessError::Parse {
            what: what.into(),
            source: Box::new(source),
        }),
    }
}

impl JobSpec {
    /// Resolve a job whose sources are supplied by `load`, keyed by the
    /// paths written in the job.
    pub fn resolve(
        &self,
        mut load: impl FnMut(&str) -> Result<String, HarnessError>,
        fuel_override: Option<u64>,
    ) -> Result<EquivJob, HarnessError> {
        let ty = parse_type(&self.ty).map_err(|source| HarnessError::Parse {
            what: "job type".into(),
            source: Box::new(source),
        })?;
        Ok(EquivJob {
            left: parse_fn(&self.left, &load(&self.left)?)?,
            right: parse_fn(&self.right, &load(&self.right)?)?,
            ty,
            inputs: self.inputs.values(),
            fuel: fuel_override.or(self.fuel).unwrap_or(DEFAULT_FUEL),
        })
    }
}

pub fn load_job(path: &Path, fuel_override: Option<u64>) -> Result<EquivJob, HarnessError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| HarnessError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let spec: JobSpec = serde_json::from_str(&read(path)?)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    spec.resolve(|rel| read(&dir.join(rel)), fuel_override)
}

/// `f(n)`, after checking that `f` is a closed function from int.
pub fn apply_to_input(f: &Expr, n: &BigInt) -> Result<Expr, HarnessError> {
    let (t, _) = check_program(&Program::Expr(f.clone())).map_err(|source| HarnessError::Type {
        what: "function".into(),
        source: Box::new(source),
    })?;
    match &t {
        Type::Arrow(a) if a.is_plain() && a.params == [Type::Int] => Ok(Expr::app(f.clone(), vec![Expr::Int(n.clone())])),
        _ => Err(HarnessError::IllTyped(format!(
            "expected a function from int, found {}",
            type_str(&t)
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Row {
    pub input: String,
    pub left: Observation,
    pub right: Observation,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Summary {
    ConsistentEquivalent,
    Distinguished { witness: String },
    Inconclusive { fuel: u64 },
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Summary::ConsistentEquivalent => f.write_str("consistent-equivalent"),
            Summary::Distinguished { witness } => write!(f, "distinguished({witness})"),
            Summary::Inconclusive { fuel } => write!(f, "inconclusive(fuel {fuel})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub rows: Vec<Row>,
    pub summary: Summary,
}

enum RowClass {
    Agree,
    Inconclusive,
    Distinguishing,
}

fn classify(a: &Observation, b: &Observation) -> RowClass {
    use Observation::*;
    match (a, b) {
        (Stuck(_), _) | (_, Stuck(_)) => RowClass::Distinguishing,
        (Terminated(x), Terminated(y)) if x == y => RowClass::Agree,
        (Terminated(_), Terminated(_)) => RowClass::Distinguishing,
        (RunningAfter(_), RunningAfter(_)) => RowClass::Agree,
        _ => RowClass::Inconclusive,
    }
}

pub fn diff_equiv(job: &EquivJob) -> Result<Verdict, HarnessError> {
    for (what, f) in [("left", &job.left), ("right", &job.right)] {
        let (t, _) = check_program(&Program::Expr(f.clone())).map_err(|source| HarnessError::Type {
            what: what.into(),
            source: Box::new(source),
        })?;
        if !alpha_equal(&t, &job.ty) {
            return Err(HarnessError::IllTyped(format!(
                "{what} has type {}, job expects {}",
                type_str(&t),
                type_str(&job.ty)
            )));
        }
    }
    let mut inputs = job.inputs.clone();
    inputs.sort();
    inputs.dedup();
    let programs = inputs
        .iter()
        .map(|n| {
            Ok((
                Program::Expr(apply_to_input(&job.left, n)?),
                Program::Expr(apply_to_input(&job.right, n)?),
            ))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let observations: Vec<(Observation, Observation)> = std::thread::scope(|s| {
        let handles: Vec<_> = programs
            .iter()
            .map(|(l, r)| s.spawn(move || (observe(l, job.fuel), observe(r, job.fuel))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("observer thread")).collect()
    });

    let mut summary = Summary::ConsistentEquivalent;
    let mut rows = Vec::with_capacity(inputs.len());
    for (n, (left, right)) in inputs.iter().zip(observations) {
        let class = classify(&left, &right);
        match class {
            RowClass::Distinguishing if !matches!(summary, Summary::Distinguished { .. }) => {
                summary = Summary::Distinguished { witness: n.to_string() };
            }
            RowClass::Inconclusive if summary == Summary::ConsistentEquivalent => {
                summary = Summary::Inconclusive { fuel: job.fuel };
            }
            _ => {}
        }
        rows.push(Row {
            input: n.to_string(),
            agree: matches!(class, RowClass::Agree),
            left,
            right,
        });
    }
    Ok(Verdict { rows, summary })
}
