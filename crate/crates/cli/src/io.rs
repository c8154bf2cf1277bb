use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tree_motion::learning::{build_with_demos, DemoSet};
use tree_motion::spec::TreeSpec;
use tree_motion::{Error, ParamVector, TransformTree};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

pub struct Outcome {
    pub code: u8,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: Error },
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Structure { .. } => "structure",
        Error::UnknownMapKind { .. } => "unknown_map_kind",
        Error::Config(_) => "config",
        Error::NonFinite { .. } => "non_finite",
        Error::SingularMetric { .. } => "singular_metric",
        Error::Degenerate(_) => "degenerate",
        Error::Domain { .. } => "domain",
        Error::Demo(_) => "demo",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
        Error::Io(_) => "io",
    }
}

/// JSON description of a core error, naming the offending item when known.
pub fn error_json(e: &Error) -> Value {
    let mut v = json!({"kind": error_kind(e), "message": e.to_string()});
    match e {
        Error::Structure { item, .. } => v["item"] = json!(item),
        Error::NonFinite { leaf } | Error::Domain { leaf, .. } => v["item"] = json!(leaf),
        Error::SingularMetric { min_eigenvalue } => v["min_eigenvalue"] = json!(min_eigenvalue),
        _ => {}
    }
    v
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) | CliError::File { source: e, .. } if e.is_numeric() => EXIT_NUMERIC,
            _ => EXIT_VALIDATION,
        }
    }

    pub fn report(&self) -> Value {
        let error = match self {
            CliError::Usage(msg) => json!({"kind": "usage", "message": msg}),
            CliError::Core(e) => error_json(e),
            CliError::File { path, source } => {
                let mut v = error_json(source);
                v["file"] = json!(path.display().to_string());
                v
            }
        };
        json!({"ok": false, "error": error})
    }
}

pub fn to_pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

/// Prints a report to stdout; a closed pipe is not an error.
pub fn emit(v: &Value) {
    let _ = writeln!(std::io::stdout().lock(), "{}", to_pretty(v));
}

fn at(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_spec(path: &Path) -> Result<TreeSpec, CliError> {
    TreeSpec::load(path).map_err(at(path))
}

pub fn read_demos(paths: &[PathBuf]) -> Result<DemoSet, CliError> {
    let trajectories = paths
        .iter()
        .map(|p| tree_motion::learning::Trajectory::load(p).map_err(at(p)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DemoSet::new(trajectories)?)
}

/// Builds the tree with parameters from `params` if given, otherwise with
/// initial values (length scales estimated from `demos` when present).
pub fn load_tree(
    spec: &TreeSpec,
    params: Option<&Path>,
    demos: Option<&DemoSet>,
) -> Result<(TransformTree, ParamVector), CliError> {
    match params {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| at(path)(e.into()))?;
            let stored = ParamVector::from_json(&text).map_err(at(path))?;
            let (tree, mut p) = spec.build(&stored.length_scales)?;
            p.load_from(&stored).map_err(at(path))?;
            Ok((tree, p))
        }
        None => match demos {
            Some(d) => Ok(build_with_demos(spec, d)?),
            None => Ok(spec.build(&BTreeMap::new())?),
        },
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| at(path)(e.into()))
}

pub fn create_file(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|e| at(path)(e.into()))
}
