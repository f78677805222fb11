//! File ingestion: matrices, circuits and the key=value config file.

use std::path::Path;

use varlin::pauli::{decompose_elementwise, PauliSum};
use varlin::problem::{Problem, Task};
use varlin::sparse::SparseMatrix;
use varlin::statevec::Circuit;
use varlin::{Error, Result};

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

pub enum MatrixInput {
    Sparse(SparseMatrix),
    Pauli(PauliSum),
}

/// Matrix Market when the file starts with `%%`, the JSON entry list when it
/// starts with `{`, Pauli text otherwise.
pub fn read_matrix(path: &Path) -> Result<MatrixInput> {
    let text = read(path)?;
    let head = text.trim_start();
    if head.starts_with("%%") {
        Ok(MatrixInput::Sparse(SparseMatrix::parse_matrix_market(&text)?))
    } else if head.starts_with('{') {
        Ok(MatrixInput::Sparse(SparseMatrix::parse_json(&text)?))
    } else {
        Ok(MatrixInput::Pauli(PauliSum::parse_text(&text)?))
    }
}

pub fn read_operator(path: &Path) -> Result<PauliSum> {
    match read_matrix(path)? {
        MatrixInput::Sparse(m) => decompose_elementwise(&m),
        MatrixInput::Pauli(p) => Ok(p),
    }
}

fn qubits_of(m: &MatrixInput) -> Result<usize> {
    match m {
        MatrixInput::Pauli(p) => Ok(p.qubits()),
        MatrixInput::Sparse(s) if s.dim().is_power_of_two() && s.dim() >= 2 => Ok(s.qubits()),
        MatrixInput::Sparse(s) => Err(Error::InvalidInput(format!(
            "matrix dimension {} is not a power of two >= 2",
            s.dim()
        ))),
    }
}

/// `zero` for `|0...0>`, otherwise a parameter-free circuit in JSON.
pub fn read_v0(spec: &str, qubits: usize) -> Result<Circuit> {
    if spec == "zero" {
        return Circuit::new(qubits, 0);
    }
    Circuit::from_json(&read(Path::new(spec))?)
}

pub fn load_problem(task: Task, matrix: &Path, v0: &str) -> Result<Problem> {
    let m = read_matrix(matrix)?;
    let v0 = read_v0(v0, qubits_of(&m)?)?;
    match m {
        MatrixInput::Sparse(s) => Problem::from_sparse(task, s, v0),
        MatrixInput::Pauli(p) => Problem::new(task, p, v0),
    }
}

/// Turn a `key = value` file into `--key value` arguments. Values `true` and
/// `false` toggle switches; `#` starts a comment.
pub fn config_args(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: "expected key = value".into(),
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "empty key".into(),
            });
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Splice the arguments of `--config FILE` in front of the subcommand's own
/// flags so that explicit flags, which come later, take precedence.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| Error::InvalidInput("--config needs a path".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let extra = config_args(&read(Path::new(&path))?)?;
    // argv[0] is the program, argv[1] the subcommand.
    if rest.len() < 2 {
        return Ok(rest);
    }
    let tail = rest.split_off(2);
    rest.extend(extra);
    rest.extend(tail);
    Ok(rest)
}
