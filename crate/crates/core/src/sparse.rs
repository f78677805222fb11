//! Coordinate-list complex matrices and their file formats.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::DENSE_QUBIT_CAP;

/// Complex `N x N` matrix stored as `(row, col, value)` triples with
/// zero-based indices. The operator acts on `n = ceil(log2 N)` qubits; rows
/// and columns beyond `N` are implicitly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

#[derive(Serialize, Deserialize)]
struct JsonMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64, f64)>,
}

impl SparseMatrix {
    pub fn new(dim: usize, entries: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            if r >= dim || c >= dim {
                return Err(Error::InvalidInput(format!(
                    "entry ({r},{c}) outside a {dim}x{dim} matrix"
                )));
            }
            if !seen.insert((r, c)) {
                return Err(Error::InvalidInput(format!("duplicate entry ({r},{c})")));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite entry at ({r},{c})")));
            }
        }
        if !entries.iter().any(|e| e.2.norm() > 0.0) {
            return Err(Error::InvalidInput("matrix has no nonzero entry".into()));
        }
        Ok(SparseMatrix { dim, entries })
    }

    /// Entries of `m` with magnitude above `tol`.
    pub fn from_dense(m: &DMatrix<Complex64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput("matrix must be square".into()));
        }
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)].norm() > tol {
                    entries.push((r, c, m[(r, c)]));
                }
            }
        }
        SparseMatrix::new(m.nrows(), entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn qubits(&self) -> usize {
        (self.dim.next_power_of_two().trailing_zeros() as usize).max(1)
    }

    /// `sum |M_xy|`.
    pub fn entry_one_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.2.norm()).sum()
    }

    /// Dense `2^n x 2^n` form, zero-padded.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let qubits = self.qubits();
        if qubits > DENSE_QUBIT_CAP {
            return Err(Error::DenseCap {
                qubits,
                cap: DENSE_QUBIT_CAP,
            });
        }
        let size = 1usize << qubits;
        let mut m = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        Ok(m)
    }

    /// Parse a Matrix Market coordinate file (`real`, `integer` or `complex`
    /// field; `general`, `symmetric` or `hermitian` symmetry), one-based.
    pub fn parse_matrix_market(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let head: Vec<String> = header
            .split_whitespace()
            .map(|s| s.to_ascii_lowercase())
            .collect();
        if head.len() != 5 || head[0] != "%%matrixmarket" || head[1] != "matrix" {
            return Err(Error::Parse {
                line: 1,
                msg: "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`".into(),
            });
        }
        if head[2] != "coordinate" {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported format '{}'", head[2]),
            });
        }
        let complex = match head[3].as_str() {
            "complex" => true,
            "real" | "integer" | "double" => false,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unsupported field '{other}'"),
                })
            }
        };
        let symmetry = head[4].clone();
        if !matches!(symmetry.as_str(), "general" | "symmetric" | "hermitian") {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported symmetry '{symmetry}'"),
            });
        }

        let mut size: Option<(usize, usize, usize)> = None;
        let mut entries = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: lineno,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if size.is_none() {
                if fields.len() != 3 {
                    return Err(err("expected `rows cols nnz`"));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|_| err("bad size field"));
                let (r, c, nnz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if r != c {
                    return Err(err("matrix must be square"));
                }
                size = Some((r, c, nnz));
                continue;
            }
            let want = if complex { 4 } else { 3 };
            if fields.len() != want {
                return Err(err(&format!("expected {want} fields")));
            }
            let row: usize = fields[0].parse().map_err(|_| err("bad row index"))?;
            let col: usize = fields[1].parse().map_err(|_| err("bad column index"))?;
            if row == 0 || col == 0 {
                return Err(err("indices are one-based"));
            }
            let re: f64 = fields[2].parse().map_err(|_| err("bad value"))?;
            let im: f64 = if complex {
                fields[3].parse().map_err(|_| err("bad value"))?
            } else {
                0.0
            };
            let v = Complex64::new(re, im);
            let (r, c) = (row - 1, col - 1);
            entries.push((r, c, v));
            if r != c {
                match symmetry.as_str() {
                    "symmetric" => entries.push((c, r, v)),
                    "hermitian" => entries.push((c, r, v.conj())),
                    _ => {}
                }
            }
        }
        let (dim, _, _) = size.ok_or(Error::Parse {
            line: 1,
            msg: "missing size line".into(),
        })?;
        SparseMatrix::new(dim, entries)
    }

    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate complex general\n");
        s.push_str(&format!("{} {} {}\n", self.dim, self.dim, self.entries.len()));
        for &(r, c, v) in &self.entries {
            s.push_str(&format!("{} {} {} {}\n", r + 1, c + 1, v.re, v.im));
        }
        s
    }

    /// Parse `{"n": N, "entries": [[x, y, re, im], ...]}` with zero-based
    /// indices; `n` is the matrix dimension.
    pub fn parse_json(text: &str) -> Result<Self> {
        let raw: JsonMatrix = serde_json::from_str(text)?;
        SparseMatrix::new(
            raw.n,
            raw.entries
                .into_iter()
                .map(|(r, c, re, im)| (r, c, Complex64::new(re, im)))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let raw = JsonMatrix {
            n: self.dim,
            entries: self
                .entries
                .iter()
                .map(|&(r, c, v)| (r, c, v.re, v.im))
                .collect(),
        };
        serde_json::to_string(&raw).expect("matrix serializes")
    }

    /// Dispatch on file content: Matrix Market header or JSON object.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let trimmed = text.trim_start();
        if trimmed.starts_with("%%") {
            SparseMatrix::parse_matrix_market(&text)
        } else {
            SparseMatrix::parse_json(&text)
        }
    }
}
