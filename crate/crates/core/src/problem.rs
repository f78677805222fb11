//! Task descriptors: a matrix in Pauli form, the circuit preparing `|v0>`,
//! and whether `M|v0>` or `M^{-1}|v0>` is wanted.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::pauli::{decompose_dense, decompose_elementwise, pauli_to_matrix, PauliSum};
use crate::sparse::SparseMatrix;
use crate::statevec::{Circuit, StateVector};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Prepare `M|v0> / ||M|v0>||`.
    Multiply,
    /// Prepare `M^{-1}|v0> / ||M^{-1}|v0>||`.
    Solve,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub task: Task,
    matrix: PauliSum,
    sparse: Option<SparseMatrix>,
    v0: Circuit,
    /// Condition number when known from construction.
    pub kappa: Option<f64>,
    pub seed: Option<u64>,
}

impl Problem {
    pub fn new(task: Task, matrix: PauliSum, v0: Circuit) -> Result<Self> {
        if matrix.is_empty() {
            return Err(Error::EmptySum);
        }
        if matrix.qubits() != v0.qubits() {
            return Err(Error::DimensionMismatch {
                expected: matrix.qubits(),
                actual: v0.qubits(),
            });
        }
        if v0.parameter_count() != 0 || !v0.is_parameter_free() {
            return Err(Error::InvalidInput(
                "v0 preparation must be parameter-free".into(),
            ));
        }
        Ok(Problem {
            task,
            matrix: matrix.canonicalize(),
            sparse: None,
            v0,
            kappa: None,
            seed: None,
        })
    }

    /// Build from a sparse matrix whose dimension is a power of two.
    pub fn from_sparse(task: Task, m: SparseMatrix, v0: Circuit) -> Result<Self> {
        if !m.dim().is_power_of_two() || m.dim() < 2 {
            return Err(Error::InvalidInput(format!(
                "matrix dimension {} is not a power of two >= 2",
                m.dim()
            )));
        }
        let mut p = Problem::new(task, decompose_elementwise(&m)?, v0)?;
        p.sparse = Some(m);
        Ok(p)
    }

    /// Build from a dense matrix via its Pauli coefficients.
    pub fn from_dense(task: Task, m: &DMatrix<Complex64>, v0: Circuit) -> Result<Self> {
        Problem::new(task, decompose_dense(m)?, v0)
    }

    pub fn qubits(&self) -> usize {
        self.matrix.qubits()
    }

    /// Canonical Pauli form of `M`.
    pub fn matrix(&self) -> &PauliSum {
        &self.matrix
    }

    pub fn sparse(&self) -> Option<&SparseMatrix> {
        self.sparse.as_ref()
    }

    pub fn v0(&self) -> &Circuit {
        &self.v0
    }

    pub fn v0_state(&self) -> Result<StateVector> {
        self.v0.prepare(&[])
    }

    /// Same task and `|v0>` with `M` replaced.
    pub fn with_matrix(&self, matrix: PauliSum) -> Result<Problem> {
        let mut p = Problem::new(self.task, matrix, self.v0.clone())?;
        p.seed = self.seed;
        Ok(p)
    }

    /// `M(s) = (1 - s) I + s M`.
    pub fn interpolated(&self, s: f64) -> Result<Problem> {
        let n = self.qubits();
        let m = PauliSum::identity(n, Complex64::new(1.0 - s, 0.0))
            .add(&self.matrix.scale(Complex64::new(s, 0.0)))?
            .canonicalize();
        let m = if m.is_empty() {
            PauliSum::identity(n, Complex64::new(0.0, 0.0))
        } else {
            m
        };
        self.with_matrix(m)
    }

    pub fn dense_matrix(&self) -> Result<DMatrix<Complex64>> {
        pauli_to_matrix(&self.matrix)
    }

    /// Known condition number, else `sigma_max / sigma_min` of the dense matrix.
    pub fn condition_number(&self) -> Result<f64> {
        match self.kappa {
            Some(k) => Ok(k),
            None => dense::condition_number(&self.dense_matrix()?),
        }
    }

    /// Normalized target state, computed classically.
    pub fn target_state(&self) -> Result<Vec<Complex64>> {
        let v0 = self.v0_state()?;
        let raw = match self.task {
            Task::Multiply => self.matrix.apply(v0.amplitudes())?,
            Task::Solve => dense::solve(&self.dense_matrix()?, v0.amplitudes())?,
        };
        dense::normalized(&raw)
    }

    /// Dense Hamiltonian whose zero-energy ground state is the target:
    /// `I - M|v0><v0|M^dag / ||M v0||^2` or `M^dag (I - |v0><v0|) M`.
    pub fn dense_hamiltonian(&self) -> Result<DMatrix<Complex64>> {
        let m = self.dense_matrix()?;
        let dim = m.nrows();
        let v = nalgebra::DVector::from_column_slice(self.v0_state()?.amplitudes());
        match self.task {
            Task::Multiply => {
                let mv = &m * v;
                let norm = mv.norm_squared();
                if norm < 1e-24 {
                    return Err(Error::Degenerate("M|v0> vanishes".into()));
                }
                Ok(DMatrix::identity(dim, dim) - (&mv * mv.adjoint()) / Complex64::new(norm, 0.0))
            }
            Task::Solve => {
                let proj = DMatrix::identity(dim, dim) - &v * v.adjoint();
                Ok(m.adjoint() * proj * m)
            }
        }
    }

    /// Pauli form of [`Problem::dense_hamiltonian`].
    pub fn hamiltonian(&self) -> Result<PauliSum> {
        decompose_dense(&self.dense_hamiltonian()?)
    }
}
