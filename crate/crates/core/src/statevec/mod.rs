//! Dense statevector simulation of parameterized circuits.
//!
//! Rotations follow `R_P(a) = exp(-i a P / 2)`. Derivatives of a rotation are
//! written as `dR/da = f * sigma * R` with `f = -i/2` and `sigma` the rotation
//! axis, which is what the derivative-state and Hadamard-test machinery use.

mod circuit;
mod state;

pub use circuit::{apply_gate, build_hardware_ansatz, Circuit, Gate, GateKind};
pub(crate) use circuit::apply_gate_ext;
pub use state::{
    apply_pauli_sum, hadamard_matrix, inner_product, ry_matrix, rz_matrix, Matrix2, StateVector,
    MAX_SIM_QUBITS,
};
pub(crate) use state::dot;
