use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{dot, ry_matrix, rz_matrix, Matrix2, StateVector};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// `exp(-i a Y / 2)`
    Ry,
    /// `exp(-i a Z / 2)`
    Rz,
    Cnot,
    X,
    Y,
    Z,
}

/// One gate. Rotations take their angle either from a parameter `slot` or a
/// fixed `angle` (the latter only in parameter-free circuits such as state
/// preparation prefixes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl Gate {
    pub fn ry(target: usize, slot: usize) -> Self {
        Gate::rotation(GateKind::Ry, target, slot)
    }

    pub fn rz(target: usize, slot: usize) -> Self {
        Gate::rotation(GateKind::Rz, target, slot)
    }

    pub fn rotation(kind: GateKind, target: usize, slot: usize) -> Self {
        Gate {
            kind,
            target,
            control: None,
            slot: Some(slot),
            angle: None,
        }
    }

    pub fn fixed(kind: GateKind, target: usize, angle: f64) -> Self {
        Gate {
            kind,
            target,
            control: None,
            slot: None,
            angle: Some(angle),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::Cnot,
            target,
            control: Some(control),
            slot: None,
            angle: None,
        }
    }

    pub fn pauli(letter: Pauli, target: usize) -> Self {
        let kind = match letter {
            Pauli::X => GateKind::X,
            Pauli::Y => GateKind::Y,
            Pauli::Z => GateKind::Z,
            Pauli::I => panic!("identity is not a gate"),
        };
        Gate {
            kind,
            target,
            control: None,
            slot: None,
            angle: None,
        }
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self.kind, GateKind::Ry | GateKind::Rz)
    }

    fn validate(&self, qubits: usize, parameter_count: usize, allow_slots: bool) -> Result<()> {
        if self.target >= qubits {
            return Err(Error::QubitOutOfRange {
                index: self.target,
                qubits,
            });
        }
        match self.kind {
            GateKind::Cnot => {
                let c = self
                    .control
                    .ok_or_else(|| Error::InvalidInput("CNOT without control".into()))?;
                if c >= qubits {
                    return Err(Error::QubitOutOfRange { index: c, qubits });
                }
                if c == self.target {
                    return Err(Error::InvalidInput("control equals target".into()));
                }
            }
            _ => {
                if self.control.is_some() {
                    return Err(Error::InvalidInput(format!(
                        "{:?} gate cannot carry a control",
                        self.kind
                    )));
                }
            }
        }
        if self.is_rotation() {
            match (self.slot, self.angle) {
                (Some(s), None) => {
                    if !allow_slots {
                        return Err(Error::InvalidInput(
                            "prefix gates must be parameter-free".into(),
                        ));
                    }
                    if s >= parameter_count {
                        return Err(Error::InvalidSlot {
                            slot: s,
                            count: parameter_count,
                        });
                    }
                }
                (None, Some(a)) if a.is_finite() => {}
                _ => {
                    return Err(Error::InvalidInput(
                        "rotation needs exactly one of slot or finite angle".into(),
                    ))
                }
            }
        } else if self.slot.is_some() || self.angle.is_some() {
            return Err(Error::InvalidInput(format!(
                "{:?} gate takes no angle",
                self.kind
            )));
        }
        Ok(())
    }

    /// Angle used by this gate under parameters `theta`.
    #[inline]
    pub fn resolve_angle(&self, theta: &[f64]) -> f64 {
        match (self.slot, self.angle) {
            (Some(s), _) => theta[s],
            (None, Some(a)) => a,
            _ => 0.0,
        }
    }

    /// Target, 2x2 matrix and optional control for this gate at `angle`,
    /// inverted when `adjoint` is set.
    pub(crate) fn kernel(&self, angle: f64, adjoint: bool) -> (usize, Matrix2, Option<usize>) {
        let sign = if adjoint { -1.0 } else { 1.0 };
        let m = match self.kind {
            GateKind::Ry => ry_matrix(sign * angle),
            GateKind::Rz => rz_matrix(sign * angle),
            GateKind::Cnot | GateKind::X => Pauli::X.matrix(),
            GateKind::Y => Pauli::Y.matrix(),
            GateKind::Z => Pauli::Z.matrix(),
        };
        (self.target, m, self.control)
    }

    /// Generator decomposition `dU/da = f * sigma * U` for rotations:
    /// `f = -i/2` and `sigma` the rotation axis on the target.
    pub fn generator(&self, qubits: usize) -> Option<(Complex64, PauliString)> {
        let letter = match self.kind {
            GateKind::Ry => Pauli::Y,
            GateKind::Rz => Pauli::Z,
            _ => return None,
        };
        let s = PauliString::single(qubits, self.target, letter).ok()?;
        Some((Complex64::new(0.0, -0.5), s))
    }
}

/// Apply `gate` at `angle` to `state`, with the gate's qubits shifted by
/// `offset` and extra `controls` (already in global indices).
pub(crate) fn apply_gate_ext(
    state: &mut StateVector,
    gate: &Gate,
    angle: f64,
    adjoint: bool,
    offset: usize,
    controls: &[(usize, bool)],
) -> Result<()> {
    let (target, m, control) = gate.kernel(angle, adjoint);
    match control {
        None => state.apply_matrix(target + offset, &m, controls),
        Some(c) if controls.is_empty() => {
            state.apply_matrix(target + offset, &m, &[(c + offset, true)])
        }
        Some(c) => {
            let mut all = controls.to_vec();
            all.push((c + offset, true));
            state.apply_matrix(target + offset, &m, &all)
        }
    }
}

/// Apply a single gate in place; `angle` is required for slot rotations.
pub fn apply_gate(state: &mut StateVector, gate: &Gate, angle: Option<f64>) -> Result<()> {
    if gate.target >= state.qubits() {
        return Err(Error::QubitOutOfRange {
            index: gate.target,
            qubits: state.qubits(),
        });
    }
    let a = match (angle, gate.angle) {
        (Some(a), _) => a,
        (None, Some(a)) => a,
        (None, None) if gate.is_rotation() => {
            return Err(Error::InvalidInput("rotation needs an angle".into()))
        }
        _ => 0.0,
    };
    apply_gate_ext(state, gate, a, false, 0, &[])
}

/// Parameterized circuit `U(theta)` preceded by a fixed preparation prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    qubits: usize,
    parameter_count: usize,
    #[serde(default)]
    prefix: Vec<Gate>,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(qubits: usize, parameter_count: usize) -> Result<Self> {
        if qubits == 0 || qubits > super::state::MAX_SIM_QUBITS {
            return Err(Error::InvalidInput(format!("invalid qubit count {qubits}")));
        }
        Ok(Circuit {
            qubits,
            parameter_count,
            prefix: Vec::new(),
            gates: Vec::new(),
        })
    }

    /// Parameter-free circuit from fixed gates.
    pub fn fixed(qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(qubits, 0)?;
        c.set_prefix(gates)?;
        Ok(c)
    }

    pub fn set_prefix(&mut self, prefix: Vec<Gate>) -> Result<()> {
        for g in &prefix {
            g.validate(self.qubits, 0, false)?;
        }
        self.prefix = prefix;
        Ok(())
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.qubits, self.parameter_count, true)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_count
    }

    pub fn prefix(&self) -> &[Gate] {
        &self.prefix
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn is_parameter_free(&self) -> bool {
        self.gates.iter().all(|g| g.slot.is_none())
    }

    pub fn cnot_count(&self) -> usize {
        self.prefix
            .iter()
            .chain(&self.gates)
            .filter(|g| g.kind == GateKind::Cnot)
            .count()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.parameter_count {
            return Err(Error::ParameterCount {
                expected: self.parameter_count,
                actual: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Prefix followed by body gates, for callers that walk the whole circuit.
    pub fn all_gates(&self) -> impl Iterator<Item = &Gate> {
        self.prefix.iter().chain(self.gates.iter())
    }

    /// `U(theta) U_prefix |0...0>`.
    pub fn prepare(&self, theta: &[f64]) -> Result<StateVector> {
        self.check_theta(theta)?;
        let mut s = StateVector::zero(self.qubits)?;
        for g in self.all_gates() {
            apply_gate_ext(&mut s, g, g.resolve_angle(theta), false, 0, &[])?;
        }
        Ok(s)
    }

    /// Same circuit with every slot replaced by its value in `theta`; the
    /// result is parameter-free (all gates move into the prefix).
    pub fn bind(&self, theta: &[f64]) -> Result<Circuit> {
        self.check_theta(theta)?;
        let gates = self
            .all_gates()
            .map(|g| {
                let mut g = g.clone();
                if let Some(s) = g.slot.take() {
                    g.angle = Some(theta[s]);
                }
                g
            })
            .collect();
        Circuit::fixed(self.qubits, gates)
    }

    /// Terms `(f, |phi_i^s>)` of `d|phi>/d theta_i = sum_s f |phi_i^s>`, one per
    /// body gate that reads slot `i`, with `sigma` inserted right after that gate.
    pub fn derivative_state(
        &self,
        theta: &[f64],
        slot: usize,
    ) -> Result<Vec<(Complex64, StateVector)>> {
        self.check_theta(theta)?;
        if slot >= self.parameter_count {
            return Err(Error::InvalidSlot {
                slot,
                count: self.parameter_count,
            });
        }
        let mut out = Vec::new();
        for (pos, g) in self.gates.iter().enumerate() {
            if g.slot != Some(slot) {
                continue;
            }
            let (f, sigma) = g
                .generator(self.qubits)
                .ok_or_else(|| Error::InvalidInput("slot on a non-rotation gate".into()))?;
            out.push((f, self.prepare_with_insertion(theta, pos, &sigma)?));
        }
        Ok(out)
    }

    /// State with Pauli `sigma` inserted after body gate `pos`.
    pub fn prepare_with_insertion(
        &self,
        theta: &[f64],
        pos: usize,
        sigma: &PauliString,
    ) -> Result<StateVector> {
        self.check_theta(theta)?;
        if pos >= self.gates.len() {
            return Err(Error::InvalidInput(format!("gate position {pos} out of range")));
        }
        let mut s = StateVector::zero(self.qubits)?;
        for g in &self.prefix {
            apply_gate_ext(&mut s, g, g.resolve_angle(theta), false, 0, &[])?;
        }
        for (k, g) in self.gates.iter().enumerate() {
            apply_gate_ext(&mut s, g, g.resolve_angle(theta), false, 0, &[])?;
            if k == pos {
                s.apply_pauli_string(sigma, None)?;
            }
        }
        Ok(s)
    }

    /// `d|phi>/d theta_i` as one vector.
    pub fn tangent(&self, theta: &[f64], slot: usize) -> Result<Vec<Complex64>> {
        let mut acc = vec![Complex64::new(0.0, 0.0); 1 << self.qubits];
        for (f, s) in self.derivative_state(theta, slot)? {
            for (a, x) in acc.iter_mut().zip(s.amplitudes()) {
                *a += f * x;
            }
        }
        Ok(acc)
    }

    /// `<d_i phi | chi>` for every slot `i` by a single reverse sweep: the
    /// forward state is un-computed gate by gate while `chi` is pulled back
    /// through the same adjoint gates. Returns the final state as well.
    pub fn derivative_overlaps(
        &self,
        theta: &[f64],
        chi: &[Complex64],
    ) -> Result<(Vec<Complex64>, StateVector)> {
        let phi = self.prepare(theta)?;
        if chi.len() != phi.dim() {
            return Err(Error::DimensionMismatch {
                expected: phi.dim(),
                actual: chi.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.parameter_count];
        let mut psi = phi.clone();
        let mut lam = StateVector::from_amplitudes(chi.to_vec())?;
        for g in self.gates.iter().rev() {
            let angle = g.resolve_angle(theta);
            if let Some(slot) = g.slot {
                let (f, sigma) = g
                    .generator(self.qubits)
                    .ok_or_else(|| Error::InvalidInput("slot on a non-rotation gate".into()))?;
                let mut sp = psi.clone();
                sp.apply_pauli_string(&sigma, None)?;
                out[slot] += f.conj() * dot(sp.amplitudes(), lam.amplitudes());
            }
            apply_gate_ext(&mut psi, g, angle, true, 0, &[])?;
            apply_gate_ext(&mut lam, g, angle, true, 0, &[])?;
        }
        Ok((out, phi))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn from_json(text: &str) -> Result<Circuit> {
        let raw: Circuit = serde_json::from_str(text)?;
        let mut c = Circuit::new(raw.qubits, raw.parameter_count)?;
        c.set_prefix(raw.prefix)?;
        for g in raw.gates {
            c.push(g)?;
        }
        Ok(c)
    }
}

/// Hardware-efficient ansatz: `prefix`, then `(Ry, Rz)` on every qubit, then
/// `depth` blocks of a nearest-neighbour CNOT chain `CNOT(q, q+1)` for
/// `q = 0..n-2`, each CNOT followed by `(Ry, Rz)` on its target, and finally
/// the chain again in reverse order without parameters (omitted when
/// `depth == 0`, where there is no block to undo).
///
/// Parameter count is `2n + 2(n-1) * depth`.
pub fn build_hardware_ansatz(qubits: usize, depth: usize, prefix: &Circuit) -> Result<Circuit> {
    if prefix.qubits() != qubits {
        return Err(Error::DimensionMismatch {
            expected: qubits,
            actual: prefix.qubits(),
        });
    }
    if !prefix.is_parameter_free() {
        return Err(Error::InvalidInput("ansatz prefix must be parameter-free".into()));
    }
    let count = 2 * qubits + 2 * (qubits - 1) * depth;
    let mut c = Circuit::new(qubits, count)?;
    c.set_prefix(prefix.all_gates().cloned().collect())?;
    let mut slot = 0;
    for q in 0..qubits {
        c.push(Gate::ry(q, slot))?;
        c.push(Gate::rz(q, slot + 1))?;
        slot += 2;
    }
    for _ in 0..depth {
        for q in 0..qubits.saturating_sub(1) {
            c.push(Gate::cnot(q, q + 1))?;
            c.push(Gate::ry(q + 1, slot))?;
            c.push(Gate::rz(q + 1, slot + 1))?;
            slot += 2;
        }
    }
    if depth > 0 {
        for q in (0..qubits.saturating_sub(1)).rev() {
            c.push(Gate::cnot(q, q + 1))?;
        }
    }
    debug_assert_eq!(slot, count);
    Ok(c)
}
