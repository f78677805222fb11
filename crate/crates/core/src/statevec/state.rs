use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};

pub type Matrix2 = [[Complex64; 2]; 2];

/// Dense pure state over `n` qubits. Amplitude `k` belongs to the basis state
/// whose big-endian bit string is `k`; qubit 0 is the most significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

/// Maximum register size simulated densely.
pub const MAX_SIM_QUBITS: usize = 24;

impl StateVector {
    /// `|0...0>`.
    pub fn zero(qubits: usize) -> Result<Self> {
        StateVector::basis(qubits, 0)
    }

    pub fn basis(qubits: usize, index: usize) -> Result<Self> {
        if qubits == 0 || qubits > MAX_SIM_QUBITS {
            return Err(Error::InvalidInput(format!(
                "register of {qubits} qubits outside 1..={MAX_SIM_QUBITS}"
            )));
        }
        let dim = 1usize << qubits;
        if index >= dim {
            return Err(Error::InvalidInput(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { qubits, amps })
    }

    /// Wrap raw amplitudes without normalizing. Length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "amplitude count {dim} is not a power of two >= 2"
            )));
        }
        Ok(StateVector {
            qubits: dim.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescale to unit norm, returning the previous norm.
    pub fn normalize(&mut self) -> Result<f64> {
        let norm = self.norm_sqr().sqrt();
        if norm < 1e-300 {
            return Err(Error::Annihilated(norm));
        }
        let inv = 1.0 / norm;
        for a in &mut self.amps {
            *a *= inv;
        }
        Ok(norm)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.qubits != other.qubits {
            return Err(Error::DimensionMismatch {
                expected: self.qubits,
                actual: other.qubits,
            });
        }
        Ok(dot(&self.amps, &other.amps))
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.qubits {
            return Err(Error::QubitOutOfRange {
                index: q,
                qubits: self.qubits,
            });
        }
        Ok(())
    }

    #[inline]
    fn bit(&self, q: usize) -> usize {
        1usize << (self.qubits - 1 - q)
    }

    /// Apply a 2x2 matrix to `target`, restricted to basis states where every
    /// `(qubit, value)` control matches.
    pub fn apply_matrix(
        &mut self,
        target: usize,
        m: &Matrix2,
        controls: &[(usize, bool)],
    ) -> Result<()> {
        self.check_qubit(target)?;
        let mut cmask = 0usize;
        let mut cval = 0usize;
        for &(q, v) in controls {
            self.check_qubit(q)?;
            if q == target {
                return Err(Error::InvalidInput("control equals target".into()));
            }
            let b = self.bit(q);
            cmask |= b;
            if v {
                cval |= b;
            }
        }
        let tb = self.bit(target);
        let [[a, b], [c, d]] = *m;
        for (n, chunk) in self.amps.chunks_exact_mut(2 * tb).enumerate() {
            let base = n * 2 * tb;
            let (lo, hi) = chunk.split_at_mut(tb);
            for (k, (x0, x1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                if cmask != 0 && (base + k) & cmask != cval {
                    continue;
                }
                let (u, v) = (*x0, *x1);
                *x0 = a * u + b * v;
                *x1 = c * u + d * v;
            }
        }
        Ok(())
    }

    /// Apply a Pauli string acting on the lowest `p.qubits()` qubits of this
    /// register (the whole register when sizes match), optionally controlled
    /// on one qubit outside that block.
    pub fn apply_pauli_string(
        &mut self,
        p: &PauliString,
        control: Option<(usize, bool)>,
    ) -> Result<()> {
        if p.qubits() > self.qubits {
            return Err(Error::DimensionMismatch {
                expected: self.qubits,
                actual: p.qubits(),
            });
        }
        let low = (1usize << p.qubits()) - 1;
        let (cmask, cval) = match control {
            Some((q, v)) => {
                self.check_qubit(q)?;
                if self.qubits - 1 - q < p.qubits() {
                    return Err(Error::InvalidInput(
                        "control qubit overlaps the Pauli block".into(),
                    ));
                }
                let b = self.bit(q);
                (b, if v { b } else { 0 })
            }
            None => (0, 0),
        };
        let mut out = self.amps.clone();
        for (i, a) in self.amps.iter().enumerate() {
            if i & cmask != cval {
                continue;
            }
            let (phase, t) = p.apply_basis(i & low);
            out[(i & !low) | t] = phase * a;
        }
        // Controlled-off entries were copied unchanged by the clone; controlled-on
        // entries are all overwritten because the map is a bijection on them.
        self.amps = out;
        Ok(())
    }

    /// Debug dump as `index,re,im` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,re,im\n");
        for (i, a) in self.amps.iter().enumerate() {
            s.push_str(&format!("{i},{:.17e},{:.17e}\n", a.re, a.im));
        }
        s
    }
}

#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    a.inner(b)
}

/// `sum_j lambda_j sigma_j |s>`, not normalized.
pub fn apply_pauli_sum(s: &StateVector, p: &PauliSum) -> Result<StateVector> {
    if p.qubits() != s.qubits() {
        return Err(Error::DimensionMismatch {
            expected: s.qubits(),
            actual: p.qubits(),
        });
    }
    StateVector::from_amplitudes(p.apply(s.amplitudes())?)
}

pub fn ry_matrix(angle: f64) -> Matrix2 {
    let (s, c) = (angle / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rz_matrix(angle: f64) -> Matrix2 {
    let (s, c) = (angle / 2.0).sin_cos();
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::new(c, -s), z], [z, Complex64::new(c, s)]]
}

pub fn hadamard_matrix() -> Matrix2 {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}
