//! Pauli strings, weighted sums of them (linear combinations of unitaries),
//! decomposition of general matrices into that form, and importance sampling
//! of the terms.
//!
//! A string on `n` qubits is stored as a pair of bit masks `(x, z)` so that
//! the operator is `i^{|x & z|} X^x Z^z`. Qubit 0 is the most significant bit
//! of a basis index, i.e. the leftmost tensor factor.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Coefficients below this magnitude are dropped by [`PauliSum::canonicalize`].
pub const PRUNE_TOLERANCE: f64 = 1e-14;

/// Largest qubit count for which dense matrices are materialized.
pub const DENSE_QUBIT_CAP: usize = 12;

/// Largest qubit count a string can address.
pub const MAX_QUBITS: usize = 62;

/// Single-qubit Pauli letter.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// 2x2 matrix in row-major order.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }
}

/// `i^k`.
#[inline]
pub(crate) fn i_pow(k: u32) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Tensor product of single-qubit Pauli letters.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(qubits: usize) -> Self {
        PauliString { qubits, x: 0, z: 0 }
    }

    pub fn new(letters: &[Pauli]) -> Result<Self> {
        let qubits = letters.len();
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(Error::InvalidInput(format!(
                "Pauli string length {qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (q, p) in letters.iter().enumerate() {
            let (bx, bz) = p.bits();
            let bit = 1u64 << (qubits - 1 - q);
            if bx {
                x |= bit;
            }
            if bz {
                z |= bit;
            }
        }
        Ok(PauliString { qubits, x, z })
    }

    /// A single letter on `target`, identity elsewhere.
    pub fn single(qubits: usize, target: usize, letter: Pauli) -> Result<Self> {
        if target >= qubits {
            return Err(Error::QubitOutOfRange {
                index: target,
                qubits,
            });
        }
        let mut letters = vec![Pauli::I; qubits];
        letters[target] = letter;
        PauliString::new(&letters)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        let bit = 1u64 << (self.qubits - 1 - qubit);
        Pauli::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.qubits).map(|q| self.letter(q)).collect()
    }

    /// Letters packed two bits each (I < X < Y < Z), qubit 0 most significant.
    fn order_key(&self) -> u128 {
        let mut key = 0u128;
        for q in 0..self.qubits {
            let code = match self.letter(q) {
                Pauli::I => 0,
                Pauli::X => 1,
                Pauli::Y => 2,
                Pauli::Z => 3,
            };
            key = (key << 2) | code;
        }
        key
    }

    /// Number of Y letters, i.e. the power of `i` in the `X^x Z^z` form.
    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Action on a basis state: `P|b> = phase * |b ^ x>`.
    #[inline]
    pub fn apply_basis(&self, b: usize) -> (Complex64, usize) {
        let sign = ((b as u64) & self.z).count_ones() * 2;
        (i_pow(self.y_count() + sign), b ^ self.x as usize)
    }

    /// `self * other = phase * result`.
    pub fn mul(&self, other: &PauliString) -> (Complex64, PauliString) {
        debug_assert_eq!(self.qubits, other.qubits);
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let k = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones();
        let out = PauliString {
            qubits: self.qubits,
            x,
            z,
        };
        // k - |x & z| may be negative; work mod 4.
        let k = (k + 4 * 64 - out.y_count()) & 3;
        (i_pow(k), out)
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.qubits
            .cmp(&other.qubits)
            .then_with(|| self.order_key().cmp(&other.order_key()))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.letters() {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .trim()
            .chars()
            .map(|c| {
                Pauli::from_char(c)
                    .ok_or_else(|| Error::InvalidInput(format!("bad Pauli letter '{c}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(&letters)
    }
}

/// `coefficient * string`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: Complex64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coefficient: Complex64, string: PauliString) -> Self {
        PauliTerm {
            coefficient,
            string,
        }
    }

    pub fn parse(coefficient: Complex64, letters: &str) -> Result<Self> {
        Ok(PauliTerm::new(coefficient, letters.parse()?))
    }
}

/// Linear combination `sum_j lambda_j sigma_j` of Pauli strings on a fixed
/// number of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn new(qubits: usize) -> Self {
        PauliSum {
            qubits,
            terms: Vec::new(),
        }
    }

    pub fn identity(qubits: usize, weight: Complex64) -> Self {
        PauliSum {
            qubits,
            terms: vec![PauliTerm::new(weight, PauliString::identity(qubits))],
        }
    }

    pub fn from_terms(qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        let mut sum = PauliSum::new(qubits);
        for t in terms {
            sum.push(t)?;
        }
        Ok(sum)
    }

    /// Convenience constructor from `(coefficient, letters)` pairs.
    pub fn from_pairs(pairs: &[(Complex64, &str)]) -> Result<Self> {
        let first = pairs.first().ok_or(Error::EmptySum)?;
        let qubits = first.1.trim().len();
        let terms = pairs
            .iter()
            .map(|(c, s)| PauliTerm::parse(*c, s))
            .collect::<Result<Vec<_>>>()?;
        PauliSum::from_terms(qubits, terms)
    }

    pub fn push(&mut self, term: PauliTerm) -> Result<()> {
        if term.string.qubits() != self.qubits {
            return Err(Error::DimensionMismatch {
                expected: self.qubits,
                actual: term.string.qubits(),
            });
        }
        if !(term.coefficient.re.is_finite() && term.coefficient.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `C = sum_j |lambda_j|`.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.norm()).sum()
    }

    /// Merge equal strings, drop near-zero coefficients, sort by letters.
    pub fn canonicalize(&self) -> PauliSum {
        let mut merged: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for t in &self.terms {
            *merged
                .entry(t.string)
                .or_insert(Complex64::new(0.0, 0.0)) += t.coefficient;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() >= PRUNE_TOLERANCE)
            .map(|(s, c)| PauliTerm::new(c, s))
            .collect();
        PauliSum {
            qubits: self.qubits,
            terms,
        }
    }

    pub fn scale(&self, factor: Complex64) -> PauliSum {
        PauliSum {
            qubits: self.qubits,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm::new(t.coefficient * factor, t.string))
                .collect(),
        }
    }

    /// Concatenation of terms (not canonicalized).
    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        if other.qubits != self.qubits {
            return Err(Error::DimensionMismatch {
                expected: self.qubits,
                actual: other.qubits,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(PauliSum {
            qubits: self.qubits,
            terms,
        })
    }

    /// Hermitian adjoint; Pauli strings are Hermitian so only weights conjugate.
    pub fn adjoint(&self) -> PauliSum {
        PauliSum {
            qubits: self.qubits,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm::new(t.coefficient.conj(), t.string))
                .collect(),
        }
    }

    /// Operator product `self * other`, canonicalized. Fails when the
    /// canonical result exceeds `cap` terms.
    pub fn mul(&self, other: &PauliSum, cap: usize) -> Result<PauliSum> {
        if other.qubits != self.qubits {
            return Err(Error::DimensionMismatch {
                expected: self.qubits,
                actual: other.qubits,
            });
        }
        let mut merged: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for a in &self.terms {
            for b in &other.terms {
                let (phase, s) = a.string.mul(&b.string);
                *merged.entry(s).or_insert(Complex64::new(0.0, 0.0)) +=
                    phase * a.coefficient * b.coefficient;
            }
        }
        let terms: Vec<PauliTerm> = merged
            .into_iter()
            .filter(|(_, c)| c.norm() >= PRUNE_TOLERANCE)
            .map(|(s, c)| PauliTerm::new(c, s))
            .collect();
        if terms.len() > cap {
            return Err(Error::TermCap {
                terms: terms.len(),
                cap,
            });
        }
        Ok(PauliSum {
            qubits: self.qubits,
            terms,
        })
    }

    /// True when the canonical form has real weights (within `tol`).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.canonicalize()
            .terms
            .iter()
            .all(|t| t.coefficient.im.abs() <= tol)
    }

    /// `sum_j lambda_j sigma_j |amps>`; the result is generally unnormalized.
    pub fn apply(&self, amps: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.terms.is_empty() {
            return Err(Error::EmptySum);
        }
        let dim = 1usize << self.qubits;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: amps.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for t in &self.terms {
            for (b, a) in amps.iter().enumerate() {
                let (phase, target) = t.string.apply_basis(b);
                out[target] += t.coefficient * phase * a;
            }
        }
        Ok(out)
    }

    /// Parse the line format `coeff_re coeff_im LETTERS`; blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse_text(text: &str) -> Result<PauliSum> {
        let mut terms = Vec::new();
        let mut qubits = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err("expected `re im LETTERS`"));
            }
            let re: f64 = fields[0].parse().map_err(|_| err("bad real part"))?;
            let im: f64 = fields[1].parse().map_err(|_| err("bad imaginary part"))?;
            let string: PauliString = fields[2].parse::<PauliString>().map_err(|e| err(&e.to_string()))?;
            match qubits {
                None => qubits = Some(string.qubits()),
                Some(q) if q != string.qubits() => return Err(err("inconsistent string length")),
                _ => {}
            }
            terms.push(PauliTerm::new(Complex64::new(re, im), string));
        }
        let qubits = qubits.ok_or(Error::EmptySum)?;
        PauliSum::from_terms(qubits, terms)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            s.push_str(&format!(
                "{} {} {}\n",
                t.coefficient.re, t.coefficient.im, t.string
            ));
        }
        s
    }
}

fn check_dense_cap(qubits: usize) -> Result<()> {
    if qubits > DENSE_QUBIT_CAP {
        return Err(Error::DenseCap {
            qubits,
            cap: DENSE_QUBIT_CAP,
        });
    }
    Ok(())
}

/// Dense `2^n x 2^n` matrix of a Pauli sum.
pub fn pauli_to_matrix(p: &PauliSum) -> Result<DMatrix<Complex64>> {
    check_dense_cap(p.qubits)?;
    let dim = 1usize << p.qubits;
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for t in &p.terms {
        for col in 0..dim {
            let (phase, row) = t.string.apply_basis(col);
            m[(row, col)] += t.coefficient * phase;
        }
    }
    Ok(m)
}

/// Expand every entry `M_xy |x><y|` qubit by qubit into Pauli strings,
/// using `|0><0| = (I+Z)/2`, `|0><1| = (X+iY)/2`, `|1><0| = (X-iY)/2`,
/// `|1><1| = (I-Z)/2`. The result has `2^n` terms per nonzero entry and is
/// left unmerged, so its one-norm equals `sum |M_xy|`.
pub fn decompose_elementwise(m: &SparseMatrix) -> Result<PauliSum> {
    let qubits = m.qubits();
    let half = Complex64::new(0.5, 0.0);
    let i_half = Complex64::new(0.0, 0.5);
    let mut sum = PauliSum::new(qubits);
    for &(row, col, value) in m.entries() {
        // Per-qubit pair of (letter, weight).
        let factors: Vec<[(Pauli, Complex64); 2]> = (0..qubits)
            .map(|q| {
                let shift = qubits - 1 - q;
                let xb = (row >> shift) & 1;
                let yb = (col >> shift) & 1;
                match (xb, yb) {
                    (0, 0) => [(Pauli::I, half), (Pauli::Z, half)],
                    (0, 1) => [(Pauli::X, half), (Pauli::Y, i_half)],
                    (1, 0) => [(Pauli::X, half), (Pauli::Y, -i_half)],
                    _ => [(Pauli::I, half), (Pauli::Z, -half)],
                }
            })
            .collect();
        for choice in 0..(1usize << qubits) {
            let mut letters = Vec::with_capacity(qubits);
            let mut weight = value;
            for (q, f) in factors.iter().enumerate() {
                let (letter, w) = f[(choice >> (qubits - 1 - q)) & 1];
                letters.push(letter);
                weight *= w;
            }
            sum.push(PauliTerm::new(weight, PauliString::new(&letters)?))?;
        }
    }
    Ok(sum)
}

/// Pauli coefficients of a dense `2^n x 2^n` matrix via `Tr(P M) / 2^n`,
/// canonical (zero coefficients dropped).
pub fn decompose_dense(m: &DMatrix<Complex64>) -> Result<PauliSum> {
    let dim = m.nrows();
    if dim != m.ncols() || dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "dense decomposition needs a square power-of-two matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let qubits = dim.trailing_zeros() as usize;
    check_dense_cap(qubits)?;
    let norm = 1.0 / dim as f64;
    let mut terms = Vec::new();
    for x in 0..dim as u64 {
        for z in 0..dim as u64 {
            let s = PauliString { qubits, x, z };
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..dim {
                let (phase, r) = s.apply_basis(c);
                // Tr(P M) = sum_c P_{r,c} M_{c,r} with r = c ^ x.
                acc += phase * m[(c, r)];
            }
            let coeff = acc * norm;
            if coeff.norm() >= PRUNE_TOLERANCE {
                terms.push(PauliTerm::new(coeff, s));
            }
        }
    }
    let mut sum = PauliSum { qubits, terms };
    sum.terms.sort_by_key(|t| t.string);
    Ok(sum)
}

/// Importance sampler over the terms of a Pauli sum with `p_j = |lambda_j| / C`.
#[derive(Clone, Debug)]
pub struct LcuSampler {
    source: PauliSum,
    one_norm: f64,
    cumulative: Vec<f64>,
}

impl LcuSampler {
    pub fn new(p: &PauliSum) -> Result<Self> {
        let weights: Vec<f64> = p.terms.iter().map(|t| t.coefficient.norm()).collect();
        let one_norm: f64 = weights.iter().sum();
        if p.is_empty() || one_norm <= 0.0 || !one_norm.is_finite() {
            return Err(Error::InvalidSampler);
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / one_norm;
                acc
            })
            .collect();
        Ok(LcuSampler {
            source: p.clone(),
            one_norm,
            cumulative,
        })
    }

    pub fn source(&self) -> &PauliSum {
        &self.source
    }

    pub fn one_norm(&self) -> f64 {
        self.one_norm
    }

    pub fn probability(&self, j: usize) -> f64 {
        self.source.terms[j].coefficient.norm() / self.one_norm
    }

    /// Draw a term index and the unit-modulus phase `lambda_j / |lambda_j|`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Complex64) {
        let u: f64 = rng.random();
        let j = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        // Zero-weight terms have zero-width intervals and are never hit except
        // through the clamp above, which only lands on the last term.
        let c = self.source.terms[j].coefficient;
        let phase = if c.norm() > 0.0 {
            c / c.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        (j, phase)
    }
}

pub fn build_sampler(p: &PauliSum) -> Result<LcuSampler> {
    LcuSampler::new(p)
}

pub fn sample_term<R: Rng + ?Sized>(s: &LcuSampler, rng: &mut R) -> (usize, Complex64) {
    s.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ibm_sparse() -> SparseMatrix {
        SparseMatrix::new(
            2,
            vec![
                (0, 0, c(1.5, 0.0)),
                (0, 1, c(-0.5, 0.0)),
                (1, 0, c(0.5, 0.0)),
                (1, 1, c(1.5, 0.0)),
            ],
        )
        .unwrap()
    }

    fn assert_matrix(m: &DMatrix<Complex64>, expected: &[&[(f64, f64)]], tol: f64) {
        for (r, row) in expected.iter().enumerate() {
            for (col, &(re, im)) in row.iter().enumerate() {
                let d = (m[(r, col)] - c(re, im)).norm();
                assert!(d < tol, "entry ({r},{col}) = {} expected {re}+{im}i", m[(r, col)]);
            }
        }
    }

    #[test]
    fn identity_to_matrix() {
        let p = PauliSum::identity(1, c(1.0, 0.0));
        let m = pauli_to_matrix(&p).unwrap();
        assert_matrix(&m, &[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)]], 1e-15);
    }

    #[test]
    fn ibm_pauli_form_to_matrix() {
        let p = PauliSum::from_pairs(&[(c(1.5, 0.0), "I"), (c(0.0, -0.5), "Y")]).unwrap();
        let m = pauli_to_matrix(&p).unwrap();
        assert_matrix(
            &m,
            &[&[(1.5, 0.0), (-0.5, 0.0)], &[(0.5, 0.0), (1.5, 0.0)]],
            1e-15,
        );
    }

    #[test]
    fn mixed_real_sum_to_matrix() {
        let p = PauliSum::from_pairs(&[(c(1.0, 0.0), "Z"), (c(0.75, 0.0), "X"), (c(1.25, 0.0), "I")])
            .unwrap();
        let m = pauli_to_matrix(&p).unwrap();
        assert_matrix(
            &m,
            &[&[(2.25, 0.0), (0.75, 0.0)], &[(0.75, 0.0), (0.25, 0.0)]],
            1e-15,
        );
    }

    #[test]
    fn two_qubit_string_is_kronecker_product() {
        let p = PauliSum::from_pairs(&[(c(1.0, 0.0), "XZ")]).unwrap();
        let m = pauli_to_matrix(&p).unwrap();
        // X (x) Z: |00> -> |10>, |01> -> -|11>
        assert_eq!(m[(2, 0)], c(1.0, 0.0));
        assert_eq!(m[(3, 1)], c(-1.0, 0.0));
        assert_eq!(m[(0, 2)], c(1.0, 0.0));
        assert_eq!(m[(1, 3)], c(-1.0, 0.0));
    }

    #[test]
    fn dense_cap_enforced() {
        let p = PauliSum::identity(13, c(1.0, 0.0));
        assert!(matches!(pauli_to_matrix(&p), Err(Error::DenseCap { .. })));
    }

    #[test]
    fn string_product_matches_matrices() {
        for a in ["I", "X", "Y", "Z"] {
            for b in ["I", "X", "Y", "Z"] {
                let pa: PauliString = a.parse().unwrap();
                let pb: PauliString = b.parse().unwrap();
                let (phase, s) = pa.mul(&pb);
                let lhs = pauli_to_matrix(&PauliSum::from_pairs(&[(c(1.0, 0.0), a)]).unwrap())
                    .unwrap()
                    * pauli_to_matrix(&PauliSum::from_pairs(&[(c(1.0, 0.0), b)]).unwrap()).unwrap();
                let rhs = pauli_to_matrix(
                    &PauliSum::from_terms(1, vec![PauliTerm::new(phase, s)]).unwrap(),
                )
                .unwrap();
                assert!((lhs - rhs).norm() < 1e-15, "{a}*{b}");
            }
        }
    }

    #[test]
    fn projector_decomposes_to_half_identity_plus_half_z() {
        let m = SparseMatrix::new(2, vec![(0, 0, c(1.0, 0.0))]).unwrap();
        let p = decompose_elementwise(&m).unwrap();
        let expected = PauliSum::from_pairs(&[(c(0.5, 0.0), "I"), (c(0.5, 0.0), "Z")]).unwrap();
        assert_eq!(p.canonicalize(), expected);
    }

    #[test]
    fn identity_entries_merge_to_identity_string() {
        let m = SparseMatrix::new(4, (0..4).map(|i| (i, i, c(1.0, 0.0))).collect()).unwrap();
        let p = decompose_elementwise(&m).unwrap().canonicalize();
        assert_eq!(p.len(), 1);
        assert!(p.terms()[0].string.is_identity());
        assert!((p.terms()[0].coefficient - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn ibm_matrix_elementwise_round_trip() {
        let p = decompose_elementwise(&ibm_sparse()).unwrap();
        assert_eq!(p.len(), 8);
        assert!((p.one_norm() - 4.0).abs() < 1e-15);
        let canon = p.canonicalize();
        let expected = PauliSum::from_pairs(&[(c(1.5, 0.0), "I"), (c(0.0, -0.5), "Y")]).unwrap();
        assert_eq!(canon.len(), 2);
        for (a, b) in canon.terms().iter().zip(expected.terms()) {
            assert_eq!(a.string, b.string);
            assert!((a.coefficient - b.coefficient).norm() < 1e-15);
        }
        assert!((canon.one_norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn canonicalize_cancels_and_merges() {
        let p = PauliSum::from_pairs(&[(c(1.0, 0.0), "X"), (c(-1.0, 0.0), "X")]).unwrap();
        assert!(p.canonicalize().is_empty());
        let p = PauliSum::from_pairs(&[(c(0.5, 0.0), "I"), (c(1.0, 0.0), "I")]).unwrap();
        let q = p.canonicalize();
        assert_eq!(q.len(), 1);
        assert_eq!(q.terms()[0].coefficient, c(1.5, 0.0));
    }

    #[test]
    fn canonical_order_is_lexicographic() {
        let p = PauliSum::from_pairs(&[
            (c(1.0, 0.0), "ZI"),
            (c(1.0, 0.0), "IX"),
            (c(1.0, 0.0), "XY"),
            (c(1.0, 0.0), "II"),
        ])
        .unwrap()
        .canonicalize();
        let order: Vec<String> = p.terms().iter().map(|t| t.string.to_string()).collect();
        assert_eq!(order, vec!["II", "IX", "XY", "ZI"]);
    }

    #[test]
    fn dense_decomposition_matches_elementwise() {
        let m = ibm_sparse();
        let dense = m.to_dense().unwrap();
        let a = decompose_dense(&dense).unwrap();
        let b = decompose_elementwise(&m).unwrap().canonicalize();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.terms().iter().zip(b.terms()) {
            assert_eq!(x.string, y.string);
            assert!((x.coefficient - y.coefficient).norm() < 1e-14);
        }
    }

    #[test]
    fn adjoint_product_of_ibm_matrix_is_scaled_identity() {
        let m = PauliSum::from_pairs(&[(c(1.5, 0.0), "I"), (c(0.0, -0.5), "Y")]).unwrap();
        let mtm = m.adjoint().mul(&m, 4096).unwrap();
        assert_eq!(mtm.len(), 1);
        assert!((mtm.terms()[0].coefficient - c(2.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn product_cap_is_enforced() {
        let m = PauliSum::from_pairs(&[(c(1.0, 0.0), "XI"), (c(1.0, 0.0), "IZ")]).unwrap();
        assert!(matches!(m.mul(&m.adjoint(), 1), Err(Error::TermCap { .. })));
        assert_eq!(m.mul(&m.adjoint(), 2).unwrap().len(), 2);
    }

    #[test]
    fn apply_matches_dense() {
        let p = PauliSum::from_pairs(&[(c(1.5, 0.0), "I"), (c(0.0, -0.5), "Y")]).unwrap();
        let out = p.apply(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((out[0] - c(1.5, 0.0)).norm() < 1e-15);
        assert!((out[1] - c(0.5, 0.0)).norm() < 1e-15);
        assert!(matches!(PauliSum::new(1).apply(&[c(1.0, 0.0), c(0.0, 0.0)]), Err(Error::EmptySum)));
    }

    #[test]
    fn text_format_round_trip() {
        let p = PauliSum::from_pairs(&[(c(1.5, 0.0), "II"), (c(0.25, -0.5), "XY")]).unwrap();
        let text = p.to_text();
        assert!(text.starts_with("1.5 0 II"));
        assert_eq!(PauliSum::parse_text(&text).unwrap(), p);
        assert!(matches!(
            PauliSum::parse_text("1.0 0.0 XI\n1.0 0.0 X\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(PauliSum::parse_text("1.0 XI").is_err());
        assert!(PauliSum::parse_text("1.0 0.0 XQ").is_err());
    }

    #[test]
    fn single_term_sampler() {
        let p = PauliSum::from_pairs(&[(c(0.0, -2.0), "XZ")]).unwrap();
        let s = build_sampler(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (j, phase) = sample_term(&s, &mut rng);
            assert_eq!(j, 0);
            assert!((phase - c(0.0, -1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn sampler_one_norms_for_ibm_matrix() {
        let unmerged = decompose_elementwise(&ibm_sparse()).unwrap();
        assert_eq!(build_sampler(&unmerged).unwrap().one_norm(), 4.0);
        let merged = unmerged.canonicalize();
        assert!((build_sampler(&merged).unwrap().one_norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn merged_sampler_frequencies_within_binomial_bounds() {
        let merged = decompose_elementwise(&ibm_sparse()).unwrap().canonicalize();
        let s = build_sampler(&merged).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let mut hits = [0usize; 2];
        for _ in 0..draws {
            hits[s.sample(&mut rng).0] += 1;
        }
        for (j, p) in [0.75, 0.25].into_iter().enumerate() {
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = hits[j] as f64 / draws as f64;
            assert!((freq - p).abs() < 3.0 * sigma, "term {j}: {freq} vs {p}");
        }
    }

    #[test]
    fn zero_sampler_rejected() {
        let p = PauliSum::from_pairs(&[(c(0.0, 0.0), "X")]).unwrap();
        assert!(matches!(build_sampler(&p), Err(Error::InvalidSampler)));
        assert!(matches!(build_sampler(&PauliSum::new(1)), Err(Error::InvalidSampler)));
    }
}
