//! Energies and gradients of the multiplication and linear-system
//! Hamiltonians.
//!
//! Three evaluation modes share one interface:
//! * `Exact` works on statevectors directly (with reverse-sweep gradients);
//! * `HadamardExact` simulates every overlap as a Hadamard test on an extra
//!   ancilla qubit and reads the exact outcome probability;
//! * `HadamardShots` samples those outcomes with a finite number of shots.
//!
//! Every overlap has the form `<a|b>` where `|a>` and `|b>` may share a
//! common prefix of gates; the ancilla selects between the two branches.
//! `|v0>` is prepared by a separate reference circuit. When the ansatz
//! prefix equals that circuit the two states share it.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{LcuSampler, PauliString, PauliSum};
use crate::problem::{Problem, Task};
use crate::statevec::{apply_gate_ext, dot, hadamard_matrix, Circuit, Gate, StateVector};

/// Term cap for the symbolic `M^dag M` product.
pub const GRAM_TERM_CAP: usize = 4096;

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    HadamardExact,
    HadamardShots,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Real,
    Imag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub mode: Mode,
    /// Shots per amplitude estimate (per term and part when terms are
    /// evaluated exhaustively, in total when importance sampling).
    pub shots: u64,
    pub seed: u64,
    /// Importance sampling kicks in above this many terms in shots mode.
    pub importance_threshold: usize,
    pub force_importance: bool,
    /// Keep per-term amplitude estimates in energy reports.
    pub per_term: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            mode: Mode::Exact,
            shots: 10_000,
            seed: 0,
            importance_threshold: 64,
            force_importance: false,
            per_term: false,
        }
    }
}

impl EstimatorConfig {
    pub fn exact() -> Self {
        EstimatorConfig::default()
    }

    pub fn hadamard_exact() -> Self {
        EstimatorConfig {
            mode: Mode::HadamardExact,
            ..Default::default()
        }
    }

    pub fn shots(shots: u64, seed: u64) -> Self {
        EstimatorConfig {
            mode: Mode::HadamardShots,
            shots,
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.mode == Mode::HadamardShots && self.shots == 0 {
            return Err(Error::ZeroShots);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub family: String,
    pub index: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermEstimate>>,
}

/// Which overlap a Hadamard test estimates, relative to an ansatz state
/// `|phi> = U(theta) U_prefix |0>` and a reference state `|v0>`. `gate`
/// indexes the body; `|phi_k>` is the ansatz state with the generator of
/// rotation `k` inserted right after it.
#[derive(Clone, Debug, PartialEq)]
pub enum Sandwich {
    /// `<phi|sigma|phi>`
    Expectation(PauliString),
    /// `<phi|sigma|v0>`
    Transition(PauliString),
    /// `<v0|sigma|v0>`
    Reference(PauliString),
    /// `<phi_k|sigma|phi>`
    DerivativeExpectation { gate: usize, sigma: PauliString },
    /// `<phi_k|sigma|v0>`
    DerivativeTransition { gate: usize, sigma: PauliString },
}

impl Sandwich {
    fn sigma(&self) -> &PauliString {
        match self {
            Sandwich::Expectation(s) | Sandwich::Transition(s) | Sandwich::Reference(s) => s,
            Sandwich::DerivativeExpectation { sigma, .. }
            | Sandwich::DerivativeTransition { sigma, .. } => sigma,
        }
    }
}

enum Op<'c> {
    Gate(&'c Gate, f64),
    Pauli(PauliString),
}

struct Branches<'c> {
    prefix: Vec<Op<'c>>,
    bra: Vec<Op<'c>>,
    ket: Vec<Op<'c>>,
}

fn branches<'c>(
    c: &'c Circuit,
    reference: &'c [Gate],
    theta: &[f64],
    sw: &Sandwich,
) -> Result<Branches<'c>> {
    if theta.len() != c.parameter_count() {
        return Err(Error::ParameterCount {
            expected: c.parameter_count(),
            actual: theta.len(),
        });
    }
    if sw.sigma().qubits() != c.qubits() {
        return Err(Error::InvalidPlacement(format!(
            "Pauli string on {} qubits for a {}-qubit circuit",
            sw.sigma().qubits(),
            c.qubits()
        )));
    }
    let op = |g: &'c Gate| Op::Gate(g, g.resolve_angle(theta));
    let prefix_ops = || c.prefix().iter().map(op);
    let body = c.gates();
    let shared = c.prefix() == reference;
    let with_sigma = |s: &PauliString| -> Vec<Op<'c>> {
        reference.iter().map(op).chain([Op::Pauli(*s)]).collect()
    };
    let generator = |k: usize| -> Result<PauliString> {
        let g = body.get(k).ok_or_else(|| {
            Error::InvalidPlacement(format!("gate {k} outside a body of {}", body.len()))
        })?;
        g.generator(c.qubits())
            .map(|(_, s)| s)
            .ok_or_else(|| Error::InvalidPlacement(format!("gate {k} is not a rotation")))
    };
    Ok(match sw {
        Sandwich::Expectation(s) => Branches {
            prefix: c.all_gates().map(op).collect(),
            bra: vec![],
            ket: vec![Op::Pauli(*s)],
        },
        Sandwich::Transition(s) if shared => Branches {
            prefix: prefix_ops().collect(),
            bra: body.iter().map(op).collect(),
            ket: vec![Op::Pauli(*s)],
        },
        Sandwich::Transition(s) => Branches {
            prefix: vec![],
            bra: c.all_gates().map(op).collect(),
            ket: with_sigma(s),
        },
        Sandwich::Reference(s) => Branches {
            prefix: reference.iter().map(op).collect(),
            bra: vec![],
            ket: vec![Op::Pauli(*s)],
        },
        Sandwich::DerivativeExpectation { gate, sigma } => {
            let g = generator(*gate)?;
            let mut bra = vec![Op::Pauli(g)];
            bra.extend(body[gate + 1..].iter().map(op));
            let mut ket: Vec<Op> = body[gate + 1..].iter().map(op).collect();
            ket.push(Op::Pauli(*sigma));
            Branches {
                prefix: prefix_ops().chain(body[..=*gate].iter().map(op)).collect(),
                bra,
                ket,
            }
        }
        Sandwich::DerivativeTransition { gate, sigma } => {
            let g = generator(*gate)?;
            let mut bra: Vec<Op> = if shared { vec![] } else { prefix_ops().collect() };
            bra.extend(body[..=*gate].iter().map(op));
            bra.push(Op::Pauli(g));
            bra.extend(body[gate + 1..].iter().map(op));
            if shared {
                Branches {
                    prefix: prefix_ops().collect(),
                    bra,
                    ket: vec![Op::Pauli(*sigma)],
                }
            } else {
                Branches {
                    prefix: vec![],
                    bra,
                    ket: with_sigma(sigma),
                }
            }
        }
    })
}

fn apply_ops(s: &mut StateVector, ops: &[Op], offset: usize, control: Option<(usize, bool)>) -> Result<()> {
    let controls: &[(usize, bool)] = match &control {
        Some(c) => std::slice::from_ref(c),
        None => &[],
    };
    for o in ops {
        match o {
            Op::Gate(g, a) => apply_gate_ext(s, g, *a, false, offset, controls)?,
            Op::Pauli(p) => s.apply_pauli_string(p, control)?,
        }
    }
    Ok(())
}

/// `<bra|ket>` by direct simulation of both branches.
fn overlap_direct(n: usize, b: &Branches) -> Result<Complex64> {
    let mut s = StateVector::zero(n)?;
    apply_ops(&mut s, &b.prefix, 0, None)?;
    let mut a = s.clone();
    apply_ops(&mut a, &b.bra, 0, None)?;
    apply_ops(&mut s, &b.ket, 0, None)?;
    Ok(dot(a.amplitudes(), s.amplitudes()))
}

/// Probability of the `+1` ancilla outcome and the sign mapping `<X>` to the
/// requested part: `Re<a|b> = <X>` with the ancilla in `|+>`, and
/// `Im<a|b> = -<X>` with the ancilla in `(|0> + i|1>)/sqrt 2`.
fn ancilla_probability(n: usize, b: &Branches, part: Part) -> Result<(f64, f64)> {
    let mut s = StateVector::zero(n + 1)?;
    let h = hadamard_matrix();
    s.apply_matrix(0, &h, &[])?;
    if part == Part::Imag {
        let z = Complex64::new(0.0, 0.0);
        let phase = [[Complex64::new(1.0, 0.0), z], [z, Complex64::new(0.0, 1.0)]];
        s.apply_matrix(0, &phase, &[])?;
    }
    apply_ops(&mut s, &b.prefix, 1, None)?;
    apply_ops(&mut s, &b.bra, 1, Some((0, false)))?;
    apply_ops(&mut s, &b.ket, 1, Some((0, true)))?;
    s.apply_matrix(0, &h, &[])?;
    let half = s.dim() / 2;
    let p0: f64 = s.amplitudes()[..half].iter().map(|a| a.norm_sqr()).sum();
    let sign = if part == Part::Real { 1.0 } else { -1.0 };
    Ok((p0.clamp(0.0, 1.0), sign))
}

/// One Hadamard-test estimate of `Re` or `Im` of the sandwiched overlap,
/// with `|v0>` prepared by the circuit's own prefix.
pub fn hadamard_test<R: Rng + ?Sized>(
    circuit: &Circuit,
    theta: &[f64],
    sandwich: &Sandwich,
    part: Part,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<f64> {
    hadamard_test_with_reference(circuit, circuit.prefix(), theta, sandwich, part, cfg, rng)
}

/// [`hadamard_test`] with `|v0>` prepared by `reference` from `|0...0>`.
pub fn hadamard_test_with_reference<R: Rng + ?Sized>(
    circuit: &Circuit,
    reference: &[Gate],
    theta: &[f64],
    sandwich: &Sandwich,
    part: Part,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    check_reference(circuit, reference)?;
    let b = branches(circuit, reference, theta, sandwich)?;
    let n = circuit.qubits();
    match cfg.mode {
        Mode::Exact => {
            let v = overlap_direct(n, &b)?;
            Ok(if part == Part::Real { v.re } else { v.im })
        }
        Mode::HadamardExact => {
            let (p0, sign) = ancilla_probability(n, &b, part)?;
            Ok(sign * (2.0 * p0 - 1.0))
        }
        Mode::HadamardShots => {
            let (p0, sign) = ancilla_probability(n, &b, part)?;
            let k = Binomial::new(cfg.shots, p0).expect("valid binomial").sample(rng);
            Ok(sign * (2.0 * k as f64 / cfg.shots as f64 - 1.0))
        }
    }
}

fn check_reference(circuit: &Circuit, reference: &[Gate]) -> Result<()> {
    for g in reference {
        if g.slot.is_some() {
            return Err(Error::InvalidInput("reference circuit must be parameter-free".into()));
        }
        if g.target >= circuit.qubits() || g.control.is_some_and(|c| c >= circuit.qubits()) {
            return Err(Error::QubitOutOfRange {
                index: g.target.max(g.control.unwrap_or(0)),
                qubits: circuit.qubits(),
            });
        }
    }
    Ok(())
}

/// Complex estimate with the covariance of its real and imaginary parts.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct Amplitude {
    pub value: Complex64,
    pub var_re: f64,
    pub var_im: f64,
    pub cov: f64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Call identifier for sub-family `family`, item `k` of evaluation `call`.
fn sub_call(call: u64, family: u64, k: u64) -> u64 {
    splitmix(call ^ splitmix((family << 40) ^ k))
}

/// Independent stream for `(seed, call, index)`.
pub(crate) fn stream_rng(seed: u64, call: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(call)));
    r.set_stream(index);
    r
}

/// Per-term estimate of one part in exhaustive shot mode: (value, variance).
fn part_estimate(
    n: usize,
    b: &Branches,
    part: Part,
    cfg: &EstimatorConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    match cfg.mode {
        Mode::Exact => {
            let v = overlap_direct(n, b)?;
            Ok((if part == Part::Real { v.re } else { v.im }, 0.0))
        }
        Mode::HadamardExact => {
            let (p0, sign) = ancilla_probability(n, b, part)?;
            Ok((sign * (2.0 * p0 - 1.0), 0.0))
        }
        Mode::HadamardShots => {
            let (p0, sign) = ancilla_probability(n, b, part)?;
            let k = Binomial::new(cfg.shots, p0).expect("valid binomial").sample(rng);
            let x = 2.0 * k as f64 / cfg.shots as f64 - 1.0;
            Ok((sign * x, (1.0 - x * x) / cfg.shots as f64))
        }
    }
}

/// `sum_j w_j <a_j|b_j>` over sandwiches. With `real_only` only real parts
/// are measured (for Hermitian expectation sums with real weights).
pub(crate) fn weighted_sum(
    circuit: &Circuit,
    reference: &[Gate],
    theta: &[f64],
    terms: &[(Complex64, Sandwich)],
    real_only: bool,
    cfg: &EstimatorConfig,
    call: u64,
    mut breakdown: Option<(&str, &mut Vec<TermEstimate>)>,
) -> Result<Amplitude> {
    cfg.validate()?;
    if terms.is_empty() {
        return Err(Error::EmptySum);
    }
    let n = circuit.qubits();
    let importance = cfg.mode == Mode::HadamardShots
        && (cfg.force_importance || terms.len() > cfg.importance_threshold);
    if importance {
        return importance_sum(circuit, reference, theta, terms, real_only, cfg, call);
    }
    let per_term: Vec<(Complex64, f64, f64)> = terms
        .par_iter()
        .enumerate()
        .map(|(j, (_, sw))| {
            let b = branches(circuit, reference, theta, sw)?;
            let mut rng = stream_rng(cfg.seed, call, j as u64);
            let (r, vr) = part_estimate(n, &b, Part::Real, cfg, &mut rng)?;
            let (i, vi) = if real_only {
                (0.0, 0.0)
            } else {
                part_estimate(n, &b, Part::Imag, cfg, &mut rng)?
            };
            Ok((Complex64::new(r, i), vr, vi))
        })
        .collect::<Result<_>>()?;
    let mut acc = Amplitude::default();
    for (j, ((w, _), (v, vr, vi))) in terms.iter().zip(&per_term).enumerate() {
        acc.value += w * v;
        acc.var_re += w.re * w.re * vr + w.im * w.im * vi;
        acc.var_im += w.im * w.im * vr + w.re * w.re * vi;
        acc.cov += w.re * w.im * (vr - vi);
        if let Some((family, out)) = breakdown.as_mut() {
            out.push(TermEstimate {
                family: family.to_string(),
                index: j,
                re: v.re,
                im: v.im,
            });
        }
    }
    Ok(acc)
}

/// Importance-sampled `sum_j w_j <a_j|b_j>`: each shot draws a term with
/// probability `|w_j| / C` and one Hadamard-test outcome per part, and
/// contributes `C * phase_j * (r + i s)`.
fn importance_sum(
    circuit: &Circuit,
    reference: &[Gate],
    theta: &[f64],
    terms: &[(Complex64, Sandwich)],
    real_only: bool,
    cfg: &EstimatorConfig,
    call: u64,
) -> Result<Amplitude> {
    let n = circuit.qubits();
    let weights = PauliSum::from_terms(
        n,
        terms
            .iter()
            .map(|(w, _)| crate::pauli::PauliTerm::new(*w, PauliString::identity(n)))
            .collect(),
    )?;
    let sampler = LcuSampler::new(&weights)?;
    let c = sampler.one_norm();
    let mut probs: Vec<Option<(f64, f64)>> = vec![None; terms.len()];
    let mut rng = stream_rng(cfg.seed, call, u64::MAX);
    let (mut s_re, mut s_im, mut s_rr, mut s_ii, mut s_ri) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..cfg.shots {
        let (j, phase) = sampler.sample(&mut rng);
        let (pr, pi) = match probs[j] {
            Some(p) => p,
            None => {
                let b = branches(circuit, reference, theta, &terms[j].1)?;
                let (pr, _) = ancilla_probability(n, &b, Part::Real)?;
                let pi = if real_only {
                    0.5
                } else {
                    ancilla_probability(n, &b, Part::Imag)?.0
                };
                probs[j] = Some((pr, pi));
                (pr, pi)
            }
        };
        let r = if rng.random::<f64>() < pr { 1.0 } else { -1.0 };
        // Imag outcome sign is flipped (see ancilla_probability).
        let s = if real_only {
            0.0
        } else if rng.random::<f64>() < pi {
            -1.0
        } else {
            1.0
        };
        let v = phase * Complex64::new(r, s) * c;
        s_re += v.re;
        s_im += v.im;
        s_rr += v.re * v.re;
        s_ii += v.im * v.im;
        s_ri += v.re * v.im;
    }
    let k = cfg.shots as f64;
    let (m_re, m_im) = (s_re / k, s_im / k);
    let denom = if cfg.shots > 1 { k - 1.0 } else { 1.0 };
    let var = |ss: f64, m: f64| ((ss - k * m * m) / denom).max(0.0) / k;
    let (value, var_re, var_im, cov) = if real_only {
        // Only real parts were measured; keep the weighted real estimate.
        (Complex64::new(m_re, 0.0), var(s_rr, m_re), 0.0, 0.0)
    } else {
        (
            Complex64::new(m_re, m_im),
            var(s_rr, m_re),
            var(s_ii, m_im),
            (s_ri - k * m_re * m_im) / denom / k,
        )
    };
    Ok(Amplitude {
        value,
        var_re,
        var_im,
        cov,
    })
}

/// `sum_j lambda_j <phi(theta)|sigma_j|v0>`, where `circuit`'s prefix
/// prepares `|v0>`.
pub fn transition_amplitude(
    circuit: &Circuit,
    theta: &[f64],
    p: &PauliSum,
    cfg: &EstimatorConfig,
) -> Result<Amplitude> {
    if p.is_empty() {
        return Err(Error::EmptySum);
    }
    if p.qubits() != circuit.qubits() {
        return Err(Error::DimensionMismatch {
            expected: circuit.qubits(),
            actual: p.qubits(),
        });
    }
    if cfg.mode == Mode::Exact {
        let phi = circuit.prepare(theta)?;
        let v0 = StateVector::zero(circuit.qubits())?;
        let mut v0 = v0;
        for g in circuit.prefix() {
            apply_gate_ext(&mut v0, g, g.resolve_angle(theta), false, 0, &[])?;
        }
        let mv = p.apply(v0.amplitudes())?;
        return Ok(Amplitude {
            value: dot(phi.amplitudes(), &mv),
            ..Default::default()
        });
    }
    let terms: Vec<_> = p
        .terms()
        .iter()
        .map(|t| (t.coefficient, Sandwich::Transition(t.string)))
        .collect();
    weighted_sum(circuit, circuit.prefix(), theta, &terms, false, cfg, 0, None)
}

/// Gradient flavour used by optimizers.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMethod {
    Analytic,
    /// Central differences with the given step.
    FiniteDifference(f64),
}

/// Central-difference gradient of `f`.
pub fn grad_fd<F>(theta: &[f64], mut f: F, delta: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step {delta} must be positive")));
    }
    let mut t = theta.to_vec();
    let mut g = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        t[i] = theta[i] + delta;
        let up = f(&t)?;
        t[i] = theta[i] - delta;
        let down = f(&t)?;
        t[i] = theta[i];
        g.push((up - down) / (2.0 * delta));
    }
    Ok(g)
}

/// Energy and gradient evaluator for one problem on one ansatz.
///
/// For `Task::Multiply` the energy is `1 - |<phi|M|v0>|^2 / ||M v0||^2`, for
/// `Task::Solve` it is `<phi|M^dag M|phi> - |<v0|M|phi>|^2`. Each call draws
/// fresh random streams in shots mode.
#[derive(Debug)]
pub struct Objective {
    task: Task,
    circuit: Circuit,
    /// Gates preparing `|v0>` from `|0...0>`.
    reference: Vec<Gate>,
    matrix: PauliSum,
    adjoint: PauliSum,
    gram: Option<PauliSum>,
    v0: StateVector,
    mv0: Vec<Complex64>,
    norm: f64,
    cfg: EstimatorConfig,
    calls: AtomicU64,
}

impl Objective {
    /// `circuit` prepares `|phi(theta)>` from `|0...0>`; it may or may not
    /// start with the problem's `|v0>` preparation.
    pub fn new(problem: &Problem, circuit: Circuit, cfg: EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        if circuit.qubits() != problem.qubits() {
            return Err(Error::DimensionMismatch {
                expected: problem.qubits(),
                actual: circuit.qubits(),
            });
        }
        let reference: Vec<Gate> = problem.v0().all_gates().cloned().collect();
        let matrix = problem.matrix().clone();
        let adjoint = matrix.adjoint();
        let v0 = problem.v0_state()?;
        let mv0 = matrix.apply(v0.amplitudes())?;
        let gram = if cfg.mode == Mode::Exact {
            None
        } else {
            Some(adjoint.mul(&matrix, GRAM_TERM_CAP)?)
        };
        let mut obj = Objective {
            task: problem.task,
            circuit,
            reference,
            matrix,
            adjoint,
            gram,
            v0,
            mv0,
            norm: 1.0,
            cfg,
            calls: AtomicU64::new(0),
        };
        if obj.task == Task::Multiply {
            obj.norm = obj.reference_norm()?;
            if obj.norm < 1e-24 {
                return Err(Error::Degenerate("M|v0> vanishes".into()));
            }
        }
        Ok(obj)
    }

    /// Copy with a fresh call counter and a seed derived from `index`, for
    /// independent parallel runs.
    pub fn fork(&self, index: u64) -> Objective {
        Objective {
            task: self.task,
            circuit: self.circuit.clone(),
            reference: self.reference.clone(),
            matrix: self.matrix.clone(),
            adjoint: self.adjoint.clone(),
            gram: self.gram.clone(),
            v0: self.v0.clone(),
            mv0: self.mv0.clone(),
            norm: self.norm,
            cfg: EstimatorConfig {
                seed: sub_call(self.cfg.seed, 7, index),
                ..self.cfg.clone()
            },
            calls: AtomicU64::new(0),
        }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn matrix(&self) -> &PauliSum {
        &self.matrix
    }

    /// `||M|v0>||^2` as used for normalization.
    pub fn normalizer(&self) -> f64 {
        self.norm
    }

    /// Number of energy or gradient evaluations so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn next_call(&self) -> u64 {
        self.calls.fetch_add(1, Ordering::Relaxed)
    }

    /// Typical energy scale: 1 for multiplication, `(sum |lambda|)^2` for
    /// solving (an upper bound on `||M||^2`).
    pub fn energy_scale(&self) -> f64 {
        match self.task {
            Task::Multiply => 1.0,
            Task::Solve => self.matrix.one_norm().powi(2).max(1e-300),
        }
    }

    fn reference_norm(&self) -> Result<f64> {
        match self.cfg.mode {
            Mode::Exact => Ok(self.mv0.iter().map(|a| a.norm_sqr()).sum()),
            _ => {
                let gram = self.gram.as_ref().expect("gram built outside exact mode");
                let terms: Vec<_> = gram
                    .terms()
                    .iter()
                    .map(|t| (Complex64::new(t.coefficient.re, 0.0), Sandwich::Reference(t.string)))
                    .collect();
                let theta = vec![0.0; self.circuit.parameter_count()];
                let a = weighted_sum(&self.circuit, &self.reference, &theta, &terms, true, &self.cfg, u64::MAX, None)?;
                Ok(a.value.re)
            }
        }
    }

    pub fn state(&self, theta: &[f64]) -> Result<StateVector> {
        self.circuit.prepare(theta)
    }

    /// Energy with optional error bar.
    pub fn energy(&self, theta: &[f64]) -> Result<EnergyReport> {
        let call = self.next_call();
        let mut terms = Vec::new();
        let keep = self.cfg.per_term;
        let (value, var) = match (self.cfg.mode, self.task) {
            (Mode::Exact, Task::Multiply) => {
                let phi = self.circuit.prepare(theta)?;
                let a = dot(phi.amplitudes(), &self.mv0);
                (1.0 - a.norm_sqr() / self.norm, 0.0)
            }
            (Mode::Exact, Task::Solve) => {
                let phi = self.circuit.prepare(theta)?;
                let w = self.matrix.apply(phi.amplitudes())?;
                let q: f64 = w.iter().map(|a| a.norm_sqr()).sum();
                let b = dot(self.v0.amplitudes(), &w);
                (q - b.norm_sqr(), 0.0)
            }
            (_, Task::Multiply) => {
                let a = self.transition(theta, call, keep.then_some(&mut terms))?;
                let (re, im) = (a.value.re, a.value.im);
                let v = 1.0 - a.value.norm_sqr() / self.norm;
                let var = 4.0
                    * (re * re * a.var_re + im * im * a.var_im + 2.0 * re * im * a.cov)
                    / (self.norm * self.norm);
                (v, var)
            }
            (_, Task::Solve) => {
                let q = self.gram_expectation(theta, call, keep.then_some(&mut terms))?;
                let b = self.adjoint_transition(theta, call, keep.then_some(&mut terms))?;
                // <v0|M|phi> = conj(<phi|M^dag|v0>)
                let (re, im) = (b.value.re, b.value.im);
                let v = q.value.re - b.value.norm_sqr();
                let var = q.var_re
                    + 4.0 * (re * re * b.var_re + im * im * b.var_im + 2.0 * re * im * b.cov);
                (v, var)
            }
        };
        if !value.is_finite() {
            return Err(Error::NonFiniteEnergy { step: call as usize });
        }
        let shots = self.cfg.mode == Mode::HadamardShots;
        Ok(EnergyReport {
            value,
            stderr: shots.then(|| var.max(0.0).sqrt()),
            mode: self.cfg.mode,
            shots: shots.then_some(self.cfg.shots),
            terms: keep.then_some(terms),
        })
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.energy(theta)?.value)
    }

    fn transition(&self, theta: &[f64], call: u64, out: Option<&mut Vec<TermEstimate>>) -> Result<Amplitude> {
        let terms: Vec<_> = self
            .matrix
            .terms()
            .iter()
            .map(|t| (t.coefficient, Sandwich::Transition(t.string)))
            .collect();
        weighted_sum(&self.circuit, &self.reference, theta, &terms, false, &self.cfg, call, out.map(|o| ("transition", o)))
    }

    fn adjoint_transition(&self, theta: &[f64], call: u64, out: Option<&mut Vec<TermEstimate>>) -> Result<Amplitude> {
        let terms: Vec<_> = self
            .adjoint
            .terms()
            .iter()
            .map(|t| (t.coefficient, Sandwich::Transition(t.string)))
            .collect();
        let mut a = weighted_sum(
            &self.circuit,
            &self.reference,
            theta,
            &terms,
            false,
            &self.cfg,
            sub_call(call, 1, 0),
            out.map(|o| ("adjoint_transition", o)),
        )?;
        a.value = a.value.conj();
        a.cov = -a.cov;
        Ok(a)
    }

    fn gram_expectation(&self, theta: &[f64], call: u64, out: Option<&mut Vec<TermEstimate>>) -> Result<Amplitude> {
        let gram = self.gram.as_ref().expect("gram built outside exact mode");
        let terms: Vec<_> = gram
            .terms()
            .iter()
            .map(|t| (Complex64::new(t.coefficient.re, 0.0), Sandwich::Expectation(t.string)))
            .collect();
        weighted_sum(&self.circuit, &self.reference, theta, &terms, true, &self.cfg, sub_call(call, 2, 0), out.map(|o| ("gram", o)))
    }

    /// Gradient by the requested method.
    pub fn gradient(&self, theta: &[f64], method: GradMethod) -> Result<Vec<f64>> {
        match method {
            GradMethod::Analytic => Ok(self.value_and_gradient(theta)?.1),
            GradMethod::FiniteDifference(d) => grad_fd(theta, |t| self.value(t), d),
        }
    }

    /// Energy and analytic gradient together (sharing the forward pass in
    /// exact mode).
    pub fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.cfg.mode != Mode::Exact {
            let e = self.value(theta)?;
            return Ok((e, self.gradient_hadamard(theta)?));
        }
        self.next_call();
        match self.task {
            Task::Multiply => {
                let (ov, phi) = self.circuit.derivative_overlaps(theta, &self.mv0)?;
                let a = dot(phi.amplitudes(), &self.mv0);
                let e = 1.0 - a.norm_sqr() / self.norm;
                let g = ov
                    .iter()
                    .map(|o| -2.0 * (o * a.conj()).re / self.norm)
                    .collect();
                Ok((e, g))
            }
            Task::Solve => {
                let phi = self.circuit.prepare(theta)?;
                let w = self.matrix.apply(phi.amplitudes())?;
                let q: f64 = w.iter().map(|a| a.norm_sqr()).sum();
                let b = dot(self.v0.amplitudes(), &w);
                let e = q - b.norm_sqr();
                // chi = M^dag (M phi - v0 <v0|M phi>)
                let r: Vec<Complex64> = w
                    .iter()
                    .zip(self.v0.amplitudes())
                    .map(|(x, v)| x - v * b)
                    .collect();
                let chi = self.adjoint.apply(&r)?;
                let (ov, _) = self.circuit.derivative_overlaps(theta, &chi)?;
                Ok((e, ov.iter().map(|o| 2.0 * o.re).collect()))
            }
        }
    }

    /// Analytic gradient assembled from Hadamard-test amplitudes: one
    /// family `<phi_k|sigma|v0>` for multiplication, and the families
    /// `<phi_k|tau|phi>`, `<phi_k|sigma|v0>`, `<phi|sigma|v0>` for solving.
    fn gradient_hadamard(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let call = self.next_call();
        let gates = self.circuit.gates();
        let mut grad = vec![0.0; self.circuit.parameter_count()];
        let sub = |k: usize, fam: u64| sub_call(call, fam, k as u64);
        match self.task {
            Task::Multiply => {
                let a = self.transition(theta, sub(0, 3), None)?.value;
                for (k, g) in gates.iter().enumerate() {
                    let Some(slot) = g.slot else { continue };
                    let (f, _) = g.generator(self.circuit.qubits()).expect("rotation");
                    let terms: Vec<_> = self
                        .matrix
                        .terms()
                        .iter()
                        .map(|t| (t.coefficient, Sandwich::DerivativeTransition { gate: k, sigma: t.string }))
                        .collect();
                    let d = weighted_sum(&self.circuit, &self.reference, theta, &terms, false, &self.cfg, sub(k, 4), None)?;
                    grad[slot] += -2.0 * (f.conj() * d.value * a.conj()).re / self.norm;
                }
            }
            Task::Solve => {
                let gram = self.gram.as_ref().expect("gram built outside exact mode");
                let b = self.adjoint_transition(theta, sub(0, 3), None)?.value;
                for (k, g) in gates.iter().enumerate() {
                    let Some(slot) = g.slot else { continue };
                    let (f, _) = g.generator(self.circuit.qubits()).expect("rotation");
                    let t1: Vec<_> = gram
                        .terms()
                        .iter()
                        .map(|t| (t.coefficient, Sandwich::DerivativeExpectation { gate: k, sigma: t.string }))
                        .collect();
                    let d1 = weighted_sum(&self.circuit, &self.reference, theta, &t1, false, &self.cfg, sub(k, 5), None)?;
                    let t2: Vec<_> = self
                        .adjoint
                        .terms()
                        .iter()
                        .map(|t| (t.coefficient, Sandwich::DerivativeTransition { gate: k, sigma: t.string }))
                        .collect();
                    let d2 = weighted_sum(&self.circuit, &self.reference, theta, &t2, false, &self.cfg, sub(k, 6), None)?;
                    grad[slot] += 2.0 * (f.conj() * d1.value).re - 2.0 * (f.conj() * d2.value * b).re;
                }
            }
        }
        Ok(grad)
    }
}

fn checked(problem: &Problem, task: Task) -> Result<()> {
    if problem.task != task {
        return Err(Error::InvalidInput(format!(
            "problem task is {:?}, expected {:?}",
            problem.task, task
        )));
    }
    Ok(())
}

pub fn energy_multiply(problem: &Problem, circuit: &Circuit, theta: &[f64], cfg: &EstimatorConfig) -> Result<EnergyReport> {
    checked(problem, Task::Multiply)?;
    Objective::new(problem, circuit.clone(), cfg.clone())?.energy(theta)
}

pub fn energy_solve(problem: &Problem, circuit: &Circuit, theta: &[f64], cfg: &EstimatorConfig) -> Result<EnergyReport> {
    checked(problem, Task::Solve)?;
    Objective::new(problem, circuit.clone(), cfg.clone())?.energy(theta)
}

pub fn grad_analytic_multiply(problem: &Problem, circuit: &Circuit, theta: &[f64], cfg: &EstimatorConfig) -> Result<Vec<f64>> {
    checked(problem, Task::Multiply)?;
    Objective::new(problem, circuit.clone(), cfg.clone())?.gradient(theta, GradMethod::Analytic)
}

pub fn grad_analytic_solve(problem: &Problem, circuit: &Circuit, theta: &[f64], cfg: &EstimatorConfig) -> Result<Vec<f64>> {
    checked(problem, Task::Solve)?;
    Objective::new(problem, circuit.clone(), cfg.clone())?.gradient(theta, GradMethod::Analytic)
}
