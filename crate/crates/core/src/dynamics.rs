//! Time evolution built on variational multiplication: each step prepares
//! `M|phi>` for a short-time propagator `M`, warm-started from the previous
//! angles on a fixed ansatz.
//!
//! * real time: `M = 1 - i H dt`;
//! * imaginary time: `M = 1 - H dtau`;
//! * quantum trajectories: drift `M = 1 - i H dt - (dt/2) sum_k L_k^dag L_k`
//!   interleaved with jumps `M = L_k` drawn with probability
//!   `<L_k^dag L_k> dt` per step.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::estimator::{stream_rng, EstimatorConfig, Objective};
use crate::optimize::{vqe_run, Method, OptimizerConfig};
use crate::pauli::{pauli_to_matrix, PauliSum, DENSE_QUBIT_CAP};
use crate::problem::{Problem, Task};
use crate::statevec::{dot, Circuit};
use crate::verify::fidelity_multiply;

/// `||H|| dt` above which a warning is recorded.
pub const STEP_WARNING: f64 = 0.1;

/// Norm below which a jump is treated as annihilating the state.
pub const ANNIHILATION_NORM: f64 = 1e-10;

/// Retries of a step whose warm start stalls.
const STEP_RESTARTS: usize = 4;

/// Term cap for the symbolic products `L^dag L`.
const PRODUCT_CAP: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionSpec {
    pub hamiltonian: PauliSum,
    /// Total (real or imaginary) time.
    pub time: f64,
    pub dt: f64,
    /// Jump operators `L_k` for open-system trajectories.
    pub jumps: Vec<PauliSum>,
    /// Per-step optimizer.
    pub optimizer: OptimizerConfig,
    pub estimator: EstimatorConfig,
    /// Per-step multiplication energy above which a step fails.
    pub step_tolerance: f64,
    /// Compare against dense propagation when the register is small enough.
    pub oracle: bool,
}

impl EvolutionSpec {
    pub fn new(hamiltonian: PauliSum, time: f64, dt: f64) -> Self {
        EvolutionSpec {
            hamiltonian,
            time,
            dt,
            jumps: Vec::new(),
            optimizer: OptimizerConfig {
                method: Method::Lbfgs,
                tolerance: 1e-14,
                grad_tolerance: 1e-10,
                max_steps: 2000,
                stall_delta: 1e-16,
                ..Default::default()
            },
            estimator: EstimatorConfig::exact(),
            step_tolerance: 1e-6,
            oracle: true,
        }
    }

    pub fn with_jumps(mut self, jumps: Vec<PauliSum>) -> Self {
        self.jumps = jumps;
        self
    }

    /// Number of steps, `round(time / dt)`.
    pub fn steps(&self) -> usize {
        (self.time / self.dt).round() as usize
    }

    fn validate(&self, circuit: &Circuit) -> Result<Vec<String>> {
        if !(self.dt > 0.0) || !(self.time >= 0.0) || !self.time.is_finite() {
            return Err(Error::InvalidInput(format!(
                "need dt > 0 and finite time >= 0, got dt = {}, time = {}",
                self.dt, self.time
            )));
        }
        let n = circuit.qubits();
        if self.hamiltonian.qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.hamiltonian.qubits(),
            });
        }
        if !self.hamiltonian.is_hermitian(1e-12) {
            return Err(Error::InvalidInput("Hamiltonian is not Hermitian".into()));
        }
        for l in &self.jumps {
            if l.qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: l.qubits(),
                });
            }
        }
        let rate: f64 = self.jumps.iter().map(|l| l.one_norm().powi(2)).sum();
        if rate * self.dt > 1.0 {
            return Err(Error::InvalidInput(format!(
                "jump probability bound {} exceeds 1; reduce dt",
                rate * self.dt
            )));
        }
        let mut warnings = Vec::new();
        let h = self.hamiltonian.one_norm() * self.dt;
        if h > STEP_WARNING {
            warnings.push(format!("||H|| dt = {h:.3} exceeds {STEP_WARNING}"));
        }
        Ok(warnings)
    }
}

/// Per-step log of an evolution. Index 0 of `thetas` is the initial point;
/// the other vectors have one entry per step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `1 - E` of the step's multiplication.
    pub fidelity: Vec<f64>,
    /// Fidelity against dense propagation (closed systems).
    pub oracle_fidelity: Vec<Option<f64>>,
    /// Channel index when the step was a jump.
    pub jumps: Vec<Option<usize>>,
    /// Energy and gradient evaluations spent on the step.
    pub evaluations: Vec<u64>,
    pub thetas: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub steps: usize,
    pub jumps: usize,
    pub min_fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_oracle_fidelity: Option<f64>,
    pub evaluations: u64,
    pub final_theta: Vec<f64>,
}

impl TrajectoryRecord {
    fn push(&mut self, t: f64, fidelity: f64, oracle: Option<f64>, jump: Option<usize>, evals: u64, theta: &[f64]) {
        self.times.push(t);
        self.fidelity.push(fidelity);
        self.oracle_fidelity.push(oracle);
        self.jumps.push(jump);
        self.evaluations.push(evals);
        self.thetas.push(theta.to_vec());
    }

    pub fn final_theta(&self) -> &[f64] {
        self.thetas.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// `t,fidelity,jump_flag,channel`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,fidelity,jump_flag,channel\n");
        for i in 0..self.times.len() {
            let (flag, ch) = match self.jumps[i] {
                Some(k) => (1, k.to_string()),
                None => (0, String::new()),
            };
            s.push_str(&format!("{:.17e},{:.17e},{},{}\n", self.times[i], self.fidelity[i], flag, ch));
        }
        s
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            steps: self.times.len(),
            jumps: self.jumps.iter().filter(|j| j.is_some()).count(),
            min_fidelity: self.fidelity.iter().copied().fold(1.0, f64::min),
            final_oracle_fidelity: self.oracle_fidelity.last().copied().flatten(),
            evaluations: self.evaluations.iter().sum(),
            final_theta: self.final_theta().to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }
}

/// `1 + w H`.
fn one_plus(h: &PauliSum, w: Complex64) -> Result<PauliSum> {
    let n = h.qubits();
    let m = PauliSum::identity(n, Complex64::new(1.0, 0.0))
        .add(&h.scale(w))?
        .canonicalize();
    Ok(m)
}

/// Outcome of one variational multiplication step.
struct MulStep {
    theta: Vec<f64>,
    energy: f64,
    evaluations: u64,
}

/// Prepare `M|phi(theta)>` on `circuit`, warm-started at `theta`. When the
/// warm start stalls above `tolerance` (for instance at a critical point of
/// the ansatz), retries from small random perturbations of `theta` and then
/// from fresh small-angle starts.
fn multiply_step(
    m: &PauliSum,
    circuit: &Circuit,
    theta: &[f64],
    opt: &OptimizerConfig,
    est: &EstimatorConfig,
    tolerance: f64,
    restarts: usize,
) -> Result<MulStep> {
    let v0 = circuit.bind(theta)?;
    let problem = Problem::new(Task::Multiply, m.clone(), v0)?;
    let obj = match Objective::new(&problem, circuit.clone(), est.clone()) {
        Err(Error::Degenerate(_)) => {
            return Err(Error::Annihilated(0.0));
        }
        r => r?,
    };
    let mut best = vqe_run(&obj, theta, opt)?;
    let mut evaluations = best.trace.evaluations;
    for r in 0..restarts as u64 {
        if best.energy <= tolerance {
            break;
        }
        let kick = opt.initial_theta(theta.len(), r + 1);
        let start: Vec<f64> = if r % 2 == 0 {
            theta.iter().zip(&kick).map(|(t, k)| t + k).collect()
        } else {
            kick
        };
        let run = vqe_run(&obj, &start, opt)?;
        evaluations += run.trace.evaluations;
        if run.energy < best.energy {
            best = run;
        }
    }
    Ok(MulStep {
        theta: best.theta,
        energy: best.energy,
        evaluations,
    })
}

fn dense_oracle(spec: &EvolutionSpec, circuit: &Circuit, imaginary: bool) -> Result<Option<DMatrix<Complex64>>> {
    if !spec.oracle || circuit.qubits() > DENSE_QUBIT_CAP.min(10) {
        return Ok(None);
    }
    let h = pauli_to_matrix(&spec.hamiltonian)?;
    let w = if imaginary {
        Complex64::new(-spec.dt, 0.0)
    } else {
        Complex64::new(0.0, -spec.dt)
    };
    Ok(Some(dense::expm(&(h * w))?))
}

fn evolve(spec: &EvolutionSpec, circuit: &Circuit, theta0: &[f64], imaginary: bool) -> Result<TrajectoryRecord> {
    let mut rec = TrajectoryRecord {
        warnings: spec.validate(circuit)?,
        ..Default::default()
    };
    let w = if imaginary {
        Complex64::new(-spec.dt, 0.0)
    } else {
        Complex64::new(0.0, -spec.dt)
    };
    let m = one_plus(&spec.hamiltonian, w)?;
    let prop = dense_oracle(spec, circuit, imaginary)?;
    let mut exact = circuit.prepare(theta0)?.into_amplitudes();
    let mut theta = theta0.to_vec();
    rec.thetas.push(theta.clone());
    for step in 1..=spec.steps() {
        let s = multiply_step(&m, circuit, &theta, &spec.optimizer, &spec.estimator, spec.step_tolerance, STEP_RESTARTS)?;
        if s.energy > spec.step_tolerance {
            return Err(Error::StepFailed {
                step,
                energy: s.energy,
                tolerance: spec.step_tolerance,
            });
        }
        theta = s.theta;
        let oracle = match &prop {
            Some(u) => {
                exact = dense::normalized(&dense::matvec(u, &exact))?;
                let phi = circuit.prepare(&theta)?;
                Some(dense::state_fidelity(&exact, phi.amplitudes()))
            }
            None => None,
        };
        let f = fidelity_multiply(s.energy.clamp(0.0, 1.0))?;
        rec.push(step as f64 * spec.dt, f, oracle, None, s.evaluations, &theta);
    }
    Ok(rec)
}

/// Real-time evolution `|phi(t + dt)> ~ (1 - i H dt)|phi(t)>`.
pub fn real_time_evolve(spec: &EvolutionSpec, circuit: &Circuit, theta0: &[f64]) -> Result<TrajectoryRecord> {
    evolve(spec, circuit, theta0, false)
}

/// Imaginary-time evolution `|phi(tau + dtau)> ~ (1 - H dtau)|phi(tau)>`,
/// renormalized every step.
pub fn imag_time_evolve(spec: &EvolutionSpec, circuit: &Circuit, theta0: &[f64]) -> Result<TrajectoryRecord> {
    evolve(spec, circuit, theta0, true)
}

/// Angles preparing `L|phi(theta)> / ||L|phi(theta)>||`, or `Annihilated`
/// when the jump empties the state.
pub fn quantum_jump_apply(
    jump: &PauliSum,
    circuit: &Circuit,
    theta: &[f64],
    opt: &OptimizerConfig,
    est: &EstimatorConfig,
) -> Result<Vec<f64>> {
    Ok(jump_step(jump, circuit, theta, opt, est, 1e-2)?.theta)
}

fn jump_step(
    jump: &PauliSum,
    circuit: &Circuit,
    theta: &[f64],
    opt: &OptimizerConfig,
    est: &EstimatorConfig,
    tolerance: f64,
) -> Result<MulStep> {
    let phi = circuit.prepare(theta)?;
    let norm: f64 = jump.apply(phi.amplitudes())?.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < ANNIHILATION_NORM {
        return Err(Error::Annihilated(norm));
    }
    let s = multiply_step(jump, circuit, theta, opt, est, opt.tolerance.max(1e-12), 8)?;
    if s.energy > tolerance {
        return Err(Error::StepFailed {
            step: 0,
            energy: s.energy,
            tolerance,
        });
    }
    Ok(s)
}

/// One quantum trajectory with first-order jump sampling.
pub fn trajectory_run(spec: &EvolutionSpec, circuit: &Circuit, theta0: &[f64], seed: u64) -> Result<TrajectoryRecord> {
    let mut rec = TrajectoryRecord {
        warnings: spec.validate(circuit)?,
        ..Default::default()
    };
    if spec.jumps.is_empty() {
        return real_time_evolve(spec, circuit, theta0);
    }
    let n = circuit.qubits();
    let decay: Vec<PauliSum> = spec
        .jumps
        .iter()
        .map(|l| Ok(l.adjoint().mul(l, PRODUCT_CAP)?.canonicalize()))
        .collect::<Result<_>>()?;
    // -i H dt - (dt/2) sum_k L_k^dag L_k
    let mut gen = spec.hamiltonian.scale(Complex64::new(0.0, -spec.dt));
    for d in &decay {
        gen = gen.add(&d.scale(Complex64::new(-0.5 * spec.dt, 0.0)))?;
    }
    let drift = PauliSum::identity(n, Complex64::new(1.0, 0.0)).add(&gen)?.canonicalize();
    let mut rng = stream_rng(seed, 0x7a1, 0);
    let mut theta = theta0.to_vec();
    rec.thetas.push(theta.clone());
    for step in 1..=spec.steps() {
        let t = step as f64 * spec.dt;
        let phi = circuit.prepare(&theta)?;
        let probs: Vec<f64> = decay
            .iter()
            .map(|d| {
                let w = d.apply(phi.amplitudes())?;
                Ok((dot(phi.amplitudes(), &w).re * spec.dt).clamp(0.0, 1.0))
            })
            .collect::<Result<_>>()?;
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut channel = None;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if r < acc {
                channel = Some(k);
                break;
            }
        }
        let (s, jump) = match channel {
            Some(k) => {
                let s = jump_step(&spec.jumps[k], circuit, &theta, &spec.optimizer, &spec.estimator, spec.step_tolerance)
                    .map_err(|e| match e {
                        Error::StepFailed { energy, tolerance, .. } => Error::StepFailed { step, energy, tolerance },
                        e => e,
                    })?;
                (s, Some(k))
            }
            None => {
                let s = multiply_step(&drift, circuit, &theta, &spec.optimizer, &spec.estimator, spec.step_tolerance, STEP_RESTARTS)?;
                if s.energy > spec.step_tolerance {
                    return Err(Error::StepFailed {
                        step,
                        energy: s.energy,
                        tolerance: spec.step_tolerance,
                    });
                }
                (s, None)
            }
        };
        theta = s.theta;
        let f = fidelity_multiply(s.energy.clamp(0.0, 1.0))?;
        rec.push(t, f, None, jump, s.evaluations, &theta);
    }
    Ok(rec)
}

/// `count` independent trajectories in parallel; trajectory `i` uses a
/// stream derived from `(seed, i)`.
pub fn trajectories(
    spec: &EvolutionSpec,
    circuit: &Circuit,
    theta0: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let s: u64 = stream_rng(seed, 0x7a2, i as u64).random();
            trajectory_run(spec, circuit, theta0, s)
        })
        .collect()
}

/// Average of `|phi><phi|` over trajectories after `step` steps (0 is the
/// initial state).
pub fn average_density(circuit: &Circuit, records: &[TrajectoryRecord], step: usize) -> Result<DMatrix<Complex64>> {
    let d = 1usize << circuit.qubits();
    let mut rho = DMatrix::zeros(d, d);
    if records.is_empty() {
        return Err(Error::InvalidInput("no trajectories".into()));
    }
    for r in records {
        let theta = r
            .thetas
            .get(step)
            .ok_or_else(|| Error::InvalidInput(format!("step {step} beyond trajectory length")))?;
        let v = nalgebra::DVector::from_column_slice(circuit.prepare(theta)?.amplitudes());
        rho += &v * v.adjoint();
    }
    Ok(rho / Complex64::new(records.len() as f64, 0.0))
}

/// Half the trace norm of `a - b` for Hermitian matrices.
pub fn trace_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<f64> {
    Ok(0.5 * dense::singular_values(&(a - b))?.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::build_hardware_ansatz;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ansatz(n: usize, depth: usize) -> Circuit {
        build_hardware_ansatz(n, depth, &Circuit::new(n, 0).unwrap()).unwrap()
    }

    fn lowering(gamma: f64) -> PauliSum {
        PauliSum::from_pairs(&[(c(0.5 * gamma.sqrt(), 0.0), "X"), (c(0.0, 0.5 * gamma.sqrt()), "Y")]).unwrap()
    }

    fn excited(circuit: &Circuit, theta: &[f64]) -> f64 {
        circuit.prepare(theta).unwrap().amplitudes()[1].norm_sqr()
    }

    #[test]
    fn zero_hamiltonian_keeps_state() {
        let h = PauliSum::identity(1, c(0.0, 0.0));
        let spec = EvolutionSpec::new(h, 0.5, 0.1);
        let a = ansatz(1, 0);
        let theta0 = [0.4, -0.3];
        for rec in [real_time_evolve(&spec, &a, &theta0).unwrap(), imag_time_evolve(&spec, &a, &theta0).unwrap()] {
            assert_eq!(rec.times.len(), 5);
            for t in &rec.thetas {
                assert_eq!(t.as_slice(), &theta0);
            }
            assert!(rec.fidelity.iter().all(|&f| f > 1.0 - 1e-12));
            assert!(rec.oracle_fidelity.iter().all(|f| (f.unwrap() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn single_qubit_rotation() {
        let h = PauliSum::from_pairs(&[(c(1.0, 0.0), "X")]).unwrap();
        let spec = EvolutionSpec::new(h, 1.0, 0.01);
        let a = ansatz(1, 0);
        let rec = real_time_evolve(&spec, &a, &[0.0, 0.0]).unwrap();
        assert_eq!(rec.times.len(), 100);
        // exp(-iXt)|0> = cos t |0> - i sin t |1>
        let t = 1.0f64;
        let want = [c(t.cos(), 0.0), c(0.0, -t.sin())];
        let f = dense::state_fidelity(&want, a.prepare(rec.final_theta()).unwrap().amplitudes());
        assert!(f >= 0.99, "{f}");
        assert!((rec.oracle_fidelity.last().unwrap().unwrap() - f).abs() < 1e-9);
        assert!(rec.evaluations.iter().all(|&e| e > 0));
    }

    #[test]
    fn imaginary_time_finds_ground_state() {
        let h = PauliSum::from_pairs(&[(c(1.0, 0.0), "Z")]).unwrap();
        let spec = EvolutionSpec::new(h.clone(), 5.0, 0.05);
        let a = ansatz(1, 0);
        let plus = [std::f64::consts::FRAC_PI_2, 0.0];
        let rec = imag_time_evolve(&spec, &a, &plus).unwrap();
        assert!(excited(&a, rec.final_theta()) >= 0.99);
        // <H> non-increasing within solver tolerance.
        let energy = |th: &[f64]| {
            let s = a.prepare(th).unwrap();
            dot(s.amplitudes(), &h.apply(s.amplitudes()).unwrap()).re
        };
        let es: Vec<f64> = rec.thetas.iter().map(|t| energy(t)).collect();
        assert!(es.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    }

    #[test]
    fn rejects_bad_specs() {
        let a = ansatz(1, 0);
        let h = PauliSum::from_pairs(&[(c(1.0, 0.0), "Z")]).unwrap();
        assert!(real_time_evolve(&EvolutionSpec::new(h.clone(), 1.0, 0.0), &a, &[0.0, 0.0]).is_err());
        let nh = PauliSum::from_pairs(&[(c(0.0, 1.0), "Z")]).unwrap();
        assert!(real_time_evolve(&EvolutionSpec::new(nh, 1.0, 0.1), &a, &[0.0, 0.0]).is_err());
        let wide = PauliSum::from_pairs(&[(c(1.0, 0.0), "ZZ")]).unwrap();
        assert!(real_time_evolve(&EvolutionSpec::new(wide, 1.0, 0.1), &a, &[0.0, 0.0]).is_err());
        let big = EvolutionSpec::new(h, 0.4, 0.2);
        let rec = real_time_evolve(&big, &a, &[0.3, 0.0]).unwrap();
        assert_eq!(rec.warnings.len(), 1);
    }

    #[test]
    fn jump_examples() {
        let a = ansatz(1, 0);
        let opt = EvolutionSpec::new(PauliSum::new(1), 0.0, 1.0).optimizer;
        let est = EstimatorConfig::exact();
        let id = PauliSum::identity(1, c(1.0, 0.0));
        let theta = [0.9, 0.2];
        let same = quantum_jump_apply(&id, &a, &theta, &opt, &est).unwrap();
        assert!(dense::state_fidelity(a.prepare(&same).unwrap().amplitudes(), a.prepare(&theta).unwrap().amplitudes()) > 1.0 - 1e-9);
        let one = [std::f64::consts::PI, 0.0];
        let down = quantum_jump_apply(&lowering(1.0), &a, &one, &opt, &est).unwrap();
        assert!(1.0 - excited(&a, &down) >= 0.999);
        assert!(matches!(
            quantum_jump_apply(&lowering(1.0), &a, &[0.0, 0.0], &opt, &est),
            Err(Error::Annihilated(_))
        ));
    }

    #[test]
    fn no_jumps_is_real_time() {
        let h = PauliSum::from_pairs(&[(c(0.7, 0.0), "Y")]).unwrap();
        let spec = EvolutionSpec::new(h, 0.3, 0.05);
        let a = ansatz(1, 0);
        let x = trajectory_run(&spec, &a, &[0.2, 0.1], 1).unwrap();
        let y = real_time_evolve(&spec, &a, &[0.2, 0.1]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn amplitude_damping_decay_law() {
        let spec = EvolutionSpec::new(PauliSum::identity(1, c(0.0, 0.0)), 1.0, 0.01).with_jumps(vec![lowering(1.0)]);
        let a = ansatz(1, 0);
        let recs = trajectories(&spec, &a, &[std::f64::consts::PI, 0.0], 500, 2024).unwrap();
        for (step, t) in [(50usize, 0.5f64), (100, 1.0)] {
            let p: f64 = recs.iter().map(|r| excited(&a, &r.thetas[step])).sum::<f64>() / recs.len() as f64;
            let want = (-t).exp();
            let sigma = (want * (1.0 - want) / recs.len() as f64).sqrt();
            assert!((p - want).abs() <= 3.0 * sigma, "t = {t}: {p} vs {want}");
        }
        for r in &recs {
            assert!(r.jumps.iter().filter(|j| j.is_some()).count() <= 1);
            for (t, j) in r.times.iter().zip(&r.jumps) {
                if j.is_some() {
                    assert!(*t > 0.0 && *t <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn csv_and_summary() {
        let spec = EvolutionSpec::new(PauliSum::identity(1, c(0.0, 0.0)), 0.05, 0.01).with_jumps(vec![lowering(50.0)]);
        let a = ansatz(1, 0);
        let r = trajectory_run(&spec, &a, &[std::f64::consts::PI, 0.0], 3).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("t,fidelity,jump_flag,channel\n"));
        assert_eq!(csv.lines().count(), 6);
        let s = r.summary();
        assert_eq!(s.steps, 5);
        assert!(s.jumps <= 1);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["steps"], 5);
    }

    #[test]
    fn trajectories_are_deterministic() {
        let h = PauliSum::from_pairs(&[(c(0.5, 0.0), "X")]).unwrap();
        let spec = EvolutionSpec::new(h, 0.2, 0.02).with_jumps(vec![lowering(2.0)]);
        let a = ansatz(1, 0);
        let x = trajectories(&spec, &a, &[1.0, 0.0], 8, 5).unwrap();
        let y = trajectories(&spec, &a, &[1.0, 0.0], 8, 5).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn two_qubit_evolution_tracks_propagator() {
        let h = PauliSum::from_pairs(&[(c(1.0, 0.0), "ZZ"), (c(0.5, 0.0), "XI")]).unwrap();
        let spec = EvolutionSpec::new(h, 0.2, 0.02);
        let a = ansatz(2, 2);
        let rec = real_time_evolve(&spec, &a, &vec![0.0; a.parameter_count()]).unwrap();
        assert!(rec.oracle_fidelity.iter().all(|f| f.unwrap() > 0.999));
    }
}
