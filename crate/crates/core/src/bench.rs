//! Random linear systems with a prescribed condition number and the
//! experiment harness for success-rate and timing sweeps.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::estimator::{stream_rng, EstimatorConfig};
use crate::optimize::{morph_run, solver_ansatz, MorphSchedule, OptimizerConfig};
use crate::problem::{Problem, Task};
use crate::statevec::{build_hardware_ansatz, Circuit};

/// Largest register the harness accepts by default.
pub const DESK_QUBIT_CAP: usize = 6;

/// Depth of the random circuit that prepares `|v0>`.
pub const V0_DEPTH: usize = 2;

/// Hermitian positive definite `M = U diag(lambda) U^dag` with eigenvalues
/// `1`, `kappa` and the rest uniform in `[1, kappa]`, `U` Haar random, and
/// `|v0>` prepared by a random depth-2 hardware-efficient circuit. The
/// eigenvalues, the unitary and `|v0>` come from separate random streams, so
/// problems with equal `(n, seed)` share `U` and `|v0>` across `kappa`.
pub fn random_problem(n: usize, kappa: f64, seed: u64) -> Result<Problem> {
    if n == 0 || n > crate::pauli::DENSE_QUBIT_CAP {
        return Err(Error::InvalidInput(format!("qubit count {n} outside 1..=12")));
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidKappa(kappa));
    }
    let d = 1usize << n;
    let m = if kappa == 1.0 {
        DMatrix::identity(d, d)
    } else {
        let mut rng = stream_rng(seed, 1, n as u64);
        let mut eig = vec![1.0, kappa];
        eig.extend((2..d).map(|_| rng.random_range(1.0..=kappa)));
        let mut urng = stream_rng(seed, 2, n as u64);
        let u = dense::haar_unitary(d, &mut urng);
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            eig.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let m = &u * diag * u.adjoint();
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    };
    let mut vrng = stream_rng(seed, 3, n as u64);
    let prep = build_hardware_ansatz(n, V0_DEPTH, &Circuit::new(n, 0)?)?;
    let angles: Vec<f64> = (0..prep.parameter_count())
        .map(|_| vrng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let v0 = prep.bind(&angles)?;
    let mut p = Problem::from_dense(Task::Solve, &m, v0)?;
    p.kappa = Some(kappa);
    p.seed = Some(seed);
    Ok(p)
}

/// `lambda_max / lambda_min` by magnitude (singular values, which coincide
/// for Hermitian input).
pub fn condition_number(m: &DMatrix<Complex64>) -> Result<f64> {
    dense::condition_number(m)
}

/// Seed of trial `trial` for `n` qubits under master seed `seed`.
pub fn trial_seed(seed: u64, n: usize, trial: usize) -> u64 {
    let mut r = stream_rng(seed, 0xbe7c, ((n as u64) << 32) | trial as u64);
    r.random()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub seed: u64,
    /// Success threshold on the fidelity against the dense solution.
    pub fidelity_min: f64,
    /// Skip larger depths once a cell reaches all-success.
    pub stop_at_all_success: bool,
    pub max_qubits: usize,
    pub optimizer: OptimizerConfig,
    pub estimator: EstimatorConfig,
    /// Override of the per-size morphing schedule.
    pub schedule: Option<MorphSchedule>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trials: 50,
            seed: 0,
            fidelity_min: 0.99,
            stop_at_all_success: true,
            max_qubits: DESK_QUBIT_CAP,
            optimizer: OptimizerConfig {
                method: crate::optimize::Method::Lbfgs,
                ..Default::default()
            },
            estimator: EstimatorConfig::exact(),
            schedule: None,
        }
    }
}

impl ExperimentConfig {
    fn schedule(&self, n: usize) -> MorphSchedule {
        self.schedule.clone().unwrap_or_else(|| MorphSchedule::for_qubits(n))
    }
}

/// One `(n, kappa, depth)` grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub kappa: f64,
    pub depth: usize,
    pub trials: usize,
    pub successes: usize,
    pub mean_seconds: f64,
    pub fidelities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinDepth {
    pub n: usize,
    pub kappa: f64,
    /// Smallest depth at which every trial succeeded.
    pub depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub seed: u64,
    pub cells: Vec<CellResult>,
    pub min_depth: Vec<MinDepth>,
    /// Power-law exponent of solve time against matrix dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

impl ExperimentResult {
    /// `n,kappa,depth,trials,successes,min_depth,mean_seconds`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,kappa,depth,trials,successes,min_depth,mean_seconds\n");
        for c in &self.cells {
            let md = self
                .min_depth
                .iter()
                .find(|m| m.n == c.n && m.kappa == c.kappa)
                .and_then(|m| m.depth)
                .map(|d| d.to_string())
                .unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{:.6}\n",
                c.n, c.kappa, c.depth, c.trials, c.successes, md, c.mean_seconds
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("experiment serializes")
    }

    pub fn min_depth_of(&self, n: usize, kappa: f64) -> Option<usize> {
        self.min_depth
            .iter()
            .find(|m| m.n == n && m.kappa == kappa)
            .and_then(|m| m.depth)
    }
}

/// Cartesian product of sizes and condition numbers.
pub fn grid(ns: &[usize], kappas: &[f64]) -> Vec<(usize, f64)> {
    ns.iter()
        .flat_map(|&n| kappas.iter().map(move |&k| (n, k)))
        .collect()
}

/// Oracle fidelity of one morphing solve and its wall time.
pub fn run_trial(problem: &Problem, depth: usize, cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    let schedule = cfg.schedule(problem.qubits());
    let opt = OptimizerConfig {
        seed: problem.seed.unwrap_or(cfg.seed),
        ..cfg.optimizer.clone()
    };
    let start = Instant::now();
    let out = morph_run(problem, depth, &schedule, &opt, &cfg.estimator)?;
    let secs = start.elapsed().as_secs_f64();
    let ansatz = solver_ansatz(problem, depth)?;
    let phi = ansatz.prepare(&out.theta)?;
    let target = problem.target_state()?;
    Ok((dense::state_fidelity(&target, phi.amplitudes()), secs))
}

fn run_cell(n: usize, kappa: f64, depth: usize, cfg: &ExperimentConfig) -> Result<CellResult> {
    let results: Vec<(f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let p = random_problem(n, kappa, trial_seed(cfg.seed, n, t))?;
            run_trial(&p, depth, cfg)
        })
        .collect::<Result<_>>()?;
    let successes = results.iter().filter(|r| r.0 >= cfg.fidelity_min).count();
    let mean_seconds = results.iter().map(|r| r.1).sum::<f64>() / results.len().max(1) as f64;
    Ok(CellResult {
        n,
        kappa,
        depth,
        trials: cfg.trials,
        successes,
        mean_seconds,
        fidelities: results.iter().map(|r| r.0).collect(),
    })
}

fn check_cells(cells: &[(usize, f64)], cfg: &ExperimentConfig) -> Result<()> {
    for &(n, k) in cells {
        if n == 0 || n > cfg.max_qubits {
            return Err(Error::InvalidInput(format!(
                "qubit count {n} outside 1..={}",
                cfg.max_qubits
            )));
        }
        if !(k >= 1.0) {
            return Err(Error::InvalidKappa(k));
        }
    }
    Ok(())
}

/// Success fraction per `(n, kappa)` cell at each depth in `depths`
/// (ascending), and the smallest depth where all trials succeed.
pub fn success_experiment(
    cells: &[(usize, f64)],
    depths: &[usize],
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult> {
    check_cells(cells, cfg)?;
    let mut out = Vec::new();
    let mut mins = Vec::new();
    for &(n, kappa) in cells {
        let mut min = None;
        for &depth in depths {
            let cell = run_cell(n, kappa, depth, cfg)?;
            let all = cell.successes == cell.trials;
            out.push(cell);
            if all && min.is_none() {
                min = Some(depth);
                if cfg.stop_at_all_success {
                    break;
                }
            }
        }
        mins.push(MinDepth { n, kappa, depth: min });
    }
    Ok(ExperimentResult {
        seed: cfg.seed,
        cells: out,
        min_depth: mins,
        exponent: None,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn power_law_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Wall time per solve at each size's minimum all-success depth (searched
/// over `depths`), with a power-law fit of time against matrix dimension.
pub fn timing_experiment(
    cells: &[(usize, f64)],
    depths: &[usize],
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult> {
    let search = ExperimentConfig {
        stop_at_all_success: true,
        ..cfg.clone()
    };
    let mut res = success_experiment(cells, depths, &search)?;
    let points: Vec<(f64, f64)> = res
        .min_depth
        .iter()
        .filter_map(|m| {
            let d = m.depth?;
            let cell = res
                .cells
                .iter()
                .find(|c| c.n == m.n && c.kappa == m.kappa && c.depth == d)?;
            Some(((1usize << m.n) as f64, cell.mean_seconds))
        })
        .collect();
    res.exponent = power_law_exponent(&points);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_one_is_identity() {
        let p = random_problem(2, 1.0, 3).unwrap();
        assert_eq!(p.matrix().len(), 1);
        assert!(p.matrix().terms()[0].string.is_identity());
    }

    #[test]
    fn generated_condition_number_is_exact() {
        for seed in 0..5 {
            for kappa in [2.0, 10.0, 37.5] {
                let p = random_problem(2, kappa, seed).unwrap();
                let m = p.dense_matrix().unwrap();
                assert!((m.adjoint() - &m).norm() < 1e-12);
                let eig = m.clone().symmetric_eigen();
                let (lo, hi) = eig
                    .eigenvalues
                    .iter()
                    .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
                assert!(lo > 0.0);
                assert!((hi / lo - kappa).abs() < 1e-10 * kappa);
                assert!((condition_number(&m).unwrap() - kappa).abs() < 1e-10 * kappa);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = random_problem(3, 7.0, 42).unwrap();
        let b = random_problem(3, 7.0, 42).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_eq!(a.v0(), b.v0());
        let c = random_problem(3, 7.0, 43).unwrap();
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn v0_is_shared_across_kappa() {
        let a = random_problem(2, 5.0, 9).unwrap();
        let b = random_problem(2, 20.0, 9).unwrap();
        assert_eq!(a.v0(), b.v0());
    }

    #[test]
    fn condition_number_examples() {
        let id = DMatrix::<Complex64>::identity(4, 4);
        assert!((condition_number(&id).unwrap() - 1.0).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(10.0, 0.0)]));
        assert!((condition_number(&d).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_fit() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&x| (x, 0.5 * f64::powf(x, 2.5))).collect();
        assert!((power_law_exponent(&pts).unwrap() - 2.5).abs() < 1e-12);
        assert!(power_law_exponent(&pts[..1]).is_none());
    }

    #[test]
    fn csv_layout() {
        let r = ExperimentResult {
            seed: 1,
            cells: vec![CellResult { n: 2, kappa: 5.0, depth: 1, trials: 3, successes: 3, mean_seconds: 0.25, fidelities: vec![] }],
            min_depth: vec![MinDepth { n: 2, kappa: 5.0, depth: Some(1) }],
            exponent: None,
        };
        assert_eq!(r.to_csv(), "n,kappa,depth,trials,successes,min_depth,mean_seconds\n2,5,1,3,3,1,0.250000\n");
    }
}
