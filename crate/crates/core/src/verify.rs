//! Certificates for a variational solution: fidelity from the multiplication
//! energy, a condition-number lower bound for linear systems, and the
//! residual ratio `|<v0|M|phi>|^2 / <phi|M^dag M|phi>`.

use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::estimator::Objective;
use crate::problem::{Problem, Task};
use crate::statevec::dot;

/// Default success threshold on (certified or true) fidelity.
pub const DEFAULT_FIDELITY_MIN: f64 = 0.99;

/// Slack allowed on energies slightly outside their admissible range.
pub const ENERGY_TOLERANCE: f64 = 1e-8;

/// `1 - E`, clamped to `[0, 1]`.
pub fn fidelity_multiply(energy: f64) -> Result<f64> {
    if !(energy >= -ENERGY_TOLERANCE && energy <= 1.0 + ENERGY_TOLERANCE) {
        return Err(Error::EnergyOutOfRange {
            energy,
            lo: -ENERGY_TOLERANCE,
            hi: 1.0 + ENERGY_TOLERANCE,
        });
    }
    Ok((1.0 - energy).clamp(0.0, 1.0))
}

/// Raw lower bound `1 - kappa^2 E` (may be negative). Valid for `M` scaled
/// so that its smallest singular value is at least 1.
pub fn fidelity_bound_solve(energy: f64, kappa: f64) -> Result<f64> {
    if !(kappa >= 1.0) {
        return Err(Error::InvalidKappa(kappa));
    }
    if !(energy >= -ENERGY_TOLERANCE) {
        return Err(Error::EnergyOutOfRange {
            energy,
            lo: -ENERGY_TOLERANCE,
            hi: f64::INFINITY,
        });
    }
    Ok(1.0 - kappa * kappa * energy.max(0.0))
}

/// `|<v0|M|phi>|^2 / <phi|M^dag M|phi>` on the exact statevector.
pub fn residual_ratio(problem: &Problem, phi: &[num_complex::Complex64]) -> Result<f64> {
    let w = problem.matrix().apply(phi)?;
    let q: f64 = w.iter().map(|a| a.norm_sqr()).sum();
    if q < 1e-12 {
        return Err(Error::Degenerate("<phi|M^dag M|phi> vanishes".into()));
    }
    let v0 = problem.v0_state()?;
    Ok(dot(v0.amplitudes(), &w).norm_sqr() / q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub task: Task,
    pub energy: f64,
    /// `1 - E` for multiplication.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    /// Bound for solving, clamped to `[0, 1]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_lower_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_lower_bound_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_ratio: Option<f64>,
    /// Fidelity against a classically computed target, when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_fidelity: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

impl VerificationReport {
    /// Certified figure of merit: the fidelity (multiply) or the clamped
    /// lower bound (solve).
    pub fn certified(&self) -> f64 {
        self.fidelity.or(self.fidelity_lower_bound).unwrap_or(0.0)
    }
}

/// Verify `theta` for `obj`'s problem. For solving, the energy is rescaled by
/// `||M||^2` so that the bound `1 - kappa^2 E / ||M||^2` holds for any scale
/// of `M`. The oracle fidelity is filled in when the register is small enough
/// for dense linear algebra.
pub fn verify(
    problem: &Problem,
    obj: &Objective,
    theta: &[f64],
    threshold: f64,
) -> Result<VerificationReport> {
    let energy = obj.value(theta)?;
    let phi = obj.state(theta)?;
    let oracle = match problem.target_state() {
        Ok(t) => Some(dense::state_fidelity(&t, phi.amplitudes())),
        Err(Error::DenseCap { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut report = VerificationReport {
        task: problem.task,
        energy,
        fidelity: None,
        fidelity_lower_bound: None,
        fidelity_lower_bound_raw: None,
        kappa: None,
        residual_ratio: None,
        oracle_fidelity: oracle,
        threshold,
        pass: false,
    };
    match problem.task {
        Task::Multiply => {
            let f = fidelity_multiply(energy.clamp(0.0, 1.0))?;
            report.fidelity = Some(f);
            report.pass = f >= threshold;
        }
        Task::Solve => {
            let kappa = problem.condition_number()?;
            let scale = match problem.kappa {
                // Generated problems have smallest singular value 1.
                Some(_) => 1.0,
                None => dense::spectral_norm(&problem.dense_matrix()?)?.powi(2) / (kappa * kappa),
            };
            let raw = fidelity_bound_solve(energy.max(0.0) / scale, kappa)?;
            report.kappa = Some(kappa);
            report.fidelity_lower_bound_raw = Some(raw);
            report.fidelity_lower_bound = Some(raw.clamp(0.0, 1.0));
            report.residual_ratio = residual_ratio(problem, phi.amplitudes()).ok();
            report.pass = raw >= threshold;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimatorConfig;
    use crate::pauli::PauliSum;
    use crate::statevec::{Circuit, Gate};
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn ibm() -> Problem {
        let m = PauliSum::from_pairs(&[(c(1.5), "I"), (Complex64::new(0.0, -0.5), "Y")]).unwrap();
        Problem::new(Task::Solve, m, Circuit::new(1, 0).unwrap()).unwrap()
    }

    fn one_ry() -> Circuit {
        let mut circ = Circuit::new(1, 1).unwrap();
        circ.push(Gate::ry(0, 0)).unwrap();
        circ
    }

    #[test]
    fn multiply_fidelity_examples() {
        assert_eq!(fidelity_multiply(0.0).unwrap(), 1.0);
        assert_eq!(fidelity_multiply(1.0).unwrap(), 0.0);
        assert!((fidelity_multiply(0.0005).unwrap() - 0.9995).abs() < 1e-15);
        assert!(fidelity_multiply(-1e-12).unwrap() == 1.0);
        assert!(fidelity_multiply(1.5).is_err());
        assert!(fidelity_multiply(f64::NAN).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(fidelity_bound_solve(0.0, 3.0).unwrap(), 1.0);
        assert!((fidelity_bound_solve(0.001, 10.0).unwrap() - 0.9).abs() < 1e-12);
        assert!(fidelity_bound_solve(0.5, 10.0).unwrap() < 0.0);
        assert!(matches!(fidelity_bound_solve(0.0, 0.5), Err(Error::InvalidKappa(_))));
    }

    #[test]
    fn residual_ratio_examples() {
        let p = ibm();
        let at = |t: f64| residual_ratio(&p, one_ry().prepare(&[t]).unwrap().amplitudes()).unwrap();
        assert!((at(0.0) - 0.9).abs() < 1e-12);
        assert!((at(-(0.75f64).atan()) - 1.0).abs() < 1e-12);
        // M phi orthogonal to |0>: phi ~ M^{-1}|1> ~ (0.5, 1.5)
        assert!(at(2.0 * 3.0f64.atan()).abs() < 1e-12);
    }

    #[test]
    fn energy_factorizes_through_residual_ratio() {
        let p = ibm();
        let obj = Objective::new(&p, one_ry(), EstimatorConfig::exact()).unwrap();
        for t in [0.1, 1.0, -2.0] {
            let phi = obj.state(&[t]).unwrap();
            let w = p.matrix().apply(phi.amplitudes()).unwrap();
            let q: f64 = w.iter().map(|a| a.norm_sqr()).sum();
            let r = residual_ratio(&p, phi.amplitudes()).unwrap();
            assert!((obj.value(&[t]).unwrap() - q * (1.0 - r)).abs() < 1e-10);
        }
    }

    #[test]
    fn ibm_report_at_solution() {
        let p = ibm();
        let obj = Objective::new(&p, one_ry(), EstimatorConfig::exact()).unwrap();
        let r = verify(&p, &obj, &[-(0.75f64).atan()], DEFAULT_FIDELITY_MIN).unwrap();
        assert!(r.pass);
        assert!((r.oracle_fidelity.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.kappa.unwrap() - 1.0).abs() < 1e-12);
        let r = verify(&p, &obj, &[0.0], DEFAULT_FIDELITY_MIN).unwrap();
        assert!(!r.pass);
        assert!(r.fidelity_lower_bound_raw.unwrap() <= r.oracle_fidelity.unwrap());
    }
}
