//! Ground-state search: gradient descent and L-BFGS on the variational
//! energy, imaginary-time (natural-gradient) steps, Hamiltonian morphing from
//! the identity to the target matrix, and escalation of the ansatz depth.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{stream_rng, EstimatorConfig, GradMethod, Mode, Objective};
use crate::problem::Problem;
use crate::statevec::{build_hardware_ansatz, dot, Circuit};
use crate::verify::{verify, VerificationReport, DEFAULT_FIDELITY_MIN};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `theta <- theta - a grad`, with step halving on energy increase.
    GradientDescent,
    /// Limited-memory BFGS with backtracking line search.
    Lbfgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub learning_rate: f64,
    /// Cap on the adapted learning rate.
    pub max_learning_rate: f64,
    /// Halve the step on energy increase and grow it on success. Off means
    /// fixed-step descent, which is what noisy (shot) energies need.
    pub adaptive_step: bool,
    pub max_steps: usize,
    /// Stop once the energy drops below this.
    pub tolerance: f64,
    pub grad_tolerance: f64,
    pub gradient: GradMethod,
    pub restarts: usize,
    /// Initial angles are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub stall_window: usize,
    pub stall_delta: f64,
    pub lbfgs_memory: usize,
    pub record_theta: bool,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::GradientDescent,
            learning_rate: 0.1,
            max_learning_rate: 10.0,
            adaptive_step: true,
            max_steps: 1000,
            tolerance: 1e-10,
            grad_tolerance: 1e-8,
            gradient: GradMethod::Analytic,
            restarts: 1,
            init_scale: 0.05,
            stall_window: 50,
            stall_delta: 1e-9,
            lbfgs_memory: 10,
            record_theta: false,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(
                "learning rate and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Small random initial angles for restart `index`.
    pub fn initial_theta(&self, len: usize, index: u64) -> Vec<f64> {
        let mut rng = stream_rng(self.seed, 0x1a17, index);
        (0..len)
            .map(|_| rng.random_range(-self.init_scale..=self.init_scale))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub energy: f64,
    pub grad_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub morph: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    SmallGradient,
    Budget,
    Stalled,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptTrace {
    pub records: Vec<StepRecord>,
    pub stop: Option<StopReason>,
    /// Energy/gradient evaluations performed.
    pub evaluations: u64,
}

impl OptTrace {
    /// Steps taken beyond the initial evaluation.
    pub fn steps(&self) -> usize {
        self.records.last().map_or(0, |r| r.step)
    }

    pub fn best_energy(&self) -> f64 {
        self.records.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min)
    }

    /// Append `other`, renumbering its steps to continue this trace.
    pub fn extend(&mut self, other: OptTrace) {
        let base = self.records.last().map_or(0, |r| r.step + 1);
        for mut r in other.records {
            r.step += base;
            self.records.push(r);
        }
        self.stop = other.stop;
        self.evaluations += other.evaluations;
    }

    /// `step,energy,grad_norm,morph` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,energy,grad_norm,morph\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{}\n",
                r.step,
                r.energy,
                r.grad_norm,
                r.morph.map(|m| format!("{m}")).unwrap_or_default()
            ));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub theta: Vec<f64>,
    pub energy: f64,
    pub trace: OptTrace,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Evaluator<'a> {
    obj: &'a Objective,
    method: GradMethod,
    count: u64,
}

impl Evaluator<'_> {
    fn eval(&mut self, theta: &[f64], step: usize) -> Result<(f64, Vec<f64>)> {
        self.count += 1;
        let (e, g) = match self.method {
            GradMethod::Analytic => self.obj.value_and_gradient(theta)?,
            GradMethod::FiniteDifference(_) => {
                (self.obj.value(theta)?, self.obj.gradient(theta, self.method)?)
            }
        };
        if !e.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEnergy { step });
        }
        Ok((e, g))
    }
}

/// Bookkeeping shared by the descent loops: best-seen point, trace, and the
/// stall test on the best-so-far energy.
struct Tracker {
    best_theta: Vec<f64>,
    best_energy: f64,
    history: Vec<f64>,
    trace: OptTrace,
    record_theta: bool,
    morph: Option<f64>,
}

impl Tracker {
    fn new(theta: &[f64], energy: f64, gn: f64, cfg: &OptimizerConfig, morph: Option<f64>) -> Self {
        let mut t = Tracker {
            best_theta: theta.to_vec(),
            best_energy: energy,
            history: vec![energy],
            trace: OptTrace::default(),
            record_theta: cfg.record_theta,
            morph,
        };
        t.push(0, theta, energy, gn);
        t
    }

    fn push(&mut self, step: usize, theta: &[f64], energy: f64, gn: f64) {
        if energy < self.best_energy {
            self.best_energy = energy;
            self.best_theta = theta.to_vec();
        }
        if step > 0 {
            self.history.push(self.best_energy);
        }
        self.trace.records.push(StepRecord {
            step,
            energy,
            grad_norm: gn,
            morph: self.morph,
            theta: self.record_theta.then(|| theta.to_vec()),
        });
    }

    fn stalled(&self, cfg: &OptimizerConfig) -> bool {
        let h = &self.history;
        cfg.stall_window > 0
            && h.len() > cfg.stall_window
            && h[h.len() - 1 - cfg.stall_window] - h[h.len() - 1] < cfg.stall_delta
    }

    fn finish(mut self, stop: StopReason, evaluations: u64) -> OptResult {
        self.trace.stop = Some(stop);
        self.trace.evaluations = evaluations;
        OptResult {
            theta: self.best_theta,
            energy: self.best_energy,
            trace: self.trace,
        }
    }
}

/// Minimize `obj` from `theta0`. Stops when the energy falls below
/// `cfg.tolerance`, the gradient norm below `cfg.grad_tolerance`, the best
/// energy stops improving, or the step budget runs out; returns the best
/// point seen.
pub fn vqe_run(obj: &Objective, theta0: &[f64], cfg: &OptimizerConfig) -> Result<OptResult> {
    vqe_run_tagged(obj, theta0, cfg, None)
}

pub(crate) fn vqe_run_tagged(
    obj: &Objective,
    theta0: &[f64],
    cfg: &OptimizerConfig,
    morph: Option<f64>,
) -> Result<OptResult> {
    cfg.validate()?;
    if theta0.len() != obj.circuit().parameter_count() {
        return Err(Error::ParameterCount {
            expected: obj.circuit().parameter_count(),
            actual: theta0.len(),
        });
    }
    let mut ev = Evaluator {
        obj,
        method: cfg.gradient,
        count: 0,
    };
    match cfg.method {
        Method::GradientDescent => descent(&mut ev, theta0, cfg, morph),
        Method::Lbfgs => lbfgs(&mut ev, theta0, cfg, morph),
    }
}

fn descent(ev: &mut Evaluator, theta0: &[f64], cfg: &OptimizerConfig, morph: Option<f64>) -> Result<OptResult> {
    let mut theta = theta0.to_vec();
    let (mut e, mut g) = ev.eval(&theta, 0)?;
    let mut tr = Tracker::new(&theta, e, norm(&g), cfg, morph);
    let mut a = cfg.learning_rate;
    for step in 1..=cfg.max_steps {
        if e < cfg.tolerance {
            return Ok(tr.finish(StopReason::Converged, ev.count));
        }
        if norm(&g) < cfg.grad_tolerance {
            return Ok(tr.finish(StopReason::SmallGradient, ev.count));
        }
        loop {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t - a * d).collect();
            let (ec, gc) = ev.eval(&cand, step)?;
            if !cfg.adaptive_step || ec <= e {
                if cfg.adaptive_step {
                    a = (a * 1.2).min(cfg.max_learning_rate);
                }
                theta = cand;
                e = ec;
                g = gc;
                break;
            }
            a *= 0.5;
            if a < 1e-14 {
                return Ok(tr.finish(StopReason::Stalled, ev.count));
            }
        }
        tr.push(step, &theta, e, norm(&g));
        if tr.stalled(cfg) {
            return Ok(tr.finish(StopReason::Stalled, ev.count));
        }
    }
    let stop = if e < cfg.tolerance { StopReason::Converged } else { StopReason::Budget };
    Ok(tr.finish(stop, ev.count))
}

fn lbfgs(ev: &mut Evaluator, theta0: &[f64], cfg: &OptimizerConfig, morph: Option<f64>) -> Result<OptResult> {
    let mut theta = theta0.to_vec();
    let (mut e, mut g) = ev.eval(&theta, 0)?;
    let mut tr = Tracker::new(&theta, e, norm(&g), cfg, morph);
    let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    for step in 1..=cfg.max_steps {
        if e < cfg.tolerance {
            return Ok(tr.finish(StopReason::Converged, ev.count));
        }
        if norm(&g) < cfg.grad_tolerance {
            return Ok(tr.finish(StopReason::SmallGradient, ev.count));
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let al = rho * s.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= al * yi;
            }
            alphas.push(al);
        }
        if let Some((s, y, _)) = mem.last() {
            let yy: f64 = y.iter().map(|v| v * v).sum();
            let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), al) in mem.iter().zip(alphas.iter().rev()) {
            let be = rho * y.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (al - be) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            mem.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -norm(&g).powi(2);
        }
        // Without curvature information the first trial is a plain gradient step.
        let mut t = if mem.is_empty() { cfg.learning_rate } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let (ec, gc) = ev.eval(&cand, step)?;
            if ec <= e + 1e-4 * t * slope {
                accepted = Some((cand, ec, gc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ec, gc)) = accepted else {
            if mem.is_empty() {
                return Ok(tr.finish(StopReason::Stalled, ev.count));
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            mem.push((s, y, 1.0 / sy));
            if mem.len() > cfg.lbfgs_memory {
                mem.remove(0);
            }
        }
        theta = cand;
        e = ec;
        g = gc;
        tr.push(step, &theta, e, norm(&g));
        if tr.stalled(cfg) {
            return Ok(tr.finish(StopReason::Stalled, ev.count));
        }
    }
    let stop = if e < cfg.tolerance { StopReason::Converged } else { StopReason::Budget };
    Ok(tr.finish(stop, ev.count))
}

/// Independent runs from `cfg.restarts` random starts, in parallel; returns
/// all results in restart order.
pub fn vqe_restarts(obj: &Objective, cfg: &OptimizerConfig) -> Result<Vec<OptResult>> {
    let l = obj.circuit().parameter_count();
    (0..cfg.restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let local = obj.fork(r);
            vqe_run(&local, &cfg.initial_theta(l, r), cfg)
        })
        .collect()
}

/// Lowest-energy result of [`vqe_restarts`].
pub fn best_of(results: Vec<OptResult>) -> Option<OptResult> {
    results.into_iter().min_by(|a, b| a.energy.total_cmp(&b.energy))
}

/// Regularization added to the metric diagonal in imaginary-time steps.
pub const METRIC_REGULARIZATION: f64 = 1e-6;

/// Tangent vectors `d|phi>/d theta_i`, the metric `Re<d_i phi|d_j phi>` and
/// `V_i = Re<d_i phi|H|phi>` (half the energy gradient).
pub fn metric_and_force(obj: &Objective, theta: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    let c = obj.circuit();
    let l = c.parameter_count();
    let tangents = (0..l).map(|i| c.tangent(theta, i)).collect::<Result<Vec<_>>>()?;
    let mut m = DMatrix::zeros(l, l);
    for i in 0..l {
        for j in i..l {
            let v = dot(&tangents[i], &tangents[j]).re;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let (e, g) = obj.value_and_gradient(theta)?;
    let v = DVector::from_iterator(l, g.iter().map(|x| 0.5 * x));
    Ok((m, v, e))
}

/// One imaginary-time step `theta + dtau * thetadot` with
/// `(M + reg I) thetadot = -V`.
pub fn ite_step(obj: &Objective, theta: &[f64], dtau: f64) -> Result<Vec<f64>> {
    if !(dtau > 0.0) {
        return Err(Error::InvalidInput(format!("imaginary time step {dtau} must be positive")));
    }
    let (m, v, _) = metric_and_force(obj, theta)?;
    let thetadot = solve_metric(m, &v)?;
    Ok(theta.iter().zip(thetadot.iter()).map(|(t, d)| t + dtau * d).collect())
}

fn solve_metric(mut m: DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    for i in 0..m.nrows() {
        m[(i, i)] += METRIC_REGULARIZATION;
    }
    let chol = m.cholesky().ok_or(Error::SingularMetric)?;
    let x = chol.solve(&(-v));
    if x.iter().any(|a| !a.is_finite()) {
        return Err(Error::SingularMetric);
    }
    Ok(x)
}

/// Repeated imaginary-time steps with the same stopping rules as
/// [`vqe_run`] (the step size plays the role of the learning rate).
pub fn ite_run(obj: &Objective, theta0: &[f64], dtau: f64, cfg: &OptimizerConfig) -> Result<OptResult> {
    let mut theta = theta0.to_vec();
    let (m, v, mut e) = metric_and_force(obj, &theta)?;
    let mut tr = Tracker::new(&theta, e, 2.0 * v.norm(), cfg, None);
    let mut evals = 1;
    let mut pending = (m, v);
    for step in 1..=cfg.max_steps {
        if e < cfg.tolerance {
            return Ok(tr.finish(StopReason::Converged, evals));
        }
        if 2.0 * pending.1.norm() < cfg.grad_tolerance {
            return Ok(tr.finish(StopReason::SmallGradient, evals));
        }
        let (m, v) = pending;
        let thetadot = solve_metric(m, &v)?;
        theta = theta.iter().zip(thetadot.iter()).map(|(t, d)| t + dtau * d).collect();
        let (m2, v2, e2) = metric_and_force(obj, &theta)?;
        evals += 1;
        if !e2.is_finite() {
            return Err(Error::NonFiniteEnergy { step });
        }
        e = e2;
        tr.push(step, &theta, e, 2.0 * v2.norm());
        pending = (m2, v2);
        if tr.stalled(cfg) {
            return Ok(tr.finish(StopReason::Stalled, evals));
        }
    }
    let stop = if e < cfg.tolerance { StopReason::Converged } else { StopReason::Budget };
    Ok(tr.finish(stop, evals))
}

/// Interpolation schedule `M(t) = (1 - t/T) I + (t/T) M` cut into equal
/// intervals; each interval gets `ceil(T / (intervals * dt))` optimizer
/// steps, the final one `final_steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphSchedule {
    pub total_time: f64,
    pub intervals: usize,
    pub dt: f64,
    pub final_steps: usize,
    /// Energy (relative to the problem's energy scale) reached at `t = 0`.
    pub anchor_tolerance: f64,
    /// Relative final energy above which the ansatz is deemed insufficient.
    pub stall_energy: f64,
}

impl MorphSchedule {
    /// `T = 20 + 10 (n - 1)` clamped to `[20, 100]`, 10 intervals, `dt = 0.1`.
    pub fn for_qubits(n: usize) -> Self {
        let t = (20.0 + 10.0 * (n.max(1) - 1) as f64).clamp(20.0, 100.0);
        MorphSchedule {
            total_time: t,
            intervals: 10,
            dt: 0.1,
            final_steps: 2000,
            anchor_tolerance: 1e-8,
            stall_energy: 1e-6,
        }
    }

    pub fn steps_per_interval(&self) -> usize {
        (self.total_time / (self.intervals as f64 * self.dt)).ceil() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.intervals == 0 || !(self.total_time > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidInput(
                "schedule needs intervals >= 1 and positive T, dt".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphOutcome {
    pub depth: usize,
    pub theta: Vec<f64>,
    pub energy: f64,
    pub trace: OptTrace,
    /// Final energy stayed above the stall threshold.
    pub insufficient: bool,
}

/// Hardware-efficient ansatz of `depth` acting on `|0...0>`. `|v0>` enters
/// only through the energy, so the reachable states do not depend on how
/// entangled `|v0>` is.
pub fn solver_ansatz(problem: &Problem, depth: usize) -> Result<Circuit> {
    let n = problem.qubits();
    build_hardware_ansatz(n, depth, &Circuit::new(n, 0)?)
}

/// Hamiltonian morphing at a fixed ansatz depth.
pub fn morph_run(
    problem: &Problem,
    depth: usize,
    schedule: &MorphSchedule,
    opt: &OptimizerConfig,
    est: &EstimatorConfig,
) -> Result<MorphOutcome> {
    schedule.validate()?;
    let ansatz = solver_ansatz(problem, depth)?;
    let l = ansatz.parameter_count();
    let mut theta = opt.initial_theta(l, 0);
    let mut trace = OptTrace::default();

    // t = 0: H = I - |v0><v0|, whose ground state is |v0> itself.
    let anchor = Objective::new(&problem.interpolated(0.0)?, ansatz.clone(), est.clone())?;
    let cfg0 = OptimizerConfig {
        tolerance: schedule.anchor_tolerance * anchor.energy_scale(),
        max_steps: schedule.final_steps,
        ..opt.clone()
    };
    let r = vqe_run_tagged(&anchor, &theta, &cfg0, Some(0.0))?;
    theta = r.theta;
    trace.extend(r.trace);

    let mut energy = r.energy;
    let mut scale = anchor.energy_scale();
    for k in 1..=schedule.intervals {
        let s = k as f64 / schedule.intervals as f64;
        let obj = Objective::new(&problem.interpolated(s)?, ansatz.clone(), est.clone())?;
        scale = obj.energy_scale();
        let last = k == schedule.intervals;
        let cfg = OptimizerConfig {
            tolerance: opt.tolerance * scale,
            stall_delta: opt.stall_delta * scale,
            max_steps: if last { schedule.final_steps } else { schedule.steps_per_interval() },
            ..opt.clone()
        };
        let r = vqe_run_tagged(&obj, &theta, &cfg, Some(s))?;
        theta = r.theta;
        energy = r.energy;
        trace.extend(r.trace);
    }
    Ok(MorphOutcome {
        depth,
        theta,
        energy,
        trace,
        insufficient: energy > schedule.stall_energy * scale,
    })
}

/// What counts as success when escalating depth.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// The verifiable quantity: `1 - E` or the condition-number bound.
    Certified,
    /// Fidelity against the dense classical solution.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthAttempt {
    pub depth: usize,
    pub energy: f64,
    pub verification: VerificationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthSearch {
    /// Smallest depth that met the criterion, if any.
    pub depth: Option<usize>,
    pub attempts: Vec<DepthAttempt>,
    /// Outcome at the successful depth, or the best one seen.
    pub best: MorphOutcome,
    pub verification: VerificationReport,
}

pub fn passes(report: &VerificationReport, criterion: Criterion, threshold: f64) -> bool {
    match criterion {
        Criterion::Certified => report.pass,
        Criterion::Oracle => report.oracle_fidelity.is_some_and(|f| f >= threshold),
    }
}

/// Morphing at depths `depths` in order until one succeeds.
pub fn adaptive_depth_solve(
    problem: &Problem,
    schedule: &MorphSchedule,
    opt: &OptimizerConfig,
    est: &EstimatorConfig,
    depths: std::ops::RangeInclusive<usize>,
    criterion: Criterion,
    threshold: f64,
) -> Result<DepthSearch> {
    if depths.is_empty() {
        return Err(Error::InvalidInput("empty depth range".into()));
    }
    let mut attempts = Vec::new();
    let mut best: Option<(f64, MorphOutcome, VerificationReport)> = None;
    for depth in depths {
        let out = morph_run(problem, depth, schedule, opt, est)?;
        let ansatz = solver_ansatz(problem, depth)?;
        let obj = Objective::new(problem, ansatz, verification_config(est))?;
        let rep = verify(problem, &obj, &out.theta, threshold)?;
        attempts.push(DepthAttempt {
            depth,
            energy: out.energy,
            verification: rep.clone(),
        });
        let ok = passes(&rep, criterion, threshold);
        let merit = match criterion {
            Criterion::Certified => rep.certified(),
            Criterion::Oracle => rep.oracle_fidelity.unwrap_or(0.0),
        };
        if ok {
            return Ok(DepthSearch {
                depth: Some(depth),
                attempts,
                best: out,
                verification: rep,
            });
        }
        if best.as_ref().is_none_or(|b| merit > b.0) {
            best = Some((merit, out, rep));
        }
    }
    let (_, out, rep) = best.expect("nonempty range");
    Ok(DepthSearch {
        depth: None,
        attempts,
        best: out,
        verification: rep,
    })
}

/// Final certificates are computed exactly in exact mode and with the
/// configured estimator otherwise.
fn verification_config(est: &EstimatorConfig) -> EstimatorConfig {
    match est.mode {
        Mode::Exact => est.clone(),
        _ => EstimatorConfig { seed: est.seed ^ 0x5eed, ..est.clone() },
    }
}

/// Verify with the default threshold.
pub fn verify_default(problem: &Problem, circuit: &Circuit, theta: &[f64], est: &EstimatorConfig) -> Result<VerificationReport> {
    let obj = Objective::new(problem, circuit.clone(), est.clone())?;
    verify(problem, &obj, theta, DEFAULT_FIDELITY_MIN)
}
