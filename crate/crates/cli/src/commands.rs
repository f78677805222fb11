use std::path::Path;
use std::time::Instant;

use serde_json::json;

use varlin::bench::{self, ExperimentConfig};
use varlin::dynamics::{self, EvolutionSpec, TrajectoryRecord};
use varlin::estimator::{EstimatorConfig, Objective};
use varlin::optimize::{
    adaptive_depth_solve, best_of, ite_run, solver_ansatz, vqe_restarts, vqe_run,
    Criterion, Method, MorphSchedule, OptResult, OptTrace, OptimizerConfig,
};
use varlin::pauli::DENSE_QUBIT_CAP;
use varlin::problem::{Problem, Task};
use varlin::report::{to_json_17, SolveReport, TraceSummary, SCHEMA_VERSION};
use varlin::statevec::{build_hardware_ansatz, Circuit};
use varlin::verify::{verify as verify_state, VerificationReport};
use varlin::{Error, Result};

use crate::input;
use crate::{BenchArgs, Depth, EvolveArgs, OptimizerKind, SolveArgs, TaskArg, TrajectoryArgs, VerifyArgs};

/// Densities are averaged over trajectories only up to this register size.
const POPULATION_QUBIT_CAP: usize = 10;

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn config_echo<T: serde::Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

struct Outcome {
    depth: usize,
    theta: Vec<f64>,
    energy: f64,
    trace: OptTrace,
    verification: VerificationReport,
}

fn optimizer_config(a: &SolveArgs) -> OptimizerConfig {
    let method = a.method.map(Method::from).unwrap_or(match a.optimizer {
        OptimizerKind::Morph => Method::Lbfgs,
        _ => Method::GradientDescent,
    });
    OptimizerConfig {
        method,
        learning_rate: a.learning_rate,
        max_steps: a.max_steps,
        tolerance: a.tolerance,
        restarts: a.restarts,
        // Sampled energies are too noisy for step-size adaptation.
        adaptive_step: a.estimator.mode != crate::ModeArg::Shots,
        seed: a.estimator.seed,
        ..Default::default()
    }
}

/// VQE or imaginary-time run at one depth, verified.
fn descend(problem: &Problem, depth: usize, a: &SolveArgs, opt: &OptimizerConfig, est: &EstimatorConfig) -> Result<Outcome> {
    let ansatz = solver_ansatz(problem, depth)?;
    let l = ansatz.parameter_count();
    let obj = Objective::new(problem, ansatz, est.clone())?;
    let cfg = OptimizerConfig {
        tolerance: opt.tolerance * obj.energy_scale(),
        ..opt.clone()
    };
    let r: OptResult = match (a.optimizer, &a.theta0) {
        (OptimizerKind::Ite, t0) => {
            let t0 = t0.clone().unwrap_or_else(|| cfg.initial_theta(l, 0));
            ite_run(&obj, &t0, a.dtau, &cfg)?
        }
        (_, Some(t0)) => vqe_run(&obj, t0, &cfg)?,
        (_, None) => best_of(vqe_restarts(&obj, &cfg)?).expect("at least one restart"),
    };
    let verification = verify_state(problem, &obj, &r.theta, a.fidelity_min)?;
    Ok(Outcome {
        depth,
        theta: r.theta,
        energy: r.energy,
        trace: r.trace,
        verification,
    })
}

/// All-zero angles prepare `|0...0>`; when that already solves the problem
/// no optimization is needed.
fn trivial_start(problem: &Problem, depth: usize, a: &SolveArgs, est: &EstimatorConfig) -> Result<Option<Outcome>> {
    if a.theta0.is_some() {
        return Ok(None);
    }
    let ansatz = solver_ansatz(problem, depth)?;
    let zeros = vec![0.0; ansatz.parameter_count()];
    let obj = Objective::new(problem, ansatz, est.clone())?;
    let energy = obj.value(&zeros)?;
    if energy > a.tolerance * obj.energy_scale() {
        return Ok(None);
    }
    let cfg = OptimizerConfig {
        tolerance: a.tolerance * obj.energy_scale(),
        ..OptimizerConfig::default()
    };
    let r = vqe_run(&obj, &zeros, &cfg)?;
    let verification = verify_state(problem, &obj, &r.theta, a.fidelity_min)?;
    if !verification.pass {
        return Ok(None);
    }
    Ok(Some(Outcome {
        depth,
        theta: r.theta,
        energy: r.energy,
        trace: r.trace,
        verification,
    }))
}

pub fn solve(task: Task, a: &SolveArgs) -> Result<bool> {
    let start = Instant::now();
    let problem = input::load_problem(task, &a.matrix, &a.v0)?;
    let est = a.estimator.config();
    let opt = optimizer_config(a);
    let depths = match a.depth {
        Depth::Auto => 0..=a.max_depth,
        Depth::Fixed(d) => d..=d,
    };

    let out = match trivial_start(&problem, *depths.start(), a, &est)? {
        Some(o) => o,
        None => match a.optimizer {
            OptimizerKind::Morph => {
                if a.theta0.is_some() {
                    return Err(Error::InvalidInput("morph chooses its own initial angles".into()));
                }
                let schedule = MorphSchedule::for_qubits(problem.qubits());
                let s = adaptive_depth_solve(&problem, &schedule, &opt, &est, depths, Criterion::Certified, a.fidelity_min)?;
                Outcome {
                    depth: s.best.depth,
                    theta: s.best.theta,
                    energy: s.best.energy,
                    trace: s.best.trace,
                    verification: s.verification,
                }
            }
            _ => {
                let mut trace = OptTrace::default();
                let mut best: Option<Outcome> = None;
                for d in depths {
                    let mut o = descend(&problem, d, a, &opt, &est)?;
                    trace.extend(std::mem::take(&mut o.trace));
                    let pass = o.verification.pass;
                    if best.as_ref().is_none_or(|b| o.verification.certified() > b.verification.certified()) || pass {
                        best = Some(o);
                    }
                    if pass {
                        break;
                    }
                }
                let mut o = best.expect("nonempty depth range");
                o.trace = trace;
                o
            }
        },
    };

    let v = &out.verification;
    let report = SolveReport {
        schema: SCHEMA_VERSION,
        task,
        optimizer: serde_json::to_value(a.optimizer)
            .ok()
            .and_then(|x| x.as_str().map(String::from))
            .unwrap_or_default(),
        depth: out.depth,
        theta: out.theta.clone(),
        energy: out.energy,
        fidelity: v.fidelity,
        fidelity_lower_bound: v.fidelity_lower_bound,
        residual_ratio: v.residual_ratio,
        verification: v.clone(),
        trace: TraceSummary::from_trace(&out.trace),
        seed: a.estimator.seed,
        config: config_echo(a),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(p) = &a.trace {
        std::fs::write(p, out.trace.to_csv())?;
    }
    write_or_print(a.out.as_deref(), &report.to_json())?;
    eprintln!(
        "depth {} energy {:.3e} certified {:.6} oracle {} steps {} -> {}",
        out.depth,
        out.energy,
        v.certified(),
        v.oracle_fidelity.map_or("n/a".to_string(), |f| format!("{f:.6}")),
        report.trace.steps,
        if v.pass { "verified" } else { "NOT verified" }
    );
    Ok(v.pass)
}

pub fn verify(a: &VerifyArgs) -> Result<bool> {
    let (task, depth, theta) = match &a.report {
        Some(p) => {
            let r = SolveReport::from_json(&input::read(p)?)?;
            (r.task, r.depth, r.theta)
        }
        None => {
            let task = match a.task.expect("required by the parser") {
                TaskArg::Multiply => Task::Multiply,
                TaskArg::Solve => Task::Solve,
            };
            (task, a.depth.expect("required by the parser"), a.theta.clone().expect("required by the parser"))
        }
    };
    let problem = input::load_problem(task, &a.matrix, &a.v0)?;
    let obj = Objective::new(&problem, solver_ansatz(&problem, depth)?, a.estimator.config())?;
    let rep = verify_state(&problem, &obj, &theta, a.fidelity_min)?;
    write_or_print(a.out.as_deref(), &to_json_17(&rep))?;
    Ok(rep.pass)
}

fn ansatz_and_start(qubits: usize, depth: usize, theta0: &Option<Vec<f64>>) -> Result<(Circuit, Vec<f64>)> {
    let c = build_hardware_ansatz(qubits, depth, &Circuit::new(qubits, 0)?)?;
    let t = theta0.clone().unwrap_or_else(|| vec![0.0; c.parameter_count()]);
    if t.len() != c.parameter_count() {
        return Err(Error::ParameterCount {
            expected: c.parameter_count(),
            actual: t.len(),
        });
    }
    Ok((c, t))
}

pub fn evolve(a: &EvolveArgs) -> Result<bool> {
    let start = Instant::now();
    let h = input::read_operator(&a.hamiltonian)?;
    let (circuit, theta0) = ansatz_and_start(h.qubits(), a.depth, &a.theta0)?;
    let mut spec = EvolutionSpec::new(h, a.time, a.dt);
    spec.estimator = a.estimator.config();
    spec.step_tolerance = a.step_tolerance;
    spec.optimizer.seed = a.estimator.seed;
    let run = if a.imaginary {
        dynamics::imag_time_evolve(&spec, &circuit, &theta0)
    } else {
        dynamics::real_time_evolve(&spec, &circuit, &theta0)
    };
    let rec = match run {
        Ok(r) => r,
        Err(e @ Error::StepFailed { .. }) => {
            eprintln!("{e}");
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    for w in &rec.warnings {
        eprintln!("warning: {w}");
    }
    let summary = rec.summary();
    let pass = summary.final_oracle_fidelity.is_none_or(|f| f >= a.fidelity_min);
    if let Some(p) = &a.trace {
        std::fs::write(p, rec.to_csv())?;
    }
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "imaginary": a.imaginary,
        "summary": summary,
        "record": rec,
        "pass": pass,
        "config": config_echo(a),
        "wall_seconds": start.elapsed().as_secs_f64(),
    });
    write_or_print(a.out.as_deref(), &to_json_17(&doc))?;
    eprintln!(
        "{} steps, final oracle fidelity {} -> {}",
        summary.steps,
        summary.final_oracle_fidelity.map_or("n/a".to_string(), |f| format!("{f:.10}")),
        if pass { "verified" } else { "NOT verified" }
    );
    Ok(pass)
}

/// Mean computational-basis populations after each step.
fn populations(circuit: &Circuit, records: &[TrajectoryRecord]) -> Result<Vec<Vec<f64>>> {
    let steps = records.first().map_or(0, |r| r.thetas.len());
    (0..steps)
        .map(|k| {
            let rho = dynamics::average_density(circuit, records, k)?;
            Ok(rho.diagonal().iter().map(|z| z.re).collect())
        })
        .collect()
}

pub fn trajectory(a: &TrajectoryArgs) -> Result<bool> {
    let start = Instant::now();
    let h = input::read_operator(&a.hamiltonian)?;
    let jumps = a.jumps.iter().map(|p| input::read_operator(p)).collect::<Result<Vec<_>>>()?;
    let (circuit, theta0) = ansatz_and_start(h.qubits(), a.depth, &a.theta0)?;
    let mut spec = EvolutionSpec::new(h, a.time, a.dt).with_jumps(jumps);
    spec.step_tolerance = a.step_tolerance;
    spec.optimizer.seed = a.seed;
    let records = match dynamics::trajectories(&spec, &circuit, &theta0, a.trajectories, a.seed) {
        Ok(r) => r,
        Err(e @ Error::StepFailed { .. }) => {
            eprintln!("{e}");
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    if let Some(p) = &a.trace {
        let mut csv = String::from("trajectory,t,fidelity,jump_flag,channel\n");
        for (i, r) in records.iter().enumerate() {
            for line in r.to_csv().lines().skip(1) {
                csv.push_str(&format!("{i},{line}\n"));
            }
        }
        std::fs::write(p, csv)?;
    }
    let pops = if circuit.qubits() <= POPULATION_QUBIT_CAP.min(DENSE_QUBIT_CAP) && !records.is_empty() {
        Some(populations(&circuit, &records)?)
    } else {
        None
    };
    let times: Vec<f64> = std::iter::once(0.0)
        .chain(records.first().map(|r| r.times.clone()).unwrap_or_default())
        .collect();
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "seed": a.seed,
        "trajectories": records.len(),
        "times": times,
        "populations": pops,
        "jumps": records.iter().map(|r| r.summary().jumps).sum::<usize>(),
        "summaries": records.iter().map(|r| r.summary()).collect::<Vec<_>>(),
        "config": config_echo(a),
        "wall_seconds": start.elapsed().as_secs_f64(),
    });
    write_or_print(a.out.as_deref(), &to_json_17(&doc))?;
    Ok(true)
}

pub fn bench(a: &BenchArgs) -> Result<bool> {
    let seed = a.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed = {s}");
        s
    });
    let cells: Vec<(usize, f64)> = a
        .n
        .iter()
        .flat_map(|&n| a.kappa.iter().map(move |k| (n, k.at(n))))
        .collect();
    let depths = if a.depth.is_empty() { (0..=6).collect() } else { a.depth.clone() };
    let cfg = ExperimentConfig {
        trials: a.trials,
        seed,
        fidelity_min: a.fidelity_min,
        stop_at_all_success: !a.all_depths,
        optimizer: OptimizerConfig {
            method: a.method.into(),
            ..Default::default()
        },
        ..Default::default()
    };
    let res = if a.timing {
        bench::timing_experiment(&cells, &depths, &cfg)?
    } else {
        bench::success_experiment(&cells, &depths, &cfg)?
    };
    match &a.csv {
        Some(p) => std::fs::write(p, res.to_csv())?,
        None => print!("{}", res.to_csv()),
    }
    if let Some(p) = &a.out {
        std::fs::write(p, res.to_json())?;
    }
    for m in &res.min_depth {
        eprintln!(
            "n = {} kappa = {}: min all-success depth {}",
            m.n,
            m.kappa,
            m.depth.map_or("none".to_string(), |d| d.to_string())
        );
    }
    if let Some(x) = res.exponent {
        eprintln!("time ~ dim^{x:.3}");
    }
    Ok(true)
}
