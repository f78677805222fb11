use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_varlin"))
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn write_ibm(dir: &Path) -> PathBuf {
    let p = dir.join("ibm2x2.json");
    std::fs::write(&p, r#"{"n": 2, "entries": [[0,0,1.5,0],[0,1,-0.5,0],[1,0,0.5,0],[1,1,1.5,0]]}"#).unwrap();
    p
}

/// Fidelity of `Rz(b) Ry(a)|0>` with `M^{-1}|0> ∝ (3, -1)`.
fn ibm_fidelity(theta: &[f64]) -> f64 {
    let (a, b) = (theta[0], theta[1]);
    let amp0 = Complex64::from_polar((a / 2.0).cos(), -b / 2.0);
    let amp1 = Complex64::from_polar((a / 2.0).sin(), b / 2.0);
    (amp0 * 3.0 - amp1).norm_sqr() / 10.0
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn ibm_solve_exits_zero_with_high_fidelity() {
    let dir = scratch("ibm");
    let m = write_ibm(&dir);
    let report = dir.join("report.json");
    let trace = dir.join("trace.csv");
    let out = run(bin()
        .args(["solve", "--v0", "zero", "--depth", "0", "--optimizer", "vqe", "--mode", "exact"])
        .arg("--matrix")
        .arg(&m)
        .arg("--out")
        .arg(&report)
        .arg("--trace")
        .arg(&trace));
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["schema"], 1);
    assert_eq!(r["verification"]["pass"], true);
    let f = ibm_fidelity(&floats(&r["theta"]));
    assert!(f >= 0.9995, "fidelity {f}");
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("step,energy,grad_norm,morph\n"));
    assert_eq!(csv.lines().count(), r["trace"]["steps"].as_u64().unwrap() as usize + 2);
}

#[test]
fn identity_multiply_needs_no_steps() {
    let dir = scratch("identity");
    let m = dir.join("identity.json");
    std::fs::write(&m, r#"{"n": 4, "entries": [[0,0,1,0],[1,1,1,0],[2,2,1,0],[3,3,1,0]]}"#).unwrap();
    let out = run(bin().args(["multiply", "--v0", "zero", "--matrix"]).arg(&m));
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["trace"]["steps"], 0);
    assert_eq!(r["energy"].as_f64(), Some(0.0));
}

#[test]
fn report_json_round_trips_byte_identical() {
    let dir = scratch("roundtrip");
    let m = write_ibm(&dir);
    let out = run(bin().args(["solve", "--depth", "0", "--optimizer", "vqe", "--matrix"]).arg(&m));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed = varlin::report::SolveReport::from_json(&text).unwrap();
    assert_eq!(parsed.to_json(), text.trim_end());
}

#[test]
fn exit_codes_follow_verification() {
    let dir = scratch("verify");
    let m = write_ibm(&dir);
    let good = run(bin().args(["verify", "--task", "solve", "--depth", "0", "--theta", "-0.6435011087932844,0", "--matrix"]).arg(&m));
    assert_eq!(good.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&good.stdout).unwrap();
    assert_eq!(r["pass"], true);

    let bad = run(bin().args(["verify", "--task", "solve", "--depth", "0", "--theta", "2.5,0", "--matrix"]).arg(&m));
    assert_eq!(bad.status.code(), Some(2));
    let r: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(r["pass"], false);

    let missing = run(bin().args(["solve", "--matrix"]).arg(dir.join("absent.json")));
    assert_eq!(missing.status.code(), Some(1));
    let unknown = run(bin().arg("frobnicate"));
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn too_few_steps_is_a_verified_failure() {
    let dir = scratch("budget");
    let m = write_ibm(&dir);
    let out = run(bin()
        .args(["solve", "--depth", "0", "--optimizer", "vqe", "--max-steps", "1", "--theta0", "2.5,0", "--matrix"])
        .arg(&m));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_accepts_a_solve_report() {
    let dir = scratch("verify_report");
    let m = write_ibm(&dir);
    let report = dir.join("r.json");
    let out = run(bin().args(["solve", "--depth", "0", "--optimizer", "ite", "--matrix"]).arg(&m).arg("--out").arg(&report));
    assert_eq!(out.status.code(), Some(0));
    let v = run(bin().args(["verify", "--matrix"]).arg(&m).arg("--report").arg(&report));
    assert_eq!(v.status.code(), Some(0));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = scratch("config");
    let m = write_ibm(&dir);
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# defaults\noptimizer = vqe\ndepth = 1\nfidelity_min = 0.9\n").unwrap();
    let from_file = run(bin().args(["solve", "--matrix"]).arg(&m).arg("--config").arg(&cfg));
    assert_eq!(from_file.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&from_file.stdout).unwrap();
    assert_eq!(r["optimizer"], "vqe");
    assert_eq!(r["depth"], 1);
    assert_eq!(r["config"]["fidelity_min"].as_f64(), Some(0.9));

    let flagged = run(bin().args(["solve", "--depth", "0", "--matrix"]).arg(&m).arg("--config").arg(&cfg));
    let r: Value = serde_json::from_slice(&flagged.stdout).unwrap();
    assert_eq!(r["depth"], 0);
    assert_eq!(r["optimizer"], "vqe");
}

#[test]
fn pauli_text_and_matrix_market_inputs() {
    let dir = scratch("formats");
    let pauli = dir.join("m.txt");
    std::fs::write(&pauli, "# 1.5 I - 0.5i Y\n1.5 0 I\n0 -0.5 Y\n").unwrap();
    let mm = dir.join("m.mtx");
    std::fs::write(&mm, "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 1.5\n1 2 -0.5\n2 1 0.5\n2 2 1.5\n").unwrap();
    for m in [&pauli, &mm] {
        let out = run(bin().args(["solve", "--depth", "0", "--optimizer", "vqe", "--matrix"]).arg(m));
        assert_eq!(out.status.code(), Some(0), "{}", m.display());
    }
}

#[test]
fn evolve_tracks_dense_propagation() {
    let dir = scratch("evolve");
    let h = dir.join("h.txt");
    std::fs::write(&h, "1 0 ZZ\n0.5 0 XI\n").unwrap();
    let trace = dir.join("e.csv");
    let out = run(bin()
        .args(["evolve", "--time", "0.2", "--dt", "0.01", "--depth", "2", "--hamiltonian"])
        .arg(&h)
        .arg("--trace")
        .arg(&trace));
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["summary"]["final_oracle_fidelity"].as_f64().unwrap() > 0.999);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn trajectory_decays_excited_state() {
    let dir = scratch("trajectory");
    let h = dir.join("h.txt");
    std::fs::write(&h, "0 0 Z\n").unwrap();
    // sigma_- = (X + iY) / 2 lowers |1> to |0>.
    let l = dir.join("l.txt");
    std::fs::write(&l, "0.5 0 X\n0 0.5 Y\n").unwrap();
    let out = run(bin()
        .args(["trajectory", "--time", "0.5", "--dt", "0.01", "--trajectories", "40", "--depth", "0"])
        .args(["--theta0", "3.141592653589793,0", "--seed", "3", "--hamiltonian"])
        .arg(&h)
        .arg("--jump")
        .arg(&l));
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let pops = r["populations"].as_array().unwrap();
    assert_eq!(pops.len(), 51);
    let first = floats(&pops[0]);
    let last = floats(pops.last().unwrap());
    assert!((first[1] - 1.0).abs() < 1e-12);
    assert!(last[1] < 0.9 && last[1] > 0.3, "excited population {}", last[1]);
}

/// Every column except the trailing wall-time one.
fn non_timing(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn bench_is_deterministic() {
    let args = ["bench", "--n", "2,3,4", "--kappa", "5,10", "--trials", "20", "--seed", "7"];
    let a = run(bin().args(args));
    let b = run(bin().args(args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let (a, b) = (String::from_utf8(a.stdout).unwrap(), String::from_utf8(b.stdout).unwrap());
    assert!(a.starts_with("n,kappa,depth,trials,successes,min_depth,mean_seconds\n"));
    assert_eq!(non_timing(&a), non_timing(&b));
}

#[test]
fn bench_without_seed_prints_one() {
    let out = run(bin().args(["bench", "--n", "2", "--kappa", "2", "--depth", "1", "--trials", "2"]));
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8(out.stderr).unwrap();
    let seed: u64 = err
        .lines()
        .find_map(|l| l.strip_prefix("seed = "))
        .expect("seed printed")
        .parse()
        .unwrap();
    let replay = run(bin().args(["bench", "--n", "2", "--kappa", "2", "--depth", "1", "--trials", "2", "--seed"]).arg(seed.to_string()));
    assert_eq!(non_timing(&String::from_utf8(out.stdout).unwrap()), non_timing(&String::from_utf8(replay.stdout).unwrap()));
}

#[test]
fn thread_count_variable_is_validated() {
    let dir = scratch("threads");
    let m = write_ibm(&dir);
    let ok = run(bin().env("VARLIN_THREADS", "2").args(["solve", "--depth", "0", "--optimizer", "vqe", "--matrix"]).arg(&m));
    assert_eq!(ok.status.code(), Some(0));
    let bad = run(bin().env("VARLIN_THREADS", "many").args(["solve", "--matrix"]).arg(&m));
    assert_eq!(bad.status.code(), Some(1));
    let zero = run(bin().env("VARLIN_THREADS", "0").args(["solve", "--matrix"]).arg(&m));
    assert_eq!(zero.status.code(), Some(1));
}
