//! Convergence order of variational real-time evolution and agreement of
//! averaged quantum-jump trajectories with a dense master-equation solve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use varlin::dynamics::{average_density, real_time_evolve, trace_distance, trajectories, EvolutionSpec};
use varlin::pauli::PauliSum;
use varlin::statevec::{build_hardware_ansatz, Circuit};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli(letter: char) -> DMatrix<Complex64> {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    let m = match letter {
        'I' => [l, o, o, l],
        'X' => [o, l, l, o],
        'Y' => [o, -i, i, o],
        'Z' => [l, o, o, -l],
        _ => unreachable!(),
    };
    DMatrix::from_row_slice(2, 2, &m)
}

fn dense(terms: &[(Complex64, &str)]) -> DMatrix<Complex64> {
    let d = 1 << terms[0].1.len();
    let mut out = DMatrix::zeros(d, d);
    for (w, s) in terms {
        out += s.chars().map(pauli).reduce(|a, b| a.kronecker(&b)).unwrap() * *w;
    }
    out
}

fn fidelity(a: &DVector<Complex64>, b: &[Complex64]) -> f64 {
    let ab: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    ab.norm_sqr() / (a.norm_squared() * b.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn zero_state(d: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(d);
    v[0] = c(1.0, 0.0);
    v
}

/// `steps` applications of the normalized map `1 - i H dt`.
fn first_order_map(h: &DMatrix<Complex64>, dt: f64, steps: usize) -> DVector<Complex64> {
    let d = h.nrows();
    let m = DMatrix::identity(d, d) - h * c(0.0, dt);
    let mut v = zero_state(d);
    for _ in 0..steps {
        v = &m * v;
        v /= c(v.norm(), 0.0);
    }
    v
}

const DTS: [f64; 4] = [0.05, 0.025, 0.0125, 0.00625];
const TIME: f64 = 0.5;

/// Final-state infidelity of the variational evolution against the exact
/// propagator and against the normalized first-order map.
fn infidelities(terms: &[(Complex64, &str)]) -> Vec<(f64, f64, f64)> {
    let h = PauliSum::from_pairs(terms).unwrap();
    let hd = dense(terms);
    let exact = (hd.clone() * c(0.0, -TIME)).exp() * zero_state(hd.nrows());
    let ansatz = build_hardware_ansatz(2, 2, &Circuit::new(2, 0).unwrap()).unwrap();
    let theta0 = vec![0.0; ansatz.parameter_count()];
    DTS.iter()
        .map(|&dt| {
            let rec = real_time_evolve(&EvolutionSpec::new(h.clone(), TIME, dt), &ansatz, &theta0).unwrap();
            let phi = ansatz.prepare(rec.final_theta()).unwrap();
            let map = first_order_map(&hd, dt, (TIME / dt).round() as usize);
            (dt, 1.0 - fidelity(&exact, phi.amplitudes()), 1.0 - fidelity(&map, phi.amplitudes()))
        })
        .collect()
}

#[test]
fn evolution_is_first_order_for_generic_hamiltonian() {
    let terms = [(c(1.0, 0.0), "ZZ"), (c(0.5, 0.0), "XI"), (c(0.4, 0.0), "IX")];
    let rows = infidelities(&terms);
    // For pure states the trace distance is sqrt(1 - F); a first-order
    // scheme makes it proportional to dt.
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1.sqrt())).collect();
    let s = slope(&pts);
    assert!((s - 1.0).abs() <= 0.3, "trace-distance slope {s}, rows {rows:?}");
    // The per-step fit tolerance leaves a small floor on the gap to the map.
    for r in &rows {
        assert!(r.2 < 0.05 * r.1, "variational state departs from the first-order map: {r:?}");
    }
}

#[test]
fn anticommuting_hamiltonian_matches_first_order_map() {
    // ZZ and XI anticommute, so H^2 = 1.25 I and the normalized map
    // 1 - i H dt is itself an exact rotation e^{-i H a/w} with
    // a = atan(w dt), w = sqrt(1.25): only a phase-angle lag of order dt^3
    // per step remains. From |00>, 1 - F = (1 - <H>^2/w^2) sin^2(lag) with
    // <H> = 1, and falls as dt^4.
    let terms = [(c(1.0, 0.0), "ZZ"), (c(0.5, 0.0), "XI")];
    let rows = infidelities(&terms);
    for r in &rows {
        assert!(r.2 < 1e-9, "variational state departs from the first-order map: {r:?}");
    }
    let w = 1.25f64.sqrt();
    let predicted: Vec<(f64, f64)> = DTS
        .iter()
        .map(|&dt| {
            let steps = (TIME / dt).round();
            let lag = w * TIME - steps * (w * dt).atan();
            (dt, (1.0 - 1.0 / 1.25) * lag.sin().powi(2))
        })
        .collect();
    // Trace distance is sqrt(1 - F) for pure states and obeys the triangle
    // inequality, so the gap to the map bounds the deviation.
    for (r, p) in rows.iter().zip(&predicted) {
        let dev = (r.1.sqrt() - p.1.sqrt()).abs();
        assert!(dev <= r.2.sqrt() + 1e-3 * p.1.sqrt(), "measured {r:?}, predicted {p:?}");
    }
    let s = slope(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>());
    assert!((s - 4.0).abs() < 0.3, "infidelity slope {s}");
}

/// Classical RK4 on `drho/dt = -i[H, rho] + sum_k L rho L^+ - {L^+ L, rho}/2`.
fn lindblad_rk4(h: &DMatrix<Complex64>, ls: &[DMatrix<Complex64>], rho0: DMatrix<Complex64>, t: f64, steps: usize) -> DMatrix<Complex64> {
    let i = c(0.0, 1.0);
    let rhs = |r: &DMatrix<Complex64>| {
        let mut d = (h * r - r * h) * -i;
        for l in ls {
            let ld = l.adjoint();
            let ll = &ld * l;
            d += l * r * &ld - (&ll * r + r * &ll) * c(0.5, 0.0);
        }
        d
    };
    let dt = t / steps as f64;
    let half = c(dt / 2.0, 0.0);
    let full = c(dt, 0.0);
    let mut r = rho0;
    for _ in 0..steps {
        let k1 = rhs(&r);
        let k2 = rhs(&(&r + &k1 * half));
        let k3 = rhs(&(&r + &k2 * half));
        let k4 = rhs(&(&r + &k3 * full));
        r += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0);
    }
    r
}

#[test]
fn trajectory_average_matches_master_equation() {
    // Driven, damped qubit: H = 0.5 X, L = sqrt(gamma) (X + iY)/2.
    let gamma: f64 = 1.0;
    let g = gamma.sqrt() / 2.0;
    let h_terms = [(c(0.5, 0.0), "X")];
    let l_terms = [(c(g, 0.0), "X"), (c(0.0, g), "Y")];
    let spec = EvolutionSpec::new(PauliSum::from_pairs(&h_terms).unwrap(), 1.0, 0.01)
        .with_jumps(vec![PauliSum::from_pairs(&l_terms).unwrap()]);
    let ansatz = build_hardware_ansatz(1, 0, &Circuit::new(1, 0).unwrap()).unwrap();
    let start = [std::f64::consts::PI, 0.0];
    let records = trajectories(&spec, &ansatz, &start, 1000, 21).unwrap();

    let psi0 = DVector::from_column_slice(ansatz.prepare(&start).unwrap().amplitudes());
    let rho0 = &psi0 * psi0.adjoint();
    for (step, t) in [(50, 0.5), (100, 1.0)] {
        let exact = lindblad_rk4(&dense(&h_terms), &[dense(&l_terms)], rho0.clone(), t, 1000);
        let avg = average_density(&ansatz, &records, step).unwrap();
        let d = trace_distance(&avg, &exact).unwrap();
        assert!(d < 0.05, "trace distance {d} at t = {t}");
    }
}
