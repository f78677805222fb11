//! Dense linear-algebra helpers for small registers: norms, condition numbers,
//! reference solutions, matrix exponentials and Haar-random unitaries.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pauli::DENSE_QUBIT_CAP;

/// Smallest singular value treated as nonzero.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

fn check_square(m: &DMatrix<Complex64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    let limit = 1usize << DENSE_QUBIT_CAP;
    if m.nrows() > limit {
        return Err(Error::DenseCap {
            qubits: (m.nrows() as f64).log2().ceil() as usize,
            cap: DENSE_QUBIT_CAP,
        });
    }
    Ok(())
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    check_square(m)?;
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> Result<f64> {
    Ok(singular_values(m)?[0])
}

/// `sigma_max / sigma_min`; for Hermitian input this is the ratio of extreme
/// eigenvalue magnitudes.
pub fn condition_number(m: &DMatrix<Complex64>) -> Result<f64> {
    let sv = singular_values(m)?;
    let lo = *sv.last().expect("nonempty");
    if lo < SINGULAR_TOLERANCE {
        return Err(Error::Singular(lo));
    }
    Ok(sv[0] / lo)
}

/// `M x = b` by LU with partial pivoting.
pub fn solve(m: &DMatrix<Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    check_square(m)?;
    if b.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: b.len(),
        });
    }
    let sv = singular_values(m)?;
    let lo = *sv.last().expect("nonempty");
    if lo < SINGULAR_TOLERANCE {
        return Err(Error::Singular(lo));
    }
    let x = m
        .clone()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .ok_or(Error::Singular(lo))?;
    Ok(x.iter().copied().collect())
}

pub fn matvec(m: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    (m * DVector::from_column_slice(v)).iter().copied().collect()
}

/// `exp(m)`.
pub fn expm(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    check_square(m)?;
    Ok(m.clone().exp())
}

/// Unit vector along `v`.
pub fn normalized(v: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if n < 1e-300 {
        return Err(Error::Annihilated(n));
    }
    Ok(v.iter().map(|a| a / n).collect())
}

/// `|<a|b>|^2 / (<a|a><b|b>)`.
pub fn state_fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ab = crate::statevec::dot(a, b);
    let aa: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let bb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    ab.norm_sqr() / (aa * bb)
}

/// Haar-random `d x d` unitary: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let ph = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn condition_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(-4.0), c(2.0)]));
        assert!((condition_number(&m).unwrap() - 4.0).abs() < 1e-12);
        assert!((spectral_norm(&m).unwrap() - 4.0).abs() < 1e-12);
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.0)]));
        assert!(matches!(condition_number(&s), Err(Error::Singular(_))));
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = haar_unitary(8, &mut rng);
        let e = u.adjoint() * &u - DMatrix::identity(8, 8);
        assert!(e.norm() < 1e-12);
    }

    #[test]
    fn solve_recovers_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = haar_unitary(4, &mut rng);
        let b = vec![c(1.0), c(0.0), c(0.5), Complex64::new(0.0, 1.0)];
        let x = solve(&u, &b).unwrap();
        let back = matvec(&u, &x);
        for (p, q) in back.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn expm_of_pauli_rotation() {
        // exp(-i a X) = cos a I - i sin a X
        let a = 0.3;
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), Complex64::new(0.0, -a), Complex64::new(0.0, -a), c(0.0)]);
        let e = expm(&m).unwrap();
        assert!((e[(0, 0)] - c(a.cos())).norm() < 1e-13);
        assert!((e[(0, 1)] - Complex64::new(0.0, -a.sin())).norm() < 1e-13);
    }

    #[test]
    fn fidelity_ignores_scale_and_phase() {
        let a = vec![c(1.0), c(1.0)];
        let b = vec![Complex64::new(0.0, 2.0), Complex64::new(0.0, 2.0)];
        assert!((state_fidelity(&a, &b) - 1.0).abs() < 1e-15);
    }
}
