//! Dense complex matrix kernel.
//!
//! Spectral quantities go through [`herm_eig`]: the input is symmetrized,
//! decomposed with a Hermitian solver and the eigenpairs are sorted
//! ascending. Matrix functions are then `V diag(f(λ)) V†`. Gram matrices
//! `B†B` are decomposed by [`gram_eig`] from the SVD of `B`, which keeps small
//! eigenvalues accurate. Nothing here diagonalizes a non-Hermitian matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Eigen-decomposition `M = V diag(λ) V†` of a Hermitian matrix with λ ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    /// `V diag(values) V†`.
    pub fn compose(&self, values: &[f64]) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lam) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.compose(&self.eigenvalues)
    }

    /// Applies `f` to the spectrum, failing if any eigenvalue is below `domain_min`.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F, domain_min: f64) -> Result<ComplexMatrix> {
        if let Some(&bad) = self.eigenvalues.iter().find(|&&l| l < domain_min) {
            return Err(Error::DomainViolation {
                eigenvalue: bad,
                domain_min,
            });
        }
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        Ok(self.compose(&mapped))
    }
}

pub fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entrywise modulus of `M - M†`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M†)/2`.
pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn real_trace(m: &ComplexMatrix) -> f64 {
    m.trace().re
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Builds a complex matrix from row-major real and imaginary parts.
pub fn from_rows(rows: &[&[C64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    ComplexMatrix::from_fn(n, m, |i, j| rows[i][j])
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
}

/// `|a⟩⟨b|`.
pub fn outer(a: &ComplexVector, b: &ComplexVector) -> ComplexMatrix {
    a * b.adjoint()
}

pub fn herm_eig(m: &ComplexMatrix) -> Result<SpectralDecomposition> {
    herm_eig_with(m, Tolerances::default().herm)
}

/// Hermitian eigendecomposition, eigenvalues ascending with stable tie order.
pub fn herm_eig_with(m: &ComplexMatrix, tol_herm: f64) -> Result<SpectralDecomposition> {
    let n = check_square(m)?;
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    let deviation = hermiticity_defect(m);
    if deviation > tol_herm {
        return Err(Error::NotHermitian {
            deviation,
            tolerance: tol_herm,
        });
    }
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(hermitize(m), f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::BackendFailure(format!("no convergence for {n}x{n} matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::BackendFailure("non-finite eigenvalue".into()));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `V diag(f(λ)) V†` for Hermitian `M`; fails if some λ < `domain_min`.
pub fn spectral_fn<F: Fn(f64) -> f64>(m: &ComplexMatrix, f: F, domain_min: f64) -> Result<ComplexMatrix> {
    herm_eig(m)?.apply(f, domain_min)
}

/// Principal square root of a PSD matrix. Eigenvalues in `[-psd, 0)` are
/// rounding noise and are clamped to zero.
pub fn herm_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let tol = Tolerances::default();
    spectral_fn(m, |x| x.max(0.0).sqrt(), -tol.psd)
}

pub fn herm_log(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    spectral_fn(m, f64::ln, Tolerances::default().faithful)
}

pub fn herm_inv(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    spectral_fn(m, f64::recip, Tolerances::default().faithful)
}

/// `M^{-1/2}` for positive definite `M`.
pub fn herm_inv_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    spectral_fn(m, |x| x.sqrt().recip(), Tolerances::default().faithful)
}

/// Spectral decomposition of `B†B`, ascending, from the SVD of `B`.
///
/// Eigenvalues are the squared singular values, so small ones keep their
/// relative accuracy instead of being resolved only to `ε·‖B†B‖`.
pub fn gram_eig(b: &ComplexMatrix) -> Result<SpectralDecomposition> {
    let n = check_square(b)?;
    if !is_finite(b) {
        return Err(Error::NonFinite);
    }
    let svd = b
        .clone()
        .try_svd(false, true, f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::BackendFailure(format!("SVD did not converge for {n}x{n} matrix")))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::BackendFailure("SVD returned no right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let eigenvalues = order.iter().map(|&k| svd.singular_values[k].powi(2)).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| v_t[(order[j], i)].conj());
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Singular values of a general complex matrix, descending.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Numerical rank: singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &ComplexMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{haar_unitary, random_hermitian, sample_faithful, RngStream};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn gram_eig_matches_hermitian_solver() {
        let b = from_rows(&[
            &[C64::new(1.0, 0.5), C64::new(0.2, 0.0), C64::new(0.0, -0.3)],
            &[C64::new(0.0, 0.0), C64::new(2.0, 0.0), C64::new(0.4, 0.1)],
            &[C64::new(-0.7, 0.0), C64::new(0.0, 1.0), C64::new(0.1, 0.0)],
        ]);
        let g = gram_eig(&b).unwrap();
        let direct = herm_eig(&(b.adjoint() * &b)).unwrap();
        for (x, y) in g.eigenvalues.iter().zip(&direct.eigenvalues) {
            assert!((x - y).abs() < 1e-13);
        }
        assert!((g.reconstruct() - b.adjoint() * &b).norm() < 1e-13);
        assert!((g.eigenvectors.adjoint() * &g.eigenvectors - identity(3)).norm() < 1e-13);
    }

    #[test]
    fn gram_eig_keeps_small_eigenvalues_accurate() {
        let b = diag(&[1e-6, 1.0, 1e3]);
        let g = gram_eig(&b).unwrap();
        assert!((g.eigenvalues[0] / 1e-12 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_spectrum() {
        let d = herm_eig(&identity(2)).unwrap();
        assert_eq!(d.eigenvalues.len(), 2);
        for l in &d.eigenvalues {
            assert_abs_diff_eq!(*l, 1.0, epsilon = 1e-14);
        }
        let vhv = d.eigenvectors.adjoint() * &d.eigenvectors;
        assert!((vhv - identity(2)).norm() < 1e-12);
    }

    #[test]
    fn diagonal_spectrum_has_standard_vectors() {
        let d = herm_eig(&diag(&[4.0, 9.0])).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.eigenvalues[1], 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.eigenvectors[(0, 0)].norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.eigenvectors[(1, 1)].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn two_by_two_characteristic_polynomial() {
        // λ² - 4λ + 3 = 0
        let m = from_rows(&[&[c(2.0), c(1.0)], &[c(1.0), c(2.0)]]);
        let d = herm_eig(&m).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(d.eigenvalues[1], 3.0, epsilon = 1e-13);
    }

    #[test]
    fn rejects_non_hermitian_and_non_finite() {
        let m = from_rows(&[&[c(1.0), c(1.0)], &[c(0.0), c(1.0)]]);
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian { .. })));
        let m = from_rows(&[&[c(f64::NAN), c(0.0)], &[c(0.0), c(1.0)]]);
        assert_eq!(herm_eig(&m).unwrap_err(), Error::NonFinite);
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(herm_eig(&m), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn spectral_fn_examples() {
        let z = spectral_fn(&identity(2), f64::ln, 0.0).unwrap();
        assert!(z.norm() < 1e-14);
        let s = spectral_fn(&diag(&[4.0, 9.0]), f64::sqrt, 0.0).unwrap();
        assert!((s - diag(&[2.0, 3.0])).norm() < 1e-14);
        let e = std::f64::consts::E;
        let l = herm_log(&diag(&[e, e * e])).unwrap();
        assert!((l - diag(&[1.0, 2.0])).norm() < 1e-14);
    }

    #[test]
    fn domain_violation_reports_eigenvalue() {
        let err = herm_log(&diag(&[-0.5, 1.0])).unwrap_err();
        assert_eq!(
            err,
            Error::DomainViolation {
                eigenvalue: -0.5,
                domain_min: 1e-12
            }
        );
    }

    #[test]
    fn wrappers_on_trivial_inputs() {
        assert!((herm_inv(&identity(3)).unwrap() - identity(3)).norm() < 1e-14);
        let s = herm_sqrt(&diag(&[0.25, 0.25])).unwrap();
        assert!((s - diag(&[0.5, 0.5])).norm() < 1e-14);
    }

    #[test]
    fn log_exp_round_trip_on_random_states() {
        let mut rng = RngStream::new(7, 0);
        for n in 2..=6 {
            let rho = sample_faithful(n, &mut rng);
            let log = herm_log(rho.matrix()).unwrap();
            let back = spectral_fn(&log, f64::exp, f64::NEG_INFINITY).unwrap();
            assert!((back - rho.matrix()).norm() <= 1e-9);
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let mut rng = RngStream::new(8, 0);
        for n in 2..=8 {
            let rho = sample_faithful(n, &mut rng);
            let prod = herm_inv(rho.matrix()).unwrap() * rho.matrix();
            assert!((prod - identity(n)).norm() <= 1e-9 * n as f64);
        }
    }

    #[test]
    fn random_hermitian_reconstruction_and_orthonormality() {
        let mut rng = RngStream::new(9, 0);
        for n in 1..=16 {
            let m = random_hermitian(n, &mut rng);
            let d = herm_eig(&m).unwrap();
            assert!(d.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            assert!((d.reconstruct() - &m).norm() <= 1e-10 * n as f64);
            let vhv = d.eigenvectors.adjoint() * &d.eigenvectors;
            assert!((vhv - identity(n)).norm() <= 1e-12 * n as f64);
        }
    }

    #[test]
    fn spectral_fn_commutes_with_unitary_conjugation() {
        let mut rng = RngStream::new(10, 0);
        for n in 2..=6 {
            let m = random_hermitian(n, &mut rng);
            let u = haar_unitary(n, &mut rng);
            let conj = &u * &m * u.adjoint();
            let lhs = spectral_fn(&conj, f64::sin, f64::NEG_INFINITY).unwrap();
            let rhs = &u * spectral_fn(&m, f64::sin, f64::NEG_INFINITY).unwrap() * u.adjoint();
            assert!((lhs - rhs).norm() <= 1e-9);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = RngStream::new(11, 0);
        for n in 2..=8 {
            let g = crate::states::ginibre(n, n, &mut rng);
            let psd = &g * g.adjoint();
            let s = herm_sqrt(&psd).unwrap();
            assert!((&s * &s - &psd).norm() <= 1e-9);
        }
    }

    #[test]
    fn degenerate_ties_are_stable() {
        let d = herm_eig(&diag(&[2.0, 1.0, 2.0])).unwrap();
        assert_eq!(d.eigenvalues, vec![1.0, 2.0, 2.0]);
    }
}
