//! Dense complex linear algebra used by every operator in the crate.
//!
//! Matrices are at most a few hundred rows (d^2 with d around 12), so
//! everything is dense and eigenproblems go straight to a Hermitian
//! eigensolver. Composite bipartite indices follow `a * d + b`, which is
//! the convention of [`tensor_product`].

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type Ket = DVector<Complex64>;

/// Largest tolerated |A[i,j] - conj(A[j,i])| for matrices treated as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigen-residual tolerance, relative to the operator scale.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-9;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `exp(i * pi * twice / d)`, i.e. `w^(twice / 2)` with `w = exp(2 pi i / d)`.
///
/// Half-integer powers of the root of unity show up in the Heisenberg-Weyl
/// phases; passing twice the exponent as an integer keeps the reduction
/// modulo `2d` exact before the trigonometric call.
pub fn root_of_unity_half(d: usize, twice: i64) -> Complex64 {
    let period = 2 * d as i64;
    let reduced = twice.rem_euclid(period);
    Complex64::from_polar(1.0, std::f64::consts::PI * reduced as f64 / d as f64)
}

/// `w^k` for integer `k`.
pub fn root_of_unity(d: usize, k: i64) -> Complex64 {
    root_of_unity_half(d, 2 * k)
}

/// Kronecker product with row index `i_a * rows_b + i_b`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn kron_ket(a: &Ket, b: &Ket) -> Ket {
    a.kronecker(b)
}

/// `|v><v|`.
pub fn projector(v: &Ket) -> ComplexMatrix {
    v * v.adjoint()
}

pub fn max_hermitian_deviation(a: &ComplexMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(a: &ComplexMatrix, tol: f64) -> bool {
    a.is_square() && max_hermitian_deviation(a) <= tol
}

/// Replace `a` with `(a + a^dagger) / 2`.
pub fn hermitize(a: &mut ComplexMatrix) {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
}

pub fn all_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Real part of `tr(a * b)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// `<v|a|v>`, real part.
pub fn ket_expectation(a: &ComplexMatrix, v: &Ket) -> f64 {
    v.dotc(&(a * v)).re
}

pub fn real_trace(a: &ComplexMatrix) -> f64 {
    a.trace().re
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are ascending (stable with respect to solver order on ties).
/// Each eigenvector is phase-fixed so its first non-negligible component is
/// real and positive.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Ket>,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// `sum_i lambda_i |v_i><v_i|`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.eigenvectors[0].len();
        let mut out = ComplexMatrix::zeros(n, n);
        for (lambda, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            out += projector(v) * Complex64::new(*lambda, 0.0);
        }
        out
    }
}

fn fix_phase(v: &mut Ket) {
    if let Some(first) = v.iter().copied().find(|c| c.norm() > 1e-12) {
        let phase = first.conj() / first.norm();
        for c in v.iter_mut() {
            *c *= phase;
        }
    }
}

pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEigen> {
    let deviation = max_hermitian_deviation(a);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian(deviation));
    }
    if !all_finite(a) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    let sym = Mat::<Complex64>::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let eig = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::InvalidParameter(format!("eigensolver failed: {e:?}")))?;
    let values = eig.S().column_vector();
    let vectors = eig.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].re.total_cmp(&values[j].re));

    let eigenvalues = order.iter().map(|&i| values[i].re).collect();
    let eigenvectors = order
        .iter()
        .map(|&i| {
            let mut v = Ket::from_fn(n, |r, _| vectors[(r, i)]);
            fix_phase(&mut v);
            v
        })
        .collect();
    Ok(HermitianEigen { eigenvalues, eigenvectors })
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(a: &ComplexMatrix, tol: f64) -> Result<bool> {
    Ok(hermitian_eig(a)?.min() >= -tol)
}

/// Orthonormal basis of the complement of the unit vector `v`, as columns.
pub fn orthogonal_complement(v: &Ket) -> Result<DMatrix<Complex64>> {
    let n = v.len();
    let mut perp = ComplexMatrix::identity(n, n) - projector(v);
    hermitize(&mut perp);
    let eig = hermitian_eig(&perp)?;
    let columns: Vec<Ket> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors)
        .filter(|(lambda, _)| **lambda > 0.5)
        .map(|(_, vec)| vec)
        .collect();
    Ok(DMatrix::from_columns(&columns))
}

/// Integer square root of a composite dimension `d^2`.
pub fn local_dim(composite: usize) -> Result<usize> {
    let d = (composite as f64).sqrt().round() as usize;
    if d * d != composite || d < 2 {
        return Err(Error::InvalidParameter(format!(
            "dimension {composite} is not d^2 for some d >= 2"
        )));
    }
    Ok(d)
}

pub fn ket_from_real(values: &[f64]) -> Ket {
    DVector::from_iterator(values.len(), values.iter().map(|&x| Complex64::new(x, 0.0)))
}

pub fn diagonal_matrix(diag: &[f64]) -> ComplexMatrix {
    let n = diag.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (i, &x) in diag.iter().enumerate() {
        m[(i, i)] = Complex64::new(x, 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real_diag(values: &[f64]) -> ComplexMatrix {
        diagonal_matrix(values)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn identity_tensor_identity() {
        let i2 = ComplexMatrix::identity(2, 2);
        assert_eq!(tensor_product(&i2, &i2), ComplexMatrix::identity(4, 4));
    }

    #[test]
    fn diagonal_tensor_identity() {
        let z = real_diag(&[1.0, -1.0]);
        let i2 = ComplexMatrix::identity(2, 2);
        assert_eq!(tensor_product(&z, &i2), real_diag(&[1.0, 1.0, -1.0, -1.0]));
    }

    #[test]
    fn basis_projectors_follow_composite_index() {
        let p0 = real_diag(&[1.0, 0.0]);
        let p1 = real_diag(&[0.0, 1.0]);
        assert_eq!(tensor_product(&p0, &p1), real_diag(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tensor_product_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let c = random_hermitian(2, &mut rng);
        let left = tensor_product(&tensor_product(&a, &b), &c);
        let right = tensor_product(&a, &tensor_product(&b, &c));
        assert!((left - right).norm() <= 1e-14);
    }

    #[test]
    fn eig_of_diagonal_is_sorted() {
        let e = hermitian_eig(&real_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eig_of_pauli_x() {
        let mut x = ComplexMatrix::zeros(2, 2);
        x[(0, 1)] = ONE;
        x[(1, 0)] = ONE;
        let e = hermitian_eig(&x).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hermitian(10, &mut rng);
        let e = hermitian_eig(&a).unwrap();
        assert!((e.reconstruct() - &a).norm() <= 1e-9);
        let scale = e.eigenvalues.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        for (lambda, v) in e.eigenvalues.iter().zip(&e.eigenvectors) {
            let residual = (&a * v - v * Complex64::new(*lambda, 0.0)).norm();
            assert!(residual <= EIGEN_RESIDUAL_TOL * scale);
        }
        for (i, u) in e.eigenvectors.iter().enumerate() {
            for (j, v) in e.eigenvectors.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((u.dotc(v) - Complex64::new(expected, 0.0)).norm() <= 1e-9);
            }
        }
        let trace: f64 = e.eigenvalues.iter().sum();
        assert_abs_diff_eq!(trace, real_trace(&a), epsilon = 1e-9);
    }

    #[test]
    fn eigenvector_phase_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(6, &mut rng);
        let e = hermitian_eig(&a).unwrap();
        for v in &e.eigenvectors {
            let first = v.iter().find(|c| c.norm() > 1e-12).unwrap();
            assert!(first.im.abs() < 1e-14 && first.re > 0.0);
        }
        let again = hermitian_eig(&a).unwrap();
        assert_eq!(e.eigenvalues, again.eigenvalues);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = ONE;
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian(_))));
        assert!(is_psd(&m, 1e-9).is_err());
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&ComplexMatrix::identity(3, 3), 1e-9).unwrap());
        assert!(!is_psd(&real_diag(&[1.0, -0.1]), 1e-9).unwrap());
    }

    #[test]
    fn half_powers_of_unity() {
        // w^(1/2) for d = 2 is i
        let z = root_of_unity_half(2, 1);
        assert_abs_diff_eq!(z.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!((root_of_unity(5, 5) - ONE).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((root_of_unity(3, -1) - root_of_unity(3, 2)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn complement_is_orthonormal() {
        let v = ket_from_real(&[0.6, 0.8, 0.0]);
        let q = orthogonal_complement(&v).unwrap();
        assert_eq!(q.ncols(), 2);
        let gram = q.adjoint() * &q;
        assert!((gram - ComplexMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((q.adjoint() * &v).norm() < 1e-12);
    }
}
