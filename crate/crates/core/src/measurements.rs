//! Modified Heisenberg-Weyl operators, their eigenbases, the local POVMs
//! built from them, and Born-rule statistics.
//!
//! A measurement configuration `j` measures side A in the eigenbasis of
//! `Omega_j(chi_A)` and side B in the eigenbasis of `Omega_{-j}(chi_B)`.
//! Outcome `m < d` on a side is the projection onto `|E_m>` (weighted by
//! `1/d`); outcome `d` is the remainder element completing the POVM.
//!
//! Negative indices are kept literal in all phases. For even `d`,
//! `Omega_{-j}` and `Omega_{d-j}` differ by a sign, and only the literal
//! one stabilizes the target together with `Omega_j` on the other side.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    hermitian_eig, hermitize, projector, root_of_unity, root_of_unity_half, Complex64,
    ComplexMatrix, Ket, ZERO,
};
use crate::states::{DensityMatrix, SchmidtVector};

const NORM_TOL: f64 = 1e-12;

/// Unit-norm modification coefficients with no zero entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiVector {
    coeffs: Vec<Complex64>,
}

impl ChiVector {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidChi(format!("need d >= 2, got {}", coeffs.len())));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidChi("non-finite coefficient".into()));
        }
        if let Some(k) = coeffs.iter().position(|c| c.norm() == 0.0) {
            return Err(Error::InvalidChi(format!("coefficient {k} is zero")));
        }
        let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidChi(format!("|chi|^2 = {norm_sq}, expected 1")));
        }
        Ok(ChiVector { coeffs })
    }

    /// Normalizes `raw` before validating.
    pub fn normalized(raw: Vec<Complex64>) -> Result<Self> {
        let norm = raw.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidChi("cannot normalize a zero vector".into()));
        }
        Self::new(raw.into_iter().map(|c| c / norm).collect())
    }

    pub fn from_real(raw: &[f64]) -> Result<Self> {
        Self::normalized(raw.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn uniform(d: usize) -> Self {
        let c = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        ChiVector { coeffs: vec![c; d] }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.coeffs[k % self.dim()]
    }

    /// `|chi_k|^2` for every `k`.
    pub fn weights(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn is_uniform(&self, tol: f64) -> bool {
        let target = 1.0 / self.dim() as f64;
        self.weights().iter().all(|w| (w - target).abs() <= tol)
    }
}

/// The pair `(chi_A, chi_B)` defining a family of measurement configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiPair {
    pub a: ChiVector,
    pub b: ChiVector,
}

impl ChiPair {
    pub fn new(a: ChiVector, b: ChiVector) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        Ok(ChiPair { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `N(mu) = sum_k |chi_A[k + mu] chi_B[k]|^2`.
    pub fn overlap_norm(&self, mu: usize) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|k| (self.a.get(k + mu) * self.b.get(k)).norm_sqr())
            .sum()
    }

    /// The Schmidt vector `s_k = chi_A[k] chi_B[k] / sqrt(N(0))` this pair
    /// stabilizes, if every product is real and positive.
    pub fn implied_schmidt(&self) -> Result<SchmidtVector> {
        let n0 = self.overlap_norm(0).sqrt();
        let mut s = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let p = self.a.get(k) * self.b.get(k) / n0;
            if p.im.abs() > 1e-9 * p.norm() || p.re <= 0.0 {
                return Err(Error::InvalidChi(format!(
                    "chi_A[{k}] chi_B[{k}] = {p} is not real positive"
                )));
            }
            s.push(p.re);
        }
        SchmidtVector::normalized(s)
    }

    /// Whether `s_k = chi_A[k] chi_B[k] / sqrt(N(0))` holds for all `k` within `tol`.
    pub fn is_compatible_with(&self, s: &SchmidtVector, tol: f64) -> bool {
        if s.dim() != self.dim() {
            return false;
        }
        let n0 = self.overlap_norm(0).sqrt();
        (0..self.dim()).all(|k| {
            let p = self.a.get(k) * self.b.get(k) / n0;
            (p - Complex64::new(s.get(k), 0.0)).norm() <= tol
        })
    }

    /// `d / N(0)`, the weight of the Bell-type verifiers.
    pub fn verifier_coefficient(&self) -> f64 {
        self.dim() as f64 / self.overlap_norm(0)
    }
}

/// Clock operator `Z = sum_k w^k |k><k|`.
pub fn clock_op(d: usize) -> ComplexMatrix {
    let mut z = ComplexMatrix::zeros(d, d);
    for k in 0..d {
        z[(k, k)] = root_of_unity(d, k as i64);
    }
    z
}

/// Modified shift `X(chi) = sum_k (chi_{k+1} / chi_k) |k+1><k|`.
pub fn shift_op(chi: &ChiVector) -> ComplexMatrix {
    let d = chi.dim();
    let mut x = ComplexMatrix::zeros(d, d);
    for k in 0..d {
        x[((k + 1) % d, k)] = chi.get(k + 1) / chi.get(k);
    }
    x
}

fn matrix_power(m: &ComplexMatrix, exponent: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..exponent {
        out = &out * m;
    }
    out
}

/// `Omega_{i,j}(chi) = w^{-ij(d-1)/2} X(chi)^i Z^j`.
pub fn hw_op(i: i64, j: i64, chi: &ChiVector) -> ComplexMatrix {
    let d = chi.dim();
    let di = d as i64;
    let phase = root_of_unity_half(d, -i * j * (di - 1));
    let x_pow = matrix_power(&shift_op(chi), i.rem_euclid(di) as usize);
    let z_pow = matrix_power(&clock_op(d), j.rem_euclid(di) as usize);
    (x_pow * z_pow) * phase
}

/// `|E_m(j; chi)> = sum_k w^{-(m + jd/2) k + j k^2 / 2} chi_k |k>`,
/// the eigenvector of `Omega_j(chi)` with eigenvalue `w^m`.
pub fn hw_eigenbasis_state(m: i64, j: i64, chi: &ChiVector) -> Ket {
    let d = chi.dim();
    let di = d as i64;
    Ket::from_iterator(
        d,
        (0..di).map(|k| {
            let twice = -(2 * m + j * di) * k + j * k * k;
            root_of_unity_half(d, twice) * chi.get(k as usize)
        }),
    )
}

/// The `d` states `{|E_m(j; chi)>}_m`.
pub fn hw_eigenbasis(j: i64, chi: &ChiVector) -> Vec<Ket> {
    (0..chi.dim() as i64).map(|m| hw_eigenbasis_state(m, j, chi)).collect()
}

/// A local POVM with `d + 1` elements: `|E_m><E_m| / d` for `m < d` and the remainder.
#[derive(Debug, Clone)]
pub struct Povm {
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn element(&self, m: usize) -> &ComplexMatrix {
        &self.elements[m]
    }

    /// Local dimension `d` (the POVM has `d + 1` elements).
    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn completeness_error(&self) -> f64 {
        let d = self.dim();
        let sum = self
            .elements
            .iter()
            .fold(ComplexMatrix::zeros(d, d), |acc, m| acc + m);
        (sum - ComplexMatrix::identity(d, d)).norm()
    }

    /// Smallest eigenvalue over all elements.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for m in &self.elements {
            worst = worst.min(hermitian_eig(m)?.min());
        }
        Ok(worst)
    }

    pub fn heisenberg_weyl(j: i64, chi: &ChiVector) -> Result<Self> {
        povm_from_basis(&hw_eigenbasis(j, chi))
    }
}

pub fn povm_from_basis(basis: &[Ket]) -> Result<Povm> {
    let d = basis.len();
    if d < 2 {
        return Err(Error::InvalidParameter("a POVM basis needs at least 2 states".into()));
    }
    for (m, state) in basis.iter().enumerate() {
        if state.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: state.len() });
        }
        if (state.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("basis state {m} is not unit norm")));
        }
    }
    let scale = Complex64::new(1.0 / d as f64, 0.0);
    let mut elements: Vec<ComplexMatrix> = basis.iter().map(|e| projector(e) * scale).collect();
    let mut remainder = ComplexMatrix::identity(d, d);
    for m in &elements {
        remainder -= m;
    }
    hermitize(&mut remainder);
    let lowest = hermitian_eig(&remainder)?.min();
    if lowest < -1e-10 {
        return Err(Error::InvalidPovm(lowest));
    }
    elements.push(remainder);
    Ok(Povm { elements })
}

/// Local POVM pair for configuration `j`: `M[Omega_j(chi_A)] x M[Omega_{-j}(chi_B)]`.
#[derive(Debug, Clone)]
pub struct MeasurementConfig {
    pub j: usize,
    pub chi: ChiPair,
}

impl MeasurementConfig {
    pub fn new(j: usize, chi: ChiPair) -> Result<Self> {
        if j >= chi.dim() {
            return Err(Error::ConfigOutOfRange { index: j, d: chi.dim() });
        }
        Ok(MeasurementConfig { j, chi })
    }

    pub fn dim(&self) -> usize {
        self.chi.dim()
    }

    pub fn basis_a(&self) -> Vec<Ket> {
        hw_eigenbasis(self.j as i64, &self.chi.a)
    }

    pub fn basis_b(&self) -> Vec<Ket> {
        hw_eigenbasis(-(self.j as i64), &self.chi.b)
    }

    pub fn povm_a(&self) -> Result<Povm> {
        povm_from_basis(&self.basis_a())
    }

    pub fn povm_b(&self) -> Result<Povm> {
        povm_from_basis(&self.basis_b())
    }
}

fn check_distribution(probs: &[f64], what: &str) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidParameter(format!("{what}: negative or non-finite entry")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("{what}: entries sum to {total}")));
    }
    Ok(())
}

/// Computational-basis statistics `p_e(k_A, k_B)`, stored row-major by `k_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompBasisStats {
    d: usize,
    probs: Vec<f64>,
}

impl CompBasisStats {
    pub fn new(d: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: probs.len() });
        }
        check_distribution(&probs, "computational-basis statistics")?;
        Ok(CompBasisStats { d, probs })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, ka: usize, kb: usize) -> f64 {
        self.probs[ka * self.d + kb]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.d).map(|k| self.get(k, k)).collect()
    }

    /// Whether `p_e(k, k') = p_e(k', k)` for all pairs within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.d).all(|a| (0..self.d).all(|b| (self.get(a, b) - self.get(b, a)).abs() <= tol))
    }

    pub fn sample(&self, shots: u64, seed: u64) -> Result<Self> {
        CompBasisStats::new(self.d, sample_stats(&self.probs, shots, seed)?)
    }
}

/// Outcome statistics `p_j(m_A, m_B)` of one configuration, `(d+1) x (d+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigStats {
    j: usize,
    d: usize,
    probs: Vec<f64>,
}

impl ConfigStats {
    pub fn new(j: usize, d: usize, probs: Vec<f64>) -> Result<Self> {
        let n = (d + 1) * (d + 1);
        if probs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: probs.len() });
        }
        check_distribution(&probs, "configuration statistics")?;
        Ok(ConfigStats { j, d, probs })
    }

    pub fn config(&self) -> usize {
        self.j
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, ma: usize, mb: usize) -> f64 {
        self.probs[ma * (self.d + 1) + mb]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// `sum_{m<d} p_j(m, -m mod d)`, the anti-correlated outcome mass.
    pub fn anticorrelated_mass(&self) -> f64 {
        let d = self.d;
        (0..d).map(|m| self.get(m, (d - m) % d)).sum()
    }

    pub fn sample(&self, shots: u64, seed: u64) -> Result<Self> {
        ConfigStats::new(self.j, self.d, sample_stats(&self.probs, shots, seed)?)
    }
}

fn clean_probability(p: f64) -> f64 {
    if p < 0.0 && p > -1e-12 {
        0.0
    } else {
        p
    }
}

/// `p_e(k_A, k_B) = <k_A, k_B| rho |k_A, k_B>`.
pub fn comp_basis_stats(rho: &DensityMatrix) -> CompBasisStats {
    let d = rho.local_dim();
    let m = rho.matrix();
    let probs = (0..d * d).map(|i| clean_probability(m[(i, i)].re)).collect();
    CompBasisStats { d, probs }
}

/// Born-rule table `p_j(m_A, m_B) = tr(rho M_{m_A} x M_{m_B})`, remainder outcomes included.
pub fn config_stats(rho: &DensityMatrix, cfg: &MeasurementConfig) -> Result<ConfigStats> {
    let d = rho.local_dim();
    if cfg.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: cfg.dim() });
    }
    let povm_a = cfg.povm_a()?;
    let povm_b = cfg.povm_b()?;
    let r = rho.matrix();
    let mut probs = Vec::with_capacity((d + 1) * (d + 1));
    for ma in povm_a.elements() {
        // sigma_B = tr_A[(M_A x I) rho]
        let mut sigma = ComplexMatrix::zeros(d, d);
        for b in 0..d {
            for b2 in 0..d {
                let mut acc = ZERO;
                for a in 0..d {
                    for a2 in 0..d {
                        acc += ma[(a2, a)] * r[(a * d + b, a2 * d + b2)];
                    }
                }
                sigma[(b, b2)] = acc;
            }
        }
        for mb in povm_b.elements() {
            let mut acc = ZERO;
            for b in 0..d {
                for b2 in 0..d {
                    acc += sigma[(b, b2)] * mb[(b2, b)];
                }
            }
            probs.push(clean_probability(acc.re));
        }
    }
    Ok(ConfigStats { j: cfg.j, d, probs })
}

/// Multinomial resampling of an exact table into empirical frequencies.
///
/// Drawn as a chain of conditional binomials from a ChaCha8 stream seeded
/// with `seed`, so equal inputs give identical output on every platform.
pub fn sample_stats(probs: &[f64], shots: u64, seed: u64) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining_shots = shots;
    let mut remaining_mass: f64 = probs.iter().sum();
    let mut out = vec![0.0; probs.len()];
    for (i, &p) in probs.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let count = if i + 1 == probs.len() || remaining_mass <= p {
            remaining_shots
        } else if p <= 0.0 {
            0
        } else {
            let q = (p / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining_shots, q)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(&mut rng)
        };
        out[i] = count as f64 / shots as f64;
        remaining_shots -= count;
        remaining_mass -= p;
    }
    Ok(out)
}
