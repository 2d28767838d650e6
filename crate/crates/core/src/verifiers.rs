//! Verifier operators that stabilize the target, the error and information
//! operators built from computational-basis data, and decompositions of the
//! verifiers into (generally non-orthogonal) generalized Bell projectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::{
    hw_eigenbasis, ChiPair, CompBasisStats, ConfigStats, MeasurementConfig,
};
use crate::numerics::{
    hermitian_eig, hermitize, kron_ket, local_dim, max_hermitian_deviation, orthogonal_complement,
    projector, tensor_product, trace_product, Complex64, ComplexMatrix, Ket,
};
use crate::states::{composite_index, generalized_bell_state, DensityMatrix};

const SUPPORT_TOL: f64 = 1e-10;
const STABILIZATION_TOL: f64 = 1e-10;
const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "j", rename_all = "snake_case")]
pub enum VerifierOrigin {
    Computational,
    Config(usize),
    Mixture,
}

/// Mixing weights: `u_e` for the computational-basis verifier and one `u_j`
/// per configuration verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierWeights {
    pub u_e: f64,
    pub u_j: Vec<f64>,
}

impl VerifierWeights {
    pub fn new(u_e: f64, u_j: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&u_e) {
            return Err(Error::InvalidWeights(format!("u_e = {u_e} outside [0, 1]")));
        }
        if u_j.is_empty() {
            return Err(Error::EmptyConfigSet);
        }
        if let Some(bad) = u_j.iter().find(|u| !u.is_finite() || **u < 0.0) {
            return Err(Error::InvalidWeights(format!("negative configuration weight {bad}")));
        }
        let total: f64 = u_j.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("configuration weights sum to {total}")));
        }
        Ok(VerifierWeights { u_e, u_j })
    }

    /// Equal weight on `n` configurations.
    pub fn uniform(u_e: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyConfigSet);
        }
        Self::new(u_e, vec![1.0 / n as f64; n])
    }
}

/// A Hermitian operator `V` with `V |psi> = |psi>`.
#[derive(Debug, Clone)]
pub struct Verifier {
    pub operator: ComplexMatrix,
    pub origin: VerifierOrigin,
    pub weights: Option<VerifierWeights>,
}

impl Verifier {
    pub fn stabilization_residual(&self, psi: &Ket) -> f64 {
        (&self.operator * psi - psi).norm()
    }

    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        trace_product(rho.matrix(), &self.operator)
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> Result<usize> {
        Ok(hermitian_eig(&self.operator)?.eigenvalues.iter().filter(|l| **l > tol).count())
    }
}

fn finish(mut operator: ComplexMatrix, psi: &Ket, origin: VerifierOrigin) -> Result<Verifier> {
    let dev = max_hermitian_deviation(&operator);
    if dev > 1e-9 {
        return Err(Error::NotHermitian(dev));
    }
    hermitize(&mut operator);
    let v = Verifier { operator, origin, weights: None };
    let residual = v.stabilization_residual(psi);
    if residual > STABILIZATION_TOL {
        return Err(Error::NotStabilizing(residual));
    }
    Ok(v)
}

/// Projector onto the computational-basis pairs where `psi` has support.
pub fn comp_basis_verifier(psi: &Ket) -> Result<Verifier> {
    let n = psi.len();
    local_dim(n)?;
    let mut operator = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        if psi[i].norm() > SUPPORT_TOL {
            operator[(i, i)] = Complex64::new(1.0, 0.0);
        }
    }
    finish(operator, psi, VerifierOrigin::Computational)
}

/// `T = sum_m |E_m><e_m|`, the change of basis from computational to measurement states.
#[derive(Debug, Clone)]
pub struct BasisTransform {
    pub matrix: ComplexMatrix,
}

impl BasisTransform {
    pub fn from_basis(basis: &[Ket]) -> Self {
        BasisTransform { matrix: ComplexMatrix::from_columns(basis) }
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix.clone().svd(false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn inverse(&self) -> Result<ComplexMatrix> {
        let cond = self.condition_number();
        if cond.is_nan() || cond >= 1e12 {
            return Err(Error::SingularTransform);
        }
        self.matrix.clone().try_inverse().ok_or(Error::SingularTransform)
    }
}

/// Weights `v_{m_A m_B}` from the basis transforms, row-major `m_A * d + m_B`.
pub fn lemma1_weights(basis_a: &[Ket], basis_b: &[Ket], psi: &Ket) -> Result<Vec<Complex64>> {
    let d = basis_a.len();
    if basis_b.len() != d || psi.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, found: psi.len() });
    }
    let ta = BasisTransform::from_basis(basis_a);
    let tb = BasisTransform::from_basis(basis_b);
    let numer = tensor_product(&ta.inverse()?, &tb.inverse()?) * psi;
    let denom = tensor_product(&ta.matrix.adjoint(), &tb.matrix.adjoint()) * psi;
    let cutoff = 1e-12 * denom.norm();
    let scale = (d * d) as f64;
    Ok((0..d * d)
        .map(|i| {
            if denom[i].norm() <= cutoff {
                Complex64::new(0.0, 0.0)
            } else {
                numer[i] / denom[i] * scale
            }
        })
        .collect())
}

/// General verifier for one configuration: `sum v_{m_A m_B} M_{m_A} x M_{m_B}` over `m < d`.
pub fn lemma1_verifier(cfg: &MeasurementConfig, psi: &Ket) -> Result<Verifier> {
    let d = cfg.dim();
    let (basis_a, basis_b) = (cfg.basis_a(), cfg.basis_b());
    let weights = lemma1_weights(&basis_a, &basis_b, psi)?;
    let mut operator = ComplexMatrix::zeros(d * d, d * d);
    let inv_d2 = 1.0 / (d * d) as f64;
    for ma in 0..d {
        for mb in 0..d {
            let v = weights[ma * d + mb];
            if v.norm() == 0.0 {
                continue;
            }
            operator += projector(&kron_ket(&basis_a[ma], &basis_b[mb])) * (v * inv_d2);
        }
    }
    finish(operator, psi, VerifierOrigin::Config(cfg.j))
}

/// `(d / N(0)) sum_m M_m[Omega_j(chi_A)] x M_{-m}[Omega_{-j}(chi_B)]`.
pub fn bell_verifier(j: usize, chi: &ChiPair) -> Result<Verifier> {
    let d = chi.dim();
    if j >= d {
        return Err(Error::ConfigOutOfRange { index: j, d });
    }
    let basis_a = hw_eigenbasis(j as i64, &chi.a);
    let basis_b = hw_eigenbasis(-(j as i64), &chi.b);
    let weight = chi.verifier_coefficient() / (d * d) as f64;
    let mut operator = ComplexMatrix::zeros(d * d, d * d);
    for m in 0..d {
        let pair = kron_ket(&basis_a[m], &basis_b[(d - m) % d]);
        operator += projector(&pair) * Complex64::new(weight, 0.0);
    }
    let psi = generalized_bell_state(0, 0, chi)?;
    finish(operator, &psi, VerifierOrigin::Config(j))
}

/// `sum_{mu nu : j mu + nu = 0} (N(mu)/N(0)) |psi_{mu nu}><psi_{mu nu}|`, as (state, weight) pairs.
pub fn bell_verifier_terms(j: usize, chi: &ChiPair) -> Result<Vec<(Ket, f64)>> {
    let d = chi.dim();
    let n0 = chi.overlap_norm(0);
    (0..d)
        .map(|mu| {
            let nu = (d - (j * mu) % d) % d;
            Ok((generalized_bell_state(mu, nu, chi)?, chi.overlap_norm(mu) / n0))
        })
        .collect()
}

/// The error operator: diagonal, weight `(d / N(0)) |chi_A[k_A] chi_B[k_B]|^2` off the diagonal pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorOperator {
    d: usize,
    gamma: Vec<f64>,
}

impl ErrorOperator {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// `gamma_{k_A k_B}`, zero when `k_A == k_B`.
    pub fn weight(&self, ka: usize, kb: usize) -> f64 {
        self.gamma[composite_index(ka, kb, self.d)]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.gamma
    }

    pub fn matrix(&self) -> ComplexMatrix {
        crate::numerics::diagonal_matrix(&self.gamma)
    }

    pub fn observable(&self) -> Observable {
        Observable::Diagonal(self.gamma.clone())
    }

    pub fn expectation(&self, stats: &CompBasisStats) -> Result<f64> {
        expectation_from_stats(&self.observable(), Stats::Comp(stats))
    }
}

pub fn error_operator(chi: &ChiPair) -> ErrorOperator {
    let d = chi.dim();
    let coeff = chi.verifier_coefficient();
    let (wa, wb) = (chi.a.weights(), chi.b.weights());
    let mut gamma = vec![0.0; d * d];
    for ka in 0..d {
        for kb in 0..d {
            if ka != kb {
                gamma[composite_index(ka, kb, d)] = coeff * wa[ka] * wb[kb];
            }
        }
    }
    ErrorOperator { d, gamma }
}

/// `sum_{mu >= 1, nu} (N(mu)/N(0)) |psi_{mu nu}><psi_{mu nu}|`, as (state, weight) pairs.
pub fn error_operator_terms(chi: &ChiPair) -> Result<Vec<(Ket, f64)>> {
    let d = chi.dim();
    let n0 = chi.overlap_norm(0);
    let mut out = Vec::with_capacity(d * (d - 1));
    for mu in 1..d {
        let r = chi.overlap_norm(mu) / n0;
        for nu in 0..d {
            out.push((generalized_bell_state(mu, nu, chi)?, r));
        }
    }
    Ok(out)
}

/// `I = V_e + E`, diagonal in the computational basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoOperator {
    d: usize,
    diag: Vec<f64>,
}

impl InfoOperator {
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn matrix(&self) -> ComplexMatrix {
        crate::numerics::diagonal_matrix(&self.diag)
    }

    pub fn observable(&self) -> Observable {
        Observable::Diagonal(self.diag.clone())
    }

    pub fn expectation(&self, stats: &CompBasisStats) -> Result<f64> {
        expectation_from_stats(&self.observable(), Stats::Comp(stats))
    }
}

fn diagonal_of(op: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = op.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && op[(i, j)].norm() != 0.0 {
                return Err(Error::StatsMismatch("operator is not diagonal".into()));
            }
        }
    }
    Ok((0..n).map(|i| op[(i, i)].re).collect())
}

pub fn info_operator(v_e: &Verifier, e: &ErrorOperator) -> Result<InfoOperator> {
    let ve = diagonal_of(&v_e.operator)?;
    if ve.len() != e.gamma.len() {
        return Err(Error::DimensionMismatch { expected: e.gamma.len(), found: ve.len() });
    }
    let diag = ve.iter().zip(&e.gamma).map(|(a, b)| a + b).collect();
    Ok(InfoOperator { d: e.d, diag })
}

/// `u_e V_e + (1 - u_e) sum_j u_j V_j`.
pub fn mix_verifiers(weights: &VerifierWeights, v_e: &Verifier, list: &[Verifier]) -> Result<Verifier> {
    if list.len() != weights.u_j.len() {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {} verifiers",
            weights.u_j.len(),
            list.len()
        )));
    }
    let n = v_e.operator.nrows();
    let mut operator = &v_e.operator * Complex64::new(weights.u_e, 0.0);
    for (v, u) in list.iter().zip(&weights.u_j) {
        if v.operator.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.operator.nrows() });
        }
        operator += &v.operator * Complex64::new((1.0 - weights.u_e) * u, 0.0);
    }
    hermitize(&mut operator);
    Ok(Verifier { operator, origin: VerifierOrigin::Mixture, weights: Some(weights.clone()) })
}

/// An operator whose expectation can be read off one statistics table.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// Diagonal in the computational basis, entries indexed `k_A * d + k_B`.
    Diagonal(Vec<f64>),
    /// `coefficient * sum_m p_j(m, -m mod d)`.
    BellVerifier { j: usize, coefficient: f64 },
}

#[derive(Debug, Clone, Copy)]
pub enum Stats<'a> {
    Comp(&'a CompBasisStats),
    Config(&'a ConfigStats),
}

pub fn expectation_from_stats(obs: &Observable, stats: Stats<'_>) -> Result<f64> {
    match (obs, stats) {
        (Observable::Diagonal(diag), Stats::Comp(p)) => {
            if diag.len() != p.as_slice().len() {
                return Err(Error::StatsMismatch(format!(
                    "operator has {} diagonal entries, statistics have {}",
                    diag.len(),
                    p.as_slice().len()
                )));
            }
            Ok(diag.iter().zip(p.as_slice()).map(|(a, b)| a * b).sum())
        }
        (Observable::BellVerifier { j, coefficient }, Stats::Config(p)) => {
            if *j != p.config() {
                return Err(Error::StatsMismatch(format!(
                    "verifier for configuration {j}, statistics for {}",
                    p.config()
                )));
            }
            Ok(coefficient * p.anticorrelated_mass())
        }
        (Observable::Diagonal(_), Stats::Config(_)) => Err(Error::StatsMismatch(
            "diagonal operator needs computational-basis statistics".into(),
        )),
        (Observable::BellVerifier { .. }, Stats::Comp(_)) => Err(Error::StatsMismatch(
            "configuration verifier needs configuration statistics".into(),
        )),
    }
}

/// `<V_j>` read from configuration statistics.
pub fn bell_verifier_expectation(stats: &ConfigStats, chi: &ChiPair) -> Result<f64> {
    if stats.dim() != chi.dim() {
        return Err(Error::DimensionMismatch { expected: chi.dim(), found: stats.dim() });
    }
    let obs = Observable::BellVerifier { j: stats.config(), coefficient: chi.verifier_coefficient() };
    expectation_from_stats(&obs, Stats::Config(stats))
}

#[derive(Debug, Clone)]
pub struct DecompositionTerm {
    pub state: Ket,
    pub lambda: f64,
    pub r: f64,
}

/// `V - |psi><psi| = sum lambda_i |phi_i><phi_i|` and `I - |psi><psi| = sum r_i |phi_i><phi_i|`
/// over a shared family of states orthogonal to the target.
#[derive(Debug, Clone)]
pub struct VerifierDecomposition {
    pub terms: Vec<DecompositionTerm>,
}

impl VerifierDecomposition {
    /// Eigenvectors of `V` restricted to the complement of `psi`, all with `r = 1`;
    /// the matching information operator is the identity.
    pub fn trivial(v: &Verifier, psi: &Ket) -> Result<Self> {
        let q = orthogonal_complement(psi)?;
        let mut restricted = q.adjoint() * &v.operator * &q;
        hermitize(&mut restricted);
        let eig = hermitian_eig(&restricted)?;
        let terms = eig
            .eigenvalues
            .iter()
            .zip(&eig.eigenvectors)
            .map(|(lambda, vec)| DecompositionTerm { state: &q * vec, lambda: *lambda, r: 1.0 })
            .collect();
        Ok(VerifierDecomposition { terms })
    }

    /// Decomposition of `u_e V_e + (1 - u_e) sum_j u_j V_j` over generalized Bell states,
    /// paired with `I = V_e + E`. `configs[i]` carries weight `weights.u_j[i]`.
    pub fn bell_family(weights: &VerifierWeights, configs: &[usize], chi: &ChiPair) -> Result<Self> {
        let d = chi.dim();
        if configs.len() != weights.u_j.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} configurations",
                weights.u_j.len(),
                configs.len()
            )));
        }
        if let Some(&j) = configs.iter().find(|&&j| j >= d) {
            return Err(Error::ConfigOutOfRange { index: j, d });
        }
        let psi = generalized_bell_state(0, 0, chi)?;
        let mut terms = Vec::with_capacity(d * d - 1);

        // Diagonal pairs orthogonal to the target.
        let diag_amplitudes = Ket::from_iterator(d, (0..d).map(|k| psi[composite_index(k, k, d)]));
        let q = orthogonal_complement(&diag_amplitudes)?;
        for col in q.column_iter() {
            let mut state = Ket::zeros(d * d);
            for k in 0..d {
                state[composite_index(k, k, d)] = col[k];
            }
            terms.push(DecompositionTerm { state, lambda: weights.u_e, r: 1.0 });
        }

        let n0 = chi.overlap_norm(0);
        for mu in 1..d {
            let ratio = chi.overlap_norm(mu) / n0;
            for nu in 0..d {
                let w: f64 = configs
                    .iter()
                    .zip(&weights.u_j)
                    .filter(|(j, _)| (*j * mu + nu) % d == 0)
                    .map(|(_, u)| u)
                    .sum();
                terms.push(DecompositionTerm {
                    state: generalized_bell_state(mu, nu, chi)?,
                    lambda: (1.0 - weights.u_e) * ratio * w,
                    r: ratio,
                });
            }
        }
        Ok(VerifierDecomposition { terms })
    }

    pub fn reconstruct_lambda(&self) -> ComplexMatrix {
        self.sum_with(|t| t.lambda)
    }

    pub fn reconstruct_r(&self) -> ComplexMatrix {
        self.sum_with(|t| t.r)
    }

    fn sum_with(&self, f: impl Fn(&DecompositionTerm) -> f64) -> ComplexMatrix {
        let n = self.terms.first().map_or(0, |t| t.state.len());
        let mut out = ComplexMatrix::zeros(n, n);
        for t in &self.terms {
            out += projector(&t.state) * Complex64::new(f(t), 0.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::{comp_basis_stats, config_stats, ChiVector};
    use crate::states::{bell_state, crosstalk_state, white_noise_state, SchmidtVector};
    use crate::test_util::{random_chi_pair, random_schmidt};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    fn random_state(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let n = d * d;
        let mut g = ComplexMatrix::zeros(n, n);
        for z in g.iter_mut() {
            *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        let m = &g * g.adjoint();
        let tr = m.trace();
        let mut m = m / tr;
        hermitize(&mut m);
        DensityMatrix::new(m).unwrap()
    }

    fn terms_matrix(terms: &[(Ket, f64)]) -> ComplexMatrix {
        let n = terms[0].0.len();
        terms.iter().fold(ComplexMatrix::zeros(n, n), |acc, (k, w)| {
            acc + projector(k) * Complex64::new(*w, 0.0)
        })
    }

    #[test]
    fn comp_verifier_examples() {
        let psi = bell_state(&SchmidtVector::uniform(2));
        let v = comp_basis_verifier(&psi).unwrap();
        let expected = crate::numerics::diagonal_matrix(&[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(v.operator, expected);
        for d in 2..=6 {
            let psi = bell_state(&SchmidtVector::proportional(d));
            let v = comp_basis_verifier(&psi).unwrap();
            assert_eq!(v.rank(1e-9).unwrap(), d);
            let eps = 0.35;
            let rho = white_noise_state(&psi, eps).unwrap();
            assert_abs_diff_eq!(v.expectation(&rho), 1.0 - eps + eps / d as f64, epsilon = 1e-13);
        }
    }

    #[test]
    fn lemma1_matches_bell_verifier() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for d in 2..=7 {
            let s = random_schmidt(d, &mut rng);
            let chi = random_chi_pair(&s, &mut rng);
            let psi = bell_state(&s);
            for j in 0..d {
                let cfg = MeasurementConfig::new(j, chi.clone()).unwrap();
                let general = lemma1_verifier(&cfg, &psi).unwrap();
                let bell = bell_verifier(j, &chi).unwrap();
                assert!(max_diff(&general.operator, &bell.operator) <= 1e-10, "d={d} j={j}");
                assert!(general.stabilization_residual(&psi) <= 1e-10);
            }
        }
    }

    #[test]
    fn lemma1_weights_are_sparse_for_mub() {
        let d = 2;
        let chi = ChiPair::new(ChiVector::uniform(d), ChiVector::uniform(d)).unwrap();
        let psi = bell_state(&SchmidtVector::uniform(d));
        let cfg = MeasurementConfig::new(1, chi).unwrap();
        let w = lemma1_weights(&cfg.basis_a(), &cfg.basis_b(), &psi).unwrap();
        assert_eq!(w.iter().filter(|v| v.norm() > 1e-9).count(), d);
    }

    #[test]
    fn singular_transform_is_rejected() {
        let e = Ket::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let psi = bell_state(&SchmidtVector::uniform(2));
        let err = lemma1_weights(&[e.clone(), e.clone()], &[e.clone(), e], &psi);
        assert_eq!(err, Err(Error::SingularTransform));
    }

    #[test]
    fn bell_verifier_rank_and_target_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 2..=9 {
            let s = random_schmidt(d, &mut rng);
            let chi = random_chi_pair(&s, &mut rng);
            let rho = DensityMatrix::pure(&bell_state(&s)).unwrap();
            for j in [0, 1, d - 1] {
                let v = bell_verifier(j, &chi).unwrap();
                assert_eq!(v.rank(1e-9).unwrap(), d, "d={d} j={j}");
                assert_abs_diff_eq!(v.expectation(&rho), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn bell_verifier_decomposes_into_generalized_bell_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for d in 2..=7 {
            let s = random_schmidt(d, &mut rng);
            let chi = random_chi_pair(&s, &mut rng);
            for j in 0..d {
                let v = bell_verifier(j, &chi).unwrap();
                let rebuilt = terms_matrix(&bell_verifier_terms(j, &chi).unwrap());
                assert!(max_diff(&v.operator, &rebuilt) <= 1e-9, "d={d} j={j}");
            }
            let e = error_operator(&chi);
            let rebuilt = terms_matrix(&error_operator_terms(&chi).unwrap());
            assert!(max_diff(&e.matrix(), &rebuilt) <= 1e-9, "d={d}");
        }
    }

    #[test]
    fn uniform_error_operator_has_unit_weights() {
        let d = 4;
        let chi = ChiPair::new(ChiVector::uniform(d), ChiVector::uniform(d)).unwrap();
        let e = error_operator(&chi);
        for ka in 0..d {
            for kb in 0..d {
                let expected = if ka == kb { 0.0 } else { 1.0 };
                assert_abs_diff_eq!(e.weight(ka, kb), expected, epsilon = 1e-14);
            }
        }
        let psi = bell_state(&SchmidtVector::uniform(d));
        assert_abs_diff_eq!(crate::numerics::ket_expectation(&e.matrix(), &psi), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn prime_operator_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for d in [2usize, 3, 5, 7, 11] {
            let s = random_schmidt(d, &mut rng);
            let chi = random_chi_pair(&s, &mut rng);
            let psi = bell_state(&s);
            let mut sum = ComplexMatrix::zeros(d * d, d * d);
            for j in 0..d {
                sum += bell_verifier(j, &chi).unwrap().operator;
            }
            let expected = projector(&psi) * Complex64::new(d as f64, 0.0) + error_operator(&chi).matrix();
            assert!(max_diff(&sum, &expected) <= 1e-9, "d={d}");
        }
    }

    #[test]
    fn info_operator_from_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let d = 3;
        let s = random_schmidt(d, &mut rng);
        let chi = random_chi_pair(&s, &mut rng);
        let psi = bell_state(&s);
        let ve = comp_basis_verifier(&psi).unwrap();
        let info = info_operator(&ve, &error_operator(&chi)).unwrap();
        for _ in 0..5 {
            let rho = random_state(d, &mut rng);
            let stats = comp_basis_stats(&rho);
            let direct = trace_product(rho.matrix(), &info.matrix());
            assert_abs_diff_eq!(info.expectation(&stats).unwrap(), direct, epsilon = 1e-12);
        }
        let pure = comp_basis_stats(&DensityMatrix::pure(&psi).unwrap());
        assert_abs_diff_eq!(info.expectation(&pure).unwrap(), 1.0, epsilon = 1e-12);
        assert!((&info.matrix() * &psi - &psi).norm() <= 1e-10);
    }

    #[test]
    fn info_operator_under_white_noise() {
        let d = 5;
        let chi = ChiPair::new(ChiVector::uniform(d), ChiVector::uniform(d)).unwrap();
        let psi = bell_state(&SchmidtVector::uniform(d));
        let ve = comp_basis_verifier(&psi).unwrap();
        let info = info_operator(&ve, &error_operator(&chi)).unwrap();
        let eps = 0.2;
        let stats = comp_basis_stats(&white_noise_state(&psi, eps).unwrap());
        let v_e = expectation_from_stats(&Observable::Diagonal(diagonal_of(&ve.operator).unwrap()), Stats::Comp(&stats)).unwrap();
        let expected = v_e + eps * (d as f64 - 1.0) / d as f64;
        assert_abs_diff_eq!(info.expectation(&stats).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn config_expectation_matches_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for d in [2usize, 3, 4] {
            let s = random_schmidt(d, &mut rng);
            let chi = random_chi_pair(&s, &mut rng);
            let rho = random_state(d, &mut rng);
            for j in 0..d {
                let cfg = MeasurementConfig::new(j, chi.clone()).unwrap();
                let stats = config_stats(&rho, &cfg).unwrap();
                let from_stats = bell_verifier_expectation(&stats, &chi).unwrap();
                let direct = bell_verifier(j, &chi).unwrap().expectation(&rho);
                assert_abs_diff_eq!(from_stats, direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_observables_are_rejected() {
        let d = 3;
        let chi = ChiPair::new(ChiVector::uniform(d), ChiVector::uniform(d)).unwrap();
        let rho = DensityMatrix::maximally_mixed(d);
        let comp = comp_basis_stats(&rho);
        let cfg = config_stats(&rho, &MeasurementConfig::new(1, chi.clone()).unwrap()).unwrap();
        let bell = Observable::BellVerifier { j: 2, coefficient: 1.0 };
        assert!(matches!(expectation_from_stats(&bell, Stats::Config(&cfg)), Err(Error::StatsMismatch(_))));
        assert!(matches!(expectation_from_stats(&bell, Stats::Comp(&comp)), Err(Error::StatsMismatch(_))));
        let diag = Observable::Diagonal(vec![1.0; 4]);
        assert!(matches!(expectation_from_stats(&diag, Stats::Comp(&comp)), Err(Error::StatsMismatch(_))));
        assert!(matches!(expectation_from_stats(&diag, Stats::Config(&cfg)), Err(Error::StatsMismatch(_))));
    }

    #[test]
    fn mixing_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 5;
        let s = random_schmidt(d, &mut rng);
        let chi = random_chi_pair(&s, &mut rng);
        let psi = bell_state(&s);
        let ve = comp_basis_verifier(&psi).unwrap();
        let list: Vec<Verifier> = (0..3).map(|j| bell_verifier(j, &chi).unwrap()).collect();
        let only_e = mix_verifiers(&VerifierWeights::uniform(1.0, 3).unwrap(), &ve, &list).unwrap();
        assert!(max_diff(&only_e.operator, &ve.operator) < 1e-15);
        let avg = mix_verifiers(&VerifierWeights::uniform(0.0, 3).unwrap(), &ve, &list).unwrap();
        let manual = list.iter().fold(ComplexMatrix::zeros(d * d, d * d), |a, v| a + &v.operator)
            / Complex64::new(3.0, 0.0);
        assert!(max_diff(&avg.operator, &manual) < 1e-14);
        assert!(avg.stabilization_residual(&psi) <= 1e-10);

        assert!(VerifierWeights::new(1.1, vec![1.0]).is_err());
        assert!(VerifierWeights::new(0.5, vec![0.5, 0.6]).is_err());
        assert!(VerifierWeights::new(0.5, vec![1.5, -0.5]).is_err());
        assert!(VerifierWeights::new(0.5, vec![]).is_err());
        assert!(mix_verifiers(&VerifierWeights::uniform(0.0, 2).unwrap(), &ve, &list).is_err());
    }

    #[test]
    fn decompositions_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for d in 2..=6 {
            let s = random_schmidt(d, &mut rng);
            let chi = random_chi_pair(&s, &mut rng);
            let psi = bell_state(&s);
            let p = projector(&psi);
            let configs: Vec<usize> = (0..d).filter(|j| j % 2 == 0).collect();
            let u: Vec<f64> = (0..configs.len()).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = u.iter().sum();
            let weights = VerifierWeights::new(0.3, u.iter().map(|x| x / total).collect()).unwrap();

            let ve = comp_basis_verifier(&psi).unwrap();
            let list: Vec<Verifier> = configs.iter().map(|&j| bell_verifier(j, &chi).unwrap()).collect();
            let mixed = mix_verifiers(&weights, &ve, &list).unwrap();
            let info = info_operator(&ve, &error_operator(&chi)).unwrap();

            let bell = VerifierDecomposition::bell_family(&weights, &configs, &chi).unwrap();
            assert!(max_diff(&bell.reconstruct_lambda(), &(&mixed.operator - &p)) <= 1e-9);
            assert!(max_diff(&bell.reconstruct_r(), &(info.matrix() - &p)) <= 1e-9);
            assert!(bell.terms.iter().all(|t| t.lambda >= 0.0 && t.r > 0.0));

            let trivial = VerifierDecomposition::trivial(&mixed, &psi).unwrap();
            assert!(max_diff(&trivial.reconstruct_lambda(), &(&mixed.operator - &p)) <= 1e-9);
            let id = ComplexMatrix::identity(d * d, d * d);
            assert!(max_diff(&trivial.reconstruct_r(), &(id - &p)) <= 1e-9);
        }
    }

    #[test]
    fn error_expectation_on_crosstalk_is_positive() {
        let s = SchmidtVector::proportional(4);
        let psi = bell_state(&s);
        let chi = ChiPair::new(ChiVector::uniform(4), ChiVector::from_real(s.values()).unwrap()).unwrap();
        let stats = comp_basis_stats(&crosstalk_state(&psi, 0.02, 0.01).unwrap());
        assert!(error_operator(&chi).expectation(&stats).unwrap() > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn every_verifier_stabilizes(seed in any::<u64>(), d in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_schmidt(d, &mut rng);
            let chi = random_chi_pair(&s, &mut rng);
            let psi = bell_state(&s);
            let j = rng.random_range(0..d);
            let v = bell_verifier(j, &chi).unwrap();
            prop_assert!(v.stabilization_residual(&psi) <= 1e-10);
            let eig = hermitian_eig(&v.operator).unwrap();
            prop_assert!(eig.min() >= -1e-10);
            let cfg = MeasurementConfig::new(j, chi.clone()).unwrap();
            let general = lemma1_verifier(&cfg, &psi).unwrap();
            prop_assert!(max_diff(&general.operator, &v.operator) <= 1e-10);
        }

        #[test]
        fn error_and_info_are_diagonal(seed in any::<u64>(), d in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_schmidt(d, &mut rng);
            let chi = random_chi_pair(&s, &mut rng);
            let psi = bell_state(&s);
            let info = info_operator(&comp_basis_verifier(&psi).unwrap(), &error_operator(&chi)).unwrap();
            let m = info.matrix();
            for i in 0..d * d {
                for k in 0..d * d {
                    if i != k {
                        prop_assert_eq!(m[(i, k)], Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }
}
