//! Bell-type target states, generalized Bell states and noisy preparations.
//!
//! Two-qudit kets and operators use the composite index `k_A * d + k_B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::ChiPair;
use crate::numerics::{
    hermitian_eig, ket_expectation, local_dim, max_hermitian_deviation, projector, real_trace,
    root_of_unity, Complex64, ComplexMatrix, Ket, ZERO,
};

const SCHMIDT_NORM_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Strictly positive Schmidt coefficients with unit squared norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtVector {
    s: Vec<f64>,
}

impl SchmidtVector {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if s.len() < 2 {
            return Err(Error::InvalidSchmidt(format!("need d >= 2, got {}", s.len())));
        }
        if let Some(k) = s.iter().position(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidSchmidt(format!("s_{k} = {} is not positive", s[k])));
        }
        let norm_sq: f64 = s.iter().map(|x| x * x).sum();
        if (norm_sq - 1.0).abs() > SCHMIDT_NORM_TOL {
            return Err(Error::InvalidSchmidt(format!("sum of squares is {norm_sq}")));
        }
        Ok(SchmidtVector { s })
    }

    /// Rescales `raw` to unit norm, then validates.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidSchmidt("cannot normalize".into()));
        }
        Self::new(raw.into_iter().map(|x| x / norm).collect())
    }

    /// `s_k ∝ k + 1`.
    pub fn proportional(d: usize) -> Self {
        let norm = ((d * (d + 1) * (2 * d + 1)) as f64 / 6.0).sqrt();
        SchmidtVector { s: (1..=d).map(|k| k as f64 / norm).collect() }
    }

    pub fn uniform(d: usize) -> Self {
        SchmidtVector { s: vec![1.0 / (d as f64).sqrt(); d] }
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.s[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.s
    }
}

/// Position of `|k_A, k_B>` in a two-qudit vector.
pub fn composite_index(ka: usize, kb: usize, d: usize) -> usize {
    ka * d + kb
}

/// `|psi> = sum_k s_k |k, k>`.
pub fn bell_state(s: &SchmidtVector) -> Ket {
    let d = s.dim();
    let mut psi = Ket::zeros(d * d);
    for k in 0..d {
        psi[composite_index(k, k, d)] = Complex64::new(s.get(k), 0.0);
    }
    psi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseParams {
    White { epsilon: f64 },
    Crosstalk { eps_a: f64, eps_b: f64 },
}

impl NoiseParams {
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            NoiseParams::White { epsilon } => {
                if !(0.0..=1.0).contains(&epsilon) {
                    return Err(Error::InvalidNoise(format!("epsilon = {epsilon} is outside [0, 1]")));
                }
            }
            NoiseParams::Crosstalk { eps_a, eps_b } => {
                if !(eps_a >= 0.0 && eps_b >= 0.0) {
                    return Err(Error::InvalidNoise(format!(
                        "crosstalk rates must be non-negative, got ({eps_a}, {eps_b})"
                    )));
                }
                let lead = 1.0 - 2.0 * d as f64 * (eps_a + eps_b);
                if lead < 0.0 {
                    return Err(Error::InvalidNoise(format!(
                        "leading weight 1 - 2d(eps_a + eps_b) = {lead} is negative"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds the noisy state with the default (renormalized) crosstalk convention.
    pub fn apply(&self, psi: &Ket) -> Result<DensityMatrix> {
        match *self {
            NoiseParams::White { epsilon } => white_noise_state(psi, epsilon),
            NoiseParams::Crosstalk { eps_a, eps_b } => crosstalk_state(psi, eps_a, eps_b),
        }
    }
}

/// Labels `(mu, nu)` of a generalized Bell state together with `N(mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedBellIndex {
    pub mu: usize,
    pub nu: usize,
    pub norm: f64,
}

impl GeneralizedBellIndex {
    pub fn new(mu: usize, nu: usize, chi: &ChiPair) -> Self {
        let d = chi.dim();
        GeneralizedBellIndex { mu: mu % d, nu: nu % d, norm: chi.overlap_norm(mu % d) }
    }
}

/// `|psi_{mu nu}> = N(mu)^{-1/2} sum_k w^{-nu k} chi_A[k+mu] chi_B[k] |k+mu, k>`.
pub fn generalized_bell_state(mu: usize, nu: usize, chi: &ChiPair) -> Result<Ket> {
    let d = chi.dim();
    let idx = GeneralizedBellIndex::new(mu, nu, chi);
    if idx.norm <= 0.0 {
        return Err(Error::InvalidChi(format!("N({mu}) vanishes")));
    }
    let scale = 1.0 / idx.norm.sqrt();
    let mut out = Ket::zeros(d * d);
    for k in 0..d {
        let ka = (k + idx.mu) % d;
        out[composite_index(ka, k, d)] =
            root_of_unity(d, -((idx.nu * k) as i64)) * chi.a.get(ka) * chi.b.get(k) * scale;
    }
    Ok(out)
}

/// A validated two-qudit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    d: usize,
}

impl DensityMatrix {
    /// Checks Hermiticity (1e-12), unit trace (1e-12) and positivity (-1e-10).
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let d = local_dim(matrix.nrows())?;
        let dev = max_hermitian_deviation(&matrix);
        if dev > 1e-12 {
            return Err(Error::NotHermitian(dev));
        }
        let tr = real_trace(&matrix);
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace is {tr}")));
        }
        let lowest = hermitian_eig(&matrix)?.min();
        if lowest < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!("min eigenvalue {lowest:.3e}")));
        }
        Ok(DensityMatrix { matrix, d })
    }

    pub fn pure(psi: &Ket) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDensityMatrix(format!("ket norm is {n}")));
        }
        Self::new(projector(psi))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        let n = d * d;
        let matrix = ComplexMatrix::identity(n, n) * Complex64::new(1.0 / n as f64, 0.0);
        DensityMatrix { matrix, d }
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &DensityMatrix, lambda: f64) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: other.d });
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("mixing weight {lambda} outside [0, 1]")));
        }
        let matrix = &self.matrix * Complex64::new(lambda, 0.0)
            + &other.matrix * Complex64::new(1.0 - lambda, 0.0);
        Ok(DensityMatrix { matrix, d: self.d })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }
}

fn check_target(psi: &Ket) -> Result<usize> {
    let d = local_dim(psi.len())?;
    if (psi.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("target norm is {}", psi.norm())));
    }
    Ok(d)
}

/// `(1 - eps) |psi><psi| + eps I / d^2`.
pub fn white_noise_state(psi: &Ket, epsilon: f64) -> Result<DensityMatrix> {
    let d = check_target(psi)?;
    NoiseParams::White { epsilon }.validate(d)?;
    DensityMatrix::pure(psi)?.mix(&DensityMatrix::maximally_mixed(d), 1.0 - epsilon)
}

/// Reduced ket `<e_k^{side}|psi>` living on the other subsystem.
fn partial_overlap(psi: &Ket, d: usize, k: usize, side_a: bool) -> Vec<Complex64> {
    (0..d)
        .map(|other| {
            if side_a {
                psi[composite_index(k, other, d)]
            } else {
                psi[composite_index(other, k, d)]
            }
        })
        .collect()
}

/// Sum over `k` of `|e_{k+shift}><e_k|psi><psi|e_k><e_{k+shift}|` on one side.
fn shifted_terms(psi: &Ket, d: usize, side_a: bool, shift: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    for k in 0..d {
        let reduced = partial_overlap(psi, d, k, side_a);
        let target = (k + shift) % d;
        let index = |other: usize| {
            if side_a {
                composite_index(target, other, d)
            } else {
                composite_index(other, target, d)
            }
        };
        for (o1, c1) in reduced.iter().enumerate() {
            if *c1 == ZERO {
                continue;
            }
            for (o2, c2) in reduced.iter().enumerate() {
                out[(index(o1), index(o2))] += c1 * c2.conj();
            }
        }
    }
    out
}

/// The nearest-neighbour crosstalk operator exactly as written, with leading
/// weight `1 - 2d(eps_a + eps_b)`. Its trace is `1 - 2(d-1)(eps_a + eps_b)`.
pub fn crosstalk_operator(psi: &Ket, eps_a: f64, eps_b: f64) -> Result<ComplexMatrix> {
    let d = check_target(psi)?;
    crosstalk_with_lead(psi, d, eps_a, eps_b, 1.0 - 2.0 * d as f64 * (eps_a + eps_b))
}

fn crosstalk_with_lead(psi: &Ket, d: usize, eps_a: f64, eps_b: f64, lead: f64) -> Result<ComplexMatrix> {
    NoiseParams::Crosstalk { eps_a, eps_b }.validate(d)?;
    let mut out = projector(psi) * Complex64::new(lead, 0.0);
    for (side_a, eps) in [(true, eps_a), (false, eps_b)] {
        if eps == 0.0 {
            continue;
        }
        let terms = shifted_terms(psi, d, side_a, 1) + shifted_terms(psi, d, side_a, d - 1);
        out += terms * Complex64::new(eps, 0.0);
    }
    Ok(out)
}

/// How the crosstalk operator is turned into a unit-trace state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrosstalkConvention {
    /// Divide the literal operator by its trace.
    #[default]
    Renormalize,
    /// Keep the crosstalk weights and raise the leading weight to
    /// `1 - 2(eps_a + eps_b)`, so each side loses exactly what it shifts out.
    ConserveLeading,
}

/// Crosstalk-noise state renormalized to unit trace.
pub fn crosstalk_state(psi: &Ket, eps_a: f64, eps_b: f64) -> Result<DensityMatrix> {
    crosstalk_state_with(psi, eps_a, eps_b, CrosstalkConvention::Renormalize)
}

pub fn crosstalk_state_with(
    psi: &Ket,
    eps_a: f64,
    eps_b: f64,
    convention: CrosstalkConvention,
) -> Result<DensityMatrix> {
    let d = check_target(psi)?;
    let m = match convention {
        CrosstalkConvention::Renormalize => {
            let raw = crosstalk_operator(psi, eps_a, eps_b)?;
            let tr = real_trace(&raw);
            raw / Complex64::new(tr, 0.0)
        }
        CrosstalkConvention::ConserveLeading => {
            crosstalk_with_lead(psi, d, eps_a, eps_b, 1.0 - 2.0 * (eps_a + eps_b))?
        }
    };
    DensityMatrix::new(m)
}

/// `<psi| rho |psi>`, clamped to `[0, 1]`.
pub fn exact_fidelity(rho: &DensityMatrix, psi: &Ket) -> f64 {
    ket_expectation(rho.matrix(), psi).clamp(0.0, 1.0)
}
