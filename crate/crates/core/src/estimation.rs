//! Fidelity bounds from verifier expectations, and adaptation of the
//! measurement coefficients to computational-basis statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::{
    comp_basis_stats, config_stats, ChiPair, ChiVector, CompBasisStats, ConfigStats,
    MeasurementConfig,
};
use crate::numerics::{hermitian_eig, hermitize, orthogonal_complement, Ket};
use crate::states::{bell_state, exact_fidelity, DensityMatrix, SchmidtVector};
use crate::verifiers::{
    bell_verifier, bell_verifier_expectation, comp_basis_verifier, error_operator, info_operator,
    mix_verifiers, Verifier, VerifierDecomposition, VerifierWeights,
};

/// Denominators `1 - alpha` closer to zero than this are treated as degenerate.
const DEGENERACY_TOL: f64 = 1e-12;
/// Subset values this close count as tied; the lexicographically smaller subset wins.
const TIE_TOL: f64 = 1e-12;

pub fn is_prime(n: usize) -> bool {
    n >= 2 && smallest_prime_divisor(n) == n
}

/// Smallest prime factor of `d >= 2`.
pub fn smallest_prime_divisor(d: usize) -> usize {
    assert!(d >= 2, "smallest_prime_divisor needs d >= 2");
    let mut p = 2;
    while p * p <= d {
        if d.is_multiple_of(p) {
            return p;
        }
        p += 1;
    }
    d
}

fn validate_configs(configs: &[usize], d: usize) -> Result<Vec<usize>> {
    if configs.is_empty() {
        return Err(Error::EmptyConfigSet);
    }
    if let Some(&j) = configs.iter().find(|&&j| j >= d) {
        return Err(Error::ConfigOutOfRange { index: j, d });
    }
    let mut sorted = configs.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(sorted)
}

/// Configurations grouped by residue modulo the smallest prime divisor of `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubclassPartition {
    pub d: usize,
    pub p1: usize,
    /// `classes[i]` holds the members of the set congruent to `i` mod `p1`, ascending.
    pub classes: Vec<Vec<usize>>,
}

impl SubclassPartition {
    pub fn new(configs: &[usize], d: usize) -> Result<Self> {
        let configs = validate_configs(configs, d)?;
        let p1 = smallest_prime_divisor(d);
        let mut classes = vec![Vec::new(); p1];
        for j in configs {
            classes[j % p1].push(j);
        }
        Ok(SubclassPartition { d, p1, classes })
    }

    pub fn nonempty_count(&self) -> usize {
        self.classes.iter().filter(|c| !c.is_empty()).count()
    }

    /// Every subset taking exactly one member from each nonempty class.
    pub fn selections(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new()];
        for class in self.classes.iter().filter(|c| !c.is_empty()) {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    class.iter().map(move |&j| {
                        let mut next = prefix.clone();
                        next.push(j);
                        next
                    })
                })
                .collect();
        }
        for s in &mut out {
            s.sort_unstable();
        }
        out
    }
}

/// Largest fraction of `subset` whose verifiers share a single off-target
/// generalized Bell state: `max_{mu >= 1} max_c #{j : j mu = c mod d} / |subset|`.
///
/// Equals `1 / |subset|` whenever no two members differ by a zero divisor
/// of `Z_d`, which covers prime powers with one member per subclass.
pub fn collision_weight(subset: &[usize], d: usize) -> f64 {
    let n = subset.len();
    if n == 0 {
        return 0.0;
    }
    let mut worst = 1;
    for mu in 1..d {
        let mut counts = vec![0usize; d];
        for &j in subset {
            counts[(j * mu) % d] += 1;
        }
        worst = worst.max(*counts.iter().max().unwrap_or(&0));
    }
    worst as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Theorem1,
    Nonadaptive,
    Lemma2Trivial,
    Lemma2BellFamily,
}

/// Lower and upper fidelity bounds, clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityBounds {
    pub method: BoundMethod,
    pub lower: f64,
    pub upper: f64,
    /// Present when the bounds close, e.g. prime `d` with every configuration.
    pub exact: Option<f64>,
    pub raw_lower: f64,
    pub raw_upper: f64,
    pub clamped: bool,
}

impl FidelityBounds {
    pub fn new(method: BoundMethod, raw_lower: f64, raw_upper: f64, exact: Option<f64>) -> Self {
        let lower = raw_lower.clamp(0.0, 1.0);
        let upper = raw_upper.clamp(0.0, 1.0);
        let clamped = lower != raw_lower || upper != raw_upper;
        FidelityBounds { method, lower, upper, exact, raw_lower, raw_upper, clamped }
    }

    /// `lower - tol <= f <= upper + tol`.
    pub fn sandwiches(&self, f: f64, tol: f64) -> bool {
        self.lower - tol <= f && f <= self.upper + tol
    }
}

/// Extremal eigenpairs of `V - |psi><psi|` on the complement of `psi`.
#[derive(Debug, Clone)]
pub struct SpectralBounds {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub phi_max: Ket,
    pub phi_min: Ket,
}

pub fn spectral_bounds(v: &Verifier, psi: &Ket) -> Result<SpectralBounds> {
    let q = orthogonal_complement(psi)?;
    let mut restricted = q.adjoint() * &v.operator * &q;
    hermitize(&mut restricted);
    let eig = hermitian_eig(&restricted)?;
    let last = eig.eigenvalues.len() - 1;
    Ok(SpectralBounds {
        lambda_max: eig.eigenvalues[last],
        lambda_min: eig.eigenvalues[0],
        phi_max: &q * &eig.eigenvectors[last],
        phi_min: &q * &eig.eigenvectors[0],
    })
}

/// `((<V> - l_max)/(1 - l_max), (<V> - l_min)/(1 - l_min))`.
pub fn nonadaptive_bounds(spectrum: &SpectralBounds, expectation: f64) -> Result<FidelityBounds> {
    if spectrum.lambda_max >= 1.0 - DEGENERACY_TOL {
        return Err(Error::DegenerateBound(format!(
            "largest off-target eigenvalue {} leaves the target unseparated",
            spectrum.lambda_max
        )));
    }
    let lower = (expectation - spectrum.lambda_max) / (1.0 - spectrum.lambda_max);
    let upper = (expectation - spectrum.lambda_min) / (1.0 - spectrum.lambda_min);
    Ok(FidelityBounds::new(BoundMethod::Nonadaptive, lower, upper, None))
}

/// Extreme ratios `lambda_i / r_i` of a verifier decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCoefficients {
    pub alpha: f64,
    pub beta: f64,
}

impl BoundCoefficients {
    pub fn from_decomposition(dec: &VerifierDecomposition) -> Result<Self> {
        if dec.terms.is_empty() {
            return Err(Error::InvalidParameter("empty decomposition".into()));
        }
        let mut alpha = f64::NEG_INFINITY;
        let mut beta = f64::INFINITY;
        for t in &dec.terms {
            if t.r.is_nan() || t.r <= 0.0 {
                return Err(Error::InvalidParameter(format!("non-positive weight r = {}", t.r)));
            }
            let ratio = t.lambda / t.r;
            alpha = alpha.max(ratio);
            beta = beta.min(ratio);
        }
        Ok(BoundCoefficients { alpha, beta })
    }
}

/// `((<V> - alpha <I>)/(1 - alpha), (<V> - beta <I>)/(1 - beta))`.
pub fn lemma2_bounds(
    v_expectation: f64,
    info_expectation: f64,
    c: BoundCoefficients,
    method: BoundMethod,
) -> Result<FidelityBounds> {
    if c.alpha >= 1.0 - DEGENERACY_TOL || c.beta >= 1.0 - DEGENERACY_TOL {
        return Err(Error::DegenerateBound(format!(
            "alpha = {}, beta = {}; both must stay below 1",
            c.alpha, c.beta
        )));
    }
    let lower = (v_expectation - c.alpha * info_expectation) / (1.0 - c.alpha);
    let upper = (v_expectation - c.beta * info_expectation) / (1.0 - c.beta);
    Ok(FidelityBounds::new(method, lower, upper, None))
}

/// Verifier, error and information expectations entering every bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    pub v_e: f64,
    /// `<V_j>` keyed by configuration.
    pub v_j: BTreeMap<usize, f64>,
    pub error: f64,
    pub info: f64,
}

impl Expectations {
    pub fn from_stats(
        psi: &Ket,
        chi: &ChiPair,
        comp: &CompBasisStats,
        configs: &[ConfigStats],
    ) -> Result<Self> {
        let ve = comp_basis_verifier(psi)?;
        let e = error_operator(chi);
        let info = info_operator(&ve, &e)?;
        let diag: Vec<f64> = (0..psi.len()).map(|i| ve.operator[(i, i)].re).collect();
        let v_e = diag.iter().zip(comp.as_slice()).map(|(a, b)| a * b).sum();
        let mut v_j = BTreeMap::new();
        for stats in configs {
            v_j.insert(stats.config(), bell_verifier_expectation(stats, chi)?);
        }
        Ok(Expectations { v_e, v_j, error: e.expectation(comp)?, info: info.expectation(comp)? })
    }

    pub fn configs(&self) -> Vec<usize> {
        self.v_j.keys().copied().collect()
    }

    fn mean_over(&self, subset: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for j in subset {
            total += self
                .v_j
                .get(j)
                .ok_or_else(|| Error::StatsMismatch(format!("no expectation for configuration {j}")))?;
        }
        Ok(total / subset.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Bounds {
    pub bounds: FidelityBounds,
    /// The maximizing subset with one configuration per nonempty subclass.
    pub subset: Vec<usize>,
    pub alpha_tilde: f64,
    pub nonempty_classes: usize,
}

/// Lower bound: best subset average `<V_S> - alpha(S) <E>` over one-per-subclass
/// selections `S`. Upper bound: `min(<V_e>, min_j <V_j>)`. For prime `d` with all
/// `d` configurations both collapse to `(1/d) sum_j <V_j> - <E>/d`.
pub fn theorem1_bounds(exp: &Expectations, d: usize) -> Result<Theorem1Bounds> {
    let configs = exp.configs();
    let partition = SubclassPartition::new(&configs, d)?;
    let mut best: Option<(f64, Vec<usize>, f64)> = None;
    for subset in partition.selections() {
        let alpha = collision_weight(&subset, d);
        let value = exp.mean_over(&subset)? - alpha * exp.error;
        let better = match &best {
            None => true,
            Some((v, s, _)) => value > *v + TIE_TOL || (value >= *v - TIE_TOL && subset < *s),
        };
        if better {
            best = Some((value, subset, alpha));
        }
    }
    let (lower, subset, alpha_tilde) = best.ok_or(Error::EmptyConfigSet)?;

    let full = is_prime(d) && configs.len() == d;
    let bounds = if full {
        let exact = exp.mean_over(&configs)? - exp.error / d as f64;
        FidelityBounds::new(BoundMethod::Theorem1, exact, exact, Some(exact.clamp(0.0, 1.0)))
    } else {
        let upper = exp.v_j.values().fold(exp.v_e, |m, v| m.min(*v));
        FidelityBounds::new(BoundMethod::Theorem1, lower, upper, None)
    };
    Ok(Theorem1Bounds { bounds, subset, alpha_tilde, nonempty_classes: partition.nonempty_count() })
}

/// Mixing weights used for the spectral estimators: `u_e = 1/(n+1)`, uniform `u_j`.
pub fn nonadaptive_weights(n: usize) -> Result<VerifierWeights> {
    VerifierWeights::uniform(1.0 / (n as f64 + 1.0), n)
}

/// `u_e V_e + (1 - u_e) sum_j u_j V_j` over `configs`.
pub fn mixed_verifier(
    psi: &Ket,
    chi: &ChiPair,
    configs: &[usize],
    weights: &VerifierWeights,
) -> Result<Verifier> {
    let ve = comp_basis_verifier(psi)?;
    let list = configs.iter().map(|&j| bell_verifier(j, chi)).collect::<Result<Vec<_>>>()?;
    mix_verifiers(weights, &ve, &list)
}

fn mixed_expectation(exp: &Expectations, configs: &[usize], weights: &VerifierWeights) -> Result<f64> {
    let mut total = weights.u_e * exp.v_e;
    for (j, u) in configs.iter().zip(&weights.u_j) {
        let v = exp
            .v_j
            .get(j)
            .ok_or_else(|| Error::StatsMismatch(format!("no expectation for configuration {j}")))?;
        total += (1.0 - weights.u_e) * u * v;
    }
    Ok(total)
}

/// Spectral bounds for the mixed verifier over every measured configuration.
pub fn nonadaptive_estimate(
    psi: &Ket,
    chi: &ChiPair,
    exp: &Expectations,
    weights: &VerifierWeights,
) -> Result<FidelityBounds> {
    let configs = exp.configs();
    let v = mixed_verifier(psi, chi, &configs, weights)?;
    nonadaptive_bounds(&spectral_bounds(&v, psi)?, mixed_expectation(exp, &configs, weights)?)
}

/// Decomposition bounds from the trivial decomposition, whose information operator is the identity.
pub fn lemma2_trivial_estimate(
    psi: &Ket,
    chi: &ChiPair,
    exp: &Expectations,
    weights: &VerifierWeights,
) -> Result<FidelityBounds> {
    let configs = exp.configs();
    let v = mixed_verifier(psi, chi, &configs, weights)?;
    let dec = VerifierDecomposition::trivial(&v, psi)?;
    let c = BoundCoefficients::from_decomposition(&dec)?;
    lemma2_bounds(mixed_expectation(exp, &configs, weights)?, 1.0, c, BoundMethod::Lemma2Trivial)
}

/// Decomposition bounds from the generalized Bell decomposition, paired with `I = V_e + E`.
pub fn lemma2_bell_estimate(
    chi: &ChiPair,
    exp: &Expectations,
    weights: &VerifierWeights,
) -> Result<FidelityBounds> {
    let configs = exp.configs();
    let dec = VerifierDecomposition::bell_family(weights, &configs, chi)?;
    let c = BoundCoefficients::from_decomposition(&dec)?;
    lemma2_bounds(mixed_expectation(exp, &configs, weights)?, exp.info, c, BoundMethod::Lemma2BellFamily)
}

/// How the measurement coefficients are chosen from the computational-basis data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChiStrategy {
    /// Projective on A, `chi_B = s` on B.
    #[serde(rename = "uniform")]
    Uniform,
    /// `chi_A = chi_B ∝ sqrt(s)`.
    #[serde(rename = "symmetric")]
    Symmetric,
    /// Nearest-neighbour closed form from the ratios `p(k, k+1) / p(k+1, k)`.
    #[serde(rename = "crosstalk_opt", alias = "crosstalk")]
    Crosstalk,
    /// `chi_A = s`, `chi_B` uniform.
    #[serde(rename = "one_side_A", alias = "one_side_a")]
    OneSideA,
    /// `chi_A` uniform, `chi_B = s`.
    #[serde(rename = "one_side_B", alias = "one_side_b")]
    OneSideB,
    /// Numerical minimum of `<E>` over all compatible pairs.
    #[serde(rename = "general")]
    General,
}

impl ChiStrategy {
    pub const ALL: [ChiStrategy; 6] = [
        ChiStrategy::Uniform,
        ChiStrategy::Symmetric,
        ChiStrategy::Crosstalk,
        ChiStrategy::OneSideA,
        ChiStrategy::OneSideB,
        ChiStrategy::General,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChiStrategy::Uniform => "uniform",
            ChiStrategy::Symmetric => "symmetric",
            ChiStrategy::Crosstalk => "crosstalk_opt",
            ChiStrategy::OneSideA => "one_side_A",
            ChiStrategy::OneSideB => "one_side_B",
            ChiStrategy::General => "general",
        }
    }
}

impl std::fmt::Display for ChiStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ChiStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ChiStrategy::Uniform),
            "symmetric" => Ok(ChiStrategy::Symmetric),
            "crosstalk_opt" | "crosstalk" => Ok(ChiStrategy::Crosstalk),
            "one_side_A" | "one_side_a" => Ok(ChiStrategy::OneSideA),
            "one_side_B" | "one_side_b" => Ok(ChiStrategy::OneSideB),
            "general" => Ok(ChiStrategy::General),
            other => Err(Error::InvalidParameter(format!("unknown chi strategy '{other}'"))),
        }
    }
}

pub fn error_expectation(chi: &ChiPair, stats: &CompBasisStats) -> Result<f64> {
    if chi.dim() != stats.dim() {
        return Err(Error::DimensionMismatch { expected: stats.dim(), found: chi.dim() });
    }
    error_operator(chi).expectation(stats)
}

/// Pair with `|chi_A[k]|^2 ∝ a_k` and `chi_B[k] ∝ s_k / sqrt(a_k)`.
fn pair_from_weights(a: &[f64], s: &SchmidtVector) -> Result<ChiPair> {
    let ra: Vec<f64> = a.iter().map(|x| x.sqrt()).collect();
    let rb: Vec<f64> = s.values().iter().zip(&ra).map(|(sk, r)| sk / r).collect();
    ChiPair::new(ChiVector::from_real(&ra)?, ChiVector::from_real(&rb)?)
}

fn require_positive_diagonal(stats: &CompBasisStats) -> Result<()> {
    if let Some(k) = (0..stats.dim()).find(|&k| stats.get(k, k) <= 0.0) {
        return Err(Error::ZeroProbability(format!("p_e({k},{k}) = 0")));
    }
    Ok(())
}

/// `<E>` as a function of `x_k = ln |chi_A[k]|^2`, with `chi_B` fixed by the target.
fn log_objective(x: &[f64], s2: &[f64], stats: &CompBasisStats) -> f64 {
    let d = x.len();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                total += (x[i] - x[j]).exp() * s2[j] * stats.get(i, j);
            }
        }
    }
    d as f64 * total
}

const MAX_SWEEPS: usize = 500;
const LOG_CLAMP: f64 = 40.0;

/// Exact coordinate minimization: each `x_i` enters as `A e^{x_i} + B e^{-x_i}`.
fn coordinate_descent(mut x: Vec<f64>, s2: &[f64], stats: &CompBasisStats) -> (Vec<f64>, f64) {
    let d = x.len();
    let mut value = log_objective(&x, s2, stats);
    for _ in 0..MAX_SWEEPS {
        for i in 0..d {
            let mut a = 0.0;
            let mut b = 0.0;
            for j in 0..d {
                if j != i {
                    a += (-x[j]).exp() * s2[j] * stats.get(i, j);
                    b += x[j].exp() * stats.get(j, i);
                }
            }
            b *= s2[i];
            if a > 0.0 && b > 0.0 {
                x[i] = (0.5 * (b / a).ln()).clamp(-LOG_CLAMP, LOG_CLAMP);
            }
        }
        let next = log_objective(&x, s2, stats);
        let improvement = value - next;
        value = next;
        if improvement < 1e-12 {
            break;
        }
    }
    (x, value)
}

fn general_optimum(stats: &CompBasisStats, s: &SchmidtVector) -> Result<ChiPair> {
    let s2: Vec<f64> = s.values().iter().map(|x| x * x).collect();
    let from_symmetric = coordinate_descent(s.values().iter().map(|v| v.ln()).collect(), &s2, stats);
    let from_uniform = coordinate_descent(vec![0.0; s.dim()], &s2, stats);
    let (x, _) = if from_uniform.1 < from_symmetric.1 { from_uniform } else { from_symmetric };
    let shift = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let a: Vec<f64> = x.iter().map(|v| (v - shift).exp()).collect();
    pair_from_weights(&a, s)
}

fn crosstalk_optimum(stats: &CompBasisStats, s: &SchmidtVector) -> Result<ChiPair> {
    require_positive_diagonal(stats)?;
    let d = s.dim();
    let mut log_ratio = 0.0;
    let mut a = Vec::with_capacity(d);
    let mut b = Vec::with_capacity(d);
    for k in 0..d {
        if k > 0 {
            let up = stats.get(k - 1, k);
            let down = stats.get(k, k - 1);
            if up <= 0.0 || down <= 0.0 {
                return Err(Error::ZeroProbability(format!(
                    "neighbour probabilities p_e({},{k}) = {up}, p_e({k},{}) = {down}",
                    k - 1,
                    k - 1
                )));
            }
            log_ratio += (up / down).ln();
        }
        let ls2 = 2.0 * s.get(k).ln();
        a.push(((ls2 + log_ratio) / 4.0).exp());
        b.push(((ls2 - log_ratio) / 4.0).exp());
    }
    ChiPair::new(ChiVector::from_real(&a)?, ChiVector::from_real(&b)?)
}

/// Measurement coefficients compatible with `s`, chosen according to `strategy`.
pub fn optimize_chi(stats: &CompBasisStats, s: &SchmidtVector, strategy: ChiStrategy) -> Result<ChiPair> {
    let d = s.dim();
    if stats.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: stats.dim() });
    }
    let uniform = || ChiVector::uniform(d);
    let target = || ChiVector::from_real(s.values());
    let pair = match strategy {
        ChiStrategy::Uniform | ChiStrategy::OneSideB => ChiPair::new(uniform(), target()?)?,
        ChiStrategy::OneSideA => ChiPair::new(target()?, uniform())?,
        ChiStrategy::Symmetric => {
            let root: Vec<f64> = s.values().iter().map(|x| x.sqrt()).collect();
            ChiPair::new(ChiVector::from_real(&root)?, ChiVector::from_real(&root)?)?
        }
        ChiStrategy::Crosstalk => crosstalk_optimum(stats, s)?,
        ChiStrategy::General => general_optimum(stats, s)?,
    };
    debug_assert!(pair.is_compatible_with(s, 1e-9));
    Ok(pair)
}

/// `s_k = sqrt(p_e(k,k) / sum_k' p_e(k',k'))`.
pub fn schmidt_from_stats(stats: &CompBasisStats) -> Result<SchmidtVector> {
    require_positive_diagonal(stats)?;
    SchmidtVector::normalized(stats.diagonal().iter().map(|p| p.sqrt()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCondition {
    pub k: usize,
    pub kp: usize,
    /// `|chi_A[k']|^2/|chi_A[k]|^2 - sqrt(p(k,k')/p(k',k)) s_k'/s_k`.
    pub residual_a: f64,
    /// `|chi_B[k']|^2/|chi_B[k]|^2 - sqrt(p(k',k)/p(k,k')) s_k'/s_k`.
    pub residual_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiConditionReport {
    pub pairs: Vec<PairCondition>,
    /// Pairs `(k, k')` where one of the two probabilities vanishes.
    pub skipped: Vec<(usize, usize)>,
    /// Whether some coefficient pair could meet every ratio condition at once.
    pub feasible: bool,
    pub max_residual: f64,
}

/// Residuals of the pairwise ratio conditions for a minimal `<E>`.
pub fn chi_condition_check(
    chi: &ChiPair,
    stats: &CompBasisStats,
    s: &SchmidtVector,
) -> Result<ChiConditionReport> {
    let d = s.dim();
    if chi.dim() != d || stats.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: chi.dim().min(stats.dim()) });
    }
    let (wa, wb) = (chi.a.weights(), chi.b.weights());
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    // Conditions on chi_A fix ln|chi_A[k']|^2 - ln|chi_A[k]|^2; they are jointly
    // satisfiable iff these differences come from a potential.
    let mut potential: Vec<Option<f64>> = vec![None; d];
    let mut edges = Vec::new();
    for k in 0..d {
        for kp in (k + 1)..d {
            let (p_fw, p_bw) = (stats.get(k, kp), stats.get(kp, k));
            if p_fw <= 0.0 || p_bw <= 0.0 {
                skipped.push((k, kp));
                continue;
            }
            let ratio_s = s.get(kp) / s.get(k);
            let target_a = (p_fw / p_bw).sqrt() * ratio_s;
            let target_b = (p_bw / p_fw).sqrt() * ratio_s;
            pairs.push(PairCondition {
                k,
                kp,
                residual_a: wa[kp] / wa[k] - target_a,
                residual_b: wb[kp] / wb[k] - target_b,
            });
            edges.push((k, kp, target_a.ln()));
        }
    }
    let mut feasible = true;
    for start in 0..d {
        if potential[start].is_some() {
            continue;
        }
        potential[start] = Some(0.0);
        let mut changed = true;
        while changed {
            changed = false;
            for &(k, kp, diff) in &edges {
                match (potential[k], potential[kp]) {
                    (Some(a), None) => {
                        potential[kp] = Some(a + diff);
                        changed = true;
                    }
                    (None, Some(b)) => {
                        potential[k] = Some(b - diff);
                        changed = true;
                    }
                    _ => {}
                }
            }
        }
    }
    for &(k, kp, diff) in &edges {
        if let (Some(a), Some(b)) = (potential[k], potential[kp]) {
            if ((b - a) - diff).abs() > 1e-9 {
                feasible = false;
            }
        }
    }
    let max_residual = pairs
        .iter()
        .map(|p| p.residual_a.abs().max(p.residual_b.abs()))
        .fold(0.0, f64::max);
    Ok(ChiConditionReport { pairs, skipped, feasible, max_residual })
}

/// SplitMix64 step, used to derive independent per-table seeds.
pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchmidtSource {
    Fixed(SchmidtVector),
    /// Read the target off the computational-basis diagonal.
    Adapt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampling {
    pub shots: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub configs: Vec<usize>,
    pub strategy: ChiStrategy,
    pub sampling: Option<Sampling>,
}

/// Everything produced by one run of the adaptive procedure.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub schmidt: SchmidtVector,
    pub chi: ChiPair,
    pub comp_stats: CompBasisStats,
    pub config_stats: Vec<ConfigStats>,
    pub expectations: Expectations,
    pub theorem1: Theorem1Bounds,
    /// `<psi|rho|psi>` for the target actually used.
    pub exact_fidelity: f64,
}

impl BoundsReport {
    pub fn target(&self) -> Ket {
        bell_state(&self.schmidt)
    }
}

/// Computational-basis statistics, coefficient choice, configuration statistics
/// and subset bounds, in that order. With `sampling`, each table is replaced
/// by finite-shot frequencies before it is used.
pub fn adaptive_estimate(
    rho: &DensityMatrix,
    source: &SchmidtSource,
    options: &EstimateOptions,
) -> Result<BoundsReport> {
    let d = rho.local_dim();
    let configs = validate_configs(&options.configs, d)?;

    let mut comp = comp_basis_stats(rho);
    if let Some(sm) = options.sampling {
        comp = comp.sample(sm.shots, splitmix64(sm.seed))?;
    }
    let schmidt = match source {
        SchmidtSource::Fixed(s) => {
            if s.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
            }
            s.clone()
        }
        SchmidtSource::Adapt => schmidt_from_stats(&comp)?,
    };
    let chi = optimize_chi(&comp, &schmidt, options.strategy)?;

    let mut tables = Vec::with_capacity(configs.len());
    for &j in &configs {
        let mut stats = config_stats(rho, &MeasurementConfig::new(j, chi.clone())?)?;
        if let Some(sm) = options.sampling {
            stats = stats.sample(sm.shots, splitmix64(sm.seed ^ splitmix64(j as u64 + 1)))?;
        }
        tables.push(stats);
    }

    let psi = bell_state(&schmidt);
    let expectations = Expectations::from_stats(&psi, &chi, &comp, &tables)?;
    let theorem1 = theorem1_bounds(&expectations, d)?;
    Ok(BoundsReport {
        exact_fidelity: exact_fidelity(rho, &psi),
        schmidt,
        chi,
        comp_stats: comp,
        config_stats: tables,
        expectations,
        theorem1,
    })
}
