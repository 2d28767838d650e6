//! Randomized invariant suite.

use std::collections::BTreeMap;
use std::fmt;

use qsfe_core::estimation::{adaptive_estimate, is_prime, splitmix64, ChiStrategy, EstimateOptions, SchmidtSource};
use qsfe_core::measurements::{ChiPair, ChiVector, MeasurementConfig};
use qsfe_core::numerics::{projector, Complex64, ComplexMatrix};
use qsfe_core::states::{
    bell_state, crosstalk_state, generalized_bell_state, white_noise_state, DensityMatrix, SchmidtVector,
};
use qsfe_core::verifiers::{bell_verifier, bell_verifier_terms, comp_basis_verifier, error_operator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const DEFAULT_TRIALS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    Stabilization,
    PovmValidity,
    OperatorIdentity,
    Sandwich,
}

impl Invariant {
    pub fn name(self) -> &'static str {
        match self {
            Invariant::Stabilization => "stabilization",
            Invariant::PovmValidity => "povm_validity",
            Invariant::OperatorIdentity => "operator_identity",
            Invariant::Sandwich => "sandwich",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelfcheckOptions {
    pub seed: u64,
    pub trials: usize,
    /// Perturbs each verifier before the stabilization check; a negative control.
    pub corrupt_verifier: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelfcheckSummary {
    pub seed: u64,
    pub trials: usize,
    pub tallies: BTreeMap<Invariant, Tally>,
    /// First few failure descriptions.
    pub failures: Vec<String>,
}

impl SelfcheckSummary {
    pub fn ok(&self) -> bool {
        self.tallies.values().all(|t| t.failed == 0)
    }
}

impl fmt::Display for SelfcheckSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "selfcheck seed={} trials={}", self.seed, self.trials)?;
        for (inv, t) in &self.tallies {
            writeln!(f, "  {:<18} passed {:>5}  failed {:>3}", inv.name(), t.passed, t.failed)?;
        }
        for msg in &self.failures {
            writeln!(f, "  FAIL {msg}")?;
        }
        write!(f, "{}", if self.ok() { "all invariants hold" } else { "invariant violations found" })
    }
}

const STAB_TOL: f64 = 1e-9;
const MAX_LISTED: usize = 10;

fn random_schmidt(d: usize, rng: &mut ChaCha8Rng) -> SchmidtVector {
    SchmidtVector::normalized((0..d).map(|_| rng.random_range(0.1..1.0)).collect()).expect("positive")
}

fn random_chi(s: &SchmidtVector, rng: &mut ChaCha8Rng) -> ChiPair {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..s.dim() {
        let r: f64 = rng.random_range(0.3..1.0);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        a.push(Complex64::from_polar(r, theta));
        b.push(Complex64::from_polar(s.get(k) / r, -theta));
    }
    ChiPair::new(ChiVector::normalized(a).expect("nonzero"), ChiVector::normalized(b).expect("nonzero"))
        .expect("same dimension")
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

struct Trial<'a> {
    tallies: &'a mut BTreeMap<Invariant, Tally>,
    failures: &'a mut Vec<String>,
    index: usize,
}

impl Trial<'_> {
    fn record(&mut self, inv: Invariant, ok: bool, detail: impl FnOnce() -> String) {
        let t = self.tallies.entry(inv).or_default();
        if ok {
            t.passed += 1;
        } else {
            t.failed += 1;
            if self.failures.len() < MAX_LISTED {
                self.failures.push(format!("trial {} {}: {}", self.index, inv.name(), detail()));
            }
        }
    }
}

fn run_trial(trial: &mut Trial<'_>, rng: &mut ChaCha8Rng, corrupt: bool) {
    let d = rng.random_range(2..=9usize);
    let s = random_schmidt(d, rng);
    let chi = random_chi(&s, rng);
    let psi = bell_state(&s);
    let j = rng.random_range(0..d);

    // Stabilization of V_e and V_j.
    let ve = comp_basis_verifier(&psi).map(|v| v.stabilization_residual(&psi));
    trial.record(Invariant::Stabilization, matches!(ve, Ok(r) if r <= STAB_TOL), || format!("V_e d={d}: {ve:?}"));
    match bell_verifier(j, &chi) {
        Ok(mut v) => {
            if corrupt {
                let mut delta = ComplexMatrix::zeros(d * d, d * d);
                delta[(0, 0)] = Complex64::new(0.25, 0.0);
                v.operator += delta;
            }
            let r = v.stabilization_residual(&psi);
            trial.record(Invariant::Stabilization, r <= STAB_TOL, || format!("V_{j} d={d}: residual {r:e}"));
        }
        Err(e) => trial.record(Invariant::Stabilization, false, || format!("V_{j} d={d}: {e}")),
    }

    // POVM completeness and positivity on both sides.
    let povm_ok = MeasurementConfig::new(j, chi.clone()).and_then(|cfg| {
        let mut worst: f64 = 0.0;
        for p in [cfg.povm_a()?, cfg.povm_b()?] {
            worst = worst.max(p.completeness_error()).max(-p.min_eigenvalue()?);
        }
        Ok(worst)
    });
    trial.record(Invariant::PovmValidity, matches!(povm_ok, Ok(w) if w <= 1e-9), || format!("d={d} j={j}: {povm_ok:?}"));

    // V_j equals its generalized Bell decomposition; for prime d the
    // configuration verifiers also sum to d|psi><psi| + E.
    let identity = (|| -> qsfe_core::Result<f64> {
        let v = bell_verifier(j, &chi)?;
        let mut rebuilt = ComplexMatrix::zeros(d * d, d * d);
        for (ket, r) in bell_verifier_terms(j, &chi)? {
            rebuilt += projector(&ket) * Complex64::new(r, 0.0);
        }
        let mut worst = max_abs(&(&v.operator - rebuilt));
        if is_prime(d) {
            let mut sum = ComplexMatrix::zeros(d * d, d * d);
            for jj in 0..d {
                sum += bell_verifier(jj, &chi)?.operator;
            }
            let expected = projector(&psi) * Complex64::new(d as f64, 0.0) + error_operator(&chi).matrix();
            worst = worst.max(max_abs(&(sum - expected)));
        }
        Ok(worst)
    })();
    trial.record(Invariant::OperatorIdentity, matches!(identity, Ok(w) if w <= 1e-9), || format!("d={d}: {identity:?}"));

    // Oracle sandwich on a random noisy input.
    let rho = match rng.random_range(0..3) {
        0 => white_noise_state(&psi, rng.random_range(0.0..1.0)),
        1 => {
            let cap = 1.0 / (2.0 * d as f64);
            let t = rng.random_range(0.0..cap);
            let split = rng.random_range(0.0..1.0);
            crosstalk_state(&psi, t * split, t * (1.0 - split))
        }
        _ => {
            let mu = rng.random_range(1..d);
            let nu = rng.random_range(0..d);
            generalized_bell_state(mu, nu, &chi)
                .and_then(|k| DensityMatrix::pure(&k))
                .and_then(|other| DensityMatrix::pure(&psi)?.mix(&other, rng.random_range(0.0..1.0)))
        }
    };
    let configs: Vec<usize> = {
        let c: Vec<usize> = (0..d).filter(|_| rng.random_bool(0.5)).collect();
        if c.is_empty() { vec![j] } else { c }
    };
    let strategy = [ChiStrategy::Uniform, ChiStrategy::Symmetric, ChiStrategy::OneSideA, ChiStrategy::General]
        [rng.random_range(0..4)];
    let sandwich = rho.and_then(|rho| {
        let r = adaptive_estimate(&rho, &SchmidtSource::Fixed(s.clone()), &EstimateOptions { configs, strategy, sampling: None })?;
        Ok((r.theorem1.bounds.sandwiches(r.exact_fidelity, 1e-9), r.exact_fidelity, r.theorem1.bounds))
    });
    trial.record(Invariant::Sandwich, matches!(sandwich, Ok((true, _, _))), || format!("d={d} {strategy}: {sandwich:?}"));
}

pub fn selfcheck(opts: SelfcheckOptions) -> SelfcheckSummary {
    let mut tallies = BTreeMap::new();
    let mut failures = Vec::new();
    for i in 0..opts.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(opts.seed.wrapping_add(i as u64)));
        let mut trial = Trial { tallies: &mut tallies, failures: &mut failures, index: i };
        run_trial(&mut trial, &mut rng, opts.corrupt_verifier);
    }
    SelfcheckSummary { seed: opts.seed, trials: opts.trials, tallies, failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let s = selfcheck(SelfcheckOptions { seed: 1, trials: 25, corrupt_verifier: false });
        assert!(s.ok(), "{s}");
        assert_eq!(s.tallies[&Invariant::Stabilization].passed, 50);
        assert_eq!(s.tallies[&Invariant::Sandwich].passed, 25);
    }

    #[test]
    fn corrupt_verifier_is_caught() {
        let s = selfcheck(SelfcheckOptions { seed: 1, trials: 10, corrupt_verifier: true });
        assert!(!s.ok());
        let t = s.tallies[&Invariant::Stabilization];
        assert!(t.failed > 0);
        assert_eq!(s.tallies[&Invariant::Sandwich].failed, 0);
        assert!(s.to_string().contains("FAIL"));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let o = SelfcheckOptions { seed: 99, trials: 15, corrupt_verifier: false };
        assert_eq!(selfcheck(o), selfcheck(o));
        assert_eq!(selfcheck(o).to_string(), selfcheck(o).to_string());
    }
}
