use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::measurements::{ChiPair, ChiVector};
use crate::numerics::Complex64;
use crate::states::SchmidtVector;

pub fn random_schmidt(d: usize, rng: &mut ChaCha8Rng) -> SchmidtVector {
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
    SchmidtVector::normalized(raw).unwrap()
}

/// Random complex `chi_A` paired with the `chi_B` that keeps `psi` stabilized.
pub fn random_chi_pair(s: &SchmidtVector, rng: &mut ChaCha8Rng) -> ChiPair {
    let d = s.dim();
    let mut a = Vec::with_capacity(d);
    let mut b = Vec::with_capacity(d);
    for k in 0..d {
        let r: f64 = rng.random_range(0.2..1.0);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        a.push(Complex64::from_polar(r, theta));
        b.push(Complex64::from_polar(s.get(k) / r, -theta));
    }
    ChiPair::new(ChiVector::normalized(a).unwrap(), ChiVector::normalized(b).unwrap()).unwrap()
}
