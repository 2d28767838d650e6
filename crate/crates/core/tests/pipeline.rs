use qsfe_core::estimation::{
    adaptive_estimate, chi_condition_check, optimize_chi, ChiStrategy, EstimateOptions, Sampling, SchmidtSource,
};
use qsfe_core::measurements::comp_basis_stats;
use qsfe_core::states::{bell_state, crosstalk_state, white_noise_state, SchmidtVector};

fn options(configs: Vec<usize>, strategy: ChiStrategy, sampling: Option<Sampling>) -> EstimateOptions {
    EstimateOptions { configs, strategy, sampling }
}

#[test]
fn finite_shots_approach_exact_bounds() {
    let s = SchmidtVector::proportional(5);
    let rho = white_noise_state(&bell_state(&s), 0.2).unwrap();
    let source = SchmidtSource::Fixed(s);
    let exact = adaptive_estimate(&rho, &source, &options(vec![0, 1, 2, 3, 4], ChiStrategy::Symmetric, None)).unwrap();
    let target = exact.theorem1.bounds.exact.unwrap();
    assert!((target - exact.exact_fidelity).abs() < 1e-9);
    let mut errors = Vec::new();
    for shots in [1_000u64, 100_000, 10_000_000] {
        let sampled = options(vec![0, 1, 2, 3, 4], ChiStrategy::Symmetric, Some(Sampling { shots, seed: 5 }));
        let r = adaptive_estimate(&rho, &source, &sampled).unwrap();
        errors.push((r.theorem1.bounds.raw_lower - target).abs());
    }
    assert!(errors[2] < 2e-3, "{errors:?}");
    assert!(errors[2] < errors[0]);
}

#[test]
fn adapted_schmidt_tracks_the_diagonal() {
    let s = SchmidtVector::proportional(4);
    let rho = crosstalk_state(&bell_state(&s), 0.02, 0.01).unwrap();
    let r = adaptive_estimate(&rho, &SchmidtSource::Adapt, &options(vec![0, 1], ChiStrategy::General, None)).unwrap();
    let diag = comp_basis_stats(&rho).diagonal();
    let total: f64 = diag.iter().sum();
    for k in 0..4 {
        assert!((r.schmidt.get(k).powi(2) - diag[k] / total).abs() < 1e-12);
    }
    assert!(r.chi.is_compatible_with(&r.schmidt, 1e-9));
    assert!(r.theorem1.bounds.sandwiches(r.exact_fidelity, 1e-9));
}

#[test]
fn one_side_crosstalk_prefers_matched_coefficients() {
    let s = SchmidtVector::normalized(vec![0.086, 0.243, 0.446, 0.686, 0.446, 0.243, 0.086]).unwrap();
    let rho = crosstalk_state(&bell_state(&s), 0.04, 0.0).unwrap();
    let source = SchmidtSource::Fixed(s.clone());
    let low = |st| adaptive_estimate(&rho, &source, &options(vec![0], st, None)).unwrap().theorem1.bounds.lower;
    let (a, b, sym, gen) = (low(ChiStrategy::OneSideA), low(ChiStrategy::OneSideB), low(ChiStrategy::Symmetric), low(ChiStrategy::General));
    assert!(a > sym && sym > b);
    assert!((gen - a).abs() < 1e-9);

    let stats = comp_basis_stats(&rho);
    let report = chi_condition_check(&optimize_chi(&stats, &s, ChiStrategy::Crosstalk).unwrap(), &stats, &s).unwrap();
    assert!(report.feasible);
    assert!(report.pairs.iter().all(|p| p.kp == p.k + 1 || (p.k == 0 && p.kp == 6)));
    assert!(report.max_residual < 1e-9);
}
