use qsfe_wasm::{crosstalk_heatmap, crosstalk_ratio_curves, white_noise_curves};

#[test]
fn white_noise_curves_are_ordered_and_sandwich() {
    let set = white_noise_curves(5, 5, "symmetric", 11).unwrap();
    assert_eq!(set.curves.len(), 5);
    for (i, f) in set.exact.iter().enumerate() {
        for c in &set.curves {
            let (lo, up) = (c.lower[i].unwrap(), c.upper[i].unwrap());
            assert!(lo - 1e-9 <= *f && *f <= up + 1e-9);
        }
        for w in set.curves.windows(2) {
            assert!(w[1].lower[i].unwrap() >= w[0].lower[i].unwrap() - 1e-9);
        }
    }
    assert!(white_noise_curves(1, 1, "symmetric", 5).is_err());
    assert!(white_noise_curves(3, 1, "sideways", 5).is_err());
}

#[test]
fn heatmap_is_a_distribution() {
    let h = crosstalk_heatmap(0.04, 0.0).unwrap();
    let total: f64 = h.p.iter().flatten().sum();
    assert!((total - 1.0).abs() < 1e-12);
    // One-sided crosstalk on A moves weight to (k+1, k) and (k-1, k) only.
    assert!(h.p[4][3] > 0.0 && h.p[3][4] > 0.0 && h.p[5][3] == 0.0);
    assert!(crosstalk_heatmap(0.5, 0.5).is_err());
}

#[test]
fn ratio_curves_favour_matched_one_side_choice() {
    let set = crosstalk_ratio_curves(0.04, 5).unwrap();
    let label = |l: &str| set.curves.iter().find(|c| c.label == l).unwrap();
    let (a, b, sym, gen) = (label("one_side_A"), label("one_side_B"), label("symmetric"), label("general"));
    assert!(a.lower[4].unwrap() > sym.lower[4].unwrap());
    assert!(b.lower[0].unwrap() > sym.lower[0].unwrap());
    for i in 0..5 {
        let best = [a, b, sym].iter().map(|c| c.lower[i].unwrap()).fold(0.0, f64::max);
        assert!(gen.lower[i].unwrap() >= best - 1e-9);
    }
    let json = serde_json::to_string(&set).unwrap();
    assert!(json.contains("\"x_label\""));
}
