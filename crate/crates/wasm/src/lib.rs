//! Browser bindings for the demo page. Each export returns a JSON string;
//! the plain-Rust functions behind them are what the tests exercise.

use qsfe_core::estimation::{adaptive_estimate, ChiStrategy, EstimateOptions, SchmidtSource};
use qsfe_core::measurements::comp_basis_stats;
use qsfe_core::states::{bell_state, crosstalk_state_with, white_noise_state, CrosstalkConvention, SchmidtVector};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Schmidt coefficients of the crosstalk example, normalized on use.
const PEAKED: [f64; 7] = [0.086, 0.243, 0.446, 0.686, 0.446, 0.243, 0.086];

fn peaked() -> SchmidtVector {
    SchmidtVector::normalized(PEAKED.to_vec()).expect("positive entries")
}

fn grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(2);
    (0..steps).map(|i| from + (to - from) * i as f64 / (steps - 1) as f64).collect()
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
pub struct CurveSet {
    pub x_label: String,
    pub exact: Vec<f64>,
    pub curves: Vec<Curve>,
}

#[derive(Debug, Serialize)]
pub struct Heatmap {
    pub d: usize,
    pub eps_a: f64,
    pub eps_b: f64,
    /// `p[a][b]` for outcome `a` on A and `b` on B.
    pub p: Vec<Vec<f64>>,
}

fn parse_strategy(name: &str) -> Result<ChiStrategy, String> {
    name.parse().map_err(|e: qsfe_core::Error| e.to_string())
}

/// Lower/upper bounds against white noise for growing configuration sets
/// `{0}, {0,1}, ..., {0..max_configs-1}`, with `s ∝ 1..d`.
pub fn white_noise_curves(d: usize, max_configs: usize, strategy: &str, steps: usize) -> Result<CurveSet, String> {
    if !(2..=12).contains(&d) {
        return Err(format!("d = {d}; the demo supports 2..=12"));
    }
    let strategy = parse_strategy(strategy)?;
    let s = SchmidtVector::proportional(d);
    let psi = bell_state(&s);
    let xs = grid(0.0, 1.0, steps);
    let states = xs.iter().map(|&e| white_noise_state(&psi, e)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let exact = states.iter().map(|r| qsfe_core::states::exact_fidelity(r, &psi)).collect();
    let mut curves = Vec::new();
    for n in 1..=max_configs.clamp(1, d) {
        let options = EstimateOptions { configs: (0..n).collect(), strategy, sampling: None };
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for rho in &states {
            match adaptive_estimate(rho, &SchmidtSource::Fixed(s.clone()), &options) {
                Ok(r) => {
                    lower.push(Some(r.theorem1.bounds.lower));
                    upper.push(Some(r.theorem1.bounds.upper));
                }
                Err(_) => {
                    lower.push(None);
                    upper.push(None);
                }
            }
        }
        curves.push(Curve { label: format!("M = {{0..{}}}", n - 1), x: xs.clone(), lower, upper });
    }
    Ok(CurveSet { x_label: "epsilon".into(), exact, curves })
}

/// Computational-basis statistics of the peaked 7x7 target under crosstalk.
pub fn crosstalk_heatmap(eps_a: f64, eps_b: f64) -> Result<Heatmap, String> {
    let psi = bell_state(&peaked());
    let rho = crosstalk_state_with(&psi, eps_a, eps_b, CrosstalkConvention::ConserveLeading).map_err(|e| e.to_string())?;
    let stats = comp_basis_stats(&rho);
    let p = (0..7).map(|a| (0..7).map(|b| stats.get(a, b)).collect()).collect();
    Ok(Heatmap { d: 7, eps_a, eps_b, p })
}

/// Adaptive lower bounds with `M = {0}` for several coefficient choices
/// while `eps_a / (eps_a + eps_b)` runs over `[0, 1]` at fixed total.
pub fn crosstalk_ratio_curves(total: f64, steps: usize) -> Result<CurveSet, String> {
    let s = peaked();
    let psi = bell_state(&s);
    let xs = grid(0.0, 1.0, steps);
    let states = xs
        .iter()
        .map(|&r| crosstalk_state_with(&psi, total * r, total * (1.0 - r), CrosstalkConvention::ConserveLeading))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let exact = states.iter().map(|r| qsfe_core::states::exact_fidelity(r, &psi)).collect();
    let mut curves = Vec::new();
    for strategy in [ChiStrategy::OneSideA, ChiStrategy::OneSideB, ChiStrategy::Symmetric, ChiStrategy::General] {
        let options = EstimateOptions { configs: vec![0], strategy, sampling: None };
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for rho in &states {
            let r = adaptive_estimate(rho, &SchmidtSource::Fixed(s.clone()), &options).ok();
            lower.push(r.as_ref().map(|r| r.theorem1.bounds.lower));
            upper.push(r.as_ref().map(|r| r.theorem1.bounds.upper));
        }
        curves.push(Curve { label: strategy.name().into(), x: xs.clone(), lower, upper });
    }
    Ok(CurveSet { x_label: "eps_a / (eps_a + eps_b)".into(), exact, curves })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = whiteNoiseCurves)]
pub fn white_noise_curves_js(d: usize, max_configs: usize, strategy: &str, steps: usize) -> Result<String, JsError> {
    to_js(white_noise_curves(d, max_configs, strategy, steps))
}

#[wasm_bindgen(js_name = crosstalkHeatmap)]
pub fn crosstalk_heatmap_js(eps_a: f64, eps_b: f64) -> Result<String, JsError> {
    to_js(crosstalk_heatmap(eps_a, eps_b))
}

#[wasm_bindgen(js_name = crosstalkRatioCurves)]
pub fn crosstalk_ratio_curves_js(total: f64, steps: usize) -> Result<String, JsError> {
    to_js(crosstalk_ratio_curves(total, steps))
}
