//! Sweep evaluation and CSV / JSON emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use qsfe_core::estimation::{
    adaptive_estimate, lemma2_trivial_estimate, nonadaptive_estimate, nonadaptive_weights, splitmix64,
    ChiStrategy, EstimateOptions, FidelityBounds, Sampling,
};
use qsfe_core::numerics::Ket;
use qsfe_core::states::{bell_state, crosstalk_state_with, white_noise_state, DensityMatrix, NoiseParams};
use qsfe_core::Result as CoreResult;
use rayon::prelude::*;
use serde::Serialize;

use crate::scenario::{Estimator, Mode, Resolved};

/// Slack for the oracle sandwich check.
pub const SANDWICH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorCell {
    pub estimator: Estimator,
    pub bounds: Option<FidelityBounds>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub series: usize,
    pub config_set: Vec<usize>,
    pub chi_strategy: ChiStrategy,
    pub sweep_value: f64,
    pub exact_fidelity: Option<f64>,
    pub cells: Vec<EstimatorCell>,
    pub v_e: Option<f64>,
    pub v_j: Vec<(usize, f64)>,
    pub error: Option<f64>,
    pub info: Option<f64>,
    pub chi_a: Vec<f64>,
    pub chi_b: Vec<f64>,
    pub subset: Vec<usize>,
    pub clamped: bool,
    pub violation: bool,
    pub note: String,
}

impl Row {
    pub fn bounds(&self, e: Estimator) -> Option<&FidelityBounds> {
        self.cells.iter().find(|c| c.estimator == e).and_then(|c| c.bounds.as_ref())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Resolved,
    pub seed: u64,
    pub rows: Vec<Row>,
}

impl RunOutput {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violation).count()
    }

    pub fn is_exact(&self) -> bool {
        self.scenario.mode == Mode::Exact
    }
}

pub fn noisy_state(psi: &Ket, noise: NoiseParams, scenario: &Resolved) -> CoreResult<DensityMatrix> {
    match noise {
        NoiseParams::White { epsilon } => white_noise_state(psi, epsilon),
        NoiseParams::Crosstalk { eps_a, eps_b } => {
            crosstalk_state_with(psi, eps_a, eps_b, scenario.crosstalk_convention)
        }
    }
}

fn row_seed(seed: u64, series: usize, point: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((series as u64) << 32) | point as u64))
}

/// The target used to generate the input state. With an adapted Schmidt
/// vector the noise is applied to the proportional ramp.
fn source_target(scenario: &Resolved) -> Ket {
    use qsfe_core::estimation::SchmidtSource;
    use qsfe_core::states::SchmidtVector;
    match &scenario.schmidt {
        SchmidtSource::Fixed(s) => bell_state(s),
        SchmidtSource::Adapt => bell_state(&SchmidtVector::proportional(scenario.d)),
    }
}

fn evaluate(scenario: &Resolved, series: usize, configs: &[usize], strategy: ChiStrategy, point: usize, value: f64, seed: u64) -> Row {
    let mut row = Row {
        series,
        config_set: configs.to_vec(),
        chi_strategy: strategy,
        sweep_value: value,
        exact_fidelity: None,
        cells: Vec::new(),
        v_e: None,
        v_j: Vec::new(),
        error: None,
        info: None,
        chi_a: Vec::new(),
        chi_b: Vec::new(),
        subset: Vec::new(),
        clamped: false,
        violation: false,
        note: String::new(),
    };
    let psi0 = source_target(scenario);
    let rho = match noisy_state(&psi0, scenario.noise_at(value), scenario) {
        Ok(r) => r,
        Err(e) => {
            row.note = e.to_string();
            return row;
        }
    };
    let sampling = match scenario.mode {
        Mode::Exact => None,
        Mode::Shots { n, .. } => Some(Sampling { shots: n, seed: row_seed(seed, series, point) }),
    };
    let options = EstimateOptions { configs: configs.to_vec(), strategy, sampling };
    let report = match adaptive_estimate(&rho, &scenario.schmidt, &options) {
        Ok(r) => r,
        Err(e) => {
            row.note = e.to_string();
            return row;
        }
    };
    let psi = report.target();
    let exp = &report.expectations;
    row.exact_fidelity = Some(report.exact_fidelity);
    row.v_e = Some(exp.v_e);
    row.v_j = exp.v_j.iter().map(|(j, v)| (*j, *v)).collect();
    row.error = Some(exp.error);
    row.info = Some(exp.info);
    row.chi_a = report.chi.a.coeffs().iter().map(|c| c.re).collect();
    row.chi_b = report.chi.b.coeffs().iter().map(|c| c.re).collect();
    row.subset = report.theorem1.subset.clone();

    let weights = nonadaptive_weights(exp.v_j.len());
    for &estimator in &scenario.estimators {
        let result = match estimator {
            Estimator::Theorem1 => Ok(report.theorem1.bounds.clone()),
            Estimator::Nonadaptive => weights
                .clone()
                .and_then(|w| nonadaptive_estimate(&psi, &report.chi, exp, &w)),
            Estimator::Lemma2Trivial => weights
                .clone()
                .and_then(|w| lemma2_trivial_estimate(&psi, &report.chi, exp, &w)),
        };
        let cell = match result {
            Ok(b) => {
                row.clamped |= b.clamped;
                row.violation |= !b.sandwiches(report.exact_fidelity, SANDWICH_TOL);
                EstimatorCell { estimator, bounds: Some(b), error: None }
            }
            Err(e) => {
                if !row.note.is_empty() {
                    row.note.push_str("; ");
                }
                row.note.push_str(&format!("{}: {e}", estimator.name()));
                EstimatorCell { estimator, bounds: None, error: Some(e.to_string()) }
            }
        };
        row.cells.push(cell);
    }
    row
}

/// Evaluates every series at every sweep point. Points run in parallel;
/// rows come back in series order, then sweep order.
pub fn run(scenario: &Resolved, seed: u64) -> RunOutput {
    let points = scenario.points();
    let mut series = Vec::new();
    for configs in &scenario.config_sets {
        for &strategy in &scenario.chi_strategies {
            series.push((configs.clone(), strategy));
        }
    }
    let jobs: Vec<(usize, usize)> =
        (0..series.len()).flat_map(|s| (0..points.len()).map(move |p| (s, p))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(s, p)| evaluate(scenario, s, &series[s].0, series[s].1, p, points[p], seed))
        .collect();
    RunOutput { scenario: scenario.clone(), seed, rows }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

pub fn csv_header(scenario: &Resolved) -> Vec<String> {
    let mut h = vec!["sweep_param".to_string(), "exact_F".to_string()];
    for e in &scenario.estimators {
        h.push(format!("{}_lower", e.name()));
        h.push(format!("{}_upper", e.name()));
    }
    for c in ["v_e", "v_j", "error", "info", "config_set", "chi_strategy", "chi_a", "chi_b", "subset", "clamped", "violation", "note"] {
        h.push(c.to_string());
    }
    h
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn csv_record(row: &Row, scenario: &Resolved) -> Vec<String> {
    let mut r = vec![
        if row.sweep_value.is_nan() { String::new() } else { fmt_f64(row.sweep_value) },
        opt(row.exact_fidelity),
    ];
    for e in &scenario.estimators {
        let b = row.bounds(*e);
        r.push(opt(b.map(|b| b.lower)));
        r.push(opt(b.map(|b| b.upper)));
    }
    r.push(opt(row.v_e));
    r.push(join(&row.v_j, |(j, v)| format!("{j}:{}", fmt_f64(*v))));
    r.push(opt(row.error));
    r.push(opt(row.info));
    r.push(join(&row.config_set, |j| j.to_string()));
    r.push(row.chi_strategy.name().to_string());
    r.push(join(&row.chi_a, |x| fmt_f64(*x)));
    r.push(join(&row.chi_b, |x| fmt_f64(*x)));
    r.push(join(&row.subset, |j| j.to_string()));
    r.push(row.clamped.to_string());
    r.push(row.violation.to_string());
    r.push(row.note.clone());
    r
}

pub fn write_csv<W: Write>(out: &RunOutput, w: W) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(csv_header(&out.scenario))?;
    for row in &out.rows {
        writer.write_record(csv_record(row, &out.scenario))?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Provenance {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    seed: u64,
    csv: String,
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    provenance: Provenance,
    scenario: &'a Resolved,
    sweep_parameter: Option<&'static str>,
    rows: usize,
    violations: usize,
    clamped_rows: usize,
    failed_cells: usize,
}

pub fn sidecar_json(out: &RunOutput, csv_name: &str) -> anyhow::Result<String> {
    let sidecar = Sidecar {
        provenance: Provenance {
            tool: "qsfe",
            version: env!("CARGO_PKG_VERSION"),
            core_version: qsfe_core::VERSION,
            seed: out.seed,
            csv: csv_name.to_string(),
        },
        scenario: &out.scenario,
        sweep_parameter: out.scenario.sweep.as_ref().map(|s| s.parameter.name()),
        rows: out.rows.len(),
        violations: out.violations(),
        clamped_rows: out.rows.iter().filter(|r| r.clamped).count(),
        failed_cells: out.rows.iter().flat_map(|r| &r.cells).filter(|c| c.bounds.is_none()).count(),
    };
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    Ok(text)
}

/// Writes `<name>.csv` and `<name>.json` into `dir` and returns their paths.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> anyhow::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_name = format!("{}.csv", out.scenario.name);
    let csv_path = dir.join(&csv_name);
    let json_path = dir.join(format!("{}.json", out.scenario.name));
    let file = std::fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_csv(out, std::io::BufWriter::new(file))?;
    std::fs::write(&json_path, sidecar_json(out, &csv_name)?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok((csv_path, json_path))
}
