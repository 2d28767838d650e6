//! Scenario files: parsing, validation and the built-in figure presets.

use std::fmt;
use std::path::Path;

use qsfe_core::estimation::{ChiStrategy, SchmidtSource};
use qsfe_core::states::{CrosstalkConvention, NoiseParams, SchmidtVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchmidtKeyword {
    /// `s_k ∝ k + 1`.
    Proportional,
    Uniform,
    /// Read off the computational-basis diagonal at each sweep point.
    Adapt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchmidtSpec {
    Keyword(SchmidtKeyword),
    /// Positive values; normalized before use.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Epsilon,
    EpsA,
    EpsB,
    /// `eps_a / (eps_a + eps_b)` with the total held at the noise block's value.
    CrosstalkRatio,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::EpsA => "eps_a",
            SweepParam::EpsB => "eps_b",
            SweepParam::CrosstalkRatio => "crosstalk_ratio",
        }
    }
}

fn default_steps() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParam,
    pub from: f64,
    pub to: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl Sweep {
    /// Uniform grid with both endpoints included.
    pub fn points(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.from];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.to } else { self.from + (self.to - self.from) * i as f64 / last })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Exact,
    Shots {
        n: u64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Theorem1,
    Nonadaptive,
    Lemma2Trivial,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Theorem1 => "theorem1",
            Estimator::Nonadaptive => "nonadaptive",
            Estimator::Lemma2Trivial => "lemma2_trivial",
        }
    }
}

fn default_name() -> String {
    "scenario".into()
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Theorem1]
}

/// A scenario as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub d: usize,
    pub schmidt: SchmidtSpec,
    pub noise: NoiseParams,
    #[serde(default)]
    pub crosstalk_convention: CrosstalkConvention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configs: Option<Vec<usize>>,
    /// Several configuration sets, one output series each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_sets: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_strategy: Option<ChiStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_strategies: Option<Vec<ChiStrategy>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
}

#[derive(Debug)]
pub enum ScenarioError {
    Io { path: String, source: std::io::Error },
    Parse { line: usize, column: usize, field: String, message: String },
    Invalid(Vec<String>),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Io { path, source } => write!(f, "cannot read {path}: {source}"),
            ScenarioError::Parse { line, column, field, message } => {
                write!(f, "parse error at line {line}, column {column}")?;
                if !field.is_empty() && field != "." {
                    write!(f, " (field `{field}`)")?;
                }
                write!(f, ": {message}")
            }
            ScenarioError::Invalid(list) => {
                writeln!(f, "invalid scenario ({} problem{}):", list.len(), if list.len() == 1 { "" } else { "s" })?;
                for (i, item) in list.iter().enumerate() {
                    if i + 1 == list.len() {
                        write!(f, "  - {item}")?;
                    } else {
                        writeln!(f, "  - {item}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ScenarioError {}

/// A validated scenario with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub name: String,
    pub d: usize,
    pub schmidt: SchmidtSource,
    pub noise: NoiseParams,
    pub crosstalk_convention: CrosstalkConvention,
    pub config_sets: Vec<Vec<usize>>,
    pub chi_strategies: Vec<ChiStrategy>,
    pub sweep: Option<Sweep>,
    pub mode: Mode,
    pub estimators: Vec<Estimator>,
}

impl Resolved {
    /// Sweep values, or a single point at the base noise when there is no sweep.
    pub fn points(&self) -> Vec<f64> {
        match &self.sweep {
            Some(s) => s.points(),
            None => vec![f64::NAN],
        }
    }

    /// Noise parameters at one sweep value.
    pub fn noise_at(&self, value: f64) -> NoiseParams {
        let Some(sweep) = &self.sweep else { return self.noise };
        match (self.noise, sweep.parameter) {
            (NoiseParams::White { .. }, _) => NoiseParams::White { epsilon: value },
            (NoiseParams::Crosstalk { eps_b, .. }, SweepParam::EpsA) => NoiseParams::Crosstalk { eps_a: value, eps_b },
            (NoiseParams::Crosstalk { eps_a, .. }, SweepParam::EpsB) => NoiseParams::Crosstalk { eps_a, eps_b: value },
            (NoiseParams::Crosstalk { eps_a, eps_b }, _) => {
                let total = eps_a + eps_b;
                NoiseParams::Crosstalk { eps_a: total * value, eps_b: total * (1.0 - value) }
            }
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        ScenarioError::Parse {
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string().split(" at line ").next().unwrap_or_default().to_string(),
        }
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

impl Scenario {
    /// Checks every invariant and reports all violations at once.
    pub fn resolve(&self) -> Result<Resolved, ScenarioError> {
        let mut problems = Vec::new();
        let d = self.d;
        if d < 2 {
            problems.push(format!("d = {d}; need d >= 2"));
        }

        let schmidt = match &self.schmidt {
            SchmidtSpec::Keyword(SchmidtKeyword::Adapt) => Some(SchmidtSource::Adapt),
            SchmidtSpec::Keyword(SchmidtKeyword::Proportional) if d >= 2 => {
                Some(SchmidtSource::Fixed(SchmidtVector::proportional(d)))
            }
            SchmidtSpec::Keyword(SchmidtKeyword::Uniform) if d >= 2 => {
                Some(SchmidtSource::Fixed(SchmidtVector::uniform(d)))
            }
            SchmidtSpec::Keyword(_) => None,
            SchmidtSpec::Explicit(values) => {
                if values.len() != d {
                    problems.push(format!("schmidt has {} entries, expected d = {d}", values.len()));
                    None
                } else if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    problems.push("schmidt entries must be positive and finite".into());
                    None
                } else {
                    SchmidtVector::normalized(values.clone()).ok().map(SchmidtSource::Fixed)
                }
            }
        };

        let config_sets = match (&self.configs, &self.config_sets) {
            (Some(c), None) => vec![c.clone()],
            (None, Some(sets)) => sets.clone(),
            (Some(_), Some(_)) => {
                problems.push("give either `configs` or `config_sets`, not both".into());
                Vec::new()
            }
            (None, None) => {
                problems.push("missing `configs` (or `config_sets`)".into());
                Vec::new()
            }
        };
        if matches!(&self.config_sets, Some(s) if s.is_empty()) {
            problems.push("`config_sets` is empty".into());
        }
        for set in &config_sets {
            if set.is_empty() {
                problems.push("configuration set is empty".into());
            }
            for &j in set {
                if j >= d {
                    problems.push(format!("configuration {j} is outside 0..{d}"));
                }
            }
        }

        let chi_strategies = match (&self.chi_strategy, &self.chi_strategies) {
            (Some(c), None) => vec![*c],
            (None, Some(list)) if !list.is_empty() => list.clone(),
            (None, Some(_)) => {
                problems.push("`chi_strategies` is empty".into());
                Vec::new()
            }
            (None, None) => vec![ChiStrategy::Symmetric],
            (Some(_), Some(_)) => {
                problems.push("give either `chi_strategy` or `chi_strategies`, not both".into());
                Vec::new()
            }
        };

        if d >= 2 {
            if let Err(e) = self.noise.validate(d) {
                problems.push(format!("noise: {e}"));
            }
        }
        if let Some(sweep) = &self.sweep {
            if !sweep.from.is_finite() || !sweep.to.is_finite() {
                problems.push("sweep bounds must be finite".into());
            }
            if sweep.steps == 0 {
                problems.push("sweep.steps must be at least 1".into());
            }
            match (self.noise, sweep.parameter) {
                (NoiseParams::White { .. }, SweepParam::Epsilon) => {
                    for v in [sweep.from, sweep.to] {
                        if !(0.0..=1.0).contains(&v) {
                            problems.push(format!("sweep value {v} outside the epsilon range [0, 1]"));
                        }
                    }
                }
                (NoiseParams::Crosstalk { .. }, SweepParam::CrosstalkRatio) => {
                    for v in [sweep.from, sweep.to] {
                        if !(0.0..=1.0).contains(&v) {
                            problems.push(format!("sweep value {v} outside the ratio range [0, 1]"));
                        }
                    }
                }
                (NoiseParams::Crosstalk { eps_a, eps_b }, p @ (SweepParam::EpsA | SweepParam::EpsB)) => {
                    for v in [sweep.from, sweep.to] {
                        let (a, b) = if p == SweepParam::EpsA { (v, eps_b) } else { (eps_a, v) };
                        if d >= 2 {
                            if let Err(e) = (NoiseParams::Crosstalk { eps_a: a, eps_b: b }).validate(d) {
                                problems.push(format!("sweep value {v}: {e}"));
                            }
                        }
                    }
                }
                (noise, p) => problems.push(format!(
                    "sweep parameter `{}` does not apply to {} noise",
                    p.name(),
                    match noise {
                        NoiseParams::White { .. } => "white",
                        NoiseParams::Crosstalk { .. } => "crosstalk",
                    }
                )),
            }
        }
        if let Mode::Shots { n, .. } = self.mode {
            if n == 0 {
                problems.push("shots must be at least 1".into());
            }
        }
        if self.estimators.is_empty() {
            problems.push("`estimators` is empty".into());
        }

        if !problems.is_empty() {
            return Err(ScenarioError::Invalid(problems));
        }
        let mut estimators = self.estimators.clone();
        estimators.sort();
        estimators.dedup();
        Ok(Resolved {
            name: self.name.clone(),
            d,
            schmidt: schmidt.expect("validated"),
            noise: self.noise,
            crosstalk_convention: self.crosstalk_convention,
            config_sets,
            chi_strategies,
            sweep: self.sweep.clone(),
            mode: self.mode,
            estimators,
        })
    }
}

/// Schmidt coefficients of the crosstalk example, as printed (normalized on use).
pub const FIG3_SCHMIDT: [f64; 7] = [0.086, 0.243, 0.446, 0.686, 0.446, 0.243, 0.086];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
}

impl Preset {
    pub fn scenario(self) -> Scenario {
        let all = vec![Estimator::Theorem1, Estimator::Nonadaptive, Estimator::Lemma2Trivial];
        match self {
            Preset::Fig1 => Scenario {
                name: "fig1".into(),
                d: 7,
                schmidt: SchmidtSpec::Keyword(SchmidtKeyword::Proportional),
                noise: NoiseParams::White { epsilon: 0.0 },
                crosstalk_convention: CrosstalkConvention::default(),
                configs: None,
                config_sets: Some((1..=7).map(|n| (0..n).collect()).collect()),
                chi_strategy: Some(ChiStrategy::Symmetric),
                chi_strategies: None,
                sweep: Some(Sweep { parameter: SweepParam::Epsilon, from: 0.0, to: 1.0, steps: 101 }),
                mode: Mode::Exact,
                estimators: all,
            },
            Preset::Fig2 => Scenario {
                name: "fig2".into(),
                d: 9,
                schmidt: SchmidtSpec::Keyword(SchmidtKeyword::Proportional),
                noise: NoiseParams::White { epsilon: 0.0 },
                crosstalk_convention: CrosstalkConvention::default(),
                configs: None,
                config_sets: Some(vec![vec![0], vec![0, 1], vec![0, 1, 2], vec![0, 1, 2, 3, 4], (0..9).collect()]),
                chi_strategy: Some(ChiStrategy::Symmetric),
                chi_strategies: None,
                sweep: Some(Sweep { parameter: SweepParam::Epsilon, from: 0.0, to: 1.0, steps: 101 }),
                mode: Mode::Exact,
                estimators: all,
            },
            Preset::Fig3 => Scenario {
                name: "fig3".into(),
                d: 7,
                schmidt: SchmidtSpec::Explicit(FIG3_SCHMIDT.to_vec()),
                noise: NoiseParams::Crosstalk { eps_a: 0.02, eps_b: 0.02 },
                crosstalk_convention: CrosstalkConvention::ConserveLeading,
                configs: Some(vec![0]),
                config_sets: None,
                chi_strategy: None,
                chi_strategies: Some(vec![
                    ChiStrategy::OneSideA,
                    ChiStrategy::OneSideB,
                    ChiStrategy::Symmetric,
                    ChiStrategy::General,
                ]),
                sweep: Some(Sweep { parameter: SweepParam::CrosstalkRatio, from: 0.0, to: 1.0, steps: 101 }),
                mode: Mode::Exact,
                estimators: vec![Estimator::Theorem1],
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"d": 3, "schmidt": "proportional", "noise": {"kind": "white", "epsilon": 0.1}, "configs": [0, 1]}"#;

    #[test]
    fn minimal_scenario_defaults() {
        let r = parse_scenario(MINIMAL).unwrap().resolve().unwrap();
        assert_eq!(r.config_sets, vec![vec![0, 1]]);
        assert_eq!(r.chi_strategies, vec![ChiStrategy::Symmetric]);
        assert_eq!(r.mode, Mode::Exact);
        assert_eq!(r.estimators, vec![Estimator::Theorem1]);
        assert_eq!(r.points().len(), 1);
    }

    #[test]
    fn parse_errors_carry_position_and_field() {
        let text = "{\n  \"d\": 3,\n  \"schmidt\": \"proportional\",\n  \"noise\": {\"kind\": \"white\", \"epsilon\": \"big\"}\n}";
        match parse_scenario(text) {
            Err(ScenarioError::Parse { line, field, message, .. }) => {
                // Tagged noise blocks are buffered, so the position is the end of the block.
                assert!((4..=5).contains(&line));
                assert_eq!(field, "noise");
                assert!(message.contains("big"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_scenario("{\"d\": 3,"), Err(ScenarioError::Parse { line: 1, .. })));
        match parse_scenario("{\n \"d\": \"x\"\n}") {
            Err(ScenarioError::Parse { line: 2, column: 9, field, .. }) => assert_eq!(field, "d"),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = r#"{"d": 3, "schmidt": "uniform", "noise": {"kind": "white", "epsilon": 0}, "configs": [0], "colour": 1}"#;
        assert!(parse_scenario(unknown).unwrap_err().to_string().contains("colour"));
    }

    #[test]
    fn every_violation_is_listed() {
        let text = r#"{"d": 3, "schmidt": [1, 2], "noise": {"kind": "white", "epsilon": 0.1},
            "configs": [0, 5], "sweep": {"parameter": "eps_a", "from": 0, "to": 1},
            "mode": {"shots": {"n": 0}}, "estimators": []}"#;
        match parse_scenario(text).unwrap().resolve() {
            Err(ScenarioError::Invalid(list)) => assert_eq!(list.len(), 5, "{list:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sweep_grid_is_inclusive() {
        let s = Sweep { parameter: SweepParam::Epsilon, from: 0.0, to: 1.0, steps: 101 };
        let p = s.points();
        assert_eq!(p.len(), 101);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[100], 1.0);
        assert!((p[37] - 0.37).abs() < 1e-15);
    }

    #[test]
    fn crosstalk_ratio_keeps_total() {
        let r = Preset::Fig3.scenario().resolve().unwrap();
        match r.noise_at(0.25) {
            NoiseParams::Crosstalk { eps_a, eps_b } => {
                assert!((eps_a - 0.01).abs() < 1e-15);
                assert!((eps_b - 0.03).abs() < 1e-15);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn presets_validate_and_round_trip() {
        for p in [Preset::Fig1, Preset::Fig2, Preset::Fig3] {
            let sc = p.scenario();
            sc.resolve().unwrap();
            let text = serde_json::to_string_pretty(&sc).unwrap();
            assert_eq!(parse_scenario(&text).unwrap(), sc);
        }
    }
}
