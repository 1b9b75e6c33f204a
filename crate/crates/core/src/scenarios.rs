//! Declarative experiments.
//!
//! A [`ScenarioConfig`] names a space, a feasible set, an operator pipeline,
//! a starting point and an optional block of expected results. [`run_scenario`]
//! turns it into a [`RunReport`]; [`paper_case`] returns the built-in cases.

use std::path::Path;
use std::time::{Duration, Instant};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    self, displacement_profile, epsilon_fixed_point_search, iterate_orbit, DisplacementProfile,
    EpsilonSearch, OrbitTrace, StopRule,
};
use crate::error::{Error, Result};
use crate::exact::{self, derive_seed, derive_seed_indexed, format_rat, int, parse_rat, Rat};
use crate::geometry::{chebyshev_estimate, GeometryReport};
use crate::l1::{
    l1_distance, validate_membership, FeasibleSetSpec, L1Function, MeasureSpace, Membership,
    Metric,
};
use crate::operators::{
    build_operator_within, check_idempotent, check_nonexpansive, max_deviation, DiagnosticReport,
    Operator, OperatorSpec,
};
use crate::sampling::{on_grid, Probe, Sampler};

pub const DEFAULT_DIAGNOSTIC_SAMPLES: usize = 64;
pub const DEFAULT_GRID: u32 = 100;
pub const DEFAULT_PROFILE_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InitialRepr", into = "InitialRepr")]
pub enum InitialState {
    Explicit(L1Function),
    /// A seeded draw from the feasible set.
    Random,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum InitialRepr {
    Explicit(Vec<String>),
    Keyword(String),
}

impl TryFrom<InitialRepr> for InitialState {
    type Error = Error;

    fn try_from(repr: InitialRepr) -> Result<Self> {
        match repr {
            InitialRepr::Keyword(k) if k == "random" || k == "seeded-random-normalized" => {
                Ok(InitialState::Random)
            }
            InitialRepr::Keyword(k) => Err(Error::Parse(format!(
                "initial must be a value list or \"random\", got {k:?}"
            ))),
            InitialRepr::Explicit(values) => values
                .iter()
                .map(|v| parse_rat(v))
                .collect::<Result<Vec<_>>>()
                .map(|v| InitialState::Explicit(L1Function::new(v))),
        }
    }
}

impl From<InitialState> for InitialRepr {
    fn from(state: InitialState) -> Self {
        match state {
            InitialState::Random => InitialRepr::Keyword("random".into()),
            InitialState::Explicit(f) => {
                InitialRepr::Explicit(f.values().iter().map(format_rat).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Seeded samples per property and stage; 0 disables diagnostics.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplacementConfig {
    /// Scalar spaces: scan multiples of `1/grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<u32>,
    /// Multi-atom spaces: number of seeded samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDisplacement {
    pub x: L1Function,
    #[serde(with = "exact::serde_rat")]
    pub value: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AfppExpectation {
    pub trials: usize,
    #[serde(with = "exact::serde_rat")]
    pub max_at_most: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationExpectation {
    pub p: u64,
    pub q: u64,
    pub budget: u64,
    pub period: u64,
}

/// Expected results. Every present field becomes one pass/fail check.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_prefix: Option<Vec<L1Function>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preperiod: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    /// Final orbit point, also checked directly as `Φ(f) = f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<L1Function>,
    /// Period 1 entered after at most this many steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabilizes_within: Option<usize>,
    /// Final point has equal coordinates, on the quantizer grid if the
    /// pipeline ends with one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_consensus: Option<bool>,
    /// Upper bound on `preperiod + period`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cycle_span: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub point_displacements: Vec<PointDisplacement>,
    #[serde(default, with = "exact::serde_rat_opt", skip_serializing_if = "Option::is_none")]
    pub displacement_min: Option<Rat>,
    #[serde(default, with = "exact::serde_rat_opt", skip_serializing_if = "Option::is_none")]
    pub displacement_max: Option<Rat>,
    /// Tolerances for which the displacement scan must find no ε-fixed point.
    #[serde(default, with = "exact::serde_rat_vec", skip_serializing_if = "Vec::is_empty")]
    pub eps_none: Vec<Rat>,
    /// Tolerances for which the displacement scan must find a witness.
    #[serde(default, with = "exact::serde_rat_vec", skip_serializing_if = "Vec::is_empty")]
    pub eps_found: Vec<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub afpp: Option<AfppExpectation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationExpectation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub space: MeasureSpace,
    pub set: FeasibleSetSpec,
    pub pipeline: OperatorSpec,
    pub initial: InitialState,
    pub metric: Metric,
    pub max_steps: usize,
    pub stop: StopRule,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement: Option<DisplacementConfig>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub geometry: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.set.check(&self.space)?;
        self.metric.require_scalar(&self.space)?;
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if let StopRule::DisplacementBelow { eps } = &self.stop {
            if *eps <= Rat::zero() {
                return Err(Error::Config("stop.eps must be positive".into()));
            }
        }
        if let InitialState::Explicit(f) = &self.initial {
            self.space.check(f).map_err(|e| Error::Config(format!("initial: {e}")))?;
            if let Membership::Invalid(violations) = validate_membership(f, &self.set, &self.space)? {
                let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                return Err(Error::Config(format!(
                    "initial point outside the feasible set: {}",
                    listed.join("; ")
                )));
            }
        }
        if let Some(expected) = &self.expected {
            let points = expected
                .orbit_prefix
                .iter()
                .flatten()
                .chain(&expected.fixed_point)
                .chain(expected.point_displacements.iter().map(|p| &p.x));
            for p in points {
                self.space
                    .check(p)
                    .map_err(|e| Error::Config(format!("expected: {e}")))?;
            }
        }
        build_pipeline(self)?;
        Ok(())
    }

    fn diagnostic_samples(&self) -> usize {
        self.diagnostics
            .as_ref()
            .map_or(DEFAULT_DIAGNOSTIC_SAMPLES, |d| d.samples)
    }

    /// Metric used for per-stage Lipschitz checks. Scalar states in `[0, 1]`
    /// are compared on the circle, where translation is an isometry.
    pub fn diagnostic_metric(&self) -> Metric {
        let in_unit = self.set.lower >= Rat::zero() && self.set.upper <= int(1);
        if self.space.is_scalar() && in_unit {
            Metric::Circle
        } else {
            Metric::L1
        }
    }

    pub fn sampler(&self, tag: &str) -> Sampler {
        Sampler::new(
            self.space.clone(),
            self.set.clone(),
            derive_seed(self.seed, tag.as_bytes()),
        )
    }

    /// Grid or sample set used for displacement scans and ε-searches.
    pub fn displacement_probe(&self) -> Probe {
        let cfg = self.displacement.as_ref();
        if self.space.is_scalar() {
            Probe::ScalarGrid(cfg.and_then(|c| c.grid).unwrap_or(DEFAULT_GRID))
        } else {
            let count = cfg.and_then(|c| c.samples).unwrap_or(DEFAULT_PROFILE_SAMPLES);
            Probe::seeded(self.sampler("displacement"), count)
        }
    }

    pub fn initial_point(&self) -> Result<L1Function> {
        match &self.initial {
            InitialState::Explicit(f) => Ok(f.clone()),
            InitialState::Random => self.sampler("initial").sample(0),
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        if path == "." || path.is_empty() {
            Error::Parse(err.into_inner().to_string())
        } else {
            Error::Parse(format!("field `{path}`: {}", err.into_inner()))
        }
    })?;
    config.validate()?;
    Ok(config)
}

/// Builds the scenario's operator; perturbation stages respect the set's box.
pub fn build_pipeline(config: &ScenarioConfig) -> Result<Operator> {
    build_operator_within(&config.pipeline, &config.space, Some(&config.set))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageDiagnostics {
    pub stage: String,
    pub nonexpansive: DiagnosticReport,
    pub idempotent: DiagnosticReport,
    pub deviation: DiagnosticReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSummary {
    pub steps: usize,
    pub preperiod: Option<usize>,
    pub period: Option<usize>,
    pub final_point: L1Function,
    pub stop: dynamics::StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AfppReport {
    pub fixed_point: Option<L1Function>,
    pub trials: usize,
    #[serde(with = "exact::serde_rat")]
    pub delta: Rat,
    #[serde(with = "exact::serde_rat_opt")]
    pub max_distance: Option<Rat>,
    pub worst_trial: Option<usize>,
    /// Perturbation seed of the worst trial's first perturbation stage.
    pub worst_seed: Option<u64>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            expected: expected.into(),
            actual: actual.into(),
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub stages: Vec<String>,
    pub metric: Metric,
    pub seed: u64,
    pub initial: L1Function,
    pub orbit: OrbitSummary,
    pub diagnostics: Vec<StageDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub displacement: Option<DisplacementProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub afpp: Option<AfppReport>,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Excluded from JSON so reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(skip)]
    pub trace: OrbitTrace,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    let op = build_pipeline(config)?;
    let initial = config.initial_point()?;

    let mut diagnostics = Vec::new();
    let samples = config.diagnostic_samples();
    if samples > 0 {
        let probe = Probe::seeded(config.sampler("diagnostics"), samples);
        let metric = config.diagnostic_metric();
        for stage in op.stages() {
            diagnostics.push(StageDiagnostics {
                stage: stage.describe(),
                nonexpansive: check_nonexpansive(&stage, &probe, metric, &[])?,
                idempotent: check_idempotent(&stage, &probe)?,
                deviation: max_deviation(&stage, &probe, metric, None)?,
            });
        }
    }

    let trace = iterate_orbit(&op, &initial, config.max_steps, &config.stop, config.metric)?;
    let expected = config.expected.clone().unwrap_or_default();

    let wants_profile = config.displacement.is_some()
        || expected.displacement_min.is_some()
        || expected.displacement_max.is_some();
    let displacement = if wants_profile {
        Some(displacement_profile(&op, config.metric, &config.displacement_probe())?)
    } else {
        None
    };

    let geometry = if config.geometry {
        let mut distinct: Vec<L1Function> = Vec::new();
        for p in &trace.points {
            if !distinct.contains(p) {
                distinct.push(p.clone());
            }
        }
        Some(chebyshev_estimate(&distinct, &config.space, &[])?)
    } else {
        None
    };

    let afpp = match &expected.afpp {
        Some(a) => Some(afpp_trial(config, a.trials)?),
        None => None,
    };

    let mut checks = Vec::new();
    evaluate_expected(config, &op, &trace, displacement.as_ref(), afpp.as_ref(), &expected, &mut checks)?;

    let passed = checks.iter().all(|c| c.passed);
    Ok(RunReport {
        scenario: config.name.clone(),
        stages: op.stage_labels(),
        metric: config.metric,
        seed: config.seed,
        initial,
        orbit: OrbitSummary {
            steps: trace.steps(),
            preperiod: trace.preperiod(),
            period: trace.period(),
            final_point: trace.last().clone(),
            stop: trace.stop,
        },
        diagnostics,
        displacement,
        geometry,
        afpp,
        checks,
        passed,
        wall_time: started.elapsed(),
        trace,
    })
}

fn evaluate_expected(
    config: &ScenarioConfig,
    op: &Operator,
    trace: &OrbitTrace,
    displacement: Option<&DisplacementProfile>,
    afpp: Option<&AfppReport>,
    expected: &Expected,
    checks: &mut Vec<Check>,
) -> Result<()> {
    if let Some(prefix) = &expected.orbit_prefix {
        let actual = &trace.points[..prefix.len().min(trace.points.len())];
        let show = |pts: &[L1Function]| pts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
        checks.push(Check::new("orbit_prefix", show(prefix), show(actual), actual == prefix.as_slice()));
    }
    if let Some(pre) = expected.preperiod {
        checks.push(Check::new(
            "preperiod",
            pre.to_string(),
            fmt_opt(trace.preperiod()),
            trace.preperiod() == Some(pre),
        ));
    }
    if let Some(period) = expected.period {
        checks.push(Check::new(
            "period",
            period.to_string(),
            fmt_opt(trace.period()),
            trace.period() == Some(period),
        ));
    }
    if let Some(fp) = &expected.fixed_point {
        let reached = trace.fixed_point();
        checks.push(Check::new(
            "fixed_point",
            fp.to_string(),
            reached.map_or_else(|| "none".to_string(), |p| p.to_string()),
            reached == Some(fp),
        ));
        let image = op.apply(fp)?;
        checks.push(Check::new(
            "fixed_point_direct",
            fp.to_string(),
            image.to_string(),
            image == *fp,
        ));
    }
    if let Some(within) = expected.stabilizes_within {
        let ok = trace.period() == Some(1) && trace.preperiod().is_some_and(|p| p <= within);
        checks.push(Check::new(
            "stabilizes_within",
            format!("period 1 by step {within}"),
            format!("preperiod {} period {}", fmt_opt(trace.preperiod()), fmt_opt(trace.period())),
            ok,
        ));
    }
    if let Some(want) = expected.constant_consensus {
        let last = trace.last();
        let on_quantizer_grid = op.final_grid_step().is_none_or(|step| on_grid(last, step));
        let is_consensus = trace.period() == Some(1) && last.is_constant() && on_quantizer_grid;
        checks.push(Check::new(
            "constant_consensus",
            want.to_string(),
            format!("{is_consensus} at {last}"),
            is_consensus == want,
        ));
    }
    if let Some(span) = expected.max_cycle_span {
        let actual = trace.cycle.map(|c| c.preperiod + c.period);
        checks.push(Check::new(
            "max_cycle_span",
            format!("<= {span}"),
            fmt_opt(actual),
            actual.is_some_and(|a| a <= span),
        ));
    }
    for pd in &expected.point_displacements {
        let d = config.metric.distance(&op.apply(&pd.x)?, &pd.x, op.space())?;
        checks.push(Check::new(
            format!("displacement at {}", pd.x),
            format_rat(&pd.value),
            format_rat(&d),
            d == pd.value,
        ));
    }
    if let Some(min) = &expected.displacement_min {
        let actual = displacement.map(|p| &p.min_value);
        checks.push(Check::new(
            "displacement_min",
            format_rat(min),
            actual.map_or_else(|| "none".into(), format_rat),
            actual == Some(min),
        ));
    }
    if let Some(max) = &expected.displacement_max {
        let actual = displacement.map(|p| &p.max_value);
        checks.push(Check::new(
            "displacement_max",
            format_rat(max),
            actual.map_or_else(|| "none".into(), format_rat),
            actual == Some(max),
        ));
    }
    let probe = config.displacement_probe();
    for (eps, want_found) in expected
        .eps_none
        .iter()
        .map(|e| (e, false))
        .chain(expected.eps_found.iter().map(|e| (e, true)))
    {
        let result = epsilon_fixed_point_search(op, config.metric, eps, &probe)?;
        let actual = match &result {
            EpsilonSearch::Found { point, displacement } => {
                format!("found {point} (displacement {})", format_rat(displacement))
            }
            EpsilonSearch::None { searched } => format!("none among {searched}"),
        };
        checks.push(Check::new(
            format!("eps_fixed_point({})", format_rat(eps)),
            if want_found { "found" } else { "none" },
            actual,
            result.is_found() == want_found,
        ));
    }
    if let (Some(want), Some(report)) = (&expected.afpp, afpp) {
        let ok = report.passed
            && report.trials == want.trials
            && report.max_distance.as_ref().is_some_and(|m| *m <= want.max_at_most);
        checks.push(Check::new(
            "afpp_max_distance",
            format!("<= {} over {} trials", format_rat(&want.max_at_most), want.trials),
            report
                .max_distance
                .as_ref()
                .map_or_else(|| report.note.clone().unwrap_or_default(), format_rat),
            ok,
        ));
    }
    if let Some(rot) = &expected.rotation {
        let got = dynamics::rotation_period(rot.p, rot.q, rot.budget)?;
        checks.push(Check::new(
            format!("rotation_period({}/{})", rot.p, rot.q),
            rot.period.to_string(),
            got.map_or_else(|| "none".into(), |g| g.to_string()),
            got == Some(rot.period),
        ));
    }
    Ok(())
}

/// Evaluates `‖Φ̂(f★) − f★‖₁` over `trials` reseedings of the perturbation
/// stages, where `f★` is the fixed point the unperturbed pipeline reaches from
/// the scenario's initial point.
pub fn afpp_trial(config: &ScenarioConfig, trials: usize) -> Result<AfppReport> {
    let perturbations: Vec<(Rat, u64)> = config
        .pipeline
        .leaves()
        .into_iter()
        .filter_map(|s| match s {
            OperatorSpec::Perturbation { delta, seed } => Some((delta.clone(), *seed)),
            _ => None,
        })
        .collect();
    if perturbations.is_empty() {
        return Err(Error::Config(format!(
            "scenario {:?} has no perturbation stage",
            config.name
        )));
    }
    let delta: Rat = perturbations.iter().map(|(d, _)| d).sum();

    let base = build_operator_within(&config.pipeline.without_perturbation(), &config.space, Some(&config.set))?;
    let start = config.initial_point()?;
    let trace = iterate_orbit(&base, &start, config.max_steps, &StopRule::ExactRepeat, Metric::L1)?;
    let Some(fixed) = trace.fixed_point().cloned() else {
        return Ok(AfppReport {
            fixed_point: None,
            trials,
            delta,
            max_distance: None,
            worst_trial: None,
            worst_seed: None,
            passed: false,
            note: Some(format!(
                "unperturbed pipeline reached no fixed point within {} steps",
                config.max_steps
            )),
        });
    };

    let mut worst: Option<(Rat, usize, u64)> = None;
    for trial in 0..trials {
        let mut spec = config.pipeline.clone();
        let mut first_seed = None;
        spec.for_each_leaf_mut(&mut |leaf| {
            if let OperatorSpec::Perturbation { seed, .. } = leaf {
                *seed = derive_seed_indexed(*seed, trial as u64);
                first_seed.get_or_insert(*seed);
            }
        });
        let perturbed = build_operator_within(&spec, &config.space, Some(&config.set))?;
        let d = l1_distance(&perturbed.apply(&fixed)?, &fixed, &config.space)?;
        if worst.as_ref().is_none_or(|(w, _, _)| d > *w) {
            worst = Some((d, trial, first_seed.unwrap_or_default()));
        }
    }
    let (max_distance, worst_trial, worst_seed) = match worst {
        Some((d, t, s)) => (Some(d), Some(t), Some(s)),
        None => (Some(Rat::zero()), None, None),
    };
    let passed = max_distance.as_ref().is_some_and(|m| *m <= delta);
    Ok(AfppReport {
        fixed_point: Some(fixed),
        trials,
        delta,
        max_distance,
        worst_trial,
        worst_seed,
        passed,
        note: None,
    })
}

pub const PAPER_CASES: [&str; 9] = [
    "table1-orbit",
    "translation-thresholds",
    "translation-circle-bounds",
    "hitl-two-point",
    "hitl-four-point",
    "ce-four-point",
    "afpp-perturbation",
    "rational-rotation",
    "pigeonhole-bound",
];

fn rat(text: &str) -> Rat {
    parse_rat(text).expect("built-in literal")
}

fn point(texts: &[&str]) -> L1Function {
    L1Function::parse(texts).expect("built-in literal")
}

fn scalar_case(name: &str, pipeline: OperatorSpec, metric: Metric, expected: Expected) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        space: MeasureSpace::counting(1).expect("one atom"),
        set: FeasibleSetSpec::unit_box(),
        pipeline,
        initial: InitialState::Explicit(point(&["0"])),
        metric,
        max_steps: 100,
        stop: StopRule::ExactRepeat,
        seed: 42,
        diagnostics: None,
        displacement: None,
        geometry: false,
        expected: Some(expected),
    }
}

fn quantized_translation(d: &str) -> OperatorSpec {
    OperatorSpec::composite(vec![
        OperatorSpec::translation(rat(d)),
        OperatorSpec::grid(rat("0.1")),
    ])
}

fn hitl(coarsener: OperatorSpec) -> OperatorSpec {
    OperatorSpec::composite(vec![
        OperatorSpec::Averaging,
        OperatorSpec::clip(int(0), int(1)),
        coarsener,
    ])
}

fn multi_atom_case(name: &str, atoms: usize, mass: Rat, pipeline: OperatorSpec, initial: InitialState) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        space: MeasureSpace::counting(atoms).expect("positive atom count"),
        set: FeasibleSetSpec::unit_box().with_mass(mass),
        pipeline,
        initial,
        metric: Metric::L1,
        max_steps: 50,
        stop: StopRule::ExactRepeat,
        seed: 42,
        diagnostics: None,
        displacement: None,
        geometry: false,
        expected: None,
    }
}

/// Built-in scenarios whose expected blocks hold the reference numbers.
pub fn paper_case(name: &str) -> Result<ScenarioConfig> {
    let config = match name {
        "table1-orbit" => {
            let mut c = scalar_case(
                name,
                quantized_translation("0.6"),
                Metric::Line,
                Expected {
                    orbit_prefix: Some(
                        ["0.0", "0.6", "0.2", "0.8", "0.4", "0.0"].iter().map(|v| point(&[v])).collect(),
                    ),
                    preperiod: Some(0),
                    period: Some(5),
                    ..Expected::default()
                },
            );
            c.geometry = true;
            c
        }
        "translation-thresholds" => scalar_case(
            name,
            quantized_translation("0.6"),
            Metric::Line,
            Expected {
                point_displacements: vec![
                    PointDisplacement {
                        x: point(&["0.25"]),
                        value: rat("0.55"),
                    },
                    PointDisplacement {
                        x: point(&["0.35"]),
                        value: rat("0.65"),
                    },
                ],
                ..Expected::default()
            },
        ),
        "translation-circle-bounds" => {
            let mut c = scalar_case(
                name,
                quantized_translation("0.6"),
                Metric::Circle,
                Expected {
                    displacement_min: Some(rat("0.35")),
                    displacement_max: Some(rat("0.45")),
                    eps_none: vec![rat("0.3")],
                    eps_found: vec![rat("0.4")],
                    ..Expected::default()
                },
            );
            c.displacement = Some(DisplacementConfig {
                grid: Some(100),
                samples: None,
            });
            c
        }
        "hitl-two-point" => {
            let mut c = multi_atom_case(
                name,
                2,
                int(1),
                hitl(OperatorSpec::grid(rat("0.1"))),
                InitialState::Explicit(point(&["0.8", "0.2"])),
            );
            c.expected = Some(Expected {
                orbit_prefix: Some(vec![
                    point(&["0.8", "0.2"]),
                    point(&["0.5", "0.5"]),
                    point(&["0.5", "0.5"]),
                ]),
                preperiod: Some(1),
                period: Some(1),
                fixed_point: Some(point(&["0.5", "0.5"])),
                ..Expected::default()
            });
            c
        }
        "hitl-four-point" => {
            let mut c = multi_atom_case(name, 4, int(2), hitl(OperatorSpec::grid(rat("0.1"))), InitialState::Random);
            c.expected = Some(Expected {
                stabilizes_within: Some(5),
                constant_consensus: Some(true),
                ..Expected::default()
            });
            c
        }
        "ce-four-point" => {
            let mut c = multi_atom_case(
                name,
                4,
                int(2),
                hitl(OperatorSpec::cond_exp(vec![vec![0, 1], vec![2, 3]])),
                InitialState::Random,
            );
            c.expected = Some(Expected {
                fixed_point: Some(L1Function::constant(4, exact::ratio(1, 2))),
                stabilizes_within: Some(5),
                ..Expected::default()
            });
            c
        }
        "afpp-perturbation" => {
            let mut c = multi_atom_case(
                name,
                2,
                int(1),
                OperatorSpec::composite(vec![
                    OperatorSpec::Averaging,
                    OperatorSpec::clip(int(0), int(1)),
                    OperatorSpec::grid(rat("0.1")),
                    OperatorSpec::perturbation(rat("0.05"), 7),
                ]),
                InitialState::Explicit(point(&["0.8", "0.2"])),
            );
            c.max_steps = 10;
            c.expected = Some(Expected {
                afpp: Some(AfppExpectation {
                    trials: 1000,
                    max_at_most: rat("0.05"),
                }),
                ..Expected::default()
            });
            c
        }
        "rational-rotation" => scalar_case(
            name,
            OperatorSpec::translation(rat("3/10")),
            Metric::Circle,
            Expected {
                preperiod: Some(0),
                period: Some(10),
                rotation: Some(RotationExpectation {
                    p: 3,
                    q: 10,
                    budget: 10_000,
                    period: 10,
                }),
                ..Expected::default()
            },
        ),
        "pigeonhole-bound" => scalar_case(
            name,
            quantized_translation("0.7"),
            Metric::Circle,
            Expected {
                max_cycle_span: Some(dynamics::quantizer_range_size(&rat("0.1")) + 1),
                ..Expected::default()
            },
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown case {other:?}; valid cases: {}",
                PAPER_CASES.join(", ")
            )))
        }
    };
    Ok(config)
}
