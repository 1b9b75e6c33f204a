//! Operator specifications, their executable form, and sample-based
//! certification of Lipschitz, idempotence and deviation properties.
//!
//! An [`OperatorSpec`] is the declarative description found in scenario
//! files. [`build_operator`] validates it against a [`MeasureSpace`] and
//! returns an [`Operator`], which is a flat list of stages applied left to
//! right. Composite specs are flattened during the build.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, derive_seed, format_rat, frac_part, ratio, Rat};
use crate::l1::{l1_norm, FeasibleSetSpec, L1Function, MeasureSpace, Metric};
use crate::sampling::Probe;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    HalfEven,
    HalfUp,
}

impl TieBreak {
    fn is_default(&self) -> bool {
        *self == TieBreak::HalfEven
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `x ↦ x + d (mod 1)` on a one-atom space.
    Translation {
        #[serde(with = "exact::serde_rat")]
        d: Rat,
    },
    /// Every coordinate replaced by the mass-weighted mean.
    Averaging,
    /// Pointwise clamp into `[lower, upper]`.
    Clip {
        #[serde(with = "exact::serde_rat")]
        lower: Rat,
        #[serde(with = "exact::serde_rat")]
        upper: Rat,
    },
    /// Mass-weighted averaging within each block of a partition of the atoms.
    CondExp { blocks: Vec<Vec<usize>> },
    /// Coordinatewise rounding to the nearest multiple of `step`.
    GridQuantizer {
        #[serde(with = "exact::serde_rat")]
        step: Rat,
        #[serde(default, skip_serializing_if = "TieBreak::is_default")]
        tie: TieBreak,
    },
    /// `f ↦ f + R(f)` with a seeded bounded residual, ‖R(f)‖₁ ≤ delta.
    Perturbation {
        #[serde(with = "exact::serde_rat")]
        delta: Rat,
        seed: u64,
    },
    Composite { stages: Vec<OperatorSpec> },
}

impl OperatorSpec {
    pub fn translation(d: Rat) -> Self {
        OperatorSpec::Translation { d }
    }

    pub fn clip(lower: Rat, upper: Rat) -> Self {
        OperatorSpec::Clip { lower, upper }
    }

    pub fn grid(step: Rat) -> Self {
        OperatorSpec::GridQuantizer {
            step,
            tie: TieBreak::HalfEven,
        }
    }

    pub fn cond_exp(blocks: Vec<Vec<usize>>) -> Self {
        OperatorSpec::CondExp { blocks }
    }

    pub fn perturbation(delta: Rat, seed: u64) -> Self {
        OperatorSpec::Perturbation { delta, seed }
    }

    pub fn composite(stages: Vec<OperatorSpec>) -> Self {
        OperatorSpec::Composite { stages }
    }

    pub fn identity() -> Self {
        OperatorSpec::Composite { stages: Vec::new() }
    }

    /// Visits every non-composite stage mutably.
    pub fn for_each_leaf_mut(&mut self, visit: &mut dyn FnMut(&mut OperatorSpec)) {
        match self {
            OperatorSpec::Composite { stages } => {
                for s in stages {
                    s.for_each_leaf_mut(visit);
                }
            }
            leaf => visit(leaf),
        }
    }

    pub fn leaves(&self) -> Vec<&OperatorSpec> {
        match self {
            OperatorSpec::Composite { stages } => stages.iter().flat_map(|s| s.leaves()).collect(),
            leaf => vec![leaf],
        }
    }

    /// The same pipeline with every perturbation stage dropped.
    pub fn without_perturbation(&self) -> Self {
        match self {
            OperatorSpec::Composite { stages } => OperatorSpec::Composite {
                stages: stages
                    .iter()
                    .filter(|s| !matches!(s, OperatorSpec::Perturbation { .. }))
                    .map(|s| s.without_perturbation())
                    .collect(),
            },
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Stage {
    Translation {
        d: Rat,
    },
    CondExp {
        blocks: Vec<Vec<usize>>,
        averaging: bool,
    },
    Clip {
        lower: Rat,
        upper: Rat,
    },
    Grid {
        step: Rat,
        tie: TieBreak,
    },
    Perturbation {
        delta: Rat,
        seed: u64,
        bounds: Option<(Rat, Rat)>,
    },
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Translation { d } => write!(f, "translation(d={})", format_rat(d)),
            Stage::CondExp { averaging: true, .. } => f.write_str("averaging"),
            Stage::CondExp { blocks, .. } => write!(f, "cond_exp(blocks={blocks:?})"),
            Stage::Clip { lower, upper } => {
                write!(f, "clip[{}, {}]", format_rat(lower), format_rat(upper))
            }
            Stage::Grid { step, tie } => match tie {
                TieBreak::HalfEven => write!(f, "grid_quantizer(step={})", format_rat(step)),
                TieBreak::HalfUp => {
                    write!(f, "grid_quantizer(step={}, half_up)", format_rat(step))
                }
            },
            Stage::Perturbation { delta, seed, .. } => {
                write!(f, "perturbation(delta={}, seed={seed})", format_rat(delta))
            }
        }
    }
}

/// Executable operator bound to a measure space. Stages run left to right;
/// an operator with no stages is the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    space: MeasureSpace,
    stages: Vec<Stage>,
}

pub fn build_operator(spec: &OperatorSpec, space: &MeasureSpace) -> Result<Operator> {
    build_operator_within(spec, space, None)
}

/// Like [`build_operator`], but perturbation stages keep their output inside
/// the pointwise bounds of `set`.
pub fn build_operator_within(
    spec: &OperatorSpec,
    space: &MeasureSpace,
    set: Option<&FeasibleSetSpec>,
) -> Result<Operator> {
    let mut stages = Vec::new();
    push_stages(spec, space, set, &mut stages)?;
    Ok(Operator {
        space: space.clone(),
        stages,
    })
}

fn push_stages(
    spec: &OperatorSpec,
    space: &MeasureSpace,
    set: Option<&FeasibleSetSpec>,
    out: &mut Vec<Stage>,
) -> Result<()> {
    let n = space.len();
    let stage = match spec {
        OperatorSpec::Composite { stages } => {
            for s in stages {
                push_stages(s, space, set, out)?;
            }
            return Ok(());
        }
        OperatorSpec::Translation { d } => {
            if !space.is_scalar() {
                return Err(Error::Config(format!(
                    "translation needs a one-atom space, got {n} atoms"
                )));
            }
            if !d.is_positive() || *d >= Rat::from_integer(1.into()) {
                return Err(Error::Config(format!(
                    "translation distance {} outside (0, 1)",
                    format_rat(d)
                )));
            }
            Stage::Translation { d: d.clone() }
        }
        OperatorSpec::Averaging => Stage::CondExp {
            blocks: vec![(0..n).collect()],
            averaging: true,
        },
        OperatorSpec::Clip { lower, upper } => {
            if lower > upper {
                return Err(Error::Config(format!(
                    "clip lower {} exceeds upper {}",
                    format_rat(lower),
                    format_rat(upper)
                )));
            }
            Stage::Clip {
                lower: lower.clone(),
                upper: upper.clone(),
            }
        }
        OperatorSpec::CondExp { blocks } => {
            check_partition(blocks, n)?;
            Stage::CondExp {
                blocks: blocks.clone(),
                averaging: false,
            }
        }
        OperatorSpec::GridQuantizer { step, tie } => {
            if !step.is_positive() {
                return Err(Error::Config(format!(
                    "quantizer step {} must be positive",
                    format_rat(step)
                )));
            }
            Stage::Grid {
                step: step.clone(),
                tie: *tie,
            }
        }
        OperatorSpec::Perturbation { delta, seed } => {
            if delta.is_negative() {
                return Err(Error::Config(format!(
                    "perturbation delta {} must be nonnegative",
                    format_rat(delta)
                )));
            }
            Stage::Perturbation {
                delta: delta.clone(),
                seed: *seed,
                bounds: set.map(|s| (s.lower.clone(), s.upper.clone())),
            }
        }
    };
    out.push(stage);
    Ok(())
}

fn check_partition(blocks: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = BTreeSet::new();
    for block in blocks {
        if block.is_empty() {
            return Err(Error::Config("partition contains an empty block".into()));
        }
        for &i in block {
            if i >= n {
                return Err(Error::Config(format!(
                    "partition index {i} out of range for {n} atoms"
                )));
            }
            if !seen.insert(i) {
                return Err(Error::Config(format!("atom {i} appears in two blocks")));
            }
        }
    }
    if seen.len() != n {
        let missing: Vec<usize> = (0..n).filter(|i| !seen.contains(i)).collect();
        return Err(Error::Config(format!("partition misses atoms {missing:?}")));
    }
    Ok(())
}

/// Composes operators in application order: `compose([A, B, C])` applies A first.
pub fn compose(ops: &[Operator]) -> Result<Operator> {
    let Some(first) = ops.first() else {
        return Err(Error::Structure("cannot compose an empty operator list".into()));
    };
    let mut stages = Vec::new();
    for op in ops {
        if op.space != first.space {
            return Err(Error::Structure("operators live on different spaces".into()));
        }
        stages.extend(op.stages.iter().cloned());
    }
    Ok(Operator {
        space: first.space.clone(),
        stages,
    })
}

impl Operator {
    pub fn identity(space: &MeasureSpace) -> Self {
        Self {
            space: space.clone(),
            stages: Vec::new(),
        }
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Each stage as a standalone operator, in application order.
    pub fn stages(&self) -> Vec<Operator> {
        self.stages
            .iter()
            .map(|s| Operator {
                space: self.space.clone(),
                stages: vec![s.clone()],
            })
            .collect()
    }

    /// Splits off the last stage: `(everything before, last)`.
    pub fn split_last(&self) -> Option<(Operator, Operator)> {
        let (last, init) = self.stages.split_last()?;
        Some((
            Operator {
                space: self.space.clone(),
                stages: init.to_vec(),
            },
            Operator {
                space: self.space.clone(),
                stages: vec![last.clone()],
            },
        ))
    }

    pub fn stage_labels(&self) -> Vec<String> {
        self.stages.iter().map(|s| s.to_string()).collect()
    }

    /// Quantizer step when the final stage is a grid quantizer.
    pub fn final_grid_step(&self) -> Option<&Rat> {
        match self.stages.last() {
            Some(Stage::Grid { step, .. }) => Some(step),
            _ => None,
        }
    }

    pub fn apply(&self, f: &L1Function) -> Result<L1Function> {
        self.space.check(f)?;
        let mut current = f.clone();
        for stage in &self.stages {
            current = self.apply_stage(stage, current);
        }
        Ok(current)
    }

    fn apply_stage(&self, stage: &Stage, f: L1Function) -> L1Function {
        match stage {
            Stage::Translation { d } => {
                L1Function::new(f.values().iter().map(|x| frac_part(&(x + d))).collect())
            }
            Stage::CondExp { blocks, .. } => {
                let weights: Vec<&Rat> = self.space.weights().collect();
                let mut out = f.values().to_vec();
                for block in blocks {
                    let mass: Rat = block.iter().map(|&i| weights[i]).sum();
                    let integral: Rat = block.iter().map(|&i| weights[i] * &f.values()[i]).sum();
                    let mean = integral / mass;
                    for &i in block {
                        out[i] = mean.clone();
                    }
                }
                L1Function::new(out)
            }
            Stage::Clip { lower, upper } => L1Function::new(
                f.into_values()
                    .into_iter()
                    .map(|v| v.max(lower.clone()).min(upper.clone()))
                    .collect(),
            ),
            Stage::Grid { step, tie } => L1Function::new(
                f.values()
                    .iter()
                    .map(|v| {
                        let units = v / step;
                        let k = match tie {
                            TieBreak::HalfEven => exact::round_half_even(&units),
                            TieBreak::HalfUp => exact::round_half_up(&units),
                        };
                        Rat::from_integer(k) * step
                    })
                    .collect(),
            ),
            Stage::Perturbation {
                delta,
                seed,
                bounds,
            } => {
                let residual = perturbation_residual(&self.space, &f, delta, *seed, bounds.as_ref());
                L1Function::new(
                    f.values()
                        .iter()
                        .zip(residual)
                        .map(|(v, r)| v + r)
                        .collect(),
                )
            }
        }
    }

    pub fn describe(&self) -> String {
        if self.stages.is_empty() {
            "identity".to_string()
        } else {
            self.stage_labels().join(" -> ")
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

const DIRECTION_LEVELS: i64 = 1 << 20;

/// Seeded residual with ‖R(f)‖₁ = delta before clipping and ≤ delta after.
/// The direction depends only on `(f, seed)`. When `bounds` is set, each
/// coordinate is shrunk so that `f + R(f)` stays inside the box.
fn perturbation_residual(
    space: &MeasureSpace,
    f: &L1Function,
    delta: &Rat,
    seed: u64,
    bounds: Option<&(Rat, Rat)>,
) -> Vec<Rat> {
    let zero = || vec![Rat::zero(); f.len()];
    if delta.is_zero() {
        return zero();
    }
    let tag: String = f.values().iter().map(|v| format!("{v};")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tag.as_bytes()));
    let direction: Vec<Rat> = (0..f.len())
        .map(|_| ratio(rng.random_range(-DIRECTION_LEVELS..=DIRECTION_LEVELS), DIRECTION_LEVELS))
        .collect();
    let norm: Rat = space
        .weights()
        .zip(&direction)
        .map(|(w, r)| w * r.abs())
        .sum();
    if norm.is_zero() {
        return zero();
    }
    let scale = delta / norm;
    direction
        .into_iter()
        .zip(f.values())
        .map(|(r, v)| {
            let r = r * &scale;
            match bounds {
                None => r,
                Some((lo, hi)) if v >= lo && v <= hi => {
                    let moved = (v + &r).max(lo.clone()).min(hi.clone());
                    moved - v
                }
                Some(_) => Rat::zero(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Nonexpansive,
    Idempotent,
    Deviation,
    Perturbation,
    Linearity,
    MassPreservation,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Nonexpansive => "nonexpansive",
            Property::Idempotent => "idempotent",
            Property::Deviation => "deviation",
            Property::Perturbation => "perturbation",
            Property::Linearity => "linearity",
            Property::MassPreservation => "mass_preservation",
        })
    }
}

/// Evidence gathered by one property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub property: Property,
    pub operator: String,
    pub metric: Metric,
    pub samples_used: usize,
    /// Samples skipped: zero-distance pairs, or signed points in a mass check.
    pub skipped_zero: usize,
    /// Largest output/input distance ratio; `None` when every pair was skipped.
    #[serde(with = "exact::serde_rat_opt")]
    pub worst_ratio: Option<Rat>,
    #[serde(with = "exact::serde_rat_opt")]
    pub worst_excess: Option<Rat>,
    pub worst_pair: Option<(L1Function, L1Function)>,
    #[serde(with = "exact::serde_rat_opt")]
    pub max_deviation: Option<Rat>,
    #[serde(with = "exact::serde_rat_opt")]
    pub max_coordinate_deviation: Option<Rat>,
    /// Point attaining the deviation maximum, or the first failing sample.
    pub witness: Option<L1Function>,
    #[serde(with = "exact::serde_rat_opt")]
    pub bound: Option<Rat>,
    pub failures: usize,
    pub passed: bool,
}

impl DiagnosticReport {
    fn new(property: Property, op: &Operator, metric: Metric) -> Self {
        Self {
            property,
            operator: op.describe(),
            metric,
            samples_used: 0,
            skipped_zero: 0,
            worst_ratio: None,
            worst_excess: None,
            worst_pair: None,
            max_deviation: None,
            max_coordinate_deviation: None,
            witness: None,
            bound: None,
            failures: 0,
            passed: true,
        }
    }

    pub fn summary(&self) -> String {
        let mut parts = vec![format!(
            "{} [{}] {}: samples={}",
            self.property,
            self.metric,
            if self.passed { "PASS" } else { "FAIL" },
            self.samples_used
        )];
        let show = |name: &str, v: &Option<Rat>| v.as_ref().map(|v| format!("{name}={}", format_rat(v)));
        parts.extend(show("worst_ratio", &self.worst_ratio));
        parts.extend(show("worst_excess", &self.worst_excess));
        parts.extend(show("max_deviation", &self.max_deviation));
        parts.extend(show("max_coord_deviation", &self.max_coordinate_deviation));
        parts.extend(show("bound", &self.bound));
        if self.skipped_zero > 0 {
            parts.push(format!("skipped_zero={}", self.skipped_zero));
        }
        if let Some((f, g)) = &self.worst_pair {
            parts.push(format!("worst_pair={f} {g}"));
        }
        parts.join(" ")
    }
}

fn max_in(slot: &mut Option<Rat>, value: &Rat) -> bool {
    if slot.as_ref().is_none_or(|m| value > m) {
        *slot = Some(value.clone());
        true
    } else {
        false
    }
}

/// Worst ratio `dist(Tf, Tg) / dist(f, g)` over the probe's pairs plus the
/// explicit `witnesses`; passes iff it never exceeds 1.
pub fn check_nonexpansive(
    op: &Operator,
    probe: &Probe,
    metric: Metric,
    witnesses: &[(L1Function, L1Function)],
) -> Result<DiagnosticReport> {
    metric.require_scalar(op.space())?;
    let mut report = DiagnosticReport::new(Property::Nonexpansive, op, metric);
    report.bound = Some(Rat::from_integer(1.into()));
    let space = op.space();
    let mut pairs = witnesses.to_vec();
    pairs.extend(probe.pairs()?);
    for (f, g) in pairs {
        report.samples_used += 1;
        let input = metric.distance(&f, &g, space)?;
        if input.is_zero() {
            report.skipped_zero += 1;
            continue;
        }
        let output = metric.distance(&op.apply(&f)?, &op.apply(&g)?, space)?;
        let ratio = output / input;
        if ratio > Rat::from_integer(1.into()) {
            report.failures += 1;
        }
        if max_in(&mut report.worst_ratio, &ratio) {
            report.worst_pair = Some((f, g));
        }
    }
    report.passed = report.failures == 0;
    Ok(report)
}

/// Passes iff `T(T(f)) = T(f)` exactly on every sample.
pub fn check_idempotent(op: &Operator, probe: &Probe) -> Result<DiagnosticReport> {
    let mut report = DiagnosticReport::new(Property::Idempotent, op, Metric::L1);
    for f in probe.points()? {
        report.samples_used += 1;
        let once = op.apply(&f)?;
        let twice = op.apply(&once)?;
        if once != twice {
            report.failures += 1;
            if report.witness.is_none() {
                report.witness = Some(f);
            }
        }
    }
    report.passed = report.failures == 0;
    Ok(report)
}

/// Largest `dist(T(f), f)` and largest single-coordinate `|T(f)ᵢ − fᵢ|` over
/// the samples. With `bound`, passes iff the distance never exceeds it.
pub fn max_deviation(
    op: &Operator,
    probe: &Probe,
    metric: Metric,
    bound: Option<&Rat>,
) -> Result<DiagnosticReport> {
    metric.require_scalar(op.space())?;
    let mut report = DiagnosticReport::new(Property::Deviation, op, metric);
    report.bound = bound.cloned();
    let mut worst = Some(Rat::zero());
    let mut worst_coord = Some(Rat::zero());
    for f in probe.points()? {
        report.samples_used += 1;
        let image = op.apply(&f)?;
        let dev = metric.distance(&image, &f, op.space())?;
        if bound.is_some_and(|b| dev > *b) {
            report.failures += 1;
        }
        if max_in(&mut worst, &dev) && !dev.is_zero() {
            report.witness = Some(f.clone());
        }
        for (a, b) in image.values().iter().zip(f.values()) {
            max_in(&mut worst_coord, &(a - b).abs());
        }
    }
    report.max_deviation = worst;
    report.max_coordinate_deviation = worst_coord;
    report.passed = report.failures == 0;
    Ok(report)
}

/// Checks `dist(q(t(f)), q(t(g))) ≤ dist(f, g) + 2δ` on every pair.
pub fn perturbation_estimate(
    t: &Operator,
    q: &Operator,
    probe: &Probe,
    metric: Metric,
    delta: &Rat,
) -> Result<DiagnosticReport> {
    let qt = compose(&[t.clone(), q.clone()])?;
    metric.require_scalar(qt.space())?;
    let mut report = DiagnosticReport::new(Property::Perturbation, &qt, metric);
    let slack = delta * Rat::from_integer(2.into());
    report.bound = Some(slack.clone());
    for (f, g) in probe.pairs()? {
        report.samples_used += 1;
        let input = metric.distance(&f, &g, qt.space())?;
        let output = metric.distance(&qt.apply(&f)?, &qt.apply(&g)?, qt.space())?;
        let excess = output - input;
        if excess > slack {
            report.failures += 1;
        }
        if max_in(&mut report.worst_excess, &excess) {
            report.worst_pair = Some((f, g));
        }
    }
    report.passed = report.failures == 0;
    Ok(report)
}

/// Checks `T(af + bg) = a·T(f) + b·T(g)` exactly, with seeded coefficients
/// taken from the probe's sampler (or fixed `(1/2, -3/2)` for point lists).
pub fn check_linearity(op: &Operator, probe: &Probe) -> Result<DiagnosticReport> {
    let mut report = DiagnosticReport::new(Property::Linearity, op, Metric::L1);
    for (i, (f, g)) in probe.pairs()?.into_iter().enumerate() {
        report.samples_used += 1;
        let (a, b) = match probe {
            Probe::Seeded { sampler, .. } => {
                (sampler.coefficient(2 * i as u64), sampler.coefficient(2 * i as u64 + 1))
            }
            _ => (ratio(1, 2), ratio(-3, 2)),
        };
        let mixed = f.scale(&a).add(&g.scale(&b))?;
        let lhs = op.apply(&mixed)?;
        let rhs = op.apply(&f)?.scale(&a).add(&op.apply(&g)?.scale(&b))?;
        if lhs != rhs {
            report.failures += 1;
            if report.worst_pair.is_none() {
                report.worst_pair = Some((f, g));
            }
        }
    }
    report.passed = report.failures == 0;
    Ok(report)
}

/// Checks `‖T(f)‖₁ = ‖f‖₁` on the nonnegative samples.
pub fn check_mass_preservation(op: &Operator, probe: &Probe) -> Result<DiagnosticReport> {
    let mut report = DiagnosticReport::new(Property::MassPreservation, op, Metric::L1);
    for f in probe.points()? {
        if f.values().iter().any(|v| v.is_negative()) {
            report.skipped_zero += 1;
            continue;
        }
        report.samples_used += 1;
        let before = l1_norm(&f, op.space())?;
        let after = l1_norm(&op.apply(&f)?, op.space())?;
        let drift = (after - before).abs();
        max_in(&mut report.max_deviation, &drift);
        if !drift.is_zero() {
            report.failures += 1;
            if report.witness.is_none() {
                report.witness = Some(f);
            }
        }
    }
    report.passed = report.failures == 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, parse_rat};
    use crate::sampling::{scalar_grid, Sampler};

    fn r(text: &str) -> Rat {
        parse_rat(text).unwrap()
    }

    fn f(texts: &[&str]) -> L1Function {
        L1Function::parse(texts).unwrap()
    }

    fn scalar() -> MeasureSpace {
        MeasureSpace::counting(1).unwrap()
    }

    fn hitl_spec() -> OperatorSpec {
        OperatorSpec::composite(vec![
            OperatorSpec::Averaging,
            OperatorSpec::clip(int(0), int(1)),
            OperatorSpec::grid(r("0.1")),
        ])
    }

    #[test]
    fn build_examples() {
        let t = build_operator(&OperatorSpec::translation(r("3/5")), &scalar()).unwrap();
        assert_eq!(t.apply(&f(&["0"])).unwrap(), f(&["0.6"]));
        assert_eq!(t.apply(&f(&["1"])).unwrap(), f(&["0.6"]));
        assert_eq!(t.apply(&f(&["0.4"])).unwrap(), f(&["0"]));

        let q = build_operator(&OperatorSpec::grid(r("1/10")), &scalar()).unwrap();
        assert_eq!(q.apply(&f(&["0.55"])).unwrap(), f(&["0.6"]));
        assert_eq!(q.apply(&f(&["0.85"])).unwrap(), f(&["0.8"]));
        assert_eq!(q.apply(&f(&["0.95"])).unwrap(), f(&["1"]));

        let two = MeasureSpace::counting(2).unwrap();
        let phi = build_operator(&hitl_spec(), &two).unwrap();
        assert_eq!(phi.apply(&f(&["0.8", "0.2"])).unwrap(), f(&["0.5", "0.5"]));
    }

    #[test]
    fn build_rejects_bad_specs() {
        let two = MeasureSpace::counting(2).unwrap();
        let err = build_operator(&OperatorSpec::translation(r("0.6")), &two).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        for d in ["0", "1", "-0.2", "1.5"] {
            assert!(build_operator(&OperatorSpec::translation(r(d)), &scalar()).is_err());
        }
        assert!(build_operator(&OperatorSpec::clip(int(1), int(0)), &two).is_err());
        assert!(build_operator(&OperatorSpec::grid(int(0)), &two).is_err());
        assert!(build_operator(&OperatorSpec::perturbation(r("-0.1"), 1), &two).is_err());
        let four = MeasureSpace::counting(4).unwrap();
        for blocks in [
            vec![vec![0, 1], vec![2]],
            vec![vec![0, 1], vec![1, 2, 3]],
            vec![vec![0, 1, 2, 3], vec![]],
            vec![vec![0, 1, 2, 3, 4]],
        ] {
            let err = build_operator(&OperatorSpec::cond_exp(blocks), &four).unwrap_err();
            assert!(matches!(err, Error::Config(_)));
        }
    }

    #[test]
    fn apply_examples() {
        let two = MeasureSpace::counting(2).unwrap();
        let avg = build_operator(&OperatorSpec::Averaging, &two).unwrap();
        assert_eq!(avg.apply(&f(&["0.8", "0.2"])).unwrap(), f(&["0.5", "0.5"]));

        let four = MeasureSpace::counting(4).unwrap();
        let ce = build_operator(&OperatorSpec::cond_exp(vec![vec![0, 1], vec![2, 3]]), &four).unwrap();
        let out = ce.apply(&f(&["0.2", "0.8", "1", "0"])).unwrap();
        assert_eq!(out, f(&["0.5", "0.5", "0.5", "0.5"]));

        let clip = build_operator(&OperatorSpec::clip(int(0), int(1)), &two).unwrap();
        assert_eq!(clip.apply(&f(&["0.5", "0.5"])).unwrap(), f(&["0.5", "0.5"]));
        assert_eq!(clip.apply(&f(&["1.5", "-2"])).unwrap(), f(&["1", "0"]));
        assert!(matches!(clip.apply(&f(&["1"])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn weighted_cond_exp_uses_mass_weighted_mean() {
        let space = MeasureSpace::from_weights(vec![int(1), int(3), int(2)]).unwrap();
        let ce = build_operator(&OperatorSpec::cond_exp(vec![vec![0, 1], vec![2]]), &space).unwrap();
        // (1·1 + 3·0) / 4
        let out = ce.apply(&f(&["1", "0", "0.7"])).unwrap();
        assert_eq!(out, f(&["0.25", "0.25", "0.7"]));
    }

    #[test]
    fn compose_examples() {
        let s = scalar();
        let t = build_operator(&OperatorSpec::translation(r("0.6")), &s).unwrap();
        let q = build_operator(&OperatorSpec::grid(r("0.1")), &s).unwrap();
        let tq = compose(&[t.clone(), q]).unwrap();
        assert_eq!(tq.apply(&f(&["0"])).unwrap(), f(&["0.6"]));
        assert_eq!(tq.describe(), "translation(d=0.6) -> grid_quantizer(step=0.1)");

        let clip = build_operator(&OperatorSpec::clip(int(0), int(1)), &s).unwrap();
        let only = compose(&[clip]).unwrap();
        assert_eq!(only.apply(&f(&["0.37"])).unwrap(), f(&["0.37"]));

        let two = MeasureSpace::counting(2).unwrap();
        let parts: Vec<Operator> = [
            OperatorSpec::Averaging,
            OperatorSpec::clip(int(0), int(1)),
            OperatorSpec::grid(r("0.1")),
        ]
        .iter()
        .map(|sp| build_operator(sp, &two).unwrap())
        .collect();
        let phi = compose(&parts).unwrap();
        assert_eq!(phi.apply(&f(&["0.8", "0.2"])).unwrap(), f(&["0.5", "0.5"]));

        let avg2 = build_operator(&OperatorSpec::Averaging, &two).unwrap();
        assert!(matches!(compose(&[t, avg2]), Err(Error::Structure(_))));
        assert!(compose(&[]).is_err());
    }

    #[test]
    fn composition_order_is_application_order() {
        let s = scalar();
        let t = build_operator(&OperatorSpec::translation(r("0.6")), &s).unwrap();
        let q = build_operator(&OperatorSpec::grid(r("0.1")), &s).unwrap();
        let x = f(&["0.25"]);
        assert_eq!(compose(&[t.clone(), q.clone()]).unwrap().apply(&x).unwrap(), f(&["0.8"]));
        // Rounding first: 0.25 -> 0.2, then +0.6.
        assert_eq!(compose(&[q, t]).unwrap().apply(&x).unwrap(), f(&["0.8"]));
        let x = f(&["0.36"]);
        let s2 = scalar();
        let t = build_operator(&OperatorSpec::translation(r("0.6")), &s2).unwrap();
        let q = build_operator(&OperatorSpec::grid(r("0.1")), &s2).unwrap();
        assert_eq!(compose(&[t.clone(), q.clone()]).unwrap().apply(&x).unwrap(), f(&["1"]));
        assert_eq!(compose(&[q, t]).unwrap().apply(&x).unwrap(), f(&["0"]));
    }

    #[test]
    fn grid_quantizer_fails_nonexpansiveness_with_witness() {
        let s = scalar();
        let q = build_operator(&OperatorSpec::grid(r("0.1")), &s).unwrap();
        let witness = (f(&["0.54"]), f(&["0.56"]));
        let probe = Probe::Points(vec![]);
        let report = check_nonexpansive(&q, &probe, Metric::L1, std::slice::from_ref(&witness)).unwrap();
        assert!(!report.passed);
        assert_eq!(report.worst_ratio, Some(int(5)));
        assert_eq!(report.worst_pair, Some(witness));
    }

    #[test]
    fn cond_exp_and_identity_pass_nonexpansiveness() {
        let four = MeasureSpace::counting(4).unwrap();
        let sampler = Sampler::new(four.clone(), FeasibleSetSpec::unit_box(), 3);
        let probe = Probe::seeded(sampler, 200);
        let ce = build_operator(&OperatorSpec::cond_exp(vec![vec![0, 2], vec![1], vec![3]]), &four)
            .unwrap();
        let report = check_nonexpansive(&ce, &probe, Metric::L1, &[]).unwrap();
        assert!(report.passed);
        assert!(report.worst_ratio.unwrap() <= int(1));

        let id = Operator::identity(&four);
        let report = check_nonexpansive(&id, &probe, Metric::L1, &[]).unwrap();
        assert!(report.passed);
        assert_eq!(report.worst_ratio, Some(int(1)));
    }

    #[test]
    fn zero_distance_pairs_are_skipped() {
        let s = scalar();
        let id = Operator::identity(&s);
        let probe = Probe::Points(vec![f(&["0.3"]), f(&["0.3"])]);
        let report = check_nonexpansive(&id, &probe, Metric::L1, &[]).unwrap();
        assert_eq!(report.skipped_zero, 1);
        assert_eq!(report.worst_ratio, None);
        assert!(report.passed);
    }

    #[test]
    fn idempotence_examples() {
        let s = scalar();
        let probe = Probe::Points(scalar_grid(100));
        let q = build_operator(&OperatorSpec::grid(r("0.1")), &s).unwrap();
        assert!(check_idempotent(&q, &probe).unwrap().passed);

        let four = MeasureSpace::counting(4).unwrap();
        let ce = build_operator(&OperatorSpec::cond_exp(vec![vec![0, 1], vec![2, 3]]), &four).unwrap();
        let sampler = Sampler::new(four, FeasibleSetSpec::unit_box(), 9);
        assert!(check_idempotent(&ce, &Probe::seeded(sampler, 100)).unwrap().passed);

        let t = build_operator(&OperatorSpec::translation(r("0.6")), &s).unwrap();
        let report = check_idempotent(&t, &Probe::Points(vec![f(&["0"])])).unwrap();
        assert!(!report.passed);
        assert_eq!(t.apply(&t.apply(&f(&["0"])).unwrap()).unwrap(), f(&["0.2"]));
    }

    #[test]
    fn deviation_examples() {
        let s = scalar();
        let q = build_operator(&OperatorSpec::grid(r("0.1")), &s).unwrap();
        let report = max_deviation(&q, &Probe::Points(scalar_grid(200)), Metric::L1, None).unwrap();
        assert_eq!(report.max_deviation, Some(r("0.05")));

        let two = MeasureSpace::counting(2).unwrap();
        let q2 = build_operator(&OperatorSpec::grid(r("0.1")), &two).unwrap();
        let sampler = Sampler::new(two.clone(), FeasibleSetSpec::unit_box(), 5);
        let bound = r("0.1");
        let report = max_deviation(&q2, &Probe::seeded(sampler, 300), Metric::L1, Some(&bound)).unwrap();
        assert!(report.passed);
        assert!(report.max_coordinate_deviation.unwrap() <= r("0.05"));

        let id = Operator::identity(&two);
        let sampler = Sampler::new(two, FeasibleSetSpec::unit_box(), 5);
        let report = max_deviation(&id, &Probe::seeded(sampler, 10), Metric::L1, None).unwrap();
        assert_eq!(report.max_deviation, Some(int(0)));
    }

    #[test]
    fn perturbation_estimate_examples() {
        let two = MeasureSpace::counting(2).unwrap();
        let avg = build_operator(&OperatorSpec::Averaging, &two).unwrap();
        let q = build_operator(&OperatorSpec::grid(r("0.1")), &two).unwrap();
        let sampler = Sampler::new(two.clone(), FeasibleSetSpec::unit_box(), 11);
        let report =
            perturbation_estimate(&avg, &q, &Probe::seeded(sampler.clone(), 500), Metric::L1, &r("0.1"))
                .unwrap();
        assert!(report.passed, "{}", report.summary());

        let id = Operator::identity(&two);
        let report =
            perturbation_estimate(&avg, &id, &Probe::seeded(sampler, 100), Metric::L1, &int(0)).unwrap();
        assert!(report.passed);
    }

    #[test]
    fn perturbation_is_bounded_and_deterministic() {
        let four = MeasureSpace::counting(4).unwrap();
        let set = FeasibleSetSpec::unit_box();
        let delta = r("0.05");
        let op = build_operator_within(&OperatorSpec::perturbation(delta.clone(), 42), &four, Some(&set))
            .unwrap();
        let free = build_operator(&OperatorSpec::perturbation(delta.clone(), 42), &four).unwrap();
        let sampler = Sampler::new(four.clone(), set.clone(), 2);
        for i in 0..100 {
            let x = sampler.sample(i).unwrap();
            let y = op.apply(&x).unwrap();
            assert_eq!(y, op.apply(&x).unwrap());
            let moved = crate::l1::l1_distance(&x, &y, &four).unwrap();
            assert!(moved <= delta);
            assert!(crate::l1::validate_membership(&y, &set, &four).unwrap().is_valid());
            // Unclipped residual has norm exactly delta.
            let z = free.apply(&x).unwrap();
            assert_eq!(crate::l1::l1_distance(&x, &z, &four).unwrap(), delta);
        }
        let other = build_operator(&OperatorSpec::perturbation(delta, 43), &four).unwrap();
        let x = sampler.sample(0).unwrap();
        assert_ne!(free.apply(&x).unwrap(), other.apply(&x).unwrap());
    }

    #[test]
    fn half_up_tie_break_is_available() {
        let spec = OperatorSpec::GridQuantizer {
            step: r("0.1"),
            tie: TieBreak::HalfUp,
        };
        let q = build_operator(&spec, &scalar()).unwrap();
        assert_eq!(q.apply(&f(&["0.85"])).unwrap(), f(&["0.9"]));
    }

    #[test]
    fn spec_json_shapes() {
        let cases = [
            (r#"{"kind":"grid_quantizer","step":"1/10"}"#, OperatorSpec::grid(r("0.1"))),
            (
                r#"{"kind":"cond_exp","blocks":[[0,1],[2,3]]}"#,
                OperatorSpec::cond_exp(vec![vec![0, 1], vec![2, 3]]),
            ),
            (r#"{"kind":"translation","d":"0.6"}"#, OperatorSpec::translation(r("0.6"))),
            (r#"{"kind":"clip","lower":"0","upper":"1"}"#, OperatorSpec::clip(int(0), int(1))),
            (r#"{"kind":"averaging"}"#, OperatorSpec::Averaging),
            (
                r#"{"kind":"perturbation","delta":"0.05","seed":42}"#,
                OperatorSpec::perturbation(r("0.05"), 42),
            ),
            (
                r#"{"kind":"composite","stages":[{"kind":"averaging"}]}"#,
                OperatorSpec::composite(vec![OperatorSpec::Averaging]),
            ),
        ];
        for (text, expected) in cases {
            let parsed: OperatorSpec = serde_json::from_str(text).unwrap();
            assert_eq!(parsed, expected, "{text}");
            let back: OperatorSpec = serde_json::from_str(&serde_json::to_string(&parsed).unwrap()).unwrap();
            assert_eq!(back, expected);
        }
        assert!(serde_json::from_str::<OperatorSpec>(r#"{"kind":"rotation"}"#).is_err());
        assert!(serde_json::from_str::<OperatorSpec>(r#"{"kind":"translation","d":"x"}"#).is_err());
    }

    #[test]
    fn without_perturbation_strips_stages() {
        let spec = OperatorSpec::composite(vec![
            OperatorSpec::Averaging,
            OperatorSpec::grid(r("0.1")),
            OperatorSpec::perturbation(r("0.05"), 1),
        ]);
        assert_eq!(
            spec.without_perturbation(),
            OperatorSpec::composite(vec![OperatorSpec::Averaging, OperatorSpec::grid(r("0.1"))])
        );
    }
}
