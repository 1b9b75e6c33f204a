//! Orbits, exact cycle detection, displacement scans and ε-fixed points.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, format_rat, frac_part, int, Rat};
use crate::l1::{L1Function, Metric};
use crate::operators::Operator;
use crate::sampling::Probe;

/// When an orbit stops before its step budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StopRule {
    /// Stop at the first iterate equal to an earlier one.
    ExactRepeat,
    /// Stop once a step moves the state by less than `eps`.
    DisplacementBelow {
        #[serde(with = "exact::serde_rat")]
        eps: Rat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Repeat,
    SmallDisplacement,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cycle {
    /// Index of the first iterate that recurs.
    pub preperiod: usize,
    /// Minimal `p ≥ 1` with `points[preperiod + p] = points[preperiod]`.
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    pub points: Vec<L1Function>,
    /// `displacements[n] = dist(points[n + 1], points[n])`.
    pub displacements: Vec<Rat>,
    pub metric: Metric,
    pub cycle: Option<Cycle>,
    pub budget: usize,
    pub stop: StopReason,
}

impl OrbitTrace {
    pub fn steps(&self) -> usize {
        self.displacements.len()
    }

    pub fn last(&self) -> &L1Function {
        self.points.last().expect("orbit holds its starting point")
    }

    pub fn preperiod(&self) -> Option<usize> {
        self.cycle.map(|c| c.preperiod)
    }

    pub fn period(&self) -> Option<usize> {
        self.cycle.map(|c| c.period)
    }

    /// Fixed point reached by the orbit, if it ended in a 1-cycle.
    pub fn fixed_point(&self) -> Option<&L1Function> {
        match self.cycle {
            Some(Cycle { preperiod, period: 1 }) => self.points.get(preperiod),
            _ => None,
        }
    }

    /// CSV with header `step,displacement,value_0,...`. Step 0 has an empty
    /// displacement field.
    pub fn to_csv(&self) -> String {
        let width = self.points.first().map_or(0, L1Function::len);
        let mut out = String::from("step,displacement");
        for i in 0..width {
            let _ = write!(out, ",value_{i}");
        }
        out.push('\n');
        for (n, point) in self.points.iter().enumerate() {
            let _ = write!(out, "{n},");
            if n > 0 {
                out.push_str(&format_rat(&self.displacements[n - 1]));
            }
            for v in point.values() {
                out.push(',');
                out.push_str(&format_rat(v));
            }
            out.push('\n');
        }
        out
    }
}

/// Iterates `op` from `f0` for at most `max_steps` applications. Repeats are
/// tracked under every stop rule, so a cycle may be reported even when the
/// orbit stopped for another reason.
pub fn iterate_orbit(
    op: &Operator,
    f0: &L1Function,
    max_steps: usize,
    stop: &StopRule,
    metric: Metric,
) -> Result<OrbitTrace> {
    let space = op.space();
    space.check(f0)?;
    metric.require_scalar(space)?;
    let mut seen: HashMap<L1Function, usize> = HashMap::new();
    seen.insert(f0.clone(), 0);
    let mut trace = OrbitTrace {
        points: vec![f0.clone()],
        displacements: Vec::new(),
        metric,
        cycle: None,
        budget: max_steps,
        stop: StopReason::Budget,
    };
    for n in 0..max_steps {
        let current = &trace.points[n];
        let next = op.apply(current)?;
        let moved = metric.distance(&next, current, space)?;
        let repeat = seen.get(&next).copied();
        if repeat.is_none() {
            seen.insert(next.clone(), n + 1);
        }
        trace.points.push(next);
        trace.displacements.push(moved.clone());
        if let Some(r) = repeat {
            if trace.cycle.is_none() {
                trace.cycle = Some(Cycle {
                    preperiod: r,
                    period: n + 1 - r,
                });
            }
            if *stop == StopRule::ExactRepeat {
                trace.stop = StopReason::Repeat;
                break;
            }
        }
        if let StopRule::DisplacementBelow { eps } = stop {
            if moved < *eps {
                trace.stop = StopReason::SmallDisplacement;
                break;
            }
        }
    }
    Ok(trace)
}

/// First repeating index and minimal period, by exact equality.
pub fn detect_cycle(op: &Operator, f0: &L1Function, max_steps: usize) -> Result<Option<Cycle>> {
    Ok(iterate_orbit(op, f0, max_steps, &StopRule::ExactRepeat, Metric::L1)?.cycle)
}

/// Upper bound on the number of values a step-`step` quantizer can produce
/// from inputs in `[0, 1]`: grid points `k·step` with `k·step ≤ 1 + step/2`.
pub fn quantizer_range_size(step: &Rat) -> usize {
    let top = (Rat::one() / step + exact::ratio(1, 2)).floor().to_integer();
    usize::try_from(top).unwrap_or(usize::MAX).saturating_add(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    #[serde(with = "exact::serde_rat")]
    pub lower: Rat,
    #[serde(with = "exact::serde_rat")]
    pub upper: Rat,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacementProfile {
    pub metric: Metric,
    pub grid: String,
    pub points: usize,
    #[serde(with = "exact::serde_rat")]
    pub min_value: Rat,
    pub min_witness: L1Function,
    #[serde(with = "exact::serde_rat")]
    pub max_value: Rat,
    pub max_witness: L1Function,
    pub histogram: Vec<Bucket>,
}

const HISTOGRAM_BUCKETS: usize = 10;

/// Exact extrema of `dist(op(x), x)` over the probe's points.
pub fn displacement_profile(op: &Operator, metric: Metric, probe: &Probe) -> Result<DisplacementProfile> {
    metric.require_scalar(op.space())?;
    let points = probe.points()?;
    if points.is_empty() {
        return Err(Error::Domain("displacement profile over an empty grid".into()));
    }
    let mut values = Vec::with_capacity(points.len());
    for x in &points {
        values.push(metric.distance(&op.apply(x)?, x, op.space())?);
    }
    let (mut lo, mut hi) = (0, 0);
    for (i, v) in values.iter().enumerate() {
        if *v < values[lo] {
            lo = i;
        }
        if *v > values[hi] {
            hi = i;
        }
    }
    let (min_value, max_value) = (values[lo].clone(), values[hi].clone());
    Ok(DisplacementProfile {
        metric,
        grid: probe.describe(),
        points: points.len(),
        histogram: histogram(&values, &min_value, &max_value),
        min_witness: points[lo].clone(),
        max_witness: points[hi].clone(),
        min_value,
        max_value,
    })
}

fn histogram(values: &[Rat], min: &Rat, max: &Rat) -> Vec<Bucket> {
    if min == max {
        return vec![Bucket {
            lower: min.clone(),
            upper: max.clone(),
            count: values.len(),
        }];
    }
    let width = (max - min) / int(HISTOGRAM_BUCKETS as i64);
    let mut buckets: Vec<Bucket> = (0..HISTOGRAM_BUCKETS)
        .map(|b| Bucket {
            lower: min + &width * int(b as i64),
            upper: min + &width * int(b as i64 + 1),
            count: 0,
        })
        .collect();
    for v in values {
        let idx = ((v - min) / &width).floor().to_integer();
        let idx = usize::try_from(idx).unwrap_or(0).min(HISTOGRAM_BUCKETS - 1);
        buckets[idx].count += 1;
    }
    buckets
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum EpsilonSearch {
    /// Point of least displacement on the searched set, strictly below eps.
    Found {
        point: L1Function,
        #[serde(with = "exact::serde_rat")]
        displacement: Rat,
    },
    /// No searched point moves by less than eps.
    None { searched: usize },
}

impl EpsilonSearch {
    pub fn is_found(&self) -> bool {
        matches!(self, EpsilonSearch::Found { .. })
    }
}

/// Searches for `x` with `dist(op(x), x) < eps`. A `None` answer certifies
/// only the searched set.
pub fn epsilon_fixed_point_search(
    op: &Operator,
    metric: Metric,
    eps: &Rat,
    probe: &Probe,
) -> Result<EpsilonSearch> {
    if *eps <= Rat::zero() {
        return Err(Error::Domain(format!("tolerance {} must be positive", format_rat(eps))));
    }
    metric.require_scalar(op.space())?;
    let points = probe.points()?;
    let mut best: Option<(L1Function, Rat)> = None;
    for x in &points {
        let d = metric.distance(&op.apply(x)?, x, op.space())?;
        if d < *eps && best.as_ref().is_none_or(|(_, b)| d < *b) {
            best = Some((x.clone(), d));
        }
    }
    Ok(match best {
        Some((point, displacement)) => EpsilonSearch::Found { point, displacement },
        None => EpsilonSearch::None {
            searched: points.len(),
        },
    })
}

/// First return time of `0` under `x ↦ x + p/q (mod 1)`, or `None` when the
/// budget runs out first. `0/1` is the identity rotation.
pub fn rotation_period(p: u64, q: u64, budget: u64) -> Result<Option<u64>> {
    if q == 0 {
        return Err(Error::Domain("rotation denominator must be positive".into()));
    }
    if p >= q && !(p == 0 && q == 1) {
        return Err(Error::Domain(format!("rotation {p}/{q} needs p < q")));
    }
    if p.gcd(&q) != 1 {
        return Err(Error::Domain(format!("rotation {p}/{q} is not in lowest terms")));
    }
    let step = Rat::new(BigInt::from(p), BigInt::from(q));
    let mut x = Rat::zero();
    for n in 1..=budget {
        x = frac_part(&(x + &step));
        if x.is_zero() {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rat;
    use crate::l1::{FeasibleSetSpec, MeasureSpace};
    use crate::operators::{build_operator, OperatorSpec};

    fn r(text: &str) -> Rat {
        parse_rat(text).unwrap()
    }

    fn s(text: &str) -> L1Function {
        L1Function::scalar(r(text))
    }

    fn quantized_translation(d: &str) -> Operator {
        let spec = OperatorSpec::composite(vec![
            OperatorSpec::translation(r(d)),
            OperatorSpec::grid(r("0.1")),
        ]);
        build_operator(&spec, &MeasureSpace::counting(1).unwrap()).unwrap()
    }

    fn hitl_two() -> Operator {
        let spec = OperatorSpec::composite(vec![
            OperatorSpec::Averaging,
            OperatorSpec::clip(int(0), int(1)),
            OperatorSpec::grid(r("0.1")),
        ]);
        build_operator(&spec, &MeasureSpace::counting(2).unwrap()).unwrap()
    }

    /// Floyd tortoise-and-hare; independent of the hash-map detector.
    fn floyd(op: &Operator, f0: &L1Function) -> (usize, usize) {
        let step = |x: &L1Function| op.apply(x).unwrap();
        let mut tortoise = step(f0);
        let mut hare = step(&step(f0));
        while tortoise != hare {
            tortoise = step(&tortoise);
            hare = step(&step(&hare));
        }
        let mut mu = 0;
        tortoise = f0.clone();
        while tortoise != hare {
            tortoise = step(&tortoise);
            hare = step(&hare);
            mu += 1;
        }
        let mut lambda = 1;
        hare = step(&tortoise);
        while tortoise != hare {
            hare = step(&hare);
            lambda += 1;
        }
        (mu, lambda)
    }

    #[test]
    fn table_orbit() {
        let op = quantized_translation("0.6");
        let trace = iterate_orbit(&op, &s("0"), 20, &StopRule::ExactRepeat, Metric::Line).unwrap();
        let expected: Vec<L1Function> = ["0.0", "0.6", "0.2", "0.8", "0.4", "0.0"].iter().map(|t| s(t)).collect();
        assert_eq!(trace.points, expected);
        assert_eq!(trace.cycle, Some(Cycle { preperiod: 0, period: 5 }));
        assert_eq!(trace.stop, StopReason::Repeat);
        assert_eq!(floyd(&op, &s("0")), (0, 5));
    }

    #[test]
    fn hitl_orbit_stabilizes() {
        let op = hitl_two();
        let f0 = L1Function::parse(&["0.8", "0.2"]).unwrap();
        let trace = iterate_orbit(&op, &f0, 10, &StopRule::ExactRepeat, Metric::L1).unwrap();
        let half = L1Function::parse(&["0.5", "0.5"]).unwrap();
        assert_eq!(trace.points, vec![f0.clone(), half.clone(), half.clone()]);
        assert_eq!(trace.cycle, Some(Cycle { preperiod: 1, period: 1 }));
        assert_eq!(trace.fixed_point(), Some(&half));
        assert_eq!(detect_cycle(&op, &f0, 10).unwrap(), Some(Cycle { preperiod: 1, period: 1 }));
    }

    #[test]
    fn identity_orbit_is_constant() {
        let space = MeasureSpace::counting(3).unwrap();
        let id = Operator::identity(&space);
        let f0 = L1Function::parse(&["0.1", "0.2", "0.3"]).unwrap();
        let trace = iterate_orbit(&id, &f0, 5, &StopRule::ExactRepeat, Metric::L1).unwrap();
        assert_eq!(trace.cycle, Some(Cycle { preperiod: 0, period: 1 }));
        assert_eq!(trace.points.len(), 2);
    }

    #[test]
    fn budget_exhaustion_is_not_an_error() {
        let op = quantized_translation("0.6");
        let trace = iterate_orbit(&op, &s("0"), 3, &StopRule::ExactRepeat, Metric::Line).unwrap();
        assert_eq!(trace.cycle, None);
        assert_eq!(trace.stop, StopReason::Budget);
        assert_eq!(trace.points.len(), 4);
    }

    #[test]
    fn displacement_stop_rule() {
        let op = hitl_two();
        let f0 = L1Function::parse(&["0.8", "0.2"]).unwrap();
        let rule = StopRule::DisplacementBelow { eps: r("0.001") };
        let trace = iterate_orbit(&op, &f0, 10, &rule, Metric::L1).unwrap();
        assert_eq!(trace.stop, StopReason::SmallDisplacement);
        assert_eq!(trace.displacements, vec![r("0.6"), int(0)]);
    }

    #[test]
    fn csv_layout() {
        let op = quantized_translation("0.6");
        let trace = iterate_orbit(&op, &s("0"), 20, &StopRule::ExactRepeat, Metric::Line).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "step,displacement,value_0");
        assert_eq!(lines[1], "0,,0.0");
        assert_eq!(lines[2], "1,0.6,0.6");
        assert_eq!(lines[3], "2,0.4,0.2");
        assert_eq!(lines.len(), 7);
        let col: Vec<&str> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap()).collect();
        assert_eq!(col, ["0.0", "0.6", "0.2", "0.8", "0.4", "0.0"]);
    }

    #[test]
    fn worked_line_displacements() {
        let op = quantized_translation("0.6");
        for (x, expected) in [("0.25", "0.55"), ("0.35", "0.65")] {
            let y = op.apply(&s(x)).unwrap();
            let d = Metric::Line.distance(&y, &s(x), op.space()).unwrap();
            assert_eq!(d, r(expected), "x = {x}");
        }
    }

    #[test]
    fn circle_profile_over_hundredths() {
        let op = quantized_translation("0.6");
        let profile = displacement_profile(&op, Metric::Circle, &Probe::ScalarGrid(100)).unwrap();
        assert_eq!(profile.min_value, r("0.35"));
        assert_eq!(profile.max_value, r("0.45"));
        assert_eq!(profile.points, 101);
        assert_eq!(profile.histogram.iter().map(|b| b.count).sum::<usize>(), 101);
        // Witnesses reproduce their values.
        let d = Metric::Circle
            .distance(&op.apply(&profile.min_witness).unwrap(), &profile.min_witness, op.space())
            .unwrap();
        assert_eq!(d, profile.min_value);
    }

    #[test]
    fn circle_metric_needs_scalar_space() {
        let op = hitl_two();
        let sampler = crate::sampling::Sampler::new(op.space().clone(), FeasibleSetSpec::unit_box(), 1);
        let err = displacement_profile(&op, Metric::Circle, &Probe::seeded(sampler, 5)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn epsilon_search_examples() {
        let op = quantized_translation("0.6");
        let grid = Probe::ScalarGrid(100);
        let none = epsilon_fixed_point_search(&op, Metric::Circle, &r("0.3"), &grid).unwrap();
        assert_eq!(none, EpsilonSearch::None { searched: 101 });
        let found = epsilon_fixed_point_search(&op, Metric::Circle, &r("0.4"), &grid).unwrap();
        let EpsilonSearch::Found { point, displacement } = found else {
            panic!("expected a witness");
        };
        assert_eq!(displacement, r("0.35"));
        let check = Metric::Circle.distance(&op.apply(&point).unwrap(), &point, op.space()).unwrap();
        assert_eq!(check, displacement);

        let id = Operator::identity(op.space());
        let hit = epsilon_fixed_point_search(&id, Metric::L1, &r("0.0001"), &grid).unwrap();
        assert!(hit.is_found());
        assert!(epsilon_fixed_point_search(&id, Metric::L1, &int(0), &grid).is_err());
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_period(3, 10, 100).unwrap(), Some(10));
        assert_eq!(rotation_period(1, 2, 100).unwrap(), Some(2));
        assert_eq!(rotation_period(0, 1, 100).unwrap(), Some(1));
        assert_eq!(rotation_period(3, 1000, 10_000).unwrap(), Some(1000));
        assert_eq!(rotation_period(3, 10, 9).unwrap(), None);
        assert!(rotation_period(2, 4, 100).is_err());
        assert!(rotation_period(5, 3, 100).is_err());
        assert!(rotation_period(0, 2, 100).is_err());
        assert!(rotation_period(1, 0, 100).is_err());
    }

    #[test]
    fn range_size_of_tenth_grid() {
        assert_eq!(quantizer_range_size(&r("0.1")), 11);
        assert_eq!(quantizer_range_size(&r("0.5")), 3);
    }
}
