//! Finite measure spaces and exact L¹ geometry on them.

use std::collections::HashSet;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, format_rat, Rat};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub label: String,
    pub weight: Rat,
}

/// A finite list of weighted atoms. The σ-algebra is the full power set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct MeasureSpace {
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    #[serde(with = "exact::serde_rat_vec")]
    weights: Vec<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl TryFrom<SpaceRepr> for MeasureSpace {
    type Error = Error;

    fn try_from(repr: SpaceRepr) -> Result<Self> {
        let labels = match repr.labels {
            Some(labels) => {
                if labels.len() != repr.weights.len() {
                    return Err(Error::Config(format!(
                        "{} labels for {} weights",
                        labels.len(),
                        repr.weights.len()
                    )));
                }
                labels
            }
            None => default_labels(repr.weights.len()),
        };
        MeasureSpace::new(
            labels
                .into_iter()
                .zip(repr.weights)
                .map(|(label, weight)| Atom { label, weight })
                .collect(),
        )
    }
}

impl From<MeasureSpace> for SpaceRepr {
    fn from(space: MeasureSpace) -> Self {
        let custom = space.atoms.iter().map(|a| a.label.clone()).collect::<Vec<_>>();
        let labels = (custom != default_labels(space.atoms.len())).then_some(custom);
        SpaceRepr {
            weights: space.atoms.into_iter().map(|a| a.weight).collect(),
            labels,
        }
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("w{i}")).collect()
}

impl MeasureSpace {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Config("measure space needs at least one atom".into()));
        }
        let mut seen = HashSet::new();
        for atom in &atoms {
            if !atom.weight.is_positive() {
                return Err(Error::Config(format!(
                    "atom {:?} has non-positive weight {}",
                    atom.label,
                    format_rat(&atom.weight)
                )));
            }
            if !seen.insert(atom.label.as_str()) {
                return Err(Error::Config(format!("duplicate atom label {:?}", atom.label)));
            }
        }
        Ok(Self { atoms })
    }

    pub fn from_weights(weights: Vec<Rat>) -> Result<Self> {
        let labels = default_labels(weights.len());
        Self::new(
            labels
                .into_iter()
                .zip(weights)
                .map(|(label, weight)| Atom { label, weight })
                .collect(),
        )
    }

    /// `n` atoms of unit mass (counting measure).
    pub fn counting(n: usize) -> Result<Self> {
        Self::from_weights(vec![Rat::one(); n])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn weights(&self) -> impl Iterator<Item = &Rat> {
        self.atoms.iter().map(|a| &a.weight)
    }

    /// μ(Ω).
    pub fn total_mass(&self) -> Rat {
        self.weights().sum()
    }

    pub fn check(&self, f: &L1Function) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                actual: f.len(),
            });
        }
        Ok(())
    }
}

/// One exact value per atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct L1Function {
    #[serde(with = "exact::serde_rat_vec")]
    values: Vec<Rat>,
}

impl L1Function {
    pub fn new(values: Vec<Rat>) -> Self {
        Self { values }
    }

    pub fn scalar(value: Rat) -> Self {
        Self { values: vec![value] }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![Rat::zero(); n],
        }
    }

    pub fn constant(n: usize, value: Rat) -> Self {
        Self { values: vec![value; n] }
    }

    /// Indicator of atom `i` in an `n`-atom space.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut f = Self::zeros(n);
        f.values[i] = Rat::one();
        f
    }

    pub fn parse(texts: &[&str]) -> Result<Self> {
        texts
            .iter()
            .map(|t| exact::parse_rat(t))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Rat> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&self, c: &Rat) -> Self {
        Self::new(self.values.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_len(self, other)?;
        Ok(Self::new(
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_len(self, other)?;
        Ok(Self::new(
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

impl fmt::Display for L1Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&exact::format_vec(&self.values))
    }
}

fn same_len(f: &L1Function, g: &L1Function) -> Result<()> {
    if f.len() != g.len() {
        return Err(Error::Dimension {
            expected: f.len(),
            actual: g.len(),
        });
    }
    Ok(())
}

/// Σ μ({i})·|f(i)|.
pub fn l1_norm(f: &L1Function, space: &MeasureSpace) -> Result<Rat> {
    space.check(f)?;
    Ok(space.weights().zip(f.values()).map(|(w, v)| w * v.abs()).sum())
}

pub fn l1_distance(f: &L1Function, g: &L1Function, space: &MeasureSpace) -> Result<Rat> {
    space.check(f)?;
    space.check(g)?;
    Ok(space
        .weights()
        .zip(f.values().iter().zip(g.values()))
        .map(|(w, (a, b))| w * (a - b).abs())
        .sum())
}

/// Wrap-around distance on `[0, 1]` with 1 identified with 0.
pub fn circle_distance(a: &Rat, b: &Rat) -> Result<Rat> {
    for v in [a, b] {
        if v.is_negative() || *v > Rat::one() {
            return Err(Error::Domain(format!(
                "circle coordinate {} outside [0, 1]",
                format_rat(v)
            )));
        }
    }
    let direct = (a - b).abs();
    let around = Rat::one() - &direct;
    Ok(direct.min(around))
}

/// λf + (1−λ)g.
pub fn convex_combination(lambda: &Rat, f: &L1Function, g: &L1Function) -> Result<L1Function> {
    if lambda.is_negative() || *lambda > Rat::one() {
        return Err(Error::Domain(format!(
            "convex weight {} outside [0, 1]",
            format_rat(lambda)
        )));
    }
    same_len(f, g)?;
    let mu = Rat::one() - lambda;
    Ok(L1Function::new(
        f.values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| lambda * a + &mu * b)
            .collect(),
    ))
}

/// How distances between states are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    /// |a − b| on a one-atom space.
    #[serde(rename = "line")]
    Line,
    /// Wrap-around distance on a one-atom space with values in `[0, 1]`.
    #[serde(rename = "circle")]
    Circle,
    /// Weighted L¹ distance.
    #[serde(rename = "L1", alias = "l1")]
    L1,
}

impl Metric {
    pub fn distance(self, f: &L1Function, g: &L1Function, space: &MeasureSpace) -> Result<Rat> {
        match self {
            Metric::L1 => l1_distance(f, g, space),
            Metric::Line | Metric::Circle => {
                self.require_scalar(space)?;
                space.check(f)?;
                space.check(g)?;
                let (a, b) = (&f.values()[0], &g.values()[0]);
                if self == Metric::Line {
                    Ok((a - b).abs())
                } else {
                    circle_distance(a, b)
                }
            }
        }
    }

    pub fn require_scalar(self, space: &MeasureSpace) -> Result<()> {
        if self != Metric::L1 && !space.is_scalar() {
            return Err(Error::Config(format!(
                "{self} metric needs a one-atom space, got {} atoms",
                space.len()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Line => "line",
            Metric::Circle => "circle",
            Metric::L1 => "L1",
        })
    }
}

/// Pointwise box `lower ≤ f ≤ upper`, optionally with a prescribed mass ‖f‖₁.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibleSetSpec {
    #[serde(with = "exact::serde_rat")]
    pub lower: Rat,
    #[serde(with = "exact::serde_rat")]
    pub upper: Rat,
    #[serde(default, with = "exact::serde_rat_opt", skip_serializing_if = "Option::is_none")]
    pub mass: Option<Rat>,
}

impl FeasibleSetSpec {
    pub fn unit_box() -> Self {
        Self {
            lower: Rat::zero(),
            upper: Rat::one(),
            mass: None,
        }
    }

    pub fn with_mass(mut self, mass: Rat) -> Self {
        self.mass = Some(mass);
        self
    }

    pub fn check(&self, space: &MeasureSpace) -> Result<()> {
        if self.lower > self.upper {
            return Err(Error::Config(format!(
                "set.lower {} exceeds set.upper {}",
                format_rat(&self.lower),
                format_rat(&self.upper)
            )));
        }
        if let Some(mass) = &self.mass {
            let total = space.total_mass();
            let (lo, hi) = (&self.lower * &total, &self.upper * &total);
            if *mass < lo || *mass > hi {
                return Err(Error::Config(format!(
                    "set.mass {} outside attainable range [{}, {}]",
                    format_rat(mass),
                    format_rat(&lo),
                    format_rat(&hi)
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BelowLower { atom: usize, value: Rat },
    AboveUpper { atom: usize, value: Rat },
    Mass { expected: Rat, actual: Rat },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BelowLower { atom, value } => {
                write!(f, "value {} at atom {atom} below lower bound", format_rat(value))
            }
            Violation::AboveUpper { atom, value } => {
                write!(f, "value {} at atom {atom} above upper bound", format_rat(value))
            }
            Violation::Mass { expected, actual } => write!(
                f,
                "mass {} differs from required {}",
                format_rat(actual),
                format_rat(expected)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Membership {
    Valid,
    Invalid(Vec<Violation>),
}

impl Membership {
    pub fn is_valid(&self) -> bool {
        matches!(self, Membership::Valid)
    }
}

pub fn validate_membership(
    f: &L1Function,
    set: &FeasibleSetSpec,
    space: &MeasureSpace,
) -> Result<Membership> {
    space.check(f)?;
    let mut violations = Vec::new();
    for (atom, value) in f.values().iter().enumerate() {
        if *value < set.lower {
            violations.push(Violation::BelowLower {
                atom,
                value: value.clone(),
            });
        } else if *value > set.upper {
            violations.push(Violation::AboveUpper {
                atom,
                value: value.clone(),
            });
        }
    }
    if let Some(expected) = &set.mass {
        let actual = l1_norm(f, space)?;
        if actual != *expected {
            violations.push(Violation::Mass {
                expected: expected.clone(),
                actual,
            });
        }
    }
    Ok(if violations.is_empty() {
        Membership::Valid
    } else {
        Membership::Invalid(violations)
    })
}

/// Finds `s ≥ 0` with `Σ μᵢ·clamp(s·rawᵢ, lower, upper) = mass` and returns the
/// clamped, rescaled vector. Every raw entry must be strictly positive.
pub fn rescale_to_mass(
    raw: &[Rat],
    set: &FeasibleSetSpec,
    mass: &Rat,
    space: &MeasureSpace,
) -> Result<L1Function> {
    if raw.len() != space.len() {
        return Err(Error::Dimension {
            expected: space.len(),
            actual: raw.len(),
        });
    }
    if raw.iter().any(|r| !r.is_positive()) {
        return Err(Error::Domain("mass rescaling needs positive entries".into()));
    }
    let clamp = |v: Rat| v.max(set.lower.clone()).min(set.upper.clone());
    let build = |s: &Rat| L1Function::new(raw.iter().map(|r| clamp(r * s)).collect());
    let mass_at = |s: &Rat| -> Rat {
        space
            .weights()
            .zip(raw)
            .map(|(w, r)| w * clamp(r * s))
            .sum()
    };

    // Mass is piecewise linear and nondecreasing in s, with kinks where some
    // entry hits a bound.
    let mut knots = vec![Rat::zero()];
    for r in raw {
        for bound in [&set.lower, &set.upper] {
            let s = bound / r;
            if s.is_positive() {
                knots.push(s);
            }
        }
    }
    knots.sort();
    knots.dedup();
    let mut prev: Option<(Rat, Rat)> = None;
    for s in knots {
        let m = mass_at(&s);
        if m == *mass {
            return Ok(build(&s));
        }
        if let Some((ps, pm)) = &prev {
            if pm < mass && *mass < m {
                let t = ps + (mass - pm) * (&s - ps) / (&m - pm);
                return Ok(build(&t));
            }
        }
        prev = Some((s, m));
    }
    Err(Error::Domain(format!(
        "mass {} not reachable by rescaling within the box",
        format_rat(mass)
    )))
}
