//! Finite-set diagnostics for normal structure: diameters, Chebyshev-radius
//! upper bounds, and the midpoint identity on diametral pairs.

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{self, int, ratio, Rat};
use crate::l1::{convex_combination, l1_distance, L1Function, MeasureSpace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diameter {
    #[serde(with = "exact::serde_rat")]
    pub value: Rat,
    pub witness: (L1Function, L1Function),
}

pub fn diameter(points: &[L1Function], space: &MeasureSpace) -> Result<Diameter> {
    let first = points
        .first()
        .ok_or_else(|| Error::Domain("diameter of an empty set".into()))?;
    let mut best = Diameter {
        value: Rat::zero(),
        witness: (first.clone(), first.clone()),
    };
    space.check(first)?;
    for (i, f) in points.iter().enumerate() {
        for g in &points[i + 1..] {
            let d = l1_distance(f, g, space)?;
            if d > best.value {
                best = Diameter {
                    value: d,
                    witness: (f.clone(), g.clone()),
                };
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub point_count: usize,
    pub candidate_count: usize,
    #[serde(with = "exact::serde_rat")]
    pub diameter: Rat,
    pub diameter_pair: (L1Function, L1Function),
    /// Least farthest-point distance over the candidate centers.
    #[serde(with = "exact::serde_rat")]
    pub radius_estimate: Rat,
    pub center: L1Function,
    /// `radius_estimate / diameter`; `None` for a zero-diameter set.
    #[serde(with = "exact::serde_rat_opt")]
    pub ratio: Option<Rat>,
    /// Every candidate's farthest distance equals the diameter.
    pub diametral_flag: bool,
}

fn farthest(center: &L1Function, points: &[L1Function], space: &MeasureSpace) -> Result<Rat> {
    let mut worst = Rat::zero();
    for p in points {
        worst = worst.max(l1_distance(center, p, space)?);
    }
    Ok(worst)
}

pub fn barycenter(points: &[L1Function]) -> Result<L1Function> {
    let first = points
        .first()
        .ok_or_else(|| Error::Domain("barycenter of an empty set".into()))?;
    let mut sum = L1Function::zeros(first.len());
    for p in points {
        sum = sum.add(p)?;
    }
    Ok(sum.scale(&ratio(1, points.len() as i64)))
}

/// Upper bound on the Chebyshev radius of the convex hull of `points`,
/// minimizing over the points, their barycenter, all pairwise midpoints and
/// any `extra` candidates.
pub fn chebyshev_estimate(
    points: &[L1Function],
    space: &MeasureSpace,
    extra: &[L1Function],
) -> Result<GeometryReport> {
    let diam = diameter(points, space)?;
    let mut candidates: Vec<L1Function> = points.to_vec();
    candidates.push(barycenter(points)?);
    let half = ratio(1, 2);
    for (i, f) in points.iter().enumerate() {
        for g in &points[i + 1..] {
            candidates.push(convex_combination(&half, f, g)?);
        }
    }
    candidates.extend(extra.iter().cloned());

    let mut best: Option<(Rat, L1Function)> = None;
    let mut all_diametral = true;
    for c in &candidates {
        let reach = farthest(c, points, space)?;
        if reach != diam.value {
            all_diametral = false;
        }
        if best.as_ref().is_none_or(|(b, _)| reach < *b) {
            best = Some((reach, c.clone()));
        }
    }
    let (radius_estimate, center) = best.expect("candidate set contains the points");
    let ratio = (!diam.value.is_zero()).then(|| &radius_estimate / &diam.value);
    Ok(GeometryReport {
        point_count: points.len(),
        candidate_count: candidates.len(),
        diameter: diam.value,
        diameter_pair: diam.witness,
        radius_estimate,
        center,
        ratio,
        diametral_flag: all_diametral,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MidpointProbe {
    pub midpoint: L1Function,
    #[serde(with = "exact::serde_rat")]
    pub midpoint_distance: Rat,
    #[serde(with = "exact::serde_rat")]
    pub half_distance: Rat,
    pub holds: bool,
}

/// Checks `‖m − g‖₁ = ½‖f − g‖₁` for `m = (f + g)/2`.
pub fn midpoint_probe(f: &L1Function, g: &L1Function, space: &MeasureSpace) -> Result<MidpointProbe> {
    let midpoint = convex_combination(&ratio(1, 2), f, g)?;
    let midpoint_distance = l1_distance(&midpoint, g, space)?;
    let half_distance = l1_distance(f, g, space)? / int(2);
    Ok(MidpointProbe {
        holds: midpoint_distance == half_distance,
        midpoint,
        midpoint_distance,
        half_distance,
    })
}
