//! Seeded feasible-point samplers and exhaustive grids.
//!
//! Every sample is a pure function of `(seed, index)`, so a diagnostic sweep
//! can be split across workers without changing its result.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exact::{derive_seed_indexed, ratio, Rat};
use crate::l1::{rescale_to_mass, FeasibleSetSpec, L1Function, MeasureSpace};

/// Number of equally spaced levels per coordinate.
pub const DEFAULT_RESOLUTION: u32 = 10_000;

#[derive(Debug, Clone)]
pub struct Sampler {
    space: MeasureSpace,
    set: FeasibleSetSpec,
    seed: u64,
    resolution: u32,
}

impl Sampler {
    pub fn new(space: MeasureSpace, set: FeasibleSetSpec, seed: u64) -> Self {
        Self {
            space,
            set,
            seed,
            resolution: DEFAULT_RESOLUTION,
        }
    }

    pub fn with_resolution(mut self, resolution: u32) -> Self {
        self.resolution = resolution.max(1);
        self
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws uniformly from the box on a `1/resolution` lattice; with a mass
    /// constraint, draws a positive vector and rescales it onto the mass shell.
    pub fn sample(&self, index: u64) -> Result<L1Function> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(self.seed, index));
        let res = i64::from(self.resolution);
        match &self.set.mass {
            None => {
                let width = &self.set.upper - &self.set.lower;
                let values = (0..self.space.len())
                    .map(|_| {
                        let k = rng.random_range(0..=res);
                        &self.set.lower + &width * ratio(k, res)
                    })
                    .collect();
                Ok(L1Function::new(values))
            }
            Some(mass) => {
                let raw: Vec<Rat> = (0..self.space.len())
                    .map(|_| ratio(rng.random_range(1..=res), res))
                    .collect();
                rescale_to_mass(&raw, &self.set, mass, &self.space)
            }
        }
    }

    /// A seeded rational in `[-1, 1]`, used for linear-combination coefficients.
    pub fn coefficient(&self, index: u64) -> Rat {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(!self.seed, index));
        let res = i64::from(self.resolution);
        ratio(rng.random_range(-res..=res), res)
    }
}

/// Where diagnostic points come from.
#[derive(Debug, Clone)]
pub enum Probe {
    /// `count` seeded draws (points) or `count` seeded pairs (pairs).
    Seeded { sampler: Box<Sampler>, count: usize },
    /// An explicit list; pair checks use every unordered pair.
    Points(Vec<L1Function>),
    /// Scalar multiples of `1/m` in `[0, 1]`; pair checks use every pair.
    ScalarGrid(u32),
}

impl Probe {
    pub fn seeded(sampler: Sampler, count: usize) -> Self {
        Probe::Seeded { sampler: Box::new(sampler), count }
    }

    pub fn points(&self) -> Result<Vec<L1Function>> {
        match self {
            Probe::Seeded { sampler, count } => {
                (0..*count as u64).map(|i| sampler.sample(i)).collect()
            }
            Probe::Points(points) => Ok(points.clone()),
            Probe::ScalarGrid(m) => Ok(scalar_grid(*m)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Probe::Seeded { sampler, count } => {
                format!("{count} seeded samples (seed {})", sampler.seed())
            }
            Probe::Points(points) => format!("{} explicit points", points.len()),
            Probe::ScalarGrid(m) => format!("multiples of 1/{m} in [0, 1]"),
        }
    }

    pub fn pairs(&self) -> Result<Vec<(L1Function, L1Function)>> {
        match self {
            Probe::Seeded { sampler, count } => (0..*count as u64)
                .map(|i| Ok((sampler.sample(2 * i)?, sampler.sample(2 * i + 1)?)))
                .collect(),
            Probe::Points(_) | Probe::ScalarGrid(_) => {
                let points = self.points()?;
                let mut pairs = Vec::new();
                for (i, f) in points.iter().enumerate() {
                    for g in &points[i + 1..] {
                        pairs.push((f.clone(), g.clone()));
                    }
                }
                Ok(pairs)
            }
        }
    }
}

/// Scalar points `k/m` for `k = 0..=m`.
pub fn scalar_grid(m: u32) -> Vec<L1Function> {
    let m = i64::from(m.max(1));
    (0..=m).map(|k| L1Function::scalar(ratio(k, m))).collect()
}

/// Scalar points `lower + k·(upper−lower)/m`.
pub fn scalar_grid_between(lower: &Rat, upper: &Rat, m: u32) -> Vec<L1Function> {
    let m = i64::from(m.max(1));
    let width = upper - lower;
    (0..=m)
        .map(|k| L1Function::scalar(lower + &width * ratio(k, m)))
        .collect()
}

/// True when every coordinate is a multiple of `step` in `[0, 1]`.
pub fn on_grid(f: &L1Function, step: &Rat) -> bool {
    f.values().iter().all(|v| {
        let q = v / step;
        q.is_integer() && *v >= Rat::zero() && *v <= Rat::one()
    })
}
