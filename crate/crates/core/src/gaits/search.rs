use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaits::shape::{Gait, TargetShape};
use crate::gaits::sim::{simulate_gait, GaitSettings};
use crate::geometry::ACTUATED_COUNT;
use crate::physics::{ContactParams, Robot, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchObjective {
    /// Forward displacement per cycle.
    MaxForward,
    /// Heading change magnitude per cycle.
    MaxTurn,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub gait: Gait,
    pub value: f64,
    pub seed_value: f64,
    /// Best-so-far objective after each evaluation.
    pub history: Vec<f64>,
}

const SEQUENCE_LENGTH: usize = 4;
const QUANTUM: f64 = 0.01;

struct Lattice {
    min: f64,
    levels: i64,
}

impl Lattice {
    fn value(&self, level: i64) -> f64 {
        self.min + level as f64 * QUANTUM
    }

    fn level(&self, v: f64) -> i64 {
        (((v - self.min) / QUANTUM).round() as i64).clamp(0, self.levels - 1)
    }

    fn random_shape(&self, rng: &mut ChaCha8Rng) -> TargetShape {
        TargetShape::new(std::array::from_fn(|_| self.value(rng.random_range(0..self.levels))))
    }
}

fn evaluate(
    gait: &Gait,
    objective: SearchObjective,
    rest: &SystemState,
    cp: &ContactParams,
    robot: &Robot,
    settings: &GaitSettings,
) -> f64 {
    match simulate_gait(gait, rest, cp, robot, settings) {
        Ok(out) => match objective {
            SearchObjective::MaxForward => out.delta.x,
            SearchObjective::MaxTurn => out.delta.theta.abs(),
        },
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Seeded hill-climb over cyclic 4-shape gaits with targets on a 10 mm
/// lattice inside the shape limits. The first evaluation is a random seed
/// gait; each later one mutates the incumbent and keeps the mutant if it is
/// at least as good.
pub fn search_gait(
    objective: SearchObjective,
    budget: usize,
    seed: u64,
    rest: &SystemState,
    cp: &ContactParams,
    robot: &Robot,
    settings: &GaitSettings,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::InvalidArgument("search budget must be at least 1".into()));
    }
    settings.validate()?;
    let limits = &settings.limits;
    let lattice = Lattice {
        min: limits.min_length,
        levels: ((limits.max_length - limits.min_length) / QUANTUM).floor() as i64 + 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = Gait {
        name: format!("search-{objective:?}-{seed}"),
        shapes: (0..SEQUENCE_LENGTH).map(|_| lattice.random_shape(&mut rng)).collect(),
        cyclic: true,
    };
    let mut best_value = evaluate(&best, objective, rest, cp, robot, settings);
    let seed_value = best_value;
    let mut history = vec![best_value];

    for _ in 1..budget {
        let mut cand = best.clone();
        let k = rng.random_range(0..SEQUENCE_LENGTH);
        if rng.random_bool(0.25) {
            cand.shapes[k] = lattice.random_shape(&mut rng);
        } else {
            let i = rng.random_range(0..ACTUATED_COUNT);
            let step = rng.random_range(1..=3) * if rng.random_bool(0.5) { 1 } else { -1 };
            let level = lattice.level(cand.shapes[k].targets[i]) + step;
            cand.shapes[k].targets[i] = lattice.value(level.clamp(0, lattice.levels - 1));
        }
        let v = evaluate(&cand, objective, rest, cp, robot, settings);
        if v >= best_value {
            best = cand;
            best_value = v;
        }
        history.push(best_value);
    }
    Ok(SearchResult { gait: best, value: best_value, seed_value, history })
}
