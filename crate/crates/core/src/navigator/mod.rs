//! Perceive, plan, act. The robot executes the first primitive of a fresh
//! plan, is observed again, and replans. When planning fails it falls back
//! on the unconsumed tail of the last good plan.
//!
//! Execution is either a noisy replay of the primitive's nominal delta or a
//! full physics run of its gait. Disturbances (a drop, an incline, a patch
//! of granular ground) act on top of either.

mod execute;
mod observe;
mod run;


pub use execute::{execute_primitive, mirror_partner, Disturbance, Executor, PhysicsWorld, INCLINE_DRIFT_SPEED};
pub use observe::{observe, Observer};
pub use run::{run_closed_loop, run_open_loop, NavConfig, NavLog, NavOutcome, NavStep};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams of one run, all derived from its seed.
#[derive(Debug, Clone)]
pub struct NavRng {
    pub observer: ChaCha8Rng,
    pub executor: ChaCha8Rng,
    pub disturbance: ChaCha8Rng,
}

impl NavRng {
    pub fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self { observer: stream(1), executor: stream(2), disturbance: stream(3) }
    }
}
