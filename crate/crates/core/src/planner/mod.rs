//! A* over SE(2) with motion primitives as edges.
//!
//! Nodes are popped by lowest `f = g + h`, where `h` is an 8-connected grid
//! distance to the goal scaled into cost units. A popped node is dropped
//! when it collides (at its pose or at the midpoint of the edge that
//! produced it) or when an already expanded pose lies within
//! `prune_radius` under the metric `|(dx, dy, w * dtheta)|`. Continuous
//! primitive compositions almost never revisit a pose exactly, so this
//! pruning is what keeps the search finite.

mod heuristic;
mod kdtree;
mod scenario;
mod search;


pub use heuristic::{build_heuristic, HeuristicField};
pub use kdtree::{pose_distance, PoseKdTree};
pub use scenario::{collision_detect, point_blocked, Obstacle, Point2, Rect, Scenario};
pub use search::{
    heuristic_scale, plan, propagate, reconstruct, search, search_reference, Plan, PlanNode, PlannerSettings,
    SearchReport,
};
