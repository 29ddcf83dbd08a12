use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

/// Disc obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(x: f64, y: f64, radius: f64) -> Self {
        Self { x, y, radius }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub boundary: Rect,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub start: Pose2,
    pub goal: Point2,
    #[serde(default = "default_goal_threshold")]
    pub goal_threshold: f64,
    #[serde(default = "default_robot_radius")]
    pub robot_radius: f64,
}

fn default_goal_threshold() -> f64 {
    0.15
}

fn default_robot_radius() -> f64 {
    0.2
}

impl Scenario {
    /// Default course: a 5 m by 3 m arena with two staggered obstacles
    /// between start and goal. The goal keeps clear of the walls so an
    /// overshoot leaves room to come back.
    pub fn two_obstacle_course() -> Self {
        Scenario {
            boundary: Rect::new(-0.5, -1.5, 4.5, 1.5),
            obstacles: vec![Obstacle::new(1.3, 0.3, 0.35), Obstacle::new(2.5, -0.4, 0.35)],
            start: Pose2::new(0.3, 0.0, 0.0),
            goal: Point2::new(3.6, 0.0),
            goal_threshold: default_goal_threshold(),
            robot_radius: default_robot_radius(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let b = &self.boundary;
        if !(b.width() > 0.0 && b.height() > 0.0) {
            return bad("boundary must have positive area".into());
        }
        if let Some(o) = self.obstacles.iter().find(|o| !(o.radius > 0.0) || !o.x.is_finite() || !o.y.is_finite()) {
            return bad(format!("obstacle radius must be positive: {o:?}"));
        }
        if !(self.robot_radius > 0.0) || !(self.goal_threshold > 0.0) {
            return bad("robot_radius and goal_threshold must be positive".into());
        }
        if !self.start.is_finite() || !b.contains(self.start.x, self.start.y) {
            return bad("start must lie inside the boundary".into());
        }
        if !b.contains(self.goal.x, self.goal.y) {
            return bad("goal must lie inside the boundary".into());
        }
        Ok(())
    }

    pub fn at_goal(&self, x: f64, y: f64) -> bool {
        self.goal.distance(x, y) <= self.goal_threshold
    }
}

/// Whether the robot disc at `(x, y)` strictly overlaps an obstacle or
/// leaves the boundary.
pub fn point_blocked(x: f64, y: f64, scenario: &Scenario) -> bool {
    let r = scenario.robot_radius;
    let b = &scenario.boundary;
    if x - r < b.min_x || x + r > b.max_x || y - r < b.min_y || y + r > b.max_y {
        return true;
    }
    scenario.obstacles.iter().any(|o| (x - o.x).hypot(y - o.y) < o.radius + r)
}

pub fn collision_detect(pose: &Pose2, scenario: &Scenario) -> bool {
    point_blocked(pose.x, pose.y, scenario)
}
