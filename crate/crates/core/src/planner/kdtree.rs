//! Incremental 3-d tree over planar poses embedded as `(x, y, w * theta)`.
//! Headings wrap, so a query also probes the copy of the query point
//! shifted by a full turn.

use std::f64::consts::PI;

use crate::geometry::Pose2;

#[derive(Debug, Clone)]
struct Node {
    p: [f64; 3],
    left: Option<usize>,
    right: Option<usize>,
}

/// Nearest-neighbor index of explored poses.
#[derive(Debug, Clone)]
pub struct PoseKdTree {
    weight: f64,
    nodes: Vec<Node>,
}

fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

impl PoseKdTree {
    /// `weight` converts radians to meters in the metric.
    pub fn new(weight: f64) -> Self {
        Self { weight, nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn embed(&self, p: &Pose2) -> [f64; 3] {
        [p.x, p.y, self.weight * p.theta]
    }

    pub fn insert(&mut self, pose: &Pose2) {
        let p = self.embed(pose);
        let idx = self.nodes.len();
        self.nodes.push(Node { p, left: None, right: None });
        if idx == 0 {
            return;
        }
        let mut cur = 0;
        let mut depth = 0;
        loop {
            let axis = depth % 3;
            let go_left = p[axis] < self.nodes[cur].p[axis];
            let next = if go_left { self.nodes[cur].left } else { self.nodes[cur].right };
            match next {
                Some(n) => {
                    cur = n;
                    depth += 1;
                }
                None => {
                    if go_left {
                        self.nodes[cur].left = Some(idx);
                    } else {
                        self.nodes[cur].right = Some(idx);
                    }
                    return;
                }
            }
        }
    }

    fn search(&self, node: Option<usize>, depth: usize, q: &[f64; 3], best: &mut f64) {
        let Some(i) = node else { return };
        let n = &self.nodes[i];
        let d = dist_sq(&n.p, q);
        if d < *best {
            *best = d;
        }
        let axis = depth % 3;
        let diff = q[axis] - n.p[axis];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.search(near, depth + 1, q, best);
        if diff * diff < *best {
            self.search(far, depth + 1, q, best);
        }
    }

    /// Distance to the nearest stored pose under the wrapped weighted
    /// metric, or `None` when empty.
    pub fn nearest_distance(&self, pose: &Pose2) -> Option<f64> {
        if self.nodes.is_empty() {
            return None;
        }
        let q = self.embed(pose);
        let mut best = f64::INFINITY;
        self.search(Some(0), 0, &q, &mut best);
        let shift = if pose.theta > 0.0 { -2.0 * PI } else { 2.0 * PI };
        let q2 = [q[0], q[1], q[2] + self.weight * shift];
        self.search(Some(0), 0, &q2, &mut best);
        Some(best.sqrt())
    }
}

/// The same metric evaluated directly.
pub fn pose_distance(a: &Pose2, b: &Pose2, weight: f64) -> f64 {
    let dth = crate::geometry::wrap_angle(a.theta - b.theta);
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (weight * dth).powi(2)).sqrt()
}
