//! Kinematic types: 3D vectors and rotations, planar SE(2) poses, the 3-bar
//! topology, and the projection of a full rod state onto a planar pose.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::SystemState;
use crate::real::Real;

/// Three-component vector over any [`Real`] scalar.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<R = f64> {
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> Vec3<R> {
    #[inline]
    pub fn new(x: R, y: R, z: R) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero(), R::zero())
    }

    pub fn from_f64(v: Vec3<f64>) -> Self {
        Self::new(R::cst(v.x), R::cst(v.y), R::cst(v.z))
    }

    pub fn value(self) -> Vec3<f64> {
        Vec3::new(self.x.value(), self.y.value(), self.z.value())
    }

    #[inline]
    pub fn dot(self, o: Self) -> R {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> R {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> R {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn scale(self, s: R) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<R: Real> Add for Vec3<R> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<R: Real> Sub for Vec3<R> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<R: Real> Neg for Vec3<R> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<R: Real> Mul<f64> for Vec3<R> {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<R: Real> AddAssign for Vec3<R> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<R: Real> SubAssign for Vec3<R> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

/// Rotation quaternion, kept at unit norm by [`UnitQuat::normalized`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuat<R = f64> {
    pub w: R,
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> Default for UnitQuat<R> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<R: Real> UnitQuat<R> {
    pub fn identity() -> Self {
        Self { w: R::one(), x: R::zero(), y: R::zero(), z: R::zero() }
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vec3<R>, angle: R) -> Self {
        let n = axis.norm();
        let half = angle * 0.5;
        let s = half.sin() / n;
        Self { w: half.cos(), x: axis.x * s, y: axis.y * s, z: axis.z * s }
    }

    pub fn from_f64(q: UnitQuat<f64>) -> Self {
        Self { w: R::cst(q.w), x: R::cst(q.x), y: R::cst(q.y), z: R::cst(q.z) }
    }

    pub fn value(self) -> UnitQuat<f64> {
        UnitQuat { w: self.w.value(), x: self.x.value(), y: self.y.value(), z: self.z.value() }
    }

    pub fn norm(self) -> R {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conjugate(self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self ⊗ o`.
    pub fn mul(self, o: Self) -> Self {
        Self {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    #[inline]
    pub fn rotate(self, v: Vec3<R>) -> Vec3<R> {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v).scale(R::cst(2.0));
        v + t.scale(self.w) + u.cross(t)
    }

    /// Advance by a world-frame angular velocity over `dt` using the exact
    /// exponential map, then renormalize.
    pub fn integrate(self, omega: Vec3<R>, dt: f64) -> Self {
        let rate = omega.norm_sq();
        let half_dt = dt * 0.5;
        let (c, s) = if rate.value() > 1e-24 {
            let w = rate.sqrt();
            let half = w * half_dt;
            (half.cos(), half.sin() / w)
        } else {
            (R::one() - rate * (half_dt * half_dt * 0.5), R::cst(half_dt))
        };
        let dq = Self { w: c, x: omega.x * s, y: omega.y * s, z: omega.z * s };
        dq.mul(self).normalized()
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Planar pose in SE(2). `theta` is kept wrapped to `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// Group composition `self ∘ other`: `other` is expressed in the frame of
    /// `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)
    }

    /// Relative transform taking `self` to `other`, i.e. `self⁻¹ ∘ other`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    pub fn translation_norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    /// Map a ground-plane point through this transform.
    pub fn transform_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * x - s * y, self.y + s * x + c * y)
    }

    /// Reflection about the body x-axis.
    pub fn reflected(&self) -> Pose2 {
        Pose2::new(self.x, -self.y, -self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// `a ∘ b` in SE(2).
pub fn se2_compose(a: Pose2, b: Pose2) -> Pose2 {
    a.compose(&b)
}

/// Which side of the robot an actuated tendon belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A cable between two rod ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tendon {
    pub rod_a: usize,
    pub end_a: usize,
    pub rod_b: usize,
    pub end_b: usize,
    pub actuated: bool,
}

impl Tendon {
    fn new(rod_a: usize, end_a: usize, rod_b: usize, end_b: usize, actuated: bool) -> Self {
        Self { rod_a, end_a, rod_b, end_b, actuated }
    }

    pub fn cap_a(&self) -> usize {
        2 * self.rod_a + self.end_a
    }

    pub fn cap_b(&self) -> usize {
        2 * self.rod_b + self.end_b
    }
}

pub const ROD_COUNT: usize = 3;
pub const CAP_COUNT: usize = 2 * ROD_COUNT;
pub const ACTUATED_COUNT: usize = 6;

/// Connectivity and dimensions of the tensegrity.
///
/// Rod ends are indexed `2 * rod + end`. End 0 lies at `+L/2` along the rod's
/// local z axis, end 1 at `-L/2`. In the default topology every end 0 is on
/// the Left side and every end 1 on the Right side; the actuated tendons are
/// the two end triangles and the passive tendons run diagonally between
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub rod_count: usize,
    pub rod_length: f64,
    pub end_cap_radius: f64,
    pub tendons: Vec<Tendon>,
    /// Side label of each actuated tendon, in actuated order.
    pub side_assignment: Vec<Side>,
    /// Actuated-tendon permutation realizing the Left/Right swap.
    pub mirror: Vec<usize>,
}

impl Default for Topology {
    fn default() -> Self {
        Self::three_bar(0.35, 0.02)
    }
}

impl Topology {
    pub fn three_bar(rod_length: f64, end_cap_radius: f64) -> Self {
        let tendons = vec![
            Tendon::new(0, 0, 1, 0, true),
            Tendon::new(1, 0, 2, 0, true),
            Tendon::new(2, 0, 0, 0, true),
            Tendon::new(0, 1, 1, 1, true),
            Tendon::new(1, 1, 2, 1, true),
            Tendon::new(2, 1, 0, 1, true),
            Tendon::new(0, 0, 1, 1, false),
            Tendon::new(1, 0, 2, 1, false),
            Tendon::new(2, 0, 0, 1, false),
        ];
        let side_assignment = vec![Side::Left, Side::Left, Side::Left, Side::Right, Side::Right, Side::Right];
        // Left/Right relabeling used for mirrored gaits. The body is chiral,
        // so no relabeling is an exact reflection; of the three valid
        // involutions this one gives the most nearly opposite turns.
        let mirror = vec![3, 5, 4, 0, 2, 1];
        Self { rod_count: 3, rod_length, end_cap_radius, tendons, side_assignment, mirror }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidTopology(msg.to_string()));
        if self.rod_count != ROD_COUNT {
            return bad("rod_count must be 3");
        }
        if !(self.rod_length > 0.0) || !(self.end_cap_radius > 0.0) {
            return bad("rod_length and end_cap_radius must be positive");
        }
        if self.tendons.len() != 9 {
            return bad("exactly 9 tendons required");
        }
        if self.tendons.iter().filter(|t| t.actuated).count() != ACTUATED_COUNT {
            return bad("exactly 6 tendons must be actuated");
        }
        for t in &self.tendons {
            if t.rod_a == t.rod_b {
                return bad("tendon connects a rod to itself");
            }
            if t.rod_a >= self.rod_count || t.rod_b >= self.rod_count || t.end_a > 1 || t.end_b > 1 {
                return bad("tendon endpoint out of range");
            }
        }
        if self.side_assignment.len() != ACTUATED_COUNT {
            return bad("side assignment must label all 6 actuated tendons");
        }
        let left = self.side_assignment.iter().filter(|s| **s == Side::Left).count();
        if left != 3 {
            return bad("exactly 3 actuated tendons must be Left and 3 Right");
        }
        if self.mirror.len() != ACTUATED_COUNT {
            return bad("mirror map must cover the 6 actuated tendons");
        }
        for (i, &j) in self.mirror.iter().enumerate() {
            if j >= ACTUATED_COUNT || self.mirror[j] != i || self.side_assignment[i] == self.side_assignment[j] {
                return bad("mirror map must be a Left/Right involution");
            }
        }
        Ok(())
    }

    /// Actuated tendons in actuated order (the order of rest lengths and
    /// targets).
    pub fn actuated(&self) -> impl Iterator<Item = &Tendon> {
        self.tendons.iter().filter(|t| t.actuated)
    }

    pub fn passive(&self) -> impl Iterator<Item = &Tendon> {
        self.tendons.iter().filter(|t| !t.actuated)
    }

    /// Cap indices on the given side (the ends touched by that side's
    /// actuated tendons).
    pub fn side_caps(&self, side: Side) -> Vec<usize> {
        let mut caps: Vec<usize> = self
            .actuated()
            .zip(&self.side_assignment)
            .filter(|(_, s)| **s == side)
            .flat_map(|(t, _)| [t.cap_a(), t.cap_b()])
            .collect();
        caps.sort_unstable();
        caps.dedup();
        caps
    }
}

/// World positions of the 6 end caps, ordered by rod then end.
pub fn end_cap_positions<R: Real>(state: &SystemState<R>, topo: &Topology) -> [Vec3<R>; CAP_COUNT] {
    let half = topo.rod_length * 0.5;
    let mut caps = [Vec3::zero(); CAP_COUNT];
    for (i, rod) in state.rods.iter().enumerate() {
        let axis = rod.axis().scale(R::cst(half));
        caps[2 * i] = rod.position + axis;
        caps[2 * i + 1] = rod.position - axis;
    }
    caps
}

fn mean(points: &[Vec3<f64>]) -> Vec3<f64> {
    let mut acc = Vec3::zero();
    for p in points {
        acc += *p;
    }
    acc * (1.0 / points.len() as f64)
}

/// Planar pose from cap positions alone.
///
/// Position is the ground projection of the cap centroid. Heading is the
/// ground projection of the Right-to-Left end axis rotated by -90°, so that
/// a body rolling about that axis moves along its +x heading.
pub fn pose2_from_caps(caps: &[Vec3<f64>; CAP_COUNT], topo: &Topology) -> Result<Pose2> {
    let centroid = mean(caps);
    let left: Vec<Vec3<f64>> = topo.side_caps(Side::Left).iter().map(|&c| caps[c]).collect();
    let right: Vec<Vec3<f64>> = topo.side_caps(Side::Right).iter().map(|&c| caps[c]).collect();
    let axis = mean(&left) - mean(&right);
    // forward = axis rotated by -90° about z
    let (fx, fy) = (axis.y, -axis.x);
    if fx.hypot(fy) < 1e-9 {
        return Err(Error::DegenerateHeading);
    }
    Ok(Pose2::new(centroid.x, centroid.y, fy.atan2(fx)))
}

pub fn extract_pose2(state: &SystemState, topo: &Topology) -> Result<Pose2> {
    pose2_from_caps(&end_cap_positions(state, topo), topo)
}

/// Rigidly move a state by a ground-plane transform (yaw about the world z
/// axis followed by a planar translation). Velocities rotate with it.
pub fn transform_state(state: &SystemState, t: &Pose2) -> SystemState {
    let rot = UnitQuat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), t.theta);
    let shift = Vec3::new(t.x, t.y, 0.0);
    let mut out = state.clone();
    for rod in out.rods.iter_mut() {
        rod.position = rot.rotate(rod.position) + shift;
        rod.orientation = rot.mul(rod.orientation).normalized();
        rod.lin_vel = rot.rotate(rod.lin_vel);
        rod.ang_vel = rot.rotate(rod.ang_vel);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::RodState;
    use proptest::prelude::*;

    /// 3×3 homogeneous matrix of a planar pose.
    fn mat(p: Pose2) -> [[f64; 3]; 3] {
        let (s, c) = p.theta.sin_cos();
        [[c, -s, p.x], [s, c, p.y], [0.0, 0.0, 1.0]]
    }

    fn matmul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        m
    }

    fn pose_close(a: Pose2, b: Pose2, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && wrap_angle(a.theta - b.theta).abs() <= tol
    }

    #[test]
    fn compose_examples() {
        let r = se2_compose(Pose2::new(0.0, 0.0, 0.0), Pose2::new(1.0, 0.0, 0.0));
        assert!(pose_close(r, Pose2::new(1.0, 0.0, 0.0), 1e-15));
        let r = se2_compose(Pose2::new(0.0, 0.0, PI / 2.0), Pose2::new(1.0, 0.0, 0.0));
        assert!(pose_close(r, Pose2::new(0.0, 1.0, PI / 2.0), 1e-15));

        let a = Pose2::new(1.0, 2.0, 0.3);
        let b = Pose2::new(0.5, -0.1, 0.2);
        let m = matmul(mat(a), mat(b));
        let r = se2_compose(a, b);
        assert!((r.x - m[0][2]).abs() < 1e-14);
        assert!((r.y - m[1][2]).abs() < 1e-14);
        assert!((r.theta - m[1][0].atan2(m[0][0])).abs() < 1e-14);
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    fn rod(position: Vec3, orientation: UnitQuat) -> RodState {
        RodState { position, orientation, lin_vel: Vec3::zero(), ang_vel: Vec3::zero() }
    }

    fn single_rod_state(q: UnitQuat) -> SystemState {
        let mut s = SystemState::at_rest([rod(Vec3::zero(), UnitQuat::identity()); 3], [0.2; 6]);
        s.rods[0].orientation = q;
        s
    }

    #[test]
    fn cap_positions_identity_and_quarter_turn() {
        let topo = Topology::default();
        let caps = end_cap_positions(&single_rod_state(UnitQuat::identity()), &topo);
        assert!((caps[0] - Vec3::new(0.0, 0.0, 0.175)).norm() < 1e-15);
        assert!((caps[1] - Vec3::new(0.0, 0.0, -0.175)).norm() < 1e-15);

        let q = UnitQuat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), PI / 2.0);
        let caps = end_cap_positions(&single_rod_state(q), &topo);
        assert!((caps[0] - Vec3::new(0.0, -0.175, 0.0)).norm() < 1e-15);
        assert!((caps[1] - Vec3::new(0.0, 0.175, 0.0)).norm() < 1e-15);
    }

    /// Rotation matrix from a unit quaternion, written out independently of
    /// `UnitQuat::rotate`.
    fn rotation_matrix(q: UnitQuat) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    fn quat_strategy() -> impl Strategy<Value = UnitQuat> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-3)
            .prop_map(|(w, x, y, z)| UnitQuat { w, x, y, z }.normalized())
    }

    fn pose_strategy() -> impl Strategy<Value = Pose2> {
        (-5.0..5.0f64, -5.0..5.0f64, -PI..PI).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn caps_match_matrix_oracle(q in quat_strategy(), px in -1.0..1.0f64, pz in 0.0..1.0f64) {
            let topo = Topology::default();
            let mut s = single_rod_state(q);
            s.rods[0].position = Vec3::new(px, 0.3, pz);
            let caps = end_cap_positions(&s, &topo);
            let m = rotation_matrix(q);
            for (k, sign) in [(0usize, 1.0), (1, -1.0)] {
                let local = [0.0, 0.0, sign * 0.175];
                let expect = Vec3::new(
                    px + (0..3).map(|j| m[0][j] * local[j]).sum::<f64>(),
                    0.3 + (0..3).map(|j| m[1][j] * local[j]).sum::<f64>(),
                    pz + (0..3).map(|j| m[2][j] * local[j]).sum::<f64>(),
                );
                prop_assert!((caps[k] - expect).norm() < 1e-12);
            }
            prop_assert!(((caps[0] - caps[1]).norm() - topo.rod_length).abs() < 1e-12);
        }

        #[test]
        fn compose_is_associative_with_identity(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!(pose_close(l, r, 1e-12));
            prop_assert!(pose_close(Pose2::identity().compose(&a), a, 1e-12));
            prop_assert!(pose_close(a.compose(&Pose2::identity()), a, 1e-12));
            prop_assert!(pose_close(a.compose(&a.inverse()), Pose2::identity(), 1e-12));
        }
    }

    #[test]
    fn default_topology_is_valid() {
        let topo = Topology::default();
        topo.validate().unwrap();
        assert_eq!(topo.side_caps(Side::Left), vec![0, 2, 4]);
        assert_eq!(topo.side_caps(Side::Right), vec![1, 3, 5]);
    }

    #[test]
    fn topology_rejects_bad_layouts() {
        let mut t = Topology::default();
        t.tendons[0].rod_b = 0;
        assert!(t.validate().is_err());

        let mut t = Topology::default();
        t.tendons[6].actuated = true;
        assert!(t.validate().is_err());

        let mut t = Topology::default();
        t.side_assignment[0] = Side::Right;
        assert!(t.validate().is_err());

        let mut t = Topology::default();
        t.tendons.pop();
        assert!(t.validate().is_err());
    }

    #[test]
    fn heading_degenerates_when_standing_on_end() {
        let topo = Topology::default();
        let mut s = single_rod_state(UnitQuat::identity());
        for (i, r) in s.rods.iter_mut().enumerate() {
            let a = 2.0 * PI * i as f64 / 3.0;
            r.position = Vec3::new(0.1 * a.cos(), 0.1 * a.sin(), 0.2);
        }
        assert!(matches!(extract_pose2(&s, &topo), Err(Error::DegenerateHeading)));
    }
}
