use std::f64::consts::PI;

use crate::geometry::{UnitQuat, Vec3};
use crate::physics::params::Robot;
use crate::physics::state::{RodState, SystemState};

/// Shortest-arc rotation taking the local z axis onto `dir`.
pub fn quat_from_z(dir: Vec3) -> UnitQuat {
    let z = Vec3::new(0.0, 0.0, 1.0);
    let d = dir * (1.0 / dir.norm());
    let c = z.dot(d);
    if c < -1.0 + 1e-12 {
        return UnitQuat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), PI);
    }
    let axis = z.cross(d);
    UnitQuat { w: 1.0 + c, x: axis.x, y: axis.y, z: axis.z }.normalized()
}

/// Assembled twisted prism lying on its side, before settling.
///
/// The Left end triangle sits at `+y`, the Right one at `-y`, both with the
/// given side length; the rods twist by -150° between them, which makes the
/// diagonal passive tendons the short (30°) ones. The lowest cap starts
/// `lift` above its resting height.
pub fn nominal_state(robot: &Robot, side: f64, lift: f64) -> SystemState {
    let topo = &robot.topology;
    let circ = side / 3f64.sqrt();
    let twist = -5.0 * PI / 6.0;
    let chord_sq = 2.0 * circ * circ * (1.0 - twist.cos());
    let h = (topo.rod_length * topo.rod_length - chord_sq).max(1e-6).sqrt();
    let phase = -5.0 * PI / 6.0;

    let point = |angle: f64, y: f64| Vec3::new(circ * angle.cos(), y, circ * angle.sin());
    let mut ends = Vec::with_capacity(3);
    for i in 0..3 {
        let a = phase + 2.0 * PI * i as f64 / 3.0;
        ends.push((point(a, 0.5 * h), point(a + twist, -0.5 * h)));
    }
    let min_z = ends.iter().flat_map(|(l, r)| [l.z, r.z]).fold(f64::INFINITY, f64::min);
    let dz = topo.end_cap_radius + lift - min_z;

    let rods = std::array::from_fn(|i| {
        let (l, r) = ends[i];
        let center = (l + r) * 0.5 + Vec3::new(0.0, 0.0, dz);
        RodState {
            position: center,
            orientation: quat_from_z(l - r),
            lin_vel: Vec3::zero(),
            ang_vel: Vec3::zero(),
        }
    });
    SystemState::at_rest(rods, [side; 6])
}
