//! End-cap / ground contact: sequential impulses with restitution, Baumgarte
//! bias and a linearized Coulomb cone.

use crate::geometry::{Vec3, CAP_COUNT};
use crate::physics::params::{BodyParams, ContactParams, Robot, Theta};
use crate::physics::state::{RodState, SystemState};
use crate::real::Real;

/// Accumulated impulse on one end cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactImpulse<R = f64> {
    pub cap: usize,
    /// Penetration depth of the cap sphere into the ground (negative = gap).
    pub depth: R,
    pub normal: R,
    pub tangent: [R; 2],
}

struct ActiveContact<R> {
    cap: usize,
    rod: usize,
    arm: Vec3<R>,
    depth: R,
    target: R,
    k_nn: R,
    // inverse of the 2×2 tangential block of the effective-mass matrix
    kt_inv: [[R; 2]; 2],
    jn: R,
    jt: [R; 2],
}

#[inline]
fn apply_impulse<R: Real>(rod: &mut RodState<R>, arm: Vec3<R>, j: Vec3<R>, inv_mass: f64, inv_inertia: f64) {
    rod.lin_vel += j * inv_mass;
    rod.ang_vel += arm.cross(j) * inv_inertia;
}

/// Resolve ground contacts in place on the rods' velocities. Positions are
/// read as-is; only velocities change.
pub(crate) fn solve_contacts<R: Real>(
    rods: &mut [RodState<R>; 3],
    theta: &Theta<R>,
    half_length: f64,
    cap_radius: f64,
    body: &BodyParams,
) -> Vec<ContactImpulse<R>> {
    let inv_m = 1.0 / body.rod_mass;
    let inv_i = 1.0 / body.rod_inertia;
    let dt = body.dt;

    let mut contacts: Vec<ActiveContact<R>> = Vec::with_capacity(CAP_COUNT);
    for (r, rod) in rods.iter().enumerate() {
        let axis = rod.axis();
        for end in 0..2 {
            let arm = if end == 0 { axis.scale(R::cst(half_length)) } else { axis.scale(R::cst(-half_length)) };
            let center = rod.position + arm;
            let depth = -(center.z - cap_radius);
            if depth.value() <= -body.speculative_margin {
                continue;
            }
            let vn0 = rod.point_velocity(arm).z;
            let target = if depth.value() >= 0.0 {
                let approach = vn0.min(R::zero());
                let bounce = if -approach.value() > body.restitution_threshold { -(theta.epsilon * approach) } else { R::zero() };
                bounce + theta.beta * (depth - body.contact_slop).max(R::zero()) / dt
            } else {
                depth / dt
            };
            // K = (1/m + |r|²/I) Id - r rᵀ / I
            let diag = arm.norm_sq() * inv_i + inv_m;
            let kxx = diag - arm.x * arm.x * inv_i;
            let kyy = diag - arm.y * arm.y * inv_i;
            let kxy = -(arm.x * arm.y * inv_i);
            let k_nn = diag - arm.z * arm.z * inv_i;
            let det = kxx * kyy - kxy * kxy;
            let kt_inv = [[kyy / det, -kxy / det], [-kxy / det, kxx / det]];
            contacts.push(ActiveContact {
                cap: 2 * r + end,
                rod: r,
                arm,
                depth,
                target,
                k_nn,
                kt_inv,
                jn: R::zero(),
                jt: [R::zero(), R::zero()],
            });
        }
    }

    for _ in 0..body.solver_iterations {
        for c in contacts.iter_mut() {
            let rod = &mut rods[c.rod];

            let vn = rod.point_velocity(c.arm).z;
            let jn_new = (c.jn + (c.target - vn) / c.k_nn).max(R::zero());
            let djn = jn_new - c.jn;
            c.jn = jn_new;
            apply_impulse(rod, c.arm, Vec3::new(R::zero(), R::zero(), djn), inv_m, inv_i);

            let v = rod.point_velocity(c.arm);
            let dx = -(c.kt_inv[0][0] * v.x + c.kt_inv[0][1] * v.y);
            let dy = -(c.kt_inv[1][0] * v.x + c.kt_inv[1][1] * v.y);
            let mut cand = [c.jt[0] + dx, c.jt[1] + dy];
            let limit = theta.mu * c.jn;
            let mag = (cand[0] * cand[0] + cand[1] * cand[1]).sqrt();
            if mag.value() > limit.value() {
                let s = limit / mag;
                cand = [cand[0] * s, cand[1] * s];
            }
            let dj = Vec3::new(cand[0] - c.jt[0], cand[1] - c.jt[1], R::zero());
            c.jt = cand;
            apply_impulse(rod, c.arm, dj, inv_m, inv_i);
        }
    }

    contacts
        .into_iter()
        .map(|c| ContactImpulse { cap: c.cap, depth: c.depth, normal: c.jn, tangent: c.jt })
        .collect()
}

/// Contact impulses for the state's current velocities, treated as the
/// pre-impulse velocities of a step. Only caps touching or penetrating the
/// ground (depth ≥ 0) are reported.
pub fn resolve_contacts(state: &SystemState, params: &ContactParams, robot: &Robot) -> Vec<ContactImpulse> {
    let mut rods = state.rods;
    let theta = Theta::primal(params);
    solve_contacts(&mut rods, &theta, robot.topology.rod_length * 0.5, robot.topology.end_cap_radius, &robot.body)
        .into_iter()
        .filter(|c| c.depth >= 0.0)
        .collect()
}

/// Like [`resolve_contacts`] but also returns the post-impulse rod states.
pub fn resolve_contacts_with_velocities(
    state: &SystemState,
    params: &ContactParams,
    robot: &Robot,
) -> (Vec<ContactImpulse>, [RodState; 3]) {
    let mut rods = state.rods;
    let theta = Theta::primal(params);
    let imp =
        solve_contacts(&mut rods, &theta, robot.topology.rod_length * 0.5, robot.topology.end_cap_radius, &robot.body);
    (imp, rods)
}
