use crate::error::{Error, Result};
use crate::geometry::{end_cap_positions, Vec3, CAP_COUNT};
use crate::physics::contact::solve_contacts;
use crate::physics::params::{ContactParams, Robot, Theta};
use crate::physics::state::{Control, SensitiveState, SystemState};
use crate::real::{Dual, Real};

/// Cable tension for a tension-only spring-damper. Damping acts only while
/// the cable is taut, and the result is never negative.
pub fn cable_force(length: f64, rest: f64, speed: f64, k: f64, c: f64) -> f64 {
    cable_tension(length, rest, speed, k, c)
}

#[inline]
fn cable_tension<R: Real>(length: R, rest: f64, speed: R, k: f64, c: f64) -> R {
    if length.value() > rest {
        ((length - rest) * k + speed * c).max(R::zero())
    } else {
        R::zero()
    }
}

/// Name of the first non-finite quantity in a state, if any.
pub(crate) fn first_non_finite<R: Real>(state: &SystemState<R>) -> Option<String> {
    for (i, r) in state.rods.iter().enumerate() {
        if !r.position.is_finite() {
            return Some(format!("rod {i} position"));
        }
        if !r.orientation.is_finite() {
            return Some(format!("rod {i} orientation"));
        }
        if !r.lin_vel.is_finite() {
            return Some(format!("rod {i} lin_vel"));
        }
        if !r.ang_vel.is_finite() {
            return Some(format!("rod {i} ang_vel"));
        }
    }
    None
}

/// Actuator: each rest length moves toward its target at most
/// `motor_speed * dt` per step.
pub fn actuate(rest: &[f64; 6], control: &Control, motor_speed: f64, dt: f64) -> [f64; 6] {
    let max = motor_speed * dt;
    let mut out = *rest;
    for (r, t) in out.iter_mut().zip(control.targets.iter()) {
        *r += (t - *r).clamp(-max, max);
    }
    out
}

/// One semi-implicit Euler step, generic over the scalar type.
pub(crate) fn step_generic<R: Real>(
    state: &SystemState<R>,
    control: &Control,
    theta: &Theta<R>,
    cp: &ContactParams,
    robot: &Robot,
) -> Result<SystemState<R>> {
    let body = &robot.body;
    let topo = &robot.topology;
    let dt = body.dt;
    let half = topo.rod_length * 0.5;

    let rest = actuate(&state.rest_lengths, control, body.motor_speed, dt);

    let caps = end_cap_positions(state, topo);
    let mut cap_vel = [Vec3::<R>::zero(); CAP_COUNT];
    let mut arms = [Vec3::<R>::zero(); CAP_COUNT];
    for (i, rod) in state.rods.iter().enumerate() {
        let axis = rod.axis().scale(R::cst(half));
        arms[2 * i] = axis;
        arms[2 * i + 1] = -axis;
        cap_vel[2 * i] = rod.point_velocity(axis);
        cap_vel[2 * i + 1] = rod.point_velocity(-axis);
    }

    let mut cap_force = [Vec3::<R>::zero(); CAP_COUNT];
    let mut act = 0;
    for t in &topo.tendons {
        let (a, b) = (t.cap_a(), t.cap_b());
        let d = caps[b] - caps[a];
        let len = d.norm();
        if !(len.value() > 0.0) {
            if t.actuated {
                act += 1;
            }
            continue;
        }
        let u = d.scale(R::one() / len);
        let speed = (cap_vel[b] - cap_vel[a]).dot(u);
        let tension = if t.actuated {
            let r = rest[act];
            act += 1;
            cable_tension(len, r, speed, cp.stiffness, cp.damping)
        } else {
            cable_tension(len, body.passive_rest_length, speed, body.passive_stiffness, body.passive_damping)
        };
        let f = u.scale(tension);
        cap_force[a] += f;
        cap_force[b] -= f;
    }

    let inv_m = 1.0 / body.rod_mass;
    let inv_i = 1.0 / body.rod_inertia;
    let g = Vec3::<R>::from_f64(body.gravity);
    let mut rods = state.rods;
    for (i, rod) in rods.iter_mut().enumerate() {
        let force = cap_force[2 * i] + cap_force[2 * i + 1];
        let torque = arms[2 * i].cross(cap_force[2 * i]) + arms[2 * i + 1].cross(cap_force[2 * i + 1]);
        rod.lin_vel += (g + force * inv_m) * dt;
        rod.ang_vel += torque * (inv_i * dt);
    }

    solve_contacts(&mut rods, theta, half, topo.end_cap_radius, body);

    for rod in rods.iter_mut() {
        rod.position += rod.lin_vel * dt;
        rod.orientation = rod.orientation.integrate(rod.ang_vel, dt);
    }

    let next = SystemState { rods, rest_lengths: rest, time: state.time + dt };
    if let Some(quantity) = first_non_finite(&next) {
        return Err(Error::IntegrationBlowup { quantity, time: next.time });
    }
    Ok(next)
}

/// Advance the state by one `dt`.
pub fn step(state: &SystemState, control: &Control, cp: &ContactParams, robot: &Robot) -> Result<SystemState> {
    step_generic(state, control, &Theta::primal(cp), cp, robot)
}

/// One step carrying derivatives w.r.t. `(mu, epsilon, beta)`.
///
/// The input state's tangents are propagated, so chaining this function
/// yields sensitivities of a whole rollout. Seed a rollout with
/// [`SystemState::lift`] (zero tangents).
pub fn step_with_gradient(
    state: &SensitiveState,
    control: &Control,
    cp: &ContactParams,
    robot: &Robot,
) -> Result<SensitiveState> {
    step_generic(state, control, &Theta::<Dual<3>>::seeded(cp), cp, robot)
}

/// A control held for a duration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ControlSegment {
    pub control: Control,
    pub duration: f64,
}

impl ControlSegment {
    pub fn new(targets: [f64; 6], duration: f64) -> Self {
        Self { control: Control::new(targets), duration }
    }

    /// Number of integration steps this segment spans (at least one).
    pub fn steps(&self, dt: f64) -> usize {
        ((self.duration / dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<R = f64> {
    /// Global step count at which the snapshot was taken.
    pub step: usize,
    pub state: SystemState<R>,
}

/// Recorded rollout. `boundaries[k]` indexes the snapshot taken at the end of
/// control segment `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<R = f64> {
    pub snapshots: Vec<Snapshot<R>>,
    pub boundaries: Vec<usize>,
}

impl<R: Real> Trajectory<R> {
    pub fn final_state(&self) -> &SystemState<R> {
        &self.snapshots.last().expect("trajectory always holds the initial state").state
    }

    pub fn boundary_state(&self, segment: usize) -> &SystemState<R> {
        &self.snapshots[self.boundaries[segment]].state
    }
}

fn rollout_generic<R: Real>(
    state0: &SystemState<R>,
    segments: &[ControlSegment],
    theta: &Theta<R>,
    cp: &ContactParams,
    robot: &Robot,
    stride: usize,
) -> Result<Trajectory<R>> {
    if segments.is_empty() {
        return Err(Error::InvalidArgument("rollout needs at least one control".into()));
    }
    let stride = stride.max(1);
    let mut snapshots = vec![Snapshot { step: 0, state: state0.clone() }];
    let mut boundaries = Vec::with_capacity(segments.len());
    let mut state = state0.clone();
    let mut k = 0usize;
    for seg in segments {
        let n = seg.steps(robot.body.dt);
        for i in 0..n {
            state = step_generic(&state, &seg.control, theta, cp, robot)?;
            k += 1;
            if i + 1 == n {
                snapshots.push(Snapshot { step: k, state: state.clone() });
                boundaries.push(snapshots.len() - 1);
            } else if k % stride == 0 {
                snapshots.push(Snapshot { step: k, state: state.clone() });
            }
        }
    }
    Ok(Trajectory { snapshots, boundaries })
}

/// Autoregressive rollout over a sequence of held controls. Snapshots are
/// taken every `stride` steps and at every segment boundary.
pub fn rollout(
    state0: &SystemState,
    segments: &[ControlSegment],
    cp: &ContactParams,
    robot: &Robot,
    stride: usize,
) -> Result<Trajectory> {
    rollout_generic(state0, segments, &Theta::primal(cp), cp, robot, stride)
}

/// [`rollout`] with `(mu, epsilon, beta)` tangents carried along.
pub fn rollout_with_gradient(
    state0: &SystemState,
    segments: &[ControlSegment],
    cp: &ContactParams,
    robot: &Robot,
    stride: usize,
) -> Result<Trajectory<Dual<3>>> {
    rollout_generic(&SystemState::lift(state0), segments, &Theta::<Dual<3>>::seeded(cp), cp, robot, stride)
}

/// Kinetic + gravitational + elastic energy.
pub fn mechanical_energy(state: &SystemState, cp: &ContactParams, robot: &Robot) -> f64 {
    let body = &robot.body;
    let kinetic = state.kinetic_energy(body.rod_mass, body.rod_inertia);
    let gravitational: f64 = state.rods.iter().map(|r| -body.rod_mass * body.gravity.dot(r.position)).sum();
    let caps = end_cap_positions(state, &robot.topology);
    let mut elastic = 0.0;
    let mut act = 0;
    for t in &robot.topology.tendons {
        let len = (caps[t.cap_b()] - caps[t.cap_a()]).norm();
        let (rest, k) = if t.actuated {
            act += 1;
            (state.rest_lengths[act - 1], cp.stiffness)
        } else {
            (body.passive_rest_length, body.passive_stiffness)
        };
        let stretch = (len - rest).max(0.0);
        elastic += 0.5 * k * stretch * stretch;
    }
    kinetic + gravitational + elastic
}

/// Current lengths of the six actuated tendons.
pub fn actuated_lengths(state: &SystemState, robot: &Robot) -> [f64; 6] {
    let caps = end_cap_positions(state, &robot.topology);
    let mut out = [0.0; 6];
    for (o, t) in out.iter_mut().zip(robot.topology.actuated()) {
        *o = (caps[t.cap_b()] - caps[t.cap_a()]).norm();
    }
    out
}
