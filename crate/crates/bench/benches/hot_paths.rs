use criterion::{black_box, criterion_group, criterion_main, Criterion};
use tensegrity_core::gaits::{build_primitive_library, settle_rest_state, Gait, GaitSettings, PrimitiveSpec};
use tensegrity_core::physics::{rollout_with_gradient, step, Control, ControlSegment};
use tensegrity_core::planner::{plan, PlannerSettings, Scenario};
use tensegrity_core::sysid::{generate_synthetic, trajectory_loss, SyntheticConfig};
use tensegrity_core::{ContactParams, Robot};

fn physics(c: &mut Criterion) {
    let robot = Robot::default();
    let cp = ContactParams::default();
    let rest = settle_rest_state(&cp, &robot, &GaitSettings::default()).unwrap();
    let mut moving = rest.clone();
    for rod in &mut moving.rods {
        rod.lin_vel.x = 0.5;
    }
    let control = Control::hold(&moving);
    c.bench_function("step with sliding contacts", |b| b.iter(|| step(black_box(&moving), &control, &cp, &robot).unwrap()));

    let segs = [ControlSegment::new(moving.rest_lengths, 0.1)];
    c.bench_function("100-step rollout with gradient", |b| {
        b.iter(|| rollout_with_gradient(black_box(&moving), &segs, &cp, &robot, usize::MAX).unwrap())
    });

    let gait = Gait::hold(GaitSettings::default().limits.neutral_length);
    let traj = generate_synthetic(&cp, &gait, &rest, &SyntheticConfig::default(), &robot).unwrap();
    c.bench_function("trajectory loss and gradient", |b| b.iter(|| trajectory_loss(black_box(&cp), &traj, &robot).unwrap()));
}

fn planner(c: &mut Criterion) {
    let prims = build_primitive_library(&PrimitiveSpec::table(), &ContactParams::default(), &Robot::default(), &GaitSettings::default())
        .unwrap()
        .primitives;
    let course = Scenario::two_obstacle_course();
    c.bench_function("plan across the two-obstacle course", |b| {
        b.iter(|| plan(black_box(&course), &prims, &PlannerSettings::default()).unwrap())
    });
}

criterion_group!(benches, physics, planner);
criterion_main!(benches);
