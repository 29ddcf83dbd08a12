//! Tendon PID control, target-shape gaits, and their compilation into SE(2)
//! motion primitives by simulation.

mod pid;
mod search;
mod shape;
mod sim;

pub use pid::{pid_rate, PidGains, PidState};
pub use search::{search_gait, SearchObjective, SearchResult};
pub use shape::{
    apply_symmetry, make_gait, Gait, GaitTemplate, GaitTemplates, OrientationClass, PrimitiveKind, PrimitiveSpec, Role,
    ShapeLimits, TargetShape, DEFAULT_TEMPLATES, SIDE_MAXIMA_MM,
};
pub use sim::{
    build_primitive_library, settle_rest_state, simulate_gait, simulate_primitive, tendon_lengths, CostModel,
    GaitOutcome, GaitSettings, MissingPrimitive, Primitive, PrimitiveLibrary, SettleRule,
};
