use thiserror::Error;

use crate::physics::ContactParams;

/// Why a search ended without reaching the goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoPathReason {
    OpenExhausted,
    ExpansionCap,
}

impl std::fmt::Display for NoPathReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoPathReason::OpenExhausted => "open list exhausted",
            NoPathReason::ExpansionCap => "expansion limit reached",
        })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("heading is ill-defined: projected body axis is degenerate")]
    DegenerateHeading,

    #[error("integration blew up at t = {time:.4} s: non-finite {quantity}")]
    IntegrationBlowup { quantity: String, time: f64 },

    #[error("integration blew up at theta = {params:?}: {source}")]
    BlowupAt {
        params: ContactParams,
        #[source]
        source: Box<Error>,
    },

    #[error("rest state did not settle within {0} s")]
    NotSettled(f64),

    #[error("goal cell is blocked")]
    GoalBlocked,

    #[error("no path: {0}")]
    NoPath(NoPathReason),

    #[error("non-finite loss during fit")]
    NonFiniteLoss,
}
