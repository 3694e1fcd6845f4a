use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("missing samples between t={from:.1}s and t={to:.1}s")]
    Gap { from: f64, to: f64 },

    #[error("invalid track: {0}")]
    InvalidTrack(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("trajectories do not intersect")]
    NoIntersection,

    #[error("tracks share no common timestep")]
    NoTemporalOverlap,

    #[error("conflict point is {distance:.3} m away from the path")]
    OffPath { distance: f64 },

    #[error("direction undefined for agent {0}")]
    DirectionUndefined(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("lane graph: {0}")]
    LaneGraph(String),
}

impl Error {
    pub(crate) fn insufficient(needed: usize, got: usize) -> Self {
        Error::InsufficientData { needed, got }
    }
}
