use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("invalid game parameters: {0}")]
    InvalidParams(String),

    #[error("{what} = {value} outside its domain [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate state at the cone apex (r = {r})")]
    DegenerateState { r: f64 },

    #[error("state with phi = {phi} is not on the queried boundary phi = {expected}")]
    BoundaryMismatch { phi: f64, expected: f64 },

    #[error("retro-time {tau} precedes the segment anchor {anchor}")]
    BeforeAnchor { tau: f64, anchor: f64 },

    #[error("radius search failed: {0}")]
    Search(String),
}

pub type Result<T, E = GameError> = std::result::Result<T, E>;
