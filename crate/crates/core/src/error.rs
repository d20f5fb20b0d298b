use std::io;

use thiserror::Error;

/// Errors produced anywhere in the grasp pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("input too small: need at least {needed} points, got {got}")]
    Size { needed: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("frame mismatch: expected `{expected}`, found `{found}`")]
    Frame { expected: String, found: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("no feasible grasp among the filtered candidates")]
    NoFeasibleGrasp,

    #[error("protocol error: event {event} is not defined in state {state}")]
    Protocol { state: String, event: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
