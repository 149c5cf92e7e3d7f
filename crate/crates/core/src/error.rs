//! Error type shared across the simulator.

use thiserror::Error;

/// Errors surfaced by state construction, operator algebra and the
/// measurement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects cannot be composed (dimension mismatch, overlapping
    /// subsystem ids, incompatible spaces).
    #[error("composition error: {0}")]
    Composition(String),

    /// An argument violates the operation's contract.
    #[error("argument error: {0}")]
    Argument(String),

    /// A register cannot hold the requested structure (e.g. more pointer
    /// states than the environment has dimensions).
    #[error("capacity error: {0}")]
    Capacity(String),

    /// The input state is not in the form the operation requires.
    #[error("precondition error: {0}")]
    Precondition(String),

    /// The object is in a mode that forbids the operation.
    #[error("state error: {0}")]
    State(String),

    /// A derived operator could not be built from the given parameters.
    #[error("construction error: {0}")]
    Construction(String),

    /// A scenario or run configuration is invalid.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
