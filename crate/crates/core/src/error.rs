use std::io;

use thiserror::Error;

/// Errors raised by the simulation engines and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("cannot seed {requested} particles on a polyline of {available} pixels")]
    Seeding { requested: usize, available: usize },

    #[error("measurement on an empty population (run collapsed)")]
    EmptyPopulation,

    #[error("indeterminate result: value {0} sits exactly on the centre line")]
    Indeterminate(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
