use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("triangle inequality fails at ({i}, {j}, {k}): d(i,k) = {direct} > d(i,j) + d(j,k) = {detour}")]
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        direct: f64,
        detour: f64,
    },

    #[error("weight of point {index} must be positive and finite, got {value}")]
    Weight { index: usize, value: f64 },

    #[error("invalid distance data: {0}")]
    Distance(String),

    #[error("power-law exponent {exponent} is not doubling in dimension {dimension} (need exponent > -{dimension})")]
    NonDoubling { exponent: f64, dimension: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("density {density} exceeds c_D^(-4 lambda) = {threshold}; largest admissible lambda is {lambda_max}")]
    DensityTooLarge {
        density: f64,
        threshold: f64,
        lambda_max: f64,
    },

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("invariant {name} violated at level {level}: {detail}")]
    Invariant {
        name: &'static str,
        level: usize,
        detail: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
