use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unstable material parameters: {0}")]
    UnstableParameters(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numerical instability at step {step}: {detail}")]
    NumericalInstability { step: u64, detail: String },

    #[error("spectra are sampled on different wavelength grids")]
    MismatchedGrids,

    #[error("reference flux at {wavelength_nm} nm is {value:e} of its peak, below the 1e-12 floor")]
    VanishingReference { wavelength_nm: f64, value: f64 },

    #[error("ambiguous sweep: more than two prominent features at delta = {0:?} nm")]
    AmbiguousSweep(Vec<f64>),

    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },

    #[error("invalid config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
