use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = NbvError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NbvError {
    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    FaceIndexOutOfRange { face: usize, index: u32, count: usize },

    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),

    #[error("invalid ray: {0}")]
    InvalidRay(&'static str),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("point lies behind the camera near plane (z' = {0})")]
    BehindCamera(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("individual {0} has no evaluated fitness")]
    UnevaluatedFitness(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("could not place manikin {index} after {attempts} attempts")]
    PlacementFailed { index: usize, attempts: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("need {needed} candidates but only {available} are available")]
    NotEnoughCandidates { needed: usize, available: usize },

    #[error("unknown image id {0}")]
    UnknownId(u64),

    #[error("fitness evaluation failed: {0}")]
    Fitness(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NbvError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NbvError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        NbvError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable category, used for the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            NbvError::EmptyMesh => "empty_mesh",
            NbvError::FaceIndexOutOfRange { .. } => "face_index_out_of_range",
            NbvError::NonFiniteVertex(_) => "non_finite_vertex",
            NbvError::InvalidRay(_) => "invalid_ray",
            NbvError::InvalidCamera(_) => "invalid_camera",
            NbvError::BehindCamera(_) => "behind_camera",
            NbvError::LengthMismatch { .. } => "length_mismatch",
            NbvError::UnevaluatedFitness(_) => "unevaluated_fitness",
            NbvError::InvalidConfig(_) => "invalid_config",
            NbvError::PlacementFailed { .. } => "placement_failed",
            NbvError::Parse { .. } => "parse",
            NbvError::NotEnoughCandidates { .. } => "not_enough_candidates",
            NbvError::UnknownId(_) => "unknown_id",
            NbvError::Fitness(_) => "fitness",
            NbvError::Io { .. } => "io",
            NbvError::Csv(_) => "csv",
            NbvError::Json(_) => "json",
        }
    }
}
