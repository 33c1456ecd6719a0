use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("building {index}: degenerate polygon ({vertices} vertices)")]
    DegeneratePolygon { index: usize, vertices: usize },
    #[error("building {index}: self-intersecting footprint")]
    SelfIntersecting { index: usize },
    #[error("building {index}: non-positive height {height}")]
    NonPositiveHeight { index: usize, height: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("pixel ({x}, {y}) outside {width}x{height} image")]
    PixelOutOfBounds { x: u32, y: u32, width: u32, height: u32 },
    #[error("color component out of range: {0}")]
    ColorOutOfRange(f64),
    #[error("degenerate pose references: {0}")]
    DegenerateReferences(String),
    #[error("both classes required in labeled pixels")]
    SingleClass,
    #[error("empty training set")]
    EmptyTraining,
    #[error("FCR window of {phi_th} deg contains no mask cells")]
    EmptyWindow { phi_th: f64 },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("degenerate abscissa: all distances equal")]
    DegenerateAbscissa,
    #[error("insufficient clusters: need at least 2, got {0}")]
    InsufficientClusters(usize),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("outage realization has no multipath components")]
    Outage,
    #[error("unknown channel model `{0}`")]
    UnknownModel(String),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
