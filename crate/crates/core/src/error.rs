use std::path::PathBuf;

use crate::dataset::Class;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error")]
    Csv(#[from] csv::Error),

    #[error("parse failure at row {row}, column {column}: {value:?} is not a finite number")]
    Parse { row: usize, column: usize, value: String },

    #[error("missing value at row {row}, column {column}")]
    Missing { row: usize, column: usize },

    #[error("invalid class label {value:?} at row {row} (expected 1 or 2)")]
    InvalidLabel { row: usize, value: String },

    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },

    #[error("class too small: class {class} has {count} observations (need at least 2)")]
    ClassTooSmall { class: Class, count: usize },

    #[error("need at least 2 features, found {0}")]
    TooFewFeatures(usize),

    #[error("label column {column} out of range for {width} columns")]
    LabelColumn { column: usize, width: usize },

    #[error("degenerate feature {feature}: zero within-class standard deviation in class {class}")]
    DegenerateFeature { feature: usize, class: Class },

    #[error("zero pooled standard deviation for interaction ({j}, {k})")]
    ConstantInteraction { j: usize, k: usize },

    #[error("zero pooled standard deviation")]
    ZeroPooledSd,

    #[error("lambda {lambda} is outside the hierarchy-active range: root alpha {alpha} not in ({lower}, {upper}]")]
    AlphaOutOfRange { lambda: f64, alpha: f64, lower: f64, upper: f64 },

    #[error("covariance for class {class} is not positive definite (rho = {rho})")]
    NotPositiveDefinite { class: Class, rho: f64 },

    #[error("could not draw a non-degenerate resample after {0} attempts")]
    ResampleRetries(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable short tag, used for machine-parsable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Parse { .. } => "parse",
            Error::Missing { .. } => "missing",
            Error::InvalidLabel { .. } => "label",
            Error::RaggedRow { .. } => "ragged",
            Error::ClassTooSmall { .. } => "class-size",
            Error::TooFewFeatures(_) => "features",
            Error::LabelColumn { .. } => "label-column",
            Error::DegenerateFeature { .. } => "degenerate",
            Error::ConstantInteraction { .. } => "constant-interaction",
            Error::ZeroPooledSd => "zero-sd",
            Error::AlphaOutOfRange { .. } => "alpha-range",
            Error::NotPositiveDefinite { .. } => "not-pd",
            Error::ResampleRetries(_) => "resample",
            Error::InvalidArgument(_) => "argument",
        }
    }

    /// The reader of an output stream went away.
    pub fn is_broken_pipe(&self) -> bool {
        let io = match self {
            Error::Io { source, .. } => Some(source),
            Error::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(io) => Some(io),
                _ => None,
            },
            _ => None,
        };
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    }
}
