use std::path::PathBuf;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("invalid depth: {0}")]
    InvalidDepth(String),
    #[error("invalid transmission: {0}")]
    InvalidTransmission(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: rotation is not rigid (det = {det})")]
    NonRigid { line: usize, det: f64 },
    #[error("rotation angle {angle} rad is too close to pi for a unique logarithm")]
    NearSingularRotation { angle: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid airlight {0:?}: every channel must be positive")]
    InvalidAirlight([f64; 3]),
    #[error("invalid fog parameters: {0}")]
    InvalidFog(String),
    #[error("no valid pixels in the reconstruction mask")]
    EmptyMask,
    #[error("feature extractor shape mismatch: {0}")]
    ExtractorShapeMismatch(String),
    #[error("non-finite loss component `{0}`")]
    NonFiniteComponent(&'static str),
    #[error("objective is not finite at the probed point")]
    NonFiniteObjective,
    #[error("optimizer diverged: {0}")]
    Diverged(String),
    #[error("no valid ground-truth pixels")]
    NoValidPixels,
    #[error("length mismatch: estimated {estimated}, ground truth {ground_truth}")]
    LengthMismatch { estimated: usize, ground_truth: usize },
    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid weights file: {0}")]
    InvalidWeights(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable identifier, printed by the CLI as `error: <CODE>: ...`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::InvalidDepth(_) => "InvalidDepth",
            Error::InvalidTransmission(_) => "InvalidTransmission",
            Error::InvalidImage(_) => "InvalidImage",
            Error::InvalidPose(_) => "InvalidPose",
            Error::InvalidIntrinsics(_) => "InvalidIntrinsics",
            Error::MalformedLine { .. } => "MalformedLine",
            Error::NonRigid { .. } => "NonRigid",
            Error::NearSingularRotation { .. } => "NearSingularRotation",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidAirlight(_) => "InvalidAirlight",
            Error::InvalidFog(_) => "InvalidFog",
            Error::EmptyMask => "EmptyMask",
            Error::ExtractorShapeMismatch(_) => "ExtractorShapeMismatch",
            Error::NonFiniteComponent(_) => "NonFiniteComponent",
            Error::NonFiniteObjective => "NonFiniteObjective",
            Error::Diverged(_) => "Diverged",
            Error::NoValidPixels => "NoValidPixels",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::DegenerateTrajectory(_) => "DegenerateTrajectory",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidWeights(_) => "InvalidWeights",
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EmptyMask
                | Error::NonFiniteComponent(_)
                | Error::NonFiniteObjective
                | Error::Diverged(_)
                | Error::NoValidPixels
                | Error::NearSingularRotation { .. }
                | Error::DegenerateTrajectory(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
