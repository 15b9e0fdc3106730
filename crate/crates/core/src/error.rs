
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, mapped to a process exit code by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Io,
    Algorithm,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Io => "io",
            Category::Algorithm => "algorithm",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Algorithm => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no reliable frames")]
    NoReliableFrames,

    #[error("missing calibration anchor at {0} degrees")]
    MissingAnchor(u32),

    #[error("duplicate calibration anchor at {0} degrees")]
    DuplicateAnchor(u32),

    #[error("calibration degenerate: {0}")]
    CalibrationDegenerate(String),

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("profile invariant violated: {0}")]
    InvariantViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    #[error("malformed WAV header: {0}")]
    MalformedWav(String),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedCodec(String),

    #[error("too many channels: {0} (at most 8 supported)")]
    TooManyChannels(usize),

    #[error("source at {distance} m lies inside the belt (radius {radius} m)")]
    SourceInsideBelt { distance: f64, radius: f64 },

    #[error("arc of {arc_span} degrees is too small for {motors} motors")]
    ArcTooSmall { arc_span: f64, motors: usize },

    #[error("unsupported signal: {0}")]
    UnsupportedSignal(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::InsufficientSamples { .. }
            | Error::NotPowerOfTwo(_)
            | Error::ShapeMismatch(_)
            | Error::NoReliableFrames
            | Error::CalibrationDegenerate(_)
            | Error::CalibrationFailed(_)
            | Error::SourceInsideBelt { .. } => Category::Algorithm,
            Error::InvalidParameter(_)
            | Error::MissingAnchor(_)
            | Error::DuplicateAnchor(_)
            | Error::InvariantViolation(_)
            | Error::Config(_)
            | Error::UnsupportedVersion { .. }
            | Error::Format { .. }
            | Error::ArcTooSmall { .. }
            | Error::UnsupportedSignal(_) => Category::Config,
            Error::MalformedWav(_)
            | Error::UnsupportedCodec(_)
            | Error::TooManyChannels(_)
            | Error::Io { .. } => Category::Io,
        }
    }
}
