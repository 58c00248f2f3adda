use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The two loudspeakers of a pair are collinear with the listener
    /// (they span 0° or 180°), so the 2x2 base is not invertible.
    #[error("degenerate loudspeaker pair ({index_1}, {index_2}): base spans {span_deg:.3} degrees")]
    DegeneratePair {
        index_1: usize,
        index_2: usize,
        span_deg: f64,
    },

    #[error("source at {azimuth_deg} degrees lies outside the pair arc (gains {g1:.6}, {g2:.6})")]
    OutOfArc { azimuth_deg: f64, g1: f64, g2: f64 },

    #[error("epoch window for event {event} (onset {onset_ms} ms) exceeds recording bounds")]
    Boundary { event: usize, onset_ms: f64 },

    #[error("insufficient extrema to form an envelope")]
    InsufficientExtrema,

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error("stage {stage} failed: {source}")]
    Stage { stage: String, source: Box<Error> },
}

/// Coarse failure class, for callers that map errors to exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfiguration(_) | Error::Json(_) => ErrorKind::Config,
            Error::DegeneratePair { .. } | Error::OutOfArc { .. } | Error::InsufficientExtrema => ErrorKind::Numeric,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfiguration(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
