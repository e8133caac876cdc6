use serde_json::{json, Value};
use std::fmt;

/// Failure of a command. Rendered as one JSON object on stderr.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values.
    Usage(String),
    Io { path: String, message: String },
    /// A document did not parse.
    Parse { path: String, message: String },
    Core(hklab_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Core(e) => match e {
                hklab_core::Error::InvalidGraph { .. } => "invalid_graph",
                hklab_core::Error::UnknownVertex(_) | hklab_core::Error::UnknownEdge(_) => "unknown_reference",
                hklab_core::Error::PointOffEdge { .. } => "point_off_edge",
                hklab_core::Error::InvalidArgument { .. } => "invalid_argument",
                hklab_core::Error::TruncationUnreachable { .. } => "truncation_unreachable",
                hklab_core::Error::BracketFailure { .. } => "bracket_failure",
                hklab_core::Error::MissedEigenvalue { .. } => "missed_eigenvalue",
                hklab_core::Error::InsufficientModes { .. } => "insufficient_modes",
                hklab_core::Error::OutsideSubdomain(_) => "outside_subdomain",
                hklab_core::Error::NoImage(_) => "no_image",
                hklab_core::Error::NoCertificate { .. } => "no_certificate",
                hklab_core::Error::StepTooCoarse { .. } => "step_too_coarse",
                hklab_core::Error::IllConditioned(_) => "ill_conditioned",
                hklab_core::Error::Discontinuous { .. } => "discontinuous",
                hklab_core::Error::InsufficientCounts { .. } => "insufficient_counts",
            },
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::Io { path, .. } | CliError::Parse { path, .. } => v["path"] = json!(path),
            CliError::Core(hklab_core::Error::InvalidGraph { field, .. }) => v["field"] = json!(field),
            _ => {}
        }
        v
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io { path, message } => write!(f, "{path}: {message}"),
            CliError::Parse { path, message } => write!(f, "{path}: {message}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hklab_core::Error> for CliError {
    fn from(e: hklab_core::Error) -> Self {
        CliError::Core(e)
    }
}
