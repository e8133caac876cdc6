use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A graph failed validation. `field` names the offending item.
    InvalidGraph { field: String, reason: String },
    UnknownVertex(String),
    UnknownEdge(String),
    /// A point lies outside `[0, length]` of its edge.
    PointOffEdge { edge: String, s: f64, length: f64 },
    /// A numeric argument violates an operation's precondition.
    InvalidArgument { name: &'static str, reason: String },
    /// Walk sums cannot be certified at the requested time and tolerance.
    TruncationUnreachable { walks: usize, tail_bound: f64 },
    /// Root bracketing failed inside `[lo, hi]`.
    BracketFailure { lo: f64, hi: f64 },
    /// Eigenvalue count disagrees with the counting bounds.
    MissedEigenvalue { k_max: f64, found: usize, lower: usize, upper: usize },
    /// Too few modes for the requested spectral tolerance.
    InsufficientModes { k_max: f64, needed: f64 },
    /// A point or piece does not belong to the subdomain.
    OutsideSubdomain(String),
    /// An exit point has no image under an isometry map.
    NoImage(String),
    /// No exponential certificate could be fitted.
    NoCertificate { r2: f64, eps: f64 },
    /// Quadrature error estimate too large relative to the value.
    StepTooCoarse { error: f64, value: f64 },
    IllConditioned(String),
    /// Continuity of a sampled function fails at a vertex.
    Discontinuous { vertex: String, jump: f64 },
    InsufficientCounts { bins: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGraph { field, reason } => write!(f, "invalid graph at {field}: {reason}"),
            Error::UnknownVertex(v) => write!(f, "unknown vertex {v}"),
            Error::UnknownEdge(e) => write!(f, "unknown edge {e}"),
            Error::PointOffEdge { edge, s, length } => {
                write!(f, "point s={s} is off edge {edge} of length {length}")
            }
            Error::InvalidArgument { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::TruncationUnreachable { walks, tail_bound } => write!(
                f,
                "truncation unreachable: {walks} walks leave tail bound {tail_bound:e}"
            ),
            Error::BracketFailure { lo, hi } => write!(f, "root bracket failure in [{lo}, {hi}]"),
            Error::MissedEigenvalue { k_max, found, lower, upper } => write!(
                f,
                "missed eigenvalue: {found} modes up to k={k_max}, expected between {lower} and {upper}"
            ),
            Error::InsufficientModes { k_max, needed } => {
                write!(f, "modes computed up to k={k_max}, need k={needed}")
            }
            Error::OutsideSubdomain(what) => write!(f, "outside subdomain: {what}"),
            Error::NoImage(what) => write!(f, "no image under map: {what}"),
            Error::NoCertificate { r2, eps } => {
                write!(f, "no exponential certificate (r2={r2}, eps={eps})")
            }
            Error::StepTooCoarse { error, value } => {
                write!(f, "step too coarse: error estimate {error:e} for value {value:e}")
            }
            Error::IllConditioned(what) => write!(f, "ill-conditioned: {what}"),
            Error::Discontinuous { vertex, jump } => {
                write!(f, "sampled function jumps by {jump:e} at vertex {vertex}")
            }
            Error::InsufficientCounts { bins } => {
                write!(f, "insufficient counts: {bins} bins left after merging")
            }
        }
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument { name, reason: reason.into() }
}
