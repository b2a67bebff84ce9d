use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what} = {value:e} s is not an integer multiple of the step {step:e} s")]
    Misaligned {
        what: &'static str,
        value: f64,
        step: f64,
    },

    #[error("virtual output carries no saliency information (distance {distance:e} from circle center)")]
    DegenerateSignal { distance: f64 },

    #[error("simulation diverged at t = {t:.6} s: {detail}")]
    Divergence { t: f64, detail: String },

    #[error("window [{t1}, {t2}] s is not covered by the trace [{start}, {end}] s")]
    WindowOutOfRange {
        t1: f64,
        t2: f64,
        start: f64,
        end: f64,
    },

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error("paired runs do not match: {0}")]
    PairMismatch(String),

    #[error("{path}:{line}: {msg}")]
    ConfigParse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("config field `{field}`: {msg}")]
    ConfigInvalid { field: String, msg: String },

    #[error("trace line {line}: {msg}")]
    TraceFormat { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
