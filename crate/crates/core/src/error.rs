use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the regression, encoding, and sampling routines.
#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("row {row} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        row: u64,
        expected: usize,
        found: usize,
    },

    #[error("no rows to accumulate")]
    EmptyStream,

    #[error("degenerate target variance (TSS = {tss})")]
    DegenerateTarget { tss: f64 },

    #[error(
        "Gram matrix is singular or ill-conditioned (condition estimate {condition:.3e}); \
         consider adding a small ridge jitter to the diagonal"
    )]
    IllConditioned { condition: f64 },

    #[error("SGD diverged at epoch {epoch}: loss is not finite, try a smaller learning rate")]
    Diverged { epoch: usize },

    #[error("QUBO with {dim} variables exceeds the limit of {max} for {what}")]
    TooLarge {
        what: &'static str,
        dim: usize,
        max: usize,
    },

    #[error("degenerate QUBO: every coefficient is zero")]
    DegenerateQubo,

    #[error("sampler returned no samples")]
    NoSamples,

    #[error("sampler failed at adaptive iteration {iteration}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("row source failed")]
    RowSource(#[source] Box<dyn core::error::Error + Send + Sync>),

    #[error("sampler failed")]
    Sampler(#[source] Box<dyn core::error::Error + Send + Sync>),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
