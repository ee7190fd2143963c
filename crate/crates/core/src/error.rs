use thiserror::Error;

/// Errors raised by the inference engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested measure/hypothesis combination has no implementation in
    /// this module.
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// A computation would exceed its configured budget.
    #[error("compute budget exceeded: {0}")]
    Budget(String),

    /// A p-value function failed while a region was being traced.
    #[error("p-value evaluation failed at beta0 = {beta0}: {source}")]
    PValue {
        beta0: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
