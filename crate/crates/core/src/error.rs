use thiserror::Error;

/// Errors raised by the homomorphic layer (backends and evaluator algorithms).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeError {
    #[error("size error: {0}")]
    Size(String),

    #[error("scale mismatch: {left} bits vs {right} bits")]
    Scale { left: u32, right: u32 },

    #[error("backend mismatch: {0}")]
    Backend(String),

    /// The modulus budget cannot absorb another rescale.
    #[error(
        "depth exceeded: operation needs {required} level(s) but only {available} remain; \
         raise log_modulus to at least {suggested_log_modulus} bits"
    )]
    DepthExceeded {
        required: u32,
        available: u32,
        suggested_log_modulus: u32,
    },

    #[error("missing rotation key for step {0}")]
    Key(i64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("encoding overflow: coefficient needs {needed} bits, modulus has {available}")]
    EncodingOverflow { needed: u64, available: u32 },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid parameters: {0}")]
    Params(String),
}

pub type Result<T, E = HeError> = std::result::Result<T, E>;
