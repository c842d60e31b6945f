use alloc::string::String;

/// Everything that can go wrong while building or certifying a path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TesError {
    /// Parameters or inputs outside their admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A mathematical invariant failed at runtime.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// An importance-sampling acceptance ratio exceeded one.
    #[error("acceptance ratio {ratio:.6e} exceeds one ({context})")]
    AcceptanceRatio { ratio: f64, context: String },

    /// A loop ran past its iteration guard.
    #[error("iteration guard exceeded: {0}")]
    Guard(String),

    /// The construction needs a dyadic level beyond what the configuration allows.
    #[error("{stage} needs dyadic level {required}, above the cap {cap}")]
    LevelCap {
        stage: &'static str,
        required: usize,
        cap: usize,
    },
}

impl TesError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        TesError::Config(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        TesError::Invariant(msg.into())
    }

    pub(crate) fn guard(msg: impl Into<String>) -> Self {
        TesError::Guard(msg.into())
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            TesError::Config(_) => 2,
            TesError::Invariant(_) | TesError::AcceptanceRatio { .. } => 3,
            TesError::Guard(_) | TesError::LevelCap { .. } => 4,
        }
    }
}
