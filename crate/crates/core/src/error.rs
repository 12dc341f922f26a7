use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("derivative order {0} is not supported (max 4)")]
    UnsupportedOrder(u32),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("channel index {index} out of range for {channels} channels")]
    IndexOutOfRange { index: usize, channels: usize },

    #[error("edge offset {0} is not in the configured edge set")]
    InvalidEdge(f64),

    #[error("invalid timing: {0}")]
    InvalidTiming(String),

    #[error(
        "infeasible scramble probabilities for channel {channel:?}: alpha={alpha}, g^2={g_squared} \
         (feasible g^2 in [{g_min}, {g_max}])"
    )]
    InfeasibleProbabilities {
        channel: Option<usize>,
        alpha: f64,
        g_squared: f64,
        g_min: f64,
        g_max: f64,
    },

    #[error(
        "delta-sigma input {input}{} exceeds the no-overload bound {bound}",
        channel.map(|c| format!(" for channel {c}")).unwrap_or_default()
    )]
    Overload {
        channel: Option<usize>,
        input: f64,
        bound: f64,
    },

    #[error("invalid modulator: {0}")]
    InvalidModulator(String),

    #[error("Nyquist violation: signal bandwidth {bandwidth} Hz needs F_S > {required} Hz, got {sample_rate} Hz")]
    Nyquist {
        bandwidth: f64,
        required: f64,
        sample_rate: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty search band")]
    EmptyBand,

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error comes from a conditioner that cannot be realized for
    /// the configured skews.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleProbabilities { .. } | Error::Overload { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
