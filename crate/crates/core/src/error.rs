use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameters or configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two vectors that must have the same length do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// A relay pair was formed from a single relay.
    #[error("invalid relay pair ({0}, {0}): relays of a pair must differ")]
    InvalidPair(usize),

    /// The MMSE system is singular or could not be solved accurately.
    #[error("ill-conditioned receive filter: {0}")]
    IllConditioned(String),

    /// Push attempted on a buffer that has no free room.
    #[error("buffer of relay {relay} is full ({capacity} entries)")]
    BufferFull { relay: usize, capacity: usize },

    /// Pop attempted on an empty buffer.
    #[error("buffer of relay {relay} is empty")]
    BufferEmpty { relay: usize },

    /// The analytic delay expression has a zero denominator.
    #[error("average delay is undefined: arrival rate is zero")]
    UndefinedDelay,

    /// Not enough observations to form a statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// I/O failure while writing results.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
