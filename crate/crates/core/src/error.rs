use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    /// A player sent a second wish for the same arm. The protocol sends a
    /// wish only on removal from the wish set, so this indicates a bug in
    /// the caller rather than a recoverable condition.
    #[error("protocol violation: duplicate wish from player {player} for arm {arm}")]
    DuplicateWish { player: usize, arm: usize },

    #[error("{0}")]
    Phase(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
