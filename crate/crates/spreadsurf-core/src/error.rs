use thiserror::Error;

/// Errors surfaced by the library.
///
/// The variants map onto the CLI exit-code contract: `Config` and `Usage`
/// are caller mistakes (exit 2), `Numerical` is a run that started but
/// cannot be trusted (exit 3), everything else is a data/model rejection.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid parameters.
    #[error("grid: {0}")]
    Grid(String),

    /// An argument violates an operation's contract (off-lattice time,
    /// unordered dates, maturity before valuation, ...).
    #[error("usage: {0}")]
    Usage(String),

    /// Non-finite or otherwise unusable numeric input.
    #[error("data: {0}")]
    Data(String),

    /// A value left the representable range (e.g. exp overflow).
    #[error("range: {0}")]
    Range(String),

    /// The model state is inconsistent with its assumptions
    /// (non-monotone spread curve, registry map returning junk, ...).
    #[error("model: {0}")]
    Model(String),

    /// Malformed or semantically invalid configuration.
    #[error("config: {0}")]
    Config(String),

    /// A simulation failed numerically (blow-up, thinning bound breach).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
