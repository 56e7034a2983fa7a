use thiserror::Error;

/// Errors raised by the decomposition toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-removable singularity at the origin")]
    NonremovableSingularity,

    #[error("expression exceeded the term limit of {limit}")]
    TermLimit { limit: usize },

    #[error("derivative order {order} exceeds the configured cap {cap}")]
    DepthLimit { order: usize, cap: usize },

    #[error("direction undefined at zero frequency")]
    DirectionUndefined,

    #[error("no lattice sample inside the truncation ball")]
    EmptySupport,

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("boundary ring contains no interpolation centers")]
    EmptyRing,

    #[error("irregular grid: {0}")]
    IrregularGrid(String),

    #[error("grid is not a full period with uniform resolution: {0}")]
    NonPeriodic(String),

    #[error("unknown builtin field `{0}`")]
    UnknownField(String),

    #[error("report has no rows")]
    EmptyReport,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
