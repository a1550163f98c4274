use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no sampled radius lies in [{lo}, {hi}]")]
    EmptyRadiusList { lo: f64, hi: f64 },
    #[error("omega is the whole space, so the boundary distance is infinite everywhere")]
    OmegaIsWholeSpace,
    #[error("empty point set")]
    EmptySet,
    #[error("no lattice generation has side length at or above the resolution")]
    DegenerateScale,
    #[error("the root cube is terminal")]
    RootTerminal,
    #[error("cube {0} has zero mass")]
    ZeroMass(usize),
    #[error("kernel value at ({0}, {1}) is not finite")]
    NonFiniteKernelValue(usize, usize),
    #[error("classification missing: {0}")]
    ClassificationMissing(String),
    #[error("interaction entry ({0}, {1}) involves a cube that is not transit")]
    NonTransitEntry(usize, usize),
    #[error("cube {0} is assigned to more than one block")]
    MultipleParents(usize),
    #[error("unknown example generator '{0}'")]
    UnknownExample(String),
    #[error("space has {n} points, above the dense limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
