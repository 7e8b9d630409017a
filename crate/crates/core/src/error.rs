use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("atom index {index} out of range for {n_atoms} atoms")]
    AtomIndex { index: usize, n_atoms: usize },

    #[error("level {level} is not part of the {scheme} scheme")]
    LevelNotInScheme {
        level: &'static str,
        scheme: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid system: {0}")]
    InvalidSpec(String),

    #[error("singular geometry: {0}")]
    Geometry(String),

    #[error("steady state is not unique: null space dimension {dim}")]
    NonUniqueSteadyState { dim: usize },

    #[error("steady-state solver failed: {0}")]
    Solver(String),

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("invalid config field `{field}`: {message}")]
    ConfigField { field: String, message: String },

    #[error("unknown scenario `{name}`; available: {available}")]
    UnknownScenario { name: String, available: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
}

impl From<lax::error::Error> for Error {
    fn from(e: lax::error::Error) -> Self {
        Error::Solver(e.to_string())
    }
}
