use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("eigen-solver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("matrix is rank deficient: estimated rank {rank} of {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("delay ambiguity: f_p * tau_max = {product:.4} exceeds N = {n}")]
    Ambiguity { product: f64, n: usize },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("could not place {k} delays with spacing {min_sep:.3e} s after {attempts} attempts")]
    InfeasibleSpacing {
        k: usize,
        min_sep: f64,
        attempts: usize,
    },

    #[error("spectrum support too small: bin {needed} requested, layout covers {lo}..={hi}")]
    InsufficientSupport { needed: i64, lo: i64, hi: i64 },

    #[error("spectrum has zero in-band energy")]
    ZeroEnergy,

    #[error("empty sector")]
    EmptySector,

    #[error("interpolation inner matrix for snapshot {snapshot} is singular")]
    SingularInterpolation { snapshot: usize },

    #[error("found {found} peaks, needed {needed}")]
    TooFewPeaks { found: usize, needed: usize },

    #[error("count mismatch: expected {expected}, got {got}")]
    CountMismatch { expected: usize, got: usize },

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
