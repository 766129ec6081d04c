use thiserror::Error;

/// Errors raised by solvers, samplers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: size {size} exceeds cap {cap}")]
    SizeExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("unsupported input law: {0}")]
    UnsupportedLaw(String),
    #[error("unsupported perturbation scheme {scheme} for {family}")]
    UnsupportedScheme {
        scheme: &'static str,
        family: &'static str,
    },
    #[error("block {block} out of range (scheme has {count} blocks)")]
    BlockOutOfRange { block: usize, count: usize },
    #[error("near-optimal set enumeration is not available for continuous parameter spaces")]
    ContinuousSpace,
    #[error("perfect matching needs an even vertex count, got {0}")]
    OddVertexCount(usize),
    #[error("sister construction needs at least 3 vertices, got {0}")]
    DegenerateNeighborhood(usize),
    #[error("tree is extinct before the target generation")]
    ExtinctTree,
    #[error("generation {generation} has {size} vertices, above cap {cap}")]
    PopulationCap {
        generation: usize,
        size: usize,
        cap: usize,
    },
    #[error("progeny law is not supercritical (mean {0})")]
    Subcritical(f64),
    #[error("displacement law has no finite exponential moment near the minimizer")]
    NoFiniteMgf,
    #[error("eigen solver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("density vanishes at the starting point")]
    ZeroDensityAtStart,
    #[error("empty input")]
    EmptyInput,
    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag used in failure markers of experiment output.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::SizeExceeded { .. } => "SizeExceeded",
            Error::UnsupportedLaw(_) => "UnsupportedLaw",
            Error::UnsupportedScheme { .. } => "UnsupportedScheme",
            Error::BlockOutOfRange { .. } => "BlockOutOfRange",
            Error::ContinuousSpace => "ContinuousSpace",
            Error::OddVertexCount(_) => "OddVertexCount",
            Error::DegenerateNeighborhood(_) => "DegenerateNeighborhood",
            Error::ExtinctTree => "ExtinctTree",
            Error::PopulationCap { .. } => "PopulationCap",
            Error::Subcritical(_) => "Subcritical",
            Error::NoFiniteMgf => "NoFiniteMGF",
            Error::NoConvergence(_) => "NoConvergence",
            Error::ZeroDensityAtStart => "ZeroDensityAtStart",
            Error::EmptyInput => "EmptyInput",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Parse { .. } => "ParseError",
            Error::Validation(_) => "ValidationError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}
