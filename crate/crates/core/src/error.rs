use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{line}:{col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("undefined macro `{0}`")]
    UndefinedMacro(String),
    #[error("macro `{0}` is defined recursively")]
    RecursiveMacro(String),
    #[error("macro `{0}` clashes with an alphabet symbol")]
    MacroClash(String),
    #[error("symbol `{0}` is reserved for counters")]
    ReservedSymbol(String),
    #[error("invalid symbol name `{0}`")]
    InvalidSymbol(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("tuple alphabet of {letters} letters exceeds the limit of {limit}")]
    AlphabetTooLarge { letters: usize, limit: usize },
    #[error("track index {index} out of range for a {tracks}-track relation")]
    TrackOutOfRange { index: usize, tracks: usize },
    #[error("words have different lengths")]
    LengthMismatch,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{0}` given twice")]
    DuplicateField(String),
    #[error("unknown benchmark `{name}`; available: {}", available.join(", "))]
    UnknownBenchmark {
        name: String,
        available: Vec<String>,
    },
    #[error("state bound exceeded: {needed} states needed, bound is {bound}")]
    StateBound { needed: u128, bound: usize },
    #[error(
        "annotator assigns both fairness kinds at position {position}: `{first}` vs `{second}`"
    )]
    InconsistentAnnotator {
        first: String,
        second: String,
        position: usize,
    },
    #[error("system has no fairness annotator")]
    NoAnnotator,
    #[error("proof is for `{found}`, expected `{expected}`")]
    ProofTarget { expected: String, found: String },
    #[error("{0}")]
    Invalid(String),
}
