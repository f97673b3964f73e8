use thiserror::Error;

/// Everything that can go wrong between reading a query and printing a result.
///
/// Variants are grouped by pipeline stage; the CLI maps `Xml`/`Syntax` onto
/// exit code 2 (bad input) and the rest onto exit code 1 (execution failure).
#[derive(Debug, Error)]
pub enum Error {
    #[error("xml error at byte {offset}: {msg}")]
    Xml { offset: usize, msg: String },

    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    /// A construct clause (or condition argument) uses variables in a way that
    /// admits no index/hid completion, or the completed target is unreachable.
    #[error("inference error: {0}")]
    Inference(String),

    /// A where clause violates consistency (with-chains whose scopes are not
    /// successively finer, par arms that cannot be joined, ...).
    #[error("inconsistent condition: {0}")]
    InconsistentCondition(String),

    /// A condition argument's scope cannot be located in the query term.
    #[error("scope error: {0}")]
    Scope(String),

    /// Two composed scopes do not line up (par over unrelated shapes).
    #[error("scope mismatch: {0}")]
    ScopeMismatch(String),

    /// A function invocation's input could not be resolved to a value before
    /// construction needed it.
    #[error("unresolved function input: {0}")]
    UnresolvedInput(String),

    #[error("recursion limit of {0} exceeded")]
    RecursionLimit(usize),

    #[error("unknown function: {0}")]
    UnknownFunction(String),

    #[error("unknown document: {0}")]
    UnknownDocument(String),

    /// orderby on values that do not share a comparable kind.
    #[error("order type error: {0}")]
    OrderType(String),

    #[error("construction error: {0}")]
    Construction(String),

    /// Serialization of a value with no XML image (naked location, boolean...).
    #[error("delta error: {0}")]
    Delta(String),

    #[error("type error: {0}")]
    Type(String),

    /// Invariant breakage; always a bug, never user error.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Syntax { line, col, msg: msg.into() }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Xml { .. } | Error::Syntax { .. } | Error::UnknownDocument(_) => 2,
            _ => 1,
        }
    }
}
