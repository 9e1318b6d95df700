//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("asymmetric adjacency: w[{i}][{j}] = {forward} but w[{j}][{i}] = {backward}")]
    Asymmetric {
        i: usize,
        j: usize,
        forward: f64,
        backward: f64,
    },

    #[error("negative weight w[{i}][{j}] = {value}")]
    NegativeWeight { i: usize, j: usize, value: f64 },

    #[error("nonzero diagonal entry w[{i}][{i}] = {value}")]
    NonzeroDiagonal { i: usize, value: f64 },

    #[error("graph is disconnected: only {reachable} of {n} nodes reachable from node 0")]
    Disconnected { reachable: usize, n: usize },

    #[error("harmonic count p = {p} outside valid range 1..={n}")]
    HarmonicCount { p: usize, n: usize },

    #[error("eigendecomposition did not converge for {n}x{n} matrix")]
    EigenFailure { n: usize },

    #[error("singular value decomposition did not converge for {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("matrix is off the Stiefel manifold: max |X'X - I| = {deviation:.3e} > {tolerance:.1e}")]
    OffManifold { deviation: f64, tolerance: f64 },

    #[error("vector is not tangent at its base point: skew residual {residual:.3e}")]
    NotTangent { residual: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("cohort is empty")]
    EmptyCohort,

    #[error("sample too small: need at least {required} observations, got {found}")]
    UndersizedSample { required: usize, found: usize },

    #[error("zero denominator in {0}")]
    ZeroDenominator(String),

    #[error("no step size decreased the objective after {halvings} halvings")]
    StepFailure { halvings: usize },

    #[error("expected exactly two groups, found {found:?}")]
    GroupCount { found: Vec<String> },

    #[error("group '{group}' has {found} subjects, need at least {required}")]
    GroupTooSmall {
        group: String,
        found: usize,
        required: usize,
    },

    #[error("cohort of {m} networks too small for a {base}+2x{extra} resampling split")]
    CohortTooSmall { m: usize, base: usize, extra: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate subject id '{0}' in manifest")]
    DuplicateSubject(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("subject '{subject}': {source}")]
    Subject {
        subject: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach a subject id to an error raised while processing one cohort member.
    pub fn for_subject(self, subject: impl Into<String>) -> Error {
        Error::Subject {
            subject: subject.into(),
            source: Box::new(self),
        }
    }
}
