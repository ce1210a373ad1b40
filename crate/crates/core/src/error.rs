use thiserror::Error;

/// Errors across parsing, linear algebra kernels, path solvers, and the
/// detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("line {line}: self-comparison: item {item:?} appears on both sides")]
    SelfComparison { line: u64, item: String },

    #[error("line {line}: invalid response {value:?} (must be a finite nonzero number)")]
    InvalidResponse { line: u64, value: String },

    #[error("expected header `annotator,left,right,response`, got {found:?}")]
    BadHeader { found: String },

    #[error("dataset has no records")]
    EmptyDataset,

    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),

    #[error("non-dichotomous response {value} for annotator {annotator:?}; counts require responses in {{+1, -1}}")]
    NonDichotomous { annotator: String, value: f64 },

    #[error(
        "dimension requirement |E| >= 2|U| + |V| violated: |E| = {edges}, |U| = {annotators}, \
         |V| = {items} (need |E| >= {})",
        2 * annotators + items
    )]
    DimensionRequirement {
        edges: usize,
        annotators: usize,
        items: usize,
    },

    #[error("{what} did not converge within {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("matrix is materially indefinite: min eigenvalue {min_eig:.3e} below -{clip_tol:.3e}")]
    IndefiniteMatrix { min_eig: f64, clip_tol: f64 },

    #[error("rank deficiency while building an orthonormal basis: {0}")]
    RankDeficiency(String),

    #[error(
        "degenerate knockoffs: min eigenvalue of A'(I-H)A is {lambda_min:.3e}; some annotator \
         column lies (numerically) in the column space of the gradient operator"
    )]
    DegenerateKnockoffs { lambda_min: f64 },

    #[error("knockoff Gram condition `{condition}` violated: max entry error {max_err:.3e} > {tol:.3e}")]
    KnockoffConditions {
        condition: &'static str,
        max_err: f64,
        tol: f64,
    },

    #[error("unstable step size: kappa*dt*|X'X| = {product:.3e} >= 2")]
    UnstableStepSize { product: f64 },

    #[error("iteration diverged: |gamma| reached {norm:.3e} (step size too large?)")]
    Divergence { norm: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
