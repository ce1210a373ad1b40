//! Detection of position-biased annotators in crowdsourced pairwise
//! comparisons, with false-discovery-rate control.
//!
//! The model fits a global item score together with a sparse per-annotator
//! position bias on the comparison graph. Regularization paths (linearized
//! Bregman iteration, exact inverse scale space, or LASSO) rank annotators
//! by how early their bias coordinate enters the path; knockoff copies of
//! the annotator columns provide negative controls and a data-dependent
//! threshold that keeps the expected fraction of false selections at a
//! target level.

pub mod data;
pub mod detect;
pub mod error;
pub mod knockoff;
pub mod path;
pub mod sim;
pub mod solvers;

pub use data::{ComparisonDataset, ComparisonRecord, DesignOperators, Registry};
pub use detect::{
    classify_annotators, detect, match_ratio, ranks_descending, reestimate, AnnotatorClass,
    DetectionConfig, DetectionReport, ReportMeta,
};
pub use error::{Error, Result};
pub use knockoff::{
    compute_s, construct_knockoffs, equivalence_check, kernel_basis, knockoff_statistics,
    knockoff_threshold, reduced_model, write_stats_csv, EquivalenceReport, KnockoffFeatures,
    KnockoffStats, ReducedModel, SMode, SelectionResult,
};
pub use path::{
    entering_times, iss_path_exact, lasso_path, lbi_path, run_path, Engine, ParamKind,
    PathConfig, PathDesign, PathKnot, SolutionPath,
};
pub use sim::{
    child_seed, generate, run_grid, run_trial, write_grid_csv, BiasSide, GridCell,
    SimulationConfig, TrialMetrics,
};
pub use solvers::{complement_basis, nnls, psd_square_root, LaplacianSystem};
