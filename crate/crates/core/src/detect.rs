//! End-to-end detection: fit a path on the knockoff-extended design, select
//! biased annotators with the knockoff filter, re-estimate scores and
//! biases, and classify annotators as good, bad, or ugly.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::data::{ComparisonDataset, DesignOperators};
use crate::error::{Error, Result};
use crate::knockoff::{
    construct_knockoffs, knockoff_statistics, knockoff_threshold, KnockoffStats, SMode,
    SelectionResult,
};
use crate::path::{run_path, Engine, PathConfig, PathDesign};

#[derive(Debug, Clone)]
pub struct DetectionConfig {
    /// Target FDR level in [0, 1].
    pub q: f64,
    /// Use the knockoff+ cut (offset-1 numerator).
    pub plus: bool,
    pub engine: Engine,
    pub s_mode: SMode,
    /// Compute the decorrelation vector on unit-norm projected columns.
    pub normalize_columns: bool,
    pub path: PathConfig,
    /// Echoed into reports; the pipeline itself is deterministic.
    pub seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            q: 0.1,
            plus: false,
            engine: Engine::Lbi,
            s_mode: SMode::Equicorrelated,
            normalize_columns: false,
            path: PathConfig::default(),
            seed: 0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidConfig(format!(
                "q must lie in [0, 1], got {}",
                self.q
            )));
        }
        self.path.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotatorClass {
    Good,
    Bad,
    Ugly,
}

impl AnnotatorClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnnotatorClass::Good => "good",
            AnnotatorClass::Bad => "bad",
            AnnotatorClass::Ugly => "ugly",
        }
    }
}

/// Full detection output, all per-annotator vectors in registry order.
#[derive(Debug, Clone)]
pub struct DetectionReport {
    pub stats: KnockoffStats,
    pub selection: SelectionResult,
    /// Least-squares score on the raw data (selection ignored).
    pub theta_original: DVector<f64>,
    /// Re-estimated score after removing the selected biases.
    pub theta_hat: DVector<f64>,
    /// Re-estimated biases, supported on the selected set.
    pub gamma_hat: DVector<f64>,
    pub classes: Vec<AnnotatorClass>,
    /// Positive/negative response counts (left/right clicks for dichotomous
    /// data).
    pub counts: Vec<(u64, u64)>,
    /// Agreement of each annotator with the raw global score.
    pub match_ratio: Vec<f64>,
}

/// Runs the whole pipeline. Deterministic given (dataset, config, seed).
pub fn detect(ds: &ComparisonDataset, cfg: &DetectionConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    let ops = DesignOperators::from_dataset(ds)?;
    if ops.n_edges() < 2 * ops.n_annotators() + ops.n_items() {
        return Err(Error::DimensionRequirement {
            edges: ops.n_edges(),
            annotators: ops.n_annotators(),
            items: ops.n_items(),
        });
    }
    let y = ds.responses();
    let nu = ops.n_annotators();

    let ko = construct_knockoffs(&ops, cfg.s_mode, cfg.normalize_columns)?;
    let design = PathDesign::from_extended(&ops, &ko, &y)?;
    let path = run_path(&design, cfg.engine, &cfg.path)?;
    let zs = path.entering_times();
    let stats = knockoff_statistics(
        &zs.rows(0, nu).clone_owned(),
        &zs.rows(nu, nu).clone_owned(),
    );
    let selection = knockoff_threshold(&stats.w, cfg.q, cfg.plus);

    let (theta_original, _) = reestimate(&ops, &y, &BTreeSet::new())?;
    let (theta_hat, gamma_hat) = reestimate(&ops, &y, &selection.selected)?;

    let counts = ds.sign_counts();
    let classes = classify_annotators(&selection, &counts);
    let match_ratio = match_ratios(&ops, &y, &theta_original);

    Ok(DetectionReport {
        stats,
        selection,
        theta_original,
        theta_hat,
        gamma_hat,
        classes,
        counts,
        match_ratio,
    })
}

/// Joint least squares on the gradient block plus the selected annotator
/// columns: gamma is zero off the selected set, theta is mean-zero per
/// component, and the residual is orthogonal to the fitted columns.
pub fn reestimate(
    ops: &DesignOperators,
    y: &DVector<f64>,
    selected: &BTreeSet<usize>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let nu = ops.n_annotators();
    for &j in selected {
        if j >= nu {
            return Err(Error::InvalidConfig(format!(
                "selected annotator index {j} out of range (|U| = {nu})"
            )));
        }
    }
    let design = PathDesign::from_operators(ops, y)?;
    let mut gamma = DVector::zeros(nu);
    if !selected.is_empty() {
        let idx: Vec<usize> = selected.iter().copied().collect();
        let k = idx.len();
        let sigma = design.sigma();
        let b = design.profiled_cross();
        let mut sub = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            rhs[a] = b[i];
            for (c, &j) in idx.iter().enumerate() {
                sub[(a, c)] = sigma[(i, j)];
            }
        }
        let sol = match sub.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => {
                // Minimum-norm fallback for a singular restricted Gram.
                crate::solvers::pinv_solve(&sub, &rhs, 1e-12)
            }
        };
        for (a, &i) in idx.iter().enumerate() {
            gamma[i] = sol[a];
        }
    }
    let theta = design.theta_at(&gamma);
    Ok((theta, gamma))
}

/// good = not selected; bad = selected with all clicks on one side;
/// ugly = selected otherwise.
pub fn classify_annotators(
    selection: &SelectionResult,
    counts: &[(u64, u64)],
) -> Vec<AnnotatorClass> {
    counts
        .iter()
        .enumerate()
        .map(|(j, &(left, right))| {
            if !selection.selected.contains(&j) {
                AnnotatorClass::Good
            } else if left == 0 || right == 0 {
                AnnotatorClass::Bad
            } else {
                AnnotatorClass::Ugly
            }
        })
        .collect()
}

/// Fraction of one annotator's records whose response sign agrees with the
/// score difference of the presented pair. Ties in the score count as
/// disagreement.
pub fn match_ratio(
    ds: &ComparisonDataset,
    annotator: &str,
    theta: &DVector<f64>,
) -> Result<f64> {
    let idx = ds
        .annotators()
        .index_of(annotator)
        .ok_or_else(|| Error::UnknownAnnotator(annotator.to_owned()))?;
    let mut total = 0u64;
    let mut agree = 0u64;
    for e in ds.edges() {
        if e.annotator != idx {
            continue;
        }
        total += 1;
        let diff = theta[e.left] - theta[e.right];
        if diff != 0.0 && (e.response > 0.0) == (diff > 0.0) {
            agree += 1;
        }
    }
    if total == 0 {
        return Err(Error::UnknownAnnotator(format!(
            "{annotator} has no records"
        )));
    }
    Ok(agree as f64 / total as f64)
}

fn match_ratios(ops: &DesignOperators, y: &DVector<f64>, theta: &DVector<f64>) -> Vec<f64> {
    let nu = ops.n_annotators();
    let mut total = vec![0u64; nu];
    let mut agree = vec![0u64; nu];
    for e in 0..ops.n_edges() {
        let a = ops.annotator()[e];
        total[a] += 1;
        let diff = theta[ops.left()[e]] - theta[ops.right()[e]];
        if diff != 0.0 && (y[e] > 0.0) == (diff > 0.0) {
            agree[a] += 1;
        }
    }
    (0..nu)
        .map(|a| {
            if total[a] == 0 {
                0.0
            } else {
                agree[a] as f64 / total[a] as f64
            }
        })
        .collect()
}

/// Report metadata echoed into the text document header.
#[derive(Debug, Clone)]
pub struct ReportMeta {
    pub q: f64,
    pub plus: bool,
    pub engine: Engine,
    pub s_mode: SMode,
    pub seed: u64,
}

impl DetectionReport {
    /// Writes the report document: a key-value header followed by the
    /// per-annotator and per-item CSV sections.
    pub fn write_text<W: Write>(
        &self,
        ds: &ComparisonDataset,
        meta: &ReportMeta,
        mut out: W,
    ) -> std::io::Result<()> {
        writeln!(out, "q = {}", meta.q)?;
        writeln!(out, "plus = {}", meta.plus)?;
        writeln!(out, "engine = {}", meta.engine)?;
        writeln!(out, "s_mode = {}", meta.s_mode)?;
        writeln!(out, "seed = {}", meta.seed)?;
        writeln!(out, "edges = {}", ds.n_edges())?;
        writeln!(out, "items = {}", ds.n_items())?;
        writeln!(out, "annotators = {}", ds.n_annotators())?;
        writeln!(out, "selected = {}", self.selection.selected.len())?;
        if self.selection.threshold.is_finite() {
            writeln!(out, "threshold = {:.6}", self.selection.threshold)?;
        } else {
            writeln!(out, "threshold = inf")?;
        }
        writeln!(out)?;

        writeln!(out, "[annotators]")?;
        writeln!(
            out,
            "id,left,right,z,z_tilde,w,selected,class,gamma_hat,match_ratio"
        )?;
        for j in 0..ds.n_annotators() {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{},{},{:.6},{:.6}",
                ds.annotators().key(j),
                self.counts[j].0,
                self.counts[j].1,
                self.stats.z[j],
                self.stats.z_tilde[j],
                self.stats.w[j],
                self.selection.selected.contains(&j),
                self.classes[j].as_str(),
                self.gamma_hat[j],
                self.match_ratio[j],
            )?;
        }
        writeln!(out)?;

        writeln!(out, "[items]")?;
        writeln!(
            out,
            "id,theta_original,rank_original,theta_corrected,rank_corrected"
        )?;
        let rank_orig = ranks_descending(&self.theta_original);
        let rank_corr = ranks_descending(&self.theta_hat);
        for i in 0..ds.n_items() {
            writeln!(
                out,
                "{},{:.6},{},{:.6},{}",
                ds.items().key(i),
                self.theta_original[i],
                rank_orig[i],
                self.theta_hat[i],
                rank_corr[i],
            )?;
        }
        Ok(())
    }
}

/// 1-based ranks by descending score; ties keep registry order.
pub fn ranks_descending(scores: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0usize; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}
