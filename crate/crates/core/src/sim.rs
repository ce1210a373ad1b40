//! Synthetic pairwise-comparison benchmark: planted position-biased
//! annotators, Monte-Carlo trials, and the FDP / true-discovery metrics.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{ComparisonDataset, ComparisonRecord};
use crate::detect::{detect, DetectionConfig};
use crate::error::{Error, Result};
use crate::knockoff::SMode;
use crate::path::{Engine, PathConfig};

/// Which side a biased annotator snaps to when the position effect fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasSide {
    /// Always the left button (the pattern real platforms exhibit).
    Left,
    /// A side drawn once per annotator.
    RandomPerAnnotator,
}

impl std::str::FromStr for BiasSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(BiasSide::Left),
            "random" => Ok(BiasSide::RandomPerAnnotator),
            other => Err(Error::InvalidConfig(format!(
                "unknown bias side {other:?} (expected left or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n_items: usize,
    pub n_good: usize,
    pub n_biased: usize,
    /// Probability that a good judgment reverses the ground-truth direction.
    pub p1: f64,
    /// Probability that a biased annotator's judgment is a position click.
    pub p2: f64,
    pub q: f64,
    pub plus: bool,
    pub engine: Engine,
    pub s_mode: SMode,
    pub normalize_columns: bool,
    pub path: PathConfig,
    pub bias_side: BiasSide,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_items: 16,
            n_good: 100,
            n_biased: 50,
            p1: 0.1,
            p2: 0.5,
            q: 0.1,
            plus: false,
            engine: Engine::Lbi,
            s_mode: SMode::Equicorrelated,
            normalize_columns: false,
            path: PathConfig::default(),
            bias_side: BiasSide::Left,
            reps: 100,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_items < 2 {
            return Err(Error::InvalidConfig("need at least 2 items".into()));
        }
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("q", self.q)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        if self.n_good + self.n_biased == 0 {
            return Err(Error::InvalidConfig("no annotators configured".into()));
        }
        self.path.validate()
    }

    fn detection(&self, seed: u64) -> DetectionConfig {
        DetectionConfig {
            q: self.q,
            plus: self.plus,
            engine: self.engine,
            s_mode: self.s_mode,
            normalize_columns: self.normalize_columns,
            path: self.path.clone(),
            seed,
        }
    }
}

/// SplitMix64 step, used to derive independent child seeds.
fn mix(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Child seed for trial (i, j, rep) under a base seed.
pub fn child_seed(seed: u64, i: usize, j: usize, rep: usize) -> u64 {
    let mut s = mix(seed);
    s = mix(s ^ (i as u64).wrapping_mul(0xa076_1d64_78bd_642f));
    s = mix(s ^ (j as u64).wrapping_mul(0xe703_7ed1_a0b4_28db));
    mix(s ^ (rep as u64).wrapping_mul(0x8ebc_6af0_9c88_c6e3))
}

/// Draws one synthetic dataset: a uniform ground-truth order on the items,
/// every annotator labels every unordered pair once with uniform left/right
/// placement. Good annotators reverse the truth with probability p1; biased
/// annotators emit a position click with probability p2 and otherwise behave
/// like good ones. Returns the dataset and the planted biased annotator
/// keys.
pub fn generate(cfg: &SimulationConfig, seed: u64) -> (ComparisonDataset, BTreeSet<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n_items;
    let total = cfg.n_good + cfg.n_biased;

    // Ground truth: rank_of[i] is the position of item i, smaller is better.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut rank_of = vec![0usize; n];
    for (pos, &item) in order.iter().enumerate() {
        rank_of[item] = pos;
    }

    let mut records = Vec::with_capacity(total * n * (n - 1) / 2);
    let mut truth = BTreeSet::new();
    for a in 0..total {
        let key = format!("a{}", a + 1);
        let biased = a >= cfg.n_good;
        if biased {
            truth.insert(key.clone());
        }
        let bias_response = match cfg.bias_side {
            BiasSide::Left => 1.0,
            BiasSide::RandomPerAnnotator => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        for i in 0..n {
            for j in (i + 1)..n {
                let (left, right) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
                let response = if biased && rng.random_bool(cfg.p2) {
                    bias_response
                } else {
                    let truth_dir = if rank_of[left] < rank_of[right] { 1.0 } else { -1.0 };
                    if cfg.p1 > 0.0 && rng.random_bool(cfg.p1) {
                        -truth_dir
                    } else {
                        truth_dir
                    }
                };
                records.push(ComparisonRecord {
                    annotator: key.clone(),
                    left: format!("i{}", left + 1),
                    right: format!("i{}", right + 1),
                    response,
                });
            }
        }
    }
    let ds = ComparisonDataset::from_records(records).expect("generated records are valid");
    (ds, truth)
}

/// Per-trial evaluation against the planted support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    /// False positives over selected size, with the empty-selection
    /// denominator floored at 1.
    pub fdp: f64,
    pub true_discoveries: usize,
    pub selected_size: usize,
}

/// Generates, detects, and scores one trial. Data and knockoff randomness
/// use separate child streams of the trial seed.
pub fn run_trial(cfg: &SimulationConfig, seed: u64) -> Result<TrialMetrics> {
    cfg.validate()?;
    let data_seed = mix(seed ^ 0x5b4c_1d06_33aa_41f7);
    let (ds, truth) = generate(cfg, data_seed);
    let report = detect(&ds, &cfg.detection(seed))?;
    let selected_keys: BTreeSet<String> = report
        .selection
        .selected
        .iter()
        .map(|&j| ds.annotators().key(j).to_owned())
        .collect();
    let true_discoveries = selected_keys.intersection(&truth).count();
    let false_positives = selected_keys.len() - true_discoveries;
    let fdp = false_positives as f64 / (selected_keys.len().max(1)) as f64;
    Ok(TrialMetrics {
        fdp,
        true_discoveries,
        selected_size: selected_keys.len(),
    })
}

/// One cell of the Monte-Carlo grid.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub p1: f64,
    pub p2: f64,
    pub mean_fdp: f64,
    pub mean_true_discoveries: f64,
    pub reps: usize,
    pub engine: Engine,
    pub q: f64,
}

/// Runs `reps` trials per (p1, p2) cell in parallel. Child seeds are derived
/// from (seed, p1 index, p2 index, rep), so results do not depend on the
/// execution order.
pub fn run_grid(p1_list: &[f64], p2_list: &[f64], base: &SimulationConfig) -> Result<Vec<GridCell>> {
    base.validate()?;
    if base.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let mut jobs = Vec::new();
    for (i, &p1) in p1_list.iter().enumerate() {
        for (j, &p2) in p2_list.iter().enumerate() {
            for rep in 0..base.reps {
                jobs.push((i, j, rep, p1, p2));
            }
        }
    }
    let results: Vec<((usize, usize), TrialMetrics)> = jobs
        .par_iter()
        .map(|&(i, j, rep, p1, p2)| {
            let mut cfg = base.clone();
            cfg.p1 = p1;
            cfg.p2 = p2;
            let metrics = run_trial(&cfg, child_seed(base.seed, i, j, rep))?;
            Ok(((i, j), metrics))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (i, &p1) in p1_list.iter().enumerate() {
        for (j, &p2) in p2_list.iter().enumerate() {
            let cell: Vec<&TrialMetrics> = results
                .iter()
                .filter(|((ci, cj), _)| *ci == i && *cj == j)
                .map(|(_, m)| m)
                .collect();
            let reps = cell.len();
            let mean_fdp = cell.iter().map(|m| m.fdp).sum::<f64>() / reps as f64;
            let mean_td =
                cell.iter().map(|m| m.true_discoveries as f64).sum::<f64>() / reps as f64;
            cells.push(GridCell {
                p1,
                p2,
                mean_fdp,
                mean_true_discoveries: mean_td,
                reps,
                engine: base.engine,
                q: base.q,
            });
        }
    }
    Ok(cells)
}

/// Writes the grid in the plot-ready CSV layout.
pub fn write_grid_csv<W: Write>(cells: &[GridCell], mut out: W) -> std::io::Result<()> {
    writeln!(out, "p1,p2,mean_fdp,mean_true_discoveries,reps,engine,q")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{:.4},{:.2},{},{},{}",
            c.p1, c.p2, c.mean_fdp, c.mean_true_discoveries, c.reps, c.engine, c.q
        )?;
    }
    Ok(())
}
