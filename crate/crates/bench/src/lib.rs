//! Shared benchmark fixtures: deterministic synthetic comparison datasets at
//! a few scales.

use posbias::{ComparisonDataset, DesignOperators, PathConfig, SimulationConfig};

/// A planted binary instance with the given item/annotator counts.
pub fn instance(n_items: usize, n_good: usize, n_biased: usize, seed: u64) -> ComparisonDataset {
    let cfg = SimulationConfig {
        n_items,
        n_good,
        n_biased,
        p1: 0.15,
        p2: 0.6,
        ..SimulationConfig::default()
    };
    posbias::generate(&cfg, seed).0
}

pub fn operators(ds: &ComparisonDataset) -> DesignOperators {
    DesignOperators::from_dataset(ds).expect("benchmark dataset is valid")
}

/// Path options used across the benchmarks: moderate LBI discretization.
pub fn bench_path_config() -> PathConfig {
    PathConfig {
        kappa: 64.0,
        ..PathConfig::default()
    }
}
