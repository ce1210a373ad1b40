//! Regenerates the committed fixtures under tests/fixtures/. Run from the
//! workspace root:
//!
//!     cargo run -p posbias-cli --example gen_fixtures
//!
//! The fixture set is deterministic; rerunning must be a no-op diff.

use std::fs;
use std::path::PathBuf;

use posbias::{detect, generate, ComparisonDataset, DetectionConfig, Engine, SimulationConfig};

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn write(name: &str, contents: &str) {
    let path = fixtures_dir().join(name);
    fs::write(&path, contents).unwrap();
    println!("wrote {}", path.display());
}

fn write_dataset(name: &str, ds: &ComparisonDataset) {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let path = fixtures_dir().join(name);
    fs::write(&path, &buf).unwrap();
    println!("wrote {} ({} records)", path.display(), ds.n_edges());
}

/// A null dataset on which the q = 0 threshold scan cannot qualify any cut:
/// the largest |w| must belong to a negative statistic.
fn find_null_fixture() -> ComparisonDataset {
    let null_cfg = SimulationConfig {
        n_items: 6,
        n_good: 16,
        n_biased: 0,
        p1: 0.2,
        p2: 0.0,
        ..SimulationConfig::default()
    };
    let dcfg = DetectionConfig {
        q: 0.0,
        engine: Engine::IssExact,
        ..DetectionConfig::default()
    };
    for seed in 3000..3050u64 {
        let (ds, _) = generate(&null_cfg, seed);
        let report = detect(&ds, &dcfg).unwrap();
        let max_pos = report.stats.w.iter().cloned().fold(0.0f64, f64::max);
        let max_neg = report.stats.w.iter().cloned().fold(0.0f64, |m, v| m.max(-v));
        if max_neg > max_pos && report.selection.selected.is_empty() {
            println!("null fixture seed {seed}: max_pos={max_pos:.3} max_neg={max_neg:.3}");
            return ds;
        }
    }
    panic!("no suitable null seed found in the scanned range");
}

fn main() {
    fs::create_dir_all(fixtures_dir()).unwrap();

    // Planted instance: 8 items, 20 good + 6 biased annotators.
    let planted_cfg = SimulationConfig {
        n_items: 8,
        n_good: 20,
        n_biased: 6,
        p1: 0.15,
        p2: 0.8,
        ..SimulationConfig::default()
    };
    let (planted, truth) = generate(&planted_cfg, 2001);
    write_dataset("planted_small.csv", &planted);
    println!("planted biased annotators: {truth:?}");

    write_dataset("null_small.csv", &find_null_fixture());

    // Single annotator with a constant left offset on one item pair,
    // both presentation orders: the scalar-path fixture.
    let mut offset = String::from("annotator,left,right,response\n");
    for _ in 0..3 {
        offset.push_str("u1,x,y,1.5\n");
        offset.push_str("u1,y,x,-0.5\n");
    }
    write("offset_single.csv", &offset);

    // Small equivalence fixture: 10 annotators, 6 items.
    let equiv_cfg = SimulationConfig {
        n_items: 6,
        n_good: 8,
        n_biased: 2,
        p1: 0.1,
        p2: 0.7,
        ..SimulationConfig::default()
    };
    let (equiv, _) = generate(&equiv_cfg, 4001);
    write_dataset("equiv_small.csv", &equiv);

    // Above the small-instance guideline: 110 annotators, 5 items.
    let big_cfg = SimulationConfig {
        n_items: 5,
        n_good: 105,
        n_biased: 5,
        p1: 0.1,
        p2: 0.8,
        ..SimulationConfig::default()
    };
    let (big, _) = generate(&big_cfg, 4101);
    write_dataset("equiv_large.csv", &big);

    // Dimension-requirement violation: |E| = 3 < 2*1 + 3.
    write(
        "tiny_bad.csv",
        "annotator,left,right,response\nu1,a,b,1\nu1,b,c,1\nu1,a,c,1\n",
    );
}
