//! Batch commands for position-bias detection on pairwise-comparison data:
//! detect, simulate, rank, paths, equivalence.
//!
//! Exit codes: 0 success, 1 input/configuration error, 2 dimension
//! requirement |E| >= 2|U| + |V| violated, 3 numerical failure. All output
//! files are written atomically (temp file + rename).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use posbias::{
    detect, equivalence_check, ranks_descending, run_grid, run_path, write_grid_csv,
    BiasSide, ComparisonDataset, DesignOperators, DetectionConfig, Engine, Error, ParamKind,
    PathConfig, PathDesign, ReportMeta, SMode, SimulationConfig,
};

#[derive(Parser)]
#[command(
    name = "posbias",
    version,
    about = "Detect position-biased annotators in pairwise-comparison data with FDR control"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the knockoff-filter detection pipeline and write a report.
    Detect {
        /// Input comparisons CSV (header: annotator,left,right,response).
        #[arg(long)]
        input: PathBuf,
        /// Report destination.
        #[arg(long)]
        output: PathBuf,
        /// Optional knockoff-statistics CSV (annotator,z,z_tilde,w,selected).
        #[arg(long = "stats-output")]
        stats_output: Option<PathBuf>,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Monte-Carlo benchmark over a (p1, p2) grid of planted instances.
    Simulate {
        /// Grid CSV destination.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
        #[command(flatten)]
        sim: SimOpts,
    },
    /// Write original vs bias-corrected item rankings side by side.
    Rank {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Dump the regularization path of the raw design as plot-ready CSV.
    Paths {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Compare the full-model and reduced-model knockoff statistics.
    Equivalence {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(Args, Default)]
struct CommonOpts {
    /// Target FDR level in [0, 1].
    #[arg(long)]
    q: Option<f64>,
    /// Use the knockoff+ cut.
    #[arg(long)]
    plus: bool,
    /// Path engine: lbi, iss, or lasso.
    #[arg(long)]
    engine: Option<String>,
    /// Decorrelation mode: equi or sdp.
    #[arg(long = "s-mode")]
    s_mode: Option<String>,
    /// Compute the decorrelation vector on unit-norm projected columns.
    #[arg(long = "normalize-columns")]
    normalize_columns: bool,
    /// Seed recorded in outputs and driving simulation randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// LBI inverse shrinkage strength.
    #[arg(long)]
    kappa: Option<f64>,
    /// LBI step size (defaults to the stability bound).
    #[arg(long)]
    dt: Option<f64>,
    /// Path horizon.
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    /// Horizon as a multiple of the first entry time, when t-max is unset.
    #[arg(long = "t-max-factor")]
    t_max_factor: Option<f64>,
    /// Record an LBI knot every this many steps (0: sign changes only).
    #[arg(long = "record-stride")]
    record_stride: Option<usize>,
    /// Number of lambda grid points for the lasso engine.
    #[arg(long = "n-lambda")]
    n_lambda: Option<usize>,
    /// Grid floor as a fraction of lambda_max.
    #[arg(long = "lambda-min-ratio")]
    lambda_min_ratio: Option<f64>,
    /// Flat `key = value` config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Default)]
struct SimOpts {
    /// Comma-separated good-annotator error rates.
    #[arg(long)]
    p1: Option<String>,
    /// Comma-separated position-click rates for biased annotators.
    #[arg(long)]
    p2: Option<String>,
    /// Number of items.
    #[arg(long = "n-items")]
    n_items: Option<usize>,
    /// Number of unbiased annotators.
    #[arg(long)]
    good: Option<usize>,
    /// Number of position-biased annotators.
    #[arg(long)]
    biased: Option<usize>,
    /// Trials per grid cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Side biased annotators snap to: left or random.
    #[arg(long = "bias-side")]
    bias_side: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_class(&err))
        }
    }
}

fn exit_class(err: &Error) -> u8 {
    match err {
        Error::DimensionRequirement { .. } => 2,
        Error::NonConvergence { .. }
        | Error::IndefiniteMatrix { .. }
        | Error::RankDeficiency(_)
        | Error::DegenerateKnockoffs { .. }
        | Error::KnockoffConditions { .. }
        | Error::UnstableStepSize { .. }
        | Error::Divergence { .. } => 3,
        _ => 1,
    }
}

const COMMON_KEYS: &[&str] = &[
    "q",
    "plus",
    "engine",
    "s_mode",
    "normalize_columns",
    "seed",
    "kappa",
    "dt",
    "t_max",
    "t_max_factor",
    "record_stride",
    "n_lambda",
    "lambda_min_ratio",
];
const SIM_KEYS: &[&str] = &["p1", "p2", "n_items", "good", "biased", "reps", "bias_side"];

/// Flat `key = value` file; `#` starts a comment. Unknown keys are errors.
fn load_config(path: &Path, allowed: &[&str]) -> Result<HashMap<String, String>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "{}:{}: expected `key = value`, got {raw:?}",
                path.display(),
                lineno + 1
            )));
        };
        let key = key.trim().to_owned();
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                lineno + 1
            )));
        }
        map.insert(key, value.trim().to_owned());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, Error> {
    raw.parse().map_err(|_| {
        Error::InvalidConfig(format!("invalid value {raw:?} for {key}"))
    })
}

/// Flag wins over config-file value wins over the built-in default.
struct Resolver {
    file: HashMap<String, String>,
}

impl Resolver {
    fn get<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, Error> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(raw) => parse_value(key, raw),
            None => Ok(default),
        }
    }

    fn get_opt<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, Error> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => Ok(Some(parse_value(key, raw)?)),
            None => Ok(None),
        }
    }

    fn get_bool(&self, flag: bool, key: &str) -> Result<bool, Error> {
        if flag {
            return Ok(true);
        }
        match self.file.get(key) {
            Some(raw) => parse_value(key, raw),
            None => Ok(false),
        }
    }
}

struct Resolved {
    detection: DetectionConfig,
    engine_flag: Option<Engine>,
}

fn resolve_common(opts: &CommonOpts, allowed: &[&str]) -> Result<Resolved, Error> {
    let file = match &opts.config {
        Some(path) => load_config(path, allowed)?,
        None => HashMap::new(),
    };
    let r = Resolver { file };
    let defaults = PathConfig::default();
    let path = PathConfig {
        kappa: r.get(opts.kappa, "kappa", defaults.kappa)?,
        dt: r.get_opt(opts.dt, "dt")?,
        t_max: r.get_opt(opts.t_max, "t_max")?,
        t_max_factor: r.get(opts.t_max_factor, "t_max_factor", defaults.t_max_factor)?,
        lambda_grid: None,
        n_lambda: r.get(opts.n_lambda, "n_lambda", defaults.n_lambda)?,
        lambda_min_ratio: r.get(
            opts.lambda_min_ratio,
            "lambda_min_ratio",
            defaults.lambda_min_ratio,
        )?,
        record_stride: r.get(opts.record_stride, "record_stride", defaults.record_stride)?,
    };
    let engine_flag: Option<Engine> = match r.get_opt(opts.engine.clone(), "engine")? {
        Some(name) => Some(name.parse()?),
        None => None,
    };
    let s_mode: SMode = r
        .get_opt(opts.s_mode.clone(), "s_mode")?
        .map(|name: String| name.parse())
        .transpose()?
        .unwrap_or(SMode::Equicorrelated);
    let detection = DetectionConfig {
        q: r.get(opts.q, "q", 0.1)?,
        plus: r.get_bool(opts.plus, "plus")?,
        engine: Engine::Lbi, // replaced by the resolved engine below
        s_mode,
        normalize_columns: r.get_bool(opts.normalize_columns, "normalize_columns")?,
        path,
        seed: r.get(opts.seed, "seed", 0)?,
    };
    Ok(Resolved {
        detection,
        engine_flag,
    })
}

/// Exact ISS below the small-instance guideline, LBI above it.
fn default_engine(n_annotators: usize) -> Engine {
    if n_annotators <= 500 {
        Engine::IssExact
    } else {
        Engine::Lbi
    }
}

fn read_dataset(path: &Path) -> Result<ComparisonDataset, Error> {
    let file = File::open(path)?;
    ComparisonDataset::parse_csv(BufReader::new(file))
}

fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write(&mut out)?;
        out.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn run(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Detect {
            input,
            output,
            stats_output,
            opts,
        } => cmd_detect(&input, &output, stats_output.as_deref(), &opts),
        Cmd::Simulate { output, opts, sim } => cmd_simulate(&output, &opts, &sim),
        Cmd::Rank {
            input,
            output,
            opts,
        } => cmd_rank(&input, &output, &opts),
        Cmd::Paths {
            input,
            output,
            opts,
        } => cmd_paths(&input, &output, &opts),
        Cmd::Equivalence { input, opts } => cmd_equivalence(&input, &opts),
    }
}

fn cmd_detect(
    input: &Path,
    output: &Path,
    stats_output: Option<&Path>,
    opts: &CommonOpts,
) -> Result<(), Error> {
    let resolved = resolve_common(opts, COMMON_KEYS)?;
    let ds = read_dataset(input)?;
    let mut cfg = resolved.detection;
    cfg.engine = resolved
        .engine_flag
        .unwrap_or_else(|| default_engine(ds.n_annotators()));
    let report = detect(&ds, &cfg)?;
    let meta = ReportMeta {
        q: cfg.q,
        plus: cfg.plus,
        engine: cfg.engine,
        s_mode: cfg.s_mode,
        seed: cfg.seed,
    };
    write_atomic(output, |out| report.write_text(&ds, &meta, out))?;
    if let Some(stats_path) = stats_output {
        write_atomic(stats_path, |out| {
            posbias::write_stats_csv(&report.stats, &report.selection, ds.annotators(), out)
        })?;
    }
    let threshold = if report.selection.threshold.is_finite() {
        format!("{:.6}", report.selection.threshold)
    } else {
        "inf".to_owned()
    };
    println!(
        "selected={} threshold={} q={} engine={}",
        report.selection.selected.len(),
        threshold,
        cfg.q,
        cfg.engine
    );
    Ok(())
}

fn parse_prob_list(key: &str, raw: &str) -> Result<Vec<f64>, Error> {
    let values: Vec<f64> = raw
        .split(',')
        .map(|tok| parse_value(key, tok.trim()))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(Error::InvalidConfig(format!("{key} list is empty")));
    }
    for &v in &values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidConfig(format!(
                "{key} values must lie in [0, 1], got {v}"
            )));
        }
    }
    Ok(values)
}

fn cmd_simulate(output: &Path, opts: &CommonOpts, sim: &SimOpts) -> Result<(), Error> {
    let allowed: Vec<&str> = COMMON_KEYS.iter().chain(SIM_KEYS).copied().collect();
    let resolved = resolve_common(opts, &allowed)?;
    let file = match &opts.config {
        Some(path) => load_config(path, &allowed)?,
        None => HashMap::new(),
    };
    let r = Resolver { file };

    let p1_raw: String = r.get(sim.p1.clone(), "p1", "0.1".to_owned())?;
    let p2_raw: String = r.get(sim.p2.clone(), "p2", "0.5".to_owned())?;
    let p1_list = parse_prob_list("p1", &p1_raw)?;
    let p2_list = parse_prob_list("p2", &p2_raw)?;
    let bias_side: BiasSide = r
        .get_opt(sim.bias_side.clone(), "bias_side")?
        .map(|name: String| name.parse())
        .transpose()?
        .unwrap_or(BiasSide::Left);

    let cfg = SimulationConfig {
        n_items: r.get(sim.n_items, "n_items", 16)?,
        n_good: r.get(sim.good, "good", 100)?,
        n_biased: r.get(sim.biased, "biased", 50)?,
        p1: p1_list[0],
        p2: p2_list[0],
        q: resolved.detection.q,
        plus: resolved.detection.plus,
        engine: resolved.engine_flag.unwrap_or(Engine::Lbi),
        s_mode: resolved.detection.s_mode,
        normalize_columns: resolved.detection.normalize_columns,
        path: resolved.detection.path.clone(),
        bias_side,
        reps: r.get(sim.reps, "reps", 20)?,
        seed: resolved.detection.seed,
    };
    let cells = run_grid(&p1_list, &p2_list, &cfg)?;
    write_atomic(output, |out| write_grid_csv(&cells, out))?;
    println!(
        "cells={} reps={} engine={} q={}",
        cells.len(),
        cfg.reps,
        cfg.engine,
        cfg.q
    );
    Ok(())
}

fn cmd_rank(input: &Path, output: &Path, opts: &CommonOpts) -> Result<(), Error> {
    let resolved = resolve_common(opts, COMMON_KEYS)?;
    let ds = read_dataset(input)?;
    let mut cfg = resolved.detection;
    cfg.engine = resolved
        .engine_flag
        .unwrap_or_else(|| default_engine(ds.n_annotators()));
    let report = detect(&ds, &cfg)?;
    let rank_orig = ranks_descending(&report.theta_original);
    let rank_corr = ranks_descending(&report.theta_hat);
    write_atomic(output, |out| {
        writeln!(
            out,
            "id,theta_original,rank_original,theta_corrected,rank_corrected"
        )?;
        for i in 0..ds.n_items() {
            writeln!(
                out,
                "{},{:.6},{},{:.6},{}",
                ds.items().key(i),
                report.theta_original[i],
                rank_orig[i],
                report.theta_hat[i],
                rank_corr[i],
            )?;
        }
        Ok(())
    })?;
    println!(
        "items={} selected={} engine={}",
        ds.n_items(),
        report.selection.selected.len(),
        cfg.engine
    );
    Ok(())
}

fn cmd_paths(input: &Path, output: &Path, opts: &CommonOpts) -> Result<(), Error> {
    let resolved = resolve_common(opts, COMMON_KEYS)?;
    let ds = read_dataset(input)?;
    let engine = resolved
        .engine_flag
        .unwrap_or_else(|| default_engine(ds.n_annotators()));
    let ops = DesignOperators::from_dataset(&ds)?;
    let design = PathDesign::from_operators(&ops, &ds.responses())?;
    let path = run_path(&design, engine, &resolved.detection.path)?;
    let entered: Vec<usize> = (0..ds.n_annotators())
        .filter(|&j| path.entering[j].is_some())
        .collect();
    write_atomic(output, |out| {
        writeln!(out, "param,coord,value")?;
        for knot in &path.knots {
            for &j in &entered {
                writeln!(
                    out,
                    "{},{},{}",
                    knot.param,
                    ds.annotators().key(j),
                    knot.gamma[j]
                )?;
            }
        }
        Ok(())
    })?;
    let kind = match path.param_kind {
        ParamKind::Time => "time",
        ParamKind::Lambda => "lambda",
    };
    println!(
        "knots={} entered={} param={kind} engine={engine}",
        path.knots.len(),
        entered.len()
    );
    Ok(())
}

fn cmd_equivalence(input: &Path, opts: &CommonOpts) -> Result<(), Error> {
    let resolved = resolve_common(opts, COMMON_KEYS)?;
    let ds = read_dataset(input)?;
    if ds.n_annotators() > 100 {
        eprintln!(
            "warning: {} annotators exceeds the small-instance guideline (100); \
             the kernel-basis pipeline materializes an |E| x (|E| - rank) matrix",
            ds.n_annotators()
        );
    }
    let engine = resolved.engine_flag.unwrap_or(Engine::IssExact);
    let ops = DesignOperators::from_dataset(&ds)?;
    let report = equivalence_check(
        &ops,
        &ds.responses(),
        engine,
        resolved.detection.s_mode,
    )?;
    if report.pass {
        println!(
            "PASS max_diff={:.3e} (tolerance {:.0e}, engine {})",
            report.max_w_diff, report.tolerance, report.engine
        );
        Ok(())
    } else {
        println!(
            "FAIL max_diff={:.3e} (tolerance {:.0e}, engine {})",
            report.max_w_diff, report.tolerance, report.engine
        );
        Err(Error::NonConvergence {
            what: "full/reduced knockoff statistics agreement",
            iterations: 0,
            residual: report.max_w_diff,
        })
    }
}
