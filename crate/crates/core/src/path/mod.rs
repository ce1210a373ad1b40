//! Regularization/solution paths for the position-bias model: linearized
//! Bregman iteration, the exact inverse-scale-space path, and the LASSO
//! path, plus per-coordinate entering times.

mod design;
mod iss;
mod lasso;
mod lbi;

pub use design::PathDesign;
pub use iss::iss_path_exact;
pub use lasso::lasso_path;
pub use lbi::lbi_path;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Which solver traces the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Lbi,
    IssExact,
    Lasso,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Lbi => "lbi",
            Engine::IssExact => "iss",
            Engine::Lasso => "lasso",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lbi" => Ok(Engine::Lbi),
            "iss" | "iss_exact" => Ok(Engine::IssExact),
            "lasso" => Ok(Engine::Lasso),
            other => Err(Error::InvalidConfig(format!(
                "unknown engine {other:?} (expected lbi, iss, or lasso)"
            ))),
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Path parameterization: forward time for ISS/LBI, penalty level for LASSO.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Time,
    Lambda,
}

#[derive(Debug, Clone)]
pub struct PathKnot {
    pub param: f64,
    pub gamma: DVector<f64>,
    pub theta: DVector<f64>,
}

/// An ordered solution path with per-coordinate first-entry parameters.
/// Knots are sorted by increasing time (or decreasing lambda).
#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub param_kind: ParamKind,
    pub knots: Vec<PathKnot>,
    /// First parameter at which each gamma coordinate becomes nonzero;
    /// `None` for coordinates that never enter.
    pub entering: Vec<Option<f64>>,
}

impl SolutionPath {
    /// Knockoff entering statistics: the largest lambda with a nonzero
    /// coefficient for lambda paths, the reciprocal of the first entry time
    /// for time paths, and 0 for coordinates that never enter.
    pub fn entering_times(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.entering.len(),
            self.entering.iter().map(|e| match (self.param_kind, e) {
                (_, None) => 0.0,
                (ParamKind::Time, Some(t)) => 1.0 / t,
                (ParamKind::Lambda, Some(l)) => *l,
            }),
        )
    }
}

/// Free-function form of the entering-time extraction.
pub fn entering_times(path: &SolutionPath) -> DVector<f64> {
    path.entering_times()
}

/// Path solver options. `dt` and `t_max` default to values derived from the
/// design: dt = 1/(2 kappa |X'X|), t_max = t_max_factor / lambda_max where
/// lambda_max is the largest initial correlation. The lambda grid defaults
/// to `n_lambda` logarithmically spaced points from lambda_max down to
/// lambda_max * lambda_min_ratio.
#[derive(Debug, Clone)]
pub struct PathConfig {
    pub kappa: f64,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub t_max_factor: f64,
    pub lambda_grid: Option<Vec<f64>>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    /// Extra knots every `record_stride` LBI steps; 0 records only
    /// sign-pattern changes.
    pub record_stride: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            kappa: 256.0,
            dt: None,
            t_max: None,
            t_max_factor: 40.0,
            lambda_grid: None,
            n_lambda: 100,
            lambda_min_ratio: 1e-3,
            record_stride: 0,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidConfig("kappa must be positive".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidConfig("dt must be positive".into()));
            }
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig("t_max must be positive".into()));
            }
        }
        if !(self.t_max_factor > 0.0) {
            return Err(Error::InvalidConfig("t_max_factor must be positive".into()));
        }
        if self.n_lambda < 2 {
            return Err(Error::InvalidConfig("n_lambda must be at least 2".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidConfig(
                "lambda_min_ratio must lie in (0, 1)".into(),
            ));
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() {
                return Err(Error::InvalidConfig("lambda grid is empty".into()));
            }
            if grid.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::InvalidConfig("lambda grid must be positive".into()));
            }
            if grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::InvalidConfig(
                    "lambda grid must be strictly decreasing".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Runs the configured engine on a prepared design.
pub fn run_path(design: &PathDesign, engine: Engine, cfg: &PathConfig) -> Result<SolutionPath> {
    match engine {
        Engine::Lbi => lbi_path(design, cfg),
        Engine::IssExact => iss_path_exact(design, cfg),
        Engine::Lasso => lasso_path(design, cfg),
    }
}

/// A path whose response carries no gamma-correlated signal: one knot at the
/// origin, nothing enters.
pub(crate) fn trivial_path(design: &PathDesign, kind: ParamKind) -> SolutionPath {
    SolutionPath {
        param_kind: kind,
        knots: vec![PathKnot {
            param: 0.0,
            gamma: DVector::zeros(design.n_gamma()),
            theta: design.initial_theta(),
        }],
        entering: vec![None; design.n_gamma()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_rejects_bad_values() {
        let ok = PathConfig::default();
        assert!(ok.validate().is_ok());
        for broken in [
            PathConfig { kappa: 0.0, ..PathConfig::default() },
            PathConfig { dt: Some(-1.0), ..PathConfig::default() },
            PathConfig { t_max: Some(0.0), ..PathConfig::default() },
            PathConfig { t_max_factor: -2.0, ..PathConfig::default() },
            PathConfig { n_lambda: 1, ..PathConfig::default() },
            PathConfig { lambda_min_ratio: 1.5, ..PathConfig::default() },
            PathConfig { lambda_grid: Some(vec![]), ..PathConfig::default() },
            PathConfig { lambda_grid: Some(vec![1.0, 2.0]), ..PathConfig::default() },
            PathConfig { lambda_grid: Some(vec![2.0, -1.0]), ..PathConfig::default() },
        ] {
            assert!(broken.validate().is_err(), "{broken:?} should be rejected");
        }
    }

    #[test]
    fn engine_names_round_trip() {
        for engine in [Engine::Lbi, Engine::IssExact, Engine::Lasso] {
            let parsed: Engine = engine.as_str().parse().unwrap();
            assert_eq!(parsed, engine);
        }
        assert!("nonsense".parse::<Engine>().is_err());
    }
}
