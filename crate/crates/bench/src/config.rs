//! Experiment configuration: one TOML document per run, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sesop_mg::hierarchy::{ladder, CoarseMode};
use sesop_mg::problems::ProblemSpec;
use sesop_mg::relaxation::{Preconditioner, RelaxKind, Relaxer};
use sesop_mg::sesop::{CoarsestSolver, SesopConfig, StepMode};
use sesop_mg::trace::{Monitor, StopRule};
use sesop_mg::transfer::{ProlongKind, TransferPair};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub stop: StopConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `phi` in radians.
    Rotated { epsilon: f64, phi: f64 },
    Exp {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    PLaplacian {
        p: f64,
        #[serde(default = "default_xi")]
        xi: f64,
    },
}

fn default_gamma() -> f64 {
    10.0
}

fn default_xi() -> f64 {
    1e-4
}

impl ProblemConfig {
    pub fn spec(&self) -> ProblemSpec {
        match *self {
            ProblemConfig::Rotated { epsilon, phi } => ProblemSpec::Rotated { epsilon, phi },
            ProblemConfig::Exp { gamma } => ProblemSpec::Exp { gamma },
            ProblemConfig::PLaplacian { p, xi } => ProblemSpec::PLaplacian { p, xi },
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ProblemConfig::Rotated { .. })
    }
}

/// Interior points per axis on the finest and coarsest levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub fine_n: usize,
    pub coarsest_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Sesop,
    ClassicalTg,
    ClassicalMg,
    Cg,
    PcgMg,
    Sd,
    Nesterov,
    Lbfgs,
}

impl SolverKind {
    fn needs_linear(self) -> bool {
        matches!(self, SolverKind::ClassicalTg | SolverKind::Cg | SolverKind::PcgMg)
    }
}

/// How SESOP picks its step weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    #[default]
    SubspaceMin,
    /// Fixed weights with `c3 = 1` from the ideal condition number.
    FixedOrdinary,
    /// Fixed weights from minimising the condition number over the blend.
    FixedOptimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxMethod {
    None,
    Jacobi,
    SteepestDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxConfig {
    pub method: RelaxMethod,
    /// Jacobi damping; optimal when absent.
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub v1: usize,
    #[serde(default)]
    pub v2: usize,
}

impl RelaxConfig {
    pub fn relaxer(&self) -> Relaxer {
        let kind = match self.method {
            RelaxMethod::None => RelaxKind::None,
            RelaxMethod::Jacobi => RelaxKind::DampedJacobi { omega: self.omega },
            RelaxMethod::SteepestDescent => RelaxKind::SteepestDescent,
        };
        Relaxer {
            kind,
            v1: self.v1,
            v2: self.v2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// History directions kept by SESOP.
    #[serde(default)]
    pub history: usize,
    /// 1 = V-cycle, 2 = W-cycle.
    #[serde(default = "default_cycle")]
    pub cycle_type: usize,
    #[serde(default = "default_true")]
    pub use_cgc: bool,
    /// Defaults to the Jacobi diagonal for linear problems, identity otherwise.
    #[serde(default)]
    pub preconditioner: Option<Preconditioner>,
    /// Defaults: none for linear problems, one steepest-descent pre-sweep otherwise.
    #[serde(default)]
    pub fine_relax: Option<RelaxConfig>,
    /// Defaults: Jacobi (2, 1) for linear problems, one steepest-descent pre-sweep otherwise.
    #[serde(default)]
    pub coarse_relax: Option<RelaxConfig>,
    #[serde(default)]
    pub prolongation: ProlongKind,
    #[serde(default)]
    pub coarse_mode: CoarseMode,
    #[serde(default)]
    pub coefficients: CoefficientMode,
    /// Fourier sampling per axis used to determine fixed step weights.
    #[serde(default = "default_analysis_m")]
    pub analysis_m: usize,
    #[serde(default = "default_memory")]
    pub lbfgs_memory: usize,
    #[serde(default = "default_newton")]
    pub newton_iters: usize,
    /// Quasi-Newton iterations on the coarsest nonlinear level.
    #[serde(default = "default_memory")]
    pub coarsest_max_iter: usize,
}

impl SolverConfig {
    /// Defaults for `kind` with `history` directions.
    pub fn new(kind: SolverKind, history: usize) -> Self {
        Self {
            kind,
            history,
            cycle_type: default_cycle(),
            use_cgc: true,
            preconditioner: None,
            fine_relax: None,
            coarse_relax: None,
            prolongation: ProlongKind::default(),
            coarse_mode: CoarseMode::default(),
            coefficients: CoefficientMode::default(),
            analysis_m: default_analysis_m(),
            lbfgs_memory: default_memory(),
            newton_iters: default_newton(),
            coarsest_max_iter: default_memory(),
        }
    }
}

fn default_cycle() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_analysis_m() -> usize {
    64
}

fn default_memory() -> usize {
    10
}

fn default_newton() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    /// `||f - A u||` on linear problems.
    Residual,
    /// `F(u) - F(u_exact)` with the sampled analytic solution.
    Gap,
    GradientNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Residual for linear problems and gap otherwise when absent.
    #[serde(default)]
    pub monitor: Option<MonitorKind>,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    500
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            monitor: None,
        }
    }
}

fn check(ok: bool, field: &str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(BenchError::config(field, message()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::from_toml(&text).map_err(|e| BenchError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<()> {
        check(
            !self.name.is_empty() && self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)),
            "name",
            || format!("`{}` must be nonempty and use only [A-Za-z0-9-_.]", self.name),
        )?;
        match self.problem {
            ProblemConfig::Rotated { epsilon, phi } => {
                check(epsilon > 0.0 && epsilon.is_finite(), "problem.epsilon", || format!("must be positive, got {epsilon}"))?;
                check(phi.is_finite(), "problem.phi", || format!("must be finite, got {phi}"))?;
            }
            ProblemConfig::Exp { gamma } => {
                check(gamma >= 0.0 && gamma.is_finite(), "problem.gamma", || format!("must be nonnegative, got {gamma}"))?;
            }
            ProblemConfig::PLaplacian { p, xi } => {
                check(p > 1.0 && p <= 2.0, "problem.p", || format!("must lie in (1, 2], got {p}"))?;
                check(xi > 0.0 && xi.is_finite(), "problem.xi", || format!("must be positive, got {xi}"))?;
            }
        }
        let g = self.grid;
        ladder(g.fine_n, g.coarsest_n).map_err(|e| BenchError::config("grid", e.to_string()))?;
        let s = &self.solver;
        let linear = self.problem.is_linear();
        check(!s.kind.needs_linear() || linear, "solver.kind", || {
            format!("{:?} needs a linear problem", s.kind)
        })?;
        check((1..=2).contains(&s.cycle_type), "solver.cycle_type", || {
            format!("must be 1 or 2, got {}", s.cycle_type)
        })?;
        if s.kind == SolverKind::ClassicalTg {
            check(ladder(g.fine_n, g.coarsest_n).map(|l| l.len()) == Ok(2), "grid.coarsest_n", || {
                "a two-grid solve needs coarsest_n = (fine_n - 1) / 2".into()
            })?;
        }
        if s.coefficients != CoefficientMode::SubspaceMin {
            check(s.kind == SolverKind::Sesop, "solver.coefficients", || "fixed weights apply to the sesop solver only".into())?;
            check(linear, "solver.coefficients", || "fixed weights need a linear problem".into())?;
            check(s.use_cgc, "solver.use_cgc", || "fixed weights need the coarse correction".into())?;
            check(s.analysis_m >= 4 && s.analysis_m.is_multiple_of(4), "solver.analysis_m", || {
                format!("must be a positive multiple of 4, got {}", s.analysis_m)
            })?;
        }
        if s.coarse_mode == CoarseMode::Galerkin {
            check(linear, "solver.coarse_mode", || "Galerkin coarsening needs a linear problem".into())?;
            check(s.prolongation == ProlongKind::Bilinear, "solver.coarse_mode", || {
                "Galerkin coarsening is implemented for bilinear prolongation".into()
            })?;
        }
        for (field, r) in [("solver.fine_relax", s.fine_relax), ("solver.coarse_relax", s.coarse_relax)] {
            if let Some(r) = r {
                if let Some(w) = r.omega {
                    check(w > 0.0 && w <= 1.0, &format!("{field}.omega"), || format!("must lie in (0, 1], got {w}"))?;
                }
                check(r.method != RelaxMethod::Jacobi || linear, &format!("{field}.method"), || {
                    "Jacobi relaxation needs a linear problem".into()
                })?;
            }
        }
        check(s.lbfgs_memory >= 1, "solver.lbfgs_memory", || "must be at least 1".into())?;
        check(s.newton_iters >= 1, "solver.newton_iters", || "must be at least 1".into())?;
        check(self.stop.tol >= 0.0 && self.stop.tol.is_finite(), "stop.tol", || {
            format!("must be nonnegative, got {}", self.stop.tol)
        })?;
        if let Some(MonitorKind::Residual) = self.stop.monitor {
            check(linear, "stop.monitor", || "the residual needs a linear problem".into())?;
        }
        if let Some(MonitorKind::Gap) = self.stop.monitor {
            check(!linear, "stop.monitor", || "the gap needs a problem with a known solution".into())?;
        }
        Ok(())
    }

    pub fn transfer(&self) -> TransferPair {
        TransferPair::new(self.solver.prolongation)
    }

    pub fn monitor(&self) -> Monitor {
        let spec = self.problem.spec();
        let kind = self.stop.monitor.unwrap_or(if self.problem.is_linear() {
            MonitorKind::Residual
        } else {
            MonitorKind::Gap
        });
        match kind {
            MonitorKind::Residual => Monitor::Residual,
            MonitorKind::GradientNorm => Monitor::GradientNorm,
            MonitorKind::Gap => Monitor::Gap {
                reference: spec.reference_objective(self.grid.fine_n).unwrap_or(0.0),
            },
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule::new(self.stop.tol, self.stop.max_iter)
    }

    /// Solver settings with problem-dependent defaults filled in.
    pub fn sesop_config(&self) -> SesopConfig {
        let s = &self.solver;
        let base = if self.problem.is_linear() {
            SesopConfig::linear_two_grid(s.history)
        } else {
            SesopConfig::nonlinear(s.history)
        };
        SesopConfig {
            history: s.history,
            use_cgc: s.use_cgc,
            preconditioner: s.preconditioner.unwrap_or(base.preconditioner),
            fine_relax: s.fine_relax.map_or(base.fine_relax, |r| r.relaxer()),
            coarse_relax: s.coarse_relax.map_or(base.coarse_relax, |r| r.relaxer()),
            cycle_type: s.cycle_type,
            coarsest: if self.problem.is_linear() {
                CoarsestSolver::Direct
            } else {
                CoarsestSolver::QuasiNewton {
                    max_iter: s.coarsest_max_iter,
                }
            },
            newton_iters: s.newton_iters,
            mode: StepMode::Subspace,
        }
    }

    /// Scales the grid by `factor` (a power of two), keeping `n + 1` a power of two.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = self.clone();
        out.grid.fine_n = scale_size(self.grid.fine_n, factor, "grid.fine_n")?;
        if self.solver.kind == SolverKind::ClassicalTg
            || ladder(self.grid.fine_n, self.grid.coarsest_n).map(|l| l.len()) == Ok(2)
        {
            out.grid.coarsest_n = (out.grid.fine_n - 1) / 2;
        }
        out.validate()?;
        Ok(out)
    }
}

/// `(n + 1) * factor - 1`, rejecting non-integral results.
pub fn scale_size(n: usize, factor: f64, field: &str) -> Result<usize> {
    let m = (n as f64 + 1.0) * factor;
    if !(factor > 0.0) || m.fract() != 0.0 || m < 4.0 {
        return Err(BenchError::config(field, format!("scale {factor} does not map {n} to a valid grid")));
    }
    Ok(m as usize - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "tg-iso"
seed = 3

[problem]
kind = "rotated"
epsilon = 1.0
phi = 0.0

[grid]
fine_n = 63
coarsest_n = 31

[solver]
kind = "sesop"
history = 1

[stop]
tol = 1e-8
max_iter = 200
"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.solver.cycle_type, 1);
        assert_eq!(c.solver.analysis_m, 64);
        assert_eq!(c.monitor(), Monitor::Residual);
        let s = c.sesop_config();
        assert_eq!(s.preconditioner, Preconditioner::JacobiDiagonalInverse);
        assert_eq!(s.fine_relax, Relaxer::none());
        assert_eq!(s.coarsest, CoarsestSolver::Direct);
    }

    #[test]
    fn roundtrips_through_toml() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = SAMPLE.replace("history = 1", "histroy = 1");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
        let typo = SAMPLE.replace("phi = 0.0", "phi = 0.0\nphii = 1.0");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
    }

    fn field_of(c: &ExperimentConfig) -> String {
        match c.validate() {
            Err(BenchError::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn validation_names_the_field() {
        let base = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let mut c = base.clone();
        c.grid.fine_n = 64;
        assert_eq!(field_of(&c), "grid");
        let mut c = base.clone();
        c.problem = ProblemConfig::Rotated { epsilon: -1.0, phi: 0.0 };
        assert_eq!(field_of(&c), "problem.epsilon");
        let mut c = base.clone();
        c.solver.cycle_type = 3;
        assert_eq!(field_of(&c), "solver.cycle_type");
        let mut c = base.clone();
        c.problem = ProblemConfig::PLaplacian { p: 1.3, xi: 1e-4 };
        c.solver.kind = SolverKind::Cg;
        assert_eq!(field_of(&c), "solver.kind");
        let mut c = base.clone();
        c.solver.coefficients = CoefficientMode::FixedOptimized;
        c.solver.analysis_m = 30;
        assert_eq!(field_of(&c), "solver.analysis_m");
        let mut c = base;
        c.stop.monitor = Some(MonitorKind::Gap);
        assert_eq!(field_of(&c), "stop.monitor");
    }

    #[test]
    fn scaling_keeps_power_of_two_grids() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let s = c.scaled(4.0).unwrap();
        assert_eq!((s.grid.fine_n, s.grid.coarsest_n), (255, 127));
        let s = c.scaled(0.5).unwrap();
        assert_eq!((s.grid.fine_n, s.grid.coarsest_n), (31, 15));
        assert!(c.scaled(0.3).is_err());
    }

    #[test]
    fn nonlinear_defaults() {
        let text = SAMPLE
            .replace("kind = \"rotated\"\nepsilon = 1.0\nphi = 0.0", "kind = \"p_laplacian\"\np = 1.6")
            .replace("coarsest_n = 31", "coarsest_n = 7");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.problem, ProblemConfig::PLaplacian { p: 1.6, xi: 1e-4 });
        assert!(matches!(c.monitor(), Monitor::Gap { .. }));
        let s = c.sesop_config();
        assert_eq!(s.coarsest, CoarsestSolver::QuasiNewton { max_iter: 10 });
        assert_eq!(s.fine_relax, Relaxer::steepest_descent(1, 0));
    }
}
