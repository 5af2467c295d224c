//! Executes experiment configurations.

use serde::{Deserialize, Serialize};
use sesop_mg::analysis::FixedCoefficients;
use sesop_mg::baselines::{baseline_solve, BaselineKind};
use sesop_mg::hierarchy::{build_hierarchy, Hierarchy};
use sesop_mg::lfa::{minimize_kappa, ordinary_coefficients, predicted_factor_fixed};
use sesop_mg::sesop::{fixed_step_solve, random_initial, sesop_solve};
use sesop_mg::trace::{estimate_practical_factor, SolveOutcome, TraceRecord};
use sesop_mg::trace::StopRule;

use crate::config::{CoefficientMode, ExperimentConfig, SolverKind};
use crate::error::Result;

/// Tolerance on the blend parameter in the condition-number search.
pub const ALPHA_TOL: f64 = 1e-4;

pub const WORKERS_ENV: &str = "SESOP_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub failure: Option<String>,
    pub measured_factor: Option<f64>,
    /// Present exactly for fixed-weight runs.
    pub predicted_factor: Option<f64>,
    pub coefficients: Option<FixedCoefficients>,
    /// Degradation from determining the weights on the analysis sampling
    /// instead of the target grid; fixed-optimised runs only.
    pub r_ratio: Option<f64>,
    pub seconds: f64,
}

impl RunReport {
    pub fn final_metric(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.metric)
    }
}

fn baseline_kind(cfg: &ExperimentConfig) -> Option<BaselineKind> {
    let s = &cfg.solver;
    Some(match s.kind {
        SolverKind::Sesop => return None,
        SolverKind::ClassicalTg => BaselineKind::ClassicalTg,
        SolverKind::ClassicalMg => BaselineKind::ClassicalMg { cycle_type: s.cycle_type },
        SolverKind::Cg => BaselineKind::Cg,
        SolverKind::PcgMg => BaselineKind::PcgMg,
        SolverKind::Sd => BaselineKind::Sd,
        SolverKind::Nesterov => BaselineKind::Nesterov,
        SolverKind::Lbfgs => BaselineKind::Lbfgs { memory: s.lbfgs_memory },
    })
}

pub fn build(cfg: &ExperimentConfig) -> Result<Hierarchy> {
    Ok(build_hierarchy(
        &cfg.problem.spec(),
        cfg.grid.fine_n,
        cfg.grid.coarsest_n,
        cfg.transfer(),
        cfg.solver.coarse_mode,
    )?)
}

/// Log-factor degradation `log r_target / log r_num - 1`.
pub fn r_ratio(r_target: f64, r_num: f64) -> f64 {
    r_target.ln() / r_num.ln() - 1.0
}

/// Fixed weights for `cfg` and the factor they are predicted to give.
pub fn fixed_coefficients(cfg: &ExperimentConfig, hier: &Hierarchy, m: usize) -> Result<FixedCoefficients> {
    let (op, _) = hier.fine().linear_parts().ok_or(sesop_mg::Error::NotQuadratic)?;
    let t = cfg.transfer();
    let mode = cfg.solver.coarse_mode;
    Ok(match cfg.solver.coefficients {
        CoefficientMode::FixedOrdinary => ordinary_coefficients(op, &t, mode, m)?,
        _ => {
            let c = minimize_kappa(op, &t, mode, m, ALPHA_TOL)?.coefficients;
            let rho = predicted_factor_fixed(op, &t, mode, m, &c)?;
            c.with_prediction(rho)
        }
    })
}

/// Runs one experiment. Deterministic for a fixed config apart from timings.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let hier = build(cfg)?;
    let x0 = random_initial(cfg.grid.fine_n, cfg.seed);
    let stop: StopRule = cfg.stop_rule();
    let monitor = cfg.monitor();
    let mut predicted = None;
    let mut coefficients = None;
    let mut ratio = None;
    let outcome: SolveOutcome = match (baseline_kind(cfg), cfg.solver.coefficients) {
        (Some(kind), _) => baseline_solve(kind, &hier, x0, monitor, stop)?,
        (None, CoefficientMode::SubspaceMin) => sesop_solve(&hier, cfg.sesop_config(), x0, monitor, stop)?,
        (None, mode) => {
            let c = fixed_coefficients(cfg, &hier, cfg.solver.analysis_m)?;
            predicted = Some(c.predicted_factor);
            coefficients = Some(c);
            if mode == CoefficientMode::FixedOptimized {
                let target = cfg.grid.fine_n + 1;
                ratio = Some(if target == cfg.solver.analysis_m {
                    0.0
                } else {
                    let (op, _) = hier.fine().linear_parts().expect("linear");
                    let (t, m) = (cfg.transfer(), cfg.solver.coarse_mode);
                    let best = fixed_coefficients(cfg, &hier, target)?;
                    let r_num = predicted_factor_fixed(op, &t, m, target, &c)?;
                    r_ratio(best.predicted_factor, r_num)
                });
            }
            fixed_step_solve(&hier, cfg.sesop_config(), &c, x0, stop)?
        }
    };
    let records = outcome.trace.records().to_vec();
    Ok(RunReport {
        config: cfg.clone(),
        iterations: outcome.trace.iterations(),
        converged: outcome.converged,
        failure: outcome.failure,
        measured_factor: estimate_practical_factor(&outcome.trace).ok().filter(|f| f.is_finite()),
        predicted_factor: predicted,
        coefficients,
        r_ratio: ratio,
        seconds: records.last().map_or(0.0, |r| r.seconds),
        records,
    })
}

/// Worker slots from the environment, defaulting to the available cores.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs independent experiments on `workers` threads; results keep input order.
pub fn run_batch(cfgs: &[ExperimentConfig], workers: usize) -> Vec<Result<RunReport>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| cfgs.par_iter().map(run_experiment).collect())
}
