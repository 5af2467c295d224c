//! Fourier-analysis studies: the stepsize comparison table, the sampling
//! sweep for coarse-grid stepsize determination, and per-config analysis.

use serde::{Deserialize, Serialize};
use sesop_mg::analysis::FixedCoefficients;
use sesop_mg::hierarchy::CoarseMode;
use sesop_mg::lfa::{h_ellipticity, ideal_factors, minimize_kappa, ordinary_coefficients, predicted_factor_fixed};
use sesop_mg::problems::rotated_stencil;
use sesop_mg::transfer::{ProlongKind, TransferPair};
use sesop_mg::StencilOp;

use crate::config::{ExperimentConfig, GridConfig, ProblemConfig, SolverConfig, SolverKind, StopConfig};
use crate::error::{BenchError, Result};
use crate::runner::{r_ratio, run_batch, ALPHA_TOL};

/// One anisotropy case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub epsilon: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table2Config {
    /// Fourier sampling per axis.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Interior size of the measured SESOP two-grid runs.
    #[serde(default = "default_sesop_n")]
    pub sesop_n: usize,
    #[serde(default)]
    pub seed: u64,
    pub rows: Vec<Case>,
    pub prolongations: Vec<ProlongKind>,
}

fn default_m() -> usize {
    64
}

fn default_sesop_n() -> usize {
    63
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub phi: f64,
    pub epsilon: f64,
    pub prolongation: ProlongKind,
    /// Predicted factor of the ordinary weights.
    pub ordinary: f64,
    /// Measured factor of SESOP-TG-1 with subspace minimisation.
    pub sesop: f64,
    /// Predicted factor of the condition-number-optimised weights.
    pub optimized: f64,
    /// Ideal factor with one history direction.
    pub ideal: f64,
}

fn stencil(c: Case) -> StencilOp {
    rotated_stencil(c.epsilon, c.phi, 1.0)
}

fn sesop_tg(c: Case, n: usize, seed: u64, prolongation: ProlongKind) -> ExperimentConfig {
    ExperimentConfig {
        name: "table2-sesop".into(),
        seed,
        problem: ProblemConfig::Rotated {
            epsilon: c.epsilon,
            phi: c.phi,
        },
        grid: GridConfig {
            fine_n: n,
            coarsest_n: (n - 1) / 2,
        },
        solver: SolverConfig {
            prolongation,
            ..SolverConfig::new(SolverKind::Sesop, 1)
        },
        stop: StopConfig {
            tol: 1e-8,
            max_iter: 300,
            monitor: None,
        },
    }
}

/// Ordinary, measured SESOP, optimised and ideal factors per row and prolongation.
pub fn run_table2(cfg: &Table2Config, workers: usize) -> Result<Vec<Table2Row>> {
    let mode = CoarseMode::Rediscretize;
    let mut keys = Vec::new();
    let mut runs = Vec::new();
    for &p in &cfg.prolongations {
        for &c in &cfg.rows {
            keys.push((p, c));
            runs.push(sesop_tg(c, cfg.sesop_n, cfg.seed, p));
        }
    }
    let measured = run_batch(&runs, workers);
    keys.into_iter()
        .zip(measured)
        .map(|((p, c), run)| {
            let op = stencil(c);
            let t = TransferPair::new(p);
            let ordinary = ordinary_coefficients(&op, &t, mode, cfg.m)?.predicted_factor;
            let best = minimize_kappa(&op, &t, mode, cfg.m, ALPHA_TOL)?;
            let optimized = predicted_factor_fixed(&op, &t, mode, cfg.m, &best.coefficients)?;
            let ideal = ideal_factors(&op, cfg.m)?.1;
            let sesop = run?.measured_factor.unwrap_or(f64::NAN);
            Ok(Table2Row {
                phi: c.phi,
                epsilon: c.epsilon,
                prolongation: p,
                ordinary,
                sesop,
                optimized,
                ideal,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RRatioConfig {
    /// Sampling that stands in for the target grid.
    #[serde(default = "default_target")]
    pub target_m: usize,
    pub sizes: Vec<usize>,
    pub cases: Vec<Case>,
    #[serde(default)]
    pub prolongation: ProlongKind,
}

fn default_target() -> usize {
    256
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RRatioPoint {
    pub epsilon: f64,
    pub phi: f64,
    pub num: usize,
    /// Factor on the target sampling of the weights found at `num`.
    pub factor: f64,
    pub r_ratio: f64,
}

/// `r_ratio(num)` for every case: weights optimised on `num` samples,
/// evaluated on the target sampling.
pub fn run_rratio_sweep(cfg: &RRatioConfig) -> Result<Vec<RRatioPoint>> {
    let mode = CoarseMode::Rediscretize;
    let t = TransferPair::new(cfg.prolongation);
    let mut out = Vec::new();
    for &c in &cfg.cases {
        let op = stencil(c);
        let best = minimize_kappa(&op, &t, mode, cfg.target_m, ALPHA_TOL)?;
        let r_target = predicted_factor_fixed(&op, &t, mode, cfg.target_m, &best.coefficients)?;
        for &num in &cfg.sizes {
            let (factor, ratio) = if num == cfg.target_m {
                (r_target, 0.0)
            } else {
                let w = minimize_kappa(&op, &t, mode, num, ALPHA_TOL)?.coefficients;
                let r = predicted_factor_fixed(&op, &t, mode, cfg.target_m, &w)?;
                (r, r_ratio(r_target, r))
            };
            out.push(RRatioPoint {
                epsilon: c.epsilon,
                phi: c.phi,
                num,
                factor,
                r_ratio: ratio,
            });
        }
    }
    Ok(out)
}

/// Fourier analysis of one linear experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub m: usize,
    pub h_ellipticity: f64,
    pub ideal_without_history: f64,
    pub ideal_with_history: f64,
    pub ordinary: FixedCoefficients,
    pub optimized: FixedCoefficients,
    pub optimized_kappa: f64,
}

pub fn analyze(cfg: &ExperimentConfig) -> Result<Analysis> {
    cfg.validate()?;
    let ProblemConfig::Rotated { epsilon, phi } = cfg.problem else {
        return Err(BenchError::config("problem.kind", "analysis needs a linear problem"));
    };
    let m = cfg.solver.analysis_m;
    if m < 4 || !m.is_multiple_of(4) {
        return Err(BenchError::config("solver.analysis_m", format!("must be a positive multiple of 4, got {m}")));
    }
    let h = 1.0 / (cfg.grid.fine_n + 1) as f64;
    let op = rotated_stencil(epsilon, phi, h);
    let t = cfg.transfer();
    let mode = cfg.solver.coarse_mode;
    let (ideal_without_history, ideal_with_history) = ideal_factors(&op, m)?;
    let best = minimize_kappa(&op, &t, mode, m, ALPHA_TOL)?;
    let rho = predicted_factor_fixed(&op, &t, mode, m, &best.coefficients)?;
    Ok(Analysis {
        m,
        h_ellipticity: h_ellipticity(&op, m)?,
        ideal_without_history,
        ideal_with_history,
        ordinary: ordinary_coefficients(&op, &t, mode, m)?,
        optimized: best.coefficients.with_prediction(rho),
        optimized_kappa: best.kappa,
    })
}
