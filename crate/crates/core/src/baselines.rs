//! Reference solvers: classical two-grid and multigrid cycles, CG, MG-preconditioned
//! CG, steepest descent, accelerated gradient and L-BFGS.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_unchecked, GridField};
use crate::hierarchy::Hierarchy;
use crate::problems::ProblemLevel;
use crate::relaxation::{sd_sweep, Relaxer, SdState};
use crate::sesop::{sesop_solve, SesopConfig, StepMode};
use crate::trace::{run_iterations, Monitor, SolveOutcome, StopRule};

pub const DEFAULT_LBFGS_MEMORY: usize = 10;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineKind {
    ClassicalTg,
    /// Linear correction-scheme cycles, or SD relaxation with a line-searched
    /// coarse correction for nonlinear problems.
    ClassicalMg { cycle_type: usize },
    Cg,
    PcgMg,
    Sd,
    Nesterov,
    Lbfgs { memory: usize },
}

/// Runs `kind` on the finest level of `hier`.
pub fn baseline_solve(
    kind: BaselineKind,
    hier: &Hierarchy,
    x0: GridField,
    monitor: Monitor,
    stop: StopRule,
) -> Result<SolveOutcome> {
    let fine = hier.fine();
    match kind {
        BaselineKind::ClassicalTg => classical_tg_solve(hier, x0, stop),
        BaselineKind::ClassicalMg { cycle_type } => {
            if fine.is_quadratic() {
                classical_mg_solve(hier, Relaxer::jacobi(2, 1), cycle_type, x0, monitor, stop)
            } else {
                nonlinear_mg_solve(hier, cycle_type, x0, monitor, stop)
            }
        }
        BaselineKind::Cg => cg_solve(fine, x0, monitor, stop),
        BaselineKind::PcgMg => pcg_mg_solve(hier, x0, monitor, stop),
        BaselineKind::Sd => sd_solve(fine, x0, monitor, stop),
        BaselineKind::Nesterov => nesterov_solve(fine, x0, monitor, stop),
        BaselineKind::Lbfgs { memory } => lbfgs_solve(fine, memory, x0, monitor, stop),
    }
}

fn residual_of(level: &ProblemLevel, u: &GridField) -> Result<GridField> {
    let (op, f) = level.linear_parts().ok_or(Error::NotQuadratic)?;
    let mut r = apply_unchecked(op, u);
    r.scale(-1.0);
    r.axpy(1.0, f);
    Ok(r)
}

/// One correction-scheme cycle for `A_l u = f` on level `l`, Jacobi relaxation.
pub fn mg_cycle(
    hier: &Hierarchy,
    l: usize,
    u: GridField,
    f: &GridField,
    relax: &Relaxer,
    cycle_type: usize,
) -> Result<GridField> {
    let (op, _) = hier.level(l).linear_parts().ok_or(Error::NotQuadratic)?;
    if l + 1 == hier.len() {
        return hier.coarsest_solve(f);
    }
    let level = ProblemLevel::quadratic(op.clone(), f.clone())?;
    let mut sd = SdState::new();
    let mut u = relax.sweeps(&level, u, relax.v1, &mut sd)?;
    let rc = hier.restrict(&residual_of(&level, &u)?)?;
    let mut e = GridField::zeros(rc.n());
    let repeats = if l + 2 == hier.len() { 1 } else { cycle_type };
    for _ in 0..repeats {
        e = mg_cycle(hier, l + 1, e, &rc, relax, cycle_type)?;
    }
    u.axpy(1.0, &hier.prolong(&e)?);
    relax.sweeps(&level, u, relax.v2, &mut sd)
}

/// Linear multigrid iteration with the given relaxation and cycle type.
pub fn classical_mg_solve(
    hier: &Hierarchy,
    relax: Relaxer,
    cycle_type: usize,
    x0: GridField,
    monitor: Monitor,
    stop: StopRule,
) -> Result<SolveOutcome> {
    if !(1..=2).contains(&cycle_type) {
        return Err(Error::InvalidParameter(format!("cycle_type must be 1 or 2, got {cycle_type}")));
    }
    let fine = hier.fine();
    let (_, f) = fine.linear_parts().ok_or(Error::NotQuadratic)?;
    run_iterations(fine, x0, monitor, stop, |x| mg_cycle(hier, 0, x.clone(), f, &relax, cycle_type))
}

/// One optimally damped Jacobi sweep followed by an exact coarse-grid correction.
pub fn classical_tg_solve(hier: &Hierarchy, x0: GridField, stop: StopRule) -> Result<SolveOutcome> {
    if hier.len() != 2 {
        return Err(Error::Hierarchy("two-grid solve needs exactly two levels".into()));
    }
    classical_mg_solve(hier, Relaxer::jacobi(1, 0), 1, x0, Monitor::Residual, stop)
}

/// Conjugate gradients on `A u = f`.
pub fn cg_solve(level: &ProblemLevel, x0: GridField, monitor: Monitor, stop: StopRule) -> Result<SolveOutcome> {
    pcg(level, x0, monitor, stop, |r| Ok(r.clone()))
}

/// CG preconditioned by one V(2,1) Jacobi cycle from a zero guess. The cycle is
/// not symmetric, so the Polak-Ribiere form of beta is used.
pub fn pcg_mg_solve(hier: &Hierarchy, x0: GridField, monitor: Monitor, stop: StopRule) -> Result<SolveOutcome> {
    let relax = Relaxer::jacobi(2, 1);
    pcg(hier.fine(), x0, monitor, stop, |r| {
        mg_cycle(hier, 0, GridField::zeros(r.n()), r, &relax, 1)
    })
}

fn pcg<M>(level: &ProblemLevel, x0: GridField, monitor: Monitor, stop: StopRule, mut precond: M) -> Result<SolveOutcome>
where
    M: FnMut(&GridField) -> Result<GridField>,
{
    let (op, _) = level.linear_parts().ok_or(Error::NotQuadratic)?;
    let mut r = residual_of(level, &x0)?;
    let mut z = precond(&r)?;
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    run_iterations(level, x0, monitor, stop, |x| {
        let ap = apply_unchecked(op, &p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            if r.norm_sq() == 0.0 {
                return Ok(x.clone());
            }
            return Err(Error::Breakdown(pap));
        }
        let a = rz / pap;
        let mut xn = x.clone();
        xn.axpy(a, &p);
        r.axpy(-a, &ap);
        let zn = precond(&r)?;
        let rz_new = r.dot(&zn);
        let beta = (rz_new - r.dot(&z)) / rz;
        z = zn;
        rz = rz_new;
        p.scale(beta);
        p.axpy(1.0, &z);
        Ok(xn)
    })
}

/// Steepest descent with exact steps on quadratics and Armijo backtracking otherwise.
pub fn sd_solve(level: &ProblemLevel, x0: GridField, monitor: Monitor, stop: StopRule) -> Result<SolveOutcome> {
    let mut st = SdState::new();
    run_iterations(level, x0, monitor, stop, |x| sd_sweep(level, x, &mut st))
}

/// Accelerated gradient with backtracking on the Lipschitz estimate and a
/// restart whenever the objective would increase.
pub fn nesterov_solve(level: &ProblemLevel, x0: GridField, monitor: Monitor, stop: StopRule) -> Result<SolveOutcome> {
    let mut lip = level.hessian_diagonal_scale();
    let mut t = 1.0f64;
    let mut y = x0.clone();
    let mut fx = level.value(&x0);
    run_iterations(level, x0, monitor, stop, |x| {
        let mut restarted = false;
        loop {
            let fy = level.value(&y);
            let g = level.gradient(&y);
            let gg = g.norm_sq();
            if gg == 0.0 {
                return Ok(y.clone());
            }
            lip *= 0.5;
            let mut accepted = None;
            for _ in 0..=2 * MAX_HALVINGS {
                let mut trial = y.clone();
                trial.axpy(-1.0 / lip, &g);
                let ft = level.value(&trial);
                if ft.is_finite() && ft <= fy - 0.5 * gg / lip {
                    accepted = Some((trial, ft));
                    break;
                }
                lip *= 2.0;
            }
            let (xn, fxn) = accepted.ok_or(Error::LineSearchFailure { halvings: 2 * MAX_HALVINGS })?;
            if fxn > fx && !restarted {
                // momentum overshoot: restart from x
                t = 1.0;
                y = x.clone();
                restarted = true;
                continue;
            }
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mut yn = xn.clone();
            yn.axpy((t - 1.0) / tn, &xn.sub(x));
            y = yn;
            t = tn;
            fx = fxn;
            return Ok(xn);
        }
    })
}

/// Limited-memory BFGS state: two-loop recursion, Armijo backtracking, and
/// pairs with too little curvature are skipped.
#[derive(Debug, Clone)]
pub struct Lbfgs {
    memory: usize,
    pairs: VecDeque<(GridField, GridField, f64)>,
    gamma: f64,
}

impl Lbfgs {
    pub fn new(memory: usize, initial_scale: f64) -> Self {
        Self {
            memory: memory.max(1),
            pairs: VecDeque::new(),
            gamma: initial_scale,
        }
    }

    fn direction(&self, g: &GridField) -> GridField {
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter() {
            let a = rho * s.dot(&q);
            q.axpy(-a, y);
            alphas.push(a);
        }
        q.scale(self.gamma);
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas).rev() {
            let b = rho * y.dot(&q);
            q.axpy(a - b, s);
        }
        q.scale(-1.0);
        q
    }

    /// One iteration from `x` with gradient `g` and value `fx`.
    pub fn step(&mut self, level: &ProblemLevel, x: &GridField, fx: f64, g: &GridField) -> Result<(GridField, f64, GridField)> {
        let mut d = self.direction(g);
        let mut slope = d.dot(g);
        if slope >= 0.0 {
            self.pairs.clear();
            d = g.scaled(-self.gamma);
            slope = d.dot(g);
        }
        let mut t = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let mut xn = x.clone();
            xn.axpy(t, &d);
            let fxn = level.value(&xn);
            if fxn.is_finite() && fxn <= fx + ARMIJO_C * t * slope {
                let gn = level.gradient(&xn);
                let s = xn.sub(x);
                let y = gn.sub(g);
                let sy = s.dot(&y);
                if sy > 1e-10 * (s.norm_sq() * y.norm_sq()).sqrt() {
                    self.gamma = sy / y.norm_sq();
                    self.pairs.push_front((s, y, 1.0 / sy));
                    self.pairs.truncate(self.memory);
                }
                return Ok((xn, fxn, gn));
            }
            t *= 0.5;
        }
        Err(Error::LineSearchFailure { halvings: MAX_HALVINGS })
    }
}

/// Minimises `level` from `x` for at most `max_iter` iterations or until
/// `||grad|| <= gtol`. Returns the iterate and the iterations used; a failed
/// line search ends the loop early.
pub fn lbfgs_minimize(level: &ProblemLevel, x: GridField, memory: usize, max_iter: usize, gtol: f64) -> Result<(GridField, usize)> {
    let mut opt = Lbfgs::new(memory, 1.0 / level.hessian_diagonal_scale());
    let mut x = x;
    let mut fx = level.try_value(&x)?;
    let mut g = level.try_gradient(&x)?;
    for k in 0..max_iter {
        if g.norm_sq().sqrt() <= gtol {
            return Ok((x, k));
        }
        match opt.step(level, &x, fx, &g) {
            Ok((xn, fxn, gn)) => {
                x = xn;
                fx = fxn;
                g = gn;
            }
            Err(Error::LineSearchFailure { .. }) => return Ok((x, k)),
            Err(e) => return Err(e),
        }
    }
    Ok((x, max_iter))
}

pub fn lbfgs_solve(level: &ProblemLevel, memory: usize, x0: GridField, monitor: Monitor, stop: StopRule) -> Result<SolveOutcome> {
    let mut opt = Lbfgs::new(memory, 1.0 / level.hessian_diagonal_scale());
    run_iterations(level, x0, monitor, stop, |x| {
        let fx = level.value(x);
        let g = level.gradient(x);
        if g.norm_sq() == 0.0 {
            return Ok(x.clone());
        }
        Ok(opt.step(level, x, fx, &g)?.0)
    })
}

/// Multilevel optimisation baseline: one SD pre-sweep per level and the
/// coarse correction scaled by a golden-section line search.
pub fn nonlinear_mg_config(cycle_type: usize) -> SesopConfig {
    SesopConfig {
        history: 0,
        mode: StepMode::CgcLineSearch,
        cycle_type,
        ..SesopConfig::nonlinear(0)
    }
}

pub fn nonlinear_mg_solve(
    hier: &Hierarchy,
    cycle_type: usize,
    x0: GridField,
    monitor: Monitor,
    stop: StopRule,
) -> Result<SolveOutcome> {
    sesop_solve(hier, nonlinear_mg_config(cycle_type), x0, monitor, stop)
}
