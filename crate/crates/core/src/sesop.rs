//! Sequential subspace optimisation with multigrid coarse corrections.
//!
//! One fine iteration: pre-relax, collect the preconditioned gradient and
//! history steps, add the prolongated coarse correction, minimise the
//! objective over the spanned affine subspace, post-relax. Coarse problems
//! are corrected by a linear term so their gradient at the restriction
//! point equals the restricted fine gradient, and are solved recursively.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::FixedCoefficients;
use crate::baselines::lbfgs_minimize;
use crate::error::{Error, Result};
use crate::grid::{apply_unchecked, GridField};
use crate::hierarchy::Hierarchy;
use crate::problems::ProblemLevel;
use crate::relaxation::{Preconditioner, Relaxer, SdState};
use crate::trace::{run_iterations, Monitor, SolveOutcome, StopRule};

/// Relative eigenvalue cutoff of the reduced Hessian.
pub const EIG_CUTOFF: f64 = 1e-12;

/// Uniform `[0, 1)` interior values from a seeded generator.
pub fn random_initial(n: usize, seed: u64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridField::from_vec(n, (0..n * n).map(|_| rng.random::<f64>()).collect()).expect("n >= 1")
}

/// Ordered search directions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubspaceBasis {
    directions: Vec<GridField>,
}

impl SubspaceBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_directions(directions: Vec<GridField>) -> Self {
        Self { directions }
    }

    pub fn push(&mut self, d: GridField) {
        self.directions.push(d);
    }

    pub fn push_front(&mut self, d: GridField) {
        self.directions.insert(0, d);
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[GridField] {
        &self.directions
    }

    /// Unit-norm copies of the nonzero directions with their norms.
    fn normalized(&self) -> (Vec<GridField>, Vec<f64>) {
        let mut dirs = Vec::new();
        let mut norms = Vec::new();
        for d in &self.directions {
            let nrm = d.norm_sq().sqrt();
            if nrm > 0.0 && nrm.is_finite() {
                dirs.push(d.scaled(1.0 / nrm));
                norms.push(nrm);
            }
        }
        (dirs, norms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceStep {
    /// Coefficients of the nonzero basis directions, in basis order.
    pub alpha: Vec<f64>,
    pub x: GridField,
}

fn combine(x: &GridField, dirs: &[GridField], coeffs: &[f64]) -> GridField {
    let mut out = x.clone();
    for (d, &c) in dirs.iter().zip(coeffs) {
        if c != 0.0 {
            out.axpy(c, d);
        }
    }
    out
}

/// Minimum-norm solution of `H a = b` with small eigenvalues truncated.
fn truncated_solve(h: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let sym = (h + h.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let mut out = DVector::zeros(b.len());
    if lmax == 0.0 {
        return out;
    }
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > EIG_CUTOFF * lmax {
            let v = eig.eigenvectors.column(i);
            out += v * (v.dot(b) / l);
        }
    }
    out
}

/// Exact minimisation of a quadratic level over `x + span(basis)`.
pub fn subspace_minimize_quadratic(level: &ProblemLevel, x: &GridField, basis: &SubspaceBasis) -> Result<SubspaceStep> {
    if !level.is_quadratic() {
        return Err(Error::NotQuadratic);
    }
    let (dirs, norms) = basis.normalized();
    if dirs.is_empty() {
        return Ok(SubspaceStep {
            alpha: vec![],
            x: x.clone(),
        });
    }
    let g = level.try_gradient(x)?;
    let hd: Vec<GridField> = dirs.iter().map(|d| level.hessian_apply(d).expect("quadratic")).collect();
    let k = dirs.len();
    let h = DMatrix::from_fn(k, k, |i, j| dirs[i].dot(&hd[j]));
    let b = DVector::from_fn(k, |i, _| -dirs[i].dot(&g));
    let a = truncated_solve(&h, &b);
    let coeffs: Vec<f64> = a.iter().copied().collect();
    let xn = combine(x, &dirs, &coeffs);
    Ok(SubspaceStep {
        alpha: coeffs.iter().zip(&norms).map(|(c, n)| c / n).collect(),
        x: xn,
    })
}

/// Damped Newton on `a -> F(x + P a)` with a finite-difference reduced Hessian.
/// Returns `x` unchanged if no decrease is found.
pub fn subspace_minimize_newton(
    level: &ProblemLevel,
    x: &GridField,
    basis: &SubspaceBasis,
    iters: usize,
) -> Result<SubspaceStep> {
    let (dirs, norms) = basis.normalized();
    let k = dirs.len();
    let f0 = level.try_value(x)?;
    let mut a = DVector::<f64>::zeros(k);
    if k == 0 {
        return Ok(SubspaceStep {
            alpha: vec![],
            x: x.clone(),
        });
    }
    let reduced_grad = |a: &DVector<f64>| -> (GridField, DVector<f64>) {
        let xa = combine(x, &dirs, a.as_slice());
        let g = level.gradient(&xa);
        let gr = DVector::from_fn(k, |i, _| dirs[i].dot(&g));
        (xa, gr)
    };
    let mut fa = f0;
    for _ in 0..iters {
        let (_, gr) = reduced_grad(&a);
        let gnorm = gr.norm();
        if gnorm < 1e-14 * (1.0 + fa.abs()) {
            break;
        }
        let eps = 1e-6 * (1.0 + a.amax());
        let mut h = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut ap = a.clone();
            ap[j] += eps;
            let (_, gp) = reduced_grad(&ap);
            h.set_column(j, &((gp - &gr) / eps));
        }
        let sym = (&h + h.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let lmax = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let mut step = DVector::zeros(k);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            let l = l.abs().max(1e-10 * lmax);
            let v = eig.eigenvectors.column(i);
            step -= v * (v.dot(&gr) / l);
        }
        let slope = gr.dot(&step);
        if slope >= 0.0 {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &a + &step * t;
            let ft = level.value(&combine(x, &dirs, trial.as_slice()));
            if ft.is_finite() && ft <= fa + 1e-4 * t * slope {
                a = trial;
                fa = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if fa > f0 {
        a.fill(0.0);
    }
    let coeffs: Vec<f64> = a.iter().copied().collect();
    Ok(SubspaceStep {
        alpha: coeffs.iter().zip(&norms).map(|(c, n)| c / n).collect(),
        x: combine(x, &dirs, &coeffs),
    })
}

/// Golden-section minimisation of `t -> F(x + t d)` after bracketing on `t >= 0`.
pub fn golden_section_line(level: &ProblemLevel, x: &GridField, d: &GridField, tol: f64) -> (f64, GridField) {
    let phi = |t: f64| {
        let mut y = x.clone();
        y.axpy(t, d);
        let v = level.value(&y);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let f0 = phi(0.0);
    // bracket: grow until the objective rises, shrink if the first trial already rises
    let (mut a, mut b) = (0.0, 1.0);
    let mut fb = phi(b);
    if fb >= f0 {
        while fb >= f0 && b > 1e-12 {
            b *= 0.5;
            fb = phi(b);
        }
        b *= 2.0;
    } else {
        loop {
            let c = 2.0 * b;
            let fc = phi(c);
            if fc >= fb || c > 1e6 {
                a = 0.5 * b;
                b = c;
                break;
            }
            b = c;
            fb = fc;
        }
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    while b - a > tol * (1.0 + x2.abs()) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = phi(x2);
        }
    }
    let (t, ft) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let t = if ft < f0 { t } else { 0.0 };
    let mut y = x.clone();
    y.axpy(t, d);
    (t, y)
}

/// `P (x*_H - x_H)`.
pub fn coarse_correction_direction(hier: &Hierarchy, x_coarse: &GridField, coarse_solution: &GridField) -> Result<GridField> {
    hier.prolong(&coarse_solution.sub(x_coarse))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoarsestSolver {
    /// Banded Cholesky on quadratic levels.
    Direct,
    /// Limited-memory BFGS with an iteration cap.
    QuasiNewton { max_iter: usize },
}

/// How the fine correction is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// Subspace minimisation over CGC, gradient and history.
    #[default]
    Subspace,
    /// Classical multilevel optimisation: CGC with a line search only.
    CgcLineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SesopConfig {
    /// Number of history directions on the finest level.
    pub history: usize,
    pub use_cgc: bool,
    pub preconditioner: Preconditioner,
    pub fine_relax: Relaxer,
    pub coarse_relax: Relaxer,
    /// 1 for V-cycles, 2 for W-cycles.
    pub cycle_type: usize,
    pub coarsest: CoarsestSolver,
    /// Newton steps for nonquadratic subspace problems.
    pub newton_iters: usize,
    pub mode: StepMode,
}

impl SesopConfig {
    /// Two-grid linear setting: no relaxation, exact coarse solve.
    pub fn linear_two_grid(history: usize) -> Self {
        Self {
            history,
            use_cgc: true,
            preconditioner: Preconditioner::JacobiDiagonalInverse,
            fine_relax: Relaxer::none(),
            coarse_relax: Relaxer::jacobi(2, 1),
            cycle_type: 2,
            coarsest: CoarsestSolver::Direct,
            newton_iters: 1,
            mode: StepMode::Subspace,
        }
    }

    /// Multilevel nonlinear setting: one steepest-descent pre-sweep.
    pub fn nonlinear(history: usize) -> Self {
        Self {
            history,
            use_cgc: true,
            preconditioner: Preconditioner::Identity,
            fine_relax: Relaxer::steepest_descent(1, 0),
            coarse_relax: Relaxer::steepest_descent(1, 0),
            cycle_type: 1,
            coarsest: CoarsestSolver::QuasiNewton { max_iter: 10 },
            newton_iters: 20,
            mode: StepMode::Subspace,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.cycle_type) {
            return Err(Error::InvalidParameter(format!("cycle_type must be 1 or 2, got {}", self.cycle_type)));
        }
        if self.mode == StepMode::CgcLineSearch && !self.use_cgc {
            return Err(Error::InvalidParameter("line-search mode needs the coarse correction".into()));
        }
        Ok(())
    }
}

/// Solver state: the hierarchy, configuration, fine history and line-search memory.
#[derive(Debug)]
pub struct SesopSolver<'a> {
    hier: &'a Hierarchy,
    cfg: SesopConfig,
    history: VecDeque<GridField>,
    sd: Vec<SdState>,
}

impl<'a> SesopSolver<'a> {
    pub fn new(hier: &'a Hierarchy, cfg: SesopConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.use_cgc && hier.len() < 2 {
            return Err(Error::Hierarchy("coarse correction needs at least two levels".into()));
        }
        Ok(Self {
            hier,
            cfg,
            history: VecDeque::new(),
            sd: vec![SdState::new(); hier.len()],
        })
    }

    fn minimize(&self, level: &ProblemLevel, x: &GridField, basis: &SubspaceBasis) -> Result<GridField> {
        if level.is_quadratic() {
            Ok(subspace_minimize_quadratic(level, x, basis)?.x)
        } else {
            Ok(subspace_minimize_newton(level, x, basis, self.cfg.newton_iters)?.x)
        }
    }

    fn coarsest_solve(&self, sigma: &ProblemLevel, x: GridField) -> Result<GridField> {
        match (self.cfg.coarsest, sigma.linear_parts()) {
            (CoarsestSolver::Direct, Some((_, f))) => self.hier.coarsest_solve(f),
            (CoarsestSolver::Direct, None) => Err(Error::NotQuadratic),
            (CoarsestSolver::QuasiNewton { max_iter }, _) => Ok(lbfgs_minimize(sigma, x, 10, max_iter, 0.0)?.0),
        }
    }

    /// Coarse solution `x*` for the corrected problem of level `l + 1`.
    fn coarse_solution(&mut self, l: usize, x: &GridField, g: &GridField) -> Result<(GridField, GridField)> {
        let (xc, sigma) = self.hier.coarse_problem(l, x, g)?;
        let mut y = xc.clone();
        for _ in 0..self.cfg.cycle_type {
            y = self.cycle(l + 1, &sigma, y)?;
            if l + 2 >= self.hier.len() {
                // a solve on the coarsest level is not improved by repetition
                break;
            }
        }
        Ok((xc, y))
    }

    /// One recursive cycle on level `l >= 1` for the corrected functional `sigma`.
    fn cycle(&mut self, l: usize, sigma: &ProblemLevel, x: GridField) -> Result<GridField> {
        if l + 1 == self.hier.len() {
            return self.coarsest_solve(sigma, x);
        }
        let relax = self.cfg.coarse_relax;
        let mut sd = self.sd[l];
        let mut x = relax.sweeps(sigma, x, relax.v1, &mut sd)?;
        let g = sigma.gradient(&x);
        let (xc, ys) = self.coarse_solution(l, &x, &g)?;
        let d = coarse_correction_direction(self.hier, &xc, &ys)?;
        x = match self.cfg.mode {
            StepMode::Subspace => {
                let mut basis = SubspaceBasis::new();
                basis.push(d);
                basis.push(self.cfg.preconditioner.apply_to_gradient(sigma, &g));
                self.minimize(sigma, &x, &basis)?
            }
            StepMode::CgcLineSearch => self.line_search(sigma, &x, &d),
        };
        x = relax.sweeps(sigma, x, relax.v2, &mut sd)?;
        self.sd[l] = sd;
        Ok(x)
    }

    fn line_search(&self, level: &ProblemLevel, x: &GridField, d: &GridField) -> GridField {
        if let Some(hd) = level.hessian_apply(d) {
            let curv = d.dot(&hd);
            if curv > 0.0 {
                let t = -level.gradient(x).dot(d) / curv;
                let mut y = x.clone();
                y.axpy(t, d);
                return y;
            }
            return x.clone();
        }
        golden_section_line(level, x, d, 1e-6).1
    }

    /// `x + c1 (x - x_prev) + c2 D^-1 r + c3 d` with `d` the coarse correction.
    pub fn fixed_step(&mut self, x: &GridField, x_prev: &GridField, c: &FixedCoefficients) -> Result<GridField> {
        let fine = self.hier.fine();
        let (op, f) = fine.linear_parts().ok_or(Error::NotQuadratic)?;
        let mut r = apply_unchecked(op, x);
        r.scale(-1.0);
        r.axpy(1.0, f);
        let g = fine.gradient(x);
        let (xc, ys) = self.coarse_solution(0, x, &g)?;
        let d = coarse_correction_direction(self.hier, &xc, &ys)?;
        let mut out = x.clone();
        out.axpy(c.c1, &x.sub(x_prev));
        out.axpy(c.c2() / op.center(), &r);
        out.axpy(c.c3(), &d);
        Ok(out)
    }

    /// One fine-level iteration.
    pub fn step(&mut self, x: &GridField) -> Result<GridField> {
        let fine = self.hier.fine();
        let relax = self.cfg.fine_relax;
        let mut sd = self.sd[0];
        let mut y = relax.sweeps(fine, x.clone(), relax.v1, &mut sd)?;
        let g = fine.gradient(&y);
        let d = if self.cfg.use_cgc {
            let (xc, ys) = self.coarse_solution(0, &y, &g)?;
            Some(coarse_correction_direction(self.hier, &xc, &ys)?)
        } else {
            None
        };
        y = match (self.cfg.mode, d) {
            (StepMode::CgcLineSearch, Some(d)) => self.line_search(fine, &y, &d),
            (_, d) => {
                let mut basis = SubspaceBasis::new();
                if let Some(d) = d {
                    basis.push(d);
                }
                basis.push(self.cfg.preconditioner.apply_to_gradient(fine, &g));
                for h in &self.history {
                    basis.push(h.clone());
                }
                self.minimize(fine, &y, &basis)?
            }
        };
        y = relax.sweeps(fine, y, relax.v2, &mut sd)?;
        self.sd[0] = sd;
        if self.cfg.history > 0 {
            self.history.push_front(y.sub(x));
            self.history.truncate(self.cfg.history);
        }
        Ok(y)
    }
}

/// Runs SESOP from `x0` on the finest level of `hier`.
pub fn sesop_solve(
    hier: &Hierarchy,
    cfg: SesopConfig,
    x0: GridField,
    monitor: Monitor,
    stop: StopRule,
) -> Result<SolveOutcome> {
    let mut solver = SesopSolver::new(hier, cfg)?;
    run_iterations(hier.fine(), x0, monitor, stop, |x| solver.step(x))
}

/// One step of the fixed-stepsize two-grid iteration
/// `x + c1 (x - x_prev) + c2 D^-1 r + c3 P A_H^-1 R r`, `r = f - A x`.
pub fn fixed_step_iterate(
    hier: &Hierarchy,
    x: &GridField,
    x_prev: &GridField,
    c: &FixedCoefficients,
) -> Result<GridField> {
    if hier.len() != 2 {
        return Err(Error::Hierarchy("fixed-stepsize iteration needs exactly two levels".into()));
    }
    let (op, f) = hier.fine().linear_parts().ok_or(Error::NotQuadratic)?;
    let mut r = apply_unchecked(op, x);
    r.scale(-1.0);
    r.axpy(1.0, f);
    let e = hier.coarsest_solve(&hier.restrict(&r)?)?;
    let cgc = hier.prolong(&e)?;
    let mut out = x.clone();
    out.axpy(c.c1, &x.sub(x_prev));
    out.axpy(c.c2() / op.center(), &r);
    out.axpy(c.c3(), &cgc);
    Ok(out)
}

/// Fixed-stepsize iteration on any linear hierarchy. The coarse correction
/// comes from the recursive coarse solver configured by `cfg`, which is exact
/// on two levels.
pub fn fixed_step_solve(
    hier: &Hierarchy,
    cfg: SesopConfig,
    c: &FixedCoefficients,
    x0: GridField,
    stop: StopRule,
) -> Result<SolveOutcome> {
    let mut solver = SesopSolver::new(hier, cfg)?;
    let mut prev = x0.clone();
    run_iterations(hier.fine(), x0, Monitor::Residual, stop, |x| {
        let next = solver.fixed_step(x, &prev, c)?;
        prev = x.clone();
        Ok(next)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::assemble_dense;
    use crate::hierarchy::{build_hierarchy, CoarseMode};
    use crate::problems::ProblemSpec;
    use crate::transfer::TransferPair;
    use approx::assert_relative_eq;

    fn rand_field(n: usize, rng: &mut ChaCha8Rng) -> GridField {
        GridField::from_vec(n, (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap()
    }

    #[test]
    fn error_direction_gives_one_step_convergence() {
        let spec = ProblemSpec::Rotated { epsilon: 0.1, phi: 0.3 };
        let n = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = rand_field(n, &mut rng);
        let lv = ProblemLevel::quadratic(spec.level(n).linear_parts().unwrap().0.clone(), f.clone()).unwrap();
        let (op, _) = lv.linear_parts().unwrap();
        let a = assemble_dense(op, n).unwrap();
        let sol = a.lu().solve(&DVector::from_column_slice(f.as_slice())).unwrap();
        let xs = GridField::from_vec(n, sol.iter().copied().collect()).unwrap();
        let x = rand_field(n, &mut rng);
        let basis = SubspaceBasis::from_directions(vec![xs.sub(&x)]);
        let out = subspace_minimize_quadratic(&lv, &x, &basis).unwrap();
        assert_relative_eq!(out.alpha[0], 1.0, epsilon = 1e-10);
        assert!(lv.linear_residual_norm(&out.x).unwrap() < 1e-8);
    }

    #[test]
    fn gradient_only_is_exact_steepest_descent() {
        let lv = ProblemSpec::Rotated { epsilon: 1.0, phi: 0.0 }.level(7);
        let x = random_initial(7, 3);
        let g = lv.gradient(&x);
        let t = g.norm_sq() / g.dot(&lv.hessian_apply(&g).unwrap());
        let out = subspace_minimize_quadratic(&lv, &x, &SubspaceBasis::from_directions(vec![g.clone()])).unwrap();
        assert_relative_eq!(out.alpha[0], -t, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_subspace_matches_grid_search() {
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lv = ProblemLevel::quadratic(crate::problems::rotated_stencil(0.3, 0.4, 0.2), rand_field(n, &mut rng)).unwrap();
        let x = rand_field(n, &mut rng);
        let dirs: Vec<GridField> = (0..3).map(|_| rand_field(n, &mut rng)).collect();
        let out = subspace_minimize_quadratic(&lv, &x, &SubspaceBasis::from_directions(dirs.clone())).unwrap();
        let fstar = lv.value(&out.x);
        // coordinate-wise refinement on shrinking grids around the reported minimiser
        let mut best = out.alpha.clone();
        let mut fbest = fstar;
        let mut width = 1.0;
        for _ in 0..12 {
            let centre = best.clone();
            for i in -10..=10 {
                for j in -10..=10 {
                    for k in -10..=10 {
                        let c = [
                            centre[0] + width * i as f64 / 10.0,
                            centre[1] + width * j as f64 / 10.0,
                            centre[2] + width * k as f64 / 10.0,
                        ];
                        let v = lv.value(&combine(&x, &dirs, &c));
                        if v < fbest {
                            fbest = v;
                            best = c.to_vec();
                        }
                    }
                }
            }
            width *= 0.2;
        }
        // objective values resolve to round-off; coefficients only to its square root
        assert!((fstar - fbest).abs() <= 1e-8 * fbest.abs());
        for (a, b) in best.iter().zip(&out.alpha) {
            assert!((a - b).abs() < 1e-4 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn newton_agrees_with_exact_on_quadratics() {
        let lv = ProblemSpec::Rotated { epsilon: 1e-2, phi: 0.7 }.level(15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = rand_field(15, &mut rng);
        let basis = SubspaceBasis::from_directions((0..3).map(|_| rand_field(15, &mut rng)).collect());
        let e = subspace_minimize_quadratic(&lv, &x, &basis).unwrap();
        let nw = subspace_minimize_newton(&lv, &x, &basis, 1).unwrap();
        for (a, b) in e.alpha.iter().zip(&nw.alpha) {
            assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn newton_matches_golden_section_in_one_dimension() {
        let lv = ProblemSpec::PLaplacian { p: 1.6, xi: 1e-4 }.level(15);
        let x = random_initial(15, 4);
        let g = lv.gradient(&x).scaled(-1.0);
        let nw = subspace_minimize_newton(&lv, &x, &SubspaceBasis::from_directions(vec![g.clone()]), 20).unwrap();
        let (t, _) = golden_section_line(&lv, &x, &g, 1e-12);
        assert!((nw.alpha[0] - t).abs() < 1e-6 * (1.0 + t.abs()), "{} vs {t}", nw.alpha[0]);
    }

    #[test]
    fn stationary_point_is_kept() {
        let lv = ProblemSpec::Rotated { epsilon: 1.0, phi: 0.0 }.level(7);
        let z = GridField::zeros(7);
        let out = subspace_minimize_newton(&lv, &z, &SubspaceBasis::from_directions(vec![lv.gradient(&z)]), 3).unwrap();
        assert!(out.alpha.is_empty());
        assert_eq!(out.x, z);
    }

    #[test]
    fn cgc_matches_dense_galerkin_correction() {
        let spec = ProblemSpec::Rotated { epsilon: 1e-2, phi: 0.4 };
        let n = 15;
        let hier = build_hierarchy(&spec, n, 7, TransferPair::default(), CoarseMode::Galerkin).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_field(n, &mut rng);
        let fine = hier.fine();
        let g = fine.gradient(&x);
        let (xc, sigma) = hier.coarse_problem(0, &x, &g).unwrap();
        let ys = hier.coarsest_solve(sigma.linear_parts().unwrap().1).unwrap();
        let d = coarse_correction_direction(&hier, &xc, &ys).unwrap();
        let t = TransferPair::default();
        let a = assemble_dense(fine.linear_parts().unwrap().0, n).unwrap();
        let p = t.prolong_dense(7);
        let r = t.restrict_dense(7);
        let ac = &r * &a * &p;
        let res = -(&a * DVector::from_column_slice(x.as_slice()));
        let expect = &p * ac.lu().solve(&(&r * res)).unwrap();
        for (u, v) in d.as_slice().iter().zip(expect.iter()) {
            assert_relative_eq!(u, v, epsilon = 1e-9);
        }
        assert_eq!(
            coarse_correction_direction(&hier, &xc, &xc).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn fixed_step_error_recurrence_matches_dense_gamma() {
        use crate::analysis::{gamma_dense, DenseTwoGrid};
        let spec = ProblemSpec::Rotated { epsilon: 0.1, phi: 0.2 };
        let n = 15;
        let hier = build_hierarchy(&spec, n, 7, TransferPair::default(), CoarseMode::Rediscretize).unwrap();
        let (op, _) = hier.fine().linear_parts().unwrap();
        let a = assemble_dense(op, n).unwrap();
        let t = TransferPair::default();
        let ah = assemble_dense(hier.level(1).linear_parts().unwrap().0, 7).unwrap();
        let phi = DMatrix::identity(n * n, n * n) / op.center();
        let tg = DenseTwoGrid::new(a, phi, t.prolong_dense(7), Some(t.restrict_dense(7)), ah).unwrap();
        let c = FixedCoefficients::new(0.2, 0.9, 0.6).unwrap();
        let gamma = gamma_dense(&tg, &c).unwrap();
        // f = 0, so the iterate is its own error
        let x0 = random_initial(n, 1);
        let x1 = fixed_step_iterate(&hier, &x0, &x0, &c).unwrap();
        let x2 = fixed_step_iterate(&hier, &x1, &x0, &c).unwrap();
        let v = |g: &GridField| DVector::from_column_slice(g.as_slice());
        let expect = &gamma * v(&x1) - v(&x0) * c.c1;
        for (p, q) in x2.as_slice().iter().zip(expect.iter()) {
            assert_relative_eq!(p, q, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_level_fixed_solve_matches_free_iteration() {
        let spec = ProblemSpec::Rotated { epsilon: 0.1, phi: 0.7 };
        let hier = build_hierarchy(&spec, 15, 7, TransferPair::default(), CoarseMode::Rediscretize).unwrap();
        let c = FixedCoefficients::new(0.1, 1.2, 0.5).unwrap();
        let x0 = random_initial(15, 6);
        let out = fixed_step_solve(&hier, SesopConfig::linear_two_grid(1), &c, x0.clone(), StopRule::new(0.0, 2)).unwrap();
        let x1 = fixed_step_iterate(&hier, &x0, &x0, &c).unwrap();
        let x2 = fixed_step_iterate(&hier, &x1, &x0, &c).unwrap();
        for (p, q) in out.x.as_slice().iter().zip(x2.as_slice()) {
            assert_relative_eq!(p, q, epsilon = 1e-10);
        }
    }

    #[test]
    fn richardson_special_case() {
        let spec = ProblemSpec::Rotated { epsilon: 1.0, phi: 0.0 };
        let hier = build_hierarchy(&spec, 15, 7, TransferPair::default(), CoarseMode::Rediscretize).unwrap();
        let c = FixedCoefficients::new(0.0, 0.8, 1.0).unwrap();
        let x = random_initial(15, 2);
        let y = fixed_step_iterate(&hier, &x, &x, &c).unwrap();
        let (op, f) = hier.fine().linear_parts().unwrap();
        let expect = crate::relaxation::jacobi_sweep(op, &x, f, 0.8).unwrap();
        for (p, q) in y.as_slice().iter().zip(expect.as_slice()) {
            assert_relative_eq!(p, q, epsilon = 1e-10);
        }
    }
}
