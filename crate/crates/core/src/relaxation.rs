//! Smoothers and preconditioners.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_stencil, apply_unchecked, GridField, StencilOp};
use crate::lfa::high_frequency_range;
use crate::problems::{LevelKind, ProblemLevel};

/// Frequency sampling used to pick the Jacobi damping.
pub const OMEGA_SAMPLES: usize = 64;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

/// `u + omega D^-1 (f - A u)`.
pub fn jacobi_sweep(op: &StencilOp, u: &GridField, f: &GridField, omega: f64) -> Result<GridField> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::InvalidParameter(format!("omega must lie in (0, 1], got {omega}")));
    }
    let d = op.center();
    if d == 0.0 {
        return Err(Error::ZeroDiagonal);
    }
    u.same_shape(f)?;
    let au = apply_stencil(op, u)?;
    let mut out = u.clone();
    for ((o, a), fv) in out.as_mut_slice().iter_mut().zip(au.as_slice()).zip(f.as_slice()) {
        *o += omega * (fv - a) / d;
    }
    Ok(out)
}

/// The damping minimising the sampled high-frequency smoothing factor,
/// `2 / (s_min + s_max)` with `s = symbol / centre` over high frequencies.
pub fn optimal_jacobi_omega(op: &StencilOp) -> Result<f64> {
    if op.center() == 0.0 {
        return Err(Error::ZeroDiagonal);
    }
    let (lo, hi) = high_frequency_range(op, OMEGA_SAMPLES)?;
    Ok((2.0 / (lo + hi)).min(1.0))
}

/// Smoothing factor `max |1 - omega s|` over the sampled high frequencies.
pub fn jacobi_smoothing_factor(op: &StencilOp, omega: f64) -> Result<f64> {
    let (lo, hi) = high_frequency_range(op, OMEGA_SAMPLES)?;
    Ok((1.0 - omega * lo).abs().max((1.0 - omega * hi).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelaxKind {
    /// Damped Jacobi; `omega = None` selects the optimal damping.
    DampedJacobi { omega: Option<f64> },
    #[default]
    SteepestDescent,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relaxer {
    pub kind: RelaxKind,
    pub v1: usize,
    pub v2: usize,
}

impl Relaxer {
    pub fn none() -> Self {
        Self {
            kind: RelaxKind::None,
            v1: 0,
            v2: 0,
        }
    }

    pub fn jacobi(v1: usize, v2: usize) -> Self {
        Self {
            kind: RelaxKind::DampedJacobi { omega: None },
            v1,
            v2,
        }
    }

    pub fn steepest_descent(v1: usize, v2: usize) -> Self {
        Self {
            kind: RelaxKind::SteepestDescent,
            v1,
            v2,
        }
    }

    /// Applies `sweeps` relaxation steps on `level`.
    pub fn sweeps(&self, level: &ProblemLevel, u: GridField, sweeps: usize, state: &mut SdState) -> Result<GridField> {
        let mut u = u;
        match self.kind {
            RelaxKind::None => {}
            RelaxKind::DampedJacobi { omega } => {
                let (op, f) = level.linear_parts().ok_or(Error::NotQuadratic)?;
                let w = match omega {
                    Some(w) => w,
                    None => optimal_jacobi_omega(op)?,
                };
                for _ in 0..sweeps {
                    u = jacobi_sweep(op, &u, f, w)?;
                }
            }
            RelaxKind::SteepestDescent => {
                for _ in 0..sweeps {
                    match sd_sweep(level, &u, state) {
                        Ok(v) => u = v,
                        // no representable decrease: the smoother leaves u alone
                        Err(Error::LineSearchFailure { .. }) => break,
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        Ok(u)
    }
}

/// Step memory for backtracking steepest descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdState {
    pub step: Option<f64>,
}

impl SdState {
    pub fn new() -> Self {
        Self { step: None }
    }
}

impl Default for SdState {
    fn default() -> Self {
        Self::new()
    }
}

/// One steepest-descent step. Quadratic levels use the exact step
/// `g'g / g'Hg`; otherwise Armijo backtracking by halving, starting from the
/// same ratio with `g'Hg` replaced by a gradient difference along `g`. When
/// that curvature is not positive the start is twice the last accepted step.
pub fn sd_sweep(level: &ProblemLevel, u: &GridField, state: &mut SdState) -> Result<GridField> {
    let g = level.try_gradient(u)?;
    let gg = g.norm_sq();
    if gg == 0.0 {
        return Ok(u.clone());
    }
    if let Some(hg) = level.hessian_apply(&g) {
        let curv = g.dot(&hg);
        if curv <= 0.0 {
            return Err(Error::Breakdown(curv));
        }
        let mut out = u.clone();
        out.axpy(-gg / curv, &g);
        return Ok(out);
    }
    let f0 = level.value(u);
    let eps = 1e-7 * (1.0 + u.max_abs()) / gg.sqrt();
    let mut probe = u.clone();
    probe.axpy(eps, &g);
    let curv = g.dot(&level.gradient(&probe).sub(&g)) / eps;
    let mut t = if curv > 0.0 && curv.is_finite() {
        gg / curv
    } else {
        match state.step {
            Some(s) => 2.0 * s,
            None => 1.0 / level.hessian_diagonal_scale(),
        }
    };
    for _ in 0..=MAX_HALVINGS {
        let mut trial = u.clone();
        trial.axpy(-t, &g);
        let ft = level.value(&trial);
        if ft.is_finite() && ft <= f0 - ARMIJO_C * t * gg {
            state.step = Some(t);
            return Ok(trial);
        }
        t *= 0.5;
    }
    Err(Error::LineSearchFailure { halvings: MAX_HALVINGS })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    #[default]
    Identity,
    JacobiDiagonalInverse,
    SymmetricGaussSeidel,
}

/// `Phi g` for the stencil `op`.
pub fn apply_preconditioner(kind: Preconditioner, op: &StencilOp, g: &GridField) -> GridField {
    match kind {
        Preconditioner::Identity => g.clone(),
        Preconditioner::JacobiDiagonalInverse => g.scaled(1.0 / op.center()),
        Preconditioner::SymmetricGaussSeidel => symmetric_gauss_seidel(op, g),
    }
}

/// `(D + U)^-1 D (D + L)^-1 g` in row-major ordering.
fn symmetric_gauss_seidel(op: &StencilOp, g: &GridField) -> GridField {
    let n = g.n() as isize;
    let d = op.center();
    // lower neighbours precede (i, j) in row-major order
    let lower: Vec<(isize, isize, f64)> = [(-1, -1), (-1, 0), (-1, 1), (0, -1)]
        .iter()
        .map(|&(dy, dx)| (dy, dx, op.weight(dy, dx)))
        .filter(|t| t.2 != 0.0)
        .collect();
    let upper: Vec<(isize, isize, f64)> = [(1, 1), (1, 0), (1, -1), (0, 1)]
        .iter()
        .map(|&(dy, dx)| (dy, dx, op.weight(dy, dx)))
        .filter(|t| t.2 != 0.0)
        .collect();
    let mut y = GridField::zeros(g.n());
    for i in 0..n {
        for j in 0..n {
            let mut acc = g.at(i, j);
            for &(dy, dx, w) in &lower {
                acc -= w * y.at(i + dy, j + dx);
            }
            y.set(i as usize, j as usize, acc / d);
        }
    }
    let z = y.scaled(d);
    let mut x = GridField::zeros(g.n());
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut acc = z.at(i, j);
            for &(dy, dx, w) in &upper {
                acc -= w * x.at(i + dy, j + dx);
            }
            x.set(i as usize, j as usize, acc / d);
        }
    }
    x
}

impl Preconditioner {
    /// `Phi` applied to a level gradient. The scaling uses the Hessian of
    /// the level: the area-weighted stencil for quadratic levels and the
    /// area-weighted Laplacian otherwise.
    pub fn apply_to_gradient(&self, level: &ProblemLevel, g: &GridField) -> GridField {
        let hess = match level.kind() {
            LevelKind::Quadratic { op, .. } => op.scaled(op.h * op.h),
            _ => {
                let lap = StencilOp::laplacian(level.h());
                lap.scaled(level.h() * level.h())
            }
        };
        apply_preconditioner(*self, &hess, g)
    }
}

/// Dense action of the damped Jacobi error propagator, for oracles.
pub fn jacobi_error_propagator(op: &StencilOp, e: &GridField, omega: f64) -> GridField {
    let mut out = apply_unchecked(op, e);
    out.scale(-omega / op.center());
    out.axpy(1.0, e);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::assemble_dense;
    use crate::problems::{rotated_stencil, ProblemSpec};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rand_field(n: usize, rng: &mut ChaCha8Rng) -> GridField {
        GridField::from_vec(n, (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap()
    }

    #[test]
    fn laplacian_optimal_omega() {
        let op = StencilOp::laplacian(1.0 / 64.0);
        let w = optimal_jacobi_omega(&op).unwrap();
        assert_relative_eq!(w, 0.8, epsilon = 1e-12);
        assert_relative_eq!(jacobi_smoothing_factor(&op, w).unwrap(), 0.6, epsilon = 1e-12);
        assert_relative_eq!(optimal_jacobi_omega(&StencilOp::laplacian(0.3)).unwrap(), w, epsilon = 1e-12);
        let iso = rotated_stencil(1.0, 0.7, 1.0 / 64.0);
        assert_relative_eq!(optimal_jacobi_omega(&iso).unwrap(), w, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_fixed_point_and_dense_oracle() {
        let n = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let op = rotated_stencil(0.1, PI / 5.0, 1.0 / 8.0);
        let u = rand_field(n, &mut rng);
        let f = rand_field(n, &mut rng);
        let a = assemble_dense(&op, n).unwrap();
        let omega = 0.7;
        let out = jacobi_sweep(&op, &u, &f, omega).unwrap();
        let uv = DVector::from_column_slice(u.as_slice());
        let fv = DVector::from_column_slice(f.as_slice());
        let d = op.center();
        let expect = &uv - (&a * &uv) * (omega / d) + &fv * (omega / d);
        for (x, y) in out.as_slice().iter().zip(expect.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-9);
        }
        // exact solution is a fixed point
        let sol = a.clone().lu().solve(&fv).unwrap();
        let us = GridField::from_vec(n, sol.iter().copied().collect()).unwrap();
        let again = jacobi_sweep(&op, &us, &f, omega).unwrap();
        for (x, y) in again.as_slice().iter().zip(us.as_slice()) {
            assert_relative_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn jacobi_propagator_contracts() {
        for &(eps, phi) in &[(1.0, 0.0), (1e-1, PI / 100.0), (1e-2, PI / 5.0), (1e-3, PI / 4.0)] {
            let n = 15;
            let op = rotated_stencil(eps, phi, 1.0 / 16.0);
            let w = optimal_jacobi_omega(&op).unwrap();
            let a = assemble_dense(&op, n).unwrap();
            let m = DMatrix::identity(n * n, n * n) - &a * (w / op.center());
            let rho = m.symmetric_eigen().eigenvalues.amax();
            assert!(rho < 1.0, "{eps} {phi}: {rho}");
        }
    }

    #[test]
    fn preconditioners() {
        let n = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1.0 / 8.0;
        let op = StencilOp::laplacian(h);
        let g = rand_field(n, &mut rng);
        assert_eq!(apply_preconditioner(Preconditioner::Identity, &op, &g), g);
        let j = apply_preconditioner(Preconditioner::JacobiDiagonalInverse, &op, &g);
        for (x, y) in j.as_slice().iter().zip(g.as_slice()) {
            assert_relative_eq!(*x, y * h * h / 4.0, epsilon = 1e-15);
        }
        // dense SGS: (D + U)^-1 D (D + L)^-1
        let rot = rotated_stencil(1e-2, PI / 6.0, h);
        let a = assemble_dense(&rot, n).unwrap();
        let nn = n * n;
        let dl = DMatrix::from_fn(nn, nn, |r, c| if c <= r { a[(r, c)] } else { 0.0 });
        let du = DMatrix::from_fn(nn, nn, |r, c| if c >= r { a[(r, c)] } else { 0.0 });
        let dd = DMatrix::from_diagonal(&a.diagonal());
        let phi = du.clone().try_inverse().unwrap() * &dd * dl.clone().try_inverse().unwrap();
        let gv = DVector::from_column_slice(g.as_slice());
        let expect = &phi * gv;
        let got = apply_preconditioner(Preconditioner::SymmetricGaussSeidel, &rot, &g);
        for (x, y) in got.as_slice().iter().zip(expect.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
        let sym = (&phi + phi.transpose()) * 0.5;
        assert!((&phi - &sym).amax() < 1e-12);
        assert!(sym.symmetric_eigen().eigenvalues.min() > 0.0);
    }

    #[test]
    fn sd_on_quadratic_and_nonlinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lin = ProblemSpec::Rotated { epsilon: 0.1, phi: 0.3 }.level(15);
        let u = rand_field(15, &mut rng);
        let mut st = SdState::new();
        let v = sd_sweep(&lin, &u, &mut st).unwrap();
        assert!(lin.value(&v) < lin.value(&u));
        for spec in [ProblemSpec::PLaplacian { p: 1.3, xi: 1e-4 }, ProblemSpec::Exp { gamma: 10.0 }] {
            let lv = spec.level(15);
            let mut st = SdState::new();
            let mut x = rand_field(15, &mut rng);
            let mut f = lv.value(&x);
            for _ in 0..10 {
                x = sd_sweep(&lv, &x, &mut st).unwrap();
                let fx = lv.value(&x);
                assert!(fx < f);
                f = fx;
            }
        }
    }

    #[test]
    fn sd_at_stationary_point_is_identity() {
        let lin = ProblemSpec::Rotated { epsilon: 1.0, phi: 0.0 }.level(7);
        let z = GridField::zeros(7);
        assert_eq!(sd_sweep(&lin, &z, &mut SdState::new()).unwrap(), z);
    }
}
