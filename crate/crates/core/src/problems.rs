//! Benchmark problems and their per-level discrete functionals.
//!
//! Every functional is area weighted: a level with mesh size `h` carries the
//! quadrature weight `h^2`, so values on different levels approximate the same
//! continuous integral. The linear problem minimises
//! `h^2 (1/2 u'Au - f'u)` with `A` the SPD (negated) stencil including `1/h^2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_unchecked, GridField, StencilOp};

/// Rotated anisotropic diffusion `u_ss + eps u_tt`, sign flipped to be SPD.
pub fn rotated_stencil(epsilon: f64, phi: f64, h: f64) -> StencilOp {
    let (s, c) = phi.sin_cos();
    let (c2, s2, cs) = (c * c, s * s, c * s);
    let corner = 0.5 * (1.0 - epsilon) * cs;
    let ew = c2 + epsilon * s2;
    let ns = epsilon * c2 + s2;
    let center = 2.0 * (1.0 + epsilon);
    StencilOp::new(
        [
            [corner, -ns, -corner],
            [-ew, center, -ew],
            [-corner, -ns, corner],
        ],
        h,
    )
}

/// Manufactured solution `(x^2 - x^3) sin(3 pi y)` used by both nonlinear problems.
pub fn analytic_solution(x: f64, y: f64) -> f64 {
    (x * x - x * x * x) * (3.0 * PI * y).sin()
}

/// Source term of the exponential problem for the analytic solution.
pub fn exp_source(x: f64, y: f64, gamma: f64) -> f64 {
    let xx = x * x - x * x * x;
    let u = analytic_solution(x, y);
    ((9.0 * PI * PI + gamma * u.exp()) * xx + 6.0 * x - 2.0) * (3.0 * PI * y).sin()
}

/// Source of the regularised p-Laplacian Euler-Lagrange equation
/// `-p div((|grad u|^2 + xi^2)^((p-2)/2) grad u) = f` at the analytic solution.
pub fn plap_source(x: f64, y: f64, p: f64, xi: f64) -> f64 {
    let k = 3.0 * PI;
    let (sy, cy) = (k * y).sin_cos();
    let xx = x * x - x * x * x;
    let dx = 2.0 * x - 3.0 * x * x;
    let ddx = 2.0 - 6.0 * x;
    let (ux, uy) = (dx * sy, xx * k * cy);
    let (uxx, uyy, uxy) = (ddx * sy, -k * k * xx * sy, dx * k * cy);
    let g = ux * ux + uy * uy + xi * xi;
    let s = 0.5 * (p - 2.0);
    let quad = ux * ux * uxx + 2.0 * ux * uy * uxy + uy * uy * uyy;
    -p * (g.powf(s) * (uxx + uyy) + (p - 2.0) * g.powf(s - 1.0) * quad)
}

/// The continuous problem definitions; `level(n)` discretises on an `n x n` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// Linear anisotropic diffusion with zero right-hand side.
    Rotated { epsilon: f64, phi: f64 },
    /// `int 1/2 |grad u|^2 + gamma (u e^u - e^u) - f u`.
    Exp { gamma: f64 },
    /// `int (|grad u|^2 + xi^2)^(p/2) - f u`.
    PLaplacian { p: f64, xi: f64 },
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ProblemSpec::Rotated { epsilon, phi } => {
                if !(epsilon > 0.0 && epsilon.is_finite() && phi.is_finite()) {
                    return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
                }
            }
            ProblemSpec::Exp { gamma } => {
                if !(gamma >= 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
                }
            }
            ProblemSpec::PLaplacian { p, xi } => {
                if !(p > 1.0 && p <= 2.0) {
                    return Err(Error::InvalidParameter(format!("p must lie in (1, 2], got {p}")));
                }
                if !(xi > 0.0) {
                    return Err(Error::InvalidParameter(format!("xi must be positive, got {xi}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ProblemSpec::Rotated { .. })
    }

    pub fn has_analytic_solution(&self) -> bool {
        !self.is_linear()
    }

    pub fn level(&self, n: usize) -> ProblemLevel {
        let h = 1.0 / (n as f64 + 1.0);
        let kind = match *self {
            ProblemSpec::Rotated { epsilon, phi } => LevelKind::Quadratic {
                op: rotated_stencil(epsilon, phi, h),
                f: GridField::zeros(n),
            },
            ProblemSpec::Exp { gamma } => LevelKind::Exp {
                gamma,
                f: GridField::from_fn(n, |x, y| exp_source(x, y, gamma)),
            },
            ProblemSpec::PLaplacian { p, xi } => LevelKind::PLaplacian {
                p,
                xi,
                f: GridField::from_fn(n, |x, y| plap_source(x, y, p, xi)),
            },
        };
        ProblemLevel { kind, shift: None }
    }

    /// Discrete objective at the sampled analytic solution.
    pub fn reference_objective(&self, n: usize) -> Option<f64> {
        if !self.has_analytic_solution() {
            return None;
        }
        let u = GridField::from_fn(n, analytic_solution);
        Some(self.level(n).value(&u))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevelKind {
    Quadratic { op: StencilOp, f: GridField },
    Exp { gamma: f64, f: GridField },
    PLaplacian { p: f64, xi: f64, f: GridField },
}

/// One level's objective `F(u) - v'u`, where `v` is an optional linear shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemLevel {
    kind: LevelKind,
    shift: Option<GridField>,
}

impl ProblemLevel {
    pub fn quadratic(op: StencilOp, f: GridField) -> Result<Self> {
        let h = 1.0 / (f.n() as f64 + 1.0);
        if (op.h - h).abs() > 1e-12 * h {
            return Err(Error::MeshMismatch { op: op.h, field: h });
        }
        Ok(Self {
            kind: LevelKind::Quadratic { op, f },
            shift: None,
        })
    }

    pub fn kind(&self) -> &LevelKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.rhs().n()
    }

    pub fn h(&self) -> f64 {
        self.rhs().h()
    }

    fn rhs(&self) -> &GridField {
        match &self.kind {
            LevelKind::Quadratic { f, .. } | LevelKind::Exp { f, .. } | LevelKind::PLaplacian { f, .. } => f,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, LevelKind::Quadratic { .. })
    }

    /// Stencil and right-hand side of a quadratic level.
    pub fn linear_parts(&self) -> Option<(&StencilOp, &GridField)> {
        match &self.kind {
            LevelKind::Quadratic { op, f } => Some((op, f)),
            _ => None,
        }
    }

    /// Returns `self - v'u`. For quadratic levels the shift folds into the
    /// right-hand side, so the result stays quadratic.
    pub fn with_shift(&self, v: &GridField) -> Result<Self> {
        self.rhs().same_shape(v)?;
        let mut out = self.clone();
        match &mut out.kind {
            LevelKind::Quadratic { op, f } => {
                let w = 1.0 / (op.h * op.h);
                f.axpy(w, v);
            }
            _ => match &mut out.shift {
                Some(s) => s.axpy(1.0, v),
                None => out.shift = Some(v.clone()),
            },
        }
        Ok(out)
    }

    fn check(&self, u: &GridField) -> Result<()> {
        self.rhs().same_shape(u)
    }

    pub fn try_value(&self, u: &GridField) -> Result<f64> {
        self.check(u)?;
        Ok(self.value(u))
    }

    pub fn try_gradient(&self, u: &GridField) -> Result<GridField> {
        self.check(u)?;
        Ok(self.gradient(u))
    }

    /// Objective value. Panics on size mismatch; see [`try_value`](Self::try_value).
    pub fn value(&self, u: &GridField) -> f64 {
        assert_eq!(u.n(), self.n(), "field size does not match level");
        let base = match &self.kind {
            LevelKind::Quadratic { op, f } => {
                let au = apply_unchecked(op, u);
                let h2 = op.h * op.h;
                h2 * (0.5 * u.dot(&au) - f.dot(u))
            }
            LevelKind::Exp { gamma, f } => exp_objective(*gamma, f, u),
            LevelKind::PLaplacian { p, xi, f } => plap_objective(*p, *xi, f, u),
        };
        match &self.shift {
            Some(v) => base - v.dot(u),
            None => base,
        }
    }

    pub fn gradient(&self, u: &GridField) -> GridField {
        assert_eq!(u.n(), self.n(), "field size does not match level");
        let mut g = match &self.kind {
            LevelKind::Quadratic { op, f } => {
                let mut g = apply_unchecked(op, u);
                g.axpy(-1.0, f);
                g.scale(op.h * op.h);
                g
            }
            LevelKind::Exp { gamma, f } => exp_gradient(*gamma, f, u),
            LevelKind::PLaplacian { p, xi, f } => plap_gradient(*p, *xi, f, u),
        };
        if let Some(v) = &self.shift {
            g.axpy(-1.0, v);
        }
        g
    }

    /// Residual norm `||f - Au||` with the `1/h^2` operator.
    pub fn linear_residual_norm(&self, u: &GridField) -> Option<f64> {
        let (op, f) = self.linear_parts()?;
        let au = apply_unchecked(op, u);
        Some(f.sub(&au).norm_sq().sqrt())
    }

    /// Hessian-vector product for quadratic levels.
    pub fn hessian_apply(&self, d: &GridField) -> Option<GridField> {
        let (op, _) = self.linear_parts()?;
        Some(apply_unchecked(op, d).scaled(op.h * op.h))
    }

    /// Diagonal of the Hessian of the smooth part at `u`, used for Jacobi scaling.
    pub fn hessian_diagonal_scale(&self) -> f64 {
        match &self.kind {
            LevelKind::Quadratic { op, .. } => op.center() * op.h * op.h,
            _ => 4.0,
        }
    }
}

fn exp_objective(gamma: f64, f: &GridField, u: &GridField) -> f64 {
    let n = u.n() as isize;
    let h = u.h();
    let h2 = h * h;
    let mut dirichlet = 0.0;
    let mut bulk = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = u.at(i, j);
            // each interior point owns the edges to its east and north neighbours
            let e = u.at(i, j + 1) - c;
            let no = u.at(i + 1, j) - c;
            dirichlet += e * e + no * no;
            let idx = (i * n + j) as usize;
            bulk += gamma * (c * c.exp() - c.exp()) - f.as_slice()[idx] * c;
        }
        // edges from the west boundary into row i and from the south boundary into column i
        let w = u.at(i, 0);
        let s = u.at(0, i);
        dirichlet += w * w + s * s;
    }
    let nn = (n * n) as f64;
    let boundary = -gamma * (1.0 - nn * h2);
    0.5 * dirichlet + h2 * bulk + boundary
}

fn exp_gradient(gamma: f64, f: &GridField, u: &GridField) -> GridField {
    let lap = StencilOp::laplacian(u.h());
    let mut g = apply_unchecked(&lap, u);
    for ((gv, &uv), &fv) in g.as_mut_slice().iter_mut().zip(u.as_slice()).zip(f.as_slice()) {
        *gv += gamma * uv * uv.exp() - fv;
    }
    let h = u.h();
    g.scale(h * h);
    g
}

fn plap_objective(p: f64, xi: f64, f: &GridField, u: &GridField) -> f64 {
    let n = u.n() as isize;
    let h = u.h();
    let xi2 = xi * xi;
    let mut energy = 0.0;
    for i in -1..n {
        for j in -1..n {
            let c = u.at(i, j);
            let ux = (u.at(i, j + 1) - c) / h;
            let uy = (u.at(i + 1, j) - c) / h;
            energy += (ux * ux + uy * uy + xi2).powf(0.5 * p);
        }
    }
    h * h * (energy - f.dot(u))
}

fn plap_gradient(p: f64, xi: f64, f: &GridField, u: &GridField) -> GridField {
    let n = u.n() as isize;
    let h = u.h();
    let xi2 = xi * xi;
    let mut g = GridField::zeros(u.n());
    let nu = u.n();
    let add = |i: isize, j: isize, v: f64, g: &mut GridField| {
        if i >= 0 && j >= 0 && i < n && j < n {
            let idx = i as usize * nu + j as usize;
            g.as_mut_slice()[idx] += v;
        }
    };
    for i in -1..n {
        for j in -1..n {
            let c = u.at(i, j);
            let ux = (u.at(i, j + 1) - c) / h;
            let uy = (u.at(i + 1, j) - c) / h;
            let w = p * (ux * ux + uy * uy + xi2).powf(0.5 * p - 1.0);
            // d/du of h^2 * energy: the 1/h of the difference leaves a factor h
            let (gx, gy) = (h * w * ux, h * w * uy);
            add(i, j + 1, gx, &mut g);
            add(i + 1, j, gy, &mut g);
            add(i, j, -(gx + gy), &mut g);
        }
    }
    g.axpy(-h * h, f);
    g
}
