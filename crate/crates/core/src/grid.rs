//! Uniform-grid fields on the unit square and constant-coefficient 3x3 stencils.
//!
//! Storage is row-major over interior points: entry `(i, j)` lives at
//! `i * n + j`, where `i` indexes `y` and `j` indexes `x`. The grid point
//! `(i, j)` sits at `x = (j + 1) h`, `y = (i + 1) h` with `h = 1 / (n + 1)`.
//! Points outside the interior belong to the homogeneous Dirichlet boundary
//! and read as zero.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default cap on the number of unknowns for dense assembly.
pub const DENSE_GUARD: usize = 4096;

const MESH_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n: usize,
    h: f64,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "grid needs at least one interior point");
        Self {
            n,
            h: 1.0 / (n as f64 + 1.0),
            values: vec![0.0; n * n],
        }
    }

    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Ok(Self {
            n,
            h: 1.0 / (n as f64 + 1.0),
            values,
        })
    }

    /// Samples `f(x, y)` at the interior points.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = Self::zeros(n);
        let h = g.h;
        for i in 0..n {
            for j in 0..n {
                g.values[i * n + j] = f((j + 1) as f64 * h, (i + 1) as f64 * h);
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    /// Reads `(i, j)` with the zero Dirichlet halo.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let n = self.n as isize;
        if i < 0 || j < 0 || i >= n || j >= n {
            0.0
        } else {
            self.values[(i * n + j) as usize]
        }
    }

    pub fn same_shape(&self, other: &GridField) -> Result<()> {
        if self.n != other.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &GridField) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &GridField) {
        debug_assert_eq!(self.n, x.n);
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> GridField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn add(&self, other: &GridField) -> GridField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &GridField) -> GridField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            n: self.n,
            h: self.h,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Frobenius norm of a residual grid.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ResidualNorm(f64);

impl ResidualNorm {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn norm_fro(g: &GridField) -> ResidualNorm {
    ResidualNorm(g.norm_sq().sqrt())
}

/// A 3x3 constant-coefficient stencil `scale * weights`.
///
/// `weights[r][c]` multiplies the neighbour at offset `dy = 1 - r`,
/// `dx = c - 1`, so the array reads like the usual stencil display with
/// north on top. The `1/h^2` factor is kept in `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilOp {
    pub weights: [[f64; 3]; 3],
    pub scale: f64,
    pub h: f64,
}

impl StencilOp {
    pub fn new(weights: [[f64; 3]; 3], h: f64) -> Self {
        Self {
            weights,
            scale: 1.0 / (h * h),
            h,
        }
    }

    /// Standard 5-point negative Laplacian (SPD sign).
    pub fn laplacian(h: f64) -> Self {
        Self::new([[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]], h)
    }

    pub fn center(&self) -> f64 {
        self.scale * self.weights[1][1]
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().flatten().sum::<f64>() * self.scale
    }

    /// Weight at offset `(dy, dx)` including the scale.
    pub fn weight(&self, dy: isize, dx: isize) -> f64 {
        self.scale * self.weights[(1 - dy) as usize][(dx + 1) as usize]
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            weights: self.weights,
            scale: self.scale * a,
            h: self.h,
        }
    }

    /// True when the stencil is invariant under 180 degree rotation.
    pub fn is_point_symmetric(&self, tol: f64) -> bool {
        (0..3).all(|r| (0..3).all(|c| (self.weights[r][c] - self.weights[2 - r][2 - c]).abs() <= tol))
    }

    fn check_mesh(&self, u: &GridField) -> Result<()> {
        if (self.h - u.h).abs() > MESH_RTOL * self.h.max(u.h) {
            return Err(Error::MeshMismatch {
                op: self.h,
                field: u.h,
            });
        }
        Ok(())
    }
}

/// 9-point convolution with zero halo.
pub fn apply_stencil(op: &StencilOp, u: &GridField) -> Result<GridField> {
    op.check_mesh(u)?;
    Ok(apply_unchecked(op, u))
}

pub(crate) fn apply_unchecked(op: &StencilOp, u: &GridField) -> GridField {
    let n = u.n as isize;
    let mut taps = Vec::with_capacity(9);
    for dy in -1..=1isize {
        for dx in -1..=1isize {
            let w = op.weight(dy, dx);
            if w != 0.0 {
                taps.push((dy, dx, w));
            }
        }
    }
    let mut out = GridField::zeros(u.n);
    for i in 0..n {
        let interior_row = i > 0 && i < n - 1;
        for j in 0..n {
            let mut acc = 0.0;
            if interior_row && j > 0 && j < n - 1 {
                for &(dy, dx, w) in &taps {
                    acc += w * u.values[((i + dy) * n + j + dx) as usize];
                }
            } else {
                for &(dy, dx, w) in &taps {
                    acc += w * u.at(i + dy, j + dx);
                }
            }
            out.values[(i * n + j) as usize] = acc;
        }
    }
    out
}

/// `f - op(u)`
pub fn residual(op: &StencilOp, u: &GridField, f: &GridField) -> Result<GridField> {
    u.same_shape(f)?;
    let mut r = apply_stencil(op, u)?;
    for (rv, fv) in r.values.iter_mut().zip(&f.values) {
        *rv = fv - *rv;
    }
    Ok(r)
}

/// The `n^2 x n^2` matrix of `op` under row-major flattening.
pub fn assemble_dense(op: &StencilOp, n: usize) -> Result<DMatrix<f64>> {
    assemble_dense_guarded(op, n, DENSE_GUARD)
}

pub fn assemble_dense_guarded(op: &StencilOp, n: usize, limit: usize) -> Result<DMatrix<f64>> {
    let size = n * n;
    if size > limit {
        return Err(Error::GuardExceeded {
            unknowns: size,
            limit,
        });
    }
    let mut a = DMatrix::zeros(size, size);
    let ni = n as isize;
    for i in 0..ni {
        for j in 0..ni {
            let row = (i * ni + j) as usize;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (ii, jj) = (i + dy, j + dx);
                    if ii < 0 || jj < 0 || ii >= ni || jj >= ni {
                        continue;
                    }
                    a[(row, (ii * ni + jj) as usize)] += op.weight(dy, dx);
                }
            }
        }
    }
    Ok(a)
}
