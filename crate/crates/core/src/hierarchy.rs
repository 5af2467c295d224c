//! The multilevel ladder, finest level first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_unchecked, GridField, StencilOp};
use crate::problems::{ProblemLevel, ProblemSpec};
use crate::transfer::{coarse_size, ProlongKind, TransferPair};

/// How coarse operators are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoarseMode {
    /// Discretise the continuous problem again on the coarse mesh.
    #[default]
    Rediscretize,
    /// `R A P` with full weighting and bilinear prolongation.
    Galerkin,
}

/// Sizes `fine_n, (fine_n - 1)/2, ...` down to `coarsest_n`.
pub fn ladder(fine_n: usize, coarsest_n: usize) -> Result<Vec<usize>> {
    let mut sizes = vec![fine_n];
    let mut n = fine_n;
    while n > coarsest_n {
        n = coarse_size(n).map_err(|_| {
            Error::Hierarchy(format!("{fine_n} does not coarsen by factor 2 down to {coarsest_n}"))
        })?;
        sizes.push(n);
    }
    if n != coarsest_n || sizes.len() < 2 {
        return Err(Error::Hierarchy(format!(
            "{fine_n} -> {coarsest_n} is not a factor-2 ladder with at least two levels"
        )));
    }
    Ok(sizes)
}

/// The 3x3 Galerkin stencil `R A P` for full weighting and bilinear prolongation.
pub fn galerkin_stencil(op: &StencilOp) -> StencilOp {
    let t = TransferPair::default();
    let nc = 5;
    let mut e = GridField::zeros(nc);
    e.set(2, 2, 1.0);
    let fine = t.prolong(&e).expect("compatible sizes");
    let fine_op = StencilOp::new(op.weights, fine.h());
    let ae = apply_unchecked(&fine_op, &fine);
    let c = t.restrict(&ae).expect("compatible sizes");
    let hc = c.h();
    let mut w = [[0.0; 3]; 3];
    // column (2, 2) of the coarse matrix holds weight(dy, dx) at row (2 - dy, 2 - dx)
    for (r, row) in w.iter_mut().enumerate() {
        for (col, v) in row.iter_mut().enumerate() {
            *v = c.get(1 + r, 3 - col) * hc * hc;
        }
    }
    StencilOp::new(w, 2.0 * op.h)
}

/// Banded Cholesky factor of an SPD stencil matrix (bandwidth `n + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCholesky {
    size: usize,
    band: usize,
    /// `l[i * (band + 1) + k]` holds `L[i][i - k]`.
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn from_stencil(op: &StencilOp, n: usize) -> Result<Self> {
        let size = n * n;
        let band = n + 1;
        let w = band + 1;
        let mut l = vec![0.0; size * w];
        let ni = n as isize;
        for i in 0..ni {
            for j in 0..ni {
                let row = (i * ni + j) as usize;
                for dy in -1..=0isize {
                    for dx in -1..=1isize {
                        if dy == 0 && dx > 0 {
                            continue;
                        }
                        let (ii, jj) = (i + dy, j + dx);
                        if ii < 0 || jj < 0 || jj >= ni {
                            continue;
                        }
                        let col = (ii * ni + jj) as usize;
                        l[row * w + (row - col)] = op.weight(dy, dx);
                    }
                }
            }
        }
        for i in 0..size {
            let jlo = i.saturating_sub(band);
            for j in jlo..=i {
                let mut s = l[i * w + (i - j)];
                let klo = jlo.max(j.saturating_sub(band));
                for k in klo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::Singular);
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(Self { size, band, l })
    }

    pub fn solve(&self, rhs: &GridField) -> Result<GridField> {
        if rhs.len() != self.size {
            return Err(Error::SizeMismatch {
                expected: self.size,
                got: rhs.len(),
            });
        }
        let w = self.band + 1;
        let mut y = rhs.as_slice().to_vec();
        for i in 0..self.size {
            let mut s = y[i];
            for k in i.saturating_sub(self.band)..i {
                s -= self.l[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        for i in (0..self.size).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + 1 + self.band).min(self.size) {
                s -= self.l[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        GridField::from_vec(rhs.n(), y)
    }
}

/// Levels, transfers and the cached coarsest factorisation.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    spec: ProblemSpec,
    levels: Vec<ProblemLevel>,
    transfer: TransferPair,
    mode: CoarseMode,
    coarsest: Option<BandedCholesky>,
}

pub fn build_linear_hierarchy(
    spec: &ProblemSpec,
    fine_n: usize,
    coarsest_n: usize,
    transfer: TransferPair,
    mode: CoarseMode,
) -> Result<Hierarchy> {
    if !spec.is_linear() {
        return Err(Error::Hierarchy("linear hierarchy needs a linear problem".into()));
    }
    spec.validate()?;
    if mode == CoarseMode::Galerkin && transfer.prolong_kind != ProlongKind::Bilinear {
        return Err(Error::Hierarchy("Galerkin coarsening is implemented for bilinear prolongation".into()));
    }
    let sizes = ladder(fine_n, coarsest_n)?;
    let mut levels = vec![spec.level(fine_n)];
    for &n in &sizes[1..] {
        let lv = match mode {
            CoarseMode::Rediscretize => spec.level(n),
            CoarseMode::Galerkin => {
                let (prev, _) = levels.last().and_then(|l: &ProblemLevel| l.linear_parts()).expect("quadratic level");
                ProblemLevel::quadratic(galerkin_stencil(prev), GridField::zeros(n))?
            }
        };
        levels.push(lv);
    }
    let (op, _) = levels.last().and_then(|l| l.linear_parts()).expect("quadratic level");
    let chol = BandedCholesky::from_stencil(op, coarsest_n)?;
    Ok(Hierarchy {
        spec: spec.clone(),
        levels,
        transfer,
        mode,
        coarsest: Some(chol),
    })
}

pub fn build_nonlinear_hierarchy(
    spec: &ProblemSpec,
    fine_n: usize,
    coarsest_n: usize,
    transfer: TransferPair,
) -> Result<Hierarchy> {
    if spec.is_linear() {
        return Err(Error::Hierarchy("nonlinear hierarchy needs a nonlinear problem".into()));
    }
    spec.validate()?;
    let sizes = ladder(fine_n, coarsest_n)?;
    Ok(Hierarchy {
        spec: spec.clone(),
        levels: sizes.iter().map(|&n| spec.level(n)).collect(),
        transfer,
        mode: CoarseMode::Rediscretize,
        coarsest: None,
    })
}

/// Dispatches on the problem kind.
pub fn build_hierarchy(
    spec: &ProblemSpec,
    fine_n: usize,
    coarsest_n: usize,
    transfer: TransferPair,
    mode: CoarseMode,
) -> Result<Hierarchy> {
    if spec.is_linear() {
        build_linear_hierarchy(spec, fine_n, coarsest_n, transfer, mode)
    } else {
        build_nonlinear_hierarchy(spec, fine_n, coarsest_n, transfer)
    }
}

impl Hierarchy {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, l: usize) -> &ProblemLevel {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[ProblemLevel] {
        &self.levels
    }

    pub fn fine(&self) -> &ProblemLevel {
        &self.levels[0]
    }

    pub fn transfer(&self) -> &TransferPair {
        &self.transfer
    }

    pub fn coarse_mode(&self) -> CoarseMode {
        self.mode
    }

    /// Replaces the finest right-hand side of a linear hierarchy.
    pub fn with_fine_rhs(mut self, f: GridField) -> Result<Self> {
        let (op, _) = self.levels[0].linear_parts().ok_or(Error::NotQuadratic)?;
        self.levels[0] = ProblemLevel::quadratic(op.clone(), f)?;
        Ok(self)
    }

    pub fn restrict(&self, fine: &GridField) -> Result<GridField> {
        self.transfer.restrict(fine)
    }

    pub fn restrict_dual(&self, fine: &GridField) -> Result<GridField> {
        self.transfer.restrict_dual(fine)
    }

    pub fn prolong(&self, coarse: &GridField) -> Result<GridField> {
        self.transfer.prolong(coarse)
    }

    /// `A_L^-1 rhs` on the coarsest level of a linear hierarchy, with `A_L`
    /// the stencil operator including its `1/h^2` factor.
    pub fn coarsest_solve(&self, rhs: &GridField) -> Result<GridField> {
        self.coarsest.as_ref().ok_or(Error::NotQuadratic)?.solve(rhs)
    }

    /// Coarse functional with the first-order correction at the restriction point:
    /// returns `(x_H, sigma_H)` where `grad sigma_H(x_H) = P^T grad_parent`.
    pub fn coarse_problem(&self, l: usize, x: &GridField, parent_gradient: &GridField) -> Result<(GridField, ProblemLevel)> {
        if l + 1 >= self.levels.len() {
            return Err(Error::Hierarchy(format!("level {l} has no coarser level")));
        }
        let xc = self.restrict(x)?;
        let base = &self.levels[l + 1];
        let mut v = base.gradient(&xc);
        v.axpy(-1.0, &self.restrict_dual(parent_gradient)?);
        Ok((xc, base.with_shift(&v)?))
    }
}
