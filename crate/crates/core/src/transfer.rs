//! Inter-grid transfers for vertex-centred factor-2 coarsening.
//!
//! A fine grid with `n_f = 2 n_c + 1` interior points per axis has its odd
//! indices coinciding with the coarse points: coarse `(I, J)` sits on fine
//! `(2I + 1, 2J + 1)`. All operators are tensor products of 1D weights.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RestrictKind {
    #[default]
    FullWeighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProlongKind {
    #[default]
    Bilinear,
    /// Four-point cubic weights `(-1, 9, 9, -1)/16`, bilinear in the two
    /// cells touching the boundary.
    Bicubic,
}

/// A restriction/prolongation pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TransferPair {
    pub restrict_kind: RestrictKind,
    pub prolong_kind: ProlongKind,
}

type Weights1d = Vec<Vec<(usize, f64)>>;

/// Number of coarse points for a fine axis length, if compatible.
pub fn coarse_size(fine_n: usize) -> Result<usize> {
    if fine_n < 3 || fine_n.is_multiple_of(2) {
        return Err(Error::SizeMismatch {
            expected: 2 * (fine_n / 2) + 1,
            got: fine_n,
        });
    }
    Ok((fine_n - 1) / 2)
}

impl TransferPair {
    pub fn new(prolong_kind: ProlongKind) -> Self {
        Self {
            restrict_kind: RestrictKind::FullWeighting,
            prolong_kind,
        }
    }

    /// Full weighting: `(1/16) [1 2 1; 2 4 2; 1 2 1]` at coarse points.
    pub fn restrict(&self, fine: &GridField) -> Result<GridField> {
        let nc = coarse_size(fine.n())?;
        let table = restrict_weights_1d(nc);
        Ok(tensor_apply(&table, &table, fine, nc))
    }

    /// Restriction for gradients of area-weighted functionals.
    ///
    /// This is the exact transpose of the bilinear prolongation, i.e. four
    /// times full weighting, so that a fine gradient carrying the weight
    /// `h^2` lands on the coarse scale `(2h)^2`.
    pub fn restrict_dual(&self, fine: &GridField) -> Result<GridField> {
        let mut c = self.restrict(fine)?;
        c.scale(4.0);
        Ok(c)
    }

    pub fn prolong(&self, coarse: &GridField) -> Result<GridField> {
        let nc = coarse.n();
        let nf = 2 * nc + 1;
        let table = self.prolong_weights_1d(nc);
        Ok(tensor_apply(&table, &table, coarse, nf))
    }

    fn prolong_weights_1d(&self, nc: usize) -> Weights1d {
        match self.prolong_kind {
            ProlongKind::Bilinear => bilinear_weights_1d(nc),
            ProlongKind::Bicubic => bicubic_weights_1d(nc),
        }
    }

    /// Dense prolongation matrix (fine x coarse), row-major flattening.
    pub fn prolong_dense(&self, coarse_n: usize) -> DMatrix<f64> {
        let t = self.prolong_weights_1d(coarse_n);
        kron_dense(&t, coarse_n)
    }

    /// Dense full-weighting matrix (coarse x fine).
    pub fn restrict_dense(&self, coarse_n: usize) -> DMatrix<f64> {
        let t = restrict_weights_1d(coarse_n);
        kron_dense(&t, 2 * coarse_n + 1)
    }

    /// 1D restriction symbol; the 2D symbol is the product over axes.
    pub fn restrict_symbol_1d(&self, theta: f64) -> f64 {
        0.5 * (1.0 + theta.cos())
    }

    /// 1D prolongation symbol normalised so that bilinear prolongation and
    /// full weighting share the same symbol.
    pub fn prolong_symbol_1d(&self, theta: f64) -> f64 {
        match self.prolong_kind {
            ProlongKind::Bilinear => 0.5 * (1.0 + theta.cos()),
            ProlongKind::Bicubic => {
                0.5 * (1.0 + 1.125 * theta.cos() - 0.125 * (3.0 * theta).cos())
            }
        }
    }
}

fn restrict_weights_1d(nc: usize) -> Weights1d {
    (0..nc)
        .map(|c| vec![(2 * c, 0.25), (2 * c + 1, 0.5), (2 * c + 2, 0.25)])
        .collect()
}

fn bilinear_weights_1d(nc: usize) -> Weights1d {
    let nf = 2 * nc + 1;
    (0..nf)
        .map(|f| {
            if f % 2 == 1 {
                vec![((f - 1) / 2, 1.0)]
            } else {
                // between coarse f/2 - 1 and f/2
                let right = f / 2;
                let mut w = Vec::with_capacity(2);
                if right >= 1 {
                    w.push((right - 1, 0.5));
                }
                if right < nc {
                    w.push((right, 0.5));
                }
                w
            }
        })
        .collect()
}

fn bicubic_weights_1d(nc: usize) -> Weights1d {
    let nf = 2 * nc + 1;
    let lin = bilinear_weights_1d(nc);
    (0..nf)
        .map(|f| {
            if f % 2 == 1 {
                return vec![((f - 1) / 2, 1.0)];
            }
            let right = f / 2;
            if right == 0 || right == nc {
                return lin[f].clone();
            }
            // coarse nodes right-2 .. right+1, where index -1 and nc are boundary zeros
            let mut w = Vec::with_capacity(4);
            for (k, wt) in [(-2isize, -1.0 / 16.0), (-1, 9.0 / 16.0), (0, 9.0 / 16.0), (1, -1.0 / 16.0)] {
                let c = right as isize + k;
                if c >= 0 && (c as usize) < nc {
                    w.push((c as usize, wt));
                }
            }
            w
        })
        .collect()
}

/// `out[a][b] = sum wy[a] wx[b] input`, separable along both axes.
fn tensor_apply(wy: &Weights1d, wx: &Weights1d, input: &GridField, n_out: usize) -> GridField {
    let n_in = input.n();
    let src = input.as_slice();
    // along x: rows of input, columns of output
    let mut tmp = vec![0.0; n_in * n_out];
    for r in 0..n_in {
        let row = &src[r * n_in..(r + 1) * n_in];
        for (b, taps) in wx.iter().enumerate() {
            tmp[r * n_out + b] = taps.iter().map(|&(k, w)| w * row[k]).sum();
        }
    }
    let mut out = GridField::zeros(n_out);
    let dst = out.as_mut_slice();
    for (a, taps) in wy.iter().enumerate() {
        for &(k, w) in taps {
            let src_row = &tmp[k * n_out..(k + 1) * n_out];
            for (d, s) in dst[a * n_out..(a + 1) * n_out].iter_mut().zip(src_row) {
                *d += w * s;
            }
        }
    }
    out
}

fn kron_dense(t: &Weights1d, n_in: usize) -> DMatrix<f64> {
    let n_out = t.len();
    let mut m = DMatrix::zeros(n_out * n_out, n_in * n_in);
    for (a, ta) in t.iter().enumerate() {
        for (b, tb) in t.iter().enumerate() {
            for &(ka, wa) in ta {
                for &(kb, wb) in tb {
                    m[(a * n_out + b, ka * n_in + kb)] += wa * wb;
                }
            }
        }
    }
    m
}

/// Galerkin coarse matrix `R A P` with full weighting `R`.
pub fn galerkin_coarse_dense(a: &DMatrix<f64>, t: &TransferPair) -> Result<DMatrix<f64>> {
    let fine_unknowns = a.nrows();
    let fine_n = (fine_unknowns as f64).sqrt().round() as usize;
    if fine_n * fine_n != fine_unknowns || a.ncols() != fine_unknowns {
        return Err(Error::SizeMismatch {
            expected: fine_n * fine_n,
            got: fine_unknowns,
        });
    }
    let nc = coarse_size(fine_n)?;
    let p = t.prolong_dense(nc);
    let r = t.restrict_dense(nc);
    Ok(&r * a * &p)
}
