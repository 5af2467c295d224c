//! Local Fourier analysis of stencils and of the blended two-grid operator.
//!
//! Symbols are evaluated in Jacobi-scaled units (divided by the stencil
//! centre), which is the `Phi = D^-1` normalisation of the fixed-stepsize
//! analysis. A low frequency `theta` couples the four harmonics
//! `(t1, t2), (s1, t2), (t1, s2), (s1, s2)` where `s = t + pi` for `t < 0`
//! and `s = t - pi` otherwise.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Schur, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    factor_with_history, factor_without_history, optimal_coefficients, upsilon_spectral_radius_complex,
    FixedCoefficients, SpectrumSummary,
};
use crate::error::{Error, Result};
use crate::grid::StencilOp;
use crate::hierarchy::CoarseMode;
use crate::transfer::TransferPair;

const TRIVIAL: f64 = 1e-12;

/// `sum_k a_k exp(i theta . k)` over the stencil offsets, `theta = (theta_x, theta_y)`.
pub fn symbol(op: &StencilOp, theta: (f64, f64)) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for dy in -1..=1isize {
        for dx in -1..=1isize {
            let w = op.weight(dy, dx);
            if w != 0.0 {
                s += w * Complex64::from_polar(1.0, theta.0 * dx as f64 + theta.1 * dy as f64);
            }
        }
    }
    s
}

/// Real symbol divided by the stencil centre.
fn scaled_symbol(op: &StencilOp, theta: (f64, f64)) -> f64 {
    symbol(op, theta).re / op.center()
}

fn shift(t: f64) -> f64 {
    if t < 0.0 {
        t + PI
    } else {
        t - PI
    }
}

pub fn harmonics(theta: (f64, f64)) -> [(f64, f64); 4] {
    let (t1, t2) = theta;
    let (s1, s2) = (shift(t1), shift(t2));
    [(t1, t2), (s1, t2), (t1, s2), (s1, s2)]
}

/// Uniform sampling `-pi + 2 pi k / m` of `[-pi, pi)^2` split into low and high frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPartition {
    m: usize,
    axis: Vec<f64>,
}

impl FrequencyPartition {
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || !m.is_multiple_of(4) {
            return Err(Error::InvalidParameter(format!(
                "sampling resolution must be a positive multiple of 4, got {m}"
            )));
        }
        let axis = (0..m).map(|k| -PI + 2.0 * PI * k as f64 / m as f64).collect();
        Ok(Self { m, axis })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn is_low_1d(k: usize, m: usize) -> bool {
        k >= m / 4 && k < 3 * m / 4
    }

    pub fn is_low(&self, k1: usize, k2: usize) -> bool {
        Self::is_low_1d(k1, self.m) && Self::is_low_1d(k2, self.m)
    }

    pub fn all(&self) -> impl Iterator<Item = ((usize, usize), (f64, f64))> + '_ {
        (0..self.m).flat_map(move |a| (0..self.m).map(move |b| ((a, b), (self.axis[a], self.axis[b]))))
    }

    pub fn low(&self) -> Vec<(f64, f64)> {
        self.all().filter(|((a, b), _)| self.is_low(*a, *b)).map(|(_, t)| t).collect()
    }

    pub fn high(&self) -> Vec<(f64, f64)> {
        self.all().filter(|((a, b), _)| !self.is_low(*a, *b)).map(|(_, t)| t).collect()
    }
}

fn high_symbol_range(op: &StencilOp, m: usize) -> Result<(f64, f64)> {
    let part = FrequencyPartition::new(m)?;
    let vals: Vec<f64> = part.high().iter().map(|&t| scaled_symbol(op, t)).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Extremes of `symbol / centre` over the sampled high frequencies; errors
/// if the symbol changes sign there.
pub fn high_frequency_range(op: &StencilOp, m: usize) -> Result<(f64, f64)> {
    let (lo, hi) = high_symbol_range(op, m)?;
    if lo <= 0.0 {
        return Err(Error::IndefiniteSymbol);
    }
    Ok((lo, hi))
}

/// `min |symbol| / max |symbol|` over the sampled high frequencies.
pub fn h_ellipticity(op: &StencilOp, m: usize) -> Result<f64> {
    let part = FrequencyPartition::new(m)?;
    let mags: Vec<f64> = part.high().iter().map(|&t| symbol(op, t).norm()).collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    Ok(lo / hi)
}

/// Ideal-multigrid factors `((1 - E)/(1 + E), (1 - sqrt E)/(1 + sqrt E))`.
pub fn ideal_factors(op: &StencilOp, m: usize) -> Result<(f64, f64)> {
    let e = h_ellipticity(op, m)?;
    if e <= 0.0 {
        return Err(Error::IndefiniteSymbol);
    }
    let kappa = 1.0 / e;
    Ok((factor_without_history(kappa), factor_with_history(kappa)))
}

/// The 4x4 symbol data at one low frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoGridSymbolSample {
    pub theta: (f64, f64),
    pub a_diag: [f64; 4],
    pub restrict: [f64; 4],
    pub prolong: [f64; 4],
    pub a_coarse: f64,
    pub w: Matrix4<f64>,
    pub eigenvalues: [Complex64; 4],
}

/// Diagonal operator, restriction and prolongation symbols over the four
/// harmonics, and the coarse symbol.
type Blocks = ([f64; 4], [f64; 4], [f64; 4], f64);

/// Symbol blocks without the eigen-solve, or `None` at a trivial angle.
fn blocks(
    op: &StencilOp,
    t: &TransferPair,
    mode: CoarseMode,
    theta: (f64, f64),
) -> Option<Blocks> {
    let hs = harmonics(theta);
    let mut a = [0.0; 4];
    let mut r = [0.0; 4];
    let mut p = [0.0; 4];
    for (k, &(t1, t2)) in hs.iter().enumerate() {
        a[k] = scaled_symbol(op, (t1, t2));
        r[k] = t.restrict_symbol_1d(t1) * t.restrict_symbol_1d(t2);
        p[k] = t.prolong_symbol_1d(t1) * t.prolong_symbol_1d(t2);
    }
    let ah = match mode {
        CoarseMode::Rediscretize => 0.25 * scaled_symbol(op, (2.0 * theta.0, 2.0 * theta.1)),
        CoarseMode::Galerkin => (0..4).map(|k| r[k] * a[k] * p[k]).sum(),
    };
    if ah.abs() < TRIVIAL || a.iter().any(|v| v.abs() < TRIVIAL) {
        return None;
    }
    Some((a, r, p, ah))
}

fn w_matrix(a: &[f64; 4], r: &[f64; 4], p: &[f64; 4], ah: f64, alpha: f64) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| {
        let diag = if i == j { alpha * a[i] } else { 0.0 };
        diag + (1.0 - alpha) * p[i] * r[j] * a[j] / ah
    })
}

/// Eigenvalues of `alpha diag(a) + (1 - alpha) p (r a)^T / ah`.
///
/// A diagonal-plus-rank-one matrix has the characteristic polynomial of
/// `diag + z z^T` with `z_i^2 = p_i r_i a_i / ah`, so whenever those products
/// are nonnegative the spectrum is real and a symmetric solve suffices.
fn w_eigenvalues(a: &[f64; 4], r: &[f64; 4], p: &[f64; 4], ah: f64, alpha: f64) -> [Complex64; 4] {
    let prod: [f64; 4] = std::array::from_fn(|k| (1.0 - alpha) * p[k] * r[k] * a[k] / ah);
    if prod.iter().all(|&v| v >= 0.0) {
        let z = Vector4::from_fn(|k, _| prod[k].sqrt());
        let m = Matrix4::from_diagonal(&Vector4::from_fn(|k, _| alpha * a[k])) + z * z.transpose();
        let ev = m.symmetric_eigenvalues();
        return std::array::from_fn(|k| Complex64::new(ev[k], 0.0));
    }
    let w = w_matrix(a, r, p, ah, alpha);
    match Schur::try_new(w, 1e-15, 10_000) {
        Some(s) => {
            let ev = s.complex_eigenvalues();
            std::array::from_fn(|k| ev[k])
        }
        None => [Complex64::new(f64::NAN, 0.0); 4],
    }
}

/// `W_alpha = alpha A + (1 - alpha) P A_H^-1 R A` at one low frequency.
pub fn two_grid_symbol(
    op: &StencilOp,
    t: &TransferPair,
    mode: CoarseMode,
    alpha: f64,
    theta: (f64, f64),
) -> Result<TwoGridSymbolSample> {
    let (a, r, p, ah) = blocks(op, t, mode, theta).ok_or(Error::Singular)?;
    let w = w_matrix(&a, &r, &p, ah, alpha);
    let eigenvalues = w_eigenvalues(&a, &r, &p, ah, alpha);
    Ok(TwoGridSymbolSample {
        theta,
        a_diag: a,
        restrict: r,
        prolong: p,
        a_coarse: ah,
        w,
        eigenvalues,
    })
}

/// All `W_alpha` symbol eigenvalues over the sampled low frequencies.
pub fn w_symbol_eigenvalues(
    op: &StencilOp,
    t: &TransferPair,
    mode: CoarseMode,
    alpha: f64,
    m: usize,
) -> Result<Vec<Complex64>> {
    let part = FrequencyPartition::new(m)?;
    let low = part.low();
    Ok(low
        .par_iter()
        .filter_map(|&th| blocks(op, t, mode, th))
        .flat_map_iter(|(a, r, p, ah)| w_eigenvalues(&a, &r, &p, ah, alpha))
        .collect())
}

/// Extreme eigenvalue magnitudes of `W_alpha` over the sample.
pub fn spectrum_of_alpha(
    op: &StencilOp,
    t: &TransferPair,
    mode: CoarseMode,
    alpha: f64,
    m: usize,
) -> Result<SpectrumSummary> {
    let ev = w_symbol_eigenvalues(op, t, mode, alpha, m)?;
    let (lo, hi) = ev
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), z| (lo.min(z.norm()), hi.max(z.norm())));
    SpectrumSummary::new(lo, hi)
}

pub fn kappa_of_alpha(op: &StencilOp, t: &TransferPair, mode: CoarseMode, alpha: f64, m: usize) -> Result<f64> {
    Ok(spectrum_of_alpha(op, t, mode, alpha, m)?.kappa())
}

/// Result of the condition-number line search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaMinimum {
    pub alpha: f64,
    pub kappa: f64,
    pub coefficients: FixedCoefficients,
}

/// Minimises `kappa(alpha)` on `(0, 1]`: a uniform scan brackets the
/// minimum, golden-section search refines it to `tol`.
pub fn minimize_kappa(op: &StencilOp, t: &TransferPair, mode: CoarseMode, m: usize, tol: f64) -> Result<KappaMinimum> {
    let eval = |a: f64| kappa_of_alpha(op, t, mode, a, m);
    let scan = 40;
    let mut best = (1.0, eval(1.0)?);
    for i in 1..scan {
        let a = i as f64 / scan as f64;
        let k = eval(a)?;
        if k < best.1 {
            best = (a, k);
        }
    }
    let step = 1.0 / scan as f64;
    let (mut lo, mut hi) = ((best.0 - step).max(1e-6), (best.0 + step).min(1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let (alpha, _) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let (alpha, spec) = {
        let s = spectrum_of_alpha(op, t, mode, alpha, m)?;
        if s.kappa() <= best.1 {
            (alpha, s)
        } else {
            (best.0, spectrum_of_alpha(op, t, mode, best.0, m)?)
        }
    };
    let mut coefficients = optimal_coefficients(&spec, true)?;
    coefficients.alpha = alpha;
    Ok(KappaMinimum {
        alpha,
        kappa: spec.kappa(),
        coefficients,
    })
}

/// Spectral radius of the two-step propagator of the fixed iteration,
/// evaluated from the symbols of `Gamma = (1 + c1) I - c23 W_alpha`.
pub fn predicted_factor_fixed(
    op: &StencilOp,
    t: &TransferPair,
    mode: CoarseMode,
    m: usize,
    c: &FixedCoefficients,
) -> Result<f64> {
    let ev = w_symbol_eigenvalues(op, t, mode, c.alpha, m)?;
    let b: Vec<Complex64> = ev.iter().map(|&l| (1.0 + c.c1) - c.c23 * l).collect();
    Ok(upsilon_spectral_radius_complex(&b, c.c1))
}

/// The ordinary stepsize strategy: the CGC weight is fixed at `c3 = 1` and
/// `(c1, c2)` come from the ideal-multigrid condition number `1 / E_h` with
/// the smallest high-frequency symbol as `lambda_min`.
pub fn ordinary_coefficients(op: &StencilOp, t: &TransferPair, mode: CoarseMode, m: usize) -> Result<FixedCoefficients> {
    let kappa = 1.0 / h_ellipticity(op, m)?;
    let (lmin, _) = high_frequency_range(op, m)?;
    let s = kappa.sqrt();
    let r = factor_with_history(kappa);
    let c2 = 4.0 / (lmin * (s + 1.0) * (s + 1.0));
    let c = FixedCoefficients::from_weights(r * r, c2, 1.0)?;
    let rho = predicted_factor_fixed(op, t, mode, m, &c)?;
    Ok(c.with_prediction(rho))
}
