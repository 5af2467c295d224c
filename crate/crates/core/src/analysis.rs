//! Fixed-stepsize two-grid analysis.
//!
//! The iteration
//! `x_k = x_{k-1} + c1 (x_{k-1} - x_{k-2}) + (c2 Phi + c3 P A_H^-1 R) (f - A x_{k-1})`
//! has error propagation `e_k = Gamma e_{k-1} - c1 e_{k-2}` with
//! `Gamma = (1 + c1) I - c23 W_alpha`, `c23 = c2 + c3`, `alpha = c2 / c23`.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stepsizes `(c1, c23, alpha)` and the factor they are predicted to achieve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedCoefficients {
    pub c1: f64,
    pub c23: f64,
    pub alpha: f64,
    pub predicted_factor: f64,
}

impl FixedCoefficients {
    pub fn new(c1: f64, c23: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(c1 >= 0.0 && c1.is_finite() && c23.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad coefficients c1 = {c1}, c23 = {c23}")));
        }
        Ok(Self {
            c1,
            c23,
            alpha,
            predicted_factor: f64::NAN,
        })
    }

    /// From the three raw weights of the update.
    pub fn from_weights(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let c23 = c2 + c3;
        if c23 == 0.0 {
            return Err(Error::InvalidParameter("c2 + c3 must be nonzero".into()));
        }
        Self::new(c1, c23, c2 / c23)
    }

    pub fn c2(&self) -> f64 {
        self.alpha * self.c23
    }

    pub fn c3(&self) -> f64 {
        (1.0 - self.alpha) * self.c23
    }

    pub fn with_prediction(mut self, factor: f64) -> Self {
        self.predicted_factor = factor;
        self
    }
}

/// Extreme eigenvalues of `W_alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl SpectrumSummary {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_max >= lambda_min) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < lambda_min <= lambda_max, got {lambda_min}, {lambda_max}"
            )));
        }
        Ok(Self { lambda_min, lambda_max })
    }

    pub fn kappa(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }

    pub fn mu(&self) -> f64 {
        let k = self.kappa();
        (k - 1.0) / (k + 1.0)
    }
}

/// Optimal factor `(sqrt(k) - 1) / (sqrt(k) + 1)` with one history step.
pub fn factor_with_history(kappa: f64) -> f64 {
    let s = kappa.sqrt();
    (s - 1.0) / (s + 1.0)
}

/// Optimal factor `(k - 1) / (k + 1)` without history.
pub fn factor_without_history(kappa: f64) -> f64 {
    (kappa - 1.0) / (kappa + 1.0)
}

/// Closed-form optimal stepsizes for a spectrum `[lambda_min, lambda_max]`.
///
/// `alpha` is not determined by the spectrum and is returned as 1; callers
/// that minimised the condition number over `alpha` overwrite it.
pub fn optimal_coefficients(spec: &SpectrumSummary, with_history: bool) -> Result<FixedCoefficients> {
    let kappa = spec.kappa();
    if kappa < 1.0 {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} < 1")));
    }
    let lmin = spec.lambda_min;
    let (c1, c23, factor) = if with_history {
        let s = kappa.sqrt();
        let r = factor_with_history(kappa);
        (r * r, 4.0 / (lmin * (s + 1.0) * (s + 1.0)), r)
    } else {
        (0.0, 2.0 / (lmin * (kappa + 1.0)), factor_without_history(kappa))
    };
    Ok(FixedCoefficients {
        c1,
        c23,
        alpha: 1.0,
        predicted_factor: factor,
    })
}

/// Roots of `r^2 - b r + c1 = 0`.
pub fn upsilon_roots(b: f64, c1: f64) -> (Complex64, Complex64) {
    let disc = Complex64::new(b * b - 4.0 * c1, 0.0).sqrt();
    let bc = Complex64::new(b, 0.0);
    ((bc + disc) * 0.5, (bc - disc) * 0.5)
}

/// Spectral radius of the two-step propagator given the eigenvalues `b` of `Gamma`.
pub fn upsilon_spectral_radius(b_values: &[f64], c1: f64) -> f64 {
    b_values
        .iter()
        .map(|&b| {
            if b * b < 4.0 * c1 {
                c1.sqrt()
            } else {
                let (r1, r2) = upsilon_roots(b, c1);
                r1.norm().max(r2.norm())
            }
        })
        .fold(0.0, f64::max)
}

/// Spectral radius for complex `b` (nonsymmetric symbols).
pub fn upsilon_spectral_radius_complex(b_values: &[Complex64], c1: f64) -> f64 {
    b_values
        .iter()
        .map(|&b| {
            let disc = (b * b - 4.0 * c1).sqrt();
            ((b + disc) * 0.5).norm().max(((b - disc) * 0.5).norm())
        })
        .fold(0.0, f64::max)
}

/// Dense two-grid ingredients: `A`, `Phi`, prolongation `P`, restriction `R`
/// and coarse operator `A_H`.
#[derive(Debug, Clone)]
pub struct DenseTwoGrid {
    pub a: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub a_h: DMatrix<f64>,
}

impl DenseTwoGrid {
    /// Checks shapes; `R` defaults to `P^T` when `r` is `None`.
    pub fn new(
        a: DMatrix<f64>,
        phi: DMatrix<f64>,
        p: DMatrix<f64>,
        r: Option<DMatrix<f64>>,
        a_h: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let nc = p.ncols();
        let r = r.unwrap_or_else(|| p.transpose());
        let shapes = [
            (a.ncols(), n),
            (phi.nrows(), n),
            (phi.ncols(), n),
            (p.nrows(), n),
            (r.nrows(), nc),
            (r.ncols(), n),
            (a_h.nrows(), nc),
            (a_h.ncols(), nc),
        ];
        for (got, expected) in shapes {
            if got != expected {
                return Err(Error::SizeMismatch { expected, got });
            }
        }
        Ok(Self { a, phi, p, r, a_h })
    }

    /// `P A_H^-1 R`.
    pub fn coarse_inverse(&self) -> Result<DMatrix<f64>> {
        let lu = self.a_h.clone().lu();
        let y = lu.solve(&self.r).ok_or(Error::Singular)?;
        Ok(&self.p * y)
    }

    /// Coarse-grid correction matrix `P A_H^-1 R A`.
    pub fn cgc(&self) -> Result<DMatrix<f64>> {
        Ok(self.coarse_inverse()? * &self.a)
    }

    pub fn w_alpha(&self, alpha: f64) -> Result<DMatrix<f64>> {
        let b = &self.phi * alpha + self.coarse_inverse()? * (1.0 - alpha);
        Ok(b * &self.a)
    }

    pub fn gamma(&self, c: &FixedCoefficients) -> Result<DMatrix<f64>> {
        let n = self.a.nrows();
        let b = &self.phi * c.c2() + self.coarse_inverse()? * c.c3();
        Ok(DMatrix::identity(n, n) * (1.0 + c.c1) - b * &self.a)
    }
}

pub fn gamma_dense(tg: &DenseTwoGrid, c: &FixedCoefficients) -> Result<DMatrix<f64>> {
    tg.gamma(c)
}

pub fn w_alpha_dense(tg: &DenseTwoGrid, alpha: f64) -> Result<DMatrix<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    tg.w_alpha(alpha)
}

/// Block companion matrix `[[Gamma, -c1 I], [I, 0]]`.
pub fn upsilon_dense(gamma: &DMatrix<f64>, c1: f64) -> DMatrix<f64> {
    let n = gamma.nrows();
    let mut u = DMatrix::zeros(2 * n, 2 * n);
    u.view_mut((0, 0), (n, n)).copy_from(gamma);
    for i in 0..n {
        u[(i, n + i)] = -c1;
        u[(n + i, i)] = 1.0;
    }
    u
}

/// Eigenvalues of `M`, which must be similar to a symmetric matrix via `sqrt(A)`
/// for SPD `A`: returns the spectrum of `A^(1/2) M A^(-1/2)` sorted ascending.
pub fn real_spectrum_via_sqrt(m: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::Singular);
    }
    let q = &eig.eigenvectors;
    let sq = q * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose();
    let isq = q * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt())) * q.transpose();
    let s = &sq * m * &isq;
    let sym = (&s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Spectral radius of a general real matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if let Some(schur) = nalgebra::Schur::try_new(m.clone(), 1e-14, 20_000) {
        return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    // Gelfand: ||M^(2^j)||^(1/2^j) by repeated normalised squaring
    let mut p = m.clone();
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..40 {
        let nrm = p.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        p /= nrm;
        log_scale = 2.0 * (log_scale + nrm.ln());
        k *= 2.0;
        p = &p * &p;
    }
    ((log_scale + p.norm().ln()) / k).exp()
}

/// Eigenvalue extremes of `A` split by whether the eigenvector lies in the
/// prolongation range (`c`) or its complement (`f`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigSplit {
    pub eta_fmax: f64,
    pub eta_fmin: f64,
    pub eta_cmax: f64,
    pub eta_cmin: f64,
}

impl EigSplit {
    pub fn new(eta_fmin: f64, eta_fmax: f64, eta_cmin: f64, eta_cmax: f64) -> Result<Self> {
        if !(eta_fmin > 0.0 && eta_cmin > 0.0 && eta_fmax >= eta_fmin && eta_cmax >= eta_cmin) {
            return Err(Error::InvalidParameter("eigenvalue split must be positive and ordered".into()));
        }
        Ok(Self {
            eta_fmax,
            eta_fmin,
            eta_cmax,
            eta_cmin,
        })
    }

    /// Builds the split from the eigenvalues of `A` and a coarse membership mask.
    pub fn from_eigenvalues(eta: &[f64], coarse: &[bool]) -> Result<Self> {
        let pick = |want: bool| {
            let it = eta.iter().zip(coarse).filter(|(_, &c)| c == want).map(|(&e, _)| e);
            let v: Vec<f64> = it.collect();
            if v.is_empty() {
                return Err(Error::InvalidParameter("empty eigenvalue class".into()));
            }
            Ok((v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(0.0, f64::max)))
        };
        let (fmin, fmax) = pick(false)?;
        let (cmin, cmax) = pick(true)?;
        Self::new(fmin, fmax, cmin, cmax)
    }
}

/// Condition number of `W_alpha` for an eigenvector-aligned prolongation.
pub fn kappa_from_eigsplit(s: &EigSplit, alpha: f64) -> f64 {
    let top = (alpha * s.eta_fmax).max(alpha * s.eta_cmax + 1.0 - alpha);
    let bottom = (alpha * s.eta_fmin).min(alpha * s.eta_cmin + 1.0 - alpha);
    top / bottom
}

/// Minimiser of [`kappa_from_eigsplit`] over `alpha` and the minimal value.
pub fn alpha_opt_eigsplit(s: &EigSplit) -> Result<(f64, f64)> {
    if s.eta_cmin > s.eta_fmin || s.eta_cmax > s.eta_fmax {
        return Err(Error::Hypotheses(format!(
            "need eta_cmin <= eta_fmin and eta_cmax <= eta_fmax, got {s:?}"
        )));
    }
    let alpha = 1.0 / (1.0 + s.eta_fmin - s.eta_cmin);
    let kappa = if s.eta_fmax - s.eta_fmin >= s.eta_cmax - s.eta_cmin {
        s.eta_fmax / s.eta_fmin
    } else {
        1.0 + (s.eta_cmax - s.eta_cmin) / s.eta_fmin
    };
    Ok((alpha, kappa))
}

/// The analysis covers zero or one history direction only.
pub fn ensure_history_supported(history: usize) -> Result<()> {
    if history >= 2 {
        return Err(Error::InvalidParameter(format!(
            "fixed-stepsize analysis is available for at most one history direction, got {history}"
        )));
    }
    Ok(())
}

/// True when `A` admits a Cholesky factorisation.
pub fn is_spd(a: &DMatrix<f64>) -> bool {
    Cholesky::new(a.clone()).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        m.qr().q()
    }

    fn spd_with_spectrum(eta: &[f64], q: &DMatrix<f64>) -> DMatrix<f64> {
        q * DMatrix::from_diagonal(&DVector::from_column_slice(eta)) * q.transpose()
    }

    #[test]
    fn formula_examples() {
        let s = SpectrumSummary::new(2.0, 8.0).unwrap();
        let h = optimal_coefficients(&s, true).unwrap();
        assert_relative_eq!(h.c1, 1.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(h.c23, 2.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(h.predicted_factor, 1.0 / 3.0, epsilon = 1e-15);
        let nh = optimal_coefficients(&s, false).unwrap();
        assert_relative_eq!(nh.c23, 0.2, epsilon = 1e-15);
        assert_relative_eq!(nh.predicted_factor, 0.6, epsilon = 1e-15);
        let one = optimal_coefficients(&SpectrumSummary::new(3.0, 3.0).unwrap(), true).unwrap();
        assert_eq!(one.c1, 0.0);
        assert_eq!(one.predicted_factor, 0.0);
        assert!((factor_with_history(6.81) - 0.446).abs() < 5e-4);
    }

    #[test]
    fn formula_matches_grid_search_on_scalar_spectrum() {
        let s = SpectrumSummary::new(2.0, 8.0).unwrap();
        let bvals = |c1: f64, c23: f64| [1.0 + c1 - c23 * 2.0, 1.0 + c1 - c23 * 8.0];
        let mut best = f64::INFINITY;
        for i in 0..400 {
            for j in 0..400 {
                let (c1, c23) = (i as f64 * 0.0025, j as f64 * 0.001);
                best = best.min(upsilon_spectral_radius(&bvals(c1, c23), c1));
            }
        }
        let c = optimal_coefficients(&s, true).unwrap();
        assert!(upsilon_spectral_radius(&bvals(c.c1, c.c23), c.c1) <= best + 1e-12);
        assert!(best - c.predicted_factor < 0.01);
    }

    #[test]
    fn upsilon_radius_limits() {
        assert_relative_eq!(upsilon_spectral_radius(&[0.3, -0.7, 0.1], 0.0), 0.7);
        assert_relative_eq!(upsilon_spectral_radius(&[0.1, -0.2], 0.25), 0.5);
    }

    #[test]
    fn meeting_point_and_vanishing_discriminant() {
        for &(lmin, lmax) in &[(0.5, 2.0), (1.0, 17.3), (0.01, 1.0)] {
            let s = SpectrumSummary::new(lmin, lmax).unwrap();
            let c = optimal_coefficients(&s, true).unwrap();
            let b_lo = 1.0 + c.c1 - c.c23 * lmin;
            let b_hi = 1.0 + c.c1 - c.c23 * lmax;
            assert!((b_lo + b_hi).abs() < 1e-12);
            let mu = s.mu();
            assert!((mu * mu * (1.0 + c.c1).powi(2) - 4.0 * c.c1).abs() < 1e-10);
        }
    }

    #[test]
    fn radius_peaks_at_spectrum_endpoints() {
        let s = SpectrumSummary::new(0.3, 5.0).unwrap();
        let c = optimal_coefficients(&s, true).unwrap();
        let r = |l: f64| upsilon_spectral_radius(&[1.0 + c.c1 - c.c23 * l], c.c1);
        let ends = r(0.3).max(r(5.0));
        for k in 0..=1000 {
            let l = 0.3 + 4.7 * k as f64 / 1000.0;
            assert!(r(l) <= ends + 1e-12);
        }
    }

    #[test]
    fn companion_eigenvalues_follow_quadratic_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10;
        let q = random_orthogonal(n, &mut rng);
        let eta: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
        let g = spd_with_spectrum(&eta, &q);
        let c1 = 0.3;
        let up = upsilon_dense(&g, c1);
        let mut dense: Vec<Complex64> = up.complex_eigenvalues().iter().copied().collect();
        let mut expect: Vec<Complex64> = eta
            .iter()
            .flat_map(|&b| {
                let (a, c) = upsilon_roots(b, c1);
                [a, c]
            })
            .collect();
        let key = |z: &Complex64| (z.re * 1e6).round() as i64 * 1_000_000_000 + (z.im * 1e6).round() as i64;
        dense.sort_by_key(key);
        expect.sort_by_key(key);
        for (a, b) in dense.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn eigsplit_examples() {
        let s = EigSplit::new(3.0, 4.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(kappa_from_eigsplit(&s, 1.0), 4.0);
        assert_relative_eq!(kappa_from_eigsplit(&s, 1.0 / 3.0), 4.0 / 3.0, epsilon = 1e-14);
        let (a, k) = alpha_opt_eigsplit(&s).unwrap();
        assert_relative_eq!(a, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(k, 4.0 / 3.0, epsilon = 1e-15);
        let s2 = EigSplit::new(3.0, 3.5, 1.0, 2.0).unwrap();
        let (a2, k2) = alpha_opt_eigsplit(&s2).unwrap();
        assert_relative_eq!(a2, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(k2, 4.0 / 3.0, epsilon = 1e-15);
        assert!(alpha_opt_eigsplit(&EigSplit::new(1.0, 2.0, 1.5, 1.8).unwrap()).is_err());
    }

    #[test]
    fn alpha_scan_agrees_with_closed_form() {
        for s in [EigSplit::new(3.0, 4.0, 1.0, 2.0).unwrap(), EigSplit::new(3.0, 3.5, 1.0, 2.0).unwrap()] {
            let (mut best_a, mut best_k) = (0.0, f64::INFINITY);
            for i in 1..=10_000 {
                let a = i as f64 * 1e-4;
                let k = kappa_from_eigsplit(&s, a);
                if k < best_k {
                    best_k = k;
                    best_a = a;
                }
            }
            let (a, k) = alpha_opt_eigsplit(&s).unwrap();
            assert!((a - best_a).abs() <= 1e-4);
            assert!((k - best_k).abs() < 1e-3);
        }
    }

    #[test]
    fn eigenvector_prolongation_gives_projector_cgc() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 10;
        let q = random_orthogonal(n, &mut rng);
        let eta: Vec<f64> = (0..n).map(|_| 0.5 + 2.0 * rng.random::<f64>()).collect();
        let a = spd_with_spectrum(&eta, &q);
        let cols: Vec<usize> = vec![0, 3, 4, 8];
        let p = DMatrix::from_fn(n, cols.len(), |i, j| q[(i, cols[j])]);
        let a_h = p.transpose() * &a * &p;
        let tg = DenseTwoGrid::new(a.clone(), DMatrix::identity(n, n), p, None, a_h).unwrap();
        let cgc = tg.cgc().unwrap();
        for z in cgc.complex_eigenvalues().iter() {
            assert!(z.norm() < 1e-8 || (z - 1.0).norm() < 1e-8);
        }
        let ev = real_spectrum_via_sqrt(&tg.w_alpha(1.0).unwrap(), &a).unwrap();
        let mut sorted = eta.clone();
        sorted.sort_by(f64::total_cmp);
        for (x, y) in ev.iter().zip(&sorted) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn smallest_eigenvectors_give_small_optimal_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 8;
        let q = random_orthogonal(n, &mut rng);
        let eta = [0.1, 0.4, 0.7, 0.95, 1.0, 1.2, 1.35, 1.5];
        let coarse = [true, true, true, true, false, false, false, false];
        let a = spd_with_spectrum(&eta, &q);
        let s = EigSplit::from_eigenvalues(&eta, &coarse).unwrap();
        let (alpha, kappa) = alpha_opt_eigsplit(&s).unwrap();
        assert!(kappa < 2.0);
        let p = q.columns(0, 4).into_owned();
        let a_h = p.transpose() * &a * &p;
        let tg = DenseTwoGrid::new(a.clone(), DMatrix::identity(n, n), p, None, a_h).unwrap();
        let ev = real_spectrum_via_sqrt(&tg.w_alpha(alpha).unwrap(), &a).unwrap();
        assert_relative_eq!(ev[n - 1] / ev[0], kappa, epsilon = 1e-8);
    }

    #[test]
    fn history_limit() {
        assert!(ensure_history_supported(1).is_ok());
        assert!(ensure_history_supported(2).is_err());
    }

    #[test]
    fn coefficient_bookkeeping() {
        let c = FixedCoefficients::from_weights(0.1, 0.3, 0.7).unwrap();
        assert_relative_eq!(c.c23, 1.0);
        assert_relative_eq!(c.alpha, 0.3);
        assert_relative_eq!(c.c3(), 0.7, epsilon = 1e-15);
        assert!(FixedCoefficients::new(0.0, 1.0, 0.0).is_err());
    }
}
