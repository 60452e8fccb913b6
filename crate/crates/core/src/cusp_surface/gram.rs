//! Norms of the monomial sections, Gram data and the global Bergman kernel.

use super::{dimension, QuadratureSettings, SurfaceModel};
use crate::disc_model::ModelBasis;
use crate::error::{Error, Result};
use crate::numerics::{composite_gauss, integrate_log, log_sum_exp, reg_gamma_pair, AdaptiveOptions, LogReal};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// `||z^j||^2 = e^{-p gauge} c_j^{-2} (1 + defect)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionNorm {
    pub j: usize,
    pub norm_sq: LogReal,
    pub defect: LogReal,
}

impl SectionNorm {
    /// `ln ||z^j||`.
    pub fn ln_norm(&self) -> f64 {
        0.5 * self.norm_sq.log_magnitude()
    }
}

fn norm_data(model: &SurfaceModel, basis: &ModelBasis, j: usize) -> Result<SectionNorm> {
    let p = basis.p();
    let pot = model.potential();
    let s0 = pot.s0();
    let a = f64::from(p - 1);
    let jp = model.k() as usize * p as usize - j;
    let (p_left, _) = reg_gamma_pair(a, j as f64 * s0)?;
    let (_, q_right) = reg_gamma_pair(a, jp as f64 * s0)?;
    let mirror = LogReal::from_ln(a * (j as f64 / jp as f64).ln()) * q_right;
    let pf = f64::from(p);
    let jf = j as f64;
    let bridge = integrate_log(
        |s| {
            let v = pot.bridge_eval(s);
            LogReal::from_ln(jf * s - pf * v[0] + v[2].ln())
        },
        -s0,
        s0,
        AdaptiveOptions { rel_tol: 1e-13, ..Default::default() },
    )?;
    let bridge = bridge * LogReal::from_f64(2.0 * PI) * LogReal::from_ln(basis.ln_coeff_sq(j as u64));
    let defect = -p_left + mirror + bridge;
    let norm_sq = LogReal::from_ln(-pf * pot.gauge() - basis.ln_coeff_sq(j as u64)) * (LogReal::ONE + defect);
    Ok(SectionNorm { j, norm_sq, defect })
}

/// `||z^j||^2` from closed-form cusp contributions and an adaptive bridge integral.
pub fn section_norm(model: &SurfaceModel, p: u32, j: usize) -> Result<LogReal> {
    let d = dimension(model, p)?;
    if j < 1 || j > d {
        return Err(Error::IndexOutOfRange { index: j, max: d });
    }
    Ok(norm_data(model, &ModelBasis::new(p)?, j)?.norm_sq)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramMode {
    Symmetric,
    Perturbed,
}

/// Gram data in normalized monomial coordinates `e_j = z^j / ||z^j||`.
///
/// In these coordinates the Gram matrix is `I + Delta`, with `Delta` zero in
/// symmetric mode and supported on `|j - k| = m` in perturbed mode.
#[derive(Clone, Debug)]
pub struct GramData {
    p: u32,
    k: u32,
    mode: GramMode,
    norms: Vec<SectionNorm>,
    delta: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    inv_minus_id: Option<DMatrix<f64>>,
}

/// Normalized off-diagonal entry `<e_j, e_k>` from the perturbation term, by tensor quadrature.
pub fn perturbation_entry(
    model: &SurfaceModel,
    norms: &[SectionNorm],
    p: u32,
    j: usize,
    k: usize,
    settings: QuadratureSettings,
) -> Result<Complex64> {
    let Some(pt) = model.perturbation() else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let [a, b] = pt.support;
    let panels = (settings.bridge_nodes / 16).max(1);
    let per = (settings.bridge_nodes / panels).max(1);
    let rule = composite_gauss(per, panels, a, b)?;
    let n_theta = settings.angular_nodes;
    let dtheta = 2.0 * PI / n_theta as f64;
    let angular: Complex64 = (0..n_theta)
        .map(|q| {
            let th = q as f64 * dtheta;
            Complex64::from_polar(dtheta * (f64::from(pt.mode) * th).cos(), (j as f64 - k as f64) * th)
        })
        .sum();
    let pot = model.potential();
    let shift = norms[j - 1].ln_norm() + norms[k - 1].ln_norm();
    let half = 0.5 * (j + k) as f64;
    let radial = rule.integrate(|s| (half * s - f64::from(p) * pot.phi(s) - shift).exp() * pt.tau * pt.bump(s));
    Ok(angular * radial)
}

/// Gram data at the model's own quadrature resolution.
pub fn gram_matrix(model: &SurfaceModel, p: u32) -> Result<GramData> {
    gram_matrix_with(model, p, model.quadrature())
}

pub fn gram_matrix_with(model: &SurfaceModel, p: u32, settings: QuadratureSettings) -> Result<GramData> {
    let d = dimension(model, p)?;
    let basis = ModelBasis::new(p)?;
    let norms: Vec<SectionNorm> = (1..=d).into_par_iter().map(|j| norm_data(model, &basis, j)).collect::<Result<_>>()?;
    let mut delta = DMatrix::<f64>::zeros(d, d);
    let mode = match model.perturbation() {
        None => GramMode::Symmetric,
        Some(pt) => {
            let m = pt.mode as usize;
            for j in 1..=d {
                let k = j + m;
                if k > d {
                    break;
                }
                let v = perturbation_entry(model, &norms, p, j, k, settings)?;
                delta[(j - 1, k - 1)] = v.re;
                delta[(k - 1, j - 1)] = v.re;
            }
            GramMode::Perturbed
        }
    };
    let (chol, inv_minus_id) = if mode == GramMode::Perturbed {
        let g = DMatrix::<f64>::identity(d, d) + &delta;
        let chol = Cholesky::new(g).ok_or_else(|| {
            Error::Factorization("normalized Gram matrix is not positive definite; refine the quadrature".into())
        })?;
        let inv = chol.inverse();
        let e = -(&inv * &delta);
        (Some(chol), Some(e))
    } else {
        (None, None)
    };
    Ok(GramData { p, k: model.k(), mode, norms, delta, chol, inv_minus_id })
}

impl GramData {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn mode(&self) -> GramMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.norms.len()
    }

    pub fn norms(&self) -> &[SectionNorm] {
        &self.norms
    }

    pub fn norm(&self, j: usize) -> &SectionNorm {
        &self.norms[j - 1]
    }

    /// Off-diagonal part of the normalized Gram matrix.
    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn normalized(&self) -> DMatrix<f64> {
        DMatrix::<f64>::identity(self.dim(), self.dim()) + &self.delta
    }

    /// `Ghat^{-1} - I`, computed without cancellation against the identity.
    pub fn inverse_minus_identity(&self) -> DMatrix<f64> {
        match &self.inv_minus_id {
            Some(e) => e.clone(),
            None => DMatrix::zeros(self.dim(), self.dim()),
        }
    }

    /// `<z^j, z^k>` (real in this model).
    pub fn entry(&self, j: usize, k: usize) -> LogReal {
        let scale = LogReal::from_ln(self.norm(j).ln_norm() + self.norm(k).ln_norm());
        if j == k {
            self.norm(j).norm_sq
        } else {
            scale * LogReal::from_f64(self.delta[(j - 1, k - 1)])
        }
    }

    /// Number of positive eigenvalues of the normalized Gram matrix.
    pub fn positive_eigenvalues(&self) -> usize {
        self.normalized().symmetric_eigenvalues().iter().filter(|&&x| x > 0.0).count()
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.chol {
            Some(c) => c.solve(rhs),
            None => rhs.clone(),
        }
    }

    /// Log of `z^j / ||z^j||` magnitudes and the common shift.
    fn scaled_monomials(&self, z: Complex64) -> (DVector<f64>, DVector<f64>, f64) {
        let ln_r = z.norm().ln();
        let th = z.arg();
        let logs: Vec<f64> = self.norms.iter().map(|n| n.j as f64 * ln_r - n.ln_norm()).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let re = DVector::from_iterator(self.dim(), logs.iter().enumerate().map(|(i, l)| (l - m).exp() * ((i + 1) as f64 * th).cos()));
        let im = DVector::from_iterator(self.dim(), logs.iter().enumerate().map(|(i, l)| (l - m).exp() * ((i + 1) as f64 * th).sin()));
        (re, im, m)
    }

    /// `sum_{j,k} z^j (G^{-1})_{jk} conj(z)^k` in the log domain (the kernel in the frame `1`).
    pub fn ln_frame_kernel(&self, z: Complex64) -> f64 {
        match self.mode {
            GramMode::Symmetric => {
                let s = 2.0 * z.norm().ln();
                let logs: Vec<f64> = self.norms.iter().map(|n| n.j as f64 * s - n.norm_sq.log_magnitude()).collect();
                log_sum_exp(&logs)
            }
            GramMode::Perturbed => {
                let (re, im, m) = self.scaled_monomials(z);
                let val = re.dot(&self.solve(&re)) + im.dot(&self.solve(&im));
                val.ln() + 2.0 * m
            }
        }
    }

    /// `B_p(z)` for `z != 0`.
    pub fn kernel(&self, model: &SurfaceModel, z: Complex64) -> Result<LogReal> {
        if z.norm() == 0.0 || !z.norm().is_finite() {
            return Err(Error::Domain("kernel requires a finite point z != 0".into()));
        }
        let s = 2.0 * z.norm().ln();
        Ok(LogReal::from_ln(self.ln_frame_kernel(z) - f64::from(self.p) * model.potential().phi(s)))
    }

    /// Moments of the frame kernel `K(z) = sum u_j (G^{-1})_{jk} conj(u_k)`, `u_j = z^j`:
    /// `(ln K, z dK/dz / K, |z|^2 d^2K/dz dzbar / K)`.
    pub fn kernel_moments(&self, z: Complex64) -> (f64, Complex64, f64) {
        let (re, im, m) = self.scaled_monomials(z);
        let idx = DVector::from_iterator(self.dim(), (1..=self.dim()).map(|j| j as f64));
        let (jre, jim) = (re.component_mul(&idx), im.component_mul(&idx));
        let (mr, mi) = (self.solve(&re), self.solve(&im));
        let k0 = re.dot(&mr) + im.dot(&mi);
        // sum j u_j M conj(u_k) with u = re + i im
        let k1 = Complex64::new(jre.dot(&mr) + jim.dot(&mi), jim.dot(&mr) - jre.dot(&mi));
        let k2 = jre.dot(&self.solve(&jre)) + jim.dot(&self.solve(&jim));
        (k0.ln() + 2.0 * m, k1 / k0, k2 / k0)
    }

    /// `K(z e^{ds/2 + i dtheta}) / K(z)` without forming either kernel.
    pub fn kernel_ratio(&self, z: Complex64, ds: f64, dtheta: f64) -> f64 {
        let (re, im, _) = self.scaled_monomials(z);
        let val = |re: &DVector<f64>, im: &DVector<f64>| re.dot(&self.solve(re)) + im.dot(&self.solve(im));
        let base = val(&re, &im);
        let mut sr = re.clone();
        let mut si = im.clone();
        for i in 0..self.dim() {
            let j = (i + 1) as f64;
            let g = Complex64::new(re[i], im[i]) * Complex64::from_polar((0.5 * j * ds).exp(), j * dtheta);
            sr[i] = g.re;
            si[i] = g.im;
        }
        val(&sr, &si) / base
    }

    /// Coordinates in the normalized monomials `e_j` of `sum_i xi_i sigma_i`, where
    /// `sigma = L^{-1} e` is the orthonormal basis from `Ghat = L L^T`.
    pub fn orthonormal_to_normalized(&self, xi: &[Complex64]) -> Vec<Complex64> {
        match &self.chol {
            None => xi.to_vec(),
            Some(c) => {
                let lt = c.l().transpose();
                let re = DVector::from_iterator(xi.len(), xi.iter().map(|x| x.re));
                let im = DVector::from_iterator(xi.len(), xi.iter().map(|x| x.im));
                let re = lt.solve_upper_triangular(&re).expect("nonsingular factor");
                let im = lt.solve_upper_triangular(&im).expect("nonsingular factor");
                re.iter().zip(im.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect()
            }
        }
    }

    /// Two-point kernel `sum_{j,k} x^j (G^{-1})_{jk} conj(y)^k` as (log magnitude, phase).
    pub fn kernel_two_point(&self, x: Complex64, y: Complex64) -> (LogReal, f64) {
        let (xr, xi, mx) = self.scaled_monomials(x);
        let (yr, yi, my) = self.scaled_monomials(y);
        // conj(y) components
        let (gr, gi) = (self.solve(&yr), self.solve(&(-yi)));
        let re = xr.dot(&gr) - xi.dot(&gi);
        let im = xr.dot(&gi) + xi.dot(&gr);
        let v = Complex64::new(re, im);
        (LogReal::from_ln(v.norm().ln() + mx + my), v.arg())
    }
}

/// `B_p(z)`, assembling Gram data on the fly.
pub fn global_kernel(model: &SurfaceModel, p: u32, z: Complex64) -> Result<LogReal> {
    gram_matrix(model, p)?.kernel(model, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp_surface::{build_surface, BridgeKind, Perturbation};

    #[test]
    fn inversion_symmetry_of_norms() {
        let m = SurfaceModel::standard(1).unwrap();
        let g = gram_matrix(&m, 40).unwrap();
        for j in 1..40 {
            let a = g.norm(j).norm_sq;
            let b = g.norm(40 - j).norm_sq;
            assert!(a.rel_diff(b) < 1e-10, "j={j}");
        }
    }

    #[test]
    fn left_cusp_term_dominates_first_norm() {
        let m = SurfaceModel::standard(1).unwrap();
        let basis = ModelBasis::new(60).unwrap();
        let n = section_norm(&m, 60, 1).unwrap();
        let (_, q) = reg_gamma_pair(59.0, 4.0).unwrap();
        let cusp = LogReal::from_ln(-basis.ln_coeff_sq(1)) * q;
        assert!(n.rel_diff(cusp) < 1e-15);
    }

    #[test]
    fn index_checks() {
        let m = SurfaceModel::standard(1).unwrap();
        assert!(matches!(section_norm(&m, 10, 10), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(section_norm(&m, 10, 0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn zero_amplitude_matches_symmetric() {
        let m0 = SurfaceModel::standard(1).unwrap();
        let pt = Perturbation { tau: 0.0, support: [-2.0, 2.0], mode: 1 };
        let m1 = build_surface(1, None, BridgeKind::Quadratic, Some(pt), Default::default()).unwrap();
        let g0 = gram_matrix(&m0, 12).unwrap();
        let g1 = gram_matrix(&m1, 12).unwrap();
        for j in 1..12 {
            for k in 1..12 {
                let (a, b) = (g0.entry(j, k), g1.entry(j, k));
                assert!(a.rel_diff(b) <= 1e-12 || (a.is_zero() && b.is_zero()));
            }
        }
        let z = Complex64::new(0.01, 0.02);
        assert!(g0.kernel(&m0, z).unwrap().rel_diff(g1.kernel(&m1, z).unwrap()) < 1e-12);
    }

    #[test]
    fn single_section_lower_bound() {
        let m = SurfaceModel::standard(1).unwrap();
        let g = gram_matrix(&m, 20).unwrap();
        for &s in &[-30.0, -6.0, -1.0, 0.5, 7.0] {
            let z = Complex64::new((0.5 * s as f64).exp(), 0.0);
            let b = g.kernel(&m, z).unwrap().log_magnitude();
            for n in g.norms() {
                let single = n.j as f64 * s - 20.0 * m.potential().phi(s) - n.norm_sq.log_magnitude();
                assert!(b >= single - 1e-12);
            }
        }
    }
}
