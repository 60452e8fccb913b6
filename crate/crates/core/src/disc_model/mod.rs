//! The punctured-disc model: orthonormal monomials `c_l z^l` for the weight
//! `|log|z|^2|^p` and the Poincare area form, and the kernel series built from them.

mod series;

pub use series::{DiscWeights, SeriesOptions};

use crate::error::{Error, Result};
use crate::numerics::{ln_factorial, reg_gamma_upper, LogReal};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Orthonormal coefficients `c_l^2 = l^{p-1} / (2 pi (p-2)!)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelBasis {
    p: u32,
    ln_norm: f64,
}

impl ModelBasis {
    pub fn new(p: u32) -> Result<Self> {
        if p < 2 {
            return Err(Error::Domain(format!("tensor power must satisfy p >= 2, got {p}")));
        }
        Ok(ModelBasis { p, ln_norm: (2.0 * PI).ln() + ln_factorial(u64::from(p) - 2) })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// `ln(2 pi (p-2)!)`.
    pub fn ln_norm(&self) -> f64 {
        self.ln_norm
    }

    /// `ln c_l^2`.
    pub fn ln_coeff_sq(&self, l: u64) -> f64 {
        f64::from(self.p - 1) * (l as f64).ln() - self.ln_norm
    }

    pub fn coeff(&self, l: u64) -> Result<LogReal> {
        if l < 1 {
            return Err(Error::Domain("coefficient index must satisfy l >= 1".into()));
        }
        Ok(LogReal::from_ln(0.5 * self.ln_coeff_sq(l)))
    }
}

/// `c_l^(p)` in the log domain.
pub fn model_coeff(p: u32, l: u64) -> Result<LogReal> {
    ModelBasis::new(p)?.coeff(l)
}

/// Diagonal model kernel with its truncation record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelEvaluation {
    pub log_value: LogReal,
    pub terms_used: usize,
    pub certified_relative_tail: f64,
}

fn check_radius(z_abs: f64) -> Result<()> {
    if z_abs > 0.0 && z_abs < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("|z| must lie in (0, 1), got {z_abs}")))
    }
}

/// `B_p(z) = |log|z|^2|^p sum_l c_l^2 |z|^{2l}` with default tolerance `1e-12`.
pub fn model_kernel_diag(p: u32, z_abs: f64) -> Result<KernelEvaluation> {
    model_kernel_diag_with(p, z_abs, SeriesOptions::default())
}

pub fn model_kernel_diag_with(p: u32, z_abs: f64, opts: SeriesOptions) -> Result<KernelEvaluation> {
    check_radius(z_abs)?;
    let s = 2.0 * z_abs.ln();
    let w = DiscWeights::new_with(p, s, 0, opts)?;
    Ok(KernelEvaluation {
        log_value: LogReal::from_ln(f64::from(p) * (-s).ln() + w.ln_beta()),
        terms_used: w.terms_used(),
        certified_relative_tail: w.certified_relative_tail(),
    })
}

/// Two-point model kernel `(1/(2 pi (p-2)!)) sum_l l^{p-1} (x conj(y))^l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OffDiagonalKernel {
    pub log_magnitude: LogReal,
    pub phase: f64,
    pub terms_used: usize,
    /// Bound on the omitted mass relative to the sum of term magnitudes.
    pub certified_relative_tail: f64,
}

impl OffDiagonalKernel {
    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.log_magnitude.to_f64(), self.phase)
    }
}

pub fn model_kernel_offdiag(p: u32, x: Complex64, y: Complex64) -> Result<OffDiagonalKernel> {
    model_kernel_offdiag_with(p, x, y, SeriesOptions::default())
}

pub fn model_kernel_offdiag_with(p: u32, x: Complex64, y: Complex64, opts: SeriesOptions) -> Result<OffDiagonalKernel> {
    check_radius(x.norm())?;
    check_radius(y.norm())?;
    let basis = ModelBasis::new(p)?;
    let w = x * y.conj();
    let ln_r = w.norm().ln();
    let theta = w.arg();
    let a = f64::from(p - 1);
    // continuous maximum of l^a r^l bounds every term
    let l_star = (a / -ln_r).max(1.0);
    let shift = a * l_star.ln() + l_star * ln_r;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut cert = series::Certifier::new(a, ln_r, opts);
    let mut l = 0u64;
    loop {
        l += 1;
        let ln_t = a * (l as f64).ln() + l as f64 * ln_r;
        acc += Complex64::from_polar((ln_t - shift).exp(), l as f64 * theta);
        cert.push(ln_t);
        if let Some(tail) = cert.certified(l)? {
            let mag = acc.norm();
            let log_magnitude = if mag == 0.0 {
                LogReal::ZERO
            } else {
                LogReal::from_ln(mag.ln() + shift - basis.ln_norm())
            };
            return Ok(OffDiagonalKernel {
                log_magnitude,
                phase: acc.arg(),
                terms_used: l as usize,
                certified_relative_tail: tail,
            });
        }
    }
}

/// Mass of `c_l z^l` inside `|z| <= R`, equal to `Q(p-1, 2 l |log R|)`.
pub fn model_norm_restricted(p: u32, l: u64, radius: f64) -> Result<f64> {
    ModelBasis::new(p)?;
    if l < 1 {
        return Err(Error::Domain("index must satisfy l >= 1".into()));
    }
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(Error::Domain(format!("radius must lie in (0, 1], got {radius}")));
    }
    reg_gamma_upper(f64::from(p - 1), 2.0 * l as f64 * radius.ln().abs())
}

/// Flat-region deviation `2 pi B_p(z)/(p-1) - 1`.
///
/// Evaluated through the dual series `2 Re sum_{k>=1} (1 + 2 pi i k / t)^{-p}`,
/// `t = -log|z|^2`, which keeps full relative accuracy when the deviation is far
/// below rounding level of the direct series.
pub fn flat_region_deviation(p: u32, z_abs: f64) -> Result<f64> {
    check_radius(z_abs)?;
    ModelBasis::new(p)?;
    let t = -2.0 * z_abs.ln();
    let pf = f64::from(p);
    let mut sum = LogReal::ZERO;
    const CAP: usize = 1_000_000;
    for k in 1..=CAP {
        let u = 2.0 * PI * k as f64 / t;
        let ln_mag = -0.5 * pf * u.mul_add(u, 1.0).ln() + std::f64::consts::LN_2;
        let phase = -pf * u.atan();
        sum = sum + LogReal::from_ln(ln_mag) * LogReal::from_f64(phase.cos());
        // remaining terms are bounded by 2 sum_{j>k} (2 pi j / t)^{-p}
        let ln_tail = pf * (t / (2.0 * PI)).ln() - (pf - 1.0) * (k as f64).ln() - (pf - 1.0).ln()
            + std::f64::consts::LN_2;
        let reference = if sum.is_zero() { ln_mag } else { sum.log_magnitude() };
        if ln_tail < reference + (1e-15f64).ln() {
            return Ok(sum.to_f64());
        }
    }
    Err(Error::NonConvergence { what: "flat-region dual series".into(), achieved: f64::NAN })
}

/// Projective image of `z` under the first `n` model sections, with the pulled-back
/// Fubini-Study density of the full model embedding.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KodairaPoint {
    pub components: Vec<Complex64>,
    pub fs_density: f64,
}

pub fn model_kodaira(p: u32, z: Complex64, n: usize) -> Result<KodairaPoint> {
    check_radius(z.norm())?;
    if n < 2 {
        return Err(Error::Domain("projective dimension requires n >= 2".into()));
    }
    let basis = ModelBasis::new(p)?;
    let ln_r = z.norm().ln();
    let theta = z.arg();
    let logs: Vec<f64> = (1..=n as u64).map(|l| 0.5 * basis.ln_coeff_sq(l) + l as f64 * ln_r).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let components: Vec<Complex64> = logs
        .iter()
        .enumerate()
        .map(|(i, &lg)| Complex64::from_polar((lg - m).exp(), (i + 1) as f64 * theta))
        .collect();
    if components.iter().all(|c| c.norm() == 0.0) {
        return Err(Error::Domain("all projective components underflow".into()));
    }
    let w = DiscWeights::new(p, 2.0 * ln_r)?;
    Ok(KodairaPoint { components, fs_density: w.variance() / (2.0 * PI) })
}

/// Quadrature of `int |log|y|^2|^p beta_p(x, y) y^l omega(y)` over the punctured disc.
///
/// The radial variable is mapped by `u = -2 l log|y|`, which turns the Poincare
/// measure into `l du dtheta / u^2`; the angle uses an `angular_nodes` trapezoid rule.
/// The exact value is `x^l`.
pub fn reproducing_quadrature(p: u32, l: u64, x: Complex64, angular_nodes: usize) -> Result<Complex64> {
    check_radius(x.norm())?;
    ModelBasis::new(p)?;
    if l < 1 {
        return Err(Error::Domain("index must satisfy l >= 1".into()));
    }
    let lf = l as f64;
    let pf = f64::from(p);
    let n = angular_nodes.max(8);
    let dtheta = 2.0 * PI / n as f64;
    let integrand = |u: f64| -> Result<Complex64> {
        if u <= 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let t = (-u / (2.0 * lf)).exp();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let y = Complex64::from_polar(t, i as f64 * dtheta);
            acc += model_kernel_offdiag(p, x, y)?.to_complex() * y.powu(l as u32);
        }
        // |log|y|^2|^p * l / u^2 with |log|y|^2| = u / l
        let factor = (pf * (u / lf).ln() + lf.ln() - 2.0 * u.ln()).exp();
        Ok(acc * dtheta * factor)
    };
    let upper = 2.0 * pf + 80.0;
    let scale = x.norm().powi(l as i32);
    let opts = crate::numerics::AdaptiveOptions { rel_tol: 1e-11, abs_tol: 1e-14 * scale, ..Default::default() };
    let failure = std::cell::Cell::new(None);
    let part = |f: fn(Complex64) -> f64| {
        crate::numerics::integrate_adaptive(
            |u| match integrand(u) {
                Ok(v) => f(v),
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            0.0,
            upper,
            opts,
        )
    };
    let re = part(|v| v.re)?;
    let im = part(|v| v.im)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(Complex64::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients() {
        assert!((model_coeff(2, 1).unwrap().to_f64() - (1.0 / (2.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((model_coeff(3, 2).unwrap().to_f64() - (4.0 / (2.0 * PI)).sqrt()).abs() < 1e-15);
        let c = model_coeff(100, 1).unwrap().log_magnitude();
        assert!((c + 0.5 * ((2.0 * PI).ln() + ln_factorial(98))).abs() < 1e-12);
        assert!(model_coeff(1, 1).is_err());
        assert!(model_coeff(5, 0).is_err());
    }

    #[test]
    fn flat_value_at_half() {
        let k = model_kernel_diag(100, 0.5).unwrap();
        assert!((k.log_value.to_f64() - 99.0 / (2.0 * PI)).abs() < 1e-3);
        assert!(k.certified_relative_tail <= 1e-12);
    }

    #[test]
    fn single_term_lower_bound() {
        for &(p, r) in &[(2, 0.5), (10, 0.01), (60, 0.3), (200, 0.9)] {
            let k = model_kernel_diag(p, r).unwrap();
            let s = 2.0 * f64::ln(r);
            let first = f64::from(p) * (-s).ln() + ModelBasis::new(p).unwrap().ln_coeff_sq(1) + s;
            assert!(k.log_value.log_magnitude() >= first);
        }
    }

    #[test]
    fn restricted_norm_closed_form() {
        assert_eq!(model_norm_restricted(7, 3, 1.0).unwrap(), 1.0);
        let v = model_norm_restricted(3, 1, (-1f64).exp()).unwrap();
        assert!((v - 3.0 * (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn nonconvergence_near_unit_circle() {
        let opts = SeriesOptions { tolerance: 1e-12, max_terms: 1000 };
        assert!(matches!(model_kernel_diag_with(50, 0.9999, opts), Err(Error::NonConvergence { .. })));
        assert!(model_kernel_diag(50, 1.0).is_err());
    }

    #[test]
    fn kodaira_components() {
        let z = Complex64::new(0.3, 0.0);
        let pt = model_kodaira(10, z, 12).unwrap();
        let direct: Vec<f64> = (1..=12u64).map(|l| model_coeff(10, l).unwrap().to_f64() * 0.3f64.powi(l as i32)).collect();
        let m = direct.iter().copied().fold(0.0, f64::max);
        for (c, d) in pt.components.iter().zip(&direct) {
            assert!((c.re - d / m).abs() <= 1e-12 * (d / m));
        }
    }
}
