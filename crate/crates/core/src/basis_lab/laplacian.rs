//! The Kodaira Laplacian on cut-off monomials.
//!
//! In the cusp, `box_p (f e^p) = (-|z|^2 L^2 d^2f/dz dzbar - p zbar L df/dzbar) e^p`
//! with `L = log|z|^2`.

use super::{cutoff_eval, Cutoff, OrthoBasis, TruncationSchedule};
use crate::disc_model::ModelBasis;
use crate::error::{Error, Result};
use crate::numerics::{composite_gauss, integrate_log, ln_gamma, AdaptiveOptions, LogReal};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// `box_p phi_{0,l} = e^{ln_coeff} * bracket` at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KodairaValue {
    pub ln_coeff: f64,
    pub bracket: Complex64,
}

impl KodairaValue {
    pub fn to_complex(&self) -> Complex64 {
        self.bracket * self.ln_coeff.exp()
    }
}

/// Radial factor `B(t)` with `box_p phi_{0,l} = c_l z^l B(|z|)`.
fn radial_factor(p: u32, l: usize, cutoff: &Cutoff, t: f64) -> f64 {
    let lg = (t * t).ln();
    let d1 = cutoff_eval(cutoff, t, 1);
    let d2 = cutoff_eval(cutoff, t, 2);
    let lf = l as f64;
    -(2.0 * lf + 1.0) / 4.0 * t * lg * lg * d1 - 0.25 * t * t * lg * lg * d2 - 0.5 * f64::from(p) * t * lg * d1
}

/// Closed-form action on `c_l chi(|z|) z^l`.
pub fn kodaira_laplacian_apply(p: u32, l: usize, cutoff: &Cutoff, z: Complex64) -> Result<KodairaValue> {
    let t = z.norm();
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("Laplacian is evaluated on 0 < |z| < 1, got {t}")));
    }
    let ln_coeff = 0.5 * ModelBasis::new(p)?.ln_coeff_sq(l as u64);
    Ok(KodairaValue { ln_coeff, bracket: z.powu(l as u32) * radial_factor(p, l, cutoff, t) })
}

/// The operator applied to `chi(|z|) z^l` by central differences of step `h` in `x` and
/// `y`, with one Richardson step.
pub fn kodaira_laplacian_fd(p: u32, l: usize, cutoff: &Cutoff, z: Complex64, h: f64) -> Result<KodairaValue> {
    let t = z.norm();
    if !(t > 2.0 * h && t < 1.0) {
        return Err(Error::Domain(format!("finite differences need 2h < |z| < 1, got {t}")));
    }
    let f = |w: Complex64| w.powu(l as u32) * cutoff_eval(cutoff, w.norm(), 0);
    let lg = (t * t).ln();
    let pf = f64::from(p);
    let apply = |h: f64| {
        let (ex, ey) = (Complex64::new(h, 0.0), Complex64::new(0.0, h));
        let (fxp, fxm, fyp, fym, f0) = (f(z + ex), f(z - ex), f(z + ey), f(z - ey), f(z));
        let lap = (fxp + fxm + fyp + fym - f0 * 4.0) / (h * h);
        let dx = (fxp - fxm) / (2.0 * h);
        let dy = (fyp - fym) / (2.0 * h);
        let dbar = (dx + Complex64::i() * dy) * 0.5;
        -(t * t * lg * lg) * lap * 0.25 - z.conj() * (pf * lg) * dbar
    };
    let bracket = (apply(0.5 * h) * 4.0 - apply(h)) / 3.0;
    let ln_coeff = 0.5 * ModelBasis::new(p)?.ln_coeff_sq(l as u64);
    Ok(KodairaValue { ln_coeff, bracket })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LaplacianNorm {
    pub p: u32,
    pub l: usize,
    pub norm: LogReal,
    /// `ln(||box_p phi_{0,l}|| / p^2)`.
    pub ln_norm_over_p2: f64,
}

/// `||box_p phi_{0,l}||` by quadrature over the transition annulus.
pub fn laplacian_norm_bound(p: u32, l: usize, schedule: &TruncationSchedule, cutoff: &Cutoff) -> Result<LaplacianNorm> {
    let dp = schedule.delta_prime(p);
    if dp < 1 {
        return Err(Error::EmptySchedule { p, min_p: schedule.min_p_prime() });
    }
    if l < 1 || l as i64 > dp {
        return Err(Error::IndexOutOfRange { index: l, max: dp as usize });
    }
    let norm = laplacian_norm(p, l, cutoff)?;
    Ok(LaplacianNorm { p, l, norm, ln_norm_over_p2: norm.log_magnitude() - 2.0 * f64::from(p).ln() })
}

/// `||box_p phi_{0,l}||` without the schedule check.
pub(crate) fn laplacian_norm(p: u32, l: usize, cutoff: &Cutoff) -> Result<LogReal> {
    let (a, b) = cutoff.bridge();
    let ln_c2 = ModelBasis::new(p)?.ln_coeff_sq(l as u64);
    let pre = (4.0 * PI).ln() + ln_c2;
    let lf = l as f64;
    let sq = integrate_log(
        |t| {
            let bt = radial_factor(p, l, cutoff, t);
            let lg = (t * t).ln().abs();
            LogReal::from_f64(bt * bt) * LogReal::from_ln(pre + (2.0 * lf - 1.0) * t.ln() + f64::from(p - 2) * lg.ln())
        },
        a,
        b,
        AdaptiveOptions { rel_tol: 1e-12, ..Default::default() },
    )?;
    Ok(sq.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LaplacianLadder {
    pub p: Vec<u32>,
    pub l: usize,
    pub ln_norm_over_p2: Vec<f64>,
    /// `-(Delta ln(norm / p^2)) / Delta p` per step.
    pub rates: Vec<f64>,
    pub kappa: f64,
    /// Every rate is at least `0.8 kappa`.
    pub passes: bool,
}

pub fn laplacian_ladder(ladder: &[u32], l: usize, schedule: &TruncationSchedule, cutoff: &Cutoff) -> Result<LaplacianLadder> {
    let vals: Vec<f64> =
        ladder.iter().map(|&p| Ok(laplacian_norm_bound(p, l, schedule, cutoff)?.ln_norm_over_p2)).collect::<Result<_>>()?;
    let rates: Vec<f64> =
        ladder.windows(2).zip(vals.windows(2)).map(|(p, v)| -(v[1] - v[0]) / f64::from(p[1] - p[0])).collect();
    let passes = rates.iter().all(|&r| r >= 0.8 * schedule.kappa);
    Ok(LaplacianLadder { p: ladder.to_vec(), l, ln_norm_over_p2: vals, rates, kappa: schedule.kappa, passes })
}

/// `C_1 = lambda_min / p` from a Rayleigh-Ritz problem in one angular mode of the cusp,
/// with trial profiles that are polynomials of `degree` in `u = -2 l log|z|` orthogonal
/// to the holomorphic profile. The result does not depend on the mode.
pub fn spectral_gap_estimate(p: u32, degree: usize) -> Result<f64> {
    if p < 3 || degree < 1 {
        return Err(Error::Domain("spectral gap estimate needs p >= 3 and degree >= 1".into()));
    }
    let a = f64::from(p - 1);
    let (mu, sd) = (a, a.sqrt());
    let rule = composite_gauss(32, 24, (mu - 40.0 * sd).max(0.0), mu + 40.0 * sd)?;
    let lg = ln_gamma(a);
    let w: Vec<f64> = rule.nodes.iter().map(|&u| ((a - 1.0) * u.ln() - u - lg).exp()).collect();
    let x: Vec<f64> = rule.nodes.iter().map(|&u| (u - mu) / sd).collect();
    let mean = |k: i32| -> f64 { x.iter().zip(&w).zip(&rule.weights).map(|((xi, wi), qi)| xi.powi(k) * wi * qi).sum() };
    let means: Vec<f64> = (1..=degree as i32).map(mean).collect();
    let mut m = DMatrix::<f64>::zeros(degree, degree);
    let mut k = DMatrix::<f64>::zeros(degree, degree);
    for (&u, (&xi, (&wi, &qi))) in rule.nodes.iter().zip(x.iter().zip(w.iter().zip(&rule.weights))) {
        for i in 0..degree {
            let fi = xi.powi(i as i32 + 1) - means[i];
            let di = (i + 1) as f64 * xi.powi(i as i32) / sd;
            for j in 0..degree {
                let fj = xi.powi(j as i32 + 1) - means[j];
                let dj = (j + 1) as f64 * xi.powi(j as i32) / sd;
                m[(i, j)] += fi * fj * wi * qi;
                k[(i, j)] += di * dj * u * u * wi * qi;
            }
        }
    }
    let chol = m.cholesky().ok_or_else(|| Error::Factorization("trial mass matrix is singular".into()))?;
    let linv = chol.l().try_inverse().ok_or_else(|| Error::Factorization("trial factor is singular".into()))?;
    let s = &linv * k * linv.transpose();
    let lam = s.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(lam / f64::from(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapCheck {
    pub l: usize,
    pub correction: f64,
    pub laplacian_norm: f64,
    pub c1: f64,
    /// `2 ||box_p phi_{0,l}|| / (C_1 p)`.
    pub bound: f64,
    pub holds: bool,
}

impl OrthoBasis {
    /// `||phi_l - phi_{0,l}|| <= ||box_p phi_{0,l}|| / (C_1 p)` with `C_1` relaxed by 2.
    pub fn gap_consistency(&self, l: usize, degree: usize) -> Result<GapCheck> {
        if l < 1 || l > self.heads() {
            return Err(Error::IndexOutOfRange { index: l, max: self.heads() });
        }
        let p = self.p();
        let c1 = spectral_gap_estimate(p, degree)?;
        let lap = laplacian_norm(p, l, self.cutoff())?;
        let correction = self.correction_sq(l).sqrt();
        let bound = LogReal::from_f64(2.0 / (c1 * f64::from(p))) * lap;
        Ok(GapCheck {
            l,
            correction: correction.to_f64(),
            laplacian_norm: lap.to_f64(),
            c1,
            bound: bound.to_f64(),
            holds: correction.log_magnitude() <= bound.log_magnitude() || correction.is_zero(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_off_the_transition() {
        let c = Cutoff::standard();
        let (a, b) = c.bridge();
        for t in [0.5 * a, 1.5 * b] {
            let v = kodaira_laplacian_apply(20, 2, &c, Complex64::new(t, 0.0)).unwrap();
            assert_eq!(v.bracket, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn closed_form_matches_stencil() {
        let c = Cutoff::standard();
        let (a, b) = c.bridge();
        for frac in [0.2, 0.5, 0.8] {
            let z = Complex64::from_polar(a + frac * (b - a), 0.7);
            let exact = kodaira_laplacian_apply(20, 2, &c, z).unwrap().bracket;
            let fd = kodaira_laplacian_fd(20, 2, &c, z, 1e-4).unwrap().bracket;
            assert!((exact - fd).norm() <= 1e-5 * exact.norm(), "{exact} {fd}");
        }
    }

    #[test]
    fn gap_is_near_one() {
        let c1 = spectral_gap_estimate(200, 6).unwrap();
        assert!(c1 > 0.3 && c1 <= 1.0 + 1e-9, "{c1}");
    }
}
