//! Fubini-Study pullback densities and the correction `eta_p`.

use super::quotient::CuspComparison;
use crate::cusp_surface::{GramData, GramMode, SurfaceModel};
use crate::disc_model::{DiscWeights, ModelBasis};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Density of `(1/p) J^* omega_FS` in the coordinates `ds dtheta`, and its
/// distance from the model density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FsPoint {
    pub s: f64,
    pub theta: f64,
    pub density: f64,
    pub model_density: Option<f64>,
    pub defect: Option<f64>,
}

/// Relative agreement demanded between the series and the finite-difference Laplacian.
pub const DIFFERENTIATION_TOLERANCE: f64 = 1e-6;
/// Absolute noise floor of the five-point stencil on `ln(K(z')/K(z))`.
const FD_NOISE: f64 = 1e-10;
const FD_STEP: f64 = 1e-2;

/// `|z|^2 d^2/dz dzbar ln K` from the series moments.
fn series_laplacian(gram: &GramData, z: Complex64) -> f64 {
    let (_, m1, m2) = gram.kernel_moments(z);
    m2 - m1.norm_sqr()
}

/// The same quantity from five-point stencils in `s` and `theta`.
fn stencil_laplacian(gram: &GramData, z: Complex64, radial: bool) -> f64 {
    let h = FD_STEP;
    let g = |ds: f64, dt: f64| gram.kernel_ratio(z, ds, dt).ln();
    let five = |f: &dyn Fn(f64) -> f64| (-f(2.0 * h) + 16.0 * f(h) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h);
    let gss = five(&|x| g(x, 0.0));
    if radial {
        gss
    } else {
        gss + 0.25 * five(&|x| g(0.0, x))
    }
}

/// Pullback density at `z` with the instability check.
pub fn fs_pullback_at(model: &SurfaceModel, gram: &GramData, z: Complex64) -> Result<FsPoint> {
    if z.norm() == 0.0 || !z.norm().is_finite() {
        return Err(Error::Domain("pullback density requires a finite point z != 0".into()));
    }
    let pf = f64::from(gram.p());
    let series = series_laplacian(gram, z);
    let fd = stencil_laplacian(gram, z, gram.mode() == GramMode::Symmetric);
    if (series - fd).abs() > DIFFERENTIATION_TOLERANCE * series.abs() + FD_NOISE {
        return Err(Error::Differentiation { series, fd });
    }
    let s = 2.0 * z.norm().ln();
    let density = series / (2.0 * PI * pf);
    let (model_density, defect) = if s < 0.0 {
        let w = DiscWeights::new(gram.p(), s)?;
        let md = w.variance() / (2.0 * PI * pf);
        let defect = if s <= -model.s0() && gram.mode() == GramMode::Symmetric {
            // the difference of variances is (log quotient)''
            CuspComparison::new(model, gram).log_quotient_dd(s)?.abs() / (2.0 * PI * pf)
        } else {
            (density - md).abs()
        };
        (Some(md), Some(defect))
    } else {
        (None, None)
    };
    Ok(FsPoint { s, theta: z.arg(), density, model_density, defect })
}

/// Radial form: the point `z = e^{s/2}`.
pub fn fs_pullback(model: &SurfaceModel, gram: &GramData, s: f64) -> Result<FsPoint> {
    fs_pullback_at(model, gram, Complex64::new((0.5 * s).exp(), 0.0))
}

/// `eta_p = (1/2pi) |z|^{-2} d^2/ds^2 log(B_model / B_p)` in the cusp, with its
/// limit value at `z = 0`.
pub fn eta_p(c: &CuspComparison, z: Complex64) -> Result<f64> {
    if z.norm() == 0.0 {
        return eta_at_puncture(c);
    }
    let s = 2.0 * z.norm().ln();
    let dd = c.log_quotient_dd(s)?;
    Ok(-dd / (2.0 * PI * z.norm_sqr()))
}

/// `-(1/2pi) d/dx log quotient` at `x = |z|^2 = 0`.
fn eta_at_puncture(c: &CuspComparison) -> Result<f64> {
    if c.epsilon_dense().is_some() {
        return Err(Error::Domain("puncture limit of eta is available in symmetric mode only".into()));
    }
    let p = c.p();
    let basis = ModelBasis::new(p)?;
    let e1 = c.epsilon_diag(1).to_f64();
    let e2 = c.epsilon_diag(2).to_f64();
    let ratio = (basis.ln_coeff_sq(2) - basis.ln_coeff_sq(1)).exp();
    let slope = ratio * (e2 - e1) / (1.0 + e1);
    Ok(-slope / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp_surface::gram_matrix;

    #[test]
    fn self_comparison_eta_vanishes() {
        let c = CuspComparison::self_model(30, 4.0);
        assert_eq!(eta_p(&c, Complex64::new(0.01, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn deep_cusp_density_matches_model() {
        let m = SurfaceModel::standard(1).unwrap();
        let g = gram_matrix(&m, 30).unwrap();
        let pt = fs_pullback(&m, &g, -30.0).unwrap();
        assert!(pt.defect.unwrap() <= 1e-6 * pt.density);
    }

    #[test]
    fn puncture_limit_is_continuous() {
        let m = SurfaceModel::standard(1).unwrap();
        let g = gram_matrix(&m, 20).unwrap();
        let c = CuspComparison::new(&m, &g);
        let at0 = eta_p(&c, Complex64::new(0.0, 0.0)).unwrap();
        let near = eta_p(&c, Complex64::new((-30f64).exp(), 0.0)).unwrap();
        assert!((at0 - near).abs() <= 1e-6 * at0.abs().max(1e-300), "{at0} {near}");
    }
}
