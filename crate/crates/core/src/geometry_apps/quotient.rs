//! The quotient `B_p / B_p^model` on the cusp and its `z`-derivatives.
//!
//! With normalized model weights `w_q = c_q^2 e^{q s} / beta(s)` and the matrix
//! `eps_{qs}` defined by `(G^{-1})_{qs} = c_q c_s (delta_{qs} + eps_{qs})`,
//!
//! `quotient - 1 = sum_{q,s <= d} eps_{qs} sqrt(w_q w_s) e^{i(q-s) theta} - sum_{q > d} w_q`.
//!
//! Derivatives in `z` multiply each term by `K_1(q) / z` or `K_2(q) / z^2` with
//! `K_1 = q - mu`, `K_2 = (q - mu)^2 - sigma^2 - (q - mu)`, where `mu`, `sigma^2` are the
//! mean and variance of the weights.
//!
//! In symmetric mode the sums are pivoted on `eps_1`: since `sum w_q = 1` and the kernels
//! have zero mean, `quotient - 1 = eps_1 + sum_{2 <= q <= d} (eps_q - eps_1) w_q
//! - (1 + eps_1) sum_{q > d} w_q`, and the constant part carries no rounding from `s`.

use crate::cusp_surface::{GramData, GramMode, SurfaceModel};
use crate::disc_model::DiscWeights;
use crate::error::{Error, Result};
use crate::numerics::LogReal;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Comparison data between a surface (or the model itself) and the disc model.
#[derive(Clone, Debug)]
pub struct CuspComparison {
    p: u32,
    s0: f64,
    /// Highest monomial index present on the surface; `None` for the model itself.
    top: Option<usize>,
    diag: Vec<LogReal>,
    dense: Option<DMatrix<f64>>,
}

impl CuspComparison {
    pub fn new(model: &SurfaceModel, gram: &GramData) -> Self {
        let d = gram.dim();
        let diag: Vec<LogReal> = gram.norms().iter().map(|n| -(n.defect / (LogReal::ONE + n.defect))).collect();
        let dense = match gram.mode() {
            GramMode::Symmetric => None,
            GramMode::Perturbed => {
                let e = gram.inverse_minus_identity();
                let scale: Vec<f64> = gram.norms().iter().map(|n| (1.0 + n.defect.to_f64()).sqrt()).collect();
                let mut eps = DMatrix::<f64>::zeros(d, d);
                for q in 0..d {
                    for s in 0..d {
                        eps[(q, s)] = if q == s {
                            ((LogReal::from_f64(e[(q, q)]) - gram.norms()[q].defect)
                                / (LogReal::ONE + gram.norms()[q].defect))
                                .to_f64()
                        } else {
                            e[(q, s)] / (scale[q] * scale[s])
                        };
                    }
                }
                Some(eps)
            }
        };
        CuspComparison { p: gram.p(), s0: model.s0(), top: Some(d), diag, dense }
    }

    /// The model compared with itself: `eps = 0` and no upper cut-off.
    pub fn self_model(p: u32, s0: f64) -> Self {
        CuspComparison { p, s0, top: None, diag: Vec::new(), dense: None }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// `eps_{qq}` for `q <= d`.
    pub fn epsilon_diag(&self, q: usize) -> LogReal {
        match &self.dense {
            Some(e) => LogReal::from_f64(e[(q - 1, q - 1)]),
            None => self.diag.get(q - 1).copied().unwrap_or(LogReal::ZERO),
        }
    }

    pub fn epsilon_dense(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref()
    }

    fn check_region(&self, z: Complex64) -> Result<f64> {
        let s = 2.0 * z.norm().ln();
        if !(s.is_finite()) || s > -self.s0 * (1.0 - 1e-12) {
            return Err(Error::Region { s, limit: -self.s0 });
        }
        Ok(s)
    }

    fn weights(&self, s: f64) -> Result<DiscWeights> {
        match self.top {
            Some(d) => DiscWeights::with_upper_block(self.p, s, d as u64 + 1),
            None => DiscWeights::new(self.p, s),
        }
    }

    /// Series `sum eps_{qs} sqrt(w_q w_s) e^{i(q-s)theta} K(q) - sum_{q>d} w_q K(q)` for a
    /// real kernel `K` with zero mean under the weights, with the radial part kept in the
    /// log domain.
    fn series<K: Fn(f64) -> f64>(&self, w: &DiscWeights, theta: f64, kern: K) -> Complex64 {
        let Some(d) = self.top else {
            return Complex64::new(0.0, 0.0);
        };
        let mut terms: Vec<LogReal> = Vec::new();
        let mut im = 0.0;
        match &self.dense {
            None => {
                let e1 = self.diag[0];
                for q in 2..=d {
                    let lw = w.ln_weight(q as u64);
                    if lw == f64::NEG_INFINITY {
                        break;
                    }
                    terms.push((self.diag[q - 1] - e1) * LogReal::from_ln(lw) * LogReal::from_f64(kern(q as f64)));
                }
            }
            Some(eps) => {
                let half: Vec<f64> = (1..=d).map(|q| (0.5 * w.ln_weight(q as u64)).exp()).collect();
                let mut re = 0.0;
                for q in 0..d {
                    if half[q] == 0.0 {
                        continue;
                    }
                    let kq = kern((q + 1) as f64);
                    for s in 0..d {
                        let v = eps[(q, s)] * half[q] * half[s] * kq;
                        let ph = (q as f64 - s as f64) * theta;
                        re += v * ph.cos();
                        im += v * ph.sin();
                    }
                }
                terms.push(LogReal::from_f64(re));
            }
        }
        let upper = match &self.dense {
            None => -(LogReal::ONE + self.diag[0]),
            Some(_) => -LogReal::ONE,
        };
        for (q, lw) in w.ln_weights().skip(d) {
            terms.push(upper * LogReal::from_ln(lw) * LogReal::from_f64(kern(q as f64)));
        }
        let re: LogReal = terms.into_iter().sum();
        Complex64::new(re.to_f64(), im)
    }

    /// `B_p / B_p^model - 1` in the log domain (real part in perturbed mode).
    pub fn quotient_minus_one(&self, z: Complex64) -> Result<LogReal> {
        let s = self.check_region(z)?;
        let w = self.weights(s)?;
        let Some(d) = self.top else {
            return Ok(LogReal::ZERO);
        };
        match &self.dense {
            None => {
                let e1 = self.diag[0];
                let upper = -(LogReal::ONE + e1);
                let mut terms: Vec<LogReal> = Vec::with_capacity(w.terms_used());
                terms.push(e1);
                for (q, lw) in w.ln_weights().skip(1) {
                    let wq = LogReal::from_ln(lw);
                    terms.push(if (q as usize) <= d { (self.diag[q as usize - 1] - e1) * wq } else { upper * wq });
                }
                Ok(terms.into_iter().sum())
            }
            Some(_) => Ok(LogReal::from_f64(self.series(&w, z.arg(), |_| 1.0).re)),
        }
    }

    pub fn quotient(&self, z: Complex64) -> Result<f64> {
        Ok(1.0 + self.quotient_minus_one(z)?.to_f64())
    }

    /// `d^order/dz^order` of the quotient, `order` in `{1, 2}`.
    pub fn derivative(&self, z: Complex64, order: u32) -> Result<Complex64> {
        let s = self.check_region(z)?;
        let w = self.weights(s)?;
        let mu = w.mean();
        let var = w.variance();
        let v = match order {
            1 => self.series(&w, z.arg(), |q| q - mu) / z,
            2 => self.series(&w, z.arg(), |q| (q - mu) * (q - mu) - var - (q - mu)) / (z * z),
            _ => return Err(Error::Domain(format!("derivative order must be 1 or 2, got {order}"))),
        };
        Ok(v)
    }

    /// First and second `s`-derivatives of the quotient (radial case).
    pub fn s_derivatives(&self, s: f64) -> Result<(LogReal, LogReal, LogReal)> {
        let z = Complex64::new((0.5 * s).exp(), 0.0);
        self.check_region(z)?;
        let w = self.weights(s)?;
        let mu = w.mean();
        let var = w.variance();
        let q0 = self.quotient_minus_one(z)?;
        let q1 = LogReal::from_f64(self.series(&w, 0.0, |q| q - mu).re);
        let q2 = LogReal::from_f64(self.series(&w, 0.0, |q| (q - mu) * (q - mu) - var).re);
        Ok((q0, q1, q2))
    }

    /// `d^2/ds^2 log(quotient)` from the series derivatives.
    pub fn log_quotient_dd(&self, s: f64) -> Result<f64> {
        let (q0, q1, q2) = self.s_derivatives(s)?;
        let q = LogReal::ONE + q0;
        let a = q2 / q;
        let b = (q1 / q).powi(2);
        Ok((a - b).to_f64())
    }
}

/// Quotient through the chain rule on the separately normalized numerator and
/// denominator means (symmetric mode only): `Q' = Q (mu_K - mu_beta)`,
/// `Q'' = Q ((mu_K - mu_beta)^2 + var_K - var_beta)`.
pub fn radial_path_derivatives(model: &SurfaceModel, gram: &GramData, s: f64) -> Result<(f64, f64, f64)> {
    if gram.mode() != GramMode::Symmetric {
        return Err(Error::Domain("radial path requires symmetric mode".into()));
    }
    let w = DiscWeights::new(gram.p(), s)?;
    let gauge = f64::from(gram.p()) * model.potential().gauge();
    let logs: Vec<f64> = gram.norms().iter().map(|n| n.j as f64 * s - n.norm_sq.log_magnitude() - gauge).collect();
    let lk = crate::numerics::log_sum_exp(&logs);
    let v: Vec<f64> = logs.iter().map(|l| (l - lk).exp()).collect();
    let mu_k: f64 = v.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
    let var_k: f64 = v.iter().enumerate().map(|(i, x)| ((i + 1) as f64 - mu_k).powi(2) * x).sum();
    let diff = mu_k - w.mean();
    let q = (lk - w.ln_beta()).exp();
    Ok((q, q * diff, q * (diff * diff + var_k - w.variance())))
}

/// Finite-difference derivatives with error estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteDifference {
    pub first: f64,
    pub second: f64,
    pub first_error: f64,
    pub second_error: f64,
}

impl FiniteDifference {
    /// Both estimated errors are within `rel` of their values.
    pub fn is_stable(&self, rel: f64) -> bool {
        self.first_error <= rel * self.first.abs() && self.second_error <= rel * self.second.abs()
    }
}

/// Central differences of `quotient - 1` in `s`, Richardson extrapolated. The error estimate
/// is the gap between two extrapolation levels plus a rounding term for the stencil.
pub fn finite_difference_s(c: &CuspComparison, s: f64) -> Result<FiniteDifference> {
    let f = |x: f64| -> Result<f64> { Ok(c.quotient_minus_one(Complex64::new((0.5 * x).exp(), 0.0))?.to_f64()) };
    let f0 = f(s)?;
    let d1 = |h: f64| -> Result<f64> { Ok((f(s + h)? - f(s - h)?) / (2.0 * h)) };
    let d2 = |h: f64| -> Result<f64> { Ok((f(s + h)? - 2.0 * f0 + f(s - h)?) / (h * h)) };
    let rich = |d: &dyn Fn(f64) -> Result<f64>, h: f64| -> Result<(f64, f64)> {
        let (a, b, c) = (d(h)?, d(0.5 * h)?, d(0.25 * h)?);
        Ok(((4.0 * c - b) / 3.0, (4.0 * b - a) / 3.0))
    };
    let (h1, h2) = (1e-3, 1e-2);
    let (first, first_coarse) = rich(&d1, h1)?;
    let (second, second_coarse) = rich(&d2, h2)?;
    let noise = 8.0 * (1.0 + s.abs()) * f64::EPSILON * f0.abs();
    Ok(FiniteDifference {
        first,
        second,
        first_error: (first - first_coarse).abs() / 15.0 + 2.0 * noise / h1,
        second_error: (second - second_coarse).abs() / 15.0 + 32.0 * noise / (h2 * h2),
    })
}

/// `d/dz` and `d^2/dz^2` of the quotient at a real point `z = e^{s/2}` by finite differences.
pub fn finite_difference_z(c: &CuspComparison, s: f64) -> Result<FiniteDifference> {
    let fd = finite_difference_s(c, s)?;
    let z = (0.5 * s).exp();
    Ok(FiniteDifference {
        first: fd.first / z,
        second: (fd.second - fd.first) / (z * z),
        first_error: fd.first_error / z,
        second_error: (fd.second_error + fd.first_error) / (z * z),
    })
}
