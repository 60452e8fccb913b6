//! Zeros of Gaussian random sections.
//!
//! Sample `i` draws its coefficients from `ChaCha20Rng::seed_from_u64(seed)` switched to
//! stream `i`, so samples are independent of evaluation order and thread count.

use crate::cusp_surface::{GramData, SurfaceModel};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Largest relative backward error accepted after polishing.
pub const POLISH_TOLERANCE: f64 = 1e-10;
const MAX_POLISH_STEPS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroSample {
    pub id: u64,
    /// Gaussian coefficients in the orthonormal basis.
    pub coefficients: Vec<Complex64>,
    /// Zeros in `C*`.
    pub roots: Vec<Complex64>,
    pub order_at_zero: usize,
    pub order_at_infinity: usize,
    pub backward_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleFailure {
    pub sample: u64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroEnsemble {
    pub p: u32,
    pub k: u32,
    pub n_samples: usize,
    pub seed: u64,
    pub samples: Vec<ZeroSample>,
    pub failures: Vec<SampleFailure>,
}

impl ZeroEnsemble {
    /// Whether `order_at_zero + #roots + order_at_infinity = k p` for every sample.
    pub fn mass_conserved(&self) -> bool {
        let total = (self.k * self.p) as usize;
        self.samples.iter().all(|s| s.order_at_zero + s.roots.len() + s.order_at_infinity == total)
    }
}

/// Standard complex Gaussian vector `(N + iN)/sqrt 2` of length `d` for sample `id`.
pub fn gaussian_coefficients(seed: u64, id: u64, d: usize) -> Vec<Complex64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    (0..d)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(h * re, h * im)
        })
        .collect()
}

/// Polynomial in a rescaled variable `w = z / rho`, coefficients lowest degree first.
struct ScaledPoly {
    coeffs: Vec<Complex64>,
    rho: f64,
}

fn eval(c: &[Complex64], w: Complex64) -> (Complex64, Complex64, f64) {
    // value, derivative and sum |c_i| |w|^i
    let (mut v, mut d, mut a) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), 0.0);
    let r = w.norm();
    for ci in c.iter().rev() {
        d = d * w + v;
        v = v * w + ci;
        a = a * r + ci.norm();
    }
    (v, d, a)
}

impl ScaledPoly {
    fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Newton correction and relative backward error at `w`, evaluated on the
    /// reversed polynomial outside the unit disc.
    fn newton(&self, w: Complex64) -> (Complex64, f64) {
        let n = self.degree() as f64;
        if w.norm() <= 1.0 {
            let (v, d, a) = eval(&self.coeffs, w);
            (v / d, v.norm() / a)
        } else {
            let u = w.inv();
            let rev: Vec<Complex64> = self.coeffs.iter().rev().copied().collect();
            let (r, rd, a) = eval(&rev, u);
            (w * r / (r * n - u * rd), r.norm() / a)
        }
    }

    fn backward_error(&self, w: Complex64) -> f64 {
        self.newton(w).1
    }
}

/// Diagonal similarity balancing of a dense matrix in place.
fn balance(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    loop {
        let mut done = true;
        for i in 0..n {
            let (mut c, mut r) = (0.0, 0.0);
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut c2, mut r2) = (c, r);
            while c2 < r2 / radix {
                c2 *= radix;
                r2 /= radix;
                f *= radix;
            }
            while c2 >= r2 * radix {
                c2 /= radix;
                r2 *= radix;
                f /= radix;
            }
            if (c2 + r2) < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Roots of `sum_i c_i w^i` (`c` lowest first, leading coefficient nonzero) from the
/// eigenvalues of the balanced companion matrix.
fn companion_roots(c: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = c.len() - 1;
    if n == 0 {
        return Some(Vec::new());
    }
    let lead = c[n];
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        m[(0, i)] = -c[n - 1 - i] / lead;
        if i + 1 < n {
            m[(i + 1, i)] = Complex64::new(1.0, 0.0);
        }
    }
    balance(&mut m);
    let ev = nalgebra::Schur::new(m).eigenvalues()?;
    Some(ev.iter().copied().collect())
}

/// Zeros in `C*` of the section with normalized-monomial coordinates `y`:
/// `sum_j y_j z^j / ||z^j||`.
fn section_zeros(gram: &GramData, y: &[Complex64]) -> std::result::Result<(Vec<Complex64>, usize, usize, f64), f64> {
    let d = y.len();
    let kp = d + 1;
    let ln_n: Vec<f64> = gram.norms().iter().map(|n| n.ln_norm()).collect();
    let nz: Vec<usize> = (0..d).filter(|&i| y[i].norm() > 0.0).collect();
    let (Some(&lo), Some(&hi)) = (nz.first(), nz.last()) else {
        return Err(f64::INFINITY);
    };
    let ord0 = lo + 1;
    let ord_inf = kp - (hi + 1);
    let ln_rho = if hi > lo { (ln_n[hi] - ln_n[lo]) / (hi - lo) as f64 } else { 0.0 };
    // ln|coefficient| of w^{i - lo} after rescaling, i in lo..=hi
    let logs: Vec<f64> =
        (lo..=hi).map(|i| if y[i].norm() > 0.0 { y[i].norm().ln() - ln_n[i] + (i - lo) as f64 * ln_rho } else { f64::NEG_INFINITY }).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let coeffs: Vec<Complex64> = (lo..=hi)
        .zip(&logs)
        .map(|(i, l)| if y[i].norm() > 0.0 { y[i] / y[i].norm() * (l - top).exp() } else { Complex64::new(0.0, 0.0) })
        .collect();
    let poly = ScaledPoly { coeffs, rho: ln_rho.exp() };
    let Some(mut roots) = companion_roots(&poly.coeffs) else {
        return Err(f64::INFINITY);
    };
    let mut worst: f64 = 0.0;
    for w in roots.iter_mut() {
        let mut be = f64::INFINITY;
        for step in 0..MAX_POLISH_STEPS {
            let (dw, e) = poly.newton(*w);
            if step > 0 && e <= POLISH_TOLERANCE {
                be = e;
                break;
            }
            if dw.is_finite() {
                *w -= dw;
            }
            be = poly.backward_error(*w);
        }
        worst = worst.max(be);
    }
    if !(worst <= POLISH_TOLERANCE) {
        return Err(worst);
    }
    let z: Vec<Complex64> = roots.iter().map(|w| w * poly.rho).collect();
    Ok((z, ord0, ord_inf, worst))
}

/// Draw `n_samples` Gaussian sections and locate their zeros.
pub fn sample_sections(gram: &GramData, n_samples: usize, seed: u64) -> ZeroEnsemble {
    let d = gram.dim();
    let results: Vec<std::result::Result<ZeroSample, SampleFailure>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|id| {
            let xi = gaussian_coefficients(seed, id, d);
            let y = gram.orthonormal_to_normalized(&xi);
            match section_zeros(gram, &y) {
                Ok((roots, order_at_zero, order_at_infinity, backward_error)) => Ok(ZeroSample {
                    id,
                    coefficients: xi,
                    roots,
                    order_at_zero,
                    order_at_infinity,
                    backward_error,
                }),
                Err(residual) => Err(SampleFailure { sample: id, residual }),
            }
        })
        .collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(f) => failures.push(f),
        }
    }
    ZeroEnsemble { p: gram.p(), k: gram.k(), n_samples, seed, samples, failures }
}

/// Same as [`sample_sections`] but an error if any sample failed.
pub fn sample_sections_strict(gram: &GramData, n_samples: usize, seed: u64) -> Result<ZeroEnsemble> {
    let e = sample_sections(gram, n_samples, seed);
    match e.failures.first() {
        Some(f) => Err(Error::RootFinder { sample: f.sample as usize, residual: f.residual }),
        None => Ok(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroStatistics {
    pub s1: f64,
    pub s2: f64,
    pub empirical: f64,
    pub theoretical: f64,
    pub mc_error: f64,
}

/// Mean number of zeros per unit `p` with `s1 <= log|z|^2 <= s2`, against `phi'(s2) - phi'(s1)`.
pub fn zero_statistics(model: &SurfaceModel, ensemble: &ZeroEnsemble, s1: f64, s2: f64) -> Result<ZeroStatistics> {
    if !(s1 < s2) {
        return Err(Error::InvalidInterval { a: s1, b: s2 });
    }
    let pf = f64::from(ensemble.p);
    let counts: Vec<f64> = ensemble
        .samples
        .iter()
        .map(|smp| {
            smp.roots
                .iter()
                .filter(|r| {
                    let s = 2.0 * r.norm().ln();
                    s >= s1 && s <= s2
                })
                .count() as f64
                / pf
        })
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(ZeroStatistics { s1, s2, empirical: mean, theoretical: model.curvature_mass(s1, s2), mc_error: (var / n).sqrt() })
}

/// Expected zeros per unit `p` in the annulus from the kernel itself:
/// `(1/2pi p) int dtheta [d/ds log K]_{s1}^{s2}`, with the values `1` and `kp - 1`
/// at the punctures.
pub fn current_mass(gram: &GramData, s1: f64, s2: f64, angles: usize) -> Result<f64> {
    if !(s1 < s2) {
        return Err(Error::InvalidInterval { a: s1, b: s2 });
    }
    let angles = angles.max(1);
    let flux = |s: f64| -> f64 {
        if s == f64::NEG_INFINITY {
            return 1.0;
        }
        if s == f64::INFINITY {
            return gram.dim() as f64;
        }
        (0..angles)
            .map(|a| {
                let z = Complex64::from_polar((0.5 * s).exp(), 2.0 * PI * a as f64 / angles as f64);
                gram.kernel_moments(z).1.re
            })
            .sum::<f64>()
            / angles as f64
    };
    Ok((flux(s2) - flux(s1)) / f64::from(gram.p()))
}
