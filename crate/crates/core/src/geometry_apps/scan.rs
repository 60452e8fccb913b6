//! Grid scans of the quotient and ladder fits in `p`.

use super::metric::eta_p;
use super::quotient::CuspComparison;
use crate::cusp_surface::{gram_matrix, SurfaceModel};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// `n` points in `[s_min, s_max]` (both negative) spaced geometrically in `|s|`.
pub fn geometric_grid(s_min: f64, s_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(s_min < s_max && s_max < 0.0) || n < 2 {
        return Err(Error::InvalidInterval { a: s_min, b: s_max });
    }
    let (a, b) = (-s_max, -s_min);
    let ratio = (b / a).ln();
    Ok((0..n).map(|i| -a * (ratio * i as f64 / (n - 1) as f64).exp()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub p: u32,
    pub s: f64,
    pub z_abs: f64,
    pub quotient_minus_1: f64,
    pub d1_abs: f64,
    pub d2_abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientScan {
    pub p: u32,
    pub rows: Vec<ScanRow>,
    pub sup_quotient: f64,
    pub sup_d1: f64,
    pub sup_d2: f64,
    /// Largest spread of `quotient - 1` across the sampled angles at a fixed `s`.
    pub angular_spread: f64,
}

/// Evaluate `comparison` on `grid` at `angles` equally spaced angles.
pub fn scan_comparison(c: &CuspComparison, grid: &[f64], angles: usize) -> Result<QuotientScan> {
    let angles = angles.max(1);
    let per_s: Vec<(Vec<ScanRow>, f64)> = grid
        .par_iter()
        .map(|&s| {
            let r = (0.5 * s).exp();
            let mut rows = Vec::with_capacity(angles);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for a in 0..angles {
                let th = 2.0 * std::f64::consts::PI * a as f64 / angles as f64;
                let z = Complex64::from_polar(r, th);
                let q = c.quotient_minus_one(z)?.to_f64();
                lo = lo.min(q);
                hi = hi.max(q);
                rows.push(ScanRow {
                    p: c.p(),
                    s,
                    z_abs: r,
                    quotient_minus_1: q,
                    d1_abs: c.derivative(z, 1)?.norm(),
                    d2_abs: c.derivative(z, 2)?.norm(),
                });
            }
            Ok((rows, hi - lo))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut spread: f64 = 0.0;
    for (r, sp) in per_s {
        rows.extend(r);
        spread = spread.max(sp);
    }
    let sup = |f: fn(&ScanRow) -> f64| rows.iter().map(f).fold(0.0, |a: f64, b| a.max(b.abs()));
    Ok(QuotientScan {
        p: c.p(),
        sup_quotient: sup(|r| r.quotient_minus_1),
        sup_d1: sup(|r| r.d1_abs),
        sup_d2: sup(|r| r.d2_abs),
        angular_spread: spread,
        rows,
    })
}

/// Build the comparison for `(model, p)` and scan it.
pub fn quotient_scan(model: &SurfaceModel, p: u32, grid: &[f64], angles: usize) -> Result<QuotientScan> {
    let g = gram_matrix(model, p)?;
    scan_comparison(&CuspComparison::new(model, &g), grid, angles)
}

/// Least-squares slope of `ln y` against `ln p` and whether `y` strictly decreases.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderFit {
    pub p: Vec<u32>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub monotone: bool,
}

pub fn ladder_fit(p: &[u32], values: &[f64]) -> LadderFit {
    let x: Vec<f64> = p.iter().map(|&q| f64::from(q).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    LadderFit {
        p: p.to_vec(),
        values: values.to_vec(),
        slope: sxy / sxx,
        monotone: values.windows(2).all(|w| w[1] < w[0]),
    }
}

/// `sup |eta_p|` over the grid and the puncture.
pub fn eta_sup(c: &CuspComparison, grid: &[f64]) -> Result<f64> {
    let at0 = eta_p(c, Complex64::new(0.0, 0.0))?.abs();
    let vals: Vec<f64> =
        grid.par_iter().map(|&s| Ok(eta_p(c, Complex64::new((0.5 * s).exp(), 0.0))?.abs())).collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(at0, f64::max))
}
