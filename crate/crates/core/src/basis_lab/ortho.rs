//! Projection of the heads, Gram-Schmidt, and the coefficient matrices.
//!
//! Vectors are stored in the normalized monomial coordinates `e_j = z^j / ||z^j||`, where
//! the inner product is `x^T Ghat y`. The projection of `c_l chi z^l` is
//! `gamma_l Ghat^{-1} e_l` because its inner products with the monomials vanish except
//! for `j = l` (circle symmetry in the cusp).

use super::{cut_mass, Cutoff, TruncationSchedule};
use crate::cusp_surface::{GramData, SurfaceModel};
use crate::disc_model::ModelBasis;
use crate::error::{Error, Result};
use crate::numerics::LogReal;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadSchedule {
    /// `delta_p` heads.
    Delta,
    /// `delta'_p(kappa)` heads.
    DeltaPrime,
}

/// Orthonormal basis `sigma_l = sum_j y_{jl} e_j`, heads first.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    p: u32,
    schedule: TruncationSchedule,
    cutoff: Cutoff,
    heads: usize,
    head_kind: HeadSchedule,
    gram: GramData,
    /// Columns are the basis sections.
    y: DMatrix<f64>,
    /// Columns are the projected heads `phi_l`.
    x: DMatrix<f64>,
    gamma: Vec<f64>,
    d1: Vec<LogReal>,
    d2: Vec<LogReal>,
    ln_c: Vec<f64>,
    ln_gauge: f64,
}

const RANK_TOLERANCE: f64 = 1e-8;

fn ip(g: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(&(g * b))
}

/// Modified Gram-Schmidt in the `g` inner product, two passes per column.
fn gram_schmidt(g: &DMatrix<f64>, cols: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
    for (i, c) in cols.iter().enumerate() {
        let mut v = c.clone();
        let start = ip(g, &v, &v).sqrt();
        for _ in 0..2 {
            for q in &out {
                let h = ip(g, q, &v);
                v -= q * h;
            }
        }
        let nrm = ip(g, &v, &v).sqrt();
        if !(nrm > RANK_TOLERANCE * start) {
            return Err(Error::RankDeficient { column: i + 1, residual: nrm / start });
        }
        out.push(v / nrm);
    }
    Ok(DMatrix::from_columns(&out).resize(n, cols.len(), 0.0))
}

/// Steps: project the heads, orthonormalize them, complete with the remaining monomials.
pub fn project_and_orthonormalize(
    model: &SurfaceModel,
    gram: &GramData,
    schedule: &TruncationSchedule,
    cutoff: &Cutoff,
    head_kind: HeadSchedule,
) -> Result<OrthoBasis> {
    let p = gram.p();
    let d = gram.dim();
    let heads = match head_kind {
        HeadSchedule::Delta => schedule.delta(p),
        HeadSchedule::DeltaPrime => schedule.delta_prime(p).max(0) as usize,
    };
    if heads > d {
        return Err(Error::IndexOutOfRange { index: heads, max: d });
    }
    let basis = ModelBasis::new(p)?;
    let ln_gauge = -f64::from(p) * model.potential().gauge();
    let ghat = gram.normalized();
    let e = gram.inverse_minus_identity();
    let mut d1 = Vec::with_capacity(heads);
    let mut d2 = Vec::with_capacity(heads);
    let mut gamma = Vec::with_capacity(heads);
    let mut cols = Vec::with_capacity(d);
    for l in 1..=heads {
        let m1 = cut_mass(p, l, cutoff, 1)?;
        let m2 = cut_mass(p, l, cutoff, 2)?;
        // <phi_{l,0}, z^l> / (c_l ||z^l||) with the gauge factor
        let g = (0.5 * ln_gauge).exp() * (1.0 - m1.to_f64()) / (1.0 + gram.norm(l).defect.to_f64()).sqrt();
        let mut v = e.column(l - 1).into_owned();
        v[l - 1] += 1.0;
        cols.push(v * g);
        d1.push(m1);
        d2.push(m2);
        gamma.push(g);
    }
    let x = if heads == 0 { DMatrix::zeros(d, 0) } else { DMatrix::from_columns(&cols) };
    for l in heads + 1..=d {
        let mut v = DVector::zeros(d);
        v[l - 1] = 1.0;
        cols.push(v);
    }
    let y = gram_schmidt(&ghat, &cols)?;
    let ln_c = (1..=d).map(|j| 0.5 * basis.ln_coeff_sq(j as u64)).collect();
    Ok(OrthoBasis {
        p,
        schedule: *schedule,
        cutoff: *cutoff,
        heads,
        head_kind,
        gram: gram.clone(),
        y,
        x,
        gamma,
        d1,
        d2,
        ln_c,
        ln_gauge,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeadReport {
    pub l: usize,
    /// `1 - ||phi_{l,0}||^2`.
    pub head_defect: f64,
    /// `||phi_l - phi_{l,0}||`, the projection correction.
    pub correction: f64,
    /// `||sigma_l - phi_{l,0}||`.
    pub sigma_minus_phi0: f64,
    /// `max_j |<phi_j, sigma_l> - delta_{jl}|` over heads `j`.
    pub pairing_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeadSummary {
    pub p: u32,
    pub heads: usize,
    pub rows: Vec<HeadReport>,
    pub max_sigma_minus_phi0: f64,
    pub max_pairing_defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoefficientBound {
    pub j: usize,
    pub l: usize,
    pub coefficient: LogReal,
    pub bound: LogReal,
    pub holds: bool,
}

impl OrthoBasis {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn head_kind(&self) -> HeadSchedule {
        self.head_kind
    }

    pub fn schedule(&self) -> &TruncationSchedule {
        &self.schedule
    }

    pub fn cutoff(&self) -> &Cutoff {
        &self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn gram(&self) -> &GramData {
        &self.gram
    }

    /// Coordinates of the basis in the normalized monomials (column `l - 1` is `sigma_l`).
    pub fn normalized_coordinates(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Coordinates of the projected heads `phi_l`.
    pub fn projected_heads(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// `ln c_j`.
    pub fn ln_coeff(&self, j: usize) -> f64 {
        self.ln_c[j - 1]
    }

    /// Monomial coefficient `a_{jl}` of `sigma_l`.
    pub fn coefficient(&self, j: usize, l: usize) -> LogReal {
        LogReal::from_f64(self.y[(j - 1, l - 1)]) * LogReal::from_ln(-self.gram.norm(j).ln_norm())
    }

    /// `a_{jl} / c_j`.
    pub fn scaled_coefficient(&self, j: usize, l: usize) -> f64 {
        (self.coefficient(j, l) * LogReal::from_ln(-self.ln_c[j - 1])).to_f64()
    }

    /// `max |Y^T Ghat Y - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.gram.normalized();
        let m = self.y.transpose() * g * &self.y - DMatrix::<f64>::identity(self.dim(), self.dim());
        m.amax()
    }

    /// `max |a_{jl}| / c_j` over `j < l <= heads`, and over `j <= heads < l`.
    pub fn echelon_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for l in 1..=d {
            let top = if l <= self.heads { l - 1 } else { self.heads };
            for j in 1..=top {
                worst = worst.max(self.scaled_coefficient(j, l).abs());
            }
        }
        worst
    }

    /// Largest coefficient change when the basis is orthonormalized again.
    pub fn idempotence_defect(&self) -> Result<f64> {
        let cols: Vec<DVector<f64>> = self.y.column_iter().map(|c| c.into_owned()).collect();
        let again = gram_schmidt(&self.gram.normalized(), &cols)?;
        Ok((again - &self.y).amax())
    }

    /// `<sigma_l, phi_j>` from the coordinates and from the one-coefficient formula.
    pub fn projection_identity(&self, j: usize, l: usize) -> (f64, f64) {
        let g = self.gram.normalized();
        let direct = self.y.column(l - 1).dot(&(g * self.x.column(j - 1)));
        (direct, self.y[(j - 1, l - 1)] * self.gamma[j - 1])
    }

    /// Gamma-weight masses of `1 - chi` and `1 - chi^2` for head `l`.
    pub fn head_masses(&self, l: usize) -> (LogReal, LogReal) {
        (self.d1[l - 1], self.d2[l - 1])
    }

    /// `||phi_l - phi_{l,0}||^2` by Pythagoras, in the log domain.
    pub fn correction_sq(&self, l: usize) -> LogReal {
        let d = self.gram.norm(l).defect;
        let e = LogReal::from_f64(self.gram.inverse_minus_identity()[(l - 1, l - 1)]);
        let (m1, m2) = (self.d1[l - 1], self.d2[l - 1]);
        let one = LogReal::ONE;
        // [(1 - m2)(1 + d) - (1 - m1)^2 (1 + e)] / (1 + d)
        let num = d - m2 - m2 * d + LogReal::from_f64(2.0) * m1 - m1 * m1 - e * (one - m1) * (one - m1);
        let v = num / (one + d) * LogReal::from_ln(self.ln_gauge);
        if v.sign() < 0 {
            LogReal::ZERO
        } else {
            v
        }
    }

    pub fn head_report(&self) -> HeadSummary {
        let g = self.gram.normalized();
        let rows: Vec<HeadReport> = (1..=self.heads)
            .map(|l| {
                let corr_sq = self.correction_sq(l);
                let v = self.y.column(l - 1) - self.x.column(l - 1);
                let gs_sq = ip(&g, &v.clone_owned(), &v.clone_owned()).max(0.0);
                let pairing = (1..=self.heads)
                    .map(|j| {
                        let val = self.y[(j - 1, l - 1)] * self.gamma[j - 1];
                        (val - if j == l { 1.0 } else { 0.0 }).abs()
                    })
                    .fold(0.0, f64::max);
                HeadReport {
                    l,
                    head_defect: self.d2[l - 1].to_f64(),
                    correction: corr_sq.sqrt().to_f64(),
                    sigma_minus_phi0: (gs_sq + corr_sq.to_f64()).sqrt(),
                    pairing_defect: pairing,
                }
            })
            .collect();
        HeadSummary {
            p: self.p,
            heads: self.heads,
            max_sigma_minus_phi0: rows.iter().map(|r| r.sigma_minus_phi0).fold(0.0, f64::max),
            max_pairing_defect: rows.iter().map(|r| r.pairing_defect).fold(0.0, f64::max),
            rows,
        }
    }

    /// Write the schedule header as JSON and the coefficient matrix as CSV
    /// `(j, l, sign, log_abs)`.
    pub fn export<W1: Write, W2: Write>(&self, json: W1, csv_out: W2) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            p: u32,
            dimension: usize,
            heads: usize,
            head_schedule: HeadSchedule,
            schedule: &'a TruncationSchedule,
            cutoff: &'a Cutoff,
        }
        let h = Header {
            p: self.p,
            dimension: self.dim(),
            heads: self.heads,
            head_schedule: self.head_kind,
            schedule: &self.schedule,
            cutoff: &self.cutoff,
        };
        serde_json::to_writer_pretty(json, &h).map_err(|e| Error::Domain(format!("json export: {e}")))?;
        let mut w = csv::Writer::from_writer(csv_out);
        let io = |e: csv::Error| Error::Domain(format!("csv export: {e}"));
        w.write_record(["j", "l", "sign", "log_abs"]).map_err(io)?;
        for l in 1..=self.dim() {
            for j in 1..=self.dim() {
                let a = self.coefficient(j, l);
                w.write_record([j.to_string(), l.to_string(), a.sign().to_string(), a.log_magnitude().to_string()])
                    .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Domain(format!("csv export: {e}")))?;
        Ok(())
    }
}

/// `eps_{qs} = sum_l a_{ql} a_{sl} / (c_q c_s) - delta_{qs}` for `q, s <= cap`.
pub fn epsilon_matrix(basis: &OrthoBasis, cap: usize) -> Result<DMatrix<f64>> {
    let d = basis.dim();
    if cap < 1 || cap > d {
        return Err(Error::IndexOutOfRange { index: cap, max: d });
    }
    // a_{ql}/c_q = y_{ql} / (c_q ||z^q||)
    let scale: Vec<f64> =
        (1..=cap).map(|q| (-basis.gram.norm(q).ln_norm() - basis.ln_c[q - 1]).exp()).collect();
    let rows = basis.y.rows(0, cap);
    let mut eps = &rows * rows.transpose();
    for q in 0..cap {
        for s in 0..cap {
            eps[(q, s)] *= scale[q] * scale[s];
        }
        eps[(q, q)] -= 1.0;
    }
    Ok(eps)
}

/// `|a_{jl}|` against `(2r)^{-j} |log (2r)^2|^{-p/2} sup_{|z| = 2r} B_p^{1/2}`.
pub fn coefficient_tail_bound(
    model: &SurfaceModel,
    basis: &OrthoBasis,
    j: usize,
    l: usize,
    angles: usize,
) -> Result<CoefficientBound> {
    let d = basis.dim();
    if j < 1 || l < 1 || j > d || l > d {
        return Err(Error::IndexOutOfRange { index: j.max(l), max: d });
    }
    let rad = 2.0 * basis.cutoff.r();
    let angles = angles.max(1);
    let mut sup = LogReal::ZERO;
    for a in 0..angles {
        let z = Complex64::from_polar(rad, 2.0 * std::f64::consts::PI * a as f64 / angles as f64);
        sup = sup.max(basis.gram.kernel(model, z)?);
    }
    let lg = (rad * rad).ln().abs();
    let bound = sup.sqrt() * LogReal::from_ln(-(j as f64) * rad.ln() - 0.5 * f64::from(basis.p) * lg.ln());
    let coefficient = basis.coefficient(j, l).abs();
    let holds = coefficient.is_zero() || coefficient.log_magnitude() <= bound.log_magnitude() + 1e-6;
    Ok(CoefficientBound { j, l, coefficient, bound, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp_surface::gram_matrix;

    #[test]
    fn symmetric_basis_is_diagonal() {
        let m = SurfaceModel::standard(1).unwrap();
        let g = gram_matrix(&m, 40).unwrap();
        let c = Cutoff::standard();
        let s = TruncationSchedule::new(&c, 0.5).unwrap();
        let b = project_and_orthonormalize(&m, &g, &s, &c, HeadSchedule::Delta).unwrap();
        assert_eq!(b.heads(), 6);
        assert!(b.orthonormality_defect() < 1e-12);
        assert_eq!(b.echelon_residual(), 0.0);
        for l in 1..=b.dim() {
            for j in 1..=b.dim() {
                if j != l {
                    assert_eq!(b.normalized_coordinates()[(j - 1, l - 1)], 0.0);
                }
            }
        }
        let eps = epsilon_matrix(&b, 10).unwrap();
        for q in 1..=10 {
            let a = b.scaled_coefficient(q, q);
            assert!((eps[(q - 1, q - 1)] - (a * a - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn export_shape() {
        let m = SurfaceModel::standard(1).unwrap();
        let g = gram_matrix(&m, 10).unwrap();
        let c = Cutoff::standard();
        let s = TruncationSchedule::new(&c, 0.5).unwrap();
        let b = project_and_orthonormalize(&m, &g, &s, &c, HeadSchedule::Delta).unwrap();
        let (mut j, mut v) = (Vec::new(), Vec::new());
        b.export(&mut j, &mut v).unwrap();
        let text = String::from_utf8(v).unwrap();
        assert_eq!(text.lines().count(), 1 + 81);
        assert!(String::from_utf8(j).unwrap().contains("\"heads\": 1"));
    }
}
