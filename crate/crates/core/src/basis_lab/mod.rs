//! Cut-off monomials near the puncture at `0`, their projections onto holomorphic
//! sections, the resulting orthonormal basis and the Kodaira Laplacian of the heads.
//!
//! All cut-off sections live in `|z| <= 2r`, inside the exact cusp, so their norms are
//! model norms. With `u = -2 l log|z|` the weight `|z|^{2l} |log|z|^2|^{p-2}` becomes the
//! gamma density `u^{p-2} e^{-u} / (p-2)!` after normalization by `c_l^2`.

mod laplacian;
mod ortho;

pub use laplacian::{
    kodaira_laplacian_apply, kodaira_laplacian_fd, laplacian_ladder, laplacian_norm_bound, spectral_gap_estimate,
    GapCheck, KodairaValue, LaplacianLadder, LaplacianNorm,
};
pub use ortho::{
    coefficient_tail_bound, epsilon_matrix, project_and_orthonormalize, CoefficientBound, HeadReport, HeadSchedule,
    HeadSummary, OrthoBasis,
};

use crate::disc_model::ModelBasis;
use crate::error::{Error, Result};
use crate::numerics::{integrate_log, ln_gamma, reg_gamma_pair, AdaptiveOptions, LogReal};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Cut-off profile in the variable `|z|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Quintic smoothstep from 1 at `r^beta` to 0 at `2r`.
    Smoothstep,
    /// `chi = 1` on the whole unit disc.
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    r: f64,
    beta: f64,
    profile: Profile,
}

/// Smoothstep `10 t^3 - 15 t^4 + 6 t^5` and its two derivatives.
fn smoothstep(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    let m = 1.0 - t;
    [t * t * t * (10.0 - 15.0 * t + 6.0 * t * t), 30.0 * t * t * m * m, 60.0 * t * m * (1.0 - 2.0 * t)]
}

impl Cutoff {
    pub fn new(r: f64, beta: f64) -> Result<Self> {
        let limit = 0.25 / std::f64::consts::E;
        if !(r > 0.0 && r < limit) {
            return Err(Error::Domain(format!("cut-off radius must satisfy 0 < r < 1/(4e), got {r}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")));
        }
        if !(r.powf(beta) < 2.0 * r) {
            return Err(Error::Domain(format!("r^beta = {} must be below 2r = {}", r.powf(beta), 2.0 * r)));
        }
        Ok(Cutoff { r, beta, profile: Profile::Smoothstep })
    }

    /// Defaults `r = 0.05`, `beta = 0.85`.
    pub fn standard() -> Self {
        Cutoff::new(0.05, 0.85).expect("valid defaults")
    }

    /// The degenerate cut-off `chi = 1` on the disc.
    pub fn unit(r: f64, beta: f64) -> Result<Self> {
        Ok(Cutoff { profile: Profile::Unit, ..Cutoff::new(r, beta)? })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    /// Inner and outer radius of the transition.
    pub fn bridge(&self) -> (f64, f64) {
        (self.r.powf(self.beta), 2.0 * self.r)
    }

    fn tau(&self, u: f64) -> f64 {
        let (a, b) = self.bridge();
        (u - a) / (b - a)
    }

    /// `1 - chi(u)`, exact near the plateau.
    pub fn complement(&self, u: f64) -> f64 {
        match self.profile {
            Profile::Unit => 0.0,
            Profile::Smoothstep => smoothstep(self.tau(u))[0],
        }
    }

    /// `1 - chi(u)^2`.
    pub fn complement_sq(&self, u: f64) -> f64 {
        let s = self.complement(u);
        s * (2.0 - s)
    }
}

/// `chi`, `chi'` or `chi''` at `u = |z| >= 0`.
pub fn cutoff_eval(cutoff: &Cutoff, u: f64, order: u32) -> f64 {
    if cutoff.profile == Profile::Unit {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let (a, b) = cutoff.bridge();
    if u <= a {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    if u >= b {
        return 0.0;
    }
    let w = b - a;
    let s = smoothstep(cutoff.tau(u));
    match order {
        0 => 1.0 - s[0],
        1 => -s[1] / w,
        2 => -s[2] / (w * w),
        _ => 0.0,
    }
}

/// Head counts `delta_p`, `delta'_p` and the constant `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSchedule {
    pub r: f64,
    pub beta: f64,
    pub kappa: f64,
    pub c_kappa: f64,
}

impl TruncationSchedule {
    /// `c(kappa) = e^{-1 - 2 kappa}`, the largest admissible value.
    pub fn new(cutoff: &Cutoff, kappa: f64) -> Result<Self> {
        Self::with_c(cutoff, kappa, (-1.0 - 2.0 * kappa).exp())
    }

    pub fn with_c(cutoff: &Cutoff, kappa: f64, c_kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        if !(c_kappa > 0.0 && c_kappa.ln() <= -1.0 - 2.0 * kappa + 1e-15) {
            return Err(Error::Domain(format!("c(kappa) must satisfy 0 < c and log c <= -1 - 2 kappa, got {c_kappa}")));
        }
        Ok(TruncationSchedule { r: cutoff.r, beta: cutoff.beta, kappa, c_kappa })
    }

    fn ln_r(&self) -> f64 {
        self.r.ln().abs()
    }

    /// `floor((p - 2) / (2 |log r|))`.
    pub fn delta(&self, p: u32) -> usize {
        (f64::from(p.saturating_sub(2)) / (2.0 * self.ln_r())).floor() as usize
    }

    /// `floor((p - 2) c(kappa) / (2 |log r|)) - 2`, negative when empty.
    pub fn delta_prime(&self, p: u32) -> i64 {
        (f64::from(p.saturating_sub(2)) * self.c_kappa / (2.0 * self.ln_r())).floor() as i64 - 2
    }

    /// Smallest `p` with `p >= 2 + 2 |log r|`.
    pub fn min_p(&self) -> u32 {
        (2.0 + 2.0 * self.ln_r()).ceil() as u32
    }

    /// Smallest `p` with `delta'_p >= 1`.
    pub fn min_p_prime(&self) -> u32 {
        let mut p = 2;
        while self.delta_prime(p) < 1 {
            p += 1;
        }
        p
    }

    /// `inf delta_p / p` over `p >= min_p`, scanned far enough that later ratios
    /// are bounded below by the asymptotic value.
    pub fn alpha(&self) -> f64 {
        let asym = 1.0 / (2.0 * self.ln_r());
        let mut best = f64::INFINITY;
        let mut p = self.min_p();
        // delta_p / p >= asym - (1 + 2 asym) / p, which exceeds best once p is large
        loop {
            best = best.min(self.delta(p) as f64 / f64::from(p));
            if asym - (1.0 + 2.0 * asym) / f64::from(p) >= best || p > 1_000_000 {
                break best;
            }
            p += 1;
        }
    }
}

/// The cut-off monomial `c_l chi(|z|) z^l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedSection {
    pub p: u32,
    pub l: usize,
    pub coeff: LogReal,
    pub cutoff: Cutoff,
}

pub fn truncated_section(p: u32, l: usize, cutoff: &Cutoff) -> Result<TruncatedSection> {
    if l < 1 {
        return Err(Error::IndexOutOfRange { index: l, max: usize::MAX });
    }
    Ok(TruncatedSection { p, l, coeff: ModelBasis::new(p)?.coeff(l as u64)?, cutoff: *cutoff })
}

impl TruncatedSection {
    /// Value of the local function at `z`.
    pub fn value(&self, z: Complex64) -> Complex64 {
        z.powu(self.l as u32) * (self.coeff.to_f64() * cutoff_eval(&self.cutoff, z.norm(), 0))
    }

    /// Pointwise norm `|log|z|^2|^{p/2} c_l chi(|z|) |z|^l` in the log domain.
    pub fn pointwise_norm(&self, z: Complex64) -> LogReal {
        let t = z.norm();
        let chi = cutoff_eval(&self.cutoff, t, 0);
        let lg = (t * t).ln().abs();
        self.coeff * LogReal::from_f64(chi) * LogReal::from_ln(0.5 * f64::from(self.p) * lg.ln() + self.l as f64 * t.ln())
    }
}

/// `(1/(p-2)!) int (1 - chi^n) u^{p-2} e^{-u} du` in the variable `u = -2 l log|z|`,
/// for `n` in `{1, 2}`.
pub(crate) fn cut_mass(p: u32, l: usize, cutoff: &Cutoff, n: u32) -> Result<LogReal> {
    if cutoff.profile == Profile::Unit {
        return Ok(LogReal::ZERO);
    }
    let (ta, tb) = cutoff.bridge();
    let two_l = 2.0 * l as f64;
    // chi = 0 for |z| >= 2r, i.e. u <= ua
    let ua = -two_l * tb.ln();
    let ub = -two_l * ta.ln();
    let a = f64::from(p - 1);
    let (outer, _) = reg_gamma_pair(a, ua)?;
    let lg = ln_gamma(a);
    let bridge = integrate_log(
        |u| {
            let t = (-u / two_l).exp();
            let w = if n == 1 { cutoff.complement(t) } else { cutoff.complement_sq(t) };
            LogReal::from_f64(w) * LogReal::from_ln((a - 1.0) * u.ln() - u - lg)
        },
        ua,
        ub,
        AdaptiveOptions { rel_tol: 1e-13, ..Default::default() },
    )?;
    Ok(outer + bridge)
}

/// Head defect `1 - ||c_l chi z^l||^2` and the majorant `P(p-1, 2 delta_p beta |log r|)`.
pub fn head_norm_defect(p: u32, l: usize, cutoff: &Cutoff) -> Result<(f64, f64)> {
    let sched = TruncationSchedule::new(cutoff, 0.5)?;
    let delta = sched.delta(p);
    if l < 1 || l > delta {
        return Err(Error::IndexOutOfRange { index: l, max: delta });
    }
    let defect = cut_mass(p, l, cutoff, 2)?.to_f64();
    let x = 2.0 * delta as f64 * cutoff.beta * cutoff.r.ln().abs();
    let bound = reg_gamma_pair(f64::from(p - 1), x)?.0.to_f64();
    Ok((defect, bound))
}
