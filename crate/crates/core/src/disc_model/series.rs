//! Certified summation of `sum_l l^a x^l`-type series.

use super::ModelBasis;
use crate::error::{Error, Result};
use crate::numerics::LogReal;

/// Truncation controls for model series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesOptions {
    pub tolerance: f64,
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { tolerance: 1e-12, max_terms: 1_000_000 }
    }
}

/// Tracks partial sums of `T_l = l^a x^l` and decides when the tail is certified.
///
/// Two bounds are combined. The shift bound: the tail after `N` terms is at most
/// `(N+1)^a x^N` times the full sum. The ratio bound: once
/// `rho = ((N+2)/(N+1))^a x < 1`, the tail is at most `T_{N+1} / (1 - rho)`.
pub(crate) struct Certifier {
    a: f64,
    ln_x: f64,
    opts: SeriesOptions,
    partial: LogReal,
}

impl Certifier {
    pub(crate) fn new(a: f64, ln_x: f64, opts: SeriesOptions) -> Self {
        Certifier { a, ln_x, opts, partial: LogReal::ZERO }
    }

    pub(crate) fn push(&mut self, ln_term: f64) {
        self.partial = self.partial + LogReal::from_ln(ln_term);
    }

    /// Bound on the omitted tail relative to the partial sum after `n` terms, inflated by
    /// the rounding of the logarithms it is built from.
    pub(crate) fn tail_bound(&self, n: u64) -> f64 {
        let nf = n as f64;
        let mut best = f64::INFINITY;
        let ln_shift = self.a * (nf + 1.0).ln() + nf * self.ln_x;
        if ln_shift < 0.0 {
            let b = ln_shift.exp();
            best = best.min(b / (1.0 - b));
        }
        let ln_rho = self.a * (1.0 / (nf + 1.0)).ln_1p() + self.ln_x;
        let ln_next = self.a * (nf + 1.0).ln() + (nf + 1.0) * self.ln_x;
        if ln_rho < 0.0 {
            let rel = (ln_next - self.partial.log_magnitude()).exp() / -ln_rho.exp_m1();
            best = best.min(rel);
        }
        let scale = 1.0 + self.a * (nf + 1.0).ln() + (nf + 1.0) * self.ln_x.abs() + self.partial.log_magnitude().abs();
        best * (1.0 + 64.0 * f64::EPSILON * scale)
    }

    /// Ratio-test bound on the tail relative to the terms pushed so far.
    pub(crate) fn ratio_bound(&self, n: u64) -> f64 {
        let nf = n as f64;
        let ln_rho = self.a * (1.0 / (nf + 1.0)).ln_1p() + self.ln_x;
        if ln_rho >= 0.0 || self.partial.is_zero() {
            return f64::INFINITY;
        }
        let ln_next = self.a * (nf + 1.0).ln() + (nf + 1.0) * self.ln_x;
        (ln_next - self.partial.log_magnitude()).exp() / -ln_rho.exp_m1()
    }

    /// `Some(bound)` once the tail is below tolerance, an error past the term cap.
    pub(crate) fn certified(&self, n: u64) -> Result<Option<f64>> {
        let tail = self.tail_bound(n);
        if tail <= self.opts.tolerance {
            Ok(Some(tail))
        } else if n as usize >= self.opts.max_terms {
            Err(Error::NonConvergence { what: "model series certificate".into(), achieved: tail })
        } else {
            Ok(None)
        }
    }
}

/// The normalized weights `w_l = c_l^2 e^{l s} / beta(s)` of the model series at `s = log|z|^2`,
/// with `beta(s) = sum_l c_l^2 e^{l s}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscWeights {
    s: f64,
    ln_terms: Vec<f64>,
    ln_beta: f64,
    tail: f64,
}

impl DiscWeights {
    /// Certified so that the first two moments are also accurate, including the central
    /// moments deep in the cusp where `w_1` carries almost all of the mass.
    pub fn new(p: u32, s: f64) -> Result<Self> {
        Self::build(p, s, 2, SeriesOptions::default(), Some(2))
    }

    /// `moments` extra powers of `l` are covered by the certificate.
    pub fn new_with(p: u32, s: f64, moments: u32, opts: SeriesOptions) -> Result<Self> {
        Self::build(p, s, moments, opts, None)
    }

    /// Like [`DiscWeights::new`], but the upper block `l >= from` is also summed to full
    /// relative precision of its own, so that `upper_mass(from)` is accurate even when
    /// it is far below the rounding level of `beta`.
    pub fn with_upper_block(p: u32, s: f64, from: u64) -> Result<Self> {
        Self::build(p, s, 2, SeriesOptions::default(), Some(from))
    }

    fn build(p: u32, s: f64, moments: u32, opts: SeriesOptions, upper: Option<u64>) -> Result<Self> {
        if !(s < 0.0) {
            return Err(Error::Domain(format!("model series requires s = log|z|^2 < 0, got {s}")));
        }
        let basis = ModelBasis::new(p)?;
        let a = f64::from(p - 1 + moments);
        let mut cert = Certifier::new(a, s, opts);
        let mut ln_terms = Vec::new();
        let mut block = Certifier::new(a, s, SeriesOptions { tolerance: 1e-17, ..opts });
        let mut l = 0u64;
        let mut tail = None;
        loop {
            l += 1;
            let ln_t = basis.ln_coeff_sq(l) + l as f64 * s;
            ln_terms.push(ln_t);
            let ln_m = a * (l as f64).ln() + l as f64 * s;
            cert.push(ln_m);
            if tail.is_none() {
                tail = cert.certified(l)?;
            }
            let upper_done = match upper {
                None => true,
                Some(from) => {
                    if l >= from {
                        block.push(ln_m);
                    }
                    l >= from && block.ratio_bound(l) <= 1e-17
                }
            };
            if let Some(t) = tail {
                if upper_done {
                    break Ok(t);
                }
                if l as usize >= opts.max_terms {
                    break Err(Error::NonConvergence {
                        what: "upper block of model series".into(),
                        achieved: block.ratio_bound(l),
                    });
                }
            }
        }
        .map(|tail| {
            let ln_beta = crate::numerics::log_sum_exp(&ln_terms);
            DiscWeights { s, ln_terms, ln_beta, tail }
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `ln beta(s)`.
    pub fn ln_beta(&self) -> f64 {
        self.ln_beta
    }

    pub fn terms_used(&self) -> usize {
        self.ln_terms.len()
    }

    pub fn certified_relative_tail(&self) -> f64 {
        self.tail
    }

    /// `ln w_l`; `-inf` beyond the certified range.
    pub fn ln_weight(&self, l: u64) -> f64 {
        match self.ln_terms.get((l as usize).wrapping_sub(1)) {
            Some(t) => t - self.ln_beta,
            None => f64::NEG_INFINITY,
        }
    }

    pub fn weight(&self, l: u64) -> f64 {
        self.ln_weight(l).exp()
    }

    /// Iterator over `(l, w_l)`.
    pub fn weights(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.ln_terms.iter().enumerate().map(move |(i, t)| (i as u64 + 1, (t - self.ln_beta).exp()))
    }

    /// `sum_l (l - 1) w_l = mean - 1`, accurate when `w_1` dominates.
    pub fn mean_excess(&self) -> f64 {
        self.weights().map(|(l, w)| (l - 1) as f64 * w).sum()
    }

    /// `sum_l l w_l`, the `s`-derivative of `log beta`.
    pub fn mean(&self) -> f64 {
        1.0 + self.mean_excess()
    }

    /// `sum_l (l - mean)^2 w_l`, the second `s`-derivative of `log beta`.
    pub fn variance(&self) -> f64 {
        let e = self.mean_excess();
        self.weights().map(|(l, w)| ((l - 1) as f64 - e).powi(2) * w).sum()
    }

    /// `ln w_l` for every summed term, starting at `l = 1`.
    pub fn ln_weights(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.ln_terms.iter().enumerate().map(move |(i, t)| (i as u64 + 1, t - self.ln_beta))
    }

    /// `sum_{l >= from} w_l`, summed directly.
    pub fn upper_mass(&self, from: u64) -> f64 {
        self.weights().filter(|(l, _)| *l >= from).map(|(_, w)| w).sum()
    }
}
