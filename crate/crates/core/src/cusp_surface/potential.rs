//! Radial weight `phi(s)`, `s = log|z|^2`, with exact cusps and a convex bridge.

use crate::error::{Error, Result};
use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BridgeKind {
    Quadratic,
    Quintic,
}

/// `phi(s) = -log(-s)` for `s <= -S0`, a polynomial bridge on `|s| <= S0`,
/// and `k s - log s` for `s >= S0`, plus a constant gauge offset.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialPotential {
    k: u32,
    s0: f64,
    bridge: BridgeKind,
    coeffs: [f64; 6],
    gauge: f64,
}

/// Values of the left cusp piece and its two derivatives at `s`.
fn left(s: f64) -> [f64; 3] {
    [-(-s).ln(), -1.0 / s, 1.0 / (s * s)]
}

fn right(k: f64, s: f64) -> [f64; 3] {
    [k * s - s.ln(), k - 1.0 / s, 1.0 / (s * s)]
}

impl RadialPotential {
    /// Quadratic C^2 bridge; matching on both sides forces `S0 = 4/k`.
    pub fn quadratic(k: u32, s0: Option<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("line bundle degree must satisfy k >= 1".into()));
        }
        let s0 = s0.unwrap_or(4.0 / f64::from(k));
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::Domain(format!("S0 must be positive, got {s0}")));
        }
        // matched to the left cusp at -S0
        let c = 1.0 / (2.0 * s0 * s0);
        let b = 2.0 / s0;
        let a = 1.5 - s0.ln();
        let pot = RadialPotential { k, s0, bridge: BridgeKind::Quadratic, coeffs: [a, b, c, 0.0, 0.0, 0.0], gauge: 0.0 };
        pot.check_matching()?;
        Ok(pot)
    }

    /// Quintic C^2 bridge, available for any `S0 > 2/k`.
    pub fn quintic(k: u32, s0: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("line bundle degree must satisfy k >= 1".into()));
        }
        if !(s0 > 2.0 / f64::from(k)) || !s0.is_finite() {
            return Err(Error::Domain(format!("quintic bridge requires S0 > 2/k, got {s0}")));
        }
        let mut m = Matrix6::<f64>::zeros();
        let mut rhs = Vector6::<f64>::zeros();
        let targets = [(-s0, left(-s0)), (s0, right(f64::from(k), s0))];
        for (side, (s, vals)) in targets.iter().enumerate() {
            for d in 0..3 {
                let row = 3 * side + d;
                for i in d..6 {
                    let falling: f64 = (0..d).map(|q| (i - q) as f64).product();
                    m[(row, i)] = falling * s.powi((i - d) as i32);
                }
                rhs[row] = vals[d];
            }
        }
        let sol = m.lu().solve(&rhs).ok_or(Error::MatchingFailure { residual: f64::INFINITY })?;
        let mut coeffs = [0.0; 6];
        coeffs.copy_from_slice(sol.as_slice());
        let pot = RadialPotential { k, s0, bridge: BridgeKind::Quintic, coeffs, gauge: 0.0 };
        pot.check_matching()?;
        Ok(pot)
    }

    /// Same potential shifted by a constant, i.e. `h` scaled by `e^{-gauge}`.
    pub fn with_gauge(mut self, gauge: f64) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn bridge(&self) -> BridgeKind {
        self.bridge
    }

    pub fn gauge(&self) -> f64 {
        self.gauge
    }

    /// Polynomial bridge coefficients, lowest degree first.
    pub fn coefficients(&self) -> [f64; 6] {
        self.coeffs
    }

    /// Bridge polynomial and its first two derivatives.
    pub fn bridge_eval(&self, s: f64) -> [f64; 3] {
        let c = &self.coeffs;
        let mut v = [0.0; 3];
        for i in (0..6).rev() {
            v[2] = v[2] * s + v[1] * 2.0;
            v[1] = v[1] * s + v[0];
            v[0] = v[0] * s + c[i];
        }
        v
    }

    /// `[phi, phi', phi'']` at `s`, without the gauge offset.
    pub fn eval(&self, s: f64) -> [f64; 3] {
        if s <= -self.s0 {
            left(s)
        } else if s >= self.s0 {
            right(f64::from(self.k), s)
        } else {
            self.bridge_eval(s)
        }
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.eval(s)[0] + self.gauge
    }

    pub fn dphi(&self, s: f64) -> f64 {
        self.eval(s)[1]
    }

    pub fn d2phi(&self, s: f64) -> f64 {
        self.eval(s)[2]
    }

    /// Largest mismatch of value, slope and curvature at `s = -S0` and `s = S0`.
    pub fn matching_residual(&self) -> f64 {
        let kf = f64::from(self.k);
        let l = left(-self.s0);
        let r = right(kf, self.s0);
        let bl = self.bridge_eval(-self.s0);
        let br = self.bridge_eval(self.s0);
        (0..3).map(|d| (l[d] - bl[d]).abs().max((r[d] - br[d]).abs())).fold(0.0, f64::max)
    }

    fn check_matching(&self) -> Result<()> {
        let residual = self.matching_residual();
        if residual > 1e-10 {
            Err(Error::MatchingFailure { residual })
        } else {
            Ok(())
        }
    }

    /// Minimum of `phi''` on an `n`-point grid over `[-3 S0, 3 S0]` and where it occurs.
    pub fn min_curvature(&self, n: usize) -> (f64, f64) {
        let (a, b) = (-3.0 * self.s0, 3.0 * self.s0);
        (0..n)
            .map(|i| {
                let s = a + (b - a) * i as f64 / (n - 1) as f64;
                (self.d2phi(s), s)
            })
            .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc })
    }
}
