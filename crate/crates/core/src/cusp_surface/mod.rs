//! The Riemann sphere with punctures at `0` and `infinity`, a line bundle of degree `k`
//! with a rotation-invariant metric whose two ends are exact Poincare cusps.
//!
//! In the coordinate `s = log|z|^2`, `theta = arg z`, the metric is
//! `|1|_h^2 = e^{-phi(s)}` and the area form is `omega = rho(s, theta) ds dtheta` with
//! `rho = phi''(s)` in the unperturbed model. The optional perturbation adds
//! `tau * bump(s) * cos(m theta)` to `rho` inside the bridge.

mod gram;
mod potential;

pub use gram::{global_kernel, gram_matrix, section_norm, GramData, GramMode, SectionNorm};
pub use potential::{BridgeKind, RadialPotential};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Angular perturbation of the area form, supported inside the bridge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub tau: f64,
    pub support: [f64; 2],
    pub mode: u32,
}

impl Perturbation {
    /// Smooth bump `exp(1 - 1/(1 - u^2))` on the support, equal to 1 at its center.
    pub fn bump(&self, s: f64) -> f64 {
        let [a, b] = self.support;
        let u = (2.0 * s - (a + b)) / (b - a);
        if u.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - u * u)).exp()
        }
    }
}

/// Resolution of the tensor quadrature used in perturbed mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub bridge_nodes: usize,
    pub angular_nodes: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings { bridge_nodes: 256, angular_nodes: 64 }
    }
}

/// A validated surface model.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceModel {
    potential: RadialPotential,
    perturbation: Option<Perturbation>,
    quadrature: QuadratureSettings,
    curvature_epsilon: f64,
}

const VALIDATION_POINTS: usize = 10_000;

/// Build and validate a model. `s0 = None` selects `4/k`.
pub fn build_surface(
    k: u32,
    s0: Option<f64>,
    bridge: BridgeKind,
    perturbation: Option<Perturbation>,
    quadrature: QuadratureSettings,
) -> Result<SurfaceModel> {
    let potential = match bridge {
        BridgeKind::Quadratic => RadialPotential::quadratic(k, s0)?,
        BridgeKind::Quintic => RadialPotential::quintic(k, s0.unwrap_or(4.0 / f64::from(k.max(1))))?,
    };
    SurfaceModel::from_potential(potential, perturbation, quadrature)
}

impl SurfaceModel {
    /// Default model for degree `k`: quadratic bridge, no perturbation.
    pub fn standard(k: u32) -> Result<Self> {
        build_surface(k, None, BridgeKind::Quadratic, None, QuadratureSettings::default())
    }

    pub fn from_potential(
        potential: RadialPotential,
        perturbation: Option<Perturbation>,
        quadrature: QuadratureSettings,
    ) -> Result<Self> {
        let (min_c, at) = potential.min_curvature(VALIDATION_POINTS);
        if !(min_c > 0.0) {
            return Err(Error::CurvatureViolation { s: at, theta: 0.0, value: min_c });
        }
        if quadrature.bridge_nodes < 2 || quadrature.angular_nodes < 4 {
            return Err(Error::Domain("quadrature resolution too small".into()));
        }
        let mut eps = 1.0;
        if let Some(pt) = &perturbation {
            let [a, b] = pt.support;
            let s0 = potential.s0();
            if !(a < b && a > -s0 && b < s0) {
                return Err(Error::Domain(format!("perturbation support [{a}, {b}] must lie inside (-{s0}, {s0})")));
            }
            if pt.mode == 0 {
                return Err(Error::Domain("angular mode must satisfy m >= 1".into()));
            }
            let n_theta = (8 * pt.mode as usize).max(64);
            for i in 0..VALIDATION_POINTS {
                let s = a + (b - a) * i as f64 / (VALIDATION_POINTS - 1) as f64;
                let base = potential.d2phi(s);
                let bump = pt.bump(s);
                if bump == 0.0 {
                    continue;
                }
                for q in 0..n_theta {
                    let theta = 2.0 * std::f64::consts::PI * q as f64 / n_theta as f64;
                    let rho = base + pt.tau * bump * (f64::from(pt.mode) * theta).cos();
                    if !(rho > 0.0) {
                        return Err(Error::CurvatureViolation { s, theta, value: rho });
                    }
                    eps = f64::min(eps, base / rho);
                }
            }
        }
        Ok(SurfaceModel { potential, perturbation, quadrature, curvature_epsilon: eps })
    }

    pub fn potential(&self) -> &RadialPotential {
        &self.potential
    }

    pub fn perturbation(&self) -> Option<&Perturbation> {
        self.perturbation.as_ref()
    }

    pub fn quadrature(&self) -> QuadratureSettings {
        self.quadrature
    }

    pub fn k(&self) -> u32 {
        self.potential.k()
    }

    pub fn s0(&self) -> f64 {
        self.potential.s0()
    }

    /// Largest `eps` with `i R^L >= eps * omega` on the validation grid (1 without perturbation).
    pub fn curvature_epsilon(&self) -> f64 {
        self.curvature_epsilon
    }

    /// True when a perturbation with nonzero amplitude is present.
    pub fn is_perturbed(&self) -> bool {
        self.perturbation.is_some_and(|p| p.tau != 0.0)
    }

    /// Area density `rho(s, theta)`.
    pub fn area_density(&self, s: f64, theta: f64) -> f64 {
        let base = self.potential.d2phi(s);
        match &self.perturbation {
            Some(pt) => base + pt.tau * pt.bump(s) * (f64::from(pt.mode) * theta).cos(),
            None => base,
        }
    }

    /// Same model with `h` scaled by `e^{-gauge}`.
    pub fn with_gauge(&self, gauge: f64) -> Self {
        SurfaceModel { potential: self.potential.clone().with_gauge(gauge), ..self.clone() }
    }

    /// Expected zero mass of a section in `s1 <= s <= s2`, per unit `p`.
    pub fn curvature_mass(&self, s1: f64, s2: f64) -> f64 {
        let d = |s: f64| {
            if s == f64::NEG_INFINITY {
                0.0
            } else if s == f64::INFINITY {
                f64::from(self.k())
            } else {
                self.potential.dphi(s)
            }
        };
        d(s2) - d(s1)
    }
}

/// `d_p = k p - 1`, the number of monomials `z^j`, `1 <= j <= kp - 1`.
pub fn dimension(model: &SurfaceModel, p: u32) -> Result<usize> {
    if p < 2 {
        return Err(Error::Domain(format!("tensor power must satisfy p >= 2, got {p}")));
    }
    let d = i64::from(model.k()) * i64::from(p) - 1;
    if d < 1 {
        return Err(Error::DegenerateDimension(d));
    }
    Ok(d as usize)
}

/// JSON document form of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub k: u32,
    #[serde(rename = "S0")]
    pub s0: f64,
    pub bridge: BridgeKind,
    pub perturbation: Option<Perturbation>,
    pub quadrature: QuadratureSettings,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub gauge: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl From<&SurfaceModel> for SurfaceSpec {
    fn from(m: &SurfaceModel) -> Self {
        SurfaceSpec {
            k: m.k(),
            s0: m.s0(),
            bridge: m.potential.bridge(),
            perturbation: m.perturbation,
            quadrature: m.quadrature,
            gauge: m.potential.gauge(),
        }
    }
}

impl TryFrom<SurfaceSpec> for SurfaceModel {
    type Error = Error;
    fn try_from(spec: SurfaceSpec) -> Result<Self> {
        let m = build_surface(spec.k, Some(spec.s0), spec.bridge, spec.perturbation, spec.quadrature)?;
        Ok(if spec.gauge != 0.0 { m.with_gauge(spec.gauge) } else { m })
    }
}

impl SurfaceModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&SurfaceSpec::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SurfaceSpec =
            serde_json::from_str(text).map_err(|e| Error::Domain(format!("surface JSON: {e}")))?;
        spec.try_into()
    }
}
