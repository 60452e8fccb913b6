//! Gauss-Legendre rules and adaptive integration, including a log-domain variant.

use super::logreal::LogReal;
use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Nodes and positive weights on a finite interval.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: [f64; 2],
}

impl QuadratureRule {
    /// Highest polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Same rule mapped affinely onto `[a, b]`.
    pub fn rescaled(&self, a: f64, b: f64) -> Result<QuadratureRule> {
        check_interval(a, b)?;
        let [c, d] = self.interval;
        let scale = (b - a) / (d - c);
        Ok(QuadratureRule {
            nodes: self.nodes.iter().map(|x| a + (x - c) * scale).collect(),
            weights: self.weights.iter().map(|w| w * scale).collect(),
            interval: [a, b],
        })
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a < b && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInterval { a, b })
    }
}

/// Legendre `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn reference_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `n`-node Gauss-Legendre rule on `[a, b]`, exact through degree `2n - 1`.
pub fn gauss_rule(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    check_interval(a, b)?;
    if n == 0 {
        return Err(Error::Domain("gauss_rule requires n >= 1".into()));
    }
    let (nodes, weights) = reference_rule(n);
    QuadratureRule { nodes, weights, interval: [-1.0, 1.0] }.rescaled(a, b)
}

/// `panels` equal copies of an `n`-node rule covering `[a, b]`.
pub fn composite_gauss(n: usize, panels: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    check_interval(a, b)?;
    let base = gauss_rule(n, -1.0, 1.0)?;
    let h = (b - a) / panels.max(1) as f64;
    let mut nodes = Vec::with_capacity(n * panels);
    let mut weights = Vec::with_capacity(n * panels);
    for k in 0..panels.max(1) {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == panels.max(1) { b } else { lo + h };
        let r = base.rescaled(lo, hi)?;
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    Ok(QuadratureRule { nodes, weights, interval: [a, b] })
}

fn pair() -> &'static (QuadratureRule, QuadratureRule) {
    static PAIR: OnceLock<(QuadratureRule, QuadratureRule)> = OnceLock::new();
    PAIR.get_or_init(|| {
        (gauss_rule(10, -1.0, 1.0).expect("rule"), gauss_rule(20, -1.0, 1.0).expect("rule"))
    })
}

/// Controls for the adaptive integrators.
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions { rel_tol: 1e-13, abs_tol: 0.0, initial_panels: 8, max_panels: 20_000 }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: LogReal,
    error: LogReal,
}

fn eval_panel<F: Fn(f64) -> LogReal>(g: &F, a: f64, b: f64) -> Panel {
    let (lo, hi) = pair();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let v_lo: Vec<LogReal> = lo.nodes.iter().map(|&x| g(mid + half * x)).collect();
    let v_hi: Vec<LogReal> = hi.nodes.iter().map(|&x| g(mid + half * x)).collect();
    let m = v_lo
        .iter()
        .chain(&v_hi)
        .filter(|v| !v.is_zero())
        .map(|v| v.log_magnitude())
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Panel { a, b, value: LogReal::ZERO, error: LogReal::ZERO };
    }
    let shifted = |v: &LogReal| -> f64 {
        if v.is_zero() {
            0.0
        } else {
            f64::from(v.sign()) * (v.log_magnitude() - m).exp()
        }
    };
    let s_lo: f64 = lo.weights.iter().zip(&v_lo).map(|(w, v)| w * shifted(v)).sum();
    let s_hi: f64 = hi.weights.iter().zip(&v_hi).map(|(w, v)| w * shifted(v)).sum();
    let scale = LogReal::from_f64(half) * LogReal::from_ln(m);
    Panel {
        a,
        b,
        value: LogReal::from_f64(s_hi) * scale,
        error: LogReal::from_f64((s_hi - s_lo).abs()) * scale,
    }
}

/// Globally adaptive Gauss 10/20 integration of an integrand given in the log domain.
///
/// Each panel is evaluated after shifting by its own maximum, so integrands far
/// outside the native floating range are handled.
pub fn integrate_log<F: Fn(f64) -> LogReal>(g: F, a: f64, b: f64, opts: AdaptiveOptions) -> Result<LogReal> {
    check_interval(a, b)?;
    let n0 = opts.initial_panels.max(1);
    let h = (b - a) / n0 as f64;
    let mut panels: Vec<Panel> = (0..n0)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == n0 { b } else { lo + h };
            eval_panel(&g, lo, hi)
        })
        .collect();
    loop {
        let total: LogReal = panels.iter().map(|p| p.value).sum();
        let err: LogReal = panels.iter().map(|p| p.error).sum();
        let allowed = LogReal::from_f64(opts.rel_tol) * total.abs() + LogReal::from_f64(opts.abs_tol);
        if err.cmp_abs(allowed).is_le() {
            return Ok(total);
        }
        if panels.len() >= opts.max_panels {
            let achieved = if total.is_zero() { f64::INFINITY } else { (err / total.abs()).to_f64() };
            return Err(Error::NonConvergence { what: "adaptive quadrature".into(), achieved });
        }
        // bisect every panel above its fair share of the allowed error
        let share = allowed / LogReal::from_f64(panels.len() as f64);
        let worst = panels
            .iter()
            .map(|p| p.error)
            .max_by(|x, y| x.cmp_abs(*y))
            .expect("nonempty");
        let mut next = Vec::with_capacity(2 * panels.len());
        for p in panels {
            let split = p.error.cmp_abs(share).is_gt() || p.error == worst;
            if !split {
                next.push(p);
                continue;
            }
            let mid = 0.5 * (p.a + p.b);
            if !(mid > p.a && mid < p.b) {
                let achieved = if total.is_zero() { f64::INFINITY } else { (err / total.abs()).to_f64() };
                return Err(Error::NonConvergence { what: "adaptive quadrature (panel underflow)".into(), achieved });
            }
            next.push(eval_panel(&g, p.a, mid));
            next.push(eval_panel(&g, mid, p.b));
        }
        panels = next;
    }
}

/// Adaptive integration of an ordinary real integrand.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: AdaptiveOptions) -> Result<f64> {
    Ok(integrate_log(|x| LogReal::from_f64(f(x)), a, b, opts)?.to_f64())
}
