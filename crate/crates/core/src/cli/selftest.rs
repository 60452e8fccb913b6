//! Fast invariant suite behind the `selftest` command.

use crate::basis_lab::{
    head_norm_defect, kodaira_laplacian_apply, kodaira_laplacian_fd, project_and_orthonormalize, Cutoff, HeadSchedule,
    TruncationSchedule,
};
use crate::cusp_surface::{gram_matrix, SurfaceModel};
use crate::disc_model::{flat_region_deviation, model_norm_restricted, reproducing_quadrature};
use crate::error::Result;
use crate::geometry_apps::{eta_p, fs_pullback, sample_sections, CuspComparison};
use crate::numerics::{reg_gamma_pair, reg_gamma_upper, stirling_ratio};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelftestRow {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn row(name: &'static str, value: Result<f64>, tolerance: f64) -> SelftestRow {
    match value {
        Ok(v) => SelftestRow { name, value: v, tolerance, pass: v <= tolerance },
        Err(_) => SelftestRow { name, value: f64::NAN, tolerance, pass: false },
    }
}

fn max_of<I: IntoIterator<Item = Result<f64>>>(items: I) -> Result<f64> {
    items.into_iter().try_fold(0.0, |m: f64, v| Ok(m.max(v?.abs())))
}

/// Run every check; a row passes when its value is at most its tolerance.
pub fn run_selftest() -> Vec<SelftestRow> {
    let mut rows = Vec::new();

    rows.push(row(
        "model_normalization",
        max_of([2u32, 10, 50, 200].iter().flat_map(|&p| [1u64, 5, 50].map(move |l| Ok(model_norm_restricted(p, l, 1.0)? - 1.0)))),
        1e-10,
    ));
    rows.push(row("flat_region_p160", max_of([0.3, 0.5, 0.7, 0.9].map(|z| flat_region_deviation(160, z))), 1e-6));
    rows.push(row(
        "gamma_complement",
        max_of((1..=20).flat_map(|i| {
            (1..=20).map(move |j| {
                let (a, x) = (0.37 * f64::from(i).powi(2), 0.21 * f64::from(j).powi(2));
                let (lo, hi) = reg_gamma_pair(a, x)?;
                Ok(lo.to_f64() + hi.to_f64() - 1.0)
            })
        })),
        1e-12,
    ));
    rows.push(row("gamma_closed_form", reg_gamma_upper(2.0, 2.0).map(|q| q - 3.0 * (-2.0f64).exp()), 1e-12));
    rows.push(row(
        "stirling_ratio",
        Ok([10u64, 50, 200].iter().map(|&p| (stirling_ratio(p) - 1.0).abs() * p as f64).fold(0.0, f64::max)),
        1.0,
    ));

    let model = SurfaceModel::standard(1);
    let m = match &model {
        Ok(m) => m,
        Err(_) => {
            rows.push(SelftestRow { name: "surface_model", value: f64::NAN, tolerance: 0.0, pass: false });
            return rows;
        }
    };
    let pot = m.potential();
    let c = pot.coefficients();
    let want = [1.5 - 4f64.ln(), 0.5, 1.0 / 32.0];
    rows.push(row("bridge_coefficients", Ok((0..3).map(|i| (c[i] - want[i]).abs()).fold(0.0, f64::max)), 1e-12));
    rows.push(row("c2_matching", Ok(pot.matching_residual()), 1e-12));
    rows.push(row("curvature_positive", Ok(-pot.min_curvature(10_000).0), -f64::MIN_POSITIVE));

    let g40 = gram_matrix(m, 40);
    rows.push(row(
        "norm_symmetry_p40",
        g40.as_ref().map_err(Clone::clone).map(|g| {
            let d = g.dim();
            (1..=d).map(|j| (g.norm(j).ln_norm() - g.norm(d + 1 - j).ln_norm()).abs()).fold(0.0, f64::max)
        }),
        1e-10,
    ));
    let selfc = CuspComparison::self_model(40, m.s0());
    rows.push(row(
        "quotient_self_comparison",
        max_of([-30.0, -10.0, -5.0].map(|s: f64| Ok(selfc.quotient_minus_one(Complex64::new((0.5 * s).exp(), 0.0))?.to_f64()))),
        0.0,
    ));
    rows.push(row(
        "eta_self_comparison",
        max_of([f64::NEG_INFINITY, -30.0, -10.0, -5.0].map(|s: f64| eta_p(&selfc, Complex64::new((0.5 * s).exp(), 0.0)))),
        0.0,
    ));

    let cutoff = Cutoff::standard();
    rows.push(row(
        "head_defect_majorant_p62",
        TruncationSchedule::new(&cutoff, 0.5).and_then(|s| {
            max_of((1..=s.delta(62)).map(|l| head_norm_defect(62, l, &cutoff).map(|(d, b)| (d - b).max(0.0))))
        }),
        0.0,
    ));
    rows.push(row(
        "basis_orthonormality_p40",
        g40.as_ref().map_err(Clone::clone).and_then(|g| {
            let s = TruncationSchedule::new(&cutoff, 0.5)?;
            let b = project_and_orthonormalize(m, g, &s, &cutoff, HeadSchedule::Delta)?;
            Ok(b.orthonormality_defect().max(b.echelon_residual()))
        }),
        1e-9,
    ));
    let (a, b) = cutoff.bridge();
    rows.push(row(
        "laplacian_closed_form",
        max_of([0.25, 0.5, 0.75].map(|f| {
            let z = Complex64::from_polar(a + f * (b - a), 0.4);
            let e = kodaira_laplacian_apply(150, 1, &cutoff, z)?.bracket;
            let d = kodaira_laplacian_fd(150, 1, &cutoff, z, 1e-4)?.bracket;
            Ok((e - d).norm() / e.norm())
        })),
        1e-5,
    ));
    rows.push(row(
        "reproducing_quadrature",
        max_of([(4u32, 1u64, 0.3), (8, 2, 0.1)].map(|(p, l, x): (u32, u64, f64)| {
            let v = reproducing_quadrature(p, l, Complex64::new(x, 0.0), 64)?;
            Ok((v - Complex64::new(x.powi(l as i32), 0.0)).norm() / x.powi(l as i32))
        })),
        1e-8,
    ));
    rows.push(row(
        "fs_defect_p60",
        gram_matrix(m, 60).and_then(|g| Ok(fs_pullback(m, &g, -10.0)?.defect.unwrap_or(f64::INFINITY))),
        1e-8,
    ));
    rows.push(row(
        "zero_mass_and_determinism",
        gram_matrix(m, 10).map(|g| {
            let (e1, e2) = (sample_sections(&g, 40, 7), sample_sections(&g, 40, 7));
            if e1.mass_conserved() && e1 == e2 && e1.failures.is_empty() {
                0.0
            } else {
                1.0
            }
        }),
        0.0,
    ));
    rows
}
