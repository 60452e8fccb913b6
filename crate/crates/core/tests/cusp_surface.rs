use cusp_bergman::cusp_surface::*;
use cusp_bergman::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// `||z^j||^2 = 2 pi int e^{j s - p phi(s)} phi''(s) ds` by brute-force quadrature in `s`.
fn norm_by_quadrature(m: &SurfaceModel, p: u32, j: usize) -> f64 {
    let pot = m.potential();
    let f = |s: f64| (j as f64 * s - f64::from(p) * pot.phi(s)).exp() * pot.d2phi(s);
    2.0 * PI * simpson(f, -400.0, 400.0, 400_000)
}

fn perturbed(tau: f64, mode: u32) -> SurfaceModel {
    let pt = Perturbation { tau, support: [-2.0, 2.0], mode };
    build_surface(1, None, BridgeKind::Quadratic, Some(pt), QuadratureSettings::default()).unwrap()
}

proptest! {
    #[test]
    fn cusps_are_exact(k in 1u32..4, t in 1.0f64..200.0) {
        let m = SurfaceModel::standard(k).unwrap();
        let pot = m.potential();
        let s = -m.s0() - t;
        prop_assert!((pot.phi(s) + (-s).ln()).abs() <= 1e-14 * (-s).ln().abs().max(1.0));
        prop_assert!((pot.d2phi(s) * s * s - 1.0).abs() <= 1e-14);
        let s = m.s0() + t;
        prop_assert!((pot.phi(s) - (f64::from(k) * s - s.ln())).abs() <= 1e-12 * s * f64::from(k));
        prop_assert!((pot.d2phi(s) * s * s - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn bridge_is_convex(k in 1u32..5, u in -1.0f64..1.0) {
        let m = SurfaceModel::standard(k).unwrap();
        prop_assert!(m.potential().d2phi(u * m.s0()) > 0.0);
    }

    #[test]
    fn gauge_scales_norms_and_fixes_kernel(lambda in -2.0f64..2.0, r in 0.001f64..0.999) {
        let m = SurfaceModel::standard(1).unwrap();
        let g = m.with_gauge(lambda);
        let p = 12u32;
        let (a, b) = (gram_matrix(&m, p).unwrap(), gram_matrix(&g, p).unwrap());
        for j in [1usize, 5, 11] {
            let ratio = b.norm(j).norm_sq.log_magnitude() - a.norm(j).norm_sq.log_magnitude();
            prop_assert!((ratio + f64::from(p) * lambda).abs() <= 1e-10);
        }
        let z = Complex64::from_polar(r, 0.4);
        let (ka, kb) = (a.kernel(&m, z).unwrap(), b.kernel(&g, z).unwrap());
        prop_assert!(ka.rel_diff(kb) <= 1e-10);
    }

    #[test]
    fn symmetric_kernel_is_rotation_invariant(r in 0.01f64..0.99, dtheta in -3.0f64..3.0) {
        let m = SurfaceModel::standard(1).unwrap();
        let g = gram_matrix(&m, 15).unwrap();
        prop_assert!((g.kernel_ratio(Complex64::from_polar(r, 0.2), 0.0, dtheta) - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn matching_and_defaults() {
    for k in 1..=4 {
        let m = SurfaceModel::standard(k).unwrap();
        assert!((m.s0() - 4.0 / f64::from(k)).abs() < 1e-15);
        assert!(m.potential().matching_residual() <= 1e-12);
        assert_eq!(m.curvature_epsilon(), 1.0);
    }
    let q = build_surface(1, Some(3.0), BridgeKind::Quintic, None, QuadratureSettings::default()).unwrap();
    assert!(q.potential().matching_residual() <= 1e-10);
    assert!(q.potential().min_curvature(10_000).0 > 0.0);
}

#[test]
fn norms_match_brute_force_quadrature() {
    let m = SurfaceModel::standard(1).unwrap();
    let p = 6;
    for j in 1..=5 {
        let got = section_norm(&m, p, j).unwrap().to_f64();
        let want = norm_by_quadrature(&m, p, j);
        assert!((got / want - 1.0).abs() < 1e-9, "j={j}: {got} vs {want}");
    }
}

#[test]
fn kernel_integrates_to_dimension() {
    let m = SurfaceModel::standard(1).unwrap();
    let p = 7;
    let g = gram_matrix(&m, p).unwrap();
    let pot = m.potential();
    let f = |s: f64| {
        let z = Complex64::new((0.5 * s).exp(), 0.0);
        g.kernel(&m, z).unwrap().to_f64() * pot.d2phi(s)
    };
    let total = 2.0 * PI * simpson(f, -300.0, 300.0, 200_000);
    assert!((total - 6.0).abs() < 1e-8, "{total}");
    assert_eq!(g.positive_eigenvalues(), dimension(&m, p).unwrap());
}

#[test]
fn inversion_symmetry() {
    let m = SurfaceModel::standard(1).unwrap();
    let g = gram_matrix(&m, 30).unwrap();
    for j in 1..30 {
        assert!(g.norm(j).norm_sq.rel_diff(g.norm(30 - j).norm_sq) < 1e-10);
    }
}

#[test]
fn perturbed_band_structure() {
    let m = perturbed(0.02, 2);
    let g = gram_matrix(&m, 12).unwrap();
    assert_eq!(g.mode(), GramMode::Perturbed);
    let d = g.delta();
    for j in 0..g.dim() {
        for k in 0..g.dim() {
            let band = j.abs_diff(k) == 2;
            if band {
                assert!(d[(j, k)] != 0.0, "({j}, {k})");
            } else {
                assert_eq!(d[(j, k)], 0.0, "({j}, {k})");
            }
        }
    }
    assert_eq!(g.positive_eigenvalues(), g.dim());
    // phi'' = 1/S0^2 on the quadratic bridge and the bump peaks at 1
    assert!((m.curvature_epsilon() - 1.0 / (1.0 + 0.02 * 16.0)).abs() < 1e-6);
}

#[test]
fn perturbed_entry_matches_quadrature() {
    let (tau, mode, p) = (0.02, 1u32, 10u32);
    let m = perturbed(tau, mode);
    let g = gram_matrix(&m, p).unwrap();
    let pt = *m.perturbation().unwrap();
    let pot = m.potential();
    for j in [2usize, 5, 8] {
        let k = j + 1;
        let radial = simpson(|s| ((j + k) as f64 * 0.5 * s - f64::from(p) * pot.phi(s)).exp() * tau * pt.bump(s), -2.0, 2.0, 20_000);
        let entry = PI * radial;
        let want = entry / (g.norm(j).ln_norm() + g.norm(k).ln_norm()).exp();
        let got = g.delta()[(j - 1, k - 1)];
        assert!((got / want - 1.0).abs() < 1e-8, "j={j}: {got} vs {want}");
    }
}

#[test]
fn kernel_ratio_matches_kernels() {
    let m = perturbed(0.03, 1);
    let g = gram_matrix(&m, 9).unwrap();
    let z = Complex64::from_polar(0.7, 0.3);
    let w = z * Complex64::from_polar((0.5f64 * 0.2).exp(), 0.5);
    let want = (g.ln_frame_kernel(w) - g.ln_frame_kernel(z)).exp();
    assert!((g.kernel_ratio(z, 0.2, 0.5) / want - 1.0).abs() < 1e-12);
}

#[test]
fn json_round_trip() {
    let pt = Perturbation { tau: 0.01, support: [-1.5, 1.0], mode: 3 };
    let m = build_surface(2, None, BridgeKind::Quadratic, Some(pt), QuadratureSettings { bridge_nodes: 128, angular_nodes: 32 })
        .unwrap()
        .with_gauge(0.25);
    let back = SurfaceModel::from_json(&m.to_json()).unwrap();
    assert_eq!(back, m);
    let q = build_surface(1, Some(3.0), BridgeKind::Quintic, None, QuadratureSettings::default()).unwrap();
    assert_eq!(SurfaceModel::from_json(&q.to_json()).unwrap(), q);
    assert!(matches!(SurfaceModel::from_json("{\"k\": 1}"), Err(Error::Domain(_))));
}

#[test]
fn curvature_mass_is_degree() {
    for k in 1..=3 {
        let m = SurfaceModel::standard(k).unwrap();
        assert!((m.curvature_mass(f64::NEG_INFINITY, f64::INFINITY) - f64::from(k)).abs() < 1e-15);
        let half = m.curvature_mass(f64::NEG_INFINITY, 0.0);
        assert!(half > 0.0 && half < f64::from(k));
    }
}

#[test]
fn rejected_models() {
    assert!(matches!(RadialPotential::quadratic(0, None), Err(Error::Domain(_))));
    assert!(matches!(RadialPotential::quadratic(1, Some(3.0)), Err(Error::MatchingFailure { .. })));
    assert!(matches!(RadialPotential::quintic(1, 1.5), Err(Error::Domain(_))));
    let outside = Perturbation { tau: 0.01, support: [-5.0, 1.0], mode: 1 };
    assert!(build_surface(1, None, BridgeKind::Quadratic, Some(outside), QuadratureSettings::default()).is_err());
    let strong = Perturbation { tau: 10.0, support: [-2.0, 2.0], mode: 1 };
    assert!(matches!(
        build_surface(1, None, BridgeKind::Quadratic, Some(strong), QuadratureSettings::default()),
        Err(Error::CurvatureViolation { .. })
    ));
    let m = SurfaceModel::standard(1).unwrap();
    assert!(matches!(dimension(&m, 1), Err(Error::Domain(_))));
    assert!(matches!(section_norm(&m, 5, 5), Err(Error::IndexOutOfRange { index: 5, max: 4 })));
}
