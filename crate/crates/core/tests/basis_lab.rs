use cusp_bergman::basis_lab::*;
use cusp_bergman::cusp_surface::*;
use cusp_bergman::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn ln_fact(n: u32) -> f64 {
    (1..=n).map(|k| f64::from(k).ln()).sum()
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// `1 - ||c_l chi z^l||^2 = 4 pi c_l^2 int (1 - chi^2) t^{2l-1} |log t^2|^{p-2} dt`.
fn head_defect_by_quadrature(p: u32, l: usize, cutoff: &Cutoff) -> f64 {
    let ln_c2 = f64::from(p - 1) * (l as f64).ln() - (2.0 * PI).ln() - ln_fact(p - 2);
    let f = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let chi = cutoff_eval(cutoff, t, 0);
        let lg = (t * t).ln().abs();
        (1.0 - chi * chi) * (ln_c2 + (2.0 * l as f64 - 1.0) * t.ln() + f64::from(p - 2) * lg.ln()).exp()
    };
    let (a, b) = cutoff.bridge();
    4.0 * PI * (simpson(f, a, b, 4000) + simpson(f, b, 1.0, 200_000))
}

fn symmetric_basis(p: u32, kind: HeadSchedule) -> OrthoBasis {
    let m = SurfaceModel::standard(1).unwrap();
    let g = gram_matrix(&m, p).unwrap();
    let c = Cutoff::standard();
    project_and_orthonormalize(&m, &g, &TruncationSchedule::new(&c, 0.5).unwrap(), &c, kind).unwrap()
}

fn perturbed_basis(p: u32) -> (SurfaceModel, OrthoBasis) {
    let pt = Perturbation { tau: 0.02, support: [-2.0, 2.0], mode: 1 };
    let m = build_surface(1, None, BridgeKind::Quadratic, Some(pt), QuadratureSettings::default()).unwrap();
    let g = gram_matrix(&m, p).unwrap();
    let c = Cutoff::standard();
    let b = project_and_orthonormalize(&m, &g, &TruncationSchedule::new(&c, 0.5).unwrap(), &c, HeadSchedule::Delta).unwrap();
    (m, b)
}

proptest! {
    #[test]
    fn schedules_follow_floor_formulas(p in 2u32..2000, r in 0.005f64..0.09, kappa in 0.1f64..2.0) {
        let c = Cutoff::new(r, 0.9).unwrap();
        let s = TruncationSchedule::new(&c, kappa).unwrap();
        let lr = r.ln().abs();
        prop_assert_eq!(s.delta(p) as f64, (f64::from(p - 2) / (2.0 * lr)).floor());
        let ck = (-1.0 - 2.0 * kappa).exp();
        prop_assert_eq!(s.delta_prime(p) as f64, (f64::from(p - 2) * ck / (2.0 * lr)).floor() - 2.0);
        prop_assert!(s.delta_prime(p) <= s.delta(p) as i64);
        if s.delta_prime(p) >= 0 {
            prop_assert!(2.0 * (s.delta_prime(p) + 2) as f64 * lr <= f64::from(p - 2) * ck + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cut_masses_are_ordered(p in 20u32..200, frac in 0.0f64..1.0) {
        let b = symmetric_basis(p, HeadSchedule::Delta);
        prop_assume!(b.heads() >= 1);
        let l = 1 + ((b.heads() - 1) as f64 * frac) as usize;
        let (m1, m2) = b.head_masses(l);
        prop_assert!(m1 <= m2);
        let (defect, bound) = head_norm_defect(p, l, &Cutoff::standard()).unwrap();
        prop_assert!(defect <= bound);
        prop_assert!((defect - m2.to_f64()).abs() <= 1e-14 * defect.max(1e-300));
    }
}

#[test]
fn schedule_values() {
    let c = Cutoff::standard();
    let s = TruncationSchedule::new(&c, 0.5).unwrap();
    assert_eq!(s.delta(62), 10);
    assert_eq!(s.delta_prime(150), 1);
    assert_eq!(s.delta_prime(200), 2);
    assert_eq!(s.delta_prime(500), 9);
    assert_eq!(s.min_p_prime(), 135);
    assert_eq!(s.delta_prime(134), 0);
    assert!((s.alpha() - 1.0 / 13.0).abs() < 1e-15);
    assert!(TruncationSchedule::with_c(&c, 0.5, 0.2).is_err());
    assert!(TruncationSchedule::new(&c, 0.0).is_err());
}

#[test]
fn head_defect_matches_quadrature() {
    let c = Cutoff::standard();
    for (p, l) in [(20u32, 1usize), (40, 3), (62, 10)] {
        let (defect, bound) = head_norm_defect(p, l, &c).unwrap();
        let want = head_defect_by_quadrature(p, l, &c);
        assert!((defect / want - 1.0).abs() < 1e-8, "p={p} l={l}: {defect:e} vs {want:e}");
        assert!(defect <= bound);
    }
    assert!(matches!(head_norm_defect(62, 11, &c), Err(Error::IndexOutOfRange { index: 11, max: 10 })));
}

#[test]
fn symmetric_basis_is_orthonormal_and_diagonal() {
    let b = symmetric_basis(60, HeadSchedule::Delta);
    assert!(b.orthonormality_defect() <= 1e-12);
    assert_eq!(b.echelon_residual(), 0.0);
    assert!(b.idempotence_defect().unwrap() <= 1e-12);
    for l in 1..=b.heads() {
        for j in 1..=b.heads() {
            let (direct, formula) = b.projection_identity(j, l);
            assert!((direct - formula).abs() <= 1e-12, "({j}, {l})");
        }
    }
}

#[test]
fn perturbed_basis_keeps_echelon_form() {
    let (m, b) = perturbed_basis(40);
    assert!(b.orthonormality_defect() <= 1e-10);
    assert!(b.echelon_residual() <= 1e-10);
    assert!(b.idempotence_defect().unwrap() <= 1e-12);
    for l in 1..=b.heads() {
        for j in 1..=b.heads() {
            let (direct, formula) = b.projection_identity(j, l);
            assert!((direct - formula).abs() <= 1e-10, "({j}, {l}): {direct} vs {formula}");
        }
    }
    let rep = b.head_report();
    assert_eq!(rep.rows.len(), b.heads());
    for row in &rep.rows {
        assert!(row.pairing_defect <= row.head_defect + 1e-15, "{row:?}");
    }
    let t = coefficient_tail_bound(&m, &b, b.dim(), b.dim(), 16).unwrap();
    assert!(t.holds, "{t:?}");
}

#[test]
fn heads_approach_model_sections() {
    let small = symmetric_basis(40, HeadSchedule::Delta).head_report().max_sigma_minus_phi0;
    let large = symmetric_basis(80, HeadSchedule::Delta).head_report().max_sigma_minus_phi0;
    assert!(large < small, "{large} vs {small}");
    let one = symmetric_basis(60, HeadSchedule::Delta).head_report().rows[0].sigma_minus_phi0;
    assert!(one <= 1e-8, "{one:e}");
}

#[test]
fn high_power_coefficients() {
    let b = symmetric_basis(200, HeadSchedule::DeltaPrime);
    assert_eq!(b.heads(), 2);
    let eps = epsilon_matrix(&b, b.heads()).unwrap();
    assert!(eps.amax() <= 1e-5, "{}", eps.amax());
    for l in 1..=b.heads() {
        assert!((b.scaled_coefficient(l, l) - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn laplacian_matches_finite_differences() {
    let c = Cutoff::standard();
    let (a, bb) = c.bridge();
    for (p, l) in [(20u32, 2usize), (150, 1)] {
        for f in [0.2, 0.5, 0.8] {
            let z = Complex64::from_polar(a + f * (bb - a), 1.3);
            let e = kodaira_laplacian_apply(p, l, &c, z).unwrap();
            let d = kodaira_laplacian_fd(p, l, &c, z, 1e-4).unwrap();
            assert!((e.bracket - d.bracket).norm() <= 1e-5 * e.bracket.norm());
        }
    }
    // chi is constant away from the bridge
    let inner = kodaira_laplacian_apply(20, 1, &c, Complex64::new(0.5 * a, 0.0)).unwrap();
    assert_eq!(inner.bracket, Complex64::new(0.0, 0.0));
}

#[test]
fn laplacian_decays_along_ladder() {
    let c = Cutoff::standard();
    let s = TruncationSchedule::new(&c, 0.5).unwrap();
    let ladder = laplacian_ladder(&[150, 200, 250], 1, &s, &c).unwrap();
    assert!(ladder.passes, "{:?}", ladder.rates);
    assert!(ladder.ln_norm_over_p2.windows(2).all(|w| w[1] < w[0]));
    assert!(matches!(laplacian_norm_bound(100, 1, &s, &c), Err(Error::EmptySchedule { p: 100, min_p: 135 })));
}

#[test]
fn spectral_gap_is_consistent() {
    assert!(spectral_gap_estimate(150, 6).unwrap() > 0.0);
    let b = symmetric_basis(150, HeadSchedule::DeltaPrime);
    let g = b.gap_consistency(1, 6).unwrap();
    assert!(g.holds, "{g:?}");
}

#[test]
fn export_writes_header_and_matrix() {
    let b = symmetric_basis(12, HeadSchedule::Delta);
    let (mut json, mut csv) = (Vec::new(), Vec::new());
    b.export(&mut json, &mut csv).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(v["dimension"], 11);
    assert_eq!(v["heads"], b.heads());
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 11 * 11);
    assert!(text.starts_with("j,l,sign,log_abs"));
}

#[test]
fn cutoff_validation() {
    assert!(Cutoff::new(0.05, 0.85).is_ok());
    assert!(Cutoff::new(0.2, 0.85).is_err());
    assert!(Cutoff::new(0.05, 1.0).is_err());
    assert!(Cutoff::new(0.05, 0.7).is_err());
    let c = Cutoff::standard();
    assert_eq!(cutoff_eval(&c, 0.01, 0), 1.0);
    assert_eq!(cutoff_eval(&c, 0.2, 0), 0.0);
}
