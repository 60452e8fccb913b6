//! The individual commands.

use super::selftest::run_selftest;
use super::{resolve_surface, Cell, Cli, CliError, Command, Format, HeadKind, Report, RunConfig, EXIT_INVARIANT, EXIT_OK};
use crate::basis_lab::{epsilon_matrix, project_and_orthonormalize, Cutoff, HeadSchedule, TruncationSchedule};
use crate::cusp_surface::{gram_matrix, GramMode, SurfaceModel, SurfaceSpec};
use crate::disc_model::model_kernel_diag;
use crate::geometry_apps::{
    current_mass, eta_p, fs_pullback_at, geometric_grid, ladder_fit, quotient_scan, sample_sections, zero_statistics,
    CuspComparison,
};
use num_complex::Complex64;
use serde_json::json;
use std::collections::BTreeMap;

/// Largest admissible failure fraction of a Monte-Carlo ensemble.
const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Tolerance on the basis orthonormality and echelon checks.
const BASIS_TOLERANCE: f64 = 1e-9;

fn check_p(p: u32) -> Result<u32, CliError> {
    if p < 2 {
        return Err(CliError::config(format!("tensor power must satisfy p >= 2, got p = {p}")));
    }
    Ok(p)
}

fn base_config(cli: &Cli, command: &str, default_format: Format) -> RunConfig {
    let c = &cli.common;
    RunConfig {
        command: command.to_string(),
        surface: None,
        p: None,
        p_ladder: None,
        r: c.r,
        beta: c.beta,
        kappa: c.kappa,
        grid: None,
        seed: c.seed,
        out: c.out.as_ref().map(|p| p.display().to_string()),
        format: c.format.unwrap_or(default_format),
        params: BTreeMap::new(),
    }
}

fn surface(cli: &Cli) -> Result<SurfaceModel, CliError> {
    resolve_surface(cli.common.surface.as_deref(), cli.common.k)
}

pub(super) fn dispatch(cli: &Cli) -> Result<(RunConfig, Report), CliError> {
    match &cli.command {
        Command::ModelKernel { p, z_abs, grid } => {
            let p = check_p(*p)?;
            let default = if grid.is_some() { Format::Csv } else { Format::Json };
            let mut cfg = base_config(cli, "model-kernel", default);
            cfg.p = Some(p);
            cfg.grid = grid.map(|g| g.to_string());
            cfg.params.insert("z_abs".into(), json!(z_abs));
            let mut points: Vec<f64> = z_abs.clone();
            if let Some(g) = grid {
                points.extend(g.z_values());
            }
            if points.is_empty() {
                return Err(CliError::config("model-kernel needs --z-abs or --grid"));
            }
            Ok((cfg, model_kernel(p, &points)?))
        }
        Command::QuotientScan { p, p_ladder, s_range, points, angles } => {
            let mut ladder = p_ladder.clone();
            if let Some(p) = p {
                ladder.push(*p);
            }
            if ladder.is_empty() {
                return Err(CliError::config("quotient-scan needs --p or --p-ladder"));
            }
            for &q in &ladder {
                check_p(q)?;
            }
            let model = surface(cli)?;
            let mut cfg = base_config(cli, "quotient-scan", Format::Csv);
            cfg.surface = Some(SurfaceSpec::from(&model));
            cfg.p = *p;
            cfg.p_ladder = Some(ladder.clone());
            cfg.grid = Some(format!("geometric:{}:{}:{}", s_range.start, s_range.end, points));
            cfg.params.insert("angles".into(), json!(angles));
            let grid = geometric_grid(s_range.start, s_range.end, *points)?;
            Ok((cfg, scan(&model, &ladder, &grid, *angles)?))
        }
        Command::Basis { p, heads, coefficients } => {
            let p = check_p(*p)?;
            let model = surface(cli)?;
            let mut cfg = base_config(cli, "basis", Format::Csv);
            cfg.surface = Some(SurfaceSpec::from(&model));
            cfg.p = Some(p);
            cfg.params.insert("heads".into(), json!(heads));
            if let Some(path) = coefficients {
                cfg.params.insert("coefficients".into(), json!(path.display().to_string()));
            }
            Ok((cfg, basis(cli, &model, p, *heads, coefficients.as_deref())?))
        }
        Command::Zeros { p, samples, annulus } => {
            let p = check_p(*p)?;
            if *samples < 2 {
                return Err(CliError::config("zeros needs at least 2 samples"));
            }
            let model = surface(cli)?;
            let mut cfg = base_config(cli, "zeros", Format::Csv);
            cfg.surface = Some(SurfaceSpec::from(&model));
            cfg.p = Some(p);
            cfg.params.insert("samples".into(), json!(samples));
            cfg.params.insert("annulus".into(), json!([annulus.start, annulus.end]));
            Ok((cfg, zeros(&model, p, *samples, cli.common.seed, annulus.start, annulus.end)?))
        }
        Command::FsMetric { p, grid, theta } => {
            let p = check_p(*p)?;
            let model = surface(cli)?;
            let mut cfg = base_config(cli, "fs-metric", Format::Csv);
            cfg.surface = Some(SurfaceSpec::from(&model));
            cfg.p = Some(p);
            cfg.grid = Some(grid.to_string());
            cfg.params.insert("theta".into(), json!(theta));
            Ok((cfg, fs_metric(&model, p, &grid.s_values(), *theta)?))
        }
        Command::Selftest => {
            let cfg = base_config(cli, "selftest", Format::Csv);
            Ok((cfg, selftest()))
        }
    }
}

fn model_kernel(p: u32, points: &[f64]) -> Result<Report, CliError> {
    let mut rows = Vec::with_capacity(points.len());
    for &z in points {
        let s = 2.0 * z.ln();
        let k = model_kernel_diag(p, z).map_err(|e| match e {
            crate::Error::NonConvergence { achieved, .. } => CliError::numerical(format!(
                "certified relative tail {achieved:e} of the model kernel series at |z| = {z} exceeds its tolerance"
            )),
            other => other.into(),
        })?;
        rows.push(vec![
            Cell::F(z),
            Cell::F(s),
            Cell::F(k.log_value.to_f64()),
            Cell::F(k.log_value.log_magnitude()),
            Cell::F(k.certified_relative_tail),
            Cell::U(k.terms_used as u64),
        ]);
    }
    Ok(Report {
        columns: vec!["z_abs", "s", "value", "log_value", "certified_relative_tail", "terms_used"],
        rows,
        ..Default::default()
    })
}

fn scan(model: &SurfaceModel, ladder: &[u32], grid: &[f64], angles: usize) -> Result<Report, CliError> {
    let mut rows = Vec::new();
    let mut per_p = Vec::new();
    let (mut q, mut d1, mut d2) = (Vec::new(), Vec::new(), Vec::new());
    for &p in ladder {
        let sc = quotient_scan(model, p, grid, angles)?;
        for r in &sc.rows {
            rows.push(vec![
                Cell::U(u64::from(r.p)),
                Cell::F(r.s),
                Cell::F(r.z_abs),
                Cell::F(r.quotient_minus_1),
                Cell::F(r.d1_abs),
                Cell::F(r.d2_abs),
            ]);
        }
        per_p.push(json!({
            "p": p,
            "sup_quotient": sc.sup_quotient,
            "sup_d1": sc.sup_d1,
            "sup_d2": sc.sup_d2,
            "angular_spread": sc.angular_spread,
        }));
        q.push(sc.sup_quotient);
        d1.push(sc.sup_d1);
        d2.push(sc.sup_d2);
    }
    let mut summary = json!({ "ladder": per_p });
    if ladder.len() >= 2 {
        let (fq, f1, f2) = (ladder_fit(ladder, &q), ladder_fit(ladder, &d1), ladder_fit(ladder, &d2));
        summary["slope"] = json!(fq.slope);
        summary["monotone"] = json!(fq.monotone);
        summary["d1_slope"] = json!(f1.slope);
        summary["d1_monotone"] = json!(f1.monotone);
        summary["d2_slope"] = json!(f2.slope);
        summary["d2_monotone"] = json!(f2.monotone);
    }
    Ok(Report {
        columns: vec!["p", "s", "z_abs", "quotient_minus_1", "d1_abs", "d2_abs"],
        rows,
        summary: Some(summary),
        ..Default::default()
    })
}

fn basis(
    cli: &Cli,
    model: &SurfaceModel,
    p: u32,
    heads: HeadKind,
    coefficients: Option<&std::path::Path>,
) -> Result<Report, CliError> {
    let cutoff = Cutoff::new(cli.common.r, cli.common.beta)?;
    let schedule = TruncationSchedule::new(&cutoff, cli.common.kappa)?;
    let kind = match heads {
        HeadKind::Delta => HeadSchedule::Delta,
        HeadKind::DeltaPrime => HeadSchedule::DeltaPrime,
    };
    let gram = gram_matrix(model, p)?;
    let b = project_and_orthonormalize(model, &gram, &schedule, &cutoff, kind)?;
    if let Some(path) = coefficients {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::config(format!("cannot write '{}': {e}", path.display())))?;
        b.export(std::io::sink(), std::io::BufWriter::new(file))?;
    }
    let rep = b.head_report();
    let rows = rep
        .rows
        .iter()
        .map(|h| {
            vec![
                Cell::U(h.l as u64),
                Cell::F(h.head_defect),
                Cell::F(h.correction),
                Cell::F(h.sigma_minus_phi0),
                Cell::F(h.pairing_defect),
            ]
        })
        .collect();
    let orth = b.orthonormality_defect();
    let echelon = b.echelon_residual();
    let eps = if b.heads() > 0 { Some(epsilon_matrix(&b, b.heads())?.amax()) } else { None };
    let ok = orth <= BASIS_TOLERANCE && echelon <= BASIS_TOLERANCE;
    Ok(Report {
        columns: vec!["l", "head_defect", "correction", "sigma_minus_phi0", "pairing_defect"],
        rows,
        summary: Some(json!({
            "p": p,
            "dimension": b.dim(),
            "heads": b.heads(),
            "gram_mode": if gram.mode() == GramMode::Symmetric { "symmetric" } else { "perturbed" },
            "orthonormality_defect": orth,
            "echelon_residual": echelon,
            "epsilon_max": eps,
            "max_sigma_minus_phi0": rep.max_sigma_minus_phi0,
            "max_pairing_defect": rep.max_pairing_defect,
            "invariants_hold": ok,
        })),
        status: if ok { EXIT_OK } else { EXIT_INVARIANT },
        text: None,
    })
}

fn zeros(model: &SurfaceModel, p: u32, samples: usize, seed: u64, s1: f64, s2: f64) -> Result<Report, CliError> {
    let gram = gram_matrix(model, p)?;
    let ens = sample_sections(&gram, samples, seed);
    let fraction = ens.failures.len() as f64 / samples as f64;
    if fraction >= MAX_FAILURE_FRACTION {
        return Err(CliError::numerical(format!(
            "root finder failed on {} of {samples} samples (backward error above tolerance)",
            ens.failures.len()
        )));
    }
    let stats = zero_statistics(model, &ens, s1, s2)?;
    let kernel_mass = current_mass(&gram, s1, s2, 64)?;
    let conserved = ens.mass_conserved();
    let mut rows = Vec::new();
    for smp in &ens.samples {
        for r in &smp.roots {
            rows.push(vec![Cell::U(smp.id), Cell::F(r.re), Cell::F(r.im)]);
        }
    }
    Ok(Report {
        columns: vec!["sample_id", "root_re", "root_im"],
        rows,
        summary: Some(json!({
            "p": ens.p,
            "k": ens.k,
            "n_samples": ens.n_samples,
            "seed": ens.seed,
            "failures": ens.failures,
            "annulus": [s1, s2],
            "empirical": stats.empirical,
            "theoretical": stats.theoretical,
            "standard_error": stats.mc_error,
            "kernel_mass": kernel_mass,
            "mass_conserved": conserved,
        })),
        status: if conserved { EXIT_OK } else { EXIT_INVARIANT },
        text: None,
    })
}

fn fs_metric(model: &SurfaceModel, p: u32, s_values: &[f64], theta: f64) -> Result<Report, CliError> {
    let gram = gram_matrix(model, p)?;
    let cmp = CuspComparison::new(model, &gram);
    let limit = -model.s0() * (1.0 - 1e-12);
    let mut rows = Vec::with_capacity(s_values.len());
    let (mut max_defect, mut max_eta): (f64, f64) = (0.0, 0.0);
    for &s in s_values {
        let z = Complex64::from_polar((0.5 * s).exp(), theta);
        let f = fs_pullback_at(model, &gram, z)?;
        let eta = if s <= limit { Some(eta_p(&cmp, z)?) } else { None };
        if s <= limit {
            max_defect = max_defect.max(f.defect.unwrap_or(0.0));
            max_eta = max_eta.max(eta.unwrap_or(0.0).abs());
        }
        rows.push(vec![Cell::F(s), Cell::F(f.theta), Cell::F(f.density), f.model_density.into(), f.defect.into(), eta.into()]);
    }
    let eta_at_puncture = eta_p(&cmp, Complex64::new(0.0, 0.0)).ok();
    Ok(Report {
        columns: vec!["s", "theta", "density", "model_density", "defect", "eta"],
        rows,
        summary: Some(json!({
            "p": p,
            "max_cusp_defect": max_defect,
            "max_cusp_eta": max_eta,
            "eta_at_puncture": eta_at_puncture,
        })),
        ..Default::default()
    })
}

fn selftest() -> Report {
    let rows = run_selftest();
    let all = rows.iter().all(|r| r.pass);
    let mut text = format!("{:<30} {:>12} {:>12}  result\n", "invariant", "value", "tolerance");
    for r in &rows {
        text.push_str(&format!(
            "{:<30} {:>12.3e} {:>12.3e}  {}\n",
            r.name,
            r.value,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    text.push_str(&format!("{} of {} invariants hold\n", rows.iter().filter(|r| r.pass).count(), rows.len()));
    Report {
        columns: vec!["invariant", "value", "tolerance", "pass"],
        rows: rows
            .iter()
            .map(|r| vec![Cell::S(r.name.to_string()), Cell::F(r.value), Cell::F(r.tolerance), Cell::S(r.pass.to_string())])
            .collect(),
        summary: Some(json!({ "all_pass": all })),
        status: if all { EXIT_OK } else { EXIT_INVARIANT },
        text: Some(text),
    }
}
