use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};
use num_complex::Complex64;
use satnls_core::audit::{estimate_bounds_for, symmetry_audit, uniqueness_probe, AuditResult, UniquenessProbe};
use satnls_core::gauge::{
    evolution_residual, gauge_inverse, scaling_laws, solve_profile, FieldKind, ScalingLaws, SpaceTimeField,
};
use satnls_core::mesh::ComplexGridFn;
use satnls_core::solver::{
    check_admissibility, energy_terms, identity_tolerance, solve_saturated, weak_residual, AdmissibilityReport,
    AprioriAudit, ProblemSpec, SolveReport,
};
use satnls_core::support::{dead_core_scan, support_expansion, support_report, SupportReport};
use serde::Serialize;

use crate::config::{load, solve_config, ConfigError, LoadedConfig, SCHEMA_VERSION};
use crate::io::{read_field, write_field, write_json, write_table, write_text};
use crate::plot::{heatmap, line_plot, Series};

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
}

pub struct Common<'a> {
    pub config: &'a Path,
    pub out: Option<&'a Path>,
    pub seed: Option<u64>,
}

fn out_dir(common: &Common, loaded: &LoadedConfig) -> anyhow::Result<PathBuf> {
    let dir = match (common.out, &loaded.config.output.directory) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => loaded.base_dir.join(d),
        (None, None) => PathBuf::from("satnls-out"),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// The configuration as it was run, with the effective seed filled in.
fn effective(loaded: &LoadedConfig, seed: u64) -> crate::config::RunConfig {
    let mut cfg = loaded.config.clone();
    cfg.solver.seed = Some(seed);
    cfg
}

#[derive(Debug, Serialize)]
struct LevelSummary {
    n: u64,
    delta: u8,
    iterations: usize,
    converged: bool,
    change: Option<f64>,
    h1_norm: f64,
    weak_residual: f64,
    identity_real: f64,
    identity_imag: f64,
    identity_tolerance: f64,
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    schema_version: u32,
    converged: bool,
    continuation_converged: bool,
    polished: bool,
    weak_residual: f64,
    clamped_nodes: usize,
    section_tau: f64,
    admissibility: AdmissibilityReport,
    levels: Vec<LevelSummary>,
    bound_audit: &'a AprioriAudit,
    support: SupportReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    uniqueness: Option<UniquenessProbe>,
}

fn level_summaries(rep: &SolveReport) -> Vec<LevelSummary> {
    rep.levels
        .iter()
        .map(|l| LevelSummary {
            n: l.n,
            delta: l.delta,
            iterations: l.iterations,
            converged: l.converged,
            change: l.change,
            h1_norm: l.h1_norm,
            weak_residual: l.weak_residual,
            identity_real: l.identity_real,
            identity_imag: l.identity_imag,
            identity_tolerance: l.identity_tolerance,
        })
        .collect()
}

fn field_plot(title: &str, f: &ComplexGridFn) -> String {
    let mesh = f.mesh();
    let pick = |g: fn(Complex64) -> f64| (0..f.len()).map(|k| (mesh.coord(k), g(f.values()[k]))).collect();
    line_plot(
        title,
        "x",
        "value",
        &[
            Series {
                name: "|u|",
                points: pick(|z| z.norm()),
            },
            Series {
                name: "Re u",
                points: pick(|z| z.re),
            },
            Series {
                name: "Im u",
                points: pick(|z| z.im),
            },
        ],
        false,
    )
}

pub fn solve(common: &Common) -> anyhow::Result<Status> {
    let loaded = load(common.config)?;
    let config = solve_config(&loaded.config, common.seed)?;
    let spec = loaded.spec()?;
    let dir = out_dir(common, &loaded)?;
    info!("solving on {} nodes", spec.mesh().num_dofs());
    let rep = solve_saturated(&spec, &config).map_err(|e| match e {
        satnls_core::Error::Hypothesis(_) | satnls_core::Error::InvalidParameter { .. } => {
            anyhow::Error::new(ConfigError(e.to_string()))
        }
        other => other.into(),
    })?;
    if !rep.converged {
        warn!(
            "solve did not converge (weak residual {:e}, polished {})",
            rep.weak_residual, rep.polished
        );
    }

    write_json(&dir.join("config.json"), &effective(&loaded, config.seed))?;
    write_field(&dir.join("u.csv"), &rep.u)?;
    write_field(&dir.join("section.csv"), &rep.section)?;
    write_field(&dir.join("forcing.csv"), &spec.forcing)?;
    write_field(&dir.join("potential.csv"), &spec.potential)?;
    if spec.selfsim.is_some() {
        write_field(&dir.join("profile.csv"), &gauge_inverse(&rep.u))?;
        write_field(&dir.join("profile_section.csv"), &gauge_inverse(&rep.section))?;
    }

    let support = support_report(&rep.u, loaded.threshold(), &loaded.k()?, loaded.config.support.epsilon)?;
    let uniqueness = match (loaded.config.audit.uniqueness, spec.selfsim) {
        (Some(u), Some(_)) => Some(uniqueness_probe(&spec, u.radius, u.trials, &config, config.seed)?),
        (Some(_), None) => {
            warn!("audit.uniqueness needs a self-similar problem; skipped");
            None
        }
        _ => None,
    };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        converged: rep.converged,
        continuation_converged: rep.continuation_converged,
        polished: rep.polished,
        weak_residual: rep.weak_residual,
        clamped_nodes: rep.clamped_nodes,
        section_tau: rep.tau,
        admissibility: check_admissibility(&spec),
        levels: level_summaries(&rep),
        bound_audit: &rep.bound_audit,
        support,
        uniqueness,
    };
    write_json(&dir.join("report.json"), &report)?;
    // the stored audit is computed from the stored files, so `audit` can
    // reproduce it exactly
    let audit = audit_dir(&dir)?;
    write_json(&dir.join("audit.json"), &audit)?;
    if loaded.config.output.svg {
        write_text(&dir.join("solution.svg"), &field_plot("solution", &rep.u))?;
    }
    info!("artifacts in {}", dir.display());
    Ok(if rep.converged { Status::Done } else { Status::NotConverged })
}

#[derive(Debug, Serialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub weak_residual: f64,
    pub results: Vec<AuditResult>,
}

fn artifact(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Rebuilds the solved problem from a run directory.
fn stored_spec(dir: &Path, loaded: &LoadedConfig) -> anyhow::Result<ProblemSpec> {
    let mesh = loaded.mesh()?;
    let v = read_field(&artifact(dir, "potential.csv"), &mesh)?;
    let f = read_field(&artifact(dir, "forcing.csv"), &mesh)?;
    let p = &loaded.config.problem;
    let params = loaded.params()?;
    let b = match (p.b, params) {
        (Some(b), _) => b,
        (None, Some(pr)) => pr.b(),
        (None, None) => unreachable!("validated config"),
    };
    let spec = ProblemSpec::new(p.a, b, v, f)?;
    Ok(match params {
        Some(pr) => spec.with_selfsim(pr),
        None => spec,
    })
}

/// Every audit, as a pure function of the files in `dir`.
pub fn audit_dir(dir: &Path) -> anyhow::Result<AuditReport> {
    let loaded = load(&artifact(dir, "config.json"))?;
    let config = solve_config(&loaded.config, None)?;
    let spec = stored_spec(dir, &loaded)?;
    let mesh = *spec.mesh();
    let u = read_field(&artifact(dir, "u.csv"), &mesh)?;
    let section = read_field(&artifact(dir, "section.csv"), &mesh)?;
    let weak = weak_residual(&spec, &u, &section, config.weak_tests, config.seed)?;

    let mut results = Vec::new();
    let t = energy_terms(&spec, &u)?;
    let tol = identity_tolerance(weak, t.h1(), t.magnitude(spec.a, spec.b));
    results.push(AuditResult::bound(
        "energy_identity_real",
        t.real_identity(spec.a, spec.b).abs(),
        0.0,
        tol,
        "equation tested with u",
    ));
    results.push(AuditResult::bound(
        "energy_identity_imag",
        t.imag_identity(spec.a, spec.b).abs(),
        0.0,
        tol,
        "equation tested with iu",
    ));
    results.push(AuditResult::bound(
        "weak_residual",
        weak,
        config.weak_residual_tol,
        0.0,
        "weak form against the seeded test family",
    ));
    let unit = section.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    results.push(AuditResult::bound("section_modulus", unit, 1.0, 1e-12, "|U| <= 1"));
    if loaded.config.audit.estimates {
        results.extend(estimate_bounds_for(&u, weak, &spec)?);
    }
    let s = support_report(&u, loaded.threshold(), &loaded.k()?, loaded.config.support.epsilon)?;
    results.push(AuditResult::bound(
        "support_in_k_eps",
        s.dead_region_max,
        s.tau,
        0.0,
        "|u| <= tau_supp outside K(eps)",
    ));
    results.push(AuditResult::bound(
        "dead_region_small",
        s.dead_region_max,
        1e-6 * s.u_max,
        0.0,
        "max |u| outside K(eps) <= 1e-6 max |u|",
    ));
    if let Some(sym) = loaded.config.audit.symmetry {
        results.push(symmetry_audit(&u, &spec, sym, 10.0 * config.continuation_tol)?);
    }
    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        weak_residual: weak,
        results,
    })
}

pub fn audit(dir: &Path) -> anyhow::Result<Status> {
    let report = audit_dir(dir)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    print!("{text}");
    match std::fs::read_to_string(artifact(dir, "audit.json")) {
        Ok(stored) if stored == text => info!("audit matches the stored audit.json"),
        Ok(_) => warn!("audit differs from the stored audit.json"),
        Err(_) => warn!("no stored audit.json to compare with"),
    }
    let failed: Vec<&str> = report
        .results
        .iter()
        .filter(|r| !r.satisfied)
        .map(|r| r.name.as_str())
        .collect();
    if !failed.is_empty() {
        warn!("unsatisfied: {}", failed.join(", "));
    }
    Ok(Status::Done)
}

#[derive(Debug, Serialize)]
struct EvolutionRow {
    cells: usize,
    h: f64,
    residual: f64,
    ratio: Option<f64>,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct SelfSimilarSummary {
    schema_version: u32,
    converged: bool,
    weak_residual: f64,
    times: Vec<f64>,
    expansion_slope: f64,
    expansion_within_one_cell: bool,
    max_scaling_law_error: f64,
    evolution: Vec<EvolutionRow>,
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn selfsimilar(common: &Common, times: Option<Vec<f64>>, refine: Option<u32>) -> anyhow::Result<Status> {
    let loaded = load(common.config)?;
    let config = solve_config(&loaded.config, common.seed)?;
    let params = loaded
        .params()?
        .ok_or_else(|| ConfigError("selfsimilar needs a `problem.selfsim` block".into()))?;
    let times = times.unwrap_or_else(|| loaded.config.selfsimilar.times.clone());
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(ConfigError("--t needs positive times".into()).into());
    }
    let refine = refine.unwrap_or(loaded.config.selfsimilar.refine);
    let dir = out_dir(common, &loaded)?;
    let mesh = loaded.mesh()?;
    let f = loaded.forcing(&mesh)?;
    let a = loaded.config.problem.a;
    let (profile, _, rep) = solve_profile(params, &f, a, &config).map_err(|e| ConfigError(e.to_string()))?;
    let mut converged = rep.converged;

    write_json(&dir.join("config.json"), &effective(&loaded, config.seed))?;
    write_field(&dir.join("profile.csv"), &profile.phi)?;
    write_field(&dir.join("profile_section.csv"), &profile.section)?;
    write_field(&dir.join("profile_forcing.csv"), &profile.forcing)?;
    let field = SpaceTimeField::new(profile.phi.clone(), params, FieldKind::Solution);
    for &t in &times {
        write_field(&dir.join(format!("u_t{t}.csv")), &field.sample_dilated(t)?)?;
    }

    let table = support_expansion(&profile.phi, params, &times, loaded.threshold())?;
    let rho1 = support_report(&profile.phi, loaded.threshold(), &loaded.k()?, 0.0)?.rho_support;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|&(t, r)| vec![num(t), num(r), num(t.sqrt() * rho1)])
        .collect();
    write_table(&dir.join("expansion.csv"), &["t", "rho_support", "sqrt_t_rho1"], &rows)?;

    let mut scaling_rows = Vec::new();
    let mut max_scaling: f64 = 0.0;
    let mut all_laws = Vec::new();
    for &t in &times {
        for &q in &loaded.config.selfsimilar.q {
            let laws = scaling_laws(&profile.phi, params, t, q, None)?;
            max_scaling = max_scaling.max(laws.max_relative_error());
            for (name, law) in [("value", laws.value), ("gradient", laws.gradient), ("hessian", laws.hessian)] {
                scaling_rows.push(vec![
                    num(t),
                    num(q),
                    name.to_string(),
                    num(law.measured),
                    num(law.predicted),
                    num(law.relative_error()),
                ]);
            }
            all_laws.push(laws);
        }
    }
    write_table(
        &dir.join("scaling.csv"),
        &["t", "q", "quantity", "measured", "predicted", "relative_error"],
        &scaling_rows,
    )?;

    let mut evolution = Vec::new();
    for k in 0..=refine {
        let (prof, level_rep) = if k == 0 {
            (profile.clone(), None)
        } else {
            let m = loaded.config.problem.domain.refined(k).mesh()?;
            let (p, _, r) = solve_profile(params, &loaded.forcing(&m)?, a, &config)?;
            (p, Some(r))
        };
        let ok = level_rep.as_ref().map_or(rep.converged, |r| r.converged);
        converged &= ok;
        let h = prof.mesh().h();
        let residual = evolution_residual(&prof, 1.0, h)?;
        let ratio = evolution.last().map(|prev: &EvolutionRow| prev.residual / residual);
        info!("refinement {k}: {} cells, residual {residual:e}", prof.mesh().num_cells());
        evolution.push(EvolutionRow {
            cells: prof.mesh().num_cells(),
            h,
            residual,
            ratio,
            converged: ok,
        });
    }
    let evo_rows: Vec<Vec<String>> = evolution
        .iter()
        .map(|r| {
            vec![
                r.cells.to_string(),
                num(r.h),
                num(r.residual),
                r.ratio.map(num).unwrap_or_default(),
            ]
        })
        .collect();
    write_table(&dir.join("evolution.csv"), &["cells", "h", "residual", "ratio"], &evo_rows)?;

    if loaded.config.output.svg {
        write_text(&dir.join("profile.svg"), &field_plot("profile", &profile.phi))?;
        write_text(
            &dir.join("expansion.svg"),
            &line_plot(
                "support radius",
                "t",
                "rho",
                &[
                    Series {
                        name: "measured",
                        points: table.rows.clone(),
                    },
                    Series {
                        name: "sqrt(t) rho(1)",
                        points: times.iter().map(|&t| (t, t.sqrt() * rho1)).collect(),
                    },
                ],
                false,
            ),
        )?;
        let q0 = loaded.config.selfsimilar.q.first().copied();
        let first_q: Vec<&ScalingLaws> = all_laws.iter().filter(|l| Some(l.q) == q0).collect();
        let law_series: Vec<Series> = [
            ("value", (|l: &ScalingLaws| l.value.measured) as fn(&ScalingLaws) -> f64),
            ("gradient", |l| l.gradient.measured),
            ("hessian", |l| l.hessian.measured),
        ]
        .into_iter()
        .map(|(name, pick)| Series {
            name,
            points: first_q.iter().map(|l| (l.t, pick(l))).collect(),
        })
        .collect();
        write_text(
            &dir.join("scaling.svg"),
            &line_plot("L^q norms of u(t)", "t", "norm", &law_series, true),
        )?;
        write_text(
            &dir.join("evolution.svg"),
            &line_plot(
                "evolution residual at t = 1",
                "h",
                "residual",
                &[Series {
                    name: "L2 residual",
                    points: evolution.iter().map(|r| (r.h, r.residual)).collect(),
                }],
                true,
            ),
        )?;
    }

    let summary = SelfSimilarSummary {
        schema_version: SCHEMA_VERSION,
        converged,
        weak_residual: rep.weak_residual,
        times,
        expansion_slope: table.slope,
        expansion_within_one_cell: table.within_one_cell,
        max_scaling_law_error: max_scaling,
        evolution,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(if converged { Status::Done } else { Status::NotConverged })
}

#[derive(Debug, Serialize)]
struct ScanSummary<'a> {
    schema_version: u32,
    epsilon: f64,
    downward_closed: bool,
    frontier: &'a [(f64, Option<f64>)],
    cells: &'a [satnls_core::support::ScanCell],
}

pub fn scan(common: &Common) -> anyhow::Result<Status> {
    let loaded = load(common.config)?;
    let config = solve_config(&loaded.config, common.seed)?;
    let grid = loaded
        .config
        .scan
        .clone()
        .ok_or_else(|| ConfigError("scan needs a `scan` block".into()))?;
    if grid.l2_scales.is_empty() || grid.tail_scales.is_empty() {
        return Err(ConfigError("scan grid is empty".into()).into());
    }
    let mesh = loaded.mesh()?;
    let base = loaded.spec_on(&mesh)?;
    let forcing = loaded.scan_forcing(&mesh)?;
    let k = loaded.k()?;
    let eps = loaded.config.support.epsilon;
    let dir = out_dir(common, &loaded)?;
    let result = dead_core_scan(
        &base,
        &forcing,
        &k,
        eps,
        &grid.l2_scales,
        &grid.tail_scales,
        loaded.threshold(),
        &config,
    )
    .map_err(|e| ConfigError(e.to_string()))?;

    let rows: Vec<Vec<String>> = result
        .cells
        .iter()
        .map(|c| {
            vec![
                num(c.l2_scale),
                num(c.tail_scale),
                c.contained.to_string(),
                num(c.rho_support),
                c.iterations.to_string(),
            ]
        })
        .collect();
    write_table(
        &dir.join("scan.csv"),
        &["l2_scale", "tail_scale", "contained", "rho_support", "iterations"],
        &rows,
    )?;
    for c in result.cells.iter().filter(|c| c.error.is_some() || !c.converged) {
        warn!(
            "cell ({}, {}): {}",
            c.l2_scale,
            c.tail_scale,
            c.error.as_deref().unwrap_or("not converged")
        );
    }
    write_json(
        &dir.join("scan.json"),
        &ScanSummary {
            schema_version: SCHEMA_VERSION,
            epsilon: eps,
            downward_closed: result.downward_closed,
            frontier: &result.frontier,
            cells: &result.cells,
        },
    )?;
    if loaded.config.output.svg {
        let cells: Vec<Vec<Option<bool>>> = (0..result.l2_scales.len())
            .map(|i| {
                (0..result.tail_scales.len())
                    .map(|j| {
                        let c = result.cell(i, j);
                        c.error.is_none().then_some(c.contained)
                    })
                    .collect()
            })
            .collect();
        write_text(
            &dir.join("scan.svg"),
            &heatmap(
                "support inside K(eps)",
                "tail scale",
                "core scale",
                &result.tail_scales,
                &result.l2_scales,
                &cells,
            ),
        )?;
    }
    Ok(Status::Done)
}
