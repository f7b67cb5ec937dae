//! Scenario orchestration: cap | flow | verify | exhaust | convergence.
//!
//! Exit-code contract: 0 = success and zero audit violations, 2 = run
//! completed but an audit or acceptance condition failed, 1 = runtime
//! failure (propagated as `Err`). Partial traces are flushed before an
//! early exit is reported.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use kflow_core::barrier::{self, BarrierFamily};
use kflow_core::estimates::{
    self, budget, check_curvature_bound, check_gradient_bound, check_height_envelope,
    check_pole_gradient_bound, BudgetContext, Diagnostics, EstimateBudget,
};
use kflow_core::flow::{
    self, compute_diagnostics, evolve, evolve_polar, FlowConfig, FlowExit, FlowTrace, GridKind,
    PolarGrid, RadialGrid, Snapshot,
};
use kflow_core::WarpedModel;

use crate::config::{ConvergenceMetric, InitialKind, RunConfig, Scenario};
use crate::csvio;
use crate::datagen;

/// Envelope audit tolerance (height estimate), per the acceptance contract.
pub const ENVELOPE_TOL: f64 = 1e-3;
/// Gradient maximum-principle audit tolerance per snapshot.
pub const GRADIENT_TOL: f64 = 1e-6;

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    /// "pass" | "fail" | "skipped"
    pub status: String,
    pub worst_margin: Option<f64>,
    pub violations: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub warnings: Vec<String>,
    pub exit: FlowExit,
    pub snapshots: Vec<String>,
    pub diagnostics: Vec<Diagnostics>,
    pub checks: Vec<AuditCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditDocument {
    pub config: RunConfig,
    pub budget: EstimateBudget,
    pub checks: Vec<AuditCheck>,
    pub total_violations: usize,
}

/// Dispatch a validated config.
pub fn run_scenario(config: &RunConfig, warnings: &[String]) -> anyhow::Result<RunOutcome> {
    let out_dir = PathBuf::from(&config.output.directory);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    match config.scenario {
        Scenario::Cap => run_cap(config, warnings, &out_dir),
        Scenario::Flow => run_flow(config, warnings, &out_dir),
        Scenario::Verify => run_verify(config, &out_dir),
        Scenario::Exhaust => run_exhaust(config, warnings, &out_dir),
        Scenario::Convergence => run_convergence(config, warnings, &out_dir),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// cap
// ---------------------------------------------------------------------------

fn run_cap(config: &RunConfig, warnings: &[String], out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let model = config.model.build()?;
    let cap = barrier::cap_profile(&model, config.barrier.cap_radius, config.barrier.resolution)
        .map_err(|e| anyhow::anyhow!("cap profile: {e}"))?;
    let cap_path = out_dir.join("cap.csv");
    csvio::write_cap_csv(&cap_path, &model, &cap)?;
    let summary = RunSummary {
        config: config.clone(),
        warnings: warnings.to_vec(),
        exit: FlowExit::Completed,
        snapshots: vec!["cap.csv".into()],
        diagnostics: Vec::new(),
        checks: Vec::new(),
    };
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(RunOutcome {
        exit_code: 0,
        artifacts: vec![cap_path, summary_path],
    })
}

// ---------------------------------------------------------------------------
// flow
// ---------------------------------------------------------------------------

fn flow_config(config: &RunConfig) -> FlowConfig {
    FlowConfig {
        sigma: config.flow.sigma,
        scheme: config.flow.scheme,
        cfl: config.flow.cfl,
        t_final: config.flow.t_final,
        snapshot_every: config.flow.snapshot_every,
        newton_tol: config.flow.newton_tol,
        residual_tol: config.flow.residual_tol,
        seed: config.seed,
    }
}

fn radial_initial_data(
    config: &RunConfig,
    model: &WarpedModel,
    grid: &RadialGrid,
) -> anyhow::Result<Vec<f64>> {
    let amp = config.initial_data.amplitude;
    let mut u0 = match config.initial_data.kind {
        InitialKind::Zero => vec![0.0; grid.m],
        InitialKind::Seeded => datagen::seeded_radial(grid, amp, config.seed),
        InitialKind::Gaussian => grid.nodes().map(|r| amp * (-r * r).exp()).collect(),
        InitialKind::Cap => {
            let big_r = config.barrier.cap_radius;
            if big_r < grid.r0 {
                bail!(
                    "initial_data.kind = cap needs barrier.R >= grid.r0 (got {} < {})",
                    big_r,
                    grid.r0
                );
            }
            let res = config.barrier.resolution.max(4 * grid.m);
            let cap = barrier::cap_profile(model, big_r, res)
                .map_err(|e| anyhow::anyhow!("cap initial data: {e}"))?;
            grid.nodes().map(|r| cap.height(r)).collect()
        }
    };
    if let Some(width) = config.initial_data.mollify_width {
        u0 = flow::mollify(grid, &u0, width).map_err(|e| anyhow::anyhow!("mollify: {e}"))?;
    }
    Ok(u0)
}

/// Run the standard audits against a trace; returns check records and the
/// total violation count. The envelope check is skipped when the barrier
/// preconditions fail (σ ≤ H(r0)).
pub fn audit_trace(
    trace: &mut FlowTrace,
    model: &WarpedModel,
    r0: f64,
    sigma: f64,
) -> anyhow::Result<(Vec<AuditCheck>, usize, EstimateBudget)> {
    let mut checks = Vec::new();
    let mut total = 0usize;

    let ctx = BudgetContext::from_trace(trace);
    let est_budget = budget(model, r0, sigma, &ctx).map_err(|e| anyhow::anyhow!("budget: {e}"))?;

    // barrier feasibility
    let (_, _, h_r0) =
        barrier::cap_data(model, r0).map_err(|e| anyhow::anyhow!("cap data: {e}"))?;
    let envelope = if sigma > h_r0 {
        match check_height_envelope(trace, model, r0, sigma, ENVELOPE_TOL) {
            Ok(report) => Some(report),
            Err(e) => bail!("height envelope audit: {e}"),
        }
    } else {
        None
    };
    match &envelope {
        Some(report) => {
            total += report.violations.len();
            checks.push(AuditCheck {
                name: "height-envelope".into(),
                status: if report.violations.is_empty() {
                    "pass"
                } else {
                    "fail"
                }
                .into(),
                worst_margin: Some(report.worst_upper_margin.min(report.worst_lower_margin)),
                violations: report.violations.len(),
                detail: format!(
                    "tol {ENVELOPE_TOL}; worst upper {:.3e}, worst lower {:.3e}",
                    report.worst_upper_margin, report.worst_lower_margin
                ),
            });
        }
        None => checks.push(AuditCheck {
            name: "height-envelope".into(),
            status: "skipped".into(),
            worst_margin: None,
            violations: 0,
            detail: format!("sigma {sigma} <= H(r0) = {h_r0}; barrier family unavailable"),
        }),
    }

    let gradient = check_gradient_bound(trace, &est_budget, GRADIENT_TOL);
    total += gradient.violations.len();
    checks.push(AuditCheck {
        name: "gradient-bound".into(),
        status: if gradient.violations.is_empty() {
            "pass"
        } else {
            "fail"
        }
        .into(),
        worst_margin: Some(gradient.worst_margin),
        violations: gradient.violations.len(),
        detail: format!("tol {GRADIENT_TOL}; e^(Lt)-inflated initial/boundary sup"),
    });

    let pole = check_pole_gradient_bound(trace, &est_budget);
    let pole_ok = pole.margin >= 0.0 || pole.bound.is_infinite();
    if !pole_ok {
        total += 1;
    }
    checks.push(AuditCheck {
        name: "pole-gradient-bound".into(),
        status: if pole_ok { "pass" } else { "fail" }.into(),
        worst_margin: Some(pole.margin),
        violations: usize::from(!pole_ok),
        detail: format!(
            "bound {:.3e}, worst pole W {:.6}",
            pole.bound, pole.worst_pole_w
        ),
    });

    // curvature localization: largest grid radius satisfying the horizon
    // inequality
    let t_final = trace.snapshots.last().map(|s| s.state.t).unwrap_or(0.0);
    let zeta_r = model
        .zeta_bar(r0)
        .map_err(|e| anyhow::anyhow!("zeta: {e}"))?;
    let mut r_prime = None;
    if let Some(grid) = trace.radial_grid() {
        for i in (1..grid.m - 1).rev() {
            let r = grid.radius(i);
            let zeta = model
                .zeta_bar(r)
                .map_err(|e| anyhow::anyhow!("zeta: {e}"))?;
            if zeta + est_budget.c_r_curvature * t_final <= 0.5 * zeta_r {
                r_prime = Some(r);
                break;
            }
        }
    }
    match r_prime {
        Some(rp) => {
            let report = check_curvature_bound(trace, &est_budget, r0, rp)
                .map_err(|e| anyhow::anyhow!("curvature audit: {e}"))?;
            let ok = report.feasible && report.margin_flat >= 0.0 && report.margin_shaped >= 0.0;
            if !ok {
                total += 1;
            }
            let curv_detail = format!(
                "R' = {rp:.4}; sup|A| {:.4e} vs 2C1 {:.4e} and shaped {:.4e}",
                report.sup_abs_a, report.bound_flat, report.bound_shaped
            );
            estimates::annotate_trace(trace, envelope.as_ref(), Some(&gradient), Some(&report));
            checks.push(AuditCheck {
                name: "curvature-bound".into(),
                status: if ok { "pass" } else { "fail" }.into(),
                worst_margin: Some(report.margin_flat.min(report.margin_shaped)),
                violations: usize::from(!ok),
                detail: curv_detail,
            });
        }
        None => {
            estimates::annotate_trace(trace, envelope.as_ref(), Some(&gradient), None);
            let detail = if trace.radial_grid().is_some() {
                "localization infeasible for this horizon"
            } else {
                "polar trace: |A| is radialized-only, curvature audit is radial-only"
            };
            checks.push(AuditCheck {
                name: "curvature-bound".into(),
                status: "skipped".into(),
                worst_margin: None,
                violations: 0,
                detail: detail.into(),
            });
        }
    }

    Ok((checks, total, est_budget))
}

fn run_flow(config: &RunConfig, warnings: &[String], out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let model = config.model.build()?;
    let fc = flow_config(config);
    let mut trace = match config.grid.m_theta {
        None => {
            let grid = RadialGrid::new(config.grid.r0, config.grid.m)
                .map_err(|e| anyhow::anyhow!("grid: {e}"))?;
            let u0 = radial_initial_data(config, &model, &grid)?;
            evolve(&model, &grid, u0, &fc).map_err(|e| anyhow::anyhow!("evolve: {e}"))?
        }
        Some(m_theta) => {
            let grid = PolarGrid::new(config.grid.r0, config.grid.m, m_theta)
                .map_err(|e| anyhow::anyhow!("grid: {e}"))?;
            if config.initial_data.mollify_width.is_some() {
                bail!("initial_data.mollify_width is radial-only");
            }
            let u0 = match config.initial_data.kind {
                InitialKind::Zero => vec![0.0; grid.len()],
                InitialKind::Seeded => {
                    datagen::seeded_polar(&grid, config.initial_data.amplitude, config.seed)
                }
                other => bail!("initial_data.kind {other:?} is not available in polar mode"),
            };
            evolve_polar(&model, &grid, u0, &fc)
                .map_err(|e| anyhow::anyhow!("evolve_polar: {e}"))?
        }
    };

    // audits run on completed traces; aborted runs still flush their
    // partial snapshots below
    let (checks, violations) = if trace.exit == FlowExit::Completed {
        let (checks, violations, _) =
            audit_trace(&mut trace, &model, config.grid.r0, config.flow.sigma)?;
        (checks, violations)
    } else {
        (Vec::new(), 0)
    };

    // emit one CSV per snapshot plus the run summary
    let mut artifacts = Vec::new();
    let mut snapshot_names = Vec::new();
    for k in 0..trace.snapshots.len() {
        let name = format!("snap_{k:04}.csv");
        let path = out_dir.join(&name);
        csvio::write_snapshot_csv(&path, &trace, k)?;
        snapshot_names.push(name);
        artifacts.push(path);
    }
    let exit_code = match &trace.exit {
        FlowExit::Completed => {
            if violations == 0 {
                0
            } else {
                2
            }
        }
        _ => 1,
    };
    let summary = RunSummary {
        config: config.clone(),
        warnings: warnings.to_vec(),
        exit: trace.exit.clone(),
        snapshots: snapshot_names,
        diagnostics: trace
            .snapshots
            .iter()
            .map(|s| s.diagnostics.clone())
            .collect(),
        checks,
    };
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    artifacts.push(summary_path);
    Ok(RunOutcome {
        exit_code,
        artifacts,
    })
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

/// Rebuild a trace from a `flow` output directory.
pub fn load_trace(dir: &Path) -> anyhow::Result<(FlowTrace, RunSummary)> {
    let summary_text = fs::read_to_string(dir.join("summary.json"))
        .with_context(|| format!("reading {}/summary.json", dir.display()))?;
    let summary: RunSummary = serde_json::from_str(&summary_text).context("summary parse")?;
    let model = summary.config.model.build()?;
    let polar = summary.config.grid.m_theta.is_some();
    let grid = match summary.config.grid.m_theta {
        None => GridKind::Radial(
            RadialGrid::new(summary.config.grid.r0, summary.config.grid.m)
                .map_err(|e| anyhow::anyhow!("grid: {e}"))?,
        ),
        Some(mt) => GridKind::Polar(
            PolarGrid::new(summary.config.grid.r0, summary.config.grid.m, mt)
                .map_err(|e| anyhow::anyhow!("grid: {e}"))?,
        ),
    };
    if summary.snapshots.len() != summary.diagnostics.len() {
        bail!(
            "summary lists {} snapshots but {} diagnostics entries",
            summary.snapshots.len(),
            summary.diagnostics.len()
        );
    }
    let mut snapshots = Vec::with_capacity(summary.snapshots.len());
    for (name, diag) in summary.snapshots.iter().zip(&summary.diagnostics) {
        let u = csvio::read_snapshot_u(&dir.join(name), polar)?;
        let expected = match &grid {
            GridKind::Radial(g) => g.m,
            GridKind::Polar(g) => g.len(),
        };
        if u.len() != expected {
            bail!(
                "snapshot {name} has {} nodes, grid expects {expected}",
                u.len()
            );
        }
        let diagnostics = compute_diagnostics(&model, &grid, &u, diag.t);
        snapshots.push(Snapshot {
            state: flow::GraphState { u, t: diag.t },
            diagnostics,
        });
    }
    let fc = flow_config(&summary.config);
    Ok((
        FlowTrace {
            model,
            grid,
            config: fc,
            snapshots,
            exit: summary.exit.clone(),
        },
        summary,
    ))
}

fn run_verify(config: &RunConfig, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let (mut trace, summary) = load_trace(out_dir)?;
    let model = trace.model.clone();
    let r0 = summary.config.grid.r0;
    let sigma = summary.config.flow.sigma;
    let (mut checks, mut total, est_budget) = audit_trace(&mut trace, &model, r0, sigma)?;

    // supersolution residual of the barrier family on this grid (radial
    // runs with a feasible barrier only)
    if let (GridKind::Radial(grid), Ok((_, _, h_r0))) = (&trace.grid, barrier::cap_data(&model, r0))
    {
        if sigma > h_r0 && trace.snapshots.len() >= 3 {
            let times: Vec<f64> = trace.snapshots.iter().map(|s| s.state.t).collect();
            let family = BarrierFamily::build(&model, r0, sigma, &times, 4.max(grid.m) * 4)
                .map_err(|e| anyhow::anyhow!("barrier family: {e}"))?;
            let dt = times.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
            // 10 C (h^2 + dt) with C = 1; residual_tol acts as a floor
            let tol = (10.0 * (grid.h * grid.h + dt)).max(config.flow.residual_tol);
            let field = barrier::supersolution_residual(&model, &family, grid, tol)
                .map_err(|e| anyhow::anyhow!("supersolution residual: {e}"))?;
            let ok = field.violations.is_empty();
            if !ok {
                total += field.violations.len();
            }
            checks.push(AuditCheck {
                name: "supersolution-residual".into(),
                status: if ok { "pass" } else { "fail" }.into(),
                worst_margin: Some(field.min_residual + tol),
                violations: field.violations.len(),
                detail: format!("min residual {:.3e}, tol {tol:.3e}", field.min_residual),
            });
        }
    }

    let audit = AuditDocument {
        config: summary.config.clone(),
        budget: est_budget,
        checks,
        total_violations: total,
    };
    let audit_path = out_dir.join("audit.json");
    write_json(&audit_path, &audit)?;
    Ok(RunOutcome {
        exit_code: if total == 0 { 0 } else { 2 },
        artifacts: vec![audit_path],
    })
}

// ---------------------------------------------------------------------------
// exhaust
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
struct ExhaustDocument {
    config: RunConfig,
    warnings: Vec<String>,
    radii: Vec<f64>,
    diffs: Vec<f64>,
    nonincreasing: bool,
    threads: usize,
}

fn thread_cap() -> usize {
    std::env::var("KFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        })
}

fn run_exhaust(
    config: &RunConfig,
    warnings: &[String],
    out_dir: &Path,
) -> anyhow::Result<RunOutcome> {
    let model = config.model.build()?;
    let fc = flow_config(config);
    let amp = config.initial_data.amplitude;
    let u0 = move |r: f64| -> f64 {
        match config.initial_data.kind {
            InitialKind::Zero => 0.0,
            InitialKind::Gaussian => amp * (-r * r).exp(),
            // entire data is required on every ball; the other kinds are
            // grid-bound and rejected at validation time
            _ => f64::NAN,
        }
    };
    if !matches!(
        config.initial_data.kind,
        InitialKind::Zero | InitialKind::Gaussian
    ) {
        bail!("exhaust requires entire initial data: initial_data.kind must be zero or gaussian");
    }

    let radii = &config.exhaust.radii;
    let h_target = radii[0] / (config.exhaust.m_base - 1) as f64;
    let compact = config.exhaust.compact_radius;

    // fan the independent per-ball solves out across threads, capped by
    // KFLOW_THREADS, collecting results in deterministic (index) order
    let threads = thread_cap().min(radii.len()).max(1);
    let mut restrictions: Vec<Option<kflow_core::Result<Vec<f64>>>> = Vec::new();
    restrictions.resize_with(radii.len(), || None);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk_start in (0..radii.len()).step_by(threads) {
            handles.clear();
            for idx in chunk_start..(chunk_start + threads).min(radii.len()) {
                let big_r = radii[idx];
                let model_ref = &model;
                let fc_ref = &fc;
                let u0_ref = &u0;
                handles.push((
                    idx,
                    scope.spawn(move || {
                        flow::exhaustion_restriction(
                            model_ref, u0_ref, big_r, h_target, compact, fc_ref,
                        )
                    }),
                ));
            }
            for (idx, handle) in handles.drain(..) {
                restrictions[idx] = Some(handle.join().expect("exhaustion worker panicked"));
            }
        }
    });
    let mut profiles = Vec::with_capacity(radii.len());
    for (idx, slot) in restrictions.into_iter().enumerate() {
        profiles.push(
            slot.expect("worker slot filled")
                .map_err(|e| anyhow::anyhow!("ball {}: {e}", radii[idx]))?,
        );
    }
    let (diffs, nonincreasing) = flow::exhaustion_diffs(&profiles);

    let doc = ExhaustDocument {
        config: config.clone(),
        warnings: warnings.to_vec(),
        radii: radii.clone(),
        diffs,
        nonincreasing,
        threads,
    };
    let path = out_dir.join("exhaust.json");
    write_json(&path, &doc)?;
    Ok(RunOutcome {
        exit_code: if doc.nonincreasing { 0 } else { 2 },
        artifacts: vec![path],
    })
}

// ---------------------------------------------------------------------------
// convergence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
struct ConvergenceLevel {
    m: usize,
    h: f64,
    error: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ConvergenceDocument {
    config: RunConfig,
    warnings: Vec<String>,
    metric: ConvergenceMetric,
    levels: Vec<ConvergenceLevel>,
    pairwise_orders: Vec<f64>,
    /// Richardson-estimated order; `null` rendered for a non-monotone
    /// error sequence ("n/a", data retained above).
    order: Option<f64>,
}

fn run_convergence(
    config: &RunConfig,
    warnings: &[String],
    out_dir: &Path,
) -> anyhow::Result<RunOutcome> {
    let model = config.model.build()?;
    let big_r = config.barrier.cap_radius;
    let (_, _, h_cap) =
        barrier::cap_data(&model, big_r).map_err(|e| anyhow::anyhow!("cap data: {e}"))?;
    let cap = barrier::cap_profile(&model, big_r, 8192)
        .map_err(|e| anyhow::anyhow!("cap profile: {e}"))?;
    // the cap is audited on a sub-ball where its gradient is regular
    let r0 = 0.8 * big_r;
    let n = model.dimension() as f64;

    let mut levels = Vec::new();
    let mut m = config.convergence.m_base;
    for _ in 0..config.convergence.refinements {
        let grid = RadialGrid::new(r0, m).map_err(|e| anyhow::anyhow!("grid: {e}"))?;
        let u0: Vec<f64> = grid.nodes().map(|r| cap.height(r)).collect();
        let error = match config.convergence.metric {
            ConvergenceMetric::Cmc => {
                let nh = flow::mean_curvature_values(&model, &grid, &u0);
                let mut worst = 0.0f64;
                for i in 0..grid.m.saturating_sub(4) {
                    worst = worst.max((nh[i] - n * h_cap).abs());
                }
                worst
            }
            ConvergenceMetric::CapStationarity => {
                let fc = FlowConfig {
                    sigma: h_cap,
                    ..flow_config(config)
                };
                let trace = evolve(&model, &grid, u0.clone(), &fc)
                    .map_err(|e| anyhow::anyhow!("evolve: {e}"))?;
                if trace.exit != FlowExit::Completed {
                    bail!("stationarity run ended early: {:?}", trace.exit);
                }
                let mut worst = 0.0f64;
                for snap in &trace.snapshots {
                    for (a, b) in snap.state.u.iter().zip(&u0) {
                        worst = worst.max((a - b).abs());
                    }
                }
                worst
            }
        };
        levels.push(ConvergenceLevel {
            m,
            h: grid.h,
            error,
        });
        m = 2 * m - 1; // doubling the interval count halves h exactly
    }

    let mut pairwise = Vec::new();
    for w in levels.windows(2) {
        pairwise.push((w[0].error / w[1].error).log2());
    }
    let monotone = levels.windows(2).all(|w| w[1].error < w[0].error);
    let order = if monotone && !pairwise.is_empty() {
        Some(pairwise.iter().sum::<f64>() / pairwise.len() as f64)
    } else {
        None
    };

    let doc = ConvergenceDocument {
        config: config.clone(),
        warnings: warnings.to_vec(),
        metric: config.convergence.metric,
        levels,
        pairwise_orders: pairwise,
        order,
    };
    let path = out_dir.join("convergence.json");
    write_json(&path, &doc)?;
    Ok(RunOutcome {
        exit_code: 0,
        artifacts: vec![path],
    })
}
