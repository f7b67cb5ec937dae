//! A-priori estimate budgets and trace auditors.
//!
//! The budget collects the constants of the gradient and curvature
//! estimates (`C_R`, `λ`, `β`, `α`, `γ`, `δ`, `C₁`, ...) exactly as
//! assembled in the source inequalities; they are deliberately non-sharp.
//! Auditors are one-sided (observed ≤ bound): their value is catching sign
//! and assembly errors, not sharpness. All auditors are pure functions of
//! immutable traces and recompute every observable from the stored states.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::barrier;
use crate::error::{Error, Result};
use crate::flow::{self, FlowTrace, GridKind, RadialGrid};
use crate::math;
use crate::model::WarpedModel;

/// Per-snapshot observables, stored inside every trace snapshot. Margin
/// fields are `(bound − observed)`; a negative margin is a violation. They
/// are `None` until an auditor fills them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub t: f64,
    pub sup_abs_u: f64,
    pub sup_w_interior: f64,
    pub sup_w_boundary: f64,
    pub sup_abs_a: f64,
    pub nh_min: f64,
    pub nh_max: f64,
    pub envelope_margin_upper: Option<f64>,
    pub envelope_margin_lower: Option<f64>,
    pub gradient_bound_margin: Option<f64>,
    pub curvature_bound_margin: Option<f64>,
}

/// Sup-data a budget needs from the run it will be audited against.
#[derive(Debug, Clone, Copy)]
pub struct BudgetContext {
    /// `sup |s|` over the localized space-time set.
    pub sup_abs_height: f64,
    /// `sup_t s(o, t)` at the pole (signed).
    pub sup_height_at_origin: f64,
    /// `sup W` over the run.
    pub sup_w: f64,
}

impl BudgetContext {
    /// Extract the sup-data from a trace.
    pub fn from_trace(trace: &FlowTrace) -> BudgetContext {
        let mut sup_abs_height = 0.0f64;
        let mut sup_origin = f64::NEG_INFINITY;
        let mut sup_w = 0.0f64;
        for snap in &trace.snapshots {
            sup_abs_height = sup_abs_height.max(snap.diagnostics.sup_abs_u);
            sup_w = sup_w
                .max(snap.diagnostics.sup_w_interior)
                .max(snap.diagnostics.sup_w_boundary);
            sup_origin = sup_origin.max(snap.state.u[0]);
        }
        BudgetContext {
            sup_abs_height,
            sup_height_at_origin: sup_origin,
            sup_w,
        }
    }
}

/// The computed a-priori constants for a localization radius `R`.
///
/// Three variants of `C_R` appear in the source inequalities; the gradient
/// budget uses `n·sup(ξ' + |σ|ξ)`, the curvature localization uses
/// `sup(ξ' + σξ)`, and `sup(nξ' + ∂_r log ρ + nσξ)` is carried read-only.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EstimateBudget {
    pub ricci_lower_bound: f64,
    pub localization_radius: f64,
    pub sigma: f64,
    /// Gradient-budget constant `n·sup_{B_R}(ξ' + |σ|ξ)`.
    pub c_r: f64,
    /// Read-only variant `sup_{B_R}(nξ' + ∂_r log ρ + nσξ)`.
    pub c_r_variant: f64,
    /// Curvature-localization variant `sup_{B_R}(ξ' + σξ)`.
    pub c_r_curvature: f64,
    /// `8 β² C_R sup² ρ`.
    pub lambda: f64,
    /// `(sup |s| − sup_t s(o,t)) / ζ̄(R)`.
    pub beta: f64,
    /// `sup(2|∇̄ log ρ| + n|σ|)`.
    pub alpha: f64,
    /// `1 / sup ρ²`.
    pub gamma: f64,
    /// `γ / (2 sup W²)`; keeps `ψ = W²/(γ − δW²)` positive on the run.
    pub delta: f64,
    /// `δ/(1 − δ)`; carried in the budget, unused by the displayed bounds.
    pub delta_tilde: f64,
    /// Curvature-bound constant (max formula).
    pub c1: f64,
    /// Surrogate for the curvature-tensor constant `C` (depends on `ρ`
    /// derivatives): `sup(|ρ'|/ρ + |ρ''|/ρ)`.
    pub c_small: f64,
    /// Surrogate for `C̃` (adds the model sectional curvatures):
    /// `c_small + sup(|ξ''/ξ| + |(1 − ξ'²)/ξ²|)`.
    pub c_tilde: f64,
    pub sup_rho: f64,
    pub inf_rho: f64,
    pub sup_xi: f64,
    pub xi_at_r: f64,
    pub zeta_bar_at_r: f64,
    pub sup_w: f64,
}

const BUDGET_SAMPLES: usize = 512;

/// Assemble the estimate budget on `B_R` for flow constant `sigma`.
pub fn budget(
    model: &WarpedModel,
    localization_radius: f64,
    sigma: f64,
    ctx: &BudgetContext,
) -> Result<EstimateBudget> {
    let big_r = localization_radius;
    if !(big_r > 0.0) {
        return Err(Error::domain(format!(
            "localization radius must be positive, got {big_r}"
        )));
    }
    if !(ctx.sup_w > 0.0) || !ctx.sup_w.is_finite() {
        return Err(Error::parameter(format!(
            "degenerate sup-data: sup W = {}",
            ctx.sup_w
        )));
    }
    let n = model.dimension() as f64;

    let mut sup_xi_term = f64::NEG_INFINITY; // ξ' + |σ|ξ
    let mut sup_variant = f64::NEG_INFINITY; // nξ' + ρ'/ρ + nσξ
    let mut sup_curv = f64::NEG_INFINITY; // ξ' + σξ
    let mut sup_log_rho_grad = 0.0f64; // |ρ'|/ρ
    let mut sup_rho = f64::NEG_INFINITY;
    let mut inf_rho = f64::INFINITY;
    let mut sup_xi = f64::NEG_INFINITY;
    let mut c_small = 0.0f64;
    let mut curv_m = 0.0f64;
    for k in 1..=BUDGET_SAMPLES {
        let r = big_r * k as f64 / BUDGET_SAMPLES as f64;
        let (xi, dxi, ddxi) = model.xi(r);
        let (rho, drho, ddrho) = model.rho(r);
        sup_xi_term = sup_xi_term.max(dxi + sigma.abs() * xi);
        sup_variant = sup_variant.max(n * dxi + drho / rho + n * sigma * xi);
        sup_curv = sup_curv.max(dxi + sigma * xi);
        sup_log_rho_grad = sup_log_rho_grad.max(drho.abs() / rho);
        sup_rho = sup_rho.max(rho);
        inf_rho = inf_rho.min(rho);
        sup_xi = sup_xi.max(xi);
        c_small = c_small.max(drho.abs() / rho + ddrho.abs() / rho);
        curv_m = curv_m.max((ddxi / xi).abs() + ((1.0 - dxi * dxi) / (xi * xi)).abs());
    }
    // ρ(0) participates in the sups (the pole is part of the ball)
    let (rho0, _, _) = model.rho(0.0);
    sup_rho = sup_rho.max(rho0);
    inf_rho = inf_rho.min(rho0);

    let zeta = model.zeta_bar(big_r)?;
    let (xi_r, _, _) = model.xi(big_r);
    let ell = model.ricci_lower_bound();

    let c_r = n * sup_xi_term;
    let beta = (ctx.sup_abs_height - ctx.sup_height_at_origin) / zeta;
    let lambda = 8.0 * beta * beta * c_r * sup_rho * sup_rho;
    let alpha = 2.0 * sup_log_rho_grad + n * sigma.abs();
    let gamma = 1.0 / (sup_rho * sup_rho);
    let delta = gamma / (2.0 * ctx.sup_w * ctx.sup_w);
    let delta_tilde = delta / (1.0 - delta);
    let c_tilde = c_small + curv_m;

    // assembly of the curvature constant (max formula); |σ| is used where
    // the source treats the cubic term's sign loosely
    let eps = delta / (1.0 + sigma.abs());
    let b =
        2.0 * (c_tilde + delta_tilde * ell) + if sigma == 0.0 { 0.0 } else { sigma.abs() / eps };
    let c_grad = 4.0 / delta * sup_log_rho_grad;
    let xz = xi_r / zeta;
    let branch_a = math::pow(2.0 * c_small, 1.5) / math::sqrt(delta);
    let branch_b = 4.0 * xz / math::pow(delta, 1.5)
        + math::sqrt(
            16.0 * xz * xz / math::powi(delta, 3) + (6.0 * xz * xz + 2.0 * c_grad * xz + b) / delta,
        );
    let c1 = branch_a.max(branch_b);

    Ok(EstimateBudget {
        ricci_lower_bound: ell,
        localization_radius: big_r,
        sigma,
        c_r,
        c_r_variant: sup_variant,
        c_r_curvature: sup_curv,
        lambda,
        beta,
        alpha,
        gamma,
        delta,
        delta_tilde,
        c1,
        c_small,
        c_tilde,
        sup_rho,
        inf_rho,
        sup_xi,
        xi_at_r: xi_r,
        zeta_bar_at_r: zeta,
        sup_w: ctx.sup_w,
    })
}

// ---------------------------------------------------------------------------
// shape operator
// ---------------------------------------------------------------------------

/// Frobenius norm `|A|` of the shape operator of a radial graph state.
///
/// The rotational principal curvature is `κ_s = (u'/W)(ξ'/ξ)` and the
/// profile-direction curvature follows from the trace: `κ_p = nH − (n−1)κ_s`,
/// so `|A|² = κ_p² + (n−1)κ_s²`. Pole nodes use the symmetric limit
/// `κ_s → κ_p = nH/n`.
pub fn shape_operator_norm_values(model: &WarpedModel, grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let n = model.dimension() as f64;
    let g = flow::gradient_values(grid, u);
    let w = flow::gradient_w_values(model, grid, u);
    let nh = flow::mean_curvature_values(model, grid, u);
    let mut out = vec![0.0; grid.m];
    for i in 0..grid.m {
        if i == 0 {
            let kappa = nh[0] / n;
            out[0] = math::sqrt(n) * kappa.abs();
            continue;
        }
        let r = grid.radius(i);
        let (xi, dxi, _) = model.xi(r);
        let sin_phi = g[i] / w[i];
        let kappa_s = sin_phi * dxi / xi;
        let kappa_p = nh[i] - (n - 1.0) * kappa_s;
        out[i] = math::sqrt(kappa_p * kappa_p + (n - 1.0) * kappa_s * kappa_s);
    }
    out
}

/// State-based wrapper matching the operation contract.
pub fn shape_operator_norm(
    model: &WarpedModel,
    grid: &RadialGrid,
    state: &flow::GraphState,
) -> Vec<f64> {
    shape_operator_norm_values(model, grid, &state.u)
}

// ---------------------------------------------------------------------------
// gradient bound audit
// ---------------------------------------------------------------------------

/// Outcome of the maximum-principle gradient audit.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GradientBoundReport {
    /// `(bound − sup_int W)` per snapshot.
    pub margins: Vec<f64>,
    pub worst_margin: f64,
    /// Snapshot indices where the margin went negative.
    pub violations: Vec<usize>,
    pub tolerance: f64,
}

fn snapshot_w(trace: &FlowTrace, k: usize) -> (f64, f64) {
    // (interior sup, boundary sup), recomputed from the stored state
    match &trace.grid {
        GridKind::Radial(grid) => {
            let w = flow::gradient_w_values(&trace.model, grid, &trace.snapshots[k].state.u);
            let interior = w[..grid.m - 1].iter().fold(0.0f64, |a, v| a.max(*v));
            (interior, w[grid.m - 1])
        }
        GridKind::Polar(grid) => {
            let w = flow::polar_gradient_w_values(&trace.model, grid, &trace.snapshots[k].state.u);
            let b0 = grid.idx(grid.m_r - 1, 0);
            let interior = w[..b0].iter().fold(0.0f64, |a, v| a.max(*v));
            let boundary = w[b0..].iter().fold(0.0f64, |a, v| a.max(*v));
            (interior, boundary)
        }
    }
}

/// Audit `sup_int W(·,t) ≤ e^{Lt} max(sup W(·,0), sup boundary W up to t)`
/// snapshot-by-snapshot, with additive tolerance `tolerance`.
pub fn check_gradient_bound(
    trace: &FlowTrace,
    budget: &EstimateBudget,
    tolerance: f64,
) -> GradientBoundReport {
    let ell = budget.ricci_lower_bound;
    let (int0, bdry0) = snapshot_w(trace, 0);
    let initial_sup = int0.max(bdry0);
    let mut boundary_hist = bdry0;
    let mut margins = Vec::with_capacity(trace.snapshots.len());
    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    for k in 0..trace.snapshots.len() {
        let (interior, boundary) = snapshot_w(trace, k);
        boundary_hist = boundary_hist.max(boundary);
        let t = trace.snapshots[k].state.t;
        let bound = math::exp(ell * t) * initial_sup.max(boundary_hist) + tolerance;
        let margin = bound - interior;
        if margin < 0.0 {
            violations.push(k);
        }
        worst = worst.min(margin);
        margins.push(margin);
    }
    GradientBoundReport {
        margins,
        worst_margin: worst,
        violations,
        tolerance,
    }
}

/// Audit of the localized interior bound evaluated at the pole:
/// `W(o,t) ≤ e^{LT} e^{λζ̄(R)}/(e^{λζ̄(R)/2} − 1) · max{sup W(·,0), βC_R supρ/(2 supξ infρ)}`.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PoleGradientReport {
    pub bound: f64,
    pub worst_pole_w: f64,
    pub margin: f64,
}

pub fn check_pole_gradient_bound(trace: &FlowTrace, budget: &EstimateBudget) -> PoleGradientReport {
    let (int0, bdry0) = snapshot_w(trace, 0);
    let sup_w0 = int0.max(bdry0);
    let t_final = trace.snapshots.last().map(|s| s.state.t).unwrap_or(0.0);
    let lam_zeta = budget.lambda * budget.zeta_bar_at_r;
    let prefactor = math::exp(budget.ricci_lower_bound * t_final) * math::exp(lam_zeta)
        / (math::exp(0.5 * lam_zeta) - 1.0);
    let cap = budget.beta * budget.c_r * budget.sup_rho / (2.0 * budget.sup_xi * budget.inf_rho);
    let bound = prefactor * sup_w0.max(cap);
    let mut worst = 0.0f64;
    for k in 0..trace.snapshots.len() {
        let w_pole = match &trace.grid {
            GridKind::Radial(grid) => {
                flow::gradient_w_values(&trace.model, grid, &trace.snapshots[k].state.u)[0]
            }
            GridKind::Polar(grid) => {
                flow::polar_gradient_w_values(&trace.model, grid, &trace.snapshots[k].state.u)[0]
            }
        };
        worst = worst.max(w_pole);
    }
    PoleGradientReport {
        bound,
        worst_pole_w: worst,
        margin: bound - worst,
    }
}

// ---------------------------------------------------------------------------
// height envelope audit
// ---------------------------------------------------------------------------

/// Outcome of the cap-barrier height audit.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HeightEnvelopeReport {
    /// Per snapshot: `min_i (upper_i − u_i)`.
    pub upper_margins: Vec<f64>,
    /// Per snapshot: `min_i (u_i − lower_i)`.
    pub lower_margins: Vec<f64>,
    pub worst_upper_margin: f64,
    pub worst_lower_margin: f64,
    /// `(snapshot, node radius)` pairs beyond tolerance.
    pub violations: Vec<(usize, f64)>,
    pub tolerance: f64,
}

/// Audit every snapshot and node against the height envelope
/// `inf u₀ − bump ≤ u ≤ sup u₀ + bump`, `bump(r, t) = v_{R(t)}(o) − v_{r0}(r)`,
/// with the barrier family grown from the run's domain ball.
pub fn check_height_envelope(
    trace: &FlowTrace,
    model: &WarpedModel,
    r0: f64,
    sigma: f64,
    tolerance: f64,
) -> Result<HeightEnvelopeReport> {
    let times: Vec<f64> = trace.snapshots.iter().map(|s| s.state.t).collect();
    let radii = barrier::barrier_radius_at(model, r0, sigma, &times)?;

    // sup/inf of the initial data (boundary included)
    let u0 = &trace.snapshots[0].state.u;
    let mut u0_sup = f64::NEG_INFINITY;
    let mut u0_inf = f64::INFINITY;
    for &v in u0 {
        u0_sup = u0_sup.max(v);
        u0_inf = u0_inf.min(v);
    }

    // fixed cap over the domain ball, sampled once
    let node_radii: Vec<f64> = match &trace.grid {
        GridKind::Radial(grid) => grid.nodes().collect(),
        GridKind::Polar(grid) => {
            let mut v = vec![0.0];
            for i in 1..grid.m_r {
                for _ in 0..grid.m_theta {
                    v.push(grid.ring_radius(i));
                }
            }
            v
        }
    };
    let cap0 = barrier::cap_profile(model, r0, 2048)?;
    let v_r0: Vec<f64> = node_radii.iter().map(|&r| cap0.height(r)).collect();

    let mut upper_margins = Vec::with_capacity(times.len());
    let mut lower_margins = Vec::with_capacity(times.len());
    let mut violations = Vec::new();
    for (k, snap) in trace.snapshots.iter().enumerate() {
        let cap_t = barrier::cap_profile(model, radii[k], 64)?;
        let apex = cap_t.height_at_origin();
        let mut up_margin = f64::INFINITY;
        let mut lo_margin = f64::INFINITY;
        for (i, &u) in snap.state.u.iter().enumerate() {
            let bump = apex - v_r0[i];
            let upper = u0_sup + bump;
            let lower = u0_inf - bump;
            up_margin = up_margin.min(upper - u);
            lo_margin = lo_margin.min(u - lower);
            if upper - u < -tolerance || u - lower < -tolerance {
                violations.push((k, node_radii[i]));
            }
        }
        upper_margins.push(up_margin);
        lower_margins.push(lo_margin);
    }
    let worst_upper = upper_margins.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    let worst_lower = lower_margins.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    Ok(HeightEnvelopeReport {
        upper_margins,
        lower_margins,
        worst_upper_margin: worst_upper,
        worst_lower_margin: worst_lower,
        violations,
        tolerance,
    })
}

// ---------------------------------------------------------------------------
// curvature bound audit
// ---------------------------------------------------------------------------

/// Outcome of the curvature audit on `B_{R'} × [0, T]`.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CurvatureBoundReport {
    /// False when no admissible `R'` exists for the run horizon
    /// (localization infeasible); bounds are then not evaluated.
    pub feasible: bool,
    pub sup_abs_a: f64,
    /// `2 C₁` bound.
    pub bound_flat: f64,
    /// `(C sup W + C' sup W³) ξ(R)/ζ̄(R)` bound.
    pub bound_shaped: f64,
    pub margin_flat: f64,
    pub margin_shaped: f64,
    pub big_c: f64,
    pub big_c_prime: f64,
}

/// The `(C, C')` split of the curvature bound: polynomial majorization of
/// `C₁` in powers of `sup W`, using `1/δ = 2 sup²ρ sup²W` and `W ≥ 1/sup ρ`.
pub fn curvature_bound_coefficients(budget: &EstimateBudget) -> (f64, f64) {
    let p = budget.sup_rho;
    let xz = budget.xi_at_r / budget.zeta_bar_at_r;
    let g = {
        // sup |∇̄ log ρ| re-derived from the stored pieces: α = 2G + n|σ|
        // so G = (α − n|σ|)/2; dimension is not stored, so recover G from
        // c_small as a safe upper surrogate instead
        budget.c_small
    };
    let ell = budget.ricci_lower_bound;
    let sig = budget.sigma.abs();
    let sqrt2 = math::sqrt(2.0);
    let a1 = sqrt2
        * p
        * (math::pow(2.0 * budget.c_small, 1.5)
            + math::sqrt(6.0) * xz
            + math::sqrt(2.0 * (budget.c_tilde + ell)));
    let a2 = 2.0 * p * p * (math::sqrt(8.0 * g * xz) + math::sqrt(sig * (1.0 + sig)));
    let a3 = 16.0 * sqrt2 * p * p * p * xz;
    let big_c = 2.0 * a1 / xz;
    let big_c_prime = 2.0 * (a2 * p + a3) / xz;
    (big_c, big_c_prime)
}

/// Audit `sup_{B_{R'} × [0,T]} |A|` against both the flat `2C₁` bound and
/// the `(C supW + C' supW³) ξ(R)/ζ̄(R)` form.
pub fn check_curvature_bound(
    trace: &FlowTrace,
    budget: &EstimateBudget,
    big_r: f64,
    r_prime: f64,
) -> Result<CurvatureBoundReport> {
    let model = &trace.model;
    let t_final = trace.snapshots.last().map(|s| s.state.t).unwrap_or(0.0);
    // admissibility: ζ̄(r) + C_R^{curv} T ≤ ζ̄(R)/2 for r < R'
    let zeta_rp = model.zeta_bar(r_prime)?;
    let zeta_r = model.zeta_bar(big_r)?;
    let feasible = zeta_rp + budget.c_r_curvature * t_final <= 0.5 * zeta_r + 1e-12;
    if !feasible {
        return Ok(CurvatureBoundReport {
            feasible,
            sup_abs_a: f64::NAN,
            bound_flat: f64::NAN,
            bound_shaped: f64::NAN,
            margin_flat: f64::NAN,
            margin_shaped: f64::NAN,
            big_c: f64::NAN,
            big_c_prime: f64::NAN,
        });
    }

    let grid = trace
        .radial_grid()
        .ok_or_else(|| Error::Unsupported("curvature audit runs on radial traces only".into()))?;
    let mut sup_a = 0.0f64;
    for snap in &trace.snapshots {
        let a = shape_operator_norm_values(model, grid, &snap.state.u);
        for i in 0..grid.m - 1 {
            if grid.radius(i) < r_prime {
                sup_a = sup_a.max(a[i]);
            }
        }
    }

    let (big_c, big_c_prime) = curvature_bound_coefficients(budget);
    let w = budget.sup_w;
    let bound_flat = 2.0 * budget.c1;
    let bound_shaped =
        (big_c * w + big_c_prime * w * w * w) * budget.xi_at_r / budget.zeta_bar_at_r;
    Ok(CurvatureBoundReport {
        feasible,
        sup_abs_a: sup_a,
        bound_flat,
        bound_shaped,
        margin_flat: bound_flat - sup_a,
        margin_shaped: bound_shaped - sup_a,
        big_c,
        big_c_prime,
    })
}

// ---------------------------------------------------------------------------
// boundary gradient barrier
// ---------------------------------------------------------------------------

/// Logarithmic boundary barrier `h(d) = L⁻¹ log(1 + A d)` on the collar
/// `d ∈ [0, d0]`, `A = L(1 − L d0)⁻¹`.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundaryBarrier {
    pub slope_scale: f64, // L
    pub amplitude: f64,   // A
    pub collar_width: f64,
    /// Certified boundary gradient bound `h'(0) = A/L`.
    pub certified_gradient: f64,
    /// Minimum of `∂ₜv − Q[v] = −Q[v]` over evaluated collar nodes;
    /// nonnegative (within tolerance) certifies the supersolution property.
    pub min_residual: f64,
    pub evaluated_nodes: usize,
}

/// Parameters for [`boundary_gradient_barrier`].
#[derive(Debug, Clone, Copy)]
pub struct BoundaryBarrierParams {
    /// Barrier slope scale `L` (must satisfy `d0 < 1/L`).
    pub slope_scale: f64,
    /// Collar depth `d0`.
    pub d0: f64,
    /// Focal-point-free collar width; model manifolds admit any `eps < R`.
    pub eps: f64,
}

/// Build `v = ũ0 + h(d)`, `d = R − r`, and evaluate its supersolution
/// residual on the collar nodes of the grid. The kink where `h` is frozen
/// past `d0` is excluded (two nodes on each side).
pub fn boundary_gradient_barrier(
    model: &WarpedModel,
    grid: &RadialGrid,
    u0: &[f64],
    sigma: f64,
    params: &BoundaryBarrierParams,
) -> Result<BoundaryBarrier> {
    let l = params.slope_scale;
    if !(l > 0.0) {
        return Err(Error::parameter(format!(
            "slope scale must be positive, got {l}"
        )));
    }
    if !(params.d0 > 0.0 && params.d0 < 1.0 / l) {
        return Err(Error::parameter(format!(
            "collar depth d0 = {} must lie in (0, 1/L) = (0, {})",
            params.d0,
            1.0 / l
        )));
    }
    if !(params.eps > 0.0 && params.eps < grid.r0) {
        return Err(Error::parameter(format!(
            "collar width eps = {} must lie in (0, R) = (0, {})",
            params.eps, grid.r0
        )));
    }
    if params.d0 > params.eps {
        return Err(Error::parameter("collar depth d0 must not exceed eps"));
    }
    if u0.len() != grid.m {
        return Err(Error::parameter("boundary data length does not match grid"));
    }
    let a = l / (1.0 - l * params.d0);
    let h_of = |d: f64| math::ln(1.0 + a * d.min(params.d0)) / l;

    let v: Vec<f64> = grid
        .nodes()
        .zip(u0)
        .map(|(r, &u)| u + h_of(grid.r0 - r))
        .collect();
    let q = flow::q_operator_values(model, grid, &v, sigma);

    let mut min_residual = f64::INFINITY;
    let mut evaluated = 0usize;
    for i in 1..grid.m - 1 {
        let d = grid.r0 - grid.radius(i);
        if d >= params.d0 - 2.0 * grid.h {
            continue; // kink guard at the inner collar edge
        }
        let residual = -q[i];
        min_residual = min_residual.min(residual);
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::parameter(
            "collar contains no interior nodes; refine the grid or widen d0",
        ));
    }
    Ok(BoundaryBarrier {
        slope_scale: l,
        amplitude: a,
        collar_width: params.d0,
        certified_gradient: a / l,
        min_residual,
        evaluated_nodes: evaluated,
    })
}

/// Try barrier slope scales until the supersolution residual clears
/// `-tolerance`; returns the first success.
pub fn search_boundary_barrier(
    model: &WarpedModel,
    grid: &RadialGrid,
    u0: &[f64],
    sigma: f64,
    slope_candidates: &[f64],
    tolerance: f64,
) -> Result<BoundaryBarrier> {
    let mut last: Option<(f64, f64)> = None;
    for &l in slope_candidates {
        let d0 = 0.5 / l;
        let eps = (2.0 * d0).min(0.9 * grid.r0);
        let params = BoundaryBarrierParams {
            slope_scale: l,
            d0,
            eps,
        };
        let barrier = boundary_gradient_barrier(model, grid, u0, sigma, &params)?;
        if barrier.min_residual >= -tolerance {
            return Ok(barrier);
        }
        last = Some((l, barrier.min_residual));
    }
    let (l, res) = last.unwrap_or((f64::NAN, f64::NAN));
    Err(Error::numeric(
        format!("no boundary barrier among candidates (last L = {l})"),
        res,
    ))
}

// ---------------------------------------------------------------------------
// margin annotation
// ---------------------------------------------------------------------------

/// Copy per-snapshot audit margins back into the trace diagnostics.
pub fn annotate_trace(
    trace: &mut FlowTrace,
    envelope: Option<&HeightEnvelopeReport>,
    gradient: Option<&GradientBoundReport>,
    curvature: Option<&CurvatureBoundReport>,
) {
    for (k, snap) in trace.snapshots.iter_mut().enumerate() {
        if let Some(env) = envelope {
            snap.diagnostics.envelope_margin_upper = env.upper_margins.get(k).copied();
            snap.diagnostics.envelope_margin_lower = env.lower_margins.get(k).copied();
        }
        if let Some(grad) = gradient {
            snap.diagnostics.gradient_bound_margin = grad.margins.get(k).copied();
        }
        if let Some(curv) = curvature {
            if curv.feasible {
                snap.diagnostics.curvature_bound_margin = Some(curv.margin_flat);
            }
        }
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{evolve, FlowConfig, FlowExit};

    fn euclid() -> WarpedModel {
        WarpedModel::euclidean(2).unwrap()
    }

    #[test]
    fn hemisphere_shape_operator_is_sqrt_two() {
        let model = euclid();
        let grid = RadialGrid::new(0.9, 513).unwrap();
        let u: Vec<f64> = grid.nodes().map(|r| math::sqrt(1.0 - r * r)).collect();
        let a = shape_operator_norm_values(&model, &grid, &u);
        for i in 0..grid.m - 1 {
            assert!(
                (a[i] - math::sqrt(2.0)).abs() < 1e-3,
                "node {i} r={}: |A| = {}",
                grid.radius(i),
                a[i]
            );
        }
    }

    #[test]
    fn constant_slices_have_zero_shape_operator() {
        let grid = RadialGrid::new(1.0, 65).unwrap();
        let u = vec![1.3; grid.m];
        for model in [euclid(), WarpedModel::hyperbolic_product(2).unwrap()] {
            let a = shape_operator_norm_values(&model, &grid, &u);
            for i in 0..grid.m - 1 {
                assert_eq!(a[i], 0.0, "{} node {i}", model.name());
            }
        }
        // hyperbolic slices are totally geodesic as well
        let a = shape_operator_norm_values(&WarpedModel::hyperbolic(2).unwrap(), &grid, &u);
        for i in 0..grid.m - 1 {
            assert!(a[i].abs() <= 1e-10, "hyperbolic node {i}: {}", a[i]);
        }
    }

    #[test]
    fn steep_annulus_recovers_cylinder_curvatures() {
        // near-vertical radial graph: kappa_s -> xi'/xi and the profile
        // curvature recovers the rho-direction term of the cylinder
        let model = WarpedModel::hyperbolic(2).unwrap();
        let grid = RadialGrid::new(1.0, 4097).unwrap();
        let steep = 2000.0;
        let u: Vec<f64> = grid.nodes().map(|r| steep * r).collect();
        let g = flow::gradient_values(&grid, &u);
        let w = flow::gradient_w_values(&model, &grid, &u);
        let nh = flow::mean_curvature_values(&model, &grid, &u);
        let i = grid.m / 2;
        let r = grid.radius(i);
        let (xi, dxi, _) = model.xi(r);
        let (rho, drho, _) = model.rho(r);
        let kappa_s = g[i] / w[i] * dxi / xi;
        assert!(
            (kappa_s - dxi / xi).abs() < 1e-3,
            "kappa_s {kappa_s} vs {}",
            dxi / xi
        );
        let kappa_p = nh[i] - kappa_s;
        assert!(
            (kappa_p - drho / rho).abs() < 1e-3,
            "kappa_p {kappa_p} vs {}",
            drho / rho
        );
    }

    #[test]
    fn trace_norm_inequality_holds() {
        // n² H² ≤ n |A|² pointwise (Cauchy-Schwarz)
        let model = WarpedModel::hyperbolic(2).unwrap();
        let grid = RadialGrid::new(1.0, 257).unwrap();
        let n = 2.0;
        let u: Vec<f64> = grid.nodes().map(|r| 0.4 * math::cos(2.5 * r)).collect();
        let nh = flow::mean_curvature_values(&model, &grid, &u);
        let a = shape_operator_norm_values(&model, &grid, &u);
        for i in 0..grid.m - 1 {
            assert!(
                nh[i] * nh[i] <= n * a[i] * a[i] + 1e-10,
                "node {i}: {} vs {}",
                nh[i] * nh[i],
                n * a[i] * a[i]
            );
        }
    }

    #[test]
    fn budget_euclidean_values() {
        let model = euclid();
        let ctx = BudgetContext {
            sup_abs_height: 0.5,
            sup_height_at_origin: 0.2,
            sup_w: 2.0,
        };
        let b = budget(&model, 1.0, -0.1, &ctx).unwrap();
        // C_R = n sup(xi' + |sigma| xi) = 2 (1 + 0.1)
        assert!((b.c_r - 2.2).abs() < 1e-6, "C_R = {}", b.c_r);
        assert_eq!(b.ricci_lower_bound, 0.0);
        assert!((b.alpha - 0.2).abs() < 1e-12, "alpha = {}", b.alpha);
        assert!((b.gamma - 1.0).abs() < 1e-12);
        assert!((b.delta - 1.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn budget_hyperbolic_gamma() {
        let model = WarpedModel::hyperbolic(2).unwrap();
        let ctx = BudgetContext {
            sup_abs_height: 1.0,
            sup_height_at_origin: 0.0,
            sup_w: 3.0,
        };
        let b = budget(&model, 1.0, 0.0, &ctx).unwrap();
        let c1 = math::cosh(1.0);
        assert!(
            (b.gamma - 1.0 / (c1 * c1)).abs() < 1e-6,
            "gamma = {}",
            b.gamma
        );
        assert_eq!(b.ricci_lower_bound, 2.0);
    }

    #[test]
    fn budget_monotone_in_sigma_magnitude() {
        let model = WarpedModel::hyperbolic(2).unwrap();
        let ctx = BudgetContext {
            sup_abs_height: 1.0,
            sup_height_at_origin: 0.0,
            sup_w: 2.0,
        };
        let mut prev_cr = 0.0;
        let mut prev_alpha = 0.0;
        for sigma in [0.0, 0.1, 0.5] {
            let b = budget(&model, 1.0, sigma, &ctx).unwrap();
            assert!(b.c_r >= prev_cr);
            assert!(b.alpha >= prev_alpha);
            let bneg = budget(&model, 1.0, -sigma, &ctx).unwrap();
            assert_eq!(bneg.c_r, b.c_r);
            assert_eq!(bneg.alpha, b.alpha);
            prev_cr = b.c_r;
            prev_alpha = b.alpha;
        }
    }

    #[test]
    fn curvature_bound_monotone_in_sup_w() {
        let model = euclid();
        let mut prev = 0.0;
        for sup_w in [1.0, 2.0, 4.0, 8.0] {
            let ctx = BudgetContext {
                sup_abs_height: 1.0,
                sup_height_at_origin: 0.0,
                sup_w,
            };
            let b = budget(&model, 1.0, -0.1, &ctx).unwrap();
            let (c, cp) = curvature_bound_coefficients(&b);
            let bound = (c * sup_w + cp * sup_w * sup_w * sup_w) * b.xi_at_r / b.zeta_bar_at_r;
            assert!(bound >= prev, "bound not monotone at sup_w = {sup_w}");
            assert!(
                2.0 * b.c1 <= bound + 1e-9 * bound,
                "majorization failed: {} vs {bound}",
                2.0 * b.c1
            );
            prev = bound;
        }
    }

    #[test]
    fn gradient_audit_constant_run_has_zero_margin() {
        let model = euclid();
        let grid = RadialGrid::new(1.0, 33).unwrap();
        let config = FlowConfig {
            t_final: 0.05,
            snapshot_every: 0.01,
            ..Default::default()
        };
        let trace = evolve(&model, &grid, vec![0.4; grid.m], &config).unwrap();
        let ctx = BudgetContext::from_trace(&trace);
        let b = budget(&model, 1.0, 0.0, &ctx).unwrap();
        let report = check_gradient_bound(&trace, &b, 0.0);
        assert!(report.violations.is_empty());
        // W = 1/rho = 1 everywhere: margin exactly 0
        for m in &report.margins {
            assert!(m.abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_audit_flags_injected_inflation_once() {
        // a uniformly translating solution keeps W = 1 everywhere, so the
        // bound is tight (zero margin) and a 1% bump at a single node of a
        // single snapshot must flag exactly that snapshot
        let model = euclid();
        let grid = RadialGrid::new(1.0, 65).unwrap();
        let u0 = vec![1.0; grid.m];
        let config = FlowConfig {
            sigma: 0.0,
            t_final: 0.1,
            snapshot_every: 0.02,
            ..Default::default()
        };
        let mut trace = evolve(&model, &grid, u0, &config).unwrap();
        assert_eq!(trace.exit, FlowExit::Completed);
        let ctx = BudgetContext::from_trace(&trace);
        let b = budget(&model, 1.0, 0.0, &ctx).unwrap();
        let clean = check_gradient_bound(&trace, &b, 1e-6);
        assert!(
            clean.violations.is_empty(),
            "clean run flagged: {:?}",
            clean.violations
        );

        // inflate one interior node of one snapshot by 1%
        let k = trace.snapshots.len() / 2;
        let i = grid.m / 2;
        trace.snapshots[k].state.u[i] *= 1.01;
        let report = check_gradient_bound(&trace, &b, 1e-6);
        assert_eq!(report.violations, vec![k], "margins: {:?}", report.margins);
    }

    #[test]
    fn envelope_audit_cap_dominated_data() {
        // u0 inside a cap's graph with the matching sigma: zero violations
        let model = euclid();
        let (_, _, h_cap) = barrier::cap_data(&model, 1.0).unwrap();
        let cap = barrier::cap_profile(&model, 1.0, 2048).unwrap();
        let grid = RadialGrid::new(0.8, 65).unwrap();
        let u0: Vec<f64> = grid
            .nodes()
            .map(|r| cap.height(r) - cap.height(0.8))
            .collect();
        let config = FlowConfig {
            sigma: h_cap,
            t_final: 0.1,
            snapshot_every: 0.02,
            ..Default::default()
        };
        let trace = evolve(&model, &grid, u0, &config).unwrap();
        assert_eq!(trace.exit, FlowExit::Completed);
        let report = check_height_envelope(&trace, &model, 0.8, h_cap, 1e-3).unwrap();
        assert!(
            report.violations.is_empty(),
            "violations: {:?}",
            report.violations
        );
    }

    #[test]
    fn euclidean_interior_w_max_is_nonincreasing() {
        // L = 0 with static boundary data: the interior maximum of W decays
        // snapshot by snapshot (within audit tolerance)
        let model = euclid();
        let grid = RadialGrid::new(1.0, 65).unwrap();
        let u0: Vec<f64> = grid
            .nodes()
            .map(|r| 0.3 * math::cos(core::f64::consts::PI * r))
            .collect();
        let config = FlowConfig {
            sigma: 0.0,
            t_final: 0.2,
            snapshot_every: 0.02,
            ..Default::default()
        };
        let trace = evolve(&model, &grid, u0, &config).unwrap();
        let mut prev = f64::INFINITY;
        for snap in &trace.snapshots {
            let w = flow::gradient_w_values(&model, &grid, &snap.state.u);
            let sup_int = w[..grid.m - 1].iter().fold(0.0f64, |a, v| a.max(*v));
            assert!(
                sup_int <= prev + 1e-6,
                "W interior max rose: {sup_int} after {prev}"
            );
            prev = sup_int;
        }
    }

    #[test]
    fn envelope_audit_zero_data_never_violates() {
        let model = euclid();
        let grid = RadialGrid::new(1.0, 33).unwrap();
        let config = FlowConfig {
            sigma: -0.1,
            t_final: 0.1,
            snapshot_every: 0.02,
            ..Default::default()
        };
        let trace = evolve(&model, &grid, vec![0.0; grid.m], &config).unwrap();
        let report = check_height_envelope(&trace, &model, 1.0, -0.1, 1e-3).unwrap();
        assert!(report.violations.is_empty());
        assert!(report.worst_upper_margin >= 0.0);
        assert!(report.worst_lower_margin >= 0.0);
    }

    #[test]
    fn curvature_audit_stationary_hemisphere() {
        let model = euclid();
        let grid = RadialGrid::new(0.8, 129).unwrap();
        let u0: Vec<f64> = grid.nodes().map(|r| math::sqrt(1.0 - r * r)).collect();
        let (_, _, h_cap) = barrier::cap_data(&model, 1.0).unwrap();
        let config = FlowConfig {
            sigma: h_cap,
            t_final: 0.02,
            snapshot_every: 0.01,
            ..Default::default()
        };
        let trace = evolve(&model, &grid, u0, &config).unwrap();
        let ctx = BudgetContext::from_trace(&trace);
        let b = budget(&model, 0.8, h_cap, &ctx).unwrap();
        // R' small enough for the localization inequality
        let report = check_curvature_bound(&trace, &b, 0.8, 0.2).unwrap();
        assert!(report.feasible);
        assert!(
            (report.sup_abs_a - math::sqrt(2.0)).abs() < 0.05,
            "sup|A| = {}",
            report.sup_abs_a
        );
        assert!(
            report.margin_flat > 0.0,
            "flat bound {} vs {}",
            report.bound_flat,
            report.sup_abs_a
        );
        assert!(report.margin_shaped > 0.0);
    }

    #[test]
    fn curvature_audit_reports_infeasible_localization() {
        let model = euclid();
        let grid = RadialGrid::new(1.0, 33).unwrap();
        let config = FlowConfig {
            sigma: 0.0,
            t_final: 5.0,
            snapshot_every: 5.0,
            ..Default::default()
        };
        let trace = evolve(&model, &grid, vec![0.0; grid.m], &config).unwrap();
        let ctx = BudgetContext::from_trace(&trace);
        let b = budget(&model, 1.0, 0.0, &ctx).unwrap();
        // T = 5 makes zeta(R') + C_R T > zeta(R)/2 for any R'
        let report = check_curvature_bound(&trace, &b, 1.0, 0.9).unwrap();
        assert!(!report.feasible);
    }

    #[test]
    fn boundary_barrier_shape() {
        let model = euclid();
        let grid = RadialGrid::new(1.0, 257).unwrap();
        let u0 = vec![0.0; grid.m];
        let params = BoundaryBarrierParams {
            slope_scale: 10.0,
            d0: 0.05,
            eps: 0.2,
        };
        let b = boundary_gradient_barrier(&model, &grid, &u0, 0.0, &params).unwrap();
        // h(0) = 0 always; h'(0) = A/L with A = L/(1 - L d0)
        let a = 10.0 / (1.0 - 10.0 * 0.05);
        assert!((b.amplitude - a).abs() < 1e-12);
        assert!((b.certified_gradient - a / 10.0).abs() < 1e-12);

        assert!(matches!(
            boundary_gradient_barrier(
                &model,
                &grid,
                &u0,
                0.0,
                &BoundaryBarrierParams {
                    slope_scale: 10.0,
                    d0: 0.2,
                    eps: 0.3
                }
            ),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn boundary_barrier_search_finds_supersolution() {
        let model = euclid();
        let grid = RadialGrid::new(1.0, 513).unwrap();
        let u0: Vec<f64> = grid
            .nodes()
            .map(|r| 0.2 * math::cos(core::f64::consts::PI * r))
            .collect();
        // C-bar estimate from data derivative sups
        let g = flow::gradient_values(&grid, &u0);
        let c_bar = g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let candidates = [5.0 * c_bar, 10.0 * c_bar, 20.0 * c_bar];
        let b = search_boundary_barrier(&model, &grid, &u0, 0.0, &candidates, 1e-6).unwrap();
        assert!(b.min_residual >= -1e-6, "residual {}", b.min_residual);
        assert!(b.certified_gradient > 0.0);
    }
}
