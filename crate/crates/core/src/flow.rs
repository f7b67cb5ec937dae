//! Finite-difference evolution of the non-parametric flow `∂ₜu = Q[u]` with
//! `Q[u] = W (nH[u] − nσ)` on geodesic balls, with Dirichlet boundary data.
//!
//! The mean curvature is discretized in conservative form through the
//! weighted divergence identity `nH = (ρ ξ^{n-1})^{-1} (ρ ξ^{n-1} u'/W)'`,
//! with fluxes `F_{i+1/2} = (u_{i+1} − u_i)/(h W_{i+1/2})` where the face
//! gradient function is evaluated locally, `W_{i+1/2}² = ρ(r_{i+1/2})⁻² +
//! ((u_{i+1} − u_i)/h)²`. The local face form keeps the flux saturating on
//! steep data and keeps boundary-adjacent nodes second-order (a nodal
//! average would drag the boundary node's one-sided gradient error into the
//! last interior flux). At the pole the operator is replaced by its even
//! limit (`u'(0) = 0`, Laplacian term `→ n u''(0)`); `ξ'/ξ` is singular
//! there but the limit is classical.
//!
//! Two schemes: explicit method of lines under a CFL bound read off the
//! frozen-coefficient principal part (default), and a semi-implicit
//! lagged-`W` linearization with a tridiagonal solve (radial mode only).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::barrier;
use crate::error::{Error, Result};
use crate::estimates::{self, Diagnostics};
use crate::math;
use crate::model::WarpedModel;

/// Uniform radial grid on `[0, r0]`; node `i` sits at `i·h`, the pole is
/// node `0`, the boundary is node `m − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub r0: f64,
    pub m: usize,
    pub h: f64,
}

impl RadialGrid {
    pub fn new(r0: f64, m: usize) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::parameter(format!(
                "grid radius must be positive, got {r0}"
            )));
        }
        if m < 16 {
            return Err(Error::parameter(format!(
                "radial grid needs at least 16 nodes, got {m}"
            )));
        }
        Ok(RadialGrid {
            r0,
            m,
            h: r0 / (m - 1) as f64,
        })
    }

    #[inline]
    pub fn radius(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(|i| self.radius(i))
    }
}

/// Uniform polar grid on the ball of radius `r0` (n = 2 only).
///
/// Storage layout: index 0 is the single pole node; ring `i ∈ [1, m_r)` and
/// angle `j ∈ [0, m_theta)` live at `1 + (i−1)·m_theta + j`. Ring `m_r − 1`
/// is the Dirichlet boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    pub r0: f64,
    pub m_r: usize,
    pub m_theta: usize,
    pub h_r: f64,
    pub h_theta: f64,
}

impl PolarGrid {
    pub fn new(r0: f64, m_r: usize, m_theta: usize) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::parameter(format!(
                "grid radius must be positive, got {r0}"
            )));
        }
        if m_r < 16 {
            return Err(Error::parameter(format!(
                "polar grid needs at least 16 rings, got {m_r}"
            )));
        }
        if m_theta < 8 || m_theta % 2 != 0 {
            return Err(Error::parameter(format!(
                "angular node count must be even and >= 8, got {m_theta}"
            )));
        }
        Ok(PolarGrid {
            r0,
            m_r,
            m_theta,
            h_r: r0 / (m_r - 1) as f64,
            h_theta: core::f64::consts::TAU / m_theta as f64,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        1 + (self.m_r - 1) * self.m_theta
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, ring: usize, j: usize) -> usize {
        debug_assert!(ring >= 1);
        1 + (ring - 1) * self.m_theta + (j % self.m_theta)
    }

    #[inline]
    pub fn ring_radius(&self, ring: usize) -> f64 {
        ring as f64 * self.h_r
    }

    #[inline]
    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.h_theta
    }
}

/// Time discretization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Scheme {
    Explicit,
    SemiImplicit,
}

/// Flow run parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowConfig {
    /// Flow constant σ; stationary states have `H ≡ σ`.
    pub sigma: f64,
    pub scheme: Scheme,
    /// CFL safety factor in `(0, 1]` (explicit); also scales the
    /// semi-implicit step `Δt = cfl·h`.
    pub cfl: f64,
    pub t_final: f64,
    pub snapshot_every: f64,
    /// Picard tolerance of the semi-implicit inner solve.
    pub newton_tol: f64,
    /// Reserved for scenario-level residual checks.
    pub residual_tol: f64,
    /// Seed echoed into traces; data generation happens upstream.
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            sigma: 0.0,
            scheme: Scheme::Explicit,
            cfl: 0.5,
            t_final: 0.25,
            snapshot_every: 0.05,
            newton_tol: 1e-10,
            residual_tol: 1e-6,
            seed: 0,
        }
    }
}

impl FlowConfig {
    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::parameter(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.t_final >= 0.0) {
            return Err(Error::parameter(format!(
                "t_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        if !(self.snapshot_every > 0.0) {
            return Err(Error::parameter(format!(
                "snapshot_every must be positive, got {}",
                self.snapshot_every
            )));
        }
        Ok(())
    }
}

/// Discretized graph height and its time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub u: Vec<f64>,
    pub t: f64,
}

/// How a flow run ended.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum FlowExit {
    Completed,
    /// Instability guard tripped; the trace holds all snapshots up to `t`.
    Unstable {
        t: f64,
        sup_u: f64,
        sup_w: f64,
    },
    /// A linear/Picard inner solve failed to converge.
    SolveFailed {
        t: f64,
        message: String,
        residual: f64,
    },
}

/// One stored snapshot of a run.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: GraphState,
    pub diagnostics: Diagnostics,
}

/// Grid of a trace (radial or polar run).
#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    Radial(RadialGrid),
    Polar(PolarGrid),
}

/// Time-ordered output of [`evolve`] / [`evolve_polar`].
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub model: WarpedModel,
    pub grid: GridKind,
    pub config: FlowConfig,
    pub snapshots: Vec<Snapshot>,
    pub exit: FlowExit,
}

impl FlowTrace {
    pub fn radial_grid(&self) -> Option<&RadialGrid> {
        match &self.grid {
            GridKind::Radial(g) => Some(g),
            GridKind::Polar(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// radial discrete operators
// ---------------------------------------------------------------------------

/// Precomputed per-grid geometry: the sphere weight `a = ρ ξ^{n-1}` at
/// nodes and faces, and `ρ` at faces for the face gradient function.
pub(crate) struct RadialGeometry {
    pub a_node: Vec<f64>,
    pub a_face: Vec<f64>,   // a at r_{i+1/2}, length m-1
    pub rho_face: Vec<f64>, // rho at r_{i+1/2}, length m-1
}

impl RadialGeometry {
    pub(crate) fn new(model: &WarpedModel, grid: &RadialGrid) -> Self {
        let a_node: Vec<f64> = grid.nodes().map(|r| model.sphere_weight(r)).collect();
        let a_face: Vec<f64> = (0..grid.m - 1)
            .map(|i| model.sphere_weight((i as f64 + 0.5) * grid.h))
            .collect();
        let rho_face: Vec<f64> = (0..grid.m - 1)
            .map(|i| model.rho((i as f64 + 0.5) * grid.h).0)
            .collect();
        RadialGeometry {
            a_node,
            a_face,
            rho_face,
        }
    }

    /// Face flux `F_{i+1/2} = (u_{i+1} − u_i) / (h W_{i+1/2})` with the
    /// locally evaluated face gradient function.
    #[inline]
    pub(crate) fn face_flux(&self, grid: &RadialGrid, u: &[f64], i: usize) -> f64 {
        let slope = (u[i + 1] - u[i]) / grid.h;
        let rho = self.rho_face[i];
        slope / math::sqrt(1.0 / (rho * rho) + slope * slope)
    }
}

/// Central-difference radial gradient; `u'(0) = 0` by symmetry, one-sided
/// second-order stencil at the boundary.
pub fn gradient_values(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let m = grid.m;
    let h = grid.h;
    let mut g = vec![0.0; m];
    for i in 1..m - 1 {
        g[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    g[m - 1] = (3.0 * u[m - 1] - 4.0 * u[m - 2] + u[m - 3]) / (2.0 * h);
    g
}

/// Gradient function `W = (ρ⁻² + |∇u|²)^{1/2}` per node; `W ≥ 1/ρ` with
/// equality where the graph is horizontal.
pub fn gradient_w_values(model: &WarpedModel, grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let g = gradient_values(grid, u);
    grid.nodes()
        .zip(g)
        .map(|(r, gi)| {
            let (rho, _, _) = model.rho(r);
            math::sqrt(1.0 / (rho * rho) + gi * gi)
        })
        .collect()
}

fn mean_curvature_with(geom: &RadialGeometry, grid: &RadialGrid, u: &[f64], n: f64) -> Vec<f64> {
    let m = grid.m;
    let h = grid.h;
    let mut flux = vec![0.0; m - 1];
    for i in 0..m - 1 {
        flux[i] = geom.face_flux(grid, u, i);
    }
    let mut nh = vec![0.0; m];
    for i in 1..m - 1 {
        nh[i] =
            (geom.a_face[i] * flux[i] - geom.a_face[i - 1] * flux[i - 1]) / (h * geom.a_node[i]);
    }
    // even limit at the pole: n F'(0) with F(0) = 0
    nh[0] = 2.0 * n * flux[0] / h;
    nh[m - 1] = 2.0 * nh[m - 2] - nh[m - 3]; // presentation only; never stepped
    nh
}

/// `nH` per node in conservative form. Interior nodes are second-order on
/// smooth data; the pole uses the even limit and the boundary entry is a
/// linear extrapolation for presentation only.
pub fn mean_curvature_values(model: &WarpedModel, grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let geom = RadialGeometry::new(model, grid);
    mean_curvature_with(&geom, grid, u, model.dimension() as f64)
}

/// `Q[u] = W (nH − nσ)` per node (boundary entry extrapolated, as in
/// [`mean_curvature_values`]).
pub fn q_operator_values(
    model: &WarpedModel,
    grid: &RadialGrid,
    u: &[f64],
    sigma: f64,
) -> Vec<f64> {
    let n = model.dimension() as f64;
    let w = gradient_w_values(model, grid, u);
    let nh = mean_curvature_values(model, grid, u);
    (0..grid.m).map(|i| w[i] * (nh[i] - n * sigma)).collect()
}

/// State-based wrappers matching the operation contracts.
pub fn gradient_w(model: &WarpedModel, grid: &RadialGrid, state: &GraphState) -> Vec<f64> {
    gradient_w_values(model, grid, &state.u)
}

pub fn mean_curvature(model: &WarpedModel, grid: &RadialGrid, state: &GraphState) -> Vec<f64> {
    mean_curvature_values(model, grid, &state.u)
}

pub fn q_operator(
    model: &WarpedModel,
    grid: &RadialGrid,
    state: &GraphState,
    sigma: f64,
) -> Vec<f64> {
    q_operator_values(model, grid, &state.u, sigma)
}

// ---------------------------------------------------------------------------
// stepping
// ---------------------------------------------------------------------------

fn radial_cfl_dt(model: &WarpedModel, grid: &RadialGrid, w: &[f64], cfl: f64) -> f64 {
    // principal diffusion coefficient of the quasilinear operator is
    // 1/(ρW)² ≤ 1
    let mut d_max = 0.0f64;
    for (r, wi) in grid.nodes().zip(w) {
        let (rho, _, _) = model.rho(r);
        let d = 1.0 / (rho * wi * rho * wi);
        d_max = d_max.max(d);
    }
    cfl * grid.h * grid.h / (2.0 * d_max.max(1e-300))
}

fn explicit_radial_step(
    model: &WarpedModel,
    geom: &RadialGeometry,
    grid: &RadialGrid,
    u: &mut [f64],
    sigma: f64,
    dt: f64,
) {
    let n = model.dimension() as f64;
    let m = grid.m;
    let h = grid.h;
    let w = gradient_w_values(model, grid, u);
    let mut flux = vec![0.0; m - 1];
    for i in 0..m - 1 {
        flux[i] = geom.face_flux(grid, u, i);
    }
    let mut du = vec![0.0; m];
    du[0] = w[0] * (2.0 * n * flux[0] / h - n * sigma);
    for i in 1..m - 1 {
        let nh =
            (geom.a_face[i] * flux[i] - geom.a_face[i - 1] * flux[i - 1]) / (h * geom.a_node[i]);
        du[i] = w[i] * (nh - n * sigma);
    }
    for i in 0..m - 1 {
        u[i] += dt * du[i];
    }
}

/// Tridiagonal (Thomas) solve; `diag` is consumed. Returns the solution.
fn thomas(mut lower: Vec<f64>, mut diag: Vec<f64>, upper: Vec<f64>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = diag.len();
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
        lower[i] = 0.0;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    }
    x
}

/// One semi-implicit step: backward Euler in the lagged-`W` linearization,
/// iterated (Picard) until the update stalls below `newton_tol`.
fn semi_implicit_radial_step(
    model: &WarpedModel,
    geom: &RadialGeometry,
    grid: &RadialGrid,
    u: &[f64],
    sigma: f64,
    dt: f64,
    newton_tol: f64,
) -> Result<Vec<f64>> {
    let n = model.dimension() as f64;
    let m = grid.m;
    let h = grid.h;
    let face_w = |field: &[f64], i: usize| -> f64 {
        let slope = (field[i + 1] - field[i]) / h;
        let rho = geom.rho_face[i];
        math::sqrt(1.0 / (rho * rho) + slope * slope)
    };
    let mut current = u.to_vec();
    for _ in 0..30 {
        let w = gradient_w_values(model, grid, &current);
        let mut lower = vec![0.0; m];
        let mut diag = vec![1.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];

        // pole row: du0/dt = W0 * 2n (u1 - u0) / (h^2 Wf) - W0 n sigma
        let c0 = w[0] * 2.0 * n / (h * h * face_w(&current, 0));
        diag[0] = 1.0 + dt * c0;
        upper[0] = -dt * c0;
        rhs[0] = u[0] - dt * w[0] * n * sigma;

        for i in 1..m - 1 {
            let cm = w[i] * geom.a_face[i - 1] / (geom.a_node[i] * h * h * face_w(&current, i - 1));
            let cp = w[i] * geom.a_face[i] / (geom.a_node[i] * h * h * face_w(&current, i));
            lower[i] = -dt * cm;
            diag[i] = 1.0 + dt * (cm + cp);
            upper[i] = -dt * cp;
            rhs[i] = u[i] - dt * w[i] * n * sigma;
        }
        diag[m - 1] = 1.0;
        rhs[m - 1] = u[m - 1];

        let next = thomas(lower, diag, upper, rhs);
        let mut delta = 0.0f64;
        let mut scale = 1.0f64;
        for i in 0..m {
            delta = delta.max((next[i] - current[i]).abs());
            scale = scale.max(next[i].abs());
        }
        current = next;
        if delta <= newton_tol * scale {
            return Ok(current);
        }
    }
    let w = gradient_w_values(model, grid, &current);
    let nh = mean_curvature_with(geom, grid, &current, n);
    let mut worst = 0.0f64;
    for i in 0..m - 1 {
        let res = (current[i] - u[i]) / dt - w[i] * (nh[i] - n * sigma);
        worst = worst.max(res.abs());
    }
    Err(Error::numeric(
        "semi-implicit inner solve did not converge",
        worst,
    ))
}

/// One time step with the configured scheme; boundary nodes unchanged.
pub fn step(
    model: &WarpedModel,
    grid: &RadialGrid,
    state: &GraphState,
    config: &FlowConfig,
) -> Result<GraphState> {
    config.validate()?;
    let geom = RadialGeometry::new(model, grid);
    let mut u = state.u.clone();
    match config.scheme {
        Scheme::Explicit => {
            let w = gradient_w_values(model, grid, &u);
            let dt = radial_cfl_dt(model, grid, &w, config.cfl);
            explicit_radial_step(model, &geom, grid, &mut u, config.sigma, dt);
            Ok(GraphState { u, t: state.t + dt })
        }
        Scheme::SemiImplicit => {
            let dt = config.cfl * grid.h;
            let u_new = semi_implicit_radial_step(
                model,
                &geom,
                grid,
                &u,
                config.sigma,
                dt,
                config.newton_tol,
            )?;
            Ok(GraphState {
                u: u_new,
                t: state.t + dt,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// full runs
// ---------------------------------------------------------------------------

/// Instability guard bound: 10³ × the height-envelope scale of the run,
/// falling back to a data-scale bound when no barrier applies.
fn guard_height(model: &WarpedModel, r0: f64, sigma: f64, t_final: f64, u0_sup_abs: f64) -> f64 {
    let envelope = (|| -> Result<f64> {
        let r_t = barrier::barrier_radius(model, r0, sigma, t_final)?;
        let cap = barrier::cap_profile(model, r_t, 256)?;
        Ok(u0_sup_abs + cap.height_at_origin())
    })();
    match envelope {
        Ok(b) => 1e3 * b,
        Err(_) => 1e3 * (1.0 + 2.0 * u0_sup_abs),
    }
}

const GUARD_W: f64 = 1e6;

fn radial_diagnostics(model: &WarpedModel, grid: &RadialGrid, u: &[f64], t: f64) -> Diagnostics {
    let w = gradient_w_values(model, grid, u);
    let nh = mean_curvature_values(model, grid, u);
    let abs_a = estimates::shape_operator_norm_values(model, grid, u);
    let m = grid.m;
    let mut sup_abs_u = 0.0f64;
    for &v in u {
        sup_abs_u = sup_abs_u.max(v.abs());
    }
    let mut sup_w_int = 0.0f64;
    for &v in &w[..m - 1] {
        sup_w_int = sup_w_int.max(v);
    }
    let mut sup_a = 0.0f64;
    for &v in &abs_a[..m - 1] {
        sup_a = sup_a.max(v);
    }
    let mut nh_min = f64::INFINITY;
    let mut nh_max = f64::NEG_INFINITY;
    for &v in &nh[1..m - 1] {
        nh_min = nh_min.min(v);
        nh_max = nh_max.max(v);
    }
    Diagnostics {
        t,
        sup_abs_u,
        sup_w_interior: sup_w_int,
        sup_w_boundary: w[m - 1],
        sup_abs_a: sup_a,
        nh_min,
        nh_max,
        envelope_margin_upper: None,
        envelope_margin_lower: None,
        gradient_bound_margin: None,
        curvature_bound_margin: None,
    }
}

/// Recompute the per-snapshot observables for a state (used when a trace
/// is rebuilt from files).
pub fn compute_diagnostics(model: &WarpedModel, grid: &GridKind, u: &[f64], t: f64) -> Diagnostics {
    match grid {
        GridKind::Radial(g) => radial_diagnostics(model, g, u, t),
        GridKind::Polar(g) => {
            let geom = PolarGeometry::new(model, g);
            polar_diagnostics(model, g, &geom, u, t)
        }
    }
}

/// Evolve radial initial data `u0` to `t_final`, snapshotting every
/// `snapshot_every`. Boundary data is `u0` at the boundary node for all
/// times. Instability and inner-solve failures end the run early with the
/// partial trace; see [`FlowExit`].
pub fn evolve(
    model: &WarpedModel,
    grid: &RadialGrid,
    u0: Vec<f64>,
    config: &FlowConfig,
) -> Result<FlowTrace> {
    evolve_radial_inner(model, grid, u0, config, None)
}

/// As [`evolve`] but with a forced time step (stability experiments).
pub fn evolve_with_dt(
    model: &WarpedModel,
    grid: &RadialGrid,
    u0: Vec<f64>,
    config: &FlowConfig,
    dt: f64,
) -> Result<FlowTrace> {
    evolve_radial_inner(model, grid, u0, config, Some(dt))
}

fn evolve_radial_inner(
    model: &WarpedModel,
    grid: &RadialGrid,
    u0: Vec<f64>,
    config: &FlowConfig,
    dt_forced: Option<f64>,
) -> Result<FlowTrace> {
    config.validate()?;
    if u0.len() != grid.m {
        return Err(Error::parameter(format!(
            "initial data has {} nodes, grid expects {}",
            u0.len(),
            grid.m
        )));
    }
    if !u0.iter().all(|v| v.is_finite()) {
        return Err(Error::parameter("initial data must be finite"));
    }
    let geom = RadialGeometry::new(model, grid);
    let u0_sup = u0.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let guard_u = guard_height(model, grid.r0, config.sigma, config.t_final, u0_sup);

    let mut u = u0;
    let mut t = 0.0;
    let mut snapshots = Vec::new();
    snapshots.push(Snapshot {
        state: GraphState { u: u.clone(), t },
        diagnostics: radial_diagnostics(model, grid, &u, t),
    });
    let mut next_snap = config.snapshot_every.min(config.t_final);
    let mut exit = FlowExit::Completed;

    'outer: while t < config.t_final {
        let w = gradient_w_values(model, grid, &u);
        let mut dt = match (dt_forced, config.scheme) {
            (Some(forced), _) => forced,
            (None, Scheme::Explicit) => radial_cfl_dt(model, grid, &w, config.cfl),
            (None, Scheme::SemiImplicit) => config.cfl * grid.h,
        };
        // land exactly on snapshot times and on t_final
        if t + dt >= next_snap - 1e-14 * next_snap.max(1.0) {
            dt = next_snap - t;
        }
        match config.scheme {
            Scheme::Explicit => {
                explicit_radial_step(model, &geom, grid, &mut u, config.sigma, dt);
            }
            Scheme::SemiImplicit => {
                match semi_implicit_radial_step(
                    model,
                    &geom,
                    grid,
                    &u,
                    config.sigma,
                    dt,
                    config.newton_tol,
                ) {
                    Ok(next) => u = next,
                    Err(Error::Numeric { message, residual }) => {
                        exit = FlowExit::SolveFailed {
                            t,
                            message,
                            residual,
                        };
                        break 'outer;
                    }
                    Err(other) => return Err(other),
                }
            }
        }
        t += dt;

        // instability guard
        let mut sup_u = 0.0f64;
        let mut finite = true;
        for &v in &u {
            if !v.is_finite() {
                finite = false;
                break;
            }
            sup_u = sup_u.max(v.abs());
        }
        let sup_w = if finite {
            gradient_w_values(model, grid, &u)
                .iter()
                .fold(0.0f64, |acc, v| acc.max(*v))
        } else {
            f64::INFINITY
        };
        if !finite || sup_u > guard_u || sup_w > GUARD_W {
            exit = FlowExit::Unstable { t, sup_u, sup_w };
            break 'outer;
        }

        if (t - next_snap).abs() <= 1e-12 * next_snap.max(1.0) {
            snapshots.push(Snapshot {
                state: GraphState { u: u.clone(), t },
                diagnostics: radial_diagnostics(model, grid, &u, t),
            });
            next_snap = (next_snap + config.snapshot_every).min(config.t_final);
        }
    }
    if exit != FlowExit::Completed {
        // flush the partial state so the trace ends at the abort time
        snapshots.push(Snapshot {
            state: GraphState { u: u.clone(), t },
            diagnostics: radial_diagnostics(model, grid, &u, t),
        });
    }
    Ok(FlowTrace {
        model: model.clone(),
        grid: GridKind::Radial(grid.clone()),
        config: config.clone(),
        snapshots,
        exit,
    })
}

// ---------------------------------------------------------------------------
// polar (n = 2) mode
// ---------------------------------------------------------------------------

pub(crate) struct PolarGeometry {
    pub rho: Vec<f64>,      // per ring, index 0 = pole
    pub xi: Vec<f64>,       // per ring (xi(0) = 0, unused)
    pub a_node: Vec<f64>,   // rho * xi per ring
    pub a_face: Vec<f64>,   // rho * xi at ring + 1/2, length m_r - 1
    pub rho_face: Vec<f64>, // rho at ring + 1/2
}

impl PolarGeometry {
    fn new(model: &WarpedModel, grid: &PolarGrid) -> Self {
        let rho = (0..grid.m_r)
            .map(|i| model.rho(grid.ring_radius(i)).0)
            .collect();
        let xi = (0..grid.m_r)
            .map(|i| model.xi(grid.ring_radius(i)).0)
            .collect();
        let a_node = (0..grid.m_r)
            .map(|i| model.sphere_weight(grid.ring_radius(i)))
            .collect();
        let a_face = (0..grid.m_r - 1)
            .map(|i| model.sphere_weight((i as f64 + 0.5) * grid.h_r))
            .collect();
        let rho_face = (0..grid.m_r - 1)
            .map(|i| model.rho((i as f64 + 0.5) * grid.h_r).0)
            .collect();
        PolarGeometry {
            rho,
            xi,
            a_node,
            a_face,
            rho_face,
        }
    }
}

/// Nodal gradient components of a polar state: the radial part `u_r` and
/// the orthonormal angular part `u_θ/ξ` (both zero at the pole entry; the
/// pole carries a vector gradient handled separately).
fn polar_gradients(grid: &PolarGrid, geom: &PolarGeometry, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mt = grid.m_theta;
    let mr = grid.m_r;
    let hr = grid.h_r;
    let ht = grid.h_theta;
    let mut ur = vec![0.0; grid.len()];
    let mut utx = vec![0.0; grid.len()];
    for i in 1..mr {
        let xi = geom.xi[i];
        for j in 0..mt {
            let here = grid.idx(i, j);
            let inner = if i == 1 { 0 } else { grid.idx(i - 1, j) };
            ur[here] = if i + 1 < mr {
                (u[grid.idx(i + 1, j)] - u[inner]) / (2.0 * hr)
            } else {
                let um2 = if i >= 2 { u[grid.idx(i - 2, j)] } else { u[0] };
                (3.0 * u[here] - 4.0 * u[inner] + um2) / (2.0 * hr)
            };
            utx[here] =
                (u[grid.idx(i, j + 1)] - u[grid.idx(i, (j + mt - 1) % mt)]) / (2.0 * ht * xi);
        }
    }
    (ur, utx)
}

/// Nodal `W` for a polar state: `W² = ρ⁻² + u_r² + u_θ²/ξ²`.
pub fn polar_gradient_w_values(model: &WarpedModel, grid: &PolarGrid, u: &[f64]) -> Vec<f64> {
    let geom = PolarGeometry::new(model, grid);
    polar_w_with(&geom, grid, u)
}

fn polar_w_with(geom: &PolarGeometry, grid: &PolarGrid, u: &[f64]) -> Vec<f64> {
    let mt = grid.m_theta;
    let hr = grid.h_r;
    let mut w = vec![0.0; grid.len()];

    // pole gradient from the first-ring Fourier moments
    let mut gx = 0.0;
    let mut gy = 0.0;
    for j in 0..mt {
        let th = grid.theta(j);
        gx += u[grid.idx(1, j)] * math::cos(th);
        gy += u[grid.idx(1, j)] * math::sin(th);
    }
    gx *= 2.0 / (mt as f64 * hr);
    gy *= 2.0 / (mt as f64 * hr);
    w[0] = math::sqrt(1.0 / (geom.rho[0] * geom.rho[0]) + gx * gx + gy * gy);

    let (ur, utx) = polar_gradients(grid, geom, u);
    for i in 1..grid.m_r {
        let rho = geom.rho[i];
        for j in 0..mt {
            let here = grid.idx(i, j);
            w[here] = math::sqrt(1.0 / (rho * rho) + ur[here] * ur[here] + utx[here] * utx[here]);
        }
    }
    w
}

/// `Q[u]` for a polar state (interior + pole; boundary entries zero).
///
/// Face fluxes use the locally differenced along-face gradient plus the
/// averaged transverse nodal component, so the face `W` sees the full
/// gradient and the scheme reduces exactly to the radial one on
/// θ-independent data.
fn polar_q_with(
    geom: &PolarGeometry,
    grid: &PolarGrid,
    u: &[f64],
    w: &[f64],
    sigma: f64,
) -> Vec<f64> {
    let n = 2.0;
    let mt = grid.m_theta;
    let mr = grid.m_r;
    let hr = grid.h_r;
    let ht = grid.h_theta;
    let mut q = vec![0.0; grid.len()];
    let (ur, utx) = polar_gradients(grid, geom, u);

    // radial flux at the face between ring i and i+1 (pole: i = 0)
    let radial_flux = |i: usize, j: usize| -> f64 {
        let here = if i == 0 { 0 } else { grid.idx(i, j) };
        let outer = grid.idx(i + 1, j);
        let slope = (u[outer] - u[here]) / hr;
        let transverse = if i == 0 {
            0.5 * utx[outer]
        } else {
            0.5 * (utx[here] + utx[outer])
        };
        let rho = geom.rho_face[i];
        slope / math::sqrt(1.0 / (rho * rho) + slope * slope + transverse * transverse)
    };

    // pole: n * F'(0) with theta-averaged face flux
    let mut fbar = 0.0;
    for j in 0..mt {
        fbar += radial_flux(0, j);
    }
    fbar /= mt as f64;
    let nh_pole = 2.0 * n * fbar / hr;
    q[0] = w[0] * (nh_pole - n * sigma);

    for i in 1..mr - 1 {
        let a_i = geom.a_node[i];
        let xi = geom.xi[i];
        let rho = geom.rho[i];
        for j in 0..mt {
            let here = grid.idx(i, j);
            let f_p = radial_flux(i, j);
            let f_m = radial_flux(i - 1, j);
            let radial = (geom.a_face[i] * f_p - geom.a_face[i - 1] * f_m) / (hr * a_i);

            // angular flux between (i, j) and (i, j±1); rho and xi are
            // constant along a ring
            let jp = grid.idx(i, j + 1);
            let jm = grid.idx(i, (j + mt - 1) % mt);
            let ang_flux = |from: usize, to: usize| -> f64 {
                let slope = (u[to] - u[from]) / (ht * xi);
                let transverse = 0.5 * (ur[from] + ur[to]);
                slope / math::sqrt(1.0 / (rho * rho) + slope * slope + transverse * transverse)
            };
            let g_p = ang_flux(here, jp);
            let g_m = ang_flux(jm, here);
            let angular = (g_p - g_m) / (ht * xi);

            let nh = radial + angular;
            q[here] = w[here] * (nh - n * sigma);
        }
    }
    q
}

fn polar_cfl_dt(geom: &PolarGeometry, grid: &PolarGrid, w: &[f64], cfl: f64) -> f64 {
    let hr2 = grid.h_r * grid.h_r;
    let mut rate_max = 0.0f64;
    for i in 1..grid.m_r - 1 {
        let xi = geom.xi[i];
        let ang = 1.0 / (xi * grid.h_theta * xi * grid.h_theta);
        for j in 0..grid.m_theta {
            let here = grid.idx(i, j);
            let d = 1.0 / (geom.rho[i] * w[here] * geom.rho[i] * w[here]);
            rate_max = rate_max.max(d * (1.0 / hr2 + ang));
        }
    }
    // pole rate: 2n/(h² W W̄ ρ²)-ish, bounded by the same estimate with D ≤ 1
    rate_max = rate_max.max(4.0 / hr2);
    cfl / (2.0 * rate_max)
}

fn polar_radialized(grid: &PolarGrid, u: &[f64]) -> Vec<f64> {
    let mut radial = Vec::with_capacity(grid.m_r);
    radial.push(u[0]);
    for i in 1..grid.m_r {
        let mut acc = 0.0;
        for j in 0..grid.m_theta {
            acc += u[grid.idx(i, j)];
        }
        radial.push(acc / grid.m_theta as f64);
    }
    radial
}

fn polar_diagnostics(
    model: &WarpedModel,
    grid: &PolarGrid,
    geom: &PolarGeometry,
    u: &[f64],
    t: f64,
) -> Diagnostics {
    let w = polar_w_with(geom, grid, u);
    let q0 = polar_q_with(geom, grid, u, &w, 0.0);
    let boundary_start = grid.idx(grid.m_r - 1, 0);
    let mut sup_abs_u = 0.0f64;
    for &v in u {
        sup_abs_u = sup_abs_u.max(v.abs());
    }
    let mut sup_w_int = 0.0f64;
    for &v in &w[..boundary_start] {
        sup_w_int = sup_w_int.max(v);
    }
    let mut sup_w_bdry = 0.0f64;
    for &v in &w[boundary_start..] {
        sup_w_bdry = sup_w_bdry.max(v);
    }
    // nH = Q/W at sigma = 0
    let mut nh_min = f64::INFINITY;
    let mut nh_max = f64::NEG_INFINITY;
    for idx in 1..boundary_start {
        let nh = q0[idx] / w[idx];
        nh_min = nh_min.min(nh);
        nh_max = nh_max.max(nh);
    }
    // |A| only for the radialized average in polar mode
    let radial_u = polar_radialized(grid, u);
    let rgrid = RadialGrid {
        r0: grid.r0,
        m: grid.m_r,
        h: grid.h_r,
    };
    let abs_a = estimates::shape_operator_norm_values(model, &rgrid, &radial_u);
    let mut sup_a = 0.0f64;
    for &v in &abs_a[..grid.m_r - 1] {
        sup_a = sup_a.max(v);
    }
    Diagnostics {
        t,
        sup_abs_u,
        sup_w_interior: sup_w_int,
        sup_w_boundary: sup_w_bdry,
        sup_abs_a: sup_a,
        nh_min,
        nh_max,
        envelope_margin_upper: None,
        envelope_margin_lower: None,
        gradient_bound_margin: None,
        curvature_bound_margin: None,
    }
}

/// Polar-mode evolution (n = 2, explicit scheme only). Same contracts as
/// [`evolve`]; `⟨∇ log ρ, ∇u/W⟩` uses the radial `ρ` of the model.
pub fn evolve_polar(
    model: &WarpedModel,
    grid: &PolarGrid,
    u0: Vec<f64>,
    config: &FlowConfig,
) -> Result<FlowTrace> {
    evolve_polar_inner(model, grid, u0, config, None)
}

/// As [`evolve_polar`] but with a forced time step.
pub fn evolve_polar_with_dt(
    model: &WarpedModel,
    grid: &PolarGrid,
    u0: Vec<f64>,
    config: &FlowConfig,
    dt: f64,
) -> Result<FlowTrace> {
    evolve_polar_inner(model, grid, u0, config, Some(dt))
}

fn evolve_polar_inner(
    model: &WarpedModel,
    grid: &PolarGrid,
    u0: Vec<f64>,
    config: &FlowConfig,
    dt_forced: Option<f64>,
) -> Result<FlowTrace> {
    config.validate()?;
    if model.dimension() != 2 {
        return Err(Error::Unsupported(format!(
            "polar mode requires n = 2, model has n = {}",
            model.dimension()
        )));
    }
    if config.scheme == Scheme::SemiImplicit {
        return Err(Error::Unsupported(
            "semi-implicit stepping is radial-only; use the explicit scheme in polar mode".into(),
        ));
    }
    if u0.len() != grid.len() {
        return Err(Error::parameter(format!(
            "initial data has {} nodes, polar grid expects {}",
            u0.len(),
            grid.len()
        )));
    }
    if !u0.iter().all(|v| v.is_finite()) {
        return Err(Error::parameter("initial data must be finite"));
    }

    let geom = PolarGeometry::new(model, grid);
    let u0_sup = u0.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let guard_u = guard_height(model, grid.r0, config.sigma, config.t_final, u0_sup);

    let mut u = u0;
    let mut t = 0.0;
    let mut snapshots = Vec::new();
    snapshots.push(Snapshot {
        state: GraphState { u: u.clone(), t },
        diagnostics: polar_diagnostics(model, grid, &geom, &u, t),
    });
    let mut next_snap = config.snapshot_every.min(config.t_final);
    let mut exit = FlowExit::Completed;

    while t < config.t_final {
        let w = polar_w_with(&geom, grid, &u);
        let mut dt = dt_forced.unwrap_or_else(|| polar_cfl_dt(&geom, grid, &w, config.cfl));
        if t + dt >= next_snap - 1e-14 * next_snap.max(1.0) {
            dt = next_snap - t;
        }
        let q = polar_q_with(&geom, grid, &u, &w, config.sigma);
        let boundary_start = grid.idx(grid.m_r - 1, 0);
        for idx in 0..boundary_start {
            u[idx] += dt * q[idx];
        }
        t += dt;

        let mut sup_u = 0.0f64;
        let mut finite = true;
        for &v in &u {
            if !v.is_finite() {
                finite = false;
                break;
            }
            sup_u = sup_u.max(v.abs());
        }
        let sup_w = if finite {
            polar_w_with(&geom, grid, &u)
                .iter()
                .fold(0.0f64, |acc, v| acc.max(*v))
        } else {
            f64::INFINITY
        };
        if !finite || sup_u > guard_u || sup_w > GUARD_W {
            exit = FlowExit::Unstable { t, sup_u, sup_w };
            break;
        }

        if (t - next_snap).abs() <= 1e-12 * next_snap.max(1.0) {
            snapshots.push(Snapshot {
                state: GraphState { u: u.clone(), t },
                diagnostics: polar_diagnostics(model, grid, &geom, &u, t),
            });
            next_snap = (next_snap + config.snapshot_every).min(config.t_final);
        }
    }
    if exit != FlowExit::Completed {
        snapshots.push(Snapshot {
            state: GraphState { u: u.clone(), t },
            diagnostics: polar_diagnostics(model, grid, &geom, &u, t),
        });
    }
    Ok(FlowTrace {
        model: model.clone(),
        grid: GridKind::Polar(grid.clone()),
        config: config.clone(),
        snapshots,
        exit,
    })
}

// ---------------------------------------------------------------------------
// mollification and exhaustion
// ---------------------------------------------------------------------------

/// Triangle-kernel smoothing of radial nodal data, preserving the boundary
/// value exactly (point reflection across the boundary) and evenness at the
/// pole. `width` is the kernel half-support and must be at least `2h`.
pub fn mollify(grid: &RadialGrid, u0: &[f64], width: f64) -> Result<Vec<f64>> {
    if u0.len() != grid.m {
        return Err(Error::parameter("data length does not match grid"));
    }
    if width < 2.0 * grid.h {
        return Err(Error::parameter(format!(
            "mollifier width {width} must be at least 2h = {}",
            2.0 * grid.h
        )));
    }
    let m = grid.m as isize;
    let radius = (width / grid.h) as isize;
    let sample = |k: isize| -> f64 {
        // even reflection at the pole, point reflection at the boundary
        let mut k = k;
        if k < 0 {
            k = -k;
        }
        if k < m {
            u0[k as usize]
        } else {
            let mirrored = 2 * (m - 1) - k;
            let mirrored = mirrored.max(0) as usize;
            2.0 * u0[(m - 1) as usize] - u0[mirrored]
        }
    };
    let mut out = Vec::with_capacity(grid.m);
    for i in 0..m {
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for k in -radius..=radius {
            let d = (k as f64 * grid.h / width).abs();
            let kw = (1.0 - d).max(0.0);
            if kw > 0.0 {
                acc += kw * sample(i + k);
                wsum += kw;
            }
        }
        out.push(acc / wsum);
    }
    // the point reflection preserves the boundary value up to rounding;
    // pin it so Dirichlet data survives bit-for-bit
    out[grid.m - 1] = u0[grid.m - 1];
    Ok(out)
}

/// Result of one exhaustion experiment: Dirichlet solves on a nested family
/// of balls, restricted to a fixed compact ball and compared pairwise.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExhaustionReport {
    pub radii: Vec<f64>,
    /// `diffs[k] = sup_{B_compact} |u_{k+1}(·, T) − u_k(·, T)|`.
    pub diffs: Vec<f64>,
    pub nonincreasing: bool,
    pub compact_radius: f64,
    pub t_final: f64,
}

/// Number of uniform sample points used when restricting an exhaustion
/// solve to the compact comparison ball.
pub const EXHAUSTION_SAMPLES: usize = 129;

/// Solve the Dirichlet problem on the ball of radius `big_r` with spacing
/// close to `h_target`, evolve to the configured final time and restrict
/// the result to `EXHAUSTION_SAMPLES` uniform points of `[0, compact_radius]`.
pub fn exhaustion_restriction<F: Fn(f64) -> f64>(
    model: &WarpedModel,
    u0: F,
    big_r: f64,
    h_target: f64,
    compact_radius: f64,
    config: &FlowConfig,
) -> Result<Vec<f64>> {
    let m = ((math::round(big_r / h_target)) as usize + 1).max(16);
    let grid = RadialGrid::new(big_r, m)?;
    let data: Vec<f64> = grid.nodes().map(&u0).collect();
    let trace = evolve(model, &grid, data, config)?;
    if trace.exit != FlowExit::Completed {
        return Err(Error::numeric(
            format!(
                "exhaustion solve on ball {big_r} ended early: {:?}",
                trace.exit
            ),
            f64::NAN,
        ));
    }
    let last = &trace
        .snapshots
        .last()
        .expect("at least one snapshot")
        .state
        .u;
    // linear interpolation onto the common compact sample set
    let mut restricted = Vec::with_capacity(EXHAUSTION_SAMPLES);
    for s in 0..EXHAUSTION_SAMPLES {
        let r = compact_radius * s as f64 / (EXHAUSTION_SAMPLES - 1) as f64;
        let x = r / grid.h;
        let i = (x as usize).min(grid.m - 2);
        let frac = x - i as f64;
        restricted.push(last[i] * (1.0 - frac) + last[i + 1] * frac);
    }
    Ok(restricted)
}

/// Pairwise sup-differences of a family of compact restrictions.
pub fn exhaustion_diffs(restrictions: &[Vec<f64>]) -> (Vec<f64>, bool) {
    let mut diffs = Vec::new();
    for pair in restrictions.windows(2) {
        let mut sup = 0.0f64;
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            sup = sup.max((a - b).abs());
        }
        diffs.push(sup);
    }
    let nonincreasing = diffs.windows(2).all(|w| w[1] <= w[0]);
    (diffs, nonincreasing)
}

/// Solve the Dirichlet problem on each ball of `radii` (increasing), keep
/// the spatial step near the first ball's `h` on every ball, and compare
/// the time-`T` solutions on the compact ball.
pub fn exhaustion_study<F: Fn(f64) -> f64>(
    model: &WarpedModel,
    u0: F,
    radii: &[f64],
    compact_radius: f64,
    m_base: usize,
    config: &FlowConfig,
) -> Result<ExhaustionReport> {
    if radii.is_empty() {
        return Err(Error::parameter("exhaustion needs at least one radius"));
    }
    for w in radii.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::parameter(
                "exhaustion radii must be strictly increasing",
            ));
        }
    }
    if !(compact_radius < radii[0]) {
        return Err(Error::parameter(format!(
            "compact radius {compact_radius} must be below the smallest ball {}",
            radii[0]
        )));
    }
    let h_target = radii[0] / (m_base - 1) as f64;
    let mut restrictions: Vec<Vec<f64>> = Vec::new();
    for &big_r in radii {
        restrictions.push(exhaustion_restriction(
            model,
            &u0,
            big_r,
            h_target,
            compact_radius,
            config,
        )?);
    }
    let (diffs, nonincreasing) = exhaustion_diffs(&restrictions);
    Ok(ExhaustionReport {
        radii: radii.to_vec(),
        diffs,
        nonincreasing,
        compact_radius,
        t_final: config.t_final,
    })
}
