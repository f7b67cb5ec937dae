//! Constant-mean-curvature spherical caps and the time-indexed barrier
//! family they generate.
//!
//! A cap of radius `R` is the rotationally symmetric graph `v_R` over the
//! geodesic ball `B_R(o)` with constant mean curvature `H(R) = −A(R)/(nV(R))`
//! (negative with the upward normal). The cap has a vertical tangent at its
//! boundary, so the profile is computed from the regular arclength system
//!
//! ```text
//! ṙ = cos φ,   ρ ṡ = sin φ,   φ̇ = −n H(R) − n H_cyl(r) sin φ
//! ```
//!
//! starting at `(r, s, φ) = (R, 0, π/2)`; the first-order quadrature formula
//! for `v_R'` is kept as a cross-check away from the endpoint.
//!
//! Growing the cap radius by `dR/dt = −n(H(R) − σ)` makes the translated
//! family `u₊(x, t) = v_{R(t)}(r(x))` a supersolution of the flow on any
//! fixed ball, which is what the height-estimate envelopes audit against.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::{self, RadialGrid};
use crate::math;
use crate::model::WarpedModel;
use crate::ode::{self, Control, Options, StepRecord};
use crate::quad;

/// Fraction of `R` at which the profile integration stops and the axis is
/// closed by even extrapolation (`1/ξ` is singular at `r = 0` but the
/// profile is smooth and even there).
const AXIS_EPS: f64 = 1e-3;

/// Cap boundary data: `(A, V, H)` at radius `R`.
///
/// `A = ρ ξ^{n-1}` at `R`, `V = ∫₀ᴿ ρ ξ^{n-1}`, `H = −A/(nV) < 0`.
pub fn cap_data(model: &WarpedModel, big_r: f64) -> Result<(f64, f64, f64)> {
    if !(big_r > 0.0) {
        return Err(Error::domain(format!(
            "cap radius must be positive, got {big_r}"
        )));
    }
    let area = model.sphere_weight(big_r);
    let volume = quad::integrate_default(|s| model.sphere_weight(s), 0.0, big_r)?;
    let h = -area / (model.dimension() as f64 * volume);
    Ok((area, volume, h))
}

/// One sample of a cap profile.
#[derive(Debug, Clone, Copy)]
pub struct CapNode {
    pub r: f64,
    /// Height `v_R(r)`; `v(R) = 0`, increasing toward the axis.
    pub v: f64,
    /// Radial slope `v_R'(r) ≤ 0`; `−∞` at `r = R` (vertical tangent).
    pub v_prime: f64,
    /// Angle between the profile tangent and the radial direction,
    /// decreasing from `π/2` at `r = R` to `0` at the axis.
    pub phi: f64,
}

/// A computed cap: radius, mean curvature and profile samples on a uniform
/// radius grid `[0, R]` (ascending).
#[derive(Debug, Clone)]
pub struct CapProfile {
    pub radius: f64,
    pub mean_curvature: f64,
    pub nodes: Vec<CapNode>,
}

impl CapProfile {
    fn spacing(&self) -> f64 {
        self.radius / (self.nodes.len() - 1) as f64
    }

    /// Cap height at the axis, `v_R(0)`.
    pub fn height_at_origin(&self) -> f64 {
        self.nodes[0].v
    }

    /// Height `v_R(r)` by piecewise Hermite interpolation; the last interval
    /// uses the square-root model matching the vertical tangent at `r = R`.
    pub fn height(&self, r: f64) -> f64 {
        self.sample(r).0
    }

    /// Slope `v_R'(r)`, interpolated consistently with [`Self::height`].
    pub fn slope(&self, r: f64) -> f64 {
        self.sample(r).1
    }

    fn sample(&self, r: f64) -> (f64, f64) {
        let n = self.nodes.len();
        let h = self.spacing();
        let r = r.clamp(0.0, self.radius);
        let mut i = ((r / h) as usize).min(n - 2);
        if i == n - 2 && r < self.nodes[n - 2].r {
            i = n - 3;
        }
        let a = &self.nodes[i];
        let b = &self.nodes[i + 1];
        if i + 2 == n {
            // v ≈ κ √(R − r) on the final interval (vertical tangent at R)
            let kappa = a.v / math::sqrt(self.radius - a.r);
            let d = (self.radius - r).max(0.0);
            if d == 0.0 {
                return (0.0, f64::NEG_INFINITY);
            }
            return (kappa * math::sqrt(d), -0.5 * kappa / math::sqrt(d));
        }
        let s = (r - a.r) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * a.v + h10 * h * a.v_prime + h01 * b.v + h11 * h * b.v_prime;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let vp = d00 * a.v + d10 * a.v_prime + d01 * b.v + d11 * b.v_prime;
        (v, vp)
    }
}

/// Integrate the cap profile of radius `R` and sample it on a uniform grid
/// of `resolution` nodes spanning `[0, R]`.
pub fn cap_profile(model: &WarpedModel, big_r: f64, resolution: usize) -> Result<CapProfile> {
    if resolution < 16 {
        return Err(Error::parameter(format!(
            "cap resolution must be >= 16, got {resolution}"
        )));
    }
    let (_, _, h_cap) = cap_data(model, big_r)?;
    let n = model.dimension() as f64;

    // arclength system; phi here is the inward-orientation angle that runs
    // from pi/2 at the boundary toward pi at the axis
    let rhs = |_: f64, y: &[f64; 3]| -> [f64; 3] {
        let r = y[0].max(1e-300);
        let phi = y[2];
        let (xi, dxi, _) = model.xi(r);
        let (rho, drho, _) = model.rho(r);
        let h_cyl = ((n - 1.0) * dxi / xi + drho / rho) / n;
        [
            math::cos(phi),
            math::sin(phi) / rho,
            -n * h_cap - n * h_cyl * math::sin(phi),
        ]
    };

    let r_stop = AXIS_EPS * big_r;
    let h_grid = big_r / (resolution - 1) as f64;
    // ascending store; popped from the back, so targets are consumed from
    // just below R toward the axis as r decreases
    let mut targets: Vec<f64> = (0..resolution - 1).map(|j| j as f64 * h_grid).collect();
    let mut collected: Vec<CapNode> = Vec::with_capacity(resolution);
    collected.push(CapNode {
        r: big_r,
        v: 0.0,
        v_prime: f64::NEG_INFINITY,
        phi: core::f64::consts::FRAC_PI_2,
    });

    // h_max keeps the Hermite extraction error (O(h^4/384)) far below the
    // 1e-6 profile tolerance even when the dynamics are slow
    let opts = Options {
        rtol: 1e-11,
        atol: 1e-13,
        h_init: 1e-6 * big_r.max(1.0),
        h_max: 0.005 * big_r,
        max_steps: 2_000_000,
        ..Default::default()
    };

    let store = |node_r: f64, y: &[f64; 3], out: &mut Vec<CapNode>| {
        let (rho, _, _) = model.rho(node_r.max(1e-300));
        let v_prime = math::sin(y[2]) / (rho * math::cos(y[2]));
        let phi = math::atan2(-v_prime, 1.0 / rho);
        out.push(CapNode {
            r: node_r,
            v: y[1],
            v_prime,
            phi,
        });
    };

    let result = ode::integrate(
        rhs,
        0.0,
        f64::INFINITY,
        [big_r, 0.0, core::f64::consts::FRAC_PI_2],
        &opts,
        |rec: &StepRecord<3>| {
            // r is monotone decreasing after the start; pull out every target
            // crossed during this step by bisection on the Hermite interpolant
            while let Some(&target) = targets.last() {
                if target < r_stop || target < rec.y1[0] {
                    break;
                }
                if target > rec.y0[0] {
                    // target at/above the step start (can only be ~R itself)
                    targets.pop();
                    continue;
                }
                let mut lo = rec.t0;
                let mut hi = rec.t1;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if rec.interpolate(mid)[0] > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 * (1.0 + hi.abs()) {
                        break;
                    }
                }
                let y = rec.interpolate(0.5 * (lo + hi));
                store(target, &y, &mut collected);
                targets.pop();
            }
            if rec.y1[0] <= r_stop {
                Control::Stop
            } else {
                Control::Continue
            }
        },
    );

    let (_, y_end) = result.map_err(|e| match e {
        Error::OdeStep { message, last } => Error::OdeStep {
            message: format!("cap profile integration failed: {message}"),
            last,
        },
        other => other,
    })?;

    // axis closure: v even in r, v(0) = v(r_e) - v'(r_e) r_e / 2 + O(r_e^4)
    let r_e = y_end[0];
    let (rho_e, _, _) = model.rho(r_e);
    let vp_e = math::sin(y_end[2]) / (rho_e * math::cos(y_end[2]));
    let v0 = y_end[1] - 0.5 * vp_e * r_e;
    let curv = vp_e / r_e;
    for &target in targets.iter().rev() {
        // remaining targets sit inside the axis closure region
        let v = v0 + 0.5 * curv * target * target;
        let v_prime = curv * target;
        let (rho_t, _, _) = model.rho(target);
        let phi = math::atan2(-v_prime, 1.0 / rho_t);
        collected.push(CapNode {
            r: target,
            v,
            v_prime,
            phi,
        });
    }

    collected.reverse();
    if collected.len() != resolution {
        return Err(Error::numeric(
            format!(
                "cap profile sampled {} of {resolution} nodes",
                collected.len()
            ),
            f64::NAN,
        ));
    }
    Ok(CapProfile {
        radius: big_r,
        mean_curvature: h_cap,
        nodes: collected,
    })
}

/// First-order quadrature route for the cap slope (cross-check of the
/// arclength system away from the vertical tangent):
///
/// `v_R'(r) = n H V / (ρ (A² − n² H² V²)^{1/2})`.
pub fn cap_slope_quadrature(model: &WarpedModel, big_r: f64, r: f64) -> Result<f64> {
    if !(r >= 0.0 && r <= big_r) {
        return Err(Error::domain(format!(
            "slope radius {r} outside [0, {big_r}]"
        )));
    }
    let (_, _, h_cap) = cap_data(model, big_r)?;
    let n = model.dimension() as f64;
    let area = model.sphere_weight(r);
    let volume = quad::integrate_default(|s| model.sphere_weight(s), 0.0, r)?;
    let (rho, _, _) = model.rho(r);
    let disc = area * area - n * n * h_cap * h_cap * volume * volume;
    if disc <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(n * h_cap * volume / (rho * math::sqrt(disc)))
}

/// Radius at which the expanding barrier stalls (`H(R*) = σ`), if any.
///
/// `H` increases with `R`; a stall exists when `σ` lies between `H(r0)` and
/// the large-radius limit of `H`.
pub fn stall_radius(model: &WarpedModel, r0: f64, sigma: f64) -> Result<Option<f64>> {
    if sigma >= 0.0 {
        return Ok(None);
    }
    let (_, _, h0) = cap_data(model, r0)?;
    if sigma <= h0 {
        return Err(Error::parameter(format!(
            "sigma {sigma} must exceed the cap curvature H(r0) = {h0}"
        )));
    }
    let mut lo = r0;
    let mut hi = r0;
    let mut found = false;
    let mut h_prev = h0;
    for _ in 0..80 {
        hi *= 2.0;
        // sphere weights can overflow the doubling scan long before the
        // curvature reaches sigma; treat that as "no stall"
        let h = match cap_data(model, hi) {
            Ok((_, _, h)) if h.is_finite() => h,
            _ => return Ok(None),
        };
        if h >= sigma {
            found = true;
            break;
        }
        if (h - h_prev).abs() < 1e-12 * (1.0 + h.abs()) {
            // curvature has plateaued below sigma
            return Ok(None);
        }
        h_prev = h;
        lo = hi;
    }
    if !found {
        return Ok(None);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (_, _, h) = cap_data(model, mid)?;
        if h < sigma {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-14 * hi {
            break;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Barrier radius `R(t)`: solution of `dR/dt = −n(H(R) − σ)`, `R(0) = r0`.
pub fn barrier_radius(model: &WarpedModel, r0: f64, sigma: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    let radii = barrier_radius_at(model, r0, sigma, &[t])?;
    Ok(radii[0])
}

/// Barrier radius sampled at several times in one integration pass.
/// `times` must be nondecreasing and nonnegative.
pub fn barrier_radius_at(
    model: &WarpedModel,
    r0: f64,
    sigma: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    if !(r0 > 0.0) {
        return Err(Error::domain(format!("r0 must be positive, got {r0}")));
    }
    let (_, v0, h0) = cap_data(model, r0)?;
    if !(sigma > h0) {
        return Err(Error::parameter(format!(
            "sigma {sigma} must exceed H(r0) = {h0}; a shrinking barrier is unsupported"
        )));
    }
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::parameter(
                "barrier sample times must be nondecreasing",
            ));
        }
    }
    if let Some(&first) = times.first() {
        if first < 0.0 {
            return Err(Error::domain("barrier sample times must be nonnegative"));
        }
    }

    let stall = stall_radius(model, r0, sigma)?;
    let n = model.dimension() as f64;
    // state [R, V]; V is carried as an extra ODE state so H(R) needs no
    // quadrature inside the right-hand side
    let rhs = |_: f64, y: &[f64; 2]| -> [f64; 2] {
        let speed = model.sphere_weight(y[0]) / y[1] + n * sigma;
        [speed, model.sphere_weight(y[0]) * speed]
    };

    let mut out = Vec::with_capacity(times.len());
    let mut idx = 0;
    while idx < times.len() && times[idx] == 0.0 {
        out.push(r0);
        idx += 1;
    }
    if idx == times.len() {
        return Ok(out);
    }
    let t_end = times[times.len() - 1];

    let mut t = 0.0;
    let mut y = [r0, v0];
    let mut k1 = rhs(t, &y);
    let mut h: f64 = 1e-6;
    let rtol = 1e-12;
    let atol = 1e-14;
    let mut steps = 0usize;
    while idx < times.len() {
        steps += 1;
        if steps > 5_000_000 {
            return Err(Error::OdeStep {
                message: "barrier radius step budget exceeded".into(),
                last: y[0],
            });
        }
        // cap the step near a stall radius so R never overshoots R*
        if let Some(rs) = stall {
            let gap = rs - y[0];
            if k1[0] > 0.0 {
                let h_cap = 0.5 * gap / k1[0];
                h = h.min(h_cap.max(1e-12));
            }
        }
        // land exactly on the next requested time (no interpolation error)
        let h_untrimmed = h;
        let mut trimmed = false;
        if t + h >= times[idx] {
            h = times[idx] - t;
            trimmed = true;
        }
        if h == 0.0 {
            // repeated sample time
            let mut r_i = y[0];
            if let Some(rs) = stall {
                r_i = r_i.min(rs);
            }
            out.push(r_i);
            idx += 1;
            h = 1e-6;
            continue;
        }
        let (y_new, err, k_new) = ode::dp45_step(&rhs, t, &y, &k1, h, rtol, atol);
        if err <= 1.0 && y_new[0].is_finite() {
            t += h;
            y = y_new;
            k1 = k_new;
            if trimmed {
                while idx < times.len() && times[idx] <= t {
                    let mut r_i = y[0];
                    if let Some(rs) = stall {
                        r_i = r_i.min(rs);
                    }
                    out.push(r_i);
                    idx += 1;
                }
            }
            let factor = if err > 0.0 {
                (0.9 * math::pow(err, -0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h = if trimmed { h_untrimmed } else { h * factor };
            if t >= t_end {
                break;
            }
        } else {
            h *= (0.9 * math::pow(err.max(1e-8), -0.2)).clamp(0.1, 0.9);
            if h < 1e-16 {
                return Err(Error::OdeStep {
                    message: "barrier radius step underflow".into(),
                    last: y[0],
                });
            }
        }
    }
    Ok(out)
}

/// The time-indexed barrier family `u₊(x, t) = v_{R(t)}(r(x))` over a fixed
/// domain ball of radius `r0`.
#[derive(Debug, Clone)]
pub struct BarrierFamily {
    pub r0: f64,
    pub sigma: f64,
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub caps: Vec<CapProfile>,
    pub stall_radius: Option<f64>,
}

impl BarrierFamily {
    /// Build the family at the given (nondecreasing) times.
    pub fn build(
        model: &WarpedModel,
        r0: f64,
        sigma: f64,
        times: &[f64],
        resolution: usize,
    ) -> Result<Self> {
        let radii = barrier_radius_at(model, r0, sigma, times)?;
        let stall = stall_radius(model, r0, sigma)?;
        let mut caps = Vec::with_capacity(radii.len());
        for &r in &radii {
            caps.push(cap_profile(model, r, resolution)?);
        }
        Ok(BarrierFamily {
            r0,
            sigma,
            times: times.to_vec(),
            radii,
            caps,
            stall_radius: stall,
        })
    }
}

/// Height-estimate envelope at radius `r ∈ [0, r0]` and horizon `T`:
///
/// `upper = sup u₀ + v_{R(T)}(o) − v_{r0}(r)`,
/// `lower = inf u₀ − v_{R(T)}(o) + v_{r0}(r)`.
pub fn barrier_envelope(
    model: &WarpedModel,
    r0: f64,
    sigma: f64,
    t_final: f64,
    u0_sup: f64,
    u0_inf: f64,
    r: f64,
) -> Result<(f64, f64)> {
    if !(r >= 0.0 && r <= r0) {
        return Err(Error::domain(format!(
            "envelope radius {r} outside [0, {r0}]"
        )));
    }
    let r_t = barrier_radius(model, r0, sigma, t_final)?;
    let cap_t = cap_profile(model, r_t, 1024)?;
    let cap_0 = cap_profile(model, r0, 1024)?;
    let bump = cap_t.height_at_origin() - cap_0.height(r);
    Ok((u0_inf - bump, u0_sup + bump))
}

/// Discrete supersolution residual `∂ₜu₊ + Q[u₊]` of a barrier family on a
/// radial grid.
///
/// Time derivatives are centered on the family's snapshot times; the field
/// is evaluated at interior nodes and at times `t_k`, `k ≥ 1` (at `t = 0`
/// the cap's vertical tangent sits exactly on the grid boundary). For
/// rotationally symmetric models the analytic residual vanishes, so the
/// discrete values are pure discretization error.
#[derive(Debug, Clone)]
pub struct ResidualField {
    /// Times at which the residual was formed (family times from index 1).
    pub times: Vec<f64>,
    /// `values[k][i]`: residual at time `times[k]`, interior node `i + 1`.
    pub values: Vec<Vec<f64>>,
    pub min_residual: f64,
    /// `(t, r)` pairs where the residual fell below `-tolerance`.
    pub violations: Vec<(f64, f64)>,
}

pub fn supersolution_residual(
    model: &WarpedModel,
    family: &BarrierFamily,
    grid: &RadialGrid,
    tolerance: f64,
) -> Result<ResidualField> {
    let k_max = family.times.len();
    if k_max < 3 {
        return Err(Error::parameter(
            "supersolution residual needs at least 3 family times",
        ));
    }
    if (grid.r0 - family.r0).abs() > 1e-12 {
        return Err(Error::parameter(format!(
            "grid radius {} must match family domain radius {}",
            grid.r0, family.r0
        )));
    }
    let fields: Vec<Vec<f64>> = family
        .caps
        .iter()
        .map(|cap| grid.nodes().map(|r| cap.height(r)).collect())
        .collect();

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut min_residual = f64::INFINITY;
    let mut violations = Vec::new();
    for k in 1..k_max {
        let q = flow::q_operator_values(model, grid, &fields[k], family.sigma);
        let (prev, next, dt) = if k + 1 < k_max {
            (
                &fields[k - 1],
                &fields[k + 1],
                family.times[k + 1] - family.times[k - 1],
            )
        } else {
            (
                &fields[k - 1],
                &fields[k],
                family.times[k] - family.times[k - 1],
            )
        };
        let mut row = Vec::with_capacity(grid.m - 2);
        for i in 1..grid.m - 1 {
            let dudt = (next[i] - prev[i]) / dt;
            let res = dudt + q[i];
            min_residual = min_residual.min(res);
            if res < -tolerance {
                violations.push((family.times[k], grid.radius(i)));
            }
            row.push(res);
        }
        times.push(family.times[k]);
        values.push(row);
    }
    Ok(ResidualField {
        times,
        values,
        min_residual,
        violations,
    })
}
