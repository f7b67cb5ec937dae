//! Adaptive Dormand–Prince 5(4) integration for the small ODE systems in
//! this crate (cap profile curves, barrier radius evolution).
//!
//! The driver exposes every accepted step through a callback carrying cubic
//! Hermite data, which is how callers implement dense output and event
//! location (target-radius crossings, stall capping) without the integrator
//! having to know about them.

use alloc::format;

use crate::error::{Error, Result};

/// Driver options. `rtol`/`atol` enter the weighted RMS error norm.
#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

/// One accepted step: endpoint states and derivatives, enough for a cubic
/// Hermite reconstruction anywhere inside `[t0, t1]`.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub f0: [f64; N],
    pub f1: [f64; N],
}

impl<const N: usize> StepRecord<N> {
    /// Cubic Hermite evaluation at `t ∈ [t0, t1]`.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] =
                h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i];
        }
        out
    }
}

/// What the per-step callback tells the driver to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    /// Stop after this step; `integrate` returns the state at `t1`.
    Stop,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
const E5: f64 = -2187.0 / 6784.0 + 92097.0 / 339200.0;
const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

#[inline]
fn axpyn<const N: usize>(y: &[f64; N], h: f64, coeffs: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in coeffs {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// One trial Dormand–Prince step from `(t, y)` with stepsize `h`.
///
/// Returns the 5th-order solution, the weighted error norm and the FSAL
/// derivative at the new point.
pub fn dp45_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
) -> ([f64; N], f64, [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t + C2 * h, &axpyn(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpyn(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(
        t + C4 * h,
        &axpyn(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]),
    );
    let k5 = f(
        t + C5 * h,
        &axpyn(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &axpyn(
            y,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    );
    let y5 = axpyn(
        y,
        h,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = f(t + h, &y5);

    let mut err_sq = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = atol + rtol * y[i].abs().max(y5[i].abs());
        let w = e / scale;
        err_sq += w * w;
    }
    let err = crate::math::sqrt(err_sq / N as f64);
    (y5, err, k7)
}

/// Adaptive integration of `y' = f(t, y)` from `t0` to `t_end`.
///
/// `on_step` sees every accepted step and may stop the run early. Returns
/// `(t, y)` at the stop point (or at `t_end`).
pub fn integrate<const N: usize, F, C>(
    f: F,
    t0: f64,
    t_end: f64,
    y0: [f64; N],
    opts: &Options,
    mut on_step: C,
) -> Result<(f64, [f64; N])>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    C: FnMut(&StepRecord<N>) -> Control,
{
    if t_end == t0 {
        return Ok((t0, y0));
    }
    let dir = if t_end > t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = opts.h_init.abs().min(opts.h_max).max(opts.h_min) * dir;

    for _ in 0..opts.max_steps {
        if (t_end - t) * dir <= 0.0 {
            return Ok((t, y));
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let (y_new, err, k_new) = dp45_step(&f, t, &y, &k1, h, opts.rtol, opts.atol);
        if err <= 1.0 {
            let record = StepRecord {
                t0: t,
                t1: t + h,
                y0: y,
                y1: y_new,
                f0: k1,
                f1: k_new,
            };
            t += h;
            y = y_new;
            k1 = k_new;
            let factor = if err > 0.0 {
                (0.9 * crate::math::pow(err, -0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h = (h * factor).abs().min(opts.h_max).max(opts.h_min) * dir;
            if on_step(&record) == Control::Stop {
                return Ok((t, y));
            }
        } else {
            let factor = (0.9 * crate::math::pow(err, -0.2)).clamp(0.1, 1.0);
            h *= factor;
            if h.abs() < opts.h_min {
                return Err(Error::OdeStep {
                    message: format!("step size underflow at t={t}"),
                    last: y[0],
                });
            }
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::OdeStep {
                message: format!("non-finite state at t={t}"),
                last: y[0],
            });
        }
    }
    Err(Error::OdeStep {
        message: format!("max step budget exceeded at t={t}"),
        last: y[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = Options {
            rtol: 1e-12,
            atol: 1e-14,
            ..Default::default()
        };
        let (_, y) = integrate(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            2.0,
            [1.0],
            &opts,
            |_| Control::Continue,
        )
        .unwrap();
        assert!((y[0] - math::exp(-2.0)).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let opts = Options {
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        };
        let tau = 2.0 * core::f64::consts::PI;
        let (_, y) = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            tau,
            [1.0, 0.0],
            &opts,
            |_| Control::Continue,
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
        assert!(y[1].abs() < 1e-9);
    }

    #[test]
    fn hermite_interpolant_is_accurate_inside_steps() {
        let opts = Options {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: 0.1,
            ..Default::default()
        };
        let mut worst: f64 = 0.0;
        integrate(
            |t, _: &[f64; 1]| [math::cos(t)],
            0.0,
            3.0,
            [0.0],
            &opts,
            |rec| {
                let tm = 0.5 * (rec.t0 + rec.t1);
                let v = rec.interpolate(tm)[0];
                worst = worst.max((v - math::sin(tm)).abs());
                Control::Continue
            },
        )
        .unwrap();
        // cubic Hermite carries an O(h^4/384) interpolation error
        assert!(worst < 1e-6, "hermite error {worst}");
    }
}
