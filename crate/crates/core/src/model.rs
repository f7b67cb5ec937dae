//! Rotationally symmetric warped-product geometries `M ×_ρ ℝ` and the
//! standing curvature/warping condition checks.
//!
//! A model is the data `(n, ξ, ρ, L)`: the dimension of the base, the radial
//! profile of the model metric `dr² + ξ²(r) dϑ²`, the warping function
//! `ρ = |X|`, and a lower Ricci bound `L ≥ 0`. Built-ins cover Euclidean
//! space (`ξ = r`, `ρ = 1`), hyperbolic space as a warped product
//! (`ξ = sinh r`, `ρ = cosh r`) and the Riemannian product `ℍⁿ × ℝ`
//! (`ξ = sinh r`, `ρ = 1`).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::math;
use crate::quad;

/// Radial profile: value and first two derivatives at a radius.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `f(r) = r` (Euclidean `ξ`).
    Identity,
    /// `f(r) = sinh r` (hyperbolic `ξ`).
    Sinh,
    /// `f(r) = 1` (product warping).
    One,
    /// `f(r) = cosh r` (hyperbolic warping).
    Cosh,
    /// User expression over the small arithmetic grammar.
    Custom(Expr),
}

impl Profile {
    /// `(f, f', f'')` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        match self {
            Profile::Identity => (r, 1.0, 0.0),
            Profile::Sinh => {
                let s = math::sinh(r);
                (s, math::cosh(r), s)
            }
            Profile::One => (1.0, 0.0, 0.0),
            Profile::Cosh => {
                let c = math::cosh(r);
                (c, math::sinh(r), c)
            }
            Profile::Custom(e) => (e.eval(r), e.eval_d1(r), e.eval_d2(r)),
        }
    }
}

/// Conditions that [`WarpedModel::check_conditions`] can report against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Condition {
    /// `ξ(0) = 0`.
    XiVanishesAtPole,
    /// `ξ'(0) = 1` (checked by one-sided finite differences).
    XiSlopeOneAtPole,
    /// `ξ(r) > 0` for `r > 0`.
    XiPositive,
    /// `ρ(r) > 0`.
    RhoPositive,
    /// `|ρ'/ρ| ≤ ξ'/ξ`.
    WarpSlopeBound,
}

/// Outcome of the standing-condition scan.
#[derive(Debug, Clone)]
pub struct ModelReport {
    /// Sampled minimum of `ξ'/ξ − |ρ'/ρ|` over the radius grid.
    pub cond3_margin: f64,
    /// Sampled infimum of the admissibility threshold (see
    /// [`WarpedModel::sigma_supremum`]).
    pub sigma_sup: f64,
    /// Whether the threshold samples were still decreasing at `r_max`
    /// (if so, the true infimum may be smaller than `sigma_sup`).
    pub sigma_tail_decreasing: bool,
    /// `(radius, condition)` pairs where a condition failed.
    pub violations: Vec<(f64, Condition)>,
}

/// Result of the sampled σ-admissibility infimum.
#[derive(Debug, Clone, Copy)]
pub struct SigmaSupremum {
    /// Sampled infimum of `(1/n)(|ρ'|/ρ + (n−1) ξ'/ξ)` over `(0, r_max]`.
    pub value: f64,
    /// Radius at which the sampled minimum was attained.
    pub at_radius: f64,
    /// True when the sample sequence was still decreasing at `r_max`;
    /// the global infimum over all of `M` may then be smaller.
    pub tail_decreasing: bool,
}

/// A rotationally symmetric warped-product geometry.
///
/// Immutable after construction; all evaluations are pure. The radial
/// sectional curvature bound `K(∂_r ∧ v) ≥ −ξ''/ξ` holds with equality for
/// these models by construction, so it is documented rather than checked;
/// for custom profiles it is the caller's responsibility.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedModel {
    name: String,
    n: usize,
    xi: Profile,
    rho: Profile,
    ricci_lower_bound: f64,
}

impl WarpedModel {
    /// Euclidean space `ℝⁿ × ℝ`: `ξ = r`, `ρ = 1`, `L = 0`.
    pub fn euclidean(n: usize) -> Result<Self> {
        Self::from_parts("euclidean", n, Profile::Identity, Profile::One, 0.0)
    }

    /// Hyperbolic space `ℍ^{n+1} = ℍⁿ ×_ρ ℝ`: `ξ = sinh r`, `ρ = cosh r`,
    /// `L = n`.
    pub fn hyperbolic(n: usize) -> Result<Self> {
        Self::from_parts("hyperbolic", n, Profile::Sinh, Profile::Cosh, n as f64)
    }

    /// The Riemannian product `ℍⁿ × ℝ`: `ξ = sinh r`, `ρ = 1`, `L = n − 1`.
    pub fn hyperbolic_product(n: usize) -> Result<Self> {
        Self::from_parts(
            "hyperbolic-product",
            n,
            Profile::Sinh,
            Profile::One,
            (n - 1) as f64,
        )
    }

    /// Custom model from profile expressions. The Ricci lower bound is
    /// user-supplied; computing it symbolically is out of scope.
    pub fn custom(
        name: &str,
        n: usize,
        xi_expr: &str,
        rho_expr: &str,
        ricci_lower_bound: f64,
    ) -> Result<Self> {
        let xi = Profile::Custom(Expr::parse(xi_expr)?);
        let rho = Profile::Custom(Expr::parse(rho_expr)?);
        Self::from_parts(name, n, xi, rho, ricci_lower_bound)
    }

    /// Look up a built-in by its config name.
    pub fn builtin(name: &str, n: usize) -> Result<Self> {
        match name {
            "euclidean" => Self::euclidean(n),
            "hyperbolic" => Self::hyperbolic(n),
            "hyperbolic-product" => Self::hyperbolic_product(n),
            other => Err(Error::parameter(format!(
                "unknown built-in model '{other}' (expected euclidean | hyperbolic | hyperbolic-product | custom)"
            ))),
        }
    }

    fn from_parts(
        name: &str,
        n: usize,
        xi: Profile,
        rho: Profile,
        ricci_lower_bound: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::parameter(format!(
                "dimension n must be >= 2, got {n}"
            )));
        }
        if !(ricci_lower_bound >= 0.0) {
            return Err(Error::parameter(format!(
                "ricci lower bound L must be >= 0, got {ricci_lower_bound}"
            )));
        }
        let model = WarpedModel {
            name: String::from(name),
            n,
            xi,
            rho,
            ricci_lower_bound,
        };
        model.validate_pole()?;
        Ok(model)
    }

    /// `ξ(0) = 0` and `ξ'(0) = 1` (one-sided finite difference), `ρ(0) > 0`.
    fn validate_pole(&self) -> Result<()> {
        let (xi0, _, _) = self.xi.eval(0.0);
        if xi0.abs() > 1e-9 {
            return Err(Error::parameter(format!("xi(0) must vanish, got {xi0}")));
        }
        let h = 1e-6;
        let (xih, _, _) = self.xi.eval(h);
        let slope = (xih - xi0) / h;
        if (slope - 1.0).abs() > 1e-4 {
            return Err(Error::parameter(format!(
                "xi'(0) must equal 1, one-sided estimate {slope}"
            )));
        }
        let (rho0, _, _) = self.rho.eval(0.0);
        if !(rho0 > 0.0) {
            return Err(Error::parameter(format!(
                "rho(0) must be positive, got {rho0}"
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn ricci_lower_bound(&self) -> f64 {
        self.ricci_lower_bound
    }

    /// `(ξ, ξ', ξ'')` at `r ≥ 0` (unchecked).
    #[inline]
    pub fn xi(&self, r: f64) -> (f64, f64, f64) {
        self.xi.eval(r)
    }

    /// `(ρ, ρ', ρ'')` at `r ≥ 0` (unchecked).
    #[inline]
    pub fn rho(&self, r: f64) -> (f64, f64, f64) {
        self.rho.eval(r)
    }

    /// Area-like weight `A(r) = ρ(r) ξ(r)^{n-1}` of the geodesic sphere.
    #[inline]
    pub fn sphere_weight(&self, r: f64) -> f64 {
        let (xi, _, _) = self.xi.eval(r);
        let (rho, _, _) = self.rho.eval(r);
        rho * math::powi(xi, self.n as i32 - 1)
    }

    /// `(ξ, ξ', ρ, ρ', ρ'')` at `r ≥ 0`.
    pub fn evaluate_profiles(&self, r: f64) -> Result<(f64, f64, f64, f64, f64)> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!(
                "radius must be nonnegative, got {r}"
            )));
        }
        let (xi, dxi, _) = self.xi.eval(r);
        let (rho, drho, ddrho) = self.rho.eval(r);
        Ok((xi, dxi, rho, drho, ddrho))
    }

    /// `ζ̄(r) = ∫₀ʳ ξ`, the warped analogue of `r²/2`.
    pub fn zeta_bar(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!(
                "radius must be nonnegative, got {r}"
            )));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        quad::integrate_default(|s| self.xi.eval(s).0, 0.0, r)
    }

    /// Mean curvature of the Killing cylinder over the geodesic sphere of
    /// radius `r > 0`: `(1/n)((n−1) ξ'/ξ + ρ'/ρ)`.
    pub fn cylinder_mean_curvature(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain(format!(
                "cylinder degenerates at the pole; need r > 0, got {r}"
            )));
        }
        let (xi, dxi, _) = self.xi.eval(r);
        let (rho, drho, _) = self.rho.eval(r);
        Ok(((self.n as f64 - 1.0) * dxi / xi + drho / rho) / self.n as f64)
    }

    /// Sampled infimum over `(0, r_max]` of the σ-admissibility threshold
    /// `(1/n)(|ρ'|/ρ + (n−1) ξ'/ξ)`.
    ///
    /// The true threshold is an infimum over all of `M`; a sampler cannot
    /// certify that, so the result carries a tail flag instead.
    pub fn sigma_supremum(&self, r_max: f64, samples: usize) -> Result<SigmaSupremum> {
        if !(r_max > 0.0) {
            return Err(Error::domain(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        if samples < 2 {
            return Err(Error::parameter(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        let mut best = f64::INFINITY;
        let mut best_r = 0.0;
        let mut prev = f64::INFINITY;
        let mut tail_decreasing = false;
        for k in 1..=samples {
            let r = r_max * k as f64 / samples as f64;
            let value = self.sigma_threshold_at(r);
            if value < best {
                best = value;
                best_r = r;
            }
            if k == samples {
                tail_decreasing = value < prev;
            }
            prev = value;
        }
        Ok(SigmaSupremum {
            value: best,
            at_radius: best_r,
            tail_decreasing,
        })
    }

    #[inline]
    fn sigma_threshold_at(&self, r: f64) -> f64 {
        let (xi, dxi, _) = self.xi.eval(r);
        let (rho, drho, _) = self.rho.eval(r);
        (drho.abs() / rho + (self.n as f64 - 1.0) * dxi / xi) / self.n as f64
    }

    /// Scan the standing conditions on a uniform radius grid.
    ///
    /// Violations are data, not errors: custom profiles may fail the warp
    /// slope bound on part of the domain and the report says where.
    pub fn check_conditions(&self, r_max: f64, samples: usize) -> Result<ModelReport> {
        if !(r_max > 0.0) {
            return Err(Error::domain(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        let samples = samples.max(2);
        let mut violations = Vec::new();

        // cond-2 at the pole, one-sided differences
        let (xi0, _, _) = self.xi.eval(0.0);
        if xi0.abs() > 1e-9 {
            violations.push((0.0, Condition::XiVanishesAtPole));
        }
        let h = 1e-6;
        let slope = (self.xi.eval(h).0 - xi0) / h;
        if (slope - 1.0).abs() > 1e-4 {
            violations.push((0.0, Condition::XiSlopeOneAtPole));
        }

        let mut cond3_margin = f64::INFINITY;
        for k in 1..=samples {
            let r = r_max * k as f64 / samples as f64;
            let (xi, dxi, _) = self.xi.eval(r);
            let (rho, drho, _) = self.rho.eval(r);
            if !(xi > 0.0) {
                violations.push((r, Condition::XiPositive));
                continue;
            }
            if !(rho > 0.0) {
                violations.push((r, Condition::RhoPositive));
                continue;
            }
            let margin = dxi / xi - drho.abs() / rho;
            cond3_margin = cond3_margin.min(margin);
            if margin < -1e-12 {
                violations.push((r, Condition::WarpSlopeBound));
            }
        }

        let sigma = self.sigma_supremum(r_max, samples)?;
        Ok(ModelReport {
            cond3_margin,
            sigma_sup: sigma.value,
            sigma_tail_decreasing: sigma.tail_decreasing,
            violations,
        })
    }
}
