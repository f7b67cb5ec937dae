//! Run configuration: JSON ingestion with strict schemas, defaults, and
//! validation that names the offending key path.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use kflow_core::flow::Scheme;
use kflow_core::WarpedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Cap,
    Flow,
    Verify,
    Exhaust,
    Convergence,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scenario::Cap => "cap",
            Scenario::Flow => "flow",
            Scenario::Verify => "verify",
            Scenario::Exhaust => "exhaust",
            Scenario::Convergence => "convergence",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub name: String,
    pub n: usize,
    pub xi_expr: Option<String>,
    pub rho_expr: Option<String>,
    pub ricci_lower_bound: Option<f64>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            name: "euclidean".into(),
            n: 2,
            xi_expr: None,
            rho_expr: None,
            ricci_lower_bound: None,
        }
    }
}

impl ModelBlock {
    pub fn build(&self) -> anyhow::Result<WarpedModel> {
        if self.name == "custom" {
            let xi = self
                .xi_expr
                .as_deref()
                .context("model.xi_expr required for custom models")?;
            let rho = self
                .rho_expr
                .as_deref()
                .context("model.rho_expr required for custom models")?;
            let ell = self
                .ricci_lower_bound
                .context("model.ricci_lower_bound required for custom models")?;
            return WarpedModel::custom("custom", self.n, xi, rho, ell)
                .map_err(|e| anyhow::anyhow!("model: {e}"));
        }
        if self.xi_expr.is_some() || self.rho_expr.is_some() {
            bail!("model.xi_expr/model.rho_expr are only accepted with model.name = \"custom\"");
        }
        WarpedModel::builtin(&self.name, self.n).map_err(|e| anyhow::anyhow!("model.name: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    pub r0: f64,
    pub m: usize,
    pub m_theta: Option<usize>,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            r0: 1.0,
            m: 129,
            m_theta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowBlock {
    pub sigma: f64,
    pub scheme: Scheme,
    pub cfl: f64,
    pub t_final: f64,
    pub snapshot_every: f64,
    pub newton_tol: f64,
    pub residual_tol: f64,
}

impl Default for FlowBlock {
    fn default() -> Self {
        FlowBlock {
            sigma: 0.0,
            scheme: Scheme::Explicit,
            cfl: 0.5,
            t_final: 0.25,
            snapshot_every: 0.05,
            newton_tol: 1e-10,
            residual_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierBlock {
    /// Domain ball of the barrier family (defaults to grid.r0 at run time).
    pub r0: Option<f64>,
    /// Barrier flow constant (defaults to flow.sigma).
    pub sigma: Option<f64>,
    /// Cap radius for the `cap` scenario.
    #[serde(rename = "R")]
    pub cap_radius: f64,
    /// Cap profile sample count.
    pub resolution: usize,
}

impl Default for BarrierBlock {
    fn default() -> Self {
        BarrierBlock {
            r0: None,
            sigma: None,
            cap_radius: 1.0,
            resolution: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    Seeded,
    Gaussian,
    Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialDataBlock {
    pub kind: InitialKind,
    pub amplitude: f64,
    /// Optional mollification width (kernel half-support, >= 2h) applied as
    /// a preprocessing pass; realizes Lipschitz-data approximation.
    pub mollify_width: Option<f64>,
}

impl Default for InitialDataBlock {
    fn default() -> Self {
        InitialDataBlock {
            kind: InitialKind::Seeded,
            amplitude: 0.25,
            mollify_width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExhaustBlock {
    pub radii: Vec<f64>,
    pub compact_radius: f64,
    /// Node count on the smallest ball; larger balls keep the same spacing.
    pub m_base: usize,
}

impl Default for ExhaustBlock {
    fn default() -> Self {
        ExhaustBlock {
            radii: vec![2.0, 4.0, 8.0],
            compact_radius: 1.0,
            m_base: 129,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceMetric {
    /// Sup deviation from stationary cap data over the run.
    CapStationarity,
    /// Sup error of the discrete mean curvature on cap data.
    Cmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceBlock {
    pub refinements: usize,
    pub metric: ConvergenceMetric,
    /// Coarsest node count; each refinement doubles the interval count.
    pub m_base: usize,
}

impl Default for ConvergenceBlock {
    fn default() -> Self {
        ConvergenceBlock {
            refinements: 3,
            metric: ConvergenceMetric::CapStationarity,
            m_base: 65,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: String,
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: "out".into(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

/// The complete run configuration; every field has a default and unknown
/// keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub flow: FlowBlock,
    pub barrier: BarrierBlock,
    pub initial_data: InitialDataBlock,
    pub exhaust: ExhaustBlock,
    pub convergence: ConvergenceBlock,
    pub output: OutputBlock,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::Flow,
            model: ModelBlock::default(),
            grid: GridBlock::default(),
            flow: FlowBlock::default(),
            barrier: BarrierBlock::default(),
            initial_data: InitialDataBlock::default(),
            exhaust: ExhaustBlock::default(),
            convergence: ConvergenceBlock::default(),
            output: OutputBlock::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn barrier_r0(&self) -> f64 {
        self.barrier.r0.unwrap_or(self.grid.r0)
    }

    pub fn barrier_sigma(&self) -> f64 {
        self.barrier.sigma.unwrap_or(self.flow.sigma)
    }
}

/// Parse and validate a JSON config. Returns the validated config plus any
/// non-fatal warnings (σ-admissibility in particular).
pub fn parse_config(text: &str) -> anyhow::Result<(RunConfig, Vec<String>)> {
    let config: RunConfig = serde_json::from_str(text).context("config parse")?;
    let mut warnings = Vec::new();

    if !(config.grid.r0 > 0.0) {
        bail!("grid.r0 must be positive, got {}", config.grid.r0);
    }
    if config.grid.m < 16 {
        bail!("grid.m must be at least 16, got {}", config.grid.m);
    }
    if let Some(mt) = config.grid.m_theta {
        if mt < 8 || mt % 2 != 0 {
            bail!("grid.m_theta must be even and at least 8, got {mt}");
        }
        if config.model.n != 2 {
            bail!(
                "grid.m_theta (polar mode) requires model.n = 2, got {}",
                config.model.n
            );
        }
    }
    if !(config.flow.cfl > 0.0 && config.flow.cfl <= 1.0) {
        bail!("flow.cfl must lie in (0, 1], got {}", config.flow.cfl);
    }
    if !(config.flow.t_final >= 0.0) {
        bail!(
            "flow.t_final must be nonnegative, got {}",
            config.flow.t_final
        );
    }
    if !(config.flow.snapshot_every > 0.0) {
        bail!(
            "flow.snapshot_every must be positive, got {}",
            config.flow.snapshot_every
        );
    }
    if !(config.barrier.cap_radius > 0.0) {
        bail!(
            "barrier.R must be positive, got {}",
            config.barrier.cap_radius
        );
    }
    if config.barrier.resolution < 16 {
        bail!(
            "barrier.resolution must be at least 16, got {}",
            config.barrier.resolution
        );
    }
    if !(config.initial_data.amplitude >= 0.0) {
        bail!(
            "initial_data.amplitude must be nonnegative, got {}",
            config.initial_data.amplitude
        );
    }
    if config.scenario == Scenario::Exhaust {
        if config.exhaust.radii.is_empty() {
            bail!("exhaust.radii must not be empty");
        }
        if !config.exhaust.radii.windows(2).all(|w| w[1] > w[0]) {
            bail!("exhaust.radii must be strictly increasing");
        }
        if !(config.exhaust.compact_radius < config.exhaust.radii[0]) {
            bail!(
                "exhaust.compact_radius {} must be below the smallest radius {}",
                config.exhaust.compact_radius,
                config.exhaust.radii[0]
            );
        }
    }
    if config.scenario == Scenario::Convergence && config.convergence.refinements < 3 {
        bail!(
            "convergence.refinements must be at least 3, got {}",
            config.convergence.refinements
        );
    }

    // σ-admissibility: sampled threshold on the run ball and on an extended
    // ball; the theorem needs σ strictly below the global infimum, which a
    // sampler can only approach from above
    let model = config.model.build()?;
    let sigma = config.flow.sigma;
    let run_ball = model
        .sigma_supremum(config.grid.r0, 512)
        .map_err(|e| anyhow::anyhow!("sigma threshold: {e}"))?;
    let far = (4.0 * config.grid.r0).max(16.0);
    let extended = model
        .sigma_supremum(far, 2048)
        .map_err(|e| anyhow::anyhow!("sigma threshold: {e}"))?;
    let threshold = run_ball.value.min(extended.value);
    if sigma >= threshold {
        warnings.push(format!(
            "outside-theorem sigma: sigma = {sigma} >= sampled admissibility threshold {threshold:.6} \
             (run ball {:.6}, extended ball {:.6}{}); the solver will run anyway",
            run_ball.value,
            extended.value,
            if extended.tail_decreasing { ", still decreasing at r_max" } else { "" }
        ));
    }

    Ok((config, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let (cfg, warnings) = parse_config(
            r#"{"scenario": "cap", "model": {"name": "euclidean"}, "barrier": {"R": 1.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::Cap);
        assert_eq!(cfg.grid.m, 129);
        assert_eq!(cfg.barrier.cap_radius, 1.0);
        assert!(warnings.is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(r#"{"scenario": "cap", "frobnicate": 1}"#).unwrap_err();
        assert!(format!("{err:#}").contains("frobnicate"), "{err:#}");
    }

    #[test]
    fn negative_radius_names_the_key() {
        let err = parse_config(r#"{"scenario": "flow", "grid": {"r0": -1.0}}"#).unwrap_err();
        assert!(format!("{err:#}").contains("grid.r0"), "{err:#}");
    }

    #[test]
    fn large_sigma_warns_outside_theorem() {
        let (_, warnings) =
            parse_config(r#"{"scenario": "flow", "flow": {"sigma": 0.5}}"#).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("outside-theorem"), "{}", warnings[0]);
    }

    #[test]
    fn admissible_sigma_is_quiet() {
        let (_, warnings) =
            parse_config(r#"{"scenario": "flow", "flow": {"sigma": -0.1}}"#).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
    }

    #[test]
    fn config_round_trips_through_echo() {
        let (cfg, _) = parse_config(
            r#"{"scenario": "flow", "flow": {"sigma": -0.25, "t_final": 0.5}, "seed": 9}"#,
        )
        .unwrap();
        let echo = serde_json::to_string_pretty(&cfg).unwrap();
        let (back, _) = parse_config(&echo).unwrap();
        assert_eq!(cfg, back);
    }
}
