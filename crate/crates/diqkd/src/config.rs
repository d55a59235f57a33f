//! Structured experiment configuration: a single TOML file with nested
//! sections, explicit units in key names, and strict schema validation
//! (unknown keys are rejected with position diagnostics).

use crate::error::{Error, Result};
use crate::finite_key::{FiniteKeyConfig, PenaltyModel};
use crate::npa::{EntropyOptions, SolverOptions};
use crate::optimize::OptimizeConfig;
use crate::photonic::{cross_visibility, visibility_from_dephasing, OverlapModel, PhysicalParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Top-level experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub physical: PhysicalConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub finite_key: FiniteKeyBlock,
    #[serde(default)]
    pub rate: RateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Source/detector hardware parameters. The photon-overlap model is given
/// either directly as visibilities or through the emitter line-shape rates;
/// exactly one of the two groups must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    /// Source-to-splitter arm efficiency.
    #[serde(default = "one")]
    pub eta_source: f64,
    /// Local detection efficiency (eta_l).
    #[serde(default = "one")]
    pub eta_local: f64,
    /// Channel efficiency towards the heralding station at the configured
    /// baseline (distance sweeps override it).
    #[serde(default = "one")]
    pub eta_channel: f64,
    /// Tap transmittance T towards the heralding station.
    #[serde(default = "default_tap")]
    pub tap_transmittance: f64,
    /// Central-splitter transmittance t.
    #[serde(default = "half")]
    pub splitter_transmittance: f64,
    /// Second-order autocorrelation at zero delay.
    #[serde(default)]
    pub g2: f64,
    /// Two-photon overlap visibility of a same-party pair.
    pub v_alpha: Option<f64>,
    /// Two-photon overlap visibility of a cross-party pair.
    pub v_beta: Option<f64>,
    /// Emitter decay rate, GHz.
    pub gamma_ghz: Option<f64>,
    /// Pure dephasing rate, GHz.
    pub gamma_dephasing_ghz: Option<f64>,
    /// Spectral wandering width, GHz.
    pub sigma_ghz: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_tap() -> f64 {
    1e-3
}

impl PhysicalConfig {
    pub fn to_params(&self) -> Result<PhysicalParams> {
        let (gamma, gamma_d, sigma) = match (self.gamma_ghz, self.gamma_dephasing_ghz, self.sigma_ghz) {
            (Some(g), gd, s) => (g, gd.unwrap_or(0.0), s.unwrap_or(0.0)),
            // visibility-specified configs keep a placeholder line shape
            (None, _, _) => (1.0, 0.0, 0.0),
        };
        let p = PhysicalParams {
            eta1: self.eta_source,
            eta2: self.eta_local,
            eta_t: self.eta_channel,
            big_t: self.tap_transmittance,
            small_t: self.splitter_transmittance,
            gamma,
            gamma_d,
            sigma,
            g2: self.g2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_overlaps(&self) -> Result<OverlapModel> {
        let direct = self.v_alpha.is_some() || self.v_beta.is_some();
        let rates = self.gamma_ghz.is_some();
        match (direct, rates) {
            (true, true) => Err(Error::Config(
                "give either v_alpha/v_beta or gamma_ghz/gamma_dephasing_ghz/sigma_ghz, not both"
                    .to_string(),
            )),
            (false, false) => Err(Error::Config(
                "physical block needs v_alpha/v_beta or the gamma/sigma line-shape rates"
                    .to_string(),
            )),
            (true, false) => {
                let (va, vb) = match (self.v_alpha, self.v_beta) {
                    (Some(a), Some(b)) => (a, b),
                    (Some(a), None) => (a, a),
                    (None, Some(_)) => {
                        return Err(Error::Config(
                            "v_beta given without v_alpha".to_string(),
                        ))
                    }
                    (None, None) => unreachable!(),
                };
                OverlapModel::from_visibilities(va, vb)
            }
            (false, true) => {
                let g = self.gamma_ghz.unwrap();
                let gd = self.gamma_dephasing_ghz.unwrap_or(0.0);
                let s = self.sigma_ghz.unwrap_or(0.0);
                let va = visibility_from_dephasing(g, gd)?;
                let vb = if s > 0.0 { cross_visibility(g, gd, s)? } else { va };
                OverlapModel::from_visibilities(va, vb)
            }
        }
    }
}

/// Preprocessing mode of the key map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QMode {
    /// No preprocessing (q = 0).
    #[default]
    None,
    /// Fixed flip probability from the `q` key.
    Fixed,
    /// q is a free optimization coordinate.
    Optimized,
}

/// Entropy-bound scenario: quadrature order and relaxation shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Gauss-Radau node count.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Include the extra third-order relaxation words.
    #[serde(default = "yes")]
    pub npa_extras: bool,
    /// Bob inputs whose joint statistics constrain the relaxation.
    #[serde(default = "default_y_set")]
    pub y_set: Vec<usize>,
    #[serde(default)]
    pub q_mode: QMode,
    /// Flip probability used when q_mode = "fixed".
    #[serde(default)]
    pub q: f64,
}

fn default_m() -> usize {
    8
}
fn yes() -> bool {
    true
}
fn default_y_set() -> Vec<usize> {
    vec![0, 1, 2]
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            m: default_m(),
            npa_extras: true,
            y_set: default_y_set(),
            q_mode: QMode::None,
            q: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn entropy_options(&self) -> EntropyOptions {
        EntropyOptions {
            m: self.m,
            q: if self.q_mode == QMode::Fixed { self.q } else { 0.0 },
            y_set: self.y_set.clone(),
            extras: self.npa_extras,
            ..EntropyOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config(format!("scenario.m = {} must be >= 2", self.m)));
        }
        if self.y_set.is_empty() || self.y_set.iter().any(|&y| y >= 3) {
            return Err(Error::Config("scenario.y_set must be a nonempty subset of {0,1,2}".into()));
        }
        if !(0.0..=0.5).contains(&self.q) {
            return Err(Error::Config(format!("scenario.q = {} outside [0,0.5]", self.q)));
        }
        Ok(())
    }
}

/// Optimizer budgets; see the optimize module for semantics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_stage1")]
    pub stage1_iterations: usize,
    #[serde(default = "default_stage2")]
    pub stage2_iterations: usize,
    #[serde(default = "default_m1")]
    pub m_stage1: usize,
    #[serde(default = "default_m")]
    pub m_stage2: usize,
    #[serde(default)]
    pub rng_seed: u64,
    /// Worker-pool size of sweep runs.
    #[serde(default = "default_pool")]
    pub pool: usize,
    #[serde(default = "default_attempts")]
    pub seed_attempts: usize,
    #[serde(default = "yes")]
    pub analytic_warm_start: bool,
    #[serde(default = "yes")]
    pub filter_nonpositive: bool,
    /// Jointly optimize the tap transmittance (log-scaled).
    #[serde(default)]
    pub optimize_tap: bool,
}

fn default_seeds() -> usize {
    200
}
fn default_stage1() -> usize {
    400
}
fn default_stage2() -> usize {
    200
}
fn default_m1() -> usize {
    2
}
fn default_pool() -> usize {
    1
}
fn default_attempts() -> usize {
    1000
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty optimizer block has defaults")
    }
}

impl OptimizerConfig {
    pub fn to_optimize_config(&self, scenario: &ScenarioConfig) -> OptimizeConfig {
        OptimizeConfig {
            seeds: self.seeds,
            stage1_iterations: self.stage1_iterations,
            stage2_iterations: self.stage2_iterations,
            m_stage1: self.m_stage1,
            m_stage2: self.m_stage2,
            optimize_q: scenario.q_mode == QMode::Optimized,
            optimize_big_t: self.optimize_tap,
            analytic_warm_start: self.analytic_warm_start,
            filter_nonpositive: self.filter_nonpositive,
            seed_attempts: self.seed_attempts,
            rng_seed: self.rng_seed,
            tolerance: 1e-6,
            solver: SolverOptions::default(),
        }
    }
}

/// Finite-key block; units are spelled in the key names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteKeyBlock {
    #[serde(default = "default_n")]
    pub n_rounds: f64,
    /// Additional round counts; each entry becomes its own labeled series in
    /// the distance curve. Defaults to just `n_rounds`.
    pub n_rounds_list: Option<Vec<f64>>,
    #[serde(default = "default_nu")]
    pub nu_hz: f64,
    #[serde(default = "default_eps_sound")]
    pub eps_sound: f64,
    #[serde(default = "default_eps_complete")]
    pub eps_complete: f64,
    #[serde(default = "default_l0")]
    pub l0_km: f64,
    /// Penalty-model constants; omitted values use the calibrated defaults.
    pub penalty_c1: Option<f64>,
    pub penalty_c2: Option<f64>,
    pub penalty_c3: Option<f64>,
    #[serde(default = "default_l_grid")]
    pub l_grid_km: Vec<f64>,
    /// Re-optimize the tap transmittance at every distance.
    #[serde(default = "yes")]
    pub optimize_tap: bool,
}

fn default_n() -> f64 {
    1e10
}
fn default_nu() -> f64 {
    7.5e7
}
fn default_eps_sound() -> f64 {
    1e-2
}
fn default_eps_complete() -> f64 {
    1e-6
}
fn default_l0() -> f64 {
    22.0
}
fn default_l_grid() -> Vec<f64> {
    (0..=15).map(|i| 20.0 * i as f64).collect()
}

impl Default for FiniteKeyBlock {
    fn default() -> Self {
        toml::from_str("").expect("empty finite-key block has defaults")
    }
}

impl FiniteKeyBlock {
    /// Round counts of the distance-curve series.
    pub fn series_rounds(&self) -> Vec<f64> {
        match &self.n_rounds_list {
            Some(list) if !list.is_empty() => list.clone(),
            _ => vec![self.n_rounds],
        }
    }

    pub fn to_finite_key_config(&self) -> FiniteKeyConfig {
        let defaults = PenaltyModel::default();
        FiniteKeyConfig {
            n: self.n_rounds,
            nu_hz: self.nu_hz,
            eps_sound: self.eps_sound,
            eps_complete: self.eps_complete,
            l0_km: self.l0_km,
            penalty: PenaltyModel {
                c1: self.penalty_c1.unwrap_or(defaults.c1),
                c2: self.penalty_c2.unwrap_or(defaults.c2),
                c3: self.penalty_c3.unwrap_or(defaults.c3),
            },
        }
    }
}

/// Rate-sweep block of the `rate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    /// "analytic", "analytic_preprocessing", or "sdp".
    #[serde(default = "default_method")]
    pub method: String,
    /// Local-efficiency grid of the sweep.
    #[serde(default = "default_eta_grid")]
    pub eta_local_grid: Vec<f64>,
}

fn default_method() -> String {
    "sdp".to_string()
}
fn default_eta_grid() -> Vec<f64> {
    vec![1.0]
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig { method: default_method(), eta_local_grid: default_eta_grid() }
    }
}

/// Output block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default = "yes")]
    pub write_plot_script: bool,
}

fn default_out_dir() -> String {
    "out".to_string()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { out_dir: default_out_dir(), write_plot_script: true }
    }
}

/// A parsed configuration together with its provenance hash.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// SHA-256 of the raw config bytes, hex-encoded.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn from_str_validated(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)?;
        let config = Self::from_str_validated(&text)?;
        let hash = hex(&Sha256::digest(text.as_bytes()));
        Ok(LoadedConfig { config, hash })
    }

    pub fn validate(&self) -> Result<()> {
        self.physical.to_params()?;
        self.physical.to_overlaps()?;
        self.scenario.validate()?;
        self.finite_key.to_finite_key_config().validate()?;
        match self.rate.method.as_str() {
            "analytic" | "analytic_preprocessing" | "sdp" => {}
            other => {
                return Err(Error::Config(format!(
                    "rate.method '{other}' not one of analytic|analytic_preprocessing|sdp"
                )))
            }
        }
        for &eta in &self.rate.eta_local_grid {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::Config(format!("rate.eta_local_grid value {eta} outside [0,1]")));
            }
        }
        if self.optimizer.pool == 0 {
            return Err(Error::Config("optimizer.pool must be >= 1".to_string()));
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
