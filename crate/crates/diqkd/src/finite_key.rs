//! Finite-round key lengths and bits-per-second versus distance.
//!
//! The entropy accumulation bound certifies `nSucc * hBound - sqrt(nSucc) *
//! k` bits of randomness over `nSucc` heralded rounds; subtracting the
//! reconciliation cost and a constant completeness overhead yields the key
//! length. The second-order penalty constants are not published alongside
//! the protocol, so they live in an explicit, pluggable penalty model whose
//! defaults are calibrated to the protocol's stated "no key below 1e7
//! rounds" boundary (see `PenaltyModel`).

use crate::entropy::golden_section_max;
use crate::error::{Error, Result};
use crate::optimize::{analytic_rate_at, sdp_rate_at, SettingsVector};
use crate::photonic::{transmission_efficiency, OverlapModel, PhysicalParams};
use crate::npa::SolverOptions;

/// Second-order penalty of the entropy accumulation bound:
/// k = c1 * sqrt(log2(1/epsSound)) + c2 per sqrt-round, and a constant
/// overhead delta = c3 * log2(1/epsComplete).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyModel {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl PenaltyModel {
    pub fn k(&self, eps_sound: f64) -> f64 {
        self.c1 * (1.0 / eps_sound).log2().sqrt() + self.c2
    }

    pub fn delta(&self, eps_complete: f64) -> f64 {
        self.c3 * (1.0 / eps_complete).log2()
    }
}

impl Default for PenaltyModel {
    /// Calibrated against the ideal reference parameter set of the distance
    /// analysis (the binding one; the realistic set produces orders of
    /// magnitude less key material per attempt and is keyless at these
    /// scales regardless): with the deterministically optimized settings at
    /// L = 0 and tap T = 0.0622, the key length crosses zero at n = 1e7
    /// emission attempts, so no key is extractable for n <= 1e7 at either
    /// reference set.
    fn default() -> Self {
        PenaltyModel { c1: CALIBRATED_C1, c2: 0.0, c3: CALIBRATED_C3 }
    }
}

// Calibration constants; see PenaltyModel::default. Derived from the
// measured ideal-set components hBound = 0.999987817, hAB = 0.0 and
// P_h = 1.701262113e-3 via c1 = (nS*rate - delta) / (sqrt(nS) *
// sqrt(log2(1/epsSound))) at n = 1e7, rounded up in the sixth decimal so
// the clamped key length is exactly zero at the boundary.
pub(crate) const CALIBRATED_C1: f64 = 50.543010;
pub(crate) const CALIBRATED_C3: f64 = 1.0;

/// Finite-statistics protocol configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteKeyConfig {
    /// Protocol rounds, counted as source emission attempts.
    pub n: f64,
    /// Source repetition rate in Hz.
    pub nu_hz: f64,
    /// Soundness parameter of the protocol.
    pub eps_sound: f64,
    /// Completeness parameter of the protocol.
    pub eps_complete: f64,
    /// Fiber attenuation length in km.
    pub l0_km: f64,
    pub penalty: PenaltyModel,
}

impl Default for FiniteKeyConfig {
    fn default() -> Self {
        FiniteKeyConfig {
            n: 1e10,
            nu_hz: 7.5e7,
            eps_sound: 1e-2,
            eps_complete: 1e-6,
            l0_km: 22.0,
            penalty: PenaltyModel::default(),
        }
    }
}

impl FiniteKeyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return Err(Error::domain(format!("rounds n = {} must be >= 1", self.n)));
        }
        if !(self.nu_hz > 0.0) || !self.nu_hz.is_finite() {
            return Err(Error::domain(format!("repetition rate = {} must be > 0", self.nu_hz)));
        }
        for (name, v) in [("epsSound", self.eps_sound), ("epsComplete", self.eps_complete)] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::domain(format!("{name} = {v} outside (0,1)")));
            }
        }
        if !(self.l0_km > 0.0) {
            return Err(Error::domain(format!("L0 = {} must be > 0", self.l0_km)));
        }
        Ok(())
    }
}

/// How the single-round entropy bound is obtained for finite-key rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HBoundMode {
    /// Closed-form CHSH bound (with the configured preprocessing), fast.
    Analytic,
    /// Certified SDP bound at the given quadrature order.
    Sdp { m: usize },
}

/// Extractable key length (bits) from `n_succ` heralded rounds.
///
/// l = max(0, nSucc*hBound - sqrt(nSucc)*k - nSucc*hAB - delta).
pub fn eat_key_length(h_bound: f64, h_ab: f64, n_succ: f64, cfg: &FiniteKeyConfig) -> Result<f64> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&h_bound) {
        return Err(Error::domain(format!("hBound = {h_bound} outside [0,1]")));
    }
    if !(n_succ >= 0.0) || !n_succ.is_finite() {
        return Err(Error::domain(format!("nSucc = {n_succ} must be >= 0")));
    }
    if !(h_ab >= 0.0) {
        return Err(Error::domain(format!("hAB = {h_ab} must be >= 0")));
    }
    let k = cfg.penalty.k(cfg.eps_sound);
    let delta = cfg.penalty.delta(cfg.eps_complete);
    Ok((n_succ * h_bound - n_succ.sqrt() * k - n_succ * h_ab - delta).max(0.0))
}

/// One finite-key evaluation at a distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSecond {
    pub l_km: f64,
    pub big_t: f64,
    pub p_herald: f64,
    /// Heralded rounds nSucc = n * P_h.
    pub n_succ: f64,
    /// Asymptotic per-heralding rate hBound - hAB at this configuration.
    pub asymptotic_rate: f64,
    /// Key length in bits.
    pub key_length: f64,
    pub bits_per_second: f64,
}

fn rate_components(
    params: &PhysicalParams,
    overlaps: &OverlapModel,
    sv: &SettingsVector,
    mode: HBoundMode,
    solver: &SolverOptions,
) -> Result<(f64, f64, f64)> {
    let point = match mode {
        HBoundMode::Analytic => analytic_rate_at(params, overlaps, sv)?,
        HBoundMode::Sdp { m } => sdp_rate_at(params, overlaps, sv, m, solver)?,
    };
    let b = crate::optimize::settings_behavior(params, overlaps, sv)?;
    Ok((point.h_ae, point.h_ab, b.p_herald))
}

/// Bits per second of secret key at distance `l_km`, with the heralding
/// station halfway between the parties.
pub fn rate_per_second(
    params: &PhysicalParams,
    overlaps: &OverlapModel,
    sv: &SettingsVector,
    l_km: f64,
    cfg: &FiniteKeyConfig,
    mode: HBoundMode,
    solver: &SolverOptions,
) -> Result<RateSecond> {
    cfg.validate()?;
    let mut p = params.clone();
    p.eta_t = transmission_efficiency(l_km, cfg.l0_km)?;
    let (h_bound, h_ab, p_herald) = rate_components(&p, overlaps, sv, mode, solver)?;
    let n_succ = cfg.n * p_herald;
    let key_length = eat_key_length(h_bound.clamp(0.0, 1.0), h_ab, n_succ, cfg)?;
    Ok(RateSecond {
        l_km,
        big_t: sv.big_t.unwrap_or(params.big_t),
        p_herald,
        n_succ,
        asymptotic_rate: h_bound - h_ab,
        key_length,
        bits_per_second: key_length / (cfg.n / cfg.nu_hz),
    })
}

/// One row of a rate-versus-distance curve; failed rows carry diagnostics
/// instead of aborting the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub l_km: f64,
    pub result: std::result::Result<RateSecond, String>,
}

/// Rate-versus-distance table.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCurve {
    pub rows: Vec<DistanceRow>,
    pub n: f64,
    pub nu_hz: f64,
}

/// Search range of the tap transmittance, spanning the orders of magnitude
/// the optimum covers across parameter sets.
const BIG_T_SEARCH: (f64, f64) = (1e-4, 0.5);

/// Tap transmittance maximizing bits/s at one distance, by golden-section
/// search over ln T. The entropy bound is evaluated in the requested mode.
pub fn optimal_big_t(
    params: &PhysicalParams,
    overlaps: &OverlapModel,
    sv: &SettingsVector,
    l_km: f64,
    cfg: &FiniteKeyConfig,
    mode: HBoundMode,
    solver: &SolverOptions,
) -> Result<(f64, RateSecond)> {
    let (lo, hi) = BIG_T_SEARCH;
    let (ln_t, _) = golden_section_max(
        |ln_t| {
            let sv_t = SettingsVector { big_t: Some(ln_t.exp()), ..*sv };
            Ok(rate_per_second(params, overlaps, &sv_t, l_km, cfg, mode, solver)?
                .bits_per_second)
        },
        lo.ln(),
        hi.ln(),
        1e-4,
    )?;
    let best_t = ln_t.exp();
    let sv_t = SettingsVector { big_t: Some(best_t), ..*sv };
    let rate = rate_per_second(params, overlaps, &sv_t, l_km, cfg, mode, solver)?;
    Ok((best_t, rate))
}

/// Rate-versus-distance curve over `l_grid_km`, optionally re-optimizing
/// the tap transmittance at every distance. Deterministic.
pub fn distance_curve(
    params: &PhysicalParams,
    overlaps: &OverlapModel,
    sv: &SettingsVector,
    cfg: &FiniteKeyConfig,
    l_grid_km: &[f64],
    optimize_big_t: bool,
    mode: HBoundMode,
    solver: &SolverOptions,
) -> DistanceCurve {
    let rows = l_grid_km
        .iter()
        .map(|&l_km| {
            let result = if optimize_big_t {
                optimal_big_t(params, overlaps, sv, l_km, cfg, mode, solver).map(|(_, r)| r)
            } else {
                rate_per_second(params, overlaps, sv, l_km, cfg, mode, solver)
            };
            DistanceRow { l_km, result: result.map_err(|e| e.to_string()) }
        })
        .collect();
    DistanceCurve { rows, n: cfg.n, nu_hz: cfg.nu_hz }
}
