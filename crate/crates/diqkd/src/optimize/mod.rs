//! Key-rate maximization over experimental settings: nonlocal seed
//! sampling, two-stage Nelder-Mead refinement, and the sweep driver.

mod driver;
mod nelder_mead;
mod seed;

pub use driver::{optimize_rate, sweep, OptimizationResult, StageRecord, SweepRow};
pub use nelder_mead::{nelder_mead, NelderMeadResult};
pub use seed::sample_nonlocal_seed;

use crate::analysis::chsh_score;
use crate::entropy::{
    chsh_preprocessing_rate, conditional_entropy_ab, RateMethod, RatePoint,
};
use crate::error::{Error, Result};
use crate::npa::{entropy_bound, EntropyOptions, SolverOptions};
use crate::photonic::{behavior, Behavior, MeasurementSettings, OverlapModel, PhysicalParams};

/// Bob input used for key generation (reconciliation against Alice's x = 0).
pub const Y_KEY: usize = 2;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
/// Central-splitter transmittance is kept strictly inside (0,1): at the
/// endpoints no entanglement is heralded and the behavior is undefined.
const SMALL_T_LO: f64 = 1e-3;
const SMALL_T_HI: f64 = 1.0 - 1e-3;
/// Log-parameterized tap-transmittance range for the finite-key mode.
const BIG_T_LO: f64 = 1e-4;
const BIG_T_HI: f64 = 0.5;

/// One candidate configuration of the experiment: central-splitter
/// transmittance, analyzer angles, preprocessing probability, and
/// optionally the tap transmittance when it is jointly optimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingsVector {
    pub small_t: f64,
    pub theta_a: [f64; 2],
    pub theta_b: [f64; 3],
    pub q: f64,
    pub big_t: Option<f64>,
}

impl SettingsVector {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.small_t) {
            return Err(Error::domain(format!("smallT = {} outside [0,1]", self.small_t)));
        }
        if !(0.0..=0.5).contains(&self.q) {
            return Err(Error::domain(format!("q = {} outside [0,0.5]", self.q)));
        }
        for v in self.theta_a.iter().chain(self.theta_b.iter()) {
            if !(0.0..TWO_PI).contains(v) {
                return Err(Error::domain(format!("angle {v} outside [0,2pi)")));
            }
        }
        if let Some(t) = self.big_t {
            if !(0.0 < t && t < 1.0) {
                return Err(Error::domain(format!("bigT = {t} outside (0,1)")));
            }
        }
        Ok(())
    }

    pub fn measurement_settings(&self) -> Result<MeasurementSettings> {
        MeasurementSettings::new(self.theta_a, self.theta_b)
    }

    /// Physical parameters with this vector's transmittances applied.
    pub fn apply(&self, base: &PhysicalParams) -> PhysicalParams {
        let mut p = base.clone();
        p.small_t = self.small_t;
        if let Some(t) = self.big_t {
            p.big_t = t;
        }
        p
    }

    /// Flatten into optimizer coordinates. Layout: smallT, thetaA[0..2],
    /// thetaB[0..3], then q when optimized, then ln(bigT) when optimized.
    pub fn to_coords(&self, optimize_q: bool) -> Vec<f64> {
        let mut v = vec![
            self.small_t,
            self.theta_a[0],
            self.theta_a[1],
            self.theta_b[0],
            self.theta_b[1],
            self.theta_b[2],
        ];
        if optimize_q {
            v.push(self.q);
        }
        if let Some(t) = self.big_t {
            v.push(t.ln());
        }
        v
    }

    pub fn from_coords(coords: &[f64], optimize_q: bool, optimize_big_t: bool) -> Self {
        let mut idx = 6;
        let q = if optimize_q {
            idx += 1;
            coords[idx - 1]
        } else {
            0.0
        };
        let big_t = if optimize_big_t {
            idx += 1;
            Some(coords[idx - 1].exp())
        } else {
            None
        };
        debug_assert_eq!(idx, coords.len());
        SettingsVector {
            small_t: coords[0],
            theta_a: [coords[1], coords[2]],
            theta_b: [coords[3], coords[4], coords[5]],
            q,
            big_t,
        }
    }

    /// Box bounds matching `to_coords`' layout.
    pub fn bounds(optimize_q: bool, optimize_big_t: bool) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![SMALL_T_LO, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut hi = vec![SMALL_T_HI, TWO_PI, TWO_PI, TWO_PI, TWO_PI, TWO_PI];
        if optimize_q {
            lo.push(0.0);
            hi.push(0.5);
        }
        if optimize_big_t {
            lo.push(BIG_T_LO.ln());
            hi.push(BIG_T_HI.ln());
        }
        (lo, hi)
    }
}

/// Budgets and switches of the two-stage optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    /// Number of random nonlocal starting points.
    pub seeds: usize,
    /// Nelder-Mead iteration budget of the coarse (stage-1) refinement.
    pub stage1_iterations: usize,
    /// Nelder-Mead iteration budget of the fine (stage-2) refinement.
    pub stage2_iterations: usize,
    /// Quadrature order of the stage-1 entropy bound.
    pub m_stage1: usize,
    /// Quadrature order of the stage-2 entropy bound.
    pub m_stage2: usize,
    /// Whether the preprocessing probability q is a free coordinate.
    pub optimize_q: bool,
    /// Whether the tap transmittance is a free (log-scaled) coordinate.
    pub optimize_big_t: bool,
    /// Polish each seed against the closed-form CHSH rate before paying for
    /// SDP evaluations (budget shared with stage 1's iteration count).
    pub analytic_warm_start: bool,
    /// Discard seeds whose coarse-stage rate is nonpositive. Near the
    /// positivity threshold the coarse bound crosses zero slightly later
    /// than the fine bound, so threshold-location runs switch this off to
    /// keep pricing the best candidate at the fine order.
    pub filter_nonpositive: bool,
    /// Attempt budget of the nonlocal seed sampler, per seed.
    pub seed_attempts: usize,
    /// Base RNG seed; every random draw derives from it deterministically.
    pub rng_seed: u64,
    /// Simplex convergence tolerance.
    pub tolerance: f64,
    pub solver: SolverOptions,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            seeds: 200,
            stage1_iterations: 400,
            stage2_iterations: 200,
            m_stage1: 2,
            m_stage2: 8,
            optimize_q: false,
            optimize_big_t: false,
            analytic_warm_start: true,
            filter_nonpositive: true,
            seed_attempts: 1000,
            rng_seed: 0,
            tolerance: 1e-6,
            solver: SolverOptions::default(),
        }
    }
}

/// Behavior of the configuration described by `sv` on top of `base`.
pub fn settings_behavior(
    base: &PhysicalParams,
    overlaps: &OverlapModel,
    sv: &SettingsVector,
) -> Result<Behavior> {
    let params = sv.apply(base);
    params.validate()?;
    behavior(&params, overlaps, &sv.measurement_settings()?)
}

/// Closed-form CHSH rate of the configuration (with preprocessing), used
/// for cheap seed polishing and for the analytic sweep mode.
pub fn analytic_rate_at(
    base: &PhysicalParams,
    overlaps: &OverlapModel,
    sv: &SettingsVector,
) -> Result<RatePoint> {
    let b = settings_behavior(base, overlaps, sv)?;
    let s = chsh_score(&b, (0, 1, 0, 1))?.score.abs();
    let h_ab = conditional_entropy_ab(&b, 0, Y_KEY, sv.q)?;
    let h_ae_minus_hab = if s <= 2.0 {
        // no violation: the bound carries no key
        -h_ab
    } else {
        chsh_preprocessing_rate(s.min(2.0 * std::f64::consts::SQRT_2), h_ab, sv.q)?
    };
    let method = if sv.q > 0.0 {
        RateMethod::AnalyticPreprocessing
    } else {
        RateMethod::Analytic
    };
    Ok(RatePoint::new(
        h_ae_minus_hab + h_ab,
        h_ab,
        method,
        sv.small_t,
        sv.measurement_settings()?,
        sv.q,
    ))
}

/// SDP-certified rate of the configuration at quadrature order `m`.
pub fn sdp_rate_at(
    base: &PhysicalParams,
    overlaps: &OverlapModel,
    sv: &SettingsVector,
    m: usize,
    solver: &SolverOptions,
) -> Result<RatePoint> {
    let b = settings_behavior(base, overlaps, sv)?;
    let h_ab = conditional_entropy_ab(&b, 0, Y_KEY, sv.q)?;
    let opts = EntropyOptions {
        m,
        q: sv.q,
        solver: solver.clone(),
        ..EntropyOptions::default()
    };
    let h_ae = entropy_bound(&b, &opts)?;
    Ok(RatePoint::new(h_ae, h_ab, RateMethod::Sdp, sv.small_t, sv.measurement_settings()?, sv.q))
}
