//! Linear-optical model of the heralded single-photon-source setup.
//!
//! Maps source, channel and detector parameters plus measurement angles to
//! the heralded conditional behavior p(a,b|x,y) and the heralding
//! probability, by dense enumeration of photon routes (central-station /
//! locally retained / lost) in complex double precision. Partial
//! distinguishability enters through a Gram matrix of internal-state
//! overlaps.

mod enumerate;
mod moments;
mod visibility;

pub use enumerate::{enumerate_events, heralding_probability, EventClass, EventLabel, EventTable};
pub use moments::{chs_moments, chs_moments_enumerated, MomentLabel};
pub use visibility::{cross_visibility, g2_to_p2, transmission_efficiency, visibility_from_dephasing};

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Source/channel/detector parameters of one experimental configuration.
///
/// Efficiencies and transmittances are dimensionless in [0,1]; `gamma`,
/// `gamma_d` and `sigma` are rates (1/time); `g2` is the zero-delay
/// second-order autocorrelation of the sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Efficiency of the source-to-splitter arm.
    pub eta1: f64,
    /// Efficiency of the final local detection arm.
    pub eta2: f64,
    /// Channel transmission towards the central heralding station.
    pub eta_t: f64,
    /// Transmittance of the local tap beam splitter (T).
    pub big_t: f64,
    /// Transmittance of the central-station beam splitter (t).
    pub small_t: f64,
    /// Spontaneous decay rate of the emitter.
    pub gamma: f64,
    /// Pure dephasing rate.
    pub gamma_d: f64,
    /// Spectral wandering width.
    pub sigma: f64,
    /// Second-order autocorrelation g2(0).
    pub g2: f64,
}

impl PhysicalParams {
    /// Ideal sources and detectors: unit efficiencies, no dephasing, pure
    /// single-photon emission, balanced central beam splitter.
    pub fn ideal() -> Self {
        PhysicalParams {
            eta1: 1.0,
            eta2: 1.0,
            eta_t: 1.0,
            big_t: 1e-3,
            small_t: 0.5,
            gamma: 1.0,
            gamma_d: 0.0,
            sigma: 0.0,
            g2: 0.0,
        }
    }

    /// Combined local efficiency eta1 * eta2.
    pub fn eta_l(&self) -> f64 {
        self.eta1 * self.eta2
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("eta_t", self.eta_t),
            ("big_t", self.big_t),
            ("small_t", self.small_t),
        ];
        for (name, v) in unit {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} = {v} outside [0,1]")));
            }
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::domain(format!("gamma = {} must be > 0", self.gamma)));
        }
        for (name, v) in [("gamma_d", self.gamma_d), ("sigma", self.sigma), ("g2", self.g2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!("{name} = {v} must be >= 0")));
            }
        }
        if self.g2 > 0.5 {
            return Err(Error::domain(format!("g2 = {} outside [0, 0.5]", self.g2)));
        }
        Ok(())
    }

    /// Two-photon emission probability per source, to first order in P2.
    pub fn p2(&self) -> f64 {
        // P1 ~ 1 at the level of the first-order expansion used throughout.
        g2_to_p2(self.g2, 1.0).expect("validated params give a valid g2")
    }
}

/// Pairwise internal-state overlaps of the interfering photons.
///
/// Photons 0,1 belong to Alice, 2,3 to Bob; an optional fifth photon models
/// the second emission of an impure source and is completely distinguishable
/// from the other four.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapModel {
    /// Same-station squared overlap |alpha_ij|^2.
    pub v_alpha: f64,
    /// Cross-station squared overlap |beta_ij|^2.
    pub v_beta: f64,
    /// 5x5 Gram matrix of internal-state overlaps (row/col 4 is the extra
    /// photon slot, all-zero off-diagonal).
    gram: DMatrix<f64>,
}

impl OverlapModel {
    /// Build the default overlap model: alpha = sqrt(v_alpha) on the two
    /// same-station pairs, beta = sqrt(v_beta) on the four cross pairs, and
    /// zero overlap for the extra photon.
    pub fn from_visibilities(v_alpha: f64, v_beta: f64) -> Result<Self> {
        for (name, v) in [("v_alpha", v_alpha), ("v_beta", v_beta)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} = {v} outside [0,1]")));
            }
        }
        let a = v_alpha.sqrt();
        let b = v_beta.sqrt();
        let mut gram = DMatrix::identity(5, 5);
        gram[(0, 1)] = a;
        gram[(1, 0)] = a;
        gram[(2, 3)] = a;
        gram[(3, 2)] = a;
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            gram[(i, j)] = b;
            gram[(j, i)] = b;
        }
        let model = OverlapModel { v_alpha, v_beta, gram };
        model.validate()?;
        Ok(model)
    }

    /// Overlaps implied by the dephasing/wandering model of the source.
    pub fn from_params(p: &PhysicalParams) -> Result<Self> {
        let va = visibility_from_dephasing(p.gamma, p.gamma_d)?;
        let vb = cross_visibility(p.gamma, p.gamma_d, p.sigma)?;
        Self::from_visibilities(va, vb)
    }

    /// Gram matrix restricted to the first `n` photons.
    pub fn gram(&self, n: usize) -> DMatrix<f64> {
        self.gram.view((0, 0), (n, n)).into_owned()
    }

    pub fn validate(&self) -> Result<()> {
        let sym = self.gram.transpose() - &self.gram;
        if sym.amax() > 1e-12 {
            return Err(Error::model("overlap Gram matrix not symmetric".to_string()));
        }
        for i in 0..5 {
            if (self.gram[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::model("overlap Gram diagonal must be 1".to_string()));
            }
            if self.gram[(4, i)].abs() > 1e-12 && i != 4 {
                return Err(Error::model(
                    "extra photon must be fully distinguishable".to_string(),
                ));
            }
        }
        let eig = self.gram.clone().symmetric_eigen();
        if eig.eigenvalues.min() < -1e-10 {
            return Err(Error::model(format!(
                "overlap Gram matrix not PSD (min eigenvalue {:.3e})",
                eig.eigenvalues.min()
            )));
        }
        Ok(())
    }
}

/// Measurement angles (radians) of the wave-plate assemblies; Alice has two
/// settings, Bob three.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSettings {
    pub theta_a: [f64; 2],
    pub theta_b: [f64; 3],
}

impl MeasurementSettings {
    pub fn new(theta_a: [f64; 2], theta_b: [f64; 3]) -> Result<Self> {
        for v in theta_a.iter().chain(theta_b.iter()) {
            if !v.is_finite() {
                return Err(Error::domain("measurement angle not finite".to_string()));
            }
        }
        Ok(MeasurementSettings { theta_a, theta_b })
    }
}

/// Heralded conditional distribution p(a,b|x,y) for the 2-input/3-input
/// binary-outcome scenario, together with the heralding probability.
///
/// Index order is `p[x][y][a][b]` with outcome index 0 meaning +1 and 1
/// meaning -1.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    pub p: [[[[f64; 2]; 2]; 3]; 2],
    pub p_herald: f64,
}

impl Behavior {
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[x][y][a][b]
    }

    /// Alice's marginal p(a|x), computed from y = 0.
    pub fn marginal_a(&self, a: usize, x: usize) -> f64 {
        self.p[x][0][a][0] + self.p[x][0][a][1]
    }

    /// Bob's marginal p(b|y), computed from x = 0.
    pub fn marginal_b(&self, b: usize, y: usize) -> f64 {
        self.p[0][y][0][b] + self.p[0][y][1][b]
    }

    /// Check nonnegativity, normalization and no-signaling to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for x in 0..2 {
            for y in 0..3 {
                let mut sum = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        let v = self.p[x][y][a][b];
                        if v < -tol {
                            return Err(Error::model(format!(
                                "p({a},{b}|{x},{y}) = {v} negative"
                            )));
                        }
                        sum += v;
                    }
                }
                if (sum - 1.0).abs() > tol {
                    return Err(Error::model(format!(
                        "p(.|{x},{y}) sums to {sum}, not 1"
                    )));
                }
            }
        }
        // no-signaling across the unused input
        for x in 0..2 {
            for a in 0..2 {
                let m0 = self.p[x][0][a][0] + self.p[x][0][a][1];
                for y in 1..3 {
                    let m = self.p[x][y][a][0] + self.p[x][y][a][1];
                    if (m - m0).abs() > tol {
                        return Err(Error::model(format!(
                            "signaling: p({a}|x={x}) differs across y by {:.3e}",
                            (m - m0).abs()
                        )));
                    }
                }
            }
        }
        for y in 0..3 {
            for b in 0..2 {
                let m0 = self.p[0][y][0][b] + self.p[0][y][1][b];
                let m1 = self.p[1][y][0][b] + self.p[1][y][1][b];
                if (m1 - m0).abs() > tol {
                    return Err(Error::model(format!(
                        "signaling: p({b}|y={y}) differs across x by {:.3e}",
                        (m1 - m0).abs()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Compute the heralded behavior for the given configuration.
pub fn behavior(
    params: &PhysicalParams,
    overlaps: &OverlapModel,
    settings: &MeasurementSettings,
) -> Result<Behavior> {
    params.validate()?;
    overlaps.validate()?;
    enumerate::behavior_impl(params, overlaps, settings)
}
