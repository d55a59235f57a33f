//! Classical entropy utilities and the closed-form key-rate bounds.

use crate::analysis::apply_preprocessing;
use crate::error::{Error, Result};
use crate::photonic::{Behavior, MeasurementSettings};

const S_MAX: f64 = 2.0 * std::f64::consts::SQRT_2;

/// How a rate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMethod {
    Analytic,
    AnalyticPreprocessing,
    Sdp,
}

impl std::fmt::Display for RateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateMethod::Analytic => write!(f, "analytic"),
            RateMethod::AnalyticPreprocessing => write!(f, "analytic+preprocessing"),
            RateMethod::Sdp => write!(f, "sdp"),
        }
    }
}

/// One evaluated key-rate point: the Devetak-Winter difference between a
/// lower bound on H(A|E) and the reconciliation cost H(A|B).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    /// rate = h_ae - h_ab, bits per heralded round.
    pub rate: f64,
    /// Lower bound on H(A | X = key input, E).
    pub h_ae: f64,
    /// H(A | B) at the key-generation inputs.
    pub h_ab: f64,
    pub method: RateMethod,
    /// Central-splitter transmittance of the evaluated configuration.
    pub small_t: f64,
    pub settings: MeasurementSettings,
    /// Preprocessing flip probability.
    pub q: f64,
}

impl RatePoint {
    pub fn new(
        h_ae: f64,
        h_ab: f64,
        method: RateMethod,
        small_t: f64,
        settings: MeasurementSettings,
        q: f64,
    ) -> Self {
        RatePoint { rate: h_ae - h_ab, h_ae, h_ab, method, small_t, settings, q }
    }
}

/// Binary entropy in bits, with the boundary convention 0 log 0 = 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::domain(format!("binary_entropy({p}) outside [0,1]")));
    }
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

fn shannon(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| if p <= 0.0 { 0.0 } else { -p * p.log2() }).sum()
}

/// Classical conditional entropy H(A|B) of the joint outcome table at inputs
/// (x', y'), with Alice's outcome flipped with probability `q` first.
pub fn conditional_entropy_ab(b: &Behavior, x: usize, y: usize, q: f64) -> Result<f64> {
    if x >= 2 || y >= 3 {
        return Err(Error::domain(format!("inputs ({x},{y}) out of range")));
    }
    let flipped = apply_preprocessing(b, q)?;
    // apply_preprocessing only rewrites the key cell; flip this cell directly
    // so any (x', y') can be queried under preprocessing
    let cell = if (x, y) == (0, 2) {
        flipped.p[0][2]
    } else {
        let raw = b.p[x][y];
        let mut c = [[0.0; 2]; 2];
        for bb in 0..2 {
            c[0][bb] = (1.0 - q) * raw[0][bb] + q * raw[1][bb];
            c[1][bb] = q * raw[0][bb] + (1.0 - q) * raw[1][bb];
        }
        c
    };
    let joint = [cell[0][0], cell[0][1], cell[1][0], cell[1][1]];
    let marg_b = [cell[0][0] + cell[1][0], cell[0][1] + cell[1][1]];
    Ok(shannon(&joint) - shannon(&marg_b))
}

/// Entropy term of the CHSH analytic bound: h((1 + sqrt((S/2)^2 - 1)) / 2),
/// clamped to h(1/2) = 1 for S below 2.
fn chsh_entropy_term(s: f64) -> Result<f64> {
    if s > S_MAX + 1e-9 {
        return Err(Error::domain(format!("CHSH score {s} exceeds the quantum bound")));
    }
    let s = s.min(S_MAX);
    if s <= 2.0 {
        return Ok(1.0);
    }
    binary_entropy((1.0 + ((s / 2.0).powi(2) - 1.0).sqrt()) / 2.0)
}

/// Key-rate lower bound from the CHSH score alone:
/// r = 1 - h((1 + sqrt((S/2)^2 - 1)) / 2) - hAB.
pub fn chsh_analytic_rate(s: f64, h_ab: f64) -> Result<f64> {
    Ok(1.0 - chsh_entropy_term(s)? - h_ab)
}

/// CHSH bound with noisy preprocessing at flip probability `q`; `h_ab` must
/// be evaluated on the preprocessed table. The correction term is
/// h((1 + sqrt(1 - q(1-q)(8 - S^2))) / 2).
pub fn chsh_preprocessing_rate(s: f64, h_ab: f64, q: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&q) || !q.is_finite() {
        return Err(Error::domain(format!("preprocessing q = {q} outside [0, 0.5]")));
    }
    let base = chsh_analytic_rate(s, h_ab)?;
    let s = s.clamp(2.0, S_MAX);
    let arg = (1.0 + (1.0 - q * (1.0 - q) * (8.0 - s * s)).max(0.0).sqrt()) / 2.0;
    Ok(base + binary_entropy(arg)?)
}

/// Golden-section maximization of a unimodal function on [lo, hi] to the
/// given x-tolerance; returns (argmax, max).
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::domain("golden_section_max: bad interval".to_string()));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let xm = (a + b) / 2.0;
    let fm = f(xm)?;
    if fm >= fc && fm >= fd {
        Ok((xm, fm))
    } else if fc >= fd {
        Ok((c, fc))
    } else {
        Ok((d, fd))
    }
}

/// Analytic preprocessing rate with q optimized over [0, 0.5] by
/// golden-section search (tolerance 1e-4); returns (q*, rate).
pub fn optimal_preprocessing_rate(b: &Behavior, s: f64) -> Result<(f64, f64)> {
    golden_section_max(
        |q| {
            let h_ab = conditional_entropy_ab(b, 0, 2, q)?;
            chsh_preprocessing_rate(s, h_ab, q)
        },
        0.0,
        0.5,
        1e-4,
    )
}
