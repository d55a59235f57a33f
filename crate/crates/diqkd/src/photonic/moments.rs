//! Closed-form expectation values of the central-station detection
//! operators, postselected on the D2D3 heralding combination, together with
//! an enumeration-based evaluation used to validate them.

use super::OverlapModel;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Identifies the moment <O_i O_j O_k^dag O_l^dag> with 1-based photon
/// indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MomentLabel {
    pub ket: (u8, u8),
    pub bra: (u8, u8),
}

impl MomentLabel {
    pub fn new(ket: (u8, u8), bra: (u8, u8)) -> Self {
        MomentLabel { ket, bra }
    }
}

impl std::fmt::Display for MomentLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "<O{}O{}O{}+O{}+>",
            self.ket.0, self.ket.1, self.bra.0, self.bra.1
        )
    }
}

fn alpha(overlaps: &OverlapModel, i: u8, j: u8) -> f64 {
    overlaps.gram(4)[((i - 1) as usize, (j - 1) as usize)]
}

/// All central-station moments of the Appendix-style closed forms for the
/// D2D3 heralding branch.
pub fn chs_moments(small_t: f64, overlaps: &OverlapModel) -> Result<BTreeMap<MomentLabel, f64>> {
    if !(0.0..=1.0).contains(&small_t) || !small_t.is_finite() {
        return Err(Error::domain(format!("small_t = {small_t} outside [0,1]")));
    }
    overlaps.validate()?;
    let t = small_t;
    let tt = 2.0 * t * (1.0 - t);
    let a12 = alpha(overlaps, 1, 2);
    let a34 = alpha(overlaps, 3, 4);
    let b13 = alpha(overlaps, 1, 3);
    let b14 = alpha(overlaps, 1, 4);
    let b23 = alpha(overlaps, 2, 3);
    let b24 = alpha(overlaps, 2, 4);

    let mut m = BTreeMap::new();
    let mut put = |ket, bra, v| {
        m.insert(MomentLabel::new(ket, bra), v);
    };
    put((1, 2), (1, 2), tt * (1.0 - a12 * a12));
    put((3, 4), (3, 4), tt * (1.0 - a34 * a34));
    put((1, 3), (1, 3), 1.0 - tt * (1.0 + b13 * b13));
    put((1, 4), (1, 4), 1.0 - tt * (1.0 - b14 * b14));
    put((2, 3), (2, 3), 1.0 - tt * (1.0 - b23 * b23));
    put((2, 4), (2, 4), 1.0 - tt * (1.0 + b24 * b24));
    put((1, 4), (2, 3), -a12 * a34 + tt * (a12 * a34 - b13 * b24));
    put((1, 3), (2, 4), -a12 * a34 + tt * (a12 * a34 + b14 * b23));
    // the minus branch of the +/- pair corresponds to D2D3 postselection
    put((1, 3), (1, 4), -(1.0 - 2.0 * t) * a34);
    put((2, 3), (2, 4), -(1.0 - 2.0 * t) * a34);
    put((1, 4), (2, 4), (1.0 - 2.0 * t) * a12);
    put((1, 3), (2, 3), (1.0 - 2.0 * t) * a12);
    Ok(m)
}

/// Per-photon detection amplitude at the central station.
///
/// Photons enter the station beam splitter from Alice's port (photons 1,2)
/// or Bob's port (3,4); each output passes polarization analysis in the
/// diagonal basis, and heralding accepts exactly one click at D2 (output 1,
/// minus) together with one at D3 (output 2, plus). The overall 1/sqrt(2)
/// polarization projection per photon is kept out of these amplitudes,
/// matching the normalization of the closed forms.
pub(crate) fn chs_amp(photon: u8, det: ChsDet, small_t: f64) -> Complex64 {
    let t = small_t;
    let alice = photon <= 2;
    let sv = if photon % 2 == 1 { 1.0 } else { -1.0 }; // H: +, V: -
    match det {
        ChsDet::D2 => {
            if alice {
                Complex64::new(t.sqrt() * sv, 0.0)
            } else {
                Complex64::new(0.0, (1.0 - t).sqrt() * sv)
            }
        }
        ChsDet::D3 => {
            if alice {
                Complex64::new(0.0, (1.0 - t).sqrt())
            } else {
                Complex64::new(t.sqrt(), 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ChsDet {
    D2,
    D3,
}

/// The same moments evaluated by direct enumeration of the two-photon
/// detection configurations, including interference weighted by the
/// internal-state overlaps.
pub fn chs_moments_enumerated(
    small_t: f64,
    overlaps: &OverlapModel,
) -> Result<BTreeMap<MomentLabel, f64>> {
    let labels: Vec<MomentLabel> = chs_moments(small_t, overlaps)?.into_keys().collect();
    let gram = overlaps.gram(4);
    let mut out = BTreeMap::new();
    for label in labels {
        let (i, j) = label.ket;
        let (k, l) = label.bra;
        let mut acc = Complex64::new(0.0, 0.0);
        // ket photon -> detector bijections, same for bra
        for (fi, fj) in [(ChsDet::D2, ChsDet::D3), (ChsDet::D3, ChsDet::D2)] {
            for (gk, gl) in [(ChsDet::D2, ChsDet::D3), (ChsDet::D3, ChsDet::D2)] {
                let af = chs_amp(i, fi, small_t) * chs_amp(j, fj, small_t);
                let ag = chs_amp(k, gk, small_t) * chs_amp(l, gl, small_t);
                // permanent of the 2x2 detector-matched overlap matrix
                let s = |kp: u8, kd: ChsDet, bp: u8, bd: ChsDet| -> f64 {
                    if kd == bd {
                        gram[((bp - 1) as usize, (kp - 1) as usize)]
                    } else {
                        0.0
                    }
                };
                let perm = s(i, fi, k, gk) * s(j, fj, l, gl) + s(i, fi, l, gl) * s(j, fj, k, gk);
                acc += af * ag.conj() * perm;
            }
        }
        debug_assert!(acc.im.abs() < 1e-12);
        out.insert(label, acc.re);
    }
    Ok(out)
}
