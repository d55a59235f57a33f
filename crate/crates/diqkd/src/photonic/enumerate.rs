//! Dense enumeration of photon routes and detection configurations.
//!
//! Every photon is assigned one of: central-station detector D2 or D3,
//! a local detector at its own station, or loss. Amplitudes of
//! configurations leading to the same click pattern are summed with
//! interference cross terms weighted by permanents of the internal-state
//! overlap (Gram) matrix. Heralding accepts exactly one click at D2 and one
//! at D3; patterns with three simultaneous central-station clicks are
//! excluded from acceptance.

use super::{Behavior, MeasurementSettings, OverlapModel, PhysicalParams};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Station {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pol {
    H,
    V,
}

#[derive(Debug, Clone, Copy)]
struct Photon {
    station: Station,
    pol: Pol,
    gram_row: usize,
    loss_mode: u8,
}

/// Detection slot of a single photon within one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    D2,
    D3,
    Loc(Station, bool), // true = "plus" detector
    Lost(u8),
}

/// Click-count signature of a configuration (D2 = D3 = 1 implied).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Sig {
    a_plus: u8,
    a_minus: u8,
    b_plus: u8,
    b_minus: u8,
    lost: u8,
}

#[derive(Debug, Clone)]
struct Config {
    slots: Vec<Slot>,
    amp: Complex64,
}

/// How multiple photons at one station were distributed over its detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventClass {
    /// At most one photon detected at each station.
    Single,
    /// All photons of the multi-photon station hit the same detector.
    SameDetector,
    /// The multi-photon station saw clicks on both detectors.
    DifferentDetector,
}

/// Table-style label p_{klmn} of an accepted contribution: photons at the
/// central station (always 2), Alice's station, Bob's station, undetected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventLabel {
    pub chs: u8,
    pub alice: u8,
    pub bob: u8,
    pub undetected: u8,
    pub class: EventClass,
}

impl EventLabel {
    /// True for contributions involving a fifth photon from an impure
    /// source.
    pub fn five_photon(&self) -> bool {
        self.chs + self.alice + self.bob + self.undetected == 5
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p_{}{}{}{}", self.chs, self.alice, self.bob, self.undetected)?;
        match self.class {
            EventClass::Single => Ok(()),
            EventClass::SameDetector => write!(f, "_SD"),
            EventClass::DifferentDetector => write!(f, "_DD"),
        }
    }
}

/// Accepted-event probability contributions, keyed by their p_{klmn} label.
#[derive(Debug, Clone)]
pub struct EventTable {
    pub entries: BTreeMap<EventLabel, f64>,
    /// Identifier of the accepted heralding click pattern.
    pub herald_pattern: &'static str,
}

impl EventTable {
    /// Total heralding probability: the sum of all accepted contributions.
    pub fn heralding_probability(&self) -> f64 {
        self.entries.values().sum()
    }
}

struct Scenario {
    photons: Vec<Photon>,
    gram: DMatrix<f64>,
    weight: f64,
}

fn base_photons() -> Vec<Photon> {
    vec![
        Photon { station: Station::Alice, pol: Pol::H, gram_row: 0, loss_mode: 0 },
        Photon { station: Station::Alice, pol: Pol::V, gram_row: 1, loss_mode: 1 },
        Photon { station: Station::Bob, pol: Pol::H, gram_row: 2, loss_mode: 2 },
        Photon { station: Station::Bob, pol: Pol::V, gram_row: 3, loss_mode: 3 },
    ]
}

/// The four-photon scenario plus, for g2 > 0, one five-photon scenario per
/// source with the extra photon completely distinguishable. First order in
/// P2 throughout.
fn scenarios(params: &PhysicalParams, overlaps: &OverlapModel) -> Vec<Scenario> {
    let p2 = params.p2();
    let mut list = vec![Scenario {
        photons: base_photons(),
        gram: overlaps.gram(4),
        weight: (1.0 - 4.0 * p2).max(0.0),
    }];
    if p2 > 0.0 {
        for src in 0..4usize {
            let mut photons = base_photons();
            let sibling = photons[src];
            photons.push(Photon {
                station: sibling.station,
                pol: sibling.pol,
                gram_row: 4,
                loss_mode: 4,
            });
            // extend the 4x4 Gram by a fully distinguishable row/column
            let mut gram = DMatrix::identity(5, 5);
            gram.view_mut((0, 0), (4, 4)).copy_from(&overlaps.gram(4));
            list.push(Scenario { photons, gram, weight: p2 });
        }
    }
    list
}

struct Amplitudes {
    chs: f64,          // sqrt(eta1 * eta_t * T / 2)
    kept: f64,         // sqrt(eta_l * (1 - T))
    lost: f64,         // remainder
    small_t: f64,
}

impl Amplitudes {
    fn new(p: &PhysicalParams) -> Self {
        let chs2 = p.eta1 * p.eta_t * p.big_t / 2.0;
        let kept2 = p.eta_l() * (1.0 - p.big_t);
        // the polarization projection halves the per-detector weight, so the
        // total central-station probability is 2 * chs2
        let lost2 = (1.0 - 2.0 * chs2 - kept2).max(0.0);
        Amplitudes {
            chs: chs2.sqrt(),
            kept: kept2.sqrt(),
            lost: lost2.sqrt(),
            small_t: p.small_t,
        }
    }

    /// Candidate slots with amplitudes for one photon at measurement angle
    /// `theta` of its station.
    fn candidates(&self, ph: &Photon, theta: f64) -> Vec<(Slot, Complex64)> {
        let t = self.small_t;
        let sv = match ph.pol {
            Pol::H => 1.0,
            Pol::V => -1.0,
        };
        let (d2, d3) = match ph.station {
            Station::Alice => (
                Complex64::new(self.chs * t.sqrt() * sv, 0.0),
                Complex64::new(0.0, self.chs * (1.0 - t).sqrt()),
            ),
            Station::Bob => (
                Complex64::new(0.0, self.chs * (1.0 - t).sqrt() * sv),
                Complex64::new(self.chs * t.sqrt(), 0.0),
            ),
        };
        // wave-plate rotation: H -> cos(2theta) H + sin(2theta) V, followed
        // by a polarizing splitter sending H to the "plus" detector
        let c = (2.0 * theta).cos();
        let s = (2.0 * theta).sin();
        let (plus, minus) = match ph.pol {
            Pol::H => (c, s),
            Pol::V => (-s, c),
        };
        let kept = Complex64::new(0.0, self.kept);
        vec![
            (Slot::D2, d2),
            (Slot::D3, d3),
            (Slot::Loc(ph.station, true), kept * plus),
            (Slot::Loc(ph.station, false), kept * minus),
            (Slot::Lost(ph.loss_mode), Complex64::new(self.lost, 0.0)),
        ]
    }
}

/// Permanent of a small square matrix by Laplace expansion.
fn permanent(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] + m[(0, 1)] * m[(1, 0)],
        _ => {
            let mut acc = 0.0;
            for j in 0..n {
                let v = m[(0, j)];
                if v == 0.0 {
                    continue;
                }
                let sub = m.view((1, 0), (n - 1, n)).remove_column(j);
                acc += v * permanent(&sub);
            }
            acc
        }
    }
}

/// Probabilities of every accepted click signature for one scenario at the
/// given settings.
fn signature_probabilities(
    scenario: &Scenario,
    amps: &Amplitudes,
    theta_a: f64,
    theta_b: f64,
) -> BTreeMap<Sig, f64> {
    let n = scenario.photons.len();
    let cands: Vec<Vec<(Slot, Complex64)>> = scenario
        .photons
        .iter()
        .map(|ph| {
            let theta = match ph.station {
                Station::Alice => theta_a,
                Station::Bob => theta_b,
            };
            amps.candidates(ph, theta)
        })
        .collect();

    // depth-first product over candidate slots, pruning double central
    // clicks on one detector
    let mut configs: Vec<Config> = Vec::new();
    let mut slots = vec![Slot::Lost(0); n];
    fn dfs(
        depth: usize,
        n: usize,
        d2: u8,
        d3: u8,
        amp: Complex64,
        slots: &mut Vec<Slot>,
        cands: &[Vec<(Slot, Complex64)>],
        out: &mut Vec<Config>,
    ) {
        if depth == n {
            if d2 == 1 && d3 == 1 {
                out.push(Config { slots: slots.clone(), amp });
            }
            return;
        }
        for &(slot, a) in &cands[depth] {
            if a == Complex64::ZERO {
                continue;
            }
            let (mut d2n, mut d3n) = (d2, d3);
            match slot {
                Slot::D2 => d2n += 1,
                Slot::D3 => d3n += 1,
                _ => {}
            }
            if d2n > 1 || d3n > 1 {
                continue;
            }
            slots[depth] = slot;
            dfs(depth + 1, n, d2n, d3n, amp * a, slots, cands, out);
        }
    }
    dfs(0, n, 0, 0, Complex64::ONE, &mut slots, &cands, &mut configs);

    // group by click signature
    let mut groups: BTreeMap<Sig, Vec<&Config>> = BTreeMap::new();
    for cfg in &configs {
        let mut sig = Sig { a_plus: 0, a_minus: 0, b_plus: 0, b_minus: 0, lost: 0 };
        for s in &cfg.slots {
            match s {
                Slot::Loc(Station::Alice, true) => sig.a_plus += 1,
                Slot::Loc(Station::Alice, false) => sig.a_minus += 1,
                Slot::Loc(Station::Bob, true) => sig.b_plus += 1,
                Slot::Loc(Station::Bob, false) => sig.b_minus += 1,
                Slot::Lost(_) => sig.lost += 1,
                _ => {}
            }
        }
        groups.entry(sig).or_default().push(cfg);
    }

    let gram = &scenario.gram;
    let photons = &scenario.photons;
    let mut probs = BTreeMap::new();
    for (sig, members) in groups {
        let mut total = 0.0;
        for (fi, f) in members.iter().enumerate() {
            for (gi, g) in members.iter().enumerate() {
                if gi < fi {
                    continue;
                }
                // overlap matrix: rows = ket photons, cols = bra photons
                let mut s = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        if f.slots[i] == g.slots[j] {
                            s[(i, j)] = gram[(photons[j].gram_row, photons[i].gram_row)];
                        }
                    }
                }
                let perm = permanent(&s);
                if perm == 0.0 {
                    continue;
                }
                let cross = f.amp * g.amp.conj();
                total += if gi == fi { cross.re * perm } else { 2.0 * cross.re * perm };
            }
        }
        probs.insert(sig, total);
    }
    probs
}

fn outcome_index(plus: u8, minus: u8) -> usize {
    // no click and double-detector clicks map to +1 (index 0)
    if minus > 0 && plus == 0 {
        1
    } else {
        0
    }
}

fn event_class(sig: &Sig) -> EventClass {
    let alice = sig.a_plus + sig.a_minus;
    let bob = sig.b_plus + sig.b_minus;
    if alice <= 1 && bob <= 1 {
        EventClass::Single
    } else {
        let multi_same = if alice > 1 {
            sig.a_plus == 0 || sig.a_minus == 0
        } else {
            sig.b_plus == 0 || sig.b_minus == 0
        };
        if multi_same {
            EventClass::SameDetector
        } else {
            EventClass::DifferentDetector
        }
    }
}

/// All accepted probability contributions p_{klmn}, split into same/different
/// detector classes where more than one photon reaches a station. Settings
/// drop out of the aggregated contributions.
pub fn enumerate_events(params: &PhysicalParams, overlaps: &OverlapModel) -> Result<EventTable> {
    params.validate()?;
    overlaps.validate()?;
    let amps = Amplitudes::new(params);
    let mut entries: BTreeMap<EventLabel, f64> = BTreeMap::new();
    for scenario in scenarios(params, overlaps) {
        if scenario.weight == 0.0 {
            continue;
        }
        let probs = signature_probabilities(&scenario, &amps, 0.0, 0.0);
        for (sig, p) in probs {
            let label = EventLabel {
                chs: 2,
                alice: sig.a_plus + sig.a_minus,
                bob: sig.b_plus + sig.b_minus,
                undetected: sig.lost,
                class: event_class(&sig),
            };
            *entries.entry(label).or_insert(0.0) += scenario.weight * p;
        }
    }
    // collapse detector-split signatures of the same class
    Ok(EventTable { entries, herald_pattern: "D2D3" })
}

/// Probability per emission round that the central station heralds success.
pub fn heralding_probability(params: &PhysicalParams, overlaps: &OverlapModel) -> Result<f64> {
    Ok(enumerate_events(params, overlaps)?.heralding_probability())
}

pub(super) fn behavior_impl(
    params: &PhysicalParams,
    overlaps: &OverlapModel,
    settings: &MeasurementSettings,
) -> Result<Behavior> {
    let amps = Amplitudes::new(params);
    let scenarios = scenarios(params, overlaps);
    let mut p = [[[[0.0f64; 2]; 2]; 3]; 2];
    let mut p_herald = 0.0;
    for (x, &ta) in settings.theta_a.iter().enumerate() {
        for (y, &tb) in settings.theta_b.iter().enumerate() {
            let mut cell = [[0.0f64; 2]; 2];
            let mut total = 0.0;
            for scenario in &scenarios {
                if scenario.weight == 0.0 {
                    continue;
                }
                for (sig, prob) in signature_probabilities(scenario, &amps, ta, tb) {
                    let a = outcome_index(sig.a_plus, sig.a_minus);
                    let b = outcome_index(sig.b_plus, sig.b_minus);
                    cell[a][b] += scenario.weight * prob;
                    total += scenario.weight * prob;
                }
            }
            if total <= 0.0 {
                return Err(Error::model(
                    "zero heralding probability; behavior undefined".to_string(),
                ));
            }
            for a in 0..2 {
                for b in 0..2 {
                    p[x][y][a][b] = cell[a][b] / total;
                }
            }
            if x == 0 && y == 0 {
                p_herald = total;
            }
        }
    }
    Ok(Behavior { p, p_herald })
}
