//! Independent validation of the photonic engine.
//!
//! The reference implementation here expands the full multi-photon state in
//! a Fock basis over (detection slot x internal state) modes, embedding
//! partial distinguishability through a Cholesky factorization of the
//! overlap Gram matrix. It shares the physical conventions with the engine
//! but none of its machinery: no route grouping, no permanents. Agreement to
//! 1e-9 over random parameter draws pins the engine's interference and
//! bosonic-enhancement handling.

use diqkd::photonic::{
    behavior, heralding_probability, Behavior, MeasurementSettings, OverlapModel, PhysicalParams,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ext {
    D2,
    D3,
    APlus,
    AMinus,
    BPlus,
    BMinus,
    Lost(u8),
}

type Mode = (Ext, u8);

struct RefPhoton {
    alice: bool,
    pol_h: bool,
    /// row of the Cholesky factor of the Gram matrix
    internal: Vec<f64>,
    loss_id: u8,
}

/// Candidate (slot, amplitude) list of one photon, written straight from the
/// physical conventions: central splitter a -> sqrt(t) o1 + i sqrt(1-t) o2,
/// b -> i sqrt(1-t) o1 + sqrt(t) o2; diagonal-basis analysis at the central
/// station with D2 = (o1, minus), D3 = (o2, plus); local wave plate
/// H -> cos 2theta H + sin 2theta V ahead of an H/V splitter.
fn slot_amplitudes(p: &PhysicalParams, ph: &RefPhoton, theta: f64) -> Vec<(Ext, Complex64)> {
    let t = p.small_t;
    let chs = (p.eta1 * p.eta_t * p.big_t / 2.0).sqrt();
    let kept = (p.eta1 * p.eta2 * (1.0 - p.big_t)).sqrt();
    let lost = (1.0 - p.eta1 * p.eta_t * p.big_t - p.eta1 * p.eta2 * (1.0 - p.big_t)).sqrt();
    let sv = if ph.pol_h { 1.0 } else { -1.0 };
    let (d2, d3) = if ph.alice {
        (
            Complex64::new(chs * t.sqrt() * sv, 0.0),
            Complex64::new(0.0, chs * (1.0 - t).sqrt()),
        )
    } else {
        (
            Complex64::new(0.0, chs * (1.0 - t).sqrt() * sv),
            Complex64::new(chs * t.sqrt(), 0.0),
        )
    };
    let c = (2.0 * theta).cos();
    let s = (2.0 * theta).sin();
    let (w_plus, w_minus) = if ph.pol_h { (c, s) } else { (-s, c) };
    let i_kept = Complex64::new(0.0, kept);
    let (plus, minus) = if ph.alice {
        (Ext::APlus, Ext::AMinus)
    } else {
        (Ext::BPlus, Ext::BMinus)
    };
    vec![
        (Ext::D2, d2),
        (Ext::D3, d3),
        (plus, i_kept * w_plus),
        (minus, i_kept * w_minus),
        (Ext::Lost(ph.loss_id), Complex64::new(lost, 0.0)),
    ]
}

/// Apply the creation operator of one photon to every term of the state.
fn apply_photon(
    state: &BTreeMap<Vec<Mode>, Complex64>,
    p: &PhysicalParams,
    ph: &RefPhoton,
    theta: f64,
) -> BTreeMap<Vec<Mode>, Complex64> {
    let slots = slot_amplitudes(p, ph, theta);
    let mut next: BTreeMap<Vec<Mode>, Complex64> = BTreeMap::new();
    for (occ, amp) in state {
        for &(ext, ea) in &slots {
            if ea == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (d, &ia) in ph.internal.iter().enumerate() {
                if ia == 0.0 {
                    continue;
                }
                let mode: Mode = (ext, d as u8);
                let mut occ2 = occ.clone();
                let pos = occ2.partition_point(|m| *m < mode);
                occ2.insert(pos, mode);
                let count = occ2.iter().filter(|m| **m == mode).count();
                let add = amp * ea * ia * (count as f64).sqrt();
                *next.entry(occ2).or_insert(Complex64::new(0.0, 0.0)) += add;
            }
        }
    }
    next
}

/// Click-pattern probabilities p[a][b] (index 0 = +1) and the heralding
/// probability, for one scenario of emitted photons.
fn scenario_probs(
    p: &PhysicalParams,
    photons: &[RefPhoton],
    theta_a: f64,
    theta_b: f64,
) -> ([[f64; 2]; 2], f64) {
    let mut state = BTreeMap::new();
    state.insert(Vec::new(), Complex64::new(1.0, 0.0));
    for ph in photons {
        let theta = if ph.alice { theta_a } else { theta_b };
        state = apply_photon(&state, p, ph, theta);
    }
    let mut cell = [[0.0f64; 2]; 2];
    let mut total = 0.0;
    for (occ, amp) in &state {
        let count = |e: Ext| occ.iter().filter(|(x, _)| *x == e).count();
        if count(Ext::D2) != 1 || count(Ext::D3) != 1 {
            continue;
        }
        let (ap, am) = (count(Ext::APlus), count(Ext::AMinus));
        let (bp, bm) = (count(Ext::BPlus), count(Ext::BMinus));
        let a = usize::from(am > 0 && ap == 0);
        let b = usize::from(bm > 0 && bp == 0);
        let pr = amp.norm_sqr();
        cell[a][b] += pr;
        total += pr;
    }
    (cell, total)
}

fn cholesky_rows(gram: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let chol = gram
        .clone()
        .cholesky()
        .expect("Gram matrix must be positive definite for the reference");
    let l = chol.l();
    (0..gram.nrows()).map(|i| l.row(i).iter().copied().collect()).collect()
}

fn reference_behavior(
    p: &PhysicalParams,
    overlaps: &OverlapModel,
    settings: &MeasurementSettings,
) -> (Behavior, f64) {
    let rows = cholesky_rows(&overlaps.gram(5));
    let base = |loss0: u8| -> Vec<RefPhoton> {
        vec![
            RefPhoton { alice: true, pol_h: true, internal: rows[0].clone(), loss_id: loss0 },
            RefPhoton { alice: true, pol_h: false, internal: rows[1].clone(), loss_id: loss0 + 1 },
            RefPhoton { alice: false, pol_h: true, internal: rows[2].clone(), loss_id: loss0 + 2 },
            RefPhoton { alice: false, pol_h: false, internal: rows[3].clone(), loss_id: loss0 + 3 },
        ]
    };
    let p2 = p.g2 / 2.0;
    let mut pr = [[[[0.0f64; 2]; 2]; 3]; 2];
    let mut p_herald = 0.0;
    for (x, &ta) in settings.theta_a.iter().enumerate() {
        for (y, &tb) in settings.theta_b.iter().enumerate() {
            let mut cell = [[0.0f64; 2]; 2];
            let mut total = 0.0;
            let mut add = |photons: &[RefPhoton], w: f64| {
                if w == 0.0 {
                    return;
                }
                let (c, t) = scenario_probs(p, photons, ta, tb);
                for a in 0..2 {
                    for b in 0..2 {
                        cell[a][b] += w * c[a][b];
                    }
                }
                total += w * t;
            };
            add(&base(0), 1.0 - 4.0 * p2);
            if p2 > 0.0 {
                for src in 0..4usize {
                    let mut photons = base(0);
                    let (alice, pol_h) = (photons[src].alice, photons[src].pol_h);
                    photons.push(RefPhoton {
                        alice,
                        pol_h,
                        internal: rows[4].clone(),
                        loss_id: 4,
                    });
                    add(&photons, p2);
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    pr[x][y][a][b] = cell[a][b] / total;
                }
            }
            if x == 0 && y == 0 {
                p_herald = total;
            }
        }
    }
    (Behavior { p: pr, p_herald }, p_herald)
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn engine_matches_fock_reference() {
    let mut rng = Lcg(0x51ed2700aa11d5b3);
    for draw in 0..12 {
        let params = PhysicalParams {
            eta1: 0.5 + 0.5 * rng.next(),
            eta2: 0.5 + 0.5 * rng.next(),
            eta_t: 0.2 + 0.8 * rng.next(),
            big_t: 0.05 + 0.4 * rng.next(),
            small_t: 0.2 + 0.6 * rng.next(),
            gamma: 1.0,
            gamma_d: 0.0,
            sigma: 0.0,
            g2: if draw % 2 == 0 { 0.0 } else { 0.05 * rng.next() },
        };
        let va = 0.3 + 0.65 * rng.next();
        let vb = va * (0.3 + 0.65 * rng.next());
        let overlaps = OverlapModel::from_visibilities(va, vb).unwrap();
        let settings = MeasurementSettings::new(
            [rng.next(), rng.next()],
            [rng.next(), rng.next(), rng.next()],
        )
        .unwrap();

        let engine = behavior(&params, &overlaps, &settings).unwrap();
        let (reference, ph_ref) = reference_behavior(&params, &overlaps, &settings);

        for x in 0..2 {
            for y in 0..3 {
                for a in 0..2 {
                    for b in 0..2 {
                        let d = (engine.p[x][y][a][b] - reference.p[x][y][a][b]).abs();
                        assert!(
                            d < 1e-9,
                            "draw {draw} p({a},{b}|{x},{y}): engine {} vs reference {}",
                            engine.p[x][y][a][b],
                            reference.p[x][y][a][b]
                        );
                    }
                }
            }
        }
        let d = (engine.p_herald - ph_ref).abs();
        assert!(d < 1e-12 * ph_ref.max(1e-30) + 1e-15, "draw {draw} p_herald differs by {d}");

        let ph_table = heralding_probability(&params, &overlaps).unwrap();
        assert!(
            (ph_table - ph_ref).abs() < 1e-12 * ph_ref.max(1e-30) + 1e-15,
            "draw {draw} event-table heralding probability {ph_table} vs {ph_ref}"
        );
    }
}

/// With ideal hardware and a balanced central splitter the heralded state is
/// the polarization singlet, whose correlators are -cos(4 (theta_a -
/// theta_b)) under the wave-plate convention used by the engine.
#[test]
fn ideal_configuration_yields_singlet_statistics() {
    let mut rng = Lcg(0x0123456789abcdef);
    let params = PhysicalParams { big_t: 0.2, ..PhysicalParams::ideal() };
    let overlaps = OverlapModel::from_visibilities(1.0, 1.0).unwrap();
    for _ in 0..6 {
        let settings = MeasurementSettings::new(
            [rng.next(), rng.next()],
            [rng.next(), rng.next(), rng.next()],
        )
        .unwrap();
        let beh = behavior(&params, &overlaps, &settings).unwrap();
        beh.validate(1e-10).unwrap();
        for x in 0..2 {
            for y in 0..3 {
                let e = beh.p[x][y][0][0] + beh.p[x][y][1][1]
                    - beh.p[x][y][0][1]
                    - beh.p[x][y][1][0];
                let expected = -(4.0 * (settings.theta_a[x] - settings.theta_b[y])).cos();
                assert!(
                    (e - expected).abs() < 1e-10,
                    "E({x},{y}) = {e}, singlet value {expected}"
                );
                // uniform marginals
                let ma = beh.marginal_a(0, x);
                let mb = beh.marginal_b(0, y);
                assert!((ma - 0.5).abs() < 1e-10 && (mb - 0.5).abs() < 1e-10);
            }
        }
    }
}
