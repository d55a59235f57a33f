//! End-to-end acceptance checks.
//!
//! Each numbered criterion prints one PASS/FAIL line with the measured
//! values; the test fails if any criterion misses its target. Runtime is
//! dominated by the SDP-certified threshold searches (single-core, on the
//! order of two hours).

use diqkd::analysis::chsh_score;
use diqkd::finite_key::{eat_key_length, optimal_big_t, FiniteKeyConfig, HBoundMode};
use diqkd::npa::{
    build_block, entropy_bound, export_sdpa, gauss_radau, solve, BlockSpec, EntropyOptions,
    SolverOptions,
};
use diqkd::optimize::{
    analytic_rate_at, nelder_mead, optimize_rate, sdp_rate_at, settings_behavior,
    OptimizeConfig, SettingsVector,
};
use diqkd::photonic::{transmission_efficiency, OverlapModel, PhysicalParams};

const TAU: f64 = std::f64::consts::TAU;
const PI_8: f64 = std::f64::consts::FRAC_PI_8;

fn canonical_seed(q: f64) -> SettingsVector {
    SettingsVector {
        small_t: 0.5,
        theta_a: [0.0, PI_8],
        theta_b: [PI_8 / 2.0, TAU - PI_8 / 2.0, 0.0],
        q,
        big_t: None,
    }
}

fn overlaps(v: f64) -> OverlapModel {
    OverlapModel::from_visibilities(v, v).unwrap()
}

fn params(eta_l: f64, g2: f64) -> PhysicalParams {
    let mut p = PhysicalParams::ideal();
    p.eta2 = eta_l;
    p.g2 = g2;
    p
}

/// Shared optimization budget of every full-rate evaluation, and of the
/// measurements the finite-key penalty model was calibrated against. Keep in
/// sync with `PenaltyModel::default()` if it changes.
fn rate_budget(optimize_q: bool) -> OptimizeConfig {
    OptimizeConfig {
        seeds: 1,
        stage1_iterations: 30,
        stage2_iterations: 12,
        optimize_q,
        filter_nonpositive: false,
        rng_seed: 1,
        ..OptimizeConfig::default()
    }
}

/// Maximize `objective` over settings starting from each warm start plus the
/// canonical configuration; returns the best (value, settings).
fn refine_analytic<F>(
    objective: &F,
    warm: &[SettingsVector],
    q0: f64,
    optimize_q: bool,
    iterations: usize,
) -> (f64, SettingsVector)
where
    F: Fn(&SettingsVector) -> f64,
{
    let (lo, hi) = SettingsVector::bounds(optimize_q, false);
    let mut best: Option<(f64, SettingsVector)> = None;
    for start in warm.iter().chain(std::iter::once(&canonical_seed(q0))) {
        let r = nelder_mead(
            |x| -objective(&SettingsVector::from_coords(x, optimize_q, false)),
            &start.to_coords(optimize_q),
            &lo,
            &hi,
            iterations,
            1e-9,
        );
        let sv = SettingsVector::from_coords(&r.x, optimize_q, false);
        if best.as_ref().map_or(true, |(v, _)| -r.fx > *v) {
            best = Some((-r.fx, sv));
        }
    }
    best.unwrap()
}

/// Locate a sign change of `eval` by bisection, reusing the most recent
/// optimized settings as warm starts for neighboring points.
fn bisect_threshold<F>(mut eval: F, mut lo: f64, mut hi: f64, points: usize) -> f64
where
    F: FnMut(f64, &[SettingsVector]) -> (f64, SettingsVector),
{
    let mut warm: Vec<SettingsVector> = Vec::new();
    for _ in 0..points {
        let mid = 0.5 * (lo + hi);
        let (margin, sv) = eval(mid, &warm);
        warm.insert(0, sv);
        warm.truncate(2);
        if margin > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Best CHSH score minus 2 at local efficiency `eta_l`.
fn chsh_margin(
    p: &PhysicalParams,
    o: &OverlapModel,
    warm: &[SettingsVector],
) -> (f64, SettingsVector) {
    let obj = |sv: &SettingsVector| match settings_behavior(p, o, sv)
        .and_then(|b| chsh_score(&b, (0, 1, 0, 1)))
    {
        Ok(rep) => rep.score.abs(),
        Err(_) => -1e6,
    };
    let (s, sv) = refine_analytic(&obj, warm, 0.0, false, 800);
    (s - 2.0, sv)
}

/// Best closed-form rate at local efficiency `eta_l`.
fn analytic_margin(
    p: &PhysicalParams,
    o: &OverlapModel,
    warm: &[SettingsVector],
    optimize_q: bool,
) -> (f64, SettingsVector) {
    let obj = |sv: &SettingsVector| match analytic_rate_at(p, o, sv) {
        Ok(point) => point.rate,
        Err(_) => -1e6,
    };
    refine_analytic(&obj, warm, if optimize_q { 0.1 } else { 0.0 }, optimize_q, 800)
}

/// Best SDP-certified (m = 8) rate: closed-form polish, then a short
/// coarse-quadrature refinement, then one fine-order certification.
fn sdp_margin(
    p: &PhysicalParams,
    o: &OverlapModel,
    warm: &[SettingsVector],
    optimize_q: bool,
) -> (f64, SettingsVector) {
    let (_, polished) = analytic_margin(p, o, warm, optimize_q);
    let loose = SolverOptions {
        gap_tolerance: 1e-5,
        residual_tolerance: 1e-5,
        ..SolverOptions::default()
    };
    let (lo, hi) = SettingsVector::bounds(optimize_q, false);
    let r2 = nelder_mead(
        |x| {
            let sv = SettingsVector::from_coords(x, optimize_q, false);
            match sdp_rate_at(p, o, &sv, 2, &loose) {
                Ok(point) => -point.rate,
                Err(_) => 1e6,
            }
        },
        &polished.to_coords(optimize_q),
        &lo,
        &hi,
        18,
        1e-8,
    );
    let sv = SettingsVector::from_coords(&r2.x, optimize_q, false);
    let rate = sdp_rate_at(p, o, &sv, 8, &SolverOptions::default())
        .map(|point| point.rate)
        .unwrap_or(-1e6);
    (rate, sv)
}

/// SDP positivity threshold over eta_l within `lo..hi` (7 evaluations).
fn sdp_threshold(o: &OverlapModel, g2: f64, optimize_q: bool, lo: f64, hi: f64) -> f64 {
    bisect_threshold(
        |eta, warm| sdp_margin(&params(eta, g2), o, warm, optimize_q),
        lo,
        hi,
        7,
    )
}

/// Fully optimized SDP rate at eta_l = 1: the better of the randomized
/// driver and a canonical-settings polish (both are certified lower
/// bounds, so the max is sound).
fn rate_at_unit_efficiency(o: &OverlapModel, g2: f64) -> f64 {
    let p = params(1.0, g2);
    let res = optimize_rate(&p, o, &rate_budget(false)).unwrap();
    let driver = res.best_rate.map(|pt| pt.rate).unwrap_or(-1e6);
    let (polished, _) = sdp_margin(&p, o, &[], false);
    driver.max(polished)
}

struct Criterion {
    index: usize,
    pass: bool,
    detail: String,
}

fn check(list: &mut Vec<Criterion>, index: usize, pass: bool, detail: String) {
    println!("criterion {index}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    list.push(Criterion { index, pass, detail });
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<Criterion> = Vec::new();

    // ---- 1: CHSH threshold ---------------------------------------------
    let o1 = overlaps(1.0);
    let th1 = bisect_threshold(
        |eta, warm| chsh_margin(&params(eta, 0.0), &o1, warm),
        0.64,
        0.70,
        16,
    );
    check(
        &mut results,
        1,
        within(th1, 0.667, 0.005),
        format!("CHSH S=2 crossing at eta_l = {th1:.4} (target 0.667 +/- 0.005)"),
    );

    // ---- 2: analytic rate thresholds -----------------------------------
    let th2a = bisect_threshold(
        |eta, warm| analytic_margin(&params(eta, 0.0), &o1, warm, false),
        0.889,
        0.929,
        16,
    );
    let th2b = bisect_threshold(
        |eta, warm| analytic_margin(&params(eta, 0.0), &o1, warm, true),
        0.812,
        0.852,
        16,
    );
    check(
        &mut results,
        2,
        within(th2a, 0.909, 0.003) && within(th2b, 0.832, 0.003),
        format!(
            "closed-form positivity at eta_l = {th2a:.4} (target 0.909) and {th2b:.4} \
             with preprocessing (target 0.832), tolerance 0.003"
        ),
    );

    // ---- 3: SDP rate thresholds ----------------------------------------
    let th3a = sdp_threshold(&o1, 0.0, false, 0.828, 0.868);
    let th3b = sdp_threshold(&o1, 0.0, true, 0.798, 0.838);
    let r3 = rate_at_unit_efficiency(&o1, 0.0);
    check(
        &mut results,
        3,
        within(th3a, 0.848, 0.005) && within(th3b, 0.818, 0.005) && within(r3, 1.0, 0.005),
        format!(
            "SDP positivity at eta_l = {th3a:.4} (target 0.848) / {th3b:.4} with \
             preprocessing (target 0.818), rate at eta_l=1: {r3:.4} (target 1.000)"
        ),
    );

    // ---- 4: visibility dependence --------------------------------------
    let o975 = overlaps(0.975);
    let o95 = overlaps(0.95);
    let th4a = sdp_threshold(&o975, 0.0, true, 0.898, 0.938);
    let th4b = sdp_threshold(&o975, 0.0, false, 0.918, 0.958);
    let r4a = rate_at_unit_efficiency(&o975, 0.0);
    let th4c = sdp_threshold(&o95, 0.0, true, 0.929, 0.969);
    let th4d = sdp_threshold(&o95, 0.0, false, 0.938, 0.978);
    let r4b = rate_at_unit_efficiency(&o95, 0.0);
    check(
        &mut results,
        4,
        within(th4a, 0.918, 0.005)
            && within(th4b, 0.938, 0.005)
            && within(r4a, 0.648, 0.01)
            && within(th4c, 0.949, 0.005)
            && within(th4d, 0.958, 0.005)
            && within(r4b, 0.409, 0.01),
        format!(
            "V=0.975: thresholds {th4a:.4}/{th4b:.4} (targets 0.918/0.938), rate {r4a:.4} \
             (target 0.648); V=0.95: {th4c:.4}/{th4d:.4} (targets 0.949/0.958), rate \
             {r4b:.4} (target 0.409)"
        ),
    );

    // ---- 5: purity dependence ------------------------------------------
    let th5a = sdp_threshold(&o1, 0.01, true, 0.852, 0.892);
    let th5b = sdp_threshold(&o1, 0.01, false, 0.874, 0.914);
    let r5a = rate_at_unit_efficiency(&o1, 0.01);
    let th5c = sdp_threshold(&o1, 0.05, true, 0.915, 0.955);
    let th5d = sdp_threshold(&o1, 0.05, false, 0.935, 0.975);
    let r5b = rate_at_unit_efficiency(&o1, 0.05);
    check(
        &mut results,
        5,
        within(th5a, 0.872, 0.005)
            && within(th5b, 0.894, 0.005)
            && within(r5a, 0.766, 0.01)
            && within(th5c, 0.935, 0.005)
            && within(th5d, 0.955, 0.005)
            && within(r5b, 0.311, 0.01),
        format!(
            "g2=0.01: thresholds {th5a:.4}/{th5b:.4} (targets 0.872/0.894), rate {r5a:.4} \
             (target 0.766); g2=0.05: {th5c:.4}/{th5d:.4} (targets 0.935/0.955), rate \
             {r5b:.4} (target 0.311)"
        ),
    );

    // ---- 6: finite-key intervals ---------------------------------------
    check_finite_key(&mut results);

    // ---- 7: property suites --------------------------------------------
    check(&mut results, 7, property_subset(), String::from(
        "inline subset: quadrature weights/exactness, behavior normalization, \
         quadrature-order monotonicity, optimizer-trace determinism (full suites run \
         separately in the workspace tests)",
    ));

    // ---- 8: cross-solver check -----------------------------------------
    let (pass8, detail8) = cross_solver_subset();
    check(&mut results, 8, pass8, detail8);

    let failed: Vec<String> = results
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("criterion {}: {}", c.index, c.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}

// ---------------------------------------------------------------------------
// criterion 6
// ---------------------------------------------------------------------------

/// Measured components of one distance-analysis parameter set.
struct SetComponents {
    sv: SettingsVector,
    h_ae: f64,
    h_ab: f64,
}

fn measure_set(
    p: &PhysicalParams,
    o: &OverlapModel,
    optimize_q: bool,
) -> SetComponents {
    let res = optimize_rate(p, o, &rate_budget(optimize_q)).unwrap();
    let sv = res.best_settings.unwrap();
    let point = res.best_rate.unwrap();
    SetComponents { sv, h_ae: point.h_ae, h_ab: point.h_ab }
}

/// Key length at `n` emission attempts and distance `l_km`, reusing the
/// fixed entropy components (the heralded state does not depend on the
/// channel transmission; only the heralding probability decays).
fn key_length_at(
    p: &PhysicalParams,
    o: &OverlapModel,
    comp: &SetComponents,
    n: f64,
    l_km: f64,
    cfg: &FiniteKeyConfig,
) -> f64 {
    let mut pl = p.clone();
    pl.eta_t = transmission_efficiency(l_km, cfg.l0_km).unwrap();
    let b = settings_behavior(&pl, o, &comp.sv).unwrap();
    let cfg_n = FiniteKeyConfig { n, ..*cfg };
    eat_key_length(comp.h_ae.clamp(0.0, 1.0), comp.h_ab, n * b.p_herald, &cfg_n).unwrap()
}

/// Distance at which the key rate decays through 0.1 bits/s, or None if it
/// never reaches it.
fn crossing_km(
    p: &PhysicalParams,
    o: &OverlapModel,
    comp: &SetComponents,
    n: f64,
    cfg: &FiniteKeyConfig,
) -> Option<f64> {
    let tau = n / cfg.nu_hz;
    let bits_per_s =
        |l: f64| key_length_at(p, o, comp, n, l, cfg) / tau;
    if bits_per_s(0.0) < 0.1 {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 500.0f64);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if bits_per_s(mid) >= 0.1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn check_finite_key(results: &mut Vec<Criterion>) {
    let o_ideal = overlaps(1.0);
    let mut p_ideal = params(1.0, 0.0);
    p_ideal.big_t = 0.0622;
    let o_real = overlaps(0.975);
    let mut p_real = params(0.957, 0.01);
    p_real.big_t = 0.0106;

    let ideal = measure_set(&p_ideal, &o_ideal, false);
    let real = measure_set(&p_real, &o_real, true);
    let cfg = FiniteKeyConfig::default();

    // zero key for n <= 1e7 at both parameter sets
    let zero_key = [1e7, 5e6].iter().all(|&n| {
        key_length_at(&p_ideal, &o_ideal, &ideal, n, 0.0, &cfg) == 0.0
            && key_length_at(&p_real, &o_real, &real, n, 0.0, &cfg) == 0.0
    });

    // 0.1 bits/s crossings across the stated round range, tolerance 10 km
    let c_real_lo = crossing_km(&p_real, &o_real, &real, 6.0e7, &cfg);
    let c_real_hi = crossing_km(&p_real, &o_real, &real, 1e12, &cfg);
    let c_ideal_lo = crossing_km(&p_ideal, &o_ideal, &ideal, 3.0e7, &cfg);
    let c_ideal_hi = crossing_km(&p_ideal, &o_ideal, &ideal, 1e12, &cfg);
    let in_range = |c: Option<f64>, lo: f64, hi: f64| {
        c.map_or(false, |v| v >= lo - 10.0 && v <= hi + 10.0)
    };
    let intervals = in_range(c_real_lo, 144.0, 200.0)
        && in_range(c_real_hi, 144.0, 200.0)
        && in_range(c_ideal_lo, 230.0, 292.0)
        && in_range(c_ideal_hi, 230.0, 292.0);

    // optimal tap transmittance at n = 1e10, L = 0
    let solver = SolverOptions::default();
    let (t_ideal, _) = optimal_big_t(
        &p_ideal,
        &o_ideal,
        &ideal.sv,
        0.0,
        &FiniteKeyConfig { n: 1e10, ..cfg },
        HBoundMode::Sdp { m: 8 },
        &solver,
    )
    .unwrap();
    let (t_real, _) = optimal_big_t(
        &p_real,
        &o_real,
        &real.sv,
        0.0,
        &FiniteKeyConfig { n: 1e10, ..cfg },
        HBoundMode::Sdp { m: 8 },
        &solver,
    )
    .unwrap();
    let taps = within(t_ideal, 0.0622, 0.02) && within(t_real, 0.0106, 0.01);

    // consistency of the reused entropy components at distance: re-certify
    // the realistic set at 100 km and compare
    let mut p_check = p_real.clone();
    p_check.eta_t = transmission_efficiency(100.0, cfg.l0_km).unwrap();
    let recert = sdp_rate_at(&p_check, &o_real, &real.sv, 8, &solver)
        .map(|pt| (pt.h_ae - real.h_ae).abs())
        .unwrap_or(f64::NAN);

    let fmt = |c: Option<f64>| c.map_or_else(|| String::from("none"), |v| format!("{v:.1}"));
    check(
        results,
        6,
        zero_key && intervals && taps,
        format!(
            "zero key at n<=1e7: {zero_key}; 0.1 bits/s crossings km \
             realistic[n=6e7,1e12]=[{},{}] (target [144,200] +/- 10), \
             ideal[n=3e7,1e12]=[{},{}] (target [230,292] +/- 10); optimal tap \
             ideal {t_ideal:.4} (target 0.0622 +/- 0.02), realistic {t_real:.4} \
             (target 0.0106 +/- 0.01); h_ae drift at 100 km: {recert:.2e}",
            fmt(c_real_lo),
            fmt(c_real_hi),
            fmt(c_ideal_lo),
            fmt(c_ideal_hi),
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 7 (inline subset; the full property suites are separate tests)
// ---------------------------------------------------------------------------

fn property_subset() -> bool {
    // quadrature: weights sum to one and the rule integrates monomials up to
    // degree 2m-2 exactly
    for m in [2usize, 4, 8] {
        let rule = gauss_radau(m).unwrap();
        let wsum: f64 = rule.weights.iter().sum();
        if (wsum - 1.0).abs() > 1e-12 {
            return false;
        }
        for d in 0..=(2 * m - 2) {
            let q: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&t, &w)| w * t.powi(d as i32))
                .sum();
            let exact = 1.0 / (d as f64 + 1.0);
            if (q - exact).abs() > 1e-10 {
                return false;
            }
        }
    }

    // behavior normalization and no-signaling
    let o = overlaps(0.98);
    let p = params(0.97, 0.01);
    let sv = canonical_seed(0.0);
    let b = settings_behavior(&p, &o, &sv).unwrap();
    if b.validate(1e-9).is_err() {
        return false;
    }

    // quadrature-order monotonicity of the certified bound
    let coarse = entropy_bound(&b, &EntropyOptions { m: 2, ..EntropyOptions::default() });
    let fine = entropy_bound(&b, &EntropyOptions { m: 4, ..EntropyOptions::default() });
    match (coarse, fine) {
        (Ok(c), Ok(f)) if c <= f + 1e-6 => {}
        _ => return false,
    }

    // optimizer determinism: identical budgets and seeds reproduce the trace
    let tiny = OptimizeConfig {
        seeds: 1,
        stage1_iterations: 2,
        stage2_iterations: 0,
        m_stage1: 2,
        m_stage2: 2,
        filter_nonpositive: false,
        rng_seed: 11,
        ..OptimizeConfig::default()
    };
    let a = optimize_rate(&params(0.99, 0.0), &o, &tiny).unwrap();
    let bres = optimize_rate(&params(0.99, 0.0), &o, &tiny).unwrap();
    a.trace == bres.trace
}

// ---------------------------------------------------------------------------
// criterion 8 (two-instance cross-solver agreement)
// ---------------------------------------------------------------------------

const REFERENCE_SOLVER: &str = r#"
import sys
from cvxopt import matrix, solvers

solvers.options['show_progress'] = False
solvers.options['abstol'] = 1e-9
solvers.options['reltol'] = 1e-9


def parse(path):
    lines = []
    for raw in open(path):
        s = raw.strip()
        if s and not s.startswith('*') and not s.startswith('"'):
            lines.append(s)
    k = int(lines[0].split()[0])
    n = int(lines[2].replace('(', ' ').replace(')', ' ').replace(',', ' ').split()[0])
    cvec = [float(t) for t in
            lines[3].replace(',', ' ').replace('{', ' ').replace('}', ' ').split()]
    mats = [[0.0] * (n * n) for _ in range(k + 1)]
    for line in lines[4:]:
        m_, b_, i, j, v = line.split()
        m_, i, j, v = int(m_), int(i) - 1, int(j) - 1, float(v)
        mats[m_][i * n + j] = v
        mats[m_][j * n + i] = v
    return k, n, cvec, mats


for path in sys.argv[1:]:
    k, n, cvec, mats = parse(path)
    G = matrix([[-v for v in mats[i + 1]] for i in range(k)])
    h = matrix([-v for v in mats[0]], (n, n))
    sol = solvers.sdp(matrix(cvec), Gs=[G], hs=[h])
    assert sol['x'] is not None, path
    print('%.12e' % sol['primal objective'])
"#;

fn cross_solver_subset() -> (bool, String) {
    let p = params(0.97, 0.0);
    let o = overlaps(0.99);
    let sv = canonical_seed(0.0);
    let b = settings_behavior(&p, &o, &sv).unwrap();
    let rule = gauss_radau(4).unwrap();
    let specs = [
        BlockSpec { t: rule.nodes[1], outcomes: vec![0], q: 0.0, x_key: 0, extras: true },
        BlockSpec { t: rule.nodes[2], outcomes: vec![1], q: 0.05, x_key: 0, extras: true },
    ];

    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return (false, format!("tempdir failed: {e}")),
    };
    let script = dir.path().join("reference_solver.py");
    std::fs::write(&script, REFERENCE_SOLVER).unwrap();

    let mut ours = Vec::new();
    let mut paths = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let problem = build_block(&b, spec, &[0, 1, 2]).unwrap();
        let path = dir.path().join(format!("instance{i}.dat-s"));
        export_sdpa(&problem, &path, &["acceptance cross-check".to_string()]).unwrap();
        let report = solve(&problem, &SolverOptions::default()).unwrap();
        ours.push(report.primal_objective - problem.obj_const);
        paths.push(path);
    }

    let output = std::process::Command::new("python3").arg(&script).args(&paths).output();
    let output = match output {
        Ok(out) if out.status.success() => out,
        Ok(out) => {
            return (false, format!(
                "reference solver failed: {}",
                String::from_utf8_lossy(&out.stderr)
            ))
        }
        Err(e) => return (false, format!("python3 unavailable: {e}")),
    };
    let theirs: Vec<f64> = String::from_utf8_lossy(&output.stdout)
        .lines()
        .filter_map(|l| l.trim().parse().ok())
        .collect();
    if theirs.len() != ours.len() {
        return (false, String::from("reference solver output malformed"));
    }
    let mut worst = 0.0f64;
    for (a, b) in ours.iter().zip(&theirs) {
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    (
        worst < 1e-5,
        format!(
            "{} exported instances re-solved externally, worst relative deviation \
             {worst:.2e} (tolerance 1e-5); the five-instance check runs in the \
             dedicated cross-solver test",
            ours.len()
        ),
    )
}
