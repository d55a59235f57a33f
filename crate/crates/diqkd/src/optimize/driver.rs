//! Two-stage rate optimization and the parallel sweep driver.

use super::nelder_mead::nelder_mead;
use super::seed::sample_nonlocal_seed;
use super::{analytic_rate_at, sdp_rate_at, OptimizeConfig, SettingsVector};
use crate::entropy::RatePoint;
use crate::error::Result;
use crate::photonic::{OverlapModel, PhysicalParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Penalty returned to the simplex when a trial configuration cannot be
/// evaluated (vanishing heralding, solver failure).
const INFEASIBLE: f64 = 1e6;

/// Iteration budget of the closed-form polishing pass that precedes the
/// SDP stages; its evaluations cost microseconds, not seconds.
const WARM_START_ITERATIONS: usize = 500;

/// History of one seed through the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub seed_index: usize,
    pub seed: SettingsVector,
    /// Settings after the coarse refinement.
    pub stage1_settings: SettingsVector,
    /// Rate certified at the coarse quadrature order.
    pub stage1_rate: f64,
    /// Whether the seed was discarded by the positivity filter.
    pub filtered: bool,
    pub stage2_settings: Option<SettingsVector>,
    pub stage2_rate: Option<f64>,
    /// Objective evaluations spent on this seed (all stages).
    pub evaluations: usize,
}

/// Outcome of `optimize_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Best settings found, absent when every seed was filtered out.
    pub best_settings: Option<SettingsVector>,
    /// Rate at `best_settings`, re-evaluated at the fine quadrature order.
    pub best_rate: Option<RatePoint>,
    pub trace: Vec<StageRecord>,
    /// Total objective evaluations across all seeds and stages.
    pub evaluations: usize,
    pub rng_seed: u64,
}

impl OptimizationResult {
    /// Largest stage-2 rate recorded in the trace, if any.
    pub fn best_trace_rate(&self) -> Option<f64> {
        self.trace.iter().filter_map(|r| r.stage2_rate).fold(None, |acc, v| {
            Some(match acc {
                Some(a) if a >= v => a,
                _ => v,
            })
        })
    }
}

/// SplitMix64 step, used to derive independent per-seed RNG streams.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Maximize the key rate over experimental settings.
///
/// Pipeline per seed: draw a nonlocal starting point, polish it against the
/// closed-form CHSH rate (optional), refine with Nelder-Mead against the
/// coarse-order SDP rate, discard seeds whose coarse rate is nonpositive,
/// and re-refine the survivors at the fine quadrature order. The best
/// surviving point is re-evaluated and returned; ties are broken by higher
/// coarse rate, then by lower seed index.
pub fn optimize_rate(
    params: &PhysicalParams,
    overlaps: &OverlapModel,
    cfg: &OptimizeConfig,
) -> Result<OptimizationResult> {
    params.validate()?;
    overlaps.validate()?;
    let (lo, hi) = SettingsVector::bounds(cfg.optimize_q, cfg.optimize_big_t);

    let mut trace: Vec<StageRecord> = Vec::with_capacity(cfg.seeds);
    let mut total_evals = 0usize;

    for i in 0..cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.rng_seed, i as u64));
        let seed = sample_nonlocal_seed(
            params,
            overlaps,
            &mut rng,
            cfg.seed_attempts,
            cfg.optimize_big_t,
        )?;
        let mut evaluations = 0usize;
        let mut start = seed.to_coords(cfg.optimize_q);

        if cfg.analytic_warm_start {
            let r = nelder_mead(
                |x| {
                    let sv = SettingsVector::from_coords(x, cfg.optimize_q, cfg.optimize_big_t);
                    match analytic_rate_at(params, overlaps, &sv) {
                        Ok(p) => -p.rate,
                        Err(_) => INFEASIBLE,
                    }
                },
                &start,
                &lo,
                &hi,
                WARM_START_ITERATIONS,
                cfg.tolerance,
            );
            evaluations += r.evaluations;
            start = r.x;
        }

        // the coarse stage only ranks and filters candidates, so the SDP
        // certification can run at a looser tolerance for speed
        let stage1_solver = crate::npa::SolverOptions {
            gap_tolerance: cfg.solver.gap_tolerance.max(1e-5),
            residual_tolerance: cfg.solver.residual_tolerance.max(1e-5),
            ..cfg.solver
        };
        let stage1 = nelder_mead(
            |x| {
                let sv = SettingsVector::from_coords(x, cfg.optimize_q, cfg.optimize_big_t);
                match sdp_rate_at(params, overlaps, &sv, cfg.m_stage1, &stage1_solver) {
                    Ok(p) => -p.rate,
                    Err(_) => INFEASIBLE,
                }
            },
            &start,
            &lo,
            &hi,
            cfg.stage1_iterations,
            cfg.tolerance,
        );
        evaluations += stage1.evaluations;
        let stage1_settings =
            SettingsVector::from_coords(&stage1.x, cfg.optimize_q, cfg.optimize_big_t);
        let stage1_rate = -stage1.fx;
        let filtered = cfg.filter_nonpositive && !(stage1_rate > 0.0);

        let (stage2_settings, stage2_rate) = if filtered {
            (None, None)
        } else {
            let stage2 = nelder_mead(
                |x| {
                    let sv = SettingsVector::from_coords(x, cfg.optimize_q, cfg.optimize_big_t);
                    match sdp_rate_at(params, overlaps, &sv, cfg.m_stage2, &cfg.solver) {
                        Ok(p) => -p.rate,
                        Err(_) => INFEASIBLE,
                    }
                },
                &stage1.x,
                &lo,
                &hi,
                cfg.stage2_iterations,
                cfg.tolerance,
            );
            evaluations += stage2.evaluations;
            (
                Some(SettingsVector::from_coords(
                    &stage2.x,
                    cfg.optimize_q,
                    cfg.optimize_big_t,
                )),
                Some(-stage2.fx),
            )
        };

        total_evals += evaluations;
        trace.push(StageRecord {
            seed_index: i,
            seed,
            stage1_settings,
            stage1_rate,
            filtered,
            stage2_settings,
            stage2_rate,
            evaluations,
        });
    }

    // pick the winner: highest stage-2 rate, ties by higher stage-1 rate,
    // then by lower seed index (trace order)
    let mut best: Option<&StageRecord> = None;
    for rec in trace.iter().filter(|r| r.stage2_rate.is_some()) {
        best = Some(match best {
            None => rec,
            Some(cur) => {
                let (a, b) = (rec.stage2_rate.unwrap(), cur.stage2_rate.unwrap());
                if a > b || (a == b && rec.stage1_rate > cur.stage1_rate) {
                    rec
                } else {
                    cur
                }
            }
        });
    }

    let (best_settings, best_rate) = match best {
        None => (None, None),
        Some(rec) => {
            let sv = rec.stage2_settings.unwrap();
            let point = sdp_rate_at(params, overlaps, &sv, cfg.m_stage2, &cfg.solver)?;
            (Some(sv), Some(point))
        }
    };

    Ok(OptimizationResult {
        best_settings,
        best_rate,
        trace,
        evaluations: total_evals,
        rng_seed: cfg.rng_seed,
    })
}

/// One row of a sweep: the grid index, its parameters, and the outcome.
#[derive(Debug)]
pub struct SweepRow {
    pub index: usize,
    pub params: PhysicalParams,
    pub result: Result<OptimizationResult>,
}

/// Optimize every grid point on a bounded worker pool.
///
/// Workers pull indices from a shared counter and share nothing mutable
/// besides the result slots; each point derives its own RNG stream from the
/// base seed and its grid index, so the outcome is independent of scheduling
/// and of `pool_size`. Rows come back in grid order. Per-point failures are
/// recorded in their row and never abort the sweep.
pub fn sweep(
    grid: &[PhysicalParams],
    overlaps: &OverlapModel,
    cfg: &OptimizeConfig,
    pool_size: usize,
) -> Vec<SweepRow> {
    let workers = pool_size.max(1).min(grid.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<OptimizationResult>>>> =
        grid.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= grid.len() {
                    break;
                }
                // domain-separated from the per-seed streams inside
                // optimize_rate, which mix the point seed with small indices
                let point_cfg = OptimizeConfig {
                    rng_seed: mix(cfg.rng_seed ^ 0xa5a5_5a5a_c0ff_ee00, idx as u64),
                    ..cfg.clone()
                };
                let result = optimize_rate(&grid[idx], overlaps, &point_cfg);
                *slots[idx].lock().unwrap() = Some(result);
            });
        }
    });

    grid.iter()
        .cloned()
        .zip(slots)
        .enumerate()
        .map(|(index, (params, slot))| SweepRow {
            index,
            params,
            result: slot.into_inner().unwrap().expect("worker filled every slot"),
        })
        .collect()
}
