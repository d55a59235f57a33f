//! Random sampling of nonlocal starting points for the optimizer.

use super::{settings_behavior, SettingsVector, BIG_T_HI, BIG_T_LO, SMALL_T_HI, SMALL_T_LO};
use crate::analysis::is_nonlocal_2222;
use crate::error::{Error, Result};
use crate::photonic::{OverlapModel, PhysicalParams};
use rand::Rng;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Draw random configurations until one produces a behavior outside the
/// local polytope on the Bell test inputs (x in {0,1}, y in {0,1}).
///
/// The key-basis angle `theta_b[2]` is drawn but not filtered on: it does
/// not enter the nonlocality test and stays a free coordinate for the
/// refinement stages. The preprocessing probability starts at 0 since it
/// never affects nonlocality of the underlying behavior.
pub fn sample_nonlocal_seed<R: Rng + ?Sized>(
    params: &PhysicalParams,
    overlaps: &OverlapModel,
    rng: &mut R,
    attempts: usize,
    with_big_t: bool,
) -> Result<SettingsVector> {
    params.validate()?;
    if attempts == 0 {
        return Err(Error::domain("seed attempt budget must be positive"));
    }
    let mut last_err: Option<Error> = None;
    for attempt in 0..attempts {
        let sv = SettingsVector {
            small_t: rng.random_range(SMALL_T_LO..SMALL_T_HI),
            theta_a: [rng.random_range(0.0..TWO_PI), rng.random_range(0.0..TWO_PI)],
            theta_b: [
                rng.random_range(0.0..TWO_PI),
                rng.random_range(0.0..TWO_PI),
                rng.random_range(0.0..TWO_PI),
            ],
            q: 0.0,
            big_t: if with_big_t {
                // log-uniform over the finite-key search range
                Some((rng.random_range(BIG_T_LO.ln()..BIG_T_HI.ln())).exp())
            } else {
                None
            },
        };
        match settings_behavior(params, overlaps, &sv) {
            Ok(b) => {
                if is_nonlocal_2222(&b, [0, 1], [0, 1])? {
                    return Ok(sv);
                }
            }
            Err(e) => {
                // remember rejected configurations for diagnostics, but a
                // degenerate draw (e.g. vanishing heralding) is not fatal
                let _ = attempt;
                last_err = Some(e);
            }
        }
    }
    let detail = match last_err {
        Some(e) => format!("no nonlocal configuration found (last model error: {e})"),
        None => "no nonlocal configuration found; every draw was local".to_string(),
    };
    Err(Error::SeedExhausted { attempts, detail })
}
