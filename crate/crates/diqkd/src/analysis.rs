//! Derived statistics of a behavior: correlators, CHSH score, local-polytope
//! membership, and the noisy-preprocessing transformation.

use crate::error::{Error, Result};
use crate::photonic::Behavior;

/// CHSH evaluation at a fixed input pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshReport {
    /// S = E(x0,y0) + E(x1,y0) + E(x0,y1) - E(x1,y1).
    pub score: f64,
    /// (x0, x1, y0, y1) input indices used.
    pub inputs: (usize, usize, usize, usize),
    /// correlators[i][j] = E(x_i, y_j).
    pub correlators: [[f64; 2]; 2],
}

/// Two-outcome correlator E(x,y) = sum_{a,b} (-1)^{a xor b} p(a,b|x,y).
pub fn correlator(b: &Behavior, x: usize, y: usize) -> Result<f64> {
    if x >= 2 || y >= 3 {
        return Err(Error::domain(format!("correlator input ({x},{y}) out of range")));
    }
    Ok(b.p[x][y][0][0] + b.p[x][y][1][1] - b.p[x][y][0][1] - b.p[x][y][1][0])
}

/// CHSH score at the given pairing (x0, x1, y0, y1).
pub fn chsh_score(b: &Behavior, inputs: (usize, usize, usize, usize)) -> Result<ChshReport> {
    let (x0, x1, y0, y1) = inputs;
    let e = [
        [correlator(b, x0, y0)?, correlator(b, x0, y1)?],
        [correlator(b, x1, y0)?, correlator(b, x1, y1)?],
    ];
    Ok(ChshReport {
        score: e[0][0] + e[1][0] + e[0][1] - e[1][1],
        inputs,
        correlators: e,
    })
}

/// Whether the restriction of the behavior to inputs `xs` x `ys` lies outside
/// the 2222 local polytope.
///
/// For no-signaling behaviors this is equivalent to one of the eight CHSH
/// symmetrizations exceeding 2; the tolerance avoids classifying numerically
/// marginal points as nonlocal.
pub fn is_nonlocal_2222(b: &Behavior, xs: [usize; 2], ys: [usize; 2]) -> Result<bool> {
    let e = [
        [correlator(b, xs[0], ys[0])?, correlator(b, xs[0], ys[1])?],
        [correlator(b, xs[1], ys[0])?, correlator(b, xs[1], ys[1])?],
    ];
    // place the minus sign on each of the four terms; both global signs are
    // covered by the absolute value
    for flip in 0..4usize {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let sign = if 2 * i + j == flip { -1.0 } else { 1.0 };
                s += sign * e[i][j];
            }
        }
        if s.abs() > 2.0 + 1e-9 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Bit-flip preprocessing of Alice's key-generation data: her outcome is
/// flipped with probability `q` on the key pair (x = 0, y = 2) only, leaving
/// the Bell-test cells untouched.
///
/// The returned table is intended for conditional-entropy evaluation of the
/// key data; the flipped cell intentionally differs from the no-signaling
/// extension of the unflipped ones.
pub fn apply_preprocessing(b: &Behavior, q: f64) -> Result<Behavior> {
    if !(0.0..=0.5).contains(&q) || !q.is_finite() {
        return Err(Error::domain(format!("preprocessing q = {q} outside [0, 0.5]")));
    }
    let mut out = b.clone();
    for bb in 0..2 {
        let p0 = b.p[0][2][0][bb];
        let p1 = b.p[0][2][1][bb];
        out.p[0][2][0][bb] = (1.0 - q) * p0 + q * p1;
        out.p[0][2][1][bb] = q * p0 + (1.0 - q) * p1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform() -> Behavior {
        Behavior { p: [[[[0.25; 2]; 2]; 3]; 2], p_herald: 1.0 }
    }

    fn correlated() -> Behavior {
        let mut p = [[[[0.0; 2]; 2]; 3]; 2];
        for x in 0..2 {
            for y in 0..3 {
                p[x][y][0][0] = 0.5;
                p[x][y][1][1] = 0.5;
            }
        }
        Behavior { p, p_herald: 1.0 }
    }

    #[test]
    fn correlator_basics() {
        assert_relative_eq!(correlator(&uniform(), 0, 0).unwrap(), 0.0);
        assert_relative_eq!(correlator(&correlated(), 1, 2).unwrap(), 1.0);
        assert!(correlator(&uniform(), 2, 0).is_err());
        assert!(correlator(&uniform(), 0, 3).is_err());
    }

    #[test]
    fn chsh_consistency() {
        let rep = chsh_score(&correlated(), (0, 1, 0, 1)).unwrap();
        assert_relative_eq!(rep.score, 2.0);
        let recompute = rep.correlators[0][0] + rep.correlators[1][0] + rep.correlators[0][1]
            - rep.correlators[1][1];
        assert!((rep.score - recompute).abs() < 1e-12);
    }

    #[test]
    fn deterministic_behaviors_are_local() {
        // all 16 deterministic strategies on the 2x2 restriction
        for da0 in 0..2usize {
            for da1 in 0..2usize {
                for db0 in 0..2usize {
                    for db1 in 0..2usize {
                        let mut p = [[[[0.0; 2]; 2]; 3]; 2];
                        let a = [da0, da1];
                        let b = [db0, db1, db0];
                        for x in 0..2 {
                            for y in 0..3 {
                                p[x][y][a[x]][b[y]] = 1.0;
                            }
                        }
                        let beh = Behavior { p, p_herald: 1.0 };
                        assert!(!is_nonlocal_2222(&beh, [0, 1], [0, 1]).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn preprocessing_identity_and_randomization() {
        let b = correlated();
        let same = apply_preprocessing(&b, 0.0).unwrap();
        assert_eq!(same.p, b.p);
        let mixed = apply_preprocessing(&b, 0.5).unwrap();
        // Alice's key-cell marginal becomes uniform
        let ma = mixed.p[0][2][0][0] + mixed.p[0][2][0][1];
        assert_relative_eq!(ma, 0.5);
        // Bell-test cells untouched
        let s0 = chsh_score(&b, (0, 1, 0, 1)).unwrap().score;
        let s1 = chsh_score(&mixed, (0, 1, 0, 1)).unwrap().score;
        assert!((s0 - s1).abs() < 1e-12);
        assert!(apply_preprocessing(&b, 0.6).is_err());
    }
}
