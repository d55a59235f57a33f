use crate::error::{Error, Result};

/// HOM visibility of two photons from the same emitter subject to pure
/// dephasing: V = gamma / (gamma + 2 gamma_d).
pub fn visibility_from_dephasing(gamma: f64, gamma_d: f64) -> Result<f64> {
    if !gamma.is_finite() || !gamma_d.is_finite() || gamma <= 0.0 || gamma_d < 0.0 {
        return Err(Error::domain(format!(
            "visibility_from_dephasing(gamma={gamma}, gamma_d={gamma_d})"
        )));
    }
    Ok(gamma / (gamma + 2.0 * gamma_d))
}

/// Cross-station visibility including slow spectral wandering of width
/// `sigma`:
///
/// V_beta = sqrt(pi/2) (gamma/sigma) exp((gamma+2 gamma_d)^2 / (2 sigma^2))
///          erfc((gamma+2 gamma_d) / (sqrt(2) sigma)).
///
/// At sigma = 0 this reduces to the same-station value gamma/(gamma+2 gamma_d).
pub fn cross_visibility(gamma: f64, gamma_d: f64, sigma: f64) -> Result<f64> {
    if !gamma.is_finite() || !gamma_d.is_finite() || !sigma.is_finite() {
        return Err(Error::domain("cross_visibility: non-finite input".to_string()));
    }
    if gamma <= 0.0 || gamma_d < 0.0 || sigma < 0.0 {
        return Err(Error::domain(format!(
            "cross_visibility(gamma={gamma}, gamma_d={gamma_d}, sigma={sigma})"
        )));
    }
    if sigma == 0.0 {
        return visibility_from_dephasing(gamma, gamma_d);
    }
    let z = (gamma + 2.0 * gamma_d) / (std::f64::consts::SQRT_2 * sigma);
    // exp(z^2) erfc(z) evaluated without overflow (scaled complementary
    // error function).
    Ok((std::f64::consts::PI / 2.0).sqrt() * (gamma / sigma) * erfcx(z))
}

/// Scaled complementary error function exp(x^2) erfc(x) for x >= 0.
///
/// Series for small x, Laplace continued fraction for large x; relative
/// accuracy around 1e-13 over the domain used here.
pub fn erfcx(x: f64) -> f64 {
    assert!(x >= 0.0, "erfcx defined here for x >= 0");
    if x < 1.5 {
        // erf via its Maclaurin series, then exp(x^2)(1 - erf(x)).
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        let mut n = 0u32;
        while term.abs() > 1e-18 * sum.abs().max(1.0) {
            n += 1;
            term *= -x2 / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        let erf = 2.0 / std::f64::consts::PI.sqrt() * sum;
        (x * x).exp() * (1.0 - erf)
    } else {
        // Laplace continued fraction:
        // erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut f = 0.0;
        for k in (1..=80u32).rev() {
            f = (k as f64 / 2.0) / (x + f);
        }
        1.0 / (std::f64::consts::PI.sqrt() * (x + f))
    }
}

/// Two-photon emission probability solving g2 = 2 P2 / (P1 + 2 P2)^2 to
/// first order in P2, i.e. P2 = g2 * P1^2 / 2.
pub fn g2_to_p2(g2: f64, p1: f64) -> Result<f64> {
    if !g2.is_finite() || g2 < 0.0 {
        return Err(Error::domain(format!("g2 = {g2} must be >= 0")));
    }
    if !(0.0 < p1 && p1 <= 1.0) {
        return Err(Error::domain(format!("p1 = {p1} outside (0,1]")));
    }
    let p2 = g2 * p1 * p1 / 2.0;
    if p2 > 0.25 {
        return Err(Error::domain(format!(
            "P2 = {p2} too large for the first-order expansion"
        )));
    }
    Ok(p2)
}

/// Fiber transmission towards the midpoint station: eta_t = exp(-L / (2 L0)).
pub fn transmission_efficiency(l_km: f64, l0_km: f64) -> Result<f64> {
    if !(l_km >= 0.0) || !l_km.is_finite() {
        return Err(Error::domain(format!("distance L = {l_km} must be >= 0")));
    }
    if !(l0_km > 0.0) || !l0_km.is_finite() {
        return Err(Error::domain(format!(
            "attenuation length L0 = {l0_km} must be > 0"
        )));
    }
    Ok((-l_km / (2.0 * l0_km)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn visibility_limits() {
        assert_relative_eq!(visibility_from_dephasing(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(visibility_from_dephasing(1.0, 0.5).unwrap(), 0.5);
        // inversion: gamma_d/gamma = (1-V)/(2V) for a target V
        let v = 0.95;
        let gd = (1.0 - v) / (2.0 * v);
        assert_relative_eq!(gd, 0.026315789473684213, epsilon = 1e-12);
        assert_relative_eq!(visibility_from_dephasing(1.0, gd).unwrap(), v, epsilon = 1e-12);
    }

    #[test]
    fn visibility_rejects_bad_inputs() {
        assert!(visibility_from_dephasing(0.0, 0.0).is_err());
        assert!(visibility_from_dephasing(1.0, -0.1).is_err());
        assert!(visibility_from_dephasing(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn cross_visibility_no_wandering_limit() {
        // sigma -> 0+ with no dephasing approaches 1
        let v = cross_visibility(1.0, 0.0, 1e-6).unwrap();
        assert!((v - 1.0).abs() < 1e-5, "v = {v}");
        assert_relative_eq!(cross_visibility(1.0, 0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn cross_visibility_quadrature_oracle() {
        // V_beta at gamma=1, gamma_d=0, sigma=1 summarizes the overlap
        // integral sqrt(2/pi) * Int_0^inf exp(-s^2/2) * exp(-s)-free form:
        // independent oracle by direct numerical quadrature of
        // sqrt(2/pi) Int_0^inf ds exp(-s^2/2) gamma/(gamma+2gd) ... here the
        // closed form reduces to sqrt(pi/2) e^{1/2} erfc(1/sqrt 2).
        // Quadrature of I = Int_0^inf e^{-u} e^{-u^2/2} du equals
        // sqrt(pi/2) e^{1/2} erfc(1/sqrt2); trapezoid on a fine grid.
        let f = |u: f64| (-u - u * u / 2.0).exp();
        let (mut acc, h) = (0.0, 1e-5);
        let mut u = 0.0;
        while u < 30.0 {
            acc += h * (f(u) + f(u + h)) / 2.0;
            u += h;
        }
        let v = cross_visibility(1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(v, acc, epsilon = 1e-8);
    }

    #[test]
    fn cross_visibility_monotone_in_sigma() {
        let v1 = cross_visibility(1.0, 0.0, 1.0).unwrap();
        let v2 = cross_visibility(1.0, 0.0, 2.0).unwrap();
        assert!(v2 < v1);
        assert!(v1 < 1.0 && v1 > 0.0);
    }

    #[test]
    fn g2_round_trip() {
        assert_relative_eq!(g2_to_p2(0.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(g2_to_p2(0.01, 1.0).unwrap(), 0.005);
        // substituting back into the exact relation recovers g2 up to O(P2^2)
        let g2 = 0.02;
        let p1 = 0.9;
        let p2 = g2_to_p2(g2, p1).unwrap();
        let g2_back = 2.0 * p2 / (p1 + 2.0 * p2).powi(2);
        // the back-substituted value differs at relative order 4 P2 / P1
        assert!((g2_back - g2).abs() < 5.0 * p2 / p1 * g2);
    }

    #[test]
    fn transmission() {
        assert_relative_eq!(transmission_efficiency(0.0, 22.0).unwrap(), 1.0);
        assert_relative_eq!(
            transmission_efficiency(44.0, 22.0).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert!(transmission_efficiency(10.0, 0.0).is_err());
    }
}
