//! Limiting constants: closed forms where they exist, Monte Carlo otherwise.
//!
//! Notation: `H_a` is a homogeneous Poisson process of intensity `a` on
//! `R^m`, `V^xi(a)` and `delta^xi(a)` are the second-order and add-one
//! constants of a functional, and `sigma2`/`tau2` are the limiting
//! per-point variances under binomial and Poisson input.

mod assembly;
mod jint;
mod mc;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use assembly::{sigma2, sigma2_clique, tau2, CliqueVariance, LimitConstants, J_SAMPLES};
pub use jint::{j_integral, j_integral_mc};
pub use mc::{
    delta_xi_add_one, delta_xi_mc, origin_values, origin_view, stabilization_margin, v_xi_mc, DeltaEstimate,
    MCIntegrationParams, VarianceEstimate,
};

/// Where a constant came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    MonteCarlo,
}

/// A value with its standard error (0 for closed forms).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub provenance: Provenance,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            se: 0.0,
            provenance: Provenance::ClosedForm,
        }
    }

    pub fn mc(value: f64, se: f64) -> Self {
        Estimate {
            value,
            se,
            provenance: Provenance::MonteCarlo,
        }
    }

    /// `|self - target| <= z * se`, allowing rounding-level slack.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.se + 1e-12 * target.abs().max(1.0)
    }
}

/// Volume of the unit ball in `R^m`, `pi^{m/2} / Gamma(1 + m/2)`, by the
/// recurrence `omega_m = omega_{m-2} 2 pi / m`.
pub fn omega(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => omega(m - 2) * 2.0 * PI / m as f64,
    }
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Mean and variance of `zeta_k(0, H_a)`: `(m, m^2/(k-3))`, free of `a`.
pub fn zeta_moments(k: usize, m: usize) -> Result<(f64, f64)> {
    if k <= 3 {
        return Err(invalid(format!("zeta_k has finite variance only for k > 3, got {k}")));
    }
    let m = m as f64;
    Ok((m, m * m / (k as f64 - 3.0)))
}

/// `E zeta_k(0, H_a)^2 = m^2 (k-2)/(k-3)`.
pub fn zeta_second_moment(k: usize, m: usize) -> Result<f64> {
    let (mean, var) = zeta_moments(k, m)?;
    Ok(var + mean * mean)
}

fn check_alpha(m: usize, alpha: f64) -> Result<()> {
    if m == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(alpha > -(m as f64)) {
        return Err(invalid(format!("need alpha > -m, got alpha = {alpha}, m = {m}")));
    }
    Ok(())
}

/// `E N_1(0, H)^alpha = pi^{-alpha/2} Gamma(1+m/2)^{alpha/m} Gamma(1+alpha/m)`.
pub fn n1_alpha_mean(m: usize, alpha: f64) -> Result<f64> {
    check_alpha(m, alpha)?;
    let mf = m as f64;
    Ok(PI.powf(-alpha / 2.0) * gamma(1.0 + mf / 2.0).powf(alpha / mf) * gamma(1.0 + alpha / mf))
}

/// `delta^{N_1^alpha} = (1 - alpha/m) omega_m^{-alpha/m} Gamma(1+alpha/m)`.
pub fn n1_alpha_delta(m: usize, alpha: f64) -> Result<f64> {
    check_alpha(m, alpha)?;
    let mf = m as f64;
    Ok((1.0 - alpha / mf) * omega(m).powf(-alpha / mf) * gamma(1.0 + alpha / mf))
}

/// Mean and variance of `psi(0, H_a)`: `(-log a, pi^2/6)`.
pub fn psi_moments(a: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) {
        return Err(invalid(format!("intensity must be positive, got {a}")));
    }
    Ok((-a.ln(), PI * PI / 6.0))
}

/// `delta^psi = delta^psi(1)`.
///
/// `a E psi(0, H_a) = -a log a`, and `delta^xi(a)` is the derivative of
/// `a E xi(0, H_a)` in `a`, so `delta^psi(a) = -log a - 1` in every
/// dimension.
pub fn psi_delta(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    Ok(-1.0)
}

/// The value `-1/m` that appears in the literature for `delta^psi`. Kept
/// for side-by-side reporting; [`psi_delta`] is the one the library uses.
pub fn psi_delta_reported(m: usize) -> f64 {
    -1.0 / m as f64
}

/// `delta^{zeta_k} = m`, by the same derivative identity as [`psi_delta`].
pub fn zeta_delta(m: usize) -> f64 {
    m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn omega_values() {
        assert_abs_diff_eq!(omega(1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(omega(2), PI, epsilon = 1e-14);
        assert_abs_diff_eq!(omega(3), 4.0 * PI / 3.0, epsilon = 1e-13);
        for m in 1..12 {
            let h = m as f64 / 2.0;
            assert_abs_diff_eq!(omega(m), PI.powf(h) / gamma(1.0 + h), epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_accuracy() {
        assert_abs_diff_eq!(gamma(1.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gamma(0.5), PI.sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(gamma(5.0), 24.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(20.0), 39.339_884_187_199_49, epsilon = 1e-11);
    }

    #[test]
    fn zeta_moment_values() {
        let (mu, v) = zeta_moments(10, 2).unwrap();
        assert_eq!(mu, 2.0);
        assert_abs_diff_eq!(v, 4.0 / 7.0, epsilon = 1e-15);
        assert_eq!(zeta_moments(4, 1).unwrap(), (1.0, 1.0));
        assert_eq!(zeta_moments(5, 3).unwrap(), (3.0, 4.5));
        assert!(zeta_moments(3, 2).is_err());
        assert_abs_diff_eq!(zeta_second_moment(10, 2).unwrap(), 32.0 / 7.0, epsilon = 1e-14);
    }

    #[test]
    fn n1_alpha_values() {
        assert_abs_diff_eq!(n1_alpha_mean(2, 2.0).unwrap(), 1.0 / PI, epsilon = 1e-14);
        assert_abs_diff_eq!(n1_alpha_mean(1, 1.0).unwrap(), 0.5, epsilon = 1e-14);
        for m in 1..5 {
            assert_abs_diff_eq!(n1_alpha_mean(m, 0.0).unwrap(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(n1_alpha_delta(m, m as f64).unwrap(), 0.0, epsilon = 1e-15);
        }
        // (1/2) pi^{-1/2} Gamma(3/2) = 1/4
        assert_abs_diff_eq!(n1_alpha_delta(2, 1.0).unwrap(), 0.25, epsilon = 1e-14);
        assert!(n1_alpha_mean(2, -2.0).is_err());
    }

    #[test]
    fn n1_alpha_mean_by_quadrature() {
        // E N_1^alpha = int_0^inf P(N_1^alpha > s) ds = int_0^inf exp(-omega s^{m/alpha}) ds
        for (m, alpha) in [(1usize, 1.0f64), (2, 2.0), (2, 0.5), (3, 1.5)] {
            let w = omega(m);
            let p = m as f64 / alpha;
            let n = 200_000;
            let top = (40.0 / w).powf(1.0 / p);
            let h = top / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                s += (-w * ((i as f64 + 0.5) * h).powf(p)).exp();
            }
            assert_abs_diff_eq!(s * h, n1_alpha_mean(m, alpha).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn psi_values() {
        let (mu, v) = psi_moments(1.0).unwrap();
        assert_abs_diff_eq!(mu, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 1.644_934_066_848_226, epsilon = 1e-14);
        assert_abs_diff_eq!(psi_moments(std::f64::consts::E).unwrap().0, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi_moments((2.0f64).exp()).unwrap().0, -2.0, epsilon = 1e-15);
        assert!(psi_moments(0.0).is_err());
        assert_eq!(psi_delta(3).unwrap(), -1.0);
        assert_eq!(psi_delta_reported(2), -0.5);
    }
}
