//! Assembly of `sigma^2(xi, kappa)` and `tau^2(xi, kappa)` from the
//! universal constants and the density integrals `I_rho(kappa)`.
//!
//! Every built-in functional has a scaling law in the intensity, so the
//! integrals over `y ~ kappa` reduce to `I_rho` values and log-density
//! moments:
//! - scale invariant: `V(a) = V`, `delta(a) = delta`;
//! - homogeneous of order `beta`: `V(a) = a^{-2 beta/m} V`, `delta(a) = a^{-beta/m} delta`;
//! - `psi`: `V(a) = (log a)^2 + V - 2 delta log a`, `delta(a) = delta - log a`;
//! - `phi_k`: `V(a) = sum_j J_{k,j} (a beta^m)^{2k+1-j}`, `delta(a) = (k+1)(a beta^m)^k J_{k,k+1}`.

use serde::{Deserialize, Serialize};

use super::{delta_xi_mc, j_integral, n1_alpha_delta, psi_delta, psi_delta_reported, v_xi_mc, Estimate, MCIntegrationParams};
use crate::error::{invalid, Result};
use crate::functionals::{FunctionalKind, PointFunctional};
use crate::geometry::Density;

/// Samples per `J_{k,j}` integral when the clique variance is assembled
/// through [`sigma2`].
pub const J_SAMPLES: usize = 1 << 21;

/// All limiting constants of one functional on one density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub functional: PointFunctional,
    pub m: usize,
    /// `V^xi = V^xi(1)`.
    pub v_xi: Estimate,
    /// `delta^xi = delta^xi(1)`.
    pub delta_xi: Estimate,
    /// Binomial-input limit of `n^{-1} Var`.
    pub sigma2: Estimate,
    /// Poisson-input limit of `lambda^{-1} Var`.
    pub tau2: Estimate,
    /// The alternative assembly found in the literature, when it differs:
    /// `m^2/(k-3) - delta^2` for `zeta_k`, `V - m^{-2} + Var log kappa`
    /// for `psi`, and the `I_k` form for cliques.
    pub sigma2_alternative: Option<Estimate>,
}

/// `V - d^2` with first-order error propagation.
fn minus_square(v: Estimate, d: Estimate) -> Estimate {
    let value = v.value - d.value * d.value;
    let se = (v.se.powi(2) + (2.0 * d.value * d.se).powi(2)).sqrt();
    if v.se == 0.0 && d.se == 0.0 {
        Estimate::exact(value)
    } else {
        Estimate::mc(value, se)
    }
}

fn scaled(e: Estimate, c: f64, shift: f64) -> Estimate {
    Estimate {
        value: c * e.value + shift,
        se: c.abs() * e.se,
        provenance: e.provenance,
    }
}

/// `sigma^2(xi, kappa)`, `tau^2(xi, kappa)` and the constants behind them.
///
/// `params` drives the Monte Carlo parts at intensity 1 (see
/// [`MCIntegrationParams::auto`]). For `phi_k` only its seed is used.
pub fn sigma2(xi: &PointFunctional, density: &Density, params: &MCIntegrationParams) -> Result<LimitConstants> {
    density.validate()?;
    let m = density.intrinsic_dim();
    let mf = m as f64;
    match xi.kind {
        FunctionalKind::ZetaK { k } => {
            let v = v_xi_mc(xi, 1.0, m, params)?.v;
            let d = delta_xi_mc(xi, 1.0, m, params)?.delta;
            let printed = Estimate::exact(mf * mf / (k as f64 - 3.0));
            Ok(LimitConstants {
                functional: *xi,
                m,
                v_xi: v,
                delta_xi: d,
                sigma2: minus_square(v, d),
                tau2: v,
                sigma2_alternative: (k > 3).then(|| minus_square(printed, d)),
            })
        }
        FunctionalKind::N1Alpha { alpha } => {
            let i2 = density.true_i_rho(1.0 - 2.0 * alpha / mf)?;
            let i1 = density.true_i_rho(1.0 - alpha / mf)?;
            let v = v_xi_mc(xi, 1.0, m, params)?.v;
            let d = Estimate::exact(n1_alpha_delta(m, alpha)?);
            let tau2 = scaled(v, i2, 0.0);
            Ok(LimitConstants {
                functional: *xi,
                m,
                v_xi: v,
                delta_xi: d,
                sigma2: minus_square(tau2, scaled(d, i1, 0.0)),
                tau2,
                sigma2_alternative: None,
            })
        }
        FunctionalKind::Psi => {
            let var_log = density.true_var_log_density()?;
            let (e_log, e_log2) = density.log_density_moments()?;
            let v = v_xi_mc(xi, 1.0, m, params)?.v;
            let d = psi_delta(m)?;
            let alt = psi_delta_reported(m);
            Ok(LimitConstants {
                functional: *xi,
                m,
                v_xi: v,
                delta_xi: Estimate::exact(d),
                sigma2: scaled(v, 1.0, -d * d + var_log),
                tau2: scaled(v, 1.0, e_log2 - 2.0 * d * e_log),
                sigma2_alternative: Some(scaled(v, 1.0, -alt * alt + var_log)),
            })
        }
        FunctionalKind::PhiK { k, beta } => {
            let c = sigma2_clique(k, beta, density, J_SAMPLES, params.seed)?;
            Ok(LimitConstants {
                functional: *xi,
                m,
                v_xi: c.v_xi,
                delta_xi: c.delta_xi,
                sigma2: c.corrected,
                tau2: c.tau2,
                sigma2_alternative: Some(c.printed),
            })
        }
    }
}

/// `tau^2(xi, kappa)`.
pub fn tau2(xi: &PointFunctional, density: &Density, params: &MCIntegrationParams) -> Result<Estimate> {
    Ok(sigma2(xi, density, params)?.tau2)
}

/// The two assemblies of the clique-count variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliqueVariance {
    /// `J_{k,1}, ..., J_{k,k+1}`.
    pub j: Vec<Estimate>,
    /// `V^{phi_k}(1)`.
    pub v_xi: Estimate,
    /// `delta^{phi_k}(1) = (k+1) beta^{mk} J_{k,k+1}`.
    pub delta_xi: Estimate,
    /// `sum_j J_{k,j} beta^{m(2k+1-j)} I_{2k+2-j} - ((k+1) beta^{mk} J_{k,k+1} I_k)^2`.
    pub printed: Estimate,
    /// Same with `I_{k+1}` in the subtracted term.
    pub corrected: Estimate,
    /// `sum_j J_{k,j} beta^{m(2k+1-j)} I_{2k+2-j}`.
    pub tau2: Estimate,
}

/// Clique-count variance constants for `Cl_k` at scale `beta`.
pub fn sigma2_clique(k: usize, beta: f64, density: &Density, samples: usize, seed: u64) -> Result<CliqueVariance> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    density.validate()?;
    let m = density.intrinsic_dim();
    let j: Vec<Estimate> = (1..=k + 1)
        .map(|jj| j_integral(k, jj, m, samples, seed))
        .collect::<Result<_>>()?;
    let bm = beta.powi(m as i32);
    let mut first = 0.0;
    let mut v = 0.0;
    let mut grad = Vec::with_capacity(k + 1);
    for (idx, e) in j.iter().enumerate() {
        let jj = idx + 1;
        let w = bm.powi((2 * k + 1 - jj) as i32);
        let ir = density.true_i_rho((2 * k + 2 - jj) as f64)?;
        first += e.value * w * ir;
        v += e.value * w;
        grad.push(w * ir);
    }
    let jtop = j[k];
    let coef = (k as f64 + 1.0) * bm.powi(k as i32);
    let i_k = density.true_i_rho(k as f64)?;
    let i_k1 = density.true_i_rho(k as f64 + 1.0)?;
    let assemble = |ir: f64| {
        let t = coef * jtop.value * ir;
        let mut g = grad.clone();
        g[k] -= 2.0 * t * coef * ir;
        let se = j.iter().zip(&g).map(|(e, gi)| (e.se * gi).powi(2)).sum::<f64>().sqrt();
        (first - t * t, se)
    };
    let mc = j.iter().any(|e| e.se > 0.0);
    let mk = |value: f64, se: f64| if mc { Estimate::mc(value, se) } else { Estimate::exact(value) };
    let (p, pse) = assemble(i_k);
    let (c, cse) = assemble(i_k1);
    let tau_se = j.iter().zip(&grad).map(|(e, gi)| (e.se * gi).powi(2)).sum::<f64>().sqrt();
    let v_se = j
        .iter()
        .enumerate()
        .map(|(idx, e)| (e.se * bm.powi((2 * k - idx) as i32)).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(CliqueVariance {
        v_xi: mk(v, v_se),
        delta_xi: mk(coef * jtop.value, coef * jtop.se),
        printed: mk(p, pse),
        corrected: mk(c, cse),
        tau2: mk(first, tau_se),
        j,
    })
}
