//! The dimension, entropy, volume and clique-count statistics, each paired
//! with its large-sample limit when the density provides one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{gamma, j_integral, omega};
use crate::error::{invalid, Error, Result};
use crate::functionals::{psi_from_n1, zeta_from_distances, RadiusGraph};
use crate::geometry::{Density, PointCloud};
use crate::spatial::SpatialIndex;

/// Samples for `J_{k,k+1}` when no closed form exists.
const J_SAMPLES: usize = 1 << 20;

/// A statistic on a cloud of size `n` and the value it converges to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithLimit {
    pub statistic_name: String,
    pub n: usize,
    pub value: f64,
    pub theoretical_limit: Option<f64>,
}

impl EstimateWithLimit {
    fn new(name: impl Into<String>, n: usize, value: f64, limit: Option<f64>) -> Self {
        EstimateWithLimit {
            statistic_name: name.into(),
            n,
            value,
            theoretical_limit: limit,
        }
    }

    pub fn abs_bias(&self) -> Option<f64> {
        self.theoretical_limit.map(|l| (self.value - l).abs())
    }
}

/// `N_1` for every point (`+inf` for a singleton).
pub fn nearest_distances(cloud: &PointCloud) -> Vec<f64> {
    let index = SpatialIndex::build(cloud);
    (0..cloud.len())
        .into_par_iter()
        .map(|i| index.knn_query(cloud.point(i), 1, Some(i)).first().map_or(f64::INFINITY, |p| p.0))
        .collect()
}

/// Per-point `zeta_{k,rho}` values.
pub fn dim_values(cloud: &PointCloud, k: usize, rho: f64) -> Result<Vec<f64>> {
    if k < 3 {
        return Err(invalid(format!("k must be at least 3, got {k}")));
    }
    if !(rho > 0.0) {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    let index = SpatialIndex::build(cloud);
    Ok((0..cloud.len())
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            index.knn_distances_into(cloud.point(i), k, Some(i), buf);
            if buf[k - 1] <= rho {
                zeta_from_distances(buf, k)
            } else {
                0.0
            }
        })
        .collect())
}

/// `m_hat_{k,rho}`: the mean of `zeta_{k,rho}` over the cloud. The limit
/// is the intrinsic dimension.
pub fn dim_estimate(cloud: &PointCloud, k: usize, rho: f64) -> Result<EstimateWithLimit> {
    let vals = dim_values(cloud, k, rho)?;
    let value = if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    Ok(EstimateWithLimit::new(
        format!("dim_k{k}"),
        cloud.len(),
        value,
        Some(cloud.intrinsic_dim() as f64),
    ))
}

/// `omega_m^{-alpha/m} Gamma(1 + alpha/m)`.
pub fn r_alpha_constant(m: usize, alpha: f64) -> f64 {
    let mf = m as f64;
    omega(m).powf(-alpha / mf) * gamma(1.0 + alpha / mf)
}

fn n1_power_sum(n1: &[f64], alpha: f64) -> f64 {
    n1.iter().filter(|d| d.is_finite()).map(|d| d.powf(alpha)).sum()
}

/// `n^{-1} R^alpha(n^{1/m} Y) = n^{alpha/m - 1} sum N_1^alpha`, with limit
/// `omega_m^{-alpha/m} Gamma(1+alpha/m) I_{1-alpha/m}(kappa)`.
pub fn r_alpha_statistic(cloud: &PointCloud, alpha: f64, density: Option<&Density>) -> Result<EstimateWithLimit> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(invalid(format!("alpha must be finite and nonzero, got {alpha}")));
    }
    let n = cloud.len();
    let m = cloud.intrinsic_dim();
    let mf = m as f64;
    let value = if n == 0 {
        0.0
    } else {
        let nf = n as f64;
        nf.powf(alpha / mf - 1.0) * n1_power_sum(&nearest_distances(cloud), alpha)
    };
    let limit = density.and_then(|d| d.true_i_rho(1.0 - alpha / mf).ok()).map(|i| r_alpha_constant(m, alpha) * i);
    Ok(EstimateWithLimit::new(format!("r_alpha({alpha})"), n, value, limit))
}

/// `omega_m sum N_1^m`, converging to the volume of the support.
pub fn volume_estimate(cloud: &PointCloud, density: Option<&Density>) -> Result<EstimateWithLimit> {
    let m = cloud.intrinsic_dim();
    let value = omega(m) * n1_power_sum(&nearest_distances(cloud), m as f64);
    let limit = density.and_then(|d| d.support_volume());
    Ok(EstimateWithLimit::new("volume", cloud.len(), value, limit))
}

/// `n^{-1} sum (psi(y, Y) + log n)`, converging to the Shannon entropy.
pub fn shannon_estimate(cloud: &PointCloud, density: Option<&Density>) -> Result<EstimateWithLimit> {
    let n = cloud.len();
    let m = cloud.intrinsic_dim();
    let value = if n < 2 {
        0.0
    } else {
        let ln_n = (n as f64).ln();
        let total: f64 = nearest_distances(cloud).iter().map(|&d| psi_from_n1(d, m) + ln_n).sum();
        total / n as f64
    };
    let limit = density.and_then(|d| d.true_shannon().ok());
    Ok(EstimateWithLimit::new("shannon", n, value, limit))
}

/// Renyi and Tsallis entropies of order `rho = 1 - alpha/m` from the plug-in
/// `I_hat = r_alpha / (omega_m^{-alpha/m} Gamma(1+alpha/m))`:
/// `((1-rho)^{-1} log I_hat, (rho-1)^{-1} (1 - I_hat))`.
pub fn renyi_tsallis_estimates(cloud: &PointCloud, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let m = cloud.intrinsic_dim();
    let r = r_alpha_statistic(cloud, alpha, None)?.value;
    renyi_tsallis_from_i(r / r_alpha_constant(m, alpha), 1.0 - alpha / m as f64)
}

/// Renyi and Tsallis entropies of order `rho` given `I_rho`.
pub fn renyi_tsallis_from_i(i_rho: f64, rho: f64) -> Result<(f64, f64)> {
    if !(i_rho > 0.0) {
        return Err(Error::NonPositiveEstimate(i_rho));
    }
    if rho == 1.0 {
        return Err(invalid("order 1 is the Shannon entropy"));
    }
    Ok((i_rho.ln() / (1.0 - rho), (1.0 - i_rho) / (rho - 1.0)))
}

/// Number of `(k+1)`-cliques of the closed-ball graph at `radius`.
pub fn clique_count_raw(cloud: &PointCloud, k: usize, radius: f64) -> Result<u64> {
    if !(radius > 0.0) {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    let index = SpatialIndex::build(cloud);
    Ok(RadiusGraph::build(&index, radius).count_cliques(k + 1))
}

/// `beta^{mk} J_{k,k+1} I_{k+1}(kappa)`.
pub fn clique_limit(k: usize, beta: f64, density: &Density) -> Result<f64> {
    let m = density.intrinsic_dim();
    let j = j_integral(k, k + 1, m, J_SAMPLES, 0)?.value;
    Ok(beta.powi((m * k) as i32) * j * density.true_i_rho(k as f64 + 1.0)?)
}

/// Clique count of the Rips complex at scale `beta`.
///
/// Unscaled: the raw count `Cl_k^{(beta)}(Y)`, no limit. Scaled: the
/// normalized count `n^{-1} Cl_k^{(beta)}(n^{1/m} Y)`, computed at radius
/// `beta n^{-1/m}`, with limit `beta^{mk} J_{k,k+1} I_{k+1}(kappa)`.
pub fn clique_count(
    cloud: &PointCloud,
    k: usize,
    beta: f64,
    scaled: bool,
    density: Option<&Density>,
) -> Result<EstimateWithLimit> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    let n = cloud.len();
    if !scaled {
        let c = clique_count_raw(cloud, k, beta)?;
        return Ok(EstimateWithLimit::new(format!("clique_k{k}"), n, c as f64, None));
    }
    let m = cloud.intrinsic_dim();
    let value = if n == 0 {
        0.0
    } else {
        let radius = beta * (n as f64).powf(-1.0 / m as f64);
        clique_count_raw(cloud, k, radius)? as f64 / n as f64
    };
    let limit = match density {
        Some(d) => clique_limit(k, beta, d).ok(),
        None => None,
    };
    Ok(EstimateWithLimit::new(format!("clique_k{k}_scaled"), n, value, limit))
}

/// Least-squares fit of `log(n^{-1} Cl_1)` against `log beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFit {
    pub slope: f64,
    pub intercept: f64,
    /// Grid values used in the fit.
    pub used: Vec<f64>,
    /// Grid values dropped because no pair was within them.
    pub excluded: Vec<f64>,
}

/// Ordinary least-squares `(slope, intercept)`.
pub fn regression(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("regression needs at least 2 paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("regression needs distinct abscissae"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Correlation-dimension estimate: slope of `log(n^{-1} Cl_1^{(beta)})`
/// against `log beta` over `beta_grid`.
pub fn correlation_dimension(cloud: &PointCloud, beta_grid: &[f64]) -> Result<CorrelationFit> {
    if beta_grid.len() < 2 {
        return Err(invalid("need at least 2 grid points"));
    }
    if beta_grid.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
        return Err(invalid("grid values must be positive"));
    }
    let n = cloud.len();
    if n == 0 {
        return Err(Error::EmptyInput("cloud".into()));
    }
    let top = beta_grid.iter().copied().fold(0.0, f64::max);
    let index = SpatialIndex::build(cloud);
    let mut dists: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let p = cloud.point(i);
            index
                .within_query(p, top, Some(i))
                .into_iter()
                .filter(move |&j| j > i)
                .map(move |j| crate::spatial::distance(p, cloud.point(j)))
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    let (mut xs, mut ys, mut used, mut excluded) = (vec![], vec![], vec![], vec![]);
    for &b in beta_grid {
        let count = dists.partition_point(|&d| d <= b);
        if count == 0 {
            excluded.push(b);
        } else {
            xs.push(b.ln());
            ys.push((count as f64 / n as f64).ln());
            used.push(b);
        }
    }
    let (slope, intercept) = regression(&xs, &ys)?;
    Ok(CorrelationFit {
        slope,
        intercept,
        used,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn line(xs: &[f64]) -> PointCloud {
        let pts: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        PointCloud::from_points(1, 1, &pts).unwrap()
    }

    #[test]
    fn dim_small_cloud_is_zero() {
        let c = line(&[0.0, 1.0, 3.0]);
        assert_eq!(dim_estimate(&c, 3, f64::INFINITY).unwrap().value, 0.0);
        assert!(dim_estimate(&c, 2, f64::INFINITY).is_err());
    }

    #[test]
    fn dim_is_mean_of_kernels() {
        let c = line(&[0.0, 0.1, 0.35, 0.4, 0.9, 1.7, 2.0]);
        let index = SpatialIndex::build(&c);
        let direct: f64 = (0..c.len())
            .map(|i| crate::functionals::zeta_k_rho(&index, i, 4, 0.8).unwrap())
            .sum::<f64>()
            / c.len() as f64;
        assert_eq!(dim_estimate(&c, 4, 0.8).unwrap().value, direct);
    }

    #[test]
    fn r_alpha_limits() {
        let circle = Density::circle(1.0);
        let c = line(&[0.0, 1.0]);
        let e = r_alpha_statistic(&c, 1.0, Some(&circle)).unwrap();
        assert_abs_diff_eq!(e.theoretical_limit.unwrap(), PI, epsilon = 1e-12);
        let single = line(&[0.0]);
        assert_eq!(r_alpha_statistic(&single, 1.0, None).unwrap().value, 0.0);
        // uniform on volume V: omega^{-a/m} Gamma(1+a/m) V^{a/m}
        let s = Density::sphere(2, 1.0);
        let c3 = PointCloud::from_points(2, 3, &[[1.0, 0.0, 0.0]]).unwrap();
        let lim = r_alpha_statistic(&c3, 1.0, Some(&s)).unwrap().theoretical_limit.unwrap();
        assert_abs_diff_eq!(lim, PI.powf(-0.5) * gamma(1.5) * (4.0 * PI).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn volume_two_points() {
        let t = 0.3;
        let c = line(&[0.0, t]);
        assert_abs_diff_eq!(volume_estimate(&c, None).unwrap().value, 4.0 * t, epsilon = 1e-15);
    }

    #[test]
    fn shannon_singleton() {
        assert_eq!(shannon_estimate(&line(&[2.0]), None).unwrap().value, 0.0);
    }

    #[test]
    fn renyi_tsallis_plugins() {
        let (r, t) = renyi_tsallis_from_i(1.0, 0.5).unwrap();
        assert_eq!((r, t), (0.0, 0.0));
        // uniform on volume V: I_rho = V^{1-rho}
        let v: f64 = 4.0 * PI;
        for rho in [-1.0, 0.5, 2.0] {
            let (r, _) = renyi_tsallis_from_i(v.powf(1.0 - rho), rho).unwrap();
            assert_abs_diff_eq!(r, v.ln(), epsilon = 1e-12);
        }
        assert!(matches!(renyi_tsallis_from_i(0.0, 0.5), Err(Error::NonPositiveEstimate(_))));
        assert!(renyi_tsallis_estimates(&line(&[0.0, 1.0]), -1.0).is_err());
    }

    #[test]
    fn clique_examples() {
        let beta = 1.0;
        let c = line(&[0.0, 0.5 * beta, 2.0 * beta]);
        assert_eq!(clique_count(&c, 1, beta, false, None).unwrap().value, 1.0);
        let tri = PointCloud::from_points(2, 2, &[[0.0, 0.0], [0.9, 0.0], [0.45, 0.779_422_863_405_994_8]]).unwrap();
        assert_eq!(clique_count(&tri, 2, beta, false, None).unwrap().value, 1.0);
        let torus = Density::flat_torus(2, 1.0);
        assert_abs_diff_eq!(clique_limit(1, 0.5, &torus).unwrap(), PI / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn regression_exact() {
        let xs: Vec<f64> = [0.05f64, 0.1, 0.15, 0.2].iter().map(|b| b.ln()).collect();
        let ys: Vec<f64> = [0.05f64, 0.1, 0.15, 0.2].iter().map(|b| (3.0 * b * b).ln()).collect();
        let (s, _) = regression(&xs, &ys).unwrap();
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn correlation_single_pair() {
        let c = line(&[0.0, 0.01]);
        let fit = correlation_dimension(&c, &[0.05, 0.1, 0.2]).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-15);
        let fit = correlation_dimension(&c, &[0.001, 0.05, 0.1]).unwrap();
        assert_eq!(fit.excluded, vec![0.001]);
        assert!(correlation_dimension(&c, &[0.001, 0.002]).is_err());
    }
}
