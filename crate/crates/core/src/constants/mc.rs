//! Monte Carlo estimates of `V^xi(a)` and `delta^xi(a)` on Poisson windows.
//!
//! Both use Palm sampling: every point `x` of `H_a` in an inner window
//! `[-L_in, L_in]^m` is a typical point, and the reduced Palm process at
//! `x` is again `H_a`. With `|W| = (2 L_in)^m`:
//!
//! - `V^xi(a) = E xi(0,H^0)^2 + a int_{|u|<=r} [E xi(0,H^{0,u}) xi(u,H^{0,u}) - mu^2] du`
//!   is estimated by `(sum_x xi_x^2 + sum_{x != y, |x-y|<=r} xi_x xi_y) / (a|W|) - a omega_m r^m mu^2`.
//! - `delta^xi(a) = E xi(0,H^0) + E sum_{y in H} [xi(0,H^0) - xi(0,H^0 \ y)]`
//!   (the add-one integral rewritten by the Mecke formula) is estimated by
//!   removing each point that can influence `xi_x` in turn.
//!
//! The outer window leaves `r_max` plus a stabilization margin around the
//! inner one, so every value used is computed from a complete neighborhood.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{omega, Estimate};
use crate::error::{invalid, Result};
use crate::functionals::{LocalView, PointFunctional};
use crate::geometry::PointCloud;
use crate::pointprocess::HomogeneousWindowProcess;
use crate::rng::stream;
use crate::spatial::SpatialIndex;

const TAG_WINDOW: u64 = 0x5749_4e44;
const TAG_PILOT: u64 = 0x5049_4c4f;
const TAG_ORIGIN: u64 = 0x4f52_4947;
const TAG_ADD_ONE: u64 = 0x4144_4431;

/// Tail probability under which a neighbor count is treated as impossible.
const MARGIN_TAIL: f64 = 1e-12;

/// Window and sampling parameters for the Monte Carlo constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCIntegrationParams {
    /// Outer window half-width `L`.
    pub half_width: f64,
    /// Pair-correlation cutoff radius.
    pub r_max: f64,
    /// Points `u` per replicate for the add-one route.
    pub u_samples: usize,
    pub replicates: usize,
    pub seed: u64,
}

/// Inner-window point count targeted by [`MCIntegrationParams::auto`].
pub const DEFAULT_INNER_POINTS: f64 = 4000.0;
/// Replicates used by [`MCIntegrationParams::auto`].
pub const DEFAULT_REPLICATES: usize = 64;

impl MCIntegrationParams {
    /// Parameters for `xi` at intensity `a` in dimension `m`. All lengths
    /// scale as `a^{-1/m}`, so runs at different intensities with the same
    /// seed see dilated copies of one realization.
    pub fn auto(xi: &PointFunctional, a: f64, m: usize, seed: u64) -> Result<Self> {
        check_common(xi, a, m)?;
        let margin = stabilization_margin(xi, a, m);
        let r_max = match xi.interaction_radius() {
            Some(beta) => 2.0 * beta,
            None => pilot_r_max(xi, a, m, seed)?,
        };
        let inner = 0.5 * (DEFAULT_INNER_POINTS / a).powf(1.0 / m as f64);
        Ok(MCIntegrationParams {
            half_width: inner + r_max + margin,
            r_max,
            u_samples: 4096,
            replicates: DEFAULT_REPLICATES,
            seed,
        })
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Inner window half-width `L - r_max - margin`.
    pub fn inner_half_width(&self, xi: &PointFunctional, a: f64, m: usize) -> f64 {
        self.half_width - self.r_max - stabilization_margin(xi, a, m)
    }

    pub fn validate(&self, xi: &PointFunctional, a: f64, m: usize) -> Result<()> {
        check_common(xi, a, m)?;
        if self.replicates < 2 {
            return Err(invalid("need at least 2 replicates"));
        }
        if self.u_samples < 1 {
            return Err(invalid("need at least 1 u-sample"));
        }
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return Err(invalid(format!("r_max must be positive, got {}", self.r_max)));
        }
        let inner = self.inner_half_width(xi, a, m);
        if !(inner > 0.0) {
            return Err(invalid(format!(
                "window half-width {} does not exceed r_max {} plus margin {}",
                self.half_width,
                self.r_max,
                stabilization_margin(xi, a, m)
            )));
        }
        Ok(())
    }
}

fn check_common(xi: &PointFunctional, a: f64, m: usize) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("intensity must be positive, got {a}")));
    }
    if m == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if xi.truncation.is_finite() {
        return Err(invalid("window constants are defined for untruncated functionals"));
    }
    Ok(())
}

/// Smallest Poisson mean `mu` with `P(Poisson(mu) <= k) < tail`.
fn poisson_quantile_mean(k: usize, tail: f64) -> f64 {
    let cdf = |mu: f64| {
        let mut term = (-mu).exp();
        let mut s = term;
        for j in 1..=k {
            term *= mu / j as f64;
            s += term;
        }
        s
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while cdf(hi) >= tail {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) >= tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Distance beyond which points cannot affect `xi` or any single-point
/// deletion of it, up to probability `1e-12`.
pub fn stabilization_margin(xi: &PointFunctional, a: f64, m: usize) -> f64 {
    if let Some(beta) = xi.interaction_radius() {
        return beta;
    }
    let kk = xi.required_neighbors() + 1;
    let w = a * omega(m);
    let inv = 1.0 / m as f64;
    let typical = 3.0 * (kk as f64 / w).powf(inv);
    let tail = (poisson_quantile_mean(kk, MARGIN_TAIL) / w).powf(inv);
    typical.max(tail)
}

/// Typical interaction length: `(k/(a omega_m))^{1/m}` or the Rips radius.
fn length_scale(xi: &PointFunctional, a: f64, m: usize) -> f64 {
    match xi.interaction_radius() {
        Some(beta) => beta,
        None => (xi.required_neighbors().max(1) as f64 / (a * omega(m))).powf(1.0 / m as f64),
    }
}

fn inside(p: &[f64], l: f64) -> bool {
    p.iter().all(|v| v.abs() <= l)
}

fn gather(xi: &PointFunctional, index: &SpatialIndex<'_>, q: &[f64], extra: usize, exclude: Option<usize>) -> LocalView {
    LocalView::gather(
        index,
        q,
        xi.required_neighbors() + extra,
        xi.interaction_radius().unwrap_or(0.0),
        exclude,
    )
}

/// `xi` at every point within `reach` of the center; NaN elsewhere.
fn window_values(xi: &PointFunctional, index: &SpatialIndex<'_>, reach: f64, m: usize) -> Vec<f64> {
    let cloud = index.cloud();
    (0..cloud.len())
        .map(|i| {
            let p = cloud.point(i);
            if inside(p, reach) {
                xi.eval_local(&gather(xi, index, p, 0, Some(i)), m)
            } else {
                f64::NAN
            }
        })
        .collect()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn sample_window(a: f64, m: usize, half_width: f64, key: [u64; 4]) -> Result<PointCloud> {
    let proc = HomogeneousWindowProcess::new(a, m, half_width)?;
    Ok(proc.sample(&mut stream(key)))
}

/// Picks `r_max` from one large realization: the first radius, at least
/// three length scales out, after which two consecutive shells of the
/// centered pair-correlation sum are each negligible. A shell is negligible
/// when it is below 1% of the variance or within two standard errors of 0.
fn pilot_r_max(xi: &PointFunctional, a: f64, m: usize, seed: u64) -> Result<f64> {
    let s = length_scale(xi, a, m);
    let width = s / 4.0;
    let bins = 32;
    let r_pilot = width * bins as f64;
    let inner = 0.5 * (20_000.0 / a).powf(1.0 / m as f64);
    let margin = stabilization_margin(xi, a, m);
    let cloud = sample_window(a, m, inner + r_pilot + margin, [seed, TAG_PILOT, 0, 0])?;
    let index = SpatialIndex::build(&cloud);
    let vals = window_values(xi, &index, inner + r_pilot, m);
    let ids: Vec<usize> = (0..cloud.len()).filter(|&i| inside(cloud.point(i), inner)).collect();
    if ids.len() < 2 {
        return Ok(3.0 * s);
    }
    let n = ids.len() as f64;
    let mu = ids.iter().map(|&i| vals[i]).sum::<f64>() / n;
    let var = ids.iter().map(|&i| (vals[i] - mu).powi(2)).sum::<f64>() / n;
    let mut shells = vec![0.0; bins];
    let mut shells_sq = vec![0.0; bins];
    let mut local = vec![0.0; bins];
    for &i in &ids {
        let p = cloud.point(i);
        let ci = vals[i] - mu;
        local.iter_mut().for_each(|v| *v = 0.0);
        for j in index.within_query(p, r_pilot, Some(i)) {
            let d = crate::spatial::distance(p, cloud.point(j));
            let b = ((d / width) as usize).min(bins - 1);
            local[b] += ci * (vals[j] - mu);
        }
        for b in 0..bins {
            shells[b] += local[b];
            shells_sq[b] += local[b] * local[b];
        }
    }
    let negligible = |b: usize| {
        let mean = shells[b] / n;
        let se = (shells_sq[b] / n - mean * mean).max(0.0).sqrt() / n.sqrt();
        mean.abs() <= (0.01 * var).max(2.0 * se)
    };
    for b in 12..bins - 1 {
        if negligible(b) && negligible(b + 1) {
            return Ok(width * b as f64);
        }
    }
    Ok(r_pilot)
}

/// Per-replicate sums over the inner window, each divided by `a |W|`.
#[derive(Clone, Copy, Default)]
struct WindowSums {
    /// `sum xi_x`
    sum: f64,
    /// `sum xi_x^2`
    sq: f64,
    /// `sum xi_x + sum_y (xi_x - xi_x without y)`
    delta: f64,
    /// `sum_x xi_x S_x` with `S_x = sum_{0 < |y-x| <= r} xi_y`
    pair: f64,
    /// `sum_x (xi_x n_x + S_x)` with `n_x` the neighbor count
    cross: f64,
    /// `sum_x n_x`
    count: f64,
}

fn window_pass(
    xi: &PointFunctional,
    a: f64,
    m: usize,
    params: &MCIntegrationParams,
    pairs: bool,
) -> Result<(Vec<WindowSums>, f64)> {
    params.validate(xi, a, m)?;
    let l_in = params.inner_half_width(xi, a, m);
    let r_max = params.r_max;
    let norm = a * (2.0 * l_in).powi(m as i32);
    let knn = xi.interaction_radius().is_none();
    let reps = (0..params.replicates)
        .into_par_iter()
        .map(|r| -> Result<WindowSums> {
            let cloud = sample_window(a, m, params.half_width, [params.seed, TAG_WINDOW, r as u64, 0])?;
            let index = SpatialIndex::build(&cloud);
            let vals = if pairs {
                window_values(xi, &index, l_in + r_max, m)
            } else {
                Vec::new()
            };
            let mut w = WindowSums::default();
            for i in 0..cloud.len() {
                let p = cloud.point(i);
                if !inside(p, l_in) {
                    continue;
                }
                let view = gather(xi, &index, p, 1, Some(i));
                let v = xi.eval_local(&view, m);
                let influential = if knn {
                    xi.required_neighbors().min(view.len())
                } else {
                    view.len()
                };
                let mut diff = 0.0;
                for j in 0..influential {
                    diff += v - xi.eval_local(&view.without(j), m);
                }
                w.sum += v;
                w.sq += v * v;
                w.delta += v + diff;
                if pairs {
                    let near = index.within_query(p, r_max, Some(i));
                    let s: f64 = near.iter().map(|&j| vals[j]).sum();
                    w.pair += v * s;
                    w.cross += v * near.len() as f64 + s;
                    w.count += near.len() as f64;
                }
            }
            for x in [&mut w.sum, &mut w.sq, &mut w.delta, &mut w.pair, &mut w.cross, &mut w.count] {
                *x /= norm;
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((reps, l_in))
}

/// Result of [`v_xi_mc`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// `V^xi(a)`.
    pub v: Estimate,
    /// `E xi(0, H_a)^2`, the first term of `V^xi(a)`.
    pub second_moment: Estimate,
    /// `E xi(0, H_a)`.
    pub mean: Estimate,
    /// `delta^xi(a)` from the same realizations.
    pub delta: Estimate,
    pub r_max: f64,
    pub inner_half_width: f64,
}

/// Monte Carlo `V^xi(a)`.
///
/// The pair-correlation integral is evaluated on values centered at the
/// pooled mean `mu`. Centering shifts it by `2 mu a int (E xi(0,H^{0,u}) - mu) du
/// = 2 mu (delta^xi(a) - mu)`, which is restored from the remove-one
/// estimate of `delta^xi(a)` on the same windows, so that
/// `V = E xi^2 + centered pair term + 2 mu (delta - mu)`.
pub fn v_xi_mc(xi: &PointFunctional, a: f64, m: usize, params: &MCIntegrationParams) -> Result<VarianceEstimate> {
    let (reps, l_in) = window_pass(xi, a, m, params, true)?;
    let col = |f: fn(&WindowSums) -> f64| reps.iter().map(f).collect::<Vec<f64>>();
    let (mu, mu_se) = mean_se(&col(|w| w.sum));
    let (m2, m2_se) = mean_se(&col(|w| w.sq));
    let (dv, dse) = mean_se(&col(|w| w.delta));
    let per_rep: Vec<f64> = reps
        .iter()
        .map(|w| w.sq + (w.pair - mu * w.cross + mu * mu * w.count) + 2.0 * mu * (w.delta - w.sum))
        .collect();
    let (v, v_se) = mean_se(&per_rep);
    Ok(VarianceEstimate {
        v: Estimate::mc(v, v_se),
        second_moment: Estimate::mc(m2, m2_se),
        mean: Estimate::mc(mu, mu_se),
        delta: Estimate::mc(dv, dse),
        r_max: params.r_max,
        inner_half_width: l_in,
    })
}

/// Result of [`delta_xi_mc`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    /// `delta^xi(a)`.
    pub delta: Estimate,
    /// `E xi(0, H_a)`.
    pub mean: Estimate,
}

/// Monte Carlo `delta^xi(a)` by remove-one differences.
pub fn delta_xi_mc(xi: &PointFunctional, a: f64, m: usize, params: &MCIntegrationParams) -> Result<DeltaEstimate> {
    let (reps, _) = window_pass(xi, a, m, params, false)?;
    let (dv, dse) = mean_se(&reps.iter().map(|w| w.delta).collect::<Vec<_>>());
    let (sv, sse) = mean_se(&reps.iter().map(|w| w.sum).collect::<Vec<_>>());
    Ok(DeltaEstimate {
        delta: Estimate::mc(dv, dse),
        mean: Estimate::mc(sv, sse),
    })
}

/// Neighborhood of the origin in `H_a ∪ {0}`, read from a window just
/// large enough to contain it (up to probability `1e-12`).
pub fn origin_view<R: Rng + ?Sized>(xi: &PointFunctional, a: f64, m: usize, rng: &mut R) -> Result<LocalView> {
    check_common(xi, a, m)?;
    let proc = HomogeneousWindowProcess::new(a, m, stabilization_margin(xi, a, m))?;
    let cloud = proc.sample(rng);
    let index = SpatialIndex::build(&cloud);
    Ok(gather(xi, &index, &vec![0.0; m], 1, None))
}

/// `reps` independent draws of `xi(0, H_a ∪ {0})`, in replicate order.
pub fn origin_values(xi: &PointFunctional, a: f64, m: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    check_common(xi, a, m)?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let view = origin_view(xi, a, m, &mut stream([seed, TAG_ORIGIN, r as u64, 0]))?;
            Ok(xi.eval_local(&view, m))
        })
        .collect()
}

fn uniform_in_ball<R: Rng + ?Sized>(radius: f64, rng: &mut R, out: &mut [f64]) -> f64 {
    loop {
        for v in out.iter_mut() {
            *v = 2.0 * rng.random::<f64>() - 1.0;
        }
        let n2: f64 = out.iter().map(|v| v * v).sum();
        if n2 <= 1.0 {
            for v in out.iter_mut() {
                *v *= radius;
            }
            return radius * n2.sqrt();
        }
    }
}

/// `delta^xi(a)` by direct insertion: `E xi(0,H) + a |B| E[xi(0,H^u) - xi(0,H)]`
/// with `u` uniform on a ball `B` outside of which insertions have no effect.
/// Independent of [`delta_xi_mc`]; used to cross-check it.
pub fn delta_xi_add_one(xi: &PointFunctional, a: f64, m: usize, params: &MCIntegrationParams) -> Result<Estimate> {
    params.validate(xi, a, m)?;
    let radius = stabilization_margin(xi, a, m);
    let ball = a * omega(m) * radius.powi(m as i32);
    let reps: Vec<f64> = (0..params.replicates)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = stream([params.seed, TAG_ADD_ONE, r as u64, 0]);
            let view = origin_view(xi, a, m, &mut rng)?;
            let base = xi.eval_local(&view, m);
            let mut u = vec![0.0; m];
            let mut acc = 0.0;
            for _ in 0..params.u_samples {
                let d = uniform_in_ball(radius, &mut rng, &mut u);
                acc += xi.eval_local(&view.with_point(d, &u), m) - base;
            }
            Ok(base + ball * acc / params.u_samples as f64)
        })
        .collect::<Result<_>>()?;
    let (v, se) = mean_se(&reps);
    Ok(Estimate::mc(v, se))
}
