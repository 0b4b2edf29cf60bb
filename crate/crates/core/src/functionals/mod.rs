//! Per-point functionals `xi(y, Y)` and their scaled sums.
//!
//! Conventions:
//! - `N_j(y, Y)` is `+inf` when `Y \ {y}` has fewer than `j` points.
//! - The evaluated point counts toward `card(Y)`, so `zeta_k` is nonzero
//!   only when at least `k` other points exist.
//! - Truncation indicators use `N_k <= rho`, with `0 * inf = 0`.
//! - Distances that agree to a relative `1e-12` are treated as tied.

pub mod cliques;

use serde::{Deserialize, Serialize};

use crate::constants::omega;
use crate::error::{invalid, Result};
use crate::geometry::PointCloud;
use crate::spatial::SpatialIndex;

pub use cliques::{count_cliques_among, RadiusGraph};

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Relative tolerance under which two neighbor distances count as tied.
pub const TIE_REL_TOL: f64 = 1e-12;

/// The functional families this crate knows how to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalKind {
    /// Dimension kernel `(k-2) / sum_{j<k} log(N_k / N_j)`.
    ZetaK { k: usize },
    /// `N_1^alpha`.
    N1Alpha { alpha: f64 },
    /// Shannon kernel `log(e^gamma omega_m N_1^m)`.
    Psi,
    /// `(k+1)^{-1}` times the number of `k`-simplices of the Rips complex
    /// at scale `beta` that contain the point.
    PhiK { k: usize, beta: f64 },
}

/// How a functional transforms under the dilation `(y, Y) -> (a y, a Y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Homogeneity {
    /// `xi(aY) = a^beta xi(Y)`.
    Order(f64),
    /// `xi(aY) = xi(Y)`.
    ScaleInvariant,
    /// `xi(aY) = xi(Y) + m log a`.
    LogAdditive,
    /// Not homogeneous at fixed radius, but `xi(aY; a beta) = xi(Y; beta)`.
    RadiusCovariant,
}

/// A functional together with its truncation radius `rho` (default `+inf`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFunctional {
    pub kind: FunctionalKind,
    #[serde(default = "infinite", with = "extended_real")]
    pub truncation: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

/// Serializes `+inf` as JSON `null`.
pub(crate) mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl PointFunctional {
    pub fn new(kind: FunctionalKind) -> Result<Self> {
        match kind {
            FunctionalKind::ZetaK { k } if k < 3 => {
                return Err(invalid(format!("zeta_k requires k >= 3, got {k}")))
            }
            FunctionalKind::N1Alpha { alpha } if !alpha.is_finite() => {
                return Err(invalid("alpha must be finite"))
            }
            FunctionalKind::PhiK { beta, .. } if !(beta > 0.0) || !beta.is_finite() => {
                return Err(invalid(format!("beta must be positive, got {beta}")))
            }
            _ => {}
        }
        Ok(PointFunctional {
            kind,
            truncation: f64::INFINITY,
        })
    }

    pub fn zeta(k: usize) -> Result<Self> {
        Self::new(FunctionalKind::ZetaK { k })
    }

    pub fn n1_alpha(alpha: f64) -> Result<Self> {
        Self::new(FunctionalKind::N1Alpha { alpha })
    }

    pub fn psi() -> Self {
        PointFunctional {
            kind: FunctionalKind::Psi,
            truncation: f64::INFINITY,
        }
    }

    pub fn phi(k: usize, beta: f64) -> Result<Self> {
        Self::new(FunctionalKind::PhiK { k, beta })
    }

    pub fn with_truncation(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(invalid(format!("truncation radius must be positive, got {rho}")));
        }
        self.truncation = rho;
        Ok(self)
    }

    /// Number of nearest neighbors the functional reads.
    pub fn required_neighbors(&self) -> usize {
        match self.kind {
            FunctionalKind::ZetaK { k } => k,
            FunctionalKind::N1Alpha { .. } | FunctionalKind::Psi => 1,
            FunctionalKind::PhiK { .. } => 0,
        }
    }

    /// Fixed interaction radius, if the functional has one.
    pub fn interaction_radius(&self) -> Option<f64> {
        match self.kind {
            FunctionalKind::PhiK { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn homogeneity(&self) -> Homogeneity {
        match self.kind {
            FunctionalKind::ZetaK { .. } => Homogeneity::ScaleInvariant,
            FunctionalKind::N1Alpha { alpha } => Homogeneity::Order(alpha),
            FunctionalKind::Psi => Homogeneity::LogAdditive,
            FunctionalKind::PhiK { .. } => Homogeneity::RadiusCovariant,
        }
    }

    pub fn is_scale_invariant(&self) -> bool {
        matches!(self.homogeneity(), Homogeneity::ScaleInvariant)
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self.kind {
            FunctionalKind::ZetaK { k } => format!("zeta_{k}"),
            FunctionalKind::N1Alpha { alpha } => format!("n1^{alpha}"),
            FunctionalKind::Psi => "psi".into(),
            FunctionalKind::PhiK { k, beta } => format!("phi_{k}(beta={beta})"),
        }
    }

    /// Evaluates the functional (without truncation) at a location whose
    /// neighborhood is described by `view`.
    pub fn eval_local(&self, view: &LocalView, m: usize) -> f64 {
        match self.kind {
            FunctionalKind::ZetaK { k } => zeta_from_distances(view.dists(), k),
            FunctionalKind::N1Alpha { alpha } => match view.dists().first() {
                Some(&d) => d.powf(alpha),
                None => 0.0,
            },
            FunctionalKind::Psi => match view.dists().first() {
                Some(&d) => psi_from_n1(d, m),
                None => 0.0,
            },
            FunctionalKind::PhiK { k, beta } => {
                let near: Vec<&[f64]> = view
                    .iter()
                    .take_while(|(d, _)| *d <= beta)
                    .map(|(_, p)| p)
                    .collect();
                count_cliques_among(&near, beta, k) as f64 / (k as f64 + 1.0)
            }
        }
    }

    /// Unscaled value `xi(y_i, Y)`, truncation applied.
    pub fn evaluate(&self, index: &SpatialIndex<'_>, i: usize) -> Result<f64> {
        let m = index.cloud().intrinsic_dim();
        let value = match self.kind {
            FunctionalKind::ZetaK { k } => zeta_k(index, i, k)?,
            FunctionalKind::N1Alpha { alpha } => n1_alpha(index, i, alpha)?,
            FunctionalKind::Psi => psi(index, i, m)?,
            FunctionalKind::PhiK { k, beta } => phi_k(index, i, k, beta)?,
        };
        if self.truncation.is_finite() {
            let k = self.required_neighbors().max(1);
            Ok(truncate(value, index, i, k, self.truncation)?)
        } else {
            Ok(value)
        }
    }
}

fn truncate(value: f64, index: &SpatialIndex<'_>, i: usize, k: usize, rho: f64) -> Result<f64> {
    let nk = index.knn_distances(i, k)?[k - 1];
    Ok(if nk <= rho { value } else { 0.0 })
}

/// Sorted distances from a location to nearby points, with coordinates.
#[derive(Debug, Clone, Default)]
pub struct LocalView {
    dim: usize,
    dists: Vec<f64>,
    coords: Vec<f64>,
}

impl LocalView {
    pub fn new(dim: usize) -> Self {
        LocalView {
            dim,
            dists: Vec::new(),
            coords: Vec::new(),
        }
    }

    /// Neighborhood of `q` in the indexed cloud: its `k` nearest points and
    /// every point within `radius`, excluding `exclude`.
    pub fn gather(index: &SpatialIndex<'_>, q: &[f64], k: usize, radius: f64, exclude: Option<usize>) -> Self {
        let cloud = index.cloud();
        let mut ids: Vec<(f64, usize)> = index.knn_query(q, k, exclude);
        if radius > 0.0 {
            let reach = ids.last().map_or(-1.0, |&(d, _)| d);
            if ids.len() < k || radius > reach {
                for id in index.within_query(q, radius, exclude) {
                    if !ids.iter().any(|&(_, j)| j == id) {
                        ids.push((crate::spatial::distance(q, cloud.point(id)), id));
                    }
                }
            }
        }
        ids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut view = LocalView::new(cloud.ambient_dim());
        for (d, id) in ids {
            view.dists.push(d);
            view.coords.extend_from_slice(cloud.point(id));
        }
        view
    }

    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }

    pub fn dists(&self) -> &[f64] {
        &self.dists
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.dists.iter().copied().zip(self.coords.chunks_exact(self.dim.max(1)))
    }

    /// The view with entry `j` removed.
    pub fn without(&self, j: usize) -> Self {
        let mut v = self.clone();
        v.dists.remove(j);
        v.coords.drain(j * self.dim..(j + 1) * self.dim);
        v
    }

    /// The view with an extra point at distance `d`.
    pub fn with_point(&self, d: f64, p: &[f64]) -> Self {
        let mut v = self.clone();
        let pos = v.dists.partition_point(|&x| x <= d);
        v.dists.insert(pos, d);
        let at = pos * self.dim;
        v.coords.splice(at..at, p.iter().copied());
        v
    }
}

/// `zeta_k` from the sorted neighbor distances (`dists[j-1] = N_j`).
/// Missing entries are `+inf`.
pub fn zeta_from_distances(dists: &[f64], k: usize) -> f64 {
    debug_assert!(k >= 3);
    let nk = dists.get(k - 1).copied().unwrap_or(f64::INFINITY);
    if !nk.is_finite() {
        return 0.0;
    }
    let mut s = 0.0;
    for &nj in &dists[..k - 1] {
        if nk - nj <= TIE_REL_TOL * nk {
            continue;
        }
        s += (nk / nj).ln();
    }
    if s == 0.0 {
        f64::INFINITY
    } else {
        (k as f64 - 2.0) / s
    }
}

/// `gamma + log omega_m + m log N_1`.
pub fn psi_from_n1(n1: f64, m: usize) -> f64 {
    EULER_GAMMA + omega(m).ln() + m as f64 * n1.ln()
}

/// `zeta_k(y_i, Y)`. `+inf` when `N_1 = ... = N_k`.
pub fn zeta_k(index: &SpatialIndex<'_>, i: usize, k: usize) -> Result<f64> {
    if k < 3 {
        return Err(invalid(format!("zeta_k requires k >= 3, got {k}")));
    }
    Ok(zeta_from_distances(&index.knn_distances(i, k)?, k))
}

/// `zeta_k(y_i, Y) * 1{N_k <= rho}` with `0 * inf = 0`.
pub fn zeta_k_rho(index: &SpatialIndex<'_>, i: usize, k: usize, rho: f64) -> Result<f64> {
    if k < 3 {
        return Err(invalid(format!("zeta_k requires k >= 3, got {k}")));
    }
    if !(rho > 0.0) {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    let d = index.knn_distances(i, k)?;
    Ok(if d[k - 1] <= rho {
        zeta_from_distances(&d, k)
    } else {
        0.0
    })
}

/// `N_1(y_i, Y)^alpha`, or 0 for a singleton cloud.
pub fn n1_alpha(index: &SpatialIndex<'_>, i: usize, alpha: f64) -> Result<f64> {
    let n1 = index.knn_distances(i, 1)?[0];
    Ok(if n1.is_finite() { n1.powf(alpha) } else { 0.0 })
}

/// `psi(y_i, Y)`, or 0 for a singleton cloud.
pub fn psi(index: &SpatialIndex<'_>, i: usize, m: usize) -> Result<f64> {
    let n1 = index.knn_distances(i, 1)?[0];
    Ok(if n1.is_finite() { psi_from_n1(n1, m) } else { 0.0 })
}

/// `phi_k(y_i, Y)` at Rips scale `beta`.
pub fn phi_k(index: &SpatialIndex<'_>, i: usize, k: usize, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    let cloud = index.cloud();
    let nbrs = index.neighbors_within(i, beta)?;
    let pts: Vec<&[f64]> = nbrs.iter().map(|&j| cloud.point(j)).collect();
    Ok(count_cliques_among(&pts, beta, k) as f64 / (k as f64 + 1.0))
}

/// `H^xi_{lambda,k,rho}(Y) = sum_y xi(lambda^{1/m} y, lambda^{1/m} Y) 1{N_k(y, Y) <= rho}`.
///
/// `rho` is measured in the original (unscaled) coordinates. The dilation
/// is applied through each family's scaling law rather than by rescaling
/// the cloud.
pub fn scaled_sum(xi: &PointFunctional, cloud: &PointCloud, lambda: f64, k: usize, rho: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if !(rho > 0.0) {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    let index = SpatialIndex::build(cloud);
    let m = cloud.intrinsic_dim() as f64;
    let k_ind = k.max(1);
    let mut total = 0.0;
    let mut dists = Vec::new();
    for i in 0..cloud.len() {
        if rho.is_finite() {
            index.knn_distances_into(cloud.point(i), k_ind, Some(i), &mut dists);
            if !(dists[k_ind - 1] <= rho) {
                continue;
            }
        }
        let v = match xi.kind {
            FunctionalKind::ZetaK { k } => zeta_k(&index, i, k)?,
            FunctionalKind::N1Alpha { alpha } => lambda.powf(alpha / m) * n1_alpha(&index, i, alpha)?,
            FunctionalKind::Psi => {
                let n1 = index.knn_distances(i, 1)?[0];
                if n1.is_finite() {
                    psi_from_n1(n1, cloud.intrinsic_dim()) + lambda.ln()
                } else {
                    0.0
                }
            }
            FunctionalKind::PhiK { k, beta } => phi_k(&index, i, k, beta * lambda.powf(-1.0 / m))?,
        };
        total += v;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    fn line(xs: &[f64]) -> PointCloud {
        let pts: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        PointCloud::from_points(1, 1, &pts).unwrap()
    }

    #[test]
    fn zeta_small_cloud_is_zero() {
        let c = line(&[0.0, 1.0, 2.5]);
        let index = SpatialIndex::build(&c);
        assert_eq!(zeta_k(&index, 0, 3).unwrap(), 0.0);
    }

    #[test]
    fn zeta_direct_substitution() {
        // N_1 = N_3 / e, N_2 = N_3: denominator 1 + 0.
        let d = [1.0 / E, 1.0, 1.0];
        assert_abs_diff_eq!(zeta_from_distances(&d, 3), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zeta_tie_is_infinite() {
        assert_eq!(zeta_from_distances(&[2.0, 2.0, 2.0], 3), f64::INFINITY);
        // rounding-level differences still count as ties
        let s = 2f64.sqrt();
        assert_eq!(zeta_from_distances(&[s * (1.0 - 1e-15), s, s], 3), f64::INFINITY);
        // a cloud: origin with three points on the unit circle
        let c = PointCloud::from_points(1, 2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let index = SpatialIndex::build(&c);
        assert_eq!(zeta_k(&index, 0, 3).unwrap(), f64::INFINITY);
    }

    #[test]
    fn zeta_rho_truncation() {
        let c = PointCloud::from_points(1, 2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let index = SpatialIndex::build(&c);
        // tie with N_k > rho: convention 0 * inf = 0
        assert_eq!(zeta_k_rho(&index, 0, 3, 0.5).unwrap(), 0.0);
        assert_eq!(zeta_k_rho(&index, 0, 3, 1.0).unwrap(), f64::INFINITY);
        let c = line(&[0.0, 0.1, 0.3, 0.7, 1.0]);
        let index = SpatialIndex::build(&c);
        let full = zeta_k(&index, 0, 3).unwrap();
        assert_eq!(zeta_k_rho(&index, 0, 3, 0.7).unwrap(), full);
        assert_eq!(zeta_k_rho(&index, 0, 3, 0.69).unwrap(), 0.0);
        assert!(zeta_k_rho(&index, 0, 3, 0.0).is_err());
        assert!(zeta_k(&index, 0, 2).is_err());
    }

    #[test]
    fn n1_alpha_examples() {
        let c = line(&[0.0, 2.0]);
        let index = SpatialIndex::build(&c);
        assert_abs_diff_eq!(n1_alpha(&index, 0, 3.0).unwrap(), 8.0, epsilon = 1e-12);
        let c = line(&[0.0, 4.0]);
        let index = SpatialIndex::build(&c);
        assert_abs_diff_eq!(n1_alpha(&index, 0, -0.5).unwrap(), 0.5, epsilon = 1e-15);
        let single = line(&[3.0]);
        assert_eq!(n1_alpha(&SpatialIndex::build(&single), 0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn psi_examples() {
        let n1 = (-EULER_GAMMA).exp() / 2.0;
        let c = line(&[0.0, n1]);
        assert_abs_diff_eq!(psi(&SpatialIndex::build(&c), 0, 1).unwrap(), 0.0, epsilon = 1e-14);
        let single = line(&[3.0]);
        assert_eq!(psi(&SpatialIndex::build(&single), 0, 1).unwrap(), 0.0);
        let c = PointCloud::from_points(2, 2, &[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(psi(&SpatialIndex::build(&c), 0, 2).unwrap(), 1.721_945_550_750_933, epsilon = 1e-12);
    }

    #[test]
    fn phi_examples() {
        let beta = 1.0;
        let c = PointCloud::from_points(2, 2, &[[0.0, 0.0], [0.9, 0.0], [0.45, 0.7794228634059948], [5.0, 5.0]]).unwrap();
        let index = SpatialIndex::build(&c);
        for i in 0..3 {
            assert_abs_diff_eq!(phi_k(&index, i, 2, beta).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(phi_k(&index, 3, 2, beta).unwrap(), 0.0);
        assert_eq!(phi_k(&index, 3, 1, beta).unwrap(), 0.0);
    }

    #[test]
    fn phi_complete_graph_sum() {
        let n = 9;
        let pts: Vec<[f64; 1]> = (0..n).map(|i| [0.01 * i as f64]).collect();
        let c = PointCloud::from_points(1, 1, &pts).unwrap();
        let index = SpatialIndex::build(&c);
        for k in 1..5usize {
            let total: f64 = (0..n).map(|i| phi_k(&index, i, k, 1.0).unwrap()).sum();
            let expect = (0..=k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1)) as f64;
            assert_abs_diff_eq!(total, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn constructor_guards() {
        assert!(PointFunctional::zeta(2).is_err());
        assert!(PointFunctional::zeta(3).is_ok());
        assert!(PointFunctional::phi(1, 0.0).is_err());
        assert!(PointFunctional::psi().with_truncation(0.0).is_err());
        assert_eq!(PointFunctional::zeta(5).unwrap().required_neighbors(), 5);
        assert_eq!(PointFunctional::psi().homogeneity(), Homogeneity::LogAdditive);
    }

    #[test]
    fn local_view_edits() {
        let c = line(&[0.0, 1.0, -2.0, 4.0]);
        let index = SpatialIndex::build(&c);
        let v = LocalView::gather(&index, &[0.0], 2, 0.0, Some(0));
        assert_eq!(v.dists(), &[1.0, 2.0]);
        let w = v.with_point(1.5, &[1.5]);
        assert_eq!(w.dists(), &[1.0, 1.5, 2.0]);
        assert_eq!(w.point(1), &[1.5]);
        let u = w.without(0);
        assert_eq!(u.dists(), &[1.5, 2.0]);
        assert_eq!(u.point(1), &[-2.0]);
        let r = LocalView::gather(&index, &[0.0], 1, 2.5, Some(0));
        assert_eq!(r.dists(), &[1.0, 2.0]);
    }

    #[test]
    fn scaled_sum_laws() {
        let pts: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.cos() * (1.0 + 0.01 * i as f64), t.sin()]
            })
            .collect();
        let c = PointCloud::from_points(2, 2, &pts).unwrap();
        let index = SpatialIndex::build(&c);
        let n = c.len() as f64;

        let z = PointFunctional::zeta(4).unwrap();
        let plain: f64 = (0..c.len()).map(|i| zeta_k(&index, i, 4).unwrap()).sum();
        assert_abs_diff_eq!(scaled_sum(&z, &c, n, 4, f64::INFINITY).unwrap(), plain, epsilon = 1e-9);

        let alpha = 1.5;
        let a = PointFunctional::n1_alpha(alpha).unwrap();
        let raw: f64 = (0..c.len()).map(|i| n1_alpha(&index, i, alpha).unwrap()).sum();
        assert_abs_diff_eq!(
            scaled_sum(&a, &c, n, 1, f64::INFINITY).unwrap(),
            n.powf(alpha / 2.0) * raw,
            epsilon = 1e-9
        );

        let p = PointFunctional::psi();
        let raw: f64 = (0..c.len()).map(|i| psi(&index, i, 2).unwrap()).sum();
        assert_abs_diff_eq!(
            scaled_sum(&p, &c, n, 1, f64::INFINITY).unwrap(),
            raw + n * n.ln(),
            epsilon = 1e-9
        );

        // Dilating the cloud matches the scaling shortcut for phi_k.
        let phi = PointFunctional::phi(1, 0.8).unwrap();
        let big = c.scaled(n.sqrt());
        let direct: f64 = {
            let bi = SpatialIndex::build(&big);
            (0..big.len()).map(|i| phi_k(&bi, i, 1, 0.8).unwrap()).sum()
        };
        assert_abs_diff_eq!(scaled_sum(&phi, &c, n, 1, f64::INFINITY).unwrap(), direct, epsilon = 1e-12);
    }
}
