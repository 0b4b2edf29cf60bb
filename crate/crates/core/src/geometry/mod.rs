//! Built-in manifolds with exact samplers and closed-form reference
//! quantities (`I_rho`, Shannon entropy, variance of the log-density).

mod cloud;

pub use cloud::{CloudRecord, PointCloud};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constants::omega;
use crate::error::{invalid, Error, Result};

/// Tolerance used when testing whether a point lies on a manifold.
pub const SUPPORT_TOL: f64 = 1e-9;

/// A probability law on one of the built-in manifolds.
///
/// Every law except the Gaussian is the uniform (normalized volume) measure
/// on its manifold. Distances between sampled points are always ambient
/// Euclidean distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    /// Circle of the given radius in `R^2`.
    Circle { radius: f64 },
    /// Round `m`-sphere of the given radius in `R^{m+1}`.
    Sphere { dim: usize, radius: f64 },
    /// Flat torus `(R/L)^m` embedded isometrically in `R^{2m}`: coordinate
    /// pair `i` lies on a circle of radius `L / 2pi`.
    FlatTorus { dim: usize, side: f64 },
    /// Isotropic Gaussian `N(0, scale^2 I)` on `R^m`.
    EuclideanGaussian { dim: usize, scale: f64 },
    /// Uniform law on the cube `[0, side]^m`.
    EuclideanCube { dim: usize, side: f64 },
    /// Two unit `m`-spheres in `R^{2(m+1)}` with disjoint coordinate
    /// supports. Every cross pair is at distance exactly `sqrt 2`.
    TwoSpheres { dim: usize },
    /// Unit segment on the z-axis (`z in [0,1]`) together with the upper
    /// half `theta in [0, pi]` of the unit circle in the xy-plane. Every arc
    /// point is at the same distance `sqrt(1 + z^2)` from the segment point
    /// at height `z`, so a segment point whose `k` nearest neighbors all lie
    /// on the arc sees `k` tied distances.
    SegmentArc,
}

impl Density {
    pub fn circle(radius: f64) -> Self {
        Density::Circle { radius }
    }

    pub fn sphere(dim: usize, radius: f64) -> Self {
        Density::Sphere { dim, radius }
    }

    pub fn flat_torus(dim: usize, side: f64) -> Self {
        Density::FlatTorus { dim, side }
    }

    pub fn gaussian(dim: usize, scale: f64) -> Self {
        Density::EuclideanGaussian { dim, scale }
    }

    pub fn cube(dim: usize, side: f64) -> Self {
        Density::EuclideanCube { dim, side }
    }

    /// Checks parameters; constructors above do not.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let dim_ok = |dim: usize| {
            if dim >= 1 {
                Ok(())
            } else {
                Err(invalid("dimension must be at least 1"))
            }
        };
        match *self {
            Density::Circle { radius } => positive("radius", radius),
            Density::Sphere { dim, radius } => dim_ok(dim).and(positive("radius", radius)),
            Density::FlatTorus { dim, side } => dim_ok(dim).and(positive("side", side)),
            Density::EuclideanGaussian { dim, scale } => dim_ok(dim).and(positive("scale", scale)),
            Density::EuclideanCube { dim, side } => dim_ok(dim).and(positive("side", side)),
            Density::TwoSpheres { dim } => dim_ok(dim),
            Density::SegmentArc => Ok(()),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            Density::Circle { .. } | Density::SegmentArc => 1,
            Density::Sphere { dim, .. }
            | Density::FlatTorus { dim, .. }
            | Density::EuclideanGaussian { dim, .. }
            | Density::EuclideanCube { dim, .. }
            | Density::TwoSpheres { dim } => dim,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            Density::Circle { .. } => 2,
            Density::Sphere { dim, .. } => dim + 1,
            Density::FlatTorus { dim, .. } => 2 * dim,
            Density::EuclideanGaussian { dim, .. } | Density::EuclideanCube { dim, .. } => dim,
            Density::TwoSpheres { dim } => 2 * (dim + 1),
            Density::SegmentArc => 3,
        }
    }

    pub fn is_uniform(&self) -> bool {
        !matches!(self, Density::EuclideanGaussian { .. })
    }

    pub fn is_counterexample(&self) -> bool {
        matches!(self, Density::TwoSpheres { .. } | Density::SegmentArc)
    }

    /// `m`-dimensional volume of the support, if compact.
    pub fn support_volume(&self) -> Option<f64> {
        match *self {
            Density::Circle { radius } => Some(2.0 * PI * radius),
            Density::Sphere { dim, radius } => Some(sphere_area(dim) * radius.powi(dim as i32)),
            Density::FlatTorus { dim, side } => Some(side.powi(dim as i32)),
            Density::EuclideanGaussian { .. } => None,
            Density::EuclideanCube { dim, side } => Some(side.powi(dim as i32)),
            Density::TwoSpheres { dim } => Some(2.0 * sphere_area(dim)),
            Density::SegmentArc => Some(1.0 + PI),
        }
    }

    /// Critical moment `r_c = sup{r >= 0 : E|Y|^r < inf}`. Every built-in
    /// law has moments of all orders.
    pub fn critical_moment(&self) -> f64 {
        f64::INFINITY
    }

    /// Evaluates the density `kappa(y)` with respect to the volume element
    /// of the manifold. Points off the support get 0.
    pub fn density_at(&self, y: &[f64]) -> f64 {
        if y.len() != self.ambient_dim() {
            return 0.0;
        }
        match *self {
            Density::EuclideanGaussian { dim, scale } => {
                let s2 = scale * scale;
                let r2: f64 = y.iter().map(|v| v * v).sum();
                (2.0 * PI * s2).powf(-(dim as f64) / 2.0) * (-r2 / (2.0 * s2)).exp()
            }
            _ => {
                if self.on_support(y, SUPPORT_TOL) {
                    1.0 / self.support_volume().expect("uniform laws have compact support")
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether `y` satisfies the defining equations of the manifold to within `tol`.
    pub fn on_support(&self, y: &[f64], tol: f64) -> bool {
        if y.len() != self.ambient_dim() {
            return false;
        }
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        match *self {
            Density::Circle { radius } => (norm(y) - radius).abs() <= tol,
            Density::Sphere { radius, .. } => (norm(y) - radius).abs() <= tol,
            Density::FlatTorus { side, .. } => {
                let r = side / (2.0 * PI);
                y.chunks_exact(2).all(|p| (norm(p) - r).abs() <= tol)
            }
            Density::EuclideanGaussian { .. } => y.iter().all(|v| v.is_finite()),
            Density::EuclideanCube { side, .. } => {
                y.iter().all(|&v| v >= -tol && v <= side + tol)
            }
            Density::TwoSpheres { dim } => {
                let (head, tail) = y.split_at(dim + 1);
                let on_first = norm(head) <= tol && (norm(tail) - 1.0).abs() <= tol;
                let on_second = norm(tail) <= tol && (norm(head) - 1.0).abs() <= tol;
                on_first || on_second
            }
            Density::SegmentArc => {
                let on_segment =
                    y[0].abs() <= tol && y[1].abs() <= tol && y[2] >= -tol && y[2] <= 1.0 + tol;
                let on_arc =
                    y[2].abs() <= tol && y[1] >= -tol && (norm(&y[..2]) - 1.0).abs() <= tol;
                on_segment || on_arc
            }
        }
    }

    /// Writes one draw into `out` (length `ambient_dim`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.ambient_dim());
        match *self {
            Density::Circle { radius } => {
                let theta = rng.random::<f64>() * 2.0 * PI;
                out[0] = radius * theta.cos();
                out[1] = radius * theta.sin();
            }
            Density::Sphere { radius, .. } => {
                unit_vector(rng, out);
                out.iter_mut().for_each(|v| *v *= radius);
            }
            Density::FlatTorus { side, .. } => {
                let r = side / (2.0 * PI);
                for pair in out.chunks_exact_mut(2) {
                    let theta = rng.random::<f64>() * 2.0 * PI;
                    pair[0] = r * theta.cos();
                    pair[1] = r * theta.sin();
                }
            }
            Density::EuclideanGaussian { scale, .. } => {
                for v in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = scale * z;
                }
            }
            Density::EuclideanCube { side, .. } => {
                for v in out.iter_mut() {
                    *v = side * rng.random::<f64>();
                }
            }
            Density::TwoSpheres { dim } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let (head, tail) = out.split_at_mut(dim + 1);
                if rng.random::<bool>() {
                    unit_vector(rng, tail);
                } else {
                    unit_vector(rng, head);
                }
            }
            Density::SegmentArc => {
                let u = rng.random::<f64>() * (1.0 + PI);
                if u < 1.0 {
                    out[0] = 0.0;
                    out[1] = 0.0;
                    out[2] = u;
                } else {
                    let theta = u - 1.0;
                    out[0] = theta.cos();
                    out[1] = theta.sin();
                    out[2] = 0.0;
                }
            }
        }
    }

    /// `n` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PointCloud {
        let d = self.ambient_dim();
        let mut coords = vec![0.0; n * d];
        for p in coords.chunks_exact_mut(d) {
            self.sample_into(rng, p);
        }
        PointCloud::from_flat(self.intrinsic_dim(), d, coords)
            .expect("built-in densities have consistent dimensions")
    }

    /// `I_rho(kappa) = integral of kappa^rho over the support`.
    pub fn true_i_rho(&self, rho: f64) -> Result<f64> {
        match *self {
            Density::EuclideanGaussian { dim, scale } => {
                if rho > 0.0 {
                    let m = dim as f64;
                    Ok((2.0 * PI * scale * scale).powf(m * (1.0 - rho) / 2.0) * rho.powf(-m / 2.0))
                } else {
                    Err(Error::Unavailable(format!(
                        "I_rho diverges for the Gaussian at rho = {rho}"
                    )))
                }
            }
            _ => {
                let vol = self.support_volume().expect("uniform laws have compact support");
                Ok(vol.powf(1.0 - rho))
            }
        }
    }

    /// Shannon differential entropy `-int kappa log kappa`.
    pub fn true_shannon(&self) -> Result<f64> {
        match *self {
            Density::EuclideanGaussian { dim, scale } => {
                Ok(0.5 * dim as f64 * (2.0 * PI * std::f64::consts::E * scale * scale).ln())
            }
            Density::TwoSpheres { .. } | Density::SegmentArc => Err(Error::Unavailable(
                "Shannon entropy is not provided for counterexample manifolds".into(),
            )),
            _ => Ok(self.support_volume().unwrap().ln()),
        }
    }

    /// `Var[log kappa(Y)]` for `Y ~ kappa`.
    pub fn true_var_log_density(&self) -> Result<f64> {
        match *self {
            // log kappa = const - |Z|^2 / 2 and Var[|Z|^2] = 2m
            Density::EuclideanGaussian { dim, .. } => Ok(dim as f64 / 2.0),
            _ => Ok(0.0),
        }
    }

    /// `E[(log kappa(Y))^j]` for `j = 1, 2`, when available.
    pub fn log_density_moments(&self) -> Result<(f64, f64)> {
        let mean = match *self {
            Density::TwoSpheres { .. } | Density::SegmentArc => {
                -self.support_volume().unwrap().ln()
            }
            _ => -self.true_shannon()?,
        };
        let var = self.true_var_log_density()?;
        Ok((mean, var + mean * mean))
    }
}

/// Surface area of the unit `m`-sphere in `R^{m+1}`.
pub fn sphere_area(m: usize) -> f64 {
    (m as f64 + 1.0) * omega(m + 1)
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = z;
            s += z * z;
        }
        if s > 1e-300 {
            let inv = 1.0 / s.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}
