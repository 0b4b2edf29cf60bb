//! Poisson and binomial point processes.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Density, PointCloud};

/// Draws `N ~ Poisson(mean)`. `mean = 0` gives 0.
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

/// Poisson process on a manifold with intensity measure `lambda * kappa(y) dy`.
pub fn poisson_on_manifold<R: Rng + ?Sized>(density: &Density, lambda: f64, rng: &mut R) -> Result<PointCloud> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("intensity must be finite and >= 0, got {lambda}")));
    }
    let n = poisson_count(lambda, rng) as usize;
    Ok(density.sample(n, rng))
}

/// Homogeneous Poisson process of intensity `a` restricted to `[-L, L]^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousWindowProcess {
    pub intensity: f64,
    pub dim: usize,
    pub half_width: f64,
}

impl HomogeneousWindowProcess {
    pub fn new(intensity: f64, dim: usize, half_width: f64) -> Result<Self> {
        if !(intensity > 0.0) || !intensity.is_finite() {
            return Err(invalid(format!("intensity must be positive, got {intensity}")));
        }
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(invalid(format!("half width must be positive, got {half_width}")));
        }
        Ok(Self {
            intensity,
            dim,
            half_width,
        })
    }

    pub fn window_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    pub fn expected_count(&self) -> f64 {
        self.intensity * self.window_volume()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PointCloud {
        let n = poisson_count(self.expected_count(), rng) as usize;
        let l = self.half_width;
        let coords: Vec<f64> = (0..n * self.dim)
            .map(|_| l * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        PointCloud::from_flat(self.dim, self.dim, coords).expect("window dimensions are consistent")
    }
}

/// Free-function form of [`HomogeneousWindowProcess::sample`].
pub fn homogeneous_poisson<R: Rng + ?Sized>(process: &HomogeneousWindowProcess, rng: &mut R) -> PointCloud {
    process.sample(rng)
}

/// `Y ∪ extras`, keeping the original ids and appending the extras in order.
pub fn with_inserted<P: AsRef<[f64]>>(cloud: &PointCloud, extras: &[P]) -> Result<PointCloud> {
    let mut out = cloud.clone();
    for p in extras {
        let p = p.as_ref();
        if p.len() != cloud.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: cloud.ambient_dim(),
                got: p.len(),
            });
        }
        out.push(p)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_intensity_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = poisson_on_manifold(&Density::sphere(2, 1.0), 0.0, &mut rng).unwrap();
        assert!(c.is_empty());
        assert!(poisson_on_manifold(&Density::sphere(2, 1.0), -1.0, &mut rng).is_err());
    }

    #[test]
    fn manifold_poisson_count_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let reps = 2000;
        let counts: Vec<f64> = (0..reps)
            .map(|_| poisson_on_manifold(&Density::circle(1.0), 50.0, &mut rng).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - 50.0).abs() < 3.0 * (50.0f64 / reps as f64).sqrt(), "{mean}");
        assert!((var - 50.0).abs() < 0.15 * 50.0, "{var}");
    }

    #[test]
    fn expected_counts() {
        assert_eq!(HomogeneousWindowProcess::new(1.0, 2, 1.0).unwrap().expected_count(), 4.0);
        assert_eq!(HomogeneousWindowProcess::new(2.0, 1, 0.5).unwrap().expected_count(), 2.0);
        assert!(HomogeneousWindowProcess::new(0.0, 1, 1.0).is_err());
        assert!(HomogeneousWindowProcess::new(1.0, 0, 1.0).is_err());
    }

    #[test]
    fn window_points_inside() {
        let p = HomogeneousWindowProcess::new(3.0, 3, 1.5).unwrap();
        let c = p.sample(&mut ChaCha8Rng::seed_from_u64(2));
        assert!(c.iter().all(|q| q.iter().all(|v| v.abs() <= 1.5)));
        assert_eq!(c.ambient_dim(), 3);
    }

    #[test]
    fn insertion() {
        let empty = PointCloud::new(1, 1).unwrap();
        let one = with_inserted(&empty, &[[0.0]]).unwrap();
        assert_eq!(one.len(), 1);
        let none: [[f64; 1]; 0] = [];
        assert_eq!(with_inserted(&one, &none).unwrap(), one);

        let p = HomogeneousWindowProcess::new(1.0, 2, 2.0).unwrap();
        let h = p.sample(&mut ChaCha8Rng::seed_from_u64(3));
        let h2 = with_inserted(&h, &[[0.0, 0.0], [0.3, -0.1]]).unwrap();
        assert_eq!(h2.len(), h.len() + 2);
        assert_eq!(h2.point(h.len()), &[0.0, 0.0]);
        for i in 0..h.len() {
            assert_eq!(h2.point(i), h.point(i));
        }
        assert!(with_inserted(&h, &[[0.0]]).is_err());
    }

    #[test]
    fn reproducible() {
        let p = HomogeneousWindowProcess::new(2.0, 2, 3.0).unwrap();
        let a = p.sample(&mut ChaCha8Rng::seed_from_u64(44));
        let b = p.sample(&mut ChaCha8Rng::seed_from_u64(44));
        assert_eq!(a.coords(), b.coords());
    }
}
