//! The clique integrals `J_{k,j}`.
//!
//! `J_{k,j}` integrates `h(0, x_1..x_k) h(0, x_1..x_{j-1}, x_{k+1}..x_{2k+1-j})`
//! over `2k+1-j` free points in `R^m`, divided by `j! (k+1-j)!^2`, where
//! `h` indicates that its arguments are pairwise within unit distance.
//! Every free point is within 1 of the origin, so sampling `[-1,1]^m`
//! blocks covers the support.

use rand::Rng;
use rayon::prelude::*;

use super::{omega, Estimate};
use crate::error::{invalid, Result};
use crate::rng::stream;
use crate::spatial::distance;

const CHUNK: usize = 1 << 14;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn check(k: usize, j: usize, m: usize) -> Result<()> {
    if k == 0 || m == 0 {
        return Err(invalid("k and m must be at least 1"));
    }
    if j == 0 || j > k + 1 {
        return Err(invalid(format!("need 1 <= j <= k+1, got j = {j}, k = {k}")));
    }
    Ok(())
}

fn all_close(pts: &[&[f64]]) -> bool {
    for (a, p) in pts.iter().enumerate() {
        for q in &pts[a + 1..] {
            if distance(p, q) > 1.0 {
                return false;
            }
        }
    }
    true
}

/// Monte Carlo estimate of `J_{k,j}` from `samples` draws.
pub fn j_integral_mc(k: usize, j: usize, m: usize, samples: usize, seed: u64) -> Result<Estimate> {
    check(k, j, m)?;
    if samples < 2 {
        return Err(invalid("need at least 2 samples"));
    }
    let free = 2 * k + 1 - j;
    let origin = vec![0.0; m];
    let chunks = samples.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream([seed, 0x4a49_4e54, (k * 64 + j) as u64, c as u64]);
            let todo = CHUNK.min(samples - c * CHUNK);
            let mut x = vec![0.0; free * m];
            let mut count = 0u64;
            for _ in 0..todo {
                for v in x.iter_mut() {
                    *v = 2.0 * rng.random::<f64>() - 1.0;
                }
                let p = |i: usize| &x[i * m..(i + 1) * m];
                let first: Vec<&[f64]> = std::iter::once(&origin[..]).chain((0..k).map(p)).collect();
                if !all_close(&first) {
                    continue;
                }
                let second: Vec<&[f64]> = std::iter::once(&origin[..])
                    .chain((0..j - 1).map(p))
                    .chain((k..free).map(p))
                    .collect();
                if all_close(&second) {
                    count += 1;
                }
            }
            count
        })
        .sum();
    let n = samples as f64;
    let p = hits as f64 / n;
    let scale = 2f64.powi((m * free) as i32) / (factorial(j) * factorial(k + 1 - j).powi(2));
    Ok(Estimate::mc(scale * p, scale * (p * (1.0 - p) / (n - 1.0)).sqrt()))
}

/// `J_{k,j}`: exact for `k = 1`, Monte Carlo otherwise.
pub fn j_integral(k: usize, j: usize, m: usize, samples: usize, seed: u64) -> Result<Estimate> {
    check(k, j, m)?;
    match (k, j) {
        (1, 2) => Ok(Estimate::exact(omega(m) / 2.0)),
        (1, 1) => Ok(Estimate::exact(omega(m) * omega(m))),
        _ => j_integral_mc(k, j, m, samples, seed),
    }
}
