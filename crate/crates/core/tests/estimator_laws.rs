use std::f64::consts::PI;

use mlimits_core::estimators::{
    clique_count, correlation_dimension, dim_estimate, dim_values, r_alpha_statistic, regression, renyi_tsallis_from_i,
    shannon_estimate, volume_estimate,
};
use mlimits_core::rng::stream;
use mlimits_core::{Density, PointCloud};
use proptest::prelude::*;
use rand::Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn rotate_shift(cloud: &PointCloud, theta: f64, shift: [f64; 3]) -> PointCloud {
    let (s, c) = theta.sin_cos();
    cloud.map_points(|p, out| {
        out[0] = c * p[0] - s * p[1] + shift[0];
        out[1] = s * p[0] + c * p[1] + shift[1];
        out[2] = p[2] + shift[2];
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn volume_and_entropy_under_motions(seed in any::<u64>(), n in 20usize..400, theta in 0.0f64..6.3, a in 0.2f64..5.0) {
        let mut rng = stream([seed, 20, 0, 0]);
        let cloud = Density::sphere(2, 1.0).sample(n, &mut rng);
        let moved = rotate_shift(&cloud, theta, [rng.random(), -3.0, 2.5]);
        let v = volume_estimate(&cloud, None).unwrap().value;
        prop_assert!(close(volume_estimate(&moved, None).unwrap().value, v, 1e-9));
        prop_assert!(close(volume_estimate(&cloud.scaled(a), None).unwrap().value, a * a * v, 1e-9));

        let h = shannon_estimate(&cloud, None).unwrap().value;
        let ha = shannon_estimate(&cloud.scaled(a), None).unwrap().value;
        prop_assert!((ha - (h + 2.0 * a.ln())).abs() <= 1e-9 * h.abs().max(1.0));
        prop_assert!((shannon_estimate(&moved, None).unwrap().value - h).abs() <= 1e-9 * h.abs().max(1.0));
    }

    #[test]
    fn dim_estimate_is_the_mean_of_zeta(seed in any::<u64>(), n in 5usize..300, k in 3usize..12) {
        let cloud = Density::flat_torus(2, 1.0).sample(n, &mut stream([seed, 21, 0, 0]));
        let vals = dim_values(&cloud, k, f64::INFINITY).unwrap();
        let est = dim_estimate(&cloud, k, f64::INFINITY).unwrap();
        let mean = if vals.is_empty() { 0.0 } else { vals.iter().sum::<f64>() / vals.len() as f64 };
        prop_assert_eq!(est.value, mean);
        prop_assert_eq!(est.theoretical_limit, Some(2.0));
    }

    #[test]
    fn scaled_clique_count_is_unscaled_at_shrunk_radius(seed in any::<u64>(), n in 2usize..400, k in 1usize..4, beta in 0.1f64..2.0) {
        let cloud = Density::flat_torus(2, 1.0).sample(n, &mut stream([seed, 22, 0, 0]));
        let scaled = clique_count(&cloud, k, beta, true, None).unwrap().value;
        let raw = clique_count(&cloud, k, beta * (n as f64).powf(-0.5), false, None).unwrap().value;
        prop_assert_eq!(scaled, raw / n as f64);
    }
}

#[test]
fn truncation_is_inert_at_large_rho() {
    let k = 10;
    let sphere = Density::sphere(2, 1.0);
    let n = 5000;
    // expected N_k at intensity n / (4 pi): radius of a disc holding k points
    let expected_nk = (k as f64 / (PI * n as f64 / (4.0 * PI))).sqrt();
    for r in 0..4 {
        let cloud = sphere.sample(n, &mut stream([23, r, 0, 0]));
        let full = dim_estimate(&cloud, k, f64::INFINITY).unwrap().value;
        let cut = dim_estimate(&cloud, k, 10.0 * expected_nk).unwrap().value;
        assert_eq!(full, cut);
    }
}

#[test]
fn singletons_follow_conventions() {
    let one = PointCloud::from_points(2, 3, &[[0.0, 0.0, 1.0]]).unwrap();
    assert_eq!(r_alpha_statistic(&one, 1.0, None).unwrap().value, 0.0);
    assert_eq!(shannon_estimate(&one, None).unwrap().value, 0.0);
    assert_eq!(dim_estimate(&one, 10, f64::INFINITY).unwrap().value, 0.0);
}

#[test]
fn regression_recovers_exact_power_law() {
    let betas: Vec<f64> = (1..=8).map(|i| 0.02 * i as f64).collect();
    let xs: Vec<f64> = betas.iter().map(|b| b.ln()).collect();
    let ys: Vec<f64> = betas.iter().map(|b| (3.7 * b * b).ln()).collect();
    let (slope, intercept) = regression(&xs, &ys).unwrap();
    assert!((slope - 2.0).abs() < 1e-12);
    assert!((intercept - 3.7f64.ln()).abs() < 1e-12);

    let pair = PointCloud::from_points(1, 1, &[[0.0], [0.01]]).unwrap();
    let fit = correlation_dimension(&pair, &[0.05, 0.1, 0.2]).unwrap();
    assert_eq!(fit.slope, 0.0);
}

#[test]
fn renyi_of_uniform_is_log_volume() {
    for (vol, alpha, m) in [(4.0 * PI, 1.0, 2usize), (2.0 * PI, 0.5, 1), (1.0, 1.0, 2)] {
        let rho = 1.0 - alpha / m as f64;
        let i = f64::powf(vol, alpha / m as f64);
        let (renyi, tsallis) = renyi_tsallis_from_i(i, rho).unwrap();
        assert!((renyi - vol.ln()).abs() < 1e-12);
        assert!((tsallis - (1.0 - i) / (rho - 1.0)).abs() < 1e-12);
    }
    let (r, t) = renyi_tsallis_from_i(1.0, 0.5).unwrap();
    assert_eq!((r, t), (0.0, 0.0));
    assert!(renyi_tsallis_from_i(0.0, 0.5).is_err());
}

#[test]
fn ties_give_infinite_dimension_only_without_truncation() {
    // the centre of a regular 12-gon sees 12 tied neighbor distances
    let mut pts = vec![[0.0, 0.0]];
    for j in 0..12 {
        let t = 2.0 * PI * j as f64 / 12.0;
        pts.push([t.cos(), t.sin()]);
    }
    let cloud = PointCloud::from_points(1, 2, &pts).unwrap();
    let vals = dim_values(&cloud, 5, f64::INFINITY).unwrap();
    assert!(vals[0].is_infinite());
    assert!(dim_estimate(&cloud, 5, f64::INFINITY).unwrap().value.is_infinite());
    let cut = dim_values(&cloud, 5, 0.5).unwrap();
    assert_eq!(cut[0], 0.0);
}
