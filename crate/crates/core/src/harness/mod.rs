//! Reproducible simulation experiments: laws of large numbers, variance
//! asymptotics and normal approximation of the estimators.

mod render;
mod stats;

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::constants::sigma2_clique;
use crate::error::{invalid, Result};
use crate::estimators::{
    clique_count, clique_limit, dim_values, r_alpha_constant, r_alpha_statistic, renyi_tsallis_estimates,
    shannon_estimate, volume_estimate,
};
use crate::geometry::{Density, PointCloud};
use crate::pointprocess::poisson_count;
use crate::rng::stream;
use crate::spatial::SpatialIndex;

pub use render::{render_outputs, render_svg, OutputPaths};
pub use stats::{ks_distance, mean_var, normal_cdf, normal_pdf, standardize};

/// Default `k` for dimension experiments.
pub const DEFAULT_K: usize = 10;
/// Samples for `J` integrals without closed form.
const J_SAMPLES: usize = 1 << 20;

/// Which statistic an experiment replicates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticSpec {
    /// `m_hat_{k,rho}`.
    Dim,
    /// `n^{-1} R^alpha(n^{1/m} Y)`.
    RAlpha { alpha: f64 },
    /// `omega_m R^m(Y)`.
    Volume,
    /// `n^{-1} S(n^{1/m} Y)`.
    Shannon,
    /// Renyi entropy of order `1 - alpha/m`.
    Renyi { alpha: f64 },
    /// `n^{-1} Cl_k^{(beta)}(n^{1/m} Y)`.
    Clique { k: usize, beta: f64 },
}

/// Binomial input uses exactly `n` points; Poisson input draws the count
/// from `Poisson(n)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    #[default]
    Binomial,
    Poisson,
}

/// Truncation radius for dimension experiments.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum RhoSpec {
    /// Ten times the median `N_k` of a pilot sample at the smallest `n`.
    #[default]
    Auto,
    Infinite,
    Fixed(f64),
}

impl Serialize for RhoSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RhoSpec::Auto => s.serialize_str("auto"),
            RhoSpec::Infinite => s.serialize_str("inf"),
            RhoSpec::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for RhoSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
            Null(()),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v > 0.0 => Ok(RhoSpec::Fixed(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("rho must be positive, got {v}"))),
            Raw::Word(w) if w == "auto" => Ok(RhoSpec::Auto),
            Raw::Word(w) if w == "inf" || w == "infinity" => Ok(RhoSpec::Infinite),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("unknown rho `{w}`"))),
            Raw::Null(()) => Ok(RhoSpec::Infinite),
        }
    }
}

/// Pass/fail thresholds. Unset fields are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criteria {
    /// `|mean - limit|` at the largest `n` must be below this.
    #[serde(default)]
    pub max_abs_bias: Option<f64>,
    /// `|mean - limit| / |limit|` at the largest `n` must be below this.
    #[serde(default)]
    pub max_rel_bias: Option<f64>,
    /// `|mean - limit|` must strictly decrease along the grid.
    #[serde(default)]
    pub bias_decreasing: bool,
    /// `|n_var - sigma2| / |sigma2|` at the largest `n` must be at most this.
    #[serde(default)]
    pub var_rel_tol: Option<f64>,
    /// Every row must have KS distance below `ks_coef / sqrt(R)`
    /// (1.36 is the 5% Kolmogorov critical value).
    #[serde(default)]
    pub ks_coef: Option<f64>,
}

/// An experiment: one statistic on one density over a grid of sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub statistic: StatisticSpec,
    pub density: Density,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub rho: RhoSpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub input: InputMode,
    /// Overrides the built-in variance constant.
    #[serde(default)]
    pub sigma2_theory: Option<f64>,
    #[serde(default)]
    pub criteria: Criteria,
    /// Write an SVG histogram per grid size.
    #[serde(default)]
    pub svg: bool,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.density.validate()?;
        if self.n_grid.is_empty() {
            return Err(invalid("n_grid must be nonempty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_grid must be strictly increasing"));
        }
        if self.n_grid[0] == 0 {
            return Err(invalid("grid sizes must be positive"));
        }
        if self.replicates == 0 {
            return Err(invalid("need at least one replicate"));
        }
        if self.k() < 3 {
            return Err(invalid("k must be at least 3"));
        }
        match self.statistic {
            StatisticSpec::Clique { k, beta } if k == 0 || !(beta > 0.0) => {
                Err(invalid("clique needs k >= 1 and beta > 0"))
            }
            StatisticSpec::Renyi { alpha } if !(alpha > 0.0) => Err(invalid("renyi needs alpha > 0")),
            StatisticSpec::RAlpha { alpha } if alpha == 0.0 => Err(invalid("r_alpha needs alpha != 0")),
            _ => Ok(()),
        }
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(DEFAULT_K)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable 64-bit id of a statistic, used in seed derivation.
pub fn statistic_id(spec: &StatisticSpec) -> u64 {
    let json = serde_json::to_string(spec).expect("statistic serializes");
    let digest = Sha256::digest(json.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Stream key of replicate `i` at size `n`; injective in its arguments.
pub fn replicate_key(master_seed: u64, stat_id: u64, n: usize, i: usize) -> [u64; 4] {
    [master_seed, stat_id, n as u64, i as u64]
}

/// One grid size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub limit: Option<f64>,
    pub abs_bias: Option<f64>,
    pub n_var: f64,
    pub sigma2_theory: Option<f64>,
    pub ks: Option<f64>,
    pub pass: bool,
    /// Replicate values in replicate order.
    pub values: Vec<f64>,
}

/// Outcome of one configured criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Full record of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub master_seed: u64,
    pub mode: String,
    pub rho: Option<f64>,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ExperimentReport {
    pub fn final_row(&self) -> &ReportRow {
        self.rows.last().expect("grid is nonempty")
    }
}

/// Draws the input cloud of replicate `i` at size `n`.
pub fn sample_input<R: Rng + ?Sized>(density: &Density, n: usize, mode: InputMode, rng: &mut R) -> PointCloud {
    let count = match mode {
        InputMode::Binomial => n,
        InputMode::Poisson => poisson_count(n as f64, rng) as usize,
    };
    density.sample(count, rng)
}

/// Ten times the median `N_k` over a pilot cloud.
fn auto_rho(cfg: &ExperimentConfig) -> f64 {
    let k = cfg.k();
    let n = cfg.n_grid[0];
    let mut rng = stream([cfg.master_seed, statistic_id(&cfg.statistic), n as u64, u64::MAX]);
    let cloud = sample_input(&cfg.density, n, InputMode::Binomial, &mut rng);
    let index = SpatialIndex::build(&cloud);
    let mut nk: Vec<f64> = (0..cloud.len())
        .map(|i| index.knn_distances(i, k).expect("valid id")[k - 1])
        .collect();
    nk.sort_by(f64::total_cmp);
    let med = nk.get(nk.len() / 2).copied().unwrap_or(f64::INFINITY);
    if med.is_finite() {
        10.0 * med
    } else {
        f64::INFINITY
    }
}

/// The truncation radius an experiment will use (`None` if not a
/// dimension experiment).
pub fn resolve_rho(cfg: &ExperimentConfig) -> Option<f64> {
    match cfg.statistic {
        StatisticSpec::Dim => Some(match cfg.rho {
            RhoSpec::Auto => auto_rho(cfg),
            RhoSpec::Infinite => f64::INFINITY,
            RhoSpec::Fixed(v) => v,
        }),
        _ => None,
    }
}

/// Value of the statistic on one cloud.
pub fn evaluate_statistic(cfg: &ExperimentConfig, cloud: &PointCloud, rho: Option<f64>) -> Result<f64> {
    Ok(match cfg.statistic {
        StatisticSpec::Dim => {
            let vals = dim_values(cloud, cfg.k(), rho.unwrap_or(f64::INFINITY))?;
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        }
        StatisticSpec::RAlpha { alpha } => r_alpha_statistic(cloud, alpha, None)?.value,
        StatisticSpec::Volume => volume_estimate(cloud, None)?.value,
        StatisticSpec::Shannon => shannon_estimate(cloud, None)?.value,
        StatisticSpec::Renyi { alpha } => renyi_tsallis_estimates(cloud, alpha)?.0,
        StatisticSpec::Clique { k, beta } => clique_count(cloud, k, beta, true, None)?.value,
    })
}

/// Limit of the statistic, when the density provides the needed integrals.
pub fn statistic_limit(cfg: &ExperimentConfig) -> Option<f64> {
    let d = &cfg.density;
    let m = d.intrinsic_dim();
    let mf = m as f64;
    match cfg.statistic {
        StatisticSpec::Dim => Some(mf),
        StatisticSpec::RAlpha { alpha } => d.true_i_rho(1.0 - alpha / mf).ok().map(|i| r_alpha_constant(m, alpha) * i),
        StatisticSpec::Volume => d.support_volume(),
        StatisticSpec::Shannon => d.true_shannon().ok(),
        StatisticSpec::Renyi { alpha } => {
            let rho = 1.0 - alpha / mf;
            d.true_i_rho(rho).ok().map(|i| i.ln() / (1.0 - rho))
        }
        StatisticSpec::Clique { k, beta } => clique_limit(k, beta, d).ok(),
    }
}

/// Built-in variance constant for `n Var` (binomial) or `lambda Var`
/// (Poisson), when it has a closed form.
pub fn builtin_sigma2(cfg: &ExperimentConfig) -> Option<f64> {
    let m = cfg.density.intrinsic_dim() as f64;
    match (cfg.statistic, cfg.input) {
        (StatisticSpec::Dim, InputMode::Poisson) if cfg.k() > 3 => Some(m * m / (cfg.k() as f64 - 3.0)),
        (StatisticSpec::Clique { k, beta }, mode) => {
            let c = sigma2_clique(k, beta, &cfg.density, J_SAMPLES, cfg.master_seed).ok()?;
            Some(match mode {
                InputMode::Binomial => c.corrected.value,
                InputMode::Poisson => c.tau2.value,
            })
        }
        _ => None,
    }
}

/// Replicate values at size `n`, in replicate order.
pub fn replicate_values(cfg: &ExperimentConfig, n: usize, rho: Option<f64>) -> Result<Vec<f64>> {
    let id = statistic_id(&cfg.statistic);
    (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(replicate_key(cfg.master_seed, id, n, i));
            let cloud = sample_input(&cfg.density, n, cfg.input, &mut rng);
            evaluate_statistic(cfg, &cloud, rho)
        })
        .collect()
}

/// Which family of checks a run is for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Lln,
    Variance,
    Clt,
}

impl RunMode {
    fn name(self) -> &'static str {
        match self {
            RunMode::Lln => "lln",
            RunMode::Variance => "variance",
            RunMode::Clt => "clt",
        }
    }
}

pub fn run_lln(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(cfg, RunMode::Lln)
}

pub fn run_variance(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(cfg, RunMode::Variance)
}

pub fn run_clt(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(cfg, RunMode::Clt)
}

/// Runs every grid size and evaluates the configured criteria.
pub fn run(cfg: &ExperimentConfig, mode: RunMode) -> Result<ExperimentReport> {
    cfg.validate()?;
    if mode != RunMode::Lln && cfg.replicates < 2 {
        return Err(invalid("variance and CLT runs need at least 2 replicates"));
    }
    let start = Instant::now();
    let rho = resolve_rho(cfg);
    let limit = statistic_limit(cfg);
    let sigma2 = cfg.sigma2_theory.or_else(|| builtin_sigma2(cfg));
    let r = cfg.replicates as f64;
    let crit = &cfg.criteria;
    let last = cfg.n_grid.len() - 1;

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (idx, &n) in cfg.n_grid.iter().enumerate() {
        let values = replicate_values(cfg, n, rho)?;
        let (mean, var) = mean_var(&values);
        let ks = match standardize(&values) {
            Ok(z) => Some(ks_distance(&z, normal_cdf)?),
            Err(e) if mode == RunMode::Clt => return Err(e),
            Err(_) => None,
        };
        let abs_bias = limit.map(|l| (mean - l).abs());
        let n_var = n as f64 * var;
        let mut pass = true;
        if idx == last {
            if let (Some(tol), Some(b)) = (crit.max_abs_bias, abs_bias) {
                pass &= b < tol;
            }
            if let (Some(tol), Some(b), Some(l)) = (crit.max_rel_bias, abs_bias, limit) {
                pass &= b < tol * l.abs();
            }
            if let (Some(tol), Some(s)) = (crit.var_rel_tol, sigma2) {
                pass &= (n_var - s).abs() <= tol * s.abs();
            }
        }
        if let Some(coef) = crit.ks_coef {
            pass &= ks.is_some_and(|d| d < coef / r.sqrt());
        }
        rows.push(ReportRow {
            n,
            mean,
            se: (var / r).sqrt(),
            limit,
            abs_bias,
            n_var,
            sigma2_theory: sigma2,
            ks,
            pass,
            values,
        });
    }

    let checks = evaluate_checks(cfg, &rows, limit, sigma2);
    let pass = checks.iter().all(|c| c.passed);
    Ok(ExperimentReport {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
        mode: mode.name().into(),
        rho,
        rows,
        checks,
        pass,
        wall_time: start.elapsed(),
    })
}

fn evaluate_checks(cfg: &ExperimentConfig, rows: &[ReportRow], limit: Option<f64>, sigma2: Option<f64>) -> Vec<Check> {
    let crit = &cfg.criteria;
    let fin = rows.last().expect("grid is nonempty");
    let r = cfg.replicates as f64;
    let mut out = Vec::new();
    let unavailable = |name: &str, what: &str| Check {
        name: name.into(),
        passed: false,
        detail: format!("{what} unavailable"),
    };
    if let Some(tol) = crit.max_abs_bias {
        out.push(match fin.abs_bias {
            Some(b) => Check {
                name: "max_abs_bias".into(),
                passed: b < tol,
                detail: format!("|bias| = {b} at n = {}, tolerance {tol}", fin.n),
            },
            None => unavailable("max_abs_bias", "limit"),
        });
    }
    if let Some(tol) = crit.max_rel_bias {
        out.push(match (fin.abs_bias, limit) {
            (Some(b), Some(l)) => Check {
                name: "max_rel_bias".into(),
                passed: b < tol * l.abs(),
                detail: format!("|bias|/|limit| = {} at n = {}, tolerance {tol}", b / l.abs(), fin.n),
            },
            _ => unavailable("max_rel_bias", "limit"),
        });
    }
    if crit.bias_decreasing {
        let biases: Option<Vec<f64>> = rows.iter().map(|r| r.abs_bias).collect();
        out.push(match biases {
            Some(b) => Check {
                name: "bias_decreasing".into(),
                passed: b.windows(2).all(|w| w[1] < w[0]),
                detail: format!("|bias| along grid: {b:?}"),
            },
            None => unavailable("bias_decreasing", "limit"),
        });
    }
    if let Some(tol) = crit.var_rel_tol {
        out.push(match sigma2 {
            Some(s) => Check {
                name: "var_rel_tol".into(),
                passed: (fin.n_var - s).abs() <= tol * s.abs(),
                detail: format!("n Var = {} vs {s} at n = {}, tolerance {tol}", fin.n_var, fin.n),
            },
            None => unavailable("var_rel_tol", "variance constant"),
        });
    }
    if let Some(coef) = crit.ks_coef {
        let crit_val = coef / r.sqrt();
        let worst = rows.iter().filter_map(|r| r.ks).fold(0.0, f64::max);
        let all = rows.iter().all(|r| r.ks.is_some_and(|d| d < crit_val));
        out.push(Check {
            name: "ks".into(),
            passed: all,
            detail: format!("max KS = {worst}, critical value {crit_val}"),
        });
    }
    out
}
