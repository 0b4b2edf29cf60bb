use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mlimits_core::constants::{sigma2, sigma2_clique, MCIntegrationParams};
use mlimits_core::estimators::{
    clique_count, correlation_dimension, dim_estimate, renyi_tsallis_estimates, shannon_estimate, volume_estimate,
};
use mlimits_core::harness::{self, render_outputs, ExperimentConfig, ExperimentReport, InputMode, RhoSpec, RunMode};
use mlimits_core::rng::stream;
use mlimits_core::{Density, FunctionalKind, PointCloud, PointFunctional, SpatialIndex};

#[derive(Parser)]
#[command(name = "mlimits", version, about = "Nearest-neighbor and clique-count statistics on sampled manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's seed where it has one.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a point cloud from a density and write it as CSV.
    Sample(Common),
    /// Intrinsic dimension estimate of a cloud.
    Dim(Common),
    /// Shannon and Renyi/Tsallis entropy estimates of a cloud.
    Entropy(Common),
    /// Support volume estimate of a cloud.
    Volume(Common),
    /// Rips clique counts and correlation dimension of a cloud.
    Rips(Common),
    /// Limiting constants of a functional on a density.
    Constants(Common),
    /// Law of large numbers experiment.
    VerifyLln(Common),
    /// Variance asymptotics experiment.
    VerifyVar(Common),
    /// Normal approximation experiment.
    VerifyClt(Common),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleConfig {
    density: Density,
    n: usize,
    #[serde(default)]
    input: InputMode,
    #[serde(default)]
    seed: u64,
}

/// A cloud CSV plus its intrinsic dimension. The density, when given,
/// supplies the theoretical limits.
#[derive(Deserialize)]
struct CloudSource {
    cloud: PathBuf,
    m: usize,
    #[serde(default)]
    density: Option<Density>,
}

#[derive(Deserialize)]
struct DimConfig {
    #[serde(flatten)]
    source: CloudSource,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "infinite_rho")]
    rho: RhoSpec,
}

#[derive(Deserialize)]
struct EntropyConfig {
    #[serde(flatten)]
    source: CloudSource,
    /// Renyi/Tsallis order is `1 - alpha/m`.
    #[serde(default)]
    alpha: Option<f64>,
}

#[derive(Deserialize)]
struct VolumeConfig {
    #[serde(flatten)]
    source: CloudSource,
}

#[derive(Deserialize)]
struct RipsConfig {
    #[serde(flatten)]
    source: CloudSource,
    k: usize,
    beta: f64,
    #[serde(default)]
    scaled: bool,
    /// Radii for the correlation-dimension regression.
    #[serde(default)]
    correlation_grid: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsConfig {
    functional: PointFunctional,
    density: Density,
    #[serde(default)]
    replicates: Option<usize>,
    #[serde(default)]
    seed: u64,
}

fn default_k() -> usize {
    harness::DEFAULT_K
}

fn infinite_rho() -> RhoSpec {
    RhoSpec::Infinite
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl CloudSource {
    /// Relative cloud paths are resolved against the config's directory.
    fn load(&self, config: &Path) -> Result<PointCloud> {
        let path = if self.cloud.is_relative() {
            config.parent().unwrap_or(Path::new(".")).join(&self.cloud)
        } else {
            self.cloud.clone()
        };
        PointCloud::load_csv(&path, self.m).with_context(|| format!("loading cloud {}", path.display()))
    }
}

fn emit<T: Serialize>(out: &Path, name: &str, record: &T) -> Result<()> {
    fs::create_dir_all(out)?;
    let json = serde_json::to_string_pretty(record)?;
    fs::write(out.join(format!("{name}.json")), &json)?;
    // a closed pipe downstream is not an error
    let _ = writeln!(std::io::stdout(), "{json}");
    Ok(())
}

fn sample(c: &Common) -> Result<()> {
    let cfg: SampleConfig = read_config(&c.config)?;
    cfg.density.validate()?;
    let seed = c.seed.unwrap_or(cfg.seed);
    let mut rng = stream([seed, 0, 0, 0]);
    let cloud = harness::sample_input(&cfg.density, cfg.n, cfg.input, &mut rng);
    fs::create_dir_all(&c.out)?;
    let path = c.out.join("cloud.csv");
    cloud.save_csv(&path)?;
    emit(
        &c.out,
        "sample",
        &serde_json::json!({
            "density": cfg.density,
            "n": cloud.len(),
            "m": cloud.intrinsic_dim(),
            "d": cloud.ambient_dim(),
            "seed": seed,
            "cloud": path,
        }),
    )
}

fn dim(c: &Common) -> Result<()> {
    let cfg: DimConfig = read_config(&c.config)?;
    let cloud = cfg.source.load(&c.config)?;
    if cfg.k < 3 || cfg.k >= cloud.len() {
        bail!("k = {} needs 3 <= k < n = {}", cfg.k, cloud.len());
    }
    let rho = match cfg.rho {
        RhoSpec::Infinite => f64::INFINITY,
        RhoSpec::Fixed(r) => r,
        RhoSpec::Auto => {
            let index = SpatialIndex::build(&cloud);
            let mut nk = (0..cloud.len())
                .map(|i| index.knn_distances(i, cfg.k).map(|d| d[cfg.k - 1]))
                .collect::<mlimits_core::Result<Vec<f64>>>()?;
            nk.sort_by(f64::total_cmp);
            10.0 * nk[nk.len() / 2]
        }
    };
    let est = dim_estimate(&cloud, cfg.k, rho)?;
    emit(&c.out, "dim", &serde_json::json!({ "estimate": est, "k": cfg.k, "rho": rho.is_finite().then_some(rho) }))
}

fn entropy(c: &Common) -> Result<()> {
    let cfg: EntropyConfig = read_config(&c.config)?;
    let cloud = cfg.source.load(&c.config)?;
    let shannon = shannon_estimate(&cloud, cfg.source.density.as_ref())?;
    let renyi = match cfg.alpha {
        Some(alpha) => {
            let (renyi, tsallis) = renyi_tsallis_estimates(&cloud, alpha)?;
            Some(serde_json::json!({
                "alpha": alpha,
                "order": 1.0 - alpha / cfg.source.m as f64,
                "renyi": renyi,
                "tsallis": tsallis,
            }))
        }
        None => None,
    };
    emit(&c.out, "entropy", &serde_json::json!({ "shannon": shannon, "renyi_tsallis": renyi }))
}

fn volume(c: &Common) -> Result<()> {
    let cfg: VolumeConfig = read_config(&c.config)?;
    let cloud = cfg.source.load(&c.config)?;
    emit(&c.out, "volume", &volume_estimate(&cloud, cfg.source.density.as_ref())?)
}

fn rips(c: &Common) -> Result<()> {
    let cfg: RipsConfig = read_config(&c.config)?;
    let cloud = cfg.source.load(&c.config)?;
    let est = clique_count(&cloud, cfg.k, cfg.beta, cfg.scaled, cfg.source.density.as_ref())?;
    let fit = match &cfg.correlation_grid {
        Some(grid) => Some(correlation_dimension(&cloud, grid)?),
        None => None,
    };
    emit(&c.out, "rips", &serde_json::json!({ "clique": est, "correlation_dimension": fit }))
}

fn constants(c: &Common) -> Result<()> {
    let cfg: ConstantsConfig = read_config(&c.config)?;
    cfg.density.validate()?;
    let seed = c.seed.unwrap_or(cfg.seed);
    let m = cfg.density.intrinsic_dim();
    let xi = cfg.functional;
    let params = MCIntegrationParams::auto(&xi, 1.0, m, seed)?;
    let params = match cfg.replicates {
        Some(r) => params.with_replicates(r),
        None => params,
    };
    let limits = sigma2(&xi, &cfg.density, &params)?;
    let clique = match xi.kind {
        FunctionalKind::PhiK { k, beta } => Some(sigma2_clique(
            k,
            beta,
            &cfg.density,
            mlimits_core::constants::J_SAMPLES,
            seed,
        )?),
        _ => None,
    };
    emit(&c.out, "constants", &serde_json::json!({ "seed": seed, "constants": limits, "clique": clique }))
}

fn verify(c: &Common, mode: RunMode, stem: &str) -> Result<bool> {
    let text = fs::read_to_string(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", c.config.display()))?;
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    let report: ExperimentReport = harness::run(&cfg, mode)?;
    let paths = render_outputs(&report, &c.out, stem)?;
    for row in &report.rows {
        println!(
            "n={:<8} mean={:<12.6} se={:<10.3e} n_var={:<10.4} ks={} {}",
            row.n,
            row.mean,
            row.se,
            row.n_var,
            row.ks.map_or_else(|| "n/a".into(), |d| format!("{d:.4}")),
            if row.pass { "ok" } else { "FAIL" }
        );
    }
    for check in &report.checks {
        println!("{}: {} ({})", check.name, if check.passed { "pass" } else { "FAIL" }, check.detail);
    }
    println!("wrote {}", paths.csv.display());
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Sample(c) => sample(c).map(|_| true),
        Command::Dim(c) => dim(c).map(|_| true),
        Command::Entropy(c) => entropy(c).map(|_| true),
        Command::Volume(c) => volume(c).map(|_| true),
        Command::Rips(c) => rips(c).map(|_| true),
        Command::Constants(c) => constants(c).map(|_| true),
        Command::VerifyLln(c) => verify(c, RunMode::Lln, "lln"),
        Command::VerifyVar(c) => verify(c, RunMode::Variance, "variance"),
        Command::VerifyClt(c) => verify(c, RunMode::Clt, "clt"),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
