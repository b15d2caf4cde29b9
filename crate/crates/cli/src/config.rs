//! Experiment configuration: a versioned TOML tree plus flag overrides.
//!
//! Precedence is flags > file > built-in defaults. Unknown keys anywhere are
//! hard errors. Seeds are always explicit — there is no wall-clock fallback.
//! The resolved config is echoed into the output directory as `config.toml`
//! and round-trips through `parse_config` to an equal value.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use lookaround_core::convergence::RateMethod;
use lookaround_core::nn::dataset::DatasetKind;
use lookaround_core::nn::train::Schedule;
use lookaround_core::quad::NoiseMode;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the output root (and nothing else).
pub const OUT_ROOT_ENV: &str = "LOOKAROUND_OUT_ROOT";

/// Raw on-disk shape: shared keys plus a free-form `[params]` table that is
/// decoded per experiment kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(default)]
    params: toml::Table,
}

/// Fully-resolved experiment description: every default materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub kind: ExperimentKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentKind {
    QuadFixedPoints(QuadFixedPointsParams),
    QuadMonteCarlo(QuadMonteCarloParams),
    RateSweep(RateSweepParams),
    Train(TrainParams),
    Ablation(AblationParams),
    SweepD(SweepDParams),
    SweepK(SweepKParams),
    Landscape(LandscapeParams),
    SoupsCollapse(SoupsCollapseParams),
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::QuadFixedPoints(_) => "quad-fixed-points",
            ExperimentKind::QuadMonteCarlo(_) => "quad-monte-carlo",
            ExperimentKind::RateSweep(_) => "rate-sweep",
            ExperimentKind::Train(_) => "train",
            ExperimentKind::Ablation(_) => "ablation",
            ExperimentKind::SweepD(_) => "sweep-d",
            ExperimentKind::SweepK(_) => "sweep-k",
            ExperimentKind::Landscape(_) => "landscape",
            ExperimentKind::SoupsCollapse(_) => "soups-collapse",
        }
    }

    fn params_table(&self) -> Result<toml::Table> {
        let value = match self {
            ExperimentKind::QuadFixedPoints(p) => toml::Value::try_from(p),
            ExperimentKind::QuadMonteCarlo(p) => toml::Value::try_from(p),
            ExperimentKind::RateSweep(p) => toml::Value::try_from(p),
            ExperimentKind::Train(p) => toml::Value::try_from(p),
            ExperimentKind::Ablation(p) => toml::Value::try_from(p),
            ExperimentKind::SweepD(p) => toml::Value::try_from(p),
            ExperimentKind::SweepK(p) => toml::Value::try_from(p),
            ExperimentKind::Landscape(p) => toml::Value::try_from(p),
            ExperimentKind::SoupsCollapse(p) => toml::Value::try_from(p),
        }?;
        match value {
            toml::Value::Table(t) => Ok(t),
            other => bail!("params did not serialize to a table: {other:?}"),
        }
    }
}

fn decode<T: serde::de::DeserializeOwned>(params: toml::Table) -> Result<T> {
    toml::Value::Table(params)
        .try_into()
        .map_err(|e| anyhow!("bad [params] table: {e}"))
}

fn kind_from(name: &str, params: toml::Table) -> Result<ExperimentKind> {
    Ok(match name {
        "quad-fixed-points" => ExperimentKind::QuadFixedPoints(decode(params)?),
        "quad-monte-carlo" => ExperimentKind::QuadMonteCarlo(decode(params)?),
        "rate-sweep" => ExperimentKind::RateSweep(decode(params)?),
        "train" => ExperimentKind::Train(decode(params)?),
        "ablation" => ExperimentKind::Ablation(decode(params)?),
        "sweep-d" => ExperimentKind::SweepD(decode(params)?),
        "sweep-k" => ExperimentKind::SweepK(decode(params)?),
        "landscape" => ExperimentKind::Landscape(decode(params)?),
        "soups-collapse" => ExperimentKind::SoupsCollapse(decode(params)?),
        other => bail!(
            "unknown experiment kind '{other}' (expected one of quad-fixed-points, \
             quad-monte-carlo, rate-sweep, train, ablation, sweep-d, sweep-k, \
             landscape, soups-collapse)"
        ),
    })
}

/// Flag-level overrides collected from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Parses an optional config file for the given subcommand and merges flag
/// overrides, materializing every default.
pub fn parse_config(
    subcommand: &str,
    file: Option<&Path>,
    over: &Overrides,
) -> Result<ExperimentConfig> {
    let raw: RawConfig = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("cannot parse config file {}", path.display()))?
        }
        None => RawConfig {
            schema_version: SCHEMA_VERSION,
            kind: subcommand.to_string(),
            seed: None,
            out: None,
            workers: None,
            params: toml::Table::new(),
        },
    };

    if raw.schema_version != SCHEMA_VERSION {
        bail!(
            "unsupported schema_version {} (this build reads schema_version = {})",
            raw.schema_version,
            SCHEMA_VERSION
        );
    }
    if raw.kind != subcommand {
        bail!(
            "config kind '{}' does not match subcommand '{subcommand}'",
            raw.kind
        );
    }

    let kind = kind_from(&raw.kind, raw.params)?;
    validate(&kind)?;

    let seed = over
        .seed
        .or(raw.seed)
        .ok_or_else(|| anyhow!("no seed given: pass --seed or set `seed` in the config file"))?;
    let workers = over.workers.or(raw.workers).unwrap_or(0);
    let out = match over.out.clone().or(raw.out) {
        Some(p) => p,
        None => {
            let root = std::env::var_os(OUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"));
            root.join(format!("{}-seed{}", kind.name(), seed))
        }
    };

    Ok(ExperimentConfig {
        seed,
        out,
        workers,
        kind,
    })
}

impl ExperimentConfig {
    /// Serializes the resolved config back to the on-disk shape; parsing the
    /// result yields an equal `ExperimentConfig`.
    pub fn to_toml(&self) -> Result<String> {
        let raw = RawConfig {
            schema_version: SCHEMA_VERSION,
            kind: self.kind.name().to_string(),
            seed: Some(self.seed),
            out: Some(self.out.clone()),
            workers: Some(self.workers),
            params: self.kind.params_table()?,
        };
        Ok(toml::to_string_pretty(&raw)?)
    }
}

// ---------------------------------------------------------------------------
// Per-kind parameter tables. Every field has a usable default so a minimal
// config (kind + seed) runs. serde denies unknown keys in each table.
// ---------------------------------------------------------------------------

fn d4_ones() -> Vec<f64> {
    vec![1.0; 4]
}
fn curvatures() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadFixedPointsParams {
    pub a: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub gamma: f64,
    pub k: usize,
    pub d: usize,
    pub alpha: f64,
}

impl Default for QuadFixedPointsParams {
    fn default() -> Self {
        QuadFixedPointsParams {
            a: curvatures(),
            sigma2: d4_ones(),
            gamma: 0.05,
            k: 5,
            d: 3,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadMonteCarloParams {
    pub a: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub gamma: f64,
    pub k: usize,
    pub d: usize,
    pub alpha: f64,
    pub init: Vec<f64>,
    pub rounds: usize,
    pub trials: usize,
    pub noise: NoiseMode,
    pub methods: Vec<String>,
}

impl Default for QuadMonteCarloParams {
    fn default() -> Self {
        QuadMonteCarloParams {
            a: vec![1.0],
            sigma2: vec![1.0],
            gamma: 0.1,
            k: 5,
            d: 3,
            alpha: 0.5,
            init: vec![1.0],
            rounds: 100,
            trials: 20_000,
            noise: NoiseMode::Independent,
            methods: vec!["sgd".into(), "lookahead".into(), "lookaround".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateSweepParams {
    pub k: usize,
    pub beta: f64,
    pub alpha: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa_points: usize,
    pub methods: Vec<RateMethod>,
    pub svg: bool,
}

impl Default for RateSweepParams {
    fn default() -> Self {
        RateSweepParams {
            k: 20,
            beta: 0.99,
            alpha: 0.5,
            kappa_min: 1e1,
            kappa_max: 1e7,
            kappa_points: 13,
            methods: vec![RateMethod::Cm, RateMethod::Lookahead, RateMethod::Lookaround],
            svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub dataset: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub method: String,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub hidden: Vec<usize>,
    pub k: usize,
    pub d: usize,
    pub alpha: f64,
    pub momentum_beta: f64,
    pub carry_velocity: bool,
    pub parallel_replicas: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            dataset: DatasetKind::Spirals,
            n_train: 150,
            n_test: 600,
            data_seed: 9,
            method: "lookaround".into(),
            gamma: 0.4,
            epochs: 400,
            batch_size: 32,
            schedule: Schedule::Constant,
            hidden: vec![16, 16],
            k: 10,
            d: 3,
            alpha: 0.5,
            momentum_beta: 0.9,
            carry_velocity: false,
            parallel_replicas: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationParams {
    pub dataset: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub hidden: Vec<usize>,
    pub k: usize,
    pub d: usize,
    pub seeds: Vec<u64>,
}

impl Default for AblationParams {
    fn default() -> Self {
        AblationParams {
            dataset: DatasetKind::Spirals,
            n_train: 150,
            n_test: 600,
            data_seed: 9,
            gamma: 0.4,
            epochs: 400,
            batch_size: 32,
            schedule: Schedule::Constant,
            hidden: vec![16, 16],
            k: 10,
            d: 3,
            seeds: vec![11, 22, 33, 44, 55],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepDParams {
    pub dataset: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub hidden: Vec<usize>,
    pub k: usize,
    pub d_values: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepDParams {
    fn default() -> Self {
        SweepDParams {
            dataset: DatasetKind::Spirals,
            n_train: 150,
            n_test: 600,
            data_seed: 9,
            gamma: 0.4,
            epochs: 400,
            batch_size: 32,
            schedule: Schedule::Constant,
            hidden: vec![16, 16],
            k: 10,
            d_values: vec![1, 2, 3, 4, 5, 6],
            seeds: vec![11, 22, 33],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepKParams {
    pub dataset: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub hidden: Vec<usize>,
    pub d: usize,
    pub k_values: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepKParams {
    fn default() -> Self {
        SweepKParams {
            dataset: DatasetKind::Spirals,
            n_train: 150,
            n_test: 600,
            data_seed: 9,
            gamma: 0.4,
            epochs: 400,
            batch_size: 32,
            schedule: Schedule::Constant,
            hidden: vec![16, 16],
            d: 3,
            k_values: vec![1, 5, 50],
            seeds: vec![11, 22, 33],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeParams {
    pub dataset: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub gamma: f64,
    pub epochs: usize,
    /// 0 means full-batch.
    pub batch_size: usize,
    pub schedule: Schedule,
    pub hidden: Vec<usize>,
    pub k: usize,
    /// Per-replica jitter noise used to decorrelate the trio.
    pub jitter_sigma: f64,
    pub resolution: usize,
    /// Extra plane margin beyond the triangle, as a fraction of its span.
    pub margin: f64,
    pub svg: bool,
}

impl Default for LandscapeParams {
    fn default() -> Self {
        LandscapeParams {
            dataset: DatasetKind::Spirals,
            n_train: 150,
            n_test: 600,
            data_seed: 9,
            gamma: 0.1,
            epochs: 2000,
            batch_size: 0,
            schedule: Schedule::Constant,
            hidden: vec![16, 16],
            k: 8,
            jitter_sigma: 0.15,
            resolution: 25,
            margin: 0.25,
            svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoupsCollapseParams {
    pub dataset: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub hidden: Vec<usize>,
    /// Seeds of the two independently-trained nets whose average collapses.
    pub seed_a: u64,
    pub seed_b: u64,
    /// Small-lr replica-average run whose mean net must stay local.
    pub k: usize,
    pub d: usize,
    pub small_lr_gamma: f64,
    pub small_lr_epochs: usize,
}

impl Default for SoupsCollapseParams {
    fn default() -> Self {
        SoupsCollapseParams {
            dataset: DatasetKind::Spirals,
            n_train: 150,
            n_test: 600,
            data_seed: 9,
            gamma: 0.4,
            epochs: 400,
            batch_size: 32,
            schedule: Schedule::Constant,
            hidden: vec![16, 16],
            seed_a: 1001,
            seed_b: 2002,
            k: 10,
            d: 3,
            small_lr_gamma: 0.02,
            small_lr_epochs: 15,
        }
    }
}

// ---------------------------------------------------------------------------
// Validation. Range violations name the violated bound.
// ---------------------------------------------------------------------------

fn check(cond: bool, field: &str, bound: &str, got: impl std::fmt::Display) -> Result<()> {
    if cond {
        Ok(())
    } else {
        bail!("{field} out of range: require {bound}, got {got}")
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    check(alpha > 0.0 && alpha <= 1.0, "alpha", "α ∈ (0, 1]", alpha)
}

fn check_quad_model(a: &[f64], sigma2: &[f64], gamma: f64) -> Result<()> {
    check(!a.is_empty(), "a", "at least one coordinate", a.len())?;
    check(
        a.len() == sigma2.len(),
        "sigma2",
        "len(sigma2) = len(a)",
        sigma2.len(),
    )?;
    for &ai in a {
        check(ai > 0.0, "a", "a_i > 0", ai)?;
    }
    for &s in sigma2 {
        check(s >= 0.0, "sigma2", "σ²_i ≥ 0", s)?;
    }
    let l_max = a.iter().cloned().fold(f64::MIN, f64::max);
    check(
        gamma > 0.0 && gamma < 1.0 / l_max,
        "gamma",
        "γ ∈ (0, 1/L_max)",
        gamma,
    )
}

fn check_kd(k: usize, d: usize) -> Result<()> {
    check(k >= 1, "k", "k ≥ 1", k)?;
    check((1..=6).contains(&d), "d", "d ∈ [1, 6]", d)
}

fn check_nn_common(gamma: f64, epochs: usize, hidden: &[usize]) -> Result<()> {
    check(gamma > 0.0, "gamma", "γ > 0", gamma)?;
    check(epochs >= 1, "epochs", "epochs ≥ 1", epochs)?;
    for &h in hidden {
        check(h >= 1, "hidden", "layer width ≥ 1", h)?;
    }
    Ok(())
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    check(!seeds.is_empty(), "seeds", "at least one seed", seeds.len())
}

fn validate(kind: &ExperimentKind) -> Result<()> {
    match kind {
        ExperimentKind::QuadFixedPoints(p) => {
            check_quad_model(&p.a, &p.sigma2, p.gamma)?;
            check_kd(p.k, p.d)?;
            check_alpha(p.alpha)
        }
        ExperimentKind::QuadMonteCarlo(p) => {
            check_quad_model(&p.a, &p.sigma2, p.gamma)?;
            check_kd(p.k, p.d)?;
            check_alpha(p.alpha)?;
            check(
                p.init.len() == p.a.len(),
                "init",
                "len(init) = len(a)",
                p.init.len(),
            )?;
            check(p.rounds >= 1, "rounds", "rounds ≥ 1", p.rounds)?;
            check(p.trials >= 1, "trials", "trials ≥ 1", p.trials)?;
            for m in &p.methods {
                check(
                    matches!(m.as_str(), "sgd" | "lookahead" | "lookaround"),
                    "methods",
                    "each ∈ {sgd, lookahead, lookaround}",
                    m,
                )?;
            }
            Ok(())
        }
        ExperimentKind::RateSweep(p) => {
            check(p.k >= 1, "k", "k ≥ 1", p.k)?;
            check(p.beta >= 0.0 && p.beta < 1.0, "beta", "β ∈ [0, 1)", p.beta)?;
            check_alpha(p.alpha)?;
            check(p.kappa_min >= 1.0, "kappa_min", "κ ≥ 1", p.kappa_min)?;
            check(
                p.kappa_max >= p.kappa_min,
                "kappa_max",
                "κ_max ≥ κ_min",
                p.kappa_max,
            )?;
            check(
                p.kappa_points >= 2,
                "kappa_points",
                "kappa_points ≥ 2",
                p.kappa_points,
            )?;
            check(!p.methods.is_empty(), "methods", "at least one method", 0)
        }
        ExperimentKind::Train(p) => {
            check_nn_common(p.gamma, p.epochs, &p.hidden)?;
            check_kd(p.k, p.d)?;
            check_alpha(p.alpha)?;
            check(
                p.momentum_beta >= 0.0 && p.momentum_beta < 1.0,
                "momentum_beta",
                "β ∈ [0, 1)",
                p.momentum_beta,
            )?;
            check(p.batch_size >= 1, "batch_size", "batch_size ≥ 1", p.batch_size)?;
            check(
                matches!(p.method.as_str(), "sgd" | "momentum" | "lookahead" | "lookaround"),
                "method",
                "method ∈ {sgd, momentum, lookahead, lookaround}",
                &p.method,
            )
        }
        ExperimentKind::Ablation(p) => {
            check_nn_common(p.gamma, p.epochs, &p.hidden)?;
            check_kd(p.k, p.d)?;
            check(p.batch_size >= 1, "batch_size", "batch_size ≥ 1", p.batch_size)?;
            check_seeds(&p.seeds)?;
            check(p.seeds.len() >= 3, "seeds", "at least 3 seeds", p.seeds.len())
        }
        ExperimentKind::SweepD(p) => {
            check_nn_common(p.gamma, p.epochs, &p.hidden)?;
            check(p.k >= 1, "k", "k ≥ 1", p.k)?;
            check(p.batch_size >= 1, "batch_size", "batch_size ≥ 1", p.batch_size)?;
            check_seeds(&p.seeds)?;
            check(!p.d_values.is_empty(), "d_values", "at least one value", 0)?;
            for &d in &p.d_values {
                check((1..=6).contains(&d), "d_values", "each d ∈ [1, 6]", d)?;
            }
            Ok(())
        }
        ExperimentKind::SweepK(p) => {
            check_nn_common(p.gamma, p.epochs, &p.hidden)?;
            check((1..=6).contains(&p.d), "d", "d ∈ [1, 6]", p.d)?;
            check(p.batch_size >= 1, "batch_size", "batch_size ≥ 1", p.batch_size)?;
            check_seeds(&p.seeds)?;
            check(!p.k_values.is_empty(), "k_values", "at least one value", 0)?;
            for &k in &p.k_values {
                check(k >= 1, "k_values", "each k ≥ 1", k)?;
            }
            Ok(())
        }
        ExperimentKind::Landscape(p) => {
            check_nn_common(p.gamma, p.epochs, &p.hidden)?;
            check(p.k >= 1, "k", "k ≥ 1", p.k)?;
            check(
                p.jitter_sigma > 0.0,
                "jitter_sigma",
                "σ > 0",
                p.jitter_sigma,
            )?;
            check(
                p.resolution >= 2,
                "resolution",
                "resolution ≥ 2",
                p.resolution,
            )?;
            check(p.margin >= 0.0, "margin", "margin ≥ 0", p.margin)
        }
        ExperimentKind::SoupsCollapse(p) => {
            check_nn_common(p.gamma, p.epochs, &p.hidden)?;
            check_kd(p.k, p.d)?;
            check(p.batch_size >= 1, "batch_size", "batch_size ≥ 1", p.batch_size)?;
            check(
                p.small_lr_gamma > 0.0,
                "small_lr_gamma",
                "γ > 0",
                p.small_lr_gamma,
            )?;
            check(
                p.small_lr_epochs >= 1,
                "small_lr_epochs",
                "small_lr_epochs ≥ 1",
                p.small_lr_epochs,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_config_materializes_defaults_and_round_trips() {
        let f = write_tmp("schema_version = 1\nkind = \"train\"\nseed = 7\n");
        let cfg = parse_config("train", Some(f.path()), &Overrides::default()).unwrap();
        assert_eq!(cfg.seed, 7);
        match &cfg.kind {
            ExperimentKind::Train(p) => assert_eq!(*p, TrainParams::default()),
            other => panic!("wrong kind {other:?}"),
        }

        let echoed = cfg.to_toml().unwrap();
        let f2 = write_tmp(&echoed);
        let again = parse_config("train", Some(f2.path()), &Overrides::default()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_key_is_a_hard_error() {
        let f = write_tmp("schema_version = 1\nkind = \"train\"\nseed = 1\n[params]\nlearning_rate = 0.1\n");
        let err = parse_config("train", Some(f.path()), &Overrides::default()).unwrap_err();
        assert!(format!("{err:#}").contains("learning_rate"), "{err:#}");
    }

    #[test]
    fn alpha_violation_names_the_bound() {
        let f = write_tmp(
            "schema_version = 1\nkind = \"quad-fixed-points\"\nseed = 1\n[params]\nalpha = 1.5\n",
        );
        let err = parse_config("quad-fixed-points", Some(f.path()), &Overrides::default())
            .unwrap_err();
        assert!(format!("{err:#}").contains("α ∈ (0, 1]"), "{err:#}");
    }

    #[test]
    fn seed_must_be_explicit() {
        let err = parse_config("train", None, &Overrides::default()).unwrap_err();
        assert!(format!("{err:#}").contains("seed"));
    }

    #[test]
    fn flags_override_file_values() {
        let f = write_tmp("schema_version = 1\nkind = \"train\"\nseed = 7\nworkers = 2\n");
        let over = Overrides {
            seed: Some(9),
            out: Some(PathBuf::from("elsewhere")),
            workers: None,
        };
        let cfg = parse_config("train", Some(f.path()), &over).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.out, PathBuf::from("elsewhere"));
        assert_eq!(cfg.workers, 2);
    }

    #[test]
    fn kind_mismatch_rejected() {
        let f = write_tmp("schema_version = 1\nkind = \"train\"\nseed = 1\n");
        assert!(parse_config("ablation", Some(f.path()), &Overrides::default()).is_err());
    }
}
