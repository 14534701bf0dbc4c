//! Flat `key = value` configuration and run manifests.
//!
//! Simulation keys use the symbol names of the simulation parameters:
//!
//! | key | parameter |
//! |---|---|
//! | `beta`, `gamma` | pickup-distance weight, unsatisfied-request penalty |
//! | `Omega` | simulated intervals |
//! | `Delta` | rebalancing interval, seconds |
//! | `delta` | matching interval, seconds |
//! | `omega_bar` | maximum pickup time, seconds |
//! | `omega_tilde` | maximum passenger waiting time, seconds |
//! | `n` | number of regions (0 accepts the loaded network) |
//! | `kappa` | look-ahead intervals |
//! | `m` | historical days behind the moments |
//! | `N_v` | fleet size |
//!
//! plus `engine`, `pi`, `budget`, `rho`, `seed`, `start_interval`,
//! `recorded_durations`, `distance_scale`, `convention` and `record_timing`.
//! Keys are case-sensitive; `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use amod_core::ingest::format_timestamp;
use amod_core::mivr::IndexConvention;
use amod_core::sim::SimConfig;
use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SIM_KEYS: [&str; 21] = [
    "beta",
    "gamma",
    "Omega",
    "Delta",
    "delta",
    "omega_bar",
    "omega_tilde",
    "n",
    "kappa",
    "m",
    "N_v",
    "engine",
    "pi",
    "budget",
    "rho",
    "seed",
    "start_interval",
    "recorded_durations",
    "distance_scale",
    "convention",
    "record_timing",
];

/// Defaults of the command line: the library defaults, except that the
/// region count follows the loaded network and decision times are not
/// recorded, so that CSV outputs are reproducible.
pub fn cli_defaults() -> SimConfig {
    SimConfig { regions: 0, record_timing: false, ..SimConfig::default() }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e| anyhow!("`{key}`: cannot parse `{value}`: {e}"))
}

pub fn convention_name(c: IndexConvention) -> &'static str {
    match c {
        IndexConvention::CustomerVehicle => "customer-vehicle",
        IndexConvention::SupplyOriented => "supply-oriented",
    }
}

pub fn parse_convention(value: &str) -> Result<IndexConvention, String> {
    match value {
        "customer-vehicle" => Ok(IndexConvention::CustomerVehicle),
        "supply-oriented" => Ok(IndexConvention::SupplyOriented),
        other => Err(format!("unknown convention `{other}` (customer-vehicle or supply-oriented)")),
    }
}

pub fn set(cfg: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    let v = value.trim();
    match key {
        "beta" => cfg.beta = parse(key, v)?,
        "gamma" => cfg.gamma = parse(key, v)?,
        "Omega" => cfg.grid.omega = parse(key, v)?,
        "Delta" => cfg.grid.delta = parse(key, v)?,
        "delta" => cfg.grid.match_tick = parse(key, v)?,
        "omega_bar" => cfg.grid.max_pickup = parse(key, v)?,
        "omega_tilde" => cfg.grid.max_wait = parse(key, v)?,
        "n" => cfg.regions = parse(key, v)?,
        "kappa" => cfg.grid.kappa = parse(key, v)?,
        "m" => cfg.history_days = parse(key, v)?,
        "N_v" => cfg.fleet_size = parse(key, v)?,
        "engine" => cfg.engine = parse(key, v)?,
        "pi" => cfg.pi = parse(key, v)?,
        "budget" => cfg.budget = parse(key, v)?,
        "rho" => cfg.rho = parse(key, v)?,
        "seed" => cfg.seed = parse(key, v)?,
        "start_interval" => cfg.start_interval = parse(key, v)?,
        "recorded_durations" => cfg.recorded_durations = parse(key, v)?,
        "distance_scale" => cfg.distance_scale = parse(key, v)?,
        "convention" => cfg.convention = parse_convention(v).map_err(|e| anyhow!(e))?,
        "record_timing" => cfg.record_timing = parse(key, v)?,
        other => bail!("unknown configuration key `{other}`"),
    }
    Ok(())
}

pub fn to_map(cfg: &SimConfig) -> BTreeMap<String, String> {
    let g = &cfg.grid;
    let values: [String; 21] = [
        cfg.beta.to_string(),
        cfg.gamma.to_string(),
        g.omega.to_string(),
        g.delta.to_string(),
        g.match_tick.to_string(),
        g.max_pickup.to_string(),
        g.max_wait.to_string(),
        cfg.regions.to_string(),
        g.kappa.to_string(),
        cfg.history_days.to_string(),
        cfg.fleet_size.to_string(),
        cfg.engine.to_string(),
        cfg.pi.to_string(),
        cfg.budget.to_string(),
        cfg.rho.to_string(),
        cfg.seed.to_string(),
        cfg.start_interval.to_string(),
        cfg.recorded_durations.to_string(),
        cfg.distance_scale.to_string(),
        convention_name(cfg.convention).to_string(),
        cfg.record_timing.to_string(),
    ];
    SIM_KEYS.iter().map(|k| k.to_string()).zip(values).collect()
}

/// Key-value pairs of a config text, in file order.
pub fn parse_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`", no + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Sorted `key = value` lines; [`parse_text`] reads them back.
pub fn render(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// SHA-256 of the canonical rendering.
pub fn config_hash(map: &BTreeMap<String, String>) -> String {
    hex::encode(Sha256::digest(render(map).as_bytes()))
}

/// Library defaults, then the file, then the flag overrides.
pub fn resolve(file: Option<&Path>, overrides: &[(&str, String)]) -> Result<SimConfig> {
    let mut cfg = cli_defaults();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (k, v) in parse_text(&text)? {
            set(&mut cfg, &k, &v).with_context(|| format!("in {}", path.display()))?;
        }
    }
    for (k, v) in overrides {
        set(&mut cfg, k, v)?;
    }
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub engine: String,
    pub pi: f64,
    pub budget: f64,
    pub rho: f64,
}

impl From<&SimConfig> for GridPoint {
    fn from(c: &SimConfig) -> Self {
        GridPoint { engine: c.engine.to_string(), pi: c.pi, budget: c.budget, rho: c.rho }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub engine_grid: Vec<GridPoint>,
    pub output_dir: String,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64);
    format!("{}Z", format_timestamp(secs).replace(' ', "T"))
}

impl RunManifest {
    pub fn start(command: &str, config: BTreeMap<String, String>, seed: u64, output_dir: &Path) -> Self {
        RunManifest {
            command: command.to_string(),
            config_hash: config_hash(&config),
            config,
            seed,
            engine_grid: Vec::new(),
            output_dir: output_dir.display().to_string(),
            started_at: now(),
            finished_at: String::new(),
        }
    }

    /// Stamps the finish time and writes `manifest.json` into the output
    /// directory.
    pub fn finish(mut self) -> Result<()> {
        self.finished_at = now();
        let path = Path::new(&self.output_dir).join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}
