use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use amod_core::forecast::ForecastModel;
use amod_core::mivr::IndexConvention;
use amod_core::sim::{write_report_csv, EngineKind, SimConfig, SimReport, SimRun};
use anyhow::{anyhow, Context, Result};
use clap::Args;
use rayon::prelude::*;

use crate::config::{convention_name, parse_convention, resolve, to_map, GridPoint, RunManifest};
use crate::data::{IngestedData, Source};
use crate::report::{write_reduction_table, Heatmap};

#[derive(Args, Debug)]
#[group(required = true, multiple = false, id = "source")]
pub struct SourceArgs {
    /// Directory written by `amod ingest`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use a seeded synthetic 10-zone city instead of ingested data.
    #[arg(long, value_name = "SEED")]
    pub synthetic: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SourceOptions {
    /// Trained model file or the `amod train` output directory holding
    /// `model.json`; required by the donn and duro engines.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Ingested day to simulate; negative counts from the last day.
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    pub day: i64,
    /// Log-normal noise of the synthetic forecast rates.
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
}

/// Simulation parameters. Each flag overrides the matching key of
/// `--config`.
#[derive(Args, Debug, Default)]
pub struct SimFlags {
    /// Flat `key = value` file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pickup-distance weight (`beta`).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Penalty per unsatisfied request (`gamma`).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Simulated rebalancing intervals (`Omega`).
    #[arg(long)]
    pub intervals: Option<usize>,
    /// Rebalancing interval, seconds (`Delta`).
    #[arg(long)]
    pub interval_sec: Option<u32>,
    /// Matching interval, seconds (`delta`).
    #[arg(long)]
    pub match_tick: Option<u32>,
    /// Maximum pickup time, seconds (`omega_bar`).
    #[arg(long)]
    pub max_pickup: Option<u32>,
    /// Maximum passenger waiting time, seconds (`omega_tilde`).
    #[arg(long)]
    pub max_wait: Option<u32>,
    /// Expected number of regions (`n`).
    #[arg(long)]
    pub regions: Option<usize>,
    /// Look-ahead intervals (`kappa`).
    #[arg(long)]
    pub kappa: Option<usize>,
    /// Historical days behind the moments (`m`).
    #[arg(long)]
    pub history_days: Option<usize>,
    /// Fleet size (`N_v`).
    #[arg(long)]
    pub fleet_size: Option<usize>,
    /// Prediction-interval level of the duro engine, percent.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Uncertainty budget of the robust engines.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Standard-deviation multiplier of the ro engine.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Day interval at which the simulation starts.
    #[arg(long)]
    pub start_interval: Option<usize>,
    /// Use recorded trip durations instead of network travel times.
    #[arg(long)]
    pub recorded_durations: Option<bool>,
    /// Multiplier from metres to objective distance units.
    #[arg(long)]
    pub distance_scale: Option<f64>,
    /// customer-vehicle or supply-oriented.
    #[arg(long, value_parser = parse_convention)]
    pub convention: Option<IndexConvention>,
    /// Record decision wall-clock times (makes report CSVs irreproducible).
    #[arg(long)]
    pub record_timing: Option<bool>,
}

impl SimFlags {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        fn push<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        let mut out = Vec::new();
        push(&mut out, "beta", &self.beta);
        push(&mut out, "gamma", &self.gamma);
        push(&mut out, "Omega", &self.intervals);
        push(&mut out, "Delta", &self.interval_sec);
        push(&mut out, "delta", &self.match_tick);
        push(&mut out, "omega_bar", &self.max_pickup);
        push(&mut out, "omega_tilde", &self.max_wait);
        push(&mut out, "n", &self.regions);
        push(&mut out, "kappa", &self.kappa);
        push(&mut out, "m", &self.history_days);
        push(&mut out, "N_v", &self.fleet_size);
        push(&mut out, "pi", &self.pi);
        push(&mut out, "budget", &self.budget);
        push(&mut out, "rho", &self.rho);
        push(&mut out, "seed", &self.seed);
        push(&mut out, "start_interval", &self.start_interval);
        push(&mut out, "recorded_durations", &self.recorded_durations);
        push(&mut out, "distance_scale", &self.distance_scale);
        if let Some(c) = self.convention {
            out.push(("convention", convention_name(c).to_string()));
        }
        push(&mut out, "record_timing", &self.record_timing);
        out
    }
}

/// Resolved configuration, the source it runs against and the manifest
/// entries describing both.
fn prepare(
    source: &SourceArgs,
    options: &SourceOptions,
    flags: &SimFlags,
    engine: Option<EngineKind>,
) -> Result<(SimConfig, Source, BTreeMap<String, String>)> {
    let mut overrides = flags.overrides();
    if let Some(e) = engine {
        overrides.push(("engine", e.to_string()));
    }
    let mut cfg = resolve(flags.config.as_deref(), &overrides)?;
    let mut extra = BTreeMap::new();
    let src = match (&source.data, source.synthetic) {
        (Some(dir), _) => {
            let data = IngestedData::load(dir)?;
            let idx = data.day_index(options.day)?;
            let day = data.day_context(idx, cfg.history_days)?;
            let model = match &options.model {
                Some(path) => {
                    let path = if path.is_dir() { path.join("model.json") } else { path.clone() };
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    extra.insert("model".to_string(), path.display().to_string());
                    Some(ForecastModel::from_json(&text)?)
                }
                None => None,
            };
            extra.insert("data".to_string(), dir.display().to_string());
            extra.insert("day".to_string(), data.sidecar.days[idx].1.trim_end_matches(".csv").to_string());
            Source::Data { data: Box::new(data), day: Box::new(day), model: model.map(Box::new) }
        }
        (None, Some(seed)) => {
            extra.insert("synthetic".to_string(), seed.to_string());
            extra.insert("noise".to_string(), options.noise.to_string());
            Source::synthetic(cfg.history_days as u64, options.noise, seed)?
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    src.fit_config(&mut cfg)?;
    let mut map = to_map(&cfg);
    map.extend(extra);
    Ok((cfg, src, map))
}

fn write_reports(path: &Path, reports: &[SimReport]) -> Result<()> {
    write_report_csv(reports, BufWriter::new(File::create(path)?))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub options: SourceOptions,
    /// none, dohv, donn, ro, duro or truth.
    #[arg(long)]
    pub engine: Option<EngineKind>,
    #[command(flatten)]
    pub sim: SimFlags,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let (cfg, source, map) = prepare(&args.source, &args.options, &args.sim, args.engine)?;
    let mut manifest = RunManifest::start("simulate", map, cfg.seed, &args.out);
    manifest.engine_grid.push(GridPoint::from(&cfg));
    let run = source.run(&cfg)?;
    fs::create_dir_all(&args.out)?;
    write_reports(&args.out.join("report.csv"), std::slice::from_ref(&run.report))?;
    fs::write(args.out.join("events.tsv"), &run.events)?;
    let mut w = csv::Writer::from_path(args.out.join("ticks.csv"))?;
    for t in &run.report.ticks {
        w.serialize(t)?;
    }
    w.flush()?;
    manifest.finish()?;
    summarize(&run);
    Ok(())
}

fn summarize(run: &SimRun) {
    let r = &run.report;
    println!(
        "{}: {} requests, {} served, {} left ({:.2}%), average wait {:.1} s",
        r.engine, r.generated, r.served, r.left, r.leaving_rate_pct, r.avg_wait_s
    );
    for incident in &r.incidents {
        log::warn!("{incident}");
    }
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub options: SourceOptions,
    #[command(flatten)]
    pub sim: SimFlags,
    #[arg(long, value_delimiter = ',', default_value = "none,dohv,donn,ro,duro")]
    pub engines: Vec<EngineKind>,
    /// Prediction-interval levels of the duro grid.
    #[arg(long, value_delimiter = ',', default_value = "50,75,95")]
    pub pis: Vec<f64>,
    /// Budgets of the ro and duro grids.
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,20")]
    pub budgets: Vec<f64>,
    /// Standard-deviation multipliers of the ro grid.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub rhos: Vec<f64>,
    /// Engine the reduction table is relative to; its first run is used.
    #[arg(long, default_value = "dohv")]
    pub baseline: EngineKind,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Also write SVG heatmaps.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs in deterministic order: engines as listed, robust grids row-major.
pub fn grid(base: &SimConfig, args: &CompareArgs) -> Vec<SimConfig> {
    let mut engines = args.engines.clone();
    if !engines.contains(&args.baseline) {
        engines.insert(0, args.baseline);
    }
    let mut out = Vec::new();
    for e in engines {
        let at = |pi: f64, budget: f64, rho: f64| SimConfig { engine: e, pi, budget, rho, ..base.clone() };
        match e {
            EngineKind::Duro => {
                for &pi in &args.pis {
                    for &b in &args.budgets {
                        out.push(at(pi, b, base.rho));
                    }
                }
            }
            EngineKind::Ro => {
                for &rho in &args.rhos {
                    for &b in &args.budgets {
                        out.push(at(base.pi, b, rho));
                    }
                }
            }
            _ => out.push(at(base.pi, base.budget, base.rho)),
        }
    }
    out
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let (base, source, map) = prepare(&args.source, &args.options, &args.sim, None)?;
    let configs = grid(&base, args);
    let mut manifest = RunManifest::start("compare", map, base.seed, &args.out);
    manifest.engine_grid = configs.iter().map(GridPoint::from).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;
    let reports: Vec<SimReport> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                log::info!("running {} pi={} budget={} rho={}", c.engine, c.pi, c.budget, c.rho);
                source.run(c).map(|r| r.report)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    fs::create_dir_all(&args.out)?;
    write_reports(&args.out.join("runs.csv"), &reports)?;
    let baseline = reports
        .iter()
        .find(|r| r.engine == args.baseline)
        .ok_or_else(|| anyhow!("baseline {} did not run", args.baseline))?;
    write_reduction_table(&reports, baseline, BufWriter::new(File::create(args.out.join("reduction.csv"))?))?;

    let maps = [
        (EngineKind::Duro, "pi", (|r: &SimReport| r.pi) as fn(&SimReport) -> f64),
        (EngineKind::Ro, "rho", |r: &SimReport| r.rho),
    ];
    let metrics = [
        ("wait", "average waiting time (s)", (|r: &SimReport| r.avg_wait_s) as fn(&SimReport) -> f64),
        ("leaving", "leaving rate (%)", |r: &SimReport| r.leaving_rate_pct),
    ];
    for (engine, axis, key) in maps {
        for (stem, label, metric) in metrics {
            let title = format!("{engine} {label}");
            if let Some(h) = Heatmap::from_runs(title, &reports, engine, axis, key, metric) {
                let name = format!("{engine}_{stem}_heatmap");
                h.write_csv(BufWriter::new(File::create(args.out.join(format!("{name}.csv")))?))?;
                if args.svg {
                    fs::write(args.out.join(format!("{name}.svg")), h.to_svg())?;
                }
            }
        }
    }
    manifest.finish()?;
    for r in &reports {
        println!(
            "{:<6} pi={:<4} budget={:<4} rho={:<4} wait {:>7.1} s  leaving {:>6.2}%",
            r.engine.to_string(),
            r.pi,
            r.budget,
            r.rho,
            r.avg_wait_s,
            r.leaving_rate_pct
        );
    }
    Ok(())
}
