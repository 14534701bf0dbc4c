use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use amod_core::forecast::metrics::write_metric_table;
use amod_core::forecast::{
    day_samples, evaluate, train, Dataset, DistFamily, ForecastModel, ModelConfig, Sample, TrainConfig,
};
use amod_core::ingest::{historical_moments, StdDivisor};
use amod_core::network::normalized_adjacency;
use anyhow::{bail, Result};
use clap::Args;

use crate::config::RunManifest;
use crate::data::IngestedData;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory written by `amod ingest`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// poisson, normal, tnormal, zpoisson or nb.
    #[arg(long, default_value = "poisson")]
    pub family: DistFamily,
    /// Prediction-interval level of the reported MPIW and PICP, percent.
    #[arg(long, default_value_t = 95.0)]
    pub pi: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Past intervals fed to the encoder.
    #[arg(long, default_value_t = 12)]
    pub lag: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub gcn_layers: usize,
    /// Forecast horizon; must cover the simulation look-ahead.
    #[arg(long, default_value_t = 6)]
    pub horizon: usize,
    /// Trailing days held out for validation and the metric table.
    #[arg(long, default_value_t = 1)]
    pub validation_days: usize,
}

fn collect(model: &ForecastModel, days: &[Vec<Sample>]) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    let (mut thetas, mut truth) = (Vec::new(), Vec::new());
    for s in days.iter().flatten() {
        let f = model.forward(&s.lags, &s.hist)?;
        for i in 0..s.target.nrows() {
            for h in 0..s.target.ncols() {
                thetas.push(*f.theta(i, h));
                truth.push(s.target[[i, h]]);
            }
        }
    }
    Ok((thetas, truth))
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let data = IngestedData::load(&args.data)?;
    let n_days = data.days.len();
    // A single day trains and reports on itself.
    let validation = args.validation_days.min(n_days.saturating_sub(1));
    let moments = historical_moments(&data.days[..n_days - validation], StdDivisor::Population)?;
    let samples: Vec<Vec<Sample>> = data.days.iter().map(|d| day_samples(d, &moments, args.lag, args.horizon)).collect();
    if samples.iter().all(Vec::is_empty) {
        bail!("days of {} intervals are too short for lag {} and horizon {}", data.sidecar.intervals_per_day, args.lag, args.horizon);
    }
    let dataset = Dataset::chronological(samples, validation);

    let config = ModelConfig {
        family: args.family,
        lag: args.lag,
        hidden: args.hidden,
        gcn_layers: args.gcn_layers,
        horizon: args.horizon,
        ..ModelConfig::default()
    };
    let mut model = ForecastModel::new(config, normalized_adjacency(&data.net)?, args.seed)?;
    let cells = (moments.regions() * moments.intervals()).max(1);
    let spread = (0..moments.regions())
        .flat_map(|i| (0..moments.intervals()).map(move |k| (i, k)))
        .map(|(i, k)| moments.sigma(i, k))
        .sum::<f64>()
        / cells as f64;
    model.warm_start(spread);
    let tc = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        patience: args.patience,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let outcome = train(&model, &dataset, &tc)?;

    let eval_days = if dataset.validation.iter().any(|d| !d.is_empty()) { &dataset.validation } else { &dataset.train };
    let (thetas, truth) = collect(&outcome.model, eval_days)?;
    let report = evaluate(args.family, &thetas, &truth, args.pi)?;

    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("model.json"), outcome.model.to_json()? + "\n")?;
    write_metric_table(&[(args.family, args.pi, report)], BufWriter::new(File::create(args.out.join("metrics.csv"))?))?;
    let mut w = csv::Writer::from_path(args.out.join("trace.csv"))?;
    for e in &outcome.trace {
        w.serialize(e)?;
    }
    w.flush()?;

    let config: BTreeMap<String, String> = [
        ("data", args.data.display().to_string()),
        ("family", args.family.to_string()),
        ("pi", args.pi.to_string()),
        ("epochs", args.epochs.to_string()),
        ("learning_rate", args.learning_rate.to_string()),
        ("patience", args.patience.to_string()),
        ("lag", args.lag.to_string()),
        ("hidden", args.hidden.to_string()),
        ("gcn_layers", args.gcn_layers.to_string()),
        ("horizon", args.horizon.to_string()),
        ("validation_days", validation.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    RunManifest::start("train", config, args.seed, &args.out).finish()?;
    println!(
        "trained {} model for {} epochs (best {:?}) -> {}",
        args.family,
        outcome.trace.len(),
        outcome.best_epoch,
        args.out.display()
    );
    Ok(())
}
