use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use amod_core::ingest::{
    aggregate_demand, format_timestamp, parse_trips, split_days, write_trips, DayWindow, DemandSidecar, TripFormat,
    SECONDS_PER_DAY,
};
use amod_core::network::{read_edges, read_zones, TimeGrid, ZoneNetwork};
use anyhow::{bail, Context, Result};
use clap::Args;

use crate::config::RunManifest;
use crate::data::{open, NetworkSettings};

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Trip CSV with pickup/dropoff timestamps and zone ids.
    #[arg(long)]
    pub trips: PathBuf,
    /// Zone CSV with columns zone_id,lat,lon.
    #[arg(long)]
    pub zones: PathBuf,
    /// Optional adjacency list with columns zone_id_a,zone_id_b; otherwise
    /// zones are linked to their nearest neighbours.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Aggregation interval, seconds; must divide a day.
    #[arg(long, default_value_t = 300)]
    pub interval_sec: u32,
    /// Mean vehicle speed behind the travel-time matrix.
    #[arg(long, default_value_t = 8.0)]
    pub speed_mps: f64,
    /// Nearest neighbours linked per zone when no edge list is given.
    #[arg(long, default_value_t = 3)]
    pub knn: usize,
    /// Trip column names: pickup time, dropoff time, pickup zone, dropoff zone.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub columns: Option<Vec<String>>,
    /// chrono format of the timestamps.
    #[arg(long, default_value = "%Y-%m-%d %H:%M:%S")]
    pub datetime_format: String,
}

pub fn run(args: &IngestArgs) -> Result<()> {
    if args.interval_sec == 0 || SECONDS_PER_DAY % args.interval_sec as i64 != 0 {
        bail!("--interval-sec {} does not divide a day", args.interval_sec);
    }
    let zones = read_zones(open(&args.zones)?).with_context(|| format!("reading {}", args.zones.display()))?;
    let edges = match &args.edges {
        Some(path) => Some(read_edges(open(path)?).with_context(|| format!("reading {}", path.display()))?),
        None => None,
    };
    let net = ZoneNetwork::from_lat_lon(&zones, edges.as_deref(), args.speed_mps, args.knn)?;

    let mut format = TripFormat { datetime_format: args.datetime_format.clone(), ..TripFormat::default() };
    if let Some(cols) = &args.columns {
        format.pickup_time = cols[0].clone();
        format.dropoff_time = cols[1].clone();
        format.pickup_zone = cols[2].clone();
        format.dropoff_zone = cols[3].clone();
    }
    let parsed = parse_trips(open(&args.trips)?, &format, &net).with_context(|| format!("reading {}", args.trips.display()))?;
    if parsed.trips.is_empty() {
        bail!("no usable trips in {}", args.trips.display());
    }

    fs::create_dir_all(args.out.join("demand"))?;
    let grid = TimeGrid { delta: args.interval_sec, ..TimeGrid::default() };
    let mut days = Vec::new();
    for (start, trips) in split_days(&parsed.trips) {
        let window = DayWindow::full_day(start, &grid);
        let (tensor, _) = aggregate_demand(&trips, &net, &grid, window);
        let name = format!("{}.csv", &format_timestamp(start)[..10]);
        tensor.write_csv(BufWriter::new(File::create(args.out.join("demand").join(&name))?))?;
        days.push((start, name));
    }

    let mut w = csv::Writer::from_path(args.out.join("zones.csv"))?;
    for z in &zones {
        w.serialize(z)?;
    }
    w.flush()?;
    if let Some(path) = &args.edges {
        fs::copy(path, args.out.join("edges.csv"))?;
    }
    let settings = NetworkSettings { speed_mps: args.speed_mps, knn: args.knn, has_edges: args.edges.is_some() };
    fs::write(args.out.join("network.json"), serde_json::to_string_pretty(&settings)? + "\n")?;
    write_trips(&parsed.trips, &net, BufWriter::new(File::create(args.out.join("trips.csv"))?))?;
    let sidecar = DemandSidecar {
        interval_sec: args.interval_sec,
        intervals_per_day: (SECONDS_PER_DAY / args.interval_sec as i64) as usize,
        zone_ids: net.zone_ids().to_vec(),
        days,
        accepted_trips: parsed.trips.len(),
        skipped_rows: parsed.skipped,
    };
    fs::write(args.out.join("demand.json"), serde_json::to_string_pretty(&sidecar)? + "\n")?;

    let config: BTreeMap<String, String> = [
        ("trips", args.trips.display().to_string()),
        ("zones", args.zones.display().to_string()),
        ("edges", args.edges.as_ref().map_or(String::new(), |p| p.display().to_string())),
        ("interval_sec", args.interval_sec.to_string()),
        ("speed_mps", args.speed_mps.to_string()),
        ("knn", args.knn.to_string()),
        ("columns", format!("{},{},{},{}", format.pickup_time, format.dropoff_time, format.pickup_zone, format.dropoff_zone)),
        ("datetime_format", format.datetime_format.clone()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    RunManifest::start("ingest", config, 0, &args.out).finish()?;
    println!(
        "ingested {} trips ({} rows skipped) over {} days, {} zones -> {}",
        sidecar.accepted_trips,
        sidecar.skipped_rows,
        sidecar.days.len(),
        net.len(),
        args.out.display()
    );
    Ok(())
}
