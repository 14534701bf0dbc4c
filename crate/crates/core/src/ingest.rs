//! Trip-record ingestion: CSV parsing, per-interval demand aggregation,
//! historical moments and occupied-vehicle transition estimates.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDateTime;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DemandTensor, OdTensor, TimeGrid, TransitionMatrices, ZoneNetwork};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One completed trip. Times are wall-clock seconds since the epoch (no
/// time-zone conversion is applied); zones are network indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripRecord {
    pub pickup_time: i64,
    pub dropoff_time: i64,
    pub pickup_zone: usize,
    pub dropoff_zone: usize,
}

impl TripRecord {
    pub fn duration(&self) -> i64 {
        self.dropoff_time - self.pickup_time
    }
}

/// Column names and timestamp format of a trip file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripFormat {
    pub pickup_time: String,
    pub dropoff_time: String,
    pub pickup_zone: String,
    pub dropoff_zone: String,
    pub datetime_format: String,
}

impl Default for TripFormat {
    fn default() -> Self {
        TripFormat {
            pickup_time: "pickup_datetime".into(),
            dropoff_time: "dropoff_datetime".into(),
            pickup_zone: "PULocationID".into(),
            dropoff_zone: "DOLocationID".into(),
            datetime_format: "%Y-%m-%d %H:%M:%S".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedTrips {
    pub trips: Vec<TripRecord>,
    /// Rows rejected as malformed, out-of-network or time-inverted.
    pub skipped: usize,
}

pub fn parse_timestamp(raw: &str, format: &str) -> Option<i64> {
    let raw = raw.trim();
    NaiveDateTime::parse_from_str(raw, format)
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S"))
        .ok()
        .map(|t| t.and_utc().timestamp())
}

pub fn format_timestamp(epoch: i64) -> String {
    chrono::DateTime::from_timestamp(epoch, 0)
        .map(|t| t.naive_utc().format("%Y-%m-%d %H:%M:%S").to_string())
        .unwrap_or_default()
}

/// Parses a trip CSV. Rows that fail to parse, name a zone outside `net`,
/// or drop off before picking up are skipped and counted. More than half
/// of the rows being skipped is reported as a format error.
pub fn parse_trips<R: Read>(source: R, format: &TripFormat, net: &ZoneNetwork) -> Result<ParsedTrips> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column `{name}`")))
    };
    let (c_pu, c_do, c_puz, c_doz) =
        (col(&format.pickup_time)?, col(&format.dropoff_time)?, col(&format.pickup_zone)?, col(&format.dropoff_zone)?);
    let index = net.id_index();

    let mut out = ParsedTrips::default();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                rows += 1;
                out.skipped += 1;
                continue;
            }
        };
        rows += 1;
        let parsed = (|| {
            let pickup_time = parse_timestamp(record.get(c_pu)?, &format.datetime_format)?;
            let dropoff_time = parse_timestamp(record.get(c_do)?, &format.datetime_format)?;
            let pu: u32 = record.get(c_puz)?.parse().ok()?;
            let dz: u32 = record.get(c_doz)?.parse().ok()?;
            let trip = TripRecord {
                pickup_time,
                dropoff_time,
                pickup_zone: *index.get(&pu)?,
                dropoff_zone: *index.get(&dz)?,
            };
            (trip.dropoff_time >= trip.pickup_time).then_some(trip)
        })();
        match parsed {
            Some(t) => out.trips.push(t),
            None => out.skipped += 1,
        }
    }
    if rows > 0 && out.skipped * 2 > rows {
        return Err(Error::Format(format!("{} of {rows} rows are malformed", out.skipped)));
    }
    Ok(out)
}

/// Normalized trip file: epoch seconds and external zone ids.
pub fn write_trips<W: std::io::Write>(trips: &[TripRecord], net: &ZoneNetwork, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pickup_time", "dropoff_time", "pickup_zone", "dropoff_zone"])?;
    let ids = net.zone_ids();
    for t in trips {
        w.write_record([
            t.pickup_time.to_string(),
            t.dropoff_time.to_string(),
            ids[t.pickup_zone].to_string(),
            ids[t.dropoff_zone].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trips<R: Read>(reader: R, net: &ZoneNetwork) -> Result<Vec<TripRecord>> {
    #[derive(Deserialize)]
    struct Row {
        pickup_time: i64,
        dropoff_time: i64,
        pickup_zone: u32,
        dropoff_zone: u32,
    }
    let index = net.id_index();
    let mut out = Vec::new();
    let mut rdr = csv::Reader::from_reader(reader);
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        let zone = |id: u32| index.get(&id).copied().ok_or_else(|| Error::Format(format!("unknown zone {id}")));
        out.push(TripRecord {
            pickup_time: row.pickup_time,
            dropoff_time: row.dropoff_time,
            pickup_zone: zone(row.pickup_zone)?,
            dropoff_zone: zone(row.dropoff_zone)?,
        });
    }
    Ok(out)
}

/// A run of consecutive intervals starting at `start` (epoch seconds).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayWindow {
    pub start: i64,
    pub intervals: usize,
}

impl DayWindow {
    pub fn full_day(day_start: i64, grid: &TimeGrid) -> Self {
        DayWindow { start: day_start, intervals: (SECONDS_PER_DAY / grid.delta as i64) as usize }
    }

    pub fn interval_of(&self, t: i64, grid: &TimeGrid) -> Option<usize> {
        if t < self.start {
            return None;
        }
        let k = ((t - self.start) / grid.delta as i64) as usize;
        (k < self.intervals).then_some(k)
    }

    pub fn end(&self, grid: &TimeGrid) -> i64 {
        self.start + self.intervals as i64 * grid.delta as i64
    }
}

/// Counts pickups per (origin, interval) and per (origin, destination,
/// interval). Trips outside the window are ignored.
pub fn aggregate_demand(
    trips: &[TripRecord],
    net: &ZoneNetwork,
    grid: &TimeGrid,
    window: DayWindow,
) -> (DemandTensor, OdTensor) {
    let mut od = OdTensor::zeros(net.len(), window.intervals);
    for t in trips {
        if let Some(k) = window.interval_of(t.pickup_time, grid) {
            od.add(t.pickup_zone, t.dropoff_zone, k, 1);
        }
    }
    (od.origin_totals(), od)
}

/// Groups trips by the calendar day of their pickup.
pub fn split_days(trips: &[TripRecord]) -> BTreeMap<i64, Vec<TripRecord>> {
    let mut days: BTreeMap<i64, Vec<TripRecord>> = BTreeMap::new();
    for t in trips {
        days.entry(t.pickup_time.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY).or_default().push(*t);
    }
    days
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StdDivisor {
    /// Divide by `m`.
    #[default]
    Population,
    /// Divide by `m - 1`.
    Sample,
}

/// Per-cell mean and standard deviation of demand over `m` historical days.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoricalMoments {
    pub mu: Array2<f64>,
    pub sigma: Array2<f64>,
    pub m: usize,
}

impl HistoricalMoments {
    pub fn mu(&self, region: usize, interval: usize) -> f64 {
        self.mu[[region, interval]]
    }

    pub fn sigma(&self, region: usize, interval: usize) -> f64 {
        self.sigma[[region, interval]]
    }

    pub fn regions(&self) -> usize {
        self.mu.nrows()
    }

    pub fn intervals(&self) -> usize {
        self.mu.ncols()
    }
}

pub fn historical_moments(days: &[DemandTensor], divisor: StdDivisor) -> Result<HistoricalMoments> {
    let m = days.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 historical days, got {m}")));
    }
    let (n, k) = (days[0].regions(), days[0].intervals());
    if days.iter().any(|d| d.regions() != n || d.intervals() != k) {
        return Err(Error::shape("historical days have different shapes"));
    }
    let denom = match divisor {
        StdDivisor::Population => m as f64,
        StdDivisor::Sample => (m - 1) as f64,
    };
    let mut mu = Array2::zeros((n, k));
    let mut sigma = Array2::zeros((n, k));
    for i in 0..n {
        for t in 0..k {
            let mean = days.iter().map(|d| d.get(i, t) as f64).sum::<f64>() / m as f64;
            let ss: f64 = days.iter().map(|d| (d.get(i, t) as f64 - mean).powi(2)).sum();
            mu[[i, t]] = mean;
            sigma[[i, t]] = (ss / denom).sqrt();
        }
    }
    Ok(HistoricalMoments { mu, sigma, m })
}

/// Pooled static estimate of the occupied-vehicle transition matrices.
///
/// Every trip en route at an interval boundary (boundaries are epoch
/// multiples of the interval length, pickup inclusive, dropoff exclusive)
/// is located by linear interpolation between its OD centroids. One
/// interval later it is either still en route, tallied in `P` at its new
/// interpolated zone, or finished, tallied in `Q` at its dropoff zone. Rows
/// without observations fall back to `Q[i][i] = 1`.
pub fn estimate_transitions(trips: &[TripRecord], net: &ZoneNetwork, grid: &TimeGrid) -> TransitionMatrices {
    let n = net.len();
    let delta = grid.delta as i64;
    let mut p = Array2::<f64>::zeros((n, n));
    let mut q = Array2::<f64>::zeros((n, n));
    for t in trips {
        let dur = t.duration();
        if dur <= 0 {
            continue;
        }
        let locate = |at: i64| {
            let frac = (at - t.pickup_time) as f64 / dur as f64;
            net.interpolate(t.pickup_zone, t.dropoff_zone, frac)
        };
        let mut boundary = t.pickup_time.div_euclid(delta) * delta;
        if boundary < t.pickup_time {
            boundary += delta;
        }
        while boundary < t.dropoff_time {
            let from = locate(boundary);
            let later = boundary + delta;
            if later < t.dropoff_time {
                p[[from, locate(later)]] += 1.0;
            } else {
                q[[from, t.dropoff_zone]] += 1.0;
            }
            boundary = later;
        }
    }
    for i in 0..n {
        let total: f64 = p.row(i).sum() + q.row(i).sum();
        if total == 0.0 {
            q[[i, i]] = 1.0;
        } else {
            p.row_mut(i).mapv_inplace(|v| v / total);
            q.row_mut(i).mapv_inplace(|v| v / total);
        }
    }
    TransitionMatrices { p, q }
}

/// Grid metadata written next to the per-day demand CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandSidecar {
    pub interval_sec: u32,
    pub intervals_per_day: usize,
    pub zone_ids: Vec<u32>,
    /// Day start (epoch seconds) to demand file name, in chronological order.
    pub days: Vec<(i64, String)>,
    pub accepted_trips: usize,
    pub skipped_rows: usize,
}

/// Merges partial aggregations (e.g. from separate file chunks).
pub fn merge_counts(parts: &[DemandTensor]) -> Result<DemandTensor> {
    let first = parts.first().ok_or_else(|| Error::InsufficientData("nothing to merge".into()))?;
    let mut out = DemandTensor::zeros(first.regions(), first.intervals());
    for part in parts {
        if part.regions() != out.regions() || part.intervals() != out.intervals() {
            return Err(Error::shape("cannot merge tensors of different shapes"));
        }
        for i in 0..out.regions() {
            for k in 0..out.intervals() {
                out.add(i, k, part.get(i, k));
            }
        }
    }
    Ok(out)
}
