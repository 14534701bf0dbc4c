//! Zonal domain model shared by every other module: the zone network, the
//! time discretization, demand tensors and occupied-vehicle transition
//! matrices.

use std::collections::HashMap;
use std::io::Read;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean radius used for the equirectangular projection of zone centroids.
const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Regions, inter-zone travel distance/time and the zone adjacency graph.
///
/// Distances are planar centroid-to-centroid distances in meters; travel
/// times are those distances divided by a fixed mean speed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZoneNetwork {
    zone_ids: Vec<u32>,
    centroids: Vec<[f64; 2]>,
    dist: Array2<f64>,
    tt: Array2<f64>,
    adjacency: Array2<f64>,
    degree: Vec<f64>,
}

impl ZoneNetwork {
    /// Assembles a network from precomputed matrices and checks every
    /// structural invariant.
    pub fn new(
        zone_ids: Vec<u32>,
        centroids: Vec<[f64; 2]>,
        dist: Array2<f64>,
        tt: Array2<f64>,
        adjacency: Array2<f64>,
    ) -> Result<Self> {
        let n = zone_ids.len();
        if n == 0 {
            return Err(Error::invariant("network needs at least one zone"));
        }
        if centroids.len() != n {
            return Err(Error::shape(format!("{} centroids for {n} zones", centroids.len())));
        }
        for (name, m) in [("dist", &dist), ("tt", &tt), ("adjacency", &adjacency)] {
            if m.dim() != (n, n) {
                return Err(Error::shape(format!("{name} is {:?}, expected ({n}, {n})", m.dim())));
            }
        }
        for i in 0..n {
            if dist[[i, i]] != 0.0 || tt[[i, i]] != 0.0 {
                return Err(Error::invariant(format!("nonzero diagonal at zone {i}")));
            }
            if adjacency[[i, i]] != 1.0 {
                return Err(Error::invariant(format!("missing self-loop at zone {i}")));
            }
            for j in 0..n {
                if !(dist[[i, j]] >= 0.0) || !(tt[[i, j]] >= 0.0) {
                    return Err(Error::invariant(format!("negative or NaN travel entry ({i}, {j})")));
                }
                let a = adjacency[[i, j]];
                if a != 0.0 && a != 1.0 {
                    return Err(Error::invariant("adjacency must be binary"));
                }
                if a != adjacency[[j, i]] {
                    return Err(Error::invariant(format!("asymmetric adjacency at ({i}, {j})")));
                }
            }
        }
        let mut seen = HashMap::new();
        for (idx, id) in zone_ids.iter().enumerate() {
            if seen.insert(*id, idx).is_some() {
                return Err(Error::invariant(format!("duplicate zone id {id}")));
            }
        }
        let degree = adjacency.rows().into_iter().map(|r| r.sum()).collect();
        Ok(ZoneNetwork { zone_ids, centroids, dist, tt, adjacency, degree })
    }

    /// Builds distances and travel times from planar centroids (meters).
    ///
    /// When `edges` is `None` the adjacency is the symmetrized
    /// `knn`-nearest-neighbour graph; self-loops are always added.
    pub fn from_centroids(
        zone_ids: Vec<u32>,
        centroids: Vec<[f64; 2]>,
        speed_mps: f64,
        edges: Option<&[(usize, usize)]>,
        knn: usize,
    ) -> Result<Self> {
        if !(speed_mps > 0.0) {
            return Err(Error::invariant("mean speed must be positive"));
        }
        let n = centroids.len();
        let mut dist = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let dx = centroids[i][0] - centroids[j][0];
                    let dy = centroids[i][1] - centroids[j][1];
                    dist[[i, j]] = dx.hypot(dy);
                }
            }
        }
        let tt = dist.mapv(|d| d / speed_mps);
        let mut adjacency = Array2::zeros((n, n));
        match edges {
            Some(edges) => {
                for &(a, b) in edges {
                    if a >= n || b >= n {
                        return Err(Error::invariant(format!("edge ({a}, {b}) out of range")));
                    }
                    adjacency[[a, b]] = 1.0;
                    adjacency[[b, a]] = 1.0;
                }
            }
            None => {
                for i in 0..n {
                    let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                    order.sort_by(|&a, &b| dist[[i, a]].total_cmp(&dist[[i, b]]).then(a.cmp(&b)));
                    for &j in order.iter().take(knn) {
                        adjacency[[i, j]] = 1.0;
                        adjacency[[j, i]] = 1.0;
                    }
                }
            }
        }
        for i in 0..n {
            adjacency[[i, i]] = 1.0;
        }
        ZoneNetwork::new(zone_ids, centroids, dist, tt, adjacency)
    }

    /// Projects `(zone_id, lat, lon)` rows onto a local equirectangular plane
    /// centred on their mean latitude, then defers to [`Self::from_centroids`].
    /// Edges are given as zone-id pairs.
    pub fn from_lat_lon(
        zones: &[ZoneRow],
        edges: Option<&[(u32, u32)]>,
        speed_mps: f64,
        knn: usize,
    ) -> Result<Self> {
        if zones.is_empty() {
            return Err(Error::invariant("no zones"));
        }
        let lat0 = zones.iter().map(|z| z.lat).sum::<f64>() / zones.len() as f64;
        let lon0 = zones.iter().map(|z| z.lon).sum::<f64>() / zones.len() as f64;
        let cos0 = lat0.to_radians().cos();
        let centroids = zones
            .iter()
            .map(|z| {
                [
                    (z.lon - lon0).to_radians() * cos0 * EARTH_RADIUS_M,
                    (z.lat - lat0).to_radians() * EARTH_RADIUS_M,
                ]
            })
            .collect();
        let ids: Vec<u32> = zones.iter().map(|z| z.zone_id).collect();
        let index: HashMap<u32, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mapped = match edges {
            Some(edges) => {
                let mut out = Vec::with_capacity(edges.len());
                for (a, b) in edges {
                    match (index.get(a), index.get(b)) {
                        (Some(&ia), Some(&ib)) => out.push((ia, ib)),
                        _ => return Err(Error::Format(format!("edge ({a}, {b}) names an unknown zone"))),
                    }
                }
                Some(out)
            }
            None => None,
        };
        ZoneNetwork::from_centroids(ids, centroids, speed_mps, mapped.as_deref(), knn)
    }

    pub fn len(&self) -> usize {
        self.zone_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zone_ids.is_empty()
    }

    pub fn zone_ids(&self) -> &[u32] {
        &self.zone_ids
    }

    /// Index of an external zone id.
    pub fn index_of(&self, zone_id: u32) -> Option<usize> {
        self.zone_ids.iter().position(|&z| z == zone_id)
    }

    /// Lookup table from external zone id to index.
    pub fn id_index(&self) -> HashMap<u32, usize> {
        self.zone_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect()
    }

    pub fn centroids(&self) -> &[[f64; 2]] {
        &self.centroids
    }

    pub fn dist(&self) -> &Array2<f64> {
        &self.dist
    }

    pub fn tt(&self) -> &Array2<f64> {
        &self.tt
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    /// Diagonal degree matrix of the self-looped adjacency.
    pub fn degree(&self) -> Array2<f64> {
        Array2::from_diag(&ndarray::Array1::from(self.degree.clone()))
    }

    /// Nearest zone to a planar point; ties go to the lower index.
    pub fn snap(&self, point: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = (c[0] - point[0]).powi(2) + (c[1] - point[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Zone reached after travelling `fraction` of the straight line from
    /// the centroid of `from` to the centroid of `to`.
    pub fn interpolate(&self, from: usize, to: usize, fraction: f64) -> usize {
        if from == to {
            return from;
        }
        let f = fraction.clamp(0.0, 1.0);
        let a = self.centroids[from];
        let b = self.centroids[to];
        self.snap([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])])
    }
}

/// One line of the zone definition file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneRow {
    pub zone_id: u32,
    pub lat: f64,
    pub lon: f64,
}

/// Reads `zone_id,lat,lon` rows.
pub fn read_zones<R: Read>(reader: R) -> Result<Vec<ZoneRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Reads a `zone_id_a,zone_id_b` adjacency edge list.
pub fn read_edges<R: Read>(reader: R) -> Result<Vec<(u32, u32)>> {
    #[derive(Deserialize)]
    struct EdgeRow {
        zone_id_a: u32,
        zone_id_b: u32,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<EdgeRow>() {
        let row = row?;
        out.push((row.zone_id_a, row.zone_id_b));
    }
    Ok(out)
}

/// Time discretization of the rolling-horizon loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Rebalancing interval length, seconds.
    pub delta: u32,
    /// Number of simulated rebalancing intervals.
    pub omega: usize,
    /// Look-ahead horizon in intervals.
    pub kappa: usize,
    /// Matching interval, seconds.
    pub match_tick: u32,
    /// Passenger abandonment threshold, seconds.
    pub max_wait: u32,
    /// Matching feasibility threshold on pickup time, seconds.
    pub max_pickup: u32,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { delta: 300, omega: 24, kappa: 6, match_tick: 30, max_wait: 300, max_pickup: 30 }
    }
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 || self.match_tick == 0 || self.max_wait == 0 || self.max_pickup == 0 {
            return Err(Error::invariant("all durations must be positive"));
        }
        if !self.delta.is_multiple_of(self.match_tick) {
            return Err(Error::invariant(format!(
                "interval {} s is not a multiple of the matching tick {} s",
                self.delta, self.match_tick
            )));
        }
        if self.kappa == 0 {
            return Err(Error::invariant("look-ahead horizon must be at least 1"));
        }
        if self.omega == 0 {
            return Err(Error::invariant("at least one simulated interval is required"));
        }
        Ok(())
    }

    pub fn ticks_per_interval(&self) -> u32 {
        self.delta / self.match_tick
    }
}

/// Trip counts per (origin region, interval).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandTensor {
    n: usize,
    intervals: usize,
    counts: Vec<u32>,
}

impl DemandTensor {
    pub fn zeros(n: usize, intervals: usize) -> Self {
        DemandTensor { n, intervals, counts: vec![0; n * intervals] }
    }

    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let n = rows.len();
        let intervals = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != intervals) {
            return Err(Error::shape("ragged demand rows"));
        }
        Ok(DemandTensor { n, intervals, counts: rows.into_iter().flatten().collect() })
    }

    pub fn regions(&self) -> usize {
        self.n
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn get(&self, region: usize, interval: usize) -> u32 {
        self.counts[region * self.intervals + interval]
    }

    pub fn set(&mut self, region: usize, interval: usize, value: u32) {
        self.counts[region * self.intervals + interval] = value;
    }

    pub fn add(&mut self, region: usize, interval: usize, value: u32) {
        self.counts[region * self.intervals + interval] += value;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Counts as an `n x intervals` float matrix.
    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n, self.intervals), |(i, k)| self.get(i, k) as f64)
    }

    /// Counts of one interval across regions.
    pub fn column(&self, interval: usize) -> Vec<u32> {
        (0..self.n).map(|i| self.get(i, interval)).collect()
    }

    /// `region,interval,count` CSV, one row per cell in region-major order.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["region", "interval", "count"])?;
        for i in 0..self.n {
            for k in 0..self.intervals {
                w.write_record([i.to_string(), k.to_string(), self.get(i, k).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, n: usize, intervals: usize) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            region: usize,
            interval: usize,
            count: u32,
        }
        let mut out = DemandTensor::zeros(n, intervals);
        let mut rdr = csv::Reader::from_reader(reader);
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            if row.region >= n || row.interval >= intervals {
                return Err(Error::Format(format!("cell ({}, {}) out of range", row.region, row.interval)));
            }
            out.set(row.region, row.interval, row.count);
        }
        Ok(out)
    }
}

/// Trip counts per (origin, destination, interval).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdTensor {
    n: usize,
    intervals: usize,
    counts: Vec<u32>,
}

impl OdTensor {
    pub fn zeros(n: usize, intervals: usize) -> Self {
        OdTensor { n, intervals, counts: vec![0; n * n * intervals] }
    }

    fn idx(&self, o: usize, d: usize, k: usize) -> usize {
        (o * self.n + d) * self.intervals + k
    }

    pub fn get(&self, origin: usize, dest: usize, interval: usize) -> u32 {
        self.counts[self.idx(origin, dest, interval)]
    }

    pub fn add(&mut self, origin: usize, dest: usize, interval: usize, value: u32) {
        let i = self.idx(origin, dest, interval);
        self.counts[i] += value;
    }

    /// Collapses destinations, giving per-origin demand.
    pub fn origin_totals(&self) -> DemandTensor {
        let mut out = DemandTensor::zeros(self.n, self.intervals);
        for o in 0..self.n {
            for d in 0..self.n {
                for k in 0..self.intervals {
                    out.add(o, k, self.get(o, d, k));
                }
            }
        }
        out
    }
}

/// Static occupied-vehicle transition matrices: `p[i][j]` is the chance an
/// occupied vehicle in `i` is still occupied in `j` one interval later,
/// `q[i][j]` the chance it becomes vacant in `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrices {
    pub p: Array2<f64>,
    pub q: Array2<f64>,
}

impl TransitionMatrices {
    /// Every occupied vehicle frees up where it is.
    pub fn stay_vacant(n: usize) -> Self {
        TransitionMatrices { p: Array2::zeros((n, n)), q: Array2::eye(n) }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p.nrows();
        if self.p.dim() != (n, n) || self.q.dim() != (n, n) {
            return Err(Error::shape("transition matrices must be square and equal-sized"));
        }
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let (p, q) = (self.p[[i, j]], self.q[[i, j]]);
                if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
                    return Err(Error::invariant(format!("transition entry ({i}, {j}) outside [0, 1]")));
                }
                row += p + q;
            }
            if (row - 1.0).abs() > 1e-9 {
                return Err(Error::invariant(format!("row {i} of P+Q sums to {row}")));
            }
        }
        Ok(())
    }
}

/// `D^{-1/2} A D^{-1/2}` for the self-looped adjacency.
pub fn normalized_adjacency(net: &ZoneNetwork) -> Result<Array2<f64>> {
    let n = net.len();
    let mut inv_sqrt = Vec::with_capacity(n);
    for (i, &d) in net.degree.iter().enumerate() {
        if d <= 0.0 {
            return Err(Error::invariant(format!("zone {i} has zero degree")));
        }
        inv_sqrt.push(d.sqrt().recip());
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| inv_sqrt[i] * net.adjacency[[i, j]] * inv_sqrt[j]))
}

/// `a[i][j] = 0` when rebalancing from `i` to `j` fits in one interval.
pub fn rebalance_feasibility(net: &ZoneNetwork, grid: &TimeGrid) -> Array2<u8> {
    net.tt.mapv(|t| u8::from(t > grid.delta as f64))
}

/// `b[i][j] = 0` when a vehicle in `j` can pick up a customer in `i` within
/// the pickup bound.
pub fn match_feasibility(net: &ZoneNetwork, grid: &TimeGrid) -> Array2<u8> {
    let n = net.len();
    Array2::from_shape_fn((n, n), |(i, j)| u8::from(net.tt[[j, i]] > grid.max_pickup as f64))
}
