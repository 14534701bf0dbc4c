//! Budgeted box uncertainty sets over per-interval regional demand:
//!
//! `{ r : lb <= r <= ub,  |sum_i (r_i - mu_i)| <= budget }`, one set per
//! interval, plus the closed-form worst cases the robust program needs.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::forecast::DistForecast;
use crate::ingest::HistoricalMoments;

#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintySet {
    regions: usize,
    intervals: usize,
    /// Region-major cells.
    lb: Vec<f64>,
    mu: Vec<f64>,
    ub: Vec<f64>,
    budget: f64,
}

impl UncertaintySet {
    /// Builds a set from per-cell bounds and centres, laid out region-major
    /// (`cell = region * intervals + interval`).
    ///
    /// Emptiness is judged against the centres as given; they are then
    /// clamped into `[lb, ub]`.
    pub fn new(regions: usize, intervals: usize, lb: Vec<f64>, mu: Vec<f64>, ub: Vec<f64>, budget: f64) -> Result<Self> {
        let cells = regions * intervals;
        if lb.len() != cells || mu.len() != cells || ub.len() != cells {
            return Err(Error::shape(format!("uncertainty set needs {cells} cells")));
        }
        if !(budget >= 0.0) || !budget.is_finite() {
            return Err(Error::invariant(format!("budget {budget} must be finite and nonnegative")));
        }
        for c in 0..cells {
            if !(lb[c] >= 0.0) || !(lb[c] <= ub[c]) || !ub[c].is_finite() || !mu[c].is_finite() {
                return Err(Error::invariant(format!("cell {c}: need 0 <= lb <= ub, got [{}, {}]", lb[c], ub[c])));
            }
        }
        let mut set = UncertaintySet { regions, intervals, lb, mu, ub, budget };
        for k in 0..intervals {
            let (lo, hi) = (set.sum_over(k, &set.lb), set.sum_over(k, &set.ub));
            let centre = set.sum_over(k, &set.mu);
            if lo > centre + budget || hi < centre - budget {
                return Err(Error::EmptySet {
                    interval: k,
                    lo,
                    hi,
                    budget_lo: centre - budget,
                    budget_hi: centre + budget,
                });
            }
        }
        for c in 0..cells {
            set.mu[c] = set.mu[c].clamp(set.lb[c], set.ub[c]);
        }
        Ok(set)
    }

    fn sum_over(&self, k: usize, v: &[f64]) -> f64 {
        (0..self.regions).map(|i| v[i * self.intervals + k]).sum()
    }

    fn cell(&self, region: usize, interval: usize) -> usize {
        region * self.intervals + interval
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn lb(&self, region: usize, interval: usize) -> f64 {
        self.lb[self.cell(region, interval)]
    }

    pub fn ub(&self, region: usize, interval: usize) -> f64 {
        self.ub[self.cell(region, interval)]
    }

    pub fn mu(&self, region: usize, interval: usize) -> f64 {
        self.mu[self.cell(region, interval)]
    }

    /// A degenerate set holding exactly `mu`.
    pub fn point(regions: usize, intervals: usize, mu: Vec<f64>) -> Result<Self> {
        UncertaintySet::new(regions, intervals, mu.clone(), mu.clone(), mu, 0.0)
    }

    fn check_interval(&self, interval: usize) -> Result<()> {
        if interval >= self.intervals {
            return Err(Error::shape(format!("interval {interval} outside a {}-interval set", self.intervals)));
        }
        Ok(())
    }

    /// Smallest demand region `region` can take at `interval`:
    /// `max(lb_i, mu_i - budget - sum_{j != i} (ub_j - mu_j))`.
    pub fn worst_case_min(&self, interval: usize, region: usize) -> Result<f64> {
        self.check_interval(interval)?;
        let slack: f64 = (0..self.regions)
            .filter(|&j| j != region)
            .map(|j| self.ub(j, interval) - self.mu(j, interval))
            .sum();
        Ok(self.lb(region, interval).max(self.mu(region, interval) - self.budget - slack))
    }

    /// Largest total demand at `interval`: `min(sum ub, sum mu + budget)`.
    pub fn worst_case_sum_max(&self, interval: usize) -> Result<f64> {
        self.check_interval(interval)?;
        let ub = self.sum_over(interval, &self.ub);
        let mu = self.sum_over(interval, &self.mu);
        Ok(ub.min(mu + self.budget))
    }

    /// `budget,<value>` line followed by `region,interval,lb,mu,ub` rows.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "budget,{}", self.budget)?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["region", "interval", "lb", "mu", "ub"])?;
        for i in 0..self.regions {
            for k in 0..self.intervals {
                w.write_record([
                    i.to_string(),
                    k.to_string(),
                    self.lb(i, k).to_string(),
                    self.mu(i, k).to_string(),
                    self.ub(i, k).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let budget: f64 = first
            .trim()
            .strip_prefix("budget,")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format(format!("expected `budget,<value>`, got `{}`", first.trim())))?;
        let mut rows: Vec<(usize, usize, f64, f64, f64)> = Vec::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for row in rdr.deserialize() {
            rows.push(row?);
        }
        let regions = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let intervals = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != regions * intervals {
            return Err(Error::Format("uncertainty set file is not a full grid".into()));
        }
        let mut lb = vec![0.0; rows.len()];
        let mut mu = lb.clone();
        let mut ub = lb.clone();
        for (i, k, l, m, u) in rows {
            let c = i * intervals + k;
            lb[c] = l;
            mu[c] = m;
            ub[c] = u;
        }
        UncertaintySet::new(regions, intervals, lb, mu, ub, budget)
    }
}

/// Forecast-interval set: per cell, the equal-tailed `pi`-percent interval
/// of the forecast distribution floored at zero, centred on the forecast
/// mean.
pub fn build_duro_set(forecast: &DistForecast, pi_percent: f64, budget: f64) -> Result<UncertaintySet> {
    let (n, h) = (forecast.regions, forecast.horizon);
    let mut lb = Vec::with_capacity(n * h);
    let mut mu = Vec::with_capacity(n * h);
    let mut ub = Vec::with_capacity(n * h);
    for i in 0..n {
        for k in 0..h {
            let theta = forecast.theta(i, k);
            let (lo, hi) = forecast.family.interval(theta, pi_percent)?;
            lb.push(lo.max(0.0));
            ub.push(hi.max(0.0));
            mu.push(forecast.family.mean(theta));
        }
    }
    UncertaintySet::new(n, h, lb, mu, ub, budget)
}

/// Moment set: `[max(0, mu - rho sigma), mu + rho sigma]` around the
/// historical mean, for intervals `start .. start + horizon` of the moments.
pub fn build_ro_set(
    moments: &HistoricalMoments,
    start: usize,
    horizon: usize,
    rho: f64,
    budget: f64,
) -> Result<UncertaintySet> {
    if !(rho > 0.0) {
        return Err(Error::invariant(format!("rho must be positive, got {rho}")));
    }
    if start + horizon > moments.intervals() {
        return Err(Error::shape(format!(
            "moments cover {} intervals, asked for {}..{}",
            moments.intervals(),
            start,
            start + horizon
        )));
    }
    let n = moments.regions();
    let mut lb = Vec::with_capacity(n * horizon);
    let mut mu = Vec::with_capacity(n * horizon);
    let mut ub = Vec::with_capacity(n * horizon);
    for i in 0..n {
        for k in start..start + horizon {
            let (m, s) = (moments.mu(i, k), moments.sigma(i, k));
            lb.push((m - rho * s).max(0.0));
            mu.push(m);
            ub.push(m + rho * s);
        }
    }
    UncertaintySet::new(n, horizon, lb, mu, ub, budget)
}
