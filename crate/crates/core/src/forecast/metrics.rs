use serde::{Deserialize, Serialize};

use super::dist::{DistFamily, Theta};
use crate::error::{Error, Result};

/// Point and uncertainty quality of a set of forecasts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean per-cell negative log-likelihood.
    pub nll: f64,
    pub mae: f64,
    /// Fraction, computed over cells with nonzero truth only.
    pub mape: f64,
    pub mpiw: f64,
    /// Fraction of truths inside their interval (bounds inclusive).
    pub picp: f64,
    pub cells: usize,
}

pub fn mpiw(intervals: &[(f64, f64)]) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::InsufficientData("no intervals".into()));
    }
    Ok(intervals.iter().map(|(lo, hi)| hi - lo).sum::<f64>() / intervals.len() as f64)
}

pub fn picp(intervals: &[(f64, f64)], truth: &[f64]) -> Result<f64> {
    if intervals.is_empty() || intervals.len() != truth.len() {
        return Err(Error::shape(format!("{} intervals for {} truths", intervals.len(), truth.len())));
    }
    let inside = intervals.iter().zip(truth).filter(|((lo, hi), y)| *lo <= **y && **y <= *hi).count();
    Ok(inside as f64 / truth.len() as f64)
}

pub fn mae(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != truth.len() {
        return Err(Error::shape(format!("{} predictions for {} truths", predictions.len(), truth.len())));
    }
    Ok(predictions.iter().zip(truth).map(|(p, y)| (p - y).abs()).sum::<f64>() / truth.len() as f64)
}

/// Mean absolute percentage error over nonzero-truth cells; zero when every
/// truth is zero.
pub fn mape(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != truth.len() {
        return Err(Error::shape(format!("{} predictions for {} truths", predictions.len(), truth.len())));
    }
    let (sum, count) = predictions
        .iter()
        .zip(truth)
        .filter(|(_, y)| **y != 0.0)
        .fold((0.0, 0usize), |(s, c), (p, y)| (s + ((p - y) / y).abs(), c + 1));
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// All five metrics from forecast parameters and realized counts.
pub fn evaluate(family: DistFamily, thetas: &[Theta], truth: &[f64], pi_percent: f64) -> Result<MetricReport> {
    if thetas.is_empty() || thetas.len() != truth.len() {
        return Err(Error::shape(format!("{} forecasts for {} truths", thetas.len(), truth.len())));
    }
    let mut nll = 0.0;
    let mut means = Vec::with_capacity(truth.len());
    let mut intervals = Vec::with_capacity(truth.len());
    for (theta, y) in thetas.iter().zip(truth) {
        nll += family.nll(theta, *y)?;
        means.push(family.mean(theta));
        intervals.push(family.interval(theta, pi_percent)?);
    }
    Ok(MetricReport {
        nll: nll / truth.len() as f64,
        mae: mae(&means, truth)?,
        mape: mape(&means, truth)?,
        mpiw: mpiw(&intervals)?,
        picp: picp(&intervals, truth)?,
        cells: truth.len(),
    })
}

pub const METRIC_HEADER: [&str; 7] = ["family", "pi", "nll", "mae", "mape", "mpiw", "picp"];

/// One row per (family, PI), columns as in [`METRIC_HEADER`].
pub fn write_metric_table<W: std::io::Write>(rows: &[(DistFamily, f64, MetricReport)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRIC_HEADER)?;
    for (family, pi, r) in rows {
        w.write_record([
            family.to_string(),
            format!("{pi}"),
            format!("{:.3}", r.nll),
            format!("{:.3}", r.mae),
            format!("{:.3}", r.mape),
            format!("{:.2}", r.mpiw),
            format!("{:.2}", r.picp),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_formulas() {
        assert_eq!(mpiw(&[(1.0, 3.0), (2.0, 6.0)]).unwrap(), 3.0);
        assert_eq!(picp(&[(1.0, 3.0), (6.0, 7.0)], &[2.0, 5.0]).unwrap(), 0.5);
        assert!(mpiw(&[]).is_err());
        assert!(picp(&[(0.0, 1.0)], &[]).is_err());
    }

    #[test]
    fn point_formulas() {
        assert_eq!(mae(&[1.0, 4.0], &[2.0, 2.0]).unwrap(), 1.5);
        // The zero-truth cell is skipped.
        assert_eq!(mape(&[1.0, 3.0, 5.0], &[2.0, 0.0, 4.0]).unwrap(), 0.375);
        assert_eq!(mape(&[1.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_poisson() {
        let r = evaluate(DistFamily::Poisson, &[[4.0, 0.0], [4.0, 0.0]], &[4.0, 9.0], 95.0).unwrap();
        assert_eq!(r.mpiw, 7.0);
        assert_eq!(r.picp, 0.5);
        assert_eq!(r.mae, 2.5);
        assert_eq!(r.cells, 2);
    }

    #[test]
    fn table_columns() {
        let r = MetricReport { nll: 156.0, mae: 2.733, mape: 0.222, mpiw: 11.97, picp: 0.95, cells: 1 };
        let mut buf = Vec::new();
        write_metric_table(&[(DistFamily::Poisson, 95.0, r)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "family,pi,nll,mae,mape,mpiw,picp\npoisson,95,156.000,2.733,0.222,11.97,0.95\n");
    }
}
