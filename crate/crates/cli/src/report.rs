//! Comparison tables and heatmaps.

use std::fmt::Write as _;
use std::io::Write;

use amod_core::sim::{EngineKind, SimReport};
use anyhow::Result;

/// Values on a rows x columns grid; `None` marks a missing run.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub row_axis: &'static str,
    pub col_axis: &'static str,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl Heatmap {
    /// Grid of `metric` over the runs of `engine`, rows read by `row_key`,
    /// columns by budget.
    pub fn from_runs(
        title: String,
        runs: &[SimReport],
        engine: EngineKind,
        row_axis: &'static str,
        row_key: fn(&SimReport) -> f64,
        metric: fn(&SimReport) -> f64,
    ) -> Option<Self> {
        let mine: Vec<&SimReport> = runs.iter().filter(|r| r.engine == engine).collect();
        if mine.is_empty() {
            return None;
        }
        let mut rows: Vec<f64> = mine.iter().map(|r| row_key(r)).collect();
        let mut cols: Vec<f64> = mine.iter().map(|r| r.budget).collect();
        for v in [&mut rows, &mut cols] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let values = rows
            .iter()
            .map(|&rv| {
                cols.iter()
                    .map(|&cv| mine.iter().find(|r| row_key(r) == rv && r.budget == cv).map(|r| metric(r)))
                    .collect()
            })
            .collect();
        Some(Heatmap { title, row_axis, col_axis: "budget", rows, cols, values })
    }

    /// First column the row axis, one further column per budget value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![format!("{}\\{}", self.row_axis, self.col_axis)];
        header.extend(self.cols.iter().map(|c| c.to_string()));
        w.write_record(&header)?;
        for (r, row) in self.rows.iter().zip(&self.values) {
            let mut rec = vec![r.to_string()];
            rec.extend(row.iter().map(|v| v.map_or(String::new(), |v| format!("{v:.3}"))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_svg(&self) -> String {
        const CELL: f64 = 64.0;
        const LEFT: f64 = 80.0;
        const TOP: f64 = 50.0;
        let present: Vec<f64> = self.values.iter().flatten().flatten().copied().collect();
        let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = LEFT + CELL * self.cols.len() as f64 + 20.0;
        let height = TOP + CELL * self.rows.len() as f64 + 40.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<text x="{LEFT}" y="20" font-size="14">{}</text>"#, escape(&self.title));
        for (ri, (r, row)) in self.rows.iter().zip(&self.values).enumerate() {
            let y = TOP + CELL * ri as f64;
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{r}</text>"#, LEFT - 8.0, y + CELL / 2.0 + 4.0);
            for (ci, v) in row.iter().enumerate() {
                let x = LEFT + CELL * ci as f64;
                let (fill, label) = match v {
                    Some(v) => {
                        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                        // Light for low values, dark blue for high.
                        let shade = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
                        (format!("rgb({},{},{})", shade(239.0, 8.0), shade(243.0, 48.0), shade(255.0, 107.0)), format!("{v:.1}"))
                    }
                    None => ("rgb(220,220,220)".to_string(), "-".to_string()),
                };
                let text_fill = if v.is_some_and(|v| hi > lo && (v - lo) / (hi - lo) > 0.5) { "white" } else { "black" };
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="white"/><text x="{}" y="{}" text-anchor="middle" fill="{text_fill}">{label}</text>"#,
                    x + CELL / 2.0,
                    y + CELL / 2.0 + 4.0
                );
            }
        }
        let bottom = TOP + CELL * self.rows.len() as f64;
        for (ci, c) in self.cols.iter().enumerate() {
            let x = LEFT + CELL * ci as f64 + CELL / 2.0;
            let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{c}</text>"#, bottom + 16.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + CELL * self.cols.len() as f64 / 2.0, bottom + 34.0, self.col_axis);
        let _ = writeln!(s, r#"<text x="12" y="{}">{}</text>"#, TOP - 8.0, self.row_axis);
        s.push_str("</svg>\n");
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub const REDUCTION_HEADER: [&str; 8] =
    ["engine", "pi", "budget", "rho", "avg_wait_s", "leaving_rate_pct", "wait_reduction_pct", "leaving_reduction_pct"];

fn reduction(base: f64, value: f64) -> String {
    if base > 0.0 { format!("{:.3}", 100.0 * (base - value) / base) } else { String::new() }
}

/// Percentage reduction of every run against `baseline`; positive is better.
/// Cells are empty where the baseline value is zero.
pub fn write_reduction_table<W: Write>(runs: &[SimReport], baseline: &SimReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REDUCTION_HEADER)?;
    for r in runs {
        w.write_record([
            r.engine.to_string(),
            r.pi.to_string(),
            r.budget.to_string(),
            r.rho.to_string(),
            format!("{:.3}", r.avg_wait_s),
            format!("{:.3}", r.leaving_rate_pct),
            reduction(baseline.avg_wait_s, r.avg_wait_s),
            reduction(baseline.leaving_rate_pct, r.leaving_rate_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}
