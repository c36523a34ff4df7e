//! SVG figures. Each is rendered to a string and then written atomically.

use std::path::Path;

use chrono::NaiveDate;
use daynmf::analysis::normalize_components;
use daynmf::rank::RankSweep;
use daynmf::{DataMatrix, Factorization, RawSeries};
use ndarray::Array2;
use plotters::prelude::*;

use crate::error::{CliError, Result};
use crate::output::write_bytes;

const SIZE: (u32, u32) = (1000, 500);

type DrawResult = std::result::Result<(), Box<dyn std::error::Error>>;

fn render<F>(path: &Path, draw: F) -> Result<()>
where
    F: FnOnce(DrawingArea<SVGBackend, plotters::coord::Shift>) -> DrawResult,
{
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        draw(root).map_err(|e| CliError::output(path, e))?;
    }
    write_bytes(path, svg.as_bytes())
}

/// Upper y bound with a little headroom; never zero.
fn top(max: f64) -> f64 {
    if max.is_finite() && max > 0.0 {
        max * 1.05
    } else {
        1.0
    }
}

fn hours(n: usize) -> impl Fn(usize) -> f64 {
    move |i| i as f64 * 24.0 / n as f64
}

pub fn raw_series(path: &Path, series: &RawSeries) -> Result<()> {
    let Some(first) = series.samples.first() else {
        return render(path, |root| Ok(root.fill(&WHITE)?));
    };
    let t0 = first.timestamp;
    let points: Vec<(f64, f64)> = series
        .samples
        .iter()
        .map(|s| ((s.timestamp - t0).num_seconds() as f64 / 86_400.0, s.count))
        .collect();
    let xmax = points.last().map_or(1.0, |p| p.0.max(1e-9));
    let ymax = top(points.iter().map(|p| p.1).fold(0.0, f64::max));
    render(path, |root| {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("{} raw counts", series.site_id), ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..xmax, 0.0..ymax)?;
        chart
            .configure_mesh()
            .x_desc(format!("days since {}", t0.format("%Y-%m-%d %H:%M UTC")))
            .y_desc("devices")
            .draw()?;
        chart.draw_series(LineSeries::new(points, &BLUE))?;
        root.present()?;
        Ok(())
    })
}

pub fn daily_overlay(path: &Path, data: &DataMatrix) -> Result<()> {
    let n = data.n();
    let at = hours(n);
    let ymax = top(data.x.iter().copied().fold(0.0, f64::max));
    render(path, |root| {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("{} days overlaid", data.m()), ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..24.0, 0.0..ymax)?;
        chart.configure_mesh().x_desc("hour of day").y_desc("devices").draw()?;
        for col in data.x.columns() {
            let line = col.iter().enumerate().map(|(i, v)| (at(i), *v));
            chart.draw_series(LineSeries::new(line, BLUE.mix(0.25)))?;
        }
        root.present()?;
        Ok(())
    })
}

/// Columns of W scaled to unit L1 norm.
pub fn components(path: &Path, fact: &Factorization) -> Result<()> {
    let w = normalize_components(fact).factorization.w;
    let at = hours(w.nrows());
    let ymax = top(w.iter().copied().fold(0.0, f64::max));
    render(path, |root| {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption("daily components", ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..24.0, 0.0..ymax)?;
        chart.configure_mesh().x_desc("hour of day").y_desc("share of daily mass").draw()?;
        for (j, col) in w.columns().into_iter().enumerate() {
            let color = Palette99::pick(j).to_rgba();
            let line = col.iter().enumerate().map(|(i, v)| (at(i), *v)).collect::<Vec<_>>();
            chart
                .draw_series(LineSeries::new(line, color.stroke_width(2)))?
                .label(format!("component {}", j + 1))
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        }
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        root.present()?;
        Ok(())
    })
}

/// One stacked bar per day, a segment per component.
pub fn weighted_activations(path: &Path, hw: &Array2<f64>, days: &[NaiveDate]) -> Result<()> {
    let m = hw.ncols();
    let totals: Vec<f64> = hw.columns().into_iter().map(|c| c.sum()).collect();
    let ymax = top(totals.iter().copied().fold(0.0, f64::max));
    let first = days.first().map(|d| d.to_string()).unwrap_or_default();
    render(path, |root| {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption("weighted activations", ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(0.0..m.max(1) as f64, 0.0..ymax)?;
        chart
            .configure_mesh()
            .x_desc(format!("day index from {first}"))
            .y_desc("device-minutes")
            .draw()?;
        for j in 0..hw.nrows() {
            let color = Palette99::pick(j).to_rgba();
            let bars = (0..m).map(|d| {
                let below: f64 = hw.column(d).iter().take(j).sum();
                let x = d as f64;
                Rectangle::new([(x + 0.1, below), (x + 0.9, below + hw[[j, d]])], color.filled())
            });
            chart
                .draw_series(bars)?
                .label(format!("component {}", j + 1))
                .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
        }
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        root.present()?;
        Ok(())
    })
}

pub fn mse_vs_k(path: &Path, sweep: &RankSweep) -> Result<()> {
    let points: Vec<(f64, f64)> = sweep
        .ks
        .iter()
        .zip(&sweep.mse)
        .filter_map(|(k, mse)| mse.map(|v| (*k as f64, v)))
        .collect();
    let kmin = sweep.ks.first().copied().unwrap_or(1) as f64;
    let kmax = sweep.ks.last().copied().unwrap_or(1) as f64;
    let ymax = top(points.iter().map(|p| p.1).fold(0.0, f64::max));
    render(path, |root| {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption("reconstruction MSE by k", ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(kmin - 0.5..kmax + 0.5, 0.0..ymax)?;
        chart.configure_mesh().x_desc("k").y_desc("MSE").draw()?;
        chart.draw_series(LineSeries::new(points.iter().copied(), &BLUE))?;
        chart.draw_series(points.iter().map(|p| Circle::new(*p, 4, BLUE.filled())))?;
        if let Some(k) = sweep.suggested_k {
            let k = k as f64;
            chart.draw_series(LineSeries::new(vec![(k, 0.0), (k, ymax)], RED.mix(0.6)))?;
        }
        root.present()?;
        Ok(())
    })
}
