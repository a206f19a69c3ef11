//! Static SVG line plots of trajectory columns against time.

use std::path::Path;

use anyhow::{anyhow, bail, Result};
use plotters::prelude::*;

pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (-1.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.1 };
    (lo - pad, hi + pad)
}

pub fn write_svg(path: &Path, title: &str, times: &[f64], series: &[Series]) -> Result<()> {
    if times.is_empty() || series.is_empty() {
        bail!("nothing to plot");
    }
    let (t0, t1) = (times[0], *times.last().unwrap());
    let t1 = if t1 > t0 { t1 } else { t0 + 1.0 };
    let values = series.iter().flat_map(|s| s.values.iter().copied());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = padded_range(lo, hi);

    let root = SVGBackend::new(path, (960, 540)).into_drawing_area();
    let draw = |e: &dyn std::fmt::Display| anyhow!("plotting {}: {e}", path.display());
    root.fill(&WHITE).map_err(|e| draw(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(64)
        .build_cartesian_2d(t0..t1, lo..hi)
        .map_err(|e| draw(&e))?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .light_line_style(WHITE.mix(0.0))
        .draw()
        .map_err(|e| draw(&e))?;
    for (k, s) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(
                times.iter().copied().zip(s.values.iter().copied()),
                color.stroke_width(2),
            ))
            .map_err(|e| draw(&e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperRight)
        .draw()
        .map_err(|e| draw(&e))?;
    root.present().map_err(|e| draw(&e))?;
    Ok(())
}
