//! Static SVG line plots.

use std::path::Path;

use plotters::prelude::*;

use super::ExperimentError;

/// A line plot: one or more named series of `(x, y)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub file_name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

const PALETTE: [RGBColor; 4] = [BLUE, RED, GREEN, MAGENTA];

/// Renders the figure as a standalone SVG document. Non-finite points are
/// dropped.
pub fn render_svg(figure: &Figure) -> Result<String, ExperimentError> {
    let plot_err = |e: &dyn std::fmt::Display| ExperimentError::Plot(e.to_string());
    let series: Vec<(&str, Vec<(f64, f64)>)> = figure
        .series
        .iter()
        .map(|(name, pts)| {
            let finite = pts.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
            (name.as_str(), finite)
        })
        .collect();
    let all = || series.iter().flat_map(|s| s.1.iter());
    let (x0, x1) = padded_range(all().map(|p| p.0));
    let (y0, y1) = padded_range(all().map(|p| p.1));

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| plot_err(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(&figure.title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| plot_err(&e))?;
        chart
            .configure_mesh()
            .x_desc(&figure.x_label)
            .y_desc(&figure.y_label)
            .draw()
            .map_err(|e| plot_err(&e))?;
        for (k, (name, points)) in series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
                .map_err(|e| plot_err(&e))?
                .label(*name)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
            chart
                .draw_series(points.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(|e| plot_err(&e))?;
        }
        if series.len() > 1 {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| plot_err(&e))?;
        }
        root.present().map_err(|e| plot_err(&e))?;
    }
    Ok(svg)
}

pub fn write_svg(figure: &Figure, dir: &Path) -> Result<std::path::PathBuf, ExperimentError> {
    let svg = render_svg(figure)?;
    let path = dir.join(&figure.file_name);
    std::fs::write(&path, svg).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
