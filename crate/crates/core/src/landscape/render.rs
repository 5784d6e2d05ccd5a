//! Landscape output: a standalone SVG figure or a JSON plot-data document.
//!
//! Both writers are pure functions of their inputs, so identical stores give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pool::{ConstraintId, Element};

use super::contour::Polyline;
use super::density::{DensityField, GridSpec};
use super::{LandscapeError, LandscapeProjection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Svg,
    Plotdata,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svg" => Ok(Self::Svg),
            "plotdata" | "json" => Ok(Self::Plotdata),
            other => Err(format!(
                "unknown format {other:?}, expected svg or plotdata"
            )),
        }
    }
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Svg => "svg",
            Self::Plotdata => "plotdata",
        })
    }
}

/// Figure styling, loadable from a JSON file. Missing keys keep defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderStyle {
    pub width: u32,
    pub height: u32,
    pub margin: u32,
    pub font_family: String,
    pub font_size: f64,
    pub label_font_size: f64,
    /// One stroke colour per cell, cycled with dashes once exhausted.
    pub colors: Vec<String>,
    pub title: Option<String>,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            width: 820,
            height: 760,
            margin: 64,
            font_family: "Helvetica, Arial, sans-serif".into(),
            font_size: 12.0,
            label_font_size: 6.5,
            colors: [
                "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                "#17becf", "#7f7f7f", "#bcbd22",
            ]
            .map(String::from)
            .to_vec(),
            title: None,
        }
    }
}

impl RenderStyle {
    pub fn load(path: &Path) -> Result<Self, LandscapeError> {
        let text = std::fs::read_to_string(path)?;
        let style: Self = serde_json::from_str(&text)
            .map_err(|e| LandscapeError::Style(format!("{}: {e}", path.display())))?;
        if style.colors.is_empty() {
            return Err(LandscapeError::Style("colors must not be empty".into()));
        }
        if style.width <= 2 * style.margin || style.height <= 2 * style.margin {
            return Err(LandscapeError::Style(
                "figure is smaller than its margins".into(),
            ));
        }
        Ok(style)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPca {
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Rows are components, columns follow `cells` of the matrix.
    pub components: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub matrix_cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotScore {
    pub id: ConstraintId,
    pub element: Element,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotContour {
    pub level_mass: Option<f64>,
    pub level: f64,
    pub polylines: Vec<Polyline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotCell {
    pub cell: String,
    pub bandwidth: [f64; 2],
    pub grid: GridSpec,
    /// Row-major, `density[j * nx + i]`.
    pub density: Vec<f64>,
    pub contours: Vec<PlotContour>,
}

/// Everything needed to redraw a landscape elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub pca: PlotPca,
    pub scores: Vec<PlotScore>,
    pub cells: Vec<PlotCell>,
}

impl PlotData {
    pub fn new(
        projection: &LandscapeProjection,
        fields: &[DensityField],
    ) -> Result<Self, LandscapeError> {
        check_fields(projection, fields)?;
        let pca = projection.pca();
        Ok(Self {
            pca: PlotPca {
                explained_variance: pca.explained_variance.clone(),
                explained_variance_ratio: pca.explained_variance_ratio(),
                components: pca.components.clone(),
                means: pca.means.clone(),
                matrix_cells: projection.cells().iter().map(ToString::to_string).collect(),
            },
            scores: projection
                .landmarks()
                .into_iter()
                .map(|l| PlotScore {
                    id: l.id,
                    element: l.element,
                    x: l.x,
                    y: l.y,
                })
                .collect(),
            cells: fields
                .iter()
                .map(|f| PlotCell {
                    cell: f.cell.to_string(),
                    bandwidth: [f.bandwidth.0, f.bandwidth.1],
                    grid: f.grid,
                    density: f.values.clone(),
                    contours: f
                        .contours
                        .iter()
                        .map(|c| PlotContour {
                            level_mass: c.mass,
                            level: c.level,
                            polylines: c.polylines.clone(),
                        })
                        .collect(),
                })
                .collect(),
        })
    }

    pub fn to_json_string(&self) -> Result<String, LandscapeError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self, LandscapeError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, LandscapeError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

fn check_fields(
    projection: &LandscapeProjection,
    fields: &[DensityField],
) -> Result<(), LandscapeError> {
    for f in fields {
        if projection.cell_index(&f.cell).is_none() {
            return Err(LandscapeError::UnknownCell(f.cell.clone()));
        }
        if f.grid != fields[0].grid {
            return Err(LandscapeError::MismatchedExtents);
        }
    }
    Ok(())
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn element_tag(e: Element) -> &'static str {
    match e {
        Element::Event => "Ev",
        Element::Style => "St",
        Element::Character => "Ch",
        Element::Setting => "Se",
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.h
    }
}

fn frame(projection: &LandscapeProjection, fields: &[DensityField], style: &RenderStyle) -> Frame {
    let (x0, x1, y0, y1) = match fields.first() {
        Some(f) => (f.grid.x0, f.grid.x1(), f.grid.y0, f.grid.y1()),
        None => {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in projection.scores() {
                for a in 0..2 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            let pad = |a: usize| ((hi[a] - lo[a]) * 0.08).max(1e-3);
            (
                lo[0] - pad(0),
                hi[0] + pad(0),
                lo[1] - pad(1),
                hi[1] + pad(1),
            )
        }
    };
    let m = style.margin as f64;
    Frame {
        x0,
        x1,
        y0,
        y1,
        left: m,
        top: m,
        // room on the right for the legend
        w: style.width as f64 - 2.0 * m - 150.0_f64.min(style.width as f64 / 4.0),
        h: style.height as f64 - 2.0 * m,
    }
}

fn path_data(line: &Polyline, fr: &Frame) -> String {
    let mut d = String::new();
    for (k, p) in line.points.iter().enumerate() {
        let _ = write!(
            d,
            "{}{:.2} {:.2}",
            if k == 0 { "M" } else { " L" },
            fr.px(p[0]),
            fr.py(p[1])
        );
    }
    if line.closed {
        d.push_str(" Z");
    }
    d
}

/// Draws the landscape as an SVG document.
pub fn render_svg(
    projection: &LandscapeProjection,
    fields: &[DensityField],
    style: &RenderStyle,
) -> Result<String, LandscapeError> {
    check_fields(projection, fields)?;
    let fr = frame(projection, fields, style);
    let ratio = projection.pca().explained_variance_ratio();
    let font = escape(&style.font_family);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="{font}" font-size="{fs}">"#,
        w = style.width,
        h = style.height,
        fs = style.font_size
    );
    let _ = writeln!(
        s,
        r#"<rect width="{}" height="{}" fill="white"/>"#,
        style.width, style.height
    );
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="plot"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath></defs>"#,
        fr.left, fr.top, fr.w, fr.h
    );
    if let Some(title) = &style.title {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="{}">{}</text>"#,
            fr.left + fr.w / 2.0,
            fr.top / 2.0,
            style.font_size * 1.3,
            escape(title)
        );
    }

    // frame and axes
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333" stroke-width="1"/>"##,
        fr.left, fr.top, fr.w, fr.h
    );
    if fr.x0 < 0.0 && fr.x1 > 0.0 {
        let x = fr.px(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#bbb" stroke-dasharray="2 3"/>"##,
            fr.top,
            fr.top + fr.h
        );
    }
    if fr.y0 < 0.0 && fr.y1 > 0.0 {
        let y = fr.py(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#bbb" stroke-dasharray="2 3"/>"##,
            fr.left,
            fr.left + fr.w
        );
    }
    let pct = |k: usize| ratio.get(k).copied().unwrap_or(0.0) * 100.0;
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">PC1 ({:.1}%)</text>"#,
        fr.left + fr.w / 2.0,
        fr.top + fr.h + 40.0,
        pct(0)
    );
    let (lx, ly) = (fr.left - 42.0, fr.top + fr.h / 2.0);
    let _ = writeln!(
        s,
        r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">PC2 ({:.1}%)</text>"#,
        pct(1)
    );
    let small = style.font_size * 0.8;
    for (x, anchor) in [(fr.x0, "start"), (fr.x1, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}" font-size="{small}">{x:.3}</text>"#,
            fr.px(x),
            fr.top + fr.h + 16.0
        );
    }
    for y in [fr.y0, fr.y1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="{small}">{y:.3}</text>"#,
            fr.left - 6.0,
            fr.py(y) + small / 3.0
        );
    }

    // contours
    let _ = writeln!(s, r#"<g clip-path="url(#plot)" fill="none">"#);
    for (k, field) in fields.iter().enumerate() {
        let color = escape(&style.colors[k % style.colors.len()]);
        let dash = if k >= style.colors.len() {
            r#" stroke-dasharray="5 3""#
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r#"<g class="cell" data-cell="{}" stroke="{color}"{dash}>"#,
            escape(&field.cell.to_string())
        );
        let n = field.contours.len();
        for (rank, level) in field.contours.iter().enumerate() {
            // the tightest region gets the heaviest line
            let width = 0.8 + 0.7 * (n - 1 - rank) as f64;
            for line in &level.polylines {
                let _ = writeln!(
                    s,
                    r#"<path d="{}" stroke-width="{width:.1}"/>"#,
                    path_data(line, &fr)
                );
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</g>\n");

    // landmarks
    let _ = writeln!(
        s,
        r##"<g class="landmarks" fill="#444" font-size="{}" text-anchor="middle">"##,
        style.label_font_size
    );
    for l in projection.landmarks() {
        let (x, y) = (fr.px(l.x), fr.py(l.y));
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.2"/><text x="{x:.2}" y="{:.2}">{}</text>"#,
            y - 2.5,
            element_tag(l.element)
        );
    }
    s.push_str("</g>\n");

    // legend
    let lx = fr.left + fr.w + 16.0;
    let mut ly = fr.top + 8.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (k, field) in fields.iter().enumerate() {
        let color = escape(&style.colors[k % style.colors.len()]);
        let dash = if k >= style.colors.len() {
            r#" stroke-dasharray="5 3""#
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}" font-size="{small}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + small / 3.0,
            escape(&field.cell.to_string())
        );
        ly += style.font_size * 1.4;
    }
    ly += style.font_size;
    for e in Element::ALL {
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{ly:.2}" font-size="{small}">{} = {}</text>"#,
            element_tag(e),
            e.as_str()
        );
        ly += style.font_size * 1.2;
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

/// Writes `fields` over `projection` to `out` with the default style.
pub fn render_landscape(
    projection: &LandscapeProjection,
    fields: &[DensityField],
    out: &Path,
    format: OutputFormat,
) -> Result<(), LandscapeError> {
    render_landscape_styled(projection, fields, out, format, &RenderStyle::default())
}

pub fn render_landscape_styled(
    projection: &LandscapeProjection,
    fields: &[DensityField],
    out: &Path,
    format: OutputFormat,
    style: &RenderStyle,
) -> Result<(), LandscapeError> {
    let body = match format {
        OutputFormat::Svg => render_svg(projection, fields, style)?,
        OutputFormat::Plotdata => PlotData::new(projection, fields)?.to_json_string()?,
    };
    std::fs::write(out, body)?;
    Ok(())
}
