//! Deterministic SVG rendering: fixed precision, fixed palette, no
//! timestamps or external assets, so identical inputs produce
//! byte-identical files suitable for golden comparisons. Every chart is
//! expected to sit next to the CSV/JSON file holding its numbers.

use std::fmt::Write as _;
use std::path::Path;

use super::{ReportError, TreemapSpec};
use crate::dynamics::HomeBase2D;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One plotted series: raw monthly values, optionally with a rolled
/// (smoothed) companion drawn darker per the raw-light/rolled-dark
/// convention.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
    pub rolled: Option<Vec<f64>>,
}

/// Style class assigned to one ellipse.
#[derive(Debug, Clone)]
pub struct EllipseStyle {
    pub class: String,
    pub color: &'static str,
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn write_file(path: &Path, content: &str) -> Result<(), ReportError> {
    std::fs::write(path, content).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn svg_header(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
}

fn polyline(out: &mut String, points: &[(f64, f64)], color: &str, width: f64, opacity: f64, class: &str) {
    let mut attr = String::new();
    for (x, y) in points {
        let _ = write!(attr, "{},{} ", fmt2(*x), fmt2(*y));
    }
    out.push_str(&format!(
        "<polyline class=\"{class}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" stroke-opacity=\"{opacity}\" points=\"{}\"/>\n",
        attr.trim_end()
    ));
}

/// Render a multi-series time chart. Raw series are drawn light, rolled
/// companions dark.
pub fn render_timeseries(
    title: &str,
    x_labels: &[String],
    series: &[Series],
    out_path: &Path,
) -> Result<(), ReportError> {
    if series.is_empty() || series.iter().all(|s| s.values.is_empty()) {
        return Err(ReportError::EmptyInput("no series to render".into()));
    }
    let n = series.iter().map(|s| s.values.len()).max().unwrap();
    let all: Vec<f64> = series
        .iter()
        .flat_map(|s| s.values.iter().chain(s.rolled.iter().flatten()))
        .copied()
        .collect();
    let (min, max) = bounds(&all);
    let x = |i: usize| {
        if n <= 1 {
            MARGIN
        } else {
            MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n - 1) as f64
        }
    };
    let y = |v: f64| {
        if max == min {
            HEIGHT / 2.0
        } else {
            HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - min) / (max - min)
        }
    };

    let mut out = String::new();
    svg_header(&mut out);
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        fmt2(WIDTH / 2.0),
        xml_escape(title)
    ));
    axes(&mut out, min, max);
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let raw_points: Vec<(f64, f64)> =
            s.values.iter().enumerate().map(|(i, v)| (x(i), y(*v))).collect();
        polyline(&mut out, &raw_points, color, 1.2, 0.35, &format!("raw-{idx}"));
        if let Some(rolled) = &s.rolled {
            let pts: Vec<(f64, f64)> =
                rolled.iter().enumerate().map(|(i, v)| (x(i), y(*v))).collect();
            polyline(&mut out, &pts, color, 2.2, 1.0, &format!("rolled-{idx}"));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            fmt2(WIDTH - MARGIN + 6.0),
            fmt2(30.0 + 16.0 * idx as f64),
            xml_escape(&s.label)
        ));
    }
    // sparse x tick labels
    let step = (n / 8).max(1);
    for i in (0..x_labels.len().min(n)).step_by(step) {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            fmt2(x(i)),
            fmt2(HEIGHT - MARGIN + 18.0),
            xml_escape(&x_labels[i])
        ));
    }
    out.push_str("</svg>\n");
    write_file(out_path, &out)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(*v);
        max = max.max(*v);
    }
    (min, max)
}

fn axes(out: &mut String, min: f64, max: f64) {
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        m = fmt2(MARGIN),
        b = fmt2(HEIGHT - MARGIN),
        r = fmt2(WIDTH - MARGIN)
    ));
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        m = fmt2(MARGIN),
        t = fmt2(MARGIN),
        b = fmt2(HEIGHT - MARGIN)
    ));
    out.push_str(&format!(
        "<text x=\"{x}\" y=\"{yt}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{v}</text>\n",
        x = fmt2(MARGIN - 4.0),
        yt = fmt2(MARGIN + 4.0),
        v = format!("{max:.4}")
    ));
    out.push_str(&format!(
        "<text x=\"{x}\" y=\"{yb}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{v}</text>\n",
        x = fmt2(MARGIN - 4.0),
        yb = fmt2(HEIGHT - MARGIN),
        v = format!("{min:.4}")
    ));
}

/// Render home-base ellipses (e.g. the pre/post era comparison) with one
/// style class per era.
pub fn render_ellipses(
    items: &[(String, HomeBase2D)],
    out_path: &Path,
) -> Result<(), ReportError> {
    if items.is_empty() {
        return Err(ReportError::EmptyInput("no ellipses to render".into()));
    }
    // world bounds from ellipse extents
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for (_, hb) in items {
        let (a, b) = hb.semi_axes();
        let r = a.max(b);
        min_x = min_x.min(hb.mean_w - r);
        max_x = max_x.max(hb.mean_w + r);
        min_y = min_y.min(hb.mean_c - r);
        max_y = max_y.max(hb.mean_c + r);
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let sx = (WIDTH - 2.0 * MARGIN) / span_x;
    let sy = (HEIGHT - 2.0 * MARGIN) / span_y;
    let px = |w: f64| MARGIN + (w - min_x) * sx;
    let py = |c: f64| HEIGHT - MARGIN - (c - min_y) * sy;

    let mut out = String::new();
    svg_header(&mut out);
    axes(&mut out, min_y, max_y);
    for (idx, (label, hb)) in items.iter().enumerate() {
        let color = PALETTE[(idx + 1) % PALETTE.len()]; // red first, blue second
        let (a, b) = hb.semi_axes();
        let cx = px(hb.mean_w);
        let cy = py(hb.mean_c);
        let rx = a * sx;
        let ry = b * sy;
        let deg = -hb.angle.to_degrees(); // svg y-axis points down
        out.push_str(&format!(
            "<ellipse class=\"ellipse-{idx}\" cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\" transform=\"rotate({} {} {})\" fill=\"{color}\" fill-opacity=\"0.12\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            fmt2(cx), fmt2(cy), fmt2(rx), fmt2(ry), fmt2(deg), fmt2(cx), fmt2(cy)
        ));
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
            fmt2(cx),
            fmt2(cy)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            fmt2(MARGIN + 6.0),
            fmt2(30.0 + 16.0 * idx as f64),
            xml_escape(label)
        ));
    }
    out.push_str("</svg>\n");
    write_file(out_path, &out)
}

/// Area-proportional treemap via alternating slice-and-dice on the
/// frequency-sorted entries.
pub fn render_treemap(spec: &TreemapSpec, out_path: &Path) -> Result<(), ReportError> {
    let mut out = String::new();
    svg_header(&mut out);
    let title = format!("top {} {} words / {}", spec.entries.len(), spec.dimension.as_str(), spec.stance);
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        fmt2(WIDTH / 2.0),
        xml_escape(&title)
    ));
    if !spec.entries.is_empty() {
        let total: u64 = spec.entries.iter().map(|(_, f)| f).sum();
        layout(
            &mut out,
            &spec.entries,
            total as f64,
            MARGIN,
            40.0,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 40.0 - MARGIN,
            0,
        );
    }
    out.push_str("</svg>\n");
    write_file(out_path, &out)
}

#[allow(clippy::too_many_arguments)]
fn layout(
    out: &mut String,
    entries: &[(String, u64)],
    total: f64,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    depth: usize,
) {
    if entries.is_empty() || total <= 0.0 {
        return;
    }
    let (word, freq) = &entries[0];
    let frac = *freq as f64 / total;
    let color = PALETTE[depth % PALETTE.len()];
    let (cell_x, cell_y, cell_w, cell_h, rest) = if w >= h {
        let cw = w * frac;
        ((x, y, cw, h), (x + cw, y, w - cw, h))
    } else {
        let ch = h * frac;
        ((x, y, w, ch), (x, y + ch, w, h - ch))
    }
    .into_tuple();
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" fill-opacity=\"0.55\" stroke=\"white\" stroke-width=\"1.5\"/>\n",
        fmt2(cell_x),
        fmt2(cell_y),
        fmt2(cell_w),
        fmt2(cell_h)
    ));
    if cell_w > 40.0 && cell_h > 16.0 {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{} ({})</text>\n",
            fmt2(cell_x + cell_w / 2.0),
            fmt2(cell_y + cell_h / 2.0 + 4.0),
            xml_escape(word),
            freq
        ));
    }
    layout(
        out,
        &entries[1..],
        total - *freq as f64,
        rest.0,
        rest.1,
        rest.2,
        rest.3,
        depth + 1,
    );
}

// helper to destructure the branch tuples above
trait IntoTuple {
    fn into_tuple(self) -> (f64, f64, f64, f64, (f64, f64, f64, f64));
}

impl IntoTuple for ((f64, f64, f64, f64), (f64, f64, f64, f64)) {
    fn into_tuple(self) -> (f64, f64, f64, f64, (f64, f64, f64, f64)) {
        (self.0 .0, self.0 .1, self.0 .2, self.0 .3, self.1)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::home_base_2d;
    use crate::report::LowDimension;
    use crate::stance::StanceLabel;

    #[test]
    fn two_point_series_has_one_polyline() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.svg");
        render_timeseries(
            "t",
            &["a".into(), "b".into()],
            &[Series {
                label: "x".into(),
                values: vec![0.1, 0.2],
                rolled: None,
            }],
            &path,
        )
        .unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(content.starts_with("<svg"));
        assert_eq!(content.matches("<polyline").count(), 1);
    }

    #[test]
    fn two_ellipses_have_distinct_classes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("el.svg");
        let pts_a: Vec<(f64, f64)> = (0..30)
            .map(|i| ((i as f64 * 0.7).sin(), (i as f64 * 1.1).cos()))
            .collect();
        let pts_b: Vec<(f64, f64)> = (0..30)
            .map(|i| (2.0 + (i as f64 * 0.3).cos(), 1.0 + (i as f64 * 0.9).sin()))
            .collect();
        let a = home_base_2d(&pts_a, 0.32).unwrap();
        let b = home_base_2d(&pts_b, 0.32).unwrap();
        render_ellipses(&[("pre".into(), a), ("post".into(), b)], &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content.matches("<ellipse").count(), 2);
        assert!(content.contains("class=\"ellipse-0\""));
        assert!(content.contains("class=\"ellipse-1\""));
    }

    #[test]
    fn rendering_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let spec = TreemapSpec {
            stance: StanceLabel::Against,
            dimension: LowDimension::LowWarmth,
            entries: vec![
                ("bad".into(), 10),
                ("dangerous".into(), 6),
                ("forced".into(), 3),
            ],
        };
        let p1 = dir.path().join("a.svg");
        let p2 = dir.path().join("b.svg");
        render_treemap(&spec, &p1).unwrap();
        render_treemap(&spec, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let content = std::fs::read_to_string(&p1).unwrap();
        // one rect per entry plus the background
        assert_eq!(content.matches("<rect").count(), 4);
    }

    #[test]
    fn empty_series_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            render_timeseries("t", &[], &[], &dir.path().join("x.svg")),
            Err(ReportError::EmptyInput(_))
        ));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let spec = TreemapSpec {
            stance: StanceLabel::Favor,
            dimension: LowDimension::LowCompetence,
            entries: vec![("x".into(), 1)],
        };
        assert!(matches!(
            render_treemap(&spec, Path::new("/nonexistent-dir/deep/x.svg")),
            Err(ReportError::Io { .. })
        ));
    }
}
