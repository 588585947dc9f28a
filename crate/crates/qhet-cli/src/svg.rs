//! Minimal self-contained SVG line/scatter rendering for the report
//! families. No plotting dependency: panels, axes, polylines, and a
//! legend are emitted directly, and the plotted numbers are embedded in
//! a `<desc>` block so every figure carries its own data table.

/// One plotted line.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// One axes box in the grid.
#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

/// A figure: a grid of panels sharing one legend.
#[derive(Debug, Clone)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub caption: String,
    pub panels: Vec<Panel>,
    pub columns: usize,
    /// Draw a horizontal reference at y = 0 (error and bias plots).
    pub zero_line: bool,
}

// Color-blind-safe palette with varied dash patterns so series stay
// distinguishable in grayscale print.
const STYLES: [(&str, &str); 6] = [
    ("#000000", "none"),
    ("#e69f00", "7,3"),
    ("#0072b2", "2,3"),
    ("#009e73", "9,3,2,3"),
    ("#d55e00", "4,2"),
    ("#cc79a7", "1,2"),
];

const PANEL_W: f64 = 260.0;
const PANEL_H: f64 = 190.0;
const MARGIN_L: f64 = 52.0;
const MARGIN_B: f64 = 34.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_R: f64 = 12.0;
const HEADER_H: f64 = 58.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

/// Render the figure, embedding `data_table` (the companion CSV) in the
/// SVG `<desc>`.
pub fn render(figure: &Figure, data_table: &str) -> String {
    let columns = figure.columns.max(1);
    let rows = figure.panels.len().div_ceil(columns);
    let cell_w = MARGIN_L + PANEL_W + MARGIN_R;
    let cell_h = MARGIN_T + PANEL_H + MARGIN_B;
    let width = cell_w * columns as f64 + 16.0;
    let height = HEADER_H + cell_h * rows as f64 + 26.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!("<desc>{}</desc>\n", escape(data_table)));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"16\" y=\"22\" font-size=\"15\" font-weight=\"bold\">{}</text>\n",
        escape(&figure.title)
    ));

    // Legend: every distinct series label across panels, in first-seen order.
    let mut labels: Vec<&str> = Vec::new();
    for panel in &figure.panels {
        for series in &panel.series {
            if !labels.contains(&series.label.as_str()) {
                labels.push(&series.label);
            }
        }
    }
    let mut x_cursor = 16.0;
    for (i, label) in labels.iter().enumerate() {
        let (color, dash) = STYLES[i % STYLES.len()];
        svg.push_str(&format!(
            "<line x1=\"{x_cursor:.1}\" y1=\"38\" x2=\"{:.1}\" y2=\"38\" stroke=\"{color}\" \
             stroke-width=\"2\" stroke-dasharray=\"{dash}\"/>\n",
            x_cursor + 26.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"42\" font-size=\"11\">{}</text>\n",
            x_cursor + 31.0,
            escape(label)
        ));
        x_cursor += 36.0 + 7.0 * label.len() as f64 + 14.0;
    }

    for (index, panel) in figure.panels.iter().enumerate() {
        let col = index % columns;
        let row = index / columns;
        let origin_x = 8.0 + col as f64 * cell_w + MARGIN_L;
        let origin_y = HEADER_H + row as f64 * cell_h + MARGIN_T;
        render_panel(&mut svg, figure, panel, &labels, origin_x, origin_y);
    }

    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.0}\" font-size=\"11\" fill=\"#444\">{}</text>\n",
        height - 8.0,
        escape(&figure.caption)
    ));
    svg.push_str("</svg>\n");
    svg
}

fn render_panel(
    svg: &mut String,
    figure: &Figure,
    panel: &Panel,
    labels: &[&str],
    x0: f64,
    y0: f64,
) {
    let points: Vec<(f64, f64)> = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if points.is_empty() {
        return;
    }
    let (mut x_min, mut x_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    let (mut y_min, mut y_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    if figure.zero_line {
        y_min = y_min.min(0.0);
        y_max = y_max.max(0.0);
    }
    if x_max - x_min < 1e-12 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad_y = 0.06 * (y_max - y_min);
    y_min -= pad_y;
    y_max += pad_y;

    let sx = |x: f64| x0 + (x - x_min) / (x_max - x_min) * PANEL_W;
    let sy = |y: f64| y0 + PANEL_H - (y - y_min) / (y_max - y_min) * PANEL_H;

    svg.push_str(&format!(
        "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" \
         font-weight=\"bold\">{}</text>\n",
        x0 + PANEL_W / 2.0,
        y0 - 7.0,
        escape(&panel.title)
    ));

    if figure.zero_line && y_min < 0.0 && y_max > 0.0 {
        let zy = sy(0.0);
        svg.push_str(&format!(
            "<line x1=\"{x0:.1}\" y1=\"{zy:.1}\" x2=\"{:.1}\" y2=\"{zy:.1}\" stroke=\"#999\" \
             stroke-width=\"0.7\"/>\n",
            x0 + PANEL_W
        ));
    }

    // Tick labels at the axis extremes.
    svg.push_str(&format!(
        "<text x=\"{x0:.1}\" y=\"{:.1}\" font-size=\"9\">{}</text>\n",
        y0 + PANEL_H + 12.0,
        format_tick(x_min)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\" text-anchor=\"end\">{}</text>\n",
        x0 + PANEL_W,
        y0 + PANEL_H + 12.0,
        format_tick(x_max)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\" text-anchor=\"end\">{}</text>\n",
        x0 - 4.0,
        y0 + PANEL_H,
        format_tick(y_min + pad_y)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\" text-anchor=\"end\">{}</text>\n",
        x0 - 4.0,
        y0 + 8.0,
        format_tick(y_max - pad_y)
    ));
    // Axis labels on the bottom-left panel only would need layout context;
    // keep them on every panel's edges instead.
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H + 26.0,
        escape(&figure.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\" \
         transform=\"rotate(-90 {:.1} {:.1})\">{}</text>\n",
        x0 - 38.0,
        y0 + PANEL_H / 2.0,
        x0 - 38.0,
        y0 + PANEL_H / 2.0,
        escape(&figure.y_label)
    ));

    for series in &panel.series {
        let style_index = labels.iter().position(|l| *l == series.label).unwrap_or(0);
        let (color, dash) = STYLES[style_index % STYLES.len()];
        let mut sorted = series.points.clone();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let path: Vec<String> = sorted
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if path.len() > 1 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" \
                 stroke-dasharray=\"{dash}\"/>\n",
                path.join(" ")
            ));
        }
        for &(x, y) in &sorted {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
    }
}
