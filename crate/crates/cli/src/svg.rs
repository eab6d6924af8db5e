//! Hand-emitted SVG trace plots: one stacked panel per parameter, a
//! polyline over retained draws, and the min/max range printed on the left.
//! No plotting dependency; output is a pure function of the traces.

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 110.0;
const PANEL_GAP: f64 = 34.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 12.0;

/// Renders stacked trace panels for the named series. Constant traces draw
/// as a centered horizontal line.
pub fn trace_svg(traces: &[(String, Vec<f64>)]) -> String {
    let total_height = traces.len() as f64 * (PANEL_HEIGHT + PANEL_GAP) + PANEL_GAP;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{total_height}\" \
         viewBox=\"0 0 {WIDTH} {total_height}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (panel, (name, values)) in traces.iter().enumerate() {
        let top = PANEL_GAP + panel as f64 * (PANEL_HEIGHT + PANEL_GAP);
        let bottom = top + PANEL_HEIGHT;
        let (mut lo, mut hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-300 {
            lo -= 0.5;
            hi += 0.5;
        }
        let x_of = |k: usize| {
            let span = (values.len().max(2) - 1) as f64;
            MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) * k as f64 / span
        };
        let y_of = |x: f64| bottom - (x - lo) / (hi - lo) * PANEL_HEIGHT;
        out.push_str(&format!(
            "<text x=\"{MARGIN_LEFT}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"13\">{}</text>\n",
            top - 8.0,
            escape(name)
        ));
        out.push_str(&format!(
            "<text x=\"4\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"10\">{hi:.4}</text>\n",
            top + 10.0
        ));
        out.push_str(&format!(
            "<text x=\"4\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"10\">{lo:.4}</text>\n",
            bottom
        ));
        out.push_str(&format!(
            "<rect x=\"{MARGIN_LEFT}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{PANEL_HEIGHT}\" \
             fill=\"none\" stroke=\"#cccccc\"/>\n",
            WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        ));
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(k, &x)| format!("{:.2},{:.2}", x_of(k), y_of(x)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\"{}\"/>\n",
            points.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
