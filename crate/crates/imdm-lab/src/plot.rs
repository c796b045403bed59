//! Standalone SVG line plots, written directly with no plotting dependency.

/// Render one or more named series as an SVG polyline chart.
pub fn line_chart(title: &str, series: &[(&str, &[(f64, f64)])]) -> String {
    let (w, h) = (640.0, 400.0);
    let margin = 50.0;
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for (_, pts) in series {
        for &(x, y) in *pts {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
    }
    if !min_x.is_finite() {
        min_x = 0.0;
        max_x = 1.0;
        min_y = 0.0;
        max_y = 1.0;
    }
    if (max_x - min_x).abs() < 1e-12 {
        max_x = min_x + 1.0;
    }
    if (max_y - min_y).abs() < 1e-12 {
        max_y = min_y + 1.0;
    }
    let sx = |x: f64| margin + (x - min_x) / (max_x - min_x) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - min_y) / (max_y - min_y) * (h - 2.0 * margin);

    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        w / 2.0,
        xml_escape(title)
    );
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{m}\" y=\"{by}\" font-family=\"sans-serif\" font-size=\"11\">{min_x:.3}</text>\n\
         <text x=\"{r}\" y=\"{by}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{max_x:.3}</text>\n\
         <text x=\"{lx}\" y=\"{b}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{min_y:.3}</text>\n\
         <text x=\"{lx}\" y=\"{t}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{max_y:.3}</text>\n",
        m = margin,
        b = h - margin,
        r = w - margin,
        t = margin,
        by = h - margin + 16.0,
        lx = margin - 6.0,
    ));
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            w - margin - 120.0,
            margin + 16.0 * (i as f64 + 1.0),
            xml_escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
