//! Minimal static line charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

#[derive(Clone, Debug)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let (x0, x1) = span(self.points.iter().map(|p| p.0));
        let (y0, y1) = span(self.points.iter().map(|p| p.1));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ =
            writeln!(s, r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" fill="none" stroke="black"/>"#);
        if y0 < 0.0 && y1 > 0.0 {
            let z = sy(0.0);
            let _ = writeln!(
                s,
                r##"<line x1="{left}" y1="{z:.2}" x2="{right}" y2="{z:.2}" stroke="#999" stroke-dasharray="4 3"/>"##
            );
        }
        let label = |s: &mut String, x: f64, y: f64, anchor: &str, text: String| {
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
                escape(&text)
            );
        };
        label(&mut s, left, bottom + 16.0, "middle", format!("{x0:.4}"));
        label(&mut s, right, bottom + 16.0, "middle", format!("{x1:.4}"));
        label(&mut s, left - 6.0, bottom, "end", format!("{y0:.4}"));
        label(&mut s, left - 6.0, top + 4.0, "end", format!("{y1:.4}"));
        label(&mut s, WIDTH / 2.0, HEIGHT - 12.0, "middle", self.x_label.clone());
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {:.2})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        let coords: Vec<String> = self.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##,
            coords.join(" ")
        );
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_a_polyline() {
        let p = Plot {
            title: "a<b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            points: vec![(0.0, -1.0), (1.0, 2.0)],
        };
        let s = p.render();
        assert!(s.starts_with("<svg"));
        assert!(s.contains("<polyline"));
        assert!(s.contains("a&lt;b"));
        assert!(s.contains("stroke-dasharray"));
    }

    #[test]
    fn flat_series_does_not_divide_by_zero() {
        let p = Plot { title: String::new(), x_label: String::new(), y_label: String::new(), points: vec![(1.0, 3.0)] };
        assert!(!p.render().contains("NaN"));
    }
}
