//! Minimal SVG scatter/curve plots.

use spectral_core::graph::SpectralCurve;
use spectral_core::Complex64;
use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;

/// Plot window in the λ-plane, mapped onto a fixed canvas.
pub struct Plot {
    re: (f64, f64),
    im: (f64, f64),
    body: String,
}

impl Plot {
    /// Window `[re0, re1] × [-depth, 0]` plus a 10% margin on each side.
    pub fn new(re: (f64, f64), depth: f64) -> Plot {
        let (w, h) = (re.1 - re.0, depth);
        Plot {
            re: (re.0 - 0.1 * w, re.1 + 0.1 * w),
            im: (-depth - 0.1 * h, 0.1 * h),
            body: String::new(),
        }
    }

    /// Explicit window, no margin.
    pub fn window(re: (f64, f64), im: (f64, f64)) -> Plot {
        Plot { re, im, body: String::new() }
    }

    fn x(&self, z: Complex64) -> f64 {
        (z.re - self.re.0) / (self.re.1 - self.re.0) * WIDTH
    }

    fn y(&self, z: Complex64) -> f64 {
        (self.im.1 - z.im) / (self.im.1 - self.im.0) * HEIGHT
    }

    fn scale(&self) -> f64 {
        WIDTH / (self.re.1 - self.re.0)
    }

    pub fn axes(&mut self) {
        let o = Complex64::new(0.0, 0.0);
        let (x0, y0) = (self.x(o), self.y(o));
        let _ = writeln!(
            self.body,
            r##"<g class="axes" stroke="#999" stroke-width="0.5"><line x1="0" y1="{y0:.2}" x2="{WIDTH}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="0" x2="{x0:.2}" y2="{HEIGHT}"/></g>"##
        );
    }

    pub fn curve(&mut self, c: &SpectralCurve) {
        if c.samples.is_empty() {
            return;
        }
        let mut d = String::new();
        for (j, z) in c.samples.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if j == 0 { "M" } else { " L" }, self.x(*z), self.y(*z));
        }
        let dash = if c.excluded { r#" stroke-dasharray="4,3""# } else { "" };
        let _ = writeln!(
            self.body,
            r##"<path class="curve" data-tag="{}" d="{d}" fill="none" stroke="#1f5fa8" stroke-width="1.2"{dash}/>"##,
            c.tag.as_str()
        );
    }

    pub fn polyline(&mut self, points: &[Complex64], class: &str) {
        if points.is_empty() {
            return;
        }
        let pts: Vec<String> = points.iter().map(|z| format!("{:.2},{:.2}", self.x(*z), self.y(*z))).collect();
        let _ = writeln!(
            self.body,
            r##"<polyline class="{class}" points="{}" fill="none" stroke="#1f5fa8" stroke-width="1"/>"##,
            pts.join(" ")
        );
    }

    pub fn eigenvalue(&mut self, z: Complex64) {
        let _ = writeln!(self.body, r##"<circle class="eig" cx="{:.2}" cy="{:.2}" r="2" fill="#c0392b"/>"##, self.x(z), self.y(z));
    }

    /// Trust disk, drawn at least 3 px wide.
    pub fn disk(&mut self, z: Complex64, radius: f64) {
        let r = (radius * self.scale()).max(3.0);
        let _ = writeln!(
            self.body,
            r##"<circle class="prediction" cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="none" stroke="#27ae60" stroke-width="0.8"/>"##,
            self.x(z),
            self.y(z)
        );
    }

    pub fn marker(&mut self, z: Complex64, class: &str) {
        let _ = writeln!(
            self.body,
            r##"<rect class="{class}" x="{:.2}" y="{:.2}" width="6" height="6" fill="none" stroke="#000"/>"##,
            self.x(z) - 3.0,
            self.y(z) - 3.0
        );
    }

    pub fn finish(self, title: &str) -> String {
        let title = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<title>{title}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}
