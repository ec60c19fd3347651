//! CSV tables, manifests and minimal SVG figures.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ionjunction::config::KeyValues;

use crate::CliError;

pub const MANIFEST: &str = "manifest.txt";

pub fn create_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(out.to_path_buf(), e))
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// CSV table whose first line is `# ionjunction <kind> v<version>`.
pub struct Table {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(path: &Path, kind: &str, version: u32, header: &[&str]) -> Result<Self, CliError> {
        let mut file = create_file(path)?;
        writeln!(file, "# ionjunction {kind} v{version}").map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header).map_err(|e| CliError::Csv(path.to_path_buf(), e))?;
        Ok(Self { path: path.to_path_buf(), writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| CliError::Csv(self.path.clone(), e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| CliError::Io(self.path.clone(), e))
    }
}

/// Writes every resolved setting plus the command name.
pub fn write_manifest(out: &Path, command: &str, settings: &KeyValues) -> Result<(), CliError> {
    let mut kv = settings.clone();
    kv.set("command", command);
    let path = out.join(MANIFEST);
    let mut file = create_file(&path)?;
    file.write_all(kv.to_manifest().as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| CliError::Io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        svg.push_str(&format!(
            "<rect x=\"{l}\" y=\"{t}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
            r - l,
            b - t
        ));
        let text = |x: f64, y: f64, anchor: &str, s: &str| {
            format!("<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"12\" text-anchor=\"{anchor}\">{s}</text>\n")
        };
        svg.push_str(&text(WIDTH / 2.0, t - 20.0, "middle", title));
        svg.push_str(&text(WIDTH / 2.0, HEIGHT - 15.0, "middle", xlabel));
        svg.push_str(&format!(
            "<text x=\"15\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.1})\">{ylabel}</text>\n",
            HEIGHT / 2.0,
            HEIGHT / 2.0
        ));
        svg.push_str(&text(l, b + 18.0, "middle", &format!("{:.3}", self.x.0)));
        svg.push_str(&text(r, b + 18.0, "middle", &format!("{:.3}", self.x.1)));
        svg.push_str(&text(l - 5.0, b, "end", &format!("{:.3}", self.y.0)));
        svg.push_str(&text(l - 5.0, t + 4.0, "end", &format!("{:.3}", self.y.1)));
    }
}

fn open_svg() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

pub struct Heatmap<'a> {
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    /// Colour of cell `(i, j)` at `colors[i * ys.len() + j]`.
    pub colors: &'a [&'a str],
}

pub fn heatmap(map: &Heatmap) -> String {
    let span = |v: &[f64]| {
        let step = if v.len() > 1 { (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64 } else { 1.0 };
        (v[0] - 0.5 * step, v[v.len() - 1] + 0.5 * step, step)
    };
    let (x0, x1, dx) = span(map.xs);
    let (y0, y1, dy) = span(map.ys);
    let frame = Frame::new((x0, x1), (y0, y1));
    let mut svg = open_svg();
    for (i, &x) in map.xs.iter().enumerate() {
        for (j, &y) in map.ys.iter().enumerate() {
            let (l, r) = (frame.px(x - 0.5 * dx), frame.px(x + 0.5 * dx));
            let (t, b) = (frame.py(y + 0.5 * dy), frame.py(y - 0.5 * dy));
            svg.push_str(&format!(
                "<rect x=\"{l:.2}\" y=\"{t:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
                r - l,
                b - t,
                map.colors[i * map.ys.len() + j]
            ));
        }
    }
    frame.axes(&mut svg, map.title, map.xlabel, map.ylabel);
    svg.push_str("</svg>\n");
    svg
}

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for &(px, py) in all {
        x = (x.0.min(px), x.1.max(px));
        y = (y.0.min(py), y.1.max(py));
    }
    if !x.0.is_finite() {
        (x, y) = ((0.0, 1.0), (0.0, 1.0));
    }
    let frame = Frame::new(x, y);
    let mut svg = open_svg();
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(a, b)| format!("{:.2},{:.2}", frame.px(a), frame.py(b)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
            s.color,
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            WIDTH - MARGIN + 5.0,
            MARGIN + 15.0 * (k as f64 + 1.0),
            s.color,
            s.label
        ));
    }
    frame.axes(&mut svg, title, xlabel, ylabel);
    svg.push_str("</svg>\n");
    svg
}
