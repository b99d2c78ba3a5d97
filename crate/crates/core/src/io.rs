//! Deterministic serialization: JSON with sorted keys and 17 significant
//! digits, CSV with the same float format, and a minimal SVG writer.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::error::Result;

/// Float text used by every artifact: 17 significant digits, scientific.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

struct ExactFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Canonical JSON text of any serializable value (keys sorted, trailing LF).
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // Going through `Value` sorts object keys.
    let value: Value = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// One CSV cell.
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// CSV text with LF line endings.
pub fn csv_string(header: &[&str], rows: &[Vec<Cell>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::text))?;
    }
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 cells"))
}

/// Minimal SVG builder with a fixed viewport mapping world to pixels.
pub struct Svg {
    body: String,
    size: f64,
    center: [f64; 2],
    scale: f64,
}

impl Svg {
    /// Square canvas of `size` pixels showing `[cx − r, cx + r] × [cy − r, cy + r]`.
    pub fn new(size: f64, center: [f64; 2], radius: f64) -> Self {
        let radius = if radius > 0.0 && radius.is_finite() { radius } else { 1.0 };
        Svg { body: String::new(), size, center, scale: 0.5 * size / radius }
    }

    pub fn map(&self, p: [f64; 2]) -> [f64; 2] {
        [
            0.5 * self.size + (p[0] - self.center[0]) * self.scale,
            0.5 * self.size - (p[1] - self.center[1]) * self.scale,
        ]
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn polygon(&mut self, pts: &[[f64; 2]], stroke: &str, fill: &str, width: f64) {
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let q = self.map(*p);
            if i > 0 {
                d.push(' ');
            }
            let _ = write!(d, "{:.3},{:.3}", q[0], q[1]);
        }
        let _ = writeln!(
            self.body,
            r#"<polygon points="{d}" stroke="{stroke}" fill="{fill}" stroke-width="{width:.3}"/>"#
        );
    }

    pub fn polyline(&mut self, pts: &[[f64; 2]], stroke: &str, width: f64) {
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let q = self.map(*p);
            if i > 0 {
                d.push(' ');
            }
            let _ = write!(d, "{:.3},{:.3}", q[0], q[1]);
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{d}" stroke="{stroke}" fill="none" stroke-width="{width:.3}"/>"#
        );
    }

    pub fn circle(&mut self, p: [f64; 2], r: f64, fill: &str) {
        let q = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{:.3}" cy="{:.3}" r="{r:.3}" fill="{fill}"/>"#, q[0], q[1]);
    }

    /// Axis-aligned world rectangle with corner `lo` and extent `wh`.
    pub fn rect(&mut self, lo: [f64; 2], wh: [f64; 2], fill: &str) {
        let a = self.map([lo[0], lo[1] + wh[1]]);
        let _ = writeln!(
            self.body,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
            a[0],
            a[1],
            wh[0] * self.scale,
            wh[1] * self.scale
        );
    }

    pub fn text(&mut self, p: [f64; 2], s: &str) {
        let q = self.map(p);
        let _ = writeln!(
            self.body,
            r#"<text x="{:.3}" y="{:.3}" font-size="12" font-family="monospace">{}</text>"#,
            q[0],
            q[1],
            escape(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n\
             <rect x=\"0\" y=\"0\" width=\"{s}\" height=\"{s}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            s = self.size
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Gray level for `t ∈ [0, 1]`, dark for large values.
pub fn gray(t: f64) -> String {
    let v = (255.0 * (1.0 - 0.8 * t.clamp(0.0, 1.0))).round() as u8;
    format!("#{v:02x}{v:02x}{v:02x}")
}
