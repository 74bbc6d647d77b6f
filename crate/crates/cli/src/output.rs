//! Report rendering: JSON with 17 significant digits, CSV tables, SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use serde_json::{json, Value};

use randers_lab::config::ExperimentConfig;
use randers_lab::{Point, Result, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
        }
    }
}

pub struct Report {
    pub command: String,
    pub result: Value,
    body: Value,
}

impl Report {
    pub fn new(command: &str, config: &ExperimentConfig, result: Value) -> Self {
        let body = json!({
            "command": command,
            "version": VERSION,
            "config_hash": config.hash(),
            "config": serde_json::to_value(config).expect("config serialises"),
        });
        Report { command: command.to_string(), result, body }
    }

    pub fn to_value(&self) -> Value {
        let mut v = self.body.clone();
        v["result"] = self.result.clone();
        v
    }
}

/// Scientific notation with 17 significant digits.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with every float printed at 17 significant digits.
pub fn to_json(value: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, value, 0);
    s.push('\n');
    s
}

fn write_value(s: &mut String, value: &Value, indent: usize) {
    match value {
        Value::Number(n) if n.is_f64() => s.push_str(&float(n.as_f64().expect("f64 number"))),
        Value::Array(items) if !items.is_empty() => {
            s.push('[');
            for (i, item) in items.iter().enumerate() {
                s.push_str(if i == 0 { "\n" } else { ",\n" });
                pad(s, indent + 1);
                write_value(s, item, indent + 1);
            }
            s.push('\n');
            pad(s, indent);
            s.push(']');
        }
        Value::Object(map) if !map.is_empty() => {
            s.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                s.push_str(if i == 0 { "\n" } else { ",\n" });
                pad(s, indent + 1);
                s.push_str(&Value::String(k.clone()).to_string());
                s.push_str(": ");
                write_value(s, v, indent + 1);
            }
            s.push('\n');
            pad(s, indent);
            s.push('}');
        }
        other => s.push_str(&other.to_string()),
    }
}

fn pad(s: &mut String, indent: usize) {
    for _ in 0..indent {
        s.push_str("  ");
    }
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// Writes the JSON report and any extra artefact to `out`, or prints the
/// requested format to stdout.
pub fn emit(report: &Report, extra: Option<&str>, format: Format, out: Option<&Path>) -> Result<()> {
    let json = to_json(&report.to_value());
    match out {
        Some(dir) => {
            write_file(dir, &format!("{}.json", report.command), &json)?;
            if let Some(text) = extra {
                write_file(dir, &format!("{}.{}", report.command, format.extension()), text)?;
            }
        }
        None => print!("{}", extra.unwrap_or(&json)),
    }
    Ok(())
}

pub fn curve_csv(samples: &[(f64, Point)]) -> String {
    let dim = samples.first().map_or(0, |(_, p)| p.as_slice().len());
    let mut s = String::from("t");
    for i in 0..dim {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for (t, p) in samples {
        s.push_str(&float(*t));
        for c in p.as_slice() {
            let _ = write!(s, ",{}", float(*c));
        }
        s.push('\n');
    }
    s
}

pub fn table_csv(result: &Value) -> String {
    let mut s = String::from("sample,displacement\n");
    for (i, row) in result["table"].as_array().into_iter().flatten().enumerate() {
        let _ = writeln!(s, "{i},{}", float(row["displacement"].as_f64().unwrap_or(f64::NAN)));
    }
    s
}

pub fn residuals_csv(result: &Value) -> String {
    let mut s = String::from("direction,residual\n");
    for (i, row) in result["directions"].as_array().into_iter().flatten().enumerate() {
        let _ = writeln!(s, "{i},{}", float(row["residual"].as_f64().unwrap_or(f64::NAN)));
    }
    s
}

const SVG_SIZE: f64 = 400.0;
const SVG_MARGIN: f64 = 20.0;

fn svg(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_SIZE}\" height=\"{SVG_SIZE}\" viewBox=\"0 0 {SVG_SIZE} {SVG_SIZE}\">\n{body}</svg>\n"
    )
}

/// Maps `[lo, hi]` onto the drawable span, flipping for the y axis.
fn scale(v: f64, lo: f64, hi: f64, flip: bool) -> f64 {
    let span = SVG_SIZE - 2.0 * SVG_MARGIN;
    let u = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    SVG_MARGIN + span * if flip { 1.0 - u } else { u }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Polyline of the first two ambient coordinates.
pub fn curve_svg(samples: &[(f64, Point)]) -> String {
    let xy: Vec<(f64, f64)> = samples
        .iter()
        .map(|(_, p)| {
            let c = p.as_slice();
            (c[0], c.get(1).copied().unwrap_or(0.0))
        })
        .collect();
    let (x0, x1) = bounds(xy.iter().map(|p| p.0));
    let (y0, y1) = bounds(xy.iter().map(|p| p.1));
    let points: Vec<String> = xy
        .iter()
        .map(|&(x, y)| format!("{:.3},{:.3}", scale(x, x0, x1, false), scale(y, y0, y1, true)))
        .collect();
    svg(&format!("<polyline fill=\"none\" stroke=\"black\" points=\"{}\"/>\n", points.join(" ")))
}

const HISTOGRAM_BINS: usize = 20;

pub fn histogram_svg(values: &[f64]) -> String {
    let (lo, hi) = bounds(values.iter().copied());
    let mut counts = [0usize; HISTOGRAM_BINS];
    for &v in values {
        let b = if hi > lo { ((v - lo) / (hi - lo) * HISTOGRAM_BINS as f64) as usize } else { 0 };
        counts[b.min(HISTOGRAM_BINS - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let width = (SVG_SIZE - 2.0 * SVG_MARGIN) / HISTOGRAM_BINS as f64;
    let mut body = String::new();
    for (i, &c) in counts.iter().enumerate() {
        let h = (SVG_SIZE - 2.0 * SVG_MARGIN) * c as f64 / top;
        let _ = writeln!(
            body,
            "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"grey\"/>",
            SVG_MARGIN + i as f64 * width,
            SVG_SIZE - SVG_MARGIN - h,
            width,
            h
        );
    }
    let _ = writeln!(
        body,
        "<text x=\"{SVG_MARGIN}\" y=\"{:.0}\" font-size=\"10\">{} .. {}</text>",
        SVG_MARGIN - 6.0,
        float(lo),
        float(hi)
    );
    svg(&body)
}
