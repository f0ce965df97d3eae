//! On-disk formats: event CSV, grayscale PFM images and metric reports.
//!
//! Event files are plain CSV with the header `s,x,y,p`, one event per line,
//! sorted by `(s, y, x)`, integers without padding. The same stream always
//! produces the same bytes.
//!
//! PFM images are single-channel (`Pf`), little-endian (scale `-1.0`) with
//! rows stored bottom to top. In memory, images are row-major with `y = 0`
//! at the top.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eventsim::{Event, EventStream, Polarity};

pub const EVENT_HEADER: &str = "s,x,y,p";

/// Serializes a stream to the event CSV format.
pub fn format_events(stream: &EventStream) -> String {
    let mut out = String::with_capacity(16 * (stream.len() + 1));
    out.push_str(EVENT_HEADER);
    out.push('\n');
    for e in stream {
        let _ = writeln!(out, "{},{},{},{}", e.s, e.x, e.y, e.polarity.sign());
    }
    out
}

pub fn write_events(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_events(stream)).map_err(|e| Error::io(path, e))
}

/// Parses the event CSV format; `origin` is only used in error messages.
pub fn parse_events(text: &str, origin: &Path) -> Result<EventStream> {
    let fail = |line: usize, message: String| Error::Format {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == EVENT_HEADER => {}
        Some((_, h)) => return Err(fail(1, format!("expected header '{EVENT_HEADER}', got '{h}'"))),
        None => return Err(fail(1, "empty file (missing header)".into())),
    }
    let mut events = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(fail(lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let num = |idx: usize, name: &str| -> Result<u32> {
            fields[idx]
                .parse::<u32>()
                .map_err(|_| fail(lineno, format!("{name} must be an unsigned integer, got '{}'", fields[idx])))
        };
        let s = num(0, "s")?;
        let x = num(1, "x")?;
        let y = num(2, "y")?;
        let polarity = fields[3]
            .parse::<i64>()
            .ok()
            .and_then(Polarity::from_sign)
            .ok_or_else(|| fail(lineno, format!("polarity must be -1 or 1, got '{}'", fields[3])))?;
        if s < 1 {
            return Err(fail(lineno, "frame index is 1-based".into()));
        }
        if !seen.insert((s, x, y)) {
            return Err(fail(lineno, format!("duplicate event at x={x}, y={y}, s={s}")));
        }
        events.push(Event { x, y, s, polarity });
    }
    Ok(EventStream::new(events))
}

pub fn read_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events(&text, path)
}

/// Grayscale float image, row-major with `y = 0` at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(FloatImage { width, height, data })
    }

    pub fn from_f64(width: u32, height: u32, data: &[f64]) -> Result<Self> {
        Self::new(width, height, data.iter().map(|&v| v as f32).collect())
    }
}

pub fn encode_pfm(image: &FloatImage) -> Result<Vec<u8>> {
    if let Some(i) = image.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite value at pixel index {i}; PFM output requires finite data"
        )));
    }
    let (w, h) = (image.width as usize, image.height as usize);
    if image.data.len() != w * h {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {w}x{h} image",
            image.data.len()
        )));
    }
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for row in (0..h).rev() {
        for v in &image.data[row * w..(row + 1) * w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes a PFM file. Nothing is written if the image holds non-finite values.
pub fn write_pfm(path: impl AsRef<Path>, image: &FloatImage) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pfm(image)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_token_line(reader: &mut impl BufRead, path: &Path, line: usize) -> Result<String> {
    let mut s = String::new();
    reader.read_line(&mut s).map_err(|e| Error::io(path, e))?;
    if s.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            line,
            message: "unexpected end of header".into(),
        });
    }
    Ok(s.trim().to_string())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<FloatImage> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let fail = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };

    let magic = read_token_line(&mut reader, path, 1)?;
    if magic != "Pf" {
        return Err(fail(1, format!("expected grayscale PFM magic 'Pf', got '{magic}'")));
    }
    let dims = read_token_line(&mut reader, path, 2)?;
    let parts: Vec<&str> = dims.split_whitespace().collect();
    let parsed: Option<(u32, u32)> = match parts.as_slice() {
        [w, h] => w.parse().ok().zip(h.parse().ok()),
        _ => None,
    };
    let (w, h) = parsed.ok_or_else(|| fail(2, format!("bad dimensions '{dims}'")))?;
    let scale_line = read_token_line(&mut reader, path, 3)?;
    let scale: f32 = scale_line
        .parse()
        .map_err(|_| fail(3, format!("bad scale '{scale_line}'")))?;
    let little = scale < 0.0;

    let (wu, hu) = (w as usize, h as usize);
    let mut buf = vec![0u8; 4 * wu * hu];
    reader.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    let mut data = vec![0f32; wu * hu];
    for (i, chunk) in buf.chunks_exact(4).enumerate() {
        let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(bytes) } else { f32::from_be_bytes(bytes) };
        let (file_row, col) = (i / wu, i % wu);
        data[(hu - 1 - file_row) * wu + col] = v;
    }
    FloatImage::new(w, h, data)
}

/// One simulated mode compared against the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub mode: String,
    pub rmse: f64,
    pub psnr: f64,
    pub f1: f64,
    pub pscd: f64,
    /// Wall time of the simulation in seconds.
    pub time_s: f64,
    /// Wall time of the baseline run in seconds.
    pub baseline_time_s: f64,
}

impl ReportRow {
    pub fn speedup(&self) -> f64 {
        self.baseline_time_s / self.time_s
    }
}

pub fn format_float(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn format_speedup(v: f64) -> String {
    format!("{v:.2}×")
}

pub fn format_report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("mode,rmse,psnr,f1,pscd,time_s,speedup\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.4}",
            r.mode,
            format_float(r.rmse),
            format_float(r.psnr),
            format_float(r.f1),
            format_float(r.pscd),
            r.time_s,
            r.speedup()
        );
    }
    out
}

/// Text table with six rows per mode: four metrics, time and speedup.
pub fn format_report_table(rows: &[ReportRow]) -> String {
    let mut cells: Vec<[String; 3]> = vec![["mode".into(), "metric".into(), "value".into()]];
    for r in rows {
        let entries = [
            ("RMSE", format!("{:.6}", r.rmse)),
            (
                "PSNR",
                if r.psnr.is_infinite() { "inf".into() } else { format!("{:.3}", r.psnr) },
            ),
            ("F1 score", format!("{:.5}", r.f1)),
            ("PSCD", format!("{:.3e}", r.pscd)),
            ("Time (s)", format!("{:.3}", r.time_s)),
            ("Speed up", format_speedup(r.speedup())),
        ];
        for (i, (name, value)) in entries.into_iter().enumerate() {
            let mode = if i == 0 { r.mode.clone() } else { String::new() };
            cells.push([mode, name.into(), value]);
        }
    }
    align(&cells)
}

fn align<const N: usize>(cells: &[[String; N]]) -> String {
    let mut widths = [0usize; N];
    for row in cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (N - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// Companion path for the text table of a CSV report.
pub fn table_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("txt")
}

/// Writes `path` (CSV) and `path` with a `.txt` extension (aligned table).
pub fn write_report(path: impl AsRef<Path>, rows: &[ReportRow]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_report_csv(rows)).map_err(|e| Error::io(path, e))?;
    let table = table_path(path);
    fs::write(&table, format_report_table(rows)).map_err(|e| Error::io(&table, e))
}

/// Baseline vs adaptive timing at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub width: u32,
    pub height: u32,
    pub mode: String,
    pub baseline_time_s: f64,
    pub time_s: f64,
    pub baseline_paths: u64,
    pub paths: u64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.baseline_time_s / self.time_s
    }
}

pub fn format_bench_csv(rows: &[BenchRow]) -> String {
    let mut out =
        String::from("width,height,mode,baseline_time_s,time_s,baseline_paths,paths,speedup\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{},{},{:.4}",
            r.width, r.height, r.mode, r.baseline_time_s, r.time_s, r.baseline_paths, r.paths,
            r.speedup()
        );
    }
    out
}

pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let mut cells: Vec<[String; 5]> = vec![[
        "size".into(),
        "mode".into(),
        "time (s)".into(),
        "path ratio".into(),
        "speed up".into(),
    ]];
    for r in rows {
        cells.push([
            format!("{}x{}", r.width, r.height),
            r.mode.clone(),
            format!("{:.3}", r.time_s),
            format!("{:.4}", r.paths as f64 / r.baseline_paths as f64),
            format_speedup(r.speedup()),
        ]);
    }
    align(&cells)
}

pub fn write_bench(path: impl AsRef<Path>, rows: &[BenchRow]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_bench_csv(rows)).map_err(|e| Error::io(path, e))?;
    let table = table_path(path);
    fs::write(&table, format_bench_table(rows)).map_err(|e| Error::io(&table, e))
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
