//! Coordinate-regression signals: PGM images and CSV series.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalFormat {
    Pgm,
    Csv,
}

impl SignalFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => Ok(SignalFormat::Pgm),
            Some("csv") => Ok(SignalFormat::Csv),
            _ => Err(param_err(format!("cannot infer signal format of {}", path.display()))),
        }
    }
}

/// Samples of a signal on normalized coordinates in `[-1, 1]^d` with values
/// scaled to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDataset {
    pub coords: Array2<f64>,
    pub values: Vec<f64>,
    /// Peak-to-peak range used by PSNR.
    pub max: f64,
    /// Number of intensity steps of the source (e.g. 255 for 8-bit images);
    /// predictions are rounded to these levels before scoring.
    pub levels: Option<u32>,
    pub shape: Vec<usize>,
    pub source: String,
}

impl SignalDataset {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Rounds a prediction to the nearest representable level.
    pub fn quantize(&self, v: f64) -> f64 {
        match self.levels {
            Some(l) => {
                let l = f64::from(l);
                let p = ((v + 1.0) * 0.5 * l).round().clamp(0.0, l);
                2.0 * p / l - 1.0
            }
            None => v,
        }
    }

    /// Dataset from a grayscale image given row-major intensities in `[0, maxval]`.
    pub fn from_image(width: usize, height: usize, pixels: &[u32], maxval: u32, source: &str) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Dimension { expected: width * height, got: pixels.len() });
        }
        if maxval == 0 {
            return Err(param_err("image maxval must be positive"));
        }
        let mut coords = Array2::zeros((width * height, 2));
        let mut values = Vec::with_capacity(pixels.len());
        for i in 0..height {
            for j in 0..width {
                let row = i * width + j;
                coords[[row, 0]] = grid(j, width);
                coords[[row, 1]] = grid(i, height);
                values.push(2.0 * f64::from(pixels[row]) / f64::from(maxval) - 1.0);
            }
        }
        Ok(SignalDataset {
            coords,
            values,
            max: 2.0,
            levels: Some(maxval),
            shape: vec![height, width],
            source: source.into(),
        })
    }
}

fn grid(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

/// Peak signal-to-noise ratio, or the perfect-fit marker when the error is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    PerfectFit,
}

impl Psnr {
    /// Orders perfect fits above every finite value.
    pub fn as_f64(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::PerfectFit => f64::INFINITY,
        }
    }
}

pub fn psnr_from_mse(max: f64, mse: f64) -> Result<Psnr> {
    if !(mse >= 0.0) || !(max > 0.0) {
        return Err(param_err(format!("PSNR needs mse >= 0 and max > 0, got {mse}, {max}")));
    }
    if mse == 0.0 {
        return Ok(Psnr::PerfectFit);
    }
    Ok(Psnr::Finite(10.0 * (max * max / mse).log10()))
}

/// PSNR of predictions against a dataset, after quantizing to its levels.
pub fn psnr(predicted: &[f64], dataset: &SignalDataset) -> Result<Psnr> {
    if predicted.len() != dataset.len() {
        return Err(Error::Dimension { expected: dataset.len(), got: predicted.len() });
    }
    if dataset.is_empty() {
        return Err(param_err("empty dataset"));
    }
    let mse = predicted.iter().zip(&dataset.values).map(|(&p, &y)| (dataset.quantize(p) - y).powi(2)).sum::<f64>()
        / dataset.len() as f64;
    psnr_from_mse(dataset.max, mse)
}

pub fn load_signal(path: &Path, format: SignalFormat) -> Result<SignalDataset> {
    let bytes = fs::read(path)?;
    let source = path.display().to_string();
    match format {
        SignalFormat::Pgm => parse_pgm(&bytes, &source),
        SignalFormat::Csv => parse_csv(&bytes, &source),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format { offset: self.pos, message: message.into() }
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::Format { offset: start, message: format!("{what} out of range") })
    }
}

fn parse_pgm(bytes: &[u8], source: &str) -> Result<SignalDataset> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic = bytes.get(..2).ok_or_else(|| c.err("truncated header"))?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        _ => return Err(c.err("not a PGM file (expected P2 or P5)")),
    };
    c.pos = 2;
    let width = c.number("width")? as usize;
    let height = c.number("height")? as usize;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(c.err("image has zero size"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(c.err(format!("maxval {maxval} outside 1..=65535")));
    }
    let n = width * height;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
            return Err(c.err("expected whitespace before raster"));
        }
        c.pos += 1;
        let step = if maxval > 255 { 2 } else { 1 };
        for i in 0..n {
            let at = c.pos + i * step;
            let v = match step {
                1 => bytes.get(at).map(|&b| u32::from(b)),
                _ => bytes.get(at..at + 2).map(|b| u32::from(b[0]) << 8 | u32::from(b[1])),
            };
            let v = v.ok_or(Error::Format {
                offset: bytes.len(),
                message: format!("raster truncated after {i} of {n} pixels"),
            })?;
            pixels.push(v);
        }
    } else {
        for i in 0..n {
            let v = c.number("pixel value").map_err(|e| match e {
                Error::Format { offset, .. } if offset >= bytes.len() => {
                    Error::Format { offset, message: format!("raster truncated after {i} of {n} pixels") }
                }
                e => e,
            })?;
            pixels.push(v);
        }
    }
    if let Some(pos) = pixels.iter().position(|&p| p > maxval) {
        return Err(param_err(format!("pixel {pos} exceeds maxval {maxval}")));
    }
    SignalDataset::from_image(width, height, &pixels, maxval, source)
}

fn parse_csv(bytes: &[u8], source: &str) -> Result<SignalDataset> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Format { offset: e.valid_up_to(), message: "invalid UTF-8".into() })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut offset = 0;
    for (lineno, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: std::result::Result<Vec<f64>, _> = trimmed.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match fields {
            Ok(v) => {
                if v.len() < 2 {
                    return Err(Error::Format { offset: start, message: "expected coordinate(s) and a value".into() });
                }
                if let Some(first) = rows.first() {
                    if first.len() != v.len() {
                        return Err(Error::Format {
                            offset: start,
                            message: format!("expected {} columns, found {}", first.len(), v.len()),
                        });
                    }
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Format { offset: start, message: "non-finite entry".into() });
                }
                rows.push(v);
            }
            // a single non-numeric first line is a header
            Err(_) if lineno == 0 => {}
            Err(_) => return Err(Error::Format { offset: start, message: "non-numeric field".into() }),
        }
    }
    if rows.is_empty() {
        return Err(Error::Format { offset: bytes.len(), message: "no data rows".into() });
    }
    let cols = rows[0].len();
    let d = cols - 1;
    let n = rows.len();
    let normalized = |k: usize| -> Vec<f64> {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[k]), hi.max(r[k])));
        rows.iter().map(|r| if hi > lo { 2.0 * (r[k] - lo) / (hi - lo) - 1.0 } else { 0.0 }).collect()
    };
    let mut coords = Array2::zeros((n, d));
    for k in 0..d {
        for (i, v) in normalized(k).into_iter().enumerate() {
            coords[[i, k]] = v;
        }
    }
    let values = normalized(d);
    Ok(SignalDataset { coords, values, max: 2.0, levels: None, shape: vec![n], source: source.into() })
}

/// Synthetic 8-bit image mixing a low, a middle and a high frequency band.
pub fn synthetic_image(size: usize) -> Result<SignalDataset> {
    if size < 2 {
        return Err(param_err("synthetic image needs size >= 2"));
    }
    let maxval = 255u32;
    let mut pixels = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (x, y) = (grid(j, size), grid(i, size));
            let v = 0.45 * (PI * x).sin() * (0.5 * PI * y).cos()
                + 0.3 * (4.0 * PI * (x + 0.5 * y)).cos()
                + 0.2 * (9.0 * PI * x).sin() * (7.0 * PI * y).sin();
            let p = ((v.clamp(-1.0, 1.0) + 1.0) * 0.5 * f64::from(maxval)).round() as u32;
            pixels.push(p);
        }
    }
    SignalDataset::from_image(size, size, &pixels, maxval, &format!("synthetic-band-mixed-{size}"))
}
