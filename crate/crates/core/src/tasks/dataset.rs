use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Vertical,
    Rotated,
}

impl Orientation {
    pub fn index(self) -> usize {
        match self {
            Orientation::Vertical => 0,
            Orientation::Rotated => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Orientation::Vertical => "v",
            Orientation::Rotated => "r",
        }
    }
}

/// Gray-scale image with a digit class index and an orientation label.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageExample {
    pub height: usize,
    pub width: usize,
    /// Row-major, values in `[0, 1]`.
    pub pixels: Vec<f64>,
    pub digit: usize,
    pub orientation: Orientation,
}

impl ImageExample {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>, digit: usize) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::PixelOutOfRange { index, value });
        }
        Ok(Self {
            height,
            width,
            pixels,
            digit,
            orientation: Orientation::Vertical,
        })
    }

    /// Class index per output group: `[digit, orientation]`.
    pub fn labels(&self) -> Vec<usize> {
        vec![self.digit, self.orientation.index()]
    }
}

/// Read a CSV of `height * width` pixel columns followed by a `label` column
/// holding the digit class index. A header line is required.
pub fn load_dataset(path: &Path, height: usize, width: usize) -> Result<Vec<ImageExample>> {
    let text = crate::io::read_text(path)?;
    if text.trim().is_empty() {
        log::warn!("{}: empty dataset file", path.display());
        return Ok(Vec::new());
    }
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let n = height * width;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.len() != n + 1 {
        return Err(parse_err(
            1,
            format!("expected {} columns ({n} pixels and a label), found {}", n + 1, header.len()),
        ));
    }
    if header.get(n).map(str::trim) != Some("label") {
        return Err(parse_err(1, "last column must be named `label`".into()));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let pixels = record
            .iter()
            .take(n)
            .enumerate()
            .map(|(i, v)| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, format!("pixel {i}: `{v}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = record[n]
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(line, format!("label `{}`: {e}", &record[n])))?;
        let ex = ImageExample::new(height, width, pixels, label).map_err(|e| parse_err(line, e.to_string()))?;
        out.push(ex);
    }
    Ok(out)
}

/// Rotate counter-clockwise by `degrees` about the image centre with
/// bilinear resampling; samples outside the source are zero.
pub fn rotate_image(pixels: &[f64], height: usize, width: usize, degrees: f64) -> Vec<f64> {
    let (s, c) = degrees.to_radians().sin_cos();
    let cy = (height as f64 - 1.0) / 2.0;
    let cx = (width as f64 - 1.0) / 2.0;
    let at = |y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= height as isize || x >= width as isize {
            0.0
        } else {
            pixels[y as usize * width + x as usize]
        }
    };
    let mut out = vec![0.0; height * width];
    for y in 0..height {
        for x in 0..width {
            // inverse map; image rows grow downward
            let dx = x as f64 - cx;
            let dy = cy - y as f64;
            let sx = c * dx + s * dy + cx;
            let sy = cy - (-s * dx + c * dy);
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
                + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
            out[y * width + x] = v.clamp(0.0, 1.0);
        }
    }
    out
}

/// The originals followed by one rotated copy of each, with angles drawn
/// uniformly from `range` (degrees) on stream `(seed, "rotate", index)`.
pub fn augment_rotations(examples: &[ImageExample], range: (f64, f64), seed: u64) -> Result<Vec<ImageExample>> {
    if !(range.0 <= range.1) {
        return Err(Error::Config(format!("rotation range {range:?} is empty")));
    }
    let mut out = examples.to_vec();
    for (n, ex) in examples.iter().enumerate() {
        let mut r = rng::stream(seed, "rotate", n as u64);
        let angle = if range.0 == range.1 {
            range.0
        } else {
            r.random_range(range.0..range.1)
        };
        out.push(ImageExample {
            pixels: rotate_image(&ex.pixels, ex.height, ex.width, angle),
            orientation: Orientation::Rotated,
            ..ex.clone()
        });
    }
    Ok(out)
}

/// Stroke-drawn stand-ins for the digits "1" (class 0) and "7" (class 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub size: usize,
    pub per_class: usize,
    /// Maximum additive background noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            size: 8,
            per_class: 50,
            noise: 0.15,
            seed: 0,
        }
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    };
    let (dx, dy) = (wx - t * vx, wy - t * vy);
    (dx * dx + dy * dy).sqrt()
}

/// Unrotated synthetic digits, alternating classes.
pub fn synthetic_digits(cfg: &SyntheticConfig) -> Vec<ImageExample> {
    let s = cfg.size as f64 - 1.0;
    (0..2 * cfg.per_class)
        .map(|n| {
            let mut r = rng::stream(cfg.seed, "synthetic", n as u64);
            let digit = n % 2;
            let shift = (r.random_range(-0.12..0.12) * s, r.random_range(-0.08..0.08) * s);
            let slant = r.random_range(-0.1..0.1) * s;
            let top = 0.1 * s + shift.1;
            let bottom = 0.9 * s + shift.1;
            let segments: Vec<((f64, f64), (f64, f64))> = if digit == 0 {
                let x = 0.5 * s + shift.0;
                vec![((x + slant, top), (x - slant, bottom))]
            } else {
                let left = 0.2 * s + shift.0;
                let right = 0.8 * s + shift.0;
                vec![((left, top), (right, top)), ((right, top), (0.45 * s + shift.0 - slant, bottom))]
            };
            let ink = r.random_range(0.7..1.0);
            let pixels = (0..cfg.size * cfg.size)
                .map(|i| {
                    let p = ((i % cfg.size) as f64, (i / cfg.size) as f64);
                    let d = segments
                        .iter()
                        .map(|&(a, b)| segment_distance(p, a, b))
                        .fold(f64::INFINITY, f64::min);
                    let stroke = (1.2 - d).clamp(0.0, 1.0) * ink;
                    let bg = if cfg.noise > 0.0 { r.random_range(0.0..cfg.noise) } else { 0.0 };
                    (stroke + bg).clamp(0.0, 1.0)
                })
                .collect();
            ImageExample {
                height: cfg.size,
                width: cfg.size,
                pixels,
                digit,
                orientation: Orientation::Vertical,
            }
        })
        .collect()
}
