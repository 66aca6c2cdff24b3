//! Binary PPM (P6) reading and writing, plus small image helpers used for
//! debug dumps, coverage maps, contact sheets and precision plots.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geom::Rgb;

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("not a P6 ppm file: {0}")]
    BadMagic(String),
    #[error("malformed ppm header: {0}")]
    BadHeader(String),
    #[error("ppm pixel payload truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
}

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// `height * width * 3` bytes, row-major, RGB interleaved.
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut img = Self::new(width, height);
        for p in img.pixels.chunks_exact_mut(3) {
            p[0] = color.0;
            p[1] = color.1;
            p[2] = color.2;
        }
        img
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        Rgb(self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        let i = (y * self.width + x) * 3;
        self.pixels[i] = c.0;
        self.pixels[i + 1] = c.1;
        self.pixels[i + 2] = c.2;
    }

    /// Copy `src` into this image with its top-left corner at `(x, y)`.
    pub fn blit(&mut self, src: &Image, x: usize, y: usize) {
        for sy in 0..src.height.min(self.height.saturating_sub(y)) {
            for sx in 0..src.width.min(self.width.saturating_sub(x)) {
                self.set(x + sx, y + sy, src.get(sx, sy));
            }
        }
    }
}

pub fn write_p6(path: &Path, img: &Image) -> Result<(), PpmError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P6\n{} {}\n255\n", img.width, img.height)?;
    f.write_all(&img.pixels)?;
    Ok(())
}

pub fn read_p6(path: &Path) -> Result<Image, PpmError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_p6(&bytes)
}

/// Parse a binary P6 payload. Comments (`#`) in the header are honored.
pub fn parse_p6(bytes: &[u8]) -> Result<Image, PpmError> {
    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String, PpmError> {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PpmError::BadHeader("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = next_token(bytes)?;
    if magic != "P6" {
        return Err(PpmError::BadMagic(magic));
    }
    let width: usize = next_token(bytes)?.parse().map_err(|_| PpmError::BadHeader("width".into()))?;
    let height: usize = next_token(bytes)?.parse().map_err(|_| PpmError::BadHeader("height".into()))?;
    let maxval: usize = next_token(bytes)?.parse().map_err(|_| PpmError::BadHeader("maxval".into()))?;
    if maxval != 255 {
        return Err(PpmError::BadHeader(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates header and payload
    pos += 1;
    let expected = width * height * 3;
    let got = bytes.len().saturating_sub(pos);
    if got < expected {
        return Err(PpmError::Truncated { expected, got });
    }
    Ok(Image { width, height, pixels: bytes[pos..pos + expected].to_vec() })
}

/// Render per-cell counts as a grayscale image (max count maps to white).
pub fn grayscale_from_counts(counts: &[u64], width: usize, height: usize) -> Image {
    assert_eq!(counts.len(), width * height);
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut img = Image::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let v = ((counts[y * width + x] as f64 / max).sqrt() * 255.0).round() as u8;
            img.set(x, y, Rgb(v, v, v));
        }
    }
    img
}

/// Lay out tiles left-to-right, top-to-bottom on a dark background.
pub fn contact_sheet(tiles: &[Image], columns: usize, gap: usize) -> Image {
    assert!(!tiles.is_empty() && columns > 0);
    let tw = tiles[0].width;
    let th = tiles[0].height;
    let rows = tiles.len().div_ceil(columns);
    let mut sheet = Image::filled(
        columns * tw + (columns + 1) * gap,
        rows * th + (rows + 1) * gap,
        Rgb(40, 40, 40),
    );
    for (i, tile) in tiles.iter().enumerate() {
        let cx = i % columns;
        let cy = i / columns;
        sheet.blit(tile, gap + cx * (tw + gap), gap + cy * (th + gap));
    }
    sheet
}

/// A very small line-plot renderer: one polyline per series, y in [0, 1].
pub fn line_plot(series: &[(Rgb, Vec<(f64, f64)>)], width: usize, height: usize) -> Image {
    let mut img = Image::filled(width, height, Rgb(255, 255, 255));
    let ml = 10; // margin
    let plot_w = width.saturating_sub(2 * ml).max(1);
    let plot_h = height.saturating_sub(2 * ml).max(1);
    // axes
    for x in ml..width - ml {
        img.set(x, height - ml, Rgb(0, 0, 0));
    }
    for y in ml..height - ml {
        img.set(ml, y, Rgb(0, 0, 0));
    }
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts) in series {
        for &(x, _) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
        }
    }
    if !xmin.is_finite() || xmax <= xmin {
        xmin = 0.0;
        xmax = 1.0;
    }
    let to_px = |x: f64, y: f64| -> (usize, usize) {
        let px = ml as f64 + (x - xmin) / (xmax - xmin) * plot_w as f64;
        let py = (height - ml) as f64 - y.clamp(0.0, 1.0) * plot_h as f64;
        (px.round().clamp(0.0, (width - 1) as f64) as usize,
         py.round().clamp(0.0, (height - 1) as f64) as usize)
    };
    for (color, pts) in series {
        let mut prev: Option<(usize, usize)> = None;
        for &(x, y) in pts {
            let p = to_px(x, y);
            if let Some(q) = prev {
                draw_line(&mut img, q, p, *color);
            }
            prev = Some(p);
        }
    }
    img
}

fn draw_line(img: &mut Image, a: (usize, usize), b: (usize, usize), c: Rgb) {
    let (mut x0, mut y0) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x0 >= 0 && y0 >= 0 && (x0 as usize) < img.width && (y0 as usize) < img.height {
            img.set(x0 as usize, y0 as usize, c);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p6_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ppm");
        let mut img = Image::new(5, 3);
        for (i, b) in img.pixels.iter_mut().enumerate() {
            *b = (i * 7 % 256) as u8;
        }
        write_p6(&path, &img).unwrap();
        let back = read_p6(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn p6_rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ppm");
        let img = Image::new(4, 4);
        write_p6(&path, &img).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_p6(&path), Err(PpmError::Truncated { .. })));
    }

    #[test]
    fn p6_header_comments_are_skipped() {
        let bytes = b"P6\n# comment\n2 1\n255\n\x01\x02\x03\x04\x05\x06";
        let img = parse_p6(bytes).unwrap();
        assert_eq!((img.width, img.height), (2, 1));
        assert_eq!(img.get(1, 0), Rgb(4, 5, 6));
    }
}
