//! Grayscale raster storage and portable graymap (PGM) I/O.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with `f64` intensities (nominally 0..=255).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Bilinear sample at continuous pixel coordinates. `None` outside the
    /// pixel-center lattice.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = snap_to_range(x, max_x)?;
        let y = snap_to_range(y, max_y)?;
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    /// Bilinear sample treating the column axis as cyclic. `None` when the
    /// row is outside the image.
    pub fn bilinear_wrap_x(&self, x: f64, y: f64) -> Option<f64> {
        let y = snap_to_range(y, (self.height - 1) as f64)?;
        if !x.is_finite() {
            return None;
        }
        let w = self.width as f64;
        let xf = x.rem_euclid(w);
        let x0 = (xf.floor() as usize) % self.width;
        let x1 = (x0 + 1) % self.width;
        let fx = xf - xf.floor();
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let y1 = (y0 + 1).min(self.height - 1);
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    /// Copy of the `w`x`h` block whose top-left corner is `(x0, y0)`. Columns
    /// wrap around the image width when `wrap_x` is set.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize, wrap_x: bool) -> Result<Self> {
        if y0 + h > self.height || (!wrap_x && x0 + w > self.width) || w > self.width {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h} at ({x0},{y0}) exceeds {}x{} image",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(w, h, |x, y| {
            self.get((x0 + x) % self.width, y0 + y)
        }))
    }

    /// Intensities rounded and clamped to 8 bits.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::from_vec(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    /// Parses binary (`P5`) or ASCII (`P2`) 8-bit graymaps.
    pub fn decode_pgm(bytes: &[u8]) -> Result<Self> {
        let mut cursor = PnmCursor { bytes, pos: 0 };
        let magic = cursor.token()?;
        let binary = match magic.as_str() {
            "P5" => true,
            "P2" => false,
            other => return Err(Error::Image(format!("unsupported magic {other:?}"))),
        };
        let width = cursor.number()?;
        let height = cursor.number()?;
        let maxval = cursor.number()?;
        if width == 0 || height == 0 {
            return Err(Error::Image("zero-size image".into()));
        }
        if maxval == 0 || maxval > 255 {
            return Err(Error::Image(format!("unsupported maxval {maxval}")));
        }
        let scale = 255.0 / maxval as f64;
        let count = width * height;
        let data = if binary {
            // exactly one whitespace byte separates the header from the raster
            let start = cursor.pos + 1;
            let raster = bytes
                .get(start..start + count)
                .ok_or_else(|| Error::Image("truncated raster".into()))?;
            raster.iter().map(|&b| f64::from(b) * scale).collect()
        } else {
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let v = cursor.number()?;
                if v > maxval {
                    return Err(Error::Image(format!("sample {v} exceeds maxval")));
                }
                data.push(v as f64 * scale);
            }
            data
        };
        Self::from_vec(width, height, data)
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_u8());
        out
    }

    pub fn encode_pgm_ascii(&self) -> Vec<u8> {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.to_u8().chunks(self.width) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode_pgm(&fs::read(path)?)
    }

    /// Writes through a temporary file so that a failed write leaves no
    /// partial output behind.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.encode_pgm())
    }
}

/// Clamps coordinates that miss `[0, max]` by round-off only.
fn snap_to_range(c: f64, max: f64) -> Option<f64> {
    const EPS: f64 = 1e-9;
    if c >= 0.0 && c <= max {
        Some(c)
    } else if c >= -EPS && c <= max + EPS {
        Some(c.clamp(0.0, max))
    } else {
        None
    }
}

/// Writes through a sibling `.partial` file and a rename, so readers never
/// see a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    let result = fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct PnmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Image("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::Image(format!("expected a number, found {tok:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_and_binary_decode_agree() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 40 + y * 7) as f64);
        let a = GrayImage::decode_pgm(&img.encode_pgm()).unwrap();
        let b = GrayImage::decode_pgm(&img.encode_pgm_ascii()).unwrap();
        assert_eq!(a, img);
        assert_eq!(b, img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let src = b"P2\n# a comment\n2 1 # trailing\n255\n10 20\n";
        let img = GrayImage::decode_pgm(src).unwrap();
        assert_eq!(img.data(), &[10.0, 20.0]);
    }

    #[test]
    fn maxval_is_rescaled() {
        let img = GrayImage::decode_pgm(b"P2 1 1 15 15").unwrap();
        assert_eq!(img.get(0, 0), 255.0);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        assert!(GrayImage::decode_pgm(b"P5 4 4 255\n\x00\x01").is_err());
        assert!(GrayImage::decode_pgm(b"P6 1 1 255\n\x00\x00\x00").is_err());
    }

    #[test]
    fn bilinear_wraps_columns() {
        let img = GrayImage::from_fn(4, 2, |x, _| x as f64);
        assert_eq!(img.bilinear_wrap_x(3.5, 0.0), Some(1.5));
        assert_eq!(img.bilinear_wrap_x(-0.5, 1.0), Some(1.5));
        assert_eq!(img.bilinear_wrap_x(1.0, 1.5), None);
        assert_eq!(img.bilinear(3.5, 0.0), None);
        assert_eq!(img.bilinear(2.25, 1.0), Some(2.25));
    }

    #[test]
    fn crop_wraps_when_requested() {
        let img = GrayImage::from_fn(4, 2, |x, y| (x + 10 * y) as f64);
        let c = img.crop(3, 0, 2, 2, true).unwrap();
        assert_eq!(c.data(), &[3.0, 0.0, 13.0, 10.0]);
        assert!(img.crop(3, 0, 2, 2, false).is_err());
    }
}
