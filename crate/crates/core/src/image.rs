//! Grayscale rasters and binary PGM (P5) encoding.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// An 8-bit grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Image::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Image::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Row `y`, columns `x0..x1`.
    #[inline]
    pub(crate) fn row_span(&self, y: usize, x0: usize, x1: usize) -> &[u8] {
        let start = y * self.width;
        &self.pixels[start + x0..start + x1]
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.pixels.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Decodes a binary PGM with maxval 255. `origin` is only used in diagnostics.
    pub fn from_pgm(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::MalformedPgm {
            path: origin.to_path_buf(),
            reason: reason.to_string(),
        };

        let mut pos = 0;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            // whitespace and comments
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while let Some(&b) = bytes.get(pos) {
                            pos += 1;
                            if b == b'\n' || b == b'\r' {
                                break;
                            }
                        }
                    }
                    _ => break,
                }
            }
            let start = pos;
            while let Some(b) = bytes.get(pos) {
                if b.is_ascii_whitespace() || *b == b'#' {
                    break;
                }
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            tokens.push(&bytes[start..pos]);
        }
        if tokens[0] != b"P5" {
            return Err(bad("expected magic number P5"));
        }
        let number = |tok: &[u8], what: &str| -> Result<usize> {
            std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| bad(&format!("invalid {what}")))
        };
        let width = number(tokens[1], "width")?;
        let height = number(tokens[2], "height")?;
        let maxval = number(tokens[3], "maxval")?;
        if maxval != 255 {
            return Err(bad(&format!("maxval {maxval} unsupported, expected 255")));
        }
        if width == 0 || height == 0 {
            return Err(bad("zero dimension"));
        }
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(bad("missing raster separator")),
        }
        let count = width
            .checked_mul(height)
            .ok_or_else(|| bad("dimensions overflow"))?;
        let raster = &bytes[pos..];
        if raster.len() < count {
            return Err(bad(&format!(
                "truncated raster: {} of {count} bytes",
                raster.len()
            )));
        }
        Image::new(width, height, raster[..count].to_vec())
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Image::from_pgm(&bytes, path)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let img = Image::from_fn(5, 3, |x, y| (x * 40 + y * 7) as u8).unwrap();
        let back = Image::from_pgm(&img.to_pgm(), Path::new("mem")).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn parses_comments_in_header() {
        let mut bytes = b"P5\n# made by hand\n2 2 # dims\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        let img = Image::from_pgm(&bytes, Path::new("mem")).unwrap();
        assert_eq!(img.pixels(), &[1, 2, 3, 4]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = Path::new("mem");
        assert!(Image::from_pgm(b"P2\n2 2\n255\n0 0 0 0", p).is_err());
        assert!(Image::from_pgm(b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0", p).is_err());
        assert!(Image::from_pgm(b"P5\n2 2\n255\n\0\0", p).is_err());
        assert!(Image::from_pgm(b"P5\n2", p).is_err());
        assert!(Image::from_pgm(b"", p).is_err());
        assert!(Image::from_pgm(b"P5\nx 2\n255\n\0\0", p).is_err());
    }

    #[test]
    fn new_checks_length() {
        assert!(Image::new(2, 2, vec![0; 3]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
    }
}
