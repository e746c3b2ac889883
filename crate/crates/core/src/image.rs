//! 8-bit grayscale raster and a minimal PGM (P5/P2) codec.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;

pub const WHITE: u8 = 255;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Format(format!(
                "pixel buffer has {} bytes, expected {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// A `width`×`height` image filled with `value`.
    ///
    /// # Panics
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
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

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Pixel at signed coordinates, white outside the image.
    #[inline]
    pub fn get_or_white(&self, x: i64, y: i64) -> u8 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            WHITE
        } else {
            self.get(x as usize, y as usize)
        }
    }

    /// Copies a `w`×`h` window whose top-left corner is `(x0, y0)`; parts of
    /// the window outside the image are white.
    pub fn window(&self, x0: i64, y0: i64, w: usize, h: usize) -> GrayImage {
        let mut out = GrayImage::filled(w, h, WHITE);
        for dy in 0..h {
            for dx in 0..w {
                out.set(dx, dy, self.get_or_white(x0 + dx as i64, y0 + dy as i64));
            }
        }
        out
    }

    /// Pastes `src` with its top-left corner at `(x0, y0)`, ignoring the parts
    /// that fall outside this image.
    pub fn paste(&mut self, src: &GrayImage, x0: i64, y0: i64) {
        for sy in 0..src.height {
            let y = y0 + sy as i64;
            if y < 0 || y >= self.height as i64 {
                continue;
            }
            for sx in 0..src.width {
                let x = x0 + sx as i64;
                if x < 0 || x >= self.width as i64 {
                    continue;
                }
                self.set(x as usize, y as usize, src.get(sx, sy));
            }
        }
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.pixels.iter().map(|&p| p as f32).collect()
    }

    /// Rounds and clamps a float buffer of matching size back to 8 bits.
    pub fn from_f32(width: usize, height: usize, data: &[f32]) -> Result<Self> {
        let pixels = data.iter().map(|&v| quantize(v)).collect();
        Self::new(width, height, pixels)
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        decode_pgm(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &encode_pgm(self))
    }
}

#[inline]
fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| (v / sum) as f32).collect()
}

/// Separable Gaussian blur, kernel radius ⌈3σ⌉, edges replicated.
pub(crate) fn gaussian_blur_f32(data: &[f32], width: usize, height: usize, sigma: f64) -> Vec<f32> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0f32; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut s = 0f32;
            for (j, kv) in k.iter().enumerate() {
                s += kv * data[y * width + clamp(x as i64 + j as i64 - r, width)];
            }
            tmp[y * width + x] = s;
        }
    }
    let mut out = vec![0f32; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut s = 0f32;
            for (j, kv) in k.iter().enumerate() {
                s += kv * tmp[clamp(y as i64 + j as i64 - r, height) * width + x];
            }
            out[y * width + x] = s;
        }
    }
    out
}

pub(crate) fn quantize(v: f32) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.clamp(0.0, 255.0).round() as u8
}

/// Binary (P5) PGM with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

struct HeaderReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() && self.data[self.pos] != b'#' {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(&self.data[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad number {:?} in PGM header", String::from_utf8_lossy(tok))))
    }
}

/// Decodes P5 (binary) or P2 (ASCII) PGM with maxval ≤ 255. Other maxvals are
/// rescaled to 0..=255.
pub fn decode_pgm(data: &[u8]) -> Result<GrayImage> {
    let mut r = HeaderReader { data, pos: 0 };
    let magic = r.token()?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::Format(format!(
                "unsupported magic {:?}, expected P5 or P2",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = r.number()?;
    let height = r.number()?;
    let maxval = r.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("invalid maxval {maxval}")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let scale = |v: usize| -> u8 {
        if maxval == 255 {
            v as u8
        } else {
            ((v.min(maxval) as f64) * 255.0 / maxval as f64).round() as u8
        }
    };
    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = r.pos + 1;
        let bytes_per = if maxval < 256 { 1 } else { 2 };
        let end = start + n * bytes_per;
        if data.len() < end {
            return Err(Error::Format(format!(
                "raster truncated: need {} bytes, have {}",
                n * bytes_per,
                data.len().saturating_sub(start)
            )));
        }
        let raster = &data[start..end];
        if bytes_per == 1 {
            raster.iter().map(|&b| scale(b as usize)).collect()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| scale(u16::from_be_bytes([c[0], c[1]]) as usize))
                .collect()
        }
    } else {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(scale(r.number()?));
        }
        v
    };
    GrayImage::new(width, height, pixels)
}
