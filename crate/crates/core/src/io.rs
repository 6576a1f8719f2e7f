//! Image files: binary PGM (P5, 8 or 16 bit) read and write, grayscale PNG
//! read.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Loads a grayscale image normalized to `[0, 1]`. PGM is recognized by its
/// `P5` magic, PNG by its signature.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else {
        Err(Error::Decode {
            offset: 0,
            message: "unknown format (expected P5 PGM or PNG)".into(),
        })
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
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

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Decode {
                offset: start,
                message: format!("expected {what}"),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Decode {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Decode {
            offset: h.pos,
            message: "zero image dimension".into(),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Decode {
            offset: h.pos,
            message: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
        return Err(Error::Decode {
            offset: h.pos,
            message: "missing whitespace after maxval".into(),
        });
    }
    let data_start = h.pos + 1;
    let depth = if maxval < 256 { 1 } else { 2 };
    let needed = width * height * depth;
    let available = bytes.len() - data_start;
    if available < needed {
        return Err(Error::Decode {
            offset: bytes.len(),
            message: format!("truncated raster: {available} of {needed} bytes"),
        });
    }
    let raster = &bytes[data_start..data_start + needed];
    let maxval_f = maxval as f64;
    let mut data = Vec::with_capacity(width * height);
    for (i, chunk) in raster.chunks_exact(depth).enumerate() {
        let v = if depth == 1 {
            chunk[0] as usize
        } else {
            (chunk[0] as usize) << 8 | chunk[1] as usize
        };
        if v > maxval {
            return Err(Error::Decode {
                offset: data_start + i * depth,
                message: format!("sample {v} exceeds maxval {maxval}"),
            });
        }
        data.push(v as f64 / maxval_f);
    }
    GrayImage::new(width, height, data)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    use image::{ColorType, ImageFormat};
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        Error::Decode {
            offset: 0,
            message: format!("png: {e}"),
        }
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img.color() {
        ColorType::L8 => img
            .into_luma8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        ColorType::L16 => img
            .into_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        other => {
            return Err(Error::Unsupported(format!(
                "png color type {other:?}, only grayscale is accepted"
            )))
        }
    };
    GrayImage::new(w, h, data)
}

/// Sample depth of a written PGM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn maxval(&self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

/// Encodes as binary PGM, rounding each intensity to the nearest level.
pub fn encode_pgm(image: &GrayImage, depth: BitDepth) -> Vec<u8> {
    let maxval = depth.maxval();
    let mut out = format!("P5\n{} {}\n{maxval}\n", image.width(), image.height()).into_bytes();
    for &v in image.data() {
        let q = (v * maxval as f64).round() as u32;
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

pub fn save_pgm(image: &GrayImage, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pgm(image, depth))?;
    Ok(())
}

/// The image as it reads back after a round trip at `depth`.
pub fn quantize(image: &GrayImage, depth: BitDepth) -> GrayImage {
    let m = depth.maxval() as f64;
    GrayImage::new(
        image.width(),
        image.height(),
        image.data().iter().map(|v| (v * m).round() / m).collect(),
    )
    .expect("quantized values stay in range")
}
