//! Linear-light RGB images and the on-disk pixmap formats.
//!
//! Files hold 8-bit values encoded with a plain 1/2.2 gamma; in memory every
//! channel is a linear `f64`. Decoding goes through a 256-entry table so a
//! decode/encode/decode cycle is exact.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const GAMMA: f64 = 2.2;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major interleaved RGB.
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image { width, height, data: vec![0.0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Image { width, height, data }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.data.len() == other.data.len()
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Every channel clamped to `[0, 1]`; NaN becomes 0.
    pub fn clamped(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }).collect(),
        }
    }

    /// Round-trips every channel through the 8-bit file encoding.
    pub fn quantized(&self) -> Image {
        let lut = decode_table();
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| lut[encode_channel(v) as usize]).collect(),
        }
    }

    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| encode_channel(v)));
        out
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_ppm_bytes())?;
        Ok(())
    }

    pub fn read_ppm(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        Self::from_ppm_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_ppm_bytes(bytes: &[u8]) -> Result<Image> {
        let mut reader = BufReader::new(bytes);
        let mut tokens = Vec::new();
        let mut line = String::new();
        while tokens.len() < 4 {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::format("truncated PPM header"));
            }
            let content = line.split('#').next().unwrap_or("");
            tokens.extend(content.split_whitespace().map(str::to_owned));
        }
        if tokens[0] != "P6" || tokens.len() != 4 {
            return Err(Error::format("expected a binary P6 pixmap"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(format!("bad PPM field `{s}`")));
        let (width, height, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
        if maxval != 255 {
            return Err(Error::format(format!("unsupported PPM maxval {maxval}")));
        }
        let mut raw = vec![0u8; width * height * 3];
        reader
            .read_exact(&mut raw)
            .map_err(|_| Error::format("PPM pixel data truncated"))?;
        let lut = decode_table();
        Ok(Image { width, height, data: raw.iter().map(|&b| lut[b as usize]).collect() })
    }

    /// Raw little-endian `f32` dump, channel-planar (all R, then G, then B), no header.
    pub fn to_f32_planar(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 4);
        for ch in 0..3 {
            for p in 0..self.width * self.height {
                out.extend_from_slice(&(self.data[p * 3 + ch] as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_f32_planar(width: usize, height: usize, bytes: &[u8]) -> Result<Image> {
        let n = width * height;
        if bytes.len() != n * 3 * 4 {
            return Err(Error::format(format!("planar dump has {} bytes, expected {}", bytes.len(), n * 12)));
        }
        let mut img = Image::new(width, height);
        for ch in 0..3 {
            for p in 0..n {
                let o = (ch * n + p) * 4;
                let v = f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
                img.data[p * 3 + ch] = v as f64;
            }
        }
        Ok(img)
    }
}

fn encode_channel(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v.powf(1.0 / GAMMA) * 255.0).round() as u8
}

fn decode_table() -> &'static [f64; 256] {
    static TABLE: OnceLock<[f64; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|i| (i as f64 / 255.0).powf(GAMMA)))
}

/// Per-pixel integer map (e.g. Gaussian counts).
#[derive(Clone, Debug, PartialEq)]
pub struct CountMap {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u32>,
}

impl CountMap {
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Binary graymap; 16-bit big-endian samples when any count exceeds 255.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let max = self.max().clamp(1, 65535);
        let maxval = if max > 255 { 65535 } else { 255 };
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, maxval).into_bytes();
        for &c in &self.counts {
            if maxval == 255 {
                out.push(c as u8);
            } else {
                out.extend_from_slice(&(c.min(65535) as u16).to_be_bytes());
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.counts.chunks(self.width) {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_pgm_bytes())?;
        Ok(())
    }
}
