//! RGB float images and their PFM/PPM encodings.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::math::Rgb;

/// Row-major image, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed PFM header: {0}")]
    Header(String),
    #[error("big-endian PFM is not supported")]
    BigEndian,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, Rgb::ZERO)
    }

    pub fn filled(width: usize, height: usize, value: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: Rgb) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Mean over pixels and channels.
    pub fn mean(&self) -> f64 {
        if self.pixels.is_empty() {
            return 0.0;
        }
        self.pixels.iter().map(|p| p.x + p.y + p.z).sum::<f64>() / (3 * self.pixels.len()) as f64
    }

    /// Portable float map: `PF`, dimensions, `-1.0` (little endian), then
    /// rows bottom to top as 32-bit floats.
    pub fn write_pfm<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "PF\n{} {}\n-1.0\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.width * 12);
        for y in (0..self.height).rev() {
            buf.clear();
            for p in &self.pixels[y * self.width..(y + 1) * self.width] {
                for c in p.to_array() {
                    buf.extend_from_slice(&(c as f32).to_le_bytes());
                }
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_pfm<R: BufRead>(input: &mut R) -> Result<Self, ImageError> {
        let mut line = String::new();
        let mut next = |input: &mut R| -> Result<String, ImageError> {
            line.clear();
            input.read_line(&mut line)?;
            Ok(line.trim().to_owned())
        };
        if next(input)? != "PF" {
            return Err(ImageError::Header("expected PF".into()));
        }
        let dims = next(input)?;
        let mut it = dims.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(width)), Some(Ok(height)), None) = (it.next(), it.next(), it.next()) else {
            return Err(ImageError::Header(dims));
        };
        let scale = next(input)?;
        match scale.parse::<f64>() {
            Ok(s) if s < 0.0 => {}
            Ok(_) => return Err(ImageError::BigEndian),
            Err(_) => return Err(ImageError::Header(scale)),
        }
        let mut raw = vec![0u8; width * height * 12];
        input.read_exact(&mut raw)?;
        let mut img = Image::new(width, height);
        for (i, px) in raw.chunks_exact(12).enumerate() {
            let c = |k: usize| f32::from_le_bytes(px[4 * k..4 * k + 4].try_into().unwrap()) as f64;
            let (x, row) = (i % width, i / width);
            img.set(x, height - 1 - row, Rgb::new(c(0), c(1), c(2)));
        }
        Ok(img)
    }

    /// Binary PPM with 8-bit channels and 1/2.2 gamma.
    pub fn write_ppm<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .flat_map(|p| p.to_array())
            .map(|c| {
                let v = c.max(0.0).min(1.0).powf(1.0 / 2.2);
                (v * 255.0).round() as u8
            })
            .collect();
        out.write_all(&bytes)
    }
}
