//! In-memory RGB images and their PNG/PPM encodings.
//!
//! Linear values are mapped to 8 bits by plain clamping to `[0, 1]` and
//! rounding; no gamma curve is applied.

use std::path::Path;

use crate::error::{ensure, Error, Result};

/// Floating point RGB image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn filled(width: u32, height: u32, color: [f64; 3]) -> Self {
        Image {
            width,
            height,
            pixels: vec![color; (width * height) as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [f64; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn to_rgb8(&self) -> Rgb8Image {
        let data = self.pixels.iter().flat_map(|p| p.map(to_u8)).collect();
        Rgb8Image {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit RGB image, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Rgb8Image {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        ensure!(
            data.len() == (width * height * 3) as usize,
            Structure,
            "image buffer has {} bytes, expected {}",
            data.len(),
            width * height * 3
        );
        Ok(Rgb8Image {
            width,
            height,
            data,
        })
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn to_linear(&self) -> Image {
        let pixels = self
            .data
            .chunks_exact(3)
            .map(|p| {
                [
                    p[0] as f64 / 255.0,
                    p[1] as f64 / 255.0,
                    p[2] as f64 / 255.0,
                ]
            })
            .collect();
        Image {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Writes PNG or binary PPM depending on the extension (`.ppm` / `.png`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("ppm") => {
                let mut bytes = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
                bytes.extend_from_slice(&self.data);
                std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
            }
            Some("png") => {
                ::image::save_buffer_with_format(
                    path,
                    &self.data,
                    self.width,
                    self.height,
                    ::image::ExtendedColorType::Rgb8,
                    ::image::ImageFormat::Png,
                )?;
                Ok(())
            }
            _ => Err(Error::Format(format!(
                "unsupported image extension for {}",
                path.display()
            ))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "image not found"),
            ));
        }
        let img = ::image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        Rgb8Image::new(w, h, img.into_raw())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamping_conversion() {
        assert_eq!(to_u8(-0.2), 0);
        assert_eq!(to_u8(1.7), 255);
        assert_eq!(to_u8(0.5), 128);
    }

    #[test]
    fn png_and_ppm_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<u8> = (0..4 * 3 * 3).map(|i| (i * 7 % 256) as u8).collect();
        let img = Rgb8Image::new(4, 3, data).unwrap();
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            img.save(&p).unwrap();
            assert_eq!(Rgb8Image::load(&p).unwrap(), img);
        }
    }
}
