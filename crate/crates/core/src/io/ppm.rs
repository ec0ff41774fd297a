//! Binary Netpbm writers (P5 grayscale, P6 RGB) and optional PNG.

use std::path::Path;

use super::write_file;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: rgb
                .iter()
                .copied()
                .cycle()
                .take(width * height * 3)
                .collect(),
        }
    }

    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

pub fn encode_p5(width: usize, height: usize, gray: &[u8]) -> Result<Vec<u8>> {
    if gray.len() != width * height {
        return Err(Error::shape("P5 pixels", width * height, gray.len()));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    Ok(out)
}

pub fn encode_p6(img: &RgbImage) -> Result<Vec<u8>> {
    if img.data.len() != img.width * img.height * 3 {
        return Err(Error::shape(
            "P6 pixels",
            img.width * img.height * 3,
            img.data.len(),
        ));
    }
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    Ok(out)
}

pub fn write_p5(path: &Path, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    write_file(path, &encode_p5(width, height, gray)?)
}

pub fn write_p6(path: &Path, img: &RgbImage) -> Result<()> {
    write_file(path, &encode_p6(img)?)
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    image::save_buffer(
        path,
        &img.data,
        img.width as u32,
        img.height as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| Error::io(path, std::io::Error::other(e)))
}
