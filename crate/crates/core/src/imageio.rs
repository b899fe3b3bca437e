//! 8-bit grayscale PNG input/output.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::physics::ScalarField;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn to_unit(&self) -> Vec<f32> {
        self.data.iter().map(|&b| b as f32 / 255.0).collect()
    }
}

/// Round-half-up onto the 256 levels of `[0, 1]`.
#[inline]
pub fn quantize_value(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn quantize(img: &ScalarField) -> GrayImage {
    GrayImage {
        width: img.n_px(),
        height: img.n_px(),
        data: img.values.iter().map(|&v| quantize_value(v)).collect(),
    }
}

/// Encodes a non-interlaced 8-bit grayscale PNG.
pub fn encode_png(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer
            .write_image_data(&img.data)
            .expect("in-memory PNG data");
    }
    out
}

pub fn decode_png(bytes: &[u8], origin: &Path) -> Result<GrayImage> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| Error::format(origin, e))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(
            origin,
            format!("expected 8-bit grayscale, found {:?}/{:?}", info.color_type, info.bit_depth),
        ));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(origin, "image too large"))?;
    let mut buf = vec![0; size];
    reader.next_frame(&mut buf).map_err(|e| Error::format(origin, e))?;
    buf.truncate(width * height);
    Ok(GrayImage {
        width,
        height,
        data: buf,
    })
}

pub fn write_png(path: &Path, img: &GrayImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode_png(img)).map_err(|e| Error::io(path, e))
}

pub fn read_png(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes, path)
}

/// Quantizes `img` and writes it as a PNG of its own resolution.
pub fn quantize_save(img: &ScalarField, path: &Path) -> Result<()> {
    write_png(path, &quantize(img))
}
