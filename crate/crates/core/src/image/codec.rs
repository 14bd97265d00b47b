use std::io::Cursor;

use png::{BitDepth, ColorType, Decoder, Encoder, Transformations};
use thiserror::Error;

use super::RasterImage;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed png: {0}")]
    MalformedPng(String),
    #[error("png encoding failed: {0}")]
    Encode(String),
}

/// Decodes any 8/16-bit PNG into RGB; alpha is composited over black.
pub fn load_png(bytes: &[u8]) -> Result<RasterImage, CodecError> {
    let malformed = |e: png::DecodingError| CodecError::MalformedPng(e.to_string());
    let mut decoder = Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(malformed)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| CodecError::MalformedPng("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(malformed)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.line_size * h];

    let mut rgb = Vec::with_capacity(w * h * 3);
    for line in data.chunks_exact(info.line_size) {
        match info.color_type {
            ColorType::Rgb => rgb.extend_from_slice(&line[..w * 3]),
            ColorType::Rgba => {
                for px in line[..w * 4].chunks_exact(4) {
                    let a = u32::from(px[3]);
                    rgb.extend(px[..3].iter().map(|&c| over_black(c, a)));
                }
            }
            ColorType::Grayscale => {
                for &g in &line[..w] {
                    rgb.extend_from_slice(&[g, g, g]);
                }
            }
            ColorType::GrayscaleAlpha => {
                for px in line[..w * 2].chunks_exact(2) {
                    let g = over_black(px[0], u32::from(px[1]));
                    rgb.extend_from_slice(&[g, g, g]);
                }
            }
            ColorType::Indexed => return Err(CodecError::MalformedPng("palette was not expanded".into())),
        }
    }
    RasterImage::new(w, h, rgb).map_err(|e| CodecError::MalformedPng(e.to_string()))
}

#[inline]
fn over_black(c: u8, alpha: u32) -> u8 {
    ((u32::from(c) * alpha + 127) / 255) as u8
}

pub fn save_png(img: &RasterImage) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    {
        let mut enc = Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(ColorType::Rgb);
        enc.set_depth(BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| CodecError::Encode(e.to_string()))?;
        writer.write_image_data(img.pixels()).map_err(|e| CodecError::Encode(e.to_string()))?;
        writer.finish().map_err(|e| CodecError::Encode(e.to_string()))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(w: u32, h: u32, color: ColorType, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut enc = Encoder::new(&mut out, w, h);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        let mut writer = enc.write_header().unwrap();
        writer.write_image_data(data).unwrap();
        writer.finish().unwrap();
        out
    }

    #[test]
    fn single_red_pixel() {
        let img = load_png(&encode(1, 1, ColorType::Rgb, &[255, 0, 0])).unwrap();
        assert_eq!(img, RasterImage::filled(1, 1, [255, 0, 0]));
    }

    #[test]
    fn alpha_is_composited_over_black() {
        let img = load_png(&encode(2, 1, ColorType::Rgba, &[255, 255, 255, 0, 200, 100, 50, 255])).unwrap();
        assert_eq!(img.get(0, 0), [0, 0, 0]);
        assert_eq!(img.get(1, 0), [200, 100, 50]);
        let half = load_png(&encode(1, 1, ColorType::Rgba, &[255, 0, 0, 128])).unwrap();
        assert_eq!(half.get(0, 0), [128, 0, 0]);
    }

    #[test]
    fn grayscale_is_replicated() {
        let img = load_png(&encode(2, 1, ColorType::Grayscale, &[7, 9])).unwrap();
        assert_eq!(img.pixels(), &[7, 7, 7, 9, 9, 9]);
    }

    #[test]
    fn truncated_stream_is_malformed() {
        let bytes = save_png(&RasterImage::filled(8, 8, [1, 2, 3])).unwrap();
        for cut in [0, 8, 20, bytes.len() - 13] {
            assert!(matches!(load_png(&bytes[..cut]), Err(CodecError::MalformedPng(_))), "cut at {cut}");
        }
    }
}
