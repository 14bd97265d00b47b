//! Raster images and everything that runs over them: the program executor,
//! the difference hash used for duplicate filtering, PNG I/O and the
//! content-addressed image store.

mod codec;
mod exec;
mod hash;
pub mod ops;
mod store;

pub use codec::{load_png, save_png, CodecError};
pub use exec::{execute, execute_all, execute_resolved, resolve_args, ExecAllError, ExecError, ExecErrorKind, ExecLimits};
pub use hash::{hash_similarity, perceptual_hash, PerceptualHash, DUPLICATE_SIMILARITY};
pub use store::{content_digest, ImageStore, StoreError};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("image sides must be at least 1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
}

pub type Rgb = [u8; 3];

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RasterImage({}x{})", self.width, self.height)
    }
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(ImageError::BufferLength {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self { width, height, pixels })
    }

    /// Panics on a zero side.
    pub fn filled(width: usize, height: usize, rgb: Rgb) -> Self {
        assert!(width > 0 && height > 0, "image sides must be positive");
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, pixels }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        assert!(width > 0 && height > 0, "image sides must be positive");
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, pixels }
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

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: Rgb) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn mean_color(&self) -> [f64; 3] {
        let mut sum = [0u64; 3];
        for px in self.pixels.chunks_exact(3) {
            for c in 0..3 {
                sum[c] += u64::from(px[c]);
            }
        }
        let n = (self.width * self.height) as f64;
        sum.map(|s| s as f64 / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_checks_shape() {
        assert!(RasterImage::new(2, 2, vec![0; 12]).is_ok());
        assert_eq!(
            RasterImage::new(2, 2, vec![0; 11]),
            Err(ImageError::BufferLength { expected: 12, actual: 11 })
        );
        assert_eq!(
            RasterImage::new(0, 2, vec![]),
            Err(ImageError::EmptyImage { width: 0, height: 2 })
        );
    }

    #[test]
    fn pixel_access() {
        let mut img = RasterImage::filled(3, 2, [1, 2, 3]);
        img.set(2, 1, [9, 8, 7]);
        assert_eq!(img.get(2, 1), [9, 8, 7]);
        assert_eq!(img.get(0, 0), [1, 2, 3]);
        assert_eq!(img.pixels().len(), 18);
    }
}
