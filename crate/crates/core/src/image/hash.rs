use serde::{Deserialize, Serialize};

use super::ops::luma;
use super::RasterImage;

/// Outputs whose hash similarity is strictly above this are duplicates.
pub const DUPLICATE_SIMILARITY: f64 = 0.95;

const COLS: usize = 9;
const ROWS: usize = 8;

/// 64-bit difference hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerceptualHash(pub u64);

impl PerceptualHash {
    pub fn hamming(self, other: PerceptualHash) -> u32 {
        (self.0 ^ other.0).count_ones()
    }
}

impl std::fmt::Display for PerceptualHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Length of the overlap between pixel `i` and cell `c`, measured in units
/// of `1/cells` pixel: pixel `i` spans `[cells*i, cells*(i+1))`, cell `c`
/// spans `[c*side, (c+1)*side)`.
fn overlap(i: usize, c: usize, side: usize, cells: usize) -> u64 {
    let lo = (cells * i).max(c * side);
    let hi = (cells * (i + 1)).min((c + 1) * side);
    hi.saturating_sub(lo) as u64
}

/// dHash over a 9x8 area-averaged grayscale downsample: bit `8*row + col`
/// is set iff cell `(col, row)` is strictly brighter than `(col + 1, row)`.
///
/// Every cell covers the same area, so cells are compared by their exact
/// integer luminance sums rather than by floating-point means.
pub fn perceptual_hash(img: &RasterImage) -> PerceptualHash {
    let (w, h) = (img.width(), img.height());
    let mut sums = [[0u64; COLS]; ROWS];
    let lumas: Vec<u64> = img.pixels().chunks_exact(3).map(|p| u64::from(luma([p[0], p[1], p[2]]))).collect();

    // Only the (at most two) cells adjacent to each pixel can overlap it.
    for y in 0..h {
        let r_lo = ROWS * y / h;
        let r_hi = ((ROWS * (y + 1)).div_ceil(h)).min(ROWS);
        for x in 0..w {
            let c_lo = COLS * x / w;
            let c_hi = ((COLS * (x + 1)).div_ceil(w)).min(COLS);
            let l = lumas[y * w + x];
            for r in r_lo..r_hi {
                let oy = overlap(y, r, h, ROWS);
                if oy == 0 {
                    continue;
                }
                for c in c_lo..c_hi {
                    let ox = overlap(x, c, w, COLS);
                    sums[r][c] += ox * oy * l;
                }
            }
        }
    }

    let mut bits = 0u64;
    for (r, row) in sums.iter().enumerate() {
        for c in 0..COLS - 1 {
            if row[c] > row[c + 1] {
                bits |= 1 << (r * 8 + c);
            }
        }
    }
    PerceptualHash(bits)
}

/// `1 - hamming / 64`.
pub fn hash_similarity(a: PerceptualHash, b: PerceptualHash) -> f64 {
    1.0 - f64::from(a.hamming(b)) / 64.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_arithmetic() {
        let a = PerceptualHash(0xDEAD_BEEF_0123_4567);
        assert_eq!(hash_similarity(a, a), 1.0);
        assert_eq!(hash_similarity(a, PerceptualHash(!a.0)), 0.0);
        assert_eq!(hash_similarity(a, PerceptualHash(a.0 ^ 0b101)), 0.96875);
    }

    #[test]
    fn constant_image_hashes_to_zero() {
        for (w, h) in [(1, 1), (5, 3), (64, 64), (100, 37)] {
            assert_eq!(perceptual_hash(&RasterImage::filled(w, h, [90, 140, 200])), PerceptualHash(0));
        }
    }

    #[test]
    fn left_to_right_falling_gradient_sets_every_bit() {
        let img = RasterImage::from_fn(90, 80, |x, _| {
            let v = 255 - (x * 255 / 89) as u8;
            [v, v, v]
        });
        assert_eq!(perceptual_hash(&img), PerceptualHash(u64::MAX));
    }

    #[test]
    fn overlaps_partition_each_pixel() {
        for side in [1usize, 2, 7, 9, 10, 31] {
            for i in 0..side {
                let total: u64 = (0..COLS).map(|c| overlap(i, c, side, COLS)).sum();
                assert_eq!(total, COLS as u64);
            }
        }
    }
}
