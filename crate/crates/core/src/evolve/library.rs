//! Image library: a directory of PNGs, or the built-in synthetic set.

use std::fs;
use std::path::Path;

use rand::Rng;

use super::EvolveError;
use crate::image::{load_png, save_png, RasterImage};
use crate::seed::{derive, rng_from, StreamRng};

pub const BUILTIN_LIBRARY_SIZE: usize = 32;
const BUILTIN_SEED: u64 = 0x4C49_4252_4152_5921;

fn color(rng: &mut StreamRng) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn blend(a: [u8; 3], b: [u8; 3], t_num: usize, t_den: usize) -> [u8; 3] {
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = ((a[c] as usize * (t_den - t_num) + b[c] as usize * t_num) / t_den) as u8;
    }
    out
}

enum Shape {
    Disc { cx: i64, cy: i64, r: i64 },
    Rect { x0: i64, y0: i64, x1: i64, y1: i64 },
    Triangle { x: i64, y: i64, s: i64 },
    Stripes { y0: i64, y1: i64, period: i64 },
}

impl Shape {
    fn covers(&self, x: i64, y: i64) -> bool {
        match *self {
            Shape::Disc { cx, cy, r } => (x - cx).pow(2) + (y - cy).pow(2) <= r * r,
            Shape::Rect { x0, y0, x1, y1 } => (x0..x1).contains(&x) && (y0..y1).contains(&y),
            // right triangle with the right angle at the top-left corner
            Shape::Triangle { x: tx, y: ty, s } => x >= tx && y >= ty && (x - tx) + (y - ty) < s,
            Shape::Stripes { y0, y1, period } => (y0..y1).contains(&y) && (x / period) % 2 == 0,
        }
    }
}

/// One synthetic picture: a two-colour gradient with a few off-centre
/// shapes, so that flips and rotations visibly change it.
pub fn synthetic_image(seed: u64) -> RasterImage {
    let mut rng = rng_from(seed);
    let w = rng.random_range(256..=320usize);
    let h = rng.random_range(256..=320usize);
    let (c0, c1) = (color(&mut rng), color(&mut rng));
    let diagonal = rng.random_bool(0.5);
    let count = rng.random_range(3..=5);
    let mut shapes = Vec::new();
    for k in 0..count {
        let (wi, hi) = (w as i64, h as i64);
        let shape = match (k + rng.random_range(0..4)) % 4 {
            0 => Shape::Disc {
                cx: rng.random_range(wi / 8..wi / 2),
                cy: rng.random_range(hi / 8..hi / 2),
                r: rng.random_range(20..wi / 5),
            },
            1 => {
                let x0 = rng.random_range(0..wi * 2 / 3);
                let y0 = rng.random_range(hi / 3..hi - 40);
                Shape::Rect {
                    x0,
                    y0,
                    x1: x0 + rng.random_range(30..wi / 3),
                    y1: y0 + rng.random_range(20..hi / 4),
                }
            }
            2 => Shape::Triangle {
                x: rng.random_range(wi / 2..wi - 60),
                y: rng.random_range(0..hi / 2),
                s: rng.random_range(50..wi / 3),
            },
            _ => {
                let y0 = rng.random_range(hi / 2..hi - 30);
                Shape::Stripes {
                    y0,
                    y1: y0 + rng.random_range(16..40),
                    period: rng.random_range(6..20),
                }
            }
        };
        shapes.push((shape, color(&mut rng)));
    }
    RasterImage::from_fn(w, h, |x, y| {
        let (xi, yi) = (x as i64, y as i64);
        if let Some((_, c)) = shapes.iter().rev().find(|(s, _)| s.covers(xi, yi)) {
            return *c;
        }
        if diagonal {
            blend(c0, c1, x + y, w + h - 2)
        } else {
            blend(c0, c1, y, h - 1)
        }
    })
}

/// The deterministic built-in library.
pub fn builtin_library() -> Vec<RasterImage> {
    (0..BUILTIN_LIBRARY_SIZE).map(|i| synthetic_image(derive(BUILTIN_SEED, &format!("image{i}")))).collect()
}

/// Writes the built-in library as `img_00.png`.. into `dir`.
pub fn write_builtin_library(dir: &Path) -> Result<(), EvolveError> {
    fs::create_dir_all(dir).map_err(|e| EvolveError::io(dir, e))?;
    for (i, img) in builtin_library().iter().enumerate() {
        let path = dir.join(format!("img_{i:02}.png"));
        let bytes = save_png(img).map_err(|e| EvolveError::Library(e.to_string()))?;
        fs::write(&path, bytes).map_err(|e| EvolveError::io(&path, e))?;
    }
    Ok(())
}

/// Every `*.png` in `dir`, in file-name order.
pub fn load_library(dir: &Path) -> Result<Vec<RasterImage>, EvolveError> {
    let unreadable = |m: String| EvolveError::Library(format!("{}: {m}", dir.display()));
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| unreadable(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(unreadable("no png files".into()));
    }
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| unreadable(e.to_string()))?;
            load_png(&bytes).map_err(|e| unreadable(format!("{}: {e}", p.display())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::perceptual_hash;

    #[test]
    fn builtin_library_is_deterministic_and_varied() {
        let a = builtin_library();
        assert_eq!(a.len(), 32);
        assert_eq!(a, builtin_library());
        let hashes: std::collections::BTreeSet<u64> = a.iter().map(|i| perceptual_hash(i).0).collect();
        assert_eq!(hashes.len(), 32);
        assert!(a.iter().all(|i| (256..=320).contains(&i.width()) && (256..=320).contains(&i.height())));
    }

    #[test]
    fn shipped_files_match_the_generator() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/library");
        let loaded = load_library(&dir).unwrap();
        assert_eq!(loaded, builtin_library());
    }

    #[test]
    fn empty_directory_is_an_error() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(load_library(d.path()), Err(EvolveError::Library(_))));
    }
}
