//! The eleven image ops.
//!
//! Integer ops use exact integer arithmetic. Rotation by a non-right angle
//! and resize use bilinear sampling in `f64`, evaluated per pixel with a
//! fixed expression order so results are reproducible bit for bit.

use super::exec::ExecErrorKind;
use super::{RasterImage, Rgb};
use crate::lang::{Axis, Decimal};

const RED: Rgb = [255, 0, 0];
const BLACK: Rgb = [0, 0, 0];

/// Millage coordinates `[x0, y0, x1, y1]`, each in `0..=1000`.
pub type MilleBox = [i64; 4];

fn check_millage(b: &MilleBox, op: &str) -> Result<(), ExecErrorKind> {
    if b.iter().all(|v| (0..=1000).contains(v)) {
        Ok(())
    } else {
        Err(ExecErrorKind::Degenerate(format!("{op} coordinates must lie in 0..=1000, got {b:?}")))
    }
}

/// `floor(v * side / 1000)` for non-negative `v`.
fn from_millage(v: i64, side: usize) -> usize {
    (v as u64 * side as u64 / 1000) as usize
}

fn check_budget(width: usize, height: usize, max_pixels: usize) -> Result<(), ExecErrorKind> {
    match width.checked_mul(height) {
        Some(n) if n <= max_pixels => Ok(()),
        _ => Err(ExecErrorKind::PixelLimit {
            width,
            height,
            limit: max_pixels,
        }),
    }
}

pub fn rotate(img: &RasterImage, degrees: Decimal, max_pixels: usize) -> Result<RasterImage, ExecErrorKind> {
    let full_turn = 360 * Decimal::SCALE;
    let quarter = 90 * Decimal::SCALE;
    let turn = degrees.scaled().rem_euclid(full_turn);
    if turn % quarter == 0 {
        return Ok(match turn / quarter {
            0 => img.clone(),
            1 => rotate90(img),
            2 => rotate180(img),
            _ => rotate270(img),
        });
    }

    let (w, h) = (img.width() as f64, img.height() as f64);
    let theta = (turn as f64 / Decimal::SCALE as f64).to_radians();
    let (sin, cos) = theta.sin_cos();
    let out_w = ((w * cos).abs() + (h * sin).abs() - 1e-9).ceil().max(1.0) as usize;
    let out_h = ((w * sin).abs() + (h * cos).abs() - 1e-9).ceil().max(1.0) as usize;
    check_budget(out_w, out_h, max_pixels)?;

    let (half_ow, half_oh) = (out_w as f64 / 2.0, out_h as f64 / 2.0);
    let (half_w, half_h) = (w / 2.0, h / 2.0);
    let mut out = RasterImage::filled(out_w, out_h, BLACK);
    for y in 0..out_h {
        let dy = y as f64 + 0.5 - half_oh;
        for x in 0..out_w {
            let dx = x as f64 + 0.5 - half_ow;
            // Inverse of a counter-clockwise turn in y-down coordinates.
            let u = dx * cos - dy * sin;
            let v = dx * sin + dy * cos;
            let sx = half_w + u - 0.5;
            let sy = half_h + v - 0.5;
            if let Some(px) = sample_bilinear(img, sx, sy) {
                out.set(x, y, px);
            }
        }
    }
    Ok(out)
}

/// Bilinear sample at continuous pixel-center coordinates; `None` outside
/// the half-pixel border around the image.
fn sample_bilinear(img: &RasterImage, sx: f64, sy: f64) -> Option<Rgb> {
    let (w, h) = (img.width(), img.height());
    if sx < -0.5 || sy < -0.5 || sx > w as f64 - 0.5 || sy > h as f64 - 0.5 {
        return None;
    }
    let fx = sx.floor();
    let fy = sy.floor();
    let tx = sx - fx;
    let ty = sy - fy;
    let x0 = (fx.max(0.0) as usize).min(w - 1);
    let y0 = (fy.max(0.0) as usize).min(h - 1);
    let x1 = ((fx + 1.0).max(0.0) as usize).min(w - 1);
    let y1 = ((fy + 1.0).max(0.0) as usize).min(h - 1);
    Some(blend(img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1), tx, ty))
}

#[inline]
fn blend(p00: Rgb, p10: Rgb, p01: Rgb, p11: Rgb, tx: f64, ty: f64) -> Rgb {
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = f64::from(p00[c]) * (1.0 - tx) + f64::from(p10[c]) * tx;
        let bottom = f64::from(p01[c]) * (1.0 - tx) + f64::from(p11[c]) * tx;
        let v = top * (1.0 - ty) + bottom * ty;
        out[c] = v.round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn rotate90(img: &RasterImage) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    // source (x, y) lands on (y, w - 1 - x)
    RasterImage::from_fn(h, w, |x, y| img.get(w - 1 - y, x))
}

fn rotate180(img: &RasterImage) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    RasterImage::from_fn(w, h, |x, y| img.get(w - 1 - x, h - 1 - y))
}

fn rotate270(img: &RasterImage) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    RasterImage::from_fn(h, w, |x, y| img.get(y, h - 1 - x))
}

pub fn flip(img: &RasterImage, axis: Axis) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let row = w * 3;
    let src = img.pixels();
    let mut out = Vec::with_capacity(src.len());
    match axis {
        Axis::Horizontal => {
            for line in src.chunks_exact(row) {
                for px in line.chunks_exact(3).rev() {
                    out.extend_from_slice(px);
                }
            }
        }
        Axis::Vertical => {
            for line in src.chunks_exact(row).rev() {
                out.extend_from_slice(line);
            }
        }
    }
    RasterImage::new(w, h, out).expect("same shape as input")
}

pub fn crop(img: &RasterImage, bbox: MilleBox) -> Result<RasterImage, ExecErrorKind> {
    check_millage(&bbox, "crop")?;
    let (w, h) = (img.width(), img.height());
    let x0 = from_millage(bbox[0], w);
    let y0 = from_millage(bbox[1], h);
    let x1 = from_millage(bbox[2], w);
    let y1 = from_millage(bbox[3], h);
    if x1 <= x0 || y1 <= y0 {
        return Err(ExecErrorKind::CropDegenerate { x0, y0, x1, y1 });
    }
    let row = w * 3;
    let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0) * 3);
    for line in img.pixels().chunks_exact(row).skip(y0).take(y1 - y0) {
        out.extend_from_slice(&line[x0 * 3..x1 * 3]);
    }
    Ok(RasterImage::new(x1 - x0, y1 - y0, out).expect("crop shape"))
}

/// Output block `i` (row-major) copies input block `order[i]`.
pub fn jigsaw(img: &RasterImage, n: i64, order: &[i64]) -> Result<RasterImage, ExecErrorKind> {
    let (w, h) = (img.width(), img.height());
    if n < 1 || n as usize > w.min(h) {
        return Err(ExecErrorKind::Degenerate(format!("jigsaw grid {n} does not fit a {w}x{h} image")));
    }
    let n = n as usize;
    let cells = n * n;
    let mut seen = vec![false; cells];
    let valid = order.len() == cells
        && order.iter().all(|&o| {
            let ok = o >= 0 && (o as usize) < cells && !seen[o as usize];
            if ok {
                seen[o as usize] = true;
            }
            ok
        });
    if !valid {
        return Err(ExecErrorKind::JigsawNotPermutation {
            n,
            order: order.to_vec(),
        });
    }
    let (bw, bh) = (w / n, h / n);
    let (out_w, out_h) = (bw * n, bh * n);
    let mut out = RasterImage::filled(out_w, out_h, BLACK);
    let src = img.pixels();
    for (new_idx, &orig) in order.iter().enumerate() {
        let orig = orig as usize;
        let (nc, nr) = (new_idx % n, new_idx / n);
        let (oc, or) = (orig % n, orig / n);
        for dy in 0..bh {
            let s = ((or * bh + dy) * w + oc * bw) * 3;
            let d = ((nr * bh + dy) * out_w + nc * bw) * 3;
            out.pixels[d..d + bw * 3].copy_from_slice(&src[s..s + bw * 3]);
        }
    }
    Ok(out)
}

/// Red outline of `width` pixels drawn inward from the (inclusive) box edges.
pub fn draw_rect(img: &RasterImage, bbox: MilleBox, width: i64) -> Result<RasterImage, ExecErrorKind> {
    check_millage(&bbox, "draw_rect")?;
    if width < 1 {
        return Err(ExecErrorKind::Degenerate(format!("draw_rect line width must be >= 1, got {width}")));
    }
    let (w, h) = (img.width(), img.height());
    let x0 = from_millage(bbox[0], w).min(w - 1) as i64;
    let y0 = from_millage(bbox[1], h).min(h - 1) as i64;
    let x1 = from_millage(bbox[2], w).min(w - 1) as i64;
    let y1 = from_millage(bbox[3], h).min(h - 1) as i64;
    if x1 < x0 || y1 < y0 {
        return Err(ExecErrorKind::Degenerate(format!("draw_rect box is inverted: {bbox:?}")));
    }
    let mut out = img.clone();
    for y in y0..=y1 {
        let edge_row = y < y0 + width || y > y1 - width;
        for x in x0..=x1 {
            if edge_row || x < x0 + width || x > x1 - width {
                out.set(x as usize, y as usize, RED);
            }
        }
    }
    Ok(out)
}

/// Rounds `num / Decimal::SCALE` half away from zero.
#[inline]
fn div_scale_round(num: i64) -> i64 {
    let s = Decimal::SCALE;
    if num >= 0 {
        (num + s / 2) / s
    } else {
        -((-num + s / 2) / s)
    }
}

fn map_channels(img: &RasterImage, f: impl Fn(u8) -> u8) -> RasterImage {
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = f(v as u8);
    }
    let pixels = img.pixels().iter().map(|&v| lut[v as usize]).collect();
    RasterImage::new(img.width(), img.height(), pixels).expect("same shape")
}

pub fn brightness(img: &RasterImage, factor: Decimal) -> RasterImage {
    let k = factor.scaled();
    map_channels(img, |v| div_scale_round(i64::from(v) * k).clamp(0, 255) as u8)
}

pub fn contrast(img: &RasterImage, factor: Decimal) -> RasterImage {
    let k = factor.scaled();
    map_channels(img, |v| div_scale_round((i64::from(v) - 128) * k + 128 * Decimal::SCALE).clamp(0, 255) as u8)
}

#[inline]
pub fn luma(px: Rgb) -> u8 {
    ((299 * u32::from(px[0]) + 587 * u32::from(px[1]) + 114 * u32::from(px[2]) + 500) / 1000) as u8
}

pub fn grayscale(img: &RasterImage) -> RasterImage {
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for px in img.pixels().chunks_exact(3) {
        let l = luma([px[0], px[1], px[2]]);
        pixels.extend_from_slice(&[l, l, l]);
    }
    RasterImage::new(img.width(), img.height(), pixels).expect("same shape")
}

pub fn invert(img: &RasterImage) -> RasterImage {
    map_channels(img, |v| 255 - v)
}

/// Each `block`×`block` tile (partial at the right and bottom edges) becomes
/// its per-channel mean, rounded half up.
pub fn pixelate(img: &RasterImage, block: i64) -> Result<RasterImage, ExecErrorKind> {
    if block < 1 {
        return Err(ExecErrorKind::Degenerate(format!("pixelate block must be >= 1, got {block}")));
    }
    let (w, h) = (img.width(), img.height());
    let b = (block as usize).min(w.max(h));
    let mut out = img.clone();
    for by in (0..h).step_by(b) {
        let ye = (by + b).min(h);
        for bx in (0..w).step_by(b) {
            let xe = (bx + b).min(w);
            let mut sum = [0u64; 3];
            for y in by..ye {
                for x in bx..xe {
                    let px = img.get(x, y);
                    for c in 0..3 {
                        sum[c] += u64::from(px[c]);
                    }
                }
            }
            let count = ((ye - by) * (xe - bx)) as u64;
            let mean = sum.map(|s| ((s + count / 2) / count) as u8);
            for y in by..ye {
                for x in bx..xe {
                    out.set(x, y, mean);
                }
            }
        }
    }
    Ok(out)
}

pub fn resize(img: &RasterImage, width: i64, height: i64, max_pixels: usize) -> Result<RasterImage, ExecErrorKind> {
    if width < 1 || height < 1 {
        return Err(ExecErrorKind::Degenerate(format!("resize target must be positive, got {width}x{height}")));
    }
    let (ow, oh) = (width as usize, height as usize);
    check_budget(ow, oh, max_pixels)?;
    let (w, h) = (img.width(), img.height());
    let scale_x = w as f64 / ow as f64;
    let scale_y = h as f64 / oh as f64;
    let xs: Vec<(usize, usize, f64)> = (0..ow).map(|x| resize_tap(x, scale_x, w)).collect();
    let mut out = RasterImage::filled(ow, oh, BLACK);
    for y in 0..oh {
        let (y0, y1, ty) = resize_tap(y, scale_y, h);
        for (x, &(x0, x1, tx)) in xs.iter().enumerate() {
            out.set(x, y, blend(img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1), tx, ty));
        }
    }
    Ok(out)
}

/// Source neighbours and weight for output coordinate `i` (pixel centers aligned).
#[inline]
fn resize_tap(i: usize, scale: f64, side: usize) -> (usize, usize, f64) {
    let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f64);
    let f = s.floor();
    let i0 = f as usize;
    let i1 = (i0 + 1).min(side - 1);
    (i0, i1, s - f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_one() -> RasterImage {
        RasterImage::new(2, 1, vec![10, 20, 30, 40, 50, 60]).unwrap()
    }

    #[test]
    fn rotate_ninety_moves_right_pixel_to_top() {
        let out = rotate(&two_by_one(), Decimal::from_int(90), usize::MAX).unwrap();
        assert_eq!((out.width(), out.height()), (1, 2));
        assert_eq!(out.get(0, 0), [40, 50, 60]);
        assert_eq!(out.get(0, 1), [10, 20, 30]);
    }

    #[test]
    fn right_angle_rotations_agree_with_negative_angles() {
        let img = RasterImage::from_fn(5, 3, |x, y| [x as u8, y as u8, (x * y) as u8]);
        let a = rotate(&img, Decimal::from_int(-90), usize::MAX).unwrap();
        let b = rotate(&img, Decimal::from_int(270), usize::MAX).unwrap();
        assert_eq!(a, b);
        assert_eq!(rotate(&img, Decimal::from_int(720), usize::MAX).unwrap(), img);
    }

    #[test]
    fn general_rotation_expands_canvas() {
        let img = RasterImage::filled(40, 20, [200, 200, 200]);
        let out = rotate(&img, Decimal::from_int(45), usize::MAX).unwrap();
        // (40 + 20) / sqrt(2) = 42.43 -> 43
        assert_eq!((out.width(), out.height()), (43, 43));
        assert_eq!(out.get(0, 0), BLACK);
        assert_eq!(out.get(21, 21), [200, 200, 200]);
    }

    #[test]
    fn brightness_saturates() {
        let img = RasterImage::filled(4, 4, [100, 100, 100]);
        let out = brightness(&img, Decimal::from_int(3));
        assert_eq!(out, RasterImage::filled(4, 4, [255, 255, 255]));
    }

    #[test]
    fn contrast_rounds_the_shifted_value() {
        let img = RasterImage::new(1, 1, vec![127, 129, 0]).unwrap();
        let out = contrast(&img, Decimal(5_000));
        // 127.5 -> 128, 128.5 -> 129, 64
        assert_eq!(out.get(0, 0), [128, 129, 64]);
    }

    #[test]
    fn crop_uses_floor_millage() {
        let img = RasterImage::from_fn(10, 10, |x, y| [x as u8, y as u8, 0]);
        let out = crop(&img, [150, 0, 1000, 500]).unwrap();
        assert_eq!((out.width(), out.height()), (9, 5));
        assert_eq!(out.get(0, 0), [1, 0, 0]);
        assert!(matches!(crop(&img, [500, 0, 540, 500]), Err(ExecErrorKind::CropDegenerate { .. })));
        assert!(matches!(crop(&img, [0, 0, 1001, 500]), Err(ExecErrorKind::Degenerate(_))));
    }

    #[test]
    fn jigsaw_identity_and_validation() {
        let img = RasterImage::from_fn(6, 4, |x, y| [x as u8, y as u8, 7]);
        assert_eq!(jigsaw(&img, 2, &[0, 1, 2, 3]).unwrap(), img);
        assert!(matches!(jigsaw(&img, 2, &[0, 1, 1, 3]), Err(ExecErrorKind::JigsawNotPermutation { .. })));
        assert!(matches!(jigsaw(&img, 2, &[0, 1, 2]), Err(ExecErrorKind::JigsawNotPermutation { .. })));
        assert!(matches!(jigsaw(&img, 5, &[0; 25]), Err(ExecErrorKind::Degenerate(_))));
        // odd sides are truncated
        let odd = RasterImage::filled(5, 5, [1, 1, 1]);
        let out = jigsaw(&odd, 2, &[3, 2, 1, 0]).unwrap();
        assert_eq!((out.width(), out.height()), (4, 4));
    }

    #[test]
    fn draw_rect_outline() {
        let img = RasterImage::filled(10, 10, [0, 0, 255]);
        let out = draw_rect(&img, [0, 0, 500, 500], 1).unwrap();
        assert_eq!(out.get(0, 0), RED);
        assert_eq!(out.get(5, 5), RED);
        assert_eq!(out.get(2, 2), [0, 0, 255]);
        assert_eq!(out.get(6, 6), [0, 0, 255]);
    }

    #[test]
    fn pixelate_partial_edges() {
        let img = RasterImage::new(3, 1, vec![0, 0, 0, 10, 10, 10, 255, 255, 255]).unwrap();
        let out = pixelate(&img, 2).unwrap();
        assert_eq!(out.get(0, 0), [5, 5, 5]);
        assert_eq!(out.get(1, 0), [5, 5, 5]);
        assert_eq!(out.get(2, 0), [255, 255, 255]);
    }

    #[test]
    fn resize_identity_and_budget() {
        let img = RasterImage::from_fn(7, 5, |x, y| [x as u8 * 30, y as u8 * 40, 3]);
        assert_eq!(resize(&img, 7, 5, usize::MAX).unwrap(), img);
        assert!(matches!(resize(&img, 100, 100, 5000), Err(ExecErrorKind::PixelLimit { .. })));
    }

    #[test]
    fn grayscale_luma() {
        let img = RasterImage::new(1, 1, vec![255, 0, 0]).unwrap();
        assert_eq!(grayscale(&img).get(0, 0), [76, 76, 76]);
    }
}
