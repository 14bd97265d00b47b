//! Each op against a naive per-pixel reference on random 16x16 images.

use evoforge::image::ops;
use evoforge::image::RasterImage;
use evoforge::lang::{Axis, Decimal};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: usize = 100;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RasterImage {
    let px: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
    RasterImage::new(w, h, px).unwrap()
}

fn blank(w: usize, h: usize) -> Vec<Vec<[u8; 3]>> {
    vec![vec![[0; 3]; w]; h]
}

fn collect(grid: Vec<Vec<[u8; 3]>>) -> RasterImage {
    let (w, h) = (grid[0].len(), grid.len());
    RasterImage::from_fn(w, h, |x, y| grid[y][x])
}

fn cases(seed: u64, mut check: impl FnMut(&mut ChaCha8Rng, RasterImage)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CASES {
        let img = random_image(&mut rng, 16, 16);
        check(&mut rng, img);
    }
}

fn mille(rng: &mut ChaCha8Rng) -> [i64; 4] {
    let (a, b) = (rng.random_range(0..=1000), rng.random_range(0..=1000));
    let (c, d) = (rng.random_range(0..=1000), rng.random_range(0..=1000));
    [a.min(b), c.min(d), a.max(b), c.max(d)]
}

fn lerp_sample(img: &RasterImage, sx: f64, sy: f64) -> [u8; 3] {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (fx, fy) = (sx.floor(), sy.floor());
    let (tx, ty) = (sx - fx, sy - fy);
    let at = |x: f64, y: f64| img.get((x as i64).clamp(0, w - 1) as usize, (y as i64).clamp(0, h - 1) as usize);
    let (a, b, c, d) = (at(fx, fy), at(fx + 1.0, fy), at(fx, fy + 1.0), at(fx + 1.0, fy + 1.0));
    let mut out = [0; 3];
    for k in 0..3 {
        let top = a[k] as f64 * (1.0 - tx) + b[k] as f64 * tx;
        let bot = c[k] as f64 * (1.0 - tx) + d[k] as f64 * tx;
        out[k] = (top * (1.0 - ty) + bot * ty).round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn rotate_ref(img: &RasterImage, deg: Decimal) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let quarter_turns = deg.0.rem_euclid(360 * Decimal::SCALE);
    if quarter_turns % (90 * Decimal::SCALE) == 0 {
        // forward scatter: one CCW quarter turn sends (x, y) to (y, w-1-x)
        let mut cur = img.clone();
        for _ in 0..quarter_turns / (90 * Decimal::SCALE) {
            let (cw, ch) = (cur.width(), cur.height());
            let mut g = blank(ch, cw);
            for y in 0..ch {
                for x in 0..cw {
                    g[cw - 1 - x][y] = cur.get(x, y);
                }
            }
            cur = collect(g);
        }
        return cur;
    }
    let th = (quarter_turns as f64 / Decimal::SCALE as f64).to_radians();
    let (s, c) = th.sin_cos();
    let (wf, hf) = (w as f64, h as f64);
    let ow = ((wf * c).abs() + (hf * s).abs() - 1e-9).ceil().max(1.0) as usize;
    let oh = ((wf * s).abs() + (hf * c).abs() - 1e-9).ceil().max(1.0) as usize;
    let mut g = blank(ow, oh);
    for (y, row) in g.iter_mut().enumerate() {
        for (x, px) in row.iter_mut().enumerate() {
            let dx = x as f64 + 0.5 - ow as f64 / 2.0;
            let dy = y as f64 + 0.5 - oh as f64 / 2.0;
            let sx = wf / 2.0 + (dx * c - dy * s) - 0.5;
            let sy = hf / 2.0 + (dx * s + dy * c) - 0.5;
            let inside = sx >= -0.5 && sy >= -0.5 && sx <= wf - 0.5 && sy <= hf - 0.5;
            if inside {
                *px = lerp_sample(img, sx, sy);
            }
        }
    }
    collect(g)
}

pub fn rotate_matches_reference() {
    cases(1, |rng, img| {
        let deg = if rng.random_bool(0.3) {
            Decimal(rng.random_range(-8..=8) * 90 * Decimal::SCALE)
        } else {
            Decimal(rng.random_range(-3_600_000..=3_600_000))
        };
        assert_eq!(ops::rotate(&img, deg, usize::MAX).unwrap(), rotate_ref(&img, deg), "angle {deg:?}");
    });
}

pub fn flip_matches_reference() {
    cases(2, |rng, img| {
        let horizontal = rng.random_bool(0.5);
        let mut g = blank(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                let (tx, ty) = if horizontal { (15 - x, y) } else { (x, 15 - y) };
                g[ty][tx] = img.get(x, y);
            }
        }
        let axis = if horizontal { Axis::Horizontal } else { Axis::Vertical };
        assert_eq!(ops::flip(&img, axis), collect(g));
    });
}

pub fn crop_matches_reference() {
    cases(3, |rng, img| {
        let b = mille(rng);
        let (x0, y0, x1, y1) = ((b[0] * 16 / 1000) as usize, (b[1] * 16 / 1000) as usize, (b[2] * 16 / 1000) as usize, (b[3] * 16 / 1000) as usize);
        match ops::crop(&img, b) {
            Ok(out) => {
                assert!(x1 > x0 && y1 > y0);
                assert_eq!(out, RasterImage::from_fn(x1 - x0, y1 - y0, |x, y| img.get(x0 + x, y0 + y)));
            }
            Err(_) => assert!(x1 <= x0 || y1 <= y0),
        }
    });
}

pub fn jigsaw_matches_reference() {
    cases(4, |rng, img| {
        let n: usize = rng.random_range(1..=4);
        let mut order: Vec<i64> = (0..(n * n) as i64).collect();
        order.shuffle(rng);
        let (bw, bh) = (16 / n, 16 / n);
        let mut g = blank(bw * n, bh * n);
        // scatter each source pixel to wherever its block is placed
        for y in 0..bh * n {
            for x in 0..bw * n {
                let src_block = (y / bh) * n + x / bw;
                let dst_block = order.iter().position(|&o| o as usize == src_block).unwrap();
                g[(dst_block / n) * bh + y % bh][(dst_block % n) * bw + x % bw] = img.get(x, y);
            }
        }
        assert_eq!(ops::jigsaw(&img, n as i64, &order).unwrap(), collect(g));
    });
}

pub fn draw_rect_matches_reference() {
    cases(5, |rng, img| {
        let b = mille(rng);
        let width = rng.random_range(1..=4);
        let px = |v: i64| ((v * 16 / 1000) as usize).min(15) as i64;
        let (x0, y0, x1, y1) = (px(b[0]), px(b[1]), px(b[2]), px(b[3]));
        let expected = RasterImage::from_fn(16, 16, |x, y| {
            let (x, y) = (x as i64, y as i64);
            let inside = (x0..=x1).contains(&x) && (y0..=y1).contains(&y);
            let edge_dist = (x - x0).min(x1 - x).min(y - y0).min(y1 - y);
            if inside && edge_dist < width {
                [255, 0, 0]
            } else {
                img.get(x as usize, y as usize)
            }
        });
        assert_eq!(ops::draw_rect(&img, b, width).unwrap(), expected);
    });
}

fn per_channel(img: &RasterImage, f: impl Fn(u8) -> u8) -> RasterImage {
    RasterImage::from_fn(img.width(), img.height(), |x, y| img.get(x, y).map(&f))
}

pub fn brightness_matches_reference() {
    cases(6, |rng, img| {
        let k: i64 = rng.random_range(0..=30_000);
        // v*k is an exact integer and one correctly rounded division keeps ties exact
        let expected = per_channel(&img, |v| ((v as i64 * k) as f64 / 1e4).round().clamp(0.0, 255.0) as u8);
        assert_eq!(ops::brightness(&img, Decimal(k)), expected, "factor {k}");
    });
}

pub fn contrast_matches_reference() {
    cases(7, |rng, img| {
        let k: i64 = rng.random_range(0..=30_000);
        // exact rational: ((v - 128) k + 128e4) / 1e4, rounded half away from zero
        let expected = per_channel(&img, |v| {
            let num = (v as i64 - 128) * k + 1_280_000;
            let r = if num >= 0 { (2 * num + 10_000) / 20_000 } else { -((-2 * num + 10_000) / 20_000) };
            r.clamp(0, 255) as u8
        });
        assert_eq!(ops::contrast(&img, Decimal(k)), expected, "factor {k}");
    });
}

pub fn grayscale_matches_reference() {
    cases(8, |_, img| {
        let expected = RasterImage::from_fn(16, 16, |x, y| {
            let [r, g, b] = img.get(x, y).map(u64::from);
            let l = ((299 * r + 587 * g + 114 * b) * 2 + 1000) / 2000;
            [l as u8; 3]
        });
        assert_eq!(ops::grayscale(&img), expected);
    });
}

pub fn invert_matches_reference() {
    cases(9, |_, img| {
        assert_eq!(ops::invert(&img), per_channel(&img, |v| 255 - v));
    });
}

pub fn pixelate_matches_reference() {
    cases(10, |rng, img| {
        let b: usize = rng.random_range(1..=20);
        let expected = RasterImage::from_fn(16, 16, |x, y| {
            let (bx, by) = (x / b * b, y / b * b);
            let cells: Vec<[u8; 3]> = (by..(by + b).min(16)).flat_map(|yy| (bx..(bx + b).min(16)).map(move |xx| (xx, yy))).map(|(xx, yy)| img.get(xx, yy)).collect();
            let n = cells.len() as u64;
            let mut out = [0u8; 3];
            for (c, o) in out.iter_mut().enumerate() {
                let s: u64 = cells.iter().map(|p| p[c] as u64).sum();
                *o = ((2 * s + n) / (2 * n)) as u8;
            }
            out
        });
        assert_eq!(ops::pixelate(&img, b as i64).unwrap(), expected, "block {b}");
    });
}

pub fn resize_matches_reference() {
    cases(11, |rng, img| {
        let (ow, oh) = (rng.random_range(1..=40usize), rng.random_range(1..=40usize));
        let centre = |i: usize, out: usize| ((i as f64 + 0.5) * (16.0 / out as f64) - 0.5).clamp(0.0, 15.0);
        let expected = RasterImage::from_fn(ow, oh, |x, y| lerp_sample(&img, centre(x, ow), centre(y, oh)));
        assert_eq!(ops::resize(&img, ow as i64, oh as i64, usize::MAX).unwrap(), expected, "{ow}x{oh}");
    });
}

pub fn jigsaw_inverse_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..CASES {
        let (w, h) = (2 * rng.random_range(4..=24), 2 * rng.random_range(4..=24));
        let img = random_image(&mut rng, w, h);
        let n = rng.random_range(1..=4usize);
        let mut order: Vec<i64> = (0..(n * n) as i64).collect();
        order.shuffle(&mut rng);
        let mut inverse = vec![0i64; n * n];
        for (i, &o) in order.iter().enumerate() {
            inverse[o as usize] = i as i64;
        }
        let there = ops::jigsaw(&img, n as i64, &order).unwrap();
        let back = ops::jigsaw(&there, n as i64, &inverse).unwrap();
        let truncated = ops::jigsaw(&img, n as i64, &(0..(n * n) as i64).collect::<Vec<_>>()).unwrap();
        assert_eq!(back, truncated);
        assert_eq!((truncated.width(), truncated.height()), (w / n * n, h / n * n));
    }
}

pub fn four_quarter_turns_are_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..CASES {
        let (w, h) = (2 * rng.random_range(1..=20), 2 * rng.random_range(1..=20));
        let img = random_image(&mut rng, w, h);
        let mut cur = img.clone();
        for _ in 0..4 {
            cur = ops::rotate(&cur, Decimal::from_int(90), usize::MAX).unwrap();
        }
        assert_eq!(cur, img);
    }
}

/// Every check, named, for drivers that run them together.
pub const ALL: [(&str, fn()); 13] = [
    ("rotate_matches_reference", rotate_matches_reference),
    ("flip_matches_reference", flip_matches_reference),
    ("crop_matches_reference", crop_matches_reference),
    ("jigsaw_matches_reference", jigsaw_matches_reference),
    ("draw_rect_matches_reference", draw_rect_matches_reference),
    ("brightness_matches_reference", brightness_matches_reference),
    ("contrast_matches_reference", contrast_matches_reference),
    ("grayscale_matches_reference", grayscale_matches_reference),
    ("invert_matches_reference", invert_matches_reference),
    ("pixelate_matches_reference", pixelate_matches_reference),
    ("resize_matches_reference", resize_matches_reference),
    ("jigsaw_inverse_round_trips", jigsaw_inverse_round_trips),
    ("four_quarter_turns_are_identity", four_quarter_turns_are_identity),
];
