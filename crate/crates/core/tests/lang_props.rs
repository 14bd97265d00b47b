mod common;

use evoforge::image::{execute, execute_all, hash_similarity, perceptual_hash, ExecLimits, PerceptualHash, RasterImage};
use evoforge::lang::{parse_program, render_canonical, tokenize, Decimal};
use evoforge::image::ops;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn program(seed: u64) -> String {
    common::random_program(&mut ChaCha8Rng::seed_from_u64(seed), 4)
}

proptest! {
    #[test]
    fn canonical_form_round_trips(seed in any::<u64>()) {
        let src = program(seed);
        let p = parse_program(&src).into_result().unwrap();
        let canon = render_canonical(&p);
        let again = parse_program(&canon).into_result().unwrap();
        prop_assert_eq!(&again, &p);
        prop_assert_eq!(render_canonical(&again), canon);
    }

    #[test]
    fn whitespace_does_not_change_meaning(seed in any::<u64>()) {
        let src = program(seed);
        let spaced = src.replace(' ', "   ").replace('\n', "  \n\n");
        prop_assert_eq!(parse_program(&spaced).into_result().unwrap(), parse_program(&src).into_result().unwrap());
        prop_assert_eq!(tokenize(&spaced), tokenize(&src));
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_program(&text);
    }

    #[test]
    fn parser_survives_mangled_programs(seed in any::<u64>(), cut in 0usize..400, junk in "[ $=,\\[\\]a-z0-9.\\n-]{0,8}") {
        let src = program(seed);
        let at = src.char_indices().map(|(i, _)| i).nth(cut % src.chars().count()).unwrap_or(0);
        let mangled = format!("{}{}{}", &src[..at], junk, &src[at..]);
        let _ = parse_program(&mangled);
    }

    #[test]
    fn execution_is_deterministic(seed in any::<u64>(), w in 32usize..64, h in 32usize..64) {
        let src = program(seed);
        let p = parse_program(&src).into_result().unwrap();
        let img = RasterImage::from_fn(w, h, |x, y| [(x * 7 + y) as u8, (x * y) as u8, (255 - x) as u8]);
        let limits = ExecLimits::default();
        let a = execute_all(&p, &img, &limits);
        prop_assert_eq!(&a, &execute_all(&p, &img, &limits));
        if let Ok(outs) = a {
            prop_assert_eq!(outs.len(), 4);
            for (set, out) in p.arg_sets.iter().zip(&outs) {
                prop_assert_eq!(&execute(&p, set, &img, &limits).unwrap(), out);
                prop_assert!((32..=2048).contains(&out.width()) && (32..=2048).contains(&out.height()));
            }
        }
    }

    #[test]
    fn involutions(w in 1usize..24, h in 1usize..24, seed in any::<u8>()) {
        let img = RasterImage::from_fn(w, h, |x, y| [seed ^ (x as u8), (y * 3) as u8, (x + y) as u8]);
        for axis in [evoforge::lang::Axis::Horizontal, evoforge::lang::Axis::Vertical] {
            prop_assert_eq!(&ops::flip(&ops::flip(&img, axis), axis), &img);
        }
        prop_assert_eq!(&ops::invert(&ops::invert(&img)), &img);
        prop_assert_eq!(&ops::brightness(&img, Decimal::from_int(1)), &img);
    }

    #[test]
    fn hash_similarity_is_a_bounded_symmetric_score(a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (PerceptualHash(a), PerceptualHash(b));
        let s = hash_similarity(x, y);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, hash_similarity(y, x));
        prop_assert_eq!(hash_similarity(x, x), 1.0);
        prop_assert_eq!(s, 1.0 - (a ^ b).count_ones() as f64 / 64.0);
    }

    #[test]
    fn constant_images_hash_to_zero(w in 9usize..80, h in 8usize..80, c in any::<[u8; 3]>()) {
        prop_assert_eq!(perceptual_hash(&RasterImage::filled(w, h, c)).0, 0);
    }
}
