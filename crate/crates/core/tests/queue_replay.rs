mod common;

use common::replay;
use evoforge::queue::{ExampleQueue, Origin};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn thousand_inserts_match_brute_force() {
    let (accepted, rejected) = replay(2024, 1000, 50, 0.25);
    assert!(accepted > 50 && rejected > 50, "accepted {accepted}, rejected {rejected}");
}

#[test]
fn snapshot_restores_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut q = ExampleQueue::with_default_seeds();
    for _ in 0..200 {
        let _ = q.insert(&common::random_program(&mut rng, 4), rng.random_range(0.0..=1.0), Origin::Seed).unwrap();
    }
    let snap = q.snapshot();
    let back = ExampleQueue::restore(&snap).unwrap();
    assert_eq!(back, q);
    assert_eq!(back.snapshot(), snap);
    assert!(ExampleQueue::restore(&snap[..snap.len() - 1]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn small_queues_match_brute_force(seed in any::<u64>(), capacity in 1usize..6, sigma in 0.2f64..0.6) {
        replay(seed, 60, capacity, sigma);
    }
}
