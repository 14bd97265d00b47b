//! Named, order-independent random substreams derived from one master seed.
//!
//! Every consumer of randomness asks for a stream keyed by a [`StreamKey`]
//! (iteration, step, rollout, role, purpose). The key is folded into the
//! master seed with the SplitMix64 finalizer, so the value a consumer sees
//! does not depend on how many other streams were drawn before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes; used to turn purpose names into words.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Fold one word into a running seed.
pub fn fold(seed: u64, word: u64) -> u64 {
    mix64(seed ^ mix64(word))
}

/// Derive a child seed from a parent seed and a label.
pub fn derive(seed: u64, label: &str) -> u64 {
    fold(seed, label_hash(label))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Challenger,
    Solver,
    Engine,
}

impl Role {
    fn word(self) -> u64 {
        match self {
            Role::Challenger => 1,
            Role::Solver => 2,
            Role::Engine => 3,
        }
    }
}

/// Address of a substream inside a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey<'a> {
    pub iteration: u64,
    pub step: u64,
    pub rollout: u64,
    pub role: Role,
    pub purpose: &'a str,
}

impl<'a> StreamKey<'a> {
    pub fn new(iteration: u64, step: u64, rollout: u64, role: Role, purpose: &'a str) -> Self {
        Self {
            iteration,
            step,
            rollout,
            role,
            purpose,
        }
    }

    /// 64-bit seed of this stream under `master`.
    pub fn seed(&self, master: u64) -> u64 {
        let mut s = mix64(master);
        s = fold(s, self.iteration);
        s = fold(s, self.step);
        s = fold(s, self.rollout);
        s = fold(s, self.role.word());
        fold(s, label_hash(self.purpose))
    }

    pub fn rng(&self, master: u64) -> StreamRng {
        StreamRng::seed_from_u64(self.seed(master))
    }
}

pub fn rng_from(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
