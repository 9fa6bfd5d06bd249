//! Deterministic randomness.
//!
//! Every random decision in the pipeline descends from one run seed. Each
//! consumer draws from its own named sub-stream, so adding a new consumer
//! never perturbs the sequence seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One step of the SplitMix64 generator: advances `state` and returns the
/// mixed output.
#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    mix64(*state)
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Root of the named sub-streams for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub const SHUFFLE: &'static str = "shuffle";
    pub const INIT: &'static str = "init";
    pub const STYLE: &'static str = "style-selection";
    pub const SYNTHETIC: &'static str = "synthetic";

    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// 64-bit key for the named stream.
    pub fn key(&self, name: &str) -> u64 {
        let mut s = self.seed ^ fnv1a(name.as_bytes());
        splitmix64(&mut s)
    }

    pub fn rng(&self, name: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key(name))
    }
}

/// Knuth's MMIX linear congruential generator.
///
/// `state' = state * 6364136223846793005 + 1442695040888963407 (mod 2^64)`;
/// outputs are taken from the high 32 bits.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub const MULTIPLIER: u64 = 6_364_136_223_846_793_005;
    pub const INCREMENT: u64 = 1_442_695_040_888_963_407;

    pub fn new(state: u64) -> Self {
        Self { state }
    }

    /// Generator keyed by `(seed, index)`. The key is mixed so that nearby
    /// seeds and indices land on unrelated states.
    pub fn keyed(seed: u64, index: u64) -> Self {
        let state = mix64(seed ^ mix64(index.wrapping_add(Self::INCREMENT)));
        let mut lcg = Self::new(state);
        // discard the first output; low-entropy keys show through otherwise
        lcg.next_u32();
        lcg
    }

    pub fn next_u32(&mut self) -> u32 {
        self.state = self
            .state
            .wrapping_mul(Self::MULTIPLIER)
            .wrapping_add(Self::INCREMENT);
        (self.state >> 32) as u32
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift, bias < n / 2^32).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((u64::from(self.next_u32()) * n as u64) >> 32) as usize
    }
}
