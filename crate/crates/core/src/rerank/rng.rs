//! Deterministic randomness for candidate shuffling.
//!
//! The PRNG is SplitMix64 (Steele, Lea & Flood's mixing function as used
//! by `java.util.SplittableRandom`): a 64-bit generator seeded exactly by
//! the caller's seed, chosen because consecutive seeds yield decorrelated
//! streams. Per-query seeds derive from the run seed xor an FNV-1a hash of
//! the query id, so permutations are independent across queries yet fully
//! reproducible.

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-enough draw in `[0, bound)`; bound is tiny relative to 2^64
    /// here, so modulo bias is negligible for shuffling.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}

/// In-place Fisher-Yates shuffle driven by the given generator.
pub fn fisher_yates<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &byte in bytes {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Shuffle seed for one query: run seed xor the query-id hash.
pub fn per_query_seed(base_seed: u64, query_id: &str) -> u64 {
    base_seed ^ fnv1a64(query_id.as_bytes())
}
