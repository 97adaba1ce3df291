//! Keyed, splittable random streams.
//!
//! Every stochastic piece of the crate draws from a ChaCha stream whose key
//! is derived from a list of integer words (seed, role tags, indices). Equal
//! words give bit-identical streams; distinct words give independent ones.
//! This is what makes parallel simulation runs reproduce serial runs exactly.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 advance + avalanche; also usable as a standalone tiny PRNG.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(words: &[u64]) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3 ^ (words.len() as u64);
    for &w in words {
        let mut s = h ^ w;
        h = splitmix64(&mut s);
    }
    h
}

/// Deterministic ChaCha stream keyed by `words`.
pub fn stream_rng(words: &[u64]) -> ChaCha8Rng {
    let mut state = absorb(words);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Collapse `words` to a single seed, for procedures that take a plain seed.
pub fn derive_seed(words: &[u64]) -> u64 {
    let mut state = absorb(words);
    splitmix64(&mut state)
}

/// Uniform draw from the open interval `(0, 1)` on a half-ulp-offset lattice,
/// so neither endpoint can ever be produced.
pub fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64) + 0.5 / (1u64 << 53) as f64
}

/// Standard normal draw by inverse transform; never returns exactly zero.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    crate::normal::std_normal_quantile(open_unit(rng))
}
