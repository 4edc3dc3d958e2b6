//! Reproducible random streams.
//!
//! A stream is addressed by `(master_seed, stream_index)`. The master seed keys
//! a ChaCha8 generator and the index selects its 64-bit stream, so any number
//! of substreams can be opened in any order and always replay the same values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive, platform-independent hash of a tuple of integers.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x5ec7_1a8b_u64, |acc, &w| mix64(acc ^ mix64(w)))
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Child stream keyed by `tag`; distinct tags give distinct streams.
    pub fn substream(&self, tag: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_index: hash_words(&[self.stream_index, tag]),
        }
    }

    /// Child stream keyed by a tuple, e.g. `(n, k, trial)`.
    pub fn substream_of(&self, tags: &[u64]) -> Self {
        let mut words = Vec::with_capacity(tags.len() + 1);
        words.push(self.stream_index);
        words.extend_from_slice(tags);
        Self {
            master_seed: self.master_seed,
            stream_index: hash_words(&words),
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut z = self.master_seed;
        for chunk in key.chunks_mut(8) {
            z = mix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_streams_replay() {
        let s = RngStream::new(7, 3);
        let a: Vec<u64> = s.rng().random_iter().take(16).collect();
        let b: Vec<u64> = s.rng().random_iter().take(16).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_indices_and_seeds_differ() {
        let a: u64 = RngStream::new(7, 3).rng().random();
        let b: u64 = RngStream::new(7, 4).rng().random();
        let c: u64 = RngStream::new(8, 3).rng().random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        let s = RngStream::new(1, 0);
        assert_ne!(s.substream(1), s.substream(2));
        assert_ne!(s.substream_of(&[1, 2]), s.substream_of(&[2, 1]));
    }
}
