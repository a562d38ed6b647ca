//! Stable 64-bit hashing for seed derivation.
//!
//! Sampling and error injection derive their randomness from hashes of
//! strings and integers; the hash must not change between runs, builds or
//! toolchains, so std's `DefaultHasher` is not used.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Clone, Debug)]
pub(crate) struct StableHasher(u64);

impl StableHasher {
    pub(crate) fn new(seed: u64) -> Self {
        let mut h = StableHasher(FNV_OFFSET);
        h.write_u64(seed);
        h
    }

    pub(crate) fn write_bytes(&mut self, bytes: &[u8]) -> &mut Self {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        self
    }

    pub(crate) fn write_str(&mut self, s: &str) -> &mut Self {
        self.write_bytes(s.as_bytes());
        // separator so ("ab","c") and ("a","bc") differ
        self.write_bytes(&[0xff])
    }

    pub(crate) fn write_u64(&mut self, v: u64) -> &mut Self {
        self.write_bytes(&v.to_le_bytes())
    }

    pub(crate) fn finish(&self) -> u64 {
        splitmix64(self.0)
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Maps a hash onto [0, 1).
pub(crate) fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}
