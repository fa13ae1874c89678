//! Stable, platform-independent hashes for config fingerprints and RNG seeds.

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256, truncated to 16 bytes (32 hex chars).
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// 64-bit hash of a seed and a string key (FNV-1a followed by a splitmix64
/// finalizer).
pub fn hash64(seed: u64, key: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for byte in seed.to_le_bytes().iter().chain(key.as_bytes()) {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(PRIME);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash64_is_stable() {
        assert_eq!(hash64(7, "d1"), hash64(7, "d1"));
        assert_ne!(hash64(7, "d1"), hash64(8, "d1"));
        assert_ne!(hash64(7, "d1"), hash64(7, "d2"));
    }

    #[test]
    fn sha_hex_length() {
        assert_eq!(sha256_hex(b"abc").len(), 32);
        assert_eq!(&sha256_hex(b"abc")[..8], "ba7816bf");
    }
}
