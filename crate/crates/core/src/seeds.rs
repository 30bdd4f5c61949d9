//! Deterministic derivation of per-item RNG seeds from a base seed, so work
//! on different bags or images never shares or reorders random streams.

/// Mixes a base seed with a numeric salt (splitmix64 finalization).
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    splitmix64(base ^ splitmix64(salt.wrapping_add(0x9E3779B97F4A7C15)))
}

/// Mixes a base seed with a string salt (FNV-1a over the bytes).
pub fn derive_seed_str(base: u64, salt: &str) -> u64 {
    derive_seed(base, fnv1a(salt.as_bytes()))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
