//! Seed derivation for reproducible, scheduling-independent randomness.
//!
//! Every random stream in the pipeline is keyed by a global seed plus a
//! stable sequence of labels (stage name, start node, walk index, tree
//! index, ...). Derivation uses splitmix64 mixing, so streams stay
//! identical across platforms, worker counts, and reruns.

/// One splitmix64 round: maps a state to a well-mixed 64-bit output.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from a base seed and a list of stream labels.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &p in parts {
        state = splitmix64(state ^ splitmix64(p));
    }
    state
}

/// Derives a child seed from a base seed and a textual stream label.
pub fn derive_seed_str(base: u64, label: &str) -> u64 {
    derive_seed(base, &[fnv1a64(label.as_bytes())])
}

/// FNV-1a 64-bit hash. Stable across runs and platforms; used for
/// content fingerprints and label hashing, not for security.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
