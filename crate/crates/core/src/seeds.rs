//! Stable seed derivation.
//!
//! Child seeds are `splitmix64(master ^ fnv1a64(coordinates))`. Both hashes are
//! fixed here, so adding a method or a grid point never perturbs the seeds of
//! the others.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// One round of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the little-endian bytes of each word.
pub fn fnv1a64<I: IntoIterator<Item = u64>>(words: I) -> u64 {
    let mut h = FNV_OFFSET;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Hash of a label such as a method name.
pub fn tag(label: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Seed for the cell at `coords` under `master`.
pub fn derive(master: u64, coords: &[u64]) -> u64 {
    splitmix64(master ^ fnv1a64(coords.iter().copied()))
}

/// Seed attached to a node subset within one run.
pub fn subset_seed(run_seed: u64, nodes: &[usize]) -> u64 {
    splitmix64(run_seed ^ fnv1a64(nodes.iter().map(|&i| i as u64)))
}

/// Fraction-of-`n` counts, robust to products like `0.3 * 200` landing just
/// below an integer.
pub fn floor_frac(frac: f64, n: usize) -> usize {
    (frac * n as f64 + 1e-9).floor().max(0.0) as usize
}
