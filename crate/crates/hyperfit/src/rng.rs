//! Seeded, counter-based random streams.
//!
//! All randomness in the crate (noise injection, cross-validation fold
//! shuffling) flows through the generator defined here so that runs are
//! reproducible from a single `u64` seed and portable across platforms.
//!
//! The generator is the SplitMix64 finalizer applied to `seed + k * GAMMA`
//! for a 64-bit counter `k` (Steele, Lea & Flood, 2014). Gaussian variates
//! are produced from consecutive counter pairs via the Box-Muller transform.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output for counter `k` under `seed`.
#[inline]
pub fn splitmix64(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(k.wrapping_add(1).wrapping_mul(GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform variate in the open interval (0, 1) from counter `k`.
#[inline]
pub fn uniform_open(seed: u64, k: u64) -> f64 {
    // 53 mantissa bits, offset by half an ulp so the result is never 0 or 1.
    ((splitmix64(seed, k) >> 11) as f64 + 0.5) / 9_007_199_254_740_992.0
}

/// Standard Gaussian variate for observation index `i` (Box-Muller on the
/// counter pair `2i`, `2i + 1`).
#[inline]
pub fn standard_normal(seed: u64, i: u64) -> f64 {
    let u1 = uniform_open(seed, 2 * i);
    let u2 = uniform_open(seed, 2 * i + 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Deterministic Fisher-Yates shuffle of `items` under `seed`.
pub fn shuffle<T>(items: &mut [T], seed: u64) {
    let n = items.len();
    if n < 2 {
        return;
    }
    for (counter, i) in (1..n).rev().enumerate() {
        let j = (splitmix64(seed, counter as u64) % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<f64> = (0..16).map(|i| standard_normal(42, i)).collect();
        let b: Vec<f64> = (0..16).map(|i| standard_normal(42, i)).collect();
        assert_eq!(a, b);
        let c: Vec<f64> = (0..16).map(|i| standard_normal(43, i)).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn normal_moments_are_sane() {
        let n = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for i in 0..n {
            let z = standard_normal(7, i);
            sum += z;
            sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut v: Vec<usize> = (0..100).collect();
        shuffle(&mut v, 3);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, (0..100).collect::<Vec<_>>());
    }
}
