//! Counter-based random number generation.
//!
//! Every variate is a pure function of (seed, stream, path, step, driver), so
//! paths are reproducible and parallelizable without shared generator state.
//! The mixer is the splitmix64 finalizer folded over the key words.

/// Purpose tags keeping independent uses of the generator on disjoint streams.
pub mod stream {
    /// Brownian increments of the wealth SDE.
    pub const INCREMENT: u64 = 1;
    /// Death-time uniforms.
    pub const DEATH: u64 = 2;
    /// Free-standing draws (tests, sampling utilities).
    pub const GENERIC: u64 = 3;
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[inline]
fn hash_key(seed: u64, stream: u64, path: u64, step: u64, driver: u64) -> u64 {
    let mut h = 0x243f6a8885a308d3u64 ^ seed;
    for w in [stream, path, step, driver] {
        h = mix64(h ^ w).wrapping_add(0x9e3779b97f4a7c15);
    }
    mix64(h)
}

/// Uniform in the open interval (0, 1).
#[inline]
pub fn uniform(seed: u64, stream: u64, path: u64, step: u64, driver: u64) -> f64 {
    let bits = hash_key(seed, stream, path, step, driver);
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Standard normal via Box-Muller on two keyed uniforms.
#[inline]
pub fn normal(seed: u64, stream: u64, path: u64, step: u64, driver: u64) -> f64 {
    let u1 = uniform(seed, stream, path, step, 2 * driver);
    let u2 = uniform(seed, stream, path, step, 2 * driver + 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
