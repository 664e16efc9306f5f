//! Counter-based deterministic random numbers.
//!
//! Every stochastic component of the crate draws from a [`StreamRng`], a
//! splitmix64 generator whose i-th output is a pure function of (seed, i).
//! Independent streams are obtained by hashing a base seed together with
//! integer tags via [`derive_seed`], so runs can be farmed out to a thread
//! pool without any shared RNG state and still reproduce bit-for-bit.

/// splitmix64 finalizer: a bijective 64-bit mix with good avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Hash a base seed with a list of tags into a new stream seed.
///
/// Used for the experiment seed schedule: `seed(cell, run, purpose) =
/// derive_seed(base, &[cell, run, purpose])`. Distinct tag sequences give
/// statistically independent streams.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = mix64(base ^ GOLDEN);
    for &t in tags {
        h = mix64(h ^ mix64(t.wrapping_add(GOLDEN)));
    }
    h
}

/// Deterministic splitmix64 stream.
#[derive(Debug, Clone)]
pub struct StreamRng {
    state: u64,
    cached_normal: Option<f64>,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        StreamRng {
            state: seed,
            cached_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller; the paired draw is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // 1 - u keeps the log argument strictly positive.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(radius * theta.sin());
        radius * theta.cos()
    }

    /// Fill a slice with i.i.d. standard normals.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }

    /// Uniform index in [0, n) via the multiply-shift reduction.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}
