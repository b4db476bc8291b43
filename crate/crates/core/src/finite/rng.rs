//! Counter-based pseudo-random numbers.
//!
//! Output `i` of a stream with key `k` is `mix64(k + (i + 1) * 0x9E3779B97F4A7C15)`,
//! where `mix64` is the SplitMix64 finalizer. The whole stream is a pure
//! function of its key, and the key is derived from `(seed, purpose)`, so
//! every random quantity in a run is reproducible independently of how work
//! is scheduled. Normal variates use the Marsaglia polar method.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub const GENERATOR_TAG: &str = "splitmix64-counter/polar";

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent random streams used by one Monte Carlo seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Coefficients = 1,
    Covariates = 2,
    Noise = 3,
    TestPoints = 4,
}

/// Stream key for `(seed, purpose)`.
pub fn stream_key(seed: u64, stream: Stream) -> u64 {
    mix64(mix64(seed ^ 0x5EED_0FC0_FFEE) ^ mix64(stream as u64))
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
    spare: Option<f64>,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, counter: 0, spare: None }
    }

    pub fn for_stream(seed: u64, stream: Stream) -> Self {
        Self::new(stream_key(seed, stream))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = libm::sqrt(-2.0 * libm::log(s) / s);
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.normal();
        }
    }
}
