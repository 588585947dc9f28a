//! Counter-based splittable random number generation.
//!
//! Each replication owns an independent stream keyed by
//! (global seed, cell key, replication index), so results never depend on
//! how replications are partitioned across chunks or threads. The stream
//! is the SplitMix64 output function applied to a keyed counter; normal
//! deviates come from the inverse-CDF transform and chi-square deviates
//! from the Marsaglia–Tsang gamma sampler.

use crate::numerics::inverse_normal_cdf;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A counter-based stream: `output_i = mix64(key + (i+1)·GOLDEN)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Derive a stream key by absorbing the given parts in order.
    pub fn from_key_parts(parts: &[u64]) -> Self {
        let mut key = 0x243f_6a88_85a3_08d3; // π fraction, fixed IV
        for &part in parts {
            key = mix64(key ^ mix64(part.wrapping_add(GOLDEN)));
        }
        CounterRng { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(GOLDEN);
        mix64(self.key.wrapping_add(self.counter))
    }

    /// Uniform deviate strictly inside (0, 1), as (i + 1/2) / 2⁵³.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate via the inverse CDF.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform()).expect("uniform lies strictly inside (0,1)")
    }

    /// Gamma(shape, scale 1) deviate, Marsaglia–Tsang squeeze-rejection.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "gamma shape must be positive");
        if shape < 1.0 {
            // Boost: Gamma(a) = Gamma(a + 1) · U^{1/a}.
            let boost = self.uniform().powf(1.0 / shape);
            return self.gamma(shape + 1.0) * boost;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let v = (1.0 + c * x).powi(3);
            if v <= 0.0 {
                continue;
            }
            let u = self.uniform();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Chi-square deviate with df > 0 (non-integer allowed).
    pub fn chi_square(&mut self, df: f64) -> f64 {
        2.0 * self.gamma(df / 2.0)
    }
}
