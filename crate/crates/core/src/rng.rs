//! Deterministic, stream-keyed random source.
//!
//! Every simulated path owns one [`RngStream`] keyed by `(seed, stream_id)`
//! with `stream_id` equal to the 0-based path index. The generator underneath
//! is ChaCha8, which is counter-based: each `(key, stream)` pair addresses an
//! independent keystream and the word position is the counter. Replaying a
//! pair therefore reproduces the variate sequence bit-for-bit whatever the
//! thread layout. Auxiliary randomness for a path (Lévy areas, the binomial
//! copy of a weak run, ...) comes from [`RngStream::substream`], which rekeys
//! the generator with a tag while keeping the path index.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, require_positive, Result};

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Largest rate handed to a single inversion search; larger rates are split.
const POISSON_INVERSION_MAX: f64 = 30.0;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
            spare_normal: None,
        }
    }

    /// Independent stream for the same path index under a different key.
    pub fn substream(&self, tag: u64) -> Self {
        let key = splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)));
        RngStream::new(key, self.stream_id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform on `(0, 1]`; never returns zero, so `ln` is always finite.
    pub fn uniform_open_low(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_M53
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform on `[-1, 1)`.
    pub fn uniform_symmetric(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }

    /// Two independent standard Normals by Marsaglia's polar method.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        loop {
            let u1 = self.uniform_symmetric();
            let u2 = self.uniform_symmetric();
            if let Some(pair) = polar_transform(u1, u2) {
                return pair;
            }
        }
    }

    /// Like [`normal_pair`](Self::normal_pair) but also reports how many
    /// candidate points were drawn, for acceptance-rate diagnostics.
    pub fn normal_pair_counted(&mut self) -> ((f64, f64), u32) {
        let mut tries = 0;
        loop {
            tries += 1;
            let u1 = self.uniform_symmetric();
            let u2 = self.uniform_symmetric();
            if let Some(pair) = polar_transform(u1, u2) {
                return (pair, tries);
            }
        }
    }

    /// Two independent standard Normals by the Box–Müller transform.
    pub fn normal_box_muller(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open_low();
        let u2 = self.uniform();
        box_muller_transform(u1, u2)
    }

    /// One standard Normal; the second value of each polar pair is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let (z1, z2) = self.normal_pair();
        self.spare_normal = Some(z2);
        z1
    }

    pub fn wiener_increment(&mut self, h: f64) -> Result<f64> {
        require_positive("h", h)?;
        Ok(h.sqrt() * self.normal())
    }

    /// `+sqrt(h)` or `-sqrt(h)` with probability one half each.
    pub fn binomial_increment(&mut self, h: f64) -> Result<f64> {
        require_positive("h", h)?;
        let sign = if self.next_u64() >> 63 == 0 { 1.0 } else { -1.0 };
        Ok(sign * h.sqrt())
    }

    pub fn poisson(&mut self, rate: f64) -> Result<u64> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(invalid("rate", format!("must be finite and >= 0, got {rate}")));
        }
        // Poisson(a + b) = Poisson(a) + Poisson(b); keeps exp(-rate) well away from underflow.
        let chunks = (rate / POISSON_INVERSION_MAX).ceil().max(1.0) as u64;
        let part = rate / chunks as f64;
        Ok((0..chunks).map(|_| self.poisson_inversion(part)).sum())
    }

    fn poisson_inversion(&mut self, rate: f64) -> u64 {
        if rate == 0.0 {
            return 0;
        }
        let u = self.uniform();
        let mut k = 0u64;
        let mut p = (-rate).exp();
        let mut cdf = p;
        while u >= cdf {
            k += 1;
            p *= rate / k as f64;
            if p == 0.0 {
                break;
            }
            cdf += p;
        }
        k
    }

    /// Laplace variate with density `exp(-|x|/scale) / (2 scale)`.
    pub fn laplace(&mut self, scale: f64) -> Result<f64> {
        require_positive("scale", scale)?;
        Ok(laplace_inverse(self.uniform_open(), scale))
    }
}

/// Polar transform of a candidate point; `None` outside the open unit disc
/// or at the origin.
pub fn polar_transform(u1: f64, u2: f64) -> Option<(f64, f64)> {
    let s = u1 * u1 + u2 * u2;
    if s == 0.0 || s >= 1.0 {
        return None;
    }
    let factor = (-2.0 * s.ln() / s).sqrt();
    Some((u1 * factor, u2 * factor))
}

/// Box–Müller transform; `u1` must lie in `(0, 1]`.
pub fn box_muller_transform(u1: f64, u2: f64) -> (f64, f64) {
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Inverse CDF of the Laplace distribution, `u` in `(0, 1)`.
pub fn laplace_inverse(u: f64, scale: f64) -> f64 {
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}
