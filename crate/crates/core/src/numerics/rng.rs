use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

pub const ALGORITHM_ID: &str = "chacha20-box-muller";

const CHANNEL_BITS: u32 = 16;

/// Seeded Gaussian stream.
///
/// The uniform source is ChaCha20, a counter-based generator: a `(seed,
/// stream)` pair fully determines the output, and distinct stream indices
/// give independent sequences. Each stream is further split into channels
/// (`stream << 16 | channel`) so a simulation can draw inputs and each noise
/// coordinate from separate sequences; channel 0 is the stream itself.
#[derive(Debug, Clone)]
pub struct Prng {
    seed: u64,
    stream: u64,
    channel: u16,
    core: ChaCha20Rng,
    spare: Option<f64>,
}

impl Prng {
    /// # Panics
    /// If `stream` does not fit in 48 bits.
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::with_channel(seed, stream, 0)
    }

    fn with_channel(seed: u64, stream: u64, channel: u16) -> Self {
        assert!(
            stream < 1 << (64 - CHANNEL_BITS),
            "stream index {stream} exceeds 48 bits"
        );
        let mut core = ChaCha20Rng::seed_from_u64(seed);
        core.set_stream(stream << CHANNEL_BITS | channel as u64);
        Self {
            seed,
            stream,
            channel,
            core,
            spare: None,
        }
    }

    /// Independent sub-stream of the same `(seed, stream)` pair.
    pub fn channel(&self, channel: u16) -> Prng {
        Self::with_channel(self.seed, self.stream, channel)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn channel_index(&self) -> u16 {
        self.channel
    }

    pub fn algorithm(&self) -> &'static str {
        ALGORITHM_ID
    }

    /// Uniform on (0, 1]; never returns 0 so the logarithm below is finite.
    pub fn uniform(&mut self) -> f64 {
        ((self.core.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box–Muller, both outputs used).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let radius = (-2.0 * self.uniform().ln()).sqrt();
        let theta = std::f64::consts::TAU * self.uniform();
        self.spare = Some(radius * theta.sin());
        radius * theta.cos()
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }
}

/// `count` i.i.d. draws from N(mean, variance).
pub fn gaussian_sample(rng: &mut Prng, mean: f64, variance: f64, count: usize) -> Result<Vec<f64>> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Argument(format!(
            "variance must be finite and non-negative, got {variance}"
        )));
    }
    let sd = variance.sqrt();
    Ok((0..count).map(|_| rng.normal(mean, sd)).collect())
}
