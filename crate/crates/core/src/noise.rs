//! Multiplicative-noise gradient oracles.
//!
//! A draw is `g = (1 + sigma Z) * grad f(x)`, with one shared standard normal
//! `Z` ([`NoiseShape::ScalarFactor`]) or an independent one per coordinate
//! ([`NoiseShape::Elementwise`]). Both shapes are unbiased and satisfy
//! `E|g - grad f|^2 = sigma^2 |grad f|^2` with equality. Averaging `K`
//! independent draws divides that constant by `K`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::objective::GradientOracle;
use crate::point::Point;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseShape {
    ScalarFactor,
    Elementwise,
}

impl NoiseShape {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseShape::ScalarFactor => "scalar",
            NoiseShape::Elementwise => "elementwise",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MnsOracleConfig {
    sigma: f64,
    shape: NoiseShape,
    averaging: usize,
    seed: u64,
}

impl MnsOracleConfig {
    pub fn new(sigma: f64, shape: NoiseShape, averaging: usize, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if averaging == 0 {
            return Err(Error::invalid("averaging count K must be >= 1"));
        }
        Ok(Self {
            sigma,
            shape,
            averaging,
            seed,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn shape(&self) -> NoiseShape {
        self.shape
    }

    pub fn averaging(&self) -> usize {
        self.averaging
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `sigma^2 / K`
    pub fn effective_mns_constant(&self) -> f64 {
        self.sigma * self.sigma / self.averaging as f64
    }

    /// The private stream for trajectory `run_index`.
    pub fn stream(&self, run_index: u64) -> NoiseStream {
        NoiseStream::new(self.seed, run_index)
    }
}

/// Deterministic standard-normal stream keyed by `(seed, run_index)`.
///
/// Backed by ChaCha8, a counter-based generator: the key comes from `seed`,
/// the stream id is `run_index`, and the block counter advances with each
/// draw, so streams for different runs can be created and consumed in any
/// order without shared state.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    run_index: u64,
    draws: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, run_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run_index);
        Self {
            rng,
            run_index,
            draws: 0,
        }
    }

    pub fn run_index(&self) -> u64 {
        self.run_index
    }

    /// Number of standard normals consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.draws += 1;
        StandardNormal.sample(&mut self.rng)
    }

    /// Raw 64-bit output, for tests comparing streams bit for bit.
    pub fn next_raw(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// One oracle call: the average of `K` independent multiplicative-noise
/// draws around `true_gradient`. With `sigma = 0` the exact gradient is
/// returned and no randomness is consumed.
pub fn sample_noisy_gradient<T: Scalar>(
    config: &MnsOracleConfig,
    stream: &mut NoiseStream,
    true_gradient: &Point<T>,
) -> Point<T> {
    if config.sigma == 0.0 {
        return true_gradient.clone();
    }
    let k = config.averaging;
    let sigma = config.sigma;
    match config.shape {
        NoiseShape::ScalarFactor => {
            let mean_z = (0..k).map(|_| stream.standard_normal()).sum::<f64>() / k as f64;
            let factor = T::lit(1.0 + sigma * mean_z);
            true_gradient.scale(factor)
        }
        NoiseShape::Elementwise => {
            let dim = true_gradient.dim();
            let mut acc = vec![0.0f64; dim];
            for _ in 0..k {
                for z in acc.iter_mut() {
                    *z += stream.standard_normal();
                }
            }
            let inv_k = 1.0 / k as f64;
            Point::from_vec_unchecked(
                true_gradient
                    .as_slice()
                    .iter()
                    .zip(&acc)
                    .map(|(&g, &z)| T::lit(1.0 + sigma * z * inv_k) * g)
                    .collect(),
            )
        }
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MnsEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl MnsEstimate {
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for s in samples {
            n += 1;
            let delta = s - mean;
            mean += delta / n as f64;
            m2 += delta * (s - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Self {
            value: mean,
            std_error: (var / n.max(1) as f64).sqrt(),
            n_samples: n,
        }
    }

    /// `|value - target|` measured in standard errors; zero when both the
    /// error and the deviation vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let dev = (self.value - target).abs();
        if dev == 0.0 {
            0.0
        } else {
            dev / self.std_error
        }
    }
}

pub const MIN_MNS_SAMPLES: usize = 10_000;

/// Sample mean of `|g - grad f|^2 / |grad f|^2`, an estimate of `sigma^2 / K`.
pub fn empirical_mns_constant<T: Scalar>(
    config: &MnsOracleConfig,
    stream: &mut NoiseStream,
    true_gradient: &Point<T>,
    n_samples: usize,
) -> Result<MnsEstimate> {
    let norm_sq = true_gradient.norm_sq().as_f64();
    if norm_sq == 0.0 {
        return Err(Error::ZeroGradient);
    }
    if n_samples < MIN_MNS_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_MNS_SAMPLES} samples, got {n_samples}"
        )));
    }
    Ok(MnsEstimate::from_samples((0..n_samples).map(|_| {
        let g = sample_noisy_gradient(config, stream, true_gradient);
        g.distance_sq(true_gradient).as_f64() / norm_sq
    })))
}

/// A configured oracle owning the noise stream of one trajectory.
#[derive(Clone, Debug)]
pub struct MnsOracle {
    config: MnsOracleConfig,
    stream: NoiseStream,
}

impl MnsOracle {
    pub fn new(config: MnsOracleConfig, run_index: u64) -> Self {
        Self {
            stream: config.stream(run_index),
            config,
        }
    }

    pub fn config(&self) -> &MnsOracleConfig {
        &self.config
    }

    pub fn stream(&self) -> &NoiseStream {
        &self.stream
    }
}

impl<T: Scalar> GradientOracle<T> for MnsOracle {
    fn sample(&mut self, true_gradient: &Point<T>) -> Point<T> {
        sample_noisy_gradient(&self.config, &mut self.stream, true_gradient)
    }
}
