//! Seeded multivariate periodic series with known structure.
//!
//! Columns are the informative channels, then the distractors, then the target.
//! Channel `k` observes `a_k sin(2πt/p_k + φ_k)` plus Gaussian noise. The target
//! is `Σ w_k a_k sin(2π(t - lag)/p_k + φ_k)` plus its own noise, so it trails the
//! channels by `lag` steps. Noise is drawn from a ChaCha8 stream with the
//! ziggurat normal sampler, one value per cell in row-major order.

use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::RawSeries;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub amplitude: f64,
    /// Period in samples.
    pub period: f64,
    /// Phase in radians.
    pub phase: f64,
    pub noise: f64,
}

impl ChannelSpec {
    /// Unit sinusoid phased half a sample off the grid, so no sample lands on a
    /// zero crossing.
    pub fn sine(period: f64, noise: f64) -> Self {
        ChannelSpec {
            amplitude: 1.0,
            period,
            phase: PI / period,
            noise,
        }
    }

    fn clean(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * t / self.period + self.phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub rows: usize,
    pub informative: Vec<ChannelSpec>,
    pub distractors: usize,
    pub distractor_noise: f64,
    /// One weight per informative channel.
    pub target_weights: Vec<f64>,
    pub lag: usize,
    pub target_noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// One informative channel of the given period, five noise distractors,
    /// σ = 0.05 everywhere and a quarter-period lag.
    pub fn scenario(rows: usize, period: usize, seed: u64) -> Self {
        SynthSpec {
            rows,
            informative: vec![ChannelSpec::sine(period as f64, 0.05)],
            distractors: 5,
            distractor_noise: 0.05,
            target_weights: vec![1.0],
            lag: period / 4,
            target_noise: 0.05,
            seed,
        }
    }

    /// Single noiseless channel; the target equals the channel.
    pub fn clean_sine(rows: usize, period: usize, seed: u64) -> Self {
        SynthSpec {
            rows,
            informative: vec![ChannelSpec::sine(period as f64, 0.0)],
            distractors: 0,
            distractor_noise: 0.0,
            target_weights: vec![1.0],
            lag: 0,
            target_noise: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.informative.is_empty() {
            return Err(Error::InvalidArgument("need at least one informative channel".into()));
        }
        if self.target_weights.len() != self.informative.len() {
            return Err(Error::InvalidArgument(
                "one target weight per informative channel".into(),
            ));
        }
        let max_period = self
            .informative
            .iter()
            .map(|c| c.period)
            .fold(0.0, f64::max);
        if self.informative.iter().any(|c| !c.period.is_finite() || c.period <= 0.0) {
            return Err(Error::InvalidArgument("periods must be positive".into()));
        }
        if (self.rows as f64) < 4.0 * max_period {
            return Err(Error::InvalidArgument(format!(
                "{} rows do not cover four periods of {max_period}",
                self.rows
            )));
        }
        let noises = self
            .informative
            .iter()
            .map(|c| c.noise)
            .chain([self.distractor_noise, self.target_noise]);
        for sigma in noises {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad noise level {sigma}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Half-period, in samples, of the channel with the largest weighted amplitude.
    pub half_period: f64,
    pub informative_columns: Vec<usize>,
    pub distractor_columns: Vec<usize>,
    pub target_column: usize,
    pub lag: usize,
}

struct Noise(Option<Normal<f64>>);

impl Noise {
    fn new(sigma: f64) -> Self {
        Noise((sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma validated")))
    }

    fn sample(&self, rng: &mut crate::rng::Rng) -> f64 {
        self.0.as_ref().map_or(0.0, |n| n.sample(rng))
    }
}

pub fn gen_periodic(spec: &SynthSpec) -> Result<(RawSeries, GroundTruth)> {
    spec.validate()?;
    let k = spec.informative.len();
    let m = k + spec.distractors + 1;
    let mut rng = rng_from(derive_seed(spec.seed, stream::SYNTH));
    let channel_noise: Vec<Noise> = spec.informative.iter().map(|c| Noise::new(c.noise)).collect();
    let distractor_noise = Noise::new(spec.distractor_noise);
    let target_noise = Noise::new(spec.target_noise);

    let mut values = Matrix::zeros(spec.rows, m);
    for t in 0..spec.rows {
        let time = t as f64;
        let row = values.row_mut(t);
        for (c, channel) in spec.informative.iter().enumerate() {
            row[c] = channel.clean(time) + channel_noise[c].sample(&mut rng);
        }
        for cell in &mut row[k..k + spec.distractors] {
            *cell = distractor_noise.sample(&mut rng);
        }
        let lagged = time - spec.lag as f64;
        let signal: f64 = spec
            .informative
            .iter()
            .zip(&spec.target_weights)
            .map(|(channel, w)| w * channel.clean(lagged))
            .sum();
        row[m - 1] = signal + target_noise.sample(&mut rng);
    }

    let mut names: Vec<String> = (1..=k).map(|i| format!("signal_{i}")).collect();
    names.extend((1..=spec.distractors).map(|i| format!("noise_{i}")));
    names.push("target".to_string());

    let dominant = spec
        .informative
        .iter()
        .zip(&spec.target_weights)
        .max_by(|a, b| (a.1 * a.0.amplitude).abs().total_cmp(&(b.1 * b.0.amplitude).abs()))
        .map(|(c, _)| c.period / 2.0)
        .expect("validated non-empty");

    let series = RawSeries::new(values, names, m - 1)?;
    Ok((
        series,
        GroundTruth {
            half_period: dominant,
            informative_columns: (0..k).collect(),
            distractor_columns: (k..k + spec.distractors).collect(),
            target_column: m - 1,
            lag: spec.lag,
        },
    ))
}
