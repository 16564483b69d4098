use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::waveform::IqWaveform;

/// Carrier frequency offset, stored in whichever unit was given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyOffset {
    Hz(f64),
    /// `epsilon = cfo_hz / scs_hz`.
    Normalized {
        epsilon: f64,
        scs_hz: f64,
    },
}

impl FrequencyOffset {
    pub fn hz(&self) -> f64 {
        match *self {
            FrequencyOffset::Hz(f) => f,
            FrequencyOffset::Normalized { epsilon, scs_hz } => epsilon * scs_hz,
        }
    }

    pub fn epsilon(&self, scs_hz: f64) -> f64 {
        match *self {
            FrequencyOffset::Hz(f) => f / scs_hz,
            FrequencyOffset::Normalized { epsilon, .. } => epsilon,
        }
    }
}

impl Default for FrequencyOffset {
    fn default() -> Self {
        FrequencyOffset::Hz(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// `None` disables the noise source.
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub cfo: FrequencyOffset,
    #[serde(default)]
    pub rng_seed: u64,
}

impl ChannelConfig {
    pub fn noiseless() -> Self {
        ChannelConfig {
            snr_db: None,
            cfo: FrequencyOffset::default(),
            rng_seed: 0,
        }
    }

    pub fn awgn(snr_db: f64, rng_seed: u64) -> Self {
        ChannelConfig {
            snr_db: Some(snr_db),
            cfo: FrequencyOffset::default(),
            rng_seed,
        }
    }

    pub fn with_cfo(mut self, cfo: FrequencyOffset) -> Self {
        self.cfo = cfo;
        self
    }
}

/// `y[n] = x[n] e^{j 2 pi cfo n / fs} + w[n]`, with `w` complex white
/// Gaussian noise at `mean|x|^2 / 10^(snr/10)`.
pub fn apply_channel(wave: &IqWaveform, cfg: &ChannelConfig) -> IqWaveform {
    let mut out = wave.samples().to_vec();
    let cfo_hz = cfg.cfo.hz();
    if cfo_hz != 0.0 {
        let step = 2.0 * PI * cfo_hz / wave.sample_rate_hz();
        for (n, v) in out.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, step * n as f64);
        }
    }
    if let Some(snr_db) = cfg.snr_db {
        if !out.is_empty() {
            let power = out.iter().map(|v| v.norm_sqr()).sum::<f64>() / out.len() as f64;
            let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            for v in out.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *v += Complex64::new(re * sigma, im * sigma);
            }
        }
    }
    wave.with_samples(out)
}
