use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::frontend::Envelope;

/// Uniform mid-rise quantizer with `2^bits` levels over `[0, max(env)]`.
/// The error never exceeds half a step, `max / 2^(bits+1)`.
pub fn quantize_adc(env: &Envelope, bits: u32) -> Result<Envelope> {
    if !(1..=16).contains(&bits) {
        return invalid(format!("ADC depth must be 1..=16 bits (got {bits})"));
    }
    if env.is_empty() {
        return invalid("cannot quantize an empty envelope");
    }
    let max = env.max();
    if max == 0.0 {
        return Ok(env.clone());
    }
    let levels = 1u32 << bits;
    let step = max / f64::from(levels);
    let top = f64::from(levels - 1);
    let samples = env
        .samples()
        .iter()
        .map(|&v| ((v / step).floor().min(top) + 0.5) * step)
        .collect();
    Ok(env.map_samples(samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Fixed(f64),
    /// Centered running mean over `window` samples.
    SlidingMean {
        window: usize,
    },
}

/// 1-bit comparator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitStream {
    bits: Vec<u8>,
    sample_rate_hz: f64,
    threshold_trace: Vec<f64>,
    true_pss_centers: Vec<f64>,
}

impl BitStream {
    pub fn new(
        bits: Vec<u8>,
        sample_rate_hz: f64,
        threshold_trace: Vec<f64>,
        true_pss_centers: Vec<f64>,
    ) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return invalid("bits must be 0 or 1");
        }
        if threshold_trace.len() != bits.len() {
            return invalid("threshold trace length differs from bit count");
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return invalid("sample rate must be positive");
        }
        Ok(BitStream {
            bits,
            sample_rate_hz,
            threshold_trace,
            true_pss_centers,
        })
    }

    /// Bits with a zero threshold trace, for synthetic inputs.
    pub fn from_bits(bits: Vec<u8>, sample_rate_hz: f64) -> Result<Self> {
        let n = bits.len();
        BitStream::new(bits, sample_rate_hz, vec![0.0; n], Vec::new())
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn threshold_trace(&self) -> &[f64] {
        &self.threshold_trace
    }

    pub fn true_pss_centers(&self) -> &[f64] {
        &self.true_pss_centers
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.bits.iter().map(|&b| usize::from(b)).sum::<usize>() as f64 / self.bits.len() as f64
    }
}

fn sliding_mean(x: &[f64], window: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }
    let before = (window - 1) / 2;
    let after = window - 1 - before;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(x.len() - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64
        })
        .collect()
}

/// `bit[n] = 1` iff `env[n] >= threshold[n]`.
pub fn quantize_comparator(env: &Envelope, policy: ThresholdPolicy) -> Result<BitStream> {
    let thresholds = match policy {
        ThresholdPolicy::Fixed(v) => {
            if !v.is_finite() {
                return invalid("fixed threshold must be finite");
            }
            vec![v; env.len()]
        }
        ThresholdPolicy::SlidingMean { window } => {
            if window == 0 {
                return invalid("sliding-mean window must be at least 1");
            }
            if env.is_empty() {
                Vec::new()
            } else {
                sliding_mean(env.samples(), window)
            }
        }
    };
    let bits = env
        .samples()
        .iter()
        .zip(&thresholds)
        .map(|(v, t)| u8::from(v >= t))
        .collect();
    BitStream::new(bits, env.sample_rate_hz(), thresholds, env.true_pss_centers().to_vec())
}
