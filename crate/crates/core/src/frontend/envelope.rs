use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::waveform::IqWaveform;

/// Non-negative magnitude samples at the tag's sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    /// Ground-truth PSS centers in (fractional) tag samples.
    true_pss_centers: Vec<f64>,
}

impl Envelope {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, true_pss_centers: Vec<f64>) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return invalid("sample rate must be positive");
        }
        if let Some(bad) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return invalid(format!("envelope sample {bad} is not a finite value >= 0"));
        }
        Ok(Envelope {
            samples,
            sample_rate_hz,
            true_pss_centers,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn true_pss_centers(&self) -> &[f64] {
        &self.true_pss_centers
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }

    pub(crate) fn map_samples(&self, samples: Vec<f64>) -> Envelope {
        debug_assert_eq!(samples.len(), self.samples.len());
        Envelope {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            true_pss_centers: self.true_pss_centers.clone(),
        }
    }
}

/// Centered moving average over `len` samples; the window shrinks at the
/// edges. Returns the smoothed signal and the shift of a symmetry point
/// (nonzero only for even `len`).
fn moving_average(x: &[f64], len: usize) -> (Vec<f64>, f64) {
    let before = (len - 1) / 2;
    let after = len - 1 - before;
    let out = (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(x.len() - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    (out, (after - before) as f64 / 2.0)
}

/// Passive envelope detector: `|y[n]|`, moving-average smoothing over
/// `smooth_len` waveform samples, then linear-interpolation resampling to
/// `tag_rate_hz`. No anti-alias filter beyond the smoothing.
pub fn extract_envelope(wave: &IqWaveform, tag_rate_hz: f64, smooth_len: usize) -> Result<Envelope> {
    let wave_rate = wave.sample_rate_hz();
    if !(tag_rate_hz.is_finite() && tag_rate_hz > 0.0) || tag_rate_hz > wave_rate {
        return invalid(format!(
            "tag rate {tag_rate_hz} Hz must be positive and at most the waveform rate {wave_rate} Hz"
        ));
    }
    if smooth_len == 0 {
        return invalid("smooth_len must be at least 1");
    }
    if wave.is_empty() {
        return Envelope::new(Vec::new(), tag_rate_hz, Vec::new());
    }
    let magnitude: Vec<f64> = wave.samples().iter().map(|v| v.norm()).collect();
    let (smoothed, shift) = moving_average(&magnitude, smooth_len);

    let step = wave_rate / tag_rate_hz;
    let count = ((smoothed.len() - 1) as f64 / step).floor() as usize + 1;
    let samples = (0..count)
        .map(|m| {
            let pos = m as f64 * step;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if frac == 0.0 || i + 1 >= smoothed.len() {
                smoothed[i]
            } else {
                smoothed[i] * (1.0 - frac) + smoothed[i + 1] * frac
            }
        })
        .collect();
    let centers = wave.pss_centers().into_iter().map(|c| (c - shift) / step).collect();
    Envelope::new(samples, tag_rate_hz, centers)
}
