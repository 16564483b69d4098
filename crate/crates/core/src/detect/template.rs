use crate::error::{invalid, Result};
use crate::waveform::{generate_pss_sequence, pss_time_domain, CellSector, NumerologyConfig};

/// Noiseless PSS envelope at the tag rate, as stored on the tag.
#[derive(Debug, Clone, PartialEq)]
pub struct PssTemplate {
    nid2: CellSector,
    values: Vec<f64>,
    half: bool,
}

impl PssTemplate {
    pub fn new(nid2: CellSector, values: Vec<f64>, half: bool) -> Self {
        PssTemplate { nid2, values, half }
    }

    pub fn nid2(&self) -> CellSector {
        self.nid2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_half(&self) -> bool {
        self.half
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Comparator-quantized template.
#[derive(Debug, Clone, PartialEq)]
pub struct BitTemplate {
    pub nid2: CellSector,
    pub bits: Vec<u8>,
}

/// Smoothed envelope of one CP-stripped PSS body, periodic in the body length.
struct PeriodicEnvelope {
    values: Vec<f64>,
    center: f64,
}

impl PeriodicEnvelope {
    fn new(nid2: CellSector, cfg: &NumerologyConfig, smooth_len: usize) -> Result<Self> {
        let sym = pss_time_domain(&generate_pss_sequence(nid2), cfg)?;
        let ann = sym.annotations()[0];
        let body = &sym.samples()[ann.body_start()..];
        let n = body.len();
        let mag: Vec<f64> = body.iter().map(|v| v.norm()).collect();
        let before = (smooth_len - 1) / 2;
        let after = smooth_len - 1 - before;
        let values = (0..n)
            .map(|i| (0..smooth_len).map(|k| mag[(i + n + k - before) % n]).sum::<f64>() / smooth_len as f64)
            .collect();
        Ok(PeriodicEnvelope {
            values,
            center: (n / 2) as f64 - (after - before) as f64 / 2.0,
        })
    }

    fn at(&self, pos: f64) -> f64 {
        let n = self.values.len() as f64;
        let p = pos.rem_euclid(n);
        let i = p.floor() as usize % self.values.len();
        let j = (i + 1) % self.values.len();
        let f = p - p.floor();
        self.values[i] * (1.0 - f) + self.values[j] * f
    }

    /// Samples at `center + k * step` for each tag-sample offset `k`.
    fn sample(&self, offsets: impl Iterator<Item = isize>, step: f64) -> Vec<f64> {
        offsets.map(|k| self.at(self.center + k as f64 * step)).collect()
    }
}

/// Full and second-half templates for all three sectors, real and 1-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    pub full: Vec<PssTemplate>,
    pub half: Vec<PssTemplate>,
    pub full_bits: Vec<BitTemplate>,
    pub half_bits: Vec<BitTemplate>,
}

impl TemplateSet {
    /// Templates matching an envelope front end that smooths over
    /// `smooth_len` waveform samples and samples at `tag_rate_hz`.
    /// Full templates cover center offsets `-h..rho-h`; half templates
    /// cover `1..=h`, the trailing arm of the window.
    pub fn build(cfg: &NumerologyConfig, tag_rate_hz: f64, smooth_len: usize, rho: usize) -> Result<Self> {
        if smooth_len == 0 {
            return invalid("smooth_len must be at least 1");
        }
        if !(tag_rate_hz > 0.0 && tag_rate_hz <= cfg.sample_rate_hz()) {
            return invalid("tag rate must be positive and at most the waveform rate");
        }
        let step = cfg.sample_rate_hz() / tag_rate_hz;
        let h = (rho / 2) as isize;
        let mut set = TemplateSet {
            full: Vec::with_capacity(3),
            half: Vec::with_capacity(3),
            full_bits: Vec::with_capacity(3),
            half_bits: Vec::with_capacity(3),
        };
        for nid2 in CellSector::ALL {
            let env = PeriodicEnvelope::new(nid2, cfg, smooth_len)?;
            let full = env.sample(-h..rho as isize - h, step);
            let half = env.sample(1..=h, step);
            set.full.push(PssTemplate::new(nid2, full, false));
            set.half.push(PssTemplate::new(nid2, half, true));
        }
        for nid2 in CellSector::ALL {
            let t = &set.full[nid2.index()];
            let threshold = t.values().iter().sum::<f64>() / t.len() as f64;
            set.push_bits(nid2, threshold);
        }
        Ok(set)
    }

    /// Re-derives the 1-bit templates with a fixed comparator level, e.g.
    /// the long-run envelope mean a slow comparator settles to.
    pub fn with_bit_threshold(mut self, threshold: f64) -> Self {
        self.full_bits.clear();
        self.half_bits.clear();
        for nid2 in CellSector::ALL {
            self.push_bits(nid2, threshold);
        }
        self
    }

    fn push_bits(&mut self, nid2: CellSector, threshold: f64) {
        let quantize = |v: &[f64]| v.iter().map(|&x| u8::from(x >= threshold)).collect();
        let i = nid2.index();
        let full = quantize(self.full[i].values());
        let half = quantize(self.half[i].values());
        self.full_bits.push(BitTemplate { nid2, bits: full });
        self.half_bits.push(BitTemplate { nid2, bits: half });
    }
}
