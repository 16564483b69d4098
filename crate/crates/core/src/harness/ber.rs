//! Single-symbol backscatter link with a misaligned integrate-and-dump
//! receiver.
//!
//! The tag sends one PSK symbol per `T` seconds, `M` samples each. A
//! receiver window late by `d` samples integrates `M - d` samples of the
//! current symbol and `d` of the next, so after normalization
//! `z = (1 - d/M) s_k + (d/M) s_{k+1} + w`, `w ~ CN(0, sigma^2 / M)`, with
//! `sigma^2` the per-sample noise power at the given SNR.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{run_trial, ExperimentConfig, Point, TrialContext};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Psk16,
}

impl Modulation {
    pub const ALL: [Modulation; 3] = [Modulation::Bpsk, Modulation::Qpsk, Modulation::Psk16];

    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Psk16 => 4,
        }
    }

    pub fn order(self) -> u32 {
        1 << self.bits_per_symbol()
    }

    /// Constellation point of Gray-coded `bits`.
    fn point(self, bits: u32) -> Complex64 {
        let idx = gray_decode(bits);
        Complex64::from_polar(1.0, 2.0 * PI * idx as f64 / self.order() as f64)
    }

    /// Nearest-phase decision, returned as Gray-coded bits.
    fn decide(self, z: Complex64) -> u32 {
        let m = self.order() as f64;
        let idx = (z.arg() / (2.0 * PI) * m).round().rem_euclid(m) as u32;
        idx ^ (idx >> 1)
    }
}

impl std::str::FromStr for Modulation {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Modulation::Bpsk),
            "qpsk" => Ok(Modulation::Qpsk),
            "16psk" | "psk16" => Ok(Modulation::Psk16),
            _ => invalid(format!("unknown modulation '{s}'")),
        }
    }
}

fn gray_decode(mut g: u32) -> u32 {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Tag-side link parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BerLink {
    pub symbol_duration_s: f64,
    pub samples_per_symbol: usize,
    pub symbols_per_trial: usize,
    pub rng_seed: u64,
}

impl Default for BerLink {
    fn default() -> Self {
        BerLink {
            symbol_duration_s: 1.0 / 30e3,
            samples_per_symbol: 128,
            symbols_per_trial: 100,
            rng_seed: 1,
        }
    }
}

impl BerLink {
    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_duration_s.is_finite() && self.symbol_duration_s > 0.0) {
            return invalid("symbol_duration_s must be positive");
        }
        if self.samples_per_symbol == 0 || self.symbols_per_trial == 0 {
            return invalid("samples_per_symbol and symbols_per_trial must be positive");
        }
        Ok(())
    }

    /// Samples of the next symbol inside a window late by `offset_us`.
    fn overlap(&self, offset_us: f64) -> usize {
        let m = self.samples_per_symbol as f64;
        let f = (offset_us.abs() * 1e-6 / self.symbol_duration_s).min(1.0);
        (f * m).round() as usize
    }
}

/// Symbols and unit-variance noise of one trial. Fixed per trial index
/// so that offsets and SNRs are compared on the same draws.
struct TrialDraw {
    bits: Vec<u32>,
    noise: Vec<Complex64>,
}

impl TrialDraw {
    fn new(link: &BerLink, modulation: Modulation, trial: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(link.rng_seed);
        rng.set_stream(trial as u64);
        let k = link.symbols_per_trial;
        let bits = (0..=k).map(|_| rng.random_range(0..modulation.order())).collect();
        let noise = (0..k)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        TrialDraw { bits, noise }
    }

    /// Bit errors over the trial's symbols.
    fn errors(&self, link: &BerLink, modulation: Modulation, overlap: usize, snr_db: f64) -> u64 {
        let m = link.samples_per_symbol as f64;
        let w = overlap as f64 / m;
        let noise_std = (10f64.powf(-snr_db / 10.0) / m).sqrt();
        (0..link.symbols_per_trial)
            .map(|k| {
                let z = modulation.point(self.bits[k]) * (1.0 - w)
                    + modulation.point(self.bits[k + 1]) * w
                    + self.noise[k] * noise_std;
                (modulation.decide(z) ^ self.bits[k]).count_ones() as u64
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub modulation: Modulation,
    pub timing_offset_us: f64,
    pub snr_db: f64,
    pub ber: f64,
    pub trials: usize,
}

/// BER at each fixed timing offset.
pub fn ber_experiment(
    modulation: Modulation,
    offsets_us: &[f64],
    snr_db: f64,
    trials: usize,
    link: &BerLink,
) -> Result<Vec<BerRecord>> {
    link.validate()?;
    if offsets_us.iter().any(|o| !(o.is_finite() && *o >= 0.0)) {
        return invalid("timing offsets must be finite and non-negative");
    }
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let draws: Vec<TrialDraw> = (0..trials).map(|t| TrialDraw::new(link, modulation, t)).collect();
    let total_bits = (trials * link.symbols_per_trial) as f64 * modulation.bits_per_symbol() as f64;
    Ok(offsets_us
        .iter()
        .map(|&offset| {
            let d = link.overlap(offset);
            let errors: u64 = draws.iter().map(|t| t.errors(link, modulation, d, snr_db)).sum();
            BerRecord {
                modulation,
                timing_offset_us: offset,
                snr_db,
                ber: errors as f64 / total_bits,
                trials,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncMode {
    /// Window placed by a real synchronization run.
    Synced,
    /// Window offset uniform over one symbol.
    Unsynced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncedBerRecord {
    pub mode: SyncMode,
    pub modulation: Modulation,
    pub snr_db: f64,
    pub ber: f64,
    pub median_offset_us: f64,
    pub trials: usize,
}

/// BER with and without synchronization at each SNR. In synced mode the
/// offset of trial `t` is the error of trial `t` of the detector given by
/// the first method, sector and rate of `sync`, run at the same SNR.
pub fn with_without_sync_ber(
    modulation: Modulation,
    snr_db_values: &[f64],
    trials: usize,
    link: &BerLink,
    sync: &ExperimentConfig,
) -> Result<Vec<SyncedBerRecord>> {
    link.validate()?;
    sync.validate()?;
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let draws: Vec<TrialDraw> = (0..trials).map(|t| TrialDraw::new(link, modulation, t)).collect();
    let mut offset_rng = ChaCha8Rng::seed_from_u64(link.rng_seed ^ 0x5eed);
    let symbol_us = link.symbol_duration_s * 1e6;
    let random_offsets: Vec<f64> = (0..trials)
        .map(|_| (offset_rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * symbol_us)
        .collect();
    let total_bits = (trials * link.symbols_per_trial) as f64 * modulation.bits_per_symbol() as f64;
    let ber = |offsets: &[f64], snr_db: f64| -> f64 {
        let errors: u64 = draws
            .iter()
            .zip(offsets)
            .map(|(t, &o)| t.errors(link, modulation, link.overlap(o), snr_db))
            .sum();
        errors as f64 / total_bits
    };
    let median = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        super::sweep::quantile(&v, 0.5)
    };
    let mut out = Vec::with_capacity(2 * snr_db_values.len());
    for &snr_db in snr_db_values {
        let point = Point {
            method: sync.methods[0],
            nid2: sync.nid2_values[0],
            tag_rate_hz: sync.tag_rates_hz[0],
            snr_db,
            cfo_epsilon: 0.0,
        };
        let ctx = TrialContext::new(sync, point)?;
        let synced: Vec<f64> = (0..trials)
            .map(|t| {
                run_trial(sync, &ctx, t)
                    .errors_us
                    .first()
                    .copied()
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        for (mode, offsets) in [(SyncMode::Synced, &synced), (SyncMode::Unsynced, &random_offsets)] {
            out.push(SyncedBerRecord {
                mode,
                modulation,
                snr_db,
                ber: ber(offsets, snr_db),
                median_offset_us: median(offsets),
                trials,
            });
        }
    }
    Ok(out)
}
