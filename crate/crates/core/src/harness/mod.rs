//! Experiment plumbing: configuration, one seeded trial end to end, grid
//! sweeps with CSV output, and the BER link model.

mod ber;
mod sweep;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::active::{iq_fine_timing, iq_symmetric_timing};
use crate::detect::{
    baseline_one_template, baseline_rising_edge, nft_detect, quantized_detect, sa_detect, sd_detect, sd_plus_detect,
    sst_detect, DecisionRule, Method, SignalDomain, SyncParams, SyncResult, TemplateSet, Thresholds,
};
use crate::error::{invalid, Result};
use crate::frontend::{
    apply_channel, extract_envelope, quantize_adc, quantize_comparator, ChannelConfig, Envelope, FrequencyOffset,
    ThresholdPolicy,
};
use crate::resources::computational_load;
use crate::waveform::{
    build_downlink_frame, generate_pss_sequence, pss_time_domain, CellSector, IqWaveform, NumerologyConfig,
};

pub use ber::{ber_experiment, with_without_sync_ber, BerLink, BerRecord, Modulation, SyncMode, SyncedBerRecord};
pub use sweep::{run_point, summarize, sweep, OutputFormat, PointSummary, SweepOutput, TrialRow};

/// A trial counts as synchronized when its error is below this.
pub const SUCCESS_THRESHOLD_US: f64 = 8.0;

/// Tag front end: envelope smoothing, ADC and comparator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontEndConfig {
    /// Envelope-detector smoothing span in tag sample periods.
    pub smooth_tag_samples: f64,
    /// ADC resolution for the unquantized detectors; `None` keeps f64.
    /// In config files `0` stands for `None`.
    #[serde(deserialize_with = "bits_or_off")]
    pub adc_bits: Option<u32>,
    /// Comparator sliding-mean window in units of `rho`.
    pub comparator_window_rho: usize,
}

fn bits_or_off<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<u32>, D::Error> {
    Ok(Option::<u32>::deserialize(d)?.filter(|&b| b != 0))
}

impl Default for FrontEndConfig {
    fn default() -> Self {
        FrontEndConfig {
            smooth_tag_samples: 3.0,
            adc_bits: Some(12),
            comparator_window_rho: 10,
        }
    }
}

impl FrontEndConfig {
    /// Smoothing length in waveform samples: the odd integer nearest to
    /// `smooth_tag_samples` tag periods, so the symmetry point stays on
    /// the waveform grid.
    pub fn smooth_len(&self, wave_rate_hz: f64, tag_rate_hz: f64) -> usize {
        let span = self.smooth_tag_samples * wave_rate_hz / tag_rate_hz;
        let k = ((span - 1.0) / 2.0).round().max(0.0) as usize;
        2 * k + 1
    }

    pub fn comparator(&self, rho: usize) -> ThresholdPolicy {
        ThresholdPolicy::SlidingMean {
            window: (self.comparator_window_rho * rho).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.smooth_tag_samples.is_finite() && self.smooth_tag_samples >= 0.0) {
            return invalid("smooth_tag_samples must be finite and non-negative");
        }
        if let Some(b) = self.adc_bits {
            if !(1..=16).contains(&b) {
                return invalid("adc_bits must be within 1..=16");
            }
        }
        if self.comparator_window_rho == 0 {
            return invalid("comparator_window_rho must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub nid2_values: Vec<CellSector>,
    pub tag_rates_hz: Vec<f64>,
    /// `inf` disables noise.
    pub snr_db_values: Vec<f64>,
    /// CFO normalized to the subcarrier spacing.
    pub cfo_values: Vec<f64>,
    pub trials_per_point: usize,
    pub frame_duration_s: f64,
    pub rng_seed: u64,
    pub numerology: NumerologyConfig,
    pub thresholds: Thresholds,
    pub rule: DecisionRule,
    pub frontend: FrontEndConfig,
    pub output_path: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec![Method::SdQ],
            nid2_values: vec![CellSector::ALL[0]],
            tag_rates_hz: vec![1e6, 1.92e6, 3.84e6, 5e6, 7.68e6],
            snr_db_values: vec![15.0],
            cfo_values: vec![0.0],
            trials_per_point: 100,
            frame_duration_s: 5e-3,
            rng_seed: 1,
            numerology: NumerologyConfig::default(),
            thresholds: Thresholds::default(),
            rule: DecisionRule::PerPeriod,
            frontend: FrontEndConfig::default(),
            output_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| crate::error::Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("methods", self.methods.is_empty()),
            ("nid2_values", self.nid2_values.is_empty()),
            ("tag_rates_hz", self.tag_rates_hz.is_empty()),
            ("snr_db_values", self.snr_db_values.is_empty()),
            ("cfo_values", self.cfo_values.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return invalid(format!("grid '{name}' is empty"));
        }
        if self.trials_per_point == 0 {
            return invalid("trials_per_point must be at least 1");
        }
        self.numerology.validate()?;
        self.frontend.validate()?;
        let wave_rate = self.numerology.sample_rate_hz();
        for &r in &self.tag_rates_hz {
            if !(r.is_finite() && r > 0.0 && r <= wave_rate) {
                return invalid(format!("tag rate {r} Hz outside (0, {wave_rate}]"));
            }
            if (r / self.numerology.scs_hz).round() < 4.0 {
                return invalid(format!("tag rate {r} Hz gives a PSS window under 4 samples"));
            }
        }
        if self.snr_db_values.iter().any(|s| s.is_nan()) || self.cfo_values.iter().any(|c| !c.is_finite()) {
            return invalid("SNR and CFO values must be numbers");
        }
        if self.frame_duration_s < self.numerology.ssb_period_s {
            return invalid("frame_duration_s must cover at least one SSB period");
        }
        Ok(())
    }

    /// Cartesian product in method, nid2, rate, SNR, CFO order.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for &method in &self.methods {
            for &nid2 in &self.nid2_values {
                for &tag_rate_hz in &self.tag_rates_hz {
                    for &snr_db in &self.snr_db_values {
                        for &cfo_epsilon in &self.cfo_values {
                            out.push(Point {
                                method,
                                nid2,
                                tag_rate_hz,
                                snr_db,
                                cfo_epsilon,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Detector parameters at one tag rate.
    pub fn params(&self, method: Method, tag_rate_hz: f64) -> Result<SyncParams> {
        let mut p = SyncParams::for_rate(tag_rate_hz, self.numerology.scs_hz, self.numerology.ssb_period_s)?
            .with_rule(self.rule);
        p.thresholds = self.thresholds;
        if method.is_quantized() {
            p = p.with_domain(SignalDomain::OneBit);
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub method: Method,
    pub nid2: CellSector,
    pub tag_rate_hz: f64,
    pub snr_db: f64,
    pub cfo_epsilon: f64,
}

impl Point {
    fn channel(&self, scs_hz: f64, noise_seed: u64) -> ChannelConfig {
        let base = if self.snr_db.is_infinite() && self.snr_db > 0.0 {
            ChannelConfig::noiseless()
        } else {
            ChannelConfig::awgn(self.snr_db, noise_seed)
        };
        base.with_cfo(FrequencyOffset::Normalized {
            epsilon: self.cfo_epsilon,
            scs_hz,
        })
    }
}

/// Per-trial seeds. They depend on the trial index and sector only, so
/// every method, rate and SNR sees the same frames and noise draws.
fn trial_seeds(rng_seed: u64, nid2: CellSector, trial: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(((trial as u64) << 2) | nid2.get() as u64);
    (rng.next_u64(), rng.next_u64())
}

/// Everything a trial needs that does not change between trials.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub point: Point,
    pub params: SyncParams,
    pub smooth_len: usize,
    templates: Option<TemplateSet>,
    pss_iq: Vec<IqWaveform>,
}

impl TrialContext {
    pub fn new(cfg: &ExperimentConfig, point: Point) -> Result<Self> {
        let params = cfg.params(point.method, point.tag_rate_hz)?;
        let num = &cfg.numerology;
        let smooth_len = cfg.frontend.smooth_len(num.sample_rate_hz(), point.tag_rate_hz);
        let templates = match point.method {
            Method::Nft | Method::Sst | Method::OneTemplate => {
                Some(TemplateSet::build(num, point.tag_rate_hz, smooth_len, params.rho)?)
            }
            // The slow comparator settles near the data-symbol envelope mean.
            Method::NftQ | Method::SstQ => Some(
                TemplateSet::build(num, point.tag_rate_hz, smooth_len, params.rho)?
                    .with_bit_threshold(num.data_envelope_mean()),
            ),
            _ => None,
        };
        let pss_iq = if point.method == Method::ActiveXcorr {
            CellSector::ALL
                .iter()
                .map(|&s| {
                    let sym = pss_time_domain(&generate_pss_sequence(s), num)?;
                    let body = sym.samples()[num.cp_samples..].to_vec();
                    IqWaveform::new(body, sym.sample_rate_hz(), Vec::new())
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(TrialContext {
            point,
            params,
            smooth_len,
            templates,
            pss_iq,
        })
    }
}

/// Outcome of one trial. Attempts are the true PSS instances in the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: Point,
    pub trial: usize,
    pub rho: usize,
    /// Nearest-detection error per attempt; infinite when missed.
    pub errors_us: Vec<f64>,
    /// Commit delay of that nearest detection; NaN when missed.
    pub delays_us: Vec<f64>,
    pub success: Vec<bool>,
    pub ops: Option<u64>,
    /// Set when the pipeline failed; the trial then counts as missed.
    pub failure: Option<String>,
}

/// Envelope at the tag, before any quantization.
pub fn tag_envelope(ctx: &TrialContext, rx: &IqWaveform) -> Result<Envelope> {
    extract_envelope(rx, ctx.point.tag_rate_hz, ctx.smooth_len)
}

fn detect(cfg: &ExperimentConfig, ctx: &TrialContext, rx: &IqWaveform) -> Result<(SyncResult, Vec<f64>, f64, u64)> {
    let method = ctx.point.method;
    let params = &ctx.params;
    let num = &cfg.numerology;
    if method.is_active() {
        let res = match method {
            Method::ActiveXcorr => iq_fine_timing(rx, &ctx.pss_iq, num, true)?,
            _ => iq_symmetric_timing(rx, num)?,
        };
        return Ok((res, rx.pss_centers(), rx.sample_rate_hz(), rx.len() as u64));
    }
    let env = tag_envelope(ctx, rx)?;
    let truth = env.true_pss_centers().to_vec();
    let rate = env.sample_rate_hz();
    let n = env.len() as u64;
    let templates = ctx.templates.as_ref();
    let need = || templates.ok_or_else(|| crate::error::Error::InvalidArgument("templates missing".into()));
    let res = if method.is_quantized() {
        let bits = quantize_comparator(&env, cfg.frontend.comparator(params.rho))?;
        quantized_detect(&bits, method, templates, params)?
    } else {
        let env = match cfg.frontend.adc_bits {
            Some(b) => quantize_adc(&env, b)?,
            None => env,
        };
        match method {
            Method::Nft => nft_detect(&env, &need()?.full, params)?,
            Method::Sst => sst_detect(&env, &need()?.half, params)?,
            Method::Sa => sa_detect(&env, params)?,
            Method::Sd => sd_detect(&env, params)?,
            Method::SdPlus => sd_plus_detect(&env, params)?,
            Method::OneTemplate => baseline_one_template(&env, &need()?.full[0], params)?,
            Method::RisingEdge => baseline_rising_edge(&env, params)?,
            other => return invalid(format!("{other} is not an envelope detector")),
        }
    };
    Ok((res, truth, rate, n))
}

fn ops_for(method: Method, res: &SyncResult, n: u64, rho: usize) -> Option<u64> {
    let gated = match method {
        Method::Sst | Method::SstQ => res.stage2_windows as u64,
        Method::SdPlus => res.windows as u64,
        _ => 0,
    };
    computational_load(method, n, rho, gated).ok().map(|l| l.total_ops)
}

/// Frame, channel, front end, detector and scoring for one seeded trial.
/// Pipeline errors are recorded on the trial, not returned.
pub fn run_trial(cfg: &ExperimentConfig, ctx: &TrialContext, trial: usize) -> TrialRecord {
    let point = ctx.point;
    let num = &cfg.numerology;
    let (payload_seed, noise_seed) = trial_seeds(cfg.rng_seed, point.nid2, trial);
    let outcome = build_downlink_frame(point.nid2, cfg.frame_duration_s, num, payload_seed).and_then(|frame| {
        let rx = apply_channel(&frame, &point.channel(num.scs_hz, noise_seed));
        detect(cfg, ctx, &rx)
    });
    let attempts = (cfg.frame_duration_s / num.ssb_period_s).round() as usize;
    match outcome {
        Ok((res, truth, rate, n)) => {
            let errors_us = res.attempt_errors_us(&truth, rate);
            let delays_us = truth
                .iter()
                .map(|&t| {
                    res.detections
                        .iter()
                        .min_by(|a, b| (a.center as f64 - t).abs().total_cmp(&(b.center as f64 - t).abs()))
                        .map_or(f64::NAN, |d| (d.commit_index as f64 - t) / rate * 1e6)
                })
                .collect();
            TrialRecord {
                point,
                trial,
                rho: ctx.params.rho,
                success: errors_us.iter().map(|&e| e < SUCCESS_THRESHOLD_US).collect(),
                errors_us,
                delays_us,
                ops: ops_for(point.method, &res, n, ctx.params.rho),
                failure: None,
            }
        }
        Err(e) => TrialRecord {
            point,
            trial,
            rho: ctx.params.rho,
            errors_us: vec![f64::INFINITY; attempts],
            delays_us: vec![f64::NAN; attempts],
            success: vec![false; attempts],
            ops: None,
            failure: Some(e.to_string()),
        },
    }
}
