//! Passive PSS detectors over envelopes and comparator bit streams.
//!
//! | method | metric | decision |
//! |---|---|---|
//! | NFT | Pearson correlation against all three PSS envelopes | max |
//! | SST | symmetric autocorrelation gate, then half-template correlation | max |
//! | SA | Pearson correlation between mirrored window arms | max |
//! | SD | `sum |S(t+n) - S(t-n)|` over the window | min |
//! | SD+ | SD on the first period, then periodic extrapolation | min |
//!
//! The `_Q` variants replace every product with XOR/XNOR counting over
//! 1-bit samples.

mod baselines;
mod bits;
mod detectors;
mod metrics;
mod select;
mod stream;
mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::waveform::CellSector;

pub use baselines::{baseline_one_template, baseline_rising_edge};
pub use bits::{sa_q_metric, sd_q_metric, similarity_trace};
pub use detectors::{nft_detect, quantized_detect, sa_detect, sd_detect, sd_plus_detect, sst_detect};
pub use metrics::{cross_correlate, sd_metric, symmetric_autocorr};
pub use stream::SdStream;

pub(crate) use detectors::best_of_templates;
pub(crate) use select::{per_period, Extreme};
pub use template::{BitTemplate, PssTemplate, TemplateSet};

/// Every synchronization method the crate can run or cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Nft,
    Sst,
    Sa,
    Sd,
    SdPlus,
    NftQ,
    SstQ,
    SaQ,
    SdQ,
    /// Single nid2=0 template (Multiscatter / SyncLTE style).
    OneTemplate,
    /// PSS rising-edge energy detection (LScatter style).
    RisingEdge,
    ActiveXcorr,
    ActiveAutocorr,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::Nft,
        Method::Sst,
        Method::Sa,
        Method::Sd,
        Method::SdPlus,
        Method::NftQ,
        Method::SstQ,
        Method::SaQ,
        Method::SdQ,
        Method::OneTemplate,
        Method::RisingEdge,
        Method::ActiveXcorr,
        Method::ActiveAutocorr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nft => "NFT",
            Method::Sst => "SST",
            Method::Sa => "SA",
            Method::Sd => "SD",
            Method::SdPlus => "SD+",
            Method::NftQ => "NFT_Q",
            Method::SstQ => "SST_Q",
            Method::SaQ => "SA_Q",
            Method::SdQ => "SD_Q",
            Method::OneTemplate => "one-template",
            Method::RisingEdge => "rising-edge",
            Method::ActiveXcorr => "active-xcorr",
            Method::ActiveAutocorr => "active-autocorr",
        }
    }

    pub fn is_quantized(self) -> bool {
        matches!(self, Method::NftQ | Method::SstQ | Method::SaQ | Method::SdQ)
    }

    pub fn is_active(self) -> bool {
        matches!(self, Method::ActiveXcorr | Method::ActiveAutocorr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let m = match key.as_str() {
            "nft" => Method::Nft,
            "sst" => Method::Sst,
            "sa" => Method::Sa,
            "sd" => Method::Sd,
            "sd+" | "sd_plus" | "sdplus" => Method::SdPlus,
            "nft_q" => Method::NftQ,
            "sst_q" => Method::SstQ,
            "sa_q" => Method::SaQ,
            "sd_q" => Method::SdQ,
            "one_template" => Method::OneTemplate,
            "rising_edge" => Method::RisingEdge,
            "active_xcorr" => Method::ActiveXcorr,
            "active_autocorr" => Method::ActiveAutocorr,
            _ => return invalid(format!("unknown method '{s}'")),
        };
        Ok(m)
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.as_str().to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalDomain {
    RealEnvelope,
    OneBit,
}

/// How detections are committed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// One detection per PSS period: best metric inside each
    /// frame-anchored period window. Symmetry gates are relative to the
    /// best score of the period.
    PerPeriod,
    /// Free-running acquisition: peaks past absolute thresholds.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Pearson / Hamming-similarity threshold for template matching.
    pub correlation: f64,
    /// Symmetric-autocorrelation threshold (SA, SST stage 1).
    pub symmetry: f64,
    /// SD threshold mode: local minima below `gamma * mean(sigma)`.
    pub sd_gamma: f64,
    /// Rising-edge trigger: post/pre window energy ratio.
    pub rise_ratio: f64,
    /// Correlation gate of the one-template baseline.
    pub one_template: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            correlation: 0.8,
            symmetry: 0.7,
            sd_gamma: 0.3,
            rise_ratio: 1.5,
            one_template: 0.55,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncParams {
    /// PSS window length in tag samples.
    pub rho: usize,
    /// PSS period at the tag rate, if known.
    pub period_samples: Option<usize>,
    pub thresholds: Thresholds,
    pub rule: DecisionRule,
    pub domain: SignalDomain,
    /// Rising-edge energy window in samples.
    pub edge_window: usize,
    /// Distance from a detected rising edge to the PSS center it implies.
    pub edge_center_offset: usize,
}

impl SyncParams {
    /// `rho = round(tag_rate / scs)`, period from `period_s`, default
    /// thresholds and the per-period decision rule.
    pub fn for_rate(tag_rate_hz: f64, scs_hz: f64, period_s: f64) -> Result<Self> {
        let rho = (tag_rate_hz / scs_hz).round() as usize;
        let period = (period_s * tag_rate_hz).round() as usize;
        SyncParams::new(rho, Some(period))
    }

    pub fn new(rho: usize, period_samples: Option<usize>) -> Result<Self> {
        let params = SyncParams {
            rho,
            period_samples,
            thresholds: Thresholds::default(),
            rule: DecisionRule::PerPeriod,
            domain: SignalDomain::RealEnvelope,
            edge_window: (rho / 8).max(2),
            // CP (~7 % of a symbol) plus half the symbol body.
            edge_center_offset: rho / 2 + (0.0703 * rho as f64).round() as usize,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_rule(mut self, rule: DecisionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_domain(mut self, domain: SignalDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho < 4 {
            return invalid(format!("rho must be at least 4 (got {})", self.rho));
        }
        if self.period_samples == Some(0) {
            return invalid("period_samples must be positive");
        }
        if self.edge_window == 0 {
            return invalid("edge_window must be positive");
        }
        Ok(())
    }

    /// Arm length of the symmetric window, `floor(rho / 2)`.
    pub fn half(&self) -> usize {
        self.rho / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    CrossCorr,
    SymAutocorr,
    SdSigma,
    Hamming,
    Similarity,
}

/// Per-position metric values. `values[i]` belongs to envelope index
/// `origin + i`: the window start for template correlations, the window
/// center for symmetric metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTrace {
    pub kind: MetricKind,
    pub values: Vec<f64>,
    pub origin: usize,
    /// Trace indices whose window had zero variance (value forced to 0).
    pub flagged: Vec<usize>,
}

impl MetricTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Detected PSS center in tag samples.
    pub center: usize,
    pub nid2: Option<CellSector>,
    /// Last sample observed before the decision.
    pub commit_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    pub method: Method,
    pub detections: Vec<Detection>,
    pub errors_us: Vec<f64>,
    pub delays_us: Vec<f64>,
    /// Metric windows evaluated by the (first) sliding stage.
    pub windows: usize,
    /// Windows evaluated by a gated second stage (SST stage 2).
    pub stage2_windows: usize,
    /// SST: stage-1 candidates rejected by stage 2.
    pub rejected: usize,
    /// Zero-variance windows met while computing metrics.
    pub flagged: usize,
    /// SD+: no center found in the first period, nothing extrapolated.
    pub acquisition_failed: bool,
}

impl SyncResult {
    pub(crate) fn new(
        method: Method,
        mut detections: Vec<Detection>,
        true_centers: &[f64],
        sample_rate_hz: f64,
    ) -> Self {
        detections.sort_by_key(|d| d.center);
        let mut errors_us = Vec::with_capacity(detections.len());
        let mut delays_us = Vec::with_capacity(detections.len());
        for d in &detections {
            if let Some(truth) = nearest(true_centers, d.center as f64) {
                errors_us.push((d.center as f64 - truth).abs() / sample_rate_hz * 1e6);
                delays_us.push((d.commit_index as f64 - truth) / sample_rate_hz * 1e6);
            }
        }
        SyncResult {
            method,
            detections,
            errors_us,
            delays_us,
            windows: 0,
            stage2_windows: 0,
            rejected: 0,
            flagged: 0,
            acquisition_failed: false,
        }
    }

    /// Error of each true PSS against its nearest detection, in µs;
    /// infinite when nothing was detected.
    pub fn attempt_errors_us(&self, true_centers: &[f64], sample_rate_hz: f64) -> Vec<f64> {
        true_centers
            .iter()
            .map(|&truth| {
                self.detections
                    .iter()
                    .map(|d| (d.center as f64 - truth).abs() / sample_rate_hz * 1e6)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

fn nearest(sorted: &[f64], x: f64) -> Option<f64> {
    sorted
        .iter()
        .copied()
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
}
