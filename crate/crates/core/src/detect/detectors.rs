use crate::error::{invalid, Result};
use crate::frontend::{BitStream, Envelope};
use crate::waveform::CellSector;

use super::bits::{sd_q_counts, similarity_trace};
use super::metrics::{correlation_trace, sd_trace, sym_autocorr_trace};
use super::select::{best, indices_in, peaks, per_period, period_windows, Extreme};
use super::{
    BitTemplate, DecisionRule, Detection, Method, PssTemplate, SignalDomain, SyncParams, SyncResult, TemplateSet,
};

/// Per-center scores of one or more template correlations: the best
/// template's score and its sector.
pub(crate) struct TemplateScores {
    pub(crate) scores: Vec<f64>,
    pub(crate) sector: Vec<u8>,
    /// Center of `scores[0]` (template start + template center offset).
    pub(crate) origin: usize,
}

pub(crate) fn best_of_templates(traces: &[Vec<f64>], origin: usize) -> TemplateScores {
    let count = traces.iter().map(Vec::len).min().unwrap_or(0);
    let mut scores = Vec::with_capacity(count);
    let mut sector = Vec::with_capacity(count);
    for t in 0..count {
        let (mut best_i, mut best_v) = (0, traces[0][t]);
        for (i, tr) in traces.iter().enumerate().skip(1) {
            if tr[t] > best_v {
                best_i = i;
                best_v = tr[t];
            }
        }
        scores.push(best_v);
        sector.push(best_i as u8);
    }
    TemplateScores { scores, sector, origin }
}

/// Decision for template matchers. `gate` forces the absolute threshold
/// in per-period mode as well.
pub(crate) fn decide_template(
    ts: &TemplateScores,
    sectors: &[CellSector],
    len: usize,
    params: &SyncParams,
    commit_after_center: usize,
    gate: bool,
) -> Vec<Detection> {
    let thr = params.thresholds.correlation;
    let picks = match (params.rule, params.period_samples) {
        (DecisionRule::PerPeriod, Some(p)) => per_period(&ts.scores, ts.origin, len, p, Extreme::Max)
            .into_iter()
            .filter(|&i| !gate || ts.scores[i] >= thr)
            .collect(),
        _ => peaks(&ts.scores, params.rho, Extreme::Max, |v| v >= thr),
    };
    picks
        .into_iter()
        .map(|i| {
            let center = ts.origin + i;
            Detection {
                center,
                nid2: Some(sectors[ts.sector[i] as usize]),
                commit_index: center + commit_after_center,
                score: ts.scores[i],
            }
        })
        .collect()
}

fn check_templates(templates: &[PssTemplate], half: bool, len: usize) -> Result<()> {
    if templates.len() != 3 {
        return invalid(format!("expected 3 templates, got {}", templates.len()));
    }
    if templates.iter().any(|t| t.is_half() != half || t.len() != len) {
        let kind = if half { "half" } else { "full" };
        return invalid(format!("templates must all be {kind} templates of length {len}"));
    }
    Ok(())
}

/// NR fine timing over envelopes: Pearson correlation with all three
/// PSS templates, best sector per position.
pub fn nft_detect(env: &Envelope, templates: &[PssTemplate], params: &SyncParams) -> Result<SyncResult> {
    params.validate()?;
    check_templates(templates, false, params.rho)?;
    let traces: Vec<Vec<f64>> = templates
        .iter()
        .map(|t| correlation_trace(env.samples(), t.values()).0)
        .collect();
    let half = params.half();
    let ts = best_of_templates(&traces, half);
    let sectors: Vec<CellSector> = templates.iter().map(PssTemplate::nid2).collect();
    let detections = decide_template(&ts, &sectors, env.len(), params, params.rho - 1 - half, false);
    let mut res = SyncResult::new(Method::Nft, detections, env.true_pss_centers(), env.sample_rate_hz());
    res.windows = ts.scores.len();
    Ok(res)
}

/// Detections for a center-indexed symmetry score.
fn decide_symmetric(
    scores: &[f64],
    origin: usize,
    len: usize,
    params: &SyncParams,
    ext: Extreme,
    accept: impl Fn(f64) -> bool,
) -> Vec<Detection> {
    let half = params.half();
    let picks = match (params.rule, params.period_samples) {
        (DecisionRule::PerPeriod, Some(p)) => per_period(scores, origin, len, p, ext),
        _ => peaks(scores, params.rho, ext, accept),
    };
    picks
        .into_iter()
        .map(|i| Detection {
            center: origin + i,
            nid2: None,
            commit_index: origin + i + half,
            score: scores[i],
        })
        .collect()
}

/// Symmetric autocorrelation sync.
pub fn sa_detect(env: &Envelope, params: &SyncParams) -> Result<SyncResult> {
    params.validate()?;
    let half = params.half();
    let (scores, flagged) = sym_autocorr_trace(env.samples(), half);
    let thr = params.thresholds.symmetry;
    let detections = decide_symmetric(&scores, half, env.len(), params, Extreme::Max, |v| v >= thr);
    let mut res = SyncResult::new(Method::Sa, detections, env.true_pss_centers(), env.sample_rate_hz());
    res.windows = scores.len();
    res.flagged = flagged.len();
    Ok(res)
}

fn sd_threshold(scores: &[f64], gamma: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    gamma * scores.iter().sum::<f64>() / scores.len() as f64
}

/// Symmetric differential sync: argmin of `sigma(t)` per period, or local
/// minima below `gamma * mean(sigma)` in threshold mode.
pub fn sd_detect(env: &Envelope, params: &SyncParams) -> Result<SyncResult> {
    params.validate()?;
    let half = params.half();
    let scores = sd_trace(env.samples(), half);
    let thr = sd_threshold(&scores, params.thresholds.sd_gamma);
    let detections = decide_symmetric(&scores, half, env.len(), params, Extreme::Min, |v| v <= thr);
    let mut res = SyncResult::new(Method::Sd, detections, env.true_pss_centers(), env.sample_rate_hz());
    res.windows = scores.len();
    Ok(res)
}

/// SD on the first period only; later PSS positions are extrapolated by
/// whole periods.
pub fn sd_plus_detect(env: &Envelope, params: &SyncParams) -> Result<SyncResult> {
    params.validate()?;
    let Some(period) = params.period_samples else {
        return invalid("SD+ needs a known PSS period");
    };
    let half = params.half();
    let head = (period + 2 * half).min(env.len());
    let scores = sd_trace(&env.samples()[..head], half);
    let first = match params.rule {
        DecisionRule::PerPeriod => best(&scores, indices_in(&(0..period), half, scores.len()), Extreme::Min),
        DecisionRule::Threshold => {
            let thr = sd_threshold(&scores, params.thresholds.sd_gamma);
            peaks(&scores, params.rho, Extreme::Min, |v| v <= thr)
                .into_iter()
                .next()
        }
    };
    let mut detections = Vec::new();
    if let Some(i) = first {
        let center = half + i;
        detections.push(Detection {
            center,
            nid2: None,
            commit_index: center + half,
            score: scores[i],
        });
        let mut next = center + period;
        while next < env.len() {
            detections.push(Detection {
                center: next,
                nid2: None,
                commit_index: next,
                score: f64::NAN,
            });
            next += period;
        }
    }
    let mut res = SyncResult::new(Method::SdPlus, detections, env.true_pss_centers(), env.sample_rate_hz());
    res.windows = scores.len();
    res.acquisition_failed = first.is_none();
    Ok(res)
}

/// Stage-2 scorer for SST: best half-template score of the trailing arm
/// `[c+1, c+h]` of center `c`.
trait HalfMatcher {
    fn score(&self, center: usize) -> (f64, u8);
}

struct RealHalf<'a> {
    x: &'a [f64],
    templates: Vec<&'a [f64]>,
    half: usize,
}

impl HalfMatcher for RealHalf<'_> {
    fn score(&self, c: usize) -> (f64, u8) {
        let arm = &self.x[c + 1..=c + self.half];
        let traces: Vec<Vec<f64>> = self.templates.iter().map(|t| correlation_trace(arm, t).0).collect();
        let ts = best_of_templates(&traces, 0);
        (ts.scores[0], ts.sector[0])
    }
}

struct BitHalf<'a> {
    bits: &'a [u8],
    templates: &'a [BitTemplate],
    half: usize,
}

impl HalfMatcher for BitHalf<'_> {
    fn score(&self, c: usize) -> (f64, u8) {
        let arm = &self.bits[c + 1..=c + self.half];
        let traces: Vec<Vec<f64>> = self
            .templates
            .iter()
            .map(|t| similarity_trace(arm, &t.bits).values)
            .collect();
        let ts = best_of_templates(&traces, 0);
        (ts.scores[0], ts.sector[0])
    }
}

struct SstOutcome {
    detections: Vec<Detection>,
    stage2_windows: usize,
    rejected: usize,
}

/// Two-stage SST decision over a center-indexed symmetry score.
fn sst_decide(
    sym: &[f64],
    len: usize,
    params: &SyncParams,
    sectors: &[CellSector],
    matcher: &dyn HalfMatcher,
) -> SstOutcome {
    let half = params.half();
    let thr_sym = params.thresholds.symmetry;
    let thr_corr = params.thresholds.correlation;
    let mut out = SstOutcome {
        detections: Vec::new(),
        stage2_windows: 0,
        rejected: 0,
    };
    let commit = |out: &mut SstOutcome, group: &[usize], gate: bool| {
        let mut best_hit: Option<(usize, f64, u8)> = None;
        for &i in group {
            let (score, sector) = matcher.score(half + i);
            out.stage2_windows += 1;
            if best_hit.is_none_or(|(_, s, _)| score > s) {
                best_hit = Some((i, score, sector));
            }
        }
        match best_hit {
            Some((i, score, sector)) if !gate || score >= thr_corr => {
                out.detections.push(Detection {
                    center: half + i,
                    nid2: Some(sectors[sector as usize]),
                    commit_index: half + i + half,
                    score,
                });
            }
            Some(_) => out.rejected += 1,
            None => {}
        }
    };
    match (params.rule, params.period_samples) {
        (DecisionRule::PerPeriod, Some(p)) => {
            for w in period_windows(len, p) {
                let range = indices_in(&w, half, sym.len());
                let Some(top) = best(sym, range.clone(), Extreme::Max) else {
                    continue;
                };
                let peak = sym[top];
                let gate = if peak > 0.0 { thr_sym * peak } else { peak };
                let group: Vec<usize> = range.filter(|&i| sym[i] >= gate).collect();
                commit(&mut out, &group, false);
            }
        }
        _ => {
            // Runs of above-threshold symmetry, merged when closer than rho.
            let mut group: Vec<usize> = Vec::new();
            for i in (0..sym.len()).filter(|&i| sym[i] >= thr_sym) {
                if group.last().is_some_and(|&last| i - last > params.rho) {
                    commit(&mut out, &group, true);
                    group.clear();
                }
                group.push(i);
            }
            if !group.is_empty() {
                commit(&mut out, &group, true);
            }
        }
    }
    out
}

/// Symmetry-based semi-template sync: symmetric autocorrelation picks
/// candidate centers, the trailing half window is then matched against
/// the three half templates.
pub fn sst_detect(env: &Envelope, half_templates: &[PssTemplate], params: &SyncParams) -> Result<SyncResult> {
    params.validate()?;
    let half = params.half();
    check_templates(half_templates, true, half)?;
    let (sym, flagged) = sym_autocorr_trace(env.samples(), half);
    let matcher = RealHalf {
        x: env.samples(),
        templates: half_templates.iter().map(PssTemplate::values).collect(),
        half,
    };
    let sectors: Vec<CellSector> = half_templates.iter().map(PssTemplate::nid2).collect();
    let out = sst_decide(&sym, env.len(), params, &sectors, &matcher);
    let mut res = SyncResult::new(
        Method::Sst,
        out.detections,
        env.true_pss_centers(),
        env.sample_rate_hz(),
    );
    res.windows = sym.len();
    res.stage2_windows = out.stage2_windows;
    res.rejected = out.rejected;
    res.flagged = flagged.len();
    Ok(res)
}

/// 1-bit detectors: XOR/XNOR accumulation (SD_Q, SA_Q) and Hamming
/// similarity against comparator-quantized templates (NFT_Q, SST_Q).
pub fn quantized_detect(
    bits: &BitStream,
    method: Method,
    templates: Option<&TemplateSet>,
    params: &SyncParams,
) -> Result<SyncResult> {
    params.validate()?;
    if params.domain != SignalDomain::OneBit {
        return invalid("quantized detectors need one-bit domain parameters");
    }
    let half = params.half();
    let b = bits.bits();
    let len = bits.len();
    let (detections, windows, stage2, rejected) = match method {
        Method::SdQ | Method::SaQ => {
            let counts = sd_q_counts(b, half);
            let h = half as f64;
            let detections = if method == Method::SdQ {
                let scores: Vec<f64> = counts.iter().map(|&c| f64::from(c)).collect();
                let thr = sd_threshold(&scores, params.thresholds.sd_gamma);
                decide_symmetric(&scores, half, len, params, Extreme::Min, |v| v <= thr)
            } else {
                let scores: Vec<f64> = counts.iter().map(|&c| h - f64::from(c)).collect();
                let thr = params.thresholds.symmetry;
                // XNOR count mapped to [-1, 1] for the absolute threshold.
                decide_symmetric(&scores, half, len, params, Extreme::Max, |v| (2.0 * v - h) / h >= thr)
            };
            (detections, counts.len(), 0, 0)
        }
        Method::NftQ => {
            let Some(set) = templates else {
                return invalid("NFT_Q needs 1-bit templates");
            };
            check_bit_templates(&set.full_bits, params.rho)?;
            let traces: Vec<Vec<f64>> = set
                .full_bits
                .iter()
                .map(|t| similarity_trace(b, &t.bits).values)
                .collect();
            let ts = best_of_templates(&traces, half);
            let sectors: Vec<CellSector> = set.full_bits.iter().map(|t| t.nid2).collect();
            let detections = decide_template(&ts, &sectors, len, params, params.rho - 1 - half, false);
            (detections, ts.scores.len(), 0, 0)
        }
        Method::SstQ => {
            let Some(set) = templates else {
                return invalid("SST_Q needs 1-bit templates");
            };
            check_bit_templates(&set.half_bits, half)?;
            let h = half as f64;
            let sym: Vec<f64> = sd_q_counts(b, half)
                .into_iter()
                .map(|c| (h - 2.0 * f64::from(c)) / h)
                .collect();
            let matcher = BitHalf {
                bits: b,
                templates: &set.half_bits,
                half,
            };
            let sectors: Vec<CellSector> = set.half_bits.iter().map(|t| t.nid2).collect();
            let out = sst_decide(&sym, len, params, &sectors, &matcher);
            (out.detections, sym.len(), out.stage2_windows, out.rejected)
        }
        other => return invalid(format!("{other} is not a quantized detector")),
    };
    let mut res = SyncResult::new(method, detections, bits.true_pss_centers(), bits.sample_rate_hz());
    res.windows = windows;
    res.stage2_windows = stage2;
    res.rejected = rejected;
    Ok(res)
}

fn check_bit_templates(templates: &[BitTemplate], len: usize) -> Result<()> {
    if templates.len() != 3 || templates.iter().any(|t| t.bits.len() != len) {
        return invalid(format!("expected 3 bit templates of length {len}"));
    }
    Ok(())
}
