use crate::error::{invalid, Result};
use crate::frontend::Envelope;

use super::detectors::{best_of_templates, decide_template};
use super::metrics::correlation_trace;
use super::select::period_windows;
use super::{DecisionRule, Detection, Method, PssTemplate, SyncParams, SyncResult};

/// Prior-work passive sync: correlation against the nid2=0 template only,
/// gated by `thresholds.one_template` in every decision mode.
pub fn baseline_one_template(env: &Envelope, tmpl0: &PssTemplate, params: &SyncParams) -> Result<SyncResult> {
    params.validate()?;
    if tmpl0.is_half() || tmpl0.len() != params.rho {
        return invalid(format!(
            "one-template baseline needs a full template of length {}",
            params.rho
        ));
    }
    let (trace, flagged) = correlation_trace(env.samples(), tmpl0.values());
    let half = params.half();
    let ts = best_of_templates(&[trace], half);
    let mut gated = params.clone();
    gated.thresholds.correlation = params.thresholds.one_template;
    let detections = decide_template(&ts, &[tmpl0.nid2()], env.len(), &gated, params.rho - 1 - half, true);
    let mut res = SyncResult::new(
        Method::OneTemplate,
        detections,
        env.true_pss_centers(),
        env.sample_rate_hz(),
    );
    res.windows = ts.scores.len();
    res.flagged = flagged.len();
    Ok(res)
}

/// Energy-rise trigger at `n`: the mean of the next `w` samples and `S[n]`
/// itself both reach `ratio` times the mean of the previous `w`.
fn rising_edges(x: &[f64], w: usize, ratio: f64) -> Vec<bool> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + v);
    }
    (0..x.len())
        .map(|n| {
            if n < w || n + w > x.len() {
                return false;
            }
            let before = (prefix[n] - prefix[n - w]) / w as f64;
            let after = (prefix[n + w] - prefix[n]) / w as f64;
            x[n] > 0.0 && after >= ratio * before && x[n] >= ratio * before
        })
        .collect()
}

/// Prior-work passive sync: the first energy rise in each period is taken
/// as the start of the PSS symbol.
pub fn baseline_rising_edge(env: &Envelope, params: &SyncParams) -> Result<SyncResult> {
    params.validate()?;
    let x = env.samples();
    let w = params.edge_window;
    let hits = rising_edges(x, w, params.thresholds.rise_ratio);
    let edge = |n: usize| Detection {
        center: n + params.edge_center_offset,
        nid2: None,
        commit_index: n + w - 1,
        score: 1.0,
    };
    let mut detections = Vec::new();
    match (params.rule, params.period_samples) {
        (DecisionRule::PerPeriod, Some(p)) => {
            for win in period_windows(x.len(), p) {
                if let Some(n) = win.clone().find(|&n| hits[n]) {
                    detections.push(edge(n));
                }
            }
        }
        _ => {
            let mut last: Option<usize> = None;
            for n in (0..x.len()).filter(|&n| hits[n]) {
                if last.is_none_or(|l| n - l > params.rho) {
                    detections.push(edge(n));
                    last = Some(n);
                }
            }
        }
    }
    let mut res = SyncResult::new(
        Method::RisingEdge,
        detections,
        env.true_pss_centers(),
        env.sample_rate_hz(),
    );
    res.windows = x.len().saturating_sub(2 * w);
    Ok(res)
}
